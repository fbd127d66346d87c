use std::path::Path;

use anyhow::{Context, Result};
use spatialspill::ingest::{self, AttributeTable, GeometrySet};
use spatialspill::weights::{self, Provenance};
use spatialspill::{Normalization, WeightsMatrix};

use crate::output::Outputs;
use crate::{CliError, Norm};

pub fn table(path: &Path, id_column: &str, out: &mut Outputs) -> Result<AttributeTable> {
    out.input(path);
    ingest::load_table(path, id_column).with_context(|| format!("reading data `{}`", path.display()))
}

pub fn geometry(path: &Path, id_property: &str, out: &mut Outputs) -> Result<GeometrySet> {
    out.input(path);
    ingest::load_geometry(path, id_property).with_context(|| format!("reading geometry `{}`", path.display()))
}

/// Reads a `.gal` or `.wm` file. GAL neighbour lists become binary weights,
/// row-normalized unless `norm` says otherwise; `.wm` files keep their stored
/// normalization unless one is requested.
pub fn weights_file(path: &Path, norm: Option<Norm>, out: &mut Outputs) -> Result<WeightsMatrix> {
    out.input(path);
    let ctx = || format!("reading weights `{}`", path.display());
    let w = match extension(path).as_deref() {
        Some("gal") => {
            let g = ingest::read_gal(path).with_context(ctx)?;
            WeightsMatrix::binary(&g, Provenance::Graph)
                .normalize(norm.map(Into::into).unwrap_or(Normalization::Row))
                .with_context(ctx)?
        }
        Some("wm") => {
            let w = weights::read_wm(path).with_context(ctx)?;
            match norm {
                Some(n) if Normalization::from(n) != w.normalization() => w.normalize(n.into()).with_context(ctx)?,
                _ => w,
            }
        }
        _ => return Err(CliError::Usage(format!("weights file `{}` must end in .gal or .wm", path.display())).into()),
    };
    Ok(w)
}

/// Reorders `w` to the given region order; every id must match.
pub fn align(w: &WeightsMatrix, ids: &[String]) -> Result<WeightsMatrix> {
    if w.region_ids() == ids {
        return Ok(w.clone());
    }
    let perm = ingest::alignment(ids, w.region_ids()).context("aligning weights with the data")?;
    Ok(w.permuted(&perm))
}

pub fn weights_for(path: &Path, norm: Option<Norm>, ids: &[String], out: &mut Outputs) -> Result<WeightsMatrix> {
    align(&weights_file(path, norm, out)?, ids)
}

pub fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

pub fn columns<'a>(t: &'a AttributeTable, names: &[String]) -> Result<Vec<&'a [f64]>> {
    names.iter().map(|n| Ok(t.column(n)?)).collect()
}
