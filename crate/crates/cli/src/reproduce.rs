use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spatialspill::esda::lm_diagnostics;
use spatialspill::ingest::{self, AttributeTable, GeometrySet, IngestError};
use spatialspill::weights::{build_contiguity, build_inverse_distance, ContiguityOptions, ContiguityRule, Provenance};
use spatialspill::{decompose_effects, fit, fit_ols, ModelKind, ModelSpec, Normalization, SeMode, WeightsMatrix};

use crate::commands::{diagnostics_rows, fit_json};
use crate::output::{num, Outputs, Table};
use crate::published::{self, DURBIN, REGRESSORS};
use crate::{inputs, CliError, ReproduceArgs};

const POINTER: &str = "the community life-satisfaction table and a matching community boundary GeoJSON are not bundled; \
pass them with --data/--geometry (or SPATIALSPILL_DATA/SPATIALSPILL_GEOMETRY). The public-use table is distributed \
with doi:10.1371/journal.pone.0210091. Without it, `cargo test -p spatialspill --test acceptance` runs the synthetic checks";

/// One computed quantity, keyed like [`published::Value`].
#[derive(Debug, Clone)]
struct Row {
    sample: String,
    section: &'static str,
    weights: String,
    model: String,
    variable: String,
    quantity: &'static str,
    value: f64,
}

struct Collector<'a> {
    sample: &'a str,
    rows: Vec<Row>,
}

impl Collector<'_> {
    fn push(&mut self, section: &'static str, weights: &str, model: &str, variable: &str, quantity: &'static str, value: f64) {
        self.rows.push(Row {
            sample: self.sample.to_string(),
            section,
            weights: weights.to_string(),
            model: model.to_string(),
            variable: variable.to_string(),
            quantity,
            value,
        });
    }
}

fn locate(a: &ReproduceArgs) -> Result<(&Path, &Path)> {
    match (&a.data, &a.geometry) {
        (Some(d), Some(g)) => {
            for p in [d, g] {
                if !p.is_file() {
                    return Err(CliError::MissingExternalData(format!("`{}` does not exist; {POINTER}", p.display())).into());
                }
            }
            Ok((d, g))
        }
        _ => Err(CliError::MissingExternalData(POINTER.into()).into()),
    }
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split([',', ' ', '\t']).next().unwrap_or(l).to_string())
        .collect())
}

fn restrict(table: &AttributeTable, geo: &GeometrySet, ids: &[String]) -> Result<(AttributeTable, GeometrySet)> {
    let index: HashMap<&str, usize> = table.region_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let missing: Vec<String> = ids.iter().filter(|id| !index.contains_key(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(IngestError::Unmatched { only_in_table: Vec::new(), only_in_other: missing }.into());
    }
    let rows: Vec<usize> = ids.iter().map(|id| index[id.as_str()]).collect();
    let sub = table.select_rows(&rows)?;
    let g = geo.reorder(sub.region_ids())?;
    Ok((sub, g))
}

fn contiguity(geo: &GeometrySet, rule: ContiguityRule, order: usize) -> Result<WeightsMatrix> {
    let g = build_contiguity(geo, rule, order, ContiguityOptions::default())?;
    Ok(WeightsMatrix::binary(&g, Provenance::Contiguity { rule, order, exact: false }).normalize(Normalization::Row)?)
}

#[allow(clippy::too_many_arguments)]
fn pipeline(
    sample: &str,
    table: &AttributeTable,
    geo: &GeometrySet,
    a: &ReproduceArgs,
    seed: u64,
    out: &mut Outputs,
    fits_dir: &Path,
) -> Result<Vec<Row>> {
    let mut c = Collector { sample, rows: Vec::new() };
    let matrices = [
        ("queen1", contiguity(geo, ContiguityRule::Queen, 1)?),
        ("queen2", contiguity(geo, ContiguityRule::Queen, 2)?),
        ("rook1", contiguity(geo, ContiguityRule::Rook, 1)?),
        ("invdist", build_inverse_distance(geo)?.normalize(Normalization::Spectral)?),
    ];

    let base = ModelSpec::new(ModelKind::Ols, &a.response, &REGRESSORS);
    let ols = fit_ols(&base, table, None).context("fitting ols")?;
    for coef in ols.coefficients() {
        c.push("ols", "none", "ols", &coef.name, "estimate", coef.estimate);
        c.push("ols", "none", "ols", &coef.name, "t", coef.statistic);
    }
    let (n, k) = (ols.n as f64, ols.k as f64);
    c.push("ols", "none", "ols", "", "n", n);
    c.push("ols", "none", "ols", "", "adj_r2", ols.adj_r2.unwrap_or(f64::NAN));
    c.push("ols", "none", "ols", "", "f", (ols.r2 / (k - 1.0)) / ((1.0 - ols.r2) / (n - k)));
    out.add_json(&fits_dir.join(format!("{sample}_ols.json")), &fit_json(&ols, None)?)?;

    for (label, w) in &matrices {
        let d = lm_diagnostics(&ols, w).with_context(|| format!("diagnostics with {label}"))?;
        for (_, test, s, p) in diagnostics_rows(label, &d) {
            c.push("lm", label, "ols", test, "statistic", s);
            c.push("lm", label, "ols", test, "p_value", p);
        }
    }

    let spec = base.clone().with_durbin(&DURBIN).with_se(SeMode::Robust);
    for (label, w) in matrices.iter().filter(|(l, _)| matches!(*l, "rook1" | "invdist")) {
        for kind in [ModelKind::Slx, ModelKind::Sdem, ModelKind::Sdm, ModelKind::Gns] {
            let model = kind.to_string();
            let f = match fit(&spec.as_kind(kind), table, Some(w)) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("{sample} {label} {model}: {e}");
                    continue;
                }
            };
            let eff = decompose_effects(&f, w, a.draws, seed).with_context(|| format!("{sample} {label} {model} effects"))?;
            for r in &eff.rows {
                for (panel, e) in [("direct", r.direct), ("indirect", r.indirect)] {
                    c.push(panel, label, &model, &r.variable, "estimate", e.point);
                    if let Some(t) = e.t_stat {
                        c.push(panel, label, &model, &r.variable, "t", t);
                    }
                }
            }
            for name in ["rho", "lambda"] {
                if let Some(coef) = f.coefficient(name) {
                    c.push("spatial", label, &model, name, "estimate", coef.estimate);
                    c.push("spatial", label, &model, name, "t", coef.statistic);
                }
            }
            c.push("fit", label, &model, "", "r2", f.adj_r2.unwrap_or(f.r2));
            out.add_json(&fits_dir.join(format!("{sample}_{label}_{model}.json")), &fit_json(&f, Some(w))?)?;
        }
    }
    Ok(c.rows)
}

pub fn run(a: &ReproduceArgs, seed: u64, quiet: bool) -> Result<Outputs> {
    let (data, geometry) = locate(a)?;
    let mut out = Outputs::new();
    let id_property = a.id_property.clone().unwrap_or_else(|| a.id_column.clone());
    let table = inputs::table(data, &a.id_column, &mut out)?;
    let geo = inputs::geometry(geometry, &id_property, &mut out)?;
    let geo = ingest::align_geometry(&table, &geo).context("aligning geometry with the data")?;
    let fits_dir: PathBuf = a.out.join("fits");
    std::fs::create_dir_all(&fits_dir).with_context(|| format!("creating {}", fits_dir.display()))?;

    let mut rows = pipeline("full", &table, &geo, a, seed, &mut out, &fits_dir)?;
    for (name, path) in &a.subsample {
        out.input(path);
        let ids = read_ids(path)?;
        let (t, g) = restrict(&table, &geo, &ids).with_context(|| format!("subsample `{name}`"))?;
        rows.extend(pipeline(name, &t, &g, a, seed, &mut out, &fits_dir)?);
    }

    let published: HashMap<(&str, &str, &str, &str, &str), f64> = published::all()
        .into_iter()
        .map(|p| ((p.section, p.weights, p.model, p.variable, p.quantity), p.value))
        .collect();
    let mut report = Table::new(&["sample", "section", "weights", "model", "variable", "quantity", "computed", "published", "abs_deviation"]);
    if !quiet {
        println!(
            "{:<9} {:<8} {:<5} {:<16} {:<9} {:>12} {:>10} {:>10}",
            "section", "weights", "model", "variable", "quantity", "computed", "published", "|dev|"
        );
    }
    for r in &rows {
        let p = (r.sample == "full")
            .then(|| published.get(&(r.section, r.weights.as_str(), r.model.as_str(), r.variable.as_str(), r.quantity)))
            .flatten()
            .copied();
        let dev = p.map(|p| (r.value - p).abs());
        if let (false, Some(p), Some(dev)) = (quiet, p, dev) {
            println!(
                "{:<9} {:<8} {:<5} {:<16} {:<9} {:>12.4} {:>10.3} {:>10.4}",
                r.section, r.weights, r.model, r.variable, r.quantity, r.value, p, dev
            );
        }
        report.push(vec![
            r.sample.clone(),
            r.section.to_string(),
            r.weights.clone(),
            r.model.clone(),
            r.variable.clone(),
            r.quantity.to_string(),
            num(r.value),
            p.map(num).unwrap_or_default(),
            dev.map(num).unwrap_or_default(),
        ]);
    }
    out.add(&a.out.join("report.csv"), report.to_bytes()?);
    Ok(out)
}
