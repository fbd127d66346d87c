use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::moran::folded_pseudo_p;
use super::{standardize, EsdaError};
use crate::ingest::{GeometrySet, IngestError};
use crate::rng::substream;
use crate::weights::WeightsMatrix;

pub const MIN_PERMUTATIONS: usize = 99;

/// Moran scatterplot quadrant: own value / neighbourhood value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quadrant {
    HH,
    LL,
    HL,
    LH,
}

impl Quadrant {
    fn of(z: f64, lag: f64) -> Self {
        match (z >= 0.0, lag >= 0.0) {
            (true, true) => Quadrant::HH,
            (false, false) => Quadrant::LL,
            (true, false) => Quadrant::HL,
            (false, true) => Quadrant::LH,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quadrant::HH => "HH",
            Quadrant::LL => "LL",
            Quadrant::HL => "HL",
            Quadrant::LH => "LH",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMoran {
    pub region_id: String,
    pub local_i: f64,
    pub z: f64,
    pub lag: f64,
    pub pseudo_p: f64,
    /// `None` for islands.
    pub quadrant: Option<Quadrant>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LisaResult {
    pub regions: Vec<LocalMoran>,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl LisaResult {
    pub fn local_i(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.local_i).collect()
    }
}

/// Local Moran's I, `I_i = z_i (W z)_i n / sum z^2`, with pseudo p-values from
/// conditional permutations that hold region `i` fixed.
pub fn local_moran(x: &[f64], w: &WeightsMatrix, permutations: usize, alpha: f64, seed: u64) -> Result<LisaResult, EsdaError> {
    let n = w.n();
    if x.len() != n {
        return Err(EsdaError::LengthMismatch { values: x.len(), regions: n });
    }
    if permutations < MIN_PERMUTATIONS {
        return Err(EsdaError::TooFewPermutations { required: MIN_PERMUTATIONS, got: permutations });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EsdaError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let z = standardize(x)?;
    let scale = n as f64 / z.iter().map(|v| v * v).sum::<f64>();
    let lag = w.lag(&z);

    let regions = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<(usize, f64)> = w.row(i).collect();
            let region_id = w.region_ids()[i].clone();
            if row.is_empty() {
                return LocalMoran { region_id, local_i: 0.0, z: z[i], lag: 0.0, pseudo_p: 1.0, quadrant: None, significant: false };
            }
            let local_i = scale * z[i] * lag[i];
            let k = row.len().min(n - 1);
            let mut rng = substream(seed, i as u64);
            let sims: Vec<f64> = (0..permutations)
                .map(|_| {
                    let picks = index::sample(&mut rng, n - 1, k);
                    let l: f64 = picks
                        .iter()
                        .zip(&row)
                        .map(|(p, &(_, wij))| {
                            let j = if p >= i { p + 1 } else { p };
                            wij * z[j]
                        })
                        .sum();
                    scale * z[i] * l
                })
                .collect();
            let pseudo_p = folded_pseudo_p(local_i, &sims);
            LocalMoran {
                region_id,
                local_i,
                z: z[i],
                lag: lag[i],
                pseudo_p,
                quadrant: Some(Quadrant::of(z[i], lag[i])),
                significant: pseudo_p <= alpha,
            }
        })
        .collect();
    Ok(LisaResult { regions, permutations, alpha, seed })
}

/// GeoJSON feature collection of the regions with the LISA fields attached as
/// properties, for external map rendering.
pub fn lisa_feature_collection(result: &LisaResult, geometry: &GeometrySet, id_property: &str) -> Result<Value, EsdaError> {
    let by_id: HashMap<&str, usize> = geometry.region_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut features = Vec::with_capacity(result.regions.len());
    for r in &result.regions {
        let gi = *by_id.get(r.region_id.as_str()).ok_or_else(|| IngestError::Unmatched {
            only_in_table: vec![r.region_id.clone()],
            only_in_other: Vec::new(),
        })?;
        let region = &geometry.regions()[gi];
        let coords: Vec<Value> = region
            .polygons
            .iter()
            .map(|p| Value::Array(p.rings().map(|ring| json!(ring)).collect()))
            .collect();
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "MultiPolygon", "coordinates": coords },
            "properties": {
                id_property: r.region_id,
                "local_i": r.local_i,
                "pseudo_p": r.pseudo_p,
                "quadrant": r.quadrant.map(|q| q.to_string()),
                "significant": r.significant,
            }
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}
