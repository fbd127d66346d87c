use std::path::Path;

use serde_json::Value;

use super::IngestError;

/// A closed ring of `(longitude, latitude)` vertices; first vertex equals last.
pub type Ring = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring) -> Self {
        Self { exterior, holes: Vec::new() }
    }

    /// Unsigned area in squared coordinate units (holes subtracted).
    pub fn area(&self) -> f64 {
        let outer = signed_area(&self.exterior).abs();
        outer - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub polygons: Vec<Polygon>,
    pub centroid: [f64; 2],
}

impl Region {
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }
}

/// Polygon geometry and centroids keyed by region id.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySet {
    region_ids: Vec<String>,
    regions: Vec<Region>,
    warnings: Vec<String>,
}

impl GeometrySet {
    /// Builds a set from polygons, computing area-weighted centroids.
    pub fn from_polygons(items: Vec<(String, Vec<Polygon>)>) -> Result<Self, IngestError> {
        let mut ids = Vec::with_capacity(items.len());
        let mut regions = Vec::with_capacity(items.len());
        for (id, polys) in items {
            for p in &polys {
                for ring in p.rings() {
                    validate_ring(&id, ring)?;
                }
            }
            let centroid = area_centroid(&polys);
            ids.push(id);
            regions.push(Region { polygons: polys, centroid });
        }
        Self::from_regions(ids, regions, Vec::new())
    }

    fn from_regions(region_ids: Vec<String>, regions: Vec<Region>, warnings: Vec<String>) -> Result<Self, IngestError> {
        if region_ids.is_empty() {
            return Err(IngestError::EmptyTable);
        }
        let mut seen = std::collections::HashSet::new();
        for id in &region_ids {
            if id.is_empty() {
                return Err(IngestError::EmptyId { row: 0 });
            }
            if !seen.insert(id) {
                return Err(IngestError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { region_ids, regions, warnings })
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        self.regions.iter().map(|r| r.centroid).collect()
    }

    /// Non-fatal issues found while loading (for example auto-closed rings).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Replaces the centroid of every region, e.g. with externally supplied points.
    pub fn with_centroids(mut self, centroids: Vec<[f64; 2]>) -> Self {
        assert_eq!(centroids.len(), self.regions.len());
        for (r, c) in self.regions.iter_mut().zip(centroids) {
            r.centroid = c;
        }
        self
    }

    /// Reorders regions to follow `order`, which must be a permutation of the ids.
    pub fn reorder(&self, order: &[String]) -> Result<Self, IngestError> {
        let index: std::collections::HashMap<&str, usize> =
            self.region_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut regions = Vec::with_capacity(order.len());
        for id in order {
            let i = index.get(id.as_str()).ok_or_else(|| IngestError::Unmatched {
                only_in_table: vec![id.clone()],
                only_in_other: vec![],
            })?;
            regions.push(self.regions[*i].clone());
        }
        Self::from_regions(order.to_vec(), regions, self.warnings.clone())
    }
}

fn validate_ring(id: &str, ring: &Ring) -> Result<(), IngestError> {
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(IngestError::MalformedRing {
            region: id.to_string(),
            vertices: ring.len(),
        });
    }
    if ring.iter().flatten().any(|c| !c.is_finite()) {
        return Err(IngestError::MalformedRing {
            region: id.to_string(),
            vertices: ring.len(),
        });
    }
    Ok(())
}

/// Shoelace signed area of a closed ring.
pub(crate) fn signed_area(ring: &Ring) -> f64 {
    ring.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0
}

/// Area-weighted centroid of a multipolygon, treating coordinates as planar.
/// Falls back to the vertex mean for zero-area input.
pub fn area_centroid(polys: &[Polygon]) -> [f64; 2] {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for p in polys {
        for (k, ring) in p.rings().enumerate() {
            let sa = signed_area(ring);
            // exterior counts positively, holes negatively, whatever their winding
            let sign = if k == 0 { sa.signum() } else { -sa.signum() };
            let (mut mx, mut my) = (0.0, 0.0);
            for w in ring.windows(2) {
                let cross = w[0][0] * w[1][1] - w[1][0] * w[0][1];
                mx += (w[0][0] + w[1][0]) * cross;
                my += (w[0][1] + w[1][1]) * cross;
            }
            a += sign * sa;
            cx += sign * mx / 6.0;
            cy += sign * my / 6.0;
        }
    }
    if a.abs() > 0.0 {
        [cx / a, cy / a]
    } else {
        let pts: Vec<&[f64; 2]> = polys.iter().flat_map(|p| p.exterior.iter()).collect();
        let n = pts.len().max(1) as f64;
        [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
    }
}

/// Loads a GeoJSON feature collection of polygon / multipolygon features.
pub fn load_geometry(path: impl AsRef<Path>, id_property: &str) -> Result<GeometrySet, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_geometry(&text, id_property)
}

pub fn parse_geometry(text: &str, id_property: &str) -> Result<GeometrySet, IngestError> {
    let root: Value = serde_json::from_str(text)?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Json("expected a FeatureCollection with a `features` array".into()))?;

    let mut ids = Vec::with_capacity(features.len());
    let mut regions = Vec::with_capacity(features.len());
    let mut warnings = Vec::new();
    for (fi, feat) in features.iter().enumerate() {
        let props = feat.get("properties");
        let id = match props.and_then(|p| p.get(id_property)) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                return Err(IngestError::MissingIdProperty {
                    feature: fi,
                    property: id_property.to_string(),
                })
            }
        };
        let geom = feat
            .get("geometry")
            .ok_or_else(|| IngestError::Json(format!("feature {fi} has no geometry")))?;
        let kind = geom.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| IngestError::Json(format!("feature {fi} has no coordinates")))?;
        let raw_polys: Vec<&Value> = match kind {
            "Polygon" => vec![coords],
            "MultiPolygon" => coords
                .as_array()
                .ok_or_else(|| IngestError::Json(format!("feature {fi}: bad MultiPolygon")))?
                .iter()
                .collect(),
            other => {
                return Err(IngestError::UnsupportedGeometryKind {
                    region: id,
                    kind: other.to_string(),
                })
            }
        };
        let mut polys = Vec::with_capacity(raw_polys.len());
        for rp in raw_polys {
            let rings = rp
                .as_array()
                .ok_or_else(|| IngestError::Json(format!("feature {fi}: polygon is not an array of rings")))?;
            let mut parsed = Vec::with_capacity(rings.len());
            for r in rings {
                let mut ring = parse_ring(r).ok_or_else(|| IngestError::Json(format!("feature {fi}: bad ring")))?;
                if ring.first() != ring.last() && !ring.is_empty() {
                    ring.push(ring[0]);
                    let msg = format!("region {id}: ring was not closed; appended its first vertex");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                validate_ring(&id, &ring)?;
                parsed.push(ring);
            }
            let mut it = parsed.into_iter();
            let exterior = it.next().ok_or_else(|| IngestError::MalformedRing {
                region: id.clone(),
                vertices: 0,
            })?;
            polys.push(Polygon { exterior, holes: it.collect() });
        }
        if polys.is_empty() {
            return Err(IngestError::MalformedRing { region: id, vertices: 0 });
        }
        let centroid = props.and_then(explicit_centroid).unwrap_or_else(|| area_centroid(&polys));
        ids.push(id);
        regions.push(Region { polygons: polys, centroid });
    }
    GeometrySet::from_regions(ids, regions, warnings)
}

fn parse_ring(v: &Value) -> Option<Ring> {
    v.as_array()?
        .iter()
        .map(|pt| {
            let a = pt.as_array()?;
            Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?])
        })
        .collect()
}

/// Accepts `"centroid": [lon, lat]` or `centroid_lon` / `centroid_lat` properties.
fn explicit_centroid(props: &Value) -> Option<[f64; 2]> {
    if let Some(a) = props.get("centroid").and_then(Value::as_array) {
        return Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?]);
    }
    Some([props.get("centroid_lon")?.as_f64()?, props.get("centroid_lat")?.as_f64()?])
}
