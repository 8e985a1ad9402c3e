//! Community boundaries as GeoJSON: member ZCTA polygons are dissolved
//! into one (multi)polygon per community.
//!
//! The dissolve removes edges shared by two member polygons. Coordinates
//! are snapped to a 1e-9 degree grid so that vertices differing only by
//! rounding are treated as shared. Edges that overlap only in part
//! (T-junctions) are not split and survive as internal slivers.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use log::warn;
use serde_json::{json, Map, Value};

use crate::detect::Membership;
use crate::error::{Error, Result};

pub type Ring = Vec<[f64; 2]>;
/// Outer ring followed by holes.
pub type Polygon = Vec<Ring>;

/// Properties tried, in order, when the ZCTA property is not named.
pub const ZCTA_PROPERTIES: [&str; 7] = ["ZCTA5CE20", "ZCTA5CE10", "GEOID20", "GEOID10", "ZCTA5", "ZCTA", "zcta"];

const SNAP: f64 = 1e-9;

/// Polygons per ZCTA.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Boundaries {
    pub shapes: BTreeMap<String, Vec<Polygon>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadBoundaryFile(msg.into())
}

fn zcta_value(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => n.as_u64().map(|n| format!("{n:05}")),
        _ => None,
    }
}

fn parse_ring(v: &Value) -> Result<Ring> {
    let points = v.as_array().ok_or_else(|| bad("ring is not an array"))?;
    points
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2).ok_or_else(|| bad("position needs two numbers"))?;
            match (xy[0].as_f64(), xy[1].as_f64()) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(bad("non-numeric coordinate")),
            }
        })
        .collect()
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    v.as_array().ok_or_else(|| bad("polygon is not an array"))?.iter().map(parse_ring).collect()
}

fn parse_geometry(g: &Value) -> Result<Vec<Polygon>> {
    let coords = g.get("coordinates").ok_or_else(|| bad("geometry without coordinates"))?;
    match g.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(vec![parse_polygon(coords)?]),
        Some("MultiPolygon") => {
            coords.as_array().ok_or_else(|| bad("bad MultiPolygon"))?.iter().map(parse_polygon).collect()
        }
        Some(other) => Err(bad(format!("unsupported geometry type {other}"))),
        None => Err(bad("geometry without type")),
    }
}

/// Reads a FeatureCollection. `property` names the ZCTA property; when
/// `None` the first of [`ZCTA_PROPERTIES`] present on the first feature is
/// used. Features without geometry are skipped.
pub fn read_boundaries<R: Read>(reader: R, property: Option<&str>) -> Result<Boundaries> {
    let doc: Value = serde_json::from_reader(reader).map_err(|e| bad(format!("not JSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("expected a FeatureCollection"));
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| bad("missing features"))?;
    let key = match property {
        Some(p) => p.to_string(),
        None => {
            let props = features.first().and_then(|f| f.get("properties")).and_then(Value::as_object);
            ZCTA_PROPERTIES
                .iter()
                .find(|k| props.is_some_and(|p| p.contains_key(**k)))
                .ok_or_else(|| bad("no ZCTA property found; name one explicitly"))?
                .to_string()
        }
    };
    let mut out = Boundaries::default();
    for (i, f) in features.iter().enumerate() {
        let z = f
            .get("properties")
            .and_then(|p| p.get(&key))
            .and_then(zcta_value)
            .ok_or_else(|| bad(format!("feature {i} lacks property {key}")))?;
        match f.get("geometry") {
            None | Some(Value::Null) => warn!("feature {i} ({z}) has no geometry, skipped"),
            Some(g) => out.shapes.entry(z).or_default().extend(parse_geometry(g)?),
        }
    }
    Ok(out)
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = ring[i];
        let [x1, y1] = ring[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Planar area of a polygon: outer ring minus holes, orientation ignored.
pub fn polygon_area(p: &Polygon) -> f64 {
    let mut rings = p.iter().map(|r| signed_area(r).abs());
    let outer = rings.next().unwrap_or(0.0);
    outer - rings.sum::<f64>()
}

type Key = (i64, i64);

fn snap([x, y]: [f64; 2]) -> Key {
    ((x / SNAP).round() as i64, (y / SNAP).round() as i64)
}

fn contains(ring: &[[f64; 2]], [px, py]: [f64; 2]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let ([xi, yi], [xj, yj]) = (ring[i], ring[j]);
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Unions polygons that meet along shared edges. Outer rings are oriented
/// counter-clockwise and holes clockwise, opposite half-edges cancel, and
/// what remains is chained back into rings.
pub fn dissolve(polygons: &[Polygon]) -> Vec<Polygon> {
    let mut coord: HashMap<Key, [f64; 2]> = HashMap::new();
    let mut edges: BTreeMap<(Key, Key), usize> = BTreeMap::new();
    for poly in polygons {
        for (r, ring) in poly.iter().enumerate() {
            let mut pts: Vec<Key> = Vec::with_capacity(ring.len());
            for &p in ring {
                let k = snap(p);
                coord.entry(k).or_insert(p);
                if pts.last() != Some(&k) {
                    pts.push(k);
                }
            }
            if pts.len() > 1 && pts.first() == pts.last() {
                pts.pop();
            }
            if pts.len() < 3 {
                continue;
            }
            let ccw = signed_area(&pts.iter().map(|k| coord[k]).collect::<Vec<_>>()) > 0.0;
            if ccw != (r == 0) {
                pts.reverse();
            }
            for i in 0..pts.len() {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                match edges.get_mut(&(b, a)) {
                    Some(n) => {
                        *n -= 1;
                        if *n == 0 {
                            edges.remove(&(b, a));
                        }
                    }
                    None => *edges.entry((a, b)).or_insert(0) += 1,
                }
            }
        }
    }

    let mut outgoing: BTreeMap<Key, Vec<Key>> = BTreeMap::new();
    for (&(a, b), &n) in &edges {
        for _ in 0..n {
            outgoing.entry(a).or_default().push(b);
        }
    }
    let mut rings: Vec<Ring> = Vec::new();
    while let Some((&start, _)) = outgoing.iter().next() {
        let mut ring = vec![coord[&start]];
        let mut at = start;
        loop {
            let next = {
                let list = outgoing.get_mut(&at).expect("remaining edges form closed rings");
                let next = list.remove(0);
                if list.is_empty() {
                    outgoing.remove(&at);
                }
                next
            };
            ring.push(coord[&next]);
            if next == start {
                break;
            }
            at = next;
        }
        rings.push(ring);
    }

    let (shells, holes): (Vec<Ring>, Vec<Ring>) = rings.into_iter().partition(|r| signed_area(r) > 0.0);
    let mut out: Vec<Polygon> = shells.into_iter().map(|s| vec![s]).collect();
    for hole in holes {
        let probe = hole[0];
        let owner = out
            .iter()
            .enumerate()
            .filter(|(_, p)| contains(&p[0], probe) || p[0].contains(&probe))
            .min_by(|a, b| signed_area(&a.1[0]).total_cmp(&signed_area(&b.1[0])))
            .map(|(i, _)| i);
        match owner {
            Some(i) => out[i].push(hole),
            None => warn!("dissolve left a hole outside every shell; dropped"),
        }
    }
    out
}

/// Dissolved community features plus the ZCTAs that had no boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub collection: Value,
    pub missing: Vec<String>,
}

/// One feature per community, properties `community_id`, `n_zctas` and
/// `members` (those with a boundary). ZCTAs without a boundary are listed
/// in `missing`; an empty overlap is an error.
pub fn export_communities(membership: &Membership, boundaries: &Boundaries) -> Result<Export> {
    let mut groups: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    let mut missing = Vec::new();
    for (z, &c) in membership {
        if boundaries.shapes.contains_key(z) {
            groups.entry(c).or_default().push(z);
        } else {
            missing.push(z.clone());
        }
    }
    if groups.is_empty() {
        return Err(bad("no partition ZCTA appears in the boundary file"));
    }
    if !missing.is_empty() {
        warn!("{} ZCTAs have no boundary: {}", missing.len(), missing.join(", "));
    }
    let features: Vec<Value> = groups
        .into_iter()
        .map(|(c, members)| {
            let polys: Vec<Polygon> = members.iter().flat_map(|z| boundaries.shapes[*z].iter().cloned()).collect();
            let closed: Vec<Vec<Vec<[f64; 2]>>> = dissolve(&polys);
            let mut props = Map::new();
            props.insert("community_id".into(), json!(c));
            props.insert("n_zctas".into(), json!(members.len()));
            props.insert("members".into(), json!(members));
            let geometry = if closed.len() == 1 {
                json!({"type": "Polygon", "coordinates": closed[0]})
            } else {
                json!({"type": "MultiPolygon", "coordinates": closed})
            };
            json!({"type": "Feature", "properties": props, "geometry": geometry})
        })
        .collect();
    Ok(Export { collection: json!({"type": "FeatureCollection", "features": features}), missing })
}
