//! Dartmouth-style delineation: facilities to towns, ZCTAs to the town
//! where most of their residents are treated, then enclave cleanup.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use crate::detect::Membership;
use crate::error::{Error, Result};
use crate::ingest::FlowTable;

/// Facility ZCTA to town name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FacilityTownMap {
    towns: BTreeMap<String, String>,
}

impl FacilityTownMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, facility: &str, town: &str) {
        self.towns.insert(facility.to_string(), town.to_string());
    }

    pub fn town(&self, facility: &str) -> Option<&str> {
        self.towns.get(facility).map(String::as_str)
    }

    /// Every facility ZCTA in `flows` is its own town.
    pub fn degenerate(flows: &FlowTable) -> Self {
        let mut map = Self::new();
        for (_, f, _) in flows.iter() {
            map.insert(f, f);
        }
        map
    }

    /// Reads `facility_zcta,town` rows.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut map = Self::new();
        for (line, a, b) in read_pairs(reader, "facility_zcta", "town")? {
            if b.is_empty() {
                return Err(Error::MalformedRow { row: line, reason: "empty town".into() });
            }
            map.insert(&a, &b);
        }
        Ok(map)
    }
}

/// Geographic neighbors, kept symmetric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: BTreeMap<String, BTreeSet<String>>,
}

impl Adjacency {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a ZCTA with no neighbors yet.
    pub fn add_zcta(&mut self, z: &str) {
        self.neighbors.entry(z.to_string()).or_default();
    }

    pub fn connect(&mut self, a: &str, b: &str) {
        if a == b {
            self.add_zcta(a);
            return;
        }
        self.neighbors.entry(a.to_string()).or_default().insert(b.to_string());
        self.neighbors.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn neighbors(&self, z: &str) -> Option<&BTreeSet<String>> {
        self.neighbors.get(z)
    }

    /// Reads `zcta_a,zcta_b` rows and closes them under symmetry. A row with
    /// an empty `zcta_b` declares a ZCTA without neighbors.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut adj = Self::new();
        for (_, a, b) in read_pairs(reader, "zcta_a", "zcta_b")? {
            if b.is_empty() {
                adj.add_zcta(&a);
            } else {
                adj.connect(&a, &b);
            }
        }
        Ok(adj)
    }
}

fn read_pairs<R: Read>(reader: R, first: &str, second: &str) -> Result<Vec<(usize, String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ia, ib) = (col(first)?, col(second)?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let a = row.get(ia).unwrap_or("").trim();
        if a.is_empty() {
            return Err(Error::MalformedRow { row: line, reason: format!("empty {first}") });
        }
        out.push((line, a.to_string(), row.get(ib).unwrap_or("").trim().to_string()));
    }
    Ok(out)
}

/// A town-labeled partition. Community ids index `towns`, which is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TownPartition {
    pub membership: Membership,
    pub towns: Vec<String>,
}

impl TownPartition {
    fn from_towns(assigned: BTreeMap<String, String>) -> TownPartition {
        let towns: Vec<String> = assigned.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let membership = assigned
            .into_iter()
            .map(|(z, t)| {
                let id = towns.binary_search(&t).expect("town collected above");
                (z, id)
            })
            .collect();
        TownPartition { membership, towns }
    }
}

/// Assigns every patient ZCTA to the town receiving most of its
/// discharges. Ties go to the town with the larger total inflow, then to
/// the lexicographically smaller name. A facility ZCTA with no resident
/// discharges joins its own facility's town.
pub fn plurality_assign(flows: &FlowTable, towns: &FacilityTownMap) -> Result<TownPartition> {
    let town_of = |f: &str| towns.town(f).ok_or_else(|| Error::UnmappedFacility(f.to_string()));
    let mut inflow: BTreeMap<&str, u64> = BTreeMap::new();
    let mut by_patient: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    for (p, f, c) in flows.iter() {
        let t = town_of(f)?;
        *inflow.entry(t).or_insert(0) += c;
        *by_patient.entry(p).or_default().entry(t).or_insert(0) += c;
    }
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    for (p, counts) in &by_patient {
        // BTreeMap order makes the first maximum the lexicographically smallest.
        let (best, _) = counts
            .iter()
            .map(|(&t, &c)| (t, (c, inflow[t])))
            .fold(None, |best: Option<(&str, (u64, u64))>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .expect("patient has at least one flow");
        assigned.insert(p.to_string(), best.to_string());
    }
    for (_, f, _) in flows.iter() {
        if !assigned.contains_key(f) {
            assigned.insert(f.to_string(), town_of(f)?.to_string());
        }
    }
    Ok(TownPartition::from_towns(assigned))
}

/// Result of [`enclave_fix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnclaveFix {
    pub membership: Membership,
    /// Passes run, including the final pass that changed nothing.
    pub iterations: usize,
    pub reassigned: usize,
}

/// Reassigns every ZCTA whose neighbors inside the partition all belong to
/// one other community, sweeping in ZCTA order until a pass changes nothing.
pub fn enclave_fix(membership: &Membership, adjacency: &Adjacency) -> Result<EnclaveFix> {
    for z in membership.keys() {
        if adjacency.neighbors(z).is_none() {
            return Err(Error::MissingAdjacency(z.clone()));
        }
    }
    let mut current = membership.clone();
    let mut iterations = 0;
    let mut reassigned = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let zctas: Vec<String> = current.keys().cloned().collect();
        for z in zctas {
            let own = current[&z];
            let mut around = adjacency.neighbors(&z).into_iter().flatten().filter_map(|n| current.get(n).copied());
            let Some(first) = around.next() else { continue };
            if first != own && around.all(|c| c == first) {
                current.insert(z, first);
                changed = true;
                reassigned += 1;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(EnclaveFix { membership: current, iterations, reassigned })
}

/// Plurality assignment followed by enclave cleanup.
pub fn dartmouth(
    flows: &FlowTable,
    towns: &FacilityTownMap,
    adjacency: &Adjacency,
) -> Result<(TownPartition, EnclaveFix)> {
    let assigned = plurality_assign(flows, towns)?;
    let fixed = enclave_fix(&assigned.membership, adjacency)?;
    Ok((assigned, fixed))
}
