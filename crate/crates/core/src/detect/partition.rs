use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Hpdn;

/// ZCTA label to community id.
pub type Membership = BTreeMap<String, usize>;

/// Assignment of every node to exactly one community. Ids are contiguous
/// from zero, numbered in order of first appearance over node index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    n_communities: usize,
}

impl Partition {
    /// Normalizes arbitrary labels into contiguous ids.
    pub fn from_assignment<T, I>(raw: I) -> Partition
    where
        T: Eq + std::hash::Hash,
        I: IntoIterator<Item = T>,
    {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let assignment = raw
            .into_iter()
            .map(|label| {
                let next = ids.len();
                *ids.entry(label).or_insert(next)
            })
            .collect();
        Partition { assignment, n_communities: ids.len() }
    }

    pub fn singletons(n: usize) -> Partition {
        Partition { assignment: (0..n).collect(), n_communities: n }
    }

    pub fn whole(n: usize) -> Partition {
        Partition { assignment: vec![0; n], n_communities: usize::from(n > 0) }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Members of each community, in increasing node order.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_communities];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    pub fn check_covers(&self, g: &Hpdn) -> Result<()> {
        if self.len() != g.node_count() {
            return Err(Error::PartitionMismatch(format!(
                "partition has {} nodes, graph has {}",
                self.len(),
                g.node_count()
            )));
        }
        Ok(())
    }

    pub fn to_membership(&self, g: &Hpdn) -> Result<Membership> {
        self.check_covers(g)?;
        Ok(g.labels().iter().cloned().zip(self.assignment.iter().copied()).collect())
    }

    /// Builds a partition over `g` from labeled ids; every graph node must be
    /// present. Labels not in the graph are ignored.
    pub fn from_membership(g: &Hpdn, membership: &Membership) -> Result<Partition> {
        let raw = g
            .labels()
            .iter()
            .map(|l| {
                membership
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::PartitionMismatch(format!("ZCTA `{l}` missing from partition")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(Partition::from_assignment(raw))
    }
}

/// Writes `zcta,community_id` rows sorted by ZCTA.
pub fn write_membership_csv<W: Write>(membership: &Membership, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["zcta", "community_id"])?;
    for (z, c) in membership {
        w.write_record([z.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_membership_csv<R: Read>(reader: R) -> Result<Membership> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (iz, ic) = (col("zcta")?, col("community_id")?);
    let mut out = Membership::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let raw = row.get(ic).unwrap_or("").trim();
        let c = raw
            .parse::<usize>()
            .map_err(|_| Error::MalformedRow { row: line, reason: format!("bad community id `{raw}`") })?;
        let z = row.get(iz).unwrap_or("").trim();
        if z.is_empty() {
            return Err(Error::MalformedRow { row: line, reason: "empty zcta".into() });
        }
        if out.insert(z.to_string(), c).is_some() {
            return Err(Error::MalformedRow { row: line, reason: format!("duplicate zcta `{z}`") });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_by_first_appearance() {
        let p = Partition::from_assignment([7, 7, 3, 9, 3]);
        assert_eq!(p.assignment(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.n_communities(), 3);
        assert_eq!(p.sizes(), vec![2, 2, 1]);
        assert_eq!(p.communities()[1], vec![2, 4]);
    }

    #[test]
    fn membership_csv_round_trip() {
        let m: Membership = [("94501".to_string(), 1), ("90001".to_string(), 0)].into();
        let mut buf = Vec::new();
        write_membership_csv(&m, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "zcta,community_id\n90001,0\n94501,1\n");
        assert_eq!(read_membership_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn from_membership_requires_every_node() {
        let g = Hpdn::from_edges(vec![("a".into(), "b".into(), 1.0)]).unwrap();
        let m: Membership = [("a".to_string(), 0)].into();
        assert!(matches!(Partition::from_membership(&g, &m), Err(Error::PartitionMismatch(_))));
    }
}
