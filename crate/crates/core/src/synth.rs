//! Synthetic discharge flows with planted community structure.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::detect::Membership;
use crate::error::{Error, Result};
use crate::ingest::{DischargeRecord, DischargeType, FlowTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub community_sizes: Vec<usize>,
    /// Poisson mean of each resident-to-hub flow inside a community.
    pub mean_internal_flow: f64,
    /// Poisson mean of each resident-to-hub flow across communities.
    pub mean_external_flow: f64,
    /// Share of each community's ZCTAs acting as facility hubs; at least one
    /// hub per community. Below 1.0 the hub/resident split is itself a block
    /// structure, which degree-corrected block models pick up in preference
    /// to the planted communities.
    pub hub_fraction: f64,
    pub seed: u64,
}

impl PlantedConfig {
    /// Equal-sized communities where every ZCTA is a hub.
    pub fn uniform(n_communities: usize, size: usize, internal: f64, external: f64, seed: u64) -> Self {
        PlantedConfig {
            community_sizes: vec![size; n_communities],
            mean_internal_flow: internal,
            mean_external_flow: external,
            hub_fraction: 1.0,
            seed,
        }
    }

    pub fn n_communities(&self) -> usize {
        self.community_sizes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.community_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.community_sizes.is_empty() {
            return bad("at least one community is required".into());
        }
        if self.community_sizes.contains(&0) {
            return bad("community sizes must be at least 1".into());
        }
        if self.n_nodes() > 89_999 {
            return bad("at most 89999 ZCTAs can be labeled".into());
        }
        if !(self.mean_internal_flow > 0.0 && self.mean_internal_flow.is_finite()) {
            return bad(format!("internal flow mean must be positive, got {}", self.mean_internal_flow));
        }
        if !(self.mean_external_flow >= 0.0 && self.mean_external_flow.is_finite()) {
            return bad(format!("external flow mean must be non-negative, got {}", self.mean_external_flow));
        }
        if !(self.hub_fraction > 0.0 && self.hub_fraction <= 1.0) {
            return bad(format!("hub fraction must lie in (0, 1], got {}", self.hub_fraction));
        }
        Ok(())
    }
}

/// Five-digit label of synthetic node `i`.
pub fn zcta_label(i: usize) -> String {
    format!("{:05}", 10_000 + i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub flows: FlowTable,
    /// Ground truth over every generated ZCTA, including any that ended up
    /// with no flows.
    pub truth: Membership,
    /// Hub ZCTAs per community.
    pub hubs: Vec<Vec<String>>,
}

fn sampler(mean: f64) -> Option<Poisson<f64>> {
    (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"))
}

/// Draws a planted flow table. Nodes are dealt to communities in seeded
/// random order; the first `max(1, round(hub_fraction * size))` members of
/// each community are hubs. Every ZCTA sends a Poisson count to every hub:
/// with the internal mean for hubs of its own community and the external
/// mean otherwise.
pub fn generate(config: &PlantedConfig) -> Result<Planted> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes: Vec<usize> = (0..config.n_nodes()).collect();
    nodes.shuffle(&mut rng);

    let mut members = Vec::with_capacity(config.n_communities());
    let mut rest = nodes.as_slice();
    for &size in &config.community_sizes {
        let (head, tail) = rest.split_at(size);
        members.push(head.to_vec());
        rest = tail;
    }
    let hubs: Vec<Vec<usize>> = members
        .iter()
        .map(|m| {
            let k = ((config.hub_fraction * m.len() as f64).round() as usize).clamp(1, m.len());
            m[..k].to_vec()
        })
        .collect();

    let internal = sampler(config.mean_internal_flow);
    let external = sampler(config.mean_external_flow);
    let mut flows = FlowTable::default();
    let mut truth = Membership::new();
    for (c, m) in members.iter().enumerate() {
        let mut residents = m.clone();
        residents.sort_unstable();
        for &r in &residents {
            let patient = zcta_label(r);
            truth.insert(patient.clone(), c);
            for (d, hs) in hubs.iter().enumerate() {
                let dist = if c == d { &internal } else { &external };
                let Some(dist) = dist else { continue };
                for &h in hs {
                    let count = dist.sample(&mut rng) as u64;
                    flows.add(&patient, &zcta_label(h), count);
                }
            }
        }
    }
    let hubs = hubs.iter().map(|hs| hs.iter().map(|&h| zcta_label(h)).collect()).collect();
    Ok(Planted { flows, truth, hubs })
}

/// Expands a flow table into one discharge record per entry, so synthetic
/// data can go through the same ingest path as real files. ZCTAs double as
/// ZIPs.
pub fn discharge_records(flows: &FlowTable, discharge_type: DischargeType, year: i32) -> Vec<DischargeRecord> {
    flows
        .iter()
        .map(|(p, f, count)| DischargeRecord {
            discharge_type,
            year,
            facility_name: format!("Facility {f}"),
            facility_zip: f.to_string(),
            patient_zip: p.to_string(),
            count,
        })
        .collect()
}
