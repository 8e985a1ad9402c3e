//! Service-area quality metrics and bootstrap summaries.
//!
//! The localization index is computed on the directed flow table, while
//! conductance uses the undirected network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{Membership, Partition};
use crate::error::{Error, Result};
use crate::graph::Hpdn;
use crate::ingest::FlowTable;

/// Default number of bootstrap resamples.
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Per-community directed discharge totals: `(internal, resident)` where
/// `resident` counts every discharge of patients living in the community.
fn flow_totals(flows: &FlowTable, membership: &Membership, n_communities: usize) -> Result<Vec<(u64, u64)>> {
    let lookup = |z: &str| {
        membership.get(z).copied().ok_or_else(|| Error::PartitionMismatch(format!("ZCTA `{z}` missing from partition")))
    };
    let mut totals = vec![(0u64, 0u64); n_communities];
    for (patient, facility, count) in flows.iter() {
        let c = lookup(patient)?;
        let d = lookup(facility)?;
        if c >= n_communities {
            totals.resize(c + 1, (0, 0));
        }
        totals[c].1 += count;
        if c == d {
            totals[c].0 += count;
        }
    }
    Ok(totals)
}

fn n_ids(membership: &Membership) -> usize {
    membership.values().max().map_or(0, |&m| m + 1)
}

/// `N_D(c,c) / N_D(c)`: the share of discharges of residents of `c` that
/// happen at facilities inside `c`.
pub fn localization_index(flows: &FlowTable, membership: &Membership, c: usize) -> Result<f64> {
    let totals = flow_totals(flows, membership, n_ids(membership).max(c + 1))?;
    let (inside, resident) = totals[c];
    if resident == 0 {
        return Err(Error::NoResidentDischarges(c));
    }
    Ok(inside as f64 / resident as f64)
}

/// `N_D(c)`: discharges of patients living in `c`.
pub fn community_discharges(flows: &FlowTable, membership: &Membership, c: usize) -> Result<u64> {
    let totals = flow_totals(flows, membership, n_ids(membership).max(c + 1))?;
    Ok(totals[c].1)
}

/// Boundary strength over total strength of the members of `c`. Strength
/// counts a self-loop once, so internal edges contribute through both
/// endpoints and loops through one.
pub fn conductance(g: &Hpdn, p: &Partition, c: usize) -> Result<f64> {
    p.check_covers(g)?;
    let mut total = 0.0;
    let mut external = 0.0;
    for i in (0..g.node_count()).filter(|&i| p.community_of(i) == c) {
        total += g.strength(i);
        external += g.neighbors(i).filter(|&(j, _)| p.community_of(j) != c).map(|(_, w)| w).sum::<f64>();
    }
    if total == 0.0 {
        return Err(Error::ZeroStrength(c));
    }
    Ok(external / total)
}

/// Mean and standard deviation of the means of `b` resamples drawn with
/// replacement. Replicate `r` uses stream `r` of a seeded ChaCha8
/// generator, so the result does not depend on thread scheduling.
pub fn bootstrap_summary(values: &[f64], b: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if b == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one resample".into()));
    }
    let n = values.len();
    let means: Vec<f64> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / b as f64;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((mean.clamp(lo, hi), var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityMetrics {
    pub community_id: usize,
    pub size: usize,
    pub discharges: u64,
    /// `None` when the community has no resident discharges.
    pub li: Option<f64>,
    /// `None` when the community has zero strength.
    pub conductance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelineationReport {
    pub algorithm: Option<String>,
    pub discharge_type: Option<String>,
    pub year: Option<i32>,
    pub n_communities: usize,
    pub per_community: Vec<CommunityMetrics>,
    pub li_mean: Option<f64>,
    pub li_std: Option<f64>,
    pub conductance_mean: Option<f64>,
    pub conductance_std: Option<f64>,
    /// Rounded to whole discharges.
    pub discharges_mean: f64,
    pub discharges_std: f64,
    pub undefined_li_count: usize,
    pub undefined_conductance_count: usize,
    pub seed: u64,
    #[serde(rename = "B")]
    pub bootstrap: usize,
}

fn summarize(values: &[f64], b: usize, seed: u64) -> Result<(Option<f64>, Option<f64>)> {
    if values.is_empty() {
        return Ok((None, None));
    }
    let (m, s) = bootstrap_summary(values, b, seed)?;
    Ok((Some(m), Some(s)))
}

/// Scores every community of `p` and bootstraps the per-community values.
/// Undefined metrics are left out of the summaries and counted instead.
pub fn evaluate_partition(
    flows: &FlowTable,
    g: &Hpdn,
    p: &Partition,
    b: usize,
    seed: u64,
) -> Result<DelineationReport> {
    let membership = p.to_membership(g)?;
    let k = p.n_communities();
    let totals = flow_totals(flows, &membership, k)?;
    let sizes = p.sizes();
    let mut strength = vec![0.0; k];
    let mut external = vec![0.0; k];
    for i in 0..g.node_count() {
        let c = p.community_of(i);
        strength[c] += g.strength(i);
        external[c] += g.neighbors(i).filter(|&(j, _)| p.community_of(j) != c).map(|(_, w)| w).sum::<f64>();
    }
    let per_community: Vec<CommunityMetrics> = (0..k)
        .map(|c| {
            let (inside, resident) = totals[c];
            CommunityMetrics {
                community_id: c,
                size: sizes[c],
                discharges: resident,
                li: (resident > 0).then(|| inside as f64 / resident as f64),
                conductance: (strength[c] > 0.0).then(|| external[c] / strength[c]),
            }
        })
        .collect();
    let li: Vec<f64> = per_community.iter().filter_map(|m| m.li).collect();
    let cond: Vec<f64> = per_community.iter().filter_map(|m| m.conductance).collect();
    let disc: Vec<f64> = per_community.iter().map(|m| m.discharges as f64).collect();
    let (li_mean, li_std) = summarize(&li, b, seed)?;
    let (conductance_mean, conductance_std) = summarize(&cond, b, seed)?;
    let (d_mean, d_std) = summarize(&disc, b, seed)?;
    Ok(DelineationReport {
        algorithm: None,
        discharge_type: flows.discharge_type.map(|t| t.to_string()),
        year: flows.year,
        n_communities: k,
        undefined_li_count: k - li.len(),
        undefined_conductance_count: k - cond.len(),
        per_community,
        li_mean,
        li_std,
        conductance_mean,
        conductance_std,
        discharges_mean: d_mean.unwrap_or(0.0).round(),
        discharges_std: d_std.unwrap_or(0.0).round(),
        seed,
        bootstrap: b,
    })
}
