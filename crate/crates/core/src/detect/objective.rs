//! Partition objectives: weighted modularity and the two-level map equation.

use crate::detect::Partition;
use crate::error::Result;
use crate::graph::Hpdn;

/// Weighted Newman modularity at resolution 1.
pub fn modularity(g: &Hpdn, p: &Partition) -> Result<f64> {
    modularity_with_resolution(g, p, 1.0)
}

/// `Q = Σ_c [ 2w in_c - γ tot_c^2 ] / (2w)^2` with the diagonal `A_ii = 2 W_ii`,
/// so `2w = Σ_i modularity_degree(i)`.
pub fn modularity_with_resolution(g: &Hpdn, p: &Partition, resolution: f64) -> Result<f64> {
    p.check_covers(g)?;
    let k = p.n_communities();
    let mut tot = vec![0.0; k];
    let mut inner = vec![0.0; k];
    for i in 0..g.node_count() {
        let c = p.community_of(i);
        tot[c] += g.modularity_degree(i);
        inner[c] += 2.0 * g.self_loop(i);
        inner[c] += g.neighbors(i).filter(|&(j, _)| p.community_of(j) == c).map(|(_, w)| w).sum::<f64>();
    }
    let two_w: f64 = tot.iter().sum();
    if two_w == 0.0 {
        return Ok(0.0);
    }
    // one division at the end: with integer weights the numerator is exact,
    // so values near zero keep full relative precision
    let numerator: f64 = tot.iter().zip(&inner).map(|(&t, &i)| two_w * i - resolution * t * t).sum();
    Ok(numerator / (two_w * two_w))
}

pub(crate) fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Two-level map equation in bits for an undirected weighted graph.
///
/// Visit rates are `p_i = s_i / Σ s` and module exit rates
/// `q_c = Σ_{i∈c, j∉c} W_ij / Σ s`, giving
/// `L = plogp(Σ q_c) - 2 Σ plogp(q_c) - Σ plogp(p_i) + Σ plogp(q_c + p_c)`.
pub fn map_equation(g: &Hpdn, p: &Partition) -> Result<f64> {
    p.check_covers(g)?;
    let total: f64 = (0..g.node_count()).map(|i| g.strength(i)).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let k = p.n_communities();
    let mut exit = vec![0.0; k];
    let mut flow = vec![0.0; k];
    let mut node_entropy = 0.0;
    for i in 0..g.node_count() {
        let c = p.community_of(i);
        let pi = g.strength(i) / total;
        flow[c] += pi;
        node_entropy += plogp(pi);
        exit[c] += g.neighbors(i).filter(|&(j, _)| p.community_of(j) != c).map(|(_, w)| w).sum::<f64>() / total;
    }
    let sum_exit: f64 = exit.iter().sum();
    let mut l = plogp(sum_exit) - node_entropy;
    for c in 0..k {
        l += plogp(exit[c] + flow[c]) - 2.0 * plogp(exit[c]);
    }
    Ok(l)
}
