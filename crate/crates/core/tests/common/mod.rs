//! Independent oracles and fixtures shared by the integration tests. The
//! oracles work on dense matrices straight from the formulas and never call
//! the library's metric code.
#![allow(dead_code, clippy::needless_range_loop)]

use hsa_core::detect::{Membership, Partition};
use hsa_core::graph::Hpdn;
use hsa_core::ingest::FlowTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric weight matrix; `w[i][i]` is the self-loop weight.
pub type Dense = Vec<Vec<f64>>;

pub fn label(i: usize) -> String {
    format!("v{i:02}")
}

/// Random symmetric integer weights in `1..=max_w` with edge probability
/// `p`; a path through all nodes keeps every node present.
pub fn random_dense(rng: &mut ChaCha8Rng, n: usize, p: f64, max_w: u32, loops: bool) -> Dense {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            if (i != j || loops) && rng.random_bool(p) {
                let x = rng.random_range(1..=max_w) as f64;
                w[i][j] = x;
                w[j][i] = x;
            }
        }
        if i + 1 < n && w[i][i + 1] == 0.0 {
            let x = rng.random_range(1..=max_w) as f64;
            w[i][i + 1] = x;
            w[i + 1][i] = x;
        }
    }
    w
}

/// Upper-triangle edge list, self-loops included.
pub fn edge_list(w: &Dense) -> Vec<(String, String, f64)> {
    let n = w.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i..n {
            if w[i][j] > 0.0 {
                edges.push((label(i), label(j), w[i][j]));
            }
        }
    }
    edges
}

pub fn to_graph(w: &Dense) -> Hpdn {
    Hpdn::from_parts((0..w.len()).map(label), edge_list(w)).unwrap()
}

pub fn random_assignment(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// `Q = 1/2w Σ_ij (A_ij - k_i k_j / 2w) δ(c_i, c_j)` with `A_ii = 2 W_ii`.
pub fn modularity(w: &Dense, c: &[usize]) -> f64 {
    let n = w.len();
    let a = |i: usize, j: usize| if i == j { 2.0 * w[i][i] } else { w[i][j] };
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a(i, j)).sum()).collect();
    let two_w: f64 = k.iter().sum();
    // scaled by (2w)^2 so integer weights sum exactly
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c[i] == c[j] {
                q += two_w * a(i, j) - k[i] * k[j];
            }
        }
    }
    q / (two_w * two_w)
}

fn entropy(parts: &[f64]) -> f64 {
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -parts.iter().filter(|&&x| x > 0.0).map(|&x| (x / total) * (x / total).log2()).sum::<f64>()
}

/// `L = q H(Q) + Σ_c p_c H(P_c)` with visit rates from strengths that
/// count self-loops once.
pub fn map_equation(w: &Dense, c: &[usize]) -> f64 {
    let n = w.len();
    let k = c.iter().max().unwrap() + 1;
    let s: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[i][j]).sum()).collect();
    let total: f64 = s.iter().sum();
    let mut exit = vec![0.0; k];
    for i in 0..n {
        for j in 0..n {
            if c[i] != c[j] {
                exit[c[i]] += w[i][j] / total;
            }
        }
    }
    let q: f64 = exit.iter().sum();
    let mut l = q * entropy(&exit);
    for m in 0..k {
        let mut parts = vec![exit[m]];
        parts.extend((0..n).filter(|&i| c[i] == m).map(|i| s[i] / total));
        let p: f64 = parts.iter().sum();
        l += p * entropy(&parts);
    }
    l
}

pub fn conductance(w: &Dense, c: &[usize], community: usize) -> f64 {
    let n = w.len();
    let (mut total, mut ext) = (0.0, 0.0);
    for i in (0..n).filter(|&i| c[i] == community) {
        for j in 0..n {
            total += w[i][j];
            if c[j] != community {
                ext += w[i][j];
            }
        }
    }
    ext / total
}

/// Directed flows `f[i][j]` (patient i, facility j).
pub fn random_flows(rng: &mut ChaCha8Rng, n: usize, max: u64) -> Vec<Vec<u64>> {
    let mut f = vec![vec![0u64; n]; n];
    for row in f.iter_mut() {
        for x in row.iter_mut() {
            if rng.random_bool(0.4) {
                *x = rng.random_range(1..=max);
            }
        }
    }
    f[0][n - 1] += 1;
    f
}

pub fn to_flow_table(f: &[Vec<u64>]) -> FlowTable {
    let mut t = FlowTable::default();
    for (i, row) in f.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            t.add(&label(i), &label(j), x);
        }
    }
    t
}

/// `N_D(c,c) / N_D(c)` by summing flow rows; `None` when `N_D(c) = 0`.
pub fn localization_index(f: &[Vec<u64>], c: &[usize], community: usize) -> Option<f64> {
    let (mut inside, mut all) = (0u64, 0u64);
    for (i, row) in f.iter().enumerate() {
        if c[i] != community {
            continue;
        }
        for (j, &x) in row.iter().enumerate() {
            all += x;
            if c[j] == community {
                inside += x;
            }
        }
    }
    (all > 0).then(|| inside as f64 / all as f64)
}

pub fn membership(c: &[usize]) -> Membership {
    c.iter().enumerate().map(|(i, &x)| (label(i), x)).collect()
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            grow(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    grow(&mut vec![0], 0, n, &mut out);
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn partition(c: &[usize]) -> Partition {
    Partition::from_assignment(c.iter().copied())
}
