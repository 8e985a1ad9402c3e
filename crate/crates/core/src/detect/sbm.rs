//! Degree-corrected stochastic block model, microcanonical formulation.
//!
//! Edge weights are read as edge multiplicities of an undirected multigraph
//! with adjacency `A_ij = W_ij` (`i != j`) and `A_ii = 2 W_ii`. Degrees are
//! `k_i = Σ_j A_ij`, `e_rs` counts edge endpoints between blocks (`e_rr` is
//! twice the number of edges inside `r`), `e_r = Σ_s e_rs`, `n_r` is block
//! size, `B` the number of non-empty blocks, `E` the edge count and `N` the
//! node count. The description length in nats is `S = -ln P(A, k, e, b)`:
//!
//! ```text
//! likelihood  -ln P(A|k,e,b) = Σ_{i<j} ln A_ij! + Σ_i ln A_ii!! + Σ_r ln e_r!
//!                              - Σ_{r<s} ln e_rs! - Σ_r ln e_rr!! - Σ_i ln k_i!
//! degrees     -ln P(k|e,b)   = Σ_r ln C(n_r + e_r - 1, e_r)
//! edges       -ln P(e)       = ln C(B(B+1)/2 + E - 1, E)
//! partition   -ln P(b)       = ln N! - Σ_r ln n_r! + ln C(N-1, B-1) + ln N
//! ```
//!
//! Degrees are uniform within blocks and block sizes uniform over
//! compositions; there is no hierarchical prior.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::{DetectConfig, Partition};
use crate::error::{Error, Result};
use crate::graph::Hpdn;

const LN_2: f64 = std::f64::consts::LN_2;

pub(crate) fn ln_fact(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

pub(crate) fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// `ln ((n multichoose k))`, zero for `k = 0`.
fn ln_multiset(n: u64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        ln_binom(n + k - 1, k)
    }
}

/// `ln (2m)!!` for an even count `2m`.
fn ln_double_fact_even(even: u64) -> f64 {
    let m = even / 2;
    m as f64 * LN_2 + ln_fact(m)
}

/// Components of the description length, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptionLength {
    pub likelihood: f64,
    pub degrees: f64,
    pub edges: f64,
    pub partition: f64,
}

impl DescriptionLength {
    pub fn total(&self) -> f64 {
        self.likelihood + self.degrees + self.edges + self.partition
    }

    /// The block-structure part: edge-count matrix and partition priors.
    pub fn model(&self) -> f64 {
        self.edges + self.partition
    }
}

/// Integer multigraph view of an [`Hpdn`].
#[derive(Debug, Clone)]
struct Multigraph {
    adj: Vec<Vec<(usize, u64)>>,
    loops: Vec<u64>,
    degree: Vec<u64>,
    edges: u64,
    /// `Σ_{i<j} ln A_ij! + Σ_i ln A_ii!! - Σ_i ln k_i!`
    constant: f64,
}

fn as_multiplicity(w: f64) -> Result<u64> {
    let r = w.round();
    if (w - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::NonIntegerWeights(w));
    }
    Ok(r as u64)
}

impl Multigraph {
    fn new(g: &Hpdn) -> Result<Multigraph> {
        let n = g.node_count();
        let mut adj = Vec::with_capacity(n);
        let mut loops = Vec::with_capacity(n);
        let mut degree = Vec::with_capacity(n);
        let mut edges = 0u64;
        let mut constant = 0.0;
        for i in 0..n {
            let list = g.neighbors(i).map(|(j, w)| as_multiplicity(w).map(|m| (j, m))).collect::<Result<Vec<_>>>()?;
            let l = as_multiplicity(g.self_loop(i))?;
            let k = list.iter().map(|&(_, m)| m).sum::<u64>() + 2 * l;
            for &(j, m) in &list {
                if j > i {
                    edges += m;
                    constant += ln_fact(m);
                }
            }
            edges += l;
            constant += ln_double_fact_even(2 * l) - ln_fact(k);
            adj.push(list);
            loops.push(l);
            degree.push(k);
        }
        Ok(Multigraph { adj, loops, degree, edges, constant })
    }

    fn len(&self) -> usize {
        self.adj.len()
    }
}

/// Block aggregates supporting incremental moves and merges.
#[derive(Debug, Clone)]
struct Blocks<'a> {
    g: &'a Multigraph,
    b: Vec<usize>,
    size: Vec<u64>,
    ends: Vec<u64>,
    rows: Vec<BTreeMap<usize, u64>>,
    n_blocks: usize,
}

impl<'a> Blocks<'a> {
    /// `assignment` ids must lie in `0..g.len()`.
    fn new(g: &'a Multigraph, assignment: Vec<usize>) -> Blocks<'a> {
        let n = g.len();
        let mut blocks = Blocks {
            g,
            b: assignment,
            size: vec![0; n],
            ends: vec![0; n],
            rows: vec![BTreeMap::new(); n],
            n_blocks: 0,
        };
        for v in 0..n {
            let r = blocks.b[v];
            blocks.size[r] += 1;
            blocks.ends[r] += g.degree[v];
            for &(u, m) in &g.adj[v] {
                if u > v {
                    let t = blocks.b[u];
                    blocks.add(r, t, if r == t { 2 * m } else { m }, true);
                }
            }
            if g.loops[v] > 0 {
                blocks.add(r, r, 2 * g.loops[v], true);
            }
        }
        blocks.n_blocks = blocks.size.iter().filter(|&&s| s > 0).count();
        blocks
    }

    fn entry(&self, r: usize, s: usize) -> u64 {
        self.rows[r].get(&s).copied().unwrap_or(0)
    }

    /// Adds or subtracts `x` at `(r, s)` and `(s, r)`; on the diagonal `x`
    /// counts edge endpoints.
    fn add(&mut self, r: usize, s: usize, x: u64, up: bool) {
        let mut bump = |a: usize, c: usize| {
            let e = self.rows[a].entry(c).or_insert(0);
            if up {
                *e += x;
            } else {
                *e -= x;
            }
            if *e == 0 {
                self.rows[a].remove(&c);
            }
        };
        bump(r, s);
        if r != s {
            bump(s, r);
        }
    }

    fn f_blocks(&self, n_blocks: usize) -> f64 {
        let n = self.g.len() as u64;
        let b = n_blocks as u64;
        let pairs = b * (b + 1) / 2;
        let edges = if self.g.edges == 0 { 0.0 } else { ln_binom(pairs + self.g.edges - 1, self.g.edges) };
        edges + ln_binom(n - 1, b.saturating_sub(1)) + ln_fact(n) + (n as f64).ln()
    }

    fn block_term(size: u64, ends: u64) -> f64 {
        ln_fact(ends) + ln_multiset(size, ends) - ln_fact(size)
    }

    /// Every term of `S` involving block `r` or `s`.
    fn local(&self, r: usize, s: usize) -> f64 {
        let mut acc = Self::block_term(self.size[r], self.ends[r]) + Self::block_term(self.size[s], self.ends[s]);
        for (&t, &x) in &self.rows[r] {
            acc -= if t == r { ln_double_fact_even(x) } else { ln_fact(x) };
        }
        for (&t, &x) in &self.rows[s] {
            if t == s {
                acc -= ln_double_fact_even(x);
            } else if t != r {
                acc -= ln_fact(x);
            }
        }
        acc
    }

    fn terms(&self) -> DescriptionLength {
        let mut likelihood = self.g.constant;
        let mut degrees = 0.0;
        let mut partition = ln_fact(self.g.len() as u64);
        for r in 0..self.g.len() {
            if self.size[r] == 0 {
                continue;
            }
            likelihood += ln_fact(self.ends[r]);
            degrees += ln_multiset(self.size[r], self.ends[r]);
            partition -= ln_fact(self.size[r]);
            for (&t, &x) in &self.rows[r] {
                if t == r {
                    likelihood -= ln_double_fact_even(x);
                } else if t > r {
                    likelihood -= ln_fact(x);
                }
            }
        }
        let n = self.g.len() as u64;
        let b = self.n_blocks as u64;
        partition += ln_binom(n - 1, b - 1) + (n as f64).ln();
        let edges = if self.g.edges == 0 { 0.0 } else { ln_binom(b * (b + 1) / 2 + self.g.edges - 1, self.g.edges) };
        DescriptionLength { likelihood, degrees, edges, partition }
    }

    /// Moves `v` into block `s`, returning the change in `S`.
    fn move_node(&mut self, v: usize, s: usize) -> f64 {
        let r = self.b[v];
        if r == s {
            return 0.0;
        }
        let before = self.local(r, s) + self.f_blocks(self.n_blocks);
        let g = self.g;
        for &(u, m) in &g.adj[v] {
            let t = self.b[u];
            if t == r {
                self.add(r, r, 2 * m, false);
            } else {
                self.add(r, t, m, false);
            }
            if t == s {
                self.add(s, s, 2 * m, true);
            } else {
                self.add(s, t, m, true);
            }
        }
        if g.loops[v] > 0 {
            self.add(r, r, 2 * g.loops[v], false);
            self.add(s, s, 2 * g.loops[v], true);
        }
        let k = g.degree[v];
        self.ends[r] -= k;
        self.ends[s] += k;
        self.size[r] -= 1;
        if self.size[r] == 0 {
            self.n_blocks -= 1;
        }
        if self.size[s] == 0 {
            self.n_blocks += 1;
        }
        self.size[s] += 1;
        self.b[v] = s;
        self.local(r, s) + self.f_blocks(self.n_blocks) - before
    }

    /// Change in `S` from merging block `r` into `s`, without applying it.
    fn merge_delta(&self, r: usize, s: usize) -> f64 {
        let before = self.local(r, s) + self.f_blocks(self.n_blocks);
        let diag = self.entry(r, r) + self.entry(s, s) + 2 * self.entry(r, s);
        let mut after =
            Self::block_term(self.size[r] + self.size[s], self.ends[r] + self.ends[s]) - ln_double_fact_even(diag);
        for (&t, &x) in &self.rows[r] {
            if t != r && t != s {
                after -= ln_fact(x + self.entry(s, t));
            }
        }
        for (&t, &x) in &self.rows[s] {
            if t != r && t != s && !self.rows[r].contains_key(&t) {
                after -= ln_fact(x);
            }
        }
        after + self.f_blocks(self.n_blocks - 1) - before
    }

    fn merge(&mut self, r: usize, s: usize) {
        let row = std::mem::take(&mut self.rows[r]);
        for (t, x) in row {
            if t == r {
                self.add(s, s, x, true);
            } else if t == s {
                self.rows[s].remove(&r);
                self.add(s, s, 2 * x, true);
            } else {
                self.rows[t].remove(&r);
                self.add(s, t, x, true);
            }
        }
        for v in self.b.iter_mut().filter(|v| **v == r) {
            *v = s;
        }
        self.size[s] += self.size[r];
        self.ends[s] += self.ends[r];
        self.size[r] = 0;
        self.ends[r] = 0;
        self.n_blocks -= 1;
    }
}

/// Description-length components of `p` on `g`.
pub fn sbm_terms(g: &Hpdn, p: &Partition) -> Result<DescriptionLength> {
    p.check_covers(g)?;
    let mg = Multigraph::new(g)?;
    Ok(Blocks::new(&mg, p.assignment().to_vec()).terms())
}

/// Total description length `S` in nats; lower is better.
pub fn sbm_description_length(g: &Hpdn, p: &Partition) -> Result<f64> {
    sbm_terms(g, p).map(|t| t.total())
}

/// Greedy agglomeration from singletons: each round every block proposes
/// its best merge with an adjacent block, and non-overlapping merges that
/// still reduce `S` are applied in order of gain.
fn agglomerate(blocks: &mut Blocks<'_>) {
    let n = blocks.g.len();
    loop {
        if blocks.n_blocks <= 1 {
            break;
        }
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for r in 0..n {
            if blocks.size[r] == 0 {
                continue;
            }
            let mut neighbours: Vec<usize> = blocks.rows[r].keys().copied().filter(|&t| t != r).collect();
            neighbours.sort_unstable();
            let best = neighbours.into_iter().map(|t| (blocks.merge_delta(r, t), t)).fold(
                None,
                |acc: Option<(f64, usize)>, cur| match acc {
                    Some(a) if a.0 <= cur.0 => Some(a),
                    _ => Some(cur),
                },
            );
            if let Some((d, t)) = best {
                if d < -1e-9 {
                    candidates.push((d, r, t));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used = vec![false; n];
        let mut applied = 0;
        for (_, r, t) in candidates {
            if used[r] || used[t] {
                continue;
            }
            if blocks.merge_delta(r, t) < -1e-9 {
                blocks.merge(r, t);
                used[r] = true;
                used[t] = true;
                applied += 1;
            }
        }
        if applied == 0 {
            break;
        }
    }
}

/// Metropolis-Hastings single-node sweeps at unit temperature. Proposals
/// mix the block of a random neighbor with a uniformly random block.
/// Returns the best assignment visited.
fn sweep<R: Rng>(blocks: &mut Blocks<'_>, sweeps: usize, rng: &mut R) -> Vec<usize> {
    let g = blocks.g;
    let n = g.len();
    let mut current = blocks.terms().total();
    let mut best = current;
    let mut best_b = blocks.b.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let proposal = |blocks: &Blocks<'_>, v: usize, t: usize, active: usize| -> f64 {
        let adj = &g.adj[v];
        let uniform = 1.0 / active as f64;
        let hits = adj.iter().filter(|&&(u, _)| blocks.b[u] == t).count();
        0.5 * hits as f64 / adj.len() as f64 + 0.5 * uniform
    };
    // Nodes without neighbors keep their own block, which never merges, so
    // block `v` of such a node is never a proposal target.
    let pinned = (0..n).filter(|&v| g.adj[v].is_empty()).count();
    for _ in 0..sweeps {
        if blocks.n_blocks <= pinned + 1 {
            break;
        }
        let active: Vec<usize> = (0..n).filter(|&r| blocks.size[r] > 0 && !g.adj[r].is_empty()).collect();
        order.shuffle(rng);
        for &v in &order {
            let r = blocks.b[v];
            let adj = &g.adj[v];
            // Nodes without neighbors stay singletons.
            if adj.is_empty() {
                continue;
            }
            let s = if rng.random_bool(0.5) {
                blocks.b[adj[rng.random_range(0..adj.len())].0]
            } else {
                active[rng.random_range(0..active.len())]
            };
            if s == r || blocks.size[s] == 0 {
                continue;
            }
            let forward = proposal(blocks, v, s, blocks.n_blocks - pinned);
            let delta = blocks.move_node(v, s);
            let reverse = if blocks.size[r] == 0 { forward } else { proposal(blocks, v, r, blocks.n_blocks - pinned) };
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta).exp() * reverse / forward;
            if accept {
                current += delta;
                if current < best - 1e-9 {
                    best = current;
                    best_b.clone_from(&blocks.b);
                }
            } else {
                blocks.move_node(v, r);
            }
        }
    }
    best_b
}

/// Degree-corrected block model inference: agglomerative initialization
/// followed by `sbm_mcmc_sweeps` Metropolis sweeps; returns the best
/// partition visited.
pub fn block_model(g: &Hpdn, config: &DetectConfig) -> Result<Partition> {
    let mg = Multigraph::new(g)?;
    let n = mg.len();
    if n <= 1 {
        return Ok(Partition::whole(n));
    }
    let mut blocks = Blocks::new(&mg, (0..n).collect());
    agglomerate(&mut blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let best = sweep(&mut blocks, config.sbm_mcmc_sweeps, &mut rng);
    Ok(Partition::from_assignment(best))
}
