//! Shared local-moving and aggregation engine for Louvain and Infomap.
//!
//! Both objectives decompose over community aggregates: each community `c`
//! carries a total node weight `tot_c` and a cut weight `exit_c` (weight of
//! edges leaving `c`). The objective to maximize is
//! `global(Σ exit_c) + Σ_c term(tot_c, exit_c)`, so a single node move only
//! touches the two communities involved plus the global term, and gains are
//! computed incrementally from aggregates.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Hpdn;

/// Relative gain per pass below which the search stops.
pub(crate) const RELATIVE_TOLERANCE: f64 = 1e-9;
/// Smallest gain that counts as an improving move.
const MOVE_EPSILON: f64 = 1e-12;
const MAX_ROUNDS: usize = 64;

pub(crate) trait Objective {
    fn term(&self, tot: f64, exit: f64) -> f64;
    fn global(&self, sum_exit: f64) -> f64;
}

/// One level of the multilevel hierarchy: loop-free adjacency plus a
/// per-node weight that the objective aggregates.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    node_weight: Vec<f64>,
    out_weight: Vec<f64>,
}

impl Level {
    pub(crate) fn new(g: &Hpdn, node_weight: Vec<f64>) -> Level {
        let adj: Vec<Vec<(usize, f64)>> = (0..g.node_count()).map(|i| g.neighbors(i).collect()).collect();
        let out_weight = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
        Level { adj, node_weight, out_weight }
    }

    pub(crate) fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses communities into super-nodes. `comm` holds contiguous ids
    /// `0..k`; intra-community edges vanish from the adjacency but their
    /// weight stays inside the summed node weights.
    fn aggregate(&self, comm: &[usize], k: usize) -> Level {
        let mut members = vec![Vec::new(); k];
        for (i, &c) in comm.iter().enumerate() {
            members[c].push(i);
        }
        let mut scratch = vec![0.0; k];
        let mut seen = vec![false; k];
        let mut adj = Vec::with_capacity(k);
        let mut node_weight = Vec::with_capacity(k);
        for (c, nodes) in members.iter().enumerate() {
            let mut touched = Vec::new();
            for &i in nodes {
                for &(j, w) in &self.adj[i] {
                    let d = comm[j];
                    if d == c {
                        continue;
                    }
                    if !seen[d] {
                        seen[d] = true;
                        touched.push(d);
                    }
                    scratch[d] += w;
                }
            }
            touched.sort_unstable();
            let list: Vec<(usize, f64)> = touched
                .iter()
                .map(|&d| {
                    let w = scratch[d];
                    scratch[d] = 0.0;
                    seen[d] = false;
                    (d, w)
                })
                .collect();
            adj.push(list);
            node_weight.push(nodes.iter().map(|&i| self.node_weight[i]).sum());
        }
        let out_weight = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
        Level { adj, node_weight, out_weight }
    }
}

/// Community aggregates for a level.
#[derive(Debug, Clone)]
pub(crate) struct State {
    comm: Vec<usize>,
    tot: Vec<f64>,
    exit: Vec<f64>,
    sum_exit: f64,
}

impl State {
    /// `comm` ids must lie in `0..level.len()`.
    fn new(level: &Level, comm: Vec<usize>) -> State {
        let n = level.len();
        let mut tot = vec![0.0; n];
        let mut exit = vec![0.0; n];
        for i in 0..n {
            let c = comm[i];
            tot[c] += level.node_weight[i];
            exit[c] += level.adj[i].iter().filter(|&&(j, _)| comm[j] != c).map(|&(_, w)| w).sum::<f64>();
        }
        let sum_exit = exit.iter().sum();
        State { comm, tot, exit, sum_exit }
    }

    fn singletons(level: &Level) -> State {
        State::new(level, (0..level.len()).collect())
    }

    pub(crate) fn score<O: Objective>(&self, obj: &O) -> f64 {
        obj.global(self.sum_exit) + self.tot.iter().zip(&self.exit).map(|(&t, &e)| obj.term(t, e)).sum::<f64>()
    }
}

/// Repeated passes of single-node moves in shuffled order. Each node goes
/// to the neighboring community with the largest strictly positive gain.
/// Returns whether any node moved.
fn local_moves<O: Objective, R: Rng>(level: &Level, obj: &O, state: &mut State, rng: &mut R) -> bool {
    let n = level.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut link = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        order.shuffle(rng);
        let mut pass_gain = 0.0;
        let mut moves = 0usize;
        for &i in &order {
            let a = state.comm[i];
            for &(j, w) in &level.adj[i] {
                let c = state.comm[j];
                if !seen[c] {
                    seen[c] = true;
                    touched.push(c);
                }
                link[c] += w;
            }
            let nw = level.node_weight[i];
            let out = level.out_weight[i];
            let tot_a = state.tot[a] - nw;
            let exit_a = state.exit[a] - out + 2.0 * link[a];
            let delta_a = obj.term(tot_a, exit_a) - obj.term(state.tot[a], state.exit[a]);
            let base_global = obj.global(state.sum_exit);

            let mut best = (MOVE_EPSILON, a);
            for &b in &touched {
                if b == a {
                    continue;
                }
                let tot_b = state.tot[b] + nw;
                let exit_b = state.exit[b] + out - 2.0 * link[b];
                let sum_exit = state.sum_exit + (exit_a - state.exit[a]) + (exit_b - state.exit[b]);
                let gain = delta_a + obj.term(tot_b, exit_b) - obj.term(state.tot[b], state.exit[b])
                    + obj.global(sum_exit)
                    - base_global;
                if gain > best.0 {
                    best = (gain, b);
                }
            }
            let (gain, b) = best;
            if b != a {
                let exit_b = state.exit[b] + out - 2.0 * link[b];
                state.sum_exit += (exit_a - state.exit[a]) + (exit_b - state.exit[b]);
                state.tot[a] = tot_a;
                state.exit[a] = exit_a;
                state.tot[b] += nw;
                state.exit[b] = exit_b;
                state.comm[i] = b;
                pass_gain += gain;
                moves += 1;
            }
            for &c in &touched {
                link[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        if moves == 0 {
            break;
        }
        moved_any = true;
        let scale = state.score(obj).abs().max(1.0);
        if pass_gain <= RELATIVE_TOLERANCE * scale {
            break;
        }
    }
    moved_any
}

/// Relabels ids by first appearance; returns the count and the new ids.
fn renumber(ids: &[usize]) -> (usize, Vec<usize>) {
    let mut map = vec![usize::MAX; ids.len().max(ids.iter().max().map_or(0, |&m| m + 1))];
    let mut next = 0;
    let out = ids
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect();
    (next, out)
}

/// Multilevel search: local moves and aggregation until no level moves,
/// then a fine-tuning pass of single base-node moves from the projected
/// partition; rounds repeat while the objective improves.
pub(crate) fn optimize<O: Objective, R: Rng>(base: &Level, obj: &O, rng: &mut R) -> (Vec<usize>, f64) {
    let n = base.len();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut best = State::singletons(base).score(obj);
    for _ in 0..MAX_ROUNDS {
        let (k, mut current) = renumber(&membership);
        let mut level = base.aggregate(&current, k);
        loop {
            let mut state = State::singletons(&level);
            if !local_moves(&level, obj, &mut state, rng) {
                break;
            }
            let (k, map) = renumber(&state.comm);
            for c in current.iter_mut() {
                *c = map[*c];
            }
            level = level.aggregate(&map, k);
        }
        let (_, ids) = renumber(&current);
        let mut state = State::new(base, ids);
        local_moves(base, obj, &mut state, rng);
        let score = state.score(obj);
        let improved = score > best + RELATIVE_TOLERANCE * score.abs().max(1.0);
        if score >= best {
            membership = state.comm;
            best = score;
        }
        if !improved {
            break;
        }
    }
    (renumber(&membership).1, best)
}
