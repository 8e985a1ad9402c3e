//! Immutable weighted undirected graph over ZCTAs and its summary statistics.
//!
//! Strength conventions: [`Hpdn::strength`] counts a self-loop once (the
//! conductance convention), while [`Hpdn::modularity_degree`] counts it twice,
//! matching the adjacency-matrix diagonal `A_ii = 2 W_ii` used by modularity.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hospital-patient discharge network. Nodes are indexed densely in
/// lexicographic label order; adjacency is stored CSR-style with sorted
/// neighbor lists and self-loops held separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Hpdn {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    loops: Vec<f64>,
    strength: Vec<f64>,
}

impl Hpdn {
    /// Builds a graph from weighted label pairs. Pairs are unordered:
    /// `(a, b, x)` and `(b, a, y)` merge into one edge of weight `x + y`.
    pub fn from_edges<I>(edges: I) -> Result<Hpdn>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        Self::from_parts(std::iter::empty(), edges)
    }

    /// Like [`Hpdn::from_edges`], also adding `nodes` that may be isolated.
    pub fn from_parts<N, I>(nodes: N, edges: I) -> Result<Hpdn>
    where
        N: IntoIterator<Item = String>,
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut merged: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut names: Vec<String> = nodes.into_iter().collect();
        for (a, b, w) in edges {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConfig(format!("edge {a}-{b} has non-positive weight {w}")));
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            *merged.entry(key).or_insert(0.0) += w;
        }
        for (a, b) in merged.keys() {
            names.push(a.clone());
            names.push(b.clone());
        }
        names.sort();
        names.dedup();
        if names.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();

        let n = names.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut loops = vec![0.0; n];
        for ((a, b), w) in merged {
            let (i, j) = (index[&a], index[&b]);
            if i == j {
                loops[i] += w;
            } else {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut strength = Vec::with_capacity(n);
        offsets.push(0);
        for (i, mut list) in adj.into_iter().enumerate() {
            list.sort_by_key(|&(j, _)| j);
            strength.push(list.iter().map(|&(_, w)| w).sum::<f64>() + loops[i]);
            for (j, w) in list {
                targets.push(j);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(Hpdn { labels: names, index, offsets, targets, weights, loops, strength })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Dense index of a ZCTA label.
    pub fn node(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    /// Non-loop neighbors of `i` in increasing index order.
    pub fn neighbors(&self, i: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Number of distinct non-loop neighbors.
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Incident weight with the self-loop counted once.
    pub fn strength(&self, i: usize) -> f64 {
        self.strength[i]
    }

    /// Incident weight with the self-loop counted twice.
    pub fn modularity_degree(&self, i: usize) -> f64 {
        self.strength[i] + self.loops[i]
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.loops[i]
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return (self.loops[i] > 0.0).then_some(self.loops[i]);
        }
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].binary_search(&j).ok().map(|k| self.weights[r.start + k])
    }

    /// Number of distinct edges between distinct nodes.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// `Σ_{i<j} W_ij + Σ_i W_ii`.
    pub fn total_weight(&self) -> f64 {
        let pairs: f64 = self.weights.iter().sum::<f64>() / 2.0;
        pairs + self.loops.iter().sum::<f64>()
    }

    /// Edges as `(i, j, w)` with `i <= j`, in lexicographic label order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            let lp = (self.loops[i] > 0.0).then_some((i, i, self.loops[i]));
            lp.into_iter().chain(self.neighbors(i).filter(move |&(j, _)| j > i).map(move |(j, w)| (i, j, w)))
        })
    }

    /// Writes `zcta_a<TAB>zcta_b<TAB>weight`, sorted, `zcta_a <= zcta_b`.
    /// Integral weights print without a decimal point.
    pub fn write_edges_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, j, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", self.labels[i], self.labels[j], w)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_edges_tsv<R: Read>(reader: R) -> Result<Hpdn> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(false).from_reader(reader);
        let mut edges = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            if row.len() != 3 {
                return Err(Error::MalformedRow { row: line, reason: "expected 3 columns".into() });
            }
            let w: f64 = row[2]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedRow { row: line, reason: format!("bad weight `{}`", &row[2]) })?;
            edges.push((row[0].trim().to_string(), row[1].trim().to_string(), w));
        }
        Hpdn::from_edges(edges)
    }

    /// Connected component id per node, numbered in order of lowest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }
}

/// Which local clustering coefficient to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clustering {
    #[default]
    Unweighted,
    /// Geometric mean of max-normalized triangle weights.
    Weighted,
}

/// Network statistics. Self-loops are excluded from `m`, `l` and `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub n: usize,
    pub m: usize,
    pub w: f64,
    pub rho: f64,
    /// Mean hop distance over ordered pairs of the largest component.
    pub l: f64,
    pub c: f64,
    pub clustering: Clustering,
    pub components: usize,
    pub largest_component: usize,
}

pub fn stats(g: &Hpdn) -> Result<NetworkStats> {
    stats_with(g, Clustering::Unweighted)
}

pub fn stats_with(g: &Hpdn, clustering: Clustering) -> Result<NetworkStats> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let m = g.edge_count();
    let rho = if n > 1 { 2.0 * m as f64 / (n as f64 * (n as f64 - 1.0)) } else { 0.0 };
    let (components, comp) = g.components();
    let mut sizes = vec![0usize; components];
    for &c in &comp {
        sizes[c] += 1;
    }
    // Ties go to the lowest component id, i.e. the one holding the smallest label.
    let (largest_id, largest) =
        sizes.iter().copied().enumerate().fold((0, 0), |best, (id, s)| if s > best.1 { (id, s) } else { best });
    let members: Vec<usize> = (0..n).filter(|&i| comp[i] == largest_id).collect();
    let l = average_hops(g, &members);
    let c = match clustering {
        Clustering::Unweighted => average_clustering(g),
        Clustering::Weighted => average_weighted_clustering(g),
    };
    Ok(NetworkStats { n, m, w: g.total_weight(), rho, l, c, clustering, components, largest_component: largest })
}

/// Mean BFS hop distance over ordered pairs of distinct nodes in `members`,
/// which must form one connected component.
fn average_hops(g: &Hpdn, members: &[usize]) -> f64 {
    let k = members.len();
    if k < 2 {
        return 0.0;
    }
    let total: u64 = members
        .par_iter()
        .map_init(
            || (vec![u32::MAX; g.node_count()], VecDeque::new()),
            |(dist, queue), &s| {
                dist.iter_mut().for_each(|d| *d = u32::MAX);
                dist[s] = 0;
                queue.push_back(s);
                let mut sum = 0u64;
                while let Some(u) = queue.pop_front() {
                    let du = dist[u];
                    sum += du as u64;
                    for (v, _) in g.neighbors(u) {
                        if dist[v] == u32::MAX {
                            dist[v] = du + 1;
                            queue.push_back(v);
                        }
                    }
                }
                sum
            },
        )
        .sum();
    total as f64 / (k as f64 * (k as f64 - 1.0))
}

/// Per-node triangle sums; `weight` maps an edge weight to its contribution.
fn local_triangles<F>(g: &Hpdn, contribution: F) -> Vec<f64>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    (0..g.node_count())
        .into_par_iter()
        .map_init(
            || vec![0.0f64; g.node_count()],
            |mark, i| {
                for (j, w) in g.neighbors(i) {
                    mark[j] = w;
                }
                let mut t = 0.0;
                for (j, wij) in g.neighbors(i) {
                    for (k, wjk) in g.neighbors(j) {
                        if k > j && mark[k] > 0.0 {
                            t += contribution(wij, mark[k], wjk);
                        }
                    }
                }
                for (j, _) in g.neighbors(i) {
                    mark[j] = 0.0;
                }
                t
            },
        )
        .collect()
}

fn mean_over_degree_two(g: &Hpdn, tri: &[f64]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, &t) in tri.iter().enumerate() {
        let d = g.degree(i);
        if d >= 2 {
            sum += 2.0 * t / (d as f64 * (d as f64 - 1.0));
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Average unweighted local clustering over nodes of degree >= 2.
pub fn average_clustering(g: &Hpdn) -> f64 {
    let tri = local_triangles(g, |_, _, _| 1.0);
    mean_over_degree_two(g, &tri)
}

/// Average weighted local clustering over nodes of degree >= 2, using the
/// cube root of the product of the three max-normalized triangle weights.
pub fn average_weighted_clustering(g: &Hpdn) -> f64 {
    let max_w = (0..g.node_count()).flat_map(|i| g.neighbors(i).map(|(_, w)| w)).fold(0.0f64, f64::max);
    if max_w == 0.0 {
        return 0.0;
    }
    let tri = local_triangles(g, |a, b, c| ((a / max_w) * (b / max_w) * (c / max_w)).cbrt());
    mean_over_degree_two(g, &tri)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, f64)]) -> Hpdn {
        Hpdn::from_edges(edges.iter().map(|&(a, b, w)| (a.to_string(), b.to_string(), w))).unwrap()
    }

    #[test]
    fn triangle_stats() {
        let g = graph(&[("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)]);
        let s = stats(&g).unwrap();
        assert_eq!((s.n, s.m), (3, 3));
        assert_eq!(s.w, 3.0);
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.l, 1.0);
        assert_eq!(s.c, 1.0);
        assert_eq!(s.components, 1);
        let sw = stats_with(&g, Clustering::Weighted).unwrap();
        assert!((sw.c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_average_hops() {
        let g = graph(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0)]);
        let s = stats(&g).unwrap();
        assert!((s.l - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.c, 0.0);
    }

    #[test]
    fn star_degree_and_strength() {
        let g = graph(&[("c", "x", 1.0), ("c", "y", 1.0), ("c", "z", 1.0)]);
        let c = g.node("c").unwrap();
        assert_eq!(g.degree(c), 3);
        assert_eq!(g.strength(c), 3.0);
        assert_eq!(g.neighbors(c).count(), 3);
    }

    #[test]
    fn self_loop_strength_conventions() {
        let g = graph(&[("a", "a", 10.0), ("a", "b", 5.0)]);
        let a = g.node("a").unwrap();
        assert_eq!(g.strength(a), 15.0);
        assert_eq!(g.modularity_degree(a), 25.0);
        assert_eq!(g.degree(a), 1);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.total_weight(), 15.0);
    }

    #[test]
    fn unknown_label() {
        let g = graph(&[("a", "b", 1.0)]);
        assert!(matches!(g.node("zz"), Err(Error::UnknownNode(l)) if l == "zz"));
    }

    #[test]
    fn rejects_non_positive_weights() {
        assert!(Hpdn::from_edges(vec![("a".into(), "b".into(), 0.0)]).is_err());
        assert!(matches!(Hpdn::from_edges(Vec::new()), Err(Error::EmptyGraph)));
    }

    #[test]
    fn disconnected_uses_largest_component() {
        let g = graph(&[("a", "b", 1.0), ("b", "c", 1.0), ("x", "y", 1.0)]);
        let s = stats(&g).unwrap();
        assert_eq!(s.components, 2);
        assert_eq!(s.largest_component, 3);
        // a-b-c path: (1+2+1+1+2+1)/6
        assert!((s.l - 8.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn edge_tsv_is_sorted_and_merged() {
        let g = graph(&[("b", "a", 5.0), ("a", "b", 7.0), ("a", "a", 2.0), ("c", "a", 1.5)]);
        let mut buf = Vec::new();
        g.write_edges_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a\ta\t2\na\tb\t12\na\tc\t1.5\n");
        assert_eq!(Hpdn::read_edges_tsv(buf.as_slice()).unwrap(), g);
    }
}
