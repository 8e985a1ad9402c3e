//! Speaker-listener label propagation with non-overlapping post-processing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::{DetectConfig, Partition};
use crate::graph::Hpdn;

/// Runs SLPA for `slpa_iterations` rounds. Every listener hears one label
/// from each neighbor, drawn from that neighbor's memory in proportion to
/// its frequency; votes are weighted by edge weight and the heaviest label
/// (lowest id on ties) is appended to the listener's memory. Labels whose
/// memory frequency falls below `slpa_threshold` are then dropped and each
/// node keeps its most frequent survivor, or its most frequent label if
/// none survive.
pub fn slpa(g: &Hpdn, config: &DetectConfig) -> Partition {
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut memory: Vec<Vec<u32>> = (0..n as u32).map(|i| vec![i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut votes: BTreeMap<u32, f64> = BTreeMap::new();
    for _ in 0..config.slpa_iterations {
        order.shuffle(&mut rng);
        for &listener in &order {
            if g.degree(listener) == 0 {
                continue;
            }
            votes.clear();
            for (speaker, w) in g.neighbors(listener) {
                let mem = &memory[speaker];
                let label = mem[rng.random_range(0..mem.len())];
                *votes.entry(label).or_insert(0.0) += w;
            }
            // BTreeMap iterates labels in increasing order; keep the first maximum.
            let mut best = (0u32, f64::NEG_INFINITY);
            for (&label, &v) in &votes {
                if v > best.1 {
                    best = (label, v);
                }
            }
            memory[listener].push(best.0);
        }
    }
    let labels = memory.iter().map(|mem| dominant_label(mem, config.slpa_threshold));
    Partition::from_assignment(labels)
}

fn dominant_label(memory: &[u32], threshold: f64) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in memory {
        *counts.entry(l).or_insert(0) += 1;
    }
    let len = memory.len() as f64;
    let most_frequent = |candidates: &mut dyn Iterator<Item = (u32, usize)>| {
        candidates.fold(None, |best: Option<(u32, usize)>, (l, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
    };
    let survivors =
        most_frequent(&mut counts.iter().map(|(&l, &c)| (l, c)).filter(|&(_, c)| c as f64 / len >= threshold));
    survivors
        .or_else(|| most_frequent(&mut counts.iter().map(|(&l, &c)| (l, c))))
        .map(|(l, _)| l)
        .expect("memory is never empty")
}
