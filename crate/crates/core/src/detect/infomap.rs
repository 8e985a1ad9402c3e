//! Two-level map equation minimization by multilevel local moving.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detect::multilevel::{optimize, Level, Objective};
use crate::detect::objective::plogp;
use crate::detect::{DetectConfig, Partition};
use crate::graph::Hpdn;

/// Negated map equation without the constant node-entropy term. Node
/// weights are strengths, so `tot / total` is module flow and
/// `exit / total` the module exit rate.
pub(crate) struct MapEquation {
    pub total: f64,
}

impl Objective for MapEquation {
    fn term(&self, tot: f64, exit: f64) -> f64 {
        2.0 * plogp(exit / self.total) - plogp((exit + tot) / self.total)
    }

    fn global(&self, sum_exit: f64) -> f64 {
        -plogp(sum_exit / self.total)
    }
}

/// Infomap community detection with seeded node order.
pub fn infomap(g: &Hpdn, config: &DetectConfig) -> Partition {
    let weights: Vec<f64> = (0..g.node_count()).map(|i| g.strength(i)).collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Partition::singletons(g.node_count());
    }
    let level = Level::new(g, weights);
    let objective = MapEquation { total };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (membership, score) = optimize(&level, &objective, &mut rng);
    // Like the reference implementation, fall back to the one-module
    // solution when the search cannot beat it; nodes without neighbors
    // stay on their own.
    let connected: f64 = (0..g.node_count()).filter(|&i| g.degree(i) > 0).map(|i| g.strength(i)).sum();
    let one_module = objective.global(0.0)
        + objective.term(connected, 0.0)
        + (0..g.node_count()).filter(|&i| g.degree(i) == 0).map(|i| objective.term(g.strength(i), 0.0)).sum::<f64>();
    if one_module > score {
        let mut next = 1;
        return Partition::from_assignment((0..g.node_count()).map(|i| {
            if g.degree(i) > 0 {
                0
            } else {
                next += 1;
                next
            }
        }));
    }
    Partition::from_assignment(membership)
}
