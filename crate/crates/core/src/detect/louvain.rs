//! Modularity maximization by multilevel local moving.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detect::multilevel::{optimize, Level, Objective};
use crate::detect::{DetectConfig, Partition};
use crate::graph::Hpdn;

/// `term(tot, exit) = (tot - exit) / 2w - γ (tot / 2w)^2`, where node
/// weights are modularity degrees so `tot - exit` is the within-community
/// adjacency sum.
pub(crate) struct Modularity {
    pub two_w: f64,
    pub resolution: f64,
}

impl Objective for Modularity {
    fn term(&self, tot: f64, exit: f64) -> f64 {
        let t = tot / self.two_w;
        (tot - exit) / self.two_w - self.resolution * t * t
    }

    fn global(&self, _sum_exit: f64) -> f64 {
        0.0
    }
}

/// Louvain community detection. Node visit order is shuffled from the
/// configured seed; isolated nodes stay singletons.
pub fn louvain(g: &Hpdn, config: &DetectConfig) -> Partition {
    let weights: Vec<f64> = (0..g.node_count()).map(|i| g.modularity_degree(i)).collect();
    let two_w: f64 = weights.iter().sum();
    if two_w == 0.0 {
        return Partition::singletons(g.node_count());
    }
    let level = Level::new(g, weights);
    let objective = Modularity { two_w, resolution: config.louvain_resolution };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (membership, _) = optimize(&level, &objective, &mut rng);
    Partition::from_assignment(membership)
}
