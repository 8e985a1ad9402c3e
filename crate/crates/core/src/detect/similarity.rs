use std::collections::HashMap;

use crate::detect::Partition;
use crate::error::{Error, Result};

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two partitions of the same node set.
///
/// When the chance-corrected denominator vanishes (both partitions trivial
/// in the same way) the index is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::PartitionMismatch(format!("partitions cover {} and {} nodes", a.len(), b.len())));
    }
    let n = a.len() as u64;
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    for (&x, &y) in a.assignment().iter().zip(b.assignment()) {
        *cells.entry((x, y)).or_insert(0) += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = a.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let sum_b: f64 = b.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom.abs() < 1e-12 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_permuted() {
        let p = Partition::from_assignment([0, 0, 1, 1, 2, 2]);
        let q = Partition::from_assignment([5, 5, 9, 9, 1, 1]);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn singletons_vs_whole_matches_contingency() {
        // Contingency: six cells of size 1. index = 0, row pairs = 0,
        // column pairs = C(6,2) = 15, expected = 0, max = 7.5 -> ARI = 0.
        let s = Partition::singletons(6);
        let w = Partition::whole(6);
        assert_eq!(adjusted_rand_index(&s, &w).unwrap(), 0.0);
    }

    #[test]
    fn hand_contingency() {
        // a = {0,1,2}{3,4,5}; b = {0,1}{2,3}{4,5}
        // cells: (0,0)=2,(0,1)=1,(1,1)=1,(1,2)=2 -> index = 2
        // sum_a = 3+3 = 6, sum_b = 1+1+1 = 3, total = 15
        // expected = 18/15 = 1.2, max = 4.5 -> (2-1.2)/(4.5-1.2)
        let a = Partition::from_assignment([0, 0, 0, 1, 1, 1]);
        let b = Partition::from_assignment([0, 0, 1, 1, 2, 2]);
        let ari = adjusted_rand_index(&a, &b).unwrap();
        assert!((ari - 0.8 / 3.3).abs() < 1e-15);
    }

    #[test]
    fn size_mismatch() {
        assert!(adjusted_rand_index(&Partition::whole(3), &Partition::whole(4)).is_err());
    }
}
