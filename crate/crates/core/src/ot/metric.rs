//! Property checks of the Wasserstein distance on a finite family.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measure::DiscreteMeasure;
use crate::quadrature::chunk_rng;

use super::wasserstein;

/// Triples beyond this count are subsampled with the given seed.
const MAX_TRIPLES: usize = 20_000;

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub distances: Vec<Vec<f64>>,
    pub triples_checked: usize,
    pub failures: Vec<String>,
}

impl MetricReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Symmetry, identity of indiscernibles (distance below `1e-9` exactly when
/// the measures agree after atom merging) and the triangle inequality within
/// `1e-8`.
pub fn metric_check(measures: &[DiscreteMeasure], p: f64, seed: u64) -> Result<MetricReport> {
    let k = measures.len();
    if k == 0 || measures.iter().any(|m| m.dim() != measures[0].dim()) {
        return Err(invalid("metric_check needs a nonempty family of equal dimension"));
    }
    let mut d = vec![vec![0.0; k]; k];
    let mut failures = Vec::new();
    for i in 0..k {
        for j in 0..k {
            d[i][j] = wasserstein(&measures[i], &measures[j], p)?;
        }
    }
    for i in 0..k {
        for j in 0..k {
            if (d[i][j] - d[j][i]).abs() > 1e-9 {
                failures.push(format!("asymmetric: d({i},{j}) = {} vs d({j},{i}) = {}", d[i][j], d[j][i]));
            }
            let same = measures[i].approx_eq(&measures[j], 1e-12);
            if same != (d[i][j] < 1e-9) {
                failures.push(format!("identity of indiscernibles fails for ({i},{j}): d = {}", d[i][j]));
            }
        }
    }
    let mut triples: Vec<(usize, usize, usize)> = Vec::with_capacity(k * k * k);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                triples.push((a, b, c));
            }
        }
    }
    if triples.len() > MAX_TRIPLES {
        triples.shuffle(&mut chunk_rng(seed, 0));
        triples.truncate(MAX_TRIPLES);
    }
    for &(a, b, c) in &triples {
        if d[a][c] > d[a][b] + d[b][c] + 1e-8 {
            failures.push(format!("triangle: d({a},{c}) = {} > {} + {}", d[a][c], d[a][b], d[b][c]));
        }
    }
    Ok(MetricReport { distances: d, triples_checked: triples.len(), failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    #[test]
    fn diracs_on_a_line() {
        let ms: Vec<_> = (0..3).map(|i| DiscreteMeasure::dirac(vec![i as f64])).collect();
        let r = metric_check(&ms, 1.0, 0).unwrap();
        assert!(r.passed());
        assert!((r.distances[0][2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn permuted_duplicates_are_at_distance_zero() {
        let a = DiscreteMeasure::new(2, vec![Atom::new(vec![0.0, 1.0], 0.3), Atom::new(vec![1.0, 0.0], 0.7)]).unwrap();
        let b = DiscreteMeasure::new(2, vec![Atom::new(vec![1.0, 0.0], 0.7), Atom::new(vec![0.0, 1.0], 0.3)]).unwrap();
        let r = metric_check(&[a, b], 2.0, 1).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.distances[0][1] < 1e-12);
    }
}
