//! Exact Wasserstein-p distances between discrete measures.

mod brute;
mod metric;
pub mod network_simplex;

pub use brute::wasserstein_bruteforce;
pub use metric::{metric_check, MetricReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist_pow, lex_cmp};
use crate::measure::DiscreteMeasure;

/// Largest `|supp μ| · |supp ν|` accepted by [`wasserstein_lp`].
pub const LP_SIZE_LIMIT: usize = 10_000_000;

/// Optimal coupling as sparse `(source, target, mass)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub p: f64,
    /// `Σ mass · |x - y|^p`, i.e. `W_p^p`.
    pub total_cost: f64,
}

impl TransportPlan {
    /// Largest deviation of the plan's marginals from the given weights.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut rows = mu.weights();
        let mut cols = nu.weights();
        for &(i, j, f) in &self.entries {
            rows[i] -= f;
            cols[j] -= f;
        }
        rows.iter().chain(&cols).fold(0.0, |a, r| a.max(r.abs()))
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(invalid("measures live in different dimensions"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p = {p} must be >= 1")));
    }
    Ok(())
}

pub(crate) fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for a in mu.atoms() {
        for b in nu.atoms() {
            c.push(dist_pow(&a.location, &b.location, p));
        }
    }
    c
}

/// `W_p` via the transport linear program, solved exactly by network simplex
/// and certified by complementary slackness.
pub fn wasserstein_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, TransportPlan)> {
    check_pair(mu, nu, p)?;
    let size = mu.len() * nu.len();
    if size > LP_SIZE_LIMIT {
        return Err(Error::ResourceLimit {
            what: "transport LP arcs".into(),
            size: size as f64,
            limit: LP_SIZE_LIMIT as f64,
        });
    }
    // lexicographic order makes the north-west start close to optimal
    let order = |m: &DiscreteMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| lex_cmp(&m.atoms()[a].location, &m.atoms()[b].location));
        idx
    };
    let (oi, oj) = (order(mu), order(nu));
    let a: Vec<f64> = oi.iter().map(|&i| mu.atoms()[i].weight).collect();
    let b: Vec<f64> = oj.iter().map(|&j| nu.atoms()[j].weight).collect();
    let mut cost = Vec::with_capacity(size);
    for &i in &oi {
        for &j in &oj {
            cost.push(dist_pow(&mu.atoms()[i].location, &nu.atoms()[j].location, p));
        }
    }
    let sol = network_simplex::solve_transport(&a, &b, &cost)?;
    let plan = TransportPlan {
        entries: sol.flows.iter().map(|&(i, j, f)| (oi[i], oj[j], f)).collect(),
        p,
        total_cost: sol.cost,
    };
    Ok((sol.cost.max(0.0).powf(1.0 / p), plan))
}

/// `W_p` on the line by monotone rearrangement of the two quantile functions.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    if mu.dim() != 1 {
        return Err(invalid("wasserstein_1d needs one-dimensional measures"));
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m.atoms().iter().map(|a| (a.location[0], a.weight)).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        v
    };
    let (xs, ys) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (xs[0].1, ys[0].1);
    let mut cost = 0.0;
    loop {
        let f = ra.min(rb);
        cost += f * (xs[i].0 - ys[j].0).abs().powf(p);
        ra -= f;
        rb -= f;
        let last_i = i + 1 == xs.len();
        let last_j = j + 1 == ys.len();
        if last_i && last_j {
            break;
        }
        if (ra <= rb && !last_i) || last_j {
            i += 1;
            ra += xs[i].1;
        } else {
            j += 1;
            rb += ys[j].1;
        }
    }
    Ok(cost.max(0.0).powf(1.0 / p))
}

/// `W_p` using the line solver in one dimension and the LP otherwise.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if mu.dim() == 1 {
        wasserstein_1d(mu, nu, p)
    } else {
        wasserstein_lp(mu, nu, p).map(|r| r.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts1(v: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(1, v.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, dim: usize, n: usize, uniform: bool) -> DiscreteMeasure {
        let atoms = (0..n)
            .map(|_| {
                let w = if uniform { 1.0 } else { rng.random_range(0.05..1.0) };
                Atom::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), w)
            })
            .collect();
        DiscreteMeasure::new(dim, atoms).unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        for p in [1.0, 2.0, 3.5] {
            assert!((wasserstein_1d(&pts1(&[0.0]), &pts1(&[1.0]), p).unwrap() - 1.0).abs() < 1e-15);
        }
        let m = pts1(&[0.3, -2.0, 1.0]);
        assert_eq!(wasserstein_1d(&m, &m, 2.0).unwrap(), 0.0);
        assert!((wasserstein_1d(&pts1(&[0.0]), &pts1(&[-1.0, 1.0]), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(wasserstein_1d(&DiscreteMeasure::dirac(vec![0.0, 0.0]), &DiscreteMeasure::dirac(vec![0.0, 0.0]), 1.0)
            .is_err());
    }

    #[test]
    fn lp_identity_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_measure(&mut rng, 2, 12, false);
        let (w, plan) = wasserstein_lp(&m, &m, 2.0).unwrap();
        assert!(w < 1e-12);
        assert!(plan.marginal_error(&m, &m) < 1e-10);
        for &(i, j, f) in &plan.entries {
            assert!(i == j || f < 1e-15);
        }
    }

    #[test]
    fn lp_matches_line_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n1 = rng.random_range(1..30);
            let n2 = rng.random_range(1..30);
            let (a, b) = (random_measure(&mut rng, 1, n1, false), random_measure(&mut rng, 1, n2, false));
            let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
            let (lp, plan) = wasserstein_lp(&a, &b, p).unwrap();
            assert!((lp - wasserstein_1d(&a, &b, p).unwrap()).abs() < 1e-9);
            assert!(plan.marginal_error(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn lp_is_monotone_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a = random_measure(&mut rng, 2, 15, false);
            let b = random_measure(&mut rng, 2, 9, false);
            let w1 = wasserstein_lp(&a, &b, 1.0).unwrap().0;
            let w2 = wasserstein_lp(&a, &b, 2.0).unwrap().0;
            let w3 = wasserstein_lp(&a, &b, 3.0).unwrap().0;
            assert!(w1 <= w2 + 1e-12 && w2 <= w3 + 1e-12);
        }
    }

    #[test]
    fn lp_size_limit() {
        let a = DiscreteMeasure::uniform(1, (0..4000).map(|i| vec![i as f64]).collect()).unwrap();
        assert!(matches!(wasserstein_lp(&a, &a, 1.0), Err(Error::ResourceLimit { .. })));
    }
}
