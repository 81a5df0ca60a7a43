//! Exhaustive transport solvers used as test oracles.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

use super::{check_pair, cost_matrix};

/// Vertex enumeration stops above this many arc subsets.
const SUBSET_LIMIT: f64 = 5e6;

/// Exact `W_p` by enumeration: all permutations for equal-size uniform
/// measures with at most 7 atoms, otherwise all vertices of the transport
/// polytope when the two supports have at most 10 atoms together.
pub fn wasserstein_bruteforce(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let (m, n) = (mu.len(), nu.len());
    let cost = cost_matrix(mu, nu, p);
    let uniform = |w: &[f64]| w.iter().all(|x| (x - w[0]).abs() <= 1e-12);
    let best = if m == n && m <= 7 && uniform(&mu.weights()) && uniform(&nu.weights()) {
        best_permutation(&cost, n) / n as f64
    } else if m + n <= 10 {
        best_vertex(&mu.weights(), &nu.weights(), &cost)?
    } else {
        return Err(Error::ResourceLimit {
            what: "brute-force support size".into(),
            size: (m + n) as f64,
            limit: 10.0,
        });
    };
    Ok(best.max(0.0).powf(1.0 / p))
}

fn best_permutation(cost: &[f64], n: usize) -> f64 {
    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn best_vertex(a: &[f64], b: &[f64], cost: &[f64]) -> Result<f64> {
    let (m, n) = (a.len(), b.len());
    let arcs = m * n;
    let k = m + n - 1;
    let subsets = binomial(arcs, k);
    if subsets > SUBSET_LIMIT {
        return Err(Error::ResourceLimit {
            what: "transport polytope bases".into(),
            size: subsets,
            limit: SUBSET_LIMIT,
        });
    }
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if let Some(flows) = tree_flows(&idx, a, b, n) {
            if flows.iter().all(|f| *f >= -1e-12) {
                let c: f64 = idx.iter().zip(&flows).map(|(&e, f)| f * cost[e]).sum();
                best = best.min(c);
            }
        }
        let mut t = k;
        loop {
            if t == 0 {
                return Ok(best);
            }
            t -= 1;
            if idx[t] < arcs - k + t {
                idx[t] += 1;
                for s in t + 1..k {
                    idx[s] = idx[s - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Flows on a spanning-tree basis by repeatedly peeling leaves; `None` if
/// the arcs do not form a spanning tree.
fn tree_flows(arcs: &[usize], a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = a.len();
    let nodes = m + n;
    let ends: Vec<(usize, usize)> = arcs.iter().map(|&e| (e / n, m + e % n)).collect();
    let mut degree = vec![0usize; nodes];
    for &(u, v) in &ends {
        degree[u] += 1;
        degree[v] += 1;
    }
    if degree.iter().any(|&d| d == 0) {
        return None;
    }
    let mut rest: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut flow = vec![f64::NAN; arcs.len()];
    let mut done = vec![false; arcs.len()];
    for _ in 0..arcs.len() {
        let leaf = (0..nodes).find(|&v| degree[v] == 1)?;
        let e = (0..arcs.len()).find(|&e| !done[e] && (ends[e].0 == leaf || ends[e].1 == leaf))?;
        let f = rest[leaf];
        flow[e] = f;
        done[e] = true;
        let other = if ends[e].0 == leaf { ends[e].1 } else { ends[e].0 };
        rest[leaf] = 0.0;
        rest[other] -= f;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    rest.iter().all(|r| r.abs() < 1e-9).then_some(flow)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::ot::wasserstein_lp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let m = DiscreteMeasure::uniform(2, vec![vec![0.0, 1.0], vec![2.0, 0.5]]).unwrap();
        assert!(wasserstein_bruteforce(&m, &m, 2.0).unwrap() < 1e-15);
        let n = DiscreteMeasure::uniform(2, vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let direct: f64 = (1.0 + 0.25) / 2.0;
        assert!((wasserstein_bruteforce(&m, &n, 2.0).unwrap() - direct.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vertex_enumeration_matches_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let gen = |rng: &mut ChaCha8Rng, k: usize| {
                DiscreteMeasure::new(
                    2,
                    (0..k)
                        .map(|_| {
                            Atom::new(
                                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                                rng.random_range(0.1..1.0),
                            )
                        })
                        .collect(),
                )
                .unwrap()
            };
            let (a, b) = (gen(&mut rng, 4), gen(&mut rng, 5));
            let bf = wasserstein_bruteforce(&a, &b, 2.0).unwrap();
            let lp = wasserstein_lp(&a, &b, 2.0).unwrap().0;
            assert!((bf - lp).abs() < 1e-10, "{bf} vs {lp}");
        }
    }

    #[test]
    fn refuses_large_inputs() {
        let a = DiscreteMeasure::uniform(1, (0..8).map(|i| vec![i as f64]).collect()).unwrap();
        let b = DiscreteMeasure::uniform(1, (0..9).map(|i| vec![i as f64]).collect()).unwrap();
        assert!(wasserstein_bruteforce(&a, &b, 1.0).is_err());
    }
}
