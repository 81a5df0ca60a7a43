//! Mesh norm and separation radius of a finite site set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::geometry::{dist, dist_sq, BoxDomain};
use crate::spatial::KdTree;

/// Above this many sites the separation radius uses a sorted sweep.
const ALL_PAIRS_LIMIT: usize = 10_000;
/// Box evaluations after which the mesh norm returns its current upper bound.
const MESH_EVAL_LIMIT: usize = 4_000_000;

struct Cell {
    upper: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Certified upper estimate of `sup_{y ∈ B(center, R)} min_i |x_i - y|`.
///
/// Boxes covering the domain are refined best-first. The distance to the
/// nearest site is 1-Lipschitz, so its value at a box center plus the box
/// half-diagonal bounds it on the box; values at points of the domain give
/// lower bounds. Refinement stops once the two agree to `1e-3 R`.
pub fn mesh_norm(sites: &[Vec<f64>], center: &[f64], radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("mesh_norm needs R > 0"));
    }
    let domain =
        BoxDomain::new(center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())?;
    certified_sup(sites, &domain, Some((center, radius)), 1e-3 * radius)
}

/// Same estimate with the supremum taken over a box; the tolerance is
/// `1e-3` times the box half-diagonal.
pub fn mesh_norm_box(sites: &[Vec<f64>], domain: &BoxDomain) -> Result<f64> {
    let tol = 1e-3 * domain.half_diagonal().max(1e-12);
    certified_sup(sites, domain, None, tol)
}

fn certified_sup(sites: &[Vec<f64>], domain: &BoxDomain, ball: Option<(&[f64], f64)>, tol: f64) -> Result<f64> {
    if sites.is_empty() {
        return Err(invalid("mesh_norm needs at least one site"));
    }
    let d = domain.dim();
    if sites.iter().any(|s| s.len() != d) {
        return Err(invalid("sites and domain differ in dimension"));
    }
    let tree = KdTree::new(sites);
    let f = |y: &[f64]| tree.nearest(y).1.sqrt();
    let mut lower = 0.0f64;
    let make = |lo: Vec<f64>, hi: Vec<f64>, lower: &mut f64| -> Option<Cell> {
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let fm = f(&mid);
        match ball {
            None => *lower = lower.max(fm),
            Some((center, radius)) => {
                let gap: f64 = (0..d)
                    .map(|k| {
                        let t = center[k].clamp(lo[k], hi[k]) - center[k];
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt();
                if gap > radius {
                    return None;
                }
                let off = dist(&mid, center);
                if off <= radius {
                    *lower = lower.max(fm);
                } else {
                    let y: Vec<f64> = (0..d).map(|k| center[k] + (mid[k] - center[k]) * radius / off).collect();
                    *lower = lower.max(f(&y));
                }
            }
        }
        Some(Cell { upper: fm + 0.5 * dist(&lo, &hi), lo, hi })
    };
    let mut heap = BinaryHeap::new();
    heap.extend(make(domain.lo.clone(), domain.hi.clone(), &mut lower));
    let mut evals = 1;
    while let Some(cell) = heap.pop() {
        if cell.upper - lower < tol || evals >= MESH_EVAL_LIMIT {
            if evals >= MESH_EVAL_LIMIT {
                log::warn!("mesh_norm stopped at the evaluation limit with gap {:.3e}", cell.upper - lower);
            }
            return Ok(cell.upper);
        }
        let k = (0..d).max_by(|&a, &b| (cell.hi[a] - cell.lo[a]).total_cmp(&(cell.hi[b] - cell.lo[b]))).unwrap_or(0);
        let m = 0.5 * (cell.lo[k] + cell.hi[k]);
        let (mut left_hi, mut right_lo) = (cell.hi.clone(), cell.lo.clone());
        left_hi[k] = m;
        right_lo[k] = m;
        heap.extend(make(cell.lo, left_hi, &mut lower));
        heap.extend(make(right_lo, cell.hi, &mut lower));
        evals += 2;
    }
    Ok(lower)
}

/// `q_X = ½ min_{i≠j} |x_i - x_j|`.
pub fn separation_radius(sites: &[Vec<f64>]) -> Result<f64> {
    if sites.len() < 2 {
        return Err(invalid("separation_radius needs at least two sites"));
    }
    let best = if sites.len() <= ALL_PAIRS_LIMIT {
        let mut best = f64::INFINITY;
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                best = best.min(dist_sq(a, b));
            }
        }
        best
    } else {
        sweep_min_dist_sq(sites)
    };
    if best == 0.0 {
        return Err(invalid("sites are not pairwise distinct"));
    }
    Ok(0.5 * best.sqrt())
}

/// Closest pair by sweeping along the first coordinate.
fn sweep_min_dist_sq(sites: &[Vec<f64>]) -> f64 {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| sites[a][0].total_cmp(&sites[b][0]));
    let mut best = f64::INFINITY;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            let dx = sites[j][0] - sites[i][0];
            if dx * dx >= best {
                break;
            }
            best = best.min(dist_sq(&sites[i], &sites[j]));
        }
    }
    best
}

/// Ball `(center, radius)` enclosing a box: its center and half-diagonal.
pub fn enclosing_ball(domain: &BoxDomain) -> (Vec<f64>, f64) {
    (domain.center(), domain.half_diagonal().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_norm_examples() {
        let v = mesh_norm(&[vec![0.0]], &[0.0], 1.0).unwrap();
        assert!(v >= 1.0 && v <= 1.0 + 1e-3, "{v}");
        let h = 0.125;
        let grid: Vec<Vec<f64>> = (-8..=8).map(|i| vec![i as f64 * h]).collect();
        let v = mesh_norm(&grid, &[0.0], 1.0).unwrap();
        assert!(v >= h / 2.0 && v <= h / 2.0 + 1e-3, "{v}");
    }

    #[test]
    fn mesh_norm_two_dimensional_grid() {
        let sites: Vec<Vec<f64>> =
            (0..4).flat_map(|i| (0..4).map(move |j| vec![i as f64 - 1.5, j as f64 - 1.5])).collect();
        // the ball of radius 1 sees cell corners at distance √2/2
        let v = mesh_norm(&sites, &[0.0, 0.0], 1.0).unwrap();
        let exact = 0.5f64.sqrt();
        assert!(v >= exact - 1e-12 && v <= exact + 1e-3, "{v}");
    }

    #[test]
    fn mesh_norm_over_a_box() {
        let h = 0.25;
        let grid: Vec<Vec<f64>> =
            (-2..=2).flat_map(|i| (-2..=2).map(move |j| vec![i as f64 * h, j as f64 * h])).collect();
        let v = mesh_norm_box(&grid, &BoxDomain::cube(2, 0.5)).unwrap();
        let exact = h / 2.0 * 2f64.sqrt();
        assert!(v >= exact - 1e-12 && v <= exact + 1e-3, "{v}");
    }

    #[test]
    fn adding_a_site_never_increases_the_mesh_norm() {
        let mut sites = vec![vec![0.0, 0.0], vec![0.7, -0.2]];
        let before = mesh_norm(&sites, &[0.0, 0.0], 1.0).unwrap();
        sites.push(vec![-0.5, 0.5]);
        let after = mesh_norm(&sites, &[0.0, 0.0], 1.0).unwrap();
        assert!(after <= before + 1e-3);
    }

    #[test]
    fn separation_examples() {
        assert_eq!(separation_radius(&[vec![0.0], vec![1.0]]).unwrap(), 0.5);
        let grid: Vec<Vec<f64>> = (0..4).flat_map(|i| (0..4).map(move |j| vec![i as f64, j as f64])).collect();
        assert_eq!(separation_radius(&grid).unwrap(), 0.5);
        assert!((separation_radius(&[vec![0.0], vec![0.1], vec![5.0]]).unwrap() - 0.05).abs() < 1e-15);
        assert!(separation_radius(&[vec![1.0], vec![1.0]]).is_err());
        assert!(separation_radius(&[vec![1.0]]).is_err());
    }

    #[test]
    fn sweep_agrees_with_all_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let mut best = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.min(dist_sq(a, b));
            }
        }
        assert_eq!(sweep_min_dist_sq(&pts), best);
    }
}
