//! Kd-tree for nearest-site queries with index tie-breaking.

use crate::geometry::dist_sq;

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    /// Permutation of point indices; node `i` splits the slice it roots.
    order: Vec<usize>,
}

impl KdTree {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(1, Vec::len);
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(&flat, dim, &mut order, 0);
        Self { dim, points: flat, order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest point; among points at the same distance (up to
    /// a relative `1e-12`), the smallest index. Returns `(index, distance²)`.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let tol = 1e-12 * (1.0 + x.iter().map(|v| v * v).sum::<f64>());
        self.search(x, 0, self.order.len(), 0, &mut best, tol);
        best
    }

    fn search(&self, x: &[f64], lo: usize, hi: usize, depth: usize, best: &mut (usize, f64), tol: f64) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = self.point(idx);
        let d2 = dist_sq(p, x);
        if d2 < best.1 - tol {
            *best = (idx, d2);
        } else if d2 <= best.1 + tol && idx < best.0 {
            *best = (idx, best.1.min(d2));
        }
        let axis = depth % self.dim;
        let diff = x[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(x, near.0, near.1, depth + 1, best, tol);
        if diff * diff <= best.1 + tol {
            self.search(x, far.0, far.1, depth + 1, best, tol);
        }
    }
}

fn build(points: &[f64], dim: usize, order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % dim;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a * dim + axis].total_cmp(&points[b * dim + axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, dim, left, depth + 1);
    build(points, dim, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let tree = KdTree::new(&pts);
        for _ in 0..2000 {
            let x = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
            let (i, d2) = tree.nearest(&x);
            let (j, e2) =
                pts.iter().enumerate().map(|(j, p)| (j, dist_sq(p, &x))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            assert_eq!(i, j);
            assert_eq!(d2, e2);
        }
    }

    #[test]
    fn ties_go_to_the_smallest_index() {
        let pts = vec![vec![1.0], vec![0.0], vec![2.0]];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&[0.5]).0, 0);
        assert_eq!(tree.nearest(&[1.5]).0, 0);
        let grid: Vec<Vec<f64>> = (0..4).flat_map(|i| (0..4).map(move |j| vec![i as f64, j as f64])).collect();
        let tree = KdTree::new(&grid);
        // (0.5, 0.5) is equidistant to indices 0, 1, 4, 5
        assert_eq!(tree.nearest(&[0.5, 0.5]).0, 0);
        assert_eq!(tree.nearest(&[2.5, 1.5]).0, 9);
    }
}
