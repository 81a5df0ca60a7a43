//! Gauss-Legendre rules, composite tensor grids and seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoxDomain;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional composite rule: `order` Gauss-Legendre points on every
/// interval between consecutive `breaks`.
pub fn composite_axis(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(breaks.len() * order);
    let mut ws = Vec::with_capacity(breaks.len() * order);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Sorted, deduplicated breakpoints covering `[lo, hi]` with `pieces` equal
/// subintervals plus any `extra` points strictly inside.
pub fn axis_breaks(lo: f64, hi: f64, pieces: usize, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let pieces = pieces.max(1);
    let mut b: Vec<f64> =
        (0..=pieces).map(|i| if i == pieces { hi } else { lo + (hi - lo) * i as f64 / pieces as f64 }).collect();
    b.extend(extra.into_iter().filter(|v| *v > lo && *v < hi));
    b.sort_by(f64::total_cmp);
    let tol = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
    b.dedup_by(|a, b| (*a - *b).abs() <= tol);
    b
}

/// Flat tensor-product nodes. Returns `(points, weights)` with points stored
/// row-major (`dim` coordinates per node).
pub fn tensor_product(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
    let dim = axes.len();
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut pts = Vec::with_capacity(total * dim);
    let mut wts = Vec::with_capacity(total);
    if total == 0 {
        return (pts, wts);
    }
    let mut idx = vec![0usize; dim];
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            pts.push(axes[k].0[idx[k]]);
            w *= axes[k].1[idx[k]];
        }
        wts.push(w);
        let mut k = dim;
        loop {
            if k == 0 {
                return (pts, wts);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].0.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Gauss-Legendre tensor grid with `n` nodes per axis over `domain`.
pub fn gauss_tensor_grid(domain: &BoxDomain, n: usize) -> (Vec<f64>, Vec<f64>) {
    let axes: Vec<_> = (0..domain.dim()).map(|k| composite_axis(&[domain.lo[k], domain.hi[k]], n)).collect();
    tensor_product(&axes)
}

/// Number of samples per independent RNG stream.
pub const MC_CHUNK: usize = 4096;

/// RNG for chunk `chunk` of a computation seeded with `seed`. Chunked streams
/// keep results identical however the chunks are scheduled.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Monte Carlo estimate of `∫_domain f` with its standard error.
pub fn monte_carlo(domain: &BoxDomain, samples: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let dim = domain.dim();
    let vol = domain.volume();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut x = vec![0.0; dim];
    let chunks = samples.div_ceil(MC_CHUNK);
    for c in 0..chunks {
        let mut rng = chunk_rng(seed, c as u64);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            for k in 0..dim {
                x[k] = rng.random_range(domain.lo[k]..=domain.hi[k]);
            }
            let v = f(&x);
            s += v;
            s2 += v * v;
        }
        sum += s;
        sum_sq += s2;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (vol * mean, vol * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn large_rule_is_accurate() {
        let (x, w) = gauss_legendre(64);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((q - 2.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn breaks_merge_extras() {
        let b = axis_breaks(-0.5, 0.5, 2, [0.25, 0.0, 0.9]);
        assert_eq!(b, vec![-0.5, 0.0, 0.25, 0.5]);
    }

    #[test]
    fn tensor_grid_volume() {
        let d = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let (p, w) = gauss_tensor_grid(&d, 3);
        assert_eq!(p.len(), 18);
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let d = BoxDomain::cube(2, 0.5);
        let a = monte_carlo(&d, 10_000, 3, |x| x[0] * x[0]);
        let b = monte_carlo(&d, 10_000, 3, |x| x[0] * x[0]);
        assert_eq!(a, b);
        assert!((a.0 - 1.0 / 12.0).abs() < 4.0 * a.1);
    }
}
