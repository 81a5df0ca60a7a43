use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{par_map, Check, SweepConfig, SweepReport, SweepRow};
use crate::error::{invalid, Result};
use crate::lattice::Lattice;
use crate::measure::{Atom, DiscreteMeasure, Measure, QuadratureSpec};
use crate::ot::wasserstein;
use crate::quantize::{evaluate, quantize_lattice, quantize_nonuniform, LP_ARC_BUDGET};
use crate::spatial::KdTree;

/// Discrete stand-in for `measure` with `nodes` Gauss-Legendre nodes per
/// axis (Monte Carlo with `nodes^2` samples above two dimensions).
fn reference(measure: &Measure, nodes: usize) -> Result<DiscreteMeasure> {
    match measure {
        Measure::Discrete(m) => Ok(m.clone()),
        Measure::Density(m) => {
            let q = if m.dim() <= 2 {
                QuadratureSpec::tensor_grid(nodes)
            } else {
                QuadratureSpec::monte_carlo(nodes * nodes, 0)
            };
            m.clone().with_quadrature(q)?.surrogate()
        }
        Measure::Mixture(mix) => {
            let mut atoms = Vec::new();
            for (w, c) in mix.components() {
                atoms.extend(reference(c, nodes)?.atoms().iter().map(|a| Atom::new(a.location.clone(), w * a.weight)));
            }
            DiscreteMeasure::new(measure.dim(), atoms)
        }
    }
}

/// Lloyd's algorithm on `samples` draws from `measure`, started from `n`
/// distinct draws. Empty clusters keep their center.
pub fn lloyd(measure: &Measure, n: usize, samples: usize, iterations: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || samples < n {
        return Err(invalid("lloyd needs 0 < N <= samples"));
    }
    let pts = measure.sample(samples, seed)?;
    let d = measure.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in index::sample(&mut rng, pts.len(), pts.len()) {
        if centers.len() == n {
            break;
        }
        if !centers.contains(&pts[i]) {
            centers.push(pts[i].clone());
        }
    }
    if centers.len() < n {
        return Err(invalid(format!("samples have fewer than {n} distinct points")));
    }
    for _ in 0..iterations {
        let tree = KdTree::new(&centers);
        let mut sums = vec![vec![0.0; d]; n];
        let mut counts = vec![0usize; n];
        for x in &pts {
            let (i, _) = tree.nearest(x);
            counts[i] += 1;
            for (s, v) in sums[i].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut moved = false;
        for i in 0..n {
            if counts[i] > 0 {
                let c: Vec<f64> = sums[i].iter().map(|s| s / counts[i] as f64).collect();
                moved |= c != centers[i];
                centers[i] = c;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(centers)
}

fn baseline_rows(
    measure: &Measure,
    refm: &DiscreteMeasure,
    n: usize,
    cfg: &SweepConfig,
    notes: &mut Vec<String>,
) -> Result<Vec<SweepRow>> {
    let d = measure.dim();
    let bc = &cfg.baselines;
    let mut rows = Vec::new();

    let k = (n as f64).powf(1.0 / d as f64).round() as usize;
    if k.checked_pow(d as u32) == Some(n) {
        let a = quantize_lattice(measure, &Lattice::integer(d)?, 1.0 / k as f64, cfg.mode)?;
        let ev = evaluate(measure, &a, cfg.p)?;
        rows.push(
            SweepRow::informational("lattice", n as f64, ev.measured, ev.coupling, a.len(), cfg.seed)
                .with_method(ev.method),
        );
    } else {
        notes.push(format!("lattice baseline skipped at N = {n}: not a perfect {d}-th power"));
    }

    let centers = lloyd(measure, n, bc.lloyd_samples, bc.lloyd_iterations, cfg.seed)?;
    let a = quantize_nonuniform(measure, &centers, cfg.mode)?;
    let ev = evaluate(measure, &a, cfg.p)?;
    rows.push(
        SweepRow::informational("lloyd", n as f64, ev.measured, ev.coupling, a.len(), cfg.seed).with_method(ev.method),
    );

    if d > 1 && refm.len() * n > LP_ARC_BUDGET {
        notes.push(format!("empirical baseline skipped at N = {n}: transport problem too large"));
    } else if bc.empirical_seeds > 0 {
        let dists = (0..bc.empirical_seeds as u64)
            .map(|s| {
                let emp = DiscreteMeasure::uniform(d, measure.sample(n, cfg.seed.wrapping_add(s))?)?;
                wasserstein(refm, &emp, cfg.p)
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = dists.len() as f64;
        let mean = dists.iter().sum::<f64>() / m;
        let sd = (dists.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
        rows.push(
            SweepRow::informational("empirical", n as f64, mean, mean, n, cfg.seed).with("std", sd).with("seeds", m),
        );
    }
    Ok(rows)
}

/// Lattice, Lloyd and empirical approximants at each budget `N`. Nothing is
/// asserted except that lattice and Lloyd agree within 10% at `N = 1`.
pub fn run_baselines(cfg: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.n_values.is_empty() {
        return Err(invalid("baselines needs n_values"));
    }
    let measure = cfg.build_measure()?;
    let refm = reference(&measure, cfg.baselines.reference_nodes)?;
    let results = par_map(jobs, &cfg.n_values, |&n| {
        let mut notes = Vec::new();
        (n, baseline_rows(&measure, &refm, n, cfg, &mut notes), notes)
    })?;
    let mut report = SweepReport::new("baselines", cfg.p);
    for (n, r, notes) in results {
        report.notes.extend(notes);
        match r {
            Ok(rows) => report.rows.extend(rows),
            Err(e) => report.point_failed(format!("N = {n}"), &e),
        }
    }
    let at_one =
        |label: &str| report.rows.iter().find(|r| r.label == label && r.parameter == 1.0).map(|r| r.measured_wp);
    if let (Some(a), Some(b)) = (at_one("lattice"), at_one("lloyd")) {
        let ok = (a - b).abs() <= 0.1 * a.max(b);
        report.checks.push(Check::new("lattice vs lloyd at N = 1", ok, format!("lattice {a}, lloyd {b}")));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDomain;
    use crate::measure::DensityMeasure;

    #[test]
    fn lloyd_single_center_is_the_mean() {
        let m: Measure = DensityMeasure::uniform_box(BoxDomain::cube(2, 0.5)).into();
        let c = lloyd(&m, 1, 20_000, 5, 3).unwrap();
        assert!(c[0].iter().all(|v| v.abs() < 0.01));
    }

    #[test]
    fn lloyd_on_two_clusters() {
        let m: Measure = DiscreteMeasure::uniform(1, vec![vec![-1.0], vec![1.0]]).unwrap().into();
        let mut c = lloyd(&m, 2, 200, 10, 1).unwrap();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, vec![vec![-1.0], vec![1.0]]);
    }
}
