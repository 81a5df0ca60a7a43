use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_map, SiteGenerator, SweepConfig, SweepReport, SweepRow};
use crate::error::{invalid, Result};
use crate::geometry::BoxDomain;
use crate::lattice::{Lattice, LatticeKind};
use crate::measure::{DiscreteMeasure, Measure};
use crate::ot::{wasserstein_1d, wasserstein_lp};
use crate::quantize::{
    coupling_cost, evaluate, mesh_norm_box, quantize, quantize_lattice, quantize_nonuniform, separation_radius,
    VoronoiScheme, WpMethod, LP_ARC_BUDGET,
};
use crate::tail::{project_to_ball, tail_report, truncation_error, TailDecaySpec};

/// Records the coupling cost at doubled quadrature resolution as an
/// estimate of the discretization error.
fn with_refined(
    row: SweepRow,
    refined: Option<&Measure>,
    scheme: &VoronoiScheme,
    cfg: &SweepConfig,
) -> Result<SweepRow> {
    let Some(m) = refined else { return Ok(row) };
    let a = quantize(m, scheme, cfg.mode)?;
    Ok(row.with("refined_coupling", coupling_cost(m, &a, cfg.p)?))
}

fn lattice_row(
    measure: &Measure,
    refined: Option<&Measure>,
    lattice: &Lattice,
    diam: f64,
    h: f64,
    cfg: &SweepConfig,
) -> Result<SweepRow> {
    let a = quantize_lattice(measure, lattice, h, cfg.mode)?;
    let ev = evaluate(measure, &a, cfg.p)?;
    let row =
        SweepRow::asserted("lattice", h, ev.measured, ev.coupling, diam * h, a.len(), cfg.seed).with_method(ev.method);
    with_refined(row, refined, &a.scheme, cfg)
}

fn push_rows(report: &mut SweepReport, results: Vec<(String, Result<SweepRow>)>) {
    for (what, r) in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => report.point_failed(what, &e),
        }
    }
}

/// Sweep over `h` for a fixed lattice; the theoretical bound is `diam(V_0) h`.
pub fn run_h_sweep(cfg: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.h_values.is_empty() {
        return Err(invalid("sweep-h needs h_values"));
    }
    let measure = cfg.build_measure()?;
    let lattice = cfg.build_lattice()?;
    let diam = lattice.voronoi_geometry()?.diameter;
    let refined = cfg.build_refined()?;
    let results = par_map(jobs, &cfg.h_values, |&h| {
        (format!("h = {h}"), lattice_row(&measure, refined.as_ref(), &lattice, diam, h, cfg))
    })?;
    let mut report = SweepReport::new("sweep-h", cfg.p);
    push_rows(&mut report, results);
    report.fit("lattice", 1.0, cfg.slope_window);
    Ok(report)
}

fn cube_root(n: usize, d: usize) -> Option<usize> {
    let k = (n as f64).powf(1.0 / d as f64).round() as usize;
    (k.checked_pow(d as u32) == Some(n)).then_some(k)
}

/// Sweep over the term budget `N` on `Z^d` with `h = N^{-1/d}`, against
/// `sqrt(d) N^{-1/d}`. The measure must live in `[-1/2, 1/2]^d`.
pub fn run_nterm_sweep(cfg: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.n_values.is_empty() {
        return Err(invalid("sweep-n needs n_values"));
    }
    let measure = cfg.build_measure()?;
    let d = measure.dim();
    if cfg.lattice.as_ref().is_some_and(|l| l.kind != LatticeKind::IntegerZd) {
        return Err(invalid("sweep-n uses the integer lattice"));
    }
    let support = measure.support_box();
    let margin = (0..d).map(|i| (support.lo[i] + 0.5).min(0.5 - support.hi[i])).fold(f64::INFINITY, f64::min);
    if margin < -1e-12 {
        return Err(invalid("sweep-n needs the measure supported in [-1/2, 1/2]^d"));
    }
    let ks = cfg
        .n_values
        .iter()
        .map(|&n| cube_root(n, d).ok_or_else(|| invalid(format!("N = {n} is not a perfect {d}-th power"))))
        .collect::<Result<Vec<_>>>()?;
    let lattice = Lattice::integer(d)?;
    let refined = cfg.build_refined()?;
    let root_d = (d as f64).sqrt();
    let items: Vec<(usize, usize)> = cfg.n_values.iter().copied().zip(ks).collect();
    let results = par_map(jobs, &items, |&(n, k)| {
        let h = 1.0 / k as f64;
        let row = (|| {
            let a = quantize_lattice(&measure, &lattice, h, cfg.mode)?;
            let ev = evaluate(&measure, &a, cfg.p)?;
            let mut row =
                SweepRow::asserted("lattice", n as f64, ev.measured, ev.coupling, root_d * h, a.len(), cfg.seed)
                    .with_method(ev.method)
                    .with("h", h);
            // cells straddling the cube boundary add terms unless the support
            // keeps half a cell away from it
            if margin >= 0.5 * h - 1e-12 {
                row.passed &= a.len() <= n;
                row = row.with("terms_asserted", 1.0);
            } else {
                row = row.with("terms_asserted", 0.0);
            }
            with_refined(row, refined.as_ref(), &a.scheme, cfg)
        })();
        (format!("N = {n}"), row)
    })?;
    let mut report = SweepReport::new("sweep-n", cfg.p);
    push_rows(&mut report, results);
    let target = -1.0 / d as f64;
    let window = cfg.slope_window.or(match measure {
        Measure::Density(_) => Some([1.1 * target, 0.9 * target]),
        _ => None,
    });
    report.fit("lattice", target, window);
    Ok(report)
}

fn grid_axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let a = (lo / h - 1e-9).ceil() as i64;
    let b = (hi / h + 1e-9).floor() as i64;
    (a..=b).map(|j| j as f64 * h).collect()
}

/// Sites for one nonuniform trial. Grids use spacing `N^{-1/d}` clipped to
/// `support`; random sites are uniform in `support`.
pub fn generate_sites(gen: &SiteGenerator, support: &BoxDomain, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = support.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match gen {
        SiteGenerator::JitteredGrid { jitter } => {
            if !(*jitter >= 0.0 && *jitter < 0.5) {
                return Err(invalid("jitter must lie in [0, 1/2)"));
            }
            let k = cube_root(n, d).ok_or_else(|| invalid(format!("N = {n} is not a perfect {d}-th power")))?;
            let h = 1.0 / k as f64;
            let axes: Vec<Vec<f64>> = (0..d).map(|i| grid_axis(support.lo[i], support.hi[i], h)).collect();
            if axes.iter().any(|a| a.is_empty()) {
                return Err(invalid("support box contains no grid point"));
            }
            let mut sites = vec![Vec::new()];
            for axis in &axes {
                sites =
                    sites.into_iter().flat_map(|s| axis.iter().map(move |&c| [s.clone(), vec![c]].concat())).collect();
            }
            if *jitter > 0.0 {
                for s in &mut sites {
                    for c in s.iter_mut() {
                        *c += jitter * h * rng.random_range(-1.0..1.0);
                    }
                }
            }
            Ok(sites)
        }
        SiteGenerator::RandomUniform => {
            Ok((0..n).map(|_| (0..d).map(|i| rng.random_range(support.lo[i]..=support.hi[i])).collect()).collect())
        }
        SiteGenerator::Explicit { sites } => {
            if sites.iter().any(|s| s.len() != d) {
                return Err(invalid("explicit sites have the wrong dimension"));
            }
            Ok(sites.clone())
        }
    }
}

fn nonuniform_row(
    measure: &Measure,
    refined: Option<&Measure>,
    gen: &SiteGenerator,
    n: usize,
    seed: u64,
    cfg: &SweepConfig,
) -> Result<SweepRow> {
    let support = measure.support_box();
    let d = support.dim();
    // coincident sites (probability zero) are redrawn with the next seed
    let mut used = seed;
    let (sites, q) = loop {
        let s = generate_sites(gen, &support, n, used)?;
        match separation_radius(&s) {
            Ok(q) => break (s, Some(q)),
            Err(_) if s.len() < 2 => break (s, None),
            Err(e) if matches!(gen, SiteGenerator::Explicit { .. }) || used - seed >= 16 => return Err(e),
            Err(_) => used += 1,
        }
    };
    let h_x = mesh_norm_box(&sites, &support)?;
    let a = quantize_nonuniform(measure, &sites, cfg.mode)?;
    let ev = evaluate(measure, &a, cfg.p)?;
    let mut row = SweepRow::asserted("sites", n as f64, ev.measured, ev.coupling, 2.0 * h_x, a.len(), used)
        .with_method(ev.method)
        .with("h_x", h_x)
        .with("sites", sites.len() as f64);
    if let Some(q) = q {
        row = row.with("q_x", q).with("mesh_ratio", h_x / q);
    }
    if matches!(gen, SiteGenerator::JitteredGrid { .. }) {
        row = row.with("C", h_x * (n as f64).powf(1.0 / d as f64));
    }
    with_refined(row, refined, &a.scheme, cfg)
}

/// `trials` seeded site sets per budget `N`; the bound is `2 h_X` with the
/// mesh norm taken over the support box.
pub fn run_nonuniform_trial(cfg: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let gen = cfg.sites.as_ref().ok_or_else(|| invalid("nonuniform needs a sites generator"))?;
    let measure = cfg.build_measure()?;
    let refined = cfg.build_refined()?;
    let ns: Vec<usize> = match gen {
        SiteGenerator::Explicit { sites } => vec![sites.len()],
        _ if cfg.n_values.is_empty() => return Err(invalid("nonuniform needs n_values")),
        _ => cfg.n_values.clone(),
    };
    let trials = if matches!(gen, SiteGenerator::Explicit { .. }) { 1 } else { cfg.trials.max(1) };
    let items: Vec<(usize, u64)> = ns.iter().flat_map(|&n| (0..trials as u64).map(move |t| (n, t))).collect();
    let results = par_map(jobs, &items, |&(n, t)| {
        let seed = cfg.seed.wrapping_add(t).wrapping_add(1_000_003 * n as u64);
        (format!("N = {n}, trial {t}"), nonuniform_row(&measure, refined.as_ref(), gen, n, seed, cfg))
    })?;
    let mut report = SweepReport::new("nonuniform", cfg.p);
    push_rows(&mut report, results);
    if ns.len() >= 3 {
        report.fit("sites", -1.0 / measure.dim() as f64, cfg.slope_window);
    }
    Ok(report)
}

fn discrete_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Option<(f64, WpMethod)>> {
    if mu.dim() == 1 {
        return Ok(Some((wasserstein_1d(mu, nu, p)?, WpMethod::Line)));
    }
    if mu.len() * nu.len() <= LP_ARC_BUDGET {
        return Ok(Some((wasserstein_lp(mu, nu, p)?.0, WpMethod::Lp)));
    }
    Ok(None)
}

/// Quantize the projection of `μ` onto `B_R` and compare with `μ`. The bound
/// is `diam(V_0) h + τ` with `τ = W_p(μ, proj_R μ)`; `rad(V_0) h + τ` is
/// reported alongside.
pub fn run_tail_experiment(cfg: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let tc = cfg.tail.as_ref().ok_or_else(|| invalid("tail needs a tail section with R"))?;
    if !(tc.radius > 0.0) {
        return Err(invalid("R must be positive"));
    }
    let measure = cfg.build_measure()?;
    let decay = match tc.epsilon {
        Some(eps) => Some(tail_report(&measure, &TailDecaySpec::new(eps, cfg.p, tc.radius, tc.q)?)?),
        None => None,
    };
    if measure.support_radius() <= tc.radius {
        let mut report = run_h_sweep(cfg, jobs)?;
        report.kind = "tail".into();
        report.notes.push(format!("support lies in the ball of radius {}; no truncation", tc.radius));
        report.tail = decay;
        return Ok(report);
    }
    if cfg.h_values.is_empty() {
        return Err(invalid("tail needs h_values"));
    }
    let lattice = cfg.build_lattice()?;
    let geo = lattice.voronoi_geometry()?;
    let source = measure.discretize()?;
    let disc = Measure::Discrete(source.clone());
    let tau = truncation_error(&disc, tc.radius, cfg.p)?;
    let projected = project_to_ball(&disc, tc.radius)?;
    let results = par_map(jobs, &cfg.h_values, |&h| {
        let row = (|| -> Result<SweepRow> {
            let a = quantize_lattice(&projected, &lattice, h, cfg.mode)?;
            let coupling = tau + coupling_cost(&projected, &a, cfg.p)?;
            let target = a.realization()?;
            let (measured, method) = discrete_wp(&source, &target, cfg.p)?.unwrap_or((coupling, WpMethod::BoundOnly));
            let rad_bound = geo.covering_radius * h + tau;
            Ok(SweepRow::asserted("tail", h, measured, coupling, geo.diameter * h + tau, a.len(), cfg.seed)
                .with_method(method)
                .with("truncation_error", tau)
                .with("rad_bound", rad_bound)
                .with("rad_bound_holds", f64::from(u8::from(measured <= rad_bound + super::MEASURED_TOL))))
        })();
        (format!("h = {h}"), row)
    })?;
    let mut report = SweepReport::new("tail", cfg.p);
    push_rows(&mut report, results);
    report.notes.push(format!("truncation error {tau} at R = {}", tc.radius));
    if let Ok(t) = truncation_error(&measure, tc.radius, cfg.p) {
        report.notes.push(format!("truncation error of the measure itself {t}"));
    }
    if let Some(r) = &decay {
        report.notes.push(format!("decay conditions {:?}, total bound {}", r.conditions_pass, r.total_bound));
    }
    report.tail = decay;
    report.fit("tail", 1.0, cfg.slope_window);
    Ok(report)
}
