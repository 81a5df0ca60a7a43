//! The acceptance suite behind `wquant verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    par_map, report_csv, run_nonuniform_trial, run_nterm_sweep, run_tail_experiment, SiteGenerator, SweepConfig,
    SweepRow, TailConfig, BOUND_TOL, MEASURED_TOL,
};
use crate::error::Result;
use crate::lattice::{Lattice, LatticeKind, LatticeSpec};
use crate::measure::{Atom, DiscreteMeasure, Measure, MeasureSpec, QuadratureSpec, ShellMassSpec};
use crate::ot::{metric_check, wasserstein_1d, wasserstein_bruteforce, wasserstein_lp};
use crate::quantize::{
    coupling_cost, evaluate, moment_bound_suite, quantize_lattice, source_nodes, ApproximantMode, VoronoiScheme,
};
use crate::tail::{check_decay_conditions, truncation_error, zeta, TailDecaySpec};

const SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        Self { id, name: name.into(), passed, detail }
    }

    fn failed(id: u8, name: &str, e: &crate::error::Error) -> Self {
        Self::new(id, name, false, format!("error: {e}"))
    }

    /// `criterion 3 PASS  name: detail`
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}  {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
    /// Rows of the sweep criteria (1, 3, 4 and 9), in that order.
    pub rows: Vec<SweepRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

type Produced = (CriterionResult, Vec<SweepRow>);

fn with_rows(id: u8, name: &str, r: Result<Produced>) -> Produced {
    r.unwrap_or_else(|e| (CriterionResult::failed(id, name, &e), Vec::new()))
}

fn plain(id: u8, name: &str, r: Result<CriterionResult>) -> CriterionResult {
    r.unwrap_or_else(|e| CriterionResult::failed(id, name, &e))
}

fn uniform_cube(dim: usize) -> MeasureSpec {
    MeasureSpec::UniformCube { dim, half_width: 0.5, center: None, quadrature: None }
}

/// The four row-producing criteria; `jobs` must not change their rows.
fn sweep_criteria(jobs: usize) -> Vec<Produced> {
    vec![
        with_rows(1, "closed-form 1D quantization", criterion_1(jobs)),
        with_rows(3, "N-term rate on the cube", criterion_3(jobs)),
        with_rows(4, "nonuniform sites", criterion_4(jobs)),
        with_rows(9, "truncation plus quantization", criterion_9(jobs)),
    ]
}

/// Run all ten criteria.
pub fn verify(jobs: usize) -> VerifyReport {
    let jobs = jobs.max(1);
    let mut sweeps = sweep_criteria(jobs).into_iter();
    let mut criteria = Vec::new();
    let mut rows = Vec::new();
    let mut take = |criteria: &mut Vec<CriterionResult>| {
        let (c, r) = sweeps.next().expect("four sweep criteria");
        criteria.push(c);
        rows.extend(r);
    };
    take(&mut criteria);
    criteria.push(plain(2, "Voronoi coupling bound", criterion_2(jobs)));
    take(&mut criteria);
    take(&mut criteria);
    criteria.push(plain(5, "radial moment estimates", criterion_5(jobs)));
    criteria.push(plain(6, "covering number scaling", criterion_6()));
    criteria.push(plain(7, "transport solver", criterion_7(jobs)));
    criteria.push(plain(8, "tail truncation", criterion_8()));
    take(&mut criteria);
    criteria.push(criterion_10(jobs, &rows));
    criteria.sort_by_key(|c| c.id);
    VerifyReport { criteria, rows }
}

/// Reruns the sweep criteria with a different thread count and compares
/// the CSV bytes.
fn criterion_10(jobs: usize, rows: &[SweepRow]) -> CriterionResult {
    let other = if jobs == 1 { 8 } else { 1 };
    let again: Vec<SweepRow> = sweep_criteria(other).into_iter().flat_map(|(_, r)| r).collect();
    let (a, b) = (report_csv(rows), report_csv(&again));
    let same = a == b && !rows.is_empty();
    CriterionResult::new(
        10,
        "determinism across thread counts",
        same,
        format!(
            "report.csv with --jobs {jobs} and --jobs {other}: {} ({} bytes)",
            if same { "identical" } else { "differ" },
            a.len()
        ),
    )
}

pub fn criterion_1(jobs: usize) -> Result<Produced> {
    let measure = uniform_cube(1).build()?;
    let lattice = Lattice::integer(1)?;
    let items: Vec<(f64, i32)> = [1.0, 2.0, 3.0].iter().flat_map(|&p| (1..=8).map(move |k| (p, k))).collect();
    let out = par_map(jobs, &items, |&(p, k)| -> Result<(SweepRow, f64)> {
        let h = 0.5f64.powi(k);
        let a = quantize_lattice(&measure, &lattice, h, ApproximantMode::Dirac)?;
        let nodes = source_nodes(&measure, &a)?;
        let target = a.dirac_measure()?;
        let lp = wasserstein_lp(&nodes, &target, p)?.0;
        let line = wasserstein_1d(&nodes, &target, p)?;
        let coupling = coupling_cost(&measure, &a, p)?;
        let exact = h / (2.0 * (p + 1.0).powf(1.0 / p));
        let err = [lp, line, coupling].iter().map(|v| (v - exact).abs()).fold(0.0, f64::max);
        let mut row = SweepRow::asserted("closed_form", h, lp, coupling, h, a.len(), 0)
            .with("p", p)
            .with("exact", exact)
            .with("line", line);
        row.passed &= err <= 1e-9;
        Ok((row, err))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = out.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let rows: Vec<SweepRow> = out.into_iter().map(|(r, _)| r).collect();
    let passed = rows.iter().all(|r| r.passed);
    let c = CriterionResult::new(
        1,
        "closed-form 1D quantization",
        passed,
        format!("{} cases, max |W_p - h/(2(p+1)^(1/p))| over LP, line and coupling = {worst:.2e}", rows.len()),
    );
    Ok((c, rows))
}

fn quad(dim: usize, seed: u64) -> Option<QuadratureSpec> {
    Some(if dim <= 2 { QuadratureSpec::tensor_grid(16) } else { QuadratureSpec::monte_carlo(4000, seed) })
}

fn random_center(rng: &mut ChaCha8Rng, dim: usize, spread: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-spread..spread)).collect()
}

/// Measure of kind `kind % 4` (uniform cube, Gaussian, 50 atoms, circle
/// arc); arcs fall back to atoms off the plane.
fn random_measure(kind: usize, dim: usize, rng: &mut ChaCha8Rng) -> MeasureSpec {
    let seed = rng.random();
    match kind % 4 {
        0 => MeasureSpec::UniformCube {
            dim,
            half_width: rng.random_range(0.2..1.0),
            center: Some(random_center(rng, dim, 0.5)),
            quadrature: quad(dim, seed),
        },
        1 => MeasureSpec::Gaussian {
            dim,
            mean: Some(random_center(rng, dim, 0.5)),
            sigma: rng.random_range(0.1..0.4),
            truncation: 4.0,
            quadrature: quad(dim, seed),
        },
        3 if dim == 2 => {
            let start = rng.random_range(0.0..PI);
            MeasureSpec::CircleArc {
                dim,
                radius: rng.random_range(0.2..1.0),
                center: Some(random_center(rng, 2, 0.3)),
                start,
                end: start + rng.random_range(0.5..2.0 * PI - 0.5),
                atoms: 256,
            }
        }
        _ => MeasureSpec::Atoms {
            dim,
            atoms: (0..50).map(|_| Atom::new(random_center(rng, dim, 1.0), rng.random_range(0.1..1.0))).collect(),
        },
    }
}

fn lattice_spec(i: usize) -> LatticeSpec {
    let (kind, dim) = [
        (LatticeKind::IntegerZd, 1),
        (LatticeKind::IntegerZd, 2),
        (LatticeKind::IntegerZd, 3),
        (LatticeKind::HexagonalA2, 2),
    ][i % 4];
    LatticeSpec { kind, dim, basis: None }
}

/// Normalizes the weights of atom specs, which are given unnormalized.
fn build(spec: &MeasureSpec) -> Result<Measure> {
    if let MeasureSpec::Atoms { dim, atoms } = spec {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        return Ok(DiscreteMeasure::new(
            *dim,
            atoms.iter().map(|a| Atom::new(a.location.clone(), a.weight / total)).collect(),
        )?
        .into());
    }
    spec.build()
}

pub fn criterion_2(jobs: usize) -> Result<CriterionResult> {
    let idx: Vec<usize> = (0..30).collect();
    let out = par_map(jobs, &idx, |&i| -> Result<(bool, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 200 + i as u64);
        let ls = lattice_spec(i);
        let spec = random_measure(i / 4, ls.dim, &mut rng);
        let h = [0.5, 0.25, 0.125][rng.random_range(0..3)];
        let p = [1.0, 2.0][rng.random_range(0..2)];
        let mode = if rng.random_bool(0.5) { ApproximantMode::Dirac } else { ApproximantMode::Indicator };
        let measure = build(&spec)?;
        let lattice = Lattice::from_spec(&ls)?;
        let diam = lattice.voronoi_geometry()?.diameter;
        let a = quantize_lattice(&measure, &lattice, h, mode)?;
        let ev = evaluate(&measure, &a, p)?;
        Ok((ev.measured <= ev.coupling + MEASURED_TOL && ev.coupling <= diam * h + BOUND_TOL, ev.exact()))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let violations = out.iter().filter(|o| !o.0).count();
    let exact = out.iter().filter(|o| o.1).count();
    Ok(CriterionResult::new(
        2,
        "Voronoi coupling bound",
        violations == 0,
        format!("{} configurations, {violations} violations, {exact} with exact W_p", out.len()),
    ))
}

pub fn criterion_3(jobs: usize) -> Result<Produced> {
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    let mut passed = true;
    for (d, ns) in [(1usize, vec![4, 16, 64, 256, 1024]), (2, vec![4, 16, 64, 256, 1024]), (3, vec![8, 64, 512, 4096])]
    {
        let mut cfg = SweepConfig::new(uniform_cube(d));
        cfg.n_values = ns;
        cfg.p = 2.0;
        let r = run_nterm_sweep(&cfg, jobs)?;
        passed &= r.passed();
        let slope = r.slope.map_or(f64::NAN, |s| s.slope);
        parts.push(format!("d={d} slope {slope:.3}"));
        rows.extend(r.rows);
    }
    Ok((
        CriterionResult::new(
            3,
            "N-term rate on the cube",
            passed,
            format!("{} rows, {}", rows.len(), parts.join(", ")),
        ),
        rows,
    ))
}

pub fn criterion_4(jobs: usize) -> Result<Produced> {
    let mut rows = Vec::new();
    let mut passed = true;
    let mut worst: f64 = 0.0;
    for gen in [SiteGenerator::JitteredGrid { jitter: 0.25 }, SiteGenerator::RandomUniform] {
        let mut cfg = SweepConfig::new(uniform_cube(2));
        cfg.sites = Some(gen);
        cfg.n_values = vec![64, 256];
        cfg.trials = 10;
        cfg.seed = SEED;
        let r = run_nonuniform_trial(&cfg, jobs)?;
        passed &= r.passed() && r.rows.len() == 20;
        worst = r.rows.iter().filter_map(|x| x.theoretical_bound.map(|t| x.measured_wp / t)).fold(worst, f64::max);
        rows.extend(r.rows);
    }
    Ok((
        CriterionResult::new(
            4,
            "nonuniform sites",
            passed,
            format!("{} trials, max W_p / (2 h_X) = {worst:.3}", rows.len()),
        ),
        rows,
    ))
}

pub fn criterion_5(jobs: usize) -> Result<CriterionResult> {
    let idx: Vec<usize> = (0..100).collect();
    let out = par_map(jobs, &idx, |&i| -> Result<(usize, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 500 + i as u64);
        let ls = lattice_spec(i);
        let spec = random_measure(i / 4, ls.dim, &mut rng);
        let measure = build(&spec)?;
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let scheme = if i < 50 {
            VoronoiScheme::lattice(Lattice::from_spec(&ls)?, [1.0, 0.5, 0.25, 0.125][rng.random_range(0..4)])?
        } else {
            let b = measure.support_box();
            let n = rng.random_range(2..30);
            VoronoiScheme::sites(
                (0..n).map(|_| (0..ls.dim).map(|k| rng.random_range(b.lo[k] - 0.1..b.hi[k] + 0.1)).collect()).collect(),
            )?
        };
        let reports = moment_bound_suite(&measure, &scheme, p)?;
        Ok((reports.len(), reports.iter().filter(|r| !r.holds()).count()))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let checked: usize = out.iter().map(|o| o.0).sum();
    let failed: usize = out.iter().map(|o| o.1).sum();
    Ok(CriterionResult::new(
        5,
        "radial moment estimates",
        failed == 0 && checked == 300,
        format!("50 lattice and 50 site configurations, {checked} inequalities, {failed} violated"),
    ))
}

pub fn criterion_6() -> Result<CriterionResult> {
    let mut checked = 0;
    let mut failures = Vec::new();
    for lattice in [Lattice::integer(2)?, Lattice::hexagonal()?] {
        for r in [1.0, 2.0] {
            let base = lattice.covering_count(1.0, r)? as f64;
            for h in [0.5, 0.25] {
                let c = lattice.covering_count(h, r)? as f64;
                let bound = 9.0 * h.powi(-2) * base;
                checked += 1;
                if c > bound {
                    failures.push(format!("{:?} R={r} h={h}: {c} > {bound}", lattice.kind()));
                }
            }
        }
    }
    Ok(CriterionResult::new(
        6,
        "covering number scaling",
        failures.is_empty(),
        if failures.is_empty() { format!("{checked} cases") } else { failures.join("; ") },
    ))
}

fn random_discrete(rng: &mut ChaCha8Rng, dim: usize, n: usize, uniform: bool) -> Result<DiscreteMeasure> {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| random_center(rng, dim, 1.0)).collect();
    if uniform {
        DiscreteMeasure::uniform(dim, pts)
    } else {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        DiscreteMeasure::from_weighted(dim, pts, &w)
    }
}

pub fn criterion_7(jobs: usize) -> Result<CriterionResult> {
    let idx: Vec<u64> = (0..100).collect();
    let brute = par_map(jobs, &idx, |&i| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 700 + i);
        let (d, n) = (rng.random_range(1..=3), rng.random_range(1..=5));
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let mu = random_discrete(&mut rng, d, n, true)?;
        let nu = random_discrete(&mut rng, d, n, true)?;
        Ok((wasserstein_lp(&mu, &nu, p)?.0 - wasserstein_bruteforce(&mu, &nu, p)?).abs())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let line = par_map(jobs, &idx, |&i| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 800 + i);
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let (m, n) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let mu = random_discrete(&mut rng, 1, m, false)?;
        let nu = random_discrete(&mut rng, 1, n, false)?;
        Ok((wasserstein_lp(&mu, &nu, p)?.0 - wasserstein_1d(&mu, &nu, p)?).abs())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tri: Vec<u64> = (0..20).collect();
    let metric = par_map(jobs, &tri, |&i| -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 900 + i);
        let p = [1.0, 2.0][rng.random_range(0..2)];
        let ms = (0..3)
            .map(|_| {
                let n = rng.random_range(1..=6);
                random_discrete(&mut rng, 2, n, false)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(metric_check(&ms, p, i)?.passed())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let bmax = brute.iter().copied().fold(0.0, f64::max);
    let lmax = line.iter().copied().fold(0.0, f64::max);
    let mfail = metric.iter().filter(|b| !**b).count();
    Ok(CriterionResult::new(
        7,
        "transport solver",
        bmax <= 1e-12 && lmax <= 1e-9 && mfail == 0,
        format!(
            "brute force max diff {bmax:.1e} (100), line max diff {lmax:.1e} (100), metric triples failed {mfail}/20"
        ),
    ))
}

pub fn criterion_8() -> Result<CriterionResult> {
    let mut fails = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        let one: Measure = DiscreteMeasure::dirac(vec![0.0, 3.0]).into();
        let e = truncation_error(&one, 1.0, p)?;
        if (e - 2.0).abs() > 1e-12 {
            fails.push(format!("single atom p={p}: {e}"));
        }
    }
    let two: Measure = DiscreteMeasure::from_weighted(2, vec![vec![3.0, 0.0], vec![0.0, -2.0]], &[0.5, 0.5])?.into();
    let e = truncation_error(&two, 1.0, 2.0)?;
    if (e - 2.5f64.sqrt()).abs() > 1e-12 {
        fails.push(format!("two atoms: {e}"));
    }

    // atoms placed at the largest weight condition (3) allows
    let mut saturated = 0;
    for p in [1.0, 2.0] {
        for q in [2.0, 3.0] {
            let (eps, r0): (f64, f64) = (0.1, 1.0);
            let target = eps.powf(p) / 3.0 / zeta(q);
            let mut atoms: Vec<Atom> = (1..=12)
                .map(|k| {
                    let r = r0 + 0.4 * k as f64;
                    let t = 0.7 * k as f64;
                    let w = target * (k as f64).powf(-q) * (r - r0).powf(-p);
                    Atom::new(vec![r * t.cos(), r * t.sin()], w)
                })
                .collect();
            let rest = 1.0 - atoms.iter().map(|a| a.weight).sum::<f64>();
            atoms.push(Atom::new(vec![0.0, 0.0], rest));
            let spec = TailDecaySpec::new(eps, p, r0, q)?;
            let rep = check_decay_conditions(None, &ShellMassSpec::default(), &atoms, &spec)?;
            let m: Measure = DiscreteMeasure::new(2, atoms)?.into();
            let tau = truncation_error(&m, r0, p)?;
            if !(rep.all_pass() && rep.total_bound <= eps + 1e-9 && (rep.total_bound - tau).abs() <= 1e-12) {
                fails.push(format!("saturated p={p} q={q}: bound {} vs tau {tau}", rep.total_bound));
            }
            saturated += 1;
        }
    }

    let g = MeasureSpec::Gaussian {
        dim: 2,
        mean: None,
        sigma: 0.5,
        truncation: 6.0,
        quadrature: Some(QuadratureSpec::tensor_grid(32)),
    }
    .build()?;
    let atoms: Measure = DiscreteMeasure::from_weighted(2, vec![vec![2.5, 0.0], vec![-1.0, 1.5]], &[0.5, 0.5])?.into();
    let mix = Measure::mixture(vec![(0.8, g), (0.2, atoms)])?;
    let radii: Vec<f64> = (1..=10).map(|i| 0.25 * i as f64).collect();
    let errs = radii.iter().map(|&r| truncation_error(&mix, r, 2.0)).collect::<Result<Vec<_>>>()?;
    if errs.windows(2).any(|w| w[1] > w[0]) {
        fails.push(format!("not monotone in R: {errs:?}"));
    }
    Ok(CriterionResult::new(
        8,
        "tail truncation",
        fails.is_empty(),
        if fails.is_empty() {
            format!("exact projection errors, {saturated} saturated atom tails within epsilon, monotone over 10 radii")
        } else {
            fails.join("; ")
        },
    ))
}

pub fn criterion_9_config() -> SweepConfig {
    let mut cfg = SweepConfig::new(MeasureSpec::Gaussian {
        dim: 2,
        mean: None,
        sigma: 0.25,
        truncation: 8.0,
        quadrature: Some(QuadratureSpec::tensor_grid(32)),
    });
    cfg.h_values = vec![0.5, 0.25, 0.125];
    cfg.p = 2.0;
    cfg.tail = Some(TailConfig { radius: 0.75, epsilon: Some(0.1), q: 2.0 });
    cfg
}

pub fn criterion_9(jobs: usize) -> Result<Produced> {
    let r = run_tail_experiment(&criterion_9_config(), jobs)?;
    let exact = r.rows.iter().filter(|x| x.method.is_some_and(|m| m != crate::quantize::WpMethod::BoundOnly)).count();
    let passed = r.passed() && r.rows.len() == 3;
    let tau = r.rows.first().and_then(|x| x.extra.get("truncation_error").copied()).unwrap_or(f64::NAN);
    let c = CriterionResult::new(
        9,
        "truncation plus quantization",
        passed,
        format!("{} rows ({exact} exact), truncation error {tau:.4e}", r.rows.len()),
    );
    Ok((c, r.rows))
}
