//! Experiment driver: parameter sweeps, baselines, slope fits and reports.

mod baselines;
mod output;
mod sweeps;
pub mod verify;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use baselines::{lloyd, run_baselines};
pub use output::{plot_svg, report_csv, report_series, write_report, Series, CSV_HEADER};
pub use sweeps::{generate_sites, run_h_sweep, run_nonuniform_trial, run_nterm_sweep, run_tail_experiment};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Lattice, LatticeSpec};
use crate::measure::{Measure, MeasureSpec, MixtureComponentSpec, QuadratureSpec};
use crate::quantize::{ApproximantMode, WpMethod};
use crate::tail::TruncationReport;

/// Slack allowed between a measured distance and its coupling bound.
pub const MEASURED_TOL: f64 = 1e-8;
/// Slack allowed between a coupling bound and the theoretical bound.
pub const BOUND_TOL: f64 = 1e-9;

/// How sites are produced for nonuniform trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SiteGenerator {
    /// Grid `N^{-1/d} Z^d` inside the support box, each coordinate moved by
    /// up to `jitter` grid spacings.
    JitteredGrid {
        jitter: f64,
    },
    /// `N` independent uniform points in the support box.
    RandomUniform,
    Explicit {
        sites: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    /// Target of the decay conditions; the decay report is skipped without it.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub empirical_seeds: usize,
    pub lloyd_samples: usize,
    pub lloyd_iterations: usize,
    /// Gauss-Legendre nodes per axis of the reference measure used for the
    /// empirical and Lloyd distances.
    pub reference_nodes: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { empirical_seeds: 20, lloyd_samples: 100_000, lloyd_iterations: 50, reference_nodes: 32 }
    }
}

/// Experiment configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub measure: MeasureSpec,
    /// Defaults to `Z^d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<SiteGenerator>,
    #[serde(default = "default_mode")]
    pub mode: ApproximantMode,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Strictly decreasing scales in `(0, 1]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_values: Vec<f64>,
    /// Strictly increasing term budgets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Seeds per budget in nonuniform trials.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailConfig>,
    #[serde(default)]
    pub baselines: BaselineConfig,
    /// Asserted window for the fitted log-log slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_mode() -> ApproximantMode {
    ApproximantMode::Dirac
}

fn default_p() -> f64 {
    2.0
}

fn default_trials() -> usize {
    10
}

impl SweepConfig {
    pub fn new(measure: MeasureSpec) -> Self {
        Self {
            measure,
            lattice: None,
            sites: None,
            mode: ApproximantMode::Dirac,
            p: 2.0,
            h_values: Vec::new(),
            n_values: Vec::new(),
            seed: 0,
            trials: 10,
            tail: None,
            baselines: BaselineConfig::default(),
            slope_window: None,
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid("p must be >= 1"));
        }
        if self.h_values.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
            return Err(invalid("h values must lie in (0, 1]"));
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("h values must be strictly decreasing"));
        }
        if self.n_values.iter().any(|&n| n == 0) || self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("N values must be positive and strictly increasing"));
        }
        if let Some(l) = &self.lattice {
            if l.dim != self.measure.dim() {
                return Err(invalid("lattice and measure dimensions differ"));
            }
        }
        Ok(())
    }

    pub fn build_measure(&self) -> Result<Measure> {
        self.measure.build()
    }

    /// The measure at doubled quadrature resolution, when it has any.
    pub fn build_refined(&self) -> Result<Option<Measure>> {
        refined_spec(&self.measure).map(|s| s.build()).transpose()
    }

    pub fn build_lattice(&self) -> Result<Lattice> {
        match &self.lattice {
            Some(spec) => Lattice::from_spec(spec),
            None => Lattice::integer(self.measure.dim()),
        }
    }
}

/// `spec` with every quadrature rule at twice its resolution, or `None`
/// when no part of it is integrated by quadrature.
pub fn refined_spec(spec: &MeasureSpec) -> Option<MeasureSpec> {
    let double = |q: &Option<QuadratureSpec>, dim: usize| {
        let mut q = q.unwrap_or_else(|| QuadratureSpec::default_for_dim(dim));
        q.nodes *= 2;
        Some(q)
    };
    match spec {
        MeasureSpec::UniformCube { dim, half_width, center, quadrature } => Some(MeasureSpec::UniformCube {
            dim: *dim,
            half_width: *half_width,
            center: center.clone(),
            quadrature: double(quadrature, *dim),
        }),
        MeasureSpec::Gaussian { dim, mean, sigma, truncation, quadrature } => Some(MeasureSpec::Gaussian {
            dim: *dim,
            mean: mean.clone(),
            sigma: *sigma,
            truncation: *truncation,
            quadrature: double(quadrature, *dim),
        }),
        MeasureSpec::Mixture { dim, components } => {
            let refined: Vec<Option<MeasureSpec>> = components.iter().map(|c| refined_spec(&c.measure)).collect();
            refined.iter().any(Option::is_some).then(|| MeasureSpec::Mixture {
                dim: *dim,
                components: components
                    .iter()
                    .zip(refined)
                    .map(|(c, r)| MixtureComponentSpec {
                        weight: c.weight,
                        measure: r.unwrap_or_else(|| c.measure.clone()),
                    })
                    .collect(),
            })
        }
        MeasureSpec::Atoms { .. } | MeasureSpec::CircleArc { .. } => None,
    }
}

/// One experiment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub parameter: f64,
    pub measured_wp: f64,
    pub coupling_bound: f64,
    pub theoretical_bound: Option<f64>,
    pub terms: usize,
    pub seed: u64,
    pub method: Option<WpMethod>,
    /// Whether the bounds of this row are asserted or only reported.
    pub asserted: bool,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl SweepRow {
    /// Row whose bounds are asserted: measured within [`MEASURED_TOL`] of the
    /// coupling bound, coupling within [`BOUND_TOL`] of the theoretical bound.
    pub fn asserted(
        label: &str,
        parameter: f64,
        measured: f64,
        coupling: f64,
        theoretical: f64,
        terms: usize,
        seed: u64,
    ) -> Self {
        let passed = measured <= coupling + MEASURED_TOL && coupling <= theoretical + BOUND_TOL;
        Self {
            label: label.into(),
            parameter,
            measured_wp: measured,
            coupling_bound: coupling,
            theoretical_bound: Some(theoretical),
            terms,
            seed,
            method: None,
            asserted: true,
            passed,
            extra: BTreeMap::new(),
        }
    }

    pub fn informational(label: &str, parameter: f64, measured: f64, coupling: f64, terms: usize, seed: u64) -> Self {
        Self {
            label: label.into(),
            parameter,
            measured_wp: measured,
            coupling_bound: coupling,
            theoretical_bound: None,
            terms,
            seed,
            method: None,
            asserted: false,
            passed: true,
            extra: BTreeMap::new(),
        }
    }

    fn with_method(mut self, m: WpMethod) -> Self {
        self.method = Some(m);
        self
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of a used point from the line.
    pub residual: f64,
    pub points: usize,
    pub excluded: usize,
}

/// Ordinary least squares on the logarithms; points with a nonpositive
/// coordinate are excluded and counted. Needs three usable points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let used: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let excluded = points.len() - used.len();
    if used.len() < 3 {
        return Err(invalid(format!("slope fit needs 3 positive points, got {}", used.len())));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct parameters"));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = used.iter().map(|p| (p.1 - intercept - slope * p.0).abs()).fold(0.0, f64::max);
    Ok(SlopeFit { slope, intercept, residual, points: used.len(), excluded })
}

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: String,
    pub p: f64,
    pub rows: Vec<SweepRow>,
    pub slope: Option<SlopeFit>,
    /// Slope the bound predicts (`1` against h, `-1/d` against N).
    pub slope_target: Option<f64>,
    pub slope_window: Option<[f64; 2]>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TruncationReport>,
}

impl SweepReport {
    pub fn new(kind: &str, p: f64) -> Self {
        Self {
            kind: kind.into(),
            p,
            rows: Vec::new(),
            slope: None,
            slope_target: None,
            slope_window: None,
            checks: Vec::new(),
            notes: Vec::new(),
            tail: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed) && self.checks.iter().all(|c| c.passed)
    }

    /// Fit the slope of the rows labelled `label` and check it against
    /// `window` when given. Degenerate sweeps are noted, not failed.
    fn fit(&mut self, label: &str, target: f64, window: Option<[f64; 2]>) {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.label == label).map(|r| (r.parameter, r.measured_wp)).collect();
        self.slope_target = Some(target);
        self.slope_window = window;
        match fit_slope(&pts) {
            Ok(fit) => {
                if let Some([lo, hi]) = window {
                    self.checks.push(Check::new(
                        "slope",
                        fit.slope >= lo && fit.slope <= hi,
                        format!("slope {:.4} in [{lo:.4}, {hi:.4}]", fit.slope),
                    ));
                }
                self.slope = Some(fit);
            }
            Err(e) => self.notes.push(format!("slope fit skipped (degenerate sweep): {e}")),
        }
    }

    /// Record a failed point without aborting the rest of the sweep.
    fn point_failed(&mut self, what: String, e: &Error) {
        self.checks.push(Check::new(what, false, e.to_string()));
    }
}

/// Map over `items` on a pool of `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}
