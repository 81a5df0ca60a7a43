//! Probability measures on `R^d`: finite atomic measures, densities on a
//! bounded box and finite mixtures of these.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, BoxDomain};
use crate::quadrature::{chunk_rng, gauss_tensor_grid, monte_carlo, MC_CHUNK};

/// Atoms lighter than this after merging are dropped.
pub const MIN_ATOM_WEIGHT: f64 = 1e-15;
pub const MAX_MIXTURE_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: Vec<f64>, weight: f64) -> Self {
        Self { location, weight }
    }
}

/// Finitely supported probability measure. Construction merges atoms at the
/// same location, drops negligible atoms and normalizes the total mass.
/// Atom order is the order of first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.len());
        for a in atoms {
            if a.location.len() != dim {
                return Err(invalid(format!("atom has {} coordinates, expected {dim}", a.location.len())));
            }
            if a.location.iter().any(|v| !v.is_finite()) {
                return Err(invalid("atom location must be finite"));
            }
            if !(a.weight >= 0.0 && a.weight.is_finite()) {
                return Err(invalid(format!("atom weight {} must be finite and >= 0", a.weight)));
            }
            // -0.0 and 0.0 are the same point
            let key: Vec<u64> = a.location.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&i) => merged[i].weight += a.weight,
                None => {
                    index.insert(key, merged.len());
                    merged.push(a);
                }
            }
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(invalid("discrete measure has zero total mass"));
        }
        merged.retain(|a| a.weight / total >= MIN_ATOM_WEIGHT);
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        for a in &mut merged {
            a.weight /= total;
        }
        Ok(Self { dim, atoms: merged })
    }

    pub fn dirac(location: Vec<f64>) -> Self {
        let dim = location.len();
        Self::new(dim, vec![Atom::new(location, 1.0)]).expect("valid dirac")
    }

    /// Uniform weights on the given points (duplicates accumulate weight).
    pub fn uniform(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(dim, points.into_iter().map(|p| Atom::new(p, 1.0)).collect())
    }

    pub fn from_weighted(dim: usize, points: Vec<Vec<f64>>, weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(invalid("points and weights differ in length"));
        }
        Self::new(dim, points.into_iter().zip(weights).map(|(p, w)| Atom::new(p, *w)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.iter().map(|a| a.location.as_slice())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn support_box(&self) -> BoxDomain {
        BoxDomain::bounding(self.locations(), self.dim)
    }

    /// Copy with atoms sorted lexicographically by location.
    pub fn canonical(&self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| crate::geometry::lex_cmp(&a.location, &b.location));
        Self { dim: self.dim, atoms }
    }

    /// Same support and weights up to `tol`, ignoring atom order.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.len() != other.len() {
            return false;
        }
        let (a, b) = (self.canonical(), other.canonical());
        a.atoms.iter().zip(&b.atoms).all(|(x, y)| {
            (x.weight - y.weight).abs() <= tol && x.location.iter().zip(&y.location).all(|(u, v)| (u - v).abs() <= tol)
        })
    }

    pub fn moment(&self, p: f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * norm(&a.location).powf(p)).sum()
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let atoms: Vec<Atom> = self.atoms.iter().map(|a| Atom::new(f(&a.location), a.weight)).collect();
        let dim = atoms.first().map_or(self.dim, |a| a.location.len());
        Self::new(dim, atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    #[default]
    TensorGrid,
    MonteCarlo,
}

/// How integrals against a density are evaluated. For `TensorGrid`, `nodes`
/// is the Gauss-Legendre order per axis; for `MonteCarlo` it is the sample
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    #[serde(alias = "samples_or_nodes_per_axis")]
    pub nodes: usize,
    #[serde(default)]
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn tensor_grid(nodes: usize) -> Self {
        Self { method: QuadratureMethod::TensorGrid, nodes, seed: 0 }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self { method: QuadratureMethod::MonteCarlo, nodes: samples, seed }
    }

    /// 64 Gauss-Legendre nodes per axis up to `d = 2`, `10^5` samples above.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= 2 {
            Self::tensor_grid(64)
        } else {
            Self::monte_carlo(100_000, 0)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(invalid("quadrature needs at least one node"));
        }
        Ok(())
    }
}

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Named density families. Quantization treats `Uniform` densities as
/// piecewise polynomial so cell integrals become exact.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily {
    Uniform,
    Gaussian { mean: Vec<f64>, sigma: f64 },
    Custom,
}

/// Absolutely continuous probability measure on a bounded box.
#[derive(Clone)]
pub struct DensityMeasure {
    density: DensityFn,
    support: BoxDomain,
    quadrature: QuadratureSpec,
    peak: f64,
    family: DensityFamily,
    mass_error: f64,
}

impl fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMeasure")
            .field("support", &self.support)
            .field("quadrature", &self.quadrature)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

impl DensityMeasure {
    /// Wrap an unnormalized nonnegative density. `peak` must bound the
    /// unnormalized density from above on `support`; it drives rejection
    /// sampling.
    pub fn new(
        support: BoxDomain,
        density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        peak: f64,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        quadrature.validate()?;
        let raw: DensityFn = Arc::new(density);
        let probe = Self {
            density: raw.clone(),
            support: support.clone(),
            quadrature,
            peak,
            family: DensityFamily::Custom,
            mass_error: 0.0,
        };
        let (mass, err) = probe.integrate(|_| 1.0)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("density integrates to a nonpositive or non-finite mass"));
        }
        let f = raw.clone();
        Ok(Self {
            density: Arc::new(move |x| f(x) / mass),
            support,
            quadrature,
            peak: peak / mass,
            family: DensityFamily::Custom,
            mass_error: err / mass,
        })
    }

    pub fn uniform_box(support: BoxDomain) -> Self {
        let dim = support.dim();
        let value = 1.0 / support.volume();
        Self {
            density: Arc::new(move |_| value),
            support,
            quadrature: QuadratureSpec::default_for_dim(dim),
            peak: value,
            family: DensityFamily::Uniform,
            mass_error: 0.0,
        }
    }

    /// Isotropic Gaussian truncated to `mean ± truncation·sigma` per axis and
    /// renormalized.
    pub fn gaussian(mean: Vec<f64>, sigma: f64, truncation: f64) -> Result<Self> {
        if !(sigma > 0.0 && truncation > 0.0 && truncation.is_finite()) {
            return Err(invalid("gaussian needs sigma > 0 and a finite truncation > 0"));
        }
        let dim = mean.len();
        let support = BoxDomain::new(
            mean.iter().map(|m| m - truncation * sigma).collect(),
            mean.iter().map(|m| m + truncation * sigma).collect(),
        )?;
        let axis_mass = libm::erf(truncation / std::f64::consts::SQRT_2);
        let peak = 1.0 / ((2.0 * PI).sqrt() * sigma * axis_mass).powi(dim as i32);
        let m = mean.clone();
        let inv = 1.0 / (2.0 * sigma * sigma);
        Ok(Self {
            density: Arc::new(move |x| {
                let r2: f64 = x.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum();
                peak * (-r2 * inv).exp()
            }),
            support,
            quadrature: QuadratureSpec::default_for_dim(dim),
            peak,
            family: DensityFamily::Gaussian { mean, sigma },
            mass_error: 0.0,
        })
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Result<Self> {
        quadrature.validate()?;
        self.quadrature = quadrature;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &BoxDomain {
        &self.support
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quadrature
    }

    pub fn family(&self) -> &DensityFamily {
        &self.family
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Quadrature error estimate of the normalizing integral.
    pub fn mass_error(&self) -> f64 {
        self.mass_error
    }

    /// Density value; zero outside the support box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            (self.density)(x)
        } else {
            0.0
        }
    }

    /// `∫ g(x) f(x) dx` with an error estimate: the difference to a half-order
    /// rule for tensor grids, the standard error for Monte Carlo.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        let f = |x: &[f64]| {
            let v = (self.density)(x);
            if v == 0.0 {
                0.0
            } else {
                g(x) * v
            }
        };
        match self.quadrature.method {
            QuadratureMethod::TensorGrid => {
                let n = self.quadrature.nodes;
                let budget = (n as f64).powi(self.dim() as i32);
                if budget > 5e7 {
                    return Err(Error::ResourceLimit {
                        what: "tensor-grid quadrature nodes".into(),
                        size: budget,
                        limit: 5e7,
                    });
                }
                let full = self.tensor_sum(n, &f);
                let coarse = self.tensor_sum((n / 2).max(1), &f);
                Ok((full, (full - coarse).abs()))
            }
            QuadratureMethod::MonteCarlo => {
                Ok(monte_carlo(&self.support, self.quadrature.nodes, self.quadrature.seed, f))
            }
        }
    }

    fn tensor_sum(&self, n: usize, f: &impl Fn(&[f64]) -> f64) -> f64 {
        let dim = self.dim();
        let (pts, wts) = gauss_tensor_grid(&self.support, n);
        pts.chunks_exact(dim).zip(&wts).map(|(x, w)| w * f(x)).sum()
    }

    /// Weighted atoms reproducing the quadrature rule (the surrogate used by
    /// pushforward and by exact transport).
    pub fn surrogate(&self) -> Result<DiscreteMeasure> {
        let dim = self.dim();
        match self.quadrature.method {
            QuadratureMethod::TensorGrid => {
                let (pts, wts) = gauss_tensor_grid(&self.support, self.quadrature.nodes);
                let atoms = pts
                    .chunks_exact(dim)
                    .zip(&wts)
                    .map(|(x, w)| Atom::new(x.to_vec(), w * (self.density)(x)))
                    .collect();
                DiscreteMeasure::new(dim, atoms)
            }
            QuadratureMethod::MonteCarlo => {
                let pts = self.sample(self.quadrature.nodes, self.quadrature.seed)?;
                DiscreteMeasure::uniform(dim, pts)
            }
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim();
        let rate = 1.0 / (self.support.volume() * self.peak);
        if !matches!(self.family, DensityFamily::Uniform) && rate < 1e-6 {
            return Err(Error::SamplerInefficiency { rate });
        }
        let mut out = Vec::with_capacity(n);
        for c in 0..n.div_ceil(MC_CHUNK) {
            let mut rng = chunk_rng(seed, c as u64);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            for _ in 0..count {
                out.push(self.draw(&mut rng, dim));
            }
        }
        Ok(out)
    }

    fn draw(&self, rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        let b = &self.support;
        let uniform = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
            (0..dim).map(|k| rng.random_range(b.lo[k]..=b.hi[k])).collect()
        };
        match &self.family {
            DensityFamily::Uniform => uniform(rng),
            DensityFamily::Gaussian { mean, sigma } => loop {
                let x: Vec<f64> = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + sigma * z
                    })
                    .collect();
                if b.contains(&x) {
                    return x;
                }
            },
            DensityFamily::Custom => loop {
                let x = uniform(rng);
                let u: f64 = rng.random_range(0.0..self.peak);
                if u < (self.density)(&x) {
                    return x;
                }
            },
        }
    }
}

/// Probability measure: atomic, absolutely continuous, or a finite mixture.
#[derive(Debug, Clone)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Density(DensityMeasure),
    Mixture(Mixture),
}

#[derive(Debug, Clone)]
pub struct Mixture {
    dim: usize,
    components: Vec<(f64, Measure)>,
}

impl Mixture {
    pub fn components(&self) -> &[(f64, Measure)] {
        &self.components
    }
}

impl From<DiscreteMeasure> for Measure {
    fn from(m: DiscreteMeasure) -> Self {
        Measure::Discrete(m)
    }
}

impl From<DensityMeasure> for Measure {
    fn from(m: DensityMeasure) -> Self {
        Measure::Density(m)
    }
}

impl Measure {
    /// Finite mixture; weights must be positive and are renormalized.
    pub fn mixture(components: Vec<(f64, Measure)>) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("mixture needs a component"))?;
        let dim = first.1.dim();
        if components.iter().any(|(w, m)| !(*w > 0.0 && w.is_finite()) || m.dim() != dim) {
            return Err(invalid("mixture weights must be positive and dimensions equal"));
        }
        let depth = 1 + components.iter().map(|(_, m)| m.depth()).max().unwrap_or(0);
        if depth > MAX_MIXTURE_DEPTH {
            return Err(invalid(format!("mixture depth {depth} exceeds {MAX_MIXTURE_DEPTH}")));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        let components = components.into_iter().map(|(w, m)| (w / total, m)).collect();
        Ok(Measure::Mixture(Mixture { dim, components }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Discrete(m) => m.dim(),
            Measure::Density(m) => m.dim(),
            Measure::Mixture(m) => m.dim,
        }
    }

    fn depth(&self) -> usize {
        match self {
            Measure::Mixture(m) => 1 + m.components.iter().map(|(_, c)| c.depth()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Bounding box of the support.
    pub fn support_box(&self) -> BoxDomain {
        match self {
            Measure::Discrete(m) => m.support_box(),
            Measure::Density(m) => m.support().clone(),
            Measure::Mixture(m) => {
                m.components.iter().map(|(_, c)| c.support_box()).reduce(|a, b| a.hull(&b)).expect("nonempty mixture")
            }
        }
    }

    /// Radius of the smallest origin-centred ball containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            Measure::Discrete(m) => m.locations().map(norm).fold(0.0, f64::max),
            Measure::Density(m) => m.support().max_norm(),
            Measure::Mixture(m) => m.components.iter().map(|(_, c)| c.support_radius()).fold(0.0, f64::max),
        }
    }

    /// `M_p(μ) = ∫ |x|^p dμ`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        self.moment_with_error(p).map(|(v, _)| v)
    }

    /// Moment together with its quadrature error estimate (zero for atoms).
    pub fn moment_with_error(&self, p: f64) -> Result<(f64, f64)> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("moment order p = {p} must be >= 1")));
        }
        let (v, e) = match self {
            Measure::Discrete(m) => (m.moment(p), 0.0),
            Measure::Density(m) => m.integrate(|x| norm(x).powf(p))?,
            Measure::Mixture(m) => {
                let mut acc = (0.0, 0.0);
                for (w, c) in &m.components {
                    let (v, e) = c.moment_with_error(p)?;
                    acc.0 += w * v;
                    acc.1 += w * e;
                }
                acc
            }
        };
        if !v.is_finite() {
            return Err(Error::MomentDivergence(format!("M_{p} evaluated to {v}")));
        }
        Ok((v, e))
    }

    /// `n` i.i.d. draws, bit-for-bit reproducible for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        match self {
            Measure::Discrete(m) => {
                let cdf = cumulative(m.atoms().iter().map(|a| a.weight));
                let mut out = Vec::with_capacity(n);
                for c in 0..n.div_ceil(MC_CHUNK) {
                    let mut rng = chunk_rng(seed, c as u64);
                    for _ in 0..MC_CHUNK.min(n - c * MC_CHUNK) {
                        let i = pick(&cdf, rng.random());
                        out.push(m.atoms()[i].location.clone());
                    }
                }
                Ok(out)
            }
            Measure::Density(m) => m.sample(n, seed),
            Measure::Mixture(m) => {
                let cdf = cumulative(m.components.iter().map(|(w, _)| *w));
                let mut labels = Vec::with_capacity(n);
                for c in 0..n.div_ceil(MC_CHUNK) {
                    let mut rng = chunk_rng(seed, c as u64);
                    for _ in 0..MC_CHUNK.min(n - c * MC_CHUNK) {
                        labels.push(pick(&cdf, rng.random()));
                    }
                }
                let mut draws: Vec<std::vec::IntoIter<Vec<f64>>> = Vec::new();
                for (i, (_, comp)) in m.components.iter().enumerate() {
                    let count = labels.iter().filter(|&&l| l == i).count();
                    let sub_seed = seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
                    draws.push(comp.sample(count, sub_seed)?.into_iter());
                }
                Ok(labels.into_iter().map(|l| draws[l].next().expect("count matches")).collect())
            }
        }
    }

    /// Atomic surrogate: atoms as is, densities through their quadrature rule.
    pub fn discretize(&self) -> Result<DiscreteMeasure> {
        match self {
            Measure::Discrete(m) => Ok(m.clone()),
            Measure::Density(m) => m.surrogate(),
            Measure::Mixture(m) => {
                let mut atoms = Vec::new();
                for (w, c) in &m.components {
                    atoms.extend(c.discretize()?.atoms().iter().map(|a| Atom::new(a.location.clone(), w * a.weight)));
                }
                DiscreteMeasure::new(m.dim, atoms)
            }
        }
    }

    /// `T_♯μ`. Exact for atomic measures; densities are replaced by their
    /// quadrature surrogate before mapping.
    pub fn pushforward(&self, map: impl Fn(&[f64]) -> Vec<f64>) -> Result<Measure> {
        Ok(Measure::Discrete(self.discretize()?.map(map)?))
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        spec.build()
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("nonempty");
    let target = u * total;
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

/// Masses `μ_⊥(B_{(j, j+1]})` of the singular continuous part on integer
/// shells, keyed by `j`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShellMassSpec {
    pub shell_masses: BTreeMap<i64, f64>,
}

impl ShellMassSpec {
    pub fn new(shell_masses: BTreeMap<i64, f64>) -> Result<Self> {
        if shell_masses.values().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(invalid("shell masses must be finite and >= 0"));
        }
        if shell_masses.values().sum::<f64>() > 1.0 + 1e-12 {
            return Err(invalid("shell masses sum to more than 1"));
        }
        Ok(Self { shell_masses })
    }
}

/// JSON description of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Uniform on `center + [-half_width, half_width]^dim`.
    UniformCube {
        dim: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quadrature: Option<QuadratureSpec>,
    },
    /// Isotropic Gaussian truncated at `truncation` standard deviations.
    Gaussian {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        sigma: f64,
        #[serde(default = "default_truncation")]
        truncation: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quadrature: Option<QuadratureSpec>,
    },
    Atoms {
        dim: usize,
        atoms: Vec<Atom>,
    },
    Mixture {
        dim: usize,
        components: Vec<MixtureComponentSpec>,
    },
    /// Uniform measure on a circle arc in the plane, represented by
    /// `atoms` equally spaced points (arc-length midpoints).
    CircleArc {
        dim: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default)]
        start: f64,
        #[serde(default = "default_arc_end")]
        end: f64,
        #[serde(default = "default_arc_atoms")]
        atoms: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponentSpec {
    pub weight: f64,
    pub measure: MeasureSpec,
}

fn default_half_width() -> f64 {
    0.5
}
fn default_truncation() -> f64 {
    8.0
}
fn default_radius() -> f64 {
    0.4
}
fn default_arc_end() -> f64 {
    2.0 * PI
}
fn default_arc_atoms() -> usize {
    2048
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformCube { dim, .. }
            | MeasureSpec::Gaussian { dim, .. }
            | MeasureSpec::Atoms { dim, .. }
            | MeasureSpec::Mixture { dim, .. }
            | MeasureSpec::CircleArc { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Measure> {
        let check_center = |c: &Option<Vec<f64>>, dim: usize| -> Result<Vec<f64>> {
            match c {
                Some(v) if v.len() != dim => Err(invalid("center/mean has wrong dimension")),
                Some(v) => Ok(v.clone()),
                None => Ok(vec![0.0; dim]),
            }
        };
        match self {
            MeasureSpec::UniformCube { dim, half_width, center, quadrature } => {
                if *dim == 0 || !(*half_width > 0.0) {
                    return Err(invalid("uniform_cube needs dim > 0 and half_width > 0"));
                }
                let c = check_center(center, *dim)?;
                let b = BoxDomain::new(
                    c.iter().map(|v| v - half_width).collect(),
                    c.iter().map(|v| v + half_width).collect(),
                )?;
                let mut m = DensityMeasure::uniform_box(b);
                if let Some(q) = quadrature {
                    m = m.with_quadrature(*q)?;
                }
                Ok(m.into())
            }
            MeasureSpec::Gaussian { dim, mean, sigma, truncation, quadrature } => {
                let mut m = DensityMeasure::gaussian(check_center(mean, *dim)?, *sigma, *truncation)?;
                if let Some(q) = quadrature {
                    m = m.with_quadrature(*q)?;
                }
                Ok(m.into())
            }
            MeasureSpec::Atoms { dim, atoms } => Ok(DiscreteMeasure::new(*dim, atoms.clone())?.into()),
            MeasureSpec::Mixture { dim, components } => {
                let comps = components
                    .iter()
                    .map(|c| {
                        let m = c.measure.build()?;
                        if m.dim() != *dim {
                            return Err(invalid("mixture component dimension mismatch"));
                        }
                        Ok((c.weight, m))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Measure::mixture(comps)
            }
            MeasureSpec::CircleArc { dim, radius, center, start, end, atoms } => {
                if *dim != 2 {
                    return Err(invalid("circle_arc lives in dimension 2"));
                }
                if !(*radius > 0.0) || *atoms == 0 || !(end > start) {
                    return Err(invalid("circle_arc needs radius > 0, atoms > 0 and end > start"));
                }
                let c = check_center(center, 2)?;
                let pts = (0..*atoms)
                    .map(|i| {
                        let t = start + (end - start) * (i as f64 + 0.5) / *atoms as f64;
                        vec![c[0] + radius * t.cos(), c[1] + radius * t.sin()]
                    })
                    .collect();
                Ok(DiscreteMeasure::uniform(2, pts)?.into())
            }
        }
    }
}
