//! Voronoi quantization of measures: lattice and site schemes, the explicit
//! cell coupling, and exact distances to the resulting approximants.

mod moments;
mod nodes;
mod sites;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use moments::{choose_h_for_budget, h_for_covering, moment_bound_suite, InequalityId, MomentBoundReport};
pub use nodes::NODE_LIMIT;
pub use sites::{enclosing_ball, mesh_norm, mesh_norm_box, separation_radius};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist_pow, BoxDomain};
use crate::lattice::{CellId, Lattice, LatticeSpec};
use crate::measure::{DiscreteMeasure, Measure};
use crate::ot::{wasserstein_1d, wasserstein_lp};
use crate::spatial::KdTree;
use nodes::{midpoint_grid, node_set, reference_cell_nodes, CellKey, Locator, NodeSet};

/// Transport problems with more arcs than this are not solved exactly.
pub const LP_ARC_BUDGET: usize = 250_000;
/// Indicator mass is spread over at least this many nodes per dimension and cell.
const INDICATOR_NODES_PER_DIM: usize = 16;
/// Cap on the grid used to spread indicator mass over unbounded site cells.
const SITE_GRID_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximantMode {
    /// Cell mass placed at the site.
    Dirac,
    /// Cell mass spread uniformly over the cell.
    Indicator,
}

/// Partition of space into Voronoi cells, either of the scaled lattice `hΛ`
/// or of a finite list of distinct sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub enum VoronoiScheme {
    Lattice { lattice: Lattice, h: f64 },
    Sites { sites: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SchemeRepr {
    Lattice { lattice: LatticeSpec, h: f64 },
    Sites { sites: Vec<Vec<f64>> },
}

impl TryFrom<SchemeRepr> for VoronoiScheme {
    type Error = Error;

    fn try_from(r: SchemeRepr) -> Result<Self> {
        match r {
            SchemeRepr::Lattice { lattice, h } => Self::lattice(Lattice::from_spec(&lattice)?, h),
            SchemeRepr::Sites { sites } => Self::sites(sites),
        }
    }
}

impl From<VoronoiScheme> for SchemeRepr {
    fn from(s: VoronoiScheme) -> Self {
        match s {
            VoronoiScheme::Lattice { lattice, h } => SchemeRepr::Lattice { lattice: lattice.to_spec(), h },
            VoronoiScheme::Sites { sites } => SchemeRepr::Sites { sites },
        }
    }
}

impl VoronoiScheme {
    pub fn lattice(lattice: Lattice, h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(invalid(format!("scale h = {h} must lie in (0, 1]")));
        }
        Ok(Self::Lattice { lattice, h })
    }

    pub fn sites(sites: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = sites.first() else {
            return Err(invalid("site list is empty"));
        };
        let d = first.len();
        if d == 0 || sites.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
            return Err(invalid("sites must be finite points of one dimension"));
        }
        if sites.len() > 1 {
            separation_radius(&sites)?;
        }
        Ok(Self::Sites { sites })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lattice { lattice, .. } => lattice.dim(),
            Self::Sites { sites } => sites[0].len(),
        }
    }

    fn site(&self, key: &CellKey) -> Vec<f64> {
        match (self, key) {
            (Self::Lattice { lattice, h }, CellKey::Lattice(c)) => lattice.site(*h, c),
            (Self::Sites { sites }, CellKey::Site(i)) => sites[*i].clone(),
            _ => unreachable!("cell key matches its scheme"),
        }
    }
}

/// Which cell an approximant term belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellRef {
    Lattice(CellId),
    Site(usize),
}

impl CellRef {
    fn key(&self) -> CellKey {
        match self {
            Self::Lattice(c) => CellKey::Lattice(c.clone()),
            Self::Site(i) => CellKey::Site(*i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCell {
    pub site: Vec<f64>,
    pub mass: f64,
    pub cell: CellRef,
}

/// `Σ μ(V)/τ(V) · τ` over the cells `V` carrying mass, with `τ` a Dirac at
/// the site or Lebesgue measure on the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    pub mode: ApproximantMode,
    pub scheme: VoronoiScheme,
    pub cells: Vec<ApproxCell>,
    /// Box that unbounded site cells are clipped to in indicator mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<BoxDomain>,
    /// Quadrature mass defect removed by renormalization.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub mass_error: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Approximant {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.scheme.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mass).collect()
    }

    pub fn sites(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(|c| c.site.clone()).collect()
    }

    /// `Σ μ(V) δ_site`, the approximant itself in dirac mode.
    pub fn dirac_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_weighted(self.dim(), self.sites(), &self.masses())
    }

    /// Discrete stand-in used for exact transport: the dirac measure, or in
    /// indicator mode each cell mass spread over reference nodes of the cell.
    pub fn realization(&self) -> Result<DiscreteMeasure> {
        self.realization_with(INDICATOR_NODES_PER_DIM)
    }

    pub(crate) fn realization_with(&self, per_dim: usize) -> Result<DiscreteMeasure> {
        match self.mode {
            ApproximantMode::Dirac => self.dirac_measure(),
            ApproximantMode::Indicator => {
                let nodes = self.indicator_nodes(per_dim)?;
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (cell, ys) in self.cells.iter().zip(&nodes) {
                    let w = cell.mass / ys.len() as f64;
                    for y in ys {
                        pts.push(y.clone());
                        wts.push(w);
                    }
                }
                DiscreteMeasure::from_weighted(self.dim(), pts, &wts)
            }
        }
    }

    /// Points spreading each cell's mass in indicator mode: translated
    /// reference nodes of `hV_0` for lattices, grid points of the window
    /// nearest to the site for site schemes (the site itself if none).
    fn indicator_nodes(&self, per_dim: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        match &self.scheme {
            VoronoiScheme::Lattice { lattice, h } => {
                let reference = reference_cell_nodes(lattice, per_dim * lattice.dim())?;
                Ok(self
                    .cells
                    .iter()
                    .map(|c| reference.iter().map(|r| c.site.iter().zip(r).map(|(s, v)| s + h * v).collect()).collect())
                    .collect())
            }
            VoronoiScheme::Sites { sites } => {
                let d = self.dim();
                let window = self.window.clone().unwrap_or_else(|| BoxDomain::bounding(sites.iter(), d));
                let mut m = ((per_dim * d * sites.len()) as f64).powf(1.0 / d as f64).ceil() as usize;
                while m > 1 && m.pow(d as u32) > SITE_GRID_LIMIT {
                    m -= 1;
                }
                let tree = KdTree::new(sites);
                let mut per_site: Vec<Vec<Vec<f64>>> = vec![Vec::new(); sites.len()];
                for y in midpoint_grid(&window, m.max(1)) {
                    let (i, _) = tree.nearest(&y);
                    per_site[i].push(y);
                }
                Ok(self
                    .cells
                    .iter()
                    .map(|c| match c.cell {
                        CellRef::Site(i) if !per_site[i].is_empty() => std::mem::take(&mut per_site[i]),
                        _ => vec![c.site.clone()],
                    })
                    .collect())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(s)?;
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<()> {
        if self.cells.iter().any(|c| !(c.mass > 0.0) || c.site.len() != self.dim()) {
            return Err(invalid("approximant cells need positive mass and sites of the scheme's dimension"));
        }
        if (self.total_mass() - 1.0).abs() > 1e-10 {
            return Err(invalid("approximant masses do not sum to one"));
        }
        Ok(())
    }
}

fn check_bounded(measure: &Measure, scheme: &VoronoiScheme) -> Result<()> {
    if measure.dim() != scheme.dim() {
        return Err(invalid("measure and scheme dimensions differ"));
    }
    let b = measure.support_box();
    if b.lo.iter().chain(&b.hi).any(|v| !v.is_finite()) {
        return Err(Error::UnboundedSupport);
    }
    Ok(())
}

/// Nodes of `measure` under `scheme` and the cell of every node.
fn located_nodes(measure: &Measure, scheme: &VoronoiScheme) -> Result<(NodeSet, Vec<CellKey>)> {
    check_bounded(measure, scheme)?;
    let nodes = node_set(measure, scheme)?;
    let loc = Locator::new(scheme);
    let keys = (0..nodes.len()).map(|i| loc.locate(nodes.point(i))).collect();
    Ok((nodes, keys))
}

/// Quantize `measure` on `scheme`: each cell receives its mass `μ(V)`, cells
/// without mass are dropped, and cells are ordered by cell id (lattice) or
/// site index.
pub fn quantize(measure: &Measure, scheme: &VoronoiScheme, mode: ApproximantMode) -> Result<Approximant> {
    let (nodes, keys) = located_nodes(measure, scheme)?;
    let mut mass: BTreeMap<&CellKey, f64> = BTreeMap::new();
    for (k, w) in keys.iter().zip(&nodes.weights) {
        *mass.entry(k).or_insert(0.0) += w;
    }
    let total: f64 = mass.values().sum();
    let cells = mass
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(k, m)| ApproxCell {
            site: scheme.site(k),
            mass: m / total,
            cell: match k {
                CellKey::Lattice(c) => CellRef::Lattice(c.clone()),
                CellKey::Site(i) => CellRef::Site(*i),
            },
        })
        .collect();
    let window = match (scheme, mode) {
        (VoronoiScheme::Sites { .. }, ApproximantMode::Indicator) => Some(measure.support_box()),
        _ => None,
    };
    Ok(Approximant { mode, scheme: scheme.clone(), cells, window, mass_error: nodes.mass_error })
}

/// Approximant on the scaled lattice `hΛ`, `0 < h <= 1`.
pub fn quantize_lattice(measure: &Measure, lattice: &Lattice, h: f64, mode: ApproximantMode) -> Result<Approximant> {
    quantize(measure, &VoronoiScheme::lattice(lattice.clone(), h)?, mode)
}

/// Approximant on the Voronoi cells of distinct sites; ties go to the
/// smallest site index.
pub fn quantize_nonuniform(measure: &Measure, sites: &[Vec<f64>], mode: ApproximantMode) -> Result<Approximant> {
    quantize(measure, &VoronoiScheme::sites(sites.to_vec())?, mode)
}

/// How a reported distance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WpMethod {
    /// Quantile coupling on the line.
    Line,
    /// Network simplex on the full transport problem.
    Lp,
    /// Dirac approximants: nearest-site transport is optimal, so the cell
    /// coupling cost is the exact distance.
    NearestSite,
    /// Too large to solve; only the coupling upper bound is known.
    BoundOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `(∫ |x - y|^p dπ̃)^{1/p}` for the cell coupling `π̃`.
    pub coupling: f64,
    /// `W_p` between the measure's nodes and the approximant's realization.
    pub measured: f64,
    pub method: WpMethod,
}

impl Evaluation {
    pub fn exact(&self) -> bool {
        self.method != WpMethod::BoundOnly
    }
}

/// Nodes of `measure`, the approximant cell of each node, and a check that
/// the approximant was built from this measure.
fn attach(measure: &Measure, approx: &Approximant) -> Result<(NodeSet, Vec<usize>)> {
    let (nodes, keys) = located_nodes(measure, &approx.scheme)?;
    let index: BTreeMap<CellKey, usize> = approx.cells.iter().enumerate().map(|(i, c)| (c.cell.key(), i)).collect();
    let mut owner = Vec::with_capacity(keys.len());
    let mut mass = vec![0.0; approx.len()];
    for (k, w) in keys.iter().zip(&nodes.weights) {
        let i = *index.get(k).ok_or_else(|| invalid("approximant does not match this measure and scheme"))?;
        owner.push(i);
        mass[i] += w;
    }
    let total: f64 = mass.iter().sum();
    if mass.iter().zip(&approx.cells).any(|(m, c)| (m / total - c.mass).abs() > 1e-9) {
        return Err(invalid("approximant masses do not match this measure"));
    }
    Ok((nodes, owner))
}

/// The weighted nodes standing in for `measure` when it is quantized on the
/// approximant's scheme (atoms, or cell-aligned quadrature nodes).
pub fn source_nodes(measure: &Measure, approx: &Approximant) -> Result<DiscreteMeasure> {
    attach(measure, approx)?.0.to_measure()
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p = {p} must be >= 1")));
    }
    Ok(())
}

fn coupling_from(nodes: &NodeSet, owner: &[usize], approx: &Approximant, p: f64) -> Result<f64> {
    let cost: f64 = match approx.mode {
        ApproximantMode::Dirac => {
            (0..nodes.len()).map(|i| nodes.weights[i] * dist_pow(nodes.point(i), &approx.cells[owner[i]].site, p)).sum()
        }
        ApproximantMode::Indicator => {
            let ys = approx.indicator_nodes(INDICATOR_NODES_PER_DIM)?;
            (0..nodes.len())
                .map(|i| {
                    let x = nodes.point(i);
                    let cell = &ys[owner[i]];
                    nodes.weights[i] * cell.iter().map(|y| dist_pow(x, y, p)).sum::<f64>() / cell.len() as f64
                })
                .sum()
        }
    };
    Ok(cost.max(0.0).powf(1.0 / p))
}

/// Cost of the explicit coupling that moves mass only within cells.
pub fn coupling_cost(measure: &Measure, approx: &Approximant, p: f64) -> Result<f64> {
    check_p(p)?;
    let (nodes, owner) = attach(measure, approx)?;
    coupling_from(&nodes, &owner, approx, p)
}

/// Coupling cost and `W_p(μ, approximant)`: by the line solver in one
/// dimension, by network simplex when the problem has at most
/// [`LP_ARC_BUDGET`] arcs, and otherwise by the nearest-site identity for
/// dirac approximants or not at all.
pub fn evaluate(measure: &Measure, approx: &Approximant, p: f64) -> Result<Evaluation> {
    check_p(p)?;
    let (nodes, owner) = attach(measure, approx)?;
    let coupling = coupling_from(&nodes, &owner, approx, p)?;
    let source = nodes.to_measure()?;
    let target = approx.realization()?;
    let (measured, method) = if source.dim() == 1 {
        (wasserstein_1d(&source, &target, p)?, WpMethod::Line)
    } else if source.len() * target.len() <= LP_ARC_BUDGET {
        (wasserstein_lp(&source, &target, p)?.0, WpMethod::Lp)
    } else if approx.mode == ApproximantMode::Dirac {
        (coupling, WpMethod::NearestSite)
    } else {
        (coupling, WpMethod::BoundOnly)
    };
    Ok(Evaluation { coupling, measured, method })
}

#[cfg(test)]
mod tests;
