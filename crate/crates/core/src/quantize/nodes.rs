//! Weighted node sets standing in for a measure during quantization.
//!
//! Discrete measures contribute their atoms. Densities are integrated with a
//! composite two-point Gauss-Legendre rule whose tiles follow the cell
//! boundaries whenever the partition is axis aligned, so that cell masses and
//! polynomial cell integrals come out exact.

use crate::error::{Error, Result};
use crate::geometry::BoxDomain;
use crate::lattice::{CellId, LatticeKind};
use crate::measure::{DensityFamily, DensityMeasure, DiscreteMeasure, Measure, QuadratureMethod};
use crate::quadrature::{axis_breaks, composite_axis, tensor_product};
use crate::spatial::KdTree;

use super::VoronoiScheme;

/// Upper limit on the number of nodes of one tensor rule.
pub const NODE_LIMIT: f64 = 5e6;
/// Axis-aligned site coordinates are used as breakpoints up to this many per axis.
const ALIGNED_SITE_COORDS: usize = 64;
/// Tiles per axis for densities given with a Monte Carlo rule.
const MC_FALLBACK_PIECES: usize = 32;

#[derive(Debug, Clone)]
pub(crate) struct NodeSet {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Deviation of the raw quadrature mass from one before renormalization.
    pub mass_error: f64,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let pts = self.points.chunks_exact(self.dim).map(<[f64]>::to_vec).collect();
        DiscreteMeasure::from_weighted(self.dim, pts, &self.weights)
    }

    pub fn moment(&self, p: f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * crate::geometry::norm(self.point(i)).powf(p)).sum()
    }

    fn from_discrete(m: &DiscreteMeasure) -> Self {
        let dim = m.dim();
        let mut points = Vec::with_capacity(m.len() * dim);
        let mut weights = Vec::with_capacity(m.len());
        for a in m.atoms() {
            points.extend_from_slice(&a.location);
            weights.push(a.weight);
        }
        Self { dim, points, weights, mass_error: 0.0 }
    }
}

/// Cell of a point under a scheme.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum CellKey {
    Lattice(CellId),
    Site(usize),
}

/// Point location for a scheme; site schemes go through a kd-tree.
pub(crate) struct Locator<'a> {
    scheme: &'a VoronoiScheme,
    tree: Option<KdTree>,
}

impl<'a> Locator<'a> {
    pub fn new(scheme: &'a VoronoiScheme) -> Self {
        let tree = match scheme {
            VoronoiScheme::Sites { sites } => Some(KdTree::new(sites)),
            VoronoiScheme::Lattice { .. } => None,
        };
        Self { scheme, tree }
    }

    pub fn locate(&self, x: &[f64]) -> CellKey {
        match (self.scheme, &self.tree) {
            (VoronoiScheme::Lattice { lattice, h }, _) => CellKey::Lattice(lattice.decode(*h, x)),
            (_, Some(tree)) => CellKey::Site(tree.nearest(x).0),
            _ => unreachable!("site schemes always carry a tree"),
        }
    }
}

pub(crate) fn node_set(measure: &Measure, scheme: &VoronoiScheme) -> Result<NodeSet> {
    match measure {
        Measure::Discrete(m) => Ok(NodeSet::from_discrete(m)),
        Measure::Density(m) => density_nodes(m, scheme),
        Measure::Mixture(mix) => {
            let dim = measure.dim();
            let mut out = NodeSet { dim, points: Vec::new(), weights: Vec::new(), mass_error: 0.0 };
            for (w, comp) in mix.components() {
                let part = node_set(comp, scheme)?;
                out.points.extend_from_slice(&part.points);
                out.weights.extend(part.weights.iter().map(|v| v * w));
                out.mass_error += w * part.mass_error;
            }
            Ok(out)
        }
    }
}

fn density_nodes(m: &DensityMeasure, scheme: &VoronoiScheme) -> Result<NodeSet> {
    let dim = m.dim();
    let q = m.quadrature();
    let uniform = matches!(m.family(), DensityFamily::Uniform);
    if q.method == QuadratureMethod::MonteCarlo && !uniform {
        let pts = m.sample(q.nodes, q.seed)?;
        let w = 1.0 / pts.len() as f64;
        return Ok(NodeSet { dim, points: pts.concat(), weights: vec![w; pts.len()], mass_error: 0.0 });
    }
    let support = m.support();
    let base_pieces = match q.method {
        QuadratureMethod::TensorGrid => (q.nodes / 2).max(1),
        QuadratureMethod::MonteCarlo => MC_FALLBACK_PIECES,
    };
    let mut axes = Vec::with_capacity(dim);
    let mut total = 1.0;
    for k in 0..dim {
        let aligned = aligned_breaks(scheme, support, k)?;
        let pieces = if uniform && aligned.is_some() { 1 } else { base_pieces };
        let breaks = axis_breaks(support.lo[k], support.hi[k], pieces, aligned.unwrap_or_default());
        let axis = composite_axis(&breaks, 2);
        total *= axis.0.len() as f64;
        axes.push(axis);
    }
    if total > NODE_LIMIT {
        return Err(Error::ResourceLimit {
            what: "cell-aligned quadrature nodes".into(),
            size: total,
            limit: NODE_LIMIT,
        });
    }
    let (points, mut weights) = tensor_product(&axes);
    for (w, x) in weights.iter_mut().zip(points.chunks_exact(dim)) {
        *w *= m.eval(x);
    }
    let raw: f64 = weights.iter().sum();
    if !(raw > 0.0) {
        return Err(Error::InvalidInput("density has no mass on its quadrature nodes".into()));
    }
    let mass_error = (raw - 1.0).abs();
    if mass_error > 1e-6 {
        log::warn!("cell quadrature mass is off by {mass_error:.3e}; renormalizing");
    }
    weights.iter_mut().for_each(|w| *w /= raw);
    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let points = keep.iter().flat_map(|&i| points[i * dim..(i + 1) * dim].iter().copied()).collect();
    let weights = keep.iter().map(|&i| weights[i]).collect();
    Ok(NodeSet { dim, points, weights, mass_error })
}

/// Breakpoints along axis `k` at which the cells of an axis-aligned
/// partition change, together with the sites (so cell integrals of
/// `|x - site|^p` split into polynomial pieces). `None` when the partition is
/// not axis aligned.
fn aligned_breaks(scheme: &VoronoiScheme, support: &BoxDomain, k: usize) -> Result<Option<Vec<f64>>> {
    let (lo, hi) = (support.lo[k], support.hi[k]);
    match scheme {
        VoronoiScheme::Lattice { lattice, h } if lattice.kind() == LatticeKind::IntegerZd => {
            let count = (hi - lo) / h * 2.0 + 4.0;
            if count > NODE_LIMIT {
                return Err(Error::ResourceLimit {
                    what: "cell boundaries per axis".into(),
                    size: count,
                    limit: NODE_LIMIT,
                });
            }
            let first = (lo / h - 0.5).floor() as i64;
            let last = (hi / h + 0.5).ceil() as i64;
            let mut out = Vec::new();
            for j in first..=last {
                out.push(j as f64 * h);
                out.push((j as f64 + 0.5) * h);
            }
            Ok(Some(out))
        }
        VoronoiScheme::Sites { sites } => {
            let mut coords: Vec<f64> = sites.iter().map(|s| s[k]).collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup();
            if coords.len() > ALIGNED_SITE_COORDS {
                return Ok(None);
            }
            let mids: Vec<f64> = coords.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            coords.extend(mids);
            Ok(Some(coords))
        }
        VoronoiScheme::Lattice { .. } => Ok(None),
    }
}

/// Reference nodes of the unit-scale cell `V_0`: a midpoint grid over a box
/// containing the cell, filtered by decoding, with at least `target` points.
pub(crate) fn reference_cell_nodes(lattice: &crate::lattice::Lattice, target: usize) -> Result<Vec<Vec<f64>>> {
    let d = lattice.dim();
    let half = if lattice.kind() == LatticeKind::IntegerZd { 0.5 } else { lattice.voronoi_geometry()?.covering_radius };
    let zero = vec![0i64; d];
    let mut m = (target as f64).powf(1.0 / d as f64).ceil() as usize;
    loop {
        let pts = midpoint_grid(&BoxDomain::cube(d, half), m);
        let inside: Vec<Vec<f64>> = pts.into_iter().filter(|y| lattice.decode(1.0, y) == zero).collect();
        if inside.len() >= target {
            return Ok(inside);
        }
        m += 1;
    }
}

/// `m^d` cell midpoints of the uniform subdivision of a box.
pub(crate) fn midpoint_grid(domain: &BoxDomain, m: usize) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let total = m.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.push(
            (0..d).map(|k| domain.lo[k] + (idx[k] as f64 + 0.5) * (domain.hi[k] - domain.lo[k]) / m as f64).collect(),
        );
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}
