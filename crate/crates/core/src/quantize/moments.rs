//! Radial moment inequalities for quantized measures and the N-term budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, BoxDomain};
use crate::lattice::Lattice;
use crate::measure::Measure;

use super::nodes::{midpoint_grid, CellKey};
use super::{check_p, located_nodes, mesh_norm, VoronoiScheme};

/// Grid points used to estimate sup-norms over unbounded site cells.
const SUP_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalityId {
    #[serde(rename = "L3.2.i")]
    LatticeSum,
    #[serde(rename = "L3.2.ii")]
    LatticeSup,
    #[serde(rename = "L3.2.iii")]
    LatticeCombined,
    #[serde(rename = "L5.1.i")]
    SitesSum,
    #[serde(rename = "L5.1.ii")]
    SitesSup,
    #[serde(rename = "L5.1.iii")]
    SitesCombined,
}

impl InequalityId {
    pub fn label(self) -> &'static str {
        match self {
            Self::LatticeSum => "L3.2.i",
            Self::LatticeSup => "L3.2.ii",
            Self::LatticeCombined => "L3.2.iii",
            Self::SitesSum => "L5.1.i",
            Self::SitesSup => "L5.1.ii",
            Self::SitesCombined => "L5.1.iii",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub inequality_id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
}

impl MomentBoundReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-9
    }
}

/// Both sides of the three radial estimates for `measure` on `scheme`.
///
/// With cell masses `m_V`, sites `s_V`, `S = Σ |s_V|^p m_V`,
/// `T = Σ sup_{x∈V} |x|^p m_V` and `r = h·rad(V_0)` (lattice) or the mesh
/// norm (sites):
/// (i) `S <= 2^{p-1} r^p + 2^{p-1} M_p`,
/// (ii) `T <= 2^{p-1} S + 2^{p-1} r^p`,
/// (iii) `T <= (2^{2p-2} + 2^{p-1}) r^p + 2^{p-1} M_p`.
///
/// Lattice sup-norms are exact (maximum over cell vertices). Site cells are
/// clipped to the ball enclosing the support, and their sup-norm is the
/// maximum over the site, the measure's nodes and a grid of that ball.
pub fn moment_bound_suite(measure: &Measure, scheme: &VoronoiScheme, p: f64) -> Result<Vec<MomentBoundReport>> {
    check_p(p)?;
    let (nodes, keys) = located_nodes(measure, scheme)?;
    let mut cells: BTreeMap<CellKey, (f64, f64)> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        let e = cells.entry(k.clone()).or_insert((0.0, 0.0));
        e.0 += nodes.weights[i];
        e.1 = e.1.max(norm(nodes.point(i)));
    }
    let mp = nodes.moment(p);
    let (r, ids) = match scheme {
        VoronoiScheme::Lattice { lattice, h } => {
            let g = lattice.voronoi_geometry()?;
            for (k, (_, sup)) in cells.iter_mut() {
                let site = scheme.site(k);
                *sup = if g.vertices.is_empty() {
                    norm(&site) + h * g.covering_radius
                } else {
                    g.vertices
                        .iter()
                        .map(|v| norm(&site.iter().zip(v).map(|(s, x)| s + h * x).collect::<Vec<_>>()))
                        .fold(0.0, f64::max)
                };
            }
            (h * g.covering_radius, [InequalityId::LatticeSum, InequalityId::LatticeSup, InequalityId::LatticeCombined])
        }
        VoronoiScheme::Sites { sites } => {
            let (center, radius) = super::enclosing_ball(&measure.support_box());
            let hx = mesh_norm(sites, &center, radius)?;
            let d = center.len();
            let m = ((SUP_GRID_POINTS as f64).powf(1.0 / d as f64).floor() as usize).max(2);
            let ball_box = BoxDomain::new(
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )?;
            let loc = super::nodes::Locator::new(scheme);
            for y in midpoint_grid(&ball_box, m) {
                if crate::geometry::dist(&y, &center) <= radius {
                    if let Some(e) = cells.get_mut(&loc.locate(&y)) {
                        e.1 = e.1.max(norm(&y));
                    }
                }
            }
            for (k, (_, sup)) in cells.iter_mut() {
                *sup = sup.max(norm(&scheme.site(k)));
            }
            (hx, [InequalityId::SitesSum, InequalityId::SitesSup, InequalityId::SitesCombined])
        }
    };
    let s: f64 = cells.iter().map(|(k, (m, _))| m * norm(&scheme.site(k)).powf(p)).sum();
    let t: f64 = cells.values().map(|(m, sup)| m * sup.powf(p)).sum();
    let c = 2f64.powf(p - 1.0);
    let rp = r.powf(p);
    Ok(vec![
        MomentBoundReport { inequality_id: ids[0], lhs: s, rhs: c * rp + c * mp },
        MomentBoundReport { inequality_id: ids[1], lhs: t, rhs: c * s + c * rp },
        MomentBoundReport { inequality_id: ids[2], lhs: t, rhs: (2f64.powf(2.0 * p - 2.0) + c) * rp + c * mp },
    ])
}

/// `h = 3 (𝒩 / N)^{1/d}` for a covering number `𝒩`; fails when `h > 1`.
pub fn h_for_covering(covering: u64, budget: usize, dim: usize) -> Result<f64> {
    let minimum = (3f64.powi(dim as i32) * covering as f64).ceil() as usize;
    if budget == 0 || budget < minimum {
        return Err(Error::BudgetInfeasible { given: budget, minimum });
    }
    let h = 3.0 * (covering as f64 / budget as f64).powf(1.0 / dim as f64);
    Ok(h.min(1.0))
}

/// Scale giving an approximant with at most `N` cells meeting `B_R`, using
/// `covering_count(1, R)` as the covering number of `B_R` by `V_0`.
pub fn choose_h_for_budget(lattice: &Lattice, radius: f64, budget: usize) -> Result<f64> {
    let covering = lattice.covering_count(1.0, radius)?;
    h_for_covering(covering, budget, lattice.dim())
}
