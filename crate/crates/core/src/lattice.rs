//! Full-rank lattices `Λ = B Z^d`, nearest-point decoding with half-open
//! Voronoi cells, Voronoi cell geometry and covering counts.
//!
//! Cells are made pairwise disjoint by sending a point that is equidistant
//! to several lattice points to the one whose coordinate vector is
//! lexicographically smallest.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{determinant, dist_sq, inverse, norm, norm_sq, solve_linear, BoxDomain};

/// Coordinates of a lattice point with respect to the basis.
pub type CellId = Vec<i64>;

/// Enumerations larger than this are refused.
pub const ENUMERATION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    #[serde(rename = "Zd")]
    IntegerZd,
    #[serde(rename = "Dn")]
    CheckerboardDn,
    #[serde(rename = "A2")]
    HexagonalA2,
    #[serde(rename = "general")]
    General,
}

/// Diameter and covering radius of the Voronoi cell `V_0`, with the
/// relevant vectors (facet normals) and vertices when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiGeometry {
    pub diameter: f64,
    pub covering_radius: f64,
    pub relevant_vectors: Vec<Vec<f64>>,
    pub vertices: Vec<Vec<f64>>,
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    kind: LatticeKind,
    dim: usize,
    /// Row-major; column `j` is generator `j`.
    basis: Vec<f64>,
    inv: Vec<f64>,
    det: f64,
    geometry: Option<VoronoiGeometry>,
    /// Coefficient offsets searched around the initial estimate.
    offsets: Vec<Vec<i64>>,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim && self.basis == other.basis
    }
}

impl Lattice {
    pub fn integer(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let mut basis = vec![0.0; dim * dim];
        for i in 0..dim {
            basis[i * dim + i] = 1.0;
        }
        Self::build(LatticeKind::IntegerZd, dim, basis)
    }

    /// `D_n = {x ∈ Z^n : Σ x_i even}` with generators `(-1,-1,0,..)`,
    /// `(1,-1,0,..)`, `(0,1,-1,..)`, ..., `(0,..,1,-1)`.
    pub fn checkerboard(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("D_n needs n >= 2"));
        }
        let mut cols = vec![vec![0.0; dim]; dim];
        cols[0][0] = -1.0;
        cols[0][1] = -1.0;
        for (j, col) in cols.iter_mut().enumerate().skip(1) {
            col[j - 1] = 1.0;
            col[j] = -1.0;
        }
        Self::build(LatticeKind::CheckerboardDn, dim, columns_to_rows(&cols))
    }

    /// Hexagonal lattice with generators `(1, 0)` and `(1/2, √3/2)`.
    pub fn hexagonal() -> Result<Self> {
        let cols = vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]];
        Self::build(LatticeKind::HexagonalA2, 2, columns_to_rows(&cols))
    }

    /// Lattice generated by the given vectors. The basis is LLL-reduced, so
    /// cell coordinates refer to the reduced basis.
    pub fn general(generators: Vec<Vec<f64>>) -> Result<Self> {
        let dim = generators.len();
        if dim == 0 || generators.iter().any(|g| g.len() != dim) {
            return Err(invalid("general lattice needs d generators of length d"));
        }
        if generators.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("basis entries must be finite"));
        }
        let reduced = lll_reduce(generators, 0.75);
        Self::build(LatticeKind::General, dim, columns_to_rows(&reduced))
    }

    fn build(kind: LatticeKind, dim: usize, basis: Vec<f64>) -> Result<Self> {
        let det = determinant(&basis, dim);
        let scale = (0..dim).map(|j| (0..dim).map(|i| basis[i * dim + j].powi(2)).sum::<f64>().sqrt()).product::<f64>();
        if !(det.abs() > 1e-12 * scale.max(1e-300)) {
            return Err(invalid("basis is singular"));
        }
        let inv = inverse(&basis, dim).ok_or_else(|| invalid("basis is singular"))?;
        let mut lat = Self { kind, dim, basis, inv, det, geometry: None, offsets: Vec::new() };
        lat.geometry = lat.compute_geometry().ok();
        let search_radius = match kind {
            LatticeKind::IntegerZd => 0.0,
            // the closed-form decoder is exact; only ties need searching
            LatticeKind::CheckerboardDn => 2.0 * lat.rho_bound(),
            _ => lat.rho_bound() + lat.babai_error(),
        };
        if kind != LatticeKind::IntegerZd {
            lat.offsets = lat.points_within(search_radius * (1.0 + 1e-9) + 1e-12)?;
        }
        Ok(lat)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        let lat = match spec.kind {
            LatticeKind::IntegerZd => Self::integer(spec.dim)?,
            LatticeKind::CheckerboardDn => Self::checkerboard(spec.dim)?,
            LatticeKind::HexagonalA2 => {
                if spec.dim != 2 {
                    return Err(invalid("A2 is two-dimensional"));
                }
                Self::hexagonal()?
            }
            LatticeKind::General => {
                let b = spec.basis.clone().ok_or_else(|| invalid("general lattice needs \"basis\""))?;
                Self::general(b)?
            }
        };
        if lat.dim != spec.dim {
            return Err(invalid("lattice dim does not match basis"));
        }
        Ok(lat)
    }

    pub fn to_spec(&self) -> LatticeSpec {
        LatticeSpec {
            kind: self.kind,
            dim: self.dim,
            basis: (self.kind == LatticeKind::General).then(|| self.generators()),
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Generators (basis columns).
    pub fn generators(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|j| (0..self.dim).map(|i| self.basis[i * self.dim + j]).collect()).collect()
    }

    /// `|det B|`, the volume of every Voronoi cell of `Λ`.
    pub fn covolume(&self) -> f64 {
        self.det.abs()
    }

    /// `B c`.
    pub fn point(&self, coords: &[i64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.basis[i * d + j] * coords[j] as f64).sum()).collect()
    }

    /// Site `h B c` of a cell.
    pub fn site(&self, h: f64, coords: &[i64]) -> Vec<f64> {
        self.point(coords).into_iter().map(|v| h * v).collect()
    }

    fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.inv[i * d + j] * y[j]).sum()).collect()
    }

    /// Covering radius if known, else the rounding bound `½ Σ |b_j|`.
    fn rho_bound(&self) -> f64 {
        self.geometry.as_ref().map_or_else(|| self.babai_error(), |g| g.covering_radius)
    }

    fn babai_error(&self) -> f64 {
        0.5 * self.generators().iter().map(|g| norm(g)).sum::<f64>()
    }

    /// Cell of `x` in the partition by `hΛ`: the lattice point nearest to `x`,
    /// lexicographically smallest coordinates among equidistant ones.
    pub fn decode(&self, h: f64, x: &[f64]) -> CellId {
        debug_assert_eq!(x.len(), self.dim);
        if self.kind == LatticeKind::IntegerZd {
            // round half down: ties go to the smaller coordinate
            return x.iter().map(|v| (v / h - 0.5).ceil() as i64).collect();
        }
        let y: Vec<f64> = x.iter().map(|v| v / h).collect();
        let start = match self.kind {
            LatticeKind::CheckerboardDn => self.decode_dn_point(&y),
            _ => self.coefficients(&y).iter().map(|c| c.round() as i64).collect(),
        };
        self.refine(&y, &start)
    }

    fn decode_dn_point(&self, y: &[f64]) -> CellId {
        let f: Vec<f64> = y.iter().map(|v| v.round()).collect();
        let sum: f64 = f.iter().sum();
        let point = if (sum as i64).rem_euclid(2) == 0 {
            f
        } else {
            let (k, _) = y
                .iter()
                .zip(&f)
                .map(|(v, r)| (v - r).abs())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("dim >= 2");
            let mut g = f;
            g[k] += if y[k] >= g[k] { 1.0 } else { -1.0 };
            g
        };
        self.coefficients(&point).iter().map(|c| c.round() as i64).collect()
    }

    fn refine(&self, y: &[f64], start: &[i64]) -> CellId {
        let mut best_d2 = f64::INFINITY;
        let mut best: CellId = start.to_vec();
        let tol = 1e-12 * (1.0 + norm_sq(y));
        let mut cand = vec![0i64; self.dim];
        for off in &self.offsets {
            for k in 0..self.dim {
                cand[k] = start[k] + off[k];
            }
            let d2 = dist_sq(&self.point(&cand), y);
            if d2 < best_d2 - tol {
                best_d2 = d2;
                best.clone_from(&cand);
            } else if d2 <= best_d2 + tol && cand < best {
                best_d2 = best_d2.min(d2);
                best.clone_from(&cand);
            }
        }
        best
    }

    /// Cell diameter, covering radius, relevant vectors and vertices of `V_0`.
    pub fn voronoi_geometry(&self) -> Result<VoronoiGeometry> {
        self.geometry.clone().ok_or_else(|| Error::UnsupportedDimension {
            dim: self.dim,
            reason: "Voronoi geometry of general lattices is computed for d <= 4".into(),
        })
    }

    /// Closed-form geometry for the named families.
    pub fn closed_form_radius(&self) -> Option<f64> {
        let d = self.dim as f64;
        match self.kind {
            LatticeKind::IntegerZd => Some(d.sqrt() / 2.0),
            LatticeKind::CheckerboardDn => Some(1f64.max(d.sqrt() / 2.0)),
            LatticeKind::HexagonalA2 => Some(1.0 / 3f64.sqrt()),
            LatticeKind::General => None,
        }
    }

    fn compute_geometry(&self) -> Result<VoronoiGeometry> {
        let d = self.dim;
        let volume = self.covolume();
        if self.kind == LatticeKind::IntegerZd {
            let mut relevant = Vec::with_capacity(2 * d);
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    relevant.push(e);
                }
            }
            let vertices = if d <= 16 {
                (0..1usize << d)
                    .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { 0.5 } else { -0.5 }).collect())
                    .collect()
            } else {
                Vec::new()
            };
            let rho = (d as f64).sqrt() / 2.0;
            return Ok(VoronoiGeometry {
                diameter: 2.0 * rho,
                covering_radius: rho,
                relevant_vectors: relevant,
                vertices,
                volume,
            });
        }
        if d > 4 {
            if let Some(rho) = self.closed_form_radius() {
                return Ok(VoronoiGeometry {
                    diameter: 2.0 * rho,
                    covering_radius: rho,
                    relevant_vectors: Vec::new(),
                    vertices: Vec::new(),
                    volume,
                });
            }
            return Err(Error::UnsupportedDimension {
                dim: d,
                reason: "relevant-vector enumeration is limited to d <= 4".into(),
            });
        }
        let (relevant, vertices) = self.enumerate_cell()?;
        let rho_enum = vertices.iter().map(|v| norm(v)).fold(0.0, f64::max);
        let mut diam_enum: f64 = 0.0;
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[i + 1..] {
                diam_enum = diam_enum.max(dist_sq(a, b));
            }
        }
        let (diameter, covering_radius) = match self.closed_form_radius() {
            Some(rho) => (2.0 * rho, rho),
            None => (diam_enum.sqrt(), rho_enum),
        };
        Ok(VoronoiGeometry { diameter, covering_radius, relevant_vectors: relevant, vertices, volume })
    }

    /// Relevant vectors and vertices of `V_0` by enumeration (d <= 4).
    pub fn enumerate_cell(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let d = self.dim;
        let longest = self.generators().iter().map(|g| norm(g)).fold(0.0, f64::max);
        let cands: Vec<Vec<f64>> = self
            .points_within(2.0 * longest * (1.0 + 1e-9))?
            .iter()
            .filter(|c| c.iter().any(|v| *v != 0))
            .map(|c| self.point(c))
            .collect();
        // v is relevant iff |w|² - w·v > 0 for every lattice w ∉ {0, v}
        let relevant: Vec<Vec<f64>> = cands
            .iter()
            .filter(|v| {
                let vv = norm_sq(v);
                cands.iter().all(|w| {
                    if dist_sq(w, v) < 1e-18 * (1.0 + vv) {
                        return true;
                    }
                    let ww = norm_sq(w);
                    let wv: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    ww - wv > 1e-9 * (1.0 + vv)
                })
            })
            .cloned()
            .collect();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let m = relevant.len();
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            let a: Vec<f64> = idx.iter().flat_map(|&i| relevant[i].iter().copied()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| 0.5 * norm_sq(&relevant[i])).collect();
            if let Some(x) = solve_linear(&a, &b, d) {
                let feasible = relevant.iter().all(|v| {
                    let vx: f64 = v.iter().zip(&x).map(|(p, q)| p * q).sum();
                    vx <= 0.5 * norm_sq(v) + 1e-9
                });
                if feasible && !vertices.iter().any(|u| dist_sq(u, &x) < 1e-18) {
                    vertices.push(x);
                }
            }
            // next combination
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok((relevant, vertices));
                }
                k -= 1;
                if idx[k] < m - d + k {
                    idx[k] += 1;
                    for j in k + 1..d {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Inclusive coefficient bounds of the region `{B c : |B c| <= r}`.
    fn ball_coefficient_bounds(&self, r: f64) -> Vec<(i64, i64)> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row: f64 = (0..d).map(|j| self.inv[i * d + j].powi(2)).sum::<f64>().sqrt();
                let m = (r * row + 1e-9).floor() as i64;
                (-m, m)
            })
            .collect()
    }

    /// All coefficient vectors `c` with `|B c| <= r`.
    fn points_within(&self, r: f64) -> Result<Vec<CellId>> {
        let bounds = self.ball_coefficient_bounds(r);
        let mut out = Vec::new();
        for_each_in_box(&bounds, ENUMERATION_LIMIT, "lattice enumeration", |c| {
            if norm(&self.point(c)) <= r {
                out.push(c.to_vec());
            }
        })?;
        Ok(out)
    }

    /// `#{λ : |h B λ| <= R + h·rad(V_0)}`. The cells of these points cover
    /// `B_R`, so the count bounds the covering number `N(B_R, hV_0)`.
    pub fn covering_count(&self, h: f64, radius: f64) -> Result<u64> {
        if !(h > 0.0 && radius > 0.0) {
            return Err(invalid("covering_count needs h > 0 and R > 0"));
        }
        let rho = self.rho_bound();
        let r = (radius + h * rho) / h;
        let bounds = self.ball_coefficient_bounds(r * (1.0 + 1e-12));
        let mut count: u64 = 0;
        let tol = r * (1.0 + 1e-12);
        for_each_in_box(&bounds, 1e9, "covering enumeration", |c| {
            if norm(&self.point(c)) <= tol {
                count += 1;
            }
        })?;
        if count as f64 > ENUMERATION_LIMIT {
            return Err(Error::ResourceLimit {
                what: "covering count".into(),
                size: count as f64,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(count)
    }

    /// Every cell of `hΛ` whose closure meets `domain` (possibly more).
    pub fn cells_intersecting_box(&self, h: f64, domain: &BoxDomain) -> Result<Vec<CellId>> {
        if !(h > 0.0) || domain.dim() != self.dim {
            return Err(invalid("cells_intersecting_box needs h > 0 and a box of matching dimension"));
        }
        let grown = domain.inflate(h * self.rho_bound());
        let d = self.dim;
        let bounds: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                for j in 0..d {
                    let a = self.inv[i * d + j] / h;
                    let (p, q) = (a * grown.lo[j], a * grown.hi[j]);
                    lo += p.min(q);
                    hi += p.max(q);
                }
                ((lo - 1e-9).floor() as i64, (hi + 1e-9).ceil() as i64)
            })
            .collect();
        let mut out = Vec::new();
        for_each_in_box(&bounds, ENUMERATION_LIMIT, "cells in box", |c| out.push(c.to_vec()))?;
        Ok(out)
    }
}

/// Visit every integer vector in the inclusive box `bounds`, in
/// lexicographic order.
pub(crate) fn for_each_in_box(bounds: &[(i64, i64)], limit: f64, what: &str, mut f: impl FnMut(&[i64])) -> Result<()> {
    let size: f64 = bounds.iter().map(|(l, h)| (h - l + 1).max(0) as f64).product();
    if size > limit {
        return Err(Error::ResourceLimit { what: what.into(), size, limit });
    }
    if bounds.iter().any(|(l, h)| l > h) {
        return Ok(());
    }
    let mut c: Vec<i64> = bounds.iter().map(|b| b.0).collect();
    loop {
        f(&c);
        let mut k = c.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            if c[k] < bounds[k].1 {
                c[k] += 1;
                break;
            }
            c[k] = bounds[k].0;
        }
    }
}

fn columns_to_rows(cols: &[Vec<f64>]) -> Vec<f64> {
    let d = cols.len();
    let mut m = vec![0.0; d * d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            m[i * d + j] = col[i];
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook LLL on the given basis vectors.
fn lll_reduce(mut b: Vec<Vec<f64>>, delta: f64) -> Vec<Vec<f64>> {
    let n = b.len();
    let gram_schmidt = |b: &[Vec<f64>]| {
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&b[i], &bs[j]) / dot(&bs[j], &bs[j]);
                for (vk, bk) in v.iter_mut().zip(&bs[j]) {
                    *vk -= mu[i][j] * bk;
                }
            }
            bs.push(v);
        }
        (bs, mu)
    };
    let mut k = 1;
    let mut guard = 0;
    while k < n && guard < 10_000 {
        guard += 1;
        for j in (0..k).rev() {
            let (_, mu) = gram_schmidt(&b);
            let q = mu[k][j].round();
            if q != 0.0 {
                let bj = b[j].clone();
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
            }
        }
        let (bs, mu) = gram_schmidt(&b);
        if dot(&bs[k], &bs[k]) >= (delta - mu[k][k - 1].powi(2)) * dot(&bs[k - 1], &bs[k - 1]) {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = k.saturating_sub(1).max(1);
        }
    }
    b
}

/// JSON form: `{"kind": "Zd"|"Dn"|"A2"|"general", "dim": d, "basis": [...]}`
/// where `basis` lists the generators and is read only for `general`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Nearest lattice point by scanning every coefficient vector in a box,
    /// lexicographically smallest among minimizers.
    fn brute_decode(lat: &Lattice, h: f64, x: &[f64], reach: i64) -> CellId {
        let d = lat.dim();
        let bounds = vec![(-reach, reach); d];
        let mut best: Option<(f64, CellId)> = None;
        for_each_in_box(&bounds, 1e7, "brute", |c| {
            let d2 = dist_sq(&lat.site(h, c), x);
            match &best {
                Some((b, _)) if d2 > *b + 1e-12 => {}
                Some((b, id)) if (d2 - b).abs() <= 1e-12 && c >= id.as_slice() => {}
                _ => best = Some((d2, c.to_vec())),
            }
        })
        .unwrap();
        best.unwrap().1
    }

    #[test]
    fn decode_examples() {
        let z2 = Lattice::integer(2).unwrap();
        assert_eq!(z2.decode(1.0, &[0.2, 0.7]), vec![0, 1]);
        let z1 = Lattice::integer(1).unwrap();
        assert_eq!(z1.decode(1.0, &[0.5]), vec![0]);
        assert_eq!(z1.decode(1.0, &[-0.5]), vec![-1]);
        let a2 = Lattice::hexagonal().unwrap();
        let id = a2.decode(1.0, &[0.9, 0.1]);
        assert_eq!(id, brute_decode(&a2, 1.0, &[0.9, 0.1], 4));
        assert_eq!(id, vec![1, 0]);
        assert_eq!(a2.site(1.0, &id), vec![1.0, 0.0]);
    }

    #[test]
    fn boundary_points_take_the_lexicographically_smallest_cell() {
        let z2 = Lattice::integer(2).unwrap();
        assert_eq!(z2.decode(1.0, &[0.5, 0.5]), vec![0, 0]);
        assert_eq!(z2.decode(1.0, &[-0.5, 0.5]), vec![-1, 0]);
        assert_eq!(z2.decode(0.5, &[0.25, -0.75]), vec![0, -2]);
        let d2 = Lattice::checkerboard(2).unwrap();
        for x in [[0.5, 0.5], [1.0, 0.0], [0.0, 1.0], [-0.5, 0.5]] {
            assert_eq!(d2.decode(1.0, &x), brute_decode(&d2, 1.0, &x, 4), "{x:?}");
        }
    }

    #[test]
    fn geometry_closed_forms() {
        for d in 1..=4 {
            let g = Lattice::integer(d).unwrap().voronoi_geometry().unwrap();
            assert!((g.diameter - (d as f64).sqrt()).abs() < 1e-15);
            assert!((g.covering_radius - (d as f64).sqrt() / 2.0).abs() < 1e-15);
        }
        let g = Lattice::hexagonal().unwrap().voronoi_geometry().unwrap();
        assert!((g.diameter - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((g.covering_radius - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.vertices.len(), 6);
        assert_eq!(g.relevant_vectors.len(), 6);
    }

    #[test]
    fn enumeration_agrees_with_closed_forms() {
        // hexagon vertices are circumcentres of (0, b1, b2): radius 1/√3
        let lats = [
            Lattice::hexagonal().unwrap(),
            Lattice::checkerboard(2).unwrap(),
            Lattice::checkerboard(3).unwrap(),
            Lattice::checkerboard(4).unwrap(),
        ];
        for lat in &lats {
            let (_, vertices) = lat.enumerate_cell().unwrap();
            let rho = vertices.iter().map(|v| norm(v)).fold(0.0, f64::max);
            assert!((rho - lat.closed_form_radius().unwrap()).abs() < 1e-9, "{:?}", lat.kind());
        }
        let gen = Lattice::general(vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
        let g = gen.voronoi_geometry().unwrap();
        assert!((g.covering_radius - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!((g.diameter - 2.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn general_lattice_is_reduced_and_decodes() {
        // skewed basis of Z²
        let lat = Lattice::general(vec![vec![1.0, 0.0], vec![7.0, 1.0]]).unwrap();
        let g = lat.voronoi_geometry().unwrap();
        assert!((g.covering_radius - 0.5f64.hypot(0.5)).abs() < 1e-9);
        assert!((lat.covolume() - 1.0).abs() < 1e-12);
        let x = [0.3, -1.2];
        let site = lat.site(1.0, &lat.decode(1.0, &x));
        assert!((site[0] - 0.0).abs() < 1e-12 && (site[1] + 1.0).abs() < 1e-12);
        assert!(Lattice::general(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
        let big =
            Lattice::general((0..5).map(|i| (0..5).map(|j| f64::from(u8::from(i == j))).collect()).collect()).unwrap();
        assert!(matches!(big.voronoi_geometry(), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn relevant_midpoints_lie_on_the_cell_boundary() {
        for lat in [Lattice::hexagonal().unwrap(), Lattice::checkerboard(3).unwrap()] {
            let g = lat.voronoi_geometry().unwrap();
            for v in &g.relevant_vectors {
                let mid: Vec<f64> = v.iter().map(|c| c / 2.0).collect();
                // equidistant to 0 and v, and decodes to one of them
                let id = lat.decode(1.0, &mid);
                let s = lat.point(&id);
                assert!((dist_sq(&s, &mid) - norm_sq(&mid)).abs() < 1e-12);
            }
            assert!(g.covering_radius <= g.diameter && g.diameter <= 2.0 * g.covering_radius + 1e-12);
        }
    }

    #[test]
    fn covering_count_examples() {
        // brute force: Z¹, radius 0.4 + 0.5 = 0.9 contains only 0
        let z1 = Lattice::integer(1).unwrap();
        assert_eq!(z1.covering_count(1.0, 0.4).unwrap(), 1);
        // Z², radius 0.1 + √2/2 ≈ 0.807 contains only the origin
        let z2 = Lattice::integer(2).unwrap();
        assert_eq!(z2.covering_count(1.0, 0.1).unwrap(), 1);
        assert_eq!(z2.covering_count(1.0, 1.0).unwrap(), 9);
        assert!(z2.covering_count(1e-5, 1.0).is_err());
        for lat in [z2, Lattice::hexagonal().unwrap()] {
            for r in [1.0, 2.0] {
                let base = lat.covering_count(1.0, r).unwrap() as f64;
                for h in [0.5, 0.25] {
                    let c = lat.covering_count(h, r).unwrap() as f64;
                    assert!(c <= 9.0 * h.powi(-2) * base);
                }
            }
        }
    }

    #[test]
    fn cells_in_box_examples() {
        let z1 = Lattice::integer(1).unwrap();
        let b = BoxDomain::cube(1, 0.4);
        assert_eq!(z1.cells_intersecting_box(1.0, &b).unwrap(), vec![vec![-1], vec![0], vec![1]]);
        let ids = z1.cells_intersecting_box(0.25, &BoxDomain::cube(1, 0.5)).unwrap();
        for k in -2..=2 {
            assert!(ids.contains(&vec![k]));
        }
        let z2 = Lattice::integer(2).unwrap();
        let ids = z2.cells_intersecting_box(0.5, &BoxDomain::cube(2, 0.0)).unwrap();
        for c in [[0, 0], [-1, 0], [0, -1], [-1, -1], [1, 1]] {
            assert!(ids.contains(&c.to_vec()));
        }
    }

    #[test]
    fn cells_in_box_never_miss_a_cell() {
        let a2 = Lattice::hexagonal().unwrap();
        let b = BoxDomain::new(vec![-0.3, 0.1], vec![0.45, 0.6]).unwrap();
        let h = 0.2;
        let ids = a2.cells_intersecting_box(h, &b).unwrap();
        for i in 0..=40 {
            for j in 0..=40 {
                let x =
                    [b.lo[0] + (b.hi[0] - b.lo[0]) * i as f64 / 40.0, b.lo[1] + (b.hi[1] - b.lo[1]) * j as f64 / 40.0];
                assert!(ids.contains(&a2.decode(h, &x)));
            }
        }
    }

    #[test]
    fn spec_parsing() {
        let s: LatticeSpec = serde_json::from_str(r#"{"kind":"A2","dim":2}"#).unwrap();
        assert_eq!(Lattice::from_spec(&s).unwrap().kind(), LatticeKind::HexagonalA2);
        let s: LatticeSpec = serde_json::from_str(r#"{"kind":"general","dim":2,"basis":[[2,0],[0,1]]}"#).unwrap();
        assert!((Lattice::from_spec(&s).unwrap().covolume() - 2.0).abs() < 1e-12);
        let s: LatticeSpec = serde_json::from_str(r#"{"kind":"general","dim":2}"#).unwrap();
        assert!(Lattice::from_spec(&s).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn decode_partitions_space(
            x in prop::collection::vec(-3.0f64..3.0, 2),
            h in 0.01f64..=1.0,
            which in 0usize..3,
        ) {
            let lat = match which {
                0 => Lattice::integer(2).unwrap(),
                1 => Lattice::hexagonal().unwrap(),
                _ => Lattice::checkerboard(2).unwrap(),
            };
            let rho = lat.voronoi_geometry().unwrap().covering_radius;
            let id = lat.decode(h, &x);
            let site = lat.site(h, &id);
            prop_assert!(dist_sq(&site, &x).sqrt() <= h * rho + 1e-9);
            let scaled: Vec<f64> = x.iter().map(|v| v / h).collect();
            prop_assert_eq!(&id, &lat.decode(1.0, &scaled));
            let reach = (4.0 / h).ceil() as i64 + 2;
            if reach <= 60 {
                prop_assert_eq!(id, brute_decode(&lat, h, &x, reach));
            }
        }

        #[test]
        fn decode_matches_brute_force_in_3d(x in prop::collection::vec(-2.0f64..2.0, 3)) {
            let lat = Lattice::checkerboard(3).unwrap();
            prop_assert_eq!(lat.decode(1.0, &x), brute_decode(&lat, 1.0, &x, 4));
        }
    }
}
