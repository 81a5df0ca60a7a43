//! Truncation of measures by radial projection onto a ball, and the decay
//! conditions under which the truncation error stays below `ε`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::norm;
use crate::measure::{Atom, DensityMeasure, Measure, ShellMassSpec};

/// Radial probe points used for the density condition.
const RADIAL_PROBES: usize = 200;

/// Parameters of the three decay conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecaySpec {
    pub epsilon: f64,
    pub p: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Decay exponent of the atom weights.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Constant `C` of the density condition; defaults to the area of the
    /// unit sphere in dimension `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_constant: Option<f64>,
}

fn default_q() -> f64 {
    2.0
}

impl TailDecaySpec {
    pub fn new(epsilon: f64, p: f64, radius: f64, q: f64) -> Result<Self> {
        let s = Self { epsilon, p, radius, q, sphere_constant: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.radius > 0.0 && self.q > 1.0 && self.p >= 1.0)
            || !(self.epsilon.is_finite() && self.radius.is_finite() && self.q.is_finite() && self.p.is_finite())
        {
            return Err(invalid("tail spec needs epsilon > 0, R > 0, q > 1 and p >= 1"));
        }
        if matches!(self.sphere_constant, Some(c) if !(c > 0.0 && c.is_finite())) {
            return Err(invalid("sphere_constant must be positive"));
        }
        Ok(())
    }

    pub fn sphere_constant_for(&self, dim: usize) -> f64 {
        self.sphere_constant.unwrap_or_else(|| sphere_area(dim))
    }
}

/// `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// Riemann zeta for `q > 1` by Euler-Maclaurin summation.
pub fn zeta(q: f64) -> f64 {
    const N: usize = 32;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-q)).sum();
    head + n.powf(1.0 - q) / (q - 1.0) + 0.5 * n.powf(-q) + q * n.powf(-q - 1.0) / 12.0
        - q * (q + 1.0) * (q + 2.0) * n.powf(-q - 3.0) / 720.0
        + q * (q + 1.0) * (q + 2.0) * (q + 3.0) * (q + 4.0) * n.powf(-q - 5.0) / 30240.0
        - q * (q + 1.0) * (q + 2.0) * (q + 3.0) * (q + 4.0) * (q + 5.0) * (q + 6.0) * n.powf(-q - 7.0) / 1209600.0
}

/// `P_{B_R}(x)`: the identity inside the closed ball, `R x/|x|` outside.
pub fn project_point(x: &[f64], radius: f64) -> Vec<f64> {
    let r = norm(x);
    if r <= radius {
        x.to_vec()
    } else {
        x.iter().map(|v| v * radius / r).collect()
    }
}

/// `(P_{B_R})_♯ μ`; exact for discrete measures, through the quadrature
/// surrogate for densities.
pub fn project_to_ball(measure: &Measure, radius: f64) -> Result<Measure> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("projection radius must be positive"));
    }
    measure.pushforward(|x| project_point(x, radius))
}

/// `(∫_{|x|>R} (|x| - R)^p dμ)^{1/p}`, the cost of the projection coupling.
pub fn truncation_error(measure: &Measure, radius: f64, p: f64) -> Result<f64> {
    if !(radius > 0.0 && p >= 1.0 && p.is_finite()) {
        return Err(invalid("truncation_error needs R > 0 and p >= 1"));
    }
    let v = tail_integral(measure, radius, p)?;
    if !v.is_finite() {
        return Err(Error::MomentDivergence(format!("tail integral of order {p} is {v}")));
    }
    Ok(v.max(0.0).powf(1.0 / p))
}

fn excess(x: &[f64], radius: f64, p: f64) -> f64 {
    let r = norm(x);
    if r > radius {
        (r - radius).powf(p)
    } else {
        0.0
    }
}

fn tail_integral(measure: &Measure, radius: f64, p: f64) -> Result<f64> {
    Ok(match measure {
        Measure::Discrete(m) => m.atoms().iter().map(|a| a.weight * excess(&a.location, radius, p)).sum(),
        Measure::Density(m) => m.integrate(|x| excess(x, radius, p))?.0,
        Measure::Mixture(m) => {
            let mut acc = 0.0;
            for (w, c) in m.components() {
                acc += w * tail_integral(c, radius, p)?;
            }
            acc
        }
    })
}

/// Density evaluator for the first condition, probed on `R <= |x| <= r_max`.
pub struct DensityProbe<'a> {
    pub dim: usize,
    pub r_max: f64,
    pub f: Box<dyn Fn(&[f64]) -> f64 + 'a>,
}

impl<'a> DensityProbe<'a> {
    pub fn new(dim: usize, r_max: f64, f: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self { dim, r_max, f: Box::new(f) }
    }

    /// Probe over the support box of a density, scaled by the mixture weight
    /// the density carries.
    pub fn from_density(m: &'a DensityMeasure, weight: f64) -> Self {
        Self::new(m.dim(), m.support().max_norm(), move |x| weight * m.eval(x))
    }
}

/// Margin `1 - value/threshold` of one checked term; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermMargin {
    pub index: i64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    /// Bound on `I_1`, the density part of the tail integral.
    pub bound_ac: f64,
    /// Bound on `I_2` from the shell masses.
    pub bound_sc: f64,
    /// `I_3`, the atomic part, summed exactly.
    pub bound_atomic: f64,
    /// `(I_1 + I_2 + I_3)^{1/p}`.
    pub total_bound: f64,
    pub conditions_pass: [bool; 3],
    /// Smallest margin over the density probes (`None` without a density).
    pub density_margin: Option<f64>,
    pub shell_margins: Vec<TermMargin>,
    pub atom_margins: Vec<TermMargin>,
    /// 1-based atom positions violating the atom condition.
    pub offending_atoms: Vec<usize>,
    pub offending_shells: Vec<i64>,
    /// Normalization in force for the atom condition.
    pub atomic_normalization: String,
    pub zeta_q: f64,
    pub sphere_constant: f64,
    /// `I_1` bound is the certified one from the density condition rather
    /// than a quadrature estimate.
    pub ac_certified: bool,
}

impl TruncationReport {
    pub fn all_pass(&self) -> bool {
        self.conditions_pass.iter().all(|&b| b)
    }
}

/// Unit directions used to probe a density: both signs in d = 1, an angular
/// grid in d = 2, a Fibonacci sphere in d = 3, and axes plus diagonals above.
fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..128)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 128.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let n = 512;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut out = Vec::new();
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[i] = s;
                    out.push(e);
                }
            }
            let c = 1.0 / (dim as f64).sqrt();
            for mask in 0..(1usize << dim.min(10)) {
                out.push((0..dim).map(|i| if mask >> (i % 10) & 1 == 1 { c } else { -c }).collect());
            }
            out
        }
    }
}

/// Check the three decay conditions on the tail beyond `R` and bound its
/// three parts.
///
/// The density condition `f(x) <= ε^p / (3 C |x|^{p+d+1})` is probed on a
/// radial-angular grid; when it holds, `I_1 <= ε^p / (3 R (p+1))`, otherwise
/// `I_1` is estimated on the same grid. Shell `j` holds the singular mass of
/// `j < |x| <= j+1` and is checked for `j >= ⌊R⌋` against
/// `ε^p/(3 (j+1-R)^{p+2}) · 6/π²`; `I_2 <= Σ (j+1-R)^p m_j`. Atom `k` (1-based
/// position among `atoms`) with `|x_k| > R` is checked against
/// `ε^p/3 · k^{-q} (|x_k|-R)^{-p} / ζ(q)`, and `I_3` is summed exactly.
pub fn check_decay_conditions(
    density: Option<&DensityProbe<'_>>,
    shells: &ShellMassSpec,
    atoms: &[Atom],
    spec: &TailDecaySpec,
) -> Result<TruncationReport> {
    spec.validate()?;
    let (eps, p, r0, q) = (spec.epsilon, spec.p, spec.radius, spec.q);
    let target = eps.powf(p) / 3.0;
    let dim = density.map(|d| d.dim).or_else(|| atoms.first().map(|a| a.location.len())).unwrap_or(1);
    let c = spec.sphere_constant_for(dim);

    let (mut bound_ac, mut density_margin, mut pass_ac, mut ac_certified) = (0.0, None, true, true);
    if let Some(probe) = density {
        if probe.r_max > r0 {
            let dirs = probe_directions(probe.dim);
            let dr = (probe.r_max - r0) / RADIAL_PROBES as f64;
            let mut worst = f64::INFINITY;
            let mut estimate = 0.0;
            for i in 0..=RADIAL_PROBES {
                let r = r0 + i as f64 * dr;
                let threshold = target / (c * r.powf(p + probe.dim as f64 + 1.0));
                let mut shell_mean = 0.0;
                for u in &dirs {
                    let x: Vec<f64> = u.iter().map(|v| v * r).collect();
                    let f = (probe.f)(&x);
                    if !(f >= 0.0 && f.is_finite()) {
                        return Err(invalid(format!("density probe returned {f} at radius {r}")));
                    }
                    worst = worst.min(1.0 - f / threshold);
                    shell_mean += f / dirs.len() as f64;
                }
                let wt = if i == 0 || i == RADIAL_PROBES { 0.5 } else { 1.0 };
                estimate += wt * dr * c * r.powf(probe.dim as f64 - 1.0) * (r - r0).powf(p) * shell_mean;
            }
            pass_ac = worst >= 0.0;
            density_margin = Some(worst);
            if pass_ac {
                bound_ac = target / (r0 * (p + 1.0));
            } else {
                bound_ac = estimate;
                ac_certified = false;
            }
        } else {
            density_margin = Some(1.0);
        }
    }

    let first_shell = r0.floor() as i64;
    let mut shell_margins = Vec::new();
    let mut offending_shells = Vec::new();
    let mut bound_sc = 0.0;
    for (&j, &m) in &shells.shell_masses {
        if j < first_shell {
            continue;
        }
        let gap = j as f64 + 1.0 - r0;
        let threshold = target / gap.powf(p + 2.0) * 6.0 / (PI * PI);
        let margin = 1.0 - m / threshold;
        if margin < -1e-12 {
            offending_shells.push(j);
        }
        shell_margins.push(TermMargin { index: j, margin });
        bound_sc += gap.powf(p) * m;
    }

    let zeta_q = zeta(q);
    let mut atom_margins = Vec::new();
    let mut offending_atoms = Vec::new();
    let mut bound_atomic = 0.0;
    for (i, a) in atoms.iter().enumerate() {
        let k = i + 1;
        let r = norm(&a.location);
        if r <= r0 {
            continue;
        }
        let threshold = target / zeta_q * (k as f64).powf(-q) * (r - r0).powf(-p);
        let margin = 1.0 - a.weight / threshold;
        if margin < -1e-12 {
            offending_atoms.push(k);
        }
        atom_margins.push(TermMargin { index: k as i64, margin });
        bound_atomic += (r - r0).powf(p) * a.weight;
    }

    let total = bound_ac + bound_sc + bound_atomic;
    Ok(TruncationReport {
        bound_ac,
        bound_sc,
        bound_atomic,
        total_bound: total.powf(1.0 / p),
        conditions_pass: [pass_ac, offending_shells.is_empty(), offending_atoms.is_empty()],
        density_margin,
        shell_margins,
        atom_margins,
        offending_atoms,
        offending_shells,
        atomic_normalization: "1/zeta(q)".into(),
        zeta_q,
        sphere_constant: c,
        ac_certified,
    })
}

/// Decay report for a measure split into its density and atomic parts
/// (mixture weights folded in); there is no singular continuous part.
pub fn tail_report(measure: &Measure, spec: &TailDecaySpec) -> Result<TruncationReport> {
    let mut densities: Vec<(f64, &DensityMeasure)> = Vec::new();
    let mut atoms = Vec::new();
    collect_parts(measure, 1.0, &mut densities, &mut atoms);
    let probe = (!densities.is_empty()).then(|| {
        let r_max = densities.iter().map(|(_, d)| d.support().max_norm()).fold(0.0, f64::max);
        let parts = densities.clone();
        DensityProbe::new(measure.dim(), r_max, move |x| parts.iter().map(|(w, d)| w * d.eval(x)).sum())
    });
    // largest atoms first, which is the order the atom condition favors
    atoms.sort_by(|a: &Atom, b: &Atom| b.weight.total_cmp(&a.weight));
    check_decay_conditions(probe.as_ref(), &ShellMassSpec::default(), &atoms, spec)
}

fn collect_parts<'a>(m: &'a Measure, w: f64, dens: &mut Vec<(f64, &'a DensityMeasure)>, atoms: &mut Vec<Atom>) {
    match m {
        Measure::Discrete(d) => atoms.extend(d.atoms().iter().map(|a| Atom::new(a.location.clone(), w * a.weight))),
        Measure::Density(d) => dens.push((w, d)),
        Measure::Mixture(mix) => {
            for (cw, c) in mix.components() {
                collect_parts(c, w * cw, dens, atoms);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use crate::ot::wasserstein_lp;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atoms(pts: &[(Vec<f64>, f64)]) -> Measure {
        DiscreteMeasure::new(pts[0].0.len(), pts.iter().map(|(x, w)| Atom::new(x.clone(), *w)).collect())
            .unwrap()
            .into()
    }

    #[test]
    fn constants() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-13);
        // Apéry's constant, summed backwards to 10^7 terms plus the integral tail
        let direct: f64 = (1..10_000_000u64).rev().map(|k| (k as f64).powi(-3)).sum::<f64>() + 0.5e-14;
        assert!((zeta(3.0) - direct).abs() < 1e-13);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-13);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_point(&[3.0, 4.0], 1.0), vec![0.6, 0.8]);
        assert_eq!(project_point(&[0.3, -0.2], 1.0), vec![0.3, -0.2]);
        let mu = atoms(&[(vec![2.0, 0.0], 0.5), (vec![0.0, 0.25], 0.5)]);
        let Measure::Discrete(pr) = project_to_ball(&mu, 1.0).unwrap() else { panic!() };
        let want = DiscreteMeasure::from_weighted(2, vec![vec![1.0, 0.0], vec![0.0, 0.25]], &[0.5, 0.5]).unwrap();
        assert!(pr.approx_eq(&want, 1e-15));
        let Measure::Discrete(again) = project_to_ball(&pr.clone().into(), 1.0).unwrap() else { panic!() };
        assert!(again.approx_eq(&pr, 0.0));
    }

    #[test]
    fn truncation_examples() {
        let far = atoms(&[(vec![3.0, 0.0], 1.0)]);
        assert!((truncation_error(&far, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        let Measure::Discrete(pr) = project_to_ball(&far, 1.0).unwrap() else { panic!() };
        let Measure::Discrete(src) = far else { panic!() };
        assert!((wasserstein_lp(&src, &pr, 2.0).unwrap().0 - 2.0).abs() < 1e-12);
        let inside = atoms(&[(vec![0.3], 0.5), (vec![-0.9], 0.5)]);
        assert_eq!(truncation_error(&inside, 1.0, 1.0).unwrap(), 0.0);
        let two = atoms(&[(vec![2.0, 0.0], 0.5), (vec![0.0, 0.0], 0.5)]);
        assert!((truncation_error(&two, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projection_cost_bounds_the_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n = rng.random_range(1..100);
            let pts: Vec<(Vec<f64>, f64)> = (0..n)
                .map(|_| (vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)], rng.random_range(0.1..1.0)))
                .collect();
            let mu = atoms(&pts);
            let r = rng.random_range(0.5..3.0);
            let p = [1.0, 2.0][rng.random_range(0..2)];
            let Measure::Discrete(pr) = project_to_ball(&mu, r).unwrap() else { panic!() };
            let Measure::Discrete(src) = &mu else { panic!() };
            let w = wasserstein_lp(src, &pr, p).unwrap().0;
            assert!(w <= truncation_error(&mu, r, p).unwrap() + 1e-9);
        }
    }

    #[test]
    fn compact_support_passes_vacuously() {
        let spec = TailDecaySpec::new(0.1, 2.0, 1.0, 2.0).unwrap();
        let inside = vec![Atom::new(vec![0.5, 0.0], 1.0)];
        let r = check_decay_conditions(None, &ShellMassSpec::default(), &inside, &spec).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.total_bound, 0.0);
    }

    fn threshold_atoms(spec: &TailDecaySpec, count: usize) -> Vec<Atom> {
        (1..=count)
            .map(|k| {
                let r = spec.radius + 0.5 + (k % 7) as f64 * 0.3;
                let c = spec.epsilon.powf(spec.p) / (3.0 * zeta(spec.q))
                    * (k as f64).powf(-spec.q)
                    * (r - spec.radius).powf(-spec.p);
                Atom::new(vec![r, 0.0], c)
            })
            .collect()
    }

    #[test]
    fn threshold_atoms_saturate_the_atomic_bound() {
        let spec = TailDecaySpec::new(0.2, 2.0, 1.5, 2.5).unwrap();
        let count = 200_000;
        let r = check_decay_conditions(None, &ShellMassSpec::default(), &threshold_atoms(&spec, count), &spec).unwrap();
        assert!(r.conditions_pass[2]);
        assert!(r.atom_margins.iter().all(|m| m.margin.abs() < 1e-12));
        let target = spec.epsilon.powf(spec.p) / 3.0;
        // the tail of ζ beyond `count` terms is below count^{1-q}/(q-1)
        let missing = target * (count as f64).powf(1.0 - spec.q) / (spec.q - 1.0) / zeta(spec.q);
        assert!(r.bound_atomic <= target + 1e-15);
        assert!(target - r.bound_atomic <= missing + 1e-15);
        assert!(r.total_bound <= spec.epsilon + 1e-9);
    }

    #[test]
    fn violating_atom_is_named() {
        let spec = TailDecaySpec::new(0.2, 2.0, 1.0, 2.0).unwrap();
        let mut a = threshold_atoms(&spec, 10);
        a[3].weight *= 2.0;
        let r = check_decay_conditions(None, &ShellMassSpec::default(), &a, &spec).unwrap();
        assert!(!r.conditions_pass[2]);
        assert_eq!(r.offending_atoms, vec![4]);
    }

    #[test]
    fn shell_condition() {
        let spec = TailDecaySpec::new(0.3, 1.0, 2.0, 2.0).unwrap();
        let target = spec.epsilon / 3.0 * 6.0 / (PI * PI);
        let masses = (2..40).map(|j| (j, target / ((j as f64 - 1.0).powi(3)))).collect();
        let r = check_decay_conditions(None, &ShellMassSpec::new(masses).unwrap(), &[], &spec).unwrap();
        assert!(r.conditions_pass[1]);
        assert!(r.total_bound <= spec.epsilon);
        let bad = [(2i64, 1.0 * target), (1, 0.9)].into_iter().collect();
        let r = check_decay_conditions(None, &ShellMassSpec::new(bad).unwrap(), &[], &spec).unwrap();
        // shell 1 lies inside the ball and is not checked
        assert!(r.conditions_pass[1]);
        let worse = [(3i64, 0.5)].into_iter().collect();
        let r = check_decay_conditions(None, &ShellMassSpec::new(worse).unwrap(), &[], &spec).unwrap();
        assert_eq!(r.offending_shells, vec![3]);
    }

    #[test]
    fn density_condition() {
        let spec = TailDecaySpec::new(0.5, 2.0, 3.0, 2.0).unwrap();
        let g = DensityMeasure::gaussian(vec![0.0, 0.0], 0.5, 8.0).unwrap();
        let r = tail_report(&g.clone().into(), &spec).unwrap();
        assert!(r.conditions_pass[0] && r.ac_certified);
        assert!((r.bound_ac - 0.25 / 3.0 / 9.0).abs() < 1e-15);
        let wide = DensityMeasure::gaussian(vec![0.0, 0.0], 3.0, 8.0).unwrap();
        let r = tail_report(&wide.into(), &spec).unwrap();
        assert!(!r.conditions_pass[0] && !r.ac_certified);
        assert!(r.density_margin.unwrap() < 0.0);
        assert!(check_decay_conditions(
            Some(&DensityProbe::new(2, 5.0, |_| f64::NAN)),
            &ShellMassSpec::default(),
            &[],
            &spec
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn truncation_error_is_monotone(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(Vec<f64>, f64)> = (0..30)
                .map(|_| (vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)], rng.random_range(0.1..1.0)))
                .collect();
            let mu = atoms(&pts);
            let mut last = f64::INFINITY;
            for i in 1..=10 {
                let e = truncation_error(&mu, 0.6 * i as f64, 2.0).unwrap();
                prop_assert!(e <= last);
                last = e;
            }
        }
    }
}
