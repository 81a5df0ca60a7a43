use super::*;
use crate::measure::{Atom, DensityMeasure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_cube(d: usize) -> Measure {
    DensityMeasure::uniform_box(BoxDomain::cube(d, 0.5)).into()
}

fn point(x: Vec<f64>) -> Measure {
    DiscreteMeasure::dirac(x).into()
}

/// Mass of `[(k-½)h, (k+½)h) ∩ [-½, ½]` under the uniform law on `[-½, ½]`.
fn interval_mass(k: i64, h: f64) -> f64 {
    let lo = ((k as f64 - 0.5) * h).max(-0.5);
    let hi = ((k as f64 + 0.5) * h).min(0.5);
    (hi - lo).max(0.0)
}

fn random_atoms(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Measure {
    let atoms = (0..n)
        .map(|_| Atom::new((0..d).map(|_| rng.random_range(-0.5..0.5)).collect(), rng.random_range(0.1..1.0)))
        .collect();
    DiscreteMeasure::new(d, atoms).unwrap().into()
}

#[test]
fn single_atom_lands_in_one_cell() {
    let a =
        quantize_lattice(&point(vec![0.3, 0.3]), &Lattice::integer(2).unwrap(), 1.0, ApproximantMode::Dirac).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a.cells[0].site, vec![0.0, 0.0]);
    assert_eq!(a.cells[0].mass, 1.0);
}

#[test]
fn uniform_interval_masses_match_interval_oracle() {
    for h in [0.5, 0.25, 0.125, 0.3] {
        let a = quantize_lattice(&uniform_cube(1), &Lattice::integer(1).unwrap(), h, ApproximantMode::Dirac).unwrap();
        for c in &a.cells {
            let CellRef::Lattice(id) = &c.cell else { panic!() };
            assert!((c.mass - interval_mass(id[0], h)).abs() < 1e-14, "h={h} cell {id:?}");
            assert!((c.site[0] - id[0] as f64 * h).abs() < 1e-15);
        }
        assert!((a.total_mass() - 1.0).abs() < 1e-12);
    }
    let a = quantize_lattice(&uniform_cube(1), &Lattice::integer(1).unwrap(), 0.5, ApproximantMode::Dirac).unwrap();
    let got: Vec<(f64, f64)> = a.cells.iter().map(|c| (c.site[0], c.mass)).collect();
    let want = [(-0.5, 0.25), (0.0, 0.5), (0.5, 0.25)];
    for (g, w) in got.iter().zip(&want) {
        assert!((g.0 - w.0).abs() < 1e-15 && (g.1 - w.1).abs() < 1e-14, "{got:?}");
    }
}

#[test]
fn measures_on_sites_are_fixed_points() {
    let lat = Lattice::hexagonal().unwrap();
    let h = 0.25;
    let sites: Vec<Vec<f64>> = [[0, 0], [1, -2], [3, 1]].iter().map(|c| lat.site(h, c)).collect();
    let mu = DiscreteMeasure::from_weighted(2, sites, &[0.2, 0.5, 0.3]).unwrap();
    let a = quantize_lattice(&mu.clone().into(), &lat, h, ApproximantMode::Dirac).unwrap();
    assert!(a.dirac_measure().unwrap().approx_eq(&mu, 1e-15));
    assert!(coupling_cost(&mu.into(), &a, 2.0).unwrap() < 1e-15);
}

#[test]
fn idempotent_on_dirac_realization() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu = random_atoms(&mut rng, 2, 40);
    for scheme in [
        VoronoiScheme::lattice(Lattice::integer(2).unwrap(), 0.25).unwrap(),
        VoronoiScheme::lattice(Lattice::hexagonal().unwrap(), 0.5).unwrap(),
        VoronoiScheme::sites((0..10).map(|_| vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect())
            .unwrap(),
    ] {
        let a = quantize(&mu, &scheme, ApproximantMode::Dirac).unwrap();
        let b = quantize(&a.dirac_measure().unwrap().into(), &scheme, ApproximantMode::Dirac).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!(x.site, y.site);
            assert_eq!(x.cell, y.cell);
            assert!((x.mass - y.mass).abs() < 1e-15);
        }
    }
}

#[test]
fn nonuniform_examples() {
    let mu: Measure = DensityMeasure::uniform_box(BoxDomain::new(vec![0.0], vec![1.0]).unwrap()).into();
    let a = quantize_nonuniform(&mu, &[vec![0.0], vec![1.0]], ApproximantMode::Dirac).unwrap();
    assert_eq!(a.len(), 2);
    assert!(a.cells.iter().all(|c| (c.mass - 0.5).abs() < 1e-14));
    let a = quantize_nonuniform(&uniform_cube(2), &[vec![0.7, -3.0]], ApproximantMode::Dirac).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a.cells[0].mass, 1.0);
    assert!(quantize_nonuniform(&mu, &[], ApproximantMode::Dirac).is_err());
    assert!(quantize_nonuniform(&mu, &[vec![0.2], vec![0.2]], ApproximantMode::Dirac).is_err());
}

#[test]
fn site_ties_go_to_the_smallest_index() {
    let a = quantize_nonuniform(&point(vec![0.5]), &[vec![1.0], vec![0.0]], ApproximantMode::Dirac).unwrap();
    assert_eq!(a.cells[0].cell, CellRef::Site(0));
}

#[test]
fn grid_sites_reproduce_the_lattice_path() {
    for (d, h) in [(1usize, 0.125f64), (2, 0.25)] {
        let k = (0.5 / h).round() as i64;
        let mut sites = vec![vec![]];
        for _ in 0..d {
            sites = sites
                .into_iter()
                .flat_map(|s: Vec<f64>| (-k..=k).map(move |j| [s.clone(), vec![j as f64 * h]].concat()))
                .collect();
        }
        let mu = uniform_cube(d);
        let lat = quantize_lattice(&mu, &Lattice::integer(d).unwrap(), h, ApproximantMode::Dirac).unwrap();
        let non = quantize_nonuniform(&mu, &sites, ApproximantMode::Dirac).unwrap();
        assert_eq!(lat.len(), non.len());
        let mut by_site: Vec<(Vec<f64>, f64)> = non.cells.iter().map(|c| (c.site.clone(), c.mass)).collect();
        by_site.sort_by(|a, b| crate::geometry::lex_cmp(&a.0, &b.0));
        for (c, (s, m)) in lat.cells.iter().zip(&by_site) {
            assert!(crate::geometry::dist(&c.site, s) < 1e-15);
            assert!((c.mass - m).abs() < 1e-12);
        }
    }
}

#[test]
fn coupling_examples() {
    let a =
        quantize_lattice(&point(vec![0.3, 0.4]), &Lattice::integer(2).unwrap(), 1.0, ApproximantMode::Dirac).unwrap();
    for p in [1.0, 2.0, 3.7] {
        assert!((coupling_cost(&point(vec![0.3, 0.4]), &a, p).unwrap() - 0.5).abs() < 1e-15);
    }
    for n in [2, 3, 8, 17, 64] {
        let h = 1.0 / n as f64;
        let a = quantize_lattice(&uniform_cube(1), &Lattice::integer(1).unwrap(), h, ApproximantMode::Dirac).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let exact = h / (2.0 * (p + 1.0f64).powf(1.0 / p));
            assert!((coupling_cost(&uniform_cube(1), &a, p).unwrap() - exact).abs() < 1e-12, "n={n} p={p}");
        }
    }
}

#[test]
fn distances_agree_across_solvers_in_one_dimension() {
    let mu = uniform_cube(1);
    let a = quantize_lattice(&mu, &Lattice::integer(1).unwrap(), 0.125, ApproximantMode::Dirac).unwrap();
    let ev = evaluate(&mu, &a, 2.0).unwrap();
    assert_eq!(ev.method, WpMethod::Line);
    let (nodes, _) = attach(&mu, &a).unwrap();
    let lp = wasserstein_lp(&nodes.to_measure().unwrap(), &a.dirac_measure().unwrap(), 2.0).unwrap().0;
    assert!((lp - ev.measured).abs() < 1e-9 && (ev.coupling - ev.measured).abs() < 1e-9);
    assert!((ev.measured - 0.125 / 12f64.sqrt()).abs() < 1e-12);
}

#[test]
fn lattice_bound_holds_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..12 {
        let (lat, mu) = match trial % 3 {
            0 => (Lattice::integer(2).unwrap(), random_atoms(&mut rng, 2, 30)),
            1 => (Lattice::hexagonal().unwrap(), uniform_cube(2)),
            _ => (Lattice::checkerboard(3).unwrap(), random_atoms(&mut rng, 3, 30)),
        };
        let h = [0.5, 0.25][trial % 2];
        let mode = if trial % 4 == 3 { ApproximantMode::Indicator } else { ApproximantMode::Dirac };
        let a = quantize_lattice(&mu, &lat, h, mode).unwrap();
        let ev = evaluate(&mu, &a, 2.0).unwrap();
        let diam = lat.voronoi_geometry().unwrap().diameter;
        assert!(ev.measured <= ev.coupling + 1e-8, "trial {trial}: {ev:?}");
        assert!(ev.coupling <= diam * h + 1e-9, "trial {trial}: {ev:?}");
    }
}

#[test]
fn indicator_mode_on_a_small_grid() {
    let mu = uniform_cube(2);
    let a = quantize_lattice(&mu, &Lattice::integer(2).unwrap(), 0.5, ApproximantMode::Indicator).unwrap();
    let real = a.realization().unwrap();
    assert!((real.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let ev = evaluate(&mu, &a, 1.0).unwrap();
    assert_eq!(ev.method, WpMethod::Lp);
    assert!(ev.measured <= ev.coupling + 1e-8 && ev.coupling <= 2f64.sqrt() * 0.5);
}

#[test]
fn indicator_refinement_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (Lattice::integer(2).unwrap(), random_atoms(&mut rng, 2, 40), 0.25),
        (Lattice::hexagonal().unwrap(), random_atoms(&mut rng, 2, 40), 0.25),
        (Lattice::checkerboard(3).unwrap(), random_atoms(&mut rng, 3, 20), 0.5),
    ];
    for (lat, mu, h) in cases {
        let a = quantize_lattice(&mu, &lat, h, ApproximantMode::Indicator).unwrap();
        let Measure::Discrete(src) = &mu else { unreachable!() };
        let coarse = wasserstein_lp(src, &a.realization_with(16).unwrap(), 2.0).unwrap().0;
        let fine = wasserstein_lp(src, &a.realization_with(32).unwrap(), 2.0).unwrap().0;
        assert!((fine - coarse).abs() < 0.02 * coarse, "{lat:?}: {coarse} vs {fine}");
    }
}

#[test]
fn nonuniform_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mu = uniform_cube(2);
    let (center, radius) = enclosing_ball(&mu.support_box());
    for mode in [ApproximantMode::Dirac, ApproximantMode::Indicator] {
        let sites: Vec<Vec<f64>> =
            (0..20).map(|_| vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect();
        let hx = mesh_norm(&sites, &center, radius).unwrap();
        let a = quantize_nonuniform(&mu, &sites, mode).unwrap();
        let ev = evaluate(&mu, &a, 2.0).unwrap();
        assert!(ev.measured <= ev.coupling + 1e-8);
        assert!(ev.coupling <= 2.0 * hx, "{ev:?} vs {hx}");
    }
}

#[test]
fn mismatched_approximant_is_rejected() {
    let mu = uniform_cube(1);
    let a = quantize_lattice(&mu, &Lattice::integer(1).unwrap(), 0.5, ApproximantMode::Dirac).unwrap();
    assert!(coupling_cost(&point(vec![0.1]), &a, 1.0).is_err());
    assert!(coupling_cost(&uniform_cube(2), &a, 1.0).is_err());
}

#[test]
fn json_round_trip_is_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mu = random_atoms(&mut rng, 2, 25);
    for scheme in [
        VoronoiScheme::lattice(Lattice::hexagonal().unwrap(), 0.3).unwrap(),
        VoronoiScheme::sites(vec![vec![0.1, 0.2], vec![-0.3, 0.1 + 1e-13]]).unwrap(),
    ] {
        let a = quantize(&mu, &scheme, ApproximantMode::Indicator).unwrap();
        let back = Approximant::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
    }
    let json =
        quantize(&mu, &VoronoiScheme::lattice(Lattice::integer(2).unwrap(), 0.5).unwrap(), ApproximantMode::Dirac)
            .unwrap()
            .to_json()
            .unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["mode"], "dirac");
    assert_eq!(v["scheme"]["type"], "lattice");
    assert!(v["cells"][0]["site"].is_array() && v["cells"][0]["mass"].is_number());
}

#[test]
fn gaussian_cells_conserve_mass() {
    let g: Measure = DensityMeasure::gaussian(vec![0.1, -0.2], 0.15, 8.0).unwrap().into();
    for lat in [Lattice::integer(2).unwrap(), Lattice::hexagonal().unwrap()] {
        let a = quantize_lattice(&g, &lat, 0.125, ApproximantMode::Dirac).unwrap();
        assert!((a.total_mass() - 1.0).abs() < 1e-10);
        assert!(a.cells.iter().all(|c| c.mass > 0.0));
    }
}

#[test]
fn moment_suite_examples() {
    let zero = point(vec![0.0, 0.0]);
    for scheme in [
        VoronoiScheme::lattice(Lattice::integer(2).unwrap(), 0.5).unwrap(),
        VoronoiScheme::sites(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap(),
    ] {
        let reps = moment_bound_suite(&zero, &scheme, 2.0).unwrap();
        assert_eq!(reps.len(), 3);
        assert_eq!(reps[0].lhs, 0.0);
        assert!(reps.iter().all(MomentBoundReport::holds));
    }
    // uniform[-½,½] on ½Z, p = 2: sites ±½ carry ¼ each and their cells reach
    // |x| = ¾; the middle cell carries ½ and reaches ¼
    let reps =
        moment_bound_suite(&uniform_cube(1), &VoronoiScheme::lattice(Lattice::integer(1).unwrap(), 0.5).unwrap(), 2.0)
            .unwrap();
    let s = 2.0 * 0.25 * 0.25;
    let t = 2.0 * 0.25 * 0.75f64.powi(2) + 0.5 * 0.25f64.powi(2);
    let m2 = 1.0 / 12.0;
    let r2 = 0.25f64.powi(2);
    assert!((reps[0].lhs - s).abs() < 1e-14 && (reps[0].rhs - (2.0 * r2 + 2.0 * m2)).abs() < 1e-14);
    assert!((reps[1].lhs - t).abs() < 1e-14 && (reps[1].rhs - (2.0 * s + 2.0 * r2)).abs() < 1e-14);
    assert!((reps[2].rhs - (6.0 * r2 + 2.0 * m2)).abs() < 1e-14);
    assert!(reps.iter().all(MomentBoundReport::holds));
}

#[test]
fn budget_examples() {
    for d in 1..=3 {
        assert_eq!(h_for_covering(1, 3usize.pow(d as u32), d).unwrap(), 1.0);
        assert!((h_for_covering(1, 6usize.pow(d as u32), d).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            h_for_covering(1, 3usize.pow(d as u32) - 1, d),
            Err(Error::BudgetInfeasible { minimum, .. }) if minimum == 3usize.pow(d as u32)
        ));
    }
}

#[test]
fn budget_keeps_term_count_below_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let lat = match rng.random_range(0..3) {
            0 => Lattice::integer(2).unwrap(),
            1 => Lattice::hexagonal().unwrap(),
            _ => Lattice::integer(1).unwrap(),
        };
        let d = lat.dim();
        let r = rng.random_range(0.2..2.0);
        let cov = lat.covering_count(1.0, r).unwrap();
        let n = (3f64.powi(d as i32) * cov as f64).ceil() as usize + rng.random_range(0..400);
        let h = choose_h_for_budget(&lat, r, n).unwrap();
        // every cell meeting B_R has its site within R + h·rad(V_0)
        let terms = lat.covering_count(h, r).unwrap();
        assert!(terms as usize <= n, "{terms} > {n}");
        // a measure spread over the ball never uses more than that
        let mut atoms = Vec::new();
        for _ in 0..300 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = r * 0.999 / crate::geometry::norm(&x).max(1.0);
            atoms.push(Atom::new(x.iter().map(|v| v * s).collect(), 1.0));
        }
        let mu: Measure = DiscreteMeasure::new(d, atoms).unwrap().into();
        assert!(quantize_lattice(&mu, &lat, h, ApproximantMode::Dirac).unwrap().len() <= n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masses_sum_to_one(seed in 0u64..10_000, h in 0.05f64..1.0, kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = [Lattice::integer(2).unwrap(), Lattice::hexagonal().unwrap(), Lattice::checkerboard(2).unwrap()][kind].clone();
        let mu = random_atoms(&mut rng, 2, 20);
        let a = quantize_lattice(&mu, &lat, h, ApproximantMode::Dirac).unwrap();
        prop_assert!((a.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(a.cells.iter().all(|c| c.mass > 0.0));
        let ev = evaluate(&mu, &a, 1.0).unwrap();
        prop_assert!(ev.coupling <= lat.voronoi_geometry().unwrap().diameter * h + 1e-9);
    }

    #[test]
    fn moment_inequalities_hold(seed in 0u64..10_000, p in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_atoms(&mut rng, 2, 15);
        let sites: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)]).collect();
        for scheme in [VoronoiScheme::lattice(Lattice::hexagonal().unwrap(), 0.3).unwrap(), VoronoiScheme::sites(sites).unwrap()] {
            for r in moment_bound_suite(&mu, &scheme, p).unwrap() {
                prop_assert!(r.holds(), "{:?}", r);
            }
        }
    }
}
