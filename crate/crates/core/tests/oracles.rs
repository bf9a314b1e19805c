//! Checks against oracles computed independently of the library code paths.

use std::sync::Arc;

use lee_lbm::harness::{self, GaussPulse, StudyConfig};
use lee_lbm::kinetic::{self, MacroState};
use lee_lbm::lattice::{self, LatticeName};
use lee_lbm::linalg::{self, CMatrix, C64};
use lee_lbm::reference;
use lee_lbm::solver::{self, Grid};
use lee_lbm::stability;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `∫ v^k N(0, θ) dv` by composite Simpson on `[-14σ, 14σ]`.
fn gaussian_moment(k: i32, theta: f64) -> f64 {
    let sigma = theta.sqrt();
    let (a, b) = (-14.0 * sigma, 14.0 * sigma);
    let n = 20_000;
    let h = (b - a) / n as f64;
    let f = |v: f64| v.powi(k) * (-v * v / (2.0 * theta)).exp() / (2.0 * std::f64::consts::PI * theta).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `⟨Π_α v_α^{p_α} M⟩` for the background Maxwellian in `d` dimensions.
fn maxwellian_moment(rho0: f64, theta0: f64, powers: &[i32]) -> f64 {
    rho0 * powers.iter().map(|&p| gaussian_moment(p, theta0)).product::<f64>()
}

#[test]
fn continuous_targets_match_quadrature() {
    for name in [LatticeName::D1Q3, LatticeName::D2Q5, LatticeName::D3Q7, LatticeName::D3Q13, LatticeName::D3Q19] {
        let set = name.build();
        let d = set.dimension;
        let (rho0, theta0) = (set.rho0, set.theta0);
        let report = lattice::check_moment_compatibility(&set).unwrap();
        let find = |n: &str| report.conditions.iter().find(|c| c.name == n).unwrap().continuous;
        let unit = |axis: usize, p: i32| -> Vec<i32> { (0..d).map(|a| if a == axis { p } else { 0 }).collect() };

        assert!((find("1") - maxwellian_moment(rho0, theta0, &vec![0; d])).abs() < 1e-12);
        let energy: f64 = (0..d).map(|a| 0.5 * maxwellian_moment(rho0, theta0, &unit(a, 2))).sum();
        assert!((find("|v|^2/2") - energy).abs() < 1e-12);
        assert!((find("v_x v_x") - maxwellian_moment(rho0, theta0, &unit(0, 2))).abs() < 1e-12);
        let heat: f64 = (0..d)
            .map(|b| {
                let mut p = unit(b, 2);
                p[0] += 2;
                0.5 * maxwellian_moment(rho0, theta0, &p)
            })
            .sum();
        assert!((find("|v|^2/2 v_x v_x") - heat).abs() < 1e-12, "{name}");
        let quartic: f64 = (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .map(|(a, b)| {
                let mut p = unit(a, 2);
                p[b] += 2;
                0.25 * maxwellian_moment(rho0, theta0, &p)
            })
            .sum();
        assert!((find("|v|^4/4") - quartic).abs() < 1e-12, "{name}");
        if d > 1 {
            assert!(find("v_x v_y").abs() < 1e-15);
        }
        assert!(report.passed());
    }
}

#[test]
fn d2q5_heat_flux_moment_value() {
    let report = lattice::check_moment_compatibility(&lattice::build_d2q5_mono()).unwrap();
    let c = report.conditions.iter().find(|c| c.name == "|v|^2/2 v_x v_x").unwrap();
    assert!((c.discrete - 0.125).abs() < 1e-15);
    assert!((c.continuous - 0.125).abs() < 1e-15);
}

fn to_nalgebra(m: &CMatrix) -> DMatrix<nalgebra::Complex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn amplification_spectra_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in [LatticeName::D2Q5, LatticeName::D3Q13, LatticeName::D3Q19, LatticeName::D3Q7Diatomic] {
        let set = name.build();
        let h = stability::build_h(&set, 0.5).unwrap();
        for _ in 0..10 {
            let k: Vec<f64> = (0..set.dimension).map(|_| rng.random_range(-3.1..3.1)).collect();
            let g = stability::build_gamma(&h, &k).unwrap().gamma;
            let ours = linalg::schur(&g).unwrap().eigenvalues();
            let theirs: Vec<C64> = to_nalgebra(&g).schur().eigenvalues().unwrap().iter().copied().collect();
            // eigenvalues of nearly degenerate clusters are only determined to ~sqrt(eps)
            assert!(spectrum_distance(&ours, &theirs) < 1e-6, "{name} {k:?}");
            let rho_ours = ours.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let rho_theirs = theirs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((rho_ours - rho_theirs).abs() < 1e-9);

            let sv = linalg::svd(&g).unwrap().singular_values;
            let mut sv_ref: Vec<f64> = to_nalgebra(&g).singular_values().iter().copied().collect();
            sv_ref.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in sv.iter().zip(&sv_ref) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn random_matrix_decompositions_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [3usize, 7, 13, 19, 27] {
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let ours = linalg::eigen(&a).unwrap();
        let theirs: Vec<C64> = to_nalgebra(&a).schur().eigenvalues().unwrap().iter().copied().collect();
        assert!(spectrum_distance(&ours.values, &theirs) < 1e-10, "n={n}");
        for k in 0..n {
            let v = ours.vectors.column(k);
            let av = a.mul_vec(&v);
            let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - ours.values[k] * y).norm()).fold(0.0, f64::max);
            assert!(r < 1e-11, "residual {r}");
        }
        let sv = linalg::svd(&a).unwrap();
        let sv_ref = to_nalgebra(&a).singular_values();
        let mut r: Vec<f64> = sv_ref.iter().copied().collect();
        r.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in sv.singular_values.iter().zip(&r) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn gauss_initialization_is_pointwise_equilibrium() {
    let set = Arc::new(lattice::build_d1q3());
    let grid = Grid::cubic(1, 100, 1.0).unwrap();
    let ic = reference::gauss_pulse(1, &grid).unwrap();
    let f = solver::initialize_equilibrium(&grid, set.clone(), &ic).unwrap();
    for s in 0..100 {
        let x = s as f64 / 100.0;
        let rho = (-100.0 * (x - 0.5) * (x - 0.5)).exp();
        let g = f.site(s);
        assert!((g[0] - 2.0 / 3.0 * rho).abs() < 1e-15);
        assert!((g[1] - rho / 6.0).abs() < 1e-15);
        assert!((g[2] - rho / 6.0).abs() < 1e-15);
    }
}

#[test]
fn d1q3_pulse_returns_after_one_period() {
    let set = Arc::new(lattice::build_d1q3());
    for n in [50usize, 128] {
        let grid = Grid::cubic(1, n, 1.0).unwrap();
        let ic = reference::gauss_pulse(1, &grid).unwrap();
        let f = solver::initialize_equilibrium(&grid, set.clone(), &ic).unwrap();
        let out = solver::run(f, n, 0.5, |_, _, _| {}).unwrap();
        assert!(out.macro_field().max_abs_diff(&ic) <= 1e-12);
    }
}

#[test]
fn d1q3_relaxation_time_is_immaterial() {
    // three moments on three velocities: E = I, hence H(τ) = I for every τ
    let set = lattice::build_d1q3();
    for tau in [0.5, 0.8, 1.0, 2.0] {
        let h = stability::build_h(&set, tau).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
    let mut cfg = StudyConfig::new(1.0, 1.0);
    cfg.tau = 1.0;
    let t = harness::convergence_vs_analytic(&set, &GaussPulse::new(1), &[50, 100], &cfg).unwrap();
    assert!(t.max_error() <= 1e-12);
}

#[test]
fn unit_relaxation_time_is_first_order_where_relaxation_acts() {
    let set = lattice::build_d2q5_mono();
    let mut cfg = StudyConfig::new(1.0, 2.0);
    cfg.tau = 1.0;
    let t = harness::convergence_self(&set, &GaussPulse::new(2), &[25, 50, 100], 400, &cfg).unwrap();
    let order = t.finest_order(0).unwrap();
    assert!(order > 0.7 && order < 1.5, "order {order}");
}

#[test]
fn moments_of_equilibrium_round_trip_for_custom_family() {
    let set = lattice::build_d3q_family(1.0, 0.35, 0.01).unwrap();
    assert_eq!(set.len(), 27);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let m = MacroState::random(&mut rng, 3);
        let back = kinetic::moments(&set, &kinetic::equilibrium(&set, &m));
        assert!(back.max_abs_diff(&m) < 1e-13);
    }
}
