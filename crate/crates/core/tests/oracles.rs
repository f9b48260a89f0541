use std::sync::Arc;

use hjrate::experiments::{oracle_agreement_tol, richardson_scheme_error, LadderSolver};
use hjrate::hj_first_order::{
    residual_certificate, residual_tol, solve_first_order, solve_semi_lagrangian, solve_upwind_fd, FirstOrderScheme,
};
use hjrate::hj_viscous::{viscous_residual_tol, ViscousScheme};
use hjrate::{build_grid, data_library, DataParams, Domain, ProblemSpec};

/// Backward dynamic programming over piecewise-constant controls on the
/// lattice `k dx`, velocities `j dx / dt`, horizon `T`, trajectories kept in
/// `[0, 1]`. Running cost `c_p |v|^q` plus the exactly discounted data.
fn brute_force_distance(p: f64, nx: usize, dt: f64, kmax: i64, horizon: f64) -> Vec<f64> {
    let q = p / (p - 1.0);
    let cp = p.powf(-1.0 / (p - 1.0)) * (1.0 - 1.0 / p);
    let dx = 1.0 / nx as f64;
    let f: Vec<f64> = (0..=nx).map(|i| (i as f64 * dx).min(1.0 - i as f64 * dx)).collect();
    let disc = (-dt).exp();
    let steps = (horizon / dt).round() as usize;
    let mut v = vec![0.0; nx + 1];
    let mut next = vec![0.0; nx + 1];
    for _ in 0..steps {
        for i in 0..=nx {
            let stay = (1.0 - disc) * f[i];
            let mut best = f64::INFINITY;
            for k in -kmax..=kmax {
                let j = i as i64 + k;
                if j < 0 || j > nx as i64 {
                    continue;
                }
                let vel = k as f64 * dx / dt;
                let c = dt * cp * vel.abs().powf(q) + stay + disc * v[j as usize];
                best = best.min(c);
            }
            next[i] = best;
        }
        std::mem::swap(&mut v, &mut next);
    }
    v
}

// value of the same recursion computed once with an independent array
// implementation (dx = 1/2048, dt = 1/256, |k| <= 32, T = 20)
const DP_GOLDEN_MIDPOINT: f64 = 0.2502086329580863;

#[test]
fn distance_midpoint_matches_brute_force() {
    let dp = brute_force_distance(3.0, 2048, 1.0 / 256.0, 32, 20.0);
    let mid = dp[1024];
    assert!((mid - DP_GOLDEN_MIDPOINT).abs() < 1e-9, "{mid}");

    let d = Domain::interval(0.0, 1.0).unwrap();
    let s = ProblemSpec::new(d, 3.0, 1.0, 0.0, data_library(&d, &DataParams::Distance).unwrap()).unwrap();
    let h = 1.0 / 512.0;
    let g = Arc::new(build_grid(&d, h).unwrap());
    let fd = solve_upwind_fd(&s, &g, &FirstOrderScheme::upwind_fd()).unwrap();
    let sl = solve_semi_lagrangian(&s, &g, &FirstOrderScheme::semi_lagrangian()).unwrap();
    for u in [&fd.u, &sl.u] {
        let val = u.nearest_value(&[0.5]).unwrap();
        assert!((val - mid).abs() <= oracle_agreement_tol(h), "{val} vs {mid}");
    }
}

#[test]
fn semi_lagrangian_residual_is_certified() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let s = ProblemSpec::new(d, 3.0, 1.0, 0.0, data_library(&d, &DataParams::Distance).unwrap()).unwrap();
    for h in [1.0 / 128.0, 1.0 / 256.0] {
        let g = Arc::new(build_grid(&d, h).unwrap());
        let sl = solve_semi_lagrangian(&s, &g, &FirstOrderScheme::semi_lagrangian()).unwrap();
        let c = residual_certificate(&sl.u, &s).unwrap();
        assert!(c.interior_residual <= residual_tol(h), "{c:?}");
        assert!(c.boundary_deficit >= -residual_tol(h), "{c:?}");
        assert!(sl.final_update <= FirstOrderScheme::semi_lagrangian().sweep_tolerance);
    }
}

#[test]
fn bump_solution_vanishes_off_support() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let f = data_library(&d, &DataParams::Bump { center: vec![0.5], radius: 0.25, height: 1.0, kappa: None }).unwrap();
    let kappa = f.meta().support_margin.unwrap();
    let s = ProblemSpec::new(d, 3.0, 1.0, 0.0, f).unwrap();
    let g = Arc::new(build_grid(&d, 1.0 / 256.0).unwrap());
    for scheme in [FirstOrderScheme::upwind_fd(), FirstOrderScheme::semi_lagrangian()] {
        let r = solve_first_order(&s, &g, &scheme).unwrap();
        for a in 0..g.n_active() {
            let v = r.u.values()[a];
            assert!(v >= -2.0 * scheme.sweep_tolerance);
            if g.distance_to_boundary(a) < kappa {
                assert!(v <= 10.0 * scheme.sweep_tolerance, "u = {v} at {:?}", g.point(a));
            }
        }
    }
}

#[test]
fn richardson_examples() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let constant = ProblemSpec::new(d, 3.0, 1.0, 0.0, data_library(&d, &DataParams::Constant { value: 1.0 }).unwrap()).unwrap();
    let fd = FirstOrderScheme::upwind_fd();
    let r = richardson_scheme_error(&constant, 1.0 / 128.0, &LadderSolver::FirstOrder(fd)).unwrap();
    assert!(r.estimate <= 2.0 * fd.sweep_tolerance, "{r:?}");

    let distance = constant.with_data(data_library(&d, &DataParams::Distance).unwrap()).unwrap();
    let r = richardson_scheme_error(&distance, 1.0 / 128.0, &LadderSolver::FirstOrder(fd)).unwrap();
    assert!(r.monotone && (0.5..=1.0).contains(&r.order), "{r:?}");

    let zero = ProblemSpec::new(d, 3.0, 1.0, 1e-2, data_library(&d, &DataParams::Constant { value: 0.0 }).unwrap()).unwrap();
    let h = 1.0 / 128.0;
    let r = richardson_scheme_error(&zero, h, &LadderSolver::Viscous(ViscousScheme::default())).unwrap();
    assert!(r.estimate <= viscous_residual_tol(h, 1e-2), "{r:?}");
}
