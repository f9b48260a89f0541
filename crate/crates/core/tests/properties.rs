use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjrate::analysis::{inf_convolution, sup_convolution, theoretical_constants};
use hjrate::experiments::fit_rate;
use hjrate::hamiltonian::{hamiltonian_value, lagrangian_value, legendre_gap, DataMeta, SamplingPlan};
use hjrate::hj_first_order::{solve_upwind_fd, FirstOrderScheme};
use hjrate::{build_grid, data_library, DataFunction, DataParams, Domain, Exponents, GridFunction, ProblemSpec};

fn annulus() -> Domain {
    Domain::annulus([0.1, -0.2], 0.4, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_eikonal_near_boundary(r in 0.0f64..1.0, t in 0.0f64..std::f64::consts::TAU) {
        let d = annulus();
        let delta = d.smoothness_radius();
        // radius inside one of the two boundary bands
        let rad = if r < 0.5 { 0.4 + 2.0 * r * delta } else { 1.0 - 2.0 * (r - 0.5) * delta };
        let x = [0.1 + rad * t.cos(), -0.2 + rad * t.sin()];
        let hfd = 1e-5;
        let gx = (d.distance_to_boundary(&[x[0] + hfd, x[1]]) - d.distance_to_boundary(&[x[0] - hfd, x[1]])) / (2.0 * hfd);
        let gy = (d.distance_to_boundary(&[x[0], x[1] + hfd]) - d.distance_to_boundary(&[x[0], x[1] - hfd])) / (2.0 * hfd);
        prop_assert!(((gx * gx + gy * gy).sqrt() - 1.0).abs() <= 10.0 * hfd);
    }

    #[test]
    fn projection_lands_in_closure(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        for d in [annulus(), Domain::disk([0.0, 0.0], 1.0).unwrap()] {
            let p = d.project_onto_closure(&[x, y]);
            prop_assert!(d.distance_to_closure(&p) <= 1e-12);
            let q = d.project_onto_closure(&p);
            prop_assert!((p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12);
            if d.contains(&[x, y]) {
                prop_assert!((p[0] - x).abs() <= 1e-15 && (p[1] - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn boundary_normals_are_unit(t in 0.0f64..1.0) {
        for d in [annulus(), Domain::disk([0.3, 0.0], 2.0).unwrap()] {
            let x0 = d.boundary_point(t);
            let n = d.inward_normal(&x0).unwrap();
            prop_assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-12);
            let inside = [x0[0] + 1e-3 * n[0], x0[1] + 1e-3 * n[1]];
            prop_assert!(d.contains(&inside));
        }
    }

    #[test]
    fn fenchel_young(p in 2.05f64..6.0, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, e in -3.0f64..3.0) {
        let ex = Exponents::new(p).unwrap();
        let xi = [a, b];
        let v = [c, e];
        let dot = a * c + b * e;
        prop_assert!(dot <= hamiltonian_value(&ex, 0.0, &xi) + lagrangian_value(&ex, 0.0, &v) + 1e-9 * (1.0 + dot.abs()));
        let vs = ex.optimal_control(&xi);
        let eq = xi[0] * vs[0] + xi[1] * vs[1] - lagrangian_value(&ex, 0.0, &vs);
        prop_assert!((eq - hamiltonian_value(&ex, 0.0, &xi)).abs() <= 1e-9 * (1.0 + eq.abs()));
    }

    #[test]
    fn sampled_legendre_gap_is_small(p in 2.05f64..6.0, a in -2.0f64..2.0) {
        let ex = Exponents::new(p).unwrap();
        let gap = legendre_gap(&ex, &[a], &SamplingPlan::default());
        let scale = 1.0 + a.abs().powf(p);
        prop_assert!(gap >= -1e-12 * scale && gap <= 1e-6 * scale, "gap {}", gap);
    }

    #[test]
    fn sup_convolution_dominates_and_is_monotone(
        vals in prop::collection::vec(-1.0f64..1.0, 80),
        bumps in prop::collection::vec(0.0f64..0.5, 80),
        theta in 0.001f64..1.0,
    ) {
        let g = Arc::new(build_grid(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 64.0).unwrap());
        let n = g.n_active();
        let vals = &vals[..n];
        let v = GridFunction::new(g.clone(), vals.to_vec()).unwrap();
        let w = GridFunction::new(g.clone(), vals.iter().zip(&bumps).map(|(a, b)| a + b).collect()).unwrap();
        let uv = sup_convolution(&v, theta).unwrap();
        let uw = sup_convolution(&w, theta).unwrap();
        let neg = GridFunction::new(g.clone(), vals.iter().map(|x| -x).collect()).unwrap();
        let dual = inf_convolution(&neg, theta).unwrap();
        for i in 0..n {
            prop_assert!(uv.values()[i] >= vals[i]);
            prop_assert!(uv.values()[i] <= uw.values()[i]);
            prop_assert_eq!(dual.values()[i], -uv.values()[i]);
        }
    }

    #[test]
    fn constants_are_monotone_in_metadata(
        lip in 0.1f64..5.0, osc in 0.1f64..2.0, sup in 0.1f64..3.0,
        dl in 0.0f64..1.0, dosc in 0.0f64..1.0, dsup in 0.0f64..1.0, shrink in 0.3f64..1.0,
        p in 2.1f64..5.0, lambda in 0.1f64..1.0,
    ) {
        let e = Exponents::new(p).unwrap();
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let small = Domain::interval(0.0, shrink).unwrap();
        let data = |l: f64, o: f64, s: f64| {
            let meta = DataMeta { lipschitz: Some(l), osc: Some(o), sup: Some(s), inf: Some(s - o), ..Default::default() };
            DataFunction::from_fn("synthetic", &dom, meta, |_: &[f64]| 0.0)
        };
        let base = theoretical_constants(&data(lip, osc, sup), &dom, &e, lambda, 1).unwrap();
        let more_lip = theoretical_constants(&data(lip + dl, osc, sup), &dom, &e, lambda, 1).unwrap();
        let more_osc = theoretical_constants(&data(lip, osc + dosc, sup), &dom, &e, lambda, 1).unwrap();
        let more_sup = theoretical_constants(&data(lip, osc, sup + dsup), &dom, &e, lambda, 1).unwrap();
        let thinner = theoretical_constants(&data(lip, osc, sup), &small, &e, lambda, 1).unwrap();
        prop_assert!(more_lip.lambda_upper >= base.lambda_upper && more_osc.lambda_upper >= base.lambda_upper);
        prop_assert!(more_lip.lambda_lower >= base.lambda_lower);
        prop_assert!(more_sup.lambda_lower >= base.lambda_lower);
        prop_assert!(thinner.c_omega >= base.c_omega && thinner.lambda_lower >= base.lambda_lower);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn first_order_solution_is_monotone_in_data(h1 in 0.1f64..2.0, dh in 0.0f64..1.0, c in 0.2f64..0.8) {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = Arc::new(build_grid(&d, 1.0 / 64.0).unwrap());
        let solve = |height: f64| {
            let f = data_library(&d, &DataParams::Bump { center: vec![c], radius: 0.2f64.min(c).min(1.0 - c), height, kappa: None }).unwrap();
            let s = ProblemSpec::new(d, 3.0, 1.0, 0.0, f).unwrap();
            solve_upwind_fd(&s, &g, &FirstOrderScheme::upwind_fd()).unwrap().u
        };
        let lo = solve(h1);
        let hi = solve(h1 + dh);
        for (a, b) in lo.values().iter().zip(hi.values()) {
            prop_assert!(*a <= b + 1e-10);
        }
    }
}

#[test]
fn noisy_power_law_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rows: Vec<(f64, f64)> = (0..8)
        .map(|j| {
            let eps = 0.1 * 10f64.powf(-0.4 * j as f64);
            (eps, eps.powf(0.75) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let fit = fit_rate(&rows).unwrap();
    assert!((0.73..=0.77).contains(&fit.slope), "{fit:?}");
    assert!(fit.r_squared > 0.999);
}
