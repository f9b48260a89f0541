//! Sup/inf-convolutions, convexity certificates and the explicit constants
//! of the two-sided and improved rate estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridFunction, NodeClass};
use crate::hamiltonian::{DataFunction, Exponents};

/// Grids with at most this many active nodes are convolved exactly (no window).
pub const EXACT_CONVOLUTION_NODES: usize = 4096;

fn convolve(v: &GridFunction, theta: f64, sign: f64) -> Result<GridFunction> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Config(format!("convolution parameter must be positive, got {theta}")));
    }
    let g = v.grid();
    let vals = v.values();
    let n = g.n_active();
    let h = g.h();
    let dim = g.dim();
    // sign = +1: max_y v(y) - |x-y|^2/(2 theta); sign = -1: min_y v(y) + ...
    let pick = |x: [f64; 2], ys: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for b in ys {
            let y = g.point(b);
            let mut d2 = 0.0;
            for k in 0..dim {
                d2 += (x[k] - y[k]).powi(2);
            }
            let c = sign * vals[b] - d2 / (2.0 * theta);
            if c > best {
                best = c;
            }
        }
        sign * best
    };
    let out: Vec<f64> = if n <= EXACT_CONVOLUTION_NODES {
        (0..n).into_par_iter().map(|a| pick(g.point(a), &mut (0..n))).collect()
    } else {
        let radius = 2.0 * v.lipschitz_estimate() * theta + 2.0 * h;
        let r = (radius / h).ceil() as isize;
        let counts = g.counts();
        (0..n)
            .into_par_iter()
            .map(|a| {
                let (i, j) = g.lattice_index(a);
                let (i, j) = (i as isize, j as isize);
                let rj = if dim == 2 { r } else { 0 };
                let mut ys = (-r..=r).flat_map(move |di| (-rj..=rj).map(move |dj| (di, dj))).filter_map(|(di, dj)| {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= counts[0] as isize || jj >= counts[1] as isize {
                        return None;
                    }
                    g.active_at(ii as usize, jj as usize)
                });
                pick(g.point(a), &mut ys)
            })
            .collect()
    };
    GridFunction::new(g.clone(), out)
}

/// `u_theta(x) = max_y v(y) - |x-y|^2 / (2 theta)` over active nodes `y`.
pub fn sup_convolution(v: &GridFunction, theta: f64) -> Result<GridFunction> {
    convolve(v, theta, 1.0)
}

/// `min_y v(y) + |x-y|^2 / (2 theta)`.
pub fn inf_convolution(v: &GridFunction, theta: f64) -> Result<GridFunction> {
    convolve(v, theta, -1.0)
}

/// Worst value of `-D^2_k w(x) - expected` over nodes with a full stencil
/// and both axes. Nonpositive when `w` is semiconvex with constant
/// `expected`.
pub fn semiconvexity_certificate(w: &GridFunction, expected: f64) -> f64 {
    -expected - min_second_difference(w)
}

fn second_differences(w: &GridFunction) -> impl Iterator<Item = f64> + '_ {
    let g = w.grid();
    let v = w.values();
    let h2 = g.h() * g.h();
    (0..g.n_active()).filter(move |&a| g.has_full_stencil(a)).flat_map(move |a| {
        (0..g.dim()).filter_map(move |axis| match (g.neighbor(a, axis, -1), g.neighbor(a, axis, 1)) {
            (Some(m), Some(p)) => Some((v[p] + v[m] - 2.0 * v[a]) / h2),
            _ => None,
        })
    })
}

fn min_second_difference(w: &GridFunction) -> f64 {
    second_differences(w).fold(f64::INFINITY, f64::min)
}

/// Allowance for rounding in centred second differences of `w`.
pub fn convexity_margin(w: &GridFunction) -> f64 {
    let h = w.grid().h();
    let scale = w.values().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    64.0 * f64::EPSILON * scale / (h * h)
}

/// Allowance `C_SEMICONCAVITY * sqrt(h)` on top of a semiconcavity constant.
pub const C_SEMICONCAVITY: f64 = 1.0;

pub fn semiconcavity_margin(h: f64) -> f64 {
    C_SEMICONCAVITY * h.sqrt()
}

/// Largest centred second difference of `w` at full-stencil nodes whose
/// distance to the boundary is at least `min_distance`.
pub fn semiconcavity_estimate(w: &GridFunction, min_distance: f64) -> f64 {
    let g = w.grid();
    let v = w.values();
    let h2 = g.h() * g.h();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..g.n_active() {
        if !g.has_full_stencil(a) || g.distance_to_boundary(a) < min_distance {
            continue;
        }
        for axis in 0..g.dim() {
            if let (Some(m), Some(p)) = (g.neighbor(a, axis, -1), g.neighbor(a, axis, 1)) {
                worst = worst.max((v[p] + v[m] - 2.0 * v[a]) / h2);
            }
        }
    }
    worst
}

/// Segment version of the semiconcavity bound: for random node pairs `x, y`
/// whose midpoint and all lattice points between them are active, returns
/// the largest `4 (w(x) + w(y) - 2 w(m)) / |x - y|^2`.
pub fn sampled_semiconcavity(w: &GridFunction, pairs: usize, max_offset: usize, seed: u64) -> f64 {
    let g = w.grid();
    let v = w.values();
    let dim = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let n = g.n_active();
    let counts = g.counts();
    let at = |i: isize, j: isize| -> Option<usize> {
        if i < 0 || j < 0 || i >= counts[0] as isize || j >= counts[1] as isize {
            return None;
        }
        g.active_at(i as usize, j as usize).filter(|&a| g.class(a) == NodeClass::Interior)
    };
    for _ in 0..pairs {
        let m = rng.gen_range(0..n);
        let di = rng.gen_range(-(max_offset as isize)..=max_offset as isize);
        let dj = if dim == 2 { rng.gen_range(-(max_offset as isize)..=max_offset as isize) } else { 0 };
        if di == 0 && dj == 0 {
            continue;
        }
        let (i, j) = g.lattice_index(m);
        let (i, j) = (i as isize, j as isize);
        let steps = di.abs().max(dj.abs());
        let inside = (-steps..=steps).all(|s| {
            // lattice points closest to the segment at parameter s / steps
            let ii = i + ((di * s) as f64 / steps as f64).round() as isize;
            let jj = j + ((dj * s) as f64 / steps as f64).round() as isize;
            at(ii, jj).is_some()
        });
        if !inside {
            continue;
        }
        let (Some(x), Some(y), Some(c)) = (at(i + di, j + dj), at(i - di, j - dj), at(i, j)) else {
            continue;
        };
        let len2 = 4.0 * ((di * di + dj * dj) as f64) * g.h() * g.h();
        worst = worst.max(4.0 * (v[x] + v[y] - 2.0 * v[c]) / len2);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalConstants {
    pub k: f64,
    pub c_omega: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub alpha_p: f64,
    pub improved_coeff: f64,
}

impl TheoreticalConstants {
    /// `max(1, 1/lambda)`: the larger of the two readings of how the
    /// constants scale with `lambda`, applied on top of the closed forms.
    pub fn lambda_normalization(lambda: f64) -> f64 {
        1.0f64.max(1.0 / lambda)
    }
}

pub fn theoretical_constants(
    f: &DataFunction,
    domain: &Domain,
    e: &Exponents,
    lambda: f64,
    n: usize,
) -> Result<TheoreticalConstants> {
    if !(lambda > 0.0) {
        return Err(Error::Config("lambda must be positive".into()));
    }
    let osc = f.osc()?;
    let lip = f.lipschitz()?;
    let sup = f.sup()?;
    let p = e.p;
    let nf = n as f64;
    let k = 2.0 * (osc + lip).powf(1.0 / p);
    let c_omega = 3.0 / domain.smoothness_radius() + domain.distance_hessian_bound();
    let lambda_lower = (nf + 0.5f64.powf(p - 1.0) * k.powf(p + 1.0) + p * c_omega * sup * k + 1.5 * k * k) / lambda;
    let lead = 2f64.powf(e.alpha_p) / e.alpha_p;
    let lambda_upper = lead + (1.0 + (nf + 2.0) * (osc.powf(1.0 / p) * lip).sqrt()) / lambda;
    Ok(TheoreticalConstants {
        k,
        c_omega,
        lambda_lower,
        lambda_upper,
        alpha_p: e.alpha_p,
        improved_coeff: 1.0 / lambda + lead,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::build_grid;
    use crate::hamiltonian::{data_library, DataParams};

    fn line(h: f64) -> Arc<crate::geometry::Grid> {
        Arc::new(build_grid(&Domain::interval(0.0, 1.0).unwrap(), h).unwrap())
    }

    #[test]
    fn constants_for_distance_data() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let f = data_library(&dom, &DataParams::Distance).unwrap();
        let e = Exponents::new(3.0).unwrap();
        let c = theoretical_constants(&f, &dom, &e, 1.0, 1).unwrap();
        let k = 2.0 * 1.5f64.cbrt();
        assert!((c.k - k).abs() < 1e-12);
        assert!((c.c_omega - 18.0).abs() < 1e-12);
        let lower = 1.0 + 0.25 * k.powi(4) + 3.0 * 18.0 * 0.5 * k + 1.5 * k * k;
        assert!((c.lambda_lower - lower).abs() < 1e-10);
        assert!((c.lambda_lower - 77.54).abs() < 0.01, "{}", c.lambda_lower);
        let upper = 2.0 * 2f64.sqrt() + 1.0 + 3.0 * 0.5f64.cbrt().sqrt();
        assert!((c.lambda_upper - upper).abs() < 1e-12);
        assert!((c.lambda_upper - 6.50).abs() < 0.01);
        assert!((c.improved_coeff - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn constants_for_constant_data() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let f = data_library(&dom, &DataParams::Constant { value: 2.0 }).unwrap();
        let e = Exponents::new(4.0).unwrap();
        let c = theoretical_constants(&f, &dom, &e, 0.5, 1).unwrap();
        assert_eq!(c.k, 0.0);
        assert!((c.lambda_lower - 2.0).abs() < 1e-12);
        let lead = 2f64.powf(2.0 / 3.0) * 1.5;
        assert!((c.lambda_upper - (lead + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn missing_metadata_is_named() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let f = DataFunction::from_fn("raw", &dom, Default::default(), |x: &[f64]| x[0]);
        let e = Exponents::new(3.0).unwrap();
        let err = theoretical_constants(&f, &dom, &e, 1.0, 1).unwrap_err();
        assert!(err.to_string().contains("osc"), "{err}");
    }

    #[test]
    fn convolution_rejects_bad_theta() {
        let v = GridFunction::constant(line(0.1), 1.0);
        assert!(sup_convolution(&v, 0.0).is_err());
        assert!(inf_convolution(&v, -1.0).is_err());
    }

    #[test]
    fn constant_is_fixed() {
        let v = GridFunction::constant(line(1.0 / 64.0), 0.7);
        assert_eq!(sup_convolution(&v, 0.1).unwrap().values(), v.values());
        assert_eq!(inf_convolution(&v, 0.1).unwrap().values(), v.values());
    }

    #[test]
    fn kink_value_is_kept() {
        let g = line(1.0 / 64.0);
        let v = GridFunction::from_fn(g.clone(), |x| -(x[0] - 0.5).abs());
        let u = sup_convolution(&v, 0.1).unwrap();
        let mid = u.nearest_value(&[0.5]).unwrap();
        assert!(mid.abs() < 1e-15);
    }

    #[test]
    fn windowed_matches_exact() {
        let g = line(1.0 / 8192.0);
        assert!(g.n_active() > EXACT_CONVOLUTION_NODES);
        let v = GridFunction::from_fn(g.clone(), |x| (7.0 * x[0]).sin() * 0.3 - (x[0] - 0.4).abs());
        let u = sup_convolution(&v, 0.01).unwrap();
        // brute force at a few nodes
        for a in (0..g.n_active()).step_by(997) {
            let x = g.point(a)[0];
            let best = (0..g.n_active())
                .map(|b| v.values()[b] - (g.point(b)[0] - x).powi(2) / 0.02)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(u.values()[a], best);
        }
    }

    #[test]
    fn quadratic_certificate() {
        let g = line(1.0 / 32.0);
        let w = GridFunction::from_fn(g, |x| 0.5 * x[0] * x[0]);
        assert!(semiconvexity_certificate(&w, 0.0) <= -1.0 + 1e-9);
    }

    #[test]
    fn concave_kink_is_flagged() {
        let h = 1.0 / 64.0;
        let g = line(h);
        let w = GridFunction::from_fn(g, |x| -(x[0] - 0.5).abs());
        let excess = semiconvexity_certificate(&w, 0.0);
        assert!((excess - 2.0 / h).abs() < 1e-6, "{excess}");
    }

    #[test]
    fn sampled_matches_second_difference_for_quadratic() {
        let g = Arc::new(build_grid(&Domain::disk([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0).unwrap());
        let w = GridFunction::from_fn(g, |x| -(x[0] * x[0] + 3.0 * x[1] * x[1]));
        let s = sampled_semiconcavity(&w, 2000, 6, 7);
        assert!(s <= -2.0 + 1e-9, "{s}");
        assert_eq!(s, sampled_semiconcavity(&w, 2000, 6, 7));
    }
}
