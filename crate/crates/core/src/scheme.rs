//! Monotone discrete HJB operator shared by the first-order and viscous
//! finite-difference solvers.
//!
//! The PDE `lambda u + |Du|^p - eps Lap u = f` is written in control form,
//! `lambda u + sup_v (v . Du - eps Lap u - c_p |v|^q) = f`, and each control
//! `v` is discretised as a continuous-time Markov chain on the lattice. Per
//! axis, with `V = 2 eps / h`, the jump rates to the minus/plus neighbours are
//!
//! * `|v_k| <= V`: centred, `a- = eps/h^2 + v_k/2h`, `a+ = eps/h^2 - v_k/2h`;
//! * `v_k > V`: upwind, `a- = v_k/h`, `a+ = 0`;
//! * `v_k < -V`: upwind, `a- = 0`, `a+ = -v_k/h`.
//!
//! All rates are nonnegative, so the scheme is monotone; with `eps = 0` it is
//! the Godunov upwind scheme. Missing neighbours are either ghosts holding a
//! Dirichlet value or forbidden, in which case controls with a positive rate
//! towards them are excluded. The latter is the discrete state constraint.

use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::geometry::{Grid, NO_NODE};
use crate::hamiltonian::Exponents;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Exterior {
    Forbidden,
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Operator<'a> {
    pub grid: &'a Grid,
    pub e: Exponents,
    pub lambda: f64,
    pub eps: f64,
    pub f: &'a [f64],
    pub exterior: Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Left,
    Centre,
    Right,
    Still,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    kind: Kind,
    lo: f64,
    hi: f64,
    b: f64,
    s: f64,
}

/// Result of the pointwise maximisation at one node.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NodeEval {
    pub hval: f64,
    /// Rates towards slots `[x-, x+, y-, y+]`.
    pub rates: [f64; 4],
    pub control: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Node(usize),
    Ghost(f64),
    Forbidden,
}

impl<'a> Operator<'a> {
    fn side(&self, slot: usize, a: usize) -> Side {
        let n = self.grid.neighbor_slots(a)[slot];
        if n != NO_NODE {
            Side::Node(n)
        } else {
            match self.exterior {
                Exterior::Forbidden => Side::Forbidden,
                Exterior::Dirichlet(m) => Side::Ghost(m),
            }
        }
    }

    fn diff(&self, side: Side, ui: f64, u: &[f64]) -> Option<f64> {
        match side {
            Side::Node(j) => Some(u[j] - ui),
            Side::Ghost(m) => Some(m - ui),
            Side::Forbidden => None,
        }
    }

    fn pieces(&self, dm: Option<f64>, dp: Option<f64>) -> ([Piece; 3], usize) {
        let h = self.grid.h();
        let v_c = 2.0 * self.eps / h;
        let mut out = [Piece { kind: Kind::Still, lo: 0.0, hi: 0.0, b: 0.0, s: 0.0 }; 3];
        let mut n = 0;
        match (dm, dp) {
            (None, None) => {
                n = 1;
            }
            _ => {
                if let Some(dp) = dp {
                    out[n] = Piece { kind: Kind::Left, lo: f64::NEG_INFINITY, hi: -v_c, b: 0.0, s: dp / h };
                    n += 1;
                }
                if let (Some(dm), Some(dp)) = (dm, dp) {
                    if v_c > 0.0 {
                        out[n] = Piece {
                            kind: Kind::Centre,
                            lo: -v_c,
                            hi: v_c,
                            b: -self.eps / (h * h) * (dp + dm),
                            s: (dp - dm) / (2.0 * h),
                        };
                        n += 1;
                    }
                }
                if let Some(dm) = dm {
                    out[n] = Piece { kind: Kind::Right, lo: v_c, hi: f64::INFINITY, b: 0.0, s: -dm / h };
                    n += 1;
                }
            }
        }
        (out, n)
    }

    fn rates(&self, kind: Kind, v: f64) -> (f64, f64) {
        let h = self.grid.h();
        match kind {
            Kind::Left => (0.0, (-v / h).max(0.0)),
            Kind::Right => ((v / h).max(0.0), 0.0),
            Kind::Centre => {
                let d = self.eps / (h * h);
                ((d + v / (2.0 * h)).max(0.0), (d - v / (2.0 * h)).max(0.0))
            }
            Kind::Still => (0.0, 0.0),
        }
    }

    pub fn eval_node(&self, a: usize, u: &[f64]) -> NodeEval {
        let ui = u[a];
        let dim = self.grid.dim();
        let mut axes = [([Piece { kind: Kind::Still, lo: 0.0, hi: 0.0, b: 0.0, s: 0.0 }; 3], 1usize); 2];
        for (k, ax) in axes.iter_mut().enumerate().take(dim) {
            let dm = self.diff(self.side(2 * k, a), ui, u);
            let dp = self.diff(self.side(2 * k + 1, a), ui, u);
            *ax = self.pieces(dm, dp);
        }
        let e = &self.e;
        let mut best = NodeEval { hval: f64::NEG_INFINITY, ..Default::default() };
        let mut best_kinds = [Kind::Still; 2];
        if dim == 1 {
            let (ps, n) = axes[0];
            for pc in &ps[..n] {
                let v = clamp(power_dual(e, pc.s), pc.lo, pc.hi);
                let val = pc.b + pc.s * v - e.c_p * v.abs().powf(e.q);
                if val > best.hval {
                    best.hval = val;
                    best.control = [v, 0.0];
                    best_kinds = [pc.kind, Kind::Still];
                }
            }
        } else {
            let (p0, n0) = axes[0];
            let (p1, n1) = axes[1];
            for a0 in &p0[..n0] {
                for a1 in &p1[..n1] {
                    let (val, v) = box_max(
                        e,
                        a0.b + a1.b,
                        [a0.s, a1.s],
                        [a0.lo, a1.lo],
                        [a0.hi, a1.hi],
                    );
                    if val > best.hval {
                        best.hval = val;
                        best.control = v;
                        best_kinds = [a0.kind, a1.kind];
                    }
                }
            }
        }
        for k in 0..dim {
            let (am, ap) = self.rates(best_kinds[k], best.control[k]);
            best.rates[2 * k] = am;
            best.rates[2 * k + 1] = ap;
        }
        best
    }

    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .into_par_iter()
            .map(|a| self.lambda * u[a] - self.f[a] + self.eval_node(a, u).hval)
            .collect()
    }

    /// Newton step for the policy frozen at `u`: returns `(u_new, residual at u)`.
    fn policy_step(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = u.len();
        let evals: Vec<NodeEval> = (0..n).into_par_iter().map(|a| self.eval_node(a, u)).collect();
        let mut mat = BandMatrix::zeros(n, self.grid.bandwidth().max(1));
        let mut res = vec![0.0; n];
        let mut delta = vec![0.0; n];
        for a in 0..n {
            let ev = &evals[a];
            res[a] = self.lambda * u[a] - self.f[a] + ev.hval;
            let mut diag = self.lambda;
            for (slot, &rate) in ev.rates.iter().enumerate() {
                if rate == 0.0 {
                    continue;
                }
                diag += rate;
                let nb = self.grid.neighbor_slots(a)[slot];
                if nb != NO_NODE {
                    mat.add(a, nb, -rate);
                }
            }
            mat.add(a, a, diag);
            delta[a] = -res[a];
        }
        mat.solve_in_place(&mut delta);
        let unew = u.iter().zip(&delta).map(|(x, d)| x + d).collect();
        (unew, res)
    }

    /// Policy-iteration Newton with Armijo backtracking on the sup-norm
    /// residual. When no damped step decreases the residual the full policy
    /// step is taken; after `STALL_LIMIT` consecutive damped steps the
    /// iteration switches to undamped policy iteration, which converges
    /// monotonically for this class of operators.
    pub fn solve(&self, u0: Vec<f64>, tol: f64, max_iters: usize) -> Result<Solved> {
        const STALL_LIMIT: usize = 5;
        let mut u = u0;
        let mut last = f64::INFINITY;
        let mut update = f64::INFINITY;
        let mut damped_run = 0;
        for it in 0..=max_iters {
            let (full, res) = self.policy_step(&u);
            let r0 = sup_norm(&res);
            last = r0;
            if !r0.is_finite() {
                break;
            }
            if r0 <= tol {
                return Ok(Solved { u, iterations: it, last_update: update });
            }
            if it == max_iters {
                break;
            }
            let mut next = None;
            if damped_run < STALL_LIMIT {
                let mut t = 1.0;
                for _ in 0..=30 {
                    let trial: Vec<f64> = u.iter().zip(&full).map(|(a, b)| a + t * (b - a)).collect();
                    let r = sup_norm(&self.residual(&trial));
                    if r <= (1.0 - 1e-4 * t) * r0 {
                        next = Some(trial);
                        break;
                    }
                    t *= 0.5;
                }
                if t < 1.0 {
                    damped_run += 1;
                } else {
                    damped_run = 0;
                }
            }
            let next = next.unwrap_or(full);
            update = u.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            u = next;
        }
        Err(Error::NonConvergence { solver: "policy-iteration Newton", iterations: max_iters, last_update: last })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub last_update: f64,
}

pub(crate) fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

#[inline]
fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Unconstrained maximiser of `s v - c_p |v|^q` in one variable.
#[inline]
fn power_dual(e: &Exponents, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        e.p * s.abs().powf(e.p - 2.0) * s
    }
}

/// `max b + s.v - c_p |v|^q` over the box `[lo, hi]` (bounds may be infinite).
fn box_max(e: &Exponents, b: f64, s: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> (f64, [f64; 2]) {
    let objective = |v: [f64; 2]| b + s[0] * v[0] + s[1] * v[1] - e.c_p * v[0].hypot(v[1]).powf(e.q);
    let ns = s[0].hypot(s[1]);
    let scale = if ns == 0.0 { 0.0 } else { e.p * ns.powf(e.p - 2.0) };
    let free = [scale * s[0], scale * s[1]];
    if (0..2).all(|k| lo[k] <= free[k] && free[k] <= hi[k]) {
        return (objective(free), free);
    }
    // Strict concavity puts the maximiser on a face.
    let mut best = (f64::NEG_INFINITY, [0.0; 2]);
    for j in 0..2 {
        let o = 1 - j;
        for bound in [lo[j], hi[j]] {
            if !bound.is_finite() {
                continue;
            }
            let t = face_argmax(e, s[o], bound, lo[o], hi[o]);
            let mut v = [0.0; 2];
            v[j] = bound;
            v[o] = t;
            let val = objective(v);
            if val > best.0 {
                best = (val, v);
            }
        }
    }
    best
}

/// Maximiser over `t in [lo, hi]` of `s t - c_p (a^2 + t^2)^{q/2}`.
fn face_argmax(e: &Exponents, s: f64, a: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        return clamp(power_dual(e, s), lo, hi);
    }
    let qc = e.q * e.c_p;
    let a2 = a * a;
    let dpsi = |t: f64| s - qc * t * (a2 + t * t).powf(0.5 * e.q - 1.0);
    if lo.is_finite() && dpsi(lo) <= 0.0 {
        return lo;
    }
    if hi.is_finite() && dpsi(hi) >= 0.0 {
        return hi;
    }
    // Root of the decreasing derivative; it has the sign of s.
    let reach = a
        .abs()
        .max((s.abs() / (qc * 2f64.powf(0.5 * e.q - 1.0))).powf(1.0 / (e.q - 1.0)));
    let (mut l, mut r) = if s >= 0.0 { (0.0, reach) } else { (-reach, 0.0) };
    l = l.max(lo);
    r = r.min(hi);
    let mut t = 0.5 * (l + r);
    for _ in 0..200 {
        let g = dpsi(t);
        if g == 0.0 {
            return t;
        }
        if g > 0.0 {
            l = t;
        } else {
            r = t;
        }
        let d2 = qc * (a2 + t * t).powf(0.5 * e.q - 2.0) * (a2 + (e.q - 1.0) * t * t);
        let newton = t + g / d2;
        t = if newton > l && newton < r { newton } else { 0.5 * (l + r) };
        if r - l <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
            break;
        }
        if (g / d2).abs() <= 1e-15 * t.abs().max(1e-300) {
            break;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};
    use crate::hamiltonian::make_exponents;

    fn brute_box(e: &Exponents, b: f64, s: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let span = |k: usize| {
            let l = if lo[k].is_finite() { lo[k] } else { -20.0 };
            let h = if hi[k].is_finite() { hi[k] } else { 20.0 };
            (l, h)
        };
        let (l0, h0) = span(0);
        let (l1, h1) = span(1);
        let n = 800;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let v0 = l0 + (h0 - l0) * i as f64 / n as f64;
                let v1 = l1 + (h1 - l1) * j as f64 / n as f64;
                best = best.max(b + s[0] * v0 + s[1] * v1 - e.c_p * v0.hypot(v1).powf(e.q));
            }
        }
        best
    }

    #[test]
    fn box_max_matches_scan() {
        let e = make_exponents(3.0).unwrap();
        let cases = [
            ([0.7, -0.4], [-1.0, -3.0], [2.0, 3.0]),
            ([1.5, 1.0], [2.0, f64::NEG_INFINITY], [f64::INFINITY, -1.0]),
            ([-0.3, 0.2], [f64::NEG_INFINITY, 0.5], [-0.5, 0.8]),
            ([0.0, 0.0], [0.5, 0.5], [1.0, 1.0]),
        ];
        for (s, lo, hi) in cases {
            let (val, v) = box_max(&e, 0.1, s, lo, hi);
            let scan = brute_box(&e, 0.1, s, lo, hi);
            assert!(val >= scan - 1e-9, "{val} < {scan}");
            assert!(val <= scan + 1e-3, "{val} vs {scan}");
            assert!((0..2).all(|k| lo[k] <= v[k] && v[k] <= hi[k]));
        }
    }

    #[test]
    fn zero_data_zero_dirichlet_is_fixed_point() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&dom, 1.0 / 32.0).unwrap();
        let f = vec![0.0; g.n_active()];
        let op = Operator {
            grid: &g,
            e: make_exponents(3.0).unwrap(),
            lambda: 1.0,
            eps: 0.01,
            f: &f,
            exterior: Exterior::Dirichlet(0.0),
        };
        let r = op.residual(&vec![0.0; g.n_active()]);
        assert!(sup_norm(&r) == 0.0);
    }

    #[test]
    fn first_order_is_godunov() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&dom, 0.125).unwrap();
        let f = vec![0.0; g.n_active()];
        let e = make_exponents(3.0).unwrap();
        let op = Operator { grid: &g, e, lambda: 1.0, eps: 0.0, f: &f, exterior: Exterior::Forbidden };
        let u: Vec<f64> = (0..g.n_active()).map(|a| (g.point(a)[0] * 3.0).sin()).collect();
        for a in 0..g.n_active() {
            let h = g.h();
            let dm = g.neighbor(a, 0, -1).map(|b| (u[a] - u[b]) / h);
            let dp = g.neighbor(a, 0, 1).map(|b| (u[b] - u[a]) / h);
            let xi = dm.unwrap_or(0.0).max(-dp.unwrap_or(0.0)).max(0.0);
            let ev = op.eval_node(a, &u);
            assert!((ev.hval - xi.powi(3)).abs() < 1e-12, "node {a}");
        }
    }
}
