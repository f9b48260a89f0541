//! Viscous problem `lambda u + |Du|^p - eps Lap u = f` and its maximal
//! solution, obtained as the increasing limit of Dirichlet problems with
//! boundary value `M -> infinity`.
//!
//! In the discrete scheme the Dirichlet ladder saturates at a finite `M`:
//! once the ghost value is large enough, every optimal control switches off
//! the jump towards the ghost, and the solution no longer depends on `M`. The
//! saturated field coincides with the solution of the scheme whose exterior
//! jumps are forbidden ([`solve_state_constrained_viscous`]).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Grid, GridFunction, NodeClass};
use crate::hamiltonian::ProblemSpec;
use crate::scheme::{sup_norm, Exterior, Operator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousScheme {
    /// First ladder value; raised to `max f / lambda + 1` when lower.
    pub m0: f64,
    pub ladder_ratio: f64,
    pub ladder_levels: usize,
    pub newton_tolerance: f64,
    pub max_newton_iters: usize,
    pub ladder_stop_tol: f64,
}

impl Default for ViscousScheme {
    fn default() -> Self {
        Self {
            m0: 1.0,
            ladder_ratio: 4.0,
            ladder_levels: 16,
            newton_tolerance: 1e-10,
            max_newton_iters: 200,
            ladder_stop_tol: 1e-9,
        }
    }
}

impl ViscousScheme {
    pub fn ladder(&self, spec: &ProblemSpec, f_max: f64) -> Result<Vec<f64>> {
        if !(self.ladder_ratio > 1.0) || self.ladder_levels < 2 {
            return Err(Error::Config("Dirichlet ladder needs ratio > 1 and at least 2 levels".into()));
        }
        let m0 = self.m0.max(f_max.max(0.0) / spec.lambda + 1.0);
        Ok((0..self.ladder_levels).map(|j| m0 * self.ladder_ratio.powi(j as i32)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ViscousResult {
    pub u_eps: GridFunction,
    pub ladder_levels_used: usize,
    pub interior_change_last: f64,
    /// Interior changes between consecutive ladder levels.
    pub ladder_changes: Vec<f64>,
    /// Largest decrease between consecutive levels (should be ~0).
    pub ladder_monotonicity_violation: f64,
    pub newton_iterations: usize,
    /// Sup-norm residual of the state-constrained scheme at `u_eps`.
    pub pde_residual: f64,
}

fn data_on(spec: &ProblemSpec, grid: &Grid) -> Vec<f64> {
    (0..grid.n_active()).map(|a| spec.f.eval_pt(grid.point(a))).collect()
}

fn check(spec: &ProblemSpec, grid: &Grid) -> Result<()> {
    if grid.domain() != &spec.domain {
        return Err(Error::GridMismatch("grid was built for a different domain".into()));
    }
    if spec.epsilon <= 0.0 {
        return Err(Error::Config("viscous solver needs epsilon > 0".into()));
    }
    Ok(())
}

fn operator<'a>(spec: &ProblemSpec, grid: &'a Grid, f: &'a [f64], exterior: Exterior) -> Operator<'a> {
    Operator { grid, e: spec.exponents, lambda: spec.lambda, eps: spec.epsilon, f, exterior }
}

fn dirichlet_from(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    f: &[f64],
    m: f64,
    scheme: &ViscousScheme,
    u0: Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    if !m.is_finite() {
        return Err(Error::Config("Dirichlet value must be finite".into()));
    }
    let op = operator(spec, grid, f, Exterior::Dirichlet(m));
    let s = op.solve(u0, scheme.newton_tolerance, scheme.max_newton_iters)?;
    Ok((s.u, s.iterations))
}

/// Discrete Dirichlet problem with ghost value `m` outside the domain.
pub fn solve_dirichlet_viscous(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    m: f64,
    scheme: &ViscousScheme,
) -> Result<GridFunction> {
    check(spec, grid)?;
    let f = data_on(spec, grid);
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) / spec.lambda;
    let (u, _) = dirichlet_from(spec, grid, &f, m, scheme, vec![top.max(m.min(top)); grid.n_active()])?;
    GridFunction::new(grid.clone(), u)
}

/// Maximal solution as the saturated limit of the Dirichlet ladder. The
/// change between levels is measured on nodes at distance `>= 2h`.
pub fn solve_maximal_viscous(spec: &ProblemSpec, grid: &Arc<Grid>, scheme: &ViscousScheme) -> Result<ViscousResult> {
    check(spec, grid)?;
    let f = data_on(spec, grid);
    let f_max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ladder = scheme.ladder(spec, f_max)?;
    let far: Vec<usize> =
        (0..grid.n_active()).filter(|&a| grid.distance_to_boundary(a) >= 2.0 * grid.h()).collect();
    let mut u = vec![f_max / spec.lambda; grid.n_active()];
    let mut prev: Option<Vec<f64>> = None;
    let mut changes = Vec::new();
    let mut violation = 0.0f64;
    let mut newton = 0;
    for (level, &m) in ladder.iter().enumerate() {
        let (next, its) = dirichlet_from(spec, grid, &f, m, scheme, u)?;
        newton += its;
        if let Some(p) = &prev {
            let change = far.iter().fold(0.0f64, |c, &a| c.max((next[a] - p[a]).abs()));
            violation = p.iter().zip(&next).fold(violation, |v, (a, b)| v.max(a - b));
            changes.push(change);
            if change <= scheme.ladder_stop_tol {
                let op = operator(spec, grid, &f, Exterior::Forbidden);
                let pde_residual = sup_norm(&op.residual(&next));
                return Ok(ViscousResult {
                    u_eps: GridFunction::new(grid.clone(), next)?,
                    ladder_levels_used: level + 1,
                    interior_change_last: change,
                    ladder_changes: changes,
                    ladder_monotonicity_violation: violation,
                    newton_iterations: newton,
                    pde_residual,
                });
            }
        }
        prev = Some(next.clone());
        u = next;
    }
    Err(Error::LadderExhausted { profile: changes })
}

/// The scheme with forbidden exterior jumps, solved directly.
pub fn solve_state_constrained_viscous(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    scheme: &ViscousScheme,
) -> Result<GridFunction> {
    check(spec, grid)?;
    let f = data_on(spec, grid);
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) / spec.lambda;
    let op = operator(spec, grid, &f, Exterior::Forbidden);
    let s = op.solve(vec![top; grid.n_active()], scheme.newton_tolerance, scheme.max_newton_iters)?;
    GridFunction::new(grid.clone(), s.u)
}

/// Sup-norm residual of the state-constrained viscous scheme at `u`.
pub fn viscous_residual(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    let grid = u.grid();
    check(spec, grid)?;
    let f = data_on(spec, grid);
    Ok(sup_norm(&operator(spec, grid, &f, Exterior::Forbidden).residual(u.values())))
}

/// Residual tolerance `C_VISC (h^2 / eps + h)`.
pub const C_VISC: f64 = 1.0;

pub fn viscous_residual_tol(h: f64, eps: f64) -> f64 {
    C_VISC * (h * h / eps + h)
}

/// Allowance on the gradient ratio, `C_GRAD * sqrt(h)`.
pub const C_GRAD: f64 = 1.0;

pub fn grad_margin(h: f64) -> f64 {
    C_GRAD * h.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub worst_ratio: f64,
    pub margin: f64,
    pub nodes_checked: usize,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0 + self.margin
    }
}

/// Centred-difference gradient of `u` against
/// `(p/(p-1) osc f + (eps/d)^{p/(p-1)})^{1/p}` on nodes with `d >= 4h`.
pub fn gradient_bound_certificate(result: &ViscousResult, spec: &ProblemSpec) -> Result<GradientCheck> {
    gradient_certificate(&result.u_eps, spec)
}

/// Same check on a bare field, e.g. one read back from disk.
pub fn gradient_certificate(u: &GridFunction, spec: &ProblemSpec) -> Result<GradientCheck> {
    let g = u.grid();
    let v = u.values();
    let p = spec.exponents.p;
    let osc = spec.f.osc()?;
    let h = g.h();
    let mut worst = 0.0f64;
    let mut count = 0;
    for a in 0..g.n_active() {
        let d = g.distance_to_boundary(a);
        if d < 4.0 * h {
            continue;
        }
        let mut g2 = 0.0;
        let mut ok = true;
        for axis in 0..g.dim() {
            match (g.neighbor(a, axis, -1), g.neighbor(a, axis, 1)) {
                (Some(m), Some(pl)) => g2 += ((v[pl] - v[m]) / (2.0 * h)).powi(2),
                _ => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let bound = (p / (p - 1.0) * osc + (spec.epsilon / d).powf(p / (p - 1.0))).powf(1.0 / p);
        worst = worst.max(g2.sqrt() / bound);
        count += 1;
    }
    Ok(GradientCheck { worst_ratio: worst, margin: grad_margin(h), nodes_checked: count })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonCheck {
    pub sup_difference: f64,
    pub bound: f64,
    /// `sup (u - v) - sup (f_u - f_v)^+ / lambda`.
    pub gap: f64,
}

/// Solves both problems (maximal viscous solutions) and compares them.
pub fn viscous_comparison_check(
    spec_u: &ProblemSpec,
    spec_v: &ProblemSpec,
    grid: &Arc<Grid>,
    scheme: &ViscousScheme,
) -> Result<ComparisonCheck> {
    if spec_u.domain != spec_v.domain
        || spec_u.exponents != spec_v.exponents
        || spec_u.lambda != spec_v.lambda
        || spec_u.epsilon != spec_v.epsilon
    {
        return Err(Error::Config("comparison needs specs differing only in f".into()));
    }
    let u = solve_maximal_viscous(spec_u, grid, scheme)?;
    let v = solve_maximal_viscous(spec_v, grid, scheme)?;
    Ok(compare_fields(&u.u_eps, &v.u_eps, spec_u, spec_v))
}

pub fn compare_fields(u: &GridFunction, v: &GridFunction, spec_u: &ProblemSpec, spec_v: &ProblemSpec) -> ComparisonCheck {
    let g = u.grid();
    let sup_diff = u
        .values()
        .iter()
        .zip(v.values())
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
    let sup_f = (0..g.n_active())
        .map(|a| {
            let x = g.point(a);
            (spec_u.f.eval_pt(x) - spec_v.f.eval_pt(x)).max(0.0)
        })
        .fold(0.0f64, f64::max);
    let bound = sup_f / spec_u.lambda;
    ComparisonCheck { sup_difference: sup_diff, bound, gap: sup_diff - bound }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundCheck {
    pub min_value: f64,
    pub bound: f64,
}

impl LowerBoundCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.min_value >= self.bound - tol
    }
}

/// `u^eps >= min f / lambda`.
pub fn lower_bound_check(u: &GridFunction, spec: &ProblemSpec) -> LowerBoundCheck {
    let g = u.grid();
    let fmin = (0..g.n_active()).map(|a| spec.f.eval_pt(g.point(a))).fold(f64::INFINITY, f64::min);
    let fmin = spec.f.meta().inf.map_or(fmin, |i| i.min(fmin));
    LowerBoundCheck { min_value: u.min(), bound: fmin / spec.lambda }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDataCheck {
    pub min_excess: f64,
    pub max_excess: f64,
    /// `(1/lambda + 2^alpha / alpha) eps^{1 - alpha/2}`.
    pub bound: f64,
}

impl ConstantDataCheck {
    pub fn passed(&self, slack: f64) -> bool {
        self.min_excess >= -slack && self.max_excess <= self.bound + slack
    }
}

/// Two-sided estimate for constant data `f = C`:
/// `0 <= u^eps - C/lambda <= (1/lambda + 2^alpha/alpha) eps^{1-alpha/2}`.
pub fn constant_data_check(u: &GridFunction, spec: &ProblemSpec) -> Result<ConstantDataCheck> {
    if !spec.f.is_constant() {
        return Err(Error::Config("constant-data estimate needs constant f".into()));
    }
    let c = spec.f.sup()?;
    let e = spec.exponents;
    let excess: Vec<f64> = u.values().iter().map(|v| v - c / spec.lambda).collect();
    Ok(ConstantDataCheck {
        min_excess: excess.iter().copied().fold(f64::INFINITY, f64::min),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        bound: (1.0 / spec.lambda + 2f64.powf(e.alpha_p) / e.alpha_p) * spec.epsilon.powf(e.improved_exponent()),
    })
}

/// Values of `u` sampled along the inward normal from boundary points,
/// `s in [0, delta]`, at lattice nodes nearest to `x0 + s n`. Returns, per
/// ray, the sequence of `(s, u)` pairs.
pub fn normal_profiles(u: &GridFunction, rays: usize, samples: usize) -> Result<Vec<Vec<(f64, f64)>>> {
    let g = u.grid();
    let dom = g.domain();
    let delta = dom.smoothness_radius();
    let dim = g.dim();
    let mut out = Vec::new();
    for r in 0..rays {
        let x0 = dom.boundary_point((r as f64 + 0.5) / rays as f64);
        let n = dom.inward_normal(&x0[..dim])?;
        let mut prof = Vec::new();
        let mut last_node = None;
        for k in 0..=samples {
            let s = delta * k as f64 / samples as f64;
            let x: Vec<f64> = (0..dim).map(|i| x0[i] + s * n[i]).collect();
            let node = nearest_node(g, &x);
            if let Some(a) = node {
                if g.class(a) != NodeClass::Exterior && Some(a) != last_node {
                    let ds = g.distance_to_boundary(a);
                    prof.push((ds, u.values()[a]));
                    last_node = Some(a);
                }
            }
        }
        out.push(prof);
    }
    Ok(out)
}

fn nearest_node(g: &Grid, x: &[f64]) -> Option<usize> {
    let o = g.origin();
    let mut idx = [0usize; 2];
    for k in 0..g.dim() {
        let r = ((x[k] - o[k]) / g.h()).round();
        if r < 0.0 {
            return None;
        }
        idx[k] = r as usize;
    }
    g.active_at(idx[0], idx[1])
}
