//! First-order state-constrained problem `lambda u + |Du|^p = f`.
//!
//! Two independent discretisations: semi-Lagrangian value iteration on the
//! optimal-control representation (trajectories are kept in the closed
//! domain by projection), and the upwind finite-difference scheme with the
//! outward differences dropped at the boundary, solved by policy iteration.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Grid, GridFunction, NodeClass, Point};
use crate::hamiltonian::{estimate_regularity, ProblemSpec};
use crate::scheme::{Exterior, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    SemiLagrangian,
    UpwindFd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderScheme {
    pub kind: SchemeKind,
    /// Number of nonzero radii in the geometric control ladder.
    pub radii: usize,
    pub radius_ratio: f64,
    /// Directions in 2D; 1D always uses `{+1, -1}`.
    pub directions: usize,
    /// Largest control speed; derived from the data when `None`.
    pub v_max: Option<f64>,
    pub sweep_tolerance: f64,
    pub max_iterations: usize,
}

impl FirstOrderScheme {
    pub fn semi_lagrangian() -> Self {
        Self {
            kind: SchemeKind::SemiLagrangian,
            radii: 32,
            radius_ratio: 1.25,
            directions: 16,
            v_max: None,
            sweep_tolerance: 1e-10,
            max_iterations: 2_000_000,
        }
    }

    pub fn upwind_fd() -> Self {
        Self {
            kind: SchemeKind::UpwindFd,
            sweep_tolerance: 1e-11,
            max_iterations: 200,
            ..Self::semi_lagrangian()
        }
    }

    /// Speed cap `2 p osc^{(p-1)/p}`: twice the largest optimal speed
    /// allowed by the Lipschitz bound on `u`.
    pub fn resolve_v_max(&self, spec: &ProblemSpec, grid: &Grid) -> f64 {
        if let Some(v) = self.v_max {
            return v;
        }
        let osc = spec.f.meta().osc.unwrap_or_else(|| estimate_regularity(&spec.f, grid).osc);
        let p = spec.exponents.p;
        if osc > 0.0 {
            2.0 * p * osc.powf((p - 1.0) / p)
        } else {
            1.0
        }
    }

    /// Velocities in tie-break order: zero, then by increasing radius, then
    /// by direction index.
    pub fn control_set(&self, dim: usize, v_max: f64) -> Vec<Point> {
        let mut out = vec![[0.0, 0.0]];
        let dirs: Vec<Point> = if dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            (0..self.directions)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / self.directions as f64;
                    [t.cos(), t.sin()]
                })
                .collect()
        };
        for i in 0..self.radii {
            let r = v_max * self.radius_ratio.powi(-((self.radii - 1 - i) as i32));
            for d in &dirs {
                out.push([r * d[0], r * d[1]]);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: GridFunction,
    pub iterations: usize,
    pub final_update: f64,
    pub interior_residual: f64,
    pub boundary_deficit: f64,
}

fn data_on(spec: &ProblemSpec, grid: &Grid) -> Vec<f64> {
    (0..grid.n_active()).map(|a| spec.f.eval_pt(grid.point(a))).collect()
}

fn check_grid(spec: &ProblemSpec, grid: &Grid) -> Result<()> {
    if grid.domain() != &spec.domain {
        return Err(Error::GridMismatch("grid was built for a different domain".into()));
    }
    Ok(())
}

pub fn solve_first_order(spec: &ProblemSpec, grid: &Arc<Grid>, scheme: &FirstOrderScheme) -> Result<SolveResult> {
    match scheme.kind {
        SchemeKind::SemiLagrangian => solve_semi_lagrangian(spec, grid, scheme),
        SchemeKind::UpwindFd => solve_upwind_fd(spec, grid, scheme),
    }
}

struct Stencils {
    corners: usize,
    n_controls: usize,
    cost: Vec<f64>,
    idx: Vec<u32>,
    w: Vec<f64>,
}

/// Interpolation weights at `y` over active lattice corners of its cell.
fn interpolation(grid: &Grid, y: Point, idx: &mut [u32], w: &mut [f64]) {
    let dim = grid.dim();
    let o = grid.origin();
    let h = grid.h();
    let counts = grid.counts();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for k in 0..dim {
        let s = (y[k] - o[k]) / h;
        let i = (s.floor().max(0.0) as usize).min(counts[k].saturating_sub(2));
        base[k] = i;
        frac[k] = (s - i as f64).clamp(0.0, 1.0);
    }
    let mut total = 0.0;
    let mut n = 0;
    for c in 0..(1usize << dim) {
        let di = c & 1;
        let dj = (c >> 1) & 1;
        let wx = if di == 1 { frac[0] } else { 1.0 - frac[0] };
        let wy = if dim == 1 { 1.0 } else if dj == 1 { frac[1] } else { 1.0 - frac[1] };
        let wt = wx * wy;
        if let Some(a) = grid.active_at(base[0] + di, base[1] + dj) {
            if wt > 0.0 {
                idx[n] = a as u32;
                w[n] = wt;
                total += wt;
                n += 1;
            }
        }
    }
    if total > 0.0 {
        for v in w.iter_mut().take(n) {
            *v /= total;
        }
    } else {
        // No active corner carries weight: fall back to the nearest active node.
        idx[0] = nearest_active(grid, y) as u32;
        w[0] = 1.0;
        n = 1;
    }
    for k in n..idx.len() {
        idx[k] = idx[0];
        w[k] = 0.0;
    }
}

fn nearest_active(grid: &Grid, y: Point) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for a in 0..grid.n_active() {
        let x = grid.point(a);
        let d = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        if d < best.0 {
            best = (d, a);
        }
    }
    best.1
}

const MAX_STENCIL_ENTRIES: usize = 8_000_000;

fn build_stencils(spec: &ProblemSpec, grid: &Grid, controls: &[Point], dt: f64) -> Result<Stencils> {
    let n = grid.n_active();
    let nc = controls.len();
    if n * nc > MAX_STENCIL_ENTRIES {
        return Err(Error::Config(format!(
            "semi-Lagrangian stencil table would hold {} entries; use a coarser grid",
            n * nc
        )));
    }
    let corners = 1usize << grid.dim();
    let e = spec.exponents;
    let domain = grid.domain();
    let rows: Vec<(Vec<f64>, Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let x = grid.point(a);
            let fx = spec.f.eval_pt(x);
            let mut cost = Vec::with_capacity(nc);
            let mut idx = vec![0u32; nc * corners];
            let mut w = vec![0.0; nc * corners];
            for (c, v) in controls.iter().enumerate() {
                let speed = v[0].hypot(v[1]);
                cost.push(dt * (e.c_p * speed.powf(e.q) + fx));
                let y = domain.project_closure_pt([x[0] + dt * v[0], x[1] + dt * v[1]]);
                interpolation(
                    grid,
                    y,
                    &mut idx[c * corners..(c + 1) * corners],
                    &mut w[c * corners..(c + 1) * corners],
                );
            }
            (cost, idx, w)
        })
        .collect();
    let mut st = Stencils {
        corners,
        n_controls: nc,
        cost: Vec::with_capacity(n * nc),
        idx: Vec::with_capacity(n * nc * corners),
        w: Vec::with_capacity(n * nc * corners),
    };
    for (c, i, w) in rows {
        st.cost.extend(c);
        st.idx.extend(i);
        st.w.extend(w);
    }
    Ok(st)
}

fn sl_sweep(st: &Stencils, u: &[f64], discount: f64) -> Vec<f64> {
    let (nc, k) = (st.n_controls, st.corners);
    (0..u.len())
        .into_par_iter()
        .map(|a| {
            let mut best = f64::INFINITY;
            for c in 0..nc {
                let off = (a * nc + c) * k;
                let mut interp = 0.0;
                for j in 0..k {
                    interp += st.w[off + j] * u[st.idx[off + j] as usize];
                }
                let val = st.cost[a * nc + c] + discount * interp;
                if val < best {
                    best = val;
                }
            }
            best
        })
        .collect()
}

/// Jacobi value iteration on `u(x) = min_v dt L(x, v) + (1 - lambda dt) I[u](proj(x + dt v))`,
/// started from the supersolution `max f / lambda`. Stops once the result is
/// within `sweep_tolerance` of the discrete fixed point.
pub fn solve_semi_lagrangian(spec: &ProblemSpec, grid: &Arc<Grid>, scheme: &FirstOrderScheme) -> Result<SolveResult> {
    check_grid(spec, grid)?;
    if !spec.is_first_order() {
        return Err(Error::Config("semi-Lagrangian solver needs epsilon = 0".into()));
    }
    let v_max = scheme.resolve_v_max(spec, grid);
    let dt = grid.h() / v_max;
    if spec.lambda * dt >= 1.0 {
        return Err(Error::Config(format!("lambda * dt = {} must be below 1", spec.lambda * dt)));
    }
    let controls = scheme.control_set(grid.dim(), v_max);
    let st = build_stencils(spec, grid, &controls, dt)?;
    let f = data_on(spec, grid);
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) / spec.lambda;
    let mut u = vec![top; grid.n_active()];
    let discount = 1.0 - spec.lambda * dt;
    let mut change = f64::INFINITY;
    for it in 1..=scheme.max_iterations {
        let next = sl_sweep(&st, &u, discount);
        change = u.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u = next;
        if !change.is_finite() {
            break;
        }
        // distance to the fixed point is at most change * discount / (1 - discount)
        if change * discount <= scheme.sweep_tolerance * (1.0 - discount) {
            return finish(spec, grid, u, it, change);
        }
    }
    Err(Error::NonConvergence {
        solver: "semi-Lagrangian value iteration",
        iterations: scheme.max_iterations,
        last_update: change,
    })
}

/// Godunov upwind scheme with forbidden exterior differences, solved by
/// policy iteration. The initial guess is the solution on the grid of
/// spacing `2h`, recursively, bottoming out at a flat `max f / lambda`.
pub fn solve_upwind_fd(spec: &ProblemSpec, grid: &Arc<Grid>, scheme: &FirstOrderScheme) -> Result<SolveResult> {
    check_grid(spec, grid)?;
    if !spec.is_first_order() {
        return Err(Error::Config("upwind solver needs epsilon = 0".into()));
    }
    let (u, iterations, update) = upwind_sequenced(spec, grid, scheme)?;
    finish(spec, grid, u, iterations, update)
}

/// Smallest number of cells per axis used as the coarsest sequencing level.
const COARSEST_CELLS: f64 = 8.0;

fn upwind_sequenced(spec: &ProblemSpec, grid: &Grid, scheme: &FirstOrderScheme) -> Result<(Vec<f64>, usize, f64)> {
    let f = data_on(spec, grid);
    let bbox = grid.domain().bounding_box();
    let width = bbox.max[0] - bbox.min[0];
    let coarse = if width / (2.0 * grid.h()) >= COARSEST_CELLS {
        Grid::new(grid.domain(), 2.0 * grid.h()).ok()
    } else {
        None
    };
    let u0 = match coarse {
        Some(cg) => {
            let (uc, _, _) = upwind_sequenced(spec, &cg, scheme)?;
            prolongate(&cg, &uc, grid)
        }
        None => {
            let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) / spec.lambda;
            vec![top; grid.n_active()]
        }
    };
    let op = Operator {
        grid,
        e: spec.exponents,
        lambda: spec.lambda,
        eps: 0.0,
        f: &f,
        exterior: Exterior::Forbidden,
    };
    let solved = op.solve(u0, scheme.sweep_tolerance, scheme.max_iterations)?;
    let update = if solved.iterations == 0 { 0.0 } else { solved.last_update };
    Ok((solved.u, solved.iterations, update))
}

/// Multilinear interpolation of a coarse field onto the nodes of `fine`.
fn prolongate(coarse: &Grid, uc: &[f64], fine: &Grid) -> Vec<f64> {
    let corners = 1usize << coarse.dim();
    let mut idx = vec![0u32; corners];
    let mut w = vec![0.0; corners];
    (0..fine.n_active())
        .map(|a| {
            interpolation(coarse, fine.point(a), &mut idx, &mut w);
            idx.iter().zip(&w).map(|(&i, &wt)| wt * uc[i as usize]).sum()
        })
        .collect()
}

fn finish(spec: &ProblemSpec, grid: &Arc<Grid>, u: Vec<f64>, iterations: usize, final_update: f64) -> Result<SolveResult> {
    let u = GridFunction::new(grid.clone(), u)?;
    if !u.is_finite() {
        return Err(Error::NonConvergence { solver: "first-order solver", iterations, last_update: f64::NAN });
    }
    let cert = residual_certificate(&u, spec)?;
    Ok(SolveResult {
        u,
        iterations,
        final_update,
        interior_residual: cert.interior_residual,
        boundary_deficit: cert.boundary_deficit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualCertificate {
    /// `max |lambda u + |D u|^p - f|` over interior nodes, Godunov differences.
    pub interior_residual: f64,
    /// `min (lambda u + |D u|^p - f)` over band nodes, one-sided differences
    /// only towards active neighbours.
    pub boundary_deficit: f64,
}

pub fn residual_certificate(u: &GridFunction, spec: &ProblemSpec) -> Result<ResidualCertificate> {
    let grid = u.grid();
    check_grid(spec, grid)?;
    let f = data_on(spec, grid);
    let op = Operator {
        grid,
        e: spec.exponents,
        lambda: spec.lambda,
        eps: 0.0,
        f: &f,
        exterior: Exterior::Forbidden,
    };
    let r = op.residual(u.values());
    let mut interior = 0.0f64;
    let mut deficit = f64::INFINITY;
    for (a, &ra) in r.iter().enumerate() {
        match grid.class(a) {
            NodeClass::Interior => interior = interior.max(ra.abs()),
            NodeClass::Band => deficit = deficit.min(ra),
            NodeClass::Exterior => {}
        }
    }
    Ok(ResidualCertificate {
        interior_residual: interior,
        boundary_deficit: if deficit.is_finite() { deficit } else { 0.0 },
    })
}

/// Residual tolerance `C_RES * sqrt(h)` for first-order solutions.
pub const C_RES: f64 = 1.0;

pub fn residual_tol(h: f64) -> f64 {
    C_RES * h.sqrt()
}

/// Slope allowance `C_SLOPE * sqrt(h)` on top of `(osc f)^{1/p}`.
pub const C_SLOPE: f64 = 1.0;

pub fn slope_margin(h: f64) -> f64 {
    C_SLOPE * h.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCheck {
    pub slope: f64,
    pub bound: f64,
    pub margin: f64,
}

impl LipschitzCheck {
    pub fn passed(&self) -> bool {
        self.slope <= self.bound + self.margin
    }
}

/// Largest neighbour slope of `u` against `(osc f)^{1/p}`.
pub fn lipschitz_certificate(u: &GridFunction, spec: &ProblemSpec) -> Result<LipschitzCheck> {
    let osc = spec.f.osc()?;
    Ok(LipschitzCheck {
        slope: u.lipschitz_estimate(),
        bound: osc.powf(1.0 / spec.exponents.p),
        margin: slope_margin(u.grid().h()),
    })
}

/// Largest centred second difference of `u` over interior nodes whose
/// stencil is complete. The first-order solution is semiconcave with
/// constant `c_f / lambda`.
pub fn max_second_difference(u: &GridFunction) -> f64 {
    let g = u.grid();
    let v = u.values();
    let h2 = g.h() * g.h();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..g.n_active() {
        if g.class(a) != NodeClass::Interior {
            continue;
        }
        for axis in 0..g.dim() {
            if let (Some(m), Some(p)) = (g.neighbor(a, axis, -1), g.neighbor(a, axis, 1)) {
                worst = worst.max((v[m] + v[p] - 2.0 * v[a]) / h2);
            }
        }
    }
    worst
}
