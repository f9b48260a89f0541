//! Epsilon sweeps: solve `u` and `u^eps` on a grid ladder, estimate the
//! discretisation error, fit the convergence exponent and check the rate
//! bounds.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{theoretical_constants, TheoreticalConstants};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, Grid, GridFunction};
use crate::hamiltonian::ProblemSpec;
use crate::hj_first_order::{lipschitz_certificate, solve_first_order, FirstOrderScheme};
use crate::hj_viscous::{gradient_bound_certificate, solve_maximal_viscous, ViscousScheme};

/// Scheme error must stay below this fraction of the measured error.
pub const CONTAMINATION_RATIO: f64 = 0.1;
/// Minimum `r^2` before a slope verdict is issued.
pub const MIN_R_SQUARED: f64 = 0.98;
/// Allowed shortfall of the fitted slope below the theoretical exponent.
pub const SLOPE_TOLERANCE: f64 = 0.05;
/// `||u_SL - u_FD|| <= C_AGREE sqrt(h)`.
pub const C_AGREE: f64 = 0.05;

pub fn oracle_agreement_tol(h: f64) -> f64 {
    C_AGREE * h.sqrt()
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Problem family; its `epsilon` is ignored.
    pub base: ProblemSpec,
    pub eps_start: f64,
    pub eps_factor: f64,
    pub eps_count: usize,
    /// Grid policy: `h(eps)` is the largest power of two `<= min(h_max, eps)`.
    pub h_max: f64,
    pub first_order: FirstOrderScheme,
    /// Second first-order scheme compared against `first_order` on the
    /// coarsest sweep grid.
    pub cross_check: Option<FirstOrderScheme>,
    pub viscous: ViscousScheme,
    /// Halvings of `h` allowed per row to meet the contamination contract.
    pub max_refinements: usize,
    pub seed: u64,
}

impl SweepPlan {
    pub fn new(base: ProblemSpec, eps_start: f64, eps_factor: f64, eps_count: usize) -> Self {
        Self {
            base,
            eps_start,
            eps_factor,
            eps_count,
            h_max: 1.0 / 64.0,
            first_order: FirstOrderScheme::upwind_fd(),
            cross_check: Some(FirstOrderScheme::semi_lagrangian()),
            viscous: ViscousScheme::default(),
            max_refinements: 2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_start > 0.0 && self.eps_start.is_finite()) {
            return Err(Error::Config("eps_start must be positive".into()));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return Err(Error::Config("eps_factor must lie in (0, 1) so that epsilons decrease".into()));
        }
        if self.eps_count == 0 {
            return Err(Error::Config("eps_count must be at least 1".into()));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::Config("h_max must be positive".into()));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.eps_count).map(|j| self.eps_start * self.eps_factor.powi(j as i32)).collect()
    }

    pub fn grid_for(&self, eps: f64) -> f64 {
        dyadic_floor(self.h_max.min(eps))
    }
}

fn dyadic_floor(x: f64) -> f64 {
    2f64.powf(x.log2().floor())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeErrorEstimate {
    pub estimate: f64,
    /// Empirical order after clamping; `NaN` when the ladder was not monotone.
    pub order: f64,
    pub monotone: bool,
}

/// Richardson-type estimate of `||u_h - u||` from three nested solves,
/// compared at nodes of the coarse grid with distance `>= min_distance`.
pub fn richardson_from_fields(
    coarse: &GridFunction,
    mid: &GridFunction,
    fine: &GridFunction,
    min_distance: f64,
) -> Result<SchemeErrorEstimate> {
    let gc = coarse.grid();
    let m1 = gc.embed_into(mid.grid())?;
    let m2 = gc.embed_into(fine.grid())?;
    let mut d1 = 0.0f64;
    let mut d2 = 0.0f64;
    for a in 0..gc.n_active() {
        if gc.distance_to_boundary(a) < min_distance {
            continue;
        }
        let (c, m, f) = (coarse.values()[a], mid.values()[m1[a]], fine.values()[m2[a]]);
        d1 = d1.max((c - m).abs());
        d2 = d2.max((m - f).abs());
    }
    Ok(richardson_from_differences(d1, d2))
}

pub fn richardson_from_differences(d1: f64, d2: f64) -> SchemeErrorEstimate {
    if d1 == 0.0 {
        return SchemeErrorEstimate { estimate: 0.0, order: 2.2, monotone: true };
    }
    if d2 > d1 {
        return SchemeErrorEstimate { estimate: d1, order: f64::NAN, monotone: false };
    }
    let r = if d2 == 0.0 { 2.2 } else { (d1 / d2).log2().clamp(0.4, 2.2) };
    SchemeErrorEstimate { estimate: d1 / (1.0 - 2f64.powf(-r)), order: r, monotone: true }
}

#[derive(Debug, Clone, Copy)]
pub enum LadderSolver {
    FirstOrder(FirstOrderScheme),
    Viscous(ViscousScheme),
}

fn solve_on(spec: &ProblemSpec, grid: &Arc<Grid>, solver: &LadderSolver) -> Result<GridFunction> {
    match solver {
        LadderSolver::FirstOrder(s) => Ok(solve_first_order(spec, grid, s)?.u),
        LadderSolver::Viscous(s) => Ok(solve_maximal_viscous(spec, grid, s)?.u_eps),
    }
}

/// Solves `spec` on `h, h/2, h/4` and returns the Richardson estimate for
/// the `h` solution on nodes with `d >= 2h`.
pub fn richardson_scheme_error(spec: &ProblemSpec, h: f64, solver: &LadderSolver) -> Result<SchemeErrorEstimate> {
    let fields = (0..3)
        .map(|k| {
            let g = Arc::new(build_grid(&spec.domain, h / f64::from(1 << k))?);
            solve_on(spec, &g, solver)
        })
        .collect::<Result<Vec<_>>>()?;
    richardson_from_fields(&fields[0], &fields[1], &fields[2], 2.0 * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub epsilon: f64,
    pub h: f64,
    /// `max (u^eps - u)` over nodes with `d >= 2h`.
    pub sup_error: f64,
    pub min_signed: f64,
    pub abs_sup: f64,
    pub scheme_error_estimate: f64,
    /// Boundary-band allowance added to the scheme error in every verdict.
    pub band_slack: f64,
    pub certified: bool,
    pub refinements: usize,
    pub iterations_u: usize,
    pub ladder_levels: usize,
    pub newton_iterations: usize,
    /// Worst `slope - bound - margin` over the three first-order solves.
    pub lipschitz_excess: f64,
    /// Worst `ratio - 1 - margin` over the three viscous solves.
    pub gradient_excess: f64,
    pub warnings: Vec<String>,
}

impl RateRow {
    pub fn slack(&self) -> f64 {
        self.scheme_error_estimate + self.band_slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rows_used: usize,
}

/// Least squares of `log err` against `log eps`; rows with `err <= 0` are
/// skipped.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<Fit> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.1 > 0.0).map(|&(e, s)| (e.ln(), s.ln())).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientRows { needed: 4, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit needs at least two distinct epsilons".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Fit { slope, intercept, r_squared, rows_used: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    NotApplicable,
    InconclusiveFit,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::NotApplicable => "not-applicable",
            Outcome::InconclusiveFit => "inconclusive-fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub inequality: String,
    pub margin: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Verdict {
    fn na(name: &'static str, inequality: &str, why: &str) -> Self {
        Verdict {
            name,
            inequality: inequality.into(),
            margin: "-".into(),
            outcome: Outcome::NotApplicable,
            detail: why.into(),
        }
    }

    pub fn acceptable(&self) -> bool {
        matches!(self.outcome, Outcome::Pass | Outcome::NotApplicable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub h: f64,
    pub difference: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub data_name: String,
    pub p: f64,
    pub lambda: f64,
    pub dim: usize,
    pub seed: u64,
    pub rows: Vec<RateRow>,
    pub fit: Option<Fit>,
    pub fit_error: Option<String>,
    pub constants: TheoreticalConstants,
    pub cross_check: Option<CrossCheck>,
    pub verdicts: Vec<Verdict>,
    /// Certified `sup_error` nonincreasing as `eps` decreases, up to 5%.
    pub monotone_decay: bool,
    pub applicability: Applicability,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::acceptable)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Which estimates the data qualifies for, from its metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applicability {
    pub lower: bool,
    pub upper: bool,
    pub improved: bool,
}

pub fn applicability(spec: &ProblemSpec) -> Applicability {
    let m = spec.f.meta();
    let lower = m.lipschitz.is_some();
    let upper = m.nonnegative && m.vanishes_on_boundary;
    let semiconcave_compact = m.nonnegative && m.semiconcavity.is_some() && m.support_margin.is_some();
    let second_order = m.nonnegative && m.vanishes_to_second_order;
    Applicability { lower, upper, improved: spec.f.is_constant() || semiconcave_compact || second_order }
}

struct Ladder {
    u: Vec<GridFunction>,
    ue: Vec<GridFunction>,
    iterations_u: usize,
    ladder_levels: usize,
    newton_iterations: usize,
    lipschitz_excess: f64,
    gradient_excess: f64,
}

fn solve_ladder(plan: &SweepPlan, eps: f64, h: f64) -> Result<Ladder> {
    let spec = plan.base.with_epsilon(eps)?;
    let mut out = Ladder {
        u: vec![],
        ue: vec![],
        iterations_u: 0,
        ladder_levels: 0,
        newton_iterations: 0,
        lipschitz_excess: f64::NEG_INFINITY,
        gradient_excess: f64::NEG_INFINITY,
    };
    for k in 0..3 {
        let g = Arc::new(build_grid(&plan.base.domain, h / f64::from(1 << k))?);
        let u = solve_first_order(&plan.base, &g, &plan.first_order)?;
        let lip = lipschitz_certificate(&u.u, &plan.base)?;
        out.lipschitz_excess = out.lipschitz_excess.max(lip.slope - lip.bound - lip.margin);
        let v = solve_maximal_viscous(&spec, &g, &plan.viscous)?;
        let grad = gradient_bound_certificate(&v, &spec)?;
        out.gradient_excess = out.gradient_excess.max(grad.worst_ratio - 1.0 - grad.margin);
        if k == 0 {
            out.iterations_u = u.iterations;
            out.ladder_levels = v.ladder_levels_used;
            out.newton_iterations = v.newton_iterations;
        }
        out.u.push(u.u);
        out.ue.push(v.u_eps);
    }
    Ok(out)
}

/// Boundary-band allowance: Hoelder modulus of the boundary layer of
/// `u^eps` across `2h` plus the interior gradient bound times `2h`.
pub fn band_slack(spec: &ProblemSpec, eps: f64, h: f64) -> Result<f64> {
    let e = spec.exponents;
    let osc = spec.f.osc()?;
    let layer = eps.powf(1.0 - e.alpha_p) * (2.0 * h).powf(e.alpha_p) / e.alpha_p;
    let grad = (e.p / (e.p - 1.0) * osc).powf(1.0 / e.p) * 2.0 * h;
    Ok(layer + grad)
}

fn measure_row(plan: &SweepPlan, eps: f64) -> Result<RateRow> {
    let mut h = plan.grid_for(eps);
    let mut refinements = 0;
    loop {
        let l = solve_ladder(plan, eps, h)?;
        let g = l.u[0].grid().clone();
        let mut sup = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        let mut abs = 0.0f64;
        for a in 0..g.n_active() {
            if g.distance_to_boundary(a) < 2.0 * h {
                continue;
            }
            let d = l.ue[0].values()[a] - l.u[0].values()[a];
            sup = sup.max(d);
            min = min.min(d);
            abs = abs.max(d.abs());
        }
        let ru = richardson_from_fields(&l.u[0], &l.u[1], &l.u[2], 2.0 * h)?;
        let re = richardson_from_fields(&l.ue[0], &l.ue[1], &l.ue[2], 2.0 * h)?;
        let estimate = ru.estimate + re.estimate;
        let mut warnings = vec![];
        if !ru.monotone {
            warnings.push("non-monotone first-order ladder".to_string());
        }
        if !re.monotone {
            warnings.push("non-monotone viscous ladder".to_string());
        }
        let clean = estimate <= CONTAMINATION_RATIO * sup;
        if clean || refinements >= plan.max_refinements {
            if !clean {
                warnings.push(format!(
                    "scheme error {estimate:.3e} exceeds {CONTAMINATION_RATIO} x sup_error {sup:.3e}"
                ));
            }
            return Ok(RateRow {
                epsilon: eps,
                h,
                sup_error: sup,
                min_signed: min,
                abs_sup: abs,
                scheme_error_estimate: estimate,
                band_slack: band_slack(&plan.base, eps, h)?,
                certified: clean,
                refinements,
                iterations_u: l.iterations_u,
                ladder_levels: l.ladder_levels,
                newton_iterations: l.newton_iterations,
                lipschitz_excess: l.lipschitz_excess,
                gradient_excess: l.gradient_excess,
                warnings,
            });
        }
        h /= 2.0;
        refinements += 1;
    }
}

pub fn run_sweep(plan: &SweepPlan) -> Result<RateReport> {
    plan.validate()?;
    let base = &plan.base;
    let constants = theoretical_constants(&base.f, &base.domain, &base.exponents, base.lambda, base.domain.dim())?;
    let rows = plan.epsilons().par_iter().map(|&eps| measure_row(plan, eps)).collect::<Result<Vec<_>>>()?;

    let cross_check = match &plan.cross_check {
        Some(other) => {
            let h = plan.grid_for(plan.eps_start);
            let g = Arc::new(build_grid(&base.domain, h)?);
            let a = solve_first_order(base, &g, &plan.first_order)?;
            let b = solve_first_order(base, &g, other)?;
            let difference = a.u.values().iter().zip(b.u.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            Some(CrossCheck { h, difference, tolerance: oracle_agreement_tol(h) })
        }
        None => None,
    };

    let certified: Vec<(f64, f64)> = rows.iter().filter(|r| r.certified).map(|r| (r.epsilon, r.sup_error)).collect();
    let (fit, fit_error) = match fit_rate(&certified) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut monotone_decay = true;
    let mut prev: Option<f64> = None;
    for r in rows.iter().filter(|r| r.certified) {
        if let Some(q) = prev {
            if r.sup_error > 1.05 * q {
                monotone_decay = false;
            }
        }
        prev = Some(r.sup_error);
    }
    let mut report = RateReport {
        data_name: base.f.name().to_string(),
        p: base.exponents.p,
        lambda: base.lambda,
        dim: base.domain.dim(),
        seed: plan.seed,
        rows,
        fit,
        fit_error,
        constants,
        cross_check,
        verdicts: vec![],
        monotone_decay,
        applicability: applicability(base),
    };
    report.verdicts = validate_bounds(&report);
    Ok(report)
}

fn row_verdict(
    rows: &[RateRow],
    name: &'static str,
    inequality: String,
    check: impl Fn(&RateRow) -> (f64, f64),
) -> Verdict {
    // check returns (lhs, rhs) of `lhs <= rhs + slack`
    let certified: Vec<&RateRow> = rows.iter().filter(|r| r.certified).collect();
    if certified.is_empty() {
        return Verdict {
            name,
            inequality,
            margin: "slack = scheme_error_estimate + band".into(),
            outcome: Outcome::Fail,
            detail: "no certified rows".into(),
        };
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_eps = 0.0;
    let mut failed = 0;
    for r in &certified {
        let (lhs, rhs) = check(r);
        let excess = lhs - rhs - r.slack();
        if excess > worst {
            worst = excess;
            worst_eps = r.epsilon;
        }
        if excess > 0.0 {
            failed += 1;
        }
    }
    Verdict {
        name,
        inequality,
        margin: "slack = scheme_error_estimate + band".into(),
        outcome: if failed == 0 { Outcome::Pass } else { Outcome::Fail },
        detail: format!("{failed} of {} rows violate; worst excess {worst:.3e} at eps {worst_eps:.3e}", certified.len()),
    }
}

/// Verdicts for the lower, upper and improved bounds, the fitted exponent
/// and the solver certificates. Estimates whose hypotheses the data does not
/// meet are reported as not applicable.
pub fn validate_bounds(report: &RateReport) -> Vec<Verdict> {
    let c = &report.constants;
    let app = report.applicability;
    let norm = TheoreticalConstants::lambda_normalization(report.lambda);
    let lower = c.lambda_lower * norm;
    let upper = c.lambda_upper * norm;
    let improved_exp = 1.0 - c.alpha_p / 2.0;
    let mut out = vec![];

    let ineq = format!("min_signed >= -{lower:.6} sqrt(eps) - slack");
    out.push(if app.lower {
        row_verdict(&report.rows, "LOWER", ineq, |r| (-r.min_signed, lower * r.epsilon.sqrt()))
    } else {
        Verdict::na("LOWER", &ineq, "data has no declared Lipschitz constant")
    });

    let ineq = format!("sup_error <= {upper:.6} sqrt(eps) + slack");
    out.push(if app.upper {
        row_verdict(&report.rows, "UPPER", ineq, |r| (r.sup_error, upper * r.epsilon.sqrt()))
    } else {
        Verdict::na("UPPER", &ineq, "data is not nonnegative with zero boundary values")
    });

    let ineq = format!("sup_error <= {:.6} eps^{improved_exp:.6} + slack", c.improved_coeff);
    out.push(if app.improved {
        row_verdict(&report.rows, "IMPROVED", ineq, |r| (r.sup_error, c.improved_coeff * r.epsilon.powf(improved_exp)))
    } else {
        Verdict::na("IMPROVED", &ineq, "data is neither constant, compactly supported semiconcave, nor flat on the boundary")
    });

    let target = if app.improved {
        Some(improved_exp)
    } else if app.upper {
        Some(0.5)
    } else {
        None
    };
    out.push(match target {
        None => Verdict::na("SLOPE", "fitted_slope >= target - tol", "no upper rate applies"),
        Some(t) => {
            let inequality = format!("fitted_slope >= {t:.6} - {SLOPE_TOLERANCE}");
            let margin = format!("r_squared >= {MIN_R_SQUARED}");
            match &report.fit {
                None => Verdict {
                    name: "SLOPE",
                    inequality,
                    margin,
                    outcome: Outcome::Fail,
                    detail: report.fit_error.clone().unwrap_or_default(),
                },
                Some(f) if f.r_squared < MIN_R_SQUARED => Verdict {
                    name: "SLOPE",
                    inequality,
                    margin,
                    outcome: Outcome::InconclusiveFit,
                    detail: format!("slope {:.4}, r_squared {:.4}", f.slope, f.r_squared),
                },
                Some(f) => Verdict {
                    name: "SLOPE",
                    inequality,
                    margin,
                    outcome: if f.slope >= t - SLOPE_TOLERANCE { Outcome::Pass } else { Outcome::Fail },
                    detail: format!("slope {:.4}, r_squared {:.4}, {} rows", f.slope, f.r_squared, f.rows_used),
                },
            }
        }
    });

    let excess = |f: fn(&RateRow) -> f64| report.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let lip = excess(|r| r.lipschitz_excess);
    out.push(Verdict {
        name: "LIPSCHITZ",
        inequality: "max grid slope of u <= (osc f)^(1/p) + margin".into(),
        margin: "C_SLOPE sqrt(h)".into(),
        outcome: if lip <= 0.0 { Outcome::Pass } else { Outcome::Fail },
        detail: format!("worst excess {lip:.3e}"),
    });
    let grad = excess(|r| r.gradient_excess);
    out.push(Verdict {
        name: "GRADIENT",
        inequality: "|Du^eps| <= (p/(p-1) osc f + (eps/d)^(p/(p-1)))^(1/p) (1 + margin)".into(),
        margin: "C_GRAD sqrt(h)".into(),
        outcome: if grad <= 0.0 { Outcome::Pass } else { Outcome::Fail },
        detail: format!("worst excess {grad:.3e}"),
    });
    if let Some(x) = report.cross_check {
        out.push(Verdict {
            name: "CROSS_CHECK",
            inequality: "||u_a - u_b|| <= C_AGREE sqrt(h)".into(),
            margin: format!("C_AGREE = {C_AGREE}"),
            outcome: if x.difference <= x.tolerance { Outcome::Pass } else { Outcome::Fail },
            detail: format!("h {:.3e}: difference {:.3e}, tolerance {:.3e}", x.h, x.difference, x.tolerance),
        });
    }
    out
}

fn e(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table, one row per epsilon, followed by footer rows
/// `key,value` for the fit, the constants and the verdicts.
pub fn report_csv(report: &RateReport) -> String {
    let mut s = String::new();
    s.push_str(
        "epsilon,h,sup_error,min_signed_error,abs_sup_error,scheme_error_estimate,certified,solver_iterations_u,ladder_levels_ueps\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            e(r.epsilon),
            e(r.h),
            e(r.sup_error),
            e(r.min_signed),
            e(r.abs_sup),
            e(r.scheme_error_estimate),
            r.certified,
            r.iterations_u,
            r.ladder_levels
        );
    }
    let opt = |x: Option<f64>| x.map(e).unwrap_or_else(|| "nan".into());
    let _ = writeln!(s, "fitted_slope,{}", opt(report.fit.map(|f| f.slope)));
    let _ = writeln!(s, "fitted_intercept,{}", opt(report.fit.map(|f| f.intercept)));
    let _ = writeln!(s, "r_squared,{}", opt(report.fit.map(|f| f.r_squared)));
    let c = &report.constants;
    let _ = writeln!(s, "k,{}", e(c.k));
    let _ = writeln!(s, "C_Omega,{}", e(c.c_omega));
    let _ = writeln!(s, "Lambda_lower,{}", e(c.lambda_lower));
    let _ = writeln!(s, "Lambda_upper,{}", e(c.lambda_upper));
    let _ = writeln!(s, "improved_coeff,{}", e(c.improved_coeff));
    for v in &report.verdicts {
        let _ = writeln!(s, "verdict,{},{},\"{}\",\"{}\"", v.name, v.outcome.as_str(), v.inequality, v.detail);
    }
    s
}

/// Whitespace-separated columns: eps, sup_error, upper bound line, improved
/// bound line.
pub fn plot_data(report: &RateReport) -> String {
    let c = &report.constants;
    let norm = TheoreticalConstants::lambda_normalization(report.lambda);
    let mut s = String::from("# epsilon sup_error upper_bound improved_bound\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            e(r.epsilon),
            e(r.sup_error),
            e(c.lambda_upper * norm * r.epsilon.sqrt()),
            e(c.improved_coeff * r.epsilon.powf(1.0 - c.alpha_p / 2.0))
        );
    }
    s
}

pub fn plot_script(report: &RateReport, data_file: &str, image_file: &str) -> String {
    format!(
        "set terminal pngcairo size 800,600\n\
         set output '{image_file}'\n\
         set logscale xy\n\
         set xlabel 'epsilon'\n\
         set ylabel 'max(u^eps - u)'\n\
         set key left top\n\
         set title '{} p={} lambda={}'\n\
         plot '{data_file}' using 1:2 with linespoints title 'measured', \\\n\
         \x20    '' using 1:3 with lines title 'upper bound', \\\n\
         \x20    '' using 1:4 with lines title 'improved bound'\n",
        report.data_name, report.p, report.lambda
    )
}
