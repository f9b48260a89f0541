//! Plain-text field files and the certificates computed from them.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use hjrate::analysis::{semiconcavity_estimate, semiconcavity_margin};
use hjrate::hj_first_order::{lipschitz_certificate, residual_certificate, residual_tol};
use hjrate::hj_viscous::{constant_data_check, gradient_certificate, lower_bound_check, viscous_residual, viscous_residual_tol};
use hjrate::{build_grid, Error, GridFunction, ProblemSpec, Result};

use crate::config::RunConfig;

pub const FIRST_ORDER_FIELD: &str = "u_first_order.txt";
pub const FIRST_ORDER_CERT: &str = "u_first_order.cert.csv";
pub const VISCOUS_FIELD: &str = "u_eps.txt";
pub const VISCOUS_CERT: &str = "u_eps.cert.csv";

/// Nodes closer than this to a stored coordinate count as the same node.
const COORD_TOL: f64 = 1e-12;

/// `# `-prefixed copy of the resolved config.
pub fn header(title: &str, cfg: &RunConfig) -> String {
    let mut s = format!("# {title}\n");
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            let _ = writeln!(s, "# {line}");
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredField {
    pub epsilon: f64,
    pub h: f64,
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn write_field(u: &GridFunction, epsilon: f64, cfg: &RunConfig) -> String {
    let g = u.grid();
    let mut s = header("hjrate field", cfg);
    let _ = writeln!(s, "# field.epsilon = {epsilon:.16e}");
    let _ = writeln!(s, "# field.h = {:.16e}", g.h());
    let _ = writeln!(s, "# field.n_active = {}", g.n_active());
    let cols = if g.dim() == 1 { "x value" } else { "x y value" };
    let _ = writeln!(s, "# columns = {cols}");
    for (a, v) in u.values().iter().enumerate() {
        for c in g.coords(a) {
            let _ = write!(s, "{c:.16e} ");
        }
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

fn bad(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {what}", path.display()))
}

pub fn read_field(path: &Path) -> Result<StoredField> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(path, e))?;
    let mut epsilon = None;
    let mut h = None;
    let mut n = None;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("# field.") {
            let (key, val) = rest.split_once(" = ").ok_or_else(|| bad(path, format!("line {}: malformed", k + 1)))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(path, format!("line {}: bad number", k + 1)));
            match key {
                "epsilon" => epsilon = Some(num(val)?),
                "h" => h = Some(num(val)?),
                "n_active" => {
                    n = Some(val.parse::<usize>().map_err(|_| bad(path, format!("line {}: bad count", k + 1)))?)
                }
                _ => return Err(bad(path, format!("line {}: unknown field key `{key}`", k + 1))),
            }
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(path, format!("line {}: bad number", k + 1)))?;
        if nums.len() < 2 {
            return Err(bad(path, format!("line {}: expected coordinates and a value", k + 1)));
        }
        let (v, x) = nums.split_last().unwrap();
        coords.push(x.to_vec());
        values.push(*v);
    }
    let (Some(epsilon), Some(h), Some(n)) = (epsilon, h, n) else {
        return Err(bad(path, "missing field.epsilon, field.h or field.n_active"));
    };
    if values.len() != n {
        return Err(bad(path, format!("header announces {n} nodes, file has {}", values.len())));
    }
    Ok(StoredField { epsilon, h, coords, values })
}

/// Rebuilds the grid the config prescribes and attaches the stored values,
/// refusing fields written for another grid.
pub fn restore(stored: &StoredField, cfg: &RunConfig) -> Result<(ProblemSpec, GridFunction)> {
    let spec = cfg.spec(stored.epsilon)?;
    let h = cfg.grid_step(stored.epsilon)?;
    if h != stored.h {
        return Err(Error::GridMismatch(format!("stored field has h = {:e}, config gives h = {h:e}", stored.h)));
    }
    let grid = Arc::new(build_grid(&spec.domain, h)?);
    if grid.n_active() != stored.values.len() {
        return Err(Error::GridMismatch(format!(
            "stored field has {} nodes, config grid has {}",
            stored.values.len(),
            grid.n_active()
        )));
    }
    for (a, x) in stored.coords.iter().enumerate() {
        let y = grid.coords(a);
        if x.len() != y.len() || x.iter().zip(&y).any(|(p, q)| (p - q).abs() > COORD_TOL) {
            return Err(Error::GridMismatch(format!("node {a}: stored at {x:?}, config grid has {y:?}")));
        }
    }
    let u = GridFunction::new(grid, stored.values.clone())?;
    Ok((spec, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub status: Status,
}

fn check(name: &'static str, value: f64, bound: f64, ok: bool) -> Check {
    Check { name, value, bound, status: Status::of(ok) }
}

fn not_applicable(name: &'static str) -> Check {
    Check { name, value: f64::NAN, bound: f64::NAN, status: Status::NotApplicable }
}

pub fn first_order_checks(u: &GridFunction, spec: &ProblemSpec) -> Result<Vec<Check>> {
    let h = u.grid().h();
    let tol = residual_tol(h);
    let res = residual_certificate(u, spec)?;
    let lip = lipschitz_certificate(u, spec)?;
    let mut out = vec![
        check("interior_residual", res.interior_residual, tol, res.interior_residual <= tol),
        check("boundary_supersolution", res.boundary_deficit, -tol, res.boundary_deficit >= -tol),
        check("lipschitz", lip.slope, lip.bound + lip.margin, lip.passed()),
    ];
    let m = spec.f.meta();
    out.push(match m.semiconcavity {
        Some(cf) if m.nonnegative && m.support_margin.is_some() => {
            let est = semiconcavity_estimate(u, 2.0 * h);
            let bound = cf / spec.lambda + semiconcavity_margin(h);
            check("semiconcavity", est, bound, est <= bound)
        }
        _ => not_applicable("semiconcavity"),
    });
    Ok(out)
}

pub fn viscous_checks(u: &GridFunction, spec: &ProblemSpec) -> Result<Vec<Check>> {
    let h = u.grid().h();
    let tol = viscous_residual_tol(h, spec.epsilon);
    // comparison turns a residual into a sup-norm error bound
    let slack = tol / spec.lambda;
    let res = viscous_residual(u, spec)?;
    let grad = gradient_certificate(u, spec)?;
    let low = lower_bound_check(u, spec);
    let mut out = vec![
        check("viscous_residual", res, tol, res <= tol),
        check("gradient_bound", grad.worst_ratio, 1.0 + grad.margin, grad.passed()),
        check("lower_bound", low.min_value, low.bound - slack, low.passed(slack)),
    ];
    if spec.f.is_constant() {
        let c = constant_data_check(u, spec)?;
        out.push(check("constant_data_lower", c.min_excess, -slack, c.min_excess >= -slack));
        out.push(check("constant_data_upper", c.max_excess, c.bound + slack, c.max_excess <= c.bound + slack));
    } else {
        out.push(not_applicable("constant_data_lower"));
        out.push(not_applicable("constant_data_upper"));
    }
    Ok(out)
}

pub fn certificate_text(checks: &[Check], cfg: &RunConfig, title: &str) -> String {
    let mut s = header(title, cfg);
    s.push_str("check,value,bound,status\n");
    for c in checks {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{}", c.name, c.value, c.bound, c.status.as_str());
    }
    s
}
