//! Exponent bookkeeping, the Hamiltonian `|xi|^p - f` with its Legendre dual
//! `c_p |v|^q + f`, and a small library of source terms with declared
//! regularity.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Grid, Point, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub c_p: f64,
    pub alpha_p: f64,
}

pub fn make_exponents(p: f64) -> Result<Exponents> {
    Exponents::new(p)
}

impl Exponents {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 2.0) {
            return Err(Error::Config(format!(
                "p = {p} is not superquadratic; the Hamiltonian |xi|^p requires p > 2"
            )));
        }
        Ok(Self {
            p,
            q: p / (p - 1.0),
            c_p: p.powf(-1.0 / (p - 1.0)) * (1.0 - 1.0 / p),
            alpha_p: (p - 2.0) / (p - 1.0),
        })
    }

    /// Rate exponent for semiconcave or flat data, `1 - alpha_p / 2`.
    pub fn improved_exponent(&self) -> f64 {
        1.0 - 0.5 * self.alpha_p
    }

    /// The control realising the supremum in the Legendre transform.
    pub fn optimal_control(&self, xi: &[f64]) -> Vec<f64> {
        let n = norm(xi);
        if n == 0.0 {
            return vec![0.0; xi.len()];
        }
        let scale = self.p * n.powf(self.p - 2.0);
        xi.iter().map(|x| scale * x).collect()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn hamiltonian_value(e: &Exponents, f_at_x: f64, xi: &[f64]) -> f64 {
    norm(xi).powf(e.p) - f_at_x
}

pub fn lagrangian_value(e: &Exponents, f_at_x: f64, v: &[f64]) -> f64 {
    e.c_p * norm(v).powf(e.q) + f_at_x
}

/// Velocity samples around the analytic maximiser: `radial` radii spread
/// over `[1 - spread, 1 + spread] * |v*|` and, in 2D, `angular` directions
/// within `angle_spread` radians of `v*`. Counts should be odd so that `v*`
/// itself is sampled.
#[derive(Debug, Clone, Copy)]
pub struct SamplingPlan {
    pub radial: usize,
    pub angular: usize,
    pub spread: f64,
    pub angle_spread: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { radial: 10_001, angular: 1, spread: 0.5, angle_spread: 0.5 }
    }
}

/// `H(xi) - max_samples (xi . v - L(v))`; the `f` terms cancel.
pub fn legendre_gap(e: &Exponents, xi: &[f64], plan: &SamplingPlan) -> f64 {
    let vstar = e.optimal_control(xi);
    let rstar = norm(&vstar);
    let base_angle = if xi.len() == 2 && rstar > 0.0 { vstar[1].atan2(vstar[0]) } else { 0.0 };
    let nr = plan.radial.max(1);
    let na = if xi.len() == 2 { plan.angular.max(1) } else { 1 };
    let mut best = f64::NEG_INFINITY;
    for i in 0..nr {
        let t = if nr == 1 { 0.0 } else { 2.0 * i as f64 / (nr - 1) as f64 - 1.0 };
        let r = if rstar > 0.0 { rstar * (1.0 + plan.spread * t) } else { plan.spread * (t + 1.0) };
        for j in 0..na {
            let s = if na == 1 { 0.0 } else { 2.0 * j as f64 / (na - 1) as f64 - 1.0 };
            let v: Vec<f64> = if xi.len() == 1 {
                vec![if rstar > 0.0 { r * vstar[0].signum() } else { r }]
            } else {
                let phi = base_angle + plan.angle_spread * s;
                vec![r * phi.cos(), r * phi.sin()]
            };
            let dot: f64 = xi.iter().zip(&v).map(|(a, b)| a * b).sum();
            best = best.max(dot - lagrangian_value(e, 0.0, &v));
        }
    }
    hamiltonian_value(e, 0.0, xi) - best
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Constant(f64),
    Distance,
    /// `height * (1 - |x - c|^2 / R^2)^3` inside the ball, zero outside.
    Bump { center: Point, radius: f64, height: f64 },
    /// `height * psi(d / cap)` with `psi(t) = t^2 (6 - 8t + 3t^2)`, flat past `cap`.
    DistanceSquaredCap { cap: f64, height: f64 },
    /// `height * max(0, 1 - |x - c| / R)`.
    InteriorPeak { center: Point, radius: f64, height: f64 },
}

/// Regularity metadata. `None` means "not declared".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataMeta {
    pub lipschitz: Option<f64>,
    pub osc: Option<f64>,
    pub sup: Option<f64>,
    pub inf: Option<f64>,
    pub semiconcavity: Option<f64>,
    pub support_margin: Option<f64>,
    pub nonnegative: bool,
    pub vanishes_on_boundary: bool,
    pub vanishes_to_second_order: bool,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Profile(Profile),
    Custom(Evaluator),
}

/// A source term with declared metadata.
#[derive(Clone)]
pub struct DataFunction {
    name: String,
    source: Source,
    domain: Domain,
    offset: f64,
    meta: DataMeta,
}

impl fmt::Debug for DataFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataFunction")
            .field("name", &self.name)
            .field("offset", &self.offset)
            .field("meta", &self.meta)
            .finish()
    }
}

/// Parameters accepted by [`data_library`].
#[derive(Debug, Clone, PartialEq)]
pub enum DataParams {
    Constant { value: f64 },
    Distance,
    Bump { center: Vec<f64>, radius: f64, height: f64, kappa: Option<f64> },
    DistanceSquaredCap { cap: f64, height: f64 },
    InteriorPeak { center: Vec<f64>, radius: f64, height: f64 },
}

pub fn data_library(domain: &Domain, params: &DataParams) -> Result<DataFunction> {
    let dim = domain.dim();
    let point = |c: &[f64]| -> Result<Point> {
        if c.len() != dim {
            return Err(Error::Config(format!(
                "center has {} coordinates, domain has dimension {dim}",
                c.len()
            )));
        }
        Ok(if dim == 1 { [c[0], 0.0] } else { [c[0], c[1]] })
    };
    let positive = |name: &str, v: f64| -> Result<()> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} must be positive, got {v}")))
        }
    };
    let (name, profile, meta) = match params {
        DataParams::Constant { value } => {
            if !value.is_finite() {
                return Err(Error::Config("constant value must be finite".into()));
            }
            let meta = DataMeta {
                lipschitz: Some(0.0),
                osc: Some(0.0),
                sup: Some(*value),
                inf: Some(*value),
                semiconcavity: Some(0.0),
                support_margin: None,
                nonnegative: *value >= 0.0,
                vanishes_on_boundary: *value == 0.0,
                vanishes_to_second_order: *value == 0.0,
            };
            (format!("constant({value})"), Profile::Constant(*value), meta)
        }
        DataParams::Distance => {
            let m = domain.max_boundary_distance();
            let k = match domain.shape() {
                Shape::Annulus { inner, .. } => 1.0 / inner,
                _ => 0.0,
            };
            let meta = DataMeta {
                lipschitz: Some(1.0),
                osc: Some(m),
                sup: Some(m),
                inf: Some(0.0),
                semiconcavity: Some(k),
                support_margin: None,
                nonnegative: true,
                vanishes_on_boundary: true,
                vanishes_to_second_order: false,
            };
            ("distance".to_string(), Profile::Distance, meta)
        }
        DataParams::Bump { center, radius, height, kappa } => {
            positive("bump radius", *radius)?;
            positive("bump height", *height)?;
            let c = point(center)?;
            let cx: Vec<f64> = c[..dim].to_vec();
            if !domain.contains(&cx) {
                return Err(Error::Config("bump center must lie inside the domain".into()));
            }
            let margin = domain.distance_to_boundary(&cx) - radius;
            // The annulus hole is not convex; require the ball to avoid it too.
            let margin = match domain.shape() {
                Shape::Annulus { center: ac, inner, .. } => {
                    let rho = (c[0] - ac[0]).hypot(c[1] - ac[1]);
                    margin.min(rho - inner - radius)
                }
                _ => margin,
            };
            let kappa = kappa.unwrap_or(margin);
            if !(kappa > 0.0) || margin < kappa * (1.0 - 1e-12) {
                return Err(Error::Config(format!(
                    "bump support leaks outside the interior region at margin {kappa}: \
                     the ball reaches distance {margin} from the boundary"
                )));
            }
            let (lip_shape, _) = bump_shape_constants();
            let meta = DataMeta {
                lipschitz: Some(height * lip_shape / radius),
                osc: Some(*height),
                sup: Some(*height),
                inf: Some(0.0),
                semiconcavity: Some(4.8 * height / (radius * radius)),
                support_margin: Some(kappa),
                nonnegative: true,
                vanishes_on_boundary: true,
                vanishes_to_second_order: true,
            };
            (
                format!("bump(radius={radius}, height={height})"),
                Profile::Bump { center: c, radius: *radius, height: *height },
                meta,
            )
        }
        DataParams::DistanceSquaredCap { cap, height } => {
            positive("cap", *cap)?;
            positive("height", *height)?;
            let ridge = domain.max_boundary_distance();
            if *cap >= ridge {
                return Err(Error::Config(format!(
                    "cap {cap} must be below the ridge distance {ridge} so the profile is smooth"
                )));
            }
            let curvature = match domain.shape() {
                Shape::Annulus { inner, .. } => (16.0 / 9.0) * height / cap / inner,
                _ => 0.0,
            };
            let meta = DataMeta {
                lipschitz: Some((16.0 / 9.0) * height / cap),
                osc: Some(*height),
                sup: Some(*height),
                inf: Some(0.0),
                semiconcavity: Some(12.0 * height / (cap * cap) + curvature),
                support_margin: None,
                nonnegative: true,
                vanishes_on_boundary: true,
                vanishes_to_second_order: true,
            };
            (
                format!("distance_squared_cap(cap={cap}, height={height})"),
                Profile::DistanceSquaredCap { cap: *cap, height: *height },
                meta,
            )
        }
        DataParams::InteriorPeak { center, radius, height } => {
            positive("peak radius", *radius)?;
            positive("peak height", *height)?;
            let c = point(center)?;
            if !domain.contains(&c[..dim]) {
                return Err(Error::Config("peak center must lie inside the domain".into()));
            }
            let far = farthest_distance(domain, c);
            let inf = height * (1.0 - far / radius).max(0.0);
            let meta = DataMeta {
                lipschitz: Some(height / radius),
                osc: Some(height - inf),
                sup: Some(*height),
                inf: Some(inf),
                semiconcavity: None,
                support_margin: None,
                nonnegative: true,
                vanishes_on_boundary: false,
                vanishes_to_second_order: false,
            };
            (
                format!("interior_peak(radius={radius}, height={height})"),
                Profile::InteriorPeak { center: c, radius: *radius, height: *height },
                meta,
            )
        }
    };
    Ok(DataFunction { name, source: Source::Profile(profile), domain: *domain, offset: 0.0, meta })
}

/// Largest distance from `c` to a point of the closed domain.
fn farthest_distance(domain: &Domain, c: Point) -> f64 {
    match domain.shape() {
        Shape::Interval { a, b } => (c[0] - a).abs().max((b - c[0]).abs()),
        Shape::Disk { center, radius } | Shape::Annulus { center, outer: radius, .. } => {
            (c[0] - center[0]).hypot(c[1] - center[1]) + radius
        }
    }
}

/// Lipschitz constant and semiconcavity constant of `(1 - r^2)^3` on the unit ball.
fn bump_shape_constants() -> (f64, f64) {
    // g'(r) = -6 r (1 - r^2)^2 peaks at r = 1/sqrt(5); g'' peaks at r^2 = 3/5.
    let r = 5f64.sqrt().recip();
    (6.0 * r * (1.0 - r * r).powi(2), 4.8)
}

fn psi_cap(t: f64) -> f64 {
    if t >= 1.0 {
        1.0
    } else {
        t * t * (6.0 - 8.0 * t + 3.0 * t * t)
    }
}

impl DataFunction {
    /// Wraps an arbitrary evaluator; metadata must be supplied by the caller.
    pub fn from_fn(
        name: impl Into<String>,
        domain: &Domain,
        meta: DataMeta,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            source: Source::Custom(Arc::new(f)),
            domain: *domain,
            offset: 0.0,
            meta,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meta(&self) -> &DataMeta {
        &self.meta
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let p = if x.len() == 1 { [x[0], 0.0] } else { [x[0], x[1]] };
        self.eval_pt(p)
    }

    pub(crate) fn eval_pt(&self, x: Point) -> f64 {
        let base = match &self.source {
            Source::Custom(f) => f(&x[..self.domain.dim()]),
            Source::Profile(p) => match *p {
                Profile::Constant(c) => c,
                Profile::Distance => self.domain.distance_to_boundary_pt(x),
                Profile::Bump { center, radius, height } => {
                    let r2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2))
                        / (radius * radius);
                    if r2 >= 1.0 {
                        0.0
                    } else {
                        height * (1.0 - r2).powi(3)
                    }
                }
                Profile::DistanceSquaredCap { cap, height } => {
                    let d = self.domain.distance_to_boundary_pt(x);
                    height * psi_cap(d / cap)
                }
                Profile::InteriorPeak { center, radius, height } => {
                    let r = (x[0] - center[0]).hypot(x[1] - center[1]);
                    height * (1.0 - r / radius).max(0.0)
                }
            },
        };
        base + self.offset
    }

    /// `f + c`, with metadata updated accordingly.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.offset += c;
        if c != 0.0 {
            out.name = format!("{} + {c}", self.name);
            let m = &mut out.meta;
            m.sup = m.sup.map(|s| s + c);
            m.inf = m.inf.map(|s| s + c);
            m.nonnegative = m.inf.is_some_and(|i| i >= 0.0);
            m.vanishes_on_boundary = false;
            m.vanishes_to_second_order = false;
            m.support_margin = None;
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.meta.osc == Some(0.0) && self.meta.lipschitz == Some(0.0)
    }

    pub fn lipschitz(&self) -> Result<f64> {
        self.meta.lipschitz.ok_or(Error::MissingMetadata("lipschitz_const"))
    }

    pub fn osc(&self) -> Result<f64> {
        self.meta.osc.ok_or(Error::MissingMetadata("osc"))
    }

    pub fn sup(&self) -> Result<f64> {
        self.meta.sup.ok_or(Error::MissingMetadata("sup"))
    }

    pub fn inf(&self) -> Result<f64> {
        self.meta.inf.ok_or(Error::MissingMetadata("inf"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub lipschitz: f64,
    pub osc: f64,
    /// Largest centred second difference; `+inf` once it exceeds `SEMICONCAVITY_CAP`.
    pub semiconcavity: f64,
}

/// Second differences above this are reported as an unbounded semiconcavity constant.
pub const SEMICONCAVITY_CAP: f64 = 1e6;

pub fn estimate_regularity(f: &DataFunction, grid: &Grid) -> Regularity {
    let h = grid.h();
    let vals: Vec<f64> = (0..grid.n_active()).map(|a| f.eval_pt(grid.point(a))).collect();
    let mut lip = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sc = f64::NEG_INFINITY;
    for a in 0..grid.n_active() {
        lo = lo.min(vals[a]);
        hi = hi.max(vals[a]);
        for axis in 0..grid.dim() {
            let plus = grid.neighbor(a, axis, 1);
            if let Some(b) = plus {
                lip = lip.max((vals[b] - vals[a]).abs() / h);
            }
            if let (Some(b), Some(c)) = (plus, grid.neighbor(a, axis, -1)) {
                sc = sc.max((vals[b] + vals[c] - 2.0 * vals[a]) / (h * h));
            }
        }
    }
    if sc > SEMICONCAVITY_CAP {
        sc = f64::INFINITY;
    }
    Regularity { lipschitz: lip, osc: hi - lo, semiconcavity: sc.max(0.0) }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub exponents: Exponents,
    pub lambda: f64,
    pub epsilon: f64,
    pub f: DataFunction,
}

impl ProblemSpec {
    pub fn new(domain: Domain, p: f64, lambda: f64, epsilon: f64, f: DataFunction) -> Result<Self> {
        let exponents = Exponents::new(p)?;
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if f.domain() != &domain {
            return Err(Error::Config("data function was built for a different domain".into()));
        }
        Ok(Self { domain, exponents, lambda, epsilon, f })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.domain, self.exponents.p, self.lambda, epsilon, self.f.clone())
    }

    pub fn with_data(&self, f: DataFunction) -> Result<Self> {
        Self::new(self.domain, self.exponents.p, self.lambda, self.epsilon, f)
    }

    pub fn is_first_order(&self) -> bool {
        self.epsilon == 0.0
    }
}
