use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hjrate::experiments::SweepPlan;
use hjrate::hj_first_order::FirstOrderScheme;
use hjrate::hj_viscous::ViscousScheme;
use hjrate::{data_library, DataParams, Domain, Error, ProblemSpec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub problem: ProblemConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub first_order: FirstOrderConfig,
    #[serde(default)]
    pub viscous: ViscousConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Constant {
        value: f64,
    },
    Distance {},
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    DistanceSquaredCap {
        cap: f64,
        height: f64,
    },
    InteriorPeak {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_start: f64,
    pub eps_factor: f64,
    pub eps_count: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps_start: 0.1, eps_factor: 0.5, eps_count: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicy {
    /// `h(eps)` = largest power of two not above `min(h_max, eps)`.
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h_max: f64,
    pub policy: GridPolicy,
    pub max_refinements: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { h_max: 1.0 / 64.0, policy: GridPolicy::Dyadic, max_refinements: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    UpwindFd,
    SemiLagrangian,
    None,
}

/// Unset numeric fields take the defaults of the chosen scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirstOrderConfig {
    pub scheme: SchemeName,
    /// Second scheme run on the coarsest sweep grid for comparison.
    pub cross_check: SchemeName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

impl Default for FirstOrderConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeName::UpwindFd,
            cross_check: SchemeName::SemiLagrangian,
            radii: None,
            radius_ratio: None,
            directions: None,
            v_max: None,
            sweep_tolerance: None,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscousConfig {
    pub m0: f64,
    pub ladder_ratio: f64,
    pub ladder_levels: usize,
    pub newton_tolerance: f64,
    pub max_newton_iters: usize,
    pub ladder_stop_tol: f64,
}

impl Default for ViscousConfig {
    fn default() -> Self {
        let s = ViscousScheme::default();
        Self {
            m0: s.m0,
            ladder_ratio: s.ladder_ratio,
            ladder_levels: s.ladder_levels,
            newton_tolerance: s.newton_tolerance,
            max_newton_iters: s.max_newton_iters,
            ladder_stop_tol: s.ladder_stop_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_plot: bool,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), emit_plot: false, seed: 0 }
    }
}

fn scheme_base(name: SchemeName) -> Option<FirstOrderScheme> {
    match name {
        SchemeName::UpwindFd => Some(FirstOrderScheme::upwind_fd()),
        SchemeName::SemiLagrangian => Some(FirstOrderScheme::semi_lagrangian()),
        SchemeName::None => None,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses, fills scheme defaults and validates every physical parameter.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let base = scheme_base(cfg.first_order.scheme)
            .ok_or_else(|| Error::Config("first_order.scheme must be upwind_fd or semi_lagrangian".into()))?;
        let fo = &mut cfg.first_order;
        fo.radii.get_or_insert(base.radii);
        fo.radius_ratio.get_or_insert(base.radius_ratio);
        fo.directions.get_or_insert(base.directions);
        fo.sweep_tolerance.get_or_insert(base.sweep_tolerance);
        fo.max_iterations.get_or_insert(base.max_iterations);
        cfg.plan()?.validate()?;
        Ok(cfg)
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn domain(&self) -> Result<Domain> {
        match self.domain {
            DomainConfig::Interval { a, b } => Domain::interval(a, b),
            DomainConfig::Disk { center, radius } => Domain::disk(center, radius),
            DomainConfig::Annulus { center, inner, outer } => Domain::annulus(center, inner, outer),
        }
    }

    pub fn data_params(&self) -> DataParams {
        match self.data.clone() {
            DataConfig::Constant { value } => DataParams::Constant { value },
            DataConfig::Distance {} => DataParams::Distance,
            DataConfig::Bump { center, radius, height, kappa } => DataParams::Bump { center, radius, height, kappa },
            DataConfig::DistanceSquaredCap { cap, height } => DataParams::DistanceSquaredCap { cap, height },
            DataConfig::InteriorPeak { center, radius, height } => DataParams::InteriorPeak { center, radius, height },
        }
    }

    pub fn spec(&self, epsilon: f64) -> Result<ProblemSpec> {
        let d = self.domain()?;
        let f = data_library(&d, &self.data_params())?;
        ProblemSpec::new(d, self.problem.p, self.problem.lambda, epsilon, f)
    }

    fn scheme(&self, name: SchemeName) -> Option<FirstOrderScheme> {
        let fo = &self.first_order;
        let mut s = scheme_base(name)?;
        s.radii = fo.radii.unwrap_or(s.radii);
        s.radius_ratio = fo.radius_ratio.unwrap_or(s.radius_ratio);
        s.directions = fo.directions.unwrap_or(s.directions);
        s.v_max = fo.v_max;
        // tolerances belong to the primary scheme; the cross-check keeps its own
        if name == fo.scheme {
            s.sweep_tolerance = fo.sweep_tolerance.unwrap_or(s.sweep_tolerance);
            s.max_iterations = fo.max_iterations.unwrap_or(s.max_iterations);
        }
        Some(s)
    }

    pub fn first_order_scheme(&self) -> FirstOrderScheme {
        self.scheme(self.first_order.scheme).expect("validated at parse time")
    }

    pub fn viscous_scheme(&self) -> ViscousScheme {
        let v = &self.viscous;
        ViscousScheme {
            m0: v.m0,
            ladder_ratio: v.ladder_ratio,
            ladder_levels: v.ladder_levels,
            newton_tolerance: v.newton_tolerance,
            max_newton_iters: v.max_newton_iters,
            ladder_stop_tol: v.ladder_stop_tol,
        }
    }

    pub fn plan(&self) -> Result<SweepPlan> {
        let s = &self.sweep;
        let mut plan = SweepPlan::new(self.spec(0.0)?, s.eps_start, s.eps_factor, s.eps_count);
        plan.h_max = self.grid.h_max;
        plan.max_refinements = self.grid.max_refinements;
        plan.first_order = self.scheme(self.first_order.scheme)
            .ok_or_else(|| Error::Config("first_order.scheme must be upwind_fd or semi_lagrangian".into()))?;
        plan.cross_check = self.scheme(self.first_order.cross_check);
        plan.viscous = self.viscous_scheme();
        plan.seed = self.output.seed;
        Ok(plan)
    }

    /// Grid step for a solve: the sweep grid policy at `epsilon`, or
    /// `h_max` rounded down to a power of two for the first-order problem.
    pub fn grid_step(&self, epsilon: f64) -> Result<f64> {
        let plan = self.plan()?;
        Ok(if epsilon > 0.0 { plan.grid_for(epsilon) } else { plan.grid_for(self.grid.h_max) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hjrate::hj_first_order::SchemeKind;

    const MINIMAL: &str = r#"
[domain]
type = "interval"
a = 0.0
b = 1.0

[problem]
p = 3.0
lambda = 1.0

[data]
name = "distance"
"#;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.first_order.sweep_tolerance, Some(FirstOrderScheme::upwind_fd().sweep_tolerance));
        assert_eq!(c.grid.h_max, 1.0 / 64.0);
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_fatal() {
        for extra in ["\n[grid]\nh_mx = 0.1\n", "\n[output]\nseeed = 3\n", "\n[extra]\nx = 1\n"] {
            let err = RunConfig::parse(&format!("{MINIMAL}{extra}")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
        }
        let bad_data = MINIMAL.replace("name = \"distance\"", "name = \"distance\"\nheight = 2.0");
        assert!(RunConfig::parse(&bad_data).is_err());
        let bad_domain = MINIMAL.replace("b = 1.0", "b = 1.0\nradius = 2.0");
        assert!(RunConfig::parse(&bad_domain).is_err());
    }

    #[test]
    fn physical_parameters_are_validated() {
        let err = RunConfig::parse(&MINIMAL.replace("p = 3.0", "p = 2.0")).unwrap_err();
        assert!(err.to_string().contains("superquadratic"));
        assert!(RunConfig::parse(&MINIMAL.replace("lambda = 1.0", "lambda = 2.0")).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("b = 1.0", "b = -1.0")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}\n[sweep]\neps_factor = 1.5\n")).is_err());
    }

    #[test]
    fn cross_check_keeps_its_own_tolerance() {
        let c = RunConfig::parse(&format!("{MINIMAL}\n[first_order]\nsweep_tolerance = 1e-9\n")).unwrap();
        let plan = c.plan().unwrap();
        assert_eq!(plan.first_order.sweep_tolerance, 1e-9);
        assert_eq!(plan.cross_check.unwrap().sweep_tolerance, FirstOrderScheme::semi_lagrangian().sweep_tolerance);
        assert_eq!(c.first_order_scheme().kind, SchemeKind::UpwindFd);
    }
}
