//! Configuration schema: a strict TOML file (unknown keys rejected) with
//! dotted-path command-line overrides applied before validation.

use serde::Deserialize;

use finsler_optics::design::{DirectionWeight, InteriorRegime, WeightProfile};
use finsler_optics::medium::GridSpec;
use finsler_optics::ray::{Domain, IntegratorConfig};
use finsler_optics::scenario::{Heading, RayFan, ShieldScenario};
use finsler_optics::FdConfig;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub scenario: ScenarioSection,
    pub weight: WeightSection,
    pub fan: FanSection,
    pub integrator: IntegratorSection,
    pub fd: FdSection,
    pub analysis: AnalysisSection,
    pub field: FieldSection,
    pub plot: PlotSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub shield_radius: f64,
    pub device_radius: f64,
    pub cosh_offset: f64,
    pub alpha_clamp: f64,
    pub launch_distance: f64,
    pub impedance: f64,
    /// "shielded" keeps the shielded region impassable for transformed
    /// directions; "emission" fills it with the radial-stretch tensor.
    pub interior: String,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            shield_radius: 1.0,
            device_radius: 2.0,
            cosh_offset: 0.5,
            alpha_clamp: finsler_optics::consts::DEFAULT_ALPHA_CLAMP,
            launch_distance: 4.0,
            impedance: 1.0,
            interior: "shielded".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    /// "step", "smooth", or "constant".
    pub profile: String,
    pub transition_width: f64,
    /// Weight value used by the constant profile.
    pub constant_value: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            profile: "smooth".into(),
            transition_width: finsler_optics::consts::DEFAULT_TRANSITION_WIDTH,
            constant_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FanSection {
    pub count: usize,
    pub max_impact: f64,
    /// "leftward", "rightward", or "both".
    pub heading: String,
}

impl Default for FanSection {
    fn default() -> Self {
        FanSection {
            count: 21,
            max_impact: 1.8,
            heading: "both".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub step: f64,
    pub max_steps: usize,
    pub renorm_every: usize,
    /// Half-width of the square integration domain; defaults to
    /// `1.1 * launch_distance`.
    pub domain_half_width: Option<f64>,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            step: 1e-3,
            max_steps: 200_000,
            renorm_every: 16,
            domain_half_width: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdSection {
    pub h_y: f64,
    pub h_x: f64,
}

impl Default for FdSection {
    fn default() -> Self {
        let d = FdConfig::default();
        FdSection { h_y: d.h_y, h_x: d.h_x }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub tol_pass: f64,
    pub tol_block: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            tol_pass: finsler_optics::consts::DEFAULT_TOL_PASS,
            tol_block: finsler_optics::consts::DEFAULT_TOL_BLOCK,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub direction_bins: usize,
    /// Relative width of the annulus clipped next to the inner boundary.
    pub r_guard: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            x_min: -2.0,
            x_max: 2.0,
            y_min: -2.0,
            y_max: 2.0,
            nx: 21,
            ny: 21,
            direction_bins: 16,
            r_guard: finsler_optics::consts::DEFAULT_R_GUARD,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSection {
    /// Trajectories are decimated to at most this many points per ray.
    pub max_points_per_ray: usize,
    pub stroke_width: f64,
}

impl Default for PlotSection {
    fn default() -> Self {
        PlotSection {
            max_points_per_ray: 2000,
            stroke_width: 0.02,
        }
    }
}

/// Which fans a trace run launches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanHeading {
    Leftward,
    Rightward,
    Both,
}

impl Config {
    /// Loads the file (or defaults when `path` is `None`), applies dotted
    /// `key=value` overrides, and validates strictly.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Config, String> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("config parse error: {e}"))?
            }
            None => toml::Value::Table(Default::default()),
        };
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: Config = value
            .try_into()
            .map_err(|e| format!("config schema error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        let s = &self.scenario;
        if !(0.0 < s.shield_radius && s.shield_radius < s.device_radius) {
            return Err("scenario: need 0 < shield_radius < device_radius".into());
        }
        if s.device_radius >= s.launch_distance {
            return Err("scenario: need device_radius < launch_distance".into());
        }
        if s.cosh_offset < 0.0 {
            return Err("scenario: cosh_offset must be non-negative".into());
        }
        if !(0.0 < s.alpha_clamp && s.alpha_clamp < 1.0) {
            return Err("scenario: alpha_clamp must lie in (0, 1)".into());
        }
        if s.impedance <= 0.0 {
            return Err("scenario: impedance must be positive".into());
        }
        self.interior()?;
        self.weight()?;
        self.fan_heading()?;
        if self.fan.count == 0 {
            return Err("fan: count must be positive".into());
        }
        if !self.fan.max_impact.is_finite() || self.fan.max_impact.abs() >= s.launch_distance {
            return Err("fan: |max_impact| must be below launch_distance".into());
        }
        if self.integrator.step <= 0.0 {
            return Err("integrator: step must be positive".into());
        }
        // A step too coarse for the annulus would let rays hop over the
        // interface detection.
        let annulus = s.device_radius - s.shield_radius;
        if self.integrator.step > annulus / 4.0 {
            return Err(format!(
                "integrator: step {} cannot resolve the device annulus (width {annulus}); keep it below {}",
                self.integrator.step,
                annulus / 4.0
            ));
        }
        if self.integrator.max_steps == 0 || self.integrator.renorm_every == 0 {
            return Err("integrator: max_steps and renorm_every must be positive".into());
        }
        let fd = self.fd();
        if !fd.validate() {
            return Err("fd: steps must lie in (0, 1)".into());
        }
        if self.analysis.tol_pass <= 0.0 || !(0.0..1.0).contains(&self.analysis.tol_block) {
            return Err("analysis: tol_pass must be positive, tol_block in [0, 1)".into());
        }
        if self.field.nx == 0 || self.field.ny == 0 {
            return Err("field: nx and ny must be positive".into());
        }
        if self.field.direction_bins < 4 {
            return Err("field: direction_bins must be at least 4".into());
        }
        if self.field.r_guard < 0.0 {
            return Err("field: r_guard must be non-negative".into());
        }
        if self.plot.max_points_per_ray < 2 {
            return Err("plot: max_points_per_ray must be at least 2".into());
        }
        Ok(())
    }

    pub fn interior(&self) -> Result<InteriorRegime, String> {
        match self.scenario.interior.as_str() {
            "shielded" => Ok(InteriorRegime::Shielded),
            "emission" => Ok(InteriorRegime::Emission),
            other => Err(format!(
                "scenario.interior must be \"shielded\" or \"emission\", got \"{other}\""
            )),
        }
    }

    pub fn weight(&self) -> Result<DirectionWeight, String> {
        match self.weight.profile.as_str() {
            "step" => Ok(DirectionWeight::step()),
            "smooth" => {
                let w = self.weight.transition_width;
                if !(0.0 < w && w < std::f64::consts::FRAC_PI_2) {
                    return Err("weight.transition_width must lie in (0, pi/2)".into());
                }
                Ok(DirectionWeight::smooth(w))
            }
            "constant" => {
                let v = self.weight.constant_value;
                if !(0.0..=1.0).contains(&v) {
                    return Err("weight.constant_value must lie in [0, 1]".into());
                }
                Ok(DirectionWeight {
                    profile: WeightProfile::Constant(v),
                    transition_width: 0.0,
                })
            }
            other => Err(format!(
                "weight.profile must be \"step\", \"smooth\", or \"constant\", got \"{other}\""
            )),
        }
    }

    pub fn fan_heading(&self) -> Result<FanHeading, String> {
        match self.fan.heading.as_str() {
            "leftward" => Ok(FanHeading::Leftward),
            "rightward" => Ok(FanHeading::Rightward),
            "both" => Ok(FanHeading::Both),
            other => Err(format!(
                "fan.heading must be \"leftward\", \"rightward\", or \"both\", got \"{other}\""
            )),
        }
    }

    pub fn fd(&self) -> FdConfig {
        FdConfig {
            h_y: self.fd.h_y,
            h_x: self.fd.h_x,
        }
    }

    pub fn scenario(&self) -> Result<ShieldScenario, String> {
        let s = &self.scenario;
        let half_width = self
            .integrator
            .domain_half_width
            .unwrap_or(s.launch_distance * 1.1);
        Ok(ShieldScenario {
            shield_radius: s.shield_radius,
            device_radius: s.device_radius,
            cosh_offset: s.cosh_offset,
            alpha_clamp: s.alpha_clamp,
            weight: self.weight()?,
            interior: self.interior()?,
            launch_distance: s.launch_distance,
            impedance: s.impedance,
            integrator: IntegratorConfig {
                step: self.integrator.step,
                max_steps: self.integrator.max_steps,
                renorm_every: self.integrator.renorm_every,
                domain: Domain::centered_square(half_width),
                fd: self.fd(),
            },
            tol_pass: self.analysis.tol_pass,
            tol_block: self.analysis.tol_block,
        })
    }

    pub fn fan(&self, heading: Heading) -> RayFan {
        RayFan {
            count: self.fan.count,
            max_impact: self.fan.max_impact,
            heading,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            x_min: self.field.x_min,
            x_max: self.field.x_max,
            y_min: self.field.y_min,
            y_max: self.field.y_max,
            nx: self.field.nx,
            ny: self.field.ny,
        }
    }
}

/// Applies one `section.key=value` override into the raw TOML tree. Values
/// are parsed as integer, float, or boolean when possible, else kept as
/// strings.
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<(), String> {
    let (path, raw_value) = entry
        .split_once('=')
        .ok_or_else(|| format!("override \"{entry}\" must have the form key=value"))?;
    let path = path.trim();
    let raw_value = raw_value.trim();
    if path.is_empty() {
        return Err(format!("override \"{entry}\" has an empty key"));
    }
    let value = parse_override_value(raw_value);

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| format!("override \"{path}\": \"{segment}\" is not a table"))?;
        if i + 1 == segments.len() {
            table.insert((*segment).to_string(), value);
            return Ok(());
        }
        node = table
            .entry((*segment).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!("override paths have at least one segment")
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    toml::Value::String(raw.trim_matches('"').to_string())
}
