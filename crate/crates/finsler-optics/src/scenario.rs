//! Shield scenarios: assemble the blended metric, launch ray fans from both
//! sides, and measure whether leftward light passes straight while rightward
//! light is kept away from the shielded region.

use rayon::prelude::*;
use serde::Serialize;

use crate::consts::{DEFAULT_ALPHA_CLAMP, DEFAULT_TOL_BLOCK, DEFAULT_TOL_PASS};
use crate::design::{
    BlendedShieldMetric, DirectionWeight, InteriorRegime, PointExpansionMap, RadialCoshTransform,
};
use crate::error::Result;
use crate::field::FinslerField;
use crate::linalg::Vector;
use crate::ray::{integrate, deviation_metrics, Domain, IntegratorConfig, RayState, Trajectory};

/// Which way a fan travels. Leftward rays launch from the positive-x side
/// heading in -x; rightward rays launch from the negative-x side heading +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    Leftward,
    Rightward,
}

impl Heading {
    pub fn as_str(&self) -> &'static str {
        match self {
            Heading::Leftward => "leftward",
            Heading::Rightward => "rightward",
        }
    }

    pub fn direction(&self) -> Vector {
        match self {
            Heading::Leftward => Vector::new2(-1.0, 0.0),
            Heading::Rightward => Vector::new2(1.0, 0.0),
        }
    }
}

/// A fan of parallel rays with impact parameters spread uniformly over
/// `[-max_impact, max_impact]`.
#[derive(Debug, Clone, Copy)]
pub struct RayFan {
    pub count: usize,
    pub max_impact: f64,
    pub heading: Heading,
}

impl RayFan {
    pub fn impact_parameters(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.0];
        }
        (0..self.count)
            .map(|k| -self.max_impact + 2.0 * self.max_impact * k as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Full description of a shield experiment.
#[derive(Debug, Clone, Copy)]
pub struct ShieldScenario {
    /// Radius of the shielded region.
    pub shield_radius: f64,
    /// Outer radius of the device.
    pub device_radius: f64,
    /// Radial offset of the cosh stretch used for emitted light.
    pub cosh_offset: f64,
    /// Cap on `|tanh alpha|` in the cosh stretch.
    pub alpha_clamp: f64,
    pub weight: DirectionWeight,
    pub interior: InteriorRegime,
    /// Launch distance of the fans from the center; must exceed the device
    /// radius.
    pub launch_distance: f64,
    /// Surge impedance of the surrounding space.
    pub impedance: f64,
    pub integrator: IntegratorConfig,
    /// Straightness tolerance for the passing fan.
    pub tol_pass: f64,
    /// Relative closest-approach shortfall tolerated for the blocked fan.
    pub tol_block: f64,
}

impl Default for ShieldScenario {
    fn default() -> Self {
        let launch_distance = 4.0;
        ShieldScenario {
            shield_radius: 1.0,
            device_radius: 2.0,
            cosh_offset: 0.5,
            alpha_clamp: DEFAULT_ALPHA_CLAMP,
            weight: DirectionWeight::default(),
            interior: InteriorRegime::Shielded,
            launch_distance,
            impedance: 1.0,
            integrator: IntegratorConfig {
                domain: Domain::centered_square(launch_distance * 1.1),
                ..Default::default()
            },
            tol_pass: DEFAULT_TOL_PASS,
            tol_block: DEFAULT_TOL_BLOCK,
        }
    }
}

impl ShieldScenario {
    pub fn validate(&self) -> bool {
        0.0 < self.shield_radius
            && self.shield_radius < self.device_radius
            && self.device_radius < self.launch_distance
            && self.cosh_offset >= 0.0
            && self.impedance > 0.0
    }

    pub fn expansion(&self) -> PointExpansionMap {
        PointExpansionMap::new(self.shield_radius, self.device_radius)
    }

    pub fn stretch(&self) -> RadialCoshTransform {
        RadialCoshTransform::new(self.cosh_offset, self.alpha_clamp)
    }
}

/// Builds the blended shield field for a scenario.
pub fn build_asymmetric_shield(scenario: &ShieldScenario) -> BlendedShieldMetric {
    assert!(scenario.validate(), "scenario violates its invariants");
    BlendedShieldMetric::new(
        scenario.expansion(),
        scenario.stretch(),
        scenario.weight,
        scenario.interior,
    )
}

/// One traced fan member.
#[derive(Debug)]
pub struct TracedRay {
    pub ray_id: usize,
    pub heading: Heading,
    pub impact: f64,
    pub launch_point: Vector,
    pub launch_direction: Vector,
    pub trajectory: Trajectory,
}

/// Traces every fan member, in parallel, collecting results in launch order.
pub fn trace_fan(
    field: &(dyn FinslerField + Sync),
    fan: &RayFan,
    scenario: &ShieldScenario,
) -> Result<Vec<TracedRay>> {
    let impacts = fan.impact_parameters();
    let direction = fan.heading.direction();
    let launch_x = match fan.heading {
        Heading::Leftward => scenario.launch_distance,
        Heading::Rightward => -scenario.launch_distance,
    };
    impacts
        .par_iter()
        .enumerate()
        .map(|(ray_id, &impact)| {
            let launch_point = Vector::new2(launch_x, impact);
            let trajectory = integrate(
                field,
                RayState::new(launch_point, direction),
                &scenario.integrator,
            )?;
            Ok(TracedRay {
                ray_id,
                heading: fan.heading,
                impact,
                launch_point,
                launch_direction: direction,
                trajectory,
            })
        })
        .collect()
}

/// Closest approach of a trajectory to the origin: coarse pass over the
/// sampled polyline, then one golden-section refinement on the bracketing
/// parameter interval.
pub fn min_distance_to_center(trajectory: &Trajectory) -> f64 {
    let samples = &trajectory.samples;
    let mut best_idx = 0;
    let mut best = f64::INFINITY;
    for (i, s) in samples.iter().enumerate() {
        let d = s.position.norm();
        if d < best {
            best = d;
            best_idx = i;
        }
    }
    let lo = samples[best_idx.saturating_sub(1)].parameter;
    let hi = samples[(best_idx + 1).min(samples.len() - 1)].parameter;
    if hi <= lo {
        return best;
    }
    best.min(golden_minimize(|t| trajectory.position_at(t).norm(), lo, hi))
}

fn golden_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - (hi - lo) * INV_PHI;
    let mut d = lo + (hi - lo) * INV_PHI;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..64 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * INV_PHI;
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * INV_PHI;
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Per-ray measurements.
#[derive(Debug, Clone, Serialize)]
pub struct RayMeasurement {
    pub ray_id: usize,
    pub heading: Heading,
    pub impact: f64,
    pub min_distance_to_center: f64,
    pub lateral_offset: f64,
    pub direction_deviation: f64,
    pub termination: String,
}

/// Aggregate shielding report over one or more traced fans.
#[derive(Debug, Clone, Serialize)]
pub struct ShieldReport {
    pub shield_radius: f64,
    pub tol_pass: f64,
    pub tol_block: f64,
    /// Every leftward ray stayed straight within `tol_pass` (false when no
    /// leftward rays were traced).
    pub pass_straight: bool,
    /// Every rightward ray kept its closest approach above
    /// `shield_radius * (1 - tol_block)` (false when no rightward rays were
    /// traced).
    pub blocked: bool,
    pub rays: Vec<RayMeasurement>,
}

/// Measures every traced ray against its own launch line and aggregates the
/// pass/block verdicts.
pub fn analyze_shielding(rays: &[TracedRay], scenario: &ShieldScenario) -> ShieldReport {
    let measurements: Vec<RayMeasurement> = rays
        .iter()
        .map(|ray| {
            let (lateral_offset, direction_deviation) = deviation_metrics(
                &ray.trajectory,
                &ray.launch_point,
                &ray.launch_direction,
            );
            RayMeasurement {
                ray_id: ray.ray_id,
                heading: ray.heading,
                impact: ray.impact,
                min_distance_to_center: min_distance_to_center(&ray.trajectory),
                lateral_offset,
                direction_deviation,
                termination: ray.trajectory.termination.as_str().to_string(),
            }
        })
        .collect();

    let leftward: Vec<&RayMeasurement> = measurements
        .iter()
        .filter(|m| m.heading == Heading::Leftward)
        .collect();
    let rightward: Vec<&RayMeasurement> = measurements
        .iter()
        .filter(|m| m.heading == Heading::Rightward)
        .collect();

    let pass_straight = !leftward.is_empty()
        && leftward.iter().all(|m| {
            m.lateral_offset <= scenario.tol_pass && m.direction_deviation <= scenario.tol_pass
        });
    let block_floor = scenario.shield_radius * (1.0 - scenario.tol_block);
    let blocked = !rightward.is_empty()
        && rightward
            .iter()
            .all(|m| m.min_distance_to_center >= block_floor);

    ShieldReport {
        shield_radius: scenario.shield_radius,
        tol_pass: scenario.tol_pass,
        tol_block: scenario.tol_block,
        pass_straight,
        blocked,
        rays: measurements,
    }
}
