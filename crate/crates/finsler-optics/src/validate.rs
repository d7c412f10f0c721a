//! Built-in invariant checks, runnable from the command line. Each check
//! reports its measured residual against a pinned tolerance; the suite is
//! deterministic (seeded sampling) and deliberately routes through the
//! numerical-differentiation machinery so a bad step size is caught.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{CoordinateMap, pullback_metric};
use crate::field::{check_homogeneity, flat_metric, ConformalMetric, FinslerField};
use crate::fd::FdConfig;
use crate::linalg::{Matrix, Vector};
use crate::medium::{materials_from_tensor, cylindrical_cloak_parameters};
use crate::ray::{integrate, max_lateral_deviation, riemann_reduction_check, Domain, IntegratorConfig, RayState};
use crate::scenario::{build_asymmetric_shield, ShieldScenario};

use std::f64::consts::TAU;

/// Outcome of one invariant check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

fn fish_eye_index(x: &Vector) -> f64 {
    2.0 / (1.0 + x.norm_squared())
}

/// Runs the whole suite with the given differentiation config.
pub fn run_builtin_checks(scenario: &ShieldScenario, fd: &FdConfig) -> Vec<CheckResult> {
    vec![
        homogeneity_flat(fd),
        homogeneity_polar(fd),
        homogeneity_conformal(fd),
        homogeneity_blended(scenario),
        tensor_metric_consistency(fd),
        cloak_parameter_reduction(scenario, fd),
        riemann_reduction(fd),
        flat_straightness(fd),
    ]
}

fn sample_direction(rng: &mut ChaCha8Rng) -> Vector {
    let angle: f64 = rng.random_range(0.0..TAU);
    let len: f64 = rng.random_range(0.2..3.0);
    Vector::new2(len * angle.cos(), len * angle.sin())
}

fn max_homogeneity_residual<F: FinslerField + ?Sized>(
    field: &F,
    positions: impl Iterator<Item = Vector>,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for x in positions {
        let y = sample_direction(&mut rng);
        let lambda: f64 = rng.random_range(0.1..10.0);
        match check_homogeneity(field, &x, &y, lambda) {
            Ok(r) => worst = worst.max(r),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

fn ring_positions(seed: u64, count: usize, r_lo: f64, r_hi: f64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r: f64 = rng.random_range(r_lo..r_hi);
            let a: f64 = rng.random_range(0.0..TAU);
            Vector::new2(r * a.cos(), r * a.sin())
        })
        .collect()
}

fn homogeneity_flat(_fd: &FdConfig) -> CheckResult {
    let field = flat_metric(2);
    let residual = max_homogeneity_residual(&field, ring_positions(11, 1000, 0.1, 4.0).into_iter(), 12);
    CheckResult {
        name: "homogeneity-flat",
        residual,
        tolerance: 1e-10,
    }
}

fn homogeneity_polar(_fd: &FdConfig) -> CheckResult {
    let field = crate::field::riemann_metric(2, "polar", |x| {
        Ok(Matrix::diagonal(2, &[1.0, x[0] * x[0]]))
    });
    let residual =
        max_homogeneity_residual(&field, ring_positions(21, 1000, 0.3, 4.0).into_iter(), 22);
    CheckResult {
        name: "homogeneity-polar",
        residual,
        tolerance: 1e-10,
    }
}

fn homogeneity_conformal(_fd: &FdConfig) -> CheckResult {
    let field = ConformalMetric::new(2, "fish-eye", fish_eye_index);
    let residual =
        max_homogeneity_residual(&field, ring_positions(31, 1000, 0.1, 4.0).into_iter(), 32);
    CheckResult {
        name: "homogeneity-conformal",
        residual,
        tolerance: 1e-10,
    }
}

fn homogeneity_blended(scenario: &ShieldScenario) -> CheckResult {
    let field = build_asymmetric_shield(scenario);
    // Sample outside the shielded region; inside it, transformed directions
    // are deliberately undefined for the incident-light configuration.
    let residual = max_homogeneity_residual(
        &field,
        ring_positions(41, 1000, scenario.shield_radius + 0.05, 4.0).into_iter(),
        42,
    );
    CheckResult {
        name: "homogeneity-blended",
        residual,
        tolerance: 1e-8,
    }
}

/// `F(x, y)^2 = yᵀ g(x, y) y` with the tensor recovered by differences.
fn tensor_metric_consistency(fd: &FdConfig) -> CheckResult {
    let field = ConformalMetric::new(2, "fish-eye", fish_eye_index);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = Vector::new2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let y = sample_direction(&mut rng);
        let Ok(f2) = field.eval_squared(&x, &y) else {
            worst = f64::INFINITY;
            break;
        };
        let Ok(tensor) = crate::field::metric_tensor(&field, &x, &y, fd) else {
            worst = f64::INFINITY;
            break;
        };
        let q = tensor.entries.quadratic_form(&y);
        worst = worst.max((q - f2).abs() / f2);
    }
    CheckResult {
        name: "tensor-metric-consistency",
        residual: worst,
        tolerance: 1e-6,
    }
}

/// The numeric pipeline (difference-quotient Jacobian pullback, principal
/// decomposition, transversality inversion) must reproduce the closed-form
/// cylindrical-cloak parameters.
fn cloak_parameter_reduction(scenario: &ShieldScenario, fd: &FdConfig) -> CheckResult {
    let map = scenario.expansion();
    let coord = CoordinateMap::new(2, "expansion-fd", move |x| map.forward(x));
    let base = |_: &Vector| Ok(Matrix::identity(2));
    let mut worst: f64 = 0.0;
    for k in 0..25 {
        // Stay clear of both boundaries: the difference stencil for the map
        // Jacobian must not straddle a formula branch.
        let r = scenario.shield_radius + 1e-2
            + (scenario.device_radius - scenario.shield_radius - 2e-2) * k as f64 / 24.0;
        let angle = TAU * (k as f64 + 0.3) / 25.0;
        let x = Vector::new2(r * angle.cos(), r * angle.sin());
        let numeric = match pullback_metric(&coord, &base, &x, fd)
            .and_then(|g| materials_from_tensor(&g, &x, 1.0))
        {
            Ok(m) => m,
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        };
        let exact = match cylindrical_cloak_parameters(&map, r) {
            Ok(m) => m,
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        };
        for i in 0..3 {
            worst = worst.max((numeric.epsilon[i] - exact.epsilon[i]).abs() / exact.epsilon[i]);
        }
    }
    CheckResult {
        name: "cloak-parameter-reduction",
        residual: worst,
        tolerance: 1e-5,
    }
}

/// Geodesic acceleration against the Christoffel route on a curved Riemann
/// metric with non-polynomial coefficients.
fn riemann_reduction(fd: &FdConfig) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;

    let polar = |x: &Vector| Ok(Matrix::diagonal(2, &[1.0, x[0] * x[0]]));
    let conformal = |x: &Vector| {
        let n = fish_eye_index(x);
        Ok(Matrix::identity(2).scale(n * n))
    };

    for _ in 0..50 {
        let x = Vector::new2(rng.random_range(0.8..2.5), rng.random_range(-1.0..1.0));
        let y = sample_direction(&mut rng);
        match riemann_reduction_check(&polar, &x, &y, fd) {
            Ok(r) => worst = worst.max(r),
            Err(_) => worst = f64::INFINITY,
        }
    }
    for _ in 0..50 {
        let x = Vector::new2(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let y = sample_direction(&mut rng);
        match riemann_reduction_check(&conformal, &x, &y, fd) {
            Ok(r) => worst = worst.max(r),
            Err(_) => worst = f64::INFINITY,
        }
    }
    CheckResult {
        name: "riemann-reduction",
        residual: worst,
        tolerance: 1e-4,
    }
}

fn flat_straightness(fd: &FdConfig) -> CheckResult {
    let field = flat_metric(2);
    let cfg = IntegratorConfig {
        step: 1e-2,
        max_steps: 1000,
        domain: Domain::centered_square(20.0),
        fd: *fd,
        ..Default::default()
    };
    let direction = Vector::new2(1.0, 0.0);
    let residual = match integrate(&field, RayState::new(Vector::zeros(2), direction), &cfg) {
        Ok(traj) => max_lateral_deviation(&traj, &direction),
        Err(_) => f64::INFINITY,
    };
    CheckResult {
        name: "flat-straightness",
        residual,
        tolerance: 1e-9,
    }
}
