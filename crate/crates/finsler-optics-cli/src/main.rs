use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use finsler_optics_cli::config::{Config, FanHeading};
use finsler_optics_cli::{csvio, svg};
use finsler_optics::medium::sample_material_field;
use finsler_optics::scenario::{
    analyze_shielding, build_asymmetric_shield, trace_fan, Heading, TracedRay,
};
use finsler_optics::validate::run_builtin_checks;

const DEFAULTS_HELP: &str = "\
CONFIG KEYS AND DEFAULTS (TOML; any key can be set with --override key=value):
  scenario.shield_radius    1.0        radius of the shielded region
  scenario.device_radius    2.0        outer radius of the device
  scenario.cosh_offset      0.5        radial offset of the emission stretch
  scenario.alpha_clamp      0.999      cap on |tanh alpha| in the stretch
  scenario.launch_distance  4.0        fan launch distance from the center
  scenario.impedance        1.0        surge impedance of the surroundings
  scenario.interior         shielded   shielded | emission
  weight.profile            smooth     step | smooth | constant
  weight.transition_width   0.2        width of the smooth bands (radians)
  weight.constant_value     0.0        value for the constant profile
  fan.count                 21         rays per fan
  fan.max_impact            1.8        impact parameters span [-max, max]
  fan.heading               both       leftward | rightward | both
  integrator.step           0.001      RK4 parameter step
  integrator.max_steps      200000     step budget per ray
  integrator.renorm_every   16         speed renormalization cadence
  integrator.domain_half_width  1.1 * launch_distance
  fd.h_y                    1e-4       relative direction-derivative step
  fd.h_x                    1e-5       relative position-derivative step
  analysis.tol_pass         1e-6       straightness tolerance (passing fan)
  analysis.tol_block        0.02       closest-approach shortfall (blocked fan)
  field.{x_min,x_max,y_min,y_max}  -2..2   material sampling window
  field.{nx,ny}             21         grid resolution
  field.direction_bins      16         angular bins over [0, 2pi)
  field.r_guard             0.001      clipped annulus at the inner boundary
  plot.max_points_per_ray   2000       polyline decimation limit
  plot.stroke_width         0.02       SVG stroke width

EXIT CODES: 0 success, 1 check failure, 2 usage/config error, 3 I/O error.";

#[derive(Parser)]
#[command(
    name = "finsler-optics",
    version,
    about = "Asymmetric-shield design, ray tracing, and material export",
    after_help = DEFAULTS_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in invariant checks and report residuals
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-path config override, e.g. --override fd.h_x=0.1
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Trace ray fans; writes a trajectory CSV and a shielding report
    Trace {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trajectory CSV path; the report goes next to it as
        /// `<out>.report.toml`
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Export the sampled material field as CSV
    Field {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "material_field.csv")]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Render a trajectory CSV as an SVG ray diagram
    Plot {
        /// Trajectory CSV produced by `trace`
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

struct CmdError {
    code: i32,
    message: String,
}

fn config_error(message: impl Into<String>) -> CmdError {
    CmdError {
        code: 2,
        message: message.into(),
    }
}

fn io_error(message: impl Into<String>) -> CmdError {
    CmdError {
        code: 3,
        message: message.into(),
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config, overrides } => cmd_validate(config.as_deref(), &overrides),
        Command::Trace {
            config,
            out,
            overrides,
        } => cmd_trace(config.as_deref(), &out, &overrides),
        Command::Field {
            config,
            out,
            overrides,
        } => cmd_field(config.as_deref(), &out, &overrides),
        Command::Plot {
            input,
            config,
            out,
            overrides,
        } => cmd_plot(&input, config.as_deref(), &out, &overrides),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config, CmdError> {
    Config::load(path, overrides).map_err(config_error)
}

fn cmd_validate(config_path: Option<&Path>, overrides: &[String]) -> Result<i32, CmdError> {
    let config = load_config(config_path, overrides)?;
    let scenario = config.scenario().map_err(config_error)?;
    let results = run_builtin_checks(&scenario, &config.fd());
    let mut all_passed = true;
    for check in &results {
        let verdict = if check.passed() { "PASS" } else { "FAIL" };
        all_passed &= check.passed();
        println!(
            "{verdict} {:<28} residual {:.3e} (tolerance {:.3e})",
            check.name, check.residual, check.tolerance
        );
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn traced_fans(config: &Config) -> Result<Vec<TracedRay>, CmdError> {
    let scenario = config.scenario().map_err(config_error)?;
    let field = build_asymmetric_shield(&scenario);
    let heading = config.fan_heading().map_err(config_error)?;
    let mut rays = Vec::new();
    if matches!(heading, FanHeading::Leftward | FanHeading::Both) {
        let fan = config.fan(Heading::Leftward);
        rays.extend(
            trace_fan(&field, &fan, &scenario)
                .map_err(|e| config_error(format!("leftward fan failed: {e}")))?,
        );
    }
    if matches!(heading, FanHeading::Rightward | FanHeading::Both) {
        let fan = config.fan(Heading::Rightward);
        let mut right = trace_fan(&field, &fan, &scenario)
            .map_err(|e| config_error(format!("rightward fan failed: {e}")))?;
        let offset = rays.len();
        for ray in &mut right {
            ray.ray_id += offset;
        }
        rays.extend(right);
    }
    Ok(rays)
}

fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.toml")
}

fn cmd_trace(
    config_path: Option<&Path>,
    out: &Path,
    overrides: &[String],
) -> Result<i32, CmdError> {
    let config = load_config(config_path, overrides)?;
    let scenario = config.scenario().map_err(config_error)?;
    let rays = traced_fans(&config)?;
    let report = analyze_shielding(&rays, &scenario);

    let mut csv = Vec::new();
    csvio::write_trajectories(&mut csv, &rays)
        .map_err(|e| io_error(format!("cannot format trajectories: {e}")))?;
    fs::write(out, &csv).map_err(|e| io_error(format!("cannot write {}: {e}", out.display())))?;

    let report_out = report_path(out);
    let report_text = toml::to_string_pretty(&report)
        .map_err(|e| io_error(format!("cannot serialize report: {e}")))?;
    fs::write(&report_out, report_text)
        .map_err(|e| io_error(format!("cannot write {}: {e}", report_out.display())))?;

    println!(
        "traced {} rays -> {} (report: {}; pass_straight = {}, blocked = {})",
        rays.len(),
        out.display(),
        report_out.display(),
        report.pass_straight,
        report.blocked
    );
    Ok(0)
}

fn cmd_field(
    config_path: Option<&Path>,
    out: &Path,
    overrides: &[String],
) -> Result<i32, CmdError> {
    let config = load_config(config_path, overrides)?;
    let scenario = config.scenario().map_err(config_error)?;
    let blend = build_asymmetric_shield(&scenario);
    let field = sample_material_field(
        &blend,
        &config.grid(),
        config.field.direction_bins,
        scenario.impedance,
        config.field.r_guard,
    );

    let mut text = String::new();
    text.push_str("x,y,theta_bin,n,eps_r,eps_theta,eps_z,mu_r,mu_theta,mu_z\n");
    for s in &field.samples {
        let m = &s.materials;
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.position[0],
            s.position[1],
            s.direction_bin,
            s.index,
            m.epsilon[0],
            m.epsilon[1],
            m.epsilon[2],
            m.mu[0],
            m.mu[1],
            m.mu[2],
        ));
    }
    text.push_str(&format!("# clipped_samples: {}\n", field.clipped));
    text.push_str(&format!("# failed_samples: {}\n", field.failed));
    fs::write(out, text).map_err(|e| io_error(format!("cannot write {}: {e}", out.display())))?;

    println!(
        "sampled {} points -> {} ({} clipped, {} failed)",
        field.samples.len(),
        out.display(),
        field.clipped,
        field.failed
    );
    Ok(0)
}

fn cmd_plot(
    input: &Path,
    config_path: Option<&Path>,
    out: &Path,
    overrides: &[String],
) -> Result<i32, CmdError> {
    let config = load_config(config_path, overrides)?;
    let text = fs::read_to_string(input)
        .map_err(|e| io_error(format!("cannot read {}: {e}", input.display())))?;
    let rays = csvio::parse_trajectories(&text)
        .map_err(|e| io_error(format!("{}: {e}", input.display())))?;

    let half_width = config
        .integrator
        .domain_half_width
        .unwrap_or(config.scenario.launch_distance * 1.1);
    let style = svg::PlotStyle {
        shield_radius: config.scenario.shield_radius,
        device_radius: config.scenario.device_radius,
        half_width,
        stroke_width: config.plot.stroke_width,
        max_points_per_ray: config.plot.max_points_per_ray,
    };
    let rendered = svg::render(&rays, &style);
    let mut file = fs::File::create(out)
        .map_err(|e| io_error(format!("cannot create {}: {e}", out.display())))?;
    file.write_all(rendered.as_bytes())
        .map_err(|e| io_error(format!("cannot write {}: {e}", out.display())))?;

    println!("plotted {} rays -> {}", rays.len(), out.display());
    Ok(0)
}
