//! Ray-diagram rendering: device and shield circles plus one polyline per
//! ray, colored by travel direction. Plain-text SVG with fixed number
//! formatting, so identical inputs produce byte-identical files.

use std::fmt::Write as _;

use crate::csvio::TrajectoryRecord;

pub struct PlotStyle {
    pub shield_radius: f64,
    pub device_radius: f64,
    pub half_width: f64,
    pub stroke_width: f64,
    pub max_points_per_ray: usize,
}

const LEFTWARD_COLOR: &str = "#1f77b4";
const RIGHTWARD_COLOR: &str = "#d62728";

fn coord(v: f64) -> String {
    format!("{v:.6}")
}

/// Renders the trajectory set. The world y-axis points up, SVG's points
/// down, so y is negated; distances from the origin are unchanged.
pub fn render(rays: &[Vec<TrajectoryRecord>], style: &PlotStyle) -> String {
    let w = style.half_width;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"800\">",
        coord(-w),
        coord(-w),
        coord(2.0 * w),
        coord(2.0 * w)
    );
    let _ = writeln!(
        out,
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>",
        coord(-w),
        coord(-w),
        coord(2.0 * w),
        coord(2.0 * w)
    );
    let _ = writeln!(
        out,
        "  <circle cx=\"0\" cy=\"0\" r=\"{}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"{}\"/>",
        coord(style.device_radius),
        coord(style.stroke_width)
    );
    let _ = writeln!(
        out,
        "  <circle cx=\"0\" cy=\"0\" r=\"{}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"{}\"/>",
        coord(style.shield_radius),
        coord(style.stroke_width)
    );

    for ray in rays {
        if ray.is_empty() {
            continue;
        }
        let color = if ray[0].vx < 0.0 {
            LEFTWARD_COLOR
        } else {
            RIGHTWARD_COLOR
        };
        let stride = ray.len().div_ceil(style.max_points_per_ray).max(1);
        let mut points = String::new();
        for (i, record) in ray.iter().enumerate() {
            if i % stride != 0 && i != ray.len() - 1 {
                continue;
            }
            if !points.is_empty() {
                points.push(' ');
            }
            let _ = write!(points, "{},{}", coord(record.x), coord(-record.y));
        }
        let _ = writeln!(
            out,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            points,
            color,
            coord(style.stroke_width)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Extracts the vertex coordinates of every polyline in a rendered SVG,
/// in world coordinates (y un-negated). Used by tests that assert geometry
/// directly on the emitted file.
pub fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for line in svg.lines() {
        let Some(start) = line.find("points=\"") else {
            continue;
        };
        let rest = &line[start + 8..];
        let Some(end) = rest.find('"') else { continue };
        let mut points = Vec::new();
        for pair in rest[..end].split(' ') {
            let Some((x, y)) = pair.split_once(',') else {
                continue;
            };
            if let (Ok(x), Ok(y)) = (x.parse::<f64>(), y.parse::<f64>()) {
                points.push((x, -y));
            }
        }
        out.push(points);
    }
    out
}
