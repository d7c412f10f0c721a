//! Trajectory CSV: one row per sample, grouped by ray, with enough digits
//! to reproduce the in-memory values exactly.

use std::io::Write;

use finsler_optics::scenario::TracedRay;

pub const TRAJECTORY_HEADER: &str = "ray_id,t,x,y,vx,vy,F_value";

/// One parsed trajectory row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub ray_id: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub f_value: f64,
}

fn fmt(v: f64) -> String {
    // 17 significant digits: lossless f64 round trip in decimal text.
    format!("{v:.16e}")
}

pub fn write_trajectories(mut out: impl Write, rays: &[TracedRay]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for ray in rays {
        for s in &ray.trajectory.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                ray.ray_id,
                fmt(s.parameter),
                fmt(s.position[0]),
                fmt(s.position[1]),
                fmt(s.velocity[0]),
                fmt(s.velocity[1]),
                fmt(s.metric_value),
            )?;
        }
    }
    Ok(())
}

/// Parses a trajectory CSV, reporting the 1-based line number of any
/// malformed row. Rows must be grouped by ray with strictly increasing
/// parameter within each ray.
pub fn parse_trajectories(text: &str) -> Result<Vec<Vec<TrajectoryRecord>>, String> {
    let mut rays: Vec<Vec<TrajectoryRecord>> = Vec::new();
    let mut lines = text.lines().enumerate();

    let Some((_, header)) = lines.next() else {
        return Err("empty trajectory file".into());
    };
    if header.trim() != TRAJECTORY_HEADER {
        return Err(format!(
            "line 1: expected header \"{TRAJECTORY_HEADER}\", got \"{header}\""
        ));
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(format!("line {line_no}: expected 7 fields, got {}", fields.len()));
        }
        let ray_id: usize = fields[0]
            .parse()
            .map_err(|e| format!("line {line_no}: bad ray_id: {e}"))?;
        let mut nums = [0.0; 6];
        for (k, field) in fields[1..].iter().enumerate() {
            nums[k] = field
                .parse()
                .map_err(|e| format!("line {line_no}: bad number \"{field}\": {e}"))?;
        }
        let record = TrajectoryRecord {
            ray_id,
            t: nums[0],
            x: nums[1],
            y: nums[2],
            vx: nums[3],
            vy: nums[4],
            f_value: nums[5],
        };
        match rays.last_mut() {
            Some(current) if current[0].ray_id == ray_id => {
                let prev_t = current.last().unwrap().t;
                if record.t <= prev_t {
                    return Err(format!(
                        "line {line_no}: parameter must increase within ray {ray_id}"
                    ));
                }
                current.push(record);
            }
            _ => {
                if rays.iter().any(|r| r[0].ray_id == ray_id) {
                    return Err(format!("line {line_no}: ray {ray_id} appears out of order"));
                }
                rays.push(vec![record]);
            }
        }
    }
    Ok(rays)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reports_line_numbers() {
        let text = format!("{TRAJECTORY_HEADER}\n0,0.0,0.0,0.0,1.0,0.0,1.0\n0,oops\n");
        let err = parse_trajectories(&text).unwrap_err();
        assert!(err.starts_with("line 3"), "{err}");
    }

    #[test]
    fn parse_requires_increasing_parameter() {
        let text = format!(
            "{TRAJECTORY_HEADER}\n0,1.0,0.0,0.0,1.0,0.0,1.0\n0,0.5,0.1,0.0,1.0,0.0,1.0\n"
        );
        let err = parse_trajectories(&text).unwrap_err();
        assert!(err.contains("parameter must increase"), "{err}");
    }

    #[test]
    fn format_round_trips_doubles() {
        let v = std::f64::consts::PI * 1e3;
        let parsed: f64 = fmt(v).parse().unwrap();
        assert_eq!(parsed, v);
    }
}
