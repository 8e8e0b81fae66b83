use serde::{Deserialize, Serialize};

use super::{GlobalRoute, RouteError};
use crate::geodesy::{global_to_local_waypoint, normalize_angle, EnuPoint, HeadingBias};

/// Curvature-adaptive sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub delta_fine_m: f64,
    pub delta_coarse_m: f64,
    pub kappa_thresh_rad_per_m: f64,
    /// Incident segment lengths are capped at this window when converting a
    /// heading change into curvature.
    pub curvature_window_m: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            delta_fine_m: 3.0,
            delta_coarse_m: 20.0,
            kappa_thresh_rad_per_m: 0.1,
            curvature_window_m: 10.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), RouteError> {
        let ok = self.delta_fine_m > 0.0
            && self.delta_fine_m < self.delta_coarse_m
            && self.delta_coarse_m.is_finite()
            && self.kappa_thresh_rad_per_m >= 0.0
            && self.curvature_window_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RouteError::InvalidConfig(format!(
                "need 0 < delta_fine < delta_coarse, kappa_thresh >= 0 and window > 0, got {self:?}"
            )))
        }
    }
}

/// Waypoints in the robot's local navigation frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointList {
    pub points: Vec<EnuPoint>,
}

/// Heading change at vertex `i` per meter, with the default window.
pub fn segment_curvature(points: &[EnuPoint], i: usize) -> Result<f64, RouteError> {
    segment_curvature_windowed(points, i, SamplerConfig::default().curvature_window_m)
}

/// Turns below this are treated as straight continuation.
const COLLINEAR_EPS_RAD: f64 = 1e-9;

fn turn_at(points: &[EnuPoint], i: usize) -> Result<f64, RouteError> {
    let d_in = points[i] - points[i - 1];
    let d_out = points[i + 1] - points[i];
    if d_in.norm() == 0.0 || d_out.norm() == 0.0 {
        return Err(RouteError::DegenerateSegment { index: i });
    }
    Ok(normalize_angle(d_out.heading() - d_in.heading()).abs())
}

/// Arc length from vertex `i` walking along the polyline through collinear
/// vertices, capped at `window_m`.
fn straight_run(points: &[EnuPoint], i: usize, backward: bool, window_m: f64) -> Result<f64, RouteError> {
    let mut len = 0.0;
    let mut at = i;
    loop {
        let next = if backward { at - 1 } else { at + 1 };
        len += points[at].distance(points[next]);
        if len >= window_m || next == 0 || next + 1 == points.len() || turn_at(points, next)? >= COLLINEAR_EPS_RAD {
            return Ok(len.min(window_m));
        }
        at = next;
    }
}

/// `|Δφ_i| / mean(l_in, l_out)` at interior vertex `i`, where each incident
/// length runs through collinear vertices and is capped at `window_m`.
pub fn segment_curvature_windowed(points: &[EnuPoint], i: usize, window_m: f64) -> Result<f64, RouteError> {
    if i == 0 || i + 1 >= points.len() {
        return Err(RouteError::InvalidIndex { index: i, len: points.len() });
    }
    let turn = turn_at(points, i)?;
    if turn < COLLINEAR_EPS_RAD {
        return Ok(0.0);
    }
    let l_in = straight_run(points, i, true, window_m)?;
    let l_out = straight_run(points, i, false, window_m)?;
    Ok(turn / ((l_in + l_out) / 2.0))
}

/// Resamples each segment at `delta_fine` when either bounding vertex bends
/// more than the threshold, else at `delta_coarse`. Original vertices are
/// kept and the last sample is the goal.
pub fn adaptive_sample(route: &GlobalRoute, cfg: &SamplerConfig) -> Result<Vec<EnuPoint>, RouteError> {
    cfg.validate()?;
    let pts = &route.points;
    if pts.len() < 2 {
        return Ok(pts.clone());
    }
    let mut sharp = vec![false; pts.len()];
    for (i, flag) in sharp.iter_mut().enumerate().take(pts.len() - 1).skip(1) {
        *flag = segment_curvature_windowed(pts, i, cfg.curvature_window_m)? > cfg.kappa_thresh_rad_per_m;
    }
    let mut out = vec![pts[0]];
    for i in 0..pts.len() - 1 {
        let (a, b) = (pts[i], pts[i + 1]);
        let delta = if sharp[i] || sharp[i + 1] {
            cfg.delta_fine_m
        } else {
            cfg.delta_coarse_m
        };
        let n = ((a.distance(b) / delta) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..n {
            out.push(a + (b - a) * (k as f64 / n as f64));
        }
        out.push(b);
    }
    Ok(out)
}

/// Applies the local-frame transform to every sample, preserving order.
pub fn localize_waypoints(samples: &[EnuPoint], p_end: EnuPoint, bias: HeadingBias) -> WaypointList {
    WaypointList {
        points: samples.iter().map(|w| global_to_local_waypoint(*w, p_end, bias)).collect(),
    }
}
