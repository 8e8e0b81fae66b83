//! Mission execution: the skill bindings, the per-mission context they share
//! and the report a run produces.

mod context;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use context::{MissionContext, NavState};

use crate::bt::{
    build_bt, run_tree, BehaviorTree, MissionPlan, RunLimits, RunOutcome, SkillPool, TickRecord, TickStatus,
    EXPLORATION, FOLLOW_PATH, GLOBAL_PLANNING, REPLAN,
};
use crate::error::Error;
use crate::geodesy::EnuPoint;
use crate::kb::Target;
use crate::retrieval::BeamConfig;
use crate::routing::{route_to_geojson, SamplerConfig};
use crate::sim::SimConfig;

/// Mission parameters. Every field has a default; unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub sampler: SamplerConfig,
    pub sim: SimConfig,
    pub beam: BeamConfig,
    pub gnss_sigma_m: f64,
    pub gnss_seed: u64,
    /// Raw fixes averaged into one filtered fix.
    pub fix_window: usize,
    /// Length of the straight heading-initialization run.
    pub init_run_m: f64,
    /// Driven distance between alignment refits.
    pub refine_every_m: f64,
    pub follow_tolerance_m: f64,
    pub stall_window: usize,
    pub stall_eps_m: f64,
    /// Replan entries allowed per navigation subtask.
    pub max_replans: usize,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            sampler: SamplerConfig::default(),
            sim: SimConfig::default(),
            beam: BeamConfig::default(),
            gnss_sigma_m: 0.5,
            gnss_seed: 0,
            fix_window: 10,
            init_run_m: 5.0,
            refine_every_m: 20.0,
            follow_tolerance_m: 1.0,
            stall_window: 10,
            stall_eps_m: 0.2,
            max_replans: 3,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.sampler.validate()?;
        self.sim.validate()?;
        let bad = |what: &str| Err(Error::InvalidInput(format!("mission config: {what}")));
        if self.beam.beam == 0 || self.beam.k == 0 {
            return bad("beam and k must be at least 1");
        }
        if !(self.gnss_sigma_m.is_finite() && self.gnss_sigma_m >= 0.0) {
            return bad("gnss_sigma_m must be finite and non-negative");
        }
        if self.fix_window == 0 {
            return bad("fix_window must be at least 1");
        }
        if !(self.init_run_m.is_finite() && self.init_run_m > 0.0) {
            return bad("init_run_m must be positive");
        }
        if !(self.refine_every_m.is_finite() && self.refine_every_m > 0.0) {
            return bad("refine_every_m must be positive");
        }
        if !(self.follow_tolerance_m.is_finite() && self.follow_tolerance_m > 0.0) {
            return bad("follow_tolerance_m must be positive");
        }
        if self.stall_window < 2 || !(self.stall_eps_m.is_finite() && self.stall_eps_m > 0.0) {
            return bad("stall monitor needs a window of at least 2 and a positive threshold");
        }
        Ok(())
    }
}

/// The four skills bound to a [`MissionContext`].
pub fn mission_skills() -> SkillPool<MissionContext> {
    let mut pool = SkillPool::new();
    pool.register(GLOBAL_PLANNING, |c: &mut MissionContext, a: &_| c.global_planning(a))
        .register(FOLLOW_PATH, |c: &mut MissionContext, a: &_| c.follow_path(a))
        .register(REPLAN, |c: &mut MissionContext, a: &_| c.replan(a))
        .register(EXPLORATION, |c: &mut MissionContext, a: &_| c.exploration(a));
    pool
}

/// Builds the tree for `plan` over `skills` and ticks it to completion.
pub fn run_plan<C>(
    plan: &MissionPlan,
    ctx: &mut C,
    skills: &mut SkillPool<C>,
    limits: RunLimits,
) -> Result<RunOutcome, Error> {
    let mut tree = BehaviorTree::new(build_bt(plan, skills)?)?;
    Ok(run_tree(&mut tree, ctx, skills, limits))
}

/// Numbers a finished mission feeds into evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub tick_count: u64,
    /// Ground-truth distance driven.
    pub path_length_m: f64,
    /// Length of the first planned route.
    pub planned_length_m: Option<f64>,
    pub replans: usize,
    pub frontier_visits: usize,
    pub goal_entity: Option<String>,
    pub final_pose: EnuPoint,
    /// Distance from the final pose to the last navigation target, zero
    /// inside a polygon target.
    pub goal_distance_m: Option<f64>,
    /// Distance from the final pose to the nearest searched object cell.
    pub target_distance_m: Option<f64>,
    pub heading_error_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub status: TickStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    pub ticks: Vec<TickRecord>,
    /// GeoJSON `FeatureCollection` with one `LineString` per planned route.
    pub route: Value,
    pub metrics: MissionMetrics,
}

impl MissionReport {
    /// Tick log in the engine's line format.
    pub fn tick_log(&self) -> String {
        RunOutcome {
            status: self.status,
            ticks: self.ticks.clone(),
            cause: self.cause.clone(),
        }
        .render_log()
    }
}

/// Distance from `p` to a navigation target, zero inside a polygon.
pub fn distance_to_target(target: &Target, p: EnuPoint) -> f64 {
    match target {
        Target::Point(q) => q.distance(p),
        Target::Polygon(poly) if poly.contains(p) => 0.0,
        Target::Polygon(poly) => poly.distance_to_boundary(p),
    }
}

/// Runs `plan` with the mission skills and summarizes the result.
pub fn run_mission(plan: &MissionPlan, ctx: &mut MissionContext, limits: RunLimits) -> Result<MissionReport, Error> {
    let mut skills = mission_skills();
    let outcome = run_plan(plan, ctx, &mut skills, limits)?;
    let cause = match outcome.status {
        TickStatus::Failure => outcome.cause.clone().or_else(|| ctx.last_failure.clone()),
        _ => None,
    };
    let anchor = ctx.kb().enu_anchor();
    let features = ctx
        .routes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut f = route_to_geojson(&r.points, anchor)?;
            f["properties"] = json!({ "index": i, "length_m": r.total_length_m });
            Ok(f)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let robot = *ctx.world().robot();
    let nav = ctx.nav();
    let metrics = MissionMetrics {
        tick_count: outcome.ticks.len() as u64,
        path_length_m: robot.path_length_m,
        planned_length_m: ctx.routes.first().map(|r| r.total_length_m),
        replans: ctx.replans,
        frontier_visits: ctx.explore_outcome.as_ref().map_or(0, |o| o.frontier_visits),
        goal_entity: nav.map(|n| n.entity_id.clone()),
        final_pose: robot.pose,
        goal_distance_m: nav.map(|n| distance_to_target(&n.target, robot.pose)),
        target_distance_m: ctx.world().distance_to_target(robot.pose),
        heading_error_rad: ctx.heading_error_rad(),
    };
    Ok(MissionReport {
        status: outcome.status,
        cause,
        ticks: outcome.ticks,
        route: json!({ "type": "FeatureCollection", "features": features }),
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::parse_mission;
    use crate::campus::{barrier_across, synthetic_campus, CampusSpec};
    use std::time::Duration;

    fn small() -> CampusSpec {
        CampusSpec {
            blocks_x: 2,
            blocks_y: 2,
            ..CampusSpec::default()
        }
    }

    fn limits() -> RunLimits {
        RunLimits {
            max_ticks: 20_000,
            wall_clock: Duration::from_secs(60),
        }
    }

    fn far_entity(campus: &crate::campus::Campus) -> String {
        let start = campus.world.robot().pose;
        campus
            .kb
            .entities()
            .filter_map(|e| Some((e.name.clone(), campus.kb.target(e.osm_id)?.reference_point().distance(start))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
            .unwrap()
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<MissionConfig>(r#"{"gnss_sigma_m": 0.5}"#).is_ok());
        assert!(serde_json::from_str::<MissionConfig>(r#"{"warp": 1}"#).is_err());
        let cfg = MissionConfig {
            fix_window: 0,
            ..MissionConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(MissionConfig::default().validate().is_ok());
    }

    #[test]
    fn navigates_across_a_small_campus() {
        let campus = synthetic_campus(small(), 3).unwrap();
        let name = far_entity(&campus);
        let mut ctx = MissionContext::new(campus.kb.clone(), campus.world.clone(), MissionConfig::default()).unwrap();
        let plan = parse_mission(&format!("Navigate to {name}")).unwrap();
        let report = run_mission(&plan, &mut ctx, limits()).unwrap();
        assert_eq!(report.status, TickStatus::Success, "{:?}", report.cause);
        let m = &report.metrics;
        assert!(m.goal_entity.as_deref().unwrap().ends_with(&name));
        assert!(m.goal_distance_m.unwrap() <= 5.0, "{m:?}");
        assert!(m.heading_error_rad.unwrap() < 0.2);
        assert_eq!(m.replans, 0);
        assert!(m.path_length_m >= 0.9 * m.planned_length_m.unwrap());
        assert_eq!(report.route["features"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn zero_tick_budget_times_out() {
        let campus = synthetic_campus(small(), 3).unwrap();
        let mut ctx = MissionContext::new(campus.kb.clone(), campus.world, MissionConfig::default()).unwrap();
        let plan = parse_mission("Navigate to Library").unwrap();
        let lim = RunLimits {
            max_ticks: 0,
            ..limits()
        };
        let report = run_mission(&plan, &mut ctx, lim).unwrap();
        assert_eq!(report.status, TickStatus::Failure);
        assert!(report.cause.unwrap().starts_with("timeout"));
        assert!(report.ticks.is_empty());
    }

    #[test]
    fn blocked_corridor_replans_once() {
        let campus = synthetic_campus(small(), 3).unwrap();
        let name = far_entity(&campus);
        let net = campus.network().unwrap();
        let mut probe = MissionContext::new(campus.kb.clone(), campus.world.clone(), MissionConfig::default()).unwrap();
        let plan = parse_mission(&format!("Navigate to {name}")).unwrap();
        let clean = run_mission(&plan, &mut probe, limits()).unwrap();
        assert_eq!(clean.status, TickStatus::Success);
        let edge = probe.routes[0].edges[1];

        let mut world = campus.world.clone();
        barrier_across(&mut world, &net, edge, campus.spec.setback_m).unwrap();
        let mut ctx = MissionContext::new(campus.kb.clone(), world, MissionConfig::default()).unwrap();
        let report = run_mission(&plan, &mut ctx, limits()).unwrap();
        assert_eq!(report.status, TickStatus::Success, "{:?}\n{}", report.cause, report.tick_log());
        assert_eq!(report.metrics.replans, 1);
        assert_eq!(report.route["features"].as_array().unwrap().len(), 2);
        assert!(ctx.blocked_edges().contains(&edge));
        assert!(report.metrics.goal_distance_m.unwrap() <= 5.0);
    }

    #[test]
    fn unreachable_goal_fails_with_a_cause() {
        let campus = synthetic_campus(small(), 3).unwrap();
        let mut ctx = MissionContext::new(campus.kb.clone(), campus.world, MissionConfig::default()).unwrap();
        let plan = parse_mission(r#"[{"type":"nav","query":"Library"},{"type":"explore","query":" x "}]"#).unwrap();
        let mut skills = mission_skills();
        skills.register(GLOBAL_PLANNING, |c: &mut MissionContext, _: &_| {
            c.last_failure = Some("no route".into());
            TickStatus::Failure
        });
        let out = run_plan(&plan, &mut ctx, &mut skills, limits()).unwrap();
        assert_eq!(out.status, TickStatus::Failure);
        assert_eq!(out.ticks.len(), 1);
    }
}
