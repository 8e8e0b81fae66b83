use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodeResult, EvalError};
use crate::bt::{MissionPlan, RunLimits, Subtask, TickStatus};
use crate::campus::Campus;
use crate::error::Error;
use crate::geodesy::EnuPoint;
use crate::kb::Target;
use crate::mission::{distance_to_target, run_mission, MissionConfig, MissionContext};
use crate::routing::{plan_route, project_goal, RoadNetwork};
use crate::sim::{place_objects_near, SimWorld, ARENA_QUERY};

/// Success radius for reaching a building.
pub const NAV_SUCCESS_RADIUS_M: f64 = 5.0;
/// Success radius for reaching a searched object.
pub const OBJECT_SUCCESS_RADIUS_M: f64 = 2.0;

/// Shape of a generated episode set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeDesign {
    pub n_buildings: usize,
    pub n_positions: usize,
    pub n_yaws: usize,
    /// Requested route length from start to building.
    pub route_m: f64,
    /// Accepted relative deviation from `route_m`.
    pub route_tolerance: f64,
    /// Spacing of candidate start points along the roads.
    pub start_spacing_m: f64,
    /// Add a last-mile object search after the navigation step.
    pub explore: bool,
}

impl Default for EpisodeDesign {
    fn default() -> Self {
        EpisodeDesign {
            n_buildings: 5,
            n_positions: 3,
            n_yaws: 3,
            route_m: 300.0,
            route_tolerance: 0.1,
            start_spacing_m: 10.0,
            explore: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSpec {
    pub world: String,
    pub start: EnuPoint,
    pub start_yaw: f64,
    pub target_entity: String,
    pub target_name: String,
    #[serde(default)]
    pub object_query: Option<String>,
    pub seed: u64,
    pub success_radius_m: f64,
}

fn road_samples(net: &RoadNetwork, spacing: f64) -> Vec<EnuPoint> {
    let mut out: Vec<EnuPoint> = net.points().to_vec();
    for e in net.edges() {
        let (a, b) = (net.point(e.a), net.point(e.b));
        let steps = (e.length_m / spacing).floor() as usize;
        for i in 1..steps {
            let t = i as f64 * spacing / e.length_m;
            if t < 1.0 - 1e-9 {
                out.push(a + (b - a) * t);
            }
        }
    }
    out
}

/// Buildings × start positions × yaws on one campus. Starts lie on the roads
/// with a route to the building within the requested tolerance; yaws are
/// evenly spaced from east.
pub fn generate_episodes(
    campus: &Campus,
    world_id: &str,
    design: &EpisodeDesign,
    seed: u64,
) -> Result<Vec<EpisodeSpec>, Error> {
    if design.n_buildings == 0 || design.n_positions == 0 || design.n_yaws == 0 {
        return Err(EvalError::InvalidDesign("every factor must be at least 1".into()).into());
    }
    if !(design.route_m > 0.0 && design.start_spacing_m > 0.0 && design.route_tolerance >= 0.0) {
        return Err(EvalError::InvalidDesign("route_m and start_spacing_m must be positive".into()).into());
    }
    let net = campus.network()?;
    let g = *campus.world.geometry();
    let candidates: Vec<EnuPoint> = road_samples(&net, design.start_spacing_m)
        .into_iter()
        .filter(|p| g.cell_of(*p).is_some_and(|c| campus.world.truth().is_free(c)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buildings: Vec<(String, String, Target)> = campus
        .kb
        .entity_ids()
        .filter_map(|(id, osm)| {
            let t = campus.kb.target(osm)?;
            let name = campus.kb.entity(osm)?.name.clone();
            matches!(t, Target::Polygon(_)).then(|| (id.rendered().to_string(), name, t))
        })
        .collect();
    buildings.shuffle(&mut rng);

    let lo = design.route_m * (1.0 - design.route_tolerance);
    let hi = design.route_m * (1.0 + design.route_tolerance);
    let mut chosen = Vec::new();
    for (id, name, target) in buildings {
        if chosen.len() == design.n_buildings {
            break;
        }
        let mut starts: Vec<EnuPoint> = candidates
            .iter()
            .copied()
            .filter(|s| {
                plan_route(&net, *s, project_goal(&target, *s))
                    .is_ok_and(|r| (lo..=hi).contains(&r.total_length_m))
            })
            .collect();
        if starts.len() < design.n_positions {
            continue;
        }
        starts.shuffle(&mut rng);
        starts.truncate(design.n_positions);
        chosen.push((id, name, starts));
    }
    if chosen.len() < design.n_buildings {
        return Err(EvalError::InsufficientBuildings {
            need: design.n_buildings,
            found: chosen.len(),
        }
        .into());
    }

    let mut out = Vec::with_capacity(design.n_buildings * design.n_positions * design.n_yaws);
    for (id, name, starts) in chosen {
        for start in starts {
            for j in 0..design.n_yaws {
                let index = out.len() as u64;
                out.push(EpisodeSpec {
                    world: world_id.to_string(),
                    start,
                    start_yaw: std::f64::consts::TAU * j as f64 / design.n_yaws as f64,
                    target_entity: id.clone(),
                    target_name: name.clone(),
                    object_query: design.explore.then(|| ARENA_QUERY.to_string()),
                    seed: seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(index),
                    success_radius_m: if design.explore {
                        OBJECT_SUCCESS_RADIUS_M
                    } else {
                        NAV_SUCCESS_RADIUS_M
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Shortest achievable path length: the router's route to the building for
/// navigation, and the grid shortest path to the nearest object cell with
/// full map knowledge for object search.
pub fn optimal_length(net: &RoadNetwork, world: &SimWorld, target: &Target, explore: bool) -> Result<f64, Error> {
    let start = world.robot().pose;
    if !explore {
        return Ok(plan_route(net, start, project_goal(target, start))?.total_length_m);
    }
    let g = world.geometry();
    let dist = world.truth().bfs_distances(world.robot_cell());
    world
        .target_cells()
        .iter()
        .filter_map(|c| dist[g.index(*c)])
        .min()
        .map(|d| d as f64 * g.resolution_m)
        .ok_or_else(|| Error::InvalidInput("no searched object is reachable".into()))
}

/// Runs one episode on `campus` and scores it.
pub fn run_episode(
    campus: &Campus,
    spec: &EpisodeSpec,
    cfg: &MissionConfig,
    limits: RunLimits,
) -> Result<EpisodeResult, Error> {
    let osm = campus
        .kb
        .id_index()
        .get(&spec.target_entity)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("unknown target entity {:?}", spec.target_entity)))?;
    let target = campus.kb.target(osm).ok_or_else(|| Error::Internal("entity without geometry".into()))?;
    let mut world = campus.world.clone();
    let cell = world
        .geometry()
        .cell_of(spec.start)
        .ok_or_else(|| Error::InvalidInput("episode start lies outside the world".into()))?;
    world.teleport(cell, spec.start_yaw)?;
    world.clear_objects();
    let mut tasks = vec![Subtask::Nav {
        query: spec.target_name.clone(),
    }];
    if let Some(q) = &spec.object_query {
        let polygon = target
            .polygon()
            .ok_or_else(|| Error::InvalidInput("object search needs a building footprint".into()))?;
        let objects = place_objects_near(&world, polygon, 2, spec.seed)
            .ok_or_else(|| Error::InvalidInput(format!("no room for objects around {}", spec.target_entity)))?;
        for o in objects {
            world.add_object(o);
        }
        tasks.push(Subtask::Explore { query: q.clone() });
    }
    let net = campus.network()?;
    let optimal = optimal_length(&net, &world, &target, spec.object_query.is_some())?;
    let cfg = MissionConfig {
        gnss_seed: spec.seed,
        ..*cfg
    };
    let plan = MissionPlan::new(tasks)?;
    let mut ctx = MissionContext::new(campus.kb.clone(), world, cfg)?;
    let report = run_mission(&plan, &mut ctx, limits)?;
    let pose = report.metrics.final_pose;
    let within = if spec.object_query.is_some() {
        report.metrics.target_distance_m.is_some_and(|d| d <= spec.success_radius_m)
    } else {
        distance_to_target(&target, pose) <= spec.success_radius_m
    };
    let success = report.status == TickStatus::Success && within;
    let failure_cause = match (success, report.cause) {
        (true, _) => None,
        (false, Some(c)) => Some(c),
        (false, None) => Some(format!("ended outside the {} m success radius", spec.success_radius_m)),
    };
    Ok(EpisodeResult {
        success,
        actual_length_m: report.metrics.path_length_m,
        optimal_length_m: optimal,
        tick_count: report.metrics.tick_count,
        failure_cause,
    })
}

/// Distinct `(target, start)` pairs, for checking generated sets.
pub fn distinct_starts(specs: &[EpisodeSpec]) -> BTreeSet<(String, i64, i64)> {
    specs
        .iter()
        .map(|s| (s.target_entity.clone(), (s.start.x * 1e3).round() as i64, (s.start.y * 1e3).round() as i64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campus::{synthetic_campus, CampusSpec};
    use std::time::Duration;

    fn campus() -> Campus {
        synthetic_campus(CampusSpec::default(), 11).unwrap()
    }

    #[test]
    fn cartesian_product_counts() {
        let c = campus();
        let specs = generate_episodes(&c, "campus-11", &EpisodeDesign::default(), 5).unwrap();
        assert_eq!(specs.len(), 45);
        assert_eq!(distinct_starts(&specs).len(), 15);
        let targets: BTreeSet<_> = specs.iter().map(|s| s.target_entity.clone()).collect();
        assert_eq!(targets.len(), 5);
        let one = EpisodeDesign {
            n_buildings: 1,
            n_positions: 1,
            n_yaws: 1,
            ..EpisodeDesign::default()
        };
        assert_eq!(generate_episodes(&c, "w", &one, 5).unwrap().len(), 1);
        assert_eq!(specs, generate_episodes(&c, "campus-11", &EpisodeDesign::default(), 5).unwrap());
        assert!(specs.iter().all(|s| s.success_radius_m == NAV_SUCCESS_RADIUS_M));
    }

    #[test]
    fn too_many_buildings_is_an_error() {
        let d = EpisodeDesign {
            n_buildings: 17,
            ..EpisodeDesign::default()
        };
        assert!(matches!(
            generate_episodes(&campus(), "w", &d, 0),
            Err(Error::Eval(EvalError::InsufficientBuildings { need: 17, .. }))
        ));
    }

    #[test]
    fn starts_match_the_requested_route_length() {
        let c = campus();
        let net = c.network().unwrap();
        for s in generate_episodes(&c, "w", &EpisodeDesign::default(), 2).unwrap() {
            let osm = c.kb.id_index()[&s.target_entity];
            let t = c.kb.target(osm).unwrap();
            let len = plan_route(&net, s.start, project_goal(&t, s.start)).unwrap().total_length_m;
            assert!((270.0..=330.0).contains(&len), "{len}");
        }
    }

    #[test]
    fn one_nav_episode_succeeds() {
        let c = campus();
        let one = EpisodeDesign {
            n_buildings: 1,
            n_positions: 1,
            n_yaws: 1,
            ..EpisodeDesign::default()
        };
        let spec = &generate_episodes(&c, "w", &one, 4).unwrap()[0];
        let limits = RunLimits {
            max_ticks: 50_000,
            wall_clock: Duration::from_secs(60),
        };
        let r = run_episode(&c, spec, &MissionConfig::default(), limits).unwrap();
        assert!(r.success, "{r:?}");
        assert!(r.optimal_length_m > 250.0);
        assert!(r.actual_length_m >= 0.9 * r.optimal_length_m);
    }
}
