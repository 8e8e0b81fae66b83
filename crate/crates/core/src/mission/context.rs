use std::collections::BTreeSet;

use serde_json::json;

use super::MissionConfig;
use crate::bt::{ActionCall, Blackboard, StallMonitor, TickStatus};
use crate::error::Error;
use crate::geodesy::{EnuPoint, FrameAlignment, GnssNoiseModel, GnssReceiver, HeadingBias};
use crate::geometry::{distance_to_segment, Polygon};
use crate::kb::{KnowledgeBase, Target};
use crate::retrieval::{lexical_baseline_scorer, retrieve, CategoryLexicon, EntityTrie, SequenceScorer};
use crate::routing::{adaptive_sample, plan_route_avoiding, project_goal, GlobalRoute, RoadNetwork};
use crate::sim::{CellIdx, ExploreOutcome, Explorer, FollowStep, Follower, SimWorld};

/// Half-size of the search square used when the explored target is a point.
const POINT_TARGET_HALF_M: f64 = 10.0;

/// Active navigation subtask.
#[derive(Debug, Clone)]
pub struct NavState {
    pub entity_id: String,
    pub target: Target,
    pub goal: EnuPoint,
    pub route: GlobalRoute,
    /// Adaptive samples of `route` in the global frame.
    pub samples: Vec<EnuPoint>,
    pub replans: usize,
}

#[derive(Debug, Clone)]
struct InitRun {
    start_local: EnuPoint,
    start_fix: EnuPoint,
    path: Vec<CellIdx>,
}

#[derive(Debug, Clone)]
struct FollowState {
    follower: Follower,
    /// Global samples the follower was built from.
    samples: Vec<EnuPoint>,
}

/// Everything the mission skills read and write: the map, the simulated
/// robot, the estimated frame alignment and per-subtask state.
pub struct MissionContext {
    kb: KnowledgeBase,
    trie: EntityTrie,
    scorer: Box<dyn SequenceScorer>,
    lexicon: CategoryLexicon,
    net: RoadNetwork,
    world: SimWorld,
    cfg: MissionConfig,
    gnss: GnssReceiver,
    /// True transform between the odometry frame and global ENU. Skills only
    /// use it to turn commanded local positions into motion.
    odom: FrameAlignment,
    alignment: Option<FrameAlignment>,
    fix_pairs: Vec<(EnuPoint, EnuPoint)>,
    last_refine_m: f64,
    init: Option<InitRun>,
    nav: Option<NavState>,
    follow: Option<FollowState>,
    stall: StallMonitor,
    explorer: Option<Explorer>,
    blocked: BTreeSet<usize>,
    pub blackboard: Blackboard,
    pub(super) routes: Vec<GlobalRoute>,
    pub(super) replans: usize,
    pub(super) explore_outcome: Option<ExploreOutcome>,
    pub(super) last_failure: Option<String>,
}

impl MissionContext {
    /// Context with the lexical baseline scorer.
    pub fn new(kb: KnowledgeBase, world: SimWorld, cfg: MissionConfig) -> Result<Self, Error> {
        let scorer = Box::new(lexical_baseline_scorer(&kb));
        Self::with_scorer(kb, world, cfg, scorer)
    }

    pub fn with_scorer(
        kb: KnowledgeBase,
        world: SimWorld,
        cfg: MissionConfig,
        scorer: Box<dyn SequenceScorer>,
    ) -> Result<Self, Error> {
        cfg.validate()?;
        let trie = EntityTrie::from_kb(&kb)?;
        let net = RoadNetwork::from_kb(&kb)?;
        let gnss = GnssReceiver::new(GnssNoiseModel::new(cfg.gnss_sigma_m, cfg.gnss_seed)?);
        let robot = *world.robot();
        Ok(MissionContext {
            trie,
            scorer,
            lexicon: CategoryLexicon::default(),
            net,
            gnss,
            odom: FrameAlignment::new(robot.pose, HeadingBias::new(robot.heading)),
            alignment: None,
            fix_pairs: Vec::new(),
            last_refine_m: 0.0,
            init: None,
            nav: None,
            follow: None,
            stall: StallMonitor::new(cfg.stall_window, cfg.stall_eps_m),
            explorer: None,
            blocked: BTreeSet::new(),
            blackboard: Blackboard::default(),
            routes: Vec::new(),
            replans: 0,
            explore_outcome: None,
            last_failure: None,
            kb,
            world,
            cfg,
        })
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn world(&self) -> &SimWorld {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut SimWorld {
        &mut self.world
    }

    pub fn into_world(self) -> SimWorld {
        self.world
    }

    pub fn config(&self) -> &MissionConfig {
        &self.cfg
    }

    pub fn nav(&self) -> Option<&NavState> {
        self.nav.as_ref()
    }

    pub fn alignment(&self) -> Option<&FrameAlignment> {
        self.alignment.as_ref()
    }

    /// Heading error of the estimated alignment against the truth.
    pub fn heading_error_rad(&self) -> Option<f64> {
        self.alignment
            .map(|a| crate::geodesy::normalize_angle(a.bias.radians() - self.odom.bias.radians()).abs())
    }

    pub fn blocked_edges(&self) -> &BTreeSet<usize> {
        &self.blocked
    }

    fn fail(&mut self, cause: impl Into<String>) -> TickStatus {
        let cause = cause.into();
        log::info!("skill failure: {cause}");
        self.last_failure = Some(cause);
        TickStatus::Failure
    }

    fn local_pose(&self) -> EnuPoint {
        self.odom.to_local(self.world.robot().pose)
    }

    /// Where the robot believes it is in global ENU.
    pub fn estimated_pose(&self) -> EnuPoint {
        let local = self.local_pose();
        self.alignment.map_or(local, |a| a.to_global(local))
    }

    /// Ground-truth position the robot drives to when commanded toward the
    /// global point `w`.
    fn commanded(&self, w: EnuPoint) -> EnuPoint {
        let local = self.alignment.map_or(w, |a| a.to_local(w));
        self.odom.to_global(local)
    }

    fn take_fix_pair(&mut self) -> (EnuPoint, EnuPoint) {
        let truth = self.world.robot().pose;
        let fix = self.gnss.filtered_fix(truth, self.cfg.fix_window);
        (self.local_pose(), fix)
    }

    /// Heading initialization: drive straight ahead, then align the odometry
    /// frame to the averaged fixes at both ends.
    fn init_heading(&mut self, fresh: bool) -> TickStatus {
        if fresh || self.init.is_none() {
            let (start_local, start_fix) = self.take_fix_pair();
            let robot = *self.world.robot();
            let ahead = robot.pose + EnuPoint::new(robot.heading.cos(), robot.heading.sin()) * self.cfg.init_run_m;
            let g = *self.world.geometry();
            let truth = self.world.truth();
            let goal = g
                .cell_of(ahead)
                .and_then(|c| if truth.is_free(c) { Some(c) } else { truth.nearest_free(c, 2.0 / g.resolution_m) });
            let here = self.world.robot_cell();
            let m = (self.cfg.init_run_m / g.resolution_m) as usize + 10;
            let window = (
                CellIdx::new(here.row.saturating_sub(m), here.col.saturating_sub(m)),
                CellIdx::new((here.row + m).min(g.height - 1), (here.col + m).min(g.width - 1)),
            );
            let path = goal.and_then(|c| truth.bfs_path_within(here, c, Some(window)));
            let Some(path) = path.filter(|p| p.len() > 1) else {
                return self.fail("heading initialization: no free run ahead");
            };
            self.init = Some(InitRun {
                start_local,
                start_fix,
                path,
            });
        }
        let run = self.init.as_mut().expect("init run prepared above");
        if run.path.len() > 1 {
            let next = run.path.remove(1);
            if self.world.step_to(next).is_err() {
                self.init = None;
                return self.fail("heading initialization: run blocked");
            }
            return TickStatus::Running;
        }
        let run = self.init.take().expect("init run present");
        let end = self.take_fix_pair();
        if run.start_fix.distance(end.1) < crate::geodesy::DEFAULT_MIN_BASELINE_M {
            return self.fail("heading initialization: GNSS baseline too short");
        }
        let pairs = vec![(run.start_local, run.start_fix), end];
        match FrameAlignment::fit(&pairs) {
            Ok(a) => {
                self.alignment = Some(a);
                self.fix_pairs = pairs;
                self.last_refine_m = self.world.robot().path_length_m;
                TickStatus::Success
            }
            Err(e) => self.fail(format!("heading initialization: {e}")),
        }
    }

    /// Refits the alignment with a new fix once the robot has driven far
    /// enough since the previous one. Returns true when the alignment moved.
    fn maybe_refine(&mut self) -> bool {
        let driven = self.world.robot().path_length_m;
        if self.alignment.is_none() || driven - self.last_refine_m < self.cfg.refine_every_m {
            return false;
        }
        self.last_refine_m = driven;
        let pair = self.take_fix_pair();
        self.fix_pairs.push(pair);
        match FrameAlignment::fit(&self.fix_pairs) {
            Ok(a) => {
                self.alignment = Some(a);
                true
            }
            Err(_) => false,
        }
    }

    fn new_follower(&self, samples: &[EnuPoint]) -> Follower {
        let wps = samples.iter().map(|w| self.commanded(*w)).collect();
        Follower::new(wps, self.cfg.follow_tolerance_m)
    }

    pub(super) fn global_planning(&mut self, call: &ActionCall) -> TickStatus {
        let Some(query) = call.target.clone().filter(|q| !q.trim().is_empty()) else {
            return self.fail("GlobalPlanning needs a target");
        };
        if self.alignment.is_none() {
            match self.init_heading(call.fresh) {
                TickStatus::Success => {}
                other => return other,
            }
        }
        let found = match retrieve(&query, &self.kb, &self.trie, self.scorer.as_ref(), &self.lexicon, self.cfg.beam) {
            Ok(r) => r,
            Err(e) => return self.fail(format!("retrieval of {query:?} failed: {e}")),
        };
        let entity_id = found.result.entries[0].entity_id.clone();
        let robot = self.estimated_pose();
        let goal = project_goal(&found.target, robot);
        let route = match plan_route_avoiding(&self.net, robot, goal, &self.blocked) {
            Ok(r) => r,
            Err(e) => return self.fail(format!("no route to {entity_id}: {e}")),
        };
        let samples = match adaptive_sample(&route, &self.cfg.sampler) {
            Ok(s) => s,
            Err(e) => return self.fail(format!("sampling the route to {entity_id} failed: {e}")),
        };
        log::info!("goal {entity_id}: route {:.1} m, {} waypoints", route.total_length_m, samples.len());
        self.blackboard.set("goal_entity", json!(entity_id));
        self.blackboard.set("goal", json!([goal.x, goal.y]));
        self.blackboard.set("route_length_m", json!(route.total_length_m));
        self.routes.push(route.clone());
        self.follow = None;
        self.nav = Some(NavState {
            entity_id,
            target: found.target,
            goal,
            route,
            samples,
            replans: 0,
        });
        TickStatus::Success
    }

    pub(super) fn follow_path(&mut self, call: &ActionCall) -> TickStatus {
        let Some(samples) = self.nav.as_ref().map(|n| n.samples.clone()) else {
            return self.fail("FollowPath without a planned route");
        };
        if call.fresh || self.follow.is_none() {
            self.follow = Some(FollowState {
                follower: self.new_follower(&samples),
                samples,
            });
            self.stall.reset();
        }
        if self.maybe_refine() {
            let st = self.follow.as_ref().expect("follow state set above");
            let left = st.follower.remaining().len();
            let rest = st.samples[st.samples.len() - left..].to_vec();
            let follower = self.new_follower(&rest);
            self.follow = Some(FollowState { follower, samples: rest });
        }
        let st = self.follow.as_mut().expect("follow state set above");
        let step = st.follower.step(&mut self.world);
        self.stall.push(self.world.robot().pose);
        match step {
            FollowStep::Arrived => {
                self.follow = None;
                TickStatus::Success
            }
            _ if self.stall.is_stalled() => {
                self.follow = None;
                let p = self.estimated_pose();
                self.fail(format!("stalled near ({:.1}, {:.1})", p.x, p.y))
            }
            _ => TickStatus::Running,
        }
    }

    /// Blocks the route edge nearest the robot, backs up to the node it
    /// entered that edge from and routes again from there.
    pub(super) fn replan(&mut self, _call: &ActionCall) -> TickStatus {
        let max = self.cfg.max_replans;
        let robot = self.estimated_pose();
        let Some((entity_id, replans, goal, edges)) =
            self.nav.as_ref().map(|n| (n.entity_id.clone(), n.replans, n.goal, n.route.edges.clone()))
        else {
            return self.fail("Replan without a planned route");
        };
        if replans >= max {
            return self.fail(format!("replan limit of {max} reached for {entity_id}"));
        }
        if let Some(n) = self.nav.as_mut() {
            n.replans += 1;
        }
        self.replans += 1;
        let net = &self.net;
        let seg_dist = |e: usize| {
            let ne = net.edge(e);
            distance_to_segment(robot, net.point(ne.a), net.point(ne.b))
        };
        let Some(k) = (0..edges.len()).min_by(|a, b| seg_dist(edges[*a]).total_cmp(&seg_dist(edges[*b]))) else {
            return self.fail("Replan: the route uses no road edges");
        };
        let e = net.edge(edges[k]);
        let exit = match edges.get(k + 1).map(|n| net.edge(*n)) {
            Some(n) if n.a == e.a || n.b == e.a => e.a,
            Some(_) => e.b,
            None if net.point(e.a).distance(goal) <= net.point(e.b).distance(goal) => e.a,
            None => e.b,
        };
        let back = net.point(e.other(exit));
        self.blocked.insert(edges[k]);
        log::info!("replan: blocking edge {} and backing up to node {}", edges[k], e.other(exit));
        let planned = plan_route_avoiding(&self.net, back, goal, &self.blocked).and_then(|sub| {
            let mut points = vec![robot];
            points.extend(sub.points.iter().copied());
            let mut route = GlobalRoute::from_points(&points)?;
            route.edges = std::iter::once(edges[k]).chain(sub.edges.iter().copied()).collect();
            let samples = adaptive_sample(&route, &self.cfg.sampler)?;
            Ok((route, samples))
        });
        let (route, samples) = match planned {
            Ok(x) => x,
            Err(err) => return self.fail(format!("replan toward {entity_id} failed: {err}")),
        };
        self.blackboard.set("route_length_m", json!(route.total_length_m));
        self.routes.push(route.clone());
        if let Some(n) = self.nav.as_mut() {
            n.route = route;
            n.samples = samples;
        }
        self.follow = None;
        TickStatus::Success
    }

    pub(super) fn exploration(&mut self, call: &ActionCall) -> TickStatus {
        let Some(query) = call.target.clone().filter(|q| !q.trim().is_empty()) else {
            return self.fail("Exploration needs an object query");
        };
        if call.fresh || self.explorer.is_none() {
            let Some(nav) = self.nav.as_ref() else {
                return self.fail("Exploration without a navigation target");
            };
            let region = match &nav.target {
                Target::Polygon(p) => Ok(p.clone()),
                Target::Point(p) => {
                    let h = EnuPoint::new(POINT_TARGET_HALF_M, POINT_TARGET_HALF_M);
                    Polygon::rectangle(*p - h, *p + h)
                }
            };
            let region = match region.and_then(|p| p.map_points(|v| self.commanded(v))) {
                Ok(r) => r,
                Err(e) => return self.fail(format!("search region: {e}")),
            };
            self.explorer = Some(Explorer::new(&self.world, &query, region, self.cfg.sim));
        }
        let ex = self.explorer.as_mut().expect("explorer set above");
        let status = ex.step(&mut self.world);
        if status != TickStatus::Running {
            let outcome = ex.outcome().cloned();
            self.explorer = None;
            if let Some(o) = &outcome {
                self.blackboard.set("explore_end", json!(o.end));
            }
            let end = outcome.as_ref().map_or_else(|| "unknown".to_string(), |o| o.end.to_string());
            self.explore_outcome = outcome;
            if status == TickStatus::Failure {
                return self.fail(format!("exploration for {query:?} ended: {end}"));
            }
        }
        status
    }
}
