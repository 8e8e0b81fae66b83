use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use geodragon::bt::{parse_mission, TickStatus};
use geodragon::campus::synthetic_campus;
use geodragon::error::EXIT_MISSION_FAILURE;
use geodragon::eval::{
    emit_report, generate_episodes, generate_query_dataset, recall_at_k, run_episode, spl, success_rate, Metrics,
    NavRow, RecallRow, ReportFormat, RetrievalRecord,
};
use geodragon::geodesy::{enu_to_wgs84, Wgs84Point};
use geodragon::kb::{parse_osm_extract, parse_osm_jsonl, CategoryRules, KnowledgeBase};
use geodragon::mission::{run_mission, MissionContext};
use geodragon::retrieval::{
    lexical_baseline_scorer, retrieve, BeamConfig, CategoryLexicon, Difficulty, EntityTrie, Retrieval,
};
use geodragon::routing::{adaptive_sample, plan_route, project_goal, route_to_geojson, waypoints_to_csv, RoadNetwork};
use geodragon::sim::{place_objects_near, SimWorld};
use geodragon::Error;

use crate::config::RunConfig;
use crate::{Cli, Command, Format};

/// Runs one subcommand and returns its exit status.
pub fn run(cli: Cli) -> Result<i32, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.kb.is_some() {
        cfg.kb = cli.kb.clone();
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    cfg.check_files()?;
    match cli.command {
        Command::Ingest { osm, rules } => ingest(&cfg, &osm, rules.as_deref()),
        Command::Query { text, k } => query(&cfg, &text, k),
        Command::Route { from, to } => route(&cfg, &from, &to, cli.format),
        Command::Mission {
            plan,
            instruction,
            world,
        } => mission(cfg, plan, instruction, world),
        Command::Eval => eval(&cfg, cli.format),
        Command::Synth => synth(&cfg),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(v: &impl serde::Serialize) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `--out` when given, to stdout otherwise.
fn emit(cfg: &RunConfig, text: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_kb(cfg: &RunConfig) -> Result<KnowledgeBase, Error> {
    let path = cfg
        .kb
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("a knowledge base is required (--kb)".into()))?;
    Ok(KnowledgeBase::load(path)?)
}

fn ingest(cfg: &RunConfig, osm: &Path, rules: Option<&Path>) -> Result<i32, Error> {
    let bytes = std::fs::read(osm).map_err(|e| Error::io(osm, e))?;
    let rules = match rules {
        Some(p) => CategoryRules::parse(&read(p)?)?,
        None => CategoryRules::default(),
    };
    let kb = if osm.extension().is_some_and(|e| e == "jsonl") {
        parse_osm_jsonl(&bytes, &rules)?
    } else {
        parse_osm_extract(&bytes, &rules)?
    };
    match &cfg.out {
        Some(out) => {
            write(out, &kb.to_json())?;
            let summary = json!({
                "kb": out.display().to_string(),
                "entities": kb.len(),
                "road_nodes": kb.road_graph().nodes().len(),
                "road_edges": kb.road_graph().edges().len(),
            });
            print!("{}", pretty(&summary)?);
        }
        None => print!("{}", kb.to_json()),
    }
    Ok(0)
}

fn retrieval(kb: &KnowledgeBase, text: &str, beam: BeamConfig) -> Result<Retrieval, Error> {
    let trie = EntityTrie::from_kb(kb)?;
    let scorer = lexical_baseline_scorer(kb);
    Ok(retrieve(text, kb, &trie, &scorer, &CategoryLexicon::default(), beam)?)
}

fn query(cfg: &RunConfig, text: &str, k: usize) -> Result<i32, Error> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let kb = load_kb(cfg)?;
    let beam = BeamConfig {
        beam: cfg.mission.beam.beam.max(k),
        k,
    };
    let found = retrieval(&kb, text, beam)?;
    let anchor = kb.enu_anchor();
    let results = found
        .result
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let target = kb
                .target(e.osm_id)
                .ok_or_else(|| Error::Internal(format!("{} has no geometry", e.entity_id)))?;
            let p = target.reference_point();
            let w = enu_to_wgs84(anchor, p)?;
            Ok(json!({
                "rank": i + 1,
                "entity_id": e.entity_id,
                "osm_id": e.osm_id,
                "log_score": e.log_score,
                "enu": [p.x, p.y],
                "lat": w.lat(),
                "lon": w.lon(),
            }))
        })
        .collect::<Result<Vec<Value>, Error>>()?;
    let out = json!({
        "query": text,
        "cues": found.cues,
        "fallback_used": found.result.fallback_used,
        "results": results,
    });
    emit(cfg, &pretty(&out)?)?;
    Ok(0)
}

fn parse_lat_lon(s: &str) -> Result<Wgs84Point, Error> {
    let bad = || Error::InvalidInput(format!("expected `lat,lon`, got {s:?}"));
    let (lat, lon) = s.split_once(',').ok_or_else(bad)?;
    let lat: f64 = lat.trim().parse().map_err(|_| bad())?;
    let lon: f64 = lon.trim().parse().map_err(|_| bad())?;
    Ok(Wgs84Point::new(lat, lon)?)
}

fn route(cfg: &RunConfig, from: &str, to: &str, format: Option<Format>) -> Result<i32, Error> {
    let kb = load_kb(cfg)?;
    let start = kb.to_enu(parse_lat_lon(from)?)?;
    let (entity_id, target) = match kb.id_index().get(to) {
        Some(osm) => (
            to.to_string(),
            kb.target(*osm)
                .ok_or_else(|| Error::Internal(format!("{to} has no geometry")))?,
        ),
        None => {
            let found = retrieval(&kb, to, cfg.mission.beam)?;
            (found.result.entries[0].entity_id.clone(), found.target)
        }
    };
    let net = RoadNetwork::from_kb(&kb)?;
    let route = plan_route(&net, start, project_goal(&target, start))?;
    let samples = adaptive_sample(&route, &cfg.mission.sampler)?;
    let mut geojson = route_to_geojson(&route.points, kb.enu_anchor())?;
    geojson["properties"] = json!({ "entity_id": entity_id, "length_m": route.total_length_m });
    let csv = waypoints_to_csv(&samples);
    if let Some(dir) = cfg.out.as_ref().filter(|p| p.is_dir()) {
        write(&dir.join("route.geojson"), &pretty(&geojson)?)?;
        write(&dir.join("waypoints.csv"), &csv)?;
        return Ok(0);
    }
    let text = match format.unwrap_or(Format::Geojson) {
        Format::Geojson => pretty(&geojson)?,
        Format::Csv => csv,
        Format::Json => pretty(&json!({
            "entity_id": entity_id,
            "length_m": route.total_length_m,
            "points": route.points,
            "waypoints": samples,
        }))?,
        Format::Markdown => return Err(Error::InvalidInput("route supports json, csv and geojson".into())),
    };
    emit(cfg, &text)?;
    Ok(0)
}

fn mission(
    mut cfg: RunConfig,
    plan: Option<PathBuf>,
    instruction: Option<String>,
    world: Option<PathBuf>,
) -> Result<i32, Error> {
    let plan_text = match (instruction, plan.or(cfg.plan.clone())) {
        (Some(text), _) => text,
        (None, Some(p)) => read(&p)?,
        (None, None) => return Err(Error::InvalidInput("a mission needs --plan or --instruction".into())),
    };
    let plan = parse_mission(&plan_text)?;
    let stem = world
        .or(cfg.world.clone())
        .ok_or_else(|| Error::InvalidInput("a mission needs a world fixture (--world)".into()))?;
    let world = SimWorld::load_fixture(&stem)?;
    let kb = load_kb(&cfg)?;
    if let Some(seed) = cfg.seed {
        cfg.mission.gnss_seed = seed;
    }
    let mut ctx = MissionContext::new(kb, world, cfg.mission)?;
    let report = run_mission(&plan, &mut ctx, cfg.limits)?;
    let text = pretty(&report)?;
    match &cfg.out {
        Some(out) => {
            write(out, &text)?;
            let trajectory = out.with_extension("trajectory.csv");
            write(&trajectory, &ctx.world().trajectory_csv())?;
            let summary = json!({
                "status": report.status,
                "cause": report.cause,
                "report": out.display().to_string(),
                "trajectory": trajectory.display().to_string(),
            });
            print!("{}", pretty(&summary)?);
        }
        None => print!("{text}"),
    }
    Ok(if report.status == TickStatus::Success {
        0
    } else {
        EXIT_MISSION_FAILURE
    })
}

fn eval(cfg: &RunConfig, format: Option<Format>) -> Result<i32, Error> {
    let format = match format.unwrap_or(Format::Json) {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
        Format::Geojson => return Err(Error::InvalidInput("eval reports are json, csv or markdown".into())),
    };
    let suite = &cfg.eval;
    let seed = |s: u64| cfg.seed.unwrap_or(s);
    let campus = synthetic_campus(cfg.campus, seed(suite.campus_seed))?;
    let mut metrics = Metrics::default();
    for (i, task) in suite.tasks.iter().enumerate() {
        let world_id = format!("campus-{}", seed(suite.campus_seed));
        let specs = generate_episodes(&campus, &world_id, &task.design, seed(suite.episode_seed) + i as u64)?;
        let results = specs
            .iter()
            .map(|s| run_episode(&campus, s, &cfg.mission, cfg.limits))
            .collect::<Result<Vec<_>, Error>>()?;
        log::info!("{} {}: {} episodes", task.task, task.range, results.len());
        metrics.navigation.push(NavRow {
            task: task.task.clone(),
            range: task.range.clone(),
            sr: success_rate(&results)?,
            spl: 100.0 * spl(&results)?,
        });
    }
    if suite.queries > 0 {
        let kb = match &cfg.kb {
            Some(_) => load_kb(cfg)?,
            None => campus.kb.clone(),
        };
        let lexicon = CategoryLexicon::default();
        let data = generate_query_dataset(&kb, &lexicon, suite.queries, suite.easy_ratio, seed(suite.query_seed))?;
        let trie = EntityTrie::from_kb(&kb)?;
        let scorer = lexical_baseline_scorer(&kb);
        let beam = BeamConfig {
            beam: cfg.mission.beam.beam.max(5),
            k: 5,
        };
        let mut records = Vec::with_capacity(data.len());
        for q in data {
            let found = retrieve(&q.query, &kb, &trie, &scorer, &lexicon, beam)?;
            records.push(RetrievalRecord {
                predictions: found.result.ids().into_iter().map(String::from).collect(),
                query: q.query,
                gold: q.gold_entity_id,
                difficulty: q.difficulty,
            });
        }
        for (split, d) in [("easy", Difficulty::Easy), ("hard", Difficulty::Hard)] {
            let subset: Vec<RetrievalRecord> = records.iter().filter(|r| r.difficulty == d).cloned().collect();
            if subset.is_empty() {
                continue;
            }
            metrics.retrieval.push(RecallRow {
                split: split.into(),
                r1: 100.0 * recall_at_k(&subset, 1)?,
                r5: 100.0 * recall_at_k(&subset, 5)?,
            });
        }
    }
    emit(cfg, &emit_report(&metrics, format))?;
    Ok(0)
}

fn synth(cfg: &RunConfig) -> Result<i32, Error> {
    let dir = cfg
        .out
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("synth writes into a directory given by --out".into()))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let seed = cfg.seed.unwrap_or(0);
    let mut campus = synthetic_campus(cfg.campus, seed)?;
    let host = campus
        .kb
        .entities()
        .find(|e| e.category == "Study Area")
        .or_else(|| campus.kb.entities().next())
        .and_then(|e| Some((campus.kb.entity_id(e.osm_id)?.rendered().to_string(), campus.kb.target(e.osm_id)?)));
    let mut object_near = None;
    if let Some((id, target)) = host {
        if let Some(objects) = target.polygon().and_then(|p| place_objects_near(&campus.world, p, 2, seed)) {
            for o in objects {
                campus.world.add_object(o);
            }
            object_near = Some(id);
        }
    }
    let (grid, sidecar) = campus.world.to_fixture();
    write(&dir.join("campus.osm"), &campus.osm_xml)?;
    write(&dir.join("kb.json"), &campus.kb.to_json())?;
    write(&dir.join("world.txt"), &grid)?;
    write(&dir.join("world.json"), &sidecar)?;
    let names: Vec<&str> = campus.kb.entity_ids().map(|(id, _)| id.rendered()).collect();
    let summary = json!({
        "osm": dir.join("campus.osm").display().to_string(),
        "kb": dir.join("kb.json").display().to_string(),
        "world": dir.join("world").display().to_string(),
        "entities": names,
        "object_query": campus.world.object_query(),
        "object_near": object_near,
    });
    print!("{}", pretty(&summary)?);
    Ok(0)
}
