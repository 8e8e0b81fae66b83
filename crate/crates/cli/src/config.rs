use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use geodragon::bt::RunLimits;
use geodragon::campus::CampusSpec;
use geodragon::eval::EpisodeDesign;
use geodragon::mission::MissionConfig;
use geodragon::Error;

/// One row of the navigation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalTask {
    pub task: String,
    pub range: String,
    #[serde(default)]
    pub design: EpisodeDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSuite {
    pub campus_seed: u64,
    pub episode_seed: u64,
    pub tasks: Vec<EvalTask>,
    pub queries: usize,
    pub easy_ratio: f64,
    pub query_seed: u64,
}

impl Default for EvalSuite {
    fn default() -> Self {
        EvalSuite {
            campus_seed: 0,
            episode_seed: 0,
            tasks: vec![
                EvalTask {
                    task: "Task 1".into(),
                    range: "300m".into(),
                    design: EpisodeDesign::default(),
                },
                EvalTask {
                    task: "Task 2".into(),
                    range: "300m".into(),
                    design: EpisodeDesign {
                        explore: true,
                        ..EpisodeDesign::default()
                    },
                },
            ],
            queries: 200,
            easy_ratio: 0.7,
            query_seed: 0,
        }
    }
}

/// Settings file. Flags override the matching fields; relative paths are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kb: Option<PathBuf>,
    /// World fixture stem: `<stem>.txt` plus `<stem>.json`.
    pub world: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mission: MissionConfig,
    pub limits: RunLimits,
    pub campus: CampusSpec,
    pub eval: EvalSuite,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kb: None,
            world: None,
            plan: None,
            seed: None,
            out: None,
            mission: MissionConfig::default(),
            limits: RunLimits {
                max_ticks: 50_000,
                wall_clock: std::time::Duration::from_secs(120),
            },
            campus: CampusSpec::default(),
            eval: EvalSuite::default(),
        }
    }
}

fn require(path: &Path, what: &str) -> Result<(), Error> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} {} does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.kb, &mut cfg.world, &mut cfg.plan].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Every referenced input must exist.
    pub fn check_files(&self) -> Result<(), Error> {
        if let Some(p) = &self.kb {
            require(p, "knowledge base")?;
        }
        if let Some(p) = &self.plan {
            require(p, "mission plan")?;
        }
        if let Some(stem) = &self.world {
            require(&stem.with_extension("txt"), "world grid")?;
            require(&stem.with_extension("json"), "world sidecar")?;
        }
        self.mission.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"kb": "x.json", "colour": 1}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"mission": {"gnss_sigma_m": 1.0}}"#).unwrap();
        assert_eq!(cfg.mission.gnss_sigma_m, 1.0);
        assert_eq!(cfg.eval.tasks.len(), 2);
    }

    #[test]
    fn missing_files_fail_at_load() {
        let dir = std::env::temp_dir().join(format!("geodragon-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.json");
        std::fs::write(&path, r#"{"kb": "absent.json"}"#).unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("absent.json"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
