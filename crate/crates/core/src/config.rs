//! JSON run configuration shared by every pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, Gateway, LiveBackend, ModelRef, ReplayBackend, RetryPolicy, SamplingParams, Script, ScriptedBackend};
use crate::judge::JudgeConfig;
use crate::resolver::{ResolveConfig, UserSimConfig};
use crate::retrieval::{Bm25Params, PerturbationPolicy};

/// Sampling roles a config may override.
pub const SAMPLING_ROLES: [&str; 4] = ["evaluated", "judge", "user_sim", "builder"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Live {
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    Scripted {
        script: PathBuf,
    },
    /// Cached responses; misses go to the live backend when `live_misses`.
    Replay {
        cache_dir: PathBuf,
        #[serde(default)]
        live_misses: bool,
    },
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRoles {
    pub evaluated: Option<ModelRef>,
    /// Defaults to the evaluated model.
    #[serde(default)]
    pub strong: Option<ModelRef>,
    pub judge: Option<ModelRef>,
    /// Defaults to the judge model.
    #[serde(default)]
    pub user_sim: Option<ModelRef>,
    #[serde(default)]
    pub generators: Vec<ModelRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        RetrievalConfig {
            k: 5,
            bm25_k1: p.k1,
            bm25_b: p.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub capability_by_prompt: bool,
    pub n_probes: usize,
    pub repeats: usize,
    pub prompt_prefix: Option<String>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            capability_by_prompt: true,
            n_probes: 2,
            repeats: 3,
            prompt_prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub backend: BackendConfig,
    pub models: ModelRoles,
    #[serde(default)]
    pub sampling: BTreeMap<String, SamplingParams>,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub perturbation: Option<PerturbationPolicy>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    /// Concurrent requests per model.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Named input/output files, relative to the config file.
    #[serde(default)]
    pub paths: BTreeMap<String, PathBuf>,
}

fn default_concurrency() -> usize {
    8
}

impl RunConfig {
    /// Reads and validates a config; relative paths are resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.backend {
            BackendConfig::Scripted { script } => fix(script),
            BackendConfig::Replay { cache_dir, .. } => fix(cache_dir),
            BackendConfig::Live { .. } => {}
        }
        self.paths.values_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        for (role, params) in &self.sampling {
            if !SAMPLING_ROLES.contains(&role.as_str()) {
                return Err(Error::Config(format!("unknown sampling role `{role}`")));
            }
            params.validate().map_err(|e| Error::Config(format!("sampling.{role}: {e}")))?;
        }
        if self.retrieval.k == 0 {
            return Err(Error::Config("retrieval.k must be positive".into()));
        }
        self.bm25()?;
        if let Some(policy) = &self.perturbation {
            policy.validate().map_err(|e| Error::Config(format!("perturbation: {e}")))?;
        }
        if self.strategy.repeats == 0 {
            return Err(Error::Config("strategy.repeats must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be positive".into()));
        }
        Ok(())
    }

    pub fn bm25(&self) -> Result<Bm25Params> {
        let p = Bm25Params {
            k1: self.retrieval.bm25_k1,
            b: self.retrieval.bm25_b,
        };
        if !(p.k1 >= 0.0 && (0.0..=1.0).contains(&p.b)) {
            return Err(Error::Config(format!("bm25 k1={} b={} out of range", p.k1, p.b)));
        }
        Ok(p)
    }

    fn role<'a>(name: &str, model: &'a Option<ModelRef>) -> Result<&'a ModelRef> {
        model
            .as_ref()
            .ok_or_else(|| Error::Config(format!("models.{name} is required for this command")))
    }

    pub fn evaluated(&self) -> Result<&ModelRef> {
        Self::role("evaluated", &self.models.evaluated)
    }

    pub fn judge(&self) -> Result<&ModelRef> {
        Self::role("judge", &self.models.judge)
    }

    pub fn strong(&self) -> Result<&ModelRef> {
        match &self.models.strong {
            Some(m) => Ok(m),
            None => self.evaluated(),
        }
    }

    pub fn user_sim(&self) -> Result<UserSimConfig> {
        let model = match &self.models.user_sim {
            Some(m) => m,
            None => self.judge()?,
        };
        let mut cfg = UserSimConfig::new(model.clone());
        if let Some(p) = self.sampling.get("user_sim") {
            cfg.max_tokens = p.max_tokens;
        }
        Ok(cfg)
    }

    pub fn generators(&self) -> Result<&[ModelRef]> {
        if self.models.generators.len() < 2 {
            return Err(Error::Config("models.generators needs at least two models".into()));
        }
        Ok(&self.models.generators)
    }

    pub fn judge_config(&self) -> JudgeConfig {
        let mut cfg = JudgeConfig {
            capability_by_prompt: self.strategy.capability_by_prompt,
            n_probes: self.strategy.n_probes,
            seed: self.seed,
            prompt_prefix: self.strategy.prompt_prefix.clone(),
            ..JudgeConfig::default()
        };
        if let Some(p) = self.sampling.get("evaluated") {
            cfg.sampling = *p;
        }
        if let Some(p) = self.sampling.get("judge") {
            cfg.judge_sampling = *p;
        }
        cfg
    }

    pub fn resolve_config(&self) -> ResolveConfig {
        ResolveConfig {
            k: self.retrieval.k,
            ..ResolveConfig::default()
        }
    }

    pub fn perturbation(&self) -> PerturbationPolicy {
        self.perturbation.unwrap_or(PerturbationPolicy {
            seed: self.seed,
            ..PerturbationPolicy::default()
        })
    }

    pub fn builder_sampling(&self) -> SamplingParams {
        self.sampling.get("builder").copied().unwrap_or_else(SamplingParams::judging)
    }

    pub fn path(&self, name: &str) -> Option<&Path> {
        self.paths.get(name).map(PathBuf::as_path)
    }

    /// Checks that the backend's inputs exist without contacting any model.
    pub fn check_backend(&self) -> Result<()> {
        match &self.backend {
            BackendConfig::Scripted { script } => Script::load(script).map(|_| ()),
            BackendConfig::Replay { cache_dir, live_misses } => {
                if !*live_misses && !cache_dir.is_dir() {
                    return Err(Error::Config(format!("replay cache {} does not exist", cache_dir.display())));
                }
                Ok(())
            }
            BackendConfig::Live { .. } => Ok(()),
        }
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let retry = match &self.backend {
            BackendConfig::Live { max_retries, .. } => RetryPolicy {
                max_retries: *max_retries,
                ..RetryPolicy::default()
            },
            _ => RetryPolicy::default(),
        };
        let backend: Arc<dyn ChatBackend> = match &self.backend {
            BackendConfig::Live { timeout_secs, .. } => Arc::new(LiveBackend::new(Duration::from_secs(*timeout_secs))?),
            BackendConfig::Scripted { script } => Arc::new(ScriptedBackend::new(Script::load(script)?)),
            BackendConfig::Replay { cache_dir, live_misses } => {
                let inner: Option<Arc<dyn ChatBackend>> = if *live_misses {
                    Some(Arc::new(LiveBackend::new(Duration::from_secs(default_timeout()))?))
                } else {
                    None
                };
                Arc::new(ReplayBackend::new(cache_dir, inner)?)
            }
        };
        Ok(Gateway::new(backend).with_retry(retry).with_concurrency(self.concurrency))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 7,
        "backend": {"kind": "scripted", "script": "script.json"},
        "models": {
            "evaluated": {"name": "m", "endpoint": "http://localhost:1/v1"},
            "judge": {"name": "j", "endpoint": "http://localhost:1/v1"}
        },
        "paths": {"bench": "bench.jsonl", "abs": "/tmp/x"}
    }"#;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.json");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn loads_with_defaults_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load(&write(dir.path(), MINIMAL)).unwrap();
        assert_eq!(cfg.path("bench").unwrap(), dir.path().join("bench.jsonl"));
        assert_eq!(cfg.path("abs").unwrap(), Path::new("/tmp/x"));
        assert_eq!(cfg.strong().unwrap().name, "m");
        assert_eq!(cfg.user_sim().unwrap().model.name, "j");
        assert_eq!(cfg.perturbation().seed, 7);
        let jc = cfg.judge_config();
        assert!(jc.capability_by_prompt);
        assert_eq!((jc.n_probes, jc.seed), (2, 7));
        assert_eq!(cfg.resolve_config().k, 5);
        assert!(cfg.generators().is_err());
        assert!(cfg.check_backend().is_err(), "script file is missing");
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        for (from, to) in [
            (r#""seed": 7,"#, r#""seed": 7, "retrieval": {"k": 0},"#),
            (r#""seed": 7,"#, r#""seed": 7, "retrieval": {"bm25_b": 1.5},"#),
            (r#""seed": 7,"#, r#""seed": 7, "sampling": {"nobody": {"temperature": 0, "max_tokens": 5}},"#),
            (r#""seed": 7,"#, r#""seed": 7, "strategy": {"repeats": 0},"#),
            (r#""seed": 7,"#, r#""seed": 7, "surprise": 1,"#),
            (r#""seed": 7,"#, ""),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(RunConfig::load(&write(dir.path(), &text)).is_err(), "{to}");
        }
        assert!(matches!(RunConfig::load(&dir.path().join("absent.json")), Err(Error::Io { .. })));
    }

    #[test]
    fn missing_roles_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace(r#""judge": {"name": "j", "endpoint": "http://localhost:1/v1"}"#, r#""judge": null"#);
        let cfg = RunConfig::load(&write(dir.path(), &text)).unwrap();
        let err = cfg.judge().unwrap_err().to_string();
        assert!(err.contains("models.judge"), "{err}");
    }
}
