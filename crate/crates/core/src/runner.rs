//! Trial orchestration: iterate play → feedback → redesign, persist every
//! artifact, re-evaluate generated configurations, and sweep experiment
//! grids resumably.
//!
//! Directory layout, rooted at an experiment directory:
//!
//! ```text
//! manifest.json
//! <variant>/<scenario>/trial_###/
//!   trial.json
//!   iter_##/{config.yaml, episodes.jsonl, diff.json, exchange.json,
//!            strip_ep#.png, reeval.jsonl}
//! ```
//!
//! `exchange.json` holds the designer call that produced that iteration's
//! config (absent for iteration 0 and for designers that do not talk to an
//! endpoint); `diff.json` the field changes relative to the previous
//! iteration. Iteration directories are written to a temp name and renamed,
//! so an interrupted trial only ever leaves whole iterations behind.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::{build_policy, run_batch, Policy, PolicyDescriptor, PolicyKind};
use crate::config::{
    broken_config, diff_configs, parse_config, serialize_config, validate_config, ConfigError,
    FieldChange, GameConfig, Scenario,
};
use crate::designer::{
    llm_designer_propose, scripted_designer_propose, ChatTransport, DesignerError,
    DesignerExchange, HttpChatTransport, PromptVariant,
};
use crate::rng::{hash_str, SplitMix64};
use crate::sim::{run_episode, SimError};
use crate::traces::{composite_strip, downscale, encode_png, EpisodeTrace};

/// Gap between trial episode seeds and re-evaluation seeds within a trial;
/// keeps the two seed sets disjoint for any sane episode count.
pub const REEVAL_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Designer(#[from] DesignerError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Corrupt(String),
}

// ---------------------------------------------------------------------------
// Designers as pluggable agents
// ---------------------------------------------------------------------------

pub trait DesignerAgent {
    fn name(&self) -> String;

    /// Produce the next configuration from the current one plus feedback.
    /// `strips_png` is non-empty only when the variant requires images.
    fn propose(
        &mut self,
        cfg: &GameConfig,
        traces: &[EpisodeTrace],
        strips_png: &[Vec<u8>],
        variant: PromptVariant,
    ) -> Result<(GameConfig, Option<DesignerExchange>), DesignerError>;
}

/// Baseline that never changes anything.
pub struct IdentityDesigner;

impl DesignerAgent for IdentityDesigner {
    fn name(&self) -> String {
        "identity".to_string()
    }

    fn propose(
        &mut self,
        cfg: &GameConfig,
        _traces: &[EpisodeTrace],
        _strips_png: &[Vec<u8>],
        _variant: PromptVariant,
    ) -> Result<(GameConfig, Option<DesignerExchange>), DesignerError> {
        Ok((cfg.clone(), None))
    }
}

/// Offline controller that nudges pipe parameters toward a target score.
pub struct ScriptedDesigner {
    pub target_score: u32,
}

impl DesignerAgent for ScriptedDesigner {
    fn name(&self) -> String {
        format!("scripted(target={})", self.target_score)
    }

    fn propose(
        &mut self,
        cfg: &GameConfig,
        traces: &[EpisodeTrace],
        _strips_png: &[Vec<u8>],
        _variant: PromptVariant,
    ) -> Result<(GameConfig, Option<DesignerExchange>), DesignerError> {
        Ok((scripted_designer_propose(cfg, traces, self.target_score), None))
    }
}

/// Designer backed by an OpenAI-compatible endpoint.
pub struct LlmDesigner {
    pub transport: Box<dyn ChatTransport>,
    pub model: String,
    pub temperature: Option<f64>,
}

impl DesignerAgent for LlmDesigner {
    fn name(&self) -> String {
        format!("llm({})", self.model)
    }

    fn propose(
        &mut self,
        cfg: &GameConfig,
        traces: &[EpisodeTrace],
        strips_png: &[Vec<u8>],
        variant: PromptVariant,
    ) -> Result<(GameConfig, Option<DesignerExchange>), DesignerError> {
        let (eps, imgs): (&[EpisodeTrace], &[Vec<u8>]) = match variant {
            PromptVariant::ConfigOnly => (&[], &[]),
            PromptVariant::MetricsText => (traces, &[]),
            PromptVariant::ImagesOnly => (&[], strips_png),
            PromptVariant::MetricsAndImages => (traces, strips_png),
        };
        let (next, exchange) = llm_designer_propose(
            self.transport.as_mut(),
            &self.model,
            self.temperature,
            variant,
            cfg,
            eps,
            imgs,
        )?;
        Ok((next, Some(exchange)))
    }
}

/// Buildable description of a designer, suitable for parallel trials.
#[derive(Debug, Clone)]
pub enum DesignerSpec {
    Identity,
    Scripted {
        target_score: u32,
    },
    Llm {
        endpoint: String,
        model: String,
        temperature: Option<f64>,
        timeout: std::time::Duration,
    },
}

impl DesignerSpec {
    pub fn label(&self) -> String {
        match self {
            DesignerSpec::Identity => "identity".to_string(),
            DesignerSpec::Scripted { target_score } => format!("scripted(target={target_score})"),
            DesignerSpec::Llm { model, .. } => format!("llm({model})"),
        }
    }

    pub fn build(&self) -> Result<Box<dyn DesignerAgent>, RunnerError> {
        match self {
            DesignerSpec::Identity => Ok(Box::new(IdentityDesigner)),
            DesignerSpec::Scripted { target_score } => Ok(Box::new(ScriptedDesigner {
                target_score: *target_score,
            })),
            DesignerSpec::Llm {
                endpoint,
                model,
                temperature,
                timeout,
            } => {
                let transport = HttpChatTransport::from_env(endpoint, *timeout)?;
                Ok(Box::new(LlmDesigner {
                    transport: Box::new(transport),
                    model: model.clone(),
                    temperature: *temperature,
                }))
            }
        }
    }
}

/// Buildable description of a policy.
#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub external_cmd: Option<String>,
}

impl PolicySpec {
    pub fn build(&self) -> Result<Box<dyn Policy>, RunnerError> {
        Ok(build_policy(self.kind, self.external_cmd.as_deref())?)
    }
}

// ---------------------------------------------------------------------------
// Trial records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub config: GameConfig,
    pub traces: Vec<EpisodeTrace>,
    /// Designer call that produced this iteration's config (None for the
    /// starting config and for exchange-free designers).
    pub exchange: Option<DesignerExchange>,
    /// Set when the designer call that should have produced this config
    /// failed outright (e.g. transport error); the config carries over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub designer_error: Option<String>,
    /// Field changes relative to the previous iteration's config.
    pub diff: Vec<FieldChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: String,
    pub scenario: String,
    pub variant: PromptVariant,
    pub designer: String,
    pub policy: PolicyDescriptor,
    pub seed_base: u64,
    pub episodes_per_iter: u32,
    pub design_iterations: u32,
    pub image_scale: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub meta: TrialMeta,
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub trial_id: String,
    pub scenario_label: String,
    pub variant: PromptVariant,
    pub episodes_per_iter: u32,
    /// Number of designer changes; the trial plays this + 1 configurations.
    pub design_iterations: u32,
    pub seed_base: u64,
    /// Downscale factor applied to strips before PNG encoding.
    pub image_scale: u32,
}

pub fn episode_seed(seed_base: u64, iteration: u32, episodes_per_iter: u32, k: u32) -> u64 {
    seed_base.wrapping_add((iteration * episodes_per_iter + k) as u64)
}

pub fn reeval_seed(seed_base: u64, iteration: u32, episodes: u32, j: u32) -> u64 {
    seed_base
        .wrapping_add(REEVAL_SEED_OFFSET)
        .wrapping_add((iteration * episodes + j) as u64)
}

/// Seed base for one trial: a pure function of the experiment seed and the
/// trial identifier, so any artifact can be regenerated in isolation.
pub fn derive_seed_base(experiment_seed: u64, trial_id: &str) -> u64 {
    SplitMix64::new(experiment_seed ^ hash_str(trial_id)).next_u64()
}

/// Run one trial: play `episodes_per_iter` episodes per configuration, hand
/// the feedback to the designer, and repeat for `design_iterations` changes.
/// Designer failures are recorded, never fatal; the config carries over.
pub fn run_trial(
    start: &GameConfig,
    designer: &mut dyn DesignerAgent,
    policy: &mut dyn Policy,
    spec: &TrialSpec,
    persist_dir: Option<&Path>,
) -> Result<TrialRecord, RunnerError> {
    let report = validate_config(start);
    if !report.valid {
        return Err(SimError::InvalidConfig(report.to_string()).into());
    }
    let meta = TrialMeta {
        trial_id: spec.trial_id.clone(),
        scenario: spec.scenario_label.clone(),
        variant: spec.variant,
        designer: designer.name(),
        policy: policy.descriptor(),
        seed_base: spec.seed_base,
        episodes_per_iter: spec.episodes_per_iter,
        design_iterations: spec.design_iterations,
        image_scale: spec.image_scale,
    };
    if let Some(dir) = persist_dir {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("trial.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    }

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut cfg = start.clone();
    let mut prev_cfg: Option<GameConfig> = None;
    let mut pending_exchange: Option<DesignerExchange> = None;
    let mut pending_error: Option<String> = None;

    for index in 0..=spec.design_iterations {
        let seed = episode_seed(spec.seed_base, index, spec.episodes_per_iter, 0);
        let traces = run_batch(&cfg, policy, spec.episodes_per_iter, seed)?;
        let strips_png: Vec<Vec<u8>> = if spec.variant.needs_images() {
            traces
                .iter()
                .map(|t| {
                    encode_png(&downscale(&composite_strip(t, &cfg), spec.image_scale))
                        .map_err(|e| RunnerError::Corrupt(e.to_string()))
                })
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };

        let record = IterationRecord {
            index,
            config: cfg.clone(),
            diff: prev_cfg
                .as_ref()
                .map(|p| diff_configs(p, &cfg))
                .unwrap_or_default(),
            exchange: pending_exchange.take(),
            designer_error: pending_error.take(),
            traces,
        };
        if let Some(dir) = persist_dir {
            write_iteration(dir, &record, &strips_png)?;
        }

        if index < spec.design_iterations {
            prev_cfg = Some(cfg.clone());
            match designer.propose(&cfg, &record.traces, &strips_png, spec.variant) {
                Ok((next, exchange)) => {
                    cfg = next;
                    pending_exchange = exchange;
                }
                Err(err) => {
                    pending_error = Some(err.to_string());
                }
            }
        }
        iterations.push(record);
    }

    Ok(TrialRecord { meta, iterations })
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn iter_dir_name(index: u32) -> String {
    format!("iter_{index:02}")
}

fn write_iteration(
    trial_dir: &Path,
    record: &IterationRecord,
    strips_png: &[Vec<u8>],
) -> Result<(), RunnerError> {
    let final_dir = trial_dir.join(iter_dir_name(record.index));
    let tmp_dir = trial_dir.join(format!("{}.tmp", iter_dir_name(record.index)));
    if tmp_dir.exists() {
        fs::remove_dir_all(&tmp_dir)?;
    }
    fs::create_dir_all(&tmp_dir)?;

    fs::write(tmp_dir.join("config.yaml"), serialize_config(&record.config))?;
    let mut episodes = BufWriter::new(fs::File::create(tmp_dir.join("episodes.jsonl"))?);
    for trace in &record.traces {
        serde_json::to_writer(&mut episodes, trace)?;
        episodes.write_all(b"\n")?;
    }
    episodes.flush()?;
    fs::write(tmp_dir.join("diff.json"), serde_json::to_string_pretty(&record.diff)?)?;
    if let Some(exchange) = &record.exchange {
        fs::write(
            tmp_dir.join("exchange.json"),
            serde_json::to_string_pretty(exchange)?,
        )?;
    }
    if let Some(err) = &record.designer_error {
        fs::write(tmp_dir.join("designer_error.txt"), err)?;
    }
    for (k, png) in strips_png.iter().enumerate() {
        fs::write(tmp_dir.join(format!("strip_ep{k}.png")), png)?;
    }

    if final_dir.exists() {
        fs::remove_dir_all(&final_dir)?;
    }
    fs::rename(&tmp_dir, &final_dir)?;
    Ok(())
}

/// Sorted `iter_##` directories of a trial, ignoring stray temp dirs.
pub fn iteration_dirs(trial_dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(trial_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("iter_") && !n.ends_with(".tmp"))
                    .unwrap_or(false)
        })
        .collect();
    dirs.sort();
    Ok(dirs)
}

#[derive(Debug)]
pub struct LoadedTrial {
    pub meta: TrialMeta,
    pub configs: Vec<GameConfig>,
    pub iter_dirs: Vec<PathBuf>,
}

/// Load trial metadata and the per-iteration configs from disk.
pub fn load_trial(trial_dir: &Path) -> Result<LoadedTrial, RunnerError> {
    let meta_path = trial_dir.join("trial.json");
    let meta: TrialMeta = serde_json::from_str(&fs::read_to_string(&meta_path).map_err(|e| {
        RunnerError::Corrupt(format!("{}: {e}", meta_path.display()))
    })?)
    .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", meta_path.display())))?;
    let iter_dirs = iteration_dirs(trial_dir)?;
    if iter_dirs.is_empty() {
        return Err(RunnerError::Corrupt(format!(
            "{}: no iteration directories",
            trial_dir.display()
        )));
    }
    let mut configs = Vec::with_capacity(iter_dirs.len());
    for dir in &iter_dirs {
        let path = dir.join("config.yaml");
        let text = fs::read_to_string(&path)
            .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", path.display())))?;
        let cfg = parse_config(&text)
            .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", path.display())))?;
        configs.push(cfg);
    }
    Ok(LoadedTrial {
        meta,
        configs,
        iter_dirs,
    })
}

/// Rebuild the full [`TrialRecord`] (traces included) from a trial directory.
pub fn load_trial_record(trial_dir: &Path) -> Result<TrialRecord, RunnerError> {
    let loaded = load_trial(trial_dir)?;
    let mut iterations = Vec::new();
    for (index, dir) in loaded.iter_dirs.iter().enumerate() {
        let mut traces = Vec::new();
        let file = fs::File::open(dir.join("episodes.jsonl"))?;
        for line in BufReader::new(file).lines() {
            traces.push(serde_json::from_str::<EpisodeTrace>(&line?)?);
        }
        let diff: Vec<FieldChange> =
            serde_json::from_str(&fs::read_to_string(dir.join("diff.json"))?)?;
        let exchange_path = dir.join("exchange.json");
        let exchange = if exchange_path.exists() {
            Some(serde_json::from_str(&fs::read_to_string(exchange_path)?)?)
        } else {
            None
        };
        let error_path = dir.join("designer_error.txt");
        let designer_error = if error_path.exists() {
            Some(fs::read_to_string(error_path)?)
        } else {
            None
        };
        iterations.push(IterationRecord {
            index: index as u32,
            config: loaded.configs[index].clone(),
            traces,
            exchange,
            designer_error,
            diff,
        });
    }
    Ok(TrialRecord {
        meta: loaded.meta,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Re-evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReevalRecord {
    pub seed: u64,
    pub score: u32,
}

/// Fresh episodes per configuration with seeds disjoint from the trial's;
/// returns scores only.
pub fn reevaluate(
    configs: &[GameConfig],
    policy: &mut dyn Policy,
    episodes: u32,
    seed_base: u64,
) -> Result<Vec<Vec<u32>>, RunnerError> {
    let mut all = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let mut scores = Vec::with_capacity(episodes as usize);
        for j in 0..episodes {
            let seed = reeval_seed(seed_base, i as u32, episodes, j);
            scores.push(run_episode(cfg, policy, seed)?.score);
        }
        all.push(scores);
    }
    Ok(all)
}

/// Re-evaluate a persisted trial and write `reeval.jsonl` into each
/// iteration directory.
pub fn reevaluate_trial_dir(
    trial_dir: &Path,
    policy: &mut dyn Policy,
    episodes: u32,
) -> Result<Vec<Vec<u32>>, RunnerError> {
    let loaded = load_trial(trial_dir)?;
    let per_iter = reevaluate(&loaded.configs, policy, episodes, loaded.meta.seed_base)?;
    for (i, (dir, scores)) in loaded.iter_dirs.iter().zip(&per_iter).enumerate() {
        let mut out = Vec::new();
        for (j, &score) in scores.iter().enumerate() {
            let rec = ReevalRecord {
                seed: reeval_seed(loaded.meta.seed_base, i as u32, episodes, j as u32),
                score,
            };
            out.extend_from_slice(serde_json::to_string(&rec)?.as_bytes());
            out.push(b'\n');
        }
        write_atomic(&dir.join("reeval.jsonl"), &out)?;
    }
    Ok(per_iter)
}

/// Pool re-evaluation scores per iteration index across every trial of one
/// `(variant, scenario)` cell.
pub fn collect_cell_reeval_scores(
    exp_root: &Path,
    variant: &str,
    scenario: &str,
) -> Result<Vec<Vec<u32>>, RunnerError> {
    let cell_dir = exp_root.join(variant).join(scenario);
    let mut trial_dirs: Vec<PathBuf> = fs::read_dir(&cell_dir)
        .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", cell_dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("trial_"))
                    .unwrap_or(false)
        })
        .collect();
    trial_dirs.sort();
    if trial_dirs.is_empty() {
        return Err(RunnerError::Corrupt(format!(
            "{}: no trials",
            cell_dir.display()
        )));
    }

    let mut pooled: Vec<Vec<u32>> = Vec::new();
    for trial_dir in &trial_dirs {
        for (i, iter_dir) in iteration_dirs(trial_dir)?.iter().enumerate() {
            let path = iter_dir.join("reeval.jsonl");
            let text = fs::read_to_string(&path)
                .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", path.display())))?;
            if pooled.len() <= i {
                pooled.push(Vec::new());
            }
            for line in text.lines() {
                let rec: ReevalRecord = serde_json::from_str(line)
                    .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", path.display())))?;
                pooled[i].push(rec.score);
            }
        }
    }
    Ok(pooled)
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pending,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub id: String,
    pub path: String,
    pub variant: String,
    pub scenario: String,
    pub seed_base: u64,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub designer: String,
    pub policy: String,
    pub trials_per_cell: u32,
    pub episodes_per_iter: u32,
    pub design_iterations: u32,
    pub trials: Vec<ManifestTrial>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub variants: Vec<PromptVariant>,
    pub scenarios: Vec<Scenario>,
    pub trials_per_cell: u32,
    pub episodes_per_iter: u32,
    pub design_iterations: u32,
    pub seed: u64,
    pub image_scale: u32,
    pub designer: DesignerSpec,
    pub policy: PolicySpec,
    pub jobs: usize,
    pub verbose: bool,
}

fn manifest_path(root: &Path) -> PathBuf {
    root.join("manifest.json")
}

fn save_manifest(root: &Path, manifest: &Manifest) -> Result<(), RunnerError> {
    write_atomic(
        &manifest_path(root),
        serde_json::to_string_pretty(manifest)?.as_bytes(),
    )?;
    Ok(())
}

/// Run (or resume) a full factorial sweep under `root`. Completed trials
/// listed in the manifest are skipped; anything else is re-run from scratch.
pub fn run_experiment(root: &Path, spec: &ExperimentSpec) -> Result<Manifest, RunnerError> {
    fs::create_dir_all(root)?;

    let mut planned = Vec::new();
    for variant in &spec.variants {
        for scenario in &spec.scenarios {
            for t in 0..spec.trials_per_cell {
                let id = format!("{}/{}/trial_{t:03}", variant.name(), scenario.name());
                planned.push(ManifestTrial {
                    path: id.clone(),
                    variant: variant.name().to_string(),
                    scenario: scenario.name().to_string(),
                    seed_base: derive_seed_base(spec.seed, &id),
                    status: TrialStatus::Pending,
                    error: None,
                    id,
                });
            }
        }
    }

    let mut manifest = Manifest {
        seed: spec.seed,
        designer: spec.designer.label(),
        policy: format!("{:?}", spec.policy.kind),
        trials_per_cell: spec.trials_per_cell,
        episodes_per_iter: spec.episodes_per_iter,
        design_iterations: spec.design_iterations,
        trials: planned,
    };

    // Resume: adopt completed statuses from an existing manifest when the
    // run parameters line up.
    let existing_path = manifest_path(root);
    if existing_path.exists() {
        let existing: Manifest = serde_json::from_str(&fs::read_to_string(&existing_path)?)
            .map_err(|e| RunnerError::Corrupt(format!("{}: {e}", existing_path.display())))?;
        if existing.seed != manifest.seed
            || existing.episodes_per_iter != manifest.episodes_per_iter
            || existing.design_iterations != manifest.design_iterations
        {
            return Err(RunnerError::Corrupt(format!(
                "{}: existing manifest was produced with different run parameters",
                existing_path.display()
            )));
        }
        for trial in manifest.trials.iter_mut() {
            if let Some(prev) = existing.trials.iter().find(|t| t.id == trial.id) {
                if prev.status == TrialStatus::Completed && root.join(&trial.path).is_dir() {
                    trial.status = TrialStatus::Completed;
                }
            }
        }
    }
    save_manifest(root, &manifest)?;

    let pending: Vec<usize> = manifest
        .trials
        .iter()
        .enumerate()
        .filter(|(_, t)| t.status != TrialStatus::Completed)
        .map(|(i, _)| i)
        .collect();

    let manifest = Mutex::new(manifest);
    let next = AtomicUsize::new(0);
    let workers = spec.jobs.max(1).min(pending.len().max(1));

    std::thread::scope(|scope| -> Result<(), RunnerError> {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<(), RunnerError> {
                loop {
                    let slot = next.fetch_add(1, Ordering::SeqCst);
                    if slot >= pending.len() {
                        return Ok(());
                    }
                    let idx = pending[slot];
                    let (id, path, scenario, seed_base, variant) = {
                        let m = manifest.lock().unwrap();
                        let t = &m.trials[idx];
                        (
                            t.id.clone(),
                            t.path.clone(),
                            t.scenario.clone(),
                            t.seed_base,
                            t.variant.clone(),
                        )
                    };
                    let trial_dir = root.join(&path);
                    if trial_dir.exists() {
                        fs::remove_dir_all(&trial_dir)?;
                    }
                    let scenario: Scenario = scenario.parse().map_err(RunnerError::Corrupt)?;
                    let variant: PromptVariant = variant.parse().map_err(RunnerError::Corrupt)?;
                    let outcome = run_one(spec, &id, scenario, variant, seed_base, &trial_dir);
                    let mut m = manifest.lock().unwrap();
                    match outcome {
                        Ok(()) => m.trials[idx].status = TrialStatus::Completed,
                        Err(e) => {
                            m.trials[idx].status = TrialStatus::Failed;
                            m.trials[idx].error = Some(e.to_string());
                        }
                    }
                    save_manifest(root, &m)?;
                    if spec.verbose {
                        eprintln!("trial {id}: {:?}", m.trials[idx].status);
                    }
                }
            }));
        }
        for handle in handles {
            handle.join().expect("worker panicked")?;
        }
        Ok(())
    })?;

    Ok(manifest.into_inner().unwrap())
}

fn run_one(
    spec: &ExperimentSpec,
    trial_id: &str,
    scenario: Scenario,
    variant: PromptVariant,
    seed_base: u64,
    trial_dir: &Path,
) -> Result<(), RunnerError> {
    let mut designer = spec.designer.build()?;
    let mut policy = spec.policy.build()?;
    let start = broken_config(scenario);
    let trial_spec = TrialSpec {
        trial_id: trial_id.to_string(),
        scenario_label: scenario.name().to_string(),
        variant,
        episodes_per_iter: spec.episodes_per_iter,
        design_iterations: spec.design_iterations,
        seed_base,
        image_scale: spec.image_scale,
    };
    run_trial(
        &start,
        designer.as_mut(),
        policy.as_mut(),
        &trial_spec,
        Some(trial_dir),
    )?;
    Ok(())
}
