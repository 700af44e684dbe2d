//! Seeded prophet, secretary and lemma-suite experiments with CSV trial logs
//! and JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use prophetlab_core::gaps::LemmaVerdict;
use prophetlab_core::prophet::{offline_opt, ProphetInstance, ProphetPlan, ProphetTally};
use prophetlab_core::secretary::{SampleGreedy, SecretaryInstance, SecretaryOptions, UnitValueSecretary};
use prophetlab_core::stats::{proportion, Accumulator, Estimate, Z95};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::generate::{generate_instance, GeneratedInstance, GeneratorSpec};
use crate::seeds::{config_hash, thread_pool, trial_seed};
use crate::suite::{run_lemma_suite, Lemma};

pub const CSV_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const WITNESS_FILE: &str = "witness.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prophet,
    Secretary,
    Gaps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    File(PathBuf),
    Generator { spec: GeneratorSpec, seed: u64 },
}

/// Arrival order of days (prophet) or items (secretary).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    #[default]
    Identity,
    Reverse,
    /// A fresh uniformly random order per trial.
    Random,
    /// A fixed caller-chosen order.
    List(Vec<usize>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    SampleGreedy,
}

impl Baseline {
    fn secretary(self) -> &'static dyn UnitValueSecretary {
        match self {
            Baseline::SampleGreedy => &SampleGreedy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub instance: Option<InstanceSource>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub order: OrderPolicy,
    #[serde(default)]
    pub alpha_override: Option<f64>,
    #[serde(default)]
    pub baseline: Baseline,
    /// Gaps mode: a single lemma, or all of them.
    #[serde(default)]
    pub lemma: Option<Lemma>,
    /// Gaps mode: largest ground set.
    #[serde(default)]
    pub n: Option<usize>,
    /// Not part of the config hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            mode,
            instance: None,
            trials,
            seed,
            order: OrderPolicy::default(),
            alpha_override: None,
            baseline: Baseline::default(),
            lemma: None,
            n: None,
            output_dir: None,
        }
    }

    pub fn with_generator(mut self, spec: &str, seed: u64) -> Result<Self> {
        self.instance = Some(InstanceSource::Generator {
            spec: spec.parse()?,
            seed,
        });
        Ok(self)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub config_hash: String,
    pub trials: u64,
    pub seed: u64,
    pub value: Option<Estimate>,
    pub opt_value: Option<Estimate>,
    /// `mean(opt_value) / mean(value)` over the CSV rows.
    pub ratio: Option<f64>,
    /// Delta-method standard error of `ratio`.
    pub ratio_std_error: Option<f64>,
    /// Exact expected offline optimum when enumerable.
    pub exact_opt: Option<f64>,
    pub passed: bool,
    pub details: serde_json::Value,
}

impl RunSummary {
    /// `ratio ≥ 1 − 3·CI`: online never beats offline in expectation.
    pub fn ratio_consistent(&self) -> bool {
        match (self.ratio, self.ratio_std_error) {
            (Some(r), Some(se)) => r >= 1.0 - 3.0 * Z95 * se,
            _ => true,
        }
    }
}

/// Everything an experiment writes, kept in memory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub summary: RunSummary,
    pub csv: String,
    pub summary_json: String,
    pub verdicts_json: Option<String>,
    pub witness_json: Option<String>,
}

#[derive(Serialize)]
struct ProphetRow {
    seed: u64,
    order_id: u64,
    value: f64,
    opt_value: f64,
    #[serde(rename = "|W|")]
    w: usize,
    config_hash: String,
}

#[derive(Serialize)]
struct SecretaryRow {
    seed: u64,
    order_id: u64,
    value: f64,
    opt_value: f64,
    #[serde(rename = "|W|")]
    w: usize,
    alpha: Option<f64>,
    m: f64,
    certified: bool,
    classic_hit: bool,
    config_hash: String,
}

#[derive(Serialize)]
struct GapsRow {
    lemma: String,
    instances: u64,
    worst_slack: f64,
    passed: bool,
    config_hash: String,
}

fn load_instance(source: &InstanceSource) -> Result<GeneratedInstance> {
    match source {
        InstanceSource::Generator { spec, seed } => generate_instance(spec, *seed),
        InstanceSource::File(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let parsed = if value.get("days").is_some() {
                serde_json::from_value(value).map(GeneratedInstance::Prophet)
            } else if value.get("maximal_sets").is_some() {
                serde_json::from_value(value).map(GeneratedInstance::Secretary)
            } else {
                serde_json::from_value(value).map(GeneratedInstance::SetFunction)
            };
            parsed.with_context(|| format!("invalid instance in {}", path.display()))
        }
    }
}

fn order_for(policy: &OrderPolicy, len: usize, index: u64, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, u64)> {
    Ok(match policy {
        OrderPolicy::Identity => ((0..len).collect(), 0),
        OrderPolicy::Reverse => ((0..len).rev().collect(), 0),
        OrderPolicy::Random => {
            let mut order: Vec<usize> = (0..len).collect();
            order.shuffle(rng);
            (order, index)
        }
        OrderPolicy::List(list) => {
            ensure!(
                list.len() == len,
                "order list has {} entries, expected {len}",
                list.len()
            );
            (list.clone(), 0)
        }
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0u64), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Ratio of means and its delta-method standard error.
fn ratio_of_means(opt: &[f64], value: &[f64]) -> (Option<f64>, Option<f64>) {
    let (Some(mo), Some(mv)) = (mean(opt.iter().copied()), mean(value.iter().copied())) else {
        return (None, None);
    };
    if mv == 0.0 {
        return (None, None);
    }
    let ratio = mo / mv;
    let n = opt.len() as f64;
    if opt.len() < 2 {
        return (Some(ratio), None);
    }
    let (mut vo, mut vv, mut cov) = (0.0, 0.0, 0.0);
    for (o, v) in opt.iter().zip(value) {
        vo += (o - mo) * (o - mo);
        vv += (v - mv) * (v - mv);
        cov += (o - mo) * (v - mv);
    }
    let denom = n - 1.0;
    let (vo, vv, cov) = (vo / denom, vv / denom, cov / denom);
    let rel = vv / (mv * mv) - 2.0 * cov / (mo * mv) + if mo != 0.0 { vo / (mo * mo) } else { 0.0 };
    (Some(ratio), Some(ratio * (rel.max(0.0) / n).sqrt()))
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    if rows.is_empty() {
        writer.write_record(header)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    Ok(String::from_utf8(writer.into_inner().context("flushing CSV")?)?)
}

fn hash_of(config: &ExperimentConfig, instance: Option<&GeneratedInstance>) -> Result<String> {
    let mut hashed = config.clone();
    hashed.output_dir = None;
    config_hash(&(hashed, instance))
}

/// Runs `config` in memory.
pub fn execute(config: &ExperimentConfig) -> Result<Artifacts> {
    match config.mode {
        Mode::Prophet | Mode::Secretary => {
            let source = config
                .instance
                .as_ref()
                .context("prophet and secretary modes need an instance")?;
            let instance = load_instance(source)?;
            let hash = hash_of(config, Some(&instance))?;
            match (config.mode, instance) {
                (Mode::Prophet, GeneratedInstance::Prophet(inst)) => prophet(config, inst, hash),
                (Mode::Secretary, GeneratedInstance::Secretary(inst)) => secretary(config, inst, hash),
                (mode, _) => bail!("instance does not match mode {mode:?}"),
            }
        }
        Mode::Gaps => gaps(config, hash_of(config, None)?),
    }
}

/// Runs `config` and writes its artifacts when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let artifacts = execute(config)?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(&artifacts, dir)?;
    }
    Ok(artifacts.summary)
}

pub fn write_artifacts(artifacts: &Artifacts, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, content: &str| {
        let path = dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
    };
    write(CSV_FILE, &artifacts.csv)?;
    write(SUMMARY_FILE, &artifacts.summary_json)?;
    if let Some(v) = &artifacts.verdicts_json {
        write(VERDICTS_FILE, v)?;
    }
    if let Some(w) = &artifacts.witness_json {
        write(WITNESS_FILE, w)?;
    }
    Ok(())
}

fn finish(
    summary: RunSummary,
    csv: String,
    verdicts_json: Option<String>,
    witness_json: Option<String>,
) -> Result<Artifacts> {
    let summary_json = serde_json::to_string_pretty(&summary)? + "\n";
    Ok(Artifacts {
        summary,
        csv,
        summary_json,
        verdicts_json,
        witness_json,
    })
}

fn prophet(config: &ExperimentConfig, instance: ProphetInstance, hash: String) -> Result<Artifacts> {
    let plan = ProphetPlan::new(instance)?;
    let days = plan.instance().days();
    let runs = thread_pool()?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let seed = trial_seed(config.seed, i);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (order, order_id) = order_for(&config.order, days, i, &mut rng)?;
                let run = plan.run(&order, rng.gen())?;
                Ok((seed, order_id, run))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut tally = ProphetTally::new(plan.instance().items());
    for (_, _, run) in &runs {
        tally.record(run, plan.instance().matroid());
    }
    let rows: Vec<ProphetRow> = runs
        .iter()
        .map(|(seed, order_id, run)| ProphetRow {
            seed: *seed,
            order_id: *order_id,
            value: run.value,
            opt_value: run.opt_value,
            w: run.w.len(),
            config_hash: hash.clone(),
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let opts: Vec<f64> = rows.iter().map(|r| r.opt_value).collect();
    let (ratio, ratio_std_error) = ratio_of_means(&opts, &values);
    let stats = tally.summary();
    let f_y = plan.multilinear_at_y()?;
    let has_runs = stats.runs > 0;
    let subset_bound = has_runs && stats.value.mean >= 0.5 * stats.ocrs_value.mean - 3.0 * stats.value.ci95();
    let chain_bound = has_runs && stats.value.mean >= f_y / 32.0 - 3.0 * stats.value.ci95();
    let min_keep_rate = stats
        .keep_rates
        .iter()
        .filter(|r| !r.mean.is_nan())
        .map(|r| r.mean)
        .fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.min(b))));
    let summary = RunSummary {
        mode: Mode::Prophet,
        config_hash: hash,
        trials: config.trials,
        seed: config.seed,
        value: has_runs.then_some(stats.value),
        opt_value: has_runs.then_some(stats.opt_value),
        ratio,
        ratio_std_error,
        exact_opt: offline_opt(plan.instance()).ok(),
        passed: stats.dependent_selections == 0,
        details: json!({
            "scale": plan.scale(),
            "F_at_y": f_y,
            "ocrs_value": has_runs.then_some(stats.ocrs_value),
            "subset_bound_holds": subset_bound,
            "chain_bound_holds": chain_bound,
            "min_keep_rate": min_keep_rate,
            "dependent_selections": stats.dependent_selections,
        }),
    };
    let header = ["seed", "order_id", "value", "opt_value", "|W|", "config_hash"];
    finish(summary, to_csv(&rows, &header)?, None, None)
}

fn secretary(config: &ExperimentConfig, instance: SecretaryInstance, hash: String) -> Result<Artifacts> {
    let (t_star, opt) = instance.offline_opt()?;
    let options = SecretaryOptions {
        alpha_override: config.alpha_override,
    };
    let black_box = config.baseline.secretary();
    let n = instance.n();
    let runs = thread_pool()?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let seed = trial_seed(config.seed, i);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (order, order_id) = order_for(&config.order, n, i, &mut rng)?;
                let run = instance.run(&order, rng.gen(), options, black_box)?;
                Ok((seed, order_id, run))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<SecretaryRow> = runs
        .iter()
        .map(|(seed, order_id, run)| SecretaryRow {
            seed: *seed,
            order_id: *order_id,
            value: run.value,
            opt_value: opt,
            w: run.w.len(),
            alpha: run.alpha,
            m: run.m,
            certified: run.certified,
            classic_hit: run.classic_hit,
            config_hash: hash.clone(),
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let opts: Vec<f64> = rows.iter().map(|r| r.opt_value).collect();
    let (ratio, ratio_std_error) = ratio_of_means(&opts, &values);
    let value_acc: Accumulator = values.iter().copied().collect();
    let opt_acc: Accumulator = opts.iter().copied().collect();
    let uncertified = rows.iter().filter(|r| !r.certified).count() as u64;
    let hits = rows.iter().filter(|r| r.classic_hit).count() as u64;
    let has_runs = !rows.is_empty();
    let summary = RunSummary {
        mode: Mode::Secretary,
        config_hash: hash,
        trials: config.trials,
        seed: config.seed,
        value: has_runs.then(|| value_acc.estimate()),
        opt_value: has_runs.then(|| opt_acc.estimate()),
        ratio,
        ratio_std_error,
        exact_opt: Some(opt),
        passed: uncertified == 0,
        details: json!({
            "r": instance.r(),
            "optimal_set": t_star,
            "uncertified_runs": uncertified,
            "classic_hit_rate": has_runs.then(|| proportion(hits, config.trials)),
            "baseline": black_box.name(),
        }),
    };
    let header = [
        "seed",
        "order_id",
        "value",
        "opt_value",
        "|W|",
        "alpha",
        "m",
        "certified",
        "classic_hit",
        "config_hash",
    ];
    finish(summary, to_csv(&rows, &header)?, None, None)
}

/// Default ground-set size for lemma suites.
pub const DEFAULT_GAPS_N: usize = 6;

fn gaps(config: &ExperimentConfig, hash: String) -> Result<Artifacts> {
    let n = config.n.unwrap_or(DEFAULT_GAPS_N);
    let lemmas: Vec<Lemma> = config.lemma.map_or(Lemma::ALL.to_vec(), |l| vec![l]);
    let verdicts: Vec<LemmaVerdict> = lemmas
        .iter()
        .enumerate()
        .map(|(k, &lemma)| run_lemma_suite(lemma, n, config.trials, trial_seed(config.seed, k as u64)))
        .collect::<Result<_>>()?;
    let rows: Vec<GapsRow> = verdicts
        .iter()
        .map(|v| GapsRow {
            lemma: v.lemma.clone(),
            instances: v.instances,
            worst_slack: v.worst_slack,
            passed: v.passed,
            config_hash: hash.clone(),
        })
        .collect();
    let passed = verdicts.iter().all(|v| v.passed);
    let witnesses: Vec<_> = verdicts
        .iter()
        .filter_map(|v| v.witness.as_ref().map(|w| json!({"lemma": v.lemma, "witness": w})))
        .collect();
    let summary = RunSummary {
        mode: Mode::Gaps,
        config_hash: hash,
        trials: config.trials,
        seed: config.seed,
        value: None,
        opt_value: None,
        ratio: None,
        ratio_std_error: None,
        exact_opt: None,
        passed,
        details: json!({
            "n": n,
            "lemmas": verdicts.iter().map(|v| json!({"lemma": v.lemma, "instances": v.instances, "passed": v.passed})).collect::<Vec<_>>(),
        }),
    };
    let verdicts_json = serde_json::to_string_pretty(&verdicts)? + "\n";
    let witness_json = (!witnesses.is_empty())
        .then(|| serde_json::to_string_pretty(&witnesses).map(|s| s + "\n"))
        .transpose()?;
    let header = ["lemma", "instances", "worst_slack", "passed", "config_hash"];
    finish(summary, to_csv(&rows, &header)?, Some(verdicts_json), witness_json)
}
