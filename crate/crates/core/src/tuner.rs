//! Hyperparameter tuning: sample an instance, run it until its evaluation
//! budget is spent, report GERT after every run and prune trials that fall
//! behind the median of finished trials.
//!
//! Run `i` of every trial uses the same initial guess and run seed, so
//! trials differ only in their hyperparameters.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Harness, RunResult};
use crate::measures::gert;
use crate::optima::ScoreSchedule;
use crate::optimizers::{HyperparameterSpace, LocalTolerances, OptimizerInstance, ParamKind, ParamSpec, ParamValue, ParamValues};
use crate::rng::{derive, stream, Rng};
use crate::util::{fmt_measure, parse_measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Running,
    Pruned,
    Complete,
}

impl TrialStatus {
    fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Running => "running",
            TrialStatus::Pruned => "pruned",
            TrialStatus::Complete => "complete",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "running" => Some(TrialStatus::Running),
            "pruned" => Some(TrialStatus::Pruned),
            "complete" => Some(TrialStatus::Complete),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub number: usize,
    pub instance: OptimizerInstance,
    pub results: Vec<RunResult>,
    /// `(runs so far, GERT over those runs)` after every run.
    pub reported_gerts: Vec<(usize, f64)>,
    pub status: TrialStatus,
    /// Set for complete trials only; may be infinite.
    pub final_gert: Option<f64>,
}

impl Trial {
    fn new(number: usize, instance: OptimizerInstance) -> Self {
        Self {
            number,
            instance,
            results: Vec::new(),
            reported_gerts: Vec::new(),
            status: TrialStatus::Running,
            final_gert: None,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.results.iter().map(|r| r.t).sum()
    }

    pub fn current_gert(&self) -> Option<f64> {
        self.reported_gerts.last().map(|&(_, g)| g)
    }

    fn gert_at(&self, runs: usize) -> Option<f64> {
        self.reported_gerts.get(runs.checked_sub(1)?).map(|&(_, g)| g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Independent uniform draws (log-uniform for log parameters).
    #[default]
    Random,
    /// After a few finished trials, perturbs one of the best trials.
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyParams {
    /// Number of trials `M`.
    pub trials: usize,
    /// Evaluations per trial, over all of its runs.
    pub instance_budget: usize,
    /// Reports needed before a trial may be pruned.
    pub min_runs: usize,
    /// Finished trials needed before any trial may be pruned.
    pub startup_trials: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            trials: 100,
            instance_budget: 1_000_000,
            min_runs: 5,
            startup_trials: 5,
            seed: 0,
            sampler: SamplerKind::Random,
        }
    }
}

impl StudyParams {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.instance_budget == 0 {
            return Err(Error::config("instance_budget", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub params: StudyParams,
    pub trials: Vec<Trial>,
}

impl Study {
    /// Complete trial with the smallest finite GERT; ties go to the earlier trial.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Complete)
            .filter(|t| t.final_gert.is_some_and(f64::is_finite))
            .min_by(|a, b| a.final_gert.unwrap().total_cmp(&b.final_gert.unwrap()))
    }
}

// Quantile sampler settings.
const STARTUP_TRIALS: usize = 10;
const GOOD_FRACTION: f64 = 0.25;
const MIN_BANDWIDTH: f64 = 0.05;
const KEEP_FLAG: f64 = 0.8;

fn lower_of(spec: &ParamSpec, values: &ParamValues) -> Option<f64> {
    spec.lower_from.and_then(|n| values.get(n)).and_then(|v| v.as_f64())
}

/// Position of `value` in `[0, 1]` along the sampling scale of `spec`.
fn to_unit(spec: &ParamSpec, value: ParamValue, lower: Option<f64>) -> Option<f64> {
    let x = value.as_f64()?;
    let u = match spec.kind {
        ParamKind::Log { lo, hi } => {
            let lo = lower.unwrap_or(lo).max(lo);
            if hi > lo { (x.ln() - lo.ln()) / (hi.ln() - lo.ln()) } else { 0.0 }
        }
        ParamKind::Linear { lo, hi } => {
            let lo = lower.unwrap_or(lo).max(lo);
            if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }
        }
        ParamKind::Int { lo, hi } => {
            if hi > lo { (x - lo as f64) / (hi - lo) as f64 } else { 0.0 }
        }
        ParamKind::Bool => return None,
    };
    Some(u.clamp(0.0, 1.0))
}

fn from_unit(spec: &ParamSpec, u: f64, lower: Option<f64>) -> ParamValue {
    let u = u.clamp(0.0, 1.0);
    match spec.kind {
        ParamKind::Log { lo, hi } => {
            let lo = lower.unwrap_or(lo).max(lo);
            ParamValue::Real((lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi))
        }
        ParamKind::Linear { lo, hi } => {
            let lo = lower.unwrap_or(lo).max(lo);
            ParamValue::Real((lo + u * (hi - lo)).clamp(lo, hi))
        }
        ParamKind::Int { lo, hi } => {
            ParamValue::Int((lo as f64 + u * (hi - lo) as f64).round().clamp(lo as f64, hi as f64) as i64)
        }
        ParamKind::Bool => ParamValue::Bool(u >= 0.5),
    }
}

fn sample_random(spec: &ParamSpec, lower: Option<f64>, rng: &mut Rng) -> ParamValue {
    match spec.kind {
        ParamKind::Int { lo, hi } => ParamValue::Int(rng.random_range(lo..=hi)),
        ParamKind::Bool => ParamValue::Bool(rng.random_bool(0.5)),
        _ => from_unit(spec, rng.random::<f64>(), lower),
    }
}

/// A new instance for `space` with base seed 0. Deterministic in `seed`
/// and `history`.
pub fn sample(space: &HyperparameterSpace, history: &[Trial], seed: u64, kind: SamplerKind) -> Result<OptimizerInstance> {
    if space.entries.is_empty() {
        return Err(Error::Precondition(format!("{} has no hyperparameters to tune", space.algorithm)));
    }
    let mut rng = stream(seed);
    let good = match kind {
        SamplerKind::Random => Vec::new(),
        SamplerKind::Quantile => good_trials(history),
    };
    let mut values = ParamValues::new();
    if good.is_empty() {
        for spec in &space.entries {
            let lower = lower_of(spec, &values);
            values.insert(spec.name.to_string(), sample_random(spec, lower, &mut rng));
        }
    } else {
        let anchor = good[rng.random_range(0..good.len())];
        for spec in &space.entries {
            let lower = lower_of(spec, &values);
            let v = perturb(spec, anchor, &good, lower, &mut rng);
            values.insert(spec.name.to_string(), v);
        }
    }
    OptimizerInstance::new(space, &values, 0)
}

fn good_trials(history: &[Trial]) -> Vec<&Trial> {
    let mut done: Vec<&Trial> = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete && t.final_gert.is_some())
        .collect();
    if done.len() < STARTUP_TRIALS {
        return Vec::new();
    }
    done.sort_by(|a, b| a.final_gert.unwrap().total_cmp(&b.final_gert.unwrap()).then(a.number.cmp(&b.number)));
    let keep = ((done.len() as f64 * GOOD_FRACTION).ceil() as usize).max(1);
    done.truncate(keep);
    done
}

fn perturb(spec: &ParamSpec, anchor: &Trial, good: &[&Trial], lower: Option<f64>, rng: &mut Rng) -> ParamValue {
    let Some(&value) = anchor.instance.params.get(spec.name) else {
        return sample_random(spec, lower, rng);
    };
    if let ParamKind::Bool = spec.kind {
        return if rng.random_bool(KEEP_FLAG) { value } else { sample_random(spec, lower, rng) };
    }
    let units: Vec<f64> = good
        .iter()
        .filter_map(|t| {
            let v = *t.instance.params.get(spec.name)?;
            to_unit(spec, v, lower_of(spec, &t.instance.params))
        })
        .collect();
    let mean = units.iter().sum::<f64>() / units.len().max(1) as f64;
    let var = units.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / units.len().max(1) as f64;
    let bandwidth = var.sqrt().max(MIN_BANDWIDTH);
    let centre = to_unit(spec, value, lower).unwrap_or(0.5);
    let noise = Normal::new(0.0, bandwidth).expect("positive bandwidth").sample(rng);
    from_unit(spec, centre + noise, lower)
}

/// Median rule. Trials with fewer than `min_runs` reports, and trials with
/// no finished peer at the same run count, are kept.
pub fn should_prune(trial: &Trial, history: &[Trial], min_runs: usize) -> bool {
    let runs = trial.reported_gerts.len();
    if runs < min_runs.max(1) {
        return false;
    }
    let Some(current) = trial.current_gert() else {
        return false;
    };
    let mut peers: Vec<f64> = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete && t.number != trial.number)
        .filter_map(|t| t.gert_at(runs))
        .collect();
    if peers.is_empty() {
        return false;
    }
    peers.sort_by(f64::total_cmp);
    let m = peers.len();
    // Equal middle values also cover two infinities, whose mean is NaN.
    let median = if m % 2 == 1 || peers[m / 2 - 1] == peers[m / 2] {
        peers[m / 2]
    } else {
        0.5 * (peers[m / 2 - 1] + peers[m / 2])
    };
    current > median
}

/// Executes runs of a trial.
pub trait TrialRunner: Sync {
    fn t_max(&self) -> usize;

    /// Run `run_index` of `instance`.
    fn run(&self, instance: &OptimizerInstance, run_index: u64) -> Result<RunResult>;

    /// Several runs in index order. Must give the same results as calling
    /// [`TrialRunner::run`] on each index.
    fn run_batch(&self, instance: &OptimizerInstance, indices: std::ops::Range<u64>) -> Result<Vec<RunResult>> {
        indices.map(|i| self.run(instance, i)).collect()
    }
}

/// Runs instances on a landscape through a [`Harness`]; the harness base
/// seed is shared by every trial.
pub struct HarnessRunner<'a> {
    pub harness: Harness<'a>,
    pub tolerances: LocalTolerances,
    pub jobs: usize,
}

impl<'a> HarnessRunner<'a> {
    pub fn new(harness: Harness<'a>, jobs: usize) -> Result<Self> {
        let tolerances = harness.config.tolerances()?;
        Ok(Self {
            harness,
            tolerances,
            jobs: jobs.max(1),
        })
    }
}

impl TrialRunner for HarnessRunner<'_> {
    fn t_max(&self) -> usize {
        self.harness.config.t_max
    }

    fn run(&self, instance: &OptimizerInstance, run_index: u64) -> Result<RunResult> {
        let opt = instance.build(self.tolerances)?;
        Ok(self.harness.run(opt.as_ref(), run_index)?.result)
    }

    fn run_batch(&self, instance: &OptimizerInstance, indices: std::ops::Range<u64>) -> Result<Vec<RunResult>> {
        let opt = instance.build(self.tolerances)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| {
            indices
                .into_par_iter()
                .map(|i| Ok(self.harness.run(opt.as_ref(), i)?.result))
                .collect()
        })
    }
}

/// Runs the study. Trials already in `resume` are kept and the study
/// continues with the next trial number; `on_trial` sees the study after
/// every finished trial. `batch` runs are requested at a time; runs past the
/// point where a trial stops are discarded, so the outcome does not depend
/// on `batch`.
pub fn tune(
    space: &HyperparameterSpace,
    params: &StudyParams,
    runner: &dyn TrialRunner,
    schedule: &ScoreSchedule,
    resume: Vec<Trial>,
    batch: usize,
    on_trial: &mut dyn FnMut(&Study) -> Result<()>,
) -> Result<Study> {
    params.validate()?;
    let mut study = Study {
        params: *params,
        trials: resume,
    };
    if study.trials.iter().any(|t| t.status == TrialStatus::Running) {
        return Err(Error::Precondition("cannot resume from an unfinished trial".into()));
    }
    let batch = batch.max(1) as u64;
    for number in study.trials.len()..params.trials {
        let mut instance = sample(space, &study.trials, derive(params.seed, number as u64), params.sampler)?;
        instance.seed = params.seed;
        let mut trial = Trial::new(number, instance);
        let may_prune = study.trials.iter().filter(|t| t.status == TrialStatus::Complete).count() >= params.startup_trials;
        let mut spent = 0usize;
        let mut next = 0u64;
        'runs: while spent < params.instance_budget {
            for r in runner.run_batch(&trial.instance, next..next + batch)? {
                spent += r.t;
                trial.results.push(r);
                let g = gert(&trial.results, schedule);
                trial.reported_gerts.push((trial.results.len(), g));
                if may_prune && should_prune(&trial, &study.trials, params.min_runs) {
                    trial.status = TrialStatus::Pruned;
                    break 'runs;
                }
                if spent >= params.instance_budget {
                    break 'runs;
                }
            }
            next += batch;
        }
        if trial.status == TrialStatus::Running {
            trial.status = TrialStatus::Complete;
            trial.final_gert = trial.current_gert();
        }
        study.trials.push(trial);
        on_trial(&study)?;
    }
    Ok(study)
}

/// Study log: one line per run of every trial.
pub struct StudyLog;

impl StudyLog {
    fn header(space: &HyperparameterSpace) -> String {
        let mut h = String::from("trial,run");
        for e in &space.entries {
            write!(h, ",{}", e.name).unwrap();
        }
        h.push_str(",t,returned_height,success,gert,status");
        h
    }

    /// `status` is `running` on every line but the last of each trial.
    pub fn to_csv(study: &Study, space: &HyperparameterSpace) -> String {
        let mut out = Self::header(space);
        out.push('\n');
        for trial in &study.trials {
            let last = trial.results.len();
            for (i, (r, &(_, g))) in trial.results.iter().zip(&trial.reported_gerts).enumerate() {
                write!(out, "{},{}", trial.number, r.run_index).unwrap();
                for e in &space.entries {
                    write!(out, ",{}", trial.instance.params[e.name]).unwrap();
                }
                let status = if i + 1 == last { trial.status } else { TrialStatus::Running };
                writeln!(
                    out,
                    ",{},{},{},{},{}",
                    r.t,
                    r.returned_height,
                    r.success,
                    fmt_measure(g),
                    status.as_str()
                )
                .unwrap();
            }
        }
        out
    }

    /// Finished trials of a log. Lines of a trial that never finished are
    /// dropped; GERT values are recomputed and checked against the log.
    pub fn parse(text: &str, space: &HyperparameterSpace, schedule: &ScoreSchedule, seed: u64, source: &str) -> Result<Vec<Trial>> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == Self::header(space) => {}
            _ => return Err(err(1, format!("expected header `{}`", Self::header(space)))),
        }
        let n_params = space.entries.len();
        let mut trials: Vec<Trial> = Vec::new();
        let mut open: Option<Trial> = None;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != n_params + 7 {
                return Err(err(line_no, format!("expected {} fields, found {}", n_params + 7, f.len())));
            }
            let number: usize = f[0].parse().map_err(|_| err(line_no, "bad trial number".into()))?;
            let run_index: u64 = f[1].parse().map_err(|_| err(line_no, "bad run index".into()))?;
            let mut values = ParamValues::new();
            for (spec, s) in space.entries.iter().zip(&f[2..2 + n_params]) {
                let v = match spec.kind {
                    ParamKind::Bool => s.parse().map(ParamValue::Bool).ok(),
                    ParamKind::Int { .. } => s.parse().map(ParamValue::Int).ok(),
                    _ => s.parse().map(ParamValue::Real).ok(),
                };
                let v = v.ok_or_else(|| err(line_no, format!("bad value `{s}` for {}", spec.name)))?;
                values.insert(spec.name.to_string(), v);
            }
            let rest = &f[2 + n_params..];
            let t: usize = rest[0].parse().map_err(|_| err(line_no, "bad t".into()))?;
            let returned_height: f64 = rest[1].parse().map_err(|_| err(line_no, "bad returned height".into()))?;
            let success: bool = rest[2].parse().map_err(|_| err(line_no, "bad success flag".into()))?;
            let logged = parse_measure(rest[3]).ok_or_else(|| err(line_no, "bad gert".into()))?;
            let status = TrialStatus::parse(rest[4]).ok_or_else(|| err(line_no, format!("bad status `{}`", rest[4])))?;

            let trial = match open.take() {
                Some(t) if t.number == number => t,
                Some(_) => return Err(err(line_no, format!("trial {number} starts before the previous trial finished"))),
                None => {
                    if number != trials.len() {
                        return Err(err(line_no, format!("expected trial {}, found {number}", trials.len())));
                    }
                    let instance = OptimizerInstance::new(space, &values, seed).map_err(|e| err(line_no, e.to_string()))?;
                    Trial::new(number, instance)
                }
            };
            let mut trial = trial;
            if trial.instance.params != space.validate(&values).map_err(|e| err(line_no, e.to_string()))? {
                return Err(err(line_no, format!("hyperparameters of trial {number} change between runs")));
            }
            trial.results.push(RunResult {
                run_index,
                t,
                returned_height,
                success,
            });
            let g = gert(&trial.results, schedule);
            let same = g == logged || (g - logged).abs() <= 1e-9 * g.abs();
            if !same {
                return Err(err(line_no, format!("logged gert {logged} does not match recomputed {g}")));
            }
            trial.reported_gerts.push((trial.results.len(), g));
            match status {
                TrialStatus::Running => open = Some(trial),
                TrialStatus::Pruned => {
                    trial.status = status;
                    trials.push(trial);
                }
                TrialStatus::Complete => {
                    trial.status = status;
                    trial.final_gert = Some(g);
                    trials.push(trial);
                }
            }
        }
        Ok(trials)
    }
}
