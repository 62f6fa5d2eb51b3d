//! End-to-end commands behind the command-line tool, driven by a TOML
//! configuration. Every file is written atomically and every output is a
//! pure function of the inputs, so re-running a command reproduces its
//! files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{Budget, EvalTrace, Harness, RunConfig, RunResult};
use crate::measures::MeasureReport;
use crate::optima::{assign_nsa, band_statistics, label_basins, HeightBand, ScoreSchedule};
use crate::optimizers::{AlgorithmId, HyperparameterSpace, OptimizerInstance, ParamValues};
use crate::reports::{
    aggregate_summary, bands_svg, convergence_matrix, convergence_svg, distance_matrix, ert_curve, ert_curve_svg,
    ert_curve_table, height_band_counts, summary_table,
};
use crate::terrain::{
    apply_patch, apply_sea_slope, assemble_grid, build_sea_mask, load_asc_tile, parse_patch, read_cache, synth_terrain,
    write_cache, DomainRect, ElevationGrid, DEFAULT_BLOCK_SIZE,
};
use crate::tuner::{tune, HarnessRunner, SamplerKind, StudyLog, StudyParams, TrialStatus};
use crate::util::write_atomic;

/// Environment variable that replaces the cache path of a `cache` source.
pub const CACHE_ENV: &str = "TERRABENCH_CACHE";

/// Width of the full map; distance hyperparameter ranges are sized for it.
pub const FULL_MAP_WIDTH: f64 = 7.0e5;

/// Manual edits for the real dataset.
pub const OS_TERRAIN50_PATCH: &str = include_str!("../data/os_terrain50.patch");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A directory of ESRI ASCII tiles, assembled and given a sloping seabed.
    Asc {
        dir: PathBuf,
        /// Width and height in metres; defaults to the tiles' bounding box.
        #[serde(default)]
        extent: Option<[f64; 2]>,
        /// `true` applies the shipped edits; a path applies that patch file.
        #[serde(default)]
        patch: PatchChoice,
        /// sha256sum-style file listing the tiles' checksums.
        #[serde(default)]
        manifest: Option<PathBuf>,
        #[serde(default = "default_block_size")]
        block_size: usize,
    },
    /// A binary cache written by `preprocess`.
    Cache { path: PathBuf },
    /// Value-noise terrain.
    Synthetic {
        seed: u64,
        nrows: usize,
        ncols: usize,
        ruggedness: f64,
    },
}

fn default_block_size() -> usize {
    DEFAULT_BLOCK_SIZE
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatchChoice {
    #[default]
    None,
    Shipped(bool),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePreset {
    /// The Great Britain height bands.
    #[default]
    Table,
    /// One band from the run target upwards, scoring 1.
    Indicator,
    /// `count` equal bands spanning the grid's heights.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub preset: SchedulePreset,
    pub count: Option<usize>,
    /// Explicit bands; replace the preset.
    pub bands: Option<Vec<HeightBand>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainScale {
    /// `"auto"`: domain width over the full map width.
    Auto(AutoScale),
    Factor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoScale {
    Auto,
}

impl Default for DomainScale {
    fn default() -> Self {
        DomainScale::Auto(AutoScale::Auto)
    }
}

impl DomainScale {
    fn factor(self, domain: &DomainRect) -> Result<f64> {
        let f = match self {
            DomainScale::Auto(_) => domain.width / FULL_MAP_WIDTH,
            DomainScale::Factor(f) => f,
        };
        if f.is_finite() && f > 0.0 {
            Ok(f)
        } else {
            Err(Error::config("domain_scale", format!("{f} is not a positive factor")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmId,
    #[serde(default)]
    pub params: ParamValues,
    /// Number of runs; exclusive with `evaluations`.
    #[serde(default)]
    pub runs: Option<usize>,
    /// Total evaluation budget over all runs.
    #[serde(default)]
    pub evaluations: Option<usize>,
    #[serde(default = "yes")]
    pub multistart: bool,
    #[serde(default)]
    pub domain_scale: DomainScale,
}

fn yes() -> bool {
    true
}

impl AlgorithmConfig {
    pub fn budget(&self) -> Result<Budget> {
        match (self.runs, self.evaluations) {
            (Some(_), Some(_)) => Err(Error::config("algorithm", "set either `runs` or `evaluations`, not both")),
            (Some(0), None) => Err(Error::config("runs", "must be at least 1")),
            (Some(n), None) => Ok(Budget::Runs(n)),
            (None, Some(0)) => Err(Error::config("evaluations", "must be at least 1")),
            (None, Some(t)) => Ok(Budget::Evaluations(t)),
            (None, None) => Ok(Budget::Runs(100)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub algorithm: AlgorithmId,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_instance_budget")]
    pub instance_budget: usize,
    #[serde(default = "default_min_runs")]
    pub min_runs: usize,
    #[serde(default = "default_startup_trials")]
    pub startup_trials: usize,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub domain_scale: DomainScale,
}

fn default_trials() -> usize {
    StudyParams::default().trials
}

fn default_instance_budget() -> usize {
    StudyParams::default().instance_budget
}

fn default_min_runs() -> usize {
    StudyParams::default().min_runs
}

fn default_startup_trials() -> usize {
    StudyParams::default().startup_trials
}

impl TuneConfig {
    /// Study settings; the study seed is the config seed.
    pub fn study(&self, seed: u64) -> StudyParams {
        StudyParams {
            trials: self.trials,
            instance_budget: self.instance_budget,
            min_runs: self.min_runs,
            startup_trials: self.startup_trials,
            seed,
            sampler: self.sampler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub data: DataSource,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub algorithm: Option<AlgorithmConfig>,
    #[serde(default)]
    pub tune: Option<TuneConfig>,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Runs executed at once.
    #[serde(default = "one")]
    pub jobs: usize,
    /// Base seed of every run.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl BenchConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let config: BenchConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse {
                path: source.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string()).map_err(|e| match e {
            // A malformed config is a usage problem, not bad data.
            Error::Parse { line, message, .. } => Error::config(format!("{}:{line}", path.display()), message),
            other => other,
        })
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.jobs == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        if let DataSource::Synthetic { ruggedness, nrows, ncols, .. } = &self.data {
            if !(0.0..=1.0).contains(ruggedness) {
                return Err(Error::config("ruggedness", format!("{ruggedness} is outside [0, 1]")));
            }
            if *nrows < 2 || *ncols < 2 {
                return Err(Error::config("data", "synthetic terrain needs at least 2 x 2 points"));
            }
        }
        if let DataSource::Asc { block_size: 0, .. } = &self.data {
            return Err(Error::config("block_size", "must be at least 1"));
        }
        if let Some(bands) = &self.schedule.bands {
            ScoreSchedule::new(bands.clone())?;
        }
        if let Some(a) = &self.algorithm {
            a.budget()?;
            HyperparameterSpace::for_algorithm(a.name).validate(&a.params)?;
        }
        if let Some(t) = &self.tune {
            t.study(self.seed).validate()?;
            if HyperparameterSpace::for_algorithm(t.algorithm).entries.is_empty() {
                return Err(Error::config("tune.algorithm", format!("{} has no hyperparameters", t.algorithm)));
            }
        }
        Ok(())
    }

    /// The score schedule for `grid`.
    pub fn schedule(&self, grid: &ElevationGrid) -> Result<ScoreSchedule> {
        if let Some(bands) = &self.schedule.bands {
            return ScoreSchedule::new(bands.clone());
        }
        match self.schedule.preset {
            SchedulePreset::Table => Ok(ScoreSchedule::default()),
            SchedulePreset::Indicator => Ok(ScoreSchedule::indicator(self.run.f_target)),
            SchedulePreset::Uniform => {
                let (lo, hi) = grid.height_range().ok_or_else(|| Error::Grid("grid has no heights".into()))?;
                let (lo, hi) = (lo as f64, hi as f64);
                let hi = hi + (hi - lo).abs().max(1.0) * 1e-9;
                ScoreSchedule::uniform(lo, hi, self.schedule.count.unwrap_or(5))
            }
        }
    }

    fn algorithm(&self) -> Result<&AlgorithmConfig> {
        self.algorithm
            .as_ref()
            .ok_or_else(|| Error::config("algorithm", "the config has no [algorithm] section"))
    }

    fn tuning(&self) -> Result<&TuneConfig> {
        self.tune
            .as_ref()
            .ok_or_else(|| Error::config("tune", "the config has no [tune] section"))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Checks every `<sha256>  <file>` line of a manifest; file names are
/// relative to `dir`. Returns the number of files checked.
pub fn verify_manifest(manifest: &Path, dir: &Path) -> Result<usize> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let mut checked = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (digest, name) = line.split_once(char::is_whitespace).ok_or_else(|| Error::Parse {
            path: manifest.display().to_string(),
            line: i + 1,
            message: "expected `<sha256>  <file>`".into(),
        })?;
        let path = dir.join(name.trim().trim_start_matches('*'));
        let found = sha256_file(&path)?;
        if !found.eq_ignore_ascii_case(digest) {
            return Err(Error::Checksum {
                path,
                expected: digest.to_string(),
                found,
            });
        }
        checked += 1;
    }
    Ok(checked)
}

/// Lists a manifest line for every file in `paths`, named relative to `dir`.
pub fn write_manifest(paths: &[PathBuf], dir: &Path, manifest: &Path) -> Result<()> {
    let mut out = String::new();
    for p in paths {
        let name = p.strip_prefix(dir).unwrap_or(p);
        writeln!(out, "{}  {}", sha256_file(p)?, name.display()).unwrap();
    }
    write_atomic(manifest, out.as_bytes())
}

fn asc_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_asc = path
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case("asc"));
        if is_asc {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Grid(format!("no .asc tiles in {}", dir.display())));
    }
    Ok(files)
}

/// Summary of a preprocessed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStats {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub tiles: usize,
    pub patched_points: usize,
    pub sea_points: usize,
    pub min_height: f64,
    pub max_height: f64,
}

impl GridStats {
    pub fn summary(&self) -> String {
        format!(
            "nrows={} ncols={} cell_size={} tiles={} patched_points={} sea_points={} min_height={} max_height={}",
            self.nrows,
            self.ncols,
            self.cell_size,
            self.tiles,
            self.patched_points,
            self.sea_points,
            self.min_height,
            self.max_height
        )
    }
}

/// Assembles tiles, applies edits, masks the sea and slopes the seabed.
pub fn preprocess_tiles(
    dir: &Path,
    extent: Option<[f64; 2]>,
    patch: &PatchChoice,
    manifest: Option<&Path>,
    block_size: usize,
) -> Result<(ElevationGrid, GridStats)> {
    if !dir.is_dir() {
        return Err(Error::config("data.dir", format!("{} is not a directory", dir.display())));
    }
    if let Some(m) = manifest {
        verify_manifest(m, dir)?;
    }
    let files = asc_files(dir)?;
    let tiles = files.iter().map(load_asc_tile).collect::<Result<Vec<_>>>()?;
    let extent = match extent {
        Some([w, h]) => DomainRect::new(w, h)?,
        None => {
            let w = tiles
                .iter()
                .map(|t| t.origin().0 + t.ncols() as f64 * t.cell_size())
                .fold(f64::NEG_INFINITY, f64::max);
            let h = tiles
                .iter()
                .map(|t| t.origin().1 + t.nrows() as f64 * t.cell_size())
                .fold(f64::NEG_INFINITY, f64::max);
            DomainRect::new(w, h)?
        }
    };
    let mut grid = assemble_grid(&tiles, extent)?;
    let edits = match patch {
        PatchChoice::None | PatchChoice::Shipped(false) => Vec::new(),
        PatchChoice::Shipped(true) => parse_patch(OS_TERRAIN50_PATCH, "os_terrain50.patch")?,
        PatchChoice::File(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_patch(&text, &p.display().to_string())?
        }
    };
    let patched_points = apply_patch(&mut grid, &edits);
    let mask = build_sea_mask(&grid, block_size);
    let grid = apply_sea_slope(&grid, &mask);
    let (lo, hi) = grid.height_range().ok_or_else(|| Error::Grid("grid has no heights".into()))?;
    let stats = GridStats {
        nrows: grid.nrows(),
        ncols: grid.ncols(),
        cell_size: grid.cell_size(),
        tiles: tiles.len(),
        patched_points,
        sea_points: mask.sea_count(),
        min_height: lo as f64,
        max_height: hi as f64,
    };
    Ok((grid, stats))
}

/// The grid described by `source`. A `cache` path is replaced by `cache_override`.
pub fn load_grid(source: &DataSource, cache_override: Option<&Path>) -> Result<ElevationGrid> {
    match source {
        DataSource::Asc {
            dir,
            extent,
            patch,
            manifest,
            block_size,
        } => Ok(preprocess_tiles(dir, *extent, patch, manifest.as_deref(), *block_size)?.0),
        DataSource::Cache { path } => read_cache(cache_override.unwrap_or(path)),
        DataSource::Synthetic {
            seed,
            nrows,
            ncols,
            ruggedness,
        } => synth_terrain(*seed, *nrows, *ncols, *ruggedness),
    }
}

/// `preprocess`: tiles to cache. Returns the stats line.
pub fn cmd_preprocess(asc_dir: &Path, out_cache: &Path, patch: &PatchChoice, manifest: Option<&Path>) -> Result<String> {
    let (grid, stats) = preprocess_tiles(asc_dir, None, patch, manifest, DEFAULT_BLOCK_SIZE)?;
    write_cache(&grid, out_cache)?;
    Ok(stats.summary())
}

/// Reference values for the full Great Britain grid.
pub const FULL_DATASET_OPTIMA: usize = 957_174;
pub const FULL_DATASET_TOP_PROPORTION: f64 = 2.41e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimaSummary {
    pub optima: usize,
    pub points: usize,
    /// Basin proportion of the highest band.
    pub top_band_proportion: f64,
}

/// `optima`: NSA, basins and band statistics. Writes `optima.csv` and
/// `band_stats.csv` into `out`.
pub fn cmd_optima(grid: &ElevationGrid, schedule: &ScoreSchedule, out: &Path) -> Result<OptimaSummary> {
    let nsa = assign_nsa(grid);
    let labeling = label_basins(&nsa);
    let stats = band_statistics(&labeling, schedule)?;
    write_atomic(&out.join("optima.csv"), labeling.to_csv(grid).as_bytes())?;
    write_atomic(&out.join("band_stats.csv"), stats.to_csv(schedule).as_bytes())?;
    Ok(OptimaSummary {
        optima: labeling.optima.len(),
        points: grid.len(),
        top_band_proportion: stats.basin_proportion.last().copied().unwrap_or(0.0),
    })
}

/// What `run` records for `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub instance: OptimizerInstance,
    pub run: RunConfig,
    pub schedule: ScoreSchedule,
    pub runs: usize,
    /// Highest grid node, the target of the distance plot.
    pub target_point: Vec<f64>,
}

fn trace_path(dir: &Path, run_index: u64) -> PathBuf {
    dir.join("traces").join(format!("run_{run_index:05}.csv"))
}

fn results_csv(results: &[RunResult], traces: &[EvalTrace]) -> String {
    let mut out = String::from("run,seed,t,returned_height,success\n");
    for (r, t) in results.iter().zip(traces) {
        writeln!(out, "{},{},{},{},{}", r.run_index, t.seed, r.t, r.returned_height, r.success).unwrap();
    }
    out
}

fn highest_node(grid: &ElevationGrid) -> Vec<f64> {
    let best = (0..grid.len())
        .max_by(|&a, &b| grid.heights()[a].total_cmp(&grid.heights()[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let (x, y) = grid.node_coordinates(best);
    vec![x, y]
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}

/// `run`: executes the configured instance and writes `run.json`,
/// `traces/run_NNNNN.csv`, `results.csv`, `measures.csv` and
/// `measures.json`. Returns the measures row.
pub fn cmd_run(config: &BenchConfig, grid: &ElevationGrid, out: &Path, jobs: usize) -> Result<MeasureReport> {
    let algo = config.algorithm()?;
    let schedule = config.schedule(grid)?;
    let space = HyperparameterSpace::for_algorithm(algo.name).scaled(algo.domain_scale.factor(&grid.domain())?);
    let instance = OptimizerInstance::new(&space, &algo.params, config.seed)?;
    let optimizer = instance.build(config.run.tolerances()?)?;
    let mut harness = Harness::new(grid, config.run, config.seed);
    harness.multistart = algo.multistart;
    let outcomes = harness.run_instance(optimizer.as_ref(), algo.budget()?, jobs)?;

    let (results, traces): (Vec<RunResult>, Vec<EvalTrace>) = outcomes.into_iter().map(|o| (o.result, o.trace)).unzip();
    let report = MeasureReport::compute(&results, &schedule, config.run.t_max)?;
    for t in &traces {
        write_atomic(&trace_path(out, t.run_index), t.to_csv().as_bytes())?;
    }
    write_atomic(&out.join("results.csv"), results_csv(&results, &traces).as_bytes())?;
    write_atomic(
        &out.join("measures.csv"),
        format!("{}\n{}\n", MeasureReport::CSV_HEADER, report.to_csv_row()).as_bytes(),
    )?;
    write_atomic(&out.join("measures.json"), report.to_json().as_bytes())?;
    let manifest = RunManifest {
        instance,
        run: config.run,
        schedule,
        runs: results.len(),
        target_point: highest_node(grid),
    };
    write_atomic(&out.join("run.json"), to_json(&manifest).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSummary {
    pub trials: usize,
    pub resumed: usize,
    pub pruned: usize,
    pub best: Option<(usize, f64)>,
}

/// `tune`: runs a study, resuming from `study_log.csv` in `out` when it
/// exists. Writes the log after every trial and `best.json` at the end.
pub fn cmd_tune(config: &BenchConfig, grid: &ElevationGrid, out: &Path, jobs: usize) -> Result<TuneSummary> {
    let tc = config.tuning()?;
    let schedule = config.schedule(grid)?;
    let space = HyperparameterSpace::for_algorithm(tc.algorithm).scaled(tc.domain_scale.factor(&grid.domain())?);
    let log_path = out.join("study_log.csv");
    let study_params = tc.study(config.seed);
    let resume = if log_path.exists() {
        let text = fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
        StudyLog::parse(&text, &space, &schedule, study_params.seed, &log_path.display().to_string())?
    } else {
        Vec::new()
    };
    let resumed = resume.len();
    let harness = Harness::new(grid, config.run, config.seed);
    let runner = HarnessRunner::new(harness, jobs)?;
    let study = tune(&space, &study_params, &runner, &schedule, resume, jobs, &mut |s| {
        write_atomic(&log_path, StudyLog::to_csv(s, &space).as_bytes())
    })?;
    let best = study.best();
    #[derive(Serialize)]
    struct Best<'a> {
        trial: usize,
        gert: f64,
        instance: &'a OptimizerInstance,
    }
    let best_json = match best {
        Some(t) => to_json(&Best {
            trial: t.number,
            gert: t.final_gert.unwrap_or(f64::INFINITY),
            instance: &t.instance,
        }),
        None => "null\n".to_string(),
    };
    write_atomic(&out.join("best.json"), best_json.as_bytes())?;
    Ok(TuneSummary {
        trials: study.trials.len(),
        resumed,
        pruned: study.trials.iter().filter(|t| t.status == TrialStatus::Pruned).count(),
        best: best.map(|t| (t.number, t.final_gert.unwrap_or(f64::INFINITY))),
    })
}

/// Number of targets on the ERT curve.
pub const ERT_CURVE_POINTS: usize = 50;

/// `report`: reads a `run` directory and writes `convergence.csv`,
/// `summary.csv`, `bands.csv`, `ert_curve.csv`, `distance.csv` and three
/// SVG charts into `out`. Returns the written paths.
pub fn cmd_report(results_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = results_dir.join("run.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let traces = (0..manifest.runs as u64)
        .map(|i| {
            let p = trace_path(results_dir, i);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            EvalTrace::from_csv(&text, i, crate::rng::derive(manifest.instance.seed, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let config = &manifest.run;
    let matrix = convergence_matrix(&traces, config)?;
    let summary = aggregate_summary(&matrix)?;
    let counts = height_band_counts(&matrix, &manifest.schedule);
    let distance = distance_matrix(&traces, config, &manifest.target_point)?;

    let lowest_start = matrix.rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let targets: Vec<f64> = (0..ERT_CURVE_POINTS)
        .map(|k| {
            let lo = lowest_start.min(config.f_target);
            lo + (config.f_target - lo) * k as f64 / (ERT_CURVE_POINTS - 1) as f64
        })
        .collect();
    let curve = ert_curve(&traces, config, &targets)?;

    let name = manifest.instance.algorithm.as_str();
    let files: [(&str, String); 8] = [
        ("convergence.csv", matrix.to_table("best_h").to_csv()),
        ("summary.csv", summary_table(&summary).to_csv()),
        ("bands.csv", counts.to_table().to_csv()),
        ("ert_curve.csv", ert_curve_table(&curve).to_csv()),
        ("distance.csv", distance.to_table("distance").to_csv()),
        ("convergence.svg", convergence_svg(&summary, &format!("{name}: best height so far"))),
        ("bands.svg", bands_svg(&counts, &manifest.schedule, &format!("{name}: height bands"))),
        ("ert_curve.svg", ert_curve_svg(&curve, &format!("{name}: ERT against target"))),
    ];
    let mut written = Vec::new();
    for (file, body) in files {
        let p = out.join(file);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}
