//! Parameter sweeps: expand a base run configuration along value axes and
//! seed lists, run every combination, and aggregate tail-window statistics
//! into one comparison table.

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::engine::{self, MetricsRecord};
use crate::output::{AGGREGATE_PREFIX, AGGREGATE_SUFFIX};
use crate::SimError;

/// Upper bound on expanded runs unless the spec raises it.
pub const DEFAULT_MAX_RUNS: usize = 10_000;

/// One swept dimension: a dotted path into the run configuration and the
/// values it takes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

/// Tail window over which per-run statistics are computed: either a fixed
/// tick count or a fraction of the run, measured from the end.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    #[serde(default)]
    pub ticks: Option<u64>,
    #[serde(default = "default_tail_fraction")]
    pub fraction: f64,
}

fn default_tail_fraction() -> f64 {
    0.5
}

impl Default for TailSpec {
    fn default() -> Self {
        TailSpec {
            ticks: None,
            fraction: default_tail_fraction(),
        }
    }
}

impl TailSpec {
    /// Window length in ticks for a run of `run_ticks`, at least 1.
    pub fn window(&self, run_ticks: usize) -> usize {
        let ticks = match self.ticks {
            Some(t) => t as usize,
            None => (run_ticks as f64 * self.fraction).round() as usize,
        };
        ticks.clamp(1, run_ticks.max(1))
    }
}

/// A sweep request: base config, axes, seeds, and execution knobs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    /// Seeds applied on top of each axis combination; empty means the base
    /// config's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub tail: TailSpec,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_parallelism() -> usize {
    1
}

fn default_max_runs() -> usize {
    DEFAULT_MAX_RUNS
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: SweepSpec =
            serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(SimError::InvalidConfig(format!(
                "sweep schema_version {} unsupported, expected {SCHEMA_VERSION}",
                spec.schema_version
            )));
        }
        Ok(spec)
    }
}

/// One planned run of an expanded sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub run_id: usize,
    pub seed: u64,
    /// Swept values in axis order, as (path, value) pairs.
    pub settings: Vec<(String, serde_json::Value)>,
    pub config: RunConfig,
}

/// Tail statistics of one finished run, one aggregate row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub run_id: usize,
    pub seed: u64,
    pub settings: Vec<(String, serde_json::Value)>,
    pub tail_ticks: u64,
    pub betrayal_rate_mean: f64,
    pub betrayal_rate_std: f64,
    pub acceptance_rate_mean: f64,
    pub acceptance_rate_std: f64,
}

/// Aggregate rows plus per-run failures; a sweep with failures still
/// reports every run that finished.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<RunStats>,
    pub failures: Vec<(usize, String)>,
}

fn apply_setting(
    tree: &mut serde_json::Value,
    path: &str,
    value: &serde_json::Value,
) -> Result<(), SimError> {
    let mut slot = tree;
    for segment in path.split('.') {
        slot = slot
            .get_mut(segment)
            .ok_or_else(|| SimError::InvalidConfig(format!("axis path {path:?} not found")))?;
    }
    *slot = value.clone();
    Ok(())
}

/// Expands a spec into the full cartesian product of axis values and
/// seeds. Axis order is significant: the first axis varies slowest and
/// seeds vary fastest, and `run_id` numbers the expansion in that order.
pub fn expand(spec: &SweepSpec) -> Result<Vec<RunPlan>, SimError> {
    spec.base.validate()?;
    for axis in &spec.axes {
        if axis.values.is_empty() {
            return Err(SimError::InvalidConfig(format!(
                "axis {:?} has no values",
                axis.path
            )));
        }
    }
    let seeds = if spec.seeds.is_empty() {
        vec![spec.base.seed]
    } else {
        spec.seeds.clone()
    };
    let combos: usize = spec.axes.iter().map(|a| a.values.len()).product();
    let total = combos * seeds.len();
    if total > spec.max_runs {
        return Err(SimError::InvalidConfig(format!(
            "sweep expands to {total} runs, above the limit of {}",
            spec.max_runs
        )));
    }
    let base_tree =
        serde_json::to_value(&spec.base).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut plans = Vec::with_capacity(total);
    for combo in 0..combos {
        let mut settings = Vec::with_capacity(spec.axes.len());
        let mut index = combo;
        for axis in spec.axes.iter().rev() {
            let pick = index % axis.values.len();
            index /= axis.values.len();
            settings.push((axis.path.clone(), axis.values[pick].clone()));
        }
        settings.reverse();
        let mut tree = base_tree.clone();
        for (path, value) in &settings {
            apply_setting(&mut tree, path, value)?;
        }
        for &seed in &seeds {
            let mut config: RunConfig = serde_json::from_value(tree.clone())
                .map_err(|e| SimError::InvalidConfig(format!("expanded config: {e}")))?;
            config.seed = seed;
            config.validate()?;
            plans.push(RunPlan {
                run_id: plans.len(),
                seed,
                settings: settings.clone(),
                config,
            });
        }
    }
    Ok(plans)
}

fn mean_and_std(samples: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = samples.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.clone().sum::<f64>() / n as f64;
    let var = samples.map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Per-tick betrayal and acceptance rates over the final `tail_ticks`
/// records, reduced to mean and population standard deviation. Ticks with
/// no attempts (or no invitations) count as rate zero.
pub fn tail_stats(metrics: &[MetricsRecord], tail_ticks: usize) -> (u64, [f64; 4]) {
    let window = tail_ticks.min(metrics.len());
    let tail = &metrics[metrics.len() - window..];
    let betrayal = tail.iter().map(|m| {
        if m.projects_attempted == 0 {
            0.0
        } else {
            m.betrayal_count as f64 / m.projects_attempted as f64
        }
    });
    let acceptance = tail.iter().map(|m| {
        if m.invitations_issued == 0 {
            0.0
        } else {
            m.invitations_accepted as f64 / m.invitations_issued as f64
        }
    });
    let (b_mean, b_std) = mean_and_std(betrayal);
    let (a_mean, a_std) = mean_and_std(acceptance);
    (window as u64, [b_mean, b_std, a_mean, a_std])
}

/// Runs every expanded plan and collects aggregate rows, honouring the
/// spec's parallelism. Rows come back sorted by `run_id` regardless of
/// completion order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, SimError> {
    let plans = expand(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism.max(1))
        .build()
        .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunStats, (usize, String)>> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                let (_, result) =
                    engine::run(&plan.config).map_err(|e| (plan.run_id, e.to_string()))?;
                let tail_ticks = spec.tail.window(result.metrics.len());
                let (window, [b_mean, b_std, a_mean, a_std]) =
                    tail_stats(&result.metrics, tail_ticks);
                Ok(RunStats {
                    run_id: plan.run_id,
                    seed: plan.seed,
                    settings: plan.settings.clone(),
                    tail_ticks: window,
                    betrayal_rate_mean: b_mean,
                    betrayal_rate_std: b_std,
                    acceptance_rate_mean: a_mean,
                    acceptance_rate_std: a_std,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(stats) => rows.push(stats),
            Err(failure) => failures.push(failure),
        }
    }
    rows.sort_by_key(|r| r.run_id);
    failures.sort_by_key(|f| f.0);
    Ok(SweepOutcome { rows, failures })
}

fn render_value(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Aggregate table: `run_id,seed,<one column per axis>,tail_ticks,` then
/// the four tail statistics.
pub fn aggregate_csv(axes: &[String], rows: &[RunStats]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(AGGREGATE_PREFIX);
    for axis in axes {
        out.push(',');
        out.push_str(axis);
    }
    out.push(',');
    out.push_str(AGGREGATE_SUFFIX);
    out.push('\n');
    for row in rows {
        write!(out, "{},{}", row.run_id, row.seed).unwrap();
        for (_, value) in &row.settings {
            out.push(',');
            out.push_str(&render_value(value));
        }
        writeln!(
            out,
            ",{},{},{},{},{}",
            row.tail_ticks,
            row.betrayal_rate_mean,
            row.betrayal_rate_std,
            row.acceptance_rate_mean,
            row.acceptance_rate_std
        )
        .unwrap();
    }
    out
}
