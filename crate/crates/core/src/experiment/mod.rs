//! Config-driven experiment runner: seeded (policy, seed) runs, the solver
//! energy race, and their CSV/JSON/SVG artifacts.

mod config;
pub mod output;
pub mod plot;
mod race;

pub use config::{
    reward_spec, EvaluationConfig, ExperimentConfig, LatencyGroup, PolicySpec, RaceConfig, RewardConfig,
    ScenarioConfig,
};
pub use race::{compare_optimizers, race_instance_table, write_race, RaceInstance, RaceReport, RaceTracePoint};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use crate::domain::SelectionHistory;
use crate::environment::Scenario;
use crate::error::{BsflError, Result};
use crate::evaluation::{collect_metrics, rate_snapshots, RegretSeries, METRIC_COLUMNS};
use crate::fedtoy::{train_with, ToyDataset, TraceRow};
use crate::rng::{self, purpose};
use crate::simulation::{simulate, Horizon, RoundRecord, RunOptions};

use self::output::{write_atomic, write_csv, write_json};
use self::plot::{line_chart, Series};

pub const DEFAULT_OUTPUT_DIR: &str = "results";
pub const TRACE_COLUMNS: [&str; 5] = ["clock_seconds", "round", "test_loss", "policy_name", "seed"];

/// Command-line overrides layered over the config.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the machine's parallelism.
    pub parallelism: Option<usize>,
    pub no_plots: bool,
}

impl RunOverrides {
    pub fn output_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn workers(&self) -> usize {
        self.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

/// One finished (policy, seed) run, kept in memory.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub policy: String,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub history: SelectionHistory,
    pub regret: Option<RegretSeries>,
    pub trace: Option<Vec<TraceRow>>,
    pub wall_seconds: f64,
}

impl RunResult {
    pub fn final_regret(&self) -> Option<f64> {
        self.regret.as_ref().and_then(|r| r.cumulative.last().copied())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.trace.as_ref().and_then(|t| t.last()).map(|r| r.test_loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub rounds_completed: u64,
    pub final_regret: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_clock: f64,
    pub wall_seconds: f64,
    pub negative_gap_warnings: u64,
    pub metrics_file: String,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub name: Option<String>,
    pub horizon: Horizon,
    pub seeds: Vec<u64>,
    pub policies: Vec<String>,
    pub runs: Vec<RunSummary>,
    pub wall_seconds: f64,
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let config = ExperimentConfig::from_json(&text)?;
    config.validate()?;
    Ok(config)
}

/// Per-seed inputs shared by every policy: the scenario (with its cached
/// true means) and, when training is on, the dataset.
struct SeedWorld {
    scenario: Scenario,
    dataset: Option<ToyDataset>,
}

/// Runs every (policy, seed) pair without touching the filesystem. Results
/// come back in config order: policies outer, seeds inner.
pub fn execute(config: &ExperimentConfig, workers: usize) -> Result<Vec<RunResult>> {
    config.validate()?;
    if config.policies.is_empty() {
        return Err(BsflError::config("policies", "list at least one policy to run"));
    }
    let worlds = par_map(&config.seeds, workers, |&seed| -> Result<SeedWorld> {
        let scenario = config.build_scenario(seed)?;
        let dataset = if config.evaluation.fedtoy {
            Some(ToyDataset::generate(&config.scenario.data, config.scenario.num_clients, seed)?)
        } else {
            None
        };
        Ok(SeedWorld { scenario, dataset })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..config.seeds.len()).map(move |s| (p, s)))
        .collect();
    par_map(&jobs, workers, |&(p, s)| run_one(config, p, config.seeds[s], &worlds[s]))
        .into_iter()
        .collect()
}

fn run_one(config: &ExperimentConfig, policy_index: usize, seed: u64, world: &SeedWorld) -> Result<RunResult> {
    let start = Instant::now();
    let spec = &config.policies[policy_index];
    let name = spec.name();
    let scenario = &world.scenario;
    let g = reward_spec(scenario, &config.scenario.reward)?;
    let mut policy = spec.build(scenario, &config.scenario.reward)?;
    let mut rng = rng::derive(seed, purpose::POLICY, &name, 0);
    let options = RunOptions {
        horizon: config.horizon,
        regret: config.evaluation.regret,
        genie_cap: config.evaluation.cap(),
    };
    let (records, history, regret, trace) = match &world.dataset {
        Some(dataset) => {
            let run = train_with(dataset, scenario, &g, policy.as_mut(), &options, config.train, &mut rng)?;
            let mut history = SelectionHistory::new(config.scenario.num_clients);
            for r in &run.records {
                history.record_round(&r.chosen, &r.latencies, &scenario.params)?;
            }
            (run.records, history, run.regret, Some(run.trace))
        }
        None => {
            let out = simulate(scenario, &g, policy.as_mut(), &options, &mut rng, &mut ())?;
            (out.records, out.history, out.regret, None)
        }
    };
    Ok(RunResult {
        policy: name,
        seed,
        records,
        history,
        regret,
        trace,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the experiment and writes its artifacts under the output directory:
/// `metrics/<policy>_seed<seed>.csv`, `fedtoy/...` traces when enabled,
/// optional `rates/...`, `summary.json`, and SVG plots unless disabled.
pub fn run_experiment(config: &ExperimentConfig, overrides: &RunOverrides) -> Result<(ExperimentSummary, Vec<RunResult>)> {
    let start = Instant::now();
    let results = execute(config, overrides.workers())?;
    let dir = overrides.output_dir(config);
    let mut runs = Vec::with_capacity(results.len());
    for r in &results {
        let stem = format!("{}_seed{}", r.policy, r.seed);
        let metrics = collect_metrics(&r.records, &r.policy, r.seed);
        let metrics_file = format!("metrics/{stem}.csv");
        write_csv(&dir.join(&metrics_file), &METRIC_COLUMNS[..], &metrics)?;
        let trace_file = match &r.trace {
            Some(trace) => {
                let rows: Vec<TraceCsvRow> = trace
                    .iter()
                    .map(|t| TraceCsvRow {
                        clock_seconds: t.clock_seconds,
                        round: t.round,
                        test_loss: t.test_loss,
                        policy_name: &r.policy,
                        seed: r.seed,
                    })
                    .collect();
                let file = format!("fedtoy/{stem}.csv");
                write_csv(&dir.join(&file), &TRACE_COLUMNS[..], &rows)?;
                Some(file)
            }
            None => None,
        };
        if let Some(cadence) = config.evaluation.rate_cadence {
            write_rates(&dir.join(format!("rates/{stem}.csv")), r, config.scenario.num_clients, cadence)?;
        }
        runs.push(RunSummary {
            policy: r.policy.clone(),
            seed: r.seed,
            rounds_completed: r.records.len() as u64,
            // Taken from the metrics rows so the two always agree.
            final_regret: metrics.last().and_then(|m| m.cumulative_regret),
            final_loss: r.final_loss(),
            final_clock: r.records.last().map_or(0.0, |x| x.cumulative_clock),
            wall_seconds: r.wall_seconds,
            negative_gap_warnings: r.regret.as_ref().map_or(0, |s| s.negative_gap_warnings),
            metrics_file,
            trace_file,
        });
    }
    if !overrides.no_plots {
        write_plots(&dir, config, &results)?;
    }
    let summary = ExperimentSummary {
        name: config.name.clone(),
        horizon: config.horizon,
        seeds: config.seeds.clone(),
        policies: config.policies.iter().map(PolicySpec::name).collect(),
        runs,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok((summary, results))
}

#[derive(Serialize)]
struct TraceCsvRow<'a> {
    clock_seconds: f64,
    round: u64,
    test_loss: f64,
    policy_name: &'a str,
    seed: u64,
}

fn write_rates(path: &Path, run: &RunResult, num_clients: usize, cadence: u64) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..num_clients).map(|k| format!("client_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = rate_snapshots(&run.records, num_clients, cadence)
        .into_iter()
        .map(|s| {
            let mut row = vec![s.t.to_string()];
            row.extend(s.rates.iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn by_policy<'a>(config: &ExperimentConfig, results: &'a [RunResult]) -> Vec<(String, Vec<&'a RunResult>)> {
    config
        .policies
        .iter()
        .map(|p| {
            let name = p.name();
            let runs = results.iter().filter(|r| r.policy == name).collect();
            (name, runs)
        })
        .collect()
}

/// Median over seeds of cumulative regret per round, up to the shortest run.
pub fn median_regret_curve(runs: &[&RunResult]) -> Vec<(f64, f64)> {
    let series: Vec<&[f64]> = runs
        .iter()
        .filter_map(|r| r.regret.as_ref().map(|s| s.cumulative.as_slice()))
        .collect();
    let n = series.iter().map(|s| s.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let mut col: Vec<f64> = series.iter().map(|s| s[i]).collect();
            ((i + 1) as f64, median(&mut col))
        })
        .collect()
}

/// Median over seeds of the test loss on a uniform clock grid.
pub fn median_loss_curve(runs: &[&RunResult], points: usize) -> Vec<(f64, f64)> {
    let traces: Vec<&[TraceRow]> = runs.iter().filter_map(|r| r.trace.as_deref()).collect();
    let end = traces
        .iter()
        .filter_map(|t| t.last())
        .map(|r| r.clock_seconds)
        .fold(0.0, f64::max);
    if traces.is_empty() || points < 2 {
        return Vec::new();
    }
    (0..points)
        .map(|i| {
            let x = end * i as f64 / (points - 1) as f64;
            let mut col: Vec<f64> = traces
                .iter()
                .map(|t| {
                    let idx = t.partition_point(|r| r.clock_seconds <= x);
                    t[idx.saturating_sub(1)].test_loss
                })
                .collect();
            (x, median(&mut col))
        })
        .collect()
}

fn write_plots(dir: &Path, config: &ExperimentConfig, results: &[RunResult]) -> Result<()> {
    let groups = by_policy(config, results);
    if config.evaluation.regret {
        let series: Vec<Series> = groups
            .iter()
            .map(|(name, runs)| Series {
                name,
                points: median_regret_curve(runs),
            })
            .collect();
        let svg = line_chart("Cumulative regret (median over seeds)", "round", "regret", &series);
        write_atomic(&dir.join("plots/regret.svg"), svg.as_bytes())?;
    }
    if config.evaluation.fedtoy {
        let series: Vec<Series> = groups
            .iter()
            .map(|(name, runs)| Series {
                name,
                points: median_loss_curve(runs, 400),
            })
            .collect();
        let svg = line_chart("Test loss (median over seeds)", "simulated seconds", "test MSE", &series);
        write_atomic(&dir.join("plots/loss.svg"), svg.as_bytes())?;
    }
    Ok(())
}

/// Order-preserving parallel map over scoped threads pulling from a shared
/// index.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect()
}
