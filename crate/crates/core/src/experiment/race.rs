//! SA versus ALSA on frozen random score tables with equal step budgets.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::output::{write_atomic, write_csv, write_json};
use super::plot::{line_chart, Series};
use super::{par_map, RaceConfig};
use crate::error::Result;
use crate::optimizer::{anneal, binomial, solve_exhaustive, AnnealerConfig, Neighborhood, ScoreTable};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceInstance {
    pub instance: usize,
    pub sa_best: f64,
    pub alsa_best: f64,
    /// Exhaustive optimum, when the instance is small enough.
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceTracePoint {
    pub step: u64,
    pub sa_mean_best: f64,
    pub alsa_mean_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceReport {
    pub config: RaceConfig,
    pub alsa_wins: usize,
    pub ties: usize,
    pub sa_wins: usize,
    /// Share of instances where ALSA's best energy is at least SA's.
    pub alsa_win_or_tie_rate: f64,
    pub sa_exact_hits: Option<usize>,
    pub alsa_exact_hits: Option<usize>,
    #[serde(skip)]
    pub instances: Vec<RaceInstance>,
    #[serde(skip)]
    pub mean_trace: Vec<RaceTracePoint>,
}

/// Instance `i`'s table: scores uniform on [0, 1], g uniform on [-1, 1].
pub fn race_instance_table(config: &RaceConfig, instance: usize) -> Result<ScoreTable> {
    let mut r = rng::derive(config.seed, purpose::INSTANCE, "race", instance as u64);
    let k = config.num_clients;
    let scores: Vec<f64> = (0..k).map(|_| r.random()).collect();
    let g: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
    ScoreTable::from_values(&scores, &g, config.alpha, config.num_channels)
}

/// Both chains of an instance share one annealing stream, so they start from
/// the same random state.
pub fn compare_optimizers(config: &RaceConfig, workers: usize) -> Result<RaceReport> {
    let exact_ok = binomial(config.num_clients, config.num_channels) <= config.exact_cap;
    let ids: Vec<usize> = (0..config.instances).collect();
    let runs = par_map(&ids, workers, |&i| -> Result<_> {
        let table = race_instance_table(config, i)?;
        let chain = |nb| {
            let mut c = AnnealerConfig::new(config.steps, nb).with_trace();
            c.d = config.d;
            let mut r = rng::derive(config.seed, purpose::ANNEAL, "race", i as u64);
            anneal(&table, &c, &mut r)
        };
        let sa = chain(Neighborhood::Classic)?;
        let alsa = chain(Neighborhood::Lightweight)?;
        let exact = if exact_ok {
            Some(solve_exhaustive(&table, config.exact_cap)?.1.as_f64())
        } else {
            None
        };
        let thin = |t: &[crate::optimizer::TraceRow]| -> Vec<f64> {
            t.iter()
                .filter(|r| r.step % config.trace_every == 0 || r.step + 1 == config.steps)
                .map(|r| r.best.as_f64())
                .collect()
        };
        let traces = (thin(&sa.trace), thin(&alsa.trace));
        Ok((
            RaceInstance {
                instance: i,
                sa_best: sa.best_energy.as_f64(),
                alsa_best: alsa.best_energy.as_f64(),
                exact,
            },
            sa.best_energy.cmp(&alsa.best_energy),
            traces,
        ))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let steps: Vec<u64> = (0..config.steps)
        .filter(|s| s % config.trace_every == 0 || s + 1 == config.steps)
        .collect();
    let n = runs.len() as f64;
    let mean_trace = steps
        .iter()
        .enumerate()
        .map(|(j, &step)| RaceTracePoint {
            step,
            sa_mean_best: runs.iter().map(|r| r.2 .0[j]).sum::<f64>() / n,
            alsa_mean_best: runs.iter().map(|r| r.2 .1[j]).sum::<f64>() / n,
        })
        .collect();

    use std::cmp::Ordering::*;
    let count = |o| runs.iter().filter(|r| r.1 == o).count();
    let (alsa_wins, ties, sa_wins) = (count(Less), count(Equal), count(Greater));
    let hits = |pick: fn(&RaceInstance) -> f64| {
        exact_ok.then(|| {
            runs.iter()
                .filter(|r| r.0.exact.is_some_and(|e| (pick(&r.0) - e).abs() <= 1e-12))
                .count()
        })
    };
    Ok(RaceReport {
        config: config.clone(),
        alsa_wins,
        ties,
        sa_wins,
        alsa_win_or_tie_rate: (alsa_wins + ties) as f64 / n,
        sa_exact_hits: hits(|r| r.sa_best),
        alsa_exact_hits: hits(|r| r.alsa_best),
        instances: runs.into_iter().map(|r| r.0).collect(),
        mean_trace,
    })
}

/// `race/instances.csv`, `race/mean_trace.csv`, `race/summary.json` and,
/// unless `no_plots`, `race/energy_race.svg`.
pub fn write_race(dir: &Path, report: &RaceReport, no_plots: bool) -> Result<()> {
    let dir = dir.join("race");
    write_csv(
        &dir.join("instances.csv"),
        &["instance", "sa_best", "alsa_best", "exact"],
        &report.instances,
    )?;
    write_csv(
        &dir.join("mean_trace.csv"),
        &["step", "sa_mean_best", "alsa_mean_best"],
        &report.mean_trace,
    )?;
    write_json(&dir.join("summary.json"), report)?;
    if !no_plots {
        let pts = |f: fn(&RaceTracePoint) -> f64| report.mean_trace.iter().map(|p| (p.step as f64, f(p))).collect();
        let svg = line_chart(
            "Energy race: mean best energy",
            "step",
            "best energy",
            &[
                Series { name: "SA", points: pts(|p| p.sa_mean_best) },
                Series { name: "ALSA", points: pts(|p| p.alsa_mean_best) },
            ],
        );
        write_atomic(&dir.join("energy_race.svg"), svg.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, m: usize, steps: u64, instances: usize) -> RaceConfig {
        RaceConfig {
            instances,
            num_clients: k,
            num_channels: m,
            steps,
            alpha: 1.0,
            d: None,
            seed: 5,
            trace_every: 10,
            exact_cap: 1000,
        }
    }

    #[test]
    fn one_step_budget_ties() {
        let r = compare_optimizers(&cfg(12, 4, 1, 20), 2).unwrap();
        assert_eq!(r.ties, 20);
        assert_eq!(r.alsa_win_or_tie_rate, 1.0);
        assert_eq!(r.mean_trace.len(), 1);
    }

    #[test]
    fn small_instances_reach_optimum() {
        let r = compare_optimizers(&cfg(8, 4, 20_000, 10), 2).unwrap();
        assert_eq!(r.sa_exact_hits, Some(10));
        assert_eq!(r.alsa_exact_hits, Some(10));
        for p in r.mean_trace.windows(2) {
            assert!(p[1].sa_mean_best >= p[0].sa_mean_best);
        }
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let a = compare_optimizers(&cfg(10, 3, 300, 6), 1).unwrap();
        let b = compare_optimizers(&cfg(10, 3, 300, 6), 3).unwrap();
        assert_eq!(a, b);
    }
}
