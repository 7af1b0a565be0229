//! Monte Carlo ensembles over Wiener paths and (h, k) refinement studies.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::noise::{path_seed, sample_wiener_path};
use crate::stepper::{
    run_path, Discretization, EnergyRecord, EnergyTrace, InitialData, RunOptions,
};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::default();
    let mut n = 0usize;
    for v in values {
        s.add(v);
        n += 1;
    }
    s.value() / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub index: usize,
    pub seed: u64,
    pub sphere_error_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub paths: usize,
    pub mean_trace: EnergyTrace,
    /// Traces of the first `retain_paths` paths, by path index.
    pub sample_paths: Vec<(usize, EnergyTrace)>,
    pub mean_sphere_error_sq: f64,
    pub summaries: Vec<PathSummary>,
}

impl EnsembleResult {
    pub fn seeds(&self) -> Vec<u64> {
        self.summaries.iter().map(|s| s.seed).collect()
    }
}

/// Everything an ensemble needs besides the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub steps: usize,
    pub k: f64,
    pub paths: usize,
    pub base_seed: u64,
    pub retain_paths: usize,
    /// 0 uses the global rayon pool.
    pub workers: usize,
    pub options: RunOptions,
}

impl EnsembleSpec {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            steps: cfg.steps,
            k: cfg.k(),
            paths: cfg.paths,
            base_seed: cfg.base_seed,
            retain_paths: cfg.retain_paths,
            workers: cfg.workers,
            options: RunOptions {
                energy_guard: cfg.energy_guard,
                ..RunOptions::default()
            },
        }
    }
}

/// Vortex ensemble described entirely by `cfg`.
pub fn run_ensemble(cfg: &SimConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let disc = Discretization::from_config(cfg)?;
    let init = InitialData::vortex(&disc, cfg.h_s)?;
    run_ensemble_with(&disc, &init, &EnsembleSpec::from_config(cfg))
}

pub fn run_ensemble_with(
    disc: &Discretization,
    init: &InitialData,
    spec: &EnsembleSpec,
) -> Result<EnsembleResult> {
    if spec.paths == 0 {
        return Err(Error::config("L", "must be at least 1"));
    }
    let one = |i: usize| -> Result<(EnergyTrace, PathSummary)> {
        let seed = path_seed(spec.base_seed, i as u64);
        let wrap = |e: Error| Error::Path {
            index: i,
            seed,
            source: Box::new(e),
        };
        let path = sample_wiener_path(spec.steps, spec.k, seed).map_err(wrap)?;
        let r = run_path(disc, init, &path, &spec.options).map_err(wrap)?;
        Ok((
            r.trace,
            PathSummary {
                index: i,
                seed,
                sphere_error_sq: r.sphere_error_sq,
            },
        ))
    };
    let run_all = || (0..spec.paths).into_par_iter().map(one).collect::<Vec<_>>();
    let results = if spec.workers == 0 {
        run_all()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?
            .install(run_all)
    };
    let (traces, summaries): (Vec<_>, Vec<_>) = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let mean_trace = (0..traces[0].len())
        .map(|j| {
            let field =
                |f: fn(&EnergyRecord) -> f64| compensated_mean(traces.iter().map(|tr| f(&tr[j])));
            EnergyRecord {
                t: traces[0][j].t,
                exchange_sq: field(|r| r.exchange_sq),
                field_sq: field(|r| r.field_sq),
                curl_sq: field(|r| r.curl_sq),
            }
        })
        .collect();
    let mean_sphere_error_sq = compensated_mean(summaries.iter().map(|s| s.sphere_error_sq));
    let sample_paths = traces
        .into_iter()
        .take(spec.retain_paths)
        .enumerate()
        .collect();
    Ok(EnsembleResult {
        paths: spec.paths,
        mean_trace,
        sample_paths,
        mean_sphere_error_sq,
        summaries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: f64,
    pub steps: usize,
    pub mean_sphere_error_sq: f64,
    pub paths: usize,
    pub wallclock_s: f64,
}

/// Number of steps on `[0, T]` for the time step `ratio * h`.
pub fn steps_for_ratio(t_final: f64, n: usize, ratio: f64) -> usize {
    ((t_final * n as f64 / ratio).round() as usize).max(1)
}

/// One ensemble per `(n, ratio)` pair of `cfg.n_list x cfg.k_ratios`, in nested loop order.
pub fn convergence_study(cfg: &SimConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    if cfg.n_list.is_empty() || cfg.k_ratios.is_empty() {
        return Err(Error::config("n_list", "and k_ratios must be nonempty"));
    }
    let mut rows = Vec::with_capacity(cfg.n_list.len() * cfg.k_ratios.len());
    for &n in &cfg.n_list {
        for &ratio in &cfg.k_ratios {
            let mut c = cfg.clone();
            c.n = n;
            c.steps = steps_for_ratio(cfg.t_final, n, ratio);
            let start = Instant::now();
            let res = run_ensemble(&c)?;
            rows.push(ConvergenceRow {
                n,
                k: c.k(),
                steps: c.steps,
                mean_sphere_error_sq: res.mean_sphere_error_sq,
                paths: c.paths,
                wallclock_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}
