//! Twin experiments: truth and nudged model advanced in lockstep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitialSpec, TruthInit, TruthSpec};
use crate::conditions::{self, ConditionInputs, ConditionReport, FlowScales};
use crate::control::{Assimilation, ControllerKind, StepDiagnostics, StepRecord, TruthSample};
use crate::error::{Error, Result};
use crate::field::random::random_solenoidal;
use crate::field::{Grid, SpectralField};
use crate::solver::{analytic_truth, bdf2_step, SolverConfig, SolverState};

type Field = SpectralField<f64>;

enum Truth {
    Analytic { cfg: SolverConfig<f64>, now: Field, t: f64 },
    Dns {
        cfg: SolverConfig<f64>,
        state: SolverState<f64>,
        substeps: usize,
    },
}

impl Truth {
    fn new(cfg: &ExperimentConfig, coarse: &Grid<f64>) -> Result<Self> {
        match cfg.truth {
            TruthSpec::Analytic => {
                let solver = SolverConfig::new(cfg.nu, cfg.dt, coarse.clone(), cfg.model)?;
                Ok(Truth::Analytic {
                    now: analytic_truth(cfg.model, coarse, cfg.nu, 0.0)?,
                    cfg: solver,
                    t: 0.0,
                })
            }
            TruthSpec::Dns { grid_n_fine, substeps } => {
                let fine = Grid::new(grid_n_fine, cfg.length)?;
                let solver = SolverConfig::new(cfg.nu, cfg.dt / substeps as f64, fine.clone(), cfg.model)?;
                let u0 = match cfg.u0 {
                    TruthInit::Zero => SpectralField::zeros(&fine),
                    TruthInit::Random {
                        seed,
                        amplitude,
                        max_mode,
                    } => random_solenoidal(&fine, &mut ChaCha8Rng::seed_from_u64(seed), max_mode, amplitude),
                };
                Ok(Truth::Dns {
                    cfg: solver,
                    state: SolverState::new(u0),
                    substeps,
                })
            }
        }
    }

    fn full(&self) -> &Field {
        match self {
            Truth::Analytic { now, .. } => now,
            Truth::Dns { state, .. } => &state.v_now,
        }
    }

    fn advance(&mut self, step: usize) -> Result<()> {
        match self {
            Truth::Analytic { cfg, now, t } => {
                *t = step as f64 * cfg.dt;
                *now = analytic_truth(cfg.forcing, &cfg.grid, cfg.nu, *t)?;
            }
            Truth::Dns { cfg, state, substeps } => {
                for _ in 0..*substeps {
                    *state = bdf2_step(state, cfg, None)?;
                }
            }
        }
        Ok(())
    }
}

/// Aggregate of a finished run, written into the JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub initial_err: f64,
    pub initial_rel_err: f64,
    pub final_err: f64,
    pub final_rel_err: f64,
    pub final_proj_err: f64,
    pub chi_max_observed: f64,
    pub chi_mean: f64,
    pub total_repeats: usize,
    pub forced_steps: usize,
    /// Trapezoidal time averages of `||grad u||^2` and `||grad u||^4`.
    pub avg_grad_u_sq: f64,
    pub avg_grad_u_4: f64,
    /// `||e|| / ||grad e||` at `t = 0`.
    pub initial_lambda_t: f64,
}

pub struct RunOutput {
    pub records: Vec<StepRecord<f64>>,
    pub diagnostics: Vec<StepDiagnostics<f64>>,
    pub summary: RunSummary,
}

/// Runs a twin experiment, handing each accepted step to `sink` as it is produced.
pub fn run_twin_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<RunSummary>
where
    F: FnMut(&StepRecord<f64>, &StepDiagnostics<f64>) -> Result<()>,
{
    cfg.validate()?;
    let steps = cfg.steps()?;
    let grid = Grid::new(cfg.grid_n, cfg.length)?;
    let solver = SolverConfig::new(cfg.nu, cfg.dt, grid.clone(), cfg.model)?;
    let observer = cfg.observer.build(cfg.length)?;
    let mut truth = Truth::new(cfg, &grid)?;

    let u0 = truth.full().restrict(&grid)?;
    let v0 = match cfg.v0 {
        InitialSpec::Zero => SpectralField::zeros(&grid),
        InitialSpec::Truth => u0.clone(),
        InitialSpec::Perturbed {
            seed,
            amplitude,
            max_mode,
        } => &u0 + &random_solenoidal(&grid, &mut ChaCha8Rng::seed_from_u64(seed), max_mode, amplitude),
    };
    let u0_sq = truth.full().l2_norm_sq();
    let e0 = &u0 - &v0;
    let initial_err = (e0.l2_norm_sq() + (u0_sq - u0.l2_norm_sq()).max(0.0)).sqrt();
    let initial_lambda_t = e0.norms().lambda_t;

    let mut run = Assimilation::new(solver, observer, cfg.controller, v0, &u0)?;
    let mut grad_stats = GradientAverage::new(truth.full().h1_seminorm_sq());
    let mut last = None;
    let (mut chi_max, mut chi_sum, mut repeats, mut forced) = (0.0_f64, 0.0, 0, 0);

    for step in 1..=steps {
        truth.advance(step)?;
        let full = truth.full();
        if !full.is_finite() {
            return Err(Error::Numerical(format!("truth became non-finite at step {step}")));
        }
        grad_stats.push(full.h1_seminorm_sq());
        let coarse = full.restrict(&grid)?;
        let sample = TruthSample {
            coarse: &coarse,
            full_l2_sq: full.l2_norm_sq(),
        };
        let (record, diag) = run.step(&sample)?;
        chi_max = chi_max.max(record.chi);
        chi_sum += record.chi;
        repeats += record.repeats;
        forced += usize::from(diag.forced());
        sink(&record, &diag)?;
        last = Some(record);
    }

    let last = last.expect("at least one step");
    let (avg_grad_u_sq, avg_grad_u_4) = grad_stats.averages();
    Ok(RunSummary {
        steps,
        t_final: last.t,
        initial_err,
        initial_rel_err: if u0_sq > 0.0 { initial_err / u0_sq.sqrt() } else { 0.0 },
        final_err: last.err_l2,
        final_rel_err: last.rel_err,
        final_proj_err: last.proj_err,
        chi_max_observed: chi_max,
        chi_mean: chi_sum / steps as f64,
        total_repeats: repeats,
        forced_steps: forced,
        avg_grad_u_sq,
        avg_grad_u_4,
        initial_lambda_t,
    })
}

/// Runs a twin experiment and keeps every record in memory.
pub fn run_twin(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut records = vec![];
    let mut diagnostics = vec![];
    let summary = run_twin_with(cfg, |r, d| {
        records.push(*r);
        diagnostics.push(*d);
        Ok(())
    })?;
    Ok(RunOutput {
        records,
        diagnostics,
        summary,
    })
}

struct GradientAverage {
    prev: f64,
    sum_sq: f64,
    sum_4: f64,
    intervals: usize,
}

impl GradientAverage {
    fn new(g0: f64) -> Self {
        Self {
            prev: g0,
            sum_sq: 0.0,
            sum_4: 0.0,
            intervals: 0,
        }
    }

    fn push(&mut self, g: f64) {
        self.sum_sq += 0.5 * (self.prev + g);
        self.sum_4 += 0.5 * (self.prev * self.prev + g * g);
        self.prev = g;
        self.intervals += 1;
    }

    fn averages(&self) -> (f64, f64) {
        let n = self.intervals.max(1) as f64;
        (self.sum_sq / n, self.sum_4 / n)
    }
}

/// One line of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub final_err: f64,
    /// `log2(err(2 dt) / err(dt))` against the previous row; absent on the first.
    pub rate: Option<f64>,
    pub chi_max: f64,
}

/// Repeats `base` for each step size (in parallel) and tabulates final errors.
pub fn run_convergence(base: &ExperimentConfig, dt_list: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if base.truth != TruthSpec::Analytic {
        return Err(Error::Config("convergence studies need an analytic truth".into()));
    }
    if dt_list.is_empty() {
        return Err(Error::Config("empty dt_list".into()));
    }
    let summaries: Vec<RunSummary> = dt_list
        .par_iter()
        .map(|&dt| {
            let cfg = ExperimentConfig {
                dt,
                output_path: None,
                ..base.clone()
            };
            run_twin_with(&cfg, |_, _| Ok(()))
        })
        .collect::<Result<_>>()?;
    Ok(convergence_rows(dt_list, &summaries))
}

fn convergence_rows(dt_list: &[f64], summaries: &[RunSummary]) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dt_list.len());
    for (&dt, s) in dt_list.iter().zip(summaries) {
        let rate = rows.last().map(|prev| (prev.final_err / s.final_err).log2() / (prev.dt / dt).log2());
        rows.push(ConvergenceRow {
            dt,
            final_err: s.final_err,
            rate,
            chi_max: s.chi_max_observed,
        });
    }
    rows
}

/// Evaluates the parameter conditions for a finished run.
///
/// The nudging parameter is the time-averaged accepted `chi`; the target
/// decay rate is `chi0` for the adaptive controllers and 1 for a constant one.
pub fn condition_report(cfg: &ExperimentConfig, summary: &RunSummary) -> Result<ConditionReport> {
    let observer = cfg.observer.build(cfg.length)?;
    let target = match cfg.controller.kind {
        ControllerKind::Constant => 1.0,
        _ => cfg.controller.chi0,
    };
    let inputs = ConditionInputs {
        nu: cfg.nu,
        chi: summary.chi_mean,
        chi0: target,
        c1: observer.c1(),
        h: observer.h(),
        avg_grad_sq: summary.avg_grad_u_sq,
        avg_grad_4: summary.avg_grad_u_4,
        lambda_t: Some(summary.initial_lambda_t),
    };
    // large scales: the domain and the rms velocity implied by the gradient level
    let area = cfg.length * cfg.length;
    let k1 = std::f64::consts::TAU / cfg.length;
    let velocity = (summary.avg_grad_u_sq / area).sqrt() / k1;
    let scales = if velocity > 0.0 {
        let kf = k1 * cfg.model.forcing_mode() as f64;
        Some(FlowScales::new(cfg.length, velocity, cfg.nu, Some(kf))?)
    } else {
        None
    };
    conditions::evaluate(inputs, scales.as_ref())
}
