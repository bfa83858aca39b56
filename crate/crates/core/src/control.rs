//! Nudging-parameter controllers and the assimilation step that drives them.
//!
//! Two self-adaptive rules are provided next to a constant parameter:
//!
//! * [`ControllerKind::Algo1`] watches the observable error `||I_H e||`
//!   between consecutive steps: it doubles `chi` and repeats the step when the
//!   estimator grows by at least `factor`, and halves `chi` for the following
//!   step when it drops below `tol` times its previous value.
//! * [`ControllerKind::Algo2`] keeps the per-step decay margin
//!   `chi - (1/(2 nu)) avg ||grad v||^2` inside `[chi0, 2 chi0]`, resetting
//!   `chi` to `1.1 chi0 + Q` when it leaves the band.
//!
//! Every emitted `chi` lies in `[chi0, chi_max]`. Repeat loops are bounded by
//! `max_repeats`; running out of repeats or hitting `chi_max` forces
//! acceptance and is reported through [`StepOutcome::exhausted`] and
//! [`StepOutcome::clamped`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::observation::ObservationOperator;
use crate::scalar::Real;
use crate::solver::{bdf2_step, NudgeTerm, SolverConfig, SolverState};

/// `2048 / 19683`, the 3d Ladyzhenskaya/Young constant.
pub const CUBIC_COUPLING: f64 = 2048.0 / 19683.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Constant,
    Algo1,
    Algo2,
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "algo1" => Ok(Self::Algo1),
            "algo2" => Ok(Self::Algo2),
            other => Err(Error::Config(format!(
                "unknown controller '{other}' (expected constant, algo1 or algo2)"
            ))),
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Algo1 => "algo1",
            Self::Algo2 => "algo2",
        })
    }
}

fn default_chi_max() -> f64 {
    1.0e6
}
fn default_factor() -> f64 {
    1.3
}
fn default_tol() -> f64 {
    0.2
}
fn default_max_repeats() -> usize {
    25
}

/// Controller parameters. For `constant`, `chi0` is the fixed parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub chi0: f64,
    #[serde(default = "default_chi_max")]
    pub chi_max: f64,
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_repeats")]
    pub max_repeats: usize,
}

impl ControllerConfig {
    pub fn constant(chi: f64) -> Self {
        Self {
            kind: ControllerKind::Constant,
            chi0: chi,
            chi_max: default_chi_max().max(chi),
            factor: default_factor(),
            tol: default_tol(),
            max_repeats: default_max_repeats(),
        }
    }

    pub fn algo1(chi0: f64, factor: f64, tol: f64) -> Self {
        Self {
            kind: ControllerKind::Algo1,
            factor,
            tol,
            ..Self::constant(chi0)
        }
    }

    pub fn algo2(chi0: f64) -> Self {
        Self {
            kind: ControllerKind::Algo2,
            ..Self::constant(chi0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.chi0 > 0.0) || !self.chi0.is_finite() {
            return bad(format!("chi0 must be positive, got {}", self.chi0));
        }
        if !(self.chi_max >= self.chi0) {
            return bad(format!("chi_max {} below chi0 {}", self.chi_max, self.chi0));
        }
        if !(self.factor >= 1.0) {
            return bad(format!("factor must be >= 1, got {}", self.factor));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        Ok(())
    }

    fn clamp<T: Real>(&self, chi: T) -> T {
        chi.max(T::of(self.chi0)).min(T::of(self.chi_max))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState<T> {
    /// Parameter used for the current (or last accepted) step.
    pub chi_n: T,
    /// `||I_H e(t_n)||` at the last accepted step.
    pub prev_estimator: T,
    /// Parameter scheduled for the next step by an accept-then decision.
    pub next_chi: Option<T>,
    pub repeats_used: usize,
}

impl<T: Real> ControllerState<T> {
    pub fn new(cfg: &ControllerConfig, initial_estimator: T) -> Self {
        Self {
            chi_n: T::of(cfg.chi0),
            prev_estimator: initial_estimator,
            next_chi: None,
            repeats_used: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision<T> {
    Accept,
    RepeatWith(T),
    AcceptThen(T),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub decision: Decision<T>,
    /// Estimator ratio (Algorithm 1) or band quantity `Q` (Algorithm 2).
    pub diagnostic: T,
    /// A repeat was called for but the budget was spent.
    pub exhausted: bool,
    /// A repeat was called for but `chi` already sits at `chi_max`.
    pub clamped: bool,
}

impl<T: Real> StepOutcome<T> {
    fn plain(decision: Decision<T>, diagnostic: T) -> Self {
        Self {
            decision,
            diagnostic,
            exhausted: false,
            clamped: false,
        }
    }

    /// Accepted only because no further repeat was possible.
    pub fn forced(&self) -> bool {
        self.exhausted || self.clamped
    }

    fn repeat_or_force(state: &ControllerState<T>, cfg: &ControllerConfig, target: T, diagnostic: T) -> Self {
        if state.repeats_used >= cfg.max_repeats {
            return Self {
                exhausted: true,
                ..Self::plain(Decision::Accept, diagnostic)
            };
        }
        if target <= state.chi_n {
            return Self {
                clamped: true,
                ..Self::plain(Decision::Accept, diagnostic)
            };
        }
        Self::plain(Decision::RepeatWith(target), diagnostic)
    }
}

fn check_nonnegative<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {x}")))
    }
}

/// Algorithm 1 decision from consecutive observable-error estimates.
///
/// A vanishing previous estimate carries no information: growth from zero
/// still doubles `chi`, but halving needs `est_prev > 0`.
pub fn algo1_decide<T: Real>(
    state: &ControllerState<T>,
    est_prev: T,
    est_new: T,
    cfg: &ControllerConfig,
) -> Result<StepOutcome<T>> {
    check_nonnegative("est_prev", est_prev)?;
    check_nonnegative("est_new", est_new)?;
    let ratio = if est_prev > T::zero() {
        est_new / est_prev
    } else {
        T::infinity()
    };
    let chi = state.chi_n;
    if est_new > T::zero() && est_new >= T::of(cfg.factor) * est_prev {
        let target = cfg.clamp(chi + chi);
        return Ok(StepOutcome::repeat_or_force(state, cfg, target, ratio));
    }
    if est_prev > T::zero() && est_new <= T::of(cfg.tol) * est_prev {
        let target = cfg.clamp(chi * T::of(0.5));
        return Ok(StepOutcome::plain(Decision::AcceptThen(target), ratio));
    }
    Ok(StepOutcome::plain(Decision::Accept, ratio))
}

/// `Q = (1/(2 nu)) (g_n + g_np1) / 2`, the trapezoidal average of
/// `(1/(2 nu)) ||grad v||^2` over one step.
pub fn trapezoid_band<T: Real>(nu: T, tau: T, g_n: T, g_np1: T) -> T {
    debug_assert!(nu > T::zero() && tau > T::zero());
    let half = T::of(0.5);
    half / nu * (g_n + g_np1) * half
}

/// 3d replacement for [`trapezoid_band`]: `(2048/19683) nu^-3 (g4_n + g4_np1) / 2`
/// with `g4 = ||grad v||^4`.
pub fn algo2_band_3d<T: Real>(nu: T, tau: T, g4_n: T, g4_np1: T) -> T {
    debug_assert!(nu > T::zero() && tau > T::zero());
    T::of(2048.0) * (g4_n + g4_np1) * T::of(0.5) / (T::of(19683.0) * nu * nu * nu)
}

/// Algorithm 2 decision from the band quantity `Q` of the step just taken.
pub fn algo2_decide<T: Real>(state: &ControllerState<T>, q: T, cfg: &ControllerConfig) -> Result<StepOutcome<T>> {
    check_nonnegative("Q", q)?;
    let chi0 = T::of(cfg.chi0);
    let margin = state.chi_n - q;
    let reset = cfg.clamp(T::of(1.1) * chi0 + q);
    if margin < chi0 {
        return Ok(StepOutcome::repeat_or_force(state, cfg, reset, q));
    }
    if margin > chi0 + chi0 {
        return Ok(StepOutcome::plain(Decision::AcceptThen(reset), q));
    }
    Ok(StepOutcome::plain(Decision::Accept, q))
}

/// One CSV row: the accepted values of a time step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub step: usize,
    pub t: T,
    pub chi: T,
    pub err_l2: T,
    pub rel_err: T,
    pub proj_err: T,
    pub rel_proj_err: T,
    pub grad_v_sq: T,
    pub repeats: usize,
}

/// Controller internals of an accepted step, kept out of the CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics<T> {
    pub est_prev: T,
    pub est_new: T,
    /// Band quantity `Q` for Algorithm 2.
    pub band: Option<T>,
    pub exhausted: bool,
    pub clamped: bool,
}

impl<T: Real> StepDiagnostics<T> {
    pub fn forced(&self) -> bool {
        self.exhausted || self.clamped
    }
}

/// Truth at the new time level as seen by the assimilating model.
#[derive(Clone, Copy, Debug)]
pub struct TruthSample<'a, T: Real> {
    /// Truth restricted to the assimilation grid.
    pub coarse: &'a SpectralField<T>,
    /// `||u||^2` of the full (possibly finer) truth.
    pub full_l2_sq: T,
}

impl<'a, T: Real> TruthSample<'a, T> {
    /// Truth that lives on the assimilation grid already.
    pub fn resolved(u: &'a SpectralField<T>) -> Self {
        Self {
            coarse: u,
            full_l2_sq: u.l2_norm_sq(),
        }
    }
}

pub struct AssimilatedStep<T: Real> {
    pub state: SolverState<T>,
    pub controller: ControllerState<T>,
    pub record: StepRecord<T>,
    pub diagnostics: StepDiagnostics<T>,
}

/// Advances the nudged model one step, repeating it from the checkpoint
/// `state` while the controller asks for a larger `chi`.
pub fn assimilate_step<T: Real>(
    truth: &TruthSample<'_, T>,
    state: &SolverState<T>,
    controller: &ControllerState<T>,
    observer: &ObservationOperator<T>,
    solver_cfg: &SolverConfig<T>,
    controller_cfg: &ControllerConfig,
) -> Result<AssimilatedStep<T>> {
    let mut ctrl = controller.clone();
    ctrl.repeats_used = 0;
    ctrl.chi_n = match controller_cfg.kind {
        ControllerKind::Constant => T::of(controller_cfg.chi0),
        _ => controller_cfg.clamp(ctrl.next_chi.take().unwrap_or(ctrl.chi_n)),
    };
    ctrl.next_chi = None;
    let est_prev = ctrl.prev_estimator;
    let g_n = state.v_now.h1_seminorm_sq();

    loop {
        let nudge = NudgeTerm {
            chi: ctrl.chi_n,
            observer,
            data: truth.coarse,
        };
        let next = bdf2_step(state, solver_cfg, Some(&nudge))?;
        let err = truth.coarse - &next.v_now;
        let est_new = observer.project(&err)?.l2_norm();
        let g_np1 = next.v_now.h1_seminorm_sq();
        if !(est_new.is_finite() && g_np1.is_finite()) {
            return Err(Error::Numerical(format!(
                "assimilated state diverged at step {} (chi = {})",
                next.step_index, ctrl.chi_n
            )));
        }
        let mut band = None;
        let outcome = match controller_cfg.kind {
            ControllerKind::Constant => StepOutcome::plain(Decision::Accept, T::zero()),
            ControllerKind::Algo1 => algo1_decide(&ctrl, est_prev, est_new, controller_cfg)?,
            ControllerKind::Algo2 => {
                let q = trapezoid_band(solver_cfg.nu, solver_cfg.dt, g_n, g_np1);
                band = Some(q);
                algo2_decide(&ctrl, q, controller_cfg)?
            }
        };
        match outcome.decision {
            Decision::RepeatWith(chi) => {
                ctrl.repeats_used += 1;
                ctrl.chi_n = chi;
                continue;
            }
            Decision::Accept => {}
            Decision::AcceptThen(chi) => ctrl.next_chi = Some(chi),
        }
        ctrl.prev_estimator = est_new;

        let unresolved = (truth.full_l2_sq - truth.coarse.l2_norm_sq()).max(T::zero());
        let err_l2 = (err.l2_norm_sq() + unresolved).sqrt();
        let truth_l2 = truth.full_l2_sq.sqrt();
        let relative = |x: T| {
            if truth_l2 > T::zero() {
                x / truth_l2
            } else if x == T::zero() {
                T::zero()
            } else {
                T::infinity()
            }
        };
        let record = StepRecord {
            step: next.step_index,
            t: next.t,
            chi: ctrl.chi_n,
            err_l2,
            rel_err: relative(err_l2),
            proj_err: est_new,
            rel_proj_err: relative(est_new),
            grad_v_sq: g_np1,
            repeats: ctrl.repeats_used,
        };
        let diagnostics = StepDiagnostics {
            est_prev,
            est_new,
            band,
            exhausted: outcome.exhausted,
            clamped: outcome.clamped,
        };
        return Ok(AssimilatedStep {
            state: next,
            controller: ctrl,
            record,
            diagnostics,
        });
    }
}

/// Owning session around [`assimilate_step`].
pub struct Assimilation<T: Real> {
    solver: SolverConfig<T>,
    observer: ObservationOperator<T>,
    controller_cfg: ControllerConfig,
    state: SolverState<T>,
    controller: ControllerState<T>,
}

impl<T: Real> Assimilation<T> {
    /// `u0` is the truth at `t = 0` on the assimilation grid.
    pub fn new(
        solver: SolverConfig<T>,
        observer: ObservationOperator<T>,
        controller_cfg: ControllerConfig,
        v0: SpectralField<T>,
        u0: &SpectralField<T>,
    ) -> Result<Self> {
        controller_cfg.validate()?;
        observer.check_grid(&solver.grid)?;
        v0.check_grid(u0)?;
        let state = SolverState::new(v0);
        let est0 = observer.project(&(u0 - &state.v_now))?.l2_norm();
        Ok(Self {
            controller: ControllerState::new(&controller_cfg, est0),
            solver,
            observer,
            controller_cfg,
            state,
        })
    }

    pub fn step(&mut self, truth: &TruthSample<'_, T>) -> Result<(StepRecord<T>, StepDiagnostics<T>)> {
        let out = assimilate_step(
            truth,
            &self.state,
            &self.controller,
            &self.observer,
            &self.solver,
            &self.controller_cfg,
        )?;
        self.state = out.state;
        self.controller = out.controller;
        Ok((out.record, out.diagnostics))
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn controller(&self) -> &ControllerState<T> {
        &self.controller
    }

    pub fn observer(&self) -> &ObservationOperator<T> {
        &self.observer
    }

    pub fn solver(&self) -> &SolverConfig<T> {
        &self.solver
    }
}
