//! BDF2 time stepping for the 2D incompressible Navier-Stokes equations and
//! their nudged counterpart.
//!
//! Each step solves, mode by mode,
//!
//! ```text
//! (3 v1 - 4 v0 + v_) / (2 dt) + N(v*) + nu A v1 + chi I_H v1 = f1 + chi I_H u1
//! ```
//!
//! with `v* = 2 v0 - v_`, `N` the dealiased skew-symmetric advection and `A`
//! the spectral Laplacian. The very first step is a backward Euler step.
//! Pressure never appears: every right-hand side is Leray-projected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{scalar_forward, Grid, SpectralField};
use crate::observation::ObservationOperator;
use crate::scalar::Real;

fn default_kf() -> u32 {
    4
}

fn default_one() -> f64 {
    1.0
}

/// Body force driving the flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingSpec {
    /// Forcing of the periodic manufactured solution `e^t (cos 2 pi y, sin 2 pi x)`.
    ManufacturedPeriodic,
    /// Same profile with `e^t` replaced by `1 + t`; BDF2 reproduces it exactly.
    ManufacturedLinear,
    /// No forcing; the analytic truth is the decaying Taylor-Green vortex.
    TaylorGreenZero,
    /// `amplitude * min(1, t / ramp) * (sin(2 pi k_f y / l), 0)`.
    Kolmogorov {
        #[serde(default = "default_kf")]
        k_f: u32,
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_one")]
        ramp: f64,
    },
}

impl ForcingSpec {
    pub fn kolmogorov() -> Self {
        ForcingSpec::Kolmogorov {
            k_f: 4,
            amplitude: 1.0,
            ramp: 1.0,
        }
    }

    /// Whether a closed-form solution is available for this forcing.
    pub fn has_analytic_truth(&self) -> bool {
        !matches!(self, ForcingSpec::Kolmogorov { .. })
    }

    /// Forcing wavenumber index (the energy-input scale).
    pub fn forcing_mode(&self) -> u32 {
        match self {
            ForcingSpec::Kolmogorov { k_f, .. } => *k_f,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ForcingSpec::Kolmogorov {
            k_f,
            amplitude,
            ramp,
        } = *self
        {
            if k_f == 0 {
                return Err(Error::Config("kolmogorov k_f must be a positive integer".into()));
            }
            if !amplitude.is_finite() || !(ramp >= 0.0) {
                return Err(Error::Config(format!(
                    "kolmogorov amplitude {amplitude} / ramp {ramp} invalid"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T: Real> {
    pub nu: T,
    pub dt: T,
    pub grid: Grid<T>,
    pub forcing: ForcingSpec,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(nu: T, dt: T, grid: Grid<T>, forcing: ForcingSpec) -> Result<Self> {
        if !(nu > T::zero()) || !(dt > T::zero()) {
            return Err(Error::Config(format!(
                "viscosity and time step must be positive (nu = {nu}, dt = {dt})"
            )));
        }
        forcing.validate()?;
        Ok(Self {
            nu,
            dt,
            grid,
            forcing,
        })
    }
}

/// Two time levels plus clock, as needed by the two-step scheme.
///
/// The clock is `t = step_index * dt`, recomputed each step so it does not drift.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T: Real> {
    pub v_now: SpectralField<T>,
    pub v_prev: SpectralField<T>,
    pub t: T,
    pub step_index: usize,
}

impl<T: Real> SolverState<T> {
    /// Starts at `t = 0`; the initial field is projected onto solenoidal fields.
    pub fn new(v0: SpectralField<T>) -> Self {
        let v0 = v0.leray_project();
        Self {
            v_prev: v0.clone(),
            v_now: v0,
            t: T::zero(),
            step_index: 0,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.v_now.grid()
    }
}

/// Nudging contribution `chi I_H (u - v)` for one step.
#[derive(Clone, Copy, Debug)]
pub struct NudgeTerm<'a, T: Real> {
    pub chi: T,
    pub observer: &'a ObservationOperator<T>,
    /// Truth at the new time level, on the solver grid.
    pub data: &'a SpectralField<T>,
}

/// `b*(a, b, c) = (a.grad b, c)/2 - (a.grad c, b)/2`, by exact grid quadrature
/// of the dealiased fields.
pub fn trilinear_skew<T: Real>(
    a: &SpectralField<T>,
    b: &SpectralField<T>,
    c: &SpectralField<T>,
) -> Result<T> {
    a.check_grid(b)?;
    a.check_grid(c)?;
    let (a, b, c) = (a.dealias(), b.dealias(), c.dealias());
    let pa = a.to_physical();
    let pb = b.to_physical();
    let pc = c.to_physical();
    let gb = b.gradient_physical();
    let gc = c.gradient_physical();
    let half = T::of(0.5);
    let mut acc = T::zero();
    for x in 0..a.grid().len() {
        for i in 0..2 {
            let adv_b = pa[0][x] * gb[i][0][x] + pa[1][x] * gb[i][1][x];
            let adv_c = pa[0][x] * gc[i][0][x] + pa[1][x] * gc[i][1][x];
            acc = acc + half * (adv_b * pc[i][x] - adv_c * pb[i][x]);
        }
    }
    Ok(acc * a.grid().area() / T::of_usize(a.grid().len()))
}

/// Skew-symmetric advection `(a.grad b + div(b (x) a)) / 2`, dealiased and
/// not projected.
pub fn skew_advection<T: Real>(a: &SpectralField<T>, b: &SpectralField<T>) -> Result<SpectralField<T>> {
    a.check_grid(b)?;
    let grid = a.grid().clone();
    let (a, b) = (a.dealias(), b.dealias());
    let pa = a.to_physical();
    let pb = b.to_physical();
    let gb = b.gradient_physical();
    let len = grid.len();
    let half = T::of(0.5);
    let mut out = SpectralField::zeros(&grid);
    for i in 0..2 {
        let conv: Vec<T> = (0..len)
            .map(|x| pa[0][x] * gb[i][0][x] + pa[1][x] * gb[i][1][x])
            .collect();
        let flux = SpectralField::from_physical(
            &grid,
            &[
                (0..len).map(|x| pb[i][x] * pa[0][x]).collect(),
                (0..len).map(|x| pb[i][x] * pa[1][x]).collect(),
            ],
        )?;
        let ddx = flux.derivative(0, 0);
        let ddy = flux.derivative(1, 1);
        let conv = scalar_forward(&grid, &conv);
        for (k, dst) in out.component_mut(i).iter_mut().enumerate() {
            *dst = (conv[k] + ddx[k] + ddy[k]) * half;
        }
    }
    Ok(out.dealias())
}

/// Explicit nonlinearity `Pi N(v, v)` for a divergence-free field.
pub fn nonlinear_term<T: Real>(v: &SpectralField<T>) -> SpectralField<T> {
    skew_advection(v, v)
        .expect("same field on both slots")
        .leray_project()
}

fn manufactured_profile<T: Real>(forcing: ForcingSpec, t: T) -> Result<(T, T)> {
    match forcing {
        ForcingSpec::ManufacturedPeriodic => Ok((t.exp(), t.exp())),
        ForcingSpec::ManufacturedLinear => Ok((T::one() + t, T::one())),
        other => Err(Error::InvalidArgument(format!(
            "{other:?} has no manufactured solution"
        ))),
    }
}

fn unit_shear_pair<T: Real>(grid: &Grid<T>) -> SpectralField<T> {
    let k = grid.k_unit();
    SpectralField::from_fn(grid, |x, y| ((k * y).cos(), (k * x).sin()))
}

/// Periodic manufactured solution `a(t) (cos(2 pi y / l), sin(2 pi x / l))`.
pub fn manufactured_truth<T: Real>(forcing: ForcingSpec, grid: &Grid<T>, t: T) -> Result<SpectralField<T>> {
    let (amp, _) = manufactured_profile(forcing, t)?;
    Ok(unit_shear_pair(grid).scale(amp))
}

/// Leray-projected forcing consistent with [`manufactured_truth`]:
/// `u_t - nu lap u + Pi N(u, u)`.
pub fn manufactured_forcing<T: Real>(t: T, cfg: &SolverConfig<T>) -> Result<SpectralField<T>> {
    let (amp, amp_dt) = manufactured_profile(cfg.forcing, t)?;
    let k_sq = cfg.grid.k_unit() * cfg.grid.k_unit();
    let u = unit_shear_pair(&cfg.grid).scale(amp);
    let mut f = unit_shear_pair(&cfg.grid).scale(amp_dt + cfg.nu * k_sq * amp);
    f.axpy(T::one(), &nonlinear_term(&u));
    Ok(f)
}

/// Decaying Taylor-Green vortex `(-cos kx sin ky, sin kx cos ky) exp(-2 nu k^2 t)`.
pub fn taylor_green<T: Real>(grid: &Grid<T>, nu: T, t: T) -> SpectralField<T> {
    let k = grid.k_unit();
    let decay = (-T::of(2.0) * nu * k * k * t).exp();
    SpectralField::from_fn(grid, |x, y| {
        (
            -(k * x).cos() * (k * y).sin() * decay,
            (k * x).sin() * (k * y).cos() * decay,
        )
    })
}

/// Closed-form truth for forcings that have one.
pub fn analytic_truth<T: Real>(forcing: ForcingSpec, grid: &Grid<T>, nu: T, t: T) -> Result<SpectralField<T>> {
    match forcing {
        ForcingSpec::TaylorGreenZero => Ok(taylor_green(grid, nu, t)),
        ForcingSpec::Kolmogorov { .. } => Err(Error::Config(
            "kolmogorov forcing has no analytic truth; use a dns truth".into(),
        )),
        f => manufactured_truth(f, grid, t),
    }
}

/// Divergence-free body force at time `t`.
pub fn forcing_at<T: Real>(t: T, cfg: &SolverConfig<T>) -> Result<SpectralField<T>> {
    match cfg.forcing {
        ForcingSpec::ManufacturedPeriodic | ForcingSpec::ManufacturedLinear => manufactured_forcing(t, cfg),
        ForcingSpec::TaylorGreenZero => Ok(SpectralField::zeros(&cfg.grid)),
        ForcingSpec::Kolmogorov {
            k_f,
            amplitude,
            ramp,
        } => {
            let ramp_factor = if ramp > 0.0 {
                (t.as_f64() / ramp).min(1.0)
            } else {
                1.0
            };
            let a = T::of(amplitude * ramp_factor);
            let k = cfg.grid.k_unit() * T::of(k_f as f64);
            Ok(SpectralField::from_fn(&cfg.grid, |_, y| (a * (k * y).sin(), T::zero())).leray_project())
        }
    }
}

/// Advances the state by one step of size `cfg.dt`, optionally nudged.
pub fn bdf2_step<T: Real>(
    state: &SolverState<T>,
    cfg: &SolverConfig<T>,
    nudge: Option<&NudgeTerm<'_, T>>,
) -> Result<SolverState<T>> {
    if *state.grid() != cfg.grid {
        return Err(Error::GridMismatch(format!(
            "state on {:?}, solver on {:?}",
            state.grid(),
            cfg.grid
        )));
    }
    let dt = cfg.dt;
    let t_next = T::of_usize(state.step_index + 1) * dt;
    let f = forcing_at(t_next, cfg)?;

    let (alpha, gamma, weight, mut rhs) = if state.step_index == 0 {
        let n = nonlinear_term(&state.v_now);
        let mut rhs = state.v_now.clone();
        rhs.axpy(dt, &f);
        rhs.axpy(-dt, &n);
        (T::one(), dt * cfg.nu, dt, rhs)
    } else {
        let two = T::of(2.0);
        let v_star = SpectralField::lin_comb(two, &state.v_now, -T::one(), &state.v_prev);
        let n = nonlinear_term(&v_star);
        let mut rhs = SpectralField::lin_comb(T::of(4.0), &state.v_now, -T::one(), &state.v_prev);
        rhs.axpy(two * dt, &f);
        rhs.axpy(-two * dt, &n);
        (T::of(3.0), two * dt * cfg.nu, two * dt, rhs)
    };

    let v_next = match nudge {
        Some(term) => {
            if !(term.chi >= T::zero()) {
                return Err(Error::InvalidArgument(format!("nudging parameter {} < 0", term.chi)));
            }
            term.data.check_grid(&rhs)?;
            let beta = weight * term.chi;
            rhs.axpy(beta, &term.observer.nudge_source(term.data)?);
            term.observer.solve_nudged(&rhs.leray_project(), alpha, gamma, beta)?
        }
        None => {
            let mut v = rhs.leray_project();
            let g = cfg.grid.clone();
            v.map_modes(|ix, iy, [a, b]| {
                let d = alpha + gamma * g.k_sq(ix, iy);
                [a / d, b / d]
            });
            v
        }
    };

    if !v_next.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite velocity at t = {t_next} (step {})",
            state.step_index + 1
        )));
    }

    Ok(SolverState {
        v_prev: state.v_now.clone(),
        v_now: v_next,
        t: t_next,
        step_index: state.step_index + 1,
    })
}
