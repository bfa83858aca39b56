//! A-priori parameter conditions for nudging and their Reynolds-number scalings.
//!
//! Every check returns `(ok, slack)` where `slack` is the signed margin of the
//! inequality, so `ok == (slack >= 0)` (strict for the refined condition).
//! The scaling recommendations are phenomenological order-of-magnitude
//! estimates and are never enforced by the controllers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient of the time-averaged `||grad u||^2` term in the 2d chi condition
/// as used by the adaptive algorithm.
pub const CHI_2D_COEFFICIENT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowScales {
    pub length: f64,
    pub velocity: f64,
    pub nu: f64,
    /// Forcing wavenumber, needed for 2d scalings.
    pub kf: Option<f64>,
}

impl FlowScales {
    pub fn new(length: f64, velocity: f64, nu: f64, kf: Option<f64>) -> Result<Self> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
            }
        };
        positive("L", length)?;
        positive("U", velocity)?;
        positive("nu", nu)?;
        if let Some(k) = kf {
            positive("kf", k)?;
        }
        Ok(Self {
            length,
            velocity,
            nu,
            kf,
        })
    }

    /// Scales with prescribed Reynolds number, `L = U = 1`.
    pub fn from_reynolds(re: f64, kf: Option<f64>) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0 / re, kf)
    }

    pub fn reynolds(&self) -> f64 {
        self.length * self.velocity / self.nu
    }

    /// Large-scale turnover time `L / U`.
    pub fn turnover_time(&self) -> f64 {
        self.length / self.velocity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    Two,
    Three,
}

/// Indicative bounds: `chi >~ chi_min` and `H <~ h_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub dimension: u8,
    pub reynolds: f64,
    /// Nondimensional `chi T*`.
    pub chi_turnover: f64,
    pub chi_min: f64,
    /// `H / L`.
    pub h_over_l: f64,
    pub h_max: f64,
}

/// `nu - 2 c1^2 H^2 chi >= 0`.
pub fn h_condition(nu: f64, c1: f64, h: f64, chi: f64) -> (bool, f64) {
    let slack = nu - 2.0 * c1 * c1 * chi * h * h;
    (slack >= 0.0, slack)
}

/// Largest `chi` allowed by [`h_condition`].
pub fn h_condition_chi_limit(nu: f64, c1: f64, h: f64) -> f64 {
    nu / (2.0 * c1 * c1 * h * h)
}

/// `chi - coeff/nu * avg ||grad u||^2 >= chi0`, with `coeff` defaulting to
/// [`CHI_2D_COEFFICIENT`] in [`chi_condition_2d`].
pub fn chi_condition_2d_with(chi: f64, nu: f64, avg_grad_sq: f64, chi0: f64, coeff: f64) -> (bool, f64) {
    let slack = chi - coeff / nu * avg_grad_sq - chi0;
    (slack >= 0.0, slack)
}

pub fn chi_condition_2d(chi: f64, nu: f64, avg_grad_sq: f64, chi0: f64) -> (bool, f64) {
    chi_condition_2d_with(chi, nu, avg_grad_sq, chi0, CHI_2D_COEFFICIENT)
}

/// `(2048/19683) nu^-3 x`, evaluated so that `x = 19683/2048, nu = 1` gives exactly 1.
fn cubic_term(nu: f64, x: f64) -> f64 {
    2048.0 * x / (19683.0 * nu.powi(3))
}

/// `2 (chi - (2048/19683) nu^-3 avg ||grad u||^4) >= chi0`.
pub fn chi_condition_3d(chi: f64, nu: f64, avg_grad_4: f64, chi0: f64) -> (bool, f64) {
    let slack = 2.0 * (chi - cubic_term(nu, avg_grad_4)) - chi0;
    (slack >= 0.0, slack)
}

/// `2 (chi (1 - c1^2 (H/lambda_T)^2) - (2048/19683) nu^-3 avg ||grad u||^4) > 0`,
/// with `lambda_T` the micro-scale of the error.
pub fn refined_h_condition(chi: f64, nu: f64, c1: f64, h: f64, lambda_t: f64, avg_grad_4: f64) -> (bool, f64) {
    let ratio = h / lambda_t;
    let slack = 2.0 * (chi * (1.0 - c1 * c1 * ratio * ratio) - cubic_term(nu, avg_grad_4));
    (slack > 0.0, slack)
}

pub fn re_scalings(scales: &FlowScales, dim: Dimension) -> Result<Recommendation> {
    let re = scales.reynolds();
    let t_star = scales.turnover_time();
    let (chi_turnover, h_over_l, dimension) = match dim {
        Dimension::Two => {
            let kf = scales
                .kf
                .ok_or_else(|| Error::InvalidArgument("2d scalings need a forcing wavenumber kf".into()))?;
            let lk = scales.length * kf;
            (2.0 * lk.powf(1.5) * re.powf(1.5), re.powf(-1.25), 2)
        }
        Dimension::Three => (0.1 * re.powi(5), re.powi(-3), 3),
    };
    Ok(Recommendation {
        dimension,
        reynolds: re,
        chi_turnover,
        chi_min: chi_turnover / t_star,
        h_over_l,
        h_max: h_over_l * scales.length,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    pub slack: f64,
}

impl From<(bool, f64)> for Check {
    fn from((ok, slack): (bool, f64)) -> Self {
        Self { ok, slack }
    }
}

/// Inputs of a full condition evaluation for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub nu: f64,
    pub chi: f64,
    pub chi0: f64,
    pub c1: f64,
    pub h: f64,
    pub avg_grad_sq: f64,
    pub avg_grad_4: f64,
    /// Micro-scale `||e|| / ||grad e||` of the initial error, if defined.
    pub lambda_t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub inputs: ConditionInputs,
    pub h: Check,
    pub chi_limit_from_h: f64,
    pub chi2d: Check,
    pub chi3d: Check,
    pub refined: Option<Check>,
    pub recommendations: Vec<Recommendation>,
}

impl ConditionReport {
    pub fn h_ok(&self) -> bool {
        self.h.ok
    }
    pub fn chi2d_ok(&self) -> bool {
        self.chi2d.ok
    }
    pub fn chi3d_ok(&self) -> bool {
        self.chi3d.ok
    }
}

pub fn evaluate(inputs: ConditionInputs, scales: Option<&FlowScales>) -> Result<ConditionReport> {
    let i = inputs;
    let mut recommendations = vec![];
    if let Some(s) = scales {
        if s.kf.is_some() {
            recommendations.push(re_scalings(s, Dimension::Two)?);
        }
        recommendations.push(re_scalings(s, Dimension::Three)?);
    }
    Ok(ConditionReport {
        h: h_condition(i.nu, i.c1, i.h, i.chi).into(),
        chi_limit_from_h: h_condition_chi_limit(i.nu, i.c1, i.h),
        chi2d: chi_condition_2d(i.chi, i.nu, i.avg_grad_sq, i.chi0).into(),
        chi3d: chi_condition_3d(i.chi, i.nu, i.avg_grad_4, i.chi0).into(),
        refined: i
            .lambda_t
            .filter(|l| *l > 0.0 && l.is_finite())
            .map(|l| refined_h_condition(i.chi, i.nu, i.c1, i.h, l, i.avg_grad_4).into()),
        recommendations,
        inputs,
    })
}
