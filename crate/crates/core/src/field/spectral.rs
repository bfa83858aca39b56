use std::ops::{Add, Mul, Neg, Sub};

use rustfft::num_complex::Complex;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gridded real samples of both velocity components, row-major `iy * n + ix`.
pub type Samples<T> = [Vec<T>; 2];

/// Norms of a vector field together with its Taylor-type length scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport<T> {
    /// `||w||`
    pub l2: T,
    /// `||grad w||`
    pub h1semi: T,
    /// `||w|| / ||grad w||`, infinite when the gradient vanishes.
    pub lambda_t: T,
}

/// Periodic 2D velocity field stored as Fourier coefficients of both components.
///
/// Coefficients follow the normalization `w(x) = sum_k c_k exp(i k.x)`, so that
/// `||w||^2 = |Omega| sum_k |c_k|^2` holds exactly for the grid quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: Grid<T>,
    comps: [Vec<Complex<T>>; 2],
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let zero = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        Self {
            grid: grid.clone(),
            comps: [zero.clone(), zero],
        }
    }

    /// Builds a field directly from coefficient arrays.
    pub fn from_coeffs(grid: &Grid<T>, comps: [Vec<Complex<T>>; 2]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::SizeMismatch {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    pub fn from_physical(grid: &Grid<T>, samples: &Samples<T>) -> Result<Self> {
        let mut comps: [Vec<Complex<T>>; 2] = [Vec::new(), Vec::new()];
        for (dst, src) in comps.iter_mut().zip(samples) {
            if src.len() != grid.len() {
                return Err(Error::SizeMismatch {
                    expected: grid.len(),
                    got: src.len(),
                });
            }
            *dst = scalar_forward(grid, src);
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    /// Samples `f(x, y)` on the grid points and transforms.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> (T, T)) -> Self {
        let n = grid.n();
        let mut sx = vec![T::zero(); grid.len()];
        let mut sy = vec![T::zero(); grid.len()];
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                let (a, b) = f(grid.coord(ix), y);
                sx[iy * n + ix] = a;
                sy[iy * n + ix] = b;
            }
        }
        Self::from_physical(grid, &[sx, sy]).expect("sizes match by construction")
    }

    pub fn to_physical(&self) -> Samples<T> {
        [
            scalar_inverse(&self.grid, &self.comps[0]),
            scalar_inverse(&self.grid, &self.comps[1]),
        ]
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[Complex<T>] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        &mut self.comps[c]
    }

    /// Coefficient pair at storage indices `(ix, iy)`.
    #[inline]
    pub fn coeff(&self, ix: usize, iy: usize) -> [Complex<T>; 2] {
        let i = iy * self.grid.n() + ix;
        [self.comps[0][i], self.comps[1][i]]
    }

    #[inline]
    pub fn set_coeff(&mut self, ix: usize, iy: usize, value: [Complex<T>; 2]) {
        let i = iy * self.grid.n() + ix;
        self.comps[0][i] = value[0];
        self.comps[1][i] = value[1];
    }

    /// Mean (bulk) velocity, the `k = 0` coefficient.
    pub fn mean(&self) -> [T; 2] {
        [self.comps[0][0].re, self.comps[1][0].re]
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Applies `f(ix, iy, coeffs)` to every mode in place.
    pub(crate) fn map_modes(&mut self, mut f: impl FnMut(usize, usize, [Complex<T>; 2]) -> [Complex<T>; 2]) {
        let n = self.grid.n();
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let out = f(ix, iy, [self.comps[0][i], self.comps[1][i]]);
                self.comps[0][i] = out[0];
                self.comps[1][i] = out[1];
            }
        }
    }

    /// Real part of the L^2 inner product `(self, other)`.
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        let mut acc = T::zero();
        for c in 0..2 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                acc = acc + a.re * b.re + a.im * b.im;
            }
        }
        acc * self.grid.area()
    }

    pub fn l2_norm_sq(&self) -> T {
        let mut acc = T::zero();
        for c in &self.comps {
            for z in c {
                acc = acc + z.norm_sqr();
            }
        }
        acc * self.grid.area()
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// `||grad w||^2`, full (Frobenius) gradient.
    pub fn h1_seminorm_sq(&self) -> T {
        let n = self.grid.n();
        let mut acc = T::zero();
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let e = self.comps[0][i].norm_sqr() + self.comps[1][i].norm_sqr();
                acc = acc + self.grid.k_sq(ix, iy) * e;
            }
        }
        acc * self.grid.area()
    }

    pub fn h1_seminorm(&self) -> T {
        self.h1_seminorm_sq().sqrt()
    }

    pub fn norms(&self) -> NormReport<T> {
        let l2 = self.l2_norm();
        let h1semi = self.h1_seminorm();
        let lambda_t = if h1semi > T::zero() {
            l2 / h1semi
        } else {
            T::infinity()
        };
        NormReport {
            l2,
            h1semi,
            lambda_t,
        }
    }

    /// `max_k |k . c_k|`.
    pub fn divergence_residual(&self) -> T {
        let n = self.grid.n();
        let mut worst = T::zero();
        for iy in 0..n {
            for ix in 0..n {
                let [a, b] = self.coeff(ix, iy);
                let d = a * self.grid.wavenumber(ix) + b * self.grid.wavenumber(iy);
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn is_divergence_free(&self, rel_tol: T) -> bool {
        self.divergence_residual() <= rel_tol * self.l2_norm()
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn conjugate_symmetry_defect(&self) -> T {
        let n = self.grid.n();
        let mut worst = T::zero();
        for c in &self.comps {
            for iy in 0..n {
                for ix in 0..n {
                    let j = self.grid.conj_index(iy) * n + self.grid.conj_index(ix);
                    worst = worst.max((c[iy * n + ix] - c[j].conj()).norm());
                }
            }
        }
        worst
    }

    /// Restores exact conjugate symmetry by averaging each mode with its partner.
    pub fn symmetrize(&mut self) {
        let n = self.grid.n();
        let half = T::of(0.5);
        for c in self.comps.iter_mut() {
            let old = c.clone();
            for iy in 0..n {
                for ix in 0..n {
                    let j = self.grid.conj_index(iy) * n + self.grid.conj_index(ix);
                    c[iy * n + ix] = (old[iy * n + ix] + old[j].conj()) * half;
                }
            }
        }
    }

    /// Orthogonal projection onto divergence-free fields.
    ///
    /// Modes on a Nyquist row or column are removed: their aliased partner
    /// uses a different wavevector, so no real solenoidal field lives there.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        let g = self.grid.clone();
        out.map_modes(|ix, iy, [a, b]| {
            if g.is_nyquist(ix) || g.is_nyquist(iy) {
                return [Complex::new(T::zero(), T::zero()); 2];
            }
            if ix == 0 && iy == 0 {
                return [a, b];
            }
            let kx = g.wavenumber(ix);
            let ky = g.wavenumber(iy);
            let d = (a * kx + b * ky) / (kx * kx + ky * ky);
            [a - d * kx, b - d * ky]
        });
        out
    }

    /// 2/3-rule truncation: zero every mode with `3 max(|m1|, |m2|) > n`.
    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        let g = self.grid.clone();
        out.map_modes(|ix, iy, c| {
            if g.is_dealiased(ix) || g.is_dealiased(iy) {
                [Complex::new(T::zero(), T::zero()); 2]
            } else {
                c
            }
        });
        out
    }

    /// Spectral derivative of component `comp` along `axis` (0 = x, 1 = y).
    pub(crate) fn derivative(&self, comp: usize, axis: usize) -> Vec<Complex<T>> {
        let n = self.grid.n();
        let mut out = self.comps[comp].clone();
        for iy in 0..n {
            for ix in 0..n {
                let i_axis = if axis == 0 { ix } else { iy };
                let v = &mut out[iy * n + ix];
                if self.grid.is_nyquist(i_axis) {
                    *v = Complex::new(T::zero(), T::zero());
                } else {
                    let k = self.grid.wavenumber(i_axis);
                    *v = Complex::new(-v.im * k, v.re * k);
                }
            }
        }
        out
    }

    /// Physical samples of `d w_comp / d x_axis` for all four combinations,
    /// indexed `[comp][axis]`.
    pub fn gradient_physical(&self) -> [[Vec<T>; 2]; 2] {
        let d = |c, a| scalar_inverse(&self.grid, &self.derivative(c, a));
        [[d(0, 0), d(0, 1)], [d(1, 0), d(1, 1)]]
    }

    /// Spectral truncation onto a grid with the same domain and `n` no larger.
    ///
    /// Modes on the target Nyquist lines are dropped so the result stays real.
    /// On an identical grid this is the identity.
    pub fn restrict(&self, target: &Grid<T>) -> Result<Self> {
        if target.length() != self.grid.length() || target.n() > self.grid.n() {
            return Err(Error::GridMismatch(format!(
                "cannot restrict {:?} onto {:?}",
                self.grid, target
            )));
        }
        if *target == self.grid {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(target);
        let nt = target.n();
        let ns = self.grid.n();
        for iy in 0..nt {
            if target.is_nyquist(iy) {
                continue;
            }
            let sy = self.grid.index_of(target.mode(iy)).expect("coarse mode exists on fine grid");
            for ix in 0..nt {
                if target.is_nyquist(ix) {
                    continue;
                }
                let sx = self.grid.index_of(target.mode(ix)).expect("coarse mode exists on fine grid");
                for c in 0..2 {
                    out.comps[c][iy * nt + ix] = self.comps[c][sy * ns + sx];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for z in c.iter_mut() {
                *z = *z * s;
            }
        }
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: T, x: &Self) {
        assert_eq!(self.grid, x.grid, "axpy across grids");
        for c in 0..2 {
            for (y, xv) in self.comps[c].iter_mut().zip(&x.comps[c]) {
                *y = *y + *xv * a;
            }
        }
    }

    /// `a * x + b * y`.
    pub fn lin_comb(a: T, x: &Self, b: T, y: &Self) -> Self {
        let mut out = x.scale(a);
        out.axpy(b, y);
        out
    }

    /// Largest coefficient-wise difference, used for exact-identity checks.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid);
        let mut worst = T::zero();
        for c in 0..2 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                worst = worst.max((*a - *b).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

impl<T: Real> Grid<T> {
    /// Whether storage index `i` lies outside the 2/3-rule band.
    #[inline]
    pub fn is_dealiased(&self, i: usize) -> bool {
        3 * self.mode(i).unsigned_abs() as usize > self.n()
    }
}

pub(crate) fn scalar_forward<T: Real>(grid: &Grid<T>, samples: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = samples.iter().map(|&x| Complex::new(x, T::zero())).collect();
    grid.forward(&mut buf);
    buf
}

pub(crate) fn scalar_inverse<T: Real>(grid: &Grid<T>, coeffs: &[Complex<T>]) -> Vec<T> {
    let mut buf = coeffs.to_vec();
    grid.inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

impl<T: Real> Add for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn add(self, rhs: Self) -> SpectralField<T> {
        let mut out = self.clone();
        out.axpy(T::one(), rhs);
        out
    }
}

impl<T: Real> Sub for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn sub(self, rhs: Self) -> SpectralField<T> {
        let mut out = self.clone();
        out.axpy(-T::one(), rhs);
        out
    }
}

impl<T: Real> Mul<T> for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn mul(self, s: T) -> SpectralField<T> {
        self.scale(s)
    }
}

impl<T: Real> Neg for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn neg(self) -> SpectralField<T> {
        self.scale(-T::one())
    }
}
