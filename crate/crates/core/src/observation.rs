//! Observation operators `I_H`: L^2 projections with a resolution length `H`
//! and an interpolation constant `C1` such that
//! `||(I - I_H) w|| <= C1 H ||grad w||`.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Grid, SpectralField};
use crate::scalar::Real;

/// Keeps the Fourier modes with `max(|m1|, |m2|) <= cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierLowPass<T> {
    cutoff: usize,
    h: T,
}

impl<T: Real> FourierLowPass<T> {
    pub fn new(cutoff: usize, length: T) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("Fourier cutoff must be positive".into()));
        }
        // smallest excluded wavenumber is 2 pi (K + 1) / l
        let h = length / (T::TAU() * T::of_usize(cutoff + 1));
        Ok(Self { cutoff, h })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    fn in_band(&self, grid: &Grid<T>, ix: usize, iy: usize) -> bool {
        let k = self.cutoff as u64;
        grid.mode(ix).unsigned_abs() <= k && grid.mode(iy).unsigned_abs() <= k
    }

    fn check(&self, grid: &Grid<T>) -> Result<()> {
        if 2 * self.cutoff >= grid.n() {
            return Err(Error::IncompatibleResolution(format!(
                "Fourier cutoff {} needs a grid with n > {}, got n = {}",
                self.cutoff,
                2 * self.cutoff,
                grid.n()
            )));
        }
        Ok(())
    }
}

/// Averages over `m x m` square cells (piecewise-constant L^2 projection).
///
/// The projection acts on grid samples, where block averaging is an exact
/// orthogonal projection for the quadrature inner product.
#[derive(Clone, Debug)]
pub struct CellAverage<T: Real> {
    cells: usize,
    h: T,
    factors: Arc<Mutex<Vec<Arc<CellSolveFactor>>>>,
}

impl<T: Real> CellAverage<T> {
    pub fn new(cells: usize, length: T) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("cell count must be positive".into()));
        }
        Ok(Self {
            cells,
            h: length * T::SQRT_2() / T::of_usize(cells),
            factors: Arc::new(Mutex::new(Vec::new())),
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    fn check(&self, grid: &Grid<T>) -> Result<()> {
        if self.cells > grid.n() || grid.n() % self.cells != 0 {
            return Err(Error::IncompatibleResolution(format!(
                "{} cells per side do not tile a grid with n = {}",
                self.cells,
                grid.n()
            )));
        }
        Ok(())
    }

    /// Sums of samples over each cell, cell index `cy * m + cx`.
    fn cell_sums(&self, n: usize, samples: &[T]) -> Vec<T> {
        let m = self.cells;
        let p = n / m;
        let mut sums = vec![T::zero(); m * m];
        for iy in 0..n {
            for ix in 0..n {
                let c = (iy / p) * m + ix / p;
                sums[c] = sums[c] + samples[iy * n + ix];
            }
        }
        sums
    }

    fn piecewise(&self, n: usize, values: &[T]) -> Vec<T> {
        let m = self.cells;
        let p = n / m;
        let mut out = vec![T::zero(); n * n];
        for iy in 0..n {
            for ix in 0..n {
                out[iy * n + ix] = values[(iy / p) * m + ix / p];
            }
        }
        out
    }

    fn average(&self, grid: &Grid<T>, samples: &[T]) -> Vec<T> {
        let p = grid.n() / self.cells;
        let inv = T::one() / T::of_usize(p * p);
        let means: Vec<T> = self
            .cell_sums(grid.n(), samples)
            .into_iter()
            .map(|s| s * inv)
            .collect();
        self.piecewise(grid.n(), &means)
    }

    /// Coordinates `<q_i, w>` of `w` against the orthonormal cell basis,
    /// ordered component-major.
    fn basis_coords(&self, grid: &Grid<T>, w: &SpectralField<T>) -> Vec<f64> {
        let q_scale = self.basis_quadrature_weight(grid);
        w.to_physical()
            .iter()
            .flat_map(|s| self.cell_sums(grid.n(), s))
            .map(|s| (s * q_scale).as_f64())
            .collect()
    }

    /// Quadrature weight `(|Omega| / n^2) / sqrt(|cell|)`.
    fn basis_quadrature_weight(&self, grid: &Grid<T>) -> T {
        let cell_side = grid.length() / T::of_usize(self.cells);
        grid.area() / T::of_usize(grid.len()) / cell_side
    }

    /// `sum_i c_i q_i` as a spectral field.
    fn synthesize(&self, grid: &Grid<T>, coords: &[f64]) -> SpectralField<T> {
        let mm = self.cells * self.cells;
        let cell_side = grid.length() / T::of_usize(self.cells);
        let amp = T::one() / cell_side;
        let comp = |j: usize| {
            let values: Vec<T> = coords[j * mm..(j + 1) * mm]
                .iter()
                .map(|&c| T::of(c) * amp)
                .collect();
            self.piecewise(grid.n(), &values)
        };
        SpectralField::from_physical(grid, &[comp(0), comp(1)]).expect("sizes match")
    }

    fn factor(&self, grid: &Grid<T>, alpha: T, gamma: T) -> Arc<CellSolveFactor> {
        let key = FactorKey {
            n: grid.n(),
            length: grid.length().as_f64().to_bits(),
            alpha: alpha.as_f64().to_bits(),
            gamma: gamma.as_f64().to_bits(),
        };
        let mut cache = self.factors.lock().expect("factor cache poisoned");
        if let Some(f) = cache.iter().find(|f| f.key == key) {
            return f.clone();
        }
        let f = Arc::new(self.build_factor(grid, alpha, gamma, key));
        cache.push(f.clone());
        f
    }

    /// Eigendecomposition of `M_ij = <q_i, Pi D^-1 q_j>`.
    fn build_factor(&self, grid: &Grid<T>, alpha: T, gamma: T, key: FactorKey) -> CellSolveFactor {
        let mm = self.cells * self.cells;
        let dim = 2 * mm;
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        let mut coords = vec![0.0; dim];
        for j in 0..dim {
            coords.iter_mut().for_each(|c| *c = 0.0);
            coords[j] = 1.0;
            let q = self.synthesize(grid, &coords);
            let g = diag_solve(&q.leray_project(), alpha, gamma);
            let col = self.basis_coords(grid, &g);
            for (i, v) in col.into_iter().enumerate() {
                mat[(i, j)] = v;
            }
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        CellSolveFactor {
            key,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct FactorKey {
    n: usize,
    length: u64,
    alpha: u64,
    gamma: u64,
}

#[derive(Debug)]
struct CellSolveFactor {
    key: FactorKey,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Divides each mode by `alpha + gamma |k|^2`.
fn diag_solve<T: Real>(rhs: &SpectralField<T>, alpha: T, gamma: T) -> SpectralField<T> {
    let mut out = rhs.clone();
    let g = rhs.grid().clone();
    out.map_modes(|ix, iy, [a, b]| {
        let d = alpha + gamma * g.k_sq(ix, iy);
        [a / d, b / d]
    });
    out
}

/// An observation operator acting on spectral fields.
#[derive(Clone, Debug)]
pub enum ObservationOperator<T: Real> {
    FourierLowPass(FourierLowPass<T>),
    CellAverage(CellAverage<T>),
}

impl<T: Real> ObservationOperator<T> {
    pub fn fourier(cutoff: usize, length: T) -> Result<Self> {
        FourierLowPass::new(cutoff, length).map(Self::FourierLowPass)
    }

    pub fn cells(cells: usize, length: T) -> Result<Self> {
        CellAverage::new(cells, length).map(Self::CellAverage)
    }

    /// Resolution length `H`.
    pub fn h(&self) -> T {
        match self {
            Self::FourierLowPass(op) => op.h,
            Self::CellAverage(op) => op.h,
        }
    }

    /// Interpolation constant `C1`.
    pub fn c1(&self) -> T {
        match self {
            Self::FourierLowPass(_) => T::one(),
            Self::CellAverage(_) => T::FRAC_1_PI(),
        }
    }

    pub fn check_grid(&self, grid: &Grid<T>) -> Result<()> {
        match self {
            Self::FourierLowPass(op) => op.check(grid),
            Self::CellAverage(op) => op.check(grid),
        }
    }

    /// `I_H w`.
    pub fn project(&self, w: &SpectralField<T>) -> Result<SpectralField<T>> {
        let grid = w.grid().clone();
        self.check_grid(&grid)?;
        match self {
            Self::FourierLowPass(op) => {
                let mut out = w.clone();
                let zero = Complex::new(T::zero(), T::zero());
                out.map_modes(|ix, iy, c| if op.in_band(&grid, ix, iy) { c } else { [zero; 2] });
                Ok(out)
            }
            Self::CellAverage(op) => {
                let s = w.to_physical();
                let avg = [op.average(&grid, &s[0]), op.average(&grid, &s[1])];
                SpectralField::from_physical(&grid, &avg)
            }
        }
    }

    /// `||(I - I_H) w|| / ||grad w||`, bounded above by `C1 H`.
    pub fn interp_defect_ratio(&self, w: &SpectralField<T>) -> Result<T> {
        let grad = w.h1_seminorm();
        if !(grad > T::zero()) {
            return Err(Error::InvalidArgument(
                "interpolation defect ratio needs a nonzero gradient".into(),
            ));
        }
        let defect = (w - &self.project(w)?).l2_norm();
        Ok(defect / grad)
    }

    /// Divergence-free nudging source `Pi I_H u`.
    pub fn nudge_source(&self, u: &SpectralField<T>) -> Result<SpectralField<T>> {
        Ok(self.project(u)?.leray_project())
    }

    /// Solves `(alpha + gamma |k|^2) v + beta Pi I_H v = rhs` for divergence-free `rhs`.
    ///
    /// The Fourier operator is diagonal per mode. Cell averages use a
    /// Woodbury correction on the `2 m^2`-dimensional cell space, whose
    /// eigendecomposition is cached per `(alpha, gamma)` so that changing
    /// `beta` costs only a matrix-vector product.
    pub fn solve_nudged(
        &self,
        rhs: &SpectralField<T>,
        alpha: T,
        gamma: T,
        beta: T,
    ) -> Result<SpectralField<T>> {
        let grid = rhs.grid().clone();
        self.check_grid(&grid)?;
        match self {
            Self::FourierLowPass(op) => {
                let mut out = rhs.clone();
                out.map_modes(|ix, iy, [a, b]| {
                    let mut d = alpha + gamma * grid.k_sq(ix, iy);
                    if op.in_band(&grid, ix, iy) {
                        d = d + beta;
                    }
                    [a / d, b / d]
                });
                Ok(out)
            }
            Self::CellAverage(op) => {
                let y = diag_solve(rhs, alpha, gamma);
                if beta == T::zero() {
                    return Ok(y);
                }
                let factor = op.factor(&grid, alpha, gamma);
                let b = DVector::from_vec(op.basis_coords(&grid, &y));
                let v = &factor.eigenvectors;
                let inv_beta = 1.0 / beta.as_f64();
                let mut t = v.transpose() * b;
                for (ti, lam) in t.iter_mut().zip(factor.eigenvalues.iter()) {
                    *ti /= inv_beta + lam;
                }
                let c = v * t;
                let z = op.synthesize(&grid, c.as_slice()).leray_project();
                let correction = diag_solve(&z, alpha, gamma);
                Ok(&y - &correction)
            }
        }
    }
}
