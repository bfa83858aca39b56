//! Seeded generators for band-limited test and initial fields.

use rand::Rng;
use rustfft::num_complex::Complex;

use super::grid::Grid;
use super::spectral::SpectralField;
use crate::scalar::Real;

fn uniform_coeff<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.random_range(-1.0..1.0);
    let im: f64 = rng.random_range(-1.0..1.0);
    Complex::new(T::of(re), T::of(im))
}

/// Real, mean-zero field with random coefficients on `1 <= max(|m1|, |m2|) <= max_mode`.
///
/// Not divergence-free. `max_mode` is clipped below the Nyquist index.
pub fn random_band_limited<T: Real, R: Rng + ?Sized>(
    grid: &Grid<T>,
    rng: &mut R,
    max_mode: usize,
) -> SpectralField<T> {
    let max_mode = max_mode.min(grid.n() / 2 - 1) as u64;
    let mut f = SpectralField::zeros(grid);
    let n = grid.n();
    for iy in 0..n {
        for ix in 0..n {
            let band = grid.mode(ix).unsigned_abs().max(grid.mode(iy).unsigned_abs());
            if band == 0 || band > max_mode {
                continue;
            }
            f.set_coeff(ix, iy, [uniform_coeff(rng), uniform_coeff(rng)]);
        }
    }
    f.symmetrize();
    f
}

/// Random solenoidal field with root-mean-square velocity `rms`, built from a
/// stream function whose coefficients decay like `|m|^-2` up to `max_mode`.
pub fn random_solenoidal<T: Real, R: Rng + ?Sized>(
    grid: &Grid<T>,
    rng: &mut R,
    max_mode: usize,
    rms: T,
) -> SpectralField<T> {
    let max_mode = max_mode.clamp(1, grid.n() / 2 - 1) as u64;
    let n = grid.n();
    let mut f = SpectralField::zeros(grid);
    for iy in 0..n {
        for ix in 0..n {
            let (mx, my) = (grid.mode(ix), grid.mode(iy));
            let band = mx.unsigned_abs().max(my.unsigned_abs());
            if band == 0 || band > max_mode {
                continue;
            }
            let m_sq = T::of((mx * mx + my * my) as f64);
            let psi: Complex<T> = uniform_coeff::<T, R>(rng) / m_sq;
            let (kx, ky) = (grid.wavenumber(ix), grid.wavenumber(iy));
            // u = (d psi/dy, -d psi/dx)
            let ux = Complex::new(-psi.im * ky, psi.re * ky);
            let uy = Complex::new(psi.im * kx, -psi.re * kx);
            f.set_coeff(ix, iy, [ux, uy]);
        }
    }
    f.symmetrize();
    let f = f.leray_project();
    let norm = f.l2_norm();
    if norm > T::zero() {
        f.scale(rms * grid.area().sqrt() / norm)
    } else {
        f
    }
}
