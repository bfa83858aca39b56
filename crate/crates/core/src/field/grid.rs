use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

struct FftPair<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform `n x n` periodic grid on the square torus of side `length`.
///
/// Mode indices per dimension run over `-n/2+1 ..= n/2`; storage index `i`
/// maps to mode `i` for `i <= n/2` and to `i - n` above. Samples and
/// coefficients share the row-major layout `iy * n + ix`.
///
/// Cloning is cheap: FFT plans are immutable and shared behind an `Arc`.
#[derive(Clone)]
pub struct Grid<T: Real> {
    n: usize,
    length: T,
    fft: Arc<FftPair<T>>,
}

impl<T: Real> Grid<T> {
    pub fn new(n: usize, length: T) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be even and >= 4, got {n}"
            )));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "domain length must be positive, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = FftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(Self {
            n,
            length,
            fft: Arc::new(fft),
        })
    }

    /// Unit torus `[0, 1)^2`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, T::one())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    /// `|Omega|`.
    #[inline]
    pub fn area(&self) -> T {
        self.length * self.length
    }

    /// Number of samples (and coefficients) per component.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing of the sample points.
    #[inline]
    pub fn spacing(&self) -> T {
        self.length / T::of_usize(self.n)
    }

    /// Fundamental wavenumber `2 pi / l`.
    #[inline]
    pub fn k_unit(&self) -> T {
        T::TAU() / self.length
    }

    /// Signed mode index for storage index `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage index for a signed mode index, if it is representable.
    pub fn index_of(&self, m: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if m > half || m <= -half {
            return None;
        }
        Some(if m >= 0 { m as usize } else { (m + self.n as i64) as usize })
    }

    /// Physical wavenumber for storage index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> T {
        T::from_i64(self.mode(i)).expect("mode index fits scalar") * self.k_unit()
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Storage index of `-k` for storage index `i`.
    #[inline]
    pub fn conj_index(&self, i: usize) -> usize {
        (self.n - i) % self.n
    }

    /// `|k|^2` for the mode at storage indices `(ix, iy)`.
    #[inline]
    pub fn k_sq(&self, ix: usize, iy: usize) -> T {
        let kx = self.wavenumber(ix);
        let ky = self.wavenumber(iy);
        kx * kx + ky * ky
    }

    /// Physical coordinate of sample index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        T::of_usize(i) * self.spacing()
    }

    /// Forward 2D transform, normalized so that `u(x) = sum_k c_k exp(i k.x)`.
    pub(crate) fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &*self.fft.forward);
        let scale = T::one() / T::of_usize(self.len());
        for c in data.iter_mut() {
            *c = *c * scale;
        }
    }

    /// Inverse 2D transform (unnormalized synthesis).
    pub(crate) fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &*self.fft.inverse);
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &dyn Fft<T>) {
        debug_assert_eq!(data.len(), self.len());
        plan.process(data);
        transpose_square(data, self.n);
        plan.process(data);
        transpose_square(data, self.n);
    }
}

fn transpose_square<C: Copy>(data: &mut [C], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}
