//! Fourier machinery for one periodic axis of period 1.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct SpectralAxis {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralAxis").field("n", &self.n).finish()
    }
}

/// Per-thread buffers for [`SpectralAxis`] transforms.
#[derive(Default)]
pub struct Workspace {
    pub(crate) buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralAxis {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber of FFT bin `bin`. The Nyquist bin of an even
    /// length maps to `+n/2`.
    pub fn wavenumber(&self, bin: usize) -> i64 {
        if bin <= self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, k: i64) -> bool {
        self.n.is_multiple_of(2) && k.unsigned_abs() as usize == self.n / 2
    }

    /// Largest wavenumber kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// Multiplier of the first derivative for wavenumber `k` (period 1).
    pub fn derivative_symbol(&self, k: i64) -> Complex64 {
        if self.is_nyquist(k) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k as f64)
        }
    }

    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.forward.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::default());
        }
        self.forward.process_with_scratch(buf, &mut scratch[..need]);
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.inverse.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::default());
        }
        self.inverse.process_with_scratch(buf, &mut scratch[..need]);
    }

    /// Transform a real sequence into `work.buf` (unnormalized).
    pub fn forward_real(&self, data: &[f64], work: &mut Workspace) {
        debug_assert_eq!(data.len(), self.n);
        work.buf.clear();
        work.buf.extend(data.iter().map(|&x| Complex64::new(x, 0.0)));
        let Workspace { buf, scratch } = work;
        self.forward_in_place(buf, scratch);
    }

    /// Multiply the spectrum of `data` by `symbol(k)` and transform back,
    /// keeping the real part.
    pub fn apply_real<F>(&self, data: &mut [f64], work: &mut Workspace, symbol: F)
    where
        F: Fn(i64) -> Complex64,
    {
        self.forward_real(data, work);
        let scale = 1.0 / self.n as f64;
        for (bin, c) in work.buf.iter_mut().enumerate() {
            *c *= symbol(self.wavenumber(bin)) * scale;
        }
        let Workspace { buf, scratch } = work;
        self.inverse_in_place(buf, scratch);
        for (x, c) in data.iter_mut().zip(work.buf.iter()) {
            *x = c.re;
        }
    }

    pub fn differentiate(&self, data: &mut [f64], work: &mut Workspace) {
        self.apply_real(data, work, |k| self.derivative_symbol(k));
    }

    /// Zero every mode above the 2/3-rule cutoff.
    pub fn truncate(&self, data: &mut [f64], work: &mut Workspace) {
        let kc = self.dealias_cutoff() as u64;
        self.apply_real(data, work, |k| {
            if k.unsigned_abs() <= kc {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
    }

    /// Squared modulus of each FFT coefficient folded onto `|k|`, indices
    /// `0..=n/2`.
    pub fn energy_by_wavenumber(&self, data: &[f64], work: &mut Workspace) -> Vec<f64> {
        self.forward_real(data, work);
        let mut out = vec![0.0; self.n / 2 + 1];
        for (bin, c) in work.buf.iter().enumerate() {
            out[self.wavenumber(bin).unsigned_abs() as usize] += c.norm_sqr();
        }
        out
    }
}

/// Fraction of non-mean spectral energy sitting in the top third of the
/// retained band `(2K/3, K]`, `K` the dealiasing cutoff.
pub fn tail_fraction_from_spectrum(energy: &[f64], cutoff: usize) -> f64 {
    let start = (2 * cutoff) / 3 + 1;
    let total: f64 = energy.iter().skip(1).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let tail: f64 = energy
        .iter()
        .enumerate()
        .filter(|(k, _)| *k >= start)
        .map(|(_, e)| e)
        .sum();
    tail / total
}
