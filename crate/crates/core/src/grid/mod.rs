//! Discrete geometry of the channel 𝕋×(0,1) and of the torus 𝕋^d×[0,1]_a.
//!
//! Nodes are `x_i = i/nx` (period 1) and `y_j = j/(ny-1)`, walls included.
//! Field values are stored with y varying fastest: `values[i*ny + j]`.

pub mod reduce;
pub mod spectral;
pub mod torus;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use reduce::pairwise_sum_by;
use spectral::{tail_fraction_from_spectrum, SpectralAxis, Workspace};

pub use torus::{poisson_inverse_torus, PoissonSolution, TorusField, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XDerivative {
    #[default]
    Spectral,
    Fd4,
}

/// Kernel weight `w(z)` for y-integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YWeight {
    One,
    Z,
    OneMinusZ,
}

impl YWeight {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            YWeight::One => 1.0,
            YWeight::Z => z,
            YWeight::OneMinusZ => 1.0 - z,
        }
    }
}

/// `FromZero` gives `∫_0^y`, `ToOne` gives `∫_y^1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumDirection {
    FromZero,
    ToOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values ({nx}x{ny})", nx * ny),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    /// The y-profile at x-node `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.ny..(i + 1) * self.ny]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        reduce::max_abs(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone)]
pub struct ChannelGrid {
    nx: usize,
    ny: usize,
    scheme: XDerivative,
    axis: SpectralAxis,
    /// Trapezoid weights in y, summing to 1.
    wy: Vec<f64>,
}

impl ChannelGrid {
    pub fn new(nx: usize, ny: usize, scheme: XDerivative) -> Result<Self> {
        if nx < 8 {
            return Err(Error::InvalidGrid(format!("nx = {nx} < 8")));
        }
        if ny < 9 {
            return Err(Error::InvalidGrid(format!("ny = {ny} < 9")));
        }
        let h = 1.0 / (ny - 1) as f64;
        let mut wy = vec![h; ny];
        wy[0] = 0.5 * h;
        wy[ny - 1] = 0.5 * h;
        Ok(Self {
            nx,
            ny,
            scheme,
            axis: SpectralAxis::new(nx),
            wy,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn scheme(&self) -> XDerivative {
        self.scheme
    }

    pub fn axis(&self) -> &SpectralAxis {
        &self.axis
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            1.0
        } else {
            j as f64 / (self.ny - 1) as f64
        }
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    pub fn y_weights(&self) -> &[f64] {
        &self.wy
    }

    pub fn zeros(&self) -> ScalarField2D {
        ScalarField2D::zeros(self.nx, self.ny)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> ScalarField2D {
        let ny = self.ny;
        let mut values = vec![0.0; self.nx * ny];
        values.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
            let x = self.x(i);
            for (j, v) in col.iter_mut().enumerate() {
                *v = f(x, self.y(j));
            }
        });
        ScalarField2D {
            nx: self.nx,
            ny,
            values,
        }
    }

    pub fn check(&self, f: &ScalarField2D) -> Result<()> {
        if f.nx != self.nx || f.ny != self.ny {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.nx, self.ny),
                actual: format!("{}x{}", f.nx, f.ny),
            });
        }
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        Ok(())
    }

    /// ∫∫ f dx dy: rectangle rule in x, trapezoid in y.
    pub fn integrate_full(&self, f: &ScalarField2D) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_unchecked(f.values()))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        let ny = self.ny;
        pairwise_sum_by(values.len(), &|k| values[k] * self.wy[k % ny]) / self.nx as f64
    }

    /// Same quadrature as [`Self::integrate_full`] applied to a pointwise
    /// product computed on the fly.
    pub(crate) fn integrate_by(&self, f: impl Fn(usize) -> f64) -> f64 {
        let ny = self.ny;
        pairwise_sum_by(self.nx * ny, &|k| f(k) * self.wy[k % ny]) / self.nx as f64
    }

    /// Per-column `∫_0^1 w(z) f(x,z) dz`; the final value of the from-0
    /// cumulative integral, so the two agree bit for bit.
    pub fn integrate_y(&self, f: &ScalarField2D, weight: YWeight) -> Result<Vec<f64>> {
        self.check(f)?;
        let h = self.hy();
        Ok(f.values
            .par_chunks(self.ny)
            .map(|col| {
                let g = |j: usize| weight.eval(self.y(j)) * col[j];
                let mut acc = 0.0;
                for j in 0..self.ny - 1 {
                    acc += 0.5 * h * (g(j) + g(j + 1));
                }
                acc
            })
            .collect())
    }

    pub fn cumint_y(
        &self,
        f: &ScalarField2D,
        weight: YWeight,
        direction: CumDirection,
    ) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.cumint_unchecked(f, weight, direction))
    }

    pub(crate) fn cumint_unchecked(
        &self,
        f: &ScalarField2D,
        weight: YWeight,
        direction: CumDirection,
    ) -> ScalarField2D {
        let ny = self.ny;
        let h = self.hy();
        let mut out = self.zeros();
        out.values
            .par_chunks_mut(ny)
            .zip(f.values.par_chunks(ny))
            .for_each(|(o, col)| {
                let g = |j: usize| weight.eval(self.y(j)) * col[j];
                match direction {
                    CumDirection::FromZero => {
                        o[0] = 0.0;
                        for j in 0..ny - 1 {
                            o[j + 1] = o[j] + 0.5 * h * (g(j) + g(j + 1));
                        }
                    }
                    CumDirection::ToOne => {
                        o[ny - 1] = 0.0;
                        for j in (0..ny - 1).rev() {
                            o[j] = o[j + 1] + 0.5 * h * (g(j) + g(j + 1));
                        }
                    }
                }
            });
        out
    }

    pub fn ddx(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.ddx_unchecked(f))
    }

    pub(crate) fn ddx_unchecked(&self, f: &ScalarField2D) -> ScalarField2D {
        match self.scheme {
            XDerivative::Spectral => {
                self.per_row(f, |row, work| self.axis.differentiate(row, work))
            }
            XDerivative::Fd4 => {
                let nx = self.nx;
                let c = 1.0 / (12.0 * self.hx());
                self.per_row(f, |row, _| {
                    let src = row.to_vec();
                    for i in 0..nx {
                        let at = |o: isize| src[((i as isize + o).rem_euclid(nx as isize)) as usize];
                        row[i] = c * (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2));
                    }
                })
            }
        }
    }

    pub fn ddy(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.ddy_unchecked(f))
    }

    pub(crate) fn ddy_unchecked(&self, f: &ScalarField2D) -> ScalarField2D {
        let ny = self.ny;
        let h = self.hy();
        let mut out = self.zeros();
        out.values
            .par_chunks_mut(ny)
            .zip(f.values.par_chunks(ny))
            .for_each(|(o, col)| fd4_derivative(col, h, o));
        out
    }

    /// 2/3-rule truncation in x of every y-row (a no-op under fd4-x).
    pub fn dealias_x(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.dealias_unchecked(f))
    }

    pub(crate) fn dealias_unchecked(&self, f: &ScalarField2D) -> ScalarField2D {
        if self.scheme == XDerivative::Fd4 {
            return f.clone();
        }
        self.per_row(f, |row, work| self.axis.truncate(row, work))
    }

    /// Share of the x-spectral energy (trapezoid-weighted over y) found in
    /// the top third of the retained band.
    /// `max|f|` of the trigonometric interpolant in x, evaluated on a grid
    /// `factor` times finer. Grid maxima miss peaks that sit between nodes.
    pub fn x_interpolated_sup(&self, f: &ScalarField2D, factor: usize) -> Result<f64> {
        self.check(f)?;
        let (nx, m) = (self.nx, self.nx * factor.max(1));
        let fine = FftPlanner::new().plan_fft_inverse(m);
        let rows = self.rows(f);
        let sups: Vec<f64> = rows
            .par_chunks(nx)
            .map_init(
                || (Workspace::default(), Vec::new(), Vec::new()),
                |(work, pad, scratch), row| {
                    self.axis.forward_real(row, work);
                    pad.clear();
                    pad.resize(m, Complex64::default());
                    for (bin, c) in work.buf.iter().enumerate() {
                        let k = self.axis.wavenumber(bin);
                        if self.axis.is_nyquist(k) {
                            pad[nx / 2] += 0.5 * c;
                            pad[m - nx / 2] += 0.5 * c;
                        } else {
                            pad[k.rem_euclid(m as i64) as usize] = *c;
                        }
                    }
                    scratch.resize(fine.get_inplace_scratch_len(), Complex64::default());
                    fine.process_with_scratch(pad, scratch);
                    pad.iter().fold(0.0_f64, |a, c| a.max(c.re.abs())) / nx as f64
                },
            )
            .collect();
        Ok(sups.into_iter().fold(0.0, f64::max))
    }

    pub fn x_tail_fraction(&self, f: &ScalarField2D) -> Result<f64> {
        self.check(f)?;
        let rows = self.rows(f);
        let spectra: Vec<Vec<f64>> = rows
            .par_chunks(self.nx)
            .map_init(Workspace::default, |work, row| {
                self.axis.energy_by_wavenumber(row, work)
            })
            .collect();
        let nk = self.nx / 2 + 1;
        let energy: Vec<f64> = (0..nk)
            .map(|k| pairwise_sum_by(self.ny, &|j| self.wy[j] * spectra[j][k]))
            .collect();
        Ok(tail_fraction_from_spectrum(&energy, self.axis.dealias_cutoff()))
    }

    /// x-derivative of a per-column quantity (length nx), same scheme as
    /// [`Self::ddx`].
    pub fn ddx_line(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        match self.scheme {
            XDerivative::Spectral => {
                self.axis.differentiate(&mut out, &mut Workspace::default())
            }
            XDerivative::Fd4 => {
                let nx = self.nx;
                let c = 1.0 / (12.0 * self.hx());
                for (i, o) in out.iter_mut().enumerate() {
                    let at = |k: isize| g[((i as isize + k).rem_euclid(nx as isize)) as usize];
                    *o = c * (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2));
                }
            }
        }
        out
    }

    /// 2/3-rule truncation of a per-column quantity; identity under fd4-x.
    pub fn dealias_line(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        if self.scheme == XDerivative::Spectral {
            self.axis.truncate(&mut out, &mut Workspace::default());
        }
        out
    }

    /// Transpose into y-major rows of length nx.
    fn rows(&self, f: &ScalarField2D) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut rows = vec![0.0; nx * ny];
        rows.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, r) in row.iter_mut().enumerate() {
                *r = f.values[i * ny + j];
            }
        });
        rows
    }

    fn per_row<F>(&self, f: &ScalarField2D, op: F) -> ScalarField2D
    where
        F: Fn(&mut [f64], &mut Workspace) + Sync,
    {
        let (nx, ny) = (self.nx, self.ny);
        let mut rows = self.rows(f);
        rows.par_chunks_mut(nx)
            .for_each_init(Workspace::default, |work, row| op(row, work));
        let mut out = self.zeros();
        out.values
            .par_chunks_mut(ny)
            .enumerate()
            .for_each(|(i, col)| {
                for (j, c) in col.iter_mut().enumerate() {
                    *c = rows[j * nx + i];
                }
            });
        out
    }
}

/// Fourth-order first derivative on a uniform grid with spacing `h`:
/// central in the interior, one-sided at both ends. Needs at least 5 nodes.
pub fn fd4_derivative(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert!(n >= 5 && out.len() == n);
    let c = 1.0 / (12.0 * h);
    out[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    out[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for j in 2..n - 2 {
        out[j] = c * (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]);
    }
    let m = n - 1;
    out[m - 1] = -c * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
    out[m] = -c * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
}

/// Trapezoid `∫_0^1 g` on a uniform grid with endpoints, accumulated left to
/// right.
pub fn trapezoid(g: &[f64]) -> f64 {
    let h = 1.0 / (g.len() - 1) as f64;
    let mut acc = 0.0;
    for w in g.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> ChannelGrid {
        ChannelGrid::new(nx, ny, XDerivative::Spectral).unwrap()
    }

    #[test]
    fn node_geometry() {
        let g = grid(16, 33);
        assert_eq!(g.x(1), 1.0 / 16.0);
        assert_eq!(g.y(0), 0.0);
        assert_eq!(g.y(32), 1.0);
        assert!(ChannelGrid::new(4, 33, XDerivative::Spectral).is_err());
        assert!(ChannelGrid::new(16, 5, XDerivative::Spectral).is_err());
    }

    #[test]
    fn full_integrals() {
        let g = grid(32, 65);
        assert!((g.integrate_full(&g.sample(|_, _| 1.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!(g.integrate_full(&g.sample(|x, _| (2.0 * PI * x).sin())).unwrap().abs() < 1e-14);
        assert!((g.integrate_full(&g.sample(|_, y| y)).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_finite_is_rejected() {
        let g = grid(8, 9);
        let mut f = g.zeros();
        f.values_mut()[5] = f64::NAN;
        assert!(matches!(g.integrate_full(&f), Err(Error::NonFiniteField)));
        assert!(matches!(g.ddy(&f), Err(Error::NonFiniteField)));
    }

    #[test]
    fn weighted_column_integrals() {
        let g = grid(8, 129);
        let c = 3.0;
        let f = g.sample(|_, _| c);
        for v in g.integrate_y(&f, YWeight::Z).unwrap() {
            assert!((v - c / 2.0).abs() < 1e-13);
        }
        for v in g.integrate_y(&f, YWeight::OneMinusZ).unwrap() {
            assert!((v - c / 2.0).abs() < 1e-13);
        }
        let h = g.hy();
        for v in g.integrate_y(&g.sample(|_, y| 2.0 * y), YWeight::Z).unwrap() {
            assert!((v - 2.0 / 3.0).abs() < h * h);
        }
    }

    #[test]
    fn cumulative_integrals() {
        let g = grid(8, 17);
        let one = g.sample(|_, _| 1.0);
        let up = g.cumint_y(&one, YWeight::One, CumDirection::FromZero).unwrap();
        let down = g.cumint_y(&one, YWeight::One, CumDirection::ToOne).unwrap();
        for i in 0..8 {
            for j in 0..17 {
                assert!((up.at(i, j) - g.y(j)).abs() < 1e-15);
                assert!((down.at(i, j) - (1.0 - g.y(j))).abs() < 1e-15);
            }
        }
        let g = grid(8, 257);
        let z = g.sample(|_, y| y);
        let c = g.cumint_y(&z, YWeight::One, CumDirection::FromZero).unwrap();
        assert!((c.at(0, 256) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cumint_end_value_is_the_column_integral() {
        let g = grid(8, 33);
        let f = g.sample(|x, y| (3.0 * y).exp() * (1.0 + (2.0 * PI * x).cos()));
        for w in [YWeight::One, YWeight::Z, YWeight::OneMinusZ] {
            let c = g.cumint_y(&f, w, CumDirection::FromZero).unwrap();
            let total = g.integrate_y(&f, w).unwrap();
            for (i, t) in total.iter().enumerate() {
                assert_eq!(c.at(i, 32).to_bits(), t.to_bits());
            }
        }
    }

    #[test]
    fn derivatives() {
        let g = grid(32, 65);
        let d = g.ddx(&g.sample(|x, _| (2.0 * PI * x).sin())).unwrap();
        let e = g.sample(|x, _| 2.0 * PI * (2.0 * PI * x).cos());
        assert!(d.sup_distance(&e) < 1e-10);

        let c = g.sample(|_, _| 7.5);
        assert!(g.ddx(&c).unwrap().max_abs() < 1e-13 * 7.5);
        assert!(g.ddy(&c).unwrap().max_abs() < 1e-13 * 7.5);

        // fourth order stencils differentiate quadratics exactly
        let d = g.ddy(&g.sample(|_, y| y * y)).unwrap();
        assert!(d.sup_distance(&g.sample(|_, y| 2.0 * y)) < 1e-11);
    }

    #[test]
    fn ddy_is_fourth_order() {
        let err = |ny: usize| {
            let g = grid(8, ny);
            let d = g.ddy(&g.sample(|_, y| (2.0 * y).sin())).unwrap();
            d.sup_distance(&g.sample(|_, y| 2.0 * (2.0 * y).cos()))
        };
        let order = (err(33) / err(65)).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn fd4_x_fallback() {
        let g = ChannelGrid::new(64, 9, XDerivative::Fd4).unwrap();
        let d = g.ddx(&g.sample(|x, _| (2.0 * PI * x).sin())).unwrap();
        let e = g.sample(|x, _| 2.0 * PI * (2.0 * PI * x).cos());
        assert!(d.sup_distance(&e) < 1e-4);
    }

    #[test]
    fn tail_fraction_sees_high_modes() {
        let g = grid(48, 9);
        let smooth = g.sample(|x, y| (2.0 * PI * x).sin() * (1.0 + y));
        assert!(g.x_tail_fraction(&smooth).unwrap() < 1e-25);
        let rough = g.sample(|x, _| (2.0 * PI * x).sin() + (2.0 * PI * 15.0 * x).sin());
        assert!((g.x_tail_fraction(&rough).unwrap() - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn summation_by_parts(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1usize..5, phase in 0.0f64..1.0) {
            let g = grid(32, 17);
            let f = g.sample(|x, y| a * (2.0 * PI * k as f64 * x + phase).sin() * (1.0 + y));
            let h = g.sample(|x, y| b * (2.0 * PI * x).cos() + (4.0 * PI * x + phase).sin() * y * y);
            let lhs = g.integrate_full(&g.ddx(&f).unwrap().zip_map(&h, |p, q| p * q)).unwrap();
            let rhs = -g.integrate_full(&f.zip_map(&g.ddx(&h).unwrap(), |p, q| p * q)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + f.max_abs() * h.max_abs()) * 50.0);
        }
    }

    #[test]
    fn interpolated_sup_finds_peak_between_nodes() {
        let g = ChannelGrid::new(16, 9, XDerivative::Spectral).unwrap();
        let f = g.sample(|x, _| (2.0 * PI * x - 0.1).cos());
        assert!(f.max_abs() < 1.0 - 1e-3);
        let s = g.x_interpolated_sup(&f, 64).unwrap();
        assert!((s - 1.0).abs() < 1e-4, "{s}");
    }
}
