//! Fields on 𝕋^d × [0,1]_a, d ∈ {1, 2}.
//!
//! Spatial nodes are `x = i/n` per axis; for d = 2 the spatial index is
//! `s = i1*n + i2`. Label nodes are `a_m = m/(na-1)`. A field with `na = 1`
//! does not depend on `a`. Values are stored as `[component][s][m]`, `a`
//! varying fastest.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::reduce::pairwise_sum_by;
use super::spectral::{SpectralAxis, Workspace};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TorusGrid {
    d: usize,
    n: usize,
    na: usize,
    axis: SpectralAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    d: usize,
    n: usize,
    na: usize,
    ncomp: usize,
    values: Vec<f64>,
}

impl TorusField {
    pub fn new(d: usize, n: usize, na: usize, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        let len = ncomp * n.pow(d as u32) * na;
        if values.len() != len {
            return Err(Error::ShapeMismatch {
                expected: format!("{len} values"),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self {
            d,
            n,
            na,
            ncomp,
            values,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn spatial_len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, c: usize, s: usize, m: usize) -> usize {
        (c * self.spatial_len() + s) * self.na + m
    }

    #[inline]
    pub fn at(&self, c: usize, s: usize, m: usize) -> f64 {
        self.values[self.index(c, s, m)]
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.spatial_len() * self.na;
        &self.values[c * len..(c + 1) * len]
    }

    pub fn component_field(&self, c: usize) -> TorusField {
        TorusField {
            d: self.d,
            n: self.n,
            na: self.na,
            ncomp: 1,
            values: self.component(c).to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        super::reduce::max_abs(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..self.with_values(Vec::new())
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        self.with_values(self.values.par_iter().map(|&v| f(v)).collect())
    }

    /// Same shape, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert!(values.is_empty() || values.len() == self.values.len());
        Self {
            d: self.d,
            n: self.n,
            na: self.na,
            ncomp: self.ncomp,
            values,
        }
    }

    /// `self + c·other`, same shape.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }
}

/// Result of [`poisson_inverse_torus`].
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub field: TorusField,
    /// Mean of the input that was projected out before inversion.
    pub mean_removed: f64,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize, na: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("torus n = {n} < 8")));
        }
        if na < 5 {
            return Err(Error::InvalidGrid(format!("na = {na} < 5")));
        }
        Ok(Self {
            d,
            n,
            na,
            axis: SpectralAxis::new(n),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn spatial_len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn axis(&self) -> &SpectralAxis {
        &self.axis
    }

    #[inline]
    pub fn a(&self, m: usize) -> f64 {
        if m == self.na - 1 {
            1.0
        } else {
            m as f64 / (self.na - 1) as f64
        }
    }

    /// Coordinates of spatial node `s`; unused entries are zero.
    #[inline]
    pub fn position(&self, s: usize) -> [f64; 2] {
        let n = self.n as f64;
        match self.d {
            1 => [s as f64 / n, 0.0],
            _ => [(s / self.n) as f64 / n, (s % self.n) as f64 / n],
        }
    }

    pub fn zeros(&self, ncomp: usize, a_dependent: bool) -> TorusField {
        let na = if a_dependent { self.na } else { 1 };
        TorusField {
            d: self.d,
            n: self.n,
            na,
            ncomp,
            values: vec![0.0; ncomp * self.spatial_len() * na],
        }
    }

    /// Sample `f(component, x, a)`; pass `a_dependent = false` for fields
    /// without an `a` axis.
    pub fn sample(
        &self,
        ncomp: usize,
        a_dependent: bool,
        f: impl Fn(usize, [f64; 2], f64) -> f64 + Sync,
    ) -> TorusField {
        let mut out = self.zeros(ncomp, a_dependent);
        let na = out.na;
        let ns = self.spatial_len();
        out.values
            .par_chunks_mut(na)
            .enumerate()
            .for_each(|(cs, chunk)| {
                let (c, s) = (cs / ns, cs % ns);
                let x = self.position(s);
                for (m, v) in chunk.iter_mut().enumerate() {
                    let a = if a_dependent { self.a(m) } else { 0.0 };
                    *v = f(c, x, a);
                }
            });
        out
    }

    pub fn check(&self, f: &TorusField) -> Result<()> {
        if f.d != self.d || f.n != self.n || (f.na != self.na && f.na != 1) {
            return Err(Error::ShapeMismatch {
                expected: format!("d={} n={} na={}|1", self.d, self.n, self.na),
                actual: format!("d={} n={} na={}", f.d, f.n, f.na),
            });
        }
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        Ok(())
    }

    /// Apply a Fourier multiplier `symbol(k)` (k = (k1, k2), k2 = 0 in 1D) to
    /// every component and every a-slice.
    fn apply_symbol<S>(&self, f: &TorusField, symbol: S) -> TorusField
    where
        S: Fn([i64; 2]) -> Complex64 + Sync,
    {
        let ns = self.spatial_len();
        let na = f.na;
        let mut out = f.clone();
        for c in 0..f.ncomp {
            let comp = &mut out.values[c * ns * na..(c + 1) * ns * na];
            // gather [m][s]
            let mut slices = vec![0.0; ns * na];
            slices.par_chunks_mut(ns).enumerate().for_each(|(m, sl)| {
                for (s, v) in sl.iter_mut().enumerate() {
                    *v = comp[s * na + m];
                }
            });
            slices.par_chunks_mut(ns).for_each(|sl| match self.d {
                1 => {
                    let mut work = Workspace::default();
                    self.axis.apply_real(sl, &mut work, |k| symbol([k, 0]));
                }
                _ => self.apply_symbol_2d(sl, &symbol),
            });
            comp.par_chunks_mut(na).enumerate().for_each(|(s, ch)| {
                for (m, v) in ch.iter_mut().enumerate() {
                    *v = slices[m * ns + s];
                }
            });
        }
        out
    }

    fn apply_symbol_2d<S>(&self, data: &mut [f64], symbol: &S)
    where
        S: Fn([i64; 2]) -> Complex64 + Sync,
    {
        let n = self.n;
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut scratch = Vec::new();
        let rows = |buf: &mut [Complex64], scratch: &mut Vec<Complex64>, inverse: bool| {
            for row in buf.chunks_mut(n) {
                if inverse {
                    self.axis.inverse_in_place(row, scratch);
                } else {
                    self.axis.forward_in_place(row, scratch);
                }
            }
        };
        let transpose = |buf: &mut Vec<Complex64>| {
            let src = buf.clone();
            for i in 0..n {
                for j in 0..n {
                    buf[j * n + i] = src[i * n + j];
                }
            }
        };
        rows(&mut buf, &mut scratch, false);
        transpose(&mut buf);
        rows(&mut buf, &mut scratch, false);
        // layout is now [k2][k1]
        let scale = 1.0 / (n * n) as f64;
        for b2 in 0..n {
            let k2 = self.axis.wavenumber(b2);
            for b1 in 0..n {
                let k1 = self.axis.wavenumber(b1);
                buf[b2 * n + b1] *= symbol([k1, k2]) * scale;
            }
        }
        rows(&mut buf, &mut scratch, true);
        transpose(&mut buf);
        rows(&mut buf, &mut scratch, true);
        for (x, c) in data.iter_mut().zip(&buf) {
            *x = c.re;
        }
    }

    /// Spectral partial derivative along spatial axis `axis`.
    pub fn partial(&self, f: &TorusField, axis: usize) -> Result<TorusField> {
        self.check(f)?;
        if axis >= self.d {
            return Err(Error::Domain(format!("axis {axis} out of range for d={}", self.d)));
        }
        Ok(self.apply_symbol(f, |k| self.axis.derivative_symbol(k[axis])))
    }

    /// Gradient of a scalar field; the result has `d` components.
    pub fn gradient(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        let scalar = f.component_field(0);
        let mut values = Vec::with_capacity(self.d * scalar.values.len());
        for axis in 0..self.d {
            let p = self.apply_symbol(&scalar, |k| self.axis.derivative_symbol(k[axis]));
            values.extend_from_slice(&p.values);
        }
        Ok(TorusField {
            d: self.d,
            n: self.n,
            na: f.na,
            ncomp: self.d,
            values,
        })
    }

    /// Divergence of a `d`-component field.
    pub fn divergence(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        if f.ncomp != self.d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} components", self.d),
                actual: format!("{} components", f.ncomp),
            });
        }
        let mut acc = self.partial(&f.component_field(0), 0)?;
        for axis in 1..self.d {
            let p = self.partial(&f.component_field(axis), axis)?;
            acc = acc.axpy(1.0, &p);
        }
        Ok(acc)
    }

    /// `∂_1 v_2 − ∂_2 v_1` for d = 2; identically zero for d = 1.
    pub fn curl(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        if self.d == 1 {
            return Ok(f.component_field(0).map(|_| 0.0));
        }
        let a = self.partial(&f.component_field(1), 0)?;
        let b = self.partial(&f.component_field(0), 1)?;
        Ok(a.axpy(-1.0, &b))
    }

    /// 2/3-rule truncation on every axis.
    pub fn dealias(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        let kc = self.axis.dealias_cutoff() as u64;
        Ok(self.apply_symbol(f, |k| {
            if k[0].unsigned_abs() <= kc && k[1].unsigned_abs() <= kc {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Trapezoid in `a`, returning an a-independent field.
    pub fn integrate_a(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        if f.na == 1 {
            return Ok(f.clone());
        }
        Ok(TorusField {
            d: f.d,
            n: f.n,
            na: 1,
            ncomp: f.ncomp,
            values: f.values.par_chunks(f.na).map(super::trapezoid).collect(),
        })
    }

    /// `∫ f dx da` of each component (rectangle rule in x, trapezoid in a).
    pub fn integrate_full(&self, f: &TorusField) -> Result<Vec<f64>> {
        self.check(f)?;
        let ns = self.spatial_len();
        let na = f.na;
        let wa = |m: usize| {
            if na == 1 {
                1.0
            } else if m == 0 || m == na - 1 {
                0.5 / (na - 1) as f64
            } else {
                1.0 / (na - 1) as f64
            }
        };
        Ok((0..f.ncomp)
            .map(|c| {
                let comp = f.component(c);
                pairwise_sum_by(ns * na, &|k| comp[k] * wa(k % na)) / ns as f64
            })
            .collect())
    }

    /// Spectral tail fraction over every line along every axis, all
    /// components and a-slices pooled.
    pub fn tail_fraction(&self, f: &TorusField) -> Result<f64> {
        self.check(f)?;
        let (n, na, ns) = (self.n, f.na, self.spatial_len());
        // (component, a-slice, axis, line) enumerated in a fixed order
        let lines_per_axis = ns / n;
        let jobs = f.ncomp * na * self.d * lines_per_axis;
        let spectra: Vec<Vec<f64>> = (0..jobs)
            .into_par_iter()
            .map_init(
                || (Workspace::default(), vec![0.0; n]),
                |(work, line), job| {
                    let l = job % lines_per_axis;
                    let axis = (job / lines_per_axis) % self.d;
                    let m = (job / (lines_per_axis * self.d)) % na;
                    let c = job / (lines_per_axis * self.d * na);
                    for (i, v) in line.iter_mut().enumerate() {
                        let s = match (self.d, axis) {
                            (1, _) => i,
                            (_, 0) => i * n + l,
                            _ => l * n + i,
                        };
                        *v = f.at(c, s, m);
                    }
                    self.axis.energy_by_wavenumber(line, work)
                },
            )
            .collect();
        let mut energy = vec![0.0; n / 2 + 1];
        for sp in &spectra {
            for (e, x) in energy.iter_mut().zip(sp) {
                *e += x;
            }
        }
        Ok(super::spectral::tail_fraction_from_spectrum(
            &energy,
            self.axis.dealias_cutoff(),
        ))
    }

    /// Laplacian of a scalar field (spectral).
    pub fn laplacian(&self, f: &TorusField) -> Result<TorusField> {
        self.check(f)?;
        Ok(self.apply_symbol(f, |k| {
            Complex64::new(-4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1]) as f64, 0.0)
        }))
    }
}

/// Zero-mean `P` with `−ΔP = g`. A non-zero mean of `g` is projected out and
/// reported.
pub fn poisson_inverse_torus(grid: &TorusGrid, g: &TorusField) -> Result<PoissonSolution> {
    if g.d != 1 && g.d != 2 {
        return Err(Error::UnsupportedDimension(g.d));
    }
    grid.check(g)?;
    if g.ncomp != 1 || g.na != 1 {
        return Err(Error::ShapeMismatch {
            expected: "a-independent scalar".into(),
            actual: format!("ncomp={} na={}", g.ncomp, g.na),
        });
    }
    let mean_removed = grid.integrate_full(g)?[0];
    let field = grid.apply_symbol(g, |k| {
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / (4.0 * PI * PI * k2), 0.0)
        }
    });
    Ok(PoissonSolution {
        field,
        mean_removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_inversions() {
        let g1 = TorusGrid::new(1, 32, 5).unwrap();
        let rhs = g1.sample(1, false, |_, x, _| -4.0 * PI * PI * (2.0 * PI * x[0]).cos());
        let p = poisson_inverse_torus(&g1, &rhs).unwrap();
        let expect = g1.sample(1, false, |_, x, _| -(2.0 * PI * x[0]).cos());
        // −ΔP = g with g = −4π²cos gives P = −cos
        assert!(p.field.sup_distance(&expect) < 1e-10);

        let zero = g1.zeros(1, false);
        assert_eq!(poisson_inverse_torus(&g1, &zero).unwrap().field.max_abs(), 0.0);

        let g2 = TorusGrid::new(2, 16, 5).unwrap();
        let rhs = g2.sample(1, false, |_, x, _| {
            8.0 * PI * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
        });
        let p = poisson_inverse_torus(&g2, &rhs).unwrap();
        let expect = g2.sample(1, false, |_, x, _| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
        assert!(p.field.sup_distance(&expect) < 1e-10);
    }

    #[test]
    fn mean_is_projected_and_recorded() {
        let g = TorusGrid::new(1, 16, 5).unwrap();
        let rhs = g.sample(1, false, |_, x, _| 0.25 + (2.0 * PI * x[0]).sin());
        let p = poisson_inverse_torus(&g, &rhs).unwrap();
        assert!((p.mean_removed - 0.25).abs() < 1e-14);
        let back = g.laplacian(&p.field).unwrap().map(|v| -v);
        let zm = rhs.map(|v| v - 0.25);
        assert!(back.sup_distance(&zm) < 1e-10);
    }

    #[test]
    fn rejects_three_dimensions() {
        assert!(matches!(TorusGrid::new(3, 8, 5), Err(Error::UnsupportedDimension(3))));
        assert!(matches!(
            TorusField::new(3, 8, 1, 1, vec![0.0; 512]),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn gradient_divergence_curl() {
        let g = TorusGrid::new(2, 16, 5).unwrap();
        let phi = g.sample(1, true, |_, x, a| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() * (1.0 + a));
        let grad = g.gradient(&phi).unwrap();
        assert_eq!(grad.ncomp(), 2);
        assert_eq!(grad.na(), 5);
        assert!(g.curl(&grad).unwrap().max_abs() < 1e-11);
        let lap = g.divergence(&grad).unwrap();
        let expect = phi.map(|v| -8.0 * PI * PI * v);
        assert!(lap.sup_distance(&expect) < 1e-10);
    }

    #[test]
    fn a_integration() {
        let g = TorusGrid::new(1, 8, 9).unwrap();
        let f = g.sample(1, true, |_, x, a| 2.0 * a + x[0]);
        let i = g.integrate_a(&f).unwrap();
        for s in 0..8 {
            assert!((i.at(0, s, 0) - (1.0 + s as f64 / 8.0)).abs() < 1e-14);
        }
        let full = g.integrate_full(&f).unwrap()[0];
        assert!((full - (1.0 + 3.5 / 8.0)).abs() < 1e-14);
    }
}
