//! Change of variables from a channel flow to label coordinates: the level
//! function `h(x,a)` solving `ω(x, h) = k + a`.

use rayon::prelude::*;

use super::SlState;
use crate::error::{Error, Result};
use crate::grid::{fd4_derivative, ChannelGrid, ScalarField2D, TorusField, TorusGrid};
use crate::hydrostatic::FlowState;

const BOUNDARY_TOL: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-12;
const ROOT_ITERS: usize = 30;

/// Cubic Hermite interpolant of one channel column on the uniform y-grid.
#[derive(Debug, Clone, Copy)]
pub struct ColumnInterp<'a> {
    f: &'a [f64],
    m: &'a [f64],
    h: f64,
}

impl<'a> ColumnInterp<'a> {
    pub fn new(f: &'a [f64], slopes: &'a [f64], h: f64) -> Self {
        debug_assert_eq!(f.len(), slopes.len());
        Self { f, m: slopes, h }
    }

    fn cell(&self, y: f64) -> (usize, f64) {
        let last = self.f.len() - 2;
        let j = ((y / self.h).floor().max(0.0) as usize).min(last);
        (j, (y - j as f64 * self.h) / self.h)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let (j, t) = self.cell(y);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[j] + h10 * self.h * self.m[j] + h01 * self.f[j + 1] + h11 * self.h * self.m[j + 1]
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let (j, t) = self.cell(y);
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.f[j] + d01 * self.f[j + 1]) / self.h + d10 * self.m[j] + d11 * self.m[j + 1]
    }

    /// Root of `eval(y) = target` for an increasing interpolant. Newton steps
    /// inside the bracketing cell, falling back to bisection.
    pub fn invert(&self, target: f64) -> f64 {
        let n = self.f.len();
        if target <= self.f[0] {
            return 0.0;
        }
        if target >= self.f[n - 1] {
            return (n - 1) as f64 * self.h;
        }
        let j = self.f.partition_point(|&x| x <= target) - 1;
        if self.f[j] == target {
            return j as f64 * self.h;
        }
        let (mut lo, mut hi) = (j as f64 * self.h, (j + 1) as f64 * self.h);
        let mut y = 0.5 * (lo + hi);
        for _ in 0..ROOT_ITERS {
            let r = self.eval(y) - target;
            if r == 0.0 {
                return y;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let dr = self.derivative(y);
            let newton = y - r / dr;
            let next = if dr > 0.0 && newton >= lo && newton <= hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() < ROOT_TOL {
                return next;
            }
            y = next;
        }
        y
    }
}

/// Fourth-order slopes limited (Fritsch–Carlson) so the interpolant stays
/// monotone. Fails unless the data strictly increase.
pub fn monotone_slopes(f: &[f64], h: f64, column: usize) -> Result<Vec<f64>> {
    if f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::MonotonicityFailure { column });
    }
    let mut m = vec![0.0; f.len()];
    fd4_derivative(f, h, &mut m);
    for k in 0..f.len() - 1 {
        let delta = (f[k + 1] - f[k]) / h;
        m[k] = m[k].max(0.0);
        m[k + 1] = m[k + 1].max(0.0);
        let (alpha, beta) = (m[k] / delta, m[k + 1] / delta);
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            m[k] = tau * alpha * delta;
            m[k + 1] = tau * beta * delta;
        }
    }
    Ok(m)
}

/// Values of `h(x_i, a_m)`, stored `[i][m]`.
#[derive(Debug, Clone)]
pub struct LevelSetMap {
    pub n: usize,
    pub na: usize,
    pub h: Vec<f64>,
    /// Strictly increasing in `a` at every node.
    pub monotone: bool,
}

impl LevelSetMap {
    #[inline]
    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.h[i * self.na + m]
    }

    pub fn to_field(&self) -> TorusField {
        TorusField::new(1, self.n, self.na, 1, self.h.clone()).expect("shape by construction")
    }

    /// `max_x |h(x,0)|` and `max_x |h(x,1) − 1|`.
    pub fn endpoint_errors(&self) -> (f64, f64) {
        (0..self.n).fold((0.0_f64, 0.0_f64), |(e0, e1), i| {
            (
                e0.max(self.at(i, 0).abs()),
                e1.max((self.at(i, self.na - 1) - 1.0).abs()),
            )
        })
    }
}

/// A channel flow in label coordinates.
#[derive(Debug, Clone)]
pub struct SlLift {
    pub k: f64,
    pub map: LevelSetMap,
    /// `u(x, h(x,a))`.
    pub v: TorusField,
    /// `1/ω_y(x, h(x,a))`.
    pub ha: TorusField,
}

impl SlLift {
    pub fn into_state(self, t: f64) -> SlState {
        SlState {
            t,
            v: self.v,
            ha: self.ha,
            k: Some(self.k),
        }
    }
}

/// Evaluate `field` at `(x_i, h(x_i,a_m))` through its Hermite interpolant
/// with fourth-order slopes.
pub fn compose(grid: &ChannelGrid, field: &ScalarField2D, map: &LevelSetMap) -> Result<Vec<f64>> {
    let slope = grid.ddy(field)?;
    let hy = grid.hy();
    let na = map.na;
    let mut out = vec![0.0; map.n * na];
    out.par_chunks_mut(na).enumerate().for_each(|(i, row)| {
        let interp = ColumnInterp::new(field.column(i), slope.column(i), hy);
        for (m, r) in row.iter_mut().enumerate() {
            *r = interp.eval(map.at(i, m));
        }
    });
    Ok(out)
}

/// Solve `ω(x, h) = k + a` column by column and carry `u` and `1/ω_y` to the
/// label grid. Requires `ω(·,0) = k`, `ω(·,1) = k + 1` and `ω_y > 0`.
pub fn sl_from_vorticity(grid: &ChannelGrid, state: &FlowState, k: f64, na: usize) -> Result<SlLift> {
    let tgrid = TorusGrid::new(1, grid.nx(), na)?;
    let omega = state.omega();
    let ny = grid.ny();
    for i in 0..grid.nx() {
        let col = omega.column(i);
        let (lo, hi) = ((col[0] - k).abs(), (col[ny - 1] - k - 1.0).abs());
        if lo > BOUNDARY_TOL || hi > BOUNDARY_TOL {
            return Err(Error::BoundaryMismatch(format!(
                "column {i}: ω(0) − k = {:.3e}, ω(1) − k − 1 = {:.3e}",
                col[0] - k,
                col[ny - 1] - k - 1.0
            )));
        }
    }
    let hy = grid.hy();
    let slopes: Vec<Vec<f64>> = (0..grid.nx())
        .into_par_iter()
        .map(|i| monotone_slopes(omega.column(i), hy, i))
        .collect::<Result<_>>()?;
    let mut h = vec![0.0; grid.nx() * na];
    h.par_chunks_mut(na).enumerate().for_each(|(i, row)| {
        let interp = ColumnInterp::new(omega.column(i), &slopes[i], hy);
        for (m, r) in row.iter_mut().enumerate() {
            *r = interp.invert(k + tgrid.a(m));
        }
    });
    let monotone = h.chunks(na).all(|r| r.windows(2).all(|w| w[1] > w[0]));
    let map = LevelSetMap {
        n: grid.nx(),
        na,
        h,
        monotone,
    };
    let c = state.cache();
    let v = compose(grid, &c.u, &map)?;
    let ha: Vec<f64> = compose(grid, &c.omega_y, &map)?
        .into_iter()
        .map(|w| 1.0 / w)
        .collect();
    Ok(SlLift {
        k,
        v: TorusField::new(1, grid.nx(), na, 1, v)?,
        ha: TorusField::new(1, grid.nx(), na, 1, ha)?,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::XDerivative;

    #[test]
    fn hermite_reproduces_cubics() {
        let h = 0.1;
        let ys: Vec<f64> = (0..11).map(|j| j as f64 * h).collect();
        let f: Vec<f64> = ys.iter().map(|y| y * y * y - y).collect();
        let m: Vec<f64> = ys.iter().map(|y| 3.0 * y * y - 1.0).collect();
        let c = ColumnInterp::new(&f, &m, h);
        for y in [0.03, 0.37, 0.999] {
            assert!((c.eval(y) - (y * y * y - y)).abs() < 1e-14);
            assert!((c.derivative(y) - (3.0 * y * y - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn limiter_rejects_non_monotone_columns() {
        let f = [0.0, 0.2, 0.1, 0.5, 0.9, 1.0];
        assert!(matches!(
            monotone_slopes(&f, 0.2, 3),
            Err(Error::MonotonicityFailure { column: 3 })
        ));
    }

    #[test]
    fn linear_profile_gives_identity_map() {
        let g = ChannelGrid::new(16, 33, XDerivative::Spectral).unwrap();
        let k = 0.5;
        let s = FlowState::initial(&g, g.sample(|_, y| k + y)).unwrap();
        let lift = sl_from_vorticity(&g, &s, k, 17).unwrap();
        let tg = TorusGrid::new(1, 16, 17).unwrap();
        for i in 0..16 {
            for m in 0..17 {
                assert!((lift.map.at(i, m) - tg.a(m)).abs() < 1e-12);
                assert!((lift.ha.at(0, i, m) - 1.0).abs() < 1e-10);
            }
        }
        assert!(lift.map.monotone);
    }

    #[test]
    fn quadratic_profile_matches_closed_form_root() {
        let g = ChannelGrid::new(8, 65, XDerivative::Spectral).unwrap();
        let k = 0.0;
        let s = FlowState::initial(&g, g.sample(|_, y| k + 0.5 * (y + y * y))).unwrap();
        let na = 33;
        let lift = sl_from_vorticity(&g, &s, k, na).unwrap();
        let tg = TorusGrid::new(1, 8, na).unwrap();
        for m in 0..na {
            let a = tg.a(m);
            let exact = (-1.0 + (1.0 + 8.0 * a).sqrt()) / 2.0;
            assert!((lift.map.at(3, m) - exact).abs() < 1e-10, "a={a}");
        }
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let g = ChannelGrid::new(8, 17, XDerivative::Spectral).unwrap();
        let s = FlowState::initial(&g, g.sample(|_, y| 2.0 * y)).unwrap();
        assert!(matches!(
            sl_from_vorticity(&g, &s, 0.0, 9),
            Err(Error::BoundaryMismatch(_))
        ));
    }
}
