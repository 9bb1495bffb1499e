//! Geometric means as the `p → 0` limit of `p`-norms on a probability
//! measure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::reduce::pairwise_sum_by;

const WEIGHT_TOL: f64 = 1e-12;
/// Below this `p` the norm is evaluated through `log1p`/`expm1`.
const LOG_SPACE_P: f64 = 0.01;

/// Positive values `f_i` with probability weights `μ_i`.
#[derive(Debug, Clone)]
pub struct WeightedSamples {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} weights", values.len()),
                actual: format!("{} weights", weights.len()),
            });
        }
        if let Some(f) = values.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::Domain(format!("value {f} is not positive")));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Domain("negative or non-finite weight".into()));
        }
        let total = pairwise_sum_by(weights.len(), &|i| weights[i]);
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { values, weights })
    }

    /// Rescale nonnegative weights to unit mass.
    pub fn normalized(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total = pairwise_sum_by(weights.len(), &|i| weights[i]);
        if !(total > 0.0) {
            return Err(Error::Domain("weights have no mass".into()));
        }
        Self::new(values, weights.into_iter().map(|w| w / total).collect())
    }

    /// Trapezoid weights for `f(x_i)` on `n` uniform nodes of `[0,1]`.
    pub fn trapezoid(f: impl Fn(f64) -> f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("need at least two nodes".into()));
        }
        let h = 1.0 / (n - 1) as f64;
        let values = (0..n).map(|i| f(i as f64 * h)).collect();
        let weights = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        Self::normalized(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn mean_by(&self, g: impl Fn(f64) -> f64 + Sync) -> f64 {
        pairwise_sum_by(self.values.len(), &|i| self.weights[i] * g(self.values[i]))
    }
}

/// `exp(Σ μ_i log f_i)`.
pub fn geometric_mean(s: &WeightedSamples) -> f64 {
    s.mean_by(f64::ln).exp()
}

/// `(Σ μ_i f_i^p)^{1/p}`.
pub fn p_norm(s: &WeightedSamples, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p = {p} must be positive")));
    }
    if p < LOG_SPACE_P {
        // Σμ f^p = 1 + Σμ (f^p − 1)
        let excess = s.mean_by(|f| (p * f.ln()).exp_m1());
        Ok((excess.ln_1p() / p).exp())
    } else {
        Ok(s.mean_by(|f| f.powf(p)).powf(1.0 / p))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitStudy {
    pub p: Vec<f64>,
    pub norms: Vec<f64>,
    /// `norms[i+1] − norms[i]`; nonincreasing sequence means all ≤ 1e-12.
    pub differences: Vec<f64>,
    pub geometric_mean: f64,
    /// Relative gap between the norm at the smallest `p` and the geometric
    /// mean.
    pub gap: f64,
    pub monotone: bool,
    /// Geometric mean never exceeds a norm.
    pub jensen: bool,
}

pub fn limit_study(s: &WeightedSamples, ps: &[f64]) -> Result<LimitStudy> {
    if ps.is_empty() || ps.windows(2).any(|w| !(w[1] < w[0])) || ps.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Domain("p sequence must be positive and strictly decreasing".into()));
    }
    let norms: Vec<f64> = ps.iter().map(|&p| p_norm(s, p)).collect::<Result<_>>()?;
    let differences: Vec<f64> = norms.windows(2).map(|w| w[1] - w[0]).collect();
    let g = geometric_mean(s);
    let last = *norms.last().expect("non-empty");
    Ok(LimitStudy {
        p: ps.to_vec(),
        monotone: differences.iter().all(|d| *d <= 1e-12),
        jensen: norms.iter().all(|n| g <= n * (1.0 + 1e-12)),
        gap: (last - g).abs() / g,
        geometric_mean: g,
        norms,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn two_point() -> WeightedSamples {
        WeightedSamples::new(vec![1.0, 4.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn two_point_examples() {
        let s = two_point();
        assert!((geometric_mean(&s) - 2.0).abs() < 1e-15);
        assert!((p_norm(&s, 1.0).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn constant_sample_is_fixed_point() {
        let s = WeightedSamples::new(vec![3.0; 4], vec![0.25; 4]).unwrap();
        for p in [2.0, 1.0, 0.1, 1e-3, 1e-6] {
            assert!((p_norm(&s, p).unwrap() - 3.0).abs() < 1e-14);
        }
        let st = limit_study(&s, &[1.0, 0.1, 0.01]).unwrap();
        assert!(st.gap < 1e-14);
    }

    #[test]
    fn exponential_on_unit_interval() {
        let s = WeightedSamples::trapezoid(f64::exp, 10_001).unwrap();
        // closed form at p = 1 is e − 1
        assert!((p_norm(&s, 1.0).unwrap() - (E - 1.0)).abs() < 1e-8);
        assert!((geometric_mean(&s) - 0.5_f64.exp()).abs() < 1e-12);
        let exact = 1.6487899689211156; // ((e^p − 1)/p)^{1/p}, p = 1e-3
        assert!((p_norm(&s, 1e-3).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(p_norm(&two_point(), 0.0), Err(Error::Domain(_))));
        assert!(WeightedSamples::new(vec![1.0, -1.0], vec![0.5, 0.5]).is_err());
        assert!(WeightedSamples::new(vec![1.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    proptest! {
        #[test]
        fn power_mean_inequalities(
            vals in prop::collection::vec(0.01f64..100.0, 2..20),
            c in 0.1f64..10.0,
            p in 1e-4f64..3.0,
        ) {
            let n = vals.len();
            let s = WeightedSamples::normalized(vals.clone(), vec![1.0; n]).unwrap();
            let g = geometric_mean(&s);
            let np = p_norm(&s, p).unwrap();
            prop_assert!(g <= np * (1.0 + 1e-12));
            prop_assert!(p_norm(&s, 0.5 * p).unwrap() <= np * (1.0 + 1e-12));
            let scaled = WeightedSamples::normalized(vals.iter().map(|v| c * v).collect(), vec![1.0; n]).unwrap();
            prop_assert!((p_norm(&scaled, p).unwrap() - c * np).abs() <= 1e-12 * c * np);
            prop_assert!((geometric_mean(&scaled) - c * g).abs() <= 1e-12 * c * g);
        }
    }
}
