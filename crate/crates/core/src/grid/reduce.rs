//! Fixed-order summation.
//!
//! Every reduction in the crate goes through [`pairwise_sum`] so results do not
//! depend on how work was split across threads.

const BLOCK: usize = 16;

/// Pairwise (cascade) summation with left-to-right blocks of 16 at the leaves.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i` in `0..n` without materializing more than
/// one block at a time.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_naive_on_small_input() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&xs), 10.5);
    }

    #[test]
    fn closure_form_agrees_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.37).sin()).collect();
        assert_eq!(
            pairwise_sum(&xs).to_bits(),
            pairwise_sum_by(xs.len(), &|i| xs[i]).to_bits()
        );
    }

    proptest! {
        #[test]
        fn close_to_exact_sum(xs in prop::collection::vec(-1e3f64..1e3, 0..500)) {
            let naive: f64 = xs.iter().sum();
            let s = pairwise_sum(&xs);
            prop_assert!((s - naive).abs() <= 1e-9 * (1.0 + xs.iter().map(|x| x.abs()).sum::<f64>()));
        }
    }
}
