//! Summation helper for loss aggregates.

/// Pairwise (cascade) summation down to single elements. Error grows
/// logarithmically instead of linearly, and for 2^k equal addends the
/// result is exact, which keeps the uniform-model perplexity identity
/// (perplexity == vocabulary size) bit-exact on power-of-two datasets.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_small() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.5]), 1.5);
        assert_eq!(pairwise_sum(&[1.5, 2.5]), 4.0);
    }

    #[test]
    fn power_of_two_runs_of_equal_values_are_exact() {
        let c = (197.0f64).ln();
        for k in [1usize, 4, 10, 13] {
            let n = 1usize << k;
            let xs = vec![c; n];
            let total = pairwise_sum(&xs);
            assert_eq!(total, c * n as f64);
            assert_eq!(total / n as f64, c);
        }
    }

    #[test]
    fn odd_lengths_match_exact_integer_sums() {
        let xs: Vec<f64> = (1..=7).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 28.0);
        let xs: Vec<f64> = (1..=101).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 5151.0);
    }
}
