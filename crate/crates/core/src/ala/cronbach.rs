//! Cronbach's alpha over an items x raters rating matrix.

use crate::error::{Error, Result};

/// Sample variance with the n-1 denominator.
fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `alpha = (k/(k-1)) * (1 - sum_i var_i / var_total)` where `var_i` is the
/// per-rater variance across items and `var_total` the variance of per-item
/// rater sums.
pub fn cronbach_alpha(ratings: &[Vec<f64>]) -> Result<f64> {
    let n_items = ratings.len();
    if n_items < 2 {
        return Err(Error::InvalidParameter {
            name: "ratings",
            reason: format!("need at least 2 items, got {n_items}"),
        });
    }
    let k = ratings[0].len();
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "ratings",
            reason: format!("need at least 2 raters, got {k}"),
        });
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(Error::ShapeMismatch {
                op: "cronbach_alpha",
                left: vec![k],
                right: vec![row.len()],
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation {
                field: "ratings".into(),
                reason: format!("non-finite rating in item row {i}"),
            });
        }
    }

    let rater_var_sum: f64 = (0..k)
        .map(|r| sample_variance(&ratings.iter().map(|row| row[r]).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = ratings.iter().map(|row| row.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(Error::Undefined(
            "total score variance is zero; alpha undefined".into(),
        ));
    }
    Ok(k as f64 / (k as f64 - 1.0) * (1.0 - rater_var_sum / total_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_raters_give_exactly_one() {
        let ratings: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![4.0, 4.0],
            vec![3.0, 3.0],
        ];
        assert_eq!(cronbach_alpha(&ratings).unwrap(), 1.0);
    }

    #[test]
    fn independent_raters_give_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let ratings: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let alpha = cronbach_alpha(&ratings).unwrap();
        assert!(alpha.abs() < 0.05, "alpha {alpha}");
    }

    #[test]
    fn three_rater_fixture_matches_covariance_route() {
        // Independent recomputation via the covariance identity:
        // var_total = sum_i var_i + sum_{i != j} cov_ij.
        let ratings: Vec<Vec<f64>> = vec![
            vec![3.0, 4.0, 3.0],
            vec![4.0, 5.0, 5.0],
            vec![2.0, 3.0, 2.0],
            vec![5.0, 5.0, 4.0],
            vec![1.0, 2.0, 2.0],
            vec![3.0, 3.0, 4.0],
        ];
        let k = 3usize;
        let n = ratings.len();
        let col = |j: usize| -> Vec<f64> { ratings.iter().map(|r| r[j]).collect() };
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let cov = |a: &[f64], b: &[f64]| {
            let (ma, mb) = (mean(a), mean(b));
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / (n as f64 - 1.0)
        };
        let mut var_sum = 0.0;
        let mut cov_sum = 0.0;
        for i in 0..k {
            for j in 0..k {
                let c = cov(&col(i), &col(j));
                if i == j {
                    var_sum += c;
                } else {
                    cov_sum += c;
                }
            }
        }
        let expected = k as f64 / (k as f64 - 1.0) * (1.0 - var_sum / (var_sum + cov_sum));
        let alpha = cronbach_alpha(&ratings).unwrap();
        assert!((alpha - expected).abs() < 1e-9, "{alpha} vs {expected}");
        assert!(alpha > 0.8); // strongly consistent fixture
    }

    #[test]
    fn zero_total_variance_is_undefined() {
        let ratings = vec![vec![2.0, 3.0], vec![3.0, 2.0], vec![2.5, 2.5]];
        assert!(matches!(
            cronbach_alpha(&ratings),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn shape_and_size_validation() {
        assert!(cronbach_alpha(&[vec![1.0, 2.0]]).is_err());
        assert!(cronbach_alpha(&[vec![1.0], vec![2.0]]).is_err());
        assert!(cronbach_alpha(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
