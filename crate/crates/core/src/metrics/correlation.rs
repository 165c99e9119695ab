//! Pearson, Spearman (mean ranks for ties), and Kendall tau-b.

use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64], op: &'static str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op,
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("need at least 2 observations, got {}", x.len()),
        });
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, "pearson")?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined(
            "pearson correlation undefined for constant input".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties receive the mean of their rank range.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, "spearman")?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry).map_err(|e| match e {
        Error::Undefined(_) => {
            Error::Undefined("spearman correlation undefined for constant input".into())
        }
        other => other,
    })
}

/// Number of swaps a merge sort performs to sort `ys`; equals the number of
/// discordant pairs once the data is pre-sorted by the other variable.
fn merge_sort_swaps(ys: &mut [f64]) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_swaps(&mut ys[..mid]) + merge_sort_swaps(&mut ys[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if ys[i] <= ys[j] {
            merged.push(ys[i]);
            i += 1;
        } else {
            merged.push(ys[j]);
            swaps += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&ys[i..mid]);
    merged.extend_from_slice(&ys[j..n]);
    ys.copy_from_slice(&merged);
    swaps
}

fn tie_pair_count(sorted_keys: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted_keys.len() {
        let mut j = i;
        while j + 1 < sorted_keys.len() && sorted_keys[j + 1] == sorted_keys[i] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    total
}

/// Tie-corrected Kendall rank correlation via the sort-and-count route:
/// discordant pairs are merge-sort swaps of y after sorting by (x, y), and
/// tie corrections come from run lengths.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, "kendall_tau_b")?;
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .expect("finite values")
            .then(y[a].partial_cmp(&y[b]).expect("finite values"))
    });
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pair_count(&xs);
    let mut ys_sorted = ys.clone();
    ys_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n2 = tie_pair_count(&ys_sorted);
    // joint ties: runs of equal (x, y) pairs in the sorted order
    let mut n3 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[j + 1] == xs[i] && ys[j + 1] == ys[i] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        n3 += t * (t - 1) / 2;
        i = j + 1;
    }

    let swaps = merge_sort_swaps(&mut ys);
    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(Error::Undefined(
            "kendall tau-b undefined for constant input".into(),
        ));
    }
    let concordant_minus_discordant =
        (n0 - n1 - n2 + n3) as f64 - 2.0 * swaps as f64;
    Ok((concordant_minus_discordant / denom.sqrt()).clamp(-1.0, 1.0))
}

/// All three coefficients; fails if any is undefined on this input.
pub fn correlations(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    Ok((pearson(x, y)?, spearman(x, y)?, kendall_tau_b(x, y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) pair-enumeration oracle for tau-b.
    fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    // joint tie: contributes to neither axis count
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if dx.signum() == dy.signum() {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let denom = (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt();
        (denom > 0.0).then(|| (c - d) as f64 / denom)
    }

    #[test]
    fn linear_relation_gives_ones() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let (p, s, k) = correlations(&x, &y).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_decreasing_cubic() {
        let x = vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| -v * v * v).collect();
        let (p, s, k) = correlations(&x, &y).unwrap();
        assert!(p < 0.0 && p > -1.0, "pearson {p}");
        assert!((s + 1.0).abs() < 1e-12);
        assert!((k + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_matches_brute_force_on_all_small_tied_inputs() {
        // exhaustive over small integer-valued vectors (dense ties)
        for n in 2..=5usize {
            let mut grid = vec![0usize; 2 * n];
            loop {
                let x: Vec<f64> = grid[..n].iter().map(|&v| v as f64).collect();
                let y: Vec<f64> = grid[n..].iter().map(|&v| v as f64).collect();
                match (kendall_tau_b(&x, &y), kendall_brute(&x, &y)) {
                    (Ok(fast), Some(brute)) => {
                        assert!((fast - brute).abs() < 1e-12, "x {x:?} y {y:?}")
                    }
                    (Err(_), None) => {}
                    (fast, brute) => panic!("definedness mismatch {fast:?} {brute:?} x {x:?} y {y:?}"),
                }
                // next assignment over base-3 digits
                let mut pos = 0;
                loop {
                    if pos == grid.len() {
                        return;
                    }
                    grid[pos] += 1;
                    if grid[pos] < 3 {
                        break;
                    }
                    grid[pos] = 0;
                    pos += 1;
                }
            }
        }
    }

    #[test]
    fn kendall_matches_brute_force_on_random_length_eight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..500 {
            let n = rng.gen_range(2..=8);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
            match (kendall_tau_b(&x, &y), kendall_brute(&x, &y)) {
                (Ok(fast), Some(brute)) => {
                    assert!((fast - brute).abs() < 1e-12, "x {x:?} y {y:?}")
                }
                (Err(_), None) => {}
                (fast, brute) => panic!("definedness mismatch {fast:?} {brute:?}"),
            }
        }
    }

    #[test]
    fn constant_input_is_undefined() {
        let x = vec![1.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(pearson(&x, &y), Err(Error::Undefined(_))));
        assert!(matches!(spearman(&x, &y), Err(Error::Undefined(_))));
        assert!(matches!(kendall_tau_b(&x, &y), Err(Error::Undefined(_))));
        assert!(correlations(&x, &y).is_err());
    }

    #[test]
    fn invariance_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(5..40);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (p, s, k) = correlations(&x, &y).unwrap();

            // strictly increasing affine transform of x: all three invariant
            let ax: Vec<f64> = x.iter().map(|v| 3.5 * v + 2.0).collect();
            let (p2, s2, k2) = correlations(&ax, &y).unwrap();
            assert!((p - p2).abs() < 1e-12);
            assert!((s - s2).abs() < 1e-12);
            assert!((k - k2).abs() < 1e-12);

            // strictly increasing nonlinear transform: rank-based invariant
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let (_, s3, k3) = correlations(&ex, &y).unwrap();
            assert!((s - s3).abs() < 1e-12);
            assert!((k - k3).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_handles_ties_with_mean_ranks() {
        let r = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }
}
