//! Small statistics helpers used by analyses and reports.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

/// Ranks with ties assigned their average rank (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Outcome of a one-sided sign test of "differences tend to be positive".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub positive: usize,
    /// Non-zero differences; exact ties are discarded.
    pub trials: usize,
    pub p_value: f64,
}

/// One-sided sign test: `P(X >= positive)` for `X ~ Binomial(trials, 1/2)`.
pub fn sign_test_greater(differences: &[f64]) -> SignTest {
    let positive = differences.iter().filter(|d| **d > 0.0).count();
    let trials = differences.iter().filter(|d| **d != 0.0).count();
    let p_value = if positive == 0 {
        1.0
    } else {
        let dist = Binomial::new(0.5, trials as u64).expect("p = 1/2 is valid");
        dist.sf(positive as u64 - 1)
    };
    SignTest {
        positive,
        trials,
        p_value,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_of_monotone_map_is_one() {
        let x = [0.3, -1.0, 2.0, 5.0, 0.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &z).unwrap().unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_textbook_value() {
        // d = [0, 1, -1, 0, 0]; rho = 1 - 6 * 2 / (5 * 24).
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 3.0, 2.0, 4.0, 5.0];
        assert!((spearman(&x, &y).unwrap().unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn constant_side_has_no_correlation() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), None);
    }

    #[test]
    fn sign_test_reference_values() {
        // 15 of 20: sum_{k>=15} C(20,k) / 2^20 = 21700 / 1048576.
        let mut d = vec![1.0; 15];
        d.extend([-1.0; 5]);
        let t = sign_test_greater(&d);
        assert_eq!((t.positive, t.trials), (15, 20));
        assert!((t.p_value - 21700.0 / 1048576.0).abs() < 1e-12);
        // 14 of 20 is not significant at 0.05: 60460 / 1048576.
        let mut d = vec![1.0; 14];
        d.extend([-1.0; 6]);
        assert!((sign_test_greater(&d).p_value - 60460.0 / 1048576.0).abs() < 1e-12);
    }

    #[test]
    fn sign_test_drops_ties() {
        let t = sign_test_greater(&[0.0, 0.0, 1.0]);
        assert_eq!((t.positive, t.trials), (1, 1));
        assert!((t.p_value - 0.5).abs() < 1e-15);
        assert_eq!(sign_test_greater(&[0.0, -1.0]).p_value, 1.0);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[0.8; 4]).unwrap();
        assert!((m - 0.8).abs() < 1e-15 && s < 1e-15);
        let (m, s) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[]), None);
    }
}
