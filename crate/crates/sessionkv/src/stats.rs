//! Percentiles and the latency-vs-depth regression.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    EmptyPool,
    /// Regression needs at least two distinct x values.
    DegenerateRegression,
}

impl std::fmt::Display for StatsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatsError::EmptyPool => write!(f, "empty sample pool"),
            StatsError::DegenerateRegression => {
                write!(f, "regression needs at least two distinct depths")
            }
        }
    }
}

impl std::error::Error for StatsError {}

/// Nearest-rank percentile: the value at index ⌈q·n⌉ of the sorted pool.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64, StatsError> {
    assert!(q > 0.0 && q <= 1.0, "q must be in (0,1]");
    if samples.is_empty() {
        return Err(StatsError::EmptyPool);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Ordinary least squares of y on x plus the Pearson correlation.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), StatsError> {
    assert_eq!(xs.len(), ys.len());
    let distinct = {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        return Err(StatsError::DegenerateRegression);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let pearson = if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };
    Ok((slope, pearson))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        assert_eq!(percentile(&[5.0], 0.99).unwrap(), 5.0);
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 0.99).unwrap(), 99.0);
        assert_eq!(percentile(&v, 0.5).unwrap(), 50.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 100.0);
        assert_eq!(percentile(&[], 0.5), Err(StatsError::EmptyPool));
    }

    #[test]
    fn percentile_matches_median_on_uniform_pool() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let p50 = percentile(&v, 0.5).unwrap();
        assert!((p50 - 0.5).abs() < 0.02);
    }

    #[test]
    fn ols_recovers_synthetic_slope() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..500).map(|i| (i % 50) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + rng.gen_range(-0.1..0.1)).collect();
        let (slope, r) = ols(&xs, &ys).unwrap();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
        assert!(r >= 0.99, "correlation {r}");
    }

    #[test]
    fn ols_flat_input_has_zero_slope() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [7.0, 7.0, 7.0, 7.0];
        let (slope, _) = ols(&xs, &ys).unwrap();
        assert_eq!(slope, 0.0);
    }

    #[test]
    fn ols_rejects_single_depth() {
        assert_eq!(
            ols(&[3.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::DegenerateRegression)
        );
    }
}
