//! Order-fixed reductions for Monte-Carlo samples.

/// Neumaier-compensated sum. The result depends only on the order of `values`.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean (two-pass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

pub fn mean_estimate(samples: &[f64]) -> MeanEstimate {
    let n = samples.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, std_error: f64::NAN };
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n < 2 {
        return MeanEstimate { mean, std_error: f64::NAN };
    }
    let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
    let var = ss / (n - 1) as f64;
    MeanEstimate { mean, std_error: (var / n as f64).sqrt() }
}

/// Column-wise [`mean_estimate`] over rows of equal length.
pub fn column_estimates(rows: &[Vec<f64>], width: usize) -> Vec<MeanEstimate> {
    let mut column = Vec::with_capacity(rows.len());
    (0..width)
        .map(|j| {
            column.clear();
            column.extend(rows.iter().map(|r| r[j]));
            mean_estimate(&column)
        })
        .collect()
}
