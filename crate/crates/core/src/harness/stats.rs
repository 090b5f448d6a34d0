//! Across-seed summaries.

/// `(mean, 1.96 * std / sqrt(n))` with the sample standard deviation; the
/// half-width is zero for a single sample.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// `avg[t] = (c_0 + ... + c_t) / (t + 1)`.
pub fn running_average(costs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    costs
        .iter()
        .enumerate()
        .map(|(t, c)| {
            acc += c;
            acc / (t + 1) as f64
        })
        .collect()
}

/// Per-step mean and CI half-width of instantaneous and running-average cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    pub mean: Vec<f64>,
    pub ci: Vec<f64>,
    pub avg_mean: Vec<f64>,
    pub avg_ci: Vec<f64>,
}

impl CostSummary {
    /// `per_seed[s][t]`; every row must have the same length.
    pub fn from_costs(per_seed: &[&[f64]]) -> Self {
        let len = per_seed.first().map_or(0, |c| c.len());
        let averages: Vec<Vec<f64>> = per_seed.iter().map(|c| running_average(c)).collect();
        let mut out = CostSummary {
            mean: Vec::with_capacity(len),
            ci: Vec::with_capacity(len),
            avg_mean: Vec::with_capacity(len),
            avg_ci: Vec::with_capacity(len),
        };
        let mut column = Vec::with_capacity(per_seed.len());
        for t in 0..len {
            column.clear();
            column.extend(per_seed.iter().map(|c| c[t]));
            let (m, h) = mean_ci(&column);
            out.mean.push(m);
            out.ci.push(h);
            column.clear();
            column.extend(averages.iter().map(|c| c[t]));
            let (m, h) = mean_ci(&column);
            out.avg_mean.push(m);
            out.avg_ci.push(h);
        }
        out
    }
}
