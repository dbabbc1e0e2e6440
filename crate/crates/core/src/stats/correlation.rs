use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::mean;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
}

/// Two-sided p-value of a correlation coefficient from
/// `t = r * sqrt((n - 2) / (1 - r^2))` with `n - 2` degrees of freedom.
pub fn t_test_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = (r * (df / denom).sqrt()).abs();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

/// Product-moment correlation; errors when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson and Spearman coefficients with two-sided t-distribution p-values.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("correlate: length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::invalid("correlate needs at least 3 pairs"));
    }
    let n = x.len();
    let pearson_r = pearson(x, y)?;
    let spearman_rho = pearson(&average_ranks(x), &average_ranks(y))?;
    Ok(Correlation {
        pearson_r,
        pearson_p: t_test_p_value(pearson_r, n),
        spearman_rho,
        spearman_p: t_test_p_value(spearman_rho, n),
    })
}
