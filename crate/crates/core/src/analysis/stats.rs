//! Descriptive statistics shared across the pipeline.

use crate::error::{Error, Result};

/// Nearest-rank percentile of ascending `sorted` data: the element at
/// index `round(p * (n - 1))`.
pub fn percentile_nearest(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = (p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[pos.min(sorted.len() - 1)]
}

/// Quantile of ascending `sorted` data with linear interpolation between
/// closest ranks (position `p * (n - 1)`).
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v = sorted(values);
    (!v.is_empty()).then(|| quantile_linear(&v, 0.5))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn std_population(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!(
            "pearson: length mismatch {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let mx = mean(xs).unwrap();
    let my = mean(ys).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Column-wise standardization to mean 0 and population std 1.
/// `names` labels the columns for error messages.
pub fn zscore(rows: &[Vec<f64>], names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = rows.first() else {
        return Err(Error::Empty("feature matrix"));
    };
    let dims = first.len();
    if rows.iter().any(|r| r.len() != dims) {
        return Err(Error::Validation("ragged feature matrix".into()));
    }
    let mut out = rows.to_vec();
    for j in 0..dims {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let m = mean(&col).unwrap();
        let s = std_population(&col).unwrap();
        if !(s > 0.0) {
            let name = names.get(j).copied().unwrap_or("?");
            return Err(Error::ZeroVariance(format!("feature {name:?}")));
        }
        for r in out.iter_mut() {
            r[j] = (r[j] - m) / s;
        }
    }
    Ok(out)
}
