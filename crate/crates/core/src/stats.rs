//! Small numeric helpers: per-dimension standardization, distances, medians.

use crate::error::{Error, Result};

/// Per-dimension z-scoring fit on a training set and applied at inference.
///
/// Dimensions with zero spread get a unit scale so transforms stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fit means and standard deviations (population, 1/n) per dimension.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("cannot standardize an empty set".into()));
        }
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::InvalidInput("inconsistent row lengths".into()));
            }
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; dim];
        for row in rows {
            for ((var, &m), &v) in vars.iter_mut().zip(&means).zip(row) {
                let d = v - m;
                *var += d * d;
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&z, &m), &s)| z * s + m)
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Elementwise mean of a non-empty set of equal-length rows.
pub fn mean_row(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("mean of empty set".into()));
    }
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for row in rows {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    Ok(out)
}

/// Median of a non-empty slice. Even lengths average the two middle values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("median of empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Round half away from zero, floored at 1. Used for subset sizes so even
/// tiny fractions still yield data.
pub fn subset_size(fraction: f64, n: usize) -> usize {
    let k = (fraction * n as f64).abs().round() as usize;
    k.clamp(1, n)
}

/// True when every value in every row is finite.
pub fn all_finite(rows: &[Vec<f64>]) -> bool {
    rows.iter().all(|r| r.iter().all(|v| v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_round_trip_is_identity() {
        let rows = vec![
            vec![1.0, 100.0, -3.0],
            vec![2.0, 250.0, -1.0],
            vec![4.0, 400.0, 0.5],
        ];
        let s = Standardizer::fit(&rows).unwrap();
        for row in &rows {
            let back = s.inverse(&s.transform(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardizer_zero_spread_dimension() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 3.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.stds[0], 1.0);
        let z = s.transform(&rows[0]);
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn standardized_moments() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![6.0]];
        let s = Standardizer::fit(&rows).unwrap();
        let z: Vec<f64> = rows.iter().map(|r| s.transform(r)[0]).collect();
        let mean: f64 = z.iter().sum::<f64>() / z.len() as f64;
        let var: f64 = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[9.0, 1.0, 4.0]).unwrap(), 4.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 10.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn subset_size_rule() {
        assert_eq!(subset_size(1.0, 64), 64);
        assert_eq!(subset_size(0.1, 64), 6); // round(6.4)
        assert_eq!(subset_size(0.001, 64), 1); // floor at 1
        assert_eq!(subset_size(0.5, 5), 3); // round half away from zero: 2.5 -> 3
    }
}
