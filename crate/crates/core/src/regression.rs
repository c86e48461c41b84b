//! Ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares line `y = intercept + slope * x`.
pub fn simple_ols(x: &[f64], y: &[f64]) -> Result<SimpleFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("a line fit needs at least 3 points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::undefined("line fit with constant x"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let sigma2 = ssr / (nf - 2.0);
    Ok(SimpleFit {
        slope,
        intercept,
        slope_stderr: (sigma2 / sxx).sqrt(),
        intercept_stderr: (sigma2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        r_squared: r_squared(ssr, syy),
        n,
    })
}

fn r_squared(ssr: f64, sst: f64) -> f64 {
    if sst == 0.0 {
        if ssr == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Column names, `intercept` first.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Two-sided p-values from Student's t with `n - p` degrees of freedom.
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Relative size below which a diagonal entry of R marks a column as
/// linearly dependent on the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Regresses `y` on an intercept plus the given columns, via Householder QR.
pub fn ols(names: &[&str], columns: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = y.len();
    let p = columns.len() + 1;
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("design columns and response have mismatched shapes"));
    }
    if n <= p {
        return Err(Error::invalid(format!(
            "{n} observations cannot identify {p} coefficients"
        )));
    }
    if columns.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression input contains non-finite values"));
    }

    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let all_names: Vec<String> = std::iter::once("intercept".to_string())
        .chain(names.iter().map(|s| s.to_string()))
        .collect();

    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
        })
        .map(|j| all_names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(all_names.clone()))?;
    let residuals: Vec<f64> = (&yv - &x * &beta).iter().copied().collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let my = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();

    let dof = (n - p) as f64;
    let sigma2 = ssr / dof;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient(all_names.clone()))?;
    let cov_unscaled = &r_inv * r_inv.transpose();
    let t_dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let stderrs: Vec<f64> = (0..p).map(|j| (sigma2 * cov_unscaled[(j, j)]).sqrt()).collect();
    let t_values: Vec<f64> = coefficients
        .iter()
        .zip(&stderrs)
        .map(|(b, se)| {
            if *se == 0.0 {
                if *b == 0.0 {
                    0.0
                } else {
                    f64::INFINITY * b.signum()
                }
            } else {
                b / se
            }
        })
        .collect();
    let p_values = t_values
        .iter()
        .map(|t| {
            if t.is_infinite() {
                0.0
            } else {
                (2.0 * t_dist.sf(t.abs())).min(1.0)
            }
        })
        .collect();

    Ok(LinearFit {
        names: all_names,
        coefficients,
        stderrs,
        t_values,
        p_values,
        r_squared: r_squared(ssr, sst),
        n,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = simple_ols(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn multiple_regression_matches_simple() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| 1.5 * v + ((i * 13) % 7) as f64)
            .collect();
        let s = simple_ols(&x, &y).unwrap();
        let m = ols(&["x"], std::slice::from_ref(&x), &y).unwrap();
        assert!((m.coefficients[1] - s.slope).abs() < 1e-10);
        assert!((m.coefficients[0] - s.intercept).abs() < 1e-10);
        assert!((m.stderrs[1] - s.slope_stderr).abs() < 1e-10);
        assert!((m.r_squared - s.r_squared).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_named() {
        let a: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let c: Vec<f64> = (0..20).map(|i| (i * i % 7) as f64).collect();
        let y: Vec<f64> = (0..20).map(f64::from).collect();
        match ols(&["a", "c", "b"], &[a, c, b], &y) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["b".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let k = vec![4.0; 20];
        assert!(matches!(ols(&["k"], &[k], &y), Err(Error::RankDeficient(_))));
    }
}
