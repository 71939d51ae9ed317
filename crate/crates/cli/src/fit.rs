use elastobie_core::{Error, Result};

use crate::records::Table;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

impl RateFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Result<RateFit> {
    if x.len() != y.len() {
        return Err(Error::RateFit(format!("{} x values against {} y values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::RateFit(format!("got {}", x.len())));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::RateFit(format!("non-positive value {v}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RateFit("all x values coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Fits `y_field` against `x_field` over the successful rows of `table`.
pub fn fit_rate(table: &Table, x_field: &str, y_field: &str) -> anyhow::Result<RateFit> {
    let x = table.column(x_field)?;
    let y = table.column(y_field)?;
    Ok(fit_log_log(&x, &y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_laws() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = eps.iter().map(|e: &f64| e.powi(4)).collect();
        assert!((fit_log_log(&eps, &y).unwrap().slope - 4.0).abs() <= 1e-12);
        let mu = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = mu.iter().map(|m: &f64| m.powf(-0.5)).collect();
        assert!((fit_log_log(&mu, &y).unwrap().slope + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_log_log(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_log_log(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_log_log(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fit_over_table_skips_failed_rows() {
        let mut t = Table::new("demo.v1", &["x", "y"]);
        for x in [1.0, 2.0, 4.0] {
            t.push(vec![x, 3.0 * x * x]);
        }
        t.push_failed(&[8.0], "boom".into());
        let f = fit_rate(&t, "x", "y").unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.predict(8.0) - 192.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(p in -6.0f64..6.0, c in 0.01f64..100.0) {
            let x = [0.5f64, 1.0, 2.0, 4.0, 8.0];
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
            let f = fit_log_log(&x, &y).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-10);
            prop_assert!((f.intercept - c.ln()).abs() < 1e-10);
        }
    }
}
