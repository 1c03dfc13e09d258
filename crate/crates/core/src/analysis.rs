//! Delta-method predictions of cross-path variability and their empirical
//! counterparts.

use serde::{Deserialize, Serialize};

use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::metrics::{self, Scope};
use crate::stats;

/// Fewest paths for which cross-path CVs and correlations are reported.
pub const MIN_PATHS: usize = 30;

fn check_cv(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid(name, format!("{v} is not a nonnegative number")));
    }
    Ok(())
}

fn check_rho(name: &str, rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::invalid(name, format!("correlation {rho} is outside [-1, 1]")));
    }
    Ok(())
}

fn clamped_sqrt(radicand: f64, what: &str) -> f64 {
    if radicand < 0.0 {
        log::warn!("{what}: negative radicand {radicand:e} clamped to 0");
        return 0.0;
    }
    radicand.sqrt()
}

/// CV of `X / Y` to first order: `sqrt(cv_x^2 + cv_y^2 - 2 rho cv_x cv_y)`.
pub fn delta_cv_ratio(cv_x: f64, cv_y: f64, rho: f64) -> Result<f64> {
    check_cv("cv_x", cv_x)?;
    check_cv("cv_y", cv_y)?;
    check_rho("rho", rho)?;
    Ok(clamped_sqrt(
        cv_x * cv_x + cv_y * cv_y - 2.0 * rho * cv_x * cv_y,
        "delta_cv_ratio",
    ))
}

/// CV of a product of `K` factors to first order, given their CVs and
/// correlation matrix.
pub fn delta_cv_product(cvs: &[f64], corr: &[Vec<f64>]) -> Result<f64> {
    let k = cvs.len();
    if k == 0 {
        return Err(Error::Empty("cvs"));
    }
    if corr.len() != k || corr.iter().any(|r| r.len() != k) {
        return Err(Error::ShapeMismatch(format!("correlation matrix must be {k}x{k}")));
    }
    for (i, &c) in cvs.iter().enumerate() {
        check_cv(&format!("cvs[{i}]"), c)?;
    }
    for i in 0..k {
        if corr[i][i] != 1.0 {
            return Err(Error::invalid("corr", format!("diagonal entry {i} is {}, not 1", corr[i][i])));
        }
        for j in 0..k {
            check_rho(&format!("corr[{i}][{j}]"), corr[i][j])?;
            if corr[i][j] != corr[j][i] {
                return Err(Error::invalid("corr", "matrix is not symmetric"));
            }
        }
    }
    let mut s = cvs.iter().fold(0.0, |a, &c| a + c * c);
    for i in 0..k {
        for j in i + 1..k {
            s += 2.0 * corr[i][j] * cvs[i] * cvs[j];
        }
    }
    Ok(clamped_sqrt(s, "delta_cv_product"))
}

/// Cross-path CV that reads 0 for a zero spread even when the mean is 0.
fn spread_cv(xs: &[f64]) -> f64 {
    let s = stats::Summary::of(xs);
    if s.std == 0.0 {
        0.0
    } else {
        s.cv
    }
}

/// Correlation with undefined cases (a side without spread) mapped to 0.
fn correlation(xs: &[f64], ys: &[f64]) -> (f64, bool) {
    let r = stats::pearson(xs, ys);
    if r.is_nan() {
        (0.0, true)
    } else {
        (r, false)
    }
}

fn check_paths(result: &SimulationResult) -> Result<()> {
    if result.paths < MIN_PATHS {
        return Err(Error::InsufficientPaths {
            needed: MIN_PATHS,
            got: result.paths,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteringRow {
    pub echelon: Scope,
    /// Cross-path CV of `Var(O_k)`.
    pub cv_x: f64,
    /// Cross-path CV of `Var(O_{k-1})`.
    pub cv_y: f64,
    pub rho: f64,
    pub predicted_cv: f64,
    pub empirical_cv: f64,
    /// Set when a correlation was undefined (no cross-path spread).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteringReport {
    pub rows: Vec<FilteringRow>,
}

impl FilteringReport {
    pub fn row(&self, k: usize) -> Option<&FilteringRow> {
        self.rows.iter().find(|r| r.echelon == Scope::Echelon(k))
    }

    /// `echelon,cv_x,cv_y,rho,predicted_cv,empirical_cv`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("echelon,cv_x,cv_y,rho,predicted_cv,empirical_cv\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.echelon, r.cv_x, r.cv_y, r.rho, r.predicted_cv, r.empirical_cv
            ));
        }
        s
    }
}

fn order_variances(result: &SimulationResult, k: usize) -> Vec<f64> {
    let w = result.metric_start()..result.horizon;
    (0..result.paths)
        .map(|i| metrics::series_variance(&result.order_series(i, k)[w.clone()]))
        .collect()
}

/// Delta-method prediction against the empirical CV of `BWR_k` for every
/// echelon past the first.
pub fn filtering_report(result: &SimulationResult) -> Result<FilteringReport> {
    check_paths(result)?;
    if result.horizon - result.metric_start() < 2 {
        return Err(Error::invalid("T", "need at least 2 periods after burn-in"));
    }
    let mut rows = Vec::new();
    let mut below = order_variances(result, 0);
    for k in 1..result.echelons {
        let x = order_variances(result, k);
        let y = below;
        let (cv_x, cv_y) = (spread_cv(&x), spread_cv(&y));
        let (rho, degenerate) = correlation(&x, &y);
        let bwr = metrics::bwr(result, k)?;
        rows.push(FilteringRow {
            echelon: Scope::Echelon(k),
            cv_x,
            cv_y,
            rho,
            predicted_cv: delta_cv_ratio(cv_x, cv_y, rho)?,
            empirical_cv: spread_cv(&bwr.per_path),
            degenerate: degenerate || bwr.degenerate_paths > 0,
        });
        below = x;
    }
    Ok(FilteringReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Cross-path CV of `BWR_k`, one per echelon.
    pub cvs: Vec<f64>,
    /// Cross-path correlation of `BWR_i` and `BWR_j`.
    pub corr: Vec<Vec<f64>>,
    /// Full-covariance delta-method prediction.
    pub predicted_cv: f64,
    /// Independence approximation `sqrt(sum cv_k^2)`.
    pub naive_cv: f64,
    pub empirical_cv: f64,
}

impl ConcentrationReport {
    pub fn has_negative_correlation(&self) -> bool {
        let k = self.cvs.len();
        (0..k).any(|i| (i + 1..k).any(|j| self.corr[i][j] < 0.0))
    }
}

/// CV of the cumulative ratio predicted from per-echelon CVs and
/// correlations, next to its empirical value.
pub fn cumulative_concentration_report(result: &SimulationResult) -> Result<ConcentrationReport> {
    check_paths(result)?;
    let kc = result.echelons;
    let factors = (0..kc)
        .map(|k| metrics::bwr(result, k).map(|m| m.per_path))
        .collect::<Result<Vec<_>>>()?;
    let cvs: Vec<f64> = factors.iter().map(|f| spread_cv(f)).collect();
    let mut corr = vec![vec![1.0; kc]; kc];
    for i in 0..kc {
        for j in i + 1..kc {
            let (r, _) = correlation(&factors[i], &factors[j]);
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    let cum = metrics::cumulative_bwr(result, kc - 1)?;
    let naive = clamped_sqrt(cvs.iter().fold(0.0, |a, &c| a + c * c), "naive");
    Ok(ConcentrationReport {
        predicted_cv: delta_cv_product(&cvs, &corr)?,
        naive_cv: naive,
        empirical_cv: spread_cv(&cum.per_path),
        cvs,
        corr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ratio_examples() {
        assert_eq!(delta_cv_ratio(0.3, 0.3, 1.0).unwrap(), 0.0);
        assert!((delta_cv_ratio(0.145, 0.146, 0.997).unwrap() - 0.0112).abs() < 5e-4);
        assert!((delta_cv_ratio(0.1, 0.2, 0.0).unwrap() - 0.05f64.sqrt()).abs() < 1e-12);
        assert!(delta_cv_ratio(0.1, 0.2, 1.5).is_err());
        assert!(delta_cv_ratio(-0.1, 0.2, 0.5).is_err());
    }

    #[test]
    fn ratio_limits() {
        let (a, b) = (0.17, 0.41);
        assert!((delta_cv_ratio(a, b, 1.0).unwrap() - (a - b).abs()).abs() < 1e-12);
        assert!((delta_cv_ratio(a, b, -1.0).unwrap() - (a + b)).abs() < 1e-12);
        assert_eq!(delta_cv_ratio(a, b, 0.3).unwrap(), delta_cv_ratio(b, a, 0.3).unwrap());
        assert_eq!(delta_cv_ratio(0.0, 0.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn product_examples() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((delta_cv_product(&[0.1, 0.1], &id).unwrap() - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(delta_cv_product(&[0.37], &[vec![1.0]]).unwrap(), 0.37);
        let neg = vec![vec![1.0, -0.8], vec![-0.8, 1.0]];
        assert!(delta_cv_product(&[0.2, 0.2], &neg).unwrap() < delta_cv_product(&[0.2, 0.2], &id).unwrap());
        assert!(delta_cv_product(&[0.1, 0.1], &[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(delta_cv_product(&[0.1, 0.1], &[vec![1.0, 0.5]]).is_err());
        // perfectly anti-correlated equal factors cancel
        let anti = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert_eq!(delta_cv_product(&[0.2, 0.2], &anti).unwrap(), 0.0);
    }

    // For bivariate lognormal X, Y with log-scale std s and log correlation r,
    // X/Y is lognormal with log variance 2 s^2 (1 - r), so its CV is known.
    #[test]
    fn ratio_prediction_against_lognormal_oracle() {
        let s2 = 1.01f64.ln(); // CV(X) = CV(Y) = 0.1
        let target_rho = 0.9;
        // raw correlation (e^{r s^2} - 1) / (e^{s^2} - 1) = 0.9
        let r = (1.0 + target_rho * (s2.exp() - 1.0)).ln() / s2;
        let exact = ((2.0 * s2 * (1.0 - r)).exp() - 1.0).sqrt();
        let predicted = delta_cv_ratio(0.1, 0.1, target_rho).unwrap();
        assert!(((predicted - exact) / exact).abs() < 0.10, "{predicted} vs {exact}");

        let mut rng = crate::rng::stream(7);
        let s = s2.sqrt();
        let n = 200_000;
        let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let w = r * z1 + (1.0 - r * r).sqrt() * z2;
            xs.push((s * z1).exp());
            ys.push((s * w).exp());
        }
        let ratio: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x / y).collect();
        let empirical = stats::cv(&ratio);
        assert!(((predicted - empirical) / empirical).abs() < 0.10, "{predicted} vs {empirical}");
        let from_samples = delta_cv_ratio(stats::cv(&xs), stats::cv(&ys), stats::pearson(&xs, &ys)).unwrap();
        assert!(((from_samples - empirical) / empirical).abs() < 0.10);
    }
}
