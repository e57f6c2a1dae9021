use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LongTailFamily {
    #[default]
    LogNormal,
}

/// Parameters of a long-tail distribution over positive reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongTailParams {
    #[serde(default)]
    pub family: LongTailFamily,
    /// Mean of the log.
    pub mu: f64,
    /// Standard deviation of the log.
    pub sigma: f64,
}

impl LongTailParams {
    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        let params = LongTailParams {
            family: LongTailFamily::LogNormal,
            mu,
            sigma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "log-normal needs finite mu and sigma > 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (x.ln() - self.mu) / self.sigma;
        -0.5 * z * z - x.ln() - self.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub(crate) fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // validated at construction; sigma > 0
        LogNormal::new(self.mu, self.sigma)
            .expect("validated log-normal")
            .sample(rng)
    }
}

/// Closed-form maximum-likelihood log-normal fit.
///
/// `mu` is the mean of the log samples and `sigma` their (population)
/// standard deviation.
pub fn fit_log_normal(samples: &[f64]) -> Result<LongTailParams> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NonPositiveSample(bad));
    }
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if !(sigma > 1e-12) {
        return Err(Error::DegenerateSample);
    }
    LongTailParams::log_normal(mu, sigma)
}

/// `n` i.i.d. draws from the distribution.
pub fn sample_long_tail(params: &LongTailParams, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = seed.derive("long-tail").rng();
    Ok((0..n).map(|_| params.sample_one(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    #[test]
    fn degenerate_sample_is_rejected() {
        assert!(matches!(fit_log_normal(&[E, E, E, E]), Err(Error::DegenerateSample)));
        assert!(matches!(fit_log_normal(&[1.0, 0.0]), Err(Error::NonPositiveSample(_))));
        assert!(fit_log_normal(&[1.0]).is_err());
    }

    #[test]
    fn two_point_closed_form() {
        let p = fit_log_normal(&[1.0, E * E]).unwrap();
        assert_abs_diff_eq!(p.mu, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.sigma, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_generator() {
        let truth = LongTailParams::log_normal(0.5, 1.2).unwrap();
        let draws = sample_long_tail(&truth, 100_000, SeedSpec::new(11)).unwrap();
        let fit = fit_log_normal(&draws).unwrap();
        assert!((fit.mu - 0.5).abs() < 0.02, "{fit:?}");
        assert!((fit.sigma - 1.2).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn median_of_standard_log_normal() {
        let p = LongTailParams::log_normal(0.0, 1.0).unwrap();
        let mut draws = sample_long_tail(&p, 100_000, SeedSpec::new(5)).unwrap();
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        assert!((median - 1.0).abs() < 0.03, "median {median}");
        assert!(draws.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn narrow_sigma_concentrates_at_exp_mu() {
        let p = LongTailParams::log_normal(1.5, 1e-9).unwrap();
        let draws = sample_long_tail(&p, 1, SeedSpec::new(0)).unwrap();
        assert_abs_diff_eq!(draws[0], 1.5f64.exp(), epsilon = 1e-6);
    }

    #[test]
    fn same_seed_same_draws() {
        let p = LongTailParams::log_normal(0.0, 1.0).unwrap();
        assert_eq!(
            sample_long_tail(&p, 50, SeedSpec::new(9)).unwrap(),
            sample_long_tail(&p, 50, SeedSpec::new(9)).unwrap()
        );
    }

    #[test]
    fn pdf_matches_closed_form() {
        let p = LongTailParams::log_normal(0.0, 1.0).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(p.pdf(1.0), expected, epsilon = 1e-15);
        assert_eq!(p.pdf(0.0), 0.0);
    }
}
