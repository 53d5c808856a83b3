use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest sample accepted by [`gaussianity`].
pub const MIN_REPLICAS: usize = 500;
pub const SKEW_LIMIT: f64 = 0.25;
pub const KURTOSIS_LIMIT: f64 = 0.5;
/// KS flag threshold is this factor times the asymptotic 5% critical value.
pub const KS_FACTOR: f64 = 1.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanSe::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (variance(xs) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        MeanSe { mean, se, count: n }
    }

    /// `|mean| <= k * se`.
    pub fn within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the unbiased sample variance (normal-theory fourth
/// moment estimate).
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

/// Kolmogorov distance between the sample and a normal law.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> f64 {
    let Ok(normal) = Normal::new(mean, sd) else {
        return f64::NAN;
    };
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, &x)| {
            let c = normal.cdf(x);
            (c - k as f64 / n).abs().max((k as f64 + 1.0) / n - c)
        })
        .fold(0.0, f64::max)
}

/// Sample moments and normality flags for one (test function, time, N).
#[derive(Clone, Debug, Serialize)]
pub struct GaussianityReport {
    pub label: String,
    pub replicas: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks: f64,
    pub ks_threshold: f64,
    pub degenerate: bool,
    pub skew_flag: bool,
    pub kurtosis_flag: bool,
    pub ks_flag: bool,
}

impl GaussianityReport {
    pub fn passes(&self) -> bool {
        !(self.degenerate || self.skew_flag || self.kurtosis_flag || self.ks_flag)
    }
}

/// Moments and KS distance to the fitted normal; errors below 500 replicas.
pub fn gaussianity(label: impl Into<String>, xs: &[f64]) -> Result<GaussianityReport> {
    let r = xs.len();
    if r < MIN_REPLICAS {
        return Err(Error::InsufficientReplicas {
            got: r,
            required: MIN_REPLICAS,
        });
    }
    let n = r as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let ks_threshold = KS_FACTOR * 1.36 / n.sqrt();
    let degenerate = !(m2 > 1e-300) || m2.sqrt() <= 1e-12 * m.abs().max(1e-300);
    let (skew, exkurt, ks) = if degenerate {
        (0.0, 0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0, ks_normal(xs, m, var.sqrt()))
    };
    Ok(GaussianityReport {
        label: label.into(),
        replicas: r,
        mean: m,
        variance: var,
        skewness: skew,
        excess_kurtosis: exkurt,
        ks,
        ks_threshold,
        degenerate,
        skew_flag: skew.abs() > SKEW_LIMIT,
        kurtosis_flag: exkurt.abs() > KURTOSIS_LIMIT,
        ks_flag: ks > ks_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gaussian_sample_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rep = gaussianity("z", &xs).unwrap();
        assert!(rep.passes(), "{rep:?}");
        assert!((rep.variance - 1.0).abs() < 0.1);
    }

    #[test]
    fn exponential_sample_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..2000).map(|_| rand_distr::Exp1.sample(&mut rng)).collect();
        let rep = gaussianity("e", &xs).unwrap();
        assert!(rep.skew_flag && rep.kurtosis_flag && rep.ks_flag);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let rep = gaussianity("one", &[0.0; 600]).unwrap();
        assert!(rep.degenerate && !rep.passes());
    }

    #[test]
    fn too_few_replicas() {
        assert!(matches!(
            gaussianity("x", &[0.0; 10]),
            Err(Error::InsufficientReplicas { got: 10, .. })
        ));
    }

    #[test]
    fn mean_se_of_known_sample() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
