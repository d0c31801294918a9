//! Numerical checks behind the wrapped-noise construction: uniformity of a
//! wide wrapped Gaussian, the Irwin–Hall partition-of-unity identity, and a
//! Monte-Carlo check of the posterior mean and variance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diffusion::{posterior_mean_scalar, DiffusionSchedule};
use crate::error::{Error, Result};

/// Kolmogorov–Smirnov statistic of `samples` against Uniform[0, 1).
/// Sorts the slice in place.
pub fn ks_uniform(samples: &mut [f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples("KS test needs samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in samples.iter().enumerate() {
        let u = u.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - u).max(u - i as f64 / n);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n_samples: usize,
    pub sigma_ratio: f64,
}

/// Draws from N(0, (sigma_ratio * L)^2), wraps onto [0, L) and measures the
/// KS distance to the uniform distribution. The result does not depend on L,
/// so the check runs with L = 1.
pub fn wrapped_gaussian_uniformity(sigma_ratio: f64, n_samples: usize, rng: &mut impl Rng) -> Result<KsReport> {
    if !(sigma_ratio > 0.0 && sigma_ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma ratio must be positive, got {sigma_ratio}")));
    }
    if n_samples < 1000 {
        return Err(Error::InsufficientSamples(format!("need at least 1000 samples, got {n_samples}")));
    }
    let mut u: Vec<f64> = (0..n_samples)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            crate::geometry::wrap_coordinate(sigma_ratio * z, 1.0)
        })
        .collect();
    Ok(KsReport {
        statistic: ks_uniform(&mut u)?,
        n_samples,
        sigma_ratio,
    })
}

/// Density of the sum of 12 independent U(0,1) variables, shifted by -6 so
/// it is centred on zero.
pub fn irwin_hall_12_centered(x: f64) -> f64 {
    const N: usize = 12;
    let s = x + 6.0;
    if !(0.0..=N as f64).contains(&s) {
        return 0.0;
    }
    // symmetric about 6; evaluating on the left half keeps the alternating
    // sum short
    let s = if s > 6.0 { N as f64 - s } else { s };
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..=(s.floor() as usize).min(N) {
        if j > 0 {
            binom *= (N + 1 - j) as f64 / j as f64;
        }
        let term = binom * (s - j as f64).powi(N as i32 - 1);
        total += if j % 2 == 0 { term } else { -term };
    }
    total / 39_916_800.0
}

/// The wrapped sum `sum_{k=-6}^{5} f(y + k)` of the centred density; equal
/// to 1 on [0, 1) and defined as 0 elsewhere.
pub fn irwin_hall_wrapped_density(y: f64) -> f64 {
    if !(0.0..1.0).contains(&y) {
        return 0.0;
    }
    (-6..=5).map(|k| irwin_hall_12_centered(y + k as f64)).sum()
}

/// Which closed-form posterior variance the simulated chain agrees with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceCandidate {
    /// `a(t-1) (a(t) - a(t-1)) / (2 a(t))`, as used by the sampler.
    Halved,
    /// `a(t-1) (a(t) - a(t-1)) / a(t)`, the Gaussian posterior of the chain.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub t: usize,
    pub x0: f64,
    pub x_t: f64,
    pub bin_width: f64,
    pub n_samples: usize,
    pub n_in_bin: usize,
    pub empirical_mean: f64,
    pub formula_mean: f64,
    pub empirical_var: f64,
    pub halved_var: f64,
    pub full_var: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl PosteriorReport {
    pub fn mean_rel_error(&self) -> f64 {
        ((self.empirical_mean - self.formula_mean) / self.formula_mean).abs()
    }

    pub fn var_rel_error(&self, which: VarianceCandidate) -> f64 {
        let v = match which {
            VarianceCandidate::Halved => self.halved_var,
            VarianceCandidate::Full => self.full_var,
        };
        ((self.empirical_var - v) / v).abs()
    }

    /// The candidate closer (in relative terms) to the empirical variance.
    pub fn supported_variance(&self) -> VarianceCandidate {
        if self.var_rel_error(VarianceCandidate::Full) < self.var_rel_error(VarianceCandidate::Halved) {
            VarianceCandidate::Full
        } else {
            VarianceCandidate::Halved
        }
    }
}

/// Simulates `x_{t-1} = x0 + sqrt(a(t-1)) e1`, `x_t = x_{t-1} + sqrt(a(t) - a(t-1)) e2`
/// without wrapping, keeps draws whose `x_t` lands within `bin_width / 2` of
/// `x_t_probe`, and compares the moments of the kept `x_{t-1}` with the
/// closed forms. `bin_width` defaults to `0.02 sqrt(a(t))`.
pub fn posterior_mc_check(
    t: usize,
    schedule: &DiffusionSchedule,
    n_samples: usize,
    x0: f64,
    x_t_probe: f64,
    bin_width: Option<f64>,
    rng: &mut impl Rng,
) -> Result<PosteriorReport> {
    if t < 2 || t > schedule.t_max() {
        return Err(Error::InvalidArgument(format!(
            "t must lie in 2..={}, got {t}",
            schedule.t_max()
        )));
    }
    if n_samples < 100_000 {
        return Err(Error::InvalidArgument(format!("need at least 1e5 samples, got {n_samples}")));
    }
    let (a_prev, a_t) = (schedule.alpha(t - 1), schedule.alpha(t));
    let width = bin_width.unwrap_or(0.02 * a_t.sqrt());
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width must be positive, got {width}")));
    }
    let (s_prev, s_step) = (a_prev.sqrt(), (a_t - a_prev).sqrt());
    let mut kept = Vec::new();
    for _ in 0..n_samples {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let prev = x0 + s_prev * e1;
        let xt = prev + s_step * e2;
        if (xt - x_t_probe).abs() <= 0.5 * width {
            kept.push(prev);
        }
    }
    if kept.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "only {} draws landed in the conditioning bin",
            kept.len()
        )));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in &kept {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let eps = (x_t_probe - x0) / a_t.sqrt();
    Ok(PosteriorReport {
        t,
        x0,
        x_t: x_t_probe,
        bin_width: width,
        n_samples,
        n_in_bin: kept.len(),
        empirical_mean: mean,
        formula_mean: posterior_mean_scalar(x_t_probe, eps, a_prev, a_t),
        empirical_var: m2 * n / (n - 1.0),
        halved_var: schedule.posterior_var(t),
        full_var: a_prev * (a_t - a_prev) / a_t,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}
