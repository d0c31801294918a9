//! Wrapped-noise diffusion: cosine schedule, forward corruption, training
//! loop and ancestral sampler.
//!
//! All noise arithmetic happens in the unit box `[0, 1)^3`. The denoiser
//! itself sees coordinates scaled back to the physical box, so its k-NN
//! graph and displacement features keep physical units.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conformation::{from_unit, Condition, ConditionRanges, Conformation, Provenance, Source};
use crate::denoiser::{
    init_params, loss_and_gradients, predict_noise, DenoiserConfig, DenoiserParams, GlobalFeatures, Scalar,
    TrainingExample,
};
use crate::error::{Error, Result};
use crate::geometry::{wrap_coordinate, Box3};
use crate::optim::{Adam, AdamSettings};

const ALPHA_FLOOR: f64 = 1e-8;

/// Cosine noise schedule `alpha(0..=T)`, increasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    t_max: usize,
    s: f64,
    alpha: Vec<f64>,
}

/// `alpha(t) = cos^2((pi/2) ((T - t)/(T + 1) + s)/(1 + s))`, clamped to
/// `[1e-8, 1]`.
pub fn build_schedule(t_max: usize, s: f64) -> Result<DiffusionSchedule> {
    if t_max < 1 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("schedule offset must be positive, got {s}")));
    }
    let tp1 = (t_max + 1) as f64;
    let alpha = (0..=t_max)
        .map(|t| {
            let c = (FRAC_PI_2 * (((t_max - t) as f64 / tp1 + s) / (1.0 + s))).cos();
            (c * c).clamp(ALPHA_FLOOR, 1.0)
        })
        .collect();
    Ok(DiffusionSchedule { t_max, s, alpha })
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        build_schedule(500, 0.008).expect("valid defaults")
    }
}

impl DiffusionSchedule {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn offset(&self) -> f64 {
        self.s
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    /// `sigma^2_t = alpha(t-1) (alpha(t) - alpha(t-1)) / (2 alpha(t))`, the
    /// variance used by the sampler.
    pub fn posterior_var(&self, t: usize) -> f64 {
        assert!(t >= 1 && t <= self.t_max, "t = {t} outside 1..={}", self.t_max);
        let (a_prev, a_t) = (self.alpha[t - 1], self.alpha[t]);
        a_prev / (2.0 * a_t) * (a_t - a_prev)
    }
}

/// Scalar form of [`posterior_mean`].
#[inline]
pub fn posterior_mean_scalar(x_t: f64, eps_hat: f64, alpha_prev: f64, alpha_t: f64) -> f64 {
    (alpha_prev / alpha_t - 1.0) * (alpha_t.sqrt() * eps_hat) + x_t
}

/// `mu_t = (alpha(t-1)/alpha(t) - 1) sqrt(alpha(t)) eps_hat + x_t`, per
/// component, in unit-box coordinates. The result is not wrapped.
pub fn posterior_mean(
    x_t: &[[f64; 3]],
    eps_hat: &[[f64; 3]],
    t: usize,
    schedule: &DiffusionSchedule,
) -> Result<Vec<[f64; 3]>> {
    if t < 1 || t > schedule.t_max {
        return Err(Error::InvalidArgument(format!("t = {t} outside 1..={}", schedule.t_max)));
    }
    if x_t.len() != eps_hat.len() {
        return Err(Error::InvalidArgument(format!(
            "{} positions but {} noise rows",
            x_t.len(),
            eps_hat.len()
        )));
    }
    let (a_prev, a_t) = (schedule.alpha(t - 1), schedule.alpha(t));
    Ok(x_t
        .iter()
        .zip(eps_hat)
        .map(|(x, e)| {
            [
                posterior_mean_scalar(x[0], e[0], a_prev, a_t),
                posterior_mean_scalar(x[1], e[1], a_prev, a_t),
                posterior_mean_scalar(x[2], e[2], a_prev, a_t),
            ]
        })
        .collect())
}

fn wrap_unit(p: [f64; 3]) -> [f64; 3] {
    [wrap_coordinate(p[0], 1.0), wrap_coordinate(p[1], 1.0), wrap_coordinate(p[2], 1.0)]
}

fn gaussian_rows(n: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect()
}

/// `x_t = wrap(x0 + sqrt(alpha(t)) eps)` on unit-box coordinates; returns
/// `(x_t, eps)`.
pub fn forward_noise(
    x0: &[[f64; 3]],
    t: usize,
    schedule: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    if t < 1 || t > schedule.t_max {
        return Err(Error::InvalidArgument(format!("t = {t} outside 1..={}", schedule.t_max)));
    }
    let scale = schedule.alpha(t).sqrt();
    let eps = gaussian_rows(x0.len(), rng);
    let xt = x0
        .iter()
        .zip(&eps)
        .map(|(x, e)| wrap_unit([x[0] + scale * e[0], x[1] + scale * e[1], x[2] + scale * e[2]]))
        .collect();
    Ok((xt, eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// The learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub adam: AdamSettings,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 800,
            learning_rate: 0.005,
            lr_decay: 0.95,
            decay_every: 100,
            adam: AdamSettings::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || !(self.learning_rate >= 0.0) || self.decay_every == 0 || !(self.lr_decay > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid training settings: {self:?}")));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Network inputs for one diffusion step: `t/T` and, for conditional
/// models, the rescaled condition.
pub fn global_features(
    t: usize,
    schedule: &DiffusionSchedule,
    condition: Option<&Condition>,
    ranges: &ConditionRanges,
) -> GlobalFeatures {
    GlobalFeatures {
        t_frac: t as f64 / schedule.t_max as f64,
        condition: condition.map(|c| ranges.scale(c)),
    }
}

fn to_physical(unit: &[[f64; 3]], bbox: &Box3) -> Vec<[f64; 3]> {
    let l = bbox.lengths();
    unit.iter().map(|u| from_unit(u, &l)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: DenoiserParams<f32>,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Per-epoch progress passed to a training observer.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
}

/// Trains from freshly initialized parameters; see [`train_from`].
pub fn train(
    dataset: &[Conformation],
    config: &TrainConfig,
    dconfig: &DenoiserConfig,
    schedule: &DiffusionSchedule,
    ranges: &ConditionRanges,
    observer: impl FnMut(&EpochReport),
) -> Result<TrainOutput> {
    let params = init_params::<f32>(dconfig, config.seed)?;
    train_from(params, dataset, config, schedule, ranges, observer)
}

/// Each epoch visits every conformation once in shuffled order; each visit
/// draws `t ~ U{1..T}` and `eps ~ N(0, I)`, corrupts the conformation and
/// takes one Adam step on `|eps - eps_hat|^2`. Deterministic for a given seed.
pub fn train_from(
    mut params: DenoiserParams<f32>,
    dataset: &[Conformation],
    config: &TrainConfig,
    schedule: &DiffusionSchedule,
    ranges: &ConditionRanges,
    mut observer: impl FnMut(&EpochReport),
) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let conditional = params.config.conditional;
    for (i, conf) in dataset.iter().enumerate() {
        if conditional && conf.condition.is_none() {
            return Err(Error::InvalidInput(format!("conformation {i} has no condition")));
        }
    }
    let units: Vec<Vec<[f64; 3]>> = dataset.iter().map(|c| c.normalized()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7472_6169_6e00);
    let mut opt = Adam::new(params.len(), config.adam);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let conf = &dataset[idx];
            let t = rng.gen_range(1..=schedule.t_max);
            let (xt, eps) = forward_noise(&units[idx], t, schedule, &mut rng)?;
            let condition = if conditional { conf.condition.as_ref() } else { None };
            let example = TrainingExample {
                positions: to_physical(&xt, conf.bbox()),
                global: global_features(t, schedule, condition, ranges),
                target: eps,
            };
            let (loss, grads) = match loss_and_gradients(std::slice::from_ref(&example), &params, conf.bbox()) {
                Ok(v) => v,
                Err(Error::Divergence { detail, .. }) => {
                    return Err(Error::Divergence {
                        epoch,
                        detail,
                        last_params: params.to_f64(),
                    })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite loss or gradient (loss {loss})"),
                    last_params: params.to_f64(),
                });
            }
            let before = params.values.clone();
            opt.step(&mut params.values, &grads, lr);
            if params.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: "optimizer produced non-finite parameters".into(),
                    last_params: before.iter().map(|v| v.f64()).collect(),
                });
            }
            total += loss;
        }
        let mean_loss = total / dataset.len() as f64;
        history.push(mean_loss);
        observer(&EpochReport {
            epoch,
            mean_loss,
            learning_rate: lr,
        });
    }
    Ok(TrainOutput {
        params,
        loss_history: history,
    })
}

/// What the sampler needs besides the parameters.
#[derive(Debug, Clone)]
pub struct SampleRequest {
    pub n_particles: usize,
    pub bbox: Box3,
    pub condition: Option<Condition>,
    pub ranges: ConditionRanges,
    pub seed: u64,
}

/// Ancestral sampling from the uniform distribution on the box; see
/// [`sample_with_trace`].
pub fn sample<S: Scalar>(
    request: &SampleRequest,
    params: &DenoiserParams<S>,
    schedule: &DiffusionSchedule,
) -> Result<Conformation> {
    sample_with_trace(request, params, schedule, |_, _| {})
}

/// For `t = T..1`: `x_{t-1} = wrap(mu_t(x_t, eps_hat) + sqrt(sigma^2_t) z)`
/// with `z = 0` on the last step. `trace(t, x_t)` is called with physical
/// coordinates for the initial draw (`t = T`) and after every step.
pub fn sample_with_trace<S: Scalar>(
    request: &SampleRequest,
    params: &DenoiserParams<S>,
    schedule: &DiffusionSchedule,
    mut trace: impl FnMut(usize, &[[f64; 3]]),
) -> Result<Conformation> {
    let bbox = request.bbox;
    let condition = match (params.config.conditional, request.condition) {
        (true, None) => return Err(Error::Usage("conditional model needs a condition".into())),
        (false, Some(_)) => return Err(Error::Usage("model is unconditional; drop the condition".into())),
        (_, c) => c,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    let mut x: Vec<[f64; 3]> = (0..request.n_particles)
        .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let mut physical = to_physical(&x, &bbox);
    trace(schedule.t_max, &physical);
    for t in (1..=schedule.t_max).rev() {
        let global = global_features(t, schedule, condition.as_ref(), &request.ranges);
        let eps_hat = predict_noise(&physical, &global, params, &bbox)?;
        x = step_back(&x, &eps_hat, t, schedule, &mut rng)?;
        physical = to_physical(&x, &bbox);
        trace(t - 1, &physical);
    }
    Conformation::new(
        physical,
        bbox,
        condition,
        Provenance::new(Source::Sampled, Some(request.seed), 0),
    )
}

/// One reverse step from `x_t` given the predicted noise.
pub fn step_back(
    x_t: &[[f64; 3]],
    eps_hat: &[[f64; 3]],
    t: usize,
    schedule: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<Vec<[f64; 3]>> {
    let mu = posterior_mean(x_t, eps_hat, t, schedule)?;
    let sigma = schedule.posterior_var(t).sqrt();
    Ok(mu
        .into_iter()
        .map(|m| {
            if t > 1 {
                let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                wrap_unit([m[0] + sigma * z[0], m[1] + sigma * z[1], m[2] + sigma * z[2]])
            } else {
                wrap_unit(m)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Activation;
    use crate::verify::ks_uniform;

    fn tiny_config() -> DenoiserConfig {
        DenoiserConfig {
            n_layers: 1,
            hidden: 8,
            k_neighbors: 4,
            conv_mlp_hidden: vec![8],
            out_mlp_hidden: vec![16],
            activation: Activation::Silu,
            ..Default::default()
        }
    }

    fn lattice_conf(side: usize, spacing: f64) -> Conformation {
        let l = side as f64 * spacing;
        let mut pts = Vec::new();
        for a in 0..side {
            for b in 0..side {
                for c in 0..side {
                    pts.push([a as f64 * spacing, b as f64 * spacing, c as f64 * spacing]);
                }
            }
        }
        Conformation::new(
            pts,
            Box3::cubic(l).unwrap(),
            Some(Condition::new(5.0, 1.0, 0.03)),
            Provenance::new(Source::ReferenceMd, None, 0),
        )
        .unwrap()
    }

    #[test]
    fn default_schedule_shape() {
        let s = DiffusionSchedule::default();
        assert_eq!(s.alphas().len(), 501);
        assert!(s.alpha(0) < 1e-3);
        assert!(s.alpha(500) > 0.99);
        assert!(s.alphas().windows(2).all(|w| w[1] > w[0]));
        // equivalent sine form: sin^2((pi/2)(t+1)/((T+1)(1+s)))
        for t in [0usize, 1, 17, 250, 499, 500] {
            let x = FRAC_PI_2 * (t as f64 + 1.0) / (501.0 * 1.008);
            assert!((s.alpha(t) - x.sin().powi(2)).abs() < 1e-14);
        }
        for t in 1..=500 {
            assert!(s.posterior_var(t) > 0.0);
        }
    }

    #[test]
    fn schedule_rejects_bad_arguments() {
        assert!(build_schedule(0, 0.008).is_err());
        assert!(build_schedule(10, 0.0).is_err());
        assert!(build_schedule(10, -1.0).is_err());
    }

    #[test]
    fn posterior_var_closed_form() {
        let s = build_schedule(10, 0.008).unwrap();
        let (a, b) = (s.alpha(3), s.alpha(4));
        assert_eq!(s.posterior_var(4), a / (2.0 * b) * (b - a));
        assert_eq!(posterior_mean_scalar(0.3, 0.0, a, b), 0.3);
    }

    #[test]
    fn posterior_mean_identities() {
        let s = DiffusionSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = rng.gen_range(2..=500);
            let (a_prev, a_t) = (s.alpha(t - 1), s.alpha(t));
            let x: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let e1 = gaussian_rows(1, &mut rng)[0];
            let e2 = gaussian_rows(1, &mut rng)[0];
            let mu = posterior_mean(&[x], &[e1], t, &s).unwrap()[0];
            for d in 0..3 {
                let x0_hat = x[d] - a_t.sqrt() * e1[d];
                let alt = (x[d] - x0_hat) / a_t * a_prev + x0_hat;
                assert!((mu[d] - alt).abs() < 1e-12);
            }
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = [0, 1, 2].map(|d| a * e1[d] + b * e2[d]);
            let lhs = posterior_mean(&[x], &[mix], t, &s).unwrap()[0];
            let m1 = mu;
            let m2 = posterior_mean(&[x], &[e2], t, &s).unwrap()[0];
            for d in 0..3 {
                let rhs = a * m1[d] + b * m2[d] - (a + b - 1.0) * x[d];
                assert!((lhs[d] - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_noise_small_and_terminal() {
        let s = DiffusionSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0: Vec<[f64; 3]> = (0..1000).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let (xt, _) = forward_noise(&x0, 1, &s, &mut rng).unwrap();
        let unit = Box3::cubic(1.0).unwrap();
        for (a, b) in x0.iter().zip(&xt) {
            assert!(unit.distance(a, b).unwrap() < 3.0 * 3f64.sqrt() * s.alpha(1).sqrt());
            assert!(b.iter().all(|&c| (0.0..1.0).contains(&c)));
        }

        let x0 = vec![[0.25, 0.5, 0.75]; 1_000_000 / 3 + 1];
        let (xt, _) = forward_noise(&x0, 500, &s, &mut rng).unwrap();
        let mut comps: Vec<f64> = xt.iter().flatten().copied().take(1_000_000).collect();
        assert!(ks_uniform(&mut comps).unwrap() < 0.01);
        assert!(forward_noise(&x0[..1], 0, &s, &mut rng).is_err());
    }

    #[test]
    fn forward_noise_marginal_variance() {
        let s = DiffusionSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in [50, 120, 500] {
            let x0 = vec![[0.5; 3]; 100_000 / 3 + 1];
            let (xt, eps) = forward_noise(&x0, t, &s, &mut rng).unwrap();
            let scale = s.alpha(t).sqrt();
            // displacement before wrapping
            let disp: Vec<f64> = eps.iter().flatten().map(|e| scale * e).take(100_000).collect();
            let var = disp.iter().map(|d| d * d).sum::<f64>() / disp.len() as f64;
            assert!((var / s.alpha(t) - 1.0).abs() < 0.03, "t {t}: {var} vs {}", s.alpha(t));
            for (x, e) in xt.iter().zip(&eps).take(100) {
                let expect = wrap_unit([0.5 + scale * e[0], 0.5 + scale * e[1], 0.5 + scale * e[2]]);
                assert_eq!(*x, expect);
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let conf = lattice_conf(3, 1.0);
        let schedule = build_schedule(20, 0.008).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            ..Default::default()
        };
        let init = init_params::<f32>(&tiny_config(), cfg.seed).unwrap();
        let out = train(&[conf], &cfg, &tiny_config(), &schedule, &ConditionRanges::default(), |_| {}).unwrap();
        assert_eq!(out.params.values, init.values);
        assert_eq!(out.loss_history.len(), 3);
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let confs = vec![lattice_conf(3, 1.0), lattice_conf(3, 1.1)];
        let schedule = build_schedule(20, 0.008).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 0.01,
            seed: 4,
            ..Default::default()
        };
        let ranges = ConditionRanges::default();
        let mut seen = 0;
        let a = train(&confs, &cfg, &tiny_config(), &schedule, &ranges, |r| {
            assert_eq!(r.epoch, seen);
            seen += 1;
        })
        .unwrap();
        let b = train(&confs, &cfg, &tiny_config(), &schedule, &ranges, |_| {}).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.params, b.params);
        let early: f64 = a.loss_history[..10].iter().sum::<f64>() / 10.0;
        let late: f64 = a.loss_history[50..].iter().sum::<f64>() / 10.0;
        assert!(late < early, "{early} -> {late}");
    }

    #[test]
    fn conditional_training_needs_conditions() {
        let mut conf = lattice_conf(3, 1.0);
        conf.condition = None;
        let cfg = DenoiserConfig {
            conditional: true,
            ..tiny_config()
        };
        let schedule = build_schedule(20, 0.008).unwrap();
        let err = train(&[conf], &TrainConfig::default(), &cfg, &schedule, &ConditionRanges::default(), |_| {});
        assert!(err.is_err());
        assert!(train(&[], &TrainConfig::default(), &tiny_config(), &schedule, &ConditionRanges::default(), |_| {}).is_err());
    }

    #[test]
    fn untrained_sampler_stays_in_box() {
        let schedule = build_schedule(30, 0.008).unwrap();
        let params = init_params::<f32>(&tiny_config(), 1).unwrap();
        let bbox = Box3::new([3.0, 2.5, 4.0]).unwrap();
        let request = SampleRequest {
            n_particles: 30,
            bbox,
            condition: None,
            ranges: ConditionRanges::default(),
            seed: 7,
        };
        let mut steps = Vec::new();
        let conf = sample_with_trace(&request, &params, &schedule, |t, x| {
            assert!(x.iter().all(|p| bbox.contains(p)));
            steps.push(t);
        })
        .unwrap();
        assert_eq!(steps, (0..=30).rev().collect::<Vec<_>>());
        assert_eq!(conf.len(), 30);
        assert_eq!(conf, sample(&request, &params, &schedule).unwrap());
        let with_cond = SampleRequest {
            condition: Some(Condition::new(5.0, 1.0, 0.03)),
            ..request
        };
        assert!(matches!(sample(&with_cond, &params, &schedule), Err(Error::Usage(_))));
    }

    #[test]
    fn reverse_step_commutes_with_translation() {
        let schedule = DiffusionSchedule::default();
        let params = init_params::<f64>(&tiny_config(), 2).unwrap();
        let bbox = Box3::cubic(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<[f64; 3]> = (0..27).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let shift = [0.31, -0.12, 0.77];
        let moved: Vec<[f64; 3]> = x.iter().map(|p| wrap_unit([p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])).collect();
        let t = 200;
        let g = global_features(t, &schedule, None, &ConditionRanges::default());
        let e1 = predict_noise(&to_physical(&x, &bbox), &g, &params, &bbox).unwrap();
        let e2 = predict_noise(&to_physical(&moved, &bbox), &g, &params, &bbox).unwrap();
        let a = step_back(&x, &e1, t, &schedule, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = step_back(&moved, &e2, t, &schedule, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let unit = Box3::cubic(1.0).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let expect = wrap_unit([p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]);
            assert!(unit.distance(&expect, q).unwrap() < 1e-9);
        }
    }
}
