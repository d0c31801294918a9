//! Periodic graph-convolution denoiser.
//!
//! Each layer is an edge convolution over the periodic k-NN graph: for node
//! `i`, an MLP is applied to `[d_ij | f_i | f_j - f_i | g]` for every
//! neighbor `j` and the results are max-pooled componentwise. Only relative
//! displacements `d_ij` enter the network, so predictions are invariant to
//! global translations. Gradients are computed by hand-written reverse mode.

mod network;
mod params;
mod scalar;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use network::{
    loss_and_gradients, pbc_conv, predict_noise, predict_noise_with_graph, MlpRef, TrainingExample,
};
pub use params::{init_params, DenoiserParams, DenseShape, MlpShape, ParamLayout};
pub use scalar::Scalar;

/// Nonlinearity applied after every hidden MLP layer (never on outputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Silu,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Silu => z / (S::one() + (-z).exp()),
            Activation::Relu => z.max(S::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    pub fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Silu => {
                let s = S::one() / (S::one() + (-z).exp());
                s * (S::one() + z * (S::one() - s))
            }
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                S::one() - t * t
            }
        }
    }
}

/// Network shape. Defaults reproduce the full-size configuration: 8 conv
/// layers of width 32 over 32 neighbors, conv MLPs `[32, 32]`, output MLP
/// `[128, 128]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub k_neighbors: usize,
    pub conv_mlp_hidden: Vec<usize>,
    pub out_mlp_hidden: Vec<usize>,
    pub residual: bool,
    pub concat_global: bool,
    pub activation: Activation,
    /// When set, the global vector carries the rescaled (k, phi, T) after t/T.
    pub conditional: bool,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            n_layers: 8,
            hidden: 32,
            k_neighbors: 32,
            conv_mlp_hidden: vec![32, 32],
            out_mlp_hidden: vec![128, 128],
            residual: true,
            concat_global: true,
            activation: Activation::Silu,
            conditional: false,
        }
    }
}

impl DenoiserConfig {
    /// Width of the global feature vector.
    pub fn n_global(&self) -> usize {
        if self.conditional {
            4
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths_ok = self.hidden > 0
            && self.k_neighbors > 0
            && self.conv_mlp_hidden.iter().all(|&w| w > 0)
            && self.out_mlp_hidden.iter().all(|&w| w > 0);
        if widths_ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "denoiser widths and neighbor count must be positive: {self:?}"
            )))
        }
    }
}

/// Global inputs: diffusion fraction t/T and, for conditional models, the
/// MD condition rescaled to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalFeatures {
    pub t_frac: f64,
    pub condition: Option<[f64; 3]>,
}

impl GlobalFeatures {
    pub fn unconditional(t_frac: f64) -> Self {
        Self {
            t_frac,
            condition: None,
        }
    }

    pub fn to_vec<S: Scalar>(&self, config: &DenoiserConfig) -> Result<Vec<S>> {
        if !(0.0..=1.0).contains(&self.t_frac) {
            return Err(Error::InvalidArgument(format!(
                "t/T must lie in [0, 1], got {}",
                self.t_frac
            )));
        }
        match (config.conditional, self.condition) {
            (false, None) => Ok(vec![S::of(self.t_frac)]),
            (true, Some(c)) => Ok(vec![S::of(self.t_frac), S::of(c[0]), S::of(c[1]), S::of(c[2])]),
            (false, Some(_)) => Err(Error::Usage(
                "condition supplied to an unconditional denoiser".into(),
            )),
            (true, None) => Err(Error::Usage("conditional denoiser needs a condition".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in [Activation::Silu, Activation::Tanh, Activation::Relu] {
            for &z in &[-2.5f64, -0.3, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8, "{act:?} at {z}");
            }
        }
    }

    #[test]
    fn global_features_shape_checks() {
        let cfg = DenoiserConfig::default();
        assert_eq!(GlobalFeatures::unconditional(0.5).to_vec::<f64>(&cfg).unwrap(), vec![0.5]);
        assert!(GlobalFeatures::unconditional(1.5).to_vec::<f64>(&cfg).is_err());
        let with_cond = GlobalFeatures {
            t_frac: 0.1,
            condition: Some([0.0, 1.0, -1.0]),
        };
        assert!(matches!(with_cond.to_vec::<f64>(&cfg), Err(Error::Usage(_))));
        let cond_cfg = DenoiserConfig {
            conditional: true,
            ..cfg
        };
        assert_eq!(with_cond.to_vec::<f64>(&cond_cfg).unwrap().len(), 4);
    }
}
