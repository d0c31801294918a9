use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DenoiserConfig, Scalar};
use crate::error::{Error, Result};

/// One dense layer inside the flat parameter vector. Weights are stored
/// row-major as `fan_in x fan_out`, followed by `fan_out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseShape {
    pub offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl DenseShape {
    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    pub layers: Vec<DenseShape>,
}

impl MlpShape {
    fn new(sizes: &[usize], offset: &mut usize) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let shape = DenseShape {
                    offset: *offset,
                    fan_in: w[0],
                    fan_out: w[1],
                };
                *offset += shape.len();
                shape
            })
            .collect();
        Self { layers }
    }

    pub fn fan_in(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }
}

/// Where every layer's weights live in the flat parameter vector: input
/// conv, then each conv layer, then the output MLP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub input_conv: MlpShape,
    pub convs: Vec<MlpShape>,
    pub output: MlpShape,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &DenoiserConfig) -> Self {
        let g = config.n_global();
        let h = config.hidden;
        let g_cat = if config.concat_global { g } else { 0 };
        let sizes = |first: usize, hidden: &[usize], last: usize| {
            let mut s = vec![first];
            s.extend_from_slice(hidden);
            s.push(last);
            s
        };
        let mut offset = 0;
        let input_conv = MlpShape::new(&sizes(3 + g, &config.conv_mlp_hidden, h), &mut offset);
        let convs = (0..config.n_layers)
            .map(|_| MlpShape::new(&sizes(3 + 2 * h + g_cat, &config.conv_mlp_hidden, h), &mut offset))
            .collect();
        let output = MlpShape::new(&sizes(h + g_cat, &config.out_mlp_hidden, 3), &mut offset);
        Self {
            input_conv,
            convs,
            output,
            total: offset,
        }
    }

    pub fn all_layers(&self) -> impl Iterator<Item = &DenseShape> {
        self.input_conv
            .layers
            .iter()
            .chain(self.convs.iter().flat_map(|c| c.layers.iter()))
            .chain(self.output.layers.iter())
    }
}

/// Flat vector of all learnable scalars, tagged with the config it was
/// built for.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams<S> {
    pub config: DenoiserConfig,
    pub values: Vec<S>,
}

impl<S: Scalar> DenoiserParams<S> {
    pub fn from_values(config: DenoiserConfig, values: Vec<S>) -> Result<Self> {
        config.validate()?;
        let expected = ParamLayout::new(&config).total;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has {} entries, config needs {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite parameter".into()));
        }
        Ok(Self { config, values })
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.config)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.f64()).collect()
    }

    pub fn cast<T: Scalar>(&self) -> DenoiserParams<T> {
        DenoiserParams {
            config: self.config.clone(),
            values: self.values.iter().map(|v| T::of(v.f64())).collect(),
        }
    }
}

/// Weights uniform in `±sqrt(1/fan_in)`, biases zero, drawn from a ChaCha
/// stream seeded with `seed`.
pub fn init_params<S: Scalar>(config: &DenoiserConfig, seed: u64) -> Result<DenoiserParams<S>> {
    config.validate()?;
    let layout = ParamLayout::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![S::zero(); layout.total];
    for layer in layout.all_layers() {
        let bound = (1.0 / layer.fan_in as f64).sqrt();
        for w in &mut values[layer.weights()] {
            *w = S::of(rng.gen_range(-bound..bound));
        }
    }
    Ok(DenoiserParams {
        config: config.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_parameter_count_matches_hand_count() {
        // input conv  [4 -> 32 -> 32 -> 32]:        4*32+32 + 2*(32*32+32) = 2272
        // 8 x conv    [68 -> 32 -> 32 -> 32]:       68*32+32 + 2*1056      = 4320 each
        // output      [33 -> 128 -> 128 -> 3]:      33*128+128 + 128*128+128 + 128*3+3 = 21251
        let layout = ParamLayout::new(&DenoiserConfig::default());
        assert_eq!(layout.total, 2272 + 8 * 4320 + 21251);
        assert_eq!(layout.total, 58083);

        // conditional adds three global inputs to every MLP's first layer
        let cond = DenoiserConfig {
            conditional: true,
            ..Default::default()
        };
        assert_eq!(ParamLayout::new(&cond).total, 58083 + 3 * 32 * 9 + 3 * 128);
    }

    #[test]
    fn layout_is_contiguous() {
        let layout = ParamLayout::new(&DenoiserConfig::default());
        let mut next = 0;
        for l in layout.all_layers() {
            assert_eq!(l.offset, next);
            next = l.bias().end;
        }
        assert_eq!(next, layout.total);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = DenoiserConfig::default();
        let a: DenoiserParams<f64> = init_params(&cfg, 0).unwrap();
        let b: DenoiserParams<f64> = init_params(&cfg, 0).unwrap();
        assert_eq!(a, b);
        let c: DenoiserParams<f64> = init_params(&cfg, 1).unwrap();
        assert_ne!(a, c);
        assert!(a.values.iter().all(|v| v.is_finite()));
        let layout = a.layout();
        let first = layout.input_conv.layers[0];
        let w = &a.values[first.weights()];
        assert!(w.iter().all(|v| v.abs() <= 0.5));
        assert!(w.windows(2).any(|p| p[0] != p[1]));
        assert!(a.values[first.bias()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn from_values_checks_length() {
        let cfg = DenoiserConfig::default();
        assert!(DenoiserParams::<f32>::from_values(cfg.clone(), vec![0.0; 3]).is_err());
        assert!(DenoiserParams::<f32>::from_values(cfg, vec![0.0; 58083]).is_ok());
    }
}
