use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conformation::ConditionRanges;
use crate::denoiser::DenoiserConfig;
use crate::diffusion::{build_schedule, DiffusionSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::md::MdConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub offset: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            offset: 0.008,
        }
    }
}

/// Grid of MD conditions for `gen-data`, plus `n_test` random test
/// conditions drawn uniformly inside the same ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub k: [f64; 2],
    pub phi: [f64; 2],
    pub temperature: [f64; 2],
    /// Grid points along k, phi and T.
    pub points: [usize; 3],
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: [1.0, 15.0],
            phi: [0.0, 6.0],
            temperature: [0.01, 0.05],
            points: [2, 2, 2],
            n_test: 0,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![range[0]],
            _ => (0..n)
                .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.points.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub count: usize,
    /// Sample `i` uses a seed derived from this one and `i`.
    pub seed: u64,
    /// Diffusion steps written by `sample --trace`, given for a 500-step
    /// schedule and rescaled to the configured number of steps.
    pub trace_steps: Vec<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            count: 1,
            seed: 0,
            trace_steps: vec![500, 490, 100, 10, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdfConfig {
    pub bins: usize,
}

impl Default for RdfConfig {
    fn default() -> Self {
        Self { bins: 100 }
    }
}

/// Effective configuration of every command. Layers: built-in defaults,
/// then a TOML file, then `--set section.key=value` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserConfig,
    pub training: TrainConfig,
    pub md: MdConfig,
    pub sweep: SweepConfig,
    pub ranges: ConditionRanges,
    pub sampling: SamplingConfig,
    pub rdf: RdfConfig,
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut tree = toml::Value::try_from(RunConfig::default()).map_err(|e| Error::Serialization(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            let file_tree: toml::Value = text
                .parse()
                .map_err(|e: toml::de::Error| Error::Usage(format!("{}: {e}", path.display())))?;
            merge(&mut tree, &file_tree, "")?;
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: RunConfig = tree
            .try_into()
            .map_err(|e: toml::de::Error| Error::Usage(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |e: Error| Error::Usage(e.to_string());
        self.denoiser.validate().map_err(usage)?;
        self.training.validate().map_err(usage)?;
        self.md.validate().map_err(usage)?;
        self.schedule().map_err(usage)?;
        if self.rdf.bins == 0 {
            return Err(Error::Usage("rdf.bins must be positive".into()));
        }
        if self.sweep.k[0] > self.sweep.k[1]
            || self.sweep.phi[0] > self.sweep.phi[1]
            || self.sweep.temperature[0] > self.sweep.temperature[1]
        {
            return Err(Error::Usage("sweep ranges must be ordered low, high".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        build_schedule(self.schedule.steps, self.schedule.offset)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Overlays `src` onto `dst`; every key in `src` must already exist.
fn merge(dst: &mut toml::Value, src: &toml::Value, prefix: &str) -> Result<()> {
    match (dst, src) {
        (toml::Value::Table(d), toml::Value::Table(s)) => {
            for (k, v) in s {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match d.get_mut(k) {
                    Some(slot) if slot.is_table() => merge(slot, v, &path)?,
                    Some(slot) => *slot = v.clone(),
                    None => return Err(Error::Usage(format!("unknown configuration key '{path}'"))),
                }
            }
            Ok(())
        }
        (_, _) => Err(Error::Usage(format!("'{prefix}' is a section, not a value"))),
    }
}

fn apply_override(tree: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {spec:?} is not of the form section.key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    // bare words such as `relu` are taken as strings
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("'{}' is not a section", parts[..i].join("."))))?;
        let slot = table
            .get_mut(*part)
            .ok_or_else(|| Error::Usage(format!("unknown configuration key '{key}'")))?;
        if i + 1 == parts.len() {
            if slot.is_table() {
                return Err(Error::Usage(format!("'{key}' is a section, not a value")));
            }
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    unreachable!("split yields at least one part")
}
