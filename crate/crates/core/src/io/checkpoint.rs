use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::conformation::ConditionRanges;
use crate::denoiser::{DenoiserConfig, DenoiserParams, Scalar};
use crate::diffusion::{build_schedule, DiffusionSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::Box3;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "pbc-diffusion-checkpoint";

/// Everything needed to resume sampling from a trained model, stored as
/// JSON with parameters widened to `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub denoiser: DenoiserConfig,
    pub schedule_steps: usize,
    pub schedule_offset: f64,
    pub ranges: ConditionRanges,
    pub training: TrainConfig,
    pub epochs_completed: usize,
    pub n_particles: usize,
    pub box_lengths: [f64; 3],
    /// Set when the checkpoint was written after a divergence.
    pub diverged: bool,
    pub loss_history: Vec<f64>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        params: &DenoiserParams<S>,
        schedule: &DiffusionSchedule,
        ranges: &ConditionRanges,
        training: &TrainConfig,
        loss_history: &[f64],
        n_particles: usize,
        bbox: &Box3,
    ) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: CHECKPOINT_VERSION,
            denoiser: params.config.clone(),
            schedule_steps: schedule.t_max(),
            schedule_offset: schedule.offset(),
            ranges: *ranges,
            training: training.clone(),
            epochs_completed: loss_history.len(),
            n_particles,
            box_lengths: bbox.lengths(),
            diverged: false,
            loss_history: loss_history.to_vec(),
            params: params.to_f64(),
        }
    }

    pub fn params<S: Scalar>(&self) -> Result<DenoiserParams<S>> {
        DenoiserParams::from_values(self.denoiser.clone(), self.params.iter().map(|&v| S::of(v)).collect())
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        build_schedule(self.schedule_steps, self.schedule_offset)
    }

    pub fn bbox(&self) -> Result<Box3> {
        Box3::new(self.box_lengths)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        if ck.format != FORMAT_TAG {
            return Err(Error::InvalidInput(format!("{} is not a checkpoint", path.display())));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: ck.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(ck)
    }
}
