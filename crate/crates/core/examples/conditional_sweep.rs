//! Builds a small (k, phi, T) sweep with the MD engine, trains a conditional
//! denoiser on it and scores one sample per condition with the evaluation
//! table.
//!
//!     cargo run --release --example conditional_sweep -- 40

use pbc_diffusion::cli::evaluate;
use pbc_diffusion::denoiser::DenoiserConfig;
use pbc_diffusion::diffusion::{sample, train, DiffusionSchedule, SampleRequest, TrainConfig};
use pbc_diffusion::io::Split;
use pbc_diffusion::md::{run_anneal, MdConfig};
use pbc_diffusion::{Condition, ConditionRanges, OppParams};

fn main() -> pbc_diffusion::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(40, |a| a.parse().expect("epochs"));
    let conditions = [
        (Condition::new(2.0, 0.0, 0.02), Split::Train),
        (Condition::new(12.0, 0.0, 0.02), Split::Train),
        (Condition::new(2.0, 5.0, 0.04), Split::Train),
        (Condition::new(12.0, 5.0, 0.04), Split::Train),
        (Condition::new(7.0, 2.5, 0.03), Split::Test),
    ];
    let mut references = Vec::new();
    for (i, (c, split)) in conditions.iter().enumerate() {
        let md = MdConfig {
            n_particles: 125,
            target_temperature: c.temperature,
            anneal_steps: 5000,
            equil_steps: 5000,
            cutoff: 2.5,
            ..Default::default()
        };
        let mut conf = run_anneal(&md, &OppParams::new(c.k, c.phi)?, i as u64)?.conformation;
        conf.condition = Some(*c);
        println!("simulated k={} phi={} T={} ({split:?})", c.k, c.phi, c.temperature);
        references.push((*split, conf));
    }

    let denoiser = DenoiserConfig {
        n_layers: 3,
        hidden: 32,
        k_neighbors: 12,
        conv_mlp_hidden: vec![32, 32],
        out_mlp_hidden: vec![64, 64],
        conditional: true,
        ..Default::default()
    };
    let training = TrainConfig {
        epochs,
        ..Default::default()
    };
    let schedule = DiffusionSchedule::default();
    let ranges = ConditionRanges::default();
    let train_set: Vec<_> = references
        .iter()
        .filter(|(s, _)| *s == Split::Train)
        .map(|(_, c)| c.clone())
        .collect();
    let out = train(&train_set, &training, &denoiser, &schedule, &ranges, |_| {})?;
    println!("final loss {:.4}", out.loss_history.last().copied().unwrap_or(f64::NAN));

    let generated = references
        .iter()
        .enumerate()
        .map(|(i, (_, r))| {
            let request = SampleRequest {
                n_particles: r.len(),
                bbox: *r.bbox(),
                condition: r.condition,
                ranges,
                seed: 100 + i as u64,
            };
            sample(&request, &out.params, &schedule)
        })
        .collect::<pbc_diffusion::Result<Vec<_>>>()?;
    print!("{}", evaluate(&references, &generated, &[], 0, 100)?.table());
    Ok(())
}
