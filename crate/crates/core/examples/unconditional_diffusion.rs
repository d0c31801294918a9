//! Trains a denoiser on one annealed conformation plus its 48 cubic images,
//! samples from it and compares RDFs along the reverse process.
//!
//!     cargo run --release --example unconditional_diffusion -- 100
//!
//! The argument is the number of epochs (default 50).

use pbc_diffusion::denoiser::DenoiserConfig;
use pbc_diffusion::diffusion::{sample_with_trace, train, DiffusionSchedule, SampleRequest, TrainConfig};
use pbc_diffusion::io::augment;
use pbc_diffusion::md::{run_anneal, MdConfig};
use pbc_diffusion::rdf::{compute_rdf, compute_rdf_points, rdf_mse};
use pbc_diffusion::{ConditionRanges, OppParams};

fn main() -> pbc_diffusion::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(50, |a| a.parse().expect("epochs"));
    let md = MdConfig {
        n_particles: 125,
        target_temperature: 0.05,
        anneal_steps: 10_000,
        equil_steps: 10_000,
        cutoff: 2.5,
        ..Default::default()
    };
    let reference = run_anneal(&md, &OppParams::new(10.0, 3.0)?, 3)?.conformation;
    let g_ref = compute_rdf(&reference, 100)?;
    println!("reference: {} particles, box {:.3}", reference.len(), reference.bbox().lengths()[0]);

    let denoiser = DenoiserConfig {
        n_layers: 4,
        hidden: 32,
        k_neighbors: 16,
        conv_mlp_hidden: vec![32, 32],
        out_mlp_hidden: vec![64, 64],
        ..Default::default()
    };
    let training = TrainConfig {
        epochs,
        ..Default::default()
    };
    let schedule = DiffusionSchedule::default();
    let ranges = ConditionRanges::default();
    let out = train(&augment(&reference)?, &training, &denoiser, &schedule, &ranges, |r| {
        if r.epoch % 10 == 0 {
            println!("epoch {:>4}  loss {:.4}", r.epoch, r.mean_loss);
        }
    })?;

    let request = SampleRequest {
        n_particles: reference.len(),
        bbox: *reference.bbox(),
        condition: None,
        ranges,
        seed: 11,
    };
    let sample = sample_with_trace(&request, &out.params, &schedule, |t, x| {
        if [500, 490, 250, 100, 50, 10, 0].contains(&t) {
            let g = compute_rdf_points(x, reference.bbox(), 100).expect("rdf");
            println!("t = {t:>3}  RDF-MSE {:.4}", rdf_mse(&g, &g_ref).expect("same binning"));
        }
    })?;
    let g = compute_rdf(&sample, 100)?;
    println!(
        "first peak: sample bin {}, reference bin {}",
        g.first_peak_bin(),
        g_ref.first_peak_bin()
    );
    Ok(())
}
