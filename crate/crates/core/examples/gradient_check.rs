//! Compares backpropagated gradients of the denoising loss with central
//! finite differences on a small network.
//!
//!     cargo run --release --example gradient_check

use pbc_diffusion::denoiser::{init_params, loss_and_gradients, DenoiserConfig, GlobalFeatures, TrainingExample};
use pbc_diffusion::Box3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> pbc_diffusion::Result<()> {
    let config = DenoiserConfig {
        n_layers: 2,
        hidden: 4,
        k_neighbors: 3,
        conv_mlp_hidden: vec![4, 4],
        out_mlp_hidden: vec![8],
        ..Default::default()
    };
    let params = init_params::<f64>(&config, 3)?;
    println!("{} parameters", params.len());

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bbox = Box3::cubic(2.5)?;
    let batch = [TrainingExample {
        positions: (0..10).map(|_| [0, 1, 2].map(|_| rng.gen::<f64>() * 2.5)).collect(),
        global: GlobalFeatures::unconditional(0.3),
        target: (0..10).map(|_| [0, 1, 2].map(|_| rng.sample(StandardNormal))).collect(),
    }];
    let (loss, grads) = loss_and_gradients(&batch, &params, &bbox)?;
    println!("loss {loss:.6}");

    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let i = rng.gen_range(0..params.len());
        let mut p = params.clone();
        p.values[i] += h;
        let up = loss_and_gradients(&batch, &p, &bbox)?.0;
        p.values[i] -= 2.0 * h;
        let down = loss_and_gradients(&batch, &p, &bbox)?.0;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-12);
        worst = worst.max(rel);
        println!("param {i:>4}: backprop {:+.8e}  finite diff {fd:+.8e}  rel {rel:.1e}", grads[i]);
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
