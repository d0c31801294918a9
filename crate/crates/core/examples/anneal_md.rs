//! Anneals a small system with the built-in MD engine, prints the thermo log
//! and the RDF, and writes the final frame as a LAMMPS dump.
//!
//!     cargo run --release --example anneal_md -- 10 3 0.02

use pbc_diffusion::io::write_lammps_dump;
use pbc_diffusion::md::{run_anneal, MdConfig};
use pbc_diffusion::rdf::compute_rdf;
use pbc_diffusion::OppParams;

fn main() -> pbc_diffusion::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let (k, phi, t) = (
        args.first().copied().unwrap_or(10.0),
        args.get(1).copied().unwrap_or(3.0),
        args.get(2).copied().unwrap_or(0.02),
    );
    let config = MdConfig {
        n_particles: 216,
        target_temperature: t,
        anneal_steps: 10_000,
        equil_steps: 10_000,
        log_every: 2000,
        ..Default::default()
    };
    let out = run_anneal(&config, &OppParams::new(k, phi)?, 7)?;
    println!("{:>7} {:>10} {:>12} {:>12}", "step", "T", "PE/N", "E/N");
    let n = config.n_particles as f64;
    for rec in &out.log {
        println!(
            "{:>7} {:>10.4} {:>12.5} {:>12.5}",
            rec.step,
            rec.temperature,
            rec.potential_energy / n,
            rec.total_energy / n
        );
    }
    let g = compute_rdf(&out.conformation, 60)?;
    let peak = g.first_peak_bin();
    println!("first RDF peak at r = {:.3}, g = {:.2}", g.r_centers()[peak], g.values[peak]);
    std::fs::write("anneal_md.dump", write_lammps_dump(&[out.conformation]))?;
    println!("wrote anneal_md.dump");
    Ok(())
}
