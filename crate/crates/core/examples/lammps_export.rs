//! Tabulates the oscillating pair potential and writes a LAMMPS script plus
//! pair table for one annealing run.
//!
//!     cargo run --example lammps_export -- 7.5 2.0 0.03 out_dir

use std::path::PathBuf;

use pbc_diffusion::io::{emit_lammps_script, write_table_file};
use pbc_diffusion::potential::{opp_energy, tabulate};
use pbc_diffusion::OppParams;

fn main() -> pbc_diffusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, d: f64| args.get(i).map_or(d, |a| a.parse().expect("number"));
    let params = OppParams::new(num(0, 7.5), num(1, 2.0))?;
    let temperature = num(2, 0.03);
    let dir = PathBuf::from(args.get(3).cloned().unwrap_or_else(|| "lammps_out".into()));
    std::fs::create_dir_all(&dir)?;

    for r in [0.9, 1.0, 1.2, 1.5, 2.0] {
        println!("V({r}) = {:+.6}", opp_energy(r, &params)?);
    }

    let table = tabulate(&params, 0.5, 3.0, 1000)?;
    std::fs::write(dir.join("custom.table"), write_table_file(&table, "CUSTOM")?)?;
    let script = emit_lammps_script(&params, temperature, 100_000, 1000, "anneal.dump", "custom.table");
    std::fs::write(dir.join("anneal.in"), &script)?;
    println!("wrote anneal.in and custom.table to {}", dir.display());
    Ok(())
}
