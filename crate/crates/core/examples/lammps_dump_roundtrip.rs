//! Reads a LAMMPS `dump atom` file (or makes one), prints a summary and
//! round-trips it through the dump writer and the native binary format.
//!
//!     cargo run --example lammps_dump_roundtrip -- path/to/file.dump

use pbc_diffusion::io::{parse_lammps_dump, read_conformation, write_conformation, write_lammps_dump};
use pbc_diffusion::{Box3, Conformation, Provenance, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pbc_diffusion::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let bbox = Box3::cubic(4.0)?;
            let frames: Vec<Conformation> = (0..3)
                .map(|f| {
                    let pts = (0..64).map(|_| [0, 1, 2].map(|_| rng.gen::<f64>() * 4.0)).collect();
                    Conformation::new(pts, bbox, None, Provenance::new(Source::Sampled, None, 1000 * f))
                })
                .collect::<pbc_diffusion::Result<_>>()?;
            write_lammps_dump(&frames)
        }
    };
    let frames = parse_lammps_dump(&text)?;
    for f in &frames {
        println!("timestep {:>8}: {} atoms, box {:?}", f.provenance.timestep, f.len(), f.bbox().lengths());
    }
    let rewritten = write_lammps_dump(&frames);
    let again = parse_lammps_dump(&rewritten)?;
    assert_eq!(write_lammps_dump(&again), rewritten);
    println!("dump text is stable after one write");

    let last = frames.last().expect("at least one frame");
    let bytes = write_conformation(last);
    assert_eq!(&read_conformation(&bytes)?, last);
    println!("native format: {} bytes, bit-exact", bytes.len());
    Ok(())
}
