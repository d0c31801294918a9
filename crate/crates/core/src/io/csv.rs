use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::md::ThermoRecord;
use crate::rdf::RdfVector;

/// `epoch,loss` with one row per epoch (1-based).
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{l:e}", i + 1);
    }
    s
}

pub fn read_loss_history_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "epoch,loss")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header 'epoch,loss'".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.split_once(',')
                .and_then(|(_, v)| v.parse().ok())
                .ok_or(Error::Parse {
                    line: i + 1,
                    message: format!("bad row {l:?}"),
                })
        })
        .collect()
}

pub fn thermo_csv(log: &[ThermoRecord]) -> String {
    let mut s = String::from("step,temperature,potential_energy,kinetic_energy,total_energy\n");
    for r in log {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e}",
            r.step, r.temperature, r.potential_energy, r.kinetic_energy, r.total_energy
        );
    }
    s
}

/// `r_center,g` with one row per bin.
pub fn rdf_csv(rdf: &RdfVector) -> String {
    let mut s = String::from("r_center,g\n");
    for (r, g) in rdf.r_centers().iter().zip(&rdf.values) {
        let _ = writeln!(s, "{r:e},{g:e}");
    }
    s
}
