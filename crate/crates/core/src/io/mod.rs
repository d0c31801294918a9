//! Persistence and interchange: LAMMPS dumps, scripts and pair tables, the
//! native binary conformation format with its JSON manifest, checkpoints,
//! CSV reports and cubic-symmetry augmentation.

mod augment;
mod checkpoint;
mod csv;
mod dump;
mod lammps;
mod native;

use std::fs;
use std::path::Path;

use crate::error::Result;

pub use augment::{augment, random_translation, translate, SymmetryOp, N_SYMMETRIES};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use csv::{loss_history_csv, rdf_csv, read_loss_history_csv, thermo_csv};
pub use dump::{parse_lammps_dump, write_lammps_dump};
pub use lammps::{emit_lammps_script, read_table_file, write_table_file};
pub use native::{
    load_conformation, load_dataset, read_conformation, save_conformation, save_dataset, write_conformation,
    DatasetManifest, ManifestRecord, Split, NATIVE_MAGIC, NATIVE_VERSION,
};

/// printf-style `%g`: `precision` significant digits, trailing zeros
/// removed, exponent form outside `1e-4 <= |x| < 10^precision`.
pub fn format_g(x: f64, precision: usize) -> String {
    let precision = precision.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", precision - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= precision as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (precision as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
