use std::fmt::Write as _;

use super::format_g;
use crate::error::{Error, Result};
use crate::potential::{OppParams, PotentialTable, TableRow};

/// LAMMPS input script for one annealing run with a tabulated pair
/// potential. Byte-stable for identical inputs.
pub fn emit_lammps_script(
    params: &OppParams,
    t_target: f64,
    num_steps: u64,
    dump_every: u64,
    dump_file: &str,
    table_path: &str,
) -> String {
    // 15 significant digits keeps 10 * 0.03 from printing as 0.30000000000000004
    let ti = format_g(10.0 * t_target.abs(), 15);
    let tf = format_g(t_target, 15);
    format!(
        "# oscillating pair potential k = {k}, phi = {phi}
units lj
atom_style atomic
dimension 3
boundary p p p

region box block 0 10 0 10 0 10
create_box 1 box

lattice sc 1.0
create_atoms 1 box

pair_style table linear 1000
pair_coeff 1 1 {table_path} CUSTOM

mass 1 1.0

velocity all create 1.0 12345 dist gaussian
displace_atoms all random 0.1 0.1 0.1 12345

neighbor 0.3 bin
neigh_modify delay 0 every 1 check yes

# Nose-Hoover Thermostat for NVT
fix 1 all nvt temp {ti} {tf} $(100.0*dt)

timestep 0.005
thermo 100
thermo_style custom step temp pe ke etotal

run {num_steps}
dump 1 all atom {dump_every} {dump_file}
run {num_steps}
",
        k = params.k,
        phi = params.phi,
    )
}

/// LAMMPS `pair_style table` file: comment, blank line, keyword, `N n`,
/// blank line, then `index r energy force` rows at 15 significant digits.
pub fn write_table_file(table: &PotentialTable, keyword: &str) -> Result<String> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("cannot write an empty table".into()));
    }
    if keyword.is_empty() || keyword.contains(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("bad table keyword {keyword:?}")));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# tabulated oscillating pair potential, {} points", table.len());
    s.push('\n');
    let _ = writeln!(s, "{keyword}");
    let _ = writeln!(s, "N {}", table.len());
    s.push('\n');
    for row in &table.rows {
        let _ = writeln!(s, "{} {:.14e} {:.14e} {:.14e}", row.index, row.r, row.energy, row.force);
    }
    Ok(s)
}

/// Reads the first section of a table file; returns its keyword and rows.
pub fn read_table_file(text: &str) -> Result<(String, PotentialTable)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line, message: String| Error::Parse { line, message };
    let (_, keyword) = lines
        .next()
        .ok_or_else(|| err(text.lines().count() + 1, "table file has no section".into()))?;
    let (ln, header) = lines
        .next()
        .ok_or_else(|| err(text.lines().count() + 1, "missing 'N' line".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 2 || toks[0] != "N" {
        return Err(err(ln, format!("expected 'N <count>', found {header:?}")));
    }
    let n: usize = toks[1]
        .parse()
        .map_err(|_| err(ln, format!("bad point count {:?}", toks[1])))?;
    let mut rows = Vec::with_capacity(n);
    for expected in 1..=n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(text.lines().count() + 1, format!("table ends after {} of {n} rows", expected - 1)))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(err(ln, format!("expected 4 columns, found {}", toks.len())));
        }
        let index: usize = toks[0].parse().map_err(|_| err(ln, format!("bad index {:?}", toks[0])))?;
        if index != expected {
            return Err(err(ln, format!("row index {index}, expected {expected}")));
        }
        let mut vals = [0.0; 3];
        for (v, t) in vals.iter_mut().zip(&toks[1..]) {
            *v = t.parse().map_err(|_| err(ln, format!("bad number {t:?}")))?;
        }
        rows.push(TableRow {
            index,
            r: vals[0],
            energy: vals[1],
            force: vals[2],
        });
    }
    Ok((keyword.to_string(), PotentialTable { rows }))
}
