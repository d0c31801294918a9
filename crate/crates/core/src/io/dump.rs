use std::fmt::Write as _;

use super::format_g;
use crate::conformation::{Conformation, Provenance, Source};
use crate::error::{Error, Result};
use crate::geometry::{wrap_coordinate, Box3};

const KNOWN_COLUMNS: &[&str] = &[
    "id", "type", "mol", "element", "mass", "q", "x", "y", "z", "xs", "ys", "zs", "xu", "yu", "zu", "xsu", "ysu",
    "zsu", "ix", "iy", "iz", "vx", "vy", "vz", "fx", "fy", "fz",
];

#[derive(Clone, Copy)]
enum CoordStyle {
    Unscaled,
    Scaled,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        let (i, l) = self.inner.next()?;
        self.last = i + 1;
        Some((i + 1, l.trim_end_matches('\r')))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            message: format!("file ends inside the {what} section"),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot read {what} from {tok:?}")))
}

/// Reads every snapshot of a LAMMPS text dump (`dump atom` or `dump custom`).
/// Scaled (`xs ys zs`) and unscaled (`x y z`, `xu yu zu`) coordinates are
/// detected from the ATOMS header; atoms are returned sorted by id and
/// wrapped into a box with its origin at the lower bounds.
pub fn parse_lammps_dump(text: &str) -> Result<Vec<Conformation>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut out = Vec::new();
    loop {
        let (ln, header) = loop {
            match lines.next_line() {
                None => return Ok(out),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some(x) => break x,
            }
        };
        if header.trim() != "ITEM: TIMESTEP" {
            return Err(parse_err(ln, format!("expected 'ITEM: TIMESTEP', found {header:?}")));
        }
        let (ln, l) = lines.expect("TIMESTEP")?;
        let timestep: u64 = parse_num(l.trim(), ln, "timestep")?;

        let (ln, l) = lines.expect("NUMBER OF ATOMS")?;
        if l.trim() != "ITEM: NUMBER OF ATOMS" {
            return Err(parse_err(ln, format!("expected 'ITEM: NUMBER OF ATOMS', found {l:?}")));
        }
        let (ln, l) = lines.expect("NUMBER OF ATOMS")?;
        let n: usize = parse_num(l.trim(), ln, "atom count")?;
        if n == 0 {
            return Err(parse_err(ln, "snapshot has no atoms"));
        }

        let (ln, l) = lines.expect("BOX BOUNDS")?;
        if !l.starts_with("ITEM: BOX BOUNDS") {
            return Err(parse_err(ln, format!("expected 'ITEM: BOX BOUNDS', found {l:?}")));
        }
        if l.contains("xy") {
            return Err(parse_err(ln, "triclinic boxes are not supported"));
        }
        let mut lo = [0.0; 3];
        let mut len = [0.0; 3];
        for d in 0..3 {
            let (ln, l) = lines.expect("BOX BOUNDS")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(ln, format!("box bounds need 'lo hi', found {l:?}")));
            }
            let a: f64 = parse_num(toks[0], ln, "box bound")?;
            let b: f64 = parse_num(toks[1], ln, "box bound")?;
            if !(b > a) {
                return Err(parse_err(ln, format!("box bounds {a} {b} are not increasing")));
            }
            lo[d] = a;
            len[d] = b - a;
        }
        let bbox = Box3::new(len)?;

        let (ln, l) = lines.expect("ATOMS")?;
        let cols: Vec<&str> = match l.strip_prefix("ITEM: ATOMS") {
            Some(rest) => rest.split_whitespace().collect(),
            None => return Err(parse_err(ln, format!("expected 'ITEM: ATOMS', found {l:?}"))),
        };
        if let Some(bad) = cols.iter().find(|c| !KNOWN_COLUMNS.contains(c)) {
            return Err(parse_err(ln, format!("unknown column {bad:?}")));
        }
        let find = |names: [&str; 3]| -> Option<[usize; 3]> {
            let idx: Vec<usize> = names
                .iter()
                .filter_map(|n| cols.iter().position(|c| c == n))
                .collect();
            (idx.len() == 3).then(|| [idx[0], idx[1], idx[2]])
        };
        let id_col = cols
            .iter()
            .position(|&c| c == "id")
            .ok_or_else(|| parse_err(ln, "ATOMS header has no 'id' column"))?;
        let (xyz, style) = if let Some(i) = find(["x", "y", "z"]) {
            (i, CoordStyle::Unscaled)
        } else if let Some(i) = find(["xu", "yu", "zu"]) {
            (i, CoordStyle::Unscaled)
        } else if let Some(i) = find(["xs", "ys", "zs"]) {
            (i, CoordStyle::Scaled)
        } else if let Some(i) = find(["xsu", "ysu", "zsu"]) {
            (i, CoordStyle::Scaled)
        } else {
            return Err(parse_err(ln, "ATOMS header has no complete coordinate triple"));
        };

        let mut atoms: Vec<(u64, [f64; 3])> = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, l) = lines.expect("ATOMS")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != cols.len() {
                return Err(parse_err(
                    ln,
                    format!("expected {} columns, found {} (atom count mismatch?)", cols.len(), toks.len()),
                ));
            }
            let id: u64 = parse_num(toks[id_col], ln, "atom id")?;
            let mut p = [0.0; 3];
            for d in 0..3 {
                let v: f64 = parse_num(toks[xyz[d]], ln, "coordinate")?;
                if !v.is_finite() {
                    return Err(parse_err(ln, "non-finite coordinate"));
                }
                let rel = match style {
                    CoordStyle::Unscaled => v - lo[d],
                    CoordStyle::Scaled => v * len[d],
                };
                p[d] = wrap_coordinate(rel, len[d]);
            }
            atoms.push((id, p));
        }
        atoms.sort_by_key(|a| a.0);
        if let Some(w) = atoms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_err(ln, format!("duplicate atom id {}", w[0].0)));
        }
        let positions = atoms.into_iter().map(|a| a.1).collect();
        out.push(Conformation::new(
            positions,
            bbox,
            None,
            Provenance::new(Source::LammpsDump, None, timestep),
        )?);
    }
}

/// Writes snapshots in `dump atom`-like form with unscaled coordinates
/// printed as `%g` (six significant digits), the LAMMPS default. A value
/// that would print as the box length is printed as its periodic image 0.
pub fn write_lammps_dump(confs: &[Conformation]) -> String {
    let mut s = String::new();
    for conf in confs {
        let l = conf.bbox().lengths();
        let _ = writeln!(s, "ITEM: TIMESTEP\n{}", conf.provenance.timestep);
        let _ = writeln!(s, "ITEM: NUMBER OF ATOMS\n{}", conf.len());
        s.push_str("ITEM: BOX BOUNDS pp pp pp\n");
        for len in l {
            let _ = writeln!(s, "0 {}", format_g(len, 16));
        }
        s.push_str("ITEM: ATOMS id type x y z\n");
        for (i, p) in conf.positions().iter().enumerate() {
            let _ = write!(s, "{} 1", i + 1);
            for d in 0..3 {
                let mut txt = format_g(p[d], 6);
                if txt.parse::<f64>().map_or(true, |v| v >= l[d]) {
                    txt = "0".into();
                }
                let _ = write!(s, " {txt}");
            }
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SCALED: &str = "ITEM: TIMESTEP
100
ITEM: NUMBER OF ATOMS
2
ITEM: BOX BOUNDS pp pp pp
0 10
0 10
0 10
ITEM: ATOMS id type xs ys zs
2 1 0.5 0.25 0.125
1 1 0.1 0.2 0.3
";

    #[test]
    fn scaled_columns_and_id_order() {
        let confs = parse_lammps_dump(SCALED).unwrap();
        assert_eq!(confs.len(), 1);
        let c = &confs[0];
        assert_eq!(c.provenance.timestep, 100);
        assert_eq!(c.provenance.source, Source::LammpsDump);
        assert_eq!(c.positions()[0], [1.0, 2.0, 3.0]);
        assert_eq!(c.positions()[1], [5.0, 2.5, 1.25]);
    }

    #[test]
    fn unscaled_with_offset_bounds() {
        let text = "ITEM: TIMESTEP\n0\nITEM: NUMBER OF ATOMS\n1\nITEM: BOX BOUNDS pp pp pp\n-5 5\n-5 5\n0 4\nITEM: ATOMS id type x y z vx vy vz\n1 1 -4.5 5.5 1 0 0 0\n";
        let c = &parse_lammps_dump(text).unwrap()[0];
        assert_eq!(c.bbox().lengths(), [10.0, 10.0, 4.0]);
        assert_eq!(c.positions()[0], [0.5, 0.5, 1.0]);
    }

    #[test]
    fn malformed_input_is_rejected_with_line_numbers() {
        let truncated: String = SCALED.lines().take(10).collect::<Vec<_>>().join("\n");
        match parse_lammps_dump(&truncated) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("ATOMS"), "{message}"),
            other => panic!("{other:?}"),
        }
        let bad_col = SCALED.replace("xs ys zs", "xs ys zs foo");
        assert!(matches!(parse_lammps_dump(&bad_col), Err(Error::Parse { line: 9, .. })));
        let bad_count = SCALED.replace("ATOMS\n2", "ATOMS\n3");
        assert!(parse_lammps_dump(&bad_count).is_err());
        let bad_header = SCALED.replace("ITEM: TIMESTEP", "ITEM: TIME");
        assert!(matches!(parse_lammps_dump(&bad_header), Err(Error::Parse { line: 1, .. })));
        let dup = SCALED.replace("2 1 0.5", "1 1 0.5");
        assert!(parse_lammps_dump(&dup).is_err());
        let no_coords = SCALED.replace("xs ys zs", "xs ys vx");
        assert!(parse_lammps_dump(&no_coords).is_err());
        assert!(parse_lammps_dump("").unwrap().is_empty());
    }

    #[test]
    fn write_parse_round_trip_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bbox = Box3::new([7.3, 7.3, 9.1]).unwrap();
        let mut pts: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.gen::<f64>() * 7.3, rng.gen::<f64>() * 7.3, rng.gen::<f64>() * 9.1])
            .collect();
        pts.push([7.3 - 1e-9, 0.0, 1e-7]);
        let conf = Conformation::new(pts, bbox, None, Provenance::new(Source::Sampled, None, 42)).unwrap();
        let text1 = write_lammps_dump(&[conf.clone(), conf.clone()]);
        let parsed = parse_lammps_dump(&text1).unwrap();
        assert_eq!(parsed.len(), 2);
        let text2 = write_lammps_dump(&parsed);
        assert_eq!(text1, text2);
        for (a, b) in conf.positions().iter().zip(parsed[0].positions()) {
            assert!(bbox.distance(a, b).unwrap() < 1e-5 * 9.1);
        }
        assert_eq!(parsed[0].bbox(), &bbox);
        assert_eq!(parsed[0].provenance.timestep, 42);
    }
}
