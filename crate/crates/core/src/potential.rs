//! Oscillating pair potential `U(r) = r^-15 + r^-3 cos(k (r - 1.25) - phi)`,
//! its analytic force, and linear tabulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TABLE_R_MIN: f64 = 0.75;
pub const DEFAULT_TABLE_R_MAX: f64 = 5.0;
pub const DEFAULT_TABLE_POINTS: usize = 1000;
pub const DEFAULT_CUTOFF: f64 = 3.0;

/// Wavenumber `k` and phase `phi` of the oscillating pair potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OppParams {
    pub k: f64,
    pub phi: f64,
}

impl OppParams {
    pub fn new(k: f64, phi: f64) -> Result<Self> {
        if !(k.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "potential parameters must be finite, got k = {k}, phi = {phi}"
            )));
        }
        Ok(Self { k, phi })
    }

    /// Energy without the domain check. `r` must be positive.
    #[inline]
    pub fn energy_unchecked(&self, r: f64) -> f64 {
        let r3 = r * r * r;
        let inv3 = 1.0 / r3;
        let inv15 = inv3 * inv3 * inv3 * inv3 * inv3;
        inv15 + inv3 * (self.k * (r - 1.25) - self.phi).cos()
    }

    /// `-dU/dr` without the domain check.
    #[inline]
    pub fn force_unchecked(&self, r: f64) -> f64 {
        let inv = 1.0 / r;
        let inv3 = inv * inv * inv;
        let inv4 = inv3 * inv;
        let inv16 = inv4 * inv4 * inv4 * inv4;
        let (s, c) = (self.k * (r - 1.25) - self.phi).sin_cos();
        15.0 * inv16 + 3.0 * inv4 * c + self.k * inv3 * s
    }
}

fn check_separation(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("pair separation must be positive and finite, got {r}")))
    }
}

pub fn opp_energy(r: f64, p: &OppParams) -> Result<f64> {
    check_separation(r)?;
    Ok(p.energy_unchecked(r))
}

/// Scalar force `-dU/dr`; positive values are repulsive.
pub fn opp_force(r: f64, p: &OppParams) -> Result<f64> {
    check_separation(r)?;
    Ok(p.force_unchecked(r))
}

/// One row of a pair table. `index` is 1-based, as in LAMMPS table files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub index: usize,
    pub r: f64,
    pub energy: f64,
    pub force: f64,
}

/// Linearly spaced table of energy and force.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pub rows: Vec<TableRow>,
}

impl PotentialTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.rows[0].r
    }

    pub fn r_max(&self) -> f64 {
        self.rows[self.rows.len() - 1].r
    }

    /// Linear interpolation of (energy, force) at `r`, `None` outside the table.
    pub fn interpolate(&self, r: f64) -> Option<(f64, f64)> {
        let n = self.rows.len();
        if n < 2 || !(r >= self.r_min() && r <= self.r_max()) {
            return None;
        }
        let dr = (self.r_max() - self.r_min()) / (n - 1) as f64;
        let i = (((r - self.r_min()) / dr) as usize).min(n - 2);
        let (a, b) = (&self.rows[i], &self.rows[i + 1]);
        let w = ((r - a.r) / (b.r - a.r)).clamp(0.0, 1.0);
        Some((
            a.energy + w * (b.energy - a.energy),
            a.force + w * (b.force - a.force),
        ))
    }
}

pub fn tabulate(p: &OppParams, r_min: f64, r_max: f64, n_points: usize) -> Result<PotentialTable> {
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "table range must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "table needs at least 2 points, got {n_points}"
        )));
    }
    let step = (r_max - r_min) / (n_points - 1) as f64;
    let rows = (0..n_points)
        .map(|i| {
            let r = if i == n_points - 1 {
                r_max
            } else {
                r_min + i as f64 * step
            };
            TableRow {
                index: i + 1,
                r,
                energy: p.energy_unchecked(r),
                force: p.force_unchecked(r),
            }
        })
        .collect();
    Ok(PotentialTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn energy_examples() {
        let p = OppParams::new(1.0, 0.0).unwrap();
        // 1 + cos(-0.25)
        assert_relative_eq!(opp_energy(1.0, &p).unwrap(), 1.968_912_421_710_644_8, epsilon = 1e-14);
        for k in [0.5, 3.0, 14.0] {
            let p = OppParams::new(k, 0.0).unwrap();
            let expect = 1.25f64.powi(-15) + 1.25f64.powi(-3);
            assert_relative_eq!(opp_energy(1.25, &p).unwrap(), expect, epsilon = 1e-15);
            // 0.8^15 + 0.8^3 in exact decimal
            assert_relative_eq!(expect, 0.547_184_372_088_832, epsilon = 1e-15);
        }
        assert!(opp_energy(100.0, &p).unwrap().abs() < 1e-6);
        assert!(opp_energy(0.0, &p).is_err());
        assert!(opp_energy(-1.0, &p).is_err());
        assert!(opp_force(0.0, &p).is_err());
    }

    #[test]
    fn force_closed_forms() {
        let p = OppParams::new(7.3, 0.0).unwrap();
        let expect = 15.0 * 1.25f64.powi(-16) + 3.0 * 1.25f64.powi(-4);
        assert_relative_eq!(opp_force(1.25, &p).unwrap(), expect, epsilon = 1e-14);

        let p = OppParams::new(0.0, PI / 2.0).unwrap();
        for r in [0.8, 1.0, 2.3, 4.0] {
            assert_relative_eq!(opp_force(r, &p).unwrap(), 15.0 * r.powi(-16), max_relative = 1e-12);
        }
    }

    #[test]
    fn force_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let r = rng.gen_range(0.8..5.0);
            let p = OppParams::new(rng.gen_range(1.0..15.0), rng.gen_range(0.0..6.0)).unwrap();
            let h = 1e-5 * r;
            let fd = -(p.energy_unchecked(r + h) - p.energy_unchecked(r - h)) / (2.0 * h);
            let f = opp_force(r, &p).unwrap();
            let scale = f.abs().max(1e-3);
            assert!((fd - f).abs() / scale < 1e-6, "r={r} p={p:?} fd={fd} f={f}");
        }
    }

    #[test]
    fn phase_periodicity_and_repulsive_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let r = rng.gen_range(0.3..5.0);
            let k = rng.gen_range(0.0..15.0);
            let phi = rng.gen_range(0.0..6.0);
            let a = OppParams::new(k, phi).unwrap().energy_unchecked(r);
            let b = OppParams::new(k, phi + 2.0 * PI).unwrap().energy_unchecked(r);
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
            let r_core = rng.gen_range(0.3..0.8);
            assert!(OppParams::new(k, phi).unwrap().energy_unchecked(r_core) > 0.0);
        }
    }

    #[test]
    fn table_layout() {
        let p = OppParams::new(5.0, 1.0).unwrap();
        let t = tabulate(&p, 0.75, 5.0, 1000).unwrap();
        assert_eq!(t.len(), 1000);
        assert_eq!(t.rows[0].index, 1);
        assert_eq!(t.rows[0].r, 0.75);
        assert_eq!(t.rows[999].r, 5.0);
        let step = (5.0 - 0.75) / 999.0;
        for w in t.rows.windows(2) {
            assert_relative_eq!(w[1].r - w[0].r, step, epsilon = 1e-12);
        }
        for row in &t.rows {
            assert_eq!(row.force, opp_force(row.r, &p).unwrap());
            assert_eq!(row.energy, opp_energy(row.r, &p).unwrap());
        }
        assert!(t.rows[0].energy.abs() < 1e2);
    }

    #[test]
    fn table_rejects_bad_ranges() {
        let p = OppParams::new(5.0, 1.0).unwrap();
        assert!(tabulate(&p, 0.0, 5.0, 10).is_err());
        assert!(tabulate(&p, 2.0, 1.0, 10).is_err());
        assert!(tabulate(&p, 1.0, 2.0, 1).is_err());
    }

    #[test]
    fn table_interpolation_close_to_analytic() {
        let p = OppParams::new(5.0, 1.0).unwrap();
        let t = tabulate(&p, 0.75, 5.0, 1000).unwrap();
        let (e, f) = t.interpolate(2.0).unwrap();
        assert_relative_eq!(e, p.energy_unchecked(2.0), epsilon = 1e-4);
        assert_relative_eq!(f, p.force_unchecked(2.0), epsilon = 1e-3);
        assert_eq!(t.interpolate(0.74), None);
        assert_eq!(t.interpolate(5.0).unwrap().0, t.rows[999].energy);
    }
}
