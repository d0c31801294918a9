//! Particle conformations and the MD conditions that produced them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Box3;

/// MD inputs attached to a conformation: potential `k`, `phi` and target
/// temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub k: f64,
    pub phi: f64,
    pub temperature: f64,
}

impl Condition {
    pub fn new(k: f64, phi: f64, temperature: f64) -> Self {
        Self { k, phi, temperature }
    }

    /// Equality up to a small absolute tolerance, for matching generated
    /// samples against references.
    pub fn approx_eq(&self, other: &Condition) -> bool {
        const TOL: f64 = 1e-9;
        (self.k - other.k).abs() <= TOL
            && (self.phi - other.phi).abs() <= TOL
            && (self.temperature - other.temperature).abs() <= TOL
    }
}

/// Parameter ranges used to rescale conditions onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRanges {
    pub k: (f64, f64),
    pub phi: (f64, f64),
    pub temperature: (f64, f64),
}

impl Default for ConditionRanges {
    fn default() -> Self {
        Self {
            k: (1.0, 15.0),
            phi: (0.0, 6.0),
            temperature: (0.01, 0.05),
        }
    }
}

impl ConditionRanges {
    pub fn scale(&self, c: &Condition) -> [f64; 3] {
        fn affine(x: f64, (lo, hi): (f64, f64)) -> f64 {
            if hi > lo {
                2.0 * (x - lo) / (hi - lo) - 1.0
            } else {
                0.0
            }
        }
        [
            affine(c.k, self.k),
            affine(c.phi, self.phi),
            affine(c.temperature, self.temperature),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    ReferenceMd,
    LammpsDump,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    pub seed: Option<u64>,
    pub timestep: u64,
}

impl Provenance {
    pub fn new(source: Source, seed: Option<u64>, timestep: u64) -> Self {
        Self {
            source,
            seed,
            timestep,
        }
    }
}

/// Particle coordinates (wrapped in the box) with optional generating
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformation {
    positions: Vec<[f64; 3]>,
    bbox: Box3,
    pub condition: Option<Condition>,
    pub provenance: Provenance,
}

impl Conformation {
    pub fn new(
        positions: Vec<[f64; 3]>,
        bbox: Box3,
        condition: Option<Condition>,
        provenance: Provenance,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Invariant("conformation has no particles".into()));
        }
        if let Some(i) = positions.iter().position(|p| !bbox.contains(p)) {
            return Err(Error::Invariant(format!(
                "particle {i} at {:?} lies outside box {:?}",
                positions[i],
                bbox.lengths()
            )));
        }
        Ok(Self {
            positions,
            bbox,
            condition,
            provenance,
        })
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn bbox(&self) -> &Box3 {
        &self.bbox
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Coordinates divided by the box lengths, in `[0, 1)`.
    pub fn normalized(&self) -> Vec<[f64; 3]> {
        let l = self.bbox.lengths();
        self.positions
            .iter()
            .map(|p| to_unit(p, &l))
            .collect()
    }

    /// Inverse of [`Self::normalized`].
    pub fn from_normalized(
        unit: &[[f64; 3]],
        bbox: Box3,
        condition: Option<Condition>,
        provenance: Provenance,
    ) -> Result<Self> {
        let l = bbox.lengths();
        let positions = unit.iter().map(|u| from_unit(u, &l)).collect();
        Self::new(positions, bbox, condition, provenance)
    }
}

/// Map a physical point into unit coordinates, staying strictly below 1.
pub(crate) fn to_unit(p: &[f64; 3], l: &[f64; 3]) -> [f64; 3] {
    let mut u = [0.0; 3];
    for d in 0..3 {
        u[d] = p[d] / l[d];
        if u[d] >= 1.0 {
            u[d] = 0.0;
        }
    }
    u
}

/// Map a unit-box point to physical coordinates, staying strictly below L.
pub(crate) fn from_unit(u: &[f64; 3], l: &[f64; 3]) -> [f64; 3] {
    let mut p = [0.0; 3];
    for d in 0..3 {
        p[d] = u[d] * l[d];
        if p[d] >= l[d] {
            p[d] = 0.0;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unwrapped_and_empty() {
        let b = Box3::cubic(2.0).unwrap();
        let prov = Provenance::new(Source::Sampled, None, 0);
        assert!(Conformation::new(vec![], b, None, prov).is_err());
        assert!(Conformation::new(vec![[2.0, 0.0, 0.0]], b, None, prov).is_err());
        assert!(Conformation::new(vec![[1.999, 0.0, 0.0]], b, None, prov).is_ok());
    }

    #[test]
    fn condition_scaling_hits_range_ends() {
        let r = ConditionRanges::default();
        assert_eq!(r.scale(&Condition::new(1.0, 0.0, 0.01)), [-1.0, -1.0, -1.0]);
        assert_eq!(r.scale(&Condition::new(15.0, 6.0, 0.05)), [1.0, 1.0, 1.0]);
        let mid = r.scale(&Condition::new(8.0, 3.0, 0.03));
        assert!(mid.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn normalized_round_trip_stays_wrapped() {
        let b = Box3::new([3.0, 4.0, 5.0]).unwrap();
        let prov = Provenance::new(Source::Sampled, Some(1), 0);
        let c = Conformation::new(vec![[2.9999999999, 0.1, 4.5]], b, None, prov).unwrap();
        let u = c.normalized();
        let back = Conformation::from_normalized(&u, b, None, prov).unwrap();
        assert!(back.positions()[0][0] < 3.0);
    }
}
