use rand::Rng;

use crate::conformation::Conformation;
use crate::error::{Error, Result};

pub const N_SYMMETRIES: usize = 48;

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// One element of the cube's symmetry group: output axis `d` takes input
/// axis `perm[d]` multiplied by `sign[d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymmetryOp {
    pub perm: [usize; 3],
    pub sign: [i8; 3],
}

impl SymmetryOp {
    /// Ids run over permutations (outer) and sign patterns (inner); id 0 is
    /// the identity.
    pub fn from_id(id: usize) -> Result<Self> {
        if id >= N_SYMMETRIES {
            return Err(Error::InvalidArgument(format!("symmetry id {id} out of range")));
        }
        let perm = PERMUTATIONS[id / 8];
        let bits = id % 8;
        let sign = [0, 1, 2].map(|d| if bits >> d & 1 == 1 { -1 } else { 1 });
        Ok(Self { perm, sign })
    }

    pub fn id(&self) -> usize {
        let p = PERMUTATIONS.iter().position(|p| *p == self.perm).expect("valid permutation");
        let bits: usize = (0..3).map(|d| usize::from(self.sign[d] < 0) << d).sum();
        p * 8 + bits
    }

    pub fn apply_vector(&self, v: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|d| f64::from(self.sign[d]) * v[self.perm[d]])
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &SymmetryOp) -> SymmetryOp {
        SymmetryOp {
            perm: [0, 1, 2].map(|d| first.perm[self.perm[d]]),
            sign: [0, 1, 2].map(|d| self.sign[d] * first.sign[self.perm[d]]),
        }
    }
}

/// The 48 images of `conf` under the cube's signed axis permutations about
/// the box centre, re-wrapped; element `i` has augmentation id `i`.
pub fn augment(conf: &Conformation) -> Result<Vec<Conformation>> {
    if !conf.bbox().is_cubic() {
        return Err(Error::InvalidArgument(format!(
            "augmentation needs a cubic box, got {:?}",
            conf.bbox().lengths()
        )));
    }
    (0..N_SYMMETRIES)
        .map(|id| {
            if id == 0 {
                return Ok(conf.clone());
            }
            let op = SymmetryOp::from_id(id)?;
            let bbox = *conf.bbox();
            let c = 0.5 * bbox.lengths()[0];
            let positions = conf
                .positions()
                .iter()
                .map(|p| {
                    let q = op.apply_vector(&[p[0] - c, p[1] - c, p[2] - c]);
                    bbox.wrap_point(&[q[0] + c, q[1] + c, q[2] + c])
                })
                .collect();
            Conformation::new(positions, bbox, conf.condition, conf.provenance)
        })
        .collect()
}

/// Rigid periodic shift of every particle by `shift`.
pub fn translate(conf: &Conformation, shift: &[f64; 3]) -> Result<Conformation> {
    let bbox = *conf.bbox();
    let positions = conf
        .positions()
        .iter()
        .map(|p| bbox.wrap_point(&[p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]))
        .collect();
    Conformation::new(positions, bbox, conf.condition, conf.provenance)
}

/// [`translate`] by a shift drawn uniformly over the box.
pub fn random_translation(conf: &Conformation, rng: &mut impl Rng) -> Result<Conformation> {
    let l = conf.bbox().lengths();
    let shift = [rng.gen::<f64>() * l[0], rng.gen::<f64>() * l[1], rng.gen::<f64>() * l[2]];
    translate(conf, &shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformation::{Condition, Provenance, Source};
    use crate::geometry::Box3;
    use crate::rdf::compute_rdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn probe() -> Conformation {
        Conformation::new(
            vec![[0.1, 0.2, 0.35], [1.7, 0.4, 2.2], [2.9, 2.1, 0.6], [0.8, 1.3, 1.9]],
            Box3::cubic(3.0).unwrap(),
            Some(Condition::new(3.0, 1.0, 0.02)),
            Provenance::new(Source::ReferenceMd, Some(1), 5),
        )
        .unwrap()
    }

    #[test]
    fn ids_round_trip_and_identity_first() {
        for id in 0..N_SYMMETRIES {
            assert_eq!(SymmetryOp::from_id(id).unwrap().id(), id);
        }
        let id0 = SymmetryOp::from_id(0).unwrap();
        assert_eq!(id0.perm, [0, 1, 2]);
        assert_eq!(id0.sign, [1, 1, 1]);
        assert!(SymmetryOp::from_id(48).is_err());
    }

    #[test]
    fn forty_eight_distinct_images() {
        let conf = probe();
        let images = augment(&conf).unwrap();
        assert_eq!(images.len(), 48);
        assert_eq!(images[0], conf);
        let keys: HashSet<Vec<u64>> = images
            .iter()
            .map(|c| c.positions().iter().flatten().map(|x| x.to_bits()).collect())
            .collect();
        assert_eq!(keys.len(), 48);
        for img in &images {
            assert_eq!(img.condition, conf.condition);
            assert!(img.positions().iter().all(|p| img.bbox().contains(p)));
        }
    }

    #[test]
    fn group_closure() {
        let conf = probe();
        let images = augment(&conf).unwrap();
        for a in 0..48 {
            for b in 0..48 {
                let (oa, ob) = (SymmetryOp::from_id(a).unwrap(), SymmetryOp::from_id(b).unwrap());
                let c = ob.compose(&oa).id();
                // apply b to the image under a, compare with the image under c
                let twice = &augment(&images[a]).unwrap()[b];
                for (p, q) in twice.positions().iter().zip(images[c].positions()) {
                    assert!(conf.bbox().distance(p, q).unwrap() < 1e-12, "{a} then {b} != {c}");
                }
            }
        }
    }

    #[test]
    fn rdf_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = 5.0;
        let pts: Vec<[f64; 3]> = (0..150)
            .map(|_| [rng.gen::<f64>() * l, rng.gen::<f64>() * l, rng.gen::<f64>() * l])
            .collect();
        let conf = Conformation::new(pts, Box3::cubic(l).unwrap(), None, Provenance::new(Source::Sampled, None, 0)).unwrap();
        let g0 = compute_rdf(&conf, 100).unwrap();
        for img in augment(&conf).unwrap() {
            assert_eq!(compute_rdf(&img, 100).unwrap(), g0);
        }
        let moved = random_translation(&conf, &mut rng).unwrap();
        assert_eq!(compute_rdf(&moved, 100).unwrap(), g0);
    }

    #[test]
    fn rejects_non_cubic_box() {
        let conf = Conformation::new(
            vec![[0.5, 0.5, 0.5]],
            Box3::new([1.0, 2.0, 1.0]).unwrap(),
            None,
            Provenance::new(Source::Sampled, None, 0),
        )
        .unwrap();
        assert!(augment(&conf).is_err());
    }
}
