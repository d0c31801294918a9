//! Radial distribution function with ideal-gas normalization, and the
//! RDF-MSE comparison metric.

use std::f64::consts::PI;

use crate::conformation::Conformation;
use crate::error::{Error, Result};
use crate::geometry::Box3;

pub const DEFAULT_BINS: usize = 100;

/// Binned `g(r)` over `[0, r_max)`; bin `b` covers
/// `[b * r_max / n, (b + 1) * r_max / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdfVector {
    pub values: Vec<f64>,
    pub r_max: f64,
}

impl RdfVector {
    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.r_max / self.values.len() as f64
    }

    pub fn r_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.values.len()).map(|b| (b as f64 + 0.5) * w).collect()
    }

    /// Index of the largest `g` value; the first such bin on ties.
    pub fn first_peak_bin(&self) -> usize {
        let mut best = 0;
        for (b, &g) in self.values.iter().enumerate() {
            if g > self.values[best] {
                best = b;
            }
        }
        best
    }
}

/// Unordered pair counts per bin out to half the smallest box side. Pairs at
/// or beyond `r_max` are dropped.
pub fn pair_histogram(points: &[[f64; 3]], bbox: &Box3, n_bins: usize) -> Result<(Vec<u64>, f64)> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("RDF needs at least one bin".into()));
    }
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "RDF needs at least 2 particles, got {}",
            points.len()
        )));
    }
    bbox.check_all_wrapped(points)?;
    let r_max = 0.5 * bbox.min_length();
    let r_max_sq = r_max * r_max;
    let inv_w = n_bins as f64 / r_max;
    let mut counts = vec![0u64; n_bins];
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d2 = bbox.distance_sq_unchecked(&points[i], &points[j]);
            if d2 < r_max_sq {
                let b = ((d2.sqrt() * inv_w) as usize).min(n_bins - 1);
                counts[b] += 1;
            }
        }
    }
    Ok((counts, r_max))
}

pub fn compute_rdf_points(points: &[[f64; 3]], bbox: &Box3, n_bins: usize) -> Result<RdfVector> {
    let (counts, r_max) = pair_histogram(points, bbox, n_bins)?;
    let n = points.len() as f64;
    let pairs = 0.5 * n * (n - 1.0);
    let w = r_max / n_bins as f64;
    let volume = bbox.volume();
    let values = counts
        .iter()
        .enumerate()
        .map(|(b, &h)| {
            let (r0, r1) = (b as f64 * w, (b + 1) as f64 * w);
            let shell = 4.0 / 3.0 * PI * (r1.powi(3) - r0.powi(3));
            h as f64 / (pairs * shell / volume)
        })
        .collect();
    Ok(RdfVector { values, r_max })
}

pub fn compute_rdf(conf: &Conformation, n_bins: usize) -> Result<RdfVector> {
    compute_rdf_points(conf.positions(), conf.bbox(), n_bins)
}

/// Mean squared difference of two RDFs over their bins.
pub fn rdf_mse(a: &RdfVector, b: &RdfVector) -> Result<f64> {
    if a.n_bins() != b.n_bins() || a.r_max != b.r_max {
        return Err(Error::InvalidArgument(format!(
            "RDF binning mismatch: ({} bins, r_max {}) vs ({} bins, r_max {})",
            a.n_bins(),
            a.r_max,
            b.n_bins(),
            b.r_max
        )));
    }
    if a.n_bins() == 0 {
        return Err(Error::InvalidArgument("empty RDF".into()));
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.n_bins() as f64)
}
