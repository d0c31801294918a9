//! Periodic-box arithmetic: wrapping, minimum-image displacements, and
//! periodic k-nearest-neighbor graphs.
//!
//! Points are fixed-size arrays `[f64; D]`. Everything in the rest of the
//! crate is three dimensional and uses the [`Box3`] alias.

use crate::error::{Error, Result};

/// Orthorhombic periodic box with one side length per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBox<const D: usize> {
    lengths: [f64; D],
}

pub type Box3 = PeriodicBox<3>;

impl<const D: usize> PeriodicBox<D> {
    pub fn new(lengths: [f64; D]) -> Result<Self> {
        if D == 0 {
            return Err(Error::InvalidArgument("box needs at least one dimension".into()));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "box lengths must be finite and positive, got {l}"
            )));
        }
        Ok(Self { lengths })
    }

    /// Box with every side equal to `length`.
    pub fn cubic(length: f64) -> Result<Self> {
        Self::new([length; D])
    }

    pub fn lengths(&self) -> [f64; D] {
        self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_cubic(&self) -> bool {
        self.lengths.iter().all(|&l| l == self.lengths[0])
    }

    /// True when every component lies in `[0, L_d)`.
    pub fn contains(&self, p: &[f64; D]) -> bool {
        p.iter()
            .zip(&self.lengths)
            .all(|(&x, &l)| (0.0..l).contains(&x))
    }

    /// Wrap one point into `[0, L_d)` per component. Input must be finite.
    #[inline]
    pub fn wrap_point(&self, p: &[f64; D]) -> [f64; D] {
        let mut out = *p;
        for (x, &l) in out.iter_mut().zip(&self.lengths) {
            *x = wrap_coordinate(*x, l);
        }
        out
    }

    /// Wrap all points into the box using a true floating-point modulo.
    pub fn wrap_within(&self, points: &[[f64; D]]) -> Result<Vec<[f64; D]>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.iter().all(|x| x.is_finite()) {
                    Ok(self.wrap_point(p))
                } else {
                    Err(Error::InvalidInput(format!("non-finite coordinate in point {i}")))
                }
            })
            .collect()
    }

    /// Shortest displacement from `a` to `b` across periodic images.
    ///
    /// Both points must already be wrapped. Components land in
    /// `(-L_d/2, L_d/2]`: an exact half-box separation resolves to `+L_d/2`.
    pub fn min_image(&self, a: &[f64; D], b: &[f64; D]) -> Result<[f64; D]> {
        self.check_wrapped(a)?;
        self.check_wrapped(b)?;
        Ok(self.min_image_unchecked(a, b))
    }

    /// [`Self::min_image`] without the wrapped-input check.
    #[inline]
    pub fn min_image_unchecked(&self, a: &[f64; D], b: &[f64; D]) -> [f64; D] {
        let mut dr = [0.0; D];
        for d in 0..D {
            dr[d] = min_image_component(b[d] - a[d], self.lengths[d]);
        }
        dr
    }

    pub fn distance(&self, a: &[f64; D], b: &[f64; D]) -> Result<f64> {
        Ok(norm(&self.min_image(a, b)?))
    }

    #[inline]
    pub fn distance_sq_unchecked(&self, a: &[f64; D], b: &[f64; D]) -> f64 {
        norm_sq(&self.min_image_unchecked(a, b))
    }

    fn check_wrapped(&self, p: &[f64; D]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "point {p:?} is not wrapped within box {:?}",
                self.lengths
            )))
        }
    }

    pub(crate) fn check_all_wrapped(&self, points: &[[f64; D]]) -> Result<()> {
        points.iter().try_for_each(|p| self.check_wrapped(p))
    }
}

/// `x mod l` in `[0, l)`.
#[inline]
pub fn wrap_coordinate(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // rem_euclid rounds tiny negative inputs up to exactly `l`
    if r >= l {
        0.0
    } else {
        r + 0.0
    }
}

#[inline]
fn min_image_component(dr: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    if dr > half {
        dr - l
    } else if dr <= -half {
        dr + l
    } else {
        dr
    }
}

#[inline]
pub fn norm_sq<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    norm_sq(v).sqrt()
}

/// Periodic k-nearest-neighbor graph.
///
/// Edges are grouped by source: the neighbors of node `i` occupy
/// `edges[i*k .. (i+1)*k]`, sorted by ascending distance with ties broken by
/// lower particle index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph<const D: usize> {
    k: usize,
    n_nodes: usize,
    targets: Vec<usize>,
    displacements: Vec<[f64; D]>,
}

impl<const D: usize> NeighborGraph<D> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    /// Destination index of every edge, source-major.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Minimum-image vector from source to destination, one per edge.
    pub fn displacements(&self) -> &[[f64; D]] {
        &self.displacements
    }

    #[inline]
    pub fn source(&self, edge: usize) -> usize {
        edge / self.k
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[node * self.k..(node + 1) * self.k]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.targets
            .iter()
            .enumerate()
            .map(move |(e, &j)| (e / self.k, j))
    }
}

/// Neighbor search strategy for [`knn_graph_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMethod {
    #[default]
    AllPairs,
    CellList,
}

/// Periodic k-NN graph by all-pairs search.
pub fn knn_graph<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    bbox: &PeriodicBox<D>,
) -> Result<NeighborGraph<D>> {
    knn_graph_with(points, k, bbox, KnnMethod::AllPairs)
}

pub fn knn_graph_with<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    bbox: &PeriodicBox<D>,
    method: KnnMethod,
) -> Result<NeighborGraph<D>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k-NN needs 1 <= k < N, got k = {k}, N = {n}"
        )));
    }
    bbox.check_all_wrapped(points)?;

    let mut targets = Vec::with_capacity(n * k);
    let mut displacements = Vec::with_capacity(n * k);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);

    let mut push_nearest = |i: usize, cand: &mut Vec<(f64, usize)>| {
        select_k_smallest(cand, k);
        for &(_, j) in &cand[..k] {
            targets.push(j);
            displacements.push(bbox.min_image_unchecked(&points[i], &points[j]));
        }
    };

    match method {
        KnnMethod::AllPairs => {
            for i in 0..n {
                scratch.clear();
                scratch.extend(
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (bbox.distance_sq_unchecked(&points[i], &points[j]), j)),
                );
                push_nearest(i, &mut scratch);
            }
        }
        KnnMethod::CellList => {
            // aim for a handful of particles per cell
            let density = n as f64 / bbox.volume();
            let cell = ((k as f64).max(4.0) / density).powf(1.0 / D as f64) * 0.5;
            let grid = CellGrid::build(points, bbox, cell);
            for i in 0..n {
                let home = grid.cell_coords_of(&points[i]);
                let mut ring = 1usize;
                loop {
                    scratch.clear();
                    let covers_all = grid.for_each_in_ring(&home, ring, |j| {
                        if j != i {
                            scratch.push((bbox.distance_sq_unchecked(&points[i], &points[j]), j));
                        }
                    });
                    if covers_all {
                        break;
                    }
                    if scratch.len() >= k {
                        select_k_smallest(&mut scratch, k);
                        let reach = ring as f64 * grid.min_cell_side();
                        if scratch[k - 1].0 < reach * reach {
                            break;
                        }
                    }
                    ring += 1;
                }
                push_nearest(i, &mut scratch);
            }
        }
    }

    Ok(NeighborGraph {
        k,
        n_nodes: n,
        targets,
        displacements,
    })
}

/// Order the first `k` entries ascending by (distance, index).
fn select_k_smallest(cand: &mut [(f64, usize)], k: usize) {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, cmp);
    }
    cand[..k].sort_unstable_by(cmp);
}

/// Uniform grid of cells over a periodic box; each cell lists the indices of
/// the points inside it in ascending order.
#[derive(Debug, Clone)]
pub struct CellGrid<const D: usize> {
    dims: [usize; D],
    sides: [f64; D],
    cells: Vec<Vec<usize>>,
}

impl<const D: usize> CellGrid<D> {
    /// Build a grid whose cells are at least `min_side` wide in every
    /// dimension. Points must be wrapped.
    pub fn build(points: &[[f64; D]], bbox: &PeriodicBox<D>, min_side: f64) -> Self {
        let lengths = bbox.lengths();
        let mut dims = [1usize; D];
        let mut sides = [0.0; D];
        for d in 0..D {
            dims[d] = ((lengths[d] / min_side).floor() as usize).max(1);
            sides[d] = lengths[d] / dims[d] as f64;
        }
        let total = dims.iter().product();
        let mut grid = Self {
            dims,
            sides,
            cells: vec![Vec::new(); total],
        };
        for (i, p) in points.iter().enumerate() {
            let c = grid.cell_coords_of(p);
            let idx = grid.flat(&c);
            grid.cells[idx].push(i);
        }
        grid
    }

    pub fn dims(&self) -> [usize; D] {
        self.dims
    }

    pub fn min_cell_side(&self) -> f64 {
        self.sides.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_coords_of(&self, p: &[f64; D]) -> [usize; D] {
        let mut c = [0usize; D];
        for d in 0..D {
            c[d] = ((p[d] / self.sides[d]) as usize).min(self.dims[d] - 1);
        }
        c
    }

    fn flat(&self, c: &[usize; D]) -> usize {
        c.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&ci, &n)| acc * n + ci)
    }

    /// Indices of the distinct cells within `ring` cells of `home` (periodic),
    /// in ascending flat order. The flag is true when every cell is included.
    pub fn cells_in_ring(&self, home: &[usize; D], ring: usize) -> (Vec<usize>, bool) {
        let covers_all = self.dims.iter().all(|&n| 2 * ring + 1 >= n);
        if covers_all {
            return ((0..self.cells.len()).collect(), true);
        }
        let span = 2 * ring + 1;
        let mut out = Vec::new();
        let mut offset = [0usize; D];
        loop {
            let mut c = [0usize; D];
            for d in 0..D {
                let n = self.dims[d] as isize;
                let shifted = home[d] as isize + offset[d] as isize - ring as isize;
                c[d] = shifted.rem_euclid(n) as usize;
            }
            out.push(self.flat(&c));
            // odometer increment
            let mut d = 0;
            loop {
                if d == D {
                    out.sort_unstable();
                    out.dedup();
                    return (out, false);
                }
                offset[d] += 1;
                if offset[d] < span {
                    break;
                }
                offset[d] = 0;
                d += 1;
            }
        }
    }

    /// Visit every point in the cells within `ring` of `home`. Returns true
    /// if the ring covered the whole grid.
    pub fn for_each_in_ring(
        &self,
        home: &[usize; D],
        ring: usize,
        mut visit: impl FnMut(usize),
    ) -> bool {
        let (cells, all) = self.cells_in_ring(home, ring);
        for c in cells {
            for &j in &self.cells[c] {
                visit(j);
            }
        }
        all
    }

    pub fn members(&self, flat_cell: usize) -> &[usize] {
        &self.cells[flat_cell]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }
}
