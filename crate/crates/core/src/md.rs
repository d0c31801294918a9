//! Small molecular dynamics engine for generating reference conformations:
//! cutoff-shifted pair forces, a Verlet neighbor list built from cells,
//! velocity-Verlet (NVE) and a Langevin (BAOAB) thermostat with a linear
//! annealing ramp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conformation::{Condition, Conformation, Provenance, Source};
use crate::error::{Error, Result};
use crate::geometry::{Box3, CellGrid};
use crate::potential::{OppParams, PotentialTable, DEFAULT_CUTOFF};

/// How the pair interaction is truncated at the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffMode {
    /// Energy shifted to zero at the cutoff; the force jumps there.
    #[default]
    Shift,
    /// Energy and force both brought to zero at the cutoff.
    ShiftedForce,
}

/// Pairs closer than this are treated as an overlap and abort the run.
pub const OVERLAP_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ForceMode {
    #[default]
    Analytic,
    /// Linear interpolation in a pair table, as LAMMPS `pair_style table linear`.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdConfig {
    pub n_particles: usize,
    pub number_density: f64,
    pub dt: f64,
    pub anneal_steps: u64,
    pub equil_steps: u64,
    pub target_temperature: f64,
    /// The anneal starts at `start_factor * |target_temperature|`.
    pub start_factor: f64,
    pub cutoff: f64,
    /// Langevin friction coefficient (1 / time).
    pub friction: f64,
    pub skin: f64,
    pub log_every: u64,
    pub force_mode: ForceMode,
    pub cutoff_mode: CutoffMode,
}

impl Default for MdConfig {
    fn default() -> Self {
        Self {
            n_particles: 216,
            number_density: 1.0,
            dt: 0.005,
            anneal_steps: 20_000,
            equil_steps: 20_000,
            target_temperature: 0.03,
            start_factor: 10.0,
            cutoff: DEFAULT_CUTOFF,
            // matches a damping time of 100 timesteps
            friction: 2.0,
            skin: 0.3,
            log_every: 100,
            force_mode: ForceMode::Analytic,
            cutoff_mode: CutoffMode::Shift,
        }
    }
}

impl MdConfig {
    pub fn box_length(&self) -> f64 {
        (self.n_particles as f64 / self.number_density).cbrt()
    }

    pub fn bbox(&self) -> Result<Box3> {
        Box3::cubic(self.box_length())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_particles < 2 {
            return bad(format!("need at least 2 particles, got {}", self.n_particles));
        }
        if !(self.number_density > 0.0 && self.number_density.is_finite()) {
            return bad(format!("number density must be positive, got {}", self.number_density));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return bad(format!("time step must be non-negative, got {}", self.dt));
        }
        if !(self.cutoff > OVERLAP_DISTANCE && self.cutoff <= 0.5 * self.box_length()) {
            return bad(format!(
                "cutoff {} must lie in ({OVERLAP_DISTANCE}, L/2 = {}]",
                self.cutoff,
                0.5 * self.box_length()
            ));
        }
        if !(self.target_temperature > 0.0 && self.start_factor > 0.0) {
            return bad("temperatures must be positive".into());
        }
        if self.friction < 0.0 || self.skin < 0.0 {
            return bad("friction and skin must be non-negative".into());
        }
        Ok(())
    }
}

/// Truncated pair interaction, zero beyond the cutoff.
#[derive(Debug, Clone)]
pub struct PairModel {
    params: OppParams,
    cutoff: f64,
    mode: CutoffMode,
    energy_at_cutoff: f64,
    force_at_cutoff: f64,
    table: Option<PotentialTable>,
}

impl PairModel {
    pub fn analytic(params: OppParams, cutoff: f64) -> Self {
        Self {
            params,
            cutoff,
            mode: CutoffMode::Shift,
            energy_at_cutoff: params.energy_unchecked(cutoff),
            force_at_cutoff: params.force_unchecked(cutoff),
            table: None,
        }
    }

    pub fn tabulated(params: OppParams, cutoff: f64, table: PotentialTable) -> Result<Self> {
        let (energy_at_cutoff, force_at_cutoff) = table.interpolate(cutoff).ok_or_else(|| {
            Error::InvalidArgument(format!("table does not reach the cutoff {cutoff}"))
        })?;
        Ok(Self {
            params,
            cutoff,
            mode: CutoffMode::Shift,
            energy_at_cutoff,
            force_at_cutoff,
            table: Some(table),
        })
    }

    pub fn with_cutoff_mode(mut self, mode: CutoffMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn params(&self) -> &OppParams {
        &self.params
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Shifted energy and scalar force at `r < cutoff`.
    #[inline]
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let (e, f) = match &self.table {
            None => (self.params.energy_unchecked(r), self.params.force_unchecked(r)),
            Some(t) => t.interpolate(r)?,
        };
        Some(match self.mode {
            CutoffMode::Shift => (e - self.energy_at_cutoff, f),
            CutoffMode::ShiftedForce => (
                e - self.energy_at_cutoff + (r - self.cutoff) * self.force_at_cutoff,
                f - self.force_at_cutoff,
            ),
        })
    }
}

/// Pair contribution shared by the naive and neighbor-list loops so both
/// accumulate identically.
#[inline]
fn accumulate_pair(
    i: usize,
    j: usize,
    positions: &[[f64; 3]],
    bbox: &Box3,
    model: &PairModel,
    rc_sq: f64,
    forces: &mut [[f64; 3]],
    energy: &mut f64,
) -> Result<()> {
    let dr = bbox.min_image_unchecked(&positions[i], &positions[j]);
    let r2 = dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2];
    if r2 >= rc_sq {
        return Ok(());
    }
    let r = r2.sqrt();
    if r < OVERLAP_DISTANCE {
        return Err(Error::Overlap { i, j, distance: r });
    }
    let (u, f) = model.eval(r).ok_or(Error::Overlap { i, j, distance: r })?;
    *energy += u;
    let s = f / r;
    for d in 0..3 {
        let fd = s * dr[d];
        forces[j][d] += fd;
        forces[i][d] -= fd;
    }
    Ok(())
}

/// Forces and potential energy by a plain double loop over `i < j`.
pub fn compute_forces(positions: &[[f64; 3]], bbox: &Box3, model: &PairModel) -> Result<(Vec<[f64; 3]>, f64)> {
    let mut forces = vec![[0.0; 3]; positions.len()];
    let mut energy = 0.0;
    let rc_sq = model.cutoff * model.cutoff;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            accumulate_pair(i, j, positions, bbox, model, rc_sq, &mut forces, &mut energy)?;
        }
    }
    Ok((forces, energy))
}

/// Verlet list of pairs `i < j` within `cutoff + skin`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct NeighborList {
    pairs: Vec<(u32, u32)>,
    reference: Vec<[f64; 3]>,
    skin: f64,
}

impl NeighborList {
    pub fn build(positions: &[[f64; 3]], bbox: &Box3, cutoff: f64, skin: f64) -> Self {
        let reach = cutoff + skin;
        let reach_sq = reach * reach;
        let grid = CellGrid::build(positions, bbox, reach);
        let mut pairs = Vec::new();
        for cell in 0..grid.n_cells() {
            let members = grid.members(cell);
            let Some(&first) = members.first() else {
                continue;
            };
            let home = grid.cell_coords_of(&positions[first]);
            let (neighbors, _) = grid.cells_in_ring(&home, 1);
            for &i in members {
                for &other in &neighbors {
                    for &j in grid.members(other) {
                        if i < j && bbox.distance_sq_unchecked(&positions[i], &positions[j]) < reach_sq {
                            pairs.push((i as u32, j as u32));
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        Self {
            pairs,
            reference: positions.to_vec(),
            skin,
        }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// True once any particle has moved more than half the skin.
    pub fn is_stale(&self, positions: &[[f64; 3]], bbox: &Box3) -> bool {
        let limit = 0.25 * self.skin * self.skin;
        positions.len() != self.reference.len()
            || positions
                .iter()
                .zip(&self.reference)
                .any(|(p, q)| bbox.distance_sq_unchecked(q, p) > limit)
    }
}

/// Pair model plus a lazily rebuilt neighbor list.
#[derive(Debug, Clone)]
pub struct ForceField {
    model: PairModel,
    skin: f64,
    list: Option<NeighborList>,
}

impl ForceField {
    pub fn new(model: PairModel, skin: f64) -> Self {
        Self {
            model,
            skin,
            list: None,
        }
    }

    pub fn model(&self) -> &PairModel {
        &self.model
    }

    /// Forces via the neighbor list; bit-identical to [`compute_forces`]
    /// because pairs are visited in the same order.
    pub fn compute(&mut self, positions: &[[f64; 3]], bbox: &Box3) -> Result<(Vec<[f64; 3]>, f64)> {
        let stale = match &self.list {
            Some(list) => list.is_stale(positions, bbox),
            None => true,
        };
        if stale {
            self.list = Some(NeighborList::build(positions, bbox, self.model.cutoff, self.skin));
        }
        let list = self.list.as_ref().expect("list built above");
        let mut forces = vec![[0.0; 3]; positions.len()];
        let mut energy = 0.0;
        let rc_sq = self.model.cutoff * self.model.cutoff;
        for &(i, j) in list.pairs() {
            accumulate_pair(i as usize, j as usize, positions, bbox, &self.model, rc_sq, &mut forces, &mut energy)?;
        }
        Ok((forces, energy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdState {
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub forces: Vec<[f64; 3]>,
    pub potential_energy: f64,
    pub kinetic_energy: f64,
    pub step: u64,
    pub bbox: Box3,
}

impl MdState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn total_energy(&self) -> f64 {
        self.potential_energy + self.kinetic_energy
    }

    /// Instantaneous temperature with the centre-of-mass degrees removed.
    pub fn temperature(&self) -> f64 {
        2.0 * self.kinetic_energy / (3.0 * self.n() as f64 - 3.0)
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for v in &self.velocities {
            for d in 0..3 {
                p[d] += v[d];
            }
        }
        p
    }

    fn refresh_kinetic(&mut self) {
        self.kinetic_energy = kinetic_energy(&self.velocities);
    }
}

fn kinetic_energy(velocities: &[[f64; 3]]) -> f64 {
    0.5 * velocities
        .iter()
        .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        .sum::<f64>()
}

/// Simple-cubic lattice at the configured density, jittered by
/// `uniform(-0.1, 0.1)` per coordinate, with Gaussian velocities at zero net
/// momentum rescaled exactly to the anneal start temperature.
///
/// When `n_particles` is not a perfect cube the smallest lattice holding it
/// is used and sites are taken at evenly spread indices.
pub fn init_state(config: &MdConfig, ff: &mut ForceField, rng: &mut impl Rng) -> Result<MdState> {
    config.validate()?;
    let n = config.n_particles;
    let bbox = config.bbox()?;
    let l = bbox.lengths()[0];
    let mut side = (n as f64).cbrt().round() as usize;
    if side.pow(3) < n {
        side += 1;
    }
    let sites = side.pow(3);
    let spacing = l / side as f64;
    let mut positions = Vec::with_capacity(n);
    for i in 0..n {
        let s = i * sites / n;
        let (a, b, c) = (s / (side * side), (s / side) % side, s % side);
        let p = [
            a as f64 * spacing + rng.gen_range(-0.1..0.1),
            b as f64 * spacing + rng.gen_range(-0.1..0.1),
            c as f64 * spacing + rng.gen_range(-0.1..0.1),
        ];
        positions.push(bbox.wrap_point(&p));
    }

    let mut velocities: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let mut mean = [0.0; 3];
    for v in &velocities {
        for d in 0..3 {
            mean[d] += v[d] / n as f64;
        }
    }
    for v in &mut velocities {
        for d in 0..3 {
            v[d] -= mean[d];
        }
    }
    let start_t = config.start_factor * config.target_temperature.abs();
    let current_t = 2.0 * kinetic_energy(&velocities) / (3.0 * n as f64 - 3.0);
    let scale = (start_t / current_t).sqrt();
    for v in &mut velocities {
        for x in v.iter_mut() {
            *x *= scale;
        }
    }

    let (forces, potential_energy) = ff.compute(&positions, &bbox)?;
    let mut state = MdState {
        positions,
        velocities,
        forces,
        potential_energy,
        kinetic_energy: 0.0,
        step: 0,
        bbox,
    };
    state.refresh_kinetic();
    Ok(state)
}

fn kick(state: &mut MdState, half_dt: f64) {
    for (v, f) in state.velocities.iter_mut().zip(&state.forces) {
        for d in 0..3 {
            v[d] += half_dt * f[d];
        }
    }
}

fn drift(state: &mut MdState, dt: f64) {
    let bbox = state.bbox;
    for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
        *x = bbox.wrap_point(&[x[0] + dt * v[0], x[1] + dt * v[1], x[2] + dt * v[2]]);
    }
}

fn refresh_forces(state: &mut MdState, ff: &mut ForceField) -> Result<()> {
    let (forces, pe) = ff.compute(&state.positions, &state.bbox)?;
    state.forces = forces;
    state.potential_energy = pe;
    Ok(())
}

/// One velocity-Verlet step (unit masses).
pub fn step_nve(state: &mut MdState, ff: &mut ForceField, dt: f64) -> Result<()> {
    kick(state, 0.5 * dt);
    drift(state, dt);
    refresh_forces(state, ff)?;
    kick(state, 0.5 * dt);
    state.refresh_kinetic();
    state.step += 1;
    Ok(())
}

/// One BAOAB Langevin step at `temperature`.
pub fn step_langevin(
    state: &mut MdState,
    ff: &mut ForceField,
    dt: f64,
    temperature: f64,
    friction: f64,
    rng: &mut impl Rng,
) -> Result<()> {
    kick(state, 0.5 * dt);
    drift(state, 0.5 * dt);
    let c1 = (-friction * dt).exp();
    let c2 = ((1.0 - c1 * c1) * temperature).sqrt();
    for v in &mut state.velocities {
        for x in v.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *x = c1 * *x + c2 * xi;
        }
    }
    drift(state, 0.5 * dt);
    refresh_forces(state, ff)?;
    kick(state, 0.5 * dt);
    state.refresh_kinetic();
    state.step += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoRecord {
    pub step: u64,
    pub temperature: f64,
    pub potential_energy: f64,
    pub kinetic_energy: f64,
    pub total_energy: f64,
}

impl ThermoRecord {
    fn of(state: &MdState) -> Self {
        Self {
            step: state.step,
            temperature: state.temperature(),
            potential_energy: state.potential_energy,
            kinetic_energy: state.kinetic_energy,
            total_energy: state.total_energy(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnealOutput {
    pub conformation: Conformation,
    pub log: Vec<ThermoRecord>,
    pub final_state: MdState,
}

pub fn force_field_for(config: &MdConfig, params: &OppParams) -> Result<ForceField> {
    let model = match config.force_mode {
        ForceMode::Analytic => PairModel::analytic(*params, config.cutoff),
        ForceMode::Table => {
            let table = crate::potential::tabulate(
                params,
                crate::potential::DEFAULT_TABLE_R_MIN,
                crate::potential::DEFAULT_TABLE_R_MAX.max(config.cutoff),
                crate::potential::DEFAULT_TABLE_POINTS,
            )?;
            PairModel::tabulated(*params, config.cutoff, table)?
        }
    };
    Ok(ForceField::new(model.with_cutoff_mode(config.cutoff_mode), config.skin))
}

/// Langevin anneal from `start_factor * T` down to `T` over `anneal_steps`
/// (linear ramp), then `equil_steps` at `T`. The final wrapped conformation
/// carries `(k, phi, T)`.
pub fn run_anneal(config: &MdConfig, params: &OppParams, seed: u64) -> Result<AnnealOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ff = force_field_for(config, params)?;
    let mut state = init_state(config, &mut ff, &mut rng)?;
    let mut log = vec![ThermoRecord::of(&state)];
    let t_target = config.target_temperature;
    let t_start = config.start_factor * t_target.abs();
    let total = config.anneal_steps + config.equil_steps;

    for s in 0..total {
        let temp = if s < config.anneal_steps {
            t_start + (t_target - t_start) * (s + 1) as f64 / config.anneal_steps as f64
        } else {
            t_target
        };
        let result = step_langevin(&mut state, &mut ff, config.dt, temp, config.friction, &mut rng);
        let failure = match result {
            Err(e) => Some(e.to_string()),
            Ok(()) if !state.total_energy().is_finite() => Some("non-finite energy".to_string()),
            Ok(()) => None,
        };
        if let Some(reason) = failure {
            return Err(Error::SimulationAborted {
                step: state.step,
                reason,
                log,
            });
        }
        if config.log_every > 0 && state.step % config.log_every == 0 {
            log.push(ThermoRecord::of(&state));
        }
    }

    let conformation = Conformation::new(
        state.positions.clone(),
        state.bbox,
        Some(Condition::new(params.k, params.phi, t_target)),
        Provenance::new(Source::ReferenceMd, Some(seed), state.step),
    )?;
    Ok(AnnealOutput {
        conformation,
        log,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::compute_rdf;

    fn small_config(n: usize) -> MdConfig {
        MdConfig {
            n_particles: n,
            cutoff: 0.5 * (n as f64).cbrt(),
            ..Default::default()
        }
    }

    #[test]
    fn init_state_contract() {
        let cfg = small_config(216);
        let params = OppParams::new(5.0, 1.0).unwrap();
        let mut ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = init_state(&cfg, &mut ff, &mut rng).unwrap();
        assert_eq!(state.n(), 216);
        assert!((cfg.box_length() / 6.0 - 1.0).abs() < 1e-12);
        let scale: f64 = state.velocities.iter().map(|v| v[0].abs() + v[1].abs() + v[2].abs()).sum();
        for p in state.momentum() {
            assert!(p.abs() < 1e-12 * scale);
        }
        let t0 = cfg.start_factor * cfg.target_temperature;
        assert!((state.temperature() - t0).abs() < 1e-6 * t0);
        for p in &state.positions {
            assert!(state.bbox.contains(p));
        }
        // padded lattice for a non-cube count
        let cfg = small_config(250);
        let mut ff = force_field_for(&cfg, &params).unwrap();
        assert_eq!(init_state(&cfg, &mut ff, &mut rng).unwrap().n(), 250);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config(64);
        cfg.cutoff = 2.5;
        assert!(cfg.validate().is_err());
        cfg.cutoff = 2.0;
        cfg.number_density = 0.0;
        assert!(cfg.validate().is_err());
        cfg.number_density = 1.0;
        cfg.n_particles = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn two_body_action_reaction() {
        let bbox = Box3::cubic(6.0).unwrap();
        let model = PairModel::analytic(OppParams::new(5.0, 1.0).unwrap(), 3.0);
        let (f, _) = compute_forces(&[[0.2, 0.0, 0.0], [5.1, 0.3, 0.1]], &bbox, &model).unwrap();
        for (a, b) in f[0].iter().zip(&f[1]) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn overlap_is_an_error() {
        let bbox = Box3::cubic(6.0).unwrap();
        let model = PairModel::analytic(OppParams::new(5.0, 1.0).unwrap(), 3.0);
        let err = compute_forces(&[[1.0, 1.0, 1.0], [1.3, 1.0, 1.0]], &bbox, &model).unwrap_err();
        assert!(matches!(err, Error::Overlap { i: 0, j: 1, .. }));
    }

    #[test]
    fn neighbor_list_forces_bit_identical() {
        let cfg = MdConfig { n_particles: 729, ..Default::default() };
        let params = OppParams::new(7.0, 2.0).unwrap();
        let mut ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let state = init_state(&cfg, &mut ff, &mut rng).unwrap();
        let (naive, e_naive) = compute_forces(&state.positions, &state.bbox, ff.model()).unwrap();
        let (listed, e_listed) = ff.compute(&state.positions, &state.bbox).unwrap();
        assert_eq!(naive, listed);
        assert_eq!(e_naive, e_listed);
        let mut net = [0.0; 3];
        let mut mag = 0.0;
        for f in &naive {
            for d in 0..3 {
                net[d] += f[d];
                mag += f[d].abs();
            }
        }
        assert!(net.iter().all(|x| x.abs() < 1e-10 * mag));
    }

    #[test]
    fn zero_dt_only_advances_step() {
        let cfg = small_config(64);
        let params = OppParams::new(5.0, 1.0).unwrap();
        let mut ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = init_state(&cfg, &mut ff, &mut rng).unwrap();
        let before = state.clone();
        step_nve(&mut state, &mut ff, 0.0).unwrap();
        assert_eq!(state.step, 1);
        assert_eq!(state.positions, before.positions);
        assert_eq!(state.velocities, before.velocities);
        assert_eq!(state.forces, before.forces);
    }

    #[test]
    fn nve_conserves_energy_with_shifted_force() {
        let cfg = MdConfig {
            n_particles: 64,
            cutoff: 2.0,
            target_temperature: 0.03,
            start_factor: 1.0,
            cutoff_mode: CutoffMode::ShiftedForce,
            ..Default::default()
        };
        let params = OppParams::new(5.0, 1.0).unwrap();
        let mut ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = init_state(&cfg, &mut ff, &mut rng).unwrap();
        for _ in 0..5000 {
            step_langevin(&mut state, &mut ff, cfg.dt, 0.03, cfg.friction, &mut rng).unwrap();
        }
        let e0 = state.total_energy();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            step_nve(&mut state, &mut ff, cfg.dt).unwrap();
            worst = worst.max((state.total_energy() - e0).abs());
        }
        assert!(worst / e0.abs() < 1e-4, "drift {}", worst / e0.abs());
    }

    #[test]
    fn shifted_force_vanishes_at_cutoff() {
        let params = OppParams::new(5.0, 1.0).unwrap();
        let model = PairModel::analytic(params, 2.5).with_cutoff_mode(CutoffMode::ShiftedForce);
        let (e, f) = model.eval(2.5 - 1e-9).unwrap();
        assert!(e.abs() < 1e-8 && f.abs() < 1e-8);
        let plain = PairModel::analytic(params, 2.5);
        let (e, f) = plain.eval(2.5 - 1e-9).unwrap();
        assert!(e.abs() < 1e-8);
        assert!(f.abs() > 1e-3);
    }

    #[test]
    fn short_run_is_time_reversible() {
        let cfg = MdConfig {
            target_temperature: 0.05,
            ..small_config(64)
        };
        let params = OppParams::new(5.0, 1.0).unwrap();
        let mut ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut state = init_state(&cfg, &mut ff, &mut rng).unwrap();
        let start = state.positions.clone();
        for _ in 0..10 {
            step_nve(&mut state, &mut ff, cfg.dt).unwrap();
        }
        for v in &mut state.velocities {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        for _ in 0..10 {
            step_nve(&mut state, &mut ff, cfg.dt).unwrap();
        }
        for (a, b) in start.iter().zip(&state.positions) {
            assert!(state.bbox.distance(a, b).unwrap() < 1e-8);
        }
    }

    #[test]
    fn anneal_is_deterministic_and_tagged() {
        let cfg = MdConfig {
            anneal_steps: 300,
            equil_steps: 200,
            ..small_config(64)
        };
        let params = OppParams::new(5.0, 1.0).unwrap();
        let a = run_anneal(&cfg, &params, 9).unwrap();
        let b = run_anneal(&cfg, &params, 9).unwrap();
        assert_eq!(a.conformation, b.conformation);
        assert_eq!(a.log.len(), 6);
        assert_eq!(a.log[5].step, 500);
        let c = a.conformation.condition.unwrap();
        assert_eq!((c.k, c.phi, c.temperature), (5.0, 1.0, cfg.target_temperature));
    }

    #[test]
    fn anneal_thermalizes_and_keeps_core_empty() {
        let cfg = MdConfig {
            n_particles: 512,
            anneal_steps: 4000,
            equil_steps: 8000,
            target_temperature: 0.05,
            ..Default::default()
        };
        let params = OppParams::new(3.0, 0.5).unwrap();
        let out = run_anneal(&cfg, &params, 3).unwrap();
        let equil: Vec<_> = out.log.iter().filter(|r| r.step > cfg.anneal_steps).collect();
        let tail = &equil[equil.len() * 3 / 4..];
        let mean_t = tail.iter().map(|r| r.temperature).sum::<f64>() / tail.len() as f64;
        assert!((mean_t / cfg.target_temperature - 1.0).abs() < 0.1, "mean T {mean_t}");
        let g = compute_rdf(&out.conformation, 100).unwrap();
        assert!(g.values[..10].iter().all(|&v| v == 0.0), "pairs inside the core");
    }

    #[test]
    fn table_mode_tracks_analytic_forces() {
        let cfg = MdConfig {
            force_mode: ForceMode::Table,
            ..small_config(216)
        };
        let params = OppParams::new(5.0, 1.0).unwrap();
        let mut table_ff = force_field_for(&cfg, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = init_state(&cfg, &mut table_ff, &mut rng).unwrap();
        let analytic = PairModel::analytic(params, cfg.cutoff);
        let (fa, ea) = compute_forces(&state.positions, &state.bbox, &analytic).unwrap();
        let (ft, et) = table_ff.compute(&state.positions, &state.bbox).unwrap();
        assert!((ea - et).abs() < 1e-2 * ea.abs().max(1.0));
        for (a, t) in fa.iter().zip(&ft) {
            for d in 0..3 {
                assert!((a[d] - t[d]).abs() < 0.05 * a[d].abs().max(1.0));
            }
        }
    }
}
