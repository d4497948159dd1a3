//! 2D binary inverse-power-law molecular dynamics.
//!
//! A 70:30 mixture of two particle sizes interacting through a steep repulsive
//! power law, integrated with a leapfrog scheme, optionally coupled to a
//! Langevin heat bath. Forces are evaluated through cell-backed neighbor lists
//! so cost scales linearly in particle count, with an all-pairs fallback for
//! boxes too small to hold three cells per axis. Observables cover energy and
//! momentum bookkeeping, kinetic temperature, mean squared displacement,
//! per-particle displacement fields, and the density-scaling reduction
//! Γ = ρ^{n/d}/T that collapses state points onto a master curve.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;
use crate::parallel;
use crate::rng::RngStream;
use crate::series::TimeSeries;

/// Spatial dimension. The engine is two-dimensional throughout.
pub const DIMENSION: usize = 2;

/// Inverse-power-law exponent n in u(x) = x^{-n} - x_c^{-n}.
pub const IPL_EXPONENT: i32 = 18;

/// Cutoff in reduced pair distance x = r/(σ·σ_ij); u and the force vanish beyond it.
pub const REDUCED_CUTOFF: f64 = 1.5;

/// Default neighbor-list skin in units of σ.
pub const DEFAULT_SKIN: f64 = 0.3;

/// Displacement magnitude (units of σ) above which a particle counts as mobile.
pub const MOBILITY_THRESHOLD: f64 = 0.5;

const MIN_CELLS_PER_AXIS: usize = 3;

/// Particle species tag. A is the larger majority species.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::A => "A",
            Species::B => "B",
        })
    }
}

impl FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Species::A),
            "B" => Ok(Species::B),
            other => Err(Error::validation(format!("unknown species tag {other:?}"))),
        }
    }
}

/// Pair potential: u(x) = ε·(x^{-18} - 1.5^{-18}) for reduced distance x < 1.5.
///
/// The potential is shifted to zero at the cutoff; the force is truncated
/// there and keeps a small discontinuity (~18·1.5^{-19} ε/σ), which is left
/// in place deliberately rather than smoothed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSpec {
    /// Energy unit ε.
    pub epsilon: f64,
    /// Length unit σ.
    pub sigma: f64,
    pub sigma_aa: f64,
    pub sigma_ab: f64,
    pub sigma_bb: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec { epsilon: 1.0, sigma: 1.0, sigma_aa: 1.1, sigma_ab: 0.9, sigma_bb: 0.9 }
    }
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("sigma", self.sigma),
            ("sigma_aa", self.sigma_aa),
            ("sigma_ab", self.sigma_ab),
            ("sigma_bb", self.sigma_bb),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Dimensionless pair diameter σ_ij for a species pair.
    pub fn pair_diameter(&self, a: Species, b: Species) -> f64 {
        match (a, b) {
            (Species::A, Species::A) => self.sigma_aa,
            (Species::B, Species::B) => self.sigma_bb,
            _ => self.sigma_ab,
        }
    }

    /// Largest absolute interaction range, 1.5·σ·max σ_ij.
    pub fn max_range(&self) -> f64 {
        REDUCED_CUTOFF * self.sigma * self.sigma_aa.max(self.sigma_ab).max(self.sigma_bb)
    }

    fn tables(&self) -> PairTables {
        let shift = REDUCED_CUTOFF.powi(-IPL_EXPONENT);
        let mut sigma2 = [0.0; 3];
        let mut rc2 = [0.0; 3];
        for (k, s) in [self.sigma_aa, self.sigma_ab, self.sigma_bb].into_iter().enumerate() {
            let abs = self.sigma * s;
            sigma2[k] = abs * abs;
            rc2[k] = (REDUCED_CUTOFF * abs) * (REDUCED_CUTOFF * abs);
        }
        PairTables { epsilon: self.epsilon, shift, sigma2, rc2 }
    }
}

/// Precomputed squared diameters and cutoffs indexed by `a as usize + b as usize`
/// (AA=0, AB/BA=1, BB=2), so the force kernel never branches on species pairs.
#[derive(Clone, Copy)]
struct PairTables {
    epsilon: f64,
    shift: f64,
    sigma2: [f64; 3],
    rc2: [f64; 3],
}

/// Shifted pair energy at reduced distance `x`.
pub fn pair_energy(x: f64, spec: &PotentialSpec) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::validation(format!("pair overlap: reduced distance {x} must be > 0")));
    }
    if x >= REDUCED_CUTOFF {
        return Ok(0.0);
    }
    Ok(spec.epsilon * (x.powi(-IPL_EXPONENT) - REDUCED_CUTOFF.powi(-IPL_EXPONENT)))
}

/// Repulsive force magnitude along the separation, 18·ε·x^{-19}/(σ·σ_ij) inside the cutoff.
pub fn pair_force_magnitude(x: f64, sigma_ij: f64, spec: &PotentialSpec) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::validation(format!("pair overlap: reduced distance {x} must be > 0")));
    }
    if x >= REDUCED_CUTOFF {
        return Ok(0.0);
    }
    Ok(IPL_EXPONENT as f64 * spec.epsilon * x.powi(-(IPL_EXPONENT + 1)) / (spec.sigma * sigma_ij))
}

/// Full particle state: wrapped and unwrapped positions, half-step velocities,
/// and the most recent on-step velocity estimate used for diagnostics.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub species: Vec<Species>,
    /// Positions wrapped into [0, L)².
    pub pos: Vec<[f64; 2]>,
    /// Positions accumulated without wrapping, for displacement observables.
    pub unwrapped: Vec<[f64; 2]>,
    /// Leapfrog state: velocities at t - dt/2.
    pub vel_half: Vec<[f64; 2]>,
    /// v(t) ≈ (v(t-dt/2) + v(t+dt/2))/2, refreshed by each step; equals
    /// `vel_half` for configurations that have not stepped yet.
    pub on_step_vel: Vec<[f64; 2]>,
    pub box_len: f64,
    pub mass: f64,
    pub time: f64,
}

impl Configuration {
    pub fn n(&self) -> usize {
        self.pos.len()
    }

    /// Degrees of freedom dN - d (total momentum is conserved/zeroed).
    pub fn dof(&self) -> usize {
        DIMENSION * self.n() - DIMENSION
    }

    /// Total momentum from on-step velocities.
    pub fn momentum(&self) -> [f64; 2] {
        let mut p = [0.0; 2];
        for v in &self.on_step_vel {
            p[0] += self.mass * v[0];
            p[1] += self.mass * v[1];
        }
        p
    }
}

/// Instantaneous kinetic temperature Σ m|v|²/N_f from on-step velocities.
pub fn kinetic_temperature(config: &Configuration) -> f64 {
    let sum: f64 = config.on_step_vel.iter().map(|v| config.mass * (v[0] * v[0] + v[1] * v[1])).sum();
    sum / config.dof() as f64
}

/// Place `n` particles on a square lattice at number density `density`,
/// assign species A to a `fraction_a` share (shuffled), and draw
/// Maxwell-Boltzmann half-step velocities at `t_init` with the total momentum
/// removed.
pub fn init_configuration(
    n: usize,
    fraction_a: f64,
    density: f64,
    t_init: f64,
    mass: f64,
    pot: &PotentialSpec,
    rng: &mut RngStream,
) -> Result<Configuration> {
    pot.validate()?;
    if n < 2 {
        return Err(Error::validation("need at least 2 particles"));
    }
    let cols = (n as f64).sqrt().round() as usize;
    if cols * cols != n {
        return Err(Error::validation(format!("particle count {n} is not a perfect square")));
    }
    if !(fraction_a > 0.0 && fraction_a < 1.0) {
        return Err(Error::validation(format!("fraction_a must lie in (0,1), got {fraction_a}")));
    }
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::validation(format!("density must be positive, got {density}")));
    }
    if !(t_init >= 0.0) || !(mass > 0.0) {
        return Err(Error::validation("t_init must be >= 0 and mass > 0"));
    }

    let box_len = (n as f64 / density).sqrt();
    let spacing = box_len / cols as f64;
    if spacing < 0.5 * self_bb(pot) {
        return Err(Error::validation(format!(
            "density {density} packs lattice spacing {spacing:.4} below half the smallest diameter"
        )));
    }

    let n_a = (fraction_a * n as f64).round() as usize;
    let mut species = vec![Species::A; n];
    for tag in species.iter_mut().skip(n_a) {
        *tag = Species::B;
    }
    rng.shuffle(&mut species);

    let mut pos = Vec::with_capacity(n);
    for j in 0..cols {
        for i in 0..cols {
            pos.push([(i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing]);
        }
    }

    let mut vel = vec![[0.0; 2]; n];
    if t_init > 0.0 {
        let scale = (t_init / mass).sqrt();
        for v in vel.iter_mut() {
            v[0] = scale * rng.gaussian();
            v[1] = scale * rng.gaussian();
        }
        let mut mean = [0.0; 2];
        for v in &vel {
            mean[0] += v[0];
            mean[1] += v[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for v in vel.iter_mut() {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
    }

    Ok(Configuration {
        species,
        unwrapped: pos.clone(),
        on_step_vel: vel.clone(),
        vel_half: vel,
        pos,
        box_len,
        mass,
        time: 0.0,
    })
}

fn self_bb(pot: &PotentialSpec) -> f64 {
    pot.sigma * pot.sigma_aa.min(pot.sigma_ab).min(pot.sigma_bb)
}

/// Candidate-neighbor lists with a verlet skin. Lists are full (each pair
/// appears in both particles' lists) so force evaluation can gather
/// per particle with no write contention, and each list is sorted by index so
/// the accumulation order is fixed regardless of how cells were scanned.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    lists: Vec<Vec<u32>>,
    pos_at_build: Vec<[f64; 2]>,
    skin: f64,
    all_pairs: bool,
}

/// Build cell-bucketed neighbor lists with the given skin. Boxes smaller than
/// three cells per axis fall back to exhaustive lists, which never go stale.
pub fn build_cells_and_neighbors(
    config: &Configuration,
    pot: &PotentialSpec,
    skin: f64,
) -> Result<NeighborTable> {
    pot.validate()?;
    if !(skin >= 0.0) {
        return Err(Error::validation(format!("skin must be >= 0, got {skin}")));
    }
    let n = config.n();
    let l = config.box_len;
    let list_cut = pot.max_range() + skin;
    let list_cut2 = list_cut * list_cut;
    // more than ~√n cells per axis just multiplies empty buckets
    let cell_cap = ((n as f64).sqrt().ceil() as usize).max(MIN_CELLS_PER_AXIS);
    let cells = ((l / list_cut).floor() as usize).min(cell_cap);

    let mut lists = vec![Vec::new(); n];
    let all_pairs = cells < MIN_CELLS_PER_AXIS;
    if all_pairs {
        for i in 0..n {
            for j in 0..n {
                if j != i {
                    lists[i].push(j as u32);
                }
            }
        }
    } else {
        let cell_len = l / cells as f64;
        let cell_of = |p: [f64; 2]| {
            let cx = ((p[0] / cell_len) as usize).min(cells - 1);
            let cy = ((p[1] / cell_len) as usize).min(cells - 1);
            cy * cells + cx
        };
        let mut buckets = vec![Vec::new(); cells * cells];
        for (i, p) in config.pos.iter().enumerate() {
            buckets[cell_of(*p)].push(i as u32);
        }
        for i in 0..n {
            let p = config.pos[i];
            let cx = ((p[0] / cell_len) as usize).min(cells - 1) as isize;
            let cy = ((p[1] / cell_len) as usize).min(cells - 1) as isize;
            let m = cells as isize;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let bx = (cx + dx).rem_euclid(m) as usize;
                    let by = (cy + dy).rem_euclid(m) as usize;
                    for &j in &buckets[by * cells + bx] {
                        if j as usize == i {
                            continue;
                        }
                        let q = config.pos[j as usize];
                        let dx = min_image(p[0] - q[0], l);
                        let dy = min_image(p[1] - q[1], l);
                        if dx * dx + dy * dy <= list_cut2 {
                            lists[i].push(j);
                        }
                    }
                }
            }
            lists[i].sort_unstable();
        }
    }

    Ok(NeighborTable { lists, pos_at_build: config.unwrapped.clone(), skin, all_pairs })
}

impl NeighborTable {
    /// True once any particle has drifted more than skin/2 since the build.
    pub fn needs_rebuild(&self, config: &Configuration) -> bool {
        if self.all_pairs {
            return false;
        }
        let limit = 0.25 * self.skin * self.skin;
        config
            .unwrapped
            .iter()
            .zip(&self.pos_at_build)
            .any(|(u, b)| {
                let dx = u[0] - b[0];
                let dy = u[1] - b[1];
                dx * dx + dy * dy > limit
            })
    }

    pub fn rebuild(&mut self, config: &Configuration, pot: &PotentialSpec) -> Result<()> {
        *self = build_cells_and_neighbors(config, pot, self.skin)?;
        Ok(())
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.lists[i]
    }
}

fn min_image(mut d: f64, l: f64) -> f64 {
    d -= l * (d / l).round();
    d
}

/// Forces and total shifted potential energy at the current positions.
#[derive(Clone, Debug)]
pub struct ForceEval {
    pub force: Vec<[f64; 2]>,
    pub potential: f64,
}

/// Gather-based force evaluation. Every particle accumulates over its own
/// sorted neighbor list, so each pair is computed twice with mirrored
/// arithmetic and the result is independent of thread count. Per-particle
/// energies carry the half factor and are summed in index order.
pub fn compute_forces(
    config: &Configuration,
    pot: &PotentialSpec,
    table: &NeighborTable,
) -> Result<ForceEval> {
    let t = pot.tables();
    let n = config.n();
    let l = config.box_len;
    let pos = &config.pos;
    let species = &config.species;
    let lists = &table.lists;

    let per_particle = parallel::map_indexed(n, move |i| {
        let pi = pos[i];
        let si = species[i] as usize;
        let mut fx = 0.0;
        let mut fy = 0.0;
        let mut half_u = 0.0;
        for &j in &lists[i] {
            let j = j as usize;
            let dx = min_image(pi[0] - pos[j][0], l);
            let dy = min_image(pi[1] - pos[j][1], l);
            let r2 = dx * dx + dy * dy;
            let k = si + species[j] as usize;
            if r2 >= t.rc2[k] {
                continue;
            }
            let q = t.sigma2[k] / r2;
            let q9 = q.powi(IPL_EXPONENT / 2);
            half_u += 0.5 * t.epsilon * (q9 - t.shift);
            let coef = IPL_EXPONENT as f64 * t.epsilon * q9 / r2;
            fx += coef * dx;
            fy += coef * dy;
        }
        ([fx, fy], half_u)
    });

    let mut force = Vec::with_capacity(n);
    let mut potential = 0.0;
    for (f, e) in per_particle {
        force.push(f);
        potential += e;
    }
    if !potential.is_finite() {
        return Err(Error::Blowup {
            where_: "compute_forces".into(),
            detail: "non-finite potential energy; particles have overlapped".into(),
        });
    }
    Ok(ForceEval { force, potential })
}

/// Per-step diagnostics, all referring to the step's starting time.
#[derive(Clone, Copy, Debug)]
pub struct StepDiag {
    pub kinetic_t: f64,
    pub kinetic_energy: f64,
    pub potential: f64,
    pub momentum: [f64; 2],
}

/// One NVE kick-drift step: v ← v + dt·F/m, r ← r + dt·v.
pub fn leapfrog_step(
    config: &mut Configuration,
    pot: &PotentialSpec,
    table: &mut NeighborTable,
    dt: f64,
) -> Result<StepDiag> {
    step_inner(config, pot, table, dt, None, None)
}

/// Leapfrog step with the bath force -γ·v + √(2γ·k_B·T/dt)·ξ added per
/// component before the kick. Noise is drawn sequentially in particle order,
/// so trajectories are reproducible for a fixed stream.
pub fn langevin_step(
    config: &mut Configuration,
    pot: &PotentialSpec,
    table: &mut NeighborTable,
    dt: f64,
    t_target: f64,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<StepDiag> {
    if !(gamma > 0.0) || !(t_target > 0.0) {
        return Err(Error::validation(format!(
            "langevin requires gamma > 0 and t_target > 0, got {gamma}, {t_target}"
        )));
    }
    step_inner(config, pot, table, dt, Some((t_target, gamma)), Some(rng))
}

fn step_inner(
    config: &mut Configuration,
    pot: &PotentialSpec,
    table: &mut NeighborTable,
    dt: f64,
    thermo: Option<(f64, f64)>,
    mut rng: Option<&mut RngStream>,
) -> Result<StepDiag> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    if table.needs_rebuild(config) {
        table.rebuild(config, pot)?;
    }
    let eval = compute_forces(config, pot, table)?;

    let n = config.n();
    let m = config.mass;
    let l = config.box_len;
    // a particle crossing half the interaction range in one step has left the
    // regime the neighbor skin can guarantee
    let max_step2 = (0.5 * pot.max_range()).powi(2);
    let mut ke = 0.0;
    let mut p = [0.0; 2];

    for i in 0..n {
        let mut f = eval.force[i];
        if let Some((t_target, gamma)) = thermo {
            let rng = rng.as_deref_mut().expect("thermostat needs an rng");
            let amp = (2.0 * gamma * t_target / dt).sqrt();
            f[0] += -gamma * config.vel_half[i][0] + amp * rng.gaussian();
            f[1] += -gamma * config.vel_half[i][1] + amp * rng.gaussian();
        }
        let v_old = config.vel_half[i];
        let v_new = [v_old[0] + dt * f[0] / m, v_old[1] + dt * f[1] / m];
        let step2 = (dt * v_new[0]).powi(2) + (dt * v_new[1]).powi(2);
        if !step2.is_finite() || step2 > max_step2 {
            return Err(Error::Blowup {
                where_: "leapfrog_step".into(),
                detail: format!(
                    "particle {i} moved {:.3e} in one step at t={:.6}",
                    step2.sqrt(),
                    config.time
                ),
            });
        }
        let v_bar = [0.5 * (v_old[0] + v_new[0]), 0.5 * (v_old[1] + v_new[1])];
        ke += 0.5 * m * (v_bar[0] * v_bar[0] + v_bar[1] * v_bar[1]);
        p[0] += m * v_bar[0];
        p[1] += m * v_bar[1];

        config.vel_half[i] = v_new;
        config.on_step_vel[i] = v_bar;
        config.unwrapped[i][0] += dt * v_new[0];
        config.unwrapped[i][1] += dt * v_new[1];
        config.pos[i][0] = (config.pos[i][0] + dt * v_new[0]).rem_euclid(l);
        config.pos[i][1] = (config.pos[i][1] + dt * v_new[1]).rem_euclid(l);
    }
    config.time += dt;

    Ok(StepDiag {
        kinetic_t: 2.0 * ke / config.dof() as f64,
        kinetic_energy: ke,
        potential: eval.potential,
        momentum: p,
    })
}

/// Extra kick with the current forces followed by velocity negation, turning
/// the stored half-step state into the start of the time-reversed trajectory.
/// Only meaningful for NVE dynamics.
pub fn reverse_velocities(config: &mut Configuration, pot: &PotentialSpec, dt: f64) -> Result<()> {
    let table = build_cells_and_neighbors(config, pot, DEFAULT_SKIN)?;
    let eval = compute_forces(config, pot, &table)?;
    let m = config.mass;
    for i in 0..config.n() {
        let v = config.vel_half[i];
        let f = eval.force[i];
        config.vel_half[i] = [-(v[0] + dt * f[0] / m), -(v[1] + dt * f[1] / m)];
        config.on_step_vel[i] = config.vel_half[i];
    }
    Ok(())
}

/// Ensemble choice for a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    Nve,
    Langevin { t_target: f64, gamma: f64 },
}

/// When trajectory samples are recorded, expressed in step indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSchedule {
    None,
    /// Every `every` steps, starting at step 0.
    Linear { every: usize },
    /// Approximately `per_decade` geometrically spaced indices per decade,
    /// always including step 0 and the final step.
    Log { per_decade: usize },
}

/// Full description of one trajectory segment.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub ensemble: Ensemble,
    pub dt: f64,
    pub steps: usize,
    pub schedule: SampleSchedule,
    /// Stride for the energy/temperature diagnostics rows.
    pub diag_every: usize,
    /// Seed of the thermostat noise stream (unused for NVE).
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            ensemble: Ensemble::Nve,
            dt: 0.002,
            steps: 1000,
            schedule: SampleSchedule::None,
            diag_every: 1,
            seed: 0,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::validation("steps must be >= 1"));
        }
        if self.diag_every == 0 {
            return Err(Error::validation("diag_every must be >= 1"));
        }
        match self.schedule {
            SampleSchedule::Linear { every } if every == 0 => {
                Err(Error::validation("schedule stride must be >= 1"))
            }
            SampleSchedule::Log { per_decade } if per_decade == 0 => {
                Err(Error::validation("per_decade must be >= 1"))
            }
            _ => Ok(()),
        }?;
        if let Ensemble::Langevin { t_target, gamma } = self.ensemble {
            if !(t_target > 0.0) || !(gamma > 0.0) {
                return Err(Error::validation(format!(
                    "langevin requires t_target > 0 and gamma > 0, got {t_target}, {gamma}"
                )));
            }
        }
        Ok(())
    }
}

/// Step indices at which trajectory samples are recorded, sorted ascending.
pub fn schedule_indices(schedule: &SampleSchedule, steps: usize) -> Vec<usize> {
    match *schedule {
        SampleSchedule::None => Vec::new(),
        SampleSchedule::Linear { every } => (0..=steps).step_by(every.max(1)).collect(),
        SampleSchedule::Log { per_decade } => {
            let mut out = vec![0, steps];
            let mut j = 0u32;
            loop {
                let k = 10f64.powf(j as f64 / per_decade as f64).round() as usize;
                if k > steps {
                    break;
                }
                out.push(k);
                j += 1;
            }
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

/// Unwrapped positions frozen at one instant of a run.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub time: f64,
    pub unwrapped: Vec<[f64; 2]>,
}

/// Diagnostics column order in [`MdRun::diagnostics`].
pub const DIAG_KIN_T: usize = 0;
pub const DIAG_POTENTIAL: usize = 1;
pub const DIAG_TOTAL_E: usize = 2;
pub const DIAG_PX: usize = 3;
pub const DIAG_PY: usize = 4;

/// Output of [`run_md`]: diagnostics rows [T_kin, U, E, px, py] on the
/// `diag_every` grid plus any scheduled trajectory samples.
#[derive(Clone, Debug)]
pub struct MdRun {
    pub diagnostics: TimeSeries,
    pub samples: Vec<TrajectorySample>,
}

/// Advance `config` by `spec.steps` steps, recording diagnostics and samples.
/// The neighbor table is rebuilt automatically whenever the skin criterion
/// trips. Sample times refer to the state before the step at that index; the
/// final state is sampled when the schedule includes the last step.
pub fn run_md(config: &mut Configuration, pot: &PotentialSpec, spec: &RunSpec) -> Result<MdRun> {
    run_md_with_progress(config, pot, spec, None)
}

/// [`run_md`] with a hook invoked every 10^4 completed steps (and passed the
/// step count), so long runs can report liveness without the engine knowing
/// where the report goes.
pub fn run_md_with_progress(
    config: &mut Configuration,
    pot: &PotentialSpec,
    spec: &RunSpec,
    mut progress: Option<&mut dyn FnMut(usize)>,
) -> Result<MdRun> {
    spec.validate()?;
    let mut table = build_cells_and_neighbors(config, pot, DEFAULT_SKIN)?;
    let mut rng = RngStream::new(spec.seed);
    let sched = schedule_indices(&spec.schedule, spec.steps);
    let mut next_sample = 0usize;

    let mut diagnostics = TimeSeries::with_capacity(5, spec.steps / spec.diag_every + 1);
    let mut samples = Vec::with_capacity(sched.len());

    for k in 0..spec.steps {
        if k > 0 && k % 10_000 == 0 {
            if let Some(hook) = progress.as_mut() {
                hook(k);
            }
        }
        if next_sample < sched.len() && sched[next_sample] == k {
            samples.push(TrajectorySample { time: config.time, unwrapped: config.unwrapped.clone() });
            next_sample += 1;
        }
        let t_before = config.time;
        let diag = match spec.ensemble {
            Ensemble::Nve => leapfrog_step(config, pot, &mut table, spec.dt)?,
            Ensemble::Langevin { t_target, gamma } => {
                langevin_step(config, pot, &mut table, spec.dt, t_target, gamma, &mut rng)?
            }
        };
        if k % spec.diag_every == 0 {
            diagnostics.push(
                t_before,
                &[
                    diag.kinetic_t,
                    diag.potential,
                    diag.kinetic_energy + diag.potential,
                    diag.momentum[0],
                    diag.momentum[1],
                ],
            )?;
        }
    }
    if next_sample < sched.len() && sched[next_sample] == spec.steps {
        samples.push(TrajectorySample { time: config.time, unwrapped: config.unwrapped.clone() });
    }

    Ok(MdRun { diagnostics, samples })
}

/// MSD column order in the series returned by [`msd`].
pub const MSD_TOTAL: usize = 0;
pub const MSD_A: usize = 1;
pub const MSD_B: usize = 2;

/// Mean squared displacement vs lag time, total and per species.
///
/// Displacements are taken in the center-of-mass frame: whatever net momentum
/// the thermostat left behind would otherwise show up as ballistic (NVE) or
/// diffusive (Langevin) motion of the whole box, and at a few hundred
/// particles that artifact is the same size as a caging plateau.
///
/// With `multi_origin` false the lag is measured from the first sample, which
/// pairs naturally with a log-spaced schedule. With it true every sample acts
/// as an origin (uniform spacing required), trading schedule flexibility for
/// much lower noise.
pub fn msd(
    samples: &[TrajectorySample],
    species: &[Species],
    multi_origin: bool,
) -> Result<TimeSeries> {
    if samples.len() < 2 {
        return Err(Error::validation("msd needs at least 2 trajectory samples"));
    }
    let n = species.len();
    if n == 0 || samples.iter().any(|s| s.unwrapped.len() != n) {
        return Err(Error::validation("sample width does not match species list"));
    }
    let n_a = species.iter().filter(|s| **s == Species::A).count();
    let n_b = n - n_a;

    let mut out = TimeSeries::with_capacity(3, samples.len());
    let sq = |a: &[[f64; 2]], b: &[[f64; 2]], sums: &mut [f64; 3]| {
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            cx += a[i][0] - b[i][0];
            cy += a[i][1] - b[i][1];
        }
        cx /= n as f64;
        cy /= n as f64;
        for i in 0..n {
            let dx = a[i][0] - b[i][0] - cx;
            let dy = a[i][1] - b[i][1] - cy;
            let d2 = dx * dx + dy * dy;
            sums[0] += d2;
            match species[i] {
                Species::A => sums[1] += d2,
                Species::B => sums[2] += d2,
            }
        }
    };
    let finish = |sums: [f64; 3], count: f64| {
        [
            sums[0] / (count * n as f64),
            if n_a > 0 { sums[1] / (count * n_a as f64) } else { 0.0 },
            if n_b > 0 { sums[2] / (count * n_b as f64) } else { 0.0 },
        ]
    };

    if multi_origin {
        let step = samples[1].time - samples[0].time;
        for w in samples.windows(2) {
            if ((w[1].time - w[0].time) - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(Error::validation(
                    "multi-origin msd requires uniformly spaced samples",
                ));
            }
        }
        out.push(0.0, &[0.0; 3])?;
        for lag in 1..samples.len() {
            let origins = samples.len() - lag;
            // cap the per-lag work; decimating origins keeps the estimate unbiased
            let stride = origins.div_ceil(256);
            let mut sums = [0.0; 3];
            let mut count = 0.0;
            for o in (0..origins).step_by(stride) {
                sq(&samples[o + lag].unwrapped, &samples[o].unwrapped, &mut sums);
                count += 1.0;
            }
            out.push(lag as f64 * step, &finish(sums, count))?;
        }
    } else {
        out.push(0.0, &[0.0; 3])?;
        for s in &samples[1..] {
            let mut sums = [0.0; 3];
            sq(&s.unwrapped, &samples[0].unwrapped, &mut sums);
            out.push(s.time - samples[0].time, &finish(sums, 1.0))?;
        }
    }
    Ok(out)
}

/// Least-squares slope of ln(column) vs ln(t) over the window [t_lo, t_hi].
pub fn log_log_slope(curve: &TimeSeries, column: usize, t_lo: f64, t_hi: f64) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, row) in curve.iter() {
        if t >= t_lo && t <= t_hi && t > 0.0 && row[column] > 0.0 {
            xs.push(t.ln());
            ys.push(row[column].ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::validation(format!(
            "log-log window [{t_lo}, {t_hi}] holds {} usable points, need 2",
            xs.len()
        )));
    }
    Ok(least_squares_slope(&xs, &ys))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

/// Diffusion coefficient from the final decade of an MSD curve: the affine
/// least-squares slope divided by 2d. Refuses curves whose final decade is not
/// diffusive (log-log slope within 1 ± 0.2).
pub fn diffusion_coefficient(curve: &TimeSeries, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::validation("dimension must be >= 1"));
    }
    let t_max = curve.times().last().copied().unwrap_or(0.0);
    if !(t_max > 0.0) {
        return Err(Error::validation("msd curve has no positive lag times"));
    }
    let t_lo = t_max / 10.0;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (t, row) in curve.iter() {
        if t >= t_lo {
            ts.push(t);
            vs.push(row[MSD_TOTAL]);
        }
    }
    if ts.len() < 3 {
        return Err(Error::validation(format!(
            "final decade holds {} points, need 3 for a fit",
            ts.len()
        )));
    }
    let log_slope = log_log_slope(curve, MSD_TOTAL, t_lo, t_max)?;
    if (log_slope - 1.0).abs() > 0.2 {
        return Err(Error::NotConverged(format!(
            "msd final decade has log-log slope {log_slope:.3}, not diffusive"
        )));
    }
    Ok(least_squares_slope(&ts, &vs) / (2.0 * d as f64))
}

/// Per-particle displacement between two configurations.
#[derive(Clone, Debug, Serialize)]
pub struct DisplacementRow {
    pub id: usize,
    pub species: Species,
    pub dx: f64,
    pub dy: f64,
    pub magnitude: f64,
}

/// Displacement field plus the fraction of particles that moved farther than
/// [`MOBILITY_THRESHOLD`].
#[derive(Clone, Debug)]
pub struct DisplacementField {
    pub rows: Vec<DisplacementRow>,
    pub mobility_fraction: f64,
}

/// Unwrapped displacement of every particle from `from` to `to`. Both
/// configurations must hold the same particles in the same order.
pub fn displacement_field(from: &Configuration, to: &Configuration) -> Result<DisplacementField> {
    if from.n() != to.n() || from.species != to.species {
        return Err(Error::validation(
            "displacement field needs identical particle sets in identical order",
        ));
    }
    let mut rows = Vec::with_capacity(from.n());
    let mut mobile = 0usize;
    for i in 0..from.n() {
        let dx = to.unwrapped[i][0] - from.unwrapped[i][0];
        let dy = to.unwrapped[i][1] - from.unwrapped[i][1];
        let magnitude = dx.hypot(dy);
        if magnitude > MOBILITY_THRESHOLD {
            mobile += 1;
        }
        rows.push(DisplacementRow { id: i, species: from.species[i], dx, dy, magnitude });
    }
    Ok(DisplacementField { mobility_fraction: mobile as f64 / from.n() as f64, rows })
}

/// Thermodynamic state point (ρ, T) in d dimensions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StatePoint {
    pub density: f64,
    pub temperature: f64,
    pub dim: usize,
}

impl Default for StatePoint {
    fn default() -> Self {
        StatePoint { density: 1.0, temperature: 1.0, dim: DIMENSION }
    }
}

impl StatePoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || !(self.temperature > 0.0) || self.dim == 0 {
            return Err(Error::validation(format!(
                "state point needs density > 0, temperature > 0, dim >= 1, got ({}, {}, {})",
                self.density, self.temperature, self.dim
            )));
        }
        Ok(())
    }
}

/// Expected inter-particle collision time 0.1·(1/ρ)^{1/d}·√(m/(d·k_B·T)).
pub fn collision_time(sp: &StatePoint, mass: f64) -> f64 {
    0.1 * (1.0 / sp.density).powf(1.0 / sp.dim as f64)
        * (mass / (sp.dim as f64 * sp.temperature)).sqrt()
}

/// Reduced-unit factors for density scaling.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReducedScaling {
    /// Coupling Γ = ρ^{n/d}/T; state points sharing it collapse onto one curve.
    pub gamma: f64,
    /// Time unit ρ^{-1/d}·√(m/(k_B·T)).
    pub time_scale: f64,
    /// Length unit ρ^{-1/d}.
    pub length_scale: f64,
}

/// Density-scaling reduction for a state point with particle mass `mass`.
pub fn reduced_scaling(sp: &StatePoint, mass: f64) -> ReducedScaling {
    let length_scale = sp.density.powf(-1.0 / sp.dim as f64);
    ReducedScaling {
        gamma: sp.density.powf(IPL_EXPONENT as f64 / sp.dim as f64) / sp.temperature,
        time_scale: length_scale * (mass / sp.temperature).sqrt(),
        length_scale,
    }
}

/// Write a configuration as plain text: header lines `N`, `L`, `t`, then one
/// line per particle `species x y ux uy vx vy` (wrapped position, unwrapped
/// position, half-step velocity). 17 fractional digits make the round trip
/// bit-exact. The format carries no mass field, so only unit mass is accepted.
pub fn write_snapshot<W: Write>(config: &Configuration, w: &mut W) -> Result<()> {
    if config.mass != 1.0 {
        return Err(Error::validation("snapshot format assumes unit particle mass"));
    }
    writeln!(w, "N {}", config.n())?;
    writeln!(w, "L {:.17e}", config.box_len)?;
    writeln!(w, "t {:.17e}", config.time)?;
    for i in 0..config.n() {
        writeln!(
            w,
            "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            config.species[i],
            config.pos[i][0],
            config.pos[i][1],
            config.unwrapped[i][0],
            config.unwrapped[i][1],
            config.vel_half[i][0],
            config.vel_half[i][1],
        )?;
    }
    Ok(())
}

/// Read back a snapshot written by [`write_snapshot`]. The on-step velocity
/// estimate is seeded from the stored half-step values.
pub fn read_snapshot<R: BufRead>(r: &mut R) -> Result<Configuration> {
    let mut lines = r.lines();
    let mut header = |tag: &str| -> Result<String> {
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::validation(format!("snapshot truncated before `{tag}` line")))?;
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::validation(format!("malformed `{tag}` header line")))?;
        if key != tag {
            return Err(Error::validation(format!("expected `{tag}` header, found `{key}`")));
        }
        Ok(value.to_string())
    };
    let n: usize = header("N")?
        .parse()
        .map_err(|e| Error::validation(format!("bad particle count: {e}")))?;
    let parse_f = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::validation(format!("bad {what}: {e}")))
    };
    let box_len = parse_f(&header("L")?, "box length")?;
    let time = parse_f(&header("t")?, "time")?;
    if !(box_len > 0.0) || !time.is_finite() {
        return Err(Error::validation("snapshot header needs L > 0 and finite t"));
    }

    let mut species = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut unwrapped = Vec::with_capacity(n);
    let mut vel_half = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::validation(format!("snapshot truncated at particle {i}")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::validation(format!(
                "particle line {i} has {} fields, expected 7",
                fields.len()
            )));
        }
        species.push(fields[0].parse::<Species>()?);
        let mut vals = [0.0f64; 6];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_f(fields[k + 1], "particle coordinate")?;
            if !v.is_finite() {
                return Err(Error::validation(format!("non-finite value in particle line {i}")));
            }
        }
        pos.push([vals[0], vals[1]]);
        unwrapped.push([vals[2], vals[3]]);
        vel_half.push([vals[4], vals[5]]);
    }

    Ok(Configuration {
        species,
        pos,
        unwrapped,
        on_step_vel: vel_half.clone(),
        vel_half,
        box_len,
        mass: 1.0,
        time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_config(n: usize, density: f64, t_init: f64, seed: u64) -> Configuration {
        let pot = PotentialSpec::default();
        let mut rng = RngStream::new(seed);
        init_configuration(n, 0.7, density, t_init, 1.0, &pot, &mut rng).unwrap()
    }

    #[test]
    fn pair_energy_examples() {
        let spec = PotentialSpec::default();
        assert_eq!(pair_energy(1.5, &spec).unwrap(), 0.0);
        assert_eq!(pair_energy(2.0, &spec).unwrap(), 0.0);
        let u1 = pair_energy(1.0, &spec).unwrap();
        assert!((u1 - (1.0 - 1.5f64.powi(-18))).abs() < 1e-15);
        assert!((u1 - 0.999323).abs() < 1e-6);
        assert!(pair_energy(0.0, &spec).is_err());
        assert!(pair_energy(-1.0, &spec).is_err());
        // energy is continuous at the cutoff, the force is not
        assert!(pair_energy(1.5 - 1e-12, &spec).unwrap().abs() < 1e-11);
        let f_in = pair_force_magnitude(1.5 - 1e-12, 1.0, &spec).unwrap();
        assert!((f_in - 18.0 * 1.5f64.powi(-19)).abs() < 1e-9);
        assert_eq!(pair_force_magnitude(1.5, 1.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn pair_force_is_energy_derivative() {
        let spec = PotentialSpec::default();
        // x = r/(σ σij); with σij=1 the reduced and absolute distances match
        let x = 1.2;
        let h = 1e-6;
        let numeric =
            (pair_energy(x - h, &spec).unwrap() - pair_energy(x + h, &spec).unwrap()) / (2.0 * h);
        let analytic = pair_force_magnitude(x, 1.0, &spec).unwrap();
        assert!((numeric - analytic).abs() < 1e-8 * analytic.abs());
        assert!((pair_force_magnitude(1.0, 1.0, &spec).unwrap() - 18.0).abs() < 1e-12);
        // σij rescales the absolute force
        let f = pair_force_magnitude(1.0, 0.9, &spec).unwrap();
        assert!((f - 18.0 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn lattice_init_properties() {
        let cfg = quiet_config(64, 1.0, 0.5, 7);
        assert_eq!(cfg.n(), 64);
        assert!((cfg.box_len - 8.0).abs() < 1e-12);
        let n_a = cfg.species.iter().filter(|s| **s == Species::A).count();
        assert_eq!(n_a, 45); // round(0.7·64)
        for p in &cfg.pos {
            assert!(p[0] >= 0.0 && p[0] < cfg.box_len);
            assert!(p[1] >= 0.0 && p[1] < cfg.box_len);
        }
        let p = cfg.momentum();
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
        let t_kin = kinetic_temperature(&cfg);
        assert!((t_kin - 0.5).abs() < 0.2, "t_kin {t_kin}");

        // zero temperature start is exactly at rest
        let cold = quiet_config(16, 1.0, 0.0, 1);
        assert_eq!(kinetic_temperature(&cold), 0.0);

        // mass enters velocity scale but not the measured temperature
        let pot = PotentialSpec::default();
        let mut rng = RngStream::new(3);
        let heavy = init_configuration(64, 0.7, 1.0, 1.0, 4.0, &pot, &mut rng).unwrap();
        assert!((kinetic_temperature(&heavy) - 1.0).abs() < 0.4);

        let mut rng = RngStream::new(1);
        assert!(init_configuration(50, 0.7, 1.0, 1.0, 1.0, &pot, &mut rng).is_err());
        assert!(init_configuration(64, 0.7, 6.0, 1.0, 1.0, &pot, &mut rng).is_err());
        assert!(init_configuration(64, 1.0, 1.0, 1.0, 1.0, &pot, &mut rng).is_err());
    }

    #[test]
    fn two_particle_neighbor_sets() {
        let pot = PotentialSpec::default();
        let mk = |p0: [f64; 2], p1: [f64; 2]| Configuration {
            species: vec![Species::A, Species::B],
            pos: vec![p0, p1],
            unwrapped: vec![p0, p1],
            vel_half: vec![[0.0; 2]; 2],
            on_step_vel: vec![[0.0; 2]; 2],
            box_len: 12.0,
            mass: 1.0,
            time: 0.0,
        };
        // box holds 6 cells per axis, so the cell path is exercised
        let close = mk([1.0, 1.0], [2.0, 1.0]);
        let table = build_cells_and_neighbors(&close, &pot, DEFAULT_SKIN).unwrap();
        assert_eq!(table.neighbors(0), &[1]);
        assert_eq!(table.neighbors(1), &[0]);

        let far = mk([1.0, 1.0], [7.0, 7.0]);
        let table = build_cells_and_neighbors(&far, &pot, DEFAULT_SKIN).unwrap();
        assert!(table.neighbors(0).is_empty());
        assert!(table.neighbors(1).is_empty());

        // the pair across the periodic boundary is still found
        let wrapped = mk([0.2, 6.0], [11.8, 6.0]);
        let table = build_cells_and_neighbors(&wrapped, &pot, DEFAULT_SKIN).unwrap();
        assert_eq!(table.neighbors(0), &[1]);
    }

    // brute-force oracle with the same pair arithmetic, ascending index order
    fn all_pairs_forces(cfg: &Configuration, pot: &PotentialSpec) -> (Vec<[f64; 2]>, f64) {
        let t = pot.tables();
        let mut force = vec![[0.0; 2]; cfg.n()];
        let mut potential = 0.0;
        for i in 0..cfg.n() {
            let mut half_u = 0.0;
            for j in 0..cfg.n() {
                if j == i {
                    continue;
                }
                let dx = min_image(cfg.pos[i][0] - cfg.pos[j][0], cfg.box_len);
                let dy = min_image(cfg.pos[i][1] - cfg.pos[j][1], cfg.box_len);
                let r2 = dx * dx + dy * dy;
                let k = cfg.species[i] as usize + cfg.species[j] as usize;
                if r2 >= t.rc2[k] {
                    continue;
                }
                let q = t.sigma2[k] / r2;
                let q9 = q.powi(IPL_EXPONENT / 2);
                half_u += 0.5 * t.epsilon * (q9 - t.shift);
                let coef = IPL_EXPONENT as f64 * t.epsilon * q9 / r2;
                force[i][0] += coef * dx;
                force[i][1] += coef * dy;
            }
            potential += half_u;
        }
        (force, potential)
    }

    #[test]
    fn neighbor_forces_match_all_pairs() {
        let pot = PotentialSpec::default();
        for seed in 0..5 {
            // jittered lattice: dense enough for many neighbors, no overlaps
            let mut cfg = quiet_config(100, 1.0, 0.0, seed);
            let mut rng = RngStream::new(100 + seed);
            for i in 0..cfg.n() {
                cfg.pos[i][0] =
                    (cfg.pos[i][0] + rng.uniform_in(-0.15, 0.15)).rem_euclid(cfg.box_len);
                cfg.pos[i][1] =
                    (cfg.pos[i][1] + rng.uniform_in(-0.15, 0.15)).rem_euclid(cfg.box_len);
            }
            let table = build_cells_and_neighbors(&cfg, &pot, DEFAULT_SKIN).unwrap();
            assert!(!table.all_pairs, "L=10 must take the cell path");
            let eval = compute_forces(&cfg, &pot, &table).unwrap();
            let (f_ref, u_ref) = all_pairs_forces(&cfg, &pot);
            for i in 0..cfg.n() {
                assert!((eval.force[i][0] - f_ref[i][0]).abs() <= 1e-12);
                assert!((eval.force[i][1] - f_ref[i][1]).abs() <= 1e-12);
            }
            assert!((eval.potential - u_ref).abs() <= 1e-12 * u_ref.abs().max(1.0));
        }
    }

    #[test]
    fn small_box_falls_back_to_all_pairs() {
        let cfg = quiet_config(4, 1.0, 0.0, 2); // L=2 < 3 cells
        let pot = PotentialSpec::default();
        let table = build_cells_and_neighbors(&cfg, &pot, DEFAULT_SKIN).unwrap();
        assert!(table.all_pairs);
        assert!(!table.needs_rebuild(&cfg));
        for i in 0..4 {
            assert_eq!(table.neighbors(i).len(), 3);
        }
        let eval = compute_forces(&cfg, &pot, &table).unwrap();
        let (f_ref, _) = all_pairs_forces(&cfg, &pot);
        for i in 0..4 {
            assert_eq!(eval.force[i][0].to_bits(), f_ref[i][0].to_bits());
            assert_eq!(eval.force[i][1].to_bits(), f_ref[i][1].to_bits());
        }
    }

    #[test]
    fn nve_conserves_energy_and_momentum() {
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(64, 1.0, 0.5, 11);
        // brief thermostat pass settles the lattice into a liquid-like state
        run_md(
            &mut cfg,
            &pot,
            &RunSpec {
                ensemble: Ensemble::Langevin { t_target: 0.5, gamma: 2.0 },
                steps: 500,
                seed: 12,
                ..Default::default()
            },
        )
        .unwrap();
        let run = run_md(
            &mut cfg,
            &pot,
            &RunSpec { steps: 2000, ..Default::default() },
        )
        .unwrap();
        let e0 = run.diagnostics.value(0, DIAG_TOTAL_E);
        // thermostat noise randomized the total momentum; NVE must hold it fixed
        let p0 = [run.diagnostics.value(0, DIAG_PX), run.diagnostics.value(0, DIAG_PY)];
        let mut max_drift: f64 = 0.0;
        let mut max_p: f64 = 0.0;
        for (_, row) in run.diagnostics.iter() {
            max_drift = max_drift.max((row[DIAG_TOTAL_E] - e0).abs());
            max_p = max_p.max((row[DIAG_PX] - p0[0]).abs().max((row[DIAG_PY] - p0[1]).abs()));
        }
        assert!(max_drift / e0.abs() < 1e-3, "relative drift {}", max_drift / e0.abs());
        assert!(max_p < 1e-10, "momentum drift {max_p}");
    }

    #[test]
    fn nve_reverses_to_initial_positions() {
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(64, 1.0, 0.5, 21);
        run_md(
            &mut cfg,
            &pot,
            &RunSpec {
                ensemble: Ensemble::Langevin { t_target: 0.5, gamma: 2.0 },
                steps: 300,
                seed: 22,
                ..Default::default()
            },
        )
        .unwrap();
        let start = cfg.clone();
        let spec = RunSpec { steps: 300, ..Default::default() };
        run_md(&mut cfg, &pot, &spec).unwrap();
        reverse_velocities(&mut cfg, &pot, spec.dt).unwrap();
        run_md(&mut cfg, &pot, &spec).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..cfg.n() {
            let dx = min_image(cfg.pos[i][0] - start.pos[i][0], cfg.box_len);
            let dy = min_image(cfg.pos[i][1] - start.pos[i][1], cfg.box_len);
            worst = worst.max(dx.hypot(dy));
        }
        assert!(worst < 1e-6, "worst return distance {worst}");
    }

    #[test]
    fn thermostat_holds_temperature() {
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(64, 1.0, 1.0, 31);
        let run = run_md(
            &mut cfg,
            &pot,
            &RunSpec {
                ensemble: Ensemble::Langevin { t_target: 1.0, gamma: 1.0 },
                steps: 10_000,
                seed: 32,
                ..Default::default()
            },
        )
        .unwrap();
        let rows = run.diagnostics.len();
        let mut mean = 0.0f64;
        for k in rows / 2..rows {
            mean += run.diagnostics.value(k, DIAG_KIN_T);
        }
        mean /= (rows - rows / 2) as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean kinetic T {mean}");
    }

    #[test]
    fn langevin_ideal_gas_velocities_are_maxwellian() {
        // forces off (huge dilution); on-step velocities of an OU process
        // should carry exactly the target variance
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(100, 1e-4, 1.0, 41);
        let spec = RunSpec {
            ensemble: Ensemble::Langevin { t_target: 1.0, gamma: 5.0 },
            dt: 0.02,
            steps: 40,
            seed: 42,
            ..Default::default()
        };
        // warm up, then harvest samples 20 steps apart (velocity memory 0.9^20)
        run_md(&mut cfg, &pot, &spec).unwrap();
        let mut samples = Vec::new();
        for seg in 0..400u64 {
            run_md(&mut cfg, &pot, &RunSpec { steps: 20, seed: 1000 + seg, ..spec }).unwrap();
            for v in &cfg.on_step_vel {
                samples.push(v[0]);
                samples.push(v[1]);
            }
        }
        // standard normal 1/16 quantiles
        let edges = [
            -1.5341205443525463,
            -1.1503493803760083,
            -0.8871465590189119,
            -0.6744897501960817,
            -0.4887764111147146,
            -0.3186393639643751,
            -0.15731068461017066,
            0.0,
            0.15731068461017066,
            0.3186393639643751,
            0.4887764111147146,
            0.6744897501960817,
            0.8871465590189119,
            1.1503493803760083,
            1.5341205443525463,
        ];
        let mut counts = [0usize; 16];
        for &v in &samples {
            let bin = edges.iter().position(|e| v < *e).unwrap_or(15);
            counts[bin] += 1;
        }
        let expected = samples.len() as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 1% critical value for 15 degrees of freedom
        assert!(chi2 < 30.578, "chi^2 {chi2} with {} samples", samples.len());
    }

    #[test]
    fn free_flight_msd_is_ballistic() {
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(16, 1e-4, 1.0, 51);
        let v2_mean: f64 =
            cfg.vel_half.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / 16.0;
        let spec = RunSpec {
            dt: 0.01,
            steps: 100,
            schedule: SampleSchedule::Linear { every: 10 },
            ..Default::default()
        };
        let run = run_md(&mut cfg, &pot, &spec).unwrap();
        assert_eq!(run.samples.len(), 11);
        let single = msd(&run.samples, &cfg.species, false).unwrap();
        let multi = msd(&run.samples, &cfg.species, true).unwrap();
        for k in 1..single.len() {
            let t = single.time(k);
            let expect = v2_mean * t * t;
            assert!((single.value(k, MSD_TOTAL) - expect).abs() < 1e-9 * expect);
            assert!((multi.value(k, MSD_TOTAL) - expect).abs() < 1e-9 * expect);
        }
        // R²(t)/t² ≈ d·k_B·T/m up to the momentum-zeroing factor (N-1)/N
        let t_kin = kinetic_temperature(&cfg);
        let ratio = single.value(5, MSD_TOTAL) / single.time(5).powi(2);
        assert!((ratio - 2.0 * t_kin).abs() < 0.1 * 2.0 * t_kin);
    }

    #[test]
    fn diffusion_fit_and_regime_guard() {
        // clean diffusive curve: R² = 4t ⇒ D = 1 in d=2
        let mut curve = TimeSeries::new(3);
        for k in 1..=60 {
            let t = 0.1 * 1.15f64.powi(k);
            curve.push(t, &[4.0 * t, 0.0, 0.0]).unwrap();
        }
        let d = diffusion_coefficient(&curve, 2).unwrap();
        assert!((d - 1.0).abs() < 1e-9);

        // plateau prefix sits below the final decade and does not bias the fit
        let mut caged = TimeSeries::new(3);
        for k in 0..=300 {
            let t = 0.1 * (k + 1) as f64;
            caged.push(t, &[(4.0 * t).max(0.5), 0.0, 0.0]).unwrap();
        }
        let d = diffusion_coefficient(&caged, 2).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "D {d}");

        // ballistic input is refused
        let mut ball = TimeSeries::new(3);
        for k in 1..=50 {
            let t = 0.1 * k as f64;
            ball.push(t, &[2.0 * t * t, 0.0, 0.0]).unwrap();
        }
        assert!(matches!(diffusion_coefficient(&ball, 2), Err(Error::NotConverged(_))));
    }

    #[test]
    fn displacement_field_examples() {
        let cfg = quiet_config(16, 1.0, 0.0, 61);
        let same = displacement_field(&cfg, &cfg).unwrap();
        assert!(same.rows.iter().all(|r| r.magnitude == 0.0));
        assert_eq!(same.mobility_fraction, 0.0);

        let mut moved = cfg.clone();
        for u in moved.unwrapped.iter_mut() {
            u[0] += 1.0;
        }
        let field = displacement_field(&cfg, &moved).unwrap();
        assert!(field.rows.iter().all(|r| (r.dx - 1.0).abs() < 1e-15 && r.dy == 0.0));
        assert_eq!(field.mobility_fraction, 1.0);

        let mut relabeled = cfg.clone();
        relabeled.species[0] =
            if cfg.species[0] == Species::A { Species::B } else { Species::A };
        assert!(displacement_field(&cfg, &relabeled).is_err());
    }

    #[test]
    fn collision_time_examples() {
        let sp = StatePoint::default();
        assert!((collision_time(&sp, 1.0) - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        let hot = StatePoint { temperature: 4.0, ..sp };
        assert!((collision_time(&hot, 1.0) - 0.5 * collision_time(&sp, 1.0)).abs() < 1e-15);
        let d3 = StatePoint { dim: 3, ..sp };
        assert!((collision_time(&d3, 1.0) - 0.1 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reduced_scaling_matches_state_points() {
        let a = StatePoint { density: 1.0, temperature: 0.5, dim: 2 };
        assert!((reduced_scaling(&a, 1.0).gamma - 2.0).abs() < 1e-15);

        let b = StatePoint { density: 1.05, temperature: 0.4 * 1.05f64.powi(9), dim: 2 };
        let c = StatePoint { density: 1.0, temperature: 0.4, dim: 2 };
        let gb = reduced_scaling(&b, 1.0).gamma;
        let gc = reduced_scaling(&c, 1.0).gamma;
        assert!((gb - gc).abs() < 1e-12 * gc);

        // d=3 halves the exponent: ρ=2 gives Γ = 2⁶/T
        let d3 = StatePoint { density: 2.0, temperature: 1.0, dim: 3 };
        assert!((reduced_scaling(&d3, 1.0).gamma - 64.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_shapes() {
        assert!(schedule_indices(&SampleSchedule::None, 100).is_empty());
        assert_eq!(schedule_indices(&SampleSchedule::Linear { every: 25 }, 100), vec![
            0, 25, 50, 75, 100
        ]);
        let log = schedule_indices(&SampleSchedule::Log { per_decade: 4 }, 1000);
        assert_eq!(log.first(), Some(&0));
        assert_eq!(log.last(), Some(&1000));
        assert!(log.windows(2).all(|w| w[0] < w[1]));
        assert!(log.contains(&1) && log.contains(&10) && log.contains(&100));
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let pot = PotentialSpec::default();
        let mut cfg = quiet_config(16, 1.0, 0.8, 71);
        run_md(&mut cfg, &pot, &RunSpec { steps: 37, ..Default::default() }).unwrap();

        let mut buf = Vec::new();
        write_snapshot(&cfg, &mut buf).unwrap();
        let back = read_snapshot(&mut buf.as_slice()).unwrap();

        assert_eq!(back.species, cfg.species);
        assert_eq!(back.box_len.to_bits(), cfg.box_len.to_bits());
        assert_eq!(back.time.to_bits(), cfg.time.to_bits());
        for i in 0..cfg.n() {
            for d in 0..2 {
                assert_eq!(back.pos[i][d].to_bits(), cfg.pos[i][d].to_bits());
                assert_eq!(back.unwrapped[i][d].to_bits(), cfg.unwrapped[i][d].to_bits());
                assert_eq!(back.vel_half[i][d].to_bits(), cfg.vel_half[i][d].to_bits());
            }
        }

        // restart equivalence: both copies step to identical states
        let mut a = cfg.clone();
        let mut b = back;
        let spec = RunSpec { steps: 10, ..Default::default() };
        run_md(&mut a, &pot, &spec).unwrap();
        run_md(&mut b, &pot, &spec).unwrap();
        for i in 0..a.n() {
            assert_eq!(a.pos[i][0].to_bits(), b.pos[i][0].to_bits());
            assert_eq!(a.pos[i][1].to_bits(), b.pos[i][1].to_bits());
        }

        let mut heavy = cfg.clone();
        heavy.mass = 2.0;
        assert!(write_snapshot(&heavy, &mut Vec::new()).is_err());

        assert!(read_snapshot(&mut "N 1\nL bad\n".as_bytes()).is_err());
        assert!(read_snapshot(&mut "N 2\nL 1e1\nt 0e0\nA 1 1 1 1 0 0\n".as_bytes()).is_err());
    }

    #[test]
    fn overlapping_pair_blows_up() {
        let pot = PotentialSpec::default();
        let mut cfg = Configuration {
            species: vec![Species::A, Species::A],
            pos: vec![[5.0, 5.0], [5.01, 5.0]],
            unwrapped: vec![[5.0, 5.0], [5.01, 5.0]],
            vel_half: vec![[0.0; 2]; 2],
            on_step_vel: vec![[0.0; 2]; 2],
            box_len: 12.0,
            mass: 1.0,
            time: 0.0,
        };
        let mut table = build_cells_and_neighbors(&cfg, &pot, DEFAULT_SKIN).unwrap();
        assert!(matches!(
            leapfrog_step(&mut cfg, &pot, &mut table, 0.002),
            Err(Error::Blowup { .. })
        ));
    }

    #[test]
    fn run_spec_validation() {
        let bad_dt = RunSpec { dt: 0.0, ..Default::default() };
        assert!(bad_dt.validate().is_err());
        let bad_gamma = RunSpec {
            ensemble: Ensemble::Langevin { t_target: 1.0, gamma: 0.0 },
            ..Default::default()
        };
        assert!(bad_gamma.validate().is_err());
        let bad_stride = RunSpec { schedule: SampleSchedule::Linear { every: 0 }, ..Default::default() };
        assert!(bad_stride.validate().is_err());
        assert!(RunSpec::default().validate().is_ok());
    }
}
