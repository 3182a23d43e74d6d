//! The cellular automaton: grid, occupancy index, time stepping, free
//! propagation and fluctuation sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::collapse::{perform_interaction, InteractionContext, InteractionRecord};
use crate::channel::RuleTable;
use crate::error::{Error, Result};
use crate::particle::{coupling_from_alpha, DEFAULT_ALPHA};
use crate::qed::AmplitudeOptions;
use crate::qstate::{normalize, Coord, ObjectId, QObject, DEFAULT_ON_SHELL_TOL};
use crate::rng::{Domain, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
    Absorb,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "absorb" => Ok(Boundary::Absorb),
            _ => Err(Error::Config(format!("unknown boundary `{s}` (periodic or absorb)"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Absorb => "absorb",
        })
    }
}

/// Run parameters. Lengths and times are in MeV^-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub timestep: f64,
    pub seed: u64,
    /// Scale of the per-step firing probability of a fluctuation candidate.
    pub fluct_rate: f64,
    /// Exponent `k` in `fluct_rate * (|a1| |a2|)^k`.
    pub fluct_amp_power: f64,
    pub volatile_prob: f64,
    pub max_paths: usize,
    pub graining: usize,
    pub max_steps: u64,
    pub boundary: Boundary,
    pub alpha: f64,
    pub prune_threshold: f64,
    pub on_shell_tol: f64,
    pub workers: usize,
    /// Stop once this many interactions have been performed.
    pub stop_after_interactions: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dims: vec![16, 16, 16],
            spacing: 1.0,
            timestep: 1.0,
            seed: 0,
            fluct_rate: 0.0,
            fluct_amp_power: 2.0,
            volatile_prob: 0.0,
            max_paths: 64,
            graining: 8,
            max_steps: 100,
            boundary: Boundary::Periodic,
            alpha: DEFAULT_ALPHA,
            prune_threshold: 1e-14,
            on_shell_tol: DEFAULT_ON_SHELL_TOL,
            workers: 1,
            stop_after_interactions: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a non-empty list of positive cell counts");
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return bad("spacing must be positive");
        }
        if !(self.timestep > 0.0) || !self.timestep.is_finite() {
            return bad("timestep must be positive");
        }
        if !(self.fluct_rate >= 0.0) || !self.fluct_rate.is_finite() {
            return bad("fluct_rate must be non-negative");
        }
        if !(self.fluct_amp_power >= 0.0) {
            return bad("fluct_amp_power must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.volatile_prob) {
            return bad("volatile_prob must lie in [0, 1]");
        }
        if self.max_paths == 0 {
            return bad("max_paths must be at least 1");
        }
        if self.graining == 0 {
            return bad("graining must be at least 1");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.prune_threshold >= 0.0) {
            return bad("prune_threshold must be non-negative");
        }
        if !(self.on_shell_tol > 0.0) {
            return bad("on_shell_tol must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }

    pub fn interaction_context(&self) -> InteractionContext {
        InteractionContext {
            rules: RuleTable::qed(),
            graining: self.graining,
            amplitude: AmplitudeOptions::with_coupling(coupling_from_alpha(self.alpha)),
            prune_threshold: self.prune_threshold,
            max_paths: self.max_paths,
        }
    }
}

/// One particle/wave on one path: element `slot` of path `path` of `object`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PwRef {
    pub object: ObjectId,
    pub slot: usize,
    pub path: usize,
}

impl fmt::Display for PwRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}#{}", self.object, self.slot, self.path)
    }
}

/// Grid plus the two-way index between cells and the particle/waves in them.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub step: u64,
    occupancy: BTreeMap<Coord, BTreeSet<PwRef>>,
    coverage: BTreeMap<PwRef, Coord>,
}

impl Lattice {
    pub fn new(dims: Vec<usize>, spacing: f64) -> Self {
        Lattice { dims, spacing, step: 0, occupancy: BTreeMap::new(), coverage: BTreeMap::new() }
    }

    pub fn in_bounds(&self, c: &Coord) -> bool {
        c.dim() == self.dims.len() && c.0.iter().zip(&self.dims).all(|(&x, &d)| x >= 0 && (x as usize) < d)
    }

    /// Wraps or rejects a cell that left the grid.
    pub fn place(&self, c: &Coord, boundary: Boundary) -> Option<Coord> {
        match boundary {
            Boundary::Periodic => Some(Coord(
                c.0.iter().zip(&self.dims).map(|(&x, &d)| x.rem_euclid(d as i64)).collect(),
            )),
            Boundary::Absorb => self.in_bounds(c).then(|| c.clone()),
        }
    }

    /// Rebuilds the index from the objects' element positions.
    pub fn rebuild(&mut self, objects: &BTreeMap<ObjectId, QObject>) {
        self.occupancy.clear();
        self.coverage.clear();
        for (id, q) in objects {
            for (pi, p) in q.paths.iter().enumerate() {
                for (slot, el) in p.elements.iter().enumerate() {
                    let r = PwRef { object: *id, slot, path: pi };
                    self.occupancy.entry(el.x.cell.clone()).or_default().insert(r);
                    self.coverage.insert(r, el.x.cell.clone());
                }
            }
        }
    }

    pub fn occupants(&self, c: &Coord) -> Option<&BTreeSet<PwRef>> {
        self.occupancy.get(c)
    }

    pub fn cell_of(&self, r: &PwRef) -> Option<&Coord> {
        self.coverage.get(r)
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = (&Coord, &BTreeSet<PwRef>)> {
        self.occupancy.iter()
    }

    /// Checks that the two directions of the index agree with each other
    /// and with the objects.
    pub fn audit(&self, objects: &BTreeMap<ObjectId, QObject>) -> Result<()> {
        let fail = |m: String| Err(Error::Structure(format!("occupancy audit: {m}")));
        let mut expected = 0usize;
        for (id, q) in objects {
            for (pi, p) in q.paths.iter().enumerate() {
                for (slot, el) in p.elements.iter().enumerate() {
                    expected += 1;
                    let r = PwRef { object: *id, slot, path: pi };
                    match self.coverage.get(&r) {
                        Some(c) if *c == el.x.cell => {}
                        _ => return fail(format!("{r} not indexed at {}", el.x.cell)),
                    }
                    if !self.occupancy.get(&el.x.cell).is_some_and(|s| s.contains(&r)) {
                        return fail(format!("cell {} does not list {r}", el.x.cell));
                    }
                }
            }
        }
        let listed: usize = self.occupancy.values().map(|s| s.len()).sum();
        if listed != expected || self.coverage.len() != expected {
            return fail(format!("{listed} cell entries and {} refs for {expected} elements", self.coverage.len()));
        }
        if self.occupancy.values().any(|s| s.is_empty()) {
            return fail("empty cell entry".into());
        }
        Ok(())
    }
}

/// `fx * timestep` with `fx = m / E` of the dominant path's first element;
/// zero for massless particles.
pub fn proper_timestep(q: &QObject, timestep: f64) -> Result<f64> {
    let el = q
        .dominant_path()
        .elements
        .first()
        .ok_or_else(|| Error::Structure(format!("{} has an empty dominant path", q.id)))?;
    if !(el.p.e > 0.0) {
        return Err(Error::Kinematics(format!("{} has non-positive energy {}", q.id, el.p.e)));
    }
    Ok(el.ptype.mass() / el.p.e * timestep)
}

/// Result of propagating one object.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    /// `None` when every path was absorbed.
    pub object: Option<QObject>,
    pub absorbed_paths: usize,
}

/// Free propagation: positions move by `v dt` in global time, path phases
/// advance by `exp(sum phase_rate * dtau)` with `dtau` the proper step, or the
/// global step for massless objects.
pub fn pw_update(
    q: &QObject,
    timestep: f64,
    proper_step: f64,
    lattice: &Lattice,
    boundary: Boundary,
) -> Result<Propagated> {
    if q.kind == crate::qstate::ObjectKind::InteractionObject {
        return Err(Error::Structure(format!("interaction object {} cannot propagate", q.id)));
    }
    let dtau = if proper_step > 0.0 { proper_step } else { timestep };
    let shift = timestep / lattice.spacing;
    let mut out = q.clone();
    let mut absorbed = Vec::new();
    for (pi, path) in out.paths.iter_mut().enumerate() {
        let mut exponent = Complex64::new(0.0, 0.0);
        let mut lost = false;
        for el in &mut path.elements {
            exponent += el.phase_rate * dtau;
            let v = el.p.velocity();
            let mut cell = el.x.cell.clone();
            for (k, r) in el.x.residue.iter_mut().enumerate() {
                let pos = *r + v.get(k).copied().unwrap_or(0.0) * shift;
                let whole = pos.floor();
                *r = pos - whole;
                // guard against pos - floor(pos) rounding up to 1
                if *r >= 1.0 {
                    *r = 0.0;
                    cell.0[k] += 1;
                }
                cell.0[k] += whole as i64;
            }
            match lattice.place(&cell, boundary) {
                Some(c) => el.x.cell = c,
                None => lost = true,
            }
        }
        path.amplitude *= exponent.exp();
        if lost {
            absorbed.push(pi);
        }
    }
    if absorbed.is_empty() {
        return Ok(Propagated { object: Some(out), absorbed_paths: 0 });
    }
    let n = absorbed.len();
    let mut i = 0;
    out.paths.retain(|_| {
        let keep = !absorbed.contains(&i);
        i += 1;
        keep
    });
    if out.paths.is_empty() {
        return Ok(Propagated { object: None, absorbed_paths: n });
    }
    let out = normalize(&out)?;
    Ok(Propagated { object: Some(out), absorbed_paths: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Nothing,
    InteractionCollapse,
    InteractionVolatile,
    Decay,
}

impl Outcome {
    pub fn symbol(self) -> &'static str {
        match self {
            Outcome::Nothing => "nothing",
            Outcome::InteractionCollapse => "interaction_collapse",
            Outcome::InteractionVolatile => "interaction_volatile",
            Outcome::Decay => "decay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fluctuation {
    pub position: Coord,
    pub pw1: PwRef,
    pub pw2: PwRef,
    pub outcome: Outcome,
}

/// A pair of particle/waves of distinct objects sharing a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub position: Coord,
    pub pw1: PwRef,
    pub pw2: PwRef,
    pub probability: f64,
}

/// Every candidate with its firing probability
/// `min(1, rate * (|a1| |a2|)^k)`, normalized amplitudes, in index order.
pub fn fluctuation_candidates(
    lattice: &Lattice,
    objects: &BTreeMap<ObjectId, QObject>,
    rate: f64,
    power: f64,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    if rate == 0.0 {
        return out;
    }
    let norms: BTreeMap<ObjectId, f64> = objects.iter().map(|(id, q)| (*id, q.norm2())).collect();
    let amp = |r: &PwRef| objects[&r.object].paths[r.path].amplitude.norm() / norms[&r.object].sqrt();
    for (cell, refs) in lattice.occupied_cells() {
        let refs: Vec<&PwRef> = refs.iter().collect();
        for i in 0..refs.len() {
            for j in i + 1..refs.len() {
                if refs[i].object == refs[j].object {
                    continue;
                }
                let p = (rate * (amp(refs[i]) * amp(refs[j])).powf(power)).min(1.0);
                if p > 0.0 {
                    out.push(Candidate { position: cell.clone(), pw1: *refs[i], pw2: *refs[j], probability: p });
                }
            }
        }
    }
    out
}

/// Each candidate fires independently; at most one fluctuation survives,
/// chosen uniformly among those that fired.
pub fn sample_fluctuation<R: Rng + ?Sized>(candidates: &[Candidate], rng: &mut R) -> Option<Candidate> {
    let fired: Vec<&Candidate> = candidates.iter().filter(|c| rng.random::<f64>() < c.probability).collect();
    if fired.is_empty() {
        return None;
    }
    let k = rng.random_range(0..fired.len());
    Some(fired[k].clone())
}

/// A fired fluctuation proceeds as volatile with `volatile_prob`, else it
/// collapses.
pub fn classify_outcome<R: Rng + ?Sized>(volatile_prob: f64, rng: &mut R) -> Outcome {
    if volatile_prob > 0.0 && rng.random::<f64>() < volatile_prob {
        Outcome::InteractionVolatile
    } else {
        Outcome::InteractionCollapse
    }
}

/// What happened in one global step besides propagation.
#[derive(Debug, Clone, PartialEq)]
pub enum StepEvent {
    Quiet,
    Volatile,
    /// Fluctuation without an open tree-level channel.
    NothingDurable,
    Interaction(Box<InteractionRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub objects: usize,
    pub total_norm: f64,
    pub absorbed_paths: usize,
    pub fluctuation: Option<Fluctuation>,
    pub event: StepEvent,
}

/// Lattice, q-objects and run parameters.
#[derive(Clone)]
pub struct SystemState {
    pub config: SimConfig,
    pub lattice: Lattice,
    pub objects: BTreeMap<ObjectId, QObject>,
    pub interactions: usize,
    next_id: u64,
    context: InteractionContext,
    pool: Arc<rayon::ThreadPool>,
}

impl fmt::Debug for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemState")
            .field("config", &self.config)
            .field("lattice", &self.lattice)
            .field("objects", &self.objects)
            .field("interactions", &self.interactions)
            .finish()
    }
}

impl SystemState {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(SystemState {
            lattice: Lattice::new(config.dims.clone(), config.spacing),
            context: config.interaction_context(),
            config,
            objects: BTreeMap::new(),
            interactions: 0,
            next_id: 1,
            pool: Arc::new(pool),
        })
    }

    pub fn context(&self) -> &InteractionContext {
        &self.context
    }

    pub fn allocate_id(&mut self) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Adds an object after checking that all its elements lie on the grid.
    pub fn insert_object(&mut self, q: QObject) -> Result<()> {
        q.validate()?;
        if self.objects.contains_key(&q.id) {
            return Err(Error::Structure(format!("duplicate object id {}", q.id)));
        }
        for p in &q.paths {
            for el in &p.elements {
                if !self.lattice.in_bounds(&el.x.cell) {
                    return Err(Error::Config(format!("{} placed outside the lattice at {}", q.id, el.x.cell)));
                }
            }
        }
        self.next_id = self.next_id.max(q.id.0 + 1);
        self.objects.insert(q.id, q);
        self.lattice.rebuild(&self.objects);
        Ok(())
    }

    pub fn total_norm(&self) -> f64 {
        self.objects.values().map(|q| q.norm2()).fold(0.0, |a, b| a + b)
    }

    /// One CA step: propagate every object, then sample at most one
    /// fluctuation and carry it out.
    pub fn global_update(&mut self) -> Result<StepRecord> {
        let step = self.lattice.step;
        let dt = self.config.timestep;
        let boundary = self.config.boundary;
        let lattice = &self.lattice;
        let objects: Vec<&QObject> = self.objects.values().collect();
        let propagated = self.pool.install(|| {
            objects
                .par_iter()
                .map(|q| pw_update(q, dt, proper_timestep(q, dt)?, lattice, boundary))
                .collect::<Result<Vec<Propagated>>>()
        })?;
        let mut absorbed = 0;
        let mut next = BTreeMap::new();
        for p in propagated {
            absorbed += p.absorbed_paths;
            if let Some(q) = p.object {
                next.insert(q.id, q);
            }
        }
        self.objects = next;
        self.lattice.rebuild(&self.objects);

        let candidates =
            fluctuation_candidates(&self.lattice, &self.objects, self.config.fluct_rate, self.config.fluct_amp_power);
        let seed = self.config.seed;
        let mut rng = StreamKey::new(seed, Domain::Fluctuation, step, 0).stream();
        let mut fluctuation = None;
        let mut event = StepEvent::Quiet;
        if let Some(c) = sample_fluctuation(&candidates, &mut rng) {
            let mut crng = StreamKey::new(seed, Domain::Classify, step, 0).stream();
            let outcome = classify_outcome(self.config.volatile_prob, &mut crng);
            if outcome == Outcome::InteractionCollapse {
                let out_id = ObjectId(self.next_id);
                let mut irng = StreamKey::new(seed, Domain::Interaction, step, 0).stream();
                let context = &self.context;
                let objects = &mut self.objects;
                let result = self.pool.install(|| {
                    perform_interaction(objects, c.pw1, c.pw2, &c.position, out_id, context, &mut irng)
                });
                event = match result {
                    Ok(record) => {
                        self.next_id += 1;
                        self.interactions += 1;
                        self.lattice.rebuild(&self.objects);
                        StepEvent::Interaction(Box::new(record))
                    }
                    Err(Error::EmptyChannelSet(..) | Error::BelowThreshold { .. }) => StepEvent::NothingDurable,
                    Err(e) => return Err(e),
                };
            } else {
                event = StepEvent::Volatile;
            }
            fluctuation = Some(Fluctuation { position: c.position, pw1: c.pw1, pw2: c.pw2, outcome });
        }
        self.lattice.step += 1;
        Ok(StepRecord {
            step,
            objects: self.objects.len(),
            total_norm: self.total_norm(),
            absorbed_paths: absorbed,
            fluctuation,
            event,
        })
    }

    /// Steps until `max_steps`, an empty lattice, or the interaction limit.
    pub fn evolve(&mut self) -> Result<Vec<StepRecord>> {
        let mut log = Vec::new();
        while self.lattice.step < self.config.max_steps && !self.objects.is_empty() {
            log.push(self.global_update()?);
            if self.config.stop_after_interactions.is_some_and(|n| self.interactions >= n) {
                break;
            }
        }
        Ok(log)
    }
}
