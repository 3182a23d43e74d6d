//! Q-objects: tagged collections of alternative paths, each path an ordered
//! tuple of particle/wave states with one complex amplitude.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kinematics::FourMomentum;
use crate::particle::{ParticleType, Statistics};

/// Relative on-shell tolerance applied to `E^2` when no override is given.
pub const DEFAULT_ON_SHELL_TOL: f64 = 1e-9;

/// Tolerance on `sum |amp|^2 = 1` after normalization.
pub const NORM_TOL: f64 = 1e-12;

/// Spin z-component for massive fermions, helicity for photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpinState {
    Up,
    Down,
    Plus,
    Minus,
}

impl SpinState {
    /// Spin projection in units of hbar (±1/2 for fermions, ±1 for photons).
    pub fn value(self) -> f64 {
        match self {
            SpinState::Up => 0.5,
            SpinState::Down => -0.5,
            SpinState::Plus => 1.0,
            SpinState::Minus => -1.0,
        }
    }

    /// The two admissible labels for a particle type.
    pub fn domain(ptype: ParticleType) -> [SpinState; 2] {
        match ptype.statistics() {
            Statistics::Fermion => [SpinState::Up, SpinState::Down],
            Statistics::Boson => [SpinState::Plus, SpinState::Minus],
        }
    }

    pub fn valid_for(self, ptype: ParticleType) -> bool {
        Self::domain(ptype).contains(&self)
    }

    pub fn flipped(self) -> SpinState {
        match self {
            SpinState::Up => SpinState::Down,
            SpinState::Down => SpinState::Up,
            SpinState::Plus => SpinState::Minus,
            SpinState::Minus => SpinState::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SpinState::Up => "up",
            SpinState::Down => "down",
            SpinState::Plus => "+",
            SpinState::Minus => "-",
        }
    }

    pub fn parse(s: &str) -> Option<SpinState> {
        match s.trim() {
            "up" | "+1/2" | "1/2" => Some(SpinState::Up),
            "down" | "-1/2" => Some(SpinState::Down),
            "+" | "+1" | "plus" => Some(SpinState::Plus),
            "-" | "-1" | "minus" => Some(SpinState::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Integer lattice coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord(pub Vec<i64>);

impl Coord {
    pub fn origin(k: usize) -> Self {
        Coord(vec![0; k])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for Coord {
    fn from(v: Vec<i64>) -> Self {
        Coord(v)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Cell plus the fractional offset inside it, each residue in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub cell: Coord,
    pub residue: Vec<f64>,
}

impl Position {
    /// Centre of `cell`.
    pub fn at(cell: Coord) -> Self {
        let k = cell.dim();
        Position { cell, residue: vec![0.5; k] }
    }

    /// Continuous coordinate in cell units.
    pub fn continuous(&self) -> Vec<f64> {
        self.cell.0.iter().zip(&self.residue).map(|(c, r)| *c as f64 + r).collect()
    }
}

/// One particle/wave's state on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct StateElement {
    pub ptype: ParticleType,
    pub p: FourMomentum,
    pub sigma: SpinState,
    pub x: Position,
    /// Per-unit-time phase evolution rate, `-i E`.
    pub phase_rate: Complex64,
    /// Intermediate (internal) line; the momentum may be off shell.
    pub off_shell: bool,
}

impl StateElement {
    /// External element with on-shell momentum, snapped to the momentum grid.
    pub fn new(ptype: ParticleType, p: FourMomentum, sigma: SpinState, x: Position) -> Result<Self> {
        Self::with_tolerance(ptype, p, sigma, x, DEFAULT_ON_SHELL_TOL)
    }

    pub fn with_tolerance(
        ptype: ParticleType,
        p: FourMomentum,
        sigma: SpinState,
        x: Position,
        tol: f64,
    ) -> Result<Self> {
        check_on_shell(ptype, &p, tol)?;
        if !sigma.valid_for(ptype) {
            return Err(Error::SpinDomain { ptype, label: sigma.symbol().to_string() });
        }
        let p = p.quantized();
        Ok(StateElement { ptype, p, sigma, x, phase_rate: Complex64::new(0.0, -p.e), off_shell: false })
    }

    /// Element built from already-validated kinematics (split outcomes).
    pub(crate) fn external_unchecked(ptype: ParticleType, p: FourMomentum, sigma: SpinState, x: Position) -> Self {
        StateElement { ptype, p, sigma, x, phase_rate: Complex64::new(0.0, -p.e), off_shell: false }
    }

    /// Internal line produced by a combine; no shell condition.
    pub fn intermediate(ptype: ParticleType, p: FourMomentum, x: Position) -> Self {
        let sigma = SpinState::domain(ptype)[0];
        let p = p.quantized();
        StateElement { ptype, p, sigma, x, phase_rate: Complex64::new(0.0, -p.e), off_shell: true }
    }

    pub fn with_sigma(&self, sigma: SpinState) -> Result<Self> {
        if !sigma.valid_for(self.ptype) {
            return Err(Error::SpinDomain { ptype: self.ptype, label: sigma.symbol().to_string() });
        }
        Ok(StateElement { sigma, ..self.clone() })
    }
}

/// `|E^2 - p^2 - m^2| <= tol * E^2` and `E > 0`.
pub fn check_on_shell(ptype: ParticleType, p: &FourMomentum, tol: f64) -> Result<()> {
    let m = ptype.mass();
    let residual = (p.m2() - m * m).abs();
    let allowed = tol * p.e * p.e;
    if p.e <= 0.0 || !(residual <= allowed) {
        return Err(Error::OnShellViolation { ptype, residual, allowed });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub elements: Vec<StateElement>,
    pub amplitude: Complex64,
}

impl Path {
    pub fn new(elements: Vec<StateElement>, amplitude: Complex64) -> Self {
        Path { elements, amplitude }
    }

    pub fn types(&self) -> Vec<ParticleType> {
        self.elements.iter().map(|e| e.ptype).collect()
    }

    pub fn total_momentum(&self) -> FourMomentum {
        self.elements.iter().fold(FourMomentum::ZERO, |acc, e| acc + e.p)
    }

    pub fn total_charge(&self) -> i32 {
        self.elements.iter().map(|e| e.ptype.charge()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    ParticleWave,
    PwCollection,
    InteractionObject,
}

impl ObjectKind {
    pub fn symbol(self) -> &'static str {
        match self {
            ObjectKind::ParticleWave => "particle_wave",
            ObjectKind::PwCollection => "pw_collection",
            ObjectKind::InteractionObject => "interaction_object",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub paths: Vec<Path>,
}

impl QObject {
    /// Builds an object and checks the structural invariant for its kind.
    pub fn new(id: ObjectId, kind: ObjectKind, paths: Vec<Path>) -> Result<Self> {
        let q = QObject { id, kind, paths };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Structure(format!("{} has no paths", self.id)));
        }
        if self.paths.iter().any(|p| p.elements.is_empty()) {
            return Err(Error::Structure(format!("{} has an empty path", self.id)));
        }
        match self.kind {
            ObjectKind::ParticleWave => {
                if self.paths.iter().any(|p| p.elements.len() != 1) {
                    return Err(Error::Structure(format!(
                        "particle/wave {} must have exactly one element per path",
                        self.id
                    )));
                }
            }
            ObjectKind::PwCollection => {
                let types = self.paths[0].types();
                if self.paths.iter().any(|p| p.types() != types) {
                    return Err(Error::Structure(format!(
                        "pw-collection {} mixes particle-type tuples across paths",
                        self.id
                    )));
                }
            }
            ObjectKind::InteractionObject => {}
        }
        Ok(())
    }

    /// Number of particle/wave slots (elements per path).
    pub fn slots(&self) -> usize {
        self.paths[0].elements.len()
    }

    pub fn norm2(&self) -> f64 {
        self.paths.iter().map(|p| p.amplitude.norm_sqr()).sum()
    }

    /// Path with the largest `|amplitude|`; ties resolve to the lowest index.
    pub fn dominant_path(&self) -> &Path {
        let mut best = 0;
        for (i, p) in self.paths.iter().enumerate() {
            if p.amplitude.norm_sqr() > self.paths[best].amplitude.norm_sqr() {
                best = i;
            }
        }
        &self.paths[best]
    }
}

/// Single-path particle/wave with amplitude 1.
pub fn make_particle_wave(
    id: ObjectId,
    ptype: ParticleType,
    p: FourMomentum,
    sigma: SpinState,
    x: Position,
) -> Result<QObject> {
    let el = StateElement::new(ptype, p, sigma, x)?;
    QObject::new(id, ObjectKind::ParticleWave, vec![Path::new(vec![el], Complex64::new(1.0, 0.0))])
}

/// Two-particle entangled collection
/// `(|pw1.a, pw2.a> + |pw1.b, pw2.b>) / sqrt 2`.
///
/// Each pair holds one particle/wave's two alternative states; they must
/// agree on everything except the spin label.
pub fn make_entangled_pair(
    id: ObjectId,
    pw1_states: (StateElement, StateElement),
    pw2_states: (StateElement, StateElement),
) -> Result<QObject> {
    for (name, (a, b)) in [("pw1", &pw1_states), ("pw2", &pw2_states)] {
        if a.ptype != b.ptype {
            return Err(Error::Structure(format!(
                "{name} alternatives have different particle types ({} vs {})",
                a.ptype, b.ptype
            )));
        }
        if a.p != b.p || a.x != b.x {
            return Err(Error::Structure(format!("{name} alternatives must differ only in spin")));
        }
        if a.sigma == b.sigma {
            return Err(Error::Structure(format!("{name} alternatives carry the same spin")));
        }
    }
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let paths = vec![
        Path::new(vec![pw1_states.0, pw2_states.0], amp),
        Path::new(vec![pw1_states.1, pw2_states.1], amp),
    ];
    QObject::new(id, ObjectKind::PwCollection, paths)
}

/// Rescale amplitudes by one positive real so that `sum |amp|^2 = 1`.
pub fn normalize(q: &QObject) -> Result<QObject> {
    let n2 = q.norm2();
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(Error::DegenerateObject(format!("{} has total weight {n2}", q.id)));
    }
    let k = 1.0 / n2.sqrt();
    let mut out = q.clone();
    for p in &mut out.paths {
        p.amplitude *= k;
    }
    Ok(out)
}

/// Born probability of path `i`.
pub fn path_probability(q: &QObject, i: usize) -> Result<f64> {
    let len = q.paths.len();
    let p = q.paths.get(i).ok_or(Error::Index { index: i, len })?;
    let n2 = q.norm2();
    if !(n2 > 0.0) {
        return Err(Error::DegenerateObject(format!("{} has total weight {n2}", q.id)));
    }
    Ok(p.amplitude.norm_sqr() / n2)
}

/// Indices (ascending) of the `max_paths` largest-amplitude paths, stable
/// on ties.
pub fn truncation_survivors(q: &QObject, max_paths: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..q.paths.len()).collect();
    order.sort_by(|&a, &b| {
        q.paths[b]
            .amplitude
            .norm_sqr()
            .total_cmp(&q.paths[a].amplitude.norm_sqr())
            .then(a.cmp(&b))
    });
    order.truncate(max_paths);
    order.sort_unstable();
    order
}

/// Keep the `max_paths` largest-amplitude paths and renormalize. Returns
/// the number of dropped paths.
pub fn truncate_paths(q: &mut QObject, max_paths: usize) -> Result<usize> {
    if q.paths.len() <= max_paths {
        return Ok(0);
    }
    let keep = truncation_survivors(q, max_paths);
    let dropped = q.paths.len() - keep.len();
    let paths = std::mem::take(&mut q.paths);
    q.paths = paths
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.binary_search(i).is_ok())
        .map(|(_, p)| p)
        .collect();
    *q = normalize(q)?;
    log::warn!("{}: truncated {dropped} paths to respect max_paths = {max_paths}", q.id);
    Ok(dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::ELECTRON_MASS;
    use proptest::prelude::*;

    fn origin() -> Position {
        Position::at(Coord::origin(3))
    }

    fn electron(sigma: SpinState) -> StateElement {
        StateElement::new(
            ParticleType::Electron,
            FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0),
            sigma,
            origin(),
        )
        .unwrap()
    }

    fn positron(sigma: SpinState) -> StateElement {
        StateElement::new(
            ParticleType::Positron,
            FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0),
            sigma,
            origin(),
        )
        .unwrap()
    }

    fn with_amplitudes(amps: &[Complex64]) -> QObject {
        let paths = amps.iter().map(|a| Path::new(vec![electron(SpinState::Up)], *a)).collect();
        QObject { id: ObjectId(7), kind: ObjectKind::ParticleWave, paths }
    }

    #[test]
    fn rest_electron_particle_wave() {
        let q = make_particle_wave(
            ObjectId(1),
            ParticleType::Electron,
            FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0),
            SpinState::Up,
            origin(),
        )
        .unwrap();
        assert_eq!(q.kind, ObjectKind::ParticleWave);
        assert_eq!(q.paths.len(), 1);
        assert_eq!(q.paths[0].amplitude, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn massless_photon_accepted_and_off_shell_rejected() {
        let ok = make_particle_wave(
            ObjectId(1),
            ParticleType::Photon,
            FourMomentum::new(1.0, 0.0, 0.0, 1.0),
            SpinState::Plus,
            origin(),
        );
        assert!(ok.is_ok());
        let bad = make_particle_wave(
            ObjectId(1),
            ParticleType::Photon,
            FourMomentum::new(1.0, 0.0, 0.0, 0.5),
            SpinState::Plus,
            origin(),
        );
        assert!(matches!(bad, Err(Error::OnShellViolation { .. })));
    }

    #[test]
    fn spin_label_must_match_statistics() {
        let r = make_particle_wave(
            ObjectId(1),
            ParticleType::Photon,
            FourMomentum::new(1.0, 0.0, 0.0, 1.0),
            SpinState::Up,
            origin(),
        );
        assert!(matches!(r, Err(Error::SpinDomain { .. })));
        let r = make_particle_wave(
            ObjectId(1),
            ParticleType::Electron,
            FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0),
            SpinState::Minus,
            origin(),
        );
        assert!(matches!(r, Err(Error::SpinDomain { .. })));
    }

    #[test]
    fn entangled_pair_structure() {
        use SpinState::*;
        let q = make_entangled_pair(
            ObjectId(3),
            (electron(Up), electron(Down)),
            (positron(Down), positron(Up)),
        )
        .unwrap();
        assert_eq!(q.kind, ObjectKind::PwCollection);
        assert_eq!(q.paths.len(), 2);
        let sig: Vec<(SpinState, SpinState)> =
            q.paths.iter().map(|p| (p.elements[0].sigma, p.elements[1].sigma)).collect();
        assert_eq!(sig, vec![(Up, Down), (Down, Up)]);
        for p in &q.paths {
            assert!((p.amplitude.re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
            assert_eq!(p.types(), vec![ParticleType::Electron, ParticleType::Positron]);
        }
        let n = normalize(&q).unwrap();
        for (a, b) in n.paths.iter().zip(&q.paths) {
            assert!((a.amplitude - b.amplitude).norm() < 1e-15);
        }
        for i in 0..2 {
            assert!((path_probability(&q, i).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn entangled_pair_rejects_mismatched_types() {
        use SpinState::*;
        let r = make_entangled_pair(
            ObjectId(3),
            (electron(Up), positron(Down)),
            (positron(Down), positron(Up)),
        );
        assert!(matches!(r, Err(Error::Structure(_))));
    }

    #[test]
    fn normalize_examples() {
        let c = |re, im| Complex64::new(re, im);
        let q = normalize(&with_amplitudes(&[c(2.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(q.paths[0].amplitude, c(1.0, 0.0));
        assert_eq!(q.paths[1].amplitude, c(0.0, 0.0));
        let q = normalize(&with_amplitudes(&[c(1.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert!((q.paths[0].amplitude.re - 1.0 / 2f64.sqrt()).abs() < 1e-16);
        let r = normalize(&with_amplitudes(&[c(0.0, 0.0), c(0.0, 0.0)]));
        assert!(matches!(r, Err(Error::DegenerateObject(_))));
    }

    #[test]
    fn path_probability_examples() {
        let c = |re, im| Complex64::new(re, im);
        let q = with_amplitudes(&[c(1.0, 0.0), c(0.0, 2.0)]);
        assert!((path_probability(&q, 0).unwrap() - 0.2).abs() < 1e-15);
        assert!((path_probability(&q, 1).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(path_probability(&q, 2), Err(Error::Index { index: 2, len: 2 })));
        let single = with_amplitudes(&[c(0.3, -0.4)]);
        assert_eq!(path_probability(&single, 0).unwrap(), 1.0);
    }

    #[test]
    fn truncation_keeps_largest_and_renormalizes() {
        let c = |re| Complex64::new(re, 0.0);
        let mut q = with_amplitudes(&[c(0.1), c(0.5), c(0.3), c(0.5)]);
        let dropped = truncate_paths(&mut q, 2).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(q.paths.len(), 2);
        assert!((q.norm2() - 1.0).abs() < NORM_TOL);
        assert!((q.paths[0].amplitude.re - q.paths[1].amplitude.re).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn normalized_weight_is_one(amps in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)) {
            let amps: Vec<Complex64> = amps.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let q = with_amplitudes(&amps);
            prop_assume!(q.norm2() > 1e-6);
            let n = normalize(&q).unwrap();
            prop_assert!((n.norm2() - 1.0).abs() <= NORM_TOL);
            let total: f64 = (0..n.paths.len()).map(|i| path_probability(&n, i).unwrap()).sum();
            prop_assert!((total - 1.0).abs() <= NORM_TOL);
        }

        #[test]
        fn probabilities_ignore_global_phase(
            amps in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let amps: Vec<Complex64> = amps.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let q = with_amplitudes(&amps);
            prop_assume!(q.norm2() > 1e-6);
            let rot = Complex64::from_polar(1.0, theta);
            let r = with_amplitudes(&amps.iter().map(|a| a * rot).collect::<Vec<_>>());
            for i in 0..q.paths.len() {
                let d = path_probability(&q, i).unwrap() - path_probability(&r, i).unwrap();
                prop_assert!(d.abs() <= 1e-12);
            }
        }
    }
}
