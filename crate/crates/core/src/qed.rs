//! Tree-level QED amplitudes.
//!
//! Channels are evaluated from their vertex list: every vertex contributes
//! `-ie gamma^mu` between the wave functions on its fermion legs and the
//! single internal line contributes its propagator. Bhabha scattering also
//! has dedicated closed evaluations and a spin-averaged oracle.

use num_complex::Complex64;

use crate::channel::{IaChannel, Line, Vertex, VertexLeg};
use crate::dirac::{
    contract, current, polarization, u_spinor, u_spinor_with_mass, v_spinor, v_spinor_with_mass, CMatrix4,
    DiracSpinor, GammaAlgebra,
};
use crate::error::{Error, Result};
use crate::kinematics::FourMomentum;
use crate::particle::{coupling_from_alpha, ParticleType, DEFAULT_ALPHA, ELECTRON_MASS};
use crate::qstate::{SpinState, StateElement};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative size below which a propagator denominator counts as a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeOptions {
    /// Electric charge `e`.
    pub coupling: f64,
    /// `lambda` in the photon propagator numerator `g + lambda q q`.
    pub gauge_shift: f64,
    /// Replaces every fermion mass, and skips the on-shell check, when set.
    pub fermion_mass: Option<f64>,
}

impl Default for AmplitudeOptions {
    fn default() -> Self {
        AmplitudeOptions { coupling: coupling_from_alpha(DEFAULT_ALPHA), gauge_shift: 0.0, fermion_mass: None }
    }
}

impl AmplitudeOptions {
    pub fn with_coupling(coupling: f64) -> Self {
        AmplitudeOptions { coupling, ..Default::default() }
    }

    fn mass(&self, t: ParticleType) -> f64 {
        self.fermion_mass.unwrap_or(t.mass())
    }
}

/// An external leg's wave function.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalWave {
    Spinor(DiracSpinor),
    /// Photon polarization, already conjugated for outgoing photons.
    Vector([Complex64; 4]),
}

impl ExternalWave {
    fn spinor(&self) -> &DiracSpinor {
        match self {
            ExternalWave::Spinor(s) => s,
            ExternalWave::Vector(_) => panic!("photon leg where a fermion was expected"),
        }
    }

    fn vector(&self) -> [Complex64; 4] {
        match self {
            ExternalWave::Vector(v) => *v,
            ExternalWave::Spinor(_) => panic!("fermion leg where a photon was expected"),
        }
    }
}

/// Wave function of an external state, by direction: `u`, `vbar`, `eps`
/// coming in and `ubar`, `v`, `eps*` going out.
pub fn external_wave(el: &StateElement, incoming: bool, opts: &AmplitudeOptions) -> Result<ExternalWave> {
    let t = el.ptype;
    if !t.is_fermion() {
        let eps = polarization(&el.p, el.sigma)?;
        return Ok(ExternalWave::Vector(if incoming { eps } else { eps.map(|c| c.conj()) }));
    }
    let anti = t.is_antifermion();
    let col = match opts.fermion_mass {
        Some(m) if anti => v_spinor_with_mass(&el.p, el.sigma, m, t),
        Some(m) => u_spinor_with_mass(&el.p, el.sigma, m, t),
        None if anti => v_spinor(t, &el.p, el.sigma)?,
        None => u_spinor(t, &el.p, el.sigma)?,
    };
    // adjoint for an incoming antifermion or an outgoing fermion
    Ok(ExternalWave::Spinor(if incoming == anti { col.bar() } else { col }))
}

/// External wave functions indexed `[in0, in1, out0, out1]`.
pub fn external_waves(
    ins: [&StateElement; 2],
    outs: [&StateElement; 2],
    opts: &AmplitudeOptions,
) -> Result<[ExternalWave; 4]> {
    Ok([
        external_wave(ins[0], true, opts)?,
        external_wave(ins[1], true, opts)?,
        external_wave(outs[0], false, opts)?,
        external_wave(outs[1], false, opts)?,
    ])
}

fn slot_of(leg: &VertexLeg) -> usize {
    match leg.line {
        Line::In(i) => i,
        Line::Out(i) => 2 + i,
        Line::Internal => unreachable!("internal leg has no external wave"),
    }
}

fn external_leg(v: &Vertex, pick: impl Fn(&VertexLeg) -> bool) -> &VertexLeg {
    v.legs
        .iter()
        .find(|l| l.line != Line::Internal && pick(l))
        .expect("vertex leg present")
}

/// Amplitude of one channel at the given external states.
pub fn channel_amplitude(
    c: &IaChannel,
    ins: [&StateElement; 2],
    outs: [&StateElement; 2],
    opts: &AmplitudeOptions,
) -> Result<Complex64> {
    for (el, t) in ins.iter().zip(c.in_types).chain(outs.iter().zip(c.out_types)) {
        if el.ptype != t {
            return Err(Error::Structure(format!("channel expects {t}, state holds {}", el.ptype)));
        }
    }
    let waves = external_waves(ins, outs, opts)?;
    let q = c.internal_momentum([&ins[0].p, &ins[1].p], [&outs[0].p, &outs[1].p]);
    let scale = ins.iter().chain(outs.iter()).map(|e| e.p.e * e.p.e).fold(0.0, f64::max);
    evaluate_channel(c, &waves, &q, scale, opts)
}

/// Channel amplitude from explicit external wave functions and internal
/// momentum `q` (flowing from the first operation to the second).
pub fn evaluate_channel(
    c: &IaChannel,
    waves: &[ExternalWave; 4],
    q: &FourMomentum,
    scale: f64,
    opts: &AmplitudeOptions,
) -> Result<Complex64> {
    let g = GammaAlgebra::get();
    let vertex = Complex64::new(0.0, -opts.coupling);
    let t = c.intermediate_type;
    if !t.is_fermion() {
        let q2 = q.m2();
        let q_up = q.components().map(Complex64::from);
        if q2.abs() <= POLE_TOLERANCE * scale {
            return Err(Error::PropagatorPole { line: t, q2 });
        }
        let j = [0, 1].map(|k| {
            let v = &c.vertices[k];
            let adj = waves[slot_of(v.arrow_out_leg())].spinor();
            let col = waves[slot_of(v.arrow_in_leg())].spinor();
            current(adj, col)
        });
        let mut numerator = contract(&j[0], &j[1]);
        if opts.gauge_shift != 0.0 {
            numerator += contract(&j[0], &q_up) * contract(&q_up, &j[1]) * opts.gauge_shift;
        }
        return Ok(vertex * vertex * (-I) * numerator / q2);
    }
    // fermion line: the chain starts where the internal arrow leaves
    let (start, end, k) = if c.vertices[0].arrow_out_leg().line == Line::Internal {
        (&c.vertices[0], &c.vertices[1], *q)
    } else {
        (&c.vertices[1], &c.vertices[0], -*q)
    };
    let m = opts.mass(t);
    let den = k.m2() - m * m;
    if den.abs() <= POLE_TOLERANCE * scale {
        return Err(Error::PropagatorPole { line: t, q2: k.m2() });
    }
    let col = waves[slot_of(start.arrow_in_leg())].spinor();
    let adj = waves[slot_of(end.arrow_out_leg())].spinor();
    let eps_a = waves[slot_of(external_leg(start, |l| !l.ptype.is_fermion()))].vector();
    let eps_b = waves[slot_of(external_leg(end, |l| !l.ptype.is_fermion()))].vector();
    let propagator: CMatrix4 = (g.slash_real(&k) + CMatrix4::identity() * Complex64::from(m)) * (I / den);
    let chain = g.slash(eps_b) * propagator * g.slash(eps_a);
    Ok(vertex * vertex * adj.sandwich(&chain, col))
}

/// External momenta and spins of `e-(p1) e+(p2) -> e-(p1') e+(p2')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhabhaKinematics {
    pub p1: FourMomentum,
    pub p2: FourMomentum,
    pub p1_out: FourMomentum,
    pub p2_out: FourMomentum,
    pub mass: f64,
}

impl BhabhaKinematics {
    /// Centre-of-mass configuration with the electron along +z and the
    /// outgoing electron at `(theta, phi)`.
    pub fn cm(sqrt_s: f64, theta: f64, phi: f64, mass: f64) -> Result<Self> {
        if sqrt_s <= 2.0 * mass {
            return Err(Error::Kinematics(format!("sqrt(s) = {sqrt_s} below pair threshold")));
        }
        let e = sqrt_s / 2.0;
        let p = (e * e - mass * mass).sqrt();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let n = [st * cp, st * sp, ct];
        Ok(BhabhaKinematics {
            p1: FourMomentum::new(e, 0.0, 0.0, p),
            p2: FourMomentum::new(e, 0.0, 0.0, -p),
            p1_out: FourMomentum::new(e, p * n[0], p * n[1], p * n[2]),
            p2_out: FourMomentum::new(e, -p * n[0], -p * n[1], -p * n[2]),
            mass,
        })
    }

    /// Electron mass, centre-of-mass frame.
    pub fn physical(sqrt_s: f64, theta: f64, phi: f64) -> Result<Self> {
        Self::cm(sqrt_s, theta, phi, ELECTRON_MASS)
    }

    pub fn s(&self) -> f64 {
        (self.p1 + self.p2).m2()
    }

    pub fn t(&self) -> f64 {
        (self.p1 - self.p1_out).m2()
    }

    pub fn u(&self) -> f64 {
        (self.p1 - self.p2_out).m2()
    }

    /// Same event with every three-momentum rotated by `phi` about z.
    pub fn rotated_z(&self, phi: f64) -> Self {
        BhabhaKinematics {
            p1: self.p1.rotate_z(phi),
            p2: self.p2.rotate_z(phi),
            p1_out: self.p1_out.rotate_z(phi),
            p2_out: self.p2_out.rotate_z(phi),
            mass: self.mass,
        }
    }
}

/// Spins `(s1, s2, s1', s2')`.
pub type BhabhaSpins = [SpinState; 4];

/// All sixteen fermion spin assignments, `s1` slowest.
pub fn bhabha_spin_configurations() -> Vec<BhabhaSpins> {
    let d = [SpinState::Up, SpinState::Down];
    let mut out = Vec::with_capacity(16);
    for a in d {
        for b in d {
            for c in d {
                for e in d {
                    out.push([a, b, c, e]);
                }
            }
        }
    }
    out
}

/// Spinors `u1, vbar2, ubar1', v2'` of a Bhabha event.
pub fn bhabha_spinors(kin: &BhabhaKinematics, s: &BhabhaSpins) -> [DiracSpinor; 4] {
    let m = kin.mass;
    [
        u_spinor_with_mass(&kin.p1, s[0], m, ParticleType::Electron),
        v_spinor_with_mass(&kin.p2, s[1], m, ParticleType::Positron).bar(),
        u_spinor_with_mass(&kin.p1_out, s[2], m, ParticleType::Electron).bar(),
        v_spinor_with_mass(&kin.p2_out, s[3], m, ParticleType::Positron),
    ]
}

fn photon_exchange(j1: [Complex64; 4], j2: [Complex64; 4], q2: f64, e: f64) -> Result<Complex64> {
    if q2 == 0.0 {
        return Err(Error::PropagatorPole { line: ParticleType::Photon, q2 });
    }
    let v = Complex64::new(0.0, -e);
    Ok(v * v * contract(&j1, &j2) * (-I) / q2)
}

/// Annihilation diagram,
/// `(-ie)^2 [vbar2 g_mu u1] (-i g^{mu nu} / (p1 + p2)^2) [ubar1' g_nu v2']`.
pub fn bhabha_ma(kin: &BhabhaKinematics, s: &BhabhaSpins, e: f64) -> Result<Complex64> {
    let [u1, vb2, ub1, v2] = bhabha_spinors(kin, s);
    photon_exchange(current(&vb2, &u1), current(&ub1, &v2), kin.s(), e)
}

/// Exchange diagram,
/// `(-ie)^2 [ubar1' g_mu u1] (-i g^{mu nu} / (p1 - p1')^2) [vbar2 g_nu v2']`.
pub fn bhabha_mb(kin: &BhabhaKinematics, s: &BhabhaSpins, e: f64) -> Result<Complex64> {
    let [u1, vb2, ub1, v2] = bhabha_spinors(kin, s);
    photon_exchange(current(&ub1, &u1), current(&vb2, &v2), kin.t(), e)
}

/// `M = M_A - M_B`.
pub fn bhabha_total(kin: &BhabhaKinematics, s: &BhabhaSpins, e: f64) -> Result<Complex64> {
    Ok(bhabha_ma(kin, s, e)? - bhabha_mb(kin, s, e)?)
}

/// `(1/4) sum |M_A - M_B|^2` from the spinor evaluation.
pub fn bhabha_spin_averaged(kin: &BhabhaKinematics, e: f64) -> Result<f64> {
    let mut sum = 0.0;
    for s in bhabha_spin_configurations() {
        sum += bhabha_total(kin, &s, e)?.norm_sqr();
    }
    Ok(sum / 4.0)
}

/// Massless spin-averaged Bhabha matrix element
/// `2 e^4 [(s^2 + u^2)/t^2 + 2u^2/(st) + (t^2 + u^2)/s^2]`.
pub fn spin_averaged_m2(s: f64, t: f64, u: f64, e: f64) -> Result<f64> {
    for q2 in [s, t] {
        if q2 == 0.0 {
            return Err(Error::PropagatorPole { line: ParticleType::Photon, q2 });
        }
    }
    let e4 = e.powi(4);
    Ok(2.0 * e4 * ((s * s + u * u) / (t * t) + 2.0 * u * u / (s * t) + (t * t + u * u) / (s * s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{instantiate_channels, reduce_equivalent, RuleTable};
    use crate::qstate::Position;
    use SpinState::*;

    fn el(t: ParticleType, p: FourMomentum, s: SpinState) -> StateElement {
        StateElement::external_unchecked(t, p, s, Position::at(vec![0].into()))
    }

    #[test]
    fn oracle_at_right_angle() {
        let s = 4.0;
        let m2 = spin_averaged_m2(s, -s / 2.0, -s / 2.0, 1.0).unwrap();
        assert!((m2 - 9.0).abs() < 1e-12);
        assert!(matches!(spin_averaged_m2(0.0, -1.0, 1.0, 1.0), Err(Error::PropagatorPole { .. })));
    }

    #[test]
    fn bhabha_matches_oracle_nearly_massless() {
        let sqrt_s = 50.0;
        for &theta in &[0.3, 1.0, 1.7, 2.5] {
            let kin = BhabhaKinematics::cm(sqrt_s, theta, 0.4, 1e-6 * sqrt_s).unwrap();
            let got = bhabha_spin_averaged(&kin, 0.3).unwrap();
            let want = spin_averaged_m2(kin.s(), kin.t(), kin.u(), 0.3).unwrap();
            assert!(((got - want) / want).abs() < 1e-8, "theta {theta}: {got} vs {want}");
        }
    }

    #[test]
    fn channels_reproduce_bhabha_diagrams() {
        let chs = reduce_equivalent(
            &instantiate_channels(ParticleType::Electron, ParticleType::Positron, &RuleTable::qed()).unwrap(),
        );
        let ee: Vec<&IaChannel> =
            chs.iter().filter(|c| c.out_types == [ParticleType::Electron, ParticleType::Positron]).collect();
        let kin = BhabhaKinematics::physical(20.0, 1.1, 2.0).unwrap();
        let opts = AmplitudeOptions::with_coupling(0.3);
        for s in bhabha_spin_configurations() {
            let ins = [el(ParticleType::Electron, kin.p1, s[0]), el(ParticleType::Positron, kin.p2, s[1])];
            let outs = [el(ParticleType::Electron, kin.p1_out, s[2]), el(ParticleType::Positron, kin.p2_out, s[3])];
            let a = channel_amplitude(ee[0], [&ins[0], &ins[1]], [&outs[0], &outs[1]], &opts).unwrap();
            let b = channel_amplitude(ee[1], [&ins[0], &ins[1]], [&outs[0], &outs[1]], &opts).unwrap();
            let ma = bhabha_ma(&kin, &s, 0.3).unwrap();
            let mb = bhabha_mb(&kin, &s, 0.3).unwrap();
            assert!((a - ma).norm() <= 1e-12 * ma.norm().max(1e-300));
            assert!((b - mb).norm() <= 1e-12 * mb.norm().max(1e-300));
            let merged = a + b * f64::from(ee[1].sign);
            assert!((merged - bhabha_total(&kin, &s, 0.3).unwrap()).norm() < 1e-12 * merged.norm().max(1.0));
        }
    }

    /// Compton amplitudes vanish when one photon polarization is replaced by
    /// its momentum.
    #[test]
    fn compton_ward_identity() {
        let rules = RuleTable::qed();
        let chs = reduce_equivalent(&instantiate_channels(ParticleType::Electron, ParticleType::Photon, &rules).unwrap());
        let compton: Vec<&IaChannel> =
            chs.iter().filter(|c| c.out_types == [ParticleType::Electron, ParticleType::Photon]).collect();
        assert_eq!(compton.len(), 2);
        let m = ELECTRON_MASS;
        let p = FourMomentum::on_shell(m, [0.0, 0.0, 3.0]);
        let k = FourMomentum::new(3.0, 0.0, 0.0, -3.0);
        let total = p + k;
        let grid = crate::channel::outcome_grid(
            &total,
            (ParticleType::Electron, ParticleType::Photon),
            3,
            [0.0, 0.0, 1.0],
        )
        .unwrap()
        .unwrap();
        let opts = AmplitudeOptions::with_coupling(1.0);
        for pt in grid.iter().take(5) {
            for (s_in, s_out, h_out) in [(Up, Down, Minus), (Up, Up, Plus), (Down, Up, Minus), (Down, Down, Plus)] {
                let ins = [el(ParticleType::Electron, p, s_in), el(ParticleType::Photon, k, Plus)];
                let outs = [el(ParticleType::Electron, pt.pb, s_out), el(ParticleType::Photon, pt.pc, h_out)];
                let mut waves = external_waves([&ins[0], &ins[1]], [&outs[0], &outs[1]], &opts).unwrap();
                waves[1] = ExternalWave::Vector(k.components().map(Complex64::from));
                let mut sum = Complex64::new(0.0, 0.0);
                let mut size = 0.0f64;
                for c in &compton {
                    let q = c.internal_momentum([&p, &k], [&pt.pb, &pt.pc]);
                    let a = evaluate_channel(c, &waves, &q, 9.0, &opts).unwrap();
                    sum += a * f64::from(c.sign);
                    size = size.max(a.norm());
                }
                // individual terms are O(e^2 E) for these kinematics
                assert!(sum.norm() <= 1e-10 * size.max(1.0), "{sum} vs {size}");
            }
        }
    }

    #[test]
    fn equivalent_channels_have_equal_amplitudes() {
        let rules = RuleTable::qed();
        let chs = instantiate_channels(ParticleType::Electron, ParticleType::Positron, &rules).unwrap();
        let kin = BhabhaKinematics::physical(15.0, 0.8, -0.5).unwrap();
        let opts = AmplitudeOptions::default();
        let s = [Up, Down, Down, Down];
        let ins = [el(ParticleType::Electron, kin.p1, s[0]), el(ParticleType::Positron, kin.p2, s[1])];
        let outs = [el(ParticleType::Electron, kin.p1_out, s[2]), el(ParticleType::Positron, kin.p2_out, s[3])];
        let cb1 = chs.iter().find(|c| c.shape.index == 3).unwrap();
        let cb2 = chs.iter().find(|c| c.shape.index == 5).unwrap();
        let a = channel_amplitude(cb1, [&ins[0], &ins[1]], [&outs[0], &outs[1]], &opts).unwrap();
        let b = channel_amplitude(cb2, [&ins[0], &ins[1]], [&outs[0], &outs[1]], &opts).unwrap();
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn forward_exchange_grows_like_inverse_t() {
        let s = [Up, Up, Up, Up];
        let mut last: Option<(f64, f64)> = None;
        for theta in [0.04, 0.02, 0.01, 0.005] {
            let kin = BhabhaKinematics::physical(100.0, theta, 0.0).unwrap();
            let mb = bhabha_mb(&kin, &s, 1.0).unwrap().norm();
            if let Some((t0, m0)) = last {
                let slope = (mb / m0).ln() / (kin.t().abs() / t0).ln();
                assert!((slope + 1.0).abs() < 0.02, "slope {slope}");
            }
            last = Some((kin.t().abs(), mb));
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        let kin = BhabhaKinematics::cm(10.0, 1.2, 0.0, 1e-5).unwrap();
        let mut flipped = 0.0;
        for s in bhabha_spin_configurations() {
            flipped += (bhabha_ma(&kin, &s, 1.0).unwrap() + bhabha_mb(&kin, &s, 1.0).unwrap()).norm_sqr();
        }
        let want = spin_averaged_m2(kin.s(), kin.t(), kin.u(), 1.0).unwrap();
        assert!((flipped / 4.0 - want).abs() > 1e-3 * want);
    }

    #[test]
    fn pole_is_reported() {
        let chs = instantiate_channels(ParticleType::Electron, ParticleType::Positron, &RuleTable::qed()).unwrap();
        let kin = BhabhaKinematics::physical(10.0, 0.0, 0.0).unwrap();
        let ins = [el(ParticleType::Electron, kin.p1, Up), el(ParticleType::Positron, kin.p2, Up)];
        let outs = [el(ParticleType::Electron, kin.p1_out, Up), el(ParticleType::Positron, kin.p2_out, Up)];
        let r = channel_amplitude(&chs[4], [&ins[0], &ins[1]], [&outs[0], &outs[1]], &AmplitudeOptions::default());
        assert!(matches!(r, Err(Error::PropagatorPole { line: ParticleType::Photon, .. })));
    }
}
