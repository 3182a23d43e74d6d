//! Dirac algebra in the Dirac representation.
//!
//! Spinors are normalized to `ubar u = 2m`, `vbar v = -2m`, with spin
//! quantized along z in the rest frame. Antiparticle spinors follow
//! `v(p, s) = i gamma^2 u(p, s)*`.

use std::sync::OnceLock;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kinematics::FourMomentum;
use crate::particle::ParticleType;
use crate::qstate::{check_on_shell, SpinState, DEFAULT_ON_SHELL_TOL};

pub type CMatrix4 = Matrix4<Complex64>;
pub type CVector4 = Vector4<Complex64>;

/// Metric diagonal `g^{mu mu}`.
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `gamma^0 .. gamma^3`, built once.
pub struct GammaAlgebra {
    pub gamma: [CMatrix4; 4],
}

impl GammaAlgebra {
    fn build() -> Self {
        let pauli: [[[Complex64; 2]; 2]; 3] = [
            [[ZERO, ONE], [ONE, ZERO]],
            [[ZERO, -I], [I, ZERO]],
            [[ONE, ZERO], [ZERO, -ONE]],
        ];
        let mut gamma = [CMatrix4::zeros(); 4];
        for k in 0..2 {
            gamma[0][(k, k)] = ONE;
            gamma[0][(k + 2, k + 2)] = -ONE;
        }
        for (i, s) in pauli.iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    gamma[i + 1][(r, c + 2)] = s[r][c];
                    gamma[i + 1][(r + 2, c)] = -s[r][c];
                }
            }
        }
        GammaAlgebra { gamma }
    }

    pub fn get() -> &'static GammaAlgebra {
        static ALGEBRA: OnceLock<GammaAlgebra> = OnceLock::new();
        ALGEBRA.get_or_init(GammaAlgebra::build)
    }

    /// `gamma^mu a_mu` for a contravariant four-vector `a`.
    pub fn slash(&self, a: [Complex64; 4]) -> CMatrix4 {
        let mut m = CMatrix4::zeros();
        for mu in 0..4 {
            m += self.gamma[mu] * (a[mu] * METRIC[mu]);
        }
        m
    }

    pub fn slash_real(&self, p: &FourMomentum) -> CMatrix4 {
        let c = p.components();
        self.slash([c[0].into(), c[1].into(), c[2].into(), c[3].into()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinorKind {
    U,
    V,
    UBar,
    VBar,
}

/// Four-component spinor. Adjoint kinds store the row `psi^dagger gamma^0`
/// as a column of the same components.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracSpinor {
    pub components: CVector4,
    pub flavor: ParticleType,
    pub kind: SpinorKind,
}

impl DiracSpinor {
    /// Dirac adjoint `psi^dagger gamma^0`.
    pub fn bar(&self) -> DiracSpinor {
        let g0 = &GammaAlgebra::get().gamma[0];
        let row = g0.transpose() * self.components.map(|c| c.conj());
        let kind = match self.kind {
            SpinorKind::U => SpinorKind::UBar,
            SpinorKind::V => SpinorKind::VBar,
            SpinorKind::UBar => SpinorKind::U,
            SpinorKind::VBar => SpinorKind::V,
        };
        DiracSpinor { components: row, flavor: self.flavor, kind }
    }

    pub fn is_adjoint(&self) -> bool {
        matches!(self.kind, SpinorKind::UBar | SpinorKind::VBar)
    }

    /// `self * other` for an adjoint `self` and a column `other`.
    pub fn sandwich(&self, m: &CMatrix4, other: &DiracSpinor) -> Complex64 {
        debug_assert!(self.is_adjoint() && !other.is_adjoint());
        (self.components.transpose() * m * other.components)[(0, 0)]
    }

    pub fn inner(&self, other: &DiracSpinor) -> Complex64 {
        self.components.dot(&other.components)
    }
}

fn check_fermion(ptype: ParticleType, p: &FourMomentum, s: SpinState) -> Result<()> {
    if !ptype.is_fermion() || ptype.mass() <= 0.0 {
        return Err(Error::Kinematics(format!("{ptype} has no Dirac spinor")));
    }
    if !s.valid_for(ptype) {
        return Err(Error::SpinDomain { ptype, label: s.symbol().to_string() });
    }
    check_on_shell(ptype, p, DEFAULT_ON_SHELL_TOL)
}

fn two_spinor(s: SpinState) -> [Complex64; 2] {
    match s {
        SpinState::Up => [ONE, ZERO],
        _ => [ZERO, ONE],
    }
}

/// Positive-energy spinor with the mass supplied explicitly.
pub fn u_spinor_with_mass(p: &FourMomentum, s: SpinState, m: f64, flavor: ParticleType) -> DiracSpinor {
    let chi = two_spinor(s);
    let n = (p.e + m).sqrt();
    let k = 1.0 / (p.e + m);
    let (px, py, pz) = (p.px, p.py, p.pz);
    // sigma . p acting on chi
    let lower0 = Complex64::new(pz, 0.0) * chi[0] + Complex64::new(px, -py) * chi[1];
    let lower1 = Complex64::new(px, py) * chi[0] + Complex64::new(-pz, 0.0) * chi[1];
    let c = CVector4::new(chi[0] * n, chi[1] * n, lower0 * (n * k), lower1 * (n * k));
    DiracSpinor { components: c, flavor, kind: SpinorKind::U }
}

pub fn v_spinor_with_mass(p: &FourMomentum, s: SpinState, m: f64, flavor: ParticleType) -> DiracSpinor {
    let u = u_spinor_with_mass(p, s, m, flavor);
    let g2 = &GammaAlgebra::get().gamma[2];
    let c = (g2 * u.components.map(|c| c.conj())) * I;
    DiracSpinor { components: c, flavor, kind: SpinorKind::V }
}

/// `u(p, s)` for an on-shell massive fermion.
pub fn u_spinor(ptype: ParticleType, p: &FourMomentum, s: SpinState) -> Result<DiracSpinor> {
    check_fermion(ptype, p, s)?;
    Ok(u_spinor_with_mass(p, s, ptype.mass(), ptype))
}

pub fn v_spinor(ptype: ParticleType, p: &FourMomentum, s: SpinState) -> Result<DiracSpinor> {
    check_fermion(ptype, p, s)?;
    Ok(v_spinor_with_mass(p, s, ptype.mass(), ptype))
}

pub fn ubar_spinor(ptype: ParticleType, p: &FourMomentum, s: SpinState) -> Result<DiracSpinor> {
    u_spinor(ptype, p, s).map(|u| u.bar())
}

pub fn vbar_spinor(ptype: ParticleType, p: &FourMomentum, s: SpinState) -> Result<DiracSpinor> {
    v_spinor(ptype, p, s).map(|v| v.bar())
}

/// Helicity polarization vector `epsilon^mu(k, lambda)` of a real photon.
pub fn polarization(k: &FourMomentum, helicity: SpinState) -> Result<[Complex64; 4]> {
    if k.p3_norm2() == 0.0 {
        return Err(Error::Kinematics("photon with zero three-momentum".into()));
    }
    let (theta, phi) = k.angles();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let e1 = [ct * cp, ct * sp, -st];
    let e2 = [-sp, cp, 0.0];
    let lam = match helicity {
        SpinState::Plus => 1.0,
        SpinState::Minus => -1.0,
        _ => {
            return Err(Error::SpinDomain { ptype: ParticleType::Photon, label: helicity.symbol().into() })
        }
    };
    let f = -lam * std::f64::consts::FRAC_1_SQRT_2;
    let mut eps = [ZERO; 4];
    for i in 0..3 {
        eps[i + 1] = Complex64::new(f * e1[i], f * lam * e2[i]);
    }
    Ok(eps)
}

/// Vector current `psibar gamma^mu psi` (contravariant index).
pub fn current(adj: &DiracSpinor, col: &DiracSpinor) -> [Complex64; 4] {
    let g = GammaAlgebra::get();
    [0, 1, 2, 3].map(|mu| adj.sandwich(&g.gamma[mu], col))
}

/// Minkowski contraction `a^mu b_mu`.
pub fn contract(a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    (0..4).map(|mu| a[mu] * b[mu] * METRIC[mu]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::ELECTRON_MASS;

    fn anticommutator_ok(tol: f64) -> bool {
        let g = GammaAlgebra::get();
        for mu in 0..4 {
            for nu in 0..4 {
                let ac = g.gamma[mu] * g.gamma[nu] + g.gamma[nu] * g.gamma[mu];
                let target = if mu == nu { 2.0 * METRIC[mu] } else { 0.0 };
                for r in 0..4 {
                    for c in 0..4 {
                        let want = if r == c { target } else { 0.0 };
                        if (ac[(r, c)] - Complex64::new(want, 0.0)).norm() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn clifford_relation() {
        assert!(anticommutator_ok(1e-14));
    }

    fn momenta() -> Vec<FourMomentum> {
        vec![
            FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0),
            FourMomentum::on_shell(ELECTRON_MASS, [0.0, 0.0, 3.0]),
            FourMomentum::on_shell(ELECTRON_MASS, [0.0, 0.0, -40.0]),
            FourMomentum::on_shell(ELECTRON_MASS, [1.2, -0.7, 0.4]),
        ]
    }

    #[test]
    fn rest_frame_dirac_equation_is_exact() {
        let g = GammaAlgebra::get();
        let p = FourMomentum::new(ELECTRON_MASS, 0.0, 0.0, 0.0);
        for s in [SpinState::Up, SpinState::Down] {
            let u = u_spinor(ParticleType::Electron, &p, s).unwrap();
            let r = (g.gamma[0] - CMatrix4::identity()) * u.components;
            assert!(r.iter().all(|c| *c == ZERO));
        }
    }

    #[test]
    fn normalization_and_dirac_equation() {
        let g = GammaAlgebra::get();
        let m = ELECTRON_MASS;
        for p in momenta() {
            let ps = g.slash_real(&p);
            let id = CMatrix4::identity() * Complex64::new(m, 0.0);
            for s in [SpinState::Up, SpinState::Down] {
                let u = u_spinor(ParticleType::Electron, &p, s).unwrap();
                let v = v_spinor(ParticleType::Positron, &p, s).unwrap();
                assert!((u.bar().inner(&u).re - 2.0 * m).abs() <= 1e-10 * 2.0 * m);
                assert!((v.bar().inner(&v).re + 2.0 * m).abs() <= 1e-10 * 2.0 * m);
                let ru = (ps - id) * u.components;
                let rv = (ps + id) * v.components;
                assert!(ru.norm() <= 1e-10 * u.components.norm(), "u residual {}", ru.norm());
                assert!(rv.norm() <= 1e-10 * v.components.norm(), "v residual {}", rv.norm());
            }
        }
    }

    #[test]
    fn completeness_relation() {
        // sum_s u ubar = pslash + m, sum_s v vbar = pslash - m
        let g = GammaAlgebra::get();
        let m = ELECTRON_MASS;
        let p = FourMomentum::on_shell(m, [0.3, 0.9, -1.4]);
        let mut su = CMatrix4::zeros();
        let mut sv = CMatrix4::zeros();
        for s in [SpinState::Up, SpinState::Down] {
            let u = u_spinor(ParticleType::Electron, &p, s).unwrap();
            let v = v_spinor(ParticleType::Positron, &p, s).unwrap();
            su += u.components * u.bar().components.transpose();
            sv += v.components * v.bar().components.transpose();
        }
        let id = CMatrix4::identity() * Complex64::new(m, 0.0);
        assert!((su - (g.slash_real(&p) + id)).norm() < 1e-12);
        assert!((sv - (g.slash_real(&p) - id)).norm() < 1e-12);
    }

    #[test]
    fn off_shell_and_massless_rejected() {
        let p = FourMomentum::new(1.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            u_spinor(ParticleType::Electron, &p, SpinState::Up),
            Err(Error::OnShellViolation { .. })
        ));
        let k = FourMomentum::new(1.0, 0.0, 0.0, 1.0);
        assert!(u_spinor(ParticleType::Photon, &k, SpinState::Plus).is_err());
    }

    #[test]
    fn polarization_is_transverse_and_unit() {
        for k in [
            FourMomentum::new(2.0, 0.0, 0.0, 2.0),
            FourMomentum::new(1.0, 0.6, 0.0, -0.8),
            FourMomentum::new(3.0, -1.0, 2.0, 2.0),
        ] {
            for h in [SpinState::Plus, SpinState::Minus] {
                let e = polarization(&k, h).unwrap();
                let kc = k.components().map(|x| Complex64::new(x, 0.0));
                assert!(contract(&e, &kc).norm() < 1e-14);
                let conj = e.map(|c| c.conj());
                assert!((contract(&e, &conj) + 1.0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn gordon_current_conservation() {
        // q_mu ubar(p') gamma^mu u(p) = 0 for equal masses
        let m = ELECTRON_MASS;
        let p = FourMomentum::on_shell(m, [0.1, 0.4, 2.0]);
        let pp = FourMomentum::on_shell(m, [-0.8, 0.2, 1.1]);
        let q = (p - pp).components().map(|x| Complex64::new(x, 0.0));
        for s in [SpinState::Up, SpinState::Down] {
            for sp in [SpinState::Up, SpinState::Down] {
                let j = current(
                    &ubar_spinor(ParticleType::Electron, &pp, sp).unwrap(),
                    &u_spinor(ParticleType::Electron, &p, s).unwrap(),
                );
                assert!(contract(&j, &q).norm() < 1e-12);
            }
        }
    }
}
