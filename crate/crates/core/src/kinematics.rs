//! Four-vectors with metric signature (+,-,-,-).

use std::ops::{Add, Neg, Sub};

/// Spacing of the dyadic grid that external momentum components live on.
///
/// Every component is an integer multiple of this power of two, so sums and
/// differences of momenta below `2^53 * MOMENTUM_QUANTUM` (about 8 GeV) are
/// exact in floating point.
pub const MOMENTUM_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FourMomentum {
    pub e: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl FourMomentum {
    pub const ZERO: FourMomentum = FourMomentum { e: 0.0, px: 0.0, py: 0.0, pz: 0.0 };

    pub const fn new(e: f64, px: f64, py: f64, pz: f64) -> Self {
        FourMomentum { e, px, py, pz }
    }

    /// On-shell momentum for mass `m` and three-momentum `p`.
    pub fn on_shell(m: f64, p: [f64; 3]) -> Self {
        let e = (m * m + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        FourMomentum::new(e, p[0], p[1], p[2])
    }

    pub fn components(&self) -> [f64; 4] {
        [self.e, self.px, self.py, self.pz]
    }

    pub fn from_components(c: [f64; 4]) -> Self {
        FourMomentum::new(c[0], c[1], c[2], c[3])
    }

    pub fn three(&self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn dot(&self, other: &FourMomentum) -> f64 {
        self.e * other.e - self.px * other.px - self.py * other.py - self.pz * other.pz
    }

    /// Invariant mass squared `p.p`.
    pub fn m2(&self) -> f64 {
        self.dot(self)
    }

    pub fn p3_norm2(&self) -> f64 {
        self.px * self.px + self.py * self.py + self.pz * self.pz
    }

    pub fn p3_norm(&self) -> f64 {
        self.p3_norm2().sqrt()
    }

    pub fn scale(&self, k: f64) -> FourMomentum {
        FourMomentum::new(self.e * k, self.px * k, self.py * k, self.pz * k)
    }

    /// Boost velocity `p/E` of a frame in which this momentum is at rest.
    pub fn velocity(&self) -> [f64; 3] {
        [self.px / self.e, self.py / self.e, self.pz / self.e]
    }

    /// Lorentz boost by velocity `beta` (a rest-frame vector is carried to
    /// the frame where the rest frame moves with `beta`).
    pub fn boost(&self, beta: [f64; 3]) -> FourMomentum {
        let b2 = beta[0] * beta[0] + beta[1] * beta[1] + beta[2] * beta[2];
        if b2 == 0.0 {
            return *self;
        }
        let gamma = 1.0 / (1.0 - b2).sqrt();
        let bp = beta[0] * self.px + beta[1] * self.py + beta[2] * self.pz;
        let g2 = (gamma - 1.0) / b2;
        let k = g2 * bp + gamma * self.e;
        FourMomentum::new(
            gamma * (self.e + bp),
            self.px + k * beta[0],
            self.py + k * beta[1],
            self.pz + k * beta[2],
        )
    }

    /// Rotation of the spatial part by angle `phi` about the z axis.
    pub fn rotate_z(&self, phi: f64) -> FourMomentum {
        let (s, c) = phi.sin_cos();
        FourMomentum::new(self.e, c * self.px - s * self.py, s * self.px + c * self.py, self.pz)
    }

    /// Snap every component onto the [`MOMENTUM_QUANTUM`] grid.
    pub fn quantized(&self) -> FourMomentum {
        let q = |x: f64| (x / MOMENTUM_QUANTUM).round() * MOMENTUM_QUANTUM;
        FourMomentum::new(q(self.e), q(self.px), q(self.py), q(self.pz))
    }

    pub fn is_quantized(&self) -> bool {
        self.components()
            .iter()
            .all(|x| (x / MOMENTUM_QUANTUM).fract() == 0.0)
    }

    /// Polar and azimuthal angle of the three-momentum.
    pub fn angles(&self) -> (f64, f64) {
        let p = self.p3_norm();
        if p == 0.0 {
            return (0.0, 0.0);
        }
        ((self.pz / p).clamp(-1.0, 1.0).acos(), self.py.atan2(self.px))
    }
}

impl Add for FourMomentum {
    type Output = FourMomentum;
    fn add(self, o: FourMomentum) -> FourMomentum {
        FourMomentum::new(self.e + o.e, self.px + o.px, self.py + o.py, self.pz + o.pz)
    }
}

impl Sub for FourMomentum {
    type Output = FourMomentum;
    fn sub(self, o: FourMomentum) -> FourMomentum {
        FourMomentum::new(self.e - o.e, self.px - o.px, self.py - o.py, self.pz - o.pz)
    }
}

impl Neg for FourMomentum {
    type Output = FourMomentum;
    fn neg(self) -> FourMomentum {
        FourMomentum::new(-self.e, -self.px, -self.py, -self.pz)
    }
}

/// Rotation taking the z axis onto the unit vector `axis`, applied to `v`.
pub fn rotate_from_z(v: [f64; 3], axis: [f64; 3]) -> [f64; 3] {
    let (theta, phi) = FourMomentum::new(0.0, axis[0], axis[1], axis[2]).angles();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    // R = Rz(phi) * Ry(theta)
    let x = ct * v[0] + st * v[2];
    let y = v[1];
    let z = -st * v[0] + ct * v[2];
    [cp * x - sp * y, sp * x + cp * y, z]
}

/// Two-body momentum in the rest frame of an invariant mass `sqrt_s`.
pub fn two_body_momentum(sqrt_s: f64, m1: f64, m2: f64) -> Option<f64> {
    if sqrt_s < m1 + m2 {
        return None;
    }
    let s = sqrt_s * sqrt_s;
    let lambda = (s - (m1 + m2).powi(2)) * (s - (m1 - m2).powi(2));
    Some(lambda.max(0.0).sqrt() / (2.0 * sqrt_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boost_preserves_invariant_mass() {
        let p = FourMomentum::on_shell(0.511, [0.3, -0.2, 1.1]);
        let b = p.boost([0.4, 0.1, -0.6]);
        assert!((b.m2() - p.m2()).abs() < 1e-12);
    }

    #[test]
    fn boost_of_rest_momentum_gives_velocity() {
        let p = FourMomentum::on_shell(2.0, [1.0, 0.5, -0.3]);
        let rest = FourMomentum::new(2.0, 0.0, 0.0, 0.0);
        let b = rest.boost(p.velocity());
        for (x, y) in b.components().iter().zip(p.components()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_from_z_maps_z_to_axis() {
        let axis = [0.6, 0.0, 0.8];
        let r = rotate_from_z([0.0, 0.0, 1.0], axis);
        for i in 0..3 {
            assert!((r[i] - axis[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn threshold_momentum() {
        assert_eq!(two_body_momentum(1.0, 0.5, 0.5), Some(0.0));
        assert!(two_body_momentum(0.99, 0.5, 0.5).is_none());
        let p = two_body_momentum(10.0, 0.0, 0.0).unwrap();
        assert!((p - 5.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn quantized_arithmetic_is_exact(
            a in prop::array::uniform4(-4000.0f64..4000.0),
            b in prop::array::uniform4(-4000.0f64..4000.0),
        ) {
            let a = FourMomentum::from_components(a).quantized();
            let b = FourMomentum::from_components(b).quantized();
            let c = a - b;
            prop_assert!(c.is_quantized());
            prop_assert_eq!(b + c, a);
            prop_assert_eq!(c + b, a);
        }
    }
}
