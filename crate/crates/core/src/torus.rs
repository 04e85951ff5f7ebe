//! Unperturbed and perturbed cat maps on the two-torus.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};

/// Largest |k| accepted by [`IntMatrix2::pow`].
pub const POWER_CAP: i64 = 40;

/// Reduce an angle to `[0, 2π)`.
#[inline]
pub fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed distance between two angles, in `(-π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub psi1: f64,
    pub psi2: f64,
}

impl TorusPoint {
    pub fn new(psi1: f64, psi2: f64) -> Self {
        Self {
            psi1: wrap(psi1),
            psi2: wrap(psi2),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.psi1, self.psi2]
    }

    /// Euclidean distance on the flat torus.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        angle_diff(self.psi1, other.psi1).hypot(angle_diff(self.psi2, other.psi2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix2 {
    pub a11: i64,
    pub a12: i64,
    pub a21: i64,
    pub a22: i64,
}

impl IntMatrix2 {
    pub const IDENTITY: IntMatrix2 = IntMatrix2::new(1, 0, 0, 1);
    /// The Arnold cat matrix.
    pub const CAT: IntMatrix2 = IntMatrix2::new(1, 1, 1, 2);
    /// Time reversal for the cat map.
    pub const REVERSAL: IntMatrix2 = IntMatrix2::new(-1, 0, -1, 1);

    pub const fn new(a11: i64, a12: i64, a21: i64, a22: i64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn det(&self) -> i64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> i64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn is_symmetric(&self) -> bool {
        self.a12 == self.a21
    }

    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        let e = |a: i64, b: i64, c: i64, d: i64| a.checked_mul(b)?.checked_add(c.checked_mul(d)?);
        Some(Self::new(
            e(self.a11, o.a11, self.a12, o.a21)?,
            e(self.a11, o.a12, self.a12, o.a22)?,
            e(self.a21, o.a11, self.a22, o.a21)?,
            e(self.a21, o.a12, self.a22, o.a22)?,
        ))
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse(&self) -> Result<Self> {
        match self.det() {
            1 => Ok(Self::new(self.a22, -self.a12, -self.a21, self.a11)),
            -1 => Ok(Self::new(-self.a22, self.a12, self.a21, -self.a11)),
            d => Err(CatError::NotUnimodular(d)),
        }
    }

    /// Exact power; negative exponents use the inverse.
    pub fn pow(&self, k: i64) -> Result<Self> {
        if k.abs() > POWER_CAP {
            return Err(CatError::PowerCap { k, cap: POWER_CAP });
        }
        let base = if k < 0 { self.inverse()? } else { *self };
        let mut acc = Self::IDENTITY;
        for _ in 0..k.unsigned_abs() {
            acc = acc
                .checked_mul(&base)
                .ok_or(CatError::Overflow("matrix power"))?;
        }
        Ok(acc)
    }

    pub fn apply(&self, v: [i64; 2]) -> Option<[i64; 2]> {
        Some([
            self.a11
                .checked_mul(v[0])?
                .checked_add(self.a12.checked_mul(v[1])?)?,
            self.a21
                .checked_mul(v[0])?
                .checked_add(self.a22.checked_mul(v[1])?)?,
        ])
    }

    pub fn apply_f64(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 as f64 * v[0] + self.a12 as f64 * v[1],
            self.a21 as f64 * v[0] + self.a22 as f64 * v[1],
        ]
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        [
            [self.a11 as f64, self.a12 as f64],
            [self.a21 as f64, self.a22 as f64],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub v_plus_hat: [f64; 2],
    pub v_minus_hat: [f64; 2],
    pub norm_plus: f64,
    pub norm_minus: f64,
}

impl SpectralData {
    pub fn lambda(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Unstable => self.lambda_plus,
            Direction::Stable => self.lambda_minus,
        }
    }

    pub fn vector(&self, dir: Direction) -> [f64; 2] {
        match dir {
            Direction::Unstable => self.v_plus_hat,
            Direction::Stable => self.v_minus_hat,
        }
    }
}

/// Expanding (`Unstable`, eigenvalue λ₊) or contracting (`Stable`, λ₋) direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Unstable,
    Stable,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Unstable, Direction::Stable];

    pub fn index(self) -> usize {
        match self {
            Direction::Unstable => 0,
            Direction::Stable => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Unstable => 1.0,
            Direction::Stable => -1.0,
        }
    }
}

/// Eigen-decomposition of a symmetric hyperbolic integer matrix.
pub fn spectral(s0: &IntMatrix2) -> Result<SpectralData> {
    if !s0.is_symmetric() {
        return Err(CatError::NotSymmetric);
    }
    let tr = s0.trace() as f64;
    let det = s0.det() as f64;
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return Err(CatError::NotHyperbolic);
    }
    let root = disc.sqrt();
    let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
    if l1.abs() <= 1.0 && l2.abs() <= 1.0 || (l1.abs() - 1.0).abs() < 1e-15 {
        return Err(CatError::NotHyperbolic);
    }
    let (lp, lm) = if l1.abs() > l2.abs() {
        (l1, l2)
    } else {
        (l2, l1)
    };
    let eigvec = |l: f64| -> ([f64; 2], f64) {
        let a = s0.to_f64();
        // (a11 - l) x + a12 y = 0
        let v = if a[0][1] != 0.0 {
            [1.0, (l - a[0][0]) / a[0][1]]
        } else if (a[0][0] - l).abs() < 1e-12 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let n = v[0].hypot(v[1]);
        let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
            -1.0
        } else {
            1.0
        };
        ([s * v[0] / n, s * v[1] / n], n)
    };
    let (vp, np) = eigvec(lp);
    let (vm, nm) = eigvec(lm);
    Ok(SpectralData {
        lambda_plus: lp,
        lambda_minus: lm,
        v_plus_hat: vp,
        v_minus_hat: vm,
        norm_plus: np,
        norm_minus: nm,
    })
}

/// One harmonic `amp · sin(ν·ψ)` acting on coordinate `component`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub nu: [i64; 2],
    pub amp: f64,
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HarmonicForce {
    pub harmonics: Vec<Harmonic>,
}

impl HarmonicForce {
    pub fn new(harmonics: Vec<Harmonic>) -> Result<Self> {
        for h in &harmonics {
            if h.component > 1 {
                return Err(CatError::InvalidForce(format!(
                    "component {} out of range",
                    h.component
                )));
            }
            if !h.amp.is_finite() {
                return Err(CatError::InvalidForce("non-finite amplitude".into()));
            }
        }
        Ok(Self { harmonics })
    }

    /// `sin ψ₁` on the first coordinate.
    pub fn single() -> Self {
        Self::from_pairs(&[([1, 0], 1.0)])
    }

    /// `sin ψ₁ + sin 2ψ₁` on the first coordinate.
    pub fn double() -> Self {
        Self::from_pairs(&[([1, 0], 1.0), ([2, 0], 1.0)])
    }

    pub fn from_pairs(pairs: &[([i64; 2], f64)]) -> Self {
        Self {
            harmonics: pairs
                .iter()
                .map(|&(nu, amp)| Harmonic {
                    nu,
                    amp,
                    component: 0,
                })
                .collect(),
        }
    }

    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for h in &self.harmonics {
            out[h.component] += h.amp * (h.nu[0] as f64 * x[0] + h.nu[1] as f64 * x[1]).sin();
        }
        out
    }

    /// Jacobian matrix `Df[i][j] = ∂f_i/∂ψ_j`.
    pub fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let mut d = [[0.0; 2]; 2];
        for h in &self.harmonics {
            let c = h.amp * (h.nu[0] as f64 * x[0] + h.nu[1] as f64 * x[1]).cos();
            d[h.component][0] += c * h.nu[0] as f64;
            d[h.component][1] += c * h.nu[1] as f64;
        }
        d
    }

    /// Upper bound of |amp·ν| sums, useful for invertibility bounds.
    pub fn max_frequency(&self) -> i64 {
        self.harmonics
            .iter()
            .map(|h| h.nu[0].abs().max(h.nu[1].abs()))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatSystem {
    pub s0: IntMatrix2,
    pub epsilon: f64,
    pub force: HarmonicForce,
}

impl CatSystem {
    pub fn new(epsilon: f64, force: HarmonicForce) -> Self {
        Self {
            s0: IntMatrix2::CAT,
            epsilon,
            force,
        }
    }

    /// `S₀x + εf(x)` mod 2π.
    pub fn step(&self, x: TorusPoint) -> TorusPoint {
        let p = x.as_array();
        let lin = self.s0.apply_f64(p);
        let f = self.force.value(p);
        TorusPoint::new(lin[0] + self.epsilon * f[0], lin[1] + self.epsilon * f[1])
    }

    /// `det DS_ε(x)` from the full 2×2 Jacobian.
    pub fn jacobian_det(&self, x: TorusPoint) -> f64 {
        let s = self.s0.to_f64();
        let d = self.force.jacobian(x.as_array());
        let e = self.epsilon;
        let m = [
            [s[0][0] + e * d[0][0], s[0][1] + e * d[0][1]],
            [s[1][0] + e * d[1][0], s[1][1] + e * d[1][1]],
        ];
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Phase-space contraction `−log det DS_ε(x)`.
    pub fn sigma(&self, x: TorusPoint) -> Result<f64> {
        let det = self.jacobian_det(x);
        if det <= 0.0 {
            return Err(CatError::NotInvertible {
                psi1: x.psi1,
                psi2: x.psi2,
                det,
            });
        }
        Ok(-det.ln())
    }

    /// `−log|det|`, tolerant of orientation-reversing points.
    pub fn sigma_abs(&self, x: TorusPoint) -> f64 {
        -self.jacobian_det(x).abs().ln()
    }
}

pub fn time_reversal(x: TorusPoint) -> TorusPoint {
    let v = IntMatrix2::REVERSAL.apply_f64(x.as_array());
    TorusPoint::new(v[0], v[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn cat_spectrum() {
        let s = spectral(&IntMatrix2::CAT).unwrap();
        assert_abs_diff_eq!(s.lambda_plus, (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.lambda_plus * s.lambda_minus, 1.0, epsilon = 1e-14);
        let dot = s.v_plus_hat[0] * s.v_minus_hat[0] + s.v_plus_hat[1] * s.v_minus_hat[1];
        assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.norm_plus.powi(2), s.lambda_plus + 1.0, epsilon = 1e-13);
        for dir in Direction::BOTH {
            let v = s.vector(dir);
            let sv = IntMatrix2::CAT.apply_f64(v);
            assert_abs_diff_eq!(sv[0], s.lambda(dir) * v[0], epsilon = 1e-14);
            assert_abs_diff_eq!(sv[1], s.lambda(dir) * v[1], epsilon = 1e-14);
            assert!(v[0] > 0.0);
        }
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        assert!(matches!(
            spectral(&IntMatrix2::IDENTITY),
            Err(CatError::NotHyperbolic)
        ));
        assert!(spectral(&IntMatrix2::new(1, 1, 0, 1)).is_err());
    }

    #[test]
    fn powers() {
        let s = IntMatrix2::CAT;
        assert_eq!(s.pow(0).unwrap(), IntMatrix2::IDENTITY);
        assert_eq!(s.pow(1).unwrap(), s);
        assert_eq!(s.pow(-1).unwrap(), IntMatrix2::new(2, -1, -1, 1));
        for k in -30..=30 {
            let pk = s.pow(k).unwrap();
            let nk = s.pow(-k).unwrap();
            assert_eq!(s.checked_mul(&pk).unwrap(), s.pow(k + 1).unwrap());
            assert_eq!(pk.a12, -nk.a12);
            assert_eq!(pk.a21, -nk.a21);
            assert_eq!(nk.a11, pk.a22);
        }
        assert!(s.pow(41).is_err());
        assert!(s.pow(40).is_ok());
    }

    #[test]
    fn steps() {
        let free = CatSystem::new(0.0, HarmonicForce::single());
        assert_eq!(
            free.step(TorusPoint::new(0.0, 0.0)),
            TorusPoint::new(0.0, 0.0)
        );
        let y = free.step(TorusPoint::new(FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(y.psi1, FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(y.psi2, FRAC_PI_2, epsilon = 1e-15);
        let pert = CatSystem::new(0.05, HarmonicForce::single());
        let y = pert.step(TorusPoint::new(FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(y.psi1, FRAC_PI_2 + 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(y.psi2, FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn sigma_closed_forms() {
        let eps = 0.07;
        let one = CatSystem::new(eps, HarmonicForce::single());
        let two = CatSystem::new(eps, HarmonicForce::double());
        assert_abs_diff_eq!(
            one.sigma(TorusPoint::new(FRAC_PI_2, 1.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        for i in 0..32 {
            let x = TorusPoint::new(0.2 * i as f64, 0.37 * i as f64);
            let c1 = -(1.0 + 2.0 * eps * x.psi1.cos()).ln();
            assert_abs_diff_eq!(one.sigma(x).unwrap(), c1, epsilon = 1e-12);
            let c2 = -(1.0 + 2.0 * eps * (x.psi1.cos() + 2.0 * (2.0 * x.psi1).cos())).ln();
            assert_abs_diff_eq!(two.sigma(x).unwrap(), c2, epsilon = 1e-12);
            assert_eq!(
                CatSystem::new(0.0, HarmonicForce::double())
                    .sigma(x)
                    .unwrap(),
                0.0
            );
        }
        let strong = CatSystem::new(0.6, HarmonicForce::single());
        assert!(strong.sigma(TorusPoint::new(PI, 0.0)).is_err());
    }

    #[test]
    fn reversal() {
        let i0 = IntMatrix2::REVERSAL;
        assert_eq!(i0.checked_mul(&i0).unwrap(), IntMatrix2::IDENTITY);
        let s = IntMatrix2::CAT;
        assert_eq!(
            i0.checked_mul(&s).unwrap(),
            s.inverse().unwrap().checked_mul(&i0).unwrap()
        );
        assert_eq!(
            time_reversal(TorusPoint::new(0.0, 0.0)),
            TorusPoint::new(0.0, 0.0)
        );
        for i in 0..20 {
            let x = TorusPoint::new(0.31 * i as f64, 1.1 * i as f64);
            assert!(time_reversal(time_reversal(x)).distance(&x) < 1e-12);
        }
    }

    #[test]
    fn wrap_is_idempotent() {
        for t in [-1e-18, -3.0, 0.0, 7.0, 1e6, TAU] {
            let w = wrap(t);
            assert!((0.0..TAU).contains(&w));
            assert_eq!(wrap(w), w);
        }
    }
}
