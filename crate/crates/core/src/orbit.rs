//! Exact orbit bookkeeping for integer frequencies under `ν ↦ Sᵀν`.
//!
//! Every nonzero frequency has an infinite orbit; the element of least
//! Euclidean norm serves as a canonical representative, so two frequencies
//! lie on the same orbit iff their representatives agree.

use crate::error::{CatError, Result};
use crate::torus::{spectral, IntMatrix2, SpectralData};

pub type Vec2 = [i128; 2];

#[derive(Debug, Clone)]
pub struct OrbitTools {
    forward: [[i128; 2]; 2],
    backward: [[i128; 2]; 2],
    spec: SpectralData,
    log_lambda: f64,
    /// Invariant form `q0 x₁² + q1 x₁x₂ + q2 x₂²`.
    form: [i128; 3],
    /// `Q(x) = kappa · x₊ x₋` in eigen-coordinates.
    kappa: f64,
}

fn to_i128(m: &IntMatrix2) -> [[i128; 2]; 2] {
    [
        [m.a11 as i128, m.a12 as i128],
        [m.a21 as i128, m.a22 as i128],
    ]
}

fn apply(m: &[[i128; 2]; 2], v: Vec2) -> Option<Vec2> {
    Some([
        m[0][0]
            .checked_mul(v[0])?
            .checked_add(m[0][1].checked_mul(v[1])?)?,
        m[1][0]
            .checked_mul(v[0])?
            .checked_add(m[1][1].checked_mul(v[1])?)?,
    ])
}

impl OrbitTools {
    /// Tools for the frequency action of a symmetric unimodular `s`.
    pub fn new(s: &IntMatrix2) -> Result<Self> {
        let spec = spectral(s)?;
        if s.det() != 1 {
            return Err(CatError::NotUnimodular(s.det()));
        }
        let t = s.transpose();
        let (a, b, d) = (s.a11 as i128, s.a12 as i128, s.a22 as i128);
        let form = [b, d - a, -b];
        let (vp, vm) = (spec.v_plus_hat, spec.v_minus_hat);
        let bil = |x: [f64; 2], y: [f64; 2]| {
            let (q0, q1, q2) = (form[0] as f64, form[1] as f64, form[2] as f64);
            q0 * x[0] * y[0] + 0.5 * q1 * (x[0] * y[1] + x[1] * y[0]) + q2 * x[1] * y[1]
        };
        Ok(Self {
            forward: to_i128(&t),
            backward: to_i128(&t.inverse()?),
            log_lambda: spec.lambda_plus.ln(),
            kappa: 2.0 * bil(vp, vm),
            spec,
            form,
        })
    }

    pub fn form(&self, x: Vec2) -> Option<i128> {
        let a = self.form[0].checked_mul(x[0].checked_mul(x[0])?)?;
        let b = self.form[1].checked_mul(x[0].checked_mul(x[1])?)?;
        let c = self.form[2].checked_mul(x[1].checked_mul(x[1])?)?;
        a.checked_add(b)?.checked_add(c)
    }

    pub fn eigen(&self, x: Vec2) -> (f64, f64) {
        let (a, b) = (x[0] as f64, x[1] as f64);
        let (vp, vm) = (self.spec.v_plus_hat, self.spec.v_minus_hat);
        (a * vp[0] + b * vp[1], a * vm[0] + b * vm[1])
    }

    /// `(Sᵀ)^k x`, stepping one power at a time.
    pub fn power(&self, x: Vec2, k: i64) -> Option<Vec2> {
        let m = if k >= 0 {
            &self.forward
        } else {
            &self.backward
        };
        let mut v = x;
        for _ in 0..k.unsigned_abs() {
            v = apply(m, v)?;
        }
        Some(v)
    }

    /// Least-norm orbit element and the power reaching it: `(Sᵀ)^offset x = rep`.
    ///
    /// The squared norm along an orbit is `x₊²λ^{2k} + x₋²λ^{−2k}`, strictly
    /// convex in `k`, so an exact descent from a floating-point guess finds it.
    pub fn canonical(&self, x: Vec2) -> Option<(Vec2, i64)> {
        if x == [0, 0] {
            return None;
        }
        let norm = |v: Vec2| -> Option<i128> {
            v[0].checked_mul(v[0])?.checked_add(v[1].checked_mul(v[1])?)
        };
        let (up, um) = self.eigen(x);
        let g = (um.abs().ln() - up.abs().ln()) / (2.0 * self.log_lambda);
        let guess = if g.is_finite() {
            (g.round() as i64).clamp(-90, 90)
        } else {
            0
        };
        let (mut v, mut k) = match self.power(x, guess) {
            Some(c) => (c, guess),
            None => (x, 0),
        };
        let mut n = norm(v)?;
        for step in [1i64, -1] {
            loop {
                let Some(w) = self.power(v, step) else { break };
                let Some(nw) = norm(w) else { break };
                if nw < n || (nw == n && w < v) {
                    v = w;
                    n = nw;
                    k += step;
                } else {
                    break;
                }
            }
        }
        Some((v, k))
    }

    /// `k` with `(Sᵀ)^k x = target`, if any.
    pub fn solve(&self, x: Vec2, target: Vec2) -> Option<i64> {
        let (rx, ox) = self.canonical(x)?;
        let (rt, ot) = self.canonical(target)?;
        (rx == rt).then_some(ox - ot)
    }

    /// Eigen-coordinates with full relative precision in both components,
    /// read off the orbit representative.
    pub fn eigen_precise(&self, x: Vec2) -> (f64, f64) {
        match self.canonical(x) {
            Some((rep, off)) => {
                let (rp, rm) = self.eigen(rep);
                let l = self.spec.lambda_plus;
                (rp * l.powi(-off as i32), rm * l.powi(off as i32))
            }
            None => (0.0, 0.0),
        }
    }

    /// Integer shifts `k` (near real roots) with `Q((Sᵀ)^k a + v) = q`; candidates
    /// only, callers verify exactly.
    pub fn shift_candidates(&self, a: Vec2, v: Vec2, q: i128) -> Vec<i64> {
        let (Some(qa), Some(qv)) = (self.form(a), self.form(v)) else {
            return Vec::new();
        };
        self.shift_candidates_with(self.eigen_precise(a), qa, self.eigen_precise(v), qv, q)
    }

    /// As [`shift_candidates`](Self::shift_candidates), from precomputed
    /// eigen-coordinates and form values.
    pub fn shift_candidates_with(
        &self,
        a: (f64, f64),
        qa: i128,
        v: (f64, f64),
        qv: i128,
        q: i128,
    ) -> Vec<i64> {
        let r = (q - qa - qv) as f64;
        let (ap, am) = a;
        let (vp, vm) = v;
        // κ(a₊v₋ z² + a₋v₊) = r z with z = λ^k
        let qa2 = self.kappa * ap * vm;
        let qc = self.kappa * am * vp;
        let mut roots = Vec::new();
        if qa2 == 0.0 {
            if r != 0.0 {
                roots.push(qc / r);
            }
        } else {
            let disc = r * r - 4.0 * qa2 * qc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                let t = 0.5 * (r + if r >= 0.0 { s } else { -s });
                if t != 0.0 {
                    roots.push(t / qa2);
                    roots.push(qc / t);
                }
            } else if disc > -1e-9 * r * r {
                roots.push(r / (2.0 * qa2));
            }
        }
        let mut out: Vec<i64> = Vec::new();
        for z in roots {
            if z > 0.0 && z.is_finite() {
                let k = (z.ln() / self.log_lambda).round() as i64;
                for d in -2..=2 {
                    if !out.contains(&(k + d)) {
                        out.push(k + d);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }
}
