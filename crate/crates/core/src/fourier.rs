//! Sparse trigonometric polynomials on the two-torus.
//!
//! A [`TrigPoly`] maps integer frequencies `ν` to complex coefficients of
//! `e^{iν·ψ}`. Composition with a linear toral automorphism moves each
//! coefficient to the transposed image of its frequency, and torus averages
//! are read off the coefficient at `ν = 0`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::torus::IntMatrix2;

pub type Freq = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub max_freq_norm: i64,
    pub coeff_tol: f64,
    pub max_p: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            max_freq_norm: 4_000_000_000_000_000_000,
            coeff_tol: 1e-14,
            max_p: 60,
        }
    }
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        if self.max_freq_norm <= 0
            || self.max_p == 0
            || self.coeff_tol.is_nan()
            || self.coeff_tol < 0.0
        {
            return Err(CatError::InvalidArgument(
                "truncation parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    fn check(&self, nu: Freq) -> Result<Freq> {
        if nu[0].abs() > self.max_freq_norm || nu[1].abs() > self.max_freq_norm {
            return Err(CatError::FrequencyCap(nu[0], nu[1], self.max_freq_norm));
        }
        Ok(nu)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigPoly {
    terms: BTreeMap<Freq, Complex64>,
}

fn checked_add(a: Freq, b: Freq) -> Result<Freq> {
    Ok([
        a[0].checked_add(b[0])
            .ok_or(CatError::Overflow("frequency sum"))?,
        a[1].checked_add(b[1])
            .ok_or(CatError::Overflow("frequency sum"))?,
    ])
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial([0, 0], Complex64::new(c, 0.0))
    }

    pub fn monomial(nu: Freq, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(nu, c);
        p
    }

    /// `amp · cos(ν·ψ)`.
    pub fn cos(nu: Freq, amp: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(nu, Complex64::new(amp / 2.0, 0.0));
        p.add_term([-nu[0], -nu[1]], Complex64::new(amp / 2.0, 0.0));
        p
    }

    /// `amp · sin(ν·ψ)`.
    pub fn sin(nu: Freq, amp: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(nu, Complex64::new(0.0, -amp / 2.0));
        p.add_term([-nu[0], -nu[1]], Complex64::new(0.0, amp / 2.0));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Freq, Complex64)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (nu, c) in it {
            p.add_term(nu, c);
        }
        p
    }

    pub fn add_term(&mut self, nu: Freq, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry(nu).or_insert(Complex64::new(0.0, 0.0));
        *e += c;
        if *e == Complex64::new(0.0, 0.0) {
            self.terms.remove(&nu);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, nu: Freq) -> Complex64 {
        self.terms.get(&nu).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Freq, &Complex64)> {
        self.terms.iter()
    }

    /// Terms with nonzero frequency, in key order.
    pub fn oscillating(&self) -> Vec<(Freq, Complex64)> {
        self.terms
            .iter()
            .filter(|(nu, _)| **nu != [0, 0])
            .map(|(nu, c)| (*nu, *c))
            .collect()
    }

    pub fn max_freq_norm(&self) -> i64 {
        self.terms
            .keys()
            .map(|nu| nu[0].abs().max(nu[1].abs()))
            .max()
            .unwrap_or(0)
    }

    /// Sum of coefficient moduli, a bound on the sup norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn add_assign(&mut self, other: &TrigPoly) {
        for (nu, c) in &other.terms {
            self.add_term(*nu, *c);
        }
    }

    pub fn add_scaled(&mut self, other: &TrigPoly, s: f64) {
        for (nu, c) in &other.terms {
            self.add_term(*nu, c * s);
        }
    }

    pub fn scale(&self, s: f64) -> TrigPoly {
        if s == 0.0 {
            return TrigPoly::zero();
        }
        TrigPoly {
            terms: self.terms.iter().map(|(nu, c)| (*nu, c * s)).collect(),
        }
    }

    /// Drop coefficients with modulus below `tol`; returns the dropped ℓ¹ mass.
    pub fn prune(&mut self, tol: f64) -> f64 {
        let mut dropped = 0.0;
        self.terms.retain(|_, c| {
            let n = c.norm();
            if n < tol {
                dropped += n;
                false
            } else {
                true
            }
        });
        dropped
    }

    pub fn pruned(mut self, tol: f64) -> TrigPoly {
        self.prune(tol);
        self
    }

    /// Frequency-space convolution, pruned by `trunc.coeff_tol`.
    pub fn mul(&self, other: &TrigPoly, trunc: &Truncation) -> Result<TrigPoly> {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = TrigPoly::zero();
        for (na, ca) in &small.terms {
            let ma = ca.norm();
            for (nb, cb) in &large.terms {
                if ma * cb.norm() < trunc.coeff_tol {
                    continue;
                }
                let nu = trunc.check(checked_add(*na, *nb)?)?;
                out.add_term(nu, ca * cb);
            }
        }
        out.prune(trunc.coeff_tol);
        Ok(out)
    }

    /// `ψ ↦ f(Mψ)`: each coefficient moves from `ν` to `Mᵀν`.
    pub fn compose_matrix(&self, m: &IntMatrix2, trunc: &Truncation) -> Result<TrigPoly> {
        let mt = m.transpose();
        let mut out = TrigPoly::zero();
        for (nu, c) in &self.terms {
            let image = mt.apply(*nu).ok_or(CatError::Overflow("composition"))?;
            out.add_term(trunc.check(image)?, *c);
        }
        Ok(out)
    }

    /// `ψ ↦ f(S^p ψ)` for any integer `p`, applied one step at a time.
    pub fn compose_power(&self, s: &IntMatrix2, p: i64, trunc: &Truncation) -> Result<TrigPoly> {
        let step = if p >= 0 { *s } else { s.inverse()? };
        let mut out = self.clone();
        for _ in 0..p.unsigned_abs() {
            out = out.compose_matrix(&step, trunc)?;
        }
        Ok(out)
    }

    /// Derivative along the unit vector `v`: coefficients scale by `i ν·v`.
    pub fn directional_derivative(&self, v: [f64; 2]) -> TrigPoly {
        let mut out = TrigPoly::zero();
        for (nu, c) in &self.terms {
            let k = nu[0] as f64 * v[0] + nu[1] as f64 * v[1];
            out.add_term(*nu, c * Complex64::new(0.0, k));
        }
        out
    }

    /// Partial derivative with respect to coordinate `j`.
    pub fn partial(&self, j: usize) -> TrigPoly {
        let v = if j == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
        self.directional_derivative(v)
    }

    /// Lebesgue average over the torus.
    pub fn average(&self) -> f64 {
        self.coeff([0, 0]).re
    }

    /// `⟨f g⟩` without forming the product.
    pub fn mean_of_product(&self, other: &TrigPoly) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .terms
            .iter()
            .map(|(nu, c)| (c * large.coeff([-nu[0], -nu[1]])).re)
            .sum()
    }

    pub fn evaluate_complex(&self, x: [f64; 2]) -> Complex64 {
        self.terms
            .iter()
            .map(|(nu, c)| {
                let ph = nu[0] as f64 * x[0] + nu[1] as f64 * x[1];
                c * Complex64::from_polar(1.0, ph)
            })
            .sum()
    }

    /// Real part of the value at `x`.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        self.evaluate_complex(x).re
    }

    /// Largest violation of `c(−ν) = conj c(ν)`.
    pub fn hermitian_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(nu, c)| (self.coeff([-nu[0], -nu[1]]) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Symmetrize to the nearest real-valued polynomial.
    pub fn real_part(&self) -> TrigPoly {
        let mut out = TrigPoly::zero();
        for (nu, c) in &self.terms {
            out.add_term(*nu, c * 0.5);
            out.add_term([-nu[0], -nu[1]], c.conj() * 0.5);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &TrigPoly) -> f64 {
        let d = self.sub(other);
        d.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Debug dump, one `nu1,nu2,re,im` line per term.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu1,nu2,re,im\n");
        for (nu, c) in &self.terms {
            let _ = writeln!(s, "{},{},{:e},{:e}", nu[0], nu[1], c.re, c.im);
        }
        s
    }
}

/// Result of a truncated weighted orbit sum.
#[derive(Debug, Clone)]
pub struct GeometricSum {
    pub poly: TrigPoly,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// `Σ_{p=0}^{P} ratio^p f(S^{±p}ψ)`, stopping once every remaining weighted
/// coefficient falls below `coeff_tol` or `p` reaches `max_p`.
pub fn geometric_sum(
    f: &TrigPoly,
    ratio: f64,
    forward: bool,
    s: &IntMatrix2,
    trunc: &Truncation,
) -> Result<GeometricSum> {
    let r = ratio.abs();
    if r >= 1.0 || ratio.is_nan() {
        return Err(CatError::DivergentRatio(ratio));
    }
    let step = if forward {
        s.transpose()
    } else {
        s.inverse()?.transpose()
    };
    let mut current: Vec<(Freq, Complex64)> = f.iter().map(|(nu, c)| (*nu, *c)).collect();
    let mut out = TrigPoly::zero();
    let mut weight = 1.0;
    let mut dropped = 0.0;
    let mut p = 0usize;
    while !current.is_empty() && p <= trunc.max_p {
        let mut next = Vec::with_capacity(current.len());
        for (nu, c) in current {
            let wc = c * weight;
            if wc.norm() < trunc.coeff_tol {
                // weights only shrink from here on
                dropped += wc.norm() / (1.0 - r);
                continue;
            }
            out.add_term(nu, wc);
            let image = step.apply(nu).ok_or(CatError::Overflow("geometric sum"))?;
            next.push((trunc.check(image)?, c));
        }
        current = next;
        weight *= ratio;
        p += 1;
    }
    let remaining: f64 = current.iter().map(|(_, c)| c.norm()).sum();
    let tail = dropped + remaining * weight.abs() / (1.0 - r);
    Ok(GeometricSum {
        poly: out,
        terms_used: p,
        tail_bound: tail,
    })
}

/// Formal tail bound `|ratio|^{P+1}/(1−|ratio|)·‖f‖₁`.
pub fn geometric_tail_bound(f: &TrigPoly, ratio: f64, max_p: usize) -> f64 {
    let r = ratio.abs();
    r.powi(max_p as i32 + 1) / (1.0 - r) * f.l1_norm()
}
