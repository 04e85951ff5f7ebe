//! Markov partition and symbolic coding for the unperturbed cat map `[[1,1],[1,2]]`.
//!
//! Geometry lives in eigen-coordinates of the unit torus, `u = x + φy` and
//! `s = −φx + y`, where the map acts as `(u, s) ↦ (λ₊u, λ₋s)` and the lattice
//! `ℤ²` becomes `{(m₁ + φm₂, −φm₁ + m₂)}` with covolume `φ + 2`. All boundary
//! geometry is exact in `ℚ(√5)`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::torus::TorusPoint;

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(a + b√5) / d` with `d > 0` and `gcd(a, b, d) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QSqrt5 {
    a: i128,
    b: i128,
    d: i128,
}

impl QSqrt5 {
    pub fn new(a: i128, b: i128, d: i128) -> Self {
        assert!(d != 0, "zero denominator");
        let s = if d < 0 { -1 } else { 1 };
        let g = gcd(gcd(a, b), d).max(1);
        Self {
            a: s * a / g,
            b: s * b / g,
            d: s * d / g,
        }
    }

    pub const ZERO: Self = Self { a: 0, b: 0, d: 1 };

    pub fn int(n: i128) -> Self {
        Self::new(n, 0, 1)
    }

    pub fn rational(p: i128, q: i128) -> Self {
        Self::new(p, 0, q)
    }

    /// The golden ratio `(1 + √5)/2`.
    pub fn phi() -> Self {
        Self::new(1, 1, 2)
    }

    pub fn parts(&self) -> (i128, i128, i128) {
        (self.a, self.b, self.d)
    }

    pub fn to_f64(&self) -> f64 {
        (self.a as f64 + self.b as f64 * 5f64.sqrt()) / self.d as f64
    }

    pub fn signum(&self) -> i32 {
        // sign of a + b√5
        let (sa, sb) = (self.a.signum(), self.b.signum());
        if sb == 0 {
            return sa as i32;
        }
        if sa == 0 || sa == sb {
            return sb as i32;
        }
        let a2 = self.a * self.a;
        let b2 = 5 * self.b * self.b;
        match a2.cmp(&b2) {
            Ordering::Greater => sa as i32,
            Ordering::Less => sb as i32,
            Ordering::Equal => 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn abs(self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        // 1/(a + b√5) = (a − b√5)/(a² − 5b²)
        let n = self.a * self.a - 5 * self.b * self.b;
        assert!(n != 0, "division by zero");
        Self::new(self.d * self.a, -self.d * self.b, n)
    }

    pub fn div(self, o: Self) -> Self {
        self * o.recip()
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> i128 {
        let mut f = self.to_f64().floor() as i128;
        while QSqrt5::int(f + 1) <= *self {
            f += 1;
        }
        while QSqrt5::int(f) > *self {
            f -= 1;
        }
        f
    }

    pub fn max(self, o: Self) -> Self {
        if self >= o {
            self
        } else {
            o
        }
    }

    pub fn min(self, o: Self) -> Self {
        if self <= o {
            self
        } else {
            o
        }
    }
}

impl Add for QSqrt5 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.a * o.d + o.a * self.d,
            self.b * o.d + o.b * self.d,
            self.d * o.d,
        )
    }
}

impl Sub for QSqrt5 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for QSqrt5 {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
            d: self.d,
        }
    }
}

impl Mul for QSqrt5 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a + 5 * self.b * o.b,
            self.a * o.b + self.b * o.a,
            self.d * o.d,
        )
    }
}

impl PartialOrd for QSqrt5 {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for QSqrt5 {
    fn cmp(&self, o: &Self) -> Ordering {
        (*self - *o).signum().cmp(&0)
    }
}

impl fmt::Display for QSqrt5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.b < 0 { '-' } else { '+' };
        write!(f, "{}{}{}√5/{}", self.a, sign, self.b.abs(), self.d)
    }
}

impl FromStr for QSqrt5 {
    type Err = CatError;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CatError::Parse(format!("expected a+b√5/d, got {s:?}"));
        let t = s.trim();
        let (num, den) = t.rsplit_once('/').ok_or_else(bad)?;
        let num = num.strip_suffix("√5").ok_or_else(bad)?;
        let split = num
            .char_indices()
            .skip(1)
            .filter(|(_, c)| *c == '+' || *c == '-')
            .map(|(i, _)| i)
            .last()
            .ok_or_else(bad)?;
        let a: i128 = num[..split].parse().map_err(|_| bad())?;
        let b: i128 = num[split..]
            .trim_start_matches('+')
            .parse()
            .map_err(|_| bad())?;
        let d: i128 = den.parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ok(Self::new(a, b, d))
    }
}

impl Serialize for QSqrt5 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QSqrt5 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `λ₊ = φ²`.
pub fn lambda_plus() -> QSqrt5 {
    QSqrt5::new(3, 1, 2)
}

/// `λ₋ = φ⁻²`.
pub fn lambda_minus() -> QSqrt5 {
    QSqrt5::new(3, -1, 2)
}

/// Eigen-coordinates of the lattice point `m`.
pub fn lattice_point(m: [i64; 2]) -> (QSqrt5, QSqrt5) {
    let phi = QSqrt5::phi();
    let (m1, m2) = (QSqrt5::int(m[0] as i128), QSqrt5::int(m[1] as i128));
    (m1 + m2 * phi, m2 - m1 * phi)
}

/// `m` with `m₁ + φm₂ = du`, if `du ∈ ℤ[φ]`.
fn lattice_from_u(du: QSqrt5) -> Option<i128> {
    // (r + t√5) = m₁ + m₂/2 + (m₂/2)√5
    let (a, b, d) = du.parts();
    if (2 * b) % d != 0 {
        return None;
    }
    let m2 = 2 * b / d;
    let num = 2 * a - m2 * d;
    if num % (2 * d) != 0 {
        return None;
    }
    Some(m2)
}

fn lattice_index_u(du: QSqrt5) -> Option<[i64; 2]> {
    let m2 = lattice_from_u(du)?;
    let (a, _, d) = du.parts();
    // m₁ = a/d − m₂/2
    let num = 2 * a - m2 * d;
    Some([(num / (2 * d)) as i64, m2 as i64])
}

fn lattice_index_s(ds: QSqrt5) -> Option<[i64; 2]> {
    // −φm₁ + m₂ = (m₂ − m₁/2) − (m₁/2)√5
    let (a, b, d) = ds.parts();
    if (2 * b) % d != 0 {
        return None;
    }
    let m1 = -2 * b / d;
    let num = 2 * a + m1 * d;
    if num % (2 * d) != 0 {
        return None;
    }
    Some([m1 as i64, (num / (2 * d)) as i64])
}

/// Unit-torus coordinates of eigen-coordinates.
fn unit_coords(u: QSqrt5, s: QSqrt5) -> (QSqrt5, QSqrt5) {
    let phi = QSqrt5::phi();
    let cov = QSqrt5::int(1) + phi * phi;
    ((u - phi * s).div(cov), (phi * u + s).div(cov))
}

fn unit_coords_f64(u: f64, s: f64) -> (f64, f64) {
    let phi = QSqrt5::phi().to_f64();
    let cov = 1.0 + phi * phi;
    ((u - phi * s) / cov, (phi * u + s) / cov)
}

/// Eigen-coordinates of a torus point given in angles.
pub fn eigen_coords(x: TorusPoint) -> (f64, f64) {
    let phi = QSqrt5::phi().to_f64();
    let (a, b) = (
        x.psi1 / std::f64::consts::TAU,
        x.psi2 / std::f64::consts::TAU,
    );
    (a + phi * b, -phi * a + b)
}

/// Axis-aligned rectangle `[u₀, u₀+uExtent] × [s₀, s₀+sExtent]` in eigen-coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Rectangle {
    #[serde(default)]
    pub id: usize,
    /// Lower-left corner `(u₀, s₀)`.
    pub anchor: [QSqrt5; 2],
    pub u_extent: QSqrt5,
    pub s_extent: QSqrt5,
}

impl Rectangle {
    pub fn from_bounds(id: usize, u0: QSqrt5, u1: QSqrt5, s0: QSqrt5, s1: QSqrt5) -> Self {
        Self {
            id,
            anchor: [u0, s0],
            u_extent: u1 - u0,
            s_extent: s1 - s0,
        }
    }

    pub fn u_range(&self) -> (QSqrt5, QSqrt5) {
        (self.anchor[0], self.anchor[0] + self.u_extent)
    }

    pub fn s_range(&self) -> (QSqrt5, QSqrt5) {
        (self.anchor[1], self.anchor[1] + self.s_extent)
    }

    pub fn area(&self) -> QSqrt5 {
        self.u_extent * self.s_extent
    }

    pub fn translate(&self, m: [i64; 2]) -> Self {
        let (a, b) = lattice_point(m);
        Self {
            anchor: [self.anchor[0] + a, self.anchor[1] + b],
            ..*self
        }
    }

    /// Same rectangle with its anchor reduced into the unit cell.
    pub fn canonical(&self) -> Self {
        let (x, y) = unit_coords(self.anchor[0], self.anchor[1]);
        self.translate([-(x.floor() as i64), -(y.floor() as i64)])
    }

    /// Anchor as a torus point (angles).
    pub fn anchor_point(&self) -> TorusPoint {
        let (x, y) = unit_coords_f64(self.anchor[0].to_f64(), self.anchor[1].to_f64());
        TorusPoint::new(x * std::f64::consts::TAU, y * std::f64::consts::TAU)
    }

    fn interiors_meet(&self, o: &Self) -> bool {
        let (a0, a1) = self.u_range();
        let (b0, b1) = o.u_range();
        let (c0, c1) = self.s_range();
        let (d0, d1) = o.s_range();
        a0.max(b0) < a1.min(b1) && c0.max(d0) < c1.min(d1)
    }

    fn intersection(&self, o: &Self) -> Option<Self> {
        if !self.interiors_meet(o) {
            return None;
        }
        let (a0, a1) = self.u_range();
        let (b0, b1) = o.u_range();
        let (c0, c1) = self.s_range();
        let (d0, d1) = o.s_range();
        Some(Self::from_bounds(
            0,
            a0.max(b0),
            a1.min(b1),
            c0.max(d0),
            c1.min(d1),
        ))
    }

    /// Image under the map (`forward`) or its inverse.
    fn image(&self, forward: bool) -> Self {
        let (lu, ls) = if forward {
            (lambda_plus(), lambda_minus())
        } else {
            (lambda_minus(), lambda_plus())
        };
        Self {
            id: self.id,
            anchor: [self.anchor[0] * lu, self.anchor[1] * ls],
            u_extent: self.u_extent * lu,
            s_extent: self.s_extent * ls,
        }
    }

    fn to_f64(self) -> RectF {
        let (u0, u1) = self.u_range();
        let (s0, s1) = self.s_range();
        RectF {
            u0: u0.to_f64(),
            u1: u1.to_f64(),
            s0: s0.to_f64(),
            s1: s1.to_f64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RectF {
    u0: f64,
    u1: f64,
    s0: f64,
    s1: f64,
}

/// Lattice vectors `m` with `|a(m)| ≤ du` and `|b(m)| ≤ ds` (plus slack).
fn lattice_window(du: f64, ds: f64) -> Vec<[i64; 2]> {
    let phi = QSqrt5::phi().to_f64();
    let cov = 1.0 + phi * phi;
    let r = ((du.abs() + phi * ds.abs()) / cov).ceil() as i64 + 2;
    let r2 = ((phi * du.abs() + ds.abs()) / cov).ceil() as i64 + 2;
    let mut out = Vec::new();
    for m1 in -r..=r {
        for m2 in -r2..=r2 {
            let a = m1 as f64 + phi * m2 as f64;
            let b = -phi * m1 as f64 + m2 as f64;
            if a.abs() <= du + 1.0 && b.abs() <= ds + 1.0 {
                out.push([m1, m2]);
            }
        }
    }
    out
}

/// Lattice translates `m` with `int a ∩ int (b + m) ≠ ∅`.
fn meeting_translates(a: &Rectangle, b: &Rectangle) -> Vec<[i64; 2]> {
    let (a0, _) = a.u_range();
    let (b0, _) = b.u_range();
    let (c0, _) = a.s_range();
    let (d0, _) = b.s_range();
    let du = (a0 - b0).to_f64().abs() + a.u_extent.to_f64() + b.u_extent.to_f64();
    let ds = (c0 - d0).to_f64().abs() + a.s_extent.to_f64() + b.s_extent.to_f64();
    let shift_u = (a0 - b0).to_f64();
    let shift_s = (c0 - d0).to_f64();
    lattice_window(du, ds)
        .into_iter()
        .filter(|m| {
            let phi = QSqrt5::phi().to_f64();
            let (x, y) = (
                m[0] as f64 + phi * m[1] as f64,
                -phi * m[0] as f64 + m[1] as f64,
            );
            (x - shift_u).abs() <= du && (y - shift_s).abs() <= ds
        })
        .filter(|m| a.interiors_meet(&b.translate(*m)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Constructed,
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkovPartition {
    pub rectangles: Vec<Rectangle>,
    pub provenance: Provenance,
    /// Half-lengths of the generating unstable and stable segments, when constructed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<[QSqrt5; 2]>,
    #[serde(skip)]
    fast: Vec<RectF>,
}

impl MarkovPartition {
    pub fn new(mut rectangles: Vec<Rectangle>, provenance: Provenance) -> Self {
        for (i, r) in rectangles.iter_mut().enumerate() {
            r.id = i;
        }
        let fast = rectangles.iter().map(|r| r.to_f64()).collect();
        Self {
            rectangles,
            provenance,
            segments: None,
            fast,
        }
    }

    pub fn len(&self) -> usize {
        self.rectangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rectangles.is_empty()
    }

    /// Sum of rectangle areas in eigen-coordinates (the torus has `φ + 2`).
    pub fn area_eigen(&self) -> QSqrt5 {
        self.rectangles
            .iter()
            .fold(QSqrt5::ZERO, |acc, r| acc + r.area())
    }

    /// Areas as fractions of the torus.
    pub fn area_fractions(&self) -> Vec<f64> {
        let cov = covolume().to_f64();
        self.rectangles
            .iter()
            .map(|r| r.area().to_f64() / cov)
            .collect()
    }

    /// Total area in angle units (`4π²` for a partition).
    pub fn total_area(&self) -> f64 {
        self.area_eigen().to_f64() / covolume().to_f64() * 4.0 * std::f64::consts::PI.powi(2)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }

    /// Rectangles from JSON, with `provenance = loaded`.
    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            rectangles: Vec<Rectangle>,
            #[serde(default)]
            #[allow(dead_code)]
            provenance: Option<Provenance>,
            #[serde(default)]
            #[allow(dead_code)]
            segments: Option<[QSqrt5; 2]>,
        }
        let f: File = serde_json::from_str(s).map_err(|e| CatError::Parse(e.to_string()))?;
        Ok(Self::new(f.rectangles, Provenance::Loaded))
    }

    /// Rectangle containing the eigen-coordinate point, and whether the
    /// point sits within `1e−12` of the boundary.
    pub fn locate(&self, u: f64, s: f64) -> (usize, bool) {
        let (x, y) = unit_coords_f64(u, s);
        let phi = QSqrt5::phi().to_f64();
        let (fx, fy) = (x.floor(), y.floor());
        let u = u - (fx + phi * fy);
        let s = s - (-phi * fx + fy);
        let tol = 1e-12;
        let mut best: Option<(usize, bool)> = None;
        let mut nearest = (f64::INFINITY, 0usize);
        for dx in -3i64..=3 {
            for dy in -3i64..=3 {
                let (ou, os) = (dx as f64 + phi * dy as f64, -phi * dx as f64 + dy as f64);
                let (pu, ps) = (u - ou, s - os);
                for (i, r) in self.fast.iter().enumerate() {
                    let gap = (r.u0 - pu).max(pu - r.u1).max(r.s0 - ps).max(ps - r.s1);
                    if gap < -tol {
                        return (i, false);
                    }
                    if gap <= tol {
                        best = Some(match best {
                            Some((j, _)) if j < i => (j, true),
                            _ => (i, true),
                        });
                    }
                    if gap < nearest.0 {
                        nearest = (gap, i);
                    }
                }
            }
        }
        best.unwrap_or((nearest.1, true))
    }

    pub fn locate_point(&self, x: TorusPoint) -> (usize, bool) {
        let (u, s) = eigen_coords(x);
        self.locate(u, s)
    }
}

/// `φ + 2`, the eigen-coordinate area of the torus.
pub fn covolume() -> QSqrt5 {
    QSqrt5::phi() + QSqrt5::int(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovReport {
    pub passed: bool,
    pub area_matches: bool,
    pub disjoint: bool,
    pub stable_invariant: bool,
    pub unstable_invariant: bool,
    pub violations: Vec<String>,
}

/// Sides of all rectangles along one direction, as `(level, lo, hi, name)`.
fn sides(p: &MarkovPartition, stable: bool) -> Vec<(QSqrt5, QSqrt5, QSqrt5, String)> {
    let mut out = Vec::new();
    for r in &p.rectangles {
        let (u0, u1) = r.u_range();
        let (s0, s1) = r.s_range();
        if stable {
            out.push((
                u0,
                s0,
                s1,
                format!("rectangle {} stable side u={}", r.id, u0),
            ));
            out.push((
                u1,
                s0,
                s1,
                format!("rectangle {} stable side u={}", r.id, u1),
            ));
        } else {
            out.push((
                s0,
                u0,
                u1,
                format!("rectangle {} unstable side s={}", r.id, s0),
            ));
            out.push((
                s1,
                u0,
                u1,
                format!("rectangle {} unstable side s={}", r.id, s1),
            ));
        }
    }
    out
}

fn covered(target: (QSqrt5, QSqrt5), mut pieces: Vec<(QSqrt5, QSqrt5)>) -> bool {
    pieces.sort();
    let mut reach = target.0;
    for (lo, hi) in pieces {
        if lo > reach {
            break;
        }
        reach = reach.max(hi);
        if reach >= target.1 {
            return true;
        }
    }
    reach >= target.1
}

/// Boundary-invariance, disjointness and area checks.
pub fn verify_markov(p: &MarkovPartition) -> MarkovReport {
    let mut violations = Vec::new();
    let area_matches = p.area_eigen() == covolume();
    if !area_matches {
        violations.push(format!(
            "areas sum to {} (eigen units), torus has {}",
            p.area_eigen(),
            covolume()
        ));
    }
    let mut disjoint = true;
    for (i, a) in p.rectangles.iter().enumerate() {
        for b in &p.rectangles[i..] {
            for m in meeting_translates(a, b) {
                if a.id == b.id && m == [0, 0] {
                    continue;
                }
                disjoint = false;
                violations.push(format!(
                    "rectangle {} overlaps rectangle {} translated by {:?}",
                    a.id, b.id, m
                ));
            }
        }
    }
    let mut invariant = [true, true];
    for (k, stable) in [true, false].into_iter().enumerate() {
        let all = sides(p, stable);
        let (scale_level, scale_span) = if stable {
            (lambda_plus(), lambda_minus())
        } else {
            (lambda_minus().recip(), lambda_plus().recip())
        };
        for (level, lo, hi, name) in &all {
            let img_level = *level * scale_level;
            let target = (*lo * scale_span, *hi * scale_span);
            let mut pieces = Vec::new();
            for (l2, lo2, hi2, _) in &all {
                let m = if stable {
                    lattice_index_u(img_level - *l2)
                } else {
                    lattice_index_s(img_level - *l2)
                };
                if let Some(m) = m {
                    let (a, b) = lattice_point(m);
                    let off = if stable { b } else { a };
                    pieces.push((*lo2 + off, *hi2 + off));
                }
            }
            if !covered(target, pieces) {
                invariant[k] = false;
                let map = if stable { "S" } else { "S⁻¹" };
                violations.push(format!("{map} image of {name} leaves the boundary set"));
            }
        }
    }
    MarkovReport {
        passed: violations.is_empty(),
        area_matches,
        disjoint,
        stable_invariant: invariant[0],
        unstable_invariant: invariant[1],
        violations,
    }
}

/// Exact rectangle bounded by the segment family around a sample point.
fn ray_cast(
    u: QSqrt5,
    s: QSqrt5,
    lu: QSqrt5,
    ls: QSqrt5,
    window: &[([i64; 2], QSqrt5, QSqrt5)],
) -> Option<Rectangle> {
    let (mut left, mut right, mut down, mut up): (
        Option<QSqrt5>,
        Option<QSqrt5>,
        Option<QSqrt5>,
        Option<QSqrt5>,
    ) = (None, None, None, None);
    for (_, a, b) in window {
        // stable segment: u = a, s ∈ [b − ls, b + ls]
        if *b - ls <= s && s <= *b + ls {
            if *a > u {
                right = Some(right.map_or(*a, |r| r.min(*a)));
            } else if *a < u {
                left = Some(left.map_or(*a, |l| l.max(*a)));
            }
        }
        // unstable segment: s = b, u ∈ [a − lu, a + lu]
        if *a - lu <= u && u <= *a + lu {
            if *b > s {
                up = Some(up.map_or(*b, |x| x.min(*b)));
            } else if *b < s {
                down = Some(down.map_or(*b, |x| x.max(*b)));
            }
        }
    }
    Some(Rectangle::from_bounds(0, left?, right?, down?, up?))
}

/// Segment half-lengths whose endpoints all land on opposite-type segments.
fn closing_lengths() -> Vec<(QSqrt5, QSqrt5)> {
    let mut us = BTreeSet::new();
    let mut ss = BTreeSet::new();
    for m1 in -4i64..=4 {
        for m2 in -4i64..=4 {
            let (a, b) = lattice_point([m1, m2]);
            if a.signum() > 0 && a.to_f64() <= 5.0 {
                us.insert(a);
            }
            if b.signum() > 0 && b.to_f64() <= 3.0 {
                ss.insert(b);
            }
        }
    }
    let mut out = Vec::new();
    for lu in &us {
        for ls in &ss {
            // endpoint (±lu, 0) on a stable segment through m with a(m) = lu
            let ok_u = lattice_index_u(*lu).is_some_and(|m| lattice_point(m).1.abs() <= *ls);
            let ok_s = lattice_index_s(*ls).is_some_and(|m| lattice_point(m).0.abs() <= *lu);
            if ok_u && ok_s {
                out.push((*lu, *ls));
            }
        }
    }
    out.sort_by(|a, b| (a.0 + a.1).cmp(&(b.0 + b.1)).then(a.cmp(b)));
    out
}

fn rectangles_from_segments(lu: QSqrt5, ls: QSqrt5) -> Option<Vec<Rectangle>> {
    let window: Vec<([i64; 2], QSqrt5, QSqrt5)> = lattice_window(12.0, 12.0)
        .into_iter()
        .map(|m| {
            let (a, b) = lattice_point(m);
            (m, a, b)
        })
        .collect();
    let mut found = BTreeSet::new();
    let n = 24i128;
    for i in 0..n {
        for j in 0..n {
            // rational sample points never lie on segment lines
            let x = QSqrt5::rational(2 * i + 1, 2 * n) + QSqrt5::rational(j, 97 * n);
            let y = QSqrt5::rational(2 * j + 1, 2 * n);
            let phi = QSqrt5::phi();
            let (u, s) = (x + phi * y, y - phi * x);
            let r = ray_cast(u, s, lu, ls, &window)?;
            found.insert(r.canonical());
        }
    }
    Some(found.into_iter().collect())
}

/// Common refinement with the preimage partition, `P ∨ S⁻¹P`.
fn refine(rects: &[Rectangle]) -> Vec<Rectangle> {
    let mut out = BTreeSet::new();
    for a in rects {
        for b in rects {
            let pre = b.image(false);
            for m in meeting_translates(a, &pre) {
                if let Some(r) = a.intersection(&pre.translate(m)) {
                    out.insert(r.canonical());
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Number of lattice translates of `b` met by the image of `a`.
fn transition_count(a: &Rectangle, b: &Rectangle) -> usize {
    meeting_translates(&a.image(true), b).len()
}

/// Build the partition from segments through the fixed point.
pub fn build_cat_partition() -> Result<MarkovPartition> {
    let mut tried = Vec::new();
    for (lu, ls) in closing_lengths() {
        let Some(mut rects) = rectangles_from_segments(lu, ls) else {
            tried.push(format!("lu={lu}, ls={ls}: open cells"));
            continue;
        };
        let base = MarkovPartition::new(rects.clone(), Provenance::Constructed);
        let report = verify_markov(&base);
        if !report.passed {
            tried.push(format!(
                "lu={lu}, ls={ls}: {}",
                report.violations.join("; ")
            ));
            continue;
        }
        // refine until every transition is met by at most one translate
        for _ in 0..3 {
            let simple = rects
                .iter()
                .all(|a| rects.iter().all(|b| transition_count(a, b) <= 1));
            if simple {
                let mut p = MarkovPartition::new(rects, Provenance::Constructed);
                p.segments = Some([lu, ls]);
                let report = verify_markov(&p);
                if !report.passed {
                    return Err(CatError::Construction(report.violations.join("; ")));
                }
                return Ok(p);
            }
            rects = refine(&rects);
        }
        tried.push(format!("lu={lu}, ls={ls}: transitions stay multiple"));
    }
    Err(CatError::Construction(format!(
        "no closing segment pair: {}",
        tried.join(" | ")
    )))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionMatrix {
    pub t: Vec<Vec<u8>>,
    pub mixing_time: Option<usize>,
}

pub const MIXING_CAP: usize = 20;

fn bool_mul(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| u8::from((0..n).any(|k| a[i][k] == 1 && b[k][j] == 1)))
                .collect()
        })
        .collect()
}

/// `T_{σσ'} = 1` iff `int Q_σ ∩ S⁻¹ int Q_σ' ≠ ∅`; mixing time by powers.
pub fn transition_matrix(p: &MarkovPartition) -> TransitionMatrix {
    let t: Vec<Vec<u8>> = p
        .rectangles
        .iter()
        .map(|a| {
            p.rectangles
                .iter()
                .map(|b| u8::from(transition_count(a, b) > 0))
                .collect()
        })
        .collect();
    let mut power = t.clone();
    let mut mixing_time = None;
    for a in 0..=MIXING_CAP {
        if power.iter().flatten().all(|v| *v == 1) {
            mixing_time = Some(a);
            break;
        }
        power = bool_mul(&power, &t);
    }
    TransitionMatrix { t, mixing_time }
}

/// Symbols `σ_{−n} … σ_n` of an orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolWindow {
    pub n: usize,
    pub symbols: Vec<usize>,
    /// Positions where the boundary policy picked the lowest incident id.
    #[serde(default)]
    pub boundary: Vec<usize>,
}

impl SymbolWindow {
    pub fn at(&self, j: i64) -> usize {
        self.symbols[(j + self.n as i64) as usize]
    }

    pub fn is_compatible(&self, t: &TransitionMatrix) -> Option<usize> {
        self.symbols.windows(2).position(|w| t.t[w[0]][w[1]] == 0)
    }
}

/// Rectangles visited by `S^j x` for `|j| ≤ n`.
pub fn encode(p: &MarkovPartition, x: TorusPoint, n: usize) -> SymbolWindow {
    let (u, s) = eigen_coords(x);
    let lp = lambda_plus().to_f64();
    let mut symbols = Vec::with_capacity(2 * n + 1);
    let mut boundary = Vec::new();
    for j in -(n as i64)..=(n as i64) {
        let f = lp.powi(j as i32);
        let (id, flagged) = p.locate(u * f, s / f);
        if flagged {
            boundary.push((j + n as i64) as usize);
        }
        symbols.push(id);
    }
    SymbolWindow {
        n,
        symbols,
        boundary,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decoded {
    pub center: TorusPoint,
    /// Diameter in angle units.
    pub diameter: f64,
}

/// One-sided chain of unstable (`forward`) or stable extents; returns the time-0 interval.
fn chain_interval(p: &MarkovPartition, w: &SymbolWindow, forward: bool) -> Result<(f64, f64)> {
    let phi = QSqrt5::phi().to_f64();
    let lp = lambda_plus().to_f64();
    let (grow, shrink) = if forward {
        (lp, 1.0 / lp)
    } else {
        (1.0 / lp, lp)
    };
    let c = p.fast[w.at(0)];
    let mut cur = (c.u0, c.u1, c.s0, c.s1);
    let mut offsets = Vec::with_capacity(w.n);
    for j in 1..=w.n as i64 {
        let k = if forward { j } else { -j };
        let q = p.fast[w.at(k)];
        let img = (cur.0 * grow, cur.1 * grow, cur.2 * shrink, cur.3 * shrink);
        let (x, y) = unit_coords_f64(img.0 - q.u0, img.2 - q.s0);
        let (bx, by) = (x.floor() as i64, y.floor() as i64);
        let mut hits = Vec::new();
        for dx in -4..=4 {
            for dy in -4..=4 {
                let m = [bx + dx, by + dy];
                let (ou, os) = (
                    m[0] as f64 + phi * m[1] as f64,
                    -phi * m[0] as f64 + m[1] as f64,
                );
                let (a0, a1) = (img.0.max(q.u0 + ou), img.1.min(q.u1 + ou));
                let (b0, b1) = (img.2.max(q.s0 + os), img.3.min(q.s1 + os));
                let tol_u = 1e-9 * (img.1 - img.0).min(q.u1 - q.u0) + 1e-14;
                let tol_s = 1e-9 * (img.3 - img.2).min(q.s1 - q.s0) + 1e-14;
                if a1 - a0 > tol_u && b1 - b0 > tol_s {
                    hits.push((a0 - ou, a1 - ou, b0 - os, b1 - os, ou, os));
                }
            }
        }
        let pos = (k + w.n as i64) as usize;
        match hits.as_slice() {
            [] => return Err(CatError::IncompatibleWindow(pos)),
            [h] => {
                cur = (h.0, h.1, h.2, h.3);
                offsets.push(if forward { h.4 } else { h.5 });
            }
            _ => {
                return Err(CatError::InvalidArgument(format!(
                    "window position {pos} meets {} translates",
                    hits.len()
                )))
            }
        }
    }
    let (mut lo, mut hi, scale) = if forward {
        (cur.0, cur.1, grow)
    } else {
        (cur.2, cur.3, shrink)
    };
    for off in offsets.iter().rev() {
        lo = (lo + off) / scale;
        hi = (hi + off) / scale;
    }
    Ok((lo, hi))
}

/// Intersect `S^{−j} Q_{σ_j}` over the window.
pub fn decode(p: &MarkovPartition, w: &SymbolWindow, t: &TransitionMatrix) -> Result<Decoded> {
    if w.symbols.len() != 2 * w.n + 1 || w.symbols.iter().any(|s| *s >= p.len()) {
        return Err(CatError::InvalidArgument("malformed symbol window".into()));
    }
    if let Some(pos) = w.is_compatible(t) {
        return Err(CatError::IncompatibleWindow(pos));
    }
    let (u0, u1) = chain_interval(p, w, true)?;
    let (s0, s1) = chain_interval(p, w, false)?;
    let phi = QSqrt5::phi().to_f64();
    let (cx, cy) = unit_coords_f64(0.5 * (u0 + u1), 0.5 * (s0 + s1));
    let tau = std::f64::consts::TAU;
    let diameter = ((u1 - u0).powi(2) + (s1 - s0).powi(2)).sqrt() / (1.0 + phi * phi).sqrt() * tau;
    Ok(Decoded {
        center: TorusPoint::new(cx * tau, cy * tau),
        diameter,
    })
}

/// Visit frequencies of each rectangle along the orbit of `x0` under the cat map.
pub fn birkhoff_frequency(p: &MarkovPartition, x0: TorusPoint, n: usize) -> Vec<f64> {
    let mut counts = vec![0u64; p.len()];
    let tau = std::f64::consts::TAU;
    let (mut x, mut y) = (x0.psi1 / tau, x0.psi2 / tau);
    let phi = QSqrt5::phi().to_f64();
    for _ in 0..n {
        let (id, _) = p.locate(x + phi * y, -phi * x + y);
        counts[id] += 1;
        let nx = (x + y).rem_euclid(1.0);
        let ny = (x + 2.0 * y).rem_euclid(1.0);
        x = nx;
        y = ny;
    }
    counts.iter().map(|c| *c as f64 / n as f64).collect()
}

/// Symbol sequence `σ_0 … σ_{n−1}` along a forward orbit.
pub fn orbit_symbols(p: &MarkovPartition, x0: TorusPoint, n: usize) -> Vec<usize> {
    let tau = std::f64::consts::TAU;
    let (mut x, mut y) = (x0.psi1 / tau, x0.psi2 / tau);
    let phi = QSqrt5::phi().to_f64();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(p.locate(x + phi * y, -phi * x + y).0);
        let nx = (x + y).rem_euclid(1.0);
        let ny = (x + 2.0 * y).rem_euclid(1.0);
        x = nx;
        y = ny;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_arithmetic() {
        let phi = QSqrt5::phi();
        assert_eq!(phi * phi, phi + QSqrt5::int(1));
        assert_eq!(lambda_plus() * lambda_minus(), QSqrt5::int(1));
        assert_eq!(phi.recip(), phi - QSqrt5::int(1));
        assert!(phi > QSqrt5::rational(8, 5) && phi < QSqrt5::rational(13, 8));
        assert_eq!(phi.floor(), 1);
        assert_eq!((-phi).floor(), -2);
        let s = phi.to_string();
        assert_eq!(s, "1+1√5/2");
        assert_eq!(s.parse::<QSqrt5>().unwrap(), phi);
        assert_eq!(
            "-3-2√5/7".parse::<QSqrt5>().unwrap(),
            QSqrt5::new(-3, -2, 7)
        );
        assert!("1.5".parse::<QSqrt5>().is_err());
    }

    proptest! {
        #[test]
        fn order_agrees_with_floats(a in -500i128..500, b in -500i128..500, d in 1i128..50,
                                    c in -500i128..500, e in -500i128..500, f in 1i128..50) {
            let x = QSqrt5::new(a, b, d);
            let y = QSqrt5::new(c, e, f);
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x < y, fx < fy);
            }
            prop_assert_eq!((x + y) - y, x);
            if !y.is_zero() {
                prop_assert_eq!((x * y).div(y), x);
            }
        }

        #[test]
        fn lattice_indices_roundtrip(m1 in -50i64..50, m2 in -50i64..50) {
            let (a, b) = lattice_point([m1, m2]);
            prop_assert_eq!(lattice_index_u(a), Some([m1, m2]));
            prop_assert_eq!(lattice_index_s(b), Some([m1, m2]));
        }
    }

    #[test]
    fn constructed_partition_is_markov() {
        let p = build_cat_partition().unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p.segments, Some([QSqrt5::phi(), QSqrt5::phi()]));
        let r = verify_markov(&p);
        assert!(r.passed, "{:?}", r.violations);
        assert!((p.total_area() - 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-9);
        let t = transition_matrix(&p);
        assert_eq!(t.mixing_time, Some(3));
        for a in &p.rectangles {
            for b in &p.rectangles {
                assert!(transition_count(a, b) <= 1);
            }
        }
    }

    #[test]
    fn shifted_rectangle_fails_with_named_segment() {
        let p = build_cat_partition().unwrap();
        let mut rects = p.rectangles.clone();
        rects[2].anchor[0] = rects[2].anchor[0] + QSqrt5::rational(1, 10);
        let r = verify_markov(&MarkovPartition::new(rects, Provenance::Loaded));
        assert!(!r.passed);
        assert!(
            r.violations.iter().any(|v| v.contains("rectangle 2")),
            "{:?}",
            r.violations
        );
    }

    #[test]
    fn whole_torus_rectangle_fails() {
        let whole =
            Rectangle::from_bounds(0, QSqrt5::ZERO, covolume(), QSqrt5::ZERO, QSqrt5::int(1));
        let r = verify_markov(&MarkovPartition::new(vec![whole], Provenance::Loaded));
        assert!(r.area_matches);
        assert!(!r.disjoint);
        assert!(!r.passed);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let p = build_cat_partition().unwrap();
        let q = MarkovPartition::from_json(&p.to_json()).unwrap();
        assert_eq!(q.rectangles, p.rectangles);
        assert_eq!(q.provenance, Provenance::Loaded);
        assert!(MarkovPartition::from_json(r#"{"rectangles":[],"extra":1}"#).is_err());
    }

    #[test]
    fn incompatible_window_is_rejected() {
        let p = build_cat_partition().unwrap();
        let t = transition_matrix(&p);
        let (a, b) = (0..7)
            .flat_map(|a| (0..7).map(move |b| (a, b)))
            .find(|(a, b)| t.t[*a][*b] == 0)
            .unwrap();
        let w = SymbolWindow {
            n: 1,
            symbols: vec![a, a, b],
            boundary: vec![],
        };
        let w = if t.t[a][a] == 1 {
            w
        } else {
            SymbolWindow {
                symbols: vec![a, b, b],
                ..w
            }
        };
        assert!(matches!(
            decode(&p, &w, &t),
            Err(CatError::IncompatibleWindow(_))
        ));
    }

    #[test]
    fn boundary_points_take_lowest_id() {
        let p = build_cat_partition().unwrap();
        // the fixed point is a corner of several rectangles
        let (id, flagged) = p.locate(0.0, 0.0);
        assert!(flagged);
        let incident: Vec<usize> = (0..p.len())
            .filter(|i| {
                let r = p.fast[*i];
                r.u0.abs() < 1e-12 || r.s0.abs() < 1e-12 || r.u1.abs() < 1e-12 || r.s1.abs() < 1e-12
            })
            .collect();
        assert!(id <= *incident.iter().min().unwrap());
    }

    #[test]
    fn closing_lengths_start_small() {
        let c = closing_lengths();
        assert!(!c.is_empty());
        let phi = QSqrt5::phi();
        assert!(c.contains(&(phi + QSqrt5::int(1), QSqrt5::int(1))));
    }
}
