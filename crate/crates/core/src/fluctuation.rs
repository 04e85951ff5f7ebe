//! Fluctuation-theorem algebra on ε-graded cumulants.
//!
//! A graded quantity is a vector indexed by ε-order. Polynomials in
//! `x = p − 1` (or in β) are vectors indexed by power.

use serde::Serialize;

use crate::correlation::{CumulantTable, JointTable, Parity};
use crate::error::{CatError, Result};

pub type Graded = Vec<f64>;
pub type Poly = Vec<f64>;

const ZERO_TOL: f64 = 1e-300;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn poly_add_scaled(acc: &mut Poly, p: &[f64], s: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += s * b;
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Leading ε-order of a graded quantity.
pub fn leading_order(a: &[f64]) -> Option<usize> {
    a.iter().position(|x| x.abs() > ZERO_TOL)
}

/// `a / b` as an ε-series: entry `j` is the coefficient of `ε^j` of the ratio.
pub fn graded_div(a: &[f64], b: &[f64]) -> Result<Graded> {
    let l = leading_order(b).ok_or(CatError::InvalidArgument(
        "division by a zero series".into(),
    ))?;
    if a.iter().take(l).any(|x| x.abs() > ZERO_TOL) {
        return Err(CatError::InvalidArgument(
            "numerator starts below the denominator's leading order".into(),
        ));
    }
    let len = a.len().min(b.len()).saturating_sub(l);
    let mut r = vec![0.0; len];
    for j in 0..len {
        let mut v = a[j + l];
        for i in 0..j {
            v -= r[i] * b[l + j - i];
        }
        r[j] = v / b[l];
    }
    Ok(r)
}

/// Compositions of `total` into `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Cumulants and SRB mean through a fixed ε-order.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaSeries {
    pub max_order: usize,
    /// `cumulants[k][m]`; rows 0 and 1 are zero.
    pub cumulants: Vec<Graded>,
    pub mean: Graded,
}

impl LambdaSeries {
    pub fn cumulant(&self, k: usize) -> Graded {
        self.cumulants
            .get(k)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.max_order + 1])
    }

    /// β-polynomial of λ at ε-order `m`.
    pub fn beta_poly(&self, m: usize) -> Poly {
        let mut p = vec![0.0; self.max_order + 1];
        for (k, row) in self.cumulants.iter().enumerate().skip(2) {
            p[k] = row[m] / factorial(k);
        }
        p
    }

    /// `λ(β)` through the stored order, with ε reinstated.
    pub fn evaluate(&self, beta: f64, eps: f64) -> f64 {
        (0..=self.max_order)
            .map(|m| {
                let p = self.beta_poly(m);
                eps.powi(m as i32) * p.iter().rev().fold(0.0, |acc, c| acc * beta + c)
            })
            .sum()
    }
}

/// `λ(β) = Σ_k C_k β^k / k!` from a cumulant table.
pub fn lambda_from_cumulants(table: &CumulantTable, k: usize) -> Result<LambdaSeries> {
    if table.max_order < k {
        let mut missing = Vec::new();
        for m in table.max_order + 1..=k {
            for n in 2..=m {
                missing.push(format!("C[{n}][{m}]"));
            }
            missing.push(format!("mean[{m}]"));
        }
        return Err(CatError::MissingEntries(missing.join(", ")));
    }
    let cumulants = (0..=k)
        .map(|n| {
            (0..=k)
                .map(|m| if n >= 2 { table.get(n, m) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(LambdaSeries {
        max_order: k,
        cumulants,
        mean: table.mean[..=k].to_vec(),
    })
}

/// `λ(β) − λ(−1−β) + 2σ₊β + σ₊` as `[ε-order][β-power]`.
pub fn check_rel1(l: &LambdaSeries) -> Vec<Poly> {
    let k = l.max_order;
    (0..=k)
        .map(|m| {
            let lam = l.beta_poly(m);
            let mut r = lam.clone();
            r.resize(k.max(2) + 1, 0.0);
            for (n, c) in lam.iter().enumerate() {
                // (−1−β)^n = (−1)^n Σ_j C(n,j) β^j
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                for j in 0..=n {
                    r[j] -= c * sign * binomial(n, j);
                }
            }
            r[0] += l.mean[m];
            r[1] += 2.0 * l.mean[m];
            r
        })
        .collect()
}

/// `C_n − Σ_{k≥0} (−1)^{k+n} C_{k+n}/k!` per ε-order through `k_max`.
pub fn check_rel3(table: &CumulantTable, n: usize, k_max: usize) -> Result<Graded> {
    if n < 2 {
        return Err(CatError::InvalidArgument("rel3 needs n >= 2".into()));
    }
    let l = lambda_from_cumulants(table, k_max)?;
    Ok((0..=k_max)
        .map(|m| {
            let mut r = l.cumulant(n)[m];
            for k in 0..=k_max.saturating_sub(n) {
                let sign = if (k + n) % 2 == 0 { 1.0 } else { -1.0 };
                r -= sign * l.cumulant(k + n)[m] / factorial(k);
            }
            r
        })
        .collect())
}

/// `⟨O⟩₊` per ε-order from the joint cumulants, for O odd under time reversal.
pub fn observable_mean_expansion(joint: &JointTable, k_max: usize) -> Result<Graded> {
    match joint.parity {
        None => return Err(CatError::ParityUndeclared),
        Some(Parity::Even) => {
            return Err(CatError::ParityViolation(
                "the mean expansion needs an observable odd under time reversal".into(),
            ))
        }
        Some(Parity::Odd) => {}
    }
    let orders = k_max.min(joint.max_order);
    let max_ins = joint.entries.keys().map(|(a, b)| a + b).max().unwrap_or(0);
    let mut out = vec![0.0; orders + 1];
    for (m, slot) in out.iter_mut().enumerate() {
        for k in 2..=max_ins {
            let pre = if k % 2 == 0 { 1.0 } else { -1.0 } / 2f64.powi(k as i32 - 1);
            for l in 0..=(k - 1) / 2 {
                let o = 2 * l + 1;
                let s = k - o;
                let c = joint.get(s, o, m).ok_or_else(|| {
                    CatError::MissingEntries(format!("C[{s} sigma, {o} observable][{m}]"))
                })?;
                *slot += pre * c / (factorial(o) * factorial(s));
            }
        }
    }
    Ok(out)
}

/// The same mean from the unreduced sum over all index strings, with the
/// factor `1 − (−1)^{#O}` left explicit; even O-counts cancel term by term.
pub fn observable_mean_unreduced(joint: &JointTable, k_max: usize) -> Result<Graded> {
    let orders = k_max.min(joint.max_order);
    let max_ins = joint.entries.keys().map(|(a, b)| a + b).max().unwrap_or(0);
    let mut out = vec![0.0; orders + 1];
    for (m, slot) in out.iter_mut().enumerate() {
        for k in 2..=max_ins {
            for o in 0..=k {
                let s = k - o;
                let c = joint.get(s, o, m).ok_or_else(|| {
                    CatError::MissingEntries(format!("C[{s} sigma, {o} observable][{m}]"))
                })?;
                let strings = binomial(k, o);
                let weight = 1.0 - if o % 2 == 0 { 1.0 } else { -1.0 };
                *slot += (-0.5f64).powi(k as i32) / factorial(k) * strings * c * weight;
            }
        }
    }
    Ok(out)
}

/// Residuals of `C_{1_l 2_{n−l}} = Σ_k (−1)^{n+k}/k! C_{1_{k+l} 2_{n−l}}`, keyed by `(l, n)`.
pub fn joint_relation_residuals(joint: &JointTable) -> Vec<((usize, usize), Graded)> {
    let max_ins = joint.entries.keys().map(|(a, b)| a + b).max().unwrap_or(0);
    let mut out = Vec::new();
    for n in 2..=max_ins {
        for l in 0..=n {
            let o = n - l;
            let Some(lhs) = joint.entries.get(&(l, o)) else {
                continue;
            };
            let mut r = lhs.clone();
            for k in 0.. {
                let Some(row) = joint.entries.get(&(k + l, o)) else {
                    break;
                };
                let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
                for (x, y) in r.iter_mut().zip(row) {
                    *x -= sign * y / factorial(k);
                }
            }
            out.push(((l, n), r));
        }
    }
    out
}

/// ζ as `[ε-order][power of (p−1)]`, with the saddle point used.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaSeries {
    pub max_order: usize,
    pub coeffs: Vec<Poly>,
    pub beta_star: Vec<Poly>,
}

impl ZetaSeries {
    pub fn evaluate(&self, p: f64, eps: f64) -> f64 {
        let x = p - 1.0;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| eps.powi(m as i32) * c.iter().rev().fold(0.0, |acc, v| acc * x + v))
            .sum()
    }

    /// Coefficient of `(p−1)^j` at ε-order `m`.
    pub fn coeff(&self, m: usize, j: usize) -> f64 {
        self.coeffs
            .get(m)
            .and_then(|c| c.get(j))
            .copied()
            .unwrap_or(0.0)
    }
}

fn table_rows(table: &CumulantTable, k: usize) -> (Vec<Graded>, Graded) {
    let c = (0..=k)
        .map(|n| {
            (0..=k)
                .map(|m| if n >= 2 { table.get(n, m) } else { 0.0 })
                .collect()
        })
        .collect();
    let mean = (0..=k)
        .map(|m| table.mean.get(m).copied().unwrap_or(0.0))
        .collect();
    (c, mean)
}

/// Saddle point `β*⁽ⁿ⁾` for `n = 0..=order`, each a polynomial in `p − 1`.
pub fn beta_star(table: &CumulantTable, order: usize) -> Result<Vec<Poly>> {
    let k = table.max_order;
    if order + 2 > k {
        return Err(CatError::OrderCap {
            requested: order + 2,
            cap: k,
        });
    }
    let (c, mean) = table_rows(table, k);
    if leading_order(&c[2]) != Some(2) {
        return Err(CatError::NoLinearResponse);
    }
    let base = graded_div(&mean, &c[2])?;
    let ratios: Vec<Graded> = (0..=k)
        .map(|n| {
            if n >= 3 {
                graded_div(&c[n], &c[2])
            } else {
                Ok(vec![])
            }
        })
        .collect::<Result<_>>()?;
    let mut beta: Vec<Poly> = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let mut b: Poly = vec![0.0, base.get(n).copied().unwrap_or(0.0)];
        for kk in 3..=n + 2 {
            let pre = 1.0 / factorial(kk - 1);
            for m in 0..=n + 2 - kk {
                let r = ratios[kk].get(n - m).copied().unwrap_or(0.0);
                if r == 0.0 {
                    continue;
                }
                for comp in compositions(m, kk - 1) {
                    let mut prod: Poly = vec![1.0];
                    for ni in &comp {
                        prod = poly_mul(&prod, &beta[*ni]);
                    }
                    poly_add_scaled(&mut b, &prod, -pre * r);
                }
            }
        }
        beta.push(b);
    }
    Ok(beta)
}

/// ζ through ε-order `order` from the saddle-point recursion.
pub fn zeta(table: &CumulantTable, order: usize) -> Result<ZetaSeries> {
    if order > table.max_order {
        return Err(CatError::OrderCap {
            requested: order,
            cap: table.max_order,
        });
    }
    let (c, mean) = table_rows(table, order);
    let beta = if order >= 2 {
        beta_star(table, order - 2)?
    } else {
        Vec::new()
    };
    let mut coeffs = vec![Vec::new(); order + 1];
    for (n, zn) in coeffs.iter_mut().enumerate().skip(2) {
        for m in 0..=n - 2 {
            let lin = poly_mul(&beta[m], &[0.0, 1.0]);
            poly_add_scaled(zn, &lin, mean[n - m]);
        }
        for k in 2..=n {
            for m in 0..=n - k {
                let ck = c[k][n - m];
                if ck == 0.0 {
                    continue;
                }
                for comp in compositions(m, k) {
                    let mut prod: Poly = vec![1.0];
                    for ni in &comp {
                        prod = poly_mul(&prod, &beta[*ni]);
                    }
                    poly_add_scaled(zn, &prod, -ck / factorial(k));
                }
            }
        }
    }
    Ok(ZetaSeries {
        max_order: order,
        coeffs,
        beta_star: beta,
    })
}

/// `(x²/2)(σ₊ − C₂/4) − x³C₃/48 − x⁴C₄/384`, order by order.
pub fn zeta_closed_form(table: &CumulantTable, order: usize) -> ZetaSeries {
    let coeffs = (0..=order)
        .map(|m| {
            let s = table.mean.get(m).copied().unwrap_or(0.0);
            vec![
                0.0,
                0.0,
                0.5 * (s - table.get(2, m) / 4.0),
                -table.get(3, m) / 48.0,
                -table.get(4, m) / 384.0,
            ]
        })
        .collect();
    ZetaSeries {
        max_order: order,
        coeffs,
        beta_star: Vec::new(),
    }
}

/// Replace `⟨σ⟩₊` and `C₃` by the values the fluctuation theorem forces:
/// `C₃ = C₄/2`, `⟨σ⟩₊ = C₂/2 − C₃/6 + C₄/24`.
pub fn impose_ft(table: &CumulantTable) -> CumulantTable {
    let mut t = table.clone();
    for m in 0..=t.max_order {
        if t.c.len() > 3 {
            t.c[3][m] = table.get(4, m) / 2.0;
        }
        t.mean[m] = t.get(2, m) / 2.0 - t.get(3, m) / 6.0 + t.get(4, m) / 24.0;
    }
    t
}

/// `x²C₂/8 − (x²/48)C₄(1 + x/2 + x²/8)`.
pub fn zeta_ft_form(table: &CumulantTable, order: usize) -> ZetaSeries {
    let coeffs = (0..=order)
        .map(|m| {
            let (c2, c4) = (table.get(2, m), table.get(4, m));
            vec![0.0, 0.0, c2 / 8.0 - c4 / 48.0, -c4 / 96.0, -c4 / 384.0]
        })
        .collect();
    ZetaSeries {
        max_order: order,
        coeffs,
        beta_star: Vec::new(),
    }
}

/// `−ζ(p) + ζ(−p)` as `[ε-order][power of p]`.
pub fn odd_part(z: &ZetaSeries) -> Vec<Poly> {
    z.coeffs
        .iter()
        .map(|c| {
            let mut out = vec![0.0; c.len().max(2)];
            for (j, v) in c.iter().enumerate() {
                // −(p−1)^j + (−p−1)^j = −Σ_i C(j,i) p^i (−1)^{j−i} (1 − (−1)^i)
                for i in (1..=j).step_by(2) {
                    let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                    out[i] -= 2.0 * v * binomial(j, i) * sign;
                }
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Asymmetry {
    /// `A` as an ε-series (entry `j` multiplies `ε^j`).
    pub a: Graded,
    /// `B` per ε-order.
    pub b: Graded,
}

/// `A` and `B` from `−ζ(p)+ζ(−p) = p⟨σ⟩₊(1+A) + Bp³`.
pub fn asymmetry_coefficients(z: &ZetaSeries, mean: &[f64]) -> Result<Asymmetry> {
    if leading_order(mean).is_none() {
        return Err(CatError::ZeroMean);
    }
    let odd = odd_part(z);
    let n = z.max_order.min(mean.len() - 1);
    let lin: Graded = (0..=n)
        .map(|m| odd[m].get(1).copied().unwrap_or(0.0))
        .collect();
    let mut a = graded_div(&lin, &mean[..=n])?;
    if let Some(a0) = a.first_mut() {
        *a0 -= 1.0;
    }
    let b = (0..=n)
        .map(|m| odd[m].get(3).copied().unwrap_or(0.0))
        .collect();
    Ok(Asymmetry { a, b })
}

/// `A = ⟨σ⟩₊⁻¹[⟨σ⟩₊ − C₂/2 + C₃/8 − C₄/48]`, `B = (C₃ − C₄/2)/24`.
pub fn asymmetry_from_cumulants(table: &CumulantTable) -> Result<Asymmetry> {
    let k = table.max_order;
    if leading_order(&table.mean).is_none() {
        return Err(CatError::ZeroMean);
    }
    let num: Graded = (0..=k)
        .map(|m| {
            table.mean[m] - table.get(2, m) / 2.0 + table.get(3, m) / 8.0 - table.get(4, m) / 48.0
        })
        .collect();
    let a = graded_div(&num, &table.mean)?;
    let b = (0..=k)
        .map(|m| (table.get(3, m) - table.get(4, m) / 2.0) / 24.0)
        .collect();
    Ok(Asymmetry { a, b })
}

/// First order at which a graded residual is nonzero.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub order: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FTReport {
    pub max_order: usize,
    /// `rel1[m]` is the β-polynomial residual at ε-order `m`.
    pub rel1: Vec<Poly>,
    /// `(n, residual per ε-order)`.
    pub rel3: Vec<(usize, Graded)>,
    /// Residual of `λ(−1) = ⟨σ⟩₊` per ε-order.
    pub normalization: Graded,
    pub leading_violation: Option<Violation>,
    /// Largest observed |ε_τ|, filled from simulations; an estimate only.
    pub p_star_estimate: Option<f64>,
}

fn first_nonzero(r: &[f64], tol: f64) -> Option<Violation> {
    r.iter().position(|v| v.abs() > tol).map(|order| Violation {
        order,
        value: r[order],
    })
}

/// Residuals of every implied relation, order by order.
pub fn ft_report(table: &CumulantTable, k: usize, tol: f64) -> Result<FTReport> {
    let l = lambda_from_cumulants(table, k)?;
    let rel1 = check_rel1(&l);
    let rel3 = (2..=k.max(2))
        .map(|n| Ok((n, check_rel3(table, n, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let normalization: Graded = (0..=k)
        .map(|m| {
            let lam_m1: f64 = (2..=k)
                .map(|n| l.cumulant(n)[m] * if n % 2 == 0 { 1.0 } else { -1.0 } / factorial(n))
                .sum();
            lam_m1 - l.mean[m]
        })
        .collect();
    let rel3_lead = rel3.first().map(|(_, r)| r.clone()).unwrap_or_default();
    Ok(FTReport {
        max_order: k,
        leading_violation: first_nonzero(&rel3_lead, tol),
        rel1,
        rel3,
        normalization,
        p_star_estimate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quadratic() -> CumulantTable {
        CumulantTable::from_values(2, &[(2, 2, 2.0)], &[(2, 1.0)])
    }

    #[test]
    fn lambda_basics() {
        let l = lambda_from_cumulants(&quadratic(), 2).unwrap();
        assert_eq!(l.beta_poly(2), vec![0.0, 0.0, 1.0]);
        assert_eq!(l.evaluate(0.0, 0.1), 0.0);
        assert_abs_diff_eq!(l.evaluate(-1.0, 0.1), 0.01, epsilon = 1e-15);
        let err = lambda_from_cumulants(&quadratic(), 3).unwrap_err();
        assert!(err.to_string().contains("C[3][3]"));
    }

    #[test]
    fn rel1_vanishes_at_second_order() {
        let l = lambda_from_cumulants(&quadratic(), 2).unwrap();
        for row in check_rel1(&l) {
            assert!(row.iter().all(|v| *v == 0.0));
        }
        assert_eq!(check_rel3(&quadratic(), 2, 2).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn graded_division() {
        // (ε² + 2ε³) / (2ε² + ε³) = 1/2 + (3/4)ε + …
        let r = graded_div(&[0.0, 0.0, 1.0, 2.0], &[0.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(r, vec![0.5, 0.75]);
        assert!(graded_div(&[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn leading_saddle_point() {
        let b = beta_star(
            &CumulantTable::from_values(3, &[(2, 2, 2.0)], &[(2, 1.0)]),
            1,
        )
        .unwrap();
        assert_eq!(b[0], vec![0.0, 0.5]);
        let none = CumulantTable::from_values(3, &[], &[(2, 1.0)]);
        assert!(matches!(
            beta_star(&none, 1),
            Err(CatError::NoLinearResponse)
        ));
    }

    #[test]
    fn third_cumulant_enters_saddle_point() {
        let t = CumulantTable::from_values(3, &[(2, 2, 10.0), (3, 3, -12.0)], &[(2, 5.0)]);
        let b = beta_star(&t, 1).unwrap();
        // β*⁽¹⁾ = −½ (β*⁽⁰⁾)² C₃⁽³⁾/C₂⁽²⁾ with β*⁽⁰⁾ = x/2
        assert_abs_diff_eq!(b[1][2], -0.5 * 0.25 * (-12.0 / 10.0), epsilon = 1e-15);
    }

    #[test]
    fn legendre_consistency_quadratic() {
        let eps = 0.1;
        let z = zeta(&quadratic(), 2).unwrap();
        let l = lambda_from_cumulants(&quadratic(), 2).unwrap();
        let mean = eps * eps;
        for i in 0..=20 {
            let p = 0.5 + i as f64 * 0.05;
            let mut best = f64::NEG_INFINITY;
            for j in 0..=40000 {
                let b = -4.0 + j as f64 * 2e-4;
                best = best.max(b * mean * (p - 1.0) - l.evaluate(b, eps));
            }
            assert_abs_diff_eq!(best, z.evaluate(p, eps), epsilon = 1e-8);
        }
    }

    #[test]
    fn ft_form_has_no_asymmetry() {
        let t = CumulantTable::from_values(
            4,
            &[(2, 2, 2.0), (2, 4, 4.5), (3, 4, 3.0), (4, 4, -6.0)],
            &[(2, 1.0), (4, 1.5)],
        );
        let f = impose_ft(&t);
        let a = asymmetry_from_cumulants(&f).unwrap();
        assert!(a.a.iter().all(|v| v.abs() < 1e-15));
        assert!(a.b.iter().all(|v| v.abs() < 1e-15));
        let closed = zeta_closed_form(&f, 4);
        let ft = zeta_ft_form(&f, 4);
        for m in 0..=4 {
            for j in 0..5 {
                assert_abs_diff_eq!(closed.coeff(m, j), ft.coeff(m, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn asymmetry_from_zeta_matches_formula() {
        let t = CumulantTable::from_values(
            4,
            &[(2, 2, 2.0), (2, 4, 4.5), (3, 4, 3.0), (4, 4, -6.0)],
            &[(2, 1.0), (4, 1.5)],
        );
        let z = zeta_closed_form(&t, 4);
        let from_z = asymmetry_coefficients(&z, &t.mean).unwrap();
        let direct = asymmetry_from_cumulants(&t).unwrap();
        for (x, y) in from_z.a.iter().zip(&direct.a) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        for (x, y) in from_z.b.iter().zip(&direct.b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(direct.b[4], 0.25, epsilon = 1e-15);
    }
}
