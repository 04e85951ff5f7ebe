//! Exact ε-order SRB means and cumulants of the phase-space contraction.
//!
//! In conjugation coordinates the SRB state is the Lebesgue measure tilted
//! by `U = −Σ_k Ã∘S₀^k`, with `Ã` the expansion rate minus its mean. Joint
//! SRB cumulants therefore expand as
//! `⟨X₁;…;Xₙ⟩₊ = Σ_r (1/r!) κ₀(X₁,…,Xₙ,U,…,U)`, and every time-summed
//! cumulant reduces to the shift sum
//! `Σ_{k₁…k_{n−1}} κ₀(F₁∘S^{k₁},…,F_{n−1}∘S^{k_{n−1}},Fₙ)`
//! of Lebesgue cumulants of trigonometric polynomials. On Fourier monomials
//! the Lebesgue cumulant is a Möbius sum over set partitions of indicator
//! functions "block frequencies sum to zero", and the shifts are solved
//! exactly on integer orbits.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CatError, Result};
use crate::fourier::{Freq, TrigPoly};
use crate::orbit::{OrbitTools, Vec2};
use crate::parallel::map_ordered;
use crate::perturbation::{log1p_series, Composer, OrderSeries, Perturbation};
use crate::torus::{Harmonic, HarmonicForce, IntMatrix2};

/// Behaviour under the time reversal `I₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

/// An observable given order by order in ε, with its declared parity.
#[derive(Debug, Clone)]
pub struct ObservableSeries {
    pub orders: Vec<TrigPoly>,
    pub parity: Option<Parity>,
}

impl ObservableSeries {
    pub fn new(orders: Vec<TrigPoly>, parity: Option<Parity>) -> Self {
        Self { orders, parity }
    }

    /// Parity of each order under `I₀`, if it has a definite one.
    pub fn measured_parity(&self) -> Vec<Option<Parity>> {
        let trunc = crate::fourier::Truncation::default();
        self.orders
            .iter()
            .map(|p| {
                let r = p.compose_matrix(&IntMatrix2::REVERSAL, &trunc).ok()?;
                if r.max_abs_diff(p) < 1e-12 {
                    Some(Parity::Even)
                } else if r.add(p).l1_norm() < 1e-12 {
                    Some(Parity::Odd)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Cumulants `C[n][m]` (coefficient of `ε^m`) and SRB means.
#[derive(Debug, Clone, Serialize)]
pub struct CumulantTable {
    pub max_order: usize,
    pub c: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub shift_window: i64,
    pub tail_bound: f64,
}

impl CumulantTable {
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.c.get(n).and_then(|r| r.get(m)).copied().unwrap_or(0.0)
    }

    /// Table from explicit values, for synthetic inputs.
    pub fn from_values(
        max_order: usize,
        entries: &[(usize, usize, f64)],
        mean: &[(usize, f64)],
    ) -> Self {
        let mut c = vec![vec![0.0; max_order + 1]; max_order + 1];
        for &(n, m, v) in entries {
            c[n][m] = v;
        }
        let mut mv = vec![0.0; max_order + 1];
        for &(m, v) in mean {
            mv[m] = v;
        }
        Self {
            max_order,
            c,
            mean: mv,
            shift_window: 0,
            tail_bound: 0.0,
        }
    }
}

/// Joint cumulants `C_{1…1 2…2}` keyed by (σ-insertions, O-insertions), per ε-order.
#[derive(Debug, Clone, Serialize)]
pub struct JointTable {
    pub max_order: usize,
    pub parity: Option<Parity>,
    pub entries: BTreeMap<(usize, usize), Vec<f64>>,
}

impl JointTable {
    pub fn get(&self, sigma_count: usize, obs_count: usize, m: usize) -> Option<f64> {
        self.entries
            .get(&(sigma_count, obs_count))
            .and_then(|v| v.get(m))
            .copied()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportMatrix {
    pub l: Vec<Vec<f64>>,
    pub symmetry_residual: f64,
}

/// One shift-sum evaluation, kept for independent re-evaluation.
#[derive(Debug, Clone)]
pub struct ShiftSumRecord {
    pub factors: Vec<TrigPoly>,
    pub value: f64,
}

struct Prepared {
    terms: Vec<(Vec2, Complex64)>,
    /// Precise eigen-coordinates and form value per term.
    geometry: Vec<((f64, f64), i128)>,
    by_form: BTreeMap<i128, BTreeMap<Vec2, Complex64>>,
}

fn prepare(tools: &OrbitTools, p: &TrigPoly, need_index: bool) -> Result<Prepared> {
    let terms: Vec<(Vec2, Complex64)> = p
        .oscillating()
        .into_iter()
        .map(|(nu, c)| ([nu[0] as i128, nu[1] as i128], c))
        .collect();
    let geometry = terms
        .iter()
        .map(|(nu, _)| {
            let q = tools
                .form(*nu)
                .ok_or(CatError::Overflow("invariant form"))?;
            Ok((tools.eigen_precise(*nu), q))
        })
        .collect::<Result<_>>()?;
    let mut by_form: BTreeMap<i128, BTreeMap<Vec2, Complex64>> = BTreeMap::new();
    if need_index {
        for (nu, c) in &terms {
            let q = tools
                .form(*nu)
                .ok_or(CatError::Overflow("invariant form"))?;
            let (rep, _) = tools
                .canonical(*nu)
                .ok_or(CatError::Overflow("orbit representative"))?;
            *by_form.entry(q).or_default().entry(rep).or_default() += c;
        }
    }
    Ok(Prepared {
        terms,
        geometry,
        by_form,
    })
}

/// Set partitions of `{0..n}` with all blocks of size ≥ 2, as block masks.
fn partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(rest: u32, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest == 0 {
            out.push(acc.clone());
            return;
        }
        let first = rest & rest.wrapping_neg();
        let others = rest & !first;
        // iterate subsets of `others` to join `first`
        let mut sub = others;
        loop {
            let block = first | sub;
            if block.count_ones() >= 2 {
                acc.push(block);
                rec(rest & !block, acc, out);
                acc.pop();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }
    let mut out = Vec::new();
    rec((1u32 << n) - 1, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Lebesgue joint cumulant of monomials `e^{iμ_j·ψ}` (all `μ_j ≠ 0`).
fn monomial_cumulant(mu: &[Vec2], parts: &[Vec<u32>]) -> f64 {
    let n = mu.len();
    let full = (1u32 << n) - 1;
    let mut zero = vec![false; 1 << n];
    let mut sums = vec![[0i128; 2]; 1 << n];
    let mut proper = false;
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        let prev = mask & (mask - 1);
        let s = [
            sums[prev as usize][0] + mu[low][0],
            sums[prev as usize][1] + mu[low][1],
        ];
        sums[mask as usize] = s;
        if s == [0, 0] {
            zero[mask as usize] = true;
            if mask != full && mask.count_ones() >= 2 && (full & !mask).count_ones() >= 2 {
                proper = true;
            }
        }
    }
    if !zero[full as usize] {
        return 0.0;
    }
    if !proper {
        return 1.0;
    }
    parts
        .iter()
        .filter(|p| p.iter().all(|b| zero[*b as usize]))
        .map(|p| {
            let k = p.len();
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            s * factorial(k - 1)
        })
        .sum()
}

/// Exact shift-summed Lebesgue cumulant engine.
pub struct ShiftSummer {
    tools: OrbitTools,
    pub window_margin: i64,
    max_window: Mutex<i64>,
}

impl ShiftSummer {
    pub fn new(s0: &IntMatrix2) -> Result<Self> {
        Ok(Self {
            tools: OrbitTools::new(s0)?,
            window_margin: 2,
            max_window: Mutex::new(0),
        })
    }

    pub fn max_window_used(&self) -> i64 {
        *self.max_window.lock().expect("window lock")
    }

    fn window_for(&self, mu: &[Vec2], n: usize) -> i64 {
        let m = mu
            .iter()
            .map(|v| ((v[0] as f64).powi(2) + (v[1] as f64).powi(2)).sqrt())
            .fold(1.0, f64::max);
        let per = ((5f64.sqrt() * m * m).ln() / self.tools.log_lambda()).ceil() as i64;
        let w = per.max(1) * (n as i64 - 2).max(1) + self.window_margin;
        let mut g = self.max_window.lock().expect("window lock");
        *g = (*g).max(w);
        w
    }

    /// `Σ_{k₁…k_{n−1}} κ₀(F₁∘S^{k₁}, …, Fₙ)`; for `n = 1` the plain average.
    pub fn shift_sum(&self, factors: &[&TrigPoly]) -> Result<f64> {
        let n = factors.len();
        match n {
            0 => Ok(0.0),
            1 => Ok(factors[0].average()),
            2 => self.pair_sum(factors[0], factors[1]),
            _ => self.general_sum(factors),
        }
    }

    fn pair_sum(&self, a: &TrigPoly, b: &TrigPoly) -> Result<f64> {
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let idx = prepare(&self.tools, small, true)?;
        let pl = prepare(&self.tools, large, false)?;
        let mut reps: BTreeMap<Vec2, Complex64> = BTreeMap::new();
        for m in idx.by_form.values() {
            for (r, c) in m {
                *reps.entry(*r).or_default() += c;
            }
        }
        let parts: Vec<Result<Complex64>> = map_ordered(&pl.terms, |(nu, c)| {
            let neg = [-nu[0], -nu[1]];
            let (rep, _) = self
                .tools
                .canonical(neg)
                .ok_or(CatError::Overflow("orbit representative"))?;
            Ok(reps.get(&rep).map(|cb| c * cb).unwrap_or_default())
        });
        let mut acc = Complex64::new(0.0, 0.0);
        for p in parts {
            acc += p?;
        }
        Ok(acc.re)
    }

    fn general_sum(&self, factors: &[&TrigPoly]) -> Result<f64> {
        let n = factors.len();
        // choose the solved factor (b) and the root-scanned factor (a) to keep the
        // innermost loop small; the rest are windowed, the last is the base
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(factors[i].len()));
        // base = largest, b = second largest, a = third largest
        let base = order[0];
        let b = order[1];
        let a = order[2];
        let windowed: Vec<usize> = order[3..].to_vec();
        let prepared: Vec<Prepared> = (0..n)
            .map(|i| prepare(&self.tools, factors[i], i == b))
            .collect::<Result<_>>()?;
        if prepared.iter().any(|p| p.terms.is_empty()) {
            return Ok(0.0);
        }
        let parts = partitions(n);
        let base_terms = &prepared[base].terms;
        let results: Vec<Result<Complex64>> = map_ordered(base_terms, |(nu_base, c_base)| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mu = vec![[0i128; 2]; n];
            mu[base] = *nu_base;
            self.scan_windowed(
                &prepared, &windowed, 0, a, b, *c_base, &mut mu, &parts, &mut acc,
            )?;
            Ok(acc)
        });
        let mut acc = Complex64::new(0.0, 0.0);
        for r in results {
            acc += r?;
        }
        Ok(acc.re)
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_windowed(
        &self,
        prepared: &[Prepared],
        windowed: &[usize],
        depth: usize,
        a: usize,
        b: usize,
        coeff: Complex64,
        mu: &mut Vec<Vec2>,
        parts: &[Vec<u32>],
        acc: &mut Complex64,
    ) -> Result<()> {
        let n = mu.len();
        if depth == windowed.len() {
            return self.solve_pair(prepared, a, b, coeff, mu, parts, acc);
        }
        let i = windowed[depth];
        for (nu, c) in &prepared[i].terms {
            // window from the base, the frequencies fixed so far and this one
            let mut known: Vec<Vec2> = vec![*nu];
            for j in 0..n {
                if windowed[..depth].contains(&j) || (j != a && j != b && !windowed.contains(&j)) {
                    known.push(mu[j]);
                }
            }
            let w = self.window_for(&known, n);
            for k in -w..=w {
                let Some(v) = self.tools.power(*nu, k) else {
                    continue;
                };
                mu[i] = v;
                self.scan_windowed(
                    prepared,
                    windowed,
                    depth + 1,
                    a,
                    b,
                    coeff * c,
                    mu,
                    parts,
                    acc,
                )?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_pair(
        &self,
        prepared: &[Prepared],
        a: usize,
        b: usize,
        coeff: Complex64,
        mu: &mut [Vec2],
        parts: &[Vec<u32>],
        acc: &mut Complex64,
    ) -> Result<()> {
        let n = mu.len();
        let mut v = [0i128; 2];
        for (i, m) in mu.iter().enumerate() {
            if i != a && i != b {
                v = [v[0] + m[0], v[1] + m[1]];
            }
        }
        let v_geom = if v == [0, 0] {
            None
        } else {
            let qv = self
                .tools
                .form(v)
                .ok_or(CatError::Overflow("invariant form"))?;
            Some((self.tools.eigen_precise(v), qv))
        };
        for ((nu_a, c_a), (ea, qa)) in prepared[a].terms.iter().zip(&prepared[a].geometry) {
            let mut shifts: Vec<i64> = Vec::new();
            if let Some((ev, qv)) = v_geom {
                for q in prepared[b].by_form.keys() {
                    for k in self.tools.shift_candidates_with(*ea, *qa, ev, qv, *q) {
                        if !shifts.contains(&k) {
                            shifts.push(k);
                        }
                    }
                }
            } else {
                let w = self.window_for(&[*nu_a], n + 1);
                shifts.extend(-w..=w);
            }
            for k in shifts {
                let Some(ma) = self.tools.power(*nu_a, k) else {
                    continue;
                };
                let target = [-(ma[0] + v[0]), -(ma[1] + v[1])];
                if target == [0, 0] {
                    continue;
                }
                let Some(q) = self.tools.form(target) else {
                    continue;
                };
                let Some(reps) = prepared[b].by_form.get(&q) else {
                    continue;
                };
                let Some((rep, _)) = self.tools.canonical(target) else {
                    continue;
                };
                let Some(c_b) = reps.get(&rep) else { continue };
                mu[a] = ma;
                mu[b] = target;
                let kappa = monomial_cumulant(mu, parts);
                if kappa != 0.0 {
                    *acc += coeff * c_a * c_b * kappa;
                }
            }
        }
        Ok(())
    }
}

/// Series data needed for SRB averages, built once per force and order.
pub struct Engine {
    pub pert: Perturbation,
    pub max_order: usize,
    pub boundary_terms: bool,
    pub sigma: Vec<TrigPoly>,
    pub sigma_tilde: Vec<TrigPoly>,
    pub a_tilde: Vec<TrigPoly>,
    pub h: OrderSeries<[TrigPoly; 2]>,
    summer: ShiftSummer,
    record: Option<Mutex<Vec<ShiftSumRecord>>>,
}

/// `−log det DS_ε` as a series in ε, orders `0..=k`.
pub fn sigma_series(pert: &Perturbation, k: usize) -> Result<ObservableSeries> {
    let (lin, quad) = pert.jacobian_terms();
    let mut x = OrderSeries {
        orders: vec![TrigPoly::zero(); k + 1],
        tail_bounds: vec![0.0; k + 1],
    };
    if k >= 1 {
        x.orders[1] = lin;
    }
    if k >= 2 {
        x.orders[2] = quad;
    }
    let l = log1p_series(&x, k, &pert.trunc)?;
    Ok(ObservableSeries::new(
        l.orders.into_iter().map(|p| p.scale(-1.0)).collect(),
        None,
    ))
}

fn compositions(total: usize, parts: usize, min: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in min..=total {
        for mut rest in compositions(total - first, parts - 1, min) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Nondecreasing sequences of `r` orders (each ≥ 1) summing to `total`.
fn sorted_compositions(total: usize, r: usize, min: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in min..=total {
        for mut rest in sorted_compositions(total - first, r - 1, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multiset_weight(seq: &[usize]) -> f64 {
    let mut w = 1.0;
    let mut run = 1;
    for pair in seq.windows(2) {
        if pair[0] == pair[1] {
            run += 1;
            w *= run as f64;
        } else {
            run = 1;
        }
    }
    w
}

impl Engine {
    /// Build series for SRB quantities through ε-order `max_order`.
    pub fn new(force: HarmonicForce, max_order: usize) -> Result<Self> {
        Self::from_perturbation(Perturbation::new(force)?, max_order, false)
    }

    pub fn from_perturbation(
        pert: Perturbation,
        max_order: usize,
        boundary_terms: bool,
    ) -> Result<Self> {
        if max_order > pert.order_cap {
            return Err(CatError::OrderCap {
                requested: max_order,
                cap: pert.order_cap,
            });
        }
        let sigma = sigma_series(&pert, max_order)?.orders;
        let h = if max_order >= 2 {
            pert.conjugation(max_order - 1)?
        } else {
            OrderSeries {
                orders: vec![[TrigPoly::zero(), TrigPoly::zero()]],
                tail_bounds: vec![0.0],
            }
        };
        let sigma_tilde = Composer::new(&pert, &h).compose_series(&sigma, max_order)?;
        let mut a_tilde = if max_order >= 2 {
            pert.expansion_rate(max_order - 1, boundary_terms)?.orders
        } else {
            vec![TrigPoly::zero()]
        };
        a_tilde[0] = TrigPoly::zero();
        let summer = ShiftSummer::new(&pert.s0)?;
        Ok(Self {
            pert,
            max_order,
            boundary_terms,
            sigma,
            sigma_tilde,
            a_tilde,
            h,
            summer,
            record: None,
        })
    }

    /// Keep a copy of every shift-sum evaluation from now on.
    pub fn enable_recording(&mut self) {
        self.record = Some(Mutex::new(Vec::new()));
    }

    pub fn take_records(&mut self) -> Vec<ShiftSumRecord> {
        self.record
            .as_ref()
            .map(|m| std::mem::take(&mut *m.lock().expect("record lock")))
            .unwrap_or_default()
    }

    pub fn set_window_margin(&mut self, margin: i64) {
        self.summer.window_margin = margin;
    }

    pub fn shift_window(&self) -> i64 {
        self.summer.max_window_used()
    }

    pub fn tail_bound(&self) -> f64 {
        self.h.tail_bounds.iter().sum::<f64>()
    }

    fn check(&self, m: usize) -> Result<()> {
        if m > self.max_order {
            return Err(CatError::OrderCap {
                requested: m,
                cap: self.max_order,
            });
        }
        Ok(())
    }

    fn shift_sum(&self, factors: &[&TrigPoly]) -> Result<f64> {
        let v = self.summer.shift_sum(factors)?;
        if let Some(rec) = &self.record {
            rec.lock().expect("record lock").push(ShiftSumRecord {
                factors: factors.iter().map(|f| (*f).clone()).collect(),
                value: v,
            });
        }
        Ok(v)
    }

    /// Time-summed joint SRB cumulant of the given insertions at ε-order `m`.
    ///
    /// Each insertion is a series indexed by ε-order; U-insertions are added
    /// here.
    pub fn joint_series(&self, insertions: &[&[TrigPoly]], m: usize) -> Result<f64> {
        self.check(m)?;
        let n = insertions.len();
        let mut total = 0.0;
        for r in 0..=m {
            for fixed in (0..=m).flat_map(|used| compositions(used, n, 0)) {
                let used: usize = fixed.iter().sum();
                let rest = m - used;
                if (r == 0) != (rest == 0) {
                    continue;
                }
                let slots: Option<Vec<&TrigPoly>> = fixed
                    .iter()
                    .zip(insertions)
                    .map(|(o, s)| s.get(*o).filter(|p| !p.is_empty()))
                    .collect();
                let Some(slots) = slots else { continue };
                for qs in sorted_compositions(rest, r, 1) {
                    let mut factors = slots.clone();
                    let mut ok = true;
                    for q in &qs {
                        match self.a_tilde.get(*q).filter(|p| !p.is_empty()) {
                            Some(p) => factors.push(p),
                            None => ok = false,
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    let w = sign / multiset_weight(&qs);
                    total += w * self.shift_sum(&factors)?;
                }
            }
        }
        Ok(total)
    }

    /// `⟨σ⟩₊` at ε-order `m`.
    pub fn srb_mean_order(&self, m: usize) -> Result<f64> {
        self.joint_series(&[&self.sigma_tilde], m)
    }

    /// `C_n` at ε-order `m`.
    pub fn cumulant(&self, n: usize, m: usize) -> Result<f64> {
        if n < 2 {
            return Err(CatError::InvalidArgument(
                "cumulant order must be >= 2".into(),
            ));
        }
        let ins: Vec<&[TrigPoly]> = (0..n).map(|_| self.sigma_tilde.as_slice()).collect();
        self.joint_series(&ins, m)
    }

    /// Composition of an observable with the conjugation.
    pub fn observable_tilde(&self, obs: &ObservableSeries) -> Result<Vec<TrigPoly>> {
        Composer::new(&self.pert, &self.h).compose_series(&obs.orders, self.max_order)
    }

    /// Joint cumulant with `multi_index` entries 1 (σ) and 2 (observable).
    pub fn joint_cumulant(
        &self,
        obs: &ObservableSeries,
        multi_index: &[u8],
        m: usize,
    ) -> Result<f64> {
        if obs.parity.is_none() {
            return Err(CatError::ParityUndeclared);
        }
        let o = self.observable_tilde(obs)?;
        let mut ins: Vec<&[TrigPoly]> = Vec::new();
        for &i in multi_index {
            match i {
                1 => ins.push(&self.sigma_tilde),
                2 => ins.push(&o),
                _ => return Err(CatError::InvalidArgument(format!("multi-index entry {i}"))),
            }
        }
        self.joint_series(&ins, m)
    }

    /// Joint cumulants with up to `max_insertions` insertions, through `max_order`.
    pub fn joint_table(&self, obs: &ObservableSeries, max_insertions: usize) -> Result<JointTable> {
        if obs.parity.is_none() {
            return Err(CatError::ParityUndeclared);
        }
        let o = self.observable_tilde(obs)?;
        let mut entries = BTreeMap::new();
        for k in 2..=max_insertions {
            for j in 0..=k {
                let mut ins: Vec<&[TrigPoly]> = vec![&self.sigma_tilde; j];
                ins.extend(std::iter::repeat(o.as_slice()).take(k - j));
                let row = (0..=self.max_order)
                    .map(|m| self.joint_series(&ins, m))
                    .collect::<Result<Vec<_>>>()?;
                entries.insert((j, k - j), row);
            }
        }
        Ok(JointTable {
            max_order: self.max_order,
            parity: obs.parity,
            entries,
        })
    }

    /// All `C_n^{(m)}` with `2 ≤ n ≤ m ≤ max_order` and means through `max_order`.
    pub fn table(&self) -> Result<CumulantTable> {
        let k = self.max_order;
        let mut c = vec![vec![0.0; k + 1]; k + 1];
        for m in 2..=k {
            for (n, row) in c.iter_mut().enumerate().take(m + 1).skip(2) {
                row[m] = self.cumulant(n, m)?;
            }
        }
        let mut mean = vec![0.0; k + 1];
        for (m, v) in mean.iter_mut().enumerate().skip(1) {
            *v = self.srb_mean_order(m)?;
        }
        Ok(CumulantTable {
            max_order: k,
            c,
            mean,
            shift_window: self.shift_window(),
            tail_bound: self.tail_bound(),
        })
    }
}

/// Green–Kubo matrix for a family of harmonics with independent amplitudes.
pub fn transport_matrix(family: &[Harmonic]) -> Result<TransportMatrix> {
    let currents: Vec<TrigPoly> = family
        .iter()
        .map(|h| {
            let unit = Harmonic { amp: 1.0, ..*h };
            let p = Perturbation::new(HarmonicForce::new(vec![unit])?)?;
            Ok(p.jacobian_terms().0.scale(-1.0))
        })
        .collect::<Result<_>>()?;
    let summer = ShiftSummer::new(&IntMatrix2::CAT)?;
    let n = currents.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            l[i][j] = 0.5 * summer.shift_sum(&[&currents[i], &currents[j]])?;
        }
    }
    let mut resid = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            resid = resid.max((l[i][j] - l[j][i]).abs());
        }
    }
    Ok(TransportMatrix {
        l,
        symmetry_residual: resid,
    })
}

/// Frequencies of a polynomial, for diagnostics.
pub fn frequencies(p: &TrigPoly) -> Vec<Freq> {
    p.iter().map(|(k, _)| *k).collect()
}
