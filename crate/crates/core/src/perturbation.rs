//! Order-by-order construction of the conjugation `H = id + h` between the
//! linear and the perturbed map, and of the unstable/stable rate data.
//!
//! All series store pure coefficient functions; `ε` enters only through
//! [`OrderSeries::evaluate`] and the residual checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{CatError, Result};
use crate::fourier::{geometric_sum, TrigPoly, Truncation};
use crate::parallel::map_range;
use crate::torus::{
    spectral, CatSystem, Direction, HarmonicForce, IntMatrix2, SpectralData, TorusPoint,
};

pub const DEFAULT_ORDER_CAP: usize = 4;

/// Power series in `ε`; `orders[k]` is the coefficient of `ε^k`.
#[derive(Debug, Clone, Default)]
pub struct OrderSeries<T> {
    pub orders: Vec<T>,
    pub tail_bounds: Vec<f64>,
}

impl<T> OrderSeries<T> {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    pub fn order(&self, k: usize) -> Option<&T> {
        self.orders.get(k)
    }
}

impl OrderSeries<TrigPoly> {
    pub fn evaluate(&self, x: [f64; 2], eps: f64) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        for p in &self.orders {
            acc += w * p.evaluate(x);
            w *= eps;
        }
        acc
    }

    /// Coefficient-wise product truncated at `max_order`.
    pub fn mul(&self, other: &Self, max_order: usize, trunc: &Truncation) -> Result<Self> {
        let mut orders = vec![TrigPoly::zero(); max_order + 1];
        for (i, a) in self.orders.iter().enumerate() {
            if a.is_empty() {
                continue;
            }
            for (j, b) in other.orders.iter().enumerate() {
                if i + j > max_order || b.is_empty() {
                    continue;
                }
                orders[i + j].add_assign(&a.mul(b, trunc)?);
            }
        }
        let tail = self
            .tail_bounds
            .iter()
            .chain(&other.tail_bounds)
            .fold(0.0f64, |a, b| a.max(*b));
        Ok(Self {
            tail_bounds: vec![tail; max_order + 1],
            orders,
        })
    }
}

impl OrderSeries<[TrigPoly; 2]> {
    /// Displacement `h(ψ)` in torus coordinates at coupling `eps`.
    pub fn displacement(&self, spec: &SpectralData, x: [f64; 2], eps: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut w = 1.0;
        for pair in &self.orders {
            let hp = pair[0].evaluate(x);
            let hm = pair[1].evaluate(x);
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * (hp * spec.v_plus_hat[i] + hm * spec.v_minus_hat[i]);
            }
            w *= eps;
        }
        out
    }
}

/// Taylor coefficients of `log(1 + X)` for a series `X` with `X₀ = 0`.
pub fn log1p_series(
    x: &OrderSeries<TrigPoly>,
    max_order: usize,
    trunc: &Truncation,
) -> Result<OrderSeries<TrigPoly>> {
    let mut out = vec![TrigPoly::zero(); max_order + 1];
    let mut power = x.clone();
    for j in 1..=max_order {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        for (m, p) in power.orders.iter().enumerate().take(max_order + 1) {
            out[m].add_scaled(p, sign / j as f64);
        }
        if j < max_order {
            power = power.mul(x, max_order, trunc)?;
        }
    }
    Ok(OrderSeries {
        tail_bounds: vec![x.tail_bounds.iter().cloned().fold(0.0, f64::max); max_order + 1],
        orders: out,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadiusEstimate {
    pub eps0: f64,
    pub g: f64,
    pub r0: f64,
    pub lambda: f64,
}

impl RadiusEstimate {
    /// Radius for a requested Hölder exponent `beta`.
    pub fn for_holder(&self, beta: f64) -> f64 {
        (1.0 - self.lambda.powf(1.0 - beta)) * self.r0 / (8.0 * self.g)
    }
}

/// Unstable and stable rate series.
#[derive(Debug, Clone)]
pub struct Rates {
    pub gamma_plus: OrderSeries<TrigPoly>,
    pub gamma_minus: OrderSeries<TrigPoly>,
    pub k_plus: OrderSeries<TrigPoly>,
    pub k_minus: OrderSeries<TrigPoly>,
}

/// Per-ε residual table for the conjugation equation.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualTable {
    pub order: usize,
    pub eps: Vec<f64>,
    pub residual: Vec<f64>,
    pub slope: f64,
}

/// Force, spectral data and truncation shared by every series construction.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub s0: IntMatrix2,
    pub spec: SpectralData,
    pub force: HarmonicForce,
    pub trunc: Truncation,
    pub order_cap: usize,
    /// `f_α = v̂_α·f`, indexed by [`Direction::index`].
    pub force_components: [TrigPoly; 2],
    /// `df[β][α] = ∂_β f_α`.
    pub df: [[TrigPoly; 2]; 2],
}

type MultisetKey = Vec<(usize, usize)>;

/// Memoized evaluation of `g ∘ H` order by order.
pub struct Composer<'a> {
    pert: &'a Perturbation,
    h: &'a OrderSeries<[TrigPoly; 2]>,
    products: BTreeMap<MultisetKey, TrigPoly>,
}

impl<'a> Composer<'a> {
    pub fn new(pert: &'a Perturbation, h: &'a OrderSeries<[TrigPoly; 2]>) -> Self {
        Self {
            pert,
            h,
            products: BTreeMap::new(),
        }
    }

    fn product(&mut self, key: &[(usize, usize)]) -> Result<TrigPoly> {
        if let Some(p) = self.products.get(key) {
            return Ok(p.clone());
        }
        let p = if key.len() == 1 {
            let (a, k) = key[0];
            self.h.orders[k][a].clone()
        } else {
            let head = self.product(&key[..key.len() - 1])?;
            let (a, k) = key[key.len() - 1];
            head.mul(&self.h.orders[k][a], &self.pert.trunc)?
        };
        self.products.insert(key.to_vec(), p.clone());
        Ok(p)
    }

    /// `[g ∘ H]^{(m)}` for `m = 0..=max_order`.
    pub fn compose(&mut self, g: &TrigPoly, max_order: usize) -> Result<Vec<TrigPoly>> {
        let mut out = vec![TrigPoly::zero(); max_order + 1];
        out[0] = g.clone();
        if g.is_empty() {
            return Ok(out);
        }
        let mut derivs: BTreeMap<(usize, usize), TrigPoly> = BTreeMap::new();
        derivs.insert((0, 0), g.clone());
        let spec = self.pert.spec;
        // atoms (direction, order) sorted; multisets are nondecreasing sequences
        let hmax = self.h.max_order();
        let atoms: Vec<(usize, usize)> = (0..2)
            .flat_map(|a| (1..=hmax).map(move |k| (a, k)))
            .collect();
        let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
        while let Some((seq, total)) = stack.pop() {
            let start = seq.last().copied().unwrap_or(0);
            for idx in start..atoms.len() {
                let (_, k) = atoms[idx];
                if total + k > max_order {
                    continue;
                }
                let mut next = seq.clone();
                next.push(idx);
                let m = total + k;
                let key: MultisetKey = next.iter().map(|&i| atoms[i]).collect();
                let n_plus = key.iter().filter(|(a, _)| *a == 0).count();
                let n_minus = key.len() - n_plus;
                let d = derivative_chain(&mut derivs, n_plus, n_minus, &spec);
                if !d.is_empty() && key.iter().all(|(a, k)| !self.h.orders[*k][*a].is_empty()) {
                    let mut mult = 1.0;
                    let mut run = 1;
                    for w in next.windows(2) {
                        if w[0] == w[1] {
                            run += 1;
                            mult *= run as f64;
                        } else {
                            run = 1;
                        }
                    }
                    let prod = self.product(&key)?;
                    let term = d.mul(&prod, &self.pert.trunc)?;
                    out[m].add_scaled(&term, 1.0 / mult);
                }
                stack.push((next, m));
            }
        }
        for o in out.iter_mut() {
            o.prune(self.pert.trunc.coeff_tol);
        }
        Ok(out)
    }

    /// `Σ_j [g_j ∘ H]^{(m−j)}` for a series `g`.
    pub fn compose_series(&mut self, g: &[TrigPoly], max_order: usize) -> Result<Vec<TrigPoly>> {
        let mut out = vec![TrigPoly::zero(); max_order + 1];
        for (j, gj) in g.iter().enumerate().take(max_order + 1) {
            if gj.is_empty() {
                continue;
            }
            let c = self.compose(gj, max_order - j)?;
            for (m, cm) in c.into_iter().enumerate() {
                out[j + m].add_assign(&cm);
            }
        }
        Ok(out)
    }
}

fn derivative_chain(
    cache: &mut BTreeMap<(usize, usize), TrigPoly>,
    n_plus: usize,
    n_minus: usize,
    spec: &SpectralData,
) -> TrigPoly {
    if let Some(d) = cache.get(&(n_plus, n_minus)) {
        return d.clone();
    }
    let d = if n_minus > 0 {
        derivative_chain(cache, n_plus, n_minus - 1, spec).directional_derivative(spec.v_minus_hat)
    } else {
        derivative_chain(cache, n_plus - 1, 0, spec).directional_derivative(spec.v_plus_hat)
    };
    cache.insert((n_plus, n_minus), d.clone());
    d
}

impl Perturbation {
    pub fn new(force: HarmonicForce) -> Result<Self> {
        Self::with_truncation(force, Truncation::default())
    }

    pub fn with_truncation(force: HarmonicForce, trunc: Truncation) -> Result<Self> {
        trunc.validate()?;
        let s0 = IntMatrix2::CAT;
        let spec = spectral(&s0)?;
        let mut comps = [TrigPoly::zero(), TrigPoly::zero()];
        for dir in Direction::BOTH {
            let v = spec.vector(dir);
            for h in &force.harmonics {
                comps[dir.index()].add_assign(&TrigPoly::sin(h.nu, h.amp * v[h.component]));
            }
        }
        let df = Direction::BOTH.map(|beta| {
            let v = spec.vector(beta);
            [
                comps[0].directional_derivative(v),
                comps[1].directional_derivative(v),
            ]
        });
        Ok(Self {
            s0,
            spec,
            force,
            trunc,
            order_cap: DEFAULT_ORDER_CAP,
            force_components: comps,
            df,
        })
    }

    /// Raise the order cap (higher orders grow quickly in cost).
    pub fn with_order_cap(mut self, cap: usize) -> Self {
        self.order_cap = cap;
        self
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k > self.order_cap {
            return Err(CatError::OrderCap {
                requested: k,
                cap: self.order_cap,
            });
        }
        Ok(())
    }

    /// Divergence-like coefficient `g` with `det DS_ε = 1 + εg + ε² det Df`.
    pub fn jacobian_terms(&self) -> (TrigPoly, TrigPoly) {
        let mut f = [TrigPoly::zero(), TrigPoly::zero()];
        for h in &self.force.harmonics {
            f[h.component].add_assign(&TrigPoly::sin(h.nu, h.amp));
        }
        let d = |i: usize, j: usize| f[i].partial(j);
        // adj S₀ contracted with Df
        let a = [
            [self.s0.a22 as f64, -self.s0.a12 as f64],
            [-self.s0.a21 as f64, self.s0.a11 as f64],
        ];
        let mut linear = TrigPoly::zero();
        for i in 0..2 {
            for j in 0..2 {
                linear.add_scaled(&d(j, i), a[i][j]);
            }
        }
        let quad = d(0, 0)
            .mul(&d(1, 1), &self.trunc)
            .expect("force products are small")
            .sub(
                &d(0, 1)
                    .mul(&d(1, 0), &self.trunc)
                    .expect("force products are small"),
            );
        (linear, quad)
    }

    /// `H` through order `k`; `orders[0]` is zero.
    pub fn conjugation(&self, k: usize) -> Result<OrderSeries<[TrigPoly; 2]>> {
        if k == 0 {
            return Err(CatError::InvalidArgument("order must be >= 1".into()));
        }
        self.check_order(k)?;
        let mut h = OrderSeries {
            orders: vec![[TrigPoly::zero(), TrigPoly::zero()]],
            tail_bounds: vec![0.0],
        };
        for order in 1..=k {
            let (rhs_p, rhs_m) = {
                let mut comp = Composer::new(self, &h);
                let rp = comp.compose(&self.force_components[0], order - 1)?;
                let rm = comp.compose(&self.force_components[1], order - 1)?;
                (rp[order - 1].clone(), rm[order - 1].clone())
            };
            let (hp, tp) = self.solve_conjugation(&rhs_p, Direction::Unstable)?;
            let (hm, tm) = self.solve_conjugation(&rhs_m, Direction::Stable)?;
            h.orders.push([hp, hm]);
            h.tail_bounds.push(tp + tm);
        }
        Ok(h)
    }

    /// First-order conjugation `(h₊⁽¹⁾, h₋⁽¹⁾)`.
    pub fn conjugation_order1(&self) -> Result<[TrigPoly; 2]> {
        Ok(self.conjugation(1)?.orders.swap_remove(1))
    }

    /// Solve `h(S₀ψ) − λ_α h(ψ) = R(ψ)` for the bounded solution.
    fn solve_conjugation(&self, rhs: &TrigPoly, dir: Direction) -> Result<(TrigPoly, f64)> {
        let lp = self.spec.lambda_plus;
        match dir {
            Direction::Unstable => {
                let g = geometric_sum(rhs, 1.0 / lp, true, &self.s0, &self.trunc)?;
                Ok((g.poly.scale(-1.0 / lp), g.tail_bound / lp))
            }
            Direction::Stable => {
                let shifted = rhs.compose_power(&self.s0, -1, &self.trunc)?;
                let g = geometric_sum(
                    &shifted,
                    self.spec.lambda_minus,
                    false,
                    &self.s0,
                    &self.trunc,
                )?;
                Ok((g.poly, g.tail_bound))
            }
        }
    }

    /// `Σ_n λ₋^{2n} R∘S^{±n} / λ₊`.
    fn neumann(&self, rhs: &TrigPoly, forward: bool) -> Result<(TrigPoly, f64)> {
        let lp = self.spec.lambda_plus;
        let lm = self.spec.lambda_minus;
        let g = geometric_sum(rhs, lm * lm, forward, &self.s0, &self.trunc)?;
        Ok((g.poly.scale(1.0 / lp), g.tail_bound / lp))
    }

    pub fn radius_estimate(&self, r0: f64) -> RadiusEstimate {
        let g = Direction::BOTH
            .iter()
            .map(|d| {
                let v = self.spec.vector(*d);
                self.force
                    .harmonics
                    .iter()
                    .map(|h| {
                        let w = (h.nu[0].abs() + h.nu[1].abs()) as f64 * r0;
                        (h.amp * v[h.component]).abs() * w.cosh()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let lambda = self.spec.lambda_minus;
        RadiusEstimate {
            eps0: (1.0 - lambda) * r0 / (8.0 * g),
            g,
            r0,
            lambda,
        }
    }

    /// `[∂_β f_α ∘ H]` series for all `(β, α)`, orders `0..=max_order`.
    fn force_derivatives_on_orbit(
        &self,
        h: &OrderSeries<[TrigPoly; 2]>,
        max_order: usize,
    ) -> Result<[[Vec<TrigPoly>; 2]; 2]> {
        let mut comp = Composer::new(self, h);
        let mut out: [[Vec<TrigPoly>; 2]; 2] = Default::default();
        for beta in 0..2 {
            for alpha in 0..2 {
                out[beta][alpha] = comp.compose(&self.df[beta][alpha], max_order)?;
            }
        }
        Ok(out)
    }

    /// Rate series `γ±, k±` through order `k`.
    pub fn rates(&self, k: usize) -> Result<Rates> {
        self.check_order(k)?;
        let h = if k > 1 {
            self.conjugation(k - 1)?
        } else {
            OrderSeries {
                orders: vec![[TrigPoly::zero(), TrigPoly::zero()]],
                tail_bounds: vec![0.0],
            }
        };
        let fd = self.force_derivatives_on_orbit(&h, k.saturating_sub(1))?;
        let (up, um) = (0usize, 1usize);
        let trunc = &self.trunc;
        let s_inv = self.s0.inverse()?;
        let empty = || OrderSeries {
            orders: vec![TrigPoly::zero()],
            tail_bounds: vec![0.0],
        };
        let (mut gp, mut gm, mut kp, mut km) = (empty(), empty(), empty(), empty());
        let at = |v: &Vec<TrigPoly>, i: usize| v.get(i).cloned().unwrap_or_default();
        for m in 1..=k {
            // unstable side: w₊ = v₊ + k₋ v₋
            let mut r = at(&fd[up][um], m - 1);
            for a in 1..m {
                r.add_assign(&km.orders[a].mul(&at(&fd[um][um], m - 1 - a), trunc)?);
            }
            let mut r = r.compose_matrix(&s_inv, trunc)?;
            for a in 1..m {
                let g_shift = gp.orders[a].compose_matrix(&s_inv, trunc)?;
                r.add_scaled(&g_shift.mul(&km.orders[m - a], trunc)?, -1.0);
            }
            let (km_m, km_tail) = self.neumann(&r, false)?;
            km.orders.push(km_m);
            km.tail_bounds
                .push(km_tail + h.tail_bounds.iter().sum::<f64>());

            // stable side: w₋ = v₋ + k₊ v₊
            let mut r = at(&fd[um][up], m - 1).scale(-1.0);
            for a in 1..m {
                r.add_scaled(&kp.orders[a].mul(&at(&fd[up][up], m - 1 - a), trunc)?, -1.0);
            }
            for a in 1..m {
                let k_shift = kp.orders[m - a].compose_matrix(&self.s0, trunc)?;
                r.add_assign(&gm.orders[a].mul(&k_shift, trunc)?);
            }
            let (kp_m, kp_tail) = self.neumann(&r, true)?;
            kp.orders.push(kp_m);
            kp.tail_bounds
                .push(kp_tail + h.tail_bounds.iter().sum::<f64>());

            let mut g_plus = at(&fd[up][up], m - 1);
            let mut g_minus = at(&fd[um][um], m - 1);
            for a in 1..m {
                g_plus.add_assign(&km.orders[a].mul(&at(&fd[um][up], m - 1 - a), trunc)?);
                g_minus.add_assign(&kp.orders[a].mul(&at(&fd[up][um], m - 1 - a), trunc)?);
            }
            gp.orders.push(g_plus.pruned(trunc.coeff_tol));
            gp.tail_bounds.push(km.tail_bounds[m - 1]);
            gm.orders.push(g_minus.pruned(trunc.coeff_tol));
            gm.tail_bounds.push(kp.tail_bounds[m - 1]);
        }
        Ok(Rates {
            gamma_plus: gp,
            gamma_minus: gm,
            k_plus: kp,
            k_minus: km,
        })
    }

    /// First-order rates `(γ₊, γ₋, k₊, k₋)`.
    pub fn rates_order1(&self) -> Result<[TrigPoly; 4]> {
        let r = self.rates(1)?;
        Ok([
            r.gamma_plus.orders[1].clone(),
            r.gamma_minus.orders[1].clone(),
            r.k_plus.orders[1].clone(),
            r.k_minus.orders[1].clone(),
        ])
    }

    /// Expansion rate `A_u` through order `k`, with or without the
    /// norm-ratio boundary term.
    pub fn expansion_rate(&self, k: usize, boundary: bool) -> Result<OrderSeries<TrigPoly>> {
        self.check_order(k)?;
        let rates = self.rates(k)?;
        self.expansion_rate_from(&rates, k, boundary)
    }

    pub fn expansion_rate_from(
        &self,
        rates: &Rates,
        k: usize,
        boundary: bool,
    ) -> Result<OrderSeries<TrigPoly>> {
        let lp = self.spec.lambda_plus;
        let ratio = OrderSeries {
            orders: rates
                .gamma_plus
                .orders
                .iter()
                .take(k + 1)
                .map(|p| p.scale(1.0 / lp))
                .collect(),
            tail_bounds: rates.gamma_plus.tail_bounds.clone(),
        };
        let mut a = log1p_series(&ratio, k, &self.trunc)?;
        a.orders[0] = TrigPoly::constant(lp.ln());
        if boundary {
            let km = OrderSeries {
                orders: rates.k_minus.orders.iter().take(k + 1).cloned().collect(),
                tail_bounds: rates.k_minus.tail_bounds.clone(),
            };
            let sq = km.mul(&km, k, &self.trunc)?;
            let b = log1p_series(&sq, k, &self.trunc)?;
            for (m, bm) in b.orders.iter().enumerate() {
                let shifted = bm.compose_matrix(&self.s0, &self.trunc)?;
                a.orders[m].add_scaled(&shifted, 0.5);
                a.orders[m].add_scaled(bm, -0.5);
            }
        }
        Ok(a)
    }

    /// `|H_K(S₀ψ) − S_ε(H_K(ψ))|` maximized over an `n × n` grid, for each ε.
    pub fn conjugacy_residual(
        &self,
        k: usize,
        eps_list: &[f64],
        grid: usize,
    ) -> Result<ResidualTable> {
        let h = self.conjugation(k)?;
        let systems: Vec<CatSystem> = eps_list
            .iter()
            .map(|&e| CatSystem::new(e, self.force.clone()))
            .collect();
        // order-by-order values at x and at S₀x do not depend on ε
        let orders_at = |x: [f64; 2]| -> Vec<[f64; 2]> {
            h.orders
                .iter()
                .map(|o| [o[0].evaluate(x), o[1].evaluate(x)])
                .collect()
        };
        let displacement = |vals: &[[f64; 2]], eps: f64| -> [f64; 2] {
            let mut out = [0.0; 2];
            let mut w = 1.0;
            for [hp, hm] in vals {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += w * (hp * self.spec.v_plus_hat[i] + hm * self.spec.v_minus_hat[i]);
                }
                w *= eps;
            }
            out
        };
        let per_point = map_range(grid * grid, |idx| {
            let (i, j) = (idx / grid, idx % grid);
            let x = [
                std::f64::consts::TAU * (i as f64 + 0.25) / grid as f64,
                std::f64::consts::TAU * (j as f64 + 0.5) / grid as f64,
            ];
            let sx = self.s0.apply_f64(x);
            let (at_x, at_sx) = (orders_at(x), orders_at(sx));
            systems
                .iter()
                .map(|sys| {
                    let hx = displacement(&at_x, sys.epsilon);
                    let image = sys.step(TorusPoint::new(x[0] + hx[0], x[1] + hx[1]));
                    let hs = displacement(&at_sx, sys.epsilon);
                    TorusPoint::new(sx[0] + hs[0], sx[1] + hs[1]).distance(&image)
                })
                .collect::<Vec<f64>>()
        });
        let residual: Vec<f64> = (0..eps_list.len())
            .map(|e| per_point.iter().map(|r| r[e]).fold(0.0, f64::max))
            .collect();
        let slope = loglog_slope(eps_list, &residual);
        Ok(ResidualTable {
            order: k,
            eps: eps_list.to_vec(),
            residual,
            slope,
        })
    }
}

/// Least-squares slope of `log y` against `log x`, skipping non-positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single() -> Perturbation {
        Perturbation::new(HarmonicForce::single()).unwrap()
    }

    #[test]
    fn first_order_conjugation_matches_series() {
        let p = single();
        let [hp, hm] = p.conjugation_order1().unwrap();
        let lp = p.spec.lambda_plus;
        let mut expect = TrigPoly::zero();
        for q in 0..40 {
            let term = TrigPoly::sin([1, 0], -lp.powi(-(q + 1)) / (lp + 1.0).sqrt())
                .compose_power(&p.s0, q as i64, &p.trunc)
                .unwrap();
            expect.add_assign(&term);
        }
        assert!(hp.max_abs_diff(&expect) < 1e-14);
        assert_abs_diff_eq!(hp.evaluate([0.0, 0.0]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hm.evaluate([0.0, 0.0]), 0.0, epsilon = 1e-15);
        // λ₊h₊(ψ) − h₊(S₀ψ) + f₊(ψ) = 0
        let lhs = hp
            .scale(lp)
            .sub(&hp.compose_power(&p.s0, 1, &p.trunc).unwrap())
            .add(&p.force_components[0]);
        assert!(lhs.l1_norm() < 1e-13);
        let lm = p.spec.lambda_minus;
        let lhs = hm
            .compose_power(&p.s0, 1, &p.trunc)
            .unwrap()
            .sub(&hm.scale(lm))
            .sub(&p.force_components[1]);
        assert!(lhs.l1_norm() < 1e-13);
    }

    #[test]
    fn higher_orders_vanish_at_fixed_point() {
        let p = Perturbation::new(HarmonicForce::double()).unwrap();
        let h = p.conjugation(3).unwrap();
        assert_eq!(p.conjugation(1).unwrap().orders[1][0], h.orders[1][0]);
        for pair in &h.orders {
            for c in pair {
                assert!(c.evaluate([0.0, 0.0]).abs() < 1e-13);
                assert!(c.hermitian_defect() < 1e-15);
            }
        }
        assert!(p.conjugation(5).is_err());
        assert!(p.clone().with_order_cap(5).check_order(5).is_ok());
    }

    #[test]
    fn rates_first_order() {
        let p = single();
        let [gp, gm, kp, km] = p.rates_order1().unwrap();
        let lp = p.spec.lambda_plus;
        assert!(gp.max_abs_diff(&TrigPoly::cos([1, 0], 1.0 / (lp + 1.0))) < 1e-15);
        assert_abs_diff_eq!(gp.evaluate([0.0, 0.0]), 1.0 / (lp + 1.0), epsilon = 1e-15);
        assert!(gm.max_abs_diff(&p.df[1][1]) < 1e-15);
        let mut kp_oracle = 0.0;
        let mut km_oracle = 0.0;
        for n in 0..40 {
            let w = lp.powi(-(2 * n + 1));
            kp_oracle -= w * p.df[1][0].evaluate([0.0, 0.0]);
            km_oracle += w * p.df[0][1].evaluate([0.0, 0.0]);
        }
        assert_abs_diff_eq!(kp.evaluate([0.0, 0.0]), kp_oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(km.evaluate([0.0, 0.0]), km_oracle, epsilon = 1e-14);
    }

    /// `DS_ε(H(ψ)) w(ψ) − λ(ψ) w(S₀ψ)` evaluated on a grid.
    fn rate_residual(p: &Perturbation, k: usize, eps: f64) -> (f64, f64) {
        let h = p.conjugation(k).unwrap();
        let r = p.rates(k).unwrap();
        let sys = CatSystem::new(eps, p.force.clone());
        let s = p.spec;
        let (vp, vm) = (s.v_plus_hat, s.v_minus_hat);
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..32 {
            let x = [0.19 * i as f64 + 0.1, 0.53 * i as f64 + 0.7];
            let hx = h.displacement(&s, x, eps);
            let phi = [x[0] + hx[0], x[1] + hx[1]];
            let d = sys.force.jacobian(phi);
            let m = |w: [f64; 2]| {
                let a = p.s0.apply_f64(w);
                [
                    a[0] + eps * (d[0][0] * w[0] + d[0][1] * w[1]),
                    a[1] + eps * (d[1][0] * w[0] + d[1][1] * w[1]),
                ]
            };
            let sx = p.s0.apply_f64(x);
            let kmx = r.k_minus.evaluate(x, eps);
            let kms = r.k_minus.evaluate(sx, eps);
            let w = [vp[0] + kmx * vm[0], vp[1] + kmx * vm[1]];
            let lam = s.lambda_plus + r.gamma_plus.evaluate(x, eps);
            let lhs = m(w);
            let rhs = [lam * (vp[0] + kms * vm[0]), lam * (vp[1] + kms * vm[1])];
            worst.0 = worst.0.max((lhs[0] - rhs[0]).hypot(lhs[1] - rhs[1]));
            let kpx = r.k_plus.evaluate(x, eps);
            let kps = r.k_plus.evaluate(sx, eps);
            let w = [vm[0] + kpx * vp[0], vm[1] + kpx * vp[1]];
            let lam = s.lambda_minus + r.gamma_minus.evaluate(x, eps);
            let lhs = m(w);
            let rhs = [lam * (vm[0] + kps * vp[0]), lam * (vm[1] + kps * vp[1])];
            worst.1 = worst.1.max((lhs[0] - rhs[0]).hypot(lhs[1] - rhs[1]));
        }
        worst
    }

    #[test]
    fn rate_relations_hold_to_order() {
        let p = Perturbation::new(HarmonicForce::double()).unwrap();
        for k in 1..=3 {
            let a = rate_residual(&p, k, 2e-3);
            let b = rate_residual(&p, k, 4e-3);
            let su = (b.0 / a.0).log2();
            let ss = (b.1 / a.1).log2();
            assert!(
                (su - (k + 1) as f64).abs() < 0.3,
                "k={k} unstable slope {su}"
            );
            assert!((ss - (k + 1) as f64).abs() < 0.3, "k={k} stable slope {ss}");
        }
    }

    #[test]
    fn expansion_rate_first_order() {
        let p = single();
        let a = p.expansion_rate(2, false).unwrap();
        let lp = p.spec.lambda_plus;
        assert_abs_diff_eq!(a.orders[0].average(), lp.ln(), epsilon = 1e-15);
        assert!(a.orders[1].max_abs_diff(&TrigPoly::cos([1, 0], 1.0 / (lp * (lp + 1.0)))) < 1e-15);
        assert_abs_diff_eq!(a.orders[1].average(), 0.0);
        for m in -5..=5 {
            let shifted = a.orders[2].compose_power(&p.s0, m, &p.trunc).unwrap();
            assert_abs_diff_eq!(shifted.average(), a.orders[2].average(), epsilon = 1e-16);
        }
    }

    #[test]
    fn boundary_term_telescopes() {
        let p = single();
        let off = p.expansion_rate(2, false).unwrap();
        let on = p.expansion_rate(2, true).unwrap();
        let eps = 0.05;
        let x = [0.4, 1.3];
        let birkhoff = |a: &OrderSeries<TrigPoly>, n: i64| -> f64 {
            (-n..=n)
                .map(|k| {
                    let m = p.s0.pow(k).unwrap();
                    a.evaluate(m.apply_f64(x), eps)
                })
                .sum()
        };
        let d10 = (birkhoff(&on, 10) - birkhoff(&off, 10)).abs();
        let d20 = (birkhoff(&on, 20) - birkhoff(&off, 20)).abs();
        assert!(d10 < 1e-2 && d20 < 1e-2, "{d10} {d20}");
    }

    #[test]
    fn radius() {
        let p = single();
        let r = p.radius_estimate(1.0);
        let lm = p.spec.lambda_minus;
        assert_abs_diff_eq!(r.eps0, (1.0 - lm) / (8.0 * r.g), epsilon = 1e-15);
        assert!(r.for_holder(1.0 - 1e-12).abs() < 1e-10);
        let limit = RadiusEstimate { lambda: 0.0, ..r };
        assert_abs_diff_eq!(limit.eps0, r.eps0, epsilon = 1e-15);
        assert_abs_diff_eq!(limit.for_holder(0.0), r.r0 / (8.0 * r.g), epsilon = 1e-15);
    }

    #[test]
    fn conjugacy_residual_scaling() {
        let p = single();
        let eps = [1e-3, 2e-3, 4e-3, 1e-2];
        for k in 1..=3 {
            let t = p.conjugacy_residual(k, &eps, 16).unwrap();
            assert!(
                (t.slope - (k + 1) as f64).abs() < 0.2,
                "k={k} slope {}",
                t.slope
            );
        }
        let z = p.conjugacy_residual(2, &[0.0], 8).unwrap();
        assert_eq!(z.residual[0], 0.0);
    }
}
