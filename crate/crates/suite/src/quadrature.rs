use std::collections::HashMap;
use std::f64::consts::TAU;

use catmap_core::correlation::{Engine, ShiftSummer};
use catmap_core::fourier::TrigPoly;
use catmap_core::torus::{HarmonicForce, IntMatrix2};
use num_complex::Complex64;

pub const GRID: usize = 256;
/// Largest `|ν|∞` evaluated on the grid.
pub const LOW: i64 = 8;

/// Values on the `GRID × GRID` lattice `2π(i, j)/GRID`, for `|ν|∞ ≤ LOW`.
pub fn on_grid(p: &TrigPoly) -> Vec<f64> {
    let phase = |nu: i64| -> Vec<Complex64> {
        (0..GRID)
            .map(|i| Complex64::from_polar(1.0, TAU * (nu * i as i64) as f64 / GRID as f64))
            .collect()
    };
    let mut out = vec![0.0; GRID * GRID];
    for (nu, c) in p.iter() {
        assert!(nu[0].abs() <= LOW && nu[1].abs() <= LOW);
        let (e1, e2) = (phase(nu[0]), phase(nu[1]));
        for i in 0..GRID {
            let ci = c * e1[i];
            for j in 0..GRID {
                out[i * GRID + j] += (ci * e2[j]).re;
            }
        }
    }
    out
}

/// Grid average of a polynomial.
pub fn grid_average(p: &TrigPoly) -> f64 {
    on_grid(p).iter().sum::<f64>() / (GRID * GRID) as f64
}

/// Grid index of `S^k(i, j)`; exact because `S^k` is an integer matrix.
fn shift_map(k: i64) -> Vec<u32> {
    let m = IntMatrix2::CAT.pow(k).unwrap();
    let g = GRID as i64;
    let mut out = Vec::with_capacity(GRID * GRID);
    for i in 0..g {
        for j in 0..g {
            let v = m.apply([i, j]).unwrap();
            out.push((v[0].rem_euclid(g) * g + v[1].rem_euclid(g)) as u32);
        }
    }
    out
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for i in 0..n {
        let mut next = Vec::new();
        for p in out {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(i);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![i]);
            next.push(q);
        }
        out = next;
    }
    out
}

pub struct Quadrature {
    maps: HashMap<i64, Vec<u32>>,
}

impl Quadrature {
    pub fn new(window: i64) -> Self {
        Self {
            maps: (-2 * window..=2 * window)
                .map(|k| (k, shift_map(k)))
                .collect(),
        }
    }

    /// `Σ_shifts κ(F₁∘S^{k₁}, …, Fₙ)` with every `|kᵢ| ≤ window`, by grid averages.
    pub fn shift_sum(&self, factors: &[&TrigPoly], window: i64) -> f64 {
        let n = factors.len();
        let vals: Vec<Vec<f64>> = factors.iter().map(|f| on_grid(f)).collect();
        if n == 1 {
            return vals[0].iter().sum::<f64>() / (GRID * GRID) as f64;
        }
        let parts = set_partitions(n);
        let mut memo: HashMap<(Vec<usize>, Vec<i64>), f64> = HashMap::new();
        let mut total = 0.0;
        let combos = (2 * window + 1).pow(n as u32 - 1);
        for c in 0..combos {
            let mut shifts = vec![0i64; n];
            let mut r = c;
            for s in shifts.iter_mut().take(n - 1) {
                *s = (r % (2 * window + 1)) - window;
                r /= 2 * window + 1;
            }
            let mut kappa = 0.0;
            for p in &parts {
                let mut prod = 1.0;
                for block in p {
                    let base = shifts[block[0]];
                    let rel: Vec<i64> = block.iter().map(|&i| shifts[i] - base).collect();
                    let key = (block.clone(), rel.clone());
                    let m = *memo.entry(key).or_insert_with(|| {
                        let lanes: Vec<(&[f64], &[u32])> = block
                            .iter()
                            .zip(&rel)
                            .map(|(&i, k)| (vals[i].as_slice(), self.maps[k].as_slice()))
                            .collect();
                        let mut acc = 0.0;
                        for x in 0..GRID * GRID {
                            acc += lanes
                                .iter()
                                .map(|(v, map)| v[map[x] as usize])
                                .product::<f64>();
                        }
                        acc / (GRID * GRID) as f64
                    });
                    prod *= m;
                }
                let q = p.len() as i32;
                let sign = if q % 2 == 1 { 1.0 } else { -1.0 };
                kappa += sign * (1..q).map(f64::from).product::<f64>() * prod;
            }
            total += kappa;
        }
        total
    }
}

fn low_part(p: &TrigPoly) -> TrigPoly {
    TrigPoly::from_terms(
        p.iter()
            .filter(|(nu, _)| nu[0].abs() <= LOW && nu[1].abs() <= LOW)
            .map(|(nu, c)| (*nu, *c)),
    )
}

fn is_low(p: &TrigPoly) -> bool {
    p.iter()
        .all(|(nu, _)| nu[0].abs() <= LOW && nu[1].abs() <= LOW)
}

/// Shift window for the grid sum of an `n`-point cumulant.
pub fn oracle_window(n: usize) -> i64 {
    if n >= 4 {
        4
    } else {
        6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    /// Records whose factors all fit on the grid and were compared as recorded.
    pub full: usize,
    /// Records compared after truncation to `|ν|∞ ≤ LOW`.
    pub truncated: usize,
    pub worst: f64,
}

/// Re-evaluates every shift sum the engine performs for `force` and reports
/// the largest deviation, or the first one above `tol`.
pub fn check_engine(force: HarmonicForce, tol: f64) -> Result<OracleSummary, String> {
    let mut engine = Engine::new(force, 4).map_err(|e| e.to_string())?;
    engine.enable_recording();
    engine.table().map_err(|e| e.to_string())?;
    let records = engine.take_records();
    if records.is_empty() {
        return Err("no shift sums recorded".into());
    }
    let quad = Quadrature::new(6);
    let summer = ShiftSummer::new(&IntMatrix2::CAT).map_err(|e| e.to_string())?;
    let mut out = OracleSummary {
        full: 0,
        truncated: 0,
        worst: 0.0,
    };
    for rec in &records {
        let n = rec.factors.len();
        let w = oracle_window(n);
        if rec.factors.iter().all(is_low) {
            let refs: Vec<&TrigPoly> = rec.factors.iter().collect();
            let q = quad.shift_sum(&refs, w);
            out.worst = out.worst.max((q - rec.value).abs());
            if (q - rec.value).abs() >= tol {
                return Err(format!("record n={n}: engine {} grid {q}", rec.value));
            }
            out.full += 1;
        }
        let low: Vec<TrigPoly> = rec.factors.iter().map(low_part).collect();
        let refs: Vec<&TrigPoly> = low.iter().collect();
        let exact = summer.shift_sum(&refs).map_err(|e| e.to_string())?;
        let q = quad.shift_sum(&refs, w);
        out.worst = out.worst.max((q - exact).abs());
        if (q - exact).abs() >= tol {
            return Err(format!("truncated record n={n}: engine {exact} grid {q}"));
        }
        out.truncated += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_average_is_exact_for_low_frequencies() {
        let p = TrigPoly::cos([1, 2], 1.0).add(&TrigPoly::constant(0.25));
        assert!((grid_average(&p) - 0.25).abs() < 1e-12);
        // ⟨(cos θ + 1/4)²⟩ = 1/2 + 1/16
        let q = p.mul(&p, &Default::default()).unwrap();
        assert!((grid_average(&q) - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn set_partitions_are_counted_by_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (n, b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n).len(), *b);
        }
    }

    #[test]
    fn shift_sums_match_grid_quadrature_single_harmonic() {
        let s = check_engine(HarmonicForce::single(), 1e-8).unwrap();
        assert!(s.full >= 4);
    }

    #[test]
    fn shift_sums_match_grid_quadrature_two_harmonics() {
        let s = check_engine(HarmonicForce::double(), 1e-8).unwrap();
        assert!(s.full >= 4);
    }
}
