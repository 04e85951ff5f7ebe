//! Seeded simulation of finite-time contraction averages and their
//! fluctuation ratios.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::parallel::{map_range, with_workers};
use crate::torus::{CatSystem, TorusPoint};

/// Which time average normalizes `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerRun,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub system: CatSystem,
    /// Iterations per run.
    pub t: u64,
    pub tau: u64,
    pub runs: u64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_bin_width() -> f64 {
    0.05
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.system.epsilon == 0.0 {
            return Err(CatError::ZeroEpsilon);
        }
        if self.tau == 0 {
            return Err(CatError::InvalidConfig("tau must be >= 1".into()));
        }
        if self.t == 0 || self.t % self.tau != 0 {
            return Err(CatError::InvalidConfig(
                "T must be a positive multiple of tau".into(),
            ));
        }
        if !(self.bin_width > 0.0) {
            return Err(CatError::InvalidConfig("bin width must be positive".into()));
        }
        if self.runs == 0 {
            return Err(CatError::InvalidConfig(
                "at least one run is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub run: u64,
    /// `(1/T) Σ σ` over the run.
    pub sigma_bar: f64,
    /// The normalization actually used for `p`.
    pub normalizer: f64,
    /// Counts keyed by bin index `i` (bin centre `i · binWidth`).
    pub histogram: BTreeMap<i64, u64>,
    pub windows: u64,
    pub max_abs_p: f64,
    pub mean_p: f64,
    /// Steps where `det DS_ε ≤ 0` (σ taken from `|det|`).
    pub fold_steps: u64,
}

fn initial_point(seed: u64, run: u64) -> (ChaCha8Rng, TorusPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ run);
    let tau = std::f64::consts::TAU;
    let x = TorusPoint::new(rng.gen::<f64>() * tau, rng.gen::<f64>() * tau);
    (rng, x)
}

fn run_sigma_bar(cfg: &SimConfig, run: u64) -> f64 {
    let (_, mut x) = initial_point(cfg.seed, run);
    let mut total = 0.0;
    for _ in 0..cfg.t {
        total += cfg.system.sigma_abs(x);
        x = cfg.system.step(x);
    }
    total / cfg.t as f64
}

fn run_once(cfg: &SimConfig, run: u64, pooled: Option<f64>) -> Result<RunStats> {
    let (_, mut x) = initial_point(cfg.seed, run);
    let n_windows = cfg.t / cfg.tau;
    let mut sums = Vec::with_capacity(n_windows as usize);
    let mut total = 0.0;
    let mut folds = 0;
    for _ in 0..n_windows {
        let mut w = 0.0;
        for _ in 0..cfg.tau {
            let det = cfg.system.jacobian_det(x);
            if det <= 0.0 {
                folds += 1;
            }
            w -= det.abs().ln();
            x = cfg.system.step(x);
        }
        total += w;
        sums.push(w);
    }
    let sigma_bar = total / cfg.t as f64;
    let normalizer = pooled.unwrap_or(sigma_bar);
    if !(normalizer > 0.0) {
        return Err(CatError::ZeroEpsilon);
    }
    let scale = 1.0 / (cfg.tau as f64 * normalizer);
    let mut histogram = BTreeMap::new();
    let mut max_abs_p: f64 = 0.0;
    let mut p_sum = 0.0;
    for w in sums {
        let p = w * scale;
        p_sum += p;
        max_abs_p = max_abs_p.max(p.abs());
        *histogram
            .entry((p / cfg.bin_width).round() as i64)
            .or_insert(0) += 1;
    }
    Ok(RunStats {
        run,
        sigma_bar,
        normalizer,
        histogram,
        windows: n_windows,
        max_abs_p,
        mean_p: p_sum / n_windows as f64,
        fold_steps: folds,
    })
}

/// `N` seeded runs; results in run order, identical for any worker count.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<RunStats>> {
    cfg.validate()?;
    let n = cfg.runs as usize;
    with_workers(cfg.workers, || {
        let pooled = match cfg.normalization {
            Normalization::PerRun => None,
            Normalization::Pooled => {
                let bars = map_range(n, |r| run_sigma_bar(cfg, r as u64));
                Some(bars.iter().sum::<f64>() / n as f64)
            }
        };
        map_range(n, |r| run_once(cfg, r as u64, pooled))
            .into_iter()
            .collect()
    })
}

/// How bin errors are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    #[default]
    RunToRun,
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub p: f64,
    pub y: f64,
    pub err: f64,
    pub count_plus: u64,
    pub count_minus: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCurve {
    pub bin_width: f64,
    pub tau: f64,
    pub sigma_bar: f64,
    pub points: Vec<RatioPoint>,
}

fn pooled_counts(stats: &[RunStats]) -> BTreeMap<i64, u64> {
    let mut out = BTreeMap::new();
    for s in stats {
        for (k, c) in &s.histogram {
            *out.entry(*k).or_insert(0) += c;
        }
    }
    out
}

/// Variance of the pooled count in bin `k`, from run-to-run dispersion.
fn dispersion_variance(stats: &[RunStats], k: i64) -> f64 {
    let n = stats.len() as f64;
    let xs: Vec<f64> = stats
        .iter()
        .map(|s| s.histogram.get(&k).copied().unwrap_or(0) as f64)
        .collect();
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var * n
}

/// `y(p) = log(F(p)/F(−p)) / (τ σ̄ p)` on bins with both signs populated.
pub fn ratio_curve(
    stats: &[RunStats],
    tau: f64,
    bin_width: f64,
    errors: ErrorModel,
) -> Result<RatioCurve> {
    if stats.is_empty() {
        return Err(CatError::InsufficientData("no runs".into()));
    }
    if errors == ErrorModel::RunToRun && stats.len() < 2 {
        return Err(CatError::InsufficientData(
            "run-to-run errors need at least two runs".into(),
        ));
    }
    let counts = pooled_counts(stats);
    let total: u64 = counts.values().sum();
    let sigma_bar = stats.iter().map(|s| s.normalizer).sum::<f64>() / stats.len() as f64;
    let mut points = Vec::new();
    for (&k, &fp) in counts.range(1..) {
        let Some(&fm) = counts.get(&-k) else { continue };
        if fm == 0 || fp == 0 {
            continue;
        }
        let p = k as f64 * bin_width;
        let denom = tau * sigma_bar * p;
        let y = (fp as f64 / fm as f64).ln() / denom;
        let var_log = match errors {
            ErrorModel::Binomial => {
                let t = total as f64;
                (1.0 - fp as f64 / t) / fp as f64 + (1.0 - fm as f64 / t) / fm as f64
            }
            ErrorModel::RunToRun => {
                dispersion_variance(stats, k) / (fp as f64).powi(2)
                    + dispersion_variance(stats, -k) / (fm as f64).powi(2)
            }
        };
        points.push(RatioPoint {
            p,
            y,
            err: var_log.sqrt() / denom.abs(),
            count_plus: fp,
            count_minus: fm,
        });
    }
    if points.is_empty() {
        return Err(CatError::InsufficientData(
            "no bin populated on both signs".into(),
        ));
    }
    Ok(RatioCurve {
        bin_width,
        tau,
        sigma_bar,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub a: f64,
    pub stderr: f64,
    pub bins: usize,
}

/// Slope through the origin of `p·y(p)` against `p` for `p ≤ p_max`; `A = slope − 1`.
pub fn slope_and_a(curve: &RatioCurve, p_max: f64) -> Result<SlopeFit> {
    let pts: Vec<&RatioPoint> = curve
        .points
        .iter()
        .filter(|pt| pt.p <= p_max + 1e-12)
        .collect();
    if pts.len() < 3 {
        return Err(CatError::InsufficientData(format!(
            "{} symmetric bins with p <= {p_max}, need 3",
            pts.len()
        )));
    }
    let weighted = pts.iter().all(|pt| pt.err > 0.0 && pt.err.is_finite());
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for pt in &pts {
        let l = pt.y * pt.p;
        let w = if weighted {
            1.0 / (pt.err * pt.p).powi(2)
        } else {
            1.0
        };
        sxx += w * pt.p * pt.p;
        sxy += w * pt.p * l;
    }
    let slope = sxy / sxx;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = pts
            .iter()
            .map(|pt| (pt.y * pt.p - slope * pt.p).powi(2))
            .sum();
        (rss / (pts.len() as f64 - 1.0) / sxx).sqrt()
    };
    Ok(SlopeFit {
        slope,
        a: slope - 1.0,
        stderr,
        bins: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// `a₁ε² + b₁/(τε)`
    F1,
    /// `a₂ε + b₂ε² + c₂/(τε)`
    F2,
}

impl Model {
    fn basis(self, eps: f64, tau: f64) -> Vec<f64> {
        match self {
            Model::F1 => vec![eps * eps, 1.0 / (tau * eps)],
            Model::F2 => vec![eps, eps * eps, 1.0 / (tau * eps)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: Model,
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub rss: f64,
    pub tau: f64,
}

impl FitResult {
    pub fn evaluate(&self, eps: f64) -> f64 {
        self.model
            .basis(eps, self.tau)
            .iter()
            .zip(&self.params)
            .map(|(b, p)| b * p)
            .sum()
    }

    /// Fitted finite-window term `c/(τε)`.
    pub fn window_term(&self, eps: f64) -> f64 {
        self.params.last().copied().unwrap_or(0.0) / (self.tau * eps)
    }
}

/// Solve `m x = b` by Gaussian elimination with partial pivoting; also
/// returns the inverse diagonal.
fn solve_normal(mut m: Vec<Vec<f64>>, b: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = b.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut aug: Vec<Vec<f64>> = m
        .iter_mut()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.push(b[i]);
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap_or(col);
        if aug[piv][col].abs() <= 1e-14 * scale {
            return Err(CatError::Singular);
        }
        aug.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                for c in col..aug[r].len() {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    let x = (0..n).map(|i| aug[i][n] / aug[i][i]).collect();
    let diag = (0..n).map(|i| aug[i][n + 1 + i] / aug[i][i]).collect();
    Ok((x, diag))
}

fn fit(model: Model, data: &[(f64, f64, f64)], tau: f64) -> Result<FitResult> {
    let k = model.basis(1.0, tau).len();
    let mut m = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for &(eps, a, err) in data {
        let w = if err > 0.0 { 1.0 / (err * err) } else { 1.0 };
        let x = model.basis(eps, tau);
        for i in 0..k {
            b[i] += w * x[i] * a;
            for j in 0..k {
                m[i][j] += w * x[i] * x[j];
            }
        }
    }
    let (params, diag) = solve_normal(m, b)?;
    let rss = data
        .iter()
        .map(|&(eps, a, err)| {
            let w = if err > 0.0 { 1.0 / (err * err) } else { 1.0 };
            let f: f64 = model
                .basis(eps, tau)
                .iter()
                .zip(&params)
                .map(|(x, p)| x * p)
                .sum();
            w * (a - f).powi(2)
        })
        .sum();
    Ok(FitResult {
        model,
        params,
        stderr: diag.iter().map(|d: &f64| d.max(0.0).sqrt()).collect(),
        rss,
        tau,
    })
}

/// Weighted least-squares fits of both models to `(ε, A, stderr)` triples.
pub fn fit_models(data: &[(f64, f64, f64)], tau: f64) -> Result<(FitResult, FitResult)> {
    let mut eps: Vec<f64> = data.iter().map(|d| d.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 {
        return Err(CatError::InsufficientData(
            "need at least 3 distinct epsilon values".into(),
        ));
    }
    Ok((fit(Model::F1, data, tau)?, fit(Model::F2, data, tau)?))
}

/// `A(ε)` with its standard error for each ε, all other settings from `base`.
pub fn asymmetry_scan(
    base: &SimConfig,
    eps: &[f64],
    p_max: f64,
    errors: ErrorModel,
) -> Result<Vec<(f64, SlopeFit)>> {
    eps.iter()
        .map(|&e| {
            let mut cfg = base.clone();
            cfg.system.epsilon = e;
            let stats = simulate(&cfg)?;
            let curve = ratio_curve(&stats, cfg.tau as f64, cfg.bin_width, errors)?;
            Ok((e, slope_and_a(&curve, p_max)?))
        })
        .collect()
}
