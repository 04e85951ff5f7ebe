use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use catmap_core::correlation::{transport_matrix, CumulantTable, Engine};
use catmap_core::fluctuation::*;
use catmap_core::monte_carlo::*;
use catmap_core::perturbation::Perturbation;
use catmap_core::symbolic::*;
use catmap_core::torus::{CatSystem, HarmonicForce, TorusPoint};
use catmap_suite::quadrature::{check_engine, Quadrature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
type Scan = (Vec<(f64, SlopeFit)>, FitResult, FitResult);

fn tables() -> Result<(CumulantTable, CumulantTable), String> {
    let single = Engine::new(HarmonicForce::single(), 4).and_then(|e| e.table());
    let double = Engine::new(HarmonicForce::double(), 4).and_then(|e| e.table());
    Ok((
        single.map_err(|e| e.to_string())?,
        double.map_err(|e| e.to_string())?,
    ))
}

fn lambdas() -> (f64, f64) {
    (lambda_plus().to_f64(), lambda_minus().to_f64())
}

/// Relative agreement, absolute when the expected value is zero.
fn agrees(got: f64, want: f64, tol: f64) -> bool {
    if want == 0.0 {
        got.abs() < tol
    } else {
        ((got - want) / want).abs() < tol
    }
}

fn exact_values() -> Outcome {
    let start = Instant::now();
    let (s, d) = tables()?;
    let elapsed = start.elapsed().as_secs_f64();
    let (lp, lm) = lambdas();
    let checks = [
        ("single <sigma>(2)", s.mean[2], 1.0),
        ("single C2(2)", s.get(2, 2), 2.0),
        ("single C3(3)", s.get(3, 3), 0.0),
        ("single C3(4)", s.get(3, 4), 6.0 * lm / (lp + 1.0) + 1.5),
        ("single C4(4)", s.get(4, 4), 3.0),
        ("double C3(3)", d.get(3, 3), -12.0),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !agrees(*got, *want, 1e-10))
        .map(|(name, got, want)| format!("{name} = {got}, expected {want}"))
        .collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    if elapsed >= 10.0 {
        return Err(format!("took {elapsed:.1} s"));
    }
    Ok(format!("6 values in {elapsed:.2} s"))
}

fn zeta_forms() -> Outcome {
    let (s, d) = tables()?;
    let z = zeta(&s, 4).map_err(|e| e.to_string())?;
    let c = zeta_closed_form(&s, 4);
    let mut worst = 0.0f64;
    for m in 0..=4 {
        for j in 0..=4 {
            worst = worst.max((z.coeff(m, j) - c.coeff(m, j)).abs());
        }
    }
    if worst >= 1e-10 {
        return Err(format!("pipeline differs from closed form by {worst:e}"));
    }
    for t in [&s, &d] {
        let a = zeta_closed_form(&impose_ft(t), 4);
        let b = zeta_ft_form(t, 4);
        for m in 0..=4 {
            for j in 0..=4 {
                if (a.coeff(m, j) - b.coeff(m, j)).abs() >= 1e-10 {
                    return Err(format!("imposed form differs at order {m}, power {j}"));
                }
            }
        }
    }
    Ok(format!(
        "pipeline vs closed form {worst:.1e}; imposed relations give the symmetric form"
    ))
}

fn ft_algebra() -> Outcome {
    let (s, d) = tables()?;
    let (lp, lm) = lambdas();
    let rel1 = check_rel1(&lambda_from_cumulants(&s, 4).map_err(|e| e.to_string())?);
    let rel3 = check_rel3(&s, 2, 4).map_err(|e| e.to_string())?;
    let clean = |m: usize| rel3[m].abs() < 1e-12 && rel1[m].iter().all(|v| v.abs() < 1e-12);
    if !(0..4).all(clean) {
        return Err("single harmonic residual below fourth order".into());
    }
    if clean(4) {
        return Err("single harmonic relations hold at fourth order".into());
    }
    let double = check_rel3(&d, 2, 4).map_err(|e| e.to_string())?;
    let first = double.iter().position(|v| v.abs() > 1e-12);
    if first != Some(3) || !agrees(double[3], -12.0, 1e-10) {
        return Err(format!(
            "two harmonic first failure {first:?} with {}",
            double[3]
        ));
    }
    let want = 6.0 * lm / (lp + 1.0);
    if !agrees(rel3[4], want, 1e-10) {
        return Err(format!(
            "orders 4 and 3 (-12) as expected, but single residual C3-C4/2 = {} against {want}",
            rel3[4]
        ));
    }
    Ok(format!(
        "first failures at orders 4 ({}) and 3 (-12)",
        rel3[4]
    ))
}

fn green_kubo() -> Outcome {
    let (s, d) = tables()?;
    for (name, t) in [("single", &s), ("double", &d)] {
        let gap = (t.mean[2] - t.get(2, 2) / 2.0).abs();
        if gap >= 1e-12 {
            return Err(format!("{name}: <sigma>(2) - C2(2)/2 = {gap:e}"));
        }
    }
    let family = HarmonicForce::double().harmonics;
    let l = transport_matrix(&family).map_err(|e| e.to_string())?;
    if l.symmetry_residual != 0.0 || l.l[0][1] != 0.0 || l.l[1][0] != 0.0 {
        return Err(format!("transport matrix {:?}", l.l));
    }
    Ok(format!("L = {:?}", l.l))
}

fn conjugacy() -> Outcome {
    let start = Instant::now();
    let p = Perturbation::new(HarmonicForce::single()).map_err(|e| e.to_string())?;
    let eps = [1e-3, 2e-3, 4e-3, 1e-2];
    let mut slopes = Vec::new();
    for k in 1..=3 {
        let t = p
            .conjugacy_residual(k, &eps, 16)
            .map_err(|e| e.to_string())?;
        if (t.slope - (k + 1) as f64).abs() > 0.2 {
            return Err(format!("K = {k}: slope {:.3}", t.slope));
        }
        slopes.push(format!("{:.3}", t.slope));
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        return Err(format!("took {elapsed:.1} s"));
    }
    Ok(format!("slopes {} in {elapsed:.2} s", slopes.join(", ")))
}

fn oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for force in [HarmonicForce::single(), HarmonicForce::double()] {
        let s = check_engine(force, 1e-8)?;
        worst = worst.max(s.worst);
        count += s.truncated;
    }
    let family = HarmonicForce::double().harmonics;
    let l = transport_matrix(&family).map_err(|e| e.to_string())?;
    let quad = Quadrature::new(6);
    let currents: Vec<_> = family
        .iter()
        .map(|h| {
            let p = Perturbation::new(HarmonicForce::from_pairs(&[(h.nu, 1.0)]))?;
            Ok(p.jacobian_terms().0.scale(-1.0))
        })
        .collect::<catmap_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    for i in 0..2 {
        for j in 0..2 {
            let q = 0.5 * quad.shift_sum(&[&currents[i], &currents[j]], 6);
            worst = worst.max((q - l.l[i][j]).abs());
            count += 1;
        }
    }
    if worst >= 1e-8 {
        return Err(format!("largest deviation {worst:e}"));
    }
    Ok(format!("{count} averages, largest deviation {worst:.1e}"))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut cfg = SimConfig {
        system: CatSystem::new(0.05, HarmonicForce::single()),
        t: 1_000_000,
        tau: 100,
        runs: 20,
        bin_width: 0.05,
        seed: 1,
        workers: 0,
        normalization: Normalization::PerRun,
    };
    let parallel = simulate(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    cfg.workers = 1;
    let sequential = simulate(&cfg).map_err(|e| e.to_string())?;
    if parallel != sequential {
        return Err("results depend on the worker count".into());
    }
    let curve =
        ratio_curve(&parallel, 100.0, 0.05, ErrorModel::RunToRun).map_err(|e| e.to_string())?;
    let bins: Vec<_> = curve
        .points
        .iter()
        .filter(|pt| pt.p <= 2.0 + 1e-12)
        .collect();
    if bins.is_empty() {
        return Err("no populated bins".into());
    }
    for pt in &bins {
        if (pt.y - 1.0).abs() > 3.0 * pt.err {
            return Err(format!("p = {:.2}: y = {:.3} ± {:.3}", pt.p, pt.y, pt.err));
        }
    }
    Ok(format!(
        "{} bins within 3 SE, {elapsed:.1} s, worker counts agree",
        bins.len()
    ))
}

fn corrected(fit: &FitResult, eps: f64, a: f64) -> f64 {
    (a - fit.window_term(eps)).abs()
}

fn a_scaling() -> Outcome {
    let eps = [0.1, 0.2, 0.3];
    let scan = |force: HarmonicForce| -> Result<Scan, String> {
        let base = SimConfig {
            system: CatSystem::new(eps[0], force),
            t: 2_000_000,
            tau: 20,
            runs: 20,
            bin_width: 0.05,
            seed: 1,
            workers: 0,
            normalization: Normalization::PerRun,
        };
        let r =
            asymmetry_scan(&base, &eps, 1.0, ErrorModel::RunToRun).map_err(|e| e.to_string())?;
        let data: Vec<_> = r.iter().map(|(e, s)| (*e, s.a, s.stderr)).collect();
        let (f1, f2) = fit_models(&data, 20.0).map_err(|e| e.to_string())?;
        Ok((r, f1, f2))
    };
    let (single, f1_single, f2_single) = scan(HarmonicForce::single())?;
    let (double, _, f2_double) = scan(HarmonicForce::double())?;
    for ((e, s), (_, d)) in single.iter().zip(&double) {
        let (cs, cd) = (
            corrected(&f1_single, *e, s.a),
            corrected(&f2_double, *e, d.a),
        );
        if cd <= cs {
            return Err(format!(
                "eps = {e}: corrected |A| double {cd:.4} <= single {cs:.4}"
            ));
        }
    }
    let (a2, e2) = (f2_double.params[0], f2_double.stderr[0]);
    if a2.abs() <= 2.0 * e2 {
        return Err(format!("double linear coefficient {a2:.3} ± {e2:.3}"));
    }
    let (a1, e1) = (f2_single.params[0], f2_single.stderr[0]);
    if a1.abs() > 2.0 * e1 {
        return Err(format!("single linear coefficient {a1:.3} ± {e1:.3}"));
    }
    Ok(format!(
        "double exceeds single at every eps; linear coefficient double {a2:.3} ± {e2:.3}, single {a1:.3} ± {e1:.3}"
    ))
}

fn random_points(seed: u64, count: usize) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| TorusPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)))
        .collect()
}

fn symbolic(p: &MarkovPartition) -> Outcome {
    let report = verify_markov(p);
    if !report.passed {
        return Err(format!("verify_markov: {:?}", report.violations));
    }
    let t = transition_matrix(p);
    let x0 = TorusPoint::new(1.234, 4.321);
    let freq = birkhoff_frequency(p, x0, 1_000_000);
    for (f, a) in freq.iter().zip(p.area_fractions()) {
        if (f - a).abs() >= 0.01 * a {
            return Err(format!("frequency {f} against area {a}"));
        }
    }
    let mut log_d = Vec::new();
    for n in 4..=16 {
        let d = decode(p, &encode(p, x0, n), &t).map_err(|e| e.to_string())?;
        log_d.push((n as f64, d.diameter.ln()));
    }
    let k = log_d.len() as f64;
    let mx = log_d.iter().map(|q| q.0).sum::<f64>() / k;
    let my = log_d.iter().map(|q| q.1).sum::<f64>() / k;
    let slope = log_d.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>()
        / log_d.iter().map(|q| (q.0 - mx).powi(2)).sum::<f64>();
    let rate = lambda_plus().to_f64().ln();
    if (-slope - rate).abs() >= 0.05 * rate {
        return Err(format!("decay rate {} against {rate}", -slope));
    }
    let cat = CatSystem::new(0.0, HarmonicForce::single());
    for x in random_points(7, 1000) {
        let wide = encode(p, x, 6);
        let shifted = encode(p, cat.step(x), 5);
        if (-5..=5i64).any(|j| shifted.at(j) != wide.at(j + 1)) {
            return Err(format!("shift covariance fails at {x:?}"));
        }
    }
    Ok(format!(
        "{} rectangles, mixing time {}, decay rate {:.4}, covariance on 1000 points",
        p.len(),
        t.mixing_time.map_or("none".into(), |m| m.to_string()),
        -slope
    ))
}

/// Decode contract: every compatible extension strictly shrinks the diameter.
fn decode_strictly_monotone(p: &MarkovPartition) -> Outcome {
    let t = transition_matrix(p);
    for x in random_points(11, 20) {
        let mut last = f64::INFINITY;
        for n in 1..=16 {
            let d = decode(p, &encode(p, x, n), &t)
                .map_err(|e| e.to_string())?
                .diameter;
            if d >= last {
                return Err(format!("n = {n}: diameter {d} is not below {last}"));
            }
            last = d;
        }
    }
    Ok("20 points, n = 1..16".into())
}

fn main() -> ExitCode {
    let partition = build_cat_partition();
    let criteria: Vec<(&str, Check)> = vec![
        (
            "criterion 1 exact perturbative values",
            Box::new(exact_values),
        ),
        ("criterion 2 large deviation forms", Box::new(zeta_forms)),
        (
            "criterion 3 fluctuation relation algebra",
            Box::new(ft_algebra),
        ),
        ("criterion 4 green-kubo and onsager", Box::new(green_kubo)),
        (
            "criterion 5 conjugacy residual scaling",
            Box::new(conjugacy),
        ),
        ("criterion 6 grid quadrature oracle", Box::new(oracle)),
        ("criterion 7 monte carlo ratio curve", Box::new(monte_carlo)),
        ("criterion 8 asymmetry scaling", Box::new(a_scaling)),
        (
            "criterion 9 symbolic dynamics",
            Box::new(|| {
                partition
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(symbolic)
            }),
        ),
        (
            "contract decode diameters strictly decrease",
            Box::new(|| {
                partition
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(decode_strictly_monotone)
            }),
        ),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
