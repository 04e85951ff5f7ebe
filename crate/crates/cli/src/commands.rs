use catmap_core::correlation::{CumulantTable, Engine};
use catmap_core::fluctuation::{
    asymmetry_from_cumulants, ft_report, zeta, zeta_closed_form, zeta_ft_form, ZetaSeries,
};
use catmap_core::monte_carlo::{fit_models, ratio_curve, simulate, slope_and_a, SlopeFit};
use catmap_core::perturbation::Perturbation;
use catmap_core::symbolic::{
    birkhoff_frequency, build_cat_partition, decode, encode, transition_matrix, verify_markov,
    MarkovPartition, SymbolWindow,
};
use catmap_core::torus::TorusPoint;
use serde_json::json;

use crate::config::Config;
use crate::output::{num, Sink};
use crate::CliError;

/// Tolerance for calling a perturbative residual nonzero.
const VIOLATION_TOL: f64 = 1e-9;

fn perturbation(cfg: &Config) -> Result<Perturbation, CliError> {
    Ok(Perturbation::with_truncation(cfg.force(), cfg.truncation)?)
}

fn table(cfg: &Config) -> Result<CumulantTable, CliError> {
    let engine = Engine::from_perturbation(perturbation(cfg)?, cfg.order, cfg.boundary_terms)?;
    Ok(engine.table()?)
}

fn series_value(coeffs: &[f64], eps: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * eps + c)
}

pub fn coeffs(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let pert = perturbation(cfg)?;
    let k = cfg.order.saturating_sub(1).max(1);
    let h = pert.conjugation(k)?;
    let mut rows = Vec::new();
    for (m, pair) in h.orders.iter().enumerate() {
        for (comp, poly) in pair.iter().enumerate() {
            for (nu, c) in poly.iter() {
                rows.push(format!(
                    "{m},{comp},{},{},{},{}",
                    nu[0],
                    nu[1],
                    num(c.re),
                    num(c.im)
                ));
            }
        }
    }
    sink.csv("coeffs.csv", "order,component,nu1,nu2,re,im", &rows)?;
    let res = pert.conjugacy_residual(k, &cfg.epsilon, 64)?;
    let rows: Vec<String> = res
        .eps
        .iter()
        .zip(&res.residual)
        .map(|(e, r)| format!("{},{}", num(*e), num(*r)))
        .collect();
    sink.csv("residual.csv", "eps,residual", &rows)?;
    sink.json(
        "coeffs.json",
        &json!({ "order": k, "tail_bounds": h.tail_bounds, "residual_slope": res.slope }),
    )?;
    println!(
        "conjugation through order {k}; residual log-log slope {:.3}",
        res.slope
    );
    Ok(())
}

pub fn cumulants(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let t = table(cfg)?;
    let mut rows = Vec::new();
    for m in 1..=t.max_order {
        rows.push(format!(
            "1,{m},{},{},{}",
            num(t.mean[m]),
            t.shift_window,
            num(t.tail_bound)
        ));
    }
    for n in 2..=t.max_order {
        for m in n..=t.max_order {
            rows.push(format!(
                "{n},{m},{},{},{}",
                num(t.get(n, m)),
                t.shift_window,
                num(t.tail_bound)
            ));
        }
    }
    sink.csv("cumulants.csv", "n,m,value,shift_window,tail_bound", &rows)?;
    sink.json("cumulants.json", &t)?;
    for m in 2..=t.max_order {
        println!("C2^({m}) = {}", t.get(2, m));
    }
    Ok(())
}

pub fn zeta_cmd(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let t = table(cfg)?;
    let k = t.max_order;
    let pipeline = zeta(&t, k)?;
    let closed = zeta_closed_form(&t, k);
    let ft = zeta_ft_form(&t, k);
    let coeff = |z: &ZetaSeries, m: usize, j: usize| {
        z.coeffs
            .get(m)
            .and_then(|c| c.get(j))
            .copied()
            .unwrap_or(0.0)
    };
    let mut rows = Vec::new();
    for m in 0..=k {
        for j in 0..=4 {
            rows.push(format!(
                "{m},{j},{},{},{}",
                num(coeff(&pipeline, m, j)),
                num(coeff(&closed, m, j)),
                num(coeff(&ft, m, j))
            ));
        }
    }
    sink.csv(
        "zeta.csv",
        "eps_order,power_of_p_minus_1,pipeline,closed_form,ft_form",
        &rows,
    )?;
    let mut rows = Vec::new();
    for &eps in &cfg.epsilon {
        for i in -40..=40 {
            let p = i as f64 * 0.05;
            rows.push(format!(
                "{},{},{}",
                num(eps),
                num(p),
                num(pipeline.evaluate(p, eps))
            ));
        }
    }
    sink.csv("zeta_curve.csv", "eps,p,zeta", &rows)?;
    sink.json(
        "zeta.json",
        &json!({ "pipeline": pipeline, "closed_form": closed, "ft_form": ft }),
    )?;
    println!("zeta through order {k} written");
    Ok(())
}

pub fn ftcheck(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let t = table(cfg)?;
    let report = ft_report(&t, t.max_order, VIOLATION_TOL)?;
    let asym = asymmetry_from_cumulants(&t).ok();
    sink.json(
        "ftcheck.json",
        &json!({ "report": report, "asymmetry": asym }),
    )?;
    match &report.leading_violation {
        Some(v) => println!(
            "first violation at eps-order {} (residual {})",
            v.order, v.value
        ),
        None => println!("no violation through eps-order {}", t.max_order),
    }
    Ok(())
}

#[derive(Debug, Clone, serde::Serialize)]
struct Measurement {
    eps: f64,
    sigma_bar: f64,
    fold_steps: u64,
    fit: Option<SlopeFit>,
    note: Option<String>,
}

fn measure(
    cfg: &Config,
    eps: f64,
    runs: &mut Vec<String>,
    curve: &mut Vec<String>,
) -> Result<Measurement, CliError> {
    let sc = cfg.sim_config(eps);
    let stats = simulate(&sc)?;
    for s in &stats {
        runs.push(format!(
            "{},{},{},{},{},{},{},{}",
            num(eps),
            s.run,
            num(s.sigma_bar),
            num(s.normalizer),
            s.windows,
            num(s.max_abs_p),
            num(s.mean_p),
            s.fold_steps
        ));
    }
    let sigma_bar = stats.iter().map(|s| s.sigma_bar).sum::<f64>() / stats.len() as f64;
    let fold_steps = stats.iter().map(|s| s.fold_steps).sum();
    let fitted =
        ratio_curve(&stats, sc.tau as f64, sc.bin_width, cfg.simulation.errors).and_then(|c| {
            for pt in &c.points {
                curve.push(format!(
                    "{},{},{},{},{},{}",
                    num(eps),
                    num(pt.p),
                    num(pt.y),
                    num(pt.err),
                    pt.count_plus,
                    pt.count_minus
                ));
            }
            slope_and_a(&c, cfg.simulation.p_max)
        });
    let (fit, note) = match fitted {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Measurement {
        eps,
        sigma_bar,
        fold_steps,
        fit,
        note,
    })
}

pub fn simulate_cmd(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let (mut runs, mut curve, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for &eps in &cfg.epsilon {
        let r = measure(cfg, eps, &mut runs, &mut curve)?;
        match &r.fit {
            Some(f) => println!(
                "eps = {eps}: sigma_bar = {}, A = {} +- {}",
                r.sigma_bar, f.a, f.stderr
            ),
            None => println!(
                "eps = {eps}: sigma_bar = {}, {}",
                r.sigma_bar,
                r.note.as_deref().unwrap_or("")
            ),
        }
        rows.push(r);
    }
    sink.csv(
        "runs.csv",
        "eps,run,sigma_bar,normalizer,windows,max_abs_p,mean_p,fold_steps",
        &runs,
    )?;
    sink.csv("curve.csv", "eps,p,y,err,count_plus,count_minus", &curve)?;
    sink.json(
        "summary.json",
        &json!({ "simulation": cfg.simulation, "results": rows }),
    )?;
    Ok(())
}

fn scan(cfg: &Config) -> Result<Vec<(f64, SlopeFit)>, CliError> {
    let (mut runs, mut curve) = (Vec::new(), Vec::new());
    cfg.epsilon
        .iter()
        .map(|&eps| {
            let r = measure(cfg, eps, &mut runs, &mut curve)?;
            let note = r.note.unwrap_or_default();
            r.fit
                .map(|f| (eps, f))
                .ok_or_else(|| CliError::Numeric(format!("eps = {eps}: {note}")))
        })
        .collect()
}

pub fn fit(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let a = scan(cfg)?;
    let data: Vec<(f64, f64, f64)> = a.iter().map(|(e, f)| (*e, f.a, f.stderr)).collect();
    let tau = cfg.simulation.tau as f64;
    let (f1, f2) = fit_models(&data, tau)?;
    let rows: Vec<serde_json::Value> = a
        .iter()
        .map(|(e, f)| {
            json!({
                "eps": e,
                "a": f.a,
                "stderr": f.stderr,
                "a_minus_window_f1": f.a - f1.window_term(*e),
                "a_minus_window_f2": f.a - f2.window_term(*e),
            })
        })
        .collect();
    sink.json("fit.json", &json!({ "points": rows, "f1": f1, "f2": f2 }))?;
    println!("f2 linear coefficient {} +- {}", f2.params[0], f2.stderr[0]);
    Ok(())
}

pub fn report(cfg: &Config, sink: &mut Sink) -> Result<(), CliError> {
    let t = table(cfg)?;
    let ft = ft_report(&t, t.max_order, VIOLATION_TOL)?;
    let asym = asymmetry_from_cumulants(&t).ok();
    let measured = scan(cfg)?;
    let rows: Vec<serde_json::Value> = measured
        .iter()
        .map(|(e, f)| {
            json!({
                "eps": e,
                "predicted_a": asym.as_ref().map(|a| series_value(&a.a, *e)),
                "predicted_b": asym.as_ref().map(|a| series_value(&a.b, *e)),
                "measured_a": f.a,
                "measured_stderr": f.stderr,
            })
        })
        .collect();
    sink.json(
        "report.json",
        &json!({
            "leading_violation": ft.leading_violation,
            "asymmetry_series": asym,
            "comparison": rows,
        }),
    )?;
    println!("report written");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Build,
    Verify,
    Encode,
    Decode,
    Frequency,
}

fn partition(cfg: &Config) -> Result<MarkovPartition, CliError> {
    match &cfg.symbolic.partition {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            MarkovPartition::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(build_cat_partition()?),
    }
}

pub fn symbolic(cfg: &Config, verb: Verb, sink: &mut Sink) -> Result<(), CliError> {
    let p = partition(cfg)?;
    let report = verify_markov(&p);
    if !report.passed {
        sink.json("markov_report.json", &report)?;
        return Err(CliError::Numeric(format!(
            "partition is not Markov: {}",
            report.violations.join("; ")
        )));
    }
    let t = transition_matrix(&p);
    let s = &cfg.symbolic;
    let point = TorusPoint::new(s.point[0], s.point[1]);
    match verb {
        Verb::Build | Verb::Verify => {
            sink.write("partition.json", &(p.to_json() + "\n"))?;
            sink.json(
                "markov_report.json",
                &json!({
                    "rectangles": p.len(),
                    "area_fractions": p.area_fractions(),
                    "total_area": p.total_area(),
                    "report": report,
                    "transitions": t,
                }),
            )?;
            let mixing = t.mixing_time.map_or("none".to_string(), |m| m.to_string());
            println!("{} rectangles, mixing time {mixing}", p.len());
        }
        Verb::Encode => {
            let w = encode(&p, point, s.n);
            sink.json("encode.json", &w)?;
            println!("{:?}", w.symbols);
        }
        Verb::Decode => {
            let symbols = s
                .window
                .clone()
                .ok_or_else(|| CliError::Config("symbolic.window is required for decode".into()))?;
            let w = SymbolWindow {
                n: symbols.len() / 2,
                symbols,
                boundary: Vec::new(),
            };
            let d = decode(&p, &w, &t)?;
            sink.json("decode.json", &d)?;
            println!(
                "center ({}, {}), diameter {}",
                d.center.psi1, d.center.psi2, d.diameter
            );
        }
        Verb::Frequency => {
            let f = birkhoff_frequency(&p, point, s.steps);
            let rows: Vec<String> = f
                .iter()
                .zip(p.area_fractions())
                .enumerate()
                .map(|(i, (f, a))| format!("{i},{},{}", num(*f), num(a)))
                .collect();
            sink.csv("frequency.csv", "rectangle,frequency,area_fraction", &rows)?;
            println!("{f:?}");
        }
    }
    Ok(())
}
