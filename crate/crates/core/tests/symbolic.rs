use catmap_core::symbolic::*;
use catmap_core::torus::{CatSystem, HarmonicForce, TorusPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::OnceLock;

fn partition() -> MarkovPartition {
    static P: OnceLock<MarkovPartition> = OnceLock::new();
    P.get_or_init(|| build_cat_partition().expect("construction"))
        .clone()
}

fn cat_step(x: TorusPoint) -> TorusPoint {
    CatSystem::new(0.0, HarmonicForce::single()).step(x)
}

fn random_points(seed: u64, count: usize) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| TorusPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)))
        .collect()
}

#[test]
fn fixed_point_is_on_the_boundary_and_codes_constantly() {
    let p = partition();
    let w = encode(&p, TorusPoint::new(0.0, 0.0), 6);
    assert_eq!(w.boundary.len(), w.symbols.len());
    assert!(w.symbols.iter().all(|s| *s == w.symbols[0]));
}

#[test]
fn encoding_commutes_with_the_shift() {
    let p = partition();
    for (k, x) in random_points(7, 1000).into_iter().enumerate() {
        let wide = encode(&p, x, 6);
        let shifted = encode(&p, cat_step(x), 5);
        for j in -5..=5i64 {
            assert_eq!(shifted.at(j), wide.at(j + 1), "point {k}, position {j}");
        }
    }
}

#[test]
fn encoded_windows_are_admissible() {
    let p = partition();
    let t = transition_matrix(&p);
    for k in 0..200 {
        let x = TorusPoint::new(0.031 * k as f64, 0.577 * k as f64);
        let w = encode(&p, x, 8);
        assert_eq!(w.is_compatible(&t), None);
    }
}

#[test]
fn decode_contains_the_point_and_shrinks_at_the_expansion_rate() {
    let p = partition();
    let t = transition_matrix(&p);
    let x = TorusPoint::new(1.234, 4.321);
    let mut diameters = Vec::new();
    for n in 2..=24 {
        let d = decode(&p, &encode(&p, x, n), &t).unwrap();
        assert!(d.center.distance(&x) <= d.diameter, "n = {n}");
        diameters.push((n as f64, d.diameter.ln()));
    }
    for w in diameters.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9);
    }
    let start = diameters.iter().position(|d| d.0 == 4.0).unwrap();
    let stop = diameters.iter().position(|d| d.0 == 16.0).unwrap();
    let diameters = &diameters[start..=stop];
    let k = diameters.len() as f64;
    let mx = diameters.iter().map(|p| p.0).sum::<f64>() / k;
    let my = diameters.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = diameters
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - my))
        .sum::<f64>()
        / diameters.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let rate = lambda_plus().to_f64().ln();
    assert!(
        (-slope - rate).abs() < 0.05 * rate,
        "slope {slope}, rate {rate}"
    );
}

#[test]
fn decode_error_is_bounded_by_a_fitted_constant() {
    let p = partition();
    let t = transition_matrix(&p);
    let lp = lambda_plus().to_f64();
    let points = random_points(3, 100);
    let c = points
        .iter()
        .map(|x| decode(&p, &encode(&p, *x, 4), &t).unwrap().diameter * lp.powi(4))
        .fold(0.0, f64::max);
    for x in &points {
        for n in 4..=16 {
            let d = decode(&p, &encode(&p, *x, n), &t).unwrap();
            assert!(d.center.distance(x) <= c * lp.powi(-(n as i32)), "n = {n}");
        }
    }
}

#[test]
fn birkhoff_frequencies_match_areas() {
    let p = partition();
    for x0 in random_points(5, 3) {
        let freq = birkhoff_frequency(&p, x0, 1_000_000);
        assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (f, a) in freq.iter().zip(p.area_fractions()) {
            assert!((f - a).abs() < 0.01 * a, "{f} vs {a}");
        }
    }
}

#[test]
fn degenerate_rectangle_is_never_visited() {
    let p = partition();
    let mut rects = p.rectangles.clone();
    let mut flat = rects[0];
    flat.anchor[0] = flat.anchor[0] + QSqrt5::rational(1, 3);
    flat.u_extent = QSqrt5::ZERO;
    rects.push(flat);
    let q = MarkovPartition::new(rects, Provenance::Loaded);
    let freq = birkhoff_frequency(&q, TorusPoint::new(0.5, 1.5), 100_000);
    assert_eq!(freq[7], 0.0);
}

#[test]
fn pair_frequencies_follow_transitions_and_factorize() {
    let p = partition();
    let t = transition_matrix(&p);
    let n = 400_000;
    let seq = orbit_symbols(&p, TorusPoint::new(2.2, 0.9), n + 12);
    let mu = p.area_fractions();
    let r = p.len();
    for lag in [1usize, 10] {
        let mut pairs = vec![vec![0u64; r]; r];
        for i in 0..n {
            pairs[seq[i]][seq[i + lag]] += 1;
        }
        for a in 0..r {
            for b in 0..r {
                let f = pairs[a][b] as f64 / n as f64;
                if lag == 1 && t.t[a][b] == 0 {
                    assert_eq!(pairs[a][b], 0, "forbidden transition {a}->{b}");
                }
                if lag == 10 {
                    assert!((f - mu[a] * mu[b]).abs() < 3e-3, "{a}->{b}: {f}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn decode_inverts_encode(a in 0.0f64..TAU, b in 0.0f64..TAU, n in 1usize..10) {
        let p = partition();
        let t = transition_matrix(&p);
        let x = TorusPoint::new(a, b);
        let w = encode(&p, x, n);
        prop_assume!(w.boundary.is_empty());
        let d = decode(&p, &w, &t).unwrap();
        prop_assert!(d.center.distance(&x) <= d.diameter);
        let again = encode(&p, d.center, n);
        prop_assert_eq!(again.symbols, w.symbols);
    }
}
