//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p haar-radial --test acceptance`.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use haar_radial::charfn::{lemma2_chain, CharFunction};
use haar_radial::density::{MainDensity, Mutation, VandermondeIndex};
use haar_radial::matrix::{BlockUnitary, C64};
use haar_radial::spectral::extract_direct;
use haar_radial::verify::{
    forward_pushforward_test, normalization_check, roundtrip_suite, staged_pushforward_check, ForwardConfig,
    NormalizationConfig, RoundtripConfig, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

fn normalization() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, m) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let r = normalization_check(&NormalizationConfig::new(n, m, 1_000_000, 1000 + (10 * n + m) as u64)).unwrap();
        ok &= r.passed;
        parts.push(format!(
            "({n},{m}) {:.4}±{:.4} ess={:.0}",
            r.estimate, r.std_error, r.effective_sample_size
        ));
    }
    outcome(ok, parts.join("; "))
}

fn adjudication() -> Outcome {
    let seed = 2000;
    let good = normalization_check(&NormalizationConfig::new(1, 2, 1_000_000, seed)).unwrap();
    let mut cfg = NormalizationConfig::new(1, 2, 1_000_000, seed + 1);
    cfg.target = Target::Main(MainDensity { vandermonde: VandermondeIndex::Literal, ..MainDensity::default() });
    let literal = normalization_check(&cfg).unwrap();
    let sigmas = (literal.estimate - 1.0).abs() / literal.std_error;
    outcome(
        good.passed && sigmas >= 5.0,
        format!(
            "m-reading {:.4}±{:.4}; literal n-reading {:.4}±{:.4} ({sigmas:.1}σ from 1)",
            good.estimate, good.std_error, literal.estimate, literal.std_error
        ),
    )
}

fn forward() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, m) in [(1, 1), (1, 2), (2, 2)] {
        let r = forward_pushforward_test(&ForwardConfig::new(n, m, 100_000, 1_000_000, 3000 + (10 * n + m) as u64)).unwrap();
        ok &= r.passed;
        let zs: Vec<String> = r.comparisons.iter().map(|c| format!("{}={:+.2}", c.statistic, c.z)).collect();
        parts.push(format!("({n},{m}) {}", zs.join(" ")));
    }
    let mut cfg = ForwardConfig::new(1, 1, 100_000, 1_000_000, 3100);
    cfg.density.mutation = Some(Mutation::DropDetU);
    let control = forward_pushforward_test(&cfg).unwrap();
    let detected = control.max_abs_z > 5.0;
    parts.push(format!(
        "drop-detU control max|z|={:.1}, {} stuck chains",
        control.max_abs_z, control.stuck_chains
    ));
    outcome(ok && detected, parts.join("; "))
}

fn roundtrip() -> Outcome {
    let mut worst_field: f64 = 0.0;
    let mut worst_fn: f64 = 0.0;
    let mut worst_cross: f64 = 0.0;
    let mut worst_rate: f64 = 0.0;
    let mut failed = Vec::new();
    for n in 1..=4 {
        for m in 1..=4 {
            let r = roundtrip_suite(&RoundtripConfig::new(n, m, 1000, 4000 + (10 * n + m) as u64)).unwrap();
            worst_field = worst_field.max(r.max_field_error);
            worst_fn = worst_fn.max(r.max_function_error);
            worst_cross = worst_cross.max(r.max_cross_path_error);
            worst_rate = worst_rate.max(r.rejection_rate);
            if !r.passed {
                failed.push(format!("({n},{m})"));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!(
            "field {worst_field:.1e}, function {worst_fn:.1e}, cross-path {worst_cross:.1e}, max rejection rate {:.2}%{}",
            100.0 * worst_rate,
            if failed.is_empty() { String::new() } else { format!(", failing sizes {}", failed.join(" ")) }
        ),
    )
}

fn random_sizes(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=4), rng.random_range(1..=4))
}

fn analytic_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut unit: f64 = 0.0;
    let mut contr: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    let mut degree: f64 = 0.0;
    for _ in 0..1000 {
        let (n, m) = random_sizes(&mut rng);
        let g = BlockUnitary::haar(n, m, &mut rng);
        let f = CharFunction::of_unitary(&g);
        for _ in 0..5 {
            let on = C64::from_polar(1.0, rng.random_range(0.0..TAU));
            unit = unit.max(f.eval(on).unwrap().unitarity_defect());
            let inside = C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random_range(0.0..TAU));
            contr = contr.max(f.eval(inside).unwrap().operator_norm());
        }
        let l = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if let (Ok(direct), Ok(r)) = (f.eval(l).map(|x| x.det()), f.det_ratio(l)) {
            ratio = ratio.max((direct - r).norm() / direct.norm());
        }
        let (num, den) = f.det_polynomials(0.5).unwrap();
        for _ in 0..3 {
            let fresh = C64::from_polar(rng.random_range(0.1..0.9), rng.random_range(0.0..TAU));
            let parts = f.det_parts_unchecked(fresh).unwrap();
            let e_num = (num.truncated(m).eval(fresh) - parts.numerator).norm();
            let e_den = (den.truncated(m).eval(fresh) - parts.denominator).norm();
            degree = degree.max(e_num).max(e_den);
        }
    }
    outcome(
        unit <= 1e-9 && contr <= 1.0 + 1e-9 && ratio <= 1e-9 && degree <= 1e-8,
        format!(
            "unitarity {unit:.1e}, max norm inside 1{:+.1e}, det ratio rel {ratio:.1e}, degree-m interpolation {degree:.1e}",
            contr - 1.0
        ),
    )
}

fn lemma2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..500 {
        let (n, m) = random_sizes(&mut rng);
        let g = BlockUnitary::haar(n, m, &mut rng);
        let f = CharFunction::of_unitary(&g);
        for _ in 0..10 {
            let t = C64::from_polar(1.0, rng.random_range(1e-3..TAU - 1e-3));
            match lemma2_chain(&g, t) {
                Ok(v) => worst = worst.max(v.max_abs_diff(&f.eval(t).unwrap())),
                Err(_) => skipped += 1,
            }
        }
    }
    outcome(worst <= 1e-9 && skipped == 0, format!("max deviation {worst:.1e} over 5000 points, {skipped} undefined"))
}

fn hua_stage() -> Outcome {
    let k1 = staged_pushforward_check(1, 100_000, 7001).unwrap();
    let k2 = staged_pushforward_check(2, 100_000, 7002).unwrap();
    let p = k1.checks.iter().find_map(|c| c.p_value).unwrap();
    let zs: Vec<String> = k2.checks.iter().map(|c| format!("{}={:+.2}", c.name, c.z.unwrap())).collect();
    outcome(k1.passed && k2.passed, format!("k=1 KS p={p:.3}; k=2 {}", zs.join(" ")))
}

fn derivative() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let h = 1e-6;
    let mut fd: f64 = 0.0;
    for _ in 0..500 {
        let (n, m) = random_sizes(&mut rng);
        let f = CharFunction::of_unitary(&BlockUnitary::haar(n, m, &mut rng));
        let l = C64::from_polar(rng.random_range(0.0..0.95), rng.random_range(0.0..TAU));
        let central = (&f.eval(l + h).unwrap() - &f.eval(l - h).unwrap()).scale(C64::new(0.5 / h, 0.0));
        fd = fd.max(f.derivative(l).unwrap().max_abs_diff(&central));
    }
    let mut norm: f64 = 0.0;
    let mut extracted = 0;
    for _ in 0..2000 {
        let (n, m) = random_sizes(&mut rng);
        let g = BlockUnitary::haar(n, m, &mut rng);
        if let Ok(sd) = extract_direct(&g) {
            norm = norm.max(sd.normalization_residual(&CharFunction::of_unitary(&g)).unwrap());
            extracted += 1;
        }
    }
    outcome(
        fd <= 1e-6 && norm <= 1e-8,
        format!("finite difference {fd:.1e}; normalization identity {norm:.1e} over {extracted} samples"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("normalization of the main density", normalization),
        ("Vandermonde index adjudication", adjudication),
        ("forward pushforward two-sample test", forward),
        ("round trip and cross-path extraction", roundtrip),
        ("analytic properties of the characteristic function", analytic_properties),
        ("Cayley chain identity", lemma2),
        ("Hua stage", hua_stage),
        ("derivative and normalization identity", derivative),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        all &= o.passed;
        println!(
            "[{}] criterion {}: {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.summary,
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
