//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num::rational::BigRational;
use walklab::boundary::FreeBoundary;
use walklab::drift::{drift_exact_partial, drift_monte_carlo, entropy_partial, MonteCarloDrift};
use walklab::gspace::{
    check_statinv, diagonal_ergodicity, factor_map_pf, solve_stationary, statinv_identity, FiniteGSpace, GenLetter, WordMeasure,
};
use walklab::metric::{build_ball, ClosedFormNorm};
use walklab::moments::{cyclic_orbit_measure, moment_tensor_invariance, OrthogonalRep};
use walklab::quasi::{check_homomorphism_liouville, compute_fk_sequence, compute_phi, generator_pairs, max_lipschitz_excess};
use walklab::sampler::SamplerConfig;
use walklab::{selftest, FiniteMeasure, GroupElement, GroupId};

type Q = BigRational;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn f2() -> GroupId {
    GroupId::Free { k: 2 }
}

fn z(d: u32) -> GroupId {
    GroupId::FreeAbelian { d }
}

fn selftest_case(f: fn() -> walklab::Result<(bool, String)>) -> Outcome {
    match f() {
        Ok((passed, detail)) => outcome(passed, detail),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn mc_config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        seed,
        trajectories: 2000,
        steps: 2000,
        workers: 0,
    }
}

fn free_mc(workers: usize) -> MonteCarloDrift {
    let mu = FiniteMeasure::<f64>::simple_random_walk(f2());
    let norm = ClosedFormNorm::new(f2()).unwrap();
    let cfg = SamplerConfig { workers, ..mc_config(2024) };
    drift_monte_carlo(&mu, &norm, &cfg, &[2000]).unwrap()
}

fn criterion_2a() -> Outcome {
    let p = free_mc(0).points[0].clone();
    outcome(
        (0.48..=0.52).contains(&p.mean),
        format!("estimate {:.4} +/- {:.4} at n = 2000", p.mean, p.half_width),
    )
}

fn criterion_2b() -> Outcome {
    let mu = FiniteMeasure::<f64>::simple_random_walk(z(2));
    let norm = ClosedFormNorm::new(z(2)).unwrap();
    let exact = drift_exact_partial(&mu, &norm, 8, &0.0, 0).unwrap();
    let ratios: Vec<f64> = [1usize, 2, 4, 8].iter().map(|&n| exact.a[n] / n as f64).collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let mc = drift_monte_carlo(&mu, &norm, &mc_config(7), &[2000]).unwrap();
    let est = mc.points[0].mean;
    outcome(
        decreasing && est <= 0.06,
        format!("a_n/n at 1,2,4,8 = {ratios:.4?}; MC estimate {est:.4} at n = 2000"),
    )
}

fn criterion_2c() -> Outcome {
    let g = GroupId::Lamplighter;
    // walk +1, walk -1, switch
    let weights = [0.25, 0.25, 0.5];
    let mu = FiniteMeasure::<f64>::from_atoms(g, g.generators().elements().iter().cloned().zip(weights)).unwrap();
    let norm = ClosedFormNorm::new(g).unwrap();
    let mc = drift_monte_carlo(&mu, &norm, &mc_config(11), &[500, 1000, 2000]).unwrap();
    let means: Vec<f64> = mc.points.iter().map(|p| p.mean).collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let last = *means.last().unwrap();
    outcome(
        decreasing && last <= 0.15,
        format!("estimates at 500, 1000, 2000 = {means:.4?}"),
    )
}

fn criterion_2d() -> Outcome {
    let mu = FiniteMeasure::<f64>::simple_random_walk(f2());
    let ent = entropy_partial(&mu, 8, &0.0, 0).unwrap();
    let rate = ent.rate(8);
    let target = 0.5 * 3f64.ln();
    let b = FreeBoundary::new(f2()).unwrap();
    let c = b.c_sequence(&FiniteMeasure::<Q>::simple_random_walk(f2()), 1).unwrap();
    let minus_c1 = -c.values[0];
    let ok = (rate - target).abs() <= 0.05 && (rate - minus_c1).abs() <= 0.05;
    outcome(
        ok,
        format!(
            "H_8/8 = {rate:.4}, (1/2) log 3 = {target:.4}, -c_1 = {minus_c1:.4}, gap {:.4}",
            (rate - target).abs()
        ),
    )
}

fn defect_series(group: GroupId, ns: &[usize]) -> (Vec<f64>, f64, f64) {
    let mu = FiniteMeasure::<f64>::simple_random_walk(group);
    let norm = ClosedFormNorm::new(group).unwrap();
    let ball = build_ball(group, &group.generators(), 4, 1 << 20).unwrap();
    let eval = ball.elements_within(4);
    let n_max = *ns.iter().max().unwrap();
    let fks = compute_fk_sequence(&mu, &norm, n_max, &eval, &0.0, 0).unwrap();
    let mut bound_excess = f64::NEG_INFINITY;
    for fk in &fks {
        bound_excess = bound_excess.max(fk.max_bound_excess(&norm).unwrap());
    }
    let inner = ball.elements_within(2);
    let pairs: Vec<(GroupElement, GroupElement)> = inner
        .iter()
        .flat_map(|g| inner.iter().map(move |s| (g.clone(), s.clone())))
        .collect();
    let test_pairs = generator_pairs(group);
    let mut lipschitz = f64::NEG_INFINITY;
    let mut defects = Vec::new();
    for &n in ns {
        let phi = compute_phi(&fks, n).unwrap();
        lipschitz = lipschitz.max(max_lipschitz_excess(&phi, &norm, &pairs).unwrap());
        defects.push(check_homomorphism_liouville(&phi, &test_pairs).unwrap());
    }
    (defects, bound_excess, lipschitz)
}

fn criterion_3() -> Outcome {
    let ns = [8, 32, 64];
    let mut ok = true;
    let mut parts = Vec::new();
    for group in [z(1), z(2)] {
        let (defects, bound, lip) = defect_series(group, &ns);
        let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
        let small = defects[2] <= 0.2;
        ok &= bound <= 0.0 && lip <= 0.0 && decreasing && small;
        parts.push(format!(
            "{group}: defect at 8,32,64 = {defects:.4?}, |f_k| excess {bound:.2e}, Lipschitz excess {lip:.2e}"
        ));
    }
    outcome(ok, parts.join("; "))
}

fn random_word_measure(seed: u64, space: &FiniteGSpace) -> WordMeasure {
    // weights from a small deterministic sequence, always positive
    let gens = space.generator_names().len();
    let mut raw = Vec::new();
    for g in 0..gens {
        for inverse in [false, true] {
            let w = 1.0 + ((seed * 31 + g as u64 * 7 + inverse as u64 * 3) % 5) as f64;
            raw.push((vec![GenLetter { generator: g, inverse }], w));
        }
    }
    raw.push((space.parse_word("a b").unwrap(), 1.0 + (seed % 3) as f64));
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    WordMeasure::new(raw.into_iter().map(|(w, p)| (w, p / total)).collect()).unwrap()
}

fn criterion_4() -> Outcome {
    let mut worst_identity = 0.0f64;
    let mut invariant_all = true;
    for seed in 0..20u64 {
        let size = 3 + (seed % 6) as usize;
        // half of the spaces are transitive, half are unions of two orbits
        let space = if seed % 2 == 0 {
            FiniteGSpace::random_transitive(seed, size, &["a", "b"])
        } else {
            let x = FiniteGSpace::random_transitive(seed, size, &["a", "b"]);
            let y = FiniteGSpace::random_transitive(seed + 100, 2, &["a", "b"]);
            disjoint_union(&x, &y)
        };
        let mu = random_word_measure(seed, &space);
        let nu = solve_stationary(&space, &mu).unwrap().measure;
        let f: Vec<f64> = (0..space.size()).map(|i| ((i as u64 * 37 + seed * 11) % 13) as f64 / 7.0 - 0.9).collect();
        for id in statinv_identity(&space, &nu, &mu, &f, 4).unwrap() {
            worst_identity = worst_identity.max(id.residual);
        }
        // harmonic functions: combinations of orbit indicators
        let mut h = vec![0.0; space.size()];
        for (i, orbit) in space.orbits().iter().enumerate() {
            for &x in orbit {
                h[x] = 1.0 + i as f64 * 2.5;
            }
        }
        let rep = check_statinv(&space, &nu, &mu, &h).unwrap();
        worst_identity = worst_identity.max(rep.max_identity_residual);
        invariant_all &= rep.invariant && rep.max_lhs <= 1e-10;
    }

    let mut dichotomy_all = true;
    for seed in 0..20u64 {
        let size = 2 + (seed % 5) as usize;
        let x = FiniteGSpace::random_transitive(seed + 500, size, &["a", "b"]);
        let y = if seed % 2 == 0 { x.clone() } else { relabel(&x, seed) };
        let nu = vec![1.0 / size as f64; size];
        let erg = diagonal_ergodicity(&x, &nu, &y, &nu).unwrap();
        let Some(witness) = erg.witness else {
            dichotomy_all = false;
            continue;
        };
        let mean: f64 = witness.iter().sum::<f64>() / witness.len() as f64;
        let centered: Vec<f64> = witness.iter().map(|v| v - mean).collect();
        let scale = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f: Vec<f64> = centered.iter().map(|v| v / scale).collect();
        let rep = factor_map_pf(&f, &x, &nu, &y, &nu).unwrap();
        dichotomy_all &= rep.f_nonzero && !rep.f2_constant && rep.dichotomy_holds && rep.max_lambda <= 1e-10;
    }

    let mut tensors_ok = true;
    for n in [3usize, 4] {
        let rep = OrthogonalRep::rotation(n);
        let a = rep.word_matrix(&[GenLetter { generator: 0, inverse: false }]);
        let xi = cyclic_orbit_measure(&a, DVector::from_column_slice(&[1.0, 0.0]), 16).unwrap();
        let r = moment_tensor_invariance(&rep, &xi, &WordMeasure::simple_random_walk(1), 3).unwrap();
        let s1_zero = r.orders[0].moment_sigma.iter().all(|v| v.abs() < 1e-12);
        let s2_half = r.orders[1]
            .moment_sigma
            .iter()
            .zip([0.5, 0.0, 0.0, 0.5])
            .all(|(v, e)| (v - e).abs() < 1e-12);
        let fixed = r.orders.iter().all(|o| o.averaged_residual < 1e-12 && o.fixed_residual < 1e-12);
        tensors_ok &= s1_zero && s2_half && fixed && r.invariant;
    }
    outcome(
        worst_identity <= 1e-10 && invariant_all && dichotomy_all && tensors_ok,
        format!(
            "identity residual {worst_identity:.2e}, harmonic invariant {invariant_all}, dichotomy {dichotomy_all}, moment tensors {tensors_ok}"
        ),
    )
}

fn disjoint_union(x: &FiniteGSpace, y: &FiniteGSpace) -> FiniteGSpace {
    let n = x.size();
    let gens = (0..x.generator_names().len())
        .map(|i| {
            let mut p = x.generator(i).clone();
            p.extend(y.generator(i).iter().map(|v| v + n));
            (x.generator_names()[i].clone(), p)
        })
        .collect();
    FiniteGSpace::new(n + y.size(), gens, Vec::new()).unwrap()
}

fn relabel(x: &FiniteGSpace, seed: u64) -> FiniteGSpace {
    let n = x.size();
    let shift = 1 + seed as usize % n.max(2);
    let sigma: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
    let mut inv = vec![0; n];
    for (i, &s) in sigma.iter().enumerate() {
        inv[s] = i;
    }
    let gens = (0..x.generator_names().len())
        .map(|g| {
            let p = x.generator(g);
            let q: Vec<usize> = (0..n).map(|i| sigma[p[inv[i]]]).collect();
            (x.generator_names()[g].clone(), q)
        })
        .collect();
    FiniteGSpace::new(n, gens, Vec::new()).unwrap()
}

fn cylinder_config(workers: usize) -> SamplerConfig {
    SamplerConfig {
        seed: 99,
        trajectories: 100_000,
        steps: 200,
        workers,
    }
}

fn criterion_5() -> Outcome {
    let b = FreeBoundary::new(f2()).unwrap();
    let r = b.cylinder_frequency_check(&cylinder_config(0), 2).unwrap();
    outcome(
        r.total_variation <= 0.02,
        format!("TV {:.4} over 12 cylinders, unresolved {:.5}", r.total_variation, r.unresolved),
    )
}

fn criterion_6() -> Outcome {
    let a = serde_json::to_string(&free_mc(0)).unwrap();
    let b = serde_json::to_string(&free_mc(0)).unwrap();
    let c = serde_json::to_string(&free_mc(1)).unwrap();
    let d = serde_json::to_string(&free_mc(3)).unwrap();
    let boundary = FreeBoundary::new(f2()).unwrap();
    let small = |w| SamplerConfig {
        trajectories: 20_000,
        ..cylinder_config(w)
    };
    let e = serde_json::to_string(&boundary.cylinder_frequency_check(&small(0), 2).unwrap()).unwrap();
    let f = serde_json::to_string(&boundary.cylinder_frequency_check(&small(1), 2).unwrap()).unwrap();
    let g = serde_json::to_string(&boundary.cylinder_frequency_check(&small(0), 2).unwrap()).unwrap();
    outcome(
        a == b && a == c && a == d && e == f && e == g,
        "drift and cylinder reports identical across reruns and worker counts 1, 3, all",
    )
}

fn run(id: &str, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed && elapsed <= limit, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {id} {name} ({:.1}s): {detail}", elapsed.as_secs_f64());
    passed
}

fn main() {
    let five = Duration::from_secs(300);
    let ten = Duration::from_secs(600);
    let two = Duration::from_secs(120);
    let mut results = Vec::new();
    let exact: [(&str, &str, fn() -> walklab::Result<(bool, String)>); 8] = [
        ("1a", "cocycle identity on the radius-3 ball, level 8", || selftest::cocycle_identity(0)),
        ("1b", "cocycle normalization for k <= 3", selftest::cocycle_normalization),
        ("1c", "c_n = n c_1 with c_1 = -(1/2) log 3", selftest::c_sequence),
        ("1d", "Poisson semi-norm equals |g| log 3 and is a semi-norm", selftest::poisson_seminorm),
        ("1e", "Poisson integrals of level-3 functions are harmonic", selftest::harmonicity),
        ("1f", "f_k recursion exact for k <= 4 on F2 and Z^2", selftest::diag_recursion),
        ("1g", "span rank 4 at level 1 and 12 at level 2", selftest::span_rank),
        ("1h", "a_n(mu) = a_n(mu check) for n <= 12", selftest::adjoint_drift),
    ];
    let suite_start = Instant::now();
    for (id, name, f) in exact {
        results.push(run(id, name, five, || selftest_case(f)));
    }
    let suite_time = suite_start.elapsed();
    results.push(run("1", "exact identity suite under 5 minutes", five, || {
        outcome(suite_time <= five, format!("{:.1}s", suite_time.as_secs_f64()))
    }));
    results.push(run("2a", "F2 Monte Carlo drift in [0.48, 0.52]", ten, criterion_2a));
    results.push(run("2b", "Z^2 drift bounds decreasing, estimate <= 0.06", ten, criterion_2b));
    results.push(run("2c", "lamplighter estimates decreasing, final <= 0.15", ten, criterion_2c));
    results.push(run("2d", "F2 entropy rate H_8/8 within 0.05 of -c_1", ten, criterion_2d));
    results.push(run("3", "quasi-harmonic bounds and homomorphism defect", ten, criterion_3));
    results.push(run("4", "stationary spaces", two, criterion_4));
    results.push(run("5", "boundary cylinder frequencies", ten, criterion_5));
    results.push(run("6", "determinism across reruns and workers", ten, criterion_6));
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
