//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cegis_clf::learner::LearnerProblem;
use cegis_clf::spectral::{inverse_spd, op_norm, weyl_gap};
use cegis_clf::system::ProblemSpec;
use cegis_clf::{
    certify_sampled, certify_vertices, global_minimize, grid_oracle, lipschitz_budget, objective, run, Candidate,
    CegisReport, CegisStatus, CounterexampleSet, Matrix, SymMatrix, UncertaintySet, VerifierBudget,
};
use cegis_clf_cli::report::without_timings;
use cegis_clf_cli::{load_problem, parse_candidate, CertifyReport, SynthReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and limits.
const C1_MAX_ITERS: usize = 20;
const C1_TOL: f64 = 1e-7;
const C1_MAX_TIME: Duration = Duration::from_secs(300);
const C2_TOL: f64 = 1e-3;
const C2_MAX_TIME: Duration = Duration::from_secs(60);
const C3_MAX_ITERS: usize = 15;
const C3_SAMPLES: usize = 100_000;
const C3_TOL: f64 = 1e-7;
const C3_MAX_TIME: Duration = Duration::from_secs(120);
const C4_DRAWS: usize = 1000;
const C4_SLACK: f64 = 1e-10;
const C5_PAIRS: usize = 1000;
const C5_SLACK: f64 = 1e-10;
const C6_HULL_TOL: f64 = 1e-7;
const C6_LP_TOL: f64 = 1e-9;
const C7_INSTANCES: usize = 50;
const C7_RESOLUTION: f64 = 1e-3;
const C8_MARGIN_TOL: f64 = 1e-6;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cegis-clf-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir.join(name)
}

/// Run the binary; returns the exit code.
fn cli(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_cegis-clf"))
        .args(args)
        .output()
        .expect("binary runs");
    out.status.code().unwrap_or(-1)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn synth_report(path: &Path) -> (String, SynthReport) {
    let text = std::fs::read_to_string(path).expect("report written");
    let rep = serde_json::from_str(&text).expect("report parses");
    (text, rep)
}

fn criterion_1() -> Verdict {
    let out = scratch("c1_report.json");
    let start = Instant::now();
    let code = cli(&["synth", path_str(&example("polytopic_4x4.json")), "--out", path_str(&out)]);
    let elapsed = start.elapsed();
    if code != 0 {
        return verdict(false, format!("synth exit code {code}"));
    }
    let (text, rep) = synth_report(&out);
    let spec = load_problem(&example("polytopic_4x4.json")).unwrap();
    let cand = parse_candidate(&text, "report").unwrap();
    let cert = certify_vertices(&cand, &spec.omega, C1_TOL).unwrap();
    let shapes = cand.p.order() == 4 && cand.k.shape() == (1, 4);
    let self_check = cli(&[
        "certify",
        path_str(&example("polytopic_4x4.json")),
        "--candidate",
        path_str(&out),
    ]);
    let pass = rep.status == CegisStatus::Certified
        && rep.iterations <= C1_MAX_ITERS
        && cert.pass
        && cert.evaluated == 65536
        && shapes
        && self_check == 0
        && elapsed <= C1_MAX_TIME;
    verdict(
        pass,
        format!(
            "status {:?}, {} iterations (<= {C1_MAX_ITERS}), {} samples, worst vertex lambda_min {:.4e} over {} vertices (tol {C1_TOL:e}), certify exit {self_check}, {:.1}s (<= {}s)",
            rep.status,
            rep.iterations,
            rep.samples.len(),
            cert.worst,
            cert.evaluated,
            elapsed.as_secs_f64(),
            C1_MAX_TIME.as_secs()
        ),
    )
}

fn criterion_2() -> Verdict {
    let out = scratch("c2_certify.json");
    let start = Instant::now();
    let code = cli(&[
        "certify",
        path_str(&example("polytopic_4x4.json")),
        "--candidate",
        path_str(&example("reference_candidate_4x4.json")),
        "--tol",
        &C2_TOL.to_string(),
        "--out",
        path_str(&out),
    ]);
    let elapsed = start.elapsed();
    let rep: CertifyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let pass = code == 0 && rep.pass && rep.evaluated == 65536 && elapsed <= C2_MAX_TIME;
    verdict(
        pass,
        format!(
            "exit {code}, worst vertex lambda_min {:.4e} over {} vertices (tol {C2_TOL:e}), {:.1}s (<= {}s)",
            rep.worst,
            rep.evaluated,
            elapsed.as_secs_f64(),
            C2_MAX_TIME.as_secs()
        ),
    )
}

fn criterion_3() -> Verdict {
    let out = scratch("c3_report.json");
    let start = Instant::now();
    let code = cli(&["synth", path_str(&example("spherical_2x2.json")), "--out", path_str(&out)]);
    if code != 0 {
        return verdict(false, format!("synth exit code {code}"));
    }
    let (text, rep) = synth_report(&out);
    let spec = load_problem(&example("spherical_2x2.json")).unwrap();
    let cand = parse_candidate(&text, "report").unwrap();
    let cert = certify_sampled(&cand, &spec.omega, C3_SAMPLES, 1, C3_TOL).unwrap();
    let elapsed = start.elapsed();
    let pass =
        rep.status == CegisStatus::Certified && rep.iterations <= C3_MAX_ITERS && cert.pass && elapsed <= C3_MAX_TIME;
    verdict(
        pass,
        format!(
            "status {:?}, {} iterations (<= {C3_MAX_ITERS}), {} samples, worst sampled lambda_min {:.4e} over {} draws (tol {C3_TOL:e}), {:.1}s (<= {}s)",
            rep.status,
            rep.iterations,
            rep.samples.len(),
            cert.worst,
            cert.evaluated,
            elapsed.as_secs_f64(),
            C3_MAX_TIME.as_secs()
        ),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, range: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-range..range))
}

/// Symmetric matrix with spectrum drawn from `[lo, hi]`.
fn spd_in(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let q = random_matrix(rng, n, n, 1.0).qr().q();
    let d = Matrix::from_diagonal(&cegis_clf::Vector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
    SymMatrix::new(&q * d * q.transpose()).unwrap()
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..C4_DRAWS {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=2);
        let eps = rng.random_range(0.05..1.0);
        let eta = rng.random_range(eps..20.0);
        let x = spd_in(&mut rng, n, eps, eta);
        let w = random_matrix(&mut rng, m, n, 2.0);
        let cand = Candidate::from_learner(&x, &w).unwrap();
        let a = random_matrix(&mut rng, n, n, 1.5);
        let b = random_matrix(&mut rng, n, m, 1.0);
        let da = random_matrix(&mut rng, n, n, 0.5);
        let db = random_matrix(&mut rng, n, m, 0.5);
        let d = (objective(&cand, &(&a + &da), &(&b + &db)).unwrap() - objective(&cand, &a, &b).unwrap()).abs();
        let bound = op_norm(&(&da + &db * &cand.k)).unwrap() / eps;
        if d > bound + C4_SLACK {
            violations += 1;
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(d / bound);
        }
    }
    verdict(
        violations == 0,
        format!("{C4_DRAWS} draws, {violations} violations beyond {C4_SLACK:e}, max |dλ| / bound = {worst_ratio:.4}"),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..C5_PAIRS {
        let n = rng.random_range(1..=8);
        let k = random_matrix(&mut rng, n, n, 3.0);
        let l = random_matrix(&mut rng, n, n, 3.0);
        let k = SymMatrix::new(&k + k.transpose()).unwrap();
        let l = SymMatrix::new(&l + l.transpose()).unwrap();
        let gap = weyl_gap(&k, &l).unwrap();
        let bound = op_norm(l.as_matrix()).unwrap();
        if gap > bound + C5_SLACK {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(gap / bound);
    }
    verdict(
        violations == 0,
        format!("{C5_PAIRS} pairs, {violations} violations beyond {C5_SLACK:e}, max gap / bound = {worst_ratio:.4}"),
    )
}

fn random_interval_spec(rng: &mut ChaCha8Rng) -> ProblemSpec {
    let a_lo = random_matrix(rng, 2, 2, 1.2);
    let a_hi = a_lo.map(|v| v + rng.random_range(0.05..0.4));
    let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let mut spec = ProblemSpec::new(UncertaintySet::interval_fixed_b(a_lo, a_hi, b).unwrap()).with_bounds(1e-2, 1e2);
    spec.seed = rng.random();
    spec.max_iters = 30;
    spec
}

/// Counter-example and hull checks on every iteration of a run.
fn progress_violations(spec: &ProblemSpec, report: &CegisReport) -> (usize, usize) {
    let floor = spec.eps / (spec.eta * spec.eta);
    let items = report.counterexamples.items();
    let mut checked = 0;
    let mut bad = 0;
    for rec in &report.trace {
        let Some(cand) = &rec.candidate else { continue };
        for &h in &rec.hull {
            let (a, b) = &items[h];
            if objective(cand, a, b).unwrap() < floor - C6_HULL_TOL {
                bad += 1;
            }
        }
        if let Some((a, b)) = &rec.counterexample {
            checked += 1;
            let mut before = CounterexampleSet::new(0.0);
            for (x, y) in &items[..rec.samples] {
                before.add(x.clone(), y.clone()).unwrap();
            }
            let value = objective(cand, a, b).unwrap();
            if before.hull_contains(a, b, C6_LP_TOL) || value >= spec.accept_threshold {
                bad += 1;
            }
        }
    }
    (checked, bad)
}

fn criterion_6() -> Verdict {
    let mut specs: Vec<(String, ProblemSpec)> = ["polytopic_4x4.json", "spherical_2x2.json", "scalar_minimal.json"]
        .iter()
        .map(|f| (f.to_string(), load_problem(&example(f)).unwrap()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..8 {
        specs.push((format!("random_{i}"), random_interval_spec(&mut rng)));
    }
    let mut runs = 0;
    let mut counterexamples = 0;
    let mut bad = 0;
    for (_, spec) in &specs {
        let report = run(spec).unwrap();
        runs += 1;
        let (c, b) = progress_violations(spec, &report);
        counterexamples += c;
        bad += b;
    }
    verdict(
        bad == 0 && counterexamples > 0,
        format!(
            "{runs} runs, {counterexamples} counter-examples checked (outside hull by LP, value < threshold), hull vertices >= eps/eta^2 - {C6_HULL_TOL:e}; {bad} violations"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut within = 0;
    let mut negatives = 0;
    let mut missed = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..C7_INSTANCES {
        let (omega, n) = if i % 2 == 0 {
            // One uncertain entry of a 2x2 A.
            let a_lo = random_matrix(&mut rng, 2, 2, 1.0);
            let mut a_hi = a_lo.clone();
            let (r, c) = (rng.random_range(0..2), rng.random_range(0..2));
            a_hi[(r, c)] += rng.random_range(0.2..1.5);
            let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
            (UncertaintySet::interval_fixed_b(a_lo, a_hi, b).unwrap(), 2)
        } else {
            // Scalar system with uncertain a and b.
            let a_lo = rng.random_range(-1.5..1.0);
            let b_lo = rng.random_range(-1.0..1.0);
            let omega = UncertaintySet::interval(
                Matrix::from_element(1, 1, a_lo),
                Matrix::from_element(1, 1, a_lo + rng.random_range(0.2..1.5)),
                Matrix::from_element(1, 1, b_lo),
                Matrix::from_element(1, 1, b_lo + rng.random_range(0.2..1.0)),
            )
            .unwrap();
            (omega, 1)
        };
        let x = spd_in(&mut rng, n, 0.3, 2.0);
        let k = random_matrix(&mut rng, 1, n, 0.8);
        let p = inverse_spd(&x).unwrap();
        let cand = Candidate::new(p.clone(), k).unwrap();
        let eps = 1.0 / op_norm(p.as_matrix()).unwrap();
        let spec = ProblemSpec::new(omega.clone()).with_bounds(eps, eps.max(2.0));
        let ell_ab = lipschitz_budget(&cand, &spec).ell_ab;

        let oracle = grid_oracle(&cand, &omega, C7_RESOLUTION).unwrap();
        let tol = ell_ab * oracle.cell_diameter;
        let full = global_minimize(&cand, &omega, &VerifierBudget::default(), f64::NEG_INFINITY).unwrap();
        let excess = (full.lambda_hat - oracle.value).abs() - tol;
        worst_excess = worst_excess.max(excess);
        if excess <= 0.0 {
            within += 1;
        }
        if oracle.value < 0.0 {
            negatives += 1;
            let r = global_minimize(&cand, &omega, &VerifierBudget::default(), 0.0).unwrap();
            if r.certified || r.lambda_hat >= 0.0 || !omega.contains(&r.minimizer.0, &r.minimizer.1, 1e-9).unwrap() {
                missed += 1;
            }
        }
    }
    verdict(
        within == C7_INSTANCES && missed == 0 && negatives > 0,
        format!(
            "{within}/{C7_INSTANCES} within ell_ab * cell diameter of the grid minimum (resolution {C7_RESOLUTION:e}, worst |gap| - tol = {worst_excess:.3e}); {negatives} oracle-negative instances, {missed} missed"
        ),
    )
}

fn criterion_8() -> Verdict {
    let cli_code = cli(&["synth", path_str(&example("uncontrollable.json")), "--out", path_str(&scratch("c8.json"))]);
    let base = load_problem(&example("uncontrollable.json")).unwrap();
    let mut grid_points = 0;
    let mut grid_ok = 0;
    let mut worst_margin: f64 = 0.0;
    for eps in [1e-3, 1e-2, 1e-1] {
        for eta in [1.0, 10.0, 1e3] {
            grid_points += 1;
            let report = run(&base.clone().with_bounds(eps, eta)).unwrap();
            if report.status == CegisStatus::Infeasible && report.iterations == 1 {
                grid_ok += 1;
            }
            // Scalar instance x⁺ = 2x + 0u: the block [[x, 2x], [2x, x]] has
            // smallest eigenvalue -|x|, so the optimal margin is 0 as x -> 0.
            let scalar = LearnerProblem::new(
                vec![(Matrix::from_element(1, 1, 2.0), Matrix::from_element(1, 1, 0.0))],
                eps,
                eta,
                1e3,
            )
            .solve()
            .unwrap();
            worst_margin = worst_margin.max(scalar.margin.abs());
        }
    }
    verdict(
        cli_code == 1 && grid_ok == grid_points && worst_margin <= C8_MARGIN_TOL,
        format!(
            "synth exit {cli_code}; Infeasible at iteration 1 on {grid_ok}/{grid_points} (eps, eta) points; scalar margin max |t* - 0| = {worst_margin:.3e} (<= {C8_MARGIN_TOL:e})"
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    for (file, seed) in [("spherical_2x2.json", "7"), ("polytopic_4x4.json", "3"), ("scalar_minimal.json", "11")] {
        let out1 = scratch(&format!("c9_{seed}_a.json"));
        let out2 = scratch(&format!("c9_{seed}_b.json"));
        let c1 = cli(&["synth", path_str(&example(file)), "--seed", seed, "--out", path_str(&out1)]);
        let c2 = cli(&["synth", path_str(&example(file)), "--seed", seed, "--out", path_str(&out2)]);
        let r1 = without_timings(&std::fs::read_to_string(&out1).unwrap()).unwrap();
        let r2 = without_timings(&std::fs::read_to_string(&out2).unwrap()).unwrap();
        let same = c1 == c2 && r1 == r2 && r1.contains(&format!("\"seed\":{seed}"));
        pass &= same;
        details.push(format!("{file} seed {seed}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    verdict(pass, details.join("; "))
}

type Check = (u8, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Check; 9] = [
        (1, "4x4 interval synthesis + 65536-vertex certification", criterion_1),
        (2, "reference 4x4 candidate passes vertex certification", criterion_2),
        (3, "spherical synthesis + sampled certification", criterion_3),
        (4, "closed-loop Lipschitz bound", criterion_4),
        (5, "Weyl eigenvalue perturbation bound", criterion_5),
        (6, "counter-example progress invariant", criterion_6),
        (7, "verifier vs grid oracle", criterion_7),
        (8, "infeasibility path", criterion_8),
        (9, "deterministic reports", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} {} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
