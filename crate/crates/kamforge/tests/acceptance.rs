//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::time::{Duration, Instant};

use kamforge::config::ExperimentConfig;
use kamforge::field::FieldDef;
use kamforge::run::{cover_checks, measure_rows, type_changes};
use kamforge_core::covering::{lift_to_cover, project_point, CoverPoint, CoveringData, DeckMap};
use kamforge_core::diophantine::{half_lattice, DiophantineSpec, ParameterBox};
use kamforge_core::fourier::{to_c, FourierField, C64};
use kamforge_core::homological::{divisor, divisor_bound, solve, NormalLinear};
use kamforge_core::linalg::{self, Tolerances};
use kamforge_core::models::{linspace, response_solve, response_sweep, FloquetKind, ResponseOptions, ResponseProblem};
use kamforge_core::nondegen::{bht_i, Verdict};
use kamforge_core::poly::Poly;
use kamforge_core::presets;
use kamforge_core::revlin::{
    check_membership, gl_dim, jordan_chevalley, lcu, lcu_closed_form, lcu_equivariant, spectrum, splitting_projection,
    ClosedFormKind, Parity, ReversingStructure, StructuredMatrix,
};
use kamforge_core::Error;
use nalgebra::DMatrix;
use rand_core::Rng;
use rand_pcg::Pcg32;
use serde_json::Value;

type Outcome = Result<String, String>;

fn unif(rng: &mut Pcg32) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn complex_structure(p: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(2 * p, 2 * p);
    for b in 0..p {
        c[(2 * b, 2 * b + 1)] = -1.0;
        c[(2 * b + 1, 2 * b)] = 1.0;
    }
    c
}

fn c1() -> Outcome {
    let tol = Tolerances::default();
    let mut seen = Vec::new();
    for p in 1..=3 {
        for (kind, sign) in [
            (ClosedFormKind::PFoldResonance, Parity::Plus),
            (ClosedFormKind::NilpotentZero, Parity::Plus),
            (ClosedFormKind::NilpotentZero, Parity::Minus),
        ] {
            let (closed, s) = lcu_closed_form(kind, p, sign).map_err(|e| e.to_string())?;
            let c = lcu(&closed.base, &s, &tol).map_err(|e| e.to_string())?.codimension();
            ensure(c == p, || format!("{kind:?} {sign:?} p={p}: codimension {c}"))?;
            seen.push(c);
        }
    }
    let s = presets::double_resonance_structure();
    let base = StructuredMatrix::minus(presets::double_resonance_lifted(0.0, 0.0), &s).map_err(|e| e.to_string())?;
    let c = lcu_equivariant(&base, &s, &[complex_structure(2)], &tol).map_err(|e| e.to_string())?.codimension();
    ensure(c == 2, || format!("lifted double resonance: codimension {c}"))?;
    Ok(format!("codimensions {seen:?}, lifted double resonance {c}"))
}

fn random_gl_minus(rng: &mut Pcg32, count: usize) -> Vec<(DMatrix<f64>, ReversingStructure)> {
    (0..count)
        .map(|i| {
            let p = 1 + i % 3;
            let s = if i % 2 == 0 { presets::block_r2(p) } else { presets::nilpotent_structure(p, -1.0) };
            let raw = DMatrix::from_fn(2 * p, 2 * p, |_, _| unif(rng));
            (s.project(&raw, Parity::Minus), s)
        })
        .collect()
}

fn rank_tol() -> Tolerances {
    Tolerances { rank_tol: 1e-9, ..Tolerances::default() }
}

fn c2() -> Outcome {
    let tol = rank_tol();
    let mut rng = Pcg32::new(2024, 2);
    for (i, (m, s)) in random_gl_minus(&mut rng, 200).into_iter().enumerate() {
        let p = s.p();
        let d = gl_dim(p);
        ensure(d == 2 * p * p, || format!("gl- dimension {d} for p={p}"))?;
        let om = StructuredMatrix::minus(m, &s).map_err(|e| e.to_string())?;
        let pi = splitting_projection(&om, &s, &tol).map_err(|e| format!("sample {i}: {e}"))?;
        let id = DMatrix::<f64>::identity(d, d);
        let r_ker = linalg::rank(&pi.matrix, &tol);
        let r_im = linalg::rank(&(&id - &pi.matrix), &tol);
        ensure(r_ker + r_im == 2 * p * p, || format!("sample {i}: ranks {r_ker} + {r_im} != {}", 2 * p * p))?;
        ensure(r_ker == pi.rank, || format!("sample {i}: kernel rank {r_ker} vs {}", pi.rank))?;
        let idem = linalg::max_abs(&(&pi.matrix * &pi.matrix - &pi.matrix));
        ensure(idem < 1e-9, || format!("sample {i}: projection defect {idem:e}"))?;
    }
    Ok("200 samples, p in 1..=3, complements sum to rank 2p^2".into())
}

fn c3() -> Outcome {
    let tol = Tolerances::default();
    let member = Tolerances { membership_tol: 1e-9, ..Tolerances::default() };
    let mut rng = Pcg32::new(2024, 2);
    let mut worst = 0.0f64;
    for (i, (m, s)) in random_gl_minus(&mut rng, 200).into_iter().enumerate() {
        let om = StructuredMatrix::minus(m.clone(), &s).map_err(|e| e.to_string())?;
        let jc = jordan_chevalley(&om, &s, &tol).map_err(|e| format!("sample {i}: {e}"))?;
        let (sm, nm) = (&jc.semisimple.entries, &jc.nilpotent.entries);
        let scale = 1.0 + linalg::norm2(&m);
        let sum = linalg::max_abs(&(sm + nm - &m)) / scale;
        let comm = linalg::max_abs(&(sm * nm - nm * sm)) / (scale * scale);
        let mut pw = nm.clone();
        for _ in 1..m.nrows() {
            pw = &pw * nm;
        }
        let nil = linalg::max_abs(&pw) / scale.powi(m.nrows() as i32);
        let e = sum.max(comm).max(nil);
        worst = worst.max(e);
        ensure(e < 1e-9, || format!("sample {i}: S+N {sum:e}, [S,N] {comm:e}, N^2p {nil:e}"))?;
        let s_in = check_membership(sm, &s, Parity::Minus, &member).map_err(|e| e.to_string())?.member;
        let n_in = nm.norm() == 0.0 || check_membership(nm, &s, Parity::Minus, &member).map_err(|e| e.to_string())?.member;
        ensure(s_in && n_in, || format!("sample {i}: parts leave gl-"))?;
    }
    Ok(format!("200 samples, worst scaled defect {worst:.1e}"))
}

fn match_sets(a: &[C64], b: &[C64]) -> f64 {
    let mut left: Vec<C64> = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = left
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|u, v| u.1.total_cmp(&v.1))
            .expect("same length");
        worst = worst.max(d);
        left.swap_remove(j);
    }
    worst
}

fn c4() -> Outcome {
    let s = presets::double_resonance_structure();
    let mut rng = Pcg32::new(44, 1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let mu1 = 0.5 * unif(&mut rng);
        let mag = 1e-3 + 0.5 * unif(&mut rng).abs();
        let mu2 = if i < 50 { -mag } else { mag };
        let om = StructuredMatrix::minus(presets::double_resonance_omega(mu1, mu2), &s).map_err(|e| e.to_string())?;
        let got = spectrum(&om);
        let w = C64::new(0.0, 1.0 + mu1);
        let root = C64::new(-mu2, 0.0).sqrt();
        let expect = [w + root, w - root, -w + root, -w - root];
        let d = match_sets(&got, &expect);
        worst = worst.max(d);
        ensure(d < 1e-10, || format!("mu = ({mu1}, {mu2}): distance {d:e}"))?;
    }
    Ok(format!("100 samples, worst distance {worst:.1e}"))
}

fn c5() -> Outcome {
    let tol = Tolerances::default();
    let s = presets::planar_structure();
    let mat = |v: [f64; 4]| StructuredMatrix::minus(DMatrix::from_row_slice(2, 2, &v), &s).map_err(|e| e.to_string());
    let table = [
        ([0.0, 1.0, 0.0, 0.0], Verdict::Holds),
        ([0.0, 0.0, 1.0, 0.0], Verdict::Fails),
        ([0.0, 1.0, 3.0, 0.0], Verdict::Holds),
        ([0.0, 0.0, 0.0, 0.0], Verdict::Fails),
        ([0.0, 1e-9, 1.0, 0.0], Verdict::Indeterminate),
    ];
    for (v, want) in table {
        let r = bht_i(&mat(v)?, &s, &tol).map_err(|e| e.to_string())?;
        ensure(r.verdict == want, || format!("{v:?}: {:?}, expected {want:?}", r.verdict))?;
        ensure((r.verdict == Verdict::Holds) == r.witness.is_none(), || format!("{v:?}: witness {:?}", r.witness))?;
    }
    // the condition is open: small perturbations of a holding point keep holding,
    // and the margin moves by at most the perturbation size
    let mut rng = Pcg32::new(5, 5);
    let centre = bht_i(&mat([0.0, 1.0, 0.0, 0.0])?, &s, &tol).map_err(|e| e.to_string())?;
    for eps in [1e-2, 1e-4, 1e-6] {
        for _ in 0..20 {
            let d = s.project(&DMatrix::from_fn(2, 2, |_, _| unif(&mut rng)), Parity::Minus);
            let d = &d * (eps / d.norm().max(f64::MIN_POSITIVE));
            let m = StructuredMatrix::minus(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]) + &d, &s).map_err(|e| e.to_string())?;
            let r = bht_i(&m, &s, &tol).map_err(|e| e.to_string())?;
            ensure(r.verdict == Verdict::Holds, || format!("eps {eps:e}: {:?}", r.verdict))?;
            ensure((r.margin - centre.margin).abs() <= eps * (1.0 + 1e-12), || format!("eps {eps:e}: margin {}", r.margin))?;
        }
    }
    Ok("5-row truth table, 60 perturbations keep Holds with Lipschitz margin".into())
}

fn golden_setup() -> Result<NormalLinear, String> {
    let st = presets::double_resonance_structure();
    let om = StructuredMatrix::minus(presets::double_resonance_omega(0.2, -0.3), &st).map_err(|e| e.to_string())?;
    let base = StructuredMatrix::minus(presets::double_resonance_omega(0.0, 0.0), &st).map_err(|e| e.to_string())?;
    let unf = lcu(&base, &st, &Tolerances::default()).map_err(|e| e.to_string())?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    NormalLinear::new(vec![1.0, phi], om, unf, st).map_err(|e| e.to_string())
}

fn random_reversible(rng: &mut Pcg32, r: &DMatrix<f64>, k_max: usize) -> FourierField {
    let (n, m, p) = (2, 1, 2);
    let mut f = FourierField::zero(n, m, p, k_max);
    for k in half_lattice(n, k_max).into_iter().chain([vec![0; n]]) {
        for b in f.mode_mut(&k).blocks_mut() {
            for v in b.iter_mut() {
                *v = C64::new(unif(rng), unif(rng));
            }
        }
    }
    let f = f.symmetrize_reality();
    let mut rev = f.reversal_image(r).scaled(C64::new(-0.5, 0.0));
    rev.axpy(C64::new(0.5, 0.0), &f).expect("same shape");
    rev
}

fn c6() -> Outcome {
    let tol = Tolerances::default();
    let nx = golden_setup()?;
    let r = nx.structure.r().clone();
    let spec = DiophantineSpec::new(0.01, 1.5, 10);
    let mut rng = Pcg32::new(6, 1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let rhs = random_reversible(&mut rng, &r, 10);
        let s = solve(&nx, &rhs, &spec, &tol).map_err(|e| format!("rhs {i}: {e}"))?;
        let rel = s.residual / rhs.norm(0.0);
        worst = worst.max(rel);
        ensure(rel <= 1e-10, || format!("rhs {i}: relative residual {rel:e}"))?;
    }
    let k = [-21i64, 13];
    let mut rhs = FourierField::zero(2, 1, 2, 40);
    rhs.mode_mut(&k).f[0] = C64::new(1.0, 0.0);
    let d = divisor(nx.pairing(&rhs, &k), &linalg::eigenvalues(&nx.omega.entries));
    let critical = 2.0 * d * 34f64.powf(1.5);
    let above = DiophantineSpec::new(critical * (1.0 + 1e-9), 1.5, 40);
    let below = DiophantineSpec::new(critical * (1.0 - 1e-9), 1.5, 40);
    ensure(d < divisor_bound(&k, &above) && d > divisor_bound(&k, &below), || "bound does not straddle the divisor".into())?;
    match solve(&nx, &rhs, &above, &tol) {
        Err(Error::SmallDivisor { k: at, .. }) => ensure(at == k, || format!("refused at {at:?}"))?,
        other => return Err(format!("gamma above threshold: {other:?}")),
    }
    let s = solve(&nx, &rhs, &below, &tol).map_err(|e| format!("gamma below threshold: {e}"))?;
    ensure(s.min_divisor == d, || format!("min divisor {} vs {d}", s.min_divisor))?;
    Ok(format!("100 rhs, worst relative residual {worst:.1e}; refusal switches at gamma = {critical:.6e} (+-1e-9)"))
}

fn run_fixture(name: &str) -> Result<Value, String> {
    let cfg = ExperimentConfig::load(&fixture(name)).and_then(ExperimentConfig::resolve).map_err(|e| e.to_string())?;
    Ok(kamforge::run(&cfg).map_err(|e| e.to_string())?.result)
}

fn c7() -> Outcome {
    let res = run_fixture("kamstep.json")?;
    let steps = res["steps"].as_array().ok_or("no steps")?;
    let eps: Vec<f64> = steps.iter().filter_map(|s| s["eps"].as_f64()).collect();
    ensure(eps == [1e-2, 3e-3, 1e-3], || format!("eps {eps:?}"))?;
    for s in steps {
        let (b, a) = (s["report"]["before"].as_f64().unwrap_or(f64::NAN), s["report"]["after"].as_f64().unwrap_or(f64::NAN));
        ensure(a < b, || format!("step did not contract: {b:e} -> {a:e}"))?;
    }
    let slope = res["slope"].as_f64().ok_or("no slope")?;
    ensure((1.7..=2.3).contains(&slope), || format!("slope {slope}"))?;
    Ok(format!("log-log slope {slope:.4}"))
}

fn c8() -> Outcome {
    let opts = ResponseOptions::default();
    let w0 = (5f64.sqrt() - 1.0) / 2.0;
    let mut worst = 0.0f64;
    for c in [0.5, 1.0, 1.5] {
        for eps in [1e-3, 1e-2, 1e-1] {
            for dw in [-0.01, 0.0, 0.01] {
                let w = w0 + dw;
                let p = ResponseProblem { omega: w, mu: -c, hbar: Poly::zero(2), forcing: vec![(vec![1, 1], eps)] };
                let s = response_solve(&p, &opts, None).map_err(|e| e.to_string())?;
                let exact = eps / (c - (1.0 + w) * (1.0 + w));
                let err = (s.coefficient(&[1, 1]) - exact).abs();
                worst = worst.max(err);
                ensure(err < 1e-10, || format!("c={c} eps={eps} dw={dw}: error {err:e}"))?;
            }
        }
    }
    let mut hbar = Poly::zero(2);
    hbar.add_term(&[3, 0], -1.0);
    hbar.add_term(&[1, 2], 0.5);
    let cubic = ResponseProblem { omega: w0, mu: 0.0, hbar, forcing: vec![(vec![1, 1], 0.1)] };
    let pts = response_sweep(&cubic, &linspace(-0.5, 0.5, 21), &opts, None).map_err(|e| e.to_string())?;
    ensure(pts.iter().all(|p| p.residual <= opts.tol && p.iterations < opts.max_iter), || "Newton did not converge everywhere".into())?;
    let changes = type_changes(&pts);
    ensure(!changes.is_empty(), || "no Floquet type change".into())?;
    let at = changes[0];
    let (a, b) = (pts[at - 1].kind, pts[at].kind);
    ensure(a == FloquetKind::Elliptic || b == FloquetKind::Elliptic, || format!("{a:?} -> {b:?}"))?;
    Ok(format!(
        "27-point oracle error {worst:.1e}; {a:?} -> {b:?} between mu = {:.2} and {:.2}, converged at 21/21",
        pts[at - 1].mu,
        pts[at].mu
    ))
}

fn fraction(rows: &[kamforge_core::diophantine::SampleResult], gamma: f64) -> f64 {
    rows.iter().filter(|r| r.margin >= gamma).count() as f64 / rows.len() as f64
}

fn c9() -> Outcome {
    let bx = ParameterBox { lower: vec![0.9, 1.5], upper: vec![1.1, 1.7] };
    let spec = |g: f64| DiophantineSpec::new(g, 1.5, 20);
    let seed = 7;
    let samples = 10_000;
    let a = measure_rows(&bx, 2, None, &spec(1e-4), samples, seed).map_err(|e| e.to_string())?;
    let b = measure_rows(&bx, 2, None, &spec(1e-4), samples, seed).map_err(|e| e.to_string())?;
    let fa = fraction(&a, 1e-4);
    ensure(a == b && fa.to_bits() == fraction(&b, 1e-4).to_bits(), || "repeat run differs".into())?;
    // in_gamma agrees with a direct run at each gamma, and fractions do not grow with gamma
    let mut fr = Vec::new();
    for g in [1e-6, 1e-4, 1e-2] {
        let rows = measure_rows(&bx, 2, None, &spec(g), samples, seed).map_err(|e| e.to_string())?;
        let f = rows.iter().filter(|r| r.in_gamma).count() as f64 / samples as f64;
        ensure(f == fraction(&a, g), || format!("gamma {g:e}: direct {f} vs margin {}", fraction(&a, g)))?;
        fr.push(f);
    }
    ensure(fr.windows(2).all(|w| w[0] >= w[1]), || format!("fractions {fr:?}"))?;
    // more divisors checked can only shrink the set
    let deeper = measure_rows(&bx, 2, None, &DiophantineSpec::new(1e-4, 1.5, 40), samples, seed).map_err(|e| e.to_string())?;
    ensure(deeper.iter().zip(&a).all(|(d, s)| !d.in_gamma || s.in_gamma), || "raising k_max added points".into())?;
    // omega -> -omega and coordinate swap leave the margin unchanged
    for r in a.iter().take(2000) {
        let flip: Vec<f64> = r.omega.iter().map(|w| -w).collect();
        let swap = vec![r.omega[1], r.omega[0]];
        for w in [flip, swap] {
            let v = kamforge_core::diophantine::dioph_check(&w, &[], &spec(1e-4)).map_err(|e| e.to_string())?;
            ensure(v.margin == r.margin && v.satisfied == r.in_gamma, || format!("omega {:?}: margin {} vs {}", r.omega, v.margin, r.margin))?;
        }
    }
    Ok(format!("fractions {fr:?} for gamma 1e-6, 1e-4, 1e-2; repeat run bit-identical"))
}

fn c10() -> Outcome {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("fields/double_resonance.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let def = FieldDef::from_value(&v).map_err(|e| e.to_string())?;
    let base = def.full_field().map_err(|e| e.to_string())?;
    let cov = CoveringData::new(2, vec![1, 2], 1, 2);
    let (lift, deck) = lift_to_cover(&base, &cov).map_err(|e| e.to_string())?;
    let checks = cover_checks(&base, &lift, &cov, &deck, 100, 3);
    ensure(checks.deck == 0.0, || format!("Pi o F - Pi = {:e}", checks.deck))?;
    ensure(checks.push_forward <= 1e-12, || format!("push-forward error {:e}", checks.push_forward))?;
    let mut rng = Pcg32::new(10, 3);
    let dk = DeckMap { l: 2, s: cov.deck_matrix(2) };
    for _ in 0..100 {
        let q = CoverPoint {
            sheet: (rng.next_u32() % 2) as i64,
            x: vec![6.0 * unif(&mut rng), 3.0 * unif(&mut rng)],
            y: vec![],
            zeta: (0..4).map(|_| unif(&mut rng)).collect(),
        };
        ensure(project_point(&cov, &dk, &dk.apply(&q)) == project_point(&cov, &dk, &q), || format!("at {q:?}"))?;
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (m1, m2) = (0.3 * unif(&mut rng), 0.3 * unif(&mut rng));
        let mut f = FourierField::zero(2, 0, 2, 0);
        let j = f.mode_mut(&[0, 0]);
        j.f[0] = C64::new(2.0, 0.0);
        j.f[1] = C64::new(1.0 + unif(&mut rng).abs(), 0.0);
        j.h_zeta = to_c(&presets::double_resonance_omega(m1, m2));
        let (l, _) = lift_to_cover(&f, &cov).map_err(|e| e.to_string())?;
        let d = (l.zero_mode().h_zeta.map(|v| v.re) - presets::double_resonance_lifted(m1, m2)).amax();
        worst = worst.max(d);
        ensure(d < 1e-15, || format!("mu = ({m1}, {m2}): lifted matrix off by {d:e}"))?;
    }
    Ok(format!(
        "deck defect 0, push-forward {:.1e} at 100 points x 2 sheets, lifted matrix error {worst:.1e}",
        checks.push_forward
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        ("LCU codimensions", c1, Some(Duration::from_secs(1))),
        ("direct splitting of gl-", c2, Some(Duration::from_secs(10))),
        ("Jordan-Chevalley invariants", c3, None),
        ("double-resonance eigenvalues", c4, None),
        ("BHT(i) truth table and probe", c5, None),
        ("homological equation", c6, None),
        ("quadratic KAM step", c7, Some(Duration::from_secs(30))),
        ("linear response and sweep", c8, None),
        ("Diophantine sets", c9, None),
        ("covering", c10, None),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let out = f();
        let dt = t.elapsed();
        let out = match (out, limit) {
            (Ok(_), Some(l)) if dt > l => Err(format!("took {dt:.2?}, limit {l:?}")),
            (o, _) => o,
        };
        match out {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} ({dt:.2?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} ({dt:.2?})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
