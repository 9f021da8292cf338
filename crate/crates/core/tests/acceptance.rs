//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_orbits::action::a_quadratic;
use torus_orbits::hamiltonians::{builtin, generating_map, BuiltinParams, GeneratingFunction, HamiltonianSystem};
use torus_orbits::homology::{invariance_check, morse_complex, MorseComplex, ShootingParams};
use torus_orbits::invariant_counts::{adjudicate, target_polynomial, verify_morse_inequalities, Verdict};
use torus_orbits::loop_space::{j_matrix, FourierLoop};
use torus_orbits::reduction::{default_order, reduced, ReductionContext, CONTRACTION_SLACK};
use torus_orbits::search::{monodromy, multistart_newton, verify_fixed_point, SearchOptions, SearchReport};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn system(name: &str, n: usize, eps: f64) -> HamiltonianSystem {
    builtin(name, n, &BuiltinParams::epsilon(eps)).unwrap()
}

struct Run {
    h: HamiltonianSystem,
    ctx: ReductionContext,
    report: SearchReport,
    verdict: Verdict,
    elapsed: Duration,
}

fn run(name: &str, n: usize, starts: usize) -> Run {
    let t = Instant::now();
    let h = system(name, n, 0.01);
    let ctx = ReductionContext::for_hamiltonian(&h);
    let report = multistart_newton(&ctx, &h, &SearchOptions::new(starts, 0)).unwrap();
    let verdict = adjudicate(&report, ctx.n_plus(), n);
    Run {
        h,
        ctx,
        report,
        verdict,
        elapsed: t.elapsed(),
    }
}

fn product_t2() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run("product_morse", 1, 200))
}

fn perturbed_t2() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run("product_morse_perturbed", 1, 400))
}

fn rotating_t2() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run("rotating_coupling", 1, 200))
}

fn product_t4() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run("product_morse", 2, 2000))
}

fn complexes() -> &'static [(MorseComplex, MorseComplex); 2] {
    static C: OnceLock<[(MorseComplex, MorseComplex); 2]> = OnceLock::new();
    C.get_or_init(|| {
        let p = ShootingParams::default();
        ["product_morse", "product_morse_perturbed"].map(|name| {
            let h = system(name, 1, 1.0);
            (morse_complex(&h, &p).unwrap(), morse_complex(&h, &p.refined()).unwrap())
        })
    })
}

/// Distance on the circle `R/Z`.
fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Roots of `d/dθ (cos 2πθ + 0.3 cos 4πθ)` in `[0, 1)` by sign changes and bisection.
fn perturbed_factor_roots() -> Vec<f64> {
    let f = |t: f64| -2.0 * PI * (2.0 * PI * t).sin() - 0.3 * 4.0 * PI * (4.0 * PI * t).sin();
    let grid = 4000;
    let mut roots = Vec::new();
    for i in 0..grid {
        let (mut a, mut b) = (i as f64 / grid as f64 - 1e-9, (i + 1) as f64 / grid as f64 - 1e-9);
        if f(a) == 0.0 {
            roots.push(a.rem_euclid(1.0));
            continue;
        }
        if f(a).signum() == f(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a).signum() == f(m).signum() { a = m } else { b = m }
        }
        roots.push((0.5 * (a + b)).rem_euclid(1.0));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| circle_dist(*a, *b) < 1e-9);
    roots
}

/// Second derivative sign of the 1D factor at `θ`: maxima have index 1.
fn factor_index(theta: f64, perturbed: bool) -> usize {
    let w = 2.0 * PI;
    let mut f2 = -w * w * (w * theta).cos();
    if perturbed {
        f2 -= 0.3 * 4.0 * w * w * (2.0 * w * theta).cos();
    }
    usize::from(f2 < 0.0)
}

/// Expected `(torus point, spatial index)` list of a product function on `T^{2n}`.
fn product_critical_points(dim: usize, perturbed: bool) -> Vec<(Vec<f64>, usize)> {
    let factors = if perturbed { perturbed_factor_roots() } else { vec![0.0, 0.5] };
    let mut out = vec![(Vec::new(), 0)];
    for axis in 0..dim {
        let use_perturbed = perturbed && axis < 2;
        let roots = if use_perturbed { factors.clone() } else { vec![0.0, 0.5] };
        out = out
            .into_iter()
            .flat_map(|(p, i)| {
                roots.iter().map(move |&r| {
                    let mut q = p.clone();
                    q.push(r);
                    (q, i + factor_index(r, use_perturbed))
                })
            })
            .collect();
    }
    out
}

/// Matches every orbit to an analytic critical point; returns `(max position error, μ table agreement)`.
fn match_orbits(r: &Run, perturbed: bool) -> Result<(f64, usize), String> {
    let n = r.h.half_dim();
    let expected = product_critical_points(2 * n, perturbed);
    ensure(r.report.count() == expected.len(), || {
        format!("{} orbits, {} critical points expected", r.report.count(), expected.len())
    })?;
    let mut used = vec![false; expected.len()];
    let mut worst = 0.0f64;
    let mut agree = 0;
    for o in &r.report.oscillations {
        let (j, err) = expected
            .iter()
            .enumerate()
            .map(|(j, (p, _))| {
                let e = p.iter().zip(&o.torus_rep).map(|(a, b)| circle_dist(*a, *b)).fold(0.0, f64::max);
                (j, e)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        ensure(err < 1e-4 && !used[j], || format!("orbit at {:?} matches no critical point", o.torus_rep))?;
        used[j] = true;
        worst = worst.max(err);
        if o.cz_index == expected[j].1 as i64 - n as i64 {
            agree += 1;
        }
    }
    Ok((worst, agree))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for e in [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-0.28, 0.96]] {
        for k in -3i64..=3 {
            let u = FourierLoop::basis(3, k, &e);
            let a = a_quadratic(&u);
            // trapezoid quadrature of ½⟨-J u̇, u⟩, exact for trigonometric integrands
            let du = u.derivative();
            let m = 64;
            let quad: f64 = (0..m)
                .map(|i| {
                    let s = i as f64 / m as f64;
                    let (x, v) = (u.evaluate(s), du.evaluate(s));
                    0.5 * (-v[1] * x[0] + v[0] * x[1])
                })
                .sum::<f64>()
                / m as f64;
            worst = worst.max((a - PI * k as f64).abs()).max((quad - PI * k as f64).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, || format!("max |a(u_k) - pi k| = {worst:e}"))?;
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("max |a(u_k) - pi k| = {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let p = product_t2();
    let (err, _) = match_orbits(p, false)?;
    ensure(p.report.count() == 4 && p.report.all_nondegenerate(), || {
        format!("product_morse: {} orbits, nondegenerate {}", p.report.count(), p.report.all_nondegenerate())
    })?;
    let v = &p.verdict;
    let betti = v.betti_sum.as_ref().ok_or("Betti-sum bound skipped")?;
    ensure(v.cup_length.bound == 3 && v.cup_length.pass, || format!("cup-length check {:?}", v.cup_length))?;
    ensure(betti.bound == 4 && betti.pass, || format!("Betti-sum check {betti:?}"))?;
    ensure(v.pass, || "verdict fails".into())?;
    let r = rotating_t2();
    let nondeg = r.report.oscillations.iter().filter(|o| o.nondegenerate).count();
    ensure(nondeg >= 4, || format!("rotating_coupling: {nondeg} nondegenerate orbits"))?;
    for (name, run) in [("product_morse", p), ("rotating_coupling", r)] {
        ensure(run.elapsed.as_secs_f64() < 60.0, || format!("{name} took {:.1}s", run.elapsed.as_secs_f64()))?;
    }
    Ok(format!(
        "product_morse 4 >= 3, 4 >= 4 (position error {err:.1e}, {:.1}s); rotating_coupling {nondeg} nondegenerate ({:.1}s)",
        p.elapsed.as_secs_f64(),
        r.elapsed.as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let r = product_t4();
    match_orbits(r, false)?;
    let v = &r.verdict;
    let betti = v.betti_sum.as_ref().ok_or("Betti-sum bound skipped")?;
    ensure(r.report.count() == 16 && r.report.all_nondegenerate(), || format!("{} orbits", r.report.count()))?;
    ensure(v.cup_length.bound == 5 && v.cup_length.pass, || format!("cup-length check {:?}", v.cup_length))?;
    ensure(betti.bound == 16 && betti.pass, || format!("Betti-sum check {betti:?}"))?;
    let secs = r.elapsed.as_secs_f64();
    ensure(secs < 600.0, || format!("took {secs:.0}s"))?;
    Ok(format!("16 >= 5, 16 >= 16 ({secs:.1}s)"))
}

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    for (name, r, perturbed) in [
        ("product_morse T^2", product_t2(), false),
        ("product_morse_perturbed T^2", perturbed_t2(), true),
        ("product_morse T^4", product_t4(), false),
    ] {
        let (_, agree) = match_orbits(r, perturbed)?;
        let total = r.report.count();
        ensure(agree == total, || format!("{name}: {agree}/{total} agree"))?;
        parts.push(format!("{name} {agree}/{total}"));
    }
    Ok(parts.join(", "))
}

fn criterion_5() -> Outcome {
    let n_plus = product_t2().ctx.n_plus();
    let q4 = product_t2().verdict.morse_inequalities.as_ref().ok_or("Morse check skipped")?;
    ensure(q4.pass && q4.q_coeffs.iter().all(|&c| c == 0), || format!("4-point Q = {:?}", q4.q_coeffs))?;
    let q16 = perturbed_t2().verdict.morse_inequalities.as_ref().ok_or("Morse check skipped")?;
    let mut expected = vec![0i64; n_plus];
    expected.extend([3, 3]);
    ensure(q16.pass && q16.q_coeffs == expected, || format!("16-point Q = {:?}", q16.q_coeffs))?;
    for r in [product_t2(), perturbed_t2(), product_t4()] {
        let n = r.h.half_dim();
        let target = target_polynomial(n, r.ctx.n_plus());
        ensure(target.eval(-1) == 0, || format!("chi(T^{}) = {}", 2 * n, target.eval(-1)))?;
        let indices: Vec<usize> = r.report.oscillations.iter().map(|o| o.morse_index_g).collect();
        let q = verify_morse_inequalities(&indices, &target).map_err(|e| e.to_string())?;
        ensure(q.coeffs().iter().all(|&c| c >= 0), || format!("negative Q coefficient {q}"))?;
        let chi: i64 = indices.iter().map(|&m| if m % 2 == 0 { 1 } else { -1 }).sum();
        ensure(chi == 0, || format!("alternating orbit count {chi}"))?;
    }
    Ok(format!("Q = 0 and Q = 3t^{n_plus} + 3t^{}; chi = 0", n_plus + 1))
}

fn criterion_6() -> Outcome {
    let [(perfect, perfect_fine), (perturbed, perturbed_fine)] = complexes();
    for (name, c, fine) in [("perfect", perfect, perfect_fine), ("perturbed", perturbed, perturbed_fine)] {
        ensure(c.boundary_squares_to_zero(), || format!("{name}: d1 d2 != 0"))?;
        let b = c.betti().map_err(|e| e.to_string())?;
        ensure(b == [1, 2, 1], || format!("{name}: Betti {b:?}"))?;
        ensure(c.boundary1 == fine.boundary1 && c.boundary2 == fine.boundary2, || {
            format!("{name}: parity counts change under delta halving")
        })?;
    }
    ensure(perfect.boundary1.is_zero() && perfect.boundary2.is_zero(), || "perfect case has nonzero d".into())?;
    let ranks = [perturbed.boundary1.rank(), perturbed.boundary2.rank()];
    ensure(ranks == [3, 3], || format!("perturbed boundary ranks {ranks:?}"))?;
    let inv = invariance_check(perfect, perturbed);
    ensure(inv.pass, || format!("invariance flags {:?}", inv.flags))?;
    Ok("d^2 = 0, Betti (1,2,1) twice, stable under refinement, invariant".into())
}

/// Random `z` with uniform torus part and oscillating part of `H^{1/2}` norm `fraction·K`.
fn trapped_loop(rng: &mut ChaCha8Rng, ctx: &ReductionContext, n: usize, fraction: f64) -> FourierLoop {
    let n0 = ctx.n0() as i64;
    let mut z = FourierLoop::zeros(n, ctx.n0());
    z.mode_mut(0).iter_mut().for_each(|c| *c = rng.random_range(0.0..1.0));
    let mut osc = FourierLoop::zeros(n, ctx.n0());
    for k in (-n0..=n0).filter(|&k| k != 0) {
        osc.mode_mut(k).iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
    }
    let scale = fraction * ctx.trapping_radius() / osc.norm_half();
    z.add_scaled(scale, &osc)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_res = 0.0f64;
    let mut worst_change = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for (name, n) in [
        ("product_morse", 1),
        ("product_morse_perturbed", 1),
        ("pulsed_morse", 1),
        ("rotating_coupling", 1),
        ("product_morse", 2),
    ] {
        let h = system(name, n, 0.01);
        let ctx = ReductionContext::for_hamiltonian(&h);
        let fine = ReductionContext::new(&h, ctx.n0(), 2 * default_order(ctx.n0())).map_err(|e| e.to_string())?;
        for i in 0..12 {
            let z = trapped_loop(&mut rng, &ctx, n, i as f64 / 11.0);
            let a = reduced(&ctx, &z, &h).map_err(|e| e.to_string())?;
            let b = reduced(&fine, &z, &h).map_err(|e| e.to_string())?;
            let dphi = a.phi.with_order(fine.order()).add_scaled(-1.0, &b.phi);
            let dphi = dphi.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst_res = worst_res.max(a.high_residual);
            worst_change = worst_change.max(dphi).max((a.g_value - b.g_value).abs());
        }
        worst_excess = worst_excess.max(ctx.observed_q() - ctx.theoretical_q() - CONTRACTION_SLACK);
    }
    ensure(worst_res <= 1e-12, || format!("high-mode residual {worst_res:e}"))?;
    ensure(worst_excess <= 0.0, || format!("measured q exceeds bound by {worst_excess:e}"))?;
    ensure(worst_change <= 1e-10, || format!("doubling N changed g or phi by {worst_change:e}"))?;
    Ok(format!("residual {worst_res:.1e}, N-doubling change {worst_change:.1e}"))
}

fn symplectic_defect(psi: &DMatrix<f64>) -> f64 {
    let j = j_matrix(psi.nrows() / 2);
    (psi.transpose() * &j * psi - &j).norm()
}

fn criterion_8() -> Outcome {
    let mut worst_gap = 0.0f64;
    let mut worst_defect = 0.0f64;
    let mut checked = 0;
    for r in [product_t2(), perturbed_t2(), rotating_t2(), product_t4()] {
        for o in &r.report.oscillations {
            let gap = verify_fixed_point(&o.orbit, &r.h).map_err(|e| e.to_string())?;
            let psi = monodromy(&o.orbit, &r.h).map_err(|e| e.to_string())?;
            worst_gap = worst_gap.max(gap);
            worst_defect = worst_defect.max(symplectic_defect(&psi));
            checked += 1;
            if r.h.is_autonomous() {
                let p = o.orbit.evaluate(0.0);
                let eig = r.h.hessian(0.0, &p).symmetric_eigen().eigenvalues;
                let spatial = eig.iter().all(|l| l.abs() > 1e-9 * (1.0 + eig.amax()));
                ensure(spatial == o.nondegenerate, || {
                    format!("orbit at {:?}: det test {} vs spatial Hessian {spatial}", o.torus_rep, o.nondegenerate)
                })?;
            }
        }
    }
    ensure(worst_gap <= 1e-6, || format!("fixed-point gap {worst_gap:e}"))?;
    ensure(worst_defect <= 1e-6, || format!("symplectic defect {worst_defect:e}"))?;
    Ok(format!("{checked} orbits: gap {worst_gap:.1e}, symplectic defect {worst_defect:.1e}"))
}

fn criterion_9() -> Outcome {
    let g = GeneratingFunction::cosine_pair(0.01).map_err(|e| e.to_string())?;
    let map = generating_map(g);
    let fixed = map.fixed_points(16).map_err(|e| e.to_string())?;
    // critical points of cos 2πx + cos 2πY
    let critical = [[0.0, 0.0], [0.0, 0.5], [0.5, 0.0], [0.5, 0.5]];
    ensure(fixed.len() >= 3, || format!("{} fixed points", fixed.len()))?;
    let mut worst_pos = 0.0f64;
    let mut worst_det = 0.0f64;
    for p in &fixed {
        let err = critical
            .iter()
            .map(|c| circle_dist(c[0], p[0]).max(circle_dist(c[1], p[1])))
            .fold(f64::INFINITY, f64::min);
        let j = map.jacobian(*p, 1e-5).map_err(|e| e.to_string())?;
        worst_pos = worst_pos.max(err);
        worst_det = worst_det.max((j[0][0] * j[1][1] - j[0][1] * j[1][0] - 1.0).abs());
    }
    ensure(worst_pos <= 1e-8, || format!("position error {worst_pos:e}"))?;
    ensure(worst_det <= 1e-8, || format!("|det - 1| = {worst_det:e}"))?;
    Ok(format!("{} fixed points, position error {worst_pos:.1e}, |det - 1| {worst_det:.1e}", fixed.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 action anchor", criterion_1),
        ("2 Arnold bounds T^2", criterion_2),
        ("3 Arnold bounds T^4", criterion_3),
        ("4 index relation", criterion_4),
        ("5 Morse inequalities", criterion_5),
        ("6 Floer limit", criterion_6),
        ("7 reduction certificates", criterion_7),
        ("8 cross-validation", criterion_8),
        ("9 generating function", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name:<26} PASS {secs:>7.2}s  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name:<26} FAIL {secs:>7.2}s  {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
