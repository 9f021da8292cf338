//! Built-in property checks, runnable from the command line.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::a_quadratic;
use crate::cli::Fault;
use crate::hamiltonians::{builtin, generating_map, BuiltinParams, GeneratingFunction, HamiltonianSystem};
use crate::homology::{morse_complex, ShootingParams};
use crate::indices::autonomous_consistency;
use crate::invariant_counts::{adjudicate, target_polynomial, verify_morse_inequalities};
use crate::loop_space::{analyze, inner, inner_l2, jstar_scaled, FourierLoop};
use crate::reduction::{choose_n0, default_order, reduced, solve_phi, ReductionContext, CONTRACTION_SLACK};
use crate::search::{multistart_newton, SearchOptions, SearchReport};

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

pub struct Summary {
    pub checks: Vec<CheckResult>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<28} {:<4} {:>7.2}s  {}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.seconds,
                c.detail
            );
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn random_loop(rng: &mut ChaCha8Rng, half_dim: usize, order: usize, amp: f64) -> FourierLoop {
    let mut x = FourierLoop::zeros(half_dim, order);
    x.coeffs_mut().iter_mut().for_each(|c| *c = rng.random_range(-amp..amp));
    x
}

fn eps(name: &str, n: usize, e: f64) -> HamiltonianSystem {
    builtin(name, n, &BuiltinParams::epsilon(e)).expect("builtin")
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_loop(&mut rng, 2, 8, 1.0);
        let back = analyze(&x.sample(18).map_err(|e| e.to_string())?, 4, 8).map_err(|e| e.to_string())?;
        let err = back.add_scaled(-1.0, &x).coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(err);
    }
    ensure(worst <= 1e-12, || format!("round-trip error {worst:e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

fn adjoint_identity(fault: Option<Fault>) -> Outcome {
    let factor = if fault == Some(Fault::Jstar) { 1.01 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = random_loop(&mut rng, 1, 6, 1.0);
        let x = random_loop(&mut rng, 1, 6, 1.0);
        let lhs = inner(&jstar_scaled(&w, factor), &x, 0.5).map_err(|e| e.to_string())?;
        let rhs = inner_l2(&w, &x).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    ensure(worst <= 1e-12, || format!("<j*w, x>_1/2 - <w, x>_L2 up to {worst:e}"))?;
    Ok(format!("max defect {worst:.1e}"))
}

fn action_anchor() -> Outcome {
    let e = [0.6, 0.8];
    for k in -3i64..=3 {
        let a = a_quadratic(&FourierLoop::basis(3, k, &e));
        ensure((a - PI * k as f64).abs() <= 1e-12, || format!("a(u_{k}) = {a}"))?;
    }
    Ok("a(u_k) = pi k for |k| <= 3".into())
}

fn contraction_certificates() -> Outcome {
    let h = eps("pulsed_morse", 1, 0.01);
    let n0 = choose_n0(&h);
    let ctx = ReductionContext::for_hamiltonian(&h);
    let fine = ReductionContext::new(&h, n0, 2 * default_order(n0)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_change = 0.0f64;
    for _ in 0..20 {
        let z = random_loop(&mut rng, 1, n0, 0.1);
        let a = solve_phi(&ctx, &z, &h).map_err(|e| e.to_string())?;
        let b = solve_phi(&fine, &z, &h).map_err(|e| e.to_string())?;
        ensure(a.residual <= 1e-12, || format!("residual {:e}", a.residual))?;
        let change = a.phi.with_order(fine.order()).add_scaled(-1.0, &b.phi);
        let dphi = change.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ga = reduced(&ctx, &z, &h).map_err(|e| e.to_string())?.g_value;
        let gb = reduced(&fine, &z, &h).map_err(|e| e.to_string())?.g_value;
        worst_change = worst_change.max(dphi).max((ga - gb).abs());
    }
    let bound = ctx.theoretical_q() + CONTRACTION_SLACK;
    ensure(ctx.observed_q() <= bound, || format!("q = {:e} > {bound:e}", ctx.observed_q()))?;
    ensure(worst_change <= 1e-10, || format!("doubling N changed g or phi by {worst_change:e}"))?;
    Ok(format!("q = {:.3e} <= {bound:.3e}, N-doubling change {worst_change:.1e}", ctx.observed_q()))
}

fn search(h: &HamiltonianSystem, starts: usize) -> std::result::Result<(ReductionContext, SearchReport), String> {
    let ctx = ReductionContext::for_hamiltonian(h);
    let report = multistart_newton(&ctx, h, &SearchOptions::new(starts, 1)).map_err(|e| e.to_string())?;
    Ok((ctx, report))
}

fn certificates(report: &SearchReport, grad_bound: f64) -> std::result::Result<(), String> {
    for o in &report.oscillations {
        ensure(o.grad_norm <= 1e-10, || format!("grad_norm {:e}", o.grad_norm))?;
        ensure(o.ode_residual <= 1e-6 * (1.0 + grad_bound), || format!("ode residual {:e}", o.ode_residual))?;
        ensure(o.fixed_point_gap <= 1e-6, || format!("fixed-point gap {:e}", o.fixed_point_gap))?;
        ensure(o.symplectic_defect <= 1e-6, || format!("symplectic defect {:e}", o.symplectic_defect))?;
    }
    Ok(())
}

fn index_tables() -> Outcome {
    let mut parts = Vec::new();
    for (name, expected_count, expected_q) in [
        ("product_morse", 4usize, vec![]),
        ("product_morse_perturbed", 16, vec![3i64, 3]),
    ] {
        let h = eps(name, 1, 0.01);
        let (ctx, report) = search(&h, 400)?;
        ensure(report.count() == expected_count, || format!("{name}: {} orbits", report.count()))?;
        certificates(&report, h.grad_bound())?;
        let table = autonomous_consistency(&h, &report.oscillations).map_err(|e| e.to_string())?;
        ensure(table.all_agree(), || format!("{name}: {}/{} agreements", table.agreements(), table.rows.len()))?;
        let verdict = adjudicate(&report, ctx.n_plus(), 1);
        ensure(verdict.pass, || format!("{name}: verdict {verdict:?}"))?;
        let q = &verdict.morse_inequalities.as_ref().ok_or("Morse check skipped")?.q_coeffs;
        let mut expect = vec![0i64; if expected_q.is_empty() { 0 } else { ctx.n_plus() }];
        expect.extend(&expected_q);
        ensure(*q == expect, || format!("{name}: Q coefficients {q:?}"))?;
        parts.push(format!("{name} {}/{}", table.agreements(), table.rows.len()));
    }
    Ok(parts.join(", "))
}

fn morse_inequality_algebra() -> Outcome {
    let n = 2;
    let target = target_polynomial(1, n);
    let q = verify_morse_inequalities(&[n, n + 1, n + 1, n + 2], &target).map_err(|e| e.to_string())?;
    ensure(q.is_zero(), || format!("perfect case Q = {q}"))?;
    ensure(verify_morse_inequalities(&[n], &target).is_err(), || "single point accepted".into())?;
    ensure(target_polynomial(2, 0).eval(-1) == 0, || "chi(T^4) != 0".into())?;
    Ok("perfect case Q = 0; negative control rejected".into())
}

fn floer_limit() -> Outcome {
    let params = ShootingParams::default();
    let mut betti = Vec::new();
    for name in ["product_morse", "product_morse_perturbed"] {
        let h = eps(name, 1, 1.0);
        let c = morse_complex(&h, &params).map_err(|e| e.to_string())?;
        ensure(c.boundary_squares_to_zero(), || format!("{name}: d1 d2 != 0"))?;
        let b = c.betti().map_err(|e| e.to_string())?;
        ensure(b == [1, 2, 1], || format!("{name}: Betti {b:?}"))?;
        betti.push(b);
    }
    Ok(format!("Betti {:?} and {:?}", betti[0], betti[1]))
}

fn generating_function() -> Outcome {
    let g = GeneratingFunction::cosine_pair(0.01).map_err(|e| e.to_string())?;
    let map = generating_map(g.clone());
    let fixed = map.fixed_points(16).map_err(|e| e.to_string())?;
    ensure(fixed.len() >= 3, || format!("{} fixed points", fixed.len()))?;
    for p in &fixed {
        let grad = g.gradient(p[0], p[1]);
        ensure(grad[0].hypot(grad[1]) <= 1e-8, || format!("fixed point {p:?} is not critical"))?;
        let j = map.jacobian(*p, 1e-5).map_err(|e| e.to_string())?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        ensure((det - 1.0).abs() <= 1e-8, || format!("det {det}"))?;
    }
    Ok(format!("{} fixed points, all critical", fixed.len()))
}

fn t4_smoke() -> Outcome {
    let h = eps("product_morse", 2, 0.01);
    let (ctx, report) = search(&h, 2000)?;
    ensure(report.count() == 16, || format!("{} orbits", report.count()))?;
    certificates(&report, h.grad_bound())?;
    let table = autonomous_consistency(&h, &report.oscillations).map_err(|e| e.to_string())?;
    let hist = table.mu_histogram(2);
    ensure(table.all_agree() && hist == [1, 4, 6, 4, 1], || format!("mu multiplicities {hist:?}"))?;
    let verdict = adjudicate(&report, ctx.n_plus(), 2);
    ensure(verdict.pass, || format!("verdict {verdict:?}"))?;
    Ok(format!("16 orbits, mu multiplicities {hist:?}"))
}

/// Runs every check; `fault` corrupts one component on purpose.
pub fn run(fault: Option<Fault>) -> Summary {
    let checks: Vec<(&'static str, Box<dyn Fn() -> Outcome>)> = vec![
        ("fft round trip", Box::new(round_trip)),
        ("adjoint identity", Box::new(move || adjoint_identity(fault))),
        ("action of u_k", Box::new(action_anchor)),
        ("contraction certificates", Box::new(contraction_certificates)),
        ("index table (T^2)", Box::new(index_tables)),
        ("morse inequalities", Box::new(morse_inequality_algebra)),
        ("boundary squares to zero", Box::new(floer_limit)),
        ("generating function", Box::new(generating_function)),
        ("T^4 smoke run", Box::new(t4_smoke)),
    ];
    let checks = checks
        .into_iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let (pass, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                pass,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Summary { checks }
}
