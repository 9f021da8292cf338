//! Saddle-point reduction onto the low modes.
//!
//! Loops split as `x = z + y` with `z ∈ Z` (modes `|k| ≤ n₀`) and `y` in the
//! numerical complement (modes `n₀ < |k| ≤ N`). For fixed `z` the high-mode
//! equation `(1−P)∇f(z + y) = 0` is the fixed point of
//! `y_k ↦ w_k / (2πk)`, `w = ∇H(z + y)`, which contracts with factor at most
//! `Lip(∇H) / (2π(n₀+1))`. Its solution `φ(z)` defines `g(z) = f(z + φ(z))`
//! with `∇g(z) = P∇f(z + φ(z))`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::action::{self, gradient_modes};
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSystem;
use crate::loop_space::{half_weight, inner, FourierLoop};

/// Slack added to the theoretical contraction bound.
pub const CONTRACTION_SLACK: f64 = 0.1;

/// Least `n₀ ≥ 1` with `Lip(∇H) / (2π(n₀+1)) ≤ ½`.
pub fn choose_n0(h: &HamiltonianSystem) -> usize {
    let lip = h.grad_lipschitz();
    let mut n0 = 1usize;
    while lip / (2.0 * PI * (n0 + 1) as f64) > 0.5 {
        n0 += 1;
    }
    n0
}

/// Smallest outer order at which doubling `N` moves `φ` by at most 1e-10
/// everywhere in the trapping ball for the built-in Hamiltonians.
pub const MIN_OUTER_ORDER: usize = 32;

/// Default outer order: `4·n₀`, at least [`MIN_OUTER_ORDER`].
pub fn default_order(n0: usize) -> usize {
    (4 * n0).max(MIN_OUTER_ORDER)
}

/// `K = 2·sup‖∇H‖ + 1`.
pub fn trapping_radius(h: &HamiltonianSystem) -> f64 {
    2.0 * h.grad_bound() + 1.0
}

/// Truncation orders, tolerances and certificates of one reduction.
#[derive(Debug)]
pub struct ReductionContext {
    n0: usize,
    order: usize,
    half_dim: usize,
    tol_phi: f64,
    max_iter: usize,
    lipschitz: f64,
    trapping_radius: f64,
    observed_q: AtomicU64,
}

impl Clone for ReductionContext {
    fn clone(&self) -> Self {
        Self {
            observed_q: AtomicU64::new(self.observed_q.load(Ordering::Relaxed)),
            ..*self
        }
    }
}

impl ReductionContext {
    /// Context with `n₀` from [`choose_n0`] and the default outer order.
    pub fn for_hamiltonian(h: &HamiltonianSystem) -> Self {
        let n0 = choose_n0(h);
        Self::new(h, n0, default_order(n0)).expect("default orders are valid")
    }

    pub fn new(h: &HamiltonianSystem, n0: usize, order: usize) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::InvalidParameter("n0 must be at least 1".into()));
        }
        if order <= n0 {
            return Err(Error::InvalidParameter(format!(
                "outer order {order} must exceed n0 = {n0}"
            )));
        }
        Ok(Self {
            n0,
            order,
            half_dim: h.half_dim(),
            tol_phi: 1e-12,
            max_iter: 500,
            lipschitz: h.grad_lipschitz(),
            trapping_radius: trapping_radius(h),
            observed_q: AtomicU64::new(0f64.to_bits()),
        })
    }

    pub fn with_tolerance(mut self, tol_phi: f64) -> Self {
        self.tol_phi = tol_phi;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn tol_phi(&self) -> f64 {
        self.tol_phi
    }

    pub fn trapping_radius(&self) -> f64 {
        self.trapping_radius
    }

    /// `dim Z = 2n(2n₀+1)`.
    pub fn z_dim(&self) -> usize {
        2 * self.half_dim * (2 * self.n0 + 1)
    }

    /// `dim Z⁺ = 2n·n₀`.
    pub fn n_plus(&self) -> usize {
        2 * self.half_dim * self.n0
    }

    /// `Lip(∇H) / (2π(n₀+1))`.
    pub fn theoretical_q(&self) -> f64 {
        self.lipschitz / (2.0 * PI * (self.n0 + 1) as f64)
    }

    /// Largest contraction ratio observed over all solves so far.
    pub fn observed_q(&self) -> f64 {
        f64::from_bits(self.observed_q.load(Ordering::Relaxed))
    }

    fn record_q(&self, q: f64) {
        let _ = self
            .observed_q
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |bits| {
                (q > f64::from_bits(bits)).then(|| q.to_bits())
            });
    }
}

/// Result of one fiber-map solve.
#[derive(Clone, Debug)]
pub struct PhiSolution {
    /// `φ(z)`, modes in `(n₀, N]`.
    pub phi: FourierLoop,
    /// `‖(1−P)∇f(z + φ)‖_{1/2}`.
    pub residual: f64,
    pub iterations: usize,
    /// Largest successive-update ratio seen in this solve.
    pub contraction: f64,
    /// Rotation coefficients of `∇H(z + φ)` up to order `N`.
    pub gradient_data: FourierLoop,
}

fn high_update(ctx: &ReductionContext, w: &FourierLoop) -> FourierLoop {
    let mut y = FourierLoop::zeros(ctx.half_dim, ctx.order);
    let n = ctx.order as i64;
    for k in -n..=n {
        if k.unsigned_abs() as usize <= ctx.n0 {
            continue;
        }
        let f = 1.0 / (2.0 * PI * k as f64);
        y.mode_mut(k)
            .iter_mut()
            .zip(w.mode(k))
            .for_each(|(a, b)| *a = f * b);
    }
    y
}

/// Solves the high-mode equation for `φ(z)` starting from `y = 0`.
pub fn solve_phi(ctx: &ReductionContext, z: &FourierLoop, h: &HamiltonianSystem) -> Result<PhiSolution> {
    solve_phi_from(ctx, z, h, None)
}

/// As [`solve_phi`], starting the iteration from `warm` when given.
pub fn solve_phi_from(
    ctx: &ReductionContext,
    z: &FourierLoop,
    h: &HamiltonianSystem,
    warm: Option<&FourierLoop>,
) -> Result<PhiSolution> {
    if z.half_dim() != ctx.half_dim {
        return Err(Error::DimensionMismatch {
            expected: 2 * ctx.half_dim,
            got: z.dim(),
        });
    }
    let base = z.band(0, ctx.n0).with_order(ctx.order);
    let mut y = match warm {
        Some(w) => w.with_order(ctx.order).band(ctx.n0 + 1, ctx.order),
        None => FourierLoop::zeros(ctx.half_dim, ctx.order),
    };
    // ratios below this floor are dominated by rounding
    let floor = 1e3 * ctx.tol_phi;
    let mut prev_update = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for it in 0..ctx.max_iter {
        let w = gradient_modes(&base.add_scaled(1.0, &y), h, ctx.order);
        let next = high_update(ctx, &w);
        let update = next.add_scaled(-1.0, &y).norm_half();
        if prev_update.is_finite() && prev_update > floor {
            let ratio = update / prev_update;
            worst_ratio = worst_ratio.max(ratio);
            if ratio >= 1.0 {
                let suggested = (2.0 * ratio * (ctx.n0 + 1) as f64).ceil() as usize;
                return Err(Error::ContractionFailure {
                    ratio,
                    n0: ctx.n0,
                    suggested_n0: suggested.max(ctx.n0 + 1),
                });
            }
        }
        if update <= ctx.tol_phi {
            let bound = ctx.theoretical_q() + CONTRACTION_SLACK;
            if worst_ratio > bound {
                return Err(Error::ContractionCertificate {
                    measured: worst_ratio,
                    bound,
                });
            }
            ctx.record_q(worst_ratio);
            return Ok(PhiSolution {
                phi: y,
                residual: update,
                iterations: it + 1,
                contraction: worst_ratio,
                gradient_data: w,
            });
        }
        prev_update = update;
        y = next;
    }
    Err(Error::IterationCap {
        cap: ctx.max_iter,
        last_update: prev_update,
    })
}

/// `g`, `∇g` and `φ` at one point of `Z`.
#[derive(Clone, Debug)]
pub struct ReducedPoint {
    pub z: FourierLoop,
    pub phi: FourierLoop,
    pub g_value: f64,
    pub grad_g: FourierLoop,
    pub high_residual: f64,
}

impl ReducedPoint {
    /// The full loop `z + φ(z)`.
    pub fn full_loop(&self) -> FourierLoop {
        self.z.add_scaled(1.0, &self.phi)
    }
}

/// `P∇f(z + φ)` from the gradient data of a solve.
fn low_gradient(ctx: &ReductionContext, z: &FourierLoop, w: &FourierLoop) -> FourierLoop {
    let mut g = FourierLoop::zeros(ctx.half_dim, ctx.n0);
    let n = ctx.n0 as i64;
    for k in -n..=n {
        let sign = k.signum() as f64;
        let inv = 1.0 / half_weight(k);
        let zk = z.get(k);
        for (i, out) in g.mode_mut(k).iter_mut().enumerate() {
            let zi = zk.map_or(0.0, |c| c[i]);
            *out = sign * zi - inv * w.mode(k)[i];
        }
    }
    g
}

pub fn reduced(ctx: &ReductionContext, z: &FourierLoop, h: &HamiltonianSystem) -> Result<ReducedPoint> {
    reduced_from(ctx, z, h, None)
}

pub fn reduced_from(
    ctx: &ReductionContext,
    z: &FourierLoop,
    h: &HamiltonianSystem,
    warm: Option<&FourierLoop>,
) -> Result<ReducedPoint> {
    let z = z.band(0, ctx.n0).with_order(ctx.n0);
    let sol = solve_phi_from(ctx, &z, h, warm)?;
    let x = z.with_order(ctx.order).add_scaled(1.0, &sol.phi);
    let g_value = action::a_quadratic(&x) - action::b_integral(&x, h);
    Ok(ReducedPoint {
        grad_g: low_gradient(ctx, &z, &sol.gradient_data),
        g_value,
        high_residual: sol.residual,
        phi: sol.phi,
        z,
    })
}

/// `∇g(z)` and `φ(z)` only (no action value).
pub fn reduced_gradient(
    ctx: &ReductionContext,
    z: &FourierLoop,
    h: &HamiltonianSystem,
    warm: Option<&FourierLoop>,
) -> Result<(FourierLoop, FourierLoop)> {
    let sol = solve_phi_from(ctx, z, h, warm)?;
    Ok((low_gradient(ctx, z, &sol.gradient_data), sol.phi))
}

/// Coordinates on `Z` that are orthonormal for `⟨·,·⟩_{1/2}`:
/// `c = √w_k · z_k`, mode-major as in [`FourierLoop::coeffs`].
pub fn to_coords(z: &FourierLoop) -> DVector<f64> {
    let d = z.dim();
    let n = z.order() as i64;
    DVector::from_iterator(
        z.coeffs().len(),
        z.coeffs()
            .iter()
            .enumerate()
            .map(|(i, v)| v * half_weight(i as i64 / d as i64 - n).sqrt()),
    )
}

pub fn from_coords(half_dim: usize, n0: usize, c: &DVector<f64>) -> FourierLoop {
    let d = 2 * half_dim;
    let n = n0 as i64;
    let coeffs = c
        .iter()
        .enumerate()
        .map(|(i, v)| v / half_weight(i as i64 / d as i64 - n).sqrt())
        .collect();
    FourierLoop::from_coeffs(half_dim, n0, coeffs).expect("coordinate length matches Z")
}

/// `∇g` in orthonormal coordinates; its Euclidean norm is `‖∇g‖_{1/2}`.
pub fn coord_gradient(grad_g: &FourierLoop) -> DVector<f64> {
    // dg·v = Σ w_k ⟨G_k, v_k⟩ = Σ √w_k G_k · dc_k
    to_coords(grad_g)
}

/// Symmetrized central-difference Hessian of `g` in orthonormal coordinates.
pub fn reduced_hessian(
    ctx: &ReductionContext,
    z: &FourierLoop,
    h: &HamiltonianSystem,
    step: f64,
    warm: Option<&FourierLoop>,
) -> Result<DMatrix<f64>> {
    let z = z.band(0, ctx.n0).with_order(ctx.n0);
    let c = to_coords(&z);
    let dim = c.len();
    let mut hess = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut cp = c.clone();
        let mut cm = c.clone();
        cp[j] += step;
        cm[j] -= step;
        let (gp, _) = reduced_gradient(ctx, &from_coords(ctx.half_dim, ctx.n0, &cp), h, warm)?;
        let (gm, _) = reduced_gradient(ctx, &from_coords(ctx.half_dim, ctx.n0, &cm), h, warm)?;
        let col = (coord_gradient(&gp) - coord_gradient(&gm)) / (2.0 * step);
        hess.set_column(j, &col);
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Rates `d/ds ‖ξ⁺‖²` and `d/ds ‖ξ⁻‖²` of the reduced gradient flow
/// `dψ/ds = ∇g(ψ)` at `z`.
pub fn exit_rates(ctx: &ReductionContext, z: &FourierLoop, h: &HamiltonianSystem) -> Result<(f64, f64)> {
    let (grad, _) = reduced_gradient(ctx, &z.band(0, ctx.n0).with_order(ctx.n0), h, None)?;
    let parts = crate::loop_space::split(&grad);
    let zs = crate::loop_space::split(&z.with_order(ctx.n0));
    Ok((
        2.0 * inner(&parts.plus, &zs.plus, 0.5)?,
        2.0 * inner(&parts.minus, &zs.minus, 0.5)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{builtin, from_trig_polynomial, BuiltinParams, TrigTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(name: &str, n: usize) -> HamiltonianSystem {
        builtin(name, n, &BuiltinParams::epsilon(0.01)).unwrap()
    }

    fn random_z(rng: &mut ChaCha8Rng, half_dim: usize, n0: usize, amp: f64) -> FourierLoop {
        let mut z = FourierLoop::zeros(half_dim, n0);
        for (k, _) in z.clone().modes() {
            for v in z.mode_mut(k) {
                *v = if k == 0 {
                    rng.random_range(0.0..1.0)
                } else {
                    rng.random_range(-amp..amp)
                };
            }
        }
        z
    }

    #[test]
    fn choose_n0_examples() {
        let zero = builtin("zero", 1, &BuiltinParams::default()).unwrap();
        assert_eq!(choose_n0(&zero), 1);
        // Lip = 2π: one term a·cos(2π⟨m,x⟩) has Lip bound 4π²|a|‖m‖²
        let two_pi = from_trig_polynomial(1, vec![TrigTerm::new(vec![1, 0], 1.0 / (2.0 * PI))]).unwrap();
        assert!((two_pi.grad_lipschitz() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(choose_n0(&two_pi), 1);
        let forty = from_trig_polynomial(1, vec![TrigTerm::new(vec![1, 0], 40.0 / (4.0 * PI * PI))]).unwrap();
        assert!((forty.grad_lipschitz() - 40.0).abs() < 1e-12);
        assert_eq!(choose_n0(&forty), 12);
    }

    #[test]
    fn zero_hamiltonian_has_trivial_fiber() {
        let h = builtin("zero", 1, &BuiltinParams::default()).unwrap();
        let ctx = ReductionContext::for_hamiltonian(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let z = random_z(&mut rng, 1, ctx.n0(), 0.5);
        let p = reduced(&ctx, &z, &h).unwrap();
        assert!(p.phi.coeffs().iter().all(|&v| v == 0.0));
        assert!((p.g_value - action::a_quadratic(&z)).abs() < 1e-15);
        let expect = crate::loop_space::signed_modes(&z);
        for (a, b) in p.grad_g.coeffs().iter().zip(expect.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(trapping_radius(&h), 1.0);
    }

    #[test]
    fn fiber_vanishes_at_critical_constant() {
        let h = sys("product_morse", 1);
        let ctx = ReductionContext::for_hamiltonian(&h);
        let z = FourierLoop::constant(&[0.5, 0.0], ctx.n0());
        let sol = solve_phi(&ctx, &z, &h).unwrap();
        assert!(sol.phi.coeffs().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn pulsed_fiber_is_certified_and_converged_in_n() {
        let h = sys("pulsed_morse", 1);
        let n0 = choose_n0(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for order in [2 * n0, default_order(n0)] {
            let coarse = ReductionContext::new(&h, n0, order).unwrap();
            let fine = ReductionContext::new(&h, n0, 2 * order).unwrap();
            for _ in 0..10 {
                let z = random_z(&mut rng, 1, n0, 0.05);
                let a = solve_phi(&coarse, &z, &h).unwrap();
                let b = solve_phi(&fine, &z, &h).unwrap();
                assert!(a.residual <= 1e-12 && b.residual <= 1e-12);
                assert!(a.contraction <= 0.5);
                let diff = a.phi.with_order(2 * order).add_scaled(-1.0, &b.phi);
                let worst = diff.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if order == default_order(n0) {
                    assert!(worst < 1e-10, "phi changed by {worst:e}");
                    let ga = reduced(&coarse, &z, &h).unwrap().g_value;
                    let gb = reduced(&fine, &z, &h).unwrap().g_value;
                    assert!((ga - gb).abs() <= 1e-10);
                }
            }
            assert!(coarse.observed_q() <= coarse.theoretical_q() + CONTRACTION_SLACK);
        }
    }

    #[test]
    fn lattice_periodicity() {
        let h = sys("rotating_coupling", 1);
        let ctx = ReductionContext::for_hamiltonian(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..5 {
            let z = random_z(&mut rng, 1, ctx.n0(), 0.2);
            let mut zj = z.clone();
            zj.mode_mut(0)[0] += 3.0;
            zj.mode_mut(0)[1] -= 2.0;
            let a = reduced(&ctx, &z, &h).unwrap();
            let b = reduced(&ctx, &zj, &h).unwrap();
            assert!((a.g_value - b.g_value).abs() <= 1e-12);
            for (p, q) in a.phi.coeffs().iter().zip(b.phi.coeffs()) {
                assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reduced_gradient_matches_finite_differences() {
        let h = builtin("pulsed_morse", 1, &BuiltinParams::epsilon(0.05)).unwrap();
        let ctx = ReductionContext::for_hamiltonian(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..5 {
            let z = random_z(&mut rng, 1, ctx.n0(), 0.2);
            let v = random_z(&mut rng, 1, ctx.n0(), 1.0);
            let p = reduced(&ctx, &z, &h).unwrap();
            let slope = inner(&p.grad_g, &v, 0.5).unwrap();
            let err = |eps: f64| {
                let q = reduced(&ctx, &z.add_scaled(eps, &v), &h).unwrap();
                (q.g_value - p.g_value - eps * slope).abs()
            };
            let (e3, e4) = (err(1e-3), err(1e-4));
            assert!(e4 < e3 / 50.0, "e3 = {e3:e}, e4 = {e4:e}");
        }
    }

    #[test]
    fn critical_point_of_g_is_critical_for_f() {
        let h = sys("product_morse", 1);
        let ctx = ReductionContext::for_hamiltonian(&h);
        let z = FourierLoop::constant(&[0.0, 0.5], ctx.n0());
        let p = reduced(&ctx, &z, &h).unwrap();
        assert!(p.grad_g.norm_half() <= 1e-12);
        let full = action::grad_f(&p.full_loop(), &h);
        assert!(full.norm_half() <= 2.0 * ctx.tol_phi());
    }

    #[test]
    fn trapping_sign_condition() {
        let h = sys("product_morse", 1);
        let ctx = ReductionContext::for_hamiltonian(&h);
        let k = ctx.trapping_radius();
        assert!((k - (2.0 * 0.04 * PI + 1.0)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..100 {
            let mut z = random_z(&mut rng, 1, ctx.n0(), 1.0);
            let plus_norm = crate::loop_space::split(&z).plus.norm_half();
            let scale = 2.0 * k / plus_norm;
            for kk in 1..=ctx.n0() as i64 {
                z.mode_mut(kk).iter_mut().for_each(|v| *v *= scale);
            }
            let (rate_plus, _) = exit_rates(&ctx, &z, &h).unwrap();
            assert!(rate_plus > 0.0);
        }
    }

    #[test]
    fn coordinates_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let z = random_z(&mut rng, 2, 3, 1.0);
        let c = to_coords(&z);
        assert!((c.norm_squared() - z.norm_half().powi(2)).abs() < 1e-12);
        let back = from_coords(2, 3, &c);
        for (a, b) in back.coeffs().iter().zip(z.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn contraction_failure_is_reported() {
        // Hess H ≈ −118·I near the origin, so the update ratio on mode 2 is ≈ 9
        let h = from_trig_polynomial(
            1,
            vec![TrigTerm::new(vec![1, 0], 3.0), TrigTerm::new(vec![0, 1], 3.0)],
        )
        .unwrap();
        let ctx = ReductionContext::new(&h, 1, 8).unwrap();
        // small oscillation about the maximum, where |Hess H| is largest
        let mut z = FourierLoop::constant(&[0.0, 0.0], 1);
        z.mode_mut(1).copy_from_slice(&[0.02, 0.0]);
        let err = solve_phi(&ctx, &z, &h).unwrap_err();
        assert!(
            matches!(err, Error::ContractionFailure { .. } | Error::ContractionCertificate { .. }),
            "{err}"
        );
    }
}
