//! Multistart Newton search for critical points of the reduced function,
//! with time-domain certificates for every orbit found.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::action;
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSystem;
use crate::indices::{self, hessian_eigenvalues, DEGENERACY_TOL, HESSIAN_STEP};
use crate::loop_space::{apply_j, j_matrix, FourierLoop};
use crate::ode::DormandPrince;
use crate::reduction::{
    coord_gradient, from_coords, reduced, reduced_gradient, reduced_hessian, to_coords, ReductionContext,
};

/// Orbits with `det_gap` at or below this are degenerate.
pub const NONDEGENERACY_TOL: f64 = 1e-8;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
const GD_STEPS: usize = 50;

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub starts: usize,
    pub seed: u64,
    pub newton_tol: f64,
    pub dedup_tol: f64,
    pub max_iter: usize,
    /// Cap on the torus part of one Newton step.
    pub max_step: f64,
}

impl SearchOptions {
    pub fn new(starts: usize, seed: u64) -> Self {
        Self {
            starts,
            seed,
            newton_tol: 1e-10,
            dedup_tol: 1e-6,
            max_iter: 100,
            max_step: 0.25,
        }
    }
}

/// A certified 1-periodic solution.
#[derive(Clone, Debug)]
pub struct ForcedOscillation {
    /// The full loop `z + φ(z)`.
    pub orbit: FourierLoop,
    /// Low-mode part `z`.
    pub z: FourierLoop,
    pub torus_rep: Vec<f64>,
    pub action: f64,
    pub grad_norm: f64,
    pub ode_residual: f64,
    pub fixed_point_gap: f64,
    pub morse_index_g: usize,
    pub cz_index: i64,
    pub monodromy: DMatrix<f64>,
    pub symplectic_defect: f64,
    pub nondegenerate: bool,
    pub det_gap: f64,
    /// Smallest `|λ|` of `Hess g`.
    pub hessian_gap: f64,
}

/// Critical points whose Hessian has a kernel; reported, not enumerated.
#[derive(Clone, Debug)]
pub struct DegenerateFamily {
    /// Distinct degenerate critical points hit by the starts.
    pub points: usize,
    /// Largest kernel dimension seen.
    pub max_nullity: usize,
    pub smallest_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundsMet {
    pub cup_length: bool,
    /// `None` when some critical point is degenerate.
    pub betti_sum: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub oscillations: Vec<ForcedOscillation>,
    pub starts_used: usize,
    pub converged_starts: usize,
    pub failed_starts: usize,
    pub degenerate: Option<DegenerateFamily>,
    pub arnold_degenerate_bound: usize,
    pub arnold_nondegenerate_bound: usize,
    pub bounds_met: BoundsMet,
}

impl SearchReport {
    pub fn count(&self) -> usize {
        self.oscillations.len()
    }

    pub fn all_nondegenerate(&self) -> bool {
        self.degenerate.is_none() && self.oscillations.iter().all(|o| o.nondegenerate)
    }
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut inv = 1.0 / b as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= b as f64;
    }
    out
}

/// Deterministic start points: a shifted Halton sequence on the torus factor
/// and Gaussian coordinates in `Z±` of typical radius `K/2`.
pub fn start_points(ctx: &ReductionContext, h: &HamiltonianSystem, starts: usize, seed: u64) -> Vec<FourierLoop> {
    let d = 2 * ctx.half_dim();
    let mut shift_rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d)
        .map(|_| rand::Rng::random::<f64>(&mut shift_rng))
        .collect();
    let radius = if ctx.trapping_radius().is_finite() {
        0.5 * ctx.trapping_radius()
    } else {
        0.5
    };
    let nonconstant = ctx.z_dim() - d;
    let sigma = radius / (nonconstant.max(1) as f64).sqrt();
    (0..starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut c = DVector::zeros(ctx.z_dim());
            let zero_offset = ctx.n0() * d;
            for (j, v) in c.iter_mut().enumerate() {
                if (zero_offset..zero_offset + d).contains(&j) {
                    let axis = j - zero_offset;
                    let u = radical_inverse(i as u64 + 1, PRIMES[axis % PRIMES.len()]) + shift[axis];
                    *v = if h.torus_periodic() { u.fract() } else { u.fract() - 0.5 };
                } else {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v = sigma * g;
                }
            }
            from_coords(ctx.half_dim(), ctx.n0(), &c)
        })
        .collect()
}

struct Evaluator<'a> {
    ctx: &'a ReductionContext,
    h: &'a HamiltonianSystem,
}

impl Evaluator<'_> {
    fn gradient(&self, c: &DVector<f64>, warm: Option<&FourierLoop>) -> Result<(DVector<f64>, FourierLoop)> {
        let z = from_coords(self.ctx.half_dim(), self.ctx.n0(), c);
        let (g, phi) = reduced_gradient(self.ctx, &z, self.h, warm)?;
        Ok((coord_gradient(&g), phi))
    }

    fn hessian(&self, c: &DVector<f64>, warm: &FourierLoop) -> Result<DMatrix<f64>> {
        let z = from_coords(self.ctx.half_dim(), self.ctx.n0(), c);
        reduced_hessian(self.ctx, &z, self.h, HESSIAN_STEP, Some(warm))
    }
}

/// Indices of the constant-mode coordinates.
fn zero_range(ctx: &ReductionContext) -> std::ops::Range<usize> {
    let d = 2 * ctx.half_dim();
    ctx.n0() * d..(ctx.n0() + 1) * d
}

/// Newton iteration on `∇g` from one start. `Ok(None)` when it does not
/// converge within the iteration cap.
pub fn newton_from(
    ctx: &ReductionContext,
    h: &HamiltonianSystem,
    start: &FourierLoop,
    opts: &SearchOptions,
) -> Result<Option<FourierLoop>> {
    let ev = Evaluator { ctx, h };
    let zr = zero_range(ctx);
    let mut c = to_coords(&start.band(0, ctx.n0()).with_order(ctx.n0()));
    let (mut e, mut phi) = ev.gradient(&c, None)?;
    let mut iter = 0;
    while iter < opts.max_iter {
        let norm = e.norm();
        if norm <= opts.newton_tol {
            return Ok(Some(from_coords(ctx.half_dim(), ctx.n0(), &c)));
        }
        iter += 1;
        let hess = ev.hessian(&c, &phi)?;
        let eig = hess.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|l| l.abs() <= DEGENERACY_TOL) {
            // minimize ½‖∇g‖² with the Jacobian frozen for a few steps at a time
            let mut jac = hess;
            for step in 0..GD_STEPS {
                if step % 10 == 9 {
                    jac = ev.hessian(&c, &phi)?;
                }
                let d = &jac * &e;
                let hd = &jac * &d;
                let denom = hd.norm_squared();
                if denom == 0.0 {
                    break;
                }
                let alpha = e.dot(&hd) / denom;
                let trial = &c - alpha * &d;
                let (e_new, phi_new) = ev.gradient(&trial, Some(&phi))?;
                if e_new.norm() >= e.norm() {
                    break;
                }
                c = trial;
                e = e_new;
                phi = phi_new;
                if e.norm() <= opts.newton_tol {
                    break;
                }
            }
            iter += GD_STEPS / 10;
            continue;
        }
        let mut delta = DVector::zeros(c.len());
        for (lam, v) in eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()) {
            delta -= v * (v.dot(&e) / lam);
        }
        let torus_step = delta.rows(zr.start, zr.len()).norm();
        if torus_step > opts.max_step {
            delta *= opts.max_step / torus_step;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = &c + alpha * &delta;
            let (e_new, phi_new) = ev.gradient(&trial, Some(&phi))?;
            if e_new.norm() < norm * (1.0 - 1e-4 * alpha) || e_new.norm() <= opts.newton_tol {
                accepted = Some((trial, e_new, phi_new));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, e_new, phi_new)) => {
                c = trial;
                e = e_new;
                phi = phi_new;
            }
            // no decrease along the Newton direction: rounding floor reached
            None if norm <= 100.0 * opts.newton_tol => break,
            None => {
                let trial = &c + alpha * &delta;
                let (e_new, phi_new) = ev.gradient(&trial, Some(&phi))?;
                c = trial;
                e = e_new;
                phi = phi_new;
            }
        }
    }
    Ok((e.norm() <= opts.newton_tol).then(|| from_coords(ctx.half_dim(), ctx.n0(), &c)))
}

/// Constant part of `z` reduced mod `ℤ^{2n}` into `[0, 1)` when
/// `H` is torus-periodic. Values within 1e-8 below 1 map to 0.
pub fn torus_rep(z: &FourierLoop, h: &HamiltonianSystem) -> Vec<f64> {
    z.mode(0)
        .iter()
        .map(|&v| {
            if !h.torus_periodic() {
                return v;
            }
            let r = v.rem_euclid(1.0);
            // converged points sit within ~1e-10 of exact ones; keep them off the seam
            if 1.0 - r < 1e-8 { 0.0 } else { r }
        })
        .collect()
}

fn torus_distance(a: &[f64], b: &[f64], periodic: bool) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            if periodic { d - d.round() } else { d }
        })
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

/// Dedup metric: both the torus parts and the nonconstant modes are close.
pub fn same_class(a: &FourierLoop, b: &FourierLoop, h: &HamiltonianSystem, tol: f64) -> bool {
    let n = a.order().max(b.order());
    let diff = a.with_order(n).add_scaled(-1.0, &b.with_order(n)).band(1, n);
    torus_distance(&torus_rep(a, h), &torus_rep(b, h), h.torus_periodic()) <= tol && diff.norm_half() <= tol
}

/// Coordinates closer than this compare equal when ordering the report.
const ORDER_TOL: f64 = 1e-8;

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| if (x - y).abs() <= ORDER_TOL { std::cmp::Ordering::Equal } else { x.total_cmp(y) })
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// `Ψ(1)` for `Ψ' = J·Hess H(t, x(t))·Ψ`, `Ψ(0) = I`.
pub fn monodromy(x: &FourierLoop, h: &HamiltonianSystem) -> Result<DMatrix<f64>> {
    let d = x.dim();
    let jm = j_matrix(x.half_dim());
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let psi = DMatrix::from_column_slice(d, d, y);
        let a = &jm * h.hessian(t, &x.evaluate(t));
        dy.copy_from_slice((a * psi).as_slice());
    };
    let id = DMatrix::<f64>::identity(d, d);
    let out = DormandPrince::default().integrate(rhs, 0.0, id.as_slice(), 1.0)?;
    Ok(DMatrix::from_column_slice(d, d, &out))
}

/// `‖ΨᵀJΨ − J‖` (Frobenius).
pub fn symplectic_defect(psi: &DMatrix<f64>) -> f64 {
    let jm = j_matrix(psi.nrows() / 2);
    (psi.transpose() * &jm * psi - jm).norm()
}

/// `|det(Ψ − I)|`.
pub fn det_gap(psi: &DMatrix<f64>) -> f64 {
    (psi - DMatrix::identity(psi.nrows(), psi.ncols())).determinant().abs()
}

/// `‖φ¹(x(0)) − x(0)‖` by direct integration of `ẋ = J∇H(t, x)`.
pub fn verify_fixed_point(x: &FourierLoop, h: &HamiltonianSystem) -> Result<f64> {
    let x0 = x.evaluate(0.0);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        h.gradient_into(t, y, dy);
        apply_j(dy);
    };
    let x1 = DormandPrince::default().integrate(rhs, 0.0, &x0, 1.0)?;
    Ok(x1.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

enum Classified {
    Orbit(Box<ForcedOscillation>),
    Degenerate { nullity: usize, smallest: f64 },
}

fn classify(ctx: &ReductionContext, h: &HamiltonianSystem, z: &FourierLoop) -> Result<Classified> {
    let point = reduced(ctx, z, h)?;
    let hess = reduced_hessian(ctx, z, h, HESSIAN_STEP, Some(&point.phi))?;
    let eig = hessian_eigenvalues(&hess);
    let smallest = eig.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let morse_index_g = match indices::index_from_eigenvalues(&eig) {
        Ok(m) => m,
        Err(Error::Degenerate { .. }) => {
            let nullity = eig.iter().filter(|l| l.abs() <= DEGENERACY_TOL).count();
            return Ok(Classified::Degenerate { nullity, smallest });
        }
        Err(e) => return Err(e),
    };
    let orbit = point.full_loop();
    let rep = action::report(&orbit, h);
    let psi = monodromy(&orbit, h)?;
    let gap = det_gap(&psi);
    Ok(Classified::Orbit(Box::new(ForcedOscillation {
        torus_rep: torus_rep(z, h),
        action: point.g_value,
        grad_norm: rep.grad_norm_half,
        ode_residual: rep.ode_residual_sup,
        fixed_point_gap: verify_fixed_point(&orbit, h)?,
        morse_index_g,
        cz_index: indices::cz_index(morse_index_g, ctx.n_plus(), ctx.half_dim()),
        symplectic_defect: symplectic_defect(&psi),
        nondegenerate: gap > NONDEGENERACY_TOL,
        det_gap: gap,
        monodromy: psi,
        hessian_gap: smallest,
        z: z.clone(),
        orbit,
    })))
}

/// Runs the multistart search and certifies every distinct critical point.
pub fn multistart_newton(ctx: &ReductionContext, h: &HamiltonianSystem, opts: &SearchOptions) -> Result<SearchReport> {
    if opts.starts == 0 {
        return Err(Error::InvalidParameter("starts must be at least 1".into()));
    }
    let starts = start_points(ctx, h, opts.starts, opts.seed);
    let outcomes: Vec<Result<Option<FourierLoop>>> =
        starts.par_iter().map(|s| newton_from(ctx, h, s, opts)).collect();
    let mut unique: Vec<FourierLoop> = Vec::new();
    let mut converged = 0;
    for outcome in outcomes {
        if let Some(z) = outcome? {
            converged += 1;
            if !unique.iter().any(|u| same_class(u, &z, h, opts.dedup_tol)) {
                unique.push(z);
            }
        }
    }
    let classified: Vec<Result<Classified>> = unique.par_iter().map(|z| classify(ctx, h, z)).collect();
    let mut oscillations = Vec::new();
    let mut degenerate: Option<DegenerateFamily> = None;
    for c in classified {
        match c? {
            Classified::Orbit(o) => oscillations.push(*o),
            Classified::Degenerate { nullity, smallest } => {
                let fam = degenerate.get_or_insert(DegenerateFamily {
                    points: 0,
                    max_nullity: 0,
                    smallest_eigenvalue: f64::INFINITY,
                });
                fam.points += 1;
                fam.max_nullity = fam.max_nullity.max(nullity);
                fam.smallest_eigenvalue = fam.smallest_eigenvalue.min(smallest);
            }
        }
    }
    oscillations.sort_by(|a, b| lexicographic(&a.torus_rep, &b.torus_rep).then(a.action.total_cmp(&b.action)));
    let n = ctx.half_dim();
    let cup = crate::invariant_counts::cup_length_bound(n);
    let betti = 1usize << (2 * n);
    let count = oscillations.len();
    let all_nondegenerate = degenerate.is_none() && oscillations.iter().all(|o| o.nondegenerate);
    let bounds_met = BoundsMet {
        // a degenerate family is a continuum of critical points
        cup_length: degenerate.is_some() || count >= cup,
        betti_sum: all_nondegenerate.then_some(count >= betti),
    };
    Ok(SearchReport {
        starts_used: opts.starts,
        converged_starts: converged,
        failed_starts: opts.starts - converged,
        oscillations,
        degenerate,
        arnold_degenerate_bound: cup,
        arnold_nondegenerate_bound: betti,
        bounds_met,
    })
}
