//! Time-periodic Hamiltonians `H(t, x)` on `ℝ^{2n}` or the torus `T^{2n}`.
//!
//! Every torus-periodic system here is a finite trigonometric polynomial, so
//! values, gradients and Hessians are analytic and the gradient and Lipschitz
//! bounds used by the reduction come from termwise estimates. The only
//! non-periodic system is the constant-coefficient quadratic.

mod generating;
mod trig;

pub use generating::{generating_map, GeneratingFunction, GeneratingMap};
pub use trig::{TrigPolynomial, TrigTerm};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "zero",
    "product_morse",
    "product_morse_perturbed",
    "pulsed_morse",
    "rotating_coupling",
    "linear_quadratic",
];

/// Weight of the `cos 4πθ` harmonic in `product_morse_perturbed`.
pub const PERTURBATION: f64 = 0.3;

#[derive(Clone, Debug)]
enum Model {
    Trig(TrigPolynomial),
    Quadratic(DMatrix<f64>),
}

/// A smooth Hamiltonian, 1-periodic in time.
#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    name: String,
    half_dim: usize,
    model: Model,
    torus_periodic: bool,
    grad_bound: f64,
    grad_lipschitz: f64,
}

/// Parameters for the built-in systems.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltinParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Symmetric matrix `S` for `linear_quadratic`, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl BuiltinParams {
    pub fn epsilon(epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            matrix: None,
        }
    }

    pub fn matrix(rows: Vec<Vec<f64>>) -> Self {
        Self {
            epsilon: None,
            matrix: Some(rows),
        }
    }
}

impl HamiltonianSystem {
    fn from_trig(name: &str, poly: TrigPolynomial) -> Self {
        Self {
            name: name.to_string(),
            half_dim: poly.dim() / 2,
            grad_bound: poly.gradient_bound(),
            grad_lipschitz: poly.lipschitz_bound(),
            model: Model::Trig(poly),
            torus_periodic: true,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn torus_periodic(&self) -> bool {
        self.torus_periodic
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.model {
            Model::Trig(p) => p.is_autonomous(),
            Model::Quadratic(_) => true,
        }
    }

    /// Upper bound for `sup ‖∇H‖` (infinite for the quadratic model).
    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }

    /// Upper bound for the Lipschitz constant of `∇H` in `x`.
    pub fn grad_lipschitz(&self) -> f64 {
        self.grad_lipschitz
    }

    pub fn trig_polynomial(&self) -> Option<&TrigPolynomial> {
        match &self.model {
            Model::Trig(p) => Some(p),
            Model::Quadratic(_) => None,
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        match &self.model {
            Model::Trig(p) => p.value(t, x),
            Model::Quadratic(s) => {
                let d = x.len();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += x[i] * s[(i, j)] * x[j];
                    }
                }
                0.5 * acc
            }
        }
    }

    pub fn gradient_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.model {
            Model::Trig(p) => p.gradient_into(t, x, out),
            Model::Quadratic(s) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..x.len()).map(|j| s[(i, j)] * x[j]).sum();
                }
            }
        }
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(t, x, &mut out);
        out
    }

    pub fn hessian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        match &self.model {
            Model::Trig(p) => p.hessian(t, x),
            Model::Quadratic(s) => s.clone(),
        }
    }

    /// Samples `‖∇H‖` and `‖Hess H‖_F` on a `per_axis^{min(2n,4)}` grid over
    /// the torus (remaining coordinates pinned at a fixed offset, time cycling
    /// through eight phases) and compares the maxima with the stated bounds.
    pub fn certify_bounds(&self, per_axis: usize) -> BoundCertificate {
        let d = self.dim();
        let axes = d.min(4);
        let total = per_axis.pow(axes as u32);
        let mut x = vec![0.37; d];
        let mut g = vec![0.0; d];
        let mut grad_sup = 0.0f64;
        let mut hess_sup = 0.0f64;
        for idx in 0..total {
            let mut rem = idx;
            for xi in x.iter_mut().take(axes) {
                *xi = (rem % per_axis) as f64 / per_axis as f64;
                rem /= per_axis;
            }
            let t = (idx % 8) as f64 / 8.0;
            self.gradient_into(t, &x, &mut g);
            grad_sup = grad_sup.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
            hess_sup = hess_sup.max(self.hessian(t, &x).norm());
        }
        BoundCertificate {
            points: total,
            sampled_grad_sup: grad_sup,
            sampled_hessian_sup: hess_sup,
            grad_bound: self.grad_bound,
            grad_lipschitz: self.grad_lipschitz,
            grad_ok: grad_sup <= self.grad_bound * (1.0 + 1e-12) + 1e-15,
            lipschitz_ok: hess_sup <= self.grad_lipschitz * (1.0 + 1e-12) + 1e-15,
        }
    }
}

/// Outcome of the sampling pass behind `grad_bound` and `grad_lipschitz`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCertificate {
    pub points: usize,
    pub sampled_grad_sup: f64,
    /// Largest sampled Frobenius norm of the Hessian (dominates the operator norm).
    pub sampled_hessian_sup: f64,
    pub grad_bound: f64,
    pub grad_lipschitz: f64,
    pub grad_ok: bool,
    pub lipschitz_ok: bool,
}

fn unit_mode(dim: usize, i: usize, m: i64) -> Vec<i64> {
    let mut v = vec![0; dim];
    v[i] = m;
    v
}

fn positive_epsilon(name: &str, params: &BuiltinParams) -> Result<f64> {
    let eps = params
        .epsilon
        .ok_or_else(|| Error::InvalidParameter(format!("{name} requires epsilon")))?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name}: epsilon must be positive, got {eps}"
        )));
    }
    Ok(eps)
}

/// One of the built-in test systems on `ℝ^{2n}` / `T^{2n}`.
///
/// * `zero`: `H ≡ 0`.
/// * `product_morse(ε)`: `ε Σ_i cos 2πθ_i`.
/// * `product_morse_perturbed(ε)`: as above, with `cos 2πθ + 0.3 cos 4πθ` in
///   the two coordinates of the first pair.
/// * `pulsed_morse(ε)`: `(1 + ½ sin 2πt)·ε Σ_i cos 2πθ_i`.
/// * `rotating_coupling(ε)`: `ε Σ_pairs (cos 2πq cos 2πt + cos 2πp sin 2πt)`.
/// * `linear_quadratic(S)`: `½⟨x, Sx⟩` on `ℝ^{2n}`.
pub fn builtin(name: &str, half_dim: usize, params: &BuiltinParams) -> Result<HamiltonianSystem> {
    if half_dim == 0 {
        return Err(Error::InvalidParameter("half_dim must be at least 1".into()));
    }
    let d = 2 * half_dim;
    let terms = match name {
        "zero" => Vec::new(),
        "product_morse" => {
            let eps = positive_epsilon(name, params)?;
            (0..d).map(|i| TrigTerm::new(unit_mode(d, i, 1), eps)).collect()
        }
        "product_morse_perturbed" => {
            let eps = positive_epsilon(name, params)?;
            let mut terms: Vec<TrigTerm> =
                (0..d).map(|i| TrigTerm::new(unit_mode(d, i, 1), eps)).collect();
            for i in 0..2 {
                terms.push(TrigTerm::new(unit_mode(d, i, 2), PERTURBATION * eps));
            }
            terms
        }
        "pulsed_morse" => {
            let eps = positive_epsilon(name, params)?;
            let mut terms: Vec<TrigTerm> =
                (0..d).map(|i| TrigTerm::new(unit_mode(d, i, 1), eps)).collect();
            terms.extend((0..d).map(|i| TrigTerm::new(unit_mode(d, i, 1), 0.5 * eps).with_time_sin(1)));
            terms
        }
        "rotating_coupling" => {
            let eps = positive_epsilon(name, params)?;
            (0..half_dim)
                .flat_map(|p| {
                    [
                        TrigTerm::new(unit_mode(d, 2 * p, 1), eps).with_time_cos(1),
                        TrigTerm::new(unit_mode(d, 2 * p + 1, 1), eps).with_time_sin(1),
                    ]
                })
                .collect()
        }
        "linear_quadratic" => return linear_quadratic(half_dim, params),
        other => return Err(Error::UnknownHamiltonian(other.to_string())),
    };
    let poly = TrigPolynomial::new(d, terms)?;
    Ok(HamiltonianSystem::from_trig(name, poly))
}

fn linear_quadratic(half_dim: usize, params: &BuiltinParams) -> Result<HamiltonianSystem> {
    let d = 2 * half_dim;
    let rows = params
        .matrix
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("linear_quadratic requires matrix".into()))?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter(format!("linear_quadratic: matrix must be {d}x{d}")));
    }
    let s = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    if (&s - s.transpose()).amax() > 1e-12 * (1.0 + s.amax()) {
        return Err(Error::InvalidParameter("linear_quadratic: matrix must be symmetric".into()));
    }
    let lip = s.clone().symmetric_eigen().eigenvalues.amax();
    Ok(HamiltonianSystem {
        name: "linear_quadratic".into(),
        half_dim,
        model: Model::Quadratic(s),
        torus_periodic: false,
        grad_bound: if lip == 0.0 { 0.0 } else { f64::INFINITY },
        grad_lipschitz: lip,
    })
}

/// A user-supplied trigonometric polynomial Hamiltonian on `T^{2n}`.
pub fn from_trig_polynomial(half_dim: usize, terms: Vec<TrigTerm>) -> Result<HamiltonianSystem> {
    if terms.is_empty() {
        return Err(Error::EmptySpec);
    }
    let poly = TrigPolynomial::new(2 * half_dim, terms)?;
    Ok(HamiltonianSystem::from_trig("trig_polynomial", poly))
}

/// Critical points of the 1D factor `cos 2πθ + 0.3 cos 4πθ`, sorted, in `[0, 1)`.
///
/// The derivative is `-2π sin 2πθ (1 + 1.2 cos 2πθ)`, so the roots are
/// `0`, `½` and the two solutions of `cos 2πθ = -1/1.2`.
pub fn perturbed_factor_critical_points() -> [f64; 4] {
    let c = (-1.0 / (4.0 * PERTURBATION)).acos() / (2.0 * PI);
    let mut r = [0.0, 0.5, c, 1.0 - c];
    r.sort_by(f64::total_cmp);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(half_dim: usize) -> Vec<HamiltonianSystem> {
        let eps = BuiltinParams::epsilon(0.01);
        let mut v: Vec<_> = ["product_morse", "product_morse_perturbed", "pulsed_morse", "rotating_coupling"]
            .iter()
            .map(|n| builtin(n, half_dim, &eps).unwrap())
            .collect();
        v.push(builtin("zero", half_dim, &BuiltinParams::default()).unwrap());
        v
    }

    #[test]
    fn time_and_lattice_periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for h in corpus(2) {
            for _ in 0..50 {
                let t: f64 = rng.random();
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let j: Vec<f64> = (0..4).map(|_| rng.random_range(-3..=3) as f64).collect();
                let xj: Vec<f64> = x.iter().zip(&j).map(|(a, b)| a + b).collect();
                assert!((h.value(t + 1.0, &x) - h.value(t, &x)).abs() <= 1e-12, "{}", h.name());
                assert!((h.value(t, &xj) - h.value(t, &x)).abs() <= 1e-12, "{}", h.name());
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let step = 1e-5;
        let mut systems = corpus(2);
        systems.push(
            builtin(
                "linear_quadratic",
                1,
                &BuiltinParams::matrix(vec![vec![0.3, 0.1], vec![0.1, -0.2]]),
            )
            .unwrap(),
        );
        for h in systems {
            let d = h.dim();
            for _ in 0..20 {
                let t: f64 = rng.random();
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                let g = h.gradient(t, &x);
                let hess = h.hessian(t, &x);
                let scale = 1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let hscale = 1.0 + hess.amax();
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (h.value(t, &xp) - h.value(t, &xm)) / (2.0 * step);
                    assert!((fd - g[i]).abs() <= 1e-6 * scale, "{} grad", h.name());
                    let gp = h.gradient(t, &xp);
                    let gm = h.gradient(t, &xm);
                    for j in 0..d {
                        let fd = (gp[j] - gm[j]) / (2.0 * step);
                        assert!((fd - hess[(j, i)]).abs() <= 1e-6 * hscale, "{} hess", h.name());
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_certified_by_sampling() {
        for h in corpus(1).into_iter().map(|h| (h, 64)).chain(corpus(2).into_iter().map(|h| (h, 20))) {
            let (h, per_axis) = h;
            let cert = h.certify_bounds(per_axis);
            assert!(cert.grad_ok && cert.lipschitz_ok, "{}: {cert:?}", h.name());
        }
        let pm = builtin("product_morse", 1, &BuiltinParams::epsilon(0.01)).unwrap();
        assert!(pm.grad_bound() <= 2.0 * 2.0 * PI * 0.01 + 1e-15);
        assert_eq!(pm.certify_bounds(64).points, 64 * 64);
    }

    #[test]
    fn product_morse_critical_points_on_t2() {
        // enumerate zeros of sin 2πθ₁ and sin 2πθ₂ on a fine grid
        let h = builtin("product_morse", 1, &BuiltinParams::epsilon(0.01)).unwrap();
        let mut found = 0;
        for a in [0.0, 0.5] {
            for b in [0.0, 0.5] {
                let g = h.gradient(0.0, &[a, b]);
                assert!(g.iter().all(|v| v.abs() < 1e-15));
                found += 1;
            }
        }
        assert_eq!(found, 4);
        let g = h.gradient(0.0, &[0.25, 0.0]);
        assert!(g[0].abs() > 1e-3);
    }

    #[test]
    fn perturbed_factor_has_four_roots() {
        let roots = perturbed_factor_critical_points();
        let h = builtin("product_morse_perturbed", 1, &BuiltinParams::epsilon(0.01)).unwrap();
        for &a in &roots {
            for &b in &roots {
                let g = h.gradient(0.0, &[a, b]);
                assert!(g.iter().all(|v| v.abs() < 1e-14), "{a} {b}");
            }
        }
        // sign changes of the derivative on a fine grid: exactly four
        let f = |th: f64| (2.0 * PI * th).sin() * (1.0 + 1.2 * (2.0 * PI * th).cos());
        let n = 10_000;
        let changes = (0..n)
            .filter(|&i| {
                let a = f((i as f64 + 0.5) / n as f64);
                let b = f((i as f64 + 1.5) / n as f64);
                a.signum() != b.signum()
            })
            .count();
        assert_eq!(changes, 4);
    }

    #[test]
    fn trig_spec_reproduces_product_morse() {
        let eps = 0.01;
        let terms = vec![TrigTerm::new(vec![1, 0], eps), TrigTerm::new(vec![0, 1], eps)];
        let user = from_trig_polynomial(1, terms).unwrap();
        let pm = builtin("product_morse", 1, &BuiltinParams::epsilon(eps)).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let x = [i as f64 / 20.0, j as f64 / 20.0];
                assert!((user.value(0.3, &x) - pm.value(0.3, &x)).abs() <= 1e-14);
            }
        }
        assert_eq!(user.grad_bound(), pm.grad_bound());
    }

    #[test]
    fn constant_trig_term() {
        let h = from_trig_polynomial(1, vec![TrigTerm::new(vec![0, 0], 2.5)]).unwrap();
        assert_eq!(h.value(0.2, &[0.3, 0.4]), 2.5);
        assert_eq!(h.gradient(0.2, &[0.3, 0.4]), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(from_trig_polynomial(1, vec![]), Err(Error::EmptySpec)));
        assert!(matches!(
            builtin("nope", 1, &BuiltinParams::default()),
            Err(Error::UnknownHamiltonian(_))
        ));
        assert!(builtin("product_morse", 1, &BuiltinParams::epsilon(0.0)).is_err());
        assert!(builtin("product_morse", 1, &BuiltinParams::epsilon(-1.0)).is_err());
        assert!(builtin("product_morse", 1, &BuiltinParams::default()).is_err());
        assert!(builtin(
            "linear_quadratic",
            1,
            &BuiltinParams::matrix(vec![vec![1.0, 2.0], vec![0.0, 1.0]])
        )
        .is_err());
        let bad_time = TrigTerm::new(vec![1, 0], 1.0).with_time_cos(1).with_time_sin(1);
        assert!(from_trig_polynomial(1, vec![bad_time]).is_err());
    }

    #[test]
    fn pulsed_morse_gradient_vanishes_at_spatial_critical_points() {
        let h = builtin("pulsed_morse", 1, &BuiltinParams::epsilon(0.01)).unwrap();
        assert!(!h.is_autonomous());
        for t in [0.0, 0.3, 0.77] {
            assert!(h.gradient(t, &[0.5, 0.0]).iter().all(|v| v.abs() < 1e-15));
        }
    }
}
