//! The regularized action `f = a − b` on truncated loops.
//!
//! `b` and `∇b` share the same oversampled quadrature grid, so the discrete
//! gradient is the exact gradient of the discrete functional.

use crate::hamiltonians::HamiltonianSystem;
use crate::loop_space::{self, apply_j, jstar, oversampled_len, signed_modes, split, FourierLoop};

/// Everything known about `f` at one loop.
#[derive(Clone, Debug)]
pub struct ActionReport {
    pub a_value: f64,
    pub b_value: f64,
    pub f_value: f64,
    pub grad: FourierLoop,
    pub grad_norm_half: f64,
    pub ode_residual_sup: f64,
}

/// `a(x) = ½‖x⁺‖² − ½‖x⁻‖²` in `H^{1/2}`.
pub fn a_quadratic(x: &FourierLoop) -> f64 {
    let parts = split(x);
    0.5 * parts.plus.norm_half().powi(2) - 0.5 * parts.minus.norm_half().powi(2)
}

fn grid_samples(x: &FourierLoop) -> (usize, Vec<f64>) {
    let m = oversampled_len(x.order());
    let s = x.sample(m).expect("oversampled grid resolves the loop");
    (m, s)
}

/// `b(x) = ∫₀¹ H(t, x(t)) dt` by the trapezoidal rule on `4(N+1)` nodes.
pub fn b_integral(x: &FourierLoop, h: &HamiltonianSystem) -> f64 {
    let (m, s) = grid_samples(x);
    let d = x.dim();
    let sum: f64 = s
        .chunks_exact(d)
        .enumerate()
        .map(|(j, p)| h.value(j as f64 / m as f64, p))
        .sum();
    sum / m as f64
}

/// Rotation coefficients up to `order` of `t ↦ ∇H(t, x(t))`, from samples on
/// the oversampled grid of `x`.
pub fn gradient_modes(x: &FourierLoop, h: &HamiltonianSystem, order: usize) -> FourierLoop {
    let (m, mut s) = grid_samples(x);
    let d = x.dim();
    let mut point = vec![0.0; d];
    for (j, row) in s.chunks_exact_mut(d).enumerate() {
        point.copy_from_slice(row);
        h.gradient_into(j as f64 / m as f64, &point, row);
    }
    let order = order.min(m / 2 - 1);
    loop_space::analyze(&s, d, order).expect("grid is oversampled")
}

/// `∇b(x) = j*∇H(x)`.
pub fn grad_b(x: &FourierLoop, h: &HamiltonianSystem) -> FourierLoop {
    jstar(&gradient_modes(x, h, x.order()))
}

/// `∇f(x) = x⁺ − x⁻ − j*∇H(x)`.
pub fn grad_f(x: &FourierLoop, h: &HamiltonianSystem) -> FourierLoop {
    signed_modes(x).add_scaled(-1.0, &grad_b(x, h))
}

/// `sup_t ‖ẋ(t) − J∇H(t, x(t))‖` over the oversampled grid.
pub fn ode_residual(x: &FourierLoop, h: &HamiltonianSystem) -> f64 {
    let (m, s) = grid_samples(x);
    let ds = x.derivative().sample(m).expect("same grid");
    let d = x.dim();
    let mut g = vec![0.0; d];
    let mut worst = 0.0f64;
    for j in 0..m {
        let p = &s[j * d..(j + 1) * d];
        h.gradient_into(j as f64 / m as f64, p, &mut g);
        apply_j(&mut g);
        let r: f64 = ds[j * d..(j + 1) * d]
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
    }
    worst
}

pub fn report(x: &FourierLoop, h: &HamiltonianSystem) -> ActionReport {
    let a_value = a_quadratic(x);
    let b_value = b_integral(x, h);
    let grad = grad_f(x, h);
    ActionReport {
        a_value,
        b_value,
        f_value: a_value - b_value,
        grad_norm_half: grad.norm_half(),
        grad,
        ode_residual_sup: ode_residual(x, h),
    }
}
