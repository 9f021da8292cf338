//! Loops `S¹ → ℝ^{2n}` in the rotation basis.
//!
//! A loop is stored as `x(t) = Σ_{|k|≤N} e^{2πktJ} x_k` with real coefficient
//! vectors `x_k ∈ ℝ^{2n}`. `J` acts blockwise on the symplectic pairs
//! `(q_i, p_i) = (x_{2i}, x_{2i+1})` by `J(q, p) = (p, -q)`, so that
//! Hamilton's equations read `ẋ = J∇H`.
//!
//! Identifying each pair with `w = q + ip` turns `e^{θJ}` into multiplication
//! by `e^{-iθ}`. Grid transforms use that identification and an ordinary FFT.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Number of grid nodes used whenever a nonlinear function of an order-`order`
/// loop is re-expanded.
pub fn oversampled_len(order: usize) -> usize {
    4 * (order + 1)
}

/// `H^{1/2}` weight of mode `k`: 1 for the constant mode, `2π|k|` otherwise.
pub fn half_weight(k: i64) -> f64 {
    mode_weight(k, 0.5)
}

fn mode_weight(k: i64, s: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (2.0 * PI * k.unsigned_abs() as f64).powf(2.0 * s)
    }
}

/// Apply the standard symplectic matrix to `v` in place.
pub fn apply_j(v: &mut [f64]) {
    for pair in v.chunks_exact_mut(2) {
        let (q, p) = (pair[0], pair[1]);
        pair[0] = p;
        pair[1] = -q;
    }
}

/// Standard symplectic matrix as a dense row-major `2n × 2n` array.
pub fn j_matrix(half_dim: usize) -> nalgebra::DMatrix<f64> {
    let d = 2 * half_dim;
    let mut j = nalgebra::DMatrix::zeros(d, d);
    for i in 0..half_dim {
        j[(2 * i, 2 * i + 1)] = 1.0;
        j[(2 * i + 1, 2 * i)] = -1.0;
    }
    j
}

/// A band-limited loop in `ℝ^{2n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierLoop {
    half_dim: usize,
    order: usize,
    // mode-major: coefficient x_k occupies [(k+N)·2n, (k+N+1)·2n)
    coeffs: Vec<f64>,
}

impl FourierLoop {
    pub fn zeros(half_dim: usize, order: usize) -> Self {
        assert!(half_dim >= 1, "half_dim must be positive");
        Self {
            half_dim,
            order,
            coeffs: vec![0.0; (2 * order + 1) * 2 * half_dim],
        }
    }

    /// Constant loop sitting at `point`.
    pub fn constant(point: &[f64], order: usize) -> Self {
        assert!(point.len().is_multiple_of(2) && !point.is_empty());
        let mut x = Self::zeros(point.len() / 2, order);
        x.mode_mut(0).copy_from_slice(point);
        x
    }

    /// The basis loop `u_k(t) = e^{2πkJt} e`.
    pub fn basis(order: usize, k: i64, e: &[f64]) -> Self {
        assert!(k.unsigned_abs() as usize <= order);
        let mut x = Self::zeros(e.len() / 2, order);
        x.mode_mut(k).copy_from_slice(e);
        x
    }

    pub fn from_coeffs(half_dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = (2 * order + 1) * 2 * half_dim;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            half_dim,
            order,
            coeffs,
        })
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn offset(&self, k: i64) -> usize {
        (k + self.order as i64) as usize * self.dim()
    }

    /// Coefficient `x_k`. Panics when `|k| > order`.
    pub fn mode(&self, k: i64) -> &[f64] {
        assert!(k.unsigned_abs() as usize <= self.order, "mode {k} out of range");
        let o = self.offset(k);
        &self.coeffs[o..o + self.dim()]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut [f64] {
        assert!(k.unsigned_abs() as usize <= self.order, "mode {k} out of range");
        let o = self.offset(k);
        let d = self.dim();
        &mut self.coeffs[o..o + d]
    }

    /// Coefficient `x_k`, or `None` beyond the truncation order.
    pub fn get(&self, k: i64) -> Option<&[f64]> {
        (k.unsigned_abs() as usize <= self.order).then(|| self.mode(k))
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &[f64])> + '_ {
        let n = self.order as i64;
        self.coeffs
            .chunks_exact(self.dim())
            .enumerate()
            .map(move |(i, c)| (i as i64 - n, c))
    }

    /// Same loop at a different truncation order (drops or zero-pads modes).
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = Self::zeros(self.half_dim, order);
        let m = order.min(self.order) as i64;
        for k in -m..=m {
            out.mode_mut(k).copy_from_slice(self.mode(k));
        }
        out
    }

    /// Keeps only the modes with `lo ≤ |k| ≤ hi`.
    pub fn band(&self, lo: usize, hi: usize) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.chunks_exact_mut(2 * self.half_dim).enumerate() {
            let k = (i as i64 - self.order as i64).unsigned_abs() as usize;
            if k < lo || k > hi {
                c.fill(0.0);
            }
        }
        out
    }

    /// Exact time derivative: `(ẋ)_k = 2πk J x_k`.
    pub fn derivative(&self) -> Self {
        let mut out = self.clone();
        let n = self.order as i64;
        for (i, c) in out.coeffs.chunks_exact_mut(2 * self.half_dim).enumerate() {
            let k = i as i64 - n;
            let f = 2.0 * PI * k as f64;
            apply_j(c);
            c.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    pub fn norm(&self, s: f64) -> f64 {
        inner(self, self, s).expect("same loop").max(0.0).sqrt()
    }

    pub fn norm_half(&self) -> f64 {
        self.norm(0.5)
    }

    /// `self + alpha·other`, at the larger of the two orders.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.half_dim, other.half_dim, "half_dim mismatch");
        let mut out = self.with_order(self.order.max(other.order));
        for (k, c) in other.modes() {
            out.mode_mut(k)
                .iter_mut()
                .zip(c)
                .for_each(|(a, b)| *a += alpha * b);
        }
        out
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Evaluate `x(t)`; `t` is reduced mod 1.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        evaluate(self, t)
    }

    /// Samples on the uniform grid `t_m = m/M`, one row of `2n` values per node.
    pub fn sample(&self, samples: usize) -> Result<Vec<f64>> {
        sample(self, samples)
    }
}

/// Pointwise evaluation by direct summation of the rotation series.
pub fn evaluate(x: &FourierLoop, t: f64) -> Vec<f64> {
    let t = t.rem_euclid(1.0);
    let mut out = vec![0.0; x.dim()];
    let mut jx = vec![0.0; x.dim()];
    for (k, c) in x.modes() {
        let theta = 2.0 * PI * k as f64 * t;
        let (s, co) = theta.sin_cos();
        jx.copy_from_slice(c);
        apply_j(&mut jx);
        for i in 0..out.len() {
            out[i] += co * c[i] + s * jx[i];
        }
    }
    out
}

/// Grid samples via one inverse FFT per symplectic pair.
pub fn sample(x: &FourierLoop, samples: usize) -> Result<Vec<f64>> {
    let required = 2 * x.order + 1;
    if samples < required {
        return Err(Error::Aliasing {
            samples,
            order: x.order,
            required,
        });
    }
    let d = x.dim();
    let fft = plan(samples, true);
    let mut out = vec![0.0; samples * d];
    let mut buf = vec![Complex64::new(0.0, 0.0); samples];
    for pair in 0..x.half_dim {
        buf.fill(Complex64::new(0.0, 0.0));
        for (k, c) in x.modes() {
            // e^{2πktJ} ↔ e^{-2πikt}: x_k sits at frequency -k
            let idx = (-k).rem_euclid(samples as i64) as usize;
            buf[idx] += Complex64::new(c[2 * pair], c[2 * pair + 1]);
        }
        fft.process(&mut buf);
        for (m, w) in buf.iter().enumerate() {
            out[m * d + 2 * pair] = w.re;
            out[m * d + 2 * pair + 1] = w.im;
        }
    }
    Ok(out)
}

/// Order-`order` rotation coefficients of uniformly sampled data.
///
/// `samples` holds `M` rows of `dim` values at `t_m = m/M`. Requires
/// `M ≥ 2·order + 2`; the result is exact for data band-limited to `order`.
pub fn analyze(samples: &[f64], dim: usize, order: usize) -> Result<FourierLoop> {
    if dim == 0 || !dim.is_multiple_of(2) || !samples.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim.max(2),
            got: samples.len(),
        });
    }
    let m = samples.len() / dim;
    let required = 2 * order + 2;
    if m < required {
        return Err(Error::Aliasing {
            samples: m,
            order,
            required,
        });
    }
    let fft = plan(m, false);
    let mut out = FourierLoop::zeros(dim / 2, order);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let scale = 1.0 / m as f64;
    for pair in 0..dim / 2 {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(samples[j * dim + 2 * pair], samples[j * dim + 2 * pair + 1]);
        }
        fft.process(&mut buf);
        let n = order as i64;
        for k in -n..=n {
            let idx = (-k).rem_euclid(m as i64) as usize;
            let c = out.mode_mut(k);
            c[2 * pair] = buf[idx].re * scale;
            c[2 * pair + 1] = buf[idx].im * scale;
        }
    }
    Ok(out)
}

/// `⟨x, y⟩_s = ⟨x₀, y₀⟩ + Σ_{k≠0} (2π|k|)^{2s} ⟨x_k, y_k⟩`; missing modes count as zero.
///
/// At `s = ½` this is `⟨x₀, y₀⟩ + 2π Σ |k| ⟨x_k, y_k⟩`, and `s = 0` is the `L²` pairing.
pub fn inner(x: &FourierLoop, y: &FourierLoop, s: f64) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    let m = x.order.min(y.order) as i64;
    let mut acc = 0.0;
    for k in -m..=m {
        let dot: f64 = x.mode(k).iter().zip(y.mode(k)).map(|(a, b)| a * b).sum();
        acc += mode_weight(k, s) * dot;
    }
    Ok(acc)
}

/// `L²` inner product `∫₀¹ ⟨x(t), y(t)⟩ dt = Σ_k ⟨x_k, y_k⟩`.
pub fn inner_l2(x: &FourierLoop, y: &FourierLoop) -> Result<f64> {
    // mode weights are 1 for every k at s = 0
    inner(x, y, 0.0)
}

/// The orthogonal splitting `E = E⁻ ⊕ E⁰ ⊕ E⁺`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitLoop {
    pub minus: FourierLoop,
    pub zero: Vec<f64>,
    pub plus: FourierLoop,
}

impl SplitLoop {
    pub fn recombine(&self) -> FourierLoop {
        let mut out = self.minus.add_scaled(1.0, &self.plus);
        out.mode_mut(0).copy_from_slice(&self.zero);
        out
    }
}

pub fn split(x: &FourierLoop) -> SplitLoop {
    let mut minus = x.clone();
    let mut plus = x.clone();
    let n = x.order as i64;
    for k in -n..=n {
        if k >= 0 {
            minus.mode_mut(k).fill(0.0);
        }
        if k <= 0 {
            plus.mode_mut(k).fill(0.0);
        }
    }
    SplitLoop {
        minus,
        zero: x.mode(0).to_vec(),
        plus,
    }
}

/// `x⁺ − x⁻`, the `H^{1/2}` gradient of `a(x) = ½‖x⁺‖² − ½‖x⁻‖²`.
pub fn signed_modes(x: &FourierLoop) -> FourierLoop {
    let mut out = x.clone();
    let n = x.order as i64;
    for k in -n..=n {
        let sign = k.signum() as f64;
        out.mode_mut(k).iter_mut().for_each(|v| *v *= sign);
    }
    out
}

/// Adjoint of the embedding `H^{1/2} → L²`: `(j*w)₀ = w₀`, `(j*w)_k = w_k / (2π|k|)`.
pub fn jstar(w: &FourierLoop) -> FourierLoop {
    jstar_scaled(w, 1.0)
}

/// `jstar` with the nonconstant modes multiplied by `factor`; the self-test uses
/// `factor ≠ 1` as a fault injection.
pub(crate) fn jstar_scaled(w: &FourierLoop, factor: f64) -> FourierLoop {
    let mut out = w.clone();
    let n = w.order as i64;
    for k in -n..=n {
        if k != 0 {
            let f = factor / half_weight(k);
            out.mode_mut(k).iter_mut().for_each(|v| *v *= f);
        }
    }
    out
}
