use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `amplitude · τ(t) · cos(2π(⟨m, x⟩ + space_phase))`.
///
/// The time factor `τ` is `cos(2π·time_cos·t)` when `time_cos ≠ 0`,
/// `sin(2π·time_sin·t)` when `time_sin ≠ 0`, and 1 when both are zero.
/// At most one of the two may be nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    #[serde(default)]
    pub time_cos: i64,
    #[serde(default)]
    pub time_sin: i64,
    pub space_modes: Vec<i64>,
    pub amplitude: f64,
    /// Spatial phase in turns.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub space_phase: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl TrigTerm {
    pub fn new(space_modes: Vec<i64>, amplitude: f64) -> Self {
        Self {
            time_cos: 0,
            time_sin: 0,
            space_modes,
            amplitude,
            space_phase: 0.0,
        }
    }

    pub fn with_time_cos(mut self, freq: i64) -> Self {
        self.time_cos = freq;
        self
    }

    pub fn with_time_sin(mut self, freq: i64) -> Self {
        self.time_sin = freq;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.space_phase = phase;
        self
    }

    fn time_factor(&self, t: f64) -> f64 {
        if self.time_sin != 0 {
            (2.0 * PI * self.time_sin as f64 * t).sin()
        } else if self.time_cos != 0 {
            (2.0 * PI * self.time_cos as f64 * t).cos()
        } else {
            1.0
        }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        let dot: f64 = self
            .space_modes
            .iter()
            .zip(x)
            .map(|(&m, &v)| m as f64 * v)
            .sum();
        2.0 * PI * (dot + self.space_phase)
    }

    fn mode_norm_sq(&self) -> f64 {
        self.space_modes.iter().map(|&m| (m * m) as f64).sum()
    }
}

/// A finite trigonometric polynomial on `ℝ × T^{2n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    /// Validates the terms. An empty list is allowed here (the zero
    /// Hamiltonian); user input goes through `from_trig_polynomial`, which
    /// rejects it.
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "phase-space dimension must be even and positive, got {dim}"
            )));
        }
        for (i, term) in terms.iter().enumerate() {
            if term.space_modes.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "term {i}: space_modes has {} entries, expected {dim}",
                    term.space_modes.len()
                )));
            }
            if term.time_cos != 0 && term.time_sin != 0 {
                return Err(Error::InvalidParameter(format!(
                    "term {i}: at most one of time_cos/time_sin may be nonzero"
                )));
            }
            if !term.amplitude.is_finite() || !term.space_phase.is_finite() {
                return Err(Error::InvalidParameter(format!("term {i}: non-finite coefficient")));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.time_cos == 0 && t.time_sin == 0)
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.amplitude * term.time_factor(t) * term.phase(x).cos())
            .sum()
    }

    pub fn gradient_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for term in &self.terms {
            let c = -2.0 * PI * term.amplitude * term.time_factor(t) * term.phase(x).sin();
            if c == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(&term.space_modes) {
                *o += c * m as f64;
            }
        }
    }

    pub fn hessian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for term in &self.terms {
            let c = -4.0 * PI * PI * term.amplitude * term.time_factor(t) * term.phase(x).cos();
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += c * (term.space_modes[i] * term.space_modes[j]) as f64;
                }
            }
        }
        h
    }

    /// Termwise bound `Σ |a|·2π‖m‖ ≥ sup ‖∇H‖`.
    pub fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude.abs() * 2.0 * PI * t.mode_norm_sq().sqrt())
            .sum()
    }

    /// Termwise bound `Σ |a|·4π²‖m‖² ≥ sup ‖Hess H‖_F ≥ Lip(∇H)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude.abs() * 4.0 * PI * PI * t.mode_norm_sq())
            .sum()
    }
}
