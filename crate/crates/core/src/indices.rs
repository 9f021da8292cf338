//! Morse index of the reduced function and the spectral-shift index `μ`.
//!
//! The Morse index counts the unstable directions of the ascending flow
//! `dψ/ds = ∇g`, i.e. the positive eigenvalues of `Hess g`. The `Z⁺` block
//! always contributes `dim Z⁺`, and the constant block contributes the
//! Morse index of `−H` at the autonomous limit, so `μ = m − dim Z⁺ − n`
//! reduces to `ind_h − n` there.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSystem;
use crate::loop_space::FourierLoop;
use crate::reduction::{reduced_hessian, ReductionContext};
use crate::search::ForcedOscillation;

/// Eigenvalues with `|λ|` at or below this are degenerate.
pub const DEGENERACY_TOL: f64 = 1e-7;
/// Central-difference step for `Hess g` in orthonormal coordinates.
pub const HESSIAN_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexRecord {
    pub morse_index_g: usize,
    /// `dim Z⁺ = 2n·n₀`.
    pub n_plus: usize,
    pub half_dim: usize,
    pub mu: i64,
}

impl IndexRecord {
    pub fn new(morse_index_g: usize, n_plus: usize, half_dim: usize) -> Self {
        Self {
            morse_index_g,
            n_plus,
            half_dim,
            mu: cz_index(morse_index_g, n_plus, half_dim),
        }
    }
}

/// `μ = m − dim Z⁺ − n`.
pub fn cz_index(morse_index_g: usize, n_plus: usize, half_dim: usize) -> i64 {
    morse_index_g as i64 - n_plus as i64 - half_dim as i64
}

/// Ascending-flow index from a spectrum: the count of positive eigenvalues.
pub fn index_from_eigenvalues(eigenvalues: &[f64]) -> Result<usize> {
    if let Some(&lam) = eigenvalues.iter().find(|l| l.abs() <= DEGENERACY_TOL) {
        return Err(Error::Degenerate { eigenvalue: lam });
    }
    Ok(eigenvalues.iter().filter(|&&l| l > 0.0).count())
}

pub fn hessian_eigenvalues(hess: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = hess.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Morse index of `g` at a critical point `z*`.
pub fn morse_index_g(ctx: &ReductionContext, z: &FourierLoop, h: &HamiltonianSystem) -> Result<usize> {
    let hess = reduced_hessian(ctx, z, h, HESSIAN_STEP, None)?;
    index_from_eigenvalues(&hessian_eigenvalues(&hess))
}

pub fn index_record(ctx: &ReductionContext, z: &FourierLoop, h: &HamiltonianSystem) -> Result<IndexRecord> {
    Ok(IndexRecord::new(morse_index_g(ctx, z, h)?, ctx.n_plus(), ctx.half_dim()))
}

/// Number of negative eigenvalues of `Hess H(0, p)`.
pub fn spatial_morse_index(h: &HamiltonianSystem, p: &[f64]) -> Result<usize> {
    let eig = hessian_eigenvalues(&h.hessian(0.0, p));
    // the spatial factor is scaled by ε, so degeneracy is judged relative to it
    let scale = eig.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if let Some(&lam) = eig.iter().find(|l| l.abs() <= 1e-9 * scale.max(1e-300)) {
        return Err(Error::Degenerate { eigenvalue: lam });
    }
    Ok(eig.iter().filter(|&&l| l < 0.0).count())
}

#[derive(Clone, Debug)]
pub struct ConsistencyRow {
    pub torus_rep: Vec<f64>,
    pub mu: i64,
    pub spatial_index: usize,
    pub expected_mu: i64,
    pub agrees: bool,
}

#[derive(Clone, Debug)]
pub struct ConsistencyTable {
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyTable {
    pub fn agreements(&self) -> usize {
        self.rows.iter().filter(|r| r.agrees).count()
    }

    pub fn all_agree(&self) -> bool {
        !self.rows.is_empty() && self.agreements() == self.rows.len()
    }

    /// Multiplicities of `μ` from `−n` to `n`.
    pub fn mu_histogram(&self, half_dim: usize) -> Vec<usize> {
        let n = half_dim as i64;
        (-n..=n)
            .map(|m| self.rows.iter().filter(|r| r.mu == m).count())
            .collect()
    }
}

/// Compares `μ` of every oscillation with `ind_h(torus_rep) − n`.
pub fn autonomous_consistency(h: &HamiltonianSystem, oscillations: &[ForcedOscillation]) -> Result<ConsistencyTable> {
    if !h.is_autonomous() {
        return Err(Error::InvalidParameter(
            "autonomous consistency needs a time-independent Hamiltonian".into(),
        ));
    }
    let n = h.half_dim() as i64;
    let rows = oscillations
        .iter()
        .map(|o| {
            let spatial_index = spatial_morse_index(h, &o.torus_rep)?;
            let expected_mu = spatial_index as i64 - n;
            Ok(ConsistencyRow {
                torus_rep: o.torus_rep.clone(),
                mu: o.cz_index,
                spatial_index,
                expected_mu,
                agrees: o.cz_index == expected_mu,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{builtin, BuiltinParams};
    use crate::reduction::reduced;

    fn pm() -> HamiltonianSystem {
        builtin("product_morse", 1, &BuiltinParams::epsilon(0.01)).unwrap()
    }

    #[test]
    fn spectral_shift_relation() {
        assert_eq!(cz_index(2, 2, 1), -1);
        assert_eq!(cz_index(3, 2, 1), 0);
        assert_eq!(cz_index(4, 2, 1), 1);
        let r = IndexRecord::new(6, 4, 2);
        assert_eq!(r.mu, 0);
    }

    #[test]
    fn eigenvalue_counting() {
        assert_eq!(index_from_eigenvalues(&[-1.0, 2.0, 3.0]).unwrap(), 2);
        assert!(matches!(
            index_from_eigenvalues(&[1.0, 5e-8]),
            Err(Error::Degenerate { eigenvalue }) if eigenvalue == 5e-8
        ));
    }

    #[test]
    fn indices_at_critical_constants_of_the_product() {
        let h = pm();
        let ctx = ReductionContext::for_hamiltonian(&h);
        let n_plus = ctx.n_plus();
        // cos 2πθ is maximal at 0 and minimal at ½
        let cases = [([0.5, 0.5], 0usize), ([0.0, 0.5], 1), ([0.5, 0.0], 1), ([0.0, 0.0], 2)];
        for (p, ind_h) in cases {
            let z = FourierLoop::constant(&p, ctx.n0());
            assert!(reduced(&ctx, &z, &h).unwrap().grad_g.norm_half() <= 1e-12);
            let rec = index_record(&ctx, &z, &h).unwrap();
            assert_eq!(rec.morse_index_g, n_plus + ind_h, "at {p:?}");
            assert_eq!(rec.mu, ind_h as i64 - 1);
            assert_eq!(spatial_morse_index(&h, &p).unwrap(), ind_h);
        }
    }

    #[test]
    fn index_shifts_with_n0() {
        let h = pm();
        for n0 in [1usize, 3] {
            let ctx = ReductionContext::new(&h, n0, 16).unwrap();
            let z = FourierLoop::constant(&[0.0, 0.5], n0);
            let rec = index_record(&ctx, &z, &h).unwrap();
            assert_eq!(rec.morse_index_g, 2 * n0 + 1);
            assert_eq!(rec.mu, 0);
        }
    }

    #[test]
    fn zero_hamiltonian_is_degenerate_on_constants() {
        let h = builtin("zero", 1, &BuiltinParams::default()).unwrap();
        let ctx = ReductionContext::for_hamiltonian(&h);
        let z = FourierLoop::constant(&[0.3, 0.3], ctx.n0());
        let hess = reduced_hessian(&ctx, &z, &h, HESSIAN_STEP, None).unwrap();
        let eig = hessian_eigenvalues(&hess);
        // ½‖x⁺‖² − ½‖x⁻‖²: N_plus eigenvalues +1, N_plus eigenvalues −1, 2n zeros
        assert_eq!(eig.iter().filter(|&&l| (l - 1.0).abs() < 1e-8).count(), ctx.n_plus());
        assert_eq!(eig.iter().filter(|&&l| (l + 1.0).abs() < 1e-8).count(), ctx.n_plus());
        assert!(morse_index_g(&ctx, &z, &h).is_err());
    }

    #[test]
    fn linear_quadratic_index_counts_negative_directions_of_s() {
        let cases = [
            (vec![vec![0.1, 0.0], vec![0.0, 0.2]], 0usize),
            (vec![vec![-0.1, 0.0], vec![0.0, 0.2]], 1),
            (vec![vec![-0.1, 0.05], vec![0.05, -0.2]], 2),
        ];
        for (s, neg) in cases {
            let h = builtin("linear_quadratic", 1, &BuiltinParams::matrix(s)).unwrap();
            let ctx = ReductionContext::for_hamiltonian(&h);
            let z = FourierLoop::zeros(1, ctx.n0());
            let rec = index_record(&ctx, &z, &h).unwrap();
            assert_eq!(rec.mu, neg as i64 - 1);
        }
    }
}
