//! Area-preserving maps of `T²` defined implicitly by a generating function
//! `G(x, Y)`: `X = x + ∂G/∂Y(x, Y)`, `y = Y + ∂G/∂x(x, Y)`.

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSystem, TrigPolynomial, TrigTerm};

const TOLERANCE: f64 = 1e-12;
const MAX_ITER: usize = 200;
const RELAXATION: f64 = 0.9;

/// `G: T² → ℝ`, stored as an autonomous trigonometric polynomial in `(x, Y)`.
#[derive(Clone, Debug)]
pub struct GeneratingFunction {
    poly: TrigPolynomial,
    scale: f64,
}

impl GeneratingFunction {
    pub fn new(terms: Vec<TrigTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptySpec);
        }
        let poly = TrigPolynomial::new(2, terms)?;
        if !poly.is_autonomous() {
            return Err(Error::InvalidParameter(
                "generating function must not depend on time".into(),
            ));
        }
        // sup |∂²G| bounds the Lipschitz constant of the implicit iteration
        let scale = poly.lipschitz_bound();
        Ok(Self { poly, scale })
    }

    /// `G ≡ 0`.
    pub fn zero() -> Self {
        Self {
            poly: TrigPolynomial::new(2, Vec::new()).expect("valid"),
            scale: 0.0,
        }
    }

    /// `ε (cos 2πx + cos 2πY)`.
    pub fn cosine_pair(eps: f64) -> Result<Self> {
        Self::new(vec![TrigTerm::new(vec![1, 0], eps), TrigTerm::new(vec![0, 1], eps)])
    }

    /// Smallness scale: termwise bound on the second derivatives of `G`.
    pub fn smallness(&self) -> f64 {
        self.scale
    }

    pub fn value(&self, x: f64, big_y: f64) -> f64 {
        self.poly.value(0.0, &[x, big_y])
    }

    pub fn gradient(&self, x: f64, big_y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        self.poly.gradient_into(0.0, &[x, big_y], &mut g);
        g
    }

    /// `G` as an autonomous Hamiltonian on `T²`, for critical-point searches.
    pub fn as_function(&self) -> Result<HamiltonianSystem> {
        if self.poly.terms().is_empty() {
            return crate::hamiltonians::builtin("zero", 1, &Default::default());
        }
        crate::hamiltonians::from_trig_polynomial(1, self.poly.terms().to_vec())
    }
}

/// The symplectic map `(x, y) ↦ (X, Y)` generated by `G`.
#[derive(Clone, Debug)]
pub struct GeneratingMap {
    g: GeneratingFunction,
}

pub fn generating_map(g: GeneratingFunction) -> GeneratingMap {
    GeneratingMap { g }
}

impl GeneratingMap {
    pub fn function(&self) -> &GeneratingFunction {
        &self.g
    }

    /// Solves `y = Y + ∂G/∂x(x, Y)` for `Y` by relaxed fixed-point iteration,
    /// then returns `(x + ∂G/∂Y(x, Y), Y)`.
    pub fn apply(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let [x, y] = p;
        let mut big_y = y;
        let mut prev_step = f64::INFINITY;
        let mut converged = false;
        for it in 0..MAX_ITER {
            let target = y - self.g.gradient(x, big_y)[0];
            let step = RELAXATION * (target - big_y);
            big_y += step;
            let size = step.abs();
            if size <= TOLERANCE {
                converged = true;
                break;
            }
            if it >= 2 && size >= prev_step {
                return Err(Error::GeneratingContraction {
                    ratio: size / prev_step,
                    iterations: it + 1,
                });
            }
            prev_step = size;
        }
        if !converged {
            return Err(Error::GeneratingContraction {
                ratio: f64::NAN,
                iterations: MAX_ITER,
            });
        }
        let big_x = x + self.g.gradient(x, big_y)[1];
        Ok([big_x, big_y])
    }

    /// Displacement `φ(p) − p`, with both components in `(-½, ½]`.
    pub fn displacement(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let q = self.apply(p)?;
        Ok([wrap(q[0] - p[0]), wrap(q[1] - p[1])])
    }

    /// Central-difference Jacobian of the map.
    pub fn jacobian(&self, p: [f64; 2], step: f64) -> Result<[[f64; 2]; 2]> {
        let mut jac = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut a = p;
            let mut b = p;
            a[col] += step;
            b[col] -= step;
            let fa = self.apply(a)?;
            let fb = self.apply(b)?;
            for row in 0..2 {
                jac[row][col] = (fa[row] - fb[row]) / (2.0 * step);
            }
        }
        Ok(jac)
    }

    /// Fixed points mod `ℤ²`, found by Newton on the displacement from a
    /// `per_axis × per_axis` grid and deduplicated at `1e-8`. Sorted.
    pub fn fixed_points(&self, per_axis: usize) -> Result<Vec<[f64; 2]>> {
        let mut found: Vec<[f64; 2]> = Vec::new();
        for i in 0..per_axis {
            for j in 0..per_axis {
                let mut p = [(i as f64 + 0.5) / per_axis as f64, (j as f64 + 0.5) / per_axis as f64];
                let mut ok = false;
                for _ in 0..60 {
                    let d = self.displacement(p)?;
                    if d[0].hypot(d[1]) <= 1e-13 {
                        ok = true;
                        break;
                    }
                    let jac = self.jacobian(p, 1e-6)?;
                    // Jacobian of the displacement is J_φ − I
                    let (a, b, c, e) = (jac[0][0] - 1.0, jac[0][1], jac[1][0], jac[1][1] - 1.0);
                    let det = a * e - b * c;
                    if det.abs() < 1e-14 {
                        break;
                    }
                    let mut dx = -(e * d[0] - b * d[1]) / det;
                    let mut dy = -(-c * d[0] + a * d[1]) / det;
                    let len = dx.hypot(dy);
                    if len > 0.1 {
                        dx *= 0.1 / len;
                        dy *= 0.1 / len;
                    }
                    p = [p[0] + dx, p[1] + dy];
                }
                if !ok {
                    continue;
                }
                let p = [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)];
                if !found.iter().any(|q| torus_dist(*q, p) <= 1e-8) {
                    found.push(p);
                }
            }
        }
        found.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        Ok(found)
    }
}

fn wrap(v: f64) -> f64 {
    v - v.round()
}

fn torus_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}
