//! Morse–Smale complexes of functions on `T²` over `ℤ₂`.
//!
//! Generators are the critical points graded by Morse index. `∂` counts
//! gradient flowlines of `dγ/ds = −∇h` mod 2; each index-1 point has a
//! one-dimensional unstable and stable manifold, so two shots per direction
//! find every connection.

mod gf2;

pub use gf2::Gf2Matrix;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSystem;
use crate::ode::DormandPrince;

/// Eigenvalues with `|λ|` at or below this make a critical point degenerate.
pub const MORSE_TOL: f64 = 1e-7;
/// Newton starts per axis.
pub const GRID_PER_AXIS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Generator {
    pub point: [f64; 2],
    pub index: usize,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: [f64; 2],
    /// Unit eigenvectors matching `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug)]
pub struct ShootingParams {
    /// Offset from the saddle along the eigenvector.
    pub delta: f64,
    /// Integrator tolerance.
    pub tolerance: f64,
    pub landing_radius: f64,
    /// Further steps of non-increasing distance required to confirm a landing.
    pub confirm_steps: usize,
}

impl Default for ShootingParams {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            tolerance: 1e-10,
            landing_radius: 1e-6,
            confirm_steps: 10,
        }
    }
}

impl ShootingParams {
    /// Half the offset and a hundredfold tighter integrator.
    pub fn refined(&self) -> Self {
        Self {
            delta: 0.5 * self.delta,
            tolerance: 1e-2 * self.tolerance,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Descending from the saddle along `+v_unstable`.
    DownPlus,
    DownMinus,
    /// Ascending from the saddle along `+v_stable`.
    UpPlus,
    UpMinus,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Self::DownPlus => "down+",
            Self::DownMinus => "down-",
            Self::UpPlus => "up+",
            Self::UpMinus => "up-",
        }
    }

    fn descending(self) -> bool {
        matches!(self, Self::DownPlus | Self::DownMinus)
    }
}

/// One connecting trajectory from a saddle.
#[derive(Clone, Debug)]
pub struct Flowline {
    /// Position of the saddle among the index-1 generators.
    pub saddle: usize,
    pub branch: Branch,
    /// Generator index (into the full generator list) where the shot landed.
    pub target: usize,
    /// `(s, x, y)` at every accepted step, unwrapped.
    pub samples: Vec<[f64; 3]>,
}

/// `ℤ₂` chain complex `C₂ → C₁ → C₀`.
#[derive(Clone, Debug)]
pub struct MorseComplex {
    /// Sorted by index, then by position.
    pub generators: Vec<Generator>,
    /// `C₁ → C₀`: rows index-0 generators, columns index-1 generators.
    pub boundary1: Gf2Matrix,
    /// `C₂ → C₁`: rows index-1 generators, columns index-2 generators.
    pub boundary2: Gf2Matrix,
    pub flowlines: Vec<Flowline>,
}

fn wrap(v: f64) -> f64 {
    v - v.round()
}

fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

fn gradient(h: &HamiltonianSystem, p: [f64; 2]) -> [f64; 2] {
    let mut g = [0.0; 2];
    h.gradient_into(0.0, &p, &mut g);
    g
}

fn hessian(h: &HamiltonianSystem, p: [f64; 2]) -> Matrix2<f64> {
    let m = h.hessian(0.0, &p);
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn check_surface(h: &HamiltonianSystem) -> Result<()> {
    if h.half_dim() != 1 || !h.torus_periodic() || !h.is_autonomous() {
        return Err(Error::InvalidParameter(
            "Morse complexes need an autonomous, periodic function on T²".into(),
        ));
    }
    Ok(())
}

fn newton_critical(h: &HamiltonianSystem, mut p: [f64; 2], scale: f64) -> Option<[f64; 2]> {
    for _ in 0..50 {
        let g = gradient(h, p);
        if g[0].hypot(g[1]) <= 1e-13 * scale {
            return Some([p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]);
        }
        let inv = hessian(h, p).try_inverse()?;
        let step = inv * nalgebra::Vector2::new(g[0], g[1]);
        let len = step.norm();
        let s = if len > 0.1 { 0.1 / len } else { 1.0 };
        p = [p[0] - s * step[0], p[1] - s * step[1]];
    }
    None
}

fn generator_at(h: &HamiltonianSystem, p: [f64; 2]) -> Result<Generator> {
    let eig = hessian(h, p).symmetric_eigen();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]];
    if let Some(&lam) = eigenvalues.iter().find(|l| l.abs() <= MORSE_TOL) {
        return Err(Error::NotMorse { point: p, eigenvalue: lam });
    }
    let v = |i: usize| {
        let c = eig.eigenvectors.column(order[i]);
        // fixed orientation: first nonzero component positive
        let s = if c[0].abs() > 1e-12 { c[0].signum() } else { c[1].signum() };
        [s * c[0], s * c[1]]
    };
    Ok(Generator {
        point: p,
        index: eigenvalues.iter().filter(|&&l| l < 0.0).count(),
        eigenvalues,
        eigenvectors: [v(0), v(1)],
    })
}

/// Critical points of `h` on `T²` from a `64 × 64` Newton grid, deduplicated
/// mod `ℤ²`, sorted by index and then lexicographically.
pub fn morse_critical_points(h: &HamiltonianSystem) -> Result<Vec<Generator>> {
    check_surface(h)?;
    let scale = h.grad_bound().max(1e-300);
    let n = GRID_PER_AXIS;
    let mut points: Vec<[f64; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let start = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
            let g = gradient(h, start);
            if g[0].hypot(g[1]) <= 1e-13 * scale {
                // the start itself is critical; constant functions end here
                let _ = generator_at(h, start)?;
            }
            if let Some(p) = newton_critical(h, start, scale) {
                if !points.iter().any(|q| torus_distance(*q, p) <= 1e-8) {
                    points.push(p);
                }
            }
        }
    }
    let snap = |v: f64| if 1.0 - v < 1e-10 { 0.0 } else { v };
    let mut gens = points
        .into_iter()
        .map(|p| generator_at(h, [snap(p[0]), snap(p[1])]))
        .collect::<Result<Vec<_>>>()?;
    if gens.is_empty() {
        return Err(Error::NotMorse {
            point: [f64::NAN; 2],
            eigenvalue: f64::NAN,
        });
    }
    gens.sort_by(|a, b| {
        a.index
            .cmp(&b.index)
            .then(a.point[0].total_cmp(&b.point[0]))
            .then(a.point[1].total_cmp(&b.point[1]))
    });
    Ok(gens)
}

fn nearest(gens: &[Generator], p: [f64; 2]) -> (usize, f64) {
    gens.iter()
        .enumerate()
        .map(|(i, g)| (i, torus_distance(g.point, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty generator list")
}

fn shoot(
    h: &HamiltonianSystem,
    gens: &[Generator],
    saddle: usize,
    saddle_gen: usize,
    branch: Branch,
    params: &ShootingParams,
) -> Result<Flowline> {
    let g = &gens[saddle_gen];
    let (v, sign) = match branch {
        Branch::DownPlus => (g.eigenvectors[0], 1.0),
        Branch::DownMinus => (g.eigenvectors[0], -1.0),
        Branch::UpPlus => (g.eigenvectors[1], 1.0),
        Branch::UpMinus => (g.eigenvectors[1], -1.0),
    };
    let descending = branch.descending();
    let flow_sign = if descending { -1.0 } else { 1.0 };
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| {
        h.gradient_into(0.0, y, dy);
        dy.iter_mut().for_each(|v| *v *= flow_sign);
    };
    let y0 = [g.point[0] + sign * params.delta * v[0], g.point[1] + sign * params.delta * v[1]];
    let min_rate = gens
        .iter()
        .flat_map(|g| g.eigenvalues)
        .fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let s_cap = 1e6 / min_rate;
    let mut stepper = DormandPrince::with_tolerance(params.tolerance).stepper(rhs, 0.0, &y0, 1e-3 / min_rate.max(1.0));
    let mut samples = vec![[0.0, y0[0], y0[1]]];
    let mut pending: Option<(usize, f64, usize)> = None;
    // integrator jitter at a sink, well inside the landing radius
    let noise = 1e3 * params.tolerance;
    let inconclusive = |reason: String, samples: &[[f64; 3]]| Error::Inconclusive {
        saddle,
        branch: branch.label().into(),
        reason,
        trajectory: samples.iter().map(|s| [s[1], s[2]]).collect(),
    };
    loop {
        stepper.step().map_err(|e| inconclusive(format!("integrator: {e}"), &samples))?;
        let y = [stepper.y()[0], stepper.y()[1]];
        samples.push([stepper.t(), y[0], y[1]]);
        let (idx, dist) = nearest(gens, y);
        pending = match pending {
            Some((target, last, count)) if target == idx && dist <= last.max(noise) => {
                if count + 1 >= params.confirm_steps {
                    let expected = if descending { g.index - 1 } else { g.index + 1 };
                    if gens[target].index != expected {
                        return Err(inconclusive(
                            format!(
                                "landed on generator {target} of index {}, expected index {expected}",
                                gens[target].index
                            ),
                            &samples,
                        ));
                    }
                    return Ok(Flowline {
                        saddle,
                        branch,
                        target,
                        samples,
                    });
                }
                Some((target, dist, count + 1))
            }
            _ if dist <= params.landing_radius => Some((idx, dist, 0)),
            _ => None,
        };
        if stepper.t() > s_cap {
            return Err(inconclusive(format!("no landing before s = {s_cap:e}"), &samples));
        }
    }
}

/// Boundary matrices from four shots per saddle.
pub fn count_flowlines(
    h: &HamiltonianSystem,
    generators: &[Generator],
    params: &ShootingParams,
) -> Result<(Gf2Matrix, Gf2Matrix, Vec<Flowline>)> {
    let by_index = |k: usize| -> Vec<usize> { (0..generators.len()).filter(|&i| generators[i].index == k).collect() };
    let (c0, c1, c2) = (by_index(0), by_index(1), by_index(2));
    let jobs: Vec<(usize, usize, Branch)> = c1
        .iter()
        .enumerate()
        .flat_map(|(s, &gi)| {
            [Branch::DownPlus, Branch::DownMinus, Branch::UpPlus, Branch::UpMinus]
                .into_iter()
                .map(move |b| (s, gi, b))
        })
        .collect();
    let flowlines = jobs
        .par_iter()
        .map(|&(s, gi, b)| shoot(h, generators, s, gi, b, params))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut d1 = Gf2Matrix::zeros(c0.len(), c1.len());
    let mut d2 = Gf2Matrix::zeros(c1.len(), c2.len());
    for f in &flowlines {
        if f.branch.descending() {
            let row = c0.iter().position(|&g| g == f.target).expect("index-0 target");
            d1.toggle(row, f.saddle);
        } else {
            let col = c2.iter().position(|&g| g == f.target).expect("index-2 target");
            d2.toggle(f.saddle, col);
        }
    }
    Ok((d1, d2, flowlines))
}

impl MorseComplex {
    pub fn from_parts(generators: Vec<Generator>, boundary1: Gf2Matrix, boundary2: Gf2Matrix) -> Self {
        Self {
            generators,
            boundary1,
            boundary2,
            flowlines: Vec::new(),
        }
    }

    /// `dim C_k` for `k = 0, 1, 2`.
    pub fn chain_ranks(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for g in &self.generators {
            c[g.index] += 1;
        }
        c
    }

    pub fn boundary_squares_to_zero(&self) -> bool {
        self.boundary1.mul(&self.boundary2).is_zero()
    }

    pub fn betti(&self) -> Result<[usize; 3]> {
        betti_numbers(self)
    }
}

/// Critical points, flowline counts and boundary matrices of `h`.
pub fn morse_complex(h: &HamiltonianSystem, params: &ShootingParams) -> Result<MorseComplex> {
    let generators = morse_critical_points(h)?;
    let (boundary1, boundary2, flowlines) = count_flowlines(h, &generators, params)?;
    Ok(MorseComplex {
        generators,
        boundary1,
        boundary2,
        flowlines,
    })
}

/// `b_k = dim C_k − rank ∂_k − rank ∂_{k+1}` over `ℤ₂`.
pub fn betti_numbers(complex: &MorseComplex) -> Result<[usize; 3]> {
    let c = complex.chain_ranks();
    if complex.boundary1.rows() != c[0]
        || complex.boundary1.cols() != c[1]
        || complex.boundary2.rows() != c[1]
        || complex.boundary2.cols() != c[2]
    {
        return Err(Error::DimensionMismatch {
            expected: c[1],
            got: complex.boundary1.cols(),
        });
    }
    if !complex.boundary_squares_to_zero() {
        return Err(Error::BoundarySquare);
    }
    let r1 = complex.boundary1.rank();
    let r2 = complex.boundary2.rank();
    Ok([c[0] - r1, c[1] - r1 - r2, c[2] - r2])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvarianceCheck {
    pub betti: [Option<[usize; 3]>; 2],
    pub pass: bool,
    /// Why a side has no homology, when it fails.
    pub flags: Vec<String>,
}

/// Equal Betti numbers for two complexes.
pub fn invariance_check(a: &MorseComplex, b: &MorseComplex) -> InvarianceCheck {
    let mut flags = Vec::new();
    let mut side = |c: &MorseComplex, name: &str| match betti_numbers(c) {
        Ok(betti) => Some(betti),
        Err(e) => {
            flags.push(format!("{name}: {e}"));
            None
        }
    };
    let betti = [side(a, "first"), side(b, "second")];
    let pass = matches!(betti, [Some(x), Some(y)] if x == y);
    InvarianceCheck { betti, pass, flags }
}

/// Convenience: builds both complexes and compares them.
pub fn invariance_check_functions(
    h1: &HamiltonianSystem,
    h2: &HamiltonianSystem,
    params: &ShootingParams,
) -> Result<InvarianceCheck> {
    Ok(invariance_check(&morse_complex(h1, params)?, &morse_complex(h2, params)?))
}
