//! Integer bookkeeping for the critical-point lower bounds: Poincaré
//! polynomials, Morse inequalities with a nonnegative quotient, cup length,
//! and the final verdict on a search.

use std::fmt;

use serde::Serialize;

use crate::search::SearchReport;

/// Integer polynomial, coefficient `i` of degree `i`, trailing zeros trimmed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct IntPolynomial {
    coeffs: Vec<i64>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<i64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(degree: usize, c: i64) -> Self {
        let mut v = vec![0; degree + 1];
        v[degree] = c;
        Self::new(v)
    }

    /// `Σ_j t^{m_j}`.
    pub fn from_indices(indices: &[usize]) -> Self {
        let top = indices.iter().copied().max().map_or(0, |m| m + 1);
        let mut v = vec![0; top];
        for &m in indices {
            v[m] += 1;
        }
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn coeff(&self, degree: usize) -> i64 {
        self.coeffs.get(degree).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: i64) -> i64 {
        self.coeffs.iter().rev().fold(0, |acc, c| acc * t + c)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    /// `(1 + t)·self`.
    pub fn times_one_plus_t(&self) -> Self {
        let n = self.coeffs.len() + 1;
        Self::new((0..n).map(|i| self.coeff(i) + if i > 0 { self.coeff(i - 1) } else { 0 }).collect())
    }

    /// Quotient and remainder of division by `(1 + t)`.
    pub fn div_one_plus_t(&self) -> (Self, i64) {
        let Some(d) = self.degree() else {
            return (Self::zero(), 0);
        };
        if d == 0 {
            return (Self::zero(), self.coeffs[0]);
        }
        let mut q = vec![0i64; d];
        q[d - 1] = self.coeffs[d];
        for k in (1..d).rev() {
            q[k - 1] = self.coeffs[k] - q[k];
        }
        let remainder = self.coeffs[0] - q[0];
        (Self::new(q), remainder)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().filter(|(_, c)| **c != 0) {
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let sep = if first { "" } else { " " };
            let mag = c.unsigned_abs();
            let body = match (i, mag) {
                (0, m) => m.to_string(),
                (1, 1) => "t".into(),
                (1, m) => format!("{m}t"),
                (d, 1) => format!("t^{d}"),
                (d, m) => format!("{m}t^{d}"),
            };
            if first {
                write!(f, "{sign}{body}")?;
            } else {
                write!(f, "{sep}{sign} {body}")?;
            }
            first = false;
        }
        Ok(())
    }
}

pub fn binomial(n: u64, k: u64) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// `Σ_j binom(2n, j) t^{j + N₊}`.
pub fn target_polynomial(half_dim: usize, n_plus: usize) -> IntPolynomial {
    let m = 2 * half_dim as u64;
    let mut v = vec![0; n_plus + 2 * half_dim + 1];
    for j in 0..=m {
        v[n_plus + j as usize] = binomial(m, j);
    }
    IntPolynomial::new(v)
}

/// Why `Σ t^{m_j} − target` is not `(1+t)·Q` with `Q ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MorseFailure {
    NonzeroRemainder { remainder: i64, difference: IntPolynomial },
    NegativeCoefficient { degree: usize, value: i64, quotient: IntPolynomial },
}

impl fmt::Display for MorseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonzeroRemainder { remainder, difference } => {
                write!(f, "{difference} leaves remainder {remainder} on division by 1 + t")
            }
            Self::NegativeCoefficient { degree, value, quotient } => {
                write!(f, "quotient {quotient} has coefficient {value} at degree {degree}")
            }
        }
    }
}

/// Returns `Q` with `Σ t^{m_j} = target + (1+t)Q` and all coefficients ≥ 0.
pub fn verify_morse_inequalities(indices: &[usize], target: &IntPolynomial) -> Result<IntPolynomial, MorseFailure> {
    let difference = IntPolynomial::from_indices(indices).sub(target);
    let (quotient, remainder) = difference.div_one_plus_t();
    if remainder != 0 {
        return Err(MorseFailure::NonzeroRemainder { remainder, difference });
    }
    if let Some((degree, &value)) = quotient.coeffs().iter().enumerate().find(|(_, c)| **c < 0) {
        return Err(MorseFailure::NegativeCoefficient { degree, value, quotient });
    }
    Ok(quotient)
}

/// Cup length of `T^{2n}`: `2n + 1`.
pub fn cup_length_bound(half_dim: usize) -> usize {
    2 * half_dim + 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub bound: usize,
    pub observed: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MorseCheck {
    pub q_coeffs: Vec<i64>,
    pub pass: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub count: usize,
    pub cup_length: Check,
    /// Skipped when some critical point is degenerate.
    pub betti_sum: Option<Check>,
    pub morse_inequalities: Option<MorseCheck>,
    pub degenerate_family: bool,
    pub pass: bool,
}

/// Checks the cup-length bound always, and the Betti-sum bound and Morse
/// inequalities when every critical point is nondegenerate.
pub fn adjudicate(report: &SearchReport, n_plus: usize, half_dim: usize) -> Verdict {
    let count = report.count();
    let degenerate_family = report.degenerate.is_some();
    let cup = cup_length_bound(half_dim);
    let cup_length = Check {
        bound: cup,
        observed: count,
        // a flagged degenerate family is a continuum of critical points
        pass: degenerate_family || count >= cup,
    };
    let (betti_sum, morse_inequalities) = if report.all_nondegenerate() && count > 0 {
        let bound = 1usize << (2 * half_dim);
        let indices: Vec<usize> = report.oscillations.iter().map(|o| o.morse_index_g).collect();
        let morse = match verify_morse_inequalities(&indices, &target_polynomial(half_dim, n_plus)) {
            Ok(q) => MorseCheck {
                q_coeffs: q.coeffs().to_vec(),
                pass: true,
                failure: None,
            },
            Err(e) => MorseCheck {
                q_coeffs: Vec::new(),
                pass: false,
                failure: Some(e.to_string()),
            },
        };
        (
            Some(Check {
                bound,
                observed: count,
                pass: count >= bound,
            }),
            Some(morse),
        )
    } else {
        (None, None)
    };
    let pass = cup_length.pass
        && betti_sum.as_ref().is_none_or(|c| c.pass)
        && morse_inequalities.as_ref().is_none_or(|m| m.pass);
    Verdict {
        count,
        cup_length,
        betti_sum,
        morse_inequalities,
        degenerate_family,
        pass,
    }
}
