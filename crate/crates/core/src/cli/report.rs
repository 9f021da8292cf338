//! Machine-readable report files.

use serde::Serialize;

use crate::cli::config::{HomologyConfig, RunConfig};
use crate::error::{Error, Result};
use crate::homology::{betti_numbers, Gf2Matrix, InvarianceCheck, MorseComplex};
use crate::invariant_counts::Verdict;
use crate::reduction::ReductionContext;
use crate::search::SearchReport;

#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub torus_rep: Vec<f64>,
    pub action: f64,
    pub grad_norm: f64,
    pub ode_residual: f64,
    pub fixed_point_gap: f64,
    pub morse_index_g: usize,
    pub cz_index: i64,
    pub nondegenerate: bool,
    pub det_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRecord {
    pub bound: usize,
    pub observed: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MorseRecord {
    #[serde(rename = "Q_coeffs")]
    pub q_coeffs: Vec<i64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictRecord {
    pub count: usize,
    pub cup_length_bound: BoundRecord,
    /// `null` when a degenerate critical point makes the bound inapplicable.
    pub betti_sum_bound: Option<BoundRecord>,
    pub morse_inequalities: Option<MorseRecord>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateRecord {
    pub points: usize,
    pub max_nullity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub starts_used: usize,
    pub converged_starts: usize,
    pub failed_starts: usize,
    pub degenerate_family: Option<DegenerateRecord>,
    pub warnings: Vec<String>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct FindOrbitsReport {
    pub config_echo: RunConfig,
    pub n0: usize,
    #[serde(rename = "N")]
    pub order: usize,
    /// `null` for Hamiltonians with unbounded gradient.
    #[serde(rename = "K")]
    pub trapping_radius: Option<f64>,
    pub contraction_q: f64,
    pub orbits: Vec<OrbitRecord>,
    pub verdict: VerdictRecord,
    pub diagnostics: Diagnostics,
}

impl FindOrbitsReport {
    pub fn new(config_echo: RunConfig, ctx: &ReductionContext, search: &SearchReport, verdict: &Verdict) -> Self {
        let orbits = search
            .oscillations
            .iter()
            .map(|o| OrbitRecord {
                torus_rep: o.torus_rep.clone(),
                action: o.action,
                grad_norm: o.grad_norm,
                ode_residual: o.ode_residual,
                fixed_point_gap: o.fixed_point_gap,
                morse_index_g: o.morse_index_g,
                cz_index: o.cz_index,
                nondegenerate: o.nondegenerate,
                det_gap: o.det_gap,
            })
            .collect();
        let bound = |c: &crate::invariant_counts::Check| BoundRecord {
            bound: c.bound,
            observed: c.observed,
            pass: c.pass,
        };
        let mut warnings = Vec::new();
        if let Some(f) = &search.degenerate {
            warnings.push(format!(
                "degenerate continuum of critical points (kernel dimension {}); \
                 nondegenerate count bound and Morse inequalities skipped",
                f.max_nullity
            ));
        } else if search.oscillations.iter().any(|o| !o.nondegenerate) {
            warnings.push("some orbits are degenerate; nondegenerate count bound skipped".into());
        }
        if search.oscillations.is_empty() && search.degenerate.is_none() {
            warnings.push(format!("no start converged ({} starts)", search.starts_used));
        }
        Self {
            config_echo,
            n0: ctx.n0(),
            order: ctx.order(),
            trapping_radius: ctx.trapping_radius().is_finite().then(|| ctx.trapping_radius()),
            contraction_q: ctx.observed_q(),
            orbits,
            verdict: VerdictRecord {
                count: verdict.count,
                cup_length_bound: bound(&verdict.cup_length),
                betti_sum_bound: verdict.betti_sum.as_ref().map(bound),
                morse_inequalities: verdict.morse_inequalities.as_ref().map(|m| MorseRecord {
                    q_coeffs: m.q_coeffs.clone(),
                    pass: m.pass,
                    failure: m.failure.clone(),
                }),
                pass: verdict.pass,
            },
            diagnostics: Diagnostics {
                starts_used: search.starts_used,
                converged_starts: search.converged_starts,
                failed_starts: search.failed_starts,
                degenerate_family: search.degenerate.as_ref().map(|f| DegenerateRecord {
                    points: f.points,
                    max_nullity: f.max_nullity,
                }),
                warnings,
            },
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self).map_err(|e| Error::Io(e.into()))?;
        v.push(b'\n');
        Ok(v)
    }

    /// `index, torus_rep_0.., action, cz_index, nondegenerate, det_gap`.
    pub fn orbits_csv(&self) -> Result<Vec<u8>> {
        let dim = 2 * self.config_echo.half_dim;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index".to_string()];
        header.extend((0..dim).map(|i| format!("torus_rep_{i}")));
        header.extend(["action", "cz_index", "nondegenerate", "det_gap"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for (i, o) in self.orbits.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(o.torus_rep.iter().map(num));
            row.extend([
                num(&o.action),
                o.cz_index.to_string(),
                o.nondegenerate.to_string(),
                num(&o.det_gap),
            ]);
            w.write_record(&row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn summary(&self) -> String {
        let v = &self.verdict;
        let mut s = format!("{} forced oscillations (n0 = {}, N = {}); ", v.count, self.n0, self.order);
        if self.diagnostics.degenerate_family.is_some() {
            s.push_str("cup-length bound met by a degenerate continuum");
        } else {
            s.push_str(&format!(
                "cup-length bound {} >= {}: {}",
                v.cup_length_bound.observed,
                v.cup_length_bound.bound,
                pass_word(v.cup_length_bound.pass)
            ));
        }
        match &v.betti_sum_bound {
            Some(b) => s.push_str(&format!("; Betti-sum bound {} >= {}: {}", b.observed, b.bound, pass_word(b.pass))),
            None => s.push_str("; Betti-sum bound skipped"),
        }
        if let Some(m) = &v.morse_inequalities {
            s.push_str(&format!("; Morse inequalities Q = {:?}: {}", m.q_coeffs, pass_word(m.pass)));
        }
        s
    }
}

fn pass_word(p: bool) -> &'static str {
    if p { "pass" } else { "FAIL" }
}

/// Shortest round-trip form; exponent notation outside `[1e-5, 1e16)`.
fn num(v: &f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorRecord {
    pub point: [f64; 2],
    pub index: usize,
    pub eigenvalues: [f64; 2],
}

/// Contents of `complex.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexReport {
    pub config_echo: HomologyConfig,
    pub generators: Vec<GeneratorRecord>,
    pub chain_ranks: [usize; 3],
    /// Rows index-0 generators, columns index-1 generators.
    pub boundary1: Vec<Vec<u8>>,
    /// Rows index-1 generators, columns index-2 generators.
    pub boundary2: Vec<Vec<u8>>,
    pub boundary_rank: [usize; 2],
    pub boundary_squared_zero: bool,
    pub betti: [usize; 3],
    /// Boundary matrices unchanged under a halved offset and tighter integration.
    pub shooting_robust: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance: Option<InvarianceCheck>,
}

impl ComplexReport {
    pub fn new(
        config_echo: HomologyConfig,
        complex: &MorseComplex,
        shooting_robust: bool,
        invariance: Option<InvarianceCheck>,
    ) -> Result<Self> {
        let rows = |m: &Gf2Matrix| m.to_rows();
        Ok(Self {
            config_echo,
            generators: complex
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    point: g.point,
                    index: g.index,
                    eigenvalues: g.eigenvalues,
                })
                .collect(),
            chain_ranks: complex.chain_ranks(),
            boundary1: rows(&complex.boundary1),
            boundary2: rows(&complex.boundary2),
            boundary_rank: [complex.boundary1.rank(), complex.boundary2.rank()],
            boundary_squared_zero: complex.boundary_squares_to_zero(),
            betti: betti_numbers(complex)?,
            shooting_robust,
            invariance,
        })
    }

    pub fn pass(&self) -> bool {
        self.boundary_squared_zero && self.shooting_robust && self.invariance.as_ref().is_none_or(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self).map_err(|e| Error::Io(e.into()))?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} critical points (indices {:?}); rank d1 = {}, rank d2 = {}; Betti {:?}",
            self.generators.len(),
            self.chain_ranks,
            self.boundary_rank[0],
            self.boundary_rank[1],
            self.betti
        );
        if !self.shooting_robust {
            s.push_str("; WARNING: parity counts changed under refinement");
        }
        if let Some(c) = &self.invariance {
            s.push_str(&format!("; invariance check: {}", pass_word(c.pass)));
        }
        s
    }
}

/// `saddle_id, branch, t, x, y` for every flowline sample.
pub fn flowlines_csv(complex: &MorseComplex) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["saddle_id", "branch", "t", "x", "y"]).map_err(csv_err)?;
    for f in &complex.flowlines {
        for s in &f.samples {
            w.write_record([
                f.saddle.to_string(),
                f.branch.label().to_string(),
                num(&s[0]),
                num(&s[1]),
                num(&s[2]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn trajectory_csv(points: &[[f64; 2]]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for p in points {
        w.write_record([num(&p[0]), num(&p[1])]).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
