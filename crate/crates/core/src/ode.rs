//! Adaptive Dormand–Prince 5(4) integration for the time-domain certificates.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights equal the last row of A (FSAL)
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Step-size control settings.
#[derive(Clone, Copy, Debug)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self::with_tolerance(1e-10)
    }
}

impl DormandPrince {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }

    pub fn stepper<F>(&self, rhs: F, t0: f64, y0: &[f64], h0: f64) -> Stepper<F>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y0.len();
        Stepper {
            cfg: *self,
            rhs,
            t: t0,
            y: y0.to_vec(),
            h: h0,
            k: vec![vec![0.0; n]; 7],
            tmp: vec![0.0; n],
            fresh: false,
            steps: 0,
        }
    }

    /// Integrates `y' = rhs(t, y)` from `t0` to `t1 > t0`.
    pub fn integrate<F>(&self, rhs: F, t0: f64, y0: &[f64], t1: f64) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut s = self.stepper(rhs, t0, y0, (t1 - t0) * 0.01);
        while s.t < t1 {
            let remaining = t1 - s.t;
            if remaining <= 1e-15 * t1.abs().max(1.0) {
                break;
            }
            s.step_until(t1)?;
        }
        Ok(s.y)
    }
}

/// One accepted step at a time, for event detection by the caller.
pub struct Stepper<F> {
    cfg: DormandPrince,
    rhs: F,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    // k[0] holds rhs(t, y) for the current state
    fresh: bool,
    steps: usize,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn into_state(self) -> (f64, Vec<f64>) {
        (self.t, self.y)
    }

    /// Takes one accepted step.
    pub fn step(&mut self) -> Result<()> {
        self.step_until(f64::INFINITY)
    }

    /// Takes one accepted step, not stepping past `t_end`.
    pub fn step_until(&mut self, t_end: f64) -> Result<()> {
        let n = self.y.len();
        if !self.fresh {
            let (k0, _) = self.k.split_at_mut(1);
            (self.rhs)(self.t, &self.y, &mut k0[0]);
            self.fresh = true;
        }
        loop {
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(Error::TooManySteps {
                    max_steps: self.cfg.max_steps,
                });
            }
            let mut h = self.h;
            let last = self.t + h >= t_end;
            if last {
                h = t_end - self.t;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = self.y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += h * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                let (_, rest) = self.k.split_at_mut(s);
                (self.rhs)(self.t + C[s] * h, &self.tmp, &mut rest[0]);
            }
            // tmp now holds the fifth-order solution (stage 7 is evaluated there)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += h * (B[s] - B_LOW[s]) * self.k[s][i];
                }
                let scale = self.cfg.atol + self.cfg.rtol * self.y[i].abs().max(self.tmp[i].abs());
                err += (e / scale).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y.copy_from_slice(&self.tmp);
                self.k.swap(0, 6);
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.h = h * factor.min(1.0);
            if self.h < self.cfg.h_min {
                return Err(Error::StepUnderflow { t: self.t });
            }
        }
    }
}
