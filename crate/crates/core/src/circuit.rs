//! Kirchhoff loop of the two generator-resistor pairs.
//!
//! Sign convention: positive channel current flows from Bob's terminal
//! through the line toward Alice's terminal. Voltages are measured against
//! the common ground. With `α = R_A/R_B` the ideal-line solution is
//!
//! ```text
//! I_ch = (U_B − U_A) / (R_A + R_B)
//! U_ch = (U_A·R_B + U_B·R_A) / (R_A + R_B)
//! ```
//!
//! The non-ideal line inserts one lumped series wire resistance `R_w`
//! between the two terminals, so the terminal voltages differ by `I_ch·R_w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoopSample {
    pub u_a: f64,
    pub u_b: f64,
    pub u_ch: f64,
    pub i_ch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EndpointSample {
    pub u_end_a: f64,
    pub u_end_b: f64,
    pub i_ch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    /// Mean power the low-resistor generator dissipates in the high resistor [W].
    pub p_l_to_h: f64,
    /// Mean power the high-resistor generator dissipates in the low resistor [W].
    pub p_h_to_l: f64,
    /// Sample estimate of ⟨U_ch·I_ch⟩ [W].
    pub cross_corr: f64,
    /// Standard error of `cross_corr`.
    pub cross_corr_stderr: f64,
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Validated ideal loop; solving is infallible once constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loop {
    r_a: f64,
    r_b: f64,
}

impl Loop {
    pub fn new(r_a: f64, r_b: f64) -> Result<Self> {
        positive("r_a", r_a)?;
        positive("r_b", r_b)?;
        Ok(Loop { r_a, r_b })
    }

    #[inline]
    pub fn solve(&self, u_a: f64, u_b: f64) -> LoopSample {
        let total = self.r_a + self.r_b;
        LoopSample {
            u_a,
            u_b,
            u_ch: (u_a * self.r_b + u_b * self.r_a) / total,
            i_ch: (u_b - u_a) / total,
        }
    }
}

/// Validated line with a series wire resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    r_a: f64,
    r_b: f64,
    r_w: f64,
}

impl Line {
    pub fn new(r_a: f64, r_b: f64, r_w: f64) -> Result<Self> {
        positive("r_a", r_a)?;
        positive("r_b", r_b)?;
        if !(r_w.is_finite() && r_w >= 0.0) {
            return Err(Error::parameter(format!(
                "r_w must be finite and non-negative, got {r_w}"
            )));
        }
        Ok(Line { r_a, r_b, r_w })
    }

    pub fn is_ideal(&self) -> bool {
        self.r_w == 0.0
    }

    #[inline]
    pub fn solve(&self, u_a: f64, u_b: f64) -> EndpointSample {
        if self.r_w == 0.0 {
            // a single node: both ends read the same value bit for bit
            let s = Loop { r_a: self.r_a, r_b: self.r_b }.solve(u_a, u_b);
            return EndpointSample {
                u_end_a: s.u_ch,
                u_end_b: s.u_ch,
                i_ch: s.i_ch,
            };
        }
        let i_ch = (u_b - u_a) / (self.r_a + self.r_w + self.r_b);
        EndpointSample {
            u_end_a: u_a + i_ch * self.r_a,
            u_end_b: u_b - i_ch * self.r_b,
            i_ch,
        }
    }
}

/// Solves the ideal loop for one instant.
pub fn solve_loop(u_a: f64, u_b: f64, r_a: f64, r_b: f64) -> Result<LoopSample> {
    Ok(Loop::new(r_a, r_b)?.solve(u_a, u_b))
}

/// Solves the line with series wire resistance `r_w` for one instant.
pub fn solve_loop_nonideal(u_a: f64, u_b: f64, r_a: f64, r_b: f64, r_w: f64) -> Result<EndpointSample> {
    Ok(Line::new(r_a, r_b, r_w)?.solve(u_a, u_b))
}

/// Signature of an ideal-loop solver, used to audit the power identities
/// against alternative (possibly faulty) implementations.
pub type LoopSolverFn = fn(f64, f64, f64, f64) -> LoopSample;

/// The reference solver with validation stripped.
pub fn reference_solver(u_a: f64, u_b: f64, r_a: f64, r_b: f64) -> LoopSample {
    Loop { r_a, r_b }.solve(u_a, u_b)
}

/// Power exchanged between the two ends of an ideal loop.
///
/// The channel response is split by superposition: the solver runs once per
/// generator with the other one silenced. The power a source delivers to the
/// far resistor is the far resistor's mean-square voltage divided by its
/// resistance.
pub fn measure_power_balance(trace: &[LoopSample], r_a: f64, r_b: f64) -> Result<PowerReport> {
    measure_power_balance_with(trace, r_a, r_b, reference_solver)
}

pub fn measure_power_balance_with(
    trace: &[LoopSample],
    r_a: f64,
    r_b: f64,
    solver: LoopSolverFn,
) -> Result<PowerReport> {
    Loop::new(r_a, r_b)?;
    if trace.is_empty() {
        return Err(Error::contract("power balance needs a non-empty trace"));
    }
    if trace.iter().any(|s| !(s.u_a.is_finite() && s.u_b.is_finite())) {
        return Err(Error::contract(
            "trace lacks the per-source generator voltages needed for decomposition",
        ));
    }
    let n = trace.len() as f64;
    let mut ms_from_a = 0.0; // at Bob's resistor, Alice's generator alone
    let mut ms_from_b = 0.0;
    let mut uxi = 0.0;
    let mut uxi_sq = 0.0;
    for s in trace {
        let a_only = solver(s.u_a, 0.0, r_a, r_b);
        let b_only = solver(0.0, s.u_b, r_a, r_b);
        // with Bob's generator silent the line voltage sits entirely across R_B
        ms_from_a += a_only.u_ch * a_only.u_ch;
        ms_from_b += b_only.u_ch * b_only.u_ch;
        let p = s.u_ch * s.i_ch;
        uxi += p;
        uxi_sq += p * p;
    }
    let p_a_to_b = ms_from_a / n / r_b;
    let p_b_to_a = ms_from_b / n / r_a;
    let mean = uxi / n;
    let var = (uxi_sq / n - mean * mean).max(0.0);
    let (p_l_to_h, p_h_to_l) = if r_a <= r_b {
        (p_a_to_b, p_b_to_a)
    } else {
        (p_b_to_a, p_a_to_b)
    };
    Ok(PowerReport {
        p_l_to_h,
        p_h_to_l,
        cross_corr: mean,
        cross_corr_stderr: (var / n).sqrt(),
    })
}
