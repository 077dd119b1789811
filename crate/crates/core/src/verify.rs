//! Built-in identity suite run by `kljn verify`.
//!
//! Every check uses a fixed seed. Quick mode runs a tenth of the samples and
//! widens statistical tolerances from three to four standard errors at the
//! smaller sample count.

use crate::circuit::{measure_power_balance_with, reference_solver, Line, LoopSample, LoopSolverFn};
use crate::error::Result;
use crate::noise::{sample_noise, NoiseParams, RngStream};
use crate::protocol::{reduce_channel_noise, ChannelTrace, Hypothesis, Party};
use crate::stats::cross_correlation;

pub const FULL_SAMPLES: usize = 1_000_000;
pub const QUICK_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub quick: bool,
    pub seed: u64,
    /// Ideal-loop solver under audit.
    pub solver: LoopSolverFn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            seed: 20_160_701,
            solver: reference_solver,
        }
    }
}

impl VerifyOptions {
    pub fn samples(&self) -> usize {
        if self.quick {
            QUICK_SAMPLES
        } else {
            FULL_SAMPLES
        }
    }

    /// Scales a full-run tolerance to the configured sample count.
    pub fn tolerance(&self, full: f64) -> f64 {
        if self.quick {
            full * 4.0 / 3.0 * (FULL_SAMPLES as f64 / QUICK_SAMPLES as f64).sqrt()
        } else {
            full
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

const R_L: f64 = 1.0;
const R_H: f64 = 4.0;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn generators(opts: &VerifyOptions, label: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let params = NoiseParams::normalized();
    let root = RngStream::root(opts.seed).child(label);
    let n = opts.samples();
    let u_a = sample_noise(R_L, &params, n, &root.child("alice"))?.samples;
    let u_b = sample_noise(R_H, &params, n, &root.child("bob"))?.samples;
    Ok((u_a, u_b))
}

fn loop_trace(opts: &VerifyOptions, u_a: &[f64], u_b: &[f64]) -> Vec<LoopSample> {
    u_a.iter().zip(u_b).map(|(&a, &b)| (opts.solver)(a, b, R_L, R_H)).collect()
}

fn channel_levels(opts: &VerifyOptions) -> Result<IdentityCheck> {
    let (u_a, u_b) = generators(opts, "levels")?;
    let trace = loop_trace(opts, &u_a, &u_b);
    let n = trace.len() as f64;
    let ms_u = trace.iter().map(|s| s.u_ch * s.u_ch).sum::<f64>() / n;
    let ms_i = trace.iter().map(|s| s.i_ch * s.i_ch).sum::<f64>() / n;
    let tol = opts.tolerance(0.02);
    Ok(IdentityCheck {
        name: "channel levels",
        passed: rel(ms_u, 0.8) < tol && rel(ms_i, 0.2) < tol,
        detail: format!("<U^2> = {ms_u:.4} (0.8), <I^2> = {ms_i:.4} (0.2), tol {:.1}%", tol * 100.0),
    })
}

fn power_balance(opts: &VerifyOptions) -> Result<IdentityCheck> {
    let (u_a, u_b) = generators(opts, "power")?;
    let trace = loop_trace(opts, &u_a, &u_b);
    let p = measure_power_balance_with(&trace, R_L, R_H, opts.solver)?;
    let tol = opts.tolerance(0.02);
    let imbalance = (p.p_l_to_h - p.p_h_to_l).abs() / p.p_l_to_h;
    Ok(IdentityCheck {
        name: "power balance",
        passed: imbalance < tol && rel(p.p_l_to_h, 0.16) < tol && rel(p.p_h_to_l, 0.16) < tol,
        detail: format!(
            "P_LH = {:.5}, P_HL = {:.5} (0.16), imbalance {:.2}%, tol {:.1}%",
            p.p_l_to_h,
            p.p_h_to_l,
            imbalance * 100.0,
            tol * 100.0
        ),
    })
}

fn zero_correlation(opts: &VerifyOptions) -> Result<IdentityCheck> {
    let (u_a, u_b) = generators(opts, "correlation")?;
    let trace = loop_trace(opts, &u_a, &u_b);
    let u: Vec<f64> = trace.iter().map(|s| s.u_ch).collect();
    let i: Vec<f64> = trace.iter().map(|s| s.i_ch).collect();
    let rho = cross_correlation(&u, &i)?.normalized;
    let bound = if opts.quick { 4.0 } else { 3.0 } / (trace.len() as f64).sqrt();
    Ok(IdentityCheck {
        name: "zero cross-correlation",
        passed: rho.abs() < bound,
        detail: format!("rho = {rho:.2e}, bound {bound:.2e}"),
    })
}

fn degeneracy(opts: &VerifyOptions) -> Result<IdentityCheck> {
    let (u_a, u_b) = generators(opts, "degeneracy")?;
    let line = Line::new(R_L, R_H, 0.0)?;
    let channel = ChannelTrace::solve(&u_a, &u_b, &line, 0.0)?;
    let view = channel.view(Party::Alice);
    let mut worst: f64 = 0.0;
    for (index, r_h) in [(0, R_L), (1, R_H)] {
        let hyp = Hypothesis {
            index,
            assumed_other_resistance: r_h,
        };
        let reduced = reduce_channel_noise(&view, &u_a, R_L, hyp)?;
        for (u, i) in reduced.u_star.iter().zip(&reduced.i_star) {
            if i.abs() > 1e-12 {
                worst = worst.max(rel(u / i, -R_L));
            }
        }
    }
    Ok(IdentityCheck {
        name: "hypothesis degeneracy",
        passed: worst < 1e-9,
        detail: format!("max |u*/i* + R_own|/R_own = {worst:.2e} over both hypotheses"),
    })
}

/// Runs every identity; statistical failures are reported, not raised.
pub fn run_identity_suite(opts: &VerifyOptions) -> Result<Vec<IdentityCheck>> {
    Ok(vec![
        channel_levels(opts)?,
        power_balance(opts)?,
        zero_correlation(opts)?,
        degeneracy(opts)?,
    ])
}
