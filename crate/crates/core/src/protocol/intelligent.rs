//! Reduced-channel-noise hypothesis testing.
//!
//! A party knows its own generator voltage. Assuming the far end carries
//! resistance `r_h`, its own generator contributes `u_own·r_h/(r_own + r_h)`
//! to the terminal voltage and `u_own/(r_own + r_h)` to the current leaving
//! the terminal toward the far end. Subtracting both leaves a reduced trace
//! driven by the far generator alone exactly when the assumption is right, so
//! its correlation with the party's own noise vanishes.

use serde::{Deserialize, Serialize};

use super::{DecisionPolicy, DiscardReason, PartyView, Variant};
use crate::error::{Error, Result};
use crate::stats::{cross_correlation, independence_threshold, nearest_with_margin, Correlation};
use crate::truthtable::ResistorBank;

/// An assumed resistance for the far end of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Bank index of the assumed resistor.
    pub index: usize,
    pub assumed_other_resistance: f64,
}

impl Hypothesis {
    /// `α′`, the assumed far resistance over the party's own.
    pub fn alpha(&self, own_r: f64) -> f64 {
        self.assumed_other_resistance / own_r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub u_star: Vec<f64>,
    pub i_star: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisResult {
    pub corr_u: Correlation,
    pub corr_i: Correlation,
    pub threshold: f64,
    pub n_samples: usize,
    pub accept: bool,
}

/// A tested hypothesis together with the level of its reduced voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisEvaluation {
    pub hypothesis: Hypothesis,
    pub test: HypothesisResult,
    /// Measured `⟨u*²⟩`.
    pub reduced_level: f64,
    /// `⟨u*²⟩` the hypothesis predicts, `P·r_h·R_own²/(R_own + r_h)²`.
    pub predicted_level: f64,
}

impl HypothesisEvaluation {
    pub fn new(hypothesis: Hypothesis, own_r: f64, unit_power: f64, reduced: &ReducedTrace, test: HypothesisResult) -> Self {
        let r_h = hypothesis.assumed_other_resistance;
        let s = own_r + r_h;
        let reduced_level = reduced.u_star.iter().map(|v| v * v).sum::<f64>() / reduced.u_star.len().max(1) as f64;
        HypothesisEvaluation {
            hypothesis,
            test,
            reduced_level,
            predicted_level: unit_power * r_h * own_r * own_r / (s * s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntelligentDecision {
    Accept { index: usize, resistance: f64, margin: f64 },
    Discard(DiscardReason),
    /// Two hypotheses are indistinguishable; the caller falls back to levels.
    Degenerate,
}

pub fn reduce_channel_noise(
    view: &PartyView<'_>,
    own_series: &[f64],
    own_r: f64,
    hyp: Hypothesis,
) -> Result<ReducedTrace> {
    let r_h = hyp.assumed_other_resistance;
    if !(r_h.is_finite() && r_h > 0.0) {
        return Err(Error::parameter(format!("hypothesis resistance must be positive, got {r_h}")));
    }
    if !(own_r.is_finite() && own_r > 0.0) {
        return Err(Error::parameter(format!("own resistance must be positive, got {own_r}")));
    }
    let n = own_series.len();
    if view.voltage.len() != n || view.current.len() != n {
        return Err(Error::contract(format!(
            "reduced trace length mismatch: own {n}, voltage {}, current {}",
            view.voltage.len(),
            view.current.len()
        )));
    }
    let sum = own_r + r_h;
    let k_u = r_h / sum;
    let k_i = 1.0 / sum;
    let sign = view.current_sign;
    let mut u_star = Vec::with_capacity(n);
    let mut i_star = Vec::with_capacity(n);
    for ((&u_own, &v), &c) in own_series.iter().zip(view.voltage).zip(view.current) {
        u_star.push(v - u_own * k_u);
        i_star.push(sign * c - u_own * k_i);
    }
    Ok(ReducedTrace { u_star, i_star })
}

/// Correlates the party's own noise with a reduced trace.
///
/// Accepts when both normalized correlations lie within `sigmas/√N` of zero.
pub fn hypothesis_test(own_series: &[f64], reduced: &ReducedTrace, sigmas: f64) -> Result<HypothesisResult> {
    let corr_u = cross_correlation(own_series, &reduced.u_star)?;
    let corr_i = cross_correlation(own_series, &reduced.i_star)?;
    let threshold = independence_threshold(own_series.len(), sigmas);
    let within = |c: Correlation| c.normalized.abs() < threshold;
    Ok(HypothesisResult {
        corr_u,
        corr_i,
        threshold,
        n_samples: own_series.len(),
        accept: within(corr_u) && within(corr_i),
    })
}

/// Candidate far-end resistances for a party holding `bank[own_index]`.
///
/// Intelligent variants get one hypothesis per bank element, which for a
/// two-resistor bank are the schemes `α′ = 1` and `α′ = R_other/R_own`.
/// Level-only variants run no hypothesis loops.
pub fn enumerate_hypotheses(own_index: usize, bank: &ResistorBank, variant: Variant) -> Result<Vec<Hypothesis>> {
    if own_index >= bank.len() {
        return Err(Error::contract(format!(
            "own index {own_index} outside bank of {}",
            bank.len()
        )));
    }
    if !variant.is_intelligent() {
        return Ok(Vec::new());
    }
    Ok(bank
        .values()
        .iter()
        .enumerate()
        .map(|(index, &r)| Hypothesis { index, assumed_other_resistance: r })
        .collect())
}

/// Negative log-likelihood of the reduced voltage under a hypothesis
/// [nats], up to a constant shared by all hypotheses.
///
/// Under the correct hypothesis the reduced voltage is the far generator
/// scaled by `R_own/(R_own + r_h)`, white with the predicted level. Under a
/// wrong one part of the party's own noise survives the subtraction. The
/// Gaussian likelihood of `N` samples is `N·(⟨u*²⟩/σ² + ln σ²)/2`.
pub fn hypothesis_nll(eval: &HypothesisEvaluation) -> f64 {
    let var = eval.predicted_level;
    let x = eval.reduced_level / var;
    if !(x.is_finite() && var > 0.0 && eval.reduced_level > 0.0) {
        return f64::INFINITY;
    }
    0.5 * eval.test.n_samples as f64 * (x + var.ln())
}

/// Fuses hypothesis tests with level evidence.
///
/// The hypothesis with the lowest [`hypothesis_nll`] wins. It must also pass
/// the correlation test: if it fails while another hypothesis passes the
/// evidence is inconsistent, and if none passes the slot is inconclusive.
/// A winning margin under `score_margin` nats is inconclusive as well.
pub fn decide_slot_intelligent(evals: &[HypothesisEvaluation], policy: &DecisionPolicy) -> IntelligentDecision {
    if evals.is_empty() {
        return IntelligentDecision::Discard(DiscardReason::Inconclusive);
    }
    for (k, a) in evals.iter().enumerate() {
        let r = a.hypothesis.assumed_other_resistance;
        if evals[k + 1..].iter().any(|b| b.hypothesis.assumed_other_resistance == r) {
            return IntelligentDecision::Degenerate;
        }
    }
    let scores: Vec<f64> = evals.iter().map(hypothesis_nll).collect();
    let (k, margin) = nearest_with_margin(&scores);
    let best = &evals[k];
    if !scores[k].is_finite() {
        return IntelligentDecision::Discard(DiscardReason::Inconclusive);
    }
    if !best.test.accept {
        let reason = if evals.iter().any(|e| e.test.accept) {
            DiscardReason::Inconsistent
        } else {
            DiscardReason::Inconclusive
        };
        return IntelligentDecision::Discard(reason);
    }
    if !(margin >= policy.score_margin) {
        return IntelligentDecision::Discard(DiscardReason::Inconclusive);
    }
    IntelligentDecision::Accept {
        index: best.hypothesis.index,
        resistance: best.hypothesis.assumed_other_resistance,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Line;
    use crate::noise::{sample_noise, NoiseParams, RngStream};

    fn hyp(index: usize, r: f64) -> Hypothesis {
        Hypothesis { index, assumed_other_resistance: r }
    }

    /// Bob's view of a single ideal-loop sample.
    fn bob_single(u_a: f64, u_b: f64, r_a: f64, r_b: f64, r_h: f64) -> (f64, f64) {
        let s = Line::new(r_a, r_b, 0.0).unwrap().solve(u_a, u_b);
        let (v, c) = ([s.u_end_b], [s.i_ch]);
        let view = PartyView { voltage: &v, current: &c, current_sign: 1.0 };
        let red = reduce_channel_noise(&view, &[u_b], r_b, hyp(0, r_h)).unwrap();
        (red.u_star[0], red.i_star[0])
    }

    #[test]
    fn single_sample_examples() {
        // Bob holds r_b = 1 against a true r_a = 2
        let (u, i) = bob_single(1.0, 2.0, 2.0, 1.0, 1.0);
        assert!((u - 2.0 / 3.0).abs() < 1e-12 && (i + 2.0 / 3.0).abs() < 1e-12);
        let (u, i) = bob_single(1.0, 2.0, 2.0, 1.0, 2.0);
        assert!((u - 1.0 / 3.0).abs() < 1e-12 && (i + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_reduces_to_zero() {
        let z = [0.0; 4];
        let view = PartyView { voltage: &z, current: &z, current_sign: -1.0 };
        let red = reduce_channel_noise(&view, &z, 1.0, hyp(1, 4.0)).unwrap();
        assert!(red.u_star.iter().chain(&red.i_star).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = [0.0; 4];
        let short = [0.0; 3];
        let view = PartyView { voltage: &z, current: &short, current_sign: 1.0 };
        assert!(matches!(
            reduce_channel_noise(&view, &z, 1.0, hyp(0, 1.0)),
            Err(Error::Contract(_))
        ));
        let view = PartyView { voltage: &z, current: &z, current_sign: 1.0 };
        assert!(matches!(
            reduce_channel_noise(&view, &z, 1.0, hyp(0, 0.0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn correct_hypothesis_leaves_the_far_generator_only() {
        let p = NoiseParams::normalized();
        let s = RngStream::root(3);
        let (r_a, r_b) = (4.0, 1.0);
        let ua = sample_noise(r_a, &p, 1000, &s.child("a")).unwrap().samples;
        let ub = sample_noise(r_b, &p, 1000, &s.child("b")).unwrap().samples;
        let line = Line::new(r_a, r_b, 0.0).unwrap();
        let (mut v, mut c) = (Vec::new(), Vec::new());
        for (a, b) in ua.iter().zip(&ub) {
            let e = line.solve(*a, *b);
            v.push(e.u_end_a);
            c.push(e.i_ch);
        }
        // Alice's side: current leaving her terminal is -i_ch
        let view = PartyView { voltage: &v, current: &c, current_sign: -1.0 };
        let red = reduce_channel_noise(&view, &ua, r_a, hyp(0, r_b)).unwrap();
        for k in 0..ua.len() {
            let want_u = ub[k] * r_a / (r_a + r_b);
            let want_i = -ub[k] / (r_a + r_b);
            assert!((red.u_star[k] - want_u).abs() < 1e-12);
            assert!((red.i_star[k] - want_i).abs() < 1e-12);
        }
    }

    #[test]
    fn hypothesis_counts() {
        let b2 = ResistorBank::new(vec![1.0, 4.0]).unwrap();
        let h = enumerate_hypotheses(0, &b2, Variant::IKljn).unwrap();
        let alphas: Vec<f64> = h.iter().map(|h| h.alpha(1.0)).collect();
        assert_eq!(alphas, vec![1.0, 4.0]);
        assert!(enumerate_hypotheses(0, &b2, Variant::Kljn).unwrap().is_empty());
        let b4 = ResistorBank::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(enumerate_hypotheses(1, &b4, Variant::IMkljn).unwrap().len(), 4);
        assert!(enumerate_hypotheses(4, &b4, Variant::IMkljn).is_err());
    }

    /// An evaluation over 100 samples whose reduced level sits at `x` times
    /// the prediction.
    fn eval(index: usize, r: f64, rho: f64, x: f64) -> HypothesisEvaluation {
        let threshold = 0.3;
        let c = Correlation { raw: rho, normalized: rho };
        let m = Correlation { raw: -rho, normalized: -rho };
        HypothesisEvaluation {
            hypothesis: hyp(index, r),
            test: HypothesisResult { corr_u: c, corr_i: m, threshold, n_samples: 100, accept: rho.abs() < threshold },
            reduced_level: x,
            predicted_level: 1.0,
        }
    }

    #[test]
    fn fusion_rule() {
        let p = DecisionPolicy::default();
        // unique accept with a consistent level
        let d = decide_slot_intelligent(&[eval(0, 1.0, 0.6, 1.6), eval(1, 4.0, 0.05, 1.02)], &p);
        assert!(matches!(d, IntelligentDecision::Accept { index: 1, .. }));
        // the level favours the hypothesis whose correlation test failed
        let d = decide_slot_intelligent(&[eval(0, 1.0, 0.35, 1.0), eval(1, 4.0, 0.05, 1.5)], &p);
        assert_eq!(d, IntelligentDecision::Discard(DiscardReason::Inconsistent));
        // both pass and nothing separates them
        let d = decide_slot_intelligent(&[eval(0, 1.0, 0.1, 1.0), eval(1, 4.0, 0.1, 1.005)], &p);
        assert_eq!(d, IntelligentDecision::Discard(DiscardReason::Inconclusive));
        let d = decide_slot_intelligent(&[eval(0, 1.0, 0.5, 1.2), eval(1, 4.0, 0.6, 1.5)], &p);
        assert_eq!(d, IntelligentDecision::Discard(DiscardReason::Inconclusive));
        let d = decide_slot_intelligent(&[eval(0, 1.0, 0.0, 1.0), eval(1, 1.0, 0.5, 1.0)], &p);
        assert_eq!(d, IntelligentDecision::Degenerate);
        let d = decide_slot_intelligent(&[], &p);
        assert_eq!(d, IntelligentDecision::Discard(DiscardReason::Inconclusive));
    }

    #[test]
    fn likelihood_of_reduced_level() {
        let mut e = eval(0, 1.0, 0.0, 0.5);
        e.predicted_level = 0.25;
        assert!((hypothesis_nll(&e) - 50.0 * (2.0 + 0.25f64.ln())).abs() < 1e-12);
        assert_eq!(hypothesis_nll(&eval(0, 1.0, 0.0, 0.0)), f64::INFINITY);
    }

    #[test]
    fn wrong_hypothesis_loses_by_the_log_variance_ratio() {
        // own R_L = 1 facing R_H = 4: the wrong reduced level 0.09 + 0.16
        // matches its own prediction 0.25, so only the ln σ² terms differ
        let (s_h, s_l) = (4.0 / 25.0, 0.25);
        let n = 1000;
        let mk = |r: f64, level: f64, pred: f64| {
            let mut e = eval(if r == 1.0 { 0 } else { 1 }, r, 0.0, level);
            e.test.n_samples = n;
            e.predicted_level = pred;
            e
        };
        let right = hypothesis_nll(&mk(4.0, s_h, s_h));
        let wrong = hypothesis_nll(&mk(1.0, 0.09 + s_h, s_l));
        let per_sample: f64 = 0.5 * (s_l / s_h).ln();
        assert!(((wrong - right) / n as f64 - per_sample).abs() < 1e-12);
    }
}
