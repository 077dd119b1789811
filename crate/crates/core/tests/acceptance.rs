//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use kljn_core::adversary::eve_bit_from_pair;
use kljn_core::circuit::{measure_power_balance, Line, Loop, LoopSample};
use kljn_core::experiments::{
    adapt_to_variant, benchmark_speedup, compare_variants, run_sweep, write_metrics_csv, EveConfig, EveModel,
    SweepSpec, SweepValue,
};
use kljn_core::noise::{sample_noise, NoiseParams, RngStream};
use kljn_core::protocol::{
    hypothesis_test, reduce_channel_noise, run_key_exchange_observed, run_slot_with_indices, run_transient_walk,
    ChannelTrace, Hypothesis, Party, ProtocolConfig, TableSource, TransientConfig, Variant, Wire,
};
use kljn_core::stats::{cross_correlation, mean_square};
use kljn_core::truthtable::{build_public_table, ResistorBank};
use kljn_core::Result;

const PRIOR_KEY: &str = "1011001110001011";

fn two_bank() -> ResistorBank {
    ResistorBank::new(vec![1.0, 4.0]).unwrap()
}

fn kljn(n_s: usize) -> ProtocolConfig {
    ProtocolConfig::new(Variant::Kljn, two_bank(), NoiseParams::normalized(), n_s)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn generators(r_a: f64, r_b: f64, params: &NoiseParams, n: usize, stream: &RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        sample_noise(r_a, params, n, &stream.child("alice"))?.samples,
        sample_noise(r_b, params, n, &stream.child("bob"))?.samples,
    ))
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn fdt_levels() -> Result<Verdict> {
    let params = NoiseParams::si(1e18, 500.0)?;
    let series = sample_noise(1000.0, &params, 1_000_000, &RngStream::root(1))?;
    let ms = mean_square(&series.samples)?;
    let expected = params.variance(1000.0);
    verdict(
        rel(ms, expected) < 0.01 && rel(expected, 27.61) < 1e-3,
        format!("<U^2> = {ms:.3} V^2, 4kTRdf = {expected:.3} V^2"),
    )
}

fn channel_levels() -> Result<Verdict> {
    let config = kljn(1_000_000);
    let table = build_public_table(2)?;
    let root = RngStream::root(2);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a, b, u, i) in [("HL", 1, 0, 0.8, 0.2), ("LL", 0, 0, 0.5, 0.5), ("HH", 1, 1, 2.0, 0.125)] {
        let (trace, _, _) = run_slot_with_indices(&config, &root.child(name), &table, a, b)?;
        let ms_u = mean_square(&trace.channel.u_end_a)?;
        let ms_i = mean_square(&trace.channel.i_ch)?;
        ok &= rel(ms_u, u) < 0.02 && rel(ms_i, i) < 0.02;
        parts.push(format!("{name} ({ms_u:.4}, {ms_i:.4})"));
    }
    verdict(ok, parts.join(", "))
}

fn second_law() -> Result<Verdict> {
    let (u_a, u_b) = generators(1.0, 4.0, &NoiseParams::normalized(), 1_000_000, &RngStream::root(3))?;
    let lp = Loop::new(1.0, 4.0)?;
    let trace: Vec<LoopSample> = u_a.iter().zip(&u_b).map(|(&a, &b)| lp.solve(a, b)).collect();
    let p = measure_power_balance(&trace, 1.0, 4.0)?;
    let imbalance = (p.p_l_to_h - p.p_h_to_l).abs() / p.p_l_to_h;
    verdict(
        imbalance < 0.02 && rel(p.p_l_to_h, 0.16) < 0.02 && rel(p.p_h_to_l, 0.16) < 0.02,
        format!("P_LH = {:.5}, P_HL = {:.5}, imbalance {:.2}%", p.p_l_to_h, p.p_h_to_l, imbalance * 100.0),
    )
}

fn zero_cross_correlation() -> Result<Verdict> {
    let (slots, n) = (1000, 10_000);
    let root = RngStream::root(4);
    let mut within = 0;
    for s in 0..slots {
        let (r_a, r_b) = if s % 2 == 0 { (4.0, 1.0) } else { (1.0, 4.0) };
        let (u_a, u_b) = generators(r_a, r_b, &NoiseParams::normalized(), n, &root.child(&format!("slot/{s}")))?;
        let ch = ChannelTrace::solve(&u_a, &u_b, &Line::new(r_a, r_b, 0.0)?, 0.0)?;
        let rho = cross_correlation(&ch.u_end_a, &ch.i_ch)?.normalized;
        within += (rho.abs() <= 4.0 / (n as f64).sqrt()) as usize;
    }
    let share = within as f64 / slots as f64;
    verdict(share >= 0.99, format!("{within}/{slots} slots within 4/sqrt(N)"))
}

fn hypothesis_identities() -> Result<Verdict> {
    let params = NoiseParams::normalized();
    let bank = two_bank();
    let root = RngStream::root(5);
    let (trials, n) = (1000, 10_000);
    let mut accepted = 0;
    for t in 0..trials {
        let (a, b) = if t % 2 == 0 { (0, 1) } else { (1, 0) };
        let (r_a, r_b) = (bank.get(a), bank.get(b));
        let (u_a, u_b) = generators(r_a, r_b, &params, n, &root.child(&format!("trial/{t}")))?;
        let ch = ChannelTrace::solve(&u_a, &u_b, &Line::new(r_a, r_b, 0.0)?, 0.0)?;
        let (party, own, own_r, other, other_r) = if t % 4 < 2 {
            (Party::Alice, &u_a, r_a, b, r_b)
        } else {
            (Party::Bob, &u_b, r_b, a, r_a)
        };
        let hyp = Hypothesis { index: other, assumed_other_resistance: other_r };
        let reduced = reduce_channel_noise(&ch.view(party), own, own_r, hyp)?;
        accepted += hypothesis_test(own, &reduced, 3.0)?.accept as usize;
    }
    let rate = accepted as f64 / trials as f64;

    // Bob on R_B = 1 facing R_A = 4 (alpha = 4) while assuming alpha' = 1.
    let (u_a, u_b) = generators(4.0, 1.0, &params, 1_000_000, &root.child("incorrect"))?;
    let ch = ChannelTrace::solve(&u_a, &u_b, &Line::new(4.0, 1.0, 0.0)?, 0.0)?;
    let hyp = Hypothesis { index: 0, assumed_other_resistance: 1.0 };
    let reduced = reduce_channel_noise(&ch.view(Party::Bob), &u_b, 1.0, hyp)?;
    let raw = hypothesis_test(&u_b, &reduced, 3.0)?.corr_i.raw;
    let expected = mean_square(&u_b)? / 1.0 * (1.0 / 5.0 - 1.0 / 2.0);
    verdict(
        rate >= 0.99 && rel(raw, expected) < 0.05,
        format!("correct accepted {:.1}%, incorrect raw {raw:.4} vs {expected:.4}", rate * 100.0),
    )
}

fn degeneracy() -> Result<Verdict> {
    let (u_a, u_b) = generators(1.0, 4.0, &NoiseParams::normalized(), 100_000, &RngStream::root(6))?;
    let ch = ChannelTrace::solve(&u_a, &u_b, &Line::new(1.0, 4.0, 0.0)?, 0.0)?;
    let mut worst: f64 = 0.0;
    for (party, own, own_r) in [(Party::Alice, &u_a, 1.0), (Party::Bob, &u_b, 4.0)] {
        for (index, r_h) in [(0, 1.0), (1, 4.0)] {
            let reduced = reduce_channel_noise(&ch.view(party), own, own_r, Hypothesis { index, assumed_other_resistance: r_h })?;
            for (u, i) in reduced.u_star.iter().zip(&reduced.i_star) {
                if i.abs() > 1e-12 {
                    worst = worst.max(rel(u / i, -own_r));
                }
            }
        }
    }
    verdict(worst < 1e-9, format!("max relative deviation of u*/i* from -R_own: {worst:.2e}"))
}

fn intelligent_speedup() -> Result<Verdict> {
    let b = benchmark_speedup(&kljn(10), 0.01, (4, 256), 1000, 30, 7)?;
    let (kl, ik) = b.median();
    let pooled_kl: usize = b.replicates.iter().map(|r| r.0).sum();
    let pooled_ik: usize = b.replicates.iter().map(|r| r.1).sum();
    verdict(
        b.p_value < 0.05 && pooled_ik <= pooled_kl,
        format!(
            "median required N: KLJN {kl}, iKLJN {ik}; {} wins, {} ties, {} losses, sign test p = {:.1e}",
            b.wins, b.ties, b.losses, b.p_value
        ),
    )
}

fn ideal_wire_secrecy() -> Result<Verdict> {
    let base = kljn(1000);
    let configs = Variant::ALL
        .iter()
        .map(|&v| adapt_to_variant(&base, v, Some(PRIOR_KEY)))
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_variants(&configs, 10_000, 8, &EveConfig::default())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        let sigma = (0.25 / r.eve_guesses as f64).sqrt();
        ok &= r.eve_guesses > 0 && (r.eve_bit_success - 0.5).abs() <= 4.0 * sigma;
        parts.push(format!("{} {:.3}", r.param_value, r.eve_bit_success));
    }
    verdict(ok, parts.join(", "))
}

fn leak_monotonicity() -> Result<Verdict> {
    let base = kljn(1000).with_wire(Wire::Series { r_w: 0.05 });
    let spec = SweepSpec {
        base: base.clone(),
        param: "samples_per_slot".into(),
        values: [1e5, 1e4, 1e3, 1e2].map(SweepValue::Number).to_vec(),
        slots: 3000,
        seed: 9,
        eve: EveConfig::default(),
        prior_key: None,
    };
    let rows = run_sweep(&spec)?;
    let success: Vec<f64> = rows.iter().map(|r| r.eve_bit_success).collect();
    let decreasing = success.windows(2).all(|w| w[1] < w[0]);

    let mut at_1e4 = base;
    at_1e4.samples_per_slot = 10_000;
    let exact = EveConfig { model: EveModel::ExactPair, ..EveConfig::default() };
    let four = adapt_to_variant(&at_1e4, Variant::Mkljn, None)?;
    let rows = compare_variants(&[at_1e4, four], 3000, 10, &exact)?;
    let (acc2, acc4) = (rows[0].eve_pair_acc, rows[1].eve_pair_acc);
    verdict(
        decreasing && acc4 < acc2,
        format!(
            "eve success over N = 1e5..1e2: {:?}; pair accuracy n=2 {acc2:.3}, n=4 {acc4:.3}",
            success.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn tables_and_keyed_secrecy() -> Result<Verdict> {
    let mut tables_ok = true;
    for n in 2..=8 {
        let t = build_public_table(n)?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    tables_ok &= t.bit_of(i, j)?.is_none();
                    continue;
                }
                tables_ok &= t.bit_of(i, j)? != t.bit_of(j, i)?;
                for k in [i.wrapping_sub(1), i + 1] {
                    if k < n && k != j && (k < j) == (i < j) {
                        tables_ok &= t.bit_of(i, j)? != t.bit_of(k, j)?;
                    }
                }
            }
        }
    }

    // Eve is handed the true ordered pair but only knows the public table.
    let config = ProtocolConfig::new(Variant::Kkljn, two_bank(), NoiseParams::normalized(), 200)
        .with_table_source(TableSource::Keyed { prior_key: PRIOR_KEY.into() });
    let public = build_public_table(2)?;
    let (mut guesses, mut hits) = (0usize, 0usize);
    let ex = run_key_exchange_observed(&config, 10_000, 11, |_, stream, _, truth| {
        if truth.secure {
            let (bit, _) = eve_bit_from_pair((truth.alice_index, truth.bob_index), Some(&public), stream)?;
            guesses += 1;
            hits += (Some(bit) == truth.bit) as usize;
        }
        Ok(None)
    })?;
    let success = hits as f64 / guesses as f64;
    let sigma = (0.25 / guesses as f64).sqrt();
    verdict(
        tables_ok && (success - 0.5).abs() <= 4.0 * sigma && ex.bit_errors() == 0,
        format!(
            "tables n <= 8 {}; keyed eve success {success:.4} over {guesses} bits (4 sigma = {:.4})",
            if tables_ok { "hold" } else { "broken" },
            4.0 * sigma
        ),
    )
}

fn transient_protocol() -> Result<Verdict> {
    let params = NoiseParams::si(1e18, 500.0)?;
    let config = ProtocolConfig::new(Variant::Kljn, ResistorBank::new(vec![1000.0, 4000.0])?, params, 1000);
    let root = RngStream::root(12);
    let mut ok = true;

    let quick = TransientConfig::new(5000, 20.0);
    for s in 0..50 {
        let targets = if s % 2 == 0 { (1000.0, 4000.0) } else { (4000.0, 4000.0) };
        let out = run_transient_walk(&config, &quick, Some(targets), &root.child(&format!("walk/{s}")))?;
        for path in [&out.r_a, &out.r_b] {
            ok &= path[0] == 2500.0;
            ok &= path.windows(2).all(|w| (w[1] - w[0]).abs() <= 20.0 + 1e-9);
        }
        let reached = *out.r_a.last().unwrap() == targets.0 && *out.r_b.last().unwrap() == targets.1;
        ok &= out.cancel == !reached;
    }
    let short = TransientConfig::new(10, 20.0);
    let out = run_transient_walk(&config, &short, Some((1000.0, 4000.0)), &root.child("short"))?;
    ok &= out.cancel;

    let long = TransientConfig::new(400_000, 5.0);
    let out = run_transient_walk(&config, &long, None, &root.child("long"))?;
    let mut worst: f64 = 0.0;
    for w in 0..20 {
        let range = w * 20_000..(w + 1) * 20_000;
        let power: f64 = out.u_a[range.clone()].iter().map(|u| u * u).sum();
        let expected: f64 = out.r_a[range].iter().map(|&r| params.variance(r)).sum();
        worst = worst.max(rel(power, expected));
    }
    verdict(
        ok && worst < 0.05,
        format!(
            "walk rules {}; worst windowed variance deviation {:.2}%",
            if ok { "hold" } else { "broken" },
            worst * 100.0
        ),
    )
}

fn reproducibility() -> Result<Verdict> {
    let spec = SweepSpec {
        base: kljn(500).with_wire(Wire::Series { r_w: 0.05 }),
        param: "r_w".into(),
        values: vec![SweepValue::Number(0.0), SweepValue::Number(0.05)],
        slots: 500,
        seed: 13,
        eve: EveConfig::default(),
        prior_key: None,
    };
    let render = |spec: &SweepSpec| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_metrics_csv(&run_sweep(spec)?, &mut buf)?;
        Ok(buf)
    };
    let (a, b) = (render(&spec)?, render(&spec)?);
    let other = render(&SweepSpec { seed: 14, ..spec.clone() })?;
    verdict(a == b && a != other, format!("{} identical bytes, other seed differs: {}", a.len(), a != other))
}

type Criterion = (&'static str, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("fdt levels", fdt_levels),
        ("channel levels", channel_levels),
        ("second law", second_law),
        ("zero cross-correlation", zero_cross_correlation),
        ("hypothesis identities", hypothesis_identities),
        ("degeneracy", degeneracy),
        ("intelligent speedup", intelligent_speedup),
        ("ideal-wire secrecy", ideal_wire_secrecy),
        ("leak monotonicity", leak_monotonicity),
        ("truth tables and keyed secrecy", tables_and_keyed_secrecy),
        ("transient protocol", transient_protocol),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += (!passed) as usize;
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
