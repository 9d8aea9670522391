//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion that is expected to hold fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtms_core::index::SignalKind;
use rtms_core::ipa::{dwt_step, ipa_value, sym8_hi, FILTER_LEN, SYM8_LO};
use rtms_core::session::synth::{HrEpisode, HrSpec, PupilEpisode, PupilSpec};
use rtms_core::session::{
    calibrate_inputs, generate_synthetic, replay_indices, run_calibration, run_replay, write_synthetic, Entry,
    ReplaySpeed, SessionConfig, SessionLog, SyntheticSpec,
};
use rtms_core::session::runner::compute_indices;
use rtms_core::stats::reference::{check_cells, discrepancy_report, summaries, CellCheck, Measure, HALF_UNIT};
use rtms_core::stats::{
    anova_from_summary, anova_oneway, describe, f_critical, pairwise_compare, pearson_p, t_critical_two_sided,
    GroupSummary,
};
use rtms_core::stress::{stress_index_series, HrPoint, StressConfig};
use rtms_core::{ConditionMode, HintDb, Millis};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

const HINTS: &str = include_str!("../data/hints.toml");
const TWO_EPISODES: &str = include_str!("fixtures/two_episodes.toml");

// A1 / A2 bounds
const PERF_F: (f64, f64) = (109.4, 110.5);
const TIME_F: (f64, f64) = (48.0, 49.0);
const EXPERTISE_F: (f64, f64) = (1.40, 1.55);
// A5 trigger windows, seconds
const COGNITIVE_WINDOW: (f64, f64) = (300.0, 311.0);
const STRESS_WINDOW: (f64, f64) = (500.0, 535.0);
const A5_BUDGET: Duration = Duration::from_secs(10);
// A6
const UNION_SEEDS: u64 = 100;
// A7
const MATH_TOL: f64 = 1e-9;
const CRITICAL_TOL: f64 = 1e-3;
const RANDOM_VECTORS: usize = 120;
const SUITE_BUDGET: Duration = Duration::from_secs(60);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Independent oracles

/// One-way ANOVA from summaries by the textbook sums of squares.
fn oracle_anova(groups: &[(f64, f64)], n: f64) -> (f64, f64, f64) {
    let k = groups.len() as f64;
    let grand = groups.iter().map(|g| g.0).sum::<f64>() / k;
    let ssb: f64 = groups.iter().map(|g| n * (g.0 - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| (n - 1.0) * g.1 * g.1).sum();
    let (df1, df2) = (k - 1.0, k * n - k);
    let f = (ssb / df1) / (ssw / df2);
    let p = 1.0 - FisherSnedecor::new(df1, df2).unwrap().cdf(f);
    (f, df2, p)
}

/// Pooled two-sample t for equal n, with F = t^2 and CD = 2t/sqrt(df).
fn oracle_pair(a: (f64, f64), b: (f64, f64), n: f64) -> (f64, f64) {
    let sp2 = (a.1 * a.1 + b.1 * b.1) / 2.0;
    let t = (a.0 - b.0) / (sp2 * 2.0 / n).sqrt();
    let df = 2.0 * n - 2.0;
    (t * t, 2.0 * t.abs() / df.sqrt())
}

fn oracle_pair_range(a: (f64, f64), b: (f64, f64), n: f64) -> ((f64, f64), (f64, f64)) {
    let (mut f, mut cd) = ((f64::MAX, f64::MIN), (f64::MAX, f64::MIN));
    for mask in 0..16 {
        let e = |bit: u32| if mask & (1 << bit) != 0 { HALF_UNIT } else { -HALF_UNIT };
        let (fv, cv) = oracle_pair((a.0 + e(0), a.1 + e(1)), (b.0 + e(2), b.1 + e(3)), n);
        f = (f.0.min(fv), f.1.max(fv));
        cd = (cd.0.min(cv), cd.1.max(cv));
    }
    (f, cd)
}

fn admits(range: (f64, f64), printed: f64) -> bool {
    printed + HALF_UNIT >= range.0 && printed - HALF_UNIT <= range.1
}

fn oracle_pearson_p(r: f64, n: f64) -> f64 {
    let df = n - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

/// Half-sample symmetric extension by `pad` on each side, full
/// convolution, keep odd positions.
fn oracle_dwt(x: &[f64], f: &[f64; FILTER_LEN]) -> Vec<f64> {
    let n = x.len() as i64;
    let pad = FILTER_LEN as i64 - 1;
    let ext: Vec<f64> = (-pad..n + pad)
        .map(|j| {
            let m = if j < 0 {
                -1 - j
            } else if j >= n {
                2 * n - 1 - j
            } else {
                j
            };
            x[m as usize]
        })
        .collect();
    let full: Vec<f64> = (0..ext.len() + FILTER_LEN - 1)
        .map(|m| {
            (0..FILTER_LEN)
                .filter(|&k| m >= k && m - k < ext.len())
                .map(|k| f[k] * ext[m - k])
                .sum()
        })
        .collect();
    let out_len = (x.len() + FILTER_LEN - 1) / 2;
    (0..out_len).map(|i| full[2 * i + 1 + pad as usize]).collect()
}

fn table_inputs(measure: Measure) -> Vec<(f64, f64)> {
    summaries(measure).iter().map(|g| (g.mean, g.sd)).collect()
}

// ---------------------------------------------------------------------------
// Criteria

fn a1() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (measure, band) in [(Measure::Performance, PERF_F), (Measure::Time, TIME_F)] {
        let r = anova_from_summary(&summaries(measure)).unwrap();
        let (f_oracle, df2, _) = oracle_anova(&table_inputs(measure), 30.0);
        let hit = r.f >= band.0 && r.f <= band.1 && r.df1 == 3.0 && r.df2 == 116.0;
        let agrees = (r.f - f_oracle).abs() < 1e-9 * f_oracle && df2 == 116.0;
        ok &= hit && agrees;
        parts.push(format!("{measure:?} F[{},{}] = {:.3} (band {:?})", r.df1, r.df2, r.f, band));
    }
    verdict(ok, parts.join("; "))
}

fn a2() -> Verdict {
    let r = anova_from_summary(&summaries(Measure::Expertise)).unwrap();
    let (f_oracle, _, p_oracle) = oracle_anova(&table_inputs(Measure::Expertise), 30.0);
    let ok = r.f >= EXPERTISE_F.0
        && r.f <= EXPERTISE_F.1
        && r.p > 0.05
        && (r.f - f_oracle).abs() < 1e-9
        && (r.p - p_oracle).abs() < 1e-6;
    verdict(ok, format!("F[3,116] = {:.3}, p = {:.3}", r.f, r.p))
}

fn describe_cell(c: &CellCheck, f_ok: bool, cd_ok: bool) -> String {
    format!(
        "{}-{} F {:.2} in [{:.2}, {:.2}]{} CD {:.2} in [{:.3}, {:.3}]{}",
        c.a,
        c.b,
        c.printed.f,
        c.f_range.lo,
        c.f_range.hi,
        if f_ok { "" } else { " MISS" },
        c.printed.cd,
        c.cd_range.lo,
        c.cd_range.hi,
        if cd_ok { "" } else { " MISS" },
    )
}

fn a3() -> Verdict {
    let mut ok = true;
    let mut misses = Vec::new();
    let mut reproduced = 0;
    let mut counted = 0;
    for measure in [Measure::Time, Measure::Performance] {
        let inputs = table_inputs(measure);
        for c in check_cells(measure) {
            let (f_rng, cd_rng) = oracle_pair_range(inputs[c.printed.a], inputs[c.printed.b], 30.0);
            // library ranges must match the oracle's
            let same = (c.f_range.lo - f_rng.0).abs() < 1e-9 * f_rng.1
                && (c.f_range.hi - f_rng.1).abs() < 1e-9 * f_rng.1
                && (c.cd_range.lo - cd_rng.0).abs() < 1e-9
                && (c.cd_range.hi - cd_rng.1).abs() < 1e-9;
            ok &= same;
            if c.excluded {
                continue;
            }
            counted += 1;
            let (f_ok, cd_ok) = (admits(f_rng, c.printed.f), admits(cd_rng, c.printed.cd));
            if f_ok && cd_ok {
                reproduced += 1;
            } else {
                ok = false;
                misses.push(format!("{measure:?} {}", describe_cell(&c, f_ok, cd_ok)));
            }
        }
    }
    let report = discrepancy_report();
    let report_ok = report.contains("138.01") && report.contains("Control-CogLoad");
    ok &= report_ok;
    let mut detail = format!("{reproduced}/{counted} non-excluded cells reproduced; discrepancy report emitted: {report_ok}");
    if !misses.is_empty() {
        detail.push_str(&format!("; irreproducible: {}", misses.join(" | ")));
    }
    verdict(ok, detail)
}

fn a4() -> Verdict {
    let cases: [(f64, usize, bool); 9] = [
        (0.48, 30, true),
        (0.25, 30, false),
        (0.19, 30, false),
        (0.18, 30, false),
        (-0.46, 30, true),
        (-0.18, 30, false),
        (-0.10, 30, false),
        (-0.09, 30, false),
        (0.23, 120, true),
    ];
    let mut ok = true;
    let mut wrong = Vec::new();
    for (r, n, significant) in cases {
        let p = pearson_p(r, n);
        let agrees = (p - oracle_pearson_p(r, n as f64)).abs() < 1e-8;
        if (p < 0.05) != significant || !agrees {
            ok = false;
            wrong.push(format!("r={r} n={n} p={p:.4}"));
        }
    }
    verdict(ok, if wrong.is_empty() { "9/9 classifications match".to_string() } else { wrong.join(", ") })
}

fn session_config(dir: &Path, mode: ConditionMode, cooldown_s: f64) -> SessionConfig {
    SessionConfig {
        mode,
        cooldown_s,
        streams: dir.join("task"),
        rosl: dir.join("rosl"),
        hints: dir.join("hints.toml"),
        baseline_dir: dir.to_path_buf(),
        ..SessionConfig::default()
    }
}

fn triggers(log: &SessionLog) -> Vec<(Millis, SignalKind)> {
    log.entries()
        .iter()
        .filter_map(|e| match e.entry {
            Entry::Trigger { source, .. } => Some((e.t, source)),
            _ => None,
        })
        .collect()
}

fn in_window(t: Millis, w: (f64, f64)) -> bool {
    let s = t as f64 / 1000.0;
    s >= w.0 && s <= w.1
}

fn prepare_fixture(dir: &Path) {
    let spec = SyntheticSpec::from_toml(TWO_EPISODES).unwrap();
    write_synthetic(&spec, dir).unwrap();
    std::fs::write(dir.join("hints.toml"), HINTS).unwrap();
    run_calibration(&session_config(dir, ConditionMode::Combined, 30.0)).unwrap();
}

fn a5() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    prepare_fixture(dir.path());
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in ConditionMode::ALL {
        let cooldown = if mode == ConditionMode::Combined { 0.0 } else { 30.0 };
        let log = run_replay(&session_config(dir.path(), mode, cooldown)).unwrap();
        let tr = triggers(&log);
        let cog: Vec<Millis> = tr.iter().filter(|x| x.1 == SignalKind::Cognitive).map(|x| x.0).collect();
        let st: Vec<Millis> = tr.iter().filter(|x| x.1 == SignalKind::Stress).map(|x| x.0).collect();
        let good = match mode {
            ConditionMode::Control => tr.is_empty(),
            ConditionMode::Cognitive => tr.len() == 1 && cog.len() == 1 && in_window(cog[0], COGNITIVE_WINDOW),
            ConditionMode::Stress => tr.len() == 1 && st.len() == 1 && in_window(st[0], STRESS_WINDOW),
            ConditionMode::Combined => {
                cog.iter().any(|&t| in_window(t, COGNITIVE_WINDOW)) && st.iter().any(|&t| in_window(t, STRESS_WINDOW))
            }
        };
        ok &= good && log.check_grammar().is_ok();
        let fmt: Vec<String> = tr.iter().map(|(t, s)| format!("{s}@{:.0}s", *t as f64 / 1000.0)).collect();
        parts.push(format!("{mode}: [{}]", fmt.join(" ")));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < A5_BUDGET;
    verdict(ok, format!("{} in {:.2?}", parts.join(", "), elapsed))
}

fn random_spec(rng: &mut ChaCha8Rng, seed: u64) -> SyntheticSpec {
    let mut pupil = PupilSpec::default();
    let mut hr = HrSpec {
        noise_sd_bpm: rng.random_range(0.01..0.5),
        ..HrSpec::default()
    };
    let mut t = 100.0;
    for _ in 0..rng.random_range(0..3) {
        let t0 = t + rng.random_range(0.0..40.0);
        let t1 = t0 + rng.random_range(5.0..30.0);
        pupil.episodes.push(PupilEpisode {
            t0,
            t1,
            tone_hz: rng.random_range(5.0..14.0),
            amplitude_mm: rng.random_range(0.05..0.4),
        });
        t = t1;
    }
    let mut t = 100.0;
    for _ in 0..rng.random_range(0..3) {
        let t0 = t + rng.random_range(0.0..40.0);
        let t1 = t0 + rng.random_range(10.0..60.0);
        hr.episodes.push(HrEpisode {
            t0,
            t1,
            slope_bpm_per_s: rng.random_range(-0.5..0.2),
        });
        t = t1;
    }
    SyntheticSpec {
        seed,
        duration_s: 300.0,
        rosl_s: 90.0,
        pupil: Some(pupil),
        hr: Some(hr),
        gaze: None,
        client: Vec::new(),
    }
}

fn a6() -> Verdict {
    // byte-identical replays, including realtime pacing
    let dir = tempfile::tempdir().unwrap();
    prepare_fixture(dir.path());
    let cfg = session_config(dir.path(), ConditionMode::Combined, 30.0);
    let first = run_replay(&cfg).unwrap().to_jsonl();
    let second = run_replay(&cfg).unwrap().to_jsonl();
    let paced = run_replay(&SessionConfig {
        replay_speed: ReplaySpeed::Realtime,
        time_scale: 20_000.0,
        ..cfg.clone()
    })
    .unwrap()
    .to_jsonl();
    let identical = first == second && first == paced;

    // union of trigger instants under zero cooldown and timeout
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut holds, mut total, mut both) = (0, 0, 0);
    for seed in 0..UNION_SEEDS {
        let spec = random_spec(&mut rng, seed);
        let s = generate_synthetic(&spec).unwrap();
        let base = SessionConfig {
            cooldown_s: 0.0,
            timeout_s: 0.0,
            ..SessionConfig::default()
        };
        let cal = calibrate_inputs(&SessionConfig { mode: ConditionMode::Combined, ..base.clone() }, &s.rosl).unwrap();
        let indices = compute_indices(&base, &s.task, &cal.profiles).unwrap();
        let run = |mode| {
            let cfg = SessionConfig { mode, ..base.clone() };
            let hints = HintDb::from_toml(HINTS).unwrap();
            triggers(&replay_indices(&cfg, &s.task, &indices, &cal.profiles, hints).unwrap())
        };
        let mut union = run(ConditionMode::Cognitive);
        let stress = run(ConditionMode::Stress);
        if !union.is_empty() && !stress.is_empty() {
            both += 1;
        }
        union.extend(stress);
        union.sort();
        let combined = run(ConditionMode::Combined);
        total += combined.len();
        if combined == union {
            holds += 1;
        }
    }
    let ok = identical && holds == UNION_SEEDS && both > 0;
    verdict(
        ok,
        format!(
            "replay bytes identical (max x2, realtime): {identical}; union holds on {holds}/{UNION_SEEDS} seeds \
             ({total} combined triggers, {both} seeds with both sources)"
        ),
    )
}

fn a7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fails = Vec::new();
    let hi = sym8_hi();

    // DWT against the brute-force oracle
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_VECTORS {
        let n = rng.random_range(16..400);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        for f in [&SYM8_LO, &hi] {
            let (got, want) = (dwt_step(&x, f), oracle_dwt(&x, f));
            if got.len() != want.len() {
                worst = f64::INFINITY;
            }
            for (g, w) in got.iter().zip(&want) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    if worst > MATH_TOL {
        fails.push(format!("dwt max err {worst:e}"));
    }

    // IPA scale and shift invariance, zero on constant
    let fs = 60.0;
    let mut bad_inv = 0;
    for _ in 0..RANDOM_VECTORS {
        let n = rng.random_range(200..900);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..6.0)).collect();
        let (a, b) = (rng.random_range(0.1..20.0), rng.random_range(-50.0..50.0));
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (vx, vy) = (ipa_value(&x, fs, 2).unwrap(), ipa_value(&y, fs, 2).unwrap());
        if (vx - vy).abs() > MATH_TOL {
            bad_inv += 1;
        }
        if ipa_value(&vec![b; n], fs, 2).unwrap() != 0.0 {
            bad_inv += 1;
        }
    }
    if bad_inv > 0 {
        fails.push(format!("ipa invariance broken on {bad_inv} vectors"));
    }

    // stress slope exactness on linear heart rate
    let mut worst_slope = 0.0f64;
    for _ in 0..RANDOM_VECTORS {
        let (y0, slope) = (rng.random_range(50.0..120.0), rng.random_range(-1.0..1.0));
        let hr: Vec<HrPoint> = (0..rng.random_range(40..200u64))
            .map(|i| HrPoint {
                t: i * 1000,
                bpm: y0 + slope * i as f64,
            })
            .collect();
        for v in stress_index_series(&hr, &StressConfig::default()).unwrap().values() {
            worst_slope = worst_slope.max((v - (-slope).max(0.0)).abs());
        }
    }
    if worst_slope > MATH_TOL {
        fails.push(format!("stress slope err {worst_slope:e}"));
    }

    // ANOVA path equivalence and F = t^2
    let mut worst_anova = 0.0f64;
    for _ in 0..RANDOM_VECTORS {
        let k = rng.random_range(2..6);
        let groups: Vec<(String, Vec<f64>)> = (0..k)
            .map(|g| {
                let n = rng.random_range(3..40);
                let shift = rng.random_range(-3.0..3.0);
                (format!("g{g}"), (0..n).map(|_| shift + rng.random_range(-10.0..10.0)).collect())
            })
            .collect();
        let raw = anova_oneway(&groups).unwrap();
        let summ = anova_from_summary(&describe(&groups).unwrap()).unwrap();
        worst_anova = worst_anova.max((raw.f - summ.f).abs() / raw.f.max(1.0));
        let two = &groups[..2];
        let s: Vec<GroupSummary> = describe(two).unwrap();
        let pair = pairwise_compare(&s[0], &s[1], 1).unwrap();
        let f2 = anova_oneway(two).unwrap().f;
        worst_anova = worst_anova.max((pair.f - f2).abs() / f2.max(1.0));
        worst_anova = worst_anova.max((pair.t * pair.t - pair.f).abs() / f2.max(1.0));
    }
    if worst_anova > MATH_TOL {
        fails.push(format!("anova identities err {worst_anova:e}"));
    }

    // distribution tails against published critical values
    let fc = f_critical(0.05, 3.0, 116.0);
    let tc = t_critical_two_sided(0.05, 58.0);
    if (fc - 2.683).abs() > CRITICAL_TOL || (tc - 2.0017).abs() > CRITICAL_TOL {
        fails.push(format!("critical values F {fc:.4} t {tc:.4}"));
    }

    let ok = fails.is_empty();
    let detail = if ok {
        format!(
            "dwt err {worst:.1e}, slope err {worst_slope:.1e}, anova err {worst_anova:.1e}, \
             F(3,116) crit {fc:.4}, t(58) crit {tc:.4}, {RANDOM_VECTORS} vectors each"
        )
    } else {
        fails.join("; ")
    };
    verdict(ok, detail)
}

/// Criteria whose failure is a known property of the reference numbers
/// rather than of the implementation.
const EXPECTED_FAILURES: [&str; 1] = ["A3"];

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name
    // filter selects criteria by id.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Verdict); 7] = [
        ("A1", "omnibus ANOVA from summaries", a1),
        ("A2", "expertise null", a2),
        ("A3", "pairwise cells", a3),
        ("A4", "correlation significance", a4),
        ("A5", "end-to-end triggers", a5),
        ("A6", "determinism and union", a6),
        ("A7", "signal-math properties", a7),
    ];
    let start = Instant::now();
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let expected = EXPECTED_FAILURES.contains(&id);
        let tag = match (v.pass, expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        if !v.pass && !expected {
            unexpected += 1;
        }
        println!("{id} {tag} [{name}] {:.2?}: {}", t.elapsed(), v.detail);
    }
    let total = start.elapsed();
    let in_budget = total < SUITE_BUDGET;
    println!("acceptance: {:.2?} total (budget {:?}) {}", total, SUITE_BUDGET, if in_budget { "PASS" } else { "FAIL" });
    if unexpected > 0 || !in_budget {
        std::process::exit(1);
    }
}
