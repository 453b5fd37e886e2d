//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts its criterion.
//!
//! Criteria 1-5 share one batch of full-horizon runs (troll, expert and mixed
//! presets, seeds 1-5), computed once.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dissemination::cli::{self, Preset};
use dissemination::dynamics::{
    receiver_count_deltas, receiver_knowledge_delta, sender_count_deltas, sender_knowledge_delta,
    sender_popularity_premium,
};
use dissemination::engine::{self, Observer, World};
use dissemination::evaluation::{assess_opinion, scenario_probabilities};
use dissemination::game::{enumerate_pure_equilibria, solve_equilibrium, Cell, PayoffMatrix, SenderAction};
use dissemination::metrics::{self, pearson, QualityRecord, SnapshotRecord};
use dissemination::model::{ActorState, GlobalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const FULL_HORIZON: f64 = 10_000.0;
const SNAPSHOT_T: f64 = 800.0;

const C1_MIN_K: f64 = 0.95;
const C1_MAX_RUNTIME: Duration = Duration::from_secs(300);
const C2_F_PLUS: f64 = 0.80;
const C2_F_MINUS: f64 = 0.20;
const C2_TOL: f64 = 0.05;
const C3_MAX_DRIFT: f64 = 0.2;
const C3_MIN_GAP: f64 = 0.2;
const C5_RATIO: f64 = 2.0;
const C6_RANDOM: usize = 1_000_000;
const C6_TIES: usize = 100_000;
const C6_MAX_RUNTIME: Duration = Duration::from_secs(30);
const C7_SAMPLES: usize = 100_000;
const C7_COUNT_TOL: f64 = 1e-10;
const C7_G_TOL: f64 = 1e-12;
const C9_MAX_RUNTIME: Duration = Duration::from_secs(10);

fn report(id: &str, pass: bool, detail: &str) {
    let line = format!("[{}] {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

struct RunResult {
    initial: QualityRecord,
    last: QualityRecord,
    elapsed: Duration,
    snapshot: Option<Vec<SnapshotRecord>>,
}

#[derive(Default)]
struct SnapshotGrab(Option<Vec<SnapshotRecord>>);

impl Observer for SnapshotGrab {
    fn on_snapshot(&mut self, world: &World, _time: f64) -> std::io::Result<()> {
        self.0 = Some(metrics::snapshot(world));
        Ok(())
    }
}

fn full_run(preset: Preset, seed: u64) -> RunResult {
    let mut cfg = preset.config();
    cfg.seed = seed;
    cfg.steps_per_actor = FULL_HORIZON;
    cfg.sample_interval = FULL_HORIZON;
    cfg.snapshot_times = vec![SNAPSHOT_T];
    let mut grab = SnapshotGrab::default();
    let start = Instant::now();
    let s = engine::run(&cfg, &mut [&mut grab]).expect("run");
    RunResult {
        initial: s.initial,
        last: s.last,
        elapsed: start.elapsed(),
        snapshot: grab.0,
    }
}

struct Batch {
    troll: Vec<RunResult>,
    expert: Vec<RunResult>,
    mixed: Vec<RunResult>,
}

fn batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(|| {
        let runs = |p| SEEDS.iter().map(|&s| full_run(p, s)).collect::<Vec<_>>();
        Batch {
            troll: runs(Preset::Troll),
            expert: runs(Preset::Expert),
            mixed: runs(Preset::Mixed),
        }
    })
}

/// Status of the model-independent property criteria, attached to failures
/// of the quantitative ones.
fn property_status() -> String {
    let (p6, _) = criterion6();
    let (p7, _) = criterion7();
    let (p8, _) = criterion8();
    let s = |b: bool| if b { "pass" } else { "FAIL" };
    format!("property suite: C6 {} / C7 {} / C8 {}", s(p6), s(p7), s(p8))
}

fn finish(id: &str, pass: bool, detail: String, quantitative: bool) {
    report(id, pass, &detail);
    if !pass && quantitative {
        let status = property_status();
        report(id, false, &status);
        panic!("{id} failed: {detail}; {status}");
    }
    assert!(pass, "{id} failed: {detail}");
}

fn ks(runs: &[RunResult]) -> Vec<String> {
    runs.iter().map(|r| format!("{:.4}", r.last.mean_k)).collect()
}

#[test]
fn c1_troll_convergence() {
    let b = batch();
    let pass = b
        .troll
        .iter()
        .all(|r| r.last.mean_k >= C1_MIN_K && r.elapsed <= C1_MAX_RUNTIME);
    let slowest = b.troll.iter().map(|r| r.elapsed).max().unwrap();
    finish(
        "C1 troll convergence",
        pass,
        format!("final mean k {:?} (need >= {C1_MIN_K}), slowest run {slowest:.1?}", ks(&b.troll)),
        true,
    );
}

#[test]
fn c2_troll_quality() {
    let b = batch();
    let pass = b.troll.iter().all(|r| {
        (r.last.mean_f_plus - C2_F_PLUS).abs() <= C2_TOL && (r.last.mean_f_minus - C2_F_MINUS).abs() <= C2_TOL
    });
    let vals: Vec<String> = b
        .troll
        .iter()
        .map(|r| format!("({:.4}, {:.4})", r.last.mean_f_plus, r.last.mean_f_minus))
        .collect();
    finish(
        "C2 troll quality",
        pass,
        format!("final (f+, f-) {vals:?}, need ({C2_F_PLUS}, {C2_F_MINUS}) ± {C2_TOL}"),
        true,
    );
}

#[test]
fn c3_expert_caution() {
    let b = batch();
    let drift_ok = b
        .expert
        .iter()
        .all(|r| (r.last.mean_k - r.initial.mean_k).abs() <= C3_MAX_DRIFT);
    let gap_ok = b
        .expert
        .iter()
        .zip(&b.troll)
        .all(|(e, t)| e.last.mean_k <= t.last.mean_k - C3_MIN_GAP);
    let drifts: Vec<String> = b
        .expert
        .iter()
        .map(|r| format!("{:+.4}", r.last.mean_k - r.initial.mean_k))
        .collect();
    finish(
        "C3 expert caution",
        drift_ok && gap_ok,
        format!(
            "expert k drift {drifts:?} (|.| <= {C3_MAX_DRIFT}); expert k {:?} vs troll k {:?} (gap >= {C3_MIN_GAP})",
            ks(&b.expert),
            ks(&b.troll)
        ),
        true,
    );
}

#[test]
fn c4_mixed_ordering() {
    let b = batch();
    let pass = SEEDS.iter().enumerate().all(|(i, _)| {
        let (e, m, t) = (b.expert[i].last.mean_k, b.mixed[i].last.mean_k, b.troll[i].last.mean_k);
        e < m && m < t
    });
    finish(
        "C4 mixed ordering",
        pass,
        format!("expert {:?} < mixed {:?} < troll {:?}", ks(&b.expert), ks(&b.mixed), ks(&b.troll)),
        true,
    );
}

#[test]
fn c5_reputation_learning_correlation() {
    let b = batch();
    let mut learn_c = Vec::new();
    let mut k_c = Vec::new();
    let mut k_p = Vec::new();
    let mut cohort_k_c = [0.0; 3];
    for run in &b.expert {
        let snap = run.snapshot.as_ref().expect("snapshot at t = 800");
        assert_eq!(snap[0].sim_time, SNAPSHOT_T);
        let col = |rows: &[&SnapshotRecord], f: fn(&SnapshotRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
        let all: Vec<&SnapshotRecord> = snap.iter().collect();
        let cohort = |k0: f64| -> Vec<&SnapshotRecord> { snap.iter().filter(|r| (r.initial_k - k0).abs() < 1e-9).collect() };
        let low = cohort(0.1);
        let learned: Vec<f64> = low.iter().map(|r| r.k - r.initial_k).collect();
        learn_c.push(pearson(&learned, &col(&low, |r| r.c)).unwrap());
        k_c.push(pearson(&col(&all, |r| r.k), &col(&all, |r| r.c)).unwrap());
        k_p.push(pearson(&col(&all, |r| r.k), &col(&all, |r| r.p)).unwrap());
        for (i, k0) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let rows = cohort(k0);
            cohort_k_c[i] += pearson(&col(&rows, |r| r.k), &col(&rows, |r| r.c)).unwrap() / SEEDS.len() as f64;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let learn = mean(&learn_c);
    let kc = mean(&k_c).abs();
    let kp = mean(&k_p).abs();
    let pass = learn < 0.0 && kc >= C5_RATIO * kp;
    finish(
        "C5 reputation-learning correlation",
        pass,
        format!(
            "corr(k-k0, c | k0=0.1) = {learn:.4} (need < 0); |corr(k, c)| = {kc:.4} vs {C5_RATIO}·|corr(k, p)| = {:.4}; \
             per-cohort corr(k, c) at k0=0.1/0.5/0.9: {:.3}/{:.3}/{:.3}",
            C5_RATIO * kp,
            cohort_k_c[0],
            cohort_k_c[1],
            cohort_k_c[2]
        ),
        true,
    );
}

fn random_shaped(rng: &mut ChaCha8Rng) -> PayoffMatrix {
    let mut u = || rng.gen_range(-1.0..1.0);
    PayoffMatrix::from_payoffs(u(), u(), u(), u(), u(), u())
}

fn tied(rng: &mut ChaCha8Rng) -> PayoffMatrix {
    let mut m = random_shaped(rng);
    match rng.gen_range(0..6) {
        0 => m.u_r_forward_nofeedback = m.u_r_forward_feedback,
        1 => m.u_s_forward_feedback = m.u_s_hold,
        2 => m.u_s_forward_nofeedback = m.u_s_hold,
        3 => {
            m.u_s_forward_feedback = m.u_s_hold;
            m.u_s_forward_nofeedback = m.u_s_hold;
        }
        4 => {
            m.u_r_forward_nofeedback = m.u_r_forward_feedback;
            m.u_s_forward_feedback = m.u_s_hold;
        }
        _ => m = PayoffMatrix::from_payoffs(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    }
    m
}

fn criterion6() -> (bool, String) {
    static RESULT: OnceLock<(bool, String)> = OnceLock::new();
    RESULT
        .get_or_init(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let start = Instant::now();
            let mut empty = 0usize;
            let mut outside = 0usize;
            for i in 0..C6_RANDOM + C6_TIES {
                let m = if i < C6_RANDOM { random_shaped(&mut rng) } else { tied(&mut rng) };
                let set = enumerate_pure_equilibria(&m);
                if set.is_empty() {
                    empty += 1;
                    continue;
                }
                let p = solve_equilibrium(&m).unwrap();
                let member = match p.sender_action {
                    SenderAction::Forward => set.contains(&p.cell()),
                    // hold picks are reported as (Hold, NoFeedback) whichever hold cell was stable
                    SenderAction::Hold => set.contains(&Cell::HOLD_FEEDBACK) || set.contains(&Cell::HOLD_SILENT),
                };
                outside += usize::from(!member);
            }
            let elapsed = start.elapsed();
            let pass = empty == 0 && outside == 0 && elapsed <= C6_MAX_RUNTIME;
            (
                pass,
                format!(
                    "{C6_RANDOM} random + {C6_TIES} tied matrices: {empty} without equilibrium, {outside} picks outside the set, {elapsed:.1?} (limit {C6_MAX_RUNTIME:?})"
                ),
            )
        })
        .clone()
}

#[test]
fn c6_equilibrium_existence() {
    let (pass, detail) = criterion6();
    finish("C6 equilibrium existence", pass, detail, false);
}

fn random_state(rng: &mut ChaCha8Rng, params: &GlobalParams) -> ActorState {
    let n = params.n();
    let f = if rng.gen_bool(0.05) { n } else { rng.gen_range(0.0..=n) };
    let a: f64 = rng.gen();
    let b: f64 = rng.gen();
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let plus = lo * f;
    let minus = (hi - lo) * f;
    ActorState {
        f_count: f,
        f_plus_count: plus,
        f_minus_count: minus,
        f_rumor_count: f - plus - minus,
        reputation: rng.gen_range(0.0..=n),
        popularity: rng.gen_range(0.0..=n),
    }
}

fn criterion7() -> (bool, String) {
    static RESULT: OnceLock<(bool, String)> = OnceLock::new();
    RESULT
        .get_or_init(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let (mut worst_a, mut worst_b, mut worst_g, mut worst_d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            let mut limit_mismatch = 0usize;
            let mut checked = 0usize;
            while checked < C7_SAMPLES {
                let params = GlobalParams {
                    phi: rng.gen(),
                    lambda: rng.gen(),
                    ..GlobalParams::default()
                };
                let sender = random_state(&mut rng, &params);
                if sender.f_count == 0.0 {
                    continue;
                }
                checked += 1;
                let receiver = random_state(&mut rng, &params);
                let s = sender.normalize(&params);
                let r = receiver.normalize(&params);
                let g = assess_opinion(r.k, s.c, s.labels, params.phi).unwrap();

                let d = receiver_count_deltas(&r, &g);
                worst_a = worst_a.max((d.knowledge(params.lambda) - receiver_knowledge_delta(&r, &g, params.lambda)).abs());
                let d = sender_count_deltas(r.c, &s.labels, &g);
                worst_b = worst_b.max((d.knowledge(params.lambda) - sender_knowledge_delta(r.c, &s.labels, &g, params.lambda)).abs());
                worst_g = worst_g.max((g.g_plus + g.g_minus + g.g_rumor - 1.0).abs());

                let guru = assess_opinion(1.0, s.c, s.labels, params.phi).unwrap();
                let ignoramus = assess_opinion(0.0, s.c, s.labels, params.phi).unwrap();
                let guru_ok = guru.g_plus == params.phi && guru.g_minus == 1.0 - params.phi && guru.g_rumor == 0.0;
                let ig_plus = s.c * s.labels.plus;
                let ig_minus = s.c * s.labels.minus;
                let ig_ok = ignoramus.g_plus == ig_plus
                    && ignoramus.g_minus == ig_minus
                    && ignoramus.g_rumor == (1.0 - ig_plus - ig_minus).max(0.0);
                limit_mismatch += usize::from(!(guru_ok && ig_ok));

                let p1 = scenario_probabilities(&r, &g).p_discard;
                worst_d = worst_d.max((sender_popularity_premium(&r, &g) - (1.0 - p1)).abs());
            }
            let pass = worst_a <= C7_COUNT_TOL
                && worst_b <= C7_COUNT_TOL
                && worst_g <= C7_G_TOL
                && limit_mismatch == 0
                && worst_d <= C7_G_TOL;
            (
                pass,
                format!(
                    "{C7_SAMPLES} states: receiver {worst_a:.2e}, sender {worst_b:.2e} (tol {C7_COUNT_TOL:e}); g sum {worst_g:.2e}, \
                     limit mismatches {limit_mismatch}; premium vs 1-p1 {worst_d:.2e} (tol {C7_G_TOL:e})"
                ),
            )
        })
        .clone()
}

#[test]
fn c7_algebraic_consistency() {
    let (pass, detail) = criterion7();
    finish("C7 algebraic consistency", pass, detail, false);
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dissemination").chain(args.iter().copied());
    let code = cli::run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn dir_contents(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion8() -> (bool, String) {
    static RESULT: OnceLock<(bool, String)> = OnceLock::new();
    RESULT
        .get_or_init(|| {
            let tmp = tempfile::tempdir().unwrap();
            let mut outputs = Vec::new();
            for name in ["a", "b"] {
                let dir = tmp.path().join(name);
                let (code, _, err) = cli(&[
                    "run",
                    "--preset",
                    "expert",
                    "--seed",
                    "7",
                    "--steps-per-actor",
                    "200",
                    "--out",
                    dir.to_str().unwrap(),
                ]);
                if code != 0 {
                    return (false, format!("exit {code}: {err}"));
                }
                outputs.push(dir_contents(&dir));
            }
            let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
            let required = ["params.json", "timeseries.csv", "hist.csv"];
            let has_required = required.iter().all(|r| names.contains(r))
                && names.iter().any(|n| n.starts_with("snapshot_"));
            let pass = has_required && outputs[0] == outputs[1];
            (pass, format!("files {names:?} byte-identical across two invocations: {}", outputs[0] == outputs[1]))
        })
        .clone()
}

#[test]
fn c8_determinism() {
    let (pass, detail) = criterion8();
    finish("C8 determinism", pass, detail, false);
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {summary:?}"))
}

#[test]
fn c9_desk_scale_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (code, out, err) = cli(&[
        "run",
        "--preset",
        "troll",
        "--actors",
        "200",
        "--steps-per-actor",
        "500",
        "--seed",
        "1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    assert_eq!(code, 0, "{err}");
    let clamps: u64 = field(&out, "clamp_events").parse().unwrap();
    let k: f64 = field(&out, "mean_k").parse().unwrap();
    let k0: f64 = field(&out, "initial_mean_k").parse().unwrap();
    let pass = elapsed <= C9_MAX_RUNTIME && clamps == 0 && k > k0;
    finish(
        "C9 desk-scale smoke",
        pass,
        format!(
            "{elapsed:.2?} (limit {C9_MAX_RUNTIME:?}), clamp events {clamps} (need 0) {}, mean k {k0} -> {k}",
            field(&out, "clamped")
        ),
        true,
    );
}
