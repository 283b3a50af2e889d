//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so each line appears directly in
//! `cargo test` output; exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tutorship::clustering::{adjusted_rand_index, best_by_silhouette, sweep_k, DEFAULT_MAX_ITER};
use tutorship::distance::{dtw_distance, pairwise_distance_matrix, DtwOptions};
use tutorship::encoding::{encode_sequence, encode_symbols, recover_partition_values};
use tutorship::io::write_sessions;
use tutorship::metrics::{distributedness, distributedness_bruteforce_oracle, distributedness_symbols};
use tutorship::model::{ingest_records, Interval};
use tutorship::pipeline::{analyze, bucket_learners, learner_features, run_correlation_analysis, PipelineOptions};
use tutorship::stats::{f_survival, one_way_anova, spearman, tukey_hsd};
use tutorship::synth::{generate, ScoreModel, SynthSpec};
use tutorship::{AnalysisConfig, Skill, TutorshipSequence};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(elapsed < Duration::from_secs(limit_s), || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- 1

fn encoding_exactness() -> Outcome {
    let start = Instant::now();
    let cases = [
        ("aaaaaa", "-1 1 1 1 1 1"),
        ("aaabbb", "-1 1 1 -1 1 1"),
        ("ababab", "-1 -1 2 2 2 2"),
        ("abcabc", "-1 -1 -1 3 3 3"),
        ("abcdef", "-1 -1 -1 -1 -1 -1"),
    ];
    for (letters, want) in cases {
        let seq = TutorshipSequence::from_letters("x", letters).map_err(|e| e.to_string())?;
        let got = encode_sequence(&seq).to_field();
        check(got == want, || format!("<{letters}> encoded as [{got}], want [{want}]"))?;
    }

    let mut count = 0usize;
    let mut seq = Vec::new();
    for len in 1..=8 {
        seq.resize(len, 0u8);
        seq.fill(0);
        loop {
            let enc = encode_symbols(&seq, -1);
            let parts = recover_partition_values(&enc).map_err(|e| format!("{seq:?}: {e}"))?;
            check(parts == partition_of(&seq), || format!("round trip failed for {seq:?}"))?;
            count += 1;
            if !next_word(&mut seq, 5) {
                break;
            }
        }
    }
    within(start.elapsed(), 5)?;
    Ok(format!("5 worked examples, {count} round trips"))
}

/// Positions grouped by symbol, groups ordered by first occurrence.
fn partition_of(seq: &[u8]) -> Vec<Vec<usize>> {
    let mut order: Vec<u8> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in seq.iter().enumerate() {
        match order.iter().position(|o| o == s) {
            Some(g) => groups[g].push(i),
            None => {
                order.push(*s);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Advances `word` to the next word over `0..base` in odometer order.
fn next_word(word: &mut [u8], base: u8) -> bool {
    for d in word.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

// ---------------------------------------------------------------- 2

fn distributedness_oracle() -> Outcome {
    let start = Instant::now();
    let mut count = 0usize;
    let mut worst = 0.0f64;
    let mut seq = Vec::new();
    for len in 1..=6 {
        seq.resize(len, 0u8);
        seq.fill(0);
        loop {
            let symbols: Vec<usize> = seq.iter().map(|&s| s as usize).collect();
            let fast = distributedness_symbols(&symbols, 2.0);
            let slow = distributedness_bruteforce_oracle(&seq, 2.0);
            worst = worst.max((fast - slow).abs());
            count += 1;
            if !next_word(&mut seq, 3) {
                break;
            }
        }
    }
    check(worst <= 1e-12, || format!("max deviation from oracle {worst:e}"))?;

    let d = |letters: &str| distributedness(&TutorshipSequence::from_letters("x", letters).unwrap(), 2.0).value;
    let aabb = d("aabb");
    check((aabb - 0.383659).abs() <= 1e-6, || format!("D(aabb) = {aabb}"))?;
    let (blocked, alternating) = (d("aaabbb"), d("ababab"));
    check(blocked < alternating, || format!("D(aaabbb) = {blocked} >= D(ababab) = {alternating}"))?;
    within(start.elapsed(), 10)?;
    Ok(format!(
        "{count} sequences, max dev {worst:.1e}; D(aabb) = {aabb:.6}; D(aaabbb) = {blocked:.4} < D(ababab) = {alternating:.4}"
    ))
}

// ---------------------------------------------------------------- 3

/// Minimum path cost by depth-first enumeration of every warping path.
/// Branches whose partial cost already reaches the best complete path are cut.
fn dtw_enumerate(x: &[f64], y: &[f64]) -> f64 {
    fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (x[i] - y[j]).abs();
        if acc >= *best {
            return;
        }
        if i + 1 == x.len() && j + 1 == y.len() {
            *best = acc;
            return;
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, i + 1, j + 1, acc, best);
        }
        if i + 1 < x.len() {
            walk(x, y, i + 1, j, acc, best);
        }
        if j + 1 < y.len() {
            walk(x, y, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(x, y, 0, 0, 0.0, &mut best);
    best
}

fn dtw_oracle() -> Outcome {
    let start = Instant::now();
    let alphabet = [-1.0, 1.0, 2.0, 3.0];
    let mut seqs: Vec<Vec<f64>> = Vec::new();
    let mut word = Vec::new();
    for len in 1..=5 {
        word.resize(len, 0u8);
        word.fill(0);
        loop {
            seqs.push(word.iter().map(|&w| alphabet[w as usize]).collect());
            if !next_word(&mut word, 4) {
                break;
            }
        }
    }
    let opts = DtwOptions::default();
    let mut pairs = 0usize;
    for (a, x) in seqs.iter().enumerate() {
        for y in &seqs[a..] {
            let want = dtw_enumerate(x, y);
            let xy = dtw_distance(x, y, opts).map_err(|e| e.to_string())?;
            let yx = dtw_distance(y, x, opts).map_err(|e| e.to_string())?;
            check(xy == want && yx == want, || format!("{x:?} vs {y:?}: dp {xy}/{yx}, paths {want}"))?;
            pairs += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let draw = |rng: &mut ChaCha8Rng| {
            let len = rng.random_range(1..=40);
            (0..len).map(|_| rng.random_range(-1..=12) as f64).collect::<Vec<f64>>()
        };
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        let xy = dtw_distance(&x, &y, opts).map_err(|e| e.to_string())?;
        let yx = dtw_distance(&y, &x, opts).map_err(|e| e.to_string())?;
        let xx = dtw_distance(&x, &x, opts).map_err(|e| e.to_string())?;
        check(xy == yx, || format!("asymmetric: {xy} vs {yx}"))?;
        check(xx == 0.0, || format!("dtw(x,x) = {xx}"))?;
    }
    within(start.elapsed(), 30)?;
    Ok(format!("{} sequences, {pairs} unordered pairs match path enumeration; 1000 random pairs symmetric", seqs.len()))
}

// ---------------------------------------------------------------- 4

fn clustering_recovery() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        n_per_archetype: 100,
        length_range: Interval::new(2, 20),
        seed: 1,
        ..Default::default()
    };
    let records = ingest_records(generate(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let config = AnalysisConfig::default();
    let features = learner_features(&records, &config);
    let encs: Vec<_> = features.iter().map(|f| f.encoded.clone()).collect();
    let d = pairwise_distance_matrix(&encs, DtwOptions::default()).map_err(|e| e.to_string())?;
    let sweep = sweep_k(&d, config.k_sweep, config.rng_seed, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;

    for e in &sweep {
        let h = &e.assignment.cost_history;
        check(h.windows(2).all(|w| w[1] < w[0]), || format!("k={}: cost history not strictly decreasing {h:?}", e.k))?;
    }
    let best = best_by_silhouette(&sweep).ok_or("empty sweep")?;
    let planted: Vec<usize> = features
        .iter()
        .map(|f| match f.learner_id.split('-').next() {
            Some("diverse") => 0,
            Some("mixed") => 1,
            _ => 2,
        })
        .collect();
    let ari = adjusted_rand_index(&planted, &best.assignment.cluster_ids());
    let runner_up = sweep
        .iter()
        .filter(|e| e.k != best.k)
        .max_by(|a, b| a.mean_silhouette.total_cmp(&b.mean_silhouette))
        .map(|e| format!("k={} {:.3}", e.k, e.mean_silhouette))
        .unwrap_or_default();
    check(best.k == 3, || format!("silhouette picked k = {} ({:.3}); runner-up {runner_up}", best.k, best.mean_silhouette))?;
    check(ari >= 0.8, || format!("ARI {ari:.4} < 0.8"))?;
    within(start.elapsed(), 120)?;
    Ok(format!(
        "k = 3 (silhouette {:.3}, runner-up {runner_up}), ARI {ari:.4}, {} sweep runs strictly decreasing",
        best.mean_silhouette,
        sweep.len()
    ))
}

// ---------------------------------------------------------------- 5

/// P(F > f) for F(1, 4) by Simpson integration of the density in `u = sqrt(x)`,
/// where it becomes `(3/4) (1 + u^2/4)^(-5/2)`, mapped to `t = 1 / (1 + u)`.
fn f14_survival_oracle(f: f64) -> f64 {
    let g = |u: f64| 0.75 * (1.0 + u * u / 4.0).powf(-2.5);
    let t_hi = 1.0 / (1.0 + f.sqrt());
    let h = |t: f64| if t == 0.0 { 0.0 } else { g(1.0 / t - 1.0) / (t * t) };
    let n = 200_000;
    let step = t_hi / n as f64;
    let mut sum = h(0.0) + h(t_hi);
    for i in 1..n {
        sum += h(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * step / 3.0
}

fn statistics_oracles() -> Outcome {
    let groups = vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]];
    let anova = one_way_anova(&groups).map_err(|e| e.to_string())?;
    check((anova.f_stat - 1.5).abs() <= 1e-9, || format!("F = {}", anova.f_stat))?;

    let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).map_err(|e| e.to_string())?.rho;
    check((rho - 0.8).abs() <= 1e-9, || format!("rho = {rho}"))?;

    let a = tukey_hsd(&groups, &anova, 9, 50_000).map_err(|e| e.to_string())?;
    let b = tukey_hsd(&groups, &anova, 9, 50_000).map_err(|e| e.to_string())?;
    let hand = 1.0 / (anova.ms_within / 2.0 * (1.0 / 3.0 + 1.0 / 3.0)).sqrt();
    check((a[0].q_stat - hand).abs() <= 1e-6, || format!("q = {}, hand formula {hand}", a[0].q_stat))?;
    check(a[0].p_adj.to_bits() == b[0].p_adj.to_bits(), || "Monte Carlo p differs between runs".into())?;

    let p = f_survival(1.5, 1.0, 4.0);
    let oracle = f14_survival_oracle(1.5);
    check((p - oracle).abs() <= 1e-6, || format!("F p = {p}, integration oracle {oracle}"))?;
    Ok(format!(
        "F = {}, rho = {rho}, q = {:.6} (hand {hand:.6}), Tukey p = {} reproducible, F p = {p:.9} (oracle {oracle:.9})",
        anova.f_stat, a[0].q_stat, a[0].p_adj
    ))
}

// ---------------------------------------------------------------- 6

fn planted_spec(seed: u64, slope_coeff: f64) -> SynthSpec {
    SynthSpec {
        n_per_archetype: 667,
        length_range: Interval::new(2, 150),
        score_model: ScoreModel {
            slope_coeff,
            ..ScoreModel::default()
        },
        seed,
        ..Default::default()
    }
}

/// 2,000 learners: the generator's 2,001 minus the last mixed learner.
fn planted_records(seed: u64, slope_coeff: f64) -> Result<Vec<tutorship::LearnerRecord>, String> {
    let spec = planted_spec(seed, slope_coeff);
    let last = format!("mixed-{:04}", spec.n_per_archetype - 1);
    let sessions: Vec<_> = generate(&spec)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|s| s.learner_id != last)
        .collect();
    let records = ingest_records(sessions).map_err(|e| e.to_string())?;
    check(records.len() == 2000, || format!("{} learners", records.len()))?;
    Ok(records)
}

fn planted_correlation() -> Outcome {
    let records = planted_records(3, ScoreModel::default().slope_coeff)?;
    let config = AnalysisConfig {
        rng_seed: 3,
        ..AnalysisConfig::default()
    };
    let start = Instant::now();
    let report = analyze(&records, &config, &PipelineOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut populated = 0;
    let mut large = 0;
    for row in &report.correlation_table {
        if row.n < 2 {
            continue;
        }
        populated += 1;
        let rho = row.rho.ok_or_else(|| format!("{} {}: rho undefined with n = {}", row.bucket, row.skill, row.n))?;
        check(rho < 0.0, || format!("{} {}: rho = {rho:.3} (n = {})", row.bucket, row.skill, row.n))?;
        if row.n >= 100 {
            large += 1;
            let p = row.p_value.unwrap_or(1.0);
            check(p < 0.05, || format!("{} {}: p = {p:.3} with n = {}", row.bucket, row.skill, row.n))?;
        }
    }

    let mut rhos = Vec::new();
    for seed in 0..20 {
        let records = planted_records(100 + seed, 0.0)?;
        let features = learner_features(&records, &config);
        let counts: Vec<usize> = features.iter().map(|f| f.n_sessions).collect();
        let bucketing = bucket_learners(&counts, &config.session_range_buckets).map_err(|e| e.to_string())?;
        for (bucket, members) in &bucketing.buckets {
            for skill in Skill::ALL {
                if let Some(rho) = run_correlation_analysis(&features, *bucket, members, skill).rho {
                    rhos.push(rho);
                }
            }
        }
    }
    let mean_null = rhos.iter().sum::<f64>() / rhos.len() as f64;
    check(mean_null.abs() <= 0.05, || format!("null mean rho {mean_null:.4} over {} cells", rhos.len()))?;
    within(elapsed, 60)?;
    Ok(format!(
        "{populated} bucket-skill cells all rho < 0, {large} with n >= 100 all p < 0.05; null mean rho {mean_null:+.4} over {} cells; pipeline {:.1}s",
        rhos.len(),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 7

fn run_analyze(input: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tutorship"))
        .args(["analyze", "--seed", "11", "--input"])
        .arg(input)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), || format!("analyze exited with {status}"))?;
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("sessions.csv");
    let spec = SynthSpec {
        n_per_archetype: 60,
        length_range: Interval::new(2, 40),
        seed: 5,
        ..Default::default()
    };
    let sessions = generate(&spec).map_err(|e| e.to_string())?;
    let file = std::fs::File::create(&input).map_err(|e| e.to_string())?;
    write_sessions(file, &sessions).map_err(|e| e.to_string())?;

    let a = run_analyze(&input, &dir.path().join("a"))?;
    let b = run_analyze(&input, &dir.path().join("b"))?;
    check(a == b, || "report.json differs between runs".into())?;
    Ok(format!("two CLI runs, {} byte report.json identical", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("encoding exactness", encoding_exactness),
        ("distributedness oracle", distributedness_oracle),
        ("DTW oracle", dtw_oracle),
        ("clustering recovery", clustering_recovery),
        ("statistics oracles", statistics_oracles),
        ("planted correlation", planted_correlation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} [PRIMARY] {name}: PASS ({secs:.2}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [PRIMARY] {name}: FAIL ({secs:.2}s) {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
