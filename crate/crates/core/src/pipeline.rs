//! End-to-end analysis: per-learner features, session-range bucketing,
//! clustering per bucket, cluster-vs-improvement comparisons and
//! distributedness-vs-improvement correlation tables.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{best_by_silhouette, k_medoids, silhouette, sweep_k};
use crate::distance::{cached_distance_matrix, pairwise_distance_matrix, DtwOptions};
use crate::encoding::{encode_sequence, label_archetype, Archetype, EncodedSequence};
use crate::error::{Error, Result};
use crate::metrics::distributedness;
use crate::model::{validate_buckets, AnalysisConfig, Interval, LearnerRecord, Skill};
use crate::stats::{mean_ci, mean_sd, one_way_anova, ols_slope, spearman, studentized_range_sample, tukey_from_sample};

/// Per-learner quantities every analysis draws on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerFeatures {
    pub learner_id: String,
    pub n_sessions: usize,
    pub n_tutors: usize,
    pub session_tutor_ratio: f64,
    pub encoded: EncodedSequence,
    pub archetype: Archetype,
    pub distributedness: f64,
    /// Only skills with enough scored sessions and a defined slope.
    pub slopes: BTreeMap<Skill, f64>,
}

pub fn learner_features(records: &[LearnerRecord], config: &AnalysisConfig) -> Vec<LearnerFeatures> {
    records
        .par_iter()
        .map(|r| {
            let encoded = encode_sequence(&r.sequence);
            let slopes = r
                .series
                .iter()
                .filter(|(_, s)| s.len() >= config.min_sessions_for_scores)
                .filter_map(|(&skill, s)| ols_slope(s).ok().map(|res| (skill, res.slope)))
                .collect();
            LearnerFeatures {
                learner_id: r.learner_id().to_string(),
                n_sessions: r.n_sessions,
                n_tutors: r.n_tutors,
                session_tutor_ratio: r.session_tutor_ratio(),
                archetype: label_archetype(&encoded),
                encoded,
                distributedness: distributedness(&r.sequence, config.entropy_log_base).value,
                slopes,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucketing {
    /// Member indices per interval, in interval order.
    pub buckets: Vec<(Interval, Vec<usize>)>,
    /// Learners whose session count falls in no interval.
    pub excluded: Vec<usize>,
}

/// Places each learner in the interval containing its session count.
pub fn bucket_learners(session_counts: &[usize], spec: &[Interval]) -> Result<Bucketing> {
    validate_buckets(spec)?;
    let mut buckets: Vec<(Interval, Vec<usize>)> = spec.iter().map(|&b| (b, Vec::new())).collect();
    let mut excluded = Vec::new();
    for (i, &n) in session_counts.iter().enumerate() {
        let n = u32::try_from(n).unwrap_or(u32::MAX);
        match buckets.iter_mut().find(|(b, _)| b.contains(n)) {
            Some((_, members)) => members.push(i),
            None => excluded.push(i),
        }
    }
    Ok(Bucketing { buckets, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub mean_silhouette: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    /// Configured k for the bucket.
    Configured,
    /// Highest mean silhouette across the sweep.
    Silhouette,
    /// Too few learners to cluster; everyone shares one cluster.
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub cluster: usize,
    pub medoid_learner_id: Option<String>,
    /// Most common rule-based archetype among members.
    pub label: Archetype,
    pub count: usize,
    pub percentage: f64,
    pub mean_sessions: f64,
    pub sd_sessions: f64,
    pub mean_tutors: f64,
    pub sd_tutors: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBucketResult {
    pub range: Interval,
    pub n_learners: usize,
    pub sweep: Vec<SweepPoint>,
    pub chosen_k: usize,
    pub chosen_by: KChoice,
    pub mean_silhouette: Option<f64>,
    pub clusters: Vec<ClusterInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub learner_id: String,
    pub bucket: Interval,
    pub cluster: usize,
    pub medoid_learner_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonStatus {
    Ok,
    /// Fewer than two clusters in the bucket.
    SingleCluster,
    /// Some cluster has fewer than two slopes.
    Insufficient,
    /// Zero within-cluster variance.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSlopeStats {
    pub cluster: usize,
    pub label: Archetype,
    pub n: usize,
    pub mean: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseEntry {
    pub cluster_i: usize,
    pub cluster_j: usize,
    pub mean_diff: f64,
    pub q_stat: f64,
    pub p_adj: f64,
    pub p_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub bucket: Interval,
    pub skill: Skill,
    pub status: ComparisonStatus,
    pub clusters: Vec<ClusterSlopeStats>,
    pub f_stat: Option<f64>,
    pub df_between: Option<usize>,
    pub df_within: Option<usize>,
    pub p_value: Option<f64>,
    pub pairwise: Vec<PairwiseEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationStatus {
    Ok,
    /// Fewer than four learners: rho reported, p-value undefined.
    SmallSample,
    /// Fewer than two learners or constant inputs.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub bucket: Interval,
    pub n_learners: usize,
    pub skill: Skill,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub status: CorrelationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRangeSummary {
    pub bucket: Interval,
    pub n_learners: usize,
    pub mean_tutors: Option<f64>,
    pub median_tutors: Option<f64>,
    pub sd_tutors: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub sd_ratio: Option<f64>,
}

/// Count of learners at each (session, encoded value) per cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityRow {
    pub bucket: Interval,
    pub cluster: usize,
    pub session_index: usize,
    pub encoded_value: i32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub entropy_log_base: f64,
    pub tukey_draws: usize,
    pub n_learners: usize,
    pub n_single_session: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub session_summary: Vec<SessionRangeSummary>,
    pub cluster_summary: Vec<ClusterBucketResult>,
    pub improvement_comparison: Vec<ComparisonEntry>,
    pub correlation_table: Vec<CorrelationEntry>,
    pub assignments: Vec<Assignment>,
    pub cluster_density: Vec<DensityRow>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Directory for cached distance matrices.
    pub cache_dir: Option<PathBuf>,
}

/// Runs the whole analysis. `config.rng_seed` drives every random choice.
pub fn analyze(records: &[LearnerRecord], config: &AnalysisConfig, opts: &PipelineOptions) -> Result<AnalysisReport> {
    config.validate()?;
    let features = learner_features(records, config);
    let counts: Vec<usize> = features.iter().map(|f| f.n_sessions).collect();

    let cluster_ranges: Vec<Interval> = config.cluster_buckets.iter().map(|b| b.range).collect();
    let cluster_bucketing = bucket_learners(&counts, &cluster_ranges)?;
    let mut cluster_summary = Vec::new();
    let mut assignments = Vec::new();
    let mut cluster_density = Vec::new();
    let mut cluster_of: HashMap<usize, (usize, usize)> = HashMap::new();
    for (b_idx, (bucket_cfg, (_, members))) in config
        .cluster_buckets
        .iter()
        .zip(&cluster_bucketing.buckets)
        .enumerate()
    {
        let (result, labels, medoids) = cluster_bucket(&features, members, bucket_cfg, config, opts)?;
        for (pos, &i) in members.iter().enumerate() {
            cluster_of.insert(i, (b_idx, labels[pos]));
            assignments.push(Assignment {
                learner_id: features[i].learner_id.clone(),
                bucket: bucket_cfg.range,
                cluster: labels[pos],
                medoid_learner_id: medoids[labels[pos]].clone(),
            });
        }
        cluster_density.extend(density_rows(&features, members, &labels, bucket_cfg.range));
        cluster_summary.push(result);
    }

    let stats_bucketing = bucket_learners(&counts, &config.session_range_buckets)?;
    let session_summary = stats_bucketing
        .buckets
        .iter()
        .map(|(b, members)| session_range_summary(&features, *b, members))
        .collect();

    let mut tukey_cache = TukeyCache::new(config.rng_seed, config.tukey_draws);
    let mut improvement_comparison = Vec::new();
    for (bucket, members) in &stats_bucketing.buckets {
        // compare clusters only where the stats range sits inside one clustered range
        let Some((c_idx, _)) = cluster_summary
            .iter()
            .enumerate()
            .find(|(_, c)| c.range.lo <= bucket.lo && bucket.hi <= c.range.hi)
        else {
            continue;
        };
        if members.is_empty() {
            continue;
        }
        let clusters = &cluster_summary[c_idx].clusters;
        let labels: Vec<usize> = members.iter().map(|i| cluster_of[i].1).collect();
        for skill in Skill::ALL {
            improvement_comparison.push(run_cluster_comparison(
                &features,
                *bucket,
                members,
                &labels,
                clusters,
                skill,
                &mut tukey_cache,
            )?);
        }
    }

    let mut correlation_table = Vec::new();
    for (bucket, members) in &stats_bucketing.buckets {
        for skill in Skill::ALL {
            correlation_table.push(run_correlation_analysis(&features, *bucket, members, skill));
        }
    }

    Ok(AnalysisReport {
        provenance: Provenance {
            config_hash: crate::io::config_hash(config)?,
            seed: config.rng_seed,
            tool_version: crate::TOOL_VERSION.to_string(),
            entropy_log_base: config.entropy_log_base,
            tukey_draws: config.tukey_draws,
            n_learners: features.len(),
            n_single_session: features.iter().filter(|f| f.n_sessions < 2).count(),
        },
        session_summary,
        cluster_summary,
        improvement_comparison,
        correlation_table,
        assignments,
        cluster_density,
    })
}

type BucketClustering = (ClusterBucketResult, Vec<usize>, Vec<Option<String>>);

fn cluster_bucket(
    features: &[LearnerFeatures],
    members: &[usize],
    bucket: &crate::model::ClusterBucket,
    config: &AnalysisConfig,
    opts: &PipelineOptions,
) -> Result<BucketClustering> {
    let n = members.len();
    let dtw = DtwOptions {
        window: config.dtw_window,
        length_normalize: config.dtw_length_normalize,
    };
    let mut sweep = Vec::new();
    let (labels, medoids, chosen_k, chosen_by, mean_silhouette) = if n < 2 || bucket.k == Some(1) {
        (vec![0; n], vec![None], 1, if n < 2 { KChoice::Trivial } else { KChoice::Configured }, None)
    } else {
        let encs: Vec<EncodedSequence> = members.iter().map(|&i| features[i].encoded.clone()).collect();
        let d = match &opts.cache_dir {
            Some(dir) => cached_distance_matrix(&encs, dtw, dir)?.0,
            None => pairwise_distance_matrix(&encs, dtw)?,
        };
        let assignment = if let Some(k) = bucket.k {
            if k > n {
                return Err(Error::Config(format!(
                    "bucket {} has {n} learners but k = {k}",
                    bucket.range
                )));
            }
            let a = k_medoids(&d, k, config.rng_seed, config.max_iter)?;
            (a, KChoice::Configured)
        } else {
            let range = bucket.k_sweep.unwrap_or(config.k_sweep);
            let entries = sweep_k(&d, range, config.rng_seed, config.max_iter)?;
            sweep = entries
                .iter()
                .map(|e| SweepPoint {
                    k: e.k,
                    mean_silhouette: e.mean_silhouette,
                    total_cost: e.assignment.total_cost,
                })
                .collect();
            let best = best_by_silhouette(&entries).expect("sweep is non-empty");
            (best.assignment.clone(), KChoice::Silhouette)
        };
        let (a, how) = assignment;
        let sil = if a.k >= 2 { Some(silhouette(&d, &a)?.mean) } else { None };
        let medoids = a
            .medoid_indices
            .iter()
            .map(|&m| Some(features[members[m]].learner_id.clone()))
            .collect();
        (a.cluster_ids(), medoids, a.k, how, sil)
    };

    let clusters = (0..chosen_k)
        .map(|c| {
            let idx: Vec<usize> = members
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(&i, _)| i)
                .collect();
            let sessions: Vec<f64> = idx.iter().map(|&i| features[i].n_sessions as f64).collect();
            let tutors: Vec<f64> = idx.iter().map(|&i| features[i].n_tutors as f64).collect();
            let (mean_sessions, sd_sessions) = mean_sd(&sessions);
            let (mean_tutors, sd_tutors) = mean_sd(&tutors);
            ClusterInfo {
                cluster: c,
                medoid_learner_id: medoids[c].clone(),
                label: majority_label(idx.iter().map(|&i| features[i].archetype)),
                count: idx.len(),
                percentage: 100.0 * idx.len() as f64 / n as f64,
                mean_sessions,
                sd_sessions,
                mean_tutors,
                sd_tutors,
            }
        })
        .filter(|c| c.count > 0)
        .collect();

    Ok((
        ClusterBucketResult {
            range: bucket.range,
            n_learners: n,
            sweep,
            chosen_k: if n == 0 { 0 } else { chosen_k },
            chosen_by,
            mean_silhouette,
            clusters,
        },
        labels,
        medoids,
    ))
}

fn majority_label(labels: impl Iterator<Item = Archetype>) -> Archetype {
    let mut counts: BTreeMap<Archetype, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(Archetype, usize)>, (a, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((a, c)),
        })
        .map_or(Archetype::Mixed, |(a, _)| a)
}

fn density_rows(features: &[LearnerFeatures], members: &[usize], labels: &[usize], bucket: Interval) -> Vec<DensityRow> {
    let mut counts: BTreeMap<(usize, usize, i32), usize> = BTreeMap::new();
    for (&i, &c) in members.iter().zip(labels) {
        for (pos, &v) in features[i].encoded.values.iter().enumerate() {
            *counts.entry((c, pos + 1, v)).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|((cluster, session_index, encoded_value), count)| DensityRow {
            bucket,
            cluster,
            session_index,
            encoded_value,
            count,
        })
        .collect()
}

fn session_range_summary(features: &[LearnerFeatures], bucket: Interval, members: &[usize]) -> SessionRangeSummary {
    let tutors: Vec<f64> = members.iter().map(|&i| features[i].n_tutors as f64).collect();
    let ratios: Vec<f64> = members.iter().map(|&i| features[i].session_tutor_ratio).collect();
    // empty buckets have no statistics
    let some = |v: f64| (!members.is_empty()).then_some(v);
    let (mean_tutors, sd_tutors) = mean_sd(&tutors);
    let (mean_ratio, sd_ratio) = mean_sd(&ratios);
    SessionRangeSummary {
        bucket,
        n_learners: members.len(),
        mean_tutors: some(mean_tutors),
        median_tutors: some(median(&tutors)),
        sd_tutors: some(sd_tutors),
        mean_ratio: some(mean_ratio),
        median_ratio: some(median(&ratios)),
        sd_ratio: some(sd_ratio),
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Studentized-range samples shared by every comparison with the same
/// number of groups and residual degrees of freedom.
pub struct TukeyCache {
    seed: u64,
    draws: usize,
    samples: HashMap<(usize, usize), Vec<f64>>,
}

impl TukeyCache {
    pub fn new(seed: u64, draws: usize) -> Self {
        Self {
            seed,
            draws,
            samples: HashMap::new(),
        }
    }

    fn sample(&mut self, k: usize, df: usize) -> Result<&[f64]> {
        if !self.samples.contains_key(&(k, df)) {
            let seed = mix_seed(self.seed, k as u64, df as u64);
            let s = studentized_range_sample(k, df as f64, seed, self.draws)?;
            self.samples.insert((k, df), s);
        }
        Ok(&self.samples[&(k, df)])
    }
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Compares slopes across clusters inside one session-range bucket.
///
/// `labels[p]` is the cluster of learner `members[p]`; `clusters` describes
/// the clusters of the enclosing clustered range.
pub fn run_cluster_comparison(
    features: &[LearnerFeatures],
    bucket: Interval,
    members: &[usize],
    labels: &[usize],
    clusters: &[ClusterInfo],
    skill: Skill,
    tukey: &mut TukeyCache,
) -> Result<ComparisonEntry> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&i, &c) in members.iter().zip(labels) {
        let entry = groups.entry(c).or_default();
        if let Some(&s) = features[i].slopes.get(&skill) {
            entry.push(s);
        }
    }
    let label_of = |c: usize| clusters.iter().find(|ci| ci.cluster == c).map_or(Archetype::Mixed, |ci| ci.label);
    let cluster_stats = groups
        .iter()
        .map(|(&c, g)| {
            let ci = mean_ci(g, 0.95).ok();
            ClusterSlopeStats {
                cluster: c,
                label: label_of(c),
                n: g.len(),
                mean: (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64),
                ci95_lo: ci.map(|c| c.lo),
                ci95_hi: ci.map(|c| c.hi),
            }
        })
        .collect();
    let mut entry = ComparisonEntry {
        bucket,
        skill,
        status: ComparisonStatus::Ok,
        clusters: cluster_stats,
        f_stat: None,
        df_between: None,
        df_within: None,
        p_value: None,
        pairwise: Vec::new(),
    };
    if groups.len() < 2 {
        entry.status = ComparisonStatus::SingleCluster;
        return Ok(entry);
    }
    if groups.values().any(|g| g.len() < 2) {
        entry.status = ComparisonStatus::Insufficient;
        return Ok(entry);
    }
    let ids: Vec<usize> = groups.keys().copied().collect();
    let values: Vec<Vec<f64>> = groups.into_values().collect();
    let anova = match one_way_anova(&values) {
        Ok(a) => a,
        Err(Error::Undefined(_)) => {
            entry.status = ComparisonStatus::Degenerate;
            return Ok(entry);
        }
        Err(e) => return Err(e),
    };
    entry.f_stat = Some(anova.f_stat);
    entry.df_between = Some(anova.df_between);
    entry.df_within = Some(anova.df_within);
    entry.p_value = Some(anova.p_value);

    let sample = tukey.sample(values.len(), anova.df_within)?;
    entry.pairwise = tukey_from_sample(&anova, sample)
        .into_iter()
        .map(|p| PairwiseEntry {
            cluster_i: ids[p.group_i],
            cluster_j: ids[p.group_j],
            mean_diff: p.mean_diff,
            q_stat: p.q_stat,
            p_adj: p.p_adj,
            p_se: p.p_se,
        })
        .collect();
    Ok(entry)
}

/// Spearman correlation between distributedness and the skill slope across
/// the bucket's learners that have a slope.
pub fn run_correlation_analysis(features: &[LearnerFeatures], bucket: Interval, members: &[usize], skill: Skill) -> CorrelationEntry {
    let (x, y): (Vec<f64>, Vec<f64>) = members
        .iter()
        .filter_map(|&i| features[i].slopes.get(&skill).map(|&s| (features[i].distributedness, s)))
        .unzip();
    let n = x.len();
    let (rho, p_value, status) = match spearman(&x, &y) {
        Ok(r) => {
            let status = if r.p_value.is_some() {
                CorrelationStatus::Ok
            } else {
                CorrelationStatus::SmallSample
            };
            (Some(r.rho), r.p_value, status)
        }
        Err(_) => (None, None, CorrelationStatus::Undefined),
    };
    CorrelationEntry {
        bucket,
        n_learners: members.len(),
        skill,
        n,
        rho,
        p_value,
        status,
    }
}

/// Files written by [`emit_report`].
pub const REPORT_FILES: [&str; 7] = [
    "report.json",
    "session_summary.csv",
    "cluster_summary.csv",
    "improvement_comparison.csv",
    "correlation_table.csv",
    "assignments.csv",
    "cluster_density.csv",
];

/// Writes the JSON report plus CSV tables into `out_dir`.
pub fn emit_report(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let path = out_dir.join("report.json");
    fs::write(&path, report_json(report)?).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();

    written.push(write_csv(
        out_dir,
        "session_summary.csv",
        &["bucket", "n_learners", "mean_tutors", "median_tutors", "sd_tutors", "mean_ratio", "median_ratio", "sd_ratio"],
        report.session_summary.iter().map(|s| {
            vec![
                s.bucket.to_string(),
                s.n_learners.to_string(),
                opt(s.mean_tutors),
                opt(s.median_tutors),
                opt(s.sd_tutors),
                opt(s.mean_ratio),
                opt(s.median_ratio),
                opt(s.sd_ratio),
            ]
        }),
    )?);

    written.push(write_csv(
        out_dir,
        "cluster_summary.csv",
        &[
            "bucket", "k", "chosen_by", "mean_silhouette", "cluster", "label", "medoid_learner_id", "count",
            "percentage", "mean_sessions", "sd_sessions", "mean_tutors", "sd_tutors",
        ],
        report.cluster_summary.iter().flat_map(|b| {
            b.clusters.iter().map(move |c| {
                vec![
                    b.range.to_string(),
                    b.chosen_k.to_string(),
                    serde_plain(&b.chosen_by),
                    opt(b.mean_silhouette),
                    c.cluster.to_string(),
                    c.label.to_string(),
                    c.medoid_learner_id.clone().unwrap_or_default(),
                    c.count.to_string(),
                    c.percentage.to_string(),
                    c.mean_sessions.to_string(),
                    c.sd_sessions.to_string(),
                    c.mean_tutors.to_string(),
                    c.sd_tutors.to_string(),
                ]
            })
        }),
    )?);

    written.push(write_csv(
        out_dir,
        "improvement_comparison.csv",
        &[
            "bucket", "skill", "status", "f_stat", "p_value", "cluster", "label", "n", "mean", "ci95_lo", "ci95_hi",
        ],
        report.improvement_comparison.iter().flat_map(|e| {
            e.clusters.iter().map(move |c| {
                vec![
                    e.bucket.to_string(),
                    e.skill.to_string(),
                    serde_plain(&e.status),
                    opt(e.f_stat),
                    opt(e.p_value),
                    c.cluster.to_string(),
                    c.label.to_string(),
                    c.n.to_string(),
                    opt(c.mean),
                    opt(c.ci95_lo),
                    opt(c.ci95_hi),
                ]
            })
        }),
    )?);

    written.push(write_csv(
        out_dir,
        "correlation_table.csv",
        &["bucket", "n_learners", "skill", "n", "rho", "p_value", "significant", "status"],
        report.correlation_table.iter().map(|c| {
            vec![
                c.bucket.to_string(),
                c.n_learners.to_string(),
                c.skill.to_string(),
                c.n.to_string(),
                opt(c.rho),
                opt(c.p_value),
                c.p_value.map(|p| (p < 0.05).to_string()).unwrap_or_default(),
                serde_plain(&c.status),
            ]
        }),
    )?);

    written.push(write_csv(
        out_dir,
        "assignments.csv",
        &["learner_id", "bucket", "cluster", "medoid_learner_id"],
        report.assignments.iter().map(|a| {
            vec![
                a.learner_id.clone(),
                a.bucket.to_string(),
                a.cluster.to_string(),
                a.medoid_learner_id.clone().unwrap_or_default(),
            ]
        }),
    )?);

    written.push(write_csv(
        out_dir,
        "cluster_density.csv",
        &["bucket", "cluster", "session_index", "encoded_value", "count"],
        report.cluster_density.iter().map(|r| {
            vec![
                r.bucket.to_string(),
                r.cluster.to_string(),
                r.session_index.to_string(),
                r.encoded_value.to_string(),
                r.count.to_string(),
            ]
        }),
    )?);
    Ok(written)
}

pub fn report_json(report: &AnalysisReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
