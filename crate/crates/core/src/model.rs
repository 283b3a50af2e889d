//! Domain types shared across the crate and validation of ingested session logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four skills tutors score after each session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    Fluency,
    Grammar,
    Vocabulary,
    Pronunciation,
}

impl Skill {
    /// All skills in CSV column order.
    pub const ALL: [Skill; 4] = [
        Skill::Fluency,
        Skill::Grammar,
        Skill::Vocabulary,
        Skill::Pronunciation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Skill::Fluency => "fluency",
            Skill::Grammar => "grammar",
            Skill::Vocabulary => "vocabulary",
            Skill::Pronunciation => "pronunciation",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One learner–tutor session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub learner_id: String,
    /// 1-based position within the learner's history.
    pub session_index: u32,
    pub tutor_id: String,
    pub scores: BTreeMap<Skill, f64>,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.session_index == 0 {
            return Err("session_index must be >= 1".into());
        }
        if self.tutor_id.is_empty() {
            return Err("tutor_id must be non-empty".into());
        }
        if self.learner_id.is_empty() {
            return Err("learner_id must be non-empty".into());
        }
        for (skill, v) in &self.scores {
            if !v.is_finite() {
                return Err(format!("{skill} score is not finite ({v})"));
            }
        }
        Ok(())
    }
}

/// A session row as read from input, before ordering is resolved.
///
/// Either `session_index` or `timestamp` must be present. When a learner's
/// rows lack indices, the order is derived from the timestamps (numeric if
/// every timestamp parses as a number, lexicographic otherwise) with ties
/// broken by `row`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawSessionRow {
    /// 1-based data row number, used in diagnostics.
    pub row: usize,
    pub learner_id: String,
    pub session_index: Option<u32>,
    pub timestamp: Option<String>,
    pub tutor_id: String,
    pub scores: BTreeMap<Skill, f64>,
}

/// Ordered tutor identities for one learner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorshipSequence {
    pub learner_id: String,
    pub tutors: Vec<String>,
}

impl TutorshipSequence {
    pub fn new(learner_id: impl Into<String>, tutors: Vec<String>) -> Result<Self> {
        if tutors.is_empty() {
            return Err(Error::InvalidArgument("tutorship sequence must be non-empty".into()));
        }
        Ok(Self {
            learner_id: learner_id.into(),
            tutors,
        })
    }

    /// Builds a sequence from single-character tutor names, e.g. `"abcbc"`.
    pub fn from_letters(learner_id: impl Into<String>, letters: &str) -> Result<Self> {
        Self::new(learner_id, letters.chars().map(|c| c.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.tutors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tutors.is_empty()
    }

    pub fn unique_tutors(&self) -> usize {
        self.tutors.iter().collect::<BTreeSet<_>>().len()
    }

    /// Tutor identities replaced by dense ids in order of first appearance.
    pub fn symbols(&self) -> Vec<usize> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        self.tutors
            .iter()
            .map(|t| {
                let next = seen.len();
                *seen.entry(t.as_str()).or_insert(next)
            })
            .collect()
    }
}

/// Per-skill scores ordered by session index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub skill: Skill,
    pub points: Vec<(u32, f64)>,
}

impl ScoreSeries {
    pub fn new(skill: Skill, mut points: Vec<(u32, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!(
                "{skill} series has repeated session indices"
            )));
        }
        Ok(Self { skill, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRecord {
    pub sequence: TutorshipSequence,
    pub series: BTreeMap<Skill, ScoreSeries>,
    pub n_sessions: usize,
    pub n_tutors: usize,
}

impl LearnerRecord {
    pub fn from_sessions(learner_id: &str, sessions: &[SessionRecord]) -> Result<Self> {
        let mut sorted: Vec<&SessionRecord> = sessions.iter().collect();
        sorted.sort_by_key(|s| s.session_index);
        let tutors = sorted.iter().map(|s| s.tutor_id.clone()).collect();
        let sequence = TutorshipSequence::new(learner_id, tutors)?;
        let mut series = BTreeMap::new();
        for skill in Skill::ALL {
            let points: Vec<(u32, f64)> = sorted
                .iter()
                .filter_map(|s| s.scores.get(&skill).map(|&v| (s.session_index, v)))
                .collect();
            if !points.is_empty() {
                series.insert(skill, ScoreSeries::new(skill, points)?);
            }
        }
        let n_tutors = sequence.unique_tutors();
        Ok(Self {
            n_sessions: sequence.len(),
            n_tutors,
            sequence,
            series,
        })
    }

    pub fn learner_id(&self) -> &str {
        &self.sequence.learner_id
    }

    /// Sessions per unique tutor.
    pub fn session_tutor_ratio(&self) -> f64 {
        session_tutor_ratio(self)
    }

    /// Learners with a single session carry no sequence structure and are
    /// left out of every analysis.
    pub fn is_analyzable(&self) -> bool {
        self.n_sessions >= 2
    }

    pub fn scored_points(&self, skill: Skill) -> usize {
        self.series.get(&skill).map_or(0, ScoreSeries::len)
    }
}

pub fn session_tutor_ratio(record: &LearnerRecord) -> f64 {
    debug_assert!(record.n_tutors >= 1);
    record.n_sessions as f64 / record.n_tutors as f64
}

/// Groups raw rows into learner records, one per learner, sorted by learner id.
///
/// The result does not depend on row order when every row carries a
/// `session_index`.
pub fn ingest(rows: Vec<RawSessionRow>) -> Result<Vec<LearnerRecord>> {
    let mut by_learner: BTreeMap<String, Vec<RawSessionRow>> = BTreeMap::new();
    for row in rows {
        if row.learner_id.is_empty() {
            return Err(Error::InvalidRow {
                row: row.row,
                message: "learner_id must be non-empty".into(),
            });
        }
        if row.tutor_id.is_empty() {
            return Err(Error::InvalidRow {
                row: row.row,
                message: "tutor_id must be non-empty".into(),
            });
        }
        for (skill, v) in &row.scores {
            if !v.is_finite() {
                return Err(Error::InvalidRow {
                    row: row.row,
                    message: format!("{skill} score is not finite ({v})"),
                });
            }
        }
        by_learner.entry(row.learner_id.clone()).or_default().push(row);
    }

    let mut records = Vec::with_capacity(by_learner.len());
    for (learner_id, rows) in by_learner {
        let sessions = resolve_order(&learner_id, rows)?;
        records.push(LearnerRecord::from_sessions(&learner_id, &sessions)?);
    }
    Ok(records)
}

/// [`ingest`] for records that already carry their session index.
pub fn ingest_records(records: Vec<SessionRecord>) -> Result<Vec<LearnerRecord>> {
    let rows = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| RawSessionRow {
            row: i + 1,
            learner_id: r.learner_id,
            session_index: Some(r.session_index),
            timestamp: None,
            tutor_id: r.tutor_id,
            scores: r.scores,
        })
        .collect();
    ingest(rows)
}

fn resolve_order(learner_id: &str, mut rows: Vec<RawSessionRow>) -> Result<Vec<SessionRecord>> {
    let indexed = rows.iter().filter(|r| r.session_index.is_some()).count();
    if indexed == rows.len() {
        rows.sort_by_key(|r| (r.session_index, r.row));
        for w in rows.windows(2) {
            if w[0].session_index == w[1].session_index {
                return Err(Error::DuplicateSession {
                    row: w[1].row,
                    first_row: w[0].row,
                    learner_id: learner_id.to_string(),
                    session_index: w[1].session_index.unwrap_or_default(),
                });
            }
        }
        for r in &rows {
            if r.session_index == Some(0) {
                return Err(Error::InvalidRow {
                    row: r.row,
                    message: "session_index must be >= 1".into(),
                });
            }
        }
        return Ok(rows
            .into_iter()
            .map(|r| SessionRecord {
                learner_id: r.learner_id,
                session_index: r.session_index.unwrap_or_default(),
                tutor_id: r.tutor_id,
                scores: r.scores,
            })
            .collect());
    }

    if let Some(bad) = rows.iter().find(|r| r.timestamp.as_deref().is_none_or(str::is_empty)) {
        return Err(Error::InvalidRow {
            row: bad.row,
            message: "row has neither session_index nor timestamp".into(),
        });
    }
    let numeric: Option<Vec<f64>> = rows
        .iter()
        .map(|r| r.timestamp.as_deref().and_then(|t| t.trim().parse::<f64>().ok()))
        .collect();
    match numeric {
        Some(keys) => {
            let mut keyed: Vec<(f64, RawSessionRow)> = keys.into_iter().zip(rows).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.row.cmp(&b.1.row)));
            rows = keyed.into_iter().map(|(_, r)| r).collect();
        }
        None => rows.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.row.cmp(&b.row))),
    }
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| SessionRecord {
            learner_id: r.learner_id,
            session_index: i as u32 + 1,
            tutor_id: r.tutor_id,
            scores: r.scores,
        })
        .collect())
}

/// Inclusive integer interval, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[u32; 2]", try_from = "[u32; 2]")]
pub struct Interval {
    pub lo: u32,
    pub hi: u32,
}

impl Interval {
    pub const fn new(lo: u32, hi: u32) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: u32) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl From<Interval> for [u32; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl TryFrom<[u32; 2]> for Interval {
    type Error = String;

    fn try_from([lo, hi]: [u32; 2]) -> std::result::Result<Self, String> {
        if lo > hi {
            return Err(format!("interval [{lo},{hi}] has lo > hi"));
        }
        Ok(Interval { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Checks that intervals are ascending, pairwise disjoint and start at 2 or later.
pub fn validate_buckets(buckets: &[Interval]) -> Result<()> {
    for b in buckets {
        if b.lo > b.hi {
            return Err(Error::Config(format!("bucket {b} has lo > hi")));
        }
        if b.lo < 2 {
            return Err(Error::Config(format!("bucket {b} starts below 2 sessions")));
        }
    }
    for w in buckets.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(Error::Config(format!("buckets {} and {} overlap", w[0], w[1])));
        }
        if w[1].lo < w[0].lo {
            return Err(Error::Config(format!("buckets {} and {} are not ascending", w[0], w[1])));
        }
    }
    Ok(())
}

/// A session range clustered independently.
///
/// With `k` set the bucket is clustered at that k. Otherwise the k range in
/// `k_sweep` (or the global one) is swept and the k with the highest mean
/// silhouette is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBucket {
    pub range: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_sweep: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Session-count ranges for the slope statistics and correlation tables.
    pub session_range_buckets: Vec<Interval>,
    /// Session-count ranges clustered independently.
    pub cluster_buckets: Vec<ClusterBucket>,
    pub k_sweep: Interval,
    pub rng_seed: u64,
    pub dtw_window: Option<usize>,
    pub dtw_length_normalize: bool,
    pub entropy_log_base: f64,
    pub min_sessions_for_scores: usize,
    pub max_iter: usize,
    pub tukey_draws: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let mut session_range_buckets = vec![Interval::new(2, 5)];
        let mut lo = 6;
        while lo <= 96 {
            session_range_buckets.push(Interval::new(lo, lo + 4));
            lo += 5;
        }
        session_range_buckets.push(Interval::new(101, 499));
        Self {
            session_range_buckets,
            cluster_buckets: vec![
                ClusterBucket {
                    range: Interval::new(2, 20),
                    k: None,
                    k_sweep: None,
                },
                ClusterBucket {
                    range: Interval::new(21, 499),
                    k: Some(1),
                    k_sweep: None,
                },
            ],
            k_sweep: Interval::new(2, 20),
            rng_seed: 0,
            dtw_window: None,
            dtw_length_normalize: false,
            entropy_log_base: 2.0,
            min_sessions_for_scores: 2,
            max_iter: 100,
            tukey_draws: 200_000,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        validate_buckets(&self.session_range_buckets)?;
        let cluster_ranges: Vec<Interval> = self.cluster_buckets.iter().map(|b| b.range).collect();
        validate_buckets(&cluster_ranges)?;
        for b in &self.cluster_buckets {
            if b.k == Some(0) {
                return Err(Error::Config(format!("cluster bucket {} has k = 0", b.range)));
            }
            if let Some(s) = b.k_sweep {
                if s.lo == 0 {
                    return Err(Error::Config(format!("cluster bucket {} sweeps k from 0", b.range)));
                }
            }
        }
        if self.k_sweep.lo == 0 {
            return Err(Error::Config("k_sweep must start at 1 or above".into()));
        }
        if self.dtw_window == Some(0) {
            return Err(Error::Config("dtw_window must be positive".into()));
        }
        if !(self.entropy_log_base.is_finite() && self.entropy_log_base > 0.0 && self.entropy_log_base != 1.0) {
            return Err(Error::Config(format!(
                "entropy_log_base must be positive and not 1 (got {})",
                self.entropy_log_base
            )));
        }
        if self.min_sessions_for_scores < 2 {
            return Err(Error::Config("min_sessions_for_scores must be at least 2".into()));
        }
        if self.tukey_draws == 0 {
            return Err(Error::Config("tukey_draws must be positive".into()));
        }
        Ok(())
    }
}
