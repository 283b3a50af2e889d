//! Synthetic session logs with planted tutorship archetypes and a planted
//! relationship between distributedness and learning slopes.
//!
//! Every learner draws from its own generator stream (derived from the spec
//! seed and the learner's archetype and index), so growing
//! `n_per_archetype` leaves existing learners unchanged.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::{fixed_run_threshold, Archetype};
use crate::error::{Error, Result};
use crate::metrics::distributedness_symbols;
use crate::model::{Interval, SessionRecord, Skill};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    /// Score at session 0.
    pub base: f64,
    /// Slope of a learner with zero distributedness.
    pub slope_intercept: f64,
    /// Change in slope per bit of distributedness.
    pub slope_coeff: f64,
    /// Standard deviation of per-session Gaussian score noise.
    pub noise_sd: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self {
            base: 5.0,
            slope_intercept: 0.1,
            slope_coeff: -0.05,
            noise_sd: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_per_archetype: usize,
    /// Sequence lengths are drawn uniformly from this range. Fixed learners
    /// need at least 3 sessions and mixed learners `mixed_pool + 1` to show
    /// their pattern, so their lower bound is raised accordingly.
    pub length_range: Interval,
    pub mixed_revert_prob: f64,
    /// Number of recent tutors a mixed learner rotates over.
    pub mixed_pool: usize,
    pub score_model: ScoreModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_per_archetype: 100,
            length_range: Interval::new(2, 20),
            mixed_revert_prob: 0.9,
            mixed_pool: 4,
            score_model: ScoreModel::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.length_range;
        if r.lo < 2 || r.hi > 499 || r.lo > r.hi {
            return Err(Error::Config(format!("length_range {r} must lie within [2,499]")));
        }
        if !(self.mixed_revert_prob > 0.0 && self.mixed_revert_prob < 1.0) {
            return Err(Error::Config(format!(
                "mixed_revert_prob must lie in (0,1), got {}",
                self.mixed_revert_prob
            )));
        }
        if self.mixed_pool < 3 {
            return Err(Error::Config(format!("mixed_pool must be at least 3, got {}", self.mixed_pool)));
        }
        let m = &self.score_model;
        if ![m.base, m.slope_intercept, m.slope_coeff, m.noise_sd].iter().all(|v| v.is_finite()) || m.noise_sd < 0.0 {
            return Err(Error::Config("score model values must be finite with noise_sd >= 0".into()));
        }
        Ok(())
    }
}

/// A generated learner before expansion into session rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLearner {
    pub learner_id: String,
    pub archetype: Archetype,
    pub tutors: Vec<String>,
    pub distributedness: f64,
    pub planted_slope: f64,
    pub scores: BTreeMap<Skill, Vec<f64>>,
}

pub fn generate(spec: &SynthSpec) -> Result<Vec<SessionRecord>> {
    Ok(generate_learners(spec)?
        .into_iter()
        .flat_map(|l| {
            let learner_id = l.learner_id;
            let scores = l.scores;
            l.tutors.into_iter().enumerate().map(move |(i, tutor_id)| SessionRecord {
                learner_id: learner_id.clone(),
                session_index: i as u32 + 1,
                tutor_id,
                scores: Skill::ALL.iter().map(|&s| (s, scores[&s][i])).collect(),
            })
        })
        .collect())
}

pub fn generate_learners(spec: &SynthSpec) -> Result<Vec<SynthLearner>> {
    spec.validate()?;
    let width = spec.n_per_archetype.max(1).to_string().len().max(4);
    let mut out = Vec::with_capacity(3 * spec.n_per_archetype);
    for (a_idx, archetype) in Archetype::ALL.into_iter().enumerate() {
        for i in 0..spec.n_per_archetype {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(((a_idx as u64) << 32) | i as u64);
            let learner_id = format!("{archetype}-{i:0width$}");
            out.push(generate_one(spec, archetype, learner_id, &mut rng));
        }
    }
    Ok(out)
}

fn generate_one(spec: &SynthSpec, archetype: Archetype, learner_id: String, rng: &mut ChaCha8Rng) -> SynthLearner {
    let lo = match archetype {
        Archetype::Diverse => spec.length_range.lo,
        Archetype::Fixed => spec.length_range.lo.max(3),
        Archetype::Mixed => spec.length_range.lo.max(spec.mixed_pool as u32 + 1),
    };
    let hi = spec.length_range.hi.max(lo);
    let len = rng.random_range(lo..=hi) as usize;
    let symbols = match archetype {
        Archetype::Diverse => (0..len).collect(),
        Archetype::Fixed => fixed_symbols(len, rng),
        Archetype::Mixed => mixed_symbols(len, spec.mixed_pool, spec.mixed_revert_prob, rng),
    };
    let tutors = symbols.iter().map(|s| format!("{learner_id}-t{s}")).collect();

    let distributedness = distributedness_symbols(&symbols, 2.0);
    let m = spec.score_model;
    let planted_slope = m.slope_intercept + m.slope_coeff * distributedness;
    let noise = Normal::new(0.0, m.noise_sd).expect("validated noise_sd");
    let scores = Skill::ALL
        .iter()
        .map(|&skill| {
            let series = (1..=len)
                .map(|session| m.base + planted_slope * session as f64 + noise.sample(rng))
                .collect();
            (skill, series)
        })
        .collect();
    SynthLearner {
        learner_id,
        archetype,
        tutors,
        distributedness,
        planted_slope,
        scores,
    }
}

/// One to four exploratory tutors, the last of whom is kept for the rest.
fn fixed_symbols(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let max_explore = 4.min(len - fixed_run_threshold(len)).max(1);
    let explore = rng.random_range(1..=max_explore);
    (0..len).map(|i| i.min(explore - 1)).collect()
}

/// Rotation over the `pool` most recently seen tutors: each session either
/// returns to one of the two least recently seen of them or brings in a new
/// tutor, who displaces the oldest. The first `pool` sessions fill the pool.
/// At least one return is planted.
fn mixed_symbols(len: usize, pool: usize, revert_prob: f64, rng: &mut impl Rng) -> Vec<usize> {
    let mut symbols: Vec<usize> = (0..pool).collect();
    // least recently seen first
    let mut recent: Vec<usize> = (0..pool).collect();
    let mut next = pool;
    let mut reverted = false;
    for _ in pool..len {
        let s = if rng.random_bool(revert_prob) {
            reverted = true;
            recent.remove(rng.random_range(0..2))
        } else {
            recent.remove(0);
            next += 1;
            next - 1
        };
        recent.push(s);
        symbols.push(s);
    }
    if !reverted {
        // all new so far: the least recently seen pool member is `pool` back
        let pos = rng.random_range(pool..len);
        symbols[pos] = symbols[pos - pool];
    }
    symbols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_symbols, label_values};

    #[test]
    fn labels_match_planted_archetypes() {
        let spec = SynthSpec {
            n_per_archetype: 1,
            length_range: Interval::new(6, 6),
            seed: 11,
            ..Default::default()
        };
        let learners = generate_learners(&spec).unwrap();
        assert_eq!(learners.len(), 3);
        for l in &learners {
            assert_eq!(l.tutors.len(), 6);
            let enc = encode_symbols(&l.tutors, -1);
            assert_eq!(label_values(&enc), l.archetype, "{:?}", enc);
        }
    }

    #[test]
    fn adding_learners_keeps_existing_ones() {
        let small = SynthSpec {
            n_per_archetype: 3,
            ..Default::default()
        };
        let big = SynthSpec {
            n_per_archetype: 5,
            ..small.clone()
        };
        let a = generate_learners(&small).unwrap();
        let b = generate_learners(&big).unwrap();
        for l in &a {
            let m = b.iter().find(|x| x.learner_id == l.learner_id).unwrap();
            assert_eq!(m, l);
        }
    }

    #[test]
    fn zero_model_gives_flat_scores() {
        let spec = SynthSpec {
            n_per_archetype: 4,
            score_model: ScoreModel {
                base: 3.0,
                slope_intercept: 0.0,
                slope_coeff: 0.0,
                noise_sd: 0.0,
            },
            ..Default::default()
        };
        for r in generate(&spec).unwrap() {
            for v in r.scores.values() {
                assert_eq!(*v, 3.0);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad_len = SynthSpec {
            length_range: Interval::new(1, 5),
            ..Default::default()
        };
        assert!(bad_len.validate().is_err());
        let bad_p = SynthSpec {
            mixed_revert_prob: 1.0,
            ..Default::default()
        };
        assert!(bad_p.validate().is_err());
        let bad_pool = SynthSpec {
            mixed_pool: 2,
            ..Default::default()
        };
        assert!(bad_pool.validate().is_err());
    }

    #[test]
    fn mixed_rotates_over_recent_tutors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in 5..30 {
            let syms = mixed_symbols(len, 4, 0.7, &mut rng);
            assert_eq!(syms.len(), len);
            let enc = encode_symbols(&syms, -1);
            assert!(enc.iter().any(|&v| v > 0));
            assert!(enc[..4].iter().all(|&v| v == -1));
            // returns skip at least the two most recent tutors
            assert!(enc.iter().all(|&v| v == -1 || v >= 3), "{enc:?}");
            assert_ne!(label_values(&enc), Archetype::Diverse);
        }
    }
}
