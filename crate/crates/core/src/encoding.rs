//! Offset encoding of tutorship sequences.
//!
//! Each session is encoded as the number of sessions since the learner last
//! met the same tutor, or as a negative sentinel when the tutor is new. The
//! sentinel keeps first meetings numerically far from short returns, so
//! `⟨abcabc⟩` becomes `⟨-1 -1 -1 3 3 3⟩`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TutorshipSequence;

/// Encoded value for a tutor's first appearance.
pub const NEW_TUTOR: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub learner_id: String,
    pub values: Vec<i32>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Space-separated values, the CLI's on-disk form.
    pub fn to_field(&self) -> String {
        let parts: Vec<String> = self.values.iter().map(i32::to_string).collect();
        parts.join(" ")
    }
}

pub fn encode_sequence(seq: &TutorshipSequence) -> EncodedSequence {
    encode_with_sentinel(seq, NEW_TUTOR)
}

/// Encodes with a custom new-tutor value. `sentinel` must be non-positive so
/// it cannot collide with an offset.
pub fn encode_with_sentinel(seq: &TutorshipSequence, sentinel: i32) -> EncodedSequence {
    assert!(sentinel <= 0, "new-tutor sentinel must be non-positive");
    EncodedSequence {
        learner_id: seq.learner_id.clone(),
        values: encode_symbols(&seq.tutors, sentinel),
    }
}

/// Offset encoding over any hashable symbol type.
pub fn encode_symbols<T: Eq + std::hash::Hash>(symbols: &[T], sentinel: i32) -> Vec<i32> {
    let mut last: HashMap<&T, usize> = HashMap::with_capacity(symbols.len());
    symbols
        .iter()
        .enumerate()
        .map(|(i, s)| match last.insert(s, i) {
            Some(prev) => (i - prev) as i32,
            None => sentinel,
        })
        .collect()
}

/// Reconstructs which positions share a tutor.
///
/// Classes are returned in order of first appearance, each with ascending
/// positions.
pub fn recover_partition(enc: &EncodedSequence) -> Result<Vec<Vec<usize>>> {
    recover_partition_values(&enc.values)
}

pub fn recover_partition_values(values: &[i32]) -> Result<Vec<Vec<usize>>> {
    let mut class_of: Vec<usize> = Vec::with_capacity(values.len());
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let class = if v == NEW_TUTOR {
            classes.push(Vec::new());
            classes.len() - 1
        } else if v >= 1 {
            let back = v as usize;
            if back > i {
                return Err(Error::MalformedEncoding {
                    position: i,
                    message: format!("offset {v} points before the start of the sequence"),
                });
            }
            let c = class_of[i - back];
            // the offset must land on the most recent occurrence of its class
            if classes[c].last() != Some(&(i - back)) {
                return Err(Error::MalformedEncoding {
                    position: i,
                    message: format!(
                        "offset {v} skips a more recent session with the same tutor"
                    ),
                });
            }
            c
        } else {
            return Err(Error::MalformedEncoding {
                position: i,
                message: format!("value {v} is neither {NEW_TUTOR} nor a positive offset"),
            });
        };
        classes[class].push(i);
        class_of.push(class);
    }
    Ok(classes)
}

/// Interpretive label for the three tutorship patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    /// Always a new tutor.
    Diverse,
    /// New tutors with occasional returns to earlier ones.
    Mixed,
    /// Some exploration, then one tutor.
    Fixed,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Diverse, Archetype::Mixed, Archetype::Fixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Diverse => "diverse",
            Archetype::Mixed => "mixed",
            Archetype::Fixed => "fixed",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Minimum terminal run of `1`s for a sequence of length `len` to count as fixed.
pub fn fixed_run_threshold(len: usize) -> usize {
    // ceil(0.4 * len) in integer arithmetic
    let forty_pct = (2 * len).div_ceil(5);
    forty_pct.max(2)
}

/// Rule-based archetype label.
///
/// Diverse when every session is a new tutor, fixed when the sequence ends
/// with a run of same-tutor sessions of at least [`fixed_run_threshold`],
/// mixed otherwise. This is a deterministic proxy for reading cluster
/// plots, not a substitute for the clustering itself.
pub fn label_archetype(enc: &EncodedSequence) -> Archetype {
    label_values(&enc.values)
}

pub fn label_values(values: &[i32]) -> Archetype {
    if values.iter().all(|&v| v == NEW_TUTOR) {
        return Archetype::Diverse;
    }
    let run = values.iter().rev().take_while(|&&v| v == 1).count();
    if run >= fixed_run_threshold(values.len()) {
        Archetype::Fixed
    } else {
        Archetype::Mixed
    }
}
