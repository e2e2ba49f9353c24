use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-6;

/// Distribution over the senses of one word in one period, as produced by
/// an external sense-change topic model.
#[derive(Clone, Debug, PartialEq)]
pub struct SenseDistribution {
    pub word: String,
    pub period: String,
    pub probs: Vec<f64>,
}

/// Word -> (distribution in the first period, distribution in the second).
pub type SensePairs = BTreeMap<String, (SenseDistribution, SenseDistribution)>;

/// Parses rows `word period p_1 .. p_K` (tab or space separated).
///
/// The first period label in the input is the earlier period, the second
/// distinct label the later one. Every word needs exactly one row per
/// period, with the same `K`. Rows summing to 1 within 1e-6 are rescaled
/// to sum to 1 exactly.
pub fn parse_sense_distributions(text: &str, source: &Path) -> Result<SensePairs> {
    let mut periods: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, [Option<SenseDistribution>; 2]> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::parse(source, no, "expected word, period and probabilities"));
        }
        let probs: Vec<f64> = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(source, no, format!("bad probability {f:?}")))
            })
            .collect::<Result<_>>()?;
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!("line {no}: negative or non-finite entry")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("line {no}: probabilities sum to {sum}")));
        }
        let period = fields[1].to_owned();
        let slot = match periods.iter().position(|p| *p == period) {
            Some(s) => s,
            None if periods.len() < 2 => {
                periods.push(period.clone());
                periods.len() - 1
            }
            None => {
                return Err(Error::parse(source, no, format!("third period label {period:?}")));
            }
        };
        let word = fields[0].to_owned();
        let entry = rows.entry(word.clone()).or_default();
        if entry[slot].is_some() {
            return Err(Error::parse(source, no, format!("duplicate row for {word:?} in {period:?}")));
        }
        entry[slot] = Some(SenseDistribution {
            word,
            period,
            probs: probs.iter().map(|p| p / sum).collect(),
        });
    }

    let mut out = SensePairs::new();
    for (word, [a, b]) in rows {
        let (Some(a), Some(b)) = (a, b) else {
            return Err(Error::InvalidDistribution(format!("{word:?} lacks a row for both periods")));
        };
        if a.probs.len() != b.probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{word:?} has {} senses in one period and {} in the other",
                a.probs.len(),
                b.probs.len()
            )));
        }
        out.insert(word, (a, b));
    }
    Ok(out)
}

pub fn load_sense_distributions(path: &Path) -> Result<SensePairs> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sense_distributions(&text, path)
}
