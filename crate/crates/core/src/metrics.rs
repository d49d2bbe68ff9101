//! Text-overlap metrics over integer token sequences.
//!
//! Every metric returns a value in `[0, 1]` and doubles as an RL reward and a
//! validation score.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u32;

/// Floor applied to each clipped n-gram count so short sequences never get a
/// hard zero BLEU.
pub const BLEU_EPSILON: f64 = 0.1;
pub const BLEU_MAX_N: usize = 4;

/// Identity of one reward/validation metric within a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricId {
    pub name: String,
    pub index: usize,
}

impl MetricId {
    pub fn new(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            index,
        }
    }

    /// Dense ids `0..names.len()`.
    pub fn dense<S: AsRef<str>>(names: &[S]) -> Vec<MetricId> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| MetricId::new(n.as_ref(), i))
            .collect()
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The text metrics the toy generator optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMetric {
    RougeL,
    Bleu,
    Coverage,
}

impl TextMetric {
    pub const ALL: [TextMetric; 3] = [TextMetric::RougeL, TextMetric::Bleu, TextMetric::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            TextMetric::RougeL => "rouge_l",
            TextMetric::Bleu => "bleu",
            TextMetric::Coverage => "coverage",
        }
    }

    /// Scores `candidate` against a reference and its keyword set.
    pub fn score(
        self,
        candidate: &[Token],
        reference: &[Token],
        keywords: &BTreeSet<Token>,
    ) -> f64 {
        match self {
            TextMetric::RougeL => rouge_l_f1(candidate, reference),
            TextMetric::Bleu => bleu(candidate, reference, BLEU_MAX_N),
            TextMetric::Coverage => keyword_coverage(candidate, keywords).unwrap_or(0.0),
        }
    }
}

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_length(a: &[Token], b: &[Token]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L with beta = 1. Zero when either side is empty.
pub fn rouge_l_f1(candidate: &[Token], reference: &[Token]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Clipped n-gram matches and candidate n-gram total for one order `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NgramCounts {
    pub clipped: usize,
    pub total: usize,
}

impl std::ops::AddAssign for NgramCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.clipped += rhs.clipped;
        self.total += rhs.total;
    }
}

fn ngram_histogram(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Modified (clipped) n-gram precision counts.
pub fn ngram_counts(candidate: &[Token], reference: &[Token], n: usize) -> NgramCounts {
    let cand = ngram_histogram(candidate, n);
    let reference = ngram_histogram(reference, n);
    let clipped = cand
        .iter()
        .map(|(gram, &c)| c.min(reference.get(gram).copied().unwrap_or(0)))
        .sum();
    NgramCounts {
        clipped,
        total: cand.values().sum(),
    }
}

fn smoothed_precision(counts: NgramCounts) -> f64 {
    (counts.clipped as f64).max(BLEU_EPSILON) / counts.total.max(1) as f64
}

fn combine(counts: &[NgramCounts], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    let log_mean = counts
        .iter()
        .map(|&c| smoothed_precision(c).ln())
        .sum::<f64>()
        / counts.len() as f64;
    let brevity = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    (brevity * log_mean.exp()).clamp(0.0, 1.0)
}

/// Sentence-level BLEU with epsilon-floored counts and brevity penalty.
pub fn bleu(candidate: &[Token], reference: &[Token], max_n: usize) -> f64 {
    let max_n = max_n.max(1);
    let counts: Vec<NgramCounts> = (1..=max_n)
        .map(|n| ngram_counts(candidate, reference, n))
        .collect();
    combine(&counts, candidate.len(), reference.len())
}

/// Corpus-level BLEU: counts and lengths are summed over all pairs before
/// the precisions and brevity penalty are formed.
pub fn corpus_bleu<'a, I>(pairs: I, max_n: usize) -> f64
where
    I: IntoIterator<Item = (&'a [Token], &'a [Token])>,
{
    let max_n = max_n.max(1);
    let mut counts = vec![NgramCounts::default(); max_n];
    let (mut cand_len, mut ref_len) = (0, 0);
    for (cand, reference) in pairs {
        for (n, slot) in counts.iter_mut().enumerate() {
            *slot += ngram_counts(cand, reference, n + 1);
        }
        cand_len += cand.len();
        ref_len += reference.len();
    }
    combine(&counts, cand_len, ref_len)
}

/// Fraction of `keywords` present at least once in `candidate`.
///
/// Stands in for classifier-based rewards: it ignores token order, so it is
/// only partly correlated with the overlap metrics.
pub fn keyword_coverage(candidate: &[Token], keywords: &BTreeSet<Token>) -> Result<f64> {
    if keywords.is_empty() {
        return Err(Error::invalid("keyword set is empty"));
    }
    let present: BTreeSet<Token> = candidate.iter().copied().collect();
    let hits = keywords.intersection(&present).count();
    Ok(hits as f64 / keywords.len() as f64)
}
