//! Gold rankings, Spearman evaluation, averaging over repeated runs, and a
//! synthetic corpus pair with known change.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::measures::ChangeScores;
use crate::util::{self, seeded_rng};

pub const DUREL_TSV: &str = include_str!("../data/durel.tsv");
pub const SUREL_TSV: &str = include_str!("../data/surel.tsv");

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GoldName {
    Durel,
    Surel,
    Custom(String),
}

impl fmt::Display for GoldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoldName::Durel => f.write_str("DURel"),
            GoldName::Surel => f.write_str("SURel"),
            GoldName::Custom(name) => f.write_str(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoldSource {
    Durel,
    Surel,
    Path(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldEntry {
    pub lexeme: String,
    pub pos: String,
    /// Higher means more change.
    pub score: f64,
    pub freq_a: Option<u64>,
    pub freq_b: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldRanking {
    pub name: GoldName,
    pub entries: Vec<GoldEntry>,
}

impl GoldRanking {
    pub fn new(name: GoldName, entries: Vec<GoldEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.lexeme.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate lexeme {:?} in gold data", e.lexeme)));
            }
            if !e.score.is_finite() {
                return Err(Error::NonFinite(format!("gold score of {:?}", e.lexeme)));
            }
        }
        Ok(GoldRanking { name, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lexemes(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.lexeme.as_str())
    }

    pub fn get(&self, lexeme: &str) -> Option<&GoldEntry> {
        self.entries.iter().find(|e| e.lexeme == lexeme)
    }

    /// Entries by descending score; ties keep file order.
    pub fn ranked(&self) -> Vec<&GoldEntry> {
        let mut out: Vec<&GoldEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score));
        out
    }

    /// Writes the ranking in the same TSV layout that [`parse_gold`] reads.
    pub fn write_tsv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "lexeme\tpos\tscore\tfreq_a\tfreq_b")?;
        let opt = |f: Option<u64>| f.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{:?}\t{}\t{}", e.lexeme, e.pos, e.score, opt(e.freq_a), opt(e.freq_b))?;
        }
        Ok(())
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, |w| self.write_tsv_to(w))
    }
}

/// Parses a gold TSV: header `lexeme pos score [freq_a freq_b]`, one row per
/// lexeme.
pub fn parse_gold(text: &str, name: GoldName, source: &Path) -> Result<GoldRanking> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::parse(source, 0, "empty gold file"));
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols.len() < 3 || cols[..3] != ["lexeme", "pos", "score"] {
        return Err(Error::parse(source, 1, "header must start with lexeme, pos, score"));
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() < 3 {
            return Err(Error::parse(source, no, "expected at least three columns"));
        }
        let score = f[2]
            .parse::<f64>()
            .map_err(|_| Error::parse(source, no, format!("bad score {:?}", f[2])))?;
        let freq = |k: usize| -> Result<Option<u64>> {
            match f.get(k) {
                None | Some(&"") => Ok(None),
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::parse(source, no, format!("bad frequency {s:?}"))),
            }
        };
        entries.push(GoldEntry {
            lexeme: f[0].to_owned(),
            pos: f[1].to_owned(),
            score,
            freq_a: freq(3)?,
            freq_b: freq(4)?,
        });
    }
    if entries.is_empty() {
        return Err(Error::parse(source, 1, "gold file has no rows"));
    }
    GoldRanking::new(name, entries).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::parse(source, 0, m),
        other => other,
    })
}

/// Raw TSV text of an embedded fixture.
pub fn embedded_gold_text(source: &GoldSource) -> Option<&'static str> {
    match source {
        GoldSource::Durel => Some(DUREL_TSV),
        GoldSource::Surel => Some(SUREL_TSV),
        GoldSource::Path(_) => None,
    }
}

pub fn load_gold(source: &GoldSource) -> Result<GoldRanking> {
    match source {
        GoldSource::Durel => parse_gold(DUREL_TSV, GoldName::Durel, Path::new("<durel>")),
        GoldSource::Surel => parse_gold(SUREL_TSV, GoldName::Surel, Path::new("<surel>")),
        GoldSource::Path(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into());
            parse_gold(&text, GoldName::Custom(name), path)
        }
    }
}

/// Ranks starting at 1; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("all values tied on one side; correlation undefined".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} and {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::TooFewItems(x.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub rho: f64,
    pub n: usize,
    /// Gold lexemes without a predicted score, in gold order.
    pub excluded: Vec<String>,
    pub config_hash: String,
    pub iterations: usize,
}

impl EvaluationReport {
    /// `metric<TAB>value` rows.
    pub fn write_tsv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "metric\tvalue")?;
        writeln!(w, "rho\t{:.12}", self.rho)?;
        writeln!(w, "n\t{}", self.n)?;
        writeln!(w, "excluded\t{}", self.excluded.join(","))?;
        writeln!(w, "iterations\t{}", self.iterations)?;
        writeln!(w, "config\t{}", self.config_hash)
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Spearman rho  {:.4}", self.rho)?;
        writeln!(f, "items         {}", self.n)?;
        if !self.excluded.is_empty() {
            writeln!(f, "excluded      {}", self.excluded.join(", "))?;
        }
        writeln!(f, "iterations    {}", self.iterations)?;
        write!(f, "config        {}", self.config_hash)
    }
}

/// Correlates gold scores with predicted scores over the lexemes present in
/// both. Gold lexemes without a prediction are listed, not imputed.
pub fn spearman(gold: &GoldRanking, predicted: &ChangeScores) -> Result<EvaluationReport> {
    let mut g = Vec::new();
    let mut p = Vec::new();
    let mut excluded = Vec::new();
    for e in &gold.entries {
        match predicted.get(&e.lexeme) {
            Some(s) => {
                g.push(e.score);
                p.push(s);
            }
            None => excluded.push(e.lexeme.clone()),
        }
    }
    if g.len() < 3 {
        return Err(Error::TooFewItems(g.len()));
    }
    Ok(EvaluationReport {
        rho: spearman_rho(&g, &p)?,
        n: g.len(),
        excluded,
        config_hash: String::new(),
        iterations: predicted.iterations(),
    })
}

/// Per-word mean over runs of the same measure and word set.
pub fn aggregate_iterations(runs: &[ChangeScores]) -> Result<ChangeScores> {
    let Some(first) = runs.first() else {
        return Err(Error::TooFewItems(0));
    };
    let mut sums: BTreeMap<String, f64> = first.scores().keys().map(|w| (w.clone(), 0.0)).collect();
    for run in runs {
        if run.measure() != first.measure() {
            return Err(Error::InvalidParameter(format!(
                "cannot average {} scores with {} scores",
                run.measure(),
                first.measure()
            )));
        }
        if run.len() != sums.len() || run.scores().keys().any(|w| !sums.contains_key(w)) {
            return Err(Error::InvalidParameter("runs score different word sets".into()));
        }
        for (w, s) in run.scores() {
            *sums.get_mut(w).expect("checked above") += s;
        }
    }
    let n = runs.len() as f64;
    let total_iterations = runs.iter().map(ChangeScores::iterations).sum();
    let means = sums.into_iter().map(|(w, s)| (w, s / n)).collect();
    ChangeScores::with_iterations(first.measure(), means, total_iterations)
}

/// Layout of the synthetic corpus pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_targets: usize,
    pub tokens_per_corpus: usize,
    pub seed: u64,
    /// Topics of background vocabulary. Topic 0 is the first sense of every
    /// target, topic 1 the second.
    pub topics: usize,
    pub words_per_topic: usize,
    pub sentence_len: usize,
    /// Per-target occurrence counts are drawn uniformly from this range
    /// (per 100k tokens), independently of the change rate.
    pub target_freq: (usize, usize),
}

impl SynthConfig {
    pub fn new(n_targets: usize, tokens_per_corpus: usize, seed: u64) -> Self {
        SynthConfig {
            n_targets,
            tokens_per_corpus,
            seed,
            topics: 10,
            words_per_topic: 30,
            sentence_len: 8,
            target_freq: (60, 240),
        }
    }
}

pub fn synthetic_target(i: usize) -> String {
    format!("target{i:02}")
}

fn topic_word(topic: usize, j: usize) -> String {
    format!("t{topic}w{j:02}")
}

/// Two corpora of template sentences with graded change.
///
/// Target `i` has change rate `r_i = i / (n - 1)`. Each of its sentences is
/// the target plus words of one topic. In corpus A every occurrence uses
/// topic 0; in corpus B a fraction `r_i` of its occurrences (rounded) uses
/// topic 1 instead. Background sentences over all topics, drawn
/// identically in both corpora, fill each corpus up to the token budget.
/// The gold score of a target is `r_i`.
pub fn synthesize_change_corpus(n_targets: usize, tokens_per_corpus: usize, seed: u64) -> Result<(Corpus, Corpus, GoldRanking)> {
    synthesize_with(&SynthConfig::new(n_targets, tokens_per_corpus, seed))
}

pub fn synthesize_with(cfg: &SynthConfig) -> Result<(Corpus, Corpus, GoldRanking)> {
    if cfg.n_targets < 5 {
        return Err(Error::InvalidParameter("the synthetic benchmark needs at least 5 targets".into()));
    }
    if cfg.topics < 2 || cfg.words_per_topic == 0 || cfg.sentence_len < 2 || cfg.target_freq.0 == 0 || cfg.target_freq.0 > cfg.target_freq.1 {
        return Err(Error::InvalidParameter("degenerate synthetic layout".into()));
    }
    let mut rng = seeded_rng(cfg.seed, util::STREAM_SYNTH);
    let scale = cfg.tokens_per_corpus as f64 / 100_000.0;
    let sentence = |rng: &mut rand_chacha::ChaCha8Rng, head: Option<&str>, topic: usize| -> Vec<String> {
        let mut s: Vec<String> = head.map(str::to_owned).into_iter().collect();
        while s.len() < cfg.sentence_len {
            s.push(topic_word(topic, rng.random_range(0..cfg.words_per_topic)));
        }
        s
    };

    let mut sent_a = Vec::new();
    let mut sent_b = Vec::new();
    let mut entries = Vec::new();
    for i in 0..cfg.n_targets {
        let rate = i as f64 / (cfg.n_targets - 1) as f64;
        let freq = ((rng.random_range(cfg.target_freq.0..=cfg.target_freq.1) as f64 * scale).round() as usize).max(1);
        let target = synthetic_target(i);
        for _ in 0..freq {
            sent_a.push(sentence(&mut rng, Some(&target), 0));
        }
        let changed = (rate * freq as f64).round() as usize;
        for k in 0..freq {
            let topic = if k < changed { 1 } else { 0 };
            sent_b.push(sentence(&mut rng, Some(&target), topic));
        }
        entries.push(GoldEntry {
            lexeme: target,
            pos: "SYN".into(),
            score: rate,
            freq_a: Some(freq as u64),
            freq_b: Some(freq as u64),
        });
    }

    for sents in [&mut sent_a, &mut sent_b] {
        let mut tokens: usize = sents.iter().map(Vec::len).sum();
        while tokens < cfg.tokens_per_corpus {
            let topic = rng.random_range(0..cfg.topics);
            let s = sentence(&mut rng, None, topic);
            tokens += s.len();
            sents.push(s);
        }
        sents.shuffle(&mut rng);
    }

    let gold = GoldRanking::new(GoldName::Custom("synthetic".into()), entries)?;
    Ok((Corpus::new("synth_a", sent_a), Corpus::new("synth_b", sent_b), gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;

    fn scores(pairs: &[(&str, f64)]) -> ChangeScores {
        ChangeScores::new(Measure::Cd, pairs.iter().map(|(w, s)| (w.to_string(), *s)).collect()).unwrap()
    }

    #[test]
    fn embedded_fixtures() {
        let durel = load_gold(&GoldSource::Durel).unwrap();
        assert_eq!(durel.len(), 19);
        let top = durel.ranked()[0];
        assert_eq!((top.lexeme.as_str(), top.pos.as_str(), top.score), ("Vorwort", "NN", -1.58));
        assert_eq!((top.freq_a, top.freq_b), (Some(85), Some(273)));
        assert_eq!(durel.ranked()[18].lexeme, "Abend");

        let surel = load_gold(&GoldSource::Surel).unwrap();
        assert_eq!(surel.len(), 21);
        assert_eq!(surel.ranked()[0].lexeme, "Schnee");
        assert_eq!(surel.ranked()[20].lexeme, "Schnittlauch");

        let mut out = Vec::new();
        durel.write_tsv_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), DUREL_TSV);
    }

    #[test]
    fn custom_gold_errors() {
        let p = Path::new("g.tsv");
        assert!(parse_gold("", GoldName::Custom("g".into()), p).is_err());
        assert!(parse_gold("lexeme\tpos\tscore\n", GoldName::Custom("g".into()), p).is_err());
        assert!(parse_gold("lexeme\tpos\tscore\na\tNN\t1\na\tNN\t2\n", GoldName::Custom("g".into()), p).is_err());
        assert!(parse_gold("lexeme\tpos\tscore\na\tNN\tx\n", GoldName::Custom("g".into()), p).is_err());
        let g = parse_gold("lexeme\tpos\tscore\na\tNN\t1\nb\tVV\t2\n", GoldName::Custom("g".into()), p).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.entries[1].freq_a, None);
    }

    #[test]
    fn average_rank_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 40.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let gold = GoldRanking::new(
            GoldName::Custom("g".into()),
            ["a", "b", "c", "d", "e"]
                .iter()
                .enumerate()
                .map(|(i, w)| GoldEntry {
                    lexeme: w.to_string(),
                    pos: "NN".into(),
                    score: i as f64,
                    freq_a: None,
                    freq_b: None,
                })
                .collect(),
        )
        .unwrap();
        let same = scores(&[("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.4), ("e", 0.5)]);
        assert_eq!(spearman(&gold, &same).unwrap().rho, 1.0);
        let rev = scores(&[("a", 0.5), ("b", 0.4), ("c", 0.3), ("d", 0.2), ("e", 0.1)]);
        assert_eq!(spearman(&gold, &rev).unwrap().rho, -1.0);
        let partial = scores(&[("a", 0.1), ("c", 0.3), ("e", 0.2)]);
        let r = spearman(&gold, &partial).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.excluded, vec!["b".to_string(), "d".to_string()]);
        assert!(matches!(spearman(&gold, &scores(&[("a", 0.1), ("b", 0.2)])), Err(Error::TooFewItems(2))));
    }

    #[test]
    fn aggregation() {
        let one = scores(&[("w", 0.2), ("v", 1.0)]);
        assert_eq!(aggregate_iterations(std::slice::from_ref(&one)).unwrap(), one);
        let two = scores(&[("w", 0.4), ("v", 1.0)]);
        let avg = aggregate_iterations(&[one.clone(), two]).unwrap();
        assert!((avg.get("w").unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(avg.iterations(), 2);
        assert!(aggregate_iterations(&[one, scores(&[("x", 0.1), ("v", 1.0)])]).is_err());
        assert!(aggregate_iterations(&[]).is_err());
    }

    fn context_counts(c: &Corpus, target: &str) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for s in c.sentences().iter().filter(|s| s.contains(&target.to_string())) {
            for w in s.iter().filter(|w| *w != target) {
                let topic: usize = w[1..w.find('w').unwrap()].parse().unwrap();
                *out.entry(topic).or_insert(0) += 1;
            }
        }
        out
    }

    #[test]
    fn synthetic_construction() {
        let (a, b, gold) = synthesize_change_corpus(5, 20_000, 1).unwrap();
        assert!(a.token_count() >= 20_000 && b.token_count() >= 20_000);
        let rates: Vec<f64> = gold.entries.iter().map(|e| e.score).collect();
        assert_eq!(rates, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        // r = 0: topic 0 only on both sides
        assert_eq!(context_counts(&a, "target00").keys().collect::<Vec<_>>(), vec![&0]);
        assert_eq!(context_counts(&b, "target00").keys().collect::<Vec<_>>(), vec![&0]);
        // r = 1: disjoint pools
        assert_eq!(context_counts(&b, "target04").keys().collect::<Vec<_>>(), vec![&1]);
        assert!(synthesize_change_corpus(4, 1000, 1).is_err());
        assert_eq!(synthesize_change_corpus(5, 20_000, 1).unwrap().0, a);
    }
}
