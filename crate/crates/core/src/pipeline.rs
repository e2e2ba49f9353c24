//! End-to-end runs: corpus pair -> space -> alignment -> measure ->
//! evaluation, driven by a flat key=value configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::align::{
    column_intersect, orthogonal_procrustes_with, pair_on_shared_rows, shared_random_align,
    vector_initialization_align, AlignMethod, AlignedPair, Dewhiten, ExtendedSteps, ProcrustesSolution,
    ProcrustesVariant,
};
use crate::corpus::{
    apply_threshold, downsample_targets, extract_windows, inject_targets, load_corpus, shuffle_control, Corpus,
    Vocabulary, WindowMode, WindowPolicy,
};
use crate::error::{Error, Result, StageExt};
use crate::eval::{self, load_gold, spearman, EvaluationReport, GoldRanking, GoldSource};
use crate::measures::{self, ChangeScores, Measure, RowSpace};
use crate::spaces::{
    count_matrix, load_sense_distributions, make_random_matrix, ppmi_transform, random_index, subsample_counts,
    svd_reduce, train_sgns, CooccurrenceMatrix, EmbeddingMatrix, SensePairs, SpaceConfig,
};
use crate::util;

macro_rules! tagged_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $tag:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn tag(self) -> &'static str {
                match self {
                    $($name::$variant => $tag),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.tag() == s)
                    .ok_or_else(|| {
                        let tags: Vec<&str> = $name::ALL.iter().map(|v| v.tag()).collect();
                        format!("unknown value {s:?} (expected one of {})", tags.join(", "))
                    })
            }
        }
    };
}

tagged_enum!(
    /// Word representation.
    SpaceKind {
        Count => "count",
        Ppmi => "ppmi",
        Svd => "svd",
        Ri => "ri",
        Sgns => "sgns",
        SenseDist => "sense-dist",
    }
);

tagged_enum!(
    AlignKind {
        Ci => "ci",
        Srv => "srv",
        Op => "op",
        OpMinus => "op-",
        OpPlus => "op+",
        Vi => "vi",
        Wi => "wi",
        None => "none",
    }
);

tagged_enum!(
    Control {
        None => "none",
        Shuffle => "shuffle",
        ShuffleDownsample => "shuffle+downsample",
    }
);

impl AlignKind {
    fn procrustes_variant(self) -> Option<ProcrustesVariant> {
        match self {
            AlignKind::Op => Some(ProcrustesVariant::Standard),
            AlignKind::OpMinus => Some(ProcrustesVariant::NoCentering),
            AlignKind::OpPlus => Some(ProcrustesVariant::Extended),
            _ => None,
        }
    }
}

fn allowed_alignments(space: SpaceKind) -> &'static [AlignKind] {
    use AlignKind::*;
    match space {
        SpaceKind::Count | SpaceKind::Ppmi => &[Ci, Wi],
        SpaceKind::Svd => &[Op, OpMinus, OpPlus, Wi, None],
        SpaceKind::Ri => &[Srv, Op, OpMinus, OpPlus, Wi, None],
        SpaceKind::Sgns => &[Op, OpMinus, OpPlus, Vi, Wi, None],
        SpaceKind::SenseDist => &[None],
    }
}

fn allowed_measures(space: SpaceKind) -> &'static [Measure] {
    use Measure::*;
    match space {
        SpaceKind::Count => &[Cd, Lnd, Td, Hd, HdNorm],
        SpaceKind::Ppmi | SpaceKind::Svd | SpaceKind::Ri | SpaceKind::Sgns => &[Cd, Lnd],
        SpaceKind::SenseDist => &[Jsd, Hd, HdNorm],
    }
}

fn list<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

/// Checks a (space, alignment, measure) triple against the compatibility
/// table. Frequency difference is computed from the corpora alone and is
/// accepted only as `(count, none, fd)`.
pub fn check_combination(space: SpaceKind, align: AlignKind, measure: Measure) -> std::result::Result<(), String> {
    if measure == Measure::Fd {
        return if (space, align) == (SpaceKind::Count, AlignKind::None) {
            Ok(())
        } else {
            Err(format!(
                "fd is computed from the corpora: use space=count align=none (got space={space} align={align})"
            ))
        };
    }
    let aligns = allowed_alignments(space);
    if !aligns.contains(&align) {
        return Err(format!(
            "alignment {align} is not defined for space {space} (allowed: {})",
            list(aligns)
        ));
    }
    let ms = allowed_measures(space);
    if !ms.contains(&measure) {
        return Err(format!("measure {measure} is not defined for space {space} (allowed: {})", list(ms)));
    }
    Ok(())
}

/// Everything a run needs. Parsed from `key = value` lines; later settings
/// override earlier ones.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub corpus_a: Option<PathBuf>,
    pub corpus_b: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub sense_path: Option<PathBuf>,
    pub space: SpaceKind,
    pub align: AlignKind,
    pub measure: Measure,
    pub space_cfg: SpaceConfig,
    /// Window mode; `None` means fixed windows for count-based spaces and
    /// dynamic windows for SGNS.
    pub window_mode: Option<WindowMode>,
    pub min_count_a: u64,
    pub min_count_b: u64,
    pub gold: Option<GoldSource>,
    pub iterations: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub control: Control,
    pub lnd_k: usize,
    pub wi_suffix: String,
    pub wi_center: bool,
    pub downsample_n: usize,
    pub op_steps: ExtendedSteps,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_a: None,
            corpus_b: None,
            targets: None,
            sense_path: None,
            space: SpaceKind::Sgns,
            align: AlignKind::Op,
            measure: Measure::Cd,
            space_cfg: SpaceConfig::default(),
            window_mode: None,
            min_count_a: 1,
            min_count_b: 1,
            gold: None,
            iterations: 1,
            seed: 0,
            out: None,
            control: Control::None,
            lnd_k: 25,
            wi_suffix: "_".into(),
            wi_center: false,
            downsample_n: 50,
            op_steps: ExtendedSteps::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_opt_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<Option<T>, String> {
    if value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
}

fn show_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

impl PipelineConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_inner(key.trim(), value.trim()).map_err(|m| Error::Config(vec![m]))
    }

    fn set_inner(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let with_key = |m: String| if m.starts_with(key) { m } else { format!("{key}: {m}") };
        let sc = &mut self.space_cfg;
        match key {
            "corpus_a" => self.corpus_a = opt_path(value),
            "corpus_b" => self.corpus_b = opt_path(value),
            "targets" => self.targets = opt_path(value),
            "sense_path" => self.sense_path = opt_path(value),
            "out" => self.out = opt_path(value),
            "space" => self.space = value.parse().map_err(with_key)?,
            "align" => self.align = value.parse().map_err(with_key)?,
            "measure" => self.measure = value.parse().map_err(|e: Error| format!("{key}: {e}"))?,
            "control" => self.control = value.parse().map_err(with_key)?,
            "gold" => {
                self.gold = match value {
                    "none" | "" => None,
                    "durel" => Some(GoldSource::Durel),
                    "surel" => Some(GoldSource::Surel),
                    path => Some(GoldSource::Path(PathBuf::from(path))),
                }
            }
            "iterations" => self.iterations = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "min_count_a" => self.min_count_a = parse_num(key, value)?,
            "min_count_b" => self.min_count_b = parse_num(key, value)?,
            "min_count" => {
                self.min_count_a = parse_num(key, value)?;
                self.min_count_b = self.min_count_a;
            }
            "dim" => sc.dim = parse_num(key, value)?,
            "k" => sc.k = parse_num(key, value)?,
            "alpha" => sc.alpha = parse_num(key, value)?,
            "t_sub" => sc.t_sub = parse_opt_num(key, value)?,
            "eig_p" => sc.eig_p = parse_num(key, value)?,
            "ri_nonzeros" => sc.ri_nonzeros = parse_num(key, value)?,
            "epochs" => sc.epochs = parse_num(key, value)?,
            "vi_epochs" => sc.vi_epochs = parse_opt_num(key, value)?,
            "window" => sc.window.size = parse_num(key, value)?,
            "window_mode" => {
                self.window_mode = match value {
                    "auto" => None,
                    "fixed" => Some(WindowMode::Fixed),
                    "dynamic" => Some(WindowMode::Dynamic),
                    _ => return Err(format!("{key}: expected fixed, dynamic or auto, got {value:?}")),
                }
            }
            "lr_start" => sc.lr_start = parse_num(key, value)?,
            "lr_end" => sc.lr_end = parse_num(key, value)?,
            "neg_exponent" => sc.neg_exponent = parse_num(key, value)?,
            "workers" => sc.workers = parse_num(key, value)?,
            "lnd_k" => self.lnd_k = parse_num(key, value)?,
            "wi_suffix" => self.wi_suffix = value.to_owned(),
            "wi_center" => self.wi_center = parse_bool(key, value)?,
            "downsample_n" => self.downsample_n = parse_num(key, value)?,
            "op_whiten" => self.op_steps.whiten = parse_bool(key, value)?,
            "op_reweight" => self.op_steps.reweight = parse_num(key, value)?,
            "op_dewhiten" => {
                self.op_steps.dewhiten = match value {
                    "none" => Dewhiten::None,
                    "own" => Dewhiten::Own,
                    "opposite" => Dewhiten::Opposite,
                    _ => return Err(format!("{key}: expected none, own or opposite, got {value:?}")),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped. All problems are reported together.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut problems = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    if let Err(m) = self.set_inner(k.trim(), v.trim()) {
                        problems.push(format!("line {}: {m}", i + 1));
                    }
                }
                None => problems.push(format!("line {}: expected key = value", i + 1)),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn resolved_window(&self) -> WindowPolicy {
        let mode = self.window_mode.unwrap_or(match self.space {
            SpaceKind::Sgns => WindowMode::Dynamic,
            _ => WindowMode::Fixed,
        });
        WindowPolicy {
            size: self.space_cfg.window.size,
            mode,
        }
    }

    /// Space settings for iteration seed `seed`.
    pub fn space_config(&self, seed: u64) -> SpaceConfig {
        SpaceConfig {
            window: self.resolved_window(),
            seed,
            ..self.space_cfg.clone()
        }
    }

    /// Whether repeated runs can differ, so that iterations are averaged.
    pub fn has_randomness(&self) -> bool {
        matches!(self.space, SpaceKind::Ri | SpaceKind::Sgns)
            || self.control != Control::None
            || (self.resolved_window().mode == WindowMode::Dynamic && self.space != SpaceKind::SenseDist)
    }

    /// Iterations actually run.
    pub fn effective_iterations(&self) -> usize {
        if self.has_randomness() {
            self.iterations.max(1)
        } else {
            1
        }
    }

    /// Every setting that affects the result, one `key = value` per line,
    /// in a fixed order. The output directory is not included.
    pub fn echo(&self) -> String {
        let sc = &self.space_cfg;
        let window = self.resolved_window();
        let gold = match &self.gold {
            None => "none".to_string(),
            Some(GoldSource::Durel) => "durel".into(),
            Some(GoldSource::Surel) => "surel".into(),
            Some(GoldSource::Path(p)) => p.display().to_string(),
        };
        let dewhiten = match self.op_steps.dewhiten {
            Dewhiten::None => "none",
            Dewhiten::Own => "own",
            Dewhiten::Opposite => "opposite",
        };
        let rows: Vec<(&str, String)> = vec![
            ("corpus_a", show_path(&self.corpus_a)),
            ("corpus_b", show_path(&self.corpus_b)),
            ("targets", show_path(&self.targets)),
            ("sense_path", show_path(&self.sense_path)),
            ("gold", gold),
            ("space", self.space.to_string()),
            ("align", self.align.to_string()),
            ("measure", self.measure.to_string()),
            ("control", self.control.to_string()),
            ("iterations", self.effective_iterations().to_string()),
            ("seed", self.seed.to_string()),
            ("min_count_a", self.min_count_a.to_string()),
            ("min_count_b", self.min_count_b.to_string()),
            ("dim", sc.dim.to_string()),
            ("k", sc.k.to_string()),
            ("alpha", sc.alpha.to_string()),
            ("t_sub", show_opt(&sc.t_sub)),
            ("eig_p", sc.eig_p.to_string()),
            ("ri_nonzeros", sc.ri_nonzeros.to_string()),
            ("epochs", sc.epochs.to_string()),
            ("vi_epochs", show_opt(&sc.vi_epochs)),
            ("window", window.size.to_string()),
            (
                "window_mode",
                match window.mode {
                    WindowMode::Fixed => "fixed".into(),
                    WindowMode::Dynamic => "dynamic".into(),
                },
            ),
            ("lr_start", sc.lr_start.to_string()),
            ("lr_end", sc.lr_end.to_string()),
            ("neg_exponent", sc.neg_exponent.to_string()),
            ("workers", sc.workers.to_string()),
            ("lnd_k", self.lnd_k.to_string()),
            ("wi_suffix", self.wi_suffix.clone()),
            ("wi_center", self.wi_center.to_string()),
            ("downsample_n", self.downsample_n.to_string()),
            ("op_whiten", self.op_steps.whiten.to_string()),
            ("op_reweight", self.op_steps.reweight.to_string()),
            ("op_dewhiten", dewhiten.into()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`echo`](Self::echo).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Checks the configuration and returns every problem found.
pub fn validate_config(cfg: &PipelineConfig) -> Result<()> {
    let mut problems = Vec::new();
    if let Err(m) = check_combination(cfg.space, cfg.align, cfg.measure) {
        problems.push(m);
    }
    if let Err(Error::Config(more)) = cfg.space_config(cfg.seed).validate() {
        problems.extend(more);
    }
    if cfg.iterations == 0 {
        problems.push("iterations must be at least 1".into());
    }
    if cfg.lnd_k == 0 {
        problems.push("lnd_k must be at least 1".into());
    }
    if cfg.downsample_n == 0 {
        problems.push("downsample_n must be at least 1".into());
    }
    if cfg.wi_suffix.is_empty() || cfg.wi_suffix.chars().any(char::is_whitespace) {
        problems.push("wi_suffix must be non-empty and contain no whitespace".into());
    }
    if cfg.wi_center && !(cfg.align == AlignKind::Wi && matches!(cfg.space, SpaceKind::Svd | SpaceKind::Ri | SpaceKind::Sgns)) {
        problems.push("wi_center applies only to align=wi with svd, ri or sgns".into());
    }
    if !cfg.op_steps.reweight.is_finite() || cfg.op_steps.reweight < 0.0 {
        problems.push("op_reweight must be a nonnegative number".into());
    }
    if cfg.space == SpaceKind::SenseDist {
        if cfg.control != Control::None {
            problems.push("control conditions need corpora and do not apply to space=sense-dist".into());
        }
        if cfg.sense_path.is_none() {
            problems.push("space=sense-dist needs sense_path".into());
        }
    } else {
        if cfg.corpus_a.is_none() || cfg.corpus_b.is_none() {
            problems.push("corpus_a and corpus_b are required".into());
        }
        if cfg.targets.is_none() {
            problems.push("targets is required".into());
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems))
    }
}

/// In-memory inputs of a run.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    /// Raw (unthresholded) corpora.
    pub corpus_a: Option<Corpus>,
    pub corpus_b: Option<Corpus>,
    pub targets: Vec<String>,
    pub senses: Option<SensePairs>,
    pub gold: Option<GoldRanking>,
}

impl Inputs {
    pub fn corpora(corpus_a: Corpus, corpus_b: Corpus, targets: Vec<String>) -> Self {
        Inputs {
            corpus_a: Some(corpus_a),
            corpus_b: Some(corpus_b),
            targets,
            ..Inputs::default()
        }
    }

    pub fn with_gold(mut self, gold: GoldRanking) -> Self {
        self.gold = Some(gold);
        self
    }
}

/// Outcome of a run.
#[derive(Clone, Debug)]
pub struct ResultReport {
    /// Scores averaged over iterations.
    pub scores: ChangeScores,
    pub evaluation: Option<EvaluationReport>,
    /// Spearman's rho of each iteration on its own.
    pub iteration_rhos: Vec<f64>,
    /// Wall-clock time per stage, summed over iterations.
    pub timings: Vec<(&'static str, Duration)>,
    pub config_echo: String,
    pub config_hash: String,
    /// Procrustes solution of the first iteration, for OP variants.
    pub procrustes: Option<ProcrustesSolution>,
}

impl ResultReport {
    /// `metric<TAB>value` rows: evaluation figures, the per-iteration rho
    /// range and the mean predicted change.
    pub fn report_tsv(&self) -> String {
        let mut out = Vec::new();
        match &self.evaluation {
            Some(ev) => ev.write_tsv_to(&mut out).expect("writing to memory"),
            None => {
                use std::io::Write;
                writeln!(out, "metric\tvalue").unwrap();
                writeln!(out, "iterations\t{}", self.scores.iterations()).unwrap();
                writeln!(out, "config\t{}", self.config_hash).unwrap();
            }
        }
        let mut text = String::from_utf8(out).expect("utf-8");
        if let (Some(lo), Some(hi)) = (
            self.iteration_rhos.iter().copied().reduce(f64::min),
            self.iteration_rhos.iter().copied().reduce(f64::max),
        ) {
            text.push_str(&format!("rho_min\t{lo:.12}\nrho_max\t{hi:.12}\n"));
        }
        text.push_str(&format!("measure\t{}\n", self.scores.measure()));
        text.push_str(&format!("scored\t{}\n", self.scores.len()));
        if let Some(mean) = self.scores.mean() {
            text.push_str(&format!("mean_score\t{mean:.12}\n"));
        }
        text
    }

    /// Writes `scores.tsv`, `report.tsv`, `config.txt` and, for OP variants,
    /// `procrustes.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.scores.write_tsv(&dir.join("scores.tsv"), &self.config_hash)?;
        let report = self.report_tsv();
        util::write_atomic(&dir.join("report.tsv"), |w| w.write_all(report.as_bytes()))?;
        util::write_atomic(&dir.join("config.txt"), |w| w.write_all(self.config_echo.as_bytes()))?;
        if let Some(sol) = &self.procrustes {
            sol.write_text(&dir.join("procrustes.txt"))?;
        }
        Ok(())
    }
}

type RowPair<'r> = (&'r [(u32, f64)], &'r [(u32, f64)]);

#[derive(Default)]
struct Timer {
    totals: Vec<(&'static str, Duration)>,
}

impl Timer {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(stage);
        let spent = start.elapsed();
        match self.totals.iter_mut().find(|(s, _)| *s == stage) {
            Some((_, d)) => *d += spent,
            None => self.totals.push((stage, spent)),
        }
        out
    }
}

/// Representations ready for scoring.
enum Prepared {
    Sparse(AlignedPair<CooccurrenceMatrix>),
    Dense(AlignedPair<EmbeddingMatrix>),
    /// One joint space; targets are compared with their placeholders.
    JointSparse(CooccurrenceMatrix),
    JointDense(EmbeddingMatrix),
    Senses,
    CorporaOnly,
}

struct Iteration<'a> {
    cfg: &'a PipelineConfig,
    seed: u64,
    targets: &'a [String],
    corpus_a: Corpus,
    corpus_b: Corpus,
}

fn counts_for(corpus: &Corpus, cfg: &SpaceConfig) -> Result<CooccurrenceMatrix> {
    let vocab = Arc::new(Vocabulary::from_corpus(corpus));
    let pairs = extract_windows(corpus, &vocab, cfg.window, cfg.seed)?;
    count_matrix(pairs, Arc::clone(&vocab))
}

fn sparse_space(kind: SpaceKind, corpus: &Corpus, cfg: &SpaceConfig) -> Result<CooccurrenceMatrix> {
    let counts = counts_for(corpus, cfg)?;
    match kind {
        SpaceKind::Count => Ok(counts),
        _ => ppmi_transform(&counts, cfg.k as f64, cfg.alpha),
    }
}

fn dense_space(kind: SpaceKind, corpus: &Corpus, cfg: &SpaceConfig) -> Result<EmbeddingMatrix> {
    match kind {
        SpaceKind::Svd => {
            let ppmi = sparse_space(SpaceKind::Ppmi, corpus, cfg)?;
            svd_reduce(&ppmi, cfg.dim, cfg.eig_p)
        }
        SpaceKind::Ri => {
            let counts = counts_for(corpus, cfg)?;
            let random = make_random_matrix(counts.shared_col_vocab(), cfg.dim, cfg.ri_nonzeros, cfg.seed)?;
            random_index(&counts, &random, cfg.t_sub, cfg.seed)
        }
        SpaceKind::Sgns => train_sgns(corpus, Vocabulary::from_corpus(corpus), cfg, None),
        _ => unreachable!("not a dense space"),
    }
}

fn center_columns(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mean = m.matrix().mean_axis(ndarray::Axis(0)).expect("non-empty matrix");
    EmbeddingMatrix::new(m.shared_vocab(), m.matrix() - &mean)
}

impl Iteration<'_> {
    fn prepare(&self, timer: &mut Timer, procrustes: &mut Option<ProcrustesSolution>) -> Result<Prepared> {
        let cfg = self.cfg;
        let sc = cfg.space_config(self.seed);
        let (a, b) = (&self.corpus_a, &self.corpus_b);
        if cfg.space == SpaceKind::SenseDist {
            return Ok(Prepared::Senses);
        }
        if cfg.measure == Measure::Fd {
            return Ok(Prepared::CorporaOnly);
        }
        if cfg.align == AlignKind::Wi {
            let mixed = timer.time("inject", || inject_targets(a, b, self.targets, &cfg.wi_suffix, self.seed))?;
            return timer.time("space", || match cfg.space {
                SpaceKind::Count | SpaceKind::Ppmi => sparse_space(cfg.space, &mixed, &sc).map(Prepared::JointSparse),
                kind => {
                    let m = dense_space(kind, &mixed, &sc)?;
                    let m = if cfg.wi_center { center_columns(&m)? } else { m };
                    Ok(Prepared::JointDense(m))
                }
            });
        }
        match (cfg.space, cfg.align) {
            (SpaceKind::Count | SpaceKind::Ppmi, _) => {
                let (ma, mb) = timer.time("space", || {
                    Ok((sparse_space(cfg.space, a, &sc)?, sparse_space(cfg.space, b, &sc)?))
                })?;
                timer.time("align", || column_intersect(&ma, &mb).map(Prepared::Sparse))
            }
            (SpaceKind::Ri, AlignKind::Srv) => {
                let (ca, cb) = timer.time("space", || {
                    let (mut ca, mut cb) = (counts_for(a, &sc)?, counts_for(b, &sc)?);
                    if let Some(t) = sc.t_sub {
                        ca = subsample_counts(&ca, t, self.seed)?;
                        cb = subsample_counts(&cb, t, self.seed.wrapping_add(1))?;
                    }
                    Ok((ca, cb))
                })?;
                timer.time("align", || {
                    shared_random_align(&ca, &cb, sc.dim, sc.ri_nonzeros, self.seed).map(Prepared::Dense)
                })
            }
            (SpaceKind::Sgns, AlignKind::Vi) => timer.time("space", || {
                vector_initialization_align(a, b, Vocabulary::from_corpus(a), Vocabulary::from_corpus(b), &sc)
                    .map(Prepared::Dense)
            }),
            (kind, align) => {
                let (ea, eb) = timer.time("space", || Ok((dense_space(kind, a, &sc)?, dense_space(kind, b, &sc)?)))?;
                timer.time("align", || match align.procrustes_variant() {
                    Some(variant) => {
                        let (pair, sol) = orthogonal_procrustes_with(&ea, &eb, variant, &cfg.op_steps)?;
                        procrustes.get_or_insert(sol);
                        Ok(Prepared::Dense(pair))
                    }
                    None => pair_on_shared_rows(&ea, &eb, AlignMethod::None).map(Prepared::Dense),
                })
            }
        }
    }

    fn score_one<M: RowSpace>(
        &self,
        a: &M,
        b: &M,
        word_a: &str,
        word_b: &str,
        exclude: &BTreeSet<String>,
        sparse_rows: Option<RowPair<'_>>,
    ) -> Result<f64> {
        let cfg = self.cfg;
        match cfg.measure {
            Measure::Cd => measures::row_cosine_distance(a, word_a, b, word_b),
            Measure::Lnd => measures::local_neighborhood_distance_with(a, word_a, b, word_b, cfg.lnd_k, exclude),
            Measure::Td | Measure::Hd | Measure::HdNorm => {
                let (x, y) = sparse_rows.ok_or_else(|| Error::InvalidParameter("dispersion needs count rows".into()))?;
                match cfg.measure {
                    Measure::Td => measures::type_difference(
                        x,
                        self.corpus_a.full_stats().types,
                        y,
                        self.corpus_b.full_stats().types,
                    ),
                    m => measures::sparse_entropy_difference(x, y, m == Measure::HdNorm),
                }
            }
            other => Err(Error::InvalidParameter(format!("{other} cannot score vector rows"))),
        }
    }

    fn measure(&self, prepared: &Prepared, senses: Option<&SensePairs>) -> Result<BTreeMap<String, f64>> {
        let cfg = self.cfg;
        let mut scores = BTreeMap::new();
        let placeholders: BTreeSet<String> = self.targets.iter().map(|t| format!("{t}{}", cfg.wi_suffix)).collect();
        let none = BTreeSet::new();
        for target in self.targets {
            let placeholder = format!("{target}{}", cfg.wi_suffix);
            let result = match prepared {
                Prepared::Sparse(p) => {
                    let rows = match (p.a.row_vocab().index(target), p.b.row_vocab().index(target)) {
                        (Some(i), Some(j)) => Some((p.a.row(i), p.b.row(j))),
                        _ => None,
                    };
                    self.score_one(&p.a, &p.b, target, target, &none, rows)
                }
                Prepared::Dense(p) => self.score_one(&p.a, &p.b, target, target, &none, None),
                Prepared::JointSparse(m) => {
                    let rows = match (m.row_vocab().index(target), m.row_vocab().index(&placeholder)) {
                        (Some(i), Some(j)) => Some((m.row(i), m.row(j))),
                        _ => None,
                    };
                    self.score_one(m, m, target, &placeholder, &placeholders, rows)
                }
                Prepared::JointDense(m) => self.score_one(m, m, target, &placeholder, &placeholders, None),
                Prepared::CorporaOnly => measures::frequency_difference(target, &self.corpus_a, &self.corpus_b),
                Prepared::Senses => match senses.and_then(|s| s.get(target)) {
                    None => Err(Error::MissingWord(target.clone())),
                    Some((p, q)) => match cfg.measure {
                        Measure::Jsd => measures::jensen_shannon_distance(&p.probs, &q.probs),
                        m => measures::entropy_difference(&p.probs, &q.probs, m == Measure::HdNorm),
                    },
                },
            };
            match result {
                Ok(s) => {
                    scores.insert(target.clone(), s);
                }
                Err(e @ (Error::MissingWord(_) | Error::ZeroVector(_))) => {
                    log::warn!("no {} score for {target:?}: {e}", cfg.measure);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(scores)
    }
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let read_raw = |p: &Option<PathBuf>| -> Result<Option<Corpus>> {
        match p {
            None => Ok(None),
            Some(p) => load_corpus(p, 0).map(|(c, _)| Some(c)),
        }
    };
    let targets = match &cfg.targets {
        Some(p) => util::read_word_list(p)?,
        None => Vec::new(),
    };
    let senses = match &cfg.sense_path {
        Some(p) if cfg.space == SpaceKind::SenseDist => Some(load_sense_distributions(p)?),
        _ => None,
    };
    Ok(Inputs {
        corpus_a: read_raw(&cfg.corpus_a)?,
        corpus_b: read_raw(&cfg.corpus_b)?,
        targets,
        senses,
        gold: cfg.gold.as_ref().map(load_gold).transpose()?,
    })
}

/// Loads the configured files, runs the pipeline and writes the outputs
/// when `cfg.out` is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<ResultReport> {
    validate_config(cfg)?;
    let inputs = load_inputs(cfg).stage("load")?;
    let report = run_with_inputs(cfg, inputs)?;
    if let Some(dir) = &cfg.out {
        report.write(dir).stage("write")?;
    }
    Ok(report)
}

/// Runs the pipeline on in-memory inputs. The corpora are thresholded
/// here; file paths in `cfg` are ignored.
pub fn run_with_inputs(cfg: &PipelineConfig, inputs: Inputs) -> Result<ResultReport> {
    if let Err(m) = check_combination(cfg.space, cfg.align, cfg.measure) {
        return Err(Error::Config(vec![m]));
    }
    cfg.space_config(cfg.seed).validate()?;
    let mut timer = Timer::default();

    let mut targets = inputs.targets.clone();
    if targets.is_empty() {
        if let Some(s) = &inputs.senses {
            targets = s.keys().cloned().collect();
        }
    }
    let mut seen = BTreeSet::new();
    targets.retain(|t| seen.insert(t.clone()));
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no target words".into()));
    }

    let (base_a, base_b) = timer.time("load", || {
        if cfg.space == SpaceKind::SenseDist {
            if inputs.senses.is_none() {
                return Err(Error::InvalidParameter("space=sense-dist needs sense distributions".into()));
            }
            return Ok((Corpus::new("a", vec![]), Corpus::new("b", vec![])));
        }
        let (Some(a), Some(b)) = (&inputs.corpus_a, &inputs.corpus_b) else {
            return Err(Error::InvalidParameter("two corpora are required".into()));
        };
        Ok((apply_threshold(a, cfg.min_count_a)?.0, apply_threshold(b, cfg.min_count_b)?.0))
    })?;

    let iterations = cfg.effective_iterations();
    let mut runs = Vec::with_capacity(iterations);
    let mut procrustes = None;
    for i in 0..iterations {
        let seed = cfg.seed.wrapping_add(i as u64);
        let (corpus_a, corpus_b) = timer.time("control", || {
            Ok(match cfg.control {
                Control::None => (base_a.clone(), base_b.clone()),
                Control::Shuffle => shuffle_control(&base_a, &base_b, &targets, seed),
                Control::ShuffleDownsample => {
                    let (a, b) = downsample_targets(&base_a, &base_b, &targets, cfg.downsample_n, seed)?;
                    shuffle_control(&a, &b, &targets, seed)
                }
            })
        })?;
        let it = Iteration {
            cfg,
            seed,
            targets: &targets,
            corpus_a,
            corpus_b,
        };
        let prepared = it.prepare(&mut timer, &mut procrustes)?;
        let scores = timer.time("measure", || it.measure(&prepared, inputs.senses.as_ref()))?;
        runs.push(ChangeScores::new(cfg.measure, scores)?);
    }

    let config_hash = cfg.hash();
    let (scores, evaluation, iteration_rhos) = timer.time("evaluate", || {
        let scores = eval::aggregate_iterations(&runs)?;
        let Some(gold) = &inputs.gold else {
            return Ok((scores, None, Vec::new()));
        };
        let mut report = spearman(gold, &scores)?;
        report.config_hash = config_hash.clone();
        let rhos = if runs.len() > 1 {
            runs.iter().map(|r| spearman(gold, r).map(|e| e.rho)).collect::<Result<_>>()?
        } else {
            vec![report.rho]
        };
        Ok((scores, Some(report), rhos))
    })?;

    Ok(ResultReport {
        scores,
        evaluation,
        iteration_rhos,
        timings: timer.totals,
        config_echo: cfg.echo(),
        config_hash,
        procrustes,
    })
}
