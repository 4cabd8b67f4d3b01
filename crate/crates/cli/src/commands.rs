use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use termalign_core::align::{em_train, read_parallel_corpus, save_table, AlignModel, CorpusFormat};
use termalign_core::config::{RewardConfig, ScorerBinding};
use termalign_core::grpo::{group_stats, grpo_terms, normalize_advantages, ObjectiveTerms, PolicyEvalBatch, StdKind};
use termalign_core::metrics::{bleu, terminology_accuracy, BleuOptions, TermAccuracy, TermDictionary};
use termalign_core::policy::MatchPolicy;
use termalign_core::reward::{summarize, Engine, RecordError, ScoreLine, ScorerError, ScoringRecord};
use termalign_core::text::Tokenizer;

use crate::client::HttpScorer;

/// Exit status: 1 for input/config errors, 3 when the semantic scorer fails.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_SCORER: u8 = 3;

pub fn exit_code(error: &anyhow::Error) -> u8 {
    if error.downcast_ref::<ScorerError>().is_some() {
        EXIT_SCORER
    } else {
        EXIT_FAILURE
    }
}

pub type CliResult = anyhow::Result<()>;

#[derive(Debug, Parser)]
#[command(name = "termalign", version, about = "Terminology-aware translation rewards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an IBM Model 1/2 translation table with EM.
    TrainAligner(TrainArgs),
    /// Score model outputs (JSONL records) into reward breakdowns.
    Score(ScoreArgs),
    /// Corpus BLEU, terminology accuracy and averages of supplied scores.
    Evaluate(EvaluateArgs),
    /// Group-normalized advantages and the clipped objective.
    GrpoCheck(GrpoArgs),
    /// Run the reward HTTP service.
    Serve(ServeArgs),
    /// Run a constant-score semantic scorer speaking the scorer protocol.
    MockScorer(MockArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Ibm1,
    Ibm2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Parallel corpus: `src<TAB>tgt` lines, or JSONL with src/tgt fields.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), default_value_t = 10)]
    pub iterations: u32,
    #[arg(long, value_enum, default_value = "ibm1")]
    pub model: ModelArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value = "zh")]
    pub src_lang: String,
    #[arg(long, default_value = "en")]
    pub tgt_lang: String,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Reward config (TOML).
    #[arg(long, env = "TERMALIGN_CONFIG")]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Scoring records, one JSON object per line.
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Hypotheses: plain text, or `.jsonl` with `hyp` and optional `comet`.
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub src: PathBuf,
    /// Term dictionary: `source<TAB>rendering[|alternative]` lines.
    #[arg(long)]
    pub terms: Option<PathBuf>,
    #[arg(long, default_value = "zh")]
    pub src_lang: String,
    #[arg(long, default_value = "en")]
    pub tgt_lang: String,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GrpoArgs {
    /// Comma-separated rewards of one group.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rewards: Vec<f64>,
    /// Take `r_all` from the lines of a `score` output instead.
    #[arg(long, conflicts_with = "rewards")]
    pub scores: Option<PathBuf>,
    /// Split the rewards into consecutive groups of this size.
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long, value_enum, default_value = "population")]
    pub std: StdArg,
    /// Policy batch (JSON) whose clipped objective to evaluate.
    #[arg(long)]
    pub batch: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StdArg {
    Population,
    Sample,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:8090")]
    pub addr: String,
    #[arg(long, default_value_t = 0.8)]
    pub value: f64,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::TrainAligner(a) => train_aligner(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
        Command::GrpoCheck(a) => grpo_check(a),
        Command::Serve(a) => serve(a),
        Command::MockScorer(a) => mock_scorer(a),
    }
}

fn train_aligner(args: TrainArgs) -> CliResult {
    let format = match args.format {
        Some(FormatArg::Tsv) => CorpusFormat::Tsv,
        Some(FormatArg::Jsonl) => CorpusFormat::Jsonl,
        None => CorpusFormat::from_path(&args.corpus),
    };
    let corpus = read_parallel_corpus(&args.corpus, format, &Tokenizer::default(), &args.src_lang, &args.tgt_lang)?;
    let model = match args.model {
        ModelArg::Ibm1 => AlignModel::Ibm1,
        ModelArg::Ibm2 => AlignModel::Ibm2,
    };
    let report = em_train(&corpus, args.iterations as usize, model)?;
    let mut out = std::io::stdout().lock();
    if report.skipped_pairs > 0 {
        eprintln!("warning: skipped {} pairs with an empty side", report.skipped_pairs);
    }
    for (i, (f, r)) in report.log_likelihood.iter().zip(&report.reverse_log_likelihood).enumerate() {
        writeln!(out, "iteration {:>3}  log-likelihood {f:.6}  reverse {r:.6}", i + 1)?;
    }
    save_table(&report.table, &args.out)?;
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(())
}

pub fn load_config(path: &Path) -> anyhow::Result<(RewardConfig, PathBuf)> {
    let config = RewardConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

pub fn build_engine(config: &RewardConfig, base: &Path) -> anyhow::Result<Engine> {
    let engine = Engine::load(config, base)?;
    Ok(match &config.scorer {
        ScorerBinding::Endpoint(e) => engine.with_scorer(Arc::new(HttpScorer::new(e))),
        _ => engine,
    })
}

/// Reads JSONL records. Unparseable lines become placeholders whose result
/// is replaced by the parse error, so indices stay aligned with the input.
pub fn read_records(path: &Path) -> anyhow::Result<Vec<Result<ScoringRecord, String>>> {
    let file = File::open(path).with_context(|| format!("cannot read records {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read records {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1)));
    }
    Ok(out)
}

const SCORE_CHUNK: usize = 1024;

fn score(args: ScoreArgs) -> CliResult {
    let (config, base) = load_config(&args.config.config)?;
    let engine = build_engine(&config, &base)?;
    let records = read_records(&args.records)?;
    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let mut outcomes: Vec<Result<_, RecordError>> = Vec::with_capacity(records.len());
    for (c, chunk) in records.chunks(SCORE_CHUNK).enumerate() {
        let offset = c * SCORE_CHUNK;
        let batch: Vec<ScoringRecord> = chunk.iter().map(|r| r.clone().unwrap_or_default()).collect();
        let results = engine.score_batch(&batch, offset)?;
        for (i, (record, result)) in chunk.iter().zip(results).enumerate() {
            let mut line = ScoreLine::new(offset + i, &result);
            if let Err(parse) = record {
                line.error = Some(parse.clone());
            }
            writeln!(sink, "{}", serde_json::to_string(&line)?)?;
            outcomes.push(result);
        }
    }
    let summary = summarize(&outcomes, config.recipe, &config.hash());
    writeln!(sink, "{}", serde_json::to_string(&summary)?)?;
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvaluationReport {
    pub sentences: usize,
    pub bleu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminology: Option<TermAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comet_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comet_count: Option<usize>,
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

#[derive(serde::Deserialize)]
struct HypLine {
    hyp: String,
    #[serde(default)]
    comet: Option<f64>,
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let jsonl = args.hyp.extension().is_some_and(|e| e == "jsonl");
    let raw = read_lines(&args.hyp)?;
    let (hyps, comets): (Vec<String>, Vec<Option<f64>>) = if jsonl {
        let mut parsed = Vec::with_capacity(raw.len());
        for (n, l) in raw.iter().enumerate() {
            let h: HypLine = serde_json::from_str(l).with_context(|| format!("{} line {}", args.hyp.display(), n + 1))?;
            parsed.push((h.hyp, h.comet));
        }
        parsed.into_iter().unzip()
    } else {
        let n = raw.len();
        (raw, vec![None; n])
    };
    let refs = read_lines(&args.reference)?;
    let srcs = read_lines(&args.src)?;
    let files = [(&args.hyp, hyps.len()), (&args.reference, refs.len()), (&args.src, srcs.len())];
    let (short, long) = (
        files.iter().min_by_key(|f| f.1).unwrap(),
        files.iter().max_by_key(|f| f.1).unwrap(),
    );
    if short.1 != long.1 {
        bail!(
            "line count mismatch: {} has {} lines but {} has {}",
            short.0.display(),
            short.1,
            long.0.display(),
            long.1
        );
    }
    let tk = Tokenizer::default();
    let hyp_t: Vec<_> = hyps.iter().map(|h| tk.tokenize(h, &args.tgt_lang)).collect();
    let ref_t: Vec<_> = refs.iter().map(|r| tk.tokenize(r, &args.tgt_lang)).collect();
    let corpus = bleu(&hyp_t, &ref_t, BleuOptions::default())?;
    let terminology = match &args.terms {
        Some(path) => {
            let dict = TermDictionary::load(path, &tk, &args.src_lang, &args.tgt_lang)?;
            let pairs: Vec<_> = srcs.iter().map(|s| tk.tokenize(s, &args.src_lang)).zip(hyp_t.iter().cloned()).collect();
            Some(terminology_accuracy(&pairs, &dict, &MatchPolicy::default().resolve(&args.tgt_lang)))
        }
        None => None,
    };
    let present: Vec<f64> = comets.iter().flatten().copied().collect();
    let report = EvaluationReport {
        sentences: hyps.len(),
        bleu: corpus.value,
        terminology,
        comet_mean: (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64),
        comet_count: (!present.is_empty()).then_some(present.len()),
    };
    let mut out = std::io::stdout().lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report_table(&report))?;
    }
    Ok(())
}

pub fn report_table(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>10}  {}", "metric", "value", "detail");
    let _ = writeln!(s, "{:<8} {:>10.4}  {} sentences", "BLEU", report.bleu, report.sentences);
    match &report.terminology {
        Some(TermAccuracy::Score(score)) => {
            let t = score.terms.as_ref().expect("TA scores carry counts");
            let _ = writeln!(
                s,
                "{:<8} {:>10.4}  {}/{} occurrences, {}/{} terms",
                "TA", score.value, t.hits, t.total, t.type_hits, t.type_total
            );
        }
        Some(TermAccuracy::NoTermsFound { .. }) => {
            let _ = writeln!(s, "{:<8} {:>10}  no dictionary term occurs in the sources", "TA", "n/a");
        }
        None => {}
    }
    if let (Some(mean), Some(n)) = (report.comet_mean, report.comet_count) {
        let _ = writeln!(s, "{:<8} {:>10.4}  mean of {n} supplied scores", "COMET", mean);
    }
    s
}

#[derive(Debug, Serialize)]
struct GroupReport {
    rewards: Vec<f64>,
    mean: f64,
    std: f64,
    advantages: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct GrpoReport {
    groups: Vec<GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<ObjectiveTerms>,
}

fn rewards_from_scores(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut rewards = Vec::new();
    for (n, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), n + 1))?;
        if v.get("summary").is_some() {
            continue;
        }
        match v.get("r_all").and_then(serde_json::Value::as_f64) {
            Some(r) => rewards.push(r),
            None => bail!("{} line {}: record has no r_all (scoring error?)", path.display(), n + 1),
        }
    }
    Ok(rewards)
}

fn grpo_check(args: GrpoArgs) -> CliResult {
    let kind = match args.std {
        StdArg::Population => StdKind::Population,
        StdArg::Sample => StdKind::Sample,
    };
    let rewards = match &args.scores {
        Some(p) => rewards_from_scores(p)?,
        None => args.rewards.clone(),
    };
    let mut groups = Vec::new();
    if !rewards.is_empty() {
        let size = args.group_size.unwrap_or(rewards.len());
        if size == 0 || rewards.len() % size != 0 {
            bail!("{} rewards do not split into groups of {size}", rewards.len());
        }
        for g in rewards.chunks(size) {
            let advantages = normalize_advantages(g, kind)?;
            let (mean, std) = group_stats(g, kind);
            groups.push(GroupReport {
                rewards: g.to_vec(),
                mean,
                std,
                advantages,
            });
        }
    }
    let objective = match &args.batch {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let batch: PolicyEvalBatch = serde_json::from_str(&text).with_context(|| format!("{}", p.display()))?;
            Some(grpo_terms(&batch)?)
        }
        None => None,
    };
    if groups.is_empty() && objective.is_none() {
        bail!("nothing to do: pass --rewards, --scores or --batch");
    }
    println!("{}", serde_json::to_string_pretty(&GrpoReport { groups, objective })?);
    Ok(())
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn serve(args: ServeArgs) -> CliResult {
    let (config, base) = load_config(&args.config.config)?;
    let state = crate::service::AppState::loading(config.hash());
    let loader = state.clone();
    std::thread::spawn(move || match build_engine(&config, &base) {
        Ok(engine) => loader.install(engine),
        Err(e) => {
            eprintln!("error: {e:#}");
            loader.fail(format!("{e:#}"));
        }
    });
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, crate::service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

fn mock_scorer(args: MockArgs) -> CliResult {
    if !args.value.is_finite() {
        bail!("--value must be finite");
    }
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        eprintln!("mock scorer on {}", listener.local_addr()?);
        axum::serve(listener, crate::mock::router(args.value))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}
