//! `facttrace` command line: offline indexing, online tracing, baseline
//! ranking, evaluation, and synthetic dataset generation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use facttrace::baselines::{
    bm25_build, bm25_rank, embed_rank, load_ranked, save_ranked, Bm25Params, RankedList,
    TokenizeOptions,
};
use facttrace::corpus::{load_queries, Corpus, Query};
use facttrace::embed::remote::{HttpEmbeddingProvider, RemoteEmbedConfig};
use facttrace::embed::{embed_corpus, embed_texts, CachedProvider, EmbeddingProvider, HashEmbeddingProvider};
use facttrace::eval::{evaluate_trace, save_report, sweep_topk, validate_gold, Aggregate};
use facttrace::index::{
    build_ensemble, load_index, save_index, IndexEnsemble, IndexParams, LabelOptions,
};
use facttrace::llm::prompt::PromptTemplate;
use facttrace::llm::remote::{HttpChatClient, RemoteLlmConfig};
use facttrace::llm::{LlmClient, OracleRules, ScriptedOracle};
use facttrace::synth::{generate, pad_with_distractors, perturbed, SynthConfig};
use facttrace::tracer::{load_results, save_results, trace_all, FuzzyConfig, TraceOptions};

#[derive(Parser)]
#[command(
    name = "facttrace",
    about = "Trace the training examples that factually support a query",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the offline semantic index: embed, cluster, label.
    Index(IndexCmd),
    /// Trace queries against a built index directory.
    Trace(TraceCmd),
    /// Rank the corpus with a reference baseline (BM25 or embedding cosine).
    Baseline(BaselineCmd),
    /// Score trace results (and optionally a ranked baseline) against gold labels.
    Eval(EvalCmd),
    /// Generate a synthetic corpus/query/rule-table world for offline runs.
    Synth(SynthCmd),
}

#[derive(Args, Clone)]
struct ProviderArgs {
    /// Embedding provider: `hash` (deterministic, offline) or
    /// `remote:<config.json>` speaking the {model, inputs} -> {vectors} contract.
    #[arg(long, default_value = "hash")]
    provider: String,
    /// Vector dimension for the hash provider.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Seed for the hash provider.
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
}

impl ProviderArgs {
    fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        if self.provider == "hash" {
            return Ok(Box::new(HashEmbeddingProvider::new(self.dim, self.embed_seed)?));
        }
        if let Some(path) = self.provider.strip_prefix("remote:") {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading embed config {path}"))?;
            let config: RemoteEmbedConfig =
                serde_json::from_str(&raw).with_context(|| format!("parsing embed config {path}"))?;
            return Ok(Box::new(HttpEmbeddingProvider::new(config)?));
        }
        bail!("unknown provider {:?}; use `hash` or `remote:<config.json>`", self.provider)
    }
}

/// `scripted:<rules.json>` (offline rule table over the corpus) or
/// `http:<config.json>` (chat-completion service).
fn build_llm(spec: &str, corpus: &Corpus, mask_sentinel: &str) -> Result<Box<dyn LlmClient>> {
    if let Some(path) = spec.strip_prefix("scripted:") {
        let rules = OracleRules::load(path)?;
        return Ok(Box::new(ScriptedOracle::new(corpus, &rules, mask_sentinel)));
    }
    if let Some(path) = spec.strip_prefix("http:") {
        let raw =
            std::fs::read_to_string(path).with_context(|| format!("reading llm config {path}"))?;
        let config: RemoteLlmConfig =
            serde_json::from_str(&raw).with_context(|| format!("parsing llm config {path}"))?;
        return Ok(Box::new(HttpChatClient::new(config)?));
    }
    bail!("unknown llm spec {spec:?}; use `scripted:<rules.json>` or `http:<config.json>`")
}

#[derive(Args)]
struct IndexCmd {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    c: usize,
    /// Comma-separated seeds; one labeled index is built per seed.
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// LLM for keyword labeling; see `--llm` on `trace`.
    #[arg(long)]
    llm: String,
    #[arg(long)]
    out: PathBuf,
    /// Persist embeddings to `<out>/embed_cache.jsonl` and reuse them.
    #[arg(long)]
    cache: bool,
    #[arg(long, default_value = facttrace::DEFAULT_MASK_SENTINEL)]
    mask_sentinel: String,
}

fn run_index(cmd: IndexCmd) -> Result<()> {
    let corpus = Corpus::load(&cmd.corpus)?;
    std::fs::create_dir_all(&cmd.out)?;
    let provider = cmd.provider.build()?;
    let cache_path = cmd.out.join("embed_cache.jsonl");
    let provider = if cmd.cache && cache_path.exists() {
        CachedProvider::with_cache_file(provider, &cache_path)?
    } else {
        CachedProvider::new(provider)
    };

    let matrix = embed_corpus(&provider, &corpus, &cmd.mask_sentinel)?;
    if cmd.cache {
        provider.save(&cache_path)?;
        eprintln!("cached {} embeddings at {}", provider.cached_count(), cache_path.display());
    }

    let llm = build_llm(&cmd.llm, &corpus, &cmd.mask_sentinel)?;
    let params = IndexParams {
        k: cmd.k,
        c: cmd.c,
        ..IndexParams::default()
    };
    let label_opts = LabelOptions {
        mask_sentinel: cmd.mask_sentinel.clone(),
        ..LabelOptions::default()
    };
    let (ensemble, report) = build_ensemble(
        &[&matrix],
        &params,
        &cmd.seeds,
        &corpus,
        llm.as_ref(),
        &label_opts,
    )?;
    for index in ensemble.members() {
        let path = cmd.out.join(format!("index-seed{}.json", index.seed()));
        save_index(index, &path)?;
        eprintln!(
            "wrote {} ({} leaves over {} documents)",
            path.display(),
            index.leaf_ids().len(),
            index.doc_count()
        );
    }
    eprintln!(
        "labeled {} leaves ({} failures, {} sampled to budget)",
        report.labeled,
        report.failures.len(),
        report.sampled_leaves
    );
    if !report.failures.is_empty() {
        for failure in &report.failures {
            log::warn!("leaf {} unlabeled: {}", failure.leaf_id, failure.error);
        }
    }
    Ok(())
}

#[derive(Args)]
struct TraceCmd {
    #[arg(long)]
    index_dir: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Candidates scored per LLM call.
    #[arg(long, default_value_t = 15)]
    b: usize,
    #[arg(long, default_value_t = 80)]
    fuzzy_threshold: u8,
    #[arg(long, default_value_t = 600)]
    candidate_cap: usize,
    /// LLM: `scripted:<rules.json>` or `http:<config.json>`.
    #[arg(long)]
    llm: String,
    /// Evaluation prompt few-shot style.
    #[arg(long, value_enum, default_value_t = TemplateChoice::Claim)]
    template: TemplateChoice,
    /// Warn when loaded indexes were built with a different provider.
    #[arg(long)]
    expect_provider: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = facttrace::DEFAULT_MASK_SENTINEL)]
    mask_sentinel: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateChoice {
    Claim,
    Cloze,
}

fn load_ensemble(dir: &Path) -> Result<IndexEnsemble> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading index dir {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("index-") && n.ends_with(".json"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no index-*.json files in {}", dir.display());
    }
    let mut indexes = Vec::with_capacity(paths.len());
    for path in &paths {
        indexes.push(load_index(path)?);
    }
    Ok(IndexEnsemble::new(indexes)?)
}

fn run_trace(cmd: TraceCmd) -> Result<()> {
    let corpus = Corpus::load(&cmd.corpus)?;
    let queries = load_queries(&cmd.queries)?;
    let ensemble = load_ensemble(&cmd.index_dir)?;
    if let Some(expected) = &cmd.expect_provider {
        for index in ensemble.members() {
            if !index.provider_matches(expected) {
                log::warn!(
                    "index seed {} was built with provider {:?}, tracing configured for {:?} \
                     (providers only matter at build time)",
                    index.seed(),
                    index.provider_id(),
                    expected
                );
            }
        }
    }
    let llm = build_llm(&cmd.llm, &corpus, &cmd.mask_sentinel)?;
    let opts = TraceOptions {
        batch_size: cmd.b,
        fuzzy: FuzzyConfig {
            threshold: cmd.fuzzy_threshold,
        },
        candidate_cap: cmd.candidate_cap,
        template: match cmd.template {
            TemplateChoice::Claim => PromptTemplate::eval_claim(),
            TemplateChoice::Cloze => PromptTemplate::eval_cloze(),
        },
        mask_sentinel: cmd.mask_sentinel.clone(),
    };
    let results = trace_all(&queries, &ensemble, &corpus, llm.as_ref(), &opts);
    save_results(&results, &cmd.out)?;
    let failed = results.iter().filter(|r| r.failed()).count();
    let truncated = results.iter().filter(|r| r.truncated).count();
    let timing = facttrace::eval::timing_report(&results);
    eprintln!(
        "traced {} queries -> {} ({} failed, {} hit the candidate cap)",
        results.len(),
        cmd.out.display(),
        failed,
        truncated
    );
    eprintln!(
        "wall time: total {:.2}s, mean {:.1}ms/query (cluster retrieval {:.2}s, LLM scoring {:.2}s)",
        timing.total_us as f64 / 1e6,
        timing.mean_per_query_us as f64 / 1e3,
        timing.retrieval_us as f64 / 1e6,
        timing.scoring_us as f64 / 1e6,
    );
    Ok(())
}

#[derive(Args)]
struct BaselineCmd {
    #[arg(long, value_enum)]
    method: BaselineMethod,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Top-k grid printed when queries carry gold labels.
    #[arg(long, default_value = "1,10,25", value_delimiter = ',')]
    topk: Vec<usize>,
    /// Keep only the top N entries per ranking in the output file (0 = all).
    #[arg(long, default_value_t = 0)]
    keep_top: usize,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Disable lowercasing for strict whitespace-only tokenization.
    #[arg(long)]
    no_lowercase: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = facttrace::DEFAULT_MASK_SENTINEL)]
    mask_sentinel: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Bm25,
    Embed,
}

fn run_baseline(cmd: BaselineCmd) -> Result<()> {
    let corpus = Corpus::load(&cmd.corpus)?;
    let queries = load_queries(&cmd.queries)?;
    let ranked: Vec<RankedList> = match cmd.method {
        BaselineMethod::Bm25 => {
            let tokenize = TokenizeOptions {
                mask_sentinel: cmd.mask_sentinel.clone(),
                lowercase: !cmd.no_lowercase,
            };
            let index = bm25_build(&corpus, Bm25Params::default(), tokenize)?;
            queries.iter().map(|q| bm25_rank(&index, q)).collect()
        }
        BaselineMethod::Embed => {
            let provider = cmd.provider.build()?;
            let matrix = embed_corpus(&provider, &corpus, &cmd.mask_sentinel)?;
            let mut lists = Vec::with_capacity(queries.len());
            for q in &queries {
                let rendered = q.rendered_text(&cmd.mask_sentinel);
                let query_vec = embed_texts(&provider, &[&rendered])?.remove(0);
                lists.push(embed_rank(&matrix, &query_vec, &q.id, &corpus)?);
            }
            lists
        }
    };
    save_ranked(&ranked, cmd.keep_top, &cmd.out)?;
    eprintln!("ranked {} queries -> {}", ranked.len(), cmd.out.display());

    if queries.iter().any(|q| !q.gold_ids.is_empty()) {
        let gold = gold_map(&queries);
        let sweep = sweep_topk(&ranked, &gold, &cmd.topk)?;
        eprintln!("{:<10} {:>8} {:>10} {:>8}", "top-k", "F1", "Precision", "Recall");
        for row in &sweep.rows {
            eprintln!(
                "{:<10} {:>8.4} {:>10.4} {:>8.4}",
                row.k, row.f1, row.precision, row.recall
            );
        }
        eprintln!("best F1 {:.4} at top-{}", sweep.best.f1, sweep.best.k);
    }
    Ok(())
}

fn gold_map(queries: &[Query]) -> std::collections::HashMap<String, std::collections::HashSet<String>> {
    queries
        .iter()
        .map(|q| (q.id.clone(), q.gold_ids.iter().cloned().collect()))
        .collect()
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ranked baseline file to sweep alongside the trace results.
    #[arg(long)]
    ranked: Option<PathBuf>,
    #[arg(long, default_value = "1,10,25", value_delimiter = ',')]
    topk: Vec<usize>,
    /// When given, gold ids are checked against the corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn print_row(name: &str, agg: &Aggregate) {
    println!(
        "{name:<32} {:>8.4} {:>10.4} {:>8.4}",
        agg.f1, agg.precision, agg.recall
    );
}

fn run_eval(cmd: EvalCmd) -> Result<()> {
    let results = load_results(&cmd.results)?;
    let queries = load_queries(&cmd.queries)?;
    if let Some(corpus_path) = &cmd.corpus {
        let corpus = Corpus::load(corpus_path)?;
        validate_gold(&queries, &corpus)?;
    }
    let mut report = evaluate_trace(&results, &queries)?;
    if let Some(ranked_path) = &cmd.ranked {
        let ranked = load_ranked(ranked_path)?;
        report.ranked_sweep = Some(sweep_topk(&ranked, &gold_map(&queries), &cmd.topk)?);
    }

    println!(
        "{:<32} {:>8} {:>10} {:>8}",
        "method", "F1", "Precision", "Recall"
    );
    print_row("trace (macro)", &report.macro_avg);
    print_row("trace (micro)", &report.micro_avg);
    if let Some(sweep) = &report.ranked_sweep {
        for row in &sweep.rows {
            print_row(
                &format!("ranked baseline (top-{})", row.k),
                &Aggregate {
                    precision: row.precision,
                    recall: row.recall,
                    f1: row.f1,
                },
            );
        }
        print_row(
            &format!("ranked baseline (best, top-{})", sweep.best.k),
            &Aggregate {
                precision: sweep.best.precision,
                recall: sweep.best.recall,
                f1: sweep.best.f1,
            },
        );
    }
    print_row("upper bound (perfect stage 2)", &report.upper_bound.perfect_stage2);
    print_row("upper bound (candidate set)", &report.upper_bound.candidate_set);
    println!(
        "evaluated {} queries ({} excluded without gold, {} failed); \
         wall {:.2}s total, {:.1}ms/query",
        report.per_query.len(),
        report.excluded_queries.len(),
        report.failed_queries.len(),
        report.timings.total_us as f64 / 1e6,
        report.timings.mean_per_query_us as f64 / 1e3,
    );

    save_report(&report, &cmd.out)?;
    eprintln!("wrote {}", cmd.out.display());
    Ok(())
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    docs: usize,
    #[arg(long, default_value_t = 40)]
    topics: usize,
    #[arg(long, default_value_t = 60)]
    queries: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Pad the corpus with distractors up to this size.
    #[arg(long)]
    pad_to: Option<usize>,
    /// Query-shadow distractors per query when padding.
    #[arg(long, default_value_t = 10)]
    shadows: usize,
    /// Also write queries_perturbed.jsonl with synonym-twisted surfaces.
    #[arg(long)]
    perturb: bool,
}

fn run_synth(cmd: SynthCmd) -> Result<()> {
    let cfg = SynthConfig {
        topics: cmd.topics,
        docs: cmd.docs,
        queries: cmd.queries,
        seed: cmd.seed,
        ..SynthConfig::default()
    };
    let mut world = generate(&cfg);
    if let Some(target) = cmd.pad_to {
        world = pad_with_distractors(&world, &cfg, target, cmd.shadows, cfg.seed.wrapping_add(1000));
    }
    if cmd.perturb {
        let twisted = perturbed(&world, &cfg, cfg.seed.wrapping_add(2000));
        // The perturbed rule table covers both surfaces; ship it as the
        // world's rules so the scripted oracle recognizes either file.
        world.rules = twisted.rules.clone();
        world.save_to_dir(&cmd.out)?;
        facttrace::corpus::save_queries(&twisted.queries, cmd.out.join("queries_perturbed.jsonl"))?;
    } else {
        world.save_to_dir(&cmd.out)?;
    }
    eprintln!(
        "wrote {} documents, {} queries, {} fact rules to {}",
        world.corpus.len(),
        world.queries.len(),
        world.rules.facts.len(),
        cmd.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Index(cmd) => run_index(cmd),
        Command::Trace(cmd) => run_trace(cmd),
        Command::Baseline(cmd) => run_baseline(cmd),
        Command::Eval(cmd) => run_eval(cmd),
        Command::Synth(cmd) => run_synth(cmd),
    }
}
