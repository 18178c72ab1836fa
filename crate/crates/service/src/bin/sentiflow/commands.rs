use std::fs::File;
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use chrono::Utc;
use log::{info, warn};
use sentiflow_core::baselines::{nb_train_documents, EnsembleSpec, MemberKind};
use sentiflow_core::corpus::{
    generate_synthetic_corpus, load_documents, manifest, store_documents, AspectSet, Document, GeneratorSpec, Source,
};
use sentiflow_core::engine::{
    count_params, save_checkpoint, train as train_model, Classification, LossWeights, ModelConfig, TrainSpec,
};
use sentiflow_core::evalreport::{
    aspect_columns, aspect_metrics, confusion, measure_efficiency, metrics, render_aspect_table,
    render_efficiency_table, render_results_table, write_report, EfficiencyReport, ReportFormat, ResultRow,
    ResultsTable, Scores,
};
use sentiflow_core::textprep::{normalize, tokenize, LanguageProfile, Vocabulary, DEFAULT_TOP_K};
use sentiflow_service::config::PipelineConfig;
use sentiflow_service::{http, Models, Pipeline, PipelineOptions};
use serde::{Deserialize, Serialize};

use crate::{ClassifyArgs, EvalArgs, GenCorpusArgs, ServeArgs, TrainArgs, WatchArgs};

fn load_labelled(path: &Path) -> Result<Vec<Document>> {
    let report = load_documents(path).with_context(|| format!("reading {}", path.display()))?;
    if report.malformed > 0 {
        warn!(
            "{}: skipped {} malformed lines (first at line {})",
            path.display(),
            report.malformed,
            report.malformed_lines[0]
        );
    }
    Ok(report.documents)
}

fn write_fresh(docs: &[Document], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    if path.exists() {
        std::fs::remove_file(path).with_context(|| format!("replacing {}", path.display()))?;
    }
    store_documents(docs, path)?;
    Ok(())
}

pub fn gen_corpus(args: GenCorpusArgs) -> Result<()> {
    let mut spec = GeneratorSpec {
        n_docs: args.docs,
        n_domains: args.domains,
        ..GeneratorSpec::default()
    };
    if let Some(noise) = args.noise {
        spec.term_noise = noise;
    }
    let docs = generate_synthetic_corpus(&spec, args.seed)?;
    write_fresh(&docs, &args.out)?;
    let m = manifest(&docs);
    println!(
        "wrote {} documents to {} (negative {}, neutral {}, positive {}; {:.1} tokens on average)",
        m.documents,
        args.out.display(),
        m.negative,
        m.neutral,
        m.positive,
        m.avg_tokens
    );
    Ok(())
}

/// Written next to the checkpoint; `eval` reads the training time from it.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub documents: usize,
    pub heldout: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hours: f64,
    pub parameters: usize,
    pub loss_trace: Vec<f64>,
}

pub const TRAINING_RECORD: &str = "training.json";

pub fn train(args: TrainArgs) -> Result<()> {
    ensure!((0.0..1.0).contains(&args.holdout), "--holdout must lie in [0, 1)");
    let docs = load_labelled(&args.corpus)?;
    let aspects = match &args.aspects {
        Some(names) => AspectSet::new(names.iter().cloned())?,
        None => AspectSet::default(),
    };
    for d in &docs {
        match &d.gold {
            Some(g) => g.validate(&aspects).with_context(|| format!("document `{}`", d.id))?,
            None => bail!("document `{}` has no gold labels", d.id),
        }
    }
    let n_heldout = (docs.len() as f64 * args.holdout).round() as usize;
    let (train_docs, heldout) = docs.split_at(docs.len() - n_heldout);
    ensure!(
        !train_docs.is_empty(),
        "no training documents left after the holdout split"
    );

    let tokens: Vec<Vec<String>> = train_docs.iter().map(|d| tokenize(&normalize(&d.text))).collect();
    let vocab = Vocabulary::build(&tokens, args.min_freq);
    let n_domains = train_docs
        .iter()
        .chain(heldout)
        .map(|d| d.domain.0 + 1)
        .max()
        .unwrap_or(1)
        .max(2);
    let config = ModelConfig::new(vocab.len(), n_domains, aspects.len());
    let weights = match args.loss_weights.as_deref() {
        Some([a, b, g]) => LossWeights::new(*a, *b, *g)?,
        _ => LossWeights::default(),
    };
    let spec = TrainSpec {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        ..TrainSpec::default()
    };
    info!(
        "training on {} documents ({} held out), vocabulary {}, {} domains, {} epochs",
        train_docs.len(),
        heldout.len(),
        vocab.len(),
        n_domains,
        spec.epochs
    );
    let started = Instant::now();
    let trained = train_model::<f64>(train_docs, &vocab, &aspects, &config, &weights, &spec, args.seed)?;
    let hours = started.elapsed().as_secs_f64() / 3600.0;
    let nb = nb_train_documents::<f64>(train_docs, args.smoothing)?;

    let out = &args.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    vocab.save(out.join("vocab.tsv"))?;
    save_checkpoint(out.join("model.ckpt"), &trained.params, &config, &vocab.content_hash())?;
    nb.save(out.join("naive_bayes.json"))?;
    let text: Vec<String> = train_docs
        .iter()
        .map(|d| normalize(&d.text).as_str().to_string())
        .collect();
    LanguageProfile::build("en-feedback", &text.join(" "), DEFAULT_TOP_K).save(out.join("language.tsv"))?;
    write_fresh(heldout, &out.join("heldout.jsonl"))?;

    let record = TrainingRecord {
        documents: train_docs.len(),
        heldout: heldout.len(),
        epochs: spec.epochs,
        seed: args.seed,
        hours,
        parameters: count_params(&trained.params),
        loss_trace: trained.trace.iter().map(|l| l.total).collect(),
    };
    std::fs::write(out.join(TRAINING_RECORD), serde_json::to_string_pretty(&record)?)?;

    let mut service = PipelineConfig::default();
    service.model.checkpoint = Some("model.ckpt".into());
    service.model.vocabulary = Some("vocab.tsv".into());
    service.model.naive_bayes = Some("naive_bayes.json".into());
    service.language.profiles = vec!["language.tsv".into()];
    service.aspects.names = aspects.names().to_vec();
    std::fs::write(out.join("sentiflow.toml"), service.to_toml())?;

    println!(
        "trained {} parameters in {:.1} s; final loss {:.4}; artifacts in {}",
        record.parameters,
        hours * 3600.0,
        record.loss_trace.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn method_name(kind: Option<MemberKind>) -> &'static str {
    match kind {
        Some(MemberKind::Transformer) => "Transformer",
        Some(MemberKind::NaiveBayes) => "Naive Bayes",
        Some(MemberKind::Lexicon) => "Lexicon",
        None => "Ensemble",
    }
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let config = PipelineConfig::load(&args.config)?;
    let loaded = Models::load(&config)?;
    let docs = load_labelled(&args.corpus)?;
    ensure!(
        docs.iter().all(|d| d.gold.is_some()),
        "evaluation needs gold labels on every document"
    );
    let aspects = config.aspect_set()?;

    // Each available member on its own, then the configured ensemble. The
    // language gate is left out so every method sees every document.
    let mut methods: Vec<(Option<MemberKind>, EnsembleSpec)> = Vec::new();
    for kind in [MemberKind::Transformer, MemberKind::NaiveBayes, MemberKind::Lexicon] {
        let available = match kind {
            MemberKind::Transformer => loaded.transformer().is_some(),
            MemberKind::NaiveBayes => loaded.naive_bayes().is_some(),
            MemberKind::Lexicon => true,
        };
        if available {
            methods.push((Some(kind), EnsembleSpec::single(kind)));
        }
    }
    if loaded.spec().members.len() > 1 {
        methods.push((None, loaded.spec().clone()));
    }

    let training_hours = config
        .model
        .checkpoint
        .as_ref()
        .and_then(|p| p.parent())
        .and_then(|dir| std::fs::read_to_string(dir.join(TRAINING_RECORD)).ok())
        .and_then(|raw| serde_json::from_str::<TrainingRecord>(&raw).ok())
        .map(|r| r.hours);

    let gold_sentiment: Vec<_> = docs
        .iter()
        .map(|d| d.gold.as_ref().expect("checked").sentiment)
        .collect();
    let gold_aspects: Vec<_> = docs
        .iter()
        .map(|d| d.gold.as_ref().expect("checked").aspect_vector(&aspects))
        .collect();
    let mut rows = Vec::new();
    let mut aspect_rows = Vec::new();
    let mut efficiency = Vec::new();
    for (kind, spec) in methods {
        let name = method_name(kind);
        let models = Models::new(
            spec,
            loaded.transformer().cloned(),
            loaded.naive_bayes().cloned(),
            loaded.lexicon().clone(),
            None,
        )?;
        let mut predicted = Vec::with_capacity(docs.len());
        let mut predicted_aspects = Vec::with_capacity(docs.len());
        for d in &docs {
            let c = models.classify(d).with_context(|| format!("classifying `{}`", d.id))?;
            let r = c.result().expect("no language gate");
            predicted.push(r.predicted_sentiment());
            if let Some(a) = r.predicted_aspects() {
                predicted_aspects.push(a);
            }
        }
        let m = metrics::<f64>(&confusion(&gold_sentiment, &predicted)?)?;
        println!(
            "{name:<12} accuracy {:.3}  macro P {:.3}  R {:.3}  F1 {:.3}",
            m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
        );
        rows.push(ResultRow {
            method: name.to_string(),
            cells: vec![Some(Scores::from(&m))],
        });
        if kind == Some(MemberKind::Transformer) && predicted_aspects.len() == docs.len() {
            let am = aspect_metrics::<f64>(
                &aspect_columns(aspects.names(), &gold_aspects)?,
                &aspect_columns(aspects.names(), &predicted_aspects)?,
            )?;
            println!("{name:<12} aspect macro F1 {:.3}", am.macro_f1);
            for (aspect, ms) in &am.per_aspect {
                aspect_rows.push((aspect.clone(), name.to_string(), Scores::from(ms)));
            }
        }
        let params = match kind {
            Some(MemberKind::Transformer) => models.param_count(),
            Some(MemberKind::NaiveBayes) => models.naive_bayes().map_or(0, |nb| 3 * nb.vocabulary_size() as u64 + 3),
            Some(MemberKind::Lexicon) => models.lexicon().len() as u64,
            None => 0,
        };
        let hours = if kind == Some(MemberKind::Transformer) {
            training_hours
        } else {
            None
        };
        let report = measure_efficiency(|d| models.classify(d), &docs, args.repetitions, params, hours)?;
        efficiency.push((name.to_string(), report));
    }
    // The ensemble's size is that of its members.
    if let Some(pos) = efficiency.iter().position(|(n, _)| n == "Ensemble") {
        let total: u64 = efficiency[..pos]
            .iter()
            .map(|(_, r): &(String, EfficiencyReport)| r.param_count)
            .sum();
        efficiency[pos].1.param_count = total;
    }

    let at = Utc::now();
    let results = render_results_table(
        &ResultsTable {
            datasets: vec![args.dataset.clone()],
            rows,
        },
        format,
    );
    println!("\n{results}");
    let mut written = vec![write_report(&args.reports, "results", at, format, &results)?];
    if !aspect_rows.is_empty() {
        written.push(write_report(
            &args.reports,
            "aspects",
            at,
            format,
            &render_aspect_table(&aspect_rows, format),
        )?);
    }
    written.push(write_report(
        &args.reports,
        "efficiency",
        at,
        format,
        &render_efficiency_table(&efficiency, format),
    )?);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ClassifyLine<'a> {
    id: &'a str,
    label: Option<&'static str>,
    #[serde(flatten)]
    classification: &'a sentiflow_core::Classification,
}

pub fn classify(args: ClassifyArgs) -> Result<()> {
    let config = PipelineConfig::load(&args.config)?;
    let models = Models::load(&config)?;
    let docs: Vec<Document> = match (&args.text, &args.input) {
        (Some(text), _) => {
            let domain = config
                .domain(&args.domain)
                .with_context(|| format!("unknown domain `{}`", args.domain))?;
            vec![Document::new(
                "cli-1",
                Source::Review,
                domain,
                Utc::now(),
                text.as_str(),
            )]
        }
        (None, Some(p)) if p.as_os_str() == "-" => {
            let mut docs = Vec::new();
            for (n, line) in std::io::stdin().lock().lines().enumerate() {
                let line = line?;
                if !line.trim().is_empty() {
                    docs.push(Document::from_json_line(&line).with_context(|| format!("stdin line {}", n + 1))?);
                }
            }
            docs
        }
        (None, Some(p)) => load_labelled(p)?,
        (None, None) => bail!("give --text or --input"),
    };
    for d in &docs {
        let mut c = models.classify(d).with_context(|| format!("classifying `{}`", d.id))?;
        if let (Classification::Classified(r), false) = (&mut c, args.embedding) {
            r.pooled = None;
        }
        print_json(&ClassifyLine {
            id: &d.id,
            label: c.result().map(|r| r.predicted_sentiment().code()),
            classification: &c,
        })?;
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(bind) = args.bind {
        config.service.bind = bind;
        config.validate()?;
    }
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    let stats = runtime.block_on(http::serve(&config))?;
    print_json(&stats)
}

pub fn watch(args: WatchArgs) -> Result<()> {
    let config = PipelineConfig::load(&args.config)?;
    let models = Arc::new(Models::load(&config)?);
    let mut options = PipelineOptions::from_config(&config)?;
    options.on_alert = Some(Arc::new(|a| {
        if let Err(e) = print_json(&serde_json::json!({ "alert": a })) {
            warn!("could not print alert: {e}");
        }
    }));
    let pipeline = Pipeline::start(models, options)?;

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)).context("installing the Ctrl-C handler")?;
    }
    let follow = Follower::open(&args.file, args.from_start)?;
    info!("following {}", args.file.display());
    let poll = Duration::from_millis(args.poll_ms.max(1));
    let outcome = follow.run(&stop, args.exit_at_eof, poll, |line| {
        match Document::from_json_line(line) {
            Ok(doc) => {
                pipeline.submit(doc)?;
            }
            Err(e) => {
                warn!("skipping malformed line: {e}");
                pipeline.record_malformed();
            }
        }
        Ok(())
    });
    let stats = pipeline.shutdown()?;
    outcome?;
    print_json(&serde_json::json!({ "stats": stats }))
}

/// Reads complete lines appended to a file, restarting from the top if the
/// file shrinks.
struct Follower {
    path: PathBuf,
    reader: BufReader<File>,
    position: u64,
}

impl Follower {
    fn open(path: &Path, from_start: bool) -> Result<Self> {
        let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let position = if from_start { 0 } else { file.seek(SeekFrom::End(0))? };
        Ok(Follower {
            path: path.to_path_buf(),
            reader: BufReader::new(file),
            position,
        })
    }

    fn run(
        mut self,
        stop: &AtomicBool,
        exit_at_eof: bool,
        poll: Duration,
        mut on_line: impl FnMut(&str) -> Result<()>,
    ) -> Result<()> {
        let mut partial = String::new();
        while !stop.load(Ordering::SeqCst) {
            let n = self.reader.read_line(&mut partial)?;
            self.position += n as u64;
            if n > 0 && partial.ends_with('\n') {
                let line = std::mem::take(&mut partial);
                if !line.trim().is_empty() {
                    on_line(line.trim())?;
                }
                continue;
            }
            if exit_at_eof {
                if !partial.trim().is_empty() {
                    on_line(partial.trim())?;
                }
                return Ok(());
            }
            let len = std::fs::metadata(&self.path)?.len();
            if len < self.position {
                warn!("{} was truncated; reading from the start", self.path.display());
                self.reader.seek(SeekFrom::Start(0))?;
                self.position = 0;
                partial.clear();
            }
            std::thread::sleep(poll);
        }
        Ok(())
    }
}
