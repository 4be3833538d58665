use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use cawe::a2w::checkpoint;
use cawe::cawe::{build_cawe_w_with, build_table, collect_occurrences};
use cawe::cbow::{train_cbow, CbowConfig};
use cawe::embeddings::concat_tables;
use cawe::eval::slu::{slu_split_eval, slu_train_eval, Cell, SluConfig};
use cawe::eval::{
    cosine, digest, eval_classification, eval_classification_split, eval_similarity, format_report, report_csv,
    sentence_embedding, split_indices, LogRegConfig,
};
use cawe::synth::{gen_cls_task, gen_corpus_with, gen_similarity_task, gen_slu_task, SynthConfig};
use cawe::trainer::{corpus_wer, examples, token_accuracy, train_with, TrainConfig};
use cawe::{ClassificationTask, Corpus, EmbeddingTable, Error, EvalReport, Method, Metric, ModelConfig, SimilarityTask, Vocabulary};
use clap::{CommandFactory, FromArgMatches};

use crate::args::*;

/// A failed invocation: exit code plus the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged(_) | Error::NonFinite(_) => 3,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn cli_command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

pub fn dispatch(argv: Vec<String>) -> u8 {
    let cmd = cli_command();
    let result = settings_then_parse(argv, cmd).and_then(run);
    match result {
        Ok(()) => 0,
        Err(f) => {
            if !f.msg.is_empty() {
                eprintln!("error: {}", f.msg);
            }
            f.code
        }
    }
}

fn settings_then_parse(argv: Vec<String>, cmd: clap::Command) -> Result<Cli, Failure> {
    let argv = crate::settings::expand(argv, &cmd)?;
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return Err(match e.kind() {
                DisplayHelp | DisplayVersion => Failure { code: 0, msg: String::new() },
                _ => Failure::usage(""),
            });
        }
    };
    Cli::from_arg_matches(&matches).map_err(|e| Failure::usage(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Extract(a) => extract(a),
        Command::Cbow(a) => cbow(a),
        Command::EvalSim(a) => eval_sim(a),
        Command::EvalCls(a) => eval_cls(a),
        Command::EvalSlu(a) => eval_slu(a),
        Command::Report(a) => report(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn setup(name: &str, common: &Common) -> Result<(), Failure> {
    if common.threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    cawe::init_threads(common.threads)?;
    println!("# cawe {name} seed={} threads={}", common.seed, common.threads);
    Ok(())
}

fn parse_method(s: &str) -> Result<Method, Failure> {
    s.parse().map_err(|e: Error| Failure::usage(e.to_string()))
}

fn write(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn load_table(path: &Path, method: Method) -> Result<EmbeddingTable, Failure> {
    Ok(EmbeddingTable::load_text(path, method)?)
}

fn gen_data(a: GenData) -> Outcome {
    setup("gen-data", &a.common)?;
    let cfg = SynthConfig {
        content_words: a.vocab,
        clusters: a.clusters,
        markers: a.markers,
        num_utts: a.utts,
        len_range: (a.min_len, a.max_len),
        duration_range: (a.min_dur, a.max_dur),
        noise_sigma: a.noise,
        zipf: a.zipf,
        seed: a.common.seed,
        ..SynthConfig::default()
    };
    if a.held_out >= a.utts {
        return Err(Failure::usage("--held-out must be smaller than --utts"));
    }
    let (lexicon, corpus) = gen_corpus_with(&cfg)?;
    let (train, heldout) = corpus.split_tail(a.held_out);
    train.save(a.out.join("train"))?;
    if !heldout.is_empty() {
        heldout.save(a.out.join("heldout"))?;
    }
    write(&a.out.join("lexicon.tsv"), &lexicon.to_tsv())?;
    let tasks = a.out.join("tasks");
    fs::create_dir_all(&tasks).map_err(|e| Failure::data(format!("{}: {e}", tasks.display())))?;
    let seed = a.common.seed;
    gen_similarity_task(&lexicon, a.sim_pairs, seed + 1)?.save(tasks.join("similarity.tsv"))?;
    gen_cls_task(&lexicon, a.cls_examples, false, seed + 2)?.save(tasks.join("classification.tsv"))?;
    gen_slu_task(&lexicon, a.slu_examples, seed + 3)?.save(tasks.join("slu.tsv"))?;
    println!("train\t{}", train.len());
    println!("heldout\t{}", heldout.len());
    println!("words\t{}", lexicon.words.len());
    Ok(())
}

fn train(a: Train) -> Outcome {
    setup("train", &a.common)?;
    let corpus = Corpus::load(&a.corpus)?;
    let first = corpus
        .utterances
        .first()
        .ok_or_else(|| Failure::data(format!("{}: corpus is empty", a.corpus.display())))?;
    let vocab = Vocabulary::build(corpus.transcripts(), a.min_count)?;
    let model = ModelConfig {
        input_dim: first.features.frames.cols(),
        enc_hidden: a.enc_hidden,
        enc_layers: a.enc_layers,
        pyramid_stages: a.pyramid_stages,
        dec_hidden: a.dec_hidden,
        embed_dim: a.embed_dim,
        att_dim: a.att_dim,
        loc_kernels: a.loc_kernels,
        loc_width: a.loc_width,
        vocab_size: vocab.len(),
    };
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        rms_decay: a.rms_decay,
        clip_norm: a.clip,
        seed: a.common.seed,
        checkpoint: Some(a.out.clone()),
        threads: a.common.threads,
        ..TrainConfig::default()
    };
    println!("vocab\t{}", vocab.len());
    let data = examples(&corpus, &vocab);
    let outcome = train_with(&data, model, &config, Some(&vocab), |epoch, loss| {
        println!("epoch\t{}\tloss\t{loss:.6}", epoch + 1);
        let _ = std::io::stdout().flush();
    })?;
    checkpoint::save(&outcome.params, &vocab, &a.out)?;
    if let Some(dir) = &a.heldout {
        let held = examples(&Corpus::load(dir)?, &vocab);
        println!("heldout_token_accuracy\t{:.6}", token_accuracy(&outcome.params, &held)?);
        println!("heldout_wer\t{:.6}", corpus_wer(&outcome.params, &held)?);
    }
    Ok(())
}

fn extract(a: Extract) -> Outcome {
    let method = parse_method(&a.method)?;
    if !matches!(method, Method::Uavg | Method::CaweW | Method::CaweM) {
        return Err(Failure::usage("extract --method must be uavg, cawe-w or cawe-m"));
    }
    setup("extract", &a.common)?;
    let (params, vocab) = checkpoint::load(&a.ckpt)?;
    let corpus = Corpus::load(&a.corpus)?;
    let occ = collect_occurrences(&params, &corpus.utterances, &vocab)?;
    let table = if method == Method::CaweW && a.alpha_norm {
        build_cawe_w_with(&occ, true)
    } else {
        build_table(&occ, method)?
    };
    table.save_text(&a.out)?;
    if let Some(p) = &a.dump {
        write(p, &occ.dump_tsv())?;
    }
    println!("method\t{method}");
    println!("occurrences\t{}", occ.len());
    println!("V={} D={}", table.len(), table.dim());
    Ok(())
}

fn cbow(a: Cbow) -> Outcome {
    setup("cbow", &a.common)?;
    let mut sentences: Vec<Vec<String>> = Corpus::load(&a.corpus)?.transcripts().map(<[String]>::to_vec).collect();
    if a.all_splits {
        let dir = a
            .heldout
            .as_ref()
            .ok_or_else(|| Failure::usage("--all-splits needs --heldout"))?;
        sentences.extend(Corpus::load(dir)?.transcripts().map(<[String]>::to_vec));
    }
    let vocab = Vocabulary::build(sentences.iter().map(Vec::as_slice), a.min_count)?;
    let config = CbowConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.common.seed,
        ..CbowConfig::default()
    };
    let outcome = train_cbow(&sentences, &vocab, &config)?;
    outcome.table.save_text(&a.out)?;
    let tail = &outcome.step_losses[outcome.step_losses.len().saturating_sub(1000)..];
    if !tail.is_empty() {
        println!("final_loss\t{:.6}", tail.iter().sum::<f64>() / tail.len() as f64);
    }
    println!("V={} D={}", outcome.table.len(), outcome.table.dim());
    Ok(())
}

fn emit(reports: &[EvalReport], input: &EmbeddingInput) -> Outcome {
    let mut rows = String::new();
    for r in reports {
        writeln!(
            rows,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.task,
            r.metric.label(),
            r.method,
            r.value,
            r.config_digest,
            r.all_oov_sentences
        )
        .unwrap();
    }
    print!("{rows}");
    if let Some(p) = &input.out {
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
        f.write_all(rows.as_bytes())
            .map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn eval_sim(a: EvalSim) -> Outcome {
    let method = parse_method(&a.input.method)?;
    setup("eval-sim", &a.common)?;
    let table = load_table(&a.input.emb, method)?;
    let task = SimilarityTask::load(&a.task)?;
    emit(&[eval_similarity(&task, &table)?], &a.input)
}

fn eval_cls(a: EvalCls) -> Outcome {
    let method = parse_method(&a.input.method)?;
    setup("eval-cls", &a.common)?;
    let mut table = load_table(&a.input.emb, method)?;
    if let Some(p) = &a.concat {
        table = concat_tables(&table, &load_table(p, Method::Concat)?)?;
    }
    let config = LogRegConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        l2: a.l2,
        seed: a.common.seed,
    };
    let task = ClassificationTask::load(&a.task)?;
    let report = match &a.test {
        Some(p) => {
            let mut r = eval_classification_split(&task, &ClassificationTask::load(p)?, &table, &config)?;
            r.config_digest = digest(&format!("cls;test_file;{}", config.describe()));
            r
        }
        None => eval_classification(&task, &table, a.common.seed, &config)?,
    };
    emit(&[report], &a.input)
}

fn eval_slu(a: EvalSlu) -> Outcome {
    let method = parse_method(&a.input.method)?;
    let cell: Cell = a.cell.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    setup("eval-slu", &a.common)?;
    let table = load_table(&a.input.emb, method)?;
    let config = SluConfig {
        cell,
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.common.seed,
        runs: a.runs,
        ..SluConfig::default()
    };
    let task = ClassificationTask::load(&a.task)?;
    let (result, test, tag) = match &a.test {
        Some(p) => {
            let test = ClassificationTask::load(p)?;
            (slu_train_eval(&task, &test, &table, &config)?, test, "test_file".to_string())
        }
        None => {
            let (_, idx) = split_indices(task.examples.len(), a.common.seed);
            let test = ClassificationTask {
                examples: idx.iter().map(|&i| task.examples[i].clone()).collect(),
            };
            let result = slu_split_eval(&task, &table, &config, a.common.seed)?;
            (result, test, format!("split_seed={}", a.common.seed))
        }
    };
    for (k, acc) in result.per_seed.iter().enumerate() {
        println!("# run seed={} accuracy={acc}", config.seed + k as u64);
    }
    let all_oov = test
        .examples
        .iter()
        .filter(|e| sentence_embedding(&e.tokens, &table).in_vocab == 0)
        .count();
    let report = EvalReport {
        task: "slu".into(),
        metric: Metric::Accuracy,
        value: result.mean_accuracy,
        method: table.method(),
        config_digest: digest(&format!("slu;{tag};{}", config.describe())),
        all_oov_sentences: all_oov,
    };
    emit(&[report], &a.input)
}

/// Parse rows printed by the eval commands; `#` lines are skipped.
fn parse_rows(path: &Path) -> Result<Vec<EvalReport>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let bad = |n: usize, what: &str| Failure::data(format!("{}:{n}: {what}", path.display()));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad(i + 1, "expected 6 tab-separated fields"));
        }
        out.push(EvalReport {
            task: f[0].to_string(),
            metric: f[1].parse().map_err(|_| bad(i + 1, "unknown metric"))?,
            method: f[2].parse().map_err(|_| bad(i + 1, "unknown method"))?,
            value: f[3].parse().map_err(|_| bad(i + 1, "bad value"))?,
            config_digest: f[4].to_string(),
            all_oov_sentences: f[5].parse().map_err(|_| bad(i + 1, "bad OOV count"))?,
        });
    }
    Ok(out)
}

fn report(a: Report) -> Outcome {
    setup("report", &a.common)?;
    let mut reports = Vec::new();
    for p in &a.inputs {
        reports.extend(parse_rows(p)?);
    }
    print!("{}", format_report(&reports));
    if let Some(p) = &a.csv {
        write(p, &report_csv(&reports))?;
    }
    Ok(())
}

/// Top `k` other words by cosine, descending; ties keep table order.
fn neighbors<'a>(query: &[f64], rows: impl Iterator<Item = (&'a str, &'a [f64])>, skip: &str, k: usize) -> Vec<(&'a str, f64)> {
    let mut scored: Vec<(&str, f64)> = rows.filter(|(w, _)| *w != skip).map(|(w, v)| (w, cosine(query, v))).collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1));
    scored.truncate(k);
    scored
}

fn inspect(a: Inspect) -> Outcome {
    let method = a.method.as_deref().map(parse_method).transpose()?;
    setup("inspect", &a.common)?;
    let head = fs::read(&a.file).map_err(|e| Failure::data(format!("{}: {e}", a.file.display())))?;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    if head.starts_with(checkpoint::MAGIC) {
        let (params, vocab) = checkpoint::load(&a.file)?;
        let c = params.config;
        println!("checkpoint version={}", checkpoint::VERSION);
        println!("V={} D={}", vocab.len(), c.embed_dim);
        println!("method: decoder input embeddings");
        println!(
            "input_dim={} enc_hidden={} enc_layers={} pyramid_stages={} dec_hidden={} att_dim={} loc_kernels={} loc_width={}",
            c.input_dim, c.enc_hidden, c.enc_layers, c.pyramid_stages, c.dec_hidden, c.att_dim, c.loc_kernels, c.loc_width
        );
        println!("params={}", params.num_params());
        for (id, w) in vocab.content_words() {
            rows.push((w.to_string(), params.embedding.row(id).to_vec()));
        }
    } else {
        let table = load_table(&a.file, method.unwrap_or(Method::Concat))?;
        println!("V={} D={}", table.len(), table.dim());
        match method {
            Some(m) => println!("method: {m}"),
            None => println!("method: unspecified"),
        }
        rows.extend(table.iter().map(|(w, v)| (w.to_string(), v.to_vec())));
    }
    if let Some(word) = &a.neighbors {
        match rows.iter().find(|(w, _)| w == word) {
            None => println!("OOV: {word:?} is not in the vocabulary"),
            Some((_, q)) => {
                let it = rows.iter().map(|(w, v)| (w.as_str(), v.as_slice()));
                for (w, c) in neighbors(q, it, word, a.k) {
                    println!("{w}\t{c:.6}");
                }
            }
        }
    }
    Ok(())
}
