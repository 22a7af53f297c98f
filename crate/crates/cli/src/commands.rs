use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use melodikit::corpus::{self, load_entries, load_manifest, ManifestEntry};
use melodikit::eval::{
    bootstrap_kl, smoothed_marginal, paper_statistics, prediction_loglik,
    train_vs_test_reference, KlReport, MarginalPredictor, PredictionConfig, Predictor,
    ReportHeader, StatisticSpec,
};
use melodikit::tcrbm::{filters_to_csv, EpochDiagnostics, LrSchedule};
use melodikit::tuning::{grid_search, GridSpec, ModelKind, TreeModelParams};
use melodikit::{
    rng, AnyModel, Corpus, DirichletParams, DirichletVmm, Error, PredictionProtocol, Symbol,
    TcRbm, TrainConfig, Vmm, VmmParams,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;

pub enum Failure {
    /// Bad arguments or configuration: exit code 1.
    Usage(String),
    /// Anything that went wrong while doing the work: exit code 2.
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::AlphabetMismatch { .. }
            | Error::SequenceTooShort { .. }
            | Error::Shape(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(m: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(m.into()))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_corpus(path: &Path) -> Outcome<Corpus> {
    Corpus::read(path).map_err(|e| io_err(path, e))
}

fn read_model(path: &Path) -> Outcome<AnyModel<f64>> {
    AnyModel::read(path).map_err(|e| io_err(path, e))
}

fn header(cli: &Cli, command: &str, args: &impl Serialize) -> ReportHeader {
    ReportHeader::new(
        cli.seed,
        json!({
            "command": command,
            "deterministic": cli.deterministic,
            "args": args,
        }),
    )
}

fn csv_with_header(h: &ReportHeader, body: impl FnOnce(&mut Vec<u8>) -> melodikit::Result<()>) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    h.write_csv_comment(&mut buf)?;
    body(&mut buf)?;
    Ok(buf)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Eval(EvalCommand::Predict(a)) => predict(cli, a),
        Command::Eval(EvalCommand::Kl(a)) => kl(cli, a),
        Command::Tune(a) => tune(cli, a),
        Command::Filters(a) => filters(cli, a),
    }
}

const INPUT_EXTENSIONS: &[&str] = &["mid", "midi", "smf", "txt", "notes"];

fn ingest(_cli: &Cli, a: &IngestArgs) -> Outcome {
    let mut entries = Vec::new();
    for p in &a.inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file()
                        && f.extension()
                            .and_then(|x| x.to_str())
                            .is_some_and(|x| INPUT_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
                })
                .collect();
            files.sort();
            entries.extend(files.into_iter().map(|f| ManifestEntry::new(f, a.ticks_per_eighth)));
        } else {
            entries.push(ManifestEntry::new(p.clone(), a.ticks_per_eighth));
        }
    }
    if let Some(m) = &a.manifest {
        entries.extend(load_manifest(m).map_err(|e| io_err(m, e))?);
    }
    if entries.is_empty() {
        return usage("no input files given");
    }
    let corpus = load_entries(&entries)?;
    let mut json = corpus.to_json()?;
    json.push('\n');
    write_file(&a.output, json.as_bytes())?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "sequences: {}", corpus.sequences.len());
    let _ = writeln!(out, "steps: {}", corpus.total_steps());
    let _ = writeln!(out, "symbol histogram:");
    for (i, c) in corpus.histogram().iter().enumerate() {
        let _ = writeln!(out, "  {:>5} {c}", Symbol::new(i as u8).to_string());
    }
    Ok(())
}

/// Best-parameters file written by `tune`.
#[derive(Serialize, Deserialize)]
struct BestParams {
    #[serde(default, skip_deserializing)]
    header: Option<ReportHeader>,
    params: TreeModelParams,
}

fn pick<T>(flag: Option<T>, file: Option<T>, name: &str) -> Outcome<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => usage(format!("--{name} is required (or give --params)")),
    }
}

fn tree_params(a: &TrainArgs, kind: ModelKind) -> Outcome<TreeModelParams> {
    let from_file = match &a.params {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let best: BestParams = serde_json::from_str(&text).map_err(|e| io_err(p, e))?;
            if best.params.model != kind {
                return usage(format!(
                    "{} holds {} parameters, not {}",
                    p.display(),
                    best.params.model.as_str(),
                    kind.as_str()
                ));
            }
            Some(best.params)
        }
        None => None,
    };
    let smoothing = match kind {
        ModelKind::Vmm => a.gamma,
        ModelKind::Dvmm => a.alpha,
    };
    Ok(TreeModelParams {
        model: kind,
        max_depth: from_file.map_or(a.max_depth, |p| p.max_depth),
        c_min: pick(a.c_min, from_file.map(|p| p.c_min), "c-min")?,
        eps_min: pick(a.eps_min, from_file.map(|p| p.eps_min), "eps-min")?,
        smoothing: pick(
            smoothing,
            from_file.map(|p| p.smoothing),
            match kind {
                ModelKind::Vmm => "gamma",
                ModelKind::Dvmm => "alpha",
            },
        )?,
    })
}

fn train(cli: &Cli, a: &TrainArgs) -> Outcome {
    let log_path = a.log.clone().unwrap_or_else(|| a.output.with_extension("log.csv"));
    let (model, resolved, log): (AnyModel<f64>, serde_json::Value, Vec<u8>) = match a.model {
        ModelArg::Vmm | ModelArg::Dvmm => {
            let kind = if a.model == ModelArg::Vmm { ModelKind::Vmm } else { ModelKind::Dvmm };
            let p = tree_params(a, kind)?;
            let tree = p.tree()?;
            if kind == ModelKind::Vmm && !(p.smoothing.is_finite() && p.smoothing >= 0.0) {
                return usage(format!("gamma must be finite and >= 0, got {}", p.smoothing));
            }
            if kind == ModelKind::Dvmm && !(p.smoothing.is_finite() && p.smoothing > 0.0) {
                return usage(format!("alpha must be finite and > 0, got {}", p.smoothing));
            }
            let corpus = read_corpus(&a.corpus)?;
            let model = match kind {
                ModelKind::Vmm => AnyModel::Vmm(Vmm::train(&corpus, VmmParams { tree, gamma: p.smoothing })?),
                ModelKind::Dvmm => AnyModel::Dirichlet(DirichletVmm::train(
                    &corpus,
                    DirichletParams { tree, alpha: p.smoothing },
                )?),
            };
            let t = match &model {
                AnyModel::Vmm(m) => m.tree(),
                AnyModel::Dirichlet(m) => m.tree(),
                AnyModel::TcRbm(_) => unreachable!(),
            };
            let log = format!("nodes,depth,sequences,steps\n{},{},{},{}\n", t.len(), t.depth(), corpus.sequences.len(), corpus.total_steps());
            (model, serde_json::to_value(p).unwrap(), log.into_bytes())
        }
        ModelArg::Tcrbm => {
            let config = TrainConfig {
                hidden: a.hidden,
                filter: a.filter,
                cd_k: a.cd,
                epochs: a.epochs,
                lr0: a.lr,
                lr_schedule: LrSchedule::Linear { final_fraction: a.lr_final_fraction },
                weight_decay: a.weight_decay,
                sparsity_target: a.sparsity_target,
                sparsity_weight: a.sparsity_weight,
                minibatch: a.minibatch,
                seed: cli.seed,
            };
            config.validate()?;
            let corpus = read_corpus(&a.corpus)?;
            let every = (config.epochs / 20).max(1);
            let (model, diags) = TcRbm::train_with(&corpus, &config, |d| {
                if (d.epoch + 1) % every == 0 || d.epoch + 1 == config.epochs {
                    eprintln!(
                        "epoch {:>4}/{}  lr {:.4}  recon {:.4}  activity {:.4}",
                        d.epoch + 1,
                        config.epochs,
                        d.lr,
                        d.recon_ce,
                        d.mean_hidden_activity
                    );
                }
            })?;
            let mut log = String::from("epoch,lr,recon_ce,mean_hidden_activity\n");
            for EpochDiagnostics { epoch, lr, recon_ce, mean_hidden_activity } in &diags {
                log.push_str(&format!("{epoch},{lr},{recon_ce},{mean_hidden_activity}\n"));
            }
            (AnyModel::TcRbm(model), serde_json::to_value(&config).unwrap(), log.into_bytes())
        }
    };
    model.write(&a.output).map_err(|e| io_err(&a.output, e))?;
    let mut h = header(cli, "train", a);
    h.config["resolved"] = resolved;
    let mut buf = Vec::new();
    h.write_csv_comment(&mut buf)?;
    buf.extend(log);
    write_file(&log_path, &buf)?;
    println!("wrote {} model to {}", model.kind(), a.output.display());
    Ok(())
}

fn sample(cli: &Cli, a: &SampleArgs) -> Outcome {
    let lengths: Vec<usize> = match &a.like {
        Some(p) => read_corpus(p)?.sequences.iter().map(|s| s.len()).collect(),
        None => {
            if a.count < 1 || a.length < 1 {
                return usage("--count and --length must be >= 1");
            }
            vec![a.length; a.count]
        }
    };
    let model = read_model(&a.model)?;
    let samples = model.sample_corpus(&lengths, a.burn_in, cli.seed)?;
    let mut json = samples.to_json()?;
    json.push('\n');
    write_file(&a.output, json.as_bytes())?;
    if let Some(kind) = a.decode {
        let dir = a.decode_dir.clone().unwrap_or_else(|| {
            let stem = a.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            a.output.with_file_name(format!("{stem}_decoded"))
        });
        for s in &samples.sequences {
            let notes = corpus::decode(s.steps())?;
            match kind {
                DecodeArg::Text => write_file(&dir.join(format!("{}.txt", s.id)), corpus::format_text(&notes).as_bytes())?,
                DecodeArg::Midi => write_file(&dir.join(format!("{}.mid", s.id)), &corpus::write_midi(&notes)?)?,
            }
        }
    }
    println!("wrote {} samples to {}", samples.sequences.len(), a.output.display());
    Ok(())
}

/// Splits `name=path`; a bare path is named after the model kind or file stem.
fn named(spec: &str) -> (Option<String>, PathBuf) {
    match spec.split_once('=') {
        Some((n, p)) if !n.is_empty() && !n.contains(['/', '\\']) => (Some(n.to_string()), PathBuf::from(p)),
        _ => (None, PathBuf::from(spec)),
    }
}

fn check_unique(names: &[String]) -> Outcome {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return usage(format!("model name {n:?} is used twice; name them with name=path"));
        }
        if n == "baseline" || n == "trainset" {
            return usage(format!("model name {n:?} is reserved"));
        }
    }
    Ok(())
}

fn predict(cli: &Cli, a: &PredictArgs) -> Outcome {
    let config = PredictionConfig {
        tau_max: a.tau_max,
        n_configs: a.configs,
        min_context: a.min_context,
        seed: cli.seed,
    };
    let protocol = PredictionProtocol { chains: a.chains, iterations: a.iterations, burn_in: a.burn };
    protocol.validate()?;
    if a.paths < 1 {
        return usage("--paths must be >= 1");
    }
    let test = read_corpus(&a.test)?;
    let mut models = Vec::new();
    let mut names = Vec::new();
    for spec in &a.models {
        let (name, path) = named(spec);
        let m = read_model(&path)?;
        if m.alphabet_size() != test.alphabet_size {
            return Err(Error::AlphabetMismatch { model: m.alphabet_size(), data: test.alphabet_size }.into());
        }
        names.push(name.unwrap_or_else(|| m.kind().to_string()));
        models.push(m);
    }
    check_unique(&names)?;
    let baseline = match &a.train {
        Some(p) => Some(MarginalPredictor { marginal: smoothed_marginal::<f64>(&read_corpus(p)?, a.baseline_pseudo)? }),
        None => None,
    };
    let predictors: Vec<Box<dyn Predictor<f64> + '_>> = models.iter().map(|m| m.predictor(a.paths, protocol)).collect();
    let mut list: Vec<(&str, &dyn Predictor<f64>)> =
        names.iter().map(String::as_str).zip(predictors.iter().map(|p| p.as_ref())).collect();
    if let Some(b) = &baseline {
        list.push(("baseline", b));
    }
    let report = prediction_loglik(&list, &test, &config)?;

    let h = header(cli, "eval predict", a);
    let csv = {
        let mut buf = Vec::new();
        report.write_csv(&h, &mut buf)?;
        buf
    };
    write_file(&a.output_dir.join("prediction.csv"), &csv)?;
    write_file(&a.output_dir.join("prediction.json"), h.wrap_json(&report)?.as_bytes())?;

    let mut out = std::io::stdout().lock();
    let _ = write!(out, "{:>4}", "tau");
    for c in &report.curves {
        let _ = write!(out, " {:>12}", c.model);
    }
    let _ = writeln!(out);
    for k in 0..config.tau_max {
        let _ = write!(out, "{:>4}", k + 1);
        for c in &report.curves {
            let _ = write!(out, " {:>12.4}", c.mean_loglik[k]);
        }
        let _ = writeln!(out);
    }
    Ok(())
}

fn kl(cli: &Cli, a: &KlArgs) -> Outcome {
    let specs: Vec<StatisticSpec> = if a.stats.is_empty() {
        paper_statistics()
    } else {
        a.stats.iter().map(|s| s.parse()).collect::<melodikit::Result<_>>()?
    };
    if a.resamples < 1 {
        return usage("--resamples must be >= 1");
    }
    if a.samples.is_empty() && a.models.is_empty() && a.train.is_none() {
        return usage("give at least one of --samples, --model or --train");
    }
    let test = read_corpus(&a.test)?;
    let train = a.train.as_ref().map(|p| read_corpus(p)).transpose()?;
    let like = match &a.sample_like {
        Some(p) => read_corpus(p)?,
        None => test.clone(),
    };
    let lengths: Vec<usize> = like.sequences.iter().map(|s| s.len()).collect();
    let mut entries: Vec<(String, Corpus)> = Vec::new();
    for spec in &a.samples {
        let (name, path) = named(spec);
        let c = read_corpus(&path)?;
        let name = name.unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        entries.push((name, c));
    }
    for (i, spec) in a.models.iter().enumerate() {
        let (name, path) = named(spec);
        let m = read_model(&path)?;
        if m.alphabet_size() != test.alphabet_size {
            return Err(Error::AlphabetMismatch { model: m.alphabet_size(), data: test.alphabet_size }.into());
        }
        let c = m.sample_corpus(&lengths, a.burn_in, rng::derive_seed(cli.seed, 1 + i as u64))?;
        entries.push((name.unwrap_or_else(|| m.kind().to_string()), c));
    }
    check_unique(&entries.iter().map(|e| e.0.clone()).collect::<Vec<_>>())?;
    let seed = rng::derive_seed(cli.seed, 0);
    let mut report = KlReport { n_resamples: a.resamples, seed, rows: Vec::new() };
    for (name, samples) in &entries {
        report.extend(bootstrap_kl(&test, samples, &specs, a.resamples, seed, name)?);
    }
    if let Some(train) = &train {
        report.extend(train_vs_test_reference(train, &test, &specs, a.resamples, seed)?);
    }
    let h = header(cli, "eval kl", a);
    let mut csv = Vec::new();
    report.write_csv(&h, &mut csv)?;
    write_file(&a.output_dir.join("kl.csv"), &csv)?;
    write_file(&a.output_dir.join("kl.json"), h.wrap_json(&report)?.as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn tune(cli: &Cli, a: &TuneArgs) -> Outcome {
    let kind = match a.model {
        TreeModelArg::Vmm => ModelKind::Vmm,
        TreeModelArg::Dvmm => ModelKind::Dvmm,
    };
    let text = fs::read_to_string(&a.grid).map_err(|e| io_err(&a.grid, e))?;
    let grid: GridSpec = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", a.grid.display())))?;
    grid.validate(kind)?;
    let corpus = read_corpus(&a.corpus)?;
    let result = grid_search(kind, &corpus, &grid)?;
    let mut h = header(cli, "tune", a);
    h.config["grid"] = serde_json::to_value(&grid).unwrap();
    let csv = csv_with_header(&h, |buf| result.write_csv(buf))?;
    write_file(&a.output_dir.join("scores.csv"), &csv)?;
    let best = BestParams { header: Some(h), params: result.best.params };
    let mut json = serde_json::to_string_pretty(&best).map_err(|e| Failure::Runtime(e.to_string()))?;
    json.push('\n');
    write_file(&a.output_dir.join("best.json"), json.as_bytes())?;
    let b = &result.best;
    println!(
        "best: c_min {} eps_min {} {} {}  score {:.6}  nodes {}  depth {}",
        b.params.c_min,
        b.params.eps_min,
        kind.smoothing_name(),
        b.params.smoothing,
        b.score,
        b.nodes,
        b.depth
    );
    Ok(())
}

fn filters(cli: &Cli, a: &FiltersArgs) -> Outcome {
    let AnyModel::TcRbm(m) = read_model(&a.model)? else {
        return usage(format!("{} is not a TC-RBM model", a.model.display()));
    };
    let f = m.filters();
    let h = header(cli, "filters", a);
    let csv = csv_with_header(&h, |buf| filters_to_csv(&f, buf))?;
    write_file(&a.output, &csv)?;
    println!("wrote {} filters of {}x{} to {}", f.len(), m.alphabet(), m.filter(), a.output.display());
    Ok(())
}
