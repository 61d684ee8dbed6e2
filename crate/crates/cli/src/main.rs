//! `deepmobility`: dataset generation, training, evaluation and closed-loop
//! simulation of handover policies.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use deepmobility_core::config::{Scenario, TrainingConfig};
use deepmobility_core::dataset::{make_windows, read_csv, write_csv};
use deepmobility_core::engine::{build_samples, fit_bundle, write_decision_log, ModelBundle};
use deepmobility_core::nn::{evaluate, write_history, ModelConfig, RecurrentKind};
use deepmobility_core::sim::{
    compare, generate_dataset, run, write_events, write_reports, A3Policy, EnginePolicy, GreedyPolicy,
    HandoverPolicy, SimReport,
};
use deepmobility_core::{Error, Result};

use crate::manifest::RunManifest;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "deepmobility", version, about = "Handover lab: simulate, train and compare handover policies")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RecurrentArg {
    Lstm,
    Rnn,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario under the A3 baseline and write oracle-labelled records.
    GenDataset {
        /// Scenario TOML file or built-in name.
        #[arg(long)]
        scenario: String,
        /// Output directory; receives dataset.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on a generated dataset.
    Train {
        /// dataset.csv or a directory containing it.
        #[arg(long)]
        data: PathBuf,
        /// Model file to write (JSON); the history CSV goes next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum)]
        recurrent: Option<RecurrentArg>,
        /// Squash the cell-state update through a sigmoid.
        #[arg(long)]
        paper_exact_cell: bool,
        /// Scenario TOML whose [training] and [model] tables are used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print loss and accuracy of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run one policy through a scenario.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// a3, greedy, deep:MODEL (or deep with --model).
        #[arg(long)]
        policy: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report CSV; events (and decisions for deep) go next to it.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several policies through one scenario and tabulate the deltas.
    Compare {
        #[arg(long)]
        scenario: String,
        /// Comma-separated, e.g. a3,greedy,deep:model.json
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Comparison CSV; the text table is printed and saved next to it.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Reference policy for the deltas (defaults to the first).
        #[arg(long)]
        reference: Option<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deepmobility: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenDataset { scenario, out, seed } => gen_dataset(&scenario, &out, seed),
        Command::Train { data, out, epochs, seed, recurrent, paper_exact_cell, config } => {
            train_cmd(&data, &out, epochs, seed, recurrent, paper_exact_cell, config.as_deref())
        }
        Command::Eval { model, data } => eval_cmd(&model, &data),
        Command::Simulate { scenario, policy, model, report, seed } => {
            simulate_cmd(&scenario, &policy, model.as_deref(), &report, seed)
        }
        Command::Compare { scenario, policies, model, report, seed, reference } => {
            compare_cmd(&scenario, &policies, model.as_deref(), &report, seed, reference.as_deref())
        }
    }
}

fn load_scenario(spec: &str, seed: Option<u64>) -> Result<Scenario> {
    let sc = Scenario::resolve(spec)?;
    Ok(match seed {
        Some(s) => sc.with_seed(s),
        None => sc,
    })
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// `base` with its extension replaced by `suffix` (e.g. `.history.csv`).
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    base.with_file_name(format!("{stem}{suffix}"))
}

fn gen_dataset(spec: &str, out: &Path, seed: Option<u64>) -> Result<()> {
    let started = Instant::now();
    let sc = load_scenario(spec, seed)?;
    let records = generate_dataset(&sc)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("dataset.csv");
    write_csv(&records, &path)?;

    let mut m = RunManifest::new("gen-dataset");
    m.config_path = Some(spec.to_string());
    m.seed = Some(sc.scenario.seed);
    m.outputs.push(path.display().to_string());
    m.effective_config = Some(sc.to_toml_string()?);
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write_next_to(&path)?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

fn dataset_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("dataset.csv")
    } else {
        data.to_path_buf()
    }
}

fn train_cmd(
    data: &Path,
    out: &Path,
    epochs: Option<usize>,
    seed: u64,
    recurrent: Option<RecurrentArg>,
    paper_exact_cell: bool,
    config: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    let (mut training, mut model_cfg) = match config {
        Some(p) => {
            let sc = Scenario::load(p)?;
            (sc.training, sc.model)
        }
        None => (TrainingConfig::default(), ModelConfig::default()),
    };
    if let Some(e) = epochs {
        training.optimizer.epochs = e;
    }
    training.optimizer.seed = seed;
    match recurrent {
        Some(RecurrentArg::Lstm) => model_cfg.recurrent = RecurrentKind::Lstm,
        Some(RecurrentArg::Rnn) => model_cfg.recurrent = RecurrentKind::Rnn,
        None => {}
    }
    model_cfg.paper_exact_cell_update |= paper_exact_cell;

    let data_path = dataset_path(data);
    let records = read_csv(&data_path)?;
    let fit = fit_bundle(&records, &training, &model_cfg, seed)?;
    let (history, n_train, n_val) = (fit.history, fit.n_train, fit.n_val);

    create_parent(out)?;
    fit.bundle.save(out)?;
    let history_path = sibling(out, ".history.csv");
    write_history(&history, &history_path)?;

    let mut m = RunManifest::new("train");
    m.config_path = config.map(|p| p.display().to_string());
    m.seed = Some(seed);
    m.inputs.push(data_path.display().to_string());
    m.outputs.push(out.display().to_string());
    m.outputs.push(history_path.display().to_string());
    m.effective_config = Some(format!(
        "[training]\n{}\n[model]\n{}",
        toml::to_string(&training).map_err(|e| Error::Config(e.to_string()))?,
        toml::to_string(&model_cfg).map_err(|e| Error::Config(e.to_string()))?
    ));
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write_next_to(out)?;
    m.write_next_to(&history_path)?;
    if let Some(last) = history.last() {
        println!(
            "epoch {}: train loss {:.6} acc {:.4}, val loss {:.6} acc {:.4} ({} train / {} val windows)",
            last.epoch,
            last.train_loss,
            last.train_acc,
            last.val_loss,
            last.val_acc,
            n_train,
            n_val
        );
    }
    Ok(())
}

fn eval_cmd(model: &Path, data: &Path) -> Result<()> {
    let bundle = ModelBundle::load(model)?;
    let records = read_csv(dataset_path(data))?;
    let windows = make_windows(&records, bundle.window_len);
    if windows.is_empty() {
        return Err(Error::Data("no complete windows in the dataset".into()));
    }
    let samples = build_samples(&windows, &bundle.scaler)?;
    let (loss, acc) = evaluate(&bundle.model, &samples)?;
    println!("windows {} loss {loss:.6} accuracy {acc:.4}", samples.len());
    Ok(())
}

enum PolicyChoice {
    A3,
    Greedy,
    Deep(PathBuf),
}

fn parse_policy(s: &str, model: Option<&Path>) -> Result<PolicyChoice> {
    match s.trim() {
        "a3" => Ok(PolicyChoice::A3),
        "greedy" => Ok(PolicyChoice::Greedy),
        "deep" => model
            .map(|m| PolicyChoice::Deep(m.to_path_buf()))
            .ok_or_else(|| Error::Config("policy deep needs --model or deep:MODEL".into())),
        other => match other.strip_prefix("deep:") {
            Some(p) if !p.is_empty() => Ok(PolicyChoice::Deep(PathBuf::from(p))),
            _ => Err(Error::Config(format!("unknown policy {other:?} (a3, greedy, deep:MODEL)"))),
        },
    }
}

/// Runs one policy; deep policies also return their decision log.
fn run_policy(
    sc: &Scenario,
    choice: &PolicyChoice,
) -> Result<(SimReport, Option<Vec<deepmobility_core::engine::DecisionLogRow>>)> {
    match choice {
        PolicyChoice::A3 => Ok((run(sc, &mut A3Policy::new(sc.handover.clone()))?, None)),
        PolicyChoice::Greedy => Ok((run(sc, &mut GreedyPolicy)?, None)),
        PolicyChoice::Deep(path) => {
            let bundle = ModelBundle::load(path)?;
            let mut p = EnginePolicy::new(bundle, sc.policy.clone());
            let report = run(sc, &mut p as &mut dyn HandoverPolicy)?;
            Ok((report, Some(std::mem::take(&mut p.log))))
        }
    }
}

fn simulate_cmd(spec: &str, policy: &str, model: Option<&Path>, report: &Path, seed: Option<u64>) -> Result<()> {
    let started = Instant::now();
    let sc = load_scenario(spec, seed)?;
    let choice = parse_policy(policy, model)?;
    let (rep, log) = run_policy(&sc, &choice)?;
    create_parent(report)?;
    write_reports(std::slice::from_ref(&rep), report)?;
    let events_path = sibling(report, ".events.csv");
    write_events(std::slice::from_ref(&rep), &events_path)?;

    let mut m = RunManifest::new("simulate");
    m.config_path = Some(spec.to_string());
    m.seed = Some(sc.scenario.seed);
    m.outputs.push(report.display().to_string());
    m.outputs.push(events_path.display().to_string());
    if let PolicyChoice::Deep(p) = &choice {
        m.inputs.push(p.display().to_string());
    }
    if let Some(rows) = log {
        let dpath = sibling(report, ".decisions.csv");
        write_decision_log(&rows, &dpath)?;
        m.outputs.push(dpath.display().to_string());
    }
    m.effective_config = Some(sc.to_toml_string()?);
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write_next_to(report)?;
    let x = &rep.metrics;
    println!(
        "{} on {} (seed {}): handovers {} ping-pong {} hof {} rlf {} mean sinr {:.2} dB",
        rep.policy,
        rep.scenario,
        rep.seed,
        x.handover_count,
        x.ping_pong_count,
        x.hof_count,
        x.rlf_count,
        x.mean_sinr_db
    );
    Ok(())
}

fn compare_cmd(
    spec: &str,
    policies: &[String],
    model: Option<&Path>,
    report: &Path,
    seed: Option<u64>,
    reference: Option<&str>,
) -> Result<()> {
    let started = Instant::now();
    let sc = load_scenario(spec, seed)?;
    let choices: Vec<PolicyChoice> = policies.iter().map(|p| parse_policy(p, model)).collect::<Result<_>>()?;
    // One world per policy; results are collected in argument order.
    let results: Vec<Result<SimReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = choices
            .iter()
            .map(|c| s.spawn(|| run_policy(&sc, c).map(|(r, _)| r)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    // Disambiguate repeated policy names (e.g. two models).
    for i in 0..reports.len() {
        let dupes = reports[..i].iter().filter(|r| r.policy == reports[i].policy).count();
        if dupes > 0 {
            reports[i].policy = format!("{}#{}", reports[i].policy, dupes + 1);
        }
    }
    let reference = reference.map(str::to_string).unwrap_or_else(|| reports[0].policy.clone());
    let table = compare(&reports, &reference)?;

    create_parent(report)?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(report)?);
        table.write_csv_to(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    let text = table.to_text();
    let text_path = sibling(report, ".txt");
    std::fs::write(&text_path, &text)?;
    let runs_path = sibling(report, ".runs.csv");
    write_reports(&reports, &runs_path)?;

    let mut m = RunManifest::new("compare");
    m.config_path = Some(spec.to_string());
    m.seed = Some(sc.scenario.seed);
    for c in &choices {
        if let PolicyChoice::Deep(p) = c {
            m.inputs.push(p.display().to_string());
        }
    }
    m.outputs.extend([report, &text_path, &runs_path].iter().map(|p| p.display().to_string()));
    m.effective_config = Some(sc.to_toml_string()?);
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write_next_to(report)?;
    print!("{text}");
    Ok(())
}
