//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on a usage error, 2 on a runtime failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::metrics::{estimate_energy, write_csv, EnergyModel, CSV_HEADER};
use crate::trainer::{
    evaluate, load_data, parse_densities, sweep_epsilon, synthetic_splits, train_with, Checkpoint,
    DatasetKind, EvalSplit, LayerDensity, ModelPreset, TrainingConfig, EVENT_FILES, SWEEP_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Files written by `train` into its output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";
/// Table written by `sweep` into its output directory.
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Parser, Debug)]
#[command(
    name = "eslsnn",
    version,
    about = "Sparse-from-scratch spiking network training",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model and save its best checkpoint and metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report the accuracy of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "validation", "val", "test"])]
        split: String,
        /// Dataset root replacing the one stored in the checkpoint.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Train one run per (epsilon, seed) and tabulate test accuracy.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated first-layer sparsity factors.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Count active connections of a checkpoint and estimate inference energy.
    Energy {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        joules_per_op_gpu: Option<f64>,
        #[arg(long)]
        joules_per_op_neuromorphic: Option<f64>,
    },
    /// Generate a dataset and save it to disk.
    GenData(GenData),
}

#[derive(Args, Debug)]
struct Overrides {
    /// Replaces the seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Per-layer densities, e.g. `60,dense`.
    #[arg(long)]
    densities: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataKind {
    SyntheticEvents,
}

#[derive(Args, Debug)]
struct GenData {
    #[arg(long, value_enum)]
    kind: DataKind,
    #[arg(long)]
    out: PathBuf,
    /// Config whose synthetic_* fields and seed describe the data.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train {
            config,
            out: dir,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            train_command(&cfg, &dir, out, err)
        }
        Command::Eval {
            checkpoint,
            split,
            data_dir,
        } => {
            let mut ck = Checkpoint::load(&checkpoint)?;
            if data_dir.is_some() {
                ck.config.data_dir = data_dir;
            }
            let split: EvalSplit = split.parse()?;
            let data = load_data(&ck.config)?;
            let report = evaluate(&ck, &data, split)?;
            let per_class: Vec<String> =
                report.per_class.iter().map(|a| format!("{a:.4}")).collect();
            report_lines(
                out,
                &[
                    format!("samples: {}", report.samples),
                    format!("accuracy: {:.4}", report.accuracy),
                    format!("per_class: {}", per_class.join(",")),
                ],
            )
        }
        Command::Sweep {
            config,
            epsilon,
            seeds,
            out: dir,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            sweep_command(&cfg, &epsilon, seeds, &dir, out)
        }
        Command::Energy {
            checkpoint,
            joules_per_op_gpu,
            joules_per_op_neuromorphic,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let defaults = EnergyModel::default();
            let model = EnergyModel::new(
                joules_per_op_gpu.unwrap_or(defaults.joules_per_op_gpu),
                joules_per_op_neuromorphic.unwrap_or(defaults.joules_per_op_neuromorphic),
            )?;
            energy_report(&ck, &model, out)
        }
        Command::GenData(args) => gen_data(&args, out),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn report_lines(out: &mut dyn Write, lines: &[String]) -> Result<()> {
    for line in lines {
        writeln!(out, "{line}").map_err(io(Path::new("<stdout>")))?;
    }
    Ok(())
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<TrainingConfig> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let mut cfg = TrainingConfig::from_text(&text)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = overrides.epochs {
        cfg.epochs = epochs;
    }
    if let Some(dir) = &overrides.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    if let Some(d) = &overrides.densities {
        cfg.epsilon = parse_densities(d)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io(path))
}

fn train_command(
    cfg: &TrainingConfig,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    let data = load_data(cfg)?;
    let metrics_path = dir.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(io(&metrics_path))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{CSV_HEADER}").map_err(io(&metrics_path))?;
    let mut write_error = None;
    let outcome = train_with(cfg, &data, |record, _| {
        if write_error.is_some() {
            return;
        }
        if let Err(e) = writeln!(csv, "{}", record.to_csv_row()) {
            write_error = Some(e);
        }
        if let Some(acc) = record.val_accuracy {
            let _ = writeln!(
                err,
                "epoch {} val_accuracy {acc:.4} loss {:.4}",
                record.epoch, record.train_loss
            );
        }
    })?;
    if let Some(e) = write_error {
        return Err(Error::io(&metrics_path, e));
    }
    csv.flush().map_err(io(&metrics_path))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    outcome.checkpoint.save(&ck_path)?;
    let report = evaluate(&outcome.checkpoint, &data, EvalSplit::Test)?;
    let densities: Vec<String> = outcome
        .checkpoint
        .model
        .densities()
        .iter()
        .map(|d| format!("{d:.4}"))
        .collect();
    report_lines(
        out,
        &[
            format!("checkpoint: {}", ck_path.display()),
            format!("best_epoch: {}", outcome.checkpoint.epoch),
            format!("val_accuracy: {:.4}", outcome.checkpoint.best_val_accuracy),
            format!("test_accuracy: {:.4}", report.accuracy),
            format!("densities: {}", densities.join(";")),
            format!("connections: {}", report.ops.total_connections()),
        ],
    )
}

fn sweep_command(
    cfg: &TrainingConfig,
    epsilons: &[f64],
    seeds: usize,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    create_dir(dir)?;
    let data = load_data(cfg)?;
    let table_path = dir.join(SWEEP_FILE);
    let mut table = format!("{SWEEP_HEADER}\n");
    write_file(&table_path, table.as_bytes())?;
    sweep_epsilon(cfg, epsilons, seeds, &data, |row, outcome| {
        let run_dir = dir.join(format!("eps{}_seed{}", row.epsilon, row.seed));
        create_dir(&run_dir)?;
        outcome.checkpoint.save(&run_dir.join(CHECKPOINT_FILE))?;
        let metrics_path = run_dir.join(METRICS_FILE);
        let file = File::create(&metrics_path).map_err(io(&metrics_path))?;
        write_csv(BufWriter::new(file), &outcome.metrics).map_err(io(&metrics_path))?;
        // Rewritten after every run so an interrupted sweep keeps its rows.
        table.push_str(&row.to_csv_row());
        table.push('\n');
        write_file(&table_path, table.as_bytes())?;
        writeln!(out, "{}", row.to_csv_row()).map_err(io(Path::new("<stdout>")))
    })?;
    Ok(())
}

fn energy_report(ck: &Checkpoint, model: &EnergyModel, out: &mut dyn Write) -> Result<()> {
    let ops = ck.model.op_counts();
    let mut lines = Vec::new();
    for (k, layer) in ops.layers.iter().enumerate() {
        lines.push(format!(
            "layer {k}: connections {} ops_per_step {}",
            layer.connections, layer.ops_per_step
        ));
    }
    let connections = ops.total_connections();
    let energy = estimate_energy(connections, model);
    lines.push(format!("total_connections: {connections}"));
    lines.push(format!("total_ops_per_step: {}", ops.total_ops_per_step()));
    lines.push(format!("energy_gpu_j: {:.3e}", energy.joules_gpu));
    lines.push(format!(
        "energy_neuromorphic_j: {:.3e}",
        energy.joules_neuromorphic
    ));
    report_lines(out, &lines)
}

fn gen_data(args: &GenData, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => TrainingConfig::from_text(&fs::read_to_string(path).map_err(io(path))?)?,
        None => TrainingConfig::default(),
    };
    match args.kind {
        DataKind::SyntheticEvents => {
            cfg.dataset = DatasetKind::SyntheticEvents;
            if !cfg.model.is_lif() {
                cfg.model = ModelPreset::LifMlp;
            }
        }
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.per_class {
        cfg.synthetic_per_class = v;
    }
    if let Some(v) = args.test_per_class {
        cfg.synthetic_test_per_class = v;
    }
    if let Some(v) = args.classes {
        cfg.synthetic_classes = v;
    }
    if let Some(v) = args.size {
        cfg.synthetic_size = v;
    }
    if let Some(v) = args.steps {
        cfg.time_steps = v;
    }
    if let Some(v) = args.noise {
        cfg.synthetic_noise = v;
    }
    if cfg.epsilon.is_empty() {
        cfg.epsilon.push(LayerDensity::Dense);
    }
    cfg.validate()?;
    create_dir(&args.out)?;
    let (train, test) = synthetic_splits(&cfg)?;
    for (name, set) in EVENT_FILES.iter().zip([&train, &test]) {
        set.save(&args.out.join(name))?;
    }
    report_lines(
        out,
        &[
            format!(
                "train: {} samples -> {}",
                train.len(),
                args.out.join(EVENT_FILES[0]).display()
            ),
            format!(
                "test: {} samples -> {}",
                test.len(),
                args.out.join(EVENT_FILES[1]).display()
            ),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("eslsnn").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn no_arguments_prints_usage_and_fails() {
        let (code, out, err) = run_args(&[]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn unknown_subcommand_and_flag_are_usage_errors() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        let (code, _, err) = run_args(&["energy", "--checkpoint", "x", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn help_succeeds() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("gen-data"));
    }

    #[test]
    fn missing_checkpoint_is_a_runtime_failure() {
        let (code, _, err) = run_args(&["energy", "--checkpoint", "/nonexistent/ck.bin"]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn overrides_replace_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        fs::write(&path, "seed = 5\nepochs = 2\n").unwrap();
        let overrides = Overrides {
            seed: Some(11),
            epochs: None,
            data_dir: None,
            densities: Some("dense".into()),
        };
        let cfg = load_config(&path, &overrides).unwrap();
        assert_eq!((cfg.seed, cfg.epochs), (11, 2));
        assert_eq!(cfg.epsilon, vec![LayerDensity::Dense]);
    }
}
