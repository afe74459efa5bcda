//! `dpno`: generate PDE datasets, train operators on them, evaluate checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dpno::autodiff::Tensor;
use dpno::dual_path::MergeInput;
use dpno::io::{check_overwrite, write_tensor};
use dpno::model::ModelKind;
use dpno::pde::{build_dataset, read_bundle, write_bundle, PdeProblemSpec, ProblemKind};
use dpno::train::{
    evaluate, load_run, model_config, prepare, save_run, train, LrDecay, MetricsWriter,
    ModelOverrides, Precision, TrainConfig, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE,
};

#[derive(Parser)]
#[command(
    name = "dpno",
    version,
    about = "Dual-path neural operators: data, training, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample input functions, solve the PDE and write a dataset bundle.
    GenData(GenData),
    /// Train a model on a bundle; writes metrics.csv, checkpoint.dpno and config.txt.
    Train(Train),
    /// Evaluate a trained run on a bundle split.
    Eval(Eval),
}

#[derive(Args)]
struct GenData {
    /// burgers, darcy or ns
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    /// Output grid size per axis (power of two). Default: 1024 for burgers, 64 otherwise.
    #[arg(long)]
    resolution: Option<usize>,
    /// Grid the solver runs on; must be a power-of-two multiple of the resolution.
    #[arg(long)]
    solve_resolution: Option<usize>,
    /// Viscosity (burgers, ns).
    #[arg(long)]
    nu: Option<f64>,
    /// Burgers: final time. NS: last snapshot time.
    #[arg(long)]
    final_time: Option<f64>,
    /// Solver time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Sample i uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Args)]
struct Train {
    /// fno, deeponet, dp-fno or dp-deeponet
    #[arg(long)]
    model: ModelKind,
    /// Bundle directory written by gen-data.
    #[arg(long)]
    data: PathBuf,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 20)]
    test_every: usize,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// FNO width d_v.
    #[arg(long)]
    width: Option<usize>,
    /// Retained Fourier modes per axis.
    #[arg(long)]
    modes: Option<usize>,
    /// DeepONet basis size p.
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    res_blocks: Option<usize>,
    #[arg(long)]
    dense_blocks: Option<usize>,
    /// full or last
    #[arg(long)]
    merge_input: Option<MergeInput>,
    #[arg(long, default_value = "f64")]
    precision: Precision,
    /// Step decay `every:gamma`, off by default.
    #[arg(long)]
    lr_decay: Option<LrDecay>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct Eval {
    /// Run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    /// Write |pred − true| per sample plus a manifest.csv into this directory.
    #[arg(long)]
    dump_error_fields: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn gen_data(a: GenData) -> Result<()> {
    let resolution = a.resolution.unwrap_or(match a.problem {
        ProblemKind::Burgers => 1024,
        _ => 64,
    });
    let mut spec = PdeProblemSpec::new(a.problem, resolution);
    if let Some(s) = a.solve_resolution {
        spec.solve_resolution = s;
    }
    if let Some(nu) = a.nu {
        spec.nu = nu;
    }
    if let Some(t) = a.final_time {
        spec.final_time = t;
    }
    spec.dt = a.dt;
    spec.n_train = a.n_train;
    spec.n_test = a.n_test;
    spec.base_seed = a.seed;
    spec.validate()?;
    if a.out.exists() && !a.force && fs::read_dir(&a.out)?.next().is_some() {
        bail!(
            "{} is not empty; pass --force to overwrite",
            a.out.display()
        );
    }
    let data = build_dataset(&spec).context("generating samples")?;
    write_bundle(&a.out, &data, a.force)?;
    println!(
        "wrote {} ({} problem, {} train + {} test samples, shape {:?}, solved at {})",
        a.out.display(),
        spec.kind,
        spec.n_train,
        spec.n_test,
        spec.sample_shape(),
        spec.solve_resolution
    );
    Ok(())
}

fn train_cmd(a: Train) -> Result<()> {
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        weight_decay: a.weight_decay,
        test_every: a.test_every,
        batch_size: a.batch_size,
        seed: a.seed,
        lr_decay: a.lr_decay,
        precision: a.precision,
    };
    cfg.validate()?;
    for f in [METRICS_FILE, CHECKPOINT_FILE, CONFIG_FILE] {
        check_overwrite(&a.out.join(f), a.force)
            .context("pass --force to replace an existing run")?;
    }
    let data =
        read_bundle(&a.data).with_context(|| format!("reading bundle {}", a.data.display()))?;
    let problem = data.problem()?;
    let ov = ModelOverrides {
        width: a.width,
        modes: a.modes,
        basis: a.basis,
        res_blocks: a.res_blocks,
        dense_blocks: a.dense_blocks,
        merge_input: a.merge_input,
    };
    let mcfg = model_config(a.model, &data, &ov)?;
    fs::create_dir_all(&a.out)?;
    let mut metrics = MetricsWriter::create(&a.out.join(METRICS_FILE))?;
    let run = train(&cfg, &mcfg, &data, |r| {
        metrics.append(r)?;
        if let Some(t) = r.test_rel_l2 {
            println!(
                "epoch {:>5}  train {:.6}  test {:.6}",
                r.epoch, r.train_rel_l2, t
            );
        }
        Ok(())
    })?;
    save_run(&a.out, &run, &cfg, problem)?;
    println!("{} parameters", run.store.count());
    println!("final train rel L2: {}", run.final_train_rel_l2);
    Ok(())
}

fn eval_cmd(a: Eval) -> Result<()> {
    let run = load_run(&a.run).with_context(|| format!("loading run {}", a.run.display()))?;
    let data =
        read_bundle(&a.data).with_context(|| format!("reading bundle {}", a.data.display()))?;
    let problem = data.problem()?;
    if problem != run.problem {
        bail!(
            "run was trained on {} but the bundle holds {}",
            run.problem,
            problem
        );
    }
    let (inputs, targets, name) = match a.split {
        Split::Train => (&data.a_train, &data.u_train, "train"),
        Split::Test => (&data.a_test, &data.u_test, "test"),
    };
    let prepared = prepare(&run.config, &data, inputs, targets, &run.normalizer)
        .context("bundle does not fit this model")?;
    let ev = evaluate(
        &run.model,
        &run.store,
        &run.config,
        &prepared,
        &run.normalizer,
        a.batch_size,
    )?;
    println!("mean {name} rel L2: {}", ev.mean);
    if let Some(dir) = &a.dump_error_fields {
        dump_errors(dir, &ev.predictions, targets, &ev.per_sample, a.force)?;
        println!(
            "wrote {} error fields to {}",
            ev.per_sample.len(),
            dir.display()
        );
    }
    Ok(())
}

fn dump_errors(dir: &Path, pred: &Tensor, truth: &Tensor, rel: &[f64], force: bool) -> Result<()> {
    let manifest = dir.join("manifest.csv");
    check_overwrite(&manifest, force).context("pass --force to replace existing error fields")?;
    fs::create_dir_all(dir)?;
    if pred.shape() != truth.shape() {
        bail!(
            "prediction shape {:?} differs from target shape {:?}",
            pred.shape(),
            truth.shape()
        );
    }
    let n = truth.shape()[0];
    let mut csv = fs::File::create(&manifest)?;
    writeln!(csv, "sample,file,rel_l2,max_abs_error")?;
    for i in 0..n {
        let (p, t) = (pred.sample(i), truth.sample(i));
        let err = Tensor::from_fn(t.shape(), |k| (p.data()[k] - t.data()[k]).abs());
        let file = format!("error_{i:05}.dpno");
        write_tensor(&dir.join(&file), &err)?;
        writeln!(csv, "{i},{file},{},{}", rel[i], err.max_abs())?;
    }
    Ok(())
}
