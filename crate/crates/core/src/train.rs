//! Training and evaluation protocol: data layout per model family,
//! normalization, shuffled mini-batch AdamW, metrics and checkpoints.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamW, AdamWConfig, Tape, Tensor};
use crate::dual_path::MergeInput;
use crate::error::{Error, Result};
use crate::io::{read_checkpoint, write_checkpoint, Metadata};
use crate::model::{Model, ModelConfig, ModelKind};
use crate::nn::ParamStore;
use crate::pde::{Dataset, ProblemKind};

pub const METRICS_HEADER: &str = "epoch,train_rel_l2,test_rel_l2,wall_clock_s";
pub const CHECKPOINT_FILE: &str = "checkpoint.dpno";
pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::InvalidConfig(format!(
                "unknown precision `{other}` (expected f32 or f64)"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Multiply the learning rate by `gamma` every `every` epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrDecay {
    pub every: usize,
    pub gamma: f64,
}

/// `every:gamma`, e.g. `100:0.5`.
impl FromStr for LrDecay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidConfig(format!("learning-rate decay `{s}`: expected every:gamma"));
        let (every, gamma) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self {
            every: every.trim().parse().map_err(|_| bad())?,
            gamma: gamma.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub test_every: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_decay: Option<LrDecay>,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-3,
            weight_decay: AdamWConfig::default().weight_decay,
            test_every: 20,
            batch_size: 20,
            seed: 0,
            lr_decay: None,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.test_every == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "test-every and batch size must be positive".into(),
            ));
        }
        if let Some(d) = self.lr_decay {
            if d.every == 0 || !(d.gamma > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "bad learning-rate decay {d:?}"
                )));
            }
        }
        if self.precision == Precision::F32 {
            return Err(Error::InvalidConfig(
                "only f64 training is implemented; pass --precision f64".into(),
            ));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.lr * d.gamma.powi(((epoch - 1) / d.every) as i32),
            None => self.lr,
        }
    }
}

/// Optional architecture overrides on top of the per-problem defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelOverrides {
    pub width: Option<usize>,
    pub modes: Option<usize>,
    pub basis: Option<usize>,
    pub res_blocks: Option<usize>,
    pub dense_blocks: Option<usize>,
    pub merge_input: Option<MergeInput>,
}

/// Sample layout of a bundle: spatial grid plus optional leading channel axis.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    problem: ProblemKind,
    spatial: Vec<usize>,
    in_channels: usize,
    out_channels: usize,
    /// NS: the target snapshot times, as fractions of the last time.
    target_times: Vec<f64>,
}

impl Layout {
    fn of(data: &Dataset) -> Result<Self> {
        let problem = data.problem()?;
        let dims = problem.spatial_dims();
        let a = &data.a_train.shape()[1..];
        let u = &data.u_train.shape()[1..];
        if a.len() < dims || u.len() < dims || a[a.len() - dims..] != u[u.len() - dims..] {
            return Err(Error::shape("bundle layout", a, u));
        }
        let channels = |s: &[usize]| -> Result<usize> {
            match s.len() - dims {
                0 => Ok(1),
                1 => Ok(s[0]),
                _ => Err(Error::invalid_shape(
                    "bundle layout",
                    format!("unexpected sample shape {s:?}"),
                )),
            }
        };
        let spatial = a[a.len() - dims..].to_vec();
        let out_channels = channels(u)?;
        let target_times = if problem == ProblemKind::NavierStokes {
            let last: f64 = data.metadata.parse_value("final_time")?;
            let half = (last / 2.0).round();
            (0..out_channels)
                .map(|c| (half + 1.0 + c as f64) / last)
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            problem,
            in_channels: channels(a)?,
            out_channels,
            spatial,
            target_times,
        })
    }

    fn points(&self) -> usize {
        self.spatial.iter().product()
    }

    /// FNO coordinates `[grid..., d]`, `j/S` per axis.
    fn coords(&self) -> Tensor {
        let d = self.spatial.len();
        let pts = self.points();
        let mut data = Vec::with_capacity(pts * d);
        for p in 0..pts {
            let mut rem = p;
            let mut idx = vec![0; d];
            for ax in (0..d).rev() {
                idx[ax] = rem % self.spatial[ax];
                rem /= self.spatial[ax];
            }
            data.extend(
                idx.iter()
                    .zip(&self.spatial)
                    .map(|(&i, &s)| i as f64 / s as f64),
            );
        }
        let mut shape = self.spatial.clone();
        shape.push(d);
        Tensor::new(&shape, data).unwrap()
    }

    /// DeepONet queries in the flattened target order `[q, d]`.
    fn queries(&self) -> Tensor {
        let coords = self.coords();
        let d = self.spatial.len();
        if self.target_times.is_empty() {
            return coords.reshape(&[self.points(), d]).unwrap();
        }
        let mut data = Vec::new();
        for &t in &self.target_times {
            for p in coords.data().chunks(d) {
                data.extend_from_slice(p);
                data.push(t);
            }
        }
        Tensor::new(&[self.target_times.len() * self.points(), d + 1], data).unwrap()
    }

    fn query_dim(&self) -> usize {
        self.spatial.len() + usize::from(!self.target_times.is_empty())
    }

    fn to_fno(&self, t: &Tensor, channels: usize) -> Result<Tensor> {
        let n = t.shape()[0];
        if t.ndim() == self.spatial.len() + 1 {
            let mut shape = vec![n];
            shape.extend_from_slice(&self.spatial);
            shape.push(1);
            t.clone().reshape(&shape)
        } else {
            debug_assert_eq!(t.shape()[1], channels);
            Ok(t.channels_last())
        }
    }
}

/// Scalar input standardization and output scale, fitted on the training split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub input_mean: f64,
    pub input_std: f64,
    pub output_scale: f64,
}

impl Normalizer {
    pub fn fit(a: &Tensor, u: &Tensor) -> Self {
        let n = a.numel() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let var = a.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let rms = (u.data().iter().map(|v| v * v).sum::<f64>() / u.numel() as f64).sqrt();
        Self {
            input_mean: mean,
            input_std: if var > 0.0 { var.sqrt() } else { 1.0 },
            output_scale: if rms > 0.0 { rms } else { 1.0 },
        }
    }
}

/// Model-ready tensors for one split.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// FNO: `[N, grid..., C]`; DeepONet: `[N, m]`.
    pub inputs: Tensor,
    /// Scaled targets in the model's output layout.
    pub targets: Tensor,
    /// FNO coordinates or DeepONet queries.
    pub aux: Tensor,
    /// Target shape in bundle layout, for mapping predictions back.
    pub target_shape: Vec<usize>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Architecture for `kind` on this bundle: FNO width 32 with `min(16, S/2)`
/// modes in 1-D or `min(12, S/2)` in 2-D, merge width `2·d_v`; DeepONet
/// 4-layer width-128 MLPs with `p = 128`.
pub fn model_config(kind: ModelKind, data: &Dataset, ov: &ModelOverrides) -> Result<ModelConfig> {
    let layout = Layout::of(data)?;
    let mut cfg = ModelConfig::new(kind);
    let s = *layout.spatial.iter().min().unwrap();
    let dims = layout.spatial.len();
    cfg.in_channels = layout.in_channels;
    cfg.out_channels = layout.out_channels;
    cfg.coord_dim = dims;
    cfg.width = ov.width.unwrap_or(32);
    let k = ov
        .modes
        .unwrap_or(if dims == 1 { 16 } else { 12 }.min(s / 2).max(1));
    cfg.modes = vec![k; dims];
    cfg.merge_hidden = 2 * cfg.width;
    cfg.sensors = data.a_train.numel() / data.n_train();
    cfg.query_dim = layout.query_dim();
    cfg.basis = ov.basis.unwrap_or(128);
    if let Some(r) = ov.res_blocks {
        cfg.res_blocks = r;
    }
    if let Some(d) = ov.dense_blocks {
        cfg.dense_blocks = d;
    }
    if let Some(m) = ov.merge_input {
        cfg.merge_input = m;
    }
    Ok(cfg)
}

/// Lay out `(a, u)` for `cfg`'s model family, normalized by `norm`.
pub fn prepare(
    cfg: &ModelConfig,
    data: &Dataset,
    a: &Tensor,
    u: &Tensor,
    norm: &Normalizer,
) -> Result<Prepared> {
    let layout = Layout::of(data)?;
    let a_norm = a.map(|v| (v - norm.input_mean) / norm.input_std);
    let u_norm = u.map(|v| v / norm.output_scale);
    let n = a.shape()[0];
    let (inputs, targets, aux) = if cfg.kind.is_fno() {
        (
            layout.to_fno(&a_norm, layout.in_channels)?,
            layout.to_fno(&u_norm, layout.out_channels)?,
            layout.coords(),
        )
    } else {
        let m = a.numel() / n;
        let q = u.numel() / n;
        (
            a_norm.reshape(&[n, m])?,
            u_norm.reshape(&[n, q])?,
            layout.queries(),
        )
    };
    let expected_in = if cfg.kind.is_fno() {
        cfg.in_channels
    } else {
        cfg.sensors
    };
    if inputs.channels() != expected_in {
        return Err(Error::shape(
            "prepare inputs",
            inputs.shape(),
            &[expected_in],
        ));
    }
    Ok(Prepared {
        inputs,
        targets,
        aux,
        target_shape: u.shape().to_vec(),
    })
}

/// Per-sample relative L2 errors and predictions in bundle layout and units.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    pub predictions: Tensor,
}

/// Forward pass on all of `split` in chunks of `batch` samples (no gradients).
pub fn predict(
    model: &Model,
    store: &ParamStore,
    split: &Prepared,
    batch: usize,
) -> Result<Tensor> {
    let n = split.len();
    let mut out = Vec::with_capacity(split.targets.numel());
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let p = store.bind_frozen(&mut tape);
        let x = tape.constant(split.inputs.select(chunk));
        let aux = tape.constant(split.aux.clone());
        let y = model.forward(&mut tape, &p, x, aux)?;
        out.extend_from_slice(tape.value(y).data());
    }
    Tensor::new(split.targets.shape(), out)
}

pub fn evaluate(
    model: &Model,
    store: &ParamStore,
    cfg: &ModelConfig,
    split: &Prepared,
    norm: &Normalizer,
    batch: usize,
) -> Result<Evaluation> {
    let pred = predict(model, store, split, batch)?;
    let n = split.len();
    let per = pred.numel() / n;
    let per_sample: Vec<f64> = (0..n)
        .map(|i| {
            let p = &pred.data()[i * per..(i + 1) * per];
            let t = &split.targets.data()[i * per..(i + 1) * per];
            let num: f64 = p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = t.iter().map(|b| b * b).sum();
            (num / den).sqrt()
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    let scaled = pred.map(|v| v * norm.output_scale);
    let predictions = if cfg.kind.is_fno() {
        let layout_dims = split.aux.ndim() - 1;
        if split.target_shape.len() == layout_dims + 1 {
            scaled.reshape(&split.target_shape)?
        } else {
            scaled.channels_first()
        }
    } else {
        scaled.reshape(&split.target_shape)?
    };
    Ok(Evaluation {
        per_sample,
        mean,
        predictions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_rel_l2: f64,
    pub test_rel_l2: Option<f64>,
    pub wall_clock_s: f64,
}

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3}",
            self.epoch,
            self.train_rel_l2,
            self.test_rel_l2.map_or(String::new(), |t| t.to_string()),
            self.wall_clock_s
        )
    }
}

/// A trained model with everything needed to checkpoint and evaluate it.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: Model,
    pub store: ParamStore,
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub history: Vec<EpochRecord>,
    /// Train-split loss of the final parameters.
    pub final_train_rel_l2: f64,
}

/// Run the training protocol; `on_epoch` sees every record as it is made.
pub fn train(
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let norm = Normalizer::fit(&data.a_train, &data.u_train);
    let train_set = prepare(mcfg, data, &data.a_train, &data.u_train, &norm)?;
    let test_set = prepare(mcfg, data, &data.a_test, &data.u_test, &norm)?;
    let (model, mut store) = Model::build(mcfg, cfg.seed)?;
    let mut opt = AdamW::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        store.tensors(),
    );
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let start = Instant::now();
    let mut history = Vec::with_capacity(cfg.epochs);
    let diverged = |epoch: usize, detail: String| Error::Diverged {
        solver: "train",
        step: epoch,
        time: start.elapsed().as_secs_f64(),
        detail,
    };
    for epoch in 1..=cfg.epochs {
        opt.config.lr = cfg.lr_at(epoch);
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape);
            let x = tape.constant(train_set.inputs.select(batch));
            let aux = tape.constant(train_set.aux.clone());
            let step = |tape: &mut Tape| -> Result<_> {
                let y = model.forward(tape, &p, x, aux)?;
                let loss = tape.relative_l2(y, &train_set.targets.select(batch))?;
                Ok(loss)
            };
            let loss = step(&mut tape).map_err(|e| match e {
                Error::NonFinite { op } => diverged(epoch, format!("non-finite value in `{op}`")),
                other => other,
            })?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(diverged(epoch, format!("loss is {value}")));
            }
            total += value * batch.len() as f64;
            let mut grads = tape.backward(loss).map_err(|e| match e {
                Error::NonFinite { op } => {
                    diverged(epoch, format!("non-finite gradient in `{op}`"))
                }
                other => other,
            })?;
            let g: Vec<Tensor> = p.vars().iter().map(|&v| grads.take(v).unwrap()).collect();
            opt.step(store.tensors_mut(), &g)?;
        }
        let train_rel_l2 = total / train_set.len() as f64;
        let test_rel_l2 = if epoch % cfg.test_every == 0 {
            Some(evaluate(&model, &store, mcfg, &test_set, &norm, cfg.batch_size)?.mean)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_rel_l2,
            test_rel_l2,
            wall_clock_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record)?;
        history.push(record);
    }
    let final_train_rel_l2 =
        evaluate(&model, &store, mcfg, &train_set, &norm, cfg.batch_size)?.mean;
    Ok(TrainedModel {
        model,
        store,
        config: mcfg.clone(),
        normalizer: norm,
        history,
        final_train_rel_l2,
    })
}

/// Incrementally written metrics CSV.
pub struct MetricsWriter {
    file: fs::File,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{METRICS_HEADER}")?;
        Ok(Self { file })
    }

    pub fn append(&mut self, record: &EpochRecord) -> Result<()> {
        writeln!(self.file, "{}", record.csv_row())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Parse a metrics CSV back into records.
pub fn read_metrics(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Format(format!(
            "{}: missing metrics header",
            path.display()
        )));
    }
    let bad = |l: &str| Error::Format(format!("bad metrics row `{l}`"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad(l));
            }
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad(l))?,
                train_rel_l2: f[1].parse().map_err(|_| bad(l))?,
                test_rel_l2: if f[2].is_empty() {
                    None
                } else {
                    Some(f[2].parse().map_err(|_| bad(l))?)
                },
                wall_clock_s: f[3].parse().map_err(|_| bad(l))?,
            })
        })
        .collect()
}

fn run_metadata(run: &TrainedModel, cfg: &TrainConfig, problem: ProblemKind) -> Metadata {
    let mut m = Metadata::default();
    for (k, v) in run.config.to_pairs() {
        m.push(k, v);
    }
    m.push("problem", problem);
    m.push("epochs", cfg.epochs);
    m.push("lr", cfg.lr);
    m.push("weight_decay", cfg.weight_decay);
    m.push("test_every", cfg.test_every);
    m.push("batch_size", cfg.batch_size);
    m.push("seed", cfg.seed);
    m.push(
        "lr_decay",
        cfg.lr_decay
            .map_or("none".to_string(), |d| format!("{}:{}", d.every, d.gamma)),
    );
    m.push("precision", cfg.precision);
    m.push("input_mean", run.normalizer.input_mean);
    m.push("input_std", run.normalizer.input_std);
    m.push("output_scale", run.normalizer.output_scale);
    m.push("final_train_rel_l2", run.final_train_rel_l2);
    m.push("threads", 1);
    m
}

/// Write `checkpoint.dpno` and `config.txt` into `dir`.
pub fn save_run(
    dir: &Path,
    run: &TrainedModel,
    cfg: &TrainConfig,
    problem: ProblemKind,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let named: Vec<(String, Tensor)> = run
        .store
        .iter()
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    write_checkpoint(&dir.join(CHECKPOINT_FILE), &named)?;
    run_metadata(run, cfg, problem).write(&dir.join(CONFIG_FILE))
}

/// A model restored from a run directory.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub model: Model,
    pub store: ParamStore,
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub problem: ProblemKind,
    pub metadata: Metadata,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let metadata = Metadata::read(&dir.join(CONFIG_FILE))?;
    let config = ModelConfig::from_pairs(metadata.pairs())?;
    let (model, mut store) = Model::build(&config, 0)?;
    store.load_from(&read_checkpoint(&dir.join(CHECKPOINT_FILE))?)?;
    let normalizer = Normalizer {
        input_mean: metadata.parse_value("input_mean")?,
        input_std: metadata.parse_value("input_std")?,
        output_scale: metadata.parse_value("output_scale")?,
    };
    Ok(LoadedRun {
        model,
        store,
        config,
        normalizer,
        problem: metadata.require("problem")?.parse()?,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{build_dataset, PdeProblemSpec};

    fn tiny_burgers() -> Dataset {
        let mut spec = PdeProblemSpec::new(ProblemKind::Burgers, 16);
        spec.solve_resolution = 64;
        spec.n_train = 6;
        spec.n_test = 2;
        build_dataset(&spec).unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 4,
            test_every: 2,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_decay_text() {
        let d: LrDecay = "100:0.5".parse().unwrap();
        assert_eq!(
            d,
            LrDecay {
                every: 100,
                gamma: 0.5
            }
        );
        assert!("100".parse::<LrDecay>().is_err());
        assert!("x:0.5".parse::<LrDecay>().is_err());
    }

    #[test]
    fn test_entries_follow_schedule() {
        let data = tiny_burgers();
        let mut mcfg = model_config(ModelKind::DpFno, &data, &ModelOverrides::default()).unwrap();
        mcfg.width = 4;
        mcfg.modes = vec![4];
        mcfg.project_hidden = 8;
        mcfg.merge_hidden = 8;
        let run = train(&tiny_cfg(), &mcfg, &data, |_| Ok(())).unwrap();
        let tests: Vec<bool> = run
            .history
            .iter()
            .map(|r| r.test_rel_l2.is_some())
            .collect();
        assert_eq!(tests, vec![false, true, false, true]);
        assert!(run.history.iter().all(|r| r.train_rel_l2.is_finite()));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.precision = Precision::F32;
        assert!(c.validate().is_err());
        c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        c = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn lr_decay_schedule() {
        let c = TrainConfig {
            lr_decay: Some(LrDecay {
                every: 10,
                gamma: 0.5,
            }),
            ..TrainConfig::default()
        };
        assert_eq!(c.lr_at(1), 1e-3);
        assert_eq!(c.lr_at(10), 1e-3);
        assert_eq!(c.lr_at(11), 5e-4);
    }

    #[test]
    fn deeponet_layout() {
        let data = tiny_burgers();
        let mcfg = model_config(ModelKind::DeepOnet, &data, &ModelOverrides::default()).unwrap();
        assert_eq!((mcfg.sensors, mcfg.query_dim), (16, 1));
        let norm = Normalizer::fit(&data.a_train, &data.u_train);
        let p = prepare(&mcfg, &data, &data.a_test, &data.u_test, &norm).unwrap();
        assert_eq!(p.inputs.shape(), &[2, 16]);
        assert_eq!(p.aux.shape(), &[16, 1]);
        assert_eq!(p.aux.data()[3], 3.0 / 16.0);
    }

    #[test]
    fn metrics_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        let rows = [
            EpochRecord {
                epoch: 1,
                train_rel_l2: 0.123456789,
                test_rel_l2: None,
                wall_clock_s: 0.5,
            },
            EpochRecord {
                epoch: 2,
                train_rel_l2: 0.1,
                test_rel_l2: Some(0.2),
                wall_clock_s: 1.0,
            },
        ];
        for r in &rows {
            w.append(r).unwrap();
        }
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }
}
