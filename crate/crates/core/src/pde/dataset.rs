use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::burgers::{burgers_default_dt, burgers_stable_dt, solve_burgers};
use super::darcy::solve_darcy;
use super::downsample_spatial;
use super::grf::{grf_sample, psi_threshold, GrfSpec};
use super::ns::{ns_default_dt, ns_forcing, solve_ns_vorticity};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::io::{check_overwrite, read_tensor, write_tensor, Metadata};

pub const TENSOR_FILES: [&str; 4] = ["a_train.dpno", "u_train.dpno", "a_test.dpno", "u_test.dpno"];
pub const METADATA_FILE: &str = "metadata.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Burgers,
    Darcy,
    NavierStokes,
}

impl ProblemKind {
    pub fn spatial_dims(self) -> usize {
        match self {
            ProblemKind::Burgers => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Burgers => "burgers",
            ProblemKind::Darcy => "darcy",
            ProblemKind::NavierStokes => "ns",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(ProblemKind::Burgers),
            "darcy" => Ok(ProblemKind::Darcy),
            "ns" | "navier-stokes" => Ok(ProblemKind::NavierStokes),
            other => Err(Error::InvalidConfig(format!(
                "unknown problem `{other}` (expected burgers, darcy, ns)"
            ))),
        }
    }
}

/// Everything that determines a dataset bundle's bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeProblemSpec {
    pub kind: ProblemKind,
    /// Viscosity (unused for Darcy).
    pub nu: f64,
    pub solve_resolution: usize,
    pub resolution: usize,
    /// Burgers: final time. NS: last snapshot time (inputs are the first
    /// half of the integer times, targets the second half).
    pub final_time: f64,
    /// Time step override; `None` uses the per-problem default.
    pub dt: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub base_seed: u64,
}

impl PdeProblemSpec {
    /// Desk-scale defaults at output resolution `resolution`: Burgers solved at
    /// `max(1024, resolution)`, Darcy at `2·resolution`, NS at `resolution`.
    pub fn new(kind: ProblemKind, resolution: usize) -> Self {
        let (nu, solve, final_time) = match kind {
            ProblemKind::Burgers => (0.01, resolution.max(1024), 1.0),
            ProblemKind::Darcy => (0.0, 2 * resolution, 0.0),
            ProblemKind::NavierStokes => (1e-3, resolution, 20.0),
        };
        Self {
            kind,
            nu,
            solve_resolution: solve,
            resolution,
            final_time,
            dt: None,
            n_train: 1000,
            n_test: 200,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for n in [self.resolution, self.solve_resolution] {
            if !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        if self.solve_resolution % self.resolution != 0 {
            return Err(Error::InvalidConfig(format!(
                "output resolution {} must divide solve resolution {}",
                self.resolution, self.solve_resolution
            )));
        }
        if self.kind != ProblemKind::Darcy && !(self.nu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "viscosity must be positive, got {}",
                self.nu
            )));
        }
        if self.kind == ProblemKind::Darcy && self.solve_resolution < 4 {
            return Err(Error::InvalidConfig(
                "darcy needs a solve resolution of at least 4".into(),
            ));
        }
        if self.kind == ProblemKind::NavierStokes {
            let t = self.final_time;
            if t.fract() != 0.0 || t < 2.0 || (t as usize) % 2 != 0 {
                return Err(Error::InvalidConfig(format!(
                    "navier-stokes final time must be an even integer ≥ 2, got {t}"
                )));
            }
        } else if self.kind == ProblemKind::Burgers && !(self.final_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig(
                "need at least one train and one test sample".into(),
            ));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.solve_resolution / self.resolution
    }

    /// Per-sample shape of `a` and `u`.
    pub fn sample_shape(&self) -> Vec<usize> {
        let s = self.resolution;
        match self.kind {
            ProblemKind::Burgers => vec![s],
            ProblemKind::Darcy => vec![s, s],
            ProblemKind::NavierStokes => vec![self.final_time as usize / 2, s, s],
        }
    }

    fn metadata(&self) -> Metadata {
        let mut m = Metadata::default();
        m.push("format", "dpno-bundle-1");
        m.push("problem", self.kind);
        m.push("n_train", self.n_train);
        m.push("n_test", self.n_test);
        m.push("resolution", self.resolution);
        m.push("solve_resolution", self.solve_resolution);
        m.push(
            "sample_shape",
            self.sample_shape()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        m.push("nu", self.nu);
        m.push("final_time", self.final_time);
        m.push(
            "dt",
            self.dt.map_or("default".to_string(), |d| d.to_string()),
        );
        m.push("base_seed", self.base_seed);
        m.push("threads", 1);
        m
    }
}

/// Draw and solve sample `index` (seed `base_seed + index`). Returns `(a, u)`
/// at the output resolution.
pub fn generate_sample(spec: &PdeProblemSpec, index: usize) -> Result<(Tensor, Tensor)> {
    let seed = spec.base_seed.wrapping_add(index as u64);
    let n = spec.solve_resolution;
    let r = spec.stride();
    let wrap = |e: Error| Error::Sample {
        index,
        source: Box::new(e),
    };
    match spec.kind {
        ProblemKind::Burgers => {
            let u0 = grf_sample(&GrfSpec::burgers(n), seed)?;
            let dt = spec
                .dt
                .unwrap_or_else(|| burgers_default_dt(n))
                .min(0.8 * burgers_stable_dt(u0.max_abs(), n));
            let u = solve_burgers(&u0, spec.nu, spec.final_time, dt).map_err(wrap)?;
            Ok((
                downsample_spatial(&u0, r, 1)?,
                downsample_spatial(&u, r, 1)?,
            ))
        }
        ProblemKind::Darcy => {
            let a = psi_threshold(&grf_sample(&GrfSpec::darcy(n), seed)?);
            let u = solve_darcy(&a, &Tensor::ones(&[n, n])).map_err(wrap)?;
            Ok((downsample_spatial(&a, r, 2)?, downsample_spatial(&u, r, 2)?))
        }
        ProblemKind::NavierStokes => {
            let mut w0 = grf_sample(&GrfSpec::navier_stokes(n), seed)?;
            let mean = w0.data().iter().sum::<f64>() / w0.numel() as f64;
            w0.data_mut().iter_mut().for_each(|v| *v -= mean);
            let last = spec.final_time as usize;
            let times: Vec<usize> = (1..=last).collect();
            let dt = spec.dt.unwrap_or_else(|| ns_default_dt(n));
            let run =
                solve_ns_vorticity(&w0, spec.nu, Some(&ns_forcing(n)), dt, &times).map_err(wrap)?;
            let w = downsample_spatial(&run.snapshots, r, 2)?;
            let half = last / 2;
            let per = w.numel() / last;
            let s = spec.resolution;
            let a = Tensor::new(&[half, s, s], w.data()[..half * per].to_vec())?;
            let u = Tensor::new(&[half, s, s], w.data()[half * per..].to_vec())?;
            Ok((a, u))
        }
    }
}

/// Input/target tensors of both splits plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub a_train: Tensor,
    pub u_train: Tensor,
    pub a_test: Tensor,
    pub u_test: Tensor,
    pub metadata: Metadata,
}

impl Dataset {
    pub fn problem(&self) -> Result<ProblemKind> {
        self.metadata.require("problem")?.parse()
    }

    pub fn n_train(&self) -> usize {
        self.a_train.shape()[0]
    }

    pub fn n_test(&self) -> usize {
        self.a_test.shape()[0]
    }
}

fn stack(samples: Vec<Tensor>, shape: &[usize]) -> Result<Tensor> {
    let mut full = vec![samples.len()];
    full.extend_from_slice(shape);
    Tensor::new(
        &full,
        samples.into_iter().flat_map(Tensor::into_data).collect(),
    )
}

/// Generate every sample: train indices `0..n_train`, then test indices.
pub fn build_dataset(spec: &PdeProblemSpec) -> Result<Dataset> {
    spec.validate()?;
    let shape = spec.sample_shape();
    let split = |range: std::ops::Range<usize>| -> Result<(Tensor, Tensor)> {
        let (mut a, mut u) = (Vec::new(), Vec::new());
        for i in range {
            let (ai, ui) = generate_sample(spec, i)?;
            a.push(ai);
            u.push(ui);
        }
        Ok((stack(a, &shape)?, stack(u, &shape)?))
    };
    let (a_train, u_train) = split(0..spec.n_train)?;
    let (a_test, u_test) = split(spec.n_train..spec.n_train + spec.n_test)?;
    Ok(Dataset {
        a_train,
        u_train,
        a_test,
        u_test,
        metadata: spec.metadata(),
    })
}

/// Write the four tensor files and `metadata.txt` into `dir`.
pub fn write_bundle(dir: &Path, data: &Dataset, force: bool) -> Result<()> {
    if dir.exists() && !force && fs::read_dir(dir)?.next().is_some() {
        return Err(Error::Exists {
            path: dir.display().to_string(),
        });
    }
    fs::create_dir_all(dir)?;
    let tensors = [&data.a_train, &data.u_train, &data.a_test, &data.u_test];
    for (name, t) in TENSOR_FILES.iter().zip(tensors) {
        let path = dir.join(name);
        check_overwrite(&path, force)?;
        write_tensor(&path, t)?;
    }
    data.metadata.write(&dir.join(METADATA_FILE))
}

pub fn read_bundle(dir: &Path) -> Result<Dataset> {
    let metadata = Metadata::read(&dir.join(METADATA_FILE))?;
    let [a_train, u_train, a_test, u_test] = TENSOR_FILES.map(|f| read_tensor(&dir.join(f)));
    let data = Dataset {
        a_train: a_train?,
        u_train: u_train?,
        a_test: a_test?,
        u_test: u_test?,
        metadata,
    };
    let n_train: usize = data.metadata.parse_value("n_train")?;
    let n_test: usize = data.metadata.parse_value("n_test")?;
    for (name, t, n) in [
        ("a_train", &data.a_train, n_train),
        ("u_train", &data.u_train, n_train),
        ("a_test", &data.a_test, n_test),
        ("u_test", &data.u_test, n_test),
    ] {
        if t.shape()[0] != n {
            return Err(Error::Format(format!(
                "{name} holds {} samples, metadata says {n}",
                t.shape()[0]
            )));
        }
    }
    if data.a_train.shape()[1..] != data.a_test.shape()[1..]
        || data.u_train.shape()[1..] != data.u_test.shape()[1..]
    {
        return Err(Error::Format("train and test sample shapes differ".into()));
    }
    data.problem()?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ProblemKind, res: usize) -> PdeProblemSpec {
        let mut spec = PdeProblemSpec::new(kind, res);
        spec.n_train = 2;
        spec.n_test = 1;
        spec.base_seed = 11;
        spec
    }

    #[test]
    fn burgers_shapes_and_order_independence() {
        let mut spec = small(ProblemKind::Burgers, 32);
        spec.solve_resolution = 128;
        let data = build_dataset(&spec).unwrap();
        assert_eq!(data.a_train.shape(), &[2, 32]);
        assert_eq!(data.u_test.shape(), &[1, 32]);
        // sample 2 is the first test sample, whatever order it is made in
        let (a2, u2) = generate_sample(&spec, 2).unwrap();
        assert_eq!(data.a_test.sample(0).data(), a2.data());
        assert_eq!(data.u_test.sample(0).data(), u2.data());
    }

    #[test]
    fn darcy_shapes() {
        let data = build_dataset(&small(ProblemKind::Darcy, 16)).unwrap();
        assert_eq!(data.a_train.shape(), &[2, 16, 16]);
        assert!(data.a_train.data().iter().all(|&v| v == 3.0 || v == 12.0));
        assert!(data.u_train.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ns_shapes() {
        let mut spec = small(ProblemKind::NavierStokes, 16);
        spec.final_time = 4.0;
        spec.n_train = 1;
        spec.dt = Some(0.01);
        let data = build_dataset(&spec).unwrap();
        assert_eq!(data.a_train.shape(), &[1, 2, 16, 16]);
        assert_eq!(data.u_test.shape(), &[1, 2, 16, 16]);
    }

    #[test]
    fn validation() {
        let mut spec = small(ProblemKind::Burgers, 65);
        assert!(matches!(spec.validate(), Err(Error::NotPowerOfTwo(65))));
        spec = small(ProblemKind::Burgers, 64);
        spec.solve_resolution = 32;
        assert!(spec.validate().is_err());
        spec = small(ProblemKind::NavierStokes, 16);
        spec.final_time = 3.0;
        assert!(spec.validate().is_err());
        assert!("heat".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn bundle_round_trip_and_overwrite_guard() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("b");
        let mut spec = small(ProblemKind::Burgers, 16);
        spec.solve_resolution = 64;
        let data = build_dataset(&spec).unwrap();
        write_bundle(&out, &data, false).unwrap();
        assert_eq!(read_bundle(&out).unwrap(), data);
        assert!(matches!(
            write_bundle(&out, &data, false),
            Err(Error::Exists { .. })
        ));
        write_bundle(&out, &data, true).unwrap();
    }
}
