use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::blocks::{DeepOnet, DeepOnetShape, FnoShape, StackedFno};
use crate::dual_path::{DualPathDeepOnet, DualPathFno, DualPathShape, MergeInput};
use crate::error::{Error, Result};
use crate::nn::{Bound, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Fno,
    DeepOnet,
    DpFno,
    DpDeepOnet,
}

impl ModelKind {
    pub fn is_fno(self) -> bool {
        matches!(self, ModelKind::Fno | ModelKind::DpFno)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Fno => "fno",
            ModelKind::DeepOnet => "deeponet",
            ModelKind::DpFno => "dp-fno",
            ModelKind::DpDeepOnet => "dp-deeponet",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fno" => Ok(ModelKind::Fno),
            "deeponet" => Ok(ModelKind::DeepOnet),
            "dp-fno" => Ok(ModelKind::DpFno),
            "dp-deeponet" => Ok(ModelKind::DpDeepOnet),
            other => Err(Error::InvalidConfig(format!(
                "unknown model `{other}` (expected fno, deeponet, dp-fno, dp-deeponet)"
            ))),
        }
    }
}

impl FromStr for MergeInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MergeInput::FullStack),
            "last" => Ok(MergeInput::LastOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown merge input `{other}` (expected full or last)"
            ))),
        }
    }
}

impl fmt::Display for MergeInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeInput::FullStack => "full",
            MergeInput::LastOnly => "last",
        })
    }
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// FNO input/output channels.
    pub in_channels: usize,
    pub out_channels: usize,
    /// FNO coordinate dimension (number of spatial axes).
    pub coord_dim: usize,
    /// FNO width `d_v`.
    pub width: usize,
    pub modes: Vec<usize>,
    /// Blocks of the plain stacked FNO.
    pub fno_blocks: usize,
    pub res_blocks: usize,
    pub dense_blocks: usize,
    pub merge_hidden: usize,
    pub merge_input: MergeInput,
    pub project_hidden: usize,
    /// DeepONet sensor count `m` and query dimension.
    pub sensors: usize,
    pub query_dim: usize,
    pub mlp_hidden: usize,
    pub mlp_depth: usize,
    /// DeepONet basis count `p`.
    pub basis: usize,
    /// Width of the dual-path trunk's embedding.
    pub trunk_width: usize,
    pub output_bias: bool,
}

impl ModelConfig {
    /// Defaults for the given model kind; problem-specific fields
    /// (channels, modes, sensors, queries) still need filling in.
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            in_channels: 1,
            out_channels: 1,
            coord_dim: 1,
            width: 32,
            modes: vec![16],
            fno_blocks: 4,
            res_blocks: 4,
            dense_blocks: 3,
            merge_hidden: 64,
            merge_input: MergeInput::FullStack,
            project_hidden: crate::blocks::PROJECT_HIDDEN,
            sensors: 1,
            query_dim: 1,
            mlp_hidden: 128,
            mlp_depth: 4,
            basis: 128,
            trunk_width: 128,
            output_bias: false,
        }
    }

    fn fno_shape(&self) -> FnoShape {
        FnoShape {
            d_a: self.in_channels,
            d_u: self.out_channels,
            coord_dim: self.coord_dim,
            width: self.width,
            modes: self.modes.clone(),
            project_hidden: self.project_hidden,
        }
    }

    fn deeponet_shape(&self) -> DeepOnetShape {
        DeepOnetShape {
            sensors: self.sensors,
            query_dim: self.query_dim,
            hidden: self.mlp_hidden,
            depth: self.mlp_depth,
            basis: self.basis,
            output_bias: self.output_bias,
        }
    }

    fn path_shape(&self, width: usize) -> DualPathShape {
        DualPathShape {
            width,
            res_blocks: self.res_blocks,
            dense_blocks: self.dense_blocks,
            merge_hidden: self.merge_hidden,
            merge_input: self.merge_input,
        }
    }

    /// Key/value pairs, in a fixed order, for config echoes.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let modes = self
            .modes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("model", self.kind.to_string()),
            ("in_channels", self.in_channels.to_string()),
            ("out_channels", self.out_channels.to_string()),
            ("coord_dim", self.coord_dim.to_string()),
            ("width", self.width.to_string()),
            ("modes", modes),
            ("fno_blocks", self.fno_blocks.to_string()),
            ("res_blocks", self.res_blocks.to_string()),
            ("dense_blocks", self.dense_blocks.to_string()),
            ("merge_hidden", self.merge_hidden.to_string()),
            ("merge_input", self.merge_input.to_string()),
            ("project_hidden", self.project_hidden.to_string()),
            ("sensors", self.sensors.to_string()),
            ("query_dim", self.query_dim.to_string()),
            ("mlp_hidden", self.mlp_hidden.to_string()),
            ("mlp_depth", self.mlp_depth.to_string()),
            ("basis", self.basis.to_string()),
            ("trunk_width", self.trunk_width.to_string()),
            ("output_bias", self.output_bias.to_string()),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg: Option<ModelConfig> = None;
        let mut rest = Vec::new();
        for (k, v) in pairs {
            if k == "model" {
                cfg = Some(ModelConfig::new(v.parse()?));
            } else {
                rest.push((k, v));
            }
        }
        let mut cfg = cfg.ok_or_else(|| Error::Format("config echo lacks `model`".into()))?;
        fn num(k: &str, v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Format(format!("`{k}`: expected an integer, got `{v}`")))
        }
        for (k, v) in rest {
            match k {
                "in_channels" => cfg.in_channels = num(k, v)?,
                "out_channels" => cfg.out_channels = num(k, v)?,
                "coord_dim" => cfg.coord_dim = num(k, v)?,
                "width" => cfg.width = num(k, v)?,
                "modes" => {
                    cfg.modes = v.split(',').map(|m| num(k, m)).collect::<Result<_>>()?;
                }
                "fno_blocks" => cfg.fno_blocks = num(k, v)?,
                "res_blocks" => cfg.res_blocks = num(k, v)?,
                "dense_blocks" => cfg.dense_blocks = num(k, v)?,
                "merge_hidden" => cfg.merge_hidden = num(k, v)?,
                "merge_input" => cfg.merge_input = v.parse()?,
                "project_hidden" => cfg.project_hidden = num(k, v)?,
                "sensors" => cfg.sensors = num(k, v)?,
                "query_dim" => cfg.query_dim = num(k, v)?,
                "mlp_hidden" => cfg.mlp_hidden = num(k, v)?,
                "mlp_depth" => cfg.mlp_depth = num(k, v)?,
                "basis" => cfg.basis = num(k, v)?,
                "trunk_width" => cfg.trunk_width = num(k, v)?,
                "output_bias" => {
                    cfg.output_bias = v
                        .parse()
                        .map_err(|_| Error::Format(format!("`{k}`: expected a bool, got `{v}`")))?
                }
                _ => {}
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub enum Model {
    Fno(StackedFno),
    DeepOnet(DeepOnet),
    DpFno(DualPathFno),
    DpDeepOnet(DualPathDeepOnet),
}

impl Model {
    /// Build the model and its freshly initialized parameters.
    pub fn build(cfg: &ModelConfig, seed: u64) -> Result<(Model, ParamStore)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let model = match cfg.kind {
            ModelKind::Fno => Model::Fno(StackedFno::new(
                &mut store,
                &cfg.fno_shape(),
                cfg.fno_blocks,
                &mut rng,
            )),
            ModelKind::DpFno => Model::DpFno(DualPathFno::new(
                &mut store,
                &cfg.fno_shape(),
                &cfg.path_shape(cfg.width),
                &mut rng,
            )?),
            ModelKind::DeepOnet => {
                Model::DeepOnet(DeepOnet::new(&mut store, &cfg.deeponet_shape(), &mut rng))
            }
            ModelKind::DpDeepOnet => Model::DpDeepOnet(DualPathDeepOnet::new(
                &mut store,
                &cfg.deeponet_shape(),
                &cfg.path_shape(cfg.trunk_width),
                &mut rng,
            )?),
        };
        Ok((model, store))
    }

    /// FNO models: `input = [batch, grid..., d_a]`, `aux = [grid..., d]` coordinates.
    /// DeepONet models: `input = [batch, m]` sensors, `aux = [q, d]` queries.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, input: Var, aux: Var) -> Result<Var> {
        match self {
            Model::Fno(m) => m.forward(tape, p, input, aux),
            Model::DpFno(m) => m.forward(tape, p, input, aux),
            Model::DeepOnet(m) => m.forward(tape, p, input, aux),
            Model::DpDeepOnet(m) => m.forward(tape, p, input, aux),
        }
    }
}
