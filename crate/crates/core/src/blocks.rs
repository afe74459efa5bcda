//! The two base operator families: Fourier layers with lifting and
//! projection, and DeepONet's branch/trunk product.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{check_width, Block, Bound, Linear, Mlp, ParamId, ParamStore};
use crate::spectral::{init_spectral_weights, spectral_conv_on, weight_mode_shape};

/// Hidden width of the projection `Q`.
pub const PROJECT_HIDDEN: usize = 128;

/// `P`: append the grid coordinates to the input channels, then an affine
/// map to the working width.
#[derive(Clone, Debug)]
pub struct Lift {
    pub linear: Linear,
    pub d_a: usize,
    pub coord_dim: usize,
}

impl Lift {
    pub fn new(
        store: &mut ParamStore,
        d_a: usize,
        coord_dim: usize,
        d_v: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            linear: Linear::new(store, "lift", d_a + coord_dim, d_v, true, rng),
            d_a,
            coord_dim,
        }
    }

    pub fn d_v(&self) -> usize {
        self.linear.d_out()
    }

    /// `a: [batch, grid..., d_a]`, `coords: [grid..., d]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, a: Var, coords: Var) -> Result<Var> {
        check_width("lift", tape, a, self.d_a)?;
        let (sa, sc) = (tape.shape(a).to_vec(), tape.shape(coords).to_vec());
        if sc.len() + 1 != sa.len()
            || sc[..sc.len() - 1] != sa[1..sa.len() - 1]
            || sc[sc.len() - 1] != self.coord_dim
        {
            return Err(Error::shape("lift", &sa, &sc));
        }
        let tiled = tape.tile_batch(coords, sa[0])?;
        let joined = tape.concat_channels(&[a, tiled])?;
        self.linear.forward(tape, p, joined)
    }
}

/// `Q`: pointwise `d_v → hidden → d_u` with GeLU between the layers.
#[derive(Clone, Debug)]
pub struct Project {
    pub mlp: Mlp,
}

impl Project {
    pub fn new(
        store: &mut ParamStore,
        d_v: usize,
        hidden: usize,
        d_u: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            mlp: Mlp::new(store, "project", &[d_v, hidden, d_u], false, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        self.mlp.forward(tape, p, x)
    }
}

/// One Fourier layer: `σ(x·W + b + K(x))` where `K` is the spectral
/// convolution over the retained modes.
#[derive(Clone, Debug)]
pub struct FnoBlock {
    pub spectral: ParamId,
    pub linear: Linear,
    pub modes: Vec<usize>,
    pub activation: bool,
}

impl FnoBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        modes: &[usize],
        activation: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let spectral = store.add(
            format!("{name}.spectral"),
            init_spectral_weights(&weight_mode_shape(modes), d_in, d_out, rng),
        );
        let linear = Linear::new(store, &format!("{name}.pointwise"), d_in, d_out, true, rng);
        Self {
            spectral,
            linear,
            modes: modes.to_vec(),
            activation,
        }
    }
}

impl Block for FnoBlock {
    fn d_in(&self) -> usize {
        self.linear.d_in()
    }

    fn d_out(&self) -> usize {
        self.linear.d_out()
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        check_width("fno_block", tape, x, self.d_in())?;
        let local = self.linear.forward(tape, p, x)?;
        let global = spectral_conv_on(tape, x, p.var(self.spectral), &self.modes)?;
        let sum = tape.add(local, global)?;
        if self.activation {
            tape.gelu(sum)
        } else {
            Ok(sum)
        }
    }
}

/// Shape of an FNO: input/output channels, coordinate dimension, width,
/// retained modes per spatial axis.
#[derive(Clone, Debug, PartialEq)]
pub struct FnoShape {
    pub d_a: usize,
    pub d_u: usize,
    pub coord_dim: usize,
    pub width: usize,
    pub modes: Vec<usize>,
    pub project_hidden: usize,
}

/// Lift, a chain of Fourier layers (GeLU on all but the last), project.
#[derive(Clone, Debug)]
pub struct StackedFno {
    pub lift: Lift,
    pub blocks: Vec<FnoBlock>,
    pub project: Project,
}

impl StackedFno {
    pub fn new(store: &mut ParamStore, shape: &FnoShape, depth: usize, rng: &mut impl Rng) -> Self {
        let lift = Lift::new(store, shape.d_a, shape.coord_dim, shape.width, rng);
        let blocks = (0..depth)
            .map(|i| {
                FnoBlock::new(
                    store,
                    &format!("block{i}"),
                    shape.width,
                    shape.width,
                    &shape.modes,
                    i + 1 < depth,
                    rng,
                )
            })
            .collect();
        let project = Project::new(store, shape.width, shape.project_hidden, shape.d_u, rng);
        Self {
            lift,
            blocks,
            project,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, a: Var, coords: Var) -> Result<Var> {
        let mut h = self.lift.forward(tape, p, a, coords)?;
        for block in &self.blocks {
            h = block.forward(tape, p, h)?;
        }
        self.project.forward(tape, p, h)
    }
}

/// `G(a)(y) = Σ_k branch(a)_k · trunk(y)_k`.
#[derive(Clone, Debug)]
pub struct DeepOnet {
    pub branch: Mlp,
    pub trunk: Mlp,
    pub bias: Option<ParamId>,
}

/// Shape of a DeepONet.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepOnetShape {
    pub sensors: usize,
    pub query_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub basis: usize,
    pub output_bias: bool,
}

impl DeepOnet {
    /// Branch ends in a plain affine layer (it holds the combination
    /// coefficients); trunk ends in GeLU.
    pub fn new(store: &mut ParamStore, shape: &DeepOnetShape, rng: &mut impl Rng) -> Self {
        let branch = Mlp::with_depth(
            store,
            "branch",
            shape.sensors,
            shape.hidden,
            shape.depth,
            shape.basis,
            false,
            rng,
        );
        let trunk = Mlp::with_depth(
            store,
            "trunk",
            shape.query_dim,
            shape.hidden,
            shape.depth,
            shape.basis,
            true,
            rng,
        );
        let bias = shape
            .output_bias
            .then(|| store.add("output.bias", crate::autodiff::Tensor::zeros(&[1])));
        Self {
            branch,
            trunk,
            bias,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, sensors: Var, queries: Var) -> Result<Var> {
        let coeffs = self.branch.forward(tape, p, sensors)?;
        let basis = self.trunk.forward(tape, p, queries)?;
        combine(tape, p, coeffs, basis, self.bias)
    }
}

/// `[B, p] × [q, p]ᵀ → [B, q]`, plus an optional scalar bias.
pub(crate) fn combine(
    tape: &mut Tape,
    p: &Bound,
    coeffs: Var,
    basis: Var,
    bias: Option<ParamId>,
) -> Result<Var> {
    let (sc, sb) = (tape.shape(coeffs).to_vec(), tape.shape(basis).to_vec());
    if sc.len() != 2 || sb.len() != 2 || sc[1] != sb[1] {
        return Err(Error::shape("deeponet combine", &sc, &sb));
    }
    let basis_t = tape.transpose(basis)?;
    let out = tape.matmul(coeffs, basis_t)?;
    match bias {
        Some(b) => {
            let (batch, q) = (sc[0], sb[0]);
            let flat = tape.reshape(out, &[batch * q, 1])?;
            let shifted = tape.bias_add(flat, p.var(b))?;
            tape.reshape(shifted, &[batch, q])
        }
        None => Ok(out),
    }
}
