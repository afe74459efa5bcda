//! Residual and densely connected paths of operator blocks, run in parallel
//! on the same input and merged by a pointwise network.
//!
//! ```text
//! residual: u_{k+1} = G_k(u_k) + u_k                 (K_r blocks, d_v → d_v)
//! dense:    v_{k+1} = G_k([v_0, v_1, …, v_k])        (K_d blocks, (k+1)·d_v → d_v)
//! merge:    M([u_{K_r}, v_0, …, v_{K_d}])   or   M([u_{K_r}, v_{K_d}])
//! ```

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::blocks::{combine, DeepOnetShape, FnoBlock, FnoShape, Lift, Project};
use crate::error::{Error, Result};
use crate::nn::{check_width, Block, Bound, Linear, Mlp, ParamId, ParamStore};

/// Which dense-path features the merge network sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MergeInput {
    /// `[u_{K_r}, v_0, …, v_{K_d}]`
    #[default]
    FullStack,
    /// `[u_{K_r}, v_{K_d}]`
    LastOnly,
}

impl MergeInput {
    pub fn width(self, d_v: usize, dense_blocks: usize) -> usize {
        match self {
            MergeInput::FullStack => d_v + (dense_blocks + 1) * d_v,
            MergeInput::LastOnly => 2 * d_v,
        }
    }
}

/// Block counts and merge layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPathShape {
    pub width: usize,
    pub res_blocks: usize,
    pub dense_blocks: usize,
    pub merge_hidden: usize,
    pub merge_input: MergeInput,
}

impl DualPathShape {
    /// Four residual blocks, three dense blocks, merge hidden width `2·d_v`.
    pub fn standard(width: usize) -> Self {
        Self {
            width,
            res_blocks: 4,
            dense_blocks: 3,
            merge_hidden: 2 * width,
            merge_input: MergeInput::FullStack,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DualPath<B> {
    pub res_blocks: Vec<B>,
    pub dense_blocks: Vec<B>,
    pub merge: Mlp,
    pub merge_input: MergeInput,
    width: usize,
}

impl<B: Block> DualPath<B> {
    /// `make_block(store, name, d_in, d_out)` builds one path block.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        shape: &DualPathShape,
        merge_out: usize,
        rng: &mut R,
        mut make_block: impl FnMut(&mut ParamStore, &str, usize, usize, &mut R) -> B,
    ) -> Result<Self> {
        let d_v = shape.width;
        let res_blocks = (0..shape.res_blocks)
            .map(|k| make_block(store, &format!("res{k}"), d_v, d_v, rng))
            .collect();
        let dense_blocks = (0..shape.dense_blocks)
            .map(|k| make_block(store, &format!("dense{k}"), (k + 1) * d_v, d_v, rng))
            .collect();
        let merge = Mlp::new(
            store,
            "merge",
            &[
                shape.merge_input.width(d_v, shape.dense_blocks),
                shape.merge_hidden,
                merge_out,
            ],
            false,
            rng,
        );
        let path = Self {
            res_blocks,
            dense_blocks,
            merge,
            merge_input: shape.merge_input,
            width: d_v,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Check the width law of both paths and the merge.
    pub fn validate(&self) -> Result<()> {
        let d_v = self.width;
        for (k, b) in self.res_blocks.iter().enumerate() {
            if b.d_in() != d_v || b.d_out() != d_v {
                return Err(Error::InvalidConfig(format!(
                    "residual block {k} maps {} → {}, expected {d_v} → {d_v}",
                    b.d_in(),
                    b.d_out()
                )));
            }
        }
        for (k, b) in self.dense_blocks.iter().enumerate() {
            if b.d_in() != (k + 1) * d_v || b.d_out() != d_v {
                return Err(Error::InvalidConfig(format!(
                    "dense block {k} maps {} → {}, expected {} → {d_v}",
                    b.d_in(),
                    b.d_out(),
                    (k + 1) * d_v
                )));
            }
        }
        let expected = self.merge_input.width(d_v, self.dense_blocks.len());
        if self.merge.d_in() != expected {
            return Err(Error::InvalidConfig(format!(
                "merge takes {} channels, expected {expected}",
                self.merge.d_in()
            )));
        }
        Ok(())
    }

    /// `u_{k+1} = G_k(u_k) + u_k`, returning `u_{K_r}`.
    pub fn res_path(&self, tape: &mut Tape, p: &Bound, u0: Var) -> Result<Var> {
        check_width("res_path", tape, u0, self.width)?;
        let mut u = u0;
        for block in &self.res_blocks {
            let g = block.forward(tape, p, u)?;
            u = tape.add(g, u)?;
        }
        Ok(u)
    }

    /// `v_{k+1} = G_k([v_0, …, v_k])`, returning the whole stack
    /// `[v_0, …, v_{K_d}]` concatenated on the channel axis.
    pub fn dense_path(&self, tape: &mut Tape, p: &Bound, v0: Var) -> Result<Var> {
        self.dense_features(tape, p, v0).map(|(stack, _)| stack)
    }

    fn dense_features(&self, tape: &mut Tape, p: &Bound, v0: Var) -> Result<(Var, Var)> {
        check_width("dense_path", tape, v0, self.width)?;
        let mut stack = v0;
        let mut last = v0;
        for block in &self.dense_blocks {
            last = block.forward(tape, p, stack)?;
            stack = tape.concat_channels(&[stack, last])?;
        }
        Ok((stack, last))
    }

    /// Run both paths from the same input and merge.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let u = self.res_path(tape, p, x)?;
        let (stack, last) = self.dense_features(tape, p, x)?;
        let merged_in = match self.merge_input {
            MergeInput::FullStack => tape.concat_channels(&[u, stack])?,
            MergeInput::LastOnly => tape.concat_channels(&[u, last])?,
        };
        self.merge.forward(tape, p, merged_in)
    }
}

/// Lift → dual path of Fourier layers (GeLU on every block) → project.
#[derive(Clone, Debug)]
pub struct DualPathFno {
    pub lift: Lift,
    pub paths: DualPath<FnoBlock>,
    pub project: Project,
}

impl DualPathFno {
    pub fn new(
        store: &mut ParamStore,
        fno: &FnoShape,
        shape: &DualPathShape,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if shape.width != fno.width {
            return Err(Error::InvalidConfig(format!(
                "path width {} differs from FNO width {}",
                shape.width, fno.width
            )));
        }
        let lift = Lift::new(store, fno.d_a, fno.coord_dim, fno.width, rng);
        let modes = fno.modes.clone();
        let paths = DualPath::new(
            store,
            shape,
            fno.width,
            rng,
            |store, name, d_in, d_out, rng| {
                FnoBlock::new(store, name, d_in, d_out, &modes, true, rng)
            },
        )?;
        let project = Project::new(store, fno.width, fno.project_hidden, fno.d_u, rng);
        Ok(Self {
            lift,
            paths,
            project,
        })
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, a: Var, coords: Var) -> Result<Var> {
        let a0 = self.lift.forward(tape, p, a, coords)?;
        let merged = self.paths.forward(tape, p, a0)?;
        self.project.forward(tape, p, merged)
    }
}

/// DeepONet whose trunk is a dual path of MLP blocks; the branch is a
/// single MLP as in the plain model.
#[derive(Clone, Debug)]
pub struct DualPathDeepOnet {
    pub branch: Mlp,
    pub embed: Linear,
    pub paths: DualPath<Mlp>,
    pub bias: Option<ParamId>,
}

impl DualPathDeepOnet {
    pub fn new(
        store: &mut ParamStore,
        net: &DeepOnetShape,
        shape: &DualPathShape,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let branch = Mlp::with_depth(
            store,
            "branch",
            net.sensors,
            net.hidden,
            net.depth,
            net.basis,
            false,
            rng,
        );
        let embed = Linear::new(store, "trunk.embed", net.query_dim, shape.width, true, rng);
        let (hidden, depth) = (net.hidden, net.depth);
        let paths = DualPath::new(
            store,
            shape,
            net.basis,
            rng,
            |store, name, d_in, d_out, rng| {
                Mlp::with_depth(
                    store,
                    &format!("trunk.{name}"),
                    d_in,
                    hidden,
                    depth,
                    d_out,
                    true,
                    rng,
                )
            },
        )?;
        let bias = net
            .output_bias
            .then(|| store.add("output.bias", crate::autodiff::Tensor::zeros(&[1])));
        Ok(Self {
            branch,
            embed,
            paths,
            bias,
        })
    }

    /// Basis values `[q, p]` at the query points.
    pub fn trunk(&self, tape: &mut Tape, p: &Bound, queries: Var) -> Result<Var> {
        let e = self.embed.forward(tape, p, queries)?;
        self.paths.forward(tape, p, e)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, sensors: Var, queries: Var) -> Result<Var> {
        let coeffs = self.branch.forward(tape, p, sensors)?;
        let basis = self.trunk(tape, p, queries)?;
        combine(tape, p, coeffs, basis, self.bias)
    }
}
