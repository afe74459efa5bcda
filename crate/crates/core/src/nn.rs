//! Parameter storage and the pointwise layers shared by every model.

use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered, named collection of learnable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = &mut self.tensors[id.0];
        if slot.shape() != value.shape() {
            return Err(Error::shape("set parameter", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Replace every tensor with the same-named entry of `other`.
    pub fn load_from(&mut self, named: &[(String, Tensor)]) -> Result<()> {
        if named.len() != self.len() {
            return Err(Error::Format(format!(
                "expected {} parameter tensors, found {}",
                self.len(),
                named.len()
            )));
        }
        for (i, (name, t)) in named.iter().enumerate() {
            if *name != self.names[i] {
                return Err(Error::Format(format!(
                    "parameter {i}: expected `{}`, found `{name}`",
                    self.names[i]
                )));
            }
            self.set(ParamId(i), t.clone())?;
        }
        Ok(())
    }

    /// Record every parameter on `tape` as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(
            self.tensors
                .iter()
                .map(|t| tape.leaf(t.clone().with_grad()))
                .collect(),
        )
    }

    /// Record every parameter as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(
            self.tensors
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
        )
    }
}

/// Parameters of a [`ParamStore`] recorded on one tape.
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

/// Anything that maps `[..., d_in]` features to `[..., d_out]` pointwise or
/// across the spatial grid.
pub trait Block {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;
    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var>;
}

pub(crate) fn check_width(op: &'static str, tape: &Tape, x: Var, expected: usize) -> Result<()> {
    let shape = tape.shape(x);
    if shape.last() != Some(&expected) {
        return Err(Error::shape(op, shape, &[expected]));
    }
    Ok(())
}

/// Affine map on the trailing axis: `x·W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    d_in: usize,
    d_out: usize,
}

impl Linear {
    /// Weights and bias uniform in `±1/√d_in`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::uniform(&[d_in, d_out], bound, rng),
        );
        let bias = bias.then(|| {
            store.add(
                format!("{name}.bias"),
                Tensor::uniform(&[d_out], bound, rng),
            )
        });
        Self {
            weight,
            bias,
            d_in,
            d_out,
        }
    }
}

impl Block for Linear {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        check_width("linear", tape, x, self.d_in)?;
        let y = tape.matmul(x, p.var(self.weight))?;
        match self.bias {
            Some(b) => tape.bias_add(y, p.var(b)),
            None => Ok(y),
        }
    }
}

/// Affine layers with GeLU between them and, optionally, after the last.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub final_activation: bool,
}

impl Mlp {
    /// `widths = [d_in, hidden..., d_out]`, one affine layer per adjacent pair.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        final_activation: bool,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect();
        Self {
            layers,
            final_activation,
        }
    }

    /// `depth` affine layers `d_in → hidden → … → hidden → d_out`.
    pub fn with_depth(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        hidden: usize,
        depth: usize,
        d_out: usize,
        final_activation: bool,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(depth >= 1);
        let mut widths = vec![d_in];
        widths.extend(std::iter::repeat_n(hidden, depth - 1));
        widths.push(d_out);
        Self::new(store, name, &widths, final_activation, rng)
    }
}

impl Block for Mlp {
    fn d_in(&self) -> usize {
        self.layers[0].d_in
    }

    fn d_out(&self) -> usize {
        self.layers.last().unwrap().d_out
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, p, h)?;
            if i < last || self.final_activation {
                h = tape.gelu(h)?;
            }
        }
        Ok(h)
    }
}
