//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A [`Tape`] records every primitive application during the forward pass in
//! topological order; [`Tape::backward`] replays the nodes in reverse and
//! accumulates gradients into a [`ParameterStore`]. Tapes are eager and
//! short-lived: one tape per loss evaluation or per sampled trajectory.
//!
//! The primitive set (matrix multiply, add/sub/mul/div, concatenate, slice,
//! tanh, sigmoid, softplus, exp, log, sum/mean, scalar scale/shift) is exactly
//! what the recurrent encoders, latent heads, and decoder need.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

/// Identifier for a differentiable primitive, including any static attributes
/// (slice bounds, scalar constants).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Matmul,
    Add,
    Sub,
    Mul,
    Div,
    Concat,
    Slice { start: usize, len: usize },
    Tanh,
    Sigmoid,
    Softplus,
    Exp,
    Log,
    Sum,
    Mean,
    Scale(f64),
    AddScalar(f64),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Matmul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Concat => "concat",
            Primitive::Slice { .. } => "slice",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Softplus => "softplus",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::Scale(_) => "scale",
            Primitive::AddScalar(_) => "add_scalar",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Primitive,
    inputs: Vec<usize>,
    value: Tensor,
    /// Leaf nodes carry no op; marked by `inputs.is_empty()` plus this flag.
    leaf: bool,
}

/// Recorded computation graph. Single-writer: one forward/backward pass owns
/// it exclusively.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    /// Leaves bound to named parameters; gradients are harvested into the
    /// store on `backward`.
    params: RefCell<Vec<(usize, String)>>,
}

/// Handle to a tape node. Cheap to copy; only valid for the tape that
/// produced it.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

/// Per-node gradients produced by [`Tape::gradients`].
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`.
    pub fn wrt(&self, v: Var<'_>) -> &Tensor {
        &self.grads[v.id]
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// Record a constant leaf (no gradient flows out of it).
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        let id = self.push(Node {
            op: Primitive::Sum, // unused for leaves
            inputs: Vec::new(),
            value,
            leaf: true,
        });
        Var { tape: self, id }
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    pub fn vector(&self, data: Vec<f64>) -> Var<'_> {
        self.constant(Tensor::vector(data))
    }

    /// Record a leaf bound to a named parameter in `store`. Its gradient is
    /// accumulated into the store's gradient slot on `backward`.
    pub fn param(&self, store: &ParameterStore, name: &str) -> Result<Var<'_>> {
        let value = store
            .value(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?
            .clone();
        let id = self.push(Node {
            op: Primitive::Sum,
            inputs: Vec::new(),
            value,
            leaf: true,
        });
        self.params.borrow_mut().push((id, name.to_string()));
        Ok(Var { tape: self, id })
    }

    fn value_of(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    fn shape_of(&self, id: usize) -> Vec<usize> {
        self.nodes.borrow()[id].value.shape().to_vec()
    }

    fn shape_err(p: Primitive, message: String) -> Error {
        Error::Shape {
            primitive: p.name(),
            message,
        }
    }

    /// Apply a primitive to input vars, record the result, and return its
    /// handle. Shape violations produce an error naming the primitive.
    pub fn apply<'t>(&'t self, op: Primitive, inputs: &[Var<'t>]) -> Result<Var<'t>> {
        for v in inputs {
            if !std::ptr::eq(v.tape, self) {
                return Err(Self::shape_err(op, "input from a different tape".into()));
            }
        }
        let value = {
            let nodes = self.nodes.borrow();
            let vals: Vec<&Tensor> = inputs.iter().map(|v| &nodes[v.id].value).collect();
            forward(op, &vals)?
        };
        let id = self.push(Node {
            op,
            inputs: inputs.iter().map(|v| v.id).collect(),
            value,
            leaf: false,
        });
        Ok(Var { tape: self, id })
    }

    /// Gradients of a scalar `root` with respect to every node on the tape.
    pub fn gradients(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root_shape = nodes[root.id].value.shape();
        if !root_shape.is_empty() && nodes[root.id].value.len() != 1 {
            return Err(Error::NonScalarRoot(root_shape.to_vec()));
        }
        let mut grads: Vec<Tensor> = nodes.iter().map(|n| Tensor::zeros_like(&n.value)).collect();
        grads[root.id].data_mut()[0] = 1.0;

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if node.leaf || grads[id].data().iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            backward_step(node, &nodes, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    /// Run backward from a scalar root and accumulate parameter gradients
    /// into `store` (additively; non-parameter leaves are untouched).
    pub fn backward(&self, root: Var<'_>, store: &mut ParameterStore) -> Result<()> {
        let grads = self.gradients(root)?;
        for (id, name) in self.params.borrow().iter() {
            store.accumulate_grad(name, &grads.grads[*id])?;
        }
        Ok(())
    }
}

// Arithmetic methods deliberately mirror the usual tensor-library names
// (`add`, `mul`, …) rather than the operator traits: they can fail on shape
// mismatch and must return `Result`.
#[allow(clippy::should_implement_trait)]
impl<'t> Var<'t> {
    /// The tape this var lives on.
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.shape_of(self.id)
    }

    /// Value of a scalar node.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Matmul, &[self, rhs])
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Add, &[self, rhs])
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Sub, &[self, rhs])
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Mul, &[self, rhs])
    }

    pub fn div(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Div, &[self, rhs])
    }

    pub fn slice(self, start: usize, len: usize) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Slice { start, len }, &[self])
    }

    pub fn tanh(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Tanh, &[self])
            .expect("tanh is shape-free")
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Sigmoid, &[self])
            .expect("sigmoid is shape-free")
    }

    pub fn softplus(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Softplus, &[self])
            .expect("softplus is shape-free")
    }

    pub fn exp(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Exp, &[self])
            .expect("exp is shape-free")
    }

    /// Natural log; errors on non-positive entries.
    pub fn log(self) -> Result<Var<'t>> {
        self.tape.apply(Primitive::Log, &[self])
    }

    pub fn sum(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Sum, &[self])
            .expect("sum is shape-free")
    }

    pub fn mean(self) -> Var<'t> {
        self.tape
            .apply(Primitive::Mean, &[self])
            .expect("mean is shape-free")
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape
            .apply(Primitive::Scale(c), &[self])
            .expect("scale is shape-free")
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        self.tape
            .apply(Primitive::AddScalar(c), &[self])
            .expect("add_scalar is shape-free")
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

/// Concatenate rank-1 vars end to end.
pub fn concat<'t>(tape: &'t Tape, parts: &[Var<'t>]) -> Result<Var<'t>> {
    tape.apply(Primitive::Concat, parts)
}

fn forward(op: Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    let arity_err = |expected: usize| {
        Tape::shape_err(
            op,
            format!("expected {expected} inputs, got {}", inputs.len()),
        )
    };
    match op {
        Primitive::Matmul => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            matmul_forward(inputs[0], inputs[1])
        }
        Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(Tape::shape_err(
                    op,
                    format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape()),
                ));
            }
            let f: fn(f64, f64) -> f64 = match op {
                Primitive::Add => |x, y| x + y,
                Primitive::Sub => |x, y| x - y,
                Primitive::Mul => |x, y| x * y,
                _ => |x, y| x / y,
            };
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(a.shape().to_vec(), data)
        }
        Primitive::Concat => {
            if inputs.is_empty() {
                return Err(Tape::shape_err(op, "needs at least one input".into()));
            }
            let mut data = Vec::new();
            for t in inputs {
                if t.rank() != 1 {
                    return Err(Tape::shape_err(
                        op,
                        format!("only rank-1 inputs supported, got {:?}", t.shape()),
                    ));
                }
                data.extend_from_slice(t.data());
            }
            Ok(Tensor::vector(data))
        }
        Primitive::Slice { start, len } => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let t = inputs[0];
            if t.rank() != 1 || start + len > t.len() {
                return Err(Tape::shape_err(
                    op,
                    format!(
                        "range {}..{} out of bounds for shape {:?}",
                        start,
                        start + len,
                        t.shape()
                    ),
                ));
            }
            Ok(Tensor::vector(t.data()[start..start + len].to_vec()))
        }
        Primitive::Tanh => unary(inputs, op, f64::tanh),
        Primitive::Sigmoid => unary(inputs, op, sigmoid),
        Primitive::Softplus => unary(inputs, op, softplus),
        Primitive::Exp => unary(inputs, op, f64::exp),
        Primitive::Log => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            if inputs[0].data().iter().any(|&v| v <= 0.0) {
                return Err(Tape::shape_err(
                    op,
                    "input must be strictly positive".into(),
                ));
            }
            Ok(inputs[0].map(f64::ln))
        }
        Primitive::Sum => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            Ok(Tensor::scalar(inputs[0].data().iter().sum()))
        }
        Primitive::Mean => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let n = inputs[0].len() as f64;
            Ok(Tensor::scalar(inputs[0].data().iter().sum::<f64>() / n))
        }
        Primitive::Scale(c) => unary(inputs, op, move |x| c * x),
        Primitive::AddScalar(c) => unary(inputs, op, move |x| x + c),
    }
}

fn unary(inputs: &[&Tensor], op: Primitive, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    if inputs.len() != 1 {
        return Err(Tape::shape_err(
            op,
            format!("expected 1 input, got {}", inputs.len()),
        ));
    }
    Ok(inputs[0].map(f))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn matmul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    match (a.rank(), b.rank()) {
        (2, 2) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let (k2, n) = (b.shape()[0], b.shape()[1]);
            if k != k2 {
                return Err(Tape::shape_err(
                    Primitive::Matmul,
                    format!(
                        "inner dimensions differ: {:?} vs {:?}",
                        a.shape(),
                        b.shape()
                    ),
                ));
            }
            let mut out = vec![0.0; m * n];
            let (ad, bd) = (a.data(), b.data());
            for i in 0..m {
                for l in 0..k {
                    let ail = ad[i * k + l];
                    if ail == 0.0 {
                        continue;
                    }
                    let row = &bd[l * n..(l + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (o, &bv) in orow.iter_mut().zip(row) {
                        *o += ail * bv;
                    }
                }
            }
            Tensor::new(vec![m, n], out)
        }
        (2, 1) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            if k != b.len() {
                return Err(Tape::shape_err(
                    Primitive::Matmul,
                    format!("matrix {:?} times vector of length {}", a.shape(), b.len()),
                ));
            }
            let (ad, bd) = (a.data(), b.data());
            let out = (0..m)
                .map(|i| {
                    ad[i * k..(i + 1) * k]
                        .iter()
                        .zip(bd)
                        .map(|(&x, &y)| x * y)
                        .sum()
                })
                .collect();
            Ok(Tensor::vector(out))
        }
        _ => Err(Tape::shape_err(
            Primitive::Matmul,
            format!("unsupported ranks {:?} x {:?}", a.shape(), b.shape()),
        )),
    }
}

fn backward_step(node: &Node, nodes: &[Node], g: &Tensor, grads: &mut [Tensor]) {
    let input_val = |i: usize| &nodes[node.inputs[i]].value;
    match node.op {
        Primitive::Matmul => {
            let (a, b) = (input_val(0), input_val(1));
            match (a.rank(), b.rank()) {
                (2, 2) => {
                    let (m, k) = (a.shape()[0], a.shape()[1]);
                    let n = b.shape()[1];
                    let (ad, bd, gd) = (a.data(), b.data(), g.data());
                    {
                        let da = grads[node.inputs[0]].data_mut();
                        for i in 0..m {
                            for l in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += gd[i * n + j] * bd[l * n + j];
                                }
                                da[i * k + l] += acc;
                            }
                        }
                    }
                    let db = grads[node.inputs[1]].data_mut();
                    for l in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += ad[i * k + l] * gd[i * n + j];
                            }
                            db[l * n + j] += acc;
                        }
                    }
                }
                (2, 1) => {
                    let (m, k) = (a.shape()[0], a.shape()[1]);
                    let (ad, bd, gd) = (a.data(), b.data(), g.data());
                    {
                        let da = grads[node.inputs[0]].data_mut();
                        for i in 0..m {
                            let gi = gd[i];
                            if gi == 0.0 {
                                continue;
                            }
                            let drow = &mut da[i * k..(i + 1) * k];
                            for (d, &bv) in drow.iter_mut().zip(bd) {
                                *d += gi * bv;
                            }
                        }
                    }
                    let db = grads[node.inputs[1]].data_mut();
                    for i in 0..m {
                        let gi = gd[i];
                        if gi == 0.0 {
                            continue;
                        }
                        let arow = &ad[i * k..(i + 1) * k];
                        for (d, &av) in db.iter_mut().zip(arow) {
                            *d += gi * av;
                        }
                    }
                }
                _ => unreachable!("forward rejected other ranks"),
            }
        }
        Primitive::Add => {
            grads[node.inputs[0]].axpy(1.0, g);
            grads[node.inputs[1]].axpy(1.0, g);
        }
        Primitive::Sub => {
            grads[node.inputs[0]].axpy(1.0, g);
            grads[node.inputs[1]].axpy(-1.0, g);
        }
        Primitive::Mul => {
            let (a, b) = (input_val(0).clone(), input_val(1).clone());
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi * b.data()[i]
            });
            elementwise_accum(grads[node.inputs[1]].data_mut(), g, |i, gi| {
                gi * a.data()[i]
            });
        }
        Primitive::Div => {
            let (a, b) = (input_val(0).clone(), input_val(1).clone());
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi / b.data()[i]
            });
            elementwise_accum(grads[node.inputs[1]].data_mut(), g, |i, gi| {
                -gi * a.data()[i] / (b.data()[i] * b.data()[i])
            });
        }
        Primitive::Concat => {
            let mut offset = 0;
            for &inp in &node.inputs {
                let len = nodes[inp].value.len();
                let gd = g.data();
                let d = grads[inp].data_mut();
                for i in 0..len {
                    d[i] += gd[offset + i];
                }
                offset += len;
            }
        }
        Primitive::Slice { start, len } => {
            let gd = g.data();
            let d = grads[node.inputs[0]].data_mut();
            for i in 0..len {
                d[start + i] += gd[i];
            }
        }
        Primitive::Tanh => {
            let y = &node.value;
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi * (1.0 - y.data()[i] * y.data()[i])
            });
        }
        Primitive::Sigmoid => {
            let y = &node.value;
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi * y.data()[i] * (1.0 - y.data()[i])
            });
        }
        Primitive::Softplus => {
            let x = input_val(0).clone();
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi * sigmoid(x.data()[i])
            });
        }
        Primitive::Exp => {
            let y = &node.value;
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi * y.data()[i]
            });
        }
        Primitive::Log => {
            let x = input_val(0).clone();
            elementwise_accum(grads[node.inputs[0]].data_mut(), g, |i, gi| {
                gi / x.data()[i]
            });
        }
        Primitive::Sum => {
            let gi = g.item();
            for d in grads[node.inputs[0]].data_mut() {
                *d += gi;
            }
        }
        Primitive::Mean => {
            let n = nodes[node.inputs[0]].value.len() as f64;
            let gi = g.item() / n;
            for d in grads[node.inputs[0]].data_mut() {
                *d += gi;
            }
        }
        Primitive::Scale(c) => {
            grads[node.inputs[0]].axpy(c, g);
        }
        Primitive::AddScalar(_) => {
            grads[node.inputs[0]].axpy(1.0, g);
        }
    }
}

fn elementwise_accum(dst: &mut [f64], g: &Tensor, f: impl Fn(usize, f64) -> f64) {
    for (i, d) in dst.iter_mut().enumerate() {
        *d += f(i, g.data()[i]);
    }
}
