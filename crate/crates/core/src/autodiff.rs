//! Exact first and mixed second derivatives for the fixed MLP family.
//!
//! The network maps `x ∈ R^d` through affine layers with a shared hidden
//! activation to a scalar. Besides the value and the input gradient, training
//! needs `∂/∂φ` of directional input derivatives `vᵀ∇ₓg_φ(x)`. Both activations
//! supported here are piecewise linear, so their second derivative is zero
//! almost everywhere and the mixed derivative has a closed form:
//!
//! * forward: `z_l = W_l a_{l-1} + b_l`, tangent `ż_l = W_l ȧ_{l-1}`, with
//!   `a_l = σ(z_l)` and `ȧ_l = σ'(z_l) ⊙ ż_l`;
//! * backward: `δ_L = 1`, `δ_{l-1} = σ'(z_{l-1}) ⊙ W_lᵀ δ_l`;
//! * `∂g/∂W_l = δ_l a_{l-1}ᵀ`, `∂g/∂b_l = δ_l`, and for the directional
//!   derivative `∂D/∂W_l = δ_l ȧ_{l-1}ᵀ`, `∂D/∂b_l = 0`.
//!
//! Every routine works on a batch of probe rows at once so the heavy lifting
//! is matrix-matrix products.

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Identity,
}

impl Activation {
    /// Derivative of the activation at `z`. The kink of the leaky ReLU takes
    /// the positive-side slope.
    #[inline]
    pub fn slope(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        z * self.slope(z)
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::LeakyRelu => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::LeakyRelu),
            _ => None,
        }
    }
}

/// Position of one affine layer inside the flat parameter vector. Weights are
/// stored row-major as `fan_out × fan_in`, followed by `fan_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    layers: Vec<LayerShape>,
    activation: Activation,
}

impl ParamLayout {
    /// Layout for `input_dim → hidden[0] → … → 1`.
    pub fn new(input_dim: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if let Some(pos) = hidden.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("hidden layer {pos} has zero width")));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        let mut offset = 0;
        for &fan_out in hidden.iter().chain(std::iter::once(&1)) {
            let shape = LayerShape {
                fan_in,
                fan_out,
                offset,
            };
            offset += shape.len();
            layers.push(shape);
            fan_in = fan_out;
        }
        Ok(Self { layers, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.fan_out)
            .collect()
    }

    /// Total parameter count: `Σ fan_in·fan_out + fan_out`.
    pub fn len(&self) -> usize {
        self.layers.iter().map(LayerShape::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat surrogate parameters plus the layout that interprets them.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: ParamLayout,
}

impl ParamVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        check_dim("parameter vector", layout.len(), values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "parameter",
                stage: "parameter vector",
                index,
            });
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        let values = vec![0.0; layout.len()];
        Self { values, layout }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim()
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.layout.clone(), values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Hex SHA-256 of the little-endian parameter bytes.
    pub fn checksum(&self) -> String {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        crate::seed::hex_digest(&bytes)
    }

    fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let shape = self.layout.layers[layer];
        ArrayView2::from_shape(
            (shape.fan_out, shape.fan_in),
            &self.values[shape.weight_range()],
        )
        .expect("layout ranges match layer shapes")
    }

    fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let shape = self.layout.layers[layer];
        ArrayView1::from(&self.values[shape.bias_range()])
    }
}

/// Direction for a directional derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent(Vec<f64>);

impl Tangent {
    pub fn new(direction: Vec<f64>) -> Result<Self> {
        if let Some(index) = direction.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "tangent entry",
                stage: "tangent",
                index,
            });
        }
        Ok(Self(direction))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Forward pass over a batch of probe rows, retaining what the backward pass
/// needs.
#[derive(Debug)]
pub struct BatchEval {
    values: Array1<f64>,
    directional: Option<Array1<f64>>,
    /// Input to each layer (`a_{l-1}`), one entry per layer.
    inputs: Vec<Array2<f64>>,
    /// Tangent input to each layer (`ȧ_{l-1}`), when tangents were supplied.
    tangent_inputs: Vec<Option<Array2<f64>>>,
    /// `σ'(z_l)` for each hidden layer.
    slopes: Vec<Array2<f64>>,
}

/// Runs the network on every row of `points`. When `tangents` is given, row
/// `i` of it is the direction for the directional derivative at row `i`.
pub fn evaluate_batch(
    params: &ParamVector,
    points: ArrayView2<'_, f64>,
    tangents: Option<ArrayView2<'_, f64>>,
) -> Result<BatchEval> {
    let d = params.input_dim();
    check_dim("probe points", d, points.ncols())?;
    if let Some(t) = &tangents {
        check_dim("probe tangents", d, t.ncols())?;
        check_dim("probe tangent rows", points.nrows(), t.nrows())?;
    }

    let layers = params.layout.layers();
    let activation = params.layout.activation();
    let last = layers.len() - 1;

    let mut inputs = Vec::with_capacity(layers.len());
    let mut tangent_inputs = Vec::with_capacity(layers.len());
    let mut slopes = Vec::with_capacity(last);

    let mut a = points.to_owned();
    let mut t = tangents.map(|v| v.to_owned());
    for layer in 0..last {
        let w = params.weights(layer);
        let mut z = a.dot(&w.t());
        z += &params.bias(layer);
        let zt = t.as_ref().map(|t| t.dot(&w.t()));
        let slope = z.mapv(|v| activation.slope(v));
        z *= &slope;
        inputs.push(a);
        tangent_inputs.push(t);
        a = z;
        t = zt.map(|mut zt| {
            zt *= &slope;
            zt
        });
        slopes.push(slope);
    }

    let w = params.weights(last);
    let mut z = a.dot(&w.t());
    z += &params.bias(last);
    let directional = t.as_ref().map(|t| t.dot(&w.t()).column(0).to_owned());
    inputs.push(a);
    tangent_inputs.push(t);

    Ok(BatchEval {
        values: z.column(0).to_owned(),
        directional,
        inputs,
        tangent_inputs,
        slopes,
    })
}

impl BatchEval {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn directional(&self) -> Option<ArrayView1<'_, f64>> {
        self.directional.as_ref().map(|d| d.view())
    }

    /// `∇ₓ g_φ` for every row.
    pub fn input_gradients(&self, params: &ParamVector) -> Array2<f64> {
        let mut delta = Array2::ones((self.rows(), 1));
        for layer in (0..params.layout.layers().len()).rev() {
            delta = delta.dot(&params.weights(layer));
            if layer > 0 {
                delta *= &self.slopes[layer - 1];
            }
        }
        delta
    }

    /// Adds `Σ_i value_coef[i]·∂g(x_i)/∂φ + dir_coef[i]·∂D(x_i, v_i)/∂φ` into
    /// `grad`, which must have the parameter vector's length.
    pub fn accumulate_param_gradient(
        &self,
        params: &ParamVector,
        value_coef: ArrayView1<'_, f64>,
        dir_coef: Option<ArrayView1<'_, f64>>,
        grad: &mut [f64],
    ) -> Result<()> {
        check_dim("gradient buffer", params.len(), grad.len())?;
        check_dim("value coefficients", self.rows(), value_coef.len())?;
        if let Some(cd) = &dir_coef {
            check_dim("directional coefficients", self.rows(), cd.len())?;
            if self.directional.is_none() {
                return Err(Error::Config(
                    "directional coefficients supplied for a batch evaluated without tangents".into(),
                ));
            }
        }

        let layers = params.layout.layers();
        let cv = value_coef.insert_axis(Axis(1));
        let mut delta = Array2::ones((self.rows(), 1));
        for layer in (0..layers.len()).rev() {
            let shape = layers[layer];
            let mut mixed = &self.inputs[layer] * &cv;
            if let (Some(cd), Some(tin)) = (&dir_coef, &self.tangent_inputs[layer]) {
                mixed.zip_mut_with(&(tin * &cd.insert_axis(Axis(1))), |m, t| *m += t);
            }
            {
                let (head, tail) = grad.split_at_mut(shape.bias_range().start);
                let mut gw = ArrayViewMut2::from_shape(
                    (shape.fan_out, shape.fan_in),
                    &mut head[shape.weight_range()],
                )
                .expect("layout ranges match layer shapes");
                general_mat_mul(1.0, &delta.t(), &mixed, 1.0, &mut gw);
                let gb = delta.t().dot(&value_coef);
                for (dst, src) in tail[..shape.fan_out].iter_mut().zip(gb.iter()) {
                    *dst += src;
                }
            }
            if layer > 0 {
                delta = delta.dot(&params.weights(layer));
                delta *= &self.slopes[layer - 1];
            }
        }
        Ok(())
    }
}

fn single_row(x: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, x.len()), x).expect("a slice is one contiguous row")
}

/// `g_φ(x)`.
pub fn forward_value(params: &ParamVector, x: &[f64]) -> Result<f64> {
    Ok(evaluate_batch(params, single_row(x), None)?.values[0])
}

/// `∇ₓ g_φ(x)`, by backpropagation through the network.
pub fn input_gradient(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let eval = evaluate_batch(params, single_row(x), None)?;
    Ok(eval.input_gradients(params).row(0).to_vec())
}

/// `vᵀ ∇ₓ g_φ(x)` by a single forward-mode sweep.
pub fn directional_derivative(params: &ParamVector, x: &[f64], v: &Tangent) -> Result<f64> {
    check_dim("tangent", params.input_dim(), v.dim())?;
    let eval = evaluate_batch(params, single_row(x), Some(single_row(v.as_slice())))?;
    Ok(eval.directional.expect("tangents supplied")[0])
}

/// Handle to a node of a [`LossGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Node {
    Probe(usize),
    Const(f64),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Square(usize),
    Scale(usize, f64),
    Sum(Vec<usize>),
}

/// Builds scalar losses out of surrogate probes (`g_φ(x)` and `vᵀ∇g_φ(x)`)
/// combined with arithmetic, squares and sums. Anything else is rejected, since
/// [`loss_param_gradient`] only knows how to differentiate these.
#[derive(Clone, Debug)]
pub struct LossBuilder {
    dim: usize,
    points: Vec<f64>,
    tangents: Vec<f64>,
    directional: Vec<bool>,
    nodes: Vec<Node>,
}

#[derive(Clone, Debug)]
pub struct LossGraph {
    dim: usize,
    points: Array2<f64>,
    tangents: Array2<f64>,
    directional: Vec<bool>,
    nodes: Vec<Node>,
    output: usize,
}

impl LossBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            dim: input_dim,
            points: Vec::new(),
            tangents: Vec::new(),
            directional: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<usize> {
        if id.0 < self.nodes.len() {
            Ok(id.0)
        } else {
            Err(Error::Config(format!("node {} does not belong to this graph", id.0)))
        }
    }

    fn probe(&mut self, x: &[f64], v: Option<&Tangent>) -> Result<NodeId> {
        check_dim("loss probe point", self.dim, x.len())?;
        let row = self.directional.len();
        self.points.extend_from_slice(x);
        match v {
            Some(v) => {
                check_dim("loss probe tangent", self.dim, v.dim())?;
                self.tangents.extend_from_slice(v.as_slice());
            }
            None => self.tangents.extend(std::iter::repeat_n(0.0, self.dim)),
        }
        self.directional.push(v.is_some());
        Ok(self.push(Node::Probe(row)))
    }

    /// `g_φ(x)`.
    pub fn value(&mut self, x: &[f64]) -> Result<NodeId> {
        self.probe(x, None)
    }

    /// `vᵀ∇ₓ g_φ(x)`.
    pub fn directional(&mut self, x: &[f64], v: &Tangent) -> Result<NodeId> {
        self.probe(x, Some(v))
    }

    pub fn constant(&mut self, c: f64) -> NodeId {
        self.push(Node::Const(c))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(self.push(Node::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(self.push(Node::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(self.push(Node::Mul(a, b)))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let a = self.check(a)?;
        Ok(self.push(Node::Square(a)))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let a = self.check(a)?;
        Ok(self.push(Node::Scale(a, c)))
    }

    pub fn sum(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let terms = terms
            .iter()
            .map(|&t| self.check(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.push(Node::Sum(terms)))
    }

    /// Applies a unary primitive by name (`square`, `neg`).
    pub fn unary(&mut self, op: &str, a: NodeId) -> Result<NodeId> {
        let a = self.check(a)?;
        match op {
            "square" => Ok(self.push(Node::Square(a))),
            "neg" => Ok(self.push(Node::Neg(a))),
            other => Err(Error::UnsupportedPrimitive(other.to_string())),
        }
    }

    pub fn build(self, output: NodeId) -> Result<LossGraph> {
        let output = self.check(output)?;
        let rows = self.directional.len();
        let points = Array2::from_shape_vec((rows, self.dim), self.points)
            .expect("probe rows are appended with the graph dimension");
        let tangents = Array2::from_shape_vec((rows, self.dim), self.tangents)
            .expect("probe rows are appended with the graph dimension");
        Ok(LossGraph {
            dim: self.dim,
            points,
            tangents,
            directional: self.directional,
            nodes: self.nodes,
            output,
        })
    }
}

impl LossGraph {
    fn forward(&self, probes: &[f64]) -> Vec<f64> {
        let mut vals: Vec<f64> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match *node {
                Node::Probe(row) => probes[row],
                Node::Const(c) => c,
                Node::Add(a, b) => vals[a] + vals[b],
                Node::Sub(a, b) => vals[a] - vals[b],
                Node::Mul(a, b) => vals[a] * vals[b],
                Node::Neg(a) => -vals[a],
                Node::Square(a) => vals[a] * vals[a],
                Node::Scale(a, c) => c * vals[a],
                Node::Sum(ref terms) => terms.iter().map(|&t| vals[t]).sum(),
            };
            vals.push(v);
        }
        vals
    }

    /// Adjoint of the output with respect to every probe row.
    fn probe_adjoints(&self, vals: &[f64]) -> Vec<f64> {
        let mut adj = vec![0.0; self.nodes.len()];
        let mut probe_adj = vec![0.0; self.directional.len()];
        adj[self.output] = 1.0;
        for (i, node) in self.nodes.iter().enumerate().rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match *node {
                Node::Probe(row) => probe_adj[row] += g,
                Node::Const(_) => {}
                Node::Add(a, b) => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Node::Sub(a, b) => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Node::Mul(a, b) => {
                    adj[a] += g * vals[b];
                    adj[b] += g * vals[a];
                }
                Node::Neg(a) => adj[a] -= g,
                Node::Square(a) => adj[a] += 2.0 * vals[a] * g,
                Node::Scale(a, c) => adj[a] += c * g,
                Node::Sum(ref terms) => {
                    for &t in terms {
                        adj[t] += g;
                    }
                }
            }
        }
        probe_adj
    }

    pub fn probe_count(&self) -> usize {
        self.directional.len()
    }
}

/// Loss value and its exact gradient with respect to the parameters.
#[derive(Clone, Debug)]
pub struct LossGradient {
    pub loss: f64,
    pub gradient: ParamVector,
}

/// Evaluates `graph` at `params` and returns `∇_φ loss`, including the mixed
/// second-derivative contributions of directional probes.
pub fn loss_param_gradient(params: &ParamVector, graph: &LossGraph) -> Result<LossGradient> {
    check_dim("loss graph", params.input_dim(), graph.dim)?;
    let rows = graph.probe_count();
    let mut grad = vec![0.0; params.len()];
    let loss;
    if rows == 0 {
        loss = graph.forward(&[])[graph.output];
    } else {
        let eval = evaluate_batch(params, graph.points.view(), Some(graph.tangents.view()))?;
        let directional = eval.directional().expect("tangents supplied");
        let probes: Vec<f64> = (0..rows)
            .map(|r| {
                if graph.directional[r] {
                    directional[r]
                } else {
                    eval.values[r]
                }
            })
            .collect();
        let vals = graph.forward(&probes);
        loss = vals[graph.output];
        let adj = graph.probe_adjoints(&vals);
        let mut cv = Array1::zeros(rows);
        let mut cd = Array1::zeros(rows);
        for (r, &a) in adj.iter().enumerate() {
            if graph.directional[r] {
                cd[r] = a;
            } else {
                cv[r] = a;
            }
        }
        eval.accumulate_param_gradient(params, cv.view(), Some(cd.view()), &mut grad)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            quantity: "loss",
            stage: "loss graph",
            index: graph.output,
        });
    }
    Ok(LossGradient {
        loss,
        gradient: params.with_values(grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: &[f64], bias: f64) -> ParamVector {
        let layout = ParamLayout::new(a.len(), &[], Activation::Identity).unwrap();
        let mut values = a.to_vec();
        values.push(bias);
        ParamVector::new(layout, values).unwrap()
    }

    #[test]
    fn linear_layer_is_a_dot_product() {
        let p = linear(&[1.0, 2.0], 0.0);
        assert_eq!(forward_value(&p, &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(input_gradient(&p, &[-7.0, 0.5]).unwrap(), vec![1.0, 2.0]);
        let v = Tangent::new(vec![0.5, -1.0]).unwrap();
        assert_eq!(directional_derivative(&p, &[9.0, 9.0], &v).unwrap(), -1.5);
    }

    #[test]
    fn zero_params_give_zero() {
        let layout = ParamLayout::new(3, &[5, 4], Activation::LeakyRelu).unwrap();
        let p = ParamVector::zeros(layout);
        assert_eq!(forward_value(&p, &[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = linear(&[1.0, 2.0], 0.0);
        assert!(matches!(
            forward_value(&p, &[1.0]),
            Err(Error::Dimension { expected: 2, found: 1, .. })
        ));
        let v = Tangent::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(directional_derivative(&p, &[1.0, 1.0], &v).is_err());
    }

    #[test]
    fn zero_width_layer_rejected() {
        assert!(matches!(
            ParamLayout::new(2, &[4, 0], Activation::LeakyRelu),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn leaky_relu_kink_uses_positive_slope() {
        assert_eq!(Activation::LeakyRelu.slope(0.0), 1.0);
        assert_eq!(Activation::LeakyRelu.slope(-1e-300), LEAKY_RELU_SLOPE);
        assert_eq!(Activation::LeakyRelu.apply(-2.0), -0.02);
    }

    #[test]
    fn squared_residual_gradient_on_linear_model() {
        let a = [0.3, -1.2, 2.0];
        let x = [1.0, 2.0, -0.5];
        let z = 4.0;
        let p = linear(&a, 0.25);
        let mut b = LossBuilder::new(3);
        let g = b.value(&x).unwrap();
        let target = b.constant(z);
        let r = b.sub(g, target).unwrap();
        let out = b.square(r).unwrap();
        let graph = b.build(out).unwrap();
        let lg = loss_param_gradient(&p, &graph).unwrap();
        let pred: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + 0.25;
        for j in 0..3 {
            let expected = 2.0 * (pred - z) * x[j];
            assert!((lg.gradient.values()[j] - expected).abs() < 1e-12);
        }
        assert!((lg.gradient.values()[3] - 2.0 * (pred - z)).abs() < 1e-12);
    }

    #[test]
    fn zero_tangent_has_zero_param_gradient() {
        let layout = ParamLayout::new(2, &[3], Activation::LeakyRelu).unwrap();
        let values = (0..layout.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = ParamVector::new(layout, values).unwrap();
        let mut b = LossBuilder::new(2);
        let d = b.directional(&[0.4, -0.1], &Tangent::zeros(2)).unwrap();
        let graph = b.build(d).unwrap();
        let lg = loss_param_gradient(&p, &graph).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.gradient.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unsupported_primitive_rejected() {
        let mut b = LossBuilder::new(1);
        let v = b.value(&[1.0]).unwrap();
        assert!(matches!(b.unary("exp", v), Err(Error::UnsupportedPrimitive(op)) if op == "exp"));
        assert!(b.unary("neg", v).is_ok());
    }

    #[test]
    fn foreign_node_rejected() {
        let mut b = LossBuilder::new(1);
        assert!(b.square(NodeId(3)).is_err());
    }

    #[test]
    fn non_finite_params_rejected() {
        let layout = ParamLayout::new(1, &[], Activation::Identity).unwrap();
        assert!(ParamVector::new(layout, vec![f64::NAN, 0.0]).is_err());
    }
}
