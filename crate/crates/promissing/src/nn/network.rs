//! Network DAGs: inputs, weighted layers, concatenation, dropout, and loss
//! heads, with forward evaluation and hand-coded backpropagation.
//!
//! Nodes are stored in topological order by construction (a node may only
//! reference already-added nodes). All parameters live in one flat vector;
//! each layer node owns a contiguous range laid out as row-major weights,
//! then biases, then (for compensated layers) the compensatory weights.

use std::ops::Range;

use ndarray::Array2;
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{
    backward_dense, backward_nan_dense, forward_dense, forward_nan_dense, LayerKind, Mode,
    NeutralizerMatrix,
};
use super::transfer::Transfer;
use super::NnError;
use crate::masked::MaskedMatrix;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Binary cross-entropy against a single sigmoid output.
    Bce,
    /// Categorical cross-entropy against a softmax distribution.
    Cce,
    /// Mean squared error against a single real output.
    Mse,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Cce => "cce",
            LossKind::Mse => "mse",
        }
    }

    pub fn from_name(name: &str) -> Option<LossKind> {
        Some(match name {
            "bce" => LossKind::Bce,
            "cce" => LossKind::Cce,
            "mse" => LossKind::Mse,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Input { width: usize },
    Layer { kind: LayerKind, units: usize, transfer: Transfer },
    Concat,
    Dropout { rate: f64 },
    LossHead { loss: LossKind, weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub inputs: Vec<NodeId>,
}

/// First-layer variant a preset is built with. `Dense` is the baseline that
/// requires imputed inputs; the other two accept masks directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstLayer {
    Dense,
    Promissing,
    MPromissing,
}

impl FirstLayer {
    fn layer_kind(self) -> LayerKind {
        match self {
            FirstLayer::Dense => LayerKind::Dense,
            FirstLayer::Promissing => LayerKind::NanDense(Mode::Promissing),
            FirstLayer::MPromissing => LayerKind::NanDense(Mode::MPromissing),
        }
    }
}

/// Dropout behavior of one forward pass. `Seeded` draws the same cell masks
/// for the same seed, which lets finite-difference probes hold them fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Disabled,
    Seeded(u64),
}

#[derive(Debug, Clone)]
pub(crate) enum Value {
    Dense(Array2<f64>),
    Masked(MaskedMatrix),
}

impl Value {
    pub(crate) fn n_rows(&self) -> usize {
        match self {
            Value::Dense(a) => a.nrows(),
            Value::Masked(m) => m.n_rows(),
        }
    }

    fn has_missing(&self) -> bool {
        match self {
            Value::Dense(_) => false,
            Value::Masked(m) => m.has_missing(),
        }
    }

    /// The raw value array; only meaningful when nothing is missing.
    fn dense(&self) -> &Array2<f64> {
        match self {
            Value::Dense(a) => a,
            Value::Masked(m) => m.values(),
        }
    }
}

pub(crate) struct ForwardPass {
    pub(crate) values: Vec<Value>,
    /// Per dropout node, the multiplier applied to every cell.
    scales: Vec<Option<Array2<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    widths: Vec<usize>,
    param_ranges: Vec<Range<usize>>,
    params: Vec<f64>,
    input_nodes: Vec<NodeId>,
    output_node: NodeId,
}

/// Incrementally assembles a network. Nodes may only reference nodes that
/// already exist, so the result is topologically ordered and acyclic.
#[derive(Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    widths: Vec<usize>,
    output: Option<NodeId>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: NodeKind, inputs: Vec<NodeId>, width: usize) -> NodeId {
        self.nodes.push(Node { kind, inputs });
        self.widths.push(width);
        self.nodes.len() - 1
    }

    fn check_ref(&self, id: NodeId) -> Result<(), NnError> {
        if id >= self.nodes.len() {
            return Err(NnError::Spec(format!("node {id} does not exist yet")));
        }
        if matches!(self.nodes[id].kind, NodeKind::LossHead { .. }) {
            return Err(NnError::Spec(format!(
                "node {id} is a loss head; its output cannot be consumed"
            )));
        }
        Ok(())
    }

    pub fn input(&mut self, width: usize) -> NodeId {
        self.push(NodeKind::Input { width }, Vec::new(), width)
    }

    pub fn layer(
        &mut self,
        input: NodeId,
        kind: LayerKind,
        units: usize,
        transfer: Transfer,
    ) -> Result<NodeId, NnError> {
        self.check_ref(input)?;
        if units == 0 {
            return Err(NnError::Spec("layer needs at least 1 unit".into()));
        }
        if let LayerKind::NanDense(_) = kind {
            // Walk upstream through dropout only; the pruning closed form is
            // defined over raw input features.
            let mut at = input;
            loop {
                match &self.nodes[at].kind {
                    NodeKind::Input { .. } => break,
                    NodeKind::Dropout { .. } => at = self.nodes[at].inputs[0],
                    other => {
                        return Err(NnError::Spec(format!(
                            "nan_dense must be fed by an input (through dropout at most), \
                             found {other:?} upstream"
                        )))
                    }
                }
            }
        }
        Ok(self.push(NodeKind::Layer { kind, units, transfer }, vec![input], units))
    }

    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId, NnError> {
        if inputs.len() < 2 {
            return Err(NnError::Spec("concat needs at least 2 inputs".into()));
        }
        let mut width = 0;
        for &id in inputs {
            self.check_ref(id)?;
            width += self.widths[id];
        }
        Ok(self.push(NodeKind::Concat, inputs.to_vec(), width))
    }

    pub fn dropout(&mut self, input: NodeId, rate: f64) -> Result<NodeId, NnError> {
        self.check_ref(input)?;
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::Spec(format!("dropout rate {rate} outside [0, 1)")));
        }
        let width = self.widths[input];
        Ok(self.push(NodeKind::Dropout { rate }, vec![input], width))
    }

    pub fn loss(
        &mut self,
        input: NodeId,
        loss: LossKind,
        weight: f64,
    ) -> Result<NodeId, NnError> {
        self.check_ref(input)?;
        let width = self.widths[input];
        match loss {
            LossKind::Bce | LossKind::Mse if width != 1 => {
                return Err(NnError::Spec(format!(
                    "{} loss needs a single output, got width {width}",
                    loss.name()
                )))
            }
            LossKind::Cce if width < 2 => {
                return Err(NnError::Spec(format!(
                    "cce loss needs at least 2 outputs, got width {width}"
                )))
            }
            _ => {}
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(NnError::Spec(format!("loss weight {weight} invalid")));
        }
        Ok(self.push(NodeKind::LossHead { loss, weight }, vec![input], width))
    }

    pub fn output(&mut self, node: NodeId) {
        self.output = Some(node);
    }

    pub fn build(self) -> Result<Network, NnError> {
        let output_node = self
            .output
            .ok_or_else(|| NnError::Spec("no output node designated".into()))?;
        if output_node >= self.nodes.len()
            || matches!(self.nodes[output_node].kind, NodeKind::LossHead { .. })
        {
            return Err(NnError::Spec("output node invalid".into()));
        }

        let mut param_ranges = Vec::with_capacity(self.nodes.len());
        let mut at = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            let count = match &node.kind {
                NodeKind::Layer { kind, units, .. } => {
                    let p = self.widths[node.inputs[0]];
                    let wc = usize::from(matches!(kind, LayerKind::NanDense(Mode::MPromissing)));
                    units * p + units + wc * units
                }
                _ => 0,
            };
            param_ranges.push(at..at + count);
            let _ = id;
            at += count;
        }

        let input_nodes: Vec<NodeId> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.kind, NodeKind::Input { .. }))
            .map(|(id, _)| id)
            .collect();
        if input_nodes.is_empty() {
            return Err(NnError::Spec("network has no input".into()));
        }

        Ok(Network {
            nodes: self.nodes,
            widths: self.widths,
            param_ranges,
            params: vec![0.0; at],
            input_nodes,
            output_node,
        })
    }
}

impl Network {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn width(&self, node: NodeId) -> usize {
        self.widths[node]
    }

    pub fn output_node(&self) -> NodeId {
        self.output_node
    }

    pub fn n_inputs(&self) -> usize {
        self.input_nodes.len()
    }

    pub fn input_widths(&self) -> Vec<usize> {
        self.input_nodes.iter().map(|&id| self.widths[id]).collect()
    }

    /// Ids of nan_dense layer nodes, in topological order.
    pub fn nan_dense_nodes(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                matches!(
                    n.kind,
                    NodeKind::Layer {
                        kind: LayerKind::NanDense(_),
                        ..
                    }
                )
            })
            .map(|(id, _)| id)
            .collect()
    }

    /// (units, fan_in) of a layer node.
    pub fn layer_dims(&self, node: NodeId) -> Option<(usize, usize)> {
        match &self.nodes[node].kind {
            NodeKind::Layer { units, .. } => {
                Some((*units, self.widths[self.nodes[node].inputs[0]]))
            }
            _ => None,
        }
    }

    /// (weights, biases, compensatory weights) of a layer node.
    #[allow(clippy::type_complexity)]
    pub fn layer_params(&self, node: NodeId) -> Option<(&[f64], &[f64], Option<&[f64]>)> {
        let (s, p) = self.layer_dims(node)?;
        let range = self.param_ranges[node].clone();
        let slice = &self.params[range];
        let (w, rest) = slice.split_at(s * p);
        let (b, wc) = rest.split_at(s);
        Some((w, b, if wc.is_empty() { None } else { Some(wc) }))
    }

    /// Glorot-uniform weight init (limit √(6/(fan_in+fan_out))), zero biases
    /// and zero compensatory weights, drawn in node order from one stream.
    /// Zero compensatory weights make a compensated layer start out exactly
    /// as an uncompensated one.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for id in 0..self.nodes.len() {
            let Some((s, p)) = self.layer_dims(id) else {
                continue;
            };
            let limit = (6.0 / (p + s) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let range = self.param_ranges[id].clone();
            let slice = &mut self.params[range];
            for w in slice[..s * p].iter_mut() {
                *w = dist.sample(&mut rng);
            }
            for b in slice[s * p..].iter_mut() {
                *b = 0.0;
            }
        }
    }

    /// Neutralizer matrix of a nan_dense node (Dense nodes have no pruning
    /// semantics to neutralize).
    pub fn export_neutralizers(
        &self,
        node: NodeId,
        epsilon: f64,
    ) -> Result<NeutralizerMatrix, NnError> {
        match self.nodes.get(node).map(|n| &n.kind) {
            Some(NodeKind::Layer {
                kind: LayerKind::NanDense(_),
                ..
            }) => {}
            other => {
                return Err(NnError::Spec(format!(
                    "node {node} is not a nan_dense layer: {other:?}"
                )))
            }
        }
        let (_, p) = self.layer_dims(node).expect("layer dims");
        let (w, b, _) = self.layer_params(node).expect("layer params");
        Ok(NeutralizerMatrix::compute(w, b, p, epsilon))
    }

    /// Loss heads as (head node, scored node, loss, weight).
    fn loss_heads(&self) -> Vec<(NodeId, NodeId, LossKind, f64)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n.kind {
                NodeKind::LossHead { loss, weight } => Some((id, n.inputs[0], loss, weight)),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn check_inputs(&self, inputs: &[&MaskedMatrix]) -> Result<usize, NnError> {
        if inputs.len() != self.input_nodes.len() {
            return Err(NnError::Shape(format!(
                "network has {} inputs, got {}",
                self.input_nodes.len(),
                inputs.len()
            )));
        }
        let n = inputs
            .first()
            .map(|m| m.n_rows())
            .ok_or_else(|| NnError::Shape("no input matrices".into()))?;
        for (slot, (&id, m)) in self.input_nodes.iter().zip(inputs).enumerate() {
            if m.n_cols() != self.widths[id] {
                return Err(NnError::Shape(format!(
                    "input {slot} has width {}, expected {}",
                    m.n_cols(),
                    self.widths[id]
                )));
            }
            if m.n_rows() != n {
                return Err(NnError::Shape("inputs disagree on row count".into()));
            }
        }
        Ok(n)
    }

    pub(crate) fn forward(
        &self,
        inputs: &[&MaskedMatrix],
        dropout: DropoutMode,
    ) -> Result<ForwardPass, NnError> {
        self.check_inputs(inputs)?;
        let mut dropout_rng = match dropout {
            DropoutMode::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            DropoutMode::Disabled => None,
        };

        let mut values: Vec<Value> = Vec::with_capacity(self.nodes.len());
        let mut scales: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        let mut next_input = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            let value = match &node.kind {
                NodeKind::Input { .. } => {
                    let v = Value::Masked(inputs[next_input].clone());
                    next_input += 1;
                    v
                }
                NodeKind::Layer { kind, transfer, .. } => {
                    let upstream = &values[node.inputs[0]];
                    let mut a = match kind {
                        LayerKind::Dense => {
                            if upstream.has_missing() {
                                return Err(NnError::MissingNotAllowed { node: id });
                            }
                            let (w, b, _) = self.layer_params(id).expect("layer params");
                            forward_dense(w, b, upstream.dense())
                        }
                        LayerKind::NanDense(mode) => {
                            let Value::Masked(x) = upstream else {
                                return Err(NnError::Spec(format!(
                                    "nan_dense node {id} expects a masked input"
                                )));
                            };
                            let (w, b, wc) = self.layer_params(id).expect("layer params");
                            debug_assert_eq!(
                                wc.is_some(),
                                matches!(mode, Mode::MPromissing)
                            );
                            forward_nan_dense(w, b, wc, x)
                        }
                    };
                    transfer.apply(&mut a);
                    Value::Dense(a)
                }
                NodeKind::Dropout { rate } => {
                    let upstream = &values[node.inputs[0]];
                    match dropout_rng.as_mut() {
                        None => upstream.clone(),
                        Some(rng) => {
                            let (n, w) = (upstream.n_rows(), self.widths[id]);
                            let keep_scale = 1.0 / (1.0 - rate);
                            let scale = Array2::from_shape_fn((n, w), |_| {
                                if rng.gen::<f64>() < *rate {
                                    0.0
                                } else {
                                    keep_scale
                                }
                            });
                            let scaled = match upstream {
                                Value::Dense(a) => Value::Dense(a * &scale),
                                Value::Masked(m) => {
                                    // NaN payloads stay NaN; the mask is
                                    // untouched (dropout zeroes observed
                                    // values, it does not mark them missing).
                                    Value::Masked(MaskedMatrix::new(
                                        m.values() * &scale,
                                        m.mask().clone(),
                                    ))
                                }
                            };
                            scales[id] = Some(scale);
                            scaled
                        }
                    }
                }
                NodeKind::Concat => {
                    let any_missing = node
                        .inputs
                        .iter()
                        .any(|&i| values[i].has_missing());
                    if any_missing {
                        let parts: Vec<MaskedMatrix> = node
                            .inputs
                            .iter()
                            .map(|&i| match &values[i] {
                                Value::Masked(m) => m.clone(),
                                Value::Dense(a) => MaskedMatrix::from_dense(a.clone()),
                            })
                            .collect();
                        let refs: Vec<&MaskedMatrix> = parts.iter().collect();
                        Value::Masked(MaskedMatrix::hstack(&refs))
                    } else {
                        let n = values[node.inputs[0]].n_rows();
                        let mut out = Array2::zeros((n, self.widths[id]));
                        let mut at = 0;
                        for &i in &node.inputs {
                            let part = values[i].dense();
                            for c in 0..part.ncols() {
                                for r in 0..n {
                                    out[(r, at + c)] = part[(r, c)];
                                }
                            }
                            at += part.ncols();
                        }
                        Value::Dense(out)
                    }
                }
                // Loss heads score their input; they produce no tensor of
                // their own, so a placeholder keeps the value list aligned.
                NodeKind::LossHead { .. } => Value::Dense(Array2::zeros((0, 0))),
            };
            values.push(value);
        }
        Ok(ForwardPass { values, scales })
    }

    /// Total weighted loss of a forward pass against per-row targets.
    pub(crate) fn loss_of(&self, pass: &ForwardPass, targets: &[f64]) -> Result<f64, NnError> {
        let mut total = 0.0;
        for (_, scored, loss, weight) in self.loss_heads() {
            let y = pass.values[scored].dense();
            total += weight * head_loss(loss, y, targets)?;
        }
        Ok(total)
    }

    /// Backpropagates every loss head; returns the total weighted loss and
    /// the gradient for each parameter.
    pub(crate) fn backward(
        &self,
        pass: &ForwardPass,
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>), NnError> {
        let heads = self.loss_heads();
        if heads.is_empty() {
            return Err(NnError::Spec("network has no loss heads".into()));
        }
        let mut total = 0.0;
        let mut acc: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        for (_, scored, loss, weight) in &heads {
            let y = pass.values[*scored].dense();
            total += weight * head_loss(*loss, y, targets)?;
            let mut g = head_grad(*loss, y, targets)?;
            g.mapv_inplace(|v| v * weight);
            add_grad(&mut acc[*scored], g);
        }

        let mut grads = vec![0.0; self.params.len()];
        for id in (0..self.nodes.len()).rev() {
            let Some(g) = acc[id].take() else { continue };
            match &self.nodes[id].kind {
                NodeKind::Input { .. } | NodeKind::LossHead { .. } => {}
                NodeKind::Layer { kind, transfer, .. } => {
                    let y = pass.values[id].dense();
                    let da = transfer.backward(y, &g);
                    let upstream = self.nodes[id].inputs[0];
                    let needs_dx =
                        !matches!(self.nodes[upstream].kind, NodeKind::Input { .. });
                    let (s, p) = self.layer_dims(id).expect("layer dims");
                    let range = self.param_ranges[id].clone();
                    let (w, _, _) = self.layer_params(id).expect("layer params");
                    let w = w.to_vec();
                    let gslice = &mut grads[range];
                    let (dw, rest) = gslice.split_at_mut(s * p);
                    let (db, dwc) = rest.split_at_mut(s);
                    let mut dx = needs_dx.then(|| Array2::zeros((g.nrows(), p)));
                    match kind {
                        LayerKind::Dense => {
                            backward_dense(
                                &w,
                                pass.values[upstream].dense(),
                                &da,
                                dw,
                                db,
                                dx.as_mut(),
                            );
                        }
                        LayerKind::NanDense(_) => {
                            let Value::Masked(x) = &pass.values[upstream] else {
                                return Err(NnError::Spec(format!(
                                    "nan_dense node {id} lost its masked input"
                                )));
                            };
                            backward_nan_dense(
                                &w,
                                x,
                                &da,
                                dw,
                                db,
                                (!dwc.is_empty()).then_some(dwc),
                                dx.as_mut(),
                            );
                        }
                    }
                    if let Some(dx) = dx {
                        add_grad(&mut acc[upstream], dx);
                    }
                }
                NodeKind::Dropout { .. } => {
                    let upstream = self.nodes[id].inputs[0];
                    if matches!(self.nodes[upstream].kind, NodeKind::Input { .. }) {
                        continue;
                    }
                    let dx = match &pass.scales[id] {
                        Some(scale) => &g * scale,
                        None => g,
                    };
                    add_grad(&mut acc[upstream], dx);
                }
                NodeKind::Concat => {
                    let mut at = 0;
                    for &i in &self.nodes[id].inputs {
                        let w = self.widths[i];
                        if !matches!(self.nodes[i].kind, NodeKind::Input { .. }) {
                            let part = g.slice(ndarray::s![.., at..at + w]).to_owned();
                            add_grad(&mut acc[i], part);
                        }
                        at += w;
                    }
                }
            }
        }
        Ok((total, grads))
    }

    /// Forward pass with dropout disabled; returns the output node's values.
    pub fn predict(&self, inputs: &[&MaskedMatrix]) -> Result<Array2<f64>, NnError> {
        let pass = self.forward(inputs, DropoutMode::Disabled)?;
        match &pass.values[self.output_node] {
            Value::Dense(a) => Ok(a.clone()),
            Value::Masked(m) => {
                if m.has_missing() {
                    Err(NnError::Shape("output still contains missing cells".into()))
                } else {
                    Ok(m.values().clone())
                }
            }
        }
    }

    /// Positive-class score per row: the single output for width-1 heads,
    /// or class 1's probability for a 2-class distribution.
    pub fn predict_positive(&self, inputs: &[&MaskedMatrix]) -> Result<Vec<f64>, NnError> {
        let out = self.predict(inputs)?;
        let col = if out.ncols() == 1 { 0 } else { 1 };
        Ok(out.column(col).to_vec())
    }
}

fn add_grad(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        None => *slot = Some(g),
        Some(existing) => *existing += &g,
    }
}

const PROB_FLOOR: f64 = 1e-12;

fn head_loss(loss: LossKind, y: &Array2<f64>, targets: &[f64]) -> Result<f64, NnError> {
    let n = y.nrows();
    if targets.len() != n {
        return Err(NnError::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            n
        )));
    }
    let mut sum = 0.0;
    match loss {
        LossKind::Bce => {
            for r in 0..n {
                let t = targets[r];
                if t != 0.0 && t != 1.0 {
                    return Err(NnError::Shape(format!("BCE target {t} is not 0/1")));
                }
                let p = y[(r, 0)].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            }
        }
        LossKind::Cce => {
            let classes = y.ncols();
            for r in 0..n {
                let c = class_index(targets[r], classes)?;
                sum -= y[(r, c)].max(PROB_FLOOR).ln();
            }
        }
        LossKind::Mse => {
            for r in 0..n {
                let d = y[(r, 0)] - targets[r];
                sum += d * d;
            }
        }
    }
    Ok(sum / n as f64)
}

fn head_grad(loss: LossKind, y: &Array2<f64>, targets: &[f64]) -> Result<Array2<f64>, NnError> {
    let n = y.nrows();
    let mut g = Array2::zeros(y.dim());
    match loss {
        LossKind::Bce => {
            for r in 0..n {
                let p = y[(r, 0)].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                g[(r, 0)] = (p - targets[r]) / (p * (1.0 - p)) / n as f64;
            }
        }
        LossKind::Cce => {
            let classes = y.ncols();
            for r in 0..n {
                let c = class_index(targets[r], classes)?;
                g[(r, c)] = -1.0 / y[(r, c)].max(PROB_FLOOR) / n as f64;
            }
        }
        LossKind::Mse => {
            for r in 0..n {
                g[(r, 0)] = 2.0 * (y[(r, 0)] - targets[r]) / n as f64;
            }
        }
    }
    Ok(g)
}

fn class_index(target: f64, classes: usize) -> Result<usize, NnError> {
    let c = target as usize;
    if target.fract() != 0.0 || target < 0.0 || c >= classes {
        return Err(NnError::Shape(format!(
            "target {target} is not a class index below {classes}"
        )));
    }
    Ok(c)
}

/// Two-feature XOR architecture: 4 tanh units into 1 sigmoid output with a
/// binary cross-entropy head.
pub fn xor_network(first: FirstLayer) -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(2);
    let h = b
        .layer(x, first.layer_kind(), 4, Transfer::Tanh)
        .expect("xor hidden layer");
    let o = b.layer(h, LayerKind::Dense, 1, Transfer::Sigmoid).expect("xor output");
    b.loss(o, LossKind::Bce, 1.0).expect("xor loss");
    b.output(o);
    b.build().expect("xor network")
}

/// Tabular benchmark architecture: ⌈p/2⌉ relu units, then 2 relu units,
/// then one sigmoid (classification, BCE) or linear (regression, MSE)
/// output.
pub fn benchmark_network(p: usize, first: FirstLayer, regression: bool) -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(p);
    let h1 = b
        .layer(x, first.layer_kind(), p.div_ceil(2), Transfer::Relu)
        .expect("benchmark first layer");
    let h2 = b
        .layer(h1, LayerKind::Dense, 2, Transfer::Relu)
        .expect("benchmark second layer");
    let (transfer, loss) = if regression {
        (Transfer::Linear, LossKind::Mse)
    } else {
        (Transfer::Sigmoid, LossKind::Bce)
    };
    let o = b.layer(h2, LayerKind::Dense, 1, transfer).expect("benchmark output");
    b.loss(o, loss, 1.0).expect("benchmark loss");
    b.output(o);
    b.build().expect("benchmark network")
}

/// Multimodal fusion architecture: per modality, dropout → representation
/// layer → dropout → 2-class softmax head with a weighted CCE loss; the
/// representations and head outputs concatenate into dropout → 5 relu →
/// dropout → 2-class softmax main head. Dropout rate 0.1 before every
/// weighted layer.
pub fn fusion_network(
    modality_sizes: &[usize],
    repr_sizes: &[usize],
    first: FirstLayer,
    head_weight: f64,
) -> Result<Network, NnError> {
    if modality_sizes.len() != repr_sizes.len() {
        return Err(NnError::Spec(format!(
            "{} modalities but {} representation sizes",
            modality_sizes.len(),
            repr_sizes.len()
        )));
    }
    if modality_sizes.len() < 2 {
        return Err(NnError::Spec("fusion needs at least 2 modalities".into()));
    }
    const RATE: f64 = 0.1;
    let mut b = NetworkBuilder::new();
    let mut reprs = Vec::new();
    let mut heads = Vec::new();
    for (&p, &units) in modality_sizes.iter().zip(repr_sizes) {
        let x = b.input(p);
        let d = b.dropout(x, RATE)?;
        let repr = b.layer(d, first.layer_kind(), units, Transfer::Tanh)?;
        let dh = b.dropout(repr, RATE)?;
        let head = b.layer(dh, LayerKind::Dense, 2, Transfer::Softmax)?;
        b.loss(head, LossKind::Cce, head_weight)?;
        reprs.push(repr);
        heads.push(head);
    }
    let mut concat_inputs = reprs;
    concat_inputs.extend(heads);
    let c = b.concat(&concat_inputs)?;
    let dc = b.dropout(c, RATE)?;
    let fused = b.layer(dc, LayerKind::Dense, 5, Transfer::Relu)?;
    let df = b.dropout(fused, RATE)?;
    let main = b.layer(df, LayerKind::Dense, 2, Transfer::Softmax)?;
    b.loss(main, LossKind::Cce, 1.0)?;
    b.output(main);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn xor_parameter_counts() {
        // 2·4 weights + 4 biases + 4·1 weights + 1 bias = 17.
        assert_eq!(xor_network(FirstLayer::Promissing).n_params(), 17);
        assert_eq!(xor_network(FirstLayer::Dense).n_params(), 17);
        // Compensated variant adds one w_c per hidden unit.
        assert_eq!(xor_network(FirstLayer::MPromissing).n_params(), 21);
    }

    #[test]
    fn benchmark_first_layer_width_is_half_rounded_up() {
        let net = benchmark_network(6, FirstLayer::Promissing, false);
        let first = net.nan_dense_nodes()[0];
        assert_eq!(net.layer_dims(first), Some((3, 6)));
        let net = benchmark_network(7, FirstLayer::Promissing, false);
        let first = net.nan_dense_nodes()[0];
        assert_eq!(net.layer_dims(first), Some((4, 7)));
    }

    #[test]
    fn fusion_accepts_clinical_style_shape() {
        let sizes = [20, 6, 7, 11, 1, 67, 34, 30, 5, 1, 9, 20];
        let reprs = [10, 10, 5, 5, 2, 10, 10, 10, 5, 2, 5, 5];
        let net = fusion_network(&sizes, &reprs, FirstLayer::MPromissing, 1.0).unwrap();
        assert_eq!(net.n_inputs(), 12);
        // Concat width = all representations + 2 per modality head.
        let concat_width: usize = reprs.iter().sum::<usize>() + 2 * sizes.len();
        let concat_id = net
            .nodes()
            .iter()
            .position(|n| matches!(n.kind, NodeKind::Concat))
            .unwrap();
        assert_eq!(net.width(concat_id), concat_width);
    }

    #[test]
    fn dense_layer_rejects_missing_cells() {
        let net = xor_network(FirstLayer::Dense);
        let x = MaskedMatrix::new(array![[1.0, f64::NAN]], array![[false, true]]);
        assert!(matches!(
            net.predict(&[&x]),
            Err(NnError::MissingNotAllowed { .. })
        ));
    }

    #[test]
    fn pruning_network_accepts_missing_cells() {
        let mut net = xor_network(FirstLayer::Promissing);
        net.init_params(1);
        let x = MaskedMatrix::new(array![[1.0, f64::NAN]], array![[false, true]]);
        let out = net.predict(&[&x]).unwrap();
        assert!(out[(0, 0)].is_finite());
    }

    #[test]
    fn identical_rows_predict_identically() {
        let mut net = xor_network(FirstLayer::MPromissing);
        net.init_params(3);
        let x = MaskedMatrix::new(
            array![[0.5, f64::NAN], [0.5, f64::NAN]],
            array![[false, true], [false, true]],
        );
        let out = net.predict(&[&x]).unwrap();
        assert_eq!(out[(0, 0)], out[(1, 0)]);
    }

    #[test]
    fn all_missing_rows_ignore_payloads() {
        let mut net = xor_network(FirstLayer::Promissing);
        net.init_params(7);
        let a = MaskedMatrix::all_missing(1, 2);
        // Same mask, wildly different (discarded) payloads.
        let b = MaskedMatrix::new(array![[1e9, -4.2]], array![[true, true]]);
        let pa = net.predict(&[&a]).unwrap();
        let pb = net.predict(&[&b]).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn glorot_init_is_deterministic_and_bounded() {
        let mut a = xor_network(FirstLayer::Promissing);
        let mut b = xor_network(FirstLayer::Promissing);
        a.init_params(11);
        b.init_params(11);
        assert_eq!(a.params(), b.params());
        let mut c = xor_network(FirstLayer::Promissing);
        c.init_params(12);
        assert_ne!(a.params(), c.params());

        // Hidden layer: fan_in 2, fan_out 4 → limit = 1.
        let hidden = a.nan_dense_nodes()[0];
        let (w, bias, wc) = a.layer_params(hidden).unwrap();
        assert!(w.iter().all(|v| v.abs() <= 1.0));
        assert!(bias.iter().all(|&v| v == 0.0));
        assert!(wc.is_none());
    }

    #[test]
    fn compensatory_weights_start_at_zero() {
        let mut net = xor_network(FirstLayer::MPromissing);
        net.init_params(5);
        let hidden = net.nan_dense_nodes()[0];
        let (_, _, wc) = net.layer_params(hidden).unwrap();
        assert_eq!(wc.unwrap(), &[0.0; 4]);
    }

    #[test]
    fn softmax_head_outputs_sum_to_one() {
        let mut net = fusion_network(&[3, 4], &[2, 2], FirstLayer::Promissing, 1.0).unwrap();
        net.init_params(2);
        let m1 = MaskedMatrix::from_dense(array![[0.1, -0.2, 0.3], [1.0, 2.0, -1.0]]);
        let m2 = MaskedMatrix::from_dense(array![[0.5, 0.5, -0.5, 0.2], [0.0, 0.1, 0.2, 0.3]]);
        let out = net.predict(&[&m1, &m2]).unwrap();
        for r in 0..2 {
            let sum: f64 = (0..2).map(|c| out[(r, c)]).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dropout_seeding_controls_determinism() {
        let mut net = fusion_network(&[3, 3], &[2, 2], FirstLayer::Promissing, 1.0).unwrap();
        net.init_params(4);
        let m = MaskedMatrix::from_dense(array![[0.1, 0.2, 0.3]]);
        let targets = [1.0];
        let loss_at = |seed| {
            let pass = net.forward(&[&m, &m], DropoutMode::Seeded(seed)).unwrap();
            net.loss_of(&pass, &targets).unwrap()
        };
        assert_eq!(loss_at(9), loss_at(9));
        // Different seeds drop different cells almost surely.
        assert_ne!(loss_at(9), loss_at(10));
    }

    #[test]
    fn builder_rejects_malformed_graphs() {
        // Dropout rate 1 would zero everything.
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        assert!(b.dropout(x, 1.0).is_err());

        // nan_dense must hang off an input.
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let h = b.layer(x, LayerKind::Dense, 2, Transfer::Relu).unwrap();
        assert!(b
            .layer(h, LayerKind::NanDense(Mode::Promissing), 2, Transfer::Tanh)
            .is_err());

        // Loss head outputs are terminal.
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let o = b.layer(x, LayerKind::Dense, 1, Transfer::Sigmoid).unwrap();
        let l = b.loss(o, LossKind::Bce, 1.0).unwrap();
        assert!(b.layer(l, LayerKind::Dense, 1, Transfer::Linear).is_err());

        // BCE needs width 1.
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let o = b.layer(x, LayerKind::Dense, 2, Transfer::Sigmoid).unwrap();
        assert!(b.loss(o, LossKind::Bce, 1.0).is_err());

        // No output designated.
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let _ = b.layer(x, LayerKind::Dense, 1, Transfer::Sigmoid).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn nan_dense_through_dropout_is_allowed() {
        let mut b = NetworkBuilder::new();
        let x = b.input(3);
        let d = b.dropout(x, 0.1).unwrap();
        assert!(b
            .layer(d, LayerKind::NanDense(Mode::Promissing), 2, Transfer::Tanh)
            .is_ok());
    }

    #[test]
    fn bce_loss_hand_value() {
        // Single sigmoid output 0.8 against target 1: loss = -ln 0.8.
        let y = array![[0.8]];
        assert!((head_loss(LossKind::Bce, &y, &[1.0]).unwrap() + 0.8f64.ln()).abs() < 1e-15);
        // Against target 0: -ln 0.2.
        assert!((head_loss(LossKind::Bce, &y, &[0.0]).unwrap() + 0.2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cce_loss_hand_value() {
        let y = array![[0.3, 0.7], [0.9, 0.1]];
        // Targets class 1 then class 0: -(ln 0.7 + ln 0.9)/2.
        let expected = -(0.7f64.ln() + 0.9f64.ln()) / 2.0;
        assert!((head_loss(LossKind::Cce, &y, &[1.0, 0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn non_integer_class_target_rejected() {
        let y = array![[0.3, 0.7]];
        assert!(head_loss(LossKind::Cce, &y, &[0.5]).is_err());
    }
}
