use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;

use super::{NnError, Scalar, Tensor};
use crate::seeds;

/// Layer kinds the engine executes. Convolutions are square-kernel with
/// symmetric zero padding; pooling is unpadded.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Input,
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    Concat,
    Dense {
        units: usize,
    },
    Relu,
    Sigmoid,
    Dropout {
        /// Drop probability; survivors are scaled by 1/(1-p) at train time.
        p: f64,
    },
    GlobalAvgPool,
    Flatten,
}

impl LayerKind {
    pub fn has_weights(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Dense { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNode {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<String>,
}

impl LayerNode {
    pub fn new(name: impl Into<String>, kind: LayerKind, inputs: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Shape of a node's output for a fixed input shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeShape {
    /// Channel-major feature map (c, h, w).
    Map { c: usize, h: usize, w: usize },
    /// Flat feature vector.
    Vector { f: usize },
}

impl NodeShape {
    pub fn numel(&self) -> usize {
        match *self {
            NodeShape::Map { c, h, w } => c * h * w,
            NodeShape::Vector { f } => f,
        }
    }
}

/// DAG of layers with named weights, one input node, and a scalar output.
///
/// Node order is topological; shapes are inferred at construction for the
/// declared input shape, and weights are either Glorot-initialized from the
/// seed or supplied explicitly.
#[derive(Clone, Debug)]
pub struct ModelGraph<T: Scalar = f32> {
    nodes: Vec<LayerNode>,
    input_indices: Vec<Vec<usize>>,
    shapes: Vec<NodeShape>,
    name_to_index: BTreeMap<String, usize>,
    input_node: String,
    output_node: String,
    penultimate_node: String,
    input_shape: [usize; 3],
    weights: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ModelGraph<T> {
    /// Build a graph and initialize its weights from `seed`.
    ///
    /// Initialization is Glorot-uniform keyed by node name, so two graphs
    /// built from the same seed get identical weights node for node.
    pub fn new(
        nodes: Vec<LayerNode>,
        input_node: &str,
        output_node: &str,
        penultimate_node: &str,
        input_shape: [usize; 3],
        seed: u64,
    ) -> Result<Self, NnError> {
        let mut graph = Self::build(nodes, input_node, output_node, penultimate_node, input_shape)?;
        let mut weights = BTreeMap::new();
        for idx in 0..graph.nodes.len() {
            let node = &graph.nodes[idx];
            match node.kind {
                LayerKind::Conv2d {
                    out_channels,
                    kernel,
                    ..
                } => {
                    let in_c = match graph.shapes[graph.input_indices[idx][0]] {
                        NodeShape::Map { c, .. } => c,
                        NodeShape::Vector { .. } => unreachable!("validated in build"),
                    };
                    let fan_in = in_c * kernel * kernel;
                    let fan_out = out_channels * kernel * kernel;
                    let w = glorot(
                        vec![out_channels, in_c, kernel, kernel],
                        fan_in,
                        fan_out,
                        seeds::derive(seed, &format!("init:{}", node.name)),
                    );
                    weights.insert(format!("{}.w", node.name), w);
                    weights.insert(format!("{}.b", node.name), Tensor::zeros(vec![out_channels]));
                }
                LayerKind::Dense { units } => {
                    let fan_in = match graph.shapes[graph.input_indices[idx][0]] {
                        NodeShape::Vector { f } => f,
                        NodeShape::Map { .. } => unreachable!("validated in build"),
                    };
                    let w = glorot(
                        vec![fan_in, units],
                        fan_in,
                        units,
                        seeds::derive(seed, &format!("init:{}", node.name)),
                    );
                    weights.insert(format!("{}.w", node.name), w);
                    weights.insert(format!("{}.b", node.name), Tensor::zeros(vec![units]));
                }
                _ => {}
            }
        }
        graph.weights = weights;
        Ok(graph)
    }

    /// Build a graph around an explicit weight map (used by fusion and
    /// weight loading); every weighted node must be covered exactly.
    pub fn with_weights(
        nodes: Vec<LayerNode>,
        input_node: &str,
        output_node: &str,
        penultimate_node: &str,
        input_shape: [usize; 3],
        weights: BTreeMap<String, Tensor<T>>,
    ) -> Result<Self, NnError> {
        let mut graph = Self::build(nodes, input_node, output_node, penultimate_node, input_shape)?;
        for (name, shape) in graph.expected_weight_shapes() {
            match weights.get(&name) {
                None => {
                    return Err(NnError::WeightMismatch {
                        name,
                        detail: "missing from supplied weights".into(),
                    })
                }
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(NnError::WeightMismatch {
                        name,
                        detail: format!("expected shape {:?}, got {:?}", shape, t.shape()),
                    })
                }
                Some(_) => {}
            }
        }
        let expected: BTreeSet<String> = graph.expected_weight_shapes().into_iter().map(|(n, _)| n).collect();
        for name in weights.keys() {
            if !expected.contains(name) {
                return Err(NnError::WeightMismatch {
                    name: name.clone(),
                    detail: "not a weight of this graph".into(),
                });
            }
        }
        graph.weights = weights;
        Ok(graph)
    }

    fn build(
        declared: Vec<LayerNode>,
        input_node: &str,
        output_node: &str,
        penultimate_node: &str,
        input_shape: [usize; 3],
    ) -> Result<Self, NnError> {
        if input_shape.contains(&0) {
            return Err(NnError::Graph(format!("input shape {input_shape:?} has a zero dimension")));
        }
        let mut name_set = BTreeSet::new();
        for node in &declared {
            if !name_set.insert(node.name.clone()) {
                return Err(NnError::Graph(format!("duplicate node name '{}'", node.name)));
            }
        }
        for need in [input_node, output_node, penultimate_node] {
            if !name_set.contains(need) {
                return Err(NnError::Graph(format!("node '{need}' is not declared")));
            }
        }
        let input_count = declared
            .iter()
            .filter(|n| matches!(n.kind, LayerKind::Input))
            .count();
        if input_count != 1 {
            return Err(NnError::Graph(format!("expected exactly one input node, found {input_count}")));
        }
        for node in &declared {
            let is_input = matches!(node.kind, LayerKind::Input);
            if is_input && (node.name != input_node || !node.inputs.is_empty()) {
                return Err(NnError::Graph(format!(
                    "input node '{}' must be the declared entry and take no inputs",
                    node.name
                )));
            }
            if !is_input && node.inputs.is_empty() {
                return Err(NnError::Graph(format!("node '{}' has no inputs", node.name)));
            }
            for dep in &node.inputs {
                if !name_set.contains(dep) {
                    return Err(NnError::Graph(format!(
                        "node '{}' references undeclared input '{dep}'",
                        node.name
                    )));
                }
            }
        }

        // Kahn topological sort, stable in declaration order.
        let declared_index: BTreeMap<String, usize> = declared
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), i))
            .collect();
        let mut remaining_deps: Vec<usize> = declared.iter().map(|n| n.inputs.len()).collect();
        let mut placed = vec![false; declared.len()];
        let mut order = Vec::with_capacity(declared.len());
        loop {
            let mut advanced = false;
            for i in 0..declared.len() {
                if !placed[i] && remaining_deps[i] == 0 {
                    placed[i] = true;
                    order.push(i);
                    advanced = true;
                    for (j, node) in declared.iter().enumerate() {
                        if !placed[j] && node.inputs.iter().any(|d| declared_index[d] == i) {
                            // one decrement per edge from i to j
                            let edges = node.inputs.iter().filter(|d| declared_index[*d] == i).count();
                            remaining_deps[j] -= edges;
                        }
                    }
                }
            }
            if !advanced {
                break;
            }
        }
        if order.len() != declared.len() {
            let stuck: Vec<&str> = declared
                .iter()
                .enumerate()
                .filter(|(i, _)| !placed[*i])
                .map(|(_, n)| n.name.as_str())
                .collect();
            return Err(NnError::Graph(format!("cycle involving nodes {stuck:?}")));
        }

        let nodes: Vec<LayerNode> = order.into_iter().map(|i| declared[i].clone()).collect();
        let name_to_index: BTreeMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), i))
            .collect();
        let input_indices: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| n.inputs.iter().map(|d| name_to_index[d]).collect())
            .collect();

        // shape inference
        let [ic, ih, iw] = input_shape;
        let mut shapes: Vec<NodeShape> = Vec::with_capacity(nodes.len());
        for (idx, node) in nodes.iter().enumerate() {
            let shape_err = |detail: String| NnError::Shape {
                node: node.name.clone(),
                detail,
            };
            let one_input = |shapes: &[NodeShape]| -> Result<NodeShape, NnError> {
                if input_indices[idx].len() != 1 {
                    return Err(shape_err(format!(
                        "expected exactly 1 input, got {}",
                        input_indices[idx].len()
                    )));
                }
                Ok(shapes[input_indices[idx][0]])
            };
            let shape = match node.kind {
                LayerKind::Input => NodeShape::Map { c: ic, h: ih, w: iw },
                LayerKind::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    pad,
                } => {
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(shape_err("conv parameters must be >= 1".into()));
                    }
                    match one_input(&shapes)? {
                        NodeShape::Map { h, w, .. } => {
                            if h + 2 * pad < kernel || w + 2 * pad < kernel {
                                return Err(shape_err(format!(
                                    "input {h}x{w} too small for kernel {kernel} with pad {pad}"
                                )));
                            }
                            NodeShape::Map {
                                c: out_channels,
                                h: (h + 2 * pad - kernel) / stride + 1,
                                w: (w + 2 * pad - kernel) / stride + 1,
                            }
                        }
                        NodeShape::Vector { .. } => {
                            return Err(shape_err("conv requires a feature-map input".into()))
                        }
                    }
                }
                LayerKind::MaxPool { kernel, stride } => {
                    if kernel == 0 || stride == 0 {
                        return Err(shape_err("pool parameters must be >= 1".into()));
                    }
                    match one_input(&shapes)? {
                        NodeShape::Map { c, h, w } => {
                            if h < kernel || w < kernel {
                                return Err(shape_err(format!("input {h}x{w} too small for pool {kernel}")));
                            }
                            NodeShape::Map {
                                c,
                                h: (h - kernel) / stride + 1,
                                w: (w - kernel) / stride + 1,
                            }
                        }
                        NodeShape::Vector { .. } => {
                            return Err(shape_err("pool requires a feature-map input".into()))
                        }
                    }
                }
                LayerKind::Concat => {
                    if input_indices[idx].len() < 2 {
                        return Err(shape_err("concat needs at least 2 inputs".into()));
                    }
                    let first = shapes[input_indices[idx][0]];
                    match first {
                        NodeShape::Map { h, w, .. } => {
                            let mut total_c = 0;
                            for &dep in &input_indices[idx] {
                                match shapes[dep] {
                                    NodeShape::Map { c, h: dh, w: dw } if dh == h && dw == w => total_c += c,
                                    other => {
                                        return Err(shape_err(format!(
                                            "concat inputs disagree: {first:?} vs {other:?}"
                                        )))
                                    }
                                }
                            }
                            NodeShape::Map { c: total_c, h, w }
                        }
                        NodeShape::Vector { .. } => {
                            let mut total_f = 0;
                            for &dep in &input_indices[idx] {
                                match shapes[dep] {
                                    NodeShape::Vector { f } => total_f += f,
                                    other => {
                                        return Err(shape_err(format!(
                                            "concat inputs disagree: {first:?} vs {other:?}"
                                        )))
                                    }
                                }
                            }
                            NodeShape::Vector { f: total_f }
                        }
                    }
                }
                LayerKind::Dense { units } => {
                    if units == 0 {
                        return Err(shape_err("dense units must be >= 1".into()));
                    }
                    match one_input(&shapes)? {
                        NodeShape::Vector { .. } => NodeShape::Vector { f: units },
                        NodeShape::Map { .. } => {
                            return Err(shape_err("dense requires a flat input (use flatten or global_avg_pool)".into()))
                        }
                    }
                }
                LayerKind::Relu | LayerKind::Sigmoid => one_input(&shapes)?,
                LayerKind::Dropout { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(shape_err(format!("drop probability {p} outside [0, 1)")));
                    }
                    one_input(&shapes)?
                }
                LayerKind::GlobalAvgPool => match one_input(&shapes)? {
                    NodeShape::Map { c, .. } => NodeShape::Vector { f: c },
                    NodeShape::Vector { .. } => {
                        return Err(shape_err("global_avg_pool requires a feature-map input".into()))
                    }
                },
                LayerKind::Flatten => match one_input(&shapes)? {
                    NodeShape::Map { c, h, w } => NodeShape::Vector { f: c * h * w },
                    NodeShape::Vector { f } => NodeShape::Vector { f },
                },
            };
            shapes.push(shape);
        }

        let out_idx = name_to_index[output_node];
        if shapes[out_idx] != (NodeShape::Vector { f: 1 }) {
            return Err(NnError::Shape {
                node: output_node.to_string(),
                detail: format!("output node must produce a single scalar, got {:?}", shapes[out_idx]),
            });
        }

        let graph = Self {
            nodes,
            input_indices,
            shapes,
            name_to_index,
            input_node: input_node.to_string(),
            output_node: output_node.to_string(),
            penultimate_node: penultimate_node.to_string(),
            input_shape,
            weights: BTreeMap::new(),
        };
        if !graph.reaches(penultimate_node, output_node) {
            return Err(NnError::Graph(format!(
                "penultimate node '{penultimate_node}' does not feed output '{output_node}'"
            )));
        }
        Ok(graph)
    }

    /// True when `to` is reachable from `from` along forward edges.
    fn reaches(&self, from: &str, to: &str) -> bool {
        let from_idx = self.name_to_index[from];
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        seen[from_idx] = true;
        // nodes are topologically ordered, one forward sweep suffices
        for idx in 0..self.nodes.len() {
            if self.input_indices[idx].iter().any(|&d| seen[d]) {
                seen[idx] = true;
            }
        }
        seen[self.name_to_index[to]]
    }

    pub(crate) fn expected_weight_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            match node.kind {
                LayerKind::Conv2d {
                    out_channels,
                    kernel,
                    ..
                } => {
                    let in_c = match self.shapes[self.input_indices[idx][0]] {
                        NodeShape::Map { c, .. } => c,
                        NodeShape::Vector { .. } => unreachable!(),
                    };
                    out.push((format!("{}.w", node.name), vec![out_channels, in_c, kernel, kernel]));
                    out.push((format!("{}.b", node.name), vec![out_channels]));
                }
                LayerKind::Dense { units } => {
                    let fan_in = match self.shapes[self.input_indices[idx][0]] {
                        NodeShape::Vector { f } => f,
                        NodeShape::Map { .. } => unreachable!(),
                    };
                    out.push((format!("{}.w", node.name), vec![fan_in, units]));
                    out.push((format!("{}.b", node.name), vec![units]));
                }
                _ => {}
            }
        }
        out
    }

    pub fn nodes(&self) -> &[LayerNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&LayerNode> {
        self.name_to_index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.name_to_index.get(name).copied()
    }

    pub(crate) fn input_indices(&self) -> &[Vec<usize>] {
        &self.input_indices
    }

    pub fn out_shape(&self, name: &str) -> Option<NodeShape> {
        self.name_to_index.get(name).map(|&i| self.shapes[i])
    }

    pub(crate) fn shapes(&self) -> &[NodeShape] {
        &self.shapes
    }

    pub fn input_node(&self) -> &str {
        &self.input_node
    }

    pub fn output_node(&self) -> &str {
        &self.output_node
    }

    pub fn penultimate_node(&self) -> &str {
        &self.penultimate_node
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn weights(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut BTreeMap<String, Tensor<T>> {
        &mut self.weights
    }

    pub fn weight(&self, name: &str) -> Option<&Tensor<T>> {
        self.weights.get(name)
    }

    /// Replace the whole weight map (shapes are validated).
    pub fn set_weights(&mut self, weights: BTreeMap<String, Tensor<T>>) -> Result<(), NnError> {
        for (name, shape) in self.expected_weight_shapes() {
            match weights.get(&name) {
                None => {
                    return Err(NnError::WeightMismatch {
                        name,
                        detail: "missing from supplied weights".into(),
                    })
                }
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(NnError::WeightMismatch {
                        name,
                        detail: format!("expected shape {:?}, got {:?}", shape, t.shape()),
                    })
                }
                Some(_) => {}
            }
        }
        self.weights = weights;
        Ok(())
    }

    /// Number of convolutional layers.
    pub fn conv_layer_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, LayerKind::Conv2d { .. }))
            .count()
    }
}

fn glorot<T: Scalar>(shape: Vec<usize>, fan_in: usize, fan_out: usize, seed: u64) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = seeds::rng(seed);
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| T::from_f64(rng.random::<f64>() * 2.0 * bound - bound))
        .collect();
    Tensor::new(shape, data).expect("shape matches generated data")
}
