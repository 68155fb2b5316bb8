use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map followed by an elementwise activation. Weights are `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Config(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
    repr_layer: usize,
    num_classes: usize,
}

impl DenseNet {
    /// Assembles a network from explicit layers. `repr_layer` indexes the
    /// layer whose output is the representation; everything after it is the
    /// classifier head.
    pub fn from_layers(layers: Vec<Layer>, repr_layer: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if repr_layer >= layers.len() {
            return Err(Error::Config(format!(
                "repr_layer {repr_layer} out of range for {} layers",
                layers.len()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension {
                    layer: i + 1,
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        let num_classes = layers.last().map(Layer::out_dim).unwrap_or(0);
        let net = Self {
            layers,
            repr_layer,
            num_classes,
        };
        net.check_finite()?;
        Ok(net)
    }

    /// Relu MLP: `input → hidden[0] → … → hidden[n-1] → classes`, with the
    /// representation at the last hidden layer and a linear classifier head.
    /// Weights are uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        Self::mlp_with_repr(input, hidden, classes, Activation::Relu, seed)
    }

    /// As [`DenseNet::mlp`], with `repr_activation` on the representation
    /// layer. An identity representation lets match penalties shrink
    /// distances smoothly instead of switching relu units off.
    pub fn mlp_with_repr(
        input: usize,
        hidden: &[usize],
        classes: usize,
        repr_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input == 0 || classes == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer widths must be ≥ 1".into()));
        }
        let mut rng = stream_rng(seed, stream::INIT);
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            let activation = if i + 1 == dims.len() - 1 {
                Activation::Identity
            } else if i + 2 == dims.len() - 1 {
                repr_activation
            } else {
                Activation::Relu
            };
            layers.push(Layer::new(
                Matrix::from_vec(fan_out, fan_in, data),
                vec![0.0; fan_out],
                activation,
            )?);
        }
        let repr_layer = if hidden.is_empty() {
            0
        } else {
            hidden.len() - 1
        };
        Self::from_layers(layers, repr_layer)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn repr_layer(&self) -> usize {
        self.repr_layer
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn repr_dim(&self) -> usize {
        self.layers[self.repr_layer].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Flattened parameters: per layer, weights (row-major) then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Mismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("parameters of layer {i}")));
            }
        }
        Ok(())
    }

    /// Runs the batch (one sample per row) through every layer and keeps the
    /// intermediate values needed by [`DenseNet::backward`].
    pub fn forward(&self, batch: &Matrix) -> Result<Forward> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { batch } else { &post[i - 1] };
            if input.cols() != layer.in_dim() {
                return Err(Error::Dimension {
                    layer: i,
                    expected: layer.in_dim(),
                    got: input.cols(),
                });
            }
            let z = affine(input, layer);
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            post.push(a);
        }
        Ok(Forward {
            input: batch.clone(),
            pre,
            post,
            repr_layer: self.repr_layer,
            shapes: self.shapes(),
        })
    }

    /// Representations only, for inference over a whole domain.
    pub fn represent(&self, batch: &Matrix) -> Result<Matrix> {
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate().take(self.repr_layer + 1) {
            if current.cols() != layer.in_dim() {
                return Err(Error::Dimension {
                    layer: i,
                    expected: layer.in_dim(),
                    got: current.cols(),
                });
            }
            let mut z = affine(&current, layer);
            for v in z.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            current = z;
        }
        Ok(current)
    }

    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.logits().clone())
    }

    /// Exact gradients of the recorded computation given the loss gradients
    /// with respect to the representation and/or the logits.
    pub fn backward(&self, fwd: &Forward, upstream: &Upstream) -> Result<Gradients> {
        if fwd.shapes != self.shapes() || fwd.repr_layer != self.repr_layer {
            return Err(Error::StaleForward(
                "layer shapes differ from the recorded pass".into(),
            ));
        }
        let batch = fwd.input.rows();
        for (name, g, want) in [
            ("representation", upstream.repr.as_ref(), self.repr_dim()),
            ("logits", upstream.logits.as_ref(), self.num_classes),
        ] {
            if let Some(g) = g {
                if g.rows() != batch || g.cols() != want {
                    return Err(Error::Mismatch(format!(
                        "{name} gradient is {}×{}, expected {batch}×{want}",
                        g.rows(),
                        g.cols()
                    )));
                }
            }
        }

        let last = self.layers.len() - 1;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = match &upstream.logits {
            Some(g) => g.clone(),
            None => Matrix::zeros(batch, self.num_classes),
        };
        for i in (0..=last).rev() {
            if i == self.repr_layer {
                if let Some(g) = &upstream.repr {
                    for (d, u) in delta.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *d += u;
                    }
                }
            }
            let layer = &self.layers[i];
            // post-activation gradient → pre-activation gradient
            for (d, z) in delta.as_mut_slice().iter_mut().zip(fwd.pre[i].as_slice()) {
                *d *= layer.activation.derivative(*z);
            }
            let input = if i == 0 { &fwd.input } else { &fwd.post[i - 1] };
            let g = &mut grads.layers[i];
            for b in 0..batch {
                let drow = delta.row(b);
                let xrow = input.row(b);
                for (o, &d) in drow.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    for (w, &x) in g.weights.row_mut(o).iter_mut().zip(xrow) {
                        *w += d * x;
                    }
                }
            }
            if i > 0 {
                let mut next = Matrix::zeros(batch, layer.in_dim());
                for b in 0..batch {
                    let drow = delta.row(b);
                    let out = next.row_mut(b);
                    for (o, &d) in drow.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (n, &w) in out.iter_mut().zip(layer.weights.row(o)) {
                            *n += d * w;
                        }
                    }
                }
                delta = next;
            }
        }
        Ok(grads)
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.out_dim(), l.in_dim()))
            .collect()
    }
}

fn affine(input: &Matrix, layer: &Layer) -> Matrix {
    let mut out = Matrix::zeros(input.rows(), layer.out_dim());
    for b in 0..input.rows() {
        let x = input.row(b);
        let o = out.row_mut(b);
        for (j, v) in o.iter_mut().enumerate() {
            *v = crate::linalg::dot(layer.weights.row(j), x) + layer.bias[j];
        }
    }
    out
}

/// Record of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
    repr_layer: usize,
    shapes: Vec<(usize, usize)>,
}

impl Forward {
    pub fn repr(&self) -> &Matrix {
        &self.post[self.repr_layer]
    }

    pub fn logits(&self) -> &Matrix {
        self.post.last().expect("non-empty")
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Loss gradients injected into a backward pass. Either side may be absent.
#[derive(Debug, Clone, Default)]
pub struct Upstream {
    pub repr: Option<Matrix>,
    pub logits: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shape-congruent with a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.as_slice().iter().all(|&v| v == 0.0) && l.bias.iter().all(|&v| v == 0.0)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|v| v.is_finite()))
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // index loops mirror the textbook formula on purpose
    #[allow(clippy::needless_range_loop)]
    fn hand_forward(net: &DenseNet, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut cur = x.to_vec();
        let mut repr = Vec::new();
        for (i, l) in net.layers().iter().enumerate() {
            let mut next = vec![0.0; l.out_dim()];
            for o in 0..l.out_dim() {
                let mut s = l.bias[o];
                for k in 0..l.in_dim() {
                    s += l.weights[(o, k)] * cur[k];
                }
                next[o] = match l.activation {
                    Activation::Relu => {
                        if s > 0.0 {
                            s
                        } else {
                            0.0
                        }
                    }
                    Activation::Identity => s,
                };
            }
            cur = next;
            if i == net.repr_layer() {
                repr = cur.clone();
            }
        }
        (repr, cur)
    }

    #[test]
    fn identity_network_passes_input_through() {
        let layer = Layer::new(Matrix::identity(3), vec![0.0; 3], Activation::Identity).unwrap();
        let net = DenseNet::from_layers(vec![layer], 0).unwrap();
        let x = Matrix::from_rows(&[vec![1.5, -2.0, 0.25]]);
        let f = net.forward(&x).unwrap();
        assert_eq!(f.repr(), &x);
        assert_eq!(f.logits(), &x);
    }

    #[test]
    fn relu_clamps_negative() {
        let layer =
            Layer::new(Matrix::from_rows(&[vec![2.0]]), vec![1.0], Activation::Relu).unwrap();
        let net = DenseNet::from_layers(vec![layer], 0).unwrap();
        let f = net.forward(&Matrix::from_rows(&[vec![-3.0]])).unwrap();
        assert_eq!(f.repr().as_slice(), &[0.0]);
        assert_eq!(f.logits().as_slice(), &[0.0]);
    }

    #[test]
    fn forward_matches_hand_rolled_oracle() {
        let net = DenseNet::mlp(4, &[5], 3, 17).unwrap();
        let inputs = [
            vec![0.3, -1.2, 0.8, 2.0],
            vec![-0.5, 0.1, 0.0, 1.1],
            vec![1.0, 1.0, -1.0, -0.2],
        ];
        let f = net.forward(&Matrix::from_rows(&inputs)).unwrap();
        for (b, x) in inputs.iter().enumerate() {
            let (repr, logits) = hand_forward(&net, x);
            for (a, e) in f.repr().row(b).iter().zip(&repr) {
                assert!((a - e).abs() < 1e-10);
            }
            for (a, e) in f.logits().row(b).iter().zip(&logits) {
                assert!((a - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let net = DenseNet::mlp(4, &[5], 3, 1).unwrap();
        match net.forward(&Matrix::zeros(2, 3)) {
            Err(Error::Dimension {
                layer: 0,
                expected: 4,
                got: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chained_dims_are_validated() {
        let a = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Relu).unwrap();
        let b = Layer::new(Matrix::zeros(1, 4), vec![0.0; 1], Activation::Identity).unwrap();
        assert!(matches!(
            DenseNet::from_layers(vec![a, b], 0),
            Err(Error::Dimension { layer: 1, .. })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = DenseNet::mlp(3, &[4, 4], 2, 5).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]);
        let f = net.forward(&x).unwrap();
        let up = Upstream {
            repr: Some(Matrix::zeros(2, 4)),
            logits: Some(Matrix::zeros(2, 2)),
        };
        assert!(net.backward(&f, &up).unwrap().is_zero());
    }

    #[test]
    fn scalar_relu_chain_rule() {
        // f(w) = relu(w·x) with x, w > 0 → df/dw = x
        let layer =
            Layer::new(Matrix::from_rows(&[vec![0.7]]), vec![0.0], Activation::Relu).unwrap();
        let net = DenseNet::from_layers(vec![layer], 0).unwrap();
        let f = net.forward(&Matrix::from_rows(&[vec![2.5]])).unwrap();
        let up = Upstream {
            repr: None,
            logits: Some(Matrix::from_rows(&[vec![1.0]])),
        };
        let g = net.backward(&f, &up).unwrap();
        assert_eq!(g.layers[0].weights[(0, 0)], 2.5);
        assert_eq!(g.layers[0].bias[0], 1.0);
    }

    #[test]
    fn backward_rejects_foreign_record() {
        let a = DenseNet::mlp(3, &[4], 2, 0).unwrap();
        let b = DenseNet::mlp(3, &[5], 2, 0).unwrap();
        let f = a.forward(&Matrix::zeros(1, 3)).unwrap();
        assert!(matches!(
            b.backward(&f, &Upstream::default()),
            Err(Error::StaleForward(_))
        ));
    }

    #[test]
    fn parameters_round_trip() {
        let mut net = DenseNet::mlp(3, &[4], 2, 9).unwrap();
        let mut p = net.parameters();
        p[0] = 42.0;
        net.set_parameters(&p).unwrap();
        assert_eq!(net.layers()[0].weights[(0, 0)], 42.0);
        assert_eq!(net.parameters(), p);
    }
}
