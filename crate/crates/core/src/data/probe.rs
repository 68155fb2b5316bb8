use crate::linalg::Matrix;
use crate::losses::cross_entropy;
use crate::net::{Activation, DenseNet, Layer, OptimizerState, Sgd, Upstream};
use crate::Result;

/// Trains a softmax-linear classifier on `(features, labels)` with full-batch
/// SGD and returns its accuracy on each evaluation set. Used as a generator
/// self-test (e.g. how predictive the domain features are).
pub fn linear_probe(
    train: (&Matrix, &[usize]),
    eval: &[(&Matrix, &[usize])],
    num_classes: usize,
    epochs: usize,
) -> Result<Vec<f64>> {
    let (x, y) = train;
    // standardize with training statistics
    let dim = x.cols();
    let mut mean = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    for r in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v / x.rows() as f64;
        }
    }
    for r in 0..x.rows() {
        for (j, v) in x.row(r).iter().enumerate() {
            sd[j] += (v - mean[j]).powi(2) / x.rows() as f64;
        }
    }
    let sd: Vec<f64> = sd.into_iter().map(|v| v.sqrt().max(1e-8)).collect();
    let standardize = |m: &Matrix| {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - mean[j]) / sd[j];
            }
        }
        out
    };
    let xs = standardize(x);
    let layer = Layer::new(
        Matrix::zeros(num_classes, dim),
        vec![0.0; num_classes],
        Activation::Identity,
    )?;
    let mut net = DenseNet::from_layers(vec![layer], 0)?;
    let mut opt = Sgd::new(OptimizerState {
        learning_rate: 0.5,
        weight_decay: 0.0,
        momentum: 0.9,
    })?;
    for _ in 0..epochs {
        let f = net.forward(&xs)?;
        let (_, g) = cross_entropy(f.logits(), y)?;
        let grads = net.backward(
            &f,
            &Upstream {
                repr: None,
                logits: Some(g),
            },
        )?;
        opt.step(&mut net, &grads)?;
    }
    eval.iter()
        .map(|(m, labels)| {
            let logits = net.logits(&standardize(m))?;
            Ok(crate::metrics::argmax_accuracy(&logits, labels))
        })
        .collect()
}
