use super::{DenseNet, Gradients};
use crate::{Error, Result};

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn` evaluates the loss and its analytic gradients for a given set of
/// parameters; the batch is whatever the closure captures. Returns the largest
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)` over all
/// parameters.
pub fn grad_check<F>(net: &DenseNet, epsilon: f64, mut loss_fn: F) -> Result<f64>
where
    F: FnMut(&DenseNet) -> Result<(f64, Gradients)>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be > 0".into()));
    }
    let (_, analytic) = loss_fn(net)?;
    let analytic = analytic.flatten();
    let base = net.parameters();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        params[i] = base[i] + epsilon;
        probe.set_parameters(&params)?;
        let (plus, _) = loss_fn(&probe)?;
        params[i] = base[i] - epsilon;
        probe.set_parameters(&params)?;
        let (minus, _) = loss_fn(&probe)?;
        params[i] = base[i];
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::net::{Activation, Layer, Upstream};

    #[test]
    fn linear_squared_loss_is_exact() {
        let w = Matrix::from_rows(&[vec![0.5, -1.0, 0.25], vec![1.5, 0.2, -0.7]]);
        let layer = Layer::new(w, vec![0.1, -0.3], Activation::Identity).unwrap();
        let net = DenseNet::from_layers(vec![layer], 0).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, -1.0], vec![0.3, -0.4, 0.9]]);
        let target = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.5]]);
        let err = grad_check(&net, 1e-5, |n| {
            let f = n.forward(&x)?;
            let mut g = f.logits().clone();
            let mut loss = 0.0;
            for (gv, t) in g.as_mut_slice().iter_mut().zip(target.as_slice()) {
                let r = *gv - t;
                loss += 0.5 * r * r;
                *gv = r;
            }
            let grads = n.backward(
                &f,
                &Upstream {
                    repr: None,
                    logits: Some(g),
                },
            )?;
            Ok((loss, grads))
        })
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let net = DenseNet::mlp(2, &[2], 2, 0).unwrap();
        assert!(grad_check(&net, 0.0, |n| Ok((0.0, Gradients::zeros_like(n)))).is_err());
    }
}
