//! Finite-difference verification of the analytic gradients of every loss:
//! cross-entropy, cross-entropy plus match penalty, and the contrastive loss,
//! on randomly initialised small networks.
//!
//! `cargo run --release --example gradient_check`

use cmdg::data::{generate_scm, ScmConfig};
use cmdg::losses::{
    contrastive_loss, cross_entropy, matched_erm_loss, ContrastiveConfig, MatchPenaltyConfig,
    MatchedBatch,
};
use cmdg::matchstore::perfect_matches;
use cmdg::net::{grad_check, DenseNet, Upstream};
use cmdg::rng::stream_rng;
use rand::Rng;

/// A small relu network with every parameter (biases included) randomised,
/// so no unit sits exactly on its kink.
fn random_net(seed: u64) -> cmdg::Result<DenseNet> {
    let mut net = DenseNet::mlp(5, &[6, 4], 2, seed)?;
    let mut rng = stream_rng(seed, 0xC0FFEE);
    let params: Vec<f64> = net
        .parameters()
        .into_iter()
        .map(|p| p + rng.gen_range(-0.3..0.3))
        .collect();
    net.set_parameters(&params)?;
    Ok(net)
}

fn main() -> cmdg::Result<()> {
    let mut worst = [0.0f64; 3];
    for seed in 0..20 {
        let ds = generate_scm(&ScmConfig {
            num_domains: 3,
            objects_per_class: 3,
            dim_x: 5,
            test_domains: vec![],
            seed,
            ..Default::default()
        })?;
        let matches = perfect_matches(&ds)?;
        let batch = MatchedBatch::from_rows(&ds, &matches, &[0, 1, 2, 3]);
        let net = random_net(seed)?;

        let ce = grad_check(&net, 1e-5, |n| {
            let f = n.forward(&batch.inputs)?;
            let (loss, g) = cross_entropy(f.logits(), &batch.labels)?;
            let up = Upstream {
                repr: None,
                logits: Some(g),
            };
            Ok((loss, n.backward(&f, &up)?))
        })?;
        let matched = grad_check(&net, 1e-5, |n| {
            let out = matched_erm_loss(n, &batch, &MatchPenaltyConfig { lambda: 0.7 })?;
            Ok((out.total, out.grads))
        })?;
        let contrastive = grad_check(&net, 1e-5, |n| {
            let f = n.forward(&batch.inputs)?;
            let out = contrastive_loss(
                f.repr(),
                &batch.labels,
                &batch.domains,
                &batch.groups,
                &ContrastiveConfig { tau: 0.5 },
            )?;
            let up = Upstream {
                repr: Some(out.grad),
                logits: None,
            };
            Ok((out.loss, n.backward(&f, &up)?))
        })?;
        for (w, e) in worst.iter_mut().zip([ce, matched, contrastive]) {
            *w = w.max(e);
        }
    }
    println!("max relative error over 20 random networks");
    println!("  cross-entropy        {:.2e}", worst[0]);
    println!("  matched (λ = 0.7)    {:.2e}", worst[1]);
    println!("  contrastive (τ = .5) {:.2e}", worst[2]);
    Ok(())
}
