//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use cmdg::data::{Domain, MultiDomainDataset};
use cmdg::linalg::squared_distance;
use cmdg::linalg::Matrix;
use cmdg::matchstore::ReprTable;
use cmdg::matchstore::{perfect_matches, MatchMatrix};
use cmdg::net::DenseNet;
use cmdg::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Every object of every class appears once in every domain, in a shuffled
/// order per domain. Inputs are i.i.d. uniform; the representation table is
/// either small integers (so distance ties occur) or continuous.
pub fn fixture(
    num_domains: usize,
    num_classes: usize,
    per_class: usize,
    dim: usize,
    integer_repr: bool,
    seed: u64,
) -> (MultiDomainDataset, ReprTable) {
    let mut rng = stream_rng(seed, 0xF1C5);
    let objects: Vec<(i64, usize)> = (0..num_classes * per_class)
        .map(|o| (o as i64, o / per_class))
        .collect();
    let mut domains = Vec::new();
    let mut reprs = Vec::new();
    for d in 0..num_domains {
        let mut order = objects.clone();
        order.shuffle(&mut rng);
        let n = order.len();
        let x = Matrix::from_vec(n, dim, (0..n * dim).map(|_| rng.gen()).collect());
        let repr = Matrix::from_vec(
            n,
            dim,
            (0..n * dim)
                .map(|_| {
                    if integer_repr {
                        rng.gen_range(0..3) as f64
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect(),
        );
        domains.push(Domain {
            name: format!("d{d}"),
            x,
            labels: order.iter().map(|&(_, c)| c).collect(),
            object_ids: order.iter().map(|&(o, _)| o).collect(),
            xc: None,
            xa: None,
        });
        reprs.push(repr);
    }
    (
        MultiDomainDataset::new(domains, num_classes).expect("valid fixture"),
        ReprTable { domains: reprs },
    )
}

/// A small relu network with every parameter (biases included) randomised,
/// so no unit sits exactly on its kink.
pub fn random_net(input: usize, seed: u64) -> DenseNet {
    let mut net = DenseNet::mlp(input, &[6, 4], 3, seed).expect("valid widths");
    let mut rng = stream_rng(seed, 0xC0FFEE);
    let params: Vec<f64> = net
        .parameters()
        .into_iter()
        .map(|p| p + rng.gen_range(-0.3..0.3))
        .collect();
    net.set_parameters(&params).expect("same length");
    net
}

/// Overlap by object identity: a learned pair hits when its counterpart
/// carries the anchor's object id.
pub fn overlap_oracle(ds: &MultiDomainDataset, learned: &MatchMatrix) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for row in &learned.rows {
        let b = learned.base_of(row);
        let object = ds.domains[b].object_ids[row.entries[b]];
        for (d, &k) in row.entries.iter().enumerate() {
            if d != b {
                total += 1;
                hits += usize::from(ds.domains[d].object_ids[k] == object);
            }
        }
    }
    100.0 * hits as f64 / total as f64
}

/// Ranks by sorting every same-class candidate on `(distance, index)`.
pub fn rank_oracle(ds: &MultiDomainDataset, repr: &ReprTable) -> (f64, f64) {
    let base = perfect_matches(ds).unwrap().base_domains;
    let mut ranks = Vec::new();
    for (c, &b) in base.iter().enumerate() {
        let dom = &ds.domains[b];
        for j in (0..dom.len()).filter(|&j| dom.labels[j] == c) {
            let object = dom.object_ids[j];
            for (d, other) in ds.domains.iter().enumerate() {
                if d == b {
                    continue;
                }
                let mut cands: Vec<(f64, usize)> = (0..other.len())
                    .filter(|&i| other.labels[i] == c)
                    .map(|i| (squared_distance(repr.row(b, j), repr.row(d, i)), i))
                    .collect();
                cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let pos = cands
                    .iter()
                    .position(|&(_, i)| other.object_ids[i] == object)
                    .unwrap();
                ranks.push(pos);
            }
        }
    }
    let n = ranks.len() as f64;
    let top10 = ranks.iter().filter(|&&r| r < 10).count() as f64;
    (100.0 * top10 / n, ranks.iter().sum::<usize>() as f64 / n)
}
