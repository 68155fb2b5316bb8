use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::MultiDomainDataset;
use crate::rng::Rng;

/// Domain-balanced ERM batches: each batch takes `per_domain` samples from
/// every domain. Smaller domains are reshuffled and reused so every batch
/// stays balanced; the epoch length follows the largest domain.
pub(crate) fn balanced_batches(
    ds: &MultiDomainDataset,
    per_domain: usize,
    rng: &mut Rng,
) -> Vec<Vec<(usize, usize)>> {
    let largest = ds.domains.iter().map(|d| d.len()).max().unwrap_or(0);
    if largest == 0 {
        return Vec::new();
    }
    let steps = largest.div_ceil(per_domain);
    let mut streams: Vec<Vec<usize>> = ds
        .domains
        .iter()
        .map(|d| {
            let mut order = Vec::with_capacity(steps * per_domain);
            if d.is_empty() {
                return order;
            }
            while order.len() < steps * per_domain {
                let mut idx: Vec<usize> = (0..d.len()).collect();
                idx.shuffle(rng);
                order.extend(idx);
            }
            order
        })
        .collect();
    let mut out = Vec::with_capacity(steps);
    for s in 0..steps {
        let take = per_domain.min(largest - s * per_domain);
        let mut batch = Vec::with_capacity(take * ds.num_domains());
        for (d, stream) in streams.iter_mut().enumerate() {
            if stream.is_empty() {
                continue;
            }
            for k in 0..take {
                batch.push((d, stream[s * per_domain + k]));
            }
        }
        out.push(batch);
    }
    out
}

/// Shuffled row indices chunked into batches of `batch_rows` (the last batch
/// may be smaller).
pub(crate) fn row_batches(rows: usize, batch_rows: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(rng);
    order.chunks(batch_rows).map(<[usize]>::to_vec).collect()
}

/// `count` samples drawn uniformly (with replacement) from all domains.
pub(crate) fn uniform_samples(
    ds: &MultiDomainDataset,
    count: usize,
    rng: &mut Rng,
) -> Vec<(usize, usize)> {
    let total = ds.len();
    (0..count)
        .map(|_| {
            let mut k = rng.gen_range(0..total);
            let mut d = 0;
            while k >= ds.domains[d].len() {
                k -= ds.domains[d].len();
                d += 1;
            }
            (d, k)
        })
        .collect()
}
