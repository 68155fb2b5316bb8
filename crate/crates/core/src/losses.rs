//! Training objectives and their gradients.
//!
//! Every loss returns its value together with the gradient with respect to
//! its direct inputs (logits or representations); [`matched_erm_loss`] and
//! [`hybrid_loss`] additionally run the backward pass through the network.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::MultiDomainDataset;
use crate::linalg::{dot, norm, squared_distance, Matrix};
use crate::matchstore::{MatchMatrix, ReprTable};
use crate::net::{DenseNet, Gradients, Upstream};
use crate::{Error, Result};

/// Norms below this are treated as the zero vector by the cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPenaltyConfig {
    pub lambda: f64,
}

impl MatchPenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be ≥ 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub tau: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self { tau: 0.05 }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let classes = logits.cols();
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: classes,
        });
    }
    let n = labels.len();
    let mut grad = Matrix::zeros(n, classes);
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let row = logits.row(b);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[y];
        let g = grad.row_mut(b);
        for (j, z) in row.iter().enumerate() {
            g[j] = (z - lse).exp() / n as f64;
        }
        g[y] -= 1.0 / n as f64;
    }
    Ok((total / n as f64, grad))
}

/// One match-matrix row realised in a batch: positions of the base-domain
/// anchor and of its counterparts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowGroup {
    pub anchor: usize,
    pub others: Vec<usize>,
}

impl RowGroup {
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.anchor).chain(self.others.iter().copied())
    }
}

/// Mean squared Euclidean distance over (anchor, counterpart) pairs, and its
/// gradient with respect to the representation rows. Zero when no pair exists.
pub fn match_penalty(repr: &Matrix, groups: &[RowGroup]) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(repr.rows(), repr.cols());
    let pairs: usize = groups.iter().map(|g| g.others.len()).sum();
    if pairs == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / pairs as f64;
    let mut total = 0.0;
    for g in groups {
        for &o in &g.others {
            let (a, b) = (repr.row(g.anchor), repr.row(o));
            total += squared_distance(a, b);
            let diff: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(x, y)| 2.0 * scale * (x - y))
                .collect();
            for (v, d) in grad.row_mut(g.anchor).iter_mut().zip(&diff) {
                *v += d;
            }
            for (v, d) in grad.row_mut(o).iter_mut().zip(&diff) {
                *v -= d;
            }
        }
    }
    (total * scale, grad)
}

/// Match penalty evaluated over a whole match matrix.
pub fn match_penalty_table(repr: &ReprTable, matches: &MatchMatrix) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for row in &matches.rows {
        let b = matches.base_of(row);
        let a = repr.row(b, row.entries[b]);
        for (d, &i) in row.entries.iter().enumerate() {
            if d != b {
                total += squared_distance(a, repr.row(d, i));
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// A flattened training batch. `parts` are contiguous ranges whose mean
/// cross-entropies are summed; `groups` index into the flattened rows.
#[derive(Debug, Clone)]
pub struct MatchedBatch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    pub parts: Vec<Range<usize>>,
    pub groups: Vec<RowGroup>,
    /// Oracle rows for the hybrid objective.
    pub oracle_groups: Vec<RowGroup>,
}

impl MatchedBatch {
    /// Flattens the selected match rows; each row contributes its K samples.
    pub fn from_rows(ds: &MultiDomainDataset, matches: &MatchMatrix, rows: &[usize]) -> Self {
        let mut b = Self::empty(ds.input_dim());
        let groups = b.push_rows(ds, matches, rows);
        b.close_part();
        b.groups = groups;
        b
    }

    pub fn empty(input_dim: usize) -> Self {
        Self {
            inputs: Matrix::zeros(0, input_dim),
            labels: Vec::new(),
            domains: Vec::new(),
            parts: Vec::new(),
            groups: Vec::new(),
            oracle_groups: Vec::new(),
        }
    }

    /// Appends rows without closing the current part; returns their groups.
    pub fn push_rows(
        &mut self,
        ds: &MultiDomainDataset,
        matches: &MatchMatrix,
        rows: &[usize],
    ) -> Vec<RowGroup> {
        let mut samples = Vec::new();
        let mut groups = Vec::with_capacity(rows.len());
        let start = self.labels.len();
        for &r in rows {
            let row = &matches.rows[r];
            let base = matches.base_of(row);
            let mut anchor = 0;
            let mut others = Vec::with_capacity(row.entries.len() - 1);
            for (d, &i) in row.entries.iter().enumerate() {
                let pos = start + samples.len();
                samples.push((d, i));
                if d == base {
                    anchor = pos;
                } else {
                    others.push(pos);
                }
            }
            groups.push(RowGroup { anchor, others });
        }
        self.push_samples(ds, &samples);
        groups
    }

    /// Appends `(domain, index)` samples to the current part.
    pub fn push_samples(&mut self, ds: &MultiDomainDataset, samples: &[(usize, usize)]) {
        let mut data = std::mem::replace(&mut self.inputs, Matrix::zeros(0, 0)).into_vec();
        let cols = ds.input_dim();
        for &(d, i) in samples {
            data.extend_from_slice(ds.domains[d].x.row(i));
            self.labels.push(ds.domains[d].labels[i]);
            self.domains.push(d);
        }
        self.inputs = Matrix::from_vec(self.labels.len(), cols, data);
    }

    /// Ends the current part at the current length.
    pub fn close_part(&mut self) {
        let start = self.parts.last().map_or(0, |p| p.end);
        if self.labels.len() > start {
            self.parts.push(start..self.labels.len());
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loss value with its components and the parameter gradients.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: f64,
    pub cross_entropy: f64,
    /// Unweighted penalty of each term, in the order given.
    pub penalties: Vec<f64>,
    /// Fraction of correctly classified samples in the batch.
    pub accuracy: f64,
    pub grads: Gradients,
}

impl LossBreakdown {
    pub fn penalty(&self) -> f64 {
        self.penalties.first().copied().unwrap_or(0.0)
    }
}

fn penalized_loss(
    net: &DenseNet,
    batch: &MatchedBatch,
    terms: &[(f64, &[RowGroup])],
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::EmptySplit("empty training batch".into()));
    }
    let fwd = net.forward(&batch.inputs)?;
    let logits = fwd.logits();
    let mut logit_grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut ce = 0.0;
    for part in &batch.parts {
        let sub = logits.select_rows(&part.clone().collect::<Vec<_>>());
        let (l, g) = cross_entropy(&sub, &batch.labels[part.clone()])?;
        ce += l;
        for (k, r) in part.clone().enumerate() {
            logit_grad.row_mut(r).copy_from_slice(g.row(k));
        }
    }
    let mut total = ce;
    let mut penalties = Vec::with_capacity(terms.len());
    let mut repr_grad: Option<Matrix> = None;
    for &(lambda, groups) in terms {
        let (p, g) = match_penalty(fwd.repr(), groups);
        penalties.push(p);
        total += lambda * p;
        if lambda != 0.0 {
            let acc = repr_grad.get_or_insert_with(|| Matrix::zeros(g.rows(), g.cols()));
            for (a, v) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += lambda * v;
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let correct = (0..logits.rows())
        .filter(|&r| argmax(logits.row(r)) == batch.labels[r])
        .count();
    let grads = net.backward(
        &fwd,
        &Upstream {
            repr: repr_grad,
            logits: Some(logit_grad),
        },
    )?;
    Ok(LossBreakdown {
        total,
        cross_entropy: ce,
        penalties,
        accuracy: correct as f64 / batch.len() as f64,
        grads,
    })
}

/// Cross-entropy over the batch plus `λ ·` match penalty over `batch.groups`.
/// The cross-entropy of each part is a mean over that part, so every domain
/// column of a matched part contributes equally.
pub fn matched_erm_loss(
    net: &DenseNet,
    batch: &MatchedBatch,
    cfg: &MatchPenaltyConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    penalized_loss(net, batch, &[(cfg.lambda, &batch.groups)])
}

/// Cross-entropy plus a penalty on inferred rows (`inferred`) and a second
/// penalty on oracle rows (`oracle`).
pub fn hybrid_loss(
    net: &DenseNet,
    batch: &MatchedBatch,
    inferred: &MatchPenaltyConfig,
    oracle: &MatchPenaltyConfig,
) -> Result<LossBreakdown> {
    inferred.validate()?;
    oracle.validate()?;
    penalized_loss(
        net,
        batch,
        &[
            (inferred.lambda, &batch.groups),
            (oracle.lambda, &batch.oracle_groups),
        ],
    )
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Output of [`contrastive_loss`].
#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    /// Gradient with respect to the representation rows.
    pub grad: Matrix,
    pub pairs: usize,
    /// Positive pairs dropped because their anchor had no negative.
    pub skipped: usize,
}

/// Cosine similarity; zero when either vector is (numerically) zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na < COSINE_EPS || nb < COSINE_EPS {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Multi-domain contrastive loss.
///
/// Every ordered pair of samples sharing a match row (hence same class,
/// different domains) is a positive pair `(j, k)`. Its loss is
/// `−log( e^{s_jk/τ} / (e^{s_jk/τ} + Σ_{i: y_i ≠ y_j} e^{s_ji/τ}) )` with `s`
/// the cosine similarity over the batch; the result is the mean over pairs.
pub fn contrastive_loss(
    repr: &Matrix,
    labels: &[usize],
    domains: &[usize],
    groups: &[RowGroup],
    cfg: &ContrastiveConfig,
) -> Result<ContrastiveOutput> {
    cfg.validate()?;
    let n = repr.rows();
    if labels.len() != n || domains.len() != n {
        return Err(Error::Mismatch("labels/domains length vs batch".into()));
    }
    let dim = repr.cols();
    let norms: Vec<f64> = (0..n).map(|i| norm(repr.row(i))).collect();
    let live: Vec<bool> = norms.iter().map(|&v| v >= COSINE_EPS).collect();
    let mut unit = Matrix::zeros(n, dim);
    for i in 0..n {
        if live[i] {
            for (u, v) in unit.row_mut(i).iter_mut().zip(repr.row(i)) {
                *u = v / norms[i];
            }
        }
    }
    let mut sim = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = if live[i] && live[j] {
                dot(unit.row(i), unit.row(j))
            } else {
                0.0
            };
            sim[(i, j)] = s;
            sim[(j, i)] = s;
        }
    }
    let negatives: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| labels[i] != labels[j]).collect())
        .collect();

    // dL/ds for each ordered (j, i) similarity entry
    let mut ds_grad = Matrix::zeros(n, n);
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    let mut positives = Vec::new();
    for g in groups {
        let members: Vec<usize> = g.members().collect();
        for &j in &members {
            for &k in &members {
                if j != k && domains[j] != domains[k] {
                    positives.push((j, k));
                }
            }
        }
    }
    let inv_tau = 1.0 / cfg.tau;
    let mut logits = Vec::new();
    for &(j, k) in &positives {
        let negs = &negatives[j];
        if negs.is_empty() {
            skipped += 1;
            continue;
        }
        logits.clear();
        logits.push(sim[(j, k)] * inv_tau);
        logits.extend(negs.iter().map(|&i| sim[(j, i)] * inv_tau));
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - logits[0];
        pairs += 1;
        let p_pos = (logits[0] - lse).exp();
        ds_grad[(j, k)] += (p_pos - 1.0) * inv_tau;
        for (t, &i) in negs.iter().enumerate() {
            ds_grad[(j, i)] += (logits[t + 1] - lse).exp() * inv_tau;
        }
    }
    if pairs == 0 {
        return Err(Error::NoPositivePairs { skipped });
    }
    let scale = 1.0 / pairs as f64;

    // ∂s_ab/∂r_a = (û_b − s_ab û_a) / |r_a|
    let mut grad = Matrix::zeros(n, dim);
    for a in 0..n {
        if !live[a] {
            continue;
        }
        let ua = unit.row(a).to_vec();
        let mut acc = vec![0.0; dim];
        for b in 0..n {
            let w = ds_grad[(a, b)] + ds_grad[(b, a)];
            if w == 0.0 || !live[b] {
                continue;
            }
            let s = sim[(a, b)];
            for ((acc, ub), ua) in acc.iter_mut().zip(unit.row(b)).zip(&ua) {
                *acc += w * (ub - s * ua);
            }
        }
        let f = scale / norms[a];
        for (g, v) in grad.row_mut(a).iter_mut().zip(&acc) {
            *g = f * v;
        }
    }
    Ok(ContrastiveOutput {
        loss: total * scale,
        grad,
        pairs,
        skipped,
    })
}
