use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

/// Object id used when the generating object is unknown.
pub const UNKNOWN_OBJECT: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    /// One sample per row.
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub object_ids: Vec<i64>,
    /// Ground-truth causal features; kept for oracle evaluation only.
    pub xc: Option<Matrix>,
    /// Ground-truth domain-dependent features, when the generator has them.
    #[serde(default)]
    pub xa: Option<Matrix>,
}

impl Domain {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of samples with the given label, ascending.
    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (y == class).then_some(i))
            .collect()
    }

    fn subset(&self, indices: &[usize]) -> Domain {
        Domain {
            name: self.name.clone(),
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            object_ids: indices.iter().map(|&i| self.object_ids[i]).collect(),
            xc: self.xc.as_ref().map(|m| m.select_rows(indices)),
            xa: self.xa.as_ref().map(|m| m.select_rows(indices)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDomainDataset {
    pub domains: Vec<Domain>,
    pub num_classes: usize,
    /// Echo of the generator configuration, if any.
    #[serde(default)]
    pub generator: serde_json::Value,
}

impl MultiDomainDataset {
    pub fn new(domains: Vec<Domain>, num_classes: usize) -> Result<Self> {
        let ds = Self {
            domains,
            num_classes,
            generator: serde_json::Value::Null,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.input_dim();
        for d in &self.domains {
            if d.x.rows() != d.labels.len() || d.object_ids.len() != d.labels.len() {
                return Err(Error::Mismatch(format!(
                    "domain {}: {} inputs, {} labels, {} object ids",
                    d.name,
                    d.x.rows(),
                    d.labels.len(),
                    d.object_ids.len()
                )));
            }
            if d.x.cols() != dim {
                return Err(Error::Mismatch(format!(
                    "domain {} has input width {}, expected {dim}",
                    d.name,
                    d.x.cols()
                )));
            }
            if let Some(&label) = d.labels.iter().find(|&&y| y >= self.num_classes) {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes: self.num_classes,
                });
            }
            if let Some(xc) = &d.xc {
                if xc.rows() != d.len() {
                    return Err(Error::Mismatch(format!("domain {}: x_c row count", d.name)));
                }
            }
            if let Some(xa) = &d.xa {
                if xa.rows() != d.len() {
                    return Err(Error::Mismatch(format!("domain {}: x_a row count", d.name)));
                }
            }
        }
        Ok(())
    }

    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn input_dim(&self) -> usize {
        self.domains.first().map_or(0, |d| d.x.cols())
    }

    pub fn len(&self) -> usize {
        self.domains.iter().map(Domain::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.name.clone()).collect()
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.domains
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    /// `counts[class][domain]`.
    pub fn class_counts(&self) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; self.num_domains()]; self.num_classes];
        for (d, dom) in self.domains.iter().enumerate() {
            for &y in &dom.labels {
                counts[y][d] += 1;
            }
        }
        counts
    }

    pub fn has_object_ids(&self) -> bool {
        !self.is_empty()
            && self
                .domains
                .iter()
                .all(|d| d.object_ids.iter().all(|&o| o != UNKNOWN_OBJECT))
    }

    pub fn has_causal_features(&self) -> bool {
        self.domains.iter().all(|d| d.xc.is_some())
    }

    /// Keeps the named domains, in the given order.
    pub fn select_domains(&self, names: &[String]) -> Result<Self> {
        let domains = names
            .iter()
            .map(|n| Ok(self.domains[self.domain_index(n)?].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domains,
            num_classes: self.num_classes,
            generator: self.generator.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: MultiDomainDataset,
    pub val: MultiDomainDataset,
    pub test: MultiDomainDataset,
}

/// Splits into source (train/val) and target (test) domains.
///
/// Validation samples come only from source domains. When every source domain
/// carries the same set of known object ids, whole objects are held out so the
/// validation set keeps its cross-domain perfect matches and no object leaks
/// between train and validation. Otherwise each domain is sampled
/// independently.
pub fn split(
    ds: &MultiDomainDataset,
    train_domains: &[String],
    test_domains: &[String],
    val_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "val_fraction must lie in [0, 1), got {val_fraction}"
        )));
    }
    if train_domains.is_empty() {
        return Err(Error::Config(
            "at least one training domain required".into(),
        ));
    }
    let train_set: BTreeSet<_> = train_domains.iter().collect();
    if let Some(d) = test_domains.iter().find(|d| train_set.contains(d)) {
        return Err(Error::Config(format!(
            "domain `{d}` is both train and test"
        )));
    }
    let sources = ds.select_domains(train_domains)?;
    let test = ds.select_domains(test_domains)?;
    let mut rng = stream_rng(seed, stream::SPLIT);

    let shared_objects = sources.has_object_ids() && {
        let sets: Vec<BTreeSet<i64>> = sources
            .domains
            .iter()
            .map(|d| d.object_ids.iter().copied().collect())
            .collect();
        sets.windows(2).all(|w| w[0] == w[1])
            && sources
                .domains
                .iter()
                .all(|d| d.object_ids.len() == sets[0].len())
    };

    let mut train = Vec::with_capacity(sources.num_domains());
    let mut val = Vec::with_capacity(sources.num_domains());
    if shared_objects {
        // group objects by class so the held-out share is per class
        let first = &sources.domains[0];
        let mut by_class: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
        for (i, &o) in first.object_ids.iter().enumerate() {
            by_class.entry(first.labels[i]).or_default().push(o);
        }
        let mut held = BTreeSet::new();
        let total = first.len();
        let want = (val_fraction * total as f64).round() as usize;
        let mut pooled: Vec<i64> = Vec::new();
        for objs in by_class.values_mut() {
            objs.shuffle(&mut rng);
            let k = (val_fraction * objs.len() as f64).floor() as usize;
            held.extend(objs[..k].iter().copied());
            pooled.extend(objs[k..].iter().copied());
        }
        pooled.shuffle(&mut rng);
        for o in pooled {
            if held.len() >= want {
                break;
            }
            held.insert(o);
        }
        for d in &sources.domains {
            let (v, t): (Vec<usize>, Vec<usize>) =
                (0..d.len()).partition(|&i| held.contains(&d.object_ids[i]));
            train.push(d.subset(&t));
            val.push(d.subset(&v));
        }
    } else {
        for d in &sources.domains {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.shuffle(&mut rng);
            let k = (val_fraction * d.len() as f64).round() as usize;
            let mut v = idx[..k].to_vec();
            let mut t = idx[k..].to_vec();
            v.sort_unstable();
            t.sort_unstable();
            train.push(d.subset(&t));
            val.push(d.subset(&v));
        }
    }
    let wrap = |domains| MultiDomainDataset {
        domains,
        num_classes: ds.num_classes,
        generator: ds.generator.clone(),
    };
    Ok(Split {
        train: wrap(train),
        val: wrap(val),
        test,
    })
}
