//! Cross-domain match matrices.
//!
//! For every class a base domain is chosen (the one with the most samples of
//! that class). Each row of a [`MatchMatrix`] holds one base-domain anchor and
//! one same-class counterpart in every other domain. Rows are ordered by class,
//! then by anchor index.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::MultiDomainDataset;
use crate::linalg::{squared_distance, Matrix};
use crate::net::DenseNet;
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Perfect,
    Inferred,
    /// Row-wise mixture of perfect and random rows.
    Mixed,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Perfect => "perfect",
            Strategy::Inferred => "inferred",
            Strategy::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRow {
    pub class: usize,
    /// Sample index into each domain; the base-domain column is the anchor.
    pub entries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchMatrix {
    pub strategy: Strategy,
    pub num_domains: usize,
    /// Base domain of each class.
    pub base_domains: Vec<usize>,
    pub rows: Vec<MatchRow>,
    pub seed: Option<u64>,
}

impl MatchMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn base_of(&self, row: &MatchRow) -> usize {
        self.base_domains[row.class]
    }

    pub fn anchor(&self, row: &MatchRow) -> usize {
        row.entries[self.base_of(row)]
    }

    /// Checks index validity, class homogeneity and anchor uniqueness.
    pub fn validate(&self, ds: &MultiDomainDataset) -> Result<()> {
        if self.num_domains != ds.num_domains() {
            return Err(Error::Mismatch(format!(
                "matrix has {} domains, dataset {}",
                self.num_domains,
                ds.num_domains()
            )));
        }
        if self.base_domains.len() != ds.num_classes {
            return Err(Error::Mismatch("base-domain table size".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (r, row) in self.rows.iter().enumerate() {
            if row.entries.len() != self.num_domains {
                return Err(Error::Mismatch(format!("row {r} has wrong width")));
            }
            for (d, &i) in row.entries.iter().enumerate() {
                let dom = &ds.domains[d];
                if i >= dom.len() {
                    return Err(Error::Mismatch(format!(
                        "row {r}: index {i} out of range for domain {d}"
                    )));
                }
                if dom.labels[i] != row.class {
                    return Err(Error::Mismatch(format!(
                        "row {r}: domain {d} entry has class {}, row class {}",
                        dom.labels[i], row.class
                    )));
                }
            }
            if !seen.insert((row.class, self.anchor(row))) {
                return Err(Error::Mismatch(format!("row {r}: duplicate anchor")));
            }
        }
        Ok(())
    }

    /// `class,domain_0,...,domain_{K-1}` followed by one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for d in 0..self.num_domains {
            let _ = write!(out, ",domain_{d}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.class);
            for e in &row.entries {
                let _ = write!(out, ",{e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self, domain_names: &[String]) -> MatchSidecar {
        MatchSidecar {
            strategy: self.strategy,
            seed: self.seed,
            base_domains: self.base_domains.clone(),
            domain_names: domain_names.to_vec(),
        }
    }

    pub fn from_csv(csv: &str, sidecar: &MatchSidecar) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: "match csv".into(),
            reason,
        };
        let mut lines = csv.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let k = cols.len().saturating_sub(1);
        let expected: Vec<String> = std::iter::once("class".to_string())
            .chain((0..k).map(|d| format!("domain_{d}")))
            .collect();
        if cols != expected || k == 0 {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
            if vals.len() != k + 1 {
                return Err(bad(format!("line {}: expected {} fields", n + 2, k + 1)));
            }
            rows.push(MatchRow {
                class: vals[0],
                entries: vals[1..].to_vec(),
            });
        }
        Ok(Self {
            strategy: sidecar.strategy,
            num_domains: k,
            base_domains: sidecar.base_domains.clone(),
            rows,
            seed: sidecar.seed,
        })
    }
}

/// JSON companion of the match CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSidecar {
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub base_domains: Vec<usize>,
    pub domain_names: Vec<String>,
}

/// Per-domain representation matrices, row-aligned with the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprTable {
    pub domains: Vec<Matrix>,
}

impl ReprTable {
    pub fn from_net(net: &DenseNet, ds: &MultiDomainDataset) -> Result<Self> {
        let domains = ds
            .domains
            .iter()
            .map(|d| net.represent(&d.x))
            .collect::<Result<_>>()?;
        Ok(Self { domains })
    }

    /// Ground-truth causal features as the representation.
    pub fn from_causal(ds: &MultiDomainDataset) -> Result<Self> {
        let domains = ds
            .domains
            .iter()
            .map(|d| {
                d.xc.clone().ok_or_else(|| {
                    Error::Mismatch(format!("domain {} has no causal features", d.name))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { domains })
    }

    pub fn row(&self, domain: usize, index: usize) -> &[f64] {
        self.domains[domain].row(index)
    }
}

/// Domain with the most samples of each class; ties go to the lowest index.
pub fn base_domain_per_class(ds: &MultiDomainDataset) -> Result<Vec<usize>> {
    ds.class_counts()
        .iter()
        .enumerate()
        .map(|(class, counts)| {
            let mut best = 0;
            for (d, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = d;
                }
            }
            if counts.get(best).copied().unwrap_or(0) == 0 {
                return Err(Error::Mismatch(format!(
                    "class {class} absent from every domain"
                )));
            }
            Ok(best)
        })
        .collect()
}

fn require_all_classes(ds: &MultiDomainDataset) -> Result<()> {
    let missing: Vec<(usize, usize)> = ds
        .class_counts()
        .iter()
        .enumerate()
        .flat_map(|(c, counts)| {
            counts
                .iter()
                .enumerate()
                .filter(|(_, &n)| n == 0)
                .map(move |(d, _)| (c, d))
        })
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingClass(missing))
    }
}

/// `pools[class][domain]`: ascending sample indices.
fn class_pools(ds: &MultiDomainDataset) -> Vec<Vec<Vec<usize>>> {
    (0..ds.num_classes)
        .map(|c| ds.domains.iter().map(|d| d.indices_of_class(c)).collect())
        .collect()
}

/// One uniformly drawn same-class counterpart per anchor and other domain.
pub fn random_matches(ds: &MultiDomainDataset, seed: u64) -> Result<MatchMatrix> {
    require_all_classes(ds)?;
    let base = base_domain_per_class(ds)?;
    let pools = class_pools(ds);
    let mut rng = stream_rng(seed, stream::RANDOM_MATCH);
    let mut rows = Vec::new();
    for (c, per_domain) in pools.iter().enumerate() {
        for &anchor in &per_domain[base[c]] {
            let entries = (0..ds.num_domains())
                .map(|d| {
                    if d == base[c] {
                        anchor
                    } else {
                        per_domain[d][rng.gen_range(0..per_domain[d].len())]
                    }
                })
                .collect();
            rows.push(MatchRow { class: c, entries });
        }
    }
    Ok(MatchMatrix {
        strategy: Strategy::Random,
        num_domains: ds.num_domains(),
        base_domains: base,
        rows,
        seed: Some(seed),
    })
}

/// Rows pair each base-domain anchor with the observations of the same object
/// in every other domain.
pub fn perfect_matches(ds: &MultiDomainDataset) -> Result<MatchMatrix> {
    if !ds.has_object_ids() {
        return Err(Error::Mismatch("perfect matches need object ids".into()));
    }
    let base = base_domain_per_class(ds)?;
    let lookup: Vec<HashMap<i64, usize>> = ds
        .domains
        .iter()
        .map(|d| {
            d.object_ids
                .iter()
                .enumerate()
                .map(|(i, &o)| (o, i))
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for (c, &b) in base.iter().enumerate() {
        let dom = &ds.domains[b];
        for anchor in dom.indices_of_class(c) {
            let object = dom.object_ids[anchor];
            let entries = (0..ds.num_domains())
                .map(|d| {
                    lookup[d]
                        .get(&object)
                        .copied()
                        .ok_or(Error::MissingObject { object, domain: d })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(MatchRow { class: c, entries });
        }
    }
    let m = MatchMatrix {
        strategy: Strategy::Perfect,
        num_domains: ds.num_domains(),
        base_domains: base,
        rows,
        seed: None,
    };
    m.validate(ds)?;
    Ok(m)
}

/// Nearest same-class neighbour of every anchor in every other domain under
/// squared Euclidean distance. Many-to-one matches are kept; ties go to the
/// lowest index.
pub fn infer_matches(ds: &MultiDomainDataset, repr: &ReprTable) -> Result<MatchMatrix> {
    require_all_classes(ds)?;
    if repr.domains.len() != ds.num_domains() {
        return Err(Error::Mismatch(
            "representation table / dataset domains".into(),
        ));
    }
    let base = base_domain_per_class(ds)?;
    let pools = class_pools(ds);
    let mut rows = Vec::new();
    for (c, per_domain) in pools.iter().enumerate() {
        let b = base[c];
        for &anchor in &per_domain[b] {
            let a = repr.row(b, anchor);
            let entries = (0..ds.num_domains())
                .map(|d| {
                    if d == b {
                        return anchor;
                    }
                    let mut best = per_domain[d][0];
                    let mut best_dist = f64::INFINITY;
                    for &cand in &per_domain[d] {
                        let dist = squared_distance(a, repr.row(d, cand));
                        if dist < best_dist {
                            best = cand;
                            best_dist = dist;
                        }
                    }
                    best
                })
                .collect();
            rows.push(MatchRow { class: c, entries });
        }
    }
    Ok(MatchMatrix {
        strategy: Strategy::Inferred,
        num_domains: ds.num_domains(),
        base_domains: base,
        rows,
        seed: None,
    })
}

/// Recomputes inferred matches from the current representation when
/// `epoch` is a multiple of `period`.
pub fn refresh(
    ds: &MultiDomainDataset,
    net: &DenseNet,
    period: usize,
    epoch: usize,
) -> Result<Option<MatchMatrix>> {
    if period == 0 {
        return Err(Error::Config("refresh period must be ≥ 1".into()));
    }
    if !epoch.is_multiple_of(period) {
        return Ok(None);
    }
    infer_matches(ds, &ReprTable::from_net(net, ds)?).map(Some)
}

/// Rows are perfect with probability `fraction`, random otherwise. The pure
/// endpoints return exactly [`perfect_matches`] / [`random_matches`].
pub fn mixed_matches(ds: &MultiDomainDataset, fraction: f64, seed: u64) -> Result<MatchMatrix> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1]")));
    }
    if fraction == 1.0 {
        return perfect_matches(ds);
    }
    let random = random_matches(ds, seed)?;
    if fraction == 0.0 {
        return Ok(random);
    }
    let perfect = perfect_matches(ds)?;
    if perfect.rows.len() != random.rows.len() {
        return Err(Error::Mismatch(
            "perfect and random matrices cover different anchors".into(),
        ));
    }
    let mut rng = stream_rng(seed, stream::FRACTION);
    let rows = perfect
        .rows
        .into_iter()
        .zip(random.rows)
        .map(|(p, r)| if rng.gen::<f64>() < fraction { p } else { r })
        .collect();
    Ok(MatchMatrix {
        strategy: Strategy::Mixed,
        num_domains: ds.num_domains(),
        base_domains: random.base_domains,
        rows,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn fixture(counts: &[&[usize]], dim: usize, seed: u64) -> MultiDomainDataset {
        // counts[domain][class]
        let mut rng = stream_rng(seed, 1234);
        let mut next_obj = 0i64;
        let domains = counts
            .iter()
            .enumerate()
            .map(|(d, per_class)| {
                let mut labels = Vec::new();
                for (c, &n) in per_class.iter().enumerate() {
                    labels.extend(std::iter::repeat_n(c, n));
                }
                let n = labels.len();
                let ids = (0..n)
                    .map(|_| {
                        next_obj += 1;
                        next_obj
                    })
                    .collect();
                Domain {
                    name: format!("d{d}"),
                    x: Matrix::from_vec(n, dim, (0..n * dim).map(|_| rng.gen()).collect()),
                    labels,
                    object_ids: ids,
                    xc: None,
                    xa: None,
                }
            })
            .collect();
        MultiDomainDataset::new(domains, counts[0].len()).unwrap()
    }

    fn shared_objects(k: usize, per_class: usize, classes: usize) -> MultiDomainDataset {
        let n = per_class * classes;
        let domains = (0..k)
            .map(|d| Domain {
                name: format!("d{d}"),
                x: Matrix::from_vec(n, 1, (0..n).map(|i| (i * (d + 1)) as f64).collect()),
                labels: (0..n).map(|i| i % classes).collect(),
                object_ids: (0..n as i64).collect(),
                xc: None,
                xa: None,
            })
            .collect();
        MultiDomainDataset::new(domains, classes).unwrap()
    }

    #[test]
    fn balanced_ties_go_to_lowest_domain() {
        let ds = shared_objects(3, 4, 2);
        assert_eq!(base_domain_per_class(&ds).unwrap(), vec![0, 0]);
    }

    #[test]
    fn argmax_count_domain() {
        let ds = fixture(&[&[30, 5], &[30, 5], &[50, 5]], 2, 0);
        assert_eq!(base_domain_per_class(&ds).unwrap()[0], 2);
    }

    #[test]
    fn base_domain_matches_brute_force() {
        let ds = fixture(&[&[3, 7, 2], &[5, 7, 9], &[5, 1, 9]], 2, 4);
        let expected: Vec<usize> = (0..3)
            .map(|c| {
                let counts: Vec<usize> = ds
                    .domains
                    .iter()
                    .map(|d| d.labels.iter().filter(|&&y| y == c).count())
                    .collect();
                let max = *counts.iter().max().unwrap();
                counts.iter().position(|&n| n == max).unwrap()
            })
            .collect();
        assert_eq!(base_domain_per_class(&ds).unwrap(), expected);
        assert_eq!(expected, vec![1, 0, 1]);
    }

    #[test]
    fn random_rows_count_and_homogeneity() {
        let ds = fixture(&[&[3, 7], &[5, 2], &[4, 4]], 2, 1);
        let m = random_matches(&ds, 3).unwrap();
        // Σ_c max_d count(c, d) = 5 + 7
        assert_eq!(m.len(), 12);
        m.validate(&ds).unwrap();
        assert_eq!(m, random_matches(&ds, 3).unwrap());
        assert_ne!(m, random_matches(&ds, 4).unwrap());
    }

    #[test]
    fn random_with_single_candidates_is_perfect() {
        let ds = shared_objects(3, 1, 2);
        assert_eq!(
            random_matches(&ds, 9).unwrap().rows,
            perfect_matches(&ds).unwrap().rows
        );
    }

    #[test]
    fn missing_class_is_listed() {
        let ds = fixture(&[&[3, 0], &[2, 2]], 2, 0);
        match random_matches(&ds, 0) {
            Err(Error::MissingClass(v)) => assert_eq!(v, vec![(1, 0)]),
            other => panic!("{other:?}"),
        }
        let r = ReprTable {
            domains: ds.domains.iter().map(|d| d.x.clone()).collect(),
        };
        assert!(matches!(
            infer_matches(&ds, &r),
            Err(Error::MissingClass(_))
        ));
    }

    #[test]
    fn perfect_rows_share_objects() {
        let ds = shared_objects(4, 5, 3);
        let m = perfect_matches(&ds).unwrap();
        for row in &m.rows {
            let objs: Vec<i64> = row
                .entries
                .iter()
                .enumerate()
                .map(|(d, &i)| ds.domains[d].object_ids[i])
                .collect();
            assert!(objs.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn perfect_requires_every_object() {
        let mut ds = shared_objects(2, 2, 2);
        ds.domains[1].object_ids[0] = 99;
        assert!(matches!(
            perfect_matches(&ds),
            Err(Error::MissingObject {
                object: 0,
                domain: 1
            })
        ));
    }

    #[test]
    fn constant_representation_picks_lowest_index() {
        let ds = shared_objects(3, 4, 2);
        let r = ReprTable {
            domains: ds
                .domains
                .iter()
                .map(|d| Matrix::zeros(d.len(), 3))
                .collect(),
        };
        let m = infer_matches(&ds, &r).unwrap();
        for row in &m.rows {
            for d in 1..3 {
                assert_eq!(row.entries[d], ds.domains[d].indices_of_class(row.class)[0]);
            }
        }
    }

    #[test]
    fn inferred_equals_brute_force_scan() {
        let ds = fixture(&[&[4, 3], &[3, 4], &[3, 3]], 3, 11);
        let r = ReprTable {
            domains: ds.domains.iter().map(|d| d.x.clone()).collect(),
        };
        let m = infer_matches(&ds, &r).unwrap();
        for row in &m.rows {
            let b = m.base_of(row);
            let a = row.entries[b];
            for d in 0..3 {
                if d == b {
                    continue;
                }
                // exhaustive: every same-class candidate, full sort by (dist, index)
                let mut cands: Vec<(f64, usize)> = (0..ds.domains[d].len())
                    .filter(|&i| ds.domains[d].labels[i] == row.class)
                    .map(|i| {
                        let dist: f64 = r.domains[b]
                            .row(a)
                            .iter()
                            .zip(r.domains[d].row(i))
                            .map(|(x, y)| (x - y).powi(2))
                            .sum();
                        (dist, i)
                    })
                    .collect();
                cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
                assert_eq!(row.entries[d], cands[0].1);
            }
        }
    }

    #[test]
    fn refresh_schedule() {
        let ds = shared_objects(2, 3, 2);
        let net = DenseNet::mlp(1, &[4], 2, 0).unwrap();
        let fired: Vec<usize> = (1..=10)
            .filter(|&e| refresh(&ds, &net, 3, e).unwrap().is_some())
            .collect();
        assert_eq!(fired, vec![3, 6, 9]);
        assert!((1..=10).all(|e| refresh(&ds, &net, 1, e).unwrap().is_some()));
        assert!((1..=10).all(|e| refresh(&ds, &net, 11, e).unwrap().is_none()));
        assert!(refresh(&ds, &net, 0, 1).is_err());
    }

    #[test]
    fn mixed_endpoints() {
        let ds = shared_objects(3, 6, 2);
        assert_eq!(
            mixed_matches(&ds, 1.0, 5).unwrap(),
            perfect_matches(&ds).unwrap()
        );
        assert_eq!(
            mixed_matches(&ds, 0.0, 5).unwrap(),
            random_matches(&ds, 5).unwrap()
        );
        let half = mixed_matches(&ds, 0.5, 5).unwrap();
        half.validate(&ds).unwrap();
        assert_eq!(half.strategy, Strategy::Mixed);
    }

    #[test]
    fn csv_layout() {
        let ds = shared_objects(3, 2, 2);
        let m = perfect_matches(&ds).unwrap();
        let csv = m.to_csv();
        assert!(csv.starts_with("class,domain_0,domain_1,domain_2\n0,0,0,0\n"));
        let back = MatchMatrix::from_csv(&csv, &m.sidecar(&ds.domain_names())).unwrap();
        assert_eq!(back, m);
        assert!(MatchMatrix::from_csv("klass,domain_0\n", &m.sidecar(&[])).is_err());
    }
}
