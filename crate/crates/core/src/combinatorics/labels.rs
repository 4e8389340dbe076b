use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Binary tree with leaves tagged 0 (position datum) or 1 (velocity datum).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeLabel {
    Leaf(u8),
    Node(Box<TreeLabel>, Box<TreeLabel>),
}

impl TreeLabel {
    pub fn leaf(tag: u8) -> Self {
        debug_assert!(tag <= 1);
        TreeLabel::Leaf(tag)
    }

    pub fn node(left: TreeLabel, right: TreeLabel) -> Self {
        TreeLabel::Node(Box::new(left), Box::new(right))
    }

    /// Smallest `k` with this label in `𝒟^(k)`.
    pub fn level(&self) -> usize {
        match self {
            TreeLabel::Leaf(_) => 1,
            TreeLabel::Node(l, r) => 1 + l.level().max(r.level()),
        }
    }

    /// Leaf tags in left-to-right order.
    pub fn leaves(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u8>) {
        match self {
            TreeLabel::Leaf(t) => out.push(*t),
            TreeLabel::Node(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn sigma(&self) -> usize {
        match self {
            TreeLabel::Leaf(_) => 1,
            TreeLabel::Node(l, r) => l.sigma() + r.sigma(),
        }
    }

    pub fn ell(&self) -> usize {
        match self {
            TreeLabel::Leaf(_) => 0,
            TreeLabel::Node(l, r) => l.ell() + r.ell() + 1,
        }
    }
}

impl fmt::Display for TreeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeLabel::Leaf(t) => write!(f, "{t}"),
            TreeLabel::Node(l, r) => write!(f, "({l},{r})"),
        }
    }
}

impl fmt::Debug for TreeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for TreeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Leaf count σ, nested-integral count ℓ, velocity-leaf count ħ and the
/// iterated-integral denominator 𝔉.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WeightRecord {
    pub sigma: usize,
    pub ell: usize,
    pub hbar: usize,
    pub frak_f: u64,
}

pub fn weights(label: &TreeLabel) -> WeightRecord {
    match label {
        TreeLabel::Leaf(t) => WeightRecord {
            sigma: 1,
            ell: 0,
            hbar: *t as usize,
            frak_f: 1,
        },
        TreeLabel::Node(l, r) => {
            let a = weights(l);
            let b = weights(r);
            let ell = a.ell + b.ell + 1;
            WeightRecord {
                sigma: a.sigma + b.sigma,
                ell,
                hbar: a.hbar + b.hbar,
                frak_f: ell as u64 * a.frak_f * b.frak_f,
            }
        }
    }
}

pub const MAX_LABEL_LEVEL: usize = 4;

/// `𝒟^(k) = {0, 1} ∪ 𝒟^(k−1) × 𝒟^(k−1)` with set semantics.
///
/// Order: the two leaves first, then pairs in the order of their components'
/// positions in `𝒟^(k−1)`.
pub fn enumerate_labels(k: usize) -> Result<Vec<TreeLabel>> {
    if !(1..=MAX_LABEL_LEVEL).contains(&k) {
        return Err(Error::OutOfRange {
            what: "label level",
            detail: format!("k = {k} not in 1..={MAX_LABEL_LEVEL}"),
        });
    }
    let mut level = vec![TreeLabel::leaf(0), TreeLabel::leaf(1)];
    for _ in 1..k {
        let mut next = vec![TreeLabel::leaf(0), TreeLabel::leaf(1)];
        next.reserve(level.len() * level.len());
        for a in &level {
            for b in &level {
                next.push(TreeLabel::node(a.clone(), b.clone()));
            }
        }
        level = next;
    }
    Ok(level)
}

pub const MAX_ALPHA_SIGMA: usize = 12;

/// The composition set `𝒜` of a label: `{(0)}` on a leaf and, on a node,
/// every concatenation of child compositions plus one unit vector.
pub fn alpha_set(label: &TreeLabel) -> Result<BTreeSet<Vec<u32>>> {
    let sigma = label.sigma();
    if sigma > MAX_ALPHA_SIGMA {
        return Err(Error::OutOfRange {
            what: "label size",
            detail: format!("σ = {sigma} exceeds {MAX_ALPHA_SIGMA}"),
        });
    }
    Ok(alpha_rec(label))
}

fn alpha_rec(label: &TreeLabel) -> BTreeSet<Vec<u32>> {
    match label {
        TreeLabel::Leaf(_) => BTreeSet::from([vec![0]]),
        TreeLabel::Node(l, r) => {
            let left = alpha_rec(l);
            let right = alpha_rec(r);
            let mut out = BTreeSet::new();
            for a in &left {
                for b in &right {
                    let mut v: Vec<u32> = a.iter().chain(b).copied().collect();
                    for i in 0..v.len() {
                        v[i] += 1;
                        out.insert(v.clone());
                        v[i] -= 1;
                    }
                }
            }
            out
        }
    }
}

/// [`alpha_set`] with multiplicities: each composition is counted once per
/// (left composition, right composition, unit vector) triple producing it.
pub fn alpha_multiset(label: &TreeLabel) -> Result<BTreeMap<Vec<u32>, u64>> {
    let sigma = label.sigma();
    if sigma > MAX_ALPHA_SIGMA {
        return Err(Error::OutOfRange {
            what: "label size",
            detail: format!("σ = {sigma} exceeds {MAX_ALPHA_SIGMA}"),
        });
    }
    Ok(alpha_multi_rec(label))
}

fn alpha_multi_rec(label: &TreeLabel) -> BTreeMap<Vec<u32>, u64> {
    match label {
        TreeLabel::Leaf(_) => BTreeMap::from([(vec![0], 1)]),
        TreeLabel::Node(l, r) => {
            let left = alpha_multi_rec(l);
            let right = alpha_multi_rec(r);
            let mut out = BTreeMap::new();
            for (a, ca) in &left {
                for (b, cb) in &right {
                    let mut v: Vec<u32> = a.iter().chain(b).copied().collect();
                    for i in 0..v.len() {
                        v[i] += 1;
                        *out.entry(v.clone()).or_insert(0) += ca * cb;
                        v[i] -= 1;
                    }
                }
            }
            out
        }
    }
}
