//! Branch inputs: one-hot ids, hierarchy paths and (standardized) feature rows.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::dataset::{FeatureTable, Hierarchy, MtpDataset, SideInfo, Triplet};
use crate::network::{CoupleInput, Input};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("id {id} out of range for {count} entities")]
    IdOutOfRange { id: usize, count: usize },
    #[error("target {0} is not a leaf of the hierarchy")]
    UnknownTarget(usize),
    #[error("standardization needs at least one training entity")]
    EmptyTrainingSet,
    #[error("standardization has {actual} features, table has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("bad encoder descriptor '{0}'")]
    BadDescriptor(String),
    #[error(
        "encoder descriptor '{descriptor}' does not match the supplied side information: {reason}"
    )]
    SideInfoMismatch { descriptor: String, reason: String },
}

pub type Result<T> = std::result::Result<T, EncodeError>;

pub fn encode_one_hot(id: usize, n: usize) -> Result<Vec<f64>> {
    if id >= n {
        return Err(EncodeError::IdOutOfRange { id, count: n });
    }
    let mut v = vec![0.0; n];
    v[id] = 1.0;
    Ok(v)
}

/// Ones at every non-root node on the path from the root to the target's leaf,
/// leaf included, in canonical node order with the root dropped.
pub fn encode_hierarchy(target: usize, h: &Hierarchy) -> Result<Vec<f64>> {
    let path = h
        .path_to(target)
        .ok_or(EncodeError::UnknownTarget(target))?;
    let mut v = vec![0.0; h.node_count() - 1];
    for node in path {
        v[node - 1] = 1.0;
    }
    Ok(v)
}

/// Read access to per-entity feature rows.
pub trait FeatureRows {
    fn dim(&self) -> usize;
    fn entity_count(&self) -> usize;
    fn row(&self, id: usize) -> Option<&[f64]>;
}

impl FeatureRows for FeatureTable {
    fn dim(&self) -> usize {
        FeatureTable::dim(self)
    }

    fn entity_count(&self) -> usize {
        FeatureTable::entity_count(self)
    }

    fn row(&self, id: usize) -> Option<&[f64]> {
        FeatureTable::row(self, id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

const DEGENERATE_STD: f64 = 1e-12;

/// Per-feature mean and population standard deviation over the given
/// entities only. Features with (near) zero spread keep a divisor of 1.
pub fn fit_standardization<F: FeatureRows + ?Sized>(
    features: &F,
    train_ids: &[usize],
) -> Result<Standardization> {
    let ids: BTreeSet<usize> = train_ids.iter().copied().collect();
    if ids.is_empty() {
        return Err(EncodeError::EmptyTrainingSet);
    }
    let dim = features.dim();
    let count = features.entity_count();
    let rows = ids
        .iter()
        .map(|&id| {
            features
                .row(id)
                .ok_or(EncodeError::IdOutOfRange { id, count })
        })
        .collect::<Result<Vec<&[f64]>>>()?;

    let n = rows.len() as f64;
    let mut means = vec![0.0; dim];
    for row in &rows {
        for (m, x) in means.iter_mut().zip(row.iter()) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);

    let mut std_devs = vec![0.0; dim];
    for row in &rows {
        for ((s, x), m) in std_devs.iter_mut().zip(row.iter()).zip(&means) {
            *s += (x - m) * (x - m);
        }
    }
    for s in std_devs.iter_mut() {
        *s = (*s / n).sqrt();
        if *s < DEGENERATE_STD {
            *s = 1.0;
        }
    }
    Ok(Standardization { means, std_devs })
}

pub fn encode_tabular(
    id: usize,
    features: &FeatureTable,
    s: Option<&Standardization>,
) -> Result<Vec<f64>> {
    let row = features.row(id).ok_or(EncodeError::IdOutOfRange {
        id,
        count: features.entity_count(),
    })?;
    match s {
        None => Ok(row.to_vec()),
        Some(s) => {
            if s.means.len() != row.len() {
                return Err(EncodeError::DimensionMismatch {
                    expected: row.len(),
                    actual: s.means.len(),
                });
            }
            Ok(row
                .iter()
                .zip(&s.means)
                .zip(&s.std_devs)
                .map(|((x, m), sd)| (x - m) / sd)
                .collect())
        }
    }
}

/// Turns an entity id into the input vector of one network branch.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    OneHot {
        n: usize,
    },
    HierarchyPath(Arc<Hierarchy>),
    Tabular {
        features: Arc<FeatureTable>,
        standardization: Option<Standardization>,
    },
}

impl Encoder {
    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::OneHot { n } => *n,
            Encoder::HierarchyPath(h) => h.node_count() - 1,
            Encoder::Tabular { features, .. } => features.dim(),
        }
    }

    /// One-hot and hierarchy encodings come back sparse.
    pub fn encode(&self, id: usize) -> Result<Input> {
        match self {
            Encoder::OneHot { n } => {
                if id >= *n {
                    return Err(EncodeError::IdOutOfRange { id, count: *n });
                }
                Ok(Input::sparse(*n, vec![(id, 1.0)]))
            }
            Encoder::HierarchyPath(h) => {
                let path = h.path_to(id).ok_or(EncodeError::UnknownTarget(id))?;
                Ok(Input::sparse(
                    h.node_count() - 1,
                    path.into_iter().map(|p| (p - 1, 1.0)).collect(),
                ))
            }
            Encoder::Tabular {
                features,
                standardization,
            } => encode_tabular(id, features, standardization.as_ref()).map(Input::Dense),
        }
    }

    /// Number of ids this encoder accepts.
    pub fn entity_count(&self) -> usize {
        match self {
            Encoder::OneHot { n } => *n,
            Encoder::HierarchyPath(h) => h.target_count(),
            Encoder::Tabular { features, .. } => features.entity_count(),
        }
    }

    /// Encoder for one axis: one-hot without side information, hierarchy path
    /// for a hierarchy, tabular features otherwise. `train_ids` are the entity
    /// ids seen in training; standardization is fit on them alone.
    pub fn for_side(
        side: &SideInfo,
        entity_count: usize,
        train_ids: &[usize],
        standardize: bool,
    ) -> Result<Self> {
        match side {
            SideInfo::None => Ok(Encoder::OneHot { n: entity_count }),
            SideInfo::Hierarchy(h) => Ok(Encoder::HierarchyPath(h.clone())),
            SideInfo::Features(f) => Encoder::tabular(f.clone(), train_ids, standardize),
        }
    }

    pub fn tabular(
        features: Arc<FeatureTable>,
        train_ids: &[usize],
        standardize: bool,
    ) -> Result<Self> {
        let standardization = if standardize {
            Some(fit_standardization(features.as_ref(), train_ids)?)
        } else {
            None
        };
        Ok(Encoder::Tabular {
            features,
            standardization,
        })
    }

    /// Single-line description, enough to rebuild the encoder given the same
    /// side information.
    pub fn descriptor(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            Encoder::OneHot { n } => format!("one_hot {n}"),
            Encoder::HierarchyPath(h) => format!("hierarchy {}", h.node_count() - 1),
            Encoder::Tabular {
                features,
                standardization: None,
            } => format!("tabular {} raw", features.dim()),
            Encoder::Tabular {
                features,
                standardization: Some(s),
            } => format!(
                "tabular {} standardized {} {}",
                features.dim(),
                join(&s.means),
                join(&s.std_devs)
            ),
        }
    }

    pub fn from_descriptor(descriptor: &str, side: &SideInfo) -> Result<Self> {
        let bad = || EncodeError::BadDescriptor(descriptor.to_string());
        let mismatch = |reason: String| EncodeError::SideInfoMismatch {
            descriptor: descriptor.chars().take(40).collect(),
            reason,
        };
        let parts: Vec<&str> = descriptor.split_whitespace().collect();
        let dim: usize = parts.get(1).and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        match (parts[0], side) {
            ("one_hot", _) => Ok(Encoder::OneHot { n: dim }),
            ("hierarchy", SideInfo::Hierarchy(h)) => {
                if h.node_count() - 1 != dim {
                    return Err(mismatch(format!(
                        "hierarchy has {} positions",
                        h.node_count() - 1
                    )));
                }
                Ok(Encoder::HierarchyPath(h.clone()))
            }
            ("tabular", SideInfo::Features(f)) => {
                if f.dim() != dim {
                    return Err(mismatch(format!("feature table has {} columns", f.dim())));
                }
                let standardization = match parts.get(2) {
                    Some(&"raw") => None,
                    Some(&"standardized") => {
                        let list = |s: Option<&&str>| -> Result<Vec<f64>> {
                            s.ok_or_else(bad)?
                                .split(',')
                                .map(|x| x.parse::<f64>().map_err(|_| bad()))
                                .collect()
                        };
                        let means = list(parts.get(3))?;
                        let std_devs = list(parts.get(4))?;
                        if means.len() != dim || std_devs.len() != dim {
                            return Err(bad());
                        }
                        Some(Standardization { means, std_devs })
                    }
                    _ => return Err(bad()),
                };
                Ok(Encoder::Tabular {
                    features: f.clone(),
                    standardization,
                })
            }
            ("hierarchy", _) => Err(mismatch("a target hierarchy is required".into())),
            ("tabular", _) => Err(mismatch("a feature table is required".into())),
            _ => Err(bad()),
        }
    }
}

/// The encoders of all branches of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleEncoder {
    pub instance: Encoder,
    pub target: Encoder,
    /// Keyed by triplet index.
    pub dyadic: Option<Encoder>,
}

impl CoupleEncoder {
    /// Default encoders for a dataset, with standardization (when requested)
    /// fit on the entities and couples of `train` only.
    pub fn for_dataset(ds: &MtpDataset, train: &[usize], standardize: bool) -> Result<Self> {
        let triplets = ds.interactions.triplets();
        let train_instances: Vec<usize> = train.iter().map(|&k| triplets[k].instance).collect();
        let train_targets: Vec<usize> = train.iter().map(|&k| triplets[k].target).collect();
        let instance = Encoder::for_side(
            &ds.instance_side,
            ds.interactions.n(),
            &train_instances,
            standardize,
        )?;
        let target = Encoder::for_side(
            &ds.target_side,
            ds.interactions.m(),
            &train_targets,
            standardize,
        )?;
        let dyadic = match &ds.dyadic_side {
            Some(f) => Some(Encoder::tabular(f.clone(), train, standardize)?),
            None => None,
        };
        Ok(Self {
            instance,
            target,
            dyadic,
        })
    }

    pub fn encode(&self, triplet_index: usize, t: &Triplet) -> Result<CoupleInput> {
        Ok(CoupleInput {
            instance: self.instance.encode(t.instance)?,
            target: self.target.encode(t.target)?,
            dyadic: match &self.dyadic {
                Some(e) => Some(e.encode(triplet_index)?),
                None => None,
            },
        })
    }
}
