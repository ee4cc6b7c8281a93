//! Train/validation/test partitions of the known triplets.
//!
//! - Setting A holds out random couples.
//! - Setting B holds out whole instances (rows).
//! - Setting C holds out whole targets (columns).
//! - Setting D holds out a block of instances and targets together. Couples
//!   that pair a held-out entity with a training entity are discarded.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::InteractionData;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split configuration: {0}")]
    InvalidConfig(String),
    #[error("setting {setting} needs at least {needed} {axis}, found {found}")]
    InsufficientEntities {
        setting: ValidationSetting,
        axis: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("the {0} partition is empty")]
    EmptyPartition(Partition),
    #[error("split file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("split does not cover triplets 0..{expected}: {message}")]
    Coverage { expected: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SplitError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValidationSetting {
    A,
    B,
    C,
    D,
}

impl fmt::Display for ValidationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ValidationSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ValidationSetting::A),
            "B" => Ok(ValidationSetting::B),
            "C" => Ok(ValidationSetting::C),
            "D" => Ok(ValidationSetting::D),
            other => Err(format!("unknown validation setting '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Validation,
    Test,
    Discarded,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "val",
            Partition::Test => "test",
            Partition::Discarded => "discarded",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Partition::Train),
            "val" | "validation" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            "discarded" => Ok(Partition::Discarded),
            other => Err(format!("unknown partition '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub setting: ValidationSetting,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(
        setting: ValidationSetting,
        test_fraction: f64,
        val_fraction: f64,
        seed: u64,
    ) -> Self {
        Self {
            setting,
            test_fraction,
            val_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SplitError::InvalidConfig(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.val_fraction >= 0.0 && self.val_fraction < 1.0) {
            return Err(SplitError::InvalidConfig(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.test_fraction + self.val_fraction >= 1.0 {
            return Err(SplitError::InvalidConfig(
                "test and validation fractions must sum to less than 1".into(),
            ));
        }
        Ok(())
    }
}

/// Disjoint triplet index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub setting: ValidationSetting,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub discarded: Vec<usize>,
}

impl Split {
    /// Builds a split from explicit index sets, checking that they partition
    /// `0..triplet_count`.
    pub fn from_parts(
        setting: ValidationSetting,
        triplet_count: usize,
        mut train: Vec<usize>,
        mut validation: Vec<usize>,
        mut test: Vec<usize>,
        mut discarded: Vec<usize>,
    ) -> Result<Self> {
        let mut seen = vec![false; triplet_count];
        for part in [&mut train, &mut validation, &mut test, &mut discarded] {
            part.sort_unstable();
            for &i in part.iter() {
                let slot = seen.get_mut(i).ok_or_else(|| SplitError::Coverage {
                    expected: triplet_count,
                    message: format!("index {i} out of range"),
                })?;
                if *slot {
                    return Err(SplitError::Coverage {
                        expected: triplet_count,
                        message: format!("index {i} assigned twice"),
                    });
                }
                *slot = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(SplitError::Coverage {
                expected: triplet_count,
                message: format!("index {missing} unassigned"),
            });
        }
        Ok(Self {
            setting,
            train,
            validation,
            test,
            discarded,
        })
    }

    pub fn partition(&self, which: Partition) -> &[usize] {
        match which {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
            Partition::Discarded => &self.discarded,
        }
    }

    pub fn triplet_count(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len() + self.discarded.len()
    }

    /// Partition of every triplet index, in index order.
    pub fn assignments(&self) -> Vec<Partition> {
        let mut out = vec![Partition::Train; self.triplet_count()];
        for which in [Partition::Validation, Partition::Test, Partition::Discarded] {
            for &i in self.partition(which) {
                out[i] = which;
            }
        }
        out
    }

    /// Export format: one `<partition>,<triplet_index>` line per triplet, in
    /// index order. The setting is recorded in a leading `#setting=` line.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "#setting={}", self.setting)?;
        for (i, p) in self.assignments().into_iter().enumerate() {
            writeln!(w, "{p},{i}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        fs::write(path, buf).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn parse(text: &str, triplet_count: usize) -> Result<Self> {
        let mut setting = ValidationSetting::A;
        let mut parts: [Vec<usize>; 4] = Default::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("setting=") {
                    setting = v.parse().map_err(|message| SplitError::Parse {
                        line: idx + 1,
                        message,
                    })?;
                }
                continue;
            }
            let (p, i) = line.split_once(',').ok_or_else(|| SplitError::Parse {
                line: idx + 1,
                message: "expected '<partition>,<index>'".into(),
            })?;
            let p: Partition = p.parse().map_err(|message| SplitError::Parse {
                line: idx + 1,
                message,
            })?;
            let i: usize = i.trim().parse().map_err(|e| SplitError::Parse {
                line: idx + 1,
                message: format!("bad index '{i}': {e}"),
            })?;
            parts[p as usize].push(i);
        }
        let [train, validation, test, discarded] = parts;
        Self::from_parts(setting, triplet_count, train, validation, test, discarded)
    }

    pub fn load(path: impl AsRef<Path>, triplet_count: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, triplet_count)
    }
}

/// `ceil(fraction * count)`, tolerant of representation error in the product
/// (0.1 * 30 must give 3, not 4).
fn ceil_count(fraction: f64, count: usize) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    let raw = fraction * count as f64;
    let rounded = raw.round();
    let c = if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    };
    (c as usize).clamp(1, count.max(1))
}

/// Samples `amount` distinct elements of `pool`, returned as a sorted set.
fn sample_from(pool: &[usize], amount: usize, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
    let amount = amount.min(pool.len());
    index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|k| pool[k])
        .collect()
}

fn require(
    setting: ValidationSetting,
    axis: &'static str,
    needed: usize,
    found: usize,
) -> Result<()> {
    if found < needed {
        Err(SplitError::InsufficientEntities {
            setting,
            axis,
            needed,
            found,
        })
    } else {
        Ok(())
    }
}

pub fn make_split(data: &InteractionData, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(SplitError::EmptyPartition(Partition::Train));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let setting = cfg.setting;
    let triplets = data.triplets();
    let total = triplets.len();

    let (train, validation, test, discarded) = match setting {
        ValidationSetting::A => {
            let all: Vec<usize> = (0..total).collect();
            let test = sample_from(&all, ceil_count(cfg.test_fraction, total), &mut rng);
            let rest: Vec<usize> = all.iter().copied().filter(|i| !test.contains(i)).collect();
            let validation = sample_from(&rest, ceil_count(cfg.val_fraction, total), &mut rng);
            let train: Vec<usize> = rest
                .into_iter()
                .filter(|i| !validation.contains(i))
                .collect();
            (
                train,
                validation.into_iter().collect(),
                test.into_iter().collect(),
                Vec::new(),
            )
        }
        ValidationSetting::B | ValidationSetting::C => {
            let by_instance = setting == ValidationSetting::B;
            let (count, axis) = if by_instance {
                (data.n(), "instances")
            } else {
                (data.m(), "targets")
            };
            require(setting, axis, 2, count)?;
            let ids: Vec<usize> = (0..count).collect();
            let held_out = sample_from(&ids, ceil_count(cfg.test_fraction, count), &mut rng);
            let rest: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|i| !held_out.contains(i))
                .collect();
            let val_ids = sample_from(&rest, ceil_count(cfg.val_fraction, count), &mut rng);
            let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (k, t) in triplets.iter().enumerate() {
                let id = if by_instance { t.instance } else { t.target };
                if held_out.contains(&id) {
                    test.push(k);
                } else if val_ids.contains(&id) {
                    validation.push(k);
                } else {
                    train.push(k);
                }
            }
            (train, validation, test, Vec::new())
        }
        ValidationSetting::D => {
            require(setting, "instances", 2, data.n())?;
            require(setting, "targets", 2, data.m())?;
            let instances: Vec<usize> = (0..data.n()).collect();
            let targets: Vec<usize> = (0..data.m()).collect();
            let test_i = sample_from(
                &instances,
                ceil_count(cfg.test_fraction, data.n()),
                &mut rng,
            );
            let test_t = sample_from(&targets, ceil_count(cfg.test_fraction, data.m()), &mut rng);
            let rest_i: Vec<usize> = instances
                .iter()
                .copied()
                .filter(|i| !test_i.contains(i))
                .collect();
            let rest_t: Vec<usize> = targets
                .iter()
                .copied()
                .filter(|t| !test_t.contains(t))
                .collect();
            let val_i = sample_from(
                &rest_i,
                ceil_count(cfg.val_fraction, rest_i.len()),
                &mut rng,
            );
            let val_t = sample_from(
                &rest_t,
                ceil_count(cfg.val_fraction, rest_t.len()),
                &mut rng,
            );

            let (mut train, mut validation, mut test, mut discarded) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (k, t) in triplets.iter().enumerate() {
                let (ti, tt) = (test_i.contains(&t.instance), test_t.contains(&t.target));
                let (vi, vt) = (val_i.contains(&t.instance), val_t.contains(&t.target));
                if ti && tt {
                    test.push(k);
                } else if ti || tt {
                    discarded.push(k);
                } else if vi && vt {
                    validation.push(k);
                } else if vi || vt {
                    discarded.push(k);
                } else {
                    train.push(k);
                }
            }
            (train, validation, test, discarded)
        }
    };

    if test.is_empty() {
        return Err(SplitError::EmptyPartition(Partition::Test));
    }
    if train.is_empty() {
        return Err(SplitError::EmptyPartition(Partition::Train));
    }
    if setting == ValidationSetting::A {
        warn_untrained_entities(data, &train);
    }
    Split::from_parts(setting, total, train, validation, test, discarded)
}

fn warn_untrained_entities(data: &InteractionData, train: &[usize]) {
    let mut seen_i = vec![false; data.n()];
    let mut seen_t = vec![false; data.m()];
    for &k in train {
        let t = data.triplets()[k];
        seen_i[t.instance] = true;
        seen_t[t.target] = true;
    }
    let missing_i = seen_i.iter().filter(|s| !**s).count();
    let missing_t = seen_t.iter().filter(|s| !**s).count();
    if missing_i + missing_t > 0 {
        warn!("{missing_i} instances and {missing_t} targets have no training triplets");
    }
}

/// The couples a trained model is asked to score: exactly the test couples.
pub fn predictable_pairs(data: &InteractionData, split: &Split) -> Result<Vec<(usize, usize)>> {
    if split.test.is_empty() {
        return Err(SplitError::EmptyPartition(Partition::Test));
    }
    Ok(split
        .test
        .iter()
        .map(|&k| {
            let t = data.triplets()[k];
            (t.instance, t.target)
        })
        .collect())
}
