//! Interaction matrices and side information.
//!
//! An interaction matrix is stored as a list of known `(instance, target, score)`
//! triplets together with the matrix dimensions. Side information for either
//! axis is a dense feature table, a target hierarchy, or nothing at all (in
//! which case entities are later identified by one-hot vectors).

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate cell ({0}, {1})")]
    DuplicateCell(usize, usize),
    #[error("score {2} at cell ({0}, {1}) violates the declared score type")]
    ScoreTypeViolation(usize, usize, f64),
    #[error("id {id} out of range (count {count})")]
    IdOutOfRange { id: usize, count: usize },
    #[error("row {0} has a different length than the header")]
    RaggedRow(usize),
    #[error("feature ids are not dense: id {0} is missing")]
    MissingId(usize),
    #[error("duplicate feature row for id {0}")]
    DuplicateId(usize),
    #[error("non-finite value for id {0}, column {1}")]
    NonFiniteValue(usize, usize),
    #[error("hierarchy contains a cycle")]
    CycleDetected,
    #[error("node {0} has more than one parent")]
    MultipleParents(String),
    #[error("target {0} has no leaf in the hierarchy")]
    UnmappedTarget(usize),
    #[error("target leaf {0} has children")]
    LeafHasChildren(String),
    #[error("node {0} is not reachable from the root")]
    Disconnected(String),
    #[error("target leaf {name} refers to target {target}, but only {m} targets exist")]
    LeafOutOfRange {
        name: String,
        target: usize,
        m: usize,
    },
    #[error("{what} has {actual} entities, expected {expected}")]
    EntityCountMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("interaction data is empty")]
    Empty,
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Kind of value stored in the score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreType {
    Binary,
    Nominal,
    Ordinal,
    Real,
}

impl ScoreType {
    pub fn accepts(self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self {
            ScoreType::Binary => value == 0.0 || value == 1.0,
            ScoreType::Nominal | ScoreType::Ordinal => value.fract() == 0.0,
            ScoreType::Real => true,
        }
    }

    /// Narrowest type that accepts every value: binary, then ordinal, then real.
    /// Nominal data is never inferred; it has to be declared.
    pub fn infer<'a>(values: impl IntoIterator<Item = &'a f64>) -> ScoreType {
        let mut ty = ScoreType::Binary;
        for &v in values {
            if ty == ScoreType::Binary && !ScoreType::Binary.accepts(v) {
                ty = ScoreType::Ordinal;
            }
            if ty == ScoreType::Ordinal && !ScoreType::Ordinal.accepts(v) {
                return ScoreType::Real;
            }
        }
        ty
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreType::Binary => "binary",
            ScoreType::Nominal => "nominal",
            ScoreType::Ordinal => "ordinal",
            ScoreType::Real => "real",
        }
    }
}

impl fmt::Display for ScoreType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(ScoreType::Binary),
            "nominal" => Ok(ScoreType::Nominal),
            "ordinal" => Ok(ScoreType::Ordinal),
            "real" | "real-valued" => Ok(ScoreType::Real),
            other => Err(format!("unknown score type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub instance: usize,
    pub target: usize,
    pub score: f64,
}

impl Triplet {
    pub fn new(instance: usize, target: usize, score: f64) -> Self {
        Self {
            instance,
            target,
            score,
        }
    }
}

/// The known entries of an `n x m` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionData {
    n: usize,
    m: usize,
    triplets: Vec<Triplet>,
    score_type: ScoreType,
}

impl InteractionData {
    /// Validates ranges, uniqueness and score type. Triplet order is kept as
    /// given; it defines the triplet indices used by splits.
    pub fn new(n: usize, m: usize, triplets: Vec<Triplet>, score_type: ScoreType) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triplets.len());
        for t in &triplets {
            if t.instance >= n {
                return Err(DatasetError::IdOutOfRange {
                    id: t.instance,
                    count: n,
                });
            }
            if t.target >= m {
                return Err(DatasetError::IdOutOfRange {
                    id: t.target,
                    count: m,
                });
            }
            if !seen.insert((t.instance, t.target)) {
                return Err(DatasetError::DuplicateCell(t.instance, t.target));
            }
            if !score_type.accepts(t.score) {
                return Err(DatasetError::ScoreTypeViolation(
                    t.instance, t.target, t.score,
                ));
            }
        }
        Ok(Self {
            n,
            m,
            triplets,
            score_type,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn score_type(&self) -> ScoreType {
        self.score_type
    }

    pub fn is_fully_observed(&self) -> bool {
        self.triplets.len() == self.n * self.m
    }

    /// Writes the data in triplet format, always including the dimension headers.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "#n={}", self.n)?;
        writeln!(w, "#m={}", self.m)?;
        for t in &self.triplets {
            if self.score_type == ScoreType::Real {
                writeln!(w, "{},{},{}", t.instance, t.target, t.score)?;
            } else {
                writeln!(w, "{},{},{}", t.instance, t.target, t.score as i64)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(io_err(path))?;
        fs::write(path, buf).map_err(io_err(path))
    }

    /// Parses triplet-format text. See [`load_triplets`].
    pub fn parse(text: &str, score_type: Option<ScoreType>) -> Result<Self> {
        let mut n_header = None;
        let mut m_header = None;
        let mut triplets = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                let parse_dim = |v: &str| {
                    v.trim().parse::<usize>().map_err(|e| DatasetError::Parse {
                        line: line_no,
                        message: format!("bad header value '{v}': {e}"),
                    })
                };
                if let Some(v) = header.strip_prefix("n=") {
                    n_header = Some(parse_dim(v)?);
                } else if let Some(v) = header.strip_prefix("m=") {
                    m_header = Some(parse_dim(v)?);
                }
                // any other '#' line is a comment
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(DatasetError::Parse {
                    line: line_no,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let id = |s: &str, what: &str| {
                s.trim().parse::<usize>().map_err(|e| DatasetError::Parse {
                    line: line_no,
                    message: format!("bad {what} id '{s}': {e}"),
                })
            };
            let instance = id(fields[0], "instance")?;
            let target = id(fields[1], "target")?;
            let score = fields[2]
                .trim()
                .parse::<f64>()
                .map_err(|e| DatasetError::Parse {
                    line: line_no,
                    message: format!("bad score '{}': {e}", fields[2]),
                })?;
            triplets.push(Triplet {
                instance,
                target,
                score,
            });
        }

        let n =
            n_header.unwrap_or_else(|| triplets.iter().map(|t| t.instance + 1).max().unwrap_or(0));
        let m =
            m_header.unwrap_or_else(|| triplets.iter().map(|t| t.target + 1).max().unwrap_or(0));
        let score_type =
            score_type.unwrap_or_else(|| ScoreType::infer(triplets.iter().map(|t| &t.score)));
        Self::new(n, m, triplets, score_type)
    }
}

/// Loads a triplet file. When `score_type` is `None` the narrowest compatible
/// type is inferred (nominal is never inferred).
pub fn load_triplets(
    path: impl AsRef<Path>,
    score_type: Option<ScoreType>,
) -> Result<InteractionData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    InteractionData::parse(&text, score_type)
}

/// Dense per-entity feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut values = Vec::with_capacity(dim * rows.len());
        for (id, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(DatasetError::RaggedRow(id));
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteValue(id, col));
            }
            values.extend(row);
        }
        Ok(Self { dim, values })
    }

    pub fn entity_count(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: usize) -> Option<&[f64]> {
        if id < self.entity_count() {
            Some(&self.values[id * self.dim..(id + 1) * self.dim])
        } else {
            None
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DatasetError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let columns = header.split(',').count();
        if columns < 2 {
            return Err(DatasetError::Parse {
                line: 1,
                message: "header needs an id column and at least one feature".into(),
            });
        }
        let dim = columns - 1;

        let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let mut fields = line.trim().split(',');
            let id_field = fields.next().unwrap_or_default();
            let id = id_field
                .trim()
                .parse::<usize>()
                .map_err(|e| DatasetError::Parse {
                    line: line_no,
                    message: format!("bad id '{id_field}': {e}"),
                })?;
            let row = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| DatasetError::Parse {
                        line: line_no,
                        message: format!("bad value '{f}': {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(DatasetError::RaggedRow(id));
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteValue(id, col));
            }
            if rows.insert(id, row).is_some() {
                return Err(DatasetError::DuplicateId(id));
            }
        }

        let count = rows.len();
        let mut ordered = Vec::with_capacity(count);
        for id in 0..count {
            ordered.push(rows.remove(&id).ok_or(DatasetError::MissingId(id))?);
        }
        Self::new(dim, ordered)
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    FeatureTable::parse(&text)
}

/// A rooted tree over named nodes whose `t<k>` leaves stand for target `k`.
///
/// Nodes are stored in canonical order: breadth-first from the root, children
/// in the order their edges appear in the source. Index 0 is always the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    leaf_of_target: Vec<usize>,
}

fn valid_node_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn target_of_leaf(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('t')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl Hierarchy {
    /// Builds and validates a hierarchy from `(parent, child)` edges. The first
    /// edge's parent is the root.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)], m: usize) -> Result<Self> {
        let Some((root, _)) = edges.first() else {
            return Err(DatasetError::Parse {
                line: 1,
                message: "hierarchy has no edges".into(),
            });
        };
        let root = root.as_ref();

        // Node ids in order of first appearance; only used while building.
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut names: Vec<&str> = Vec::new();
        let mut children: Vec<Vec<usize>> = Vec::new();
        let mut parent: Vec<Option<usize>> = Vec::new();
        for (line, (p, c)) in edges.iter().enumerate() {
            let (p, c) = (p.as_ref(), c.as_ref());
            for name in [p, c] {
                if !valid_node_name(name) {
                    return Err(DatasetError::Parse {
                        line: line + 1,
                        message: format!("invalid node name '{name}'"),
                    });
                }
                if !ids.contains_key(name) {
                    ids.insert(name, names.len());
                    names.push(name);
                    children.push(Vec::new());
                    parent.push(None);
                }
            }
            let (pi, ci) = (ids[p], ids[c]);
            if pi == ci {
                return Err(DatasetError::CycleDetected);
            }
            if parent[ci].is_some() {
                return Err(DatasetError::MultipleParents(c.to_string()));
            }
            parent[ci] = Some(pi);
            children[pi].push(ci);
        }

        let root_id = ids[root];
        if parent[root_id].is_some() {
            // every node reachable from the root has a parent chain; the root
            // having a parent closes a loop through it
            return Err(DatasetError::CycleDetected);
        }

        let mut order = Vec::with_capacity(names.len());
        let mut visited = vec![false; names.len()];
        let mut queue = VecDeque::from([root_id]);
        visited[root_id] = true;
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &child in &children[node] {
                if visited[child] {
                    return Err(DatasetError::CycleDetected);
                }
                visited[child] = true;
                queue.push_back(child);
            }
        }
        if let Some(unreached) = (0..names.len()).find(|&i| !visited[i]) {
            // With unique parents an unreachable node either sits on a cycle
            // or hangs off a second root.
            let mut cursor = unreached;
            let mut steps = 0;
            while let Some(p) = parent[cursor] {
                cursor = p;
                steps += 1;
                if steps > names.len() {
                    return Err(DatasetError::CycleDetected);
                }
            }
            return Err(DatasetError::Disconnected(names[unreached].to_string()));
        }

        let mut canonical = vec![0usize; names.len()];
        for (pos, &node) in order.iter().enumerate() {
            canonical[node] = pos;
        }
        let mut leaf_of_target = vec![usize::MAX; m];
        for (node, name) in names.iter().enumerate() {
            if let Some(k) = target_of_leaf(name) {
                if k >= m {
                    return Err(DatasetError::LeafOutOfRange {
                        name: name.to_string(),
                        target: k,
                        m,
                    });
                }
                if !children[node].is_empty() {
                    return Err(DatasetError::LeafHasChildren(name.to_string()));
                }
                leaf_of_target[k] = canonical[node];
            }
        }
        if let Some(k) = leaf_of_target.iter().position(|&l| l == usize::MAX) {
            return Err(DatasetError::UnmappedTarget(k));
        }

        let names_out = order.iter().map(|&i| names[i].to_string()).collect();
        let parent_out = order
            .iter()
            .map(|&i| parent[i].map(|p| canonical[p]))
            .collect();
        Ok(Self {
            names: names_out,
            parent: parent_out,
            leaf_of_target,
        })
    }

    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(c), None) => {
                    edges.push((p.trim().to_string(), c.trim().to_string()))
                }
                _ => {
                    return Err(DatasetError::Parse {
                        line: idx + 1,
                        message: "expected 'parent,child'".into(),
                    })
                }
            }
        }
        Self::from_edges(&edges, m)
    }

    /// Node names in canonical order, root first.
    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn root(&self) -> &str {
        &self.names[0]
    }

    /// Canonical parent index of each node (`None` for the root).
    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent.get(node).copied().flatten()
    }

    pub fn target_count(&self) -> usize {
        self.leaf_of_target.len()
    }

    /// Canonical node index of the leaf representing `target`.
    pub fn leaf_of(&self, target: usize) -> Option<usize> {
        self.leaf_of_target.get(target).copied()
    }

    /// Canonical indices of the nodes from the root's child down to the leaf.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        let mut node = self.leaf_of(target)?;
        let mut path = vec![node];
        while let Some(p) = self.parent(node) {
            if p == 0 {
                break;
            }
            path.push(p);
            node = p;
        }
        path.reverse();
        Some(path)
    }
}

pub fn load_hierarchy(path: impl AsRef<Path>, m: usize) -> Result<Hierarchy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Hierarchy::parse(&text, m)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SideInfo {
    #[default]
    None,
    Features(Arc<FeatureTable>),
    Hierarchy(Arc<Hierarchy>),
}

impl SideInfo {
    pub fn is_none(&self) -> bool {
        matches!(self, SideInfo::None)
    }
}

/// Interaction data plus whatever side information is available.
#[derive(Debug, Clone)]
pub struct MtpDataset {
    pub interactions: InteractionData,
    pub instance_side: SideInfo,
    pub target_side: SideInfo,
    /// Per-couple features, keyed by triplet index.
    pub dyadic_side: Option<Arc<FeatureTable>>,
}

impl MtpDataset {
    pub fn new(
        interactions: InteractionData,
        instance_side: SideInfo,
        target_side: SideInfo,
        dyadic_side: Option<Arc<FeatureTable>>,
    ) -> Result<Self> {
        let check = |what, side: &SideInfo, expected: usize| match side {
            SideInfo::Features(t) if t.entity_count() != expected => {
                Err(DatasetError::EntityCountMismatch {
                    what,
                    expected,
                    actual: t.entity_count(),
                })
            }
            SideInfo::Hierarchy(h) if h.target_count() != expected => {
                Err(DatasetError::EntityCountMismatch {
                    what,
                    expected,
                    actual: h.target_count(),
                })
            }
            _ => Ok(()),
        };
        check(
            "instance side information",
            &instance_side,
            interactions.n(),
        )?;
        check("target side information", &target_side, interactions.m())?;
        if let Some(d) = &dyadic_side {
            if d.entity_count() != interactions.len() {
                return Err(DatasetError::EntityCountMismatch {
                    what: "dyadic features",
                    expected: interactions.len(),
                    actual: d.entity_count(),
                });
            }
        }
        Ok(Self {
            interactions,
            instance_side,
            target_side,
            dyadic_side,
        })
    }

    pub fn without_side_info(interactions: InteractionData) -> Self {
        Self {
            interactions,
            instance_side: SideInfo::None,
            target_side: SideInfo::None,
            dyadic_side: None,
        }
    }
}

/// Answer to "is there side information for the targets?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetSide {
    No,
    Yes,
    YesHierarchy,
}

/// The questionnaire answers that follow from the data alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutoAnswers {
    pub instance_side: bool,
    pub target_side: TargetSide,
    pub fully_observed: bool,
    pub score_type: ScoreType,
}

pub fn infer_characteristics(ds: &MtpDataset) -> AutoAnswers {
    AutoAnswers {
        instance_side: !ds.instance_side.is_none(),
        target_side: match ds.target_side {
            SideInfo::None => TargetSide::No,
            SideInfo::Features(_) => TargetSide::Yes,
            SideInfo::Hierarchy(_) => TargetSide::YesHierarchy,
        },
        fully_observed: ds.interactions.is_fully_observed(),
        score_type: ds.interactions.score_type(),
    }
}
