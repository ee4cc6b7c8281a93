//! Two-branch (optionally tri-branch) network.
//!
//! Each branch maps its input to an embedding. The embeddings are
//! concatenated into `z1`, passed through the head layers
//! `z_l = act_l(W_l z_{l-1} + b_l)`, and the score is
//! `out(h . z_L)` where `out` is the sigmoid or the identity.
//!
//! All parameters live in one flat vector in declaration order: instance
//! branch, target branch, dyadic branch, head layers, then `h`. Within a
//! layer the weight matrix (row-major, `out_dim x in_dim`) precedes the bias.
//! Gradients use the same layout.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),
    #[error("forward cache belongs to a different parameter state")]
    StaleCache,
    #[error("branch is not a single linear layer over {0} one-hot inputs")]
    BranchShapeMismatch(usize),
    #[error("bad architecture descriptor: {0}")]
    BadDescriptor(String),
    #[error("not a model checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
}

pub type Result<T> = std::result::Result<T, NetworkError>;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
/// Pre-sigmoid values are clamped to this magnitude.
pub const LOGIT_CLAMP: f64 = 30.0;

/// A branch input vector; one-hot and hierarchy encodings stay sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Dense(Vec<f64>),
    Sparse {
        dim: usize,
        entries: Vec<(usize, f64)>,
    },
}

impl Input {
    pub fn sparse(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.iter().all(|(k, _)| *k < dim));
        Input::Sparse { dim, entries }
    }

    pub fn dim(&self) -> usize {
        match self {
            Input::Dense(v) => v.len(),
            Input::Sparse { dim, .. } => *dim,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Input::Dense(v) => v.clone(),
            Input::Sparse { dim, entries } => {
                let mut v = vec![0.0; *dim];
                for &(k, x) in entries {
                    v[k] += x;
                }
                v
            }
        }
    }
}

impl From<Vec<f64>> for Input {
    fn from(v: Vec<f64>) -> Self {
        Input::Dense(v)
    }
}

/// Inputs of all branches for one instance-target couple.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleInput {
    pub instance: Input,
    pub target: Input,
    pub dyadic: Option<Input>,
}

impl CoupleInput {
    pub fn new(instance: impl Into<Input>, target: impl Into<Input>) -> Self {
        Self {
            instance: instance.into(),
            target: target.into(),
            dyadic: None,
        }
    }

    pub fn with_dyadic(mut self, dyadic: impl Into<Input>) -> Self {
        self.dyadic = Some(dyadic.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) if x <= 0.0 => slope * x,
            _ => x,
        }
    }

    /// The negative-side slope is used at exactly zero.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) if x <= 0.0 => slope,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(s) => write!(f, "leaky_relu({s})"),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "identity" {
            return Ok(Activation::Identity);
        }
        s.strip_prefix("leaky_relu(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|v| v.parse().ok())
            .map(Activation::LeakyRelu)
            .ok_or_else(|| format!("unknown activation '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    fn param_count(&self) -> usize {
        self.out_dim * self.in_dim + self.out_dim
    }
}

/// A branch: input width plus a (possibly empty) layer stack. An empty stack
/// passes the input through unchanged as the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl BranchSpec {
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.out_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputTransform {
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Instance,
    Target,
    Dyadic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub instance: BranchSpec,
    pub target: BranchSpec,
    pub dyadic: Option<BranchSpec>,
    pub head: Vec<LayerSpec>,
    pub output: OutputTransform,
}

impl ModelSpec {
    pub fn embedding_dim(&self) -> usize {
        self.instance.output_dim()
            + self.target.output_dim()
            + self.dyadic.as_ref().map_or(0, |d| d.output_dim())
    }

    fn validate(&self) -> Result<()> {
        let mismatch = |msg: String| Err(NetworkError::DimensionMismatch(msg));
        let branches = [
            ("instance", Some(&self.instance)),
            ("target", Some(&self.target)),
            ("dyadic", self.dyadic.as_ref()),
        ];
        for (name, branch) in branches {
            let Some(branch) = branch else { continue };
            let mut width = branch.input_dim;
            for (k, layer) in branch.layers.iter().enumerate() {
                if layer.in_dim == 0 || layer.out_dim == 0 {
                    return mismatch(format!("{name} layer {k} has a zero dimension"));
                }
                if layer.in_dim != width {
                    return mismatch(format!(
                        "{name} layer {k} expects {} inputs, gets {width}",
                        layer.in_dim
                    ));
                }
                width = layer.out_dim;
            }
        }
        let mut width = self.embedding_dim();
        for (k, layer) in self.head.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return mismatch(format!("head layer {k} has a zero dimension"));
            }
            if layer.in_dim != width {
                return mismatch(format!(
                    "head layer {k} expects {} inputs, the previous stage produces {width}",
                    layer.in_dim
                ));
            }
            width = layer.out_dim;
        }
        if width == 0 {
            return mismatch("the head has no inputs".into());
        }
        Ok(())
    }

    fn head_output_dim(&self) -> usize {
        self.head.last().map_or(self.embedding_dim(), |l| l.out_dim)
    }
}

/// Compact architecture description; [`Architecture::spec`] expands it.
/// Branch hidden layers and head layers use Leaky ReLU, the final branch
/// layer (the embedding) is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub instance_input: usize,
    pub target_input: usize,
    pub dyadic_input: Option<usize>,
    pub branch_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub head_hidden: Vec<usize>,
    pub output: OutputTransform,
    pub leaky_slope: f64,
}

impl Architecture {
    /// One linear layer per branch to a 32-wide embedding, one 64-wide hidden
    /// head layer.
    pub fn new(instance_input: usize, target_input: usize, output: OutputTransform) -> Self {
        Self {
            instance_input,
            target_input,
            dyadic_input: None,
            branch_hidden: Vec::new(),
            embedding_dim: 32,
            head_hidden: vec![64],
            output,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    fn branch(&self, input_dim: usize) -> BranchSpec {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for &h in &self.branch_hidden {
            layers.push(LayerSpec::new(
                width,
                h,
                Activation::LeakyRelu(self.leaky_slope),
            ));
            width = h;
        }
        layers.push(LayerSpec::new(
            width,
            self.embedding_dim,
            Activation::Identity,
        ));
        BranchSpec { input_dim, layers }
    }

    pub fn spec(&self) -> ModelSpec {
        let instance = self.branch(self.instance_input);
        let target = self.branch(self.target_input);
        let dyadic = self.dyadic_input.map(|d| self.branch(d));
        let mut width = instance.output_dim()
            + target.output_dim()
            + dyadic.as_ref().map_or(0, |d| d.output_dim());
        let mut head = Vec::new();
        for &h in &self.head_hidden {
            head.push(LayerSpec::new(
                width,
                h,
                Activation::LeakyRelu(self.leaky_slope),
            ));
            width = h;
        }
        ModelSpec {
            instance,
            target,
            dyadic,
            head,
            output: self.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlot {
    spec: LayerSpec,
    offset: usize,
}

impl LayerSlot {
    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.spec.in_dim * self.spec.out_dim]
    }

    fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.spec.in_dim * self.spec.out_dim;
        &params[start..start + self.spec.out_dim]
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.spec.in_dim * self.spec.out_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    instance: Vec<LayerSlot>,
    target: Vec<LayerSlot>,
    dyadic: Vec<LayerSlot>,
    head: Vec<LayerSlot>,
    h_offset: usize,
    h_len: usize,
    total: usize,
}

impl Layout {
    fn new(spec: &ModelSpec) -> Self {
        let mut offset = 0;
        let mut slots = |layers: &[LayerSpec]| -> Vec<LayerSlot> {
            layers
                .iter()
                .map(|&spec| {
                    let slot = LayerSlot { spec, offset };
                    offset += spec.param_count();
                    slot
                })
                .collect()
        };
        let instance = slots(&spec.instance.layers);
        let target = slots(&spec.target.layers);
        let dyadic = spec
            .dyadic
            .as_ref()
            .map_or_else(Vec::new, |d| slots(&d.layers));
        let head = slots(&spec.head);
        let h_len = spec.head_output_dim();
        Self {
            instance,
            target,
            dyadic,
            head,
            h_offset: offset,
            h_len,
            total: offset + h_len,
        }
    }

    fn branch(&self, b: Branch) -> &[LayerSlot] {
        match b {
            Branch::Instance => &self.instance,
            Branch::Target => &self.target,
            Branch::Dyadic => &self.dyadic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    layout: Layout,
    params: Vec<f64>,
    seed: u64,
    generation: u64,
}

/// Builds a model with weights drawn uniformly from `[-sqrt(6/fan_in), sqrt(6/fan_in)]`
/// (the output vector `h` included) and zero biases.
pub fn init_model(spec: ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let layout = Layout::new(&spec);
    let mut params = vec![0.0; layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all_layers = layout
        .instance
        .iter()
        .chain(&layout.target)
        .chain(&layout.dyadic)
        .chain(&layout.head);
    for slot in all_layers {
        let bound = (6.0 / slot.spec.in_dim as f64).sqrt();
        let n = slot.spec.in_dim * slot.spec.out_dim;
        for w in &mut params[slot.offset..slot.offset + n] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    let bound = (6.0 / layout.h_len as f64).sqrt();
    for w in &mut params[layout.h_offset..] {
        *w = rng.random_range(-bound..=bound);
    }
    Ok(Model {
        spec,
        layout,
        params,
        seed,
        generation: 0,
    })
}

impl Model {
    /// Rebuilds a model around an existing parameter vector.
    pub fn from_params(spec: ModelSpec, params: Vec<f64>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        if params.len() != layout.total {
            return Err(NetworkError::DimensionMismatch(format!(
                "architecture has {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            spec,
            layout,
            params,
            seed,
            generation: 0,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Forward caches taken before this call are
    /// rejected by [`Model::backward`].
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.spec.output
    }

    /// Weight matrix (row-major, `out_dim x in_dim`) and bias of one branch layer.
    pub fn branch_layer(&self, branch: Branch, index: usize) -> Option<(&[f64], &[f64])> {
        let slot = self.layout.branch(branch).get(index)?;
        Some((slot.weights(&self.params), slot.bias(&self.params)))
    }

    pub fn head_layer(&self, index: usize) -> Option<(&[f64], &[f64])> {
        let slot = self.layout.head.get(index)?;
        Some((slot.weights(&self.params), slot.bias(&self.params)))
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.params[self.layout.h_offset..]
    }

    fn branch_spec(&self, b: Branch) -> Option<&BranchSpec> {
        match b {
            Branch::Instance => Some(&self.spec.instance),
            Branch::Target => Some(&self.spec.target),
            Branch::Dyadic => self.spec.dyadic.as_ref(),
        }
    }

    fn check_inputs(&self, couple: &CoupleInput) -> Result<()> {
        let check = |name: &str, expected: usize, got: usize| {
            if expected != got {
                Err(NetworkError::DimensionMismatch(format!(
                    "{name} input has {got} components, branch expects {expected}"
                )))
            } else {
                Ok(())
            }
        };
        check(
            "instance",
            self.spec.instance.input_dim,
            couple.instance.dim(),
        )?;
        check("target", self.spec.target.input_dim, couple.target.dim())?;
        match (&self.spec.dyadic, &couple.dyadic) {
            (Some(d), Some(x)) => check("dyadic", d.input_dim, x.dim()),
            (None, None) => Ok(()),
            (Some(_), None) => Err(NetworkError::DimensionMismatch(
                "dyadic input missing".into(),
            )),
            (None, Some(_)) => Err(NetworkError::DimensionMismatch(
                "dyadic input given to a two-branch model".into(),
            )),
        }
    }

    fn run_branch(&self, b: Branch, input: &Input) -> BranchCache {
        let slots = self.layout.branch(b);
        let mut pre = Vec::with_capacity(slots.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(slots.len());
        for (k, slot) in slots.iter().enumerate() {
            let z = if k == 0 {
                affine_input(slot, &self.params, input)
            } else {
                affine_dense(slot, &self.params, &post[k - 1])
            };
            post.push(z.iter().map(|&x| slot.spec.activation.apply(x)).collect());
            pre.push(z);
        }
        BranchCache {
            input: input.clone(),
            pre,
            post,
        }
    }

    /// Output of one branch for a single input.
    pub fn branch_output(&self, b: Branch, input: &Input) -> Result<Vec<f64>> {
        let spec = self
            .branch_spec(b)
            .ok_or_else(|| NetworkError::DimensionMismatch("model has no dyadic branch".into()))?;
        if input.dim() != spec.input_dim {
            return Err(NetworkError::DimensionMismatch(format!(
                "branch expects {} inputs, got {}",
                spec.input_dim,
                input.dim()
            )));
        }
        Ok(self.run_branch(b, input).output())
    }

    pub fn forward(&self, couple: &CoupleInput) -> Result<(f64, ForwardCache)> {
        self.check_inputs(couple)?;
        let instance = self.run_branch(Branch::Instance, &couple.instance);
        let target = self.run_branch(Branch::Target, &couple.target);
        let dyadic = couple
            .dyadic
            .as_ref()
            .map(|d| self.run_branch(Branch::Dyadic, d));

        let mut z1 = instance.output();
        z1.extend(target.output());
        if let Some(d) = &dyadic {
            z1.extend(d.output());
        }
        if z1.len() != self.spec.embedding_dim() {
            return Err(NetworkError::DimensionMismatch(
                "concatenated embedding width".into(),
            ));
        }

        let mut head_pre = Vec::with_capacity(self.layout.head.len());
        let mut head_post: Vec<Vec<f64>> = Vec::with_capacity(self.layout.head.len());
        for (k, slot) in self.layout.head.iter().enumerate() {
            let input = if k == 0 { &z1 } else { &head_post[k - 1] };
            let z = affine_dense(slot, &self.params, input);
            head_post.push(z.iter().map(|&x| slot.spec.activation.apply(x)).collect());
            head_pre.push(z);
        }
        let last = head_post.last().unwrap_or(&z1);
        let logit: f64 = self
            .output_weights()
            .iter()
            .zip(last)
            .map(|(h, a)| h * a)
            .sum();
        if !logit.is_finite() {
            return Err(NetworkError::NonFiniteActivation("output layer"));
        }
        let (score, logit) = match self.spec.output {
            OutputTransform::Identity => (logit, logit),
            OutputTransform::Sigmoid => {
                let clamped = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                (sigmoid(clamped), clamped)
            }
        };
        let cache = ForwardCache {
            generation: self.generation,
            param_count: self.params.len(),
            instance,
            target,
            dyadic,
            z1,
            head_pre,
            head_post,
            logit,
            score,
        };
        Ok((score, cache))
    }

    pub fn backward(&self, cache: &ForwardCache, dloss_dscore: f64) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, dloss_dscore, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient of the loss for this couple to `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dloss_dscore: f64,
        grads: &mut Gradients,
    ) -> Result<()> {
        if cache.generation != self.generation || cache.param_count != self.params.len() {
            return Err(NetworkError::StaleCache);
        }
        if grads.values.len() != self.params.len() {
            return Err(NetworkError::DimensionMismatch(
                "gradient buffer shape".into(),
            ));
        }
        // Through the clamp the sigmoid derivative is taken at the clamped value.
        let dlogit = match self.spec.output {
            OutputTransform::Identity => dloss_dscore,
            OutputTransform::Sigmoid => dloss_dscore * cache.score * (1.0 - cache.score),
        };
        let g = &mut grads.values;

        let last = cache.head_post.last().unwrap_or(&cache.z1);
        let h = self.output_weights();
        let mut upstream: Vec<f64> = h.iter().map(|w| w * dlogit).collect();
        for (gh, a) in g[self.layout.h_offset..].iter_mut().zip(last) {
            *gh += dlogit * a;
        }

        for k in (0..self.layout.head.len()).rev() {
            let slot = &self.layout.head[k];
            let input = if k == 0 {
                &cache.z1
            } else {
                &cache.head_post[k - 1]
            };
            upstream = backprop_layer(
                slot,
                &self.params,
                g,
                &cache.head_pre[k],
                &upstream,
                LayerInput::Dense(input),
            );
        }

        let split_i = cache.instance.output_len();
        let split_t = split_i + cache.target.output_len();
        self.backprop_branch(Branch::Instance, &cache.instance, &upstream[..split_i], g);
        self.backprop_branch(
            Branch::Target,
            &cache.target,
            &upstream[split_i..split_t],
            g,
        );
        if let Some(d) = &cache.dyadic {
            self.backprop_branch(Branch::Dyadic, d, &upstream[split_t..], g);
        }
        Ok(())
    }

    fn backprop_branch(&self, b: Branch, cache: &BranchCache, upstream: &[f64], g: &mut [f64]) {
        let slots = self.layout.branch(b);
        let mut up = upstream.to_vec();
        for k in (0..slots.len()).rev() {
            let input = if k == 0 {
                LayerInput::Input(&cache.input)
            } else {
                LayerInput::Dense(&cache.post[k - 1])
            };
            up = backprop_layer(&slots[k], &self.params, g, &cache.pre[k], &up, input);
        }
    }

    /// Embedding of entity `id` in a branch that is a single linear layer over
    /// one-hot inputs: column `id` of the weight matrix plus the bias.
    pub fn embedding_of(&self, branch: Branch, id: usize, n: usize) -> Result<Vec<f64>> {
        let slots = self.layout.branch(branch);
        let slot = match slots {
            [slot] if slot.spec.in_dim == n && slot.spec.activation == Activation::Identity => slot,
            _ => return Err(NetworkError::BranchShapeMismatch(n)),
        };
        if id >= n {
            return Err(NetworkError::DimensionMismatch(format!(
                "id {id} out of range for {n} entities"
            )));
        }
        let w = slot.weights(&self.params);
        Ok(slot
            .bias(&self.params)
            .iter()
            .enumerate()
            .map(|(o, b)| w[o * n + id] + b)
            .collect())
    }

    /// Architecture descriptor text used by checkpoints.
    pub fn descriptor(&self) -> String {
        let layers = |layers: &[LayerSpec]| {
            layers
                .iter()
                .map(|l| format!("{}:{}:{}", l.in_dim, l.out_dim, l.activation))
                .collect::<Vec<_>>()
                .join(";")
        };
        let branch = |b: &BranchSpec| format!("{}|{}", b.input_dim, layers(&b.layers));
        let output = match self.spec.output {
            OutputTransform::Sigmoid => "sigmoid",
            OutputTransform::Identity => "identity",
        };
        format!(
            "output={output}\ninstance={}\ntarget={}\ndyadic={}\nhead={}\nseed={}\n",
            branch(&self.spec.instance),
            branch(&self.spec.target),
            self.spec
                .dyadic
                .as_ref()
                .map_or_else(|| "none".to_string(), branch),
            layers(&self.spec.head),
            self.seed
        )
    }

    /// Parses a descriptor produced by [`Model::descriptor`] into a spec and seed.
    pub fn parse_descriptor(text: &str) -> Result<(ModelSpec, u64)> {
        let bad = |m: &str| NetworkError::BadDescriptor(m.to_string());
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| bad(&format!("missing {k}")))
        };
        let layers = |s: &str| -> Result<Vec<LayerSpec>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';')
                .map(|l| {
                    let mut it = l.splitn(3, ':');
                    let in_dim = it
                        .next()
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| bad(l))?;
                    let out_dim = it
                        .next()
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| bad(l))?;
                    let activation = it
                        .next()
                        .ok_or_else(|| bad(l))?
                        .parse()
                        .map_err(|e: String| bad(&e))?;
                    Ok(LayerSpec::new(in_dim, out_dim, activation))
                })
                .collect()
        };
        let branch = |s: &str| -> Result<BranchSpec> {
            let (input, rest) = s.split_once('|').ok_or_else(|| bad(s))?;
            Ok(BranchSpec {
                input_dim: input.parse().map_err(|_| bad(s))?,
                layers: layers(rest)?,
            })
        };
        let output = match get("output")? {
            "sigmoid" => OutputTransform::Sigmoid,
            "identity" => OutputTransform::Identity,
            other => return Err(bad(other)),
        };
        let dyadic = match get("dyadic")? {
            "none" => None,
            d => Some(branch(d)?),
        };
        let spec = ModelSpec {
            instance: branch(get("instance")?)?,
            target: branch(get("target")?)?,
            dyadic,
            head: layers(get("head")?)?,
            output,
        };
        let seed = get("seed")?.parse().map_err(|_| bad("seed"))?;
        Ok((spec, seed))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine_dense(slot: &LayerSlot, params: &[f64], x: &[f64]) -> Vec<f64> {
    let w = slot.weights(params);
    let n_in = slot.spec.in_dim;
    slot.bias(params)
        .iter()
        .enumerate()
        .map(|(o, b)| {
            b + w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

fn affine_input(slot: &LayerSlot, params: &[f64], x: &Input) -> Vec<f64> {
    match x {
        Input::Dense(v) => affine_dense(slot, params, v),
        Input::Sparse { entries, .. } => {
            let w = slot.weights(params);
            let n_in = slot.spec.in_dim;
            let mut z = slot.bias(params).to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                for &(k, v) in entries {
                    *zo += w[o * n_in + k] * v;
                }
            }
            z
        }
    }
}

enum LayerInput<'a> {
    Dense(&'a [f64]),
    Input(&'a Input),
}

/// Accumulates the layer's parameter gradients and returns the gradient with
/// respect to its input.
fn backprop_layer(
    slot: &LayerSlot,
    params: &[f64],
    g: &mut [f64],
    pre: &[f64],
    upstream: &[f64],
    input: LayerInput<'_>,
) -> Vec<f64> {
    let n_in = slot.spec.in_dim;
    let dpre: Vec<f64> = upstream
        .iter()
        .zip(pre)
        .map(|(u, z)| u * slot.spec.activation.derivative(*z))
        .collect();
    let w = slot.weights(params);
    let w_off = slot.offset;
    let b_off = slot.bias_offset();
    for (o, d) in dpre.iter().enumerate() {
        g[b_off + o] += d;
    }
    match input {
        LayerInput::Dense(x) => {
            for (o, d) in dpre.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut g[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (gw, xi) in row.iter_mut().zip(x) {
                    *gw += d * xi;
                }
            }
        }
        LayerInput::Input(Input::Dense(x)) => {
            for (o, d) in dpre.iter().enumerate() {
                let row = &mut g[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (gw, xi) in row.iter_mut().zip(x) {
                    *gw += d * xi;
                }
            }
        }
        LayerInput::Input(Input::Sparse { entries, .. }) => {
            for (o, d) in dpre.iter().enumerate() {
                for &(k, v) in entries {
                    g[w_off + o * n_in + k] += d * v;
                }
            }
        }
    }
    let mut down = vec![0.0; n_in];
    for (o, d) in dpre.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        for (di, wi) in down.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
            *di += d * wi;
        }
    }
    down
}

#[derive(Debug, Clone, PartialEq)]
struct BranchCache {
    input: Input,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl BranchCache {
    fn output(&self) -> Vec<f64> {
        self.post
            .last()
            .cloned()
            .unwrap_or_else(|| self.input.to_dense())
    }

    fn output_len(&self) -> usize {
        self.post.last().map_or(self.input.dim(), Vec::len)
    }
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    generation: u64,
    param_count: usize,
    instance: BranchCache,
    target: BranchCache,
    dyadic: Option<BranchCache>,
    z1: Vec<f64>,
    head_pre: Vec<Vec<f64>>,
    head_post: Vec<Vec<f64>>,
    logit: f64,
    score: f64,
}

impl ForwardCache {
    /// Concatenated branch embeddings.
    pub fn embedding(&self) -> &[f64] {
        &self.z1
    }

    /// Value fed to the output transform (after clamping, for sigmoid outputs).
    pub fn logit(&self) -> f64 {
        self.logit
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// One partial derivative per model parameter, in parameter layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            values: vec![0.0; model.param_count()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Scores for many couples, in order.
pub fn predict_batch(model: &Model, couples: &[CoupleInput]) -> Result<Vec<f64>> {
    couples
        .iter()
        .map(|c| model.forward(c).map(|(s, _)| s))
        .collect()
}
