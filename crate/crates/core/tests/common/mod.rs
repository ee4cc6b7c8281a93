//! Helpers shared by the integration tests.
#![allow(dead_code)]

use mtp::dataset::{Hierarchy, InteractionData, ScoreType, Triplet};
use mtp::network::{
    Activation, Branch, BranchSpec, CoupleInput, Input, LayerSpec, Model, ModelSpec,
    OutputTransform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_activation(rng: &mut ChaCha8Rng) -> Activation {
    if rng.random_bool(0.7) {
        Activation::LeakyRelu(rng.random_range(0.01..0.3))
    } else {
        Activation::Identity
    }
}

/// 1-3 layers ending in an embedding of width 2-16.
fn random_branch(rng: &mut ChaCha8Rng, max_input: usize) -> BranchSpec {
    let input_dim = rng.random_range(1..=max_input);
    let embedding = rng.random_range(2..=16);
    let depth = rng.random_range(1..=3);
    let mut layers = Vec::new();
    let mut width = input_dim;
    for k in 0..depth {
        let out = if k + 1 == depth {
            embedding
        } else {
            rng.random_range(2..=8)
        };
        layers.push(LayerSpec::new(width, out, random_activation(rng)));
        width = out;
    }
    BranchSpec { input_dim, layers }
}

/// Random architecture: 1-3 layers per branch, 1-3 head layers, embedding
/// widths 2-16, either output transform.
pub fn random_spec(rng: &mut ChaCha8Rng, tri_branch: bool) -> ModelSpec {
    let instance = random_branch(rng, 12);
    let target = random_branch(rng, 12);
    let dyadic = tri_branch.then(|| random_branch(rng, 6));
    let mut width = instance.output_dim()
        + target.output_dim()
        + dyadic.as_ref().map_or(0, BranchSpec::output_dim);
    let mut head = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let out = rng.random_range(2..=10);
        head.push(LayerSpec::new(width, out, random_activation(rng)));
        width = out;
    }
    let output = if rng.random_bool(0.5) {
        OutputTransform::Sigmoid
    } else {
        OutputTransform::Identity
    };
    ModelSpec {
        instance,
        target,
        dyadic,
        head,
        output,
    }
}

/// Dense or sparse input with entries in [-1, 1].
pub fn random_input(rng: &mut ChaCha8Rng, dim: usize) -> Input {
    if rng.random_bool(0.5) {
        Input::Dense((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    } else {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for k in 0..dim {
            if rng.random_bool(0.4) {
                entries.push((k, rng.random_range(-1.0..1.0)));
            }
        }
        if entries.is_empty() {
            entries.push((rng.random_range(0..dim), 1.0));
        }
        Input::sparse(dim, entries)
    }
}

pub fn random_couple(rng: &mut ChaCha8Rng, spec: &ModelSpec) -> CoupleInput {
    let mut c = CoupleInput::new(
        random_input(rng, spec.instance.input_dim),
        random_input(rng, spec.target.input_dim),
    );
    if let Some(d) = &spec.dyadic {
        c = c.with_dyadic(random_input(rng, d.input_dim));
    }
    c
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Identity => x,
        Activation::LeakyRelu(s) => {
            if x > 0.0 {
                x
            } else {
                s * x
            }
        }
    }
}

/// `act(W x + b)` with W row-major `out x in`, written out with plain loops.
fn naive_layer(w: &[f64], b: &[f64], x: &[f64], a: Activation) -> Vec<f64> {
    let in_dim = x.len();
    (0..b.len())
        .map(|o| {
            let mut z = b[o];
            for i in 0..in_dim {
                z += w[o * in_dim + i] * x[i];
            }
            act(a, z)
        })
        .collect()
}

fn naive_branch(model: &Model, branch: Branch, spec: &BranchSpec, input: &Input) -> Vec<f64> {
    let mut x = input.to_dense();
    for (k, layer) in spec.layers.iter().enumerate() {
        let (w, b) = model.branch_layer(branch, k).expect("layer exists");
        x = naive_layer(w, b, &x, layer.activation);
    }
    x
}

/// Independent re-implementation of the score:
/// `out(h . phi_L(... phi_2([p_x; q_t; r_d])))`.
pub fn naive_score(model: &Model, couple: &CoupleInput) -> f64 {
    let spec = model.spec();
    let mut z = naive_branch(model, Branch::Instance, &spec.instance, &couple.instance);
    z.extend(naive_branch(
        model,
        Branch::Target,
        &spec.target,
        &couple.target,
    ));
    if let (Some(d), Some(x)) = (&spec.dyadic, &couple.dyadic) {
        z.extend(naive_branch(model, Branch::Dyadic, d, x));
    }
    for (k, layer) in spec.head.iter().enumerate() {
        let (w, b) = model.head_layer(k).expect("layer exists");
        z = naive_layer(w, b, &z, layer.activation);
    }
    let logit: f64 = model
        .output_weights()
        .iter()
        .zip(&z)
        .map(|(h, a)| h * a)
        .sum();
    match spec.output {
        OutputTransform::Identity => logit,
        OutputTransform::Sigmoid => 1.0 / (1.0 + (-logit.clamp(-30.0, 30.0)).exp()),
    }
}

/// Finite-difference check of `d score / d params` with central differences.
/// Returns a description of the worst offending component, if any.
pub fn gradient_check(
    model: &Model,
    couple: &CoupleInput,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<(), String> {
    let (_, cache) = model.forward(couple).map_err(|e| e.to_string())?;
    let analytic = model.backward(&cache, 1.0).map_err(|e| e.to_string())?;
    let mut probe = model.clone();
    for k in 0..model.param_count() {
        let original = model.params()[k];
        probe.params_mut()[k] = original + step;
        let plus = probe.forward(couple).map_err(|e| e.to_string())?.0;
        probe.params_mut()[k] = original - step;
        let minus = probe.forward(couple).map_err(|e| e.to_string())?.0;
        probe.params_mut()[k] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.values()[k];
        let diff = (a - numeric).abs();
        if diff > abs_floor && diff > rel_tol * a.abs().max(numeric.abs()) {
            return Err(format!(
                "parameter {k}: analytic {a:e}, numeric {numeric:e}"
            ));
        }
    }
    Ok(())
}

/// Random sparse binary `n x m` matrix with about `density` of cells known.
pub fn random_binary_matrix(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    density: f64,
) -> InteractionData {
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.random_bool(density) {
                triplets.push(Triplet::new(
                    i,
                    j,
                    if rng.random_bool(0.5) { 1.0 } else { 0.0 },
                ));
            }
        }
    }
    if triplets.is_empty() {
        triplets.push(Triplet::new(0, 0, 1.0));
    }
    InteractionData::new(n, m, triplets, ScoreType::Binary).expect("valid matrix")
}

/// Tag hierarchy shaped like the VOC 2007 one: nine categories over twenty
/// tags, 29 non-root nodes in total.
pub const VOC_HIERARCHY: &str = "\
# parent,child
root,vehicle
root,animal
root,household
root,t14
vehicle,land_vehicle
vehicle,other_vehicle
animal,domestic
animal,farm
household,furniture
household,other_household
# aeroplane boat
other_vehicle,t0
other_vehicle,t3
# bicycle bus car motorbike train
land_vehicle,t1
land_vehicle,t5
land_vehicle,t6
land_vehicle,t13
land_vehicle,t18
# bird cat dog
domestic,t2
domestic,t7
domestic,t11
# cow horse sheep
farm,t9
farm,t12
farm,t16
# chair diningtable sofa
furniture,t8
furniture,t10
furniture,t17
# bottle pottedplant tvmonitor
other_household,t4
other_household,t15
other_household,t19
";

pub fn voc_hierarchy() -> Hierarchy {
    Hierarchy::parse(VOC_HIERARCHY, 20).expect("fixture parses")
}

/// Workspace-level data directory: `$MTP_DATA_DIR` or `<workspace>/data`.
pub fn data_dir() -> std::path::PathBuf {
    match std::env::var_os("MTP_DATA_DIR") {
        Some(d) => d.into(),
        None => std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Partition, disjointness and setting-specific exclusion checks for a split.
pub fn check_split(data: &InteractionData, split: &mtp::splitter::Split) -> Result<(), String> {
    use mtp::splitter::ValidationSetting;
    use std::collections::HashSet;

    let total = data.len();
    let mut seen = vec![0u8; total];
    for part in [
        &split.train,
        &split.validation,
        &split.test,
        &split.discarded,
    ] {
        for &k in part.iter() {
            if k >= total {
                return Err(format!("index {k} out of range"));
            }
            seen[k] += 1;
        }
    }
    if let Some(k) = seen.iter().position(|&c| c != 1) {
        return Err(format!("triplet {k} assigned {} times", seen[k]));
    }
    if split.test.is_empty() || split.train.is_empty() {
        return Err("empty train or test".into());
    }

    let t = data.triplets();
    let ids = |part: &[usize], pick: fn(&Triplet) -> usize| -> HashSet<usize> {
        part.iter().map(|&k| pick(&t[k])).collect()
    };
    let inst = |x: &Triplet| x.instance;
    let targ = |x: &Triplet| x.target;
    let disjoint = |a: &HashSet<usize>, b: &HashSet<usize>, what: &str| {
        if a.is_disjoint(b) {
            Ok(())
        } else {
            Err(format!("{what} overlap"))
        }
    };

    match split.setting {
        ValidationSetting::A => {
            if !split.discarded.is_empty() {
                return Err("setting A discards nothing".into());
            }
        }
        ValidationSetting::B | ValidationSetting::C => {
            if !split.discarded.is_empty() {
                return Err("settings B and C discard nothing".into());
            }
            type Axis = fn(&Triplet) -> usize;
            let (held, other): (Axis, Axis) = if split.setting == ValidationSetting::B {
                (inst, targ)
            } else {
                (targ, inst)
            };
            let train = ids(&split.train, held);
            disjoint(&train, &ids(&split.test, held), "train/test held-out ids")?;
            disjoint(
                &train,
                &ids(&split.validation, held),
                "train/validation held-out ids",
            )?;
            disjoint(
                &ids(&split.validation, held),
                &ids(&split.test, held),
                "validation/test held-out ids",
            )?;
            // Other-axis ids seen in test must be trainable whenever they have
            // any known triplet outside the held-out entities.
            let test_held = ids(&split.test, held);
            let val_held = ids(&split.validation, held);
            let train_other = ids(&split.train, other);
            for x in t {
                let available = !test_held.contains(&held(x)) && !val_held.contains(&held(x));
                if available && !train_other.contains(&other(x)) {
                    return Err(format!(
                        "id {} has a train-eligible triplet but is absent from train",
                        other(x)
                    ));
                }
            }
        }
        ValidationSetting::D => {
            disjoint(
                &ids(&split.train, inst),
                &ids(&split.test, inst),
                "train/test instances",
            )?;
            disjoint(
                &ids(&split.train, targ),
                &ids(&split.test, targ),
                "train/test targets",
            )?;
            disjoint(
                &ids(&split.train, inst),
                &ids(&split.validation, inst),
                "train/validation instances",
            )?;
            disjoint(
                &ids(&split.train, targ),
                &ids(&split.validation, targ),
                "train/validation targets",
            )?;
            let test_i = ids(&split.test, inst);
            let test_t = ids(&split.test, targ);
            let discarded: HashSet<usize> = split.discarded.iter().copied().collect();
            for (k, x) in t.iter().enumerate() {
                let cross = test_i.contains(&x.instance) != test_t.contains(&x.target);
                if cross && !discarded.contains(&k) {
                    return Err(format!("cross-block triplet {k} not discarded"));
                }
            }
        }
    }
    Ok(())
}
