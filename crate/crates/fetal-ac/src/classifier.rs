//! Three-branch patch classifier: normal-view and wide-view conv branches, a
//! direction branch, and a fully connected head over the concatenated
//! features. Covers construction and initialization, training with ADAM,
//! batch classification, and semantic-map rendering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, softmax, softmax_cross_entropy, Activation, AdamConfig, AdamState, DropoutMode,
    FcLayer, Gradients, LayerSpec, PoolRounding, Scalar, Sequential, SequentialSpec, Tensor3,
    Value, ValueShape,
};
use crate::patch::{
    anechoic_mask, extract_views, mix_seed, propagation_direction, ClassLabel, PatchDataset,
    PatchRef, PatchSample, UltrasoundImage, CLASS_COUNT, PATCH_SIZE,
};
use crate::semantic::SemanticMap;

/// Number of direction-branch filters (one per output feature).
pub const DIR_FILTER_COUNT: usize = 4;
/// Default imaging-fan span for uniform direction-filter initialization, in
/// degrees measured from the positive horizontal axis with y pointing down
/// (90 is straight down).
pub const DEFAULT_FAN_DEG: (f64, f64) = (60.0, 120.0);

const IMAGE_INIT_SALT: u64 = 0x1a2b;
const DIR_INIT_SALT: u64 = 0x3c4d;
const BATCH_SALT: u64 = 0x5e6f;
const DROPOUT_SALT: u64 = 0x7081;
const EVAL_SUBSET_SALT: u64 = 0x92a3;

/// Direction-filter initialization strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DirInitMode {
    /// Components drawn i.i.d. from a standard normal.
    Gaussian,
    /// Unit vectors at equally spaced angles spanning the imaging fan;
    /// angles in degrees, 90 pointing straight down.
    UniformTowardRange { start_deg: f64, end_deg: f64 },
}

impl DirInitMode {
    pub fn uniform_default() -> Self {
        DirInitMode::UniformTowardRange {
            start_deg: DEFAULT_FAN_DEG.0,
            end_deg: DEFAULT_FAN_DEG.1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DirInitMode::Gaussian => "gaussian",
            DirInitMode::UniformTowardRange { .. } => "uniform",
        }
    }
}

/// Initial direction-branch filters.
pub fn init_direction_filters(
    mode: &DirInitMode,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    match mode {
        DirInitMode::Gaussian => {
            let normal = StandardNormal;
            Ok((0..count)
                .map(|_| {
                    let u: f64 = normal.sample(rng);
                    let v: f64 = normal.sample(rng);
                    [u, v]
                })
                .collect())
        }
        DirInitMode::UniformTowardRange { start_deg, end_deg } => {
            if end_deg <= start_deg {
                return Err(Error::Parameter(format!(
                    "uniform direction init needs a nonempty angular range, got [{start_deg}, {end_deg}]"
                )));
            }
            Ok((0..count)
                .map(|k| {
                    let t = if count == 1 {
                        0.5
                    } else {
                        k as f64 / (count - 1) as f64
                    };
                    let deg = start_deg + t * (end_deg - start_deg);
                    let rad = deg.to_radians();
                    [rad.cos(), rad.sin()]
                })
                .collect())
        }
    }
}

fn branch_spec() -> SequentialSpec {
    SequentialSpec {
        input: ValueShape::Spatial(PATCH_SIZE, PATCH_SIZE, 1),
        layers: vec![
            LayerSpec::Conv {
                filter_h: 7,
                filter_w: 7,
                out_channels: 64,
                activation: Activation::Relu,
            },
            // 122 -> 41 requires ceil rounding at stride 3
            LayerSpec::MaxPool {
                window_h: 3,
                window_w: 3,
                stride: 3,
                rounding: PoolRounding::Ceil,
            },
            LayerSpec::Conv {
                filter_h: 3,
                filter_w: 3,
                out_channels: 128,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool {
                window_h: 3,
                window_w: 3,
                stride: 3,
                rounding: PoolRounding::Floor,
            },
            LayerSpec::Fc {
                out_features: 256,
                activation: Activation::Relu,
            },
        ],
    }
}

fn head_spec() -> SequentialSpec {
    SequentialSpec {
        input: ValueShape::Flat(2 * 256 + DIR_FILTER_COUNT),
        layers: vec![
            LayerSpec::Fc {
                out_features: 1024,
                activation: Activation::Relu,
            },
            LayerSpec::Fc {
                out_features: 2048,
                activation: Activation::Relu,
            },
            // dropout on the last hidden layer only
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Fc {
                out_features: CLASS_COUNT,
                activation: Activation::None,
            },
        ],
    }
}

/// The three-branch network.
pub struct ClassifierNet<T> {
    pub normal: Sequential<T>,
    pub wide: Sequential<T>,
    pub dir: FcLayer<T>,
    pub head: Sequential<T>,
    pub seed: u64,
    pub dir_init: DirInitMode,
}

impl<T: Scalar> ClassifierNet<T> {
    /// Canonical description hashed into weight files.
    pub fn canonical_string(&self) -> String {
        format!(
            "classifier|normal:{}|wide:{}|dir:fc:2->{}:Relu|head:{}",
            self.normal.spec().canonical_string(),
            self.wide.spec().canonical_string(),
            DIR_FILTER_COUNT,
            self.head.spec().canonical_string()
        )
    }

    pub fn param_layout(&self) -> Vec<usize> {
        let mut layout = self.normal.param_layout();
        layout.extend(self.wide.param_layout());
        layout.push(self.dir.weights.len());
        layout.push(self.dir.bias.len());
        layout.extend(self.head.param_layout());
        layout
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = self.normal.params_mut();
        out.extend(self.wide.params_mut());
        out.push(&mut self.dir.weights);
        out.push(&mut self.dir.bias);
        out.extend(self.head.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = self.normal.params();
        out.extend(self.wide.params());
        out.push(self.dir.weights.as_slice());
        out.push(self.dir.bias.as_slice());
        out.extend(self.head.params());
        out
    }

    /// Direction-branch filters as row vectors (weights are stored
    /// `[in=2][out]`).
    pub fn direction_filters(&self) -> Vec<[f64; 2]> {
        (0..self.dir.out_features)
            .map(|o| {
                [
                    self.dir.weights[o].to_f64(),
                    self.dir.weights[self.dir.out_features + o].to_f64(),
                ]
            })
            .collect()
    }
}

/// Builds and initializes the classifier. Image-branch and head weights are
/// drawn from a stream keyed only by `seed`, so two builds with the same
/// seed but different `dir_init` share them bitwise.
pub fn build_classifier<T: Scalar>(seed: u64, dir_init: DirInitMode) -> Result<ClassifierNet<T>> {
    let mut normal = Sequential::<T>::zeros(branch_spec())?;
    let mut wide = Sequential::<T>::zeros(branch_spec())?;
    let mut head = Sequential::<T>::zeros(head_spec())?;
    let mut image_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, IMAGE_INIT_SALT));
    normal.init_gaussian(&mut image_rng, 0.01);
    wide.init_gaussian(&mut image_rng, 0.01);
    head.init_gaussian(&mut image_rng, 0.01);

    let mut dir = FcLayer::<T>::zeros(2, DIR_FILTER_COUNT, Activation::Relu);
    let mut dir_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, DIR_INIT_SALT));
    let filters = init_direction_filters(&dir_init, DIR_FILTER_COUNT, &mut dir_rng)?;
    for (o, f) in filters.iter().enumerate() {
        dir.weights[o] = T::from_f64(f[0]);
        dir.weights[DIR_FILTER_COUNT + o] = T::from_f64(f[1]);
    }
    // biases stay zero so activation is governed by the inner product with
    // the propagation direction

    Ok(ClassifierNet {
        normal,
        wide,
        dir,
        head,
        seed,
        dir_init,
    })
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

fn concat_features<T: Scalar>(nf: &[T], wf: &[T], df: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(nf.len() + wf.len() + df.len());
    out.extend_from_slice(nf);
    out.extend_from_slice(wf);
    out.extend_from_slice(df);
    out
}

/// Posterior over the four classes for one sample.
pub fn classify_patch<T: Scalar>(
    net: &ClassifierNet<T>,
    sample: &PatchSample<T>,
) -> Result<Vec<T>> {
    sample.validate()?;
    let nf = net
        .normal
        .eval(Value::Spatial(sample.normal_view.clone()))?
        .into_flat();
    let wf = net
        .wide
        .eval(Value::Spatial(sample.wide_view.clone()))?
        .into_flat();
    let df = net.dir.forward(&sample.direction)?;
    let logits = net
        .head
        .eval(Value::Flat(concat_features(&nf, &wf, &df)))?
        .into_flat();
    Ok(softmax(&logits))
}

/// Posteriors for many samples; conv branches run per sample, fully
/// connected layers run batched.
pub fn classify_batch<T: Scalar>(
    net: &ClassifierNet<T>,
    samples: &[PatchSample<T>],
) -> Result<Vec<Vec<T>>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    for s in samples {
        s.validate()?;
    }
    let batch = samples.len();
    let nf = crate::par::map_slice(samples, |s| {
        net.normal.eval_spatial_prefix(s.normal_view.clone())
    });
    let wf = crate::par::map_slice(samples, |s| {
        net.wide.eval_spatial_prefix(s.wide_view.clone())
    });
    let mut n_stack = Vec::with_capacity(batch * 256);
    for f in nf {
        n_stack.extend_from_slice(&f?);
    }
    let mut w_stack = Vec::with_capacity(batch * 256);
    for f in wf {
        w_stack.extend_from_slice(&f?);
    }
    let n_feats = net.normal.eval_fc_suffix_batch(n_stack, batch)?;
    let w_feats = net.wide.eval_fc_suffix_batch(w_stack, batch)?;
    let mut d_stack = Vec::with_capacity(batch * 2);
    for s in samples {
        d_stack.extend_from_slice(&s.direction);
    }
    let d_feats = net.dir.forward_batch(&d_stack, batch)?;

    let nw = n_feats.len() / batch;
    let ww = w_feats.len() / batch;
    let dw = d_feats.len() / batch;
    let mut concat = Vec::with_capacity(batch * (nw + ww + dw));
    for i in 0..batch {
        concat.extend_from_slice(&n_feats[i * nw..(i + 1) * nw]);
        concat.extend_from_slice(&w_feats[i * ww..(i + 1) * ww]);
        concat.extend_from_slice(&d_feats[i * dw..(i + 1) * dw]);
    }
    let logits = net.head.eval_fc_suffix_batch(concat, batch)?;
    let lw = logits.len() / batch;
    Ok(logits.chunks(lw).map(|row| softmax(row)).collect())
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Evaluate test accuracy every this many iterations.
    pub eval_period: usize,
    /// Cap on test samples used per evaluation (seeded subset); `None` uses
    /// the full test split.
    pub eval_subset: Option<usize>,
    /// Stop once an evaluation reaches this test accuracy.
    pub target_accuracy: Option<f64>,
    pub seed: u64,
    /// Fixed number of deterministic gradient-accumulation chunks.
    pub grad_chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300,
            batch_size: 32,
            eval_period: 25,
            eval_subset: Some(512),
            target_accuracy: None,
            seed: 0,
            grad_chunks: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

pub type LearningCurve = Vec<CurvePoint>;

/// Loss and gradients for one sample. Gradient arrays align with
/// [`ClassifierNet::param_layout`].
fn train_sample<T: Scalar>(
    net: &ClassifierNet<T>,
    sample: &PatchSample<T>,
    drop_rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradients<T>)> {
    let label = sample
        .label
        .ok_or_else(|| Error::Input("training sample without a label".into()))?;

    let (nf, n_tape) = net.normal.forward_train(
        Value::Spatial(sample.normal_view.clone()),
        DropoutMode::Train,
        drop_rng,
    )?;
    let (wf, w_tape) = net.wide.forward_train(
        Value::Spatial(sample.wide_view.clone()),
        DropoutMode::Train,
        drop_rng,
    )?;
    let df = net.dir.forward(&sample.direction)?;
    let nf = nf.into_flat();
    let wf = wf.into_flat();
    let concat = concat_features(&nf, &wf, &df);
    let (logits, h_tape) =
        net.head
            .forward_train(Value::Flat(concat.clone()), DropoutMode::Train, drop_rng)?;
    let (loss, grad_logits) = softmax_cross_entropy(&logits.into_flat(), label.index())?;

    let mut head_grads = Gradients::zeros(&net.head.param_layout());
    let grad_concat = net
        .head
        .backward(&h_tape, Value::Flat(grad_logits), &mut head_grads)?
        .into_flat();

    let (gn, rest) = grad_concat.split_at(nf.len());
    let (gw, gd) = rest.split_at(wf.len());

    let mut dir_gw = vec![T::zero(); net.dir.weights.len()];
    let mut dir_gb = vec![T::zero(); net.dir.bias.len()];
    net.dir
        .backward(&sample.direction, &df, gd, &mut dir_gw, &mut dir_gb);

    let mut normal_grads = Gradients::zeros(&net.normal.param_layout());
    net.normal
        .backward(&n_tape, Value::Flat(gn.to_vec()), &mut normal_grads)?;
    let mut wide_grads = Gradients::zeros(&net.wide.param_layout());
    net.wide
        .backward(&w_tape, Value::Flat(gw.to_vec()), &mut wide_grads)?;

    let mut arrays = normal_grads.arrays;
    arrays.extend(wide_grads.arrays);
    arrays.push(dir_gw);
    arrays.push(dir_gb);
    arrays.extend(head_grads.arrays);
    Ok((loss.to_f64(), Gradients { arrays }))
}

/// Test accuracy over a set of dataset refs.
pub fn evaluate_accuracy<T: Scalar>(
    net: &ClassifierNet<T>,
    dataset: &PatchDataset,
    refs: &[PatchRef],
) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::Parameter("no samples to evaluate".into()));
    }
    let mut correct = 0usize;
    for chunk in refs.chunks(256) {
        let samples: Vec<PatchSample<T>> =
            crate::par::map_slice(chunk, |r| dataset.sample::<T>(r));
        let posts = classify_batch(net, &samples)?;
        for (r, p) in chunk.iter().zip(posts) {
            let pred = argmax(&p);
            if pred == r.label.index() {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / refs.len() as f64)
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Trains the classifier with mini-batch ADAM. Gradients are accumulated in
/// a fixed number of chunks merged in order, so runs are reproducible for a
/// given seed regardless of thread count. Returns the learning curve
/// (train loss averaged since the previous evaluation, test accuracy per
/// evaluation).
pub fn train_classifier<T: Scalar>(
    net: &mut ClassifierNet<T>,
    dataset: &PatchDataset,
    cfg: &TrainConfig,
    adam: &AdamConfig,
) -> Result<LearningCurve> {
    adam.validate()?;
    if cfg.iterations == 0 {
        return Ok(Vec::new());
    }
    if dataset.train().is_empty() {
        return Err(Error::Parameter("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Parameter("batch size must be >= 1".into()));
    }

    // fixed evaluation subset for curve points
    let eval_refs: Vec<PatchRef> = {
        let mut refs = dataset.test().to_vec();
        if let Some(cap) = cfg.eval_subset {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, EVAL_SUBSET_SALT));
            use rand::seq::SliceRandom;
            refs.shuffle(&mut rng);
            refs.truncate(cap);
        }
        refs
    };

    let mut state = AdamState::<T>::zeros(&net.param_layout());
    let mut batch_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, BATCH_SALT));
    let mut curve = Vec::new();
    let mut loss_acc = 0.0;
    let mut loss_n = 0usize;

    for iter in 0..cfg.iterations {
        let indices: Vec<usize> = (0..cfg.batch_size)
            .map(|_| batch_rng.random_range(0..dataset.train().len()))
            .collect();

        let ranges = crate::par::chunk_ranges(indices.len(), cfg.grad_chunks);
        let chunk_results: Vec<Result<(f64, Gradients<T>)>> =
            crate::par::map_slice(&ranges, |range| {
                let mut acc: Option<Gradients<T>> = None;
                let mut loss_sum = 0.0;
                for k in range.clone() {
                    let r = &dataset.train()[indices[k]];
                    let sample = dataset.sample::<T>(r);
                    let mut drop_rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        net.seed ^ DROPOUT_SALT,
                        ((iter as u64) << 32) | k as u64,
                    ));
                    let (loss, grads) = train_sample(net, &sample, &mut drop_rng)?;
                    loss_sum += loss;
                    match &mut acc {
                        None => acc = Some(grads),
                        Some(a) => a.add_assign(&grads),
                    }
                }
                Ok((loss_sum, acc.expect("chunk ranges are nonempty")))
            });

        let mut total: Option<Gradients<T>> = None;
        let mut batch_loss = 0.0;
        for cr in chunk_results {
            let (l, g) = cr?;
            batch_loss += l;
            match &mut total {
                None => total = Some(g),
                Some(t) => t.add_assign(&g),
            }
        }
        let mut total = total.expect("batch is nonempty");
        total.scale(T::from_f64(1.0 / cfg.batch_size as f64));
        loss_acc += batch_loss / cfg.batch_size as f64;
        loss_n += 1;

        adam_step(&mut net.params_mut(), &total, &mut state, adam)?;

        let is_eval = (iter + 1) % cfg.eval_period.max(1) == 0 || iter + 1 == cfg.iterations;
        if is_eval {
            let acc = if eval_refs.is_empty() {
                f64::NAN
            } else {
                evaluate_accuracy(net, dataset, &eval_refs)?
            };
            curve.push(CurvePoint {
                iteration: iter + 1,
                train_loss: loss_acc / loss_n.max(1) as f64,
                test_accuracy: acc,
            });
            loss_acc = 0.0;
            loss_n = 0;
            if let Some(target) = cfg.target_accuracy {
                if acc >= target {
                    break;
                }
            }
        }
    }
    Ok(curve)
}

// ---------------------------------------------------------------------------
// Semantic maps
// ---------------------------------------------------------------------------

fn sample_at<T: Scalar>(
    image: &UltrasoundImage,
    x: u32,
    y: u32,
) -> Result<PatchSample<T>> {
    let (normal_view, wide_view) = extract_views::<T>(image, (x, y));
    let (u, v) = propagation_direction((x as f64, y as f64), image.probe_origin)?;
    Ok(PatchSample {
        normal_view,
        wide_view,
        direction: [T::from_f64(u), T::from_f64(v)],
        label: None,
        source: (image.id.clone(), x, y),
    })
}

/// Reference semantic-map path: classifies every anechoic pixel through the
/// patch pipeline one sample at a time (batched only across pixels). This is
/// the definitional implementation; `semantic_map` is the production path.
pub fn semantic_map_reference<T: Scalar>(
    image: &UltrasoundImage,
    net: &ClassifierNet<T>,
) -> Result<SemanticMap> {
    let mask = anechoic_mask(image);
    let mut map = SemanticMap::empty(image.width(), image.height());
    let mut posterior = vec![0.0f32; image.width() * image.height()];
    for chunk in mask.pixels.chunks(256) {
        let samples: Vec<Result<PatchSample<T>>> =
            crate::par::map_slice(chunk, |&(x, y)| sample_at(image, x, y));
        let mut batch = Vec::with_capacity(chunk.len());
        for s in samples {
            batch.push(s?);
        }
        let posts = classify_batch(net, &batch)?;
        for (&(x, y), p) in chunk.iter().zip(posts) {
            let idx = argmax(&p);
            let label = ClassLabel::from_index(idx).expect("4-class posterior");
            map.set_label(x as usize, y as usize, label);
            posterior[y as usize * image.width() + x as usize] = p[idx].to_f64() as f32;
        }
    }
    map.max_posterior = Some(posterior);
    Ok(map)
}

/// Labels every anechoic pixel with the argmax class of the classifier
/// posterior. Uses the dense shared-convolution path.
pub fn semantic_map<T: Scalar>(
    image: &UltrasoundImage,
    net: &ClassifierNet<T>,
) -> Result<SemanticMap> {
    crate::dense::semantic_map_dense(image, net)
}
