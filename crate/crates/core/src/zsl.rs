//! Zero-shot transfer methods and the joint seen/unseen scorer.
//!
//! * **ConSE** maps a sample to the probability-weighted convex combination
//!   of its top-T seen-class embeddings and ranks classes by cosine.
//! * **SynC** fits phantom classifiers `v_r` so each trained seen classifier
//!   is reproduced as `w_c ≈ Σ_r s_cr v_r`, with `s_cr` a softmax of
//!   `-σ‖a_c - b_r‖²`; unseen classifiers are synthesized the same way.
//! * **LatEm** scores `max_i xᵀ W_i s(y)` over K bilinear maps and is fit
//!   with a pairwise ranking hinge; K = 1 is SJE.
//!
//! Ties are broken toward the lowest class index everywhere.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, LinearModel, LossKind, TrainConfig};
use crate::dataset::{ClassEmbeddingTable, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::ScoreMatrix;
use crate::io;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "conse")]
    Conse,
    #[serde(rename = "sync-ovo")]
    SyncOvo,
    #[serde(rename = "sync-struct")]
    SyncStruct,
    #[serde(rename = "latem")]
    Latem,
    #[serde(rename = "sje")]
    Sje,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Conse,
        Method::SyncOvo,
        Method::SyncStruct,
        Method::Latem,
        Method::Sje,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Conse => "conse",
            Method::SyncOvo => "sync-ovo",
            Method::SyncStruct => "sync-struct",
            Method::Latem => "latem",
            Method::Sje => "sje",
        }
    }

    /// Trains this method on the dataset's seen classes (`split.fit_samples()`).
    pub fn train(self, dataset: &Dataset, params: &Hyperparams) -> Result<TrainedModel> {
        Ok(match self {
            Method::Conse => TrainedModel::Conse(conse_train(dataset, &params.train, params.top_t)?),
            Method::SyncOvo | Method::SyncStruct => {
                let loss = if self == Method::SyncOvo {
                    LossKind::OvrSquaredHinge
                } else {
                    LossKind::Struct
                };
                TrainedModel::Sync(sync_train(
                    dataset,
                    &params.train,
                    loss,
                    params.bandwidth,
                    params.ridge_lambda,
                )?)
            }
            Method::Latem => {
                TrainedModel::Latem(latem_train(dataset, &params.train, params.latent_count)?)
            }
            Method::Sje => TrainedModel::Latem(latem_train(dataset, &params.train, 1)?),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Validation(format!(
                    "unknown method {s:?}; accepted: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Every tunable knob of the three method families. Fields that a method
/// does not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// ConSE: number of top seen classes combined.
    pub top_t: usize,
    /// SynC: similarity bandwidth σ.
    pub bandwidth: f64,
    /// SynC: ridge on the phantom classifiers.
    pub ridge_lambda: f64,
    /// LatEm: number of bilinear maps K.
    pub latent_count: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            train: TrainConfig::default(),
            top_t: 5,
            bandwidth: 1.0,
            ridge_lambda: 1e-4,
            latent_count: 4,
        }
    }
}

fn seen_training_data(dataset: &Dataset) -> (Matrix, Vec<usize>, Vec<usize>) {
    let split = dataset.split();
    let (x, y) = dataset.subset(&split.fit_samples());
    (x, y, split.seen_classes.clone())
}

// ---------------------------------------------------------------- ConSE

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConseModel {
    /// Softmax classifier over the seen classes.
    pub base: LinearModel,
    /// Embedding of each base row's class, in row order.
    pub seen_embeddings: Matrix,
    pub top_t: usize,
}

impl ConseModel {
    pub fn new(base: LinearModel, seen_embeddings: Matrix, top_t: usize) -> Result<Self> {
        if seen_embeddings.rows() != base.class_count() {
            return Err(Error::Argument(format!(
                "{} seen embeddings for {} classes",
                seen_embeddings.rows(),
                base.class_count()
            )));
        }
        if top_t == 0 || top_t > base.class_count() {
            return Err(Error::Argument(format!(
                "top_t must lie in 1..={}, got {top_t}",
                base.class_count()
            )));
        }
        Ok(ConseModel {
            base,
            seen_embeddings,
            top_t,
        })
    }
}

pub fn conse_train(dataset: &Dataset, cfg: &TrainConfig, top_t: usize) -> Result<ConseModel> {
    let seen = &dataset.split().seen_classes;
    if top_t == 0 || top_t > seen.len() {
        return Err(Error::Argument(format!(
            "top_t must lie in 1..={} (the number of seen classes), got {top_t}",
            seen.len()
        )));
    }
    let (x, y, classes) = seen_training_data(dataset);
    let base = classifiers::train_softmax(&x, &y, &classes, cfg)?;
    let embeds = dataset.classes().select(&base.class_index_map);
    ConseModel::new(base, embeds, top_t)
}

/// `g(x) = Σ_t (p_t / Z) s(f(x,t))` over the top-T seen classes.
pub fn conse_embed(model: &ConseModel, x: &[f64]) -> Result<Vec<f64>> {
    let probs = classifiers::predict_proba(&model.base, x)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    // stable sort keeps lower class index first among equal probabilities
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let top = &order[..model.top_t];
    let z: f64 = top.iter().map(|&r| probs[r]).sum();
    let mut g = vec![0.0; model.seen_embeddings.cols()];
    for &r in top {
        linalg::axpy(probs[r] / z, model.seen_embeddings.row(r), &mut g);
    }
    Ok(g)
}

/// Candidate with the highest cosine to `g(x)`.
pub fn conse_predict(
    model: &ConseModel,
    x: &[f64],
    candidates: &[usize],
    classes: &ClassEmbeddingTable,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Argument("no candidate classes".into()));
    }
    let g = conse_embed(model, x)?;
    let mut best: Option<(usize, f64)> = None;
    for &c in candidates {
        let s = embedding_of(classes, c)?;
        if linalg::norm(s) == 0.0 {
            return Err(Error::Scoring(format!("class {c} has a zero-norm embedding")));
        }
        let score = linalg::cosine(&g, s);
        if better(score, c, best) {
            best = Some((c, score));
        }
    }
    Ok(best.map(|(c, _)| c).expect("non-empty candidates"))
}

fn better(score: f64, class: usize, best: Option<(usize, f64)>) -> bool {
    match best {
        None => true,
        Some((bc, bs)) => score > bs || (score == bs && class < bc),
    }
}

fn embedding_of(classes: &ClassEmbeddingTable, c: usize) -> Result<&[f64]> {
    if c >= classes.class_count() {
        return Err(Error::Argument(format!(
            "class {c} has no embedding (table has {})",
            classes.class_count()
        )));
    }
    Ok(classes.embedding(c))
}

// ---------------------------------------------------------------- SynC

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncModel {
    /// Trained seen-class classifiers `w_c` (no bias).
    pub base: LinearModel,
    /// Phantom semantic coordinates `b_r`.
    pub phantom_coords: Matrix,
    /// Phantom classifiers `v_r`.
    pub phantom_weights: Matrix,
    pub bandwidth: f64,
    pub ridge_lambda: f64,
}

/// `s_r = softmax_r(-σ‖a - b_r‖²)`.
pub fn sync_similarity(class_coord: &[f64], phantom_coords: &Matrix, bandwidth: f64) -> Vec<f64> {
    let logits: Vec<f64> = phantom_coords
        .iter_rows()
        .map(|b| -bandwidth * linalg::squared_distance(class_coord, b))
        .collect();
    linalg::softmax(&logits)
}

/// Similarity rows for every class coordinate in `coords`.
pub fn similarity_matrix(coords: &Matrix, phantom_coords: &Matrix, bandwidth: f64) -> Matrix {
    let mut s = Matrix::zeros(coords.rows(), phantom_coords.rows());
    for (c, a) in coords.iter_rows().enumerate() {
        s.row_mut(c)
            .copy_from_slice(&sync_similarity(a, phantom_coords, bandwidth));
    }
    s
}

/// `‖W - S V‖²_F`.
pub fn distortion(weights: &Matrix, similarity: &Matrix, phantoms: &Matrix) -> Result<f64> {
    Ok(weights.sub(&similarity.matmul(phantoms)?)?.frobenius_sq())
}

/// Closed-form `argmin_V ‖W - S V‖²_F + λ‖V‖²_F`, i.e. `(SᵀS + λI) V = SᵀW`.
pub fn sync_fit_phantoms(base: &LinearModel, similarity: &Matrix, ridge_lambda: f64) -> Result<Matrix> {
    fit_phantoms(&base.weights, similarity, ridge_lambda)
}

pub fn fit_phantoms(weights: &Matrix, similarity: &Matrix, ridge_lambda: f64) -> Result<Matrix> {
    if similarity.rows() != weights.rows() {
        return Err(Error::Argument(format!(
            "similarity has {} rows, weights have {}",
            similarity.rows(),
            weights.rows()
        )));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::Argument(format!(
            "ridge_lambda must be non-negative, got {ridge_lambda}"
        )));
    }
    let r = similarity.cols();
    let d = weights.cols();
    let s = nalgebra::DMatrix::from_row_slice(similarity.rows(), r, similarity.as_slice());
    let w = nalgebra::DMatrix::from_row_slice(weights.rows(), d, weights.as_slice());
    let st = s.transpose();
    let normal = &st * &s + nalgebra::DMatrix::identity(r, r) * ridge_lambda;
    let rhs = &st * &w;
    let scale = (0..r).map(|i| normal[(i, i)]).fold(0.0f64, f64::max);
    let chol = normal.cholesky().ok_or_else(|| {
        Error::Solver(
            "normal matrix SᵀS + λI is singular; use a positive ridge_lambda".into(),
        )
    })?;
    let l = chol.l_dirty();
    if (0..r).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * scale) {
        return Err(Error::Solver(
            "normal matrix SᵀS + λI is numerically singular; use a positive ridge_lambda".into(),
        ));
    }
    let v = chol.solve(&rhs);
    let out = Matrix::from_fn(r, d, |i, j| v[(i, j)]);
    if !out.is_finite() {
        return Err(Error::Solver(
            "phantom solve produced non-finite values; use a positive ridge_lambda".into(),
        ));
    }
    Ok(out)
}

pub fn sync_train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    base_loss: LossKind,
    bandwidth: f64,
    ridge_lambda: f64,
) -> Result<SyncModel> {
    if base_loss == LossKind::Softmax {
        return Err(Error::Argument(
            "SynC base classifiers use ovr_sq_hinge or struct".into(),
        ));
    }
    if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
        return Err(Error::Argument(format!("bandwidth must be non-negative, got {bandwidth}")));
    }
    let (x, y, classes) = seen_training_data(dataset);
    if classes.len() < 2 {
        return Err(Error::Training("SynC needs at least two seen classes".into()));
    }
    // Synthesized classifiers carry no bias, so the seen ones are trained without it.
    let cfg = TrainConfig {
        fit_bias: false,
        ..cfg.clone()
    };
    let base = classifiers::train(base_loss, &x, &y, &classes, &cfg)?;
    let phantom_coords = dataset.classes().select(&base.class_index_map);
    let s = similarity_matrix(&phantom_coords, &phantom_coords, bandwidth);
    let phantom_weights = sync_fit_phantoms(&base, &s, ridge_lambda)?;
    Ok(SyncModel {
        base,
        phantom_coords,
        phantom_weights,
        bandwidth,
        ridge_lambda,
    })
}

/// `w = Σ_r s_r v_r` for an arbitrary semantic coordinate.
pub fn sync_synthesize(model: &SyncModel, class_coord: &[f64]) -> Vec<f64> {
    let s = sync_similarity(class_coord, &model.phantom_coords, model.bandwidth);
    model.phantom_weights.vec_mul(&s)
}

impl SyncModel {
    /// Per-seen-class distortion `‖w_c - Σ_r s_cr v_r‖²`, in base row order.
    pub fn class_distortion(&self) -> Vec<f64> {
        (0..self.base.class_count())
            .map(|r| {
                let synth = sync_synthesize(self, self.phantom_coords.row(r));
                linalg::squared_distance(self.base.weights.row(r), &synth)
            })
            .collect()
    }
}

// ---------------------------------------------------------------- LatEm

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatemModel {
    /// K maps, each D×E.
    pub maps: Vec<Matrix>,
}

impl LatemModel {
    pub fn new(maps: Vec<Matrix>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Argument("LatEm needs at least one map".into()))?;
        let (d, e) = (first.rows(), first.cols());
        if maps.iter().any(|m| m.rows() != d || m.cols() != e || !m.is_finite()) {
            return Err(Error::Argument("LatEm maps must share a shape and be finite".into()));
        }
        Ok(LatemModel { maps })
    }

    pub fn latent_count(&self) -> usize {
        self.maps.len()
    }

    pub fn feat_dims(&self) -> usize {
        self.maps[0].rows()
    }

    pub fn embed_dims(&self) -> usize {
        self.maps[0].cols()
    }

    /// `xᵀ W_i` for every map.
    fn projections(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.maps.iter().map(|w| w.vec_mul(x)).collect()
    }

    fn check(&self, x: &[f64], s: &[f64]) -> Result<()> {
        if x.len() != self.feat_dims() || s.len() != self.embed_dims() {
            return Err(Error::Argument(format!(
                "LatEm expects {}-dim inputs and {}-dim embeddings, got {} and {}",
                self.feat_dims(),
                self.embed_dims(),
                x.len(),
                s.len()
            )));
        }
        Ok(())
    }
}

/// Best map index and its score for precomputed projections.
fn best_map(projections: &[Vec<f64>], s: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in projections.iter().enumerate() {
        let v = linalg::dot(p, s);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `max_i xᵀ W_i s(y)`.
pub fn latem_score(model: &LatemModel, x: &[f64], class_embed: &[f64]) -> Result<f64> {
    model.check(x, class_embed)?;
    Ok(best_map(&model.projections(x), class_embed).1)
}

/// Ranking hinge of one sample, `Σ_{y≠y_n} [1 + F(x;y) - F(x;y_n)]_+`, and
/// its subgradient with respect to each map. `embeds` holds the candidate
/// class embeddings and `target` indexes the true class among them.
pub fn latem_sample_loss(
    model: &LatemModel,
    x: &[f64],
    target: usize,
    embeds: &Matrix,
) -> Result<(f64, Vec<Matrix>)> {
    if target >= embeds.rows() {
        return Err(Error::Argument(format!("target row {target} out of range")));
    }
    model.check(x, embeds.row(target))?;
    let proj = model.projections(x);
    let (it, ft) = best_map(&proj, embeds.row(target));
    let mut grads = vec![Matrix::zeros(model.feat_dims(), model.embed_dims()); model.latent_count()];
    let mut loss = 0.0;
    for y in 0..embeds.rows() {
        if y == target {
            continue;
        }
        let (iv, fv) = best_map(&proj, embeds.row(y));
        let margin = 1.0 + fv - ft;
        if margin > 0.0 {
            loss += margin;
            add_outer(&mut grads[iv], 1.0, x, embeds.row(y));
            add_outer(&mut grads[it], -1.0, x, embeds.row(target));
        }
    }
    Ok((loss, grads))
}

/// Total ranking objective over a sample set.
pub fn latem_objective(model: &LatemModel, x: &Matrix, targets: &[usize], embeds: &Matrix) -> Result<f64> {
    let mut total = 0.0;
    for (row, &t) in x.iter_rows().zip(targets) {
        total += latem_sample_loss(model, row, t, embeds)?.0;
    }
    Ok(total)
}

/// `m += a · x sᵀ`
fn add_outer(m: &mut Matrix, a: f64, x: &[f64], s: &[f64]) {
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            linalg::axpy(a * xi, s, m.row_mut(i));
        }
    }
}

/// Random initial maps, i.i.d. Gaussian with std `1/sqrt(D·E)`.
pub fn latem_init(feat_dims: usize, embed_dims: usize, latent_count: usize, rng: &mut ChaCha8Rng) -> Result<LatemModel> {
    if latent_count == 0 {
        return Err(Error::Argument("latent_count must be at least 1".into()));
    }
    let std = 1.0 / ((feat_dims * embed_dims) as f64).sqrt();
    let dist = Normal::new(0.0, std).map_err(|e| Error::Argument(e.to_string()))?;
    let maps = (0..latent_count)
        .map(|_| Matrix::from_fn(feat_dims, embed_dims, |_, _| dist.sample(rng)))
        .collect();
    LatemModel::new(maps)
}

/// Per-sample SGD on the ranking hinge starting from `model`.
///
/// Samples are visited in a fresh seeded shuffle each epoch; within a
/// sample every violating wrong class is processed in index order, moving
/// the violator's best map by `-η x s(y)ᵀ` and the true class's best map by
/// `+η x s(y_n)ᵀ`. Epoch `e` uses `η = learning_rate / sqrt(e)`.
pub fn latem_fit(
    mut model: LatemModel,
    x: &Matrix,
    targets: &[usize],
    embeds: &Matrix,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LatemModel> {
    cfg.validate()?;
    if x.rows() != targets.len() {
        return Err(Error::Argument("row/label count mismatch".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= embeds.rows()) {
        return Err(Error::Argument(format!("target row {t} out of range")));
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 1..=cfg.epochs {
        let eta = cfg.step_size(epoch);
        order.shuffle(rng);
        for &n in &order {
            let xn = x.row(n);
            let t = targets[n];
            let xx = linalg::dot(xn, xn);
            let mut proj = model.projections(xn);
            for y in 0..embeds.rows() {
                if y == t {
                    continue;
                }
                let (iv, fv) = best_map(&proj, embeds.row(y));
                let (it, ft) = best_map(&proj, embeds.row(t));
                if 1.0 + fv - ft > 0.0 {
                    add_outer(&mut model.maps[iv], -eta, xn, embeds.row(y));
                    add_outer(&mut model.maps[it], eta, xn, embeds.row(t));
                    linalg::axpy(-eta * xx, embeds.row(y), &mut proj[iv]);
                    linalg::axpy(eta * xx, embeds.row(t), &mut proj[it]);
                }
            }
        }
    }
    if model.maps.iter().any(|m| !m.is_finite()) {
        return Err(Error::Training("LatEm diverged; lower the learning rate".into()));
    }
    Ok(model)
}

pub fn latem_train(dataset: &Dataset, cfg: &TrainConfig, latent_count: usize) -> Result<LatemModel> {
    let (x, y, classes) = seen_training_data(dataset);
    if classes.len() < 2 {
        return Err(Error::Training("LatEm needs at least two seen classes".into()));
    }
    let embeds = dataset.classes().select(&classes);
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.binary_search(l).expect("split validated"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = latem_init(dataset.feature_dims(), dataset.classes().embed_dims(), latent_count, &mut rng)?;
    latem_fit(init, &x, &targets, &embeds, cfg, &mut rng)
}

// ---------------------------------------------------------------- joint scoring

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Conse(ConseModel),
    Sync(SyncModel),
    Latem(LatemModel),
}

/// Scores any class of the embedding table on one comparable scale.
#[derive(Debug, Clone)]
pub struct JointScorer {
    method: Method,
    model: TrainedModel,
    classes: ClassEmbeddingTable,
    split: SplitSpec,
    // SynC classifiers for every class in the table: trained rows for the
    // base classes, synthesized rows otherwise.
    sync_weights: Option<Matrix>,
}

impl JointScorer {
    pub fn new(method: Method, model: TrainedModel, classes: ClassEmbeddingTable, split: SplitSpec) -> Result<Self> {
        let consistent = matches!(
            (method, &model),
            (Method::Conse, TrainedModel::Conse(_))
                | (Method::SyncOvo | Method::SyncStruct, TrainedModel::Sync(_))
                | (Method::Latem | Method::Sje, TrainedModel::Latem(_))
        );
        if !consistent {
            return Err(Error::Argument(format!("model does not belong to method {method}")));
        }
        let sync_weights = match &model {
            TrainedModel::Sync(m) => {
                let mut w = Matrix::zeros(classes.class_count(), m.base.dims());
                for c in 0..classes.class_count() {
                    let row = match m.base.row_of(c) {
                        Some(r) => m.base.weights.row(r).to_vec(),
                        None => sync_synthesize(m, classes.embedding(c)),
                    };
                    w.row_mut(c).copy_from_slice(&row);
                }
                Some(w)
            }
            _ => None,
        };
        Ok(JointScorer {
            method,
            model,
            classes,
            split,
            sync_weights,
        })
    }

    pub fn for_dataset(method: Method, model: TrainedModel, dataset: &Dataset) -> Result<Self> {
        JointScorer::new(method, model, dataset.classes().clone(), dataset.split().clone())
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn split(&self) -> &SplitSpec {
        &self.split
    }

    /// Method-specific scores `m_c(x)` for `classes`, in the given order.
    pub fn score_joint(&self, x: &[f64], classes: &[usize]) -> Result<Vec<f64>> {
        for &c in classes {
            embedding_of(&self.classes, c)?;
        }
        match &self.model {
            TrainedModel::Conse(m) => {
                let g = conse_embed(m, x)?;
                Ok(classes
                    .iter()
                    .map(|&c| linalg::cosine(&g, self.classes.embedding(c)))
                    .collect())
            }
            TrainedModel::Sync(m) => {
                m.base.check_dims(x)?;
                let w = self.sync_weights.as_ref().expect("built in new");
                Ok(classes.iter().map(|&c| linalg::dot(w.row(c), x)).collect())
            }
            TrainedModel::Latem(m) => {
                if x.len() != m.feat_dims() {
                    return Err(Error::Argument(format!(
                        "input has {} dims, model expects {}",
                        x.len(),
                        m.feat_dims()
                    )));
                }
                let proj = m.projections(x);
                Ok(classes
                    .iter()
                    .map(|&c| best_map(&proj, self.classes.embedding(c)).1)
                    .collect())
            }
        }
    }

    /// Zero-shot prediction restricted to `candidates`.
    pub fn predict(&self, x: &[f64], candidates: &[usize]) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::Argument("no candidate classes".into()));
        }
        let scores = self.score_joint(x, candidates)?;
        let mut best = None;
        for (&c, &s) in candidates.iter().zip(&scores) {
            if better(s, c, best) {
                best = Some((c, s));
            }
        }
        Ok(best.expect("non-empty").0)
    }

    /// Score matrix over the split's joint label space (seen ∪ unseen,
    /// ascending) for the given samples.
    pub fn score_matrix(&self, features: &Matrix, labels: &[usize], samples: &[usize]) -> Result<ScoreMatrix> {
        let mut columns: Vec<usize> = self
            .split
            .seen_classes
            .iter()
            .chain(&self.split.unseen_classes)
            .copied()
            .collect();
        columns.sort_unstable();
        let seen_mask = columns.iter().map(|&c| self.split.is_seen(c)).collect();
        let mut values = Matrix::zeros(samples.len(), columns.len());
        for (i, &n) in samples.iter().enumerate() {
            let s = self.score_joint(features.row(n), &columns)?;
            values.row_mut(i).copy_from_slice(&s);
        }
        let row_labels = samples.iter().map(|&n| labels[n]).collect();
        ScoreMatrix::new(columns, values, row_labels, seen_mask)
    }

    /// Score matrix on the dataset's test samples.
    pub fn test_scores(&self, dataset: &Dataset) -> Result<ScoreMatrix> {
        self.score_matrix(
            dataset.features().values(),
            dataset.labels(),
            &dataset.split().test_samples,
        )
    }
}

// ---------------------------------------------------------------- model files

/// On-disk model: `{method, hyperparams, tensors}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub model: TrainedModel,
}

#[derive(Serialize, Deserialize)]
struct RawModelFile {
    method: Method,
    hyperparams: Hyperparams,
    tensors: serde_json::Value,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let tensors = match &self.model {
            TrainedModel::Conse(m) => serde_json::to_value(m)?,
            TrainedModel::Sync(m) => serde_json::to_value(m)?,
            TrainedModel::Latem(m) => serde_json::to_value(m)?,
        };
        Ok(serde_json::to_value(RawModelFile {
            method: self.method,
            hyperparams: self.hyperparams.clone(),
            tensors,
        })?)
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let raw: RawModelFile = serde_json::from_value(value)?;
        let model = match raw.method {
            Method::Conse => TrainedModel::Conse(serde_json::from_value(raw.tensors)?),
            Method::SyncOvo | Method::SyncStruct => TrainedModel::Sync(serde_json::from_value(raw.tensors)?),
            Method::Latem | Method::Sje => {
                let m: LatemModel = serde_json::from_value(raw.tensors)?;
                TrainedModel::Latem(LatemModel::new(m.maps)?)
            }
        };
        Ok(ModelFile {
            method: raw.method,
            hyperparams: raw.hyperparams,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = io::read_json(path)?;
        ModelFile::from_json(value)
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, len)
    }

    fn trained_conse() -> &'static (Dataset, JointScorer) {
        static CELL: OnceLock<(Dataset, JointScorer)> = OnceLock::new();
        CELL.get_or_init(|| {
            let ds = synth_generate(&SynthSpec {
                class_count: 8,
                seen_count: 5,
                embed_dims: 4,
                feat_dims: 6,
                samples_per_class: 10,
                noise_sigma: 0.3,
                seed: 9,
                ..SynthSpec::default()
            })
            .unwrap();
            let params = Hyperparams {
                top_t: 3,
                ..Hyperparams::default()
            };
            let model = Method::Conse.train(&ds, &params).unwrap();
            let scorer = JointScorer::for_dataset(Method::Conse, model, &ds).unwrap();
            (ds, scorer)
        })
    }

    proptest! {
        #[test]
        fn similarity_is_on_the_simplex(coord in vec_of(3), phantoms in vec_of(12), sigma in 0.0f64..50.0) {
            let b = Matrix::from_vec(4, 3, phantoms).unwrap();
            let s = sync_similarity(&coord, &b, sigma);
            prop_assert!(s.iter().all(|&v| v >= 0.0));
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn latem_max_dominates_each_map(x in vec_of(3), s in vec_of(2), maps in vec_of(18)) {
            let maps: Vec<Matrix> = maps.chunks(6).map(|c| Matrix::from_vec(3, 2, c.to_vec()).unwrap()).collect();
            let full = latem_score(&LatemModel::new(maps.clone()).unwrap(), &x, &s).unwrap();
            for m in maps {
                prop_assert!(full >= latem_score(&LatemModel::new(vec![m]).unwrap(), &x, &s).unwrap());
            }
        }

        #[test]
        fn conse_ignores_candidate_scale(row in 0usize..80, class in 0usize..8, scale in 0.01f64..100.0) {
            let (ds, scorer) = trained_conse();
            let TrainedModel::Conse(model) = scorer.model() else { unreachable!() };
            let x = ds.features().row(row);
            let all: Vec<usize> = (0..8).collect();
            let before = conse_predict(model, x, &all, ds.classes()).unwrap();
            let mut vectors = ds.classes().vectors().clone();
            vectors.row_mut(class).iter_mut().for_each(|v| *v *= scale);
            let scaled = ClassEmbeddingTable::new(ds.classes().names().to_vec(), vectors).unwrap();
            prop_assert_eq!(conse_predict(model, x, &all, &scaled).unwrap(), before);
        }

        #[test]
        fn unseen_joint_argmax_is_the_zsl_prediction(row in 0usize..80) {
            let (ds, scorer) = trained_conse();
            let TrainedModel::Conse(model) = scorer.model() else { unreachable!() };
            let x = ds.features().row(row);
            let unseen = &ds.split().unseen_classes;
            let scores = scorer.score_joint(x, unseen).unwrap();
            let best = unseen[linalg::argmax(&scores).unwrap()];
            prop_assert_eq!(best, conse_predict(model, x, unseen, ds.classes()).unwrap());
            prop_assert_eq!(scorer.predict(x, unseen).unwrap(), best);
            prop_assert_eq!(scorer.score_joint(x, unseen).unwrap(), scores);
        }
    }
}
