//! Dataset representation, file ingestion, split generation and the
//! synthetic benchmark generator.
//!
//! A [`Dataset`] bundles a feature matrix, per-sample labels, the class
//! embedding table and a [`SplitSpec`]. All constructors validate the type
//! invariants, so downstream code can index without re-checking.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, format_f64, parse_f64};
use crate::linalg::{self, Matrix};

/// N×D sample features with one opaque identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
    sample_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, sample_ids: Vec<String>) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        if values.rows() != sample_ids.len() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} sample ids",
                values.rows(),
                sample_ids.len()
            )));
        }
        if !values.is_finite() {
            return Err(Error::Validation("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureMatrix { values, sample_ids })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }
}

/// Class index per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Validation(format!(
                "sample {i} has label {l}, but there are only {class_count} classes"
            )));
        }
        Ok(LabelVector(labels))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One semantic vector per class, row `c` belonging to class index `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbeddingTable {
    names: Vec<String>,
    vectors: Matrix,
}

impl ClassEmbeddingTable {
    pub fn new(names: Vec<String>, vectors: Matrix) -> Result<Self> {
        if names.len() != vectors.rows() {
            return Err(Error::Validation(format!(
                "{} class names but {} embedding rows",
                names.len(),
                vectors.rows()
            )));
        }
        if !vectors.is_finite() {
            return Err(Error::Validation("class embeddings have non-finite entries".into()));
        }
        for (c, row) in vectors.iter_rows().enumerate() {
            if linalg::norm(row) <= 0.0 {
                return Err(Error::Validation(format!(
                    "class {c} ({}) has a zero embedding",
                    names[c]
                )));
            }
        }
        Ok(ClassEmbeddingTable { names, vectors })
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn embed_dims(&self) -> usize {
        self.vectors.cols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn embedding(&self, class: usize) -> &[f64] {
        self.vectors.row(class)
    }

    /// Embedding rows for `classes`, in the given order.
    pub fn select(&self, classes: &[usize]) -> Matrix {
        self.vectors.select_rows(classes)
    }
}

/// Seen/unseen class partition plus the sample partition built on it.
///
/// Index lists are kept sorted ascending. `val_samples` holds the training
/// samples of the seen classes held out for class-fold tuning (see
/// [`SplitSpec::validation_fold`]); final models train on
/// [`SplitSpec::fit_samples`], which is `train ∪ val`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    pub train_samples: Vec<usize>,
    pub val_samples: Vec<usize>,
    pub test_samples: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self, class_count: usize, labels: &[usize]) -> Result<()> {
        let n = labels.len();
        let seen = checked_set("seen_classes", &self.seen_classes, class_count, "class")?;
        let unseen = checked_set("unseen_classes", &self.unseen_classes, class_count, "class")?;
        if let Some(c) = seen.intersection(&unseen).next() {
            return Err(Error::Validation(format!("class {c} is both seen and unseen")));
        }
        let train = checked_set("train_samples", &self.train_samples, n, "sample")?;
        let val = checked_set("val_samples", &self.val_samples, n, "sample")?;
        let test = checked_set("test_samples", &self.test_samples, n, "sample")?;
        for (a, b, sa, sb) in [
            ("train", "test", &train, &test),
            ("train", "val", &train, &val),
            ("val", "test", &val, &test),
        ] {
            if let Some(i) = sa.intersection(sb).next() {
                return Err(Error::Validation(format!("sample {i} is in both {a} and {b}")));
            }
        }
        for (name, set) in [("train", &train), ("val", &val)] {
            if let Some(&i) = set.iter().find(|&&i| !seen.contains(&labels[i])) {
                return Err(Error::Validation(format!(
                    "{name} sample {i} has label {} which is not a seen class",
                    labels[i]
                )));
            }
        }
        if let Some(&i) = test
            .iter()
            .find(|&&i| !seen.contains(&labels[i]) && !unseen.contains(&labels[i]))
        {
            return Err(Error::Validation(format!(
                "test sample {i} has label {} which is neither seen nor unseen",
                labels[i]
            )));
        }
        Ok(())
    }

    /// Samples used to fit final models: `train ∪ val`, sorted.
    pub fn fit_samples(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .train_samples
            .iter()
            .chain(&self.val_samples)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    /// Seen classes whose samples were routed to `val_samples`.
    pub fn validation_classes(&self, labels: &[usize]) -> Vec<usize> {
        let set: BTreeSet<usize> = self.val_samples.iter().map(|&i| labels[i]).collect();
        set.into_iter().collect()
    }

    /// Class-fold tuning split: validation classes play the unseen role,
    /// the remaining seen classes train on `train_samples`, and the test set
    /// is `val_samples`.
    pub fn validation_fold(&self, labels: &[usize]) -> Result<SplitSpec> {
        let val_classes = self.validation_classes(labels);
        if val_classes.is_empty() {
            return Err(Error::Validation(
                "split has no validation classes to tune on".into(),
            ));
        }
        let seen = self
            .seen_classes
            .iter()
            .copied()
            .filter(|c| val_classes.binary_search(c).is_err())
            .collect();
        Ok(SplitSpec {
            seed: self.seed,
            seen_classes: seen,
            unseen_classes: val_classes,
            train_samples: self.train_samples.clone(),
            val_samples: Vec::new(),
            test_samples: self.val_samples.clone(),
        })
    }

    pub fn is_seen(&self, class: usize) -> bool {
        self.seen_classes.binary_search(&class).is_ok()
    }

    pub fn load(path: &Path) -> Result<SplitSpec> {
        let mut split: SplitSpec = io::read_json(path)?;
        split.canonicalize();
        Ok(split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    fn canonicalize(&mut self) {
        for v in [
            &mut self.seen_classes,
            &mut self.unseen_classes,
            &mut self.train_samples,
            &mut self.val_samples,
            &mut self.test_samples,
        ] {
            v.sort_unstable();
        }
    }
}

fn checked_set(name: &str, items: &[usize], bound: usize, what: &str) -> Result<BTreeSet<usize>> {
    let mut set = BTreeSet::new();
    for &i in items {
        if i >= bound {
            return Err(Error::Validation(format!(
                "{name} references unknown {what} {i} (have {bound})"
            )));
        }
        if !set.insert(i) {
            return Err(Error::Validation(format!("{name} lists {what} {i} twice")));
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: FeatureMatrix,
    labels: LabelVector,
    classes: ClassEmbeddingTable,
    split: SplitSpec,
}

impl Dataset {
    pub fn new(
        features: FeatureMatrix,
        labels: LabelVector,
        classes: ClassEmbeddingTable,
        mut split: SplitSpec,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        // re-check against this table in case labels were built elsewhere
        let labels = LabelVector::new(labels.0, classes.class_count())?;
        split.canonicalize();
        split.validate(classes.class_count(), labels.as_slice())?;
        Ok(Dataset {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        self.labels.as_slice()
    }

    pub fn classes(&self) -> &ClassEmbeddingTable {
        &self.classes
    }

    pub fn split(&self) -> &SplitSpec {
        &self.split
    }

    pub fn feature_dims(&self) -> usize {
        self.features.dims()
    }

    /// Same data under a different split.
    pub fn with_split(&self, split: SplitSpec) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            self.labels.clone(),
            self.classes.clone(),
            split,
        )
    }

    /// Feature rows and labels for the given sample indices.
    pub fn subset(&self, samples: &[usize]) -> (Matrix, Vec<usize>) {
        let x = self.features.values().select_rows(samples);
        let y = samples.iter().map(|&i| self.labels()[i]).collect();
        (x, y)
    }

    pub fn save(&self, feature_path: &Path, embedding_path: &Path, split_path: &Path) -> Result<()> {
        write_features(feature_path, &self.features, self.labels())?;
        write_class_embeddings(embedding_path, &self.classes)?;
        self.split.save(split_path)
    }
}

/// Reads the three dataset files and validates them against each other.
pub fn load_dataset(feature_path: &Path, embedding_path: &Path, split_path: &Path) -> Result<Dataset> {
    let classes = read_class_embeddings(embedding_path)?;
    let (features, labels) = read_features(feature_path)?;
    let labels = LabelVector::new(labels, classes.class_count())?;
    let split = SplitSpec::load(split_path)?;
    Dataset::new(features, labels, classes, split)
}

/// Reads `sample_id,label,f0..fD-1`.
pub fn read_features(path: &Path) -> Result<(FeatureMatrix, Vec<usize>)> {
    let file = path.display().to_string();
    let mut rdr = io::csv_reader(path)?;
    let header = rdr.headers().map_err(|e| io::csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(Error::parse(&file, 1, "header must be sample_id,label,f0,..."));
    }
    let dims = header.len() - 2;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| io::csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::parse(
                &file,
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        ids.push(record[0].to_string());
        labels.push(
            record[1]
                .parse::<usize>()
                .map_err(|_| Error::parse(&file, line, format!("bad label {:?}", &record[1])))?,
        );
        for field in record.iter().skip(2) {
            values.push(parse_f64(field, &file, line)?);
        }
    }
    let values = Matrix::from_vec(ids.len(), dims, values)?;
    Ok((FeatureMatrix::new(values, ids)?, labels))
}

/// Reads `class_id,class_name,e0..eE-1`. Rows may appear in any order but
/// the ids must cover `0..C` exactly once.
pub fn read_class_embeddings(path: &Path) -> Result<ClassEmbeddingTable> {
    let file = path.display().to_string();
    let mut rdr = io::csv_reader(path)?;
    let header = rdr.headers().map_err(|e| io::csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "class_id" || &header[1] != "class_name" {
        return Err(Error::parse(&file, 1, "header must be class_id,class_name,e0,..."));
    }
    let dims = header.len() - 2;
    let mut rows: Vec<(usize, String, Vec<f64>, usize)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| io::csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::parse(
                &file,
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let id = record[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(&file, line, format!("bad class_id {:?}", &record[0])))?;
        let v = record
            .iter()
            .skip(2)
            .map(|f| parse_f64(f, &file, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, record[1].to_string(), v, line));
    }
    rows.sort_by_key(|r| r.0);
    for (expected, (id, _, _, line)) in rows.iter().enumerate() {
        if *id != expected {
            return Err(Error::parse(
                &file,
                *line,
                format!("class ids must be 0..{} without gaps or repeats", rows.len()),
            ));
        }
    }
    let names = rows.iter().map(|r| r.1.clone()).collect();
    let mut m = Matrix::zeros(rows.len(), dims);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&r.2);
    }
    ClassEmbeddingTable::new(names, m)
}

fn numbered_header(prefix: &str, fixed: &[&str], n: usize) -> String {
    let mut cols: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    cols.extend((0..n).map(|j| format!("{prefix}{j}")));
    cols.join(",")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn join_row(fixed: &[String], values: &[f64]) -> String {
    let mut parts: Vec<String> = fixed.to_vec();
    parts.extend(values.iter().map(|&v| format_f64(v)));
    parts.join(",")
}

pub fn write_features(path: &Path, features: &FeatureMatrix, labels: &[usize]) -> Result<()> {
    let header = numbered_header("f", &["sample_id", "label"], features.dims());
    let rows = (0..features.rows()).map(|i| {
        join_row(
            &[csv_field(&features.sample_ids()[i]), labels[i].to_string()],
            features.row(i),
        )
    });
    io::write_lines(path, std::iter::once(header).chain(rows))
}

pub fn write_class_embeddings(path: &Path, table: &ClassEmbeddingTable) -> Result<()> {
    let header = numbered_header("e", &["class_id", "class_name"], table.embed_dims());
    let rows = (0..table.class_count()).map(|c| {
        join_row(
            &[c.to_string(), csv_field(&table.names()[c])],
            table.embedding(c),
        )
    });
    io::write_lines(path, std::iter::once(header).chain(rows))
}

/// Knobs for [`generate_split`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    pub unseen_count: usize,
    /// Fraction of each seen class's samples routed to the test set.
    pub test_fraction: f64,
    /// Fraction of seen classes whose non-test samples go to `val_samples`.
    pub val_class_fraction: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            unseen_count: 0,
            test_fraction: 0.2,
            val_class_fraction: 0.2,
        }
    }
}

/// Random seen/unseen split, deterministic in `seed`.
///
/// Every sample of an unseen class goes to test. Each seen class sends
/// `floor(test_fraction * n)` randomly chosen samples to test; for the
/// validation classes the rest go to `val_samples`, otherwise to train.
pub fn generate_split(
    class_count: usize,
    labels: &[usize],
    options: &SplitOptions,
    seed: u64,
) -> Result<SplitSpec> {
    if options.unseen_count > class_count {
        return Err(Error::Argument(format!(
            "unseen_count {} exceeds class_count {class_count}",
            options.unseen_count
        )));
    }
    for (name, f) in [
        ("test_fraction", options.test_fraction),
        ("val_class_fraction", options.val_class_fraction),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Argument(format!("{name} must lie in [0, 1], got {f}")));
        }
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::Argument(format!("label {l} out of range for {class_count} classes")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..class_count).collect();
    order.shuffle(&mut rng);
    let mut unseen = order[..options.unseen_count].to_vec();
    let mut seen = order[options.unseen_count..].to_vec();
    unseen.sort_unstable();

    // Held-out classes are drawn from the shuffled seen order; at least one
    // class always stays in training.
    let val_count = if seen.len() < 2 {
        0
    } else {
        ((options.val_class_fraction * seen.len() as f64).round() as usize).min(seen.len() - 1)
    };
    let mut val_classes = seen[..val_count].to_vec();
    val_classes.sort_unstable();
    seen.sort_unstable();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for &c in &unseen {
        test.extend_from_slice(&by_class[c]);
    }
    for &c in &seen {
        let mut samples = by_class[c].clone();
        samples.shuffle(&mut rng);
        let n_test = (options.test_fraction * samples.len() as f64).floor() as usize;
        test.extend_from_slice(&samples[..n_test]);
        let rest = &samples[n_test..];
        if val_classes.binary_search(&c).is_ok() {
            val.extend_from_slice(rest);
        } else {
            train.extend_from_slice(rest);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec {
        seed,
        seen_classes: seen,
        unseen_classes: unseen,
        train_samples: train,
        val_samples: val,
        test_samples: test,
    })
}

/// Parameters of the synthetic linear-Gaussian benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub class_count: usize,
    pub seen_count: usize,
    pub embed_dims: usize,
    pub feat_dims: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub test_fraction: f64,
    pub val_class_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            class_count: 20,
            seen_count: 15,
            embed_dims: 16,
            feat_dims: 32,
            samples_per_class: 100,
            noise_sigma: 0.05,
            seed: 42,
            test_fraction: 0.2,
            val_class_fraction: 0.2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seen_count > self.class_count {
            return Err(Error::Validation(format!(
                "seen_count {} exceeds class_count {}",
                self.seen_count, self.class_count
            )));
        }
        if self.embed_dims == 0 || self.feat_dims == 0 || self.samples_per_class == 0 {
            return Err(Error::Validation(
                "embed_dims, feat_dims and samples_per_class must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Validation(format!(
                "noise_sigma must be a finite non-negative number, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn split_options(&self) -> SplitOptions {
        SplitOptions {
            unseen_count: self.class_count - self.seen_count,
            test_fraction: self.test_fraction,
            val_class_fraction: self.val_class_fraction,
        }
    }
}

/// Class embeddings on the unit sphere and the class means `M·a_c` of the
/// synthetic benchmark. Samples of class `c` are `mean_c + noise`.
pub fn synth_class_geometry(spec: &SynthSpec) -> Result<(Matrix, Matrix)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, e, d) = (spec.class_count, spec.embed_dims, spec.feat_dims);
    let mut embeds = Matrix::zeros(c, e);
    for i in 0..c {
        let row = embeds.row_mut(i);
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let n = linalg::norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
                break;
            }
        }
    }
    let scale = 1.0 / (e as f64).sqrt();
    let map = Matrix::from_fn(d, e, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    });
    let means = embeds.matmul(&map.transpose())?;
    Ok((embeds, means))
}

/// Draws the synthetic dataset, fully determined by `spec`.
pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    let (embeds, means) = synth_class_geometry(spec)?;
    // Noise uses its own stream so the geometry is independent of noise_sigma.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = spec.class_count * spec.samples_per_class;
    let mut values = Matrix::zeros(n, spec.feat_dims);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for c in 0..spec.class_count {
        for k in 0..spec.samples_per_class {
            let i = labels.len();
            let row = values.row_mut(i);
            for (v, &mu) in row.iter_mut().zip(means.row(c)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = mu + spec.noise_sigma * z;
            }
            labels.push(c);
            ids.push(format!("c{c:03}-s{k:04}"));
        }
    }
    let names = (0..spec.class_count).map(|c| format!("class_{c}")).collect();
    let classes = ClassEmbeddingTable::new(names, embeds)?;
    let split = generate_split(spec.class_count, &labels, &spec.split_options(), spec.seed)?;
    Dataset::new(
        FeatureMatrix::new(values, ids)?,
        LabelVector::new(labels, spec.class_count)?,
        classes,
        split,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    fn fixture(dir: &Path, feature_text: &str, split_text: &str) -> Result<Dataset> {
        let f = write(dir, "f.csv", feature_text);
        let e = write(dir, "e.csv", "class_id,class_name,e0,e1\n0,run,1,0\n1,jump,0,1\n");
        let s = write(dir, "s.json", split_text);
        load_dataset(&f, &e, &s)
    }

    const FEATURES: &str = "sample_id,label,f0,f1\na,0,1.0,2.0\nb,1,3e-1,4\nc,0,5,6\n";
    const SPLIT: &str = r#"{"seed":1,"seen_classes":[0],"unseen_classes":[1],
        "train_samples":[0],"val_samples":[],"test_samples":[1,2]}"#;

    #[test]
    fn loads_hand_written_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let ds = fixture(dir.path(), FEATURES, SPLIT).unwrap();
        assert_eq!(ds.features().rows(), 3);
        assert_eq!(ds.feature_dims(), 2);
        assert_eq!(ds.classes().class_count(), 2);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.features().row(1), &[0.3, 4.0]);
        assert_eq!(ds.features().sample_ids()[2], "c");
    }

    #[test]
    fn non_numeric_feature_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let text = "sample_id,label,f0,f1\na,0,1.0,2.0\nb,1,abc,4\n";
        match fixture(dir.path(), text, SPLIT) {
            Err(Error::Parse { file, line, .. }) => {
                assert!(file.ends_with("f.csv"));
                assert_eq!(line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = "sample_id,label,f0,f1\na,0,1.0\n";
        assert!(matches!(
            fixture(dir.path(), text, SPLIT),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn out_of_range_label_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = "sample_id,label,f0,f1\na,0,1,2\nb,2,3,4\nc,0,5,6\n";
        assert!(matches!(
            fixture(dir.path(), text, SPLIT),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn split_with_unknown_class_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let split = r#"{"seed":1,"seen_classes":[0,5],"unseen_classes":[1],
            "train_samples":[0],"val_samples":[],"test_samples":[1]}"#;
        assert!(matches!(
            fixture(dir.path(), FEATURES, split),
            Err(Error::Validation(_))
        ));
        let split = r#"{"seed":1,"seen_classes":[0],"unseen_classes":[1],
            "train_samples":[0],"val_samples":[],"test_samples":[9]}"#;
        assert!(matches!(
            fixture(dir.path(), FEATURES, split),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn unseen_training_sample_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let split = r#"{"seed":1,"seen_classes":[0],"unseen_classes":[1],
            "train_samples":[0,1],"val_samples":[],"test_samples":[2]}"#;
        assert!(matches!(
            fixture(dir.path(), FEATURES, split),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn zero_embedding_is_rejected() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(ClassEmbeddingTable::new(vec!["a".into(), "b".into()], m).is_err());
    }

    fn labels_for(classes: usize, per: usize) -> Vec<usize> {
        (0..classes).flat_map(|c| std::iter::repeat_n(c, per)).collect()
    }

    #[test]
    fn split_class_counts_follow_unseen_count() {
        let labels = labels_for(200, 3);
        let opts = SplitOptions {
            unseen_count: 50,
            ..SplitOptions::default()
        };
        let s = generate_split(200, &labels, &opts, 3).unwrap();
        assert_eq!(s.seen_classes.len(), 150);
        assert_eq!(s.unseen_classes.len(), 50);
        s.validate(200, &labels).unwrap();
    }

    #[test]
    fn zero_unseen_gives_supervised_split() {
        let labels = labels_for(5, 10);
        let s = generate_split(5, &labels, &SplitOptions::default(), 0).unwrap();
        assert!(s.unseen_classes.is_empty());
        assert_eq!(s.seen_classes, vec![0, 1, 2, 3, 4]);
        assert!(s.test_samples.iter().all(|&i| s.is_seen(labels[i])));
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let labels = labels_for(10, 7);
        let opts = SplitOptions {
            unseen_count: 3,
            ..SplitOptions::default()
        };
        let a = serde_json::to_string(&generate_split(10, &labels, &opts, 7).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_split(10, &labels, &opts, 7).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_split(10, &labels, &opts, 8).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_many_unseen_is_an_argument_error() {
        let opts = SplitOptions {
            unseen_count: 4,
            ..SplitOptions::default()
        };
        assert!(matches!(
            generate_split(3, &[0, 1, 2], &opts, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn validation_fold_swaps_roles() {
        let labels = labels_for(10, 10);
        let opts = SplitOptions {
            unseen_count: 2,
            test_fraction: 0.2,
            val_class_fraction: 0.25,
        };
        let s = generate_split(10, &labels, &opts, 11).unwrap();
        let val_classes = s.validation_classes(&labels);
        assert_eq!(val_classes.len(), 2);
        let fold = s.validation_fold(&labels).unwrap();
        fold.validate(10, &labels).unwrap();
        assert_eq!(fold.unseen_classes, val_classes);
        assert_eq!(fold.seen_classes.len(), 6);
        assert_eq!(fold.test_samples, s.val_samples);
        assert_eq!(s.fit_samples().len(), s.train_samples.len() + s.val_samples.len());
    }

    #[test]
    fn synth_sizes_follow_parameters() {
        let spec = SynthSpec::default();
        let ds = synth_generate(&spec).unwrap();
        assert_eq!(ds.features().rows(), 2000);
        assert_eq!(ds.feature_dims(), 32);
        assert_eq!(ds.classes().embed_dims(), 16);
        assert_eq!(ds.split().unseen_classes.len(), 5);
        for c in 0..20 {
            assert!((linalg::norm(ds.classes().embedding(c)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_zero_noise_collapses_classes() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            samples_per_class: 5,
            ..SynthSpec::default()
        };
        let ds = synth_generate(&spec).unwrap();
        let x = ds.features();
        let ys = ds.labels();
        for i in 0..x.rows() {
            for j in 0..x.rows() {
                let d = linalg::squared_distance(x.row(i), x.row(j));
                if ys[i] == ys[j] {
                    assert_eq!(d, 0.0);
                } else {
                    assert!(d > 0.0);
                }
            }
        }
    }

    #[test]
    fn synth_rejects_bad_spec() {
        let spec = SynthSpec {
            seen_count: 21,
            ..SynthSpec::default()
        };
        assert!(matches!(synth_generate(&spec), Err(Error::Validation(_))));
    }
}
