//! Video-level visual features and class-name semantic vectors.
//!
//! Frame features are mean pooled per video and L1 normalized. Class names
//! become the average word vector of their tokens, after an optional
//! whole-name rewrite for terms the lexicon does not cover.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, format_f64, parse_f64};
use crate::linalg::Matrix;

/// All frames of one video, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSet {
    pub video_id: String,
    frames: Matrix,
}

impl FrameFeatureSet {
    pub fn new(video_id: impl Into<String>, frames: Matrix) -> Result<Self> {
        let video_id = video_id.into();
        if frames.rows() == 0 {
            return Err(Error::Argument(format!("video {video_id:?} has no frames")));
        }
        if !frames.is_finite() {
            return Err(Error::Validation(format!(
                "video {video_id:?} has non-finite frame features"
            )));
        }
        Ok(FrameFeatureSet { video_id, frames })
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }
}

/// Column-wise arithmetic mean of the frames.
///
/// Each column is summed in sorted order, so the result does not depend on
/// frame order down to the last bit.
pub fn mean_pool(frames: &FrameFeatureSet) -> Result<Vec<f64>> {
    let m = &frames.frames;
    if m.rows() == 0 {
        return Err(Error::Argument("cannot pool an empty frame set".into()));
    }
    let n = m.rows() as f64;
    let mut column = Vec::with_capacity(m.rows());
    Ok((0..m.cols())
        .map(|j| {
            column.clear();
            column.extend(m.iter_rows().map(|r| r[j]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect())
}

pub fn l1_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if !l1.is_finite() || l1 <= 0.0 {
        return Err(Error::Normalization(format!("L1 norm is {l1}")));
    }
    Ok(v.iter().map(|x| x / l1).collect())
}

/// Pretrained word vectors keyed by lowercase token.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordVectorLexicon {
    dims: usize,
    vocab: HashMap<String, Vec<f64>>,
}

impl WordVectorLexicon {
    pub fn new(dims: usize) -> Self {
        WordVectorLexicon {
            dims,
            vocab: HashMap::new(),
        }
    }

    /// Adds a token; the first vector wins if the lowercased token repeats.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dims {
            return Err(Error::Argument(format!(
                "vector for {token:?} has {} dims, lexicon has {}",
                vector.len(),
                self.dims
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("vector for {token:?} is not finite")));
        }
        self.vocab.entry(token.to_lowercase()).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(Vec::as_slice)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Reads the common text layout: `<vocab_size> <E>` then `<token> <e0> ... <eE-1>`.
    pub fn load(path: &Path) -> Result<Self> {
        let file_name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::parse(&file_name, 1, "empty word-vector file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (count, dims) = match parts.as_slice() {
            [c, d] => (
                c.parse::<usize>()
                    .map_err(|_| Error::parse(&file_name, 1, "bad vocab size"))?,
                d.parse::<usize>()
                    .map_err(|_| Error::parse(&file_name, 1, "bad dimension"))?,
            ),
            _ => return Err(Error::parse(&file_name, 1, "header must be `<vocab_size> <E>`")),
        };
        let mut lex = WordVectorLexicon::new(dims);
        let mut seen_lines = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().unwrap_or_default();
            let vector = fields
                .map(|f| parse_f64(f, &file_name, lineno))
                .collect::<Result<Vec<_>>>()?;
            if vector.len() != dims {
                return Err(Error::parse(
                    &file_name,
                    lineno,
                    format!("expected {dims} values, found {}", vector.len()),
                ));
            }
            lex.insert(token, vector)?;
            seen_lines += 1;
        }
        if seen_lines != count {
            return Err(Error::parse(
                &file_name,
                1,
                format!("header announces {count} vectors, file has {seen_lines}"),
            ));
        }
        Ok(lex)
    }
}

/// Whole-name rewrites for class names the lexicon cannot cover.
/// Keys are matched after the same normalization as class names, so the
/// lookup ignores case and punctuation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplacementMap {
    pairs: HashMap<String, String>,
}

impl ReplacementMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: &str, replacement: &str) -> Result<()> {
        let key = normalize_name(term);
        if key.is_empty() || replacement.trim().is_empty() {
            return Err(Error::Argument(format!(
                "replacement pair ({term:?}, {replacement:?}) must be non-empty"
            )));
        }
        self.pairs.insert(key, replacement.to_string());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.pairs.get(&normalize_name(name)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads a CSV with header `term,replacement`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = path.display().to_string();
        let mut rdr = io::csv_reader(path)?;
        let header = rdr.headers().map_err(|e| io::csv_error(path, e))?.clone();
        if header.len() != 2 || &header[0] != "term" || &header[1] != "replacement" {
            return Err(Error::parse(&file, 1, "header must be term,replacement"));
        }
        let mut map = ReplacementMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| io::csv_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 2 {
                return Err(Error::parse(&file, line, "expected 2 columns"));
            }
            map.insert(&record[0], &record[1])
                .map_err(|e| Error::parse(&file, line, e.to_string()))?;
        }
        Ok(map)
    }
}

/// Lowercase alphanumeric runs, in order.
pub fn tokenize(name: &str) -> Vec<String> {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn normalize_name(name: &str) -> String {
    tokenize(name).join(" ")
}

/// Average word vector of a class name.
///
/// The name is rewritten through `replacements` first (whole-name match),
/// then tokenized; tokens missing from the lexicon are skipped.
pub fn embed_class_name(
    name: &str,
    lexicon: &WordVectorLexicon,
    replacements: &ReplacementMap,
) -> Result<Vec<f64>> {
    if name.trim().is_empty() {
        return Err(Error::Argument("class name is empty".into()));
    }
    let text = replacements.get(name).unwrap_or(name);
    let mut sum = vec![0.0; lexicon.dims()];
    let mut found = 0usize;
    for token in tokenize(text) {
        if let Some(v) = lexicon.get(&token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(Error::OutOfVocabulary {
            class: name.to_string(),
        });
    }
    let n = found as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Reads `video_id,frame_index,f0..fD-1`, grouping rows by video in order
/// of first appearance. Frames keep their file order within a video.
pub fn read_frame_features(path: &Path) -> Result<(usize, Vec<FrameFeatureSet>)> {
    let file = path.display().to_string();
    let mut rdr = io::csv_reader(path)?;
    let header = rdr.headers().map_err(|e| io::csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "video_id" || &header[1] != "frame_index" {
        return Err(Error::parse(&file, 1, "header must be video_id,frame_index,f0,..."));
    }
    let dims = header.len() - 2;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
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
        record[1]
            .parse::<u64>()
            .map_err(|_| Error::parse(&file, line, format!("bad frame_index {:?}", &record[1])))?;
        let id = record[0].to_string();
        let values = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        for f in record.iter().skip(2) {
            values.push(parse_f64(f, &file, line)?);
        }
    }
    let videos = order
        .into_iter()
        .map(|id| {
            let data = rows.remove(&id).unwrap_or_default();
            let m = Matrix::from_vec(data.len() / dims, dims, data)?;
            FrameFeatureSet::new(id, m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, videos))
}

/// Mean pooling followed by L1 normalization for every video.
pub fn pool_videos(videos: &[FrameFeatureSet]) -> Result<Vec<(String, Vec<f64>)>> {
    videos
        .iter()
        .map(|v| {
            let pooled = mean_pool(v)?;
            let normalized = l1_normalize(&pooled).map_err(|e| {
                Error::Normalization(format!("video {:?}: {e}", v.video_id))
            })?;
            Ok((v.video_id.clone(), normalized))
        })
        .collect()
}

/// Writes pooled vectors as CSV with header `video_id,f0..fD-1`.
pub fn write_pooled(path: &Path, dims: usize, pooled: &[(String, Vec<f64>)]) -> Result<()> {
    let mut header = vec!["video_id".to_string()];
    header.extend((0..dims).map(|j| format!("f{j}")));
    let rows = pooled.iter().map(|(id, v)| {
        std::iter::once(id.clone())
            .chain(v.iter().map(|&x| format_f64(x)))
            .collect::<Vec<_>>()
            .join(",")
    });
    io::write_lines(path, std::iter::once(header.join(",")).chain(rows))
}
