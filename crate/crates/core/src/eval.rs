//! Generalized zero-shot evaluation.
//!
//! Four accuracy regimes are computed from one [`ScoreMatrix`]: unseen rows
//! ranked over unseen columns (`a_u_to_u`), seen rows over seen columns
//! (`a_s_to_s`), and both groups over the joint space (`*_to_total`).
//! Calibrated stacking subtracts γ from every seen column; sweeping γ traces
//! the seen/unseen trade-off curve whose area is AUSUC.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, format_f64};
use crate::linalg::Matrix;

/// Test samples × joint classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    classes: Vec<usize>,
    values: Matrix,
    labels: Vec<usize>,
    seen_mask: Vec<bool>,
    label_cols: Vec<usize>,
}

impl ScoreMatrix {
    pub fn new(classes: Vec<usize>, values: Matrix, labels: Vec<usize>, seen_mask: Vec<bool>) -> Result<Self> {
        if values.rows() != labels.len() {
            return Err(Error::Argument(format!(
                "{} score rows but {} labels",
                values.rows(),
                labels.len()
            )));
        }
        if values.cols() != classes.len() && values.rows() > 0 {
            return Err(Error::Argument(format!(
                "{} score columns but {} classes",
                values.cols(),
                classes.len()
            )));
        }
        if seen_mask.len() != classes.len() {
            return Err(Error::Argument("seen_mask length differs from class list".into()));
        }
        if !values.is_finite() {
            return Err(Error::Argument("score matrix has non-finite entries".into()));
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("class list has duplicates".into()));
        }
        let label_cols = labels
            .iter()
            .map(|l| {
                classes.iter().position(|c| c == l).ok_or_else(|| {
                    Error::Argument(format!("label {l} is not among the scored classes"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values = if values.rows() == 0 {
            Matrix::zeros(0, classes.len())
        } else {
            values
        };
        Ok(ScoreMatrix {
            classes,
            values,
            labels,
            seen_mask,
            label_cols,
        })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn seen_mask(&self) -> &[bool] {
        &self.seen_mask
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    fn row_is_seen(&self, n: usize) -> bool {
        self.seen_mask[self.label_cols[n]]
    }

    /// Column of the best score among columns passing `allow`; ties go to
    /// the lowest class index.
    fn best_col(&self, n: usize, allow: impl Fn(usize) -> bool) -> Option<usize> {
        let row = self.values.row(n);
        let mut best: Option<(usize, f64)> = None;
        for (j, &v) in row.iter().enumerate() {
            if !allow(j) {
                continue;
            }
            let take = match best {
                None => true,
                Some((bj, bv)) => v > bv || (v == bv && self.classes[j] < self.classes[bj]),
            };
            if take {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }
}

/// Which columns compete in the argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    UnseenOnly,
    SeenOnly,
    All,
}

impl Restriction {
    fn allows(self, seen: bool) -> bool {
        match self {
            Restriction::UnseenOnly => !seen,
            Restriction::SeenOnly => seen,
            Restriction::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowGroup {
    Unseen,
    Seen,
    All,
}

impl RowGroup {
    fn contains(self, seen: bool) -> bool {
        match self {
            RowGroup::Unseen => !seen,
            RowGroup::Seen => seen,
            RowGroup::All => true,
        }
    }
}

fn has_candidates(scores: &ScoreMatrix, cols: Restriction) -> Result<()> {
    if !scores.seen_mask.iter().any(|&s| cols.allows(s)) {
        return Err(Error::Argument(format!("restriction {cols:?} leaves no candidate classes")));
    }
    Ok(())
}

/// (hits, rows) per row group, plus per-class (hits, rows) for the per-class mean.
fn group_counts(scores: &ScoreMatrix, rows: RowGroup, cols: Restriction) -> (usize, usize, Vec<(usize, usize)>) {
    let mut per_class = vec![(0usize, 0usize); scores.classes.len()];
    let (mut hits, mut total) = (0, 0);
    for n in 0..scores.rows() {
        if !rows.contains(scores.row_is_seen(n)) {
            continue;
        }
        let pred = scores.best_col(n, |j| cols.allows(scores.seen_mask[j]));
        let hit = pred == Some(scores.label_cols[n]);
        total += 1;
        hits += hit as usize;
        let entry = &mut per_class[scores.label_cols[n]];
        entry.0 += hit as usize;
        entry.1 += 1;
    }
    (hits, total, per_class)
}

fn ratio(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

fn per_class_mean(per_class: &[(usize, usize)]) -> Option<f64> {
    let accs: Vec<f64> = per_class
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|&(h, n)| h as f64 / n as f64)
        .collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Top-1 accuracy with the argmax limited to `restriction`. For the
/// unseen-only and seen-only restrictions only rows labeled in that group
/// count; `None` when no row qualifies.
pub fn top1_accuracy(scores: &ScoreMatrix, restriction: Restriction) -> Result<Option<f64>> {
    has_candidates(scores, restriction)?;
    let rows = match restriction {
        Restriction::UnseenOnly => RowGroup::Unseen,
        Restriction::SeenOnly => RowGroup::Seen,
        Restriction::All => RowGroup::All,
    };
    let (hits, total, _) = group_counts(scores, rows, restriction);
    Ok(ratio(hits, total))
}

pub fn harmonic_mean(acc_seen: f64, acc_unseen: f64) -> f64 {
    let sum = acc_seen + acc_unseen;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * acc_seen * acc_unseen / sum
    }
}

pub fn arithmetic_mean(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegimeAccuracies {
    pub a_u_to_u: Option<f64>,
    pub a_s_to_s: Option<f64>,
    pub a_u_to_total: Option<f64>,
    pub a_s_to_total: Option<f64>,
}

/// The four regimes with their means. `None` marks a regime whose row group
/// is empty (or, for the means, whose inputs are undefined).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub a_u_to_u: Option<f64>,
    pub a_s_to_s: Option<f64>,
    pub a_u_to_total: Option<f64>,
    pub a_s_to_total: Option<f64>,
    /// `(a_u_to_total + a_s_to_total) / 2`
    pub mean: Option<f64>,
    /// Harmonic mean of `a_s_to_total` and `a_u_to_total`.
    pub harmonic: Option<f64>,
    /// The same regimes averaged per class instead of per sample.
    pub per_class: RegimeAccuracies,
}

pub fn compute_report(scores: &ScoreMatrix) -> AccuracyReport {
    let has_seen = scores.seen_mask.iter().any(|&s| s);
    let has_unseen = scores.seen_mask.iter().any(|&s| !s);
    let regime = |rows, cols: Restriction, available: bool| {
        if !available {
            return (None, None);
        }
        let (h, n, per) = group_counts(scores, rows, cols);
        (ratio(h, n), per_class_mean(&per))
    };
    let (u_u, pu_u) = regime(RowGroup::Unseen, Restriction::UnseenOnly, has_unseen);
    let (s_s, ps_s) = regime(RowGroup::Seen, Restriction::SeenOnly, has_seen);
    let (u_t, pu_t) = regime(RowGroup::Unseen, Restriction::All, true);
    let (s_t, ps_t) = regime(RowGroup::Seen, Restriction::All, true);
    let both = u_t.zip(s_t);
    AccuracyReport {
        a_u_to_u: u_u,
        a_s_to_s: s_s,
        a_u_to_total: u_t,
        a_s_to_total: s_t,
        mean: both.map(|(u, s)| arithmetic_mean(u, s)),
        harmonic: both.map(|(u, s)| harmonic_mean(s, u)),
        per_class: RegimeAccuracies {
            a_u_to_u: pu_u,
            a_s_to_s: ps_s,
            a_u_to_total: pu_t,
            a_s_to_total: ps_t,
        },
    }
}

/// Argmax of `score - γ·[seen]` per row, as class indices.
///
/// Evaluated as the best seen against the best unseen column, with the
/// seen winner kept while its margin exceeds γ. This is the same argmax
/// but stays exact for |γ| far beyond the score range. An exact tie goes
/// to the lower class index.
pub fn calibrated_predict(scores: &ScoreMatrix, gamma: f64) -> Vec<usize> {
    (0..scores.rows())
        .map(|n| {
            let bs = scores.best_col(n, |j| scores.seen_mask[j]);
            let bu = scores.best_col(n, |j| !scores.seen_mask[j]);
            let j = match (bs, bu) {
                (Some(s), Some(u)) => {
                    let row = scores.values.row(n);
                    let gap = row[s] - row[u];
                    if gap > gamma || (gap == gamma && scores.classes[s] < scores.classes[u]) {
                        s
                    } else {
                        u
                    }
                }
                (Some(j), None) | (None, Some(j)) => j,
                (None, None) => unreachable!("score matrix has columns"),
            };
            scores.classes[j]
        })
        .collect()
}

/// `(a_u_to_total, a_s_to_total)` of a joint-space prediction vector; an
/// empty row group yields `None`.
pub fn joint_accuracies(scores: &ScoreMatrix, predictions: &[usize]) -> (Option<f64>, Option<f64>) {
    let (mut hu, mut nu, mut hs, mut ns) = (0, 0, 0, 0);
    for (n, &p) in predictions.iter().enumerate() {
        let hit = (p == scores.labels[n]) as usize;
        if scores.row_is_seen(n) {
            ns += 1;
            hs += hit;
        } else {
            nu += 1;
            hu += hit;
        }
    }
    (ratio(hu, nu), ratio(hs, ns))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuPoint {
    pub gamma: f64,
    pub a_u_to_total: f64,
    pub a_s_to_total: f64,
}

/// Seen/unseen trade-off curve, ordered by increasing γ.
#[derive(Debug, Clone, PartialEq)]
pub struct SuCurve {
    pub points: Vec<SuPoint>,
    pub ausuc: f64,
}

impl SuCurve {
    fn from_points(points: Vec<SuPoint>) -> Result<Self> {
        let area = ausuc(&points)?;
        Ok(SuCurve { points, ausuc: area })
    }

    /// Accuracy pair in force at `gamma`: the last point whose γ is ≤ `gamma`.
    pub fn accuracies_at(&self, gamma: f64) -> (f64, f64) {
        let idx = self.points.partition_point(|p| p.gamma <= gamma);
        let p = &self.points[idx.saturating_sub(1)];
        (p.a_u_to_total, p.a_s_to_total)
    }

    /// CSV `gamma,a_u_to_total,a_s_to_total`; infinite γ written as `-inf`/`+inf`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = "gamma,a_u_to_total,a_s_to_total".to_string();
        let rows = self.points.iter().map(|p| {
            format!(
                "{},{},{}",
                format_f64(p.gamma),
                format_f64(p.a_u_to_total),
                format_f64(p.a_s_to_total)
            )
        });
        io::write_lines(path, std::iter::once(header).chain(rows))
    }
}

struct RowFlip {
    threshold: f64,
    seen_row: bool,
    seen_hit: bool,
    unseen_hit: bool,
}

fn row_flips(scores: &ScoreMatrix) -> Result<Vec<RowFlip>> {
    let has_seen = scores.seen_mask.iter().any(|&s| s);
    let has_unseen = scores.seen_mask.iter().any(|&s| !s);
    if !has_seen || !has_unseen {
        return Err(Error::Argument(
            "the trade-off curve needs at least one seen and one unseen class".into(),
        ));
    }
    Ok((0..scores.rows())
        .map(|n| {
            let bs = scores.best_col(n, |j| scores.seen_mask[j]).expect("has seen");
            let bu = scores.best_col(n, |j| !scores.seen_mask[j]).expect("has unseen");
            let row = scores.values.row(n);
            RowFlip {
                threshold: row[bs] - row[bu],
                seen_row: scores.row_is_seen(n),
                seen_hit: bs == scores.label_cols[n],
                unseen_hit: bu == scores.label_cols[n],
            }
        })
        .collect())
}

fn frac(hits: usize, total: usize) -> f64 {
    ratio(hits, total).unwrap_or(0.0)
}

/// Exact seen/unseen curve.
///
/// A row predicts its best seen class while `γ < d` and its best unseen
/// class once `γ ≥ d`, where `d` is the gap between its best seen and best
/// unseen score. One point is emitted per distinct `d`, plus the `-inf` and
/// `+inf` endpoints. An empty row group contributes accuracy 0.
pub fn seen_unseen_curve(scores: &ScoreMatrix) -> Result<SuCurve> {
    let mut flips = row_flips(scores)?;
    flips.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    let n_seen = flips.iter().filter(|f| f.seen_row).count();
    let n_unseen = flips.len() - n_seen;

    let mut hits_u = 0usize;
    let mut hits_s = flips.iter().filter(|f| f.seen_row && f.seen_hit).count();
    let mut points = vec![SuPoint {
        gamma: f64::NEG_INFINITY,
        a_u_to_total: 0.0,
        a_s_to_total: frac(hits_s, n_seen),
    }];
    let mut i = 0;
    while i < flips.len() {
        let t = flips[i].threshold;
        while i < flips.len() && flips[i].threshold == t {
            let f = &flips[i];
            if f.seen_row {
                hits_s -= f.seen_hit as usize;
            } else {
                hits_u += f.unseen_hit as usize;
            }
            i += 1;
        }
        points.push(SuPoint {
            gamma: t,
            a_u_to_total: frac(hits_u, n_unseen),
            a_s_to_total: frac(hits_s, n_seen),
        });
    }
    points.push(SuPoint {
        gamma: f64::INFINITY,
        a_u_to_total: frac(hits_u, n_unseen),
        a_s_to_total: frac(hits_s, n_seen),
    });
    SuCurve::from_points(points)
}

/// Curve sampled at the given γ values via [`calibrated_predict`], with the
/// infinite endpoints added.
pub fn curve_from_gammas(scores: &ScoreMatrix, gammas: &[f64]) -> Result<SuCurve> {
    row_flips(scores)?;
    let mut grid: Vec<f64> = gammas.iter().copied().filter(|g| g.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut points = Vec::with_capacity(grid.len() + 2);
    for gamma in std::iter::once(f64::NEG_INFINITY)
        .chain(grid)
        .chain(std::iter::once(f64::INFINITY))
    {
        let preds = calibrated_predict(scores, gamma);
        let (u, s) = joint_accuracies(scores, &preds);
        points.push(SuPoint {
            gamma,
            a_u_to_total: u.unwrap_or(0.0),
            a_s_to_total: s.unwrap_or(0.0),
        });
    }
    SuCurve::from_points(points)
}

/// Trapezoidal area of `a_s_to_total` over `a_u_to_total`. Points must be
/// ordered by non-decreasing `a_u_to_total`.
pub fn ausuc(points: &[SuPoint]) -> Result<f64> {
    let mut area = 0.0;
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.a_u_to_total < a.a_u_to_total {
            return Err(Error::Argument(
                "curve points are not ordered by a_u_to_total".into(),
            ));
        }
        area += (b.a_u_to_total - a.a_u_to_total) * (a.a_s_to_total + b.a_s_to_total) / 2.0;
    }
    Ok(area)
}

/// Report file `{method, split_seed, a_u_to_u, ..., ausuc}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub split_seed: u64,
    pub a_u_to_u: Option<f64>,
    pub a_s_to_s: Option<f64>,
    pub a_u_to_total: Option<f64>,
    pub a_s_to_total: Option<f64>,
    pub mean: Option<f64>,
    pub harmonic: Option<f64>,
    pub ausuc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<RegimeAccuracies>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub hyperparams: serde_json::Value,
}

impl EvalReport {
    pub fn new(method: &str, split_seed: u64, report: &AccuracyReport, curve: Option<&SuCurve>) -> Self {
        EvalReport {
            method: method.to_string(),
            split_seed,
            a_u_to_u: report.a_u_to_u,
            a_s_to_s: report.a_s_to_s,
            a_u_to_total: report.a_u_to_total,
            a_s_to_total: report.a_s_to_total,
            mean: report.mean,
            harmonic: report.harmonic,
            ausuc: curve.map(|c| c.ausuc),
            per_class: None,
            hyperparams: serde_json::Value::Null,
        }
    }

    /// Named headline metrics, in report order.
    pub fn metrics(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("a_u_to_u", self.a_u_to_u),
            ("a_s_to_s", self.a_s_to_s),
            ("a_u_to_total", self.a_u_to_total),
            ("a_s_to_total", self.a_s_to_total),
            ("mean", self.mean),
            ("harmonic", self.harmonic),
            ("ausuc", self.ausuc),
        ]
    }
}
