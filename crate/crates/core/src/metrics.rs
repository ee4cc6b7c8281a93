//! Evaluation metrics over aligned (truth, prediction) collections.
//!
//! Conventions: AUROC uses midranks for tied scores; AUPR is average
//! precision (a step sum, not a trapezoid) with tied scores ordered by
//! `(instance, target)` ascending; a 0/0 precision or recall counts as 0 and
//! still enters the average.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{InteractionData, ScoreType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("prediction set is empty")]
    Empty,
    #[error("non-finite prediction for couple ({0}, {1})")]
    NonFinitePrediction(usize, usize),
    #[error("truth {0} is not binary")]
    NonBinaryTruth(f64),
    #[error("target {0} has zero variance around its baseline mean")]
    DegenerateTarget(usize),
    #[error("target {0} has no training mean")]
    MissingTargetMean(usize),
    #[error("only one class present in the truths")]
    SingleClass,
    #[error("no positive truths")]
    NoPositives,
    #[error("truths have zero variance")]
    DegenerateVariance,
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("metric {metric} does not apply to {score_type} scores")]
    ScoreTypeMismatch {
        metric: Metric,
        score_type: ScoreType,
    },
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub instance: usize,
    pub target: usize,
    pub y_true: f64,
    pub y_pred: f64,
}

impl Prediction {
    pub fn new(instance: usize, target: usize, y_true: f64, y_pred: f64) -> Self {
        Self {
            instance,
            target,
            y_true,
            y_pred,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    entries: Vec<Prediction>,
    pub threshold: f64,
}

impl PredictionSet {
    pub fn new(entries: Vec<Prediction>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MetricError::Empty);
        }
        if let Some(e) = entries.iter().find(|e| !e.y_pred.is_finite()) {
            return Err(MetricError::NonFinitePrediction(e.instance, e.target));
        }
        Ok(Self {
            entries,
            threshold: 0.5,
        })
    }

    /// Entries on a single instance row `0`, targets `0..k`.
    pub fn from_vectors(truths: &[f64], preds: &[f64]) -> Result<Self> {
        Self::new(
            truths
                .iter()
                .zip(preds)
                .enumerate()
                .map(|(j, (&t, &p))| Prediction::new(0, j, t, p))
                .collect(),
        )
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn entries(&self) -> &[Prediction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Swaps instance and target roles.
    pub fn transpose(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| Prediction::new(e.target, e.instance, e.y_true, e.y_pred))
                .collect(),
            threshold: self.threshold,
        }
    }

    fn check_binary(&self) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|e| e.y_true != 0.0 && e.y_true != 1.0)
        {
            Some(e) => Err(MetricError::NonBinaryTruth(e.y_true)),
            None => Ok(()),
        }
    }

    fn predicted_positive(&self, e: &Prediction) -> bool {
        e.y_pred >= self.threshold
    }
}

/// Mean training score per target over the triplets in `indices`.
pub fn target_means(data: &InteractionData, indices: &[usize]) -> HashMap<usize, f64> {
    let mut sums: HashMap<usize, (f64, usize)> = HashMap::new();
    for &k in indices {
        let t = data.triplets()[k];
        let entry = sums.entry(t.target).or_insert((0.0, 0));
        entry.0 += t.score;
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(j, (s, c))| (j, s / c as f64))
        .collect()
}

pub fn hamming_loss(p: &PredictionSet) -> Result<f64> {
    p.check_binary()?;
    let wrong = p
        .entries
        .iter()
        .filter(|e| p.predicted_positive(e) != (e.y_true == 1.0))
        .count();
    Ok(wrong as f64 / p.len() as f64)
}

/// Fraction of entries whose thresholded prediction equals the truth.
pub fn accuracy(p: &PredictionSet) -> Result<f64> {
    Ok(1.0 - hamming_loss(p)?)
}

/// Average over targets of `sqrt(SS_res / SS_base)`, where the baseline is
/// the supplied per-target mean.
pub fn arrmse(p: &PredictionSet, target_means: &HashMap<usize, f64>) -> Result<f64> {
    let mut per_target: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for e in &p.entries {
        let mean = *target_means
            .get(&e.target)
            .ok_or(MetricError::MissingTargetMean(e.target))?;
        let acc = per_target.entry(e.target).or_insert((0.0, 0.0));
        acc.0 += (e.y_true - e.y_pred).powi(2);
        acc.1 += (e.y_true - mean).powi(2);
    }
    let mut total = 0.0;
    for (&j, &(res, base)) in &per_target {
        if base == 0.0 {
            return Err(MetricError::DegenerateTarget(j));
        }
        total += (res / base).sqrt();
    }
    Ok(total / per_target.len() as f64)
}

/// Pooled AUROC with midranks for tied scores.
pub fn micro_auroc(p: &PredictionSet) -> Result<f64> {
    p.check_binary()?;
    let mut order: Vec<&Prediction> = p.entries.iter().collect();
    order.sort_by(|a, b| a.y_pred.total_cmp(&b.y_pred));
    let positives = order.iter().filter(|e| e.y_true == 1.0).count();
    let negatives = order.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && order[end + 1].y_pred == order[start].y_pred {
            end += 1;
        }
        // ranks are 1-based: start+1 ..= end+1
        let midrank = (start + end) as f64 / 2.0 + 1.0;
        let pos_in_group = order[start..=end]
            .iter()
            .filter(|e| e.y_true == 1.0)
            .count();
        rank_sum += midrank * pos_in_group as f64;
        start = end + 1;
    }
    let p_f = positives as f64;
    Ok((rank_sum - p_f * (p_f + 1.0) / 2.0) / (p_f * negatives as f64))
}

/// Pooled average precision.
pub fn micro_aupr(p: &PredictionSet) -> Result<f64> {
    p.check_binary()?;
    let mut order: Vec<&Prediction> = p.entries.iter().collect();
    order.sort_by(|a, b| {
        b.y_pred
            .total_cmp(&a.y_pred)
            .then(a.instance.cmp(&b.instance))
            .then(a.target.cmp(&b.target))
    });
    let positives = order.iter().filter(|e| e.y_true == 1.0).count();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, e) in order.iter().enumerate() {
        if e.y_true == 1.0 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn grouped_prf(p: &PredictionSet, key: impl Fn(&Prediction) -> usize) -> Result<(f64, f64, f64)> {
    p.check_binary()?;
    let mut counts: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for e in &p.entries {
        let c = counts.entry(key(e)).or_insert((0, 0, 0));
        match (p.predicted_positive(e), e.y_true == 1.0) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => {}
        }
    }
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for &(tp, fp, fn_) in counts.values() {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        sp += precision;
        sr += recall;
        sf += f1;
    }
    let k = counts.len() as f64;
    Ok((sp / k, sr / k, sf / k))
}

/// Precision, recall and F1 per instance, averaged over instances.
pub fn instance_prf(p: &PredictionSet) -> Result<(f64, f64, f64)> {
    grouped_prf(p, |e| e.instance)
}

/// Precision, recall and F1 per target, averaged over targets.
pub fn macro_prf(p: &PredictionSet) -> Result<(f64, f64, f64)> {
    grouped_prf(p, |e| e.target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSummary {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

pub fn regression_summary(p: &PredictionSet) -> Result<RegressionSummary> {
    let n = p.len() as f64;
    let mean = p.entries.iter().map(|e| e.y_true).sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut abs = 0.0;
    let mut ss_tot = 0.0;
    for e in &p.entries {
        let err = e.y_true - e.y_pred;
        ss_res += err * err;
        abs += err.abs();
        ss_tot += (e.y_true - mean).powi(2);
    }
    if ss_tot == 0.0 {
        return Err(MetricError::DegenerateVariance);
    }
    Ok(RegressionSummary {
        rmse: (ss_res / n).sqrt(),
        mae: abs / n,
        r2: 1.0 - ss_res / ss_tot,
    })
}

/// Root mean squared error alone; defined for constant truths as well.
pub fn rmse(p: &PredictionSet) -> f64 {
    let ss: f64 = p
        .entries
        .iter()
        .map(|e| (e.y_true - e.y_pred).powi(2))
        .sum();
    (ss / p.len() as f64).sqrt()
}

/// Thresholded accuracy per target, averaged over targets.
pub fn macro_accuracy(p: &PredictionSet) -> Result<f64> {
    p.check_binary()?;
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for e in &p.entries {
        let c = counts.entry(e.target).or_insert((0, 0));
        c.1 += 1;
        if p.predicted_positive(e) == (e.y_true == 1.0) {
            c.0 += 1;
        }
    }
    let total: f64 = counts.values().map(|&(ok, n)| ok as f64 / n as f64).sum();
    Ok(total / counts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Hamming,
    Accuracy,
    MacroAccuracy,
    Auroc,
    Aupr,
    InstP,
    InstR,
    InstF1,
    MacroP,
    MacroR,
    MacroF1,
    Rmse,
    Mae,
    R2,
    Arrmse,
}

impl Metric {
    pub const ALL: [Metric; 15] = [
        Metric::Hamming,
        Metric::Accuracy,
        Metric::MacroAccuracy,
        Metric::Auroc,
        Metric::Aupr,
        Metric::InstP,
        Metric::InstR,
        Metric::InstF1,
        Metric::MacroP,
        Metric::MacroR,
        Metric::MacroF1,
        Metric::Rmse,
        Metric::Mae,
        Metric::R2,
        Metric::Arrmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hamming => "hamming",
            Metric::Accuracy => "accuracy",
            Metric::MacroAccuracy => "macro_accuracy",
            Metric::Auroc => "auroc",
            Metric::Aupr => "aupr",
            Metric::InstP => "inst_p",
            Metric::InstR => "inst_r",
            Metric::InstF1 => "inst_f1",
            Metric::MacroP => "macro_p",
            Metric::MacroR => "macro_r",
            Metric::MacroF1 => "macro_f1",
            Metric::Rmse => "rmse",
            Metric::Mae => "mae",
            Metric::R2 => "r2",
            Metric::Arrmse => "arrmse",
        }
    }

    /// Classification metrics need binary truths; the rest need numeric ones.
    pub fn is_classification(self) -> bool {
        !matches!(
            self,
            Metric::Rmse | Metric::Mae | Metric::R2 | Metric::Arrmse
        )
    }

    pub fn check_score_type(self, score_type: ScoreType) -> Result<()> {
        let ok = match score_type {
            ScoreType::Binary => self.is_classification(),
            ScoreType::Ordinal | ScoreType::Real => !self.is_classification(),
            ScoreType::Nominal => false,
        };
        if ok {
            Ok(())
        } else {
            Err(MetricError::ScoreTypeMismatch {
                metric: self,
                score_type,
            })
        }
    }

    /// Metrics reported when none are requested.
    pub fn defaults_for(score_type: ScoreType) -> Vec<Metric> {
        match score_type {
            ScoreType::Binary => vec![
                Metric::Hamming,
                Metric::Auroc,
                Metric::Aupr,
                Metric::MacroF1,
            ],
            _ => vec![Metric::Rmse, Metric::Mae, Metric::R2],
        }
    }

    pub fn parse_list(text: &str) -> Result<Vec<Metric>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }

    pub fn compute(
        self,
        p: &PredictionSet,
        target_means: Option<&HashMap<usize, f64>>,
    ) -> Result<f64> {
        Ok(match self {
            Metric::Hamming => hamming_loss(p)?,
            Metric::Accuracy => accuracy(p)?,
            Metric::MacroAccuracy => macro_accuracy(p)?,
            Metric::Auroc => micro_auroc(p)?,
            Metric::Aupr => micro_aupr(p)?,
            Metric::InstP => instance_prf(p)?.0,
            Metric::InstR => instance_prf(p)?.1,
            Metric::InstF1 => instance_prf(p)?.2,
            Metric::MacroP => macro_prf(p)?.0,
            Metric::MacroR => macro_prf(p)?.1,
            Metric::MacroF1 => macro_prf(p)?.2,
            Metric::Rmse => rmse(p),
            Metric::Mae => regression_summary(p)?.mae,
            Metric::R2 => regression_summary(p)?.r2,
            Metric::Arrmse => {
                let empty = HashMap::new();
                arrmse(p, target_means.unwrap_or(&empty))?
            }
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or(MetricError::UnknownMetric(key))
    }
}

/// `metric_name,value` lines, values to 6 decimals.
pub fn format_report(values: &[(Metric, f64)]) -> String {
    values
        .iter()
        .map(|(m, v)| format!("{m},{v:.6}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(truths: &[f64], preds: &[f64]) -> PredictionSet {
        PredictionSet::from_vectors(truths, preds).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(
            hamming_loss(&set(&[1., 0., 0., 1.], &[0.9, 0.1, 0.2, 0.8])).unwrap(),
            0.0
        );
        assert_eq!(hamming_loss(&set(&[1., 0.], &[0.1, 0.9])).unwrap(), 1.0);
        assert_eq!(
            hamming_loss(&set(&[1., 0., 1., 1.], &[0.9, 0.9, 0.9, 0.1])).unwrap(),
            0.5
        );
        assert_eq!(
            hamming_loss(&set(&[2., 0.], &[0.1, 0.9])).unwrap_err(),
            MetricError::NonBinaryTruth(2.0)
        );
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(hamming_loss(&set(&[1.], &[0.5])).unwrap(), 0.0);
        assert_eq!(
            hamming_loss(&set(&[1.], &[0.5]).with_threshold(0.6)).unwrap(),
            1.0
        );
    }

    #[test]
    fn arrmse_examples() {
        let means: HashMap<usize, f64> = [(0, 2.0), (1, 5.0)].into_iter().collect();
        let perfect = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 1.0),
            Prediction::new(1, 0, 3.0, 3.0),
            Prediction::new(0, 1, 4.0, 4.0),
            Prediction::new(1, 1, 7.0, 7.0),
        ])
        .unwrap();
        assert_eq!(arrmse(&perfect, &means).unwrap(), 0.0);

        let mean_pred = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 2.0),
            Prediction::new(1, 0, 3.0, 2.0),
            Prediction::new(0, 1, 4.0, 5.0),
            Prediction::new(1, 1, 7.0, 5.0),
        ])
        .unwrap();
        assert!(close(arrmse(&mean_pred, &means).unwrap(), 1.0));

        let one = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 2.0),
            Prediction::new(1, 0, 3.0, 2.0),
        ])
        .unwrap();
        assert!(close(arrmse(&one, &means).unwrap(), 1.0));

        let flat = PredictionSet::new(vec![Prediction::new(0, 0, 2.0, 1.0)]).unwrap();
        assert_eq!(
            arrmse(&flat, &means).unwrap_err(),
            MetricError::DegenerateTarget(0)
        );
        let unknown = PredictionSet::new(vec![Prediction::new(0, 9, 2.0, 1.0)]).unwrap();
        assert_eq!(
            arrmse(&unknown, &means).unwrap_err(),
            MetricError::MissingTargetMean(9)
        );
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(micro_auroc(&set(&[1., 0.], &[0.9, 0.1])).unwrap(), 1.0);
        assert_eq!(micro_auroc(&set(&[1., 0.], &[0.1, 0.9])).unwrap(), 0.0);
        assert!(close(
            micro_auroc(&set(&[1., 1., 0., 0.], &[0.8, 0.4, 0.6, 0.2])).unwrap(),
            0.75
        ));
        assert!(close(
            micro_auroc(&set(&[1., 0.], &[0.5, 0.5])).unwrap(),
            0.5
        ));
        assert_eq!(
            micro_auroc(&set(&[1., 1.], &[0.5, 0.2])).unwrap_err(),
            MetricError::SingleClass
        );
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(
            micro_aupr(&set(&[1., 1., 0.], &[0.9, 0.8, 0.1])).unwrap(),
            1.0
        );
        assert_eq!(micro_aupr(&set(&[0., 1.], &[0.9, 0.1])).unwrap(), 0.5);
        assert_eq!(micro_aupr(&set(&[1.], &[0.3])).unwrap(), 1.0);
        assert_eq!(
            micro_aupr(&set(&[0.], &[0.3])).unwrap_err(),
            MetricError::NoPositives
        );
        // Tie: the negative at target 0 is ranked first.
        assert_eq!(micro_aupr(&set(&[0., 1.], &[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(micro_aupr(&set(&[1., 0.], &[0.5, 0.5])).unwrap(), 1.0);
    }

    #[test]
    fn prf_examples() {
        let perfect = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 0.9),
            Prediction::new(0, 1, 0.0, 0.1),
            Prediction::new(1, 0, 0.0, 0.2),
            Prediction::new(1, 1, 1.0, 0.7),
        ])
        .unwrap();
        assert_eq!(instance_prf(&perfect).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(macro_prf(&perfect).unwrap(), (1.0, 1.0, 1.0));

        let (p, r, f) = instance_prf(&set(&[1., 0.], &[1.0, 1.0])).unwrap();
        assert!(close(p, 0.5) && close(r, 1.0) && close(f, 2.0 / 3.0));

        let column = set(&[1., 0.], &[1.0, 1.0]).transpose();
        let (p, r, f) = macro_prf(&column).unwrap();
        assert!(close(p, 0.5) && close(r, 1.0) && close(f, 2.0 / 3.0));

        let (_, r, f) = instance_prf(&set(&[1., 1., 0.], &[0.1, 0.2, 0.3])).unwrap();
        assert_eq!((r, f), (0.0, 0.0));
    }

    #[test]
    fn zero_denominators_count_as_zero() {
        // Instance 1 has no positives and predicts none: P = R = F1 = 0 there.
        let p = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 0.9),
            Prediction::new(1, 0, 0.0, 0.1),
        ])
        .unwrap();
        assert_eq!(instance_prf(&p).unwrap(), (0.5, 0.5, 0.5));
    }

    #[test]
    fn regression_examples() {
        let s = regression_summary(&set(&[1., 2., 3.], &[1., 2., 3.])).unwrap();
        assert_eq!((s.rmse, s.mae, s.r2), (0.0, 0.0, 1.0));
        let s = regression_summary(&set(&[0., 2.], &[1., 1.])).unwrap();
        assert_eq!((s.rmse, s.mae, s.r2), (1.0, 1.0, 0.0));
        assert_eq!(
            regression_summary(&set(&[3., 3.], &[1., 2.])).unwrap_err(),
            MetricError::DegenerateVariance
        );
    }

    #[test]
    fn macro_accuracy_examples() {
        assert_eq!(macro_accuracy(&set(&[1., 0.], &[0.9, 0.1])).unwrap(), 1.0);
        let p = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 0.9),
            Prediction::new(0, 1, 1.0, 0.1),
        ])
        .unwrap();
        assert_eq!(macro_accuracy(&p).unwrap(), 0.5);
        // Equal counts and equal per-target accuracy: macro equals plain accuracy.
        let p = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 0.9),
            Prediction::new(1, 0, 0.0, 0.9),
            Prediction::new(0, 1, 0.0, 0.1),
            Prediction::new(1, 1, 1.0, 0.1),
        ])
        .unwrap();
        assert_eq!(macro_accuracy(&p).unwrap(), accuracy(&p).unwrap());
        assert_eq!(macro_accuracy(&p).unwrap(), 0.5);
    }

    #[test]
    fn prediction_set_validation() {
        assert_eq!(PredictionSet::new(vec![]).unwrap_err(), MetricError::Empty);
        assert_eq!(
            PredictionSet::from_vectors(&[1.0], &[f64::NAN]).unwrap_err(),
            MetricError::NonFinitePrediction(0, 0)
        );
    }

    #[test]
    fn metric_names_and_report() {
        assert_eq!(
            Metric::parse_list("hamming, auroc").unwrap(),
            vec![Metric::Hamming, Metric::Auroc]
        );
        assert_eq!(
            Metric::parse_list("hamming,bogus").unwrap_err(),
            MetricError::UnknownMetric("bogus".into())
        );
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!(Metric::Rmse.check_score_type(ScoreType::Binary).is_err());
        assert!(Metric::Hamming.check_score_type(ScoreType::Real).is_err());
        assert!(Metric::Rmse.check_score_type(ScoreType::Ordinal).is_ok());
        assert_eq!(
            format_report(&[(Metric::Hamming, 0.25), (Metric::Auroc, 2.0 / 3.0)]),
            "hamming,0.250000\nauroc,0.666667\n"
        );
    }

    #[test]
    fn train_means() {
        let data = InteractionData::new(
            2,
            2,
            vec![
                crate::Triplet::new(0, 0, 1.0),
                crate::Triplet::new(1, 0, 3.0),
                crate::Triplet::new(0, 1, 5.0),
            ],
            ScoreType::Real,
        )
        .unwrap();
        let m = target_means(&data, &[0, 1, 2]);
        assert_eq!(m[&0], 2.0);
        assert_eq!(m[&1], 5.0);
        assert_eq!(target_means(&data, &[2]).len(), 1);
    }
}
