//! Classifier heads over latent codes: the baseline head on the full latent
//! and retrained heads restricted to a selected subset of segments.
//!
//! A head never reads coordinates outside its selection; restriction happens
//! by gathering the selected segments before the forward pass, which makes
//! masking invariance structural rather than learned.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::domain::{DomainDataset, DomainKind, DomainRole, DomainTag, FeatureMatrix};
use crate::error::{CoreError, Result};
use crate::latent::SegmentLayout;
use crate::linalg::Matrix;
use crate::nn::{optimizer_step, Activation, DenseParams, LossKind, OptimState, Sample, Target};
use crate::repr::Stage1Model;
use crate::rng;

#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub class_count: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: 256,
            epochs: 12,
            batch_size: 128,
            learning_rate: 0.05,
            momentum: 0.9,
            class_count: 10,
            seed: 13,
        }
    }
}

/// Which part of a full latent a head consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Full(SegmentLayout),
    Segments {
        layout: SegmentLayout,
        indices: Vec<usize>,
    },
}

impl Selection {
    pub fn segments(layout: SegmentLayout, mut indices: Vec<usize>) -> Result<Selection> {
        if indices.is_empty() {
            return Err(CoreError::Config("segment selection is empty".into()));
        }
        indices.sort_unstable();
        indices.dedup();
        for &k in &indices {
            layout.range(k)?;
        }
        if indices.len() == layout.segments() {
            return Ok(Selection::Full(layout));
        }
        Ok(Selection::Segments { layout, indices })
    }

    pub fn layout(&self) -> SegmentLayout {
        match self {
            Selection::Full(l) => *l,
            Selection::Segments { layout, .. } => *layout,
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Selection::Full(l) => l.latent_dim(),
            Selection::Segments { layout, indices } => indices.len() * layout.segment_dim(),
        }
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        match self {
            Selection::Full(l) => (0..l.segments()).collect(),
            Selection::Segments { indices, .. } => indices.clone(),
        }
    }

    /// Gathers the consumed coordinates out of a full-width latent.
    pub fn gather(&self, full: &[f32]) -> Result<Vec<f32>> {
        let layout = self.layout();
        if full.len() != layout.latent_dim() {
            return Err(CoreError::Shape(format!(
                "latent width {} but layout requires {}",
                full.len(),
                layout.latent_dim()
            )));
        }
        match self {
            Selection::Full(_) => Ok(full.to_vec()),
            Selection::Segments { layout, indices } => {
                let mut out = Vec::with_capacity(self.input_width());
                for &k in indices {
                    out.extend_from_slice(&full[layout.range(k)?]);
                }
                Ok(out)
            }
        }
    }
}

/// A trained softmax classifier over (a selection of) latent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    params: DenseParams<f32>,
    selection: Selection,
}

impl ClassifierHead {
    pub fn new(params: DenseParams<f32>, selection: Selection) -> Result<Self> {
        if params.input_dim() != selection.input_width() {
            return Err(CoreError::Shape(format!(
                "head consumes {} inputs but the selection provides {}",
                params.input_dim(),
                selection.input_width()
            )));
        }
        Ok(ClassifierHead { params, selection })
    }

    pub fn params(&self) -> &DenseParams<f32> {
        &self.params
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    pub fn class_count(&self) -> usize {
        self.params.output_dim()
    }

    /// Class probabilities for a full-width latent.
    pub fn probabilities(&self, full_code: &[f32]) -> Result<Vec<f32>> {
        self.params.forward(&self.selection.gather(full_code)?)
    }

    /// Predicted class for a full-width latent; ties break toward the lowest
    /// class index.
    pub fn predict(&self, full_code: &[f32]) -> Result<usize> {
        Ok(argmax_lowest(&self.probabilities(full_code)?))
    }

    /// Batched prediction over full-width latents.
    pub fn predict_batch(&self, codes: &[&[f32]]) -> Result<Vec<usize>> {
        let gathered: Vec<Vec<f32>> = codes
            .iter()
            .map(|c| self.selection.gather(c))
            .collect::<Result<_>>()?;
        let rows: Vec<&[f32]> = gathered.iter().map(|g| g.as_slice()).collect();
        let out = self.params.forward_batch(&Matrix::from_rows(&rows)?)?;
        Ok((0..out.rows()).map(|r| argmax_lowest(out.row(r))).collect())
    }
}

/// Lowest index among tied maxima.
pub fn argmax_lowest(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trains a head on full-width latent rows, restricted by `selection`.
pub fn train_head(
    rows: &[Vec<f32>],
    labels: &[u8],
    selection: Selection,
    config: &ClassifierConfig,
) -> Result<ClassifierHead> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(CoreError::Data(format!(
            "{} rows vs {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let gathered: Vec<Vec<f32>> = rows
        .iter()
        .map(|r| selection.gather(r))
        .collect::<Result<_>>()?;
    let mut params = DenseParams::seeded(
        &[selection.input_width(), config.hidden, config.class_count],
        &[Activation::Relu, Activation::SoftmaxOutput],
        rng::mix(config.seed, &[0xc1a]),
    )?;
    let mut state = OptimState::new(config.learning_rate, config.momentum, &params)?;
    let n = gathered.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let mut r = rng::stream(config.seed, &[0xc1b, epoch as u64]);
        for i in 0..n.saturating_sub(1) {
            let j = i + r.random_range(0..n - i);
            order.swap(i, j);
        }
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample<f32>> = chunk
                .iter()
                .map(|&i| (gathered[i].clone(), Target::Class(labels[i] as usize)))
                .collect();
            let grads = params.loss_and_grad(&batch, LossKind::CrossEntropy)?;
            if !grads.loss.is_finite() {
                return Err(CoreError::Diverged(format!(
                    "classifier loss non-finite at epoch {epoch}"
                )));
            }
            optimizer_step(&mut params, &grads, &mut state)?;
        }
    }
    ClassifierHead::new(params, selection)
}

/// Trains the baseline head on the full latent of pooled train domains.
/// The encoder is only read, never updated.
pub fn train_baseline(
    model: &Stage1Model,
    datasets: &[DomainDataset],
    config: &ClassifierConfig,
) -> Result<ClassifierHead> {
    let (rows, labels) = encode_pooled(model, datasets)?;
    train_head(&rows, &labels, Selection::Full(model.layout()), config)
}

/// Retrains a head on the concatenation of the selected segments only.
pub fn train_topk(
    model: &Stage1Model,
    segments: &[usize],
    datasets: &[DomainDataset],
    config: &ClassifierConfig,
) -> Result<ClassifierHead> {
    let selection = Selection::segments(model.layout(), segments.to_vec())?;
    let (rows, labels) = encode_pooled(model, datasets)?;
    train_head(&rows, &labels, selection, config)
}

fn encode_pooled(
    model: &Stage1Model,
    datasets: &[DomainDataset],
) -> Result<(Vec<Vec<f32>>, Vec<u8>)> {
    if datasets.is_empty() || datasets.iter().any(|d| d.is_empty()) {
        return Err(CoreError::Data("need non-empty train datasets".into()));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for ds in datasets {
        let (codes, ls) = model.encode_dataset(ds)?;
        rows.extend(codes.into_iter().map(|c| c.values));
        labels.extend(ls);
    }
    Ok((rows, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainEval {
    pub accuracy: f64,
    pub n: usize,
    pub role: DomainRole,
}

/// Per-domain accuracies plus the average and minimum over test domains.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_domain: BTreeMap<String, DomainEval>,
    pub avg_test: Option<f64>,
    pub min_test: Option<f64>,
}

impl EvalReport {
    pub fn from_domains(per_domain: BTreeMap<String, DomainEval>) -> EvalReport {
        let test: Vec<f64> = per_domain
            .values()
            .filter(|d| d.role == DomainRole::Test)
            .map(|d| d.accuracy)
            .collect();
        let avg_test = if test.is_empty() {
            None
        } else {
            Some(test.iter().sum::<f64>() / test.len() as f64)
        };
        let min_test = test.iter().cloned().reduce(f64::min);
        EvalReport {
            per_domain,
            avg_test,
            min_test,
        }
    }

    pub fn accuracy(&self, kind: DomainKind) -> Option<f64> {
        self.per_domain.get(kind.name()).map(|d| d.accuracy)
    }
}

// JSON shape: domain names as top-level keys, then avg_test / min_test / n.
impl Serialize for EvalReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.per_domain.len() + 3))?;
        for (name, d) in &self.per_domain {
            map.serialize_entry(name, &d.accuracy)?;
        }
        map.serialize_entry("avg_test", &self.avg_test)?;
        map.serialize_entry("min_test", &self.min_test)?;
        let counts: BTreeMap<&String, usize> =
            self.per_domain.iter().map(|(k, d)| (k, d.n)).collect();
        map.serialize_entry("n", &counts)?;
        map.end()
    }
}

/// Evaluates a head on per-domain latent rows. Deterministic and
/// order-independent over samples.
pub fn evaluate_rows(
    head: &ClassifierHead,
    domains: &[(DomainTag, Vec<Vec<f32>>, Vec<u8>)],
) -> Result<EvalReport> {
    if domains.is_empty() {
        return Err(CoreError::Data("nothing to evaluate".into()));
    }
    let mut per_domain = BTreeMap::new();
    for (tag, rows, labels) in domains {
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(CoreError::Data(format!(
                "domain {}: {} rows vs {} labels",
                tag.kind,
                rows.len(),
                labels.len()
            )));
        }
        let refs: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
        let preds = head.predict_batch(&refs)?;
        let correct = preds
            .iter()
            .zip(labels)
            .filter(|(p, l)| **p == **l as usize)
            .count();
        per_domain.insert(
            tag.kind.name().to_string(),
            DomainEval {
                accuracy: correct as f64 / rows.len() as f64,
                n: rows.len(),
                role: tag.role,
            },
        );
    }
    Ok(EvalReport::from_domains(per_domain))
}

/// Evaluates a head by encoding image datasets through the trained encoder.
pub fn evaluate_datasets(
    head: &ClassifierHead,
    model: &Stage1Model,
    datasets: &[DomainDataset],
) -> Result<EvalReport> {
    let mut domains = Vec::new();
    for ds in datasets {
        let (codes, labels) = model.encode_dataset(ds)?;
        domains.push((ds.tag, codes.into_iter().map(|c| c.values).collect(), labels));
    }
    evaluate_rows(head, &domains)
}

/// Evaluates a head on externally supplied features; `test_domains` names
/// which of the present domains count as held out.
pub fn evaluate_features(
    head: &ClassifierHead,
    features: &FeatureMatrix,
    test_domains: &[DomainKind],
) -> Result<EvalReport> {
    let mut domains = Vec::new();
    for kind in features.present_domains() {
        let (rows, labels) = features.rows_for_domain(kind);
        let role = if test_domains.contains(&kind) {
            DomainRole::Test
        } else {
            DomainRole::Train
        };
        domains.push((DomainTag { kind, role }, rows, labels));
    }
    evaluate_rows(head, &domains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use alloc::vec;

    fn layout22() -> SegmentLayout {
        SegmentLayout::new(2, 2).unwrap()
    }

    /// Head whose logits are exactly its selected input, softmaxed.
    fn passthrough_head(selection: Selection) -> ClassifierHead {
        let w = selection.input_width();
        let mut m = Matrix::zeros(w, w);
        for i in 0..w {
            m.set(i, i, 1.0);
        }
        let params = DenseParams::new(vec![Layer {
            weights: m,
            bias: vec![0.0; w],
            activation: Activation::SoftmaxOutput,
        }])
        .unwrap();
        ClassifierHead::new(params, selection).unwrap()
    }

    #[test]
    fn predict_is_argmax_with_lowest_tie_break() {
        let head = passthrough_head(Selection::Full(layout22()));
        assert_eq!(head.predict(&[0.2, 0.9, 0.1, 0.0]).unwrap(), 1);
        assert_eq!(head.predict(&[0.5, 0.5, 0.0, 0.0]).unwrap(), 0);
        assert_eq!(head.predict(&[0.0, 0.0, 0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn predict_invariant_to_constant_logit_shift() {
        let head = passthrough_head(Selection::Full(layout22()));
        let a = head.predict(&[0.1, 0.7, 0.3, 0.2]).unwrap();
        let b = head.predict(&[1.1, 1.7, 1.3, 1.2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn selection_widths() {
        let layout = layout22();
        assert_eq!(Selection::Full(layout).input_width(), 4);
        let single = Selection::segments(layout, vec![1]).unwrap();
        assert_eq!(single.input_width(), 2);
        assert!(Selection::segments(layout, vec![]).is_err());
        assert!(Selection::segments(layout, vec![5]).is_err());
        // selecting everything collapses to Full
        assert_eq!(
            Selection::segments(layout, vec![1, 0]).unwrap(),
            Selection::Full(layout)
        );
    }

    #[test]
    fn unselected_segments_are_never_read() {
        let layout = layout22();
        let head = passthrough_head(Selection::segments(layout, vec![0]).unwrap());
        let a = head.predict(&[0.3, 0.8, 0.1, 0.9]).unwrap();
        let b = head.predict(&[0.3, 0.8, 123.0, -55.0]).unwrap();
        assert_eq!(a, b);
        let pa = head.probabilities(&[0.3, 0.8, 0.1, 0.9]).unwrap();
        let pb = head.probabilities(&[0.3, 0.8, 123.0, -55.0]).unwrap();
        assert_eq!(pa, pb);
    }

    fn test_domain(
        kind: DomainKind,
        accuracy_tenths: usize,
    ) -> (DomainTag, Vec<Vec<f32>>, Vec<u8>) {
        // one-hot logits in segment 0; first `accuracy_tenths` of 10 samples
        // carry the true label, the rest are deliberately wrong
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let predicted = if i < accuracy_tenths { 0u8 } else { 1u8 };
            rows.push(vec![
                1.0 - predicted as f32,
                predicted as f32,
                0.0,
                0.0,
            ]);
            labels.push(0u8);
        }
        (
            DomainTag {
                kind,
                role: DomainRole::Test,
            },
            rows,
            labels,
        )
    }

    #[test]
    fn evaluate_arithmetic_matches_hand_computation() {
        let head = passthrough_head(Selection::segments(layout22(), vec![0]).unwrap());
        let domains = vec![
            test_domain(DomainKind::Rotate, 9),
            test_domain(DomainKind::Invert, 8),
            test_domain(DomainKind::Thick, 7),
            test_domain(DomainKind::Thin, 6),
        ];
        let report = evaluate_rows(&head, &domains).unwrap();
        assert_eq!(report.accuracy(DomainKind::Rotate), Some(0.9));
        assert!((report.avg_test.unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(report.min_test, Some(0.6));
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let head = passthrough_head(Selection::segments(layout22(), vec![0]).unwrap());
        let domains = vec![test_domain(DomainKind::Rotate, 10)];
        let report = evaluate_rows(&head, &domains).unwrap();
        assert_eq!(report.avg_test, Some(1.0));
        assert_eq!(report.min_test, Some(1.0));
    }

    #[test]
    fn single_class_training_predicts_that_class() {
        let layout = layout22();
        let mut r = rng::stream(3, &[9]);
        let rows: Vec<Vec<f32>> = (0..64)
            .map(|_| (0..4).map(|_| r.random_range(-1.0..1.0f32)).collect())
            .collect();
        let labels = vec![7u8; 64];
        let cfg = ClassifierConfig {
            hidden: 16,
            epochs: 5,
            batch_size: 16,
            ..Default::default()
        };
        let head = train_head(&rows, &labels, Selection::Full(layout), &cfg).unwrap();
        for row in &rows {
            assert_eq!(head.predict(row).unwrap(), 7);
        }
    }

    #[test]
    fn avg_and_min_absent_without_test_domains() {
        let head = passthrough_head(Selection::Full(layout22()));
        let (mut tag, rows, labels) = test_domain(DomainKind::Clean, 10);
        tag.role = DomainRole::Train;
        let report = evaluate_rows(&head, &[(tag, rows, labels)]).unwrap();
        assert_eq!(report.avg_test, None);
        assert_eq!(report.min_test, None);
    }
}
