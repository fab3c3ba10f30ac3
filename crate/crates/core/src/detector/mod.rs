//! Inter-arrival-time intrusion detector: segment captures into detection
//! windows, extract moment or JSD features, and classify windows with a
//! decision tree or a linear SVM.

mod features;
mod model;

pub use features::{
    inter_arrivals, jsd, jsd_feature_vector, kl_divergence, moment_features, percentile, segment, Distribution, FeatureKind,
    FeatureVector, HistogramSpec, InterArrivalSegment, Reference,
};
pub use model::{
    accuracy, evaluate, train, Algorithm, Dataset, DecisionTree, Hyperparams, LinearSvm, Model, Node, Split, Standardizer,
    SvmParams, TreeParams,
};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::CaptureSeries;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("no complete window or no data")]
    EmptyResult,
    #[error("segment has no inter-arrival values")]
    EmptySegment,
    #[error("distributions have {0} and {1} bins")]
    SpecMismatch(usize, usize),
    #[error("window must be a positive number of seconds, got {0}")]
    InvalidWindow(f64),
    #[error("histogram edges must be finite, strictly increasing and at least 2")]
    InvalidHistogram,
    #[error("probabilities must be nonnegative and sum to 1")]
    InvalidDistribution,
    #[error("JSD features need a non-empty baseline")]
    EmptyBaseline,
    #[error("{0:?} is not a moment feature")]
    WrongFeatureKind(FeatureKind),
    #[error("feature vectors differ in kind or length")]
    Inhomogeneous,
    #[error("training data has unlabeled vectors")]
    Unlabeled,
    #[error("training split holds only one class")]
    SingleClassTraining,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model expects {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file lacks the JSD reference")]
    MissingReference,
    #[error("feature file: {0}")]
    FeatureFile(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Attack,
    NoAttack,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Attack => "attack",
            Label::NoAttack => "no-attack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "attack" => Some(Label::Attack),
            "no-attack" => Some(Label::NoAttack),
            _ => None,
        }
    }
}

/// Feature vectors for every attack and baseline window, in capture order
/// (attack first).
pub fn featurize(attack: &CaptureSeries, baseline: &CaptureSeries, reference: &Reference, kind: FeatureKind) -> Result<Vec<FeatureVector>, DetectorError> {
    let mut out = Vec::new();
    for (capture, label) in [(attack, Label::Attack), (baseline, Label::NoAttack)] {
        for seg in segment(capture, reference.window_s, Some(label))? {
            out.push(reference.features(&seg, kind)?);
        }
    }
    Ok(out)
}

/// `label,f0,f1,…`; unlabeled rows leave the label empty.
pub fn write_features_csv<W: Write>(vectors: &[FeatureVector], w: W) -> Result<(), DetectorError> {
    let dim = vectors.first().map_or(0, |v| v.values.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    out.write_record(&header)?;
    for v in vectors {
        let mut row = vec![v.label.map_or("", Label::as_str).to_string()];
        row.extend(v.values.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(kind: FeatureKind, r: R) -> Result<Vec<FeatureVector>, DetectorError> {
    let mut rd = csv::Reader::from_reader(r);
    let dim = rd.headers()?.len().saturating_sub(1);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| DetectorError::FeatureFile(format!("row {}: {m}", i + 1));
        let label = match &rec[0] {
            "" => None,
            s => Some(Label::parse(s).ok_or_else(|| bad(format!("unknown label {s:?}")))?),
        };
        let values = rec.iter().skip(1).map(|s| s.parse::<f64>().map_err(|e| bad(e.to_string()))).collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(bad(format!("expected {dim} values")));
        }
        out.push(FeatureVector { kind, values, label });
    }
    Ok(out)
}

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub feature: FeatureKind,
    pub algorithm: Algorithm,
    pub window_s: f64,
    pub hyperparams: Hyperparams,
    pub model: Model,
    /// Present for JSD models.
    pub reference: Option<Reference>,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DetectorError> {
        let m: Self = serde_json::from_str(text)?;
        if m.version != MODEL_FILE_VERSION {
            return Err(DetectorError::UnsupportedVersion(m.version));
        }
        if m.feature == FeatureKind::Jsd && m.reference.is_none() {
            return Err(DetectorError::MissingReference);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub window_start: f64,
    pub label: Label,
    pub score: f64,
    pub features: FeatureVector,
}

/// One verdict per complete window of `capture`.
pub fn detect(file: &ModelFile, capture: &CaptureSeries) -> Result<Vec<Verdict>, DetectorError> {
    let segs = segment(capture, file.window_s, None)?;
    segs.iter()
        .map(|seg| {
            let features = match (&file.reference, file.feature) {
                (Some(r), FeatureKind::Jsd) => r.features(seg, FeatureKind::Jsd)?,
                (None, FeatureKind::Jsd) => return Err(DetectorError::MissingReference),
                (_, k) => moment_features(seg, k)?,
            };
            if let Some(d) = file.model.dim() {
                if d != features.values.len() {
                    return Err(DetectorError::DimensionMismatch { expected: d, actual: features.values.len() });
                }
            }
            Ok(Verdict {
                window_start: seg.start,
                label: file.model.predict(&features.values),
                score: file.model.score(&features.values),
                features,
            })
        })
        .collect()
}

/// `window_start_s,verdict,score`
pub fn write_verdicts_csv<W: Write>(verdicts: &[Verdict], w: W) -> Result<(), DetectorError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["window_start_s", "verdict", "score"])?;
    for v in verdicts {
        out.write_record([v.window_start.to_string(), v.label.as_str().to_string(), v.score.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
