use serde::{Deserialize, Serialize};

use super::{DetectorError, Label};
use crate::bus::CaptureSeries;

/// `t[i+1] − t[i]` over the whole capture.
pub fn inter_arrivals(capture: &CaptureSeries) -> Result<Vec<f64>, DetectorError> {
    if capture.len() < 2 {
        return Err(DetectorError::TooFewRecords(capture.len()));
    }
    let ts: Vec<f64> = capture.timestamps().collect();
    Ok(ts.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterArrivalSegment {
    pub start: f64,
    pub window: f64,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

/// Splits a capture into consecutive wall-time windows `[k·w, (k+1)·w)`
/// starting at 0, up to the capture's observation end. Inter-arrivals are
/// taken between consecutive telegrams of the same window; a trailing
/// partial window is dropped.
pub fn segment(capture: &CaptureSeries, window: f64, label: Option<Label>) -> Result<Vec<InterArrivalSegment>, DetectorError> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(DetectorError::InvalidWindow(window));
    }
    let count = (capture.observation_end() / window).floor() as usize;
    if count == 0 {
        return Err(DetectorError::EmptyResult);
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); count];
    for r in &capture.records {
        let k = (r.timestamp / window).floor();
        if k >= 0.0 && (k as usize) < count {
            buckets[k as usize].push(r.timestamp);
        }
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(k, ts)| InterArrivalSegment {
            start: k as f64 * window,
            window,
            values: ts.windows(2).map(|w| w[1] - w[0]).collect(),
            label,
        })
        .collect())
}

/// Bin edges `e0 < e1 < … < en`; bins are `[e_i, e_{i+1})` plus an overflow
/// bin `[e_n, ∞)`. Values below `e0` fall into the first bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub edges: Vec<f64>,
}

impl HistogramSpec {
    pub fn new(edges: Vec<f64>) -> Result<Self, DetectorError> {
        if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DetectorError::InvalidHistogram);
        }
        Ok(Self { edges })
    }

    pub fn equal_width(upper: f64, bins: usize) -> Result<Self, DetectorError> {
        if bins == 0 || !(upper > 0.0) {
            return Err(DetectorError::InvalidHistogram);
        }
        Self::new((0..=bins).map(|i| upper * i as f64 / bins as f64).collect())
    }

    /// `bins` equal-width bins from 0 to the `quantile` of `values`.
    pub fn from_baseline(values: &[f64], bins: usize, quantile: f64) -> Result<Self, DetectorError> {
        if values.is_empty() {
            return Err(DetectorError::EmptyResult);
        }
        let q = percentile(values, quantile);
        Self::equal_width(if q > 0.0 { q } else { 1.0 }, bins)
    }

    /// Regular bins plus the overflow bin.
    pub fn bin_count(&self) -> usize {
        self.edges.len()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let last = self.edges.len() - 1;
        if x >= self.edges[last] {
            return last;
        }
        self.edges.partition_point(|&e| e <= x).saturating_sub(1)
    }
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, DetectorError> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DetectorError::InvalidDistribution);
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(DetectorError::InvalidDistribution);
        }
        Ok(Self { probs })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self, DetectorError> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(DetectorError::EmptySegment);
        }
        Ok(Self { probs: counts.iter().map(|&c| c as f64 / n as f64).collect() })
    }

    pub fn from_values(spec: &HistogramSpec, values: &[f64]) -> Result<Self, DetectorError> {
        let mut counts = vec![0u64; spec.bin_count()];
        for &v in values {
            counts[spec.bin_of(v)] += 1;
        }
        Self::from_counts(&counts)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn kl_terms(p: &[f64], m: &[f64]) -> (f64, f64) {
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (&pi, &mi) in p.iter().zip(m) {
        if pi > 0.0 {
            acc += pi * (pi / mi).log2();
            mass += pi;
        }
    }
    (acc, mass)
}

/// `KL(p‖q)` in bits; infinite when `q` misses part of `p`'s support.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64, DetectorError> {
    if p.len() != q.len() {
        return Err(DetectorError::SpecMismatch(p.len(), q.len()));
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi > 0.0 {
            if qi == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc += pi * (pi / qi).log2();
        }
    }
    Ok(acc)
}

/// Jensen–Shannon divergence in bits, in `[0, 1]`.
///
/// Each KL term is normalised by the mass it sums over, so rounding in the
/// inputs cannot push disjoint supports away from exactly 1.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64, DetectorError> {
    if p.len() != q.len() {
        return Err(DetectorError::SpecMismatch(p.len(), q.len()));
    }
    let m: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| 0.5 * (a + b)).collect();
    let (kp, sp) = kl_terms(&p.probs, &m);
    let (kq, sq) = kl_terms(&q.probs, &m);
    Ok((0.5 * (kp / sp) + 0.5 * (kq / sq)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mean,
    Variance,
    MeanVar,
    Jsd,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::Mean, FeatureKind::Variance, FeatureKind::MeanVar, FeatureKind::Jsd];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mean => "mean",
            FeatureKind::Variance => "variance",
            FeatureKind::MeanVar => "meanvar",
            FeatureKind::Jsd => "jsd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

fn mean_var(values: &[f64]) -> Result<(f64, f64), DetectorError> {
    let n = values.len();
    if n == 0 {
        return Err(DetectorError::EmptySegment);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok((mean, var))
}

pub fn moment_features(seg: &InterArrivalSegment, kind: FeatureKind) -> Result<FeatureVector, DetectorError> {
    let (mean, var) = mean_var(&seg.values)?;
    let values = match kind {
        FeatureKind::Mean => vec![mean],
        FeatureKind::Variance => vec![var],
        FeatureKind::MeanVar => vec![mean, var],
        FeatureKind::Jsd => return Err(DetectorError::WrongFeatureKind(kind)),
    };
    Ok(FeatureVector { kind, values, label: seg.label })
}

/// Element `j` is the JSD between the segment's histogram and baseline
/// segment `j`.
pub fn jsd_feature_vector(dist: &Distribution, baseline: &[Distribution], label: Option<Label>) -> Result<FeatureVector, DetectorError> {
    if baseline.is_empty() {
        return Err(DetectorError::EmptyBaseline);
    }
    let values = baseline.iter().map(|b| jsd(dist, b)).collect::<Result<_, _>>()?;
    Ok(FeatureVector { kind: FeatureKind::Jsd, values, label })
}

/// Histogram spec and baseline distributions that JSD features are measured
/// against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub window_s: f64,
    pub histogram: HistogramSpec,
    pub baseline: Vec<Distribution>,
}

impl Reference {
    /// Pools every baseline inter-arrival for the histogram range and keeps one
    /// distribution per baseline segment.
    pub fn build(baseline: &CaptureSeries, window: f64, bins: usize, quantile: f64) -> Result<Self, DetectorError> {
        let histogram = HistogramSpec::from_baseline(&inter_arrivals(baseline)?, bins, quantile)?;
        let baseline = segment(baseline, window, Some(Label::NoAttack))?
            .iter()
            .map(|s| Distribution::from_values(&histogram, &s.values))
            .collect::<Result<_, _>>()?;
        Ok(Self { window_s: window, histogram, baseline })
    }

    pub fn features(&self, seg: &InterArrivalSegment, kind: FeatureKind) -> Result<FeatureVector, DetectorError> {
        match kind {
            FeatureKind::Jsd => jsd_feature_vector(&Distribution::from_values(&self.histogram, &seg.values)?, &self.baseline, seg.label),
            _ => moment_features(seg, kind),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{CaptureRecord, Origin, SegmentId};

    fn capture(ts: &[f64]) -> CaptureSeries {
        let raw = vec![0xBC, 0x11, 0x01, 0x09, 0x02, 0xE1, 0x00, 0x81, 0x38];
        CaptureSeries::new(Origin::Unlabeled, ts.iter().map(|&t| CaptureRecord { timestamp: t, segment: SegmentId(0), raw: raw.clone() }).collect())
    }

    fn d(p: &[f64]) -> Distribution {
        Distribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn inter_arrival_arithmetic() {
        assert_eq!(inter_arrivals(&capture(&[0.0, 1.0, 3.0, 6.0])).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(inter_arrivals(&capture(&[1.0])), Err(DetectorError::TooFewRecords(1))));
        let ts: Vec<f64> = (0..1440).map(|i| i as f64 * 60.0).collect();
        let ia = inter_arrivals(&capture(&ts)).unwrap();
        assert_eq!(ia.len(), 1439);
        assert!(ia.iter().all(|&v| v == 60.0));
    }

    #[test]
    fn segmentation_counts() {
        let ts: Vec<f64> = (0..60).map(|i| i as f64 * 60.0).collect();
        let c = capture(&ts).with_end(3600.0);
        let segs = segment(&c, 1200.0, None).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[1].start, 1200.0);
        assert_eq!(segs[1].values, vec![60.0; 19]);
        let day = capture(&[0.0, 86_400.0]).with_end(86_400.0);
        assert_eq!(segment(&day, 300.0, None).unwrap().len(), 288);
        assert!(matches!(segment(&c, 7200.0, None), Err(DetectorError::EmptyResult)));
        assert!(segment(&c, 0.0, None).is_err());
    }

    #[test]
    fn jsd_reference_values() {
        let p = d(&[1.0, 0.0]);
        let q = d(&[0.5, 0.5]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert_eq!(jsd(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 1.0);
        // M = (0.75, 0.25): ½·log2(4/3) + ½·(½·log2(2/3) + ½·log2(2))
        let oracle = 0.5 * (1.0f64 / 0.75).log2() + 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2());
        assert!((jsd(&p, &q).unwrap() - oracle).abs() < 1e-15);
        assert!((jsd(&p, &q).unwrap() - 0.311_278_124_459_132_8).abs() < 1e-12);
        let kl = kl_divergence(&q, &d(&[0.25, 0.75])).unwrap();
        assert!((kl - 0.207_518_749_639_422).abs() < 1e-12);
        assert_eq!(kl_divergence(&q, &p).unwrap(), f64::INFINITY);
        assert!(matches!(jsd(&p, &d(&[1.0])), Err(DetectorError::SpecMismatch(2, 1))));
    }

    #[test]
    fn histogram_binning() {
        let h = HistogramSpec::equal_width(10.0, 5).unwrap();
        assert_eq!(h.bin_count(), 6);
        assert_eq!(h.bin_of(0.0), 0);
        assert_eq!(h.bin_of(1.999), 0);
        assert_eq!(h.bin_of(2.0), 1);
        assert_eq!(h.bin_of(9.99), 4);
        assert_eq!(h.bin_of(10.0), 5);
        assert_eq!(h.bin_of(1e9), 5);
        assert!(HistogramSpec::new(vec![0.0]).is_err());
        assert!(HistogramSpec::new(vec![0.0, 0.0]).is_err());
        let vals: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&vals, 0.99), 99.0);
        let b = HistogramSpec::from_baseline(&vals, 50, 0.99).unwrap();
        assert_eq!(b.edges.len(), 51);
        assert_eq!(*b.edges.last().unwrap(), 99.0);
        let dist = Distribution::from_values(&b, &vals).unwrap();
        assert!((dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(dist.probs[50], 0.02);
    }

    #[test]
    fn moments() {
        let seg = |v: &[f64]| InterArrivalSegment { start: 0.0, window: 1.0, values: v.to_vec(), label: None };
        assert_eq!(moment_features(&seg(&[2.0, 2.0, 2.0]), FeatureKind::MeanVar).unwrap().values, vec![2.0, 0.0]);
        assert_eq!(moment_features(&seg(&[1.0, 3.0]), FeatureKind::Mean).unwrap().values, vec![2.0]);
        assert_eq!(moment_features(&seg(&[1.0, 3.0]), FeatureKind::Variance).unwrap().values, vec![2.0]);
        assert!(matches!(moment_features(&seg(&[]), FeatureKind::Mean), Err(DetectorError::EmptySegment)));
    }

    #[test]
    fn self_comparison_is_zero() {
        let base = vec![d(&[0.2, 0.8]), d(&[0.6, 0.4]), d(&[0.5, 0.5])];
        let fv = jsd_feature_vector(&base[1], &base, Some(Label::NoAttack)).unwrap();
        assert_eq!(fv.values.len(), 3);
        assert_eq!(fv.values[1], 0.0);
        assert!(fv.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(jsd_feature_vector(&base[0], &[], None).is_err());
    }
}
