//! Man-in-the-middle relay that splits the sensor and the controller onto
//! separate segments and falsifies temperature telegrams in transit.
//!
//! The relay bridges at the telegram level: frames keep their hop count and
//! source address, and only the LSDU of matching victim telegrams changes.

use std::any::Any;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Context, Device, Frame, SegmentId};
use crate::codec::{decode_dpt9_slice, encode_dpt9, CodecError, Destination, GroupAddress, GroupData, IndividualAddress, Lsdu, Telegram};

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("undecodable frame: {0}")]
    UndecodableFrame(#[from] CodecError),
    #[error("frame arrived on segment {0:?}, which the relay does not bridge")]
    WrongSegment(SegmentId),
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayDistribution {
    #[serde(rename = "gauss")]
    GaussianTruncated,
    #[serde(rename = "uniform")]
    Uniform,
}

/// Queue-then-flush forwarding: frames wait for the next multiple of
/// `interval` and leave back-to-back, `spacing` seconds apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstMode {
    pub interval: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub base: f64,
    pub jitter_sd: f64,
    pub distribution: DelayDistribution,
    pub seed: u64,
    pub burst: Option<BurstMode>,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self { base: 0.050, jitter_sd: 0.020, distribution: DelayDistribution::GaussianTruncated, seed: 0, burst: None }
    }
}

impl DelayModel {
    pub fn zero() -> Self {
        Self { base: 0.0, jitter_sd: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.base >= 0.0 && self.base.is_finite()) || !(self.jitter_sd >= 0.0 && self.jitter_sd.is_finite()) {
            return Err(AttackError::InvalidConfig("delay base and jitter must be finite and >= 0".into()));
        }
        if let Some(b) = self.burst {
            if !(b.interval > 0.0) || !(b.spacing >= 0.0) {
                return Err(AttackError::InvalidConfig("burst interval must be > 0 and spacing >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<DelaySampler, AttackError> {
        self.validate()?;
        let normal = Normal::new(self.base, self.jitter_sd).map_err(|e| AttackError::InvalidConfig(e.to_string()))?;
        Ok(DelaySampler { model: *self, rng: ChaCha8Rng::seed_from_u64(self.seed), normal, flush_at: f64::NEG_INFINITY, batch: 0 })
    }
}

#[derive(Debug, Clone)]
pub struct DelaySampler {
    model: DelayModel,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    flush_at: f64,
    batch: u32,
}

impl DelaySampler {
    /// One forwarding delay, always `>= 0`.
    pub fn sample(&mut self) -> f64 {
        let m = &self.model;
        if m.jitter_sd == 0.0 {
            return m.base;
        }
        match m.distribution {
            DelayDistribution::GaussianTruncated => loop {
                let d = self.normal.sample(&mut self.rng);
                if d >= 0.0 {
                    return d;
                }
            },
            DelayDistribution::Uniform => {
                let half = 3f64.sqrt() * m.jitter_sd;
                let lo = (m.base - half).max(0.0);
                self.rng.random_range(lo..=m.base + half)
            }
        }
    }

    /// Emission time for a frame that arrived at `arrival`.
    pub fn emission_time(&mut self, arrival: f64) -> f64 {
        let ready = arrival + self.sample();
        let Some(burst) = self.model.burst else { return ready };
        let slot = (ready / burst.interval).ceil() * burst.interval;
        if slot == self.flush_at {
            self.batch += 1;
        } else {
            self.flush_at = slot;
            self.batch = 0;
        }
        slot + f64::from(self.batch) * burst.spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FalsifyKind {
    Passthrough,
    BiasAdd(f64),
    Override(f64),
}

impl FalsifyKind {
    pub fn apply_value(self, celsius: f64) -> f64 {
        match self {
            FalsifyKind::Passthrough => celsius,
            FalsifyKind::BiasAdd(b) => celsius + b,
            FalsifyKind::Override(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Falsifier {
    pub kind: FalsifyKind,
    pub victim_source: IndividualAddress,
    pub victim_group: GroupAddress,
}

impl Falsifier {
    /// Reported temperature carried by a victim write or response.
    pub fn victim_value(&self, t: &Telegram) -> Option<f64> {
        if t.source != self.victim_source || t.destination != Destination::Group(self.victim_group) {
            return None;
        }
        let (Lsdu::GroupWrite(GroupData::Octets(d)) | Lsdu::GroupResponse(GroupData::Octets(d))) = &t.lsdu else {
            return None;
        };
        decode_dpt9_slice(d).ok()
    }

    /// The falsified telegram, or `None` when `t` is not a victim telegram.
    /// Values the falsifier pushes out of the DPT9 range pass unchanged.
    pub fn apply(&self, t: &Telegram) -> Option<Telegram> {
        let value = self.victim_value(t)?;
        let code = encode_dpt9(self.kind.apply_value(value)).ok()?;
        let mut out = t.clone();
        let data = GroupData::Octets(code.to_vec());
        out.lsdu = match t.lsdu {
            Lsdu::GroupResponse(_) => Lsdu::GroupResponse(data),
            _ => Lsdu::GroupWrite(data),
        };
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelayStats {
    pub forwarded: u64,
    pub modified: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub segment: SegmentId,
    pub raw: Vec<u8>,
    pub time: f64,
}

/// Two relay nodes acting as one device: every frame entering one side
/// leaves the other exactly once.
pub struct RelayPair {
    sensor_side: SegmentId,
    controller_side: SegmentId,
    delay: DelaySampler,
    falsifier: Falsifier,
    stats: RelayStats,
}

impl RelayPair {
    pub fn new(sensor_side: SegmentId, controller_side: SegmentId, delay: DelayModel, falsifier: Falsifier) -> Result<Self, AttackError> {
        if sensor_side == controller_side {
            return Err(AttackError::InvalidConfig("relay sides must be distinct segments".into()));
        }
        Ok(Self { sensor_side, controller_side, delay: delay.sampler()?, falsifier, stats: RelayStats::default() })
    }

    pub fn stats(&self) -> RelayStats {
        self.stats
    }

    pub fn sides(&self) -> [SegmentId; 2] {
        [self.sensor_side, self.controller_side]
    }

    pub fn process(&mut self, arrived_on: SegmentId, raw: &[u8], arrival: f64) -> Result<Emission, AttackError> {
        let towards = if arrived_on == self.sensor_side {
            self.controller_side
        } else if arrived_on == self.controller_side {
            self.sensor_side
        } else {
            return Err(AttackError::WrongSegment(arrived_on));
        };
        let telegram = match Telegram::decode(raw) {
            Ok(t) => t,
            Err(e) => {
                self.stats.dropped += 1;
                return Err(e.into());
            }
        };
        let mut out = raw.to_vec();
        if arrived_on == self.sensor_side && self.falsifier.kind != FalsifyKind::Passthrough {
            if let Some(forged) = self.falsifier.apply(&telegram) {
                out = forged.encode()?;
                self.stats.modified += 1;
            }
        }
        self.stats.forwarded += 1;
        Ok(Emission { segment: towards, raw: out, time: self.delay.emission_time(arrival) })
    }
}

impl Device for RelayPair {
    fn on_frame(&mut self, ctx: &mut Context<'_>, frame: &Frame<'_>) {
        if let Ok(e) = self.process(frame.segment, frame.raw, frame.time) {
            let _ = ctx.transmit_raw(e.segment, e.raw, e.time - ctx.now());
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// A single relay on the shared segment: the victim's original telegram
/// still reaches the controller, followed by a falsified copy.
pub struct SingleDeviceRelay {
    delay: DelaySampler,
    falsifier: Falsifier,
    injected: u64,
}

impl SingleDeviceRelay {
    pub fn new(delay: DelayModel, falsifier: Falsifier) -> Result<Self, AttackError> {
        Ok(Self { delay: delay.sampler()?, falsifier, injected: 0 })
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }
}

impl Device for SingleDeviceRelay {
    fn on_frame(&mut self, ctx: &mut Context<'_>, frame: &Frame<'_>) {
        let Ok(t) = Telegram::decode(frame.raw) else { return };
        let Some(forged) = self.falsifier.apply(&t) else { return };
        let Ok(raw) = forged.encode() else { return };
        let at = self.delay.emission_time(frame.time);
        if ctx.transmit_raw(frame.segment, raw, at - ctx.now()).is_ok() {
            self.injected += 1;
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FalsifierKindName {
    Bias,
    Override,
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalsifierSpec {
    pub kind: FalsifierKindName,
    #[serde(default)]
    pub value: Option<f64>,
}

impl FalsifierSpec {
    pub fn to_kind(self) -> Result<FalsifyKind, AttackError> {
        let need = |v: Option<f64>| match v {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(AttackError::InvalidConfig(format!("falsifier {:?} needs a finite value", self.kind))),
        };
        Ok(match self.kind {
            FalsifierKindName::Passthrough => FalsifyKind::Passthrough,
            FalsifierKindName::Bias => FalsifyKind::BiasAdd(need(self.value)?),
            FalsifierKindName::Override => FalsifyKind::Override(need(self.value)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub base: f64,
    pub jitter_sd: f64,
    pub dist: DelayDistribution,
    /// Derived from the root seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub burst: Option<BurstMode>,
}

impl DelaySpec {
    pub fn to_model(self, fallback_seed: u64) -> Result<DelayModel, AttackError> {
        let m = DelayModel {
            base: self.base,
            jitter_sd: self.jitter_sd,
            distribution: self.dist,
            seed: self.seed.unwrap_or(fallback_seed),
            burst: self.burst,
        };
        m.validate()?;
        Ok(m)
    }
}

/// Attack scenario file:
/// `{"falsifier": {"kind": "bias", "value": 1.0}, "delay": {"base": 0.05, "jitter_sd": 0.02, "dist": "gauss", "seed": 7}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackScenario {
    pub falsifier: FalsifierSpec,
    pub delay: DelaySpec,
}

impl Default for AttackScenario {
    fn default() -> Self {
        Self {
            falsifier: FalsifierSpec { kind: FalsifierKindName::Bias, value: Some(1.0) },
            delay: DelaySpec { base: 0.050, jitter_sd: 0.020, dist: DelayDistribution::GaussianTruncated, seed: None, burst: None },
        }
    }
}

impl AttackScenario {
    pub fn from_json(text: &str) -> Result<Self, AttackError> {
        let s: Self = serde_json::from_str(text).map_err(|e| AttackError::InvalidConfig(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        self.falsifier.to_kind()?;
        self.delay.to_model(0)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_dpt9, encode_dpt9};

    const SENSOR: IndividualAddress = IndividualAddress::from_raw(0x110A);
    const GROUP: GroupAddress = GroupAddress::from_raw(0x0901);

    fn reading(v: f64) -> Telegram {
        Telegram::group_write(SENSOR, GROUP, GroupData::Octets(encode_dpt9(v).unwrap().to_vec()))
    }

    fn payload(t: &Telegram) -> f64 {
        let d = t.lsdu.group_data().unwrap().octets().unwrap();
        decode_dpt9([d[0], d[1]]).unwrap()
    }

    fn pair(kind: FalsifyKind, delay: DelayModel) -> RelayPair {
        RelayPair::new(SegmentId(1), SegmentId(0), delay, Falsifier { kind, victim_source: SENSOR, victim_group: GROUP }).unwrap()
    }

    #[test]
    fn bias_adds_one_degree() {
        let mut p = pair(FalsifyKind::BiasAdd(1.0), DelayModel::default());
        let e = p.process(SegmentId(1), &reading(22.0).encode().unwrap(), 10.0).unwrap();
        assert_eq!(e.segment, SegmentId(0));
        assert!(e.time >= 10.0);
        assert_eq!(payload(&Telegram::decode(&e.raw).unwrap()), 23.0);
        assert_eq!(p.stats(), RelayStats { forwarded: 1, modified: 1, dropped: 0 });
    }

    #[test]
    fn override_snaps_to_nearest_code() {
        let mut p = pair(FalsifyKind::Override(22.005), DelayModel::zero());
        let e = p.process(SegmentId(1), &reading(19.4).encode().unwrap(), 0.0).unwrap();
        let t = Telegram::decode(&e.raw).unwrap();
        assert_eq!(e.raw[e.raw.len() - 3..e.raw.len() - 1], encode_dpt9(22.005).unwrap());
        assert_eq!(payload(&t), 22.0);
        assert_eq!(t.source, SENSOR);
        assert_eq!(t.hop_count, 6);
    }

    #[test]
    fn passthrough_is_byte_identical() {
        let mut p = pair(FalsifyKind::Passthrough, DelayModel { seed: 9, ..DelayModel::default() });
        let raw = reading(21.3).encode().unwrap();
        let e = p.process(SegmentId(1), &raw, 5.0).unwrap();
        assert_eq!(e.raw, raw);
        assert_eq!(p.stats().modified, 0);
    }

    #[test]
    fn controller_to_sensor_is_never_falsified() {
        let mut p = pair(FalsifyKind::BiasAdd(3.0), DelayModel::zero());
        let raw = reading(21.0).encode().unwrap();
        let e = p.process(SegmentId(0), &raw, 1.0).unwrap();
        assert_eq!((e.segment, e.raw, e.time), (SegmentId(1), raw, 1.0));
    }

    #[test]
    fn non_victim_traffic_passes() {
        let mut p = pair(FalsifyKind::Override(30.0), DelayModel::zero());
        let other = Telegram::group_write(IndividualAddress::from_raw(0x1114), GROUP, GroupData::Octets(vec![0x0C, 0x4C]));
        let raw = other.encode().unwrap();
        assert_eq!(p.process(SegmentId(1), &raw, 0.0).unwrap().raw, raw);
        let read = Telegram::group_read(SENSOR, GROUP).encode().unwrap();
        assert_eq!(p.process(SegmentId(1), &read, 0.0).unwrap().raw, read);
    }

    #[test]
    fn undecodable_frames_are_dropped_and_counted() {
        let mut p = pair(FalsifyKind::Passthrough, DelayModel::zero());
        let mut raw = reading(21.0).encode().unwrap();
        raw[3] ^= 1;
        assert!(matches!(p.process(SegmentId(1), &raw, 0.0), Err(AttackError::UndecodableFrame(_))));
        assert_eq!(p.stats().dropped, 1);
        assert_eq!(p.process(SegmentId(7), &raw, 0.0), Err(AttackError::WrongSegment(SegmentId(7))));
    }

    #[test]
    fn response_values_are_falsified_too() {
        let f = Falsifier { kind: FalsifyKind::BiasAdd(1.0), victim_source: SENSOR, victim_group: GROUP };
        let resp = Telegram::group_response(SENSOR, GROUP, GroupData::Octets(encode_dpt9(20.0).unwrap().to_vec()));
        let out = f.apply(&resp).unwrap();
        assert!(matches!(out.lsdu, Lsdu::GroupResponse(_)));
        assert_eq!(payload(&out), 21.0);
    }

    #[test]
    fn delays_are_nonnegative_and_seeded() {
        for dist in [DelayDistribution::GaussianTruncated, DelayDistribution::Uniform] {
            let m = DelayModel { base: 0.01, jitter_sd: 0.05, distribution: dist, seed: 4, burst: None };
            let a: Vec<f64> = { let mut s = m.sampler().unwrap(); (0..2000).map(|_| s.sample()).collect() };
            let b: Vec<f64> = { let mut s = m.sampler().unwrap(); (0..2000).map(|_| s.sample()).collect() };
            assert_eq!(a, b);
            assert!(a.iter().all(|&d| d >= 0.0));
        }
        let mut z = DelayModel::zero().sampler().unwrap();
        assert_eq!(z.emission_time(3.25), 3.25);
    }

    #[test]
    fn gaussian_delay_statistics() {
        let mut s = DelayModel::default().sampler().unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| s.sample()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // truncation at zero is 2.5 sd away: mean shift is below 0.1 ms
        assert!((mean - 0.050).abs() < 0.001, "{mean}");
    }

    #[test]
    fn burst_mode_batches() {
        let m = DelayModel { burst: Some(BurstMode { interval: 1.0, spacing: 0.001 }), ..DelayModel::zero() };
        let mut s = m.sampler().unwrap();
        assert_eq!(s.emission_time(0.2), 1.0);
        assert_eq!(s.emission_time(0.5), 1.001);
        assert_eq!(s.emission_time(1.5), 2.0);
    }

    #[test]
    fn scenario_json() {
        let s = AttackScenario::from_json(
            r#"{"falsifier":{"kind":"override","value":22.005},"delay":{"base":0.05,"jitter_sd":0.02,"dist":"uniform","seed":3}}"#,
        )
        .unwrap();
        assert_eq!(s.falsifier.to_kind().unwrap(), FalsifyKind::Override(22.005));
        assert_eq!(s.delay.to_model(0).unwrap().seed, 3);
        assert!(AttackScenario::from_json(r#"{"falsifier":{"kind":"scramble","value":1},"delay":{"base":0,"jitter_sd":0,"dist":"gauss"}}"#).is_err());
        assert!(AttackScenario::from_json(r#"{"falsifier":{"kind":"bias"},"delay":{"base":0,"jitter_sd":0,"dist":"gauss"}}"#).is_err());
        assert!(AttackScenario::from_json(r#"{"falsifier":{"kind":"passthrough"},"delay":{"base":-1,"jitter_sd":0,"dist":"gauss"}}"#).is_err());
        let round = serde_json::to_string(&AttackScenario::default()).unwrap();
        assert_eq!(AttackScenario::from_json(&round).unwrap(), AttackScenario::default());
    }
}
