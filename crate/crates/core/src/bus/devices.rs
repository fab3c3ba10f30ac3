use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::capture::{quantize_time, CaptureRecord, CaptureSeries, Origin};
use super::{BusError, Context, Device, Frame};
use crate::codec::{
    decode_dpt9_slice, encode_dpt9, Destination, GroupAddress, GroupData, IndividualAddress, Lsdu, Telegram,
};

/// Passive eavesdropper: records every frame it sees.
#[derive(Debug, Default)]
pub struct Tap {
    records: Vec<CaptureRecord>,
    undecodable: u64,
}

impl Tap {
    pub fn records(&self) -> &[CaptureRecord] {
        &self.records
    }

    pub fn undecodable(&self) -> u64 {
        self.undecodable
    }

    pub fn series(&self, origin: Origin) -> CaptureSeries {
        CaptureSeries::new(origin, self.records.clone())
    }
}

impl Device for Tap {
    fn on_frame(&mut self, _ctx: &mut Context<'_>, frame: &Frame<'_>) {
        if Telegram::decode(frame.raw).is_err() {
            self.undecodable += 1;
            return;
        }
        self.records.push(CaptureRecord {
            timestamp: quantize_time(frame.time),
            segment: frame.segment,
            raw: frame.raw.to_vec(),
        });
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Lock-free cell for coupling a sensor to an external thermal model.
#[derive(Debug, Default)]
pub struct SharedTemperature(AtomicU64);

impl SharedTemperature {
    pub fn new(celsius: f64) -> Self {
        Self(AtomicU64::new(celsius.to_bits()))
    }

    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    pub fn set(&self, celsius: f64) {
        self.0.store(celsius.to_bits(), Ordering::Relaxed);
    }
}

#[derive(Debug, Clone)]
pub enum TemperatureSource {
    Constant(f64),
    /// `(time, celsius)` samples, linearly interpolated and held at the ends.
    Trace(Vec<(f64, f64)>),
    Shared(Arc<SharedTemperature>),
}

impl TemperatureSource {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            TemperatureSource::Constant(v) => *v,
            TemperatureSource::Shared(cell) => cell.get(),
            TemperatureSource::Trace(samples) => interpolate(samples, t),
        }
    }
}

pub(crate) fn interpolate(samples: &[(f64, f64)], t: f64) -> f64 {
    match samples {
        [] => f64::NAN,
        [(_, v)] => *v,
        _ => {
            if t <= samples[0].0 {
                return samples[0].1;
            }
            let last = samples[samples.len() - 1];
            if t >= last.0 {
                return last.1;
            }
            let i = samples.partition_point(|&(ts, _)| ts <= t);
            let (t0, v0) = samples[i - 1];
            let (t1, v1) = samples[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensorConfig {
    pub address: IndividualAddress,
    pub group: GroupAddress,
    pub period: f64,
    pub period_jitter_sd: f64,
    /// Time of the first nominal report.
    pub phase: f64,
    pub temperature_source: TemperatureSource,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            address: IndividualAddress::from_raw(0x110A),
            group: GroupAddress::from_raw(0x0901),
            period: 60.0,
            period_jitter_sd: 0.5,
            phase: 0.0,
            temperature_source: TemperatureSource::Constant(21.5),
            seed: 0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), BusError> {
        if !(self.period > 0.0) {
            return Err(BusError::InvalidConfig("sensor period must be > 0".into()));
        }
        if !(self.period_jitter_sd >= 0.0) {
            return Err(BusError::InvalidConfig("sensor jitter sd must be >= 0".into()));
        }
        if self.group.is_broadcast() {
            return Err(BusError::InvalidConfig("sensor group may not be the broadcast address".into()));
        }
        Ok(())
    }
}

/// Room temperature sensor: periodic DPT9 group writes, and group responses
/// to reads of its group.
pub struct TemperatureSensor {
    config: SensorConfig,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    index: u64,
    writes: u64,
    responses: u64,
    encode_failures: u64,
}

impl TemperatureSensor {
    pub fn new(config: SensorConfig) -> Result<Self, BusError> {
        config.validate()?;
        let jitter = if config.period_jitter_sd > 0.0 {
            Some(Normal::new(0.0, config.period_jitter_sd).map_err(|e| BusError::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            jitter,
            index: 0,
            writes: 0,
            responses: 0,
            encode_failures: 0,
        })
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn responses(&self) -> u64 {
        self.responses
    }

    fn next_report_time(&mut self) -> f64 {
        let nominal = self.config.phase + self.index as f64 * self.config.period;
        let bound = 0.1 * self.config.period;
        let j = self.jitter.map_or(0.0, |n| n.sample(&mut self.rng).clamp(-bound, bound));
        self.index += 1;
        nominal + j
    }

    fn payload(&mut self, t: f64) -> Option<GroupData> {
        match encode_dpt9(self.config.temperature_source.value_at(t)) {
            Ok(code) => Some(GroupData::Octets(code.to_vec())),
            Err(_) => {
                self.encode_failures += 1;
                None
            }
        }
    }
}

impl Device for TemperatureSensor {
    fn start(&mut self, ctx: &mut Context<'_>) {
        let at = self.next_report_time();
        ctx.set_timer(at, 0);
    }

    fn on_timer(&mut self, ctx: &mut Context<'_>, _token: u64) {
        if let Some(data) = self.payload(ctx.now()) {
            let t = Telegram::group_write(self.config.address, self.config.group, data);
            let seg = ctx.ports()[0];
            if ctx.send(seg, &t).is_ok() {
                self.writes += 1;
            }
        }
        let at = self.next_report_time();
        ctx.set_timer(at, 0);
    }

    fn on_frame(&mut self, ctx: &mut Context<'_>, frame: &Frame<'_>) {
        let Ok(t) = Telegram::decode(frame.raw) else { return };
        if t.lsdu == Lsdu::GroupRead && t.destination == Destination::Group(self.config.group) {
            if let Some(data) = self.payload(ctx.now()) {
                let resp = Telegram::group_response(self.config.address, self.config.group, data);
                if ctx.send(frame.segment, &resp).is_ok() {
                    self.responses += 1;
                }
            }
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub address: IndividualAddress,
    pub subscribed_groups: BTreeSet<GroupAddress>,
    /// When set, values from other sources are rejected.
    pub auth_allowlist: Option<BTreeSet<IndividualAddress>>,
    /// `None` disables polling.
    pub poll_period: Option<f64>,
    pub poll_phase: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            address: IndividualAddress::from_raw(0x1101),
            subscribed_groups: BTreeSet::from([GroupAddress::from_raw(0x0901)]),
            auth_allowlist: None,
            poll_period: Some(5.0),
            poll_phase: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub value: f64,
    pub time: f64,
    pub source: IndividualAddress,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEvent {
    pub time: f64,
    pub source: IndividualAddress,
    pub group: GroupAddress,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ingest {
    Accepted { group: GroupAddress, value: f64 },
    Rejected(AuditEvent),
    /// Not a value-carrying telegram for a subscribed group.
    Ignored,
}

/// Room controller: subscribes to temperature groups, optionally polls them,
/// and stores the latest reported value per group.
pub struct Controller {
    config: ControllerConfig,
    latest: BTreeMap<GroupAddress, Reading>,
    audit: Vec<AuditEvent>,
    accepted: u64,
    undecodable: u64,
    polls: u64,
    poll_round: u64,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self, BusError> {
        if let Some(p) = config.poll_period {
            if !(p > 0.0) {
                return Err(BusError::InvalidConfig("poll period must be > 0".into()));
            }
        }
        Ok(Self { config, latest: BTreeMap::new(), audit: Vec::new(), accepted: 0, undecodable: 0, polls: 0, poll_round: 0 })
    }

    pub fn latest(&self, group: GroupAddress) -> Option<Reading> {
        self.latest.get(&group).copied()
    }

    pub fn audit_log(&self) -> &[AuditEvent] {
        &self.audit
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn polls(&self) -> u64 {
        self.polls
    }

    pub fn undecodable(&self) -> u64 {
        self.undecodable
    }

    pub fn ingest(&mut self, t: &Telegram, time: f64) -> Result<Ingest, BusError> {
        let Destination::Group(group) = t.destination else { return Ok(Ingest::Ignored) };
        if !self.config.subscribed_groups.contains(&group) {
            return Ok(Ingest::Ignored);
        }
        let Some(data) = t.lsdu.group_data() else { return Ok(Ingest::Ignored) };
        if let Some(allow) = &self.config.auth_allowlist {
            if !allow.contains(&t.source) {
                let ev = AuditEvent { time, source: t.source, group };
                self.audit.push(ev);
                return Ok(Ingest::Rejected(ev));
            }
        }
        let octets = data.octets().ok_or_else(|| BusError::UndecodablePayload("short payload".into()))?;
        let value = decode_dpt9_slice(octets).map_err(|e| BusError::UndecodablePayload(e.to_string()))?;
        self.latest.insert(group, Reading { value, time, source: t.source });
        self.accepted += 1;
        Ok(Ingest::Accepted { group, value })
    }
}

impl Device for Controller {
    fn start(&mut self, ctx: &mut Context<'_>) {
        if self.config.poll_period.is_some() {
            ctx.set_timer(self.config.poll_phase, 0);
        }
    }

    fn on_timer(&mut self, ctx: &mut Context<'_>, _token: u64) {
        let seg = ctx.ports()[0];
        for &g in &self.config.subscribed_groups {
            if ctx.send(seg, &Telegram::group_read(self.config.address, g)).is_ok() {
                self.polls += 1;
            }
        }
        if let Some(p) = self.config.poll_period {
            self.poll_round += 1;
            ctx.set_timer(self.config.poll_phase + self.poll_round as f64 * p, 0);
        }
    }

    fn on_frame(&mut self, _ctx: &mut Context<'_>, frame: &Frame<'_>) {
        match Telegram::decode(frame.raw) {
            Ok(t) => {
                if self.ingest(&t, frame.time).is_err() {
                    self.undecodable += 1;
                }
            }
            Err(_) => self.undecodable += 1,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Hop handling of a line coupler: hop 0 is dropped, hop 7 passes
/// unchanged, anything else is decremented.
pub fn coupler_forward(t: &Telegram) -> Option<Telegram> {
    let step = t.decrement_hop();
    step.forwardable.then_some(step.telegram)
}

/// Store-and-forward coupler between two segments.
#[derive(Debug)]
pub struct LineCoupler {
    forwarded: u64,
    dropped: u64,
}

impl LineCoupler {
    pub fn new() -> Self {
        Self { forwarded: 0, dropped: 0 }
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl Default for LineCoupler {
    fn default() -> Self {
        Self::new()
    }
}

impl Device for LineCoupler {
    fn on_frame(&mut self, ctx: &mut Context<'_>, frame: &Frame<'_>) {
        let Some(&other) = ctx.ports().iter().find(|&&s| s != frame.segment) else { return };
        let Ok(t) = Telegram::decode(frame.raw) else {
            self.dropped += 1;
            return;
        };
        match coupler_forward(&t) {
            Some(out) if ctx.send(other, &out).is_ok() => self.forwarded += 1,
            _ => self.dropped += 1,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundConfig {
    /// Poisson rate in telegrams per second; 0 disables the generator.
    pub rate: f64,
    pub sources: Vec<IndividualAddress>,
    pub groups: Vec<GroupAddress>,
    pub read_fraction: f64,
    pub seed: u64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            rate: 0.05,
            sources: (20..24).map(|d| IndividualAddress::from_raw(0x1100 | d)).collect(),
            groups: (1..=6).map(|s| GroupAddress::from_raw(0x0A00 | s)).collect(),
            read_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Other building traffic: random group reads and short writes.
pub struct BackgroundTraffic {
    config: BackgroundConfig,
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    sent: u64,
}

impl BackgroundTraffic {
    pub fn new(config: BackgroundConfig) -> Result<Self, BusError> {
        if !(config.rate >= 0.0) || config.sources.is_empty() || config.groups.is_empty() {
            return Err(BusError::InvalidConfig("background traffic needs rate >= 0, sources and groups".into()));
        }
        let gap = if config.rate > 0.0 {
            Some(Exp::new(config.rate).map_err(|e| BusError::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(config.seed), config, gap, sent: 0 })
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }
}

impl Device for BackgroundTraffic {
    fn start(&mut self, ctx: &mut Context<'_>) {
        if let Some(gap) = self.gap {
            let at = ctx.now() + gap.sample(&mut self.rng);
            ctx.set_timer(at, 0);
        }
    }

    fn on_timer(&mut self, ctx: &mut Context<'_>, _token: u64) {
        let src = self.config.sources[self.rng.random_range(0..self.config.sources.len())];
        let group = self.config.groups[self.rng.random_range(0..self.config.groups.len())];
        let t = if self.rng.random_bool(self.config.read_fraction.clamp(0.0, 1.0)) {
            Telegram::group_read(src, group)
        } else {
            Telegram::group_write(src, group, GroupData::Short(self.rng.random_range(0..2)))
        };
        let seg = ctx.ports()[0];
        if ctx.send(seg, &t).is_ok() {
            self.sent += 1;
        }
        if let Some(gap) = self.gap {
            let at = ctx.now() + gap.sample(&mut self.rng);
            ctx.set_timer(at, 0);
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::super::{SegmentId, Simulation};
    use super::*;

    #[test]
    fn simulation_is_send() {
        fn is_send<T: Send>() {}
        is_send::<Simulation>();
    }

    fn quiet_sensor() -> SensorConfig {
        SensorConfig { period_jitter_sd: 0.0, ..SensorConfig::default() }
    }

    fn one_segment() -> Simulation {
        let mut sim = Simulation::default();
        sim.add_segment(SegmentId(0)).unwrap();
        sim
    }

    #[test]
    fn sixty_reports_per_hour() {
        let mut sim = one_segment();
        let tap = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        sim.attach_device(&[SegmentId(0)], Box::new(TemperatureSensor::new(quiet_sensor()).unwrap())).unwrap();
        sim.run_until(3600.0);
        assert_eq!(sim.device::<Tap>(tap).unwrap().records().len(), 60);
    }

    #[test]
    fn zero_run_is_empty() {
        let mut sim = one_segment();
        let tap = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        sim.attach_device(&[SegmentId(0)], Box::new(TemperatureSensor::new(quiet_sensor()).unwrap())).unwrap();
        sim.run_until(0.0);
        assert!(sim.device::<Tap>(tap).unwrap().records().is_empty());
    }

    #[test]
    fn taps_see_identical_octets_and_late_tap_misses_prefix() {
        let mut sim = one_segment();
        let a = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        let b = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        let cfg = SensorConfig { seed: 3, ..SensorConfig::default() };
        sim.attach_device(&[SegmentId(0)], Box::new(TemperatureSensor::new(cfg).unwrap())).unwrap();
        sim.attach_device(&[SegmentId(0)], Box::new(BackgroundTraffic::new(BackgroundConfig::default()).unwrap()))
            .unwrap();
        sim.run_until(1800.0);
        let k = sim.device::<Tap>(a).unwrap().records().len();
        let late = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        sim.run_until(3600.0);
        let ra = sim.device::<Tap>(a).unwrap().records();
        assert_eq!(ra, sim.device::<Tap>(b).unwrap().records());
        assert_eq!(&ra[k..], sim.device::<Tap>(late).unwrap().records());
        let stats = sim.stats();
        assert_eq!(stats.delivered[0].1 as usize, ra.len());
    }

    #[test]
    fn same_seed_same_capture() {
        let run = |seed| {
            let mut sim = one_segment();
            let tap = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
            let cfg = SensorConfig { seed, ..SensorConfig::default() };
            sim.attach_device(&[SegmentId(0)], Box::new(TemperatureSensor::new(cfg).unwrap())).unwrap();
            let bg = BackgroundConfig { seed, ..BackgroundConfig::default() };
            sim.attach_device(&[SegmentId(0)], Box::new(BackgroundTraffic::new(bg).unwrap())).unwrap();
            sim.run_until(7200.0);
            sim.device::<Tap>(tap).unwrap().series(Origin::Unlabeled).to_jsonl_string()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn jitter_is_truncated() {
        let cfg = SensorConfig { period_jitter_sd: 100.0, ..SensorConfig::default() };
        let mut s = TemperatureSensor::new(cfg).unwrap();
        for k in 0..200 {
            let t = s.next_report_time();
            assert!((t - 60.0 * k as f64).abs() <= 6.0 + 1e-12);
        }
    }

    #[test]
    fn controller_polls_and_sensor_responds() {
        let mut sim = one_segment();
        let tap = sim.attach_device(&[SegmentId(0)], Box::new(Tap::default())).unwrap();
        let sensor = sim.attach_device(&[SegmentId(0)], Box::new(TemperatureSensor::new(quiet_sensor()).unwrap())).unwrap();
        let ctl = sim.attach_device(&[SegmentId(0)], Box::new(Controller::new(ControllerConfig::default()).unwrap())).unwrap();
        sim.run_until(100.0);
        let c = sim.device::<Controller>(ctl).unwrap();
        assert_eq!(c.polls(), 20);
        assert_eq!(sim.device::<TemperatureSensor>(sensor).unwrap().responses(), 20);
        assert_eq!(c.latest(GroupAddress::from_raw(0x0901)).unwrap().value, 21.5);
        let recs = sim.device::<Tap>(tap).unwrap().records();
        // poll at 1.0 lands at 1.02, response at 1.04
        let first_poll = recs.iter().position(|r| r.telegram().unwrap().lsdu == Lsdu::GroupRead).unwrap();
        assert!((recs[first_poll].timestamp - 1.02).abs() < 1e-9);
        assert!((recs[first_poll + 1].timestamp - 1.04).abs() < 1e-9);
    }

    fn write_from(src: IndividualAddress, value: f64) -> Telegram {
        Telegram::group_write(src, GroupAddress::from_raw(0x0901), GroupData::Octets(encode_dpt9(value).unwrap().to_vec()))
    }

    #[test]
    fn ingest_without_authentication_accepts_spoofed_source() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        let spoof = IndividualAddress::new(1, 1, 200).unwrap();
        assert_eq!(
            c.ingest(&write_from(spoof, 23.0), 1.0).unwrap(),
            Ingest::Accepted { group: GroupAddress::from_raw(0x0901), value: 23.0 }
        );
        assert_eq!(c.latest(GroupAddress::from_raw(0x0901)).unwrap().source, spoof);
    }

    #[test]
    fn allowlist_rejects_foreign_source_but_not_forged_sensor() {
        let sensor = IndividualAddress::from_raw(0x110A);
        let cfg = ControllerConfig { auth_allowlist: Some(BTreeSet::from([sensor])), ..ControllerConfig::default() };
        let mut c = Controller::new(cfg).unwrap();
        let relay = IndividualAddress::new(1, 1, 250).unwrap();
        assert!(matches!(c.ingest(&write_from(relay, 23.0), 2.0).unwrap(), Ingest::Rejected(_)));
        assert_eq!(c.audit_log().len(), 1);
        assert!(c.latest(GroupAddress::from_raw(0x0901)).is_none());
        // forged source equal to the sensor passes the allowlist
        assert!(matches!(c.ingest(&write_from(sensor, 23.0), 3.0).unwrap(), Ingest::Accepted { .. }));
    }

    #[test]
    fn ingest_errors_and_ignores() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        let src = IndividualAddress::from_raw(0x110A);
        let short = Telegram::group_write(src, GroupAddress::from_raw(0x0901), GroupData::Short(1));
        assert!(matches!(c.ingest(&short, 0.0), Err(BusError::UndecodablePayload(_))));
        let other = Telegram::group_write(src, GroupAddress::from_raw(0x0902), GroupData::Short(1));
        assert_eq!(c.ingest(&other, 0.0).unwrap(), Ingest::Ignored);
        let read = Telegram::group_read(src, GroupAddress::from_raw(0x0901));
        assert_eq!(c.ingest(&read, 0.0).unwrap(), Ingest::Ignored);
    }

    fn with_hop(hop: u8) -> Telegram {
        let mut t = write_from(IndividualAddress::from_raw(0x110A), 21.0);
        t.hop_count = hop;
        t
    }

    #[test]
    fn coupler_hop_rules() {
        assert_eq!(coupler_forward(&with_hop(6)).unwrap().hop_count, 5);
        assert_eq!(coupler_forward(&with_hop(7)).unwrap(), with_hop(7));
        assert_eq!(coupler_forward(&with_hop(1)).unwrap().hop_count, 0);
        assert!(coupler_forward(&with_hop(0)).is_none());
    }

    struct Inject(Vec<Telegram>);

    impl Device for Inject {
        fn start(&mut self, ctx: &mut Context<'_>) {
            for t in &self.0 {
                ctx.send(SegmentId(0), t).unwrap();
            }
        }

        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    #[test]
    fn coupler_device_forwards_and_counts_drops() {
        let mut sim = Simulation::default();
        sim.add_segment(SegmentId(0)).unwrap();
        sim.add_segment(SegmentId(1)).unwrap();
        let coupler = sim.attach_device(&[SegmentId(0), SegmentId(1)], Box::new(LineCoupler::new())).unwrap();
        let far = sim.attach_device(&[SegmentId(1)], Box::new(Tap::default())).unwrap();
        sim.attach_device(&[SegmentId(0)], Box::new(Inject(vec![with_hop(6), with_hop(0), with_hop(7)]))).unwrap();
        sim.run_until(1.0);
        let hops: Vec<u8> =
            sim.device::<Tap>(far).unwrap().records().iter().map(|r| r.telegram().unwrap().hop_count).collect();
        assert_eq!(hops, [5, 7]);
        let c = sim.device::<LineCoupler>(coupler).unwrap();
        assert_eq!((c.forwarded(), c.dropped()), (2, 1));
    }

    #[test]
    fn trace_interpolation() {
        let s = TemperatureSource::Trace(vec![(0.0, 20.0), (10.0, 30.0)]);
        assert_eq!(s.value_at(-1.0), 20.0);
        assert_eq!(s.value_at(5.0), 25.0);
        assert_eq!(s.value_at(11.0), 30.0);
        let cell = Arc::new(SharedTemperature::new(19.0));
        let shared = TemperatureSource::Shared(cell.clone());
        cell.set(24.5);
        assert_eq!(shared.value_at(0.0), 24.5);
    }
}
