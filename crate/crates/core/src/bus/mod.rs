//! Deterministic discrete-event simulation of TP1 line segments.
//!
//! Every frame placed on a segment is delivered to every other device
//! attached to that segment at the same instant. Events are ordered by
//! `(time, sequence number)`, so runs with equal configuration and seeds are
//! identical.

pub(crate) mod capture;
pub(crate) mod devices;

pub use capture::{CaptureError, CaptureRecord, CaptureSeries, Origin};
pub use devices::{
    coupler_forward, AuditEvent, BackgroundConfig, BackgroundTraffic, Controller, ControllerConfig, Ingest,
    LineCoupler, Reading, SensorConfig, SharedTemperature, Tap, TemperatureSensor, TemperatureSource,
};

use std::any::Any;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use thiserror::Error;

use crate::codec::{CodecError, Telegram};

/// Default transmission latency of one frame.
pub const DEFAULT_FRAME_LATENCY: f64 = 0.020;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct SegmentId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceId(usize);

#[derive(Debug, Error, PartialEq)]
pub enum BusError {
    #[error("unknown segment {0:?}")]
    UnknownSegment(SegmentId),
    #[error("segment {0:?} already exists")]
    DuplicateSegment(SegmentId),
    #[error("device {0:?} is not attached to segment {1:?}")]
    NotAttached(DeviceId, SegmentId),
    #[error("undecodable payload: {0}")]
    UndecodablePayload(String),
    #[error("invalid device configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Behaviour plugged into a segment.
pub trait Device: Any + Send {
    /// Called once when the device is attached.
    fn start(&mut self, _ctx: &mut Context<'_>) {}

    fn on_timer(&mut self, _ctx: &mut Context<'_>, _token: u64) {}

    /// A frame another device placed on one of this device's segments.
    fn on_frame(&mut self, _ctx: &mut Context<'_>, _frame: &Frame<'_>) {}

    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub segment: SegmentId,
    pub time: f64,
    pub raw: &'a [u8],
    pub sender: DeviceId,
}

#[derive(Debug)]
enum Payload {
    Timer { device: DeviceId, token: u64 },
    Deliver { segment: SegmentId, sender: DeviceId, raw: Arc<[u8]> },
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, payload: Payload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, payload });
    }
}

/// Handle a device uses to act on the simulation.
pub struct Context<'a> {
    now: f64,
    me: DeviceId,
    ports: &'a [SegmentId],
    frame_latency: f64,
    queue: &'a mut EventQueue,
    accept_timers: bool,
}

impl Context<'_> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn me(&self) -> DeviceId {
        self.me
    }

    pub fn ports(&self) -> &[SegmentId] {
        self.ports
    }

    pub fn frame_latency(&self) -> f64 {
        self.frame_latency
    }

    /// Originates a telegram; it appears on the segment one frame latency later.
    pub fn send(&mut self, segment: SegmentId, telegram: &Telegram) -> Result<(), BusError> {
        let raw = telegram.encode()?;
        self.transmit_raw(segment, raw, self.frame_latency)
    }

    /// Places raw octets on a segment after `delay` seconds, without the
    /// originating frame latency (cut-through forwarding).
    pub fn transmit_raw(&mut self, segment: SegmentId, raw: Vec<u8>, delay: f64) -> Result<(), BusError> {
        if !self.ports.contains(&segment) {
            return Err(BusError::NotAttached(self.me, segment));
        }
        self.queue.push(self.now + delay.max(0.0), Payload::Deliver { segment, sender: self.me, raw: raw.into() });
        Ok(())
    }

    /// Schedules `on_timer(token)` at absolute time `at` (not earlier than now).
    pub fn set_timer(&mut self, at: f64, token: u64) {
        if self.accept_timers {
            self.queue.push(at.max(self.now), Payload::Timer { device: self.me, token });
        }
    }
}

struct Slot {
    device: Box<dyn Device>,
    ports: Vec<SegmentId>,
}

struct Segment {
    id: SegmentId,
    attached: Vec<DeviceId>,
    delivered: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub now: f64,
    pub events_processed: u64,
    /// Frames placed on each segment so far.
    pub delivered: Vec<(SegmentId, u64)>,
}

pub struct Simulation {
    now: f64,
    frame_latency: f64,
    queue: EventQueue,
    slots: Vec<Slot>,
    segments: Vec<Segment>,
    events_processed: u64,
    halted: bool,
}

impl Default for Simulation {
    fn default() -> Self {
        Self::new(DEFAULT_FRAME_LATENCY)
    }
}

impl Simulation {
    pub fn new(frame_latency: f64) -> Self {
        Self {
            now: 0.0,
            frame_latency,
            queue: EventQueue::default(),
            slots: Vec::new(),
            segments: Vec::new(),
            events_processed: 0,
            halted: false,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn add_segment(&mut self, id: SegmentId) -> Result<(), BusError> {
        if self.segments.iter().any(|s| s.id == id) {
            return Err(BusError::DuplicateSegment(id));
        }
        self.segments.push(Segment { id, attached: Vec::new(), delivered: 0 });
        Ok(())
    }

    fn segment_mut(&mut self, id: SegmentId) -> Result<&mut Segment, BusError> {
        self.segments.iter_mut().find(|s| s.id == id).ok_or(BusError::UnknownSegment(id))
    }

    /// Attaches a device to one or more segments and starts it. The device
    /// observes every frame placed on those segments from now on.
    pub fn attach_device(&mut self, segments: &[SegmentId], device: Box<dyn Device>) -> Result<DeviceId, BusError> {
        if segments.is_empty() {
            return Err(BusError::InvalidConfig("device needs at least one segment".into()));
        }
        for &seg in segments {
            self.segment_mut(seg)?;
        }
        let id = DeviceId(self.slots.len());
        for &seg in segments {
            self.segment_mut(seg)?.attached.push(id);
        }
        self.slots.push(Slot { device, ports: segments.to_vec() });
        let slot = &mut self.slots[id.0];
        let mut ctx = Context {
            now: self.now,
            me: id,
            ports: &slot.ports,
            frame_latency: self.frame_latency,
            queue: &mut self.queue,
            accept_timers: !self.halted,
        };
        slot.device.start(&mut ctx);
        Ok(id)
    }

    pub fn device<T: Device>(&self, id: DeviceId) -> Option<&T> {
        self.slots.get(id.0).and_then(|s| s.device.as_any().downcast_ref::<T>())
    }

    /// Processes every event with time `<= t_end`.
    pub fn run_until(&mut self, t_end: f64) -> SimStats {
        while self.queue.heap.peek().is_some_and(|e| e.time <= t_end) {
            let event = self.queue.heap.pop().expect("peeked");
            self.dispatch(event);
        }
        if t_end > self.now {
            self.now = t_end;
        }
        self.stats()
    }

    /// Drops pending timers and drains in-flight frames, so relayed frames
    /// still on their way are counted. Timers are not accepted afterwards.
    pub fn quiesce(&mut self) -> SimStats {
        self.halted = true;
        while let Some(event) = self.queue.heap.pop() {
            if matches!(event.payload, Payload::Timer { .. }) {
                continue;
            }
            self.dispatch(event);
        }
        self.stats()
    }

    pub fn stats(&self) -> SimStats {
        SimStats {
            now: self.now,
            events_processed: self.events_processed,
            delivered: self.segments.iter().map(|s| (s.id, s.delivered)).collect(),
        }
    }

    fn dispatch(&mut self, event: Event) {
        self.now = self.now.max(event.time);
        self.events_processed += 1;
        let accept_timers = !self.halted;
        match event.payload {
            Payload::Timer { device, token } => {
                let slot = &mut self.slots[device.0];
                let mut ctx = Context {
                    now: event.time,
                    me: device,
                    ports: &slot.ports,
                    frame_latency: self.frame_latency,
                    queue: &mut self.queue,
                    accept_timers,
                };
                slot.device.on_timer(&mut ctx, token);
            }
            Payload::Deliver { segment, sender, raw } => {
                let Some(seg) = self.segments.iter_mut().find(|s| s.id == segment) else {
                    return;
                };
                seg.delivered += 1;
                let attached = seg.attached.clone();
                let frame = Frame { segment, time: event.time, raw: &raw, sender };
                for id in attached {
                    if id == sender {
                        continue;
                    }
                    let slot = &mut self.slots[id.0];
                    let mut ctx = Context {
                        now: event.time,
                        me: id,
                        ports: &slot.ports,
                        frame_latency: self.frame_latency,
                        queue: &mut self.queue,
                        accept_timers,
                    };
                    slot.device.on_frame(&mut ctx, &frame);
                }
            }
        }
    }
}
