//! Ready-made bus topologies: the no-attack line, the stealth relay pair
//! that splits sensor and controller onto two segments, and the noisy
//! single-relay variant on one shared segment.

use thiserror::Error;

use crate::attack::{AttackError, DelayModel, Falsifier, FalsifyKind, RelayPair, RelayStats, SingleDeviceRelay};
use crate::bus::{
    BackgroundConfig, BackgroundTraffic, BusError, CaptureSeries, Controller, ControllerConfig, DeviceId, Origin, SegmentId,
    SensorConfig, SimStats, Simulation, Tap, TemperatureSensor,
};
use crate::codec::{Destination, GroupAddress, IndividualAddress, Lsdu};

pub const CONTROLLER_SEGMENT: SegmentId = SegmentId(0);
pub const SENSOR_SEGMENT: SegmentId = SegmentId(1);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("duration must be a positive number of seconds")]
    InvalidDuration,
}

#[derive(Debug, Clone)]
pub struct BusScenario {
    pub duration: f64,
    pub frame_latency: f64,
    pub sensor: SensorConfig,
    pub controller: ControllerConfig,
    /// Other traffic on the controller's segment.
    pub background: Option<BackgroundConfig>,
}

impl Default for BusScenario {
    fn default() -> Self {
        Self {
            duration: 86_400.0,
            frame_latency: crate::bus::DEFAULT_FRAME_LATENCY,
            sensor: SensorConfig::default(),
            controller: ControllerConfig::default(),
            background: Some(BackgroundConfig::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    /// What a tap next to the controller records; the detector's input.
    pub controller_capture: CaptureSeries,
    /// Present when the sensor sits on its own segment.
    pub sensor_capture: Option<CaptureSeries>,
    pub sensor_writes: u64,
    pub sensor_responses: u64,
    pub controller_accepted: u64,
    pub relay: Option<RelayStats>,
    pub injected: Option<u64>,
    pub stats: SimStats,
}

impl BusScenario {
    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ScenarioError::InvalidDuration);
        }
        self.sensor.validate()?;
        Ok(())
    }

    pub fn victim(&self, kind: FalsifyKind) -> Falsifier {
        Falsifier { kind, victim_source: self.sensor.address, victim_group: self.sensor.group }
    }

    /// Sensor, controller, background traffic and a tap on one segment.
    pub fn run_baseline(&self) -> Result<ScenarioOutcome, ScenarioError> {
        self.run(Topology::Shared)
    }

    /// Sensor on its own segment, bridged to the controller's by the relay
    /// pair.
    pub fn run_stealth(&self, delay: DelayModel, kind: FalsifyKind) -> Result<ScenarioOutcome, ScenarioError> {
        self.run(Topology::Stealth(delay, kind))
    }

    /// One relay on the shared segment, injecting a falsified copy of every
    /// victim telegram.
    pub fn run_single_device(&self, delay: DelayModel, kind: FalsifyKind) -> Result<ScenarioOutcome, ScenarioError> {
        self.run(Topology::Single(delay, kind))
    }

    fn run(&self, topology: Topology) -> Result<ScenarioOutcome, ScenarioError> {
        self.validate()?;
        let mut sim = Simulation::new(self.frame_latency);
        sim.add_segment(CONTROLLER_SEGMENT)?;
        let sensor_seg = match topology {
            Topology::Stealth(..) => {
                sim.add_segment(SENSOR_SEGMENT)?;
                SENSOR_SEGMENT
            }
            _ => CONTROLLER_SEGMENT,
        };
        // taps first, so they see frames from the very beginning
        let controller_tap = sim.attach_device(&[CONTROLLER_SEGMENT], Box::new(Tap::default()))?;
        let sensor_tap = match topology {
            Topology::Stealth(..) => Some(sim.attach_device(&[SENSOR_SEGMENT], Box::new(Tap::default()))?),
            _ => None,
        };
        let mut relay_id = None;
        match topology {
            Topology::Shared => {}
            Topology::Stealth(delay, kind) => {
                let pair = RelayPair::new(SENSOR_SEGMENT, CONTROLLER_SEGMENT, delay, self.victim(kind))?;
                relay_id = Some(sim.attach_device(&[SENSOR_SEGMENT, CONTROLLER_SEGMENT], Box::new(pair))?);
            }
            Topology::Single(delay, kind) => {
                let relay = SingleDeviceRelay::new(delay, self.victim(kind))?;
                relay_id = Some(sim.attach_device(&[CONTROLLER_SEGMENT], Box::new(relay))?);
            }
        }
        let controller = sim.attach_device(&[CONTROLLER_SEGMENT], Box::new(Controller::new(self.controller.clone())?))?;
        let sensor = sim.attach_device(&[sensor_seg], Box::new(TemperatureSensor::new(self.sensor.clone())?))?;
        if let Some(bg) = &self.background {
            sim.attach_device(&[CONTROLLER_SEGMENT], Box::new(BackgroundTraffic::new(bg.clone())?))?;
        }
        sim.run_until(self.duration);
        let stats = sim.quiesce();

        let origin = match topology {
            Topology::Shared => Origin::NoAttack,
            _ => Origin::Attack,
        };
        let capture = |id: DeviceId| sim.device::<Tap>(id).expect("tap").series(origin).with_end(self.duration);
        let s = sim.device::<TemperatureSensor>(sensor).expect("sensor");
        Ok(ScenarioOutcome {
            controller_capture: capture(controller_tap),
            sensor_capture: sensor_tap.map(capture),
            sensor_writes: s.writes(),
            sensor_responses: s.responses(),
            controller_accepted: sim.device::<Controller>(controller).expect("controller").accepted(),
            relay: match topology {
                Topology::Stealth(..) => relay_id.and_then(|id| sim.device::<RelayPair>(id)).map(RelayPair::stats),
                _ => None,
            },
            injected: match topology {
                Topology::Single(..) => relay_id.and_then(|id| sim.device::<SingleDeviceRelay>(id)).map(SingleDeviceRelay::injected),
                _ => None,
            },
            stats,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Topology {
    Shared,
    Stealth(DelayModel, FalsifyKind),
    Single(DelayModel, FalsifyKind),
}

/// GroupWrite and GroupResponse telegrams from `source` to `group`.
pub fn count_temperature_telegrams(capture: &CaptureSeries, source: IndividualAddress, group: GroupAddress) -> usize {
    capture
        .records
        .iter()
        .filter_map(|r| r.telegram().ok())
        .filter(|t| {
            t.source == source
                && t.destination == Destination::Group(group)
                && matches!(t.lsdu, Lsdu::GroupWrite(_) | Lsdu::GroupResponse(_))
        })
        .count()
}
