//! Lumped single-zone HVAC model. Total power is the sum of fan, chilled
//! water pump and chiller power; the controller only sees the reported room
//! temperature, so falsified readings change both comfort and energy use.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::FalsifyKind;

#[derive(Debug, Error)]
pub enum HvacError {
    #[error("non-finite state at t = {time}s: {what}")]
    NonFiniteState { time: f64, what: &'static str },
    #[error("invalid hvac parameters: {0}")]
    InvalidParams(String),
    #[error("invalid weather trace: {0}")]
    InvalidWeather(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// `c0 + c1·d + c2·d²` with `d = max(0, x − reference)`; nonnegative
/// coefficients make it nonnegative and nondecreasing in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneMap {
    pub reference: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl MonotoneMap {
    pub fn eval(&self, x: f64) -> f64 {
        let d = (x - self.reference).max(0.0);
        self.c0 + d * (self.c1 + d * self.c2)
    }

    fn validate(&self, name: &str) -> Result<(), HvacError> {
        let ok = [self.reference, self.c0, self.c1, self.c2].iter().all(|v| v.is_finite())
            && self.c0 >= 0.0
            && self.c1 >= 0.0
            && self.c2 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(HvacError::InvalidParams(format!("{name} map needs finite, nonnegative coefficients")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HvacParams {
    pub room_setpoint: f64,
    pub supply_air_setpoint: f64,
    pub supply_water_setpoint: f64,
    pub damper_fraction: f64,
    /// J/°C
    pub thermal_capacitance: f64,
    /// W/°C
    pub envelope_conductance: f64,
    /// °C of supply-air reset per °C of room error.
    pub k_sa: f64,
    pub m0: f64,
    /// kg/s of chilled water per °C of supply-air reset.
    pub k_m: f64,
    /// Heat removed per kg of chilled water (J/kg), i.e. c_p·ΔT across the coil.
    pub cooling_per_flow: f64,
    pub fan: MonotoneMap,
    pub pump: MonotoneMap,
    pub chiller: MonotoneMap,
    /// s
    pub step: f64,
}

impl Default for HvacParams {
    fn default() -> Self {
        Self {
            room_setpoint: 22.0,
            supply_air_setpoint: 14.0,
            supply_water_setpoint: 6.0,
            damper_fraction: 0.3,
            thermal_capacitance: 3.0e8,
            envelope_conductance: 1500.0,
            k_sa: 5.0,
            m0: 0.0,
            k_m: 30.0,
            cooling_per_flow: 4186.0 * 5.0,
            fan: MonotoneMap { reference: 22.0, c0: 20_000.0, c1: 40_000.0, c2: 10_000.0 },
            pump: MonotoneMap { reference: 14.0, c0: 5_000.0, c1: 2_000.0, c2: 200.0 },
            chiller: MonotoneMap { reference: 0.0, c0: 10_000.0, c1: 5_200.0, c2: 5.0 },
            step: 60.0,
        }
    }
}

impl HvacParams {
    pub fn validate(&self) -> Result<(), HvacError> {
        let bad = |m: &str| Err(HvacError::InvalidParams(m.into()));
        if !(self.thermal_capacitance > 0.0) {
            return bad("thermal capacitance must be > 0");
        }
        if !(self.envelope_conductance >= 0.0) {
            return bad("envelope conductance must be >= 0");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be > 0");
        }
        if !(0.0..=1.0).contains(&self.damper_fraction) {
            return bad("damper fraction must be in [0, 1]");
        }
        if !(self.k_sa >= 0.0 && self.k_m >= 0.0 && self.m0 >= 0.0 && self.cooling_per_flow >= 0.0) {
            return bad("control gains, m0 and cooling_per_flow must be >= 0");
        }
        for v in [self.room_setpoint, self.supply_air_setpoint, self.supply_water_setpoint] {
            if !v.is_finite() {
                return bad("setpoints must be finite");
            }
        }
        self.fan.validate("fan")?;
        self.pump.validate("pump")?;
        self.chiller.validate("chiller")
    }

    /// Forward Euler is monotone (no overshoot) when this is <= 1.
    pub fn euler_stiffness(&self) -> f64 {
        let g = self.k_sa * self.k_m * self.cooling_per_flow;
        self.step * (self.envelope_conductance + g) / self.thermal_capacitance
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentEnergy {
    pub fan: f64,
    pub pump: f64,
    pub chiller: f64,
    pub total: f64,
}

impl ComponentEnergy {
    fn minus(self, o: Self) -> Self {
        Self { fan: self.fan - o.fan, pump: self.pump - o.pump, chiller: self.chiller - o.chiller, total: self.total - o.total }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvacState {
    pub time: f64,
    pub t_room: f64,
    pub t_room_reported: f64,
    pub t_supply_air: f64,
    pub m_chw: f64,
    pub p_fan: f64,
    pub p_pump: f64,
    pub p_chiller: f64,
    pub p_total: f64,
    /// kWh
    pub energy: ComponentEnergy,
}

impl HvacState {
    pub fn initial(time: f64, t_room: f64, params: &HvacParams) -> Self {
        Self {
            time,
            t_room,
            t_room_reported: t_room,
            t_supply_air: params.supply_air_setpoint,
            m_chw: params.m0,
            p_fan: 0.0,
            p_pump: 0.0,
            p_chiller: 0.0,
            p_total: 0.0,
            energy: ComponentEnergy::default(),
        }
    }
}

const J_PER_KWH: f64 = 3.6e6;

/// Advances one step: control from `reported`, power for this step, then
/// the room temperature integrated over the step.
pub fn hvac_step(state: &HvacState, params: &HvacParams, ambient: f64, reported: f64) -> Result<HvacState, HvacError> {
    let time = state.time;
    if !ambient.is_finite() {
        return Err(HvacError::NonFiniteState { time, what: "ambient temperature" });
    }
    if !reported.is_finite() {
        return Err(HvacError::NonFiniteState { time, what: "reported temperature" });
    }
    let e = (reported - params.room_setpoint).max(0.0);
    let t_sa = params.supply_air_setpoint + params.k_sa * e;
    let m_chw = params.m0 + params.k_m * (t_sa - params.supply_air_setpoint).max(0.0);
    let p_fan = params.fan.eval(reported);
    let p_pump = params.pump.eval(t_sa);
    let p_chiller = params.chiller.eval(m_chw);
    let p_total = p_fan + p_pump + p_chiller;
    let q_cool = params.cooling_per_flow * m_chw;
    let dt = params.step;
    let t_room = state.t_room + dt * (params.envelope_conductance * (ambient - state.t_room) - q_cool) / params.thermal_capacitance;
    let k = dt / J_PER_KWH;
    let energy = ComponentEnergy {
        fan: state.energy.fan + p_fan * k,
        pump: state.energy.pump + p_pump * k,
        chiller: state.energy.chiller + p_chiller * k,
        total: state.energy.total + p_total * k,
    };
    let next = HvacState {
        time: time + dt,
        t_room,
        t_room_reported: reported,
        t_supply_air: t_sa,
        m_chw,
        p_fan,
        p_pump,
        p_chiller,
        p_total,
        energy,
    };
    for (v, what) in [(next.t_room, "room temperature"), (next.p_total, "total power"), (next.energy.total, "energy")] {
        if !v.is_finite() {
            return Err(HvacError::NonFiniteState { time, what });
        }
    }
    Ok(next)
}

/// Ambient temperature samples `(seconds since midnight, °C)`, linearly
/// interpolated and held constant outside the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct WeatherTrace {
    samples: Vec<(f64, f64)>,
}

impl WeatherTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, HvacError> {
        if samples.is_empty() {
            return Err(HvacError::InvalidWeather("no samples".into()));
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(HvacError::InvalidWeather("non-finite sample".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(HvacError::InvalidWeather("times must be strictly increasing".into()));
        }
        Ok(Self { samples })
    }

    pub fn constant(celsius: f64) -> Self {
        Self { samples: vec![(0.0, celsius)] }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn ambient_at(&self, t: f64) -> f64 {
        crate::bus::devices::interpolate(&self.samples, t)
    }
}

impl Default for WeatherTrace {
    /// A warm day: 24 °C at 07:00 peaking at 29 °C mid-afternoon.
    fn default() -> Self {
        let h = 3600.0;
        Self {
            samples: vec![
                (0.0, 22.0),
                (7.0 * h, 24.0),
                (10.0 * h, 26.5),
                (14.0 * h, 29.0),
                (17.0 * h, 28.0),
                (19.0 * h, 26.0),
                (24.0 * h, 22.5),
            ],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for WeatherTrace {
    type Error = HvacError;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<WeatherTrace> for Vec<(f64, f64)> {
    fn from(w: WeatherTrace) -> Self {
        w.samples
    }
}

/// Runs `duration_h` hours from `start` (seconds since midnight) with the
/// controller seeing `reported(T_r)`, returning one state per step.
pub fn simulate<F>(params: &HvacParams, weather: &WeatherTrace, t_room0: f64, start: f64, duration_h: f64, mut reported: F) -> Result<Vec<HvacState>, HvacError>
where
    F: FnMut(f64) -> f64,
{
    params.validate()?;
    if !(duration_h > 0.0) {
        return Err(HvacError::InvalidParams("duration must be > 0".into()));
    }
    let steps = (duration_h * 3600.0 / params.step).round() as usize;
    let mut state = HvacState::initial(start, t_room0, params);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        state = hvac_step(&state, params, weather.ambient_at(state.time), reported(state.t_room))?;
        out.push(state);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactSetup {
    /// Seconds since midnight.
    pub start: f64,
    pub duration_h: f64,
    pub initial_room_temperature: f64,
}

impl Default for ImpactSetup {
    fn default() -> Self {
        Self { start: 7.0 * 3600.0, duration_h: 12.0, initial_room_temperature: 21.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub baseline: Vec<HvacState>,
    pub attacked: Vec<HvacState>,
    pub summary: EnergySummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub baseline_kwh: f64,
    pub attacked_kwh: f64,
    pub additional_kwh: ComponentEnergy,
}

fn final_energy(run: &[HvacState]) -> ComponentEnergy {
    run.last().map_or_else(ComponentEnergy::default, |s| s.energy)
}

/// Paired baseline and attacked runs with identical weather and start.
pub fn run_attack_impact(params: &HvacParams, weather: &WeatherTrace, falsifier: FalsifyKind, setup: &ImpactSetup) -> Result<EnergyReport, HvacError> {
    let run = |f: FalsifyKind| simulate(params, weather, setup.initial_room_temperature, setup.start, setup.duration_h, |t| f.apply_value(t));
    let baseline = run(FalsifyKind::Passthrough)?;
    let attacked = run(falsifier)?;
    let b = final_energy(&baseline);
    let a = final_energy(&attacked);
    let summary = EnergySummary { baseline_kwh: b.total, attacked_kwh: a.total, additional_kwh: a.minus(b) };
    Ok(EnergyReport { baseline, attacked, summary })
}

pub fn write_trajectory_csv<W: Write>(run: &[HvacState], w: W) -> Result<(), HvacError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time_s", "T_r", "T_r_reported", "P_fan_W", "P_pump_W", "P_chiller_W", "P_total_W", "E_total_kWh"])?;
    for s in run {
        out.write_record(
            [s.time, s.t_room, s.t_room_reported, s.p_fan, s.p_pump, s.p_chiller, s.p_total, s.energy.total].map(|v| v.to_string()),
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attack(f: FalsifyKind) -> EnergySummary {
        run_attack_impact(&HvacParams::default(), &WeatherTrace::default(), f, &ImpactSetup::default()).unwrap().summary
    }

    fn all_positive(e: ComponentEnergy) -> bool {
        e.fan > 0.0 && e.pump > 0.0 && e.chiller > 0.0 && e.total > 0.0
    }

    #[test]
    fn equilibrium_sits_at_idle_floor() {
        let p = HvacParams::default();
        let s0 = HvacState::initial(0.0, 22.0, &p);
        let s1 = hvac_step(&s0, &p, 22.0, 22.0).unwrap();
        assert_eq!(s1.t_room, 22.0);
        assert_eq!(s1.p_total, p.fan.c0 + p.pump.c0 + p.chiller.c0);
        assert_eq!(s1.m_chw, 0.0);
    }

    #[test]
    fn higher_reading_costs_more_power() {
        let p = HvacParams::default();
        let s0 = HvacState::initial(0.0, 22.5, &p);
        let a = hvac_step(&s0, &p, 27.0, 22.5).unwrap();
        let b = hvac_step(&s0, &p, 27.0, 23.5).unwrap();
        assert!(b.p_total > a.p_total);
        assert!(b.p_fan > a.p_fan && b.p_pump > a.p_pump && b.p_chiller > a.p_chiller);
    }

    #[test]
    fn power_is_component_sum_and_energy_accumulates() {
        let p = HvacParams::default();
        let r = run_attack_impact(&p, &WeatherTrace::default(), FalsifyKind::BiasAdd(1.0), &ImpactSetup::default()).unwrap();
        let mut sum = 0.0;
        for s in &r.attacked {
            assert_eq!(s.p_total, s.p_fan + s.p_pump + s.p_chiller);
            sum += s.p_total * p.step / J_PER_KWH;
        }
        let e = r.attacked.last().unwrap().energy.total;
        assert!(((e - sum) / sum).abs() < 1e-9);
        assert!(r.attacked.windows(2).all(|w| w[1].energy.total >= w[0].energy.total));
        assert_eq!(r.attacked.len(), 720);
    }

    #[test]
    fn passthrough_is_neutral() {
        assert_eq!(attack(FalsifyKind::Passthrough).additional_kwh, ComponentEnergy::default());
    }

    #[test]
    fn both_attacks_cost_energy() {
        assert!(all_positive(attack(FalsifyKind::BiasAdd(1.0)).additional_kwh));
        assert!(all_positive(attack(FalsifyKind::Override(22.005)).additional_kwh));
    }

    #[test]
    fn bias_sweep_is_monotone() {
        let extra: Vec<f64> = [0.0, 0.5, 1.0, 2.0].iter().map(|&b| attack(FalsifyKind::BiasAdd(b)).additional_kwh.total).collect();
        assert_eq!(extra[0], 0.0);
        assert!(extra.windows(2).all(|w| w[1] >= w[0]), "{extra:?}");
    }

    #[test]
    fn defaults_are_plausible_and_stable() {
        let p = HvacParams::default();
        assert!(p.euler_stiffness() <= 1.0);
        let s = attack(FalsifyKind::Passthrough);
        assert!((100.0..10_000.0).contains(&s.baseline_kwh), "{}", s.baseline_kwh);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = HvacParams { thermal_capacitance: 0.0, ..HvacParams::default() };
        assert!(p.validate().is_err());
        let s0 = HvacState::initial(0.0, 22.0, &HvacParams::default());
        assert!(matches!(hvac_step(&s0, &HvacParams::default(), f64::NAN, 22.0), Err(HvacError::NonFiniteState { .. })));
        assert!(WeatherTrace::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(serde_json::from_str::<WeatherTrace>("[[1,2],[0,3]]").is_err());
        let huge = HvacParams { thermal_capacitance: 1e-300, ..HvacParams::default() };
        let s0 = HvacState::initial(0.0, 30.0, &huge);
        let mut s = s0;
        let err = (0..2000).find_map(|_| match hvac_step(&s, &huge, 30.0, s.t_room) {
            Ok(n) => {
                s = n;
                None
            }
            Err(e) => Some(e),
        });
        assert!(matches!(err, Some(HvacError::NonFiniteState { .. })));
    }

    #[test]
    fn weather_interpolates() {
        let w = WeatherTrace::new(vec![(0.0, 20.0), (10.0, 30.0)]).unwrap();
        assert_eq!(w.ambient_at(5.0), 25.0);
        assert_eq!(w.ambient_at(-1.0), 20.0);
        assert_eq!(w.ambient_at(99.0), 30.0);
    }

    #[test]
    fn trajectory_csv_header() {
        let r = run_attack_impact(&HvacParams::default(), &WeatherTrace::constant(25.0), FalsifyKind::Passthrough, &ImpactSetup { duration_h: 0.05, ..ImpactSetup::default() }).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&r.baseline, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,T_r,T_r_reported,P_fan_W,P_pump_W,P_chiller_W,P_total_W,E_total_kWh\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
