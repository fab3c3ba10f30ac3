//! End-to-end experiment pipelines behind the command-line tool. Every stage
//! reads and writes plain files under the output directory, so stages can
//! be rerun on their own and agree with a full `suite` run.

mod config;

pub use config::{
    derive_seed, BackgroundSection, ReferenceSource, BusSection, ControllerSection, DetectorSection, ExperimentConfig, HvacSection, SensorSection,
};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{DelayModel, FalsifyKind};
use crate::bus::{CaptureError, CaptureSeries, Origin, SegmentId};
use crate::detector::{
    self, evaluate, featurize, read_features_csv, train, Algorithm, Dataset, DetectorError, FeatureKind, ModelFile, Reference, Verdict,
    MODEL_FILE_VERSION,
};
use crate::hvac::{self, ComponentEnergy, EnergySummary, HvacError};
use crate::scenario::{count_temperature_telegrams, ScenarioError, ScenarioOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Capture { path: PathBuf, source: CaptureError },
    #[error("{context}: {source}")]
    Detector { context: String, source: DetectorError },
    #[error("hvac {scenario}: {source}")]
    Hvac { scenario: String, source: HvacError },
    #[error("simulation {run}: {source}")]
    Scenario { run: String, source: ScenarioError },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn det_err(context: impl Into<String>) -> impl FnOnce(DetectorError) -> ExperimentError {
    let context = context.into();
    move |source| ExperimentError::Detector { context, source }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| ExperimentError::Parse { path: path.to_path_buf(), msg: e.to_string() })
}

pub fn read_capture(path: &Path, origin: Origin) -> Result<CaptureSeries, ExperimentError> {
    let f = File::open(path).map_err(io_err(path))?;
    CaptureSeries::read_jsonl(BufReader::new(f), origin).map_err(|source| ExperimentError::Capture { path: path.to_path_buf(), source })
}

pub fn write_capture(path: &Path, capture: &CaptureSeries) -> Result<(), ExperimentError> {
    let mut w = create(path)?;
    capture.write_jsonl(&mut w).map_err(|source| ExperimentError::Capture { path: path.to_path_buf(), source })?;
    w.flush().map_err(io_err(path))
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn capture(&self, name: &str) -> PathBuf {
        self.root.join("captures").join(format!("{name}.jsonl"))
    }

    pub fn simulate_summary(&self) -> PathBuf {
        self.root.join("captures").join("summary.json")
    }

    pub fn hvac(&self, file: &str) -> PathBuf {
        self.root.join("hvac").join(file)
    }

    pub fn reference(&self, exp: &str, window_min: u32) -> PathBuf {
        self.root.join("features").join(exp).join(format!("reference_{window_min}min.json"))
    }

    pub fn features(&self, exp: &str, kind: FeatureKind, window_min: u32) -> PathBuf {
        self.root.join("features").join(exp).join(format!("{}_{window_min}min.csv", kind.name()))
    }

    pub fn model(&self, exp: &str, alg: Algorithm, kind: FeatureKind, window_min: u32) -> PathBuf {
        self.root.join("models").join(exp).join(format!("{}_{}_{window_min}min.json", alg.name(), kind.name()))
    }

    pub fn detection_rates(&self) -> PathBuf {
        self.root.join("results").join("detection_rates.csv")
    }

    pub fn report(&self, file: &str) -> PathBuf {
        self.root.join("report").join(file)
    }
}

/// The detection experiments: attack capture vs baseline capture.
pub fn experiments(cfg: &ExperimentConfig) -> Vec<(&'static str, &'static str)> {
    let mut v = vec![("default", "attack")];
    if cfg.detector.null_experiment {
        v.push(("null", "null_attack"));
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub file: String,
    pub segment: u8,
    pub telegrams: usize,
    pub temperature_telegrams: usize,
    pub sensor_writes: u64,
    pub sensor_responses: u64,
    pub controller_accepted: u64,
    pub relay_forwarded: Option<u64>,
    pub relay_modified: Option<u64>,
    pub relay_dropped: Option<u64>,
    pub injected: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub duration_s: f64,
    pub runs: Vec<RunSummary>,
}

impl SimulateSummary {
    pub fn run(&self, name: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.name == name)
    }
}

/// Generates the baseline, stealth attack, single-relay and (optionally)
/// zero-delay null captures.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary, ExperimentError> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let kind = cfg.attack.falsifier.to_kind().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let delay = cfg.attack.delay.to_model(cfg.derive_seed("attack.delay")).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let single_delay = DelayModel { seed: cfg.derive_seed("single.delay"), ..delay };

    let scen_err = |run: &str| {
        let run = run.to_string();
        move |source| ExperimentError::Scenario { run, source }
    };
    let mut runs = Vec::new();
    let mut record = |name: &str, out: &ScenarioOutcome, capture: &CaptureSeries, segment: SegmentId, cfg_run: &str| -> Result<(), ExperimentError> {
        let path = layout.capture(name);
        write_capture(&path, capture)?;
        let scen = cfg.bus_scenario(cfg_run);
        runs.push(RunSummary {
            name: name.into(),
            file: format!("{name}.jsonl"),
            segment: segment.0,
            telegrams: capture.len(),
            temperature_telegrams: count_temperature_telegrams(capture, scen.sensor.address, scen.sensor.group),
            sensor_writes: out.sensor_writes,
            sensor_responses: out.sensor_responses,
            controller_accepted: out.controller_accepted,
            relay_forwarded: out.relay.map(|r| r.forwarded),
            relay_modified: out.relay.map(|r| r.modified),
            relay_dropped: out.relay.map(|r| r.dropped),
            injected: out.injected,
        });
        Ok(())
    };

    let base = cfg.bus_scenario("baseline").run_baseline().map_err(scen_err("baseline"))?;
    record("baseline", &base, &base.controller_capture, crate::scenario::CONTROLLER_SEGMENT, "baseline")?;

    let atk = cfg.bus_scenario("attack").run_stealth(delay, kind).map_err(scen_err("attack"))?;
    record("attack", &atk, &atk.controller_capture, crate::scenario::CONTROLLER_SEGMENT, "attack")?;
    let sensor_side = atk.sensor_capture.clone().expect("stealth run has a sensor segment");
    record("attack_sensor_side", &atk, &sensor_side, crate::scenario::SENSOR_SEGMENT, "attack")?;

    let single = cfg.bus_scenario("single").run_single_device(single_delay, kind).map_err(scen_err("single"))?;
    record("single_device", &single, &single.controller_capture, crate::scenario::CONTROLLER_SEGMENT, "single")?;

    if cfg.detector.reference == ReferenceSource::Independent {
        let r = cfg.bus_scenario("reference").run_baseline().map_err(scen_err("reference"))?;
        record("reference", &r, &r.controller_capture, crate::scenario::CONTROLLER_SEGMENT, "reference")?;
    }
    if cfg.detector.null_experiment {
        let null = cfg.bus_scenario("null").run_stealth(DelayModel::zero(), kind).map_err(scen_err("null"))?;
        record("null_attack", &null, &null.controller_capture, crate::scenario::CONTROLLER_SEGMENT, "null")?;
    }
    let summary = SimulateSummary { seed: cfg.seed, duration_s: cfg.bus.duration_s, runs };
    write_json(&layout.simulate_summary(), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bias: f64,
    pub additional_kwh: ComponentEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvacSummary {
    pub attack_i: EnergySummary,
    pub attack_ii: EnergySummary,
    pub sweep: Vec<SweepPoint>,
}

/// Baseline, Attack-i (bias) and Attack-ii (override) energy runs plus the
/// bias sweep.
pub fn hvac(cfg: &ExperimentConfig) -> Result<HvacSummary, ExperimentError> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let h = &cfg.hvac;
    let run = |name: &str, kind: FalsifyKind| {
        hvac::run_attack_impact(&h.params, &h.weather, kind, &h.setup).map_err(|source| ExperimentError::Hvac { scenario: name.into(), source })
    };
    let write_run = |file: &str, states: &[hvac::HvacState]| -> Result<(), ExperimentError> {
        let path = layout.hvac(file);
        let w = create(&path)?;
        hvac::write_trajectory_csv(states, w).map_err(|source| ExperimentError::Hvac { scenario: file.into(), source })
    };
    let i = run("attack_i", FalsifyKind::BiasAdd(h.attack_i_bias))?;
    let ii = run("attack_ii", FalsifyKind::Override(h.attack_ii_override))?;
    write_run("baseline.csv", &i.baseline)?;
    write_run("attack_i.csv", &i.attacked)?;
    write_run("attack_ii.csv", &ii.attacked)?;
    write_json(&layout.hvac("attack_i_summary.json"), &i.summary)?;
    write_json(&layout.hvac("attack_ii_summary.json"), &ii.summary)?;

    let mut sweep = Vec::new();
    for &b in &h.bias_sweep {
        let r = run(&format!("bias {b}"), FalsifyKind::BiasAdd(b))?;
        sweep.push(SweepPoint { bias: b, additional_kwh: r.summary.additional_kwh });
    }
    let mut text = String::from("bias_c,fan_kwh,pump_kwh,chiller_kwh,total_kwh\n");
    for p in &sweep {
        let e = p.additional_kwh;
        text.push_str(&format!("{},{},{},{},{}\n", p.bias, e.fan, e.pump, e.chiller, e.total));
    }
    write_text(&layout.hvac("bias_sweep.csv"), &text)?;
    let summary = HvacSummary { attack_i: i.summary, attack_ii: ii.summary, sweep };
    write_json(&layout.hvac("summary.json"), &summary)?;
    Ok(summary)
}

/// Writes the reference (histogram + baseline distributions) and one
/// feature file per window and feature kind, for every experiment.
pub fn featurize_all(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let with_end = |c: CaptureSeries| c.with_end(cfg.bus.duration_s);
    let baseline = with_end(read_capture(&layout.capture("baseline"), Origin::NoAttack)?);
    let reference_capture = match cfg.detector.reference {
        ReferenceSource::Independent => with_end(read_capture(&layout.capture("reference"), Origin::NoAttack)?),
        ReferenceSource::Baseline => baseline.clone(),
    };
    for (exp, attack_name) in experiments(cfg) {
        let attack = with_end(read_capture(&layout.capture(attack_name), Origin::Attack)?);
        for &w in &cfg.detector.windows_min {
            let ctx = format!("{exp} experiment, {w} min window");
            let reference =
                Reference::build(&reference_capture, f64::from(w) * 60.0, cfg.detector.bins, cfg.detector.quantile).map_err(det_err(ctx.clone()))?;
            write_json(&layout.reference(exp, w), &reference)?;
            for &kind in &cfg.detector.features {
                let vectors = featurize(&attack, &baseline, &reference, kind).map_err(det_err(ctx.clone()))?;
                let path = layout.features(exp, kind, w);
                let out = create(&path)?;
                detector::write_features_csv(&vectors, out).map_err(det_err(path.display().to_string()))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub experiment: String,
    pub window_min: u32,
    pub feature: FeatureKind,
    pub algorithm: Algorithm,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Trains every (window × feature × algorithm) cell on the 70 % split,
/// writes the model files and the detection-rate table.
pub fn train_all(cfg: &ExperimentConfig) -> Result<Vec<RateRow>, ExperimentError> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let split_seed = cfg.derive_seed("detector.split");
    let mut hp = cfg.detector.hyperparams;
    hp.svm.seed = cfg.derive_seed("detector.svm");
    let mut rows = Vec::new();
    for (exp, _) in experiments(cfg) {
        for &w in &cfg.detector.windows_min {
            let reference: Reference = read_json(&layout.reference(exp, w))?;
            for &kind in &cfg.detector.features {
                let path = layout.features(exp, kind, w);
                let f = File::open(&path).map_err(io_err(&path))?;
                let ctx = path.display().to_string();
                let vectors = read_features_csv(kind, BufReader::new(f)).map_err(det_err(ctx.clone()))?;
                let ds = Dataset::new(vectors, cfg.detector.train_fraction, split_seed).map_err(det_err(ctx.clone()))?;
                for &alg in &cfg.detector.algorithms {
                    let model = train(&ds, alg, &hp).map_err(det_err(ctx.clone()))?;
                    let accuracy = evaluate(&model, &ds).map_err(det_err(ctx.clone()))?;
                    let file = ModelFile {
                        version: MODEL_FILE_VERSION,
                        feature: kind,
                        algorithm: alg,
                        window_s: f64::from(w) * 60.0,
                        hyperparams: hp,
                        model,
                        reference: (kind == FeatureKind::Jsd).then(|| reference.clone()),
                    };
                    write_text(&layout.model(exp, alg, kind, w), &(file.to_json() + "\n"))?;
                    rows.push(RateRow {
                        experiment: exp.into(),
                        window_min: w,
                        feature: kind,
                        algorithm: alg,
                        accuracy,
                        n_train: ds.split.train.len(),
                        n_test: ds.split.test.len(),
                    });
                }
            }
        }
    }
    let path = layout.detection_rates();
    let mut out = csv::Writer::from_writer(create(&path)?);
    for r in &rows {
        out.serialize(r).map_err(|e| ExperimentError::Parse { path: path.clone(), msg: e.to_string() })?;
    }
    out.flush().map_err(io_err(&path))?;
    Ok(rows)
}

pub fn read_rates(path: &Path) -> Result<Vec<RateRow>, ExperimentError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| ExperimentError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
    rd.deserialize().map(|r| r.map_err(|e| ExperimentError::Parse { path: path.to_path_buf(), msg: e.to_string() })).collect()
}

/// Classifies every complete window of `capture` with a saved model.
pub fn detect_file(model_path: &Path, capture_path: &Path, out: &Path) -> Result<Vec<Verdict>, ExperimentError> {
    let file = ModelFile::from_json(&read_text(model_path)?).map_err(det_err(model_path.display().to_string()))?;
    let capture = read_capture(capture_path, Origin::Unlabeled)?;
    let verdicts = detector::detect(&file, &capture).map_err(det_err(capture_path.display().to_string()))?;
    let w = create(out)?;
    detector::write_verdicts_csv(&verdicts, w).map_err(det_err(out.display().to_string()))?;
    Ok(verdicts)
}

/// Pooled test accuracy of one (feature, algorithm) column over all windows.
pub fn pooled_accuracy(rows: &[RateRow], experiment: &str, feature: FeatureKind, algorithm: Algorithm) -> Option<f64> {
    let cells: Vec<&RateRow> = rows.iter().filter(|r| r.experiment == experiment && r.feature == feature && r.algorithm == algorithm).collect();
    let n: usize = cells.iter().map(|r| r.n_test).sum();
    (n > 0).then(|| cells.iter().map(|r| r.accuracy * r.n_test as f64).sum::<f64>() / n as f64)
}

/// Windows where the SVM + JSD accuracy is below some other SVM feature.
pub fn jsd_ordering_violations(rows: &[RateRow], experiment: &str) -> Vec<(u32, FeatureKind)> {
    let mut out = Vec::new();
    let svm = |w: u32, k: FeatureKind| {
        rows.iter().find(|r| r.experiment == experiment && r.window_min == w && r.feature == k && r.algorithm == Algorithm::Svm).map(|r| r.accuracy)
    };
    let mut windows: Vec<u32> = rows.iter().filter(|r| r.experiment == experiment).map(|r| r.window_min).collect();
    windows.dedup();
    for w in windows {
        let Some(j) = svm(w, FeatureKind::Jsd) else { continue };
        for k in [FeatureKind::Mean, FeatureKind::Variance, FeatureKind::MeanVar] {
            if svm(w, k).is_some_and(|a| a > j) {
                out.push((w, k));
            }
        }
    }
    out
}

/// Plot-ready tables and a text summary from the stored results.
pub fn report(cfg: &ExperimentConfig) -> Result<String, ExperimentError> {
    let layout = Layout::new(&cfg.out_dir);
    let rows = read_rates(&layout.detection_rates())?;
    let columns: Vec<(FeatureKind, Algorithm)> =
        cfg.detector.features.iter().flat_map(|&k| cfg.detector.algorithms.iter().map(move |&a| (k, a))).collect();
    let mut curves = String::from("experiment,window_min");
    for (k, a) in &columns {
        curves.push_str(&format!(",{}_{}", k.name(), a.name()));
    }
    curves.push('\n');
    let mut text = String::new();
    for (exp, _) in experiments(cfg) {
        text.push_str(&format!("detection rate ({exp})\nwindow"));
        for (k, a) in &columns {
            text.push_str(&format!(" {:>13}", format!("{}/{}", k.name(), a.name())));
        }
        text.push('\n');
        for &w in &cfg.detector.windows_min {
            curves.push_str(&format!("{exp},{w}"));
            text.push_str(&format!("{:>4}m ", w));
            for &(k, a) in &columns {
                let acc = rows.iter().find(|r| r.experiment == exp && r.window_min == w && r.feature == k && r.algorithm == a).map(|r| r.accuracy);
                curves.push_str(&acc.map_or(",".into(), |v| format!(",{v}")));
                text.push_str(&acc.map_or(format!(" {:>13}", "-"), |v| format!(" {v:>13.4}")));
            }
            curves.push('\n');
            text.push('\n');
        }
        let violations = jsd_ordering_violations(&rows, exp);
        text.push_str(&format!("jsd >= other features with svm: {}\n\n", if violations.is_empty() { "yes".to_string() } else { format!("no {violations:?}") }));
    }
    write_text(&layout.report("detection_rate_curves.csv"), &curves)?;

    let hvac_path = layout.hvac("summary.json");
    if hvac_path.exists() {
        let h: HvacSummary = read_json(&hvac_path)?;
        let mut bars = String::from("scenario,component,additional_kwh\n");
        for (name, s) in [("attack_i", &h.attack_i), ("attack_ii", &h.attack_ii)] {
            let e = s.additional_kwh;
            for (c, v) in [("fan", e.fan), ("pump", e.pump), ("chiller", e.chiller), ("total", e.total)] {
                bars.push_str(&format!("{name},{c},{v}\n"));
            }
            text.push_str(&format!(
                "{name}: baseline {:.3} kWh, attacked {:.3} kWh, additional fan {:.4} pump {:.4} chiller {:.4} total {:.4} kWh\n",
                s.baseline_kwh, s.attacked_kwh, e.fan, e.pump, e.chiller, e.total
            ));
        }
        for p in &h.sweep {
            bars.push_str(&format!("bias_{},total,{}\n", p.bias, p.additional_kwh.total));
        }
        write_text(&layout.report("energy_bars.csv"), &bars)?;
    }
    write_text(&layout.report("summary.txt"), &text)?;
    Ok(text)
}

/// simulate → hvac → featurize → train → report.
pub fn suite(cfg: &ExperimentConfig) -> Result<String, ExperimentError> {
    simulate(cfg)?;
    hvac(cfg)?;
    featurize_all(cfg)?;
    train_all(cfg)?;
    report(cfg)
}
