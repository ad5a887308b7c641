//! Seeded Monte Carlo experiments over device load, antennas and frame shape.

mod bench;
mod output;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    classify_neighbors, expected_neighbors, sample_frame, synthesize_frame, GeometryConfig,
};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::pipeline::{
    decode_frame, default_parity, error_metrics, DecodeOptions, FrameConfig, DEFAULT_PATH_CAP,
    DEFAULT_SUBCARRIER_SPACING, DEFAULT_TAU_MAX,
};

pub use bench::{complexity_model, scaling_bench, BenchConfig, BenchRow, ScalingReport};
pub use output::{read_summaries, run_sweep, summary_table, SweepOutcome, SUMMARY_HEADER};

/// Region and propagation settings shared by every sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub side: f64,
    pub alpha: f64,
    pub theta: f64,
    pub gamma_db: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            side: 500.0,
            alpha: 4.0,
            theta: 1e-6,
            gamma_db: 60.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    /// Per-sub-block parity counts; the default allocation for `d` when absent.
    pub parity: Option<Vec<usize>>,
    pub parity_seed: u64,
    pub subcarrier_spacing: f64,
    /// Zero selects the synchronous scheme.
    pub tau_max: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            parity: None,
            parity_seed: 0x5eed,
            subcarrier_spacing: DEFAULT_SUBCARRIER_SPACING,
            tau_max: DEFAULT_TAU_MAX,
        }
    }
}

/// Overrides of the scene-derived detector settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub k_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub refine_window: Option<f64>,
    pub refine_resolution: Option<f64>,
    /// Drop decoded messages whose estimated gain is below the neighbor threshold.
    pub neighbor_filter: Option<bool>,
    pub path_cap: Option<usize>,
}

/// Sweep axes; every combination is one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Mean number of active devices in the region.
    pub devices: Vec<f64>,
    pub antennas: Vec<usize>,
    pub m: Vec<usize>,
    pub p: Vec<usize>,
    #[serde(default = "zero_axis")]
    pub d: Vec<usize>,
}

fn zero_axis() -> Vec<usize> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    pub sweep: SweepSpec,
}

/// One fully resolved sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSpec {
    /// Position in sweep order; part of every trial seed.
    pub index: usize,
    pub devices: f64,
    pub geometry: GeometryConfig,
    pub frame: FrameConfig,
    pub detector: DetectorConfig,
    pub decode: DecodeOptions,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str::<Self>(&text)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
            .and_then(|spec| {
                spec.validate()?;
                Ok(spec)
            })
    }

    /// Reference operating point: 500 m square, `α = 4`, `θ = 10⁻⁶`,
    /// `γ = 60 dB`, `Δf = 15 kHz`, `τ_max = 10 μs`.
    pub fn reference(devices: Vec<f64>, antennas: Vec<usize>, m: usize, p: usize, d: usize) -> Self {
        Self {
            name: "reference".into(),
            seed: 1,
            trials: 20,
            output: None,
            geometry: GeometrySpec::default(),
            frame: FrameSpec::default(),
            detector: DetectorSpec::default(),
            sweep: SweepSpec {
                devices,
                antennas,
                m: vec![m],
                p: vec![p],
                d: vec![d],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let s = &self.sweep;
        if s.devices.is_empty() || s.antennas.is_empty() || s.m.is_empty() || s.p.is_empty() || s.d.is_empty() {
            return Err(Error::InvalidConfig("every sweep axis needs at least one value".into()));
        }
        self.points().map(|_| ())
    }

    /// Sweep points in a fixed order: devices, antennas, m, p, d (last varies fastest).
    pub fn points(&self) -> Result<Vec<PointSpec>> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for &devices in &s.devices {
            for &antennas in &s.antennas {
                for &m in &s.m {
                    for &p in &s.p {
                        for &d in &s.d {
                            let index = out.len();
                            out.push(self.point(index, devices, antennas, m, p, d)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn point(&self, index: usize, devices: f64, antennas: usize, m: usize, p: usize, d: usize) -> Result<PointSpec> {
        let g = &self.geometry;
        let geometry = GeometryConfig {
            intensity: devices / (g.side * g.side),
            side: g.side,
            alpha: g.alpha,
            theta: g.theta,
            gamma: 10f64.powf(g.gamma_db / 10.0),
            antennas,
        };
        geometry.validate()?;
        let frame = FrameConfig {
            m,
            p,
            d,
            parity: match &self.frame.parity {
                Some(parity) => parity.clone(),
                None => default_parity(d)?,
            },
            parity_seed: self.frame.parity_seed,
            subcarrier_spacing: self.frame.subcarrier_spacing,
            tau_max: self.frame.tau_max,
        };
        frame.validate()?;
        let o = &self.detector;
        let tuned = DetectorConfig::tuned(&geometry, &frame);
        let detector = DetectorConfig {
            k_max: o.k_max.unwrap_or(tuned.k_max),
            epsilon: o.epsilon.unwrap_or(tuned.epsilon),
            refine_window: o.refine_window.unwrap_or(tuned.refine_window),
            refine_resolution: o.refine_resolution.unwrap_or(tuned.refine_resolution),
            estimate_delay: tuned.estimate_delay,
        };
        detector.validate()?;
        let decode = DecodeOptions {
            path_cap: o.path_cap.unwrap_or(DEFAULT_PATH_CAP),
            neighbor_gain: o
                .neighbor_filter
                .unwrap_or(true)
                .then_some(geometry.gamma * antennas as f64 * geometry.theta),
        };
        Ok(PointSpec {
            index,
            devices,
            geometry,
            frame,
            detector,
            decode,
        })
    }
}

/// One Monte Carlo frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "K")]
    pub devices: f64,
    pub r: usize,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    pub trial: usize,
    pub seed: u64,
    pub active: usize,
    pub neighbors: usize,
    pub decoded: usize,
    pub miss: Option<f64>,
    pub false_alarm: f64,
    pub k_star: f64,
    pub path_overflow: bool,
    /// Wall time of the decoder, seconds. Not reproducible.
    pub runtime: f64,
}

/// Aggregate over the trials of one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    #[serde(rename = "K")]
    pub devices: f64,
    pub r: usize,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    #[serde(rename = "B")]
    pub info_bits: usize,
    #[serde(rename = "C")]
    pub codelength: usize,
    #[serde(rename = "K_star")]
    pub k_star: f64,
    /// Over trials with at least one neighbor; absent if there were none.
    pub miss_mean: Option<f64>,
    pub miss_se: Option<f64>,
    pub fa_mean: f64,
    pub fa_se: f64,
    pub trials: usize,
}

/// Trial RNG: the master seed picks the key, `(point, trial)` the stream.
pub fn trial_rng(master: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

pub fn run_trial(point: &PointSpec, master: u64, trial: usize) -> Result<TrialRecord> {
    let mut rng = trial_rng(master, point.index, trial);
    let devices = sample_frame(&point.geometry, &point.frame, &mut rng)?;
    let (inside, _) = classify_neighbors(&devices, &point.geometry);
    let truth: Vec<Vec<u8>> = inside.iter().map(|&k| devices[k].message.clone()).collect();
    let observations = synthesize_frame(&devices, &point.geometry, &point.frame, true, &mut rng)?;
    let start = Instant::now();
    let decoded = decode_frame(&observations, &point.detector, &point.frame, &point.decode)?;
    let runtime = start.elapsed().as_secs_f64();
    let bits: Vec<Vec<u8>> = decoded.messages.into_iter().map(|m| m.bits).collect();
    let metrics = error_metrics(&bits, &truth);
    Ok(TrialRecord {
        devices: point.devices,
        r: point.geometry.antennas,
        m: point.frame.m,
        p: point.frame.p,
        d: point.frame.d,
        trial,
        seed: master,
        active: devices.len(),
        neighbors: truth.len(),
        decoded: metrics.decoded,
        miss: metrics.miss,
        false_alarm: metrics.false_alarm,
        k_star: expected_neighbors(&point.geometry),
        path_overflow: decoded.path_overflow,
        runtime,
    })
}

/// All trials of one point in parallel; results come back in trial order.
pub fn run_point(point: &PointSpec, master: u64, trials: usize) -> Result<(PointSummary, Vec<TrialRecord>)> {
    let records = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(point, master, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize(point, &records), records))
}

/// Sample mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(point: &PointSpec, records: &[TrialRecord]) -> PointSummary {
    let misses: Vec<f64> = records.iter().filter_map(|r| r.miss).collect();
    let fas: Vec<f64> = records.iter().map(|r| r.false_alarm).collect();
    let (miss_mean, miss_se) = if misses.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_se(&misses);
        (Some(m), Some(s))
    };
    let (fa_mean, fa_se) = if fas.is_empty() { (0.0, 0.0) } else { mean_se(&fas) };
    PointSummary {
        devices: point.devices,
        r: point.geometry.antennas,
        m: point.frame.m,
        p: point.frame.p,
        d: point.frame.d,
        info_bits: point.frame.info_bits(),
        codelength: point.frame.codelength(),
        k_star: expected_neighbors(&point.geometry),
        miss_mean,
        miss_se,
        fa_mean,
        fa_se,
        trials: records.len(),
    }
}
