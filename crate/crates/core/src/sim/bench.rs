//! Decoder timing against the per-slot complexity model.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, synthesize_slot, SlotObservation, Transmission};
use crate::codec::{generate_sequence, RmPair};
use crate::detector::{DetectorConfig, SlotDetector};
use crate::error::{Error, Result};

/// Operation count `K_max 2^m (m² + 3m + r − 2)` of one slot.
pub fn complexity_model(k_max: usize, m: usize, r: usize) -> f64 {
    let m_f = m as f64;
    k_max as f64 * (1u64 << m) as f64 * (m_f * m_f + 3.0 * m_f + r as f64 - 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Orders swept at `r = fixed_r`.
    pub m_values: Vec<usize>,
    /// Antenna counts swept at `m = fixed_m`.
    pub r_values: Vec<usize>,
    pub fixed_m: usize,
    pub fixed_r: usize,
    /// Detections timed per measurement.
    pub k_max: usize,
    /// Measurements per grid point; the fastest is kept.
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m_values: vec![8, 9, 10, 11],
            r_values: vec![1, 4, 16],
            fixed_m: 6,
            fixed_r: 16,
            k_max: 4,
            reps: 7,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub r: usize,
    pub seconds: f64,
    pub model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub m_rows: Vec<BenchRow>,
    pub r_rows: Vec<BenchRow>,
}

impl ScalingReport {
    /// `(m, measured ratio, model ratio)` for each consecutive pair of orders.
    pub fn m_ratios(&self) -> Vec<(usize, f64, f64)> {
        self.m_rows
            .windows(2)
            .map(|w| (w[1].m, w[1].seconds / w[0].seconds, w[1].model / w[0].model))
            .collect()
    }

    /// Least-squares slope of `log t` against `log 2^m`; the model alone gives
    /// slightly more than 1 because of the `m²` term.
    pub fn m_exponent(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .m_rows
            .iter()
            .map(|r| (r.m as f64 * 2f64.ln(), r.seconds.ln()))
            .collect();
        slope(&pts)
    }

    /// Every consecutive measured ratio lies within `[model/band, model·band]`.
    pub fn within_band(&self, band: f64) -> bool {
        self.m_ratios()
            .iter()
            .all(|&(_, got, want)| got / want <= band && got / want >= 1.0 / band)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("   m   r     seconds        model   s/model\n");
        for row in self.m_rows.iter().chain(&self.r_rows) {
            out.push_str(&format!(
                "{:>4} {:>3} {:>11.3e} {:>12.3e} {:>9.3e}\n",
                row.m,
                row.r,
                row.seconds,
                row.model,
                row.seconds / row.model
            ));
        }
        for (m, got, want) in self.m_ratios() {
            out.push_str(&format!("m {}->{m}: time ratio {got:.3}, model ratio {want:.3}\n", m - 1));
        }
        out.push_str(&format!("fitted exponent in 2^m: {:.3}\n", self.m_exponent()));
        out
    }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

/// A noisy slot holding `k` devices with unit-order gains and random delays.
fn scene(m: usize, r: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<SlotObservation> {
    let txs: Vec<Transmission> = (0..k)
        .map(|_| {
            let mut pair = RmPair::zero(m)?;
            for i in 0..m {
                pair.set_b(i, rng.random_range(0..2));
                for j in i..m {
                    pair.set_p(i, j, rng.random_range(0..2));
                }
            }
            pair.set_b(m - 1, 0);
            pair.set_p(m - 1, m - 1, 0);
            Ok(Transmission {
                codeword: generate_sequence(&pair),
                channel: (0..r).map(|_| complex_normal(rng)).collect(),
                delta: rng.random_range(-PI..PI),
                delay: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    synthesize_slot(0, r, m, 100.0, &txs, true, rng)
}

/// Fastest of `reps` runs of one slot's work: a working copy plus `k_max`
/// detect-and-cancel passes.
fn time_point(m: usize, r: usize, cfg: &BenchConfig) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((m as u64) << 8) ^ r as u64);
    let obs = scene(m, r, cfg.k_max, &mut rng)?;
    let det = DetectorConfig::default();
    let mut detector = SlotDetector::new(&det, r, 1 << m)?;
    // enough slots per measurement to rise well above timer resolution
    let slots = ((1usize << 16) >> m).max(1);
    let mut best = f64::INFINITY;
    for _ in 0..cfg.reps {
        let start = Instant::now();
        for _ in 0..slots {
            let mut y = obs.y.clone();
            for _ in 0..cfg.k_max {
                std::hint::black_box(detector.step(&mut y)?);
            }
        }
        best = best.min(start.elapsed().as_secs_f64() / slots as f64);
    }
    Ok(BenchRow {
        m,
        r,
        seconds: best,
        model: complexity_model(cfg.k_max, m, r),
    })
}

/// Times the per-slot detector over the `m` grid and the `r` grid.
pub fn scaling_bench(cfg: &BenchConfig) -> Result<ScalingReport> {
    if cfg.reps == 0 || cfg.k_max == 0 || cfg.m_values.iter().chain([&cfg.fixed_m]).any(|&m| m < 2) {
        return Err(Error::InvalidConfig(format!("bench settings out of range: {cfg:?}")));
    }
    let m_rows = cfg
        .m_values
        .iter()
        .map(|&m| time_point(m, cfg.fixed_r, cfg))
        .collect::<Result<_>>()?;
    let r_rows = cfg
        .r_values
        .iter()
        .map(|&r| time_point(cfg.fixed_m, r, cfg))
        .collect::<Result<_>>()?;
    Ok(ScalingReport { m_rows, r_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_values() {
        assert_eq!(complexity_model(1, 6, 16), 64.0 * (36.0 + 18.0 + 14.0));
        assert_eq!(complexity_model(3, 2, 1), 3.0 * 4.0 * 9.0);
    }

    #[test]
    fn trivial_bench_is_fast() {
        let cfg = BenchConfig {
            m_values: vec![4, 5],
            r_values: vec![1, 2],
            fixed_m: 4,
            fixed_r: 2,
            k_max: 1,
            reps: 1,
            seed: 0,
        };
        let start = Instant::now();
        let report = scaling_bench(&cfg).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0);
        assert_eq!(report.m_rows.len(), 2);
        assert_eq!(report.m_ratios().len(), 1);
        assert!(report.m_rows.iter().all(|r| r.seconds > 0.0));
    }
}
