//! Device geometry, fading and delay sampling, and the post-DFT slot model.
//!
//! Devices form a homogeneous Poisson point process on a square with the
//! access point at its center. Antenna `l` sees `|h_l|² = D^{-α} G_l` with
//! `G_l ~ Exp(1)` and a uniform phase. A slot observation is the `r x N`
//! matrix `Y[l][n] = √γ Σ_k h_{k,l} X_{k,n} e^{-iΔ_k n} + Z` with `n` counted
//! from 1, which [`time_domain_oracle`] reproduces from the sampled OFDM
//! waveform.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::codec::{generate_sequence, Codeword};
use crate::error::{Error, Result};
use crate::pipeline::{assign_slots, sample_message, FrameConfig, ParityMap, SlotAssignment};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// `λ`, active devices per m².
    pub intensity: f64,
    /// Side of the square region, m.
    pub side: f64,
    /// Path-loss exponent `α > 2`.
    pub alpha: f64,
    /// Neighbor channel-gain threshold `θ`.
    pub theta: f64,
    /// Transmit SNR `γ`, linear.
    pub gamma: f64,
    /// Receive antennas `r`.
    pub antennas: usize,
}

impl GeometryConfig {
    /// Reference parameters with `k` active devices on average: 500 m square,
    /// `α = 4`, `θ = 10⁻⁶`, `γ = 60 dB`.
    pub fn reference(k: f64, antennas: usize) -> Self {
        let side = 500.0;
        Self {
            intensity: k / (side * side),
            side,
            alpha: 4.0,
            theta: 1e-6,
            gamma: 1e6,
            antennas,
        }
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn mean_devices(&self) -> f64 {
        self.intensity * self.area()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 2.0
            && self.intensity >= 0.0
            && self.side > 0.0
            && self.theta > 0.0
            && self.gamma > 0.0
            && self.antennas >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("geometry out of range: {self:?}")))
        }
    }

    /// `Γ(2/α + r) / Γ(r)`
    fn gamma_ratio(&self) -> f64 {
        let r = self.antennas as f64;
        (ln_gamma(2.0 / self.alpha + r) - ln_gamma(r)).exp()
    }
}

/// Mean number of neighbors, `K* = πλ (rθ)^{-2/α} Γ(2/α + r) / Γ(r)`.
pub fn expected_neighbors(cfg: &GeometryConfig) -> f64 {
    let rt = cfg.antennas as f64 * cfg.theta;
    PI * cfg.intensity * rt.powf(-2.0 / cfg.alpha) * cfg.gamma_ratio()
}

/// Mean summed received power of all non-neighbors,
/// `σ² = (rθ)^{1-2/α} 2πλγ/(α-2) Γ(2/α + r)/Γ(r)`.
pub fn interference_power(cfg: &GeometryConfig) -> f64 {
    let rt = cfg.antennas as f64 * cfg.theta;
    rt.powf(1.0 - 2.0 / cfg.alpha) * 2.0 * PI * cfg.intensity * cfg.gamma / (cfg.alpha - 2.0)
        * cfg.gamma_ratio()
}

/// One active device in one frame.
#[derive(Clone, Debug)]
pub struct DeviceRealization {
    pub position: (f64, f64),
    pub distance: f64,
    /// Small-scale gains `G_l`.
    pub fading: Vec<f64>,
    pub phases: Vec<f64>,
    /// `h_l` without the `√γ` transmit scale.
    pub channel: Vec<Complex64>,
    /// `τ`, seconds, clamped to `[0, τ_max]`.
    pub delay: f64,
    /// Normalized delay `Δ ∈ [-π, π)`.
    pub delta: f64,
    pub message: Vec<u8>,
    /// One assignment per sub-block.
    pub assignments: Vec<SlotAssignment>,
}

impl DeviceRealization {
    /// `D^{-α} ‖G‖₁`, equal to `‖h‖²`.
    pub fn channel_gain(&self, alpha: f64) -> f64 {
        let sum: f64 = self.fading.iter().sum();
        if sum == 0.0 {
            0.0
        } else {
            self.distance.powf(-alpha) * sum
        }
    }
}

/// Draws one frame of active devices with their messages and slot choices.
pub fn sample_frame<R: Rng + ?Sized>(
    cfg: &GeometryConfig,
    frame: &FrameConfig,
    rng: &mut R,
) -> Result<Vec<DeviceRealization>> {
    cfg.validate()?;
    frame.validate()?;
    let mean = cfg.mean_devices();
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean)
            .map_err(|e| Error::InvalidConfig(format!("device count distribution: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    let parity = ParityMap::new(frame)?;
    let half = cfg.side / 2.0;
    let mut devices = Vec::with_capacity(count);
    for _ in 0..count {
        let position = (rng.random_range(-half..half), rng.random_range(-half..half));
        let distance = position.0.hypot(position.1);
        let path_gain = distance.powf(-cfg.alpha);
        let fading: Vec<f64> = (0..cfg.antennas).map(|_| Exp1.sample(rng)).collect();
        let phases: Vec<f64> = (0..cfg.antennas).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let channel = fading
            .iter()
            .zip(&phases)
            .map(|(&g, &phi)| Complex64::from_polar((path_gain * g).sqrt(), phi))
            .collect();
        let (delta, delay) = if frame.is_synchronous() {
            (0.0, 0.0)
        } else {
            let delta: f64 = rng.random_range(-PI..PI);
            let tau = (delta / (2.0 * PI * frame.subcarrier_spacing)).clamp(0.0, frame.tau_max);
            (delta, tau)
        };
        let message = sample_message(frame, rng);
        let assignments = parity
            .encode(&message)?
            .iter()
            .map(|segment| assign_slots(segment, frame, rng))
            .collect::<Result<Vec<_>>>()?;
        devices.push(DeviceRealization {
            position,
            distance,
            fading,
            phases,
            channel,
            delay,
            delta,
            message,
            assignments,
        });
    }
    Ok(devices)
}

/// Splits device indices into neighbors (`D^{-α}‖G‖₁ >= rθ`) and the rest.
pub fn classify_neighbors(
    devices: &[DeviceRealization],
    cfg: &GeometryConfig,
) -> (Vec<usize>, Vec<usize>) {
    let threshold = cfg.antennas as f64 * cfg.theta;
    (0..devices.len()).partition(|&k| devices[k].channel_gain(cfg.alpha) >= threshold)
}

/// One codeword arriving in a slot.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub codeword: Codeword,
    pub channel: Vec<Complex64>,
    /// Normalized delay `Δ`, radians.
    pub delta: f64,
    /// Physical delay `τ`, seconds.
    pub delay: f64,
}

impl Transmission {
    /// Transmission whose normalized delay is `2πΔf τ`.
    pub fn from_delay(
        codeword: Codeword,
        channel: Vec<Complex64>,
        delay: f64,
        subcarrier_spacing: f64,
    ) -> Self {
        Self {
            codeword,
            channel,
            delta: 2.0 * PI * subcarrier_spacing * delay,
            delay,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotObservation {
    pub slot: usize,
    /// `r x N` post-DFT samples.
    pub y: Array2<Complex64>,
}

impl SlotObservation {
    pub fn zeros(slot: usize, antennas: usize, m: usize) -> Self {
        Self {
            slot,
            y: Array2::zeros((antennas, 1 << m)),
        }
    }

    pub fn antennas(&self) -> usize {
        self.y.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.y.ncols()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.y)
    }
}

pub(crate) fn frobenius(y: &Array2<Complex64>) -> f64 {
    y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `e^{-iΔn}` for `n = 1..=len`.
pub fn phase_ramp(delta: f64, len: usize) -> Vec<Complex64> {
    (1..=len).map(|n| Complex64::cis(-delta * n as f64)).collect()
}

fn check_shapes(antennas: usize, m: usize, transmissions: &[Transmission]) -> Result<()> {
    for (k, tx) in transmissions.iter().enumerate() {
        if tx.codeword.len() != 1 << m || tx.channel.len() != antennas {
            return Err(Error::DimensionMismatch(format!(
                "transmission {k}: codeword length {} and {} antennas, slot expects {} and {}",
                tx.codeword.len(),
                tx.channel.len(),
                1usize << m,
                antennas
            )));
        }
    }
    Ok(())
}

/// `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Post-DFT received samples of one slot.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_slot<R: Rng + ?Sized>(
    slot: usize,
    antennas: usize,
    m: usize,
    gamma: f64,
    transmissions: &[Transmission],
    noise_on: bool,
    rng: &mut R,
) -> Result<SlotObservation> {
    check_shapes(antennas, m, transmissions)?;
    let mut obs = SlotObservation::zeros(slot, antennas, m);
    let amp = gamma.sqrt();
    let n = 1usize << m;
    for tx in transmissions {
        let ramp = phase_ramp(tx.delta, n);
        let waveform: Vec<Complex64> = tx
            .codeword
            .samples
            .iter()
            .zip(&ramp)
            .map(|(x, e)| x * e * amp)
            .collect();
        for (mut row, h) in obs.y.rows_mut().into_iter().zip(&tx.channel) {
            for (y, w) in row.iter_mut().zip(&waveform) {
                *y += h * w;
            }
        }
    }
    if noise_on {
        obs.y.iter_mut().for_each(|y| *y += complex_normal(rng));
    }
    Ok(obs)
}

/// Noise-free slot obtained by sampling the continuous-time OFDM superposition.
///
/// Each device sends `√γ Σ_n X_n e^{2πiΔf n t}` over one symbol plus an
/// `M`-sample cyclic prefix. The receiver samples at `u/(NΔf)` for
/// `u = 1..N+M`, drops the first `M` samples and takes the `N`-point DFT with
/// the time index referenced to the symbol start.
pub fn time_domain_oracle(
    slot: usize,
    antennas: usize,
    m: usize,
    gamma: f64,
    transmissions: &[Transmission],
    frame: &FrameConfig,
) -> Result<SlotObservation> {
    check_shapes(antennas, m, transmissions)?;
    let n_sc = 1usize << m;
    let df = frame.subcarrier_spacing;
    let cp = frame.cyclic_prefix();
    let total = n_sc + cp;
    let limit = frame.tau_max;
    for tx in transmissions {
        if tx.delay < 0.0 || tx.delay > limit {
            return Err(Error::DelayOutOfRange { tau: tx.delay, limit });
        }
    }
    let duration = total as f64 / (n_sc as f64 * df);
    let amp = gamma.sqrt();
    // time samples, antenna-major
    let mut samples = Array2::<Complex64>::zeros((antennas, total));
    for tx in transmissions {
        for u in 1..=total {
            let t = u as f64 / (n_sc as f64 * df) - tx.delay;
            if !(0.0..=duration).contains(&t) {
                continue;
            }
            let x: Complex64 = tx
                .codeword
                .samples
                .iter()
                .enumerate()
                .map(|(idx, &xn)| xn * Complex64::cis(2.0 * PI * df * (idx + 1) as f64 * t))
                .sum::<Complex64>()
                * amp;
            for (l, h) in tx.channel.iter().enumerate() {
                samples[[l, u - 1]] += h * x;
            }
        }
    }
    let mut obs = SlotObservation::zeros(slot, antennas, m);
    for l in 0..antennas {
        for k in 1..=n_sc {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in cp + 1..=total {
                let phase = -2.0 * PI * ((k * u) % n_sc) as f64 / n_sc as f64;
                acc += samples[[l, u - 1]] * Complex64::cis(phase);
            }
            obs.y[[l, k - 1]] = acc / n_sc as f64;
        }
    }
    Ok(obs)
}

/// Every transmission landing in `slot` of sub-block `block`, with both copies
/// sharing the device's channel and delay.
pub fn slot_transmissions(
    devices: &[DeviceRealization],
    block: usize,
    slot: usize,
) -> Vec<Transmission> {
    let mut out = Vec::new();
    for dev in devices {
        let a = &dev.assignments[block];
        let mut push = |pair| {
            out.push(Transmission {
                codeword: generate_sequence(pair),
                channel: dev.channel.clone(),
                delta: dev.delta,
                delay: dev.delay,
            })
        };
        if a.primary == slot {
            push(&a.primary_pair);
        }
        if a.secondary == Some(slot) {
            if let Some(pair) = &a.secondary_pair {
                push(pair);
            }
        }
    }
    out
}

/// Observations for every `(sub-block, slot)` of one frame, sub-block major.
pub fn synthesize_frame<R: Rng + ?Sized>(
    devices: &[DeviceRealization],
    geometry: &GeometryConfig,
    frame: &FrameConfig,
    noise_on: bool,
    rng: &mut R,
) -> Result<Vec<Vec<SlotObservation>>> {
    (0..frame.sub_blocks())
        .map(|block| {
            (0..frame.slots())
                .map(|slot| {
                    let txs = slot_transmissions(devices, block, slot);
                    synthesize_slot(slot, geometry.antennas, frame.m, geometry.gamma, &txs, noise_on, rng)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::RmPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-15);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn neighbors_closed_form_reference_values() {
        let one = GeometryConfig::reference(1000.0, 1);
        assert!((expected_neighbors(&one) - 11.137).abs() < 5e-3);
        assert_eq!(expected_neighbors(&one).round(), 11.0);
        let sixteen = GeometryConfig::reference(1000.0, 16);
        assert!((expected_neighbors(&sixteen) - 12.4686).abs() < 5e-4);
        assert!((expected_neighbors(&GeometryConfig::reference(8000.0, 1)) - 89.0932).abs() < 5e-4);
        assert!((expected_neighbors(&GeometryConfig::reference(8000.0, 16)) - 99.7488).abs() < 5e-4);
    }

    #[test]
    fn closed_forms_scale_linearly() {
        let base = GeometryConfig::reference(1000.0, 4);
        let doubled = GeometryConfig {
            intensity: 2.0 * base.intensity,
            ..base.clone()
        };
        assert!((expected_neighbors(&doubled) / expected_neighbors(&base) - 2.0).abs() < 1e-12);
        let louder = GeometryConfig {
            gamma: 10.0 * base.gamma,
            ..base.clone()
        };
        assert!((interference_power(&louder) / interference_power(&base) - 10.0).abs() < 1e-12);
        let empty = GeometryConfig {
            intensity: 0.0,
            ..base
        };
        assert_eq!(interference_power(&empty), 0.0);
        assert_eq!(expected_neighbors(&empty), 0.0);
    }

    #[test]
    fn empty_region_yields_no_devices() {
        let cfg = GeometryConfig::reference(0.0, 2);
        let frame = FrameConfig::new(5, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_frame(&cfg, &frame, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let cfg = GeometryConfig::reference(200.0, 2);
        let frame = FrameConfig::new(5, 3, 1).unwrap();
        let a = sample_frame(&cfg, &frame, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_frame(&cfg, &frame, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.channel, y.channel);
            assert_eq!(x.message, y.message);
            assert_eq!(x.delta, y.delta);
            assert_eq!(x.assignments, y.assignments);
        }
    }

    #[test]
    fn device_invariants() {
        let cfg = GeometryConfig::reference(500.0, 4);
        let frame = FrameConfig::new(6, 6, 0).unwrap();
        let devices = sample_frame(&cfg, &frame, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert!(!devices.is_empty());
        for dev in &devices {
            assert!((-PI..PI).contains(&dev.delta));
            assert!((0.0..=frame.tau_max).contains(&dev.delay));
            for (h, g) in dev.channel.iter().zip(&dev.fading) {
                let expected = dev.distance.powf(-4.0) * g;
                assert!((h.norm_sqr() - expected).abs() <= 1e-12 * expected);
            }
            let a = &dev.assignments[0];
            assert_ne!(Some(a.primary), a.secondary);
        }
    }

    #[test]
    fn mean_device_count_matches_intensity() {
        let cfg = GeometryConfig::reference(1000.0, 1);
        let frame = FrameConfig::new(4, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let frames = 1000;
        let total: usize = (0..frames)
            .map(|_| sample_frame(&cfg, &frame, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / frames as f64;
        // three standard errors of a Poisson(1000) mean over 1000 frames
        assert!((mean - 1000.0).abs() < 3.0, "mean {mean}");
    }

    fn device_at(distance: f64, fading: Vec<f64>) -> DeviceRealization {
        DeviceRealization {
            position: (distance, 0.0),
            distance,
            channel: vec![Complex64::new(0.0, 0.0); fading.len()],
            phases: vec![0.0; fading.len()],
            fading,
            delay: 0.0,
            delta: 0.0,
            message: vec![],
            assignments: vec![],
        }
    }

    #[test]
    fn neighbor_edge_cases() {
        let cfg = GeometryConfig::reference(1000.0, 2);
        let devices = vec![
            device_at(0.0, vec![0.5, 0.5]),
            device_at(1.0, vec![0.0, 0.0]),
            device_at(400.0, vec![1.0, 1.0]),
            device_at(5.0, vec![1.0, 1.0]),
        ];
        let (inside, outside) = classify_neighbors(&devices, &cfg);
        assert_eq!(inside, vec![0, 3]);
        assert_eq!(outside, vec![1, 2]);
    }

    fn random_tx(rng: &mut ChaCha8Rng, m: usize, r: usize, delay: f64) -> Transmission {
        let mut pair = RmPair::zero(m).unwrap();
        for i in 0..m {
            pair.set_b(i, rng.random_range(0..2));
            for j in i..m {
                pair.set_p(i, j, rng.random_range(0..2));
            }
        }
        let h = (0..r).map(|_| complex_normal(rng)).collect();
        Transmission::from_delay(generate_sequence(&pair), h, delay, 15e3)
    }

    #[test]
    fn synthesize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = synthesize_slot(3, 2, 4, 1e6, &[], false, &mut rng).unwrap();
        assert!(empty.y.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        assert_eq!(empty.slot, 3);

        let pair = RmPair::new(&[vec![1, 1], vec![1, 0]], &[1, 0]).unwrap();
        let cw = generate_sequence(&pair);
        let tx = Transmission {
            codeword: cw.clone(),
            channel: vec![Complex64::new(1.0, 0.0)],
            delta: 0.0,
            delay: 0.0,
        };
        let obs = synthesize_slot(0, 1, 2, 4.0, &[tx], false, &mut rng).unwrap();
        for n in 0..4 {
            assert_eq!(obs.y[[0, n]], cw.samples[n] * 2.0);
        }
    }

    #[test]
    fn synthesize_rejects_mismatched_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tx = random_tx(&mut rng, 4, 2, 0.0);
        assert!(synthesize_slot(0, 3, 4, 1.0, std::slice::from_ref(&tx), false, &mut rng).is_err());
        assert!(synthesize_slot(0, 2, 5, 1.0, &[tx], false, &mut rng).is_err());
    }

    #[test]
    fn noisy_synthesis_is_reproducible_with_unit_variance() {
        let a = synthesize_slot(0, 8, 8, 1.0, &[], true, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = synthesize_slot(0, 8, 8, 1.0, &[], true, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let power = a.y.iter().map(|v| v.norm_sqr()).sum::<f64>() / a.y.len() as f64;
        assert!((power - 1.0).abs() < 0.1, "power {power}");
    }

    #[test]
    fn oracle_matches_frequency_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [4, 5, 6] {
            let frame = FrameConfig::new(m, 2, 0).unwrap();
            let txs: Vec<Transmission> = (0..3)
                .map(|_| {
                    let tau = rng.random_range(0.0..frame.tau_max);
                    random_tx(&mut rng, m, 2, tau)
                })
                .collect();
            let freq = synthesize_slot(1, 2, m, 1e6, &txs, false, &mut rng).unwrap();
            let time = time_domain_oracle(1, 2, m, 1e6, &txs, &frame).unwrap();
            let err = frobenius(&(&freq.y - &time.y)) / freq.frobenius();
            assert!(err < 1e-9, "m={m} err={err}");
        }
    }

    #[test]
    fn oracle_zero_delay_and_cyclic_prefix() {
        let frame = FrameConfig::new(6, 6, 0).unwrap();
        assert_eq!(frame.cyclic_prefix(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tx = random_tx(&mut rng, 6, 1, 0.0);
        let freq = synthesize_slot(0, 1, 6, 1.0, std::slice::from_ref(&tx), false, &mut rng).unwrap();
        let time = time_domain_oracle(0, 1, 6, 1.0, std::slice::from_ref(&tx), &frame).unwrap();
        assert!(frobenius(&(&freq.y - &time.y)) < 1e-10 * freq.frobenius());

        let late = Transmission { delay: 2e-5, ..tx };
        assert!(matches!(
            time_domain_oracle(0, 1, 6, 1.0, &[late], &frame),
            Err(Error::DelayOutOfRange { .. })
        ));
    }
}
