//! Per-slot successive detection of RM-coded devices.
//!
//! Each pass peels one layer of the strongest sequence: correlate adjacent
//! subcarriers, Walsh-transform the products, read the off-diagonal column from
//! the peak position and the diagonal/vector bits from its phase, then fold the
//! slot down to half length. Layer `j` (counted from the top) sees the delay
//! phase `2^{j-1}Δ`, so every layer also yields a wrapped multiple of the delay
//! which the refinement step reconciles.

use std::f64::consts::PI;

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, AsArray, Axis, Ix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    expected_neighbors, frobenius, interference_power, phase_ramp, wrap_angle, GeometryConfig,
    SlotObservation,
};
use crate::codec::{binary_index, generate_sequence, walsh_factor, wht_in_place, RmPair, IOTA_POWERS};
use crate::error::{Error, Result};
use crate::pipeline::FrameConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Detections per slot at most.
    pub k_max: usize,
    /// Stop once the residual Frobenius norm drops to this level.
    pub epsilon: f64,
    /// Half-width of the delay refinement search, radians.
    pub refine_window: f64,
    /// Step of the delay refinement search, radians.
    pub refine_resolution: f64,
    /// Off for the synchronous scheme: all delays are taken as zero and the
    /// top layer carries payload bits.
    pub estimate_delay: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k_max: 1,
            epsilon: 0.0,
            refine_window: 0.1,
            refine_resolution: 1e-4,
            estimate_delay: true,
        }
    }
}

impl DetectorConfig {
    /// Iteration cap and stopping threshold derived from the scene statistics:
    /// `K_max = ⌈6K*/2^p · r^{1/4}⌉` and
    /// `ε = √(22 K^{-1/3} r^{-1/4} (σ² + r 2^m)) - d + 3(m - p)`.
    pub fn tuned(geometry: &GeometryConfig, frame: &FrameConfig) -> Self {
        let r = geometry.antennas as f64;
        let k_star = expected_neighbors(geometry);
        let k_max = (6.0 * k_star / frame.slots() as f64 * r.powf(0.25)).ceil().max(1.0) as usize;
        let k = geometry.mean_devices().max(1.0);
        let energy = interference_power(geometry) + r * frame.subcarriers() as f64;
        let epsilon = (22.0 * k.powf(-1.0 / 3.0) * r.powf(-0.25) * energy).sqrt() - frame.d as f64
            + 3.0 * (frame.m as f64 - frame.p as f64);
        Self {
            k_max,
            epsilon: epsilon.max(0.0),
            estimate_delay: !frame.is_synchronous(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0
            || !(self.epsilon >= 0.0)
            || !(self.refine_resolution > 0.0)
            || !(self.refine_window >= 0.0)
        {
            return Err(Error::InvalidConfig(format!("detector settings out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub pair: RmPair,
    /// Channel estimate including the `√γ` transmit scale.
    pub h_hat: Vec<Complex64>,
    pub delta_hat: f64,
    /// Wrapped per-layer estimates of `2^{l-1}Δ`, top layer first.
    pub delta_components: Vec<f64>,
    pub residual_before: f64,
    pub residual_after: f64,
}

/// `Ỹ[n] = Σ_l Y[l][2n+1] conj(Y[l][2n])` over the antennas.
pub fn correlate_layer<'a, V: AsArray<'a, Complex64, Ix2>>(y: V) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    correlate_into(y.into(), &mut out)?;
    Ok(out)
}

fn correlate_into(y: ArrayView2<Complex64>, out: &mut Vec<Complex64>) -> Result<()> {
    let cols = y.ncols();
    if cols < 2 || !cols.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "layer correlation needs an even column count, got {cols}"
        )));
    }
    out.clear();
    out.resize(cols / 2, Complex64::new(0.0, 0.0));
    for row in y.rows() {
        for (n, acc) in out.iter_mut().enumerate() {
            *acc += row[2 * n + 1] * row[2 * n].conj();
        }
    }
    Ok(())
}

/// Index of the largest magnitude (first one on ties) as a bit vector, and the value there.
pub fn peak_search(t: &[Complex64]) -> Result<(Vec<u8>, Complex64)> {
    if t.is_empty() || !t.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(t.len()));
    }
    let mut best = 0;
    let mut best_mag = t[0].norm_sqr();
    for (k, v) in t.iter().enumerate().skip(1) {
        let mag = v.norm_sqr();
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    let bits = t.len().trailing_zeros() as usize;
    Ok((binary_index(best, bits)?, t[best]))
}

/// `(−1)^{b + β/2}` for the decided pair of bits.
pub fn polarity_point(b: u8, beta: u8) -> Complex64 {
    IOTA_POWERS[((2 * b + beta) & 3) as usize]
}

/// Slices the phase-compensated peak to the nearest of `{1, ι, −1, −ι}` and
/// returns `(b, β, Δ component)` with the component read off the raw peak.
pub fn decode_polarity(peak: Complex64, phase_comp: f64) -> Result<(u8, u8, f64)> {
    if peak.norm_sqr() == 0.0 || !peak.is_finite() {
        return Err(Error::AmbiguousPolarity);
    }
    let rotated = peak * Complex64::cis(phase_comp);
    let quadrant = ((rotated.arg() / (PI / 2.0)).round() as i64).rem_euclid(4);
    let (b, beta) = match quadrant {
        0 => (0, 0),
        1 => (0, 1),
        2 => (1, 0),
        _ => (1, 1),
    };
    let component = wrap_angle(-(peak * polarity_point(b, beta).conj()).arg());
    Ok((b, beta, component))
}

/// `Y'[l][n] = ½(e^{-iΔ̂} Y[l][2n] + conj(V̂[n]) Y[l][2n+1])`.
pub fn fold_layer<'a, V: AsArray<'a, Complex64, Ix2>>(
    y: V,
    factor: &[Complex64],
    delta_layer: f64,
) -> Result<Array2<Complex64>> {
    let y = y.into();
    let mut out = Array2::zeros((y.nrows(), factor.len()));
    fold_into(y, factor, delta_layer, out.view_mut())?;
    Ok(out)
}

fn fold_into(
    y: ArrayView2<Complex64>,
    factor: &[Complex64],
    delta_layer: f64,
    mut out: ArrayViewMut2<Complex64>,
) -> Result<()> {
    if y.ncols() != 2 * factor.len() || out.dim() != (y.nrows(), factor.len()) {
        return Err(Error::DimensionMismatch(format!(
            "fold of {} columns with a factor of length {}",
            y.ncols(),
            factor.len()
        )));
    }
    let rot = Complex64::cis(-delta_layer) * 0.5;
    for (src, mut dst) in y.rows().into_iter().zip(out.rows_mut()) {
        for ((n, d), v) in dst.iter_mut().enumerate().zip(factor) {
            *d = rot * src[2 * n] + v.conj() * 0.5 * src[2 * n + 1];
        }
    }
    Ok(())
}

/// Last layer: bits `(b₁, β₁)`, the top delay component and the channel.
pub fn estimate_final<'a, V: AsArray<'a, Complex64, Ix2>>(
    y1: V,
    delta_prev: f64,
    estimate_delay: bool,
) -> Result<(u8, u8, f64, Vec<Complex64>)> {
    let y1: ArrayView2<Complex64> = y1.into();
    if y1.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "final layer needs 2 columns, got {}",
            y1.ncols()
        )));
    }
    let first = y1.column(0);
    let second = y1.column(1);
    let corr: Complex64 = second.iter().zip(first.iter()).map(|(a, b)| a * b.conj()).sum();
    let comp = if estimate_delay { 2.0 * delta_prev } else { 0.0 };
    let (b, beta, component) = decode_polarity(corr, comp)?;
    let delta_m = if estimate_delay { component } else { 0.0 };
    let point = polarity_point(b, beta).conj();
    let e1 = Complex64::cis(delta_m);
    let e2 = point * Complex64::cis(2.0 * delta_m);
    let h_hat = first
        .iter()
        .zip(second.iter())
        .map(|(y_a, y_b)| 0.5 * (y_a * e1 + e2 * y_b))
        .collect();
    Ok((b, beta, delta_m, h_hat))
}

/// Offset `e` within `±refine_window` that best explains all wrapped layer
/// components as multiples of `Δ̂₁ - e`, in the wrap-aware squared sense.
/// Returns `Δ̂₁ - e`.
///
/// The cost is piecewise quadratic in `e`, with a break wherever one layer's
/// residual wraps, so each piece is minimized in closed form. This gives the
/// exact minimizer over the window at a cost proportional to the number of
/// wraps (about `2^m` times the window) instead of a fixed-step scan; see
/// [`refine_delay_grid`] for the scan.
pub fn refine_delay(components: &[f64], cfg: &DetectorConfig) -> f64 {
    let Some(&coarse) = components.first() else {
        return 0.0;
    };
    let w = cfg.refine_window;
    let mut cuts = vec![-w, w];
    for (l, &phi) in components.iter().enumerate() {
        let s = scale(l);
        let lo = s * (coarse - w) - phi;
        let hi = s * (coarse + w) - phi;
        let first = ((lo - PI) / (2.0 * PI)).ceil() as i64;
        let last = ((hi - PI) / (2.0 * PI)).floor() as i64;
        for k in first..=last {
            let e = coarse - (phi + PI * (2 * k + 1) as f64) / s;
            if e > -w && e < w {
                cuts.push(e);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let den: f64 = (0..components.len()).map(|l| scale(l).powi(2)).sum();
    let mut best = (refinement_cost(components, coarse, 0.0), 0.0);
    let mut offsets = vec![0.0; components.len()];
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let mid = 0.5 * (a + b);
        let mut num = 0.0;
        for (l, (&phi, t)) in components.iter().zip(offsets.iter_mut()).enumerate() {
            let s = scale(l);
            let arg = s * (coarse - mid) - phi;
            *t = s * coarse - phi - 2.0 * PI * (arg / (2.0 * PI)).round();
            num += s * *t;
        }
        let e = (num / den).clamp(a, b);
        let cost: f64 = offsets
            .iter()
            .enumerate()
            .map(|(l, t)| (t - scale(l) * e).powi(2))
            .sum();
        if cost < best.0 {
            best = (cost, e);
        }
    }
    wrap_angle(coarse - best.1)
}

/// Fixed-step scan of the same cost over `e = k · refine_resolution` within
/// the window. Kept as a reference for [`refine_delay`].
pub fn refine_delay_grid(components: &[f64], cfg: &DetectorConfig) -> f64 {
    let Some(&coarse) = components.first() else {
        return 0.0;
    };
    let steps = (cfg.refine_window / cfg.refine_resolution).floor() as i64;
    let mut best = (f64::INFINITY, 0.0);
    for k in -steps..=steps {
        let e = k as f64 * cfg.refine_resolution;
        let cost = refinement_cost(components, coarse, e);
        if cost < best.0 {
            best = (cost, e);
        }
    }
    wrap_angle(coarse - best.1)
}

/// `Σ_l wrap(2^l (Δ̂₁ - e) - Δ̂_l)²`
pub fn refinement_cost(components: &[f64], coarse: f64, e: f64) -> f64 {
    components
        .iter()
        .enumerate()
        .map(|(l, &c)| wrap_angle(scale(l) * (coarse - e) - c).powi(2))
        .sum()
}

fn scale(layer: usize) -> f64 {
    (1u64 << layer) as f64
}

/// Subtracts `h ⊗ (X ⊙ e^{-iΔn})` from `y` in place.
pub fn subtract_component(
    y: &mut Array2<Complex64>,
    pair: &RmPair,
    h: &[Complex64],
    delta: f64,
) -> Result<()> {
    if y.ncols() != pair.len() || y.nrows() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "cancel of an order-{} sequence over {} antennas from a {}x{} slot",
            pair.order(),
            h.len(),
            y.nrows(),
            y.ncols()
        )));
    }
    let ramp = phase_ramp(delta, pair.len());
    let wave: Vec<Complex64> = generate_sequence(pair)
        .samples
        .iter()
        .zip(&ramp)
        .map(|(x, e)| x * e)
        .collect();
    for (mut row, hl) in y.axis_iter_mut(Axis(0)).zip(h) {
        for (v, w) in row.iter_mut().zip(&wave) {
            *v -= hl * w;
        }
    }
    Ok(())
}

pub fn cancel(obs: &SlotObservation, det: &Detection) -> Result<SlotObservation> {
    let mut out = obs.clone();
    subtract_component(&mut out.y, &det.pair, &det.h_hat, det.delta_hat)?;
    Ok(out)
}

/// Estimates the strongest sequence in `y` without cancelling it.
/// The residual fields hold `‖y‖_F` before and after its removal.
pub fn detect_strongest(y: &Array2<Complex64>, cfg: &DetectorConfig) -> Result<Detection> {
    let mut residual = y.clone();
    SlotDetector::new(cfg, y.nrows(), y.ncols())?.step(&mut residual)
}

/// Detection passes over one slot with layer buffers reused between passes.
pub struct SlotDetector<'a> {
    cfg: &'a DetectorConfig,
    m: usize,
    ping: Array2<Complex64>,
    pong: Array2<Complex64>,
    corr: Vec<Complex64>,
}

impl<'a> SlotDetector<'a> {
    /// Detector for `antennas x subcarriers` slots.
    pub fn new(cfg: &'a DetectorConfig, antennas: usize, subcarriers: usize) -> Result<Self> {
        if subcarriers < 4 || !subcarriers.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(subcarriers));
        }
        Ok(Self {
            cfg,
            m: subcarriers.trailing_zeros() as usize,
            ping: Array2::zeros((antennas, subcarriers / 2)),
            pong: Array2::zeros((antennas, subcarriers / 2)),
            corr: Vec::with_capacity(subcarriers / 2),
        })
    }

    /// Estimates the strongest sequence in `y` and subtracts it in place.
    pub fn step(&mut self, y: &mut Array2<Complex64>) -> Result<Detection> {
        if y.dim() != (self.ping.nrows(), 2 * self.ping.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} slot given to a detector for {}x{}",
                y.nrows(),
                y.ncols(),
                self.ping.nrows(),
                2 * self.ping.ncols()
            )));
        }
        let residual_before = frobenius(y);
        let (pair, h_hat, delta_hat, delta_components) = self.estimate(y.view())?;
        subtract_component(y, &pair, &h_hat, delta_hat)?;
        Ok(Detection {
            pair,
            h_hat,
            delta_hat,
            delta_components,
            residual_before,
            residual_after: frobenius(y),
        })
    }

    fn estimate(
        &mut self,
        y: ArrayView2<Complex64>,
    ) -> Result<(RmPair, Vec<Complex64>, f64, Vec<f64>)> {
        let cfg = self.cfg;
        let m = self.m;
        let mut pair = RmPair::zero(m)?;
        let mut components = Vec::with_capacity(m);
        let mut len = 1usize << m;
        for s in (2..=m).rev() {
            let src = if s == m { y } else { self.ping.slice(s![.., ..len]) };
            correlate_into(src, &mut self.corr)?;
            wht_in_place(&mut self.corr)?;
            let (eta, peak) = peak_search(&self.corr)?;
            let (b, beta, component) = if !cfg.estimate_delay {
                let (b, beta, _) = decode_polarity(peak, 0.0)?;
                (b, beta, 0.0)
            } else if s == m {
                if peak.norm_sqr() == 0.0 {
                    return Err(Error::AmbiguousPolarity);
                }
                (0, 0, wrap_angle(-peak.arg()))
            } else {
                let prev = components[components.len() - 1];
                decode_polarity(peak, 2.0 * prev)?
            };
            for (i, &bit) in eta.iter().enumerate() {
                pair.set_p(i, s - 1, bit);
            }
            pair.set_p(s - 1, s - 1, beta);
            pair.set_b(s - 1, b);
            components.push(component);
            let eta_mask = eta.iter().fold(0usize, |acc, &x| (acc << 1) | x as usize);
            let factor = walsh_factor(eta_mask, s, b, beta);
            len /= 2;
            fold_into(src, &factor, component, self.pong.slice_mut(s![.., ..len]))?;
            std::mem::swap(&mut self.ping, &mut self.pong);
        }
        let prev = components.last().copied().unwrap_or(0.0);
        let (b1, beta1, delta_m, h_hat) =
            estimate_final(self.ping.slice(s![.., ..2]), prev, cfg.estimate_delay)?;
        pair.set_b(0, b1);
        pair.set_p(0, 0, beta1);
        components.push(delta_m);
        let delta_hat = if cfg.estimate_delay {
            refine_delay(&components, cfg)
        } else {
            0.0
        };
        Ok((pair, h_hat, delta_hat, components))
    }
}

/// Successive detection and cancellation in one slot.
///
/// Stops when the residual falls to `ε`, after `K_max` detections, when an
/// estimate is ambiguous, or when cancelling the latest estimate would raise
/// the residual (that estimate is discarded).
pub fn find_pb(obs: &SlotObservation, cfg: &DetectorConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let mut detector = SlotDetector::new(cfg, obs.antennas(), obs.subcarriers())?;
    // the working copy is dropped on exit, so a rejected step needs no undo
    let mut y = obs.y.clone();
    let mut found = Vec::new();
    let mut norm = frobenius(&y);
    while norm > cfg.epsilon && found.len() < cfg.k_max {
        let Ok(det) = detector.step(&mut y) else {
            break;
        };
        if det.residual_after >= norm {
            break;
        }
        norm = det.residual_after;
        found.push(det);
    }
    Ok(found)
}
