//! Acceptance checks shared by the `verify` command and the acceptance tests.
//!
//! Each check returns a [`CriterionReport`]; tolerances are fixed here and not
//! configurable.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    classify_neighbors, complex_normal, expected_neighbors, frobenius, sample_frame,
    synthesize_slot, time_domain_oracle, wrap_angle, GeometryConfig, Transmission,
};
use crate::codec::{
    generate_sequence, pack_bits, pair_bits, subsequence_factor, unpack_bits, wht, BitLayout,
    BitPos, RmPair,
};
use crate::detector::{find_pb, fold_layer, DetectorConfig};
use crate::error::Result;
use crate::pipeline::{tree_decode, tree_encode, FrameConfig, ParityMap, DEFAULT_PATH_CAP};
use crate::sim::{run_point, scaling_bench, BenchConfig, ExperimentSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} [{}] {verdict}: {}", self.id, self.name, self.detail)
    }
}

fn report(id: usize, name: &'static str, passed: bool, detail: String) -> CriterionReport {
    CriterionReport {
        id,
        name,
        passed,
        detail,
    }
}

/// Names in criterion order.
pub const CRITERIA: [&str; 9] = [
    "geometry closed forms",
    "oracle equivalence",
    "codec properties",
    "detector round trip",
    "fold noise halving",
    "operating point",
    "antenna gain trend",
    "tree code",
    "decoder scaling",
];

pub fn run_criterion(id: usize) -> Result<CriterionReport> {
    match id {
        1 => geometry_closed_forms(),
        2 => oracle_equivalence(),
        3 => codec_properties(),
        4 => detector_round_trip(),
        5 => fold_noise_halving(),
        6 => operating_point(),
        7 => antenna_trend(),
        8 => tree_code(),
        9 => decoder_scaling(),
        _ => Err(crate::Error::InvalidConfig(format!("no criterion {id}"))),
    }
}

/// Closed-form neighbor counts at 4000 devices/km² and their Monte Carlo check.
pub fn geometry_closed_forms() -> Result<CriterionReport> {
    let frames = 1000;
    let frame = FrameConfig::new(4, 1, 0)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (r, pinned) in [(1usize, 11.1), (16, 12.5)] {
        let cfg = GeometryConfig::reference(1000.0, r);
        let closed = expected_neighbors(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r as u64);
        let mut total = 0usize;
        for _ in 0..frames {
            let devices = sample_frame(&cfg, &frame, &mut rng)?;
            total += classify_neighbors(&devices, &cfg).0.len();
        }
        let mc = total as f64 / frames as f64;
        let rel = (mc - closed).abs() / closed;
        ok &= (closed - pinned).abs() <= 0.05 && rel <= 0.05;
        detail.push(format!(
            "r={r}: K*={closed:.3} (rounds to {}), MC {mc:.3} over {frames} frames ({:.2}% off)",
            closed.round(),
            100.0 * rel
        ));
    }
    Ok(report(1, CRITERIA[0], ok, detail.join("; ")))
}

/// Frequency-domain slot model against the sampled OFDM waveform.
pub fn oracle_equivalence() -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst = 0.0f64;
    for scene in 0..100 {
        let m = 5 + scene % 2;
        let frame = FrameConfig::new(m, 2, 0)?;
        let r = rng.random_range(1..=4);
        let count = rng.random_range(1..=4);
        let txs: Vec<Transmission> = (0..count)
            .map(|_| {
                let pair = random_pair(&mut rng, m);
                let delay = rng.random_range(0.0..=frame.tau_max);
                let h = (0..r).map(|_| complex_normal(&mut rng)).collect();
                Transmission::from_delay(generate_sequence(&pair), h, delay, frame.subcarrier_spacing)
            })
            .collect();
        let freq = synthesize_slot(0, r, m, 1e6, &txs, false, &mut rng)?;
        let time = time_domain_oracle(0, r, m, 1e6, &txs, &frame)?;
        worst = worst.max(frobenius(&(&freq.y - &time.y)) / freq.frobenius());
    }
    Ok(report(
        2,
        CRITERIA[1],
        worst <= 1e-9,
        format!("worst relative Frobenius error {worst:.2e} over 100 scenes (limit 1e-9)"),
    ))
}

fn random_pair(rng: &mut ChaCha8Rng, m: usize) -> RmPair {
    let mut pair = RmPair::zero(m).expect("order in range");
    for i in 0..m {
        pair.set_b(i, rng.random_range(0..2));
        for j in i..m {
            pair.set_p(i, j, rng.random_range(0..2));
        }
    }
    pair
}

/// Layer recursion, transform involution and exhaustive packing at order 4.
pub fn codec_properties() -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut recursion_failures = 0;
    for _ in 0..10_000 {
        let m = rng.random_range(2..=10);
        let pair = random_pair(&mut rng, m);
        let s = rng.random_range(2..=m);
        let top = generate_sequence(&pair.truncate(s)?);
        let child = generate_sequence(&pair.truncate(s - 1)?);
        let (factor, _) = subsequence_factor(&pair, s)?;
        let holds = (0..child.len()).all(|n| {
            top.samples[2 * n] == child.samples[n]
                && top.samples[2 * n + 1] == factor[n] * child.samples[n]
        });
        recursion_failures += usize::from(!holds);
    }

    let mut worst_wht = 0.0f64;
    for _ in 0..200 {
        let len = 1usize << rng.random_range(1..=10);
        let x: Vec<Complex64> = (0..len).map(|_| complex_normal(&mut rng)).collect();
        let back: Vec<Complex64> = wht(&wht(&x)?)?.iter().map(|v| v / len as f64).collect();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        worst_wht = worst_wht.max(err / norm);
    }

    // every order-4 pair maps to distinct fields and back
    let m = 4;
    let mut pack_failures = 0;
    let mut layouts = vec![BitLayout::synchronous(m, 2)?];
    for p in 0..=m * (m - 1) / 2 {
        layouts.push(BitLayout::asynchronous(m, p)?);
    }
    let positions: Vec<BitPos> = (0..m)
        .map(BitPos::B)
        .chain((0..m).flat_map(|i| (i..m).map(move |j| BitPos::P(i, j))))
        .collect();
    for layout in &layouts {
        for word in 0u32..1 << pair_bits(m) {
            let mut pair = RmPair::zero(m)?;
            for (k, pos) in positions.iter().enumerate() {
                pos.write(&mut pair, ((word >> k) & 1) as u8);
            }
            let fields = unpack_bits(&pair, layout)?;
            if fields.reserved_violation {
                continue;
            }
            let back = pack_bits(&fields.payload, &fields.translate, fields.is_secondary, layout)?;
            pack_failures += usize::from(back != pair);
        }
    }
    let ok = recursion_failures == 0 && worst_wht <= 1e-12 && pack_failures == 0;
    Ok(report(
        3,
        CRITERIA[2],
        ok,
        format!(
            "recursion failures {recursion_failures}/10000, WHT involution error {worst_wht:.1e}, \
             pack/unpack mismatches {pack_failures} over {} order-4 layouts",
            layouts.len()
        ),
    ))
}

/// Noise-free single-device detection over orders 4..=10 and a 64-point delay grid.
pub fn detector_round_trip() -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let cfg = DetectorConfig {
        k_max: 1,
        ..DetectorConfig::default()
    };
    let gamma: f64 = 1e6;
    let (mut bit_errors, mut worst_delay, mut worst_gain, mut cases) = (0, 0.0f64, 0.0f64, 0);
    for m in 4..=10 {
        for k in 0..64 {
            let delta = -PI + 2.0 * PI * k as f64 / 64.0;
            let mut pair = random_pair(&mut rng, m);
            pair.set_b(m - 1, 0);
            pair.set_p(m - 1, m - 1, 0);
            let h: Vec<Complex64> = (0..4).map(|_| complex_normal(&mut rng) * 1e-3).collect();
            let tx = Transmission {
                codeword: generate_sequence(&pair),
                channel: h.clone(),
                delta,
                delay: 0.0,
            };
            let obs = synthesize_slot(0, 4, m, gamma, &[tx], false, &mut rng)?;
            let found = find_pb(&obs, &cfg)?;
            cases += 1;
            let Some(det) = found.first() else {
                bit_errors += 1;
                continue;
            };
            bit_errors += usize::from(det.pair != pair);
            worst_delay = worst_delay.max(wrap_angle(det.delta_hat - delta).abs());
            let scaled: Vec<Complex64> = h.iter().map(|v| v * gamma.sqrt()).collect();
            let err: f64 = det.h_hat.iter().zip(&scaled).map(|(a, b)| (a - b).norm_sqr()).sum();
            let norm: f64 = scaled.iter().map(|v| v.norm_sqr()).sum();
            worst_gain = worst_gain.max((err / norm).sqrt());
        }
    }
    let ok = bit_errors == 0 && worst_delay <= 1e-3 && worst_gain <= 1e-2;
    Ok(report(
        4,
        CRITERIA[3],
        ok,
        format!(
            "{bit_errors} bit errors in {cases} cases, worst delay error {worst_delay:.1e} rad, \
             worst channel error {worst_gain:.1e}"
        ),
    ))
}

/// Per-entry noise variance after `j` folds is `2^{-j}` within 10%.
pub fn fold_noise_halving() -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let m = 6;
    let draws = 10_000;
    let mut sums = vec![0.0; m - 1];
    let mut counts = vec![0usize; m - 1];
    for _ in 0..draws {
        let mut y = ndarray::Array2::from_shape_fn((1, 1 << m), |_| complex_normal(&mut rng));
        for j in 0..m - 1 {
            let half = y.ncols() / 2;
            let factor: Vec<Complex64> = (0..half)
                .map(|_| crate::codec::IOTA_POWERS[rng.random_range(0..4)])
                .collect();
            y = fold_layer(&y, &factor, rng.random_range(-PI..PI))?;
            sums[j] += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            counts[j] += y.len();
        }
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for j in 0..m - 1 {
        let var = sums[j] / counts[j] as f64;
        let want = 0.5f64.powi(j as i32 + 1);
        ok &= (var / want - 1.0).abs() <= 0.1;
        detail.push(format!("{} folds {:.4} (want {want:.4})", j + 1, var));
    }
    Ok(report(5, CRITERIA[4], ok, detail.join(", ")))
}

/// Reference frame at 1000 devices and 16 antennas: miss and FA at most 0.05.
pub fn operating_point() -> Result<CriterionReport> {
    let mut spec = ExperimentSpec::reference(vec![1000.0], vec![16], 6, 6, 0);
    spec.trials = 40;
    let point = &spec.points()?[0];
    let (s, _) = run_point(point, 6, spec.trials)?;
    let miss = s.miss_mean.unwrap_or(0.0);
    let ok = s.info_bits == 30 && s.codelength == 4736 && miss <= 0.05 && s.fa_mean <= 0.05;
    Ok(report(
        6,
        CRITERIA[5],
        ok,
        format!(
            "B={} C={} over {} trials: miss {miss:.4} (se {:.4}), FA {:.4} (se {:.4}), limit 0.05",
            s.info_bits,
            s.codelength,
            s.trials,
            s.miss_se.unwrap_or(0.0),
            s.fa_mean,
            s.fa_se
        ),
    ))
}

/// At 2000 devices both error rates drop from 1 to 16 antennas.
pub fn antenna_trend() -> Result<CriterionReport> {
    let mut spec = ExperimentSpec::reference(vec![2000.0], vec![1, 16], 6, 6, 0);
    spec.trials = 20;
    let points = spec.points()?;
    let (one, _) = run_point(&points[0], 7, spec.trials)?;
    let (sixteen, _) = run_point(&points[1], 7, spec.trials)?;
    let (m1, m16) = (one.miss_mean.unwrap_or(0.0), sixteen.miss_mean.unwrap_or(0.0));
    let ok = m16 < m1 && sixteen.fa_mean < one.fa_mean;
    Ok(report(
        7,
        CRITERIA[6],
        ok,
        format!(
            "r=1: miss {m1:.4} FA {:.4}; r=16: miss {m16:.4} FA {:.4} ({} trials each)",
            one.fa_mean, sixteen.fa_mean, spec.trials
        ),
    ))
}

/// Lossless stitching for 2 and 4 sub-blocks and a resolved ambiguity.
pub fn tree_code() -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut failures = 0;
    let mut cases = 0;
    for d in 1..=2 {
        let cfg = FrameConfig::new(6, 6, d)?;
        for _ in 0..200 {
            let info: Vec<u8> = (0..cfg.info_bits()).map(|_| rng.random_range(0..2)).collect();
            let lists: Vec<Vec<Vec<u8>>> = tree_encode(&info, &cfg)?.into_iter().map(|s| vec![s]).collect();
            let out = tree_decode(&lists, &cfg, DEFAULT_PATH_CAP)?;
            failures += usize::from(out.messages != vec![(info, 0)]);
            cases += 1;
        }
    }
    // two candidates per sub-block, only one parity-consistent pairing
    let cfg = FrameConfig::new(6, 6, 1)?;
    let map = ParityMap::new(&cfg)?;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<u8> { (0..cfg.info_bits()).map(|_| rng.random_range(0..2)).collect() };
    let a = map.encode(&draw(&mut rng))?;
    let b = map.encode(&draw(&mut rng))?;
    let mut stray = b[1].clone();
    let len = stray.len();
    for bit in &mut stray[len - 4..] {
        *bit ^= 1;
    }
    let lists = vec![vec![b[0].clone(), a[0].clone()], vec![a[1].clone(), stray]];
    let resolved = tree_decode(&lists, &cfg, DEFAULT_PATH_CAP)?.messages.len();
    let ok = failures == 0 && resolved == 1;
    Ok(report(
        8,
        CRITERIA[7],
        ok,
        format!("{failures} failures in {cases} round trips; ambiguity case yields {resolved} message(s)"),
    ))
}

/// Detector time growth in `m` against the operation-count model, 1.5x band.
pub fn decoder_scaling() -> Result<CriterionReport> {
    let report_data = scaling_bench(&BenchConfig::default())?;
    let ratios: Vec<String> = report_data
        .m_ratios()
        .iter()
        .map(|(m, got, want)| format!("{}->{m}: {got:.2} vs {want:.2}", m - 1))
        .collect();
    Ok(report(
        9,
        CRITERIA[8],
        report_data.within_band(1.5),
        format!(
            "time ratios vs model {}; fitted exponent {:.2}",
            ratios.join(", "),
            report_data.m_exponent()
        ),
    ))
}
