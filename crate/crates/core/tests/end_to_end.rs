use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rmaccess::channel::{classify_neighbors, sample_frame, synthesize_frame, GeometryConfig};
use rmaccess::detector::DetectorConfig;
use rmaccess::pipeline::{
    decode_frame, error_metrics, tree_decode, tree_encode, DecodeOptions, FrameConfig, DEFAULT_PATH_CAP,
};
use rmaccess::sim::{run_point, ExperimentSpec};

/// A handful of strong devices in a small square, no noise.
fn sparse_geometry(antennas: usize) -> GeometryConfig {
    GeometryConfig {
        intensity: 4.0 / (40.0 * 40.0),
        side: 40.0,
        ..GeometryConfig::reference(1000.0, antennas)
    }
}

#[test]
fn noiseless_sparse_frames_decode() {
    for (frame, label) in [
        (FrameConfig::new(6, 6, 0).unwrap(), "async d=0"),
        (FrameConfig::new(6, 6, 1).unwrap(), "async d=1"),
        (FrameConfig::synchronous(6, 6, 0).unwrap(), "sync"),
    ] {
        let geometry = sparse_geometry(4);
        let det = DetectorConfig {
            k_max: 3,
            // stop before fitting floating-point dust left by exact cancellation
            epsilon: 1e-6,
            estimate_delay: !frame.is_synchronous(),
            ..DetectorConfig::default()
        };
        let opts = DecodeOptions {
            neighbor_gain: Some(geometry.gamma * 4.0 * geometry.theta),
            ..DecodeOptions::default()
        };
        let (mut sent, mut found) = (0, 0);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let devices = sample_frame(&geometry, &frame, &mut rng).unwrap();
            let (inside, _) = classify_neighbors(&devices, &geometry);
            let truth: Vec<Vec<u8>> = inside.iter().map(|&k| devices[k].message.clone()).collect();
            let obs = synthesize_frame(&devices, &geometry, &frame, false, &mut rng).unwrap();
            let out = decode_frame(&obs, &det, &frame, &opts).unwrap();
            let bits: Vec<Vec<u8>> = out.messages.into_iter().map(|m| m.bits).collect();
            let metrics = error_metrics(&bits, &truth);
            assert_eq!(metrics.false_alarms, 0, "{label} seed {seed}");
            sent += metrics.truth;
            found += metrics.truth - metrics.missed;
        }
        assert!(sent > 20, "{label}");
        assert!(found as f64 >= 0.9 * sent as f64, "{label}: {found}/{sent}");
    }
}

#[test]
fn delay_estimation_must_match_the_frame() {
    let frame = FrameConfig::synchronous(5, 2, 0).unwrap();
    let geometry = sparse_geometry(1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let devices = sample_frame(&geometry, &frame, &mut rng).unwrap();
    let obs = synthesize_frame(&devices, &geometry, &frame, false, &mut rng).unwrap();
    let err = decode_frame(&obs, &DetectorConfig::default(), &frame, &DecodeOptions::default());
    assert!(err.is_err());
}

#[test]
fn trial_results_do_not_depend_on_thread_count() {
    let mut spec = ExperimentSpec::reference(vec![300.0], vec![4], 6, 4, 0);
    spec.trials = 4;
    let point = &spec.points().unwrap()[0];
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (a, ra) = serial.install(|| run_point(point, 11, spec.trials)).unwrap();
    let (b, rb) = run_point(point, 11, spec.trials).unwrap();
    assert_eq!(a, b);
    let strip = |r: &[rmaccess::sim::TrialRecord]| {
        r.iter()
            .map(|t| (t.active, t.neighbors, t.decoded, t.miss, t.false_alarm))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&ra), strip(&rb));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_round_trip(bits in proptest::collection::vec(0u8..2, 120), d in 0usize..3) {
        let cfg = FrameConfig::new(6, 6, d).unwrap();
        let info = &bits[..cfg.info_bits()];
        let lists: Vec<Vec<Vec<u8>>> = tree_encode(info, &cfg).unwrap().into_iter().map(|s| vec![s]).collect();
        let out = tree_decode(&lists, &cfg, DEFAULT_PATH_CAP).unwrap();
        prop_assert_eq!(out.messages, vec![(info.to_vec(), 0)]);
    }

    #[test]
    fn metric_rates_are_bounded(
        truth in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 0..6),
        decoded in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 0..6),
    ) {
        let m = error_metrics(&decoded, &truth);
        prop_assert!((0.0..=1.0).contains(&m.false_alarm));
        if let Some(miss) = m.miss {
            prop_assert!((0.0..=1.0).contains(&miss));
        }
        prop_assert_eq!(m.miss.is_none(), truth.is_empty());
    }
}
