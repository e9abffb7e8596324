use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::acoustic::BLANK;

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn cfg(tau: f64, gain: f64, k: usize) -> EmitterConfig {
    EmitterConfig {
        temperature: tau,
        gain,
        durations: Durations::Fixed(k),
        seed: 7,
    }
}

fn ctc_target() -> EmissionTarget {
    EmissionTarget::new(names(&[BLANK, "a", "b", "c"]), Layout::Ctc).unwrap()
}

#[test]
fn fixed_and_table_durations() {
    assert_eq!(
        sample_durations(&["a", "b", "c"], &cfg(0.0, 1.0, 2)).unwrap(),
        [2, 2, 2]
    );
    let table = EmitterConfig {
        durations: Durations::Table {
            frames: BTreeMap::from([("a".to_owned(), 1), ("b".to_owned(), 3)]),
            default: 2,
        },
        ..EmitterConfig::default()
    };
    assert_eq!(sample_durations(&["a", "b"], &table).unwrap(), [1, 3]);
    assert_eq!(sample_durations(&["c"], &table).unwrap(), [2]);
    assert!(sample_durations::<&str>(&[], &table).is_err());
    assert!(sample_durations(&["a"], &cfg(0.0, 1.0, 0)).is_err());
    assert!(cfg(-1.0, 1.0, 1).validate().is_err());
    assert!(cfg(f64::NAN, 1.0, 1).validate().is_err());
}

#[test]
fn noise_free_high_gain_is_one_hot() {
    let target = EmissionTarget::new(names(&["a", "b", "c"]), Layout::Repeat).unwrap();
    let pg = synth_posteriorgram(&target, &["b", "a"], &cfg(0.0, 50.0, 2), 0).unwrap();
    assert_eq!(pg.num_frames(), 4);
    for (t, want) in [1, 1, 0, 0].into_iter().enumerate() {
        assert!(pg.log_prob(t, want).exp() >= 1.0 - 1e-6);
    }
}

#[test]
fn zero_gain_zero_temperature_is_uniform() {
    let pg = synth_posteriorgram(&ctc_target(), &["a", "c"], &cfg(0.0, 0.0, 3), 0).unwrap();
    for t in 0..pg.num_frames() {
        for l in 0..4 {
            assert!((pg.log_prob(t, l).exp() - 0.25).abs() < 1e-7);
        }
    }
}

#[test]
fn ctc_and_transducer_layouts() {
    let pg = synth_posteriorgram(&ctc_target(), &["a", "b"], &cfg(0.0, 50.0, 2), 0).unwrap();
    let argmax: Vec<usize> = (0..pg.num_frames())
        .map(|t| {
            (0..4)
                .max_by(|&i, &j| pg.log_prob(t, i).total_cmp(&pg.log_prob(t, j)))
                .unwrap()
        })
        .collect();
    assert_eq!(argmax, [1, 0, 2, 0]);
    // a a with single frames would collapse under CTC
    assert!(synth_posteriorgram(&ctc_target(), &["a", "a"], &cfg(0.0, 50.0, 1), 0).is_err());
    let rnnt = EmissionTarget::new(names(&[BLANK, "a"]), Layout::Transducer).unwrap();
    assert_eq!(
        synth_posteriorgram(&rnnt, &["a", "a"], &cfg(0.0, 50.0, 1), 0)
            .unwrap()
            .num_frames(),
        2
    );
    assert!(synth_posteriorgram(&ctc_target(), &[BLANK], &cfg(0.0, 50.0, 1), 0).is_err());
    assert!(synth_posteriorgram(&ctc_target(), &["z"], &cfg(0.0, 50.0, 1), 0).is_err());
    assert!(EmissionTarget::new(names(&["a"]), Layout::Ctc).is_err());
}

#[test]
fn label_sync_layout_appends_end_row() {
    let target = EmissionTarget::new(names(&["x</w>", "y</w>", EOS]), Layout::LabelSync).unwrap();
    let pg = synth_posteriorgram(&target, &["y</w>", "x</w>"], &cfg(0.0, 50.0, 5), 0).unwrap();
    assert_eq!(pg.num_frames(), 3);
    assert!(pg.log_prob(2, 2).exp() > 0.999);
}

#[test]
fn same_seed_same_output_other_stream_differs() {
    let c = cfg(1.5, 3.0, 2);
    let a = synth_posteriorgram(&ctc_target(), &["a", "b", "c"], &c, 4).unwrap();
    let b = synth_posteriorgram(&ctc_target(), &["a", "b", "c"], &c, 4).unwrap();
    assert_eq!(a.data(), b.data());
    let other = synth_posteriorgram(&ctc_target(), &["a", "b", "c"], &c, 5).unwrap();
    assert_ne!(a.data(), other.data());
}

#[test]
fn factored_scores_peak_on_reference_contexts() {
    let labels = names(&["[SIL]", "a", "a#", "b", "b#"]);
    let f = synth_factored(&labels, &["a", "b#"], &cfg(0.0, 50.0, 2), 0).unwrap();
    assert_eq!(f.num_frames(), 4);
    let p = |x: f64| x.exp();
    // frame 0: left SIL, center a, right b#
    assert!(p(f.left(0, 0)) > 0.999);
    assert!(p(f.center(0, 3, 1)) > 0.999);
    assert!(p(f.right(0, 2, 4, 4)) > 0.999);
    // frame 3: left a, center b#, right SIL
    assert!(p(f.left(3, 1)) > 0.999);
    assert!(p(f.center(3, 0, 4)) > 0.999);
    assert!(p(f.right(3, 1, 1, 0)) > 0.999);
    assert!(synth_factored(&names(&["a", "a#"]), &["a#"], &cfg(0.0, 50.0, 1), 0).is_err());
}

#[test]
fn frames_equal_duration_sum() {
    let mut rng = utterance_rng(11, 0);
    use rand::Rng;
    let labels = ["a", "b", "c"];
    for case in 0..100u64 {
        let len = rng.random_range(1..=6);
        let reference: Vec<&str> = (0..len).map(|_| labels[rng.random_range(0..3)]).collect();
        let frames: BTreeMap<String, usize> = labels
            .iter()
            .map(|l| (l.to_string(), rng.random_range(2..=4)))
            .collect();
        let c = EmitterConfig {
            temperature: rng.random_range(0.0..3.0),
            gain: rng.random_range(0.0..10.0),
            durations: Durations::Table { frames, default: 1 },
            seed: case,
        };
        let dur = sample_durations(&reference, &c).unwrap();
        let pg = synth_posteriorgram(&ctc_target(), &reference, &c, case).unwrap();
        assert_eq!(pg.num_frames(), dur.iter().sum::<usize>());
        let f = synth_factored(&names(&["[SIL]", "a", "b", "c"]), &reference, &c, case).unwrap();
        assert_eq!(f.num_frames(), pg.num_frames());
    }
}

proptest! {
    #[test]
    fn rows_stay_normalized(tau in 0.0f64..200.0, gain in 0.0f64..500.0, seed in any::<u64>()) {
        let c = EmitterConfig { temperature: tau, gain, durations: Durations::Fixed(2), seed };
        let pg = synth_posteriorgram(&ctc_target(), &["a", "b", "b"], &c, 0).unwrap();
        for t in 0..pg.num_frames() {
            let s: f64 = pg.row(t).iter().map(|&x| (x as f64).exp()).sum();
            prop_assert!((s - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn synth_set_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let utts = vec![
        ("u1".to_owned(), names(&["a", "b"])),
        ("u2".to_owned(), names(&["c"])),
    ];
    let same: &(dyn Fn(&[String]) -> crate::Result<Vec<String>> + Sync) = &|w| Ok(w.to_vec());
    let c = cfg(0.7, 4.0, 2);
    for target in [
        SynthTarget::Posteriorgram(ctc_target()),
        SynthTarget::Factored(names(&["[SIL]", "a", "b", "c"])),
    ] {
        let set = synth_set(&utts, same, &target, &c).unwrap();
        assert_eq!(set.utterances[1].emission.num_frames(), 2);
        let path = dir.path().join("m.tsv");
        set.save(&path).unwrap();
        assert_eq!(SynthSet::load(&path).unwrap(), set);
        // noise streams follow the position in the set
        let alone = synth_set(&utts[1..], same, &target, &c).unwrap();
        assert_ne!(alone.utterances[0].emission, set.utterances[1].emission);
        let again = synth_set(&utts, same, &target, &c).unwrap();
        assert_eq!(again, set);
    }
    let manifest = std::fs::read_to_string(dir.path().join("m.tsv")).unwrap();
    assert!(manifest.contains("u1\tu1\ta b\n"), "{manifest}");
}

#[test]
fn calibration_bisects_to_target() {
    // WER grows linearly in tau with a seed-dependent offset
    let wer = |tau: f64, seed: u64| Ok((0.01 * tau + 0.001 * seed as f64).min(0.95));
    let c = CalibrationConfig {
        target: 0.06,
        tolerance: 0.0005,
        tau_max: 50.0,
        ..CalibrationConfig::default()
    };
    let r = calibrate_tau(wer, &c).unwrap();
    assert!((r.mean_wer - 0.06).abs() <= 0.0005);
    assert!((r.tau - 5.8).abs() < 0.06);
    assert!((r.spread - 0.004).abs() < 1e-12);
    assert_eq!(r.seed_wers.len(), 5);
}

#[test]
fn calibration_accepts_zero_and_reports_unreachable() {
    let calls = std::sync::atomic::AtomicUsize::new(0);
    let wer = |tau: f64, _| {
        calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(if tau < 1.0 { 0.0 } else { 0.3 })
    };
    let r = calibrate_tau(wer, &CalibrationConfig::default()).unwrap();
    assert_eq!((r.tau, r.evaluations), (0.0, 1));
    assert_eq!(calls.load(std::sync::atomic::Ordering::Relaxed), 5);
    let c = CalibrationConfig {
        target: 0.5,
        ..CalibrationConfig::default()
    };
    match calibrate_tau(wer, &c) {
        Err(Error::Unreachable {
            wer_low, wer_high, ..
        }) => assert_eq!((wer_low, wer_high), (0.0, 0.3)),
        r => panic!("{r:?}"),
    }
    // a jump straddling the target never lands within tolerance
    let c = CalibrationConfig {
        target: 0.1,
        max_iterations: 10,
        ..CalibrationConfig::default()
    };
    assert!(matches!(
        calibrate_tau(wer, &c),
        Err(Error::NotConverged { iterations: 10, .. })
    ));
    assert!(calibrate_tau(
        wer,
        &CalibrationConfig {
            target: 1.0,
            ..CalibrationConfig::default()
        }
    )
    .is_err());
}
