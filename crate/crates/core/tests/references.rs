use proptest::prelude::*;

use tracking_ppo::drivetrain::rad_s_to_rpm;
use tracking_ppo::references::{
    count_level_changes, cubic_spline_eval, gen_discontinuous, gen_offset, gen_smooth, generate, square_wave,
    ReferenceClass, ReferenceGenConfig,
};

// Regression bounds measured over seeds 0..10_000 with the default generator.
const OVERSHOOT_FACTOR: f64 = 1.5;
const SMOOTH_STEP_RPM: f64 = 3.3;

fn rpm(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| rad_s_to_rpm(*v)).collect()
}

#[test]
fn smooth_stays_within_overshoot_bound() {
    let cfg = ReferenceGenConfig::default();
    for seed in 0..10_000 {
        let t = gen_smooth(&cfg, seed).unwrap();
        assert_eq!(t.len(), cfg.episode_len + cfg.horizon_pad + 1);
        for v in rpm(&t.values) {
            assert!(
                (v - cfg.mean_rpm).abs() <= OVERSHOOT_FACTOR * cfg.knot_spread_rpm,
                "seed {seed}: {v}"
            );
        }
    }
}

#[test]
fn smooth_step_change_is_bounded_and_jumps_exceed_it() {
    let cfg = ReferenceGenConfig::default();
    for seed in 0..10_000 {
        let s = rpm(&gen_smooth(&cfg, seed).unwrap().values);
        let max_step = s.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_step <= SMOOTH_STEP_RPM, "seed {seed}: {max_step}");
    }
    for seed in 0..1_000 {
        let d = rpm(&gen_discontinuous(&cfg, seed).unwrap().values);
        let max_step = d[..cfg.episode_len]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_step > SMOOTH_STEP_RPM, "seed {seed}");
    }
}

#[test]
fn jump_counts_stay_in_range() {
    let cfg = ReferenceGenConfig::default();
    let mut seen = [false; 20];
    for seed in 0..1_000 {
        let smooth = gen_smooth(&cfg, seed).unwrap();
        let jumps = gen_discontinuous(&cfg, seed).unwrap();
        let wave: Vec<f64> = jumps
            .values
            .iter()
            .zip(&smooth.values)
            .map(|(a, b)| ((rad_s_to_rpm(a - b)) * 1e6).round())
            .collect();
        let n = count_level_changes(&wave, cfg.episode_len);
        assert!((1..=19).contains(&n), "seed {seed}: {n}");
        seen[n] = true;
    }
    assert!(seen[1] && seen[19]);
}

#[test]
fn pinned_single_jump() {
    let cfg = ReferenceGenConfig {
        jump_count_min: 1,
        jump_count_max: 1,
        ..Default::default()
    };
    for seed in 0..50 {
        let smooth = gen_smooth(&cfg, seed).unwrap();
        let jumps = gen_discontinuous(&cfg, seed).unwrap();
        let wave: Vec<f64> = jumps
            .values
            .iter()
            .zip(&smooth.values)
            .map(|(a, b)| (a - b > 0.0) as u8 as f64)
            .collect();
        assert_eq!(count_level_changes(&wave, cfg.episode_len), 1);
    }
}

#[test]
fn square_wave_levels() {
    let w = square_wave(5.0, 3, true, 100, 104);
    assert_eq!(w.len(), 104);
    assert!(w.iter().all(|v| v.abs() == 5.0));
    assert_eq!(count_level_changes(&w, 100), 3);
    assert_eq!(w[0], 5.0);
    assert_eq!(square_wave(5.0, 3, false, 100, 104)[0], -5.0);
}

#[test]
fn pooled_offset_range() {
    let cfg = ReferenceGenConfig::default();
    assert_eq!(cfg.offsets_rpm.len(), 5);
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for seed in 0..10_000 {
        for v in rpm(&gen_offset(&cfg, seed).unwrap().values) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    assert!((lo - 1040.0).abs() < 20.0, "low end {lo}");
    assert!((hi - 4880.0).abs() < 20.0, "high end {hi}");
}

#[test]
fn degenerate_settings_reduce_to_smooth() {
    let flat = ReferenceGenConfig {
        knot_spread_rpm: 0.0,
        ..Default::default()
    };
    for v in rpm(&gen_smooth(&flat, 3).unwrap().values) {
        assert!((v - 2000.0).abs() < 1e-9);
    }
    let quiet = ReferenceGenConfig {
        square_amp_rpm: 0.0,
        offsets_rpm: vec![0.0],
        ..Default::default()
    };
    for seed in 0..20 {
        let s = gen_smooth(&quiet, seed).unwrap().values;
        assert_eq!(gen_discontinuous(&quiet, seed).unwrap().values, s);
        assert_eq!(gen_offset(&quiet, seed).unwrap().values, s);
    }
}

#[test]
fn lookup_clamps_past_end() {
    let t = gen_smooth(&ReferenceGenConfig::default(), 9).unwrap();
    assert_eq!(t.lookup(0), t.values[0]);
    assert_eq!(t.lookup(17), t.values[17]);
    assert_eq!(t.lookup(t.len() + 5), *t.values.last().unwrap());
}

proptest! {
    #[test]
    fn generators_are_pure(seed in any::<u64>()) {
        let cfg = ReferenceGenConfig::default();
        for class in [ReferenceClass::Smooth, ReferenceClass::Discontinuous, ReferenceClass::Offset] {
            let a = generate(class, &cfg, seed).unwrap();
            let b = generate(class, &cfg, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.values.iter().all(|v| v.is_finite() && *v > 0.0));
        }
    }

    #[test]
    fn spline_is_linear_for_two_knots(y0 in -50.0f64..50.0, y1 in -50.0f64..50.0, x in 0.0f64..1.0) {
        let v = cubic_spline_eval(&[(0.0, y0), (1.0, y1)], x).unwrap();
        prop_assert!((v - (y0 + (y1 - y0) * x)).abs() < 1e-9);
    }
}
