mod common;

use autotwin::automl::{build_twin, Preset};
use autotwin::bench::{project_pipeline, quality_study_on, time_speedup, BenchError, Variant};
use autotwin::data::{interval_sample, Dataset, Provenance, Target};
use autotwin::signal::{FilterSpec, NoiseSpec};

fn split_small() -> (Dataset, Dataset) {
    let all = common::small_dataset();
    let (train_rows, held_rows): (Vec<_>, Vec<_>) =
        all.rows.iter().enumerate().partition(|(i, _)| i % 3 != 2);
    let take = |v: Vec<(usize, &autotwin::data::Sample)>| {
        Dataset::new(
            v.into_iter().map(|(_, r)| *r).collect(),
            Provenance::Simulated,
        )
    };
    (take(train_rows), take(held_rows))
}

#[test]
fn zero_noise_leaves_raw_and_noised_identical() {
    let (train, held) = split_small();
    let noise = NoiseSpec {
        sigma: 0.0,
        seed: 1,
        ..NoiseSpec::default()
    };
    let study = quality_study_on(
        &train,
        &held,
        &noise,
        &FilterSpec::default(),
        20.0,
        Preset::Fast,
        4,
    )
    .unwrap();
    let raw = study.run(Variant::Raw).accuracy;
    let noised = study.run(Variant::Noised).accuracy;
    assert_eq!(raw.path1, noised.path1);
    assert_eq!(raw.path2, noised.path2);
    assert_eq!(
        study.plot_series(Variant::Raw, Target::Path1),
        study.plot_series(Variant::Noised, Target::Path1)
    );
    assert_eq!(
        study.plot_series(Variant::Cleaned, Target::Path2).len(),
        train.len()
    );
}

#[test]
fn noise_costs_accuracy() {
    let (train, held) = split_small();
    // the small flow finishes in well under a second, so scale noise down
    let noise = NoiseSpec {
        sigma: 0.05,
        seed: 2,
        ..NoiseSpec::default()
    };
    let study = quality_study_on(
        &train,
        &held,
        &noise,
        &FilterSpec::default(),
        20.0,
        Preset::Good,
        4,
    )
    .unwrap();
    for t in Target::BOTH {
        let raw = study.run(Variant::Raw).accuracy.metrics(t).accuracy_pct;
        let noised = study.run(Variant::Noised).accuracy.metrics(t).accuracy_pct;
        assert!(noised <= raw + 0.5, "{t:?}: noised {noised} raw {raw}");
    }
}

#[test]
fn speedup_is_measured_on_enough_configs() {
    let train = common::small_sample(60);
    let twin = build_twin(&train, 10.0, Preset::Fast, 1).unwrap().twin;
    let configs = interval_sample(&common::small_grid(), 30).unwrap();
    let s = time_speedup(&twin, &common::small_flow(), &configs, 3).unwrap();
    assert!(s.sim_mean_s > 0.0 && s.twin_mean_s > 0.0);
    assert!((s.speedup - s.sim_mean_s / s.twin_mean_s).abs() < 1e-9 * s.speedup);
    assert!(s.speedup > 1.0);
    assert!(matches!(
        time_speedup(&twin, &common::small_flow(), &configs[..29], 3),
        Err(BenchError::InvalidArgument(_))
    ));
    assert!(matches!(
        time_speedup(&twin, &common::small_flow(), &configs, 2),
        Err(BenchError::InvalidArgument(_))
    ));
}

#[test]
fn projection_recomputes_from_operands() {
    let p = project_pipeline(194_481, 0.0178, 400, 3.1, 3.3).unwrap();
    let full = 194_481.0 * 0.0178 / 3600.0;
    let pipe = (400.0 * 0.0178 + 3.1 + 3.3) / 3600.0;
    assert!((p.full_grid_sim_hours - full).abs() < 1e-12);
    assert!((p.pipeline_hours - pipe).abs() < 1e-12);
    assert!((p.projection_factor - full / pipe).abs() < 1e-9);
}
