mod common;

use common::{assert_matches_schema, critical_r, gaussian, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use voxenc::encoding::{train_voxelwise, EncodingConfig, Hemisphere, Roi, VoxelInfo, VoxelResponseMatrix};
use voxenc::evaluation::*;
use voxenc::features::{FeatureMatrix, FeatureSource};
use voxenc::par::Execution;
use voxenc::solver::SolverConfig;
use voxenc::synth::{generate, SynthConfig};

#[test]
fn pearson_hand_values() {
    assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((r - 0.8).abs() < 1e-15);
    assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap().is_nan());
    assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(pearson(&[1.0, f64::NAN, 2.0], &[1.0, 2.0, 3.0]).is_err());
}

fn vector(seed: u64, n: usize) -> Vec<f64> {
    gaussian(&mut rng(seed), n, 1).column(0).to_vec()
}

proptest! {
    #[test]
    fn pearson_is_affine_invariant(seed in 0u64..100_000, n in 3usize..60, a in 0.1f64..10.0, b in -10.0f64..10.0,
                                   c in 0.1f64..10.0, d in -10.0f64..10.0) {
        let x = vector(seed, n);
        let y = vector(seed + 1, n);
        let r = pearson(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        prop_assert!((pearson(&xs, &ys).unwrap() - r).abs() <= 1e-12);
        let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson(&flipped, &ys).unwrap() + r).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(pearson(&y, &x).unwrap().to_bits(), r.to_bits());
    }
}

#[test]
fn threshold_agrees_with_quadrature() {
    for n in [10, 30, 113, 500] {
        for p in [0.05, 0.01, 0.001] {
            for (tails, two) in [(Tails::One, false), (Tails::Two, true)] {
                let got = significance_threshold(n, p, tails).unwrap();
                let want = critical_r(n, p, two);
                assert!((got - want).abs() < 1e-6, "n={n} p={p} {tails:?}: {got} vs {want}");
            }
        }
    }
    let r = significance_threshold(113, 0.001, Tails::Two).unwrap();
    assert!((r - 0.305).abs() < 0.001, "{r}");
    assert!(significance_threshold(113, 0.01, Tails::Two).unwrap() < r);
    assert!(significance_threshold(3, 0.01, Tails::Two).is_err());
    assert!(significance_threshold(113, 1.0, Tails::Two).is_err());
}

fn voxel(id: &str, h: Hemisphere, roi: Roi) -> VoxelInfo {
    VoxelInfo {
        voxel_id: id.into(),
        subject: "S1".into(),
        roi,
        hemisphere: h,
    }
}

fn report(source: &str, voxels: &[VoxelInfo], pcs: &[f64]) -> EvaluationReport {
    EvaluationReport {
        feature_source: source.parse().unwrap(),
        n_test: 113,
        voxels: voxels.to_vec(),
        per_voxel_pc: pcs.to_vec(),
        region_means: vec![],
    }
}

#[test]
fn comparison_hand_fixture() {
    let v = vec![
        voxel("v1", Hemisphere::L, Roi::EV),
        voxel("v2", Hemisphere::L, Roi::EV),
        voxel("v3", Hemisphere::L, Roi::PPA),
    ];
    let a = report("ICF", &v, &[0.5, 0.1, 0.4]);
    let b = report("CNN:res4", &v, &[0.3, 0.5, 0.4]);
    let c = compare(&a, &b, 0.27, 40).unwrap();
    assert_eq!(c.classes, vec![VoxelClass::ABetter, VoxelClass::BBetter, VoxelClass::Tie]);
    assert_eq!(c.n_joint_significant, 2);
    assert_eq!(c.fraction_a_better, 0.5);
    assert_eq!(c.fraction_b_better, 0.0);
    assert_eq!(c.fraction_tie, 0.5);
    assert_eq!(c.histogram.counts.iter().sum::<usize>(), 2);
    let l_ev = c.sub_region_distance.iter().find(|d| d.group.to_string() == "L-EV").unwrap();
    assert!((l_ev.mean_abs_diff.unwrap() - 0.3).abs() < 1e-15);

    let below = report("ICF", &v, &[0.1, 0.2, 0.0]);
    let c = compare(&below, &below, 0.27, 40).unwrap();
    assert_eq!(c.class_counts.neither_significant, 3);
    assert_eq!((c.fraction_a_better, c.fraction_b_better, c.fraction_tie), (0.0, 0.0, 0.0));
}

#[test]
fn self_comparison_has_zero_distance() {
    let v: Vec<VoxelInfo> = (0..20)
        .map(|i| voxel(&format!("v{i}"), [Hemisphere::L, Hemisphere::R][i % 2], Roi::ALL[i % 5]))
        .collect();
    let pcs: Vec<f64> = (0..20).map(|i| i as f64 / 25.0).collect();
    let a = report("ICF", &v, &pcs);
    let c = compare(&a, &a, 0.27, 40).unwrap();
    assert!(c.sub_region_distance.iter().all(|d| d.mean_abs_diff == Some(0.0)));
    assert_eq!(c.fraction_tie, 1.0);
    assert_eq!(c.sub_region_distance.len(), 10);
    let mut other = v.clone();
    other[0].voxel_id = "zz".into();
    assert!(compare(&a, &report("ICF", &other, &pcs), 0.27, 40).is_err());
}

proptest! {
    #[test]
    fn classes_partition_voxels(pcs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..80), t in 0.0f64..0.6) {
        let v: Vec<VoxelInfo> = (0..pcs.len())
            .map(|i| voxel(&format!("v{i}"), [Hemisphere::L, Hemisphere::R][i % 2], Roi::ALL[i % 5]))
            .collect();
        let a: Vec<f64> = pcs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pcs.iter().map(|p| p.1).collect();
        let c = compare(&report("ICF", &v, &a), &report("CNN:x", &v, &b), t, 40).unwrap();
        let k = &c.class_counts;
        prop_assert_eq!(k.neither_significant + k.a_better + k.b_better + k.tie, pcs.len());
        prop_assert_eq!(c.histogram.counts.iter().sum::<usize>(), c.n_joint_significant);
        if c.n_joint_significant > 0 {
            prop_assert!((c.fraction_a_better + c.fraction_b_better + c.fraction_tie - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn best_layer_tie_breaks_and_unique_max() {
    let v = vec![voxel("v", Hemisphere::L, Roi::EV)];
    let flat: Vec<EvaluationReport> = (1..=10)
        .map(|l| with_means(report(&format!("CNN:l{l}"), &v, &[0.4])))
        .collect();
    let p = layer_profile(&flat).unwrap();
    let ll: RegionGroup = "LL".parse().unwrap();
    assert_eq!(best_layer(&p, ll).unwrap(), "l1");
    assert!(p.means.iter().all(|row| row == &p.means[0]));

    let peaked: Vec<EvaluationReport> = (1..=10)
        .map(|l| with_means(report(&format!("CNN:l{l}"), &v, &[if l == 7 { 0.6 } else { 0.4 }])))
        .collect();
    assert_eq!(best_layer(&layer_profile(&peaked).unwrap(), ll).unwrap(), "l7");
    assert_eq!(layer_profile(&peaked[..1]).unwrap().layers.len(), 1);
}

/// Recompute region means the way `evaluate` does.
fn with_means(r: EvaluationReport) -> EvaluationReport {
    let groups = RegionGroup::present(&r.voxels, &RegionGroup::all());
    let region_means = groups
        .into_iter()
        .map(|group| {
            let vals: Vec<f64> =
                r.voxels.iter().zip(&r.per_voxel_pc).filter(|(v, _)| group.contains(v)).map(|(_, &p)| p).collect();
            RegionStat {
                group,
                mean_pc: Some(vals.iter().sum::<f64>() / vals.len() as f64),
                n_voxels: vals.len(),
                n_degenerate: 0,
            }
        })
        .collect();
    EvaluationReport { region_means, ..r }
}

#[test]
fn every_sub_region_gets_its_own_best_layer() {
    let subs = RegionGroup::sub_regions();
    let v: Vec<VoxelInfo> = subs
        .iter()
        .enumerate()
        .map(|(i, g)| match *g {
            RegionGroup::SubRegion(h, roi) => voxel(&format!("v{i}"), h, roi),
            _ => unreachable!(),
        })
        .collect();
    let reports: Vec<EvaluationReport> = (0..10)
        .map(|l| {
            let pcs: Vec<f64> = (0..10).map(|s| if s == l { 0.5 } else { 0.1 + 0.01 * l as f64 }).collect();
            with_means(report(&format!("CNN:layer{l}"), &v, &pcs))
        })
        .collect();
    let profile = layer_profile(&reports).unwrap();
    let winners: Vec<&str> = subs.iter().map(|&g| best_layer(&profile, g).unwrap()).collect();
    let mut distinct = winners.clone();
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(distinct.len(), 10, "{winners:?}");
    for (s, w) in winners.iter().enumerate() {
        assert_eq!(*w, format!("layer{s}"));
    }
}

#[test]
fn deeper_layers_with_more_signal_give_rising_profile() {
    let cfg = SynthConfig {
        n_train: 400,
        n_test: 113,
        state_dim: 48,
        voxels_per_region: 4,
        ..Default::default()
    };
    let b = generate(&cfg).unwrap();
    let enc = EncodingConfig {
        solver: SolverConfig::new(4),
        ..Default::default()
    };
    let reports: Vec<EvaluationReport> = b
        .layers
        .iter()
        .map(|(train, test)| {
            let set = train_voxelwise(train, &b.responses_train, &enc).unwrap();
            evaluate(&set, test, &b.responses_test, Execution::Auto).unwrap()
        })
        .collect();
    let profile = layer_profile(&reports).unwrap();
    for g in ["LH", "RH"] {
        let col = profile.groups.iter().position(|x| x.to_string() == g).unwrap();
        let series: Vec<f64> = profile.means.iter().map(|row| row[col].unwrap()).collect();
        assert!(series.windows(2).all(|w| w[0] < w[1]), "{g}: {series:?}");
    }
    assert_matches_schema("layer_profile.schema.json", &profile.to_json().unwrap());
    assert_eq!(profile.to_csv().unwrap().lines().count(), 1 + profile.layers.len());
}

fn perfect_voxel_fixture() -> (FeatureMatrix, VoxelResponseMatrix) {
    let x = gaussian(&mut rng(77), 50, 8);
    let ids: Vec<String> = (0..50).map(|i| format!("i{i}")).collect();
    let y = x.column(3).to_owned().insert_axis(ndarray::Axis(1));
    (
        FeatureMatrix::new(x, ids.clone(), FeatureSource::Icf).unwrap(),
        VoxelResponseMatrix::new(y, ids, vec![voxel("v", Hemisphere::R, Roi::LOC)]).unwrap(),
    )
}

#[test]
fn perfect_single_feature_voxel() {
    let (f, r) = perfect_voxel_fixture();
    let set = train_voxelwise(&f, &r, &EncodingConfig::default()).unwrap();
    assert!(set.models[0].solution.support.contains(&3));
    let rep = evaluate(&set, &f, &r, Execution::Sequential).unwrap();
    assert!((rep.per_voxel_pc[0] - 1.0).abs() < 1e-8);
}

#[test]
fn shuffled_responses_give_null_correlations() {
    let cfg = SynthConfig {
        n_train: 300,
        n_test: 113,
        state_dim: 32,
        voxels_per_region: 10,
        layers: vec![],
        ..Default::default()
    };
    let b = generate(&cfg).unwrap();
    let set = train_voxelwise(&b.icf_train, &b.responses_train, &EncodingConfig::default()).unwrap();
    let mut order: Vec<usize> = (0..cfg.n_test).collect();
    order.shuffle(&mut rng(5));
    let mut shuffled = b.responses_test.clone();
    shuffled.values = b.responses_test.values.select(ndarray::Axis(0), &order);
    let rep = evaluate(&set, &b.icf_test, &shuffled, Execution::Auto).unwrap();
    let bound = 3.0 / (cfg.n_test as f64).sqrt();
    assert!(rep.mean_pc().unwrap().abs() <= bound, "{:?}", rep.mean_pc());
}

#[test]
fn reports_export_and_reload() {
    let v: Vec<VoxelInfo> = (0..6)
        .map(|i| voxel(&format!("v{i}"), [Hemisphere::L, Hemisphere::R][i % 2], Roi::ALL[i % 5]))
        .collect();
    let pcs = [0.123456789012, -0.5, f64::NAN, 0.9999999, 1.0 / 3.0, 0.0];
    let r = with_means(report("ICF", &v, &pcs));
    let rows = read_evaluation_csv(&r.to_csv().unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    for ((info, pc), (vi, want)) in rows.iter().zip(v.iter().zip(pcs)) {
        assert_eq!(info, vi);
        if want.is_nan() {
            assert!(pc.is_nan());
        } else {
            assert!((pc - want).abs() <= 1e-9 * want.abs().max(1e-300));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let mut finite = r.clone();
    finite.per_voxel_pc[2] = 0.25;
    let finite = with_means(finite);
    export_report(&finite, ReportFormat::Json, &path).unwrap();
    assert_eq!(read_evaluation_json(&path).unwrap(), finite);
    assert_matches_schema("evaluation.schema.json", &r.to_json().unwrap());

    let b = report("CNN:x", &v, &[0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
    let c = compare(&r, &b, 0.27, 40).unwrap();
    assert_matches_schema("comparison.schema.json", &c.to_json().unwrap());
    assert_eq!(c.to_csv().unwrap().lines().count(), 7);

    let empty = report("ICF", &[], &[]);
    assert_eq!(empty.to_csv().unwrap(), "voxel_id,subject,roi,hemisphere,pc\n");
}

#[test]
fn evaluate_requires_aligned_inputs() {
    let (f, r) = perfect_voxel_fixture();
    let set = train_voxelwise(&f, &r, &EncodingConfig::default()).unwrap();
    let mut r2 = r.clone();
    r2.image_ids.swap(0, 1);
    assert!(matches!(evaluate(&set, &f, &r2, Execution::Sequential), Err(voxenc::Error::Alignment(_))));
}
