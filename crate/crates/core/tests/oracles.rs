mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saliency_fairness::data::{self, SplitFractions, SyntheticSpec};
use saliency_fairness::debias::{fit_thresholds, threshold_grid};
use saliency_fairness::fairness::{equalized_odds, group_rates};
use saliency_fairness::metrics;
use saliency_fairness::nn::{LayerSpec, Shape, TinyNet};
use saliency_fairness::{RelevanceMap, Roi, SampleRow, SampleTable};

use common::*;

/// Straightforward forward pass over the documented parameter layouts.
fn reference_logits(net: &TinyNet, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in net.layers() {
        a = match layer.spec {
            LayerSpec::Dense { inputs, outputs } => (0..outputs)
                .map(|o| layer.bias[o] + (0..inputs).map(|i| layer.weights[o * inputs + i] * a[i]).sum::<f64>())
                .collect(),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let Shape::Image { height, width, .. } = layer.in_shape() else { unreachable!() };
                let oh = (height - kernel) / stride + 1;
                let ow = (width - kernel) / stride + 1;
                let mut out = vec![0.0; out_channels * oh * ow];
                for oc in 0..out_channels {
                    for r in 0..oh {
                        for c in 0..ow {
                            let mut z = layer.bias[oc];
                            for ic in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let w = layer.weights[((oc * in_channels + ic) * kernel + ky) * kernel + kx];
                                        z += w * a[(ic * height + r * stride + ky) * width + c * stride + kx];
                                    }
                                }
                            }
                            out[(oc * oh + r) * ow + c] = z;
                        }
                    }
                }
                out
            }
            LayerSpec::Relu => a.iter().map(|v| v.max(0.0)).collect(),
            LayerSpec::Flatten => a,
            LayerSpec::Project { .. } => {
                let dot: f64 = a.iter().zip(&layer.bias).zip(&layer.weights).map(|((v, b), d)| (v - b) * d).sum();
                a.iter().zip(&layer.weights).map(|(v, d)| v - dot * d).collect()
            }
        };
    }
    a
}

#[test]
fn forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..30 {
        let net = random_three_layer_net(&mut rng, i % 2 == 0);
        let x = random_input(&mut rng, &net);
        let got = net.logits(&x).unwrap();
        let want = reference_logits(&net, &x);
        for k in 0..2 {
            assert!((got[k] - want[k]).abs() <= 1e-12 * (1.0 + want[k].abs()));
        }
    }
}

#[test]
fn zero_weight_net_returns_biases() {
    let mut net = TinyNet::new(Shape::Flat { len: 3 }, &[LayerSpec::Dense { inputs: 3, outputs: 2 }]).unwrap();
    net.layers_mut()[0].bias = vec![0.25, -1.5];
    assert_eq!(net.logits(&[3.0, 4.0, 5.0]).unwrap(), [0.25, -1.5]);
}

fn brute_force_eo(table: &SampleTable, t0: f64, t1: f64) -> (f64, f64) {
    let mut tp = [0.0; 2];
    let mut pos = [0.0; 2];
    let mut fp = [0.0; 2];
    let mut neg = [0.0; 2];
    let mut correct = 0.0;
    for r in table.rows() {
        let t = if r.pa == 0 { t0 } else { t1 };
        let pred = (r.score >= t) as u8;
        let g = r.pa as usize;
        if r.y_true == 1 {
            pos[g] += 1.0;
            tp[g] += pred as f64;
        } else {
            neg[g] += 1.0;
            fp[g] += pred as f64;
        }
        correct += (pred == r.y_true) as u8 as f64;
    }
    let eo = (tp[0] / pos[0] - tp[1] / pos[1]).abs().max((fp[0] / neg[0] - fp[1] / neg[1]).abs());
    (eo, correct / table.len() as f64)
}

#[test]
fn threshold_search_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let rows = (0..80)
            .map(|i| {
                let pa = (i % 2) as u8;
                let y = ((i / 2) % 2) as u8;
                let score: f64 = (0.3 * y as f64 + 0.2 * pa as f64 + rng.random_range(0.0..0.5)).min(1.0);
                SampleRow {
                    id: format!("r{i}"),
                    y_true: y,
                    y_pred: 0,
                    pa,
                    score,
                }
            })
            .collect();
        let table = SampleTable::new(rows).unwrap();
        let grid = threshold_grid(21);
        let mut best = f64::INFINITY;
        let mut best_acc = 0.0;
        for &t0 in &grid {
            for &t1 in &grid {
                let (eo, acc) = brute_force_eo(&table, t0, t1);
                if eo < best - 1e-12 || ((eo - best).abs() <= 1e-12 && acc > best_acc) {
                    best = eo;
                    best_acc = acc;
                }
            }
        }
        let fit = fit_thresholds(&table, 21).unwrap();
        let applied = fit.apply(&table);
        let eo = equalized_odds(&group_rates(&applied).unwrap());
        let (oracle_eo, oracle_acc) = brute_force_eo(&table, fit.threshold_pa0, fit.threshold_pa1);
        assert!((eo - oracle_eo).abs() <= 1e-12);
        assert!((eo - best).abs() <= 1e-12, "{eo} vs {best}");
        assert!((oracle_acc - best_acc).abs() <= 1e-12);
    }
}

#[test]
fn split_sizes_and_balance() {
    let pool = data::generate(&SyntheticSpec {
        n_samples: 1000,
        phi_target: 0.4,
        seed: 8,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let fractions = SplitFractions {
        train: 0.6,
        debias: 0.2,
        test: 0.2,
    };
    let s = data::split(&pool, fractions, 2).unwrap();
    assert_eq!(s.train.len(), 600);
    assert_eq!(s.debias.len(), 200);
    assert!(s.test.len() <= 200);
    assert!(data::empirical_phi(&s.test).unwrap().abs() <= 0.05);
    let mut ids: Vec<&str> = s.train.iter().chain(&s.debias).chain(&s.test).map(|x| x.id.as_str()).collect();
    let n = ids.len();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), n);
    assert_eq!(data::split(&pool, fractions, 2).unwrap(), s);
}

#[test]
fn generated_phi_tracks_target() {
    for target in [-0.6, 0.0, 0.3, 0.8] {
        let mut phis: Vec<f64> = (0..3)
            .map(|seed| {
                let spec = SyntheticSpec {
                    n_samples: 2000,
                    phi_target: target,
                    seed,
                    ..SyntheticSpec::default()
                };
                data::empirical_phi(&data::generate(&spec).unwrap()).unwrap()
            })
            .collect();
        let m = median(&mut phis);
        assert!((m - target).abs() <= 0.05, "{target}: {m}");
    }
}

fn map_and_roi() -> impl Strategy<Value = (RelevanceMap, RelevanceMap, Roi)> {
    (2usize..9, 2usize..9).prop_flat_map(|(h, w)| {
        (
            proptest::collection::vec(-2.0f64..2.0, h * w),
            proptest::collection::vec(-2.0f64..2.0, h * w),
            0..h,
            0..w,
            1..=h,
            1..=w,
        )
            .prop_filter_map("roi must fit and be smaller than the map", move |(a, b, top, left, rh, rw)| {
                let roi = Roi::new(top, left, rh, rw);
                if top + rh > h || left + rw > w || rh * rw == h * w {
                    return None;
                }
                Some((RelevanceMap::from_f64(h, w, &a).ok()?, RelevanceMap::from_f64(h, w, &b).ok()?, roi))
            })
    })
}

proptest! {
    #[test]
    fn metrics_agree_with_direct_formulas((v, d, roi) in map_and_roi()) {
        let (gv, gd) = (grid(&v), grid(&d));
        prop_assert!((metrics::adr(&v, &d, &roi).unwrap() - oracle_adr(&gv, &gd, &roi)).abs() <= 1e-12);
        prop_assert_eq!(metrics::dif(&v, &d, &roi).unwrap(), oracle_dif(&gv, &gd, &roi));
        if let Ok(r) = metrics::rrf_abs(&v, &roi) {
            prop_assert!((r - oracle_rrf_abs(&gv, &roi)).abs() <= 1e-9);
        }
        let total: f64 = gv.iter().flatten().sum();
        if total.abs() > 1e-3 {
            let want = oracle_rrf(&gv, &roi);
            prop_assert!((metrics::rrf(&v, &roi).unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn t_sf_agrees_with_quadrature(t in -12.0f64..12.0, df in 1usize..=200) {
        let got = saliency_fairness::stats::student_t_sf(t, df);
        prop_assert!((got - oracle_t_sf(t, df as f64)).abs() <= 1e-8);
    }
}
