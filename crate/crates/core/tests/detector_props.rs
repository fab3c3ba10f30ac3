use knxlab::bus::{CaptureRecord, CaptureSeries, Origin, SegmentId};
use knxlab::detector::{
    inter_arrivals, jsd, kl_divergence, moment_features, segment, Distribution, FeatureKind, HistogramSpec, InterArrivalSegment,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn distribution(bins: usize) -> impl Strategy<Value = Distribution> {
    vec(0u64..1000, bins).prop_filter_map("empty histogram", |c| Distribution::from_counts(&c).ok())
}

fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    (2usize..60).prop_flat_map(|n| (distribution(n), distribution(n)))
}

/// Base-2 JSD written directly from mixture entropies.
fn entropy_jsd(p: &[f64], q: &[f64]) -> f64 {
    let h = |d: &[f64]| -d.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>();
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    h(&m) - 0.5 * (h(p) + h(q))
}

fn capture(times: &[f64]) -> CaptureSeries {
    let records = times.iter().map(|&timestamp| CaptureRecord { timestamp, segment: SegmentId(0), raw: vec![0] }).collect();
    CaptureSeries::new(Origin::NoAttack, records)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jsd_is_symmetric_and_bounded((p, q) in pair()) {
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        prop_assert!((a - entropy_jsd(&p.probs, &q.probs)).abs() <= 1e-9);
    }

    #[test]
    fn disjoint_supports_are_maximally_divergent(bits in vec(any::<bool>(), 2..40)) {
        prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
        let p: Vec<u64> = bits.iter().map(|&b| u64::from(b)).collect();
        let q: Vec<u64> = bits.iter().map(|&b| u64::from(!b)).collect();
        let (p, q) = (Distribution::from_counts(&p).unwrap(), Distribution::from_counts(&q).unwrap());
        prop_assert_eq!(jsd(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn kl_is_nonnegative((p, q) in pair()) {
        prop_assume!(q.probs.iter().all(|&x| x > 0.0));
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
    }

    #[test]
    fn histograms_sum_to_one(values in vec(0.0f64..100.0, 1..500), bins in 2usize..80) {
        let spec = HistogramSpec::from_baseline(&values, bins, 0.99).unwrap();
        let d = Distribution::from_values(&spec, &values).unwrap();
        prop_assert_eq!(d.len(), spec.bin_count());
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(d.probs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn moments_scale_with_the_data(values in vec(0.0f64..10.0, 2..200), c in 0.1f64..10.0) {
        let seg = |values: Vec<f64>| InterArrivalSegment { start: 0.0, window: 1.0, values, label: None };
        let base = moment_features(&seg(values.clone()), FeatureKind::MeanVar).unwrap().values;
        let scaled = moment_features(&seg(values.iter().map(|v| v * c).collect()), FeatureKind::MeanVar).unwrap().values;
        prop_assert!((scaled[0] - c * base[0]).abs() <= 1e-9 * (1.0 + c * base[0]));
        prop_assert!((scaled[1] - c * c * base[1]).abs() <= 1e-9 * (1.0 + c * c * base[1]));
    }

    #[test]
    fn inter_arrivals_are_consecutive_gaps(mut times in vec(0.0f64..1e5, 2..300)) {
        times.sort_by(f64::total_cmp);
        let gaps = inter_arrivals(&capture(&times)).unwrap();
        prop_assert_eq!(gaps.len(), times.len() - 1);
        for (i, g) in gaps.iter().enumerate() {
            prop_assert!(*g >= 0.0);
            prop_assert_eq!(*g, times[i + 1] - times[i]);
        }
    }

    #[test]
    fn segments_tile_wall_time(period in 0.5f64..120.0, window in 60.0f64..3600.0, n in 20usize..2000) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * period).collect();
        let span = times[n - 1];
        let c = capture(&times);
        let expected = (span / window).floor() as usize;
        match segment(&c, window, None) {
            Ok(segs) => {
                prop_assert_eq!(segs.len(), expected);
                for (k, s) in segs.iter().enumerate() {
                    prop_assert_eq!(s.start, k as f64 * window);
                    prop_assert!(s.values.iter().all(|&v| v >= 0.0 && v < window));
                    prop_assert!(s.values.iter().sum::<f64>() < window);
                }
            }
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }
}

#[test]
fn hand_derived_divergences() {
    let p = Distribution::from_probs(vec![1.0, 0.0]).unwrap();
    let q = Distribution::from_probs(vec![0.5, 0.5]).unwrap();
    let r = Distribution::from_probs(vec![0.25, 0.75]).unwrap();
    // 0.5*log2(2) + 0.5*log2(2/3)
    let kl = 0.5 + 0.5 * (2.0f64 / 3.0).log2();
    assert!((kl_divergence(&q, &r).unwrap() - kl).abs() < 1e-12);
    assert!((kl - 0.207518).abs() < 1e-6);
    // 0.5*log2(4/3) + 0.5*(0.5*log2(2/3) + 0.5*log2(2))
    let j = 0.5 * (4.0f64 / 3.0).log2() + 0.25 * (2.0f64 / 3.0).log2() + 0.25;
    assert!((jsd(&p, &q).unwrap() - j).abs() < 1e-12);
    assert!((j - 0.311278).abs() < 1e-6);
}
