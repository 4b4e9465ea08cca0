use ivus_core::dataset::{synth_phantom, Domain, PhantomParams, TissueLabelMask};
use ivus_core::eval::vtt::{plan_vtt, read_sides, vtt_score, write_vtt, Side};
use ivus_core::eval::{divergence_report, js_divergence, region_pmf, table1_report, table2_report, AnnotatedImage};
use ivus_core::{CartesianImage, PolarImage, TissueClass};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Definition-level JS divergence: natural-log KL terms against the
/// midpoint, converted to bits at the end.
fn js_oracle(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    let kl = |x: &[f64]| -> f64 { x.iter().zip(&m).filter(|(xi, _)| **xi > 0.0).map(|(xi, mi)| xi * (xi / mi).ln()).sum() };
    (0.5 * kl(p) + 0.5 * kl(q)) / std::f64::consts::LN_2
}

fn pmf_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 256).prop_filter_map("non-zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 0.0).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn js_properties(p in pmf_strategy(), q in pmf_strategy()) {
        let pq = js_divergence(&p, &q).unwrap();
        let qp = js_divergence(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((pq - js_oracle(&p, &q)).abs() < 1e-12);
        prop_assert!(js_divergence(&p, &p).unwrap().abs() < 1e-12);
        if p.iter().zip(&q).any(|(a, b)| (a - b).abs() > 1e-6) {
            prop_assert!(pq > 0.0);
        }
    }
}

fn phantom_corpus(n: usize, offset: u64, brightness: f64) -> Vec<AnnotatedImage> {
    let params = PhantomParams { n_radial: 48, n_angular: 48, ..Default::default() };
    (0..n as u64)
        .map(|s| {
            let p = synth_phantom(offset + s, &params).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let img = Array2::from_shape_fn(p.mask.dim(), |(r, c)| {
                let base = match p.mask.data()[[r, c]] {
                    TissueClass::Lumen => 0.1,
                    TissueClass::Media => 0.4,
                    TissueClass::Externa => 0.7,
                };
                (base * brightness + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)
            });
            AnnotatedImage { id: format!("{s}"), image: PolarImage::new(img).unwrap(), mask: p.mask }
        })
        .collect()
}

#[test]
fn pmf_masses_and_counts_are_conserved() {
    let corpus = phantom_corpus(3, 0, 1.0);
    for item in &corpus {
        let mut total = 0;
        for c in TissueClass::ALL {
            let pmf = region_pmf(&item.image, &item.mask, c).unwrap();
            assert!((pmf.mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            total += pmf.n_pixels;
        }
        assert_eq!(total, item.image.data().len());
    }
}

#[test]
fn identical_corpora_give_zero_table1() {
    let corpus = phantom_corpus(12, 0, 1.0);
    // drawing every image makes both pools identical
    let all = table1_report(&corpus, &[("Same", &corpus)], 12, 3).unwrap();
    assert_eq!(all[0].js, [0.0; 3]);
    let partial = table1_report(&corpus, &[("Same", &corpus)], 5, 3).unwrap();
    assert!(partial[0].js.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn reports_are_deterministic_and_ordered() {
    let real = phantom_corpus(20, 0, 1.0);
    let close = phantom_corpus(20, 100, 1.05);
    let far = phantom_corpus(20, 200, 0.5);
    let a = divergence_report(&real, &[("close", &close), ("far", &far)], 10, 7).unwrap();
    let b = divergence_report(&real, &[("close", &close), ("far", &far)], 10, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    for k in 0..3 {
        assert!(a.table1[0].js[k] < a.table1[1].js[k]);
    }
    assert_eq!(a.table2.len(), 3);
    assert!(a.to_text().contains("lumen-media"));
    assert!(a.table1_tsv().starts_with("source\tlumen\tmedia\texterna\n"));
    assert!(table1_report(&real, &[("far", &far)], 25, 7).is_err());
}

#[test]
fn constant_image_has_zero_pairwise_divergence() {
    let mask = TissueLabelMask::new(Array2::from_shape_fn((30, 10), |(r, _)| TissueClass::ALL[r / 10]), Domain::Polar).unwrap();
    let item = AnnotatedImage { id: "c".into(), image: PolarImage::new(Array2::from_elem((30, 10), 0.3)).unwrap(), mask };
    let rows = table2_report(&[("c", std::slice::from_ref(&item))], 1, 0).unwrap();
    assert_eq!(rows[0].js, [0.0; 3]);
}

#[test]
fn pairwise_divergence_is_symmetric() {
    let corpus = phantom_corpus(5, 0, 1.0);
    let item = &corpus[0];
    let p: Vec<_> = TissueClass::ALL.iter().map(|&c| region_pmf(&item.image, &item.mask, c).unwrap()).collect();
    for a in &p {
        for b in &p {
            let ab = js_divergence(&a.mass, &b.mass).unwrap();
            let ba = js_divergence(&b.mass, &a.mass).unwrap();
            assert!((ab - ba).abs() < 1e-12);
        }
    }
}

#[test]
fn random_responses_average_to_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let sessions = 10_000;
    let mut total = 0.0;
    for s in 0..sessions {
        let m = plan_vtt(150, 150, 20, s).unwrap();
        let key: Vec<_> = m.pairs.iter().map(|p| (p.pair_id, p.real_side)).collect();
        let responses: Vec<_> =
            key.iter().map(|(id, _)| (*id, if rng.random_bool(0.5) { Side::Left } else { Side::Right })).collect();
        total += vtt_score(&key, &responses).unwrap().accuracy;
    }
    let mean = total / sessions as f64;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn real_side_is_balanced_over_seeds() {
    let mut left = 0;
    let mut n = 0;
    for seed in 0..500 {
        for p in plan_vtt(40, 40, 20, seed).unwrap().pairs {
            left += (p.real_side == Side::Left) as usize;
            n += 1;
        }
    }
    let frac = left as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.02, "{frac}");
}

#[test]
fn exported_listing_hides_truth() {
    let dir = tempfile::tempdir().unwrap();
    let img = |v: f64| CartesianImage::new(Array2::from_elem((16, 16), v)).unwrap();
    let real: Vec<_> = (0..4).map(|i| (format!("real{i}"), img(0.2))).collect();
    let sim: Vec<_> = (0..4).map(|i| (format!("sim{i}"), img(0.8))).collect();
    let m = plan_vtt(4, 4, 4, 9).unwrap();
    write_vtt(dir.path(), &m, &real, &sim).unwrap();
    let listing = std::fs::read_to_string(dir.path().join("pairs.tsv")).unwrap();
    assert!(!listing.contains("real") && !listing.contains("sim") && !listing.contains("\tL") && !listing.contains("\tR"));
    assert_eq!(listing.lines().count(), 5);

    let key = read_sides(&dir.path().join("answer_key.tsv")).unwrap();
    assert_eq!(key.len(), 4);
    // composite: real (0.2) must be on the recorded side
    for (id, side) in &key {
        let pair = ivus_core::raster::read_gray(&dir.path().join(ivus_core::eval::vtt::pair_file_name(*id))).unwrap();
        let left = pair[[8, 8]];
        assert_eq!(left < 0.5, *side == Side::Left);
    }
    assert_eq!(vtt_score(&key, &key).unwrap().accuracy, 1.0);
}
