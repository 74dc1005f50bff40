mod common;

use std::collections::HashSet;

use mgmu::features::{compute_fvtc, ChannelSeries, CorrelationEstimator, Modality};
use mgmu::synth::{
    assign_class, coupling_matrix, embedding_table, generate_cohort, generate_session, simulate_var, spectral_radius_bound,
    split_subjects, Class, CohortSpec, BPRS_ITEMS, MAX_SPECTRAL_RADIUS, NEGATIVE_ITEMS, POSITIVE_ITEMS,
};
use mgmu::Error;
use rand::seq::SliceRandom;

fn scores(positive: [u8; 4], negative: [u8; 3]) -> [u8; BPRS_ITEMS] {
    let mut s = [2u8; BPRS_ITEMS];
    for (&i, &v) in POSITIVE_ITEMS.iter().zip(&positive) {
        s[i] = v;
    }
    for (&i, &v) in NEGATIVE_ITEMS.iter().zip(&negative) {
        s[i] = v;
    }
    s
}

#[test]
fn class_assignment_examples() {
    assert_eq!(assign_class(true, &[7; BPRS_ITEMS]).unwrap(), Class::Hc);
    assert_eq!(assign_class(false, &scores([4, 4, 4, 2], [1, 1, 1])).unwrap(), Class::PSz);
    assert_eq!(assign_class(false, &scores([4, 4, 3, 2], [1, 1, 1])).unwrap(), Class::MSz);
    assert_eq!(assign_class(false, &scores([1, 1, 1, 1], [1, 1, 1])).unwrap(), Class::MSz);
    // Positive and negative symptoms together are mixed.
    assert_eq!(assign_class(false, &scores([5, 5, 5, 5], [4, 4, 3])).unwrap(), Class::MSz);
    let mut bad = [1u8; BPRS_ITEMS];
    bad[5] = 8;
    assert!(matches!(assign_class(true, &bad), Err(Error::Invalid(_))));
    bad[5] = 0;
    assert!(assign_class(false, &bad).is_err());
}

#[test]
fn default_cohort_matches_table_totals() {
    let cohort = generate_cohort(&CohortSpec::default()).unwrap();
    assert_eq!(cohort.subjects.len(), 40);
    assert_eq!(cohort.sessions.len(), 140);
    for (c, want) in Class::ALL.iter().zip([54, 56, 30]) {
        assert_eq!(cohort.sessions.iter().filter(|s| s.class == *c).count(), want);
    }
    for s in &cohort.subjects {
        assert!((1..=5).contains(&s.sessions));
        assert!(s.bprs.iter().all(|v| (1..=7).contains(v)));
        assert_eq!(assign_class(s.healthy, &s.bprs).unwrap(), s.class);
        assert_eq!(cohort.sessions.iter().filter(|x| x.subject == s.id).count(), s.sessions);
    }
    for s in &cohort.sessions {
        assert!((240.0..=720.0).contains(&s.duration_s));
    }
}

#[test]
fn cohort_is_bit_identical_per_seed() {
    let spec = CohortSpec { seed: 7, ..CohortSpec::tiny() };
    let a = generate_cohort(&spec).unwrap();
    let b = generate_cohort(&spec).unwrap();
    assert_eq!(a, b);
    let sa = generate_session(&spec, &a.sessions[4]).unwrap();
    let sb = generate_session(&spec, &b.sessions[4]).unwrap();
    assert_eq!(sa.audio, sb.audio);
    assert_eq!(sa.video, sb.video);
    assert_eq!(sa.text, sb.text);
    let other = generate_cohort(&CohortSpec { seed: 8, ..spec.clone() }).unwrap();
    assert_ne!(a, other);
    assert_eq!(sa.audio.shape(), &[8, (a.sessions[4].duration_s * 100.0) as usize]);
    assert_eq!(sa.video.shape(), &[10, (a.sessions[4].duration_s * 30.0) as usize]);
    let table = embedding_table(&spec).unwrap();
    for row in 0..table.words().len() {
        let v = &table.vectors().data()[row * 100..(row + 1) * 100];
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn couplings_are_stable_and_spectral_bound_is_sound() {
    let spec = CohortSpec { separation: 1.0, ..CohortSpec::default() };
    for class in Class::ALL {
        for modality in [Modality::Audio, Modality::Video] {
            let n = modality.default_channels();
            let a = coupling_matrix(&spec, modality, class, "x01").unwrap();
            assert!(spectral_radius_bound(&a, n) < MAX_SPECTRAL_RADIUS);
        }
    }
    // Power iteration on a symmetric matrix gives the radius independently.
    let mut r = common::rng(3);
    let m = common::random_tensor(&mut r, &[6, 6], 1.0);
    let sym: Vec<f64> = (0..36).map(|k| (m.data()[k] + m.data()[(k % 6) * 6 + k / 6]) / 2.0).collect();
    let mut v = vec![1.0; 6];
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w: Vec<f64> = (0..6).map(|i| (0..6).map(|j| sym[i * 6 + j] * v[j]).sum()).collect();
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / lambda).collect();
    }
    let bound = spectral_radius_bound(&sym, 6);
    assert!(bound >= lambda - 1e-9 && bound < lambda * 1.01, "{bound} vs {lambda}");
}

#[test]
fn var_variance_matches_lyapunov_solution() {
    let spec = CohortSpec::default();
    let a = coupling_matrix(&spec, Modality::Audio, Class::PSz, "s1").unwrap();
    let n = 8;
    // Σ = AΣAᵀ + σ²I by fixed-point iteration.
    let mut sigma = vec![0.0; n * n];
    for _ in 0..2000 {
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { spec.noise * spec.noise } else { 0.0 };
                for k in 0..n {
                    for l in 0..n {
                        acc += a[i * n + k] * sigma[k * n + l] * a[j * n + l];
                    }
                }
                next[i * n + j] = acc;
            }
        }
        sigma = next;
    }
    let x = simulate_var(&a, n, 200_000, spec.noise, &mut common::rng(11));
    for i in 0..n {
        let row = &x.data()[i * 200_000..(i + 1) * 200_000];
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
        assert!(var.is_finite());
        let want = sigma[i * n + i];
        assert!((var - want).abs() / want < 0.1, "channel {i}: {var} vs {want}");
    }
}

/// Permutation test on the squared distance between two class-mean FVTC
/// vectors. Returns the p-value.
fn permutation_p(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> f64 {
    let stat = |xs: &[&Vec<f64>], ys: &[&Vec<f64>]| -> f64 {
        let dim = xs[0].len();
        (0..dim)
            .map(|k| {
                let mx = xs.iter().map(|v| v[k]).sum::<f64>() / xs.len() as f64;
                let my = ys.iter().map(|v| v[k]).sum::<f64>() / ys.len() as f64;
                (mx - my).powi(2)
            })
            .sum()
    };
    let all: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let observed = stat(&all[..a.len()], &all[a.len()..]);
    let mut r = common::rng(seed);
    let mut pool = all.clone();
    let mut hits = 0;
    for _ in 0..permutations {
        pool.shuffle(&mut r);
        if stat(&pool[..a.len()], &pool[a.len()..]) >= observed {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (permutations + 1) as f64
}

fn class_segments(spec: &CohortSpec, class: Class, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let subject = format!("{}-{i}", class.name());
            let a = coupling_matrix(spec, Modality::Audio, class, &subject).unwrap();
            let x = simulate_var(&a, 8, 4000, spec.noise, &mut common::rng(1000 + i as u64 + 100 * class.index() as u64));
            let series = ChannelSeries::with_defaults(Modality::Audio, 100.0, x).unwrap();
            compute_fvtc(&series, 50, CorrelationEstimator::FullSegment).unwrap().values.data().to_vec()
        })
        .collect()
}

#[test]
fn zero_separation_makes_classes_indistinguishable() {
    let flat = CohortSpec { separation: 0.0, ..CohortSpec::default() };
    let p = permutation_p(&class_segments(&flat, Class::Hc, 50), &class_segments(&flat, Class::PSz, 50), 999, 1);
    assert!(p > 0.01, "p = {p}");
    // The same test detects the planted coupling.
    let strong = CohortSpec { separation: 0.5, ..CohortSpec::default() };
    let p = permutation_p(&class_segments(&strong, Class::Hc, 50), &class_segments(&strong, Class::PSz, 50), 999, 1);
    assert!(p <= 0.01, "p = {p}");
}

fn roster(counts: [usize; 3]) -> Vec<(String, Class)> {
    Class::ALL
        .iter()
        .zip(counts)
        .flat_map(|(c, n)| (0..n).map(move |i| (format!("{}{i:02}", c.name()), *c)))
        .collect()
}

#[test]
fn split_sizes_and_stratification() {
    let subjects = roster([14, 16, 10]);
    let s = split_subjects(&subjects, [0.7, 0.15, 0.15], 0).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (28, 6, 6));
    for split in [&s.val, &s.test] {
        for c in Class::ALL {
            assert!(split.iter().any(|id| id.starts_with(c.name())), "{split:?}");
        }
    }
    assert_eq!(s, split_subjects(&subjects, [0.7, 0.15, 0.15], 0).unwrap());
    assert!(split_subjects(&roster([2, 2, 2]), [0.7, 0.15, 0.15], 0).is_err());
    let tiny = split_subjects(&roster([3, 3, 3]), [0.7, 0.15, 0.15], 0).unwrap();
    assert_eq!((tiny.train.len(), tiny.val.len(), tiny.test.len()), (3, 3, 3));
}

#[test]
fn splits_never_leak_over_many_seeds() {
    let subjects = roster([14, 16, 10]);
    let ids: HashSet<&String> = subjects.iter().map(|(id, _)| id).collect();
    for seed in 0..1000 {
        let s = split_subjects(&subjects, [0.7, 0.15, 0.15], seed).unwrap();
        let sets: Vec<HashSet<&String>> = [&s.train, &s.val, &s.test].iter().map(|v| v.iter().collect()).collect();
        assert!(sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2]));
        let union: HashSet<&String> = sets.iter().flatten().copied().collect();
        assert_eq!(union, ids);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (28, 6, 6));
    }
}
