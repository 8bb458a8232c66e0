use proptest::prelude::*;
use rwre::estimators::mple;
use rwre::likelihood::expansion;
use rwre::rng::substream;
use rwre::{
    beta_thresholds, classify_sites, family_to_theta, log_likelihood, pseudo_likelihood_l, remainder, sample_environment, simulate_walk,
    stats_from_path, FamilyKind, ModelFamily, ThetaParams, WalkStats,
};

const EPS0: f64 = 0.02;

fn kind_of(k: u8) -> FamilyKind {
    [FamilyKind::Temkin, FamilyKind::TwoPoint, FamilyKind::LazyTemkin][k as usize % 3]
}

/// Family member at relative position `u` inside the family box.
fn member(kind: FamilyKind, u: &[f64]) -> ThetaParams {
    let family = ModelFamily::new(kind, EPS0).unwrap();
    let free: Vec<f64> = family.bounds().intervals().iter().zip(u).map(|(iv, t)| iv.lo + t * iv.width()).collect();
    family_to_theta(&family, &free).unwrap()
}

fn walk(theta: &ThetaParams, n: u64, seed: u64) -> (WalkStats, Vec<usize>) {
    let env = sample_environment(theta, 10_000, &mut substream(seed, 1)).unwrap();
    let (stats, path) = simulate_walk(&env, n, substream(seed, 2), true).unwrap();
    (stats, path.unwrap())
}

/// Path of a reflected walk driven by arbitrary coin flips.
fn path_from_bits(bits: &[bool]) -> Vec<usize> {
    let mut path = vec![0usize];
    for &up in bits {
        let x = *path.last().unwrap();
        path.push(if x == 0 || up { x + 1 } else { x - 1 });
    }
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expansion_residual_vanishes(k in 0u8..3, u in prop::collection::vec(0.0f64..=1.0, 2), n in 100u64..3000, seed: u64) {
        let theta = member(kind_of(k), &u);
        let (stats, _) = walk(&theta, n, seed);
        let e = expansion(&theta, &stats).unwrap();
        prop_assert!(e.residual().abs() <= 1e-9 * (1.0 + e.log_likelihood.abs()));
        prop_assert!(e.remainder >= 0.0);
    }

    #[test]
    fn likelihood_sandwich(k in 0u8..3, u in prop::collection::vec(0.0f64..=1.0, 2), bits in prop::collection::vec(any::<bool>(), 1..400)) {
        let theta = member(kind_of(k), &u);
        let stats = stats_from_path(&path_from_bits(&bits)).unwrap();
        prop_assume!(stats.range_size() > 0);
        let gap = log_likelihood(&theta, &stats) - stats.n() as f64 * pseudo_likelihood_l(theta.a(), &stats).unwrap();
        let slack = 1e-9 * (1.0 + gap.abs());
        prop_assert!(gap <= slack);
        prop_assert!(gap >= EPS0.ln() * stats.max_site() as f64 - slack);
        prop_assert!(remainder(&theta, &stats).unwrap() >= 0.0);
    }

    #[test]
    fn path_counters_are_consistent(bits in prop::collection::vec(any::<bool>(), 1..500)) {
        let path = path_from_bits(&bits);
        let stats = stats_from_path(&path).unwrap();
        prop_assert!(stats.check_invariants().is_ok());
        prop_assert_eq!(stats.n(), bits.len() as u64);
        prop_assert_eq!(stats.max_site(), *path.iter().max().unwrap());
    }

    #[test]
    fn classes_maximise_site_score(
        a in prop::collection::btree_set(1u32..999, 2..6),
        plus in 0u64..500,
        minus in 0u64..500,
    ) {
        prop_assume!(plus + minus > 0);
        let a: Vec<f64> = a.into_iter().map(|v| v as f64 / 1000.0).collect();
        let stats = WalkStats::from_counts(vec![0, plus], vec![0, minus]).unwrap();
        let i = classify_sites(&a, &stats).unwrap().labels[0].1;
        let score = |j: usize| plus as f64 * a[j].ln() + minus as f64 * (1.0 - a[j]).ln();
        let best = (0..a.len()).map(score).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(score(i) >= best - 1e-9 * best.abs().max(1.0));
        // no strictly better class below the chosen one
        prop_assert!((0..i).all(|j| score(j) < best - 1e-12 * best.abs().max(1.0)));
    }

    #[test]
    fn thresholds_increase(a in prop::collection::btree_set(1u32..999, 2..7)) {
        let a: Vec<f64> = a.into_iter().map(|v| v as f64 / 1000.0).collect();
        let beta = beta_thresholds(&a).unwrap();
        let v = beta.values();
        prop_assert_eq!(v.len(), a.len() + 1);
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mple_weights_sum_to_one(k in 0u8..3, u in prop::collection::vec(0.0f64..=1.0, 2), seed: u64) {
        let kind = kind_of(k);
        let theta = member(kind, &u);
        let (stats, _) = walk(&theta, 2000, seed);
        let est = mple(&stats, &ModelFamily::new(kind, EPS0).unwrap()).unwrap();
        let r = stats.range_size() as f64;
        let p: Vec<f64> = est.params.iter().filter(|(n, _)| n.starts_with('p')).map(|(_, v)| *v).collect();
        // class counts behind the weights are integers adding up to R_n
        let counts: Vec<f64> = p.iter().map(|v| v * r).collect();
        prop_assert!(counts.iter().all(|c| (c - c.round()).abs() < 1e-9));
        prop_assert_eq!(counts.iter().map(|c| c.round()).sum::<f64>(), r);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn walk_matches_its_path(seed: u64, n in 1u64..5000) {
        let theta = member(FamilyKind::Temkin, &[0.5]);
        let (stats, path) = walk(&theta, n, seed);
        prop_assert_eq!(path.len() as u64, n + 1);
        prop_assert_eq!(stats, stats_from_path(&path).unwrap());
    }
}
