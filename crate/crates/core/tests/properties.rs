use proptest::prelude::*;

use leibniz_core::algebra::annihilators_center;
use leibniz_core::families::{
    canonical_samples, instantiate_family, normalize_params, sample_specs, FamilySpec,
};
use leibniz_core::invariants::invariant_profile;
use leibniz_core::normalizer::{
    apply_basis_change, classify, classify_algebra, extract_general_form, random_basis_change,
    round_trip, ScrambleProfile,
};

fn specs_k3() -> Vec<FamilySpec> {
    sample_specs(3, 6, 3)
}

#[test]
fn round_trip_k2_to_5() {
    for k in 2..=5 {
        for (i, spec) in canonical_samples(k, 10, 40).unwrap().iter().enumerate() {
            let r =
                round_trip(spec, 1000 + i as u64, ScrambleProfile::NilradicalPreserving).unwrap();
            assert!(
                r.passed(),
                "{spec} (k={k}): {} vs {}",
                r.classified,
                r.expected
            );
        }
    }
}

#[test]
fn case_two_leaf_matches_right_annihilator() {
    for spec in sample_specs(4, 6, 8) {
        let a = instantiate_family(&spec).unwrap();
        let scrambled = a
            .change_basis(&random_basis_change(5, 4, ScrambleProfile::NilradicalPreserving).matrix)
            .unwrap();
        let (form, _) = extract_general_form(&scrambled, None).unwrap();
        let res = classify(&form).unwrap();
        let Some(leaf) = res.case_trace.iter().find(|c| c.matches('.').count() == 2) else {
            continue;
        };
        let f = form.to_algebra().unwrap();
        let mut ek = vec![num_traits::Zero::zero(); f.dim()];
        ek[form.k - 1] = num_traits::One::one();
        let in_ann = annihilators_center(&f).right.contains(&ek);
        assert_eq!(leaf.ends_with(".1"), in_ann, "{spec}: {leaf}");
    }
}

#[test]
fn general_scramble_still_classifies() {
    // the nilradical is found without a hint, so any basis works
    for (i, spec) in canonical_samples(3, 3, 2).unwrap().iter().enumerate() {
        let r = round_trip(spec, i as u64, ScrambleProfile::General).unwrap();
        assert!(r.passed(), "{spec}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn profile_invariant_under_basis_change(idx in 0usize..200, seed in any::<u64>()) {
        let specs = specs_k3();
        let spec = &specs[idx % specs.len()];
        let a = instantiate_family(spec).unwrap();
        let p = random_basis_change(seed, 3, ScrambleProfile::General);
        prop_assert_eq!(invariant_profile(&apply_basis_change(&a, &p).unwrap()).unwrap(), invariant_profile(&a).unwrap());
    }

    #[test]
    fn change_then_inverse_is_identity(idx in 0usize..200, seed in any::<u64>()) {
        let specs = specs_k3();
        let a = instantiate_family(&specs[idx % specs.len()]).unwrap();
        let p = random_basis_change(seed, 3, ScrambleProfile::General);
        let back = apply_basis_change(&a, &p.then(&p.inverse().unwrap())).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn normalization_is_idempotent(idx in 0usize..200) {
        let specs = specs_k3();
        let once = normalize_params(&specs[idx % specs.len()]).unwrap();
        let twice = normalize_params(&once.spec).unwrap();
        prop_assert!(twice.canonical);
        prop_assert_eq!(twice.spec, once.spec);
    }

    #[test]
    fn label_invariant_under_scrambling(idx in 0usize..200, s1 in any::<u64>(), s2 in any::<u64>()) {
        let specs = specs_k3();
        let a = instantiate_family(&specs[idx % specs.len()]).unwrap();
        let classify_with = |seed| {
            let p = random_basis_change(seed, 3, ScrambleProfile::NilradicalPreserving);
            classify_algebra(&apply_basis_change(&a, &p).unwrap(), None).unwrap().1.spec.spec
        };
        prop_assert_eq!(classify_with(s1), classify_with(s2));
    }
}
