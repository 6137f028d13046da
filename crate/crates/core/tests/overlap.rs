mod common;

use afis::matcher::signature_overlap;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn sweep_matches_maximum_matching(
        mut a in prop::collection::vec(0u64..60, 0..14),
        mut b in prop::collection::vec(0u64..60, 0..14),
        tol in 0u64..6,
    ) {
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(signature_overlap(&a, &b, tol), common::brute_force_overlap(&a, &b, tol));
        prop_assert_eq!(signature_overlap(&b, &a, tol), signature_overlap(&a, &b, tol));
    }
}
