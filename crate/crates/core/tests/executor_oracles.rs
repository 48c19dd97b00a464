mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reduce_matches_a_scan(case in common::filter_case()) {
        common::check_reduce(&case)?;
    }

    #[test]
    fn stacking_conserves_values(grid in common::grid(1..=6, 1..=20, false)) {
        common::check_stack(&grid)?;
    }

    #[test]
    fn sorting_orders_by_value((values, keep, asc) in common::bar_case()) {
        common::check_sort(&values, &keep, asc)?;
    }

    #[test]
    fn ranks_match_a_sort((values, keep, top) in common::bar_case()) {
        common::check_rank(&values, &keep, top)?;
    }

    #[test]
    fn derived_sum_and_difference_are_pointwise((grid, a, b, sum) in common::derive_case()) {
        common::check_derive(&grid, a, b, sum)?;
    }
}
