#[path = "support/props.rs"]
mod props;

#[test]
fn expectation_matches_monte_carlo() {
    props::expectation_matches_monte_carlo().unwrap();
}

#[test]
fn substitution_composes() {
    props::substitution_composes().unwrap();
}

#[test]
fn interval_enclosures_are_sound() {
    props::interval_enclosures_are_sound().unwrap();
}

#[test]
fn additive_to_max_dominates() {
    props::additive_to_max_dominates().unwrap();
}

#[test]
fn composition_chain_holds() {
    props::composition_chain_holds().unwrap();
}

#[test]
fn bounds_are_monotone_and_in_range() {
    props::bounds_are_monotone_and_in_range().unwrap();
}

#[test]
fn cycle_check_matches_brute_force() {
    props::cycle_check_matches_brute_force().unwrap();
}
