mod common;

fn check(suite: fn() -> Result<(), String>) {
    if let Err(e) = suite() {
        panic!("{e}");
    }
}

#[test]
fn haar_measure_is_left_invariant() {
    check(common::haar_left_invariance);
}

#[test]
fn twirl_commutes_with_local_unitaries() {
    check(common::twirl_commutes);
}

#[test]
fn monte_carlo_error_scales_as_inverse_root() {
    check(common::mc_twirl_converges);
}
