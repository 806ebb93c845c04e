mod common;

fn check(suite: fn() -> Result<(), String>) {
    if let Err(e) = suite() {
        panic!("{e}");
    }
}

#[test]
fn message_marginal_ignores_unitary() {
    check(common::message_marginal_is_unitary_independent);
}

#[test]
fn trivial_output_carries_no_information() {
    check(common::trivial_output_is_indistinguishable);
}
