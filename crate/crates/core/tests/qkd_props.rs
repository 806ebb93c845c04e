mod common;

fn check(suite: fn() -> Result<(), String>) {
    if let Err(e) = suite() {
        panic!("{e}");
    }
}

#[test]
fn security_bounds_follow_alicki_fannes() {
    check(common::qkd_bounds_match_alicki_fannes);
}

#[test]
fn key_holder_recovers_cyphertext() {
    check(common::qkd_recovery_is_exact);
}
