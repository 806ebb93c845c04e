mod common;

fn check(suite: fn() -> Result<(), String>) {
    if let Err(e) = suite() {
        panic!("{e}");
    }
}

#[test]
fn trace_distance_is_a_contractive_metric() {
    check(common::trace_distance_metric);
}

#[test]
fn one_norm_bounded_by_collision_entropy() {
    check(common::one_norm_entropy_bound_holds);
}

#[test]
fn vec_to_op_preserves_norm() {
    check(common::vec_to_op_isometric);
}

#[test]
fn purification_reproduces_state() {
    check(common::purification_marginal);
}
