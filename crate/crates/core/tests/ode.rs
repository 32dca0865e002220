mod common;

use ossify::ode::logistic_step;
use proptest::prelude::*;

#[test]
fn logistic_stepper_is_first_order() {
    let samples: Vec<_> = [50, 100, 200]
        .iter()
        .map(|&n| (1.0 / n as f64, common::logistic_error(n)))
        .collect();
    for order in common::orders(&samples) {
        assert!((order - 1.0).abs() <= 0.2, "{order}");
    }
}

proptest! {
    #[test]
    fn repeated_steps_never_overshoot(
        rate in 0.0..1e3f64,
        cap in 0.05..0.99f64,
        dt in 1e-3..1.0f64,
        steps in 1usize..200,
    ) {
        let mut y = 0.0;
        for _ in 0..steps {
            let next = logistic_step(y, rate, cap, dt).unwrap();
            prop_assert!(next >= y && next <= cap);
            y = next;
        }
    }
}
