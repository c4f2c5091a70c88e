mod common;

use common::{fd_partial, random_function, random_point, rel_err, rng};
use proptest::prelude::*;
use webgeo_core::{parse, Jet, Point};

const ORDER: usize = 4;

fn partials_up_to_four(jet: &Jet) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (1..=ORDER).flat_map(move |n| (0..=n).map(move |i| (i, n - i, jet.partial(i, n - i).unwrap())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_partials_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_function(&mut r, 3);
        let p = random_point(&mut r);
        let jet = t.expr().jet(p, ORDER).unwrap();
        let f = |x: f64, y: f64| t.eval(x, y);
        for (i, j, got) in partials_up_to_four(&jet) {
            let want = fd_partial(&f, p, i, j);
            prop_assert!(rel_err(got, want, 1.0) <= 1e-5, "{t} at {p}: d({i},{j}) jet {got} fd {want}");
        }
    }

    #[test]
    fn jet_value_is_plain_evaluation(seed in any::<u64>(), order in 1usize..=4) {
        let mut r = rng(seed);
        let e = random_function(&mut r, 3).expr();
        let p = random_point(&mut r);
        prop_assert_eq!(e.jet(p, order).unwrap().value(), e.eval(p).unwrap());
    }

    #[test]
    fn first_partials_match_symbolic_derivatives(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_function(&mut r, 3);
        let p = random_point(&mut r);
        let jet = t.expr().jet(p, 1).unwrap();
        let dx = t.d(true).eval(p.x, p.y);
        let dy = t.d(false).eval(p.x, p.y);
        prop_assert!(rel_err(jet.partial(1, 0).unwrap(), dx, 1.0) <= 1e-12, "{t}");
        prop_assert!(rel_err(jet.partial(0, 1).unwrap(), dy, 1.0) <= 1e-12, "{t}");
    }

    #[test]
    fn derivative_jet_matches_differentiated_expression(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_function(&mut r, 2);
        let p = random_point(&mut r);
        let from_jet = t.expr().jet(p, 4).unwrap().derivative(webgeo_core::Axis::X).unwrap();
        let direct = t.d(true).expr().jet(p, 3).unwrap();
        for (a, b) in from_jet.coefficients().iter().zip(direct.coefficients()) {
            prop_assert!(rel_err(*a, *b, 1.0) <= 1e-10, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn parser_never_panics(text in "[ -~]{0,40}") {
        let _ = parse(&text);
    }
}

#[test]
fn parabola_tangent_jet_has_zero_flex() {
    let jet = parse("x + sqrt(x^2 - y)")
        .unwrap()
        .jet(Point::new(2.0, 3.0), 2)
        .unwrap();
    let d = |i, j| jet.partial(i, j).unwrap();
    let flex =
        d(0, 1).powi(2) * d(2, 0) - 2.0 * d(1, 0) * d(0, 1) * d(1, 1) + d(1, 0).powi(2) * d(0, 2);
    assert!(flex.abs() < 1e-14, "{flex}");
}
