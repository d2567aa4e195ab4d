mod common;

use common::{closed_form_eigenvalue, ritz_eigenvalue_2d, shooting_eigenvalue};

#[test]
fn shooting_agrees_with_the_closed_form() {
    for p in [2.0, 2.5, 3.0, 4.0] {
        let (s, c) = (shooting_eigenvalue(p), closed_form_eigenvalue(p));
        assert!((s - c).abs() < 1e-5 * c, "p = {p}: shooting {s}, closed form {c}");
    }
    assert!((shooting_eigenvalue(2.0) - std::f64::consts::PI.powi(2)).abs() < 1e-6);
}

#[test]
fn ritz_bound_at_p2_is_the_exact_value() {
    let r = ritz_eigenvalue_2d(2.0, 3);
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((r - exact).abs() < 1e-6 * exact, "{r} vs {exact}");
}

#[test]
fn ritz_bound_converges_with_more_modes() {
    let coarse = ritz_eigenvalue_2d(3.0, 3);
    let fine = ritz_eigenvalue_2d(3.0, 7);
    eprintln!("ritz p=3: {coarse} {fine}");
    assert!(fine <= coarse * (1.0 + 1e-9));
    assert!((coarse - fine) / fine < 0.02);
}
