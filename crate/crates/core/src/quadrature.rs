//! Fixed composite Gauss-Legendre rules.
//!
//! The primitive `F(xi) = int_0^xi g(s) s^(p-1) ds` is evaluated as
//! `xi^p int_0^1 g(xi t) t^(p-1) dt` on dyadic panels `[2^-(k+1), 2^-k]`.
//! The rule is the same for nearby `xi`, so `F` is a smooth function of its
//! argument and finite differences of the energy stay clean.

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// 8-point Gauss-Legendre on `[a, b]`.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL8.iter()
        .map(|&(x, w)| w * (f(mid - half * x) + f(mid + half * x)))
        .sum::<f64>()
        * half
}

/// `int_0^1 f(t) dt` on dyadic panels refined toward `t = 0`.
pub fn dyadic(f: impl Fn(f64) -> f64, levels: u32) -> f64 {
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        total += gauss_legendre(&f, lo, hi);
        hi = lo;
    }
    total + gauss_legendre(&f, 0.0, hi)
}

/// `int_0^xi g(s) s^(p-1) ds` for `xi >= 0`.
pub fn power_weighted_primitive(g: impl Fn(f64) -> f64, xi: f64, p: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let levels = 14 + xi.max(1.0).log2().ceil().min(48.0) as u32;
    let inner = dyadic(|t| g(xi * t) * t.powf(p - 1.0), levels);
    xi.powf(p) * inner
}
