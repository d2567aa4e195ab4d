//! Reaction coefficients `g(x, xi)`: positive, strictly decreasing in `xi`,
//! with limits `g0(x) = g(x, 0)` and `ginf(x) = lim g(x, xi)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::power_weighted_primitive;

type PointFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type CoefFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
type PrimitiveFn = Arc<dyn Fn([f64; 2], f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    /// `a + b exp(-c xi)`
    OnePlusExp { a: f64, b: f64, c: f64 },
    /// `a + b (1 + xi)^(-c)`
    PowerDecay { a: f64, b: f64, c: f64 },
    Custom {
        g: CoefFn,
        dg: Option<CoefFn>,
        ginf: PointFn,
        lipschitz: f64,
        primitive: Option<PrimitiveFn>,
    },
}

/// The reaction coefficient `g` of `v_t = Delta_p v + lambda g(x, v) phi_p(v)`.
///
/// For negative arguments `g` is extended by `g(x, 0)`, which only matters
/// for round-off sized undershoots inside the solvers.
#[derive(Clone)]
pub struct Nonlinearity {
    family: Family,
    name: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity").field("name", &self.name).finish()
    }
}

fn check_family_params(family: &str, a: f64, b: f64, c: f64) -> Result<()> {
    if ![a, b, c].iter().all(|v| v.is_finite()) {
        return Err(Error::Config(format!("{family}: parameters must be finite")));
    }
    if a < 0.0 {
        return Err(Error::Config(format!(
            "{family}: a = {a} gives g_inf < 0; need g_inf >= 0"
        )));
    }
    if b <= 0.0 || c <= 0.0 {
        return Err(Error::Config(format!(
            "{family}: need b > 0 and c > 0 for g to be strictly decreasing (b = {b}, c = {c})"
        )));
    }
    Ok(())
}

impl Nonlinearity {
    /// `g(xi) = a + b exp(-c xi)`, so `g0 = a + b` and `ginf = a`.
    pub fn one_plus_exp(a: f64, b: f64, c: f64) -> Result<Self> {
        check_family_params("one_plus_exp", a, b, c)?;
        Ok(Self {
            family: Family::OnePlusExp { a, b, c },
            name: format!("one_plus_exp a={a} b={b} c={c}"),
        })
    }

    /// `g(xi) = a + b / (1 + xi)^c`, so `g0 = a + b` and `ginf = a`.
    pub fn power_decay(a: f64, b: f64, c: f64) -> Result<Self> {
        check_family_params("power_decay", a, b, c)?;
        Ok(Self {
            family: Family::PowerDecay { a, b, c },
            name: format!("power_decay a={a} b={b} c={c}"),
        })
    }

    /// A user supplied coefficient. `ginf` must be the analytic limit and
    /// `lipschitz` a bound for `|dg/dxi|` on `[0, inf)`.
    ///
    /// The hypotheses are spot-checked on a lattice of sample points; a
    /// violation is reported as a configuration error.
    pub fn custom(
        name: impl Into<String>,
        g: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
        ginf: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Result<Self> {
        let nl = Self {
            family: Family::Custom {
                g: Arc::new(g),
                dg: None,
                ginf: Arc::new(ginf),
                lipschitz,
                primitive: None,
            },
            name: name.into(),
        };
        nl.check_hypotheses()?;
        Ok(nl)
    }

    /// Registers an exact `dg/dxi` for a custom coefficient.
    pub fn with_derivative(
        mut self,
        dg: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        if let Family::Custom { dg: slot, .. } = &mut self.family {
            *slot = Some(Arc::new(dg));
        }
        self
    }

    /// Registers a closed form `F(x, xi, p) = int_0^xi g(x, s) s^(p-1) ds`.
    pub fn with_primitive(
        mut self,
        f: impl Fn([f64; 2], f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        if let Family::Custom { primitive, .. } = &mut self.family {
            *primitive = Some(Arc::new(f));
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `g(x, xi)`; negative `xi` reads `g(x, 0)`.
    pub fn g(&self, x: [f64; 2], xi: f64) -> f64 {
        let xi = xi.max(0.0);
        match &self.family {
            Family::OnePlusExp { a, b, c } => a + b * (-c * xi).exp(),
            Family::PowerDecay { a, b, c } => a + b * (1.0 + xi).powf(-c),
            Family::Custom { g, .. } => g(x, xi),
        }
    }

    /// `dg/dxi`, zero for negative `xi`.
    pub fn dg(&self, x: [f64; 2], xi: f64) -> f64 {
        if xi < 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::OnePlusExp { b, c, .. } => -b * c * (-c * xi).exp(),
            Family::PowerDecay { b, c, .. } => -b * c * (1.0 + xi).powf(-c - 1.0),
            Family::Custom { dg: Some(dg), .. } => dg(x, xi),
            Family::Custom { g, .. } => {
                let step = 1e-6 * (1.0 + xi);
                let lo = (xi - step).max(0.0);
                (g(x, xi + step) - g(x, lo)) / (xi + step - lo)
            }
        }
    }

    pub fn g0(&self, x: [f64; 2]) -> f64 {
        self.g(x, 0.0)
    }

    pub fn ginf(&self, x: [f64; 2]) -> f64 {
        match &self.family {
            Family::OnePlusExp { a, .. } | Family::PowerDecay { a, .. } => *a,
            Family::Custom { ginf, .. } => ginf(x),
        }
    }

    /// A Lipschitz constant of `g(x, .)` on `[0, k]`.
    pub fn lipschitz(&self, _k: f64) -> f64 {
        match &self.family {
            Family::OnePlusExp { b, c, .. } | Family::PowerDecay { b, c, .. } => b * c,
            Family::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// `F(x, xi) = int_0^xi g(x, s) s^(p-1) ds`, extended by `g0 |xi|^p / p`
    /// for negative `xi`.
    pub fn primitive(&self, x: [f64; 2], xi: f64, p: f64) -> f64 {
        if xi <= 0.0 {
            return self.g0(x) * (-xi).powf(p) / p;
        }
        match &self.family {
            Family::Custom {
                primitive: Some(f), ..
            } => f(x, xi, p),
            _ => power_weighted_primitive(|s| self.g(x, s), xi, p),
        }
    }

    /// Spot-checks positivity, strict decrease, the limit ordering and the
    /// Lipschitz bound on a lattice of `(x, xi)` samples.
    pub fn check_hypotheses(&self) -> Result<()> {
        let xs: Vec<[f64; 2]> = (1..8)
            .flat_map(|i| (1..8).map(move |j| [i as f64 / 8.0, j as f64 / 8.0]))
            .collect();
        let xis: Vec<f64> = (0..60).map(|k| 1e-3 * 1.3f64.powi(k) - 1e-3).collect();
        let lip = self.lipschitz(f64::INFINITY);
        for &x in &xs {
            let (g0, ginf) = (self.g0(x), self.ginf(x));
            if !(ginf >= 0.0 && ginf < g0) {
                return Err(Error::Config(format!(
                    "{}: need 0 <= g_inf < g_0, got g_inf = {ginf}, g_0 = {g0} at x = {x:?}",
                    self.name
                )));
            }
            let mut prev = f64::INFINITY;
            let mut prev_xi = f64::NAN;
            for &xi in &xis {
                let v = self.g(x, xi);
                // once g has settled to its limit in floating point, equality is fine
                let settled = (v - ginf).abs() <= 1e-14 * g0;
                if !(v > 0.0 || (v == 0.0 && settled)) {
                    return Err(Error::Config(format!(
                        "{}: g must be positive, g({x:?}, {xi}) = {v}",
                        self.name
                    )));
                }
                if !(v < prev || (v == prev && settled)) {
                    return Err(Error::Config(format!(
                        "{}: g is not strictly decreasing near xi = {xi} at x = {x:?}",
                        self.name
                    )));
                }
                if prev.is_finite() && (prev - v) > lip * (xi - prev_xi) * (1.0 + 1e-9) {
                    return Err(Error::Config(format!(
                        "{}: Lipschitz bound {lip} violated near xi = {xi}",
                        self.name
                    )));
                }
                prev = v;
                prev_xi = xi;
            }
            if prev < ginf {
                return Err(Error::Config(format!(
                    "{}: g dropped below its stated limit g_inf = {ginf}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// The nodal reaction used by the time integrator: either the full
/// coefficient `g(x, v)` or a frozen weight `gamma(x)` independent of `v`.
pub trait Reaction: Sync {
    fn coefficient(&self, node: usize, x: [f64; 2], xi: f64) -> f64;
    fn coefficient_derivative(&self, node: usize, x: [f64; 2], xi: f64) -> f64;
    fn primitive(&self, node: usize, x: [f64; 2], xi: f64, p: f64) -> f64;
}

impl Reaction for Nonlinearity {
    fn coefficient(&self, _node: usize, x: [f64; 2], xi: f64) -> f64 {
        self.g(x, xi)
    }

    fn coefficient_derivative(&self, _node: usize, x: [f64; 2], xi: f64) -> f64 {
        self.dg(x, xi)
    }

    fn primitive(&self, _node: usize, x: [f64; 2], xi: f64, p: f64) -> f64 {
        Nonlinearity::primitive(self, x, xi, p)
    }
}

/// `g(x, xi) = gamma(x)` with nodal values `gamma >= 0`.
#[derive(Debug, Clone)]
pub struct FrozenWeight<'a> {
    pub gamma: &'a [f64],
}

impl Reaction for FrozenWeight<'_> {
    fn coefficient(&self, node: usize, _x: [f64; 2], _xi: f64) -> f64 {
        self.gamma[node]
    }

    fn coefficient_derivative(&self, _node: usize, _x: [f64; 2], _xi: f64) -> f64 {
        0.0
    }

    fn primitive(&self, node: usize, _x: [f64; 2], xi: f64, p: f64) -> f64 {
        self.gamma[node] * xi.abs().powf(p) / p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_have_expected_traces() {
        let g = Nonlinearity::one_plus_exp(1.0, 1.0, 1.0).unwrap();
        assert_eq!(g.g0([0.5, 0.0]), 2.0);
        assert_eq!(g.ginf([0.5, 0.0]), 1.0);
        assert_eq!(g.lipschitz(10.0), 1.0);
        assert!(g.check_hypotheses().is_ok());

        let e = Nonlinearity::one_plus_exp(0.0, 1.0, 1.0).unwrap();
        assert_eq!(e.ginf([0.2, 0.0]), 0.0);
        assert!(e.check_hypotheses().is_ok());

        let pd = Nonlinearity::power_decay(0.5, 2.0, 1.5).unwrap();
        assert_eq!(pd.g0([0.1, 0.1]), 2.5);
        assert!(pd.check_hypotheses().is_ok());
    }

    #[test]
    fn rejects_non_decreasing_parameters() {
        assert!(matches!(
            Nonlinearity::one_plus_exp(1.0, 0.0, 1.0),
            Err(Error::Config(_))
        ));
        assert!(Nonlinearity::one_plus_exp(1.0, 1.0, -1.0).is_err());
        assert!(Nonlinearity::power_decay(-0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for g in [
            Nonlinearity::one_plus_exp(1.0, 2.0, 0.7).unwrap(),
            Nonlinearity::power_decay(0.3, 1.0, 2.0).unwrap(),
        ] {
            for &xi in &[0.0, 0.4, 3.0, 20.0] {
                let h = 1e-6;
                let fd = (g.g([0.5, 0.0], xi + h) - g.g([0.5, 0.0], xi + 1e-12)) / (h - 1e-12);
                let an = g.dg([0.5, 0.0], xi);
                assert!((fd - an).abs() < 1e-5, "xi {xi}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn custom_hypotheses_are_checked() {
        let ok = Nonlinearity::custom(
            "x-modulated",
            |x, xi| (1.0 + x[0]) * (1.0 + (-xi).exp()),
            |x| 1.0 + x[0],
            2.0,
        );
        assert!(ok.is_ok());

        let increasing = Nonlinearity::custom("bad", |_, xi| 1.0 + xi, |_| 1.0, 1.0);
        assert!(matches!(increasing, Err(Error::Config(_))));

        let wrong_limit = Nonlinearity::custom("bad", |_, xi| 1.0 + (-xi).exp(), |_| 3.0, 1.0);
        assert!(wrong_limit.is_err());

        let loose_lipschitz =
            Nonlinearity::custom("bad", |_, xi| 1.0 + 10.0 * (-xi).exp(), |_| 1.0, 1.0);
        assert!(loose_lipschitz.is_err());
    }

    #[test]
    fn primitive_is_bounded_by_upper_envelope() {
        let g = Nonlinearity::power_decay(0.2, 1.0, 1.0).unwrap();
        for &xi in &[0.01, 0.5, 2.0, 40.0] {
            let f = g.primitive([0.5, 0.0], xi, 3.0);
            assert!(f <= g.g0([0.5, 0.0]) * xi.powi(3) / 3.0);
            assert!(f >= g.ginf([0.5, 0.0]) * xi.powi(3) / 3.0);
        }
    }
}
