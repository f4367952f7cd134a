//! Plant description, gauge transform, normalization and the derived
//! coefficients of the kernel equations.
//!
//! The physical plant is
//!
//! ```text
//! u_t = a1 u_xx + a3(x) u_x + a2(x, t) u,   x in (0, L), t in (0, T)
//! ```
//!
//! controlled at `x = 0`. The gauge transform removes `a3`, and the
//! normalization `x -> (L - x) / L`, `t -> t / T` maps it to
//! `u_t = a u_xx + b(x, t) u` on the unit square with the control acting at
//! `x = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};

pub type ComplexValue = Complex64;

/// Boundary condition at the uncontrolled end (normalized `x = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(Error::InvalidPlant(format!("unknown boundary kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        })
    }
}

/// Complex-valued coefficient given by a pair of real expressions in `(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFn {
    pub re: Expr,
    pub im: Expr,
    /// User declaration that the function is analytic in `t`. Kernel solving
    /// is refused for coefficients without it.
    pub analytic_in_t: bool,
}

impl CoefficientFn {
    pub fn new(re: Expr, im: Expr, analytic_in_t: bool) -> Self {
        Self { re, im, analytic_in_t }
    }

    pub fn constant(value: ComplexValue) -> Self {
        Self::new(Expr::Const(value.re), Expr::Const(value.im), true)
    }

    pub fn real(re: Expr) -> Self {
        Self::new(re, Expr::Const(0.0), true)
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    pub fn parse(re: &str, im: &str, analytic_in_t: bool) -> Result<Self> {
        Ok(Self::new(Expr::parse(re)?, Expr::parse(im)?, analytic_in_t))
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<ComplexValue> {
        Ok(Complex64::new(self.re.eval(x, t)?, self.im.eval(x, t)?))
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.re.depends_on(var) || self.im.depends_on(var)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.re.as_constant() == Some(0.0) && self.im.as_constant() == Some(0.0)
    }

    fn pair(&self) -> (Expr, Expr) {
        (self.re.clone(), self.im.clone())
    }
}

fn cmul((ar, ai): (Expr, Expr), (br, bi): (Expr, Expr)) -> (Expr, Expr) {
    (
        expr::sub(expr::mul(ar.clone(), br.clone()), expr::mul(ai.clone(), bi.clone())),
        expr::add(expr::mul(ar, bi), expr::mul(ai, br)),
    )
}

fn cscale((ar, ai): (Expr, Expr), z: Complex64) -> (Expr, Expr) {
    cmul((ar, ai), (Expr::Const(z.re), Expr::Const(z.im)))
}

/// Maps gauge-transformed solutions back to the original variable:
/// `u(x) = m(x) * u_gauged(x)` with `m(x) = exp(-(1 / (2 a1)) * int_0^x a3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeMultiplier {
    pub a1: ComplexValue,
    pub a3: CoefficientFn,
}

impl GaugeMultiplier {
    pub fn eval(&self, x: f64) -> Result<ComplexValue> {
        if self.a3.is_identically_zero() || x == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let integral = gauss_legendre(|y| self.a3.eval(y, 0.0), 0.0, x, 64)?;
        Ok((-integral / (2.0 * self.a1)).exp())
    }
}

/// Composite 4-point Gauss-Legendre quadrature of a complex integrand.
fn gauss_legendre<F>(f: F, a: f64, b: f64, panels: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    const NODES: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const WEIGHTS: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let width = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (node, weight) in NODES.iter().zip(WEIGHTS) {
            sum += weight * f(mid + 0.5 * width * node)?;
        }
    }
    Ok(sum * 0.5 * width)
}

/// The physical problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub a1: ComplexValue,
    pub a2: CoefficientFn,
    /// Advection coefficient, a function of `x` only.
    pub a3: CoefficientFn,
    pub length: f64,
    pub horizon: f64,
    pub boundary: BoundaryKind,
    /// Normalized horizon on which kernels are computed, in `(0, 1)`.
    pub t0: f64,
    /// Set by [`gauge_transform`].
    pub multiplier: Option<GaugeMultiplier>,
}

impl PlantSpec {
    pub fn new(
        a1: ComplexValue,
        a2: CoefficientFn,
        a3: CoefficientFn,
        length: f64,
        horizon: f64,
        boundary: BoundaryKind,
        t0: f64,
    ) -> Result<Self> {
        let plant = Self {
            a1,
            a2,
            a3,
            length,
            horizon,
            boundary,
            t0,
            multiplier: None,
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1.re > 0.0) || !self.a1.im.is_finite() {
            return Err(Error::InvalidPlant(format!(
                "Re(a1) must be positive, got {}",
                self.a1
            )));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidPlant(format!("length must be positive, got {}", self.length)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidPlant(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.t0 > 0.0 && self.t0 < 1.0) {
            return Err(Error::InvalidPlant(format!(
                "t0 must lie in (0, 1); kernels are unbounded as t -> 1 (got {})",
                self.t0
            )));
        }
        if self.a3.depends_on(Var::T) {
            return Err(Error::InvalidPlant("a3 must not depend on t".into()));
        }
        Ok(())
    }
}

/// Removes the advection term `a3 u_x`.
///
/// With `u = m * v` and `m = exp(-(1/(2 a1)) int_0^x a3)`, `v` solves
/// `v_t = a1 v_xx + (a2 - a3^2 / (4 a1) - a3' / 2) v`.
pub fn gauge_transform(plant: &PlantSpec) -> Result<PlantSpec> {
    plant.validate()?;
    let multiplier = GaugeMultiplier {
        a1: plant.a1,
        a3: plant.a3.clone(),
    };
    if plant.a3.is_identically_zero() {
        return Ok(PlantSpec {
            multiplier: Some(multiplier),
            ..plant.clone()
        });
    }
    let a3 = plant.a3.pair();
    let da3 = (plant.a3.re.derivative(Var::X)?, plant.a3.im.derivative(Var::X)?);
    let square = cmul(a3.clone(), a3);
    let quarter_inv_a1 = 1.0 / (4.0 * plant.a1);
    let (sq_re, sq_im) = cscale(square, quarter_inv_a1);
    let re = expr::sub(
        expr::sub(plant.a2.re.clone(), sq_re),
        expr::mul(Expr::Const(0.5), da3.0),
    );
    let im = expr::sub(
        expr::sub(plant.a2.im.clone(), sq_im),
        expr::mul(Expr::Const(0.5), da3.1),
    );
    Ok(PlantSpec {
        a2: CoefficientFn::new(re, im, plant.a2.analytic_in_t),
        a3: CoefficientFn::zero(),
        multiplier: Some(multiplier),
        ..plant.clone()
    })
}

/// Plant on the unit square: `u_t = a u_xx + b(x, t) u` with
/// `a = a_r + i a_i`, `b = b.re + i b.im`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPlant {
    pub a_r: f64,
    pub a_i: f64,
    pub b: CoefficientFn,
    pub boundary: BoundaryKind,
    /// Physical length and horizon the plant was normalized with.
    pub length: f64,
    pub horizon: f64,
    pub t0: f64,
    pub multiplier: Option<GaugeMultiplier>,
}

impl NormalizedPlant {
    /// Builds a normalized plant directly from its coefficients.
    pub fn from_coefficients(a: ComplexValue, b: CoefficientFn, boundary: BoundaryKind, t0: f64) -> Result<Self> {
        if !(a.re > 0.0) {
            return Err(Error::InvalidPlant(format!("a_R must be positive, got {}", a.re)));
        }
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(Error::InvalidPlant(format!("t0 must lie in (0, 1), got {t0}")));
        }
        Ok(Self {
            a_r: a.re,
            a_i: a.im,
            b,
            boundary,
            length: 1.0,
            horizon: 1.0,
            t0,
            multiplier: None,
        })
    }

    pub fn a(&self) -> ComplexValue {
        Complex64::new(self.a_r, self.a_i)
    }

    /// Samples `b` at every `(x, t)` pair, laid out `[t][x]`.
    pub fn sample_b(&self, xs: &[f64], ts: &[f64]) -> Result<Vec<Vec<ComplexValue>>> {
        sample(&self.b, xs, ts)
    }

    /// Heuristic check of the analyticity declaration: flags coefficients whose
    /// divided differences in `t` grow like those of a kink rather than an
    /// analytic function. Returns human-readable warnings.
    pub fn analyticity_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (name, e) in [("b_R", &self.b.re), ("b_I", &self.b.im)] {
            if let Some(w) = divided_difference_warning(name, e) {
                warnings.push(w);
            }
        }
        warnings
    }
}

fn sample(f: &CoefficientFn, xs: &[f64], ts: &[f64]) -> Result<Vec<Vec<ComplexValue>>> {
    ts.iter()
        .map(|&t| xs.iter().map(|&x| f.eval(x, t)).collect())
        .collect()
}

fn divided_difference_warning(name: &str, e: &Expr) -> Option<String> {
    if !e.depends_on(Var::T) {
        return None;
    }
    const SAMPLES: usize = 17;
    let h = 1.0 / (SAMPLES - 1) as f64;
    for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut values: Vec<f64> = match (0..SAMPLES).map(|j| e.eval(x, j as f64 * h)).collect() {
            Ok(v) => v,
            Err(err) => return Some(format!("{name}: evaluation failed during analyticity check: {err}")),
        };
        let mut rates = Vec::new();
        let mut factorial = 1.0;
        for k in 1..=6 {
            factorial *= k as f64;
            values = values.windows(2).map(|w| w[1] - w[0]).collect();
            let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            rates.push((sup / h.powi(k) / factorial).powf(1.0 / k as f64));
        }
        let early = rates[0].max(rates[1]).max(3.0);
        if rates[5] > early {
            return Some(format!(
                "{name}: t-derivatives near x={x} grow like a non-analytic function \
                 (6th-order rate {:.3} > {:.3}); the analyticity declaration may be wrong",
                rates[5], early
            ));
        }
    }
    None
}

/// Target system `w_t = a w_xx + f(x, t) w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub f: CoefficientFn,
    pub decay_c: f64,
}

impl TargetSpec {
    /// The default family `f = -c`.
    pub fn damped(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidPlant(format!("target damping must be >= 0, got {c}")));
        }
        Ok(Self {
            f: CoefficientFn::constant(Complex64::new(-c, 0.0)),
            decay_c: c,
        })
    }

    pub fn custom(f: CoefficientFn, decay_c: f64) -> Result<Self> {
        if !f.analytic_in_t {
            return Err(Error::NotAnalytic);
        }
        if f.re.derivative(Var::X).is_err() || f.im.derivative(Var::X).is_err() {
            return Err(Error::InvalidPlant("target coefficient must be differentiable in x".into()));
        }
        Ok(Self { f, decay_c })
    }

    pub fn sample_f(&self, xs: &[f64], ts: &[f64]) -> Result<Vec<Vec<ComplexValue>>> {
        sample(&self.f, xs, ts)
    }
}

/// Maps the gauge-transformed plant to the unit square. The time factor `T`
/// multiplies both `a` and `b`, so the result is exact for any horizon.
pub fn normalize(plant: &PlantSpec) -> Result<NormalizedPlant> {
    plant.validate()?;
    if !plant.a3.is_identically_zero() {
        return Err(Error::InvalidPlant(
            "advection term present; apply gauge_transform before normalize".into(),
        ));
    }
    let (l, big_t) = (plant.length, plant.horizon);
    let a = plant.a1 * big_t / (l * l);
    let physical_x = expr::mul(Expr::Const(l), expr::sub(Expr::Const(1.0), Expr::x()));
    let physical_t = expr::mul(Expr::Const(big_t), Expr::t());
    let map = |e: &Expr| {
        let mapped = e.substitute(Var::X, &physical_x).substitute(Var::T, &physical_t);
        expr::mul(Expr::Const(big_t), mapped)
    };
    Ok(NormalizedPlant {
        a_r: a.re,
        a_i: a.im,
        b: CoefficientFn::new(map(&plant.a2.re), map(&plant.a2.im), plant.a2.analytic_in_t),
        boundary: plant.boundary,
        length: l,
        horizon: big_t,
        t0: plant.t0,
        multiplier: plant.multiplier.clone(),
    })
}

/// Coefficients of the kernel equations at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTerms {
    pub beta: f64,
    pub beta_c: f64,
    pub p1: f64,
    pub p2: f64,
    pub q1: f64,
    pub q2: f64,
}

/// `p1 = q1 = a_R / |a|^2`, `p2 = -q2 = -a_I / |a|^2`.
pub fn time_coefficients(a_r: f64, a_i: f64) -> (f64, f64, f64, f64) {
    let norm = a_r * a_r + a_i * a_i;
    let p1 = a_r / norm;
    let p2 = -a_i / norm;
    (p1, p2, p1, -p2)
}

/// `beta`, `beta_c` from `b(y, t) - f(x, t)`.
#[inline]
pub fn beta_pair(a_r: f64, a_i: f64, db_r: f64, db_i: f64) -> (f64, f64) {
    let norm = a_r * a_r + a_i * a_i;
    (
        (a_r * db_r + a_i * db_i) / norm,
        (a_r * db_i - a_i * db_r) / norm,
    )
}

pub fn derive_beta(np: &NormalizedPlant, tgt: &TargetSpec, x: f64, y: f64, t: f64) -> Result<BetaTerms> {
    let b = np.b.eval(y, t)?;
    let f = tgt.f.eval(x, t)?;
    let (beta, beta_c) = beta_pair(np.a_r, np.a_i, b.re - f.re, b.im - f.im);
    let (p1, p2, q1, q2) = time_coefficients(np.a_r, np.a_i);
    Ok(BetaTerms {
        beta,
        beta_c,
        p1,
        p2,
        q1,
        q2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plant(a1: Complex64, a2: &str, a3: &str, l: f64, t: f64) -> PlantSpec {
        PlantSpec::new(
            a1,
            CoefficientFn::parse(a2, "0", true).unwrap(),
            CoefficientFn::parse(a3, "0", true).unwrap(),
            l,
            t,
            BoundaryKind::Dirichlet,
            0.8,
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_plants() {
        let a2 = CoefficientFn::zero();
        let a3 = CoefficientFn::zero();
        let mk = |a1: Complex64, t0: f64| {
            PlantSpec::new(a1, a2.clone(), a3.clone(), 1.0, 1.0, BoundaryKind::Dirichlet, t0)
        };
        assert!(mk(Complex64::new(0.0, 1.0), 0.5).is_err());
        assert!(mk(Complex64::new(1.0, 0.0), 1.0).is_err());
        assert!(mk(Complex64::new(1.0, 0.0), 0.0).is_err());
        assert!(mk(Complex64::new(1.0, 0.0), 0.99).is_ok());
    }

    #[test]
    fn gauge_identity_without_advection() {
        let p = plant(Complex64::new(1.0, 0.0), "3 + x", "0", 1.0, 1.0);
        let g = gauge_transform(&p).unwrap();
        assert_eq!(g.a2, p.a2);
        let m = g.multiplier.unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(m.eval(x).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn gauge_constant_advection() {
        let c = 1.5;
        let a1 = Complex64::new(2.0, 0.0);
        let p = plant(a1, "4", "1.5", 1.0, 1.0);
        let g = gauge_transform(&p).unwrap();
        assert!(g.a3.is_identically_zero());
        let a2 = g.a2.eval(0.4, 0.2).unwrap();
        assert!((a2.re - (4.0 - c * c / (4.0 * a1.re))).abs() < 1e-14);
        assert_eq!(a2.im, 0.0);
        let m = g.multiplier.unwrap();
        for x in [0.0, 0.3, 1.0] {
            let expected = (-c * x / (2.0 * a1.re)).exp();
            assert!((m.eval(x).unwrap().re - expected).abs() < 1e-14);
        }
    }

    /// The residual of the gauged equation, applied to `u / m`, equals the
    /// original residual divided by `m`; in particular the first-order term is
    /// gone. Checked with a manufactured solution and finite differences.
    #[test]
    fn gauge_manufactured_solution() {
        let a1 = Complex64::new(1.0, 0.5);
        let p = PlantSpec::new(
            a1,
            CoefficientFn::parse("1 + x*t", "x", true).unwrap(),
            CoefficientFn::parse("x", "0.3*x", true).unwrap(),
            1.0,
            1.0,
            BoundaryKind::Dirichlet,
            0.8,
        )
        .unwrap();
        let g = gauge_transform(&p).unwrap();
        let m = g.multiplier.clone().unwrap();
        let u = |x: f64, t: f64| Complex64::new((1.0 + t) * (2.0 * x).sin(), x * x * (-t).exp());
        let v = |x: f64, t: f64| u(x, t) / m.eval(x).unwrap();
        let residual = |w: &dyn Fn(f64, f64) -> Complex64, a2: &CoefficientFn, a3: &CoefficientFn, h: f64| {
            let (x, t) = (0.45, 0.3);
            let wt = (w(x, t + h) - w(x, t - h)) / (2.0 * h);
            let wx = (w(x + h, t) - w(x - h, t)) / (2.0 * h);
            let wxx = (w(x + h, t) - 2.0 * w(x, t) + w(x - h, t)) / (h * h);
            wt - a1 * wxx - a3.eval(x, t).unwrap() * wx - a2.eval(x, t).unwrap() * w(x, t)
        };
        let mut errors = Vec::new();
        for h in [1e-2, 5e-3] {
            let r_orig = residual(&u, &p.a2, &p.a3, h);
            let r_gauged = residual(&v, &g.a2, &g.a3, h);
            let mx = m.eval(0.45).unwrap();
            errors.push((r_gauged - r_orig / mx).norm());
        }
        assert!(errors[1] < 1e-4, "{errors:?}");
        assert!(errors[0] / errors[1] > 3.0, "{errors:?}");
    }

    #[test]
    fn gauge_rejects_non_differentiable_advection() {
        let p = plant(Complex64::new(1.0, 0.0), "0", "abs(x - 0.5)", 1.0, 1.0);
        assert!(matches!(gauge_transform(&p), Err(Error::NotDifferentiable { .. })));
    }

    #[test]
    fn normalize_coefficients() {
        let np = normalize(&plant(Complex64::new(1.0, 0.0), "0", "0", 1.0, 1.0)).unwrap();
        assert_eq!((np.a_r, np.a_i), (1.0, 0.0));
        let np = normalize(&plant(Complex64::new(4.0, 2.0), "0", "0", 2.0, 1.0)).unwrap();
        assert_eq!((np.a_r, np.a_i), (1.0, 0.5));
        let np = normalize(&plant(Complex64::new(1.0, 0.0), "x", "0", 1.0, 1.0)).unwrap();
        for x in [0.0, 0.2, 0.9] {
            assert!((np.b.re.eval(x, 0.3).unwrap() - (1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_includes_time_scale() {
        let np = normalize(&plant(Complex64::new(1.0, 0.0), "x * t", "0", 2.0, 3.0)).unwrap();
        assert_eq!(np.a_r, 3.0 / 4.0);
        // b(x, t) = T * a2((1 - x) L, t T)
        let (x, t) = (0.25, 0.5);
        let expected = 3.0 * ((1.0 - x) * 2.0) * (t * 3.0);
        assert!((np.b.re.eval(x, t).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn normalize_requires_gauge() {
        let p = plant(Complex64::new(1.0, 0.0), "0", "x", 1.0, 1.0);
        assert!(normalize(&p).is_err());
        assert!(normalize(&gauge_transform(&p).unwrap()).is_ok());
    }

    #[test]
    fn normalize_is_deterministic() {
        let p = plant(Complex64::new(1.2, 0.3), "sin(x) * t", "x^2", 1.5, 2.0);
        let a = normalize(&gauge_transform(&p).unwrap()).unwrap();
        let b = normalize(&gauge_transform(&p).unwrap()).unwrap();
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let sa = a.sample_b(&xs, &xs).unwrap();
        let sb = b.sample_b(&xs, &xs).unwrap();
        for (ra, rb) in sa.iter().zip(&sb) {
            for (va, vb) in ra.iter().zip(rb) {
                assert_eq!(va.re.to_bits(), vb.re.to_bits());
                assert_eq!(va.im.to_bits(), vb.im.to_bits());
            }
        }
    }

    fn np_const(a: Complex64, b: Complex64) -> NormalizedPlant {
        NormalizedPlant::from_coefficients(a, CoefficientFn::constant(b), BoundaryKind::Dirichlet, 0.5).unwrap()
    }

    #[test]
    fn beta_examples() {
        let zero = TargetSpec::damped(0.0).unwrap();
        let np = np_const(Complex64::new(2.0, 0.0), Complex64::new(3.0, 1.0));
        let bt = derive_beta(&np, &zero, 0.5, 0.2, 0.1).unwrap();
        assert_eq!((bt.p2, bt.q2), (0.0, 0.0));
        assert_eq!((bt.p1, bt.q1), (0.5, 0.5));

        let np = np_const(Complex64::new(1.0, 1.0), Complex64::new(2.0, 0.0));
        let bt = derive_beta(&np, &zero, 0.7, 0.1, 0.3).unwrap();
        assert_eq!((bt.beta, bt.beta_c), (1.0, -1.0));

        let tgt = TargetSpec::custom(CoefficientFn::constant(Complex64::new(2.0, 0.0)), 0.0).unwrap();
        let np = np_const(Complex64::new(1.0, 1.0), Complex64::new(2.0, 0.0));
        let bt = derive_beta(&np, &tgt, 0.7, 0.1, 0.3).unwrap();
        assert_eq!((bt.beta, bt.beta_c), (0.0, 0.0));
    }

    #[test]
    fn analyticity_heuristic() {
        let smooth = NormalizedPlant::from_coefficients(
            Complex64::new(1.0, 0.0),
            CoefficientFn::parse("10 + 3*x*sin(2*pi*t)", "exp(2*t)", true).unwrap(),
            BoundaryKind::Dirichlet,
            0.8,
        )
        .unwrap();
        assert!(smooth.analyticity_warnings().is_empty());
        let kink = NormalizedPlant::from_coefficients(
            Complex64::new(1.0, 0.0),
            CoefficientFn::parse("abs(t - 0.53)", "0", true).unwrap(),
            BoundaryKind::Dirichlet,
            0.8,
        )
        .unwrap();
        assert_eq!(kink.analyticity_warnings().len(), 1);
    }

    proptest! {
        #[test]
        fn beta_identities(
            a_r in 0.05f64..10.0, a_i in -10.0f64..10.0,
            br in -50.0f64..50.0, bi in -50.0f64..50.0,
            fr in -50.0f64..50.0, fi in -50.0f64..50.0,
        ) {
            let np = np_const(Complex64::new(a_r, a_i), Complex64::new(br, bi));
            let tgt = TargetSpec::custom(CoefficientFn::constant(Complex64::new(fr, fi)), 0.0).unwrap();
            let bt = derive_beta(&np, &tgt, 0.3, 0.2, 0.1).unwrap();
            let lhs1 = a_r * bt.beta - a_i * bt.beta_c;
            let lhs2 = a_r * bt.beta_c + a_i * bt.beta;
            let scale = 1.0 + (br - fr).abs() + (bi - fi).abs();
            prop_assert!((lhs1 - (br - fr)).abs() <= 1e-12 * scale);
            prop_assert!((lhs2 - (bi - fi)).abs() <= 1e-12 * scale);
            prop_assert_eq!(bt.p1, bt.q1);
            prop_assert_eq!(bt.p2, -bt.q2);
        }
    }
}
