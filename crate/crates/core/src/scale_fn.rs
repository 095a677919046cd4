//! Scale functions `W^{(q)}`, `Z^{(q)}`, the two-parameter `W_y^{(p,q)}` and the tilted `W_{Φ_q}`.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{JumpLaw, LevyModel, ModelKind};
use crate::numerics::inversion::talbot;
use crate::numerics::quadrature::{try_integrate, QuadValue, QuadratureConfig};
use crate::numerics::roots::poly_roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    ClosedForm,
    /// Talbot inversion of the tilted transform.
    NumericInversion,
    /// Trapezoid solution of the renewal equation for `W`, Richardson-extrapolated.
    RenewalEquation,
}

/// Real or complex scalars for the exponential-sum closed forms.
pub trait Scalar:
    QuadValue
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
    + PartialEq
    + std::fmt::Debug
{
    fn real(x: f64) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> f64;
    fn from_complex(z: Complex64) -> Self;
}

impl Scalar for f64 {
    fn real(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl Scalar for Complex64 {
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

/// `(e^z - 1) / z`.
fn exprel<T: Scalar>(z: T) -> T {
    if z.abs() < 0.2 {
        let mut term = T::real(1.0);
        let mut sum = T::real(1.0);
        for k in 2..16 {
            term = term * z * (1.0 / k as f64);
            sum = sum + term;
        }
        sum
    } else {
        (z.exp() + (-1.0)) / z
    }
}

/// `W(x) = Σ N(ρ_i)/P'(ρ_i) e^{ρ_i x}` for a polynomial `P` with simple (or a double top) roots.
///
/// The two leading roots are combined through a divided difference so that a (near) double
/// root at the top stays accurate; everything is stored tilted by the leading root.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum<T> {
    roots: Vec<T>,
    h0: T,
    h01: T,
    tail: Vec<(T, T)>,
}

impl<T: Scalar> ExpSum<T> {
    /// `poly` ascending coefficients of `P`, numerator `N(θ) = n0 + n1 θ`.
    pub fn new(poly: &[Complex64], n0: f64, n1: f64, leading_root: Option<T>) -> Result<Self> {
        let mut raw = poly_roots(poly);
        raw.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        let mut roots: Vec<T> = raw.iter().map(|z| T::from_complex(*z)).collect();
        if roots.len() < 2 {
            return Err(Error::InvalidModel(
                "scale polynomial must have degree >= 2".into(),
            ));
        }
        if let Some(r0) = leading_root {
            roots[0] = r0;
        }
        let lead = T::from_complex(*poly.last().unwrap());
        let num = |t: T| t * n1 + n0;
        let h = |t: T| -> T {
            let mut d = lead;
            for r in &roots[2..] {
                d = d * (t - *r);
            }
            num(t) / d
        };
        let (r0, r1) = (roots[0], roots[1]);
        let d = r0 - r1;
        let h0 = h(r0);
        let scale = 1.0 + r0.abs() + r1.abs();
        let h01 = if d.abs() > 1e-6 * scale {
            (h0 - h(r1)) / d
        } else {
            let mid = (r0 + r1) * 0.5;
            let mut logd = if n1 == 0.0 {
                T::real(0.0)
            } else {
                T::real(n1) / num(mid)
            };
            for r in &roots[2..] {
                logd = logd - T::real(1.0) / (mid - *r);
            }
            h(mid) * logd
        };
        let mut tail = Vec::new();
        for j in 2..roots.len() {
            let rj = roots[j];
            let mut dp = lead;
            for (k, rk) in roots.iter().enumerate() {
                if k != j {
                    dp = dp * (rj - *rk);
                }
            }
            tail.push((num(rj) / dp, rj));
        }
        Ok(Self {
            roots,
            h0,
            h01,
            tail,
        })
    }

    pub fn leading_root(&self) -> T {
        self.roots[0]
    }

    pub fn roots(&self) -> &[T] {
        &self.roots
    }

    /// `e^{-ρ_0 x} W(x)` for `x >= 0`.
    pub fn tilted(&self, x: f64) -> T {
        let (r0, r1) = (self.roots[0], self.roots[1]);
        let d = r0 - r1;
        let e = (-(d * x)).exp();
        // e^{-dx} (e^{dx}-1)/d = x exprel(-dx)
        let mut v = self.h0 * x * exprel(-(d * x)) + e * self.h01;
        for (c, r) in &self.tail {
            v = v + *c * ((*r - r0) * x).exp();
        }
        v
    }

    /// `e^{-ρ_0 x} W'(x)` for `x >= 0`.
    pub fn tilted_prime(&self, x: f64) -> T {
        let (r0, r1) = (self.roots[0], self.roots[1]);
        let d = r0 - r1;
        let e = (-(d * x)).exp();
        let mut v = r1 * (self.h0 * x * exprel(-(d * x)) + e * self.h01) + self.h0;
        for (c, r) in &self.tail {
            v = v + *c * *r * ((*r - r0) * x).exp();
        }
        v
    }

    pub fn w(&self, x: f64) -> T {
        if x < 0.0 {
            return T::real(0.0);
        }
        (self.roots[0] * x).exp() * self.tilted(x)
    }

    pub fn w_prime(&self, x: f64) -> T {
        if x < 0.0 {
            return T::real(0.0);
        }
        (self.roots[0] * x).exp() * self.tilted_prime(x)
    }

    /// `∫_0^∞ W(x+w) e^{-s w} dw` for `Re s` beyond every root (analytically continued otherwise).
    pub fn shifted_transform(&self, x: f64, s: T) -> T {
        let (r0, r1) = (self.roots[0], self.roots[1]);
        // pair part: e^{r1 x}[H0 (e^{dx}-1)/d + H01] with transform of e^{r1 (x+w)}, e^{r0 (x+w)}
        let d = r0 - r1;
        let a0 = self.h0 / d;
        let a1 = self.h01 - self.h0 / d;
        let mut v = a0 * (r0 * x).exp() / (s - r0) + a1 * (r1 * x).exp() / (s - r1);
        if d.abs() < 1e-6 * (1.0 + r0.abs()) {
            // fall back to the confluent form
            let e = (r1 * x).exp();
            let t0 = s - r1;
            v = e * (self.h0 * (T::real(x) / t0 + T::real(1.0) / (t0 * t0)) + self.h01 / t0);
        }
        for (c, r) in &self.tail {
            v = v + *c * (*r * x).exp() / (s - *r);
        }
        v
    }
}

/// Characteristic polynomial data: `1/(ψ(θ)-p) = N(θ)/P(θ)`.
fn polynomial(model: &LevyModel, p: Complex64) -> Option<(Vec<Complex64>, f64, f64)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let s2 = 0.5 * model.sigma * model.sigma;
    match (&model.kind, &model.jump_law) {
        (ModelKind::BrownianDrift, _) => Some((vec![-p, c(model.gamma), c(s2)], 1.0, 0.0)),
        (ModelKind::CramerLundbergExp, JumpLaw::Exponential { rate }) => {
            let (g, l, a) = (model.gamma, model.jump_rate, *rate);
            let mut poly = vec![-p * a, c(g * a - l) - p, c(g + s2 * a)];
            if s2 > 0.0 {
                poly.push(c(s2));
            }
            Some((poly, a, 1.0))
        }
        _ => None,
    }
}

/// Closed-form `W^{(p)}` for complex `p` (Brownian and exponential-claim models only).
pub fn complex_scale(model: &LevyModel, p: Complex64) -> Result<ExpSum<Complex64>> {
    let (poly, n0, n1) = polynomial(model, p).ok_or_else(|| {
        Error::InvalidArgument("complex scale functions need a closed-form model".into())
    })?;
    ExpSum::new(&poly, n0, n1, None)
}

/// Root of `ψ(θ) = s` with largest real part, for complex `s` (closed-form models).
pub fn phi_complex(model: &LevyModel, s: Complex64) -> Result<Complex64> {
    Ok(complex_scale(model, s)?.leading_root())
}

struct NumericScale {
    cache: OnceLock<std::result::Result<HermiteTable, Error>>,
    /// Renewal tables grow on demand; the recursion is causal, so extending never changes old nodes.
    renewal: RwLock<Option<Arc<HermiteTable>>>,
}

/// Renewal grid: coarse step, refined once for the extrapolation.
const RENEWAL_STEP: f64 = 1.0 / 128.0;
const RENEWAL_MAX: f64 = 48.0;

/// Tilted values `W_Φ` and derivatives `d/dx W_Φ` on a uniform grid.
struct HermiteTable {
    h: f64,
    v: Vec<f64>,
    d: Vec<f64>,
}

const CACHE_STEP: f64 = 1.0 / 64.0;
const CACHE_MAX: f64 = 64.0;
const TALBOT_NODES: usize = 32;

/// Evaluator bundle for `W^{(q)}` and companions at fixed `q`.
pub struct ScaleFunctionSet {
    model: LevyModel,
    q: f64,
    phi: f64,
    strategy: Strategy,
    closed: Option<ExpSum<f64>>,
    numeric: Option<NumericScale>,
    cfg: QuadratureConfig,
}

impl std::fmt::Debug for ScaleFunctionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleFunctionSet")
            .field("kind", &self.model.kind)
            .field("q", &self.q)
            .field("phi", &self.phi)
            .field("strategy", &self.strategy)
            .finish()
    }
}

impl ScaleFunctionSet {
    /// Closed form where available, numeric inversion otherwise.
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        let strategy = if polynomial(model, Complex64::new(q, 0.0)).is_some() {
            Strategy::ClosedForm
        } else {
            Strategy::RenewalEquation
        };
        Self::with_strategy(model, q, strategy)
    }

    pub fn with_strategy(model: &LevyModel, q: f64, strategy: Strategy) -> Result<Self> {
        let phi = model.phi_q(q)?;
        let mut set = Self {
            model: model.clone(),
            q,
            phi,
            strategy,
            closed: None,
            numeric: None,
            cfg: QuadratureConfig::new(1e-14, 1e-12),
        };
        match strategy {
            Strategy::ClosedForm => {
                let (poly, n0, n1) =
                    polynomial(model, Complex64::new(q, 0.0)).ok_or_else(|| {
                        Error::InvalidArgument(
                            "no closed-form scale function for this model".into(),
                        )
                    })?;
                set.closed = Some(ExpSum::new(&poly, n0, n1, Some(phi))?);
            }
            Strategy::NumericInversion | Strategy::RenewalEquation => {
                set.numeric = Some(NumericScale {
                    cache: OnceLock::new(),
                    renewal: RwLock::new(None),
                })
            }
        }
        Ok(set)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Φ_q`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Relative accuracy of the computed values; 0 for closed forms.
    pub fn precision(&self) -> f64 {
        match self.strategy {
            Strategy::ClosedForm => 0.0,
            Strategy::NumericInversion => 1e-10,
            Strategy::RenewalEquation => 1e-6,
        }
    }

    /// `cfg` with its relative tolerance raised to [`ScaleFunctionSet::precision`].
    pub fn floored(&self, cfg: QuadratureConfig) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: cfg.rel_tol.max(self.precision()),
            ..cfg
        }
    }

    pub fn closed_form(&self) -> Option<&ExpSum<f64>> {
        self.closed.as_ref()
    }

    /// `W^{(q)}(0)`.
    pub fn w_zero(&self) -> f64 {
        self.model.w_at_zero()
    }

    /// `W^{(q)'}(0+)`.
    pub fn w_prime_zero(&self) -> f64 {
        let m = &self.model;
        if m.bounded_variation() {
            (self.q + m.jump_rate) / (m.gamma * m.gamma)
        } else {
            2.0 / (m.sigma * m.sigma)
        }
    }

    /// `e^{-Φ_q x} W^{(q)}(x)`.
    pub fn w_tilted(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        if let Some(c) = &self.closed {
            return Ok(c.tilted(x));
        }
        if x == 0.0 {
            return Ok(self.w_zero());
        }
        self.numeric_tilted(x, false)
    }

    /// `e^{-Φ_q x} W^{(q)'}(x)`.
    pub fn w_tilted_prime(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        if let Some(c) = &self.closed {
            return Ok(c.tilted_prime(x));
        }
        if x == 0.0 {
            return Ok(self.w_prime_zero());
        }
        self.numeric_tilted(x, true)
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        Ok((self.phi * x).exp() * self.w_tilted(x)?)
    }

    pub fn w_prime(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        Ok((self.phi * x).exp() * self.w_tilted_prime(x)?)
    }

    /// `Z^{(q)}(x) = 1 + q ∫_0^x W^{(q)}`.
    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 || self.q == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + self.q * self.integral_w(0.0, x)?)
    }

    /// `∫_a^b W^{(q)}`.
    pub fn integral_w(&self, a: f64, b: f64) -> Result<f64> {
        let a = a.max(0.0);
        if b <= a {
            return Ok(0.0);
        }
        try_integrate(|u| self.w(u), a, b, &[], &self.cfg)?.checked()
    }

    /// Direct Talbot inversion, bypassing the interpolation table.
    pub fn w_tilted_direct(&self, x: f64, derivative: bool) -> Result<f64> {
        if x <= 0.0 {
            return if x < 0.0 {
                Ok(0.0)
            } else if derivative {
                Ok(self.w_prime_zero())
            } else {
                Ok(self.w_zero())
            };
        }
        let m = &self.model;
        let (phi, q, w0) = (self.phi, self.q, self.w_zero());
        let mut f = |s: Complex64| -> Result<Complex64> {
            let th = s + phi;
            let den = m.psi_c(th) - q;
            if !(den.re.is_finite() && den.im.is_finite()) {
                // the jump transform overflows far into the left half-plane: 1/(ψ-q) -> 0
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(if derivative { th / den - w0 } else { 1.0 / den })
        };
        talbot(&mut f, x, TALBOT_NODES)
    }

    fn numeric_tilted(&self, x: f64, derivative: bool) -> Result<f64> {
        let limit = if self.strategy == Strategy::RenewalEquation {
            RENEWAL_MAX
        } else {
            CACHE_MAX
        };
        if x > limit {
            return self.w_tilted_direct(x, derivative);
        }
        let ns = self.numeric.as_ref().expect("numeric strategy");
        let grown;
        let table = if self.strategy == Strategy::RenewalEquation {
            grown = self.renewal_covering(ns, x);
            &*grown
        } else {
            ns.cache
                .get_or_init(|| self.build_table())
                .as_ref()
                .map_err(|e| e.clone())?
        };
        let u = x / table.h;
        let k = (u.floor() as usize).min(table.v.len() - 2);
        let t = u - k as f64;
        let h = table.h;
        let (y0, y1, d0, d1) = (table.v[k], table.v[k + 1], table.d[k], table.d[k + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        if !derivative {
            return Ok(val);
        }
        let dval = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        // d/dx W_Φ = e^{-Φx}W' - Φ W_Φ
        Ok(dval + self.phi * val)
    }

    fn build_table(&self) -> Result<HermiteTable> {
        let n = (CACHE_MAX / CACHE_STEP).round() as usize;
        let mut v = Vec::with_capacity(n + 1);
        let mut d = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let x = k as f64 * CACHE_STEP;
            let val = self.w_tilted_direct(x, false)?;
            let der = self.w_tilted_direct(x, true)?;
            v.push(val);
            d.push(der - self.phi * val);
        }
        Ok(HermiteTable {
            h: CACHE_STEP,
            v,
            d,
        })
    }

    /// Tilted `W` and `e^{-Φx}W'` on a grid of step `h` up to `reach`.
    ///
    /// With `a = c` (no Gaussian part) or `σ²/2`, and everything tilted by `e^{-Φy}`:
    /// `a W(x) = g0(x) + (W * K0)(x)` and `a W'(x) = g1(x) + b W(x) + (W * K1)(x)`.
    fn renewal_grid(&self, h: f64, reach: f64) -> (Vec<f64>, Vec<f64>) {
        let m = &self.model;
        let (q, phi, lam) = (
            self.q,
            self.phi,
            if m.has_jumps() { m.jump_rate } else { 0.0 },
        );
        let n = (reach / h).round() as usize;
        let e: Vec<f64> = (0..=n).map(|j| (-phi * j as f64 * h).exp()).collect();
        let bv = m.bounded_variation();
        let (a, b) = if bv {
            (m.gamma, q + lam)
        } else {
            (0.5 * m.sigma * m.sigma, -m.gamma)
        };
        let mut g0 = Vec::with_capacity(n + 1);
        let mut g1 = Vec::with_capacity(n + 1);
        let mut k0 = Vec::with_capacity(n + 1);
        let mut k1 = Vec::with_capacity(n + 1);
        for (j, ej) in e.iter().enumerate() {
            let y = j as f64 * h;
            let tail = if lam > 0.0 { m.jump_law.tail(y) } else { 0.0 };
            if bv {
                g0.push(*ej);
                g1.push(0.0);
                k0.push(ej * (q + lam * tail));
                k1.push(-ej * lam * m.jump_law.density(y));
            } else {
                let it = if lam > 0.0 {
                    m.jump_law.integrated_tail(y)
                } else {
                    0.0
                };
                g0.push(y * ej);
                g1.push(*ej);
                k0.push(ej * (q * y + lam * it - m.gamma));
                k1.push(ej * (q + lam * tail));
            }
        }
        let mut w = vec![0.0; n + 1];
        w[0] = self.w_zero();
        let denom = a - 0.5 * h * k0[0];
        for i in 1..=n {
            let mut s = 0.5 * w[0] * k0[i];
            for j in 1..i {
                s += w[i - j] * k0[j];
            }
            w[i] = (g0[i] + h * s) / denom;
        }
        let mut d = vec![0.0; n + 1];
        for i in 0..=n {
            let mut s = 0.0;
            if i > 0 {
                s = 0.5 * (w[0] * k1[i] + w[i] * k1[0]);
                for j in 1..i {
                    s += w[i - j] * k1[j];
                }
            }
            d[i] = (g1[i] + b * w[i] + h * s) / a;
        }
        (w, d)
    }

    /// A renewal table reaching at least `x`, extended by doubling.
    fn renewal_covering(&self, ns: &NumericScale, x: f64) -> Arc<HermiteTable> {
        let covers = |t: &HermiteTable| (t.v.len() - 1) as f64 * t.h >= x;
        if let Some(t) = ns.renewal.read().unwrap().as_ref() {
            if covers(t) {
                return t.clone();
            }
        }
        let mut slot = ns.renewal.write().unwrap();
        if let Some(t) = slot.as_ref() {
            if covers(t) {
                return t.clone();
            }
        }
        let mut reach = slot.as_ref().map_or(4.0, |t| (t.v.len() - 1) as f64 * t.h);
        while reach < x {
            reach *= 2.0;
        }
        let t = Arc::new(self.renewal_table(reach.min(RENEWAL_MAX)));
        *slot = Some(t.clone());
        t
    }

    fn renewal_table(&self, reach: f64) -> HermiteTable {
        let (wc, dc) = self.renewal_grid(RENEWAL_STEP, reach);
        let (wf, df) = self.renewal_grid(0.5 * RENEWAL_STEP, reach);
        let v: Vec<f64> = wc
            .iter()
            .enumerate()
            .map(|(i, c)| (4.0 * wf[2 * i] - c) / 3.0)
            .collect();
        let d = dc
            .iter()
            .enumerate()
            .map(|(i, c)| (4.0 * df[2 * i] - c) / 3.0 - self.phi * v[i])
            .collect();
        HermiteTable {
            h: RENEWAL_STEP,
            v,
            d,
        }
    }
}

/// `W_y^{(p,s)}(x) = W^{(p)}(x) + s ∫_y^x W^{(p+s)}(x-w) W^{(p)}(w) dw`.
pub fn w_two_param(model: &LevyModel, p: f64, q_shift: f64, y: f64, x: f64) -> Result<f64> {
    if !(p >= 0.0 && p + q_shift >= 0.0) {
        return Err(Error::InvalidArgument(
            "need p >= 0 and p + q_shift >= 0".into(),
        ));
    }
    let wp = ScaleFunctionSet::new(model, p)?;
    let base = wp.w(x)?;
    if q_shift == 0.0 || x <= y {
        return Ok(base);
    }
    let ws = ScaleFunctionSet::new(model, p + q_shift)?;
    let cfg = QuadratureConfig::new(1e-14, 1e-12);
    let conv =
        try_integrate(|w| Ok(ws.w(x - w)? * wp.w(w)?), y.max(0.0), x, &[], &cfg)?.checked()?;
    Ok(base + q_shift * conv)
}
