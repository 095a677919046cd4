//! The Parisian kernel `ℓ_r^{(q)}`, the `(φ, χ)` pair and excursion-measure functionals.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::{LevyModel, MarginalLaw};
use crate::numerics::quadrature::{try_integrate, GaussLegendre, QuadratureConfig};
use crate::numerics::{InversionConfig, InversionMethod, InversionRule};
use crate::scale_fn::{complex_scale, phi_complex, ExpSum, Scalar, ScaleFunctionSet};

/// Gauss-Legendre points per half of the horizon rule.
pub const HORIZON_POINTS: usize = 16;

/// `ℓ_r^{(q)}` for a fixed model, `q` and horizon `r`.
#[derive(Debug)]
pub struct ParisianKernel {
    scale: Arc<ScaleFunctionSet>,
    r: f64,
    marginal: MarginalLaw,
    cfg: QuadratureConfig,
    horizons: OnceLock<Result<Vec<HorizonNode>>>,
}

/// One node of the rule for `∫_0^r g(s) ds`.
#[derive(Debug)]
struct HorizonNode {
    s: f64,
    weight: f64,
    kernel: ParisianKernel,
    /// index of the node at `r - s`
    mirror: usize,
}

impl ParisianKernel {
    pub fn new(model: &LevyModel, q: f64, r: f64) -> Result<Self> {
        Self::with_scale(Arc::new(ScaleFunctionSet::new(model, q)?), r)
    }

    pub fn with_scale(scale: Arc<ScaleFunctionSet>, r: f64) -> Result<Self> {
        let marginal = scale.model().marginal_law(r)?;
        let cfg = scale.floored(QuadratureConfig::new(1e-15, 1e-11));
        Ok(Self {
            scale,
            r,
            marginal,
            cfg,
            horizons: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &LevyModel {
        self.scale.model()
    }

    pub fn scale(&self) -> &Arc<ScaleFunctionSet> {
        &self.scale
    }

    pub fn marginal(&self) -> &MarginalLaw {
        &self.marginal
    }

    pub fn q(&self) -> f64 {
        self.scale.q()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn set_quadrature(&mut self, cfg: QuadratureConfig) {
        self.cfg = cfg;
    }

    fn tilted_expectation(&self, x: f64, derivative: bool) -> Result<f64> {
        self.tilted_expectation_with(x, derivative, &self.cfg)
    }

    fn tilted_expectation_with(
        &self,
        x: f64,
        derivative: bool,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        let s = &self.scale;
        let phi = s.phi();
        let r = self.r;
        let lower = (-x).max(0.0);
        if self.marginal.support_max() <= lower {
            return Ok(0.0);
        }
        let bp = if x < 0.0 { vec![-x] } else { vec![] };
        let mut v = self.marginal.expectation(
            |z| {
                let w = if derivative {
                    s.w_tilted_prime(x + z)?
                } else {
                    s.w_tilted(x + z)?
                };
                Ok(w * (phi * z).exp() * z / r)
            },
            lower,
            &bp,
            phi,
            cfg,
        )?;
        if derivative && x < 0.0 && s.w_zero() > 0.0 {
            // W jumps at 0 in bounded variation: the moving lower limit contributes
            v += s.w_zero() * (-x) / r * self.marginal.density(-x) * (-phi * x).exp();
        }
        Ok(v)
    }

    /// `e^{-Φ_q x} ℓ_r^{(q)}(x)`.
    pub fn ell_tilted(&self, x: f64) -> Result<f64> {
        self.tilted_expectation(x, false)
    }

    /// `e^{-Φ_q x} ℓ_r^{(q)'}(x)`.
    pub fn ell_prime_tilted(&self, x: f64) -> Result<f64> {
        self.tilted_expectation(x, true)
    }

    pub fn ell(&self, x: f64) -> Result<f64> {
        Ok((self.scale.phi() * x).exp() * self.ell_tilted(x)?)
    }

    pub fn ell_prime(&self, x: f64) -> Result<f64> {
        Ok((self.scale.phi() * x).exp() * self.ell_prime_tilted(x)?)
    }

    /// `ℓ'/ℓ(x)`; at `q = 0` this is `n(α_x^+ < ζ)`.
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        let d = self.ell_tilted(x)?;
        if !(d > 0.0) {
            return Err(Error::DegenerateDenominator("ell vanishes"));
        }
        // only the ratio matters, so the numerator error is measured against the denominator
        let cfg = QuadratureConfig {
            abs_tol: self.cfg.abs_tol.max(self.cfg.rel_tol * d),
            ..self.cfg
        };
        Ok(self.tilted_expectation_with(x, true, &cfg)? / d)
    }

    fn horizon_nodes(&self) -> Result<&[HorizonNode]> {
        self.horizons
            .get_or_init(|| {
                let gl = GaussLegendre::cached(HORIZON_POINTS);
                let n = HORIZON_POINTS;
                let r = self.r;
                let mut out = Vec::with_capacity(2 * n);
                for half in 0..2 {
                    for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                        let u = 0.5 * (t + 1.0);
                        let s = if half == 0 {
                            0.5 * r * u * u
                        } else {
                            r - 0.5 * r * u * u
                        };
                        let kernel = ParisianKernel::with_scale(self.scale.clone(), s)?;
                        out.push((s, 0.5 * w * r * u, kernel));
                    }
                }
                Ok(out
                    .into_iter()
                    .enumerate()
                    .map(|(i, (s, weight, kernel))| HorizonNode {
                        s,
                        weight,
                        kernel,
                        mirror: (i + n) % (2 * n),
                    })
                    .collect())
            })
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }

    /// `∫_0^r g(s, ℓ_s) ds` over the horizon rule, `g` also receiving the kernel at `r - s`.
    pub(crate) fn horizon_integral<F>(&self, mut g: F) -> Result<f64>
    where
        F: FnMut(f64, &ParisianKernel, &ParisianKernel) -> Result<f64>,
    {
        let nodes = self.horizon_nodes()?;
        let mut total = 0.0;
        for node in nodes {
            total += node.weight * g(node.s, &node.kernel, &nodes[node.mirror].kernel)?;
        }
        Ok(total)
    }

    /// The right side of the excursion joint transform: `n(e^{-qα} e^{λ(a-ε(α+r)) - ψ(λ)r}; α < ζ)`.
    pub fn n_joint_laplace(&self, a: f64, lambda: f64) -> Result<f64> {
        if !(a > 0.0) || !(lambda >= 0.0) {
            return Err(Error::InvalidArgument("need a > 0 and lambda >= 0".into()));
        }
        let s = &self.scale;
        let q = s.q();
        let psi = self.model().psi(lambda);
        let p = psi - q;
        let ratio = self.log_derivative(a)?;
        let ela = (lambda * a).exp();
        if p == 0.0 {
            return Ok(ratio * ela - lambda * ela);
        }
        let iw = s.integral_weighted(0.0, a, lambda)?;
        let l0 = self.horizon_integral(|t, k, _| Ok((-psi * t).exp() * k.ell(a)?))?;
        let l1 = self.horizon_integral(|t, k, _| Ok((-psi * t).exp() * k.ell_prime(a)?))?;
        Ok(ratio * (ela - p * (ela * iw + l0)) - lambda * ela
            + p * (lambda * ela * iw + s.w(a)? + l1))
    }

    /// The excursion potential `n(∫_0^ζ e^{-q(t-r)} f(a - ε(t)) 1{α > t - r} dt)`.
    ///
    /// `f` must be bounded and differentiable with derivative `f_prime`.
    pub fn n_potential<F, G>(&self, a: f64, f: F, f_prime: G) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let fa = f(a);
        Ok(self.n_potential_bracket(a, f, f_prime)?
            - self.scale.w_zero() * (self.q() * self.r).exp() * fa)
    }

    /// `n_potential` plus the time spent at the running maximum, `W(0) e^{qr} f(a)`.
    pub fn n_potential_bracket<F, G>(&self, a: f64, f: F, f_prime: G) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument("need a > 0".into()));
        }
        let s = &self.scale;
        let q = s.q();
        let r = self.r;
        let cfg = s.floored(QuadratureConfig::new(1e-13, 1e-9));
        let outer = s.floored(QuadratureConfig::new(1e-11, 1e-7));
        let mean_f = |law: &MarginalLaw, shift: f64, h: &dyn Fn(f64) -> f64| {
            law.signed_expectation(|z| h(shift + z), &cfg)
        };
        let t1 = self
            .horizon_integral(|t, k, _| Ok((q * (r - t)).exp() * mean_f(k.marginal(), a, &f)?))?;
        let t4 = self.horizon_integral(|t, k, _| {
            Ok((q * (r - t)).exp() * mean_f(k.marginal(), a, &f_prime)?)
        })?;
        let t3 = self.horizon_integral(|_, k, m| Ok(mean_f(m.marginal(), 0.0, &f)? * k.ell(a)?))?;
        let t6 =
            self.horizon_integral(|_, k, m| Ok(mean_f(m.marginal(), 0.0, &f)? * k.ell_prime(a)?))?;
        let law = &self.marginal;
        let t2 = try_integrate(
            |z| Ok(s.w(a - z)? * mean_f(law, z, &f)?),
            0.0,
            a,
            &[],
            &outer,
        )?
        .checked()?;
        let t5 = try_integrate(
            |z| Ok(s.w_prime(a - z)? * mean_f(law, z, &f)?),
            0.0,
            a,
            &[],
            &outer,
        )?
        .checked()?;
        let ea = mean_f(law, a, &f)?;
        let ratio = self.log_derivative(a)?;
        Ok(ratio * (t1 - t2 - t3) - t4 + t5 + s.w_zero() * ea + t6)
    }

    /// The excursion potential for `f(x) = e^{λx - ψ(λ)r}` in its closed-form reduction.
    pub fn n_potential_exponential(&self, a: f64, lambda: f64) -> Result<f64> {
        let s = &self.scale;
        let q = s.q();
        let r = self.r;
        let psi = self.model().psi(lambda);
        let p = psi - q;
        // (1 - e^{-pr})/p, with its Taylor value near the removable singularity
        let frac = if p.abs() < 1e-8 {
            r * (1.0 - 0.5 * p * r)
        } else {
            -(-p * r).exp_m1() / p
        };
        let ela = (lambda * a).exp();
        let iw = s.integral_weighted(0.0, a, lambda)?;
        let l0 = self.horizon_integral(|t, k, _| Ok((-psi * t).exp() * k.ell(a)?))?;
        let l1 = self.horizon_integral(|t, k, _| Ok((-psi * t).exp() * k.ell_prime(a)?))?;
        let ratio = self.log_derivative(a)?;
        let rhs = ratio * (ela * frac - ela * iw - l0) - lambda * ela * frac
            + lambda * ela * iw
            + s.w(a)?
            + l1;
        Ok(rhs - s.w_zero() * (q * r).exp() * (lambda * a - psi * r).exp())
    }
}

impl ScaleFunctionSet {
    /// `∫_a^b W^{(q)}(z) e^{-λz} dz`.
    pub fn integral_weighted(&self, a: f64, b: f64, lambda: f64) -> Result<f64> {
        let a = a.max(0.0);
        if b <= a {
            return Ok(0.0);
        }
        let cfg = self.floored(QuadratureConfig::new(1e-15, 1e-12));
        try_integrate(|z| Ok(self.w(z)? * (-lambda * z).exp()), a, b, &[], &cfg)?.checked()
    }
}

/// `n(α_x^+ < ζ) = ℓ_r'(x)/ℓ_r(x)` for the untilted kernel.
pub fn n_alpha(kernel: &ParisianKernel, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument("n_alpha needs x > 0".into()));
    }
    kernel.log_derivative(x)
}

/// `∫_0^∞ W^{(q)}(x+w) e^{-Φ_{θ+q} w} dw`, the transform of `r ↦ e^{-qr} ℓ_r^{(q)}(x)` at real `θ > 0`.
pub fn kendall_transform(scale: &ScaleFunctionSet, x: f64, theta: f64) -> Result<f64> {
    let phi_s = scale.model().phi_q(theta + scale.q())?;
    let phi = scale.phi();
    let cfg = scale.floored(QuadratureConfig::new(1e-15, 1e-12));
    let lo = (-x).max(0.0);
    try_integrate(
        |w| Ok(scale.w_tilted(x + w)? * (phi * (x + w) - phi_s * w).exp()),
        lo,
        f64::INFINITY,
        &[],
        &cfg,
    )?
    .checked()
}

/// The same transform at complex `θ`, for closed-form models.
pub fn kendall_transform_complex(
    model: &LevyModel,
    q: f64,
    x: f64,
    theta: Complex64,
) -> Result<Complex64> {
    let wq = complex_scale(model, Complex64::new(q, 0.0))?;
    let s = phi_complex(model, theta + q)?;
    Ok(wq.shifted_transform(x, s))
}

/// Values of the `(φ, χ)` pair at one point; `comb = W(x)φ + χ`, `comb_prime = W'(x)φ + χ'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiChi {
    pub phi: f64,
    pub chi: f64,
    pub chi_prime: f64,
    pub comb: f64,
    pub comb_prime: f64,
}

enum NodeScale {
    Real(ScaleFunctionSet),
    Complex(ExpSum<Complex64>),
}

/// Inverts the `(φ_{Φ_q}, χ^{(q)})` transforms at a fixed horizon `r`.
///
/// `W^{(θ+q)}` is prepared once per inversion node and shared by every `(x, y)` query.
pub struct PhiChiEngine {
    scale_q: Arc<ScaleFunctionSet>,
    r: f64,
    kernel: OnceLock<Result<ParisianKernel>>,
    rule: InversionRule,
    nodes: Vec<NodeScale>,
    cfg: QuadratureConfig,
}

impl std::fmt::Debug for PhiChiEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiChiEngine")
            .field("q", &self.scale_q.q())
            .field("r", &self.r)
            .finish()
    }
}

/// Talbot for closed-form models with a Gaussian part, Euler for closed-form models without,
/// Gaver-Stehfest when no complex scale function is available.
///
/// Without a Gaussian part the `(φ, χ)` functions have a kink at `r = y/c` (the least time to
/// climb back `y`), so their transforms carry delay factors that wreck the Talbot contour.
pub fn default_inversion(model: &LevyModel) -> InversionConfig {
    if complex_scale(model, Complex64::new(1.0, 1.0)).is_err() {
        InversionConfig::gaver_stehfest()
    } else if model.bounded_variation() {
        InversionConfig {
            terms: 40,
            ..InversionConfig::euler()
        }
    } else {
        InversionConfig::talbot()
    }
}

impl PhiChiEngine {
    pub fn new(
        scale_q: Arc<ScaleFunctionSet>,
        r: f64,
        inversion: &InversionConfig,
    ) -> Result<Self> {
        let rule = InversionRule::new(r, inversion)?;
        let model = scale_q.model().clone();
        let q = scale_q.q();
        let mut nodes = Vec::with_capacity(rule.nodes.len());
        for s in &rule.nodes {
            if inversion.method == InversionMethod::GaverStehfest {
                nodes.push(NodeScale::Real(ScaleFunctionSet::new(&model, s.re + q)?));
            } else {
                nodes.push(NodeScale::Complex(complex_scale(&model, s + q).map_err(
                    |_| {
                        Error::InvalidArgument(
                            "complex-plane inversion needs closed-form scale functions; use gs"
                                .into(),
                        )
                    },
                )?));
            }
        }
        let cfg = scale_q.floored(QuadratureConfig::new(1e-13, 1e-11));
        Ok(Self {
            scale_q,
            r,
            kernel: OnceLock::new(),
            rule,
            nodes,
            cfg,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn scale(&self) -> &Arc<ScaleFunctionSet> {
        &self.scale_q
    }

    /// Tilted transforms `[φ, e^{-Φx}comb, e^{-Φx}comb']` at `θ`, given the `θ+q` scale function.
    fn transform<T: Scalar>(
        &self,
        theta: T,
        phi_p: T,
        wp: &dyn Fn(f64) -> Result<T>,
        x: f64,
        y: f64,
    ) -> Result<[T; 3]> {
        let sq = &self.scale_q;
        let wpy = wp(y)?;
        if !(wpy.abs() > 1e-300) || !wpy.abs().is_finite() {
            return Err(Error::DegenerateDenominator("W^{(θ+q)}(y)"));
        }
        let d = T::real(sq.phi()) - phi_p;
        let width = 1.0 / d.abs().max(1e-12);
        let mut near0 = Vec::new();
        let mut neary = Vec::new();
        for k in [1.0, 4.0, 16.0] {
            if k * width < y {
                near0.push(k * width);
                neary.push(y - k * width);
            }
        }
        let ey = (d * y).exp();
        let f_phi = ey / (theta * wpy)
            + try_integrate(
                |w| Ok((d * (y - w)).exp() * wp(w)? / wpy),
                0.0,
                y,
                &neary,
                &self.cfg,
            )?
            .checked()?;
        let comb = |prime: bool| -> Result<T> {
            let wq = |u: f64| {
                if prime {
                    sq.w_tilted_prime(u)
                } else {
                    sq.w_tilted(u)
                }
            };
            let head = ey * T::real(wq(x + y)?) / (theta * wpy);
            let body = try_integrate(
                |v| Ok((d * v).exp() * T::real(wq(x + v)?) * wp(y - v)? / wpy),
                0.0,
                y,
                &near0,
                &self.cfg,
            )?
            .checked()?;
            Ok(head + body)
        };
        Ok([f_phi, comb(false)?, comb(true)?])
    }

    /// Tilted values `(φ, e^{-Φx}comb, e^{-Φx}comb')`.
    pub fn tilted(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        if !(y > 0.0) {
            return Err(Error::InvalidArgument("phi/chi need y > 0".into()));
        }
        let mut vals: [Vec<Complex64>; 3] = Default::default();
        for (s, node) in self.rule.nodes.iter().zip(&self.nodes) {
            let out = match node {
                NodeScale::Real(set) => {
                    let th = s.re;
                    let wp = |u: f64| set.w_tilted(u);
                    let t = self.transform(th, set.phi(), &wp, x, y)?;
                    t.map(|v| Complex64::new(v, 0.0))
                }
                NodeScale::Complex(e) => {
                    let wp = |u: f64| -> Result<Complex64> {
                        Ok(if u < 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            e.tilted(u)
                        })
                    };
                    self.transform(*s, e.leading_root(), &wp, x, y)?
                }
            };
            for k in 0..3 {
                vals[k].push(out[k]);
            }
        }
        Ok((
            self.rule.apply(&vals[0])?,
            self.rule.apply(&vals[1])?,
            self.rule.apply(&vals[2])?,
        ))
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<PhiChi> {
        let (phi, ct, cpt) = self.tilted(x, y)?;
        let e = (self.scale_q.phi() * x).exp();
        let (comb, comb_prime) = (e * ct, e * cpt);
        Ok(PhiChi {
            phi,
            chi: comb - self.scale_q.w(x)? * phi,
            chi_prime: comb_prime - self.scale_q.w_prime(x)? * phi,
            comb,
            comb_prime,
        })
    }

    /// True when `y` is out of reach: with no Gaussian part an excursion below `-y` lasts at
    /// least `y/c`, so the lower barrier never binds before the Parisian clock does.
    pub fn barrier_unreachable(&self, y: f64) -> bool {
        let m = self.scale_q.model();
        m.bounded_variation() && y >= m.gamma * self.r
    }

    /// `(W'(x)φ + χ')/(W(x)φ + χ)`, the two-barrier excursion rate.
    pub fn ratio(&self, x: f64, y: f64) -> Result<f64> {
        if self.barrier_unreachable(y) {
            let k = self
                .kernel
                .get_or_init(|| ParisianKernel::with_scale(self.scale_q.clone(), self.r))
                .as_ref()
                .map_err(|e| e.clone())?;
            return k.log_derivative(x);
        }
        let (_, c, cp) = self.tilted(x, y)?;
        if !(c > 0.0) {
            return Err(Error::DegenerateDenominator("W(x)φ + χ"));
        }
        Ok(cp / c)
    }
}

impl PhiChi {
    pub fn ratio_value(&self) -> f64 {
        self.comb_prime / self.comb
    }
}

/// One-shot `(φ, χ)` evaluation.
pub fn phi_chi(model: &LevyModel, q: f64, x: f64, y: f64, r: f64) -> Result<PhiChi> {
    let scale = Arc::new(ScaleFunctionSet::new(model, q)?);
    PhiChiEngine::new(scale, r, &default_inversion(model))?.evaluate(x, y)
}

/// `n(α_z^+ < ζ or ε̄ > z + y)` at `q = 0`.
pub fn n_exit_ratio(model: &LevyModel, z: f64, y: f64, r: f64) -> Result<f64> {
    if !(z > 0.0 && y > 0.0) {
        return Err(Error::InvalidArgument(
            "n_exit_ratio needs z > 0 and y > 0".into(),
        ));
    }
    let scale = Arc::new(ScaleFunctionSet::new(model, 0.0)?);
    PhiChiEngine::new(scale, r, &default_inversion(model))?.ratio(z, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{differentiate, invert_laplace, DiffScheme};

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 1.0).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg_exp(1.5, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ell_vanishes_left_of_support() {
        let k = ParisianKernel::new(&cl(), 0.0, 1.0).unwrap();
        // X(1) <= 1.5, so W(x + X(1)) = 0 for x < -1.5
        assert_eq!(k.ell(-2.0).unwrap(), 0.0);
        assert_eq!(k.ell_prime(-2.0).unwrap(), 0.0);
        let b = ParisianKernel::new(&bm(), 0.0, 1.0).unwrap();
        assert!(b.ell(-60.0).unwrap() < 1e-100);
    }

    #[test]
    fn ell_matches_kendall_inversion() {
        let m = bm();
        let k = ParisianKernel::new(&m, 0.0, 1.0).unwrap();
        let direct = k.ell(1.0).unwrap();
        let inv = invert_laplace(
            |th| kendall_transform_complex(&m, 0.0, 1.0, th),
            1.0,
            &InversionConfig::talbot(),
        )
        .unwrap();
        assert!((direct - inv).abs() < 1e-5 * direct, "{direct} vs {inv}");
    }

    #[test]
    fn ell_prime_matches_finite_difference() {
        for m in [bm(), cl()] {
            let k = ParisianKernel::new(&m, 0.0, 1.0).unwrap();
            let fd = differentiate(|x| k.ell(x).unwrap(), 1.0, DiffScheme::Central5pt);
            let an = k.ell_prime(1.0).unwrap();
            assert!((fd - an).abs() < 1e-6 * an, "{:?}: {fd} vs {an}", m.kind);
        }
    }

    #[test]
    fn log_derivative_limit() {
        for m in [bm(), cl()] {
            for q in [0.0, 0.1] {
                let k = ParisianKernel::new(&m, q, 1.0).unwrap();
                let v = k.log_derivative(50.0).unwrap();
                assert!(
                    (v - k.scale().phi()).abs() < 1e-3,
                    "{:?} q={q}: {v}",
                    m.kind
                );
            }
        }
    }

    #[test]
    fn n_alpha_positive_and_integrates_to_kernel_ratio() {
        let k = ParisianKernel::new(&bm(), 0.0, 1.0).unwrap();
        for x in [0.1, 0.5, 1.0, 2.0, 4.0] {
            assert!(n_alpha(&k, x).unwrap() > 0.0);
        }
        let cfg = QuadratureConfig::new(1e-12, 1e-10);
        let int = try_integrate(|w| n_alpha(&k, w), 1.0, 2.0, &[], &cfg)
            .unwrap()
            .value;
        let ratio = k.ell(1.0).unwrap() / k.ell(2.0).unwrap();
        assert!(((-int).exp() - ratio).abs() < 1e-8);
    }

    #[test]
    fn joint_laplace_reductions() {
        let m = bm();
        let k = ParisianKernel::new(&m, 0.0, 1.0).unwrap();
        let v = k.n_joint_laplace(1.0, 0.0).unwrap();
        assert!((v - n_alpha(&k, 1.0).unwrap()).abs() < 1e-12);
        let kq = ParisianKernel::new(&m, 0.3, 1.0).unwrap();
        let phi = kq.scale().phi();
        let v = kq.n_joint_laplace(2.0, phi).unwrap();
        let expect = (kq.log_derivative(2.0).unwrap() - phi) * (phi * 2.0).exp();
        assert!((v - expect).abs() < 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn potential_exponential_form_matches_general() {
        for m in [bm(), cl()] {
            let k = ParisianKernel::new(&m, 0.1, 0.5).unwrap();
            let (lam, r) = (0.3, 0.5);
            let psi = m.psi(lam);
            let f = |x: f64| (lam * x - psi * r).exp();
            let fp = |x: f64| lam * (lam * x - psi * r).exp();
            let g = k.n_potential(1.0, f, fp).unwrap();
            let e = k.n_potential_exponential(1.0, lam).unwrap();
            assert!(
                (g - e).abs() < 1e-5 * e.abs().max(1.0),
                "{:?}: {g} vs {e}",
                m.kind
            );
        }
    }

    #[test]
    fn potential_and_joint_laplace_complement() {
        // n(e^{-qα}; α<ζ) + q (n(∫ e^{-q(t-r)} 1{α > t-r} dt) + W(0) e^{qr}) = e^{qr} ℓ'/ℓ
        for m in [bm(), cl()] {
            let (q, r, a) = (0.2, 0.5, 1.0);
            let k = ParisianKernel::new(&m, q, r).unwrap();
            let j = k.n_joint_laplace(a, 0.0).unwrap();
            let p = k.n_potential(a, |_| 1.0, |_| 0.0).unwrap();
            let lhs = j + q * (p + k.scale().w_zero() * (q * r).exp());
            let rhs = (q * r).exp() * k.log_derivative(a).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-6 * rhs,
                "{:?}: {lhs} vs {rhs}",
                m.kind
            );
        }
    }

    #[test]
    fn removable_singularity_is_continuous() {
        let m = bm();
        let k = ParisianKernel::new(&m, 0.3, 0.5).unwrap();
        let phi = k.scale().phi();
        let at = k.n_potential_exponential(1.0, phi).unwrap();
        let near = k.n_potential_exponential(1.0, phi + 1e-6).unwrap();
        assert!((at - near).abs() < 1e-4 * at.abs().max(1.0));
    }

    #[test]
    fn comb_large_y_collapses_to_kernel() {
        for m in [bm(), cl()] {
            for q in [0.0, 0.2] {
                let r = 1.0;
                let scale = Arc::new(ScaleFunctionSet::new(&m, q).unwrap());
                let eng = PhiChiEngine::new(scale.clone(), r, &default_inversion(&m)).unwrap();
                let k = ParisianKernel::with_scale(scale, r).unwrap();
                let pc = eng.evaluate(1.0, 40.0).unwrap();
                let target = (-q * r).exp() * k.ell(1.0).unwrap();
                assert!(
                    (pc.comb - target).abs() < 1e-4 * target,
                    "{:?} q={q}: {} vs {target}",
                    m.kind,
                    pc.comb
                );
                let tp = (-q * r).exp() * k.ell_prime(1.0).unwrap();
                assert!((pc.comb_prime - tp).abs() < 1e-4 * tp);
            }
        }
    }

    #[test]
    fn chi_two_inversions_agree() {
        let m = bm();
        let scale = Arc::new(ScaleFunctionSet::new(&m, 0.0).unwrap());
        let t = PhiChiEngine::new(scale.clone(), 1.0, &InversionConfig::talbot())
            .unwrap()
            .evaluate(1.0, 2.0)
            .unwrap();
        let g = PhiChiEngine::new(scale, 1.0, &InversionConfig::gaver_stehfest())
            .unwrap()
            .evaluate(1.0, 2.0)
            .unwrap();
        assert!(
            (t.chi - g.chi).abs() < 1e-5 * t.chi.abs().max(1.0),
            "{} vs {}",
            t.chi,
            g.chi
        );
        assert!((t.phi - g.phi).abs() < 1e-5 * t.phi.abs().max(1.0));
    }

    #[test]
    fn bounded_variation_barrier_out_of_reach() {
        // c r = 1.5: beyond that the lower barrier is irrelevant
        let m = cl();
        let scale = Arc::new(ScaleFunctionSet::new(&m, 0.1).unwrap());
        let e = PhiChiEngine::new(scale.clone(), 1.0, &default_inversion(&m)).unwrap();
        assert!(e.barrier_unreachable(2.0) && !e.barrier_unreachable(1.0));
        let k = ParisianKernel::with_scale(scale.clone(), 1.0).unwrap();
        let inv = e.evaluate(1.0, 2.0).unwrap();
        let target = (-0.1f64).exp() * k.ell(1.0).unwrap();
        assert!(
            (inv.comb - target).abs() < 1e-6 * target,
            "{} vs {target}",
            inv.comb
        );
        assert_eq!(e.ratio(1.0, 2.0).unwrap(), k.log_derivative(1.0).unwrap());
        // below c r two Euler orders agree to the accuracy the kink allows
        let e15 = PhiChiEngine::new(scale, 1.0, &InversionConfig::euler()).unwrap();
        for y in [0.5, 1.0, 1.4] {
            let (a, b) = (e.ratio(1.0, y).unwrap(), e15.ratio(1.0, y).unwrap());
            assert!((a - b).abs() < 5e-3 * a, "y={y}: {a} vs {b}");
            assert!(a > k.log_derivative(1.0).unwrap());
        }
    }

    #[test]
    fn comb_inverts_the_combined_transform() {
        // comb(r) has transform W_y^{(θ,-θ)}(x+y)/(θ W^{(θ)}(y)); compare one transform value
        let m = bm();
        let (x, y, th) = (1.0, 2.0, 0.7);
        let scale = Arc::new(ScaleFunctionSet::new(&m, 0.0).unwrap());
        let wp = ScaleFunctionSet::new(&m, th).unwrap();
        let direct =
            crate::scale_fn::w_two_param(&m, th, -th, y, x + y).unwrap() / (th * wp.w(y).unwrap());
        let cfg = QuadratureConfig::new(1e-10, 1e-7);
        let rs: Vec<f64> = vec![0.05, 0.25, 1.0, 4.0, 16.0];
        let lap = try_integrate(
            |r| {
                let e = PhiChiEngine::new(scale.clone(), r, &InversionConfig::talbot())?;
                Ok((-th * r).exp() * e.evaluate(x, y)?.comb)
            },
            0.0,
            60.0,
            &rs,
            &cfg,
        )
        .unwrap()
        .value;
        assert!((lap - direct).abs() < 1e-5 * direct, "{lap} vs {direct}");
    }
}
