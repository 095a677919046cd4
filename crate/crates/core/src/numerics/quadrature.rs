use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be accumulated by the Gauss-Kronrod driver.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn norm(self) -> f64;
    fn real_part(self) -> f64;
}

impl QuadValue for f64 {
    #[inline]
    fn norm(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn real_part(self) -> f64 {
        self
    }
}

impl QuadValue for Complex64 {
    #[inline]
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
    #[inline]
    fn real_part(self) -> f64 {
        self.re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailPolicy {
    /// Add `f(end)/c` where `c` is the decay rate measured over the last panel.
    ExponentialTailEstimate,
    /// Stop marching once panels are negligible; add nothing.
    HardTruncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail_cutoff_policy: TailPolicy,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_subdivisions: 400,
            tail_cutoff_policy: TailPolicy::ExponentialTailEstimate,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::InvalidArgument(
                "max_subdivisions must be at least 8".into(),
            ));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T = f64> {
    pub value: T,
    pub abs_error: f64,
    pub tolerance_met: bool,
    pub evaluations: usize,
}

impl<T: QuadValue> Quadrature<T> {
    /// The value, or `ToleranceNotMet` carrying the (real part of the) best estimate.
    pub fn checked(self) -> Result<T> {
        if self.tolerance_met {
            Ok(self.value)
        } else {
            Err(Error::ToleranceNotMet {
                value: self.value.real_part(),
                error: self.abs_error,
            })
        }
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[derive(Clone, Copy)]
struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    splittable: bool,
}

fn eval<T: QuadValue, F: FnMut(f64) -> Result<T>>(f: &mut F, x: f64) -> Result<T> {
    let v = f(x)?;
    if v.norm().is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { at: x })
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

fn gk15<T: QuadValue, F: FnMut(f64) -> Result<T>>(f: &mut F, a: f64, b: f64) -> Result<Segment<T>> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = eval(f, c)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = fc.norm() * WGK[7];
    let mut fv1 = [T::default(); 7];
    let mut fv2 = [T::default(); 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(f, c - dx)?;
        let f2 = eval(f, c + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * WGK[j];
        res_abs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let ah = h.abs();
    let err = rescale_error((res_k - res_g).norm() * ah, res_abs * ah, res_asc * ah);
    let width_floor = 64.0 * f64::EPSILON * (a.abs() + b.abs()).max(f64::MIN_POSITIVE);
    Ok(Segment {
        a,
        b,
        value: res_k * h,
        error: err,
        splittable: (b - a).abs() > width_floor,
    })
}

/// Adaptive GK15 on a finite interval with interior breakpoints.
fn adapt_finite<T: QuadValue, F: FnMut(f64) -> Result<T>>(
    f: &mut F,
    a: f64,
    b: f64,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_sub: usize,
) -> Result<Quadrature<T>> {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| *p > a && *p < b)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    let mut segs = Vec::with_capacity(max_sub.max(cuts.len()) + 2);
    for w in cuts.windows(2) {
        segs.push(gk15(f, w[0], w[1])?);
    }
    let mut evaluations = 15 * segs.len();
    loop {
        let mut total = T::default();
        let mut err = 0.0;
        for s in &segs {
            total = total + s.value;
            err += s.error;
        }
        let target = abs_tol.max(rel_tol * total.norm());
        if err <= target {
            return Ok(Quadrature {
                value: total,
                abs_error: err,
                tolerance_met: true,
                evaluations,
            });
        }
        let worst = segs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.splittable)
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Ok(Quadrature {
                value: total,
                abs_error: err,
                tolerance_met: false,
                evaluations,
            });
        };
        if segs.len() >= max_sub {
            return Ok(Quadrature {
                value: total,
                abs_error: err,
                tolerance_met: false,
                evaluations,
            });
        }
        let s = segs[i];
        let m = 0.5 * (s.a + s.b);
        segs[i] = gk15(f, s.a, m)?;
        segs.push(gk15(f, m, s.b)?);
        evaluations += 30;
    }
}

/// Integrate a fallible integrand over `[a, b]`; `b` may be `f64::INFINITY`.
pub fn try_integrate<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    cfg.validate()?;
    if a.is_nan() || b.is_nan() || a == f64::INFINITY || a == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!(
            "bad integration range [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: T::default(),
            abs_error: 0.0,
            tolerance_met: true,
            evaluations: 0,
        });
    }
    if b.is_finite() {
        if b < a {
            let q = adapt_finite(
                &mut f,
                b,
                a,
                points,
                cfg.abs_tol,
                cfg.rel_tol,
                cfg.max_subdivisions,
            )?;
            return Ok(Quadrature {
                value: q.value * -1.0,
                ..q
            });
        }
        return adapt_finite(
            &mut f,
            a,
            b,
            points,
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.max_subdivisions,
        );
    }
    if b == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "lower-infinite ranges are not supported".into(),
        ));
    }
    semi_infinite(&mut f, a, points, cfg)
}

fn semi_infinite<T, F>(
    f: &mut F,
    a: f64,
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    const MAX_PANELS: usize = 200;
    let mut total = T::default();
    let mut err = 0.0;
    let mut met = true;
    let mut evaluations = 0;
    let mut lo = a;
    let mut width = 1.0;
    let mut quiet = 0;
    // breakpoints beyond the last one are handled by marching
    let last_point = points
        .iter()
        .copied()
        .filter(|p| *p > a && p.is_finite())
        .fold(a, f64::max);
    if last_point > a {
        let q = adapt_finite(
            f,
            a,
            last_point,
            points,
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.max_subdivisions,
        )?;
        total = q.value;
        err = q.abs_error;
        met &= q.tolerance_met;
        evaluations += q.evaluations;
        lo = last_point;
    }
    for panel in 0..MAX_PANELS {
        let hi = lo + width;
        let budget = 0.5 * cfg.target(total.norm());
        let q = adapt_finite(f, lo, hi, &[], budget, cfg.rel_tol, cfg.max_subdivisions)?;
        total = total + q.value;
        err += q.abs_error;
        met &= q.tolerance_met;
        evaluations += q.evaluations;
        let small = q.value.norm() <= 0.05 * cfg.target(total.norm());
        quiet = if small { quiet + 1 } else { 0 };
        lo = hi;
        if panel >= 1 && quiet >= 2 {
            let tail = match cfg.tail_cutoff_policy {
                TailPolicy::HardTruncate => T::default(),
                TailPolicy::ExponentialTailEstimate => {
                    let d = 0.25 * width;
                    let f1 = eval(f, lo - d)?;
                    let f2 = eval(f, lo)?;
                    evaluations += 2;
                    let (n1, n2) = (f1.norm(), f2.norm());
                    if n2 > 0.0 && n2 < n1 {
                        let rate = (n1 / n2).ln() / d;
                        f2 * (1.0 / rate)
                    } else {
                        T::default()
                    }
                }
            };
            if tail.norm() <= cfg.target(total.norm()) {
                total = total + tail;
                err += 0.5 * tail.norm();
                met &= err <= 2.0 * cfg.target(total.norm());
                return Ok(Quadrature {
                    value: total,
                    abs_error: err,
                    tolerance_met: met,
                    evaluations,
                });
            }
            quiet = 0;
        }
        if width < 64.0 {
            width *= 2.0;
        }
    }
    Ok(Quadrature {
        value: total,
        abs_error: err,
        tolerance_met: false,
        evaluations,
    })
}

/// Real integrand convenience wrapper.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Quadrature> {
    try_integrate(|x| Ok(f(x)), a, b, &[], cfg)
}

/// Real integrand with breakpoints where the integrand is not smooth.
pub fn integrate_points<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature> {
    try_integrate(|x| Ok(f(x)), a, b, points, cfg)
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Cached rule for `n <= 64`.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static RULES: [OnceLock<GaussLegendre>; 65] = [const { OnceLock::new() }; 65];
        assert!((1..=64).contains(&n), "cached rules cover 1..=64 points");
        RULES[n].get_or_init(|| GaussLegendre::new(n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fixed-rule integral over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_unit_interval() {
        let q = integrate(|_| 1.0, 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-14 && q.tolerance_met);
    }

    #[test]
    fn exponential_tail() {
        let q = integrate(
            |x| (-x).exp(),
            0.0,
            f64::INFINITY,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn half_normal_mean() {
        let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let q = integrate(
            |x| x * (-x * x / 2.0).exp() * c,
            0.0,
            f64::INFINITY,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q.value - c).abs() < 1e-11);
    }

    #[test]
    fn slow_exponential_tail_uses_estimate() {
        let cfg = QuadratureConfig::new(1e-10, 1e-10);
        let q = integrate(|x| 0.01 * (-0.01 * x).exp(), 0.0, f64::INFINITY, &cfg).unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn reversed_bounds_negate() {
        let cfg = QuadratureConfig::default();
        let q = integrate(|x| x * x, 2.0, 0.0, &cfg).unwrap();
        assert!((q.value + 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let cfg = QuadratureConfig::default();
        let q = integrate_points(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &cfg).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn nonfinite_is_an_error() {
        let r = integrate(|x| 1.0 / (x - 0.5), 0.0, 1.0, &QuadratureConfig::default());
        assert!(
            matches!(r, Err(Error::NonFiniteEvaluation { .. }))
                || r.map(|q| !q.tolerance_met).unwrap()
        );
    }

    #[test]
    fn tolerance_failure_is_flagged() {
        let cfg = QuadratureConfig {
            max_subdivisions: 8,
            ..QuadratureConfig::default()
        };
        let q = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &cfg).unwrap();
        assert!(!q.tolerance_met);
        assert!(matches!(q.checked(), Err(Error::ToleranceNotMet { .. })));
    }

    #[test]
    fn complex_integrand() {
        let q: Quadrature<Complex64> = try_integrate(
            |x| Ok(Complex64::new(0.0, x).exp()),
            0.0,
            std::f64::consts::PI,
            &[],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 10, 20, 32] {
            let g = GaussLegendre::cached(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let v = g.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }
}
