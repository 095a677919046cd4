use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InversionMethod {
    Talbot,
    GaverStehfest,
    EulerSummation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub method: InversionMethod,
    pub terms: usize,
    /// Decimal digits expected; drives the Gaver-Stehfest consistency check.
    pub precision_hint: u32,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::talbot()
    }
}

impl InversionConfig {
    pub fn talbot() -> Self {
        Self {
            method: InversionMethod::Talbot,
            terms: 32,
            precision_hint: 10,
        }
    }

    pub fn gaver_stehfest() -> Self {
        Self {
            method: InversionMethod::GaverStehfest,
            terms: 14,
            precision_hint: 3,
        }
    }

    pub fn euler() -> Self {
        Self {
            method: InversionMethod::EulerSummation,
            terms: 15,
            precision_hint: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            InversionMethod::Talbot => self.terms >= 16,
            InversionMethod::GaverStehfest => self.terms % 2 == 0 && (8..=20).contains(&self.terms),
            InversionMethod::EulerSummation => (5..=200).contains(&self.terms),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{} terms invalid for {:?}",
                self.terms, self.method
            )))
        }
    }
}

/// Invert a transform given on the complex plane. Gaver-Stehfest uses the real axis only.
pub fn invert_laplace<F>(mut transform: F, t: f64, cfg: &InversionConfig) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    cfg.validate()?;
    check_time(t)?;
    match cfg.method {
        InversionMethod::Talbot => talbot(&mut transform, t, cfg.terms),
        InversionMethod::EulerSummation => euler(&mut transform, t, cfg.terms),
        InversionMethod::GaverStehfest => {
            invert_laplace_real(|s| transform(Complex64::new(s, 0.0)).map(|z| z.re), t, cfg)
        }
    }
}

/// Invert a transform known on the positive real axis only (Gaver-Stehfest).
pub fn invert_laplace_real<F>(transform: F, t: f64, cfg: &InversionConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    check_time(t)?;
    if cfg.method != InversionMethod::GaverStehfest {
        return Err(Error::InvalidArgument(
            "real-axis inversion requires Gaver-Stehfest".into(),
        ));
    }
    let g = gaver_stehfest(transform, t, cfg.terms)?;
    let tol = 10f64.powi(-(cfg.precision_hint as i32)) * (g.value.abs() + 1e-10);
    if g.spread > tol {
        return Err(Error::OscillationDetected {
            value: g.value,
            spread: g.spread,
        });
    }
    Ok(g.value)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "inversion time must be positive, got {t}"
        )))
    }
}

fn finite(z: Complex64, s: Complex64) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::InversionFailure(format!(
            "transform not finite at s = {s}"
        )))
    }
}

/// Fixed Talbot contour (Abate-Valko).
pub fn talbot<F>(transform: &mut F, t: f64, m: usize) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let s0 = Complex64::new(r, 0.0);
    let mut sum = 0.5 * finite(transform(s0)?, s0)?.re * (r * t).exp();
    for k in 1..m {
        let th = k as f64 * PI / mf;
        let cot = th.cos() / th.sin();
        let s = Complex64::new(r * th * cot, r * th);
        let sigma = th + (th * cot - 1.0) * cot;
        let fs = finite(transform(s)?, s)?;
        sum += ((s * t).exp() * fs * Complex64::new(1.0, sigma)).re;
    }
    Ok(r / mf * sum)
}

/// Stehfest weights for even `n`.
pub fn stehfest_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let fact = |k: usize| (1..=k).fold(1.0f64, |a, i| a * i as f64);
    (1..=n)
        .map(|k| {
            let mut s = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                s += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StehfestResult {
    pub value: f64,
    /// Largest deviation from the neighbouring even term counts.
    pub spread: f64,
}

/// Gaver-Stehfest with `n` terms and a consistency spread against `n-2` and `n+2`.
pub fn gaver_stehfest<F>(mut transform: F, t: f64, n: usize) -> Result<StehfestResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let hi = if n + 2 <= 20 { n + 2 } else { n };
    let lo = if n + 2 <= 20 { n - 2 } else { n - 4 };
    let a = LN_2 / t;
    let mut vals = Vec::with_capacity(hi);
    for k in 1..=hi {
        let s = k as f64 * a;
        let v = transform(s)?;
        if !v.is_finite() {
            return Err(Error::InversionFailure(format!(
                "transform not finite at s = {s}"
            )));
        }
        vals.push(v);
    }
    let combine = |m: usize| -> f64 {
        stehfest_weights(m)
            .iter()
            .zip(&vals)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            * a
    };
    let value = combine(n);
    let spread = (combine(lo) - value).abs().max((combine(hi) - value).abs());
    Ok(StehfestResult { value, spread })
}

/// A fixed inversion formula `f(t) ≈ Σ Re(w_k F(s_k))`, reusable for many transforms at one `t`.
#[derive(Debug, Clone)]
pub struct InversionRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    /// Gaver-Stehfest only: weights for the neighbouring term counts.
    neighbours: Option<(Vec<f64>, Vec<f64>)>,
    precision_hint: u32,
}

impl InversionRule {
    pub fn new(t: f64, cfg: &InversionConfig) -> Result<Self> {
        cfg.validate()?;
        check_time(t)?;
        let c = |x: f64| Complex64::new(x, 0.0);
        let (nodes, weights, neighbours) = match cfg.method {
            InversionMethod::Talbot => {
                let mf = cfg.terms as f64;
                let r = 2.0 * mf / (5.0 * t);
                let mut nodes = vec![c(r)];
                let mut weights = vec![c(0.5 * (r * t).exp() * r / mf)];
                for k in 1..cfg.terms {
                    let th = k as f64 * PI / mf;
                    let cot = th.cos() / th.sin();
                    let s = Complex64::new(r * th * cot, r * th);
                    let sigma = th + (th * cot - 1.0) * cot;
                    nodes.push(s);
                    weights.push((s * t).exp() * Complex64::new(1.0, sigma) * (r / mf));
                }
                (nodes, weights, None)
            }
            InversionMethod::EulerSummation => {
                const A: f64 = 18.4;
                const M: usize = 11;
                let n = cfg.terms;
                let x = A / (2.0 * t);
                let h = PI / t;
                let mut binom = [1.0; M + 1];
                for j in 1..=M {
                    binom[j] = binom[j - 1] * (M + 1 - j) as f64 / j as f64;
                }
                let scale = (A / 2.0).exp() / t / 2f64.powi(M as i32);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for k in 0..=(n + M) {
                    let tail: f64 = (0..=M).filter(|j| n + j >= k).map(|j| binom[j]).sum();
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let half = if k == 0 { 0.5 } else { 1.0 };
                    nodes.push(Complex64::new(x, k as f64 * h));
                    weights.push(c(sign * half * tail * scale));
                }
                (nodes, weights, None)
            }
            InversionMethod::GaverStehfest => {
                let n = cfg.terms;
                let (lo, hi) = if n + 2 <= 20 {
                    (n - 2, n + 2)
                } else {
                    (n - 4, n)
                };
                let a = LN_2 / t;
                let pad = |m: usize| {
                    let mut w: Vec<f64> = stehfest_weights(m).iter().map(|v| v * a).collect();
                    w.resize(hi, 0.0);
                    w
                };
                let nodes = (1..=hi).map(|k| c(k as f64 * a)).collect();
                let weights = pad(n).into_iter().map(c).collect();
                (nodes, weights, Some((pad(lo), pad(hi))))
            }
        };
        Ok(Self {
            nodes,
            weights,
            neighbours,
            precision_hint: cfg.precision_hint,
        })
    }

    /// True when every node is real (Gaver-Stehfest).
    pub fn real_axis(&self) -> bool {
        self.neighbours.is_some()
    }

    /// Combine transform values taken at `nodes`; checks the Gaver-Stehfest spread.
    pub fn apply(&self, values: &[Complex64]) -> Result<f64> {
        for (v, s) in values.iter().zip(&self.nodes) {
            finite(*v, *s)?;
        }
        let value: f64 = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| (w * v).re)
            .sum();
        if let Some((lo, hi)) = &self.neighbours {
            let comb = |w: &[f64]| w.iter().zip(values).map(|(a, v)| a * v.re).sum::<f64>();
            let spread = (comb(lo) - value).abs().max((comb(hi) - value).abs());
            let tol = 10f64.powi(-(self.precision_hint as i32)) * (value.abs() + 1e-10);
            if spread > tol {
                return Err(Error::OscillationDetected { value, spread });
            }
        }
        Ok(value)
    }
}

/// Abate-Whitt Euler summation of the Bromwich integral.
pub fn euler<F>(transform: &mut F, t: f64, n: usize) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    const A: f64 = 18.4;
    const M: usize = 11;
    let x = A / (2.0 * t);
    let h = PI / t;
    let s0 = Complex64::new(x, 0.0);
    let mut partial = 0.5 * finite(transform(s0)?, s0)?.re;
    let mut sums = Vec::with_capacity(M + 1);
    for k in 1..=(n + M) {
        let s = Complex64::new(x, k as f64 * h);
        let term = finite(transform(s)?, s)?.re;
        partial += if k % 2 == 0 { term } else { -term };
        if k >= n {
            sums.push(partial);
        }
    }
    let mut binom = 1.0;
    let mut acc = 0.0;
    for (j, s) in sums.iter().enumerate() {
        acc += binom * s;
        binom = binom * (M - j) as f64 / (j + 1) as f64;
    }
    acc /= 2f64.powi(M as i32);
    Ok((A / 2.0).exp() / t * acc)
}
