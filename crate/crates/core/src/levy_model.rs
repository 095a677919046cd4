//! Spectrally negative Lévy models: Laplace exponent, its right inverse and the law of `X(r)`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{try_integrate, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    BrownianDrift,
    CramerLundbergExp,
    CramerLundbergGeneral,
}

/// Piecewise-linear claim density on a user grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
}

impl TabulatedDensity {
    /// Normalises the tabulation and checks the supplied mean against it.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, mean: f64) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidModel(
                "tabulated density needs matching grid/values of length >= 2".into(),
            ));
        }
        if grid[0] < 0.0
            || grid.windows(2).any(|w| !(w[1] > w[0]))
            || grid.iter().any(|g| !g.is_finite())
        {
            return Err(Error::InvalidModel(
                "claim grid must be finite, nonnegative and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidModel(
                "claim density values must be finite and nonnegative".into(),
            ));
        }
        let mut d = Self {
            grid,
            values,
            cdf: Vec::new(),
            mean: 0.0,
        };
        let (m0, m1) = d.moments(f64::NEG_INFINITY, f64::INFINITY);
        if !(m0 > 0.0) {
            return Err(Error::InvalidModel("claim density has zero mass".into()));
        }
        for v in d.values.iter_mut() {
            *v /= m0;
        }
        let tab_mean = m1 / m0;
        if !((tab_mean - mean).abs() <= 1e-4 * mean.abs().max(1.0)) {
            return Err(Error::InvalidModel(format!(
                "supplied claim mean {mean} disagrees with tabulated mean {tab_mean}"
            )));
        }
        let mut cdf = vec![0.0];
        for i in 0..d.grid.len() - 1 {
            let h = d.grid[i + 1] - d.grid[i];
            cdf.push(cdf[i] + 0.5 * h * (d.values[i] + d.values[i + 1]));
        }
        d.cdf = cdf;
        d.mean = tab_mean;
        Ok(d)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn support_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn density(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = match g.partition_point(|t| *t <= x) {
            0 => 0,
            k if k >= g.len() => g.len() - 2,
            k => k - 1,
        };
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Exact `(∫ f, ∫ x f)` over `[a, b]`.
    pub fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for i in 0..self.grid.len() - 1 {
            let (x0, x1) = (self.grid[i], self.grid[i + 1]);
            let u = x0.max(a);
            let v = x1.min(b);
            if v <= u {
                continue;
            }
            let f = |x: f64| {
                let t = (x - x0) / (x1 - x0);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            };
            let (fu, fv) = (f(u), f(v));
            let h = v - u;
            m0 += 0.5 * h * (fu + fv);
            m1 += h / 6.0 * (fu * (2.0 * u + v) + fv * (u + 2.0 * v));
        }
        (m0, m1)
    }

    /// `∫ x^k e^{-θx} f(x) dx` for k = 0, 1, computed segment by segment.
    pub fn laplace(&self, theta: Complex64) -> (Complex64, Complex64) {
        let mut l0 = Complex64::new(0.0, 0.0);
        let mut l1 = Complex64::new(0.0, 0.0);
        for i in 0..self.grid.len() - 1 {
            let x0 = self.grid[i];
            let h = self.grid[i + 1] - x0;
            let f0 = self.values[i];
            let s = (self.values[i + 1] - f0) / h;
            let [e0, e1, e2] = exp_moments(theta, h);
            let w = (-theta * x0).exp();
            l0 += w * (e0 * f0 + e1 * s);
            l1 += w * (e0 * (x0 * f0) + e1 * (x0 * s + f0) + e2 * s);
        }
        (l0, l1)
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = *self.cdf.last().unwrap();
        let target = (u * total).clamp(0.0, total);
        let i = self
            .cdf
            .partition_point(|c| *c < target)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (x0, h) = (self.grid[i], self.grid[i + 1] - self.grid[i]);
        let f0 = self.values[i];
        let s = (self.values[i + 1] - f0) / h;
        let need = target - self.cdf[i];
        // solve f0 t + s t^2 / 2 = need
        let t = if s.abs() < 1e-14 * f0.max(1e-300) {
            if f0 > 0.0 {
                need / f0
            } else {
                0.0
            }
        } else {
            let disc = (f0 * f0 + 2.0 * s * need).max(0.0);
            2.0 * need / (f0 + disc.sqrt())
        };
        x0 + t.clamp(0.0, h)
    }
}

/// `∫_0^h u^k e^{-θu} du` for k = 0, 1, 2.
fn exp_moments(theta: Complex64, h: f64) -> [Complex64; 3] {
    let z = theta * h;
    if z.norm() < 0.5 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..30 {
            for (j, o) in out.iter_mut().enumerate() {
                *o += term / (k + j + 1) as f64;
            }
            term *= -z / (k + 1) as f64;
        }
        [out[0] * h, out[1] * h * h, out[2] * h * h * h]
    } else {
        let e = (-z).exp();
        let e0 = (1.0 - e) / theta;
        let e1 = (e0 - e * h) / theta;
        let e2 = (e1 * 2.0 - e * h * h) / theta;
        [e0, e1, e2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    None,
    Exponential { rate: f64 },
    Tabulated(TabulatedDensity),
}

impl JumpLaw {
    /// Tail `P(J > y)`.
    pub fn tail(&self, y: f64) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::Exponential { rate } => (-rate * y.max(0.0)).exp(),
            JumpLaw::Tabulated(d) => d.moments(y, f64::INFINITY).0,
        }
    }

    /// `∫_0^y P(J > u) du = E[min(J, y)]`.
    pub fn integrated_tail(&self, y: f64) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::Exponential { rate } => -(-rate * y).exp_m1() / rate,
            JumpLaw::Tabulated(d) => d.moments(f64::NEG_INFINITY, y).1 + y * self.tail(y),
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            JumpLaw::Tabulated(d) => d.density(y),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::None => 0.0,
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::Tabulated(d) => d.mean(),
        }
    }
}

/// A spectrally negative Lévy process. For the Cramér-Lundberg kinds `gamma` is the premium rate c.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    pub kind: ModelKind,
    pub gamma: f64,
    pub sigma: f64,
    pub jump_rate: f64,
    pub jump_law: JumpLaw,
}

impl LevyModel {
    pub fn brownian(gamma: f64, sigma: f64) -> Result<Self> {
        Self::validated(Self {
            kind: ModelKind::BrownianDrift,
            gamma,
            sigma,
            jump_rate: 0.0,
            jump_law: JumpLaw::None,
        })
    }

    pub fn cramer_lundberg_exp(c: f64, sigma: f64, jump_rate: f64, alpha: f64) -> Result<Self> {
        Self::validated(Self {
            kind: ModelKind::CramerLundbergExp,
            gamma: c,
            sigma,
            jump_rate,
            jump_law: JumpLaw::Exponential { rate: alpha },
        })
    }

    pub fn cramer_lundberg_general(
        c: f64,
        sigma: f64,
        jump_rate: f64,
        claims: TabulatedDensity,
    ) -> Result<Self> {
        Self::validated(Self {
            kind: ModelKind::CramerLundbergGeneral,
            gamma: c,
            sigma,
            jump_rate,
            jump_law: JumpLaw::Tabulated(claims),
        })
    }

    fn validated(m: Self) -> Result<Self> {
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidModel(s.to_string()));
        if !(self.gamma.is_finite() && self.sigma.is_finite() && self.jump_rate.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.sigma < 0.0 || self.jump_rate < 0.0 {
            return bad("sigma and jump_rate must be nonnegative");
        }
        match (&self.kind, &self.jump_law) {
            (ModelKind::BrownianDrift, JumpLaw::None) => {
                if self.jump_rate != 0.0 {
                    return bad("BrownianDrift has no jumps");
                }
                if self.sigma == 0.0 {
                    return bad("sigma = 0 without jumps is a pure drift");
                }
            }
            (ModelKind::CramerLundbergExp, JumpLaw::Exponential { rate }) => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return bad("exponential claim rate must be positive");
                }
            }
            (ModelKind::CramerLundbergGeneral, JumpLaw::Tabulated(_)) => {}
            _ => return bad("jump law does not match model kind"),
        }
        if self.kind != ModelKind::BrownianDrift {
            if self.sigma == 0.0 && self.jump_rate == 0.0 {
                return bad("sigma = 0 and jump_rate = 0 is a pure drift");
            }
            if self.sigma == 0.0 && !(self.gamma > 0.0) {
                return bad("with sigma = 0 the premium rate must be positive (otherwise -X is a subordinator)");
            }
        }
        Ok(())
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_rate > 0.0 && !matches!(self.jump_law, JumpLaw::None)
    }

    /// Paths of bounded variation: no Gaussian part (all jump laws here have finite mass).
    pub fn bounded_variation(&self) -> bool {
        self.sigma == 0.0
    }

    /// `W^{(q)}(0)`, independent of q.
    pub fn w_at_zero(&self) -> f64 {
        if self.bounded_variation() {
            1.0 / self.gamma
        } else {
            0.0
        }
    }

    pub fn psi(&self, theta: f64) -> f64 {
        let base = self.gamma * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        if !self.has_jumps() {
            return base;
        }
        match &self.jump_law {
            JumpLaw::Exponential { rate } => base - self.jump_rate * theta / (rate + theta),
            JumpLaw::Tabulated(d) => {
                base - self.jump_rate * (1.0 - d.laplace(Complex64::new(theta, 0.0)).0.re)
            }
            JumpLaw::None => base,
        }
    }

    pub fn psi_c(&self, theta: Complex64) -> Complex64 {
        let base = theta * self.gamma + theta * theta * (0.5 * self.sigma * self.sigma);
        if !self.has_jumps() {
            return base;
        }
        match &self.jump_law {
            JumpLaw::Exponential { rate } => base - theta * self.jump_rate / (theta + rate),
            JumpLaw::Tabulated(d) => base - (1.0 - d.laplace(theta).0) * self.jump_rate,
            JumpLaw::None => base,
        }
    }

    pub fn psi_prime(&self, theta: f64) -> f64 {
        let base = self.gamma + self.sigma * self.sigma * theta;
        if !self.has_jumps() {
            return base;
        }
        match &self.jump_law {
            JumpLaw::Exponential { rate } => {
                base - self.jump_rate * rate / ((rate + theta) * (rate + theta))
            }
            JumpLaw::Tabulated(d) => {
                base - self.jump_rate * d.laplace(Complex64::new(theta, 0.0)).1.re
            }
            JumpLaw::None => base,
        }
    }

    /// `ψ'(0+) = E X(1)`.
    pub fn mean_x1(&self) -> Result<f64> {
        let m = self.jump_law.mean();
        if !m.is_finite() {
            return Err(Error::InfiniteMean);
        }
        Ok(self.gamma - self.jump_rate * m)
    }

    /// Largest root of `ψ(θ) = q`.
    pub fn phi_q(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "q must be finite and nonnegative, got {q}"
            )));
        }
        if q == 0.0 && self.psi_prime(0.0) >= 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0f64;
        while self.psi(hi) <= q {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::RootBracketFailure { q });
            }
        }
        // ψ is convex and increasing to the right of the root: Newton from the right is monotone.
        let mut lo = 0.0f64;
        let mut th = hi;
        for _ in 0..200 {
            let f = self.psi(th) - q;
            if f <= 0.0 {
                if f == 0.0 {
                    return Ok(th);
                }
                lo = th;
                th = 0.5 * (lo + hi);
                continue;
            }
            hi = th;
            let d = self.psi_prime(th);
            let next = th - f / d;
            let next = if d > 0.0 && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if (th - next).abs() <= 4.0 * f64::EPSILON * th.max(1e-300) {
                return Ok(next);
            }
            th = next;
        }
        Ok(th)
    }

    /// Positive `R` with `ψ(-R) = 0` (Lundberg coefficient), when it exists.
    pub fn adjustment_coefficient(&self) -> Option<f64> {
        let mean = self.mean_x1().ok()?;
        if mean <= 0.0 {
            return None;
        }
        let upper = match &self.jump_law {
            JumpLaw::Exponential { rate } if self.has_jumps() => rate * (1.0 - 1e-12),
            _ => 1e6,
        };
        let f = |r: f64| self.psi(-r);
        let mut hi = upper.min(1.0);
        while f(hi) < 0.0 {
            if hi >= upper {
                return None;
            }
            hi = (2.0 * hi).min(upper);
        }
        crate::numerics::roots::bisect(f, 1e-14, hi, 1e-14).ok()
    }

    /// Law of `X(r)`.
    pub fn marginal_law(&self, r: f64) -> Result<MarginalLaw> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {r}"
            )));
        }
        let sd = self.sigma * r.sqrt();
        if !self.has_jumps() {
            return Ok(MarginalLaw {
                horizon: r,
                atom_location: None,
                atom_mass: 0.0,
                repr: Repr::Gaussian {
                    mean: self.gamma * r,
                    sd,
                },
            });
        }
        let lr = self.jump_rate * r;
        let drift_point = self.gamma * r;
        match &self.jump_law {
            JumpLaw::Exponential { rate } => {
                let cp = CompoundExp {
                    lambda_r: lr,
                    alpha: *rate,
                };
                if sd == 0.0 {
                    Ok(MarginalLaw {
                        horizon: r,
                        atom_location: Some(drift_point),
                        atom_mass: (-lr).exp(),
                        repr: Repr::CompoundExp { drift_point, cp },
                    })
                } else {
                    Ok(MarginalLaw {
                        horizon: r,
                        atom_location: None,
                        atom_mass: 0.0,
                        repr: Repr::CompoundExpGauss {
                            drift_point,
                            cp,
                            sd,
                        },
                    })
                }
            }
            JumpLaw::Tabulated(d) => {
                if sd > 0.0 {
                    return Err(Error::DensityUnavailable(
                        "tabulated claims combined with a Gaussian component".into(),
                    ));
                }
                let lattice = Lattice::build(d, lr)?;
                Ok(MarginalLaw {
                    horizon: r,
                    atom_location: Some(drift_point),
                    atom_mass: (-lr).exp(),
                    repr: Repr::Lattice {
                        drift_point,
                        lattice,
                    },
                })
            }
            JumpLaw::None => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CompoundExp {
    lambda_r: f64,
    alpha: f64,
}

impl CompoundExp {
    /// Density of the aggregate claim `S` on `s > 0` (the no-claim atom excluded).
    fn density(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let (lr, a) = (self.lambda_r, self.alpha);
        let y = lr * a * s;
        // λrα Σ_m y^m/(m!(m+1)!) = λrα I_1(2√y)/√y
        let log_sum = if y < 40_000.0 {
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut m = 0.0;
            loop {
                term *= y / ((m + 1.0) * (m + 2.0));
                sum += term;
                m += 1.0;
                if term < 1e-17 * sum && m > y.sqrt() {
                    break;
                }
            }
            sum.ln()
        } else {
            let x = 2.0 * y.sqrt();
            let corr = 1.0 - 3.0 / (8.0 * x) - 15.0 / (128.0 * x * x);
            x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + corr.ln() - 0.5 * y.ln()
        };
        ((lr * a).ln() - lr - a * s + log_sum).exp()
    }
}

/// Compound Poisson claims on a lattice, built by moment-matched discretisation and Panjer recursion.
#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    h: f64,
    /// Continuous-part masses at `k h` (the no-claim atom removed).
    masses: Vec<f64>,
}

impl Lattice {
    fn build(d: &TabulatedDensity, lambda_r: f64) -> Result<Self> {
        let xmax = d.support_max();
        let min_gap = d
            .grid()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let h = (min_gap / 4.0).min(xmax / 256.0).max(xmax / 20_000.0);
        let nj = (xmax / h).ceil() as usize + 1;
        let mut f = vec![0.0; nj + 1];
        for k in 0..nj {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let (m0, m1) = d.moments(a, b);
            if m0 <= 0.0 {
                continue;
            }
            let mu = m1 / m0;
            f[k] += m0 * (b - mu) / h;
            f[k + 1] += m0 * (mu - a) / h;
        }
        const MAX_NODES: usize = 400_000;
        let mut p = vec![(-lambda_r * (1.0 - f[0])).exp()];
        let mut cum = p[0];
        let mut k = 0;
        while cum < 1.0 - 1e-13 {
            k += 1;
            if k >= MAX_NODES {
                return Err(Error::DensityUnavailable(format!(
                    "aggregate claim lattice exceeded {MAX_NODES} nodes (mass {cum})"
                )));
            }
            let mut s = 0.0;
            for j in 1..=k.min(nj) {
                s += j as f64 * f[j] * p[k - j];
            }
            let pk = lambda_r / k as f64 * s;
            p.push(pk);
            cum += pk;
        }
        p[0] -= (-lambda_r).exp();
        Ok(Self { h, masses: p })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    CompoundExp {
        drift_point: f64,
        cp: CompoundExp,
    },
    CompoundExpGauss {
        drift_point: f64,
        cp: CompoundExp,
        sd: f64,
    },
    Lattice {
        drift_point: f64,
        lattice: Lattice,
    },
}

/// Law of `X(r)`: an optional drift atom plus a continuous part.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLaw {
    pub horizon: f64,
    pub atom_location: Option<f64>,
    pub atom_mass: f64,
    repr: Repr,
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl MarginalLaw {
    /// Density of the continuous part.
    pub fn density(&self, z: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian { mean, sd } => normal_pdf((z - mean) / sd) / sd,
            Repr::CompoundExp { drift_point, cp } => {
                if z < *drift_point {
                    cp.density(drift_point - z)
                } else {
                    0.0
                }
            }
            Repr::CompoundExpGauss {
                drift_point,
                cp,
                sd,
            } => {
                let atom = (-cp.lambda_r).exp() * normal_pdf((z - drift_point) / sd) / sd;
                let cfg = QuadratureConfig::new(1e-14, 1e-10);
                let cont = try_integrate(
                    |s| Ok(cp.density(s) * normal_pdf((z - drift_point + s) / sd) / sd),
                    0.0,
                    f64::INFINITY,
                    &[],
                    &cfg,
                )
                .map(|q| q.value)
                .unwrap_or(f64::NAN);
                atom + cont
            }
            Repr::Lattice {
                drift_point,
                lattice,
            } => {
                let s = drift_point - z;
                if s < 0.0 {
                    return 0.0;
                }
                let u = s / lattice.h;
                let k = u.floor() as usize;
                if k + 1 >= lattice.masses.len() {
                    return 0.0;
                }
                let t = u - k as f64;
                let d0 = lattice.masses[k] / lattice.h * if k == 0 { 2.0 } else { 1.0 };
                let d1 = lattice.masses[k + 1] / lattice.h;
                d0 * (1.0 - t) + d1 * t
            }
        }
    }

    /// Upper end of the support, if bounded.
    pub fn support_max(&self) -> f64 {
        match &self.repr {
            Repr::CompoundExp { drift_point, .. } | Repr::Lattice { drift_point, .. } => {
                *drift_point
            }
            _ => f64::INFINITY,
        }
    }

    /// `E[g(X(r))]` over the whole line for a `g` that may change sign.
    ///
    /// If the relative tolerance cannot be met because the mean nearly cancels, the error is
    /// measured against `E|g(X(r))|` instead.
    pub fn signed_expectation<F>(&self, g: F, cfg: &QuadratureConfig) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        match self.expectation(|z| Ok(g(z)), f64::NEG_INFINITY, &[], 0.0, cfg) {
            Err(Error::ToleranceNotMet { .. }) => {
                let loose = QuadratureConfig::new(cfg.abs_tol, 1e-6);
                let size =
                    self.expectation(|z| Ok(g(z).abs()), f64::NEG_INFINITY, &[], 0.0, &loose)?;
                let scaled = QuadratureConfig {
                    abs_tol: cfg.abs_tol.max(cfg.rel_tol * size),
                    ..*cfg
                };
                self.expectation(|z| Ok(g(z)), f64::NEG_INFINITY, &[], 0.0, &scaled)
            }
            other => other,
        }
    }

    /// `E[g(X(r)); X(r) > lower]`.
    ///
    /// `breakpoints` are z-locations where `g` is not smooth; `growth` is an upper bound on the
    /// exponential growth rate of `g` at `+∞`, used to size the Gaussian window.
    pub fn expectation<F>(
        &self,
        mut g: F,
        lower: f64,
        breakpoints: &[f64],
        growth: f64,
        cfg: &QuadratureConfig,
    ) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        match &self.repr {
            Repr::Gaussian { mean, sd } => {
                gaussian_expectation(&mut g, *mean, *sd, 1.0, lower, breakpoints, growth, cfg)
            }
            Repr::CompoundExp { drift_point, cp } => {
                let c = *drift_point;
                let mut total = 0.0;
                if c > lower {
                    total += self.atom_mass * g(c)?;
                }
                let s_hi = if lower.is_finite() {
                    c - lower
                } else {
                    f64::INFINITY
                };
                if s_hi > 0.0 {
                    let pts: Vec<f64> = breakpoints
                        .iter()
                        .map(|b| c - b)
                        .filter(|s| *s > 0.0 && *s < s_hi)
                        .collect();
                    let q = try_integrate(|s| Ok(cp.density(s) * g(c - s)?), 0.0, s_hi, &pts, cfg)?;
                    total += q.checked()?;
                }
                Ok(total)
            }
            Repr::CompoundExpGauss {
                drift_point,
                cp,
                sd,
            } => {
                let c = *drift_point;
                let atom = (-cp.lambda_r).exp();
                let mut total =
                    gaussian_expectation(&mut g, c, *sd, atom, lower, breakpoints, growth, cfg)?;
                let inner_cfg = QuadratureConfig {
                    abs_tol: cfg.abs_tol,
                    rel_tol: cfg.rel_tol.max(1e-10),
                    ..*cfg
                };
                let q = try_integrate(
                    |s| {
                        let w = cp.density(s);
                        if w == 0.0 {
                            return Ok(0.0);
                        }
                        Ok(w * gaussian_expectation(
                            &mut g,
                            c - s,
                            *sd,
                            1.0,
                            lower,
                            breakpoints,
                            growth,
                            &inner_cfg,
                        )?)
                    },
                    0.0,
                    f64::INFINITY,
                    &[],
                    cfg,
                )?;
                total += q.checked()?;
                Ok(total)
            }
            Repr::Lattice {
                drift_point,
                lattice,
            } => {
                let c = *drift_point;
                let mut total = 0.0;
                if c > lower {
                    total += self.atom_mass * g(c)?;
                }
                for (k, p) in lattice.masses.iter().enumerate() {
                    let z = c - k as f64 * lattice.h;
                    if z <= lower {
                        break;
                    }
                    if *p != 0.0 {
                        total += p * g(z)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Total mass of atom plus continuous part.
    pub fn total_mass(&self, cfg: &QuadratureConfig) -> Result<f64> {
        self.expectation(|_| Ok(1.0), f64::NEG_INFINITY, &[], 0.0, cfg)
    }
}

#[allow(clippy::too_many_arguments)]
fn gaussian_expectation<F>(
    g: &mut F,
    mean: f64,
    sd: f64,
    weight: f64,
    lower: f64,
    breakpoints: &[f64],
    growth: f64,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const WIDTH: f64 = 13.0;
    let centre = mean + growth.max(0.0) * sd * sd;
    let lo = lower.max(mean.min(centre) - WIDTH * sd);
    let hi = mean.max(centre) + WIDTH * sd;
    if hi <= lo {
        return Ok(0.0);
    }
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    for k in [-2.0, 0.0, 2.0] {
        let p = centre + k * sd;
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    let q = try_integrate(
        |z| Ok(normal_pdf((z - mean) / sd) / sd * g(z)?),
        lo,
        hi,
        &pts,
        cfg,
    )?;
    Ok(weight * q.checked()?)
}

// ---------------------------------------------------------------------------
// configuration files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub law: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

/// On-disk model description (JSON or TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub gamma: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub jump_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<JumpConfig>,
}

impl ModelConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    /// Reads a `.json` or `.toml` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => Self::from_json(&text).or_else(|_| Self::from_toml(&text)),
        }
    }

    pub fn build(&self) -> Result<LevyModel> {
        let jump = self.jump.as_ref();
        match self.kind {
            ModelKind::BrownianDrift => {
                if jump.is_some() || self.jump_rate != 0.0 {
                    return Err(Error::InvalidModel(
                        "BrownianDrift takes no jump section".into(),
                    ));
                }
                LevyModel::brownian(self.gamma, self.sigma)
            }
            ModelKind::CramerLundbergExp => {
                let j = jump.ok_or_else(|| Error::InvalidModel("missing jump section".into()))?;
                if j.law != "exponential" || j.grid.is_some() || j.values.is_some() {
                    return Err(Error::InvalidModel(
                        "CramerLundbergExp expects jump.law = \"exponential\" with a rate".into(),
                    ));
                }
                let rate = j
                    .rate
                    .ok_or_else(|| Error::InvalidModel("missing jump.rate".into()))?;
                if let Some(m) = j.mean {
                    if (m - 1.0 / rate).abs() > 1e-4 * m.abs().max(1.0) {
                        return Err(Error::InvalidModel(
                            "jump.mean disagrees with 1/rate".into(),
                        ));
                    }
                }
                LevyModel::cramer_lundberg_exp(self.gamma, self.sigma, self.jump_rate, rate)
            }
            ModelKind::CramerLundbergGeneral => {
                let j = jump.ok_or_else(|| Error::InvalidModel("missing jump section".into()))?;
                if j.law != "tabulated" || j.rate.is_some() {
                    return Err(Error::InvalidModel(
                        "CramerLundbergGeneral expects jump.law = \"tabulated\"".into(),
                    ));
                }
                let (Some(grid), Some(values), Some(mean)) =
                    (j.grid.clone(), j.values.clone(), j.mean)
                else {
                    return Err(Error::InvalidModel(
                        "tabulated jumps need grid, values and mean".into(),
                    ));
                };
                let d = TabulatedDensity::new(grid, values, mean)?;
                LevyModel::cramer_lundberg_general(self.gamma, self.sigma, self.jump_rate, d)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg_exp(1.5, 0.0, 1.0, 1.0).unwrap()
    }

    fn triangle() -> TabulatedDensity {
        // triangular density on [0, 2] peaking at 1, mean 1
        TabulatedDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn psi_examples() {
        let bm = LevyModel::brownian(1.0, 1.0).unwrap();
        assert_eq!(bm.psi(0.0), 0.0);
        assert!((bm.psi(1.0) - 1.5).abs() < 1e-15);
        assert!((cl().psi(2.0) - (3.0 - 2.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn psi_matches_levy_measure_integral() {
        // ψ(θ) = cθ - λ ∫ (1 - e^{-θx}) α e^{-αx} dx
        let m = cl();
        let cfg = QuadratureConfig::default();
        let theta = 2.0;
        let integral = crate::numerics::integrate(
            |x| (1.0 - (-theta * x).exp()) * (-x).exp(),
            0.0,
            f64::INFINITY,
            &cfg,
        )
        .unwrap()
        .value;
        assert!((m.psi(theta) - (1.5 * theta - integral)).abs() < 1e-10);
    }

    #[test]
    fn phi_q_examples() {
        let m = LevyModel::brownian(0.0, 2f64.sqrt()).unwrap();
        assert!((m.phi_q(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(
            LevyModel::brownian(1.0, 1.0).unwrap().phi_q(0.0).unwrap(),
            0.0
        );
        let m = cl();
        let oracle =
            crate::numerics::roots::bisect(|t| 1.5 * t - t / (1.0 + t) - 0.1, 1e-9, 10.0, 1e-15)
                .unwrap();
        assert!((m.phi_q(0.1).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn phi_q_negative_drift_positive_root() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!((m.phi_q(0.0).unwrap() - 2.0).abs() < 1e-13);
        let m = LevyModel::cramer_lundberg_exp(0.8, 0.0, 1.0, 1.0).unwrap();
        let p = m.phi_q(0.0).unwrap();
        assert!(p > 0.0 && m.psi(p).abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(
            LevyModel::brownian(1.0, 1.0).unwrap().mean_x1().unwrap(),
            1.0
        );
        let m = cl();
        assert!((m.mean_x1().unwrap() - 0.5).abs() < 1e-15);
        let h = 1e-5;
        let numeric = crate::numerics::differentiate_with_step(
            |t| m.psi(t),
            0.0,
            crate::numerics::DiffScheme::Central5pt,
            h,
        );
        assert!((numeric - 0.5).abs() < 1e-8);
        assert_eq!(
            LevyModel::cramer_lundberg_exp(1.0, 0.0, 1.0, 1.0)
                .unwrap()
                .mean_x1()
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_degenerate_models() {
        assert!(LevyModel::brownian(1.0, 0.0).is_err());
        assert!(LevyModel::cramer_lundberg_exp(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg_exp(-1.0, 0.0, 1.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg_exp(1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn marginal_atoms() {
        let m = LevyModel::cramer_lundberg_exp(1.0, 0.0, 2.0, 1.0).unwrap();
        let law = m.marginal_law(1.0).unwrap();
        assert_eq!(law.atom_location, Some(1.0));
        assert!((law.atom_mass - (-2.0f64).exp()).abs() < 1e-16);
        let bm = LevyModel::brownian(0.0, 1.0)
            .unwrap()
            .marginal_law(1.0)
            .unwrap();
        assert_eq!(bm.atom_mass, 0.0);
        assert!((bm.density(0.3) - normal_pdf(0.3)).abs() < 1e-16);
    }

    #[test]
    fn compound_exp_density_matches_series_definition() {
        // direct n-fold sum of Erlang densities
        let cp = CompoundExp {
            lambda_r: 0.5,
            alpha: 1.0,
        };
        let s = 1.2f64;
        let mut direct = 0.0;
        let mut pois = (-0.5f64).exp();
        let mut erl_fact = 1.0;
        for n in 1..40 {
            pois *= 0.5 / n as f64;
            if n > 1 {
                erl_fact *= (n - 1) as f64;
            }
            direct += pois * s.powi(n - 1) * (-s).exp() / erl_fact;
        }
        assert!((cp.density(s) - direct).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_mean_all_families() {
        let cfg = QuadratureConfig::new(1e-13, 1e-11);
        let models = vec![
            LevyModel::brownian(1.0, 1.0).unwrap(),
            cl(),
            LevyModel::cramer_lundberg_exp(1.5, 0.5, 1.0, 1.0).unwrap(),
            LevyModel::cramer_lundberg_general(1.5, 0.0, 1.0, triangle()).unwrap(),
        ];
        for m in &models {
            for r in [0.3, 1.0, 2.5] {
                let law = m.marginal_law(r).unwrap();
                let mass = law.total_mass(&cfg).unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "{:?} r={r} mass={mass}", m.kind);
                let mean = law
                    .expectation(Ok, f64::NEG_INFINITY, &[], 0.0, &cfg)
                    .unwrap();
                let target = r * m.mean_x1().unwrap();
                assert!(
                    (mean - target).abs() < 1e-5 * target.abs().max(1.0),
                    "{:?} r={r} {mean} vs {target}",
                    m.kind
                );
            }
        }
    }

    #[test]
    fn tabulated_density_laplace_and_quantile() {
        let d = triangle();
        let th = Complex64::new(0.7, 0.0);
        let cfg = QuadratureConfig::default();
        let num = crate::numerics::integrate_points(
            |x| (-0.7 * x).exp() * d.density(x),
            0.0,
            2.0,
            &[1.0],
            &cfg,
        )
        .unwrap()
        .value;
        assert!((d.laplace(th).0.re - num).abs() < 1e-14);
        let num1 = crate::numerics::integrate_points(
            |x| x * (-0.7 * x).exp() * d.density(x),
            0.0,
            2.0,
            &[1.0],
            &cfg,
        )
        .unwrap()
        .value;
        assert!((d.laplace(th).1.re - num1).abs() < 1e-14);
        // small-argument series branch agrees with the closed branch
        let a = d.laplace(Complex64::new(0.24, 0.0)).0.re;
        let b = crate::numerics::integrate_points(
            |x| (-0.24 * x).exp() * d.density(x),
            0.0,
            2.0,
            &[1.0],
            &cfg,
        )
        .unwrap()
        .value;
        assert!((a - b).abs() < 1e-14);
        assert!((d.quantile(0.5) - 1.0).abs() < 1e-12);
        assert!((d.quantile(0.125) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_mean_is_validated() {
        assert!(TabulatedDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 1.01).is_err());
    }

    #[test]
    fn adjustment_coefficient_roots() {
        let bm = LevyModel::brownian(1.0, 1.0).unwrap();
        assert!((bm.adjustment_coefficient().unwrap() - 2.0).abs() < 1e-10);
        // CL-Exp: R = α - λ/c
        assert!((cl().adjustment_coefficient().unwrap() - (1.0 - 1.0 / 1.5)).abs() < 1e-10);
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let json = r#"{"kind":"CramerLundbergExp","gamma":1.5,"jump_rate":1.0,"jump":{"law":"exponential","rate":1.0}}"#;
        let m = ModelConfig::from_json(json).unwrap().build().unwrap();
        assert_eq!(m, cl());
        let bad = r#"{"kind":"BrownianDrift","gamma":1.0,"sigma":1.0,"xi":0}"#;
        assert!(ModelConfig::from_json(bad).is_err());
        let toml = "kind = \"CramerLundbergGeneral\"\ngamma = 1.5\njump_rate = 1.0\n[jump]\nlaw = \"tabulated\"\ngrid = [0.0, 1.0, 2.0]\nvalues = [0.0, 1.0, 0.0]\nmean = 1.0\n";
        let m = ModelConfig::from_toml(toml).unwrap().build().unwrap();
        assert_eq!(m.kind, ModelKind::CramerLundbergGeneral);
    }
}
