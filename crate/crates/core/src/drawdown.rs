//! Draw-down Parisian fluctuation identities: exit, two-barrier exit, ruin probability,
//! joint transform at ruin and potential measures.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numerics::quadrature::{try_integrate, QuadratureConfig};
use crate::numerics::{Collocation, InversionConfig};
use crate::parisian_kernel::{default_inversion, ParisianKernel, PhiChiEngine};
use crate::scale_fn::ScaleFunctionSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DrawdownKind {
    /// `ξ(z) = c`
    ConstantLevel(f64),
    /// `ξ(z) = k z - d`, `k < 1`
    Linear { k: f64, d: f64 },
    /// `ξ(z) = (z - b) ∨ 0`
    Barrier(f64),
    /// piecewise linear through knots, flat outside them
    Tabulated,
}

/// A draw-down function `ξ` with `ξ(z) < z` on the working interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawdownSpec {
    kind: DrawdownKind,
    knots: Vec<(f64, f64)>,
}

impl DrawdownSpec {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidArgument(
                "constant level must be finite".into(),
            ));
        }
        Ok(Self {
            kind: DrawdownKind::ConstantLevel(c),
            knots: Vec::new(),
        })
    }

    pub fn linear(k: f64, d: f64) -> Result<Self> {
        if !(k < 1.0) || !k.is_finite() || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "linear draw-down needs k < 1 (got k = {k}, d = {d})"
            )));
        }
        Ok(Self {
            kind: DrawdownKind::Linear { k, d },
            knots: Vec::new(),
        })
    }

    pub fn barrier(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "barrier level must be positive (got {b})"
            )));
        }
        Ok(Self {
            kind: DrawdownKind::Barrier(b),
            knots: Vec::new(),
        })
    }

    /// Knots `(z, ξ(z))` with increasing `z`, nondecreasing `ξ` and `ξ(z) < z`.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("draw-down table is empty".into()));
        }
        for &(z, v) in &knots {
            if !(z.is_finite() && v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "draw-down table has non-finite entries".into(),
                ));
            }
            if v >= z {
                return Err(Error::DomainViolation { z });
            }
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(
                    "draw-down table knots must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument(
                    "draw-down table values must be nondecreasing".into(),
                ));
            }
        }
        Ok(Self {
            kind: DrawdownKind::Tabulated,
            knots,
        })
    }

    /// Read a two-column table `z,xi` (comma or whitespace separated, `#` comments and a
    /// non-numeric header line allowed).
    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let mut knots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => knots.push((v[0], v[1])),
                None if knots.is_empty() && i == 0 => continue,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: bad line {}",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        Self::tabulated(knots)
    }

    pub fn kind(&self) -> DrawdownKind {
        self.kind
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn xi(&self, z: f64) -> f64 {
        match self.kind {
            DrawdownKind::ConstantLevel(c) => c,
            DrawdownKind::Linear { k, d } => k * z - d,
            DrawdownKind::Barrier(b) => (z - b).max(0.0),
            DrawdownKind::Tabulated => {
                let t = &self.knots;
                if z <= t[0].0 {
                    return t[0].1;
                }
                if z >= t[t.len() - 1].0 {
                    return t[t.len() - 1].1;
                }
                let i = t.partition_point(|p| p.0 <= z);
                let (z0, v0) = t[i - 1];
                let (z1, v1) = t[i];
                v0 + (v1 - v0) * (z - z0) / (z1 - z0)
            }
        }
    }

    /// `ξ̄(z) = z - ξ(z)`.
    pub fn xi_bar(&self, z: f64) -> f64 {
        match self.kind {
            DrawdownKind::Barrier(b) => z.min(b),
            _ => z - self.xi(z),
        }
    }

    /// Points where `ξ` has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            DrawdownKind::Barrier(b) => vec![b],
            DrawdownKind::Tabulated => self.knots.iter().map(|p| p.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Points where `ξ̄` changes sign, i.e. the edges of the domain `{ξ̄ > 0}`.
    pub fn domain_edges(&self) -> Vec<f64> {
        match self.kind {
            DrawdownKind::ConstantLevel(c) => vec![c],
            DrawdownKind::Linear { k, d } => vec![-d / (1.0 - k)],
            DrawdownKind::Barrier(_) => vec![0.0],
            DrawdownKind::Tabulated => self.knots.first().map(|p| p.1).into_iter().collect(),
        }
    }

    /// Kinks of `ξ` together with the domain edges.
    pub(crate) fn curve_breaks(&self) -> Vec<f64> {
        let mut b = self.breakpoints();
        b.extend(self.domain_edges());
        b
    }

    fn points_in(&self, x: f64, a: f64) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|b| *b > x && *b < a)
            .collect();
        p.sort_by(f64::total_cmp);
        p
    }

    /// Check `ξ̄ > 0` on `[x, a]`. `ξ̄` is piecewise linear, so endpoints and kinks suffice.
    pub fn check_domain(&self, x: f64, a: f64) -> Result<()> {
        for z in std::iter::once(x)
            .chain(self.points_in(x, a))
            .chain(std::iter::once(a))
        {
            if !(self.xi_bar(z) > 0.0) {
                return Err(Error::DomainViolation { z });
            }
        }
        Ok(())
    }

    /// Check `η < ξ` on `[x, a]`.
    pub fn check_below(&self, eta: &DrawdownSpec, x: f64, a: f64) -> Result<()> {
        let mut pts = vec![x, a];
        pts.extend(self.points_in(x, a));
        pts.extend(eta.points_in(x, a));
        for z in pts {
            if !(eta.xi(z) < self.xi(z)) {
                return Err(Error::OrderingViolation { z });
            }
        }
        Ok(())
    }
}

/// Width of the lattice cells of a [`SurvivalCurve`].
pub const SURVIVAL_CELL: f64 = 1.0;
/// Collocation nodes per leaf.
pub const SURVIVAL_NODES: usize = 10;
/// Default distance cap for semi-infinite survival integrals.
pub const TAIL_CAP: f64 = 200.0;

type Rate = dyn Fn(f64) -> Result<f64> + Send + Sync;

#[derive(Debug, Clone)]
struct Leaf {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

impl Leaf {
    /// `∫_lo^t` of the interpolant.
    fn partial(&self, t: f64) -> f64 {
        let col = Collocation::cached(SURVIVAL_NODES);
        let h = self.hi - self.lo;
        let tau = ((t - self.lo) / h).clamp(0.0, 1.0);
        if tau == 1.0 {
            return h * col
                .weights
                .iter()
                .zip(&self.values)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        }
        h * col
            .partial_weights(tau)
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum::<f64>()
    }

    fn value_at(&self, t: f64) -> f64 {
        Collocation::cached(SURVIVAL_NODES)
            .interpolate(&self.values, (t - self.lo) / (self.hi - self.lo))
    }
}

/// `I(x, w) = ∫_x^w g(z) dz` for a rate `g`, with `exp(-I)` the survival factor.
///
/// The integral is assembled on a fixed lattice of cells (cut at the kinks of `ξ`), each
/// refined adaptively and memoised. Every query uses the same interpolants, so
/// `I(x, m) + I(m, a) = I(x, a)` holds to rounding.
pub struct SurvivalCurve {
    rate: Box<Rate>,
    breaks: Vec<f64>,
    tol: f64,
    pieces: Mutex<HashMap<(u64, u64), Arc<Vec<Leaf>>>>,
}

impl std::fmt::Debug for SurvivalCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurvivalCurve")
            .field("breaks", &self.breaks)
            .field("tol", &self.tol)
            .finish()
    }
}

impl SurvivalCurve {
    pub fn new<G>(rate: G, mut breaks: Vec<f64>) -> Self
    where
        G: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Self {
            rate: Box::new(rate),
            breaks,
            tol: 1e-12,
            pieces: Mutex::new(HashMap::new()),
        }
    }

    /// Refinement tolerance for the leaves (default 1e-12).
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn rate(&self, z: f64) -> Result<f64> {
        (self.rate)(z)
    }

    /// Lattice pieces meeting `[x, a]`.
    fn pieces_between(&self, x: f64, a: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut k = (x / SURVIVAL_CELL).floor();
        loop {
            let lo = k * SURVIVAL_CELL;
            if lo >= a {
                break;
            }
            let hi = lo + SURVIVAL_CELL;
            let mut cuts = vec![lo];
            cuts.extend(self.breaks.iter().copied().filter(|b| *b > lo && *b < hi));
            cuts.push(hi);
            for w in cuts.windows(2) {
                if w[1] > x && w[0] < a {
                    out.push((w[0], w[1]));
                }
            }
            k += 1.0;
        }
        out
    }

    fn leaf(&self, lo: f64, hi: f64) -> Result<Leaf> {
        let col = Collocation::cached(SURVIVAL_NODES);
        let values = col
            .nodes
            .iter()
            .map(|t| (self.rate)(lo + t * (hi - lo)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Leaf { lo, hi, values })
    }

    fn refine(&self, whole: Leaf, depth: usize, out: &mut Vec<Leaf>) -> Result<()> {
        let col = Collocation::cached(SURVIVAL_NODES);
        let h = whole.hi - whole.lo;
        if h * col.legendre_tail(&whole.values) <= self.tol * (1.0 + whole.partial(whole.hi).abs())
        {
            out.push(whole);
            return Ok(());
        }
        let mid = 0.5 * (whole.lo + whole.hi);
        let left = self.leaf(whole.lo, mid)?;
        let right = self.leaf(mid, whole.hi)?;
        let q0 = whole.partial(whole.hi);
        let q1 = left.partial(mid) + right.partial(whole.hi);
        if (q0 - q1).abs() <= self.tol * (1.0 + q1.abs()) || depth >= 14 {
            out.push(left);
            out.push(right);
            return Ok(());
        }
        self.refine(left, depth + 1, out)?;
        self.refine(right, depth + 1, out)
    }

    fn leaves(&self, lo: f64, hi: f64) -> Result<Arc<Vec<Leaf>>> {
        let key = (lo.to_bits(), hi.to_bits());
        if let Some(v) = self.pieces.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let mut out = Vec::new();
        self.refine(self.leaf(lo, hi)?, 0, &mut out)?;
        let v = Arc::new(out);
        self.pieces.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// `∫_x^a g`.
    pub fn integral(&self, x: f64, a: f64) -> Result<f64> {
        if a < x {
            return Ok(-self.integral(a, x)?);
        }
        let mut total = 0.0;
        for (lo, hi) in self.pieces_between(x, a) {
            for leaf in self.leaves(lo, hi)?.iter() {
                if leaf.hi <= x || leaf.lo >= a {
                    continue;
                }
                total += leaf.partial(a.min(leaf.hi)) - leaf.partial(x.max(leaf.lo));
            }
        }
        Ok(total)
    }

    /// `exp(-∫_x^a g)`.
    pub fn survival(&self, x: f64, a: f64) -> Result<f64> {
        Ok((-self.integral(x, a)?).exp())
    }

    /// `∫_x^∞ g`, marched one cell at a time until the tail of `exp(-I)` is below `tol`.
    ///
    /// The tail beyond the current point is estimated from the decay of `g` over the last
    /// cell. Returns `NonConvergentTail` with the partial integral if `cap` is reached first.
    pub fn integral_to_infinity(&self, x: f64, cap: f64, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        let mut lo = x;
        let mut prev_end = self.rate(x)?;
        while lo < x + cap {
            let hi = ((lo / SURVIVAL_CELL).floor() + 1.0) * SURVIVAL_CELL;
            total += self.integral(lo, hi)?;
            let end = self.end_value(hi)?;
            let surv = (-total).exp();
            let tail = if end <= 0.0 {
                0.0
            } else if end < prev_end {
                end * (hi - lo) / (prev_end / end).ln()
            } else {
                f64::INFINITY
            };
            if surv == 0.0 || surv * tail.min(1e300) <= tol {
                return Ok(total + if tail.is_finite() { tail } else { 0.0 });
            }
            prev_end = end;
            lo = hi;
        }
        let end = self.end_value(lo)?;
        Err(Error::NonConvergentTail {
            value: total,
            tail: end * SURVIVAL_CELL,
        })
    }

    /// `g` at the right end of the lattice cell ending at `z`, read off the interpolant.
    fn end_value(&self, z: f64) -> Result<f64> {
        let pieces = self.pieces_between(z - 0.5 * SURVIVAL_CELL, z);
        let &(lo, hi) = pieces.last().expect("nonempty lattice");
        let leaves = self.leaves(lo, hi)?;
        Ok(leaves.last().map(|l| l.value_at(l.hi)).unwrap_or(0.0))
    }
}

fn check_interval(x: f64, a: f64) -> Result<()> {
    if !(x.is_finite() && a.is_finite()) {
        return Err(Error::InvalidArgument("x and a must be finite".into()));
    }
    if a < x {
        return Err(Error::InvalidArgument(format!(
            "need x <= a (got x = {x}, a = {a})"
        )));
    }
    Ok(())
}

/// Draw-down Parisian quantities for one model, discount rate `q`, delay `r` and function `ξ`.
#[derive(Debug)]
pub struct DrawdownParisian {
    kernel: Arc<ParisianKernel>,
    xi: DrawdownSpec,
    survival: SurvivalCurve,
}

impl DrawdownParisian {
    pub fn new(model: &LevyModel, q: f64, r: f64, xi: DrawdownSpec) -> Result<Self> {
        Self::with_kernel(Arc::new(ParisianKernel::new(model, q, r)?), xi)
    }

    pub fn with_kernel(kernel: Arc<ParisianKernel>, xi: DrawdownSpec) -> Result<Self> {
        let k = kernel.clone();
        let spec = xi.clone();
        let survival = SurvivalCurve::new(
            // a value of the excursion measure, so any negative reading is rounding
            move |z| Ok(k.log_derivative(spec.xi_bar(z))?.max(0.0)),
            xi.curve_breaks(),
        )
        .with_tol(1e-12f64.max(kernel.scale().precision()));
        Ok(Self {
            kernel,
            xi,
            survival,
        })
    }

    pub fn kernel(&self) -> &Arc<ParisianKernel> {
        &self.kernel
    }

    pub fn xi(&self) -> &DrawdownSpec {
        &self.xi
    }

    pub fn survival_curve(&self) -> &SurvivalCurve {
        &self.survival
    }

    /// `E_x(e^{-q τ_a^+}; τ_a^+ < κ_r^ξ)`.
    pub fn exit(&self, x: f64, a: f64) -> Result<f64> {
        check_interval(x, a)?;
        self.xi.check_domain(x, a)?;
        self.survival.survival(x, a)
    }

    /// `1 - exp(-∫_x^∞ ℓ'/ℓ(ξ̄))`; the kernel must be built with `q = 0`.
    pub fn ruin_probability(&self, x: f64) -> Result<f64> {
        if self.kernel.q() != 0.0 {
            return Err(Error::InvalidArgument(
                "ruin probability needs a q = 0 kernel".into(),
            ));
        }
        self.xi.check_domain(x, x + TAIL_CAP)?;
        match self.survival.integral_to_infinity(x, TAIL_CAP, 1e-11) {
            Ok(i) => Ok(-(-i).exp_m1()),
            Err(Error::NonConvergentTail { value, tail }) => {
                let s = (-value).exp();
                Err(Error::NonConvergentTail {
                    value: 1.0 - s,
                    tail: s * tail,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn outer<F>(&self, x: f64, a: f64, mut integrand: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        check_interval(x, a)?;
        self.xi.check_domain(x, a)?;
        if a == x {
            return Ok(0.0);
        }
        let pts = self.xi.points_in(x, a);
        let cfg = self
            .kernel
            .scale()
            .floored(QuadratureConfig::new(1e-12, 1e-10));
        try_integrate(
            |w| Ok(self.survival.survival(x, w)? * integrand(w)?),
            x,
            a,
            &pts,
            &cfg,
        )?
        .checked()
    }

    /// `E_x(e^{-q(κ-r)} e^{λX(κ) - ψ(λ)r} φ(X̄(κ)); κ < τ_a^+)` with `κ = κ_r^ξ`.
    pub fn joint_laplace<P>(&self, x: f64, a: f64, lambda: f64, varphi: P) -> Result<f64>
    where
        P: Fn(f64) -> f64,
    {
        self.outer(x, a, |w| {
            let v = varphi(w);
            if v == 0.0 {
                return Ok(0.0);
            }
            Ok((lambda * self.xi.xi(w)).exp()
                * v
                * self.kernel.n_joint_laplace(self.xi.xi_bar(w), lambda)?)
        })
    }

    /// `∫_0^∞ e^{-q(t-r)} E_x(f(X(t), X̄(t)); t < κ_r^ξ ∧ τ_a^+) dt`.
    ///
    /// `df` is the derivative of `f` in its first argument.
    pub fn potential<F, D>(&self, x: f64, a: f64, f: F, df: D) -> Result<f64>
    where
        F: Fn(f64, f64) -> f64,
        D: Fn(f64, f64) -> f64,
    {
        self.outer(x, a, |w| {
            let shift = self.xi.xi(w);
            self.kernel.n_potential_bracket(
                self.xi.xi_bar(w),
                |y| f(y + shift, w),
                |y| df(y + shift, w),
            )
        })
    }

    /// The potential for `f` depending on the position only.
    ///
    /// Assembled term by term in the original coordinates rather than through the shifted
    /// excursion bracket used by [`DrawdownParisian::potential`].
    pub fn potential_univariate<F, D>(&self, x: f64, a: f64, f: F, df: D) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let k = &*self.kernel;
        let s = k.scale();
        let (q, r) = (k.q(), k.r());
        let inner = s.floored(QuadratureConfig::new(1e-13, 1e-9));
        let zcfg = s.floored(QuadratureConfig::new(1e-11, 1e-7));
        let mean = |law: &crate::levy_model::MarginalLaw, at: f64, h: &dyn Fn(f64) -> f64| {
            law.signed_expectation(|z| h(at + z), &inner)
        };
        self.outer(x, a, |w| {
            let (lo, top) = (self.xi.xi(w), self.xi.xi_bar(w));
            let grow = k.horizon_integral(|t, kt, _| {
                Ok((q * (r - t)).exp() * mean(kt.marginal(), w, &f)?)
            })?;
            let grow_d = k.horizon_integral(|t, kt, _| {
                Ok((q * (r - t)).exp() * mean(kt.marginal(), w, &df)?)
            })?;
            let from_floor =
                k.horizon_integral(|_, kt, km| Ok(mean(km.marginal(), lo, &f)? * kt.ell(top)?))?;
            let from_floor_d = k.horizon_integral(|_, kt, km| {
                Ok(mean(km.marginal(), lo, &f)? * kt.ell_prime(top)?)
            })?;
            let law = k.marginal();
            let band = try_integrate(|u| Ok(s.w(w - u)? * mean(law, u, &f)?), lo, w, &[], &zcfg)?
                .checked()?;
            let band_d = try_integrate(
                |u| Ok(s.w_prime(w - u)? * mean(law, u, &f)?),
                lo,
                w,
                &[],
                &zcfg,
            )?
            .checked()?;
            let at_top = mean(law, w, &f)?;
            let ratio = k.log_derivative(top)?;
            Ok(ratio * (grow - band - from_floor) - grow_d
                + band_d
                + s.w_zero() * at_top
                + from_floor_d)
        })
    }
}

/// Points where the piecewise linear gap `ξ - η` equals `level`.
fn gap_crossings(xi: &DrawdownSpec, eta: &DrawdownSpec, level: f64) -> Vec<f64> {
    let mut pts = xi.breakpoints();
    pts.extend(eta.breakpoints());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(0.0);
    }
    let gap = |z: f64| xi.xi(z) - eta.xi(z) - level;
    let root = |u: f64, v: f64| {
        let (gu, gv) = (gap(u), gap(v));
        if gu == gv {
            None
        } else {
            Some(u - gu * (v - u) / (gv - gu))
        }
    };
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let mut out = Vec::new();
    out.extend(root(first - 1.0, first).filter(|z| *z < first));
    out.extend(root(last, last + 1.0).filter(|z| *z > last));
    for w in pts.windows(2) {
        out.extend(root(w[0], w[1]).filter(|z| *z > w[0] && *z < w[1]));
    }
    out
}

/// Classical draw-down exit `E_x(e^{-q τ_a^+}; τ_a^+ < τ_ξ)`.
pub fn dd_exit_classical(
    model: &LevyModel,
    q: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
) -> Result<f64> {
    check_interval(x, a)?;
    xi.check_domain(x, a)?;
    let scale = Arc::new(ScaleFunctionSet::new(model, q)?);
    let tol = 1e-12f64.max(scale.precision());
    let spec = xi.clone();
    let curve = SurvivalCurve::new(
        move |z| {
            let u = spec.xi_bar(z);
            Ok(scale.w_tilted_prime(u)? / scale.w_tilted(u)?)
        },
        xi.curve_breaks(),
    )
    .with_tol(tol);
    curve.survival(x, a)
}

pub fn dd_parisian_exit(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
) -> Result<f64> {
    DrawdownParisian::new(model, q, r, xi.clone())?.exit(x, a)
}

/// `E_x(e^{-q τ_a^+}; τ_a^+ < κ_r^ξ ∧ τ_η)` for `η < ξ`.
pub fn dd_parisian_exit_two_barriers(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    eta: &DrawdownSpec,
    x: f64,
    a: f64,
) -> Result<f64> {
    dd_parisian_exit_two_barriers_with(model, q, r, xi, eta, x, a, &default_inversion(model))
}

/// [`dd_parisian_exit_two_barriers`] with an explicit inversion rule for the `φ`, `χ` transforms.
#[allow(clippy::too_many_arguments)]
pub fn dd_parisian_exit_two_barriers_with(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    eta: &DrawdownSpec,
    x: f64,
    a: f64,
    inversion: &InversionConfig,
) -> Result<f64> {
    check_interval(x, a)?;
    xi.check_domain(x, a)?;
    xi.check_below(eta, x, a)?;
    let scale = Arc::new(ScaleFunctionSet::new(model, q)?);
    // the rate is only as good as the inversion behind it
    let tol = 1e-12f64
        .max(scale.precision())
        .max(10f64.powi(-(inversion.precision_hint as i32)));
    let engine = PhiChiEngine::new(scale, r, inversion)?;
    let (s_xi, s_eta) = (xi.clone(), eta.clone());
    let mut breaks = xi.curve_breaks();
    breaks.extend(eta.breakpoints());
    breaks.extend(gap_crossings(xi, eta, 0.0));
    if model.bounded_variation() {
        // the rate has a kink where the gap reaches c r and the lower barrier drops out of reach
        breaks.extend(gap_crossings(xi, eta, model.gamma * r));
    }
    let curve = SurvivalCurve::new(
        move |w| {
            Ok(engine
                .ratio(s_xi.xi_bar(w), s_xi.xi(w) - s_eta.xi(w))?
                .max(0.0))
        },
        breaks,
    )
    .with_tol(tol);
    curve.survival(x, a)
}

/// Draw-down Parisian ruin probability `P_x(κ_r^ξ < ∞)`.
pub fn dd_parisian_ruin_prob(model: &LevyModel, r: f64, xi: &DrawdownSpec, x: f64) -> Result<f64> {
    DrawdownParisian::new(model, 0.0, r, xi.clone())?.ruin_probability(x)
}

#[allow(clippy::too_many_arguments)]
pub fn dd_parisian_joint_laplace<P: Fn(f64) -> f64>(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
    lambda: f64,
    varphi: P,
) -> Result<f64> {
    DrawdownParisian::new(model, q, r, xi.clone())?.joint_laplace(x, a, lambda, varphi)
}

#[allow(clippy::too_many_arguments)]
pub fn dd_parisian_potential<F, D>(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
    f: F,
    df: D,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    D: Fn(f64, f64) -> f64,
{
    DrawdownParisian::new(model, q, r, xi.clone())?.potential(x, a, f, df)
}

#[allow(clippy::too_many_arguments)]
pub fn dd_parisian_potential_univariate<F, D>(
    model: &LevyModel,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
    f: F,
    df: D,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    DrawdownParisian::new(model, q, r, xi.clone())?.potential_univariate(x, a, f, df)
}
