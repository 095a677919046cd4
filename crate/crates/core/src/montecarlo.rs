//! Path-simulation oracle.
//!
//! Cramér-Lundberg paths without a Gaussian part are simulated exactly: they are piecewise
//! linear between exponential jump times, so every crossing time and every Parisian clock is
//! computed in closed form. Whenever `sigma > 0` the path is stepped on a grid (exact Gaussian
//! increments) with a Brownian-bridge maximum inserted between grid points; the Parisian clock
//! then carries a first-order grid bias, removed by [`refine`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::drawdown::{DrawdownKind, DrawdownSpec};
use crate::error::{Error, Result};
use crate::levy_model::{JumpLaw, LevyModel};

/// Step multiplier reference: far from every killing level the step grows to
/// `grid_dt * min(MAX_STRETCH, (d / (SAFETY sigma))^2 / STEP_REF)`.
const STEP_REF: f64 = 1e-3;
const SAFETY: f64 = 3.0;
const MAX_STRETCH: f64 = 100.0;
/// Longest linear piece integrated with one 3-point Gauss rule for the occupation integral.
const OCC_PIECE: f64 = 0.05;
/// Censoring above this fraction makes a probability estimate unusable.
const CENSOR_LIMIT: f64 = 0.01;
/// Target for the automatic survival level of ruin-probability runs.
const SURVIVAL_TAIL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    pub grid_dt: f64,
    pub horizon_cap: f64,
    pub antithetic: bool,
    /// Sample the maximum of the Brownian bridge between grid points.
    pub bridge: bool,
    /// Paths whose supremum reaches this level stop and count as surviving (ruin runs only).
    pub survival_level: Option<f64>,
    /// Worker threads; 0 uses the available parallelism. Results do not depend on it.
    pub threads: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 20_240_601,
            grid_dt: 1e-3,
            horizon_cap: 200.0,
            antithetic: false,
            bridge: true,
            survival_level: None,
            threads: 0,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("paths must be positive".into()));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid_dt must be positive, got {}",
                self.grid_dt
            )));
        }
        if !(self.horizon_cap > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon_cap must be positive, got {}",
                self.horizon_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub paths_used: usize,
    pub censored_fraction: f64,
    pub bias_note: String,
}

impl SimEstimate {
    /// `(value - estimate) / std_error`.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error > 0.0 {
            (value - self.estimate) / self.std_error
        } else if value == self.estimate {
            0.0
        } else {
            f64::INFINITY * (value - self.estimate).signum()
        }
    }
}

/// What ends a path.
#[derive(Debug, Clone)]
pub struct StopSpec {
    pub xi: DrawdownSpec,
    /// Parisian delay; 0 gives the classical draw-down time.
    pub r: f64,
    pub eta: Option<DrawdownSpec>,
    pub a: Option<f64>,
}

impl StopSpec {
    pub fn new(xi: DrawdownSpec, r: f64) -> Self {
        Self {
            xi,
            r,
            eta: None,
            a: None,
        }
    }

    pub fn with_upper(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_second_barrier(mut self, eta: DrawdownSpec) -> Self {
        self.eta = Some(eta);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    UpCrossing,
    Ruin,
    SecondBarrier,
    SurvivalLevel,
    HorizonCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub end: PathEnd,
    pub time: f64,
    pub x: f64,
    pub x_bar: f64,
    /// `∫ e^{-qt} dD(t)` with `D = (X̄ - b) ∨ 0`, when a dividend barrier was given.
    pub dividends: f64,
    /// `∫ e^{-q(t-r)} f(X(t), X̄(t)) dt`, when an occupation integrand was given.
    pub occupation: f64,
    /// `(t, X, X̄)` at grid and jump times, when requested.
    pub skeleton: Vec<(f64, f64, f64)>,
}

type Integrand<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

/// Extra path functionals accumulated alongside the stopping time.
#[derive(Clone, Copy, Default)]
pub struct Functionals<'a> {
    pub q: f64,
    pub dividend_barrier: Option<f64>,
    pub integrand: Option<Integrand<'a>>,
    pub record: bool,
}

/// Per-path random stream; the antithetic partner negates normals and reflects uniforms.
pub struct PathRng {
    rng: ChaCha8Rng,
    flip: bool,
}

impl PathRng {
    pub fn new(seed: u64, stream: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, flip }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.flip {
            -z
        } else {
            z
        }
    }

    /// Uniform on (0, 1].
    fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        if self.flip {
            u.max(f64::MIN_POSITIVE)
        } else {
            1.0 - u
        }
    }

    fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }
}

/// Event detection along a piecewise-linear path with downward jumps.
struct Tracker<'a> {
    stop: &'a StopSpec,
    fx: Functionals<'a>,
    survival_level: Option<f64>,
    t: f64,
    x: f64,
    x_bar: f64,
    below: bool,
    start: f64,
    dividends: f64,
    occupation: f64,
    skeleton: Vec<(f64, f64, f64)>,
}

enum Cand {
    None,
    At(f64, PathEnd),
}

impl Cand {
    fn offer(&mut self, t: f64, end: PathEnd) {
        match self {
            Cand::At(s, _) if *s <= t => {}
            _ => *self = Cand::At(t, end),
        }
    }
}

impl<'a> Tracker<'a> {
    fn new(stop: &'a StopSpec, fx: Functionals<'a>, survival_level: Option<f64>, x: f64) -> Self {
        let mut tr = Self {
            stop,
            fx,
            survival_level,
            t: 0.0,
            x,
            x_bar: x,
            below: false,
            start: 0.0,
            dividends: 0.0,
            occupation: 0.0,
            skeleton: Vec::new(),
        };
        if let Some(b) = fx.dividend_barrier {
            tr.dividends = (x - b).max(0.0);
        }
        tr.push();
        tr
    }

    fn push(&mut self) {
        if self.fx.record {
            self.skeleton.push((self.t, self.x, self.x_bar));
        }
    }

    fn level(&self) -> f64 {
        self.stop.xi.xi(self.x_bar)
    }

    fn eta_level(&self) -> f64 {
        self.stop
            .eta
            .as_ref()
            .map_or(f64::NEG_INFINITY, |e| e.xi(self.x_bar))
    }

    fn classical(&self) -> bool {
        self.stop.r <= 0.0
    }

    /// Checks that apply before the first move.
    fn initial(&self) -> Option<(PathEnd, f64)> {
        if self.x < self.eta_level() {
            return Some((PathEnd::SecondBarrier, 0.0));
        }
        if self.stop.a.is_some_and(|a| self.x >= a) {
            return Some((PathEnd::UpCrossing, 0.0));
        }
        None
    }

    /// Distance to the nearest level whose crossing time matters. Recovery from below is seen
    /// by the bridge maximum, so the rule is the same on both sides of the level.
    fn clearance(&self) -> f64 {
        let mut d = (self.x - self.level()).abs().min(self.x - self.eta_level());
        if let Some(a) = self.stop.a {
            d = d.min(a - self.x);
        }
        d.max(0.0)
    }

    /// Linear move from `(t, x)` to `(t1, x1)`.
    fn segment(&mut self, t1: f64, x1: f64) -> Option<(PathEnd, f64)> {
        let (t0, x0) = (self.t, self.x);
        let dt = t1 - t0;
        if dt <= 0.0 {
            return None;
        }
        let at = |level: f64| t0 + (level - x0) / (x1 - x0) * dt;
        let mut cand = Cand::None;
        let mut recovered: Option<f64> = None;
        let mut new_start: Option<f64> = None;
        if x1 <= x0 {
            let l = self.level();
            let e = self.eta_level();
            if !self.below && x1 < l {
                let tc = at(l);
                if self.classical() {
                    cand.offer(tc, PathEnd::Ruin);
                } else {
                    new_start = Some(tc);
                    let td = tc + self.stop.r;
                    if td <= t1 {
                        cand.offer(td, PathEnd::Ruin);
                    }
                }
            } else if self.below {
                let td = self.start + self.stop.r;
                if td <= t1 {
                    cand.offer(td, PathEnd::Ruin);
                }
            }
            if x0 >= e && x1 < e {
                cand.offer(at(e), PathEnd::SecondBarrier);
            }
        } else {
            if self.below {
                let l = self.level();
                let td = self.start + self.stop.r;
                if x1 >= l {
                    let tr = at(l);
                    if td < tr {
                        cand.offer(td, PathEnd::Ruin);
                    } else {
                        recovered = Some(tr);
                    }
                } else if td <= t1 {
                    cand.offer(td, PathEnd::Ruin);
                }
            }
            if let Some(a) = self.stop.a {
                if x1 >= a && x0 < a {
                    cand.offer(at(a), PathEnd::UpCrossing);
                }
            }
            if let Some(s) = self.survival_level {
                if x1 >= s && x0 < s && self.x_bar < s {
                    cand.offer(at(s), PathEnd::SurvivalLevel);
                }
            }
        }

        let (t_end, end) = match cand {
            Cand::At(t, e) => (t.max(t0), Some(e)),
            Cand::None => (t1, None),
        };
        let x_end = if t_end >= t1 {
            x1
        } else {
            x0 + (x1 - x0) * (t_end - t0) / dt
        };
        self.accumulate(t0, x0, t_end, x_end);
        if recovered.is_some_and(|tr| tr <= t_end) {
            self.below = false;
        }
        if let Some(ts) = new_start {
            if ts <= t_end {
                self.below = true;
                self.start = ts;
            }
        }
        self.t = t_end;
        self.x = x_end;
        self.x_bar = self.x_bar.max(x_end);
        self.push();
        end.map(|e| (e, t_end))
    }

    /// Downward jump at the current time.
    fn jump(&mut self, size: f64) -> Option<(PathEnd, f64)> {
        self.x -= size;
        self.push();
        if self.x < self.eta_level() {
            return Some((PathEnd::SecondBarrier, self.t));
        }
        if !self.below && self.x < self.level() {
            if self.classical() {
                return Some((PathEnd::Ruin, self.t));
            }
            self.below = true;
            self.start = self.t;
        }
        None
    }

    fn accumulate(&mut self, t0: f64, x0: f64, t1: f64, x1: f64) {
        if t1 <= t0 {
            return;
        }
        let q = self.fx.q;
        if let Some(b) = self.fx.dividend_barrier {
            let m0 = self.x_bar.max(b);
            if x1 > m0 {
                let v = (x1 - x0) / (t1 - t0);
                let s0 = t0 + (m0 - x0) / v;
                self.dividends += if q == 0.0 {
                    x1 - m0
                } else {
                    v * ((-q * s0).exp() - (-q * t1).exp()) / q
                };
            }
        }
        if let Some(f) = self.fx.integrand {
            let shift = self.stop.r;
            let xb = self.x_bar;
            let mut cuts = vec![t0, t1];
            if x1 > xb && x0 < xb {
                cuts.insert(1, t0 + (xb - x0) / (x1 - x0) * (t1 - t0));
            }
            let slope = (x1 - x0) / (t1 - t0);
            for w in cuts.windows(2) {
                let pieces = ((w[1] - w[0]) / OCC_PIECE).ceil().max(1.0) as usize;
                let h = (w[1] - w[0]) / pieces as f64;
                for i in 0..pieces {
                    let mid = w[0] + (i as f64 + 0.5) * h;
                    let mut s = 0.0;
                    for (node, weight) in GAUSS3 {
                        let tt = mid + 0.5 * h * node;
                        let xx = x0 + slope * (tt - t0);
                        s += weight * (-q * (tt - shift)).exp() * f(xx, xb.max(xx));
                    }
                    self.occupation += 0.5 * h * s;
                }
            }
        }
    }

    fn finish(self, end: PathEnd, time: f64) -> PathRecord {
        PathRecord {
            end,
            time,
            x: self.x,
            x_bar: self.x_bar,
            dividends: self.dividends,
            occupation: self.occupation,
            skeleton: self.skeleton,
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn jump_size(law: &JumpLaw, rng: &mut PathRng) -> f64 {
    match law {
        JumpLaw::None => 0.0,
        JumpLaw::Exponential { rate } => rng.exponential() / rate,
        JumpLaw::Tabulated(d) => d.quantile(1.0 - rng.uniform()),
    }
}

/// Simulates one path from `x` until the stop rule, the survival level or the horizon cap.
pub fn simulate_path(
    model: &LevyModel,
    cfg: &SimConfig,
    stop: &StopSpec,
    fx: Functionals<'_>,
    x: f64,
    rng: &mut PathRng,
) -> PathRecord {
    let mut tr = Tracker::new(stop, fx, cfg.survival_level, x);
    if let Some((end, t)) = tr.initial() {
        return tr.finish(end, t);
    }
    let horizon = cfg.horizon_cap;
    let lambda = if model.has_jumps() {
        model.jump_rate
    } else {
        0.0
    };
    let mut next_jump = if lambda > 0.0 {
        rng.exponential() / lambda
    } else {
        f64::INFINITY
    };

    if model.sigma == 0.0 {
        loop {
            let t1 = next_jump.min(horizon);
            let x1 = tr.x + model.gamma * (t1 - tr.t);
            if let Some((end, t)) = tr.segment(t1, x1) {
                return tr.finish(end, t);
            }
            if t1 >= horizon {
                return tr.finish(PathEnd::HorizonCap, horizon);
            }
            let j = jump_size(&model.jump_law, rng);
            if let Some((end, t)) = tr.jump(j) {
                return tr.finish(end, t);
            }
            next_jump = tr.t + rng.exponential() / lambda;
        }
    }

    let sigma = model.sigma;
    let s2 = sigma * sigma;
    loop {
        if tr.t >= horizon {
            return tr.finish(PathEnd::HorizonCap, horizon);
        }
        let d = tr.clearance();
        let stretch = ((d / (SAFETY * sigma)).powi(2) / STEP_REF)
            .floor()
            .clamp(1.0, MAX_STRETCH);
        let t0 = tr.t;
        let t1 = (t0 + cfg.grid_dt * stretch).min(horizon).min(next_jump);
        let h = t1 - t0;
        let x0 = tr.x;
        let x1 = x0 + model.gamma * h + sigma * h.sqrt() * rng.normal();

        if cfg.bridge {
            // A dip below a killing level between grid points is a kill in its own right.
            let kill = if tr.classical() {
                Some((tr.level(), PathEnd::Ruin))
            } else if stop.eta.is_some() {
                Some((tr.eta_level(), PathEnd::SecondBarrier))
            } else {
                None
            };
            if let Some((l, end)) = kill {
                if x0 >= l
                    && x1 >= l
                    && rng.uniform() < (-2.0 * (x0 - l) * (x1 - l) / (s2 * h)).exp()
                {
                    let tm = t0 + 0.5 * h;
                    let xm = 0.5 * (x0 + x1);
                    if let Some((e, t)) = tr.segment(tm, xm) {
                        return tr.finish(e, t);
                    }
                    return tr.finish(end, tm);
                }
            }
            let v = rng.uniform();
            let m = 0.5 * (x0 + x1 + ((x1 - x0).powi(2) - 2.0 * s2 * h * v.ln()).sqrt());
            if m > x0.max(x1) {
                let tm = t0 + h * (m - x0) / ((m - x0) + (m - x1));
                if let Some((end, t)) = tr.segment(tm, m) {
                    return tr.finish(end, t);
                }
            }
        }
        if let Some((end, t)) = tr.segment(t1, x1) {
            return tr.finish(end, t);
        }
        if t1 >= next_jump {
            let j = jump_size(&model.jump_law, rng);
            if let Some((end, t)) = tr.jump(j) {
                return tr.finish(end, t);
            }
            next_jump = tr.t + rng.exponential() / lambda;
        }
    }
}

/// Sum in a fixed binary tree so the result does not depend on how work was split.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Runs `sample` once per path (or antithetic pair) and returns per-sample values in path order
/// along with the number of censored paths.
fn run<F>(cfg: &SimConfig, sample: F) -> (Vec<f64>, usize)
where
    F: Fn(&mut PathRng) -> (f64, bool) + Sync,
{
    let n = if cfg.antithetic {
        cfg.paths.div_ceil(2)
    } else {
        cfg.paths
    };
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |p| p.get()),
        t => t,
    }
    .clamp(1, n);
    let one = |i: usize| -> (f64, usize) {
        if cfg.antithetic {
            let (a, ca) = sample(&mut PathRng::new(cfg.seed, i as u64, false));
            let (b, cb) = sample(&mut PathRng::new(cfg.seed, i as u64, true));
            (0.5 * (a + b), ca as usize + cb as usize)
        } else {
            let (a, ca) = sample(&mut PathRng::new(cfg.seed, i as u64, false));
            (a, ca as usize)
        }
    };
    let mut values = vec![0.0; n];
    let mut censored = vec![0usize; n];
    if threads == 1 {
        for i in 0..n {
            (values[i], censored[i]) = one(i);
        }
    } else {
        let chunk = n.div_ceil(threads);
        std::thread::scope(|s| {
            for (k, (vs, cs)) in values
                .chunks_mut(chunk)
                .zip(censored.chunks_mut(chunk))
                .enumerate()
            {
                let one = &one;
                s.spawn(move || {
                    for (j, (v, c)) in vs.iter_mut().zip(cs.iter_mut()).enumerate() {
                        (*v, *c) = one(k * chunk + j);
                    }
                });
            }
        });
    }
    (values, censored.iter().sum())
}

fn summarise(cfg: &SimConfig, values: &[f64], censored: usize, note: String) -> SimEstimate {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 {
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    let paths = if cfg.antithetic {
        2 * values.len()
    } else {
        values.len()
    };
    SimEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        paths_used: paths,
        censored_fraction: censored as f64 / paths as f64,
        bias_note: note,
    }
}

fn grid_note(model: &LevyModel, cfg: &SimConfig) -> String {
    if model.sigma == 0.0 {
        "exact jump-time simulation".to_string()
    } else {
        format!(
            "grid dt={:e} (first-order Parisian clock bias toward survival), bridge maximum {}",
            cfg.grid_dt,
            if cfg.bridge { "on" } else { "off" }
        )
    }
}

fn check_delay(model: &LevyModel, cfg: &SimConfig, r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delay must be nonnegative, got {r}"
        )));
    }
    if model.sigma > 0.0 && r > 0.0 && cfg.grid_dt > r / 50.0 {
        return Err(Error::InvalidArgument(format!(
            "grid_dt {} too coarse for delay {r} (need <= r/50)",
            cfg.grid_dt
        )));
    }
    Ok(())
}

/// Probability-type estimates cannot tolerate censoring; discounted ones are truncated instead.
fn censoring(q: f64, cfg: &SimConfig, est: &mut SimEstimate, bound: f64) -> Result<()> {
    if est.censored_fraction == 0.0 {
        return Ok(());
    }
    if q == 0.0 {
        if est.censored_fraction > CENSOR_LIMIT {
            return Err(Error::ExcessiveCensoring {
                fraction: est.censored_fraction,
            });
        }
        est.bias_note += &format!(
            "; censored at T={} (fraction {:.2e})",
            cfg.horizon_cap, est.censored_fraction
        );
    } else {
        let tail = est.censored_fraction * (-q * cfg.horizon_cap).exp() * bound;
        est.bias_note += &format!(
            "; truncated at T={} (bias bound {tail:.1e})",
            cfg.horizon_cap
        );
    }
    Ok(())
}

/// Average of `e^{-q τ_a^+} 1{τ_a^+ < κ_r^ξ ∧ τ_η}`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_exit(
    model: &LevyModel,
    cfg: &SimConfig,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    eta: Option<&DrawdownSpec>,
    x: f64,
    a: f64,
) -> Result<SimEstimate> {
    cfg.validate()?;
    check_delay(model, cfg, r)?;
    if !(x < a) || q < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need x < a and q >= 0 (x={x}, a={a}, q={q})"
        )));
    }
    let mut stop = StopSpec::new(xi.clone(), r).with_upper(a);
    if let Some(e) = eta {
        stop = stop.with_second_barrier(e.clone());
    }
    let fx = Functionals {
        q,
        ..Default::default()
    };
    let (values, censored) = run(cfg, |rng| {
        let p = simulate_path(model, cfg, &stop, fx, x, rng);
        match p.end {
            PathEnd::UpCrossing => ((-q * p.time).exp(), false),
            PathEnd::HorizonCap => (0.0, true),
            _ => (0.0, false),
        }
    });
    let mut est = summarise(cfg, &values, censored, grid_note(model, cfg));
    censoring(q, cfg, &mut est, 1.0)?;
    Ok(est)
}

/// Level above which ruin has probability below `SURVIVAL_TAIL` by the Lundberg bound.
fn automatic_survival_level(model: &LevyModel, xi: &DrawdownSpec) -> Option<f64> {
    let c = match xi.kind() {
        DrawdownKind::ConstantLevel(c) => c,
        _ => return None,
    };
    let rr = model.adjustment_coefficient()?;
    Some(c - SURVIVAL_TAIL.ln() / rr)
}

/// Frequency of `κ_r^ξ < ∞` (with `r = 0`, of `τ_ξ < ∞`).
pub fn estimate_ruin_probability(
    model: &LevyModel,
    cfg: &SimConfig,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
) -> Result<SimEstimate> {
    cfg.validate()?;
    check_delay(model, cfg, r)?;
    let mut cfg = cfg.clone();
    let mut note = grid_note(model, &cfg);
    if cfg.survival_level.is_none() {
        cfg.survival_level = automatic_survival_level(model, xi);
        if let Some(s) = cfg.survival_level {
            note += &format!("; survival level {s:.3} (Lundberg tail bound {SURVIVAL_TAIL:e})");
        }
    }
    let stop = StopSpec::new(xi.clone(), r);
    let (values, censored) = run(&cfg, |rng| {
        let p = simulate_path(model, &cfg, &stop, Functionals::default(), x, rng);
        match p.end {
            PathEnd::Ruin => (1.0, false),
            PathEnd::HorizonCap => (0.0, true),
            _ => (0.0, false),
        }
    });
    let mut est = summarise(&cfg, &values, censored, note);
    censoring(0.0, &cfg, &mut est, 1.0)?;
    Ok(est)
}

/// k-th sample moment of `∫ e^{-qt} dD(t)` up to `κ_r^{ξ_b}` for the barrier strategy at `b`.
pub fn estimate_dividends(
    model: &LevyModel,
    cfg: &SimConfig,
    q: f64,
    r: f64,
    b: f64,
    k: usize,
    x: f64,
) -> Result<SimEstimate> {
    cfg.validate()?;
    check_delay(model, cfg, r)?;
    if k == 0 {
        return Err(Error::InvalidArgument(
            "moment order must be at least 1".into(),
        ));
    }
    let xi = DrawdownSpec::barrier(b)?;
    let stop = StopSpec::new(xi, r);
    let fx = Functionals {
        q,
        dividend_barrier: Some(b),
        ..Default::default()
    };
    let (values, censored) = run(cfg, |rng| {
        let p = simulate_path(model, cfg, &stop, fx, x, rng);
        (p.dividends.powi(k as i32), p.end == PathEnd::HorizonCap)
    });
    let mut est = summarise(cfg, &values, censored, grid_note(model, cfg));
    let bound = est.estimate.abs().max(1.0);
    censoring(q, cfg, &mut est, bound)?;
    Ok(est)
}

/// Average of `∫ e^{-q(t-r)} f(X(t), X̄(t)) dt` up to `κ_r^ξ ∧ τ_a^+`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_potential(
    model: &LevyModel,
    cfg: &SimConfig,
    q: f64,
    r: f64,
    xi: &DrawdownSpec,
    x: f64,
    a: f64,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<SimEstimate> {
    cfg.validate()?;
    check_delay(model, cfg, r)?;
    if !(x < a) {
        return Err(Error::InvalidArgument(format!("need x < a (x={x}, a={a})")));
    }
    let stop = StopSpec::new(xi.clone(), r).with_upper(a);
    let fx = Functionals {
        q,
        integrand: Some(f),
        ..Default::default()
    };
    let (values, censored) = run(cfg, |rng| {
        let p = simulate_path(model, cfg, &stop, fx, x, rng);
        (p.occupation, p.end == PathEnd::HorizonCap)
    });
    let mut est = summarise(cfg, &values, censored, grid_note(model, cfg));
    let bound = est.estimate.abs().max(1.0);
    censoring(q, cfg, &mut est, bound)?;
    Ok(est)
}

/// Grid-refined estimate `2 E(dt/2) - E(dt)` from independent streams; exact simulations pass
/// through unchanged.
pub fn refine<F>(model: &LevyModel, cfg: &SimConfig, estimate: F) -> Result<SimEstimate>
where
    F: Fn(&SimConfig) -> Result<SimEstimate>,
{
    let coarse = estimate(cfg)?;
    if model.sigma == 0.0 {
        return Ok(coarse);
    }
    let fine_cfg = SimConfig {
        grid_dt: 0.5 * cfg.grid_dt,
        seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        ..cfg.clone()
    };
    let fine = estimate(&fine_cfg)?;
    Ok(SimEstimate {
        estimate: 2.0 * fine.estimate - coarse.estimate,
        std_error: (4.0 * fine.std_error.powi(2) + coarse.std_error.powi(2)).sqrt(),
        paths_used: coarse.paths_used + fine.paths_used,
        censored_fraction: coarse.censored_fraction.max(fine.censored_fraction),
        bias_note: format!(
            "Richardson on dt={:e} and {:e} (raw {:.6} and {:.6}); {}",
            cfg.grid_dt, fine_cfg.grid_dt, coarse.estimate, fine.estimate, fine.bias_note
        ),
    })
}
