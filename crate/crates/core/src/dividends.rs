//! Moments of discounted dividends under a barrier strategy, paid until draw-down Parisian ruin.

use std::sync::Arc;

use crate::drawdown::{DrawdownParisian, DrawdownSpec, TAIL_CAP};
use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numerics::Collocation;
use crate::parisian_kernel::ParisianKernel;
use crate::scale_fn::ScaleFunctionSet;

/// Width of the cells carrying the moment curves.
pub const MOMENT_CELL: f64 = 0.5;
const NODES: usize = 12;

#[derive(Debug, Clone)]
pub struct DividendQuery {
    pub model: LevyModel,
    pub q: f64,
    pub r: f64,
    pub b: f64,
    pub k: usize,
    pub xi: DrawdownSpec,
}

impl DividendQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "barrier b must be positive (got {})",
                self.b
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "moment order k must be at least 1".into(),
            ));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) || !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument("need q >= 0 and r > 0".into()));
        }
        Ok(())
    }
}

/// `V_1, ..., V_k` on `[b, b + Z]` together with the barrier moments `V_j^ξ(x; b)`.
#[derive(Debug)]
pub struct DividendMoments {
    b: f64,
    cells: Vec<(f64, f64)>,
    /// `values[j - 1][cell][node]` is `V_j` at the collocation nodes
    values: Vec<Vec<Vec<f64>>>,
    at_b: Vec<f64>,
    exits: Vec<DrawdownParisian>,
}

impl DividendMoments {
    pub fn order(&self) -> usize {
        self.at_b.len()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// End of the tabulated range; beyond it the tail is treated as exponential.
    pub fn horizon(&self) -> f64 {
        self.cells.last().map(|c| c.1).unwrap_or(self.b)
    }

    /// `V_j(b)`.
    pub fn at_barrier(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.at_b[j - 1]
        }
    }

    /// `V_j(z)` for `b <= z <= horizon`.
    pub fn curve(&self, j: usize, z: f64) -> Result<f64> {
        if j == 0 {
            return Ok(1.0);
        }
        if j > self.order() || z < self.b || z > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "V_{j}({z}) is outside the computed range"
            )));
        }
        if z == self.b {
            return Ok(self.at_barrier(j));
        }
        let c = self
            .cells
            .partition_point(|cell| cell.1 < z)
            .min(self.cells.len() - 1);
        let (lo, hi) = self.cells[c];
        Ok(Collocation::cached(NODES).interpolate(&self.values[j - 1][c], (z - lo) / (hi - lo)))
    }

    /// `V_j^ξ(x; b) = E_x(e^{-jqτ_b^+}; τ_b^+ < κ_r^ξ) V_j(b)` for `x <= b`.
    pub fn moment(&self, j: usize, x: f64) -> Result<f64> {
        if j == 0 || j > self.order() {
            return Err(Error::InvalidArgument(format!(
                "moment order {j} not computed"
            )));
        }
        if x > self.b {
            return Err(Error::InvalidArgument(format!(
                "need x <= b (got x = {x}, b = {})",
                self.b
            )));
        }
        Ok(self.exits[j - 1].exit(x, self.b)? * self.at_b[j - 1])
    }
}

fn moment_cells(b: f64, xi: &DrawdownSpec, end: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = Vec::new();
    let mut z = b;
    while z < end {
        cuts.push(z);
        z += MOMENT_CELL;
    }
    cuts.push(z);
    cuts.extend(xi.breakpoints().into_iter().filter(|p| *p > b && *p < z));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Moment recursion `V_k(z) = ∫_z^∞ k V_{k-1}(u) exp(-∫_z^u ℓ'/ℓ(ξ̄)) du` with `V_0 ≡ 1`.
///
/// All orders share one set of collocation cells starting at `b`, so `V_{k-1}` is used at the
/// very nodes where it was computed. The range is extended until the first-order integrand is
/// negligible or its decay rate has settled; the remainder is added as an exponential tail.
pub fn v_k_general(query: &DividendQuery) -> Result<DividendMoments> {
    query.validate()?;
    let DividendQuery {
        model,
        q,
        r,
        b,
        k,
        xi,
    } = query;
    let (b, k) = (*b, *k);
    xi.check_domain(b, b + TAIL_CAP)?;
    let exits = (1..=k)
        .map(|j| DrawdownParisian::new(model, j as f64 * q, *r, xi.clone()))
        .collect::<Result<Vec<_>>>()?;
    let col = Collocation::cached(NODES);

    // extent from the slowest order, j = 1
    let first = exits[0].survival_curve();
    let mut end = b;
    let mut mass = 0.0;
    let mut prev_rate = first.rate(b)?;
    let mut settled = false;
    while end < b + TAIL_CAP {
        let next = end + MOMENT_CELL;
        mass += integrate_cell(first, b, end, next)?;
        let rate = first.rate(next)?;
        let s = first.survival(b, next)?;
        // rates at rounding level mean the survival factor has stopped decaying
        let tail = if rate > 1e-12 {
            s / rate
        } else {
            f64::INFINITY
        };
        end = next;
        let drift = (rate - prev_rate).abs() / rate.abs().max(1e-300);
        if tail <= 1e-12 * mass || (tail.is_finite() && tail * drift <= 1e-11 * mass) {
            settled = true;
            break;
        }
        prev_rate = rate;
    }
    if !settled {
        let s = first.survival(b, end)?;
        return Err(Error::NonConvergentTail {
            value: mass,
            tail: s * MOMENT_CELL,
        });
    }
    let cells = moment_cells(b, xi, end);

    let mut values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    let mut at_b = Vec::with_capacity(k);
    for j in 1..=k {
        let curve = exits[j - 1].survival_curve();
        let lower = |c: usize, m: usize| -> f64 {
            if j == 1 {
                1.0
            } else {
                values[j - 2][c][m]
            }
        };
        // integrand j V_{j-1}(u) S_j(u) at the nodes, S_j(u) = exp(-∫_b^u)
        let mut survival = Vec::with_capacity(cells.len());
        let mut integrand = Vec::with_capacity(cells.len());
        for (c, &(lo, hi)) in cells.iter().enumerate() {
            let s: Vec<f64> = col
                .nodes
                .iter()
                .map(|t| curve.survival(b, lo + t * (hi - lo)))
                .collect::<Result<_>>()?;
            integrand.push(
                (0..NODES)
                    .map(|m| j as f64 * lower(c, m) * s[m])
                    .collect::<Vec<f64>>(),
            );
            survival.push(s);
        }
        let last = cells.len() - 1;
        let rate_end = curve.rate(end)?;
        let v_prev_end = if j == 1 {
            1.0
        } else {
            values[j - 2][last][NODES - 1]
        };
        let mut after = j as f64 * v_prev_end * curve.survival(b, end)? / rate_end;
        let mut cur = vec![Vec::new(); cells.len()];
        for c in (0..cells.len()).rev() {
            let (lo, hi) = cells[c];
            let h = hi - lo;
            let f = &integrand[c];
            let full: f64 = h * col.weights.iter().zip(f).map(|(w, v)| w * v).sum::<f64>();
            cur[c] = (0..NODES)
                .map(|m| {
                    let head: f64 =
                        h * col.matrix[m].iter().zip(f).map(|(w, v)| w * v).sum::<f64>();
                    (after + full - head) / survival[c][m]
                })
                .collect();
            after += full;
        }
        at_b.push(after);
        values.push(cur);
    }
    Ok(DividendMoments {
        b,
        cells,
        values,
        at_b,
        exits,
    })
}

fn integrate_cell(curve: &crate::drawdown::SurvivalCurve, b: f64, lo: f64, hi: f64) -> Result<f64> {
    let col = Collocation::cached(NODES);
    let mut total = 0.0;
    for (t, w) in col.nodes.iter().zip(&col.weights) {
        total += w * curve.survival(b, lo + t * (hi - lo))?;
    }
    Ok(total * (hi - lo))
}

/// `k! (ℓ^{(kq)}(x)/ℓ^{(kq)}(b)) ∏_{i=1}^k ℓ^{(iq)}(b)/ℓ^{(iq)'}(b)` for the barrier draw-down.
pub fn v_k_barrier(model: &LevyModel, q: f64, r: f64, b: f64, k: usize, x: f64) -> Result<f64> {
    check_barrier(b, k, x)?;
    let mut out = 1.0;
    for i in 1..=k {
        let kernel = ParisianKernel::new(model, i as f64 * q, r)?;
        out *= i as f64 / kernel.log_derivative(b)?;
        if i == k {
            out *= kernel.ell_tilted(x)? / kernel.ell_tilted(b)?
                * (kernel.scale().phi() * (x - b)).exp();
        }
    }
    Ok(out)
}

/// `k! (W^{(kq)}(x)/W^{(kq)}(b)) ∏_{i=1}^k W^{(iq)}(b)/W^{(iq)'}(b)`: moments up to classical ruin.
pub fn u_k_classical(model: &LevyModel, q: f64, b: f64, k: usize, x: f64) -> Result<f64> {
    check_barrier(b, k, x)?;
    let mut out = 1.0;
    for i in 1..=k {
        let s = ScaleFunctionSet::new(model, i as f64 * q)?;
        out *= i as f64 * s.w_tilted(b)? / s.w_tilted_prime(b)?;
        if i == k {
            if x <= 0.0 && s.w_zero() == 0.0 {
                return Ok(0.0);
            }
            out *= s.w_tilted(x)? / s.w_tilted(b)? * (s.phi() * (x - b)).exp();
        }
    }
    Ok(out)
}

fn check_barrier(b: f64, k: usize, x: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) || k == 0 {
        return Err(Error::InvalidArgument("need b > 0 and k >= 1".into()));
    }
    if !(x <= b) {
        return Err(Error::InvalidArgument(format!(
            "need x <= b (got x = {x}, b = {b})"
        )));
    }
    Ok(())
}

/// Step of the backward Runge-Kutta sweep in [`v_k_parisian_no_drawdown`].
pub const RK_STEP: f64 = 1.0 / 32.0;

/// `V_k^ξ(x; b)` for `ξ ≡ 0`, i.e. `ℓ^{(kq)}(x) ∫_b^∞ k V_{k-1}(z)/ℓ^{(kq)}(z) dz`.
///
/// Solved as the linear system `V_j' = (ℓ_j'/ℓ_j) V_j - j V_{j-1}`, `j = 1..k`, integrated by
/// classical Runge-Kutta from far out, where `V_j ≈ j V_{j-1}/(ℓ_j'/ℓ_j)`, back to `b`.
pub fn v_k_parisian_no_drawdown(
    model: &LevyModel,
    q: f64,
    r: f64,
    b: f64,
    k: usize,
    x: f64,
) -> Result<f64> {
    check_barrier(b, k, x)?;
    if q == 0.0 && model.mean_x1()? >= 0.0 {
        return Err(Error::NonConvergentTail {
            value: f64::INFINITY,
            tail: f64::INFINITY,
        });
    }
    let kernels = (1..=k)
        .map(|j| ParisianKernel::new(model, j as f64 * q, r).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let rates = |z: f64| {
        kernels
            .iter()
            .map(|kr| kr.log_derivative(z))
            .collect::<Result<Vec<f64>>>()
    };
    // start where the slowest survival factor has decayed far enough
    let slowest = rates(b)?
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .min(kernels[0].scale().phi().max(1e-3));
    let span = (36.0 / slowest).clamp(20.0, TAIL_CAP);
    let n = (span / RK_STEP).ceil() as usize;
    let h = span / n as f64;
    let mut z = b + span;
    let g = rates(z)?;
    let mut v = vec![0.0; k];
    for j in 0..k {
        let lower = if j == 0 { 1.0 } else { v[j - 1] };
        v[j] = (j + 1) as f64 * lower / g[j];
    }
    let field = |g: &[f64], v: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|j| g[j] * v[j] - (j + 1) as f64 * if j == 0 { 1.0 } else { v[j - 1] })
            .collect()
    };
    let mut g_hi = g;
    for _ in 0..n {
        let g_mid = rates(z - 0.5 * h)?;
        let g_lo = rates(z - h)?;
        let axpy = |a: &[f64], s: f64, d: &[f64]| {
            a.iter()
                .zip(d)
                .map(|(x, y)| x + s * y)
                .collect::<Vec<f64>>()
        };
        let k1 = field(&g_hi, &v);
        let k2 = field(&g_mid, &axpy(&v, -0.5 * h, &k1));
        let k3 = field(&g_mid, &axpy(&v, -0.5 * h, &k2));
        let k4 = field(&g_lo, &axpy(&v, -h, &k3));
        for j in 0..k {
            v[j] -= h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        z -= h;
        g_hi = g_lo;
    }
    let top = &kernels[k - 1];
    let ratio = top.ell_tilted(x)? / top.ell_tilted(b)? * (top.scale().phi() * (x - b)).exp();
    Ok(ratio * v[k - 1])
}

/// Potential of the reflected process `Y = X - D` killed at `τ_a^+` or its Parisian ruin.
#[allow(clippy::too_many_arguments)]
pub fn reflected_potential<F, D>(
    model: &LevyModel,
    q: f64,
    r: f64,
    b: f64,
    x: f64,
    a: f64,
    f: F,
    df: D,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let dd = DrawdownParisian::new(model, q, r, DrawdownSpec::barrier(b)?)?;
    let paid = move |y: f64| (y - b).max(0.0);
    dd.potential(x, a, |u, y| f(u - paid(y)), |u, y| df(u - paid(y)))
}
