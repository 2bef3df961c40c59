//! Uplink C-RAN slicing among operators.
//!
//! Each remote radio head quantizes the received signal on every physical
//! resource block (PRB) before forwarding it to the cloud, and the cloud
//! spends decoding effort that grows as the rate approaches capacity. An
//! infrastructure provider sells cloud computation and fronthaul capacity to
//! operators; every operator then picks rates and quantization bits to
//! maximize its sum rate inside its slice.
//!
//! Rates are in bits per channel use, bits are per I/Q component, and
//! per-resource-element budgets are obtained by dividing slices by the number
//! of resource elements per second `n_re`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{illinois_root, project_capped_simplex};
use crate::scenario::{generate_topology, CranTopologyConfig, ScenarioConfig, TopologyConfig};

const LN2: f64 = std::f64::consts::LN_2;

fn quant_const() -> f64 {
    3f64.sqrt() * std::f64::consts::PI
}

/// Transport block sizes (bits per millisecond) of one PRB for the 27 LTE
/// uplink MCS indices.
pub const LTE_TBS_ONE_PRB: [u32; 27] = [
    16, 24, 32, 40, 56, 72, 88, 104, 120, 136, 144, 176, 208, 224, 256, 280, 328, 336, 376, 408, 440, 488, 520, 552, 584,
    616, 712,
];

/// Resource elements per PRB per second: 12 subcarriers, 14 symbols, 1000 subframes.
pub const RE_PER_PRB_SECOND: f64 = 168_000.0;

/// Default rate set: each transport block spread over the 168 resource
/// elements of a PRB-subframe.
pub fn default_rate_set() -> Vec<f64> {
    LTE_TBS_ONE_PRB.iter().map(|&t| f64::from(t) / 168.0).collect()
}

/// Quantization noise power of a `b`-bit quantizer on a signal of power `y`.
pub fn quant_noise(b: f64, y: f64) -> f64 {
    quant_const() * y / 2f64.powf(2.0 * b + 1.0)
}

/// SINR after quantization with `b` bits.
pub fn sinr_with_quant(d: f64, i: f64, b: f64) -> f64 {
    d / (i + quant_noise(b, d + i))
}

/// Real-valued lower bound on the bits that keep the quantization noise at or
/// below `sqrt(Y I)`.
pub fn min_quant_bits_real(d: f64, i: f64) -> f64 {
    0.5 * ((quant_const() * ((d + i) / i).sqrt()).log2() - 1.0)
}

/// Smallest integer number of bits meeting the quantization-quality rule.
pub fn min_quant_bits(d: f64, i: f64) -> u32 {
    min_quant_bits_real(d, i).ceil().max(0.0) as u32
}

/// Direct and interference-plus-noise power of one PRB at its radio head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbChannel {
    pub d: f64,
    pub i: f64,
}

impl PrbChannel {
    pub fn new(d: f64, i: f64) -> Result<Self> {
        if !(d > 0.0 && i > 0.0 && d.is_finite() && i.is_finite()) {
            return Err(invalid("PRB powers must be positive and finite"));
        }
        Ok(Self { d, i })
    }

    pub fn y(&self) -> f64 {
        self.d + self.i
    }

    /// Capacity `log2(1 + gamma(b))`.
    pub fn capacity(&self, b: f64) -> f64 {
        (1.0 + sinr_with_quant(self.d, self.i, b)).log2()
    }

    /// Capacity without quantization noise.
    pub fn capacity_limit(&self) -> f64 {
        (1.0 + self.d / self.i).log2()
    }

    /// Bits needed to reach capacity `t`, or `None` when `t` is out of reach.
    pub fn bits_for_capacity(&self, t: f64) -> Option<f64> {
        let q = self.d / (2f64.powf(t) - 1.0) - self.i;
        (q > 0.0).then(|| 0.5 * ((quant_const() * self.y() / q).log2() - 1.0))
    }

    /// Derivative of the capacity with respect to the bits.
    fn capacity_slope(&self, b: f64) -> f64 {
        let q = quant_noise(b, self.y());
        let g = self.d / (self.i + q);
        2.0 * self.d * q / ((self.i + q) * (self.i + q) * (1.0 + g))
    }
}

/// Decoding-effort model `A r [B - 2 log2(t - r)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub t_prime: f64,
    pub zeta: f64,
    pub eps_ch: f64,
}

impl Default for ComplexityModel {
    fn default() -> Self {
        Self { t_prime: 0.2, zeta: 6.0, eps_ch: 0.1 }
    }
}

impl ComplexityModel {
    pub fn new(t_prime: f64, zeta: f64, eps_ch: f64) -> Result<Self> {
        let m = Self { t_prime, zeta, eps_ch };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 2.0 && self.eps_ch > 0.0 && self.eps_ch < 1.0 && self.t_prime > 0.0) {
            return Err(invalid("complexity model needs zeta > 2, 0 < eps < 1 and T' > 0"));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        1.0 / (self.zeta - 1.0).log2()
    }

    pub fn b(&self) -> f64 {
        let t = -self.t_prime / self.eps_ch.log10();
        ((self.zeta - 2.0) / (self.zeta * t)).log2()
    }

    /// Effort per resource element at rate `r` and capacity `t`; infinite
    /// when `r >= t`, zero for an idle PRB.
    pub fn effort(&self, r: f64, t: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else if r >= t {
            f64::INFINITY
        } else {
            self.a() * r * (self.b() - 2.0 * (t - r).log2())
        }
    }
}

/// Decoding effort at rate `r` with `b` quantization bits.
pub fn decode_complexity(model: &ComplexityModel, r: f64, b: f64, d: f64, i: f64) -> Result<f64> {
    let t = PrbChannel::new(d, i)?.capacity(b);
    if r >= t {
        return Err(invalid(format!("rate {r} is not below capacity {t}")));
    }
    Ok(model.effort(r, t))
}

/// Relaxed rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub r_min: f64,
    pub r_max: f64,
}

impl RateBounds {
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() || rates.windows(2).any(|w| w[0] >= w[1]) || rates[0] <= 0.0 {
            return Err(invalid("rate set must be positive and strictly increasing"));
        }
        Ok(Self { r_min: rates[0], r_max: rates[rates.len() - 1] })
    }
}

/// Optimal rate and its gap `g = t - r` to capacity `t`.
///
/// With `u = ln g` the stationarity condition reads `(u + k) e^u = t` where
/// `k = 1 + ln2 (1 - lambda A B) / (2 lambda A)`; it is solved as
/// `u + ln(u + k) = ln t` by Newton steps, then clamped to the rate bounds.
fn rate_and_gap(lambda: f64, t: f64, model: &ComplexityModel, bounds: &RateBounds) -> (f64, f64) {
    let hi = t.min(bounds.r_max);
    if hi <= bounds.r_min {
        return (bounds.r_min, t - bounds.r_min);
    }
    if lambda <= 0.0 {
        return (hi, t - hi);
    }
    let la = lambda * model.a();
    let k = 1.0 + LN2 * (1.0 - la * model.b()) / (2.0 * la);
    let lt = t.ln();
    let h = |u: f64| u + (u + k).ln() - lt;
    // h is increasing and concave on u > -k; Newton from the left stays left.
    let mut u = if k > 1.0 { lt - k.ln() } else { (lt.max(-k + 1.0)).min(lt) };
    if !(u + k > 0.0) {
        u = -k + 1e-300f64.max(1e-12 * k.abs());
    }
    while h(u) > 0.0 {
        let left = -k + 0.5 * (u + k);
        u = if left < u { left } else { break };
    }
    for _ in 0..100 {
        let step = h(u) / (1.0 + 1.0 / (u + k));
        u -= step;
        if step.abs() <= 1e-14 * (1.0 + u.abs()) {
            break;
        }
    }
    let g_min = t - hi;
    let g_max = t - bounds.r_min;
    let g = u.exp().clamp(g_min.max(t * (-700f64).exp()), g_max);
    (t - g, g)
}

/// Rate maximizing `r - lambda * effort(r, t)` on `[r_min, min(t, r_max)]`.
pub fn optimal_rate_for_capacity(lambda: f64, t: f64, model: &ComplexityModel, bounds: &RateBounds) -> f64 {
    rate_and_gap(lambda, t, model, bounds).0
}

/// Rate maximizing the Lagrangian for the capacity reached with `b` bits.
pub fn optimal_rate_given_bits(lambda: f64, b: f64, ch: &PrbChannel, model: &ComplexityModel, bounds: &RateBounds) -> f64 {
    optimal_rate_for_capacity(lambda, ch.capacity(b), model, bounds)
}

/// Slope of `r log2(t(b) - r)` in `b`.
fn bits_slope(ch: &PrbChannel, r: f64, b: f64) -> f64 {
    let t = ch.capacity(b);
    if t <= r {
        return f64::INFINITY;
    }
    r * ch.capacity_slope(b) / ((t - r) * LN2)
}

/// Bits where the slope falls to `mu`, never below `lo`.
fn bits_at_level(ch: &PrbChannel, r: f64, lo: f64, mu: f64) -> f64 {
    let g = |b: f64| bits_slope(ch, r, b).ln() - mu.ln();
    let g_lo = g(lo);
    if g_lo <= 0.0 {
        return lo;
    }
    let mut step = 1.0;
    let mut hi = lo + step;
    let mut g_hi = g(hi);
    while g_hi > 0.0 {
        step *= 2.0;
        hi = lo + step;
        g_hi = g(hi);
        if step > 1e6 {
            return hi;
        }
    }
    illinois_root(g, lo, g_lo, hi, g_hi, 1e-12 * (1.0 + hi))
}

/// Water-filling of `budget` bits over PRBs with rates `r`, maximizing
/// `sum r log2(t(b) - r)` subject to `b >= floors`. Returns the bits and the
/// water level.
pub fn optimal_bits_given_rates(channels: &[PrbChannel], r: &[f64], budget: f64, floors: &[f64]) -> Result<(Vec<f64>, f64)> {
    if channels.len() != r.len() || r.len() != floors.len() {
        return Err(Error::Dimension("channels, rates and floors differ in length".into()));
    }
    let mut lo = Vec::with_capacity(r.len());
    for ((ch, &rate), &fl) in channels.iter().zip(r).zip(floors) {
        let need = if rate > 0.0 {
            match ch.bits_for_capacity(rate) {
                Some(b) => b,
                None => return Err(Error::Infeasible(format!("rate {rate} exceeds the PRB capacity"))),
            }
        } else {
            0.0
        };
        lo.push(fl.max(need));
    }
    waterfill(channels, r, budget, &lo)
}

/// Makes `b` spend exactly `budget`: a shortfall goes to the largest entry of
/// `idx`, an excess is taken from each entry in proportion to `b - lo`.
fn settle(b: &mut [f64], lo: &[f64], idx: &[usize], budget: f64) {
    let diff = budget - b.iter().sum::<f64>();
    if diff >= 0.0 {
        if let Some(top) = idx.iter().copied().max_by(|&x, &y| b[x].total_cmp(&b[y])) {
            b[top] += diff;
        }
        return;
    }
    let room: f64 = idx.iter().map(|&s| (b[s] - lo[s]).max(0.0)).sum();
    if room <= 0.0 {
        return;
    }
    let cut = (-diff / room).min(1.0);
    for &s in idx {
        b[s] -= cut * (b[s] - lo[s]).max(0.0);
    }
}

fn waterfill(channels: &[PrbChannel], r: &[f64], budget: f64, lo: &[f64]) -> Result<(Vec<f64>, f64)> {
    let base: f64 = lo.iter().sum();
    if base > budget + 1e-9 * (1.0 + budget.abs()) {
        return Err(Error::Infeasible(format!("bit floors {base} exceed the fronthaul budget {budget}")));
    }
    let active: Vec<usize> = (0..r.len()).filter(|&s| r[s] > 0.0).collect();
    if active.is_empty() {
        // No rate to protect: spread the spare bits evenly.
        let spare = (budget - base).max(0.0) / r.len().max(1) as f64;
        return Ok((lo.iter().map(|l| l + spare).collect(), 0.0));
    }
    let idle: f64 = (0..r.len()).filter(|s| !active.contains(s)).map(|s| lo[s]).sum();
    let target = budget - idle;
    let level = |lm: f64| -> Vec<f64> { active.iter().map(|&s| bits_at_level(&channels[s], r[s], lo[s], lm.exp())).collect() };
    let h = |lm: f64| level(lm).iter().sum::<f64>() - target;
    let start = active
        .iter()
        .map(|&s| bits_slope(&channels[s], r[s], lo[s]))
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold(1.0, f64::max)
        .ln();
    let (mut hi, mut h_hi) = (start, h(start));
    while h_hi > 0.0 {
        hi += 6.0;
        h_hi = h(hi);
        if hi > 700.0 {
            let mut b = lo.to_vec();
            for (k, &s) in active.iter().enumerate() {
                b[s] = level(hi)[k];
            }
            return Ok((b, hi.exp()));
        }
    }
    let (mut lo_l, mut h_lo) = (hi - 3.0, h(hi - 3.0));
    while h_lo < 0.0 {
        hi = lo_l;
        h_hi = h_lo;
        lo_l -= 6.0;
        h_lo = h(lo_l);
        if lo_l < -700.0 {
            break;
        }
    }
    let lm = illinois_root(h, lo_l, h_lo, hi, h_hi, 1e-13);
    let mut b = lo.to_vec();
    for (k, &s) in active.iter().enumerate() {
        b[s] = level(lm)[k];
    }
    settle(&mut b, lo, &active, budget);
    Ok((b, lm.exp()))
}

/// One PRB of an operator: channel, integer bit floor and whether any rate of
/// the set can be carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbSlot {
    pub prb: usize,
    pub ch: PrbChannel,
    pub floor: f64,
    pub servable: bool,
}

impl PrbSlot {
    /// A PRB is servable when its capacity limit exceeds the lowest rate. Its
    /// bit floor also keeps the capacity above `min(2 r_min, (r_min + t_max) / 2)`.
    pub fn new(prb: usize, ch: PrbChannel, bounds: &RateBounds) -> Self {
        let t_max = ch.capacity_limit();
        let servable = t_max > bounds.r_min * (1.0 + 1e-9);
        let mut floor = f64::from(min_quant_bits(ch.d, ch.i));
        if servable {
            let margin = (2.0 * bounds.r_min).min(0.5 * (bounds.r_min + t_max));
            if let Some(b) = ch.bits_for_capacity(margin) {
                floor = floor.max(b.ceil());
            }
        } else {
            floor = 0.0;
        }
        Self { prb, ch, floor, servable }
    }
}

/// Lower-level problem of one operator for a given slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpInstance {
    /// PRBs of the operator in every cell.
    pub cells: Vec<Vec<PrbSlot>>,
    /// Fronthaul budget per cell in bits per resource element.
    pub budget_bits: Vec<f64>,
    /// Computation budget per resource element.
    pub budget_c: f64,
    pub model: ComplexityModel,
    pub rates: Vec<f64>,
}

impl OpInstance {
    pub fn new(cells: Vec<Vec<PrbChannel>>, budget_bits: Vec<f64>, budget_c: f64, model: ComplexityModel, rates: Vec<f64>) -> Result<Self> {
        let bounds = RateBounds::from_rates(&rates)?;
        model.validate()?;
        if cells.len() != budget_bits.len() {
            return Err(Error::Dimension("one fronthaul budget per cell is required".into()));
        }
        let cells = cells
            .into_iter()
            .map(|c| c.into_iter().enumerate().map(|(s, ch)| PrbSlot::new(s, ch, &bounds)).collect())
            .collect();
        Ok(Self { cells, budget_bits, budget_c, model, rates })
    }

    pub fn bounds(&self) -> RateBounds {
        RateBounds::from_rates(&self.rates).expect("validated at construction")
    }

    /// Bits per resource element needed by the floors of each cell.
    pub fn floor_bits(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.iter().map(|p| p.floor).sum()).collect()
    }

    /// Effort per resource element at the lowest rate and the bit floors,
    /// which bounds the smallest feasible effort from above.
    pub fn floor_effort(&self) -> f64 {
        let r_min = self.bounds().r_min;
        self.cells
            .iter()
            .flatten()
            .filter(|p| p.servable)
            .map(|p| self.model.effort(r_min, p.ch.capacity(p.floor)))
            .sum()
    }

}

/// Per-PRB values of an operator, indexed `[cell][slot]`.
pub type PerPrb = Vec<Vec<f64>>;

/// Variables pinned by rounding: `(rate, bits)` per slot.
pub type Pinned = Vec<Vec<(Option<f64>, Option<f64>)>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSearch {
    /// Bracketing search for the smallest multiplier meeting the budget.
    Bracketing,
    /// Projected subgradient with step `1/sqrt(l)`.
    Subgradient { max_iter: usize },
}

/// Per-cell solver used for a fixed multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Bits water-filled on the marginal value of the rate-optimized Lagrangian.
    Joint,
    /// Alternating exact rate and bit updates.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RllOptions {
    pub search: LambdaSearch,
    pub inner: InnerSolver,
    /// Largest change of any rate or bit count ending an alternation.
    pub tol: f64,
    pub max_rounds: usize,
    pub lambda_floor: f64,
    pub record_phi: bool,
}

impl Default for RllOptions {
    fn default() -> Self {
        Self {
            search: LambdaSearch::Bracketing,
            inner: InnerSolver::Joint,
            tol: 1e-10,
            max_rounds: 500,
            lambda_floor: 1e-9,
            record_phi: false,
        }
    }
}

/// Relaxed lower-level optimum of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RllSolution {
    pub r: PerPrb,
    pub b: PerPrb,
    pub lambda: f64,
    /// Marginal Lagrangian value of one more bit in each cell.
    pub mu: Vec<f64>,
    pub sum_rate: f64,
    /// Effort per resource element.
    pub effort: f64,
    /// Lagrangian after every alternation round of the final multiplier, when
    /// recorded.
    pub phi_trace: Vec<f64>,
    pub evaluations: usize,
}

impl RllSolution {
    /// Derivative of the sum rate with respect to the computation budget per
    /// resource element and each cell's bit budget per resource element.
    pub fn sensitivities(&self) -> (f64, Vec<f64>) {
        (self.lambda, self.mu.clone())
    }
}

struct CellOut {
    mu: f64,
}

fn apply_pins(slots: &[PrbSlot], pins: &[(Option<f64>, Option<f64>)], r: &mut [f64], b: &mut [f64]) {
    for s in 0..slots.len() {
        if !slots[s].servable {
            r[s] = 0.0;
            b[s] = 0.0;
        } else {
            if let Some(v) = pins[s].0 {
                r[s] = v;
            }
            if let Some(v) = pins[s].1 {
                b[s] = v;
            }
        }
    }
}

/// Solves one cell jointly: rates follow their optimum for every bit count,
/// and bits are water-filled on the resulting marginal value
/// `2 lambda A r t'(b) / ((t - r) ln 2)`.
fn joint_cell(
    slots: &[PrbSlot],
    pins: &[(Option<f64>, Option<f64>)],
    budget: f64,
    lambda: f64,
    model: &ComplexityModel,
    bounds: &RateBounds,
    r: &mut [f64],
    b: &mut [f64],
) -> Result<CellOut> {
    let n = slots.len();
    apply_pins(slots, pins, r, b);
    let two_la = 2.0 * lambda * model.a();
    let rate_at = |s: usize, bits: f64| -> (f64, f64) {
        let t = slots[s].ch.capacity(bits);
        match pins[s].0 {
            Some(v) => (v, t - v),
            None => rate_and_gap(lambda, t, model, bounds),
        }
    };
    let free: Vec<usize> = (0..n).filter(|&s| slots[s].servable && pins[s].1.is_none()).collect();
    let pinned_bits: f64 = (0..n).filter(|&s| slots[s].servable && pins[s].1.is_some()).map(|s| b[s]).sum();
    let avail = budget - pinned_bits;
    for s in (0..n).filter(|&s| slots[s].servable && pins[s].1.is_some()) {
        let (rr, g) = rate_at(s, b[s]);
        if g <= 0.0 {
            return Err(Error::Infeasible("pinned rate reaches capacity".into()));
        }
        r[s] = rr;
    }
    if free.is_empty() {
        if avail < -1e-9 * (1.0 + budget.abs()) {
            return Err(Error::Infeasible("pinned bits exceed the fronthaul budget".into()));
        }
        return Ok(CellOut { mu: 0.0 });
    }
    let mut lo = vec![0.0; n];
    for &s in &free {
        lo[s] = slots[s].floor;
        if let Some(v) = pins[s].0 {
            match slots[s].ch.bits_for_capacity(v) {
                Some(need) => lo[s] = lo[s].max(need),
                None => return Err(Error::Infeasible("pinned rate exceeds the PRB capacity".into())),
            }
        }
    }
    let base: f64 = free.iter().map(|&s| lo[s]).sum();
    if base > avail + 1e-9 * (1.0 + avail.abs()) {
        return Err(Error::Infeasible(format!("bit floors {base} exceed the fronthaul budget {avail}")));
    }
    let ln_value = |s: usize, bits: f64| -> f64 {
        let (rr, g) = rate_at(s, bits);
        if g <= 0.0 {
            return f64::INFINITY;
        }
        (two_la * rr * slots[s].ch.capacity_slope(bits) / (g * LN2)).ln()
    };
    let bits_at = |s: usize, lm: f64, guess: f64| -> f64 {
        let f = |x: f64| ln_value(s, x) - lm;
        let f_lo = f(lo[s]);
        if f_lo <= 0.0 {
            return lo[s];
        }
        let mut a = lo[s];
        let mut fa = f_lo;
        let mut step = 0.5;
        let mut x = guess.max(lo[s] + 1e-6);
        let mut fx = f(x);
        while fx > 0.0 {
            a = x;
            fa = fx;
            x += step;
            step *= 2.0;
            fx = f(x);
            if step > 1e6 {
                return x;
            }
        }
        illinois_root(f, a, fa, x, fx, 1e-11 * (1.0 + x))
    };
    let guess: Vec<f64> = b.to_vec();
    let total = |lm: f64| free.iter().map(|&s| bits_at(s, lm, guess[s])).sum::<f64>() - avail;
    let start = free
        .iter()
        .map(|&s| ln_value(s, lo[s].max(guess[s])))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let start = if start.is_finite() { start } else { 0.0 };
    let (mut lo_m, mut hi_m) = (start - 1.0, start + 1.0);
    let (mut f_lo, mut f_hi) = (total(lo_m), total(hi_m));
    let mut width = 2.0;
    while f_hi > 0.0 {
        lo_m = hi_m;
        f_lo = f_hi;
        hi_m += width;
        width *= 2.0;
        f_hi = total(hi_m);
        if hi_m > 1400.0 {
            break;
        }
    }
    width = 2.0;
    while f_lo < 0.0 {
        hi_m = lo_m;
        f_hi = f_lo;
        lo_m -= width;
        width *= 2.0;
        f_lo = total(lo_m);
        if lo_m < -1400.0 {
            break;
        }
    }
    let lm = if f_lo >= 0.0 && f_hi <= 0.0 { illinois_root(total, lo_m, f_lo, hi_m, f_hi, 1e-12) } else { hi_m };
    for &s in &free {
        b[s] = bits_at(s, lm, guess[s]);
    }
    let fixed: f64 = (0..n).filter(|s| !free.contains(s)).map(|s| b[s]).sum();
    let mut fb = b.to_vec();
    settle(&mut fb, &lo, &free, avail + fixed);
    for &s in &free {
        b[s] = fb[s];
    }
    for &s in &free {
        r[s] = rate_at(s, b[s]).0;
    }
    Ok(CellOut { mu: lm.exp() })
}

fn alternate_cell(
    slots: &[PrbSlot],
    pins: &[(Option<f64>, Option<f64>)],
    budget: f64,
    lambda: f64,
    model: &ComplexityModel,
    bounds: &RateBounds,
    opts: &RllOptions,
    r: &mut [f64],
    b: &mut [f64],
    mut phi: Option<&mut Vec<f64>>,
) -> Result<CellOut> {
    let n = slots.len();
    apply_pins(slots, pins, r, b);
    let free_b: Vec<usize> = (0..n).filter(|&s| slots[s].servable && pins[s].1.is_none()).collect();
    let pinned_bits: f64 = (0..n).filter(|&s| slots[s].servable && pins[s].1.is_some()).map(|s| b[s]).sum();
    let mut mu = 0.0;
    for _round in 0..opts.max_rounds {
        let (old_r, old_b) = (r.to_vec(), b.to_vec());
        if !free_b.is_empty() {
            let ch: Vec<PrbChannel> = free_b.iter().map(|&s| slots[s].ch).collect();
            let rr: Vec<f64> = free_b.iter().map(|&s| r[s]).collect();
            let fl: Vec<f64> = free_b.iter().map(|&s| slots[s].floor).collect();
            let (bb, m) = optimal_bits_given_rates(&ch, &rr, budget - pinned_bits, &fl)?;
            for (k, &s) in free_b.iter().enumerate() {
                b[s] = bb[k];
            }
            mu = 2.0 * lambda * model.a() * m;
        } else if pinned_bits > budget * (1.0 + 1e-12) {
            return Err(Error::Infeasible("pinned bits exceed the fronthaul budget".into()));
        }
        for s in 0..n {
            if slots[s].servable && pins[s].0.is_none() {
                r[s] = optimal_rate_given_bits(lambda, b[s], &slots[s].ch, model, bounds);
            } else if slots[s].servable && r[s] >= slots[s].ch.capacity(b[s]) {
                return Err(Error::Infeasible("pinned rate reaches capacity".into()));
            }
        }
        if let Some(p) = phi.as_deref_mut() {
            let e: f64 = (0..n).map(|s| model.effort(r[s], slots[s].ch.capacity(b[s]))).sum();
            p.push(r.iter().sum::<f64>() - lambda * e);
        }
        let change = (0..n).map(|s| (r[s] - old_r[s]).abs().max((b[s] - old_b[s]).abs())).fold(0.0, f64::max);
        if change <= opts.tol {
            break;
        }
    }
    Ok(CellOut { mu })
}

struct Evaluated {
    r: PerPrb,
    b: PerPrb,
    mu: Vec<f64>,
    effort: f64,
    phi: Vec<f64>,
}

fn evaluate(inst: &OpInstance, pins: &Pinned, lambda: f64, opts: &RllOptions, warm: (&PerPrb, &PerPrb)) -> Result<Evaluated> {
    let bounds = inst.bounds();
    let (mut r, mut b) = (warm.0.clone(), warm.1.clone());
    let mut mu = vec![0.0; inst.cells.len()];
    let mut phi = Vec::new();
    for (k, cell) in inst.cells.iter().enumerate() {
        let out = match opts.inner {
            InnerSolver::Joint => joint_cell(cell, &pins[k], inst.budget_bits[k], lambda, &inst.model, &bounds, &mut r[k], &mut b[k])?,
            InnerSolver::Alternating => {
                let trace = if opts.record_phi { Some(&mut phi) } else { None };
                alternate_cell(cell, &pins[k], inst.budget_bits[k], lambda, &inst.model, &bounds, opts, &mut r[k], &mut b[k], trace)?
            }
        };
        mu[k] = out.mu;
    }
    let effort = effort_of(inst, &r, &b);
    Ok(Evaluated { r, b, mu, effort, phi })
}

fn effort_of(inst: &OpInstance, r: &PerPrb, b: &PerPrb) -> f64 {
    inst.cells
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.iter().enumerate().map(move |(s, p)| (k, s, p)))
        .map(|(k, s, p)| if p.servable { inst.model.effort(r[k][s], p.ch.capacity(b[k][s])) } else { 0.0 })
        .sum()
}

fn unpinned(inst: &OpInstance) -> Pinned {
    inst.cells.iter().map(|c| vec![(None, None); c.len()]).collect()
}

/// Rates of the free slots for multiplier `lambda` at fixed bits.
fn rates_at(inst: &OpInstance, pins: &Pinned, lambda: f64, b: &PerPrb, r: &mut PerPrb) {
    let bounds = inst.bounds();
    for (k, cell) in inst.cells.iter().enumerate() {
        for (s, p) in cell.iter().enumerate() {
            if p.servable && pins[k][s].0.is_none() {
                r[k][s] = rate_and_gap(lambda, p.ch.capacity(b[k][s]), &inst.model, &bounds).0;
            }
        }
    }
}

/// Primal ascent from a dual point: bits minimize the effort of the current
/// rates, then rates spend the whole computation budget at those bits.
fn polish(inst: &OpInstance, pins: &Pinned, opts: &RllOptions, lambda: f64, start: Evaluated) -> Result<(f64, Evaluated)> {
    let budget = inst.budget_c;
    let (mut lambda, mut cur) = (lambda, start);
    let mut rate: f64 = cur.r.iter().flatten().sum();
    for _ in 0..50 {
        let mut b = cur.b.clone();
        let mut mu = vec![0.0; inst.cells.len()];
        for (k, cell) in inst.cells.iter().enumerate() {
            let free: Vec<usize> = (0..cell.len()).filter(|&s| cell[s].servable && pins[k][s].1.is_none()).collect();
            if free.is_empty() {
                continue;
            }
            let pinned: f64 = (0..cell.len()).filter(|&s| cell[s].servable && pins[k][s].1.is_some()).map(|s| b[k][s]).sum();
            let ch: Vec<PrbChannel> = free.iter().map(|&s| cell[s].ch).collect();
            let rr: Vec<f64> = free.iter().map(|&s| cur.r[k][s]).collect();
            let fl: Vec<f64> = free.iter().map(|&s| cell[s].floor).collect();
            let (bb, m) = optimal_bits_given_rates(&ch, &rr, inst.budget_bits[k] - pinned, &fl)?;
            for (j, &s) in free.iter().enumerate() {
                b[k][s] = bb[j];
            }
            mu[k] = m;
        }
        let mut r = cur.r.clone();
        let effort_at = |l: f64, r: &mut PerPrb| {
            rates_at(inst, pins, l, &b, r);
            effort_of(inst, r, &b)
        };
        let mut next_lambda = opts.lambda_floor;
        if effort_at(next_lambda, &mut r) > budget {
            let (mut lo, mut hi) = (opts.lambda_floor.ln(), lambda.max(opts.lambda_floor).ln());
            while effort_at(hi.exp(), &mut r) > budget {
                lo = hi;
                hi += 4.0;
                if hi > 60.0 {
                    return Ok((lambda, cur));
                }
            }
            for _ in 0..200 {
                if hi - lo <= 1e-13 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if effort_at(mid.exp(), &mut r) > budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            next_lambda = hi.exp();
            effort_at(next_lambda, &mut r);
        }
        let effort = effort_of(inst, &r, &b);
        let next_rate: f64 = r.iter().flatten().sum();
        if !(effort <= budget * (1.0 + 1e-9) + 1e-12) || next_rate <= rate + 1e-12 {
            break;
        }
        let two_la = 2.0 * next_lambda * inst.model.a();
        lambda = next_lambda;
        rate = next_rate;
        cur = Evaluated { r, b, mu: mu.iter().map(|m| two_la * m).collect(), effort, phi: cur.phi };
    }
    Ok((lambda, cur))
}

/// Relaxed lower-level optimum with nothing pinned.
pub fn solve_rll(inst: &OpInstance, opts: &RllOptions) -> Result<RllSolution> {
    solve_rll_pinned(inst, &unpinned(inst), opts, None)
}

/// Relaxed lower-level optimum with some variables held fixed, optionally
/// warm-started from an earlier solution.
pub fn solve_rll_pinned(inst: &OpInstance, pins: &Pinned, opts: &RllOptions, warm: Option<&RllSolution>) -> Result<RllSolution> {
    let bounds = inst.bounds();
    for (k, cell) in inst.cells.iter().enumerate() {
        let floors: f64 = cell.iter().map(|p| p.floor).sum();
        if floors > inst.budget_bits[k] * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Infeasible(format!("cell {k}: bit floors {floors} exceed budget {}", inst.budget_bits[k])));
        }
    }
    let init_r: PerPrb = inst.cells.iter().map(|c| vec![bounds.r_min; c.len()]).collect();
    let init_b: PerPrb = inst.cells.iter().map(|c| c.iter().map(|p| p.floor).collect()).collect();
    let (wr, wb) = match warm {
        Some(w) => (w.r.clone(), w.b.clone()),
        None => (init_r, init_b),
    };
    let budget = inst.budget_c;
    let mut evaluations = 0usize;
    let mut eval = |lambda: f64, warm: (&PerPrb, &PerPrb)| {
        evaluations += 1;
        evaluate(inst, pins, lambda, opts, warm)
    };
    let (lambda, best) = match opts.search {
        LambdaSearch::Bracketing => {
            let lo_l = opts.lambda_floor;
            let first = eval(lo_l, (&wr, &wb))?;
            if first.effort <= budget {
                (lo_l, first)
            } else {
                let (mut lo, mut h_lo) = (lo_l.ln(), first.effort - budget);
                let mut lo_state = first;
                let mut hi = 0f64;
                let mut hi_state = eval(hi.exp(), (&lo_state.r, &lo_state.b))?;
                while hi_state.effort > budget {
                    lo = hi;
                    h_lo = hi_state.effort - budget;
                    lo_state = hi_state;
                    hi += 4.0;
                    if hi > 60.0 {
                        return Err(Error::Infeasible(format!("effort {} cannot fall below budget {budget}", lo_state.effort)));
                    }
                    hi_state = eval(hi.exp(), (&lo_state.r, &lo_state.b))?;
                }
                let mut h_hi = hi_state.effort - budget;
                let mut side = 0i8;
                for _ in 0..200 {
                    if hi - lo <= 1e-12 || h_hi.abs() <= 1e-10 * (1.0 + budget.abs()) {
                        break;
                    }
                    let mut c = (lo * h_hi - hi * h_lo) / (h_hi - h_lo);
                    if !c.is_finite() || c <= lo || c >= hi {
                        c = 0.5 * (lo + hi);
                    }
                    let st = eval(c.exp(), (&hi_state.r, &hi_state.b))?;
                    let h = st.effort - budget;
                    if h <= 0.0 {
                        hi = c;
                        h_hi = h;
                        hi_state = st;
                        if side == -1 {
                            h_lo *= 0.5;
                        }
                        side = -1;
                    } else {
                        lo = c;
                        h_lo = h;
                        lo_state = st;
                        if side == 1 {
                            h_hi *= 0.5;
                        }
                        side = 1;
                    }
                }
                let _ = lo_state;
                (hi.exp(), hi_state)
            }
        }
        LambdaSearch::Subgradient { max_iter } => {
            let mut lambda = 0.0f64;
            let mut state = eval(opts.lambda_floor, (&wr, &wb))?;
            let mut best: Option<(f64, Evaluated)> = None;
            for l in 1..=max_iter {
                let g = state.effort - budget;
                if g <= 0.0 {
                    let rate: f64 = state.r.iter().flatten().sum();
                    if best.as_ref().map_or(true, |(_, b)| rate > b.r.iter().flatten().sum::<f64>()) {
                        best = Some((lambda, Evaluated { r: state.r.clone(), b: state.b.clone(), mu: state.mu.clone(), effort: state.effort, phi: state.phi.clone() }));
                    }
                }
                let next = (lambda + g / (l as f64).sqrt()).max(0.0);
                if (next - lambda).abs() < 1e-10 {
                    break;
                }
                lambda = next;
                state = eval(lambda.max(opts.lambda_floor), (&state.r, &state.b))?;
            }
            match best {
                Some(b) => b,
                None => return Err(Error::Infeasible("no feasible multiplier found by the subgradient loop".into())),
            }
        }
    };
    let (lambda, best) = match polish(inst, pins, opts, lambda, best) {
        Ok(v) => v,
        Err(e) => return Err(e),
    };
    let sum_rate = best.r.iter().flatten().sum();
    Ok(RllSolution { r: best.r, b: best.b, lambda, mu: best.mu, sum_rate, effort: best.effort, phi_trace: best.phi, evaluations })
}

/// Discrete allocation of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub r: PerPrb,
    pub b: PerPrb,
    pub sum_rate: f64,
    pub effort: f64,
    pub feasible: bool,
}

fn finish_discrete(inst: &OpInstance, r: PerPrb, b: PerPrb) -> DiscreteSolution {
    let feasible = discrete_feasible(inst, &r, &b);
    let effort = effort_of(inst, &r, &b);
    DiscreteSolution { sum_rate: r.iter().flatten().sum(), r, b, effort, feasible }
}

/// Checks every constraint of the discrete lower-level problem. Idle PRBs
/// carry rate 0 with no bits.
pub fn discrete_feasible(inst: &OpInstance, r: &PerPrb, b: &PerPrb) -> bool {
    let tol = 1e-9;
    for (k, cell) in inst.cells.iter().enumerate() {
        let mut bits = 0.0;
        for (s, p) in cell.iter().enumerate() {
            let (rr, bb) = (r[k][s], b[k][s]);
            bits += bb;
            if bb.fract() != 0.0 {
                return false;
            }
            if rr == 0.0 {
                continue;
            }
            if !inst.rates.contains(&rr) || bb < p.floor || rr >= p.ch.capacity(bb) {
                return false;
            }
        }
        if bits > inst.budget_bits[k] + tol {
            return false;
        }
    }
    effort_of(inst, r, b) <= inst.budget_c + tol * (1.0 + inst.budget_c.abs())
}

fn nearest_rate(rates: &[f64], r: f64) -> f64 {
    *rates.iter().min_by(|a, b| (*a - r).abs().partial_cmp(&(*b - r).abs()).unwrap()).unwrap()
}

fn next_lower_rate(rates: &[f64], r: f64) -> f64 {
    rates.iter().rev().copied().find(|&x| x < r).unwrap_or(0.0)
}

/// Largest rate of the set strictly below `t`, or 0.
pub fn largest_rate_below(rates: &[f64], t: f64) -> f64 {
    rates.iter().rev().copied().find(|&x| x < t).unwrap_or(0.0)
}

/// One-shot rounding to the nearest grid points followed by adjustment:
/// excess fronthaul is removed from the PRB with most bits, rates above
/// capacity drop to the next grid rate, and excess effort is removed from the
/// PRB with the largest effort.
pub fn round_ra(inst: &OpInstance, relaxed: &RllSolution) -> DiscreteSolution {
    let mut r: PerPrb = relaxed.r.iter().map(|c| c.iter().map(|&v| if v > 0.0 { nearest_rate(&inst.rates, v) } else { 0.0 }).collect()).collect();
    let mut b: PerPrb = relaxed.b.iter().map(|c| c.iter().map(|v| v.round()).collect()).collect();
    adjust(inst, &mut r, &mut b);
    finish_discrete(inst, r, b)
}

fn adjust(inst: &OpInstance, r: &mut PerPrb, b: &mut PerPrb) {
    for (k, cell) in inst.cells.iter().enumerate() {
        for (s, p) in cell.iter().enumerate() {
            if !p.servable {
                r[k][s] = 0.0;
                b[k][s] = 0.0;
            } else {
                b[k][s] = b[k][s].max(p.floor);
            }
        }
        loop {
            let total: f64 = b[k].iter().sum();
            if total <= inst.budget_bits[k] + 1e-9 {
                break;
            }
            let pick = (0..cell.len())
                .filter(|&s| b[k][s] > cell[s].floor)
                .max_by(|&x, &y| b[k][x].partial_cmp(&b[k][y]).unwrap().then(y.cmp(&x)));
            match pick {
                Some(s) => b[k][s] -= 1.0,
                None => break,
            }
        }
        for (s, p) in cell.iter().enumerate() {
            if r[k][s] > 0.0 && r[k][s] >= p.ch.capacity(b[k][s]) {
                r[k][s] = largest_rate_below(&inst.rates, p.ch.capacity(b[k][s]));
            }
        }
    }
    loop {
        let e = effort_of(inst, r, b);
        if e <= inst.budget_c + 1e-9 * (1.0 + inst.budget_c.abs()) {
            break;
        }
        let mut pick: Option<(f64, usize, usize)> = None;
        for (k, cell) in inst.cells.iter().enumerate() {
            for (s, p) in cell.iter().enumerate() {
                if r[k][s] > 0.0 {
                    let c = inst.model.effort(r[k][s], p.ch.capacity(b[k][s]));
                    if pick.map_or(true, |q| c > q.0) {
                        pick = Some((c, k, s));
                    }
                }
            }
        }
        match pick {
            Some((_, k, s)) => r[k][s] = next_lower_rate(&inst.rates, r[k][s]),
            None => break,
        }
    }
}

/// Iterative rounding: repeatedly pins the variable closest to its grid and
/// re-solves the relaxed problem for the rest. When a re-solve fails the
/// variable is rounded down instead; if that fails too the remaining
/// variables are rounded in one shot.
pub fn round_ir(inst: &OpInstance, relaxed: &RllSolution, opts: &RllOptions) -> DiscreteSolution {
    let mut pins = unpinned(inst);
    let mut current = relaxed.clone();
    loop {
        let mut best: Option<(f64, usize, usize, bool)> = None;
        for (k, cell) in inst.cells.iter().enumerate() {
            for (s, p) in cell.iter().enumerate() {
                if !p.servable {
                    continue;
                }
                if pins[k][s].0.is_none() {
                    let d = (nearest_rate(&inst.rates, current.r[k][s]) - current.r[k][s]).abs();
                    if best.map_or(true, |q| d < q.0) {
                        best = Some((d, k, s, true));
                    }
                }
                if pins[k][s].1.is_none() {
                    let d = (current.b[k][s].round() - current.b[k][s]).abs();
                    if best.map_or(true, |q| d < q.0) {
                        best = Some((d, k, s, false));
                    }
                }
            }
        }
        let Some((_, k, s, is_rate)) = best else { break };
        let v = if is_rate { current.r[k][s] } else { current.b[k][s] };
        let candidates = if is_rate {
            [nearest_rate(&inst.rates, v), next_lower_rate(&inst.rates, v.min(nearest_rate(&inst.rates, v)) + 1e-15)]
        } else {
            [v.round().max(inst.cells[k][s].floor), v.floor().max(inst.cells[k][s].floor)]
        };
        let mut solved = None;
        for c in candidates {
            if is_rate && c == 0.0 {
                continue;
            }
            let mut trial = pins.clone();
            if is_rate {
                trial[k][s].0 = Some(c);
            } else {
                trial[k][s].1 = Some(c);
            }
            if let Ok(sol) = solve_rll_pinned(inst, &trial, opts, Some(&current)) {
                solved = Some((trial, sol));
                break;
            }
        }
        match solved {
            Some((p, sol)) => {
                pins = p;
                current = sol;
            }
            None => return round_ra(inst, &current),
        }
    }
    let r = current.r.clone();
    let b = current.b.clone();
    let out = finish_discrete(inst, r, b);
    if out.feasible {
        out
    } else {
        round_ra(inst, &current)
    }
}

/// Prices and weights of the slicing market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicModel {
    /// Price of computation per operator.
    pub psi: Vec<f64>,
    /// Price of fronthaul per operator and cell.
    pub beta: Vec<Vec<f64>>,
    /// Revenue per delivered bit per operator.
    pub rho: Vec<f64>,
    pub upsilon_inp: f64,
    pub upsilon: Vec<f64>,
}

impl EconomicModel {
    pub fn uniform(n_ops: usize, n_cells: usize, psi: f64, beta: f64, rho: f64) -> Self {
        Self {
            psi: vec![psi; n_ops],
            beta: vec![vec![beta; n_cells]; n_ops],
            rho: vec![rho; n_ops],
            upsilon_inp: 1.0,
            upsilon: vec![1.0; n_ops],
        }
    }

    pub fn validate(&self, n_ops: usize, n_cells: usize) -> Result<()> {
        if self.psi.len() != n_ops || self.rho.len() != n_ops || self.upsilon.len() != n_ops || self.beta.len() != n_ops {
            return Err(Error::Dimension("one price set per operator is required".into()));
        }
        if self.beta.iter().any(|b| b.len() != n_cells) {
            return Err(Error::Dimension("one fronthaul price per cell is required".into()));
        }
        let all = self.psi.iter().chain(self.rho.iter()).chain(self.beta.iter().flatten());
        if all.clone().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(invalid("prices must be non-negative"));
        }
        Ok(())
    }
}

/// Computation (bips) and per-cell fronthaul (bps) sold to one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub c: f64,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitReport {
    pub inp: Vec<f64>,
    pub op: Vec<f64>,
    pub objective: f64,
}

/// Provider revenue and operator profits for the given slices and per-RE sum
/// rates.
pub fn profits(econ: &EconomicModel, n_re: f64, slices: &[Slice], rates: &[f64]) -> ProfitReport {
    let inp: Vec<f64> = slices
        .iter()
        .enumerate()
        .map(|(o, s)| econ.psi[o] * s.c + s.b.iter().zip(&econ.beta[o]).map(|(b, p)| b * p).sum::<f64>())
        .collect();
    let op: Vec<f64> = (0..slices.len()).map(|o| econ.rho[o] * n_re * rates[o] - inp[o]).collect();
    let objective = econ.upsilon_inp * inp.iter().sum::<f64>() + (0..slices.len()).map(|o| econ.upsilon[o] * op[o]).sum::<f64>();
    ProfitReport { inp, op, objective }
}

/// Achieved over maximum potential profit.
pub fn satisfaction_index(achieved: f64, maximum: f64) -> Result<f64> {
    if !(maximum > 0.0) {
        return Err(invalid("maximum profit must be positive"));
    }
    Ok((achieved / maximum).clamp(0.0, 1.0))
}

/// Channels and ownership of a C-RAN deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CranScenario {
    /// `channels[k][s]`
    pub channels: Vec<Vec<PrbChannel>>,
    /// Operator owning PRB `s` in cell `k`.
    pub owner: Vec<Vec<usize>>,
    pub n_ops: usize,
    pub n_re: f64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CranConfig {
    pub seed: u64,
    pub n_ops: usize,
    pub prbs_per_op: usize,
    pub fading: bool,
    pub n_re: f64,
    pub rates: Vec<f64>,
    pub topology: CranTopologyConfig,
}

impl Default for CranConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_ops: 3,
            prbs_per_op: 2,
            fading: true,
            n_re: RE_PER_PRB_SECOND,
            rates: default_rate_set(),
            topology: CranTopologyConfig::default(),
        }
    }
}

impl CranScenario {
    /// Seven cells with one user per PRB; every user transmits at the same
    /// power and PRB `s` of every cell is reused in all others. Operators own
    /// consecutive blocks of `prbs_per_op` PRBs.
    pub fn generate(cfg: &CranConfig) -> Result<Self> {
        if cfg.n_ops == 0 || cfg.prbs_per_op == 0 || !(cfg.n_re > 0.0) {
            return Err(invalid("operators, PRBs per operator and resource elements must be positive"));
        }
        RateBounds::from_rates(&cfg.rates)?;
        let s_total = cfg.n_ops * cfg.prbs_per_op;
        let topo = CranTopologyConfig { users_per_cell: s_total, ..cfg.topology.clone() };
        let sc = generate_topology(&ScenarioConfig {
            seed: cfg.seed,
            n_subchannels: 1,
            fading: cfg.fading,
            topology: TopologyConfig::Cran(topo.clone()),
        })?;
        let k_cells = sc.n_bs();
        let user = |k: usize, s: usize| k * s_total + s;
        let channels = (0..k_cells)
            .map(|k| {
                (0..s_total)
                    .map(|s| {
                        let d = topo.p_user * sc.gains[k][user(k, s)][0];
                        let i = topo.noise_w
                            + (0..k_cells).filter(|&l| l != k).map(|l| topo.p_user * sc.gains[k][user(l, s)][0]).sum::<f64>();
                        PrbChannel::new(d, i)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let owner = vec![(0..s_total).map(|s| s / cfg.prbs_per_op).collect(); k_cells];
        Ok(Self { channels, owner, n_ops: cfg.n_ops, n_re: cfg.n_re, rates: cfg.rates.clone() })
    }

    pub fn n_cells(&self) -> usize {
        self.channels.len()
    }

    /// Lower-level problem of operator `op` for `slice`.
    pub fn op_instance(&self, op: usize, slice: &Slice, model: &ComplexityModel) -> Result<OpInstance> {
        if slice.b.len() != self.n_cells() {
            return Err(Error::Dimension("slice needs one fronthaul value per cell".into()));
        }
        let cells = (0..self.n_cells())
            .map(|k| (0..self.channels[k].len()).filter(|&s| self.owner[k][s] == op).map(|s| self.channels[k][s]).collect())
            .collect();
        let budget_bits = slice.b.iter().map(|b| b / (2.0 * self.n_re)).collect();
        let mut inst = OpInstance::new(cells, budget_bits, slice.c / self.n_re, *model, self.rates.clone())?;
        for (k, cell) in inst.cells.iter_mut().enumerate() {
            let ids: Vec<usize> = (0..self.channels[k].len()).filter(|&s| self.owner[k][s] == op).collect();
            for (slot, id) in cell.iter_mut().zip(ids) {
                slot.prb = id;
            }
        }
        Ok(inst)
    }

    /// Smallest slice for which the operator's problem is guaranteed feasible.
    pub fn floor_slice(&self, op: usize, model: &ComplexityModel) -> Result<Slice> {
        let probe = Slice { c: 0.0, b: vec![0.0; self.n_cells()] };
        let inst = self.op_instance(op, &probe, model)?;
        Ok(Slice {
            c: inst.floor_effort().max(0.0) * self.n_re * (1.0 + 1e-9),
            b: inst.floor_bits().iter().map(|b| b * 2.0 * self.n_re).collect(),
        })
    }
}

/// Total computation and per-cell fronthaul of the provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub cloud: f64,
    pub fronthaul: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    ForwardDifference,
    DualSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulOptions {
    pub max_iter: usize,
    /// Step in units of the pools, scaled by `1/sqrt(n)`.
    pub step: f64,
    pub gradient: GradientMethod,
    /// Forward-difference step as a fraction of the equal share.
    pub fd_fraction: f64,
    pub rll: RllOptions,
}

impl Default for RulOptions {
    fn default() -> Self {
        Self { max_iter: 100, step: 0.25, gradient: GradientMethod::ForwardDifference, fd_fraction: 1e-3, rll: RllOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulTraceRow {
    pub iteration: usize,
    pub psi: f64,
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulSolution {
    pub slices: Vec<Slice>,
    pub rll: Vec<RllSolution>,
    pub psi: f64,
    pub trace: Vec<RulTraceRow>,
}

impl RulSolution {
    pub fn sum_rate(&self) -> f64 {
        self.rll.iter().map(|s| s.sum_rate).sum()
    }
}

fn psi_of(econ: &EconomicModel, n_re: f64, o: usize, slice: &Slice, rate: f64) -> f64 {
    let g_inp = econ.psi[o] * slice.c + slice.b.iter().zip(&econ.beta[o]).map(|(b, p)| b * p).sum::<f64>();
    (econ.upsilon_inp - econ.upsilon[o]) * g_inp + econ.upsilon[o] * econ.rho[o] * n_re * rate
}

fn project_pool(values: &[f64], floors: &[f64], cap: f64) -> Result<Vec<f64>> {
    let shifted: Vec<f64> = values.iter().zip(floors).map(|(v, f)| v - f).collect();
    let room = cap - floors.iter().sum::<f64>();
    if room < 0.0 {
        return Err(Error::Infeasible(format!("pool of {cap} cannot cover floors of {}", floors.iter().sum::<f64>())));
    }
    Ok(project_capped_simplex(&shifted, room)?.iter().zip(floors).map(|(v, f)| v + f).collect())
}

/// Projected gradient ascent on the operators' slices, keeping the best
/// iterate. Slices start as equal shares.
pub fn solve_rul(sc: &CranScenario, model: &ComplexityModel, econ: &EconomicModel, caps: &Caps, opts: &RulOptions) -> Result<RulSolution> {
    let (o_n, k_n) = (sc.n_ops, sc.n_cells());
    econ.validate(o_n, k_n)?;
    if caps.fronthaul.len() != k_n || !(caps.cloud > 0.0) || caps.fronthaul.iter().any(|&b| !(b > 0.0)) {
        return Err(invalid("caps must be positive with one fronthaul cap per cell"));
    }
    let floors: Vec<Slice> = (0..o_n).map(|o| sc.floor_slice(o, model)).collect::<Result<_>>()?;
    let c_floor: Vec<f64> = floors.iter().map(|f| f.c).collect();
    let b_floor: Vec<Vec<f64>> = (0..k_n).map(|k| floors.iter().map(|f| f.b[k]).collect()).collect();
    let project = |sl: &[Slice]| -> Result<Vec<Slice>> {
        let c = project_pool(&sl.iter().map(|s| s.c).collect::<Vec<_>>(), &c_floor, caps.cloud)?;
        let mut out: Vec<Slice> = c.into_iter().map(|c| Slice { c, b: vec![0.0; k_n] }).collect();
        for k in 0..k_n {
            let b = project_pool(&sl.iter().map(|s| s.b[k]).collect::<Vec<_>>(), &b_floor[k], caps.fronthaul[k])?;
            for (o, v) in b.into_iter().enumerate() {
                out[o].b[k] = v;
            }
        }
        Ok(out)
    };
    let equal: Vec<Slice> = (0..o_n)
        .map(|_| Slice { c: caps.cloud / o_n as f64, b: caps.fronthaul.iter().map(|b| b / o_n as f64).collect() })
        .collect();
    let mut slices = project(&equal)?;
    let mut warm: Vec<Option<RllSolution>> = vec![None; o_n];
    let solve = |o: usize, s: &Slice, w: Option<&RllSolution>| -> Result<RllSolution> {
        let inst = sc.op_instance(o, s, model)?;
        solve_rll_pinned(&inst, &unpinned(&inst), &opts.rll, w)
    };
    let mut best: Option<RulSolution> = None;
    let mut trace = Vec::new();
    for n in 1..=opts.max_iter.max(1) {
        let mut sols = Vec::with_capacity(o_n);
        for o in 0..o_n {
            sols.push(solve(o, &slices[o], warm[o].as_ref())?);
        }
        let psi: f64 = (0..o_n).map(|o| psi_of(econ, sc.n_re, o, &slices[o], sols[o].sum_rate)).sum();
        let sum_rate: f64 = sols.iter().map(|s| s.sum_rate).sum();
        trace.push(RulTraceRow { iteration: n, psi, sum_rate });
        if best.as_ref().map_or(true, |b| psi > b.psi) {
            best = Some(RulSolution { slices: slices.clone(), rll: sols.clone(), psi, trace: Vec::new() });
        }
        if n == opts.max_iter || o_n == 1 && slices[0].c >= caps.cloud * (1.0 - 1e-12) {
            break;
        }
        // Gradient in pool units: column 0 is computation, then one per cell.
        let mut grad = vec![vec![0.0; k_n + 1]; o_n];
        for o in 0..o_n {
            let rate_scale = econ.upsilon[o] * econ.rho[o] * sc.n_re;
            let pay = econ.upsilon_inp - econ.upsilon[o];
            let (dr_dc, dr_db): (f64, Vec<f64>) = match opts.gradient {
                GradientMethod::DualSensitivity => {
                    let (lc, lb) = sols[o].sensitivities();
                    (lc / sc.n_re, lb.iter().map(|v| v / (2.0 * sc.n_re)).collect())
                }
                GradientMethod::ForwardDifference => {
                    let dc = opts.fd_fraction * caps.cloud / o_n as f64;
                    let mut probe = slices[o].clone();
                    probe.c += dc;
                    let gc = (solve(o, &probe, Some(&sols[o]))?.sum_rate - sols[o].sum_rate) / dc;
                    let mut gb = Vec::with_capacity(k_n);
                    for k in 0..k_n {
                        let db = opts.fd_fraction * caps.fronthaul[k] / o_n as f64;
                        let mut probe = slices[o].clone();
                        probe.b[k] += db;
                        gb.push((solve(o, &probe, Some(&sols[o]))?.sum_rate - sols[o].sum_rate) / db);
                    }
                    (gc, gb)
                }
            };
            grad[o][0] = caps.cloud * (pay * econ.psi[o] + rate_scale * dr_dc);
            for k in 0..k_n {
                grad[o][k + 1] = caps.fronthaul[k] * (pay * econ.beta[o][k] + rate_scale * dr_db[k]);
            }
        }
        let scale = grad.iter().flatten().map(|g| g.abs()).fold(0.0, f64::max);
        if !(scale > 0.0) {
            break;
        }
        let eta = opts.step / (n as f64).sqrt() / scale;
        let stepped: Vec<Slice> = (0..o_n)
            .map(|o| Slice {
                c: slices[o].c + eta * grad[o][0] * caps.cloud,
                b: (0..k_n).map(|k| slices[o].b[k] + eta * grad[o][k + 1] * caps.fronthaul[k]).collect(),
            })
            .collect();
        slices = project(&stepped)?;
        warm = sols.into_iter().map(Some).collect();
    }
    let mut out = best.expect("at least one iteration runs");
    out.trace = trace;
    Ok(out)
}

/// Discrete per-operator outcome of a full allocation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub slices: Vec<Slice>,
    pub sum_rates: Vec<f64>,
    pub feasible: bool,
}

impl MethodOutcome {
    pub fn total(&self) -> f64 {
        self.sum_rates.iter().sum()
    }
}

/// Baseline allocation: slices in proportion to each operator's Shannon-limit
/// rate, bits by water-filling capacity then flooring, the highest grid rate
/// below capacity, then rate cuts on the most demanding PRB until the
/// computation slice is met.
pub fn greedy_alloc(sc: &CranScenario, model: &ComplexityModel, caps: &Caps) -> Result<(MethodOutcome, Vec<DiscreteSolution>)> {
    let (o_n, k_n) = (sc.n_ops, sc.n_cells());
    if caps.fronthaul.len() != k_n {
        return Err(Error::Dimension("one fronthaul cap per cell is required".into()));
    }
    let limit = |k: usize, o: usize| -> f64 {
        (0..sc.channels[k].len()).filter(|&s| sc.owner[k][s] == o).map(|s| sc.channels[k][s].capacity_limit()).sum()
    };
    let per_cell: Vec<Vec<f64>> = (0..o_n).map(|o| (0..k_n).map(|k| limit(k, o)).collect()).collect();
    let per_op: Vec<f64> = per_cell.iter().map(|v| v.iter().sum()).collect();
    let total: f64 = per_op.iter().sum();
    let slices: Vec<Slice> = (0..o_n)
        .map(|o| Slice {
            c: caps.cloud * per_op[o] / total,
            b: (0..k_n)
                .map(|k| {
                    let cell_total: f64 = (0..o_n).map(|p| per_cell[p][k]).sum();
                    caps.fronthaul[k] * per_cell[o][k] / cell_total
                })
                .collect(),
        })
        .collect();
    let mut sols = Vec::with_capacity(o_n);
    for o in 0..o_n {
        let inst = sc.op_instance(o, &slices[o], model)?;
        let mut r: PerPrb = Vec::new();
        let mut b: PerPrb = Vec::new();
        for (k, cell) in inst.cells.iter().enumerate() {
            let bits = capacity_waterfill(cell, inst.budget_bits[k]);
            let mut bits: Vec<f64> = bits.iter().map(|v| v.floor()).collect();
            // Lift PRBs to their floors, paying from the richest PRBs.
            for (s, p) in cell.iter().enumerate() {
                bits[s] = if p.servable { bits[s].max(p.floor) } else { 0.0 };
            }
            while bits.iter().sum::<f64>() > inst.budget_bits[k] + 1e-9 {
                let pick = (0..cell.len()).filter(|&s| bits[s] > cell[s].floor).max_by(|&x, &y| bits[x].partial_cmp(&bits[y]).unwrap());
                match pick {
                    Some(s) => bits[s] -= 1.0,
                    None => {
                        // Floors alone overrun the slice: idle the hungriest PRB.
                        match (0..cell.len()).filter(|&s| bits[s] > 0.0).max_by(|&x, &y| bits[x].partial_cmp(&bits[y]).unwrap()) {
                            Some(s) => bits[s] = 0.0,
                            None => break,
                        }
                    }
                }
            }
            r.push(cell.iter().zip(&bits).map(|(p, &bb)| if p.servable && bb > 0.0 { largest_rate_below(&inst.rates, p.ch.capacity(bb)) } else { 0.0 }).collect());
            b.push(bits);
        }
        loop {
            if effort_of(&inst, &r, &b) <= inst.budget_c + 1e-9 * (1.0 + inst.budget_c.abs()) {
                break;
            }
            let mut pick: Option<(f64, usize, usize)> = None;
            for (k, cell) in inst.cells.iter().enumerate() {
                for (s, p) in cell.iter().enumerate() {
                    if r[k][s] > 0.0 {
                        let c = inst.model.effort(r[k][s], p.ch.capacity(b[k][s]));
                        if pick.map_or(true, |q| c > q.0) {
                            pick = Some((c, k, s));
                        }
                    }
                }
            }
            match pick {
                Some((_, k, s)) => r[k][s] = next_lower_rate(&inst.rates, r[k][s]),
                None => break,
            }
        }
        sols.push(finish_discrete(&inst, r, b));
    }
    let outcome = MethodOutcome { slices, sum_rates: sols.iter().map(|s| s.sum_rate).collect(), feasible: sols.iter().all(|s| s.feasible) };
    Ok((outcome, sols))
}

/// Bits maximizing total capacity with no floors: `b = max(0, b where t'(b) = nu)`.
fn capacity_waterfill(cell: &[PrbSlot], budget: f64) -> Vec<f64> {
    let n = cell.len();
    if n == 0 {
        return Vec::new();
    }
    let at = |ch: &PrbChannel, nu: f64| -> f64 {
        let g = |b: f64| ch.capacity_slope(b).ln() - nu.ln();
        let g0 = g(0.0);
        if g0 <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while g(hi) > 0.0 && hi < 1e6 {
            hi *= 2.0;
        }
        illinois_root(g, 0.0, g0, hi, g(hi), 1e-12 * (1.0 + hi))
    };
    let total = |lnu: f64| cell.iter().map(|p| at(&p.ch, lnu.exp())).sum::<f64>() - budget;
    let top = cell.iter().map(|p| p.ch.capacity_slope(0.0)).fold(0.0, f64::max).ln();
    let mut lo = top - 1.0;
    while total(lo) < 0.0 && lo > -700.0 {
        lo -= 4.0;
    }
    let (f_lo, f_hi) = (total(lo), total(top));
    let lnu = illinois_root(total, lo, f_lo, top, f_hi, 1e-13);
    cell.iter().map(|p| at(&p.ch, lnu.exp())).collect()
}

/// Profit operator `op` would earn holding every resource of the provider;
/// the reference for [`satisfaction_index`].
pub fn profit_ceiling(sc: &CranScenario, model: &ComplexityModel, econ: &EconomicModel, caps: &Caps, op: usize, opts: &RllOptions) -> Result<f64> {
    if op >= sc.n_ops {
        return Err(invalid(format!("unknown operator {op}")));
    }
    econ.validate(sc.n_ops, sc.n_cells())?;
    let slice = Slice { c: caps.cloud, b: caps.fronthaul.clone() };
    let rate = solve_rll(&sc.op_instance(op, &slice, model)?, opts)?.sum_rate;
    let pay = econ.psi[op] * slice.c + slice.b.iter().zip(&econ.beta[op]).map(|(b, p)| b * p).sum::<f64>();
    Ok(econ.rho[op] * sc.n_re * rate - pay)
}

/// Relaxed optimum and both roundings at the slices found by [`solve_rul`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedOutcome {
    pub rul: RulSolution,
    pub ir: MethodOutcome,
    pub ra: MethodOutcome,
}

pub fn proposed_alloc(sc: &CranScenario, model: &ComplexityModel, econ: &EconomicModel, caps: &Caps, opts: &RulOptions) -> Result<ProposedOutcome> {
    let rul = solve_rul(sc, model, econ, caps, opts)?;
    let mut ir = Vec::new();
    let mut ra = Vec::new();
    for (o, sol) in rul.rll.iter().enumerate() {
        let inst = sc.op_instance(o, &rul.slices[o], model)?;
        ir.push(round_ir(&inst, sol, &opts.rll));
        ra.push(round_ra(&inst, sol));
    }
    let wrap = |v: &[DiscreteSolution]| MethodOutcome {
        slices: rul.slices.clone(),
        sum_rates: v.iter().map(|s| s.sum_rate).collect(),
        feasible: v.iter().all(|s| s.feasible),
    };
    Ok(ProposedOutcome { ir: wrap(&ir), ra: wrap(&ra), rul })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantization_examples() {
        assert_relative_eq!(quant_noise(2.0, 1.0), quant_const() / 32.0, max_relative = 1e-15);
        assert_relative_eq!(quant_noise(2.0, 1.0), 0.17006, max_relative = 1e-4);
        assert_relative_eq!(quant_noise(3.0, 1.0) * 4.0, quant_noise(2.0, 1.0), max_relative = 1e-15);
        // D = 3, I = 1: Y/I = 4.
        assert_relative_eq!(min_quant_bits_real(3.0, 1.0), 0.5 * ((2.0 * quant_const()).log2() - 1.0), max_relative = 1e-15);
        assert_eq!(min_quant_bits(3.0, 1.0), 2);
        assert_eq!(min_quant_bits(1e-9, 1.0), 1);
        let b = min_quant_bits_real(4.0, 1.0);
        assert_relative_eq!(sinr_with_quant(4.0, 1.0, b), 5f64.sqrt() - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn complexity_examples() {
        let m = ComplexityModel::default();
        assert_relative_eq!(m.a(), 1.0 / 5f64.log2(), max_relative = 1e-15);
        assert_relative_eq!(m.a(), 0.43068, max_relative = 1e-4);
        assert_relative_eq!(m.b(), 1.73697, max_relative = 1e-4);
        assert_relative_eq!(m.effort(1.0, 2.0), m.a() * m.b(), max_relative = 1e-15);
        assert!(m.effort(2.0, 2.0).is_infinite());
        assert!(ComplexityModel::new(0.2, 2.0, 0.1).is_err());
        let ch = PrbChannel::new(4.0, 1.0).unwrap();
        let t = ch.capacity(3.0);
        assert!(decode_complexity(&m, t, 3.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn capacity_inverse_round_trip() {
        let ch = PrbChannel::new(7.0, 0.5).unwrap();
        for b in [1.5, 2.0, 4.25, 7.0] {
            let t = ch.capacity(b);
            assert_relative_eq!(ch.bits_for_capacity(t).unwrap(), b, max_relative = 1e-9);
        }
        assert!(ch.bits_for_capacity(ch.capacity_limit() + 0.1).is_none());
    }

    #[test]
    fn rate_step_limits() {
        let m = ComplexityModel::default();
        let bounds = RateBounds { r_min: 0.1, r_max: 4.0 };
        assert_eq!(optimal_rate_for_capacity(0.0, 3.0, &m, &bounds), 3.0);
        assert_eq!(optimal_rate_for_capacity(0.0, 6.0, &m, &bounds), 4.0);
        // Effort grows with rate only while t - r stays below 2^(B/2).
        assert_relative_eq!(optimal_rate_for_capacity(1e9, 1.5, &m, &bounds), 0.1);
        let r = optimal_rate_for_capacity(0.3, 3.0, &m, &bounds);
        let phi = |x: f64| x - 0.3 * m.effort(x, 3.0);
        for k in 0..3000 {
            let x = 0.1 + k as f64 * 1e-3;
            assert!(phi(x) <= phi(r) + 1e-12);
        }
    }

    #[test]
    fn bits_step_examples() {
        let ch = PrbChannel::new(2.0, 0.1).unwrap();
        let (b, _) = optimal_bits_given_rates(&[ch], &[1.0], 6.0, &[2.0]).unwrap();
        assert_relative_eq!(b[0], 6.0, max_relative = 1e-12);
        let (b, _) = optimal_bits_given_rates(&[ch, ch], &[1.0, 1.0], 9.0, &[2.0, 2.0]).unwrap();
        assert_relative_eq!(b[0], 4.5, max_relative = 1e-8);
        assert_relative_eq!(b[0] + b[1], 9.0, max_relative = 1e-12);
        assert!(optimal_bits_given_rates(&[ch], &[1.0], 1.0, &[2.0]).is_err());
    }

    fn toy() -> OpInstance {
        let cells = vec![
            vec![PrbChannel::new(6e-12, 1e-12).unwrap(), PrbChannel::new(2e-12, 1e-12).unwrap()],
            vec![PrbChannel::new(9e-12, 1e-12).unwrap()],
        ];
        OpInstance::new(cells, vec![12.0, 8.0], 3.0, ComplexityModel::default(), default_rate_set()).unwrap()
    }

    #[test]
    fn rll_meets_budget_and_slack_case() {
        let inst = toy();
        let sol = solve_rll(&inst, &RllOptions::default()).unwrap();
        assert!(sol.effort <= inst.budget_c + 1e-9);
        assert!(sol.lambda > 0.0);
        assert_relative_eq!(sol.effort, inst.budget_c, max_relative = 1e-6);
        for k in 0..2 {
            assert_relative_eq!(sol.b[k].iter().sum::<f64>(), inst.budget_bits[k], max_relative = 1e-9);
        }
        let mut loose = inst.clone();
        loose.budget_c = 1e6;
        loose.budget_bits = vec![200.0, 200.0];
        let sol = solve_rll(&loose, &RllOptions::default()).unwrap();
        assert!(sol.lambda <= 1e-9);
        for (k, cell) in loose.cells.iter().enumerate() {
            for (s, p) in cell.iter().enumerate() {
                let expect = p.ch.capacity(sol.b[k][s]).min(4.238);
                assert!((sol.r[k][s] - expect).abs() < 1e-3, "{} vs {}", sol.r[k][s], expect);
            }
        }
    }

    #[test]
    fn roundings_are_feasible_and_bounded() {
        let inst = toy();
        let sol = solve_rll(&inst, &RllOptions::default()).unwrap();
        let ra = round_ra(&inst, &sol);
        let ir = round_ir(&inst, &sol, &RllOptions::default());
        assert!(ra.feasible && ir.feasible);
        assert!(ra.sum_rate <= sol.sum_rate + 1e-9);
        assert!(ir.sum_rate <= sol.sum_rate + 1e-9);
    }

    #[test]
    fn profit_cancellation() {
        let econ = EconomicModel::uniform(2, 1, 0.3, 0.2, 5.0);
        let slices = vec![Slice { c: 10.0, b: vec![4.0] }, Slice { c: 3.0, b: vec![1.0] }];
        let rep = profits(&econ, 100.0, &slices, &[2.0, 1.0]);
        assert_relative_eq!(rep.objective, 5.0 * 100.0 * 3.0, max_relative = 1e-12);
        let econ0 = EconomicModel::uniform(2, 1, 0.3, 0.2, 0.0);
        let rep = profits(&econ0, 100.0, &slices, &[2.0, 1.0]);
        assert_relative_eq!(rep.op[0], -(0.3 * 10.0 + 0.2 * 4.0), max_relative = 1e-12);
        assert_eq!(satisfaction_index(2.0, 4.0).unwrap(), 0.5);
    }

    #[test]
    fn default_rates_span_lte_range() {
        let r = default_rate_set();
        assert_eq!(r.len(), 27);
        assert_relative_eq!(r[0], 16.0 / 168.0);
        assert_relative_eq!(r[26], 712.0 / 168.0);
    }
}
