//! Uplink power control with base-station association.
//!
//! Every user repeatedly picks the candidate base station with the smallest
//! effective interference and applies a power update function (puf):
//! target tracking (TPC), opportunistic (OPC) or their hybrid (HPC). The HPC
//! adaptation loop lowers the opportunistic weight of supported users so that
//! users below target can be admitted.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scenario::{Scenario, UserKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PufKind {
    Tpc,
    Opc,
    Hpc,
}

/// Per-user parameters of the power update function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PufParams {
    pub kind: PufKind,
    pub alpha: Vec<f64>,
    pub xi: Vec<f64>,
    pub x: f64,
    pub target: Vec<f64>,
    pub p_max: Vec<f64>,
}

/// Opportunistic scale that makes the opportunistic and target-tracking
/// updates both equal `p_max` at the threshold interference.
pub fn auto_xi(p_max: f64, target: f64, x: f64) -> f64 {
    (p_max / target.powf(x)).powf(1.0 / (1.0 - x))
}

impl PufParams {
    pub fn new(kind: PufKind, target: Vec<f64>, p_max: Vec<f64>, x: f64, alpha: Vec<f64>) -> Result<Self> {
        let n = target.len();
        if p_max.len() != n || alpha.len() != n {
            return Err(Error::Dimension("target, p_max and alpha lengths differ".into()));
        }
        if !(x > 0.0 && x <= 0.5) {
            return Err(invalid(format!("exponent x must lie in (0, 0.5], got {x}")));
        }
        if target.iter().chain(&p_max).any(|&v| !(v > 0.0)) || alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(invalid("targets and budgets must be positive, weights non-negative"));
        }
        let xi = target.iter().zip(&p_max).map(|(&t, &p)| auto_xi(p, t, x)).collect();
        Ok(Self { kind, alpha, xi, x, target, p_max })
    }

    /// Same parameters with a uniform target and budget.
    pub fn uniform(kind: PufKind, n: usize, target: f64, p_max: f64, x: f64, alpha: f64) -> Result<Self> {
        Self::new(kind, vec![target; n], vec![p_max; n], x, vec![alpha; n])
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Effective interference above which the target cannot be met.
    pub fn threshold(&self, user: usize) -> f64 {
        self.p_max[user] / self.target[user]
    }

    /// Replaces one user's target and re-derives its opportunistic scale.
    pub fn set_target(&mut self, user: usize, target: f64) {
        self.target[user] = target;
        self.xi[user] = auto_xi(self.p_max[user], target, self.x);
    }

    fn opportunistic(&self, user: usize, r: f64) -> f64 {
        self.xi[user] * r.powf(self.x / (self.x - 1.0))
    }

    /// Update before the power cap is applied.
    pub fn unclamped(&self, user: usize, r: f64) -> f64 {
        let tracking = self.target[user] * r;
        match self.kind {
            PufKind::Tpc => tracking,
            PufKind::Opc => self.opportunistic(user, r),
            PufKind::Hpc => {
                let a = self.alpha[user];
                if a == 0.0 {
                    tracking
                } else if a.is_infinite() {
                    self.opportunistic(user, r)
                } else {
                    (a * self.opportunistic(user, r) + tracking) / (a + 1.0)
                }
            }
        }
    }
}

/// Applies the power update of `user` at effective interference `r`.
pub fn puf_apply(params: &PufParams, user: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("effective interference must be positive, got {r}")));
    }
    if user >= params.len() {
        return Err(invalid(format!("unknown user {user}")));
    }
    Ok(params.unclamped(user, r).min(params.p_max[user]))
}

/// Powers and serving base stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerState {
    pub powers: Vec<f64>,
    pub association: Vec<usize>,
    pub iteration: usize,
}

/// `(sum_{j != i} h[bs][j] p_j + noise[bs]) / (G h[bs][i])`
pub fn effective_interference(s: &Scenario, powers: &[f64], user: usize, bs: usize) -> Result<f64> {
    if user >= s.n_users() || bs >= s.n_bs() || powers.len() != s.n_users() {
        return Err(invalid(format!("unknown user {user} or base station {bs}")));
    }
    let interference: f64 = (0..s.n_users()).filter(|&j| j != user).map(|j| s.gain(bs, j) * powers[j]).sum();
    Ok((interference + s.noise[bs]) / (s.processing_gain * s.gain(bs, user)))
}

/// SINR of `user` at `bs`.
pub fn sinr(s: &Scenario, powers: &[f64], user: usize, bs: usize) -> Result<f64> {
    Ok(powers[user] / effective_interference(s, powers, user, bs)?)
}

/// Candidate sets containing only each user's home base station.
pub fn home_candidates(s: &Scenario) -> Vec<Vec<usize>> {
    s.home_bs.iter().map(|&b| vec![b]).collect()
}

/// Every base station is a candidate for every user.
pub fn all_candidates(s: &Scenario) -> Vec<Vec<usize>> {
    vec![(0..s.n_bs()).collect(); s.n_users()]
}

fn check_candidates(s: &Scenario, candidates: &[Vec<usize>]) -> Result<()> {
    if candidates.len() != s.n_users() {
        return Err(Error::Dimension("one candidate set per user is required".into()));
    }
    if candidates.iter().any(|d| d.is_empty() || d.iter().any(|&b| b >= s.n_bs())) {
        return Err(invalid("candidate sets must be non-empty and reference existing base stations"));
    }
    Ok(())
}

/// Effective interference of every user at every candidate, choosing the
/// smallest (lowest id on ties). Returns `(R, bs)` per user.
pub fn best_interference(s: &Scenario, candidates: &[Vec<usize>], powers: &[f64]) -> Vec<(f64, usize)> {
    let totals: Vec<f64> = (0..s.n_bs())
        .map(|b| (0..s.n_users()).map(|j| s.gain(b, j) * powers[j]).sum())
        .collect();
    (0..s.n_users())
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &b in &candidates[i] {
                let own = s.gain(b, i);
                let r = (totals[b] - own * powers[i] + s.noise[b]) / (s.processing_gain * own);
                if r < best.0 || (r == best.0 && b < best.1) {
                    best = (r, b);
                }
            }
            best
        })
        .collect()
}

/// One synchronous application of the association-and-power map.
pub fn interference_map(s: &Scenario, params: &PufParams, candidates: &[Vec<usize>], powers: &[f64]) -> (Vec<f64>, Vec<usize>) {
    best_interference(s, candidates, powers)
        .into_iter()
        .enumerate()
        .map(|(i, (r, b))| (params.unclamped(i, r).min(params.p_max[i]), b))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000, record_trace: false }
    }
}

/// One row of a per-iteration power-control trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub user: usize,
    pub power: f64,
    pub sinr: f64,
    pub bs: usize,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcOutcome {
    pub state: PowerState,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Joint association and power control iterated to its fixed point.
///
/// Stops when the largest power change is at most `opts.tol`; if
/// `opts.max_iter` updates pass first, the last state is returned with
/// `converged == false`.
pub fn bsa_pc_iterate(
    s: &Scenario,
    params: &PufParams,
    candidates: &[Vec<usize>],
    init: &[f64],
    opts: IterOptions,
) -> Result<PcOutcome> {
    check_candidates(s, candidates)?;
    if params.len() != s.n_users() || init.len() != s.n_users() {
        return Err(Error::Dimension("parameters and initial powers must cover every user".into()));
    }
    let mut p = init.to_vec();
    let mut assoc: Vec<usize> = candidates.iter().map(|d| d[0]).collect();
    let mut trace = Vec::new();
    for it in 1..=opts.max_iter {
        let (next, b) = interference_map(s, params, candidates, &p);
        let diff = next.iter().zip(&p).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        p = next;
        assoc = b;
        if opts.record_trace {
            push_trace(s, params, &p, &assoc, it, &mut trace);
        }
        if diff <= opts.tol {
            return Ok(PcOutcome { state: PowerState { powers: p, association: assoc, iteration: it }, converged: true, trace });
        }
    }
    Ok(PcOutcome { state: PowerState { powers: p, association: assoc, iteration: opts.max_iter }, converged: false, trace })
}

fn push_trace(s: &Scenario, params: &PufParams, p: &[f64], assoc: &[usize], it: usize, trace: &mut Vec<TraceRow>) {
    for (i, &b) in assoc.iter().enumerate() {
        let r = effective_interference(s, p, i, b).unwrap_or(f64::INFINITY);
        trace.push(TraceRow {
            iteration: it,
            user: i,
            power: p[i],
            sinr: p[i] / r,
            bs: b,
            supported: r <= params.threshold(i) * (1.0 + 1e-9),
        });
    }
}

/// Splits users into those meeting their target at `st` and the rest.
///
/// A user is supported when its effective interference does not exceed
/// `p_max / target` (relative slack 1e-9).
pub fn classify_supported(st: &PowerState, params: &PufParams, s: &Scenario) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut sup = Vec::new();
    let mut non = Vec::new();
    for i in 0..s.n_users() {
        let r = effective_interference(s, &st.powers, i, st.association[i])?;
        if r <= params.threshold(i) * (1.0 + 1e-9) {
            sup.push(i);
        } else {
            non.push(i);
        }
    }
    Ok((sup, non))
}

/// Bookkeeping of the adaptation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationState {
    pub supported: Vec<usize>,
    pub non_supported: Vec<usize>,
    pub best_count: usize,
    pub best_alpha: Vec<f64>,
    pub scaling: f64,
    pub inner_cap: usize,
    pub outer_iterations: usize,
    pub hit_outer_cap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions {
    /// Divisor applied to weights of cells that receive a warning.
    pub scaling: f64,
    /// Power updates per outer iteration.
    pub inner_cap: usize,
    pub tol: f64,
    pub max_outer: usize,
    /// Iteration cap of the final run with the best weights.
    pub final_max_iter: usize,
    /// Weights below this are set to zero.
    pub alpha_floor: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self { scaling: 16.0, inner_cap: 5, tol: 1e-8, max_outer: 500, final_max_iter: 100_000, alpha_floor: 1e-9 }
    }
}

/// Per-outer-iteration summary of the adaptation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptTraceRow {
    pub outer: usize,
    pub supported: usize,
    pub warning: bool,
    pub alpha_changes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptOutcome {
    pub state: PowerState,
    pub params: PufParams,
    pub adaptation: AdaptationState,
    pub converged: bool,
    pub trace: Vec<AdaptTraceRow>,
}

/// Initial weights: zero for voice users, `alpha0` for data users.
pub fn initial_alpha(kinds: &[UserKind], alpha0: f64) -> Vec<f64> {
    kinds.iter().map(|k| if *k == UserKind::Data { alpha0 } else { 0.0 }).collect()
}

/// Two-time-scale HPC adaptation.
///
/// Each outer iteration runs at most `inner_cap` HPC updates, counts the
/// supported users and remembers the weights that gave the largest count.
/// Cells with users below target lower the weights of their supported data
/// users so that their powers fall towards the level the weakest user needs;
/// a cell with nothing left to lower broadcasts a warning, on which every
/// other cell divides its data weights by the scaling factor. The loop ends
/// when no weight changes, and the best weights are then run to convergence.
pub fn hpc_adaptation(
    s: &Scenario,
    init: &PufParams,
    kinds: &[UserKind],
    candidates: &[Vec<usize>],
    opts: AdaptOptions,
) -> Result<AdaptOutcome> {
    if kinds.len() != s.n_users() {
        return Err(Error::Dimension("one user kind per user is required".into()));
    }
    if !(opts.scaling > 1.0) || opts.inner_cap == 0 {
        return Err(invalid("scaling must exceed 1 and the inner cap must be positive"));
    }
    let mut params = init.clone();
    params.kind = PufKind::Hpc;
    let n = s.n_users();
    let mut p = vec![0.0; n];
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let inner = IterOptions { tol: opts.tol, max_iter: opts.inner_cap, record_trace: false };
    let mut outer = 0;
    let mut hit_cap = true;
    while outer < opts.max_outer {
        outer += 1;
        let run = bsa_pc_iterate(s, &params, candidates, &p, inner)?;
        p = run.state.powers.clone();
        let (sup, non) = classify_supported(&run.state, &params, s)?;
        if best.as_ref().map_or(true, |(c, _)| sup.len() > *c) {
            best = Some((sup.len(), params.alpha.clone()));
        }
        if sup.is_empty() || non.is_empty() {
            trace.push(AdaptTraceRow { outer, supported: sup.len(), warning: false, alpha_changes: 0 });
            hit_cap = false;
            break;
        }
        let (alpha, warning) = update_weights(s, &params, kinds, &run.state, &non, opts)?;
        let changes = alpha.iter().zip(&params.alpha).filter(|(a, b)| a != b).count();
        trace.push(AdaptTraceRow { outer, supported: sup.len(), warning, alpha_changes: changes });
        if changes == 0 {
            hit_cap = false;
            break;
        }
        params.alpha = alpha;
    }
    let (best_count, best_alpha) = best.unwrap_or((0, params.alpha.clone()));
    // Transient counts can flatter a weight vector, so the candidates are
    // compared at convergence. Zero weights reproduce target tracking.
    let last_alpha = params.alpha.clone();
    let full = IterOptions { tol: opts.tol, max_iter: opts.final_max_iter, record_trace: false };
    let mut chosen: Option<(PcOutcome, Vec<usize>, Vec<usize>, Vec<f64>)> = None;
    for alpha in [best_alpha.clone(), last_alpha, vec![0.0; n]] {
        params.alpha = alpha;
        let run = bsa_pc_iterate(s, &params, candidates, &p, full)?;
        let (sup, non) = classify_supported(&run.state, &params, s)?;
        if chosen.as_ref().map_or(true, |c| sup.len() > c.1.len()) {
            chosen = Some((run, sup, non, params.alpha.clone()));
        }
    }
    let (fin, supported, non_supported, alpha) = chosen.expect("three candidates were run");
    params.alpha = alpha;
    Ok(AdaptOutcome {
        state: fin.state,
        params,
        adaptation: AdaptationState {
            supported,
            non_supported,
            best_count,
            best_alpha,
            scaling: opts.scaling,
            inner_cap: opts.inner_cap,
            outer_iterations: outer,
            hit_outer_cap: hit_cap,
        },
        converged: fin.converged,
        trace,
    })
}

/// Weight update of one outer iteration. Returns the new weights and whether
/// a warning was broadcast.
fn update_weights(
    s: &Scenario,
    params: &PufParams,
    kinds: &[UserKind],
    st: &PowerState,
    non_supported: &[usize],
    opts: AdaptOptions,
) -> Result<(Vec<f64>, bool)> {
    let n = s.n_users();
    let mut is_non = vec![false; n];
    for &i in non_supported {
        is_non[i] = true;
    }
    let r: Vec<f64> = (0..n)
        .map(|i| effective_interference(s, &st.powers, i, st.association[i]))
        .collect::<Result<_>>()?;
    let cells: Vec<Vec<usize>> = (0..s.n_bs())
        .map(|k| (0..n).filter(|&i| st.association[i] == k).collect())
        .collect();
    let is_data = |i: usize| kinds[i] == UserKind::Data;
    let warning = cells.iter().any(|users| {
        users.iter().any(|&i| is_non[i])
            && users.iter().filter(|&&i| !is_non[i] && is_data(i)).all(|&i| params.alpha[i] == 0.0)
    });
    let mut alpha = params.alpha.clone();
    for users in &cells {
        let beta_max = users
            .iter()
            .filter(|&&i| is_non[i])
            .map(|&i| (r[i] - params.threshold(i)) / r[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mixed = beta_max > f64::NEG_INFINITY;
        for &j in users.iter().filter(|&&j| !is_non[j] && is_data(j)) {
            let a = params.alpha[j];
            if a == 0.0 {
                continue;
            }
            let mut next = if mixed {
                let tracking = r[j] * params.target[j];
                let p_exp = (st.powers[j] * (1.0 - beta_max)).max(tracking);
                let denom = params.opportunistic(j, r[j]) - p_exp;
                let g = if denom > 0.0 { ((p_exp - tracking) / denom).clamp(0.0, a) } else { 0.0 };
                if g >= a {
                    a / opts.scaling
                } else {
                    g
                }
            } else {
                a
            };
            if warning {
                next /= opts.scaling;
            }
            if next < opts.alpha_floor {
                next = 0.0;
            }
            alpha[j] = next;
        }
    }
    Ok((alpha, warning))
}

/// Two-phase target plan for one user: first `low`, then `high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSchedule {
    pub user: usize,
    pub phases: Vec<f64>,
}

pub fn hybrid_access_targets(user: usize, low: f64, high: f64) -> Result<TargetSchedule> {
    if !(low > 0.0 && low < high) {
        return Err(invalid(format!("targets must satisfy 0 < low < high, got {low} and {high}")));
    }
    Ok(TargetSchedule { user, phases: vec![low, high] })
}

/// Runs the adaptation once per phase, moving to the next phase only if the
/// scheduled user met the current target.
pub fn run_target_schedule(
    s: &Scenario,
    init: &PufParams,
    kinds: &[UserKind],
    candidates: &[Vec<usize>],
    schedule: &TargetSchedule,
    opts: AdaptOptions,
) -> Result<Vec<AdaptOutcome>> {
    if schedule.user >= s.n_users() {
        return Err(invalid(format!("unknown user {}", schedule.user)));
    }
    let mut out = Vec::new();
    let mut params = init.clone();
    for &target in &schedule.phases {
        params.set_target(schedule.user, target);
        let run = hpc_adaptation(s, &params, kinds, candidates, opts)?;
        let ok = run.adaptation.supported.contains(&schedule.user);
        out.push(run);
        if !ok {
            break;
        }
    }
    Ok(out)
}

/// Fixed-association target-tracking feasibility: spectral radius of the
/// normalized interference matrix below one and the resulting powers within
/// budget. Returns the minimal powers when feasible.
pub fn tpc_feasible_powers(s: &Scenario, params: &PufParams, association: &[usize]) -> Result<Option<Vec<f64>>> {
    use crate::linalg::{solve_linear, spectral_radius, Matrix};
    let n = s.n_users();
    let mut f = Matrix::zeros(n, n);
    let mut u = vec![0.0; n];
    for i in 0..n {
        let b = association[i];
        let d = s.processing_gain * s.gain(b, i);
        for j in 0..n {
            if j != i {
                f[(i, j)] = params.target[i] * s.gain(b, j) / d;
            }
        }
        u[i] = params.target[i] * s.noise[b] / d;
    }
    if spectral_radius(&f, 1e-12)? >= 1.0 {
        return Ok(None);
    }
    let p = solve_linear(&f.identity_minus(), &u)?;
    Ok(if p.iter().zip(&params.p_max).all(|(a, m)| *a >= 0.0 && *a <= *m) { Some(p) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(kind: PufKind, n: usize) -> PufParams {
        PufParams::uniform(kind, n, 6.0, 0.01, 0.5, 1.0).unwrap()
    }

    #[test]
    fn effective_interference_examples() {
        let s = Scenario::from_gains(vec![vec![1.0]], 1.0, 1.0, 1.0).unwrap();
        assert_eq!(effective_interference(&s, &[0.3], 0, 0).unwrap(), 1.0);
        let s = Scenario::from_gains(vec![vec![1.0, 1.0]], 0.0f64.max(1e-300), 1.0, 1.0).unwrap();
        let r = effective_interference(&s, &[0.0, 2.0], 0, 0).unwrap();
        assert_relative_eq!(r, 2.0, max_relative = 1e-12);
        assert!(effective_interference(&s, &[0.0, 2.0], 5, 0).is_err());
    }

    #[test]
    fn puf_examples() {
        let tpc = params(PufKind::Tpc, 1);
        assert_abs_diff_eq!(puf_apply(&tpc, 0, 0.001).unwrap(), 0.006, epsilon = 1e-15);
        assert!(puf_apply(&tpc, 0, 0.0).is_err());
        let mut hpc = params(PufKind::Hpc, 1);
        hpc.alpha[0] = 0.0;
        for r in [1e-5, 1e-4, 1e-3, 0.01] {
            assert_eq!(puf_apply(&hpc, 0, r).unwrap(), puf_apply(&tpc, 0, r).unwrap());
        }
        hpc.alpha[0] = 1e9;
        let opc = params(PufKind::Opc, 1);
        for r in [1e-4, 1e-3, 0.005] {
            assert_relative_eq!(puf_apply(&hpc, 0, r).unwrap(), puf_apply(&opc, 0, r).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn hpc_hits_budget_at_threshold() {
        let p = params(PufKind::Hpc, 1);
        let r_th = p.threshold(0);
        assert_relative_eq!(p.unclamped(0, r_th), p.p_max[0], max_relative = 1e-12);
    }

    #[test]
    fn classify_boundary_is_supported() {
        let s = Scenario::from_gains(vec![vec![1.0]], 0.001, 1.0, 0.01).unwrap();
        let p = PufParams::uniform(PufKind::Tpc, 1, 10.0, 0.01, 0.5, 0.0).unwrap();
        let st = PowerState { powers: vec![0.01], association: vec![0], iteration: 1 };
        let (sup, non) = classify_supported(&st, &p, &s).unwrap();
        assert_eq!((sup, non), (vec![0], vec![]));
        let s2 = Scenario::from_gains(vec![vec![1.0]], 0.002, 1.0, 0.01).unwrap();
        let (sup, _) = classify_supported(&st, &p, &s2).unwrap();
        assert!(sup.is_empty());
    }

    #[test]
    fn tpc_reaches_target_on_feasible_pair() {
        let s = Scenario::from_gains(vec![vec![1e-11, 1e-13], vec![1e-13, 1e-11]], 1e-13, 128.0, 0.01).unwrap();
        let p = params(PufKind::Tpc, 2);
        let cand = vec![vec![0], vec![1]];
        let out = bsa_pc_iterate(&s, &p, &cand, &[0.0, 0.0], IterOptions::default()).unwrap();
        assert!(out.converged);
        let oracle = tpc_feasible_powers(&s, &p, &[0, 1]).unwrap().unwrap();
        for i in 0..2 {
            assert_relative_eq!(out.state.powers[i], oracle[i], max_relative = 1e-6);
            assert_relative_eq!(sinr(&s, &out.state.powers, i, i).unwrap(), 6.0, max_relative = 1e-6);
        }
        let (sup, _) = classify_supported(&out.state, &p, &s).unwrap();
        assert_eq!(sup.len(), 2);
    }

    #[test]
    fn association_prefers_less_loaded_bs() {
        // User 0 sees both stations equally; station 1 also hears a loud user.
        let s = Scenario::from_gains(vec![vec![1e-7, 1e-9], vec![1e-7, 1e-6]], 1e-13, 128.0, 0.01).unwrap();
        let p = PufParams::new(PufKind::Tpc, vec![5.0, 5.0], vec![0.01, 0.01], 0.5, vec![0.0, 0.0]).unwrap();
        let cand = vec![vec![0, 1], vec![1]];
        let out = bsa_pc_iterate(&s, &p, &cand, &[0.0, 0.0], IterOptions::default()).unwrap();
        assert_eq!(out.state.association[0], 0);
        let r0 = effective_interference(&s, &out.state.powers, 0, 0).unwrap();
        let r1 = effective_interference(&s, &out.state.powers, 0, 1).unwrap();
        assert!(r0 < r1);
    }

    #[test]
    fn all_voice_adaptation_equals_tpc() {
        let s = Scenario::from_gains(
            vec![vec![1e-11, 3e-12, 2e-12], vec![2e-12, 1e-11, 5e-12]],
            1e-13,
            128.0,
            0.01,
        )
        .unwrap();
        let kinds = vec![UserKind::Voice; 3];
        let init = PufParams::new(PufKind::Hpc, vec![40.0; 3], vec![0.01; 3], 0.5, initial_alpha(&kinds, 1e6)).unwrap();
        let cand = home_candidates(&s);
        let adapt = hpc_adaptation(&s, &init, &kinds, &cand, AdaptOptions::default()).unwrap();
        let tpc = PufParams { kind: PufKind::Tpc, ..init.clone() };
        let base = bsa_pc_iterate(&s, &tpc, &cand, &[0.0; 3], IterOptions::default()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(adapt.state.powers[i], base.state.powers[i], max_relative = 1e-7);
        }
    }

    #[test]
    fn schedule_stops_after_failed_phase() {
        let s = Scenario::from_gains(vec![vec![1e-9, 1e-6]], 1e-13, 1.0, 0.01).unwrap();
        let kinds = vec![UserKind::Data, UserKind::Data];
        let init = PufParams::new(PufKind::Hpc, vec![5.0, 5.0], vec![0.01; 2], 0.5, initial_alpha(&kinds, 1e6)).unwrap();
        let sched = hybrid_access_targets(0, 1e6, 2e6).unwrap();
        let runs = run_target_schedule(&s, &init, &kinds, &home_candidates(&s), &sched, AdaptOptions::default()).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(hybrid_access_targets(0, 5.0, 5.0).is_err());
    }
}
