//! Two-tier OFDMA subchannel and power allocation.
//!
//! The macrocell keeps a fixed subchannel assignment and protects its users
//! by penalizing femtocell users that interfere with them. Each femtocell
//! gives every one of its users the same number of subchannels, chosen by a
//! weighted matching, and powers follow Foschini-Miljanic updates towards the
//! Pareto-optimal point of the resulting assignment.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{hungarian_min_assign, inverse_q, solve_linear, spectral_radius, Matrix};
use crate::scenario::{Scenario, Tier};

/// QAM constellation sizes and the target bit error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSet {
    pub sizes: Vec<u32>,
    pub ber: f64,
}

impl Default for ModulationSet {
    fn default() -> Self {
        Self { sizes: vec![4, 16, 64, 256, 1024], ber: 1e-3 }
    }
}

fn is_power_of_four(s: u32) -> bool {
    s >= 4 && s.is_power_of_two() && s.trailing_zeros() % 2 == 0
}

/// SINR needed by square `s`-QAM with Gray coding to reach bit error rate `ber`:
/// `[Q^-1(ber / x_s)]^2 / y_s` with `x_s = 2(1 - 1/sqrt(s)) / log2(s)` and
/// `y_s = 3 / (2(s - 1))`.
pub fn qam_target_sinr(s: u32, ber: f64) -> Result<f64> {
    if !is_power_of_four(s) {
        return Err(invalid(format!("constellation size {s} is not a power of 4")));
    }
    let sf = f64::from(s);
    let x = 2.0 * (1.0 - 1.0 / sf.sqrt()) / sf.log2();
    let y = 3.0 / (2.0 * (sf - 1.0));
    let q = inverse_q(ber / x)?;
    Ok(q * q / y)
}

/// Spectral efficiency of one subchannel out of `n` carrying `s`-QAM.
pub fn rate_per_subchannel(s: u32, n: usize) -> f64 {
    f64::from(s).log2() / n as f64
}

/// `(sum r)^2 / (M sum r^2)`.
pub fn fairness_index(rates: &[f64]) -> Result<f64> {
    let sum: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    if rates.is_empty() || sq == 0.0 {
        return Err(invalid("fairness index is undefined when every rate is zero"));
    }
    Ok(sum * sum / (rates.len() as f64 * sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Uplink,
    Downlink,
}

/// Users, cells and per-subchannel gains of a macro-plus-femto network.
/// Cell 0 is the macrocell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmaNetwork {
    pub n_sub: usize,
    pub n_cells: usize,
    pub cell_of: Vec<usize>,
    /// `gains[bs][user][n]`
    pub gains: Vec<Vec<Vec<f64>>>,
    pub noise: f64,
    pub user_p_max: Vec<f64>,
    pub bs_p_max: Vec<f64>,
}

impl OfdmaNetwork {
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        if s.tiers.first() != Some(&Tier::Macro) || s.tiers[1..].iter().any(|t| *t != Tier::Femto) {
            return Err(invalid("expected one macro station followed by femto stations"));
        }
        Ok(Self {
            n_sub: s.n_subchannels(),
            n_cells: s.n_bs(),
            cell_of: s.home_bs.clone(),
            gains: s.gains.clone(),
            noise: s.noise[0],
            user_p_max: s.max_powers.clone(),
            bs_p_max: s.bs_max_powers.clone(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.cell_of.len()
    }

    pub fn users_of(&self, cell: usize) -> Vec<usize> {
        (0..self.n_users()).filter(|&i| self.cell_of[i] == cell).collect()
    }

    pub fn is_macro_user(&self, i: usize) -> bool {
        self.cell_of[i] == 0
    }
}

/// Fixed macro assignment: `sets[i]` lists the subchannels of macro user `i`
/// (empty for femto users).
pub type MacroAssignment = Vec<Vec<usize>>;

/// Gives every macro user `floor(N / M)` consecutive subchannels.
pub fn equal_macro_assignment(net: &OfdmaNetwork) -> MacroAssignment {
    let mues = net.users_of(0);
    let per = if mues.is_empty() { 0 } else { net.n_sub / mues.len() };
    let mut sets = vec![Vec::new(); net.n_users()];
    for (k, &i) in mues.iter().enumerate() {
        sets[i] = (k * per..(k + 1) * per).collect();
    }
    sets
}

/// Macro assignment of `floor(N / M)` subchannels per macro user minimizing
/// the summed noise-limited power fractions `target * noise / (g * p_max)`.
/// Fails when some macro user would still exceed its budget.
pub fn min_power_macro_assignment(net: &OfdmaNetwork, params: &OfdmaParams) -> Result<MacroAssignment> {
    let mues = net.users_of(0);
    let mut sets = vec![Vec::new(); net.n_users()];
    if mues.is_empty() {
        return Ok(sets);
    }
    let per = net.n_sub / mues.len();
    let target = qam_target_sinr(params.qam_macro, params.modulation.ber)?;
    let need = |i: usize, n: usize| target * net.noise / (net.gains[0][i][n] * net.user_p_max[i]);
    let rows: Vec<usize> = mues.iter().flat_map(|&i| std::iter::repeat(i).take(per)).collect();
    if rows.is_empty() {
        return Ok(sets);
    }
    let mut cost = Matrix::zeros(rows.len(), net.n_sub);
    for (a, &i) in rows.iter().enumerate() {
        for n in 0..net.n_sub {
            cost[(a, n)] = need(i, n);
        }
    }
    let assignment = hungarian_min_assign(&cost)?;
    for (a, &n) in assignment.tasks.iter().enumerate() {
        sets[rows[a]].push(n);
    }
    for &i in &mues {
        sets[i].sort_unstable();
        if sets[i].iter().map(|&n| need(i, n)).sum::<f64>() > 1.0 {
            return Err(Error::Infeasible(format!("macro user {i} cannot meet its target within budget")));
        }
    }
    Ok(sets)
}

/// Assignment and powers over users x subchannels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubchannelPlan {
    pub assign: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    /// Subchannels per user, per cell (entry 0 unused).
    pub tau: Vec<usize>,
    /// Constellation used in each cell (entry 0 is the macro constellation).
    pub qam: Vec<u32>,
}

impl SubchannelPlan {
    pub fn subchannels_of(&self, user: usize) -> Vec<usize> {
        (0..self.assign[user].len()).filter(|&n| self.assign[user][n]).collect()
    }
}

/// Every subchannel carries at most one user per serving station.
pub fn exclusivity_holds(assign: &[Vec<bool>], serving: &[usize], n_sub: usize) -> bool {
    (0..n_sub).all(|n| {
        let mut seen = std::collections::BTreeSet::new();
        assign.iter().enumerate().filter(|(_, a)| a[n]).all(|(i, _)| seen.insert(serving[i]))
    })
}

/// Outcome of the Pareto-power check of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub powers: Option<Vec<Vec<f64>>>,
    /// Spectral radius per subchannel.
    pub radii: Vec<f64>,
}

/// Normalized interference matrix and noise vector of the users sharing one
/// subchannel.
fn subchannel_system(net: &OfdmaNetwork, link: Link, users: &[usize], serving: &[usize], targets: &[f64], n: usize) -> (Matrix, Vec<f64>) {
    let m = users.len();
    let mut gh = Matrix::zeros(m, m);
    let mut g = vec![0.0; m];
    for (a, &i) in users.iter().enumerate() {
        let direct = net.gains[serving[i]][i][n];
        for (b, &j) in users.iter().enumerate() {
            if a != b {
                let cross = match link {
                    Link::Uplink => net.gains[serving[i]][j][n],
                    Link::Downlink => net.gains[serving[j]][i][n],
                };
                gh[(a, b)] = targets[i] * cross / direct;
            }
        }
        g[a] = targets[i] * net.noise / direct;
    }
    (gh, g)
}

/// Feasibility of an assignment: on every subchannel the spectral radius of
/// the normalized interference matrix is below one, and the Pareto-optimal
/// powers respect the per-user (uplink) or per-station (downlink) budgets.
pub fn check_sa_feasible(
    net: &OfdmaNetwork,
    link: Link,
    assign: &[Vec<bool>],
    serving: &[usize],
    targets: &[f64],
) -> Result<Feasibility> {
    let u = net.n_users();
    if assign.len() != u || serving.len() != u || targets.len() != u {
        return Err(Error::Dimension("assignment, serving map and targets must cover every user".into()));
    }
    let mut powers = vec![vec![0.0; net.n_sub]; u];
    let mut radii = vec![0.0; net.n_sub];
    let mut feasible = true;
    for n in 0..net.n_sub {
        let users: Vec<usize> = (0..u).filter(|&i| assign[i][n]).collect();
        if users.is_empty() {
            continue;
        }
        let (gh, g) = subchannel_system(net, link, &users, serving, targets, n);
        radii[n] = spectral_radius(&gh, 1e-12)?;
        if radii[n] >= 1.0 {
            feasible = false;
            continue;
        }
        let p = match solve_linear(&gh.identity_minus(), &g) {
            Ok(p) => p,
            Err(Error::Singular { .. }) => {
                feasible = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        if p.iter().any(|&v| v < 0.0) {
            feasible = false;
        }
        for (a, &i) in users.iter().enumerate() {
            powers[i][n] = p[a];
        }
    }
    if feasible {
        feasible = match link {
            Link::Uplink => (0..u).all(|i| powers[i].iter().sum::<f64>() <= net.user_p_max[i] * (1.0 + 1e-12)),
            Link::Downlink => (0..net.n_cells).all(|k| {
                let tot: f64 = (0..u).filter(|&i| serving[i] == k).map(|i| powers[i].iter().sum::<f64>()).sum();
                tot <= net.bs_p_max[k] * (1.0 + 1e-12)
            }),
        };
    }
    Ok(Feasibility { feasible, powers: feasible.then_some(powers), radii })
}

/// Result of the distributed fixed-point iteration `p <- GH p + g`.
#[derive(Debug, Clone, PartialEq)]
pub enum FmOutcome {
    Converged { powers: Vec<f64>, iterations: usize },
    /// Growth certified: the iterate increments do not shrink.
    Diverged { iterations: usize },
    NotConverged { powers: Vec<f64> },
}

/// Foschini-Miljanic iteration from zero power.
///
/// Converges when the largest increment is at most `tol` times the largest
/// power. Divergence is declared once the one- or two-step increment ratios
/// show a spectral radius of at least one.
pub fn foschini_miljanic(gh: &Matrix, g: &[f64], tol: f64, max_iter: usize) -> Result<FmOutcome> {
    if !gh.is_square() || gh.rows() != g.len() {
        return Err(Error::Dimension("system matrix and noise vector disagree".into()));
    }
    let mut p = vec![0.0; g.len()];
    let mut prev_d: Option<Vec<f64>> = None;
    let mut prev2_d: Option<Vec<f64>> = None;
    for it in 1..=max_iter {
        let mut next = gh.mul_vec(&p);
        for (x, gi) in next.iter_mut().zip(g) {
            *x += gi;
        }
        let d: Vec<f64> = next.iter().zip(&p).map(|(a, b)| a - b).collect();
        p = next;
        if p.iter().any(|v| !v.is_finite() || *v > 1e300) {
            return Ok(FmOutcome::Diverged { iterations: it });
        }
        let scale = p.iter().cloned().fold(0.0, f64::max);
        if d.iter().map(|v| v.abs()).fold(0.0, f64::max) <= tol * scale {
            return Ok(FmOutcome::Converged { powers: p, iterations: it });
        }
        let grows = |old: &Option<Vec<f64>>| {
            old.as_ref().map_or(false, |o| {
                o.iter().all(|&v| v > 0.0)
                    && d.iter().zip(o).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min) >= 1.0 - 1e-12
            })
        };
        // Increments near round-off carry no growth information.
        let resolved = d.iter().all(|&v| v > 1e-9 * scale);
        if resolved && (grows(&prev_d) || grows(&prev2_d)) {
            return Ok(FmOutcome::Diverged { iterations: it });
        }
        prev2_d = prev_d.take();
        prev_d = Some(d);
    }
    Ok(FmOutcome::NotConverged { powers: p })
}

/// Scaling applied to a minimum-power estimate: `alpha` while it fits within
/// `p_max / tau`, `alpha * theta` up to `p_max`, `alpha * n_sub * theta` above.
pub fn weight_factor(p_min: f64, p_max: f64, tau: usize, alpha: f64, theta: f64, n_sub: usize) -> Result<f64> {
    if tau == 0 {
        return Err(invalid("weights need at least one subchannel per user"));
    }
    Ok(if p_min <= p_max / tau as f64 {
        alpha
    } else if p_min <= p_max {
        alpha * theta
    } else {
        alpha * n_sub as f64 * theta
    })
}

/// Weight table `w[user][n] = chi * p_min` of one cell's users.
pub fn assignment_weights(
    p_min: &[Vec<f64>],
    p_max: &[f64],
    tau: usize,
    alpha: &[Vec<f64>],
    theta: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    p_min
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(n, &p)| Ok(weight_factor(p, p_max[i], tau, alpha[i][n], theta[i][n], row.len())? * p))
                .collect()
        })
        .collect()
}

/// Knobs of the distributed allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmaParams {
    /// A cell gives up a subchannel per user when its matching weight exceeds
    /// `v` times the summed budgets of its users.
    pub v: f64,
    pub max_iter: usize,
    /// Power convergence tolerance relative to each user's budget.
    pub tol: f64,
    pub qam_macro: u32,
    pub qam_femto: u32,
    pub modulation: ModulationSet,
    pub doubling_cap: f64,
}

impl Default for OfdmaParams {
    fn default() -> Self {
        Self {
            v: 10.0,
            max_iter: 5000,
            tol: 1e-10,
            qam_macro: 4,
            qam_femto: 4,
            modulation: ModulationSet::default(),
            doubling_cap: 2f64.powi(60),
        }
    }
}

/// Result of a distributed allocation run.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmaOutcome {
    pub plan: SubchannelPlan,
    /// Serving station of every user.
    pub serving: Vec<usize>,
    /// Sum over femtocells of the per-user rate `log2(s) tau / N`.
    pub objective: f64,
    /// Per-user rate in each cell (entry 0 unused).
    pub cell_min_rate: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Cells that ran out of candidate settings.
    pub exhausted: Vec<usize>,
    pub trace: Vec<OfdmaTraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmaTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub max_power_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RateMode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone)]
struct CellState {
    users: Vec<usize>,
    /// Candidate `(s, tau)` settings in the order they are tried.
    settings: Vec<(u32, usize)>,
    t: usize,
    keep: bool,
    unused: usize,
    exhausted: bool,
}

impl CellState {
    fn setting(&self) -> (u32, usize) {
        self.settings.get(self.t).copied().unwrap_or((self.settings.first().map_or(4, |s| s.0), 0))
    }
}

struct Engine<'a> {
    net: &'a OfdmaNetwork,
    params: &'a OfdmaParams,
    link: Link,
    mode: RateMode,
    hybrid: bool,
    macro_sets: &'a MacroAssignment,
    serving: Vec<usize>,
    assign: Vec<Vec<bool>>,
    power: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    cells: Vec<CellState>,
    /// Femtocells each macro user may no longer join.
    banned: Vec<Vec<bool>>,
    target_of_qam: std::collections::BTreeMap<u32, f64>,
}

impl<'a> Engine<'a> {
    fn new(
        net: &'a OfdmaNetwork,
        macro_sets: &'a MacroAssignment,
        params: &'a OfdmaParams,
        link: Link,
        mode: RateMode,
        hybrid: bool,
    ) -> Result<Self> {
        let u = net.n_users();
        if macro_sets.len() != u {
            return Err(Error::Dimension("macro assignment must list every user".into()));
        }
        let mut target_of_qam = std::collections::BTreeMap::new();
        for &s in params.modulation.sizes.iter().chain([params.qam_macro, params.qam_femto].iter()) {
            target_of_qam.insert(s, qam_target_sinr(s, params.modulation.ber)?);
        }
        let mut assign = vec![vec![false; net.n_sub]; u];
        for i in 0..u {
            if !net.is_macro_user(i) && !macro_sets[i].is_empty() {
                return Err(invalid("femto users cannot hold macro subchannels"));
            }
            for &n in &macro_sets[i] {
                if n >= net.n_sub {
                    return Err(invalid(format!("subchannel {n} out of range")));
                }
                assign[i][n] = true;
            }
        }
        if !exclusivity_holds(&assign, &net.cell_of, net.n_sub) {
            return Err(invalid("macro assignment reuses a subchannel"));
        }
        let cells = (0..net.n_cells)
            .map(|k| {
                let users = net.users_of(k);
                let max_tau = if users.is_empty() { 0 } else { net.n_sub / users.len() };
                let settings = if k == 0 || users.is_empty() {
                    Vec::new()
                } else {
                    match mode {
                        RateMode::Fixed => (1..=max_tau).rev().map(|t| (params.qam_femto, t)).collect(),
                        RateMode::Adaptive => adaptive_settings(&params.modulation.sizes, max_tau),
                    }
                };
                CellState { users, settings, t: 0, keep: false, unused: 0, exhausted: false }
            })
            .collect();
        Ok(Self {
            net,
            params,
            link,
            mode,
            hybrid,
            macro_sets,
            serving: net.cell_of.clone(),
            assign,
            power: vec![vec![0.0; net.n_sub]; u],
            alpha: vec![vec![1.0; net.n_sub]; u],
            theta: vec![vec![1.0; net.n_sub]; u],
            cells,
            banned: vec![vec![false; net.n_cells]; u],
            target_of_qam,
        })
    }

    fn target(&self, i: usize) -> f64 {
        let s = if self.net.is_macro_user(i) { self.params.qam_macro } else { self.cells[self.net.cell_of[i]].setting().0 };
        self.target_of_qam[&s]
    }

    fn targets(&self) -> Vec<f64> {
        (0..self.net.n_users()).map(|i| self.target(i)).collect()
    }

    /// Interference-plus-noise normalized by the direct gain for user `i`
    /// served by `bs` on subchannel `n`, counting users of other stations.
    fn eff_interference(&self, i: usize, bs: usize, n: usize) -> f64 {
        let g = &self.net.gains;
        let mut sum = self.net.noise;
        for j in 0..self.net.n_users() {
            if j != i && self.assign[j][n] && self.serving[j] != bs {
                sum += self.power[j][n]
                    * match self.link {
                        Link::Uplink => g[bs][j][n],
                        Link::Downlink => g[self.serving[j]][i][n],
                    };
            }
        }
        sum / g[bs][i][n]
    }

    fn p_min_table(&self) -> Vec<Vec<f64>> {
        (0..self.net.n_users())
            .map(|i| {
                let t = self.target(i);
                (0..self.net.n_sub).map(|n| t * self.eff_interference(i, self.serving[i], n)).collect()
            })
            .collect()
    }

    fn double(&self, v: f64) -> f64 {
        (2.0 * v).min(self.params.doubling_cap)
    }

    fn used_by_cell(&self, k: usize) -> Vec<bool> {
        let mut used = vec![false; self.net.n_sub];
        for i in 0..self.net.n_users() {
            if self.serving[i] == k {
                for n in 0..self.net.n_sub {
                    used[n] |= self.assign[i][n];
                }
            }
        }
        used
    }

    /// Admits macro users to femtocells one pair at a time.
    fn admit(&mut self) {
        let p_max = &self.net.user_p_max;
        let g_m = self.target_of_qam[&self.params.qam_macro];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in (0..self.net.n_users()).filter(|&i| self.net.is_macro_user(i) && self.serving[i] == 0) {
                let set = &self.macro_sets[i];
                if set.is_empty() {
                    continue;
                }
                let need = |bs: usize| g_m * set.iter().map(|&n| self.eff_interference(i, bs, n)).sum::<f64>();
                let at_macro = need(0);
                for k in 1..self.net.n_cells {
                    let used = self.used_by_cell(k);
                    if self.banned[i][k] || set.iter().any(|&n| used[n]) || set.len() > self.cells[k].unused {
                        continue;
                    }
                    let p = need(k);
                    if p < at_macro.min(p_max[i]) && best.map_or(true, |b| p < b.0) {
                        best = Some((p, i, k));
                    }
                }
            }
            let Some((_, i, k)) = best else { break };
            self.serving[i] = k;
            self.cells[k].unused -= self.macro_sets[i].len();
            self.cells[k].keep = false;
        }
    }

    /// Power update of the macro tier and penalties on interfering femto users.
    fn macro_step(&mut self, p_min: &[Vec<f64>]) -> bool {
        let mut ok = true;
        let mues: Vec<usize> = (0..self.net.n_users()).filter(|&i| self.net.is_macro_user(i)).collect();
        let groups: Vec<Vec<usize>> = match self.link {
            Link::Uplink => mues.iter().map(|&i| vec![i]).collect(),
            Link::Downlink => {
                let mut g: Vec<Vec<usize>> = vec![Vec::new(); self.net.n_cells];
                for &i in &mues {
                    g[self.serving[i]].push(i);
                }
                g.into_iter().filter(|v| !v.is_empty()).collect()
            }
        };
        for group in groups {
            let budget = match self.link {
                Link::Uplink => self.net.user_p_max[group[0]],
                Link::Downlink => self.net.bs_p_max[self.serving[group[0]]],
            };
            let need: f64 = group.iter().flat_map(|&i| self.macro_sets[i].iter().map(move |&n| (i, n))).map(|(i, n)| p_min[i][n]).sum();
            let beta = need / budget;
            let scale = if beta > 1.0 { 1.0 / beta } else { 1.0 };
            for &i in &group {
                for &n in &self.macro_sets[i] {
                    self.power[i][n] = p_min[i][n] * scale;
                }
            }
            if beta <= 1.0 {
                continue;
            }
            ok = false;
            let mut worst: Option<(f64, usize, usize)> = None;
            for &i in &group {
                for &n in &self.macro_sets[i] {
                    let shared = (0..self.net.n_users()).any(|j| j != i && self.assign[j][n]);
                    if shared && worst.map_or(true, |w| self.power[i][n] > w.0) {
                        worst = Some((self.power[i][n], i, n));
                    }
                }
            }
            let Some((_, i, n)) = worst else { continue };
            let bs = self.serving[i];
            let mut culprit: Option<(f64, usize)> = None;
            for j in 0..self.net.n_users() {
                if j == i || self.net.is_macro_user(j) || !self.assign[j][n] {
                    continue;
                }
                let hurt = self.power[j][n]
                    * match self.link {
                        Link::Uplink => self.net.gains[bs][j][n],
                        Link::Downlink => self.net.gains[self.serving[j]][i][n],
                    };
                if culprit.map_or(true, |c| hurt > c.0) {
                    culprit = Some((hurt, j));
                }
            }
            if let Some((_, m)) = culprit {
                self.alpha[m][n] = self.double(self.alpha[m][n]);
                self.cells[self.net.cell_of[m]].keep = false;
            }
        }
        ok
    }

    /// Matching of one femtocell's users to its free subchannels, advancing
    /// the cell setting once if the matching weight is too large.
    fn reassign(&mut self, k: usize, p_min: &[Vec<f64>]) -> Result<bool> {
        let mut advanced = false;
        loop {
            let (_, tau) = self.cells[k].setting();
            let users = self.cells[k].users.clone();
            for &i in &users {
                self.assign[i].iter_mut().for_each(|a| *a = false);
            }
            if tau == 0 {
                return Ok(advanced);
            }
            let blocked: Vec<bool> = {
                let mut b = vec![false; self.net.n_sub];
                for i in 0..self.net.n_users() {
                    if self.net.is_macro_user(i) && self.serving[i] == k {
                        for &n in &self.macro_sets[i] {
                            b[n] = true;
                        }
                    }
                }
                b
            };
            let free: Vec<usize> = (0..self.net.n_sub).filter(|&n| !blocked[n]).collect();
            if tau * users.len() > free.len() {
                if self.evict(k) {
                    continue;
                }
                self.advance(k);
                advanced = true;
                continue;
            }
            let budget: f64 = users.iter().map(|&i| self.net.user_p_max[i]).sum();
            const EXCLUDED: f64 = 1e250;
            let mut cost = Matrix::zeros(tau * users.len(), free.len());
            for (a, &i) in users.iter().enumerate() {
                for (c, &n) in free.iter().enumerate() {
                    let w = match self.link {
                        Link::Uplink => {
                            weight_factor(p_min[i][n], self.net.user_p_max[i], tau, self.alpha[i][n], self.theta[i][n], self.net.n_sub)?
                                * p_min[i][n]
                        }
                        Link::Downlink => {
                            if p_min[i][n] <= self.net.bs_p_max[k] {
                                self.alpha[i][n] * p_min[i][n]
                            } else {
                                EXCLUDED
                            }
                        }
                    };
                    for copy in 0..tau {
                        cost[(a * tau + copy, c)] = w;
                    }
                }
            }
            let sol = hungarian_min_assign(&cost)?;
            let limit = match self.link {
                Link::Uplink => self.params.v * budget,
                Link::Downlink => self.params.v * self.net.bs_p_max[k],
            };
            if (sol.cost > limit || sol.cost >= EXCLUDED) && !advanced {
                if self.evict(k) {
                    continue;
                }
                self.advance(k);
                advanced = true;
                continue;
            }
            if sol.cost >= EXCLUDED {
                // Still excluded after advancing: keep only admissible pairs.
                for (agent, &c) in sol.tasks.iter().enumerate() {
                    if cost[(agent, c)] < EXCLUDED {
                        self.assign[users[agent / tau]][free[c]] = true;
                    }
                }
                return Ok(advanced);
            }
            for (agent, &c) in sol.tasks.iter().enumerate() {
                self.assign[users[agent / tau]][free[c]] = true;
            }
            return Ok(advanced);
        }
    }

    /// Sends the macro users admitted to `k` back to the macrocell for good.
    fn evict(&mut self, k: usize) -> bool {
        let mut any = false;
        for i in 0..self.net.n_users() {
            if self.net.is_macro_user(i) && self.serving[i] == k {
                self.serving[i] = 0;
                self.banned[i][k] = true;
                any = true;
            }
        }
        if any {
            let (_, tau) = self.cells[k].setting();
            self.cells[k].unused = self.net.n_sub.saturating_sub(tau * self.cells[k].users.len());
        }
        any
    }

    fn advance(&mut self, k: usize) {
        let cell = &mut self.cells[k];
        cell.t += 1;
        cell.keep = false;
        if cell.t >= cell.settings.len() {
            cell.exhausted = true;
        }
        if self.mode == RateMode::Adaptive {
            for &i in &cell.users.clone() {
                self.theta[i].iter_mut().for_each(|v| *v = 1.0);
            }
        }
    }

    /// Power update of one femtocell. Returns true when every budget holds.
    fn femto_power_step(&mut self, k: usize, p_min: &[Vec<f64>]) -> bool {
        let users = self.cells[k].users.clone();
        match self.link {
            Link::Uplink => {
                let mut all_ok = true;
                for &i in &users {
                    let need: f64 = (0..self.net.n_sub).filter(|&n| self.assign[i][n]).map(|n| p_min[i][n]).sum();
                    let beta = need / self.net.user_p_max[i];
                    let scale = if beta > 1.0 { 1.0 / beta } else { 1.0 };
                    for n in 0..self.net.n_sub {
                        self.power[i][n] = if self.assign[i][n] { p_min[i][n] * scale } else { 0.0 };
                    }
                    if beta > 1.0 {
                        all_ok = false;
                        if let Some(n) = argmax_assigned(&self.power[i], &self.assign[i]) {
                            self.theta[i][n] = self.double(self.theta[i][n]);
                        }
                    }
                }
                all_ok
            }
            Link::Downlink => {
                let need: f64 = users
                    .iter()
                    .flat_map(|&i| (0..self.net.n_sub).map(move |n| (i, n)))
                    .filter(|&(i, n)| self.assign[i][n])
                    .map(|(i, n)| p_min[i][n])
                    .sum();
                let beta = need / self.net.bs_p_max[k];
                let scale = if beta > 1.0 { 1.0 / beta } else { 1.0 };
                let mut worst: Option<(f64, usize, usize)> = None;
                for &i in &users {
                    for n in 0..self.net.n_sub {
                        self.power[i][n] = if self.assign[i][n] { p_min[i][n] * scale } else { 0.0 };
                        if self.assign[i][n] && worst.map_or(true, |w| self.power[i][n] > w.0) {
                            worst = Some((self.power[i][n], i, n));
                        }
                    }
                }
                if beta > 1.0 {
                    if let Some((_, i, n)) = worst {
                        self.theta[i][n] = self.double(self.theta[i][n]);
                    }
                    false
                } else {
                    true
                }
            }
        }
    }

    fn objective(&self) -> f64 {
        (1..self.net.n_cells)
            .filter(|&k| !self.cells[k].users.is_empty())
            .map(|k| {
                let (s, tau) = self.cells[k].setting();
                rate_per_subchannel(s, self.net.n_sub) * tau as f64
            })
            .sum()
    }

    fn run(mut self) -> Result<OfdmaOutcome> {
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..self.net.n_cells {
            let (_, tau) = self.cells[k].setting();
            self.cells[k].unused = self.net.n_sub.saturating_sub(tau * self.cells[k].users.len());
        }
        while iterations < self.params.max_iter {
            iterations += 1;
            let before_assign = self.assign.clone();
            let before_serving = self.serving.clone();
            let before_power = self.power.clone();
            let before_t: Vec<usize> = self.cells.iter().map(|c| c.t).collect();
            if self.hybrid {
                self.admit();
            }
            let p_min = self.p_min_table();
            let macro_ok = self.macro_step(&p_min);
            let mut femto_ok = true;
            for k in 1..self.net.n_cells {
                if self.cells[k].users.is_empty() {
                    continue;
                }
                let t0 = self.cells[k].t;
                if !self.cells[k].keep {
                    self.reassign(k, &p_min)?;
                }
                let p_min_k = if self.assign != before_assign { self.p_min_table() } else { p_min.clone() };
                let ok = self.femto_power_step(k, &p_min_k);
                self.cells[k].keep = ok;
                femto_ok &= ok;
                if self.hybrid {
                    let (_, tau) = self.cells[k].setting();
                    if self.cells[k].t != t0 {
                        self.cells[k].unused = self.net.n_sub.saturating_sub(tau * self.cells[k].users.len());
                        for i in 0..self.net.n_users() {
                            if self.net.is_macro_user(i) && self.serving[i] == k {
                                self.serving[i] = 0;
                            }
                        }
                    } else {
                        let used = self.used_by_cell(k).iter().filter(|&&u| u).count();
                        self.cells[k].unused = self.net.n_sub - used;
                    }
                }
            }
            let change = (0..self.net.n_users())
                .flat_map(|i| (0..self.net.n_sub).map(move |n| (i, n)))
                .map(|(i, n)| (self.power[i][n] - before_power[i][n]).abs() / self.net.user_p_max[i])
                .fold(0.0, f64::max);
            trace.push(OfdmaTraceRow { iteration: iterations, objective: self.objective(), max_power_change: change });
            let steady = self.assign == before_assign
                && self.serving == before_serving
                && self.cells.iter().map(|c| c.t).eq(before_t.iter().copied());
            if steady && macro_ok && femto_ok && change <= self.params.tol {
                converged = true;
                break;
            }
        }
        self.finish(iterations, converged, trace)
    }

    /// Replaces powers by the Pareto-optimal point of the final assignment,
    /// backing off the most loaded femtocell until that point exists.
    fn finish(mut self, iterations: usize, converged: bool, trace: Vec<OfdmaTraceRow>) -> Result<OfdmaOutcome> {
        loop {
            let f = check_sa_feasible(self.net, self.link, &self.assign, &self.serving, &self.targets())?;
            if let Some(p) = f.powers {
                self.power = p;
                break;
            }
            let load = |k: usize| -> f64 {
                self.cells[k].users.iter().map(|&i| self.power[i].iter().sum::<f64>() / self.net.user_p_max[i]).sum()
            };
            let victim = (1..self.net.n_cells)
                .filter(|&k| self.cells[k].setting().1 > 0)
                .max_by(|&a, &b| load(a).partial_cmp(&load(b)).unwrap().then(b.cmp(&a)));
            let Some(k) = victim else {
                return Err(Error::Infeasible("macro assignment is infeasible on its own".into()));
            };
            if !self.evict(k) {
                self.advance(k);
            }
            let p_min = self.p_min_table();
            self.reassign(k, &p_min)?;
        }
        let tau: Vec<usize> = self.cells.iter().map(|c| c.setting().1).collect();
        let mut qam: Vec<u32> = self.cells.iter().map(|c| c.setting().0).collect();
        qam[0] = self.params.qam_macro;
        let cell_min_rate = (0..self.net.n_cells)
            .map(|k| if k == 0 { 0.0 } else { rate_per_subchannel(qam[k], self.net.n_sub) * tau[k] as f64 })
            .collect();
        let exhausted = (1..self.net.n_cells).filter(|&k| self.cells[k].exhausted).collect();
        Ok(OfdmaOutcome {
            objective: self.objective(),
            plan: SubchannelPlan { assign: self.assign, power: self.power, tau, qam },
            serving: self.serving,
            cell_min_rate,
            iterations,
            converged,
            exhausted,
            trace,
        })
    }
}

fn argmax_assigned(p: &[f64], a: &[bool]) -> Option<usize> {
    (0..p.len()).filter(|&n| a[n]).fold(None, |best: Option<usize>, n| match best {
        Some(b) if p[b] >= p[n] => Some(b),
        _ => Some(n),
    })
}

/// Candidate `(s, tau)` pairs ordered by decreasing `log2(s) tau`; ties go to
/// the smaller constellation.
pub fn adaptive_settings(sizes: &[u32], max_tau: usize) -> Vec<(u32, usize)> {
    let mut v: Vec<(u32, usize)> = sizes.iter().flat_map(|&s| (1..=max_tau).map(move |t| (s, t))).collect();
    v.sort_by(|a, b| {
        let ra = f64::from(a.0).log2() * a.1 as f64;
        let rb = f64::from(b.0).log2() * b.1 as f64;
        rb.partial_cmp(&ra).unwrap().then(a.0.cmp(&b.0))
    });
    v
}

/// Distributed uplink allocation with a fixed femtocell constellation.
pub fn distributed_uplink_alloc(net: &OfdmaNetwork, macro_sets: &MacroAssignment, params: &OfdmaParams) -> Result<OfdmaOutcome> {
    Engine::new(net, macro_sets, params, Link::Uplink, RateMode::Fixed, false)?.run()
}

/// Distributed uplink allocation choosing each femtocell's constellation and
/// subchannel count from the ordered candidate list.
pub fn adaptive_rate_alloc(net: &OfdmaNetwork, macro_sets: &MacroAssignment, params: &OfdmaParams) -> Result<OfdmaOutcome> {
    Engine::new(net, macro_sets, params, Link::Uplink, RateMode::Adaptive, false)?.run()
}

/// Adaptive-rate allocation where macro users may be served by femtocells
/// with free subchannels. Falls back to closed access when admissions do not
/// pay off.
pub fn hybrid_access_alloc(net: &OfdmaNetwork, macro_sets: &MacroAssignment, params: &OfdmaParams) -> Result<OfdmaOutcome> {
    let open = Engine::new(net, macro_sets, params, Link::Uplink, RateMode::Adaptive, true)?.run()?;
    let closed = adaptive_rate_alloc(net, macro_sets, params)?;
    Ok(if open.objective >= closed.objective { open } else { OfdmaOutcome { iterations: open.iterations + closed.iterations, ..closed } })
}

/// Downlink allocation with per-station power budgets.
pub fn downlink_alloc(net: &OfdmaNetwork, macro_sets: &MacroAssignment, params: &OfdmaParams) -> Result<OfdmaOutcome> {
    Engine::new(net, macro_sets, params, Link::Downlink, RateMode::Fixed, false)?.run()
}

/// Number of equal-share assignments of one cell with `m` users over `n`
/// subchannels: `sum_tau n! / ((tau!)^m (n - m tau)!)`.
pub fn equal_share_count(n: usize, m: usize) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    if m == 0 {
        return 1.0;
    }
    (0..=n / m).map(|t| fact(n) / (fact(t).powi(m as i32) * fact(n - m * t))).sum()
}

const ENUMERATION_GUARD: f64 = 1e6;

/// All ordered tuples of disjoint `tau`-subsets of `0..n`, one per user.
fn equal_share_assignments(n: usize, m: usize, tau: usize) -> Vec<Vec<Vec<usize>>> {
    fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        if pool.len() < k {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (idx, &first) in pool.iter().enumerate() {
            for mut rest in subsets(&pool[idx + 1..], k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    fn rec(pool: Vec<usize>, m: usize, tau: usize, acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for s in subsets(&pool, tau) {
            let rest: Vec<usize> = pool.iter().copied().filter(|x| !s.contains(x)).collect();
            acc.push(s);
            rec(rest, m, tau, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec((0..n).collect(), m, tau, &mut Vec::new(), &mut out);
    out
}

/// Best femtocell assignment by exhaustive search over equal-share
/// assignments, tried in order of decreasing total subchannels per user.
pub fn exhaustive_optimal(net: &OfdmaNetwork, macro_sets: &MacroAssignment, params: &OfdmaParams) -> Result<(SubchannelPlan, f64)> {
    let femtos: Vec<usize> = (1..net.n_cells).filter(|&k| !net.users_of(k).is_empty()).collect();
    let total: f64 = femtos.iter().map(|&k| equal_share_count(net.n_sub, net.users_of(k).len())).product();
    if total > ENUMERATION_GUARD {
        return Err(Error::TooLarge { count: total, limit: ENUMERATION_GUARD });
    }
    let t_m = qam_target_sinr(params.qam_macro, params.modulation.ber)?;
    let t_f = qam_target_sinr(params.qam_femto, params.modulation.ber)?;
    let targets: Vec<f64> = (0..net.n_users()).map(|i| if net.is_macro_user(i) { t_m } else { t_f }).collect();
    let users: Vec<Vec<usize>> = femtos.iter().map(|&k| net.users_of(k)).collect();
    let max_tau: Vec<usize> = users.iter().map(|u| net.n_sub / u.len()).collect();
    let mut tau_vectors: Vec<Vec<usize>> = vec![Vec::new()];
    for &mt in &max_tau {
        tau_vectors = tau_vectors
            .into_iter()
            .flat_map(|v| (0..=mt).map(move |t| {
                let mut w = v.clone();
                w.push(t);
                w
            }))
            .collect();
    }
    tau_vectors.sort_by(|a, b| b.iter().sum::<usize>().cmp(&a.iter().sum::<usize>()).then(b.cmp(a)));
    let mut base = vec![vec![false; net.n_sub]; net.n_users()];
    for (i, set) in macro_sets.iter().enumerate() {
        for &n in set {
            base[i][n] = true;
        }
    }
    let r_f = rate_per_subchannel(params.qam_femto, net.n_sub);
    for taus in tau_vectors {
        let options: Vec<Vec<Vec<Vec<usize>>>> = taus
            .iter()
            .zip(&users)
            .map(|(&t, u)| equal_share_assignments(net.n_sub, u.len(), t))
            .collect();
        let mut idx = vec![0usize; options.len()];
        loop {
            let mut assign = base.clone();
            for (c, opts) in options.iter().enumerate() {
                for (slot, &i) in users[c].iter().enumerate() {
                    for &n in &opts[idx[c]][slot] {
                        assign[i][n] = true;
                    }
                }
            }
            let f = check_sa_feasible(net, Link::Uplink, &assign, &net.cell_of, &targets)?;
            if let Some(power) = f.powers {
                let mut tau = vec![0; net.n_cells];
                let mut qam = vec![params.qam_femto; net.n_cells];
                qam[0] = params.qam_macro;
                for (c, &k) in femtos.iter().enumerate() {
                    tau[k] = taus[c];
                }
                let objective = r_f * taus.iter().sum::<usize>() as f64;
                return Ok((SubchannelPlan { assign, power, tau, qam }, objective));
            }
            let mut c = 0;
            loop {
                if c == idx.len() {
                    break;
                }
                idx[c] += 1;
                if idx[c] < options[c].len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == idx.len() {
                break;
            }
        }
    }
    Err(Error::Infeasible("macro assignment is infeasible on its own".into()))
}
