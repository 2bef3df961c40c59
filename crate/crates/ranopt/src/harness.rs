//! Monte Carlo experiments: one swept parameter, a list of seeds and a
//! parameter block per study. Results are long-format rows of
//! `(sweep, seed, metric, value)` plus per-sweep means.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cranvirt::{
    greedy_alloc, profits, proposed_alloc, Caps, ComplexityModel, CranConfig, CranScenario, EconomicModel, ProfitReport,
    RulOptions, RulTraceRow, Slice,
};
use crate::error::{invalid, Error, Result};
use crate::ofdma::{
    adaptive_rate_alloc, distributed_uplink_alloc, downlink_alloc, equal_macro_assignment, exhaustive_optimal,
    hybrid_access_alloc, min_power_macro_assignment, MacroAssignment, OfdmaNetwork, OfdmaOutcome, OfdmaParams,
};
use crate::powerctl::{
    all_candidates, bsa_pc_iterate, classify_supported, hpc_adaptation, home_candidates, initial_alpha, AdaptOptions,
    AdaptOutcome, IterOptions, PcOutcome, PufKind, PufParams, TraceRow,
};
use crate::rng::substream;
use crate::scenario::{generate_topology, HetNetConfig, Scenario, ScenarioConfig, TopologyConfig, UserKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chapter {
    Ch3,
    Ch4,
    Ch8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: String,
    pub values: Vec<f64>,
}

/// Base-station candidates offered to every user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidates {
    Home,
    All,
}

/// Power control on a single-channel macro/femto network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ch3Params {
    pub network: HetNetConfig,
    pub fading: bool,
    pub target_sinr: f64,
    pub x: f64,
    pub alpha0: f64,
    /// Users drawn at random to be voice users; the rest carry data.
    pub n_voice: usize,
    pub candidates: Candidates,
    pub scaling: f64,
    pub inner_cap: usize,
    pub max_outer: usize,
}

impl Default for Ch3Params {
    fn default() -> Self {
        Self {
            network: HetNetConfig::default(),
            fading: false,
            target_sinr: 5.0,
            x: 0.5,
            alpha0: 1e6,
            n_voice: 8,
            candidates: Candidates::All,
            scaling: 16.0,
            inner_cap: 5,
            max_outer: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ch4Method {
    Distributed,
    Adaptive,
    Hybrid,
    Downlink,
}

impl Ch4Method {
    pub fn name(self) -> &'static str {
        match self {
            Ch4Method::Distributed => "distributed",
            Ch4Method::Adaptive => "adaptive",
            Ch4Method::Hybrid => "hybrid",
            Ch4Method::Downlink => "downlink",
        }
    }
}

/// Femtocell subchannel and power allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ch4Params {
    pub network: HetNetConfig,
    pub n_sub: usize,
    pub fading: bool,
    pub ofdma: OfdmaParams,
    pub macro_plan: MacroPlan,
    pub methods: Vec<Ch4Method>,
    /// Also report the exhaustive optimum of the fixed-rate problem.
    pub exhaustive: bool,
}

impl Default for Ch4Params {
    fn default() -> Self {
        Self {
            network: HetNetConfig {
                macro_radius: 200.0,
                femto_radius: 30.0,
                n_mue: 4,
                n_femto: 4,
                femto_pl: (25.0, 45.0),
                wall_loss_db: 5.0,
                noise_w: 1e-16,
                ..HetNetConfig::default()
            },
            n_sub: 16,
            fading: true,
            ofdma: OfdmaParams::default(),
            macro_plan: MacroPlan::MinPower,
            methods: vec![Ch4Method::Distributed],
            exhaustive: false,
        }
    }
}

/// Subchannels handed to macro users before the femtocells allocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroPlan {
    /// Consecutive equal blocks.
    Equal,
    /// Equal counts placed on each user's strongest subchannels.
    MinPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ch8Method {
    Relaxed,
    Ir,
    Ra,
    Greedy,
}

impl Ch8Method {
    pub fn name(self) -> &'static str {
        match self {
            Ch8Method::Relaxed => "relaxed",
            Ch8Method::Ir => "ir",
            Ch8Method::Ra => "ra",
            Ch8Method::Greedy => "greedy",
        }
    }
}

/// C-RAN slicing among operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ch8Params {
    pub cran: CranConfig,
    pub model: ComplexityModel,
    /// Cloud computation cap (bips).
    pub cloud: f64,
    /// Fronthaul cap of every cell (bps).
    pub fronthaul: f64,
    pub psi: f64,
    pub beta: f64,
    pub rho: f64,
    pub upsilon_inp: f64,
    pub upsilon: f64,
    pub rul: RulOptions,
    pub methods: Vec<Ch8Method>,
}

impl Default for Ch8Params {
    fn default() -> Self {
        Self {
            cran: CranConfig::default(),
            model: ComplexityModel::default(),
            cloud: 2e7,
            fronthaul: 1.5e7,
            psi: 1e-7,
            beta: 1e-7,
            rho: 1e-5,
            upsilon_inp: 1.0,
            upsilon: 1.0,
            rul: RulOptions::default(),
            methods: vec![Ch8Method::Relaxed, Ch8Method::Ir, Ch8Method::Ra, Ch8Method::Greedy],
        }
    }
}

impl Ch8Params {
    pub fn economics(&self, n_cells: usize) -> EconomicModel {
        let n_ops = self.cran.n_ops;
        EconomicModel {
            upsilon_inp: self.upsilon_inp,
            upsilon: vec![self.upsilon; n_ops],
            ..EconomicModel::uniform(n_ops, n_cells, self.psi, self.beta, self.rho)
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub chapter: Chapter,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub sweep: Sweep,
    #[serde(default)]
    pub ch3: Ch3Params,
    #[serde(default)]
    pub ch4: Ch4Params,
    #[serde(default)]
    pub ch8: Ch8Params,
}

/// Parameter block of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum PointParams {
    Ch3(Ch3Params),
    Ch4(Ch4Params),
    Ch8(Ch8Params),
}

fn as_count(variable: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(invalid(format!("sweep variable {variable} takes non-negative integers, got {v}")))
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        for &v in &self.sweep.values {
            self.point(v).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Parameters with the swept variable set to `value`.
    pub fn point(&self, value: f64) -> Result<PointParams> {
        let var = self.sweep.variable.as_str();
        let unknown = || invalid(format!("unknown sweep variable {var:?} for {:?}", self.chapter));
        match self.chapter {
            Chapter::Ch3 => {
                let mut p = self.ch3.clone();
                match var {
                    "target_sinr" => p.target_sinr = value,
                    "x" => p.x = value,
                    "alpha0" => p.alpha0 = value,
                    "n_mue" => p.network.n_mue = as_count(var, value)?,
                    "n_femto" => p.network.n_femto = as_count(var, value)?,
                    "n_voice" => p.n_voice = as_count(var, value)?,
                    "p_max" => {
                        p.network.mue_p_max = value;
                        p.network.fue_p_max = value;
                    }
                    _ => return Err(unknown()),
                }
                Ok(PointParams::Ch3(p))
            }
            Chapter::Ch4 => {
                let mut p = self.ch4.clone();
                match var {
                    "fue_p_max" => p.network.fue_p_max = value,
                    "mue_p_max" => p.network.mue_p_max = value,
                    "n_sub" => p.n_sub = as_count(var, value)?,
                    "n_mue" => p.network.n_mue = as_count(var, value)?,
                    "n_femto" => p.network.n_femto = as_count(var, value)?,
                    "v" => p.ofdma.v = value,
                    _ => return Err(unknown()),
                }
                Ok(PointParams::Ch4(p))
            }
            Chapter::Ch8 => {
                let mut p = self.ch8.clone();
                match var {
                    "cloud" => p.cloud = value,
                    "fronthaul" => p.fronthaul = value,
                    "prbs_per_op" => p.cran.prbs_per_op = as_count(var, value)?,
                    "n_ops" => p.cran.n_ops = as_count(var, value)?,
                    "psi" => p.psi = value,
                    "beta" => p.beta = value,
                    "rho" => p.rho = value,
                    _ => return Err(unknown()),
                }
                Ok(PointParams::Ch8(p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sweep: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep: f64,
    pub metric: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub name: String,
    pub variable: String,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentReport {
    /// Report whose aggregates are the means of `rows` per sweep value and
    /// metric, in order of first appearance.
    pub fn from_rows(name: &str, variable: &str, rows: Vec<ReportRow>) -> Self {
        let mut order: Vec<(u64, String)> = Vec::new();
        let mut acc: BTreeMap<(u64, String), (f64, f64, usize)> = BTreeMap::new();
        for r in &rows {
            let key = (r.sweep.to_bits(), r.metric.clone());
            let e = acc.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (r.sweep, 0.0, 0)
            });
            e.1 += r.value;
            e.2 += 1;
        }
        let aggregates = order
            .into_iter()
            .map(|key| {
                let (sweep, sum, count) = acc[&key];
                AggregateRow { sweep, metric: key.1, mean: sum / count as f64, count }
            })
            .collect();
        Self { name: name.to_string(), variable: variable.to_string(), rows, aggregates }
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric.clone());
            }
        }
        out
    }

    /// Per-seed values of `metric` at `sweep`, in seed order.
    pub fn values(&self, sweep: f64, metric: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.sweep == sweep && r.metric == metric).map(|r| r.value).collect()
    }

    pub fn mean(&self, sweep: f64, metric: &str) -> Option<f64> {
        self.aggregates.iter().find(|a| a.sweep == sweep && a.metric == metric).map(|a| a.mean)
    }
}

/// Worker count from `RANOPT_THREADS`, or rayon's default when unset.
pub fn worker_count() -> Result<Option<usize>> {
    match std::env::var("RANOPT_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("RANOPT_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

/// Runs every `(sweep value, seed)` pair of `spec` on a bounded worker pool.
/// Rows come back in sweep-then-seed order whatever the completion order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> =
        spec.sweep.values.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<(String, f64)>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, seed)| {
                spec.point(v).and_then(|p| run_point(&p, seed)).map_err(|e| Error::Experiment {
                    sweep: v,
                    seed,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (&(sweep, seed), res) in jobs.iter().zip(results) {
        for (metric, value) in res? {
            rows.push(ReportRow { sweep, seed, metric, value });
        }
    }
    Ok(ExperimentReport::from_rows(&spec.name, &spec.sweep.variable, rows))
}

/// Metrics of one seed at one sweep point.
pub fn run_point(params: &PointParams, seed: u64) -> Result<Vec<(String, f64)>> {
    match params {
        PointParams::Ch3(p) => Ok(run_ch3(p, seed)?.metrics()),
        PointParams::Ch4(p) => Ok(run_ch4(p, seed)?.metrics()),
        PointParams::Ch8(p) => Ok(run_ch8(p, seed)?.metrics()),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Target tracking, opportunistic updates and adapted hybrid control on the
/// same network.
#[derive(Debug, Clone)]
pub struct Ch3Run {
    pub scenario: Scenario,
    pub kinds: Vec<UserKind>,
    pub tpc: PcOutcome,
    pub tpc_supported: Vec<usize>,
    pub opc: PcOutcome,
    pub opc_supported: Vec<usize>,
    pub hpc: AdaptOutcome,
}

impl Ch3Run {
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let power = |p: &[f64]| p.iter().sum::<f64>();
        vec![
            ("supported_tpc".into(), self.tpc_supported.len() as f64),
            ("supported_opc".into(), self.opc_supported.len() as f64),
            ("supported_hpc".into(), self.hpc.adaptation.supported.len() as f64),
            ("power_tpc".into(), power(&self.tpc.state.powers)),
            ("power_opc".into(), power(&self.opc.state.powers)),
            ("power_hpc".into(), power(&self.hpc.state.powers)),
            ("converged_tpc".into(), flag(self.tpc.converged)),
            ("converged_hpc".into(), flag(self.hpc.converged)),
            ("outer_iterations".into(), self.hpc.adaptation.outer_iterations as f64),
        ]
    }
}

struct Ch3Setup {
    scenario: Scenario,
    kinds: Vec<UserKind>,
    candidates: Vec<Vec<usize>>,
    base: PufParams,
    opts: AdaptOptions,
}

fn ch3_setup(p: &Ch3Params, seed: u64) -> Result<Ch3Setup> {
    let s = generate_topology(&ScenarioConfig {
        seed,
        n_subchannels: 1,
        fading: p.fading,
        topology: TopologyConfig::Hetnet(p.network.clone()),
    })?;
    let n = s.n_users();
    let mut kinds = vec![UserKind::Data; n];
    for i in sample(&mut substream(seed, "voice"), n, p.n_voice.min(n)) {
        kinds[i] = UserKind::Voice;
    }
    let candidates = match p.candidates {
        Candidates::Home => home_candidates(&s),
        Candidates::All => all_candidates(&s),
    };
    let base = PufParams::new(PufKind::Hpc, vec![p.target_sinr; n], s.max_powers.clone(), p.x, initial_alpha(&kinds, p.alpha0))?;
    let opts = AdaptOptions { scaling: p.scaling, inner_cap: p.inner_cap, max_outer: p.max_outer, ..AdaptOptions::default() };
    Ok(Ch3Setup { scenario: s, kinds, candidates, base, opts })
}

/// Update rule traced by [`ch3_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ch3Rule {
    Fixed(PufKind),
    /// HPC with weights from the adaptation loop.
    Adapted,
}

/// Per-iteration trace of one rule run from zero power.
pub fn ch3_trace(p: &Ch3Params, seed: u64, rule: Ch3Rule) -> Result<Vec<TraceRow>> {
    let Ch3Setup { scenario: s, kinds, candidates, base, opts } = ch3_setup(p, seed)?;
    let params = match rule {
        Ch3Rule::Fixed(kind) => PufParams { kind, ..base },
        Ch3Rule::Adapted => hpc_adaptation(&s, &base, &kinds, &candidates, opts)?.params,
    };
    let it = IterOptions { record_trace: true, ..IterOptions::default() };
    Ok(bsa_pc_iterate(&s, &params, &candidates, &vec![0.0; s.n_users()], it)?.trace)
}

pub fn run_ch3(p: &Ch3Params, seed: u64) -> Result<Ch3Run> {
    let Ch3Setup { scenario: s, kinds, candidates, base, opts } = ch3_setup(p, seed)?;
    let n = s.n_users();
    let zeros = vec![0.0; n];
    let fixed = |kind: PufKind| -> Result<(PcOutcome, Vec<usize>)> {
        let params = PufParams { kind, ..base.clone() };
        let out = bsa_pc_iterate(&s, &params, &candidates, &zeros, IterOptions::default())?;
        let (sup, _) = classify_supported(&out.state, &params, &s)?;
        Ok((out, sup))
    };
    let (tpc, tpc_supported) = fixed(PufKind::Tpc)?;
    let (opc, opc_supported) = fixed(PufKind::Opc)?;
    let hpc = hpc_adaptation(&s, &base, &kinds, &candidates, opts)?;
    Ok(Ch3Run { scenario: s, kinds, tpc, tpc_supported, opc, opc_supported, hpc })
}

#[derive(Debug, Clone)]
pub struct Ch4Run {
    pub network: OfdmaNetwork,
    pub outcomes: Vec<(Ch4Method, OfdmaOutcome)>,
    pub optimum: Option<f64>,
}

impl Ch4Run {
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (m, o) in &self.outcomes {
            let femto_min = o.cell_min_rate.iter().skip(1).copied().fold(f64::INFINITY, f64::min);
            let name = m.name();
            out.push((format!("{name}_objective"), o.objective));
            out.push((format!("{name}_min_femto_rate"), if femto_min.is_finite() { femto_min } else { 0.0 }));
            out.push((format!("{name}_iterations"), o.iterations as f64));
            out.push((format!("{name}_converged"), flag(o.converged)));
        }
        if let Some(v) = self.optimum {
            out.push(("optimal_objective".into(), v));
        }
        out
    }
}

/// OFDMA network and macro subchannel plan of one seed.
pub fn ch4_network(p: &Ch4Params, seed: u64) -> Result<(OfdmaNetwork, MacroAssignment)> {
    let s = generate_topology(&ScenarioConfig {
        seed,
        n_subchannels: p.n_sub,
        fading: p.fading,
        topology: TopologyConfig::Hetnet(p.network.clone()),
    })?;
    let net = OfdmaNetwork::from_scenario(&s)?;
    let sets = match p.macro_plan {
        MacroPlan::Equal => equal_macro_assignment(&net),
        MacroPlan::MinPower => min_power_macro_assignment(&net, &p.ofdma)?,
    };
    Ok((net, sets))
}

pub fn run_ch4(p: &Ch4Params, seed: u64) -> Result<Ch4Run> {
    let (net, sets) = ch4_network(p, seed)?;
    let mut outcomes = Vec::with_capacity(p.methods.len());
    for &m in &p.methods {
        let o = match m {
            Ch4Method::Distributed => distributed_uplink_alloc(&net, &sets, &p.ofdma)?,
            Ch4Method::Adaptive => adaptive_rate_alloc(&net, &sets, &p.ofdma)?,
            Ch4Method::Hybrid => hybrid_access_alloc(&net, &sets, &p.ofdma)?,
            Ch4Method::Downlink => downlink_alloc(&net, &sets, &p.ofdma)?,
        };
        outcomes.push((m, o));
    }
    let optimum = if p.exhaustive { Some(exhaustive_optimal(&net, &sets, &p.ofdma)?.1) } else { None };
    Ok(Ch4Run { network: net, outcomes, optimum })
}

/// Result of one allocation method on a C-RAN instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ch8MethodRun {
    pub method: Ch8Method,
    pub slices: Vec<Slice>,
    pub sum_rates: Vec<f64>,
    pub feasible: bool,
    pub profit: ProfitReport,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Ch8Run {
    pub scenario: CranScenario,
    pub methods: Vec<Ch8MethodRun>,
    /// Slicing iterations; empty when only the greedy method ran.
    pub trace: Vec<RulTraceRow>,
}

impl Ch8Run {
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for m in &self.methods {
            let name = m.method.name();
            out.push((format!("{name}_sum_rate"), m.sum_rates.iter().sum()));
            out.push((format!("{name}_objective"), m.profit.objective));
            out.push((format!("{name}_feasible"), flag(m.feasible)));
        }
        out
    }

    pub fn method(&self, m: Ch8Method) -> Option<&Ch8MethodRun> {
        self.methods.iter().find(|r| r.method == m)
    }
}

pub fn run_ch8(p: &Ch8Params, seed: u64) -> Result<Ch8Run> {
    let sc = CranScenario::generate(&CranConfig { seed, ..p.cran.clone() })?;
    let econ = p.economics(sc.n_cells());
    let caps = Caps { cloud: p.cloud, fronthaul: vec![p.fronthaul; sc.n_cells()] };
    let needs_rul = p.methods.iter().any(|m| *m != Ch8Method::Greedy);
    let proposed = if needs_rul { Some(proposed_alloc(&sc, &p.model, &econ, &caps, &p.rul)?) } else { None };
    let mut methods = Vec::with_capacity(p.methods.len());
    let mut trace = Vec::new();
    for &m in &p.methods {
        let (slices, sum_rates, feasible, iterations) = match (m, &proposed) {
            (Ch8Method::Greedy, _) => {
                let (g, _) = greedy_alloc(&sc, &p.model, &caps)?;
                (g.slices, g.sum_rates, g.feasible, 0)
            }
            (_, Some(pr)) => {
                trace.clone_from(&pr.rul.trace);
                let iters = pr.rul.trace.len();
                match m {
                    Ch8Method::Relaxed => (pr.rul.slices.clone(), pr.rul.rll.iter().map(|s| s.sum_rate).collect(), true, iters),
                    Ch8Method::Ir => (pr.ir.slices.clone(), pr.ir.sum_rates.clone(), pr.ir.feasible, iters),
                    _ => (pr.ra.slices.clone(), pr.ra.sum_rates.clone(), pr.ra.feasible, iters),
                }
            }
            _ => unreachable!("slicing runs whenever a non-greedy method is requested"),
        };
        let profit = profits(&econ, sc.n_re, &slices, &sum_rates);
        methods.push(Ch8MethodRun { method: m, slices, sum_rates, feasible, profit, iterations });
    }
    Ok(Ch8Run { scenario: sc, methods, trace })
}

/// Writes `rows` with the header `sweep,seed,metric,value`. Floats use the
/// shortest representation that reads back exactly.
pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "seed", "metric", "value"])?;
    for r in &report.rows {
        w.write_record([r.sweep.to_string(), r.seed.to_string(), r.metric.clone(), r.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-sweep means with the header `sweep,metric,mean,count`.
pub fn emit_aggregate_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "metric", "mean", "count"])?;
    for a in &report.aggregates {
        w.write_record([a.sweep.to_string(), a.metric.clone(), a.mean.to_string(), a.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["sweep", "seed", "metric", "value"] {
        return Err(Error::Config(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Writes a table of preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!("row of {} cells under {} columns", row.len(), header.len())));
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
