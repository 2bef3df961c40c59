use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ranopt::harness::{
    ch3_trace, ch4_network, emit_aggregate_csv, emit_csv, run_ch8, write_table, Ch3Params, Ch3Rule, Ch4Params, Ch8Method,
    Ch8Params, ExperimentSpec,
};
use ranopt::ofdma::{
    adaptive_rate_alloc, distributed_uplink_alloc, downlink_alloc, exhaustive_optimal, fairness_index, hybrid_access_alloc,
    rate_per_subchannel,
};
use ranopt::powerctl::PufKind;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "ranopt", version, about = "Radio resource allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power control and association on a macro/femto network.
    Ch3 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Puf::HpcAdapt)]
        puf: Puf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Per-iteration trace.
        #[arg(long)]
        out: PathBuf,
    },
    /// Femtocell subchannel and power allocation.
    Ch4 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Fixed)]
        mode: Mode,
        /// Femtocell constellation size.
        #[arg(long = "qam-f")]
        qam_f: Option<u32>,
        /// Macrocell constellation size.
        #[arg(long = "qam-m")]
        qam_m: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Per-cell results.
        #[arg(long)]
        out: PathBuf,
    },
    /// C-RAN slicing, rate and quantization allocation.
    Ch8 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Ir)]
        method: Method,
        /// Cloud computation cap (bips).
        #[arg(long)]
        cloud: Option<f64>,
        /// Fronthaul cap per cell (bps).
        #[arg(long)]
        fronthaul: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration slicing trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte Carlo sweep described by a TOML spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Directory receiving rows.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Puf {
    Tpc,
    Opc,
    Hpc,
    HpcAdapt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fixed,
    Adaptive,
    Hybrid,
    Downlink,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Relaxed,
    Ir,
    Ra,
    Greedy,
}

impl From<Method> for Ch8Method {
    fn from(m: Method) -> Self {
        match m {
            Method::Relaxed => Ch8Method::Relaxed,
            Method::Ir => Ch8Method::Ir,
            Method::Ra => Ch8Method::Ra,
            Method::Greedy => Ch8Method::Greedy,
        }
    }
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn ch3(config: Option<&Path>, puf: Puf, seed: u64, out: &Path) -> Result<()> {
    let p: Ch3Params = load(config)?;
    let rule = match puf {
        Puf::Tpc => Ch3Rule::Fixed(PufKind::Tpc),
        Puf::Opc => Ch3Rule::Fixed(PufKind::Opc),
        Puf::Hpc => Ch3Rule::Fixed(PufKind::Hpc),
        Puf::HpcAdapt => Ch3Rule::Adapted,
    };
    let rows: Vec<Vec<String>> = ch3_trace(&p, seed, rule)?
        .iter()
        .map(|r| {
            vec![r.iteration.to_string(), r.user.to_string(), f(r.power), f(r.sinr), r.bs.to_string(), (r.supported as u8).to_string()]
        })
        .collect();
    write_table(out, &["iteration", "user", "power", "sinr", "bs", "supported"], &rows)?;
    Ok(())
}

fn ch4(config: Option<&Path>, mode: Mode, qam_f: Option<u32>, qam_m: Option<u32>, seed: u64, out: &Path) -> Result<()> {
    let mut p: Ch4Params = load(config)?;
    if let Some(s) = qam_f {
        p.ofdma.qam_femto = s;
    }
    if let Some(s) = qam_m {
        p.ofdma.qam_macro = s;
    }
    let (net, sets) = ch4_network(&p, seed)?;
    let (plan, objective, iterations) = match mode {
        Mode::Optimal => {
            let (plan, obj) = exhaustive_optimal(&net, &sets, &p.ofdma)?;
            (plan, obj, 0)
        }
        _ => {
            let o = match mode {
                Mode::Fixed => distributed_uplink_alloc(&net, &sets, &p.ofdma)?,
                Mode::Adaptive => adaptive_rate_alloc(&net, &sets, &p.ofdma)?,
                Mode::Hybrid => hybrid_access_alloc(&net, &sets, &p.ofdma)?,
                _ => downlink_alloc(&net, &sets, &p.ofdma)?,
            };
            (o.plan, o.objective, o.iterations)
        }
    };
    let mut rows = Vec::new();
    for k in 1..net.n_cells {
        let users = net.users_of(k);
        if users.is_empty() {
            continue;
        }
        let per_sub = rate_per_subchannel(plan.qam[k], net.n_sub);
        let rates: Vec<f64> = users.iter().map(|&i| per_sub * plan.subchannels_of(i).len() as f64).collect();
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(vec![
            k.to_string(),
            plan.qam[k].to_string(),
            plan.tau[k].to_string(),
            f(min_rate),
            // Left empty for a cell whose users all went unserved.
            fairness_index(&rates).map(f).unwrap_or_default(),
            f(objective),
            iterations.to_string(),
        ]);
    }
    write_table(out, &["cell", "qam", "tau", "min_rate", "fairness", "objective", "iterations"], &rows)?;
    Ok(())
}

struct Ch8Args<'a> {
    config: Option<&'a Path>,
    method: Method,
    cloud: Option<f64>,
    fronthaul: Option<f64>,
    seed: u64,
    out: &'a Path,
    trace: Option<&'a Path>,
}

fn ch8(a: Ch8Args<'_>) -> Result<()> {
    let mut p: Ch8Params = load(a.config)?;
    if let Some(c) = a.cloud {
        p.cloud = c;
    }
    if let Some(b) = a.fronthaul {
        p.fronthaul = b;
    }
    p.methods = vec![a.method.into()];
    let run = run_ch8(&p, a.seed)?;
    let m = &run.methods[0];
    let mut rows = Vec::new();
    for o in 0..m.slices.len() {
        rows.push(vec![
            m.method.name().to_string(),
            o.to_string(),
            f(m.slices[o].c),
            f(m.slices[o].b.iter().sum()),
            f(m.sum_rates[o]),
            f(m.profit.inp[o]),
            f(m.profit.op[o]),
            f(m.profit.objective),
            m.iterations.to_string(),
            (m.feasible as u8).to_string(),
        ]);
    }
    let header =
        ["method", "op", "compute", "fronthaul", "sum_rate", "payment", "op_profit", "objective", "iterations", "feasible"];
    write_table(a.out, &header, &rows)?;
    if let Some(t) = a.trace {
        let rows: Vec<Vec<String>> =
            run.trace.iter().map(|r| vec![r.iteration.to_string(), f(r.psi), f(r.sum_rate)]).collect();
        write_table(t, &["iteration", "objective", "sum_rate"], &rows)?;
    }
    Ok(())
}

fn sweep(spec: &Path, out: &Path) -> Result<()> {
    let spec = ExperimentSpec::load(spec).with_context(|| format!("loading {}", spec.display()))?;
    let report = ranopt::harness::run_experiment(&spec)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    emit_csv(&report, &out.join("rows.csv"))?;
    emit_aggregate_csv(&report, &out.join("summary.csv"))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ch3 { config, puf, seed, out } => ch3(config.as_deref(), puf, seed, &out),
        Command::Ch4 { config, mode, qam_f, qam_m, seed, out } => ch4(config.as_deref(), mode, qam_f, qam_m, seed, &out),
        Command::Ch8 { config, method, cloud, fronthaul, seed, out, trace } => ch8(Ch8Args {
            config: config.as_deref(),
            method,
            cloud,
            fronthaul,
            seed,
            out: &out,
            trace: trace.as_deref(),
        }),
        Command::Sweep { spec, out } => sweep(&spec, &out),
    }
}
