//! Network instances: node placement, path loss, Rayleigh fading and the
//! resulting channel-gain tensor.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Macro,
    Femto,
    Rrh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserKind {
    Voice,
    Data,
}

/// Path-loss law in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLossModel {
    /// `a log10(d) + b + c log10(fc/5) + wall_loss_db * walls`
    HetNet { a: f64, b: f64, c: f64, fc_ghz: f64, wall_loss_db: f64 },
    /// `36.8 log10(d) + 43.8 + 20 log10(fc/5)`
    Cran { fc_ghz: f64 },
}

impl PathLossModel {
    pub fn macro_default() -> Self {
        PathLossModel::HetNet { a: 36.0, b: 40.0, c: 20.0, fc_ghz: 2.5, wall_loss_db: 12.0 }
    }
}

pub fn path_loss_db(model: &PathLossModel, d: f64, walls: u32) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    Ok(match *model {
        PathLossModel::HetNet { a, b, c, fc_ghz, wall_loss_db } => {
            a * d.log10() + b + c * (fc_ghz / 5.0).log10() + wall_loss_db * f64::from(walls)
        }
        PathLossModel::Cran { fc_ghz } => 36.8 * d.log10() + 43.8 + 20.0 * (fc_ghz / 5.0).log10(),
    })
}

/// Linear power gain `10^(-L/10)` of the path loss `L`.
pub fn path_loss_gain(model: &PathLossModel, d: f64, walls: u32) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(model, d, walls)? / 10.0))
}

/// Per-user QoS requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosTargets {
    pub target_sinr: Vec<f64>,
    pub user_kind: Vec<UserKind>,
}

impl QosTargets {
    pub fn uniform(n: usize, target: f64, kind: UserKind) -> Self {
        Self { target_sinr: vec![target; n], user_kind: vec![kind; n] }
    }
}

/// A generated network instance.
///
/// `gains[k][i][n]` is the linear power gain between base station `k` and user
/// `i` on subchannel `n`; links are reciprocal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_positions: Vec<Point>,
    pub tiers: Vec<Tier>,
    pub user_positions: Vec<Point>,
    /// Serving (home) base station of every user.
    pub home_bs: Vec<usize>,
    /// Distance-dependent gains without fading, `[bs][user]`.
    pub path_gains: Vec<Vec<f64>>,
    pub gains: Vec<Vec<Vec<f64>>>,
    /// Noise power per base station and subchannel (W).
    pub noise: Vec<f64>,
    pub processing_gain: f64,
    /// Per-user transmit power budget (W).
    pub max_powers: Vec<f64>,
    /// Per-base-station transmit power budget (W).
    pub bs_max_powers: Vec<f64>,
    pub rng_seed: u64,
}

impl Scenario {
    /// Instance defined directly by a single-subchannel gain table `[bs][user]`.
    pub fn from_gains(gains: Vec<Vec<f64>>, noise: f64, processing_gain: f64, p_max: f64) -> Result<Self> {
        let n_bs = gains.len();
        let n_users = gains.first().map_or(0, Vec::len);
        if n_bs == 0 || n_users == 0 || gains.iter().any(|r| r.len() != n_users) {
            return Err(invalid("gain table must be non-empty and rectangular"));
        }
        if gains.iter().flatten().any(|&g| !(g > 0.0)) {
            return Err(invalid("gains must be positive"));
        }
        let home_bs = (0..n_users)
            .map(|i| {
                (0..n_bs)
                    .max_by(|&a, &b| gains[a][i].partial_cmp(&gains[b][i]).unwrap().then(b.cmp(&a)))
                    .unwrap()
            })
            .collect();
        Ok(Self {
            bs_positions: vec![Point::new(0.0, 0.0); n_bs],
            tiers: vec![Tier::Macro; n_bs],
            user_positions: vec![Point::new(0.0, 0.0); n_users],
            home_bs,
            gains: gains.iter().map(|r| r.iter().map(|&g| vec![g]).collect()).collect(),
            path_gains: gains,
            noise: vec![noise; n_bs],
            processing_gain,
            max_powers: vec![p_max; n_users],
            bs_max_powers: vec![p_max; n_bs],
            rng_seed: 0,
        })
    }

    pub fn n_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn n_subchannels(&self) -> usize {
        self.gains.first().and_then(|r| r.first()).map_or(0, Vec::len)
    }

    /// Gain on the first subchannel.
    pub fn gain(&self, bs: usize, user: usize) -> f64 {
        self.gains[bs][user][0]
    }

    /// Users served by `bs`.
    pub fn users_of(&self, bs: usize) -> Vec<usize> {
        (0..self.n_users()).filter(|&i| self.home_bs[i] == bs).collect()
    }

    /// Writes positions and gains as flat CSV records.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["record", "bs", "user", "subchannel", "x", "y", "value"])?;
        for (k, p) in self.bs_positions.iter().enumerate() {
            out.write_record(["bs", &k.to_string(), "", "", &p.x.to_string(), &p.y.to_string(), &self.bs_max_powers[k].to_string()])?;
        }
        for (i, p) in self.user_positions.iter().enumerate() {
            out.write_record([
                "user",
                &self.home_bs[i].to_string(),
                &i.to_string(),
                "",
                &p.x.to_string(),
                &p.y.to_string(),
                &self.max_powers[i].to_string(),
            ])?;
        }
        for (k, row) in self.gains.iter().enumerate() {
            for (i, per_n) in row.iter().enumerate() {
                for (n, g) in per_n.iter().enumerate() {
                    out.write_record(["gain", &k.to_string(), &i.to_string(), &n.to_string(), "", "", &g.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn default_subchannels() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Declarative description of a network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_subchannels")]
    pub n_subchannels: usize,
    #[serde(default = "default_true")]
    pub fading: bool,
    pub topology: TopologyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyConfig {
    Hetnet(HetNetConfig),
    Cran(CranTopologyConfig),
}

/// One macrocell overlaid with femtocells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HetNetConfig {
    pub macro_radius: f64,
    pub femto_radius: f64,
    pub n_mue: usize,
    pub n_femto: usize,
    pub fue_min: usize,
    pub fue_max: usize,
    pub macro_pl: (f64, f64),
    pub femto_pl: (f64, f64),
    pub pl_c: f64,
    pub fc_ghz: f64,
    pub wall_loss_db: f64,
    pub noise_w: f64,
    pub mue_p_max: f64,
    pub fue_p_max: f64,
    pub macro_bs_p_max: f64,
    pub femto_bs_p_max: f64,
    pub processing_gain: f64,
    /// Distances below this are clamped before evaluating path loss (m).
    pub min_distance: f64,
}

impl Default for HetNetConfig {
    fn default() -> Self {
        Self {
            macro_radius: 1000.0,
            femto_radius: 50.0,
            n_mue: 10,
            n_femto: 4,
            fue_min: 1,
            fue_max: 3,
            macro_pl: (36.0, 40.0),
            femto_pl: (35.0, 35.0),
            pl_c: 20.0,
            fc_ghz: 2.5,
            wall_loss_db: 12.0,
            noise_w: 1e-13,
            mue_p_max: 0.01,
            fue_p_max: 0.01,
            macro_bs_p_max: 0.2,
            femto_bs_p_max: 0.05,
            processing_gain: 128.0,
            min_distance: 1.0,
        }
    }
}

/// Seven-cell hexagonal layout with one user per cell and resource block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CranTopologyConfig {
    pub inter_site: f64,
    pub user_distance: f64,
    pub users_per_cell: usize,
    pub fc_ghz: f64,
    pub noise_w: f64,
    pub p_user: f64,
}

impl Default for CranTopologyConfig {
    fn default() -> Self {
        Self { inter_site: 400.0, user_distance: 100.0, users_per_cell: 30, fc_ghz: 2.5, noise_w: 1e-13, p_user: 0.1 }
    }
}

fn uniform_in_disk<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * a.cos(), center.y + r * a.sin())
}

/// Whether segment `a-b` crosses the boundary of the disk `(c, r)`.
fn crosses_disk(a: Point, b: Point, c: Point, r: f64) -> bool {
    let (ina, inb) = (a.dist(&c) < r, b.dist(&c) < r);
    if ina != inb {
        return true;
    }
    if ina {
        return false;
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((c.x - a.x) * dx + (c.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    Point::new(a.x + t * dx, a.y + t * dy).dist(&c) < r
}

/// Places nodes and evaluates path gains; fading is applied per subchannel.
pub fn generate_topology(config: &ScenarioConfig) -> Result<Scenario> {
    if config.n_subchannels == 0 {
        return Err(invalid("at least one subchannel is required"));
    }
    let mut s = match &config.topology {
        TopologyConfig::Hetnet(h) => hetnet(h, config.seed)?,
        TopologyConfig::Cran(c) => cran(c, config.seed)?,
    };
    s.gains = build_channel_tensor(&s, config.n_subchannels, config.fading, config.seed);
    Ok(s)
}

fn hetnet(h: &HetNetConfig, seed: u64) -> Result<Scenario> {
    if !(h.macro_radius > h.femto_radius && h.femto_radius > 0.0) {
        return Err(invalid("radii must satisfy macro_radius > femto_radius > 0"));
    }
    if h.n_mue + h.n_femto == 0 || h.fue_min == 0 || h.fue_min > h.fue_max {
        return Err(invalid("need at least one cell user and 1 <= fue_min <= fue_max"));
    }
    if !(h.noise_w > 0.0 && h.mue_p_max > 0.0 && h.fue_p_max > 0.0) {
        return Err(invalid("noise and power budgets must be positive"));
    }
    let mut rng = substream(seed, "placement");
    let origin = Point::new(0.0, 0.0);
    let mut bs_positions = vec![origin];
    let mut tiers = vec![Tier::Macro];
    for _ in 0..h.n_femto {
        let mut p = uniform_in_disk(&mut rng, origin, h.macro_radius - h.femto_radius);
        for _ in 0..1000 {
            let clear = bs_positions[1..].iter().all(|q| q.dist(&p) >= 2.0 * h.femto_radius)
                && p.dist(&origin) >= 2.0 * h.femto_radius;
            if clear {
                break;
            }
            p = uniform_in_disk(&mut rng, origin, h.macro_radius - h.femto_radius);
        }
        bs_positions.push(p);
        tiers.push(Tier::Femto);
    }
    let mut user_positions = Vec::new();
    let mut home_bs = Vec::new();
    let mut max_powers = Vec::new();
    for _ in 0..h.n_mue {
        user_positions.push(uniform_in_disk(&mut rng, origin, h.macro_radius));
        home_bs.push(0);
        max_powers.push(h.mue_p_max);
    }
    for f in 1..=h.n_femto {
        let count = rng.gen_range(h.fue_min..=h.fue_max);
        for _ in 0..count {
            user_positions.push(uniform_in_disk(&mut rng, bs_positions[f], h.femto_radius));
            home_bs.push(f);
            max_powers.push(h.fue_p_max);
        }
    }
    let models: Vec<PathLossModel> = tiers
        .iter()
        .map(|t| {
            let (a, b) = if *t == Tier::Macro { h.macro_pl } else { h.femto_pl };
            PathLossModel::HetNet { a, b, c: h.pl_c, fc_ghz: h.fc_ghz, wall_loss_db: h.wall_loss_db }
        })
        .collect();
    let mut path_gains = vec![vec![0.0; user_positions.len()]; bs_positions.len()];
    for (k, bp) in bs_positions.iter().enumerate() {
        for (i, up) in user_positions.iter().enumerate() {
            let walls = u32::from(
                (1..bs_positions.len()).any(|f| crosses_disk(*bp, *up, bs_positions[f], h.femto_radius)),
            );
            path_gains[k][i] = path_loss_gain(&models[k], bp.dist(up).max(h.min_distance), walls)?;
        }
    }
    let bs_max_powers = tiers
        .iter()
        .map(|t| if *t == Tier::Macro { h.macro_bs_p_max } else { h.femto_bs_p_max })
        .collect();
    Ok(Scenario {
        noise: vec![h.noise_w; bs_positions.len()],
        bs_positions,
        tiers,
        user_positions,
        home_bs,
        path_gains,
        gains: Vec::new(),
        processing_gain: h.processing_gain,
        max_powers,
        bs_max_powers,
        rng_seed: seed,
    })
}

/// Centres of a seven-cell hexagonal grid with the given site spacing.
pub fn hex_grid7(spacing: f64) -> Vec<Point> {
    let mut v = vec![Point::new(0.0, 0.0)];
    for j in 0..6 {
        let a = std::f64::consts::FRAC_PI_3 * j as f64;
        v.push(Point::new(spacing * a.cos(), spacing * a.sin()));
    }
    v
}

fn cran(c: &CranTopologyConfig, seed: u64) -> Result<Scenario> {
    if !(c.inter_site > 0.0 && c.user_distance > 0.0 && c.users_per_cell > 0) {
        return Err(invalid("inter-site spacing, user distance and users per cell must be positive"));
    }
    if !(c.noise_w > 0.0 && c.p_user > 0.0) {
        return Err(invalid("noise and user power must be positive"));
    }
    let mut rng = substream(seed, "placement");
    let bs_positions = hex_grid7(c.inter_site);
    let model = PathLossModel::Cran { fc_ghz: c.fc_ghz };
    let mut user_positions = Vec::new();
    let mut home_bs = Vec::new();
    for (k, centre) in bs_positions.iter().enumerate() {
        for _ in 0..c.users_per_cell {
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            user_positions.push(Point::new(centre.x + c.user_distance * a.cos(), centre.y + c.user_distance * a.sin()));
            home_bs.push(k);
        }
    }
    let mut path_gains = vec![vec![0.0; user_positions.len()]; bs_positions.len()];
    for (k, bp) in bs_positions.iter().enumerate() {
        for (i, up) in user_positions.iter().enumerate() {
            path_gains[k][i] = path_loss_gain(&model, bp.dist(up).max(1.0), 0)?;
        }
    }
    let n_users = user_positions.len();
    Ok(Scenario {
        tiers: vec![Tier::Rrh; bs_positions.len()],
        noise: vec![c.noise_w; bs_positions.len()],
        bs_max_powers: vec![c.p_user; bs_positions.len()],
        bs_positions,
        user_positions,
        home_bs,
        path_gains,
        gains: Vec::new(),
        processing_gain: 1.0,
        max_powers: vec![c.p_user; n_users],
        rng_seed: seed,
    })
}

/// Path gains times an independent unit-mean exponential draw per
/// `(bs, user, subchannel)`; without fading the path gains are repeated.
pub fn build_channel_tensor(s: &Scenario, n_subchannels: usize, fading: bool, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = substream(seed, "fading");
    s.path_gains
        .iter()
        .map(|row| {
            row.iter()
                .map(|&g| {
                    (0..n_subchannels)
                        .map(|_| if fading {
                            let f: f64 = Exp1.sample(&mut rng);
                            g * f
                        } else {
                            g
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}
