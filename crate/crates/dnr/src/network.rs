//! Per-unit electrical network data: buses, lines, limits, and the derived
//! incidence structure shared by every model in the crate.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    /// Real power demand (p.u.).
    pub p_load: f64,
    /// Reactive power demand (p.u.); may be negative (capacitive).
    pub q_load: f64,
    /// Voltage magnitude lower limit (p.u.).
    pub v_min: f64,
    /// Voltage magnitude upper limit (p.u.).
    pub v_max: f64,
    pub is_root: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: u32,
    #[serde(rename = "from")]
    pub from_bus: u32,
    #[serde(rename = "to")]
    pub to_bus: u32,
    /// Resistance (p.u.), strictly positive.
    pub r: f64,
    /// Reactance (p.u.), strictly positive.
    pub x: f64,
    /// Real power flow limit (p.u.).
    pub p_max: f64,
    /// Reactive power flow limit (p.u.).
    pub q_max: f64,
}

/// Raw network file contents, exactly the on-disk JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

/// Validated immutable network. Bus and line indices below are positions in
/// the ordered `buses`/`lines` vectors, not file ids.
#[derive(Debug, Clone)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub big_m: f64,
    root: usize,
    /// For each line, (from index, to index).
    endpoints: Vec<(usize, usize)>,
    /// Lines with `to_bus == n`: the inflow set of bus n.
    inflow: Vec<Vec<usize>>,
    /// Lines with `from_bus == n`: the outflow set of bus n.
    outflow: Vec<Vec<usize>>,
}

impl Network {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn endpoints(&self, line: usize) -> (usize, usize) {
        self.endpoints[line]
    }

    /// Lines presupposed to flow into bus `n` (the set L_n^+).
    pub fn inflow(&self, n: usize) -> &[usize] {
        &self.inflow[n]
    }

    /// Lines presupposed to flow out of bus `n` (the set L_n^-).
    pub fn outflow(&self, n: usize) -> &[usize] {
        &self.outflow[n]
    }

    /// All lines incident to bus `n`.
    pub fn incident(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.inflow[n].iter().chain(self.outflow[n].iter()).copied()
    }

    /// Position of the bus with file id `id`.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Position of the line with file id `id`.
    pub fn line_index(&self, id: u32) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Smallest squared voltage lower bound across all buses.
    pub fn v_min_sq_global(&self) -> f64 {
        self.buses
            .iter()
            .map(|b| b.v_min * b.v_min)
            .fold(f64::INFINITY, f64::min)
    }

    /// Nominal load vector, one (p, q) pair per bus in bus order.
    pub fn nominal_loads(&self) -> Vec<(f64, f64)> {
        self.buses.iter().map(|b| (b.p_load, b.q_load)).collect()
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            base_mva: self.base_mva,
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            big_m: Some(self.big_m),
        }
    }
}

/// Tightest bound on squared current implied by the flow and voltage boxes:
/// L^max = (p_max^2 + q_max^2) / (min_n v_min)^2.
pub fn line_current_cap(line: &Line, network: &Network) -> f64 {
    (line.p_max * line.p_max + line.q_max * line.q_max) / network.v_min_sq_global()
}

fn line_current_cap_raw(line: &Line, v_min_sq_global: f64) -> f64 {
    (line.p_max * line.p_max + line.q_max * line.q_max) / v_min_sq_global
}

/// Smallest big-M constant valid over the feasible box:
/// (max v_max^2) - (min v_min^2) + max_mn (2(r p_max + x q_max) + (r^2+x^2) L^max).
pub fn big_m_formula(file: &NetworkFile) -> f64 {
    let v_max_sq = file
        .buses
        .iter()
        .map(|b| b.v_max * b.v_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let v_min_sq = file
        .buses
        .iter()
        .map(|b| b.v_min * b.v_min)
        .fold(f64::INFINITY, f64::min);
    let drop_max = file
        .lines
        .iter()
        .map(|l| {
            let cap = line_current_cap_raw(l, v_min_sq);
            2.0 * (l.r * l.p_max + l.x * l.q_max) + (l.r * l.r + l.x * l.x) * cap
        })
        .fold(f64::NEG_INFINITY, f64::max);
    v_max_sq - v_min_sq + drop_max
}

/// Checks every invariant on the raw file and returns a description per
/// violation. Empty iff the file can be promoted to a `Network`.
pub fn validate(file: &NetworkFile) -> Vec<String> {
    let mut out = Vec::new();
    let n = file.buses.len();
    let l = file.lines.len();

    let roots = file.buses.iter().filter(|b| b.is_root).count();
    if roots == 0 {
        out.push("no root bus".to_string());
    } else if roots > 1 {
        out.push("multiple roots".to_string());
    }
    let mut bus_ids = BTreeSet::new();
    for b in &file.buses {
        if b.id == 0 {
            out.push(format!("bus {}: id must be positive", b.id));
        }
        if !bus_ids.insert(b.id) {
            out.push(format!("bus {}: duplicate id", b.id));
        }
        if !(b.v_min > 0.0 && b.v_min < b.v_max) {
            out.push(format!("bus {}: requires 0 < v_min < v_max", b.id));
        }
        if b.p_load < 0.0 && !b.is_root {
            out.push(format!("bus {}: p_load must be nonnegative", b.id));
        }
    }
    let mut line_ids = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for ln in &file.lines {
        if ln.id == 0 {
            out.push(format!("line {}: id must be positive", ln.id));
        }
        if !line_ids.insert(ln.id) {
            out.push(format!("line {}: duplicate id", ln.id));
        }
        if ln.r <= 0.0 {
            out.push(format!("line {}: r must be > 0", ln.id));
        }
        if ln.x <= 0.0 {
            out.push(format!("line {}: x must be > 0", ln.id));
        }
        if ln.p_max <= 0.0 {
            out.push(format!("line {}: p_max must be > 0", ln.id));
        }
        if ln.q_max <= 0.0 {
            out.push(format!("line {}: q_max must be > 0", ln.id));
        }
        if ln.from_bus == ln.to_bus {
            out.push(format!("line {}: from and to coincide", ln.id));
        }
        if !bus_ids.contains(&ln.from_bus) || !bus_ids.contains(&ln.to_bus) {
            out.push(format!("line {}: endpoint references unknown bus", ln.id));
        }
        let pair = (ln.from_bus.min(ln.to_bus), ln.from_bus.max(ln.to_bus));
        if !pairs.insert(pair) {
            out.push(format!("line {}: duplicate unordered bus pair", ln.id));
        }
    }
    if n > 0 && l + 1 < n {
        out.push("too few lines for a spanning tree".to_string());
    }
    if let Some(m) = file.big_m {
        if m <= 0.0 {
            out.push("big_m must be > 0".to_string());
        }
    }
    if out.is_empty() && !is_connected(file) {
        out.push("graph is disconnected".to_string());
    }
    out
}

fn is_connected(file: &NetworkFile) -> bool {
    let n = file.buses.len();
    if n == 0 {
        return false;
    }
    let idx = |id: u32| file.buses.iter().position(|b| b.id == id).unwrap();
    let mut adj = vec![Vec::new(); n];
    for ln in &file.lines {
        let (a, b) = (idx(ln.from_bus), idx(ln.to_bus));
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Promote a raw file to a validated `Network`, computing big_m when absent.
pub fn build_network(file: NetworkFile) -> Result<Network> {
    let violations = validate(&file);
    if let Some(first) = violations.first() {
        if first == "graph is disconnected" {
            return Err(Error::DisconnectedGraph);
        }
        return Err(Error::Validation {
            field: "network".to_string(),
            message: violations.join("; "),
        });
    }
    let big_m = file.big_m.unwrap_or_else(|| big_m_formula(&file));
    let n = file.buses.len();
    let root = file.buses.iter().position(|b| b.is_root).unwrap();
    let idx = |id: u32| file.buses.iter().position(|b| b.id == id).unwrap();
    let mut endpoints = Vec::with_capacity(file.lines.len());
    let mut inflow = vec![Vec::new(); n];
    let mut outflow = vec![Vec::new(); n];
    for (e, ln) in file.lines.iter().enumerate() {
        let (f, t) = (idx(ln.from_bus), idx(ln.to_bus));
        endpoints.push((f, t));
        outflow[f].push(e);
        inflow[t].push(e);
    }
    Ok(Network {
        base_mva: file.base_mva,
        buses: file.buses,
        lines: file.lines,
        big_m,
        root,
        endpoints,
        inflow,
        outflow,
    })
}

pub fn load_network<P: AsRef<Path>>(path: P) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    build_network(file)
}
