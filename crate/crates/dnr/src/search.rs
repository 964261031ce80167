//! Loss-minimizing reconfiguration search with multiplier certificates.
//! Two routes to the same answer: exhaustive spanning-tree enumeration with a
//! continuous solve per tree, and a direct relax-round-polish pass over the
//! full model with the binary states relaxed.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::kkt::{
    check_kkt, check_licq, check_mfcq, lift_multipliers, AuxMultipliers, DnrMultipliers,
    KktReport, LicqReport, MfcqReport,
};
use crate::model_aux::{embed, AuxModel};
use crate::model_dnr::{DnrModel, Layout, PrimalPoint};
use crate::network::Network;
use crate::nlp::{self, KktResiduals, SolveStatus, SolverOptions};
use crate::nlp::powerflow::{solve_tree_power_flow, PowerFlowOptions};
use crate::system::{ConstraintSystem, ReducedSystem};
use crate::topology::{enumerate_radial, topology_of, Topology};

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Enumeration cap on the number of spanning trees.
    pub cap: usize,
    pub solver: SolverOptions,
    /// Penalty weights for the relaxation homotopy, applied in order with
    /// warm starts.
    pub penalty_schedule: Vec<f64>,
    pub activity_tol: f64,
    pub rank_tol: f64,
    /// Tolerance for accepting a fixed-topology solve as certificate input.
    pub cert_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            cap: 100_000,
            solver: SolverOptions::default(),
            penalty_schedule: vec![0.0, 1.0, 10.0, 100.0],
            activity_tol: 1e-6,
            rank_tol: 1e-8,
            cert_tol: 1e-6,
        }
    }
}

/// The full model with the line states relaxed to the unit box and the
/// binary-state equalities replaced by a concave penalty rho * sum u(1-u).
pub struct RelaxedDnr<'a> {
    pub model: DnrModel<'a>,
    pub rho: f64,
}

impl<'a> RelaxedDnr<'a> {
    pub fn new(model: DnrModel<'a>, rho: f64) -> Self {
        Self { model, rho }
    }

    fn n(&self) -> usize {
        self.model.layout.n
    }
    fn l(&self) -> usize {
        self.model.layout.l
    }

    /// Equality rows of the parent model kept here: everything except the
    /// per-line binary-state rows.
    fn kept_eq_rows(&self) -> Vec<usize> {
        let (n, l) = (self.n(), self.l());
        (0..2 * n + l).chain([2 * n + 2 * l]).collect()
    }
}

impl ConstraintSystem for RelaxedDnr<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn n_eq(&self) -> usize {
        2 * self.n() + self.l() + 1
    }
    fn n_ineq(&self) -> usize {
        self.model.n_ineq() + 2 * self.l()
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        let mut f = self.model.objective(z);
        for e in 0..self.l() {
            let u = z[self.model.layout.u(e)];
            f += self.rho * u * (1.0 - u);
        }
        f
    }

    fn grad_objective(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = self.model.grad_objective(z);
        for e in 0..self.l() {
            let iu = self.model.layout.u(e);
            g[iu] += self.rho * (1.0 - 2.0 * z[iu]);
        }
        g
    }

    fn eval_g(&self, z: &DVector<f64>) -> DVector<f64> {
        let full = self.model.eval_g(z);
        DVector::from_iterator(self.n_eq(), self.kept_eq_rows().into_iter().map(|r| full[r]))
    }

    fn eval_h(&self, z: &DVector<f64>) -> DVector<f64> {
        let base = self.model.eval_h(z);
        let l = self.l();
        let mut h = DVector::zeros(self.n_ineq());
        h.rows_mut(0, base.len()).copy_from(&base);
        for e in 0..l {
            let u = z[self.model.layout.u(e)];
            h[base.len() + e] = -u;
            h[base.len() + l + e] = u - 1.0;
        }
        h
    }

    fn jac_g(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let full = self.model.jac_g(z);
        let rows = self.kept_eq_rows();
        DMatrix::from_fn(rows.len(), self.dim(), |r, c| full[(rows[r], c)])
    }

    fn jac_h(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let base = self.model.jac_h(z);
        let l = self.l();
        let mut jac = DMatrix::zeros(self.n_ineq(), self.dim());
        jac.view_mut((0, 0), (base.nrows(), self.dim())).copy_from(&base);
        for e in 0..l {
            let iu = self.model.layout.u(e);
            jac[(base.nrows() + e, iu)] = -1.0;
            jac[(base.nrows() + l + e, iu)] = 1.0;
        }
        jac
    }

    fn hess_lagrangian(&self, z: &DVector<f64>, obj_w: f64, lambda: &DVector<f64>) -> DMatrix<f64> {
        // Current-equality rows keep the parent's curvature; the dropped
        // binary-state rows contribute nothing, the penalty adds -2 rho on
        // the u diagonal.
        let (n, l) = (self.n(), self.l());
        let mut full_lambda = DVector::zeros(self.model.n_eq());
        for r in 0..2 * n + l {
            full_lambda[r] = lambda[r];
        }
        full_lambda[2 * n + 2 * l] = lambda[2 * n + l];
        let mut hess = self.model.hess_lagrangian(z, obj_w, &full_lambda);
        for e in 0..l {
            let iu = self.model.layout.u(e);
            hess[(iu, iu)] += -2.0 * self.rho * obj_w;
        }
        hess
    }

    fn g_labels(&self) -> Vec<(String, Range<usize>)> {
        let (n, l) = (self.n(), self.l());
        vec![
            ("balance_p".into(), 0..n),
            ("balance_q".into(), n..2 * n),
            ("current".into(), 2 * n..2 * n + l),
            ("tree_count".into(), 2 * n + l..2 * n + l + 1),
        ]
    }

    fn h_labels(&self) -> Vec<(String, Range<usize>)> {
        let mut labels = self.model.h_labels();
        let base = self.model.n_ineq();
        let l = self.l();
        labels.push(("u_lb".into(), base..base + l));
        labels.push(("u_ub".into(), base + l..base + 2 * l));
        labels
    }
}

#[derive(Debug, Clone)]
pub struct AuxSolve {
    pub z: DVector<f64>,
    pub multipliers: AuxMultipliers,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residuals: KktResiduals,
}

/// Solve the fixed-topology program, starting from the tree power-flow point.
pub fn solve_topology(
    network: &Network,
    topology: &Topology,
    loads: &[(f64, f64)],
    solver: &SolverOptions,
) -> Result<AuxSolve> {
    let aux = AuxModel::build(network, topology.clone(), loads.to_vec())?;
    let mut z0 = match solve_tree_power_flow(network, topology, loads, &PowerFlowOptions::default())
    {
        Ok(z) => z,
        Err(_) => {
            // Flat fallback: mid-box voltages, zero flows.
            let lay = Layout::aux(network);
            let mut z = DVector::zeros(lay.dim());
            for j in 0..network.n_buses() {
                let b = &network.buses[j];
                z[lay.v(j)] = (b.v_min * b.v_min + b.v_max * b.v_max) / 2.0;
            }
            z
        }
    };
    aux.pin_fixed(&mut z0);
    let reduced = ReducedSystem::new(&aux, aux.free_coords(), z0.clone());
    let res = nlp::solve(&reduced, &reduced.restrict(&z0), solver)?;
    if res.status != SolveStatus::Optimal {
        return Err(Error::NoConvergence(format!(
            "fixed-topology solve ended with {:?} after {} iterations",
            res.status, res.iterations
        )));
    }
    let z = reduced.expand(&res.z);
    let multipliers = AuxMultipliers::from_flat(&aux, &res.lambda, &res.mu)?;
    Ok(AuxSolve {
        objective: aux.objective(&z),
        z,
        multipliers,
        status: res.status,
        iterations: res.iterations,
        kkt_residuals: res.kkt_residuals,
    })
}

/// Complete certificate at a solved topology: full-model point, lifted
/// multipliers, KKT residuals on both models, and CQ diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub u: Vec<u8>,
    pub on_line_ids: Vec<u32>,
    pub objective: f64,
    pub point: PrimalPoint,
    pub aux_multipliers: AuxMultipliers,
    pub multipliers: DnrMultipliers,
    pub aux_kkt: KktReport,
    pub kkt: KktReport,
    pub licq: LicqReport,
    pub mfcq: MfcqReport,
}

pub fn certificate_for(
    network: &Network,
    topology: &Topology,
    loads: &[(f64, f64)],
    solve: &AuxSolve,
    opts: &SearchOptions,
) -> Result<Certificate> {
    let aux = AuxModel::build(network, topology.clone(), loads.to_vec())?;
    let lifted = lift_multipliers(&aux, &solve.z, &solve.multipliers, opts.cert_tol)?;
    let (lam_aux, mu_aux) = solve.multipliers.to_flat();
    let aux_kkt = check_kkt(&aux, &solve.z, &lam_aux, &mu_aux, opts.cert_tol);

    let z_full = embed(&solve.z, topology);
    let model = DnrModel::with_loads(network, loads.to_vec())?;
    let (lam, mu) = lifted.to_flat();
    let kkt = check_kkt(&model, &z_full, &lam, &mu, opts.cert_tol);
    let licq = check_licq(&model, &z_full, opts.activity_tol, opts.rank_tol);
    let mfcq = check_mfcq(&model, &z_full, opts.activity_tol, opts.rank_tol)?;

    Ok(Certificate {
        u: topology.u.clone(),
        on_line_ids: topology.on_line_ids(network),
        objective: solve.objective,
        point: PrimalPoint::from_vector(&model.layout, &z_full),
        aux_multipliers: solve.multipliers.clone(),
        multipliers: lifted,
        aux_kkt,
        kkt,
        licq,
        mfcq,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologySummary {
    pub u: Vec<u8>,
    pub on_line_ids: Vec<u32>,
    pub objective: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: u64,
    pub stages: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub method: String,
    pub per_topology: Vec<TopologySummary>,
    pub best: Certificate,
    pub timings: Timings,
}

pub fn solve_enumerate(
    network: &Network,
    loads: &[(f64, f64)],
    opts: &SearchOptions,
) -> Result<StudyResult> {
    let start = Instant::now();
    let topologies = enumerate_radial(network, opts.cap)?;
    let mut per = Vec::with_capacity(topologies.len());
    let mut best: Option<(usize, AuxSolve)> = None;
    for (i, topo) in topologies.iter().enumerate() {
        match solve_topology(network, topo, loads, &opts.solver) {
            Ok(s) => {
                per.push(TopologySummary {
                    u: topo.u.clone(),
                    on_line_ids: topo.on_line_ids(network),
                    objective: Some(s.objective),
                    converged: true,
                    iterations: s.iterations,
                    note: None,
                });
                if best.as_ref().is_none_or(|(_, b)| s.objective < b.objective) {
                    best = Some((i, s));
                }
            }
            Err(e) => per.push(TopologySummary {
                u: topo.u.clone(),
                on_line_ids: topo.on_line_ids(network),
                objective: None,
                converged: false,
                iterations: 0,
                note: Some(e.to_string()),
            }),
        }
    }
    let (i_best, solve) = best.ok_or(Error::AllSolvesFailed)?;
    let cert = certificate_for(network, &topologies[i_best], loads, &solve, opts)?;
    Ok(StudyResult {
        method: "enumerate".to_string(),
        per_topology: per,
        best: cert,
        timings: Timings {
            total_ms: start.elapsed().as_millis() as u64,
            stages: vec![],
        },
    })
}

/// Greedy spanning tree preferring the largest relaxed states.
fn round_to_tree(network: &Network, u_relaxed: &[f64]) -> Result<Topology> {
    let l = network.n_lines();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| u_relaxed[b].partial_cmp(&u_relaxed[a]).unwrap().then(a.cmp(&b)));
    let n = network.n_buses();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut u = vec![0.0; l];
    let mut picked = 0;
    for e in order {
        let (f, t) = network.endpoints(e);
        let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
        if rf != rt {
            parent[rf] = rt;
            u[e] = 1.0;
            picked += 1;
            if picked == n - 1 {
                break;
            }
        }
    }
    topology_of(network, &u)
}

/// Network loss at the exact power-flow point of a tree; used to rank
/// candidate topologies cheaply.
fn power_flow_loss(network: &Network, topo: &Topology, loads: &[(f64, f64)]) -> Option<f64> {
    let z = solve_tree_power_flow(network, topo, loads, &PowerFlowOptions::default()).ok()?;
    let lay = Layout::aux(network);
    Some(
        (0..network.n_lines())
            .map(|e| network.lines[e].r * z[lay.l_sq(e)])
            .sum(),
    )
}

/// Greedy single-swap descent over spanning trees: close one switched-off
/// line, open one line on the created cycle, move whenever the power-flow
/// loss drops. Terminates at a swap-local minimum.
fn branch_exchange(
    network: &Network,
    loads: &[(f64, f64)],
    mut topo: Topology,
) -> Result<Topology> {
    let l = network.n_lines();
    // A diverging power flow marks the tree as worst possible; any candidate
    // with a converging flow then beats it.
    let mut current_loss = power_flow_loss(network, &topo, loads).unwrap_or(f64::INFINITY);
    loop {
        let mut best: Option<(f64, Topology)> = None;
        for f in 0..l {
            if topo.is_on(f) {
                continue;
            }
            for k in 0..topo.on_lines.len() {
                let e = topo.on_lines[k];
                let mut u = topo.u_reals();
                u[e] = 0.0;
                u[f] = 1.0;
                let Ok(cand) = topology_of(network, &u) else {
                    continue;
                };
                if let Some(loss) = power_flow_loss(network, &cand, loads) {
                    if loss < current_loss - 1e-12
                        && best.as_ref().is_none_or(|(b, _)| loss < *b)
                    {
                        best = Some((loss, cand));
                    }
                }
            }
        }
        match best {
            Some((loss, cand)) => {
                log::debug!(
                    "exchange: {:?} -> {:?} ({:.6e} -> {:.6e})",
                    topo.u,
                    cand.u,
                    current_loss,
                    loss
                );
                current_loss = loss;
                topo = cand;
            }
            None => return Ok(topo),
        }
    }
}

pub fn solve_direct(
    network: &Network,
    loads: &[(f64, f64)],
    opts: &SearchOptions,
) -> Result<StudyResult> {
    let start = Instant::now();
    let mut stages = Vec::new();

    let lay = Layout::full(network);
    let n = network.n_buses();
    let l = network.n_lines();
    let u_init = (n as f64 - 1.0) / l as f64;
    let mut z = DVector::zeros(lay.dim());
    for j in 0..n {
        let b = &network.buses[j];
        z[lay.v(j)] = (b.v_min * b.v_min + b.v_max * b.v_max) / 2.0;
    }
    for e in 0..l {
        z[lay.u(e)] = u_init;
    }
    let total_load: f64 = loads.iter().map(|d| d.0).sum();
    z[lay.p_inj(network.root())] = total_load;

    // The relax stages only steer the rounding, so a tight iteration budget
    // is enough; the polish and exchange passes do the precise work.
    let relax_solver = SolverOptions {
        max_iter: opts.solver.max_iter.min(60),
        ..opts.solver.clone()
    };
    for &rho in &opts.penalty_schedule {
        let stage_start = Instant::now();
        let model = DnrModel::with_loads(network, loads.to_vec())?;
        let relaxed = RelaxedDnr::new(model, rho);
        let mut z0 = z.clone();
        relaxed.model.pin_fixed(&mut z0);
        let reduced = ReducedSystem::new(&relaxed, relaxed.model.free_coords(), z0.clone());
        let res = nlp::solve(&reduced, &reduced.restrict(&z0), &relax_solver)?;
        // Keep the iterate even on MaxIter; the next stage or the rounding
        // step can still recover.
        z = reduced.expand(&res.z);
        log::debug!(
            "relax rho={rho}: status {:?} after {} iters, u = {:?}",
            res.status,
            res.iterations,
            (0..l).map(|e| z[lay.u(e)]).collect::<Vec<_>>()
        );
        stages.push((format!("relax rho={rho}"), stage_start.elapsed().as_millis() as u64));
    }

    let u_relaxed: Vec<f64> = (0..l).map(|e| z[lay.u(e)]).collect();
    let mut topo = round_to_tree(network, &u_relaxed)?;

    let stage_start = Instant::now();
    topo = branch_exchange(network, loads, topo)?;
    stages.push(("exchange".to_string(), stage_start.elapsed().as_millis() as u64));

    let stage_start = Instant::now();
    let solve = solve_topology(network, &topo, loads, &opts.solver)?;
    let cert = certificate_for(network, &topo, loads, &solve, opts)?;
    stages.push(("polish".to_string(), stage_start.elapsed().as_millis() as u64));

    Ok(StudyResult {
        method: "direct".to_string(),
        per_topology: vec![],
        best: cert,
        timings: Timings {
            total_ms: start.elapsed().as_millis() as u64,
            stages,
        },
    })
}

/// Human-readable study summary; one line per topology, then the winner and
/// its certificate verdicts.
pub fn text_report(study: &StudyResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("method: {}\n", study.method));
    if !study.per_topology.is_empty() {
        out.push_str("topologies:\n");
        for (i, t) in study.per_topology.iter().enumerate() {
            let u: Vec<String> = t.u.iter().map(|b| b.to_string()).collect();
            match t.objective {
                Some(obj) => out.push_str(&format!(
                    "  {:>3}  u=[{}]  lines={:?}  objective={:.2e}\n",
                    i + 1,
                    u.join(","),
                    t.on_line_ids,
                    obj
                )),
                None => out.push_str(&format!(
                    "  {:>3}  u=[{}]  lines={:?}  FAILED ({})\n",
                    i + 1,
                    u.join(","),
                    t.on_line_ids,
                    t.note.as_deref().unwrap_or("unknown")
                )),
            }
        }
    }
    let b = &study.best;
    let u: Vec<String> = b.u.iter().map(|x| x.to_string()).collect();
    out.push_str(&format!(
        "best: u=[{}]  lines={:?}  objective={:.2e}\n",
        u.join(","),
        b.on_line_ids,
        b.objective
    ));
    out.push_str(&format!(
        "certificate: kkt={} (stat {:.2e}, comp {:.2e})  licq={} (rank {}/{})  mfcq={}\n",
        if b.kkt.passed { "pass" } else { "FAIL" },
        b.kkt.stationarity,
        b.kkt.complementarity,
        if b.licq.holds { "holds" } else { "fails" },
        b.licq.rank,
        b.licq.n_active_gradients,
        if b.mfcq.holds { "holds" } else { "fails" },
    ));
    if let Some(ub) = &b.licq.u_block {
        out.push_str(&format!(
            "state-block: rank {}/{}  witness residual {:.2e}\n",
            ub.rank, ub.rows, ub.witness_residual
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;

    fn net(name: &str) -> Network {
        load_network(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn enumerate_four_bus_produces_certified_best() {
        let net = net("net4.json");
        let loads = net.nominal_loads();
        let study = solve_enumerate(&net, &loads, &SearchOptions::default()).unwrap();
        assert_eq!(study.per_topology.len(), 3);
        assert!(study.per_topology.iter().all(|t| t.converged));
        let b = &study.best;
        assert!(b.kkt.passed, "kkt report: {:?}", b.kkt);
        assert!(!b.licq.holds);
        assert!(!b.mfcq.holds);
        // Every candidate objective at least the winner's.
        for t in &study.per_topology {
            assert!(t.objective.unwrap() >= b.objective - 1e-12);
        }
    }

    #[test]
    fn direct_matches_enumeration_on_four_bus() {
        let net = net("net4.json");
        let loads = net.nominal_loads();
        let opts = SearchOptions::default();
        let enumerated = solve_enumerate(&net, &loads, &opts).unwrap();
        let direct = solve_direct(&net, &loads, &opts).unwrap();
        assert!((enumerated.best.objective - direct.best.objective).abs() <= 1e-8);
        assert_eq!(enumerated.best.u, direct.best.u);
    }

    #[test]
    fn rounding_repairs_cycles() {
        let net = net("net4.json");
        // Relaxed weights favoring the cycle lines 2,3,4; repair must open one.
        let topo = round_to_tree(&net, &[0.2, 0.9, 0.9, 0.9]).unwrap();
        assert_eq!(topo.on_lines.len(), 3);
        assert!(topo.is_on(0), "bridge line must be restored");
    }

    #[test]
    fn relaxed_model_consistent_with_parent_at_binary_point() {
        let net = net("net4.json");
        let loads = net.nominal_loads();
        let model = DnrModel::with_loads(&net, loads.clone()).unwrap();
        let relaxed = RelaxedDnr::new(DnrModel::with_loads(&net, loads).unwrap(), 7.0);
        let mut z = DVector::zeros(model.layout.dim());
        for e in 0..4 {
            z[model.layout.u(e)] = if e < 3 { 1.0 } else { 0.0 };
        }
        // Penalty vanishes at binary u.
        assert_eq!(relaxed.objective(&z), model.objective(&z));
        assert_eq!(relaxed.n_eq(), model.n_eq() - 4);
        assert_eq!(relaxed.n_ineq(), model.n_ineq() + 8);
    }
}
