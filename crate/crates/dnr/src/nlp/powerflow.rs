//! Newton power-flow oracle on a fixed spanning tree: exact branch-flow
//! equations with the root voltage pinned. Independent of the NLP solver, so
//! its fixed points can cross-check solver output.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model_dnr::Layout;
use crate::network::Network;
use crate::topology::{is_radial, Topology};

pub struct PowerFlowOptions {
    /// Squared root voltage; defaults to the midpoint of the root's squared
    /// voltage box.
    pub v_root_sq: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            v_root_sq: None,
            tol: 1e-12,
            max_iter: 60,
        }
    }
}

/// Solve the tree power flow and return a full auxiliary-layout point:
/// col(p_inj, q_inj, p_flow, q_flow, l, v) with off-line flows zero and the
/// root injection slots filled from the root balance.
pub fn solve_tree_power_flow(
    network: &Network,
    topology: &Topology,
    loads: &[(f64, f64)],
    opts: &PowerFlowOptions,
) -> Result<DVector<f64>> {
    let n = network.n_buses();
    let l = network.n_lines();
    if loads.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: loads.len(),
        });
    }
    if !is_radial(network, &topology.u_reals())? {
        return Err(Error::NotRadial);
    }
    let root = network.root();
    let rb = &network.buses[root];
    let v_root = opts
        .v_root_sq
        .unwrap_or((rb.v_min * rb.v_min + rb.v_max * rb.v_max) / 2.0);

    let on = &topology.on_lines;
    let t = on.len();
    // Unknowns: x = [p_e, q_e, l_e per on-line | v_j per non-root bus].
    let on_pos: Vec<Option<usize>> = {
        let mut m = vec![None; l];
        for (k, &e) in on.iter().enumerate() {
            m[e] = Some(k);
        }
        m
    };
    let nonroot: Vec<usize> = (0..n).filter(|&j| j != root).collect();
    let v_pos: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (k, &j) in nonroot.iter().enumerate() {
            m[j] = Some(3 * t + k);
        }
        m
    };
    let dim = 4 * t;

    let mut x = DVector::zeros(dim);
    init_lossless(network, topology, loads, &on_pos, &mut x);
    for k in 0..nonroot.len() {
        x[3 * t + k] = v_root;
    }

    let v_of = |x: &DVector<f64>, j: usize| -> f64 {
        match v_pos[j] {
            Some(i) => x[i],
            None => v_root,
        }
    };

    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let mut f = DVector::zeros(dim);
        for (row2, &j) in nonroot.iter().enumerate() {
            let mut acc_p = -loads[j].0;
            let mut acc_q = -loads[j].1;
            for &e in network.inflow(j) {
                if let Some(k) = on_pos[e] {
                    acc_p -= network.lines[e].r * x[2 * t + k] - x[k];
                    acc_q -= network.lines[e].x * x[2 * t + k] - x[t + k];
                }
            }
            for &e in network.outflow(j) {
                if let Some(k) = on_pos[e] {
                    acc_p -= x[k];
                    acc_q -= x[t + k];
                }
            }
            f[2 * row2] = acc_p;
            f[2 * row2 + 1] = acc_q;
        }
        for (k, &e) in on.iter().enumerate() {
            let ln = &network.lines[e];
            let (fr, to) = network.endpoints(e);
            f[2 * (n - 1) + 2 * k] = 2.0 * (ln.r * x[k] + ln.x * x[t + k])
                - (ln.r * ln.r + ln.x * ln.x) * x[2 * t + k]
                - v_of(x, fr)
                + v_of(x, to);
            f[2 * (n - 1) + 2 * k + 1] = v_of(x, fr) * x[2 * t + k] - x[k] * x[k] - x[t + k] * x[t + k];
        }
        f
    };

    for _ in 0..opts.max_iter {
        let f = residual(&x);
        if f.amax() <= opts.tol {
            return Ok(assemble(network, topology, loads, &x, v_root, &v_pos, &on_pos));
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for (row2, &j) in nonroot.iter().enumerate() {
            for &e in network.inflow(j) {
                if let Some(k) = on_pos[e] {
                    jac[(2 * row2, 2 * t + k)] -= network.lines[e].r;
                    jac[(2 * row2, k)] += 1.0;
                    jac[(2 * row2 + 1, 2 * t + k)] -= network.lines[e].x;
                    jac[(2 * row2 + 1, t + k)] += 1.0;
                }
            }
            for &e in network.outflow(j) {
                if let Some(k) = on_pos[e] {
                    jac[(2 * row2, k)] -= 1.0;
                    jac[(2 * row2 + 1, t + k)] -= 1.0;
                }
            }
        }
        for (k, &e) in on.iter().enumerate() {
            let ln = &network.lines[e];
            let (fr, to) = network.endpoints(e);
            let r1 = 2 * (n - 1) + 2 * k;
            jac[(r1, k)] = 2.0 * ln.r;
            jac[(r1, t + k)] = 2.0 * ln.x;
            jac[(r1, 2 * t + k)] = -(ln.r * ln.r + ln.x * ln.x);
            if let Some(i) = v_pos[fr] {
                jac[(r1, i)] -= 1.0;
            }
            if let Some(i) = v_pos[to] {
                jac[(r1, i)] += 1.0;
            }
            let r2 = r1 + 1;
            jac[(r2, k)] = -2.0 * x[k];
            jac[(r2, t + k)] = -2.0 * x[t + k];
            jac[(r2, 2 * t + k)] = v_of(&x, fr);
            if let Some(i) = v_pos[fr] {
                jac[(r2, i)] = x[2 * t + k];
            }
        }
        let lu = jac.lu();
        let dx = lu
            .solve(&(-&f))
            .ok_or_else(|| Error::NoConvergence("singular power-flow Jacobian".to_string()))?;
        // Damped step: halve until the residual norm stops growing.
        let f_norm = f.norm();
        let mut alpha = 1.0;
        for _ in 0..12 {
            if residual(&(&x + alpha * &dx)).norm() <= f_norm {
                break;
            }
            alpha *= 0.5;
        }
        x += alpha * dx;
    }
    Err(Error::NoConvergence(format!(
        "power flow did not reach {:.1e} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

/// Lossless DFS flow start: each on-line carries its downstream subtree load,
/// signed by the line's stored orientation.
fn init_lossless(
    network: &Network,
    topology: &Topology,
    loads: &[(f64, f64)],
    on_pos: &[Option<usize>],
    x: &mut DVector<f64>,
) {
    let n = network.n_buses();
    let t = topology.on_lines.len();
    let root = network.root();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &e in &topology.on_lines {
        let (f, to) = network.endpoints(e);
        adj[f].push((to, e));
        adj[to].push((f, e));
    }
    // Post-order accumulation of subtree loads.
    let mut parent_edge = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(w, e) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent_edge[w] = e;
                stack.push(w);
            }
        }
    }
    let mut sub_p: Vec<f64> = loads.iter().map(|l| l.0).collect();
    let mut sub_q: Vec<f64> = loads.iter().map(|l| l.1).collect();
    for &v in order.iter().rev() {
        if v == root {
            continue;
        }
        let e = parent_edge[v];
        let (f, to) = network.endpoints(e);
        let parent = if f == v { to } else { f };
        sub_p[parent] += sub_p[v];
        sub_q[parent] += sub_q[v];
        let k = on_pos[e].unwrap();
        // Positive flow runs from -> to; flip when the child is the from-end.
        let sign = if to == v { 1.0 } else { -1.0 };
        x[k] = sign * sub_p[v];
        x[t + k] = sign * sub_q[v];
        x[2 * t + k] = 0.0;
    }
}

fn assemble(
    network: &Network,
    topology: &Topology,
    loads: &[(f64, f64)],
    x: &DVector<f64>,
    v_root: f64,
    v_pos: &[Option<usize>],
    on_pos: &[Option<usize>],
) -> DVector<f64> {
    let layout = Layout::aux(network);
    let n = network.n_buses();
    let l = network.n_lines();
    let t = topology.on_lines.len();
    let root = network.root();
    let mut z = DVector::zeros(layout.dim());
    for e in 0..l {
        if let Some(k) = on_pos[e] {
            z[layout.p_flow(e)] = x[k];
            z[layout.q_flow(e)] = x[t + k];
            z[layout.l_sq(e)] = x[2 * t + k];
        }
    }
    for j in 0..n {
        z[layout.v(j)] = match v_pos[j] {
            Some(i) => x[i],
            None => v_root,
        };
        if j != root {
            z[layout.p_inj(j)] = -loads[j].0;
            z[layout.q_inj(j)] = -loads[j].1;
        }
    }
    // Root slots from the root balance rows.
    let mut inj_p = 0.0;
    let mut inj_q = 0.0;
    for &e in network.inflow(root) {
        inj_p += network.lines[e].r * z[layout.l_sq(e)] - z[layout.p_flow(e)];
        inj_q += network.lines[e].x * z[layout.l_sq(e)] - z[layout.q_flow(e)];
    }
    for &e in network.outflow(root) {
        inj_p += z[layout.p_flow(e)];
        inj_q += z[layout.q_flow(e)];
    }
    z[layout.p_inj(root)] = inj_p + loads[root].0;
    z[layout.q_inj(root)] = inj_q + loads[root].1;
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_aux::AuxModel;
    use crate::network::load_network;
    use crate::system::ConstraintSystem;
    use crate::topology::enumerate_radial;

    fn net(name: &str) -> Network {
        load_network(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn two_bus_closed_form() {
        // Single line 1-2, r = x = 0.05, load 0.1 + j0.05 at bus 2, v1 = 1.
        // p - r l = 0.1, q - x l = 0.05, v2 = v1 - 2(rp+xq) + (r^2+x^2) l,
        // l v1 = p^2 + q^2. Fixed-point iteration gives the reference below.
        let mut file = crate::network::NetworkFile {
            base_mva: 10.0,
            buses: vec![],
            lines: vec![],
            big_m: None,
        };
        file.buses.push(crate::network::Bus {
            id: 1,
            p_load: 0.0,
            q_load: 0.0,
            v_min: 0.9,
            v_max: 1.1,
            is_root: true,
        });
        file.buses.push(crate::network::Bus {
            id: 2,
            p_load: 0.1,
            q_load: 0.05,
            v_min: 0.9,
            v_max: 1.1,
            is_root: false,
        });
        file.lines.push(crate::network::Line {
            id: 1,
            from_bus: 1,
            to_bus: 2,
            r: 0.05,
            x: 0.05,
            p_max: 0.5,
            q_max: 0.5,
        });
        let net = crate::network::build_network(file).unwrap();
        let topo = enumerate_radial(&net, 10).unwrap().remove(0);
        let loads = net.nominal_loads();
        let opts = PowerFlowOptions {
            v_root_sq: Some(1.0),
            ..Default::default()
        };
        let z = solve_tree_power_flow(&net, &topo, &loads, &opts).unwrap();
        let lay = Layout::aux(&net);
        // Independent scalar fixed point: l = (p^2+q^2)/v1 with
        // p = 0.1 + 0.05 l, q = 0.05 + 0.05 l.
        let mut l_ref = 0.0;
        for _ in 0..100 {
            let p = 0.1 + 0.05 * l_ref;
            let q = 0.05 + 0.05 * l_ref;
            l_ref = p * p + q * q;
        }
        assert!((z[lay.l_sq(0)] - l_ref).abs() < 1e-12);
        let p = 0.1 + 0.05 * l_ref;
        let q = 0.05 + 0.05 * l_ref;
        assert!((z[lay.p_flow(0)] - p).abs() < 1e-12);
        let v2 = 1.0 - 2.0 * (0.05 * p + 0.05 * q) + 0.005 * l_ref;
        assert!((z[lay.v(1)] - v2).abs() < 1e-12);
        // Root slot carries load plus losses.
        assert!((z[lay.p_inj(0)] - (0.1 + 0.05 * l_ref)).abs() < 1e-12);
    }

    #[test]
    fn satisfies_aux_equalities_on_every_tree() {
        for name in ["net4.json", "net7.json"] {
            let net = net(name);
            let loads = net.nominal_loads();
            for topo in enumerate_radial(&net, 100).unwrap() {
                let z = solve_tree_power_flow(&net, &topo, &loads, &Default::default()).unwrap();
                let aux = AuxModel::build(&net, topo, loads.clone()).unwrap();
                assert!(aux.eval_g(&z).amax() < 1e-10, "{name}");
            }
        }
    }

    #[test]
    fn flips_sign_against_orientation() {
        // In net4 topology [1,0,1,1], line 4 runs 2->4 and line 3 runs 3->4,
        // so bus 3 is fed through bus 4 against line 3's orientation.
        let net = net("net4.json");
        let topo = crate::topology::topology_from_ids(&net, &[1, 3, 4]).unwrap();
        let loads = net.nominal_loads();
        let z = solve_tree_power_flow(&net, &topo, &loads, &Default::default()).unwrap();
        let lay = Layout::aux(&net);
        assert!(z[lay.p_flow(2)] < 0.0);
    }
}
