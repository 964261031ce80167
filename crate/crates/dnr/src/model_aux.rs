//! Fixed-topology continuous program: exact voltage-drop equalities on the
//! switched-on tree, zero-flow equalities on switched-off lines, flow and
//! voltage boxes. Its multipliers are the raw material for the lift back to
//! the reconfiguration model.

use nalgebra::{DMatrix, DVector};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::model_dnr::{free_coords, Layout};
use crate::network::Network;
use crate::system::ConstraintSystem;
use crate::topology::{is_radial, Topology};

pub struct AuxModel<'a> {
    pub network: &'a Network,
    pub topology: Topology,
    pub loads: Vec<(f64, f64)>,
    pub layout: Layout,
    /// On-lines in ascending line order (rows of the tree voltage-drop and
    /// flow-box blocks follow this order).
    pub on_lines: Vec<usize>,
    /// Off-lines in ascending line order.
    pub off_lines: Vec<usize>,
}

/// Row bookkeeping for the equality block:
/// [balance_p (N) | balance_q (N) | drop_on (N-1) | current (L) | pzero_off | qzero_off].
impl<'a> AuxModel<'a> {
    pub fn build(network: &'a Network, topology: Topology, loads: Vec<(f64, f64)>) -> Result<Self> {
        if !is_radial(network, &topology.u_reals())? {
            return Err(Error::NotRadial);
        }
        if loads.len() != network.n_buses() {
            return Err(Error::DimensionMismatch {
                expected: network.n_buses(),
                got: loads.len(),
            });
        }
        let on_lines = topology.on_lines.clone();
        let off_lines: Vec<usize> = (0..network.n_lines())
            .filter(|e| !topology.is_on(*e))
            .collect();
        Ok(Self {
            network,
            topology,
            loads,
            layout: Layout::aux(network),
            on_lines,
            off_lines,
        })
    }

    pub fn n_on(&self) -> usize {
        self.on_lines.len()
    }

    pub fn n_off(&self) -> usize {
        self.off_lines.len()
    }

    /// Row ranges of the fixed-constraint equality partition (everything
    /// except the load-parameterized balance rows).
    pub fn g1_rows(&self) -> Range<usize> {
        2 * self.layout.n..self.n_eq()
    }

    /// Row ranges of the load-parameterized balance rows.
    pub fn g2_rows(&self) -> Range<usize> {
        0..2 * self.layout.n
    }

    fn inj_p(&self, z: &DVector<f64>, j: usize) -> f64 {
        if j == self.network.root() {
            z[self.layout.p_inj(j)] - self.loads[j].0
        } else {
            -self.loads[j].0
        }
    }

    fn inj_q(&self, z: &DVector<f64>, j: usize) -> f64 {
        if j == self.network.root() {
            z[self.layout.q_inj(j)] - self.loads[j].1
        } else {
            -self.loads[j].1
        }
    }

    /// Derivative of the balance rows with respect to the load vector
    /// col(d_p, d_q): each load perturbs exactly its own row, coefficient -1.
    pub fn jac_g2_wrt_d(&self) -> DMatrix<f64> {
        let n2 = 2 * self.layout.n;
        DMatrix::from_diagonal_element(n2, n2, -1.0)
    }

    pub fn free_coords(&self) -> Vec<usize> {
        free_coords(self.network, &self.layout)
    }

    pub fn pin_fixed(&self, z: &mut DVector<f64>) {
        for j in 0..self.network.n_buses() {
            if j != self.network.root() {
                z[self.layout.p_inj(j)] = -self.loads[j].0;
                z[self.layout.q_inj(j)] = -self.loads[j].1;
            }
        }
    }

    /// Append the topology's u block to an auxiliary point, producing a
    /// full-model point.
    pub fn embed(&self, z_aux: &DVector<f64>) -> DVector<f64> {
        embed(z_aux, &self.topology)
    }
}

/// Append u = u(topology) to an auxiliary point (u occupies the trailing
/// coordinates of the full layout).
pub fn embed(z_aux: &DVector<f64>, topology: &Topology) -> DVector<f64> {
    let l = topology.u.len();
    let mut z = DVector::zeros(z_aux.len() + l);
    z.rows_mut(0, z_aux.len()).copy_from(z_aux);
    for e in 0..l {
        z[z_aux.len() + e] = topology.u[e] as f64;
    }
    z
}

/// Drop the trailing u block of a full-model point.
pub fn restrict(z_full: &DVector<f64>, n_lines: usize) -> DVector<f64> {
    z_full.rows(0, z_full.len() - n_lines).into_owned()
}

impl ConstraintSystem for AuxModel<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn n_eq(&self) -> usize {
        2 * self.layout.n + self.n_on() + self.layout.l + 2 * self.n_off()
    }

    fn n_ineq(&self) -> usize {
        4 * self.n_on() + 2 * self.layout.n
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        (0..self.layout.l)
            .map(|e| self.network.lines[e].r * z[self.layout.l_sq(e)])
            .sum()
    }

    fn grad_objective(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(z.len());
        for e in 0..self.layout.l {
            g[self.layout.l_sq(e)] = self.network.lines[e].r;
        }
        g
    }

    fn eval_g(&self, z: &DVector<f64>) -> DVector<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let mut g = DVector::zeros(self.n_eq());
        for j in 0..n {
            let mut acc_p = self.inj_p(z, j);
            let mut acc_q = self.inj_q(z, j);
            for &e in net.inflow(j) {
                acc_p -= net.lines[e].r * z[lay.l_sq(e)] - z[lay.p_flow(e)];
                acc_q -= net.lines[e].x * z[lay.l_sq(e)] - z[lay.q_flow(e)];
            }
            for &e in net.outflow(j) {
                acc_p -= z[lay.p_flow(e)];
                acc_q -= z[lay.q_flow(e)];
            }
            g[j] = acc_p;
            g[n + j] = acc_q;
        }
        let mut row = 2 * n;
        for &e in &self.on_lines {
            let ln = &net.lines[e];
            let (f, t) = net.endpoints(e);
            g[row] = 2.0 * (ln.r * z[lay.p_flow(e)] + ln.x * z[lay.q_flow(e)])
                - (ln.r * ln.r + ln.x * ln.x) * z[lay.l_sq(e)]
                - z[lay.v(f)]
                + z[lay.v(t)];
            row += 1;
        }
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            let p = z[lay.p_flow(e)];
            let q = z[lay.q_flow(e)];
            g[row] = z[lay.v(f)] * z[lay.l_sq(e)] - p * p - q * q;
            row += 1;
        }
        for &e in &self.off_lines {
            g[row] = z[lay.p_flow(e)];
            row += 1;
        }
        for &e in &self.off_lines {
            g[row] = z[lay.q_flow(e)];
            row += 1;
        }
        g
    }

    fn eval_h(&self, z: &DVector<f64>) -> DVector<f64> {
        let net = self.network;
        let lay = &self.layout;
        let n = lay.n;
        let t = self.n_on();
        let mut h = DVector::zeros(self.n_ineq());
        for (k, &e) in self.on_lines.iter().enumerate() {
            let ln = &net.lines[e];
            h[k] = z[lay.p_flow(e)] - ln.p_max;
            h[t + k] = -z[lay.p_flow(e)] - ln.p_max;
            h[2 * t + k] = z[lay.q_flow(e)] - ln.q_max;
            h[3 * t + k] = -z[lay.q_flow(e)] - ln.q_max;
        }
        for j in 0..n {
            let b = &net.buses[j];
            h[4 * t + j] = z[lay.v(j)] - b.v_max * b.v_max;
            h[4 * t + n + j] = b.v_min * b.v_min - z[lay.v(j)];
        }
        h
    }

    fn jac_g(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let root = net.root();
        let mut jac = DMatrix::zeros(self.n_eq(), self.dim());
        for j in 0..n {
            if j == root {
                jac[(j, lay.p_inj(j))] = 1.0;
                jac[(n + j, lay.q_inj(j))] = 1.0;
            }
            for &e in net.inflow(j) {
                jac[(j, lay.l_sq(e))] -= net.lines[e].r;
                jac[(j, lay.p_flow(e))] += 1.0;
                jac[(n + j, lay.l_sq(e))] -= net.lines[e].x;
                jac[(n + j, lay.q_flow(e))] += 1.0;
            }
            for &e in net.outflow(j) {
                jac[(j, lay.p_flow(e))] -= 1.0;
                jac[(n + j, lay.q_flow(e))] -= 1.0;
            }
        }
        let mut row = 2 * n;
        for &e in &self.on_lines {
            let ln = &net.lines[e];
            let (f, t) = net.endpoints(e);
            jac[(row, lay.p_flow(e))] = 2.0 * ln.r;
            jac[(row, lay.q_flow(e))] = 2.0 * ln.x;
            jac[(row, lay.l_sq(e))] = -(ln.r * ln.r + ln.x * ln.x);
            jac[(row, lay.v(f))] = -1.0;
            jac[(row, lay.v(t))] = 1.0;
            row += 1;
        }
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            jac[(row, lay.v(f))] = z[lay.l_sq(e)];
            jac[(row, lay.l_sq(e))] = z[lay.v(f)];
            jac[(row, lay.p_flow(e))] = -2.0 * z[lay.p_flow(e)];
            jac[(row, lay.q_flow(e))] = -2.0 * z[lay.q_flow(e)];
            row += 1;
        }
        for &e in &self.off_lines {
            jac[(row, lay.p_flow(e))] = 1.0;
            row += 1;
        }
        for &e in &self.off_lines {
            jac[(row, lay.q_flow(e))] = 1.0;
            row += 1;
        }
        jac
    }

    fn jac_h(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        let lay = &self.layout;
        let n = lay.n;
        let t = self.n_on();
        let mut jac = DMatrix::zeros(self.n_ineq(), self.dim());
        for (k, &e) in self.on_lines.iter().enumerate() {
            jac[(k, lay.p_flow(e))] = 1.0;
            jac[(t + k, lay.p_flow(e))] = -1.0;
            jac[(2 * t + k, lay.q_flow(e))] = 1.0;
            jac[(3 * t + k, lay.q_flow(e))] = -1.0;
        }
        for j in 0..n {
            jac[(4 * t + j, lay.v(j))] = 1.0;
            jac[(4 * t + n + j, lay.v(j))] = -1.0;
        }
        jac
    }

    fn hess_lagrangian(&self, _z: &DVector<f64>, _obj_w: f64, lambda: &DVector<f64>) -> DMatrix<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let current_base = 2 * n + self.n_on();
        let mut hess = DMatrix::zeros(self.dim(), self.dim());
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            let lam = lambda[current_base + e];
            hess[(lay.v(f), lay.l_sq(e))] += lam;
            hess[(lay.l_sq(e), lay.v(f))] += lam;
            hess[(lay.p_flow(e), lay.p_flow(e))] += -2.0 * lam;
            hess[(lay.q_flow(e), lay.q_flow(e))] += -2.0 * lam;
        }
        hess
    }

    fn g_labels(&self) -> Vec<(String, Range<usize>)> {
        let (n, l) = (self.layout.n, self.layout.l);
        let t = self.n_on();
        let o = self.n_off();
        let drop = 2 * n;
        let cur = drop + t;
        let pz = cur + l;
        let qz = pz + o;
        vec![
            ("balance_p".into(), 0..n),
            ("balance_q".into(), n..2 * n),
            ("drop_on".into(), drop..cur),
            ("current".into(), cur..pz),
            ("pzero_off".into(), pz..qz),
            ("qzero_off".into(), qz..qz + o),
        ]
    }

    fn h_labels(&self) -> Vec<(String, Range<usize>)> {
        let n = self.layout.n;
        let t = self.n_on();
        vec![
            ("pflow_ub".into(), 0..t),
            ("pflow_lb".into(), t..2 * t),
            ("qflow_ub".into(), 2 * t..3 * t),
            ("qflow_lb".into(), 3 * t..4 * t),
            ("v_ub".into(), 4 * t..4 * t + n),
            ("v_lb".into(), 4 * t + n..4 * t + 2 * n),
        ]
    }
}
