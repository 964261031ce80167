//! The reconfiguration model in compact form: variable layout, objective,
//! equality block g, inequality block h, and analytic Jacobians.
//!
//! Injection convention: non-root bus injections are fixed at the negated
//! load and enter the power-balance residuals as constants (their z-slots are
//! carried for layout compatibility but have zero Jacobian columns). The root
//! slot holds the substation generation, a free variable.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::system::{ConstraintSystem, UStructure};

/// Index map for z = col(p_inj, q_inj, p_flow, q_flow, l, v [, u]).
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
    pub l: usize,
    pub with_u: bool,
}

impl Layout {
    pub fn full(network: &Network) -> Self {
        Self {
            n: network.n_buses(),
            l: network.n_lines(),
            with_u: true,
        }
    }
    pub fn aux(network: &Network) -> Self {
        Self {
            n: network.n_buses(),
            l: network.n_lines(),
            with_u: false,
        }
    }
    pub fn dim(&self) -> usize {
        3 * self.n + 3 * self.l + if self.with_u { self.l } else { 0 }
    }
    pub fn p_inj(&self, i: usize) -> usize {
        i
    }
    pub fn q_inj(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn p_flow(&self, e: usize) -> usize {
        2 * self.n + e
    }
    pub fn q_flow(&self, e: usize) -> usize {
        2 * self.n + self.l + e
    }
    pub fn l_sq(&self, e: usize) -> usize {
        2 * self.n + 2 * self.l + e
    }
    pub fn v(&self, i: usize) -> usize {
        2 * self.n + 3 * self.l + i
    }
    pub fn u(&self, e: usize) -> usize {
        debug_assert!(self.with_u);
        3 * self.n + 3 * self.l + e
    }
}

/// Named view of a full decision vector; also the point-file JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimalPoint {
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub l: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u: Vec<f64>,
}

impl PrimalPoint {
    pub fn from_vector(layout: &Layout, z: &DVector<f64>) -> Self {
        let n = layout.n;
        let l = layout.l;
        Self {
            p_inj: (0..n).map(|i| z[layout.p_inj(i)]).collect(),
            q_inj: (0..n).map(|i| z[layout.q_inj(i)]).collect(),
            p_flow: (0..l).map(|e| z[layout.p_flow(e)]).collect(),
            q_flow: (0..l).map(|e| z[layout.q_flow(e)]).collect(),
            l: (0..l).map(|e| z[layout.l_sq(e)]).collect(),
            v: (0..n).map(|i| z[layout.v(i)]).collect(),
            u: if layout.with_u {
                (0..l).map(|e| z[layout.u(e)]).collect()
            } else {
                Vec::new()
            },
        }
    }

    pub fn to_vector(&self, layout: &Layout) -> Result<DVector<f64>> {
        let n = layout.n;
        let l = layout.l;
        let want_u = if layout.with_u { l } else { 0 };
        if self.p_inj.len() != n
            || self.q_inj.len() != n
            || self.p_flow.len() != l
            || self.q_flow.len() != l
            || self.l.len() != l
            || self.v.len() != n
            || self.u.len() != want_u
        {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: self.p_inj.len()
                    + self.q_inj.len()
                    + self.p_flow.len()
                    + self.q_flow.len()
                    + self.l.len()
                    + self.v.len()
                    + self.u.len(),
            });
        }
        let mut z = DVector::zeros(layout.dim());
        for i in 0..n {
            z[layout.p_inj(i)] = self.p_inj[i];
            z[layout.q_inj(i)] = self.q_inj[i];
            z[layout.v(i)] = self.v[i];
        }
        for e in 0..l {
            z[layout.p_flow(e)] = self.p_flow[e];
            z[layout.q_flow(e)] = self.q_flow[e];
            z[layout.l_sq(e)] = self.l[e];
            if layout.with_u {
                z[layout.u(e)] = self.u[e];
            }
        }
        Ok(z)
    }
}

/// Assembled reconfiguration model over a network with a given load vector.
pub struct DnrModel<'a> {
    pub network: &'a Network,
    pub loads: Vec<(f64, f64)>,
    pub layout: Layout,
}

impl<'a> DnrModel<'a> {
    pub fn new(network: &'a Network) -> Self {
        Self {
            network,
            loads: network.nominal_loads(),
            layout: Layout::full(network),
        }
    }

    pub fn with_loads(network: &'a Network, loads: Vec<(f64, f64)>) -> Result<Self> {
        if loads.len() != network.n_buses() {
            return Err(Error::DimensionMismatch {
                expected: network.n_buses(),
                got: loads.len(),
            });
        }
        Ok(Self {
            network,
            loads,
            layout: Layout::full(network),
        })
    }

    /// Real injection at bus `j`: root slot is free generation net of the
    /// root load, other buses are pinned to the negated load.
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

    /// Coordinates the solver may move: everything except the pinned
    /// non-root injection slots.
    pub fn free_coords(&self) -> Vec<usize> {
        free_coords(self.network, &self.layout)
    }

    /// Fill the pinned injection slots of `z` with their required values.
    pub fn pin_fixed(&self, z: &mut DVector<f64>) {
        for j in 0..self.network.n_buses() {
            if j != self.network.root() {
                z[self.layout.p_inj(j)] = -self.loads[j].0;
                z[self.layout.q_inj(j)] = -self.loads[j].1;
            }
        }
    }
}

pub fn free_coords(network: &Network, layout: &Layout) -> Vec<usize> {
    let mut fixed = vec![false; layout.dim()];
    for j in 0..network.n_buses() {
        if j != network.root() {
            fixed[layout.p_inj(j)] = true;
            fixed[layout.q_inj(j)] = true;
        }
    }
    (0..layout.dim()).filter(|&i| !fixed[i]).collect()
}

/// Power-balance residual rows shared by both models: real part when
/// `real` is true, reactive otherwise. Row j:
/// inj_j - sum_{ij in L_j^+}(w_ij l_ij - f_ij) - sum_{jk in L_j^-} f_jk.
fn balance_row(
    net: &Network,
    layout: &Layout,
    z: &DVector<f64>,
    inj: f64,
    j: usize,
    real: bool,
) -> f64 {
    let mut acc = inj;
    for &e in net.inflow(j) {
        let w = if real { net.lines[e].r } else { net.lines[e].x };
        let f = if real {
            z[layout.p_flow(e)]
        } else {
            z[layout.q_flow(e)]
        };
        acc -= w * z[layout.l_sq(e)] - f;
    }
    for &e in net.outflow(j) {
        let f = if real {
            z[layout.p_flow(e)]
        } else {
            z[layout.q_flow(e)]
        };
        acc -= f;
    }
    acc
}

fn balance_jac(
    net: &Network,
    layout: &Layout,
    jac: &mut DMatrix<f64>,
    row: usize,
    j: usize,
    real: bool,
    root: usize,
) {
    if j == root {
        let col = if real {
            layout.p_inj(j)
        } else {
            layout.q_inj(j)
        };
        jac[(row, col)] = 1.0;
    }
    for &e in net.inflow(j) {
        let w = if real { net.lines[e].r } else { net.lines[e].x };
        let f = if real {
            layout.p_flow(e)
        } else {
            layout.q_flow(e)
        };
        jac[(row, layout.l_sq(e))] -= w;
        jac[(row, f)] += 1.0;
    }
    for &e in net.outflow(j) {
        let f = if real {
            layout.p_flow(e)
        } else {
            layout.q_flow(e)
        };
        jac[(row, f)] -= 1.0;
    }
}

impl ConstraintSystem for DnrModel<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn n_eq(&self) -> usize {
        2 * self.layout.n + 2 * self.layout.l + 1
    }

    fn n_ineq(&self) -> usize {
        6 * self.layout.l + 3 * self.layout.n
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
            g[j] = balance_row(net, lay, z, self.inj_p(z, j), j, true);
            g[n + j] = balance_row(net, lay, z, self.inj_q(z, j), j, false);
        }
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            let p = z[lay.p_flow(e)];
            let q = z[lay.q_flow(e)];
            g[2 * n + e] = z[lay.v(f)] * z[lay.l_sq(e)] - p * p - q * q;
            let u = z[lay.u(e)];
            g[2 * n + l + e] = u * (u - 1.0);
        }
        let total_u: f64 = (0..l).map(|e| z[lay.u(e)]).sum();
        g[2 * n + 2 * l] = total_u - (n as f64 - 1.0);
        g
    }

    fn eval_h(&self, z: &DVector<f64>) -> DVector<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let m = net.big_m;
        let mut h = DVector::zeros(self.n_ineq());
        for e in 0..l {
            let ln = &net.lines[e];
            let (f, t) = net.endpoints(e);
            let p = z[lay.p_flow(e)];
            let q = z[lay.q_flow(e)];
            let lc = z[lay.l_sq(e)];
            let u = z[lay.u(e)];
            let drop = 2.0 * (ln.r * p + ln.x * q) - (ln.r * ln.r + ln.x * ln.x) * lc;
            let dv = z[lay.v(f)] - z[lay.v(t)];
            h[e] = drop - m * (1.0 - u) - dv;
            h[l + e] = dv - drop - m * (1.0 - u);
            h[2 * l + e] = p - u * ln.p_max;
            h[3 * l + e] = -p - u * ln.p_max;
            h[4 * l + e] = q - u * ln.q_max;
            h[5 * l + e] = -q - u * ln.q_max;
        }
        for j in 0..n {
            let b = &net.buses[j];
            h[6 * l + j] = z[lay.v(j)] - b.v_max * b.v_max;
            h[6 * l + n + j] = b.v_min * b.v_min - z[lay.v(j)];
            let deg: f64 = net.incident(j).map(|e| z[lay.u(e)]).sum();
            h[6 * l + 2 * n + j] = 1.0 - deg;
        }
        h
    }

    fn jac_g(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let mut jac = DMatrix::zeros(self.n_eq(), self.dim());
        let root = net.root();
        for j in 0..n {
            balance_jac(net, lay, &mut jac, j, j, true, root);
            balance_jac(net, lay, &mut jac, n + j, j, false, root);
        }
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            let row = 2 * n + e;
            jac[(row, lay.v(f))] = z[lay.l_sq(e)];
            jac[(row, lay.l_sq(e))] = z[lay.v(f)];
            jac[(row, lay.p_flow(e))] = -2.0 * z[lay.p_flow(e)];
            jac[(row, lay.q_flow(e))] = -2.0 * z[lay.q_flow(e)];
            jac[(2 * n + l + e, lay.u(e))] = 2.0 * z[lay.u(e)] - 1.0;
            jac[(2 * n + 2 * l, lay.u(e))] = 1.0;
        }
        jac
    }

    fn jac_h(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let m = net.big_m;
        let mut jac = DMatrix::zeros(self.n_ineq(), self.dim());
        for e in 0..l {
            let ln = &net.lines[e];
            let (f, t) = net.endpoints(e);
            let rx2 = ln.r * ln.r + ln.x * ln.x;
            // voltage-drop upper side
            jac[(e, lay.p_flow(e))] = 2.0 * ln.r;
            jac[(e, lay.q_flow(e))] = 2.0 * ln.x;
            jac[(e, lay.l_sq(e))] = -rx2;
            jac[(e, lay.v(f))] = -1.0;
            jac[(e, lay.v(t))] = 1.0;
            jac[(e, lay.u(e))] = m;
            // voltage-drop lower side
            jac[(l + e, lay.p_flow(e))] = -2.0 * ln.r;
            jac[(l + e, lay.q_flow(e))] = -2.0 * ln.x;
            jac[(l + e, lay.l_sq(e))] = rx2;
            jac[(l + e, lay.v(f))] = 1.0;
            jac[(l + e, lay.v(t))] = -1.0;
            jac[(l + e, lay.u(e))] = m;
            // flow boxes scaled by the line state
            jac[(2 * l + e, lay.p_flow(e))] = 1.0;
            jac[(2 * l + e, lay.u(e))] = -ln.p_max;
            jac[(3 * l + e, lay.p_flow(e))] = -1.0;
            jac[(3 * l + e, lay.u(e))] = -ln.p_max;
            jac[(4 * l + e, lay.q_flow(e))] = 1.0;
            jac[(4 * l + e, lay.u(e))] = -ln.q_max;
            jac[(5 * l + e, lay.q_flow(e))] = -1.0;
            jac[(5 * l + e, lay.u(e))] = -ln.q_max;
        }
        for j in 0..n {
            jac[(6 * l + j, lay.v(j))] = 1.0;
            jac[(6 * l + n + j, lay.v(j))] = -1.0;
            for e in net.incident(j) {
                jac[(6 * l + 2 * n + j, lay.u(e))] = -1.0;
            }
        }
        jac
    }

    fn hess_lagrangian(&self, z: &DVector<f64>, _obj_w: f64, lambda: &DVector<f64>) -> DMatrix<f64> {
        let net = self.network;
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let mut hess = DMatrix::zeros(self.dim(), self.dim());
        for e in 0..l {
            let (f, _) = net.endpoints(e);
            let lam_f = lambda[2 * n + e];
            hess[(lay.v(f), lay.l_sq(e))] += lam_f;
            hess[(lay.l_sq(e), lay.v(f))] += lam_f;
            hess[(lay.p_flow(e), lay.p_flow(e))] += -2.0 * lam_f;
            hess[(lay.q_flow(e), lay.q_flow(e))] += -2.0 * lam_f;
            let lam_j = lambda[2 * n + l + e];
            hess[(lay.u(e), lay.u(e))] += 2.0 * lam_j;
        }
        let _ = z;
        hess
    }

    fn g_labels(&self) -> Vec<(String, Range<usize>)> {
        let (n, l) = (self.layout.n, self.layout.l);
        vec![
            ("balance_p".into(), 0..n),
            ("balance_q".into(), n..2 * n),
            ("current".into(), 2 * n..2 * n + l),
            ("line_state".into(), 2 * n + l..2 * n + 2 * l),
            ("tree_count".into(), 2 * n + 2 * l..2 * n + 2 * l + 1),
        ]
    }

    fn h_labels(&self) -> Vec<(String, Range<usize>)> {
        let (n, l) = (self.layout.n, self.layout.l);
        vec![
            ("drop_ub".into(), 0..l),
            ("drop_lb".into(), l..2 * l),
            ("pflow_ub".into(), 2 * l..3 * l),
            ("pflow_lb".into(), 3 * l..4 * l),
            ("qflow_ub".into(), 4 * l..5 * l),
            ("qflow_lb".into(), 5 * l..6 * l),
            ("v_ub".into(), 6 * l..6 * l + n),
            ("v_lb".into(), 6 * l + n..6 * l + 2 * n),
            ("degree".into(), 6 * l + 2 * n..6 * l + 3 * n),
        ]
    }

    fn u_structure(&self) -> Option<UStructure> {
        let (n, l) = (self.layout.n, self.layout.l);
        Some(UStructure {
            state_rows: 2 * n + l..2 * n + 2 * l,
            count_row: 2 * n + 2 * l,
            u_cols: self.layout.u(0)..self.layout.u(0) + l,
        })
    }
}

/// Labeled dump of g and h residuals for debugging.
pub fn debug_residuals(sys: &dyn ConstraintSystem, z: &DVector<f64>) -> String {
    let mut out = String::new();
    let g = sys.eval_g(z);
    let h = sys.eval_h(z);
    for (label, range) in sys.g_labels() {
        for i in range {
            out.push_str(&format!("g[{label}][{i}] = {:+.6e}\n", g[i]));
        }
    }
    for (label, range) in sys.h_labels() {
        for i in range {
            out.push_str(&format!("h[{label}][{i}] = {:+.6e}\n", h[i]));
        }
    }
    out
}
