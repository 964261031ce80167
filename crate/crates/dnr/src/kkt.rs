//! Multiplier certificates and constraint-qualification diagnostics:
//! KKT residual checks, LICQ rank tests with an explicit dependence witness
//! for the line-state block, MFCQ tests, the lift of fixed-topology
//! multipliers to the full reconfiguration model, and nonnegative
//! least-squares multiplier recovery.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::model_aux::AuxModel;
use crate::nlp::{self, nnls::nnls, SolveStatus, SolverOptions};
use crate::system::{active_set, ConstraintSystem};

/// Named multipliers of the reconfiguration model, one field per constraint
/// block in row order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnrMultipliers {
    pub balance_p: Vec<f64>,
    pub balance_q: Vec<f64>,
    pub current: Vec<f64>,
    pub line_state: Vec<f64>,
    pub tree_count: f64,
    pub drop_ub: Vec<f64>,
    pub drop_lb: Vec<f64>,
    pub pflow_ub: Vec<f64>,
    pub pflow_lb: Vec<f64>,
    pub qflow_ub: Vec<f64>,
    pub qflow_lb: Vec<f64>,
    pub v_ub: Vec<f64>,
    pub v_lb: Vec<f64>,
    pub degree: Vec<f64>,
}

impl DnrMultipliers {
    pub fn zeros(n: usize, l: usize) -> Self {
        Self {
            balance_p: vec![0.0; n],
            balance_q: vec![0.0; n],
            current: vec![0.0; l],
            line_state: vec![0.0; l],
            tree_count: 0.0,
            drop_ub: vec![0.0; l],
            drop_lb: vec![0.0; l],
            pflow_ub: vec![0.0; l],
            pflow_lb: vec![0.0; l],
            qflow_ub: vec![0.0; l],
            qflow_lb: vec![0.0; l],
            v_ub: vec![0.0; n],
            v_lb: vec![0.0; n],
            degree: vec![0.0; n],
        }
    }

    /// Flatten to (lambda, mu) in the model's row order.
    pub fn to_flat(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lam: Vec<f64> = Vec::new();
        lam.extend(&self.balance_p);
        lam.extend(&self.balance_q);
        lam.extend(&self.current);
        lam.extend(&self.line_state);
        lam.push(self.tree_count);
        let mut mu: Vec<f64> = Vec::new();
        mu.extend(&self.drop_ub);
        mu.extend(&self.drop_lb);
        mu.extend(&self.pflow_ub);
        mu.extend(&self.pflow_lb);
        mu.extend(&self.qflow_ub);
        mu.extend(&self.qflow_lb);
        mu.extend(&self.v_ub);
        mu.extend(&self.v_lb);
        mu.extend(&self.degree);
        (DVector::from_vec(lam), DVector::from_vec(mu))
    }

    pub fn from_flat(n: usize, l: usize, lam: &DVector<f64>, mu: &DVector<f64>) -> Result<Self> {
        if lam.len() != 2 * n + 2 * l + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * n + 2 * l + 1,
                got: lam.len(),
            });
        }
        if mu.len() != 6 * l + 3 * n {
            return Err(Error::DimensionMismatch {
                expected: 6 * l + 3 * n,
                got: mu.len(),
            });
        }
        let seg = |v: &DVector<f64>, r: Range<usize>| v.rows(r.start, r.len()).iter().copied().collect();
        Ok(Self {
            balance_p: seg(lam, 0..n),
            balance_q: seg(lam, n..2 * n),
            current: seg(lam, 2 * n..2 * n + l),
            line_state: seg(lam, 2 * n + l..2 * n + 2 * l),
            tree_count: lam[2 * n + 2 * l],
            drop_ub: seg(mu, 0..l),
            drop_lb: seg(mu, l..2 * l),
            pflow_ub: seg(mu, 2 * l..3 * l),
            pflow_lb: seg(mu, 3 * l..4 * l),
            qflow_ub: seg(mu, 4 * l..5 * l),
            qflow_lb: seg(mu, 5 * l..6 * l),
            v_ub: seg(mu, 6 * l..6 * l + n),
            v_lb: seg(mu, 6 * l + n..6 * l + 2 * n),
            degree: seg(mu, 6 * l + 2 * n..6 * l + 3 * n),
        })
    }
}

/// Named multipliers of the fixed-topology model. On-line blocks follow the
/// model's ascending on-line order, off-line blocks its off-line order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxMultipliers {
    pub balance_p: Vec<f64>,
    pub balance_q: Vec<f64>,
    pub drop_on: Vec<f64>,
    pub current: Vec<f64>,
    pub pzero_off: Vec<f64>,
    pub qzero_off: Vec<f64>,
    pub pflow_ub: Vec<f64>,
    pub pflow_lb: Vec<f64>,
    pub qflow_ub: Vec<f64>,
    pub qflow_lb: Vec<f64>,
    pub v_ub: Vec<f64>,
    pub v_lb: Vec<f64>,
}

impl AuxMultipliers {
    pub fn to_flat(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lam: Vec<f64> = Vec::new();
        lam.extend(&self.balance_p);
        lam.extend(&self.balance_q);
        lam.extend(&self.drop_on);
        lam.extend(&self.current);
        lam.extend(&self.pzero_off);
        lam.extend(&self.qzero_off);
        let mut mu: Vec<f64> = Vec::new();
        mu.extend(&self.pflow_ub);
        mu.extend(&self.pflow_lb);
        mu.extend(&self.qflow_ub);
        mu.extend(&self.qflow_lb);
        mu.extend(&self.v_ub);
        mu.extend(&self.v_lb);
        (DVector::from_vec(lam), DVector::from_vec(mu))
    }

    pub fn from_flat(
        aux: &AuxModel,
        lam: &DVector<f64>,
        mu: &DVector<f64>,
    ) -> Result<Self> {
        if lam.len() != aux.n_eq() {
            return Err(Error::DimensionMismatch {
                expected: aux.n_eq(),
                got: lam.len(),
            });
        }
        if mu.len() != aux.n_ineq() {
            return Err(Error::DimensionMismatch {
                expected: aux.n_ineq(),
                got: mu.len(),
            });
        }
        let n = aux.layout.n;
        let l = aux.layout.l;
        let t = aux.n_on();
        let o = aux.n_off();
        let seg = |v: &DVector<f64>, r: Range<usize>| v.rows(r.start, r.len()).iter().copied().collect();
        Ok(Self {
            balance_p: seg(lam, 0..n),
            balance_q: seg(lam, n..2 * n),
            drop_on: seg(lam, 2 * n..2 * n + t),
            current: seg(lam, 2 * n + t..2 * n + t + l),
            pzero_off: seg(lam, 2 * n + t + l..2 * n + t + l + o),
            qzero_off: seg(lam, 2 * n + t + l + o..2 * n + t + l + 2 * o),
            pflow_ub: seg(mu, 0..t),
            pflow_lb: seg(mu, t..2 * t),
            qflow_ub: seg(mu, 2 * t..3 * t),
            qflow_lb: seg(mu, 3 * t..4 * t),
            v_ub: seg(mu, 4 * t..4 * t + n),
            v_lb: seg(mu, 4 * t + n..4 * t + 2 * n),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub eq_violation: f64,
    pub ineq_violation: f64,
    pub complementarity: f64,
    pub dual_min: f64,
    pub passed: bool,
}

/// Residuals of the first-order conditions at (z, lambda, mu).
pub fn check_kkt(
    sys: &dyn ConstraintSystem,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    tol: f64,
) -> KktReport {
    let grad = sys.grad_objective(z);
    let stat = (grad + sys.jac_g(z).transpose() * lambda + sys.jac_h(z).transpose() * mu).amax();
    let eq = sys.eval_g(z).amax();
    let h = sys.eval_h(z);
    let ineq = h.iter().fold(0.0f64, |m, &v| m.max(v));
    let comp = (0..h.len())
        .map(|i| (mu[i] * h[i]).abs())
        .fold(0.0f64, f64::max);
    let dual_min = mu.iter().fold(0.0f64, |m, &v| m.min(v));
    KktReport {
        stationarity: stat,
        eq_violation: eq,
        ineq_violation: ineq,
        complementarity: comp,
        dual_min,
        passed: stat <= tol && eq <= tol && ineq <= tol && comp <= tol && dual_min >= -tol,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UBlockReport {
    /// Rows of the line-state/cardinality sub-block (count of them).
    pub rows: usize,
    pub rank: usize,
    /// Coefficients of the exact vanishing combination of the sub-block
    /// gradients, in order: state rows then the cardinality row.
    pub witness: Vec<f64>,
    /// Infinity norm of the witness combination applied to the gradients.
    pub witness_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LicqReport {
    pub n_active_gradients: usize,
    pub rank: usize,
    pub holds: bool,
    pub active_inequalities: Vec<usize>,
    pub u_block: Option<UBlockReport>,
}

fn svd_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Stack of active gradients at z: all equality rows plus active inequality
/// rows.
fn active_gradient_matrix(
    sys: &dyn ConstraintSystem,
    z: &DVector<f64>,
    active: &[usize],
) -> DMatrix<f64> {
    let jg = sys.jac_g(z);
    let jh = sys.jac_h(z);
    let rows = jg.nrows() + active.len();
    let mut m = DMatrix::zeros(rows, sys.dim());
    m.view_mut((0, 0), (jg.nrows(), sys.dim())).copy_from(&jg);
    for (k, &i) in active.iter().enumerate() {
        m.row_mut(jg.nrows() + k).copy_from(&jh.row(i));
    }
    m
}

pub fn check_licq(
    sys: &dyn ConstraintSystem,
    z: &DVector<f64>,
    activity_tol: f64,
    rank_tol: f64,
) -> LicqReport {
    let active = active_set(sys, z, activity_tol);
    let m = active_gradient_matrix(sys, z, &active);
    let rank = svd_rank(&m, rank_tol);
    let n_rows = m.nrows();

    let u_block = sys.u_structure().map(|us| {
        let jg = sys.jac_g(z);
        let rows: Vec<usize> = us.state_rows.clone().chain([us.count_row]).collect();
        let sub = DMatrix::from_fn(rows.len(), sys.dim(), |r, c| jg[(rows[r], c)]);
        let sub_rank = svd_rank(&sub, rank_tol);
        // The vanishing combination: +1 per switched-on state row, -1 per
        // switched-off state row, -1 for the cardinality row. Exact whenever
        // u is binary.
        let mut witness = Vec::with_capacity(rows.len());
        for e in us.state_rows.clone() {
            let col = us.u_cols.start + (e - us.state_rows.start);
            let grad_u = jg[(e, col)]; // 2u - 1
            witness.push(if grad_u >= 0.0 { 1.0 } else { -1.0 });
        }
        witness.push(-1.0);
        let mut combo = DVector::zeros(sys.dim());
        for (k, &r) in rows.iter().enumerate() {
            for c in 0..sys.dim() {
                combo[c] += witness[k] * jg[(r, c)];
            }
        }
        UBlockReport {
            rows: rows.len(),
            rank: sub_rank,
            witness,
            witness_residual: combo.amax(),
        }
    });

    LicqReport {
        n_active_gradients: n_rows,
        rank,
        holds: rank == n_rows,
        active_inequalities: active,
        u_block,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MfcqReport {
    pub eq_rank: usize,
    pub n_eq: usize,
    pub eq_full_row_rank: bool,
    /// Best strict-descent margin found for the active inequalities along a
    /// direction in the equality null space, when the rank test passed.
    pub margin: Option<f64>,
    pub holds: bool,
}

/// Linear program min c'x s.t. A x = b, G x <= g, solved with the interior
/// point method (zero Hessian).
struct LinearProgram {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g_mat: DMatrix<f64>,
    g_rhs: DVector<f64>,
}

impl ConstraintSystem for LinearProgram {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn n_eq(&self) -> usize {
        self.a.nrows()
    }
    fn n_ineq(&self) -> usize {
        self.g_mat.nrows()
    }
    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.c.dot(z)
    }
    fn grad_objective(&self, _z: &DVector<f64>) -> DVector<f64> {
        self.c.clone()
    }
    fn eval_g(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z - &self.b
    }
    fn eval_h(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.g_mat * z - &self.g_rhs
    }
    fn jac_g(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn jac_h(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        self.g_mat.clone()
    }
    fn hess_lagrangian(&self, _z: &DVector<f64>, _w: f64, _l: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim(), self.dim())
    }
    fn g_labels(&self) -> Vec<(String, Range<usize>)> {
        vec![("eq".into(), 0..self.n_eq())]
    }
    fn h_labels(&self) -> Vec<(String, Range<usize>)> {
        vec![("ineq".into(), 0..self.n_ineq())]
    }
}

/// Rank test on the equality Jacobian plus, when it passes, a search for a
/// direction in its null space that strictly decreases every active
/// inequality. The search maximizes the common margin t over the unit box.
pub fn check_mfcq(
    sys: &dyn ConstraintSystem,
    z: &DVector<f64>,
    activity_tol: f64,
    rank_tol: f64,
) -> Result<MfcqReport> {
    let jg = sys.jac_g(z);
    let eq_rank = svd_rank(&jg, rank_tol);
    let full = eq_rank == jg.nrows();
    if !full {
        return Ok(MfcqReport {
            eq_rank,
            n_eq: jg.nrows(),
            eq_full_row_rank: false,
            margin: None,
            holds: false,
        });
    }
    let active = active_set(sys, z, activity_tol);
    if active.is_empty() {
        return Ok(MfcqReport {
            eq_rank,
            n_eq: jg.nrows(),
            eq_full_row_rank: true,
            margin: Some(1.0),
            holds: true,
        });
    }
    let jh = sys.jac_h(z);
    let n = sys.dim();
    let na = active.len();
    // Variables (d, t): max t s.t. Jg d = 0, (Jh_A d)_i + t <= 0, |d| <= 1,
    // t <= 1.
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let mut a = DMatrix::zeros(jg.nrows(), n + 1);
    a.view_mut((0, 0), (jg.nrows(), n)).copy_from(&jg);
    let rows = na + 2 * n + 1;
    let mut g_mat = DMatrix::zeros(rows, n + 1);
    let mut g_rhs = DVector::zeros(rows);
    for (k, &i) in active.iter().enumerate() {
        for j in 0..n {
            g_mat[(k, j)] = jh[(i, j)];
        }
        g_mat[(k, n)] = 1.0;
    }
    for j in 0..n {
        g_mat[(na + j, j)] = 1.0;
        g_rhs[na + j] = 1.0;
        g_mat[(na + n + j, j)] = -1.0;
        g_rhs[na + n + j] = 1.0;
    }
    g_mat[(na + 2 * n, n)] = 1.0;
    g_rhs[na + 2 * n] = 1.0;
    let lp = LinearProgram {
        c,
        a,
        b: DVector::zeros(jg.nrows()),
        g_mat,
        g_rhs,
    };
    let mut x0 = DVector::zeros(n + 1);
    x0[n] = -1.0;
    let opts = SolverOptions {
        tol_stat: 1e-9,
        tol_feas: 1e-9,
        tol_comp: 1e-9,
        ..Default::default()
    };
    let res = nlp::solve(&lp, &x0, &opts)?;
    if res.status != SolveStatus::Optimal {
        return Err(Error::LpFailure(format!(
            "direction search ended with {:?}",
            res.status
        )));
    }
    let margin = res.z[n];
    Ok(MfcqReport {
        eq_rank,
        n_eq: jg.nrows(),
        eq_full_row_rank: true,
        margin: Some(margin),
        holds: margin > 1e-6,
    })
}

/// Lift optimal fixed-topology multipliers to a full certificate for the
/// reconfiguration model at the embedded point. Requires the input to be a
/// first-order point of the fixed-topology program to `input_tol`.
pub fn lift_multipliers(
    aux: &AuxModel,
    z_aux: &DVector<f64>,
    m_aux: &AuxMultipliers,
    input_tol: f64,
) -> Result<DnrMultipliers> {
    let (lam_aux, mu_aux) = m_aux.to_flat();
    let rep = check_kkt(aux, z_aux, &lam_aux, &mu_aux, input_tol);
    if !rep.passed {
        let residual = rep
            .stationarity
            .max(rep.eq_violation)
            .max(rep.ineq_violation)
            .max(rep.complementarity)
            .max(-rep.dual_min);
        return Err(Error::NotOptimalInput { residual });
    }

    let net = aux.network;
    let n = aux.layout.n;
    let l = aux.layout.l;
    let m_big = net.big_m;
    let mut out = DnrMultipliers::zeros(n, l);
    out.balance_p = m_aux.balance_p.clone();
    out.balance_q = m_aux.balance_q.clone();
    out.current = m_aux.current.clone();
    out.v_ub = m_aux.v_ub.clone();
    out.v_lb = m_aux.v_lb.clone();

    for (k, &e) in aux.on_lines.iter().enumerate() {
        let ln = &net.lines[e];
        let iota = m_aux.drop_on[k];
        // Split the exact drop multiplier across the two one-sided rows.
        out.drop_ub[e] = iota.max(0.0);
        out.drop_lb[e] = (-iota).max(0.0);
        out.pflow_ub[e] = m_aux.pflow_ub[k];
        out.pflow_lb[e] = m_aux.pflow_lb[k];
        out.qflow_ub[e] = m_aux.qflow_ub[k];
        out.qflow_lb[e] = m_aux.qflow_lb[k];
        // Line-state multiplier absorbing the u-column of every lifted row;
        // the state gradient is +1 on a switched-on line.
        out.line_state[e] = -m_big * (out.drop_ub[e] + out.drop_lb[e])
            + ln.p_max * (out.pflow_ub[e] + out.pflow_lb[e])
            + ln.q_max * (out.qflow_ub[e] + out.qflow_lb[e]);
    }
    for (k, &e) in aux.off_lines.iter().enumerate() {
        let ln = &net.lines[e];
        let ip = m_aux.pzero_off[k];
        let iq = m_aux.qzero_off[k];
        out.pflow_ub[e] = ip.max(0.0);
        out.pflow_lb[e] = (-ip).max(0.0);
        out.qflow_ub[e] = iq.max(0.0);
        out.qflow_lb[e] = (-iq).max(0.0);
        // The state gradient is -1 on a switched-off line, flipping the sign
        // of the absorbed u-column.
        out.line_state[e] = -ln.p_max * (out.pflow_ub[e] + out.pflow_lb[e])
            - ln.q_max * (out.qflow_ub[e] + out.qflow_lb[e]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveredMultipliers {
    pub lambda: Vec<f64>,
    /// Full-length inequality multipliers (zero off the active set).
    pub mu: Vec<f64>,
    /// Stationarity residual of the recovered combination.
    pub residual: f64,
}

/// Independent multiplier recovery by nonnegative least squares:
/// -grad f = Jg' lambda + Jh_A' mu_A with mu_A >= 0 and lambda free
/// (split into positive and negative parts).
pub fn recover_multipliers_least_squares(
    sys: &dyn ConstraintSystem,
    z: &DVector<f64>,
    activity_tol: f64,
) -> RecoveredMultipliers {
    let active = active_set(sys, z, activity_tol);
    let jg = sys.jac_g(z);
    let jh = sys.jac_h(z);
    let n = sys.dim();
    let mg = jg.nrows();
    let na = active.len();
    let mut a = DMatrix::zeros(n, 2 * mg + na);
    for r in 0..mg {
        for c in 0..n {
            a[(c, r)] = jg[(r, c)];
            a[(c, mg + r)] = -jg[(r, c)];
        }
    }
    for (k, &i) in active.iter().enumerate() {
        for c in 0..n {
            a[(c, 2 * mg + k)] = jh[(i, c)];
        }
    }
    let b = -sys.grad_objective(z);
    let x = nnls(&a, &b);
    let lambda: Vec<f64> = (0..mg).map(|r| x[r] - x[mg + r]).collect();
    let mut mu = vec![0.0; sys.n_ineq()];
    for (k, &i) in active.iter().enumerate() {
        mu[i] = x[2 * mg + k];
    }
    let residual = (&a * &x - &b).amax();
    RecoveredMultipliers {
        lambda,
        mu,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_aux::AuxModel;
    use crate::model_dnr::DnrModel;
    use crate::network::load_network;
    use crate::nlp::powerflow::{solve_tree_power_flow, PowerFlowOptions};
    use crate::topology::enumerate_radial;

    fn net4() -> crate::network::Network {
        load_network(concat!(env!("CARGO_MANIFEST_DIR"), "/data/net4.json")).unwrap()
    }

    #[test]
    fn licq_fails_at_every_radial_point_via_u_block() {
        let net = net4();
        let model = DnrModel::new(&net);
        let loads = net.nominal_loads();
        for topo in enumerate_radial(&net, 100).unwrap() {
            let z_aux =
                solve_tree_power_flow(&net, &topo, &loads, &PowerFlowOptions::default()).unwrap();
            let z = crate::model_aux::embed(&z_aux, &topo);
            let rep = check_licq(&model, &z, 1e-8, 1e-8);
            assert!(!rep.holds);
            let ub = rep.u_block.unwrap();
            assert!(ub.rank < ub.rows);
            assert!(ub.witness_residual <= 1e-12);
        }
    }

    #[test]
    fn mfcq_rank_test_fails_with_binary_states() {
        let net = net4();
        let model = DnrModel::new(&net);
        let loads = net.nominal_loads();
        let topo = enumerate_radial(&net, 100).unwrap().remove(0);
        let z_aux =
            solve_tree_power_flow(&net, &topo, &loads, &PowerFlowOptions::default()).unwrap();
        let z = crate::model_aux::embed(&z_aux, &topo);
        let rep = check_mfcq(&model, &z, 1e-8, 1e-8).unwrap();
        assert!(!rep.eq_full_row_rank);
        assert!(!rep.holds);
    }

    #[test]
    fn multiplier_round_trip() {
        let net = net4();
        let topo = enumerate_radial(&net, 100).unwrap().remove(0);
        let aux = AuxModel::build(&net, topo, net.nominal_loads()).unwrap();
        let lam = DVector::from_fn(aux.n_eq(), |i, _| i as f64 + 0.5);
        let mu = DVector::from_fn(aux.n_ineq(), |i, _| i as f64 * 0.25);
        let named = AuxMultipliers::from_flat(&aux, &lam, &mu).unwrap();
        let (lam2, mu2) = named.to_flat();
        assert_eq!(lam, lam2);
        assert_eq!(mu, mu2);

        let (n, l) = (4, 4);
        let dn = DnrMultipliers::zeros(n, l);
        let (lam, mu) = dn.to_flat();
        assert_eq!(lam.len(), 2 * n + 2 * l + 1);
        assert_eq!(mu.len(), 6 * l + 3 * n);
        let back = DnrMultipliers::from_flat(n, l, &lam, &mu).unwrap();
        let (lam3, mu3) = back.to_flat();
        assert_eq!(lam, lam3);
        assert_eq!(mu, mu3);
    }

    #[test]
    fn lift_rejects_non_optimal_input() {
        let net = net4();
        let topo = enumerate_radial(&net, 100).unwrap().remove(0);
        let loads = net.nominal_loads();
        let z_aux =
            solve_tree_power_flow(&net, &topo, &loads, &PowerFlowOptions::default()).unwrap();
        let aux = AuxModel::build(&net, topo, loads).unwrap();
        let named = AuxMultipliers::from_flat(
            &aux,
            &DVector::zeros(aux.n_eq()),
            &DVector::zeros(aux.n_ineq()),
        )
        .unwrap();
        // Zero multipliers cannot be stationary: the objective gradient is
        // nonzero in the current coordinates.
        match lift_multipliers(&aux, &z_aux, &named, 1e-6) {
            Err(Error::NotOptimalInput { residual }) => assert!(residual > 1e-6),
            other => panic!("expected NotOptimalInput, got {other:?}"),
        }
    }
}
