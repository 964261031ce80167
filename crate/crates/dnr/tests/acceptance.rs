//! Acceptance suite. Each test covers one exit criterion and prints a
//! one-line verdict; tolerances and time budgets are pinned in the asserts.

mod common;

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dnr::kkt::{check_kkt, check_licq, check_mfcq, recover_multipliers_least_squares};
use dnr::model_aux::{embed, AuxModel};
use dnr::model_dnr::{DnrModel, Layout};
use dnr::network::{load_network, Network};
use dnr::nlp::powerflow::{solve_tree_power_flow, PowerFlowOptions};
use dnr::nlp::SolverOptions;
use dnr::search::{certificate_for, solve_direct, solve_enumerate, solve_topology, SearchOptions};
use dnr::system::ConstraintSystem;
use dnr::topology::{enumerate_radial, is_radial, Topology};

fn net(name: &str) -> Network {
    load_network(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn perturbed_loads(network: &Network, rng: &mut ChaCha8Rng, spread: f64) -> Vec<(f64, f64)> {
    network
        .nominal_loads()
        .iter()
        .map(|&(p, q)| {
            (
                p * (1.0 + rng.gen_range(-spread..=spread)),
                q * (1.0 + rng.gen_range(-spread..=spread)),
            )
        })
        .collect()
}

type FeasiblePoint = (Network, Topology, Vec<(f64, f64)>, DVector<f64>);

/// Feasible binary points of the full model: power-flow solutions on every
/// tree of both small networks under several load draws.
fn feasible_binary_points() -> Vec<FeasiblePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    for name in ["net4.json", "net7.json"] {
        let network = net(name);
        for topo in enumerate_radial(&network, 1000).unwrap() {
            for draw in 0..9 {
                let loads = if draw == 0 {
                    network.nominal_loads()
                } else {
                    perturbed_loads(&network, &mut rng, 0.1)
                };
                let z_aux =
                    solve_tree_power_flow(&network, &topo, &loads, &PowerFlowOptions::default())
                        .unwrap();
                let z = embed(&z_aux, &topo);
                out.push((network.clone(), topo.clone(), loads, z));
            }
        }
    }
    out
}

#[test]
fn criterion_1_lifted_certificates_on_every_tree() {
    let start = Instant::now();
    let opts = SearchOptions::default();
    let mut count = 0;
    for name in ["net4.json", "net7.json"] {
        let network = net(name);
        let loads = network.nominal_loads();
        for topo in enumerate_radial(&network, 1000).unwrap() {
            let solve = solve_topology(&network, &topo, &loads, &opts.solver).unwrap();
            let cert = certificate_for(&network, &topo, &loads, &solve, &opts).unwrap();
            assert!(
                cert.aux_kkt.passed,
                "{name} {:?}: aux kkt {:?}",
                topo.u, cert.aux_kkt
            );
            assert!(
                cert.kkt.passed,
                "{name} {:?}: lifted kkt {:?}",
                topo.u, cert.kkt
            );
            count += 1;
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "took {dt:?}");
    println!(
        "criterion 1 PASS: lifted multiplier certificates verified to 1e-6 on {count} trees in {dt:?}"
    );
}

#[test]
fn criterion_2_licq_fails_at_every_feasible_binary_point() {
    let points = feasible_binary_points();
    assert!(points.len() >= 100, "only {} points", points.len());
    let start = Instant::now();
    for (network, _topo, loads, z) in &points {
        let model = DnrModel::with_loads(network, loads.clone()).unwrap();
        let rep = check_licq(&model, z, 1e-6, 1e-8);
        assert!(!rep.holds);
        let ub = rep.u_block.expect("state block present");
        assert!(ub.rank < ub.rows);
        assert!(ub.witness_residual <= 1e-10, "witness {}", ub.witness_residual);
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 5.0, "took {dt:?}");
    println!(
        "criterion 2 PASS: LICQ failed with exact dependence witness at {} points in {dt:?}",
        points.len()
    );
}

#[test]
fn criterion_3_mfcq_fails_at_every_feasible_binary_point() {
    let points = feasible_binary_points();
    let start = Instant::now();
    for (network, _topo, loads, z) in &points {
        let model = DnrModel::with_loads(network, loads.clone()).unwrap();
        let rep = check_mfcq(&model, z, 1e-6, 1e-8).unwrap();
        assert!(!rep.eq_full_row_rank);
        assert!(!rep.holds);
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 5.0, "took {dt:?}");
    println!(
        "criterion 3 PASS: MFCQ failed at {} points in {dt:?}",
        points.len()
    );
}

#[test]
fn criterion_4_aux_licq_holds_under_load_perturbation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["net4.json", "net7.json"] {
        let network = net(name);
        for topo in enumerate_radial(&network, 1000).unwrap() {
            let mut held = 0;
            for _ in 0..100 {
                let loads = perturbed_loads(&network, &mut rng, 0.1);
                let z = solve_tree_power_flow(
                    &network,
                    &topo,
                    &loads,
                    &PowerFlowOptions::default(),
                )
                .unwrap();
                let aux = AuxModel::build(&network, topo.clone(), loads).unwrap();
                if check_licq(&aux, &z, 1e-6, 1e-8).holds {
                    held += 1;
                }
            }
            assert!(held >= 99, "{name} {:?}: {held}/100", topo.u);
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "took {dt:?}");
    println!("criterion 4 PASS: fixed-topology LICQ held >=99/100 per tree in {dt:?}");
}

#[test]
fn criterion_5_four_bus_study_table() {
    let network = net("net4.json");
    let loads = network.nominal_loads();
    let study = solve_enumerate(&network, &loads, &SearchOptions::default()).unwrap();
    let us: Vec<Vec<u8>> = study.per_topology.iter().map(|t| t.u.clone()).collect();
    assert_eq!(
        us,
        vec![vec![1, 1, 1, 0], vec![1, 1, 0, 1], vec![1, 0, 1, 1]]
    );
    for t in &study.per_topology {
        assert!(t.converged);
        let obj = t.objective.unwrap();
        assert!(obj.is_finite() && obj > 0.0);
        println!("  u={:?}  objective={:.2e}", t.u, obj);
    }
    println!(
        "criterion 5 PASS: all three radial configurations solved (reference objective \
         comparison SKIPPED: external benchmark data not bundled)"
    );
}

#[test]
fn criterion_6_direct_matches_enumeration() {
    let start = Instant::now();
    for name in ["net4.json", "net7.json"] {
        let network = net(name);
        let loads = network.nominal_loads();
        let opts = SearchOptions::default();
        let enumerated = solve_enumerate(&network, &loads, &opts).unwrap();
        let direct = solve_direct(&network, &loads, &opts).unwrap();
        assert!(
            (enumerated.best.objective - direct.best.objective).abs() <= 1e-8,
            "{name}: {} vs {}",
            enumerated.best.objective,
            direct.best.objective
        );
        assert_eq!(enumerated.best.u, direct.best.u, "{name}");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "took {dt:?}");
    println!("criterion 6 PASS: direct solve matched enumeration within 1e-8 in {dt:?}");
}

#[test]
fn criterion_7_derivative_and_recovery_oracles() {
    // (i) analytic Jacobians against central differences at random points.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in ["net4.json", "net7.json"] {
        let network = net(name);
        let model = DnrModel::new(&network);
        let topo = enumerate_radial(&network, 1000).unwrap().remove(0);
        let aux = AuxModel::build(&network, topo.clone(), network.nominal_loads()).unwrap();
        for _ in 0..25 {
            let z_full = DVector::from_fn(model.dim(), |_, _| rng.gen_range(-2.0..2.0));
            let tol = 1e-6;
            let jg = model.jac_g(&z_full);
            assert!((jg - common::fd_jac_g(&model, &z_full, 1e-5)).amax() < tol);
            let jh = model.jac_h(&z_full);
            assert!((jh - common::fd_jac_h(&model, &z_full, 1e-5)).amax() < tol);
            let z_aux = z_full.rows(0, aux.dim()).into_owned();
            assert!((aux.jac_g(&z_aux) - common::fd_jac_g(&aux, &z_aux, 1e-5)).amax() < tol);
            assert!((aux.jac_h(&z_aux) - common::fd_jac_h(&aux, &z_aux, 1e-5)).amax() < tol);
        }
    }

    // (ii) the solver's fixed-topology optimum against the independent
    // power-flow oracle pinned at the optimal root voltage.
    let network = net("net4.json");
    let loads = network.nominal_loads();
    let topo = enumerate_radial(&network, 1000).unwrap().remove(0);
    let tight = SolverOptions {
        tol_stat: 1e-12,
        tol_feas: 1e-12,
        tol_comp: 1e-12,
        ..Default::default()
    };
    let solve = solve_topology(&network, &topo, &loads, &tight).unwrap();
    let root = network.root();
    let vmax_sq = {
        let b = &network.buses[root];
        b.v_max * b.v_max
    };
    // Loss minimization drives the root voltage to its upper bound.
    let oracle = solve_tree_power_flow(
        &network,
        &topo,
        &loads,
        &PowerFlowOptions {
            v_root_sq: Some(vmax_sq),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((&solve.z - &oracle).amax() <= 1e-8, "gap {}", (&solve.z - &oracle).amax());

    // (iii) nonnegative least-squares recovery at the same optimum.
    let aux = AuxModel::build(&network, topo, loads).unwrap();
    let rec = recover_multipliers_least_squares(&aux, &solve.z, 1e-6);
    assert!(rec.residual <= 1e-6, "residual {}", rec.residual);

    println!("criterion 7 PASS: Jacobian, power-flow, and recovery oracles agreed");
}

#[test]
fn criterion_8_large_feeder_direct_solve() {
    let start = Instant::now();
    let network = net("case33.json");
    let loads = network.nominal_loads();
    let study = solve_direct(&network, &loads, &SearchOptions::default()).unwrap();
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "took {dt:?}");

    let best = &study.best;
    let u: Vec<f64> = best.u.iter().map(|&b| b as f64).collect();
    assert!(is_radial(&network, &u).unwrap());

    let model = DnrModel::new(&network);
    let z = best.point.to_vector(&Layout::full(&network)).unwrap();
    assert!(model.eval_g(&z).amax() <= 1e-6);
    assert!(model.eval_h(&z).iter().all(|&h| h <= 1e-6));

    let (lam, mu) = best.multipliers.to_flat();
    let rep = check_kkt(&model, &z, &lam, &mu, 1e-6);
    assert!(rep.passed, "kkt {rep:?}");
    println!(
        "criterion 8 PASS: 33-bus feeder solved in {dt:?}, objective {:.4e}, open lines {:?}",
        best.objective,
        (0..u.len())
            .filter(|&e| u[e] < 0.5)
            .map(|e| network.lines[e].id)
            .collect::<Vec<_>>()
    );
}
