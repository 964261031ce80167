use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dnr::error::Error;
use dnr::kkt::{check_kkt, check_licq, check_mfcq};
use dnr::model_aux::{embed, AuxModel};
use dnr::model_dnr::{DnrModel, Layout, PrimalPoint};
use dnr::network::{load_network, validate, Network, NetworkFile};
use dnr::nlp::powerflow::{solve_tree_power_flow, PowerFlowOptions};
use dnr::nlp::SolverOptions;
use dnr::search::{self, Certificate, SearchOptions};
use dnr::topology::{enumerate_radial, topology_from_ids, Topology};

#[derive(Parser)]
#[command(name = "dnr", about = "Distribution network reconfiguration solver and certificate checker", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    /// Network JSON file.
    #[arg(long)]
    network: PathBuf,
    /// Write the result JSON here in addition to stdout output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spanning-tree enumeration cap.
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
    /// Solver convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Activity tolerance for inequality constraints.
    #[arg(long, default_value_t = 1e-6)]
    activity_tol: f64,
    /// Relative rank tolerance for the constraint-qualification tests.
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
    /// Comma-separated penalty weights for the direct solve homotopy.
    #[arg(long, default_value = "0,1,10,100", value_delimiter = ',')]
    penalty_schedule: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and report every violation.
    Validate {
        #[arg(long)]
        network: PathBuf,
    },
    /// Solve the exact power flow on a fixed spanning tree.
    PowerFlow {
        #[arg(long)]
        network: PathBuf,
        /// Switched-on line ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        on_lines: Vec<u32>,
        /// Squared root voltage (defaults to the box midpoint).
        #[arg(long)]
        v_root_sq: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve by enumerating every radial configuration.
    SolveEnumerate(SolveArgs),
    /// Solve by relaxation, rounding, and polish.
    SolveDirect(SolveArgs),
    /// Re-verify the first-order conditions stored in a certificate.
    CheckKkt {
        #[arg(long)]
        network: PathBuf,
        /// Certificate JSON produced by a solve command.
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Constraint-qualification diagnostics at a radial point.
    CheckCq {
        #[arg(long)]
        network: PathBuf,
        /// Certificate JSON to take the point from.
        #[arg(long, conflicts_with = "on_lines")]
        cert: Option<PathBuf>,
        /// Or: build the point from the power flow on these switched-on lines.
        #[arg(long, value_delimiter = ',')]
        on_lines: Vec<u32>,
        #[arg(long, default_value_t = 1e-6)]
        activity_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
    },
    /// Fixed-topology regularity rate under random load perturbations.
    SampleLicq {
        #[arg(long)]
        network: PathBuf,
        /// Switched-on line ids; when omitted every topology is sampled.
        #[arg(long, value_delimiter = ',')]
        on_lines: Vec<u32>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Relative load perturbation half-width.
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        activity_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn search_options(args: &SolveArgs) -> SearchOptions {
    SearchOptions {
        cap: args.cap,
        solver: SolverOptions {
            tol_stat: args.tol,
            tol_feas: args.tol,
            tol_comp: args.tol,
            ..Default::default()
        },
        penalty_schedule: args.penalty_schedule.clone(),
        activity_tol: args.activity_tol,
        rank_tol: args.rank_tol,
        ..Default::default()
    }
}

fn load_cert(path: &PathBuf) -> Result<Certificate, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

fn emit_study(
    study: &search::StudyResult,
    format: Format,
    out: &Option<PathBuf>,
) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(study).map_err(|e| Error::Parse(e.to_string()))?;
    match format {
        Format::Text => print!("{}", search::text_report(study)),
        Format::Json => println!("{json}"),
    }
    if let Some(path) = out {
        std::fs::write(path, &json)?;
    }
    Ok(())
}

fn topology_arg(net: &Network, on_lines: &[u32]) -> Result<Topology, Error> {
    topology_from_ids(net, on_lines)
}

fn run(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Validate { network } => {
            let text = std::fs::read_to_string(&network)?;
            let file: NetworkFile =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let violations = validate(&file);
            if violations.is_empty() {
                println!("ok");
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &violations {
                    println!("{v}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::PowerFlow {
            network,
            on_lines,
            v_root_sq,
            out,
        } => {
            let net = load_network(&network)?;
            let topo = topology_arg(&net, &on_lines)?;
            let loads = net.nominal_loads();
            let opts = PowerFlowOptions {
                v_root_sq,
                ..Default::default()
            };
            let z = solve_tree_power_flow(&net, &topo, &loads, &opts)?;
            let point = PrimalPoint::from_vector(&Layout::aux(&net), &z);
            let json =
                serde_json::to_string_pretty(&point).map_err(|e| Error::Parse(e.to_string()))?;
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(path, &json)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveEnumerate(args) => {
            let net = load_network(&args.network)?;
            let loads = net.nominal_loads();
            let study = search::solve_enumerate(&net, &loads, &search_options(&args))?;
            emit_study(&study, args.format, &args.out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveDirect(args) => {
            let net = load_network(&args.network)?;
            let loads = net.nominal_loads();
            let study = search::solve_direct(&net, &loads, &search_options(&args))?;
            emit_study(&study, args.format, &args.out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckKkt { network, cert, tol } => {
            let net = load_network(&network)?;
            let cert = load_cert(&cert)?;
            let model = DnrModel::new(&net);
            let z = cert.point.to_vector(&model.layout)?;
            let (lam, mu) = cert.multipliers.to_flat();
            let rep = check_kkt(&model, &z, &lam, &mu, tol);
            let json = serde_json::to_string_pretty(&rep).map_err(|e| Error::Parse(e.to_string()))?;
            println!("{json}");
            Ok(if rep.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::CheckCq {
            network,
            cert,
            on_lines,
            activity_tol,
            rank_tol,
        } => {
            let net = load_network(&network)?;
            let model = DnrModel::new(&net);
            let z = if let Some(path) = cert {
                load_cert(&path)?.point.to_vector(&model.layout)?
            } else {
                let topo = topology_arg(&net, &on_lines)?;
                let loads = net.nominal_loads();
                let z_aux =
                    solve_tree_power_flow(&net, &topo, &loads, &PowerFlowOptions::default())?;
                embed(&z_aux, &topo)
            };
            let licq = check_licq(&model, &z, activity_tol, rank_tol);
            let mfcq = check_mfcq(&model, &z, activity_tol, rank_tol)?;
            println!(
                "licq: {} (rank {}/{})",
                if licq.holds { "holds" } else { "fails" },
                licq.rank,
                licq.n_active_gradients
            );
            if let Some(ub) = &licq.u_block {
                println!(
                    "state-block: rank {}/{}  witness residual {:.2e}",
                    ub.rank, ub.rows, ub.witness_residual
                );
            }
            println!(
                "mfcq: {} (equality rank {}/{})",
                if mfcq.holds { "holds" } else { "fails" },
                mfcq.eq_rank,
                mfcq.n_eq
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::SampleLicq {
            network,
            on_lines,
            samples,
            spread,
            seed,
            activity_tol,
            rank_tol,
            cap,
        } => {
            let net = load_network(&network)?;
            let topologies = if on_lines.is_empty() {
                enumerate_radial(&net, cap)?
            } else {
                vec![topology_arg(&net, &on_lines)?]
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nominal = net.nominal_loads();
            for topo in &topologies {
                let mut held = 0usize;
                for _ in 0..samples {
                    let loads: Vec<(f64, f64)> = nominal
                        .iter()
                        .map(|&(p, q)| {
                            let fp = 1.0 + rng.gen_range(-spread..=spread);
                            let fq = 1.0 + rng.gen_range(-spread..=spread);
                            (p * fp, q * fq)
                        })
                        .collect();
                    let Ok(z) =
                        solve_tree_power_flow(&net, topo, &loads, &PowerFlowOptions::default())
                    else {
                        continue;
                    };
                    let aux = AuxModel::build(&net, topo.clone(), loads)?;
                    let rep = check_licq(&aux, &z, activity_tol, rank_tol);
                    if rep.holds {
                        held += 1;
                    }
                }
                let ids: Vec<u32> = topo.on_line_ids(&net);
                println!("lines={ids:?}  licq {held}/{samples}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
