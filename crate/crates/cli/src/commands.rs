use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

use netwit::inflation::{build_ring_inflation, certify_state, solve};
use netwit::postselect::critical_probability;
use netwit::qlinalg::{CMat, CVec, DensityMatrix, HermitianOperator};
use netwit::seesaw::{seesaw_maximize, SeesawConfig};
use netwit::states::{ghz_vector, w_vector, ProductMeasurement};
use netwit::witness::{entropic_witness, entropic_witness_best, entropic_witness_k, fidelity_witness, WitnessReport};
use netwit::NetwitError;
use netwit_sdp::{InteriorPoint, SdpError};

use crate::report::{Cell, Report};
use crate::{Command, Table};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "{m}"),
        }
    }
}

impl From<NetwitError> for CliError {
    fn from(e: NetwitError) -> Self {
        match e {
            NetwitError::Solver(_) | NetwitError::UnsupportedBackend(_) => CliError::Solver(e.to_string()),
            NetwitError::Sdp(SdpError::Io(_)) => CliError::Input(e.to_string()),
            NetwitError::Sdp(_) => CliError::Solver(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub struct Outcome {
    pub report: Report,
    pub code: u8,
}

fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

/// Backend named by `NETWIT_SOLVER`; the built-in interior-point solver by default.
fn backend() -> CliResult<InteriorPoint> {
    match std::env::var("NETWIT_SOLVER") {
        Err(_) => Ok(InteriorPoint::default()),
        Ok(name) if name.is_empty() || name == "ipm" || name == "interior-point" => Ok(InteriorPoint::default()),
        Ok(name) => Err(CliError::Solver(format!(
            "solver backend '{name}' is not available in this build (available: ipm)"
        ))),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_state(path: &Path) -> CliResult<DensityMatrix> {
    let text = read_text(path)?;
    DensityMatrix::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json(path: &Path) -> CliResult<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn complex_list(v: &Value, what: &str) -> CliResult<Vec<Complex64>> {
    let Some(items) = v.as_array() else {
        return input(format!("{what}: expected a list of [re, im] pairs"));
    };
    items
        .iter()
        .map(|z| match z.as_array().map(|p| (p.len(), p.first().and_then(Value::as_f64), p.get(1).and_then(Value::as_f64))) {
            Some((2, Some(re), Some(im))) => Ok(Complex64::new(re, im)),
            _ => input(format!("{what}: entry {z} is not a [re, im] pair")),
        })
        .collect()
}

/// `ghz`, `w`, or a JSON file holding `{"amplitudes": [[re, im], ...]}`.
pub fn parse_target(spec: &str) -> CliResult<(String, CVec)> {
    match spec {
        "ghz" => Ok(("ghz".into(), ghz_vector(2, 3))),
        "w" => Ok(("w".into(), w_vector())),
        path => {
            let v = parse_json(Path::new(path))?;
            let amps = v.get("amplitudes").unwrap_or(&v);
            let a = complex_list(amps, path)?;
            if a.len() != 8 {
                return input(format!("{path}: target needs 8 amplitudes, found {}", a.len()));
            }
            let t = CVec::from_vec(a);
            let n = t.norm();
            if !(n > 0.0) {
                return input(format!("{path}: target vector is zero"));
            }
            Ok((path.to_string(), t / Complex64::new(n, 0.0)))
        }
    }
}

/// POVM file: `{"povms": [[effect, ...], ...]}` with one list per party and
/// each effect in the state-file layout `{"dims": [d], "entries": [[re, im], ...]}`.
fn read_povms(path: &Path) -> CliResult<ProductMeasurement> {
    let v = parse_json(path)?;
    let what = path.display().to_string();
    let Some(parties) = v.get("povms").and_then(Value::as_array) else {
        return input(format!("{what}: missing \"povms\" list"));
    };
    let mut povms = Vec::with_capacity(parties.len());
    for party in parties {
        let Some(effects) = party.as_array() else {
            return input(format!("{what}: each party needs a list of effects"));
        };
        let mut ops = Vec::with_capacity(effects.len());
        for e in effects {
            let dims: Vec<usize> = match e.get("dims").and_then(Value::as_array) {
                Some(d) => d.iter().filter_map(Value::as_u64).map(|x| x as usize).collect(),
                None => return input(format!("{what}: effect without \"dims\"")),
            };
            let entries = complex_list(e.get("entries").unwrap_or(&Value::Null), &what)?;
            let side: usize = dims.iter().product();
            if entries.len() != side * side {
                return input(format!("{what}: effect with {} entries for dims {dims:?}", entries.len()));
            }
            let m = CMat::from_fn(side, side, |r, c| entries[r * side + c]);
            ops.push(HermitianOperator::new(dims, m)?);
        }
        povms.push(ops);
    }
    Ok(ProductMeasurement::new(povms)?)
}

fn witness_rows(reports: &[WitnessReport]) -> Vec<Vec<Cell>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone().into(),
                r.lhs.into(),
                r.rhs.into(),
                r.margin.into(),
                r.violated.into(),
            ]
        })
        .collect()
}

fn cmd_witness(
    state: &Path,
    measurement: &str,
    d: Option<usize>,
    k: Option<usize>,
    all_relabelings: bool,
    tol: f64,
) -> CliResult<Outcome> {
    if !(tol >= 0.0) {
        return input("--tol must be non-negative");
    }
    let rho = read_state(state)?;
    let n = rho.num_subsystems();
    let meas = if measurement == "computational" {
        ProductMeasurement::computational(rho.dims())
    } else {
        read_povms(Path::new(measurement))?
    };
    let mut reports = Vec::new();
    if n == 3 {
        let r = if all_relabelings {
            entropic_witness_best(&rho, &meas)?
        } else {
            entropic_witness(&rho, &meas)?
        };
        reports.push(r);
    } else if n > 3 {
        reports.push(entropic_witness_k(&rho, &meas)?);
    }
    let uniform = rho.dims().iter().all(|&x| x == rho.dims()[0]);
    if d.is_some() || k.is_some() || uniform {
        let d = d.unwrap_or(rho.dims()[0]);
        let k = k.unwrap_or(n);
        reports.push(fidelity_witness(&rho, d, k)?);
    }
    let reports: Vec<WitnessReport> = reports.into_iter().map(|r| r.with_tol(tol)).collect();
    let flagged = reports.iter().any(|r| r.violated);
    Ok(Outcome {
        report: Report {
            json: json!({ "state": state.display().to_string(), "reports": reports }),
            header: vec!["witness", "lhs", "rhs", "margin", "violated"],
            rows: witness_rows(&reports),
        },
        code: u8::from(flagged),
    })
}

fn dump(problem: &netwit_sdp::SdpProblem, path: Option<&PathBuf>) -> CliResult<()> {
    if let Some(p) = path {
        problem
            .write_conic(p)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_bound(target: &str, dump_problem: Option<&PathBuf>) -> CliResult<Outcome> {
    let (name, t) = parse_target(target)?;
    let backend = backend()?;
    let ring = build_ring_inflation(Some(&t), None)?;
    dump(&ring.problem, dump_problem)?;
    let cert = solve(&ring, &backend)?;
    if !cert.solver_status.is_solved() {
        return Err(CliError::Solver(format!(
            "inflation SDP ended with status {:?}: {}",
            cert.solver_status, cert.message
        )));
    }
    Ok(Outcome {
        report: Report {
            json: json!({
                "target": name,
                "optimum": cert.objective_value,
                "dual_bound": cert.dual_value,
                "status": cert.solver_status,
                "constraint_violation": cert.constraint_violation(),
                "stats": cert.stats,
            }),
            header: vec!["target", "optimum", "dual_bound", "status"],
            rows: vec![vec![
                name.into(),
                cert.objective_value.into(),
                cert.dual_value.into(),
                format!("{:?}", cert.solver_status).into(),
            ]],
        },
        code: 0,
    })
}

fn cmd_certify(state: &Path, dump_problem: Option<&PathBuf>) -> CliResult<Outcome> {
    let rho = read_state(state)?;
    let backend = backend()?;
    if dump_problem.is_some() {
        let ring = build_ring_inflation(None, Some(&rho))?;
        dump(&ring.problem, dump_problem)?;
    }
    let c = certify_state(&rho, &backend)?;
    let verdict = if c.certified_genuine {
        "certified_genuine"
    } else {
        "inconclusive"
    };
    Ok(Outcome {
        report: Report {
            json: json!({
                "state": state.display().to_string(),
                "verdict": verdict,
                "slack": c.slack,
                "status": c.certificate.solver_status,
                "stats": c.certificate.stats,
            }),
            header: vec!["state", "verdict", "slack"],
            rows: vec![vec![state.display().to_string().into(), verdict.into(), c.slack.into()]],
        },
        code: u8::from(c.certified_genuine),
    })
}

fn cmd_postselect(target: &str, tol_p: f64, jobs: usize) -> CliResult<Outcome> {
    let (name, t) = parse_target(target)?;
    let backend = backend()?;
    let scan = critical_probability(&name, &t, tol_p, &backend, jobs.max(1))?;
    let mut rows: Vec<Vec<Cell>> = scan
        .samples
        .iter()
        .map(|s| vec!["sample".into(), s.p.into(), s.max_fidelity.into(), format!("{:?}", s.status).into()])
        .collect();
    rows.push(vec!["p_critical".into(), scan.p_critical.into(), Cell::Empty, Cell::Empty]);
    let code = if scan.complete { 0 } else { 3 };
    if !scan.complete {
        log::error!("postselection scan stopped early on a solver failure");
    }
    Ok(Outcome {
        report: Report {
            json: serde_json::to_value(&scan).expect("scan serializes"),
            header: vec!["kind", "p", "max_fidelity", "status"],
            rows,
        },
        code,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_seesaw(
    target: &str,
    restarts: usize,
    seed: u64,
    jobs: usize,
    hidden_dim: usize,
    branches: usize,
    max_iters: usize,
    model_out: Option<&PathBuf>,
) -> CliResult<Outcome> {
    let (name, t) = parse_target(target)?;
    let backend = backend()?;
    let cfg = SeesawConfig {
        hidden_dim,
        branches,
        restarts,
        max_iters,
        seed,
        jobs: jobs.max(1),
        ..SeesawConfig::default()
    };
    let (model, f) = seesaw_maximize(&t, &cfg, &backend)?;
    let model_json = model.to_json();
    if let Some(p) = model_out {
        std::fs::write(p, &model_json).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    let model_value: Value = serde_json::from_str(&model_json).expect("model JSON parses");
    Ok(Outcome {
        report: Report {
            json: json!({ "target": name, "fidelity": f, "config": cfg, "model": model_value }),
            header: vec!["target", "fidelity", "restarts", "seed"],
            rows: vec![vec![name.into(), f.into(), (restarts as f64).into(), (seed as f64).into()]],
        },
        code: 0,
    })
}

struct Row {
    quantity: &'static str,
    reference: f64,
    computed: Option<f64>,
    criterion: String,
    pass: bool,
}

fn close(quantity: &'static str, reference: f64, computed: Option<f64>, tol: f64) -> Row {
    Row {
        quantity,
        reference,
        computed,
        criterion: format!("|diff| <= {tol}"),
        pass: computed.is_some_and(|c| (c - reference).abs() <= tol),
    }
}

fn at_least(quantity: &'static str, reference: f64, computed: f64, floor: f64) -> Row {
    Row {
        quantity,
        reference,
        computed: Some(computed),
        criterion: format!(">= {floor}"),
        pass: computed >= floor,
    }
}

fn cmd_reproduce(table: Table, tol_p: f64, restarts: usize, seed: u64, jobs: usize) -> CliResult<Outcome> {
    let backend = backend()?;
    let targets = [("ghz", ghz_vector(2, 3)), ("w", w_vector())];
    let rows: Vec<Row> = match table {
        Table::Bounds => {
            let mut out = Vec::new();
            for ((name, t), (q, reference)) in targets.iter().zip([("bound_ghz", 0.68301), ("bound_w", 0.7602)]) {
                let cert = solve(&build_ring_inflation(Some(t), None)?, &backend)?;
                if !cert.solver_status.is_solved() {
                    return Err(CliError::Solver(format!("{name}: {:?}", cert.solver_status)));
                }
                out.push(close(q, reference, Some(cert.objective_value), 1e-3));
            }
            out
        }
        Table::Postselection => {
            let mut out = Vec::new();
            for ((name, t), (q, reference)) in targets.iter().zip([("p_critical_ghz", 0.685), ("p_critical_w", 0.765)]) {
                let scan = critical_probability(name, t, tol_p, &backend, jobs.max(1))?;
                out.push(close(q, reference, scan.p_critical, 0.01));
            }
            out
        }
        Table::Seesaw => {
            let cfg = SeesawConfig {
                restarts,
                seed,
                jobs: jobs.max(1),
                ..SeesawConfig::default()
            };
            let (_, fg) = seesaw_maximize(&targets[0].1, &cfg, &backend)?;
            let (_, fw) = seesaw_maximize(&targets[1].1, &cfg, &backend)?;
            vec![
                at_least("seesaw_ghz", 0.5170, fg, 0.51),
                at_least("seesaw_w", 2.0 / 3.0, fw, 0.66),
            ]
        }
    };
    let all_pass = rows.iter().all(|r| r.pass);
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "quantity": r.quantity,
                "reference": r.reference,
                "computed": r.computed,
                "criterion": r.criterion,
                "pass": r.pass,
            })
        })
        .collect();
    let table_rows = rows
        .into_iter()
        .map(|r| vec![r.quantity.into(), r.reference.into(), r.computed.into(), r.criterion.into(), r.pass.into()])
        .collect();
    Ok(Outcome {
        report: Report {
            json: json!({ "rows": json_rows, "all_pass": all_pass }),
            header: vec!["quantity", "reference", "computed", "criterion", "pass"],
            rows: table_rows,
        },
        code: if all_pass { 0 } else { 1 },
    })
}

pub fn run(cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::Witness {
            state,
            measurement,
            d,
            k,
            all_relabelings,
            tol,
        } => cmd_witness(&state, &measurement, d, k, all_relabelings, tol),
        Command::Bound { target, dump_problem } => cmd_bound(&target, dump_problem.as_ref()),
        Command::Certify { state, dump_problem } => cmd_certify(&state, dump_problem.as_ref()),
        Command::Postselect { target, tol_p, jobs } => cmd_postselect(&target, tol_p, jobs),
        Command::Seesaw {
            target,
            restarts,
            seed,
            jobs,
            hidden_dim,
            branches,
            max_iters,
            model_out,
        } => cmd_seesaw(&target, restarts, seed, jobs, hidden_dim, branches, max_iters, model_out.as_ref()),
        Command::Reproduce {
            table,
            tol_p,
            restarts,
            seed,
            jobs,
        } => cmd_reproduce(table, tol_p, restarts, seed, jobs),
    }
}
