//! Command dispatch for the `quiverforge` binary.
//!
//! Exit codes: 0 for a positive result, 2 for an informative negative
//! (unstable, diverged, max-iter, Newton stall, violated relation, failed
//! verification) and 1 for errors, which are printed to stderr as JSON.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use quiverforge::io::{
    filtration_json, flow_csv, flow_report_json, load_bundle, merge_section, newton_csv, params_json, parse_document,
    quiver_json, rep_json, to_json_string, verdict_json, write_qvtx, InstanceBundle,
};
use quiverforge::moment::balanced_frame;
use quiverforge::rep::{check_relations, tensor_product};
use quiverforge::stability::{ExtractOptions, OracleOptions};
use quiverforge::torus::ymh_identity;
use quiverforge::{
    destabilizer_extract, flow_solve, moment_map, residual_norm, solve_vortex, stability_oracle, CMatrix, Complex64,
    Error, FlowOptions, FlowReport, FlowStatus, StabilityParams, TorusSystem, TwistedRep, VerdictTag, VortexOptions,
    VortexSolution,
};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

/// Residual bound for `tensor --verify`.
pub const TENSOR_VERIFY_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(
    name = "quiverforge",
    version,
    about = "Stability, moment-map flows and torus vortices for twisted quiver representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stability verdict from subrepresentation enumeration.
    Check(Common),
    /// Kempf–Ness flow for the point-scale metric; divergent runs carry a filtration.
    Flow(Common),
    /// Newton solve of the vortex equations on the flat torus.
    Vortex(Common),
    /// Tensor product of two instances on the same vertex set.
    Tensor(TensorArgs),
    /// Energy identity evaluated at the vortex solution.
    Ymh(Common),
    /// Relation residuals of a representation.
    Relations(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Inputs {
    /// Instance document holding any of the sections; `-` reads stdin.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    quiver: Option<PathBuf>,
    #[arg(long)]
    rep: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    relations: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// Seed for every random choice (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    quiet: bool,
    /// Report destination (`vortex`: the QVTX1 field file); stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV iteration log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug)]
struct TensorArgs {
    /// Left factor (rep and params).
    #[arg(long)]
    left: PathBuf,
    /// Right factor (rep and params).
    #[arg(long)]
    right: PathBuf,
    /// Solve both factors and check the product metric.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    flags: Flags,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            EXIT_ERROR
        }
    }
}

fn report_error(e: &Error) {
    let mut body = json!({ "code": e.code(), "message": e.to_string() });
    if let Error::Schema { issues } = e {
        body["issues"] = serde_json::to_value(issues).expect("serializable issues");
    }
    let _ = writeln!(io::stderr(), "{}", to_json_string(&json!({ "error": body })));
}

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            let _ = writeln!(io::stderr(), "{}", msg.as_ref());
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Check(c) => check(&load(&c.inputs)?, &c.flags),
        Command::Flow(c) => flow(&load(&c.inputs)?, &c.flags),
        Command::Vortex(c) => vortex(&load(&c.inputs)?, &c.flags),
        Command::Tensor(t) => tensor(&t),
        Command::Ymh(c) => ymh(&load(&c.inputs)?, &c.flags),
        Command::Relations(c) => relations(&load(&c.inputs)?, &c.flags),
    }
}

// ---------------------------------------------------------------------------
// Loading

fn read_text(path: &Path) -> Result<String, Error> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    Ok(fs::read_to_string(path)?)
}

fn load(inputs: &Inputs) -> Result<InstanceBundle, Error> {
    let mut doc = match &inputs.bundle {
        Some(p) => parse_document(&read_text(p)?)?,
        None => json!({}),
    };
    let sections = [
        ("quiver", &inputs.quiver),
        ("rep", &inputs.rep),
        ("params", &inputs.params),
        ("system", &inputs.system),
        ("relations", &inputs.relations),
    ];
    for (name, path) in sections {
        let Some(path) = path else { continue };
        let part = parse_document(&read_text(path)?)?;
        // A file that carries its own quiver is a bundle fragment.
        match part.as_object() {
            Some(o) if name != "quiver" && o.contains_key("quiver") => {
                for (k, v) in o {
                    if k != "schema" {
                        merge_section(&mut doc, k, v.clone());
                    }
                }
            }
            _ => merge_section(&mut doc, name, part),
        }
    }
    load_bundle(&doc)
}

fn need<T>(x: Option<T>, what: &str) -> Result<T, Error> {
    x.ok_or_else(|| Error::Schema {
        issues: vec![quiverforge::SchemaIssue {
            pointer: format!("/{what}"),
            message: "missing required section for this command".into(),
        }],
    })
}

fn rep_and_params(b: &InstanceBundle) -> Result<(&TwistedRep, &StabilityParams), Error> {
    Ok((need(b.rep.as_ref(), "rep")?, need(b.params.as_ref(), "params")?))
}

fn flow_options(b: &InstanceBundle, f: &Flags) -> FlowOptions {
    let d = FlowOptions::default();
    FlowOptions {
        tol: f.tol.or(b.options.tol).unwrap_or(d.tol),
        max_iter: f.max_iter.or(b.options.max_iter).unwrap_or(d.max_iter),
        seed: f.seed.or(b.options.seed).unwrap_or(0),
        init_scale: b.options.init_scale.unwrap_or(d.init_scale),
        ..d
    }
}

fn vortex_options(b: &InstanceBundle, f: &Flags) -> VortexOptions {
    let d = VortexOptions::default();
    VortexOptions {
        tol: f.tol.or(b.options.tol).unwrap_or(d.tol),
        max_newton: f.max_iter.or(b.options.max_iter).unwrap_or(d.max_newton),
        ..d
    }
}

// ---------------------------------------------------------------------------
// Output

fn emit(f: &Flags, report: &Value) -> Result<(), Error> {
    let text = to_json_string(report) + "\n";
    match &f.out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_log(f: &Flags, csv: String) -> Result<(), Error> {
    if let Some(p) = &f.log {
        fs::write(p, csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

fn check(b: &InstanceBundle, f: &Flags) -> Result<i32, Error> {
    let ctx = Ctx { quiet: f.quiet };
    let (rep, params) = rep_and_params(b)?;
    let opts = OracleOptions {
        seed: f.seed.or(b.options.seed).unwrap_or(0),
        ..OracleOptions::default()
    };
    let v = stability_oracle(rep, params, &opts)?;
    ctx.progress(format!("check: {} candidates, verdict {:?}", v.candidates, v.tag));
    emit(
        f,
        &json!({ "command": "check", "verdict": verdict_json(rep.quiver(), &v) }),
    )?;
    Ok(if v.tag == VerdictTag::Unstable {
        EXIT_NEGATIVE
    } else {
        EXIT_OK
    })
}

fn flow_report(rep: &TwistedRep, params: &StabilityParams, report: &FlowReport) -> Result<Value, Error> {
    let mut out = flow_report_json(rep.quiver(), report)?;
    if report.status == FlowStatus::Diverged {
        out["filtration"] = match destabilizer_extract(rep, report, params, &ExtractOptions::default()) {
            Ok(steps) => filtration_json(rep.quiver(), &steps),
            Err(e) => json!({ "error": { "code": e.code(), "message": e.to_string() } }),
        };
    }
    Ok(out)
}

fn status_code(s: FlowStatus) -> i32 {
    match s {
        FlowStatus::Converged => EXIT_OK,
        FlowStatus::Diverged | FlowStatus::MaxIter => EXIT_NEGATIVE,
    }
}

fn flow(b: &InstanceBundle, f: &Flags) -> Result<i32, Error> {
    let ctx = Ctx { quiet: f.quiet };
    let (rep, params) = rep_and_params(b)?;
    let report = flow_solve(rep, params, &flow_options(b, f))?;
    ctx.progress(format!(
        "flow: {:?} after {} iterations, residual {:e}",
        report.status, report.iterations, report.residual_norm
    ));
    write_log(f, flow_csv(&report.iter_log))?;
    let mut out = flow_report(rep, params, &report)?;
    out["command"] = json!("flow");
    emit(f, &out)?;
    Ok(status_code(report.status))
}

fn vortex_summary(system: &TorusSystem, sol: &VortexSolution, converged: bool) -> Value {
    json!({
        "status": if converged { "converged" } else { "stall" },
        "N": system.grid.n(),
        "sup_residual": sol.sup_residual,
        "newton_iterations": sol.history.len().saturating_sub(1),
        "defect": system.defect(),
    })
}

/// Solves, mapping a stall to its best iterate.
fn solve_or_stall(system: &TorusSystem, opts: &VortexOptions) -> Result<(VortexSolution, bool), Error> {
    match solve_vortex(system, opts) {
        Ok(sol) => Ok((sol, true)),
        Err(Error::NewtonStall(best)) => Ok((*best, false)),
        Err(e) => Err(e),
    }
}

fn vortex(b: &InstanceBundle, f: &Flags) -> Result<i32, Error> {
    let ctx = Ctx { quiet: f.quiet };
    let system = need(b.system.as_ref(), "system")?;
    let (sol, converged) = solve_or_stall(system, &vortex_options(b, f))?;
    ctx.progress(format!(
        "vortex: {} after {} Newton steps, sup residual {:e}",
        if converged { "converged" } else { "stalled" },
        sol.history.len().saturating_sub(1),
        sol.sup_residual
    ));
    write_log(f, newton_csv(&sol.history))?;
    if let Some(p) = &f.out {
        fs::write(p, write_qvtx(system, &sol.state))?;
    }
    let mut out = vortex_summary(system, &sol, converged);
    out["command"] = json!("vortex");
    io::stdout().write_all((to_json_string(&out) + "\n").as_bytes())?;
    Ok(if converged { EXIT_OK } else { EXIT_NEGATIVE })
}

fn ymh(b: &InstanceBundle, f: &Flags) -> Result<i32, Error> {
    let ctx = Ctx { quiet: f.quiet };
    let system = need(b.system.as_ref(), "system")?;
    let (sol, converged) = solve_or_stall(system, &vortex_options(b, f))?;
    let given = b
        .higgs
        .clone()
        .unwrap_or_else(|| vec![None; system.quiver.arrow_count()]);
    // Default field: the constant-in-frame √w_a.
    let phi: Vec<Option<Vec<Complex64>>> = given
        .into_iter()
        .zip(&system.weights)
        .map(|(g, w)| Some(g.unwrap_or_else(|| w.iter().map(|x| Complex64::new(x.sqrt(), 0.0)).collect())))
        .collect();
    let r = ymh_identity(system, &sol.state, &phi)?;
    ctx.progress(format!("ymh: lhs {} rhs {} mismatch {:e}", r.lhs, r.rhs, r.mismatch));
    let mut out = vortex_summary(system, &sol, converged);
    out["command"] = json!("ymh");
    out["identity"] = serde_json::to_value(&r).expect("serializable report");
    emit(f, &out)?;
    Ok(if converged { EXIT_OK } else { EXIT_NEGATIVE })
}

fn relations(b: &InstanceBundle, f: &Flags) -> Result<i32, Error> {
    let ctx = Ctx { quiet: f.quiet };
    let rep = need(b.rep.as_ref(), "rep")?;
    let tol = f.tol.or(b.options.tol).unwrap_or(1e-10);
    let res = check_relations(rep, &b.relations, tol)?;
    let all = res.iter().all(|r| r.satisfied);
    ctx.progress(format!("relations: {} checked, all satisfied: {all}", res.len()));
    emit(
        f,
        &json!({
            "command": "relations",
            "tol": tol,
            "all_satisfied": all,
            "residuals": serde_json::to_value(&res).expect("serializable residuals"),
        }),
    )?;
    Ok(if all { EXIT_OK } else { EXIT_NEGATIVE })
}

fn load_factor(path: &Path) -> Result<InstanceBundle, Error> {
    load(&Inputs {
        bundle: Some(path.to_path_buf()),
        ..Inputs::default()
    })
}

fn tensor(t: &TensorArgs) -> Result<i32, Error> {
    let f = &t.flags;
    let ctx = Ctx { quiet: f.quiet };
    let (lb, rb) = (load_factor(&t.left)?, load_factor(&t.right)?);
    let (r, p) = rep_and_params(&lb)?;
    let (s, p2) = rep_and_params(&rb)?;
    if p.sigma != p2.sigma {
        return Err(Error::InvalidParameters("both factors must use the same sigma".into()));
    }
    let tau: Vec<f64> = p.tau.iter().zip(&p2.tau).map(|(a, b)| a + b).collect();
    let p3 = StabilityParams::new(p.sigma.clone(), tau)?;
    let mut out = json!({ "command": "tensor" });
    let mut code = EXIT_OK;
    let prod = if t.verify {
        let (fr, fs) = (
            flow_solve(r, p, &flow_options(&lb, f))?,
            flow_solve(s, p2, &flow_options(&rb, f))?,
        );
        out["left_status"] = json!(fr.status);
        out["right_status"] = json!(fs.status);
        if fr.status != FlowStatus::Converged || fs.status != FlowStatus::Converged {
            ctx.progress("tensor: a factor did not converge; nothing to verify");
            out["verified"] = json!(false);
            emit(f, &out)?;
            return Ok(EXIT_NEGATIVE);
        }
        // Each factor in its H-orthonormal frame, where H ⊗ H' is the identity.
        let prod = tensor_product(
            &balanced_frame(r, &fr.final_metric.metric()?)?,
            &balanced_frame(s, &fs.final_metric.metric()?)?,
        )?;
        let h: Vec<CMatrix> = prod.dims().iter().map(|&n| quiverforge::linalg::identity(n)).collect();
        let res = residual_norm(&moment_map(&prod, &h, &p3)?);
        let ok = res <= TENSOR_VERIFY_TOL;
        ctx.progress(format!("tensor: product residual {res:e}"));
        out["product_residual"] = json!(res);
        out["verified"] = json!(ok);
        if !ok {
            code = EXIT_NEGATIVE;
        }
        prod
    } else {
        tensor_product(r, s)?
    };
    out["quiver"] = quiver_json(prod.quiver(), prod.twist());
    out["rep"] = rep_json(&prod);
    out["params"] = params_json(prod.quiver(), &p3);
    emit(f, &out)?;
    Ok(code)
}
