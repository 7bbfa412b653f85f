//! `ribound` — lower bounds for unbiased estimation in rearrangement-
//! invariant norms, with quadrature and seeded Monte Carlo verification.
//!
//! Every command prints a human-readable table on stdout followed by
//! JSON-lines records with full numeric precision (redirect the records
//! with `--out`). Exit codes: 0 success, 1 usage error, 2 domain or
//! precondition error, 3 verification failure, 4 non-convergence or
//! divergence.

use std::fmt::Display;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use ribound::bounds::{self, BoundError};
use ribound::exec;
use ribound::families::{CustomShift, Family, FamilyError};
use ribound::fisher::{self, FisherError};
use ribound::montecarlo::{
    clt_norm_estimate, default_reps_for, verify_bound_with, wnri_probe, MonteCarloError,
    Scenario, SourceDist, Verdict,
};
use ribound::norms::{
    GridScale, GridSpec, LorentzQ, NormError, NormSpec, NormValue, PhiSpec, PsiSpec,
};
use ribound::transforms::{
    conjugate_at, natural_phi, natural_psi, phi_bar_at, TransformError, PHI_BAR_DEFAULT_N_MAX,
};

#[derive(Parser)]
#[command(name = "ribound", version, about = "Rao-Cramer-type lower bounds in rearrangement-invariant norms")]
struct Cli {
    /// Worker threads for Monte Carlo replicates (default: all cores, or
    /// the RIBOUND_WORKERS environment variable). Output bits never
    /// depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the JSON-lines records to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generalized Fisher information of a family at theta.
    Fisher(FisherArgs),
    /// Lower-bound right-hand sides for a family at theta0.
    Bound(BoundArgs),
    /// Run a verification scenario from a TOML file.
    Verify(VerifyArgs),
    /// Monte Carlo estimate of the CLT norm of a centered distribution.
    CltNorm(CltNormArgs),
    /// Natural generating functions psi_0 (default) or phi_0 (--phi).
    NaturalPsi(NaturalPsiArgs),
    /// Young-Fenchel conjugate of phi, or the phi_bar envelope.
    Conjugate(ConjugateArgs),
    /// Probe weak normality: do normalized-sum norms stay bounded?
    Probe(ProbeArgs),
    /// Run the acceptance battery; exits 3 on any failure.
    RegressSuite(RegressArgs),
}

#[derive(Args)]
struct FamilyOpts {
    /// Family identifier (gaussian-shift, laplace-shift,
    /// exponential-scale, weibull-tail(M), symmetric-stable(A), or the id
    /// of a tabulated family loaded with --family-file).
    #[arg(long)]
    family: String,
    /// TOML file defining a tabulated shift family:
    /// name = "..."; log_density = [[x, log g0(x)], ...].
    #[arg(long)]
    family_file: Option<PathBuf>,
}

impl FamilyOpts {
    fn load(&self) -> Result<Family, CliError> {
        load_family(&self.family, self.family_file.as_deref())
    }
}

#[derive(Args)]
struct FisherArgs {
    #[command(flatten)]
    family: FamilyOpts,
    #[arg(long)]
    theta: f64,
    /// Lebesgue exponent for the p-Fisher information.
    #[arg(long)]
    p: Option<f64>,
    /// Grand Lebesgue generating function, e.g. "psi_m(2)" or "const(1,8)".
    #[arg(long)]
    psi: Option<String>,
    /// Exponential Orlicz exponent function, e.g. "phi_2" or "power(4)".
    #[arg(long)]
    phi: Option<String>,
    /// p-grid for the GLS supremum: "geom:LO:HI:N", "lin:LO:HI:N" or a
    /// comma list.
    #[arg(long)]
    p_grid: Option<String>,
    /// Lambda grid for the B(phi) search (same syntax).
    #[arg(long)]
    lambda_grid: Option<String>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    family: FamilyOpts,
    #[arg(long)]
    theta: f64,
    /// Dual exponent q in (1, 2]: the L_q route with p = q/(q-1).
    #[arg(long)]
    q: Option<f64>,
    /// Grand Lebesgue route with this generating function.
    #[arg(long)]
    psi: Option<String>,
    /// Exponential Orlicz route with this exponent function.
    #[arg(long)]
    phi: Option<String>,
    /// Master bound 1/x from a known CLT norm x of the score.
    #[arg(long)]
    clt_norm: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario TOML file. Keys: family, theta0, estimator
    /// ("sample-mean" | "mle"), pairing table, n_grid, reps, seed.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Tabulated family definition when the scenario names a custom id.
    #[arg(long)]
    family_file: Option<PathBuf>,
    /// Also write a flat CSV (one row per n).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct NormFlags {
    /// Lebesgue norm exponent.
    #[arg(long)]
    lp: Option<f64>,
    /// Grand Lebesgue norm, e.g. "psi_m(2)".
    #[arg(long)]
    gls: Option<String>,
    /// Exponential Orlicz norm, e.g. "phi_2".
    #[arg(long)]
    bphi: Option<String>,
    /// Lorentz quasinorm "P,Q" with Q a number or "inf".
    #[arg(long)]
    lorentz: Option<String>,
}

impl NormFlags {
    fn to_spec(&self) -> Result<NormSpec, CliError> {
        let given = [
            self.lp.is_some(),
            self.gls.is_some(),
            self.bphi.is_some(),
            self.lorentz.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if given != 1 {
            return Err(CliError::Usage(
                "give exactly one of --lp, --gls, --bphi, --lorentz".into(),
            ));
        }
        if let Some(p) = self.lp {
            return Ok(NormSpec::Lp { p });
        }
        if let Some(psi) = &self.gls {
            return Ok(NormSpec::Gls {
                psi: PsiSpec::Named(psi.clone()),
                grid: None,
                ceiling: None,
            });
        }
        if let Some(phi) = &self.bphi {
            return Ok(NormSpec::Bphi {
                phi: PhiSpec::Named(phi.clone()),
                grid: None,
                ceiling: None,
            });
        }
        let spec = self.lorentz.as_ref().unwrap();
        let (p, q) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("--lorentz expects \"P,Q\", got `{spec}`")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad Lorentz p `{p}`")))?;
        let q = match q.trim() {
            "inf" | "infinity" => LorentzQ::Infinity,
            other => LorentzQ::Finite(
                other
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad Lorentz q `{other}`")))?,
            ),
        };
        Ok(NormSpec::Lorentz { p, q })
    }
}

#[derive(Args)]
struct CltNormArgs {
    /// Distribution id: normal, rademacher, centered-exponential,
    /// uniform01, symmetric-stable(A), weibull-tail(M), point-mass(C).
    #[arg(long)]
    dist: String,
    #[command(flatten)]
    norm: NormFlags,
    /// Comma list of sample sizes, ascending.
    #[arg(long)]
    n_grid: String,
    /// Replicates per n. Default: 100000, raised to 1000000 when the norm
    /// touches moments beyond order 8.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct NaturalPsiArgs {
    #[command(flatten)]
    family: FamilyOpts,
    /// Comma list of theta values whose supremum defines the function.
    #[arg(long, default_value = "0")]
    theta_grid: String,
    /// Where to tabulate psi_0 ("geom:2:64:16", "lin:..." or comma list).
    #[arg(long, default_value = "geom:2:64:16")]
    p_grid: String,
    /// Emit the exponential Orlicz natural function phi_0 instead.
    #[arg(long)]
    phi: bool,
    /// Lambda grid for phi_0.
    #[arg(long, default_value = "lin:0.25:6:24")]
    lambda_grid: String,
}

#[derive(Args)]
struct ConjugateArgs {
    /// Exponent function, e.g. "phi_2" or "power(4)".
    #[arg(long)]
    phi: String,
    /// u-grid for the conjugate values.
    #[arg(long, default_value = "lin:-5:5:101")]
    u_grid: String,
    /// Emit the envelope phi_bar(lambda) = sup_n n phi(lambda/sqrt(n))
    /// instead of the conjugate.
    #[arg(long)]
    phi_bar: bool,
    /// Lambda grid for --phi-bar.
    #[arg(long, default_value = "lin:0.25:8:32")]
    lambda_grid: String,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    dist: String,
    #[command(flatten)]
    norm: NormFlags,
    #[arg(long)]
    n_grid: String,
    /// Replicates per n. Default: 100000, raised to 1000000 when the norm
    /// touches moments beyond order 8.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct RegressArgs {
    /// Comma list of criterion ids to run (default: all twelve).
    #[arg(long)]
    only: Option<String>,
}

// ---------------------------------------------------------------------------
// Error classification onto the documented exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
    Verification(String),
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Verification(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Domain(m)
            | CliError::Verification(m)
            | CliError::NonConvergence(m) => m,
        }
    }
}

fn domain<E: Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        domain(e)
    }
}

impl From<NormError> for CliError {
    fn from(e: NormError) -> Self {
        match &e {
            NormError::DivergentInput(_) => CliError::NonConvergence(e.to_string()),
            _ => domain(e),
        }
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        match &e {
            TransformError::PhiBarDivergent { .. } | TransformError::NaturalUndefined(_) => {
                CliError::NonConvergence(e.to_string())
            }
            _ => domain(e),
        }
    }
}

impl From<FisherError> for CliError {
    fn from(e: FisherError) -> Self {
        match &e {
            FisherError::CramerConditionFails(_) => CliError::NonConvergence(e.to_string()),
            FisherError::Norm(n) if matches!(n, NormError::DivergentInput(_)) => {
                CliError::NonConvergence(e.to_string())
            }
            _ => domain(e),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match &e {
            BoundError::NoBound(_) => CliError::NonConvergence(e.to_string()),
            BoundError::Fisher(f) => FisherError::to_cli(f, &e),
            _ => domain(e),
        }
    }
}

trait ToCli {
    fn to_cli(inner: &FisherError, outer: &BoundError) -> CliError;
}

impl ToCli for FisherError {
    fn to_cli(inner: &FisherError, outer: &BoundError) -> CliError {
        match inner {
            FisherError::CramerConditionFails(_) => CliError::NonConvergence(outer.to_string()),
            _ => domain(outer),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match &e {
            MonteCarloError::EstimatorFailures { .. }
            | MonteCarloError::NoBracket
            | MonteCarloError::NoMoment(..) => CliError::NonConvergence(e.to_string()),
            MonteCarloError::Bound(b) => match b {
                BoundError::NoBound(_) => CliError::NonConvergence(e.to_string()),
                _ => domain(e),
            },
            _ => domain(e),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

fn parse_list_u64(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("bad integer `{t}` in list")))
        })
        .collect()
}

/// Grid expression: "geom:LO:HI:N", "lin:LO:HI:N" or a comma list.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 4 && (parts[0] == "geom" || parts[0] == "lin") {
        let lo: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid lo `{}`", parts[1])))?;
        let hi: f64 = parts[2]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid hi `{}`", parts[2])))?;
        let n: usize = parts[3]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid size `{}`", parts[3])))?;
        let spec = GridSpec {
            lo,
            hi,
            points: n,
            scale: if parts[0] == "geom" {
                GridScale::Geometric
            } else {
                GridScale::Linear
            },
        };
        return Ok(spec.materialize()?);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number `{t}` in grid")))
        })
        .collect()
}

fn parse_grid_spec(s: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 || (parts[0] != "geom" && parts[0] != "lin") {
        return Err(CliError::Usage(format!(
            "expected \"geom:LO:HI:N\" or \"lin:LO:HI:N\", got `{s}`"
        )));
    }
    Ok(GridSpec {
        lo: parts[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid lo `{}`", parts[1])))?,
        hi: parts[2]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid hi `{}`", parts[2])))?,
        points: parts[3]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid size `{}`", parts[3])))?,
        scale: if parts[0] == "geom" {
            GridScale::Geometric
        } else {
            GridScale::Linear
        },
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyDef {
    name: String,
    /// Knots [[x, log g0(x)], ...] of a piecewise-linear log-density.
    log_density: Vec<[f64; 2]>,
}

fn load_family(id: &str, file: Option<&std::path::Path>) -> Result<Family, CliError> {
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let def: FamilyDef = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let points: Vec<(f64, f64)> = def.log_density.iter().map(|p| (p[0], p[1])).collect();
        let fam = CustomShift::from_log_density(&def.name, &points)?.into_family();
        if fam.id() != id {
            return Err(CliError::Usage(format!(
                "--family `{id}` does not match the definition id `{}`",
                fam.id()
            )));
        }
        return Ok(fam);
    }
    Ok(Family::parse(id)?)
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

fn print_table(rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("  {k:<width$}  {v}");
    }
}

fn emit_records(records: &[Value], out: &Option<PathBuf>) -> Result<(), CliError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("serializable record"));
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn norm_value_string(v: NormValue) -> String {
    match v {
        NormValue::Finite(x) => format!("{x}"),
        NormValue::Divergent => "divergent".into(),
    }
}

fn merge(op: &str, value: Value) -> Value {
    let mut base = json!({ "op": op });
    if let (Value::Object(b), Value::Object(v)) = (&mut base, value) {
        for (k, val) in v {
            b.insert(k, val);
        }
    }
    base
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

fn run_fisher(args: &FisherArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let family = args.family.load()?;
    let given = [args.p.is_some(), args.psi.is_some(), args.phi.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given != 1 {
        return Err(CliError::Usage(
            "give exactly one of --p, --psi, --phi".into(),
        ));
    }
    let report = if let Some(p) = args.p {
        fisher::fisher_p(&family, args.theta, p)?
    } else if let Some(psi) = &args.psi {
        let psi_fn = PsiSpec::Named(psi.clone()).materialize()?;
        let grid = match &args.p_grid {
            Some(g) => Some(parse_grid_spec(g)?),
            None => None,
        };
        fisher::fisher_gls(&family, args.theta, &psi_fn, grid)?
    } else {
        let phi_fn = PhiSpec::Named(args.phi.clone().unwrap()).materialize()?;
        let lambdas = match &args.lambda_grid {
            Some(g) => Some(parse_grid(g)?),
            None => None,
        };
        fisher::fisher_bphi(&family, args.theta, &phi_fn, lambdas.as_deref())?
    };
    print_table(&[
        ("family".into(), report.family.clone()),
        ("theta".into(), format!("{}", report.theta)),
        ("norm".into(), report.norm.clone()),
        ("information".into(), norm_value_string(report.value)),
    ]);
    let divergent = report.value.is_divergent();
    emit_records(
        &[merge("fisher", serde_json::to_value(&report).unwrap())],
        out,
    )?;
    if divergent {
        return Err(CliError::NonConvergence(
            "information is divergent in the requested norm".into(),
        ));
    }
    Ok(())
}

fn run_bound(args: &BoundArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let family = args.family.load()?;
    let given = [
        args.q.is_some(),
        args.psi.is_some(),
        args.phi.is_some(),
        args.clt_norm.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if given != 1 {
        return Err(CliError::Usage(
            "give exactly one of --q, --psi, --phi, --clt-norm".into(),
        ));
    }
    let record;
    let mut rows: Vec<(String, String)> = vec![
        ("family".into(), family.id()),
        ("theta0".into(), format!("{}", args.theta)),
    ];
    if let Some(q) = args.q {
        let b = bounds::lower_bound_lp(&family, args.theta, q)?;
        rows.push(("statement norm".into(), format!("L_{q}")));
        rows.push(("p = q/(q-1)".into(), format!("{}", b.p)));
        rows.push(("R(p)".into(), format!("{}", b.rosenthal)));
        rows.push(("i_p(theta0)".into(), format!("{}", b.fisher_p)));
        rows.push(("bound".into(), format!("{}", b.bound)));
        record = merge("bound", serde_json::to_value(&b).unwrap());
    } else if let Some(psi) = &args.psi {
        let psi_fn = PsiSpec::Named(psi.clone()).materialize()?;
        let b = bounds::lower_bound_gls(&family, args.theta, &psi_fn)?;
        rows.push(("statement norm".into(), b.statement_norm.clone()));
        rows.push(("i_psi(theta0)".into(), format!("{}", b.fisher_gls)));
        rows.push(("bound".into(), format!("{}", b.bound)));
        if let Some(br) = &b.bounded_range {
            rows.push((
                format!("bound in {} (K(B) route)", br.statement_norm),
                format!("{}", br.bound),
            ));
            rows.push(("K(B)".into(), format!("{}", br.kb)));
        }
        record = merge("bound", serde_json::to_value(&b).unwrap());
    } else if let Some(phi) = &args.phi {
        let phi_fn = PhiSpec::Named(phi.clone()).materialize()?;
        let b = bounds::lower_bound_bphi(&family, args.theta, &phi_fn)?;
        rows.push(("statement norm".into(), b.statement_norm.clone()));
        rows.push(("i_phi(theta0)".into(), format!("{}", b.fisher_bphi)));
        rows.push(("bound".into(), format!("{}", b.bound)));
        record = merge("bound", serde_json::to_value(&b).unwrap());
    } else {
        let c = args.clt_norm.unwrap();
        let b = bounds::general_lower_bound(c)?;
        rows.push(("CLT norm of score".into(), format!("{c}")));
        rows.push(("bound".into(), format!("{b}")));
        record = json!({ "op": "bound", "clt_norm": c, "bound": b });
    }
    print_table(&rows);
    emit_records(&[record], out)
}

fn run_verify(args: &VerifyArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.scenario.display())))?;
    let mut scenario: Scenario = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.scenario.display())))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let family = load_family(&scenario.family, args.family_file.as_deref())?;
    let report = verify_bound_with(&family, &scenario)?;

    let mut rows: Vec<(String, String)> = vec![
        ("family".into(), scenario.family.clone()),
        ("estimator".into(), format!("{:?}", scenario.estimator)),
        ("statement norm".into(), report.statement_norm.clone()),
        ("seed".into(), format!("{}", scenario.seed)),
    ];
    if let Some(rhs) = report.rhs_bound {
        rows.push(("rhs bound".into(), format!("{rhs}")));
    }
    for r in &report.per_n {
        let se = r.se.map(|s| format!(" (se {s:.3e})")).unwrap_or_default();
        let margin = r
            .margin
            .map(|m| format!(", margin {m:.6}"))
            .unwrap_or_default();
        rows.push((format!("n = {}", r.n), format!("lhs {:.8}{se}{margin}", r.lhs)));
    }
    if let Some(t) = &report.trend {
        rows.push((
            "log-log trend".into(),
            format!("slope {:.5} (se {:.5})", t.slope, t.slope_se),
        ));
    }
    rows.push(("verdict".into(), format!("{:?}", report.verdict)));
    print_table(&rows);

    if let Some(csv_path) = &args.csv {
        fs::write(csv_path, report.to_csv())
            .map_err(|e| CliError::Usage(format!("{}: {e}", csv_path.display())))?;
    }
    emit_records(
        &[merge("verify", serde_json::to_value(&report).unwrap())],
        out,
    )?;
    if report.verdict == Verdict::Violated {
        return Err(CliError::Verification(
            "lower bound violated beyond Monte Carlo noise".into(),
        ));
    }
    Ok(())
}

fn run_clt_norm(args: &CltNormArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let dist = SourceDist::parse(&args.dist)?;
    let norm = args.norm.to_spec()?;
    let n_grid = parse_list_u64(&args.n_grid)?;
    let reps = args.reps.unwrap_or_else(|| default_reps_for(&norm));
    let est = clt_norm_estimate(&dist, &norm, &n_grid, reps, args.seed)?;
    let mut rows: Vec<(String, String)> = vec![
        ("dist".into(), est.dist.clone()),
        ("norm".into(), est.norm.clone()),
    ];
    for (n, v) in est.n_grid.iter().zip(&est.per_n) {
        rows.push((
            format!("n = {n}"),
            v.map(|x| format!("{x}")).unwrap_or_else(|| "divergent".into()),
        ));
    }
    rows.push(("sup".into(), format!("{}", est.sup)));
    rows.push((
        "growth exponent".into(),
        format!("{:.5} (se {:.5})", est.growth_exponent, est.growth_exponent_se),
    ));
    rows.push(("divergence".into(), format!("{}", est.divergence)));
    print_table(&rows);
    emit_records(
        &[merge("clt-norm", serde_json::to_value(&est).unwrap())],
        out,
    )
}

fn run_natural_psi(args: &NaturalPsiArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let family = args.family.load()?;
    let theta_grid = parse_grid(&args.theta_grid)?;
    let mut records = Vec::new();
    let mut rows: Vec<(String, String)> = vec![("family".into(), family.id())];
    if args.phi {
        let lambda_grid = parse_grid(&args.lambda_grid)?;
        let nat = natural_phi(&family, &theta_grid, &lambda_grid)?;
        rows.push(("function".into(), "phi_0".into()));
        if nat.truncated {
            rows.push((
                "lambda range truncated at".into(),
                format!("{}", nat.lambda0),
            ));
        }
        for &l in &lambda_grid {
            if l.abs() >= nat.lambda0 && nat.truncated {
                continue;
            }
            let v = nat.phi.eval(l);
            rows.push((format!("phi_0({l})"), format!("{v}")));
            records.push(json!({
                "op": "natural-phi",
                "family": family.id(),
                "theta_grid": theta_grid,
                "lambda": l,
                "value": v,
                "truncated_at": if nat.truncated { Some(nat.lambda0) } else { None },
            }));
        }
    } else {
        let p_grid = parse_grid(&args.p_grid)?;
        let psi = natural_psi(&family, &theta_grid)?;
        rows.push(("function".into(), "psi_0".into()));
        for &p in &p_grid {
            let v = psi.eval(p);
            rows.push((format!("psi_0({p})"), format!("{v}")));
            records.push(json!({
                "op": "natural-psi",
                "family": family.id(),
                "theta_grid": theta_grid,
                "p": p,
                "value": v,
            }));
        }
    }
    print_table(&rows);
    emit_records(&records, out)
}

fn run_conjugate(args: &ConjugateArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let phi = PhiSpec::Named(args.phi.clone()).materialize()?;
    let mut records = Vec::new();
    let mut rows: Vec<(String, String)> = vec![("phi".into(), args.phi.clone())];
    if args.phi_bar {
        let lambda_grid = parse_grid(&args.lambda_grid)?;
        let mut any_divergent = false;
        for &l in &lambda_grid {
            let pt = phi_bar_at(&phi, l, PHI_BAR_DEFAULT_N_MAX);
            any_divergent |= pt.diverged;
            rows.push((
                format!("phi_bar({l})"),
                if pt.diverged {
                    "divergent".into()
                } else {
                    format!("{} (argmax n = {})", pt.value, pt.argmax_n)
                },
            ));
            records.push(json!({
                "op": "phi-bar",
                "phi": args.phi,
                "lambda": l,
                "value": pt.value,
                "argmax_n": pt.argmax_n,
                "diverged": pt.diverged,
            }));
        }
        print_table(&rows);
        emit_records(&records, out)?;
        if any_divergent {
            return Err(CliError::NonConvergence(
                "phi_bar diverges on part of the lambda grid".into(),
            ));
        }
    } else {
        let u_grid = parse_grid(&args.u_grid)?;
        for &u in &u_grid {
            let pt = conjugate_at(&phi, u);
            records.push(json!({
                "op": "conjugate",
                "phi": args.phi,
                "u": pt.u,
                "value": pt.value,
                "maximizer": pt.maximizer,
                "at_boundary": pt.at_boundary,
            }));
        }
        rows.push(("points".into(), format!("{}", u_grid.len())));
        let mid = conjugate_at(&phi, u_grid[u_grid.len() / 2]);
        rows.push((
            format!("phi*({})", mid.u),
            format!("{} (maximizer {})", mid.value, mid.maximizer),
        ));
        print_table(&rows);
        emit_records(&records, out)?;
    }
    Ok(())
}

fn run_probe(args: &ProbeArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let dist = SourceDist::parse(&args.dist)?;
    let norm = args.norm.to_spec()?;
    let n_grid = parse_list_u64(&args.n_grid)?;
    let reps = args.reps.unwrap_or_else(|| default_reps_for(&norm));
    let (verdict, est) = wnri_probe(&dist, &norm, &n_grid, reps, args.seed)?;
    print_table(&[
        ("dist".into(), est.dist.clone()),
        ("norm".into(), est.norm.clone()),
        (
            "growth exponent".into(),
            format!("{:.5} (se {:.5})", est.growth_exponent, est.growth_exponent_se),
        ),
        ("verdict".into(), format!("{verdict:?}")),
    ]);
    emit_records(
        &[json!({
            "op": "probe",
            "verdict": format!("{verdict:?}"),
            "estimate": serde_json::to_value(&est).unwrap(),
        })],
        out,
    )
}

fn run_regress(args: &RegressArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
    let ids: Vec<u32> = match &args.only {
        Some(list) => list
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| CliError::Usage(format!("bad criterion id `{t}`")))
            })
            .collect::<Result<_, _>>()?,
        None => ribound::acceptance::CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut records = Vec::new();
    let mut failures = 0u32;
    for id in ids {
        let outcome = ribound::acceptance::run_criterion(id);
        println!(
            "criterion {:2} [{}] {} — {}",
            outcome.id,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.detail
        );
        if !outcome.passed {
            failures += 1;
        }
        records.push(json!({
            "op": "regress-suite",
            "criterion": outcome.id,
            "name": outcome.name,
            "passed": outcome.passed,
            "detail": outcome.detail,
        }));
    }
    emit_records(&records, out)?;
    if failures > 0 {
        return Err(CliError::Verification(format!(
            "{failures} acceptance criteria failed"
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let workers = cli
        .workers
        .or_else(|| {
            std::env::var("RIBOUND_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
    let out = cli.out.clone();
    exec::with_pool(workers, || match &cli.command {
        Command::Fisher(a) => run_fisher(a, &out),
        Command::Bound(a) => run_bound(a, &out),
        Command::Verify(a) => run_verify(a, &out),
        Command::CltNorm(a) => run_clt_norm(a, &out),
        Command::NaturalPsi(a) => run_natural_psi(a, &out),
        Command::Conjugate(a) => run_conjugate(a, &out),
        Command::Probe(a) => run_probe(a, &out),
        Command::RegressSuite(a) => run_regress(a, &out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

#[allow(dead_code)]
fn assert_cli_wiring() {
    Cli::command().debug_assert();
}
