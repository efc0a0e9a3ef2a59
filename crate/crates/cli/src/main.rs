//! Command-line front end: data ingestion, configuration, and plot-ready
//! tabular output for fits and simulations.
//!
//! All tables are CSV: comma separators, `.` decimals, `\n` terminators,
//! UTF-8, `#` comment lines.  Numbers are printed with 17 significant
//! digits so re-parsing a results file recovers every value exactly.
//! Exit codes: 0 success, 2 parse/validation errors, 3 numerical
//! failures.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shrink_core::adm::{adm_fit, FamilyParams, PearsonFamily};
use shrink_core::estimators::{adm_shp_fit, estimate_a_mle};
use shrink_core::likelihood::gls_beta;
use shrink_core::model::{Dataset, GroupObservation};
use shrink_core::numeric::{ln_gamma, normal_quantile};
use shrink_core::posterior::{build_posterior, exact_theta_inference, refinement_delta};
use shrink_core::sim::{
    baranchik_check, simulate_coverage, simulate_risk, Procedure, SimSpec, VarianceSpec,
};
use shrink_core::ShrinkError;

#[derive(Parser)]
#[command(
    name = "shrink",
    version,
    about = "Shrinkage estimation for the two-level Normal model: \
             adjusted-maximum (ADM) fits, exact flat-prior posteriors, \
             James-Stein baselines, and Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit per-group shrinkage and interval estimates from a CSV table
    Fit(FitArgs),
    /// Monte Carlo interval-coverage study over a grid of true A values
    Simulate(SimulateArgs),
    /// Monte Carlo squared-error risk study at fixed theta configurations
    Risk(RiskArgs),
    /// Equal-variance demo table: posterior, adjusted, and fitted Beta
    /// densities of the shrinkage factor
    AdmDemo(AdmDemoArgs),
    /// Sweep the Baranchik minimaxity conditions for the adjusted estimator
    Baranchik(BaranchikArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with header `id,y,V[,x1,...,xr]`; rows without covariate
    /// columns get an intercept-only design
    input: PathBuf,
    /// Estimator: adm (adjusted maximum), mle (truncated REML plug-in),
    /// or exact (flat-prior posterior by quadrature)
    #[arg(long, default_value = "adm")]
    estimator: String,
    /// Likelihood power adjustment, in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Two-sided interval level
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Quadrature intervals for the exact posterior
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    /// Output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of groups
    #[arg(long)]
    k: usize,
    /// Sampling variance: one value, or a comma list of length k
    #[arg(long = "V")]
    v: String,
    /// Comma list of true A values
    #[arg(long = "A-grid")]
    a_grid: String,
    /// Replications per grid point
    #[arg(long)]
    reps: usize,
    /// Two-sided interval level
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma list of procedures: exact_shp, adm_shp, mle_plugin,
    /// adm_q:<q>, js_plus, sample_mean
    #[arg(long, default_value = "exact_shp,adm_shp,mle_plugin")]
    procedures: String,
    /// Level-II mean used by the generator (intercept-only design)
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Quadrature intervals for exact_shp inside the simulation
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    /// Output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long)]
    k: usize,
    #[arg(long = "V")]
    v: String,
    /// Explicit theta vector (comma list of length k); repeatable
    #[arg(long = "theta")]
    thetas: Vec<String>,
    /// Comma list of centered spreads; each becomes a canonical
    /// alternating-sign theta vector with that sum of squares
    #[arg(long)]
    spread2: Option<String>,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "exact_shp,adm_shp,sample_mean")]
    procedures: String,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AdmDemoArgs {
    /// Number of groups (at least 5 for a plottable density)
    #[arg(long)]
    k: usize,
    /// Common sampling variance
    #[arg(long = "V")]
    v: f64,
    /// Centered sum of squares
    #[arg(long = "S")]
    s: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BaranchikArgs {
    #[arg(long)]
    k: usize,
    #[arg(long = "V")]
    v: f64,
    /// S grid: either `lo:hi:n` (log-spaced) or a comma list
    #[arg(long = "S-grid", default_value = "0.1:500:5000")]
    s_grid: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Terminal error with its process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

/// Validation-type errors exit 2; numerical failures exit 3.
fn from_shrink(e: ShrinkError) -> CliError {
    match e {
        ShrinkError::SingularSystem { .. }
        | ShrinkError::NoInteriorMax { .. }
        | ShrinkError::NonConcaveAtMode { .. }
        | ShrinkError::OptimizerFailure(_)
        | ShrinkError::NotProper { .. } => CliError::numeric(e.to_string()),
        _ => CliError::usage(e.to_string()),
    }
}

/// 17 significant digits; round-trips exactly through `f64::from_str`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Risk(a) => cmd_risk(a),
        Cmd::AdmDemo(a) => cmd_adm_demo(a),
        Cmd::Baranchik(a) => cmd_baranchik(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shrink: error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn write_output(path: &Option<PathBuf>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

// ---------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------

fn parse_input(path: &PathBuf) -> Result<Dataset, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {name}: {e}")))?;

    let mut rows: Vec<GroupObservation> = Vec::new();
    let mut lines: Vec<(String, usize)> = Vec::new();
    let mut r: Option<usize> = None;
    let mut has_x_cols = false;
    let mut header_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields.len() < 3 || fields[0] != "id" || fields[1] != "y" || fields[2] != "V" {
                return Err(CliError::usage(format!(
                    "{name}:{lineno}: expected header id,y,V[,x1,...,xr]"
                )));
            }
            has_x_cols = fields.len() > 3;
            r = Some(if has_x_cols { fields.len() - 3 } else { 1 });
            header_seen = true;
            continue;
        }
        let r = r.unwrap();
        let expected = if has_x_cols { 3 + r } else { 3 };
        if fields.len() != expected {
            return Err(CliError::usage(format!(
                "{name}:{lineno}: expected {expected} fields, found {}",
                fields.len()
            )));
        }
        let parse = |tok: &str, col: &str| -> Result<f64, CliError> {
            tok.parse::<f64>().map_err(|_| {
                CliError::usage(format!("{name}:{lineno}: bad {col} value '{tok}'"))
            })
        };
        let y = parse(fields[1], "y")?;
        let v = parse(fields[2], "V")?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::usage(format!(
                "{name}:{lineno}: sampling variance must be positive, got {}",
                fields[2]
            )));
        }
        let x = if fields.len() == 3 {
            vec![1.0]
        } else {
            fields[3..]
                .iter()
                .map(|tok| parse(tok, "x"))
                .collect::<Result<Vec<f64>, CliError>>()?
        };
        lines.push((fields[0].to_string(), lineno));
        rows.push(GroupObservation::new(fields[0], y, v, x));
    }

    if !header_seen {
        return Err(CliError::usage(format!("{name}:1: empty input")));
    }
    Dataset::new(rows, r.unwrap()).map_err(|e| {
        let line_of = |id: &str| lines.iter().find(|(i, _)| i == id).map(|(_, l)| *l);
        let located = match &e {
            ShrinkError::NonPositiveVariance { id, .. }
            | ShrinkError::DimensionMismatch { id, .. }
            | ShrinkError::NonFiniteInput { id } => line_of(id),
            _ => None,
        };
        match located {
            Some(l) => CliError::usage(format!("{name}:{l}: {e}")),
            None => CliError::usage(format!("{name}: {e}")),
        }
    })
}

struct FitRow {
    id: String,
    y: f64,
    v: f64,
    b_hat: f64,
    b_mean: f64,
    b_var: f64,
    theta_hat: f64,
    se: f64,
    lo: f64,
    hi: f64,
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    if !(args.q > 0.0 && args.q <= 1.0) {
        return Err(CliError::usage(format!("q must lie in (0,1], got {}", args.q)));
    }
    if !(args.level > 0.5 && args.level < 1.0) {
        return Err(CliError::usage(format!(
            "level must lie in (0.5,1), got {}",
            args.level
        )));
    }
    let d = parse_input(&args.input)?;

    let mut out = String::new();
    let _ = writeln!(out, "# shrink fit");
    let _ = writeln!(out, "# input = {}", args.input.display());
    let _ = writeln!(out, "# estimator = {}", args.estimator);
    let _ = writeln!(out, "# q = {}", num(args.q));
    let _ = writeln!(out, "# level = {}", num(args.level));
    let _ = writeln!(out, "# nodes = {}", args.nodes);

    let mut rows: Vec<FitRow> = Vec::with_capacity(d.k());

    match args.estimator.as_str() {
        "adm" => {
            let fit = adm_shp_fit(&d, args.q, args.level).map_err(from_shrink)?;
            let _ = writeln!(out, "# A_hat = {}", num(fit.a.a_hat));
            let _ = writeln!(out, "# method = adm");
            let _ = writeln!(out, "# converged = {}", fit.a.converged);
            let _ = writeln!(
                out,
                "# beta = {}",
                fit.beta.iter().map(|b| num(*b)).collect::<Vec<_>>().join(",")
            );
            for (g, inf) in d.groups().iter().zip(&fit.per_group) {
                rows.push(FitRow {
                    id: g.id.clone(),
                    y: g.y,
                    v: g.v,
                    b_hat: inf.b_hat,
                    b_mean: inf.b_mean,
                    b_var: inf.b_var,
                    theta_hat: inf.theta_hat,
                    se: inf.theta_var.sqrt(),
                    lo: inf.lo,
                    hi: inf.hi,
                });
            }
        }
        "mle" => {
            let est = estimate_a_mle(&d).map_err(from_shrink)?;
            let gls = gls_beta(est.a_hat, &d).map_err(from_shrink)?;
            let _ = writeln!(out, "# A_hat = {}", num(est.a_hat));
            let _ = writeln!(out, "# method = mle");
            let _ = writeln!(out, "# converged = {}", est.converged);
            let _ = writeln!(
                out,
                "# beta = {}",
                gls.beta.iter().map(|b| num(*b)).collect::<Vec<_>>().join(",")
            );
            if est.a_hat == 0.0 {
                let _ = writeln!(out, "# boundary: full shrinkage");
            }
            let z = normal_quantile(0.5 * (1.0 + args.level));
            for g in d.groups() {
                let b = g.v / (est.a_hat + g.v);
                let xb: f64 = g.x.iter().zip(&gls.beta).map(|(xi, bi)| xi * bi).sum();
                let m = g.y - b * (g.y - xb);
                let s2 = g.v * (1.0 - b) + b * b * gls.cov.quad_form(&g.x);
                let se = s2.sqrt();
                rows.push(FitRow {
                    id: g.id.clone(),
                    y: g.y,
                    v: g.v,
                    b_hat: b,
                    b_mean: b,
                    b_var: 0.0,
                    theta_hat: m,
                    se,
                    lo: m - z * se,
                    hi: m + z * se,
                });
            }
        }
        "exact" => {
            let grid = build_posterior(&d, args.nodes).map_err(from_shrink)?;
            let delta = refinement_delta(&d, args.nodes).map_err(from_shrink)?;
            let a_med = grid.median_a();
            let _ = writeln!(out, "# A_hat = {}", num(a_med));
            let _ = writeln!(out, "# method = exact (A_hat is the posterior median)");
            let _ = writeln!(out, "# refinement_delta = {}", num(delta));
            let gls = gls_beta(a_med, &d).map_err(from_shrink)?;
            let _ = writeln!(
                out,
                "# beta = {}",
                gls.beta.iter().map(|b| num(*b)).collect::<Vec<_>>().join(",")
            );
            for (j, g) in d.groups().iter().enumerate() {
                let inf = exact_theta_inference(&grid, &d, j, args.level).map_err(from_shrink)?;
                rows.push(FitRow {
                    id: g.id.clone(),
                    y: g.y,
                    v: g.v,
                    b_hat: inf.b_hat,
                    b_mean: inf.b_mean,
                    b_var: inf.b_var,
                    theta_hat: inf.theta_hat,
                    se: inf.theta_var.sqrt(),
                    lo: inf.lo,
                    hi: inf.hi,
                });
            }
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown estimator '{other}' (expected adm, mle, or exact)"
            )));
        }
    }

    let _ = writeln!(out, "id,y,V,B_hat,B_mean,B_var,theta_hat,se,lo,hi");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.id,
            num(row.y),
            num(row.v),
            num(row.b_hat),
            num(row.b_mean),
            num(row.b_var),
            num(row.theta_hat),
            num(row.se),
            num(row.lo),
            num(row.hi)
        );
    }
    write_output(&args.output, &out)
}

// ---------------------------------------------------------------------
// simulate / risk
// ---------------------------------------------------------------------

fn variance_spec(k: usize, v: &str) -> Result<VarianceSpec, CliError> {
    let vals = parse_f64_list(v, "V")?;
    match vals.len() {
        1 => Ok(VarianceSpec::Equal(vals[0])),
        n if n == k => Ok(VarianceSpec::PerGroup(vals)),
        n => Err(CliError::usage(format!("--V needs 1 or k={k} values, found {n}"))),
    }
}

fn procedures(tokens: &str) -> Result<Vec<Procedure>, CliError> {
    tokens
        .split(',')
        .map(|t| Procedure::parse(t).map_err(|e| CliError::usage(e.to_string())))
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let mut spec = SimSpec::new(args.k, variance_spec(args.k, &args.v)?);
    spec.a_grid = parse_f64_list(&args.a_grid, "A-grid")?;
    spec.reps = args.reps;
    spec.level = args.level;
    spec.seed = args.seed;
    spec.beta = vec![args.beta];
    spec.procedures = procedures(&args.procedures)?;
    spec.exact_nodes = args.nodes;

    let report = simulate_coverage(&spec).map_err(from_shrink)?;

    let mut out = String::new();
    let _ = writeln!(out, "# shrink simulate");
    let _ = writeln!(out, "# k = {}", args.k);
    let _ = writeln!(out, "# V = {}", args.v);
    let _ = writeln!(out, "# A_grid = {}", args.a_grid);
    let _ = writeln!(out, "# reps = {}", args.reps);
    let _ = writeln!(out, "# level = {}", num(args.level));
    let _ = writeln!(out, "# seed = {}", args.seed);
    let _ = writeln!(out, "# beta = {}", num(args.beta));
    let _ = writeln!(out, "# procedures = {}", args.procedures);
    let _ = writeln!(out, "# nodes = {}", args.nodes);
    for row in &report.rows {
        if row.failures > 0 {
            let _ = writeln!(
                out,
                "# failures: procedure={} A={} count={}",
                row.procedure,
                num(row.a),
                row.failures
            );
        }
    }
    let _ = writeln!(out, "procedure,A,coverage,coverage_mcse,mean_width,collapse_freq");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.procedure,
            num(row.a),
            num(row.coverage),
            num(row.coverage_mcse),
            num(row.mean_width),
            num(row.collapse_freq)
        );
    }
    write_output(&args.output, &out)
}

/// Canonical centered theta vector with a given sum of squares: the
/// alternating sign pattern (last entry zeroed for odd k), scaled.
fn canonical_theta(k: usize, spread2: f64) -> Vec<f64> {
    let mut z: Vec<f64> = (0..k).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    if k % 2 == 1 {
        z[k - 1] = 0.0;
    }
    let mean = z.iter().sum::<f64>() / k as f64;
    for zi in &mut z {
        *zi -= mean;
    }
    let ss: f64 = z.iter().map(|zi| zi * zi).sum();
    let scale = if spread2 > 0.0 { (spread2 / ss).sqrt() } else { 0.0 };
    z.iter().map(|zi| zi * scale).collect()
}

fn cmd_risk(args: RiskArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let mut spec = SimSpec::new(args.k, variance_spec(args.k, &args.v)?);
    spec.reps = args.reps;
    spec.level = args.level;
    spec.seed = args.seed;
    spec.beta = vec![args.beta];
    spec.procedures = procedures(&args.procedures)?;
    spec.exact_nodes = args.nodes;

    let mut configs: Vec<Vec<f64>> = Vec::new();
    for t in &args.thetas {
        let th = parse_f64_list(t, "theta")?;
        if th.len() != args.k {
            return Err(CliError::usage(format!(
                "--theta needs k={} values, found {}",
                args.k,
                th.len()
            )));
        }
        configs.push(th);
    }
    if let Some(spreads) = &args.spread2 {
        for s in parse_f64_list(spreads, "spread2")? {
            if s < 0.0 {
                return Err(CliError::usage("--spread2 entries must be nonnegative"));
            }
            configs.push(canonical_theta(args.k, s));
        }
    }
    if configs.is_empty() {
        return Err(CliError::usage("provide --theta and/or --spread2"));
    }
    spec.theta_configs = configs;

    let report = simulate_risk(&spec).map_err(from_shrink)?;

    let mut out = String::new();
    let _ = writeln!(out, "# shrink risk");
    let _ = writeln!(out, "# k = {}", args.k);
    let _ = writeln!(out, "# V = {}", args.v);
    let _ = writeln!(out, "# reps = {}", args.reps);
    let _ = writeln!(out, "# seed = {}", args.seed);
    let _ = writeln!(out, "# beta = {}", num(args.beta));
    let _ = writeln!(out, "# procedures = {}", args.procedures);
    let _ = writeln!(out, "# nodes = {}", args.nodes);
    for row in &report.rows {
        if row.failures > 0 {
            let _ = writeln!(
                out,
                "# failures: procedure={} config={} count={}",
                row.procedure, row.config, row.failures
            );
        }
    }
    let _ = writeln!(out, "procedure,config,spread2,total_mse,mse_mcse");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.procedure,
            row.config,
            num(row.spread2),
            num(row.total_mse),
            num(row.mse_mcse)
        );
    }
    write_output(&args.output, &out)
}

// ---------------------------------------------------------------------
// adm-demo
// ---------------------------------------------------------------------

fn cmd_adm_demo(args: AdmDemoArgs) -> Result<(), CliError> {
    if !(args.v > 0.0) || !(args.s > 0.0) {
        return Err(CliError::usage("--V and --S must be positive"));
    }
    if args.k < 5 {
        return Err(CliError::usage(
            "invalid shape parameters: the shrinkage density is unbounded for k < 5",
        ));
    }
    let pow = (args.k as f64 - 5.0) / 2.0;
    let t = args.s / (2.0 * args.v);
    // Unnormalized log posterior density of B under the flat prior on A.
    let log_post = move |b: f64| pow * b.ln() - t * b;

    let fit = adm_fit(log_post, PearsonFamily::Beta, (0.0, 1.0)).map_err(from_shrink)?;
    let (a_par, b_par) = match fit.params {
        FamilyParams::Beta { a, b } => (a, b),
        _ => unreachable!("Beta family requested"),
    };
    if a_par < 1.0 || b_par < 1.0 {
        return Err(CliError::usage(format!(
            "invalid shape parameters: fitted Beta({a_par:.4}, {b_par:.4}) is unbounded on the grid"
        )));
    }
    let b_adm = fit.mode_adjusted;

    // Fine-grid exact posterior mean of B.
    let fine = 100_000usize;
    let (mut z, mut m1) = (0.0, 0.0);
    for i in 0..=fine {
        let b = i as f64 / fine as f64;
        let w = if b == 0.0 {
            if pow > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            log_post(b).exp()
        };
        let trap = if i == 0 || i == fine { 0.5 } else { 1.0 };
        z += trap * w;
        m1 += trap * w * b;
    }
    let b_exact_mean = m1 / z;

    // 1001-point output grid.
    let n = 1000usize;
    let h = 1.0 / n as f64;
    let mut post = Vec::with_capacity(n + 1);
    let mut adj = Vec::with_capacity(n + 1);
    let mut beta_fit = Vec::with_capacity(n + 1);
    let ln_beta_norm = ln_gamma(a_par) + ln_gamma(b_par) - ln_gamma(a_par + b_par);
    for i in 0..=n {
        let b = i as f64 * h;
        let p = if b == 0.0 {
            if pow > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            log_post(b).exp()
        };
        let adj_v = if b == 0.0 || b == 1.0 {
            0.0
        } else {
            (log_post(b) + b.ln() + (1.0 - b).ln()).exp()
        };
        let bf = if b == 0.0 || b == 1.0 {
            0.0
        } else {
            ((a_par - 1.0) * b.ln() + (b_par - 1.0) * (1.0 - b).ln() - ln_beta_norm).exp()
        };
        post.push(p);
        adj.push(adj_v);
        beta_fit.push(bf);
    }
    // Posterior and adjusted curves are normalized on the grid; the
    // fitted Beta keeps its analytic normalization, so its trapezoid
    // integral is a genuine accuracy check rather than an identity.
    let trap_norm = |v: &mut [f64]| {
        let mut sum = 0.0;
        for (i, x) in v.iter().enumerate() {
            let w = if i == 0 || i == v.len() - 1 { 0.5 } else { 1.0 };
            sum += w * x * h;
        }
        for x in v.iter_mut() {
            *x /= sum;
        }
    };
    trap_norm(&mut post);
    trap_norm(&mut adj);

    let mut out = String::new();
    let _ = writeln!(out, "# shrink adm-demo");
    let _ = writeln!(out, "# k = {}", args.k);
    let _ = writeln!(out, "# V = {}", num(args.v));
    let _ = writeln!(out, "# S = {}", num(args.s));
    let _ = writeln!(out, "# beta_params = {},{}", num(a_par), num(b_par));
    let _ = writeln!(out, "# B_adm = {}", num(b_adm));
    let _ = writeln!(out, "# B_exact_mean = {}", num(b_exact_mean));
    let _ = writeln!(out, "B,posterior_density,adjusted_density,beta_fit_density");
    for i in 0..=n {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(i as f64 * h),
            num(post[i]),
            num(adj[i]),
            num(beta_fit[i])
        );
    }
    write_output(&args.output, &out)
}

// ---------------------------------------------------------------------
// baranchik
// ---------------------------------------------------------------------

fn parse_s_grid(s: &str) -> Result<Vec<f64>, CliError> {
    if let Some((lo, rest)) = s.split_once(':') {
        let (hi, n) = rest
            .split_once(':')
            .ok_or_else(|| CliError::usage("S-grid range must be lo:hi:n"))?;
        let lo: f64 = lo.parse().map_err(|_| CliError::usage("bad S-grid lo"))?;
        let hi: f64 = hi.parse().map_err(|_| CliError::usage("bad S-grid hi"))?;
        let n: usize = n.parse().map_err(|_| CliError::usage("bad S-grid n"))?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(CliError::usage("S-grid range needs 0 < lo < hi and n >= 2"));
        }
        let ratio = hi / lo;
        Ok((0..n)
            .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
            .collect())
    } else {
        parse_f64_list(s, "S-grid")
    }
}

fn cmd_baranchik(args: BaranchikArgs) -> Result<(), CliError> {
    if !(args.v > 0.0) {
        return Err(CliError::usage("--V must be positive"));
    }
    let grid = parse_s_grid(&args.s_grid)?;
    let report = baranchik_check(args.k, args.v, &grid).map_err(from_shrink)?;

    let mut out = String::new();
    let _ = writeln!(out, "# shrink baranchik");
    let _ = writeln!(out, "# k = {}", args.k);
    let _ = writeln!(out, "# V = {}", num(args.v));
    let _ = writeln!(out, "# points = {}", report.s.len());
    let _ = writeln!(out, "# min_adjacent_diff = {}", num(report.min_adjacent_diff));
    let _ = writeln!(out, "# nondecreasing = {}", report.nondecreasing);
    let _ = writeln!(out, "# max_tau = {}", num(report.max_tau));
    let _ = writeln!(out, "# bound = {}", num(report.bound));
    let _ = writeln!(out, "# minimax_conditions_met = {}", report.minimax_conditions_met);
    let _ = writeln!(out, "S,tau");
    for (s, tau) in report.s.iter().zip(&report.tau) {
        let _ = writeln!(out, "{},{}", num(*s), num(*tau));
    }
    write_output(&args.output, &out)
}
