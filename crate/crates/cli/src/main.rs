//! Command-line front end for the equilibrium-selection solver.
//!
//! Exit codes: 0 success (determinate or committed selection), 1 runtime
//! error (including no path overlap), 2 indeterminate under the stability
//! selector, 3 no stable solution, 4 comparison exceeds tolerance,
//! 64 usage error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::json;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dsge_select::selectors::format_float;
use dsge_select::{
    check_complementarity, compare_paths, diagnose, impulse_response, load_model, nk_model,
    piecewise_residuals, regime_update, scalar_forward_model, select_bk, select_fa, select_mv,
    solve_occbin, zlb_regime_pair, CellClass, Diagnostics, FaSelection, FiscalParams, FiscalRoles,
    LinearREModel, MapTable, MvSelection, NKParams, OccbinOptions, PathTable, Regime, SelectOptions,
    Selection, StateSpaceSolution,
};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_INDETERMINATE: i32 = 2;
const EXIT_NO_STABLE: i32 = 3;
const EXIT_DIFF_OVER_TOL: i32 = 4;
const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "dsge-select",
    version,
    about = "Linear rational-expectations solver with swappable equilibrium selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a model under a selection rule; write solution, diagnostics
    /// and per-shock impulse responses
    Solve(SolveArgs),
    /// Classify determinacy over a policy-coefficient grid and write one
    /// CSV per selection rule
    Map(MapArgs),
    /// Run the interest-rate lower-bound experiment and write the path
    /// with regime metadata
    OccbinZlb(OccbinArgs),
    /// Compare two path CSVs variable by variable
    Compare(CompareArgs),
    /// Print diagnostics without committing to a solution
    Diagnose(DiagnoseArgs),
}

/// Model choice plus parameter overrides (overrides apply to the builtin
/// monetary model only).
#[derive(Args, Clone)]
struct ModelArgs {
    /// Builtin name (`nk`, `scalar-forward`) or path to a model JSON file
    #[arg(long, default_value = "nk")]
    model: String,
    /// Intertemporal elasticity parameter of the builtin monetary model
    #[arg(long)]
    sigma: Option<f64>,
    /// Discount factor
    #[arg(long)]
    beta: Option<f64>,
    /// Price-adjustment slope
    #[arg(long)]
    kappa: Option<f64>,
    /// Policy response to inflation
    #[arg(long)]
    phi_pi: Option<f64>,
    /// Policy response to output
    #[arg(long)]
    phi_y: Option<f64>,
    /// Shock persistence
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SelectorKind {
    /// Unique-stable-solution rule: refuses under indeterminacy
    Bk,
    /// Minimal-variance rule: commits to the zero-sunspot member
    Mv,
    /// Fiscal-anchoring rule: augments with debt and a surplus rule first
    Fa,
}

impl SelectorKind {
    fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Bk => "bk",
            SelectorKind::Mv => "mv",
            SelectorKind::Fa => "fa",
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "bk")]
    selector: SelectorKind,
    /// Surplus response to debt for the fiscal-anchoring selector
    #[arg(long, default_value_t = 0.2)]
    gamma_s: f64,
    /// Impulse-response length in periods
    #[arg(long, default_value_t = 40)]
    horizon: usize,
    /// Recorded in outputs for reproducibility bookkeeping
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Grid as `pi_min:pi_max,y_min:y_max`
    #[arg(long, default_value = "0:3,0:2")]
    grid: String,
    /// Grid step (same for both axes)
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct OccbinArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Shock size; applied with the sign that pushes the rate toward the
    /// bound (the applied value is recorded in the metadata)
    #[arg(long, default_value_t = 0.01)]
    shock: f64,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    /// Solve without the bound (reference rule throughout)
    #[arg(long)]
    no_constraint: bool,
    /// Compatibility toggle recorded in metadata (this implementation
    /// requires a determinate reference regime, so it has no further
    /// effect)
    #[arg(long)]
    dynare_compat: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// First path CSV
    path_a: PathBuf,
    /// Second path CSV
    path_b: PathBuf,
    /// Largest acceptable absolute difference
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    verbose: bool,
}

/// Failure carrying its process exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
    fn error(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: message.into(),
        }
    }
}

impl From<dsge_select::Error> for Failure {
    fn from(e: dsge_select::Error) -> Self {
        Failure::error(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::error(format!("i/o error: {e}"))
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Map(args) => cmd_map(args),
        Cmd::OccbinZlb(args) => cmd_occbin_zlb(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

// --- model construction ---

fn overrides_given(m: &ModelArgs) -> bool {
    m.sigma.is_some()
        || m.beta.is_some()
        || m.kappa.is_some()
        || m.phi_pi.is_some()
        || m.phi_y.is_some()
        || m.rho.is_some()
}

fn nk_params(m: &ModelArgs) -> NKParams {
    let mut p = NKParams::default();
    if let Some(v) = m.sigma {
        p.sigma = v;
    }
    if let Some(v) = m.beta {
        p.beta = v;
    }
    if let Some(v) = m.kappa {
        p.kappa = v;
    }
    if let Some(v) = m.phi_pi {
        p.phi_pi = v;
    }
    if let Some(v) = m.phi_y {
        p.phi_y = v;
    }
    if let Some(v) = m.rho {
        p.rho = v;
    }
    p
}

fn build_model(m: &ModelArgs) -> Result<LinearREModel, Failure> {
    match m.model.as_str() {
        "nk" => Ok(nk_model(&nk_params(m))?),
        "scalar-forward" => {
            if overrides_given(m) {
                return Err(Failure::usage(
                    "parameter overrides apply to the builtin `nk` model only",
                ));
            }
            Ok(scalar_forward_model(0.5)?)
        }
        path => {
            if overrides_given(m) {
                return Err(Failure::usage(
                    "parameter overrides apply to the builtin `nk` model only",
                ));
            }
            Ok(load_model(Path::new(path))?)
        }
    }
}

// --- shared output helpers ---

fn ensure_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::error(format!("cannot create output directory {dir:?}: {e}")))
}

fn matrix_json(m: &DMatrix<f64>) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| {
                serde_json::Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect())
            })
            .collect(),
    )
}

fn vector_json(v: &DVector<f64>) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|x| json!(x)).collect())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Failure::error(format!("cannot write {path:?}: {e}")))?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_diagnostics(path: &Path, diag: &Diagnostics) -> Result<(), Failure> {
    let value = serde_json::to_value(diag)
        .map_err(|e| Failure::error(format!("cannot serialize diagnostics: {e}")))?;
    write_json(path, &value)
}

fn solution_json(
    sol: &StateSpaceSolution,
    selector: SelectorKind,
    model_name: &str,
    message: &str,
    extra: serde_json::Value,
) -> serde_json::Value {
    let mut value = json!({
        "selector": selector.as_str(),
        "model": model_name,
        "message": message,
        "names": sol.names,
        "shock_names": sol.shock_names,
        "n_s": sol.n_s,
        "p": matrix_json(&sol.p),
        "r": matrix_json(&sol.r),
        "q": matrix_json(&sol.q_imp),
        "jump_impact": matrix_json(&sol.jump_impact),
        "kappa": vector_json(&sol.kappa_const),
    });
    if let (Some(obj), Some(add)) = (value.as_object_mut(), extra.as_object()) {
        for (k, v) in add {
            obj.insert(k.clone(), v.clone());
        }
    }
    value
}

fn write_irfs(
    sol: &StateSpaceSolution,
    horizon: usize,
    out: &Path,
    verbose: bool,
) -> Result<Vec<String>, Failure> {
    let mut files = Vec::new();
    for k in 0..sol.n_shocks() {
        let irf = impulse_response(sol, k, 1.0, horizon)?;
        let name = format!("irf_{}.csv", sol.shock_names[k]);
        let path = out.join(&name);
        irf.write_csv(File::create(&path)?)?;
        if verbose {
            eprintln!("wrote {}", path.display());
        }
        files.push(name);
    }
    Ok(files)
}

fn print_eigentable(diag: &Diagnostics) {
    eprintln!("eigenvalues (modulus, class):");
    for e in &diag.eigenvalues {
        match (e.re, e.im, e.modulus) {
            (Some(re), Some(im), Some(m)) => {
                eprintln!("  {re:+.6} {im:+.6}i  |.| = {m:.6}  {:?}", e.class)
            }
            _ => eprintln!("  infinite  {:?}", e.class),
        }
    }
}

// --- solve ---

fn cmd_solve(args: SolveArgs) -> Result<i32, Failure> {
    let model = build_model(&args.model)?;
    ensure_out(&args.out)?;
    let opts = SelectOptions::default();
    let model_name = args.model.model.clone();

    let (solution, message, exit, extra, diagnostics) = match args.selector {
        SelectorKind::Bk => match select_bk(&model, &opts)? {
            Selection::Determinate {
                solution,
                diagnostics,
            } => (
                Some(solution),
                "Unique stable solution",
                EXIT_OK,
                json!({}),
                diagnostics,
            ),
            Selection::Indeterminate {
                degree,
                diagnostics,
                ..
            } => (
                None,
                "Indeterminacy",
                EXIT_INDETERMINATE,
                json!({ "degree": degree }),
                diagnostics,
            ),
            Selection::NoStable { diagnostics } => (
                None,
                "No stable solution",
                EXIT_NO_STABLE,
                json!({}),
                diagnostics,
            ),
        },
        SelectorKind::Mv => match select_mv(&model, &opts)? {
            MvSelection::Selected {
                solution,
                mv_resolved_degree,
                diagnostics,
            } => {
                let loadings = if mv_resolved_degree > 0 {
                    "zeroed"
                } else {
                    "not-applicable"
                };
                (
                    Some(solution),
                    if mv_resolved_degree > 0 {
                        "Indeterminacy resolved by the minimal-variance rule"
                    } else {
                        "Unique stable solution"
                    },
                    EXIT_OK,
                    json!({
                        "mv_resolved_degree": mv_resolved_degree,
                        "sunspot_loadings": loadings,
                    }),
                    diagnostics,
                )
            }
            MvSelection::NoStable { diagnostics } => (
                None,
                "No stable solution",
                EXIT_NO_STABLE,
                json!({}),
                diagnostics,
            ),
        },
        SelectorKind::Fa => {
            let roles = FiscalRoles {
                inflation: "pi".to_string(),
                output: "y".to_string(),
                rate: None,
            };
            let fp = FiscalParams {
                gamma_s: args.gamma_s,
            };
            let FaSelection { selection, .. } = select_fa(&model, &roles, &fp, &opts)?;
            match selection {
                Selection::Determinate {
                    solution,
                    diagnostics,
                } => (
                    Some(solution),
                    "Unique stable solution",
                    EXIT_OK,
                    json!({ "gamma_s": args.gamma_s }),
                    diagnostics,
                ),
                Selection::Indeterminate {
                    degree,
                    diagnostics,
                    ..
                } => (
                    None,
                    "Indeterminacy",
                    EXIT_INDETERMINATE,
                    json!({ "degree": degree, "gamma_s": args.gamma_s }),
                    diagnostics,
                ),
                Selection::NoStable { diagnostics } => (
                    None,
                    "No stable solution",
                    EXIT_NO_STABLE,
                    json!({ "gamma_s": args.gamma_s }),
                    diagnostics,
                ),
            }
        }
    };

    write_diagnostics(&args.out.join("diagnostics.json"), &diagnostics)?;
    if args.verbose {
        print_eigentable(&diagnostics);
    }

    if let Some(sol) = &solution {
        let mut value = solution_json(sol, args.selector, &model_name, message, extra);
        if let Some(obj) = value.as_object_mut() {
            obj.insert("seed".to_string(), json!(args.seed));
            obj.insert("horizon".to_string(), json!(args.horizon));
        }
        write_json(&args.out.join("solution.json"), &value)?;
        write_irfs(sol, args.horizon, &args.out, args.verbose)?;
    }

    println!("{message}");
    Ok(exit)
}

// --- map ---

fn parse_grid(grid: &str) -> Result<(f64, f64, f64, f64), Failure> {
    let bad = || Failure::usage(format!("grid must be `pi_min:pi_max,y_min:y_max`, got `{grid}`"));
    let (pi_part, y_part) = grid.split_once(',').ok_or_else(bad)?;
    let parse_range = |s: &str| -> Result<(f64, f64), Failure> {
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(bad());
        }
        Ok((lo, hi))
    };
    let (pi_lo, pi_hi) = parse_range(pi_part)?;
    let (y_lo, y_hi) = parse_range(y_part)?;
    Ok((pi_lo, pi_hi, y_lo, y_hi))
}

fn grid_values(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 * step).collect()
}

/// CSV mirroring the classification map, with cells the minimal-variance
/// rule resolves relabelled `mv-selected`.
fn write_mv_map<W: std::io::Write>(table: &MapTable, w: W) -> Result<(), Failure> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["phi_pi", "phi_y", "classification", "n_stable", "degree_m"])
        .map_err(|e| Failure::error(e.to_string()))?;
    for cell in &table.cells {
        let class = match cell.classification {
            CellClass::Determinate => "determinate",
            CellClass::Indeterminate => "mv-selected",
            CellClass::NoStable => "no-stable",
            CellClass::UnitRoot => "unit-root",
            CellClass::Failed => "error",
        };
        let n_stable = cell.n_stable.map(|v| v.to_string()).unwrap_or_default();
        out.write_record([
            format_float(cell.phi_pi),
            format_float(cell.phi_y),
            class.to_string(),
            n_stable,
            cell.degree_m.to_string(),
        ])
        .map_err(|e| Failure::error(e.to_string()))?;
    }
    out.flush().map_err(|e| Failure::error(e.to_string()))?;
    Ok(())
}

fn cmd_map(args: MapArgs) -> Result<i32, Failure> {
    if args.model.model != "nk" {
        return Err(Failure::usage(
            "the map command scans the builtin `nk` policy coefficients",
        ));
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(Failure::usage(format!(
            "step must be positive, got {}",
            args.step
        )));
    }
    let (pi_lo, pi_hi, y_lo, y_hi) = parse_grid(&args.grid)?;
    ensure_out(&args.out)?;

    let base = nk_params(&args.model);
    let pis = grid_values(pi_lo, pi_hi, args.step);
    let ys = grid_values(y_lo, y_hi, args.step);
    let table = dsge_select::determinacy_map(&base, &pis, &ys, &SelectOptions::default());

    let bk_path = args.out.join("map_bk.csv");
    table.write_csv(File::create(&bk_path)?)?;
    let mv_path = args.out.join("map_mv.csv");
    write_mv_map(&table, File::create(&mv_path)?)?;

    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for cell in &table.cells {
        *counts.entry(cell.classification.as_str()).or_insert(0) += 1;
    }
    if args.verbose {
        eprintln!("wrote {} and {}", bk_path.display(), mv_path.display());
    }
    let summary = counts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    println!(
        "map: {} x {} cells ({summary})",
        pis.len(),
        ys.len()
    );
    Ok(EXIT_OK)
}

// --- occbin-zlb ---

/// Reorder a model-ordered deviations path into the reporting layout
/// `(y, pi, R, rn)`.
fn zlb_path_table(names: &[String], data: &DMatrix<f64>) -> Result<PathTable, Failure> {
    let order = ["y", "pi", "R", "rn"];
    let mut cols = Vec::with_capacity(order.len());
    for want in order {
        let idx = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| Failure::error(format!("variable `{want}` missing from the model")))?;
        cols.push(idx);
    }
    let out = DMatrix::from_fn(data.nrows(), cols.len(), |i, j| data[(i, cols[j])]);
    Ok(PathTable {
        names: order.iter().map(|s| s.to_string()).collect(),
        t0: 0,
        data: out,
    })
}

fn cmd_occbin_zlb(args: OccbinArgs) -> Result<i32, Failure> {
    if args.model.model != "nk" {
        return Err(Failure::usage(
            "the lower-bound experiment uses the builtin `nk` model",
        ));
    }
    if args.horizon == 0 {
        return Err(Failure::usage("horizon must be positive"));
    }
    ensure_out(&args.out)?;
    let params = nk_params(&args.model);
    let rs = zlb_regime_pair(&params)?;
    // The natural-rate shock is applied with the sign that pushes the rate
    // toward the bound; the applied value is recorded below.
    let applied = -args.shock.abs();
    let n_k = rs.reference.n_shocks();
    let mut shocks = DMatrix::<f64>::zeros(args.horizon, n_k);
    shocks[(0, 0)] = applied;

    if args.no_constraint {
        let sol = match select_bk(&rs.reference, &SelectOptions::default())? {
            Selection::Determinate { solution, .. } => solution,
            _ => return Err(Failure::error("reference regime is not determinate")),
        };
        let irf = impulse_response(&sol, 0, applied, args.horizon - 1)?;
        let table = zlb_path_table(&irf.names, &irf.data)?;
        let path_file = args.out.join("path.csv");
        table.write_csv(File::create(&path_file)?)?;
        let meta = json!({
            "constraint": "disabled",
            "applied_shock": applied,
            "horizon": args.horizon,
            "seed": args.seed,
            "dynare_compat": args.dynare_compat,
        });
        write_json(&args.out.join("occbin_meta.json"), &meta)?;
        println!("unconstrained reference path over {} periods", args.horizon);
        return Ok(EXIT_OK);
    }

    let path = match solve_occbin(&rs, &shocks, args.horizon, &OccbinOptions::default()) {
        Ok(p) => p,
        Err(e @ dsge_select::Error::CycleDetected { .. }) => {
            return Err(Failure::error(format!(
                "regime iteration is cycling among candidate equilibria: {e}"
            )))
        }
        Err(e @ dsge_select::Error::MaxIterations { .. }) => {
            return Err(Failure::error(format!(
                "regime iteration exhausted its budget without a fixed point: {e}"
            )))
        }
        Err(e) => return Err(e.into()),
    };

    let table = zlb_path_table(rs.reference.names(), &path.z_path)?;
    let path_file = args.out.join("path.csv");
    table.write_csv(File::create(&path_file)?)?;

    let spell = path
        .regimes
        .iter()
        .take_while(|r| **r == Regime::Alternative)
        .count();
    let binding_total = path
        .regimes
        .iter()
        .filter(|r| **r == Regime::Alternative)
        .count();
    let report = check_complementarity(&path, &rs);
    let residual = piecewise_residuals(&path.regimes, &rs, &shocks, &path.z_path)?;
    let fixed_point = regime_update(&path.z_path, &rs) == path.regimes;

    let meta = json!({
        "constraint": "enabled",
        "converged": path.converged,
        "iterations": path.iterations,
        "binding_spell": { "start": 0, "length": spell },
        "binding_periods_total": binding_total,
        "regime_switches": report.switches,
        "max_complementarity_violation": report.max_violation,
        "max_structural_residual": residual,
        "regime_fixed_point": fixed_point,
        "applied_shock": applied,
        "horizon": args.horizon,
        "seed": args.seed,
        "dynare_compat": args.dynare_compat,
        "sequence_hashes": path.history.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    });
    write_json(&args.out.join("occbin_meta.json"), &meta)?;

    if args.verbose {
        eprintln!(
            "converged in {} iterations; binding spell {} periods; residual {residual:.3e}",
            path.iterations, spell
        );
    }
    println!(
        "converged in {} iterations; bound binds for {} initial periods",
        path.iterations, spell
    );
    Ok(EXIT_OK)
}

// --- compare ---

fn cmd_compare(args: CompareArgs) -> Result<i32, Failure> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(Failure::usage(format!(
            "tolerance must be nonnegative, got {}",
            args.tol
        )));
    }
    let read = |p: &Path| -> Result<PathTable, Failure> {
        let f = File::open(p).map_err(|e| Failure::error(format!("cannot open {p:?}: {e}")))?;
        Ok(PathTable::read_csv(f)?)
    };
    let a = read(&args.path_a)?;
    let b = read(&args.path_b)?;
    let report = compare_paths(&a, &b)?;

    ensure_out(&args.out)?;
    let value = serde_json::to_value(&report)
        .map_err(|e| Failure::error(format!("cannot serialize report: {e}")))?;
    write_json(&args.out.join("compare.json"), &value)?;

    println!("variable,max_abs_diff,rmse");
    for v in &report.variables {
        println!(
            "{},{},{}",
            v.name,
            format_float(v.max_abs_diff),
            format_float(v.rmse)
        );
    }
    println!(
        "overall max {} over {} shared periods",
        format_float(report.max_abs_diff),
        report.overlap_len
    );
    if report.max_abs_diff <= args.tol {
        Ok(EXIT_OK)
    } else {
        println!("differences exceed tolerance {}", format_float(args.tol));
        Ok(EXIT_DIFF_OVER_TOL)
    }
}

// --- diagnose ---

fn cmd_diagnose(args: DiagnoseArgs) -> Result<i32, Failure> {
    let model = build_model(&args.model)?;
    ensure_out(&args.out)?;
    let diag = diagnose(&model, &SelectOptions::default())?;
    write_diagnostics(&args.out.join("diagnostics.json"), &diag)?;
    if args.verbose {
        print_eigentable(&diag);
    }
    println!("{}", diag.message);
    Ok(EXIT_OK)
}
