//! `parisian`: tables of scale functions, Parisian kernels and draw-down Parisian quantities,
//! Monte Carlo estimates, and formula-versus-simulation verification reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parisian_core::dividends::{u_k_classical, v_k_barrier, v_k_general};
use parisian_core::drawdown::{dd_exit_classical, dd_parisian_exit_two_barriers_with};
use parisian_core::montecarlo::{
    estimate_dividends, estimate_exit, estimate_potential, estimate_ruin_probability, refine,
    SimConfig, SimEstimate,
};
use parisian_core::numerics::quadrature::QuadratureConfig;
use parisian_core::numerics::InversionConfig;
use parisian_core::parisian_kernel::{default_inversion, n_alpha};
use parisian_core::{
    DividendQuery, DrawdownParisian, DrawdownSpec, Error, LevyModel, ModelConfig, ParisianKernel,
    ScaleFunctionSet,
};

#[derive(Parser)]
#[command(
    name = "parisian",
    version,
    about = "Draw-down Parisian ruin quantities for spectrally negative Levy models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Laplace exponent psi(theta) on the --x grid (read as theta values)
    Psi,
    /// W, W' and Z at rate --q
    Scale,
    /// Parisian kernel ell and its derivative
    Ell,
    /// Excursion-measure exit ratio ell'/ell
    Excursion,
    /// Two-sided exit before draw-down Parisian ruin (or classical draw-down with --classical)
    Exit,
    /// Draw-down Parisian ruin probability
    RuinProb,
    /// Joint Laplace transform of the ruin time and position (varphi = 1)
    JointLaplace,
    /// Discounted occupation time before ruin or up-crossing of --a (f = 1)
    Potential,
    /// Moments V_1..V_k of discounted barrier dividends
    Dividends,
    /// Monte Carlo estimates on the --x grid
    Simulate {
        #[arg(long, value_enum, default_value_t = Target::Exit)]
        target: Target,
    },
    /// Formula and Monte Carlo side by side; writes a JSON report
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::Standard)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Exit,
    RuinProb,
    Dividends,
    Potential,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Standard,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inversion {
    Talbot,
    Gs,
    Euler,
}

#[derive(Args)]
struct Opts {
    /// Model file (JSON or TOML)
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0.0)]
    q: f64,
    /// Parisian delay
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Evaluation points: a value, a comma list, or start:stop:step
    #[arg(long, global = true)]
    x: Option<String>,
    /// Upper exit level
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Dividend barrier
    #[arg(long, global = true)]
    b: Option<f64>,
    /// Highest dividend moment
    #[arg(long, global = true, default_value_t = 1)]
    k: usize,
    #[arg(long, global = true, default_value_t = 0.0)]
    lambda: f64,
    /// Draw-down function: const:c | linear:k,d (k z - d) | barrier:b ((z - b) v 0) | table:FILE
    #[arg(long, global = true)]
    xi: Option<String>,
    /// Second (lower) draw-down function, same syntax as --xi
    #[arg(long, global = true)]
    eta: Option<String>,
    #[arg(long, global = true, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, global = true, default_value_t = 20_240_601)]
    seed: u64,
    #[arg(long = "grid-dt", global = true, default_value_t = 1e-3)]
    grid_dt: f64,
    #[arg(long, global = true, default_value_t = false)]
    antithetic: bool,
    /// Relative tolerance of the kernel quadratures
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    inversion: Option<Inversion>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Classical (non-Parisian) version of exit and dividends
    #[arg(long, global = true, default_value_t = false)]
    classical: bool,
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

#[derive(Serialize)]
struct Table {
    quantity: String,
    note: String,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    flags: Vec<String>,
}

#[derive(Serialize)]
struct VerifyReport {
    quantity: String,
    formula_value: f64,
    mc_estimate: f64,
    std_error: f64,
    z_score: f64,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(flags) if flags.is_empty() => ExitCode::SUCCESS,
        Ok(flags) => {
            for f in flags {
                eprintln!("warning: {f}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    let o = &cli.opts;
    if let Command::Verify {
        suite: Suite::Standard,
    } = cli.command
    {
        let model = match &o.model {
            Some(p) => load_model(p)?,
            None => LevyModel::brownian(1.0, 1.0)?,
        };
        let reports = verify_standard(&model, o)?;
        let failed: Vec<String> = reports
            .iter()
            .filter(|r| !r.pass)
            .map(|r| {
                format!(
                    "{} disagrees with simulation (z = {:.2})",
                    r.quantity, r.z_score
                )
            })
            .collect();
        let text = serde_json::to_string_pretty(&reports)
            .map_err(|e| Failure::Numerical(e.to_string()))?
            + "\n";
        emit(o.out.as_deref(), &text)?;
        return Ok(failed);
    }

    let model = load_model(
        o.model
            .as_deref()
            .ok_or_else(|| invalid("--model is required"))?,
    )?;
    let xs = parse_grid(o.x.as_deref().ok_or_else(|| invalid("--x is required"))?)?;
    let table = match cli.command {
        Command::Psi => table(
            "psi",
            format!("Laplace exponent of {}", describe(&model)),
            &["theta", "psi"],
            &xs,
            |t| Ok(vec![model.psi(t)]),
        )?,
        Command::Scale => {
            let s = ScaleFunctionSet::new(&model, o.q)?;
            let note = format!(
                "q-scale functions W, W' and Z at q={} for {}",
                o.q,
                describe(&model)
            );
            table("scale", note, &["x", "W", "Wp", "Z"], &xs, |x| {
                Ok(vec![s.w(x)?, s.w_prime(x)?, s.z(x)?])
            })?
        }
        Command::Ell => {
            let k = kernel(&model, o.q, need(o.r, "--r")?, o.tol)?;
            let note = format!(
                "Parisian kernel ell and ell' at q={}, r={} for {}",
                o.q,
                k.r(),
                describe(&model)
            );
            table("ell", note, &["x", "ell", "ellp"], &xs, |x| {
                Ok(vec![k.ell(x)?, k.ell_prime(x)?])
            })?
        }
        Command::Excursion => {
            let k = kernel(&model, o.q, need(o.r, "--r")?, o.tol)?;
            let note = format!(
                "excursion measure of leaving (0, x) upward before the delay, ell'/ell, q={}, r={}",
                o.q,
                k.r()
            );
            table("excursion", note, &["x", "n_exit"], &xs, |x| {
                Ok(vec![n_alpha(&k, x)?])
            })?
        }
        Command::Exit => {
            let a = need(o.a, "--a")?;
            let xi = parse_drawdown(o.xi.as_deref().unwrap_or("const:0"))?;
            if o.classical {
                let note = format!("classical draw-down exit below a={a}, q={}", o.q);
                table("exit", note, &["x", "exit"], &xs, |x| {
                    Ok(vec![dd_exit_classical(&model, o.q, &xi, x, a)?])
                })?
            } else if let Some(eta) = o.eta.as_deref() {
                let eta = parse_drawdown(eta)?;
                let r = need(o.r, "--r")?;
                let inv = inversion(&model, o.inversion);
                let note = format!(
                    "draw-down Parisian exit below a={a} before the second barrier, q={}, r={r}",
                    o.q
                );
                table("exit", note, &["x", "exit"], &xs, |x| {
                    Ok(vec![dd_parisian_exit_two_barriers_with(
                        &model, o.q, r, &xi, &eta, x, a, &inv,
                    )?])
                })?
            } else {
                let d = parisian(&model, o.q, o.r, o.tol, xi)?;
                let note = format!(
                    "draw-down Parisian exit below a={a}, q={}, r={}",
                    o.q,
                    d.kernel().r()
                );
                table("exit", note, &["x", "exit"], &xs, |x| {
                    Ok(vec![d.exit(x, a)?])
                })?
            }
        }
        Command::RuinProb => {
            let xi = parse_drawdown(o.xi.as_deref().unwrap_or("const:0"))?;
            let d = parisian(&model, 0.0, o.r, o.tol, xi)?;
            let note = format!("draw-down Parisian ruin probability, r={}", d.kernel().r());
            table("ruin-prob", note, &["x", "ruin"], &xs, |x| {
                Ok(vec![d.ruin_probability(x)?])
            })?
        }
        Command::JointLaplace => {
            let a = need(o.a, "--a")?;
            let xi = parse_drawdown(o.xi.as_deref().unwrap_or("const:0"))?;
            let d = parisian(&model, o.q, o.r, o.tol, xi)?;
            let lambda = o.lambda;
            let note = format!(
                "E_x[exp(-q kappa + lambda X(kappa)); kappa < tau_a] with varphi = 1, q={}, r={}, lambda={lambda}",
                o.q,
                d.kernel().r()
            );
            table("joint-laplace", note, &["x", "joint"], &xs, |x| {
                Ok(vec![d.joint_laplace(x, a, lambda, |_| 1.0)?])
            })?
        }
        Command::Potential => {
            let a = need(o.a, "--a")?;
            let xi = parse_drawdown(o.xi.as_deref().unwrap_or("const:0"))?;
            let d = parisian(&model, o.q, o.r, o.tol, xi)?;
            let note = format!(
                "discounted occupation time (f = 1) before kappa and tau_a, a={a}, q={}, r={}",
                o.q,
                d.kernel().r()
            );
            table("potential", note, &["x", "potential"], &xs, |x| {
                Ok(vec![d.potential(x, a, |_, _| 1.0, |_, _| 0.0)?])
            })?
        }
        Command::Dividends => dividends_table(&model, o, &xs)?,
        Command::Simulate { target } => simulate_table(&model, o, &xs, target)?,
        Command::Verify { .. } => unreachable!(),
    };
    let text = match o.format {
        Format::Csv => csv(&table),
        Format::Json => {
            serde_json::to_string_pretty(&table).map_err(|e| Failure::Numerical(e.to_string()))?
                + "\n"
        }
    };
    emit(o.out.as_deref(), &text)?;
    Ok(table.flags)
}

fn load_model(path: &Path) -> Result<LevyModel, Failure> {
    Ok(ModelConfig::load(path)?.build()?)
}

fn describe(m: &LevyModel) -> String {
    format!(
        "{:?}(gamma={}, sigma={}, jump_rate={})",
        m.kind, m.gamma, m.sigma, m.jump_rate
    )
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| invalid(format!("{flag} is required")))
}

fn kernel(model: &LevyModel, q: f64, r: f64, tol: Option<f64>) -> Result<ParisianKernel, Failure> {
    let mut k = ParisianKernel::new(model, q, r)?;
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(invalid("--tol must be positive"));
        }
        k.set_quadrature(QuadratureConfig::new(t, t));
    }
    Ok(k)
}

fn parisian(
    model: &LevyModel,
    q: f64,
    r: Option<f64>,
    tol: Option<f64>,
    xi: DrawdownSpec,
) -> Result<DrawdownParisian, Failure> {
    let k = kernel(model, q, need(r, "--r")?, tol)?;
    Ok(DrawdownParisian::with_kernel(Arc::new(k), xi)?)
}

fn inversion(model: &LevyModel, choice: Option<Inversion>) -> InversionConfig {
    match choice {
        None => default_inversion(model),
        Some(Inversion::Talbot) => InversionConfig::talbot(),
        Some(Inversion::Gs) => InversionConfig::gaver_stehfest(),
        Some(Inversion::Euler) => InversionConfig::euler(),
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad number '{t}' in --x")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || !(hi >= lo) {
                return Err(invalid(format!(
                    "grid '{s}' needs start <= stop and step > 0"
                )));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| lo + i as f64 * step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(invalid(format!("grid '{s}' is not start:stop:step"))),
    }
}

fn parse_drawdown(s: &str) -> Result<DrawdownSpec, Failure> {
    let (kind, arg) = s
        .split_once(':')
        .ok_or_else(|| invalid(format!("draw-down spec '{s}' has no ':'")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad number '{t}' in '{s}'")))
    };
    let spec = match kind {
        "const" => DrawdownSpec::constant(num(arg)?)?,
        "linear" => {
            let (k, d) = arg
                .split_once(',')
                .ok_or_else(|| invalid(format!("linear spec '{s}' needs k,d")))?;
            DrawdownSpec::linear(num(k)?, num(d)?)?
        }
        "barrier" => DrawdownSpec::barrier(num(arg)?)?,
        "table" => DrawdownSpec::load_table(Path::new(arg))?,
        _ => return Err(invalid(format!("unknown draw-down kind '{kind}'"))),
    };
    Ok(spec)
}

/// Evaluates `row` at every point. Validation errors abort; numerical ones are flagged and the
/// best available value (or NaN) is written.
fn table<F>(
    quantity: &str,
    note: String,
    columns: &[&str],
    xs: &[f64],
    row: F,
) -> Result<Table, Failure>
where
    F: Fn(f64) -> parisian_core::Result<Vec<f64>>,
{
    let width = columns.len() - 1;
    let mut rows = Vec::with_capacity(xs.len());
    let mut flags = Vec::new();
    for &x in xs {
        let values = match row(x) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                flags.push(format!("{} = {x}: {e}", columns[0]));
                vec![e.best_estimate().unwrap_or(f64::NAN); width]
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(std::iter::once(x).chain(values).collect());
    }
    Ok(Table {
        quantity: quantity.into(),
        note,
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
        flags,
    })
}

fn dividends_table(model: &LevyModel, o: &Opts, xs: &[f64]) -> Result<Table, Failure> {
    let b = need(o.b, "--b")?;
    if o.k == 0 {
        return Err(invalid("--k must be at least 1"));
    }
    let names: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=o.k).map(|j| format!("V{j}")))
        .collect();
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let k = o.k;
    if o.classical {
        let note = format!(
            "moments of discounted dividends, barrier b={b}, classical ruin, q={}",
            o.q
        );
        return table("dividends", note, &cols, xs, |x| {
            (1..=k)
                .map(|j| u_k_classical(model, o.q, b, j, x))
                .collect()
        });
    }
    let r = need(o.r, "--r")?;
    match o.xi.as_deref() {
        None => {
            let note = format!(
                "moments of discounted dividends, barrier b={b}, Parisian delay r={r}, q={}",
                o.q
            );
            table("dividends", note, &cols, xs, |x| {
                (1..=k)
                    .map(|j| v_k_barrier(model, o.q, r, b, j, x))
                    .collect()
            })
        }
        Some(spec) => {
            let xi = parse_drawdown(spec)?;
            let query = DividendQuery {
                model: model.clone(),
                q: o.q,
                r,
                b,
                k,
                xi,
            };
            let note = format!(
                "moments of discounted dividends, barrier b={b}, draw-down {spec}, r={r}, q={}",
                o.q
            );
            match v_k_general(&query) {
                Ok(m) => table("dividends", note, &cols, xs, |x| {
                    (1..=k).map(|j| m.moment(j, x)).collect()
                }),
                Err(e) if e.is_numerical() => {
                    let mut t = table("dividends", note, &cols, xs, |_| Err(e.clone()))?;
                    t.flags.truncate(1);
                    Ok(t)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn sim_config(o: &Opts) -> SimConfig {
    SimConfig {
        paths: o.paths,
        seed: o.seed,
        grid_dt: o.grid_dt,
        antithetic: o.antithetic,
        ..SimConfig::default()
    }
}

fn simulate_table(
    model: &LevyModel,
    o: &Opts,
    xs: &[f64],
    target: Target,
) -> Result<Table, Failure> {
    let cfg = sim_config(o);
    let r = need(o.r, "--r")?;
    let xi = parse_drawdown(o.xi.as_deref().unwrap_or("const:0"))?;
    let eta = o.eta.as_deref().map(parse_drawdown).transpose()?;
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for &x in xs {
        let est = match target {
            Target::Exit => {
                let a = need(o.a, "--a")?;
                refine(model, &cfg, |c| {
                    estimate_exit(model, c, o.q, r, &xi, eta.as_ref(), x, a)
                })?
            }
            Target::RuinProb => refine(model, &cfg, |c| {
                estimate_ruin_probability(model, c, r, &xi, x)
            })?,
            Target::Dividends => {
                let b = need(o.b, "--b")?;
                refine(model, &cfg, |c| {
                    estimate_dividends(model, c, o.q, r, b, o.k, x)
                })?
            }
            Target::Potential => {
                let a = need(o.a, "--a")?;
                refine(model, &cfg, |c| {
                    estimate_potential(model, c, o.q, r, &xi, x, a, &|_, _| 1.0)
                })?
            }
        };
        rows.push(vec![
            x,
            est.estimate,
            est.std_error,
            est.censored_fraction,
            est.paths_used as f64,
        ]);
        notes.push(est.bias_note);
    }
    notes.dedup();
    Ok(Table {
        quantity: "simulate".into(),
        note: format!("Monte Carlo, seed {}: {}", o.seed, notes.join(" | ")),
        columns: ["x", "estimate", "std_error", "censored_fraction", "paths"]
            .map(String::from)
            .to_vec(),
        rows,
        flags: Vec::new(),
    })
}

fn report(quantity: &str, formula: f64, est: &SimEstimate) -> VerifyReport {
    let z = est.z_score(formula);
    VerifyReport {
        quantity: quantity.into(),
        formula_value: formula,
        mc_estimate: est.estimate,
        std_error: est.std_error,
        z_score: z,
        pass: z.abs() < 3.0,
    }
}

/// Barrier-draw-down exit, ruin probability and first dividend moment at the reference points.
fn verify_standard(model: &LevyModel, o: &Opts) -> Result<Vec<VerifyReport>, Failure> {
    let cfg = sim_config(o);
    let barrier = DrawdownSpec::barrier(1.0)?;
    let zero = DrawdownSpec::constant(0.0)?;
    let mut out = Vec::new();

    let f = DrawdownParisian::new(model, 0.0, 0.5, barrier.clone())?.exit(0.5, 2.0)?;
    let e = refine(model, &cfg, |c| {
        estimate_exit(model, c, 0.0, 0.5, &barrier, None, 0.5, 2.0)
    })?;
    out.push(report("exit(q=0, r=0.5, xi=barrier:1, x=0.5, a=2)", f, &e));

    let f = DrawdownParisian::new(model, 0.0, 1.0, zero.clone())?.ruin_probability(1.0)?;
    let e = refine(model, &cfg, |c| {
        estimate_ruin_probability(model, c, 1.0, &zero, 1.0)
    })?;
    out.push(report("ruin-prob(r=1, xi=const:0, x=1)", f, &e));

    let f = v_k_barrier(model, 0.05, 0.5, 1.0, 1, 0.5)?;
    let e = refine(model, &cfg, |c| {
        estimate_dividends(model, c, 0.05, 0.5, 1.0, 1, 0.5)
    })?;
    out.push(report("V1(q=0.05, r=0.5, b=1, x=0.5)", f, &e));
    Ok(out)
}

fn csv(t: &Table) -> String {
    let mut s = format!("# {}: {}\n", t.quantity, t.note);
    s += &t.columns.join(",");
    s.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
