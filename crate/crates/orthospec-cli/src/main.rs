mod expr;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use orthospec::contfrac::{gauss_measure, DiscreteMeasure};
use orthospec::det_markov::{dn_spectral_measure, markov_limit};
use orthospec::elliptic::{dn_taylor_moments, make_context};
use orthospec::error::Error as LibError;
use orthospec::indet::{
    classify, markov_like_limit, nevanlinna_eval, nextremal_measure, nextremal_transform, suggested_grid, BorderMode,
    Convention, Param,
};
use orthospec::numerics::{ConvergedLimit, Tolerance};
use orthospec::quartic::{border_measure, quartic_rates, QuarticSpec};
use orthospec::recurrence::{BirthDeathRates, FamilyTag};

/// Rates are probed for positivity up to this index before any computation.
const PROBE_BOUND: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "orthospec", version, about = "Spectral measures of birth-death orthogonal polynomials")]
struct Cli {
    /// Relative tolerance for limits and quadratures.
    #[arg(long, global = true, env = "ORTHOSPEC_TOL", default_value_t = 1e-10)]
    tol: f64,

    /// Iteration budget for limits and root refinement.
    #[arg(long, global = true, default_value_t = 5000)]
    max_iter: usize,

    /// Request extended precision (reported; computations use extended exponent range).
    #[arg(long, global = true, env = "ORTHOSPEC_EXTENDED", value_parser = clap::builder::FalseyValueParser::new())]
    extended: bool,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Determinacy classification from the growth of the rates.
    Classify {
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, default_value_t = 2000)]
        nmax: usize,
    },
    /// Stieltjes transform by a limit theorem or an N-extremal parameter.
    Transform {
        #[command(flatten)]
        rates: RateArgs,
        /// Complex point as "re,im".
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// markov | friedrichs | krein | nevanlinna:<param> (param: number, inf or alpha)
        #[arg(long)]
        mode: String,
        #[arg(long, value_enum, default_value_t = ConventionArg::Lambda)]
        convention: ConventionArg,
    },
    /// Discrete measures: Gauss, dn Fourier, border, N-extremal.
    Spectrum {
        #[command(flatten)]
        rates: RateArgs,
        /// gauss:<n> | dn-measure | border:friedrichs | border:krein | nextremal:<param>
        #[arg(long)]
        mode: String,
        #[arg(long, value_enum, default_value_t = ConventionArg::Lambda)]
        convention: ConventionArg,
        /// Real window "lo,hi" for nextremal roots.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        /// Scan steps over the window (default: five per expected spacing).
        #[arg(long)]
        grid: Option<usize>,
        /// Atom count for dn-measure and border modes.
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Moments s_0..s_n of the dn measure from the Taylor series of dn.
    Moments {
        #[arg(long, default_value_t = 0.5)]
        k2: f64,
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct RateArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long, default_value_t = 0.5)]
    k2: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Quartic mu_0 parameter, or the mu_n expression for custom rates.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// lambda_n expression in n; selects custom rates.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Family {
    StieltjesDn,
    StieltjesCn,
    Generalized,
    Quartic,
    Custom,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum ConventionArg {
    Lambda,
    Mu,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Lambda => Convention::Lambda,
            ConventionArg::Mu => Convention::Mu,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Conflict(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Input(_) => 2,
            CliError::Conflict(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Conflict(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        let msg = e.to_string();
        match e {
            LibError::InvalidInput(_) => CliError::Input(msg),
            LibError::Classification(_) => CliError::Conflict(msg),
            LibError::Pole { .. } | LibError::NoConvergence { .. } => CliError::Numeric(msg),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

fn parse_expr(label: &str, src: &str) -> CliResult<expr::Expr> {
    expr::parse(src).map_err(|e| CliError::Input(format!("--{label} \"{src}\": {e}")))
}

fn constant(label: &str, src: &str) -> CliResult<f64> {
    let e = parse_expr(label, src)?;
    if e.uses_n() {
        return input(format!("--{label} must be a constant for this family"));
    }
    Ok(e.eval(0.0))
}

struct Resolved {
    rates: BirthDeathRates,
    echo: Value,
}

fn resolve_rates(args: &RateArgs) -> CliResult<Resolved> {
    let family = match (args.family, &args.lambda) {
        (None, Some(_)) | (Some(Family::Custom), _) => Family::Custom,
        (Some(f), None) => f,
        (Some(_), Some(_)) => return input("--lambda is only valid with custom rates"),
        (None, None) => Family::StieltjesDn,
    };
    let (rates, echo) = match family {
        Family::StieltjesDn => (BirthDeathRates::stieltjes_dn(args.k2)?, json!({"family": "stieltjes-dn", "k2": args.k2})),
        Family::StieltjesCn => (BirthDeathRates::stieltjes_cn(args.k2)?, json!({"family": "stieltjes-cn", "k2": args.k2})),
        Family::Generalized => (
            BirthDeathRates::generalized_c(args.k2, args.c)?,
            json!({"family": "generalized", "k2": args.k2, "c": args.c}),
        ),
        Family::Quartic => {
            let mu = match &args.mu {
                Some(s) => constant("mu", s)?,
                None => 0.0,
            };
            (quartic_rates(args.c, mu)?, json!({"family": "quartic", "c": args.c, "mu": mu}))
        }
        Family::Custom => {
            let (Some(l), Some(m)) = (&args.lambda, &args.mu) else {
                return input("custom rates need both --lambda and --mu expressions");
            };
            let le = Arc::new(parse_expr("lambda", l)?);
            let me = Arc::new(parse_expr("mu", m)?);
            let label = format!("lambda={l}; mu={m}");
            let rates = BirthDeathRates::custom(label, move |n| le.eval(n as f64), move |n| me.eval(n as f64));
            (rates, json!({"family": "custom", "lambda": l, "mu": m}))
        }
    };
    rates.validate(PROBE_BOUND)?;
    Ok(Resolved { rates, echo })
}

fn parse_complex(s: &str) -> CliResult<Complex64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| CliError::Input(format!("bad number '{t}' in \"{s}\"")));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => input(format!("expected \"re,im\", got \"{s}\"")),
    }
}

fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    let z = parse_complex(s)?;
    if !(z.re < z.im) {
        return input(format!("window \"{s}\" must satisfy lo < hi"));
    }
    Ok((z.re, z.im))
}

enum ParamSpec {
    Value(Param),
    Alpha,
}

fn parse_param(s: &str) -> CliResult<ParamSpec> {
    match s {
        "inf" | "infinity" => Ok(ParamSpec::Value(Param::Infinity)),
        "alpha" => Ok(ParamSpec::Alpha),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| ParamSpec::Value(Param::Finite(v)))
            .ok_or_else(|| CliError::Input(format!("bad parameter '{s}' (number, inf or alpha)"))),
    }
}

fn resolve_param(spec: ParamSpec, convention: Convention, alpha_inv: impl FnOnce() -> CliResult<f64>) -> CliResult<Param> {
    match (spec, convention) {
        (ParamSpec::Value(p), _) => Ok(p),
        (ParamSpec::Alpha, Convention::Lambda) => Ok(Param::Finite(1.0 / alpha_inv()?)),
        (ParamSpec::Alpha, Convention::Mu) => input("parameter 'alpha' belongs to the lambda convention; use inf with --convention mu"),
    }
}

fn cplx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn limit_json(l: &ConvergedLimit) -> Value {
    json!({
        "value": cplx(l.value),
        "terms_used": l.terms_used,
        "last_increment": l.last_increment,
        "converged": l.converged,
    })
}

fn cmd_classify(rates: &RateArgs, nmax: usize) -> CliResult<(Value, Value)> {
    let r = resolve_rates(rates)?;
    let d = classify(&r.rates, nmax)?;
    let outputs = json!({"verdict": d.verdict, "confident": d.confident, "series": d.series_values});
    Ok((json!({"rates": r.echo, "nmax": nmax}), outputs))
}

fn cmd_transform(rates: &RateArgs, x: &str, mode: &str, convention: ConventionArg, tol: &Tolerance) -> CliResult<(Value, Value)> {
    let r = resolve_rates(rates)?;
    let x = parse_complex(x)?;
    let inputs = json!({"rates": r.echo, "x": cplx(x), "mode": mode});
    let outputs = match mode {
        "markov" => limit_json(&markov_limit(&r.rates, x, tol)?),
        "friedrichs" => limit_json(&markov_like_limit(&r.rates, x, BorderMode::Friedrichs, tol)?),
        "krein" => limit_json(&markov_like_limit(&r.rates, x, BorderMode::Krein, tol)?),
        _ => {
            let Some(p) = mode.strip_prefix("nevanlinna:") else {
                return input(format!("unknown transform mode '{mode}'"));
            };
            let conv = Convention::from(convention);
            let spec = parse_param(p)?;
            let nv = nevanlinna_eval(&r.rates, x, tol)?;
            let param = resolve_param(spec, conv, || Ok(nv.alpha_inv))?;
            let value = nextremal_transform(&nv, param, conv)?;
            json!({
                "value": cplx(value),
                "param": param.to_string(),
                "convention": conv,
                "nevanlinna": nv,
            })
        }
    };
    Ok((inputs, outputs))
}

fn conflict<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Conflict(msg.into()))
}

struct SpectrumOpts<'a> {
    mode: &'a str,
    convention: ConventionArg,
    window: Option<&'a str>,
    grid: Option<usize>,
    nmax: Option<usize>,
    out: Option<&'a PathBuf>,
    format: Option<Format>,
}

fn quartic_spec_of(rates: &BirthDeathRates) -> Option<QuarticSpec> {
    match rates.family() {
        FamilyTag::Quartic { c, mu } => QuarticSpec::new(*c, *mu).ok(),
        _ => None,
    }
}

fn cmd_spectrum(rates: &RateArgs, o: &SpectrumOpts<'_>, tol: &Tolerance) -> CliResult<(Value, Value)> {
    let r = resolve_rates(rates)?;
    let mut inputs = json!({"rates": r.echo, "mode": o.mode});
    let measure: DiscreteMeasure = if let Some(n) = o.mode.strip_prefix("gauss:") {
        let n: usize = n.parse().map_err(|_| CliError::Input(format!("bad Gauss order '{n}'")))?;
        if n == 0 {
            return input("Gauss order must be at least 1");
        }
        gauss_measure(&r.rates, n)?
    } else if o.mode == "dn-measure" {
        let FamilyTag::StieltjesDn { k2 } = *r.rates.family() else {
            return conflict("dn-measure needs --family stieltjes-dn");
        };
        dn_spectral_measure(&make_context(k2)?, o.nmax.unwrap_or(200))?
    } else if let Some(which) = o.mode.strip_prefix("border:") {
        let mode = match which {
            "friedrichs" => BorderMode::Friedrichs,
            "krein" => BorderMode::Krein,
            _ => return input(format!("unknown border mode '{which}'")),
        };
        let Some(spec) = quartic_spec_of(&r.rates).filter(|s| s.c == 0.0 && s.mu == 0.0) else {
            return conflict("border measures are known in closed form only for --family quartic --c 0 --mu 0");
        };
        border_measure(&spec, mode, o.nmax.unwrap_or(20))?
    } else if let Some(p) = o.mode.strip_prefix("nextremal:") {
        let conv = Convention::from(o.convention);
        let spec = parse_param(p)?;
        let param = resolve_param(spec, conv, || {
            let a = orthospec::indet::alpha_limit(&r.rates, tol)?;
            Ok(1.0 / a)
        })?;
        let window = match o.window {
            Some(w) => parse_window(w)?,
            None => (-1.0, 1.0e4),
        };
        let grid = o.grid.unwrap_or_else(|| match quartic_spec_of(&r.rates) {
            Some(s) => suggested_grid(window, std::f64::consts::PI / s.period),
            None => 400,
        });
        inputs["window"] = json!([window.0, window.1]);
        inputs["grid"] = json!(grid);
        nextremal_measure(&r.rates, param, conv, window, grid, tol)?
    } else {
        return input(format!("unknown spectrum mode '{}'", o.mode));
    };
    let head: Vec<Value> = measure.support.iter().zip(&measure.mass).take(5).map(|(s, m)| json!([s, m])).collect();
    let mut outputs = json!({
        "atoms": measure.len(),
        "total_mass": measure.total_mass(),
        "normalized": measure.normalized,
        "first_atoms": head,
    });
    match o.out {
        Some(path) => {
            let format = o.format.unwrap_or_else(|| {
                if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    Format::Csv
                } else {
                    Format::Json
                }
            });
            let text = match format {
                Format::Json => measure.to_json(),
                Format::Csv => measure.to_csv(),
            };
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            outputs["written"] = json!(path.display().to_string());
        }
        None => {
            outputs["measure"] = serde_json::from_str(&measure.to_json()).map_err(|e| CliError::Numeric(e.to_string()))?;
        }
    }
    Ok((inputs, outputs))
}

fn cmd_moments(k2: f64, count: usize) -> CliResult<(Value, Value)> {
    let m = dn_taylor_moments(k2, count)?;
    Ok((json!({"k2": k2, "count": count}), json!({"moments": m})))
}

fn run(cli: &Cli) -> CliResult<Value> {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return input(format!("--tol must lie in (0, 1), got {}", cli.tol));
    }
    let tol = Tolerance::new(cli.tol * 1e-3, cli.tol, cli.max_iter)?;
    let (name, (inputs, outputs)) = match &cli.cmd {
        Command::Classify { rates, nmax } => ("classify", cmd_classify(rates, *nmax)?),
        Command::Transform { rates, x, mode, convention } => ("transform", cmd_transform(rates, x, mode, *convention, &tol)?),
        Command::Spectrum { rates, mode, convention, window, grid, nmax, out, format } => {
            let o = SpectrumOpts {
                mode,
                convention: *convention,
                window: window.as_deref(),
                grid: *grid,
                nmax: *nmax,
                out: out.as_ref(),
                format: *format,
            };
            ("spectrum", cmd_spectrum(rates, &o, &tol)?)
        }
        Command::Moments { k2, count } => ("moments", cmd_moments(*k2, *count)?),
    };
    let mut diagnostics = json!({"tol": cli.tol, "max_iter": cli.max_iter, "extended": cli.extended});
    if cli.extended {
        diagnostics["note"] =
            json!("extended precision requested: values are double precision; recurrences use extended exponent range");
    }
    Ok(json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": inputs,
        "outputs": outputs,
        "diagnostics": diagnostics,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            // A closed pipe on stdout is not worth a panic.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
