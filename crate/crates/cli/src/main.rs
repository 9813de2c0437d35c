use std::io::{self, Write};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use sheetdev_core::expansion::{build_mspec, h_tables_cached};
use sheetdev_core::mellin::{a_part, k_series, l_star};
use sheetdev_core::oracle::{default_counts, h_direct_all, mc_smallball, weight_box, McConfig};
use sheetdev_core::reversion::correction_sequence;
use sheetdev_core::smallball::{strong_estimate, sytaja_estimate, weak_estimate, Mode, SmallBallEstimate};
use sheetdev_core::spectrum::{kappa, DEFAULT_TOL};
use sheetdev_core::validate::{validate, Level};
use sheetdev_core::{laplace, Error};

const VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "sheetdev", version, about = "Small-deviation engine for integrated Brownian sheets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalues κ_n(m)
    Spectrum {
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Refine seeds by root finding
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// L_m(x) and its first two derivatives
    Laplace {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        x: f64,
        #[arg(long, value_enum, default_value_t = LaplaceMode::Exact)]
        mode: LaplaceMode,
    },
    /// Mellin-side quantities at complex s
    Mellin {
        #[arg(long)]
        m: u32,
        #[arg(long, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        im: f64,
        #[arg(long, default_value_t = 0)]
        deriv: u32,
        #[arg(long, value_enum, default_value_t = MellinWhat::Lstar)]
        what: MellinWhat,
    },
    /// Expansion coefficient tables for h, h′, h″
    Coeffs {
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
    },
    /// Solve ĥ′(x) = ε
    Revert {
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Small-deviation estimates
    Smallball {
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value_t = SbMode::Sytaja)]
        mode: SbMode,
        /// Correction order for the weak mode (0 = lead only)
        #[arg(long, default_value_t = 0)]
        order: usize,
        /// Geometric grid `eps1:eps2:n`, emitted as CSV
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Tensor-oracle h at x, or Monte Carlo P(V² ≤ ε)
    Oracle {
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 8192)]
        chunk: u64,
        /// Per-axis box counts
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Run the acceptance checks
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
    },
    /// CSV table over a geometric grid
    Sweep {
        #[arg(value_enum)]
        what: SweepWhat,
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        /// `lo:hi:n`
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum, default_value_t = SbMode::Sytaja)]
        mode: SbMode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "lower")]
enum MellinWhat {
    Lstar,
    Apart,
    Kseries,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaplaceMode {
    Exact,
    Asym,
    Remainder,
}

#[derive(Clone, Copy, ValueEnum)]
enum SbMode {
    Sytaja,
    SytajaOracle,
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepWhat {
    Smallball,
    Laplace,
}

/// Floats at 17 significant digits.
struct Fmt17;

impl serde_json::ser::Formatter for Fmt17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
}

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

fn record<T: Serialize>(schema: &str, body: &T) -> Result<String, Error> {
    let v = serde_json::to_value(body).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut map = Map::new();
    map.insert("schema".into(), Value::from(schema));
    map.insert("version".into(), Value::from(VERSION));
    match v {
        Value::Object(o) => map.extend(o),
        other => {
            map.insert("value".into(), other);
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fmt17);
    Value::Object(map).serialize(&mut ser).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

fn geometric_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidInput(format!("grid must be lo:hi:n, got {spec}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > 0.0) {
        return Err(bad());
    }
    Ok(match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    })
}

fn smallball_one(m: &[u32], eps: f64, mode: SbMode, order: usize) -> Result<SmallBallEstimate, Error> {
    let ms = build_mspec(m)?;
    match mode {
        SbMode::Sytaja => sytaja_estimate(&ms, eps, Mode::SytajaExpansion),
        SbMode::SytajaOracle => sytaja_estimate(&ms, eps, Mode::SytajaOracle),
        SbMode::Weak => weak_estimate(&ms, eps, order),
        SbMode::Strong => strong_estimate(&ms, eps),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn smallball_csv(m: &[u32], grid: &[f64], mode: SbMode, order: usize) -> String {
    let mut out = String::from("eps,log_p,p,mode,residual,error\n");
    for &eps in grid {
        match smallball_one(m, eps, mode, order) {
            Ok(e) => {
                let mode = serde_json::to_value(e.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                out += &format!("{},{},{},{},{},\n", fmt17(eps), fmt17(e.log_p), fmt17(e.p), mode, fmt17(e.diagnostics.residual));
            }
            Err(err) => out += &format!("{},,,,,{}\n", fmt17(eps), csv_field(&err.to_string())),
        }
    }
    out
}

fn laplace_csv(m: u32, grid: &[f64]) -> String {
    let mut out = String::from("x,L,dL,d2L,log_cosh_sqrt_x\n");
    for &x in grid {
        let l = laplace::l_exact_derivs(m, x);
        let closed = if m == 0 { fmt17(x.sqrt().cosh().ln()) } else { String::new() };
        out += &format!("{},{},{},{},{}\n", fmt17(x), fmt17(l[0]), fmt17(l[1]), fmt17(l[2]), closed);
    }
    out
}

struct Run {
    out: String,
    seeds: Vec<u64>,
    validation_failed: bool,
}

fn line(out: &mut String, schema: &str, body: &impl Serialize) -> Result<(), Error> {
    *out += &record(schema, body)?;
    out.push('\n');
    Ok(())
}

fn single_m(m: &[u32]) -> Result<u32, Error> {
    match m {
        [x] => Ok(*x),
        _ => Err(Error::InvalidInput("laplace sweep takes a single m".into())),
    }
}

fn dispatch(cmd: &Cmd) -> Result<Run, Error> {
    let mut out = String::new();
    let mut seeds = Vec::new();
    let mut validation_failed = false;
    match cmd {
        Cmd::Spectrum { m, count, refine, tol } => {
            if *count == 0 || !(*tol > 0.0) {
                return Err(Error::InvalidInput("--count must be positive and --tol > 0".into()));
            }
            for n in 1..=*count {
                let e = kappa(n, *m, *refine, *tol)?;
                line(&mut out, "eigenvalue", &serde_json::json!({"m": m, "n": e.n, "kappa": e.kappa, "method": e.method, "err_bound": e.err_bound}))?;
            }
        }
        Cmd::Laplace { m, x, mode } => {
            if !(*x >= 0.0) {
                return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
            }
            let body = match mode {
                LaplaceMode::Exact => {
                    let l = laplace::l_exact_derivs(*m, *x);
                    serde_json::json!({"m": m, "x": x, "mode": "exact", "value": l[0], "dL": l[1], "d2L": l[2]})
                }
                LaplaceMode::Asym => serde_json::json!({"m": m, "x": x, "mode": "asym", "value": laplace::l_asym(*m, *x)}),
                LaplaceMode::Remainder => serde_json::json!({"m": m, "x": x, "mode": "remainder", "value": laplace::r_remainder(*m, *x)}),
            };
            line(&mut out, "laplace", &body)?;
        }
        Cmd::Mellin { m, re, im, deriv, what } => {
            let z = C64::new(*re, *im);
            let (name, v) = match what {
                MellinWhat::Apart => ("apart", serde_json::to_value(a_part(*m, z, *deriv)?)),
                MellinWhat::Lstar => ("lstar", serde_json::to_value(l_star(*m, z, *deriv)?)),
                MellinWhat::Kseries => ("kseries", serde_json::to_value(k_series(*m, z)?)),
            };
            let v = v.map_err(|e| Error::InvalidInput(e.to_string()))?;
            line(&mut out, "mellin", &serde_json::json!({"m": m, "s": {"re": re, "im": im}, "deriv": deriv, "what": name, "result": v}))?;
        }
        Cmd::Coeffs { m } => {
            line(&mut out, "coeffs", &*h_tables_cached(m)?)?;
        }
        Cmd::Revert { m, eps, order } => {
            let table = h_tables_cached(m)?;
            line(&mut out, "reversion", &correction_sequence(&table, *eps, *order)?)?;
        }
        Cmd::Smallball { m, eps, mode, order, sweep } => match (sweep, eps) {
            (Some(g), _) => out = smallball_csv(m, &geometric_grid(g)?, *mode, *order),
            (None, Some(e)) => line(&mut out, "smallball", &smallball_one(m, *e, *mode, *order)?)?,
            (None, None) => return Err(Error::InvalidInput("--eps or --sweep required".into())),
        },
        Cmd::Oracle { m, eps, x, samples, seed, chunk, counts } => {
            let ms = build_mspec(m)?;
            if let Some(x) = x {
                let r = h_direct_all(&ms, *x)?;
                line(&mut out, "h_direct", &serde_json::json!({"m": m, "x": x, "h": r.h, "trunc": r.trunc}))?;
            }
            if let Some(eps) = eps {
                seeds.push(*seed);
                let counts = counts.clone().unwrap_or_else(|| default_counts(&ms));
                let wb = weight_box(&ms, &counts)?;
                let cfg = McConfig { samples: *samples, seed: *seed, chunk: *chunk };
                let est = mc_smallball(*eps, &cfg, &wb, None)?;
                line(&mut out, "oracle_mc", &serde_json::json!({"m": m, "eps": eps, "seed": seed, "box": counts, "estimate": est}))?;
            }
            if x.is_none() && eps.is_none() {
                return Err(Error::InvalidInput("--x or --eps required".into()));
            }
        }
        Cmd::Validate { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            if level == Level::Full {
                seeds.push(42);
            }
            let report = validate(level);
            for c in &report.checks {
                eprintln!("{}", c.line());
                line(&mut out, "check", c)?;
            }
            validation_failed = !report.passed;
        }
        Cmd::Sweep { what, m, grid, mode } => {
            let g = geometric_grid(grid)?;
            out = match what {
                SweepWhat::Smallball => smallball_csv(m, &g, *mode, 0),
                SweepWhat::Laplace => laplace_csv(single_m(m)?, &g),
            };
        }
    }
    Ok(Run { out, seeds, validation_failed })
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Spectrum { .. } => "spectrum",
        Cmd::Laplace { .. } => "laplace",
        Cmd::Mellin { .. } => "mellin",
        Cmd::Coeffs { .. } => "coeffs",
        Cmd::Revert { .. } => "revert",
        Cmd::Smallball { .. } => "smallball",
        Cmd::Oracle { .. } => "oracle",
        Cmd::Validate { .. } => "validate",
        Cmd::Sweep { .. } => "sweep",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = dispatch(&cli.cmd);
    let (code, out, seeds) = match result {
        Ok(r) => (if r.validation_failed { 4 } else { 0 }, r.out, r.seeds),
        Err(e) => {
            let code = if e.is_input() { 2 } else { 3 };
            let msg = record("error", &serde_json::json!({"message": e.to_string(), "exit_code": code})).unwrap_or_default();
            eprintln!("{msg}");
            (code, String::new(), Vec::new())
        }
    };
    print!("{out}");
    let digest: String = Sha256::digest(out.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let manifest = serde_json::json!({
        "subcommand": subcommand_name(&cli.cmd),
        "args": std::env::args().collect::<Vec<_>>(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seeds": seeds,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs_digest": digest,
        "exit_code": code,
    });
    if let Ok(m) = record("manifest", &manifest) {
        eprintln!("{m}");
    }
    ExitCode::from(code)
}
