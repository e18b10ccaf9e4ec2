use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stieltjes::families::{self, FamilyKind};
use stieltjes::gdiff;
use stieltjes::gexp::{self, LinearProblem};
use stieltjes::json::{parse_derivator, parse_function, FunctionSpec};
use stieltjes::kernel;
use stieltjes::measure::{self, GInterval};
use stieltjes::metric::{self, PairGrid};
use stieltjes::piecewise::uniform_grid;
use stieltjes::{cantor, fixtures, suite};
use stieltjes::{Derivator, Error, PiecewiseMap};

#[derive(Parser)]
#[command(name = "stieltjes", version, about = "Stieltjes derivatives, integrals and linear equations")]
struct Cli {
    /// Default tolerance for derivative limits and residuals.
    #[arg(long, global = true, env = "STIELTJES_TOL", default_value_t = 1e-8)]
    tol: f64,
    /// Default number of uniform sample points.
    #[arg(long, global = true, env = "STIELTJES_GRID", default_value_t = 1024)]
    grid: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    I1,
    I2,
    Whole,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    V,
    Vtilde,
    F3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Add,
    Mul,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify points of a derivator, or summarize its exceptional sets.
    Classify {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        at: Option<f64>,
    },
    /// g-derivative at a point or over a uniform grid (JSON lines).
    Deriv {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, conflicts_with = "points")]
        at: Option<f64>,
        /// Number of uniform points; defaults to --grid.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Lebesgue-Stieltjes integral over [from, to).
    Integrate {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Drop the atoms of the jumps.
        #[arg(long)]
        skip_jumps: bool,
    },
    /// g-exponential exp_g(beta; t); beta is a number or a function JSON file.
    Expg {
        #[arg(long, allow_hyphen_values = true)]
        beta: String,
        /// Derivator JSON; identity on [0,1] when omitted.
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long)]
        at: f64,
    },
    /// Solve v'_g = beta v + forcing, v(a) = v0.
    Solve {
        #[arg(long)]
        g: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        beta: String,
        #[arg(long, allow_hyphen_values = true)]
        forcing: Option<String>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        v0: f64,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
    },
    /// Kernel elements, membership and decompositions.
    Kernel {
        #[arg(long)]
        g: PathBuf,
        #[command(subcommand)]
        action: KernelCmd,
    },
    /// Sampled Γ(f, h).
    Gamma {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        g: PathBuf,
        /// Uniform points in the pair grid.
        #[arg(long = "pairs", default_value_t = 256)]
        pairs: usize,
    },
    /// Sampled d(f, h) with its three summands.
    Metric {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long = "pairs", default_value_t = 256)]
        pairs: usize,
    },
    /// Mean value inequality |f(s) - f(t)| <= |h(s) - h(t)| inside each family member.
    Mvt {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, value_enum, default_value = "i2")]
        family: Family,
    },
    /// Cantor staircase iterate F_depth.
    Cantor {
        #[arg(long)]
        depth: u32,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
    },
    /// CSV data behind the worked figures.
    Reproduce {
        #[arg(long, value_enum)]
        figure: Figure,
    },
    /// Randomized property checks; exits 1 on any violation.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Step element with one value per component of [a,b] minus the jumps.
    Step {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
    /// The kernel element turning exp_g(beta) into its jump-free counterpart.
    Example1 {
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        beta: String,
    },
    Verify {
        #[arg(long)]
        f: PathBuf,
    },
    Decompose {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn load_g(path: &Path) -> Result<Derivator, Error> {
    parse_derivator(&read(path)?)
}

fn load_f(path: &Path) -> Result<PiecewiseMap, Error> {
    parse_function(&read(path)?)
}

/// A number is a constant function over the domain of g; anything else is a file.
fn scalar_or_file(arg: &str, g: &Derivator) -> Result<PiecewiseMap, Error> {
    match arg.trim().parse::<f64>() {
        Ok(c) => {
            let (a, b) = g.domain();
            Ok(PiecewiseMap::constant(a, b, c))
        }
        Err(_) => load_f(Path::new(arg)),
    }
}

/// Uniform grid joined with the breakpoints of every listed map and of g.
fn sample_grid(g: &Derivator, maps: &[&PiecewiseMap], n: usize) -> Vec<f64> {
    let (a, b) = g.domain();
    let mut pts = uniform_grid(a, b, n.max(2));
    pts.extend(g.breakpoints());
    for m in maps {
        pts.extend(m.breakpoints());
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn csv(f: &PiecewiseMap, pts: &[f64], header: &str) -> String {
    let mut out = format!("{header},value,right_limit\n");
    for &t in pts {
        let (v, r) = (f.at(t), f.rl(t));
        if r == v {
            out.push_str(&format!("{t},{v},\n"));
        } else {
            out.push_str(&format!("{t},{v},{r}\n"));
        }
    }
    out
}

/// Function spec when every segment has a JSON form, else sampled values.
fn describe(f: &PiecewiseMap, pts: &[f64]) -> Value {
    match FunctionSpec::from_map(f) {
        Ok(spec) => serde_json::to_value(spec).expect("spec serializes"),
        Err(_) => json!({
            "t": pts,
            "value": pts.iter().map(|&t| f.at(t)).collect::<Vec<_>>(),
            "right_limit": pts.iter().map(|&t| f.rl(t)).collect::<Vec<_>>(),
        }),
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("report serializes")
}

enum Outcome {
    Ok(String),
    /// Printed, then exit 1.
    Violation(String),
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let (tol, n) = (cli.tol, cli.grid);
    let out = match cli.cmd {
        Cmd::Classify { g, at } => {
            let g = load_g(&g)?;
            match at {
                Some(t) => to_json(&g.classify(t)?),
                None => to_json(&json!({
                    "domain": [g.domain().0, g.domain().1],
                    "jumps": g.jump_points(),
                    "components": g.components(),
                    "ng_minus": g.ng_minus(),
                    "ng_plus": g.ng_plus(),
                    "closure_conditions": g.closure_conditions(),
                    "i1": families::family_i1(&g),
                    "i2": families::family_i2(&g),
                })),
            }
        }
        Cmd::Deriv { f, g, at, points } => {
            let (f, g) = (load_f(&f)?, load_g(&g)?);
            if let Some(t) = at {
                let r = gdiff::g_derivative(&f, &g, t, tol)?;
                if r.failure.is_some() {
                    return Ok(Outcome::Violation(to_json(&r)));
                }
                to_json(&r)
            } else {
                let (a, b) = g.domain();
                let mut lines = Vec::new();
                for t in uniform_grid(a, b, points.unwrap_or(n).max(2)) {
                    lines.push(to_json(&gdiff::g_derivative(&f, &g, t, tol)?));
                }
                lines.join("\n")
            }
        }
        Cmd::Integrate { f, g, from, to, skip_jumps } => {
            let (f, g) = (load_f(&f)?, load_g(&g)?);
            let interval = GInterval { lo: from, hi: to };
            let r = if skip_jumps {
                measure::integrate_minus_jumps(&f, &g, interval, measure::DEFAULT_QUAD_TOL)?
            } else {
                measure::integrate(&f, &g, interval, measure::DEFAULT_QUAD_TOL)?
            };
            to_json(&r)
        }
        Cmd::Expg { beta, g, at } => {
            let g = match g {
                Some(p) => load_g(&p)?,
                None => Derivator::identity(0.0, 1.0)?,
            };
            let p = scalar_or_file(&beta, &g)?;
            let value = gexp::g_exponential(&p, &g, at)?;
            let right = gexp::g_exponential_right(&p, &g, at)?;
            to_json(&json!({ "t": at, "value": value, "right_limit": right }))
        }
        Cmd::Solve { g, beta, forcing, v0, emit } => {
            let g = load_g(&g)?;
            let problem = LinearProblem {
                beta: scalar_or_file(&beta, &g)?,
                forcing: forcing.map(|s| scalar_or_file(&s, &g)).transpose()?,
                v0,
                g: g.clone(),
            };
            let pts = sample_grid(&g, &[&problem.beta], n);
            let v = gexp::solve_forced(&problem, &pts, tol.max(1e-8))?;
            match emit {
                Emit::Csv => csv(&v, &pts, "t").trim_end().to_string(),
                Emit::Json => to_json(&describe(&v, &pts)),
            }
        }
        Cmd::Kernel { g, action } => {
            let g = load_g(&g)?;
            let (a, b) = g.domain();
            let grid = uniform_grid(a, b, n.max(2));
            match action {
                KernelCmd::Step { values } => {
                    let h = kernel::step_kernel(&g, &values)?;
                    to_json(&describe(&h.map, &grid))
                }
                KernelCmd::Example1 { beta } => {
                    let h = kernel::example1_h(&scalar_or_file(&beta, &g)?, &g)?;
                    to_json(&describe(&h.map, &grid))
                }
                KernelCmd::Verify { f } => {
                    let r = kernel::kernel_report(&load_f(&f)?, &g, &grid, tol)?;
                    if !r.is_member {
                        return Ok(Outcome::Violation(to_json(&r)));
                    }
                    to_json(&r)
                }
                KernelCmd::Decompose { f, mode } => {
                    let f = load_f(&f)?;
                    let pts = sample_grid(&g, &[&f], n);
                    match mode {
                        Mode::Add => {
                            let (h, rho) = kernel::additive_decompose(&f, &g, &grid, tol)?;
                            to_json(&json!({ "h": describe(&h, &pts), "rho": describe(&rho, &pts) }))
                        }
                        Mode::Mul => {
                            let (rho, u) = kernel::multiplicative_decompose(&f, &g, &grid, tol)?;
                            to_json(&json!({ "rho": describe(&rho, &pts), "u": describe(&u, &pts) }))
                        }
                    }
                }
            }
        }
        Cmd::Gamma { f, h, g, pairs } => {
            let grid = PairGrid { uniform: pairs, ..PairGrid::default() };
            let value = metric::gamma(&load_f(&f)?, &load_f(&h)?, &load_g(&g)?, &grid)?;
            to_json(&json!({ "gamma": value }))
        }
        Cmd::Metric { f, h, g, pairs } => {
            let grid = PairGrid { uniform: pairs, ..PairGrid::default() };
            to_json(&metric::bd1_distance(&load_f(&f)?, &load_f(&h)?, &load_g(&g)?, &grid)?)
        }
        Cmd::Mvt { f, h, g, family } => {
            let g = load_g(&g)?;
            let kind = match family {
                Family::I1 => FamilyKind::I1,
                Family::I2 => FamilyKind::I2,
                Family::Whole => FamilyKind::Whole,
            };
            let (a, b) = g.domain();
            let r = families::mvt_dominance_check(&load_f(&f)?, &load_f(&h)?, &g, kind, &uniform_grid(a, b, n.min(256)), tol)?;
            let text = to_json(&r);
            if !r.holds {
                return Ok(Outcome::Violation(text));
            }
            text
        }
        Cmd::Cantor { depth, emit } => {
            let f = cantor::cantor_iterate(depth)?;
            let pts = cantor_points(&f, n);
            match emit {
                Emit::Csv => csv(&f, &pts, "x").trim_end().to_string(),
                Emit::Json => to_json(&describe(&f, &pts)),
            }
        }
        Cmd::Reproduce { figure } => match figure {
            Figure::V | Figure::Vtilde => {
                let v = if matches!(figure, Figure::V) { fixtures::example1_v() } else { fixtures::example1_vtilde() };
                let pts = sample_grid(&fixtures::example1_g(1.0, 1.0), &[&v], n);
                csv(&v, &pts, "t").trim_end().to_string()
            }
            Figure::F3 => {
                let f = cantor::cantor_iterate(3)?;
                csv(&f, &cantor_points(&f, n), "x").trim_end().to_string()
            }
        },
        Cmd::Suite { seed, cases } => {
            let r = suite::run_suite(seed, cases);
            let text = serde_json::to_string_pretty(&r).expect("report serializes");
            if !r.passed {
                return Ok(Outcome::Violation(text));
            }
            text
        }
    };
    Ok(Outcome::Ok(out))
}

fn cantor_points(f: &PiecewiseMap, n: usize) -> Vec<f64> {
    let mut pts = uniform_grid(0.0, 1.0, n.max(2));
    pts.extend(f.breakpoints());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn error_kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| c == ' ' || c == '(' || c == '{').next().unwrap_or_default().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok(text)) => {
            let _ = writeln!(io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Violation(text)) => {
            let _ = writeln!(io::stdout(), "{text}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": error_kind(&e), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
