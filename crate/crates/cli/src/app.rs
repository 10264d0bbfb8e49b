//! Argument parsing and the `sample`, `experiment` and `info` commands.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loopforge_core::chain::{Symmetry, Vertex, WeightedChain};
use loopforge_core::isomorphism::{GffSampler, LupuSampler};
use loopforge_core::lerw::sample_lerw_with;
use loopforge_core::rng::{chunked_map, default_workers, WORKERS_ENV};
use loopforge_core::spanning::{wilson_default, wired_uniform_forest, WiredBox};
use loopforge_core::walk::TransitionTable;
use loopforge_core::z2::{crossing_exponent, grid, green_stabilization, odd_loop_slope};
use loopforge_core::{Error, RealChain, Result};
use serde_json::json;

use crate::suites::{fomin_points, run_suite, Scale, Suite};

/// Draws per RNG stream for the samplers.
pub const SAMPLE_CHUNK: usize = 1_000;

#[derive(Parser, Debug)]
#[command(name = "loopforge", version, about = "Loop-erased walks, loop soups and their identities on finite chains")]
pub struct Cli {
    /// Worker threads; overrides LOOPFORGE_WORKERS. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run verification suites and print one line per check.
    Verify(VerifyArgs),
    /// Draw samples.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Run a numerical experiment and print a table.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Print version, worker count and available suites.
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Out {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// `full` uses the acceptance sample sizes.
    #[arg(long, value_enum, default_value = "quick")]
    pub scale: Scale,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Graph for `--suite fomin`; checks the two-path identity at `--points`.
    #[arg(long, requires = "points")]
    pub graph: Option<PathBuf>,
    /// Four boundary labels `x1 x2 y1 y2`.
    #[arg(long, num_args = 4, allow_hyphen_values = true, value_names = ["X1", "X2", "Y1", "Y2"], requires = "graph")]
    pub points: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum SampleCommand {
    /// Loop-erased random walk from a vertex to the boundary.
    Lerw {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Spanning trees rooted at the boundary (and at `--root`, if given) by
    /// Wilson's algorithm.
    Ust {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Wired uniform spanning forests of the box `{0, …, side-1}^dim`.
    Forest {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        side: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Gaussian free field with covariance `(I - Q)^{-1}`.
    Gff {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        method: GffMethod,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GffMethod {
    Direct,
    Lupu,
}

#[derive(Subcommand, Debug)]
pub enum ExperimentCommand {
    /// Odd-loop mass on lattice discs and its slope against `log r`.
    OddLoopSlope {
        #[arg(long, value_delimiter = ',', default_value = "8,12,16,24,32")]
        radii: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Log-determinant of the strip kernel matrix against `r`.
    CrossingExponent {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 3.0)]
        rmin: f64,
        #[arg(long, default_value_t = 6.0)]
        rmax: f64,
        /// Number of intervals in the `r` grid.
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, default_value_t = 200)]
        terms: usize,
        /// Heights `y_1 < … < y_n`; equally spaced in `(0, π)` by default.
        #[arg(long, value_delimiter = ',')]
        y: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Diagonal Green's function entries on lattice discs.
    GreenStabilization {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        radii: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a failed verification or runtime error, 2 on a usage or input error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(w) = cli.workers {
        std::env::set_var(WORKERS_ENV, w.to_string());
    }
    match execute(cli.command) {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) | Error::Schema(_) => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cmd: Command) -> Result<(String, i32)> {
    match cmd {
        Command::Verify(a) => verify(a),
        Command::Sample(s) => Ok((sample(s)?, 0)),
        Command::Experiment(e) => Ok((experiment(e)?, 0)),
        Command::Info => Ok((info(), 0)),
    }
}

fn read_chain(path: &PathBuf) -> Result<RealChain> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    WeightedChain::from_json(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn verify(a: VerifyArgs) -> Result<(String, i32)> {
    if let Some(path) = &a.graph {
        if a.suite != Suite::Fomin {
            return Err(Error::InvalidInput("--graph is only used by --suite fomin".into()));
        }
        let chain = read_chain(path)?;
        let pts: Vec<&str> = a.points.iter().map(String::as_str).collect();
        let (l, r) = fomin_points(&chain, &pts)?;
        let ok = (l - r).abs() < 1e-8 * l.abs().max(r.abs()).max(1.0);
        let line = format!("{} fomin-two-path {}: lhs {l:.12e} rhs {r:.12e}\n", if ok { "PASS" } else { "FAIL" }, a.points.join(" "));
        return Ok((line, if ok { 0 } else { 1 }));
    }
    let report = run_suite(a.suite, a.seed, a.scale);
    let instances = a.suite.lists_instances();
    let text = match a.format {
        Format::Text => report.render_text(instances),
        Format::Json => report.render_json(instances),
    };
    Ok((text, if report.passed() { 0 } else { 1 }))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Copy of `chain` with `root` moved to the boundary; edges between boundary
/// vertices are dropped.
fn with_root(chain: &RealChain, root: &str) -> Result<RealChain> {
    let r = chain.index_of(root).ok_or_else(|| Error::InvalidInput(format!("unknown root {root:?}")))?;
    if chain.is_boundary(r) {
        return Ok(chain.clone());
    }
    let interior: Vec<Vertex> = chain.interior().filter(|&v| v != r).collect();
    let boundary: Vec<Vertex> = std::iter::once(r).chain(chain.boundary()).collect();
    let order: Vec<Vertex> = interior.iter().chain(&boundary).copied().collect();
    let mut pos = vec![0; chain.n_vertices()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let is_new_boundary = |v: Vertex| v == r || chain.is_boundary(v);
    let edges = chain
        .edges()
        .filter(|(u, v, _)| !(is_new_boundary(*u) && is_new_boundary(*v)))
        .map(|(u, v, w)| (pos[u], pos[v], *w))
        .collect();
    let label = |v: &Vertex| chain.label(*v).to_string();
    WeightedChain::new(interior.iter().map(label).collect(), boundary.iter().map(label).collect(), edges, Symmetry::General)
}

fn sample(cmd: SampleCommand) -> Result<String> {
    let workers = default_workers();
    let mut out = String::new();
    match cmd {
        SampleCommand::Lerw { graph, from, n, seed, out: fmt } => {
            let chain = read_chain(&graph)?;
            let x = chain.index_of(&from).ok_or_else(|| Error::InvalidInput(format!("unknown vertex {from:?}")))?;
            if !chain.is_interior(x) {
                return Err(Error::InvalidInput(format!("{from:?} is not an interior vertex")));
            }
            let table = TransitionTable::markov(&chain)?;
            let nv = chain.n_vertices();
            let paths: Vec<Vec<Vertex>> = chunked_map(seed, n, SAMPLE_CHUNK, workers, |rng, m| {
                (0..m).map(|_| sample_lerw_with(&table, nv, x, rng, |v| chain.is_boundary(v)).into_vec()).collect::<Vec<_>>()
            })
            .concat();
            let labels = |p: &[Vertex]| p.iter().map(|&v| chain.label(v).to_string()).collect::<Vec<_>>();
            match fmt {
                Out::Csv => {
                    if n > 0 {
                        out.push_str("sample,length,path\n");
                    }
                    for (i, p) in paths.iter().enumerate() {
                        let _ = writeln!(out, "{i},{},{}", p.len() - 1, csv_field(&labels(p).join(" ")));
                    }
                }
                Out::Json => {
                    for (i, p) in paths.iter().enumerate() {
                        let _ = writeln!(out, "{}", json!({ "sample": i, "path": labels(p) }));
                    }
                }
            }
        }
        SampleCommand::Ust { graph, root, n, seed } => {
            let mut chain = read_chain(&graph)?;
            if let Some(r) = root {
                chain = with_root(&chain, &r)?;
            }
            let trees = chunked_map(seed, n, SAMPLE_CHUNK, workers, |rng, m| (0..m).map(|_| wilson_default(&chain, rng)).collect::<Result<Vec<_>>>());
            let mut i = 0;
            for chunk in trees {
                for t in chunk? {
                    let edges: Vec<[&str; 2]> = t.edges().map(|(u, v)| [chain.label(u), chain.label(v)]).collect();
                    let _ = writeln!(out, "{}", json!({ "sample": i, "edges": edges }));
                    i += 1;
                }
            }
        }
        SampleCommand::Forest { dim, side, n, seed } => {
            let bx = WiredBox::new(dim, side)?;
            let forests = chunked_map(seed, n, SAMPLE_CHUNK, workers, |rng, m| (0..m).map(|_| wired_uniform_forest(&bx, rng)).collect::<Vec<_>>());
            for (i, f) in forests.concat().iter().enumerate() {
                let stats = loopforge_core::spanning::forest_component_stats(f);
                let _ = writeln!(out, "{}", json!({ "sample": i, "vertices": f.n, "components": stats.components, "edges": f.edges }));
            }
        }
        SampleCommand::Gff { graph, method, n, seed, out: fmt } => {
            let chain = read_chain(&graph)?;
            let fields: Vec<Vec<f64>> = match method {
                GffMethod::Direct => {
                    let s = GffSampler::new(&chain)?;
                    chunked_map(seed, n, SAMPLE_CHUNK, workers, |rng, m| (0..m).map(|_| s.sample(rng).z).collect::<Vec<_>>()).concat()
                }
                GffMethod::Lupu => {
                    let s = LupuSampler::new(&chain)?;
                    chunked_map(seed, n, SAMPLE_CHUNK, workers, |rng, m| (0..m).map(|_| Ok(s.sample(rng)?.z)).collect::<Result<Vec<_>>>())
                        .into_iter()
                        .collect::<Result<Vec<_>>>()?
                        .concat()
                }
            };
            let labels: Vec<&str> = chain.interior().map(|v| chain.label(v)).collect();
            match fmt {
                Out::Csv => {
                    if n > 0 {
                        let header: Vec<String> = labels.iter().map(|l| csv_field(l)).collect();
                        let _ = writeln!(out, "sample,{}", header.join(","));
                    }
                    for (i, z) in fields.iter().enumerate() {
                        let row: Vec<String> = z.iter().map(|v| format!("{v:.17e}")).collect();
                        let _ = writeln!(out, "{i},{}", row.join(","));
                    }
                }
                Out::Json => {
                    for (i, z) in fields.iter().enumerate() {
                        let _ = writeln!(out, "{}", json!({ "sample": i, "vertices": labels, "z": z }));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn experiment(cmd: ExperimentCommand) -> Result<String> {
    let mut out = String::new();
    match cmd {
        ExperimentCommand::OddLoopSlope { radii, out: fmt } => {
            let fit = odd_loop_slope(&radii)?;
            match fmt {
                Out::Csv => {
                    out.push_str("r,log_r,vertices,odd_loop_mass\n");
                    for (r, n, m) in &fit.rows {
                        let _ = writeln!(out, "{r},{:.12},{n},{m:.12}", r.ln());
                    }
                    eprintln!("slope {:.6} intercept {:.6}", fit.slope, fit.intercept);
                }
                Out::Json => {
                    let rows: Vec<_> = fit.rows.iter().map(|(r, n, m)| json!({ "r": r, "vertices": n, "odd_loop_mass": m })).collect();
                    let _ = writeln!(out, "{}", json!({ "rows": rows, "slope": fit.slope, "intercept": fit.intercept }));
                }
            }
        }
        ExperimentCommand::CrossingExponent { n, rmin, rmax, steps, terms, y, out: fmt } => {
            if !(rmax > rmin) || steps == 0 {
                return Err(Error::InvalidInput("need rmin < rmax and at least one step".into()));
            }
            let ys = (!y.is_empty()).then_some(y.as_slice());
            let c = crossing_exponent(n, &grid(rmin, rmax, steps), ys, terms)?;
            match fmt {
                Out::Csv => {
                    out.push_str("r,log_det\n");
                    for (r, l) in &c.rows {
                        let _ = writeln!(out, "{r:.6},{l:.12}");
                    }
                    eprintln!("decay rate {:.6} (n(n+1)/2 = {})", c.slope, c.expected);
                    if let Some(t) = &c.two_path {
                        eprintln!("ratio {:.6e} at r = {}; ratio e^r sin^2 y1 sin^2 y2 = {:.6}; c = {:.6}", t.ratio, t.r, t.scaled_sin2, t.c);
                    }
                }
                Out::Json => {
                    let rows: Vec<_> = c.rows.iter().map(|(r, l)| json!({ "r": r, "log_det": l })).collect();
                    let two = c.two_path.map(|t| json!({ "r": t.r, "ratio": t.ratio, "ratio_e_r": t.scaled, "ratio_e_r_sin2": t.scaled_sin2, "c": t.c }));
                    let doc = json!({ "n": n, "y": c.y_points, "rows": rows, "decay_rate": c.slope, "expected": c.expected, "two_path": two });
                    let _ = writeln!(out, "{doc}");
                }
            }
        }
        ExperimentCommand::GreenStabilization { radii, out: fmt } => {
            let rows = green_stabilization(&radii)?;
            match fmt {
                Out::Csv => {
                    out.push_str("r,vertices,g00_q,g11_q,g00_p\n");
                    for (r, g) in &rows {
                        let _ = writeln!(out, "{r},{},{:.12},{:.12},{:.12}", g.n_vertices, g.g00_q, g.g11_q, g.g00_p);
                    }
                }
                Out::Json => {
                    let rs: Vec<_> = rows
                        .iter()
                        .map(|(r, g)| json!({ "r": r, "vertices": g.n_vertices, "g00_q": g.g00_q, "g11_q": g.g11_q, "g00_p": g.g00_p }))
                        .collect();
                    let _ = writeln!(out, "{}", json!({ "rows": rs }));
                }
            }
        }
    }
    Ok(out)
}

fn info() -> String {
    let suites: Vec<&str> = Suite::value_variants().iter().map(|s| s.name()).collect();
    format!(
        "loopforge {}\nworkers {} (set {} to override)\nsuites {}\n",
        env!("CARGO_PKG_VERSION"),
        default_workers(),
        WORKERS_ENV,
        suites.join(", ")
    )
}
