use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use sphr::io::{load_scenario, run_table, snapshot, KnowledgeBase, Scenario};
use sphr::metric::neighbor_ellipsoid;
use sphr::neighbors::{adaptive_metric_at, brute_force_query, knn_query, Neighbor};
use sphr::sph::{MetricMode, StepDiagnostics};
use sphr::{Error, MetricKind, MetricTensor, Octree, ParticleTable, Policy, Snapshot};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "sphr", version, about = "Anisotropic k-NN smoothed particle hydrodynamics")]
struct Cli {
    /// Print diagnostics (and errors) as JSON.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its knowledge base.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ordered neighbour list of one particle with its bounding ellipsoid.
    Knn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        id: usize,
        #[arg(long)]
        metric: Option<MetricKind>,
        #[arg(long)]
        k: Option<usize>,
        /// Compare against a brute-force scan.
        #[arg(long)]
        verify_oracle: bool,
    },
    /// Initial densities and pressures as CSV.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump one snapshot of a knowledge base as CSV.
    Inspect {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        snapshot: usize,
    },
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Numeric { .. } | Error::NonFinite(_) | Error::NonPositiveDensity { .. } => EXIT_NUMERIC,
            Error::Io { .. } | Error::Snapshot(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<Output, Failure>;

/// Human text plus the equivalent JSON document.
struct Output {
    text: String,
    json: Value,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    sphr::exec::init_threads_from_env();

    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Knn {
            config,
            id,
            metric,
            k,
            verify_oracle,
        } => cmd_knn(&config, id, metric, k, verify_oracle),
        Command::Density { config, out } => cmd_density(&config, &out),
        Command::Inspect { kb, snapshot } => cmd_inspect(&kb, snapshot),
    };

    match result {
        Ok(out) => {
            let body = if cli.json {
                serde_json::to_string_pretty(&out.json).expect("json") + "\n"
            } else {
                out.text
            };
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()) {
                // A closed reader (`| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: stdout: {e}");
                    ExitCode::from(EXIT_IO)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            if cli.json {
                eprintln!("{}", json!({ "error": f.message, "exit_code": f.code }));
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn load(config: &Path) -> Result<(Scenario, ParticleTable), Failure> {
    let scn = load_scenario(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let table = scn.build_table_relative_to(base)?;
    Ok((scn, table))
}

fn cmd_run(config: &Path, out: &Path) -> CmdResult {
    let (scn, table) = load(config)?;
    let kb = run_table(&scn, table, out, Policy::default())?;
    let m = kb.manifest();
    let summary = m.summary.as_ref();
    let mut text = format!("wrote {} snapshots to {}\n", kb.len(), out.display());
    if let Some(s) = summary {
        text += &format!(
            "steps {}  t = {}  momentum drift {:e}  density [{}, {}]\n",
            s.steps_completed, s.final_time, s.momentum_drift, s.min_density, s.max_density
        );
    }
    Ok(Output {
        text,
        json: json!({ "knowledge_base": out, "snapshots": kb.len(), "summary": summary }),
    })
}

fn cmd_knn(config: &Path, id: usize, metric: Option<MetricKind>, k: Option<usize>, verify: bool) -> CmdResult {
    let (mut scn, table) = load(config)?;
    if let Some(m) = metric {
        scn.neighbors.metric = m;
    }
    if let Some(k) = k {
        scn.neighbors.k = k;
    }
    scn.validate()?;
    let k = scn.neighbors.k;
    if id >= table.len() {
        return Err(Error::config("--id", format!("{id} out of range for {} particles", table.len())).into());
    }
    let tree = Octree::build(&table, scn.neighbors.leaf_capacity)?;
    let (m, list): (MetricTensor, Vec<Neighbor>) = match scn.metric_mode()? {
        MetricMode::Euclidean => {
            let m = MetricTensor::euclidean();
            let list = knn_query(&tree, &table, id, k, &m)?;
            (m, list)
        }
        MetricMode::Global(m) => {
            let list = knn_query(&tree, &table, id, k, &m)?;
            (m, list)
        }
        MetricMode::Adaptive {
            iterations,
            floor_fraction,
        } => adaptive_metric_at(&tree, &table, id, k, iterations, floor_fraction)?,
    };

    let mut text = format!("particle {id}  metric {}  k {k}\n", m.kind());
    text += "rank        id                    xi\n";
    for (r, nb) in list.iter().enumerate() {
        text += &format!("{r:>4} {:>9} {:>21e}\n", nb.id, nb.xi);
    }
    let xi_max = list.last().map_or(0.0, |nb| nb.xi);
    let ellipsoid = if xi_max > 0.0 {
        let e = neighbor_ellipsoid(&m, &table.positions()[id], xi_max)?;
        text += "ellipsoid semi-axes (longest first):\n";
        for (a, s) in e.axes.iter().zip(e.semi_axes) {
            text += &format!("  {s:>12.6e} along ({:+.6}, {:+.6}, {:+.6})\n", a[0], a[1], a[2]);
        }
        json!({
            "axes": e.axes.iter().map(|a| [a[0], a[1], a[2]]).collect::<Vec<_>>(),
            "semi_axes": e.semi_axes,
        })
    } else {
        Value::Null
    };

    let mut oracle = Value::Null;
    if verify {
        let reference = brute_force_query(&table, id, k, &m)?;
        let same = reference.len() == list.len()
            && reference.iter().zip(&list).all(|(a, b)| a.id == b.id && a.xi.to_bits() == b.xi.to_bits());
        text += if same { "oracle: match\n" } else { "oracle: MISMATCH\n" };
        oracle = json!(same);
        if !same {
            return Err(Failure {
                code: EXIT_NUMERIC,
                message: format!("octree result for particle {id} differs from the brute-force scan"),
            });
        }
    }

    let neighbors: Vec<Value> = list.iter().map(|nb| json!({ "id": nb.id, "xi": nb.xi })).collect();
    let mrows = m.matrix();
    Ok(Output {
        text,
        json: json!({
            "id": id,
            "k": k,
            "metric": m.kind(),
            "matrix": (0..3).map(|r| [mrows[(r, 0)], mrows[(r, 1)], mrows[(r, 2)]]).collect::<Vec<_>>(),
            "neighbors": neighbors,
            "ellipsoid": ellipsoid,
            "oracle_match": oracle,
        }),
    })
}

fn cmd_density(config: &Path, out: &Path) -> CmdResult {
    let (scn, mut table) = load(config)?;
    scn.pipeline()?.density_pass(&mut table)?;
    let d = StepDiagnostics::measure(&table, 0, 0.0, None);
    let n = table.len();
    let csv = snapshot::to_text(&Snapshot::new(0, 0.0, table));
    std::fs::write(out, csv).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", out.display()),
    })?;
    Ok(Output {
        text: format!(
            "{n} particles, density [{}, {}] written to {}\n",
            d.min_density,
            d.max_density,
            out.display()
        ),
        json: json!({ "particles": n, "min_density": d.min_density, "max_density": d.max_density, "out": out }),
    })
}

fn cmd_inspect(dir: &Path, index: usize) -> CmdResult {
    let kb = KnowledgeBase::open(dir)?;
    let snap = kb.read_snapshot(index)?;
    let entry = &kb.manifest().snapshots[index];
    let text = snapshot::to_text(&snap);
    Ok(Output {
        json: json!({ "entry": entry, "failure": kb.manifest().failure, "text": text }),
        text,
    })
}
