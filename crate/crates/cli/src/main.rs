use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use vardom::experiment::{run, ConfigError, ExperimentConfig, Notion};
use vardom::field::Field;
use vardom::gallery::{list_galleries, Gallery};
use vardom::grid::{hausdorff, HausdorffMode};
use vardom::ze::ze_distance;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "vardom", version, about = "Sobolev functions on sequences of varying domains")]
struct Cli {
    /// Worker threads for per-index parallel work.
    #[arg(long, global = true, env = "VARDOM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in galleries with default parameters.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run a config file with the notion it names.
    Run(ExperimentArgs),
    /// Generate a gallery and save its members, limit and manifest.
    Gallery {
        #[arg(long)]
        name: String,
        /// Parameter overrides as a JSON object.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long, env = "VARDOM_OUTPUT_DIR")]
        output: PathBuf,
    },
    /// Zero-extension and pair distances between two saved fields.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Set)]
        mode: ModeArg,
    },
    /// Strong / weak-only / none classification with the Cauchy modulus.
    Converge {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Also write every weak pairing residual.
        #[arg(long)]
        weak: bool,
    },
    /// Poincare constants along the sequence and the Lipschitz-graph scan.
    Poincare(ExperimentArgs),
    /// Boundary trace convergence along graph charts.
    Trace(ExperimentArgs),
    /// Shape search over a channel family and the lower-semicontinuity check.
    Shapeopt(ExperimentArgs),
    /// Zero-extension, ALE and E verdicts with their agreement matrix.
    Compare(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Set,
    Complement,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gallery: Option<String>,
    /// Gallery parameter overrides as a JSON object.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    len: Option<usize>,
    /// Cells per unit length (repeatable).
    #[arg(long = "resolution")]
    resolutions: Vec<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "VARDOM_OUTPUT_DIR")]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<vardom::Error> for Failure {
    fn from(e: vardom::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn parse_object(text: &str, what: &str) -> Result<Map<String, Value>, Failure> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::Config(format!("{what} must be a JSON object"))),
        Err(e) => Err(Failure::Config(format!("{what}: {}", ConfigError::from(e)))),
    }
}

fn gallery_value(name: &str, params: Option<&str>, len: Option<usize>, cells: Option<usize>) -> Result<Value, Failure> {
    let mut g = Map::new();
    if let Some(text) = params {
        g = parse_object(text, "--params")?;
    }
    g.insert("name".into(), json!(name));
    if let Some(n) = len {
        g.insert("len".into(), json!(n));
    }
    if let Some(n) = cells {
        g.insert("cells_per_unit".into(), json!(n));
    }
    Ok(Value::Object(g))
}

/// Config file (if any) with the flags applied on top; `notion` is forced by the subcommand.
fn build_config(args: &ExperimentArgs, notion: Option<Notion>) -> Result<ExperimentConfig, Failure> {
    let mut v = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
            let cfg = ExperimentConfig::from_json_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(cfg).map_err(|e| Failure::Run(e.to_string()))?
        }
        None => json!({}),
    };
    let obj = v.as_object_mut().expect("config serializes to an object");
    let same_gallery = args.gallery.as_deref().is_some_and(|n| obj.get("gallery").and_then(|g| g.get("name")) == Some(&json!(n)));
    match (&args.gallery, obj.get_mut("gallery")) {
        (Some(name), Some(Value::Object(g))) if same_gallery => {
            if let Some(text) = &args.params {
                g.extend(parse_object(text, "--params")?);
            }
            g.insert("name".into(), json!(name));
        }
        (Some(name), _) => {
            obj.insert("gallery".into(), gallery_value(name, args.params.as_deref(), None, None)?);
        }
        (None, Some(Value::Object(g))) => {
            if let Some(text) = &args.params {
                g.extend(parse_object(text, "--params")?);
            }
        }
        (None, _) => return Err(Failure::Config("no gallery given: use --gallery or --config".into())),
    }
    if let Some(Value::Object(g)) = obj.get_mut("gallery") {
        if let Some(n) = args.len {
            g.insert("len".into(), json!(n));
        }
    }
    if let Some(n) = notion {
        obj.insert("notion".into(), serde_json::to_value(n).expect("notion serializes"));
    }
    if !args.resolutions.is_empty() {
        obj.insert("resolutions".into(), json!(args.resolutions));
    }
    for (key, val) in [("p", args.p.map(|x| json!(x))), ("k", args.k.map(|x| json!(x))), ("seed", args.seed.map(|x| json!(x)))] {
        if let Some(val) = val {
            obj.insert(key.into(), val);
        }
    }
    if let Some(out) = &args.output {
        obj.insert("output_dir".into(), json!(out));
    }
    Ok(ExperimentConfig::from_value(v)?)
}

/// Print a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn experiment(args: &ExperimentArgs, notion: Option<Notion>) -> Result<(), Failure> {
    let cfg = build_config(args, notion)?;
    let out = run(&cfg)?;
    for line in &out.summary {
        say(line);
    }
    for f in &out.files {
        say(&format!("wrote {}", f.display()));
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::List { json } => {
            let table = list_galleries();
            if json {
                say(&serde_json::to_string_pretty(&table).map_err(|e| Failure::Run(e.to_string()))?);
            } else {
                say("name\tparameters\treference");
                for g in table {
                    say(&format!("{}\t{}\t{}", g.name, g.parameters, g.reference));
                }
            }
            Ok(())
        }
        Command::Run(args) => {
            if args.config.is_none() {
                return Err(Failure::Config("run needs --config".into()));
            }
            experiment(&args, None)
        }
        Command::Gallery { name, params, len, cells, output } => {
            let v = gallery_value(&name, params.as_deref(), len, cells)?;
            let g: Gallery = serde_json::from_value(v).map_err(|e| Failure::Config(ConfigError::from(e).message))?;
            let seq = g.generate()?;
            seq.save(&output)?;
            say(&format!("{}: {} members written to {}", seq.name, seq.members.len(), output.display()));
            Ok(())
        }
        Command::Distance { a, b, k, p, mode } => {
            let fa = Field::load(&a)?;
            let fb = Field::load(&b)?;
            let mode = match mode {
                ModeArg::Set => HausdorffMode::Set,
                ModeArg::Complement => HausdorffMode::Complement,
            };
            let ze = ze_distance(&fa, &fb, k, p)?;
            let hd = hausdorff(fa.domain(), fb.domain(), mode)?;
            let report = json!({ "k": k, "p": p, "ze_distance": ze, "hausdorff": hd, "pair_distance": ze + hd });
            say(&serde_json::to_string_pretty(&report).map_err(|e| Failure::Run(e.to_string()))?);
            Ok(())
        }
        Command::Converge { args, weak } => experiment(&args, Some(if weak { Notion::Weak } else { Notion::Ze })),
        Command::Poincare(args) => experiment(&args, Some(Notion::Poincare)),
        Command::Trace(args) => experiment(&args, Some(Notion::Trace)),
        Command::Shapeopt(args) => experiment(&args, Some(Notion::Pde)),
        Command::Compare(args) => experiment(&args, Some(Notion::Compare)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
