use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use asymgeo_harness::experiments::{parse_mode, parse_split_rule, TreeKind};
use asymgeo_harness::report::{self, Experiment, Report};
use asymgeo_harness::{acceptance, datasets, experiments, formats, verify};
use clap::{Parser, Subcommand, ValueEnum};

/// Datasets, oracle suites and metered experiments for the asymgeo kernels.
#[derive(Parser)]
#[command(name = "asymgeo", version)]
struct Cli {
    /// Overrides every seed given on the command line or in a spec file.
    #[arg(long, env = "ASYMGEO_SEED", global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Points,
    Intervals,
    Queries,
    Keys,
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes a reproducible uniform random dataset.
    Gen {
        kind: Kind,
        #[arg(long)]
        n: usize,
        /// Dimension for points and queries.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Longest interval, as a fraction of the unit range.
        #[arg(long, default_value_t = 0.01)]
        max_len: f64,
        /// Point file whose bounding box contains the generated queries.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs an oracle suite and prints its checks as JSON. Exits nonzero on
    /// any failed check.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(verify::SUITES))]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Input size for generated data.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        alpha: u64,
        /// Restricts `aug` to one tree; required with `--ops`.
        #[arg(long)]
        tree: Option<TreeKind>,
        /// Update/query script replayed by `aug`.
        #[arg(long)]
        ops: Option<PathBuf>,
        /// Initial items for `--ops` (interval or point file).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value = "range")]
        mode: String,
        #[arg(long, default_value = "cycle")]
        split_rule: String,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5")]
        epsilon: Vec<f64>,
        /// Point file for `kd` and `dt`.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Key file for `sort`.
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Edge list for `trace`.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Where `dt` writes its mesh (OFF).
        #[arg(long)]
        off: Option<PathBuf>,
        /// Where `dt` writes its per-round cost log (JSON).
        #[arg(long)]
        rounds_log: Option<PathBuf>,
    },
    /// Runs an experiment spec, or one acceptance criterion, and writes
    /// `<out>.json` and `<out>.csv`.
    Bench {
        /// Experiment spec (JSON).
        spec: Option<PathBuf>,
        /// Runs acceptance criterion N instead of a spec; `0` runs all.
        #[arg(long, conflicts_with = "spec")]
        criterion: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combines reports into `<out>.json` and one CSV.
    ReportMerge {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<bool> {
    let seed_of = |s: u64| cli.seed_override.unwrap_or(s);
    match cli.cmd {
        Cmd::Gen {
            kind,
            n,
            k,
            seed,
            max_len,
            from,
            out,
        } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            let seed = seed_of(seed);
            let text = match kind {
                Kind::Points => formats::format_points(&datasets::points(n, k, seed)),
                Kind::Intervals => formats::format_intervals(&datasets::intervals(n, max_len, seed)),
                Kind::Keys => formats::format_keys(&datasets::keys(n, seed)),
                Kind::Queries => {
                    let (lo, hi) = match &from {
                        Some(p) => {
                            let pts = formats::parse_points(&formats::read(p)?)?;
                            let k = pts.first().map_or(k, |p| p.k());
                            datasets::bounds(&pts, k)
                        }
                        None => (vec![0.0; k], vec![1.0; k]),
                    };
                    formats::format_boxes(&datasets::boxes(n, &lo, &hi, seed))
                }
            };
            formats::write(&out, &text)?;
            Ok(true)
        }
        Cmd::Verify {
            suite,
            seed,
            n,
            alpha,
            tree,
            ops,
            data,
            k,
            p,
            mode,
            split_rule,
            epsilon,
            points,
            keys,
            edges,
            off,
            rounds_log,
        } => {
            let seed = seed_of(seed);
            let mut o = verify::Options::new(seed);
            o.n = n;
            o.alpha = alpha;
            o.tree = tree;
            o.kd = asymgeo::kd_tree::KdConfig::new(k)
                .with_mode(parse_mode(&mode)?)
                .with_seed(seed);
            o.kd.split_rule = parse_split_rule(&split_rule)?;
            o.kd.p = p;
            o.epsilon = epsilon;
            o.points = points;
            o.keys = keys;
            o.edges = edges;
            o.ops = ops;
            o.data = data;
            o.off = off;
            o.rounds_log = rounds_log;
            let rep = verify::run(&suite, &o)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(rep.pass)
        }
        Cmd::Bench {
            spec,
            criterion,
            seed,
            out,
        } => {
            if let Some(id) = criterion {
                let ids: Vec<u32> = if id == 0 { (1..=acceptance::COUNT).collect() } else { vec![id] };
                let seed = seed_of(seed);
                let mut all = Vec::new();
                for id in ids {
                    let o = acceptance::run_criterion(id, seed)?;
                    println!("{}", o.line());
                    all.push(o);
                }
                if let Some(out) = out {
                    formats::write(&with_ext(&out, "json"), &serde_json::to_string_pretty(&all)?)?;
                }
                return Ok(all.iter().all(|o| o.pass));
            }
            let Some(spec) = spec else {
                bail!("give an experiment spec file or --criterion N");
            };
            let text = formats::read(&spec)?;
            let mut exp: Experiment =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            if let Some(s) = cli.seed_override {
                exp = exp.with("seed", s);
            }
            let rep = experiments::run(&exp)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&exp.subject));
            formats::write(&with_ext(&out, "json"), &rep.to_json())?;
            formats::write(&with_ext(&out, "csv"), &rep.to_csv()?)?;
            println!("{}", serde_json::to_string_pretty(&rep.summary)?);
            Ok(true)
        }
        Cmd::ReportMerge { inputs, out } => {
            let mut reports = Vec::new();
            for p in &inputs {
                let r: Report = serde_json::from_str(&formats::read(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?;
                reports.push(r);
            }
            let merged = report::merge(reports)?;
            formats::write(&with_ext(&out, "json"), &serde_json::to_string_pretty(&merged)?)?;
            formats::write(&with_ext(&out, "csv"), &merged.to_csv()?)?;
            Ok(true)
        }
    }
}
