use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cellforge::config::{apply_seed, load_config};
use cellforge::dataset::{
    annotate_rows, build_dataset, filter_part, from_jsonl, split_dataset, stats, to_jsonl,
    unsupported_surface, Augment, DatasetError, DatasetRow, Filter, PipelineConfig,
};
use cellforge::decompose::{decompose, verify_decomposition, CsgExpr};
use cellforge::dedup::dedup_parts;
use cellforge::metrics::{aggregate, cell_count_csv, equality_csv, evaluate_example, MetricsRow};
use cellforge::render::render_views;
use cellforge::sequence::{build_graph, enumerate_orders};
use cellforge::Part;

#[derive(Parser)]
#[command(name = "cellforge", version, about = "CSG cell decomposition and completion dataset tooling")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every sampled step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose CSG expressions into parts.
    Decompose {
        /// A CSG JSON file, a directory of them, or JSONL of {"id","expr"}.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Check each part against its expression with N random points.
        #[arg(long)]
        verify: Option<usize>,
    },
    /// Drop parts that duplicate an earlier part up to similarity.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// List connected build orders of each part.
    Sequences {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit input/output script rows for parts, without filtering.
    Emit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        augment: Option<Augment>,
    },
    /// Render the four corner views of each part as PGM files.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Annotate dataset rows through the configured vision endpoint.
    Annotate {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        parts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: decompose, filter, dedup, rows, split, stats.
    Build(BuildArgs),
    /// Split rows into train and test by part.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Score generated completions against the ground truth.
    Validate {
        /// Dataset rows supplying the input scripts.
        #[arg(long)]
        inputs: PathBuf,
        /// JSONL with an "output_script" (or "text") per row, in input order.
        #[arg(long)]
        generated: PathBuf,
        /// Dataset rows supplying the ground-truth output scripts.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        matrices: Option<PathBuf>,
    },
    /// Histogram of parts by cell count.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BuildArgs {
    /// CSG input, as for `decompose`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    augment: Option<Augment>,
    /// Also annotate rows (needs annotate.url).
    #[arg(long)]
    annotate: bool,
}

enum CliError {
    Data(String),
    Transport(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Transport(_) => 3,
        }
    }
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Annotate(a) => CliError::Transport(a.to_string()),
            other => data(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Ctx {
    cfg: PipelineConfig,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    from_jsonl(&read(path)?).map_err(|(line, e)| data(format!("{}:{line}: {e}", path.display())))
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// `(id, raw JSON)` pairs from a JSON file, a directory of JSON files (id =
/// file stem) or a JSONL file, sorted by id.
fn raw_items(path: &Path, id_key: &str) -> Result<Vec<(String, serde_json::Value)>> {
    let parse = |text: &str, src: &str| {
        serde_json::from_str::<serde_json::Value>(text).map_err(|e| data(format!("{src}: {e}")))
    };
    let stem = |p: &Path| p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let mut items = Vec::new();
    if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for f in files {
            let v = parse(&read(&f)?, &f.display().to_string())?;
            let id = v.get(id_key).and_then(|i| i.as_str()).map_or_else(|| stem(&f), str::to_string);
            items.push((id, v));
        }
    } else if is_jsonl(path) {
        for (i, line) in read(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = parse(line, &format!("{}:{}", path.display(), i + 1))?;
            let id = v
                .get(id_key)
                .and_then(|i| i.as_str())
                .map_or_else(|| format!("{}-{}", stem(path), i + 1), str::to_string);
            items.push((id, v));
        }
    } else {
        let v = parse(&read(path)?, &path.display().to_string())?;
        let id = v.get(id_key).and_then(|i| i.as_str()).map_or_else(|| stem(path), str::to_string);
        items.push((id, v));
    }
    items.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(items)
}

fn load_exprs(path: &Path) -> Result<Vec<(String, CsgExpr)>> {
    raw_items(path, "id")?
        .into_iter()
        .map(|(id, v)| {
            let expr = v.get("expr").cloned().unwrap_or(v);
            serde_json::from_value(expr)
                .map(|e| (id.clone(), e))
                .map_err(|e| data(format!("{id}: {e}")))
        })
        .collect()
}

fn load_parts(path: &Path) -> Result<Vec<Part>> {
    raw_items(path, "id")?
        .into_iter()
        .map(|(id, v)| serde_json::from_value(v).map_err(|e| data(format!("part {id}: {e}"))))
        .collect()
}

fn decompose_all(ctx: &Ctx, exprs: &[(String, CsgExpr)], verify: Option<usize>) -> Result<Vec<Part>> {
    exprs
        .par_iter()
        .map(|(id, e)| {
            let mut part = decompose(e, &ctx.cfg.decompose).map_err(|err| data(format!("{id}: {err}")))?;
            part.id = id.clone();
            if let Some(n) = verify {
                let score = verify_decomposition(e, &part, n, ctx.cfg.seed).map_err(data)?;
                ctx.note(format!("{id}: {} cells, agreement {score:.6}", part.cells.len()));
            }
            Ok(part)
        })
        .collect()
}

fn parts_jsonl(parts: &[Part]) -> String {
    to_jsonl(parts)
}

#[derive(Serialize)]
struct SequenceRow<'a> {
    part_id: &'a str,
    order: Vec<&'a str>,
}

#[derive(Deserialize)]
struct GeneratedRow {
    #[serde(alias = "text")]
    output_script: String,
}

#[derive(Serialize)]
struct ValidationReport {
    report: cellforge::metrics::MetricsReport,
    rows: Vec<MetricsRow>,
}

fn dropped_csv(dropped: &[(String, String)]) -> String {
    let mut out = String::from("dropped,duplicate_of\n");
    for (a, b) in dropped {
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}

fn cmd_build(ctx: &Ctx, args: &BuildArgs) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    if let Some(a) = args.augment {
        cfg.augment = a;
    }
    cfg.validate()?;
    let exprs = load_exprs(&args.input)?;
    let parts = decompose_all(ctx, &exprs, None)?;
    ctx.note(format!("decomposed {} parts", parts.len()));

    let mut rejected = String::from("part_id,reason\n");
    let mut accepted = Vec::new();
    for p in parts.iter() {
        match filter_part(p, &cfg) {
            Filter::Accept => accepted.push(p.clone()),
            Filter::Reject(r) => rejected.push_str(&format!("{},{r}\n", p.id)),
        }
    }
    let (kept, dropped) = if cfg.dedup {
        let out = dedup_parts(accepted).map_err(data)?;
        (out.kept, out.dropped)
    } else {
        (accepted, Vec::new())
    };
    ctx.note(format!("{} parts kept, {} duplicates", kept.len(), dropped.len()));

    let mut rows = build_dataset(&kept, &cfg)?;
    if args.annotate {
        annotate_rows(&mut rows, &kept, &cfg)?;
    }
    let out = &args.out;
    write(&out.join("parts.jsonl"), parts_jsonl(&kept))?;
    write(&out.join("rows.jsonl"), to_jsonl(&rows))?;
    write(&out.join("rejected.csv"), rejected)?;
    write(&out.join("dropped.csv"), dropped_csv(&dropped))?;
    if !rows.is_empty() {
        let (train, test) = split_dataset(&rows, cfg.split_ratio, cfg.seed)?;
        write(&out.join("train.jsonl"), to_jsonl(&train))?;
        write(&out.join("test.jsonl"), to_jsonl(&test))?;
    }
    let hist = stats(parts.iter().map(|p| p.cells.len()));
    write(&out.join("stats.csv"), hist.to_csv())?;
    ctx.note(format!("{} rows\n{}", rows.len(), hist.bar_chart(40)));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p).map_err(data)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        apply_seed(&mut cfg, seed);
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(data)?;
    }
    let ctx = Ctx {
        cfg,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Decompose { input, out, verify } => {
            let parts = decompose_all(&ctx, &load_exprs(input)?, *verify)?;
            write(out, parts_jsonl(&parts))
        }
        Command::Dedup { input, out, report } => {
            let result = dedup_parts(load_parts(input)?).map_err(data)?;
            ctx.note(format!("kept {}, dropped {}", result.kept.len(), result.dropped.len()));
            write(out, parts_jsonl(&result.kept))?;
            match report {
                Some(r) => write(r, dropped_csv(&result.dropped)),
                None => Ok(()),
            }
        }
        Command::Sequences { input, out } => {
            let parts = load_parts(input)?;
            let per_part = parts
                .par_iter()
                .map(|p| {
                    let g = build_graph(p, &ctx.cfg.kernel).map_err(|e| data(format!("{}: {e}", p.id)))?;
                    let seed = cellforge::dataset::part_seed(ctx.cfg.seed, &p.id);
                    let seqs = enumerate_orders(&g, &p.id, ctx.cfg.order_cap, seed)
                        .map_err(|e| data(format!("{}: {e}", p.id)))?;
                    Ok(seqs
                        .iter()
                        .map(|s| {
                            serde_json::to_string(&SequenceRow {
                                part_id: &p.id,
                                order: s.cell_ids(&g),
                            })
                            .expect("serializable")
                                + "\n"
                        })
                        .collect::<String>())
                })
                .collect::<Result<Vec<String>>>()?;
            write(out, per_part.concat())
        }
        Command::Emit { input, out, augment } => {
            let mut cfg = ctx.cfg.clone();
            if let Some(a) = augment {
                cfg.augment = *a;
            }
            let rows = build_dataset(&load_parts(input)?, &cfg)?;
            write(out, to_jsonl(&rows))
        }
        Command::Render { input, out, size } => {
            let size = size.unwrap_or(ctx.cfg.render_size);
            let parts = load_parts(input)?;
            let images = parts
                .par_iter()
                .map(|p| {
                    let cells = p.resolve_all().map_err(data)?;
                    render_views(&cells, size, &ctx.cfg.kernel)
                        .map(|v| (p.id.clone(), v))
                        .map_err(|e| data(format!("{}: {e}", p.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (id, views) in images {
                for v in views {
                    write(&out.join(format!("{id}_view{}.pgm", v.view_id)), v.to_pgm())?;
                }
            }
            Ok(())
        }
        Command::Annotate { rows, parts, out } => {
            let mut rs: Vec<DatasetRow> = jsonl(rows)?;
            annotate_rows(&mut rs, &load_parts(parts)?, &ctx.cfg)?;
            write(out, to_jsonl(&rs))
        }
        Command::Build(args) => cmd_build(&ctx, args),
        Command::Split {
            input,
            train,
            test,
            ratio,
        } => {
            let rows: Vec<DatasetRow> = jsonl(input)?;
            let (a, b) = split_dataset(&rows, ratio.unwrap_or(ctx.cfg.split_ratio), ctx.cfg.seed)?;
            write(train, to_jsonl(&a))?;
            write(test, to_jsonl(&b))
        }
        Command::Validate {
            inputs,
            generated,
            truth,
            out,
            matrices,
        } => {
            let inputs: Vec<DatasetRow> = jsonl(inputs)?;
            let truth: Vec<DatasetRow> = jsonl(truth)?;
            let generated: Vec<GeneratedRow> = jsonl(generated)?;
            if inputs.len() != truth.len() || inputs.len() != generated.len() {
                return Err(data(format!(
                    "row counts differ: {} inputs, {} generated, {} truth",
                    inputs.len(),
                    generated.len(),
                    truth.len()
                )));
            }
            let rows = (0..inputs.len())
                .into_par_iter()
                .map(|i| {
                    evaluate_example(
                        &inputs[i].example_id(),
                        &inputs[i].input_script,
                        &generated[i].output_script,
                        &truth[i].output_script,
                        &ctx.cfg.kernel,
                    )
                    .map_err(data)
                })
                .collect::<Result<Vec<_>>>()?;
            let report = aggregate(&rows).map_err(data)?;
            if let Some(dir) = matrices {
                write(&dir.join("cell_counts.csv"), cell_count_csv(&report))?;
                write(&dir.join("equality.csv"), equality_csv(&report))?;
            }
            let means: BTreeMap<&str, f64> = [
                ("correct_syntax", report.means.correct_syntax),
                ("correct_syntax_and_logic", report.means.correct_syntax_and_logic),
                ("exact_match", report.means.exact_match),
            ]
            .into_iter()
            .collect();
            ctx.note(format!("{} rows, {means:?}", rows.len()));
            let body = serde_json::to_string_pretty(&ValidationReport { report, rows }).map_err(data)?;
            write(out, body + "\n")
        }
        Command::Stats { input, csv } => {
            let items = raw_items(input, "id")?;
            let counts = items.iter().map(|(_, v)| {
                v.get("cells").and_then(|c| c.as_array()).map_or(0, Vec::len)
            });
            let hist = stats(counts);
            let unsupported = items.iter().filter(|(_, v)| unsupported_surface(v).is_some()).count();
            if unsupported > 0 {
                ctx.note(format!("{unsupported} parts use unsupported surface kinds"));
            }
            print!("{}", hist.bar_chart(40));
            match csv {
                Some(path) => write(path, hist.to_csv()),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Data(msg) | CliError::Transport(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
