use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bimpilot::agent::{
    run_task, AblationConfig, Backend, BackendKind, HttpBackend, RunConfig, RunReport, ScriptedBackend, TaskRun,
    TaskTrace,
};
use bimpilot::bench::{aggregate, generate_benchmark, run_benchmark, BenchmarkTask};
use bimpilot::canonical::to_canonical;
use bimpilot::document::BuildingDocument;
use bimpilot::evaluation::evaluate_document;
use bimpilot::floorplan::FloorplanModel;
use bimpilot::retrieval::DocIndex;

#[derive(Parser)]
#[command(name = "bimpilot", version, about = "Drive a GUI agent through BIM authoring tasks and benchmark it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(clap::Args)]
struct RunFlags {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    fault_rate: Option<f64>,
    /// Comma-separated: grounding, supervision, hierarchy.
    #[arg(long)]
    ablate: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the 25-task suite.
    GenBench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one task.
    Run {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a suite over seeds 0..N.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[command(flatten)]
        flags: RunFlags,
        /// Also run each single ablation after the full configuration.
        #[arg(long)]
        all_configs: bool,
        /// Write the final document of every run.
        #[arg(long)]
        keep_documents: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a document against a task or floorplan.
    Eval {
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Aggregate the reports under a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Replay a trace and write one frame as PPM.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        frame_index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Write via a temporary sibling and rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn run_config(flags: &RunFlags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => {
            serde_json::from_slice::<RunConfig>(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(b) = flags.backend {
        cfg.backend.kind = match b {
            BackendArg::Scripted => BackendKind::Scripted,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if let Some(f) = flags.fault_rate {
        if !(0.0..=1.0).contains(&f) {
            return Err(usage(format!("fault rate {f} is outside [0, 1]")));
        }
        cfg.fault_rate = f;
    }
    if let Some(a) = &flags.ablate {
        cfg.ablations = AblationConfig::parse_list(a).map_err(usage)?;
    }
    cfg.backend.validate().map_err(|e| usage(e.to_string()))?;
    cfg.policy.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn backend(cfg: &RunConfig) -> Result<Box<dyn Backend>> {
    Ok(match cfg.backend.kind {
        BackendKind::Scripted => Box::new(ScriptedBackend),
        BackendKind::Http => Box::new(HttpBackend::from_config(&cfg.backend).map_err(|e| usage(e.to_string()))?),
    })
}

fn load_task(path: &Path) -> Result<BenchmarkTask> {
    BenchmarkTask::from_json(&read(path)?).map_err(|e| usage(format!("{}: not a benchmark task: {e}", path.display())))
}

fn load_suite(dir: &Path) -> Result<Vec<BenchmarkTask>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no task files in {}", dir.display())));
    }
    paths.iter().map(|p| load_task(p)).collect()
}

fn slug(label: &str) -> String {
    label.replace("w/o ", "no-").replace('+', "-")
}

fn write_run(out: &Path, id: &str, run: &TaskRun) -> Result<()> {
    write_atomic(&out.join(format!("{id}.report.json")), &to_canonical(&run.report))?;
    write_atomic(&out.join(format!("{id}.document.json")), &run.document.to_canonical_json())?;
    let mut trace = run.trace.clone();
    let interactions = std::mem::take(&mut trace.interactions);
    write_atomic(&out.join(format!("{id}.trace.json")), &to_canonical(&trace))?;
    let mut lines = Vec::new();
    for i in &interactions {
        lines.extend(to_canonical(i));
        lines.push(b'\n');
    }
    write_atomic(&out.join(format!("{id}.interactions.jsonl")), &lines)?;
    write_atomic(
        &out.join(format!("{id}.timing.json")),
        &to_canonical(&serde_json::json!({ "wall_clock_secs": run.wall_clock_secs })),
    )
}

fn collect_reports(dir: &Path, out: &mut Vec<(PathBuf, RunReport)>) -> Result<()> {
    for e in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = e?.path();
        if p.is_dir() {
            collect_reports(&p, out)?;
        } else if p.to_string_lossy().ends_with(".report.json") {
            let r = serde_json::from_slice(&read(&p)?).with_context(|| format!("parsing {}", p.display()))?;
            out.push((p, r));
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenBench { seed, out } => {
            for t in generate_benchmark(seed)? {
                write_atomic(&out.join(format!("{}.json", t.task.id)), &t.to_canonical_json())?;
            }
            eprintln!("wrote 25 tasks to {}", out.display());
            Ok(true)
        }
        Command::Run { task, seed, flags, out } => {
            let t = load_task(&task)?;
            let cfg = RunConfig { seed, keep_trace: true, ..run_config(&flags)? };
            let b = backend(&cfg)?;
            let run = run_task(&t.task, &t.ground_truth, &cfg, b.as_ref(), &DocIndex::builtin())
                .map_err(|e| usage(e.to_string()))?;
            write_run(&out, &t.task.id, &run)?;
            println!("{}", String::from_utf8(to_canonical(&run.report))?);
            Ok(run.report.is_success())
        }
        Command::Bench { suite, seeds, flags, all_configs, keep_documents, out } => {
            let tasks = load_suite(&suite)?;
            let base = run_config(&flags)?;
            let b = backend(&base)?;
            let index = DocIndex::builtin();
            let mut configs = vec![base.clone()];
            if all_configs {
                for a in ["grounding", "supervision", "hierarchy"] {
                    configs
                        .push(RunConfig { ablations: AblationConfig::parse_list(a).expect("known"), ..base.clone() });
                }
            }
            let seeds: Vec<u64> = (0..seeds).collect();
            let mut reports = Vec::new();
            let mut timing = serde_json::Map::new();
            for cfg in &configs {
                let dir = out.join("reports").join(slug(&cfg.ablations.label()));
                let docs = dir.clone();
                let sink = move |t: &BenchmarkTask, run: &TaskRun| {
                    if keep_documents {
                        let p = docs
                            .join(format!("s{}", run.report.config.seed))
                            .join(format!("{}.document.json", t.task.id));
                        if let Err(e) = write_atomic(&p, &run.document.to_canonical_json()) {
                            eprintln!("{e:#}");
                        }
                    }
                };
                let started = std::time::Instant::now();
                let outcomes = run_benchmark(&tasks, cfg, &seeds, b.as_ref(), &index, &sink);
                timing.insert(cfg.ablations.label(), serde_json::json!(started.elapsed().as_secs_f64()));
                for o in outcomes {
                    let r = o.report;
                    let p = dir.join(format!("s{}", r.config.seed)).join(format!("{}.report.json", r.task_id));
                    write_atomic(&p, &to_canonical(&r))?;
                    reports.push(r);
                }
            }
            let agg = aggregate(&reports)?;
            write_atomic(&out.join("aggregate.json"), &to_canonical(&agg))?;
            write_atomic(&out.join("timing.json"), &to_canonical(&timing))?;
            print!("{}", agg.to_table());
            Ok(reports.iter().all(RunReport::is_success))
        }
        Command::Eval { doc, truth } => {
            let document =
                BuildingDocument::from_json(&read(&doc)?).map_err(|e| usage(format!("{}: {e}", doc.display())))?;
            let bytes = read(&truth)?;
            let fp = match BenchmarkTask::from_json(&bytes) {
                Ok(t) => t.ground_truth,
                Err(_) => FloorplanModel::from_json(&bytes).map_err(|e| usage(format!("{}: {e}", truth.display())))?,
            };
            let ev = evaluate_document(&document, &fp);
            println!("{}", String::from_utf8(to_canonical(&ev))?);
            Ok(ev.all_passed() && ev.census_match)
        }
        Command::Report { input, format } => {
            let mut found = Vec::new();
            collect_reports(&input, &mut found)?;
            found.sort_by(|a, b| a.0.cmp(&b.0));
            let reports: Vec<RunReport> = found.into_iter().map(|(_, r)| r).collect();
            if reports.is_empty() {
                bail!(usage(format!("no reports under {}", input.display())));
            }
            let agg = aggregate(&reports)?;
            match format {
                Format::Table => print!("{}", agg.to_table()),
                Format::Json => println!("{}", String::from_utf8(to_canonical(&agg))?),
                Format::Csv => print!("{}", agg.to_csv()),
            }
            Ok(true)
        }
        Command::Render { trace, frame_index, out } => {
            let t: TaskTrace =
                serde_json::from_slice(&read(&trace)?).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
            if frame_index > t.log.len() {
                return Err(usage(format!("frame index {frame_index} exceeds the {} logged actions", t.log.len())));
            }
            write_atomic(&out, &t.replay(frame_index).render().raster.to_ppm())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
