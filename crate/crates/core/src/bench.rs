//! Synthetic 25-task suite, sweep harness and aggregate tables.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    run_task, Approval, Backend, ConfigEcho, ErrorClass, ErrorEvent, RunConfig, RunReport, SubtaskTally, TaskRun,
};
use crate::canonical::to_canonical;
use crate::design::{
    apply_modifications, synthesize_floorplan, DesignTask, Footprint, LocationHint, Modality, Modification,
    SynthesisError,
};
use crate::document::Census;
use crate::evaluation::Category;
use crate::floorplan::FloorplanModel;
use crate::retrieval::DocIndex;

pub const SUITE_SIZE: usize = 25;
/// Per-task wall-clock budget of the harness.
pub const TASK_BUDGET_SECS: f64 = 10.0;

pub const MODALITIES: [Modality; 5] =
    [Modality::TextOnly, Modality::Sketch, Modality::Dataset, Modality::SketchModified, Modality::DatasetModified];
const FOOTPRINTS: [Footprint; 5] =
    [Footprint::Rectangle, Footprint::LShape, Footprint::HShape, Footprint::Hexagon, Footprint::Octagon];
/// Storeys per suite slot: ten single-storey, fourteen two-storey and one
/// three-storey building.
const STOREYS: [[u32; 5]; 5] = [[1, 2, 1, 2, 3], [2, 1, 2, 1, 2], [1, 2, 2, 1, 2], [2, 1, 2, 2, 1], [2, 2, 1, 2, 1]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    #[serde(flatten)]
    pub task: DesignTask,
    pub ground_truth: FloorplanModel,
    pub expected_census: Census,
}

impl BenchmarkTask {
    pub fn to_canonical_json(&self) -> Vec<u8> {
        to_canonical(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite slot {slot}: {source}")]
    Synthesis { slot: usize, source: SynthesisError },
    #[error("no reports to aggregate")]
    Empty,
}

fn modality_slug(m: Modality) -> &'static str {
    match m {
        Modality::TextOnly => "text",
        Modality::Sketch => "sketch",
        Modality::Dataset => "dataset",
        Modality::SketchModified => "sketch-mod",
        Modality::DatasetModified => "dataset-mod",
    }
}

fn footprint_words(f: Footprint) -> &'static str {
    match f {
        Footprint::Rectangle => "rectangular",
        Footprint::LShape => "L-shaped",
        Footprint::HShape => "H-shaped",
        Footprint::Hexagon => "hexagonal",
        Footprint::Octagon => "octagonal",
    }
}

fn hint_words(h: LocationHint) -> &'static str {
    match h {
        LocationHint::Largest => "by dividing the largest room",
        LocationHint::TopLeft => "in the top left",
        LocationHint::TopRight => "in the top right",
        LocationHint::BottomLeft => "in the bottom left",
        LocationHint::BottomRight => "in the bottom right",
        LocationHint::Left => "on the left",
        LocationHint::Right => "on the right",
        LocationHint::Bottom => "at the bottom",
        LocationHint::Middle => "in the middle",
    }
}

fn prose(t: &DesignTask) -> String {
    let storeys = match t.storeys {
        1 => "single-storey".to_string(),
        n => format!("{n}-storey"),
    };
    let source = match t.modality {
        Modality::TextOnly => "",
        Modality::Sketch | Modality::SketchModified => " The layout follows the attached hand sketch.",
        Modality::Dataset | Modality::DatasetModified => " The layout follows the attached floorplan image.",
    };
    let mut s = format!(
        "A {storeys} house with a {} footprint and {} rooms, every storey laid out alike.{source}",
        footprint_words(t.footprint),
        t.rooms
    );
    for m in &t.modifications {
        match m {
            Modification::AddRoom(h) => s.push_str(&format!(" Add one more room {}.", hint_words(*h))),
            Modification::SplitRoom(r) => s.push_str(&format!(" Split {r} into two rooms.")),
            Modification::RemoveRoom(r) => s.push_str(&format!(" Remove {r} by merging it with a neighbour.")),
        }
    }
    s
}

const HINTS: [LocationHint; 9] = [
    LocationHint::Largest,
    LocationHint::TopLeft,
    LocationHint::TopRight,
    LocationHint::BottomLeft,
    LocationHint::BottomRight,
    LocationHint::Left,
    LocationHint::Right,
    LocationHint::Bottom,
    LocationHint::Middle,
];

/// First modification among seeded candidates that the base plan admits.
fn pick_modification(base: &FloorplanModel, rng: &mut ChaCha8Rng) -> Option<(Modification, FloorplanModel)> {
    let mut candidates = Vec::new();
    let room = |i: usize| base.rooms[i % base.rooms.len()].id.clone();
    match rng.random_range(0..3) {
        0 => candidates.push(Modification::AddRoom(HINTS[rng.random_range(0..HINTS.len())])),
        1 => candidates.push(Modification::SplitRoom(room(rng.random_range(0..8)))),
        _ => candidates.push(Modification::RemoveRoom(room(rng.random_range(0..8)))),
    }
    candidates.extend(HINTS.iter().map(|h| Modification::AddRoom(*h)));
    candidates.into_iter().find_map(|m| apply_modifications(base, std::slice::from_ref(&m)).ok().map(|fp| (m, fp)))
}

/// The 25-task suite: five modalities, each spanning all five footprint
/// families. Deterministic in `seed`.
pub fn generate_benchmark(seed: u64) -> Result<Vec<BenchmarkTask>, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(SUITE_SIZE);
    for (g, modality) in MODALITIES.into_iter().enumerate() {
        for (k, footprint) in FOOTPRINTS.into_iter().enumerate() {
            let slot = g * 5 + k;
            let task_seed: u64 = rng.random();
            let wanted = footprint.base_rooms() + rng.random_range(0..=2);
            let mut task = DesignTask {
                id: format!("{}-{:02}", modality_slug(modality), k + 1),
                modality,
                footprint,
                storeys: STOREYS[g][k],
                rooms: wanted,
                modifications: Vec::new(),
                prose: String::new(),
            };
            // Fall back to fewer rooms when the footprint cannot hold them.
            let mut base = synthesize_floorplan(&task, task_seed);
            while base.is_err() && task.rooms > 1 {
                task.rooms -= 1;
                base = synthesize_floorplan(&task, task_seed);
            }
            let base = base.map_err(|source| BenchError::Synthesis { slot, source })?;
            let truth = if modality.is_modified() {
                match pick_modification(&base, &mut rng) {
                    Some((m, fp)) => {
                        task.modifications.push(m);
                        fp
                    }
                    None => base,
                }
            } else {
                base
            };
            task.prose = prose(&task);
            out.push(BenchmarkTask { expected_census: truth.expected_census(), task, ground_truth: truth });
        }
    }
    Ok(out)
}

/// One report with the wall-clock time it took; timing is kept apart so
/// reports stay reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub report: RunReport,
    pub wall_clock_secs: f64,
}

fn crash_report(task: &BenchmarkTask, config: &RunConfig, reason: String) -> RunReport {
    RunReport {
        task_id: task.task.id.clone(),
        end_to_end: Approval::Fail,
        census_match: false,
        subtasks: Category::ALL
            .into_iter()
            .map(|category| SubtaskTally { category, attempted: 0, succeeded: 0 })
            .collect(),
        events: vec![ErrorEvent { substep: "task".into(), class: ErrorClass::Planning, reason }],
        actions_executed: 0,
        retries: 0,
        config: ConfigEcho {
            backend: config.backend.kind,
            seed: config.seed,
            ablations: config.ablations,
            fault_rate: config.fault_rate,
        },
    }
}

/// Run every task once per seed, in parallel across runs. A task that
/// errors or panics is recorded as a failure and the sweep continues.
/// `on_run` sees every completed run, e.g. to persist documents.
pub fn run_benchmark(
    suite: &[BenchmarkTask],
    config: &RunConfig,
    seeds: &[u64],
    backend: &dyn Backend,
    index: &DocIndex,
    on_run: &(dyn Fn(&BenchmarkTask, &TaskRun) + Sync),
) -> Vec<BenchOutcome> {
    let jobs: Vec<(u64, &BenchmarkTask)> = seeds.iter().flat_map(|s| suite.iter().map(move |t| (*s, t))).collect();
    jobs.into_par_iter()
        .map(|(seed, task)| {
            let cfg = RunConfig { seed, budget_secs: config.budget_secs.or(Some(TASK_BUDGET_SECS)), ..config.clone() };
            let result =
                catch_unwind(AssertUnwindSafe(|| run_task(&task.task, &task.ground_truth, &cfg, backend, index)));
            match result {
                Ok(Ok(run)) => {
                    on_run(task, &run);
                    BenchOutcome { report: run.report, wall_clock_secs: run.wall_clock_secs }
                }
                Ok(Err(e)) => BenchOutcome { report: crash_report(task, &cfg, e.to_string()), wall_clock_secs: 0.0 },
                Err(_) => {
                    BenchOutcome { report: crash_report(task, &cfg, "task run panicked".into()), wall_clock_secs: 0.0 }
                }
            }
        })
        .collect()
}

/// Percentages rounded to hundredths so that they sum to exactly 100
/// (largest remainder); all zeros when the total is zero.
pub fn percentages(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let exact: Vec<f64> = counts.iter().map(|c| *c as f64 * 10_000.0 / total as f64).collect();
    let mut units: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = 10_000 - units.iter().sum::<u64>();
    for &i in order.iter().take(missing as usize) {
        units[i] += 1;
    }
    units.into_iter().map(|u| u as f64 / 100.0).collect()
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 * 10_000.0 / den as f64).round() / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub category: Category,
    pub attempted: u64,
    pub succeeded: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub class: ErrorClass,
    pub count: u64,
    pub percent: f64,
}

/// One results row: a configuration's success rates and failure taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub config: String,
    pub runs: u64,
    pub end_to_end: f64,
    pub categories: Vec<CategoryRate>,
    pub taxonomy: Vec<ClassShare>,
    pub actions_executed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rows: Vec<ConfigRow>,
}

fn row(config: String, reports: &[&RunReport]) -> ConfigRow {
    let runs = reports.len() as u64;
    let ok = reports.iter().filter(|r| r.is_success()).count() as u64;
    let categories = Category::ALL
        .into_iter()
        .map(|category| {
            let (a, s) = reports.iter().fold((0u64, 0u64), |(a, s), r| {
                let (ra, rs) = r.tally(category);
                (a + u64::from(ra), s + u64::from(rs))
            });
            CategoryRate { category, attempted: a, succeeded: s, rate: pct(s, a) }
        })
        .collect();
    let counts: Vec<u64> = ErrorClass::ALL
        .iter()
        .map(|c| reports.iter().flat_map(|r| &r.events).filter(|e| e.class == *c).count() as u64)
        .collect();
    let taxonomy = ErrorClass::ALL
        .into_iter()
        .zip(counts.iter().zip(percentages(&counts)))
        .map(|(class, (count, percent))| ClassShare { class, count: *count, percent })
        .collect();
    ConfigRow {
        config,
        runs,
        end_to_end: pct(ok, runs),
        categories,
        taxonomy,
        actions_executed: reports.iter().map(|r| r.actions_executed).sum(),
    }
}

/// Fold reports into one row per configuration: full first, then single
/// ablations, then combinations.
pub fn aggregate(reports: &[RunReport]) -> Result<Aggregate, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut keys: Vec<(usize, String)> = Vec::new();
    for r in reports {
        let a = r.config.ablations;
        let rank = [a.disable_dynamic_grounding, a.disable_supervision, a.disable_hierarchy]
            .iter()
            .enumerate()
            .fold(0, |acc, (i, on)| if *on { acc + (1 << i) } else { acc });
        let key = (rank, r.config.label());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort();
    let rows = keys
        .into_iter()
        .map(|(_, label)| {
            let group: Vec<&RunReport> = reports.iter().filter(|r| r.config.label() == label).collect();
            row(label, &group)
        })
        .collect();
    Ok(Aggregate { rows })
}

impl Aggregate {
    pub fn row(&self, config: &str) -> Option<&ConfigRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn to_table(&self) -> String {
        let mut head = format!("{:<28} {:>6} {:>12}", "Method", "Runs", "End-to-End");
        if let Some(first) = self.rows.first() {
            for c in &first.categories {
                head.push_str(&format!(" {:>16}", format!("{} ({})", c.category.name(), c.attempted)));
            }
        }
        head.push_str(&format!(" {:>10} {:>10} {:>10}", "Planning", "Grounding", "Execution"));
        let mut out = vec![head];
        for r in &self.rows {
            let mut line = format!("{:<28} {:>6} {:>12.2}", r.config, r.runs, r.end_to_end);
            for c in &r.categories {
                line.push_str(&format!(" {:>16.2}", c.rate));
            }
            for t in &r.taxonomy {
                line.push_str(&format!(" {:>10.2}", t.percent));
            }
            out.push(line);
        }
        out.join("\n") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,runs,end_to_end");
        for c in Category::ALL {
            out.push_str(&format!(",{0}_attempted,{0}_succeeded,{0}_rate", c.name().to_lowercase()));
        }
        out.push_str(",planning_pct,grounding_pct,execution_pct,actions_executed\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.2}", r.config, r.runs, r.end_to_end));
            for c in &r.categories {
                out.push_str(&format!(",{},{},{:.2}", c.attempted, c.succeeded, c.rate));
            }
            for t in &r.taxonomy {
                out.push_str(&format!(",{:.2}", t.percent));
            }
            out.push_str(&format!(",{}\n", r.actions_executed));
        }
        out
    }
}
