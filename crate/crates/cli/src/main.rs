use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ompbleu::classify::{classification_report, clause_confusion, ConfusionTable};
use ompbleu::compile::Compiler;
use ompbleu::harness::{self, load_dataset, rank_candidates, DatasetFormat};
use ompbleu::metrics::{CodeAnalysis, ScoreBreakdown, SubScores};
use ompbleu::pretrain::{corrupt, file_seed, format_tags, ssa_annotate, NoiseSchedule, TagVocabulary};
use ompbleu::syntax::{strip_openmp, ParseOptions, SourceUnit};
use ompbleu::{EvalConfig, Evaluator};

#[derive(Parser)]
#[command(
    name = "ompbleu",
    version,
    about = "Score OpenMP parallelizations against references"
)]
struct Cli {
    /// TOML file with weights, clause weights, compiler and backend settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Write output here instead of stdout (a directory for directory inputs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Emit::Json)]
    emit: Emit,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Dirs,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => DatasetFormat::Jsonl,
            Format::Dirs => DatasetFormat::Dirs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score one generated file against a reference.
    Score { reference: PathBuf, generated: PathBuf },
    /// Score several candidates and rank them.
    Rank {
        reference: PathBuf,
        #[arg(required = true)]
        candidates: Vec<PathBuf>,
    },
    /// Score every record of a dataset.
    Dataset {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
        /// Also write the per-clause F1 matrix as CSV.
        #[arg(long)]
        clause_f1: Option<PathBuf>,
    },
    /// Clause presence report comparing each reference with its first candidate.
    Classify {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
    },
    /// Remove every OpenMP pragma.
    Strip { path: PathBuf },
    /// Print syntax role tags, one line per file.
    Annotate { path: PathBuf },
    /// Apply pre-training noise.
    Corrupt {
        path: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        step: u64,
        /// TOML file with the noise schedule.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Report whether each file compiles.
    CompileCheck { path: PathBuf },
}

/// An error plus the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn eval_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: e.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<EvalConfig, Failure> {
    match &cli.config {
        Some(p) => EvalConfig::load(p).map_err(config_err),
        None => Ok(EvalConfig::default()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(eval_err)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(eval_err),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(eval_err)
}

fn breakdown_row(b: &ScoreBreakdown) -> Vec<String> {
    b.scores
        .values()
        .iter()
        .chain([&b.composite])
        .map(|v| format!("{v:.6}"))
        .collect()
}

fn breakdown_header() -> String {
    let mut h: Vec<&str> = SubScores::NAMES.to_vec();
    h.push("composite");
    h.join(",")
}

fn breakdown_table(b: &ScoreBreakdown) -> String {
    let mut out = String::new();
    for (name, v) in SubScores::NAMES.iter().zip(b.scores.values()) {
        out += &format!("{name:<10} {v:.4}\n");
    }
    out += &format!("{:<10} {:.2}\n", "composite", b.composite);
    for d in &b.diagnostics.0 {
        out += &format!("[{}] {}\n", d.metric, d.message);
    }
    out
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Score { reference, generated } => {
            let evaluator = Evaluator::new(&config).map_err(config_err)?;
            let b = evaluator
                .score(&read(reference)?, &read(generated)?)
                .map_err(eval_err)?;
            let text = match cli.emit {
                Emit::Json => to_json(&b)?,
                Emit::Csv => format!("{}\n{}\n", breakdown_header(), breakdown_row(&b).join(",")),
                Emit::Table => breakdown_table(&b),
            };
            emit(cli, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rank { reference, candidates } => {
            let evaluator = Evaluator::new(&config).map_err(config_err)?;
            let reference = read(reference)?;
            let sources = candidates.iter().map(|c| read(c)).collect::<Result<Vec<_>, _>>()?;
            let ranked = rank_candidates(&reference, &sources, &evaluator);
            let text = match cli.emit {
                Emit::Json => to_json(&ranked)?,
                Emit::Csv | Emit::Table => {
                    let mut out = String::from("rank,candidate,path,composite,error\n");
                    for r in &ranked {
                        let composite = r.composite().map(|c| format!("{c:.4}")).unwrap_or_default();
                        out += &format!(
                            "{},{},{},{},{}\n",
                            r.rank,
                            r.candidate_index,
                            candidates[r.candidate_index].display(),
                            composite,
                            r.error.as_deref().unwrap_or("").replace(['\n', ','], " ")
                        );
                    }
                    if cli.emit == Emit::Table {
                        out = out.replace(',', "\t");
                    }
                    out
                }
            };
            emit(cli, &text)?;
            Ok(if ranked.iter().any(|r| r.error.is_some()) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Dataset {
            path,
            format,
            clause_f1,
        } => {
            Evaluator::new(&config).map_err(config_err)?;
            harness::clause_vocabulary(&config).map_err(config_err)?;
            let data = load_dataset(path, (*format).into()).map_err(eval_err)?;
            let report = harness::evaluate_records(data, &config, cli.jobs).map_err(eval_err)?;
            let text = match cli.emit {
                Emit::Json => report.to_json().map_err(eval_err)? + "\n",
                Emit::Csv => report.to_csv().map_err(eval_err)?,
                Emit::Table => report.to_table(),
            };
            emit(cli, &text)?;
            if let Some(p) = clause_f1 {
                let csv = report.per_clause_f1_csv().map_err(eval_err)?;
                std::fs::write(p, csv)
                    .with_context(|| format!("cannot write {}", p.display()))
                    .map_err(eval_err)?;
            }
            Ok(if report.has_errors() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Classify { path, format } => {
            let vocab = harness::clause_vocabulary(&config).map_err(config_err)?;
            let data = load_dataset(path, (*format).into()).map_err(eval_err)?;
            let opts = ParseOptions {
                relaxed_pragma: config.relaxed_pragma,
            };
            let mut table = ConfusionTable::default();
            for r in &data.records {
                let gt = CodeAnalysis::new(&r.reference, opts);
                let gen = CodeAnalysis::new(&r.candidates[0], opts);
                table = table.merge(&clause_confusion(&gt.directives, &gen.directives, &vocab));
            }
            let report = classification_report(&table);
            let text = match cli.emit {
                Emit::Json => to_json(&report)?,
                Emit::Csv => {
                    let mut out = String::from("clause,f1\n");
                    for (k, v) in &report.per_clause_f1 {
                        out += &format!("{k},{v}\n");
                    }
                    out
                }
                Emit::Table => {
                    let c = &report.counts;
                    format!(
                        "tp {} fp {} fn {}\nprecision {}\nrecall {}\nf1 {}\n",
                        c.tp, c.fp, c.fn_, report.precision, report.recall, report.f1
                    )
                }
            };
            emit(cli, &text)?;
            for e in &data.errors {
                eprintln!("error {}: {}", e.id, e.message);
            }
            Ok(if data.errors.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Strip { path } => {
            let opts = ParseOptions {
                relaxed_pragma: config.relaxed_pragma,
            };
            map_files(cli, path, |_, text| {
                Ok(strip_openmp(&SourceUnit::with_options(text, opts)).text().to_string())
            })
        }
        Command::Annotate { path } => {
            let vocab = match &config.tag_vocabulary {
                Some(p) => TagVocabulary::load(p).map_err(config_err)?,
                None => TagVocabulary::builtin(),
            };
            let files = source_files(path)?;
            let lines = pool(cli)?.install(|| {
                files
                    .par_iter()
                    .map(|f| {
                        let text = read(f)?;
                        let unit = SourceUnit::with_options(
                            text,
                            ParseOptions {
                                relaxed_pragma: config.relaxed_pragma,
                            },
                        );
                        Ok(format_tags(&ssa_annotate(&unit, &vocab)))
                    })
                    .collect::<Result<Vec<_>, Failure>>()
            })?;
            let mut out = String::new();
            for l in lines {
                out += &l;
                out.push('\n');
            }
            emit(cli, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Corrupt {
            path,
            seed,
            step,
            schedule,
        } => {
            let schedule = match schedule {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .with_context(|| format!("cannot read {}", p.display()))
                        .map_err(config_err)?;
                    toml::from_str::<NoiseSchedule>(&text)
                        .with_context(|| format!("cannot parse {}", p.display()))
                        .map_err(config_err)?
                }
                None => NoiseSchedule::default(),
            };
            schedule.validate().map_err(config_err)?;
            let single = path.is_file();
            map_files(cli, path, |rel, text| {
                let s = if single { *seed } else { file_seed(*seed, rel) };
                corrupt(text, &schedule, *step, s).map(|o| o.text).map_err(eval_err)
            })
        }
        Command::CompileCheck { path } => {
            let compiler = Compiler::new(config.compile.clone()).map_err(config_err)?;
            let files = source_files(path)?;
            let results = pool(cli)?.install(|| {
                files
                    .par_iter()
                    .map(|f| {
                        let r = compiler.compile_score(&read(f)?).map_err(eval_err)?;
                        Ok((f.clone(), r))
                    })
                    .collect::<Result<Vec<_>, Failure>>()
            })?;
            let text = match cli.emit {
                Emit::Json => {
                    let rows: Vec<_> = results
                        .iter()
                        .map(|(f, r)| serde_json::json!({"path": f.display().to_string(), "result": r}))
                        .collect();
                    to_json(&rows)?
                }
                Emit::Csv | Emit::Table => {
                    let mut out = String::from("path,score\n");
                    for (f, r) in &results {
                        out += &format!("{},{}\n", f.display(), r.score);
                    }
                    out
                }
            };
            emit(cli, &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn pool(cli: &Cli) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(eval_err)
}

const SOURCE_EXTENSIONS: &[&str] = &["c", "h", "cc", "cpp", "cxx", "hpp", "hh", "hxx"];

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else if p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// `path` itself, or every C/C++ source below it in sorted order.
fn source_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(eval_err(anyhow!("{} does not exist", path.display())));
    }
    let mut files = Vec::new();
    walk(path, &mut files)
        .with_context(|| format!("cannot list {}", path.display()))
        .map_err(eval_err)?;
    Ok(files)
}

/// Transform one file (to `--out` or stdout) or a tree (mirrored under `--out`).
fn map_files<F>(cli: &Cli, path: &Path, f: F) -> Result<ExitCode, Failure>
where
    F: Fn(&str, &str) -> Result<String, Failure> + Sync,
{
    if path.is_file() {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = f(&name, &read(path)?)?;
        emit(cli, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    let Some(out_dir) = &cli.out else {
        return Err(config_err(anyhow!(
            "--out DIR is required when the input is a directory"
        )));
    };
    let files = source_files(path)?;
    if files.is_empty() {
        return Err(eval_err(anyhow!("no C/C++ sources under {}", path.display())));
    }
    pool(cli)?.install(|| {
        files.par_iter().try_for_each(|file| {
            let rel = file.strip_prefix(path).expect("walked below the root");
            let text = f(&rel.to_string_lossy(), &read(file)?)?;
            let dest = out_dir.join(rel);
            if dest == *file {
                return Err(eval_err(anyhow!("refusing to overwrite input {}", file.display())));
            }
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("cannot create {}", parent.display()))
                    .map_err(eval_err)?;
            }
            std::fs::write(&dest, text)
                .with_context(|| format!("cannot write {}", dest.display()))
                .map_err(eval_err)
        })
    })?;
    Ok(ExitCode::SUCCESS)
}
