//! Command-line front end: `ingest`, `reconstruct`, `matrix`, `query`,
//! `checksums`, `verify` and `regen` subcommands over the core library.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tracerec_core::adapters::{AdapterError, IngestMode};
use tracerec_core::pipeline::{PipelineConfig, DEFAULT_STATE_MUTATION_REGEX};
use tracerec_core::provenance::{self, ProvGraph, QueryPattern};
use tracerec_core::repro::{self, VerifyStatus};

#[derive(Parser)]
#[command(name = "tracerec", version)]
#[command(about = "Deterministic reconstruction of agent decision evidence from runtime traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Parse a regime's native anchor file into the normalized fragments file
    Ingest {
        /// Adapter id (bedrock, langsmith, anthropic, openai_agents, otlp,
        /// mcp, generic_jsonl) or `replit-manifest` for pre-built manifests
        #[arg(long)]
        adapter: String,
        /// Native anchor file
        #[arg(long)]
        input: PathBuf,
        /// Mapping config (generic_jsonl only)
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Output fragments file
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct decision units from a fragments file and write the
    /// per-anchor report directory (feasibility.json, trace.jsonld)
    Reconstruct {
        #[arg(long)]
        fragments: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Aggregate per-anchor reports into the cross-regime matrix and
    /// render table2.md, table3.md and partition.json
    Matrix {
        /// Directory holding <regime>/feasibility.json report dirs
        #[arg(long)]
        reports: PathBuf,
        /// Column spec JSON
        #[arg(long)]
        columns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Compare rendered artifacts byte-for-byte against a baseline
        /// directory; exit 1 on any diff
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Run one of the canned evidence queries against a trace.jsonld
    /// graph, printing one node id per line
    Query {
        #[arg(long)]
        graph: PathBuf,
        /// action_to_authorizer | action_to_policy | action_to_operator
        #[arg(long)]
        pattern: String,
    },
    /// Write a shasum-compatible checksums file over the given paths
    Checksums {
        /// Tree root that paths are relative to
        #[arg(long, default_value = ".")]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Files or directories (relative to --base); defaults to the
        /// standard pinned set
        paths: Vec<String>,
    },
    /// Recompute every pinned hash; exit 0 only if the whole tree is intact
    Verify {
        #[arg(long, default_value = ".")]
        base: PathBuf,
        #[arg(long, default_value = repro::MANIFEST_FILE)]
        manifest: PathBuf,
        #[arg(long, default_value = repro::CHECKSUMS_FILE)]
        checksums: PathBuf,
    },
    /// Regenerate every committed output from the fixture corpus using
    /// the manifest's verbatim invocations, then re-verify
    Regen {
        #[arg(long, default_value = ".")]
        base: PathBuf,
    },
}

#[derive(Args)]
pub struct PipelineArgs {
    /// How many adjacent units merge into one decision unit
    #[arg(long, default_value_t = 1)]
    pub within_stack_tier: u32,
    /// Regex tagging mutating tool calls
    #[arg(long, default_value = DEFAULT_STATE_MUTATION_REGEX)]
    pub state_mutation_regex: String,
    /// Multi-agent assembly is outside this pilot; must stay true
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub single_agent: bool,
}

impl PipelineArgs {
    fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            single_agent: self.single_agent,
            within_stack_tier: self.within_stack_tier,
            state_mutation_regex: self.state_mutation_regex.clone(),
        }
    }
}

/// Exit codes: 0 success; 2 malformed input / unknown record kind /
/// unusable flags; 3 empty anchor; 1 everything else.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.exit_code() == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    let adapter_error = err.downcast_ref::<AdapterError>().or_else(|| {
        err.downcast_ref::<repro::ReproError>()
            .and_then(|e| match e {
                repro::ReproError::Adapter(inner) => Some(inner),
                _ => None,
            })
    });
    match adapter_error {
        Some(AdapterError::MalformedInput { .. })
        | Some(AdapterError::UnknownRecordKind { .. })
        | Some(AdapterError::InvalidMapping(_))
        | Some(AdapterError::Model(_)) => 2,
        Some(AdapterError::EmptyAnchor) => 3,
        None => 1,
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Ingest {
            adapter,
            input,
            mapping,
            out,
        } => ingest(&adapter, &input, mapping.as_deref(), &out),
        Command::Reconstruct {
            fragments,
            out_dir,
            pipeline,
        } => reconstruct(&fragments, &out_dir, &pipeline.to_config()),
        Command::Matrix {
            reports,
            columns,
            out,
            check,
        } => matrix(&reports, &columns, &out, check.as_deref()),
        Command::Query { graph, pattern } => query(&graph, &pattern),
        Command::Checksums { base, out, paths } => checksums(&base, &out, paths),
        Command::Verify {
            base,
            manifest,
            checksums,
        } => verify(&base, &manifest, &checksums),
        Command::Regen { base } => regen(&base),
    }
}

fn ingest(adapter: &str, input: &Path, mapping: Option<&Path>, out: &Path) -> Result<i32> {
    let mode = IngestMode::from_str(adapter)?;
    repro::ingest_to_file(
        Path::new(""),
        mode,
        &input.to_string_lossy(),
        mapping.map(|p| p.to_string_lossy().into_owned()).as_deref(),
        &out.to_string_lossy(),
    )?;
    println!("wrote {}", out.display());
    Ok(0)
}

fn reconstruct(fragments: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<i32> {
    repro::reconstruct_to_dir(
        Path::new(""),
        &fragments.to_string_lossy(),
        &out_dir.to_string_lossy(),
        config,
    )?;
    println!(
        "wrote {} and {}",
        out_dir.join("feasibility.json").display(),
        out_dir.join("trace.jsonld").display()
    );
    Ok(0)
}

fn matrix(reports: &Path, columns: &Path, out: &Path, check: Option<&Path>) -> Result<i32> {
    repro::run_matrix(
        Path::new(""),
        &reports.to_string_lossy(),
        &columns.to_string_lossy(),
        &out.to_string_lossy(),
    )?;
    println!("wrote matrix artifacts to {}", out.display());
    let Some(baseline) = check else {
        return Ok(0);
    };
    let mut diffs = Vec::new();
    for name in ["table2.md", "table3.md", "partition.json"] {
        let rendered =
            fs::read(out.join(name)).with_context(|| format!("cannot read rendered {name}"))?;
        let expected = fs::read(baseline.join(name))
            .with_context(|| format!("cannot read baseline {name}"))?;
        if rendered != expected {
            diffs.push(name);
        }
    }
    if diffs.is_empty() {
        println!("baseline check: ok");
        Ok(0)
    } else {
        for name in &diffs {
            eprintln!("baseline check: `{name}` differs");
        }
        Ok(1)
    }
}

fn query(graph_path: &Path, pattern: &str) -> Result<i32> {
    let pattern = QueryPattern::from_str(pattern)?;
    let raw = fs::read(graph_path)
        .with_context(|| format!("cannot read graph {}", graph_path.display()))?;
    let graph = ProvGraph::from_jsonld(&raw)?;
    for node in provenance::query(&graph, pattern) {
        println!("{node}");
    }
    Ok(0)
}

fn checksums(base: &Path, out: &Path, paths: Vec<String>) -> Result<i32> {
    let roots = if paths.is_empty() {
        vec![
            "fixtures".to_string(),
            "queries".to_string(),
            "out".to_string(),
            repro::MANIFEST_FILE.to_string(),
        ]
    } else {
        paths
    };
    let files = repro::collect_files(base, &roots)?;
    if files.is_empty() {
        bail!("no files to checksum under {}", base.display());
    }
    let bytes = repro::write_checksums(base, &files)?;
    fs::write(out, &bytes).with_context(|| format!("cannot write {}", out.display()))?;
    println!("pinned {} files into {}", files.len(), out.display());
    Ok(0)
}

fn verify(base: &Path, manifest_path: &Path, checksums_path: &Path) -> Result<i32> {
    let manifest = repro::OriginManifest::load(&base.join(manifest_path))?;
    let checksums_file = base.join(checksums_path);
    let checksums_text = fs::read_to_string(&checksums_file)
        .with_context(|| format!("cannot read {}", checksums_file.display()))?;
    let report = repro::verify(base, &manifest, &checksums_text)?;
    print_verification(&report);
    Ok(if report.all_ok() { 0 } else { 1 })
}

fn print_verification(report: &repro::VerificationReport) {
    for entry in &report.entries {
        let status = match entry.status {
            VerifyStatus::Ok => "ok",
            VerifyStatus::Mismatch => "MISMATCH",
            VerifyStatus::Missing => "MISSING",
        };
        println!("{status:>8}  {}", entry.path);
    }
    let failures = report.failures().count();
    if failures == 0 {
        println!("verification: all {} paths ok", report.entries.len());
    } else {
        println!(
            "verification: {failures} of {} paths failed",
            report.entries.len()
        );
    }
}

fn regen(base: &Path) -> Result<i32> {
    println!("regeneration started at {}", repro::run_timestamp());
    let report = repro::regenerate_all(base)?;
    for stage in &report.stages {
        println!(
            "stage {:<40} {} files changed",
            stage.stage, stage.files_changed
        );
    }
    println!("{} files changed", report.files_changed);
    print_verification(&report.verification);
    Ok(if report.verification.all_ok() { 0 } else { 1 })
}
