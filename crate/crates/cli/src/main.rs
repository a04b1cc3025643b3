//! Command-line front end for the clustering pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use lexcluster::cluster::ClusterConfig;
use lexcluster::eval::{self, SyntheticSpec};
use lexcluster::gate::ConflictPolicy;
use lexcluster::pipeline::{run_all, run_phase, Phase, PipelineConfig};

/// Antonym-free synonym clusters from term embeddings.
///
/// The pipeline indexes embeddings, proposes cosine candidates, gates them
/// through a relation scorer, grows drift-controlled clusters, and picks a
/// parent term per cluster. Each phase persists its artifact in the
/// configured output directory and can be rerun independently.
#[derive(Parser)]
#[command(name = "lexcluster", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline configuration (JSON). Required by every pipeline phase.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. Affects speed only, never output.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured index cell count.
    #[arg(long, global = true)]
    nlist: Option<u32>,

    /// Override how many cells each query probes.
    #[arg(long, global = true)]
    nprobe: Option<u32>,

    /// Override the candidate cosine threshold.
    #[arg(long, global = true)]
    sim_threshold: Option<f64>,

    /// Override how many neighbors each query keeps.
    #[arg(long, global = true)]
    top_k: Option<usize>,

    /// Override the gate's synonym confidence threshold.
    #[arg(long, global = true)]
    synonym_confidence_threshold: Option<f64>,

    /// Override the cluster-join intersection ratio threshold.
    #[arg(long, global = true)]
    intersection_ratio_threshold: Option<f64>,

    /// Compare the join ratio with >= instead of >.
    #[arg(long, global = true)]
    inclusive_ratio: bool,

    /// Override the reverse-judgment policy:
    /// reverse-antonym-veto or require-mutual-synonym.
    #[arg(long, global = true, value_parser = parse_policy)]
    conflict_policy: Option<ConflictPolicy>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vector index and start a fresh run manifest.
    Index,
    /// Propose candidate pairs by cosine similarity.
    Candidates,
    /// Keep only candidates the relation scorer verifies as synonyms.
    Gate,
    /// Grow drift-controlled clusters from the verified edges.
    Cluster,
    /// Pick each cluster's parent term.
    Parents,
    /// Write the final clusters with surface forms.
    Emit,
    /// Summarize cluster sizes and coverage.
    Stats,
    /// Run every phase in order.
    All,
    /// Generate a synthetic labeled graph and score contamination
    /// against a connected-components baseline.
    Eval {
        /// Synthetic graph spec (JSON).
        #[arg(long)]
        spec: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<ConflictPolicy, String> {
    match s {
        "reverse-antonym-veto" => Ok(ConflictPolicy::ReverseAntonymVeto),
        "require-mutual-synonym" => Ok(ConflictPolicy::RequireMutualSynonym),
        other => Err(format!(
            "unknown policy {other:?}; use reverse-antonym-veto or require-mutual-synonym"
        )),
    }
}

impl Cli {
    fn load_config(&self) -> Result<PipelineConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| anyhow!("this command needs --config <FILE>"))?;
        let mut config = PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?;
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.nlist {
            config.nlist = Some(v);
        }
        if let Some(v) = self.nprobe {
            config.nprobe = Some(v);
        }
        if let Some(v) = self.sim_threshold {
            config.sim_threshold = v;
        }
        if let Some(v) = self.top_k {
            config.top_k = v;
        }
        if let Some(v) = self.synonym_confidence_threshold {
            config.synonym_confidence_threshold = v;
        }
        if let Some(v) = self.intersection_ratio_threshold {
            config.intersection_ratio_threshold = v;
        }
        if self.inclusive_ratio {
            config.inclusive_ratio = true;
        }
        if let Some(v) = self.conflict_policy {
            config.conflict_policy = v;
        }
        config.validate()?;
        Ok(config)
    }

    fn eval_cluster_config(&self) -> ClusterConfig {
        let mut config = ClusterConfig::default();
        if let Some(v) = self.intersection_ratio_threshold {
            config.intersection_ratio_threshold = v;
        }
        if self.inclusive_ratio {
            config.inclusive_ratio = true;
        }
        config
    }
}

fn report_phase(phase: Phase, rows: u64) {
    println!("{}: {} rows", phase.name(), rows);
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let single = |phase: Phase| -> Result<()> {
        let config = cli.load_config()?;
        let rows = run_phase(&config, phase)?;
        report_phase(phase, rows);
        Ok(())
    };

    match &cli.command {
        Command::Index => single(Phase::Index),
        Command::Candidates => single(Phase::Candidates),
        Command::Gate => single(Phase::Gate),
        Command::Cluster => single(Phase::Cluster),
        Command::Parents => single(Phase::Parents),
        Command::Emit => single(Phase::Emit),
        Command::Stats => single(Phase::Stats),
        Command::All => {
            let config = cli.load_config()?;
            for (phase, rows) in run_all(&config)? {
                report_phase(phase, rows);
            }
            Ok(())
        }
        Command::Eval { spec } => {
            let text = std::fs::read_to_string(spec)
                .with_context(|| format!("reading spec {}", spec.display()))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)
                .with_context(|| "parsing the synthetic graph spec")?;
            let report = eval::run(&spec, &cli.eval_cluster_config())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
