//! Phase orchestration: config, manifest, artifacts.
//!
//! The pipeline runs as separable phases — `index`, `candidates`, `gate`,
//! `cluster`, `parents`, `emit`, `stats` — each reading the previous
//! phase's artifact from the output directory and writing its own. A
//! manifest ties the artifacts together: it records the configuration
//! hash, the seed, and content digests of every input file. `index`
//! starts a fresh manifest; every later phase refuses to run if the
//! current configuration hashes differently ([`Error::ConfigMismatch`]),
//! if an artifact it needs is missing ([`Error::MissingArtifact`]), or if
//! an input file changed since indexing ([`Error::InputChanged`]) — so a
//! resumed pipeline can never silently mix artifacts from two different
//! runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{self, ClusterConfig};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::gate::{self, ConflictPolicy, GateConfig, TableScorer};
use crate::ivf::{self, IvfBuildParams, IvfIndex, SearchParams};
use crate::parent::{self, ParentDictionary};
use crate::quant::RangeMode;
use crate::stats;
use crate::types::{FinalCluster, RelationLabel, TermTable, VerifiedEdge};

fn default_sim_threshold() -> f64 {
    0.70
}
fn default_top_k() -> usize {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_synonym_confidence_threshold() -> f64 {
    0.70
}
fn default_intersection_ratio_threshold() -> f64 {
    0.51
}
fn default_scorer_default_label() -> RelationLabel {
    RelationLabel::Cohyponym
}
fn default_scorer_default_confidence() -> f64 {
    0.5
}
fn default_kmeans_iters() -> usize {
    20
}

/// Everything a pipeline run depends on. The hash of this struct (after
/// path resolution) is the run's identity; anything that can change the
/// output must live here, and anything that cannot (thread count) must
/// not.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Term list, one term per line; the line number minus one is the id.
    pub terms: PathBuf,
    /// Embedding matrix for the terms, row order matching the term list.
    pub embeddings: PathBuf,
    /// Relation judgments TSV for the gate.
    pub scorer_table: PathBuf,
    /// Optional list of preferred parent surface forms.
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    /// Directory all artifacts are written to.
    pub out_dir: PathBuf,

    /// Candidate pairs must score strictly above this cosine.
    #[serde(default = "default_sim_threshold")]
    pub sim_threshold: f64,
    /// Neighbors kept per query.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Index cell count; defaults to `ceil(4 * sqrt(count))`, clamped.
    #[serde(default)]
    pub nlist: Option<u32>,
    /// Cells probed per query; defaults to the full cell count, which
    /// makes search exact over the quantized vectors.
    #[serde(default)]
    pub nprobe: Option<u32>,
    #[serde(default = "default_seed")]
    pub seed: u64,

    /// Verified edges must end up strictly above this confidence.
    #[serde(default = "default_synonym_confidence_threshold")]
    pub synonym_confidence_threshold: f64,
    #[serde(default)]
    pub conflict_policy: ConflictPolicy,
    /// Judgment assumed for pairs the scorer table does not mention.
    #[serde(default = "default_scorer_default_label")]
    pub scorer_default_label: RelationLabel,
    #[serde(default = "default_scorer_default_confidence")]
    pub scorer_default_confidence: f64,

    #[serde(default = "default_intersection_ratio_threshold")]
    pub intersection_ratio_threshold: f64,
    /// Compare the join ratio with `>=` instead of `>`.
    #[serde(default)]
    pub inclusive_ratio: bool,

    /// Quantize with one range shared by all dimensions instead of
    /// per-dimension ranges.
    #[serde(default)]
    pub sq8_global_range: bool,
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_iters: usize,
    /// Also write the soft clustering state next to the hard clusters.
    #[serde(default)]
    pub soft_state_dump: bool,
}

impl PipelineConfig {
    /// Loads a JSON config, resolving relative paths against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.terms);
        resolve(&mut self.embeddings);
        resolve(&mut self.scorer_table);
        if let Some(d) = self.dictionary.as_mut() {
            resolve(d);
        }
        resolve(&mut self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig { msg });
        if !(-1.0..=1.0).contains(&self.sim_threshold) {
            return bad(format!("sim_threshold {} outside [-1, 1]", self.sim_threshold));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if self.nlist == Some(0) {
            return bad("nlist must be positive when set".into());
        }
        if self.nprobe == Some(0) {
            return bad("nprobe must be positive when set".into());
        }
        if !(0.0..=1.0).contains(&self.synonym_confidence_threshold) {
            return bad(format!(
                "synonym_confidence_threshold {} outside [0, 1]",
                self.synonym_confidence_threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.scorer_default_confidence) {
            return bad(format!(
                "scorer_default_confidence {} outside [0, 1]",
                self.scorer_default_confidence
            ));
        }
        if !(0.0..=1.0).contains(&self.intersection_ratio_threshold) {
            return bad(format!(
                "intersection_ratio_threshold {} outside [0, 1]",
                self.intersection_ratio_threshold
            ));
        }
        if self.kmeans_iters == 0 {
            return bad("kmeans_iters must be positive".into());
        }
        Ok(())
    }

    /// Hex digest identifying this exact configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config always serializes");
        hex_digest(json.as_bytes())
    }

    pub fn gate_config(&self) -> GateConfig {
        GateConfig {
            synonym_confidence_threshold: self.synonym_confidence_threshold,
            conflict_policy: self.conflict_policy,
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            intersection_ratio_threshold: self.intersection_ratio_threshold,
            inclusive_ratio: self.inclusive_ratio,
        }
    }

    pub fn build_params(&self) -> IvfBuildParams {
        IvfBuildParams {
            nlist: self.nlist,
            kmeans_iters: self.kmeans_iters,
            seed: self.seed,
            range_mode: if self.sq8_global_range {
                RangeMode::Global
            } else {
                RangeMode::PerDimension
            },
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.lxivf";
pub const CANDIDATES_FILE: &str = "candidates.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const HARD_CLUSTERS_FILE: &str = "hard_clusters.json";
pub const SOFT_STATE_FILE: &str = "soft_state.json";
pub const PARENTED_CLUSTERS_FILE: &str = "parented_clusters.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const STATS_FILE: &str = "stats.json";

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

/// Run identity and progress, written to `manifest.json` in the output
/// directory. Maps are sorted so the serialized form is byte-stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// Input name (`terms`, `embeddings`, `scorer_table`, `dictionary`)
    /// to content digest, recorded when `index` starts the run.
    pub inputs: BTreeMap<String, String>,
    /// Phase name to emitted row count, recorded as phases complete.
    pub phases: BTreeMap<String, u64>,
}

impl Manifest {
    fn path(config: &PipelineConfig) -> PathBuf {
        config.artifact(MANIFEST_FILE)
    }

    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let path = Self::path(config);
        if !path.exists() {
            return Err(Error::MissingArtifact { path });
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, 0, e.to_string()))
    }

    pub fn save(&self, config: &PipelineConfig) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest always serializes");
        crate::types::write_text(&Self::path(config), &format!("{json}\n"))
    }

    /// Loads the manifest and checks it belongs to this configuration.
    fn load_checked(config: &PipelineConfig) -> Result<Self> {
        let manifest = Self::load(config)?;
        let current = config.config_hash();
        if manifest.config_hash != current {
            return Err(Error::ConfigMismatch {
                current,
                recorded: manifest.config_hash,
            });
        }
        Ok(manifest)
    }

    /// Checks that a recorded input file still has the digest it had when
    /// the run was indexed.
    fn verify_input(&self, name: &str, path: &Path) -> Result<()> {
        let recorded = self.inputs.get(name).ok_or_else(|| Error::InputChanged {
            name: name.to_string(),
        })?;
        if file_digest(path)? != *recorded {
            return Err(Error::InputChanged {
                name: name.to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Index,
    Candidates,
    Gate,
    Cluster,
    Parents,
    Emit,
    Stats,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Index,
        Phase::Candidates,
        Phase::Gate,
        Phase::Cluster,
        Phase::Parents,
        Phase::Emit,
        Phase::Stats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Index => "index",
            Phase::Candidates => "candidates",
            Phase::Gate => "gate",
            Phase::Cluster => "cluster",
            Phase::Parents => "parents",
            Phase::Emit => "emit",
            Phase::Stats => "stats",
        }
    }
}

/// Human-readable final cluster: the parent plus all member surface
/// forms (parent included), in term-id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedCluster {
    pub cluster_id: u32,
    pub parent: String,
    pub members: Vec<String>,
}

fn require_artifact(path: PathBuf) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::MissingArtifact { path });
    }
    Ok(path)
}

fn load_terms(config: &PipelineConfig) -> Result<TermTable> {
    TermTable::load(&config.terms)
}

fn load_matrix(config: &PipelineConfig, table: &TermTable) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load(&config.embeddings, Some(table.len()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("artifacts always serialize");
    crate::types::write_text(path, &format!("{json}\n"))
}

fn run_index(config: &PipelineConfig) -> Result<u64> {
    let table = load_terms(config)?;
    let matrix = load_matrix(config, &table)?;
    let index = IvfIndex::build(&matrix, &config.build_params())?;
    index.save(&config.artifact(INDEX_FILE))?;

    let mut inputs = BTreeMap::new();
    inputs.insert("terms".to_string(), file_digest(&config.terms)?);
    inputs.insert("embeddings".to_string(), file_digest(&config.embeddings)?);
    inputs.insert(
        "scorer_table".to_string(),
        file_digest(&config.scorer_table)?,
    );
    if let Some(dict) = &config.dictionary {
        inputs.insert("dictionary".to_string(), file_digest(dict)?);
    }
    let rows = index.count() as u64;
    let mut phases = BTreeMap::new();
    phases.insert(Phase::Index.name().to_string(), rows);
    // A fresh manifest: any artifacts from earlier runs are now orphaned
    // and unreachable through the phase checks.
    Manifest {
        config_hash: config.config_hash(),
        seed: config.seed,
        inputs,
        phases,
    }
    .save(config)?;
    Ok(rows)
}

fn run_candidates(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    manifest.verify_input("terms", &config.terms)?;
    manifest.verify_input("embeddings", &config.embeddings)?;
    let table = load_terms(config)?;
    let matrix = load_matrix(config, &table)?;
    let index = IvfIndex::load(&require_artifact(config.artifact(INDEX_FILE))?)?;
    let params = SearchParams {
        top_k: config.top_k,
        nprobe: config.nprobe.unwrap_or_else(|| index.nlist()),
        sim_threshold: config.sim_threshold,
    };
    let candidates = ivf::generate_candidates(&index, &matrix, &params)?;
    ivf::write_candidates(&config.artifact(CANDIDATES_FILE), &candidates)?;
    let rows = candidates.len() as u64;
    manifest
        .phases
        .insert(Phase::Candidates.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

fn run_gate(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    manifest.verify_input("terms", &config.terms)?;
    manifest.verify_input("scorer_table", &config.scorer_table)?;
    let table = load_terms(config)?;
    let scorer = TableScorer::load(
        &config.scorer_table,
        &table,
        config.scorer_default_label,
        config.scorer_default_confidence,
    )?;
    let candidates =
        ivf::read_candidates(&require_artifact(config.artifact(CANDIDATES_FILE))?)?;
    let edges = gate::gate_candidates(&candidates, &scorer, &config.gate_config())?;
    gate::write_edges(&config.artifact(EDGES_FILE), &edges)?;
    let rows = edges.len() as u64;
    manifest.phases.insert(Phase::Gate.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

fn run_cluster(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    let edges: Vec<VerifiedEdge> =
        gate::read_edges(&require_artifact(config.artifact(EDGES_FILE))?)?;
    let state = cluster::expand(&edges, &config.cluster_config());
    if config.soft_state_dump {
        write_json(&config.artifact(SOFT_STATE_FILE), &state)?;
    }
    let adjacency = cluster::AdjacencyMap::from_edges(&edges);
    let clusters = cluster::reduce(&state, &adjacency);
    write_json(&config.artifact(HARD_CLUSTERS_FILE), &clusters)?;
    let rows = clusters.len() as u64;
    manifest
        .phases
        .insert(Phase::Cluster.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

fn run_parents(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    manifest.verify_input("terms", &config.terms)?;
    manifest.verify_input("embeddings", &config.embeddings)?;
    let table = load_terms(config)?;
    let matrix = load_matrix(config, &table)?;
    let dictionary = match &config.dictionary {
        Some(path) => {
            manifest.verify_input("dictionary", path)?;
            Some(ParentDictionary::load(path)?)
        }
        None => None,
    };
    let clusters: Vec<Vec<crate::types::TermId>> =
        read_json(&require_artifact(config.artifact(HARD_CLUSTERS_FILE))?)?;
    let parented = parent::assign_parents(&clusters, &matrix, &table, dictionary.as_ref())?;
    write_json(&config.artifact(PARENTED_CLUSTERS_FILE), &parented)?;
    let rows = parented.len() as u64;
    manifest
        .phases
        .insert(Phase::Parents.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

fn run_emit(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    manifest.verify_input("terms", &config.terms)?;
    let table = load_terms(config)?;
    let parented: Vec<FinalCluster> =
        read_json(&require_artifact(config.artifact(PARENTED_CLUSTERS_FILE))?)?;
    let emitted = emit_clusters(&parented, &table)?;
    write_json(&config.artifact(CLUSTERS_FILE), &emitted)?;
    let rows = emitted.len() as u64;
    manifest.phases.insert(Phase::Emit.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

fn run_stats(config: &PipelineConfig) -> Result<u64> {
    let mut manifest = Manifest::load_checked(config)?;
    manifest.verify_input("terms", &config.terms)?;
    let table = load_terms(config)?;
    let parented: Vec<FinalCluster> =
        read_json(&require_artifact(config.artifact(PARENTED_CLUSTERS_FILE))?)?;
    let stats = stats::compute_stats(&parented, table.len())?;
    stats::write_stats(&config.artifact(STATS_FILE), &stats)?;
    let rows = stats.cluster_count as u64;
    manifest
        .phases
        .insert(Phase::Stats.name().to_string(), rows);
    manifest.save(config)?;
    Ok(rows)
}

/// Resolves term ids to surface forms for the final artifact. Clusters
/// arrive ordered by id with sorted members; the parent's surface form
/// also appears in the member list.
pub fn emit_clusters(
    parented: &[FinalCluster],
    table: &TermTable,
) -> Result<Vec<EmittedCluster>> {
    parented
        .iter()
        .map(|c| {
            let members = c
                .members
                .iter()
                .map(|&m| table.term(m).map(str::to_string))
                .collect::<Result<Vec<String>>>()?;
            let parent = table.term(c.parent).map(str::to_string)?;
            Ok(EmittedCluster {
                cluster_id: c.cluster_id,
                parent,
                members,
            })
        })
        .collect()
}

/// Runs one phase and returns its row count.
pub fn run_phase(config: &PipelineConfig, phase: Phase) -> Result<u64> {
    match phase {
        Phase::Index => run_index(config),
        Phase::Candidates => run_candidates(config),
        Phase::Gate => run_gate(config),
        Phase::Cluster => run_cluster(config),
        Phase::Parents => run_parents(config),
        Phase::Emit => run_emit(config),
        Phase::Stats => run_stats(config),
    }
}

/// Runs every phase in order, returning each phase's row count.
pub fn run_all(config: &PipelineConfig) -> Result<Vec<(Phase, u64)>> {
    Phase::ALL
        .iter()
        .map(|&phase| run_phase(config, phase).map(|rows| (phase, rows)))
        .collect()
}
