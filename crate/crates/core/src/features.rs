//! Export-ready affinity features: per-edge resistances and hitting-time
//! pairs, per-node and per-edge embedding vectors.
//!
//! Every family in one [`FeatureSet`] is derived from the same embedding
//! (exact, or a single sketch), so the families are mutually consistent.
//! The edge embedding of `(u, v)` is the difference `r_u − r_v`.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affinity::HittingTimeQuery;
use crate::binfmt;
use crate::embedding::{
    exact_embedding, random_rotation, sketched_embedding, EmbeddingKind, ResistiveEmbedding, SketchParams,
    DEFAULT_JL_CONSTANT,
};
use crate::error::{AffinityError, Result};
use crate::graph::Graph;
use crate::lapsolve::SolverConfig;

pub const EDGE_EMBEDDING_DEFINITION: &str = "difference r_u - r_v of endpoint embeddings, edge (u, v) with u < v";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureFamily {
    EdgeEr,
    EdgeHt,
    NodeEmbedding,
    EdgeEmbedding,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 4] =
        [FeatureFamily::EdgeEr, FeatureFamily::EdgeHt, FeatureFamily::NodeEmbedding, FeatureFamily::EdgeEmbedding];

    pub fn file_stem(self) -> &'static str {
        match self {
            FeatureFamily::EdgeEr => "edge_er",
            FeatureFamily::EdgeHt => "edge_ht",
            FeatureFamily::NodeEmbedding => "node_embedding",
            FeatureFamily::EdgeEmbedding => "edge_embedding",
        }
    }

    fn code(self) -> u32 {
        match self {
            FeatureFamily::EdgeEr => 1,
            FeatureFamily::EdgeHt => 2,
            FeatureFamily::NodeEmbedding => 3,
            FeatureFamily::EdgeEmbedding => 4,
        }
    }
}

impl FromStr for FeatureFamily {
    type Err = AffinityError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "er" | "edge-er" => Ok(FeatureFamily::EdgeEr),
            "ht" | "edge-ht" => Ok(FeatureFamily::EdgeHt),
            "node-emb" | "node-embedding" => Ok(FeatureFamily::NodeEmbedding),
            "edge-emb" | "edge-embedding" => Ok(FeatureFamily::EdgeEmbedding),
            other => Err(AffinityError::InvalidConfig(format!("unknown feature family `{other}`"))),
        }
    }
}

/// Parses a comma-separated family list such as `er,ht,node-emb`.
pub fn parse_families(list: &str) -> Result<Vec<FeatureFamily>> {
    let mut out: Vec<FeatureFamily> =
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverManifest {
    pub dense_threshold: usize,
    pub rel_tolerance: f64,
    pub max_iterations: Option<usize>,
    pub oracle_cap: usize,
}

impl From<&SolverConfig> for SolverManifest {
    fn from(c: &SolverConfig) -> Self {
        SolverManifest {
            dense_threshold: c.dense_threshold,
            rel_tolerance: c.rel_tolerance,
            max_iterations: c.max_iterations,
            oracle_cap: c.oracle_cap,
        }
    }
}

impl From<&SolverManifest> for SolverConfig {
    fn from(m: &SolverManifest) -> Self {
        SolverConfig {
            dense_threshold: m.dense_threshold,
            rel_tolerance: m.rel_tolerance,
            max_iterations: m.max_iterations,
            oracle_cap: m.oracle_cap,
        }
    }
}

/// Everything needed to regenerate a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub jl_constant: Option<f64>,
    pub solver: SolverManifest,
    pub rotation_seed: Option<u64>,
    pub families: Vec<FeatureFamily>,
    pub edge_embedding_definition: String,
}

/// Row-major `rows × dim` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub manifest: Manifest,
    /// Edge keys `(u, v)`, `u < v`, in graph order.
    pub edges: Vec<(usize, usize)>,
    pub edge_er: Option<Vec<f64>>,
    /// `(H_{u,v}, H_{v,u})` per edge.
    pub edge_ht: Option<Vec<(f64, f64)>>,
    pub node_embedding: Option<FeatureMatrix>,
    pub edge_embedding: Option<FeatureMatrix>,
}

/// Options for [`assemble_features`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    /// `None` selects the exact path (only under the oracle cap).
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub jl_constant: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions { epsilon: None, seed: 0, jl_constant: DEFAULT_JL_CONSTANT }
    }
}

/// Computes one embedding and derives every requested family from it.
pub fn assemble_features(
    g: &Graph,
    request: &[FeatureFamily],
    opts: &AssembleOptions,
    cfg: &SolverConfig,
) -> Result<FeatureSet> {
    if request.is_empty() {
        return Err(AffinityError::InvalidConfig("no feature families requested".into()));
    }
    let mut families = request.to_vec();
    families.sort();
    families.dedup();

    let emb = match opts.epsilon {
        Some(eps) => {
            let params = SketchParams { epsilon: eps, seed: opts.seed, jl_constant: opts.jl_constant };
            sketched_embedding(g, &params, cfg)?
        }
        None if g.num_nodes() <= cfg.oracle_cap => exact_embedding(g, cfg)?,
        None => {
            return Err(AffinityError::InvalidConfig(format!(
                "{} nodes exceeds the exact-path cap {}; an epsilon is required",
                g.num_nodes(),
                cfg.oracle_cap
            )))
        }
    };
    features_from_embedding(g, &emb, &families, cfg)
}

/// Derives the requested families from an existing embedding.
pub fn features_from_embedding(
    g: &Graph,
    emb: &ResistiveEmbedding,
    families: &[FeatureFamily],
    cfg: &SolverConfig,
) -> Result<FeatureSet> {
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let want = |f| families.contains(&f);

    let edge_er = want(FeatureFamily::EdgeEr).then(|| edges.iter().map(|&(u, v)| emb.squared_distance(u, v)).collect());
    let edge_ht = if want(FeatureFamily::EdgeHt) {
        let q = HittingTimeQuery::new(emb, g)?;
        Some(edges.iter().map(|&(u, v)| Ok((q.hitting_time(u, v)?, q.hitting_time(v, u)?))).collect::<Result<_>>()?)
    } else {
        None
    };
    let node_embedding = want(FeatureFamily::NodeEmbedding).then(|| FeatureMatrix {
        rows: emb.num_nodes(),
        dim: emb.dim(),
        data: emb.data().to_vec(),
    });
    let edge_embedding = want(FeatureFamily::EdgeEmbedding).then(|| {
        let mut data = Vec::with_capacity(edges.len() * emb.dim());
        for &(u, v) in &edges {
            data.extend(emb.vector(u).iter().zip(emb.vector(v)).map(|(a, b)| a - b));
        }
        FeatureMatrix { rows: edges.len(), dim: emb.dim(), data }
    });

    let mut fams = families.to_vec();
    fams.sort();
    fams.dedup();
    let manifest = Manifest {
        num_nodes: g.num_nodes(),
        num_edges: g.num_edges(),
        kind: emb.kind,
        dim: emb.dim(),
        epsilon: emb.epsilon,
        seed: emb.seed,
        jl_constant: emb.jl_constant,
        solver: SolverManifest::from(cfg),
        rotation_seed: None,
        families: fams,
        edge_embedding_definition: EDGE_EMBEDDING_DEFINITION.to_string(),
    };
    Ok(FeatureSet { manifest, edges, edge_er, edge_ht, node_embedding, edge_embedding })
}

/// Multiplies node and edge embeddings by one shared random rotation;
/// scalar families are left untouched.
pub fn augment_with_rotation(fs: &FeatureSet, rotation_seed: u64) -> Result<FeatureSet> {
    let dim = match (&fs.node_embedding, &fs.edge_embedding) {
        (Some(m), _) | (None, Some(m)) => m.dim,
        (None, None) => return Err(AffinityError::NoEmbeddingFamilies),
    };
    let rot = random_rotation(dim, rotation_seed)?;
    let rotate = |m: &FeatureMatrix| {
        let mut data = Vec::with_capacity(m.data.len());
        for i in 0..m.rows {
            data.extend(rot.apply(m.row(i)));
        }
        FeatureMatrix { rows: m.rows, dim: m.dim, data }
    };
    let mut out = fs.clone();
    out.node_embedding = fs.node_embedding.as_ref().map(rotate);
    out.edge_embedding = fs.edge_embedding.as_ref().map(rotate);
    out.manifest.rotation_seed = Some(rotation_seed);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Binary,
}

impl FromStr for ExportFormat {
    type Err = AffinityError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "binary" | "bin" => Ok(ExportFormat::Binary),
            other => Err(AffinityError::Format(format!("unknown export format `{other}`"))),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
            ExportFormat::Binary => "binary",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SideManifest {
    manifest: Manifest,
    edges: Vec<(usize, usize)>,
}

const JSON_FILE: &str = "features.json";
const MANIFEST_FILE: &str = "manifest.json";

/// 17 significant digits; parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes the set into `dir` and returns the files written.
///
/// * json: `features.json` with the manifest and all arrays.
/// * csv: one file per family plus `manifest.json`.
/// * binary: one `RESE` file per family plus `manifest.json`.
pub fn export_features(fs_: &FeatureSet, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format == ExportFormat::Json {
        let path = dir.join(JSON_FILE);
        let mut w = create(&path)?;
        serde_json::to_writer(&mut w, fs_)?;
        w.flush()?;
        written.push(path);
        return Ok(written);
    }

    let side = SideManifest { manifest: fs_.manifest.clone(), edges: fs_.edges.clone() };
    let path = dir.join(MANIFEST_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &side)?;
    w.flush()?;
    written.push(path);

    let flags_for = |fam: FeatureFamily| {
        let sketched = if fs_.manifest.kind == EmbeddingKind::Sketched { binfmt::FLAG_SKETCHED } else { 0 };
        sketched | (fam.code() << 8)
    };

    for fam in FeatureFamily::ALL {
        let (rows, dim, data): (usize, usize, Vec<f64>) = match fam {
            FeatureFamily::EdgeEr => match &fs_.edge_er {
                Some(v) => (v.len(), 1, v.clone()),
                None => continue,
            },
            FeatureFamily::EdgeHt => match &fs_.edge_ht {
                Some(v) => (v.len(), 2, v.iter().flat_map(|&(a, b)| [a, b]).collect()),
                None => continue,
            },
            FeatureFamily::NodeEmbedding => match &fs_.node_embedding {
                Some(m) => (m.rows, m.dim, m.data.clone()),
                None => continue,
            },
            FeatureFamily::EdgeEmbedding => match &fs_.edge_embedding {
                Some(m) => (m.rows, m.dim, m.data.clone()),
                None => continue,
            },
        };
        match format {
            ExportFormat::Binary => {
                let path = dir.join(format!("{}.bin", fam.file_stem()));
                binfmt::write_matrix(create(&path)?, rows, dim, flags_for(fam), &data)?;
                written.push(path);
            }
            ExportFormat::Csv => {
                let path = dir.join(format!("{}.csv", fam.file_stem()));
                let mut w = create(&path)?;
                let node_keyed = fam == FeatureFamily::NodeEmbedding;
                let header: Vec<String> = match fam {
                    FeatureFamily::EdgeEr => vec!["u".into(), "v".into(), "er".into()],
                    FeatureFamily::EdgeHt => vec!["u".into(), "v".into(), "h_uv".into(), "h_vu".into()],
                    FeatureFamily::NodeEmbedding => {
                        std::iter::once("node".to_string()).chain((0..dim).map(|i| format!("c{i}"))).collect()
                    }
                    FeatureFamily::EdgeEmbedding => ["u".to_string(), "v".to_string()]
                        .into_iter()
                        .chain((0..dim).map(|i| format!("c{i}")))
                        .collect(),
                };
                writeln!(w, "{}", header.join(","))?;
                for r in 0..rows {
                    let key = if node_keyed {
                        r.to_string()
                    } else {
                        let (u, v) = fs_.edges[r];
                        format!("{u},{v}")
                    };
                    let vals: Vec<String> = data[r * dim..(r + 1) * dim].iter().map(|&x| fmt_f64(x)).collect();
                    writeln!(w, "{key},{}", vals.join(","))?;
                }
                w.flush()?;
                written.push(path);
            }
            ExportFormat::Json => unreachable!(),
        }
    }
    Ok(written)
}

fn read_csv(path: &Path, key_cols: usize) -> Result<(Vec<Vec<usize>>, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| AffinityError::Format(format!("{}: empty file", path.display())))?;
    let cols = header.split(',').count();
    if cols <= key_cols {
        return Err(AffinityError::Parse { line: 1, msg: "header has no value columns".into() });
    }
    let dim = cols - key_cols;
    let mut keys = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(AffinityError::Parse { line: idx + 1, msg: format!("expected {cols} fields") });
        }
        let key: Vec<usize> = fields[..key_cols]
            .iter()
            .map(|f| f.parse().map_err(|_| AffinityError::Parse { line: idx + 1, msg: format!("bad key `{f}`") }))
            .collect::<Result<_>>()?;
        keys.push(key);
        for f in &fields[key_cols..] {
            data.push(f.parse().map_err(|_| AffinityError::Parse { line: idx + 1, msg: format!("bad value `{f}`") })?);
        }
    }
    Ok((keys, dim, data))
}

/// Reads a set written by [`export_features`].
pub fn import_features(format: ExportFormat, dir: &Path) -> Result<FeatureSet> {
    if format == ExportFormat::Json {
        let text = fs::read_to_string(dir.join(JSON_FILE))?;
        return Ok(serde_json::from_str(&text)?);
    }
    let side: SideManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let mut out = FeatureSet {
        manifest: side.manifest,
        edges: side.edges,
        edge_er: None,
        edge_ht: None,
        node_embedding: None,
        edge_embedding: None,
    };
    for fam in out.manifest.families.clone() {
        let (rows, dim, data) = match format {
            ExportFormat::Binary => {
                let m = binfmt::read_matrix(fs::File::open(dir.join(format!("{}.bin", fam.file_stem())))?)?;
                if (m.flags >> 8) != fam.code() {
                    return Err(AffinityError::Format(format!("{}: family code mismatch", fam.file_stem())));
                }
                (m.rows, m.dim, m.data)
            }
            ExportFormat::Csv => {
                let key_cols = if fam == FeatureFamily::NodeEmbedding { 1 } else { 2 };
                let (keys, dim, data) = read_csv(&dir.join(format!("{}.csv", fam.file_stem())), key_cols)?;
                if key_cols == 2 {
                    let matches = keys.len() == out.edges.len()
                        && keys.iter().zip(&out.edges).all(|(k, &(u, v))| k[0] == u && k[1] == v);
                    if !matches {
                        return Err(AffinityError::Format(format!(
                            "{}: edge keys disagree with manifest",
                            fam.file_stem()
                        )));
                    }
                }
                (keys.len(), dim, data)
            }
            ExportFormat::Json => unreachable!(),
        };
        match fam {
            FeatureFamily::EdgeEr => out.edge_er = Some(data),
            FeatureFamily::EdgeHt => {
                if dim != 2 {
                    return Err(AffinityError::Format("edge_ht must have two columns".into()));
                }
                out.edge_ht = Some(data.chunks_exact(2).map(|c| (c[0], c[1])).collect());
            }
            FeatureFamily::NodeEmbedding => out.node_embedding = Some(FeatureMatrix { rows, dim, data }),
            FeatureFamily::EdgeEmbedding => out.edge_embedding = Some(FeatureMatrix { rows, dim, data }),
        }
    }
    Ok(out)
}
