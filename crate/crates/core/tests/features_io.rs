use std::fs;

use affinity_core::affinity::{AffinityTable, ResistanceTable};
use affinity_core::binfmt;
use affinity_core::features::{
    assemble_features, augment_with_rotation, export_features, import_features, AssembleOptions, ExportFormat,
    FeatureFamily, FeatureSet,
};
use affinity_core::lapsolve::SolverConfig;
use affinity_core::oracle::random_connected_graph;
use affinity_core::{AffinityError, Graph};

fn all_families() -> Vec<FeatureFamily> {
    FeatureFamily::ALL.to_vec()
}

fn sample_set(epsilon: Option<f64>) -> (Graph, FeatureSet) {
    let g = random_connected_graph(25, 4.0, (0.2, 5.0), 17).unwrap();
    let opts = AssembleOptions { epsilon, seed: 3, ..Default::default() };
    let fs = assemble_features(&g, &all_families(), &opts, &SolverConfig::default()).unwrap();
    (g, fs)
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-15 * a.abs().max(b.abs())
}

fn assert_close_sets(a: &FeatureSet, b: &FeatureSet) {
    assert_eq!(a.manifest, b.manifest);
    assert_eq!(a.edges, b.edges);
    let flat = |f: &FeatureSet| -> Vec<f64> {
        let mut v = f.edge_er.clone().unwrap_or_default();
        v.extend(f.edge_ht.iter().flatten().flat_map(|&(x, y)| [x, y]));
        v.extend(f.node_embedding.iter().flat_map(|m| m.data.clone()));
        v.extend(f.edge_embedding.iter().flat_map(|m| m.data.clone()));
        v
    };
    let (x, y) = (flat(a), flat(b));
    assert_eq!(x.len(), y.len());
    assert!(x.iter().zip(&y).all(|(p, q)| close(*p, *q)));
}

#[test]
fn exact_set_matches_direct_affinities() {
    let (g, fs) = sample_set(None);
    let cfg = SolverConfig::default();
    let res = ResistanceTable::exact(&g, &cfg).unwrap();
    let table = AffinityTable::exact(&g, &cfg).unwrap();
    let er = fs.edge_er.as_ref().unwrap();
    let ht = fs.edge_ht.as_ref().unwrap();
    for (i, &(u, v)) in fs.edges.iter().enumerate() {
        assert!((er[i] - res.get(u, v)).abs() <= 1e-8);
        assert!((ht[i].0 - table.hit(u, v)).abs() <= 1e-8 * table.h_max);
        assert!((ht[i].1 - table.hit(v, u)).abs() <= 1e-8 * table.h_max);
    }
    let node = fs.node_embedding.as_ref().unwrap();
    assert_eq!((node.rows, node.dim), (g.num_nodes(), g.num_edges()));
    let edge = fs.edge_embedding.as_ref().unwrap();
    assert_eq!(edge.rows, g.num_edges());
    assert!(fs.manifest.edge_embedding_definition.contains("r_u - r_v"));
}

#[test]
fn json_round_trip_is_exact() {
    let (_, fs) = sample_set(Some(0.3));
    let dir = tempfile::tempdir().unwrap();
    export_features(&fs, ExportFormat::Json, dir.path()).unwrap();
    assert_eq!(import_features(ExportFormat::Json, dir.path()).unwrap(), fs);
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let (_, fs) = sample_set(Some(0.3));
    let fs = augment_with_rotation(&fs, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_features(&fs, ExportFormat::Binary, dir.path()).unwrap();
    assert_eq!(files.len(), 5);
    assert_eq!(import_features(ExportFormat::Binary, dir.path()).unwrap(), fs);

    let header = binfmt::read_matrix(fs::File::open(dir.path().join("edge_ht.bin")).unwrap()).unwrap();
    assert_eq!((header.rows, header.dim), (fs.edges.len(), 2));
    assert_eq!(header.flags & binfmt::FLAG_SKETCHED, binfmt::FLAG_SKETCHED);
}

#[test]
fn csv_round_trip_to_full_precision() {
    let (_, fs) = sample_set(None);
    let dir = tempfile::tempdir().unwrap();
    export_features(&fs, ExportFormat::Csv, dir.path()).unwrap();
    let back = import_features(ExportFormat::Csv, dir.path()).unwrap();
    assert_close_sets(&fs, &back);
}

#[test]
fn triangle_csv_has_one_row_per_edge() {
    let g = Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let fs =
        assemble_features(&g, &[FeatureFamily::EdgeEr], &AssembleOptions::default(), &SolverConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_features(&fs, ExportFormat::Csv, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("edge_er.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u,v,er");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let x: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!((x - 2.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn corrupt_magic_is_rejected() {
    let (_, fs) = sample_set(Some(0.4));
    let dir = tempfile::tempdir().unwrap();
    export_features(&fs, ExportFormat::Binary, dir.path()).unwrap();
    let path = dir.path().join("node_embedding.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    assert!(matches!(import_features(ExportFormat::Binary, dir.path()), Err(AffinityError::Format(_))));
}

#[test]
fn swapped_family_files_are_rejected() {
    let (_, fs) = sample_set(Some(0.4));
    let dir = tempfile::tempdir().unwrap();
    export_features(&fs, ExportFormat::Binary, dir.path()).unwrap();
    fs::copy(dir.path().join("node_embedding.bin"), dir.path().join("edge_embedding.bin")).unwrap();
    assert!(import_features(ExportFormat::Binary, dir.path()).is_err());
}

#[test]
fn rotation_replays_bit_for_bit() {
    let (_, fs) = sample_set(Some(0.3));
    let a = augment_with_rotation(&fs, 77).unwrap();
    let b = augment_with_rotation(&fs, 77).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.node_embedding, fs.node_embedding);
    let ee = a.edge_embedding.as_ref().unwrap();
    let orig = fs.edge_embedding.as_ref().unwrap();
    for i in 0..ee.rows {
        let n1: f64 = ee.row(i).iter().map(|x| x * x).sum();
        let n0: f64 = orig.row(i).iter().map(|x| x * x).sum();
        assert!((n1 - n0).abs() < 1e-9);
    }
}

#[test]
fn manifest_regenerates_the_set() {
    let (g, fs) = sample_set(Some(0.25));
    let m = &fs.manifest;
    let opts = AssembleOptions { epsilon: m.epsilon, seed: m.seed.unwrap(), jl_constant: m.jl_constant.unwrap() };
    let cfg = SolverConfig::from(&m.solver);
    let again = assemble_features(&g, &m.families, &opts, &cfg).unwrap();
    assert_eq!(again, fs);
}
