//! Invariant suites behind `affinity verify`. Each check reports the
//! measured quantity next to its tolerance.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::affinity::{tetali_hitting_time, AffinityTable, HittingTimeQuery, ResistanceTable};
use crate::embedding::{exact_embedding, sketched_embedding, SketchParams};
use crate::error::{AffinityError, Result};
use crate::expressivity::{counterexample_witness, expressivity_report};
use crate::graph::Graph;
use crate::lapsolve::SolverConfig;
use crate::oracle::{figure1_fixture, random_connected_graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Jl,
    Theorem4,
    Expressivity,
    All,
}

impl FromStr for Suite {
    type Err = AffinityError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemmas" => Ok(Suite::Lemmas),
            "jl" => Ok(Suite::Jl),
            "theorem4" => Ok(Suite::Theorem4),
            "expressivity" => Ok(Suite::Expressivity),
            "all" => Ok(Suite::All),
            other => Err(AffinityError::InvalidConfig(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { suite, name: name.into(), measured, tolerance, passed: measured <= tolerance }
    }

    fn at_least(suite: &'static str, name: impl Into<String>, measured: f64, floor: f64) -> Self {
        Check { suite, name: name.into(), measured, tolerance: floor, passed: measured >= floor }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<13} {:<44} measured={:.3e} bound={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

fn corpus(seed: u64, count: u64, sizes: (usize, usize)) -> Result<Vec<Graph>> {
    (0..count)
        .map(|i| {
            let span = (sizes.1 - sizes.0 + 1) as u64;
            let n = sizes.0 + ((seed.wrapping_mul(31).wrapping_add(i * 7)) % span) as usize;
            random_connected_graph(n, 4.0, (0.1, 10.0), seed.wrapping_add(i))
        })
        .collect()
}

fn lemmas(seed: u64, cfg: &SolverConfig) -> Result<Vec<Check>> {
    let mut distance_gap: f64 = 0.0;
    let mut commute: f64 = 0.0;
    let mut triple: f64 = 0.0;
    let mut centered_excess: f64 = f64::NEG_INFINITY;
    for g in corpus(seed, 20, (8, 32))? {
        let n = g.num_nodes();
        let res = ResistanceTable::exact(&g, cfg)?;
        let emb = exact_embedding(&g, cfg)?;
        let table = AffinityTable::exact(&g, cfg)?;
        let pi = g.stationary_distribution();
        let query = HittingTimeQuery::new(&emb, &g)?;
        let m = g.total_weight();
        for u in 0..n {
            let d2: f64 = emb.vector(u).iter().zip(&emb.mean).map(|(a, b)| (a - b) * (a - b)).sum();
            centered_excess = centered_excess.max(d2 - table.h_max / m);
            for v in 0..n {
                if u == v {
                    continue;
                }
                distance_gap = distance_gap.max((emb.squared_distance(u, v) - res.get(u, v)).abs());
                commute = commute.max((table.hit(u, v) + table.hit(v, u) - 2.0 * m * res.get(u, v)).abs());
                let h = table.hit(u, v);
                let a = query.hitting_time(u, v)?;
                let b = tetali_hitting_time(&g, &res, &pi, u, v)?;
                triple = triple.max((h - a).abs()).max((h - b).abs()).max((a - b).abs());
            }
        }
    }
    Ok(vec![
        Check::at_most("lemmas", "embedding distance = resistance", distance_gap, 1e-8),
        Check::at_most("lemmas", "commute time = 2M resistance", commute, 1e-7),
        Check::at_most("lemmas", "three hitting-time formulas agree", triple, 1e-6),
        Check::at_most("lemmas", "|r_u - p|^2 - H_max/M", centered_excess, 1e-9),
    ])
}

fn jl(seed: u64, cfg: &SolverConfig) -> Result<Vec<Check>> {
    let eps = 0.25;
    let mut worst: f64 = 0.0;
    for g in corpus(seed, 5, (40, 120))? {
        let res = ResistanceTable::exact(&g, cfg)?;
        for s in 0..5 {
            let emb = sketched_embedding(&g, &SketchParams::new(eps, seed.wrapping_add(s)), cfg)?;
            for e in g.edges() {
                let r = res.get(e.u, e.v);
                worst = worst.max((emb.squared_distance(e.u, e.v) / r - 1.0).abs());
            }
        }
    }
    Ok(vec![Check::at_most("jl", format!("edge resistance relative error, eps={eps}"), worst, 3.0 * eps)])
}

fn theorem4(seed: u64, cfg: &SolverConfig) -> Result<Vec<Check>> {
    let graphs = corpus(seed, 3, (30, 80))?;
    let exact: Vec<AffinityTable> = graphs.iter().map(|g| AffinityTable::exact(g, cfg)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for eps in [0.1, 0.25] {
        let (mut ok, mut runs) = (0usize, 0usize);
        for (g, table) in graphs.iter().zip(&exact) {
            for s in 0..5 {
                let emb = sketched_embedding(g, &SketchParams::new(eps, seed.wrapping_add(s)), cfg)?;
                let q = HittingTimeQuery::new(&emb, g)?;
                let mut err: f64 = 0.0;
                for u in 0..g.num_nodes() {
                    for v in 0..g.num_nodes() {
                        err = err.max((q.hitting_time(u, v)? - table.hit(u, v)).abs());
                    }
                }
                runs += 1;
                if err <= 3.0 * eps * table.h_max {
                    ok += 1;
                }
            }
        }
        out.push(Check::at_least(
            "theorem4",
            format!("runs with |H^-H| <= 3 eps H_max, eps={eps}"),
            ok as f64 / runs as f64,
            0.95,
        ));
    }
    Ok(out)
}

fn expressivity(cfg: &SolverConfig) -> Result<Vec<Check>> {
    let report = expressivity_report(&figure1_fixture(), cfg)?;
    let mut out = Vec::new();
    for (name, want) in [("plain", 1usize), ("resistance", 3), ("hitting", 3), ("embedding", 3)] {
        let got = report.variant(name).map_or(0, |v| v.num_classes);
        out.push(Check {
            suite: "expressivity",
            name: format!("fixture classes with {name} refinement"),
            measured: got as f64,
            tolerance: want as f64,
            passed: got == want,
        });
    }
    let mut worst: f64 = 0.0;
    let mut witnessed = true;
    for k in 1..=6 {
        let w = counterexample_witness(k, cfg)?;
        witnessed &= w.wl_colors_identical && w.resistances_differ;
        let n = (4 * k + 1) as f64;
        for (j, &i) in w.ball.iter().enumerate() {
            let i = i as f64;
            worst = worst.max((w.cycle_resistance[j] - i * (n - i) / n).abs());
            worst = worst.max((w.path_resistance[j] - i.min(n - i)).abs());
        }
    }
    out.push(Check::at_most("expressivity", "cycle/path closed forms, k=1..6", worst, 1e-9));
    out.push(Check {
        suite: "expressivity",
        name: "k-round WL blind, resistances differ".into(),
        measured: witnessed as u8 as f64,
        tolerance: 1.0,
        passed: witnessed,
    });
    Ok(out)
}

/// Runs a suite; `seed` picks the random corpus and sketch seeds.
pub fn run_suite(suite: Suite, seed: u64, cfg: &SolverConfig) -> Result<Vec<Check>> {
    cfg.validate()?;
    Ok(match suite {
        Suite::Lemmas => lemmas(seed, cfg)?,
        Suite::Jl => jl(seed, cfg)?,
        Suite::Theorem4 => theorem4(seed, cfg)?,
        Suite::Expressivity => expressivity(cfg)?,
        Suite::All => {
            let mut all = lemmas(seed, cfg)?;
            all.extend(jl(seed, cfg)?);
            all.extend(theorem4(seed, cfg)?);
            all.extend(expressivity(cfg)?);
            all
        }
    })
}
