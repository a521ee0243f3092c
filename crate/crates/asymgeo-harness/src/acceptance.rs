//! The twelve acceptance criteria, each with its tolerance pinned here.
//! Scaling criteria run the same experiments as `bench`; the rest compare
//! against brute-force oracles.

use anyhow::{anyhow, Result};
use asymgeo::aug_trees::{AlphaConfig, AugTree, IntervalTree, Point2, PriorityTree, RangeTree};
use asymgeo::delaunay::predicates::snap;
use asymgeo::delaunay::{validate_delaunay, DtBuilder};
use asymgeo::inc_sort::{incsort_naive, incsort_prefix_doubling, SortConfig};
use asymgeo::kd_tree::{build_batched, KdConfig, KdMode};
use asymgeo::rng::{mix64, seeded};
use asymgeo::trace_dag::check_traceable;
use asymgeo::CostMeter;
use rand::Rng;
use serde::Serialize;
use std::cell::Cell;

use crate::datasets;
use crate::experiments::{self, dt_points};
use crate::oracles;
use crate::report::{Experiment, Report};
use crate::verify::bbox;

pub const COUNT: u32 = 12;

const LADDER: [usize; 5] = [1 << 12, 1 << 13, 1 << 14, 1 << 15, 1 << 16];

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("{verdict} criterion {:>2} ({}): {}", self.id, self.name, self.detail)
    }
}

pub fn name(id: u32) -> &'static str {
    match id {
        1 => "oracle equivalence",
        2 => "delaunay validity",
        3 => "k-d build write linearity",
        4 => "post-sorted build write linearity",
        5 => "prefix-doubling write linearity",
        6 => "k-d height",
        7 => "range query scaling",
        8 => "labeling invariants",
        9 => "update write tradeoff",
        10 => "structural determinism",
        11 => "bulk and single insert equivalence",
        12 => "tracing soundness",
        _ => "unknown",
    }
}

pub fn run_criterion(id: u32, seed: u64) -> Result<Outcome> {
    let (pass, detail) = match id {
        1 => oracle_equivalence(seed)?,
        2 => delaunay_validity(seed)?,
        3 => kd_linearity(seed)?,
        4 => post_sorted_linearity(seed)?,
        5 => prefix_doubling_linearity(seed)?,
        6 => kd_height(seed)?,
        7 => range_scaling(seed)?,
        8 => labeling(seed)?,
        9 => update_tradeoff(seed)?,
        10 => determinism(seed)?,
        11 => bulk_equivalence(seed)?,
        12 => tracing(seed)?,
        _ => return Err(anyhow!("no criterion {id}; they are numbered 1 to {COUNT}")),
    };
    Ok(Outcome {
        id,
        name: name(id),
        pass,
        detail,
    })
}

fn bench(exp: Experiment) -> Result<Report> {
    experiments::run(&exp)
}

fn ladder() -> Vec<usize> {
    LADDER.to_vec()
}

fn oracle_equivalence(seed: u64) -> Result<(bool, String)> {
    const N: usize = 1000;
    const Q: usize = 100;
    let mut r = seeded(seed ^ 0x0c1e);
    let mut m = CostMeter::unbounded();
    let mut bad = 0;
    let mut total = 0;

    for k in [2, 3] {
        let pts = datasets::points(N, k, seed);
        let t = build_batched(&pts, &KdConfig::new(k).with_seed(seed), &mut m)?;
        for b in datasets::boxes(Q, &vec![0.0; k], &vec![1.0; k], seed ^ k as u64) {
            let got = oracles::sorted(t.range_query(&b.lo, &b.hi, &mut m)?.points.iter().map(|p| p.id));
            bad += (got != oracles::boxed(&pts, &b.lo, &b.hi)) as usize;
            total += 1;
        }
        let ann = build_batched(&pts, &KdConfig::new(k).with_mode(KdMode::Ann).with_seed(seed), &mut m)?;
        for eps in [0.0, 0.5] {
            for _ in 0..Q {
                let q: Vec<f64> = (0..k).map(|_| r.gen()).collect();
                let (_, d) = ann.ann_query(&q, eps, &mut m)?;
                bad += (d > (1.0 + eps) * oracles::nearest(&pts, &q) * (1.0 + 1e-12)) as usize;
                total += 1;
            }
        }
    }

    let cfg = AlphaConfig::new(4).map_err(|e| anyhow!("{e}"))?;
    let ivs = datasets::intervals(N, 0.05, seed);
    let it = IntervalTree::build(&ivs, cfg, &mut m).map_err(|e| anyhow!("{e}"))?;
    let pts = datasets::points2(N, seed);
    let pt = PriorityTree::build(&pts, cfg, &mut m).map_err(|e| anyhow!("{e}"))?;
    let rt = RangeTree::build(&pts, cfg, &mut m).map_err(|e| anyhow!("{e}"))?;
    for _ in 0..Q {
        let q: f64 = r.gen();
        bad += (oracles::sorted(it.stab(q, &mut m).iter().map(|iv| iv.id)) != oracles::stab(&ivs, q)) as usize;
        let (a, b, c, d): (f64, f64, f64, f64) = (r.gen(), r.gen(), r.gen(), r.gen());
        let (x1, x2, y1, y2) = (a.min(b), a.max(b), c.min(d), c.max(d));
        bad += (oracles::sorted(rt.range2d_query(x1, x2, y1, y2, &mut m).iter().map(|p| p.id))
            != oracles::range2(&pts, x1, x2, y1, y2)) as usize;
        bad += (oracles::sorted(pt.three_sided_query(x1, x2, y1, &mut m).iter().map(|p| p.id))
            != oracles::three_sided(&pts, x1, x2, y1)) as usize;
        total += 3;
    }
    Ok((bad == 0, format!("{bad} mismatches in {total} queries")))
}

fn delaunay_validity(seed: u64) -> Result<(bool, String)> {
    const N: usize = 500;
    const MAX_MEAN: f64 = 7.0;
    let pts = dt_points(N, seed);
    let b = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded())?;
    let valid = validate_delaunay(b.mesh(), &pts);
    let locs = b.locates();
    let mean = locs.iter().map(|s| s.reported as f64).sum::<f64>() / locs.len().max(1) as f64;
    Ok((
        valid && mean <= MAX_MEAN,
        format!("valid {valid}, mean encroached set {mean:.3} over {} traced points (limit {MAX_MEAN})", locs.len()),
    ))
}

fn kd_linearity(seed: u64) -> Result<(bool, String)> {
    const BATCHED: f64 = 0.20;
    const CLASSIC: f64 = 0.15;
    let b = bench(Experiment::new("kd-build", ladder()).with("seed", seed))?;
    let c = bench(Experiment::new("kd-classic", ladder()).with("seed", seed))?;
    let sb = b.summary["spread_writes_per_n"];
    let sc = c.summary["spread_writes_per_nlogn"];
    Ok((
        sb < BATCHED && sc < CLASSIC,
        format!("batched writes/n spread {sb:.3} (< {BATCHED}), classic writes/(n lg n) spread {sc:.3} (< {CLASSIC})"),
    ))
}

fn post_sorted_linearity(seed: u64) -> Result<(bool, String)> {
    const LIMIT: f64 = 0.15;
    let mut pass = true;
    let mut parts = Vec::new();
    for subject in ["interval-build", "priority-build"] {
        let s = bench(Experiment::new(subject, ladder()).with("seed", seed))?.summary["spread_writes_per_n"];
        pass &= s < LIMIT;
        parts.push(format!("{subject} writes/n spread {s:.3}"));
    }
    Ok((pass, format!("{} (< {LIMIT})", parts.join(", "))))
}

fn prefix_doubling_linearity(seed: u64) -> Result<(bool, String)> {
    const SORT: f64 = 0.20;
    const DT: f64 = 0.25;
    const READS: f64 = 0.25;
    let s = bench(Experiment::new("sort-prefix", ladder()).with("seed", seed))?;
    let d = bench(Experiment::new("dt-build", vec![1 << 9, 1 << 10, 1 << 11, 1 << 12]).with("seed", seed))?;
    let (sw, sr) = (s.summary["spread_writes_per_n"], s.summary["spread_reads_per_nlogn"]);
    let (dw, dr) = (d.summary["spread_writes_per_n"], d.summary["spread_reads_per_nlogn"]);
    Ok((
        sw < SORT && dw < DT && sr < READS && dr < READS,
        format!(
            "sort writes/n {sw:.3} (< {SORT}), dt writes/n {dw:.3} (< {DT}), \
             reads/(n lg n) sort {sr:.3} dt {dr:.3} (< {READS})"
        ),
    ))
}

fn kd_height(seed: u64) -> Result<(bool, String)> {
    const N: usize = 1 << 14;
    const RUNS: u64 = 20;
    let limit = (N as f64).log2() + 4.0;
    let mut worst = 0;
    for s in 0..RUNS {
        let s = mix64(seed.wrapping_add(s));
        let pts = datasets::points(N, 2, s);
        // Range mode defaults to p = ⌈log₂³ n⌉.
        let t = build_batched(&pts, &KdConfig::new(2).with_seed(s), &mut CostMeter::unbounded())?;
        worst = worst.max(t.height());
    }
    Ok((worst as f64 <= limit, format!("max height {worst} over {RUNS} seeds (limit {limit})")))
}

fn range_scaling(seed: u64) -> Result<(bool, String)> {
    const LO: f64 = 1.2;
    const HI: f64 = 1.7;
    let r = bench(Experiment::new("kd-range-query", ladder()).with("seed", seed).with("queries", 1000))?;
    let (g0, g1) = (r.summary["p95_growth_min"], r.summary["p95_growth_max"]);
    let p95: Vec<String> = r.rows.iter().map(|row| format!("{}", row.ratios["p95_visited"])).collect();
    Ok((
        LO <= g0 && g1 <= HI,
        format!("p95 visited {} ; growth per doubling {g0:.3}..{g1:.3} (within [{LO}, {HI}])", p95.join(", ")),
    ))
}

fn labeling(seed: u64) -> Result<(bool, String)> {
    let r = bench(
        Experiment::new("aug-labels", vec![1 << 14])
            .with("seed", seed)
            .with("ops", 10_000)
            .with("alphas", vec![2, 4, 8, 16]),
    )?;
    let failing = r.summary["failing_rows"];
    let worst = r
        .rows
        .iter()
        .map(|row| row.ratios["max_critical_on_path"] / row.ratios["path_bound"])
        .fold(0.0, f64::max);
    Ok((
        failing == 0.0,
        format!(
            "{failing} of {} tree/alpha runs violate a bound; worst critical-per-path use {:.0}% of the bound",
            r.rows.len(),
            worst * 100.0
        ),
    ))
}

fn update_tradeoff(seed: u64) -> Result<(bool, String)> {
    const LO: f64 = 2.5;
    const HI: f64 = 5.5;
    const N: usize = 1 << 15;
    let r = bench(Experiment::new("aug-update", vec![N]).with("seed", seed).with("alphas", vec![2, 16]))?;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in experiments::TreeKind::ALL {
        let ratio = r.summary[&format!("{}_n{N}_first_over_last", kind.name())];
        pass &= (LO..=HI).contains(&ratio);
        parts.push(format!("{} {ratio:.2}", kind.name()));
    }
    Ok((pass, format!("writes(alpha 2)/writes(alpha 16): {} (within [{LO}, {HI}])", parts.join(", "))))
}

fn determinism(seed: u64) -> Result<(bool, String)> {
    const PERMS: u64 = 100;
    const N: usize = 1000;
    let mut differ = 0;
    for i in 0..PERMS {
        let keys = datasets::keys(N, seed.wrapping_add(i));
        let cfg = SortConfig {
            seed: mix64(seed ^ i),
            ..SortConfig::default()
        };
        let pd = incsort_prefix_doubling(&keys, &cfg, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
        let naive = incsort_naive(&keys, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
        differ += (pd != naive) as usize;
    }
    let mut meshes_differ = 0;
    for i in 0..5 {
        let pts = dt_points(1000, seed.wrapping_add(i));
        let a = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded())?;
        let b = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded())?;
        meshes_differ += (a.mesh() != b.mesh()) as usize;
    }
    Ok((
        differ == 0 && meshes_differ == 0,
        format!("{differ} of {PERMS} sort trees differ from sequential; {meshes_differ} of 5 mesh reruns differ"),
    ))
}

fn bulk_equivalence(seed: u64) -> Result<(bool, String)> {
    const N: usize = 1 << 13;
    const Q: usize = 200;
    let cfg = AlphaConfig::new(4).map_err(|e| anyhow!("{e}"))?;
    let mut bad = 0;
    let mut total = 0;
    for m in [16usize, 256] {
        let s = seed ^ m as u64;
        let ivs = datasets::intervals(N + m, 0.01, s);
        let (init, mut extra) = (&ivs[..N], ivs[N..].to_vec());
        extra.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.id.cmp(&b.id)));
        let (bulk, single) = both_ways(|mm| IntervalTree::build(init, cfg, mm), &extra)?;
        let mut r = seeded(s);
        for _ in 0..Q {
            let q: f64 = r.gen();
            let a = oracles::sorted(bulk.stab(q, &mut CostMeter::unbounded()).iter().map(|iv| iv.id));
            let b = oracles::sorted(single.stab(q, &mut CostMeter::unbounded()).iter().map(|iv| iv.id));
            bad += (a != b || a != oracles::stab(&ivs, q)) as usize;
        }

        let pts = datasets::points2(N + m, s);
        let (init, mut extra) = (&pts[..N], pts[N..].to_vec());
        extra.sort_by_key(|p| p.key());
        let (pb, ps) = both_ways(|mm| PriorityTree::build(init, cfg, mm), &extra)?;
        let (rb, rs) = both_ways(|mm| RangeTree::build(init, cfg, mm), &extra)?;
        for _ in 0..Q {
            let (a, b, c, d): (f64, f64, f64, f64) = (r.gen(), r.gen(), r.gen(), r.gen());
            let (x1, x2, y1, y2) = (a.min(b), a.max(b), c.min(d), c.max(d));
            let ids = |v: Vec<Point2>| oracles::sorted(v.iter().map(|p| p.id));
            let mut u = CostMeter::unbounded();
            let (a, b) = (ids(pb.three_sided_query(x1, x2, y1, &mut u)), ids(ps.three_sided_query(x1, x2, y1, &mut u)));
            bad += (a != b || a != oracles::three_sided(&pts, x1, x2, y1)) as usize;
            let (a, b) = (ids(rb.range2d_query(x1, x2, y1, y2, &mut u)), ids(rs.range2d_query(x1, x2, y1, y2, &mut u)));
            bad += (a != b || a != oracles::range2(&pts, x1, x2, y1, y2)) as usize;
        }
        total += 3 * Q;
    }
    Ok((bad == 0, format!("{bad} of {total} queries differ between bulk, single and a scan")))
}

/// The same tree after one bulk insert of `extra` and after inserting it one
/// item at a time.
fn both_ways<T, E>(build: impl Fn(&mut CostMeter) -> Result<T, E>, extra: &[T::Item]) -> Result<(T, T)>
where
    T: AugTree,
    E: std::fmt::Display,
{
    let mut m = CostMeter::unbounded();
    let mut bulk = build(&mut m).map_err(|e| anyhow!("{e}"))?;
    let mut single = build(&mut m).map_err(|e| anyhow!("{e}"))?;
    bulk.bulk_insert(extra, &mut m).map_err(|e| anyhow!("{e}"))?;
    for it in extra {
        single.insert(*it, &mut m).map_err(|e| anyhow!("{e}"))?;
    }
    Ok((bulk, single))
}

fn tracing(seed: u64) -> Result<(bool, String)> {
    const N: usize = 300;
    let pts = dt_points(N, seed);
    let (lo, hi) = bbox(&pts);
    let mut b = DtBuilder::new(lo, hi, &mut CostMeter::unbounded())?;
    let (mut differ, mut untraceable, mut extra_writes) = (0, 0, 0);
    for &p in &pts {
        let mut m = CostMeter::unbounded();
        let (mut got, _) = b.locate_encroached(p, &mut m)?;
        extra_writes += (m.writes() != got.len() as u64) as usize;
        got.sort_unstable();
        differ += (got != b.mesh().scan_encroached(p)?) as usize;
        let err = Cell::new(None);
        let g = [snap(p[0]), snap(p[1])];
        untraceable += !check_traceable(b.dag(), b.visibility(g, &err)) as usize;
        if let Some(e) = err.take() {
            return Err(e.into());
        }
        b.insert_batch(&[p], &mut CostMeter::unbounded())?;
    }
    Ok((
        differ == 0 && untraceable == 0 && extra_writes == 0,
        format!(
            "over {N} insertions: {differ} locations differ from a scan, {untraceable} predicates not traceable, \
             {extra_writes} traces write more than their output"
        ),
    ))
}
