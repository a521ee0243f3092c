//! Oracle suites behind `verify`: each check compares a module against an
//! independent brute-force answer or an invariant checker.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use asymgeo::aug_trees::{AlphaConfig, AugTree, Interval, IntervalTree, Point2, PriorityTree, RangeTree};
use asymgeo::delaunay::{validate_delaunay, DtBuilder, DtError};
use asymgeo::inc_sort::{incsort_depth_capped, incsort_naive, incsort_prefix_doubling, SortConfig};
use asymgeo::kd_tree::{build_batched, build_classic, KdConfig, KdForest, PointK};
use asymgeo::rng::{seeded, shuffle};
use asymgeo::trace_dag::{check_traceable, trace, NodeId, TraceDag};
use asymgeo::CostMeter;
use rand::Rng;
use serde::Serialize;

use crate::datasets;
use crate::experiments::{dt_points, TreeKind};
use crate::formats::{self, Key};
use crate::oracles;
use crate::ops::{Answer, Replay};
use crate::report::SCHEMA_VERSION;

pub const SUITES: &[&str] = &["trace", "sort", "kd", "dt", "aug"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<Answer>,
}

/// Inputs shared by the suites. Optional files replace the random data.
#[derive(Debug, Clone)]
pub struct Options {
    pub seed: u64,
    pub n: Option<usize>,
    pub alpha: u64,
    pub tree: Option<TreeKind>,
    pub kd: KdConfig,
    pub epsilon: Vec<f64>,
    pub points: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub ops: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub off: Option<PathBuf>,
    pub rounds_log: Option<PathBuf>,
}

impl Options {
    pub fn new(seed: u64) -> Self {
        Options {
            seed,
            n: None,
            alpha: 2,
            tree: None,
            kd: KdConfig::new(2).with_seed(seed),
            epsilon: vec![0.0, 0.5],
            points: None,
            keys: None,
            edges: None,
            ops: None,
            data: None,
            off: None,
            rounds_log: None,
        }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }
}

pub fn run(suite: &str, opts: &Options) -> Result<SuiteReport> {
    let mut c = Checks(Vec::new());
    let mut answers = Vec::new();
    match suite {
        "trace" => trace_suite(opts, &mut c)?,
        "sort" => sort_suite(opts, &mut c)?,
        "kd" => kd_suite(opts, &mut c)?,
        "dt" => dt_suite(opts, &mut c)?,
        "aug" => answers = aug_suite(opts, &mut c)?,
        s => bail!("unknown suite {s:?}; expected one of {}", SUITES.join(", ")),
    }
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        suite: suite.to_string(),
        seed: opts.seed,
        pass: c.0.iter().all(|x| x.pass),
        checks: c.0,
        answers,
    })
}

/// Random DAG with in-degree ≤ 2 and out-degree ≤ `max_out`; ids are a
/// topological order.
fn random_dag(n: usize, max_out: usize, seed: u64) -> TraceDag<()> {
    let mut r = seeded(seed);
    let mut out = vec![0usize; n];
    let mut edges = Vec::new();
    for v in 1..n as NodeId {
        let want = if r.gen_bool(0.4) { 2 } else { 1 };
        let mut preds = BTreeSet::new();
        for _ in 0..8 {
            let u = r.gen_range(0..v);
            if out[u as usize] < max_out {
                preds.insert(u);
            }
            if preds.len() == want {
                break;
            }
        }
        if preds.is_empty() {
            // Chain onto the previous vertex's slot holder if all tries hit full vertices.
            let u = (0..v).rev().find(|&u| out[u as usize] < max_out).expect("a vertex with room");
            preds.insert(u);
        }
        for u in preds {
            out[u as usize] += 1;
            edges.push((u, v));
        }
    }
    TraceDag::from_edges(vec![(); n], 0, &edges, max_out).expect("valid random DAG")
}

/// Visible set closed under the traceable property: the root, then each
/// vertex with a visible predecessor, kept with probability `p`.
fn traceable_set(dag: &TraceDag<()>, p: f64, seed: u64) -> Vec<bool> {
    let mut r = seeded(seed);
    let mut vis = vec![false; dag.len()];
    vis[0] = true;
    for v in 1..dag.len() {
        vis[v] = dag.node(v as NodeId).preds().iter().any(|&u| vis[u as usize]) && r.gen_bool(p);
    }
    vis
}

fn trace_suite(opts: &Options, c: &mut Checks) -> Result<()> {
    let mut dags = Vec::new();
    if let Some(path) = &opts.edges {
        dags.push(formats::parse_edges(&formats::read(path)?, 4)?);
    }
    let n = opts.n.unwrap_or(2000);
    for i in 0..20 {
        dags.push(random_dag(n, 4, opts.seed.wrapping_add(i)));
    }
    let (mut bad_out, mut bad_writes, mut bad_prop) = (0, 0, 0);
    for (i, dag) in dags.iter().enumerate() {
        for j in 0..5u64 {
            let vis = traceable_set(dag, 0.7, opts.seed ^ (i as u64 * 31 + j));
            let want: Vec<NodeId> = (0..dag.len() as NodeId)
                .filter(|&v| vis[v as usize] && dag.node(v).succs().is_empty())
                .collect();
            let mut m = CostMeter::unbounded();
            let (mut got, stats) = trace(dag, |v| vis[v as usize], None, &mut m).map_err(|e| anyhow!("{e}"))?;
            got.sort_unstable();
            bad_out += (got != want) as usize;
            bad_writes += (m.writes() != got.len() as u64 || stats.reported != got.len() as u64) as usize;
            bad_prop += !check_traceable(dag, |v| vis[v as usize]) as usize;
        }
    }
    let runs = dags.len() * 5;
    c.add("trace output equals visible leaves", bad_out == 0, format!("{bad_out} of {runs} runs differ"));
    c.add("trace writes equal output size", bad_writes == 0, format!("{bad_writes} of {runs} runs differ"));
    c.add("visible sets are traceable", bad_prop == 0, format!("{bad_prop} of {runs} runs fail"));

    // A visible vertex whose predecessors are all hidden breaks the property.
    let dag = random_dag(64, 4, opts.seed);
    let v = (1..64).rev().find(|&v| !dag.node(v).preds().contains(&0)).expect("a vertex off the root");
    let caught = !check_traceable(&dag, |u| u == 0 || u == v);
    c.add("orphaned visible vertex is detected", caught, format!("vertex {v} visible, its predecessors hidden"));
    Ok(())
}

fn sort_suite(opts: &Options, c: &mut Checks) -> Result<()> {
    let err = |e: asymgeo::inc_sort::SortError| anyhow!("{e}");
    let mut inputs: Vec<Vec<Key>> = Vec::new();
    if let Some(path) = &opts.keys {
        inputs.push(formats::parse_keys(&formats::read(path)?)?);
    }
    let n = opts.n.unwrap_or(1000);
    for i in 0..100 {
        inputs.push(datasets::keys(n, opts.seed.wrapping_add(i)));
    }
    let (mut differ, mut unsorted, mut capped_bad) = (0, 0, 0);
    for (i, keys) in inputs.iter().enumerate() {
        let naive = incsort_naive(keys, &mut CostMeter::unbounded()).map_err(err)?;
        let cfg = SortConfig {
            seed: opts.seed ^ i as u64,
            ..SortConfig::default()
        };
        let pd = incsort_prefix_doubling(keys, &cfg, &mut CostMeter::unbounded()).map_err(err)?;
        differ += (pd != naive) as usize;
        let mut want = keys.clone();
        want.sort();
        unsorted += (pd.in_order() != want || !pd.is_bst()) as usize;
        let capped = incsort_depth_capped(keys, &SortConfig::capped(keys.len(), 1.0, cfg.seed), &mut CostMeter::unbounded())
            .map_err(err)?;
        capped_bad += (capped.in_order() != want || !capped.is_bst()) as usize;
    }
    let runs = inputs.len();
    c.add("prefix doubling equals sequential insertion", differ == 0, format!("{differ} of {runs} differ"));
    c.add("in-order traversal is sorted", unsorted == 0, format!("{unsorted} of {runs} fail"));
    c.add("depth-capped tree is a sorted BST", capped_bad == 0, format!("{capped_bad} of {runs} fail"));
    let dup = [Key::from(1.0), Key::from(2.0), Key::from(1.0)];
    c.add(
        "duplicate keys are rejected",
        incsort_naive(&dup, &mut CostMeter::unbounded()).is_err(),
        "keys 1, 2, 1",
    );
    Ok(())
}

fn kd_suite(opts: &Options, c: &mut Checks) -> Result<()> {
    let err = |e: asymgeo::kd_tree::KdError| anyhow!("{e}");
    let cfg = &opts.kd;
    let k = cfg.k;
    let pts = match &opts.points {
        Some(p) => formats::parse_points(&formats::read(p)?)?,
        None => datasets::points(opts.n.unwrap_or(1000), k, opts.seed),
    };
    let t = build_batched(&pts, cfg, &mut CostMeter::unbounded()).map_err(err)?;
    c.add("batched tree is valid", t.validate(), format!("height {}", t.height()));
    let (lo, hi) = datasets::bounds(&pts, k);
    let boxes = datasets::boxes(100, &lo, &hi, opts.seed ^ 0xb0);
    let mut bad = 0;
    for b in &boxes {
        let got = oracles::sorted(t.range_query(&b.lo, &b.hi, &mut CostMeter::unbounded()).map_err(err)?.points.iter().map(|p| p.id));
        bad += (got != oracles::boxed(&pts, &b.lo, &b.hi)) as usize;
    }
    c.add("range queries equal a scan", bad == 0, format!("{bad} of {} differ", boxes.len()));
    let mut r = seeded(opts.seed ^ 0xa1);
    for &eps in &opts.epsilon {
        let mut bad = 0;
        for _ in 0..100 {
            let q: Vec<f64> = (0..k).map(|d| lo[d] + r.gen::<f64>() * (hi[d] - lo[d])).collect();
            let (_, d) = t.ann_query(&q, eps, &mut CostMeter::unbounded()).map_err(err)?;
            bad += (d > (1.0 + eps) * oracles::nearest(&pts, &q) + 1e-12) as usize;
        }
        c.add(format!("ann within (1+{eps}) of nearest"), bad == 0, format!("{bad} of 100 too far"));
    }
    let whole = cfg.clone().with_p(pts.len().max(1));
    let a = build_batched(&pts, &whole, &mut CostMeter::unbounded()).map_err(err)?;
    let b = build_classic(&pts, &whole, &mut CostMeter::unbounded()).map_err(err)?;
    c.add("p >= n reproduces the classic build", a.canonical() == b.canonical(), "");

    // Forest under random updates.
    let mut f = KdForest::new(cfg.clone()).map_err(err)?;
    let mut live: Vec<PointK> = Vec::new();
    let mut r = seeded(opts.seed ^ 0xf0);
    let mut bad = 0;
    let extra = datasets::points(600, k, opts.seed ^ 0xf1);
    for (i, p) in extra.into_iter().enumerate() {
        f.insert(p.clone(), &mut CostMeter::unbounded()).map_err(err)?;
        live.push(p);
        if i % 3 == 2 {
            let gone = live.swap_remove(r.gen_range(0..live.len()));
            f.delete(gone.id, &mut CostMeter::unbounded()).map_err(err)?;
        }
        if i % 50 == 49 {
            for b in datasets::boxes(5, &vec![0.0; k], &vec![1.0; k], i as u64) {
                let got = f.range_query(&b.lo, &b.hi, &mut CostMeter::unbounded()).map_err(err)?;
                bad += (oracles::sorted(got.points.iter().map(|p| p.id)) != oracles::boxed(&live, &b.lo, &b.hi)) as usize;
            }
        }
    }
    c.add("forest queries equal a scan under updates", bad == 0, format!("{bad} mismatches"));
    Ok(())
}

fn dt_suite(opts: &Options, c: &mut Checks) -> Result<()> {
    let pts: Vec<[f64; 2]> = match &opts.points {
        Some(p) => formats::planar(&formats::parse_points(&formats::read(p)?)?)?
            .into_iter()
            .map(|p| [p.x, p.y])
            .collect(),
        None => dt_points(opts.n.unwrap_or(300), opts.seed),
    };
    let mut m = CostMeter::unbounded();
    match DtBuilder::run_prefix_doubling(&pts, &mut m) {
        Ok(b) => {
            c.add("prefix-doubling mesh is Delaunay", validate_delaunay(b.mesh(), &pts), format!("{} points", pts.len()));
            let again = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
            c.add("rerun gives the same mesh", again.mesh() == b.mesh(), "");
            if let Some(path) = &opts.off {
                formats::write(path, &b.mesh().to_off())?;
            }
            if let Some(path) = &opts.rounds_log {
                let rounds: Vec<serde_json::Value> = b
                    .rounds()
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "round": r.round, "replaced": r.replaced, "created": r.created,
                            "reads": r.cost.reads, "writes": r.cost.writes,
                            "charged_work": r.cost.charged_work(),
                        })
                    })
                    .collect();
                formats::write(path, &serde_json::to_string_pretty(&rounds)?)?;
            }
        }
        Err(e @ DtError::GeneralPosition(_)) if opts.points.is_some() => {
            c.add("input rejected for general position", true, e.to_string());
            return Ok(());
        }
        Err(e) => bail!("{e}"),
    }

    // Point location agrees with a scan at every insertion.
    let small: Vec<[f64; 2]> = pts.iter().take(300).copied().collect();
    let (lo, hi) = bbox(&small);
    let mut b = DtBuilder::new(lo, hi, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
    let mut bad = 0;
    for &p in &small {
        let (mut got, _) = b.locate_encroached(p, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
        got.sort_unstable();
        bad += (got != b.mesh().scan_encroached(p).map_err(|e| anyhow!("{e}"))?) as usize;
        b.insert_batch(&[p], &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
    }
    c.add("traced location equals a live-triangle scan", bad == 0, format!("{bad} of {} differ", small.len()));

    // Four cocircular points with an empty circle have no unique
    // triangulation and must be rejected. Clear a hole so the circle is empty.
    let mut square: Vec<[f64; 2]> = dt_points(40, opts.seed ^ 0xc0c)
        .into_iter()
        .filter(|p| (p[0] - 0.5).abs() > 0.05 || (p[1] - 0.5).abs() > 0.05)
        .collect();
    square.extend([[0.49, 0.49], [0.51, 0.49], [0.51, 0.51], [0.49, 0.51]]);
    shuffle(&mut square, opts.seed);
    let res = DtBuilder::run_prefix_doubling(&square, &mut CostMeter::unbounded());
    c.add(
        "cocircular quadruple is rejected",
        matches!(res, Err(DtError::GeneralPosition(_))),
        format!("{:?}", res.err()),
    );
    Ok(())
}

pub fn bbox(pts: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

fn aug_suite(opts: &Options, c: &mut Checks) -> Result<Vec<Answer>> {
    let cfg = AlphaConfig::new(opts.alpha).map_err(|e| anyhow!("{e}"))?;
    if let Some(ops) = &opts.ops {
        let kind = opts.tree.ok_or_else(|| anyhow!("--ops needs --tree"))?;
        let base = ops.parent().map(PathBuf::from).unwrap_or_default();
        let script = formats::parse_ops(&formats::read(ops)?, &base)?;
        let mut r = Replay::new(kind, cfg, opts.data.as_deref(), CostMeter::DEFAULT_OMEGA)?;
        let answers = r.run(&script)?;
        let bad = answers.iter().filter(|a| !a.matches_oracle).count();
        c.add("script queries equal a scan", bad == 0, format!("{bad} of {} differ", answers.len()));
        return Ok(answers);
    }
    let n = opts.n.unwrap_or(500);
    let kinds = opts.tree.map_or(TreeKind::ALL.to_vec(), |t| vec![t]);
    for kind in kinds {
        let (bad, report, ok) = match kind {
            TreeKind::Interval => {
                let all = datasets::intervals(n + 2000, 0.05, opts.seed);
                let t = IntervalTree::build(&all[..n], cfg, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
                let (bad, t) = stream(t, &all, n, opts.seed, |t, live, r| {
                    let q: f64 = r.gen();
                    oracles::sorted(t.stab(q, &mut CostMeter::unbounded()).iter().map(|iv| iv.id)) == oracles::stab(live, q)
                })?;
                (bad, t.label_report(), t.check())
            }
            TreeKind::Priority => {
                let all = datasets::points2(n + 2000, opts.seed);
                let t = PriorityTree::build(&all[..n], cfg, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
                let (bad, t) = stream(t, &all, n, opts.seed, |t, live, r| {
                    let (a, b, y0): (f64, f64, f64) = (r.gen(), r.gen(), r.gen());
                    let (x1, x2) = (a.min(b), a.max(b));
                    oracles::sorted(t.three_sided_query(x1, x2, y0, &mut CostMeter::unbounded()).iter().map(|p| p.id))
                        == oracles::three_sided(live, x1, x2, y0)
                })?;
                (bad, t.label_report(), t.check())
            }
            TreeKind::Range => {
                let all = datasets::points2(n + 2000, opts.seed);
                let t = RangeTree::build(&all[..n], cfg, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
                let (bad, t) = stream(t, &all, n, opts.seed, |t, live, r| {
                    let (a, b, u, v): (f64, f64, f64, f64) = (r.gen(), r.gen(), r.gen(), r.gen());
                    let (x1, x2, y1, y2) = (a.min(b), a.max(b), u.min(v), u.max(v));
                    oracles::sorted(t.range2d_query(x1, x2, y1, y2, &mut CostMeter::unbounded()).iter().map(|p| p.id))
                        == oracles::range2(live, x1, x2, y1, y2)
                })?;
                (bad, t.label_report(), t.check())
            }
        };
        let name = kind.name();
        c.add(format!("{name}: queries equal a scan under updates"), bad == 0, format!("{bad} mismatches"));
        c.add(format!("{name}: labeling bounds hold"), report.holds(), format!("{report:?}"));
        c.add(format!("{name}: structure check"), ok.is_ok(), format!("{ok:?}"));
    }
    Ok(Vec::new())
}

/// Random single inserts and deletes, five queries after every 100 ops.
/// Returns the number of wrong answers.
fn stream<T, I>(
    mut t: T,
    all: &[I],
    n: usize,
    seed: u64,
    mut query: impl FnMut(&T, &[I], &mut asymgeo::rng::Rng) -> bool,
) -> Result<(usize, T)>
where
    T: AugTree<Item = I>,
    I: Copy + HasId,
{
    let mut r = seeded(seed ^ 0x5ea);
    let mut live: Vec<I> = all[..n].to_vec();
    let mut bad = 0;
    for (i, item) in all[n..].iter().enumerate() {
        if live.is_empty() || r.gen_bool(0.6) {
            t.insert(*item, &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
            live.push(*item);
        } else {
            let gone = live.swap_remove(r.gen_range(0..live.len()));
            t.delete(gone.id(), &mut CostMeter::unbounded()).map_err(|e| anyhow!("{e}"))?;
        }
        if i % 100 == 99 {
            for _ in 0..5 {
                bad += !query(&t, &live, &mut r) as usize;
            }
        }
    }
    Ok((bad, t))
}

pub trait HasId {
    fn id(&self) -> u32;
}

impl HasId for Interval {
    fn id(&self) -> u32 {
        self.id
    }
}

impl HasId for Point2 {
    fn id(&self) -> u32 {
        self.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_small() {
        for s in SUITES {
            let mut o = Options::new(1);
            o.n = Some(if *s == "trace" { 200 } else { 150 });
            let rep = run(s, &o).unwrap();
            assert!(rep.pass, "{s}: {:?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        }
    }

    #[test]
    fn random_dags_respect_degree_bounds() {
        let d = random_dag(500, 4, 3);
        assert!((0..500).all(|v| d.node(v).succs().len() <= 4 && d.node(v).preds().len() <= 2));
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run("bogus", &Options::new(1)).is_err());
    }
}
