//! Metered experiments behind `bench`.
//!
//! Each subject runs once per size (and per repetition, averaged) with its
//! own meter, and reports reads, writes and a few normalized columns. The
//! summary holds the spread (`max/min − 1`) of the columns that should stay
//! flat across sizes.

use std::collections::BTreeMap;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use asymgeo::aug_trees::{
    AlphaConfig, AugTree, EKey, Interval, IntervalTree, Point2, PriorityTree, RangeTree,
};
use asymgeo::delaunay::DtBuilder;
use asymgeo::inc_sort::{incsort_naive, incsort_prefix_doubling, SortConfig};
use asymgeo::kd_tree::{build_batched, build_classic, KdConfig, KdMode, SplitRule};
use asymgeo::rng::{mix64, seeded};
use asymgeo::CostMeter;
use rand::Rng;

use crate::datasets;
use crate::report::{spread, Environment, Experiment, Report, Row, SCHEMA_VERSION};

pub const SUBJECTS: &[&str] = &[
    "kd-build",
    "kd-classic",
    "kd-range-query",
    "sort-naive",
    "sort-prefix",
    "dt-build",
    "interval-build",
    "priority-build",
    "range-build",
    "aug-update",
    "aug-labels",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeKind {
    Interval,
    Priority,
    Range,
}

impl TreeKind {
    pub const ALL: [TreeKind; 3] = [TreeKind::Interval, TreeKind::Priority, TreeKind::Range];

    pub fn name(self) -> &'static str {
        match self {
            TreeKind::Interval => "interval",
            TreeKind::Priority => "priority",
            TreeKind::Range => "range",
        }
    }
}

impl FromStr for TreeKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        TreeKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| anyhow!("unknown tree {s:?}; expected interval, priority or range"))
    }
}

pub fn parse_mode(s: &str) -> Result<KdMode> {
    match s {
        "range" => Ok(KdMode::Range),
        "ann" => Ok(KdMode::Ann),
        _ => bail!("unknown mode {s:?}; expected range or ann"),
    }
}

pub fn parse_split_rule(s: &str) -> Result<SplitRule> {
    match s {
        "cycle" => Ok(SplitRule::CycleDimensions),
        "longest" => Ok(SplitRule::LongestSide),
        _ => bail!("unknown split rule {s:?}; expected cycle or longest"),
    }
}

/// k-d settings from `k`, `p`, `mode`, `split-rule` and `imbalance`.
pub fn kd_config(exp: &Experiment, seed: u64) -> Result<KdConfig> {
    let mut cfg = KdConfig::new(exp.u64_param("k", 2) as usize)
        .with_mode(parse_mode(exp.str_param("mode", "range"))?)
        .with_seed(seed);
    cfg.split_rule = parse_split_rule(exp.str_param("split-rule", "cycle"))?;
    if let Some(p) = exp.params.get("p").and_then(|v| v.as_u64()) {
        cfg = cfg.with_p(p as usize);
    }
    cfg.epsilon_imbalance = exp.params.get("imbalance").and_then(|v| v.as_f64());
    Ok(cfg)
}

fn trees(exp: &Experiment) -> Result<Vec<TreeKind>> {
    match exp.str_param("tree", "all") {
        "all" => Ok(TreeKind::ALL.to_vec()),
        t => Ok(vec![t.parse()?]),
    }
}

fn lg(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

/// Seed for repetition `r`.
fn rep_seed(seed: u64, r: u32) -> u64 {
    if r == 0 {
        seed
    } else {
        mix64(seed ^ mix64(r as u64))
    }
}

/// Accumulates metered runs and extra columns over repetitions.
struct Acc {
    reads: u64,
    writes: u64,
    runs: u64,
    extra: BTreeMap<&'static str, f64>,
}

impl Acc {
    fn new() -> Self {
        Acc {
            reads: 0,
            writes: 0,
            runs: 0,
            extra: BTreeMap::new(),
        }
    }

    fn add(&mut self, m: &CostMeter) {
        self.reads += m.reads();
        self.writes += m.writes();
        self.runs += 1;
    }

    fn put(&mut self, k: &'static str, v: f64) {
        *self.extra.entry(k).or_insert(0.0) += v;
    }

    fn row(&self, n: usize, omega: u64) -> Row {
        let runs = self.runs.max(1);
        let mut row = Row::new(n);
        row.reads = self.reads / runs;
        row.writes = self.writes / runs;
        row.charged_work = row.reads + omega * row.writes;
        for (k, v) in &self.extra {
            row.ratio(k, v / runs as f64);
        }
        row
    }
}

pub fn run(exp: &Experiment) -> Result<Report> {
    exp.validate()?;
    let (rows, summary) = match exp.subject.as_str() {
        "kd-build" => kd_build(exp, false)?,
        "kd-classic" => kd_build(exp, true)?,
        "kd-range-query" => kd_range_query(exp)?,
        "sort-naive" => sort(exp, false)?,
        "sort-prefix" => sort(exp, true)?,
        "dt-build" => dt_build(exp)?,
        "interval-build" => post_sorted(exp, TreeKind::Interval)?,
        "priority-build" => post_sorted(exp, TreeKind::Priority)?,
        "range-build" => post_sorted(exp, TreeKind::Range)?,
        "aug-update" => aug_update(exp)?,
        "aug-labels" => aug_labels(exp)?,
        s => bail!("unknown subject {s:?}; expected one of {}", SUBJECTS.join(", ")),
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        experiment: exp.clone(),
        rows,
        summary,
        environment: Environment::now(exp.seed(), exp.omega()),
    })
}

type Out = (Vec<Row>, BTreeMap<String, f64>);

fn spread_of(rows: &[Row], col: &str) -> f64 {
    spread(rows.iter().filter_map(|r| r.ratios.get(col).copied()))
}

fn summarize(rows: &[Row], cols: &[&str]) -> BTreeMap<String, f64> {
    cols.iter().map(|c| (format!("spread_{c}"), spread_of(rows, c))).collect()
}

fn kd_build(exp: &Experiment, classic: bool) -> Result<Out> {
    let mut rows = Vec::new();
    for &n in &exp.sizes {
        let mut acc = Acc::new();
        for r in 0..exp.repetitions {
            let seed = rep_seed(exp.seed(), r);
            let cfg = kd_config(exp, seed)?;
            let pts = datasets::points(n, cfg.k, seed);
            let mut m = CostMeter::new(exp.omega(), u64::MAX);
            let t = if classic {
                build_classic(&pts, &cfg, &mut m)?
            } else {
                build_batched(&pts, &cfg, &mut m)?
            };
            acc.add(&m);
            acc.put("height", t.height() as f64);
        }
        let mut row = acc.row(n, exp.omega());
        row.ratio("writes_per_n", row.writes as f64 / n as f64);
        row.ratio("writes_per_nlogn", row.writes as f64 / (n as f64 * lg(n)));
        row.ratio("reads_per_nlogn", row.reads as f64 / (n as f64 * lg(n)));
        row.ratio("height_slack", row.ratios["height"] - lg(n));
        rows.push(row);
    }
    let s = summarize(&rows, &["writes_per_n", "writes_per_nlogn", "reads_per_nlogn"]);
    Ok((rows, s))
}

/// Thin slab queries (about one point each) against a batched k = 2 tree:
/// visited nodes per query, median and 95th percentile.
fn kd_range_query(exp: &Experiment) -> Result<Out> {
    let queries = exp.u64_param("queries", 400) as usize;
    let mut rows = Vec::new();
    for &n in &exp.sizes {
        let mut acc = Acc::new();
        for r in 0..exp.repetitions {
            let seed = rep_seed(exp.seed(), r);
            let cfg = kd_config(exp, seed)?;
            let pts = datasets::points(n, 2, seed);
            let t = build_batched(&pts, &cfg, &mut CostMeter::unbounded())?;
            let mut m = CostMeter::new(exp.omega(), u64::MAX);
            let mut visited = Vec::with_capacity(queries);
            for b in datasets::slabs(queries, n, seed ^ 0x51ab) {
                visited.push(t.range_query(&b.lo, &b.hi, &mut m)?.visited);
            }
            visited.sort_unstable();
            acc.add(&m);
            acc.put("p50_visited", visited[visited.len() / 2] as f64);
            acc.put("p95_visited", visited[(visited.len() * 95).div_ceil(100) - 1] as f64);
        }
        rows.push(acc.row(n, exp.omega()));
    }
    let mut s = BTreeMap::new();
    let growth: Vec<f64> = rows
        .windows(2)
        .map(|w| w[1].ratios["p95_visited"] / w[0].ratios["p95_visited"])
        .collect();
    if !growth.is_empty() {
        s.insert("p95_growth_min".into(), growth.iter().copied().fold(f64::INFINITY, f64::min));
        s.insert("p95_growth_max".into(), growth.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok((rows, s))
}

fn sort(exp: &Experiment, prefix: bool) -> Result<Out> {
    let mut rows = Vec::new();
    for &n in &exp.sizes {
        let mut acc = Acc::new();
        for r in 0..exp.repetitions {
            let seed = rep_seed(exp.seed(), r);
            let keys = datasets::keys(n, seed);
            let mut m = CostMeter::new(exp.omega(), u64::MAX);
            let t = if prefix {
                let cfg = SortConfig {
                    seed,
                    ..SortConfig::default()
                };
                incsort_prefix_doubling(&keys, &cfg, &mut m)
            } else {
                incsort_naive(&keys, &mut m)
            }
            .map_err(|e| anyhow!("{e}"))?;
            acc.add(&m);
            acc.put("depth", t.depth() as f64);
        }
        let mut row = acc.row(n, exp.omega());
        row.ratio("writes_per_n", row.writes as f64 / n as f64);
        row.ratio("writes_per_nlogn", row.writes as f64 / (n as f64 * lg(n)));
        row.ratio("reads_per_nlogn", row.reads as f64 / (n as f64 * lg(n)));
        rows.push(row);
    }
    let s = summarize(&rows, &["writes_per_n", "writes_per_nlogn", "reads_per_nlogn"]);
    Ok((rows, s))
}

/// Prefix-doubling Delaunay build of uniform points.
fn dt_build(exp: &Experiment) -> Result<Out> {
    let mut rows = Vec::new();
    for &n in &exp.sizes {
        let mut acc = Acc::new();
        for r in 0..exp.repetitions {
            let seed = rep_seed(exp.seed(), r);
            let pts = dt_points(n, seed);
            let mut m = CostMeter::new(exp.omega(), u64::MAX);
            let b = DtBuilder::run_prefix_doubling(&pts, &mut m).map_err(|e| anyhow!("{e}"))?;
            acc.add(&m);
            acc.put("rounds", b.rounds().len() as f64);
        }
        let mut row = acc.row(n, exp.omega());
        row.ratio("writes_per_n", row.writes as f64 / n as f64);
        row.ratio("reads_per_nlogn", row.reads as f64 / (n as f64 * lg(n)));
        rows.push(row);
    }
    let s = summarize(&rows, &["writes_per_n", "reads_per_nlogn"]);
    Ok((rows, s))
}

/// Uniform points in the unit square as plain coordinate pairs.
pub fn dt_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    datasets::points(n, 2, seed)
        .into_iter()
        .map(|p| [p.coords[0], p.coords[1]])
        .collect()
}

fn alpha_cfg(alpha: u64) -> Result<AlphaConfig> {
    AlphaConfig::new(alpha).map_err(|e| anyhow!("{e}"))
}

/// Builds from input that is already sorted; only the build is metered.
fn post_sorted(exp: &Experiment, kind: TreeKind) -> Result<Out> {
    let cfg = alpha_cfg(exp.u64_param("alpha", 4))?;
    let mut rows = Vec::new();
    for &n in &exp.sizes {
        let mut acc = Acc::new();
        for r in 0..exp.repetitions {
            let seed = rep_seed(exp.seed(), r);
            let mut sort_meter = CostMeter::unbounded();
            let mut m = CostMeter::new(exp.omega(), u64::MAX);
            let err = |e: asymgeo::aug_trees::AugError| anyhow!("{e}");
            match kind {
                TreeKind::Interval => {
                    let ivs = datasets::intervals(n, exp.f64_param("max_len", 0.01), seed);
                    let keys: Vec<EKey> = IntervalTree::sort_endpoints(&ivs, &mut sort_meter);
                    IntervalTree::build_presorted(&ivs, &keys, cfg, &mut m).map_err(err)?;
                }
                TreeKind::Priority => {
                    let mut pts = datasets::points2(n, seed);
                    pts.sort_by_key(|p| p.key());
                    PriorityTree::build_presorted(&pts, cfg, &mut m).map_err(err)?;
                }
                TreeKind::Range => {
                    let mut xs = datasets::points2(n, seed);
                    xs.sort_by_key(|p| p.key());
                    let mut ys = xs.clone();
                    ys.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.id.cmp(&b.id)));
                    RangeTree::build_presorted(&xs, &ys, cfg, &mut m).map_err(err)?;
                }
            }
            acc.add(&m);
        }
        let mut row = acc.row(n, exp.omega()).tag("tree", kind.name());
        row.ratio("writes_per_n", row.writes as f64 / n as f64);
        rows.push(row);
    }
    let s = summarize(&rows, &["writes_per_n"]);
    Ok((rows, s))
}

/// Random update items for one tree kind, ids `0..count`.
#[derive(Debug, Clone)]
pub enum Items {
    Intervals(Vec<Interval>),
    Points(Vec<Point2>),
}

impl Items {
    pub fn random(kind: TreeKind, count: usize, max_len: f64, seed: u64) -> Self {
        match kind {
            TreeKind::Interval => Items::Intervals(datasets::intervals(count, max_len, seed)),
            _ => Items::Points(datasets::points2(count, seed)),
        }
    }
}

/// Runs `f` on a freshly built tree of the given kind, with the first `n`
/// items as the initial set and the rest as fresh items.
macro_rules! with_tree {
    ($kind:expr, $items:expr, $n:expr, $cfg:expr, |$t:ident, $fresh:ident| $body:expr) => {{
        let mut scratch = CostMeter::unbounded();
        let err = |e: asymgeo::aug_trees::AugError| anyhow!("{e}");
        match ($kind, $items) {
            (TreeKind::Interval, Items::Intervals(v)) => {
                let (init, $fresh) = v.split_at($n);
                let mut $t = IntervalTree::build(init, $cfg, &mut scratch).map_err(err)?;
                $body
            }
            (TreeKind::Priority, Items::Points(v)) => {
                let (init, $fresh) = v.split_at($n);
                let mut $t = PriorityTree::build(init, $cfg, &mut scratch).map_err(err)?;
                $body
            }
            (TreeKind::Range, Items::Points(v)) => {
                let (init, $fresh) = v.split_at($n);
                let mut $t = RangeTree::build(init, $cfg, &mut scratch).map_err(err)?;
                $body
            }
            _ => bail!("items do not match the tree kind"),
        }
    }};
}

fn insert_all<T: AugTree>(t: &mut T, items: &[T::Item], m: &mut CostMeter) -> Result<()> {
    for it in items {
        t.insert(*it, m).map_err(|e| anyhow!("{e}"))?;
    }
    Ok(())
}

/// Mean writes per single insert over one doubling epoch: the tree is built
/// with `n` items, then `inserts` (default `n − 1`) single inserts follow,
/// stopping just short of the root's own rebuild.
fn aug_update(exp: &Experiment) -> Result<Out> {
    let alphas = exp.u64_list("alphas", &[2, 4, 8, 16]);
    let mut rows = Vec::new();
    let mut s = BTreeMap::new();
    for kind in trees(exp)? {
        for &n in &exp.sizes {
            let ins = exp.u64_param("inserts", n as u64 - 1) as usize;
            let mut per = Vec::new();
            for &alpha in &alphas {
                let cfg = alpha_cfg(alpha)?;
                let mut acc = Acc::new();
                for r in 0..exp.repetitions {
                    let seed = rep_seed(exp.seed(), r);
                    let items = Items::random(kind, n + ins, exp.f64_param("max_len", 0.01), seed);
                    let mut m = CostMeter::new(exp.omega(), u64::MAX);
                    with_tree!(kind, &items, n, cfg, |t, fresh| insert_all(&mut t, fresh, &mut m)?);
                    acc.add(&m);
                }
                let mut row = acc.row(n, exp.omega()).tag("tree", kind.name()).tag("alpha", alpha);
                let w = row.writes as f64 / ins.max(1) as f64;
                row.ratio("writes_per_insert", w);
                per.push(w);
                rows.push(row);
            }
            let key = format!("{}_n{}", kind.name(), n);
            if let (Some(first), Some(last)) = (per.first(), per.last()) {
                s.insert(format!("{key}_first_over_last"), first / last);
            }
            let monotone = per.windows(2).all(|w| w[0] > w[1]);
            s.insert(format!("{key}_monotone"), monotone as u8 as f64);
        }
    }
    Ok((rows, s))
}

/// Random mixed single updates (half inserts, half deletes of a random live
/// item), then the labeling checker.
fn aug_labels(exp: &Experiment) -> Result<Out> {
    let alphas = exp.u64_list("alphas", &[2, 4, 8, 16]);
    let ops = exp.u64_param("ops", 10_000) as usize;
    let mut rows = Vec::new();
    let mut s = BTreeMap::new();
    for kind in trees(exp)? {
        for &n in &exp.sizes {
            for &alpha in &alphas {
                let cfg = alpha_cfg(alpha)?;
                let seed = exp.seed();
                let items = Items::random(kind, n + ops, exp.f64_param("max_len", 0.01), seed);
                let mut m = CostMeter::new(exp.omega(), u64::MAX);
                let report = with_tree!(kind, &items, n, cfg, |t, fresh| {
                    mixed_updates(&mut t, n, fresh, seed, &mut m)?;
                    t.label_report()
                });
                let mut row = Row::new(n).tag("tree", kind.name()).tag("alpha", alpha);
                row.reads = m.reads();
                row.writes = m.writes();
                row.charged_work = m.charged_work();
                row.ratio("ratio_violations", report.ratio_violations as f64);
                row.ratio("weight_mismatches", report.weight_mismatches as f64);
                row.ratio("min_ratio", report.min_ratio);
                row.ratio("max_ratio", report.max_ratio);
                row.ratio("max_critical_on_path", report.max_critical_on_path as f64);
                row.ratio("path_bound", report.path_bound());
                row.ratio("max_gap", report.max_gap as f64);
                row.ratio("gap_bound", report.gap_bound() as f64);
                row.flag("holds", report.holds());
                rows.push(row);
            }
        }
    }
    let failing = rows.iter().filter(|r| !r.flags["holds"]).count();
    s.insert("failing_rows".into(), failing as f64);
    Ok((rows, s))
}

/// `fresh.len()` updates, each an insert or a delete of a random live item
/// with equal odds. Op `i` inserts `fresh[i]`, whose id must be `n + i`.
/// Items `0..n` are live at the start.
pub fn mixed_updates<T: AugTree>(
    t: &mut T,
    n: usize,
    fresh: &[T::Item],
    seed: u64,
    m: &mut CostMeter,
) -> Result<()> {
    let mut r = seeded(seed ^ 0xde1e7e);
    let mut live: Vec<u32> = (0..n as u32).collect();
    let mut next = 0;
    while next < fresh.len() {
        if live.is_empty() || r.gen_bool(0.5) {
            t.insert(fresh[next], m).map_err(|e| anyhow!("{e}"))?;
            live.push((n + next) as u32);
            next += 1;
        } else {
            let id = live.swap_remove(r.gen_range(0..live.len()));
            t.delete(id, m).map_err(|e| anyhow!("{e}"))?;
            next += 1;
        }
    }
    Ok(())
}
