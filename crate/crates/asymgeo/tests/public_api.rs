//! End-to-end use of the public API, across modules.

use asymgeo::aug_trees::{AlphaConfig, AugTree, Interval, IntervalTree, Point2, PriorityTree, RangeTree};
use asymgeo::delaunay::predicates::snap;
use asymgeo::delaunay::{validate_delaunay, DtBuilder};
use asymgeo::inc_sort::{incsort_naive, incsort_prefix_doubling, SortConfig};
use asymgeo::kd_tree::{build_batched, KdConfig, KdForest, PointK};
use asymgeo::rng::{seeded, shuffle};
use asymgeo::trace_dag::{check_traceable, trace};
use asymgeo::CostMeter;
use rand::Rng;
use std::cell::Cell;

fn unit_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut r = seeded(seed);
    (0..n).map(|_| [r.gen(), r.gen()]).collect()
}

#[test]
fn charged_work_is_reads_plus_omega_writes() {
    let mut keys: Vec<u32> = (0..2000).collect();
    shuffle(&mut keys, 5);
    let mut m = CostMeter::new(25, u64::MAX);
    incsort_naive(&keys, &mut m).unwrap();
    assert!(m.writes() > 0);
    assert_eq!(m.charged_work(), m.reads() + 25 * m.writes());
}

#[test]
fn prefix_doubling_sort_writes_fewer_words() {
    let mut keys: Vec<u32> = (0..1 << 14).collect();
    shuffle(&mut keys, 2);
    let (mut a, mut b) = (CostMeter::unbounded(), CostMeter::unbounded());
    let naive = incsort_naive(&keys, &mut a).unwrap();
    let pd = incsort_prefix_doubling(&keys, &SortConfig::default(), &mut b).unwrap();
    assert_eq!(naive, pd);
    assert!(b.writes() * 2 < a.writes(), "{} vs {}", b.writes(), a.writes());
}

#[test]
fn delaunay_history_dag_traces_every_query() {
    let pts = unit_points(400, 9);
    let b = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded()).unwrap();
    assert!(validate_delaunay(b.mesh(), &pts));
    assert!(b.mesh().check_topology());
    for q in unit_points(50, 10) {
        let g = [snap(q[0]), snap(q[1])];
        let err = Cell::new(None);
        assert!(check_traceable(b.dag(), b.visibility(g, &err)));
        let mut m = CostMeter::unbounded();
        let (leaves, stats) = trace(b.dag(), b.visibility(g, &err), None, &mut m).unwrap();
        assert!(err.take().is_none());
        assert_eq!(m.writes(), leaves.len() as u64);
        assert_eq!(stats.reported, leaves.len() as u64);
        let mut tris: Vec<u32> = leaves.iter().map(|&v| b.dag().payload(v).tri).collect();
        tris.sort_unstable();
        assert_eq!(tris, b.mesh().scan_encroached(q).unwrap());
    }
}

#[test]
fn incremental_and_prefix_doubling_meshes_are_both_delaunay() {
    let pts = unit_points(300, 4);
    let a = DtBuilder::run_incremental(&pts, &mut CostMeter::unbounded()).unwrap();
    let b = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded()).unwrap();
    assert!(validate_delaunay(a.mesh(), &pts));
    assert!(validate_delaunay(b.mesh(), &pts));
    assert_eq!(a.mesh().interior().count(), b.mesh().interior().count());
}

#[test]
fn kd_forest_matches_a_static_tree() {
    let mut r = seeded(3);
    let pts: Vec<PointK> = (0..3000).map(|i| PointK::new(vec![r.gen(), r.gen()], i)).collect();
    let cfg = KdConfig::new(2).with_seed(3);
    let mut f = KdForest::new(cfg.clone()).unwrap();
    for p in &pts {
        f.insert(p.clone(), &mut CostMeter::unbounded()).unwrap();
    }
    let t = build_batched(&pts, &cfg, &mut CostMeter::unbounded()).unwrap();
    for _ in 0..50 {
        let (a, b, c, d): (f64, f64, f64, f64) = (r.gen(), r.gen(), r.gen(), r.gen());
        let (lo, hi) = ([a.min(b), c.min(d)], [a.max(b), c.max(d)]);
        let mut x: Vec<u32> = f.range_query(&lo, &hi, &mut CostMeter::unbounded()).unwrap().points.iter().map(|p| p.id).collect();
        let mut y: Vec<u32> = t.range_query(&lo, &hi, &mut CostMeter::unbounded()).unwrap().points.iter().map(|p| p.id).collect();
        x.sort_unstable();
        y.sort_unstable();
        assert_eq!(x, y);
    }
}

#[test]
fn augmented_trees_drain_to_empty() {
    let cfg = AlphaConfig::new(3).unwrap();
    let mut r = seeded(8);
    let ivs: Vec<Interval> = (0..500)
        .map(|i| {
            let lo: f64 = r.gen();
            Interval::new(lo, lo + 0.1 * r.gen::<f64>(), i)
        })
        .collect();
    let pts: Vec<Point2> = (0..500).map(|i| Point2::new(r.gen(), r.gen(), i)).collect();
    let mut ids: Vec<u32> = (0..500).collect();
    shuffle(&mut ids, 8);
    let mut m = CostMeter::unbounded();

    let mut it = IntervalTree::build(&ivs, cfg, &mut m).unwrap();
    let mut pt = PriorityTree::build(&pts, cfg, &mut m).unwrap();
    let mut rt = RangeTree::build(&pts, cfg, &mut m).unwrap();
    for chunk in ids.chunks(37) {
        it.bulk_delete(chunk, &mut m).unwrap();
        pt.bulk_delete(chunk, &mut m).unwrap();
        rt.bulk_delete(chunk, &mut m).unwrap();
        assert!(it.check().is_ok() && pt.check().is_ok() && rt.check().is_ok());
    }
    assert!(it.is_empty() && pt.is_empty() && rt.is_empty());
    assert!(it.stab(0.5, &mut m).is_empty());
    assert!(pt.three_sided_query(0.0, 1.0, 0.0, &mut m).is_empty());
    assert!(rt.range2d_query(0.0, 1.0, 0.0, 1.0, &mut m).is_empty());
    assert!(it.delete(3, &mut m).is_err());
}
