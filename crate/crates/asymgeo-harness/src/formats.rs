//! Text formats read and written by the CLI.
//!
//! | file      | layout                                              |
//! |-----------|-----------------------------------------------------|
//! | points    | header `k n`, then `n` lines of `k` reals and an id |
//! | intervals | one `lo hi id` per line                             |
//! | boxes     | one box per line: `k` low corners, then `k` highs   |
//! | keys      | one number per line                                 |
//! | edges     | `root r`, then one `u v` edge per line              |
//! | ops       | update/query script, see [`Op`]                     |
//!
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use asymgeo::aug_trees::{Interval, Point2};
use asymgeo::kd_tree::PointK;
use asymgeo::trace_dag::{NodeId, TraceDag};
use ordered_float::OrderedFloat;

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn nums<T: std::str::FromStr>(line: &str, at: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| anyhow!("line {at}: cannot parse {t:?}")))
        .collect()
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_points(text: &str) -> Result<Vec<PointK>> {
    let mut it = lines(text);
    let (at, head) = it.next().ok_or_else(|| anyhow!("empty point file"))?;
    let head: Vec<usize> = nums(head, at)?;
    let [k, n] = head[..] else {
        bail!("line {at}: header must be `k n`");
    };
    let mut out = Vec::with_capacity(n);
    for (at, line) in it {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != k + 1 {
            bail!("line {at}: expected {k} coordinates and an id");
        }
        let coords = nums::<f64>(&f[..k].join(" "), at)?;
        let id = f[k].parse::<u32>().map_err(|_| anyhow!("line {at}: bad id {:?}", f[k]))?;
        out.push(PointK::new(coords, id));
    }
    if out.len() != n {
        bail!("header announces {n} points, found {}", out.len());
    }
    Ok(out)
}

pub fn format_points(pts: &[PointK]) -> String {
    let k = pts.first().map_or(0, |p| p.k());
    let mut s = format!("{k} {}\n", pts.len());
    for p in pts {
        for c in &p.coords {
            let _ = write!(s, "{c} ");
        }
        let _ = writeln!(s, "{}", p.id);
    }
    s
}

/// Planar view of a `k = 2` point file.
pub fn planar(pts: &[PointK]) -> Result<Vec<Point2>> {
    pts.iter()
        .map(|p| match p.coords[..] {
            [x, y] => Ok(Point2::new(x, y, p.id)),
            _ => bail!("point {} is not planar", p.id),
        })
        .collect()
}

pub fn parse_intervals(text: &str) -> Result<Vec<Interval>> {
    lines(text)
        .map(|(at, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let [lo, hi, id] = f[..] else {
                bail!("line {at}: expected `lo hi id`");
            };
            let lohi = nums::<f64>(&format!("{lo} {hi}"), at)?;
            let id = id.parse::<u32>().map_err(|_| anyhow!("line {at}: bad id {id:?}"))?;
            Ok(Interval::new(lohi[0], lohi[1], id))
        })
        .collect()
}

pub fn format_intervals(ivs: &[Interval]) -> String {
    let mut s = String::new();
    for iv in ivs {
        let _ = writeln!(s, "{} {} {}", iv.lo, iv.hi, iv.id);
    }
    s
}

/// Axis-aligned query box.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

pub fn parse_boxes(text: &str) -> Result<Vec<QueryBox>> {
    lines(text)
        .map(|(at, line)| {
            let v: Vec<f64> = nums(line, at)?;
            if v.is_empty() || !v.len().is_multiple_of(2) {
                bail!("line {at}: a box needs 2k reals");
            }
            let (lo, hi) = v.split_at(v.len() / 2);
            Ok(QueryBox {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            })
        })
        .collect()
}

pub fn format_boxes(boxes: &[QueryBox]) -> String {
    let mut s = String::new();
    for b in boxes {
        let v: Vec<String> = b.lo.iter().chain(&b.hi).map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{}", v.join(" "));
    }
    s
}

pub type Key = OrderedFloat<f64>;

pub fn parse_keys(text: &str) -> Result<Vec<Key>> {
    lines(text)
        .map(|(at, line)| {
            line.parse::<f64>()
                .map(OrderedFloat)
                .map_err(|_| anyhow!("line {at}: bad key {line:?}"))
        })
        .collect()
}

pub fn format_keys(keys: &[Key]) -> String {
    let mut s = String::new();
    for k in keys {
        let _ = writeln!(s, "{}", k.0);
    }
    s
}

/// Edge-list DAG over vertices `0..=max id`, with unit payloads.
pub fn parse_edges(text: &str, max_out: usize) -> Result<TraceDag<()>> {
    let mut it = lines(text);
    let (at, head) = it.next().ok_or_else(|| anyhow!("empty edge list"))?;
    let root = match head.split_whitespace().collect::<Vec<_>>()[..] {
        ["root", r] => r.parse::<NodeId>().map_err(|_| anyhow!("line {at}: bad root"))?,
        _ => bail!("line {at}: first line must be `root r`"),
    };
    let mut edges = Vec::new();
    for (at, line) in it {
        let v: Vec<NodeId> = nums(line, at)?;
        let [u, w] = v[..] else {
            bail!("line {at}: expected `u v`");
        };
        edges.push((u, w));
    }
    let n = edges.iter().flat_map(|&(u, v)| [u, v]).chain([root]).max().unwrap_or(0) as usize + 1;
    TraceDag::from_edges(vec![(); n], root, &edges, max_out).map_err(|e| anyhow!("{e}"))
}

/// One line of an update/query script.
///
/// - `I c..`: insert; an interval is `lo hi`, a point is `x y`. Ids are
///   assigned in order, after the largest id seen so far.
/// - `D id`: delete.
/// - `Q c..`: query; `q` for stabbing, `x1 x2 y0` three-sided, `x1 x2 y1 y2`
///   for a 2D range.
/// - `B file`: bulk insert of an interval or point file, relative to the
///   script's directory.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Insert(Vec<f64>),
    Delete(u32),
    Query(Vec<f64>),
    Bulk(PathBuf),
}

pub fn parse_ops(text: &str, base: &Path) -> Result<Vec<Op>> {
    lines(text)
        .map(|(at, line)| {
            let (tag, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            Ok(match tag {
                "I" => Op::Insert(nums(rest, at)?),
                "D" => Op::Delete(rest.parse().map_err(|_| anyhow!("line {at}: bad id {rest:?}"))?),
                "Q" => Op::Query(nums(rest, at)?),
                "B" if !rest.is_empty() => Op::Bulk(base.join(rest)),
                _ => bail!("line {at}: unknown op {line:?}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let pts = vec![PointK::new(vec![0.5, -1.25], 3), PointK::new(vec![2.0, 1e-3], 9)];
        let text = format_points(&pts);
        assert!(text.starts_with("2 2\n"));
        assert_eq!(parse_points(&text).unwrap(), pts);
    }

    #[test]
    fn point_header_must_match() {
        assert!(parse_points("2 3\n0 0 1\n").is_err());
        assert!(parse_points("2 1\n0 0 0 1\n").is_err());
    }

    #[test]
    fn intervals_round_trip() {
        let ivs = vec![Interval::new(1.0, 2.5, 0), Interval::new(-3.0, -3.0, 7)];
        assert_eq!(parse_intervals(&format_intervals(&ivs)).unwrap(), ivs);
    }

    #[test]
    fn boxes_split_low_and_high() {
        let b = parse_boxes("0 1 2 3\n").unwrap();
        assert_eq!(b[0].lo, vec![0.0, 1.0]);
        assert_eq!(b[0].hi, vec![2.0, 3.0]);
        assert!(parse_boxes("1 2 3\n").is_err());
    }

    #[test]
    fn edge_list_builds_a_dag() {
        let d = parse_edges("# diamond\nroot 0\n0 1\n0 2\n1 3\n2 3\n", 4).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.node(3).preds(), &[1, 2]);
        assert!(parse_edges("0 1\n", 4).is_err());
    }

    #[test]
    fn ops_script() {
        let ops = parse_ops("I 1 2\nD 4\nQ 1.5\nB more.txt\n", Path::new("/data")).unwrap();
        assert_eq!(
            ops,
            vec![
                Op::Insert(vec![1.0, 2.0]),
                Op::Delete(4),
                Op::Query(vec![1.5]),
                Op::Bulk(PathBuf::from("/data/more.txt")),
            ]
        );
        assert!(parse_ops("X 1\n", Path::new(".")).is_err());
    }
}
