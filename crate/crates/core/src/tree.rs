//! Binary time-trees.
//!
//! A tree is a list of branches. The root lives on `[0, T]`; every split
//! event creates one new branch whose parent keeps running. A branch `b` born
//! at time `s` shares the whole history of its parent's line up to `s`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::rng::{domain as dom, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub id: usize,
    pub parent: Option<usize>,
    pub birth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TreeKind {
    Single,
    Yule,
    Binary,
    Discretized { levels: usize, t: f64, direction: Direction },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeTopology {
    pub branches: Vec<Branch>,
    pub horizon: f64,
    pub kind: TreeKind,
}

impl TreeTopology {
    /// One unbranched line on `[0, horizon]`.
    pub fn single(horizon: f64) -> Self {
        Self {
            branches: vec![Branch { id: 0, parent: None, birth: 0.0 }],
            horizon,
            kind: TreeKind::Single,
        }
    }

    /// Build from `(parent, birth)` pairs; entry 0 must be the root.
    /// Parents must precede their children.
    pub fn from_births(horizon: f64, records: &[(Option<usize>, f64)], kind: TreeKind) -> Result<Self> {
        let mut branches = Vec::with_capacity(records.len());
        for (id, &(parent, birth)) in records.iter().enumerate() {
            match parent {
                None if id == 0 && birth == 0.0 => {}
                None => return Err(domain(format!("branch {id}: only branch 0 may be the root"))),
                Some(p) if p >= id => return Err(domain(format!("branch {id}: parent {p} must precede it"))),
                Some(p) => {
                    let pb: &Branch = &branches[p];
                    if !(birth >= pb.birth && birth <= horizon) {
                        return Err(domain(format!("branch {id}: birth {birth} outside [{}, {horizon}]", pb.birth)));
                    }
                }
            }
            branches.push(Branch { id, parent, birth });
        }
        if branches.is_empty() {
            return Err(domain("tree needs a root"));
        }
        Ok(Self { branches, horizon, kind })
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Number of lines alive at the horizon.
    pub fn leaf_count(&self) -> usize {
        self.branches.len()
    }

    /// Edge count when every split is drawn as a node with two child edges.
    pub fn edge_count(&self) -> usize {
        2 * self.branches.len() - 1
    }

    pub fn parent(&self, b: usize) -> Option<usize> {
        self.branches[b].parent
    }

    pub fn birth(&self, b: usize) -> f64 {
        self.branches[b].birth
    }

    fn check(&self, b: usize) -> Result<()> {
        if b < self.branches.len() {
            Ok(())
        } else {
            Err(Error::UnknownBranch(b))
        }
    }

    /// `b, parent(b), …, root`.
    pub fn lineage(&self, b: usize) -> Vec<usize> {
        let mut out = vec![b];
        let mut cur = b;
        while let Some(p) = self.branches[cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Time at which the lines of `b` and `c` separate; `+∞` when `b == c`.
    pub fn split_time(&self, b: usize, c: usize) -> Result<f64> {
        self.check(b)?;
        self.check(c)?;
        if b == c {
            return Ok(f64::INFINITY);
        }
        let lb = self.lineage(b);
        let lc = self.lineage(c);
        // Walk both lineages from the root down until they differ.
        let mut ib = lb.len();
        let mut ic = lc.len();
        while ib > 0 && ic > 0 && lb[ib - 1] == lc[ic - 1] {
            ib -= 1;
            ic -= 1;
        }
        // lb[ib] is the deepest common branch; lb[ib-1] is where b leaves it.
        let leave = |line: &[usize], i: usize| if i == 0 { f64::INFINITY } else { self.branches[line[i - 1]].birth };
        Ok(leave(&lb, ib).min(leave(&lc, ic)))
    }

    /// `floor(birth·n)`: the last index `b` shares with its parent line.
    pub fn birth_index(&self, b: usize, n: usize) -> usize {
        (self.branches[b].birth * n as f64).floor() as usize
    }

    /// Shift every birth onto the grid `i·t/K`.
    pub fn discretize(&self, levels: usize, t: f64, direction: Direction) -> Result<Self> {
        if levels == 0 {
            return Err(domain("discretization needs K ≥ 1"));
        }
        let step = t / levels as f64;
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let r = b.birth / step;
                let k = r.round();
                let k = if (r - k).abs() <= 1e-9 * r.abs().max(1.0) {
                    k
                } else {
                    match direction {
                        Direction::Left => r.floor(),
                        Direction::Right => r.ceil(),
                    }
                };
                Branch { birth: k * step, ..*b }
            })
            .collect();
        Ok(Self {
            branches,
            horizon: self.horizon.max(t),
            kind: TreeKind::Discretized { levels, t, direction },
        })
    }

    /// Grid level of each birth, if the tree is discretized.
    pub fn levels(&self) -> Option<(usize, f64)> {
        match self.kind {
            TreeKind::Discretized { levels, t, .. } => Some((levels, t)),
            _ => None,
        }
    }

    /// `branch_id,parent_id,birth_time`, root parent left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("branch_id,parent_id,birth_time\n");
        for b in &self.branches {
            let p = b.parent.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{}", b.id, p, crate::fmt_f64(b.birth));
        }
        s
    }
}

impl TreeTopology {
    /// Parse the layout written by [`TreeTopology::to_csv`]. Lines starting
    /// with `#` are skipped. Ids must be `0, 1, 2, …` in order.
    pub fn from_csv(text: &str, horizon: f64, kind: TreeKind) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("branch_id") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || domain(format!("tree CSV line {}: expected branch_id,parent_id,birth_time", lineno + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let id: usize = f[0].parse().map_err(|_| bad())?;
            if id != records.len() {
                return Err(domain(format!("tree CSV line {}: ids must run 0, 1, 2, …", lineno + 1)));
            }
            let parent = if f[1].is_empty() { None } else { Some(f[1].parse().map_err(|_| bad())?) };
            let birth: f64 = f[2].parse().map_err(|_| bad())?;
            records.push((parent, birth));
        }
        Self::from_births(horizon, &records, kind)
    }
}

/// Yule tree on `[0, horizon]`: every line splits at rate one. Each branch
/// draws its clocks from its own substream of `seed`.
pub fn sample_yule(horizon: f64, seed: u64) -> Result<TreeTopology> {
    if !(horizon > 0.0) {
        return Err(domain(format!("Yule horizon must be positive, got {horizon}")));
    }
    let mut clocks = vec![stream(seed, dom::TREE, 0)];
    let mut branches = vec![Branch { id: 0, parent: None, birth: 0.0 }];
    let mut queue = BinaryHeap::new();
    let first: f64 = clocks[0].sample(Exp1);
    queue.push(Reverse((Time(first), 0usize)));
    while let Some(Reverse((Time(tau), b))) = queue.pop() {
        if tau >= horizon {
            break;
        }
        let c = branches.len();
        branches.push(Branch { id: c, parent: Some(b), birth: tau });
        clocks.push(stream(seed, dom::TREE, c as u64));
        let next_b: f64 = clocks[b].sample(Exp1);
        let next_c: f64 = clocks[c].sample(Exp1);
        queue.push(Reverse((Time(tau + next_b), b)));
        queue.push(Reverse((Time(tau + next_c), c)));
    }
    Ok(TreeTopology {
        branches,
        horizon,
        kind: TreeKind::Yule,
    })
}

/// Every line splits into two at each integer time `1, …, T`.
pub fn binary_tree(horizon: f64) -> Result<TreeTopology> {
    if horizon < 1.0 || horizon.fract() != 0.0 || horizon > 30.0 {
        return Err(domain(format!("binary tree needs an integer horizon in [1, 30], got {horizon}")));
    }
    let t = horizon as usize;
    let mut branches = vec![Branch { id: 0, parent: None, birth: 0.0 }];
    for k in 1..=t {
        let alive = branches.len();
        for b in 0..alive {
            let id = branches.len();
            branches.push(Branch { id, parent: Some(b), birth: k as f64 });
        }
    }
    Ok(TreeTopology {
        branches,
        horizon,
        kind: TreeKind::Binary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Time(f64);
impl Eq for Time {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for Time {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> TreeTopology {
        // 0, 0r (r = 1), 0rs (s = 2)
        TreeTopology::from_births(3.0, &[(None, 0.0), (Some(0), 1.0), (Some(1), 2.0)], TreeKind::Yule).unwrap()
    }

    #[test]
    fn split_times_on_chain() {
        let t = chain();
        assert_eq!(t.split_time(0, 2).unwrap(), 1.0);
        assert_eq!(t.split_time(1, 2).unwrap(), 2.0);
        assert_eq!(t.split_time(0, 1).unwrap(), 1.0);
        assert_eq!(t.split_time(2, 2).unwrap(), f64::INFINITY);
        assert!(t.split_time(0, 9).is_err());
    }

    #[test]
    fn binary_counts() {
        let t = binary_tree(1.0).unwrap();
        assert_eq!(t.leaf_count(), 2);
        let t = binary_tree(3.0).unwrap();
        assert_eq!(t.leaf_count(), 8);
        assert_eq!(t.edge_count(), 15);
        let mut splits: Vec<f64> = t.branches.iter().skip(1).map(|b| b.birth).collect();
        splits.dedup();
        assert_eq!(splits, vec![1.0, 2.0, 3.0]);
        assert!(binary_tree(2.5).is_err());
    }

    #[test]
    fn tiny_yule_horizon() {
        let t = sample_yule(1e-12, 3).unwrap();
        assert_eq!(t.len(), 1);
        assert!(sample_yule(0.0, 3).is_err());
    }

    #[test]
    fn yule_is_reproducible() {
        assert_eq!(sample_yule(4.0, 9).unwrap(), sample_yule(4.0, 9).unwrap());
    }

    #[test]
    fn discretize_fixed_point_and_bracket() {
        let b = binary_tree(4.0).unwrap();
        let d = b.discretize(4, 4.0, Direction::Left).unwrap();
        assert!(b.branches.iter().zip(&d.branches).all(|(x, y)| x.birth == y.birth));
        let y = sample_yule(3.0, 5).unwrap();
        let l = y.discretize(6, 3.0, Direction::Left).unwrap();
        let r = y.discretize(6, 3.0, Direction::Right).unwrap();
        for i in 0..y.len() {
            for j in 0..y.len() {
                let (a, b, c) = (l.split_time(i, j).unwrap(), y.split_time(i, j).unwrap(), r.split_time(i, j).unwrap());
                assert!(a <= b && b <= c);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let y = sample_yule(3.0, 11).unwrap();
        let back = TreeTopology::from_csv(&y.to_csv(), 3.0, TreeKind::Yule).unwrap();
        assert_eq!(back, y);
        assert!(TreeTopology::from_csv("0,,0\n2,0,1\n", 3.0, TreeKind::Yule).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = chain().to_csv();
        assert!(s.starts_with("branch_id,parent_id,birth_time\n0,,0\n1,0,1\n"));
    }
}
