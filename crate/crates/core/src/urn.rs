//! Power-law Pólya urn on a time-tree.
//!
//! Individual `(b, i)` with `i > floor(birth(b)·n)` draws an offset `R` and
//! attaches to the individual at global index `i - R` on its own ancestral
//! line. Components get independent fair ±1 types.
//!
//! Only individuals with index `≥ 1` are stored densely. Two of them share a
//! component exactly when their ancestral lines meet, so the past `(-W, 0]`
//! is explored lazily: only individuals that lie on some traced ancestral line
//! are created, and they are processed in decreasing index order. An ancestor
//! below `-W` founds a fresh component.

use std::collections::BinaryHeap;

use rustc_hash::FxHashMap as HashMap;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::renewal::draw_offset;
use crate::rng::{domain as dom, stream, Rng};
use crate::tree::TreeTopology;

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            parent: Vec::with_capacity(n),
            size: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        id
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Where offsets come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OffsetLaw {
    /// `P(R ≥ n) = n^{-α}`.
    PowerLaw,
    /// Every individual uses the same offset (deterministic test hook).
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UrnParams {
    pub alpha: f64,
    /// Steps per unit time.
    pub n: usize,
    /// Depth `W` of the simulated past.
    pub window_past: u64,
    pub offsets: OffsetLaw,
}

impl UrnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 1/2), got {}", self.alpha)));
        }
        if self.n == 0 {
            return Err(domain("steps per unit must be ≥ 1"));
        }
        if self.window_past > i64::MAX as u64 / 4 {
            return Err(domain("window too deep"));
        }
        if let OffsetLaw::Fixed(0) = self.offsets {
            return Err(domain("offsets must be ≥ 1"));
        }
        Ok(())
    }
}

/// One realization of the urn on a tree.
#[derive(Debug, Clone)]
pub struct UrnRealization {
    pub tree: TreeTopology,
    pub params: UrnParams,
    /// Last time index, `floor(T·n)`.
    pub last_index: usize,
    /// `floor(birth(b)·n)` per branch.
    pub birth_index: Vec<usize>,
    /// Start of each branch's block in the dense arrays.
    pub block_start: Vec<usize>,
    /// Offset `R` per dense individual.
    pub parent_offset: Vec<u64>,
    /// Component label per dense individual, numbered by first appearance.
    pub component: Vec<u32>,
    pub types: Vec<i8>,
    /// Own partial sums per branch: `own_sum[block_start[b] + k]` is the sum
    /// of the first `k + 1` own types.
    pub own_sum: Vec<i64>,
    /// Walk value of the parent line at index `birth_index[b]`.
    pub base: Vec<i64>,
    /// Past individuals that were materialized.
    pub past_individuals: usize,
    /// Ancestral lines that left the window and founded a component.
    pub window_exits: usize,
}

impl UrnRealization {
    /// Dense position of individual `(b, i)`, resolving through parent lines
    /// when `i` lies in the shared prefix. `i` must be in `1..=last_index`.
    pub fn locate(&self, b: usize, i: usize) -> usize {
        let cur = self.owner(b, i as i64);
        self.block_start[cur] + (i - self.birth_index[cur] - 1)
    }

    fn owner(&self, b: usize, g: i64) -> usize {
        let mut cur = b;
        while let Some(p) = self.tree.branches[cur].parent {
            if g > self.birth_index[cur] as i64 {
                break;
            }
            cur = p;
        }
        cur
    }

    pub fn type_of(&self, b: usize, i: usize) -> i8 {
        self.types[self.locate(b, i)]
    }

    pub fn component_of(&self, b: usize, i: usize) -> u32 {
        self.component[self.locate(b, i)]
    }

    /// Integer walk `S_b(k) = Σ_{i=1}^{k} Y_{(b,i)}`.
    pub fn walk(&self, b: usize, k: usize) -> i64 {
        if k == 0 {
            return 0;
        }
        let cur = self.owner(b, k as i64);
        let bi = self.birth_index[cur];
        if cur == 0 {
            return self.own_sum[k - 1];
        }
        self.base[cur] + self.own_sum[self.block_start[cur] + (k - bi - 1)]
    }

    /// Own-walk of `b` at a fractional index `x ≥ birth_index[b]`, linearly
    /// interpolated, measured from `birth_index[b]`.
    fn own_walk(&self, b: usize, x: f64) -> f64 {
        let bi = self.birth_index[b];
        let off = x - bi as f64;
        let k = off.floor() as usize;
        let frac = off - k as f64;
        let at = |m: usize| -> f64 {
            if m == 0 {
                0.0
            } else {
                self.own_sum[self.block_start[b] + m - 1] as f64
            }
        };
        let len = self.last_index - bi;
        if k >= len {
            return at(len);
        }
        at(k) + frac * (at(k + 1) - at(k))
    }

    /// Continuous walk on branch `b` at time `t`, in raw step units.
    ///
    /// Below its birth a branch follows its parent; past it, the parent's
    /// value at the birth plus the branch's own interpolated increments.
    pub fn walk_continuous(&self, b: usize, t: f64) -> f64 {
        let x = t * self.params.n as f64;
        let mut cur = b;
        while let Some(p) = self.tree.branches[cur].parent {
            if t > self.tree.branches[cur].birth {
                break;
            }
            cur = p;
        }
        match self.tree.branches[cur].parent {
            None => self.own_walk(0, x),
            Some(p) => {
                let s = self.tree.branches[cur].birth;
                let sx = s * self.params.n as f64;
                self.walk_continuous(p, s) + self.own_walk(cur, x) - self.own_walk(cur, sx)
            }
        }
    }
}

/// Build one realization. All randomness comes from substreams of `seed`.
pub fn simulate(tree: &TreeTopology, params: UrnParams, seed: u64) -> Result<UrnRealization> {
    params.validate()?;
    let n = params.n;
    let last_index = (tree.horizon * n as f64 + 1e-9).floor() as usize;
    if last_index as u64 >= u32::MAX as u64 / 2 {
        return Err(domain("horizon·n too large"));
    }
    let nb = tree.len();
    let birth_index: Vec<usize> = (0..nb).map(|b| tree.birth_index(b, n).min(last_index)).collect();
    let mut block_start = Vec::with_capacity(nb);
    let mut total = 0usize;
    for &bi in &birth_index {
        block_start.push(total);
        total += last_index - bi;
    }
    if total >= u32::MAX as usize / 2 {
        return Err(domain(format!("{total} individuals exceed the supported size")));
    }

    let mut offset_rng = stream(seed, dom::URN, 0);
    let mut past_rng = stream(seed, dom::PAST, 0);
    let mut type_rng = stream(seed, dom::TYPES, 0);
    let draw = |rng: &mut Rng| match params.offsets {
        OffsetLaw::PowerLaw => draw_offset(rng, params.alpha),
        OffsetLaw::Fixed(r) => r,
    };

    let mut uf = UnionFind::with_capacity(total + total / 8);
    for _ in 0..total {
        uf.push();
    }
    let mut parent_offset = Vec::with_capacity(total);
    let mut past = Past::new(params.window_past as i64);
    let scratch = Lines { tree, birth_index: &birth_index };
    for b in 0..nb {
        let bi = birth_index[b];
        for i in bi + 1..=last_index {
            let node = (block_start[b] + i - bi - 1) as u32;
            let r = draw(&mut offset_rng);
            parent_offset.push(r);
            let g = if r > i as u64 + params.window_past {
                i64::MIN
            } else {
                i as i64 - r as i64
            };
            if g >= 1 {
                let owner = scratch.owner(b, g);
                let target = block_start[owner] + g as usize - birth_index[owner] - 1;
                uf.union(node, target as u32);
            } else {
                past.attach(&mut uf, node, g);
            }
        }
    }
    // Past individuals, deepest last; each draws its own offset once.
    let mut past_count = 0usize;
    while let Some(g) = past.pending.pop() {
        past_count += 1;
        let node = past.claimed[&g];
        let r = draw(&mut past_rng);
        let h = if r > (g + past.w) as u64 { i64::MIN } else { g - r as i64 };
        past.attach(&mut uf, node, h);
    }
    let exits = past.exits;

    // Label components in dense order and give each a fair type.
    let mut label_of_root: HashMap<u32, u32> = HashMap::default();
    let mut component = Vec::with_capacity(total);
    let mut types = Vec::with_capacity(total);
    let mut type_of_label: Vec<i8> = Vec::new();
    for node in 0..total as u32 {
        let root = uf.find(node);
        let next = type_of_label.len() as u32;
        let label = *label_of_root.entry(root).or_insert(next);
        if label == next {
            type_of_label.push(if type_rng.random::<bool>() { 1 } else { -1 });
        }
        component.push(label);
        types.push(type_of_label[label as usize]);
    }

    let mut own_sum = Vec::with_capacity(total);
    for b in 0..nb {
        let mut s = 0i64;
        for k in 0..last_index - birth_index[b] {
            s += types[block_start[b] + k] as i64;
            own_sum.push(s);
        }
    }
    let mut real = UrnRealization {
        tree: tree.clone(),
        params,
        last_index,
        birth_index,
        block_start,
        parent_offset,
        component,
        types,
        own_sum,
        base: vec![0; nb],
        past_individuals: past_count,
        window_exits: exits,
    };
    for b in 1..nb {
        let p = tree.branches[b].parent.expect("non-root branch has a parent");
        real.base[b] = real.walk(p, real.birth_index[b]);
    }
    Ok(real)
}

struct Lines<'a> {
    tree: &'a TreeTopology,
    birth_index: &'a [usize],
}

impl Lines<'_> {
    fn owner(&self, b: usize, g: i64) -> usize {
        let mut cur = b;
        while let Some(p) = self.tree.branches[cur].parent {
            if g > self.birth_index[cur] as i64 {
                break;
            }
            cur = p;
        }
        cur
    }
}

/// Lazily materialized individuals at indices `≤ 0`.
struct Past {
    w: i64,
    claimed: HashMap<i64, u32>,
    pending: BinaryHeap<i64>,
    exits: usize,
}

impl Past {
    fn new(w: i64) -> Self {
        Self {
            w,
            claimed: HashMap::default(),
            pending: BinaryHeap::new(),
            exits: 0,
        }
    }

    fn attach(&mut self, uf: &mut UnionFind, node: u32, g: i64) {
        if g < -self.w {
            self.exits += 1;
            return;
        }
        let pending = &mut self.pending;
        let slot = *self.claimed.entry(g).or_insert_with(|| {
            pending.push(g);
            uf.push()
        });
        uf.union(node, slot);
    }
}
