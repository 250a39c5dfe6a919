//! Multisets, set partitions of labelled positions, and partial diagrams.
//!
//! Partitions are always taken over labelled slots, never over distinct
//! symbols, so repeated indices are counted with multiplicity.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};
use crate::scalar::Scalar;

/// Index symbol. Symbols are small integers; models may attach names.
pub type Symbol = u16;

pub const DEFAULT_SLOT_CAP: usize = 12;

/// Enumeration cap in slots, read once from `WICK_SLOT_CAP`.
pub fn slot_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("WICK_SLOT_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_SLOT_CAP)
    })
}

pub(crate) fn check_cap(size: usize) -> Result<()> {
    let cap = slot_cap();
    if size > cap {
        Err(WickError::CapExceeded { size, cap })
    } else {
        Ok(())
    }
}

/// Finite multiset of symbols, stored as a sorted vector.
///
/// Ordered by size first, then lexicographically, which is the key order
/// used for serialization.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Multiset {
    items: Vec<Symbol>,
}

impl Ord for Multiset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.items
            .len()
            .cmp(&other.items.len())
            .then_with(|| self.items.cmp(&other.items))
    }
}

impl PartialOrd for Multiset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl FromIterator<Symbol> for Multiset {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        Multiset::new(iter)
    }
}

impl Multiset {
    pub fn new(items: impl IntoIterator<Item = Symbol>) -> Self {
        let mut items: Vec<Symbol> = items.into_iter().collect();
        items.sort_unstable();
        Multiset { items }
    }

    pub fn empty() -> Self {
        Multiset::default()
    }

    /// `n` copies of `sym`.
    pub fn repeat(sym: Symbol, n: usize) -> Self {
        Multiset { items: vec![sym; n] }
    }

    pub fn from_counts(counts: &[(Symbol, usize)]) -> Self {
        Multiset::new(counts.iter().flat_map(|&(s, n)| std::iter::repeat_n(s, n)))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Symbol] {
        &self.items
    }

    /// Distinct symbols with their multiplicities, ascending.
    pub fn counts(&self) -> Vec<(Symbol, usize)> {
        let mut out: Vec<(Symbol, usize)> = Vec::new();
        for &s in &self.items {
            match out.last_mut() {
                Some((t, n)) if *t == s => *n += 1,
                _ => out.push((s, 1)),
            }
        }
        out
    }

    pub fn count(&self, sym: Symbol) -> usize {
        self.items.iter().filter(|&&s| s == sym).count()
    }

    pub fn union(&self, other: &Multiset) -> Multiset {
        let mut items = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.items.len() && j < other.items.len() {
            if self.items[i] <= other.items[j] {
                items.push(self.items[i]);
                i += 1;
            } else {
                items.push(other.items[j]);
                j += 1;
            }
        }
        items.extend_from_slice(&self.items[i..]);
        items.extend_from_slice(&other.items[j..]);
        Multiset { items }
    }

    pub fn with(&self, sym: Symbol) -> Multiset {
        self.union(&Multiset { items: vec![sym] })
    }

    /// `self ∖ other`, or `None` when `other` is not a submultiset.
    pub fn difference(&self, other: &Multiset) -> Option<Multiset> {
        let mut items = Vec::with_capacity(self.len());
        let mut j = 0;
        for &s in &self.items {
            if j < other.items.len() && other.items[j] == s {
                j += 1;
            } else {
                if j < other.items.len() && other.items[j] < s {
                    return None;
                }
                items.push(s);
            }
        }
        if j == other.items.len() {
            Some(Multiset { items })
        } else {
            None
        }
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &Multiset) -> bool {
        self.difference(other).is_some()
    }

    /// All distinct submultisets in canonical order.
    pub fn submultisets(&self) -> Vec<Multiset> {
        let counts = self.counts();
        let mut out = vec![Vec::new()];
        for &(s, n) in &counts {
            let mut next = Vec::with_capacity(out.len() * (n + 1));
            for prefix in &out {
                for k in 0..=n {
                    let mut v: Vec<Symbol> = prefix.clone();
                    v.extend(std::iter::repeat_n(s, k));
                    next.push(v);
                }
            }
            out = next;
        }
        let mut out: Vec<Multiset> = out.into_iter().map(|items| Multiset { items }).collect();
        out.sort();
        out
    }

    /// Multi-index factorial `∏ m_k!`.
    pub fn factorial(&self) -> u128 {
        self.counts()
            .iter()
            .map(|&(_, n)| (1..=n as u128).product::<u128>())
            .product()
    }

    /// Canonical key: symbols joined by commas, empty string for `∅`.
    pub fn key(&self) -> String {
        self.items
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_key(key: &str) -> Result<Multiset> {
        let key = key.trim();
        if key.is_empty() {
            return Ok(Multiset::empty());
        }
        key.split(',')
            .map(|t| {
                t.trim()
                    .parse::<Symbol>()
                    .map_err(|_| WickError::Parse(format!("bad multiset key `{key}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Multiset::new)
    }

    /// Renders with symbol names, e.g. `x,x,y`.
    pub fn named_key(&self, names: &[String]) -> String {
        self.items
            .iter()
            .map(|&s| names.get(s as usize).cloned().unwrap_or_else(|| s.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of identity-preserving injections `J ↪ I`, i.e. `∏_k C(I(k), J(k))`.
pub fn multiplicity_coefficient(i: &Multiset, j: &Multiset) -> u128 {
    let ci = i.counts();
    let mut acc = 1u128;
    for (s, nj) in j.counts() {
        let ni = ci
            .iter()
            .find(|(t, _)| *t == s)
            .map(|&(_, n)| n)
            .unwrap_or(0);
        if nj > ni {
            return 0;
        }
        acc *= binomial(ni, nj);
    }
    acc
}

/// Partition of a labelled ground set into nonempty disjoint blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Checks disjointness, nonemptiness and coverage of `ground`.
    pub fn is_partition_of(&self, ground: &[usize]) -> bool {
        let mut seen: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        if self.blocks.iter().any(|b| b.is_empty()) {
            return false;
        }
        seen.sort_unstable();
        let mut g = ground.to_vec();
        g.sort_unstable();
        seen == g
    }
}

/// Restricted growth strings of length `n` in lexicographic order.
pub struct RestrictedGrowth {
    a: Vec<usize>,
    done: bool,
    started: bool,
}

impl RestrictedGrowth {
    pub fn new(n: usize) -> Self {
        RestrictedGrowth {
            a: vec![0; n],
            done: false,
            started: false,
        }
    }
}

impl Iterator for RestrictedGrowth {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.a.clone());
        }
        let n = self.a.len();
        let mut prefix_max = vec![0usize; n];
        for i in 1..n {
            prefix_max[i] = prefix_max[i - 1].max(self.a[i - 1]);
        }
        for i in (1..n).rev() {
            if self.a[i] <= prefix_max[i] {
                self.a[i] += 1;
                for x in &mut self.a[i + 1..] {
                    *x = 0;
                }
                return Some(self.a.clone());
            }
        }
        self.done = true;
        None
    }
}

/// Every set partition of `ground`, once each, in restricted-growth order.
pub fn enumerate_set_partitions(ground: &[usize]) -> Result<impl Iterator<Item = SetPartition> + '_> {
    check_cap(ground.len())?;
    Ok(RestrictedGrowth::new(ground.len()).map(move |rgs| {
        let k = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (pos, &b) in rgs.iter().enumerate() {
            blocks[b].push(ground[pos]);
        }
        SetPartition { blocks }
    }))
}

/// Rows of labelled slots. Slot `k` of row `r` has global index `offset(r) + k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSet {
    rows: Vec<Multiset>,
    offsets: Vec<usize>,
    row_of: Vec<usize>,
    symbols: Vec<Symbol>,
}

impl NodeSet {
    pub fn new(rows: &[Multiset]) -> Self {
        let mut offsets = Vec::with_capacity(rows.len());
        let mut row_of = Vec::new();
        let mut symbols = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            offsets.push(row_of.len());
            for &s in row.items() {
                row_of.push(r);
                symbols.push(s);
            }
        }
        NodeSet {
            rows: rows.to_vec(),
            offsets,
            row_of,
            symbols,
        }
    }

    pub fn rows(&self) -> &[Multiset] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_slots(&self) -> usize {
        self.symbols.len()
    }

    pub fn row_of(&self, slot: usize) -> usize {
        self.row_of[slot]
    }

    pub fn pos_of(&self, slot: usize) -> usize {
        slot - self.offsets[self.row_of[slot]]
    }

    pub fn symbol(&self, slot: usize) -> Symbol {
        self.symbols[slot]
    }

    pub fn slot(&self, row: usize, pos: usize) -> Option<usize> {
        (row < self.rows.len() && pos < self.rows[row].len()).then(|| self.offsets[row] + pos)
    }

    pub fn slot_id(&self, slot: usize) -> String {
        format!("r{}:{}", self.row_of(slot), self.pos_of(slot))
    }

    pub fn parse_slot_id(&self, id: &str) -> Result<usize> {
        let bad = || WickError::Parse(format!("bad slot id `{id}`"));
        let (r, p) = id.strip_prefix('r').and_then(|s| s.split_once(':')).ok_or_else(bad)?;
        let r: usize = r.parse().map_err(|_| bad())?;
        let p: usize = p.parse().map_err(|_| bad())?;
        self.slot(r, p).ok_or_else(bad)
    }

    /// Symbols carried by a set of slots.
    pub fn multiset_of(&self, slots: &[usize]) -> Multiset {
        Multiset::new(slots.iter().map(|&s| self.symbols[s]))
    }
}

/// Predicate selection for [`enumerate_diagrams`]. `false` means unconstrained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramFilter {
    pub non_flat: bool,
    pub connected: bool,
    pub total: bool,
    pub gaussian: bool,
    /// Require `K ≠ ∅`.
    pub nonempty_residual: bool,
}

impl DiagramFilter {
    pub fn all() -> Self {
        Self::default()
    }
    pub fn non_flat(mut self) -> Self {
        self.non_flat = true;
        self
    }
    pub fn connected(mut self) -> Self {
        self.connected = true;
        self
    }
    pub fn total(mut self) -> Self {
        self.total = true;
        self
    }
    pub fn gaussian(mut self) -> Self {
        self.gaussian = true;
        self
    }
    pub fn nonempty_residual(mut self) -> Self {
        self.nonempty_residual = true;
        self
    }
}

/// Borrowed diagram `(π, K)` handed to [`for_each_diagram`] callbacks.
#[derive(Clone, Copy, Debug)]
pub struct DiagramView<'a> {
    pub nodes: &'a NodeSet,
    pub edges: &'a [Vec<usize>],
    pub residual: &'a [usize],
}

impl DiagramView<'_> {
    pub fn is_total(&self) -> bool {
        self.residual.is_empty()
    }

    pub fn is_non_flat(&self) -> bool {
        self.edges.iter().all(|e| !self.is_flat_block(e))
    }

    pub fn is_gaussian(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }

    fn is_flat_block(&self, block: &[usize]) -> bool {
        let r = self.nodes.row_of(block[0]);
        block.iter().all(|&s| self.nodes.row_of(s) == r)
    }

    /// Row classes of the equivalence generated by the blocks of `π ⊔ {K}`.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let m = self.nodes.n_rows();
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        let blocks = self.edges.iter().map(|e| e.as_slice()).chain(
            (!self.residual.is_empty()).then_some(self.residual),
        );
        for block in blocks {
            let r0 = self.nodes.row_of(block[0]);
            for &s in &block[1..] {
                let (a, b) = (find(&mut parent, r0), find(&mut parent, self.nodes.row_of(s)));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut label = vec![usize::MAX; m];
        for r in 0..m {
            let root = find(&mut parent, r);
            if label[root] == usize::MAX {
                label[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[label[root]].push(r);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    pub fn matches(&self, f: &DiagramFilter) -> bool {
        (!f.total || self.is_total())
            && (!f.nonempty_residual || !self.residual.is_empty())
            && (!f.gaussian || self.is_gaussian())
            && (!f.non_flat || self.is_non_flat())
            && (!f.connected || self.is_connected())
    }

    /// Symbols of each edge, in edge order.
    pub fn edge_multisets(&self) -> Vec<Multiset> {
        self.edges.iter().map(|e| self.nodes.multiset_of(e)).collect()
    }

    pub fn residual_multiset(&self) -> Multiset {
        self.nodes.multiset_of(self.residual)
    }

    pub fn to_owned(&self) -> Diagram {
        Diagram {
            nodes: Arc::new(self.nodes.clone()),
            edges: self.edges.to_vec(),
            residual: self.residual.to_vec(),
        }
    }
}

/// Owned partial diagram `D = (π, K)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagram {
    nodes: Arc<NodeSet>,
    edges: Vec<Vec<usize>>,
    residual: Vec<usize>,
}

/// JSON shape of a diagram: slot ids are `r<row>:<pos>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramJson {
    pub rows: Vec<Vec<Symbol>>,
    pub edges: Vec<Vec<String>>,
    pub residual: Vec<String>,
}

impl Diagram {
    pub fn new(rows: &[Multiset], edges: Vec<Vec<usize>>, residual: Vec<usize>) -> Result<Diagram> {
        let nodes = NodeSet::new(rows);
        let mut all: Vec<usize> = edges.iter().flatten().chain(residual.iter()).copied().collect();
        all.sort_unstable();
        if all != (0..nodes.n_slots()).collect::<Vec<_>>() || edges.iter().any(|e| e.is_empty()) {
            return Err(WickError::Invalid("edges and residual must partition the slots".into()));
        }
        Ok(Diagram {
            nodes: Arc::new(nodes),
            edges,
            residual,
        })
    }

    pub fn view(&self) -> DiagramView<'_> {
        DiagramView {
            nodes: &self.nodes,
            edges: &self.edges,
            residual: &self.residual,
        }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn residual(&self) -> &[usize] {
        &self.residual
    }

    pub fn is_total(&self) -> bool {
        self.view().is_total()
    }

    pub fn is_non_flat(&self) -> bool {
        self.view().is_non_flat()
    }

    pub fn is_gaussian(&self) -> bool {
        self.view().is_gaussian()
    }

    pub fn is_connected(&self) -> bool {
        self.view().is_connected()
    }

    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        self.view().connected_components()
    }

    /// `π̄ = π ⊔ {K}` (just `π` when `K = ∅`).
    pub fn total_partition(&self) -> SetPartition {
        let mut blocks = self.edges.clone();
        if !self.residual.is_empty() {
            blocks.push(self.residual.clone());
        }
        SetPartition { blocks }
    }

    pub fn to_json(&self) -> DiagramJson {
        let ids = |v: &[usize]| v.iter().map(|&s| self.nodes.slot_id(s)).collect::<Vec<_>>();
        DiagramJson {
            rows: self.nodes.rows().iter().map(|r| r.items().to_vec()).collect(),
            edges: self.edges.iter().map(|e| ids(e)).collect(),
            residual: ids(&self.residual),
        }
    }

    pub fn from_json(json: &DiagramJson) -> Result<Diagram> {
        let rows: Vec<Multiset> = json.rows.iter().map(|r| Multiset::new(r.iter().copied())).collect();
        let nodes = NodeSet::new(&rows);
        let parse = |v: &[String]| v.iter().map(|s| nodes.parse_slot_id(s)).collect::<Result<Vec<_>>>();
        let edges = json.edges.iter().map(|e| parse(e)).collect::<Result<Vec<_>>>()?;
        let residual = parse(&json.residual)?;
        Diagram::new(&rows, edges, residual)
    }
}

struct Walk<'a, F> {
    nodes: &'a NodeSet,
    filter: DiagramFilter,
    blocks: Vec<Vec<usize>>,
    residual: Vec<usize>,
    visit: F,
}

impl<F: FnMut(&DiagramView)> Walk<'_, F> {
    fn step(&mut self, slot: usize) {
        let n = self.nodes.n_slots();
        if self.filter.gaussian {
            let open = self.blocks.iter().filter(|b| b.len() == 1).count();
            if open > n - slot {
                return;
            }
        }
        if slot == n {
            let view = DiagramView {
                nodes: self.nodes,
                edges: &self.blocks,
                residual: &self.residual,
            };
            if view.matches(&self.filter) {
                (self.visit)(&view);
            }
            return;
        }
        if !self.filter.total {
            self.residual.push(slot);
            self.step(slot + 1);
            self.residual.pop();
        }
        for b in 0..self.blocks.len() {
            if self.filter.gaussian && self.blocks[b].len() >= 2 {
                continue;
            }
            self.blocks[b].push(slot);
            self.step(slot + 1);
            self.blocks[b].pop();
        }
        self.blocks.push(vec![slot]);
        self.step(slot + 1);
        self.blocks.pop();
    }
}

/// Calls `visit` on every diagram over `rows` satisfying `filter`, once each,
/// in a fixed order.
pub fn for_each_diagram(rows: &[Multiset], filter: DiagramFilter, visit: impl FnMut(&DiagramView)) -> Result<()> {
    let nodes = NodeSet::new(rows);
    check_cap(nodes.n_slots())?;
    let mut walk = Walk {
        nodes: &nodes,
        filter,
        blocks: Vec::new(),
        residual: Vec::new(),
        visit,
    };
    walk.step(0);
    Ok(())
}

pub fn enumerate_diagrams(rows: &[Multiset], filter: DiagramFilter) -> Result<Vec<Diagram>> {
    let nodes = Arc::new(NodeSet::new(rows));
    let mut out = Vec::new();
    for_each_diagram(rows, filter, |d| {
        out.push(Diagram {
            nodes: Arc::clone(&nodes),
            edges: d.edges.to_vec(),
            residual: d.residual.to_vec(),
        })
    })?;
    Ok(out)
}

pub fn count_diagrams(rows: &[Multiset], filter: DiagramFilter) -> Result<u64> {
    let mut n = 0u64;
    for_each_diagram(rows, filter, |_| n += 1)?;
    Ok(n)
}

/// Stirling number of the second kind `{m atop h}`.
pub fn stirling2(m: usize, h: usize) -> u128 {
    if h > m {
        return 0;
    }
    let mut row = vec![0u128; h + 1];
    row[0] = 1;
    for i in 1..=m {
        for k in (1..=h.min(i)).rev() {
            row[k] = k as u128 * row[k] + row[k - 1];
        }
        row[0] = 0;
    }
    row[h]
}

/// Touchard polynomial `T_m(x) = Σ_h {m atop h} x^h`.
pub fn touchard<T: Scalar>(m: usize, x: &T) -> T {
    let mut acc = T::zero();
    let mut pow = T::one();
    for h in 0..=m {
        acc = acc + T::count(stirling2(m, h)) * pow.clone();
        pow = pow * x.clone();
    }
    acc
}
