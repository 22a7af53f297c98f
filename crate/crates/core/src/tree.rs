//! Prediction suffix tree structure shared by the VMM and the Dirichlet-VMM.
//!
//! A node's context is stored oldest symbol first, so the last element is the
//! symbol immediately before the prediction point. A child extends its
//! parent's context by one symbol further into the past.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Symbol};
use crate::error::{Error, Result};

/// Growth criteria for the context tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum context length `L`.
    pub max_depth: usize,
    /// Minimum number of observed continuations `c_min`.
    pub min_count: u64,
    /// Minimum next-symbol probability ratio against the parent, `ε_min`.
    pub ratio_threshold: f64,
}

impl TreeParams {
    pub fn new(max_depth: usize, min_count: u64, ratio_threshold: f64) -> Result<Self> {
        let p = Self {
            max_depth,
            min_count,
            ratio_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter("max depth L must be >= 1".into()));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidParameter("min count c_min must be >= 1".into()));
        }
        if self.ratio_threshold.is_nan() || self.ratio_threshold < 0.0 {
            return Err(Error::InvalidParameter(
                "ratio threshold must be a nonnegative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextNode {
    context: Vec<Symbol>,
    counts: Vec<u64>,
    parent: Option<usize>,
    children: BTreeMap<Symbol, usize>,
}

impl ContextNode {
    pub fn context(&self) -> &[Symbol] {
        &self.context
    }

    /// Next-symbol counts observed after this context.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn children(&self) -> &BTreeMap<Symbol, usize> {
        &self.children
    }

    pub fn depth(&self) -> usize {
        self.context.len()
    }
}

/// Context tree with empirical next-symbol counts. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTree {
    alphabet_size: usize,
    params: TreeParams,
    nodes: Vec<ContextNode>,
}

/// Corpus concatenated into one array; windows never cross a sequence start.
struct Flat {
    data: Vec<u8>,
    start: Vec<u32>,
}

impl Flat {
    fn new(corpus: &Corpus) -> Self {
        let n = corpus.total_steps();
        let mut data = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n);
        for seq in &corpus.sequences {
            let s = data.len() as u32;
            for sym in seq.steps() {
                data.push(sym.index() as u8);
                start.push(s);
            }
        }
        Self { data, start }
    }

    /// Symbol `depth + 1` steps before position `p`, if inside the sequence.
    #[inline]
    fn preceding(&self, p: u32, depth: usize) -> Option<u8> {
        let back = depth as u32 + 1;
        (p >= self.start[p as usize] + back).then(|| self.data[(p - back) as usize])
    }

    /// Next-symbol counts after `context` by direct scan.
    fn scan(&self, context: &[Symbol], alphabet: usize) -> Vec<u64> {
        let d = context.len();
        let mut counts = vec![0u64; alphabet];
        for p in 0..self.data.len() {
            let s = self.start[p] as usize;
            if p >= s + d
                && self.data[p - d..p]
                    .iter()
                    .zip(context)
                    .all(|(a, b)| *a as usize == b.index())
            {
                counts[self.data[p] as usize] += 1;
            }
        }
        counts
    }
}

const NONE: u32 = u32::MAX;

/// Compact record of every examined candidate, kept for ancestor repair.
#[derive(Clone, Copy)]
struct CandMeta {
    parent: u32,
    symbol: u8,
    node: u32,
}

struct Cand {
    positions: Vec<u32>,
    counts: Vec<u64>,
}

/// Ratio test: some next symbol is at least `threshold` times more likely
/// under the candidate than under its parent.
fn passes_ratio(child: &[u64], parent: &[u64], threshold: f64) -> bool {
    let ct: u64 = child.iter().sum();
    let pt: u64 = parent.iter().sum();
    if ct == 0 || pt == 0 {
        return false;
    }
    child.iter().zip(parent).any(|(&c, &p)| {
        // c/ct >= threshold * p/pt, cross-multiplied
        p > 0 && (c as f64) * (pt as f64) >= threshold * (p as f64) * (ct as f64)
    })
}

impl ContextTree {
    /// Grows the tree breadth-first from the empty context.
    ///
    /// Every context of length `<= L` seen at least `c_min` times is examined;
    /// it becomes a node when its next-symbol distribution passes the ratio
    /// test against its one-shorter suffix. Ancestors of accepted contexts are
    /// inserted as needed so the tree stays suffix-closed. Contexts seen fewer
    /// than `c_min` times cut their whole subtree.
    pub fn grow(corpus: &Corpus, params: TreeParams) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() || corpus.total_steps() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let alphabet = corpus.alphabet_size;
        let flat = Flat::new(corpus);
        let mut root_counts = vec![0u64; alphabet];
        for &s in &flat.data {
            root_counts[s as usize] += 1;
        }
        let mut tree = Self {
            alphabet_size: alphabet,
            params,
            nodes: vec![ContextNode {
                context: Vec::new(),
                counts: root_counts.clone(),
                parent: None,
                children: BTreeMap::new(),
            }],
        };

        let mut metas: Vec<Vec<CandMeta>> = vec![vec![CandMeta {
            parent: NONE,
            symbol: 0,
            node: 0,
        }]];
        let mut level: Vec<Cand> = vec![Cand {
            positions: (0..flat.data.len() as u32).collect(),
            counts: root_counts,
        }];

        let mut depth = 0usize;
        let mut keyed: Vec<(u8, u32)> = Vec::new();
        while depth < params.max_depth && !level.is_empty() {
            let mut next: Vec<Cand> = Vec::new();
            let mut next_meta: Vec<CandMeta> = Vec::new();
            for (ci, cand) in level.iter().enumerate() {
                keyed.clear();
                keyed.extend(
                    cand.positions
                        .iter()
                        .filter_map(|&p| flat.preceding(p, depth).map(|s| (s, p))),
                );
                keyed.sort_unstable();
                let mut i = 0;
                while i < keyed.len() {
                    let sym = keyed[i].0;
                    let mut j = i;
                    while j < keyed.len() && keyed[j].0 == sym {
                        j += 1;
                    }
                    if (j - i) as u64 >= params.min_count {
                        let positions: Vec<u32> = keyed[i..j].iter().map(|k| k.1).collect();
                        let mut counts = vec![0u64; alphabet];
                        for &p in &positions {
                            counts[flat.data[p as usize] as usize] += 1;
                        }
                        let accepted = passes_ratio(&counts, &cand.counts, params.ratio_threshold);
                        next_meta.push(CandMeta {
                            parent: ci as u32,
                            symbol: sym,
                            node: NONE,
                        });
                        if accepted {
                            let idx = next_meta.len() - 1;
                            let node =
                                tree.attach(&flat, &mut metas, &level, depth, ci, sym, counts.clone());
                            next_meta[idx].node = node;
                        }
                        next.push(Cand { positions, counts });
                    }
                    i = j;
                }
            }
            metas.push(next_meta);
            level = next;
            depth += 1;
        }
        Ok(tree)
    }

    /// Inserts the child `sym` of candidate `ci` at `depth`, creating missing
    /// ancestors first. Returns the new node index.
    #[allow(clippy::too_many_arguments)]
    fn attach(
        &mut self,
        flat: &Flat,
        metas: &mut [Vec<CandMeta>],
        level: &[Cand],
        depth: usize,
        ci: usize,
        sym: u8,
        counts: Vec<u64>,
    ) -> u32 {
        let parent = self.ensure(flat, metas, level, depth, ci);
        self.push_child(parent, Symbol::new(sym), counts) as u32
    }

    /// Node index for candidate `idx` at level `lvl`, creating it (and its
    /// ancestors) if it was examined but not accepted.
    fn ensure(
        &mut self,
        flat: &Flat,
        metas: &mut [Vec<CandMeta>],
        level: &[Cand],
        current: usize,
        idx: usize,
    ) -> usize {
        // walk up to the nearest existing node
        let mut chain: Vec<(usize, usize)> = Vec::new();
        let (mut l, mut i) = (current, idx);
        while metas[l][i].node == NONE {
            chain.push((l, i));
            i = metas[l][i].parent as usize;
            l -= 1;
        }
        let mut node = metas[l][i].node as usize;
        for &(l, i) in chain.iter().rev() {
            let sym = Symbol::new(metas[l][i].symbol);
            let counts = if l == current {
                level[i].counts.clone()
            } else {
                let mut ctx = vec![sym];
                ctx.extend_from_slice(&self.nodes[node].context);
                flat.scan(&ctx, self.alphabet_size)
            };
            node = self.push_child(node, sym, counts);
            metas[l][i].node = node as u32;
        }
        node
    }

    fn push_child(&mut self, parent: usize, sym: Symbol, counts: Vec<u64>) -> usize {
        let mut context = Vec::with_capacity(self.nodes[parent].context.len() + 1);
        context.push(sym);
        context.extend_from_slice(&self.nodes[parent].context);
        let id = self.nodes.len();
        self.nodes.push(ContextNode {
            context,
            counts,
            parent: Some(parent),
            children: BTreeMap::new(),
        });
        self.nodes[parent].children.insert(sym, id);
        id
    }

    /// Tree holding exactly `contexts` and their suffixes, with counts taken
    /// from `corpus`. Contexts need not occur in the corpus.
    pub fn with_contexts(corpus: &Corpus, contexts: &[Vec<Symbol>]) -> Result<Self> {
        let alphabet = corpus.alphabet_size;
        if let Some(bad) = contexts.iter().flatten().find(|s| s.index() >= alphabet) {
            return Err(Error::InvalidSequence(format!(
                "context symbol {} outside alphabet",
                bad.index()
            )));
        }
        let flat = Flat::new(corpus);
        let max_depth = contexts.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut tree = Self {
            alphabet_size: alphabet,
            params: TreeParams {
                max_depth,
                min_count: 1,
                ratio_threshold: 0.0,
            },
            nodes: vec![ContextNode {
                context: Vec::new(),
                counts: flat.scan(&[], alphabet),
                parent: None,
                children: BTreeMap::new(),
            }],
        };
        for ctx in contexts {
            let mut node = 0;
            for (k, &sym) in ctx.iter().rev().enumerate() {
                node = match tree.nodes[node].children.get(&sym) {
                    Some(&c) => c,
                    None => {
                        let suffix = &ctx[ctx.len() - k - 1..];
                        let counts = flat.scan(suffix, alphabet);
                        tree.push_child(node, sym, counts)
                    }
                };
            }
        }
        Ok(tree)
    }

    /// Rebuilds a tree from stored nodes (parents before children).
    pub(crate) fn from_parts(
        alphabet_size: usize,
        params: TreeParams,
        parts: Vec<(Option<usize>, Option<Symbol>, Vec<u64>)>,
    ) -> Result<Self> {
        let mut nodes: Vec<ContextNode> = Vec::with_capacity(parts.len());
        for (i, (parent, sym, counts)) in parts.into_iter().enumerate() {
            if counts.len() != alphabet_size {
                return Err(Error::ModelFormat(format!("node {i} has {} counts", counts.len())));
            }
            let context = match (parent, sym) {
                (None, None) if i == 0 => Vec::new(),
                (Some(p), Some(s)) if p < i && s.index() < alphabet_size => {
                    if nodes[p].children.insert(s, i).is_some() {
                        return Err(Error::ModelFormat(format!("duplicate child at node {p}")));
                    }
                    let mut c = vec![s];
                    c.extend_from_slice(&nodes[p].context);
                    c
                }
                _ => return Err(Error::ModelFormat(format!("node {i} is malformed"))),
            };
            nodes.push(ContextNode {
                context,
                counts,
                parent,
                children: BTreeMap::new(),
            });
        }
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree has no root".into()));
        }
        Ok(Self {
            alphabet_size,
            params,
            nodes,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn nodes(&self) -> &[ContextNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ContextNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Length of the longest stored context.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(ContextNode::depth).max().unwrap_or(0)
    }

    /// Deepest node whose context is a suffix of `context`.
    pub fn lookup(&self, context: &[Symbol]) -> usize {
        let mut node = 0;
        for sym in context.iter().rev() {
            match self.nodes[node].children.get(sym) {
                Some(&child) => node = child,
                None => break,
            }
        }
        node
    }

    /// Node with exactly this context, if stored.
    pub fn find(&self, context: &[Symbol]) -> Option<usize> {
        let node = self.lookup(context);
        (self.nodes[node].context.len() == context.len()).then_some(node)
    }
}
