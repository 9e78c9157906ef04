//! Routing tree rooted at the mobile sink.
//!
//! Membership means the node is connected to the sink. During repairs a
//! subtree may be detached and float (root without parent, internal links
//! and packet counts intact) until it is attached again or dissolved.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parent {
    Sink,
    Node(usize),
}

impl fmt::Display for Parent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parent::Sink => f.write_str("sink"),
            Parent::Node(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyViolation {
    #[error("member {0} has no parent")]
    NoParent(usize),
    #[error("anchor {0} is not attached to the sink")]
    AnchorOffSink(usize),
    #[error("normal node {0} is attached to the sink")]
    NormalOnSink(usize),
    #[error("node {child} has parent {parent} which is not a member")]
    ParentNotMember { child: usize, parent: usize },
    #[error("link {child} -> {parent} is not in the neighbor table")]
    NotNeighbors { child: usize, parent: usize },
    #[error("dead node {0} is part of the tree")]
    DeadMember(usize),
    #[error("cycle through node {0}")]
    Cycle(usize),
    #[error("q({node}) = {found}, expected {expected}")]
    BadCount {
        node: usize,
        found: u32,
        expected: u32,
    },
    #[error("children list of {0} disagrees with parent links")]
    ChildrenMismatch(usize),
    #[error("non-member {0} still carries tree state")]
    StaleState(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    parent: Vec<Option<Parent>>,
    children: Vec<Vec<usize>>,
    sink_children: Vec<usize>,
    q: Vec<u32>,
    member: Vec<bool>,
    labeled: Vec<bool>,
}

impl Topology {
    /// A tree holding only the sink.
    pub fn empty(n: usize) -> Self {
        Self {
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            sink_children: Vec::new(),
            q: vec![0; n],
            member: vec![false; n],
            labeled: vec![false; n],
        }
    }

    /// Builds a tree from a parent vector. Entries must form a forest whose
    /// roots hang off the sink; nodes that do not reach the sink are left
    /// out.
    pub fn from_parents(parents: &[Option<Parent>]) -> Self {
        let n = parents.len();
        let mut t = Self::empty(n);
        for v in 0..n {
            t.parent[v] = parents[v];
            match parents[v] {
                Some(Parent::Sink) => t.sink_children.push(v),
                Some(Parent::Node(p)) => t.children[p].push(v),
                None => {}
            }
        }
        let mut stack = t.sink_children.clone();
        while let Some(v) = stack.pop() {
            t.member[v] = true;
            stack.extend(t.children[v].iter().copied());
        }
        for v in 0..n {
            if !t.member[v] {
                t.parent[v] = None;
                t.children[v].clear();
            }
        }
        for list in &mut t.children {
            list.retain(|&c| t.member[c]);
        }
        t.recompute_q();
        t
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn is_member(&self, v: usize) -> bool {
        self.member[v]
    }

    pub fn parent(&self, v: usize) -> Option<Parent> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<Parent>] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn sink_children(&self) -> &[usize] {
        &self.sink_children
    }

    /// Packets `v` transmits per round: its own plus all descendants'.
    pub fn q(&self, v: usize) -> u32 {
        self.q[v]
    }

    pub fn is_labeled(&self, v: usize) -> bool {
        self.labeled[v]
    }

    pub fn set_labeled(&mut self, v: usize) {
        self.labeled[v] = true;
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.member[v])
    }

    pub fn member_count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    /// Strict ancestors of `v`, nearest first, sink excluded.
    pub fn ancestors(&self, v: usize) -> Ancestors<'_> {
        Ancestors {
            topo: self,
            next: self.parent[v],
        }
    }

    /// Hops from `v` to the sink; anchors are one hop away.
    pub fn depth(&self, v: usize) -> usize {
        1 + self.ancestors(v).count()
    }

    /// True if `x` lies in the subtree rooted at `v` (including `v`).
    pub fn in_subtree(&self, x: usize, v: usize) -> bool {
        x == v || self.ancestors(x).any(|a| a == v)
    }

    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    fn set_membership(&mut self, root: usize, member: bool) {
        for x in self.subtree(root) {
            self.member[x] = member;
        }
    }

    /// Detaches the subtree rooted at `v`; it keeps its internal links.
    pub fn detach(&mut self, v: usize) {
        let q = self.q[v];
        match self.parent[v].take() {
            Some(Parent::Sink) => self.sink_children.retain(|&c| c != v),
            Some(Parent::Node(p)) => {
                self.children[p].retain(|&c| c != v);
                self.q[p] -= q;
                for a in self.ancestors(p).collect::<Vec<_>>() {
                    self.q[a] -= q;
                }
            }
            None => {}
        }
        self.set_membership(v, false);
    }

    /// Hangs the floating subtree rooted at `v` under `parent`.
    pub fn attach(&mut self, v: usize, parent: Parent) {
        debug_assert!(self.parent[v].is_none(), "node {v} is already attached");
        if self.q[v] == 0 {
            self.q[v] = 1;
        }
        let q = self.q[v];
        self.parent[v] = Some(parent);
        match parent {
            Parent::Sink => insert_sorted(&mut self.sink_children, v),
            Parent::Node(p) => {
                insert_sorted(&mut self.children[p], v);
                self.q[p] += q;
                for a in self.ancestors(p).collect::<Vec<_>>() {
                    self.q[a] += q;
                }
            }
        }
        if self.parent_is_member(parent) {
            self.set_membership(v, true);
        }
    }

    fn parent_is_member(&self, parent: Parent) -> bool {
        match parent {
            Parent::Sink => true,
            Parent::Node(p) => self.member[p],
        }
    }

    pub fn reparent(&mut self, v: usize, parent: Parent) {
        self.detach(v);
        self.attach(v, parent);
    }

    /// Removes `v` from the tree. Its children become floating subtree
    /// roots, which are returned.
    pub fn remove(&mut self, v: usize) -> Vec<usize> {
        self.detach(v);
        let kids = std::mem::take(&mut self.children[v]);
        for &c in &kids {
            self.parent[c] = None;
        }
        self.q[v] = 0;
        kids
    }

    /// Breaks a floating subtree into loose single nodes.
    pub fn dissolve(&mut self, root: usize) -> Vec<usize> {
        debug_assert!(!self.member[root]);
        let nodes = self.subtree(root);
        for &x in &nodes {
            self.parent[x] = None;
            self.children[x].clear();
            self.q[x] = 0;
        }
        nodes
    }

    pub fn recompute_q(&mut self) {
        for v in 0..self.len() {
            self.q[v] = 0;
        }
        let members: Vec<usize> = self.members().collect();
        for &v in &members {
            self.q[v] += 1;
            let mut cur = self.parent[v];
            while let Some(Parent::Node(p)) = cur {
                self.q[p] += 1;
                cur = self.parent[p];
            }
        }
    }

    /// Checks every structural invariant against the network.
    pub fn validate(&self, net: &Network) -> Result<(), TopologyViolation> {
        let n = self.len();
        for v in 0..n {
            if !self.member[v] {
                if self.parent[v].is_some() || !self.children[v].is_empty() || self.q[v] != 0 {
                    return Err(TopologyViolation::StaleState(v));
                }
                continue;
            }
            if !net.nodes[v].is_alive() {
                return Err(TopologyViolation::DeadMember(v));
            }
            match self.parent[v] {
                None => return Err(TopologyViolation::NoParent(v)),
                Some(Parent::Sink) => {
                    if net.nodes[v].role != Role::Anchor {
                        return Err(TopologyViolation::NormalOnSink(v));
                    }
                    if !self.sink_children.contains(&v) {
                        return Err(TopologyViolation::ChildrenMismatch(v));
                    }
                }
                Some(Parent::Node(p)) => {
                    if net.nodes[v].role == Role::Anchor {
                        return Err(TopologyViolation::AnchorOffSink(v));
                    }
                    if !self.member[p] {
                        return Err(TopologyViolation::ParentNotMember {
                            child: v,
                            parent: p,
                        });
                    }
                    if net.table.distance(v, p).is_none() {
                        return Err(TopologyViolation::NotNeighbors {
                            child: v,
                            parent: p,
                        });
                    }
                    if !self.children[p].contains(&v) {
                        return Err(TopologyViolation::ChildrenMismatch(p));
                    }
                }
            }
            // walking up must reach the sink within n steps
            let mut cur = self.parent[v];
            let mut steps = 0;
            while let Some(Parent::Node(p)) = cur {
                steps += 1;
                if steps > n {
                    return Err(TopologyViolation::Cycle(v));
                }
                cur = self.parent[p];
            }
            for &c in &self.children[v] {
                if self.parent[c] != Some(Parent::Node(v)) {
                    return Err(TopologyViolation::ChildrenMismatch(v));
                }
            }
        }
        for &c in &self.sink_children {
            if self.parent[c] != Some(Parent::Sink) {
                return Err(TopologyViolation::ChildrenMismatch(c));
            }
        }
        for v in 0..n {
            if !self.member[v] {
                continue;
            }
            let expected = 1 + self.children[v].iter().map(|&c| self.q[c]).sum::<u32>();
            if self.q[v] != expected {
                return Err(TopologyViolation::BadCount {
                    node: v,
                    found: self.q[v],
                    expected,
                });
            }
        }
        Ok(())
    }
}

fn insert_sorted(list: &mut Vec<usize>, v: usize) {
    if let Err(i) = list.binary_search(&v) {
        list.insert(i, v);
    }
}

pub struct Ancestors<'a> {
    topo: &'a Topology,
    next: Option<Parent>,
}

impl Iterator for Ancestors<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self.next {
            Some(Parent::Node(p)) => {
                self.next = self.topo.parent[p];
                Some(p)
            }
            _ => None,
        }
    }
}
