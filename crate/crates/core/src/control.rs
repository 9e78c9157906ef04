//! Tree construction and event-driven repair.
//!
//! Construction grows the tree from the anchors outward. Every round each
//! member nominates the non-member neighbor it could take on most cheaply
//! (initial selection); among all nominations the attachment whose worst
//! affected load is smallest wins (final selection). The same min-max
//! criterion re-homes subtrees after a node is labeled at its threshold or
//! dies.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::energy::EnergyParams;
use crate::network::{EnergyStatus, Network, Role};
use crate::topology::{Parent, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("no live anchor node to root the tree")]
    NoAnchors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Threshold,
    Warning,
    Death,
    Isolation,
    Reparent,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Threshold => "threshold",
            EventKind::Warning => "warning",
            EventKind::Death => "death",
            EventKind::Isolation => "isolation",
            EventKind::Reparent => "reparent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub round: u32,
    pub kind: EventKind,
    pub node: usize,
    pub old_parent: Option<Parent>,
    pub new_parent: Option<Parent>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub round: u32,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn push(
        &mut self,
        kind: EventKind,
        node: usize,
        old_parent: Option<Parent>,
        new_parent: Option<Parent>,
    ) {
        self.events.push(Event {
            round: self.round,
            kind,
            node,
            old_parent,
            new_parent,
        });
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Ranking key of a prospective attachment: worst load first, then the
/// lower candidate id, then the lower parent id.
#[derive(Debug, Clone, Copy)]
struct Offer {
    worst: f64,
    node: usize,
    parent: usize,
}

impl Offer {
    fn cmp(&self, other: &Offer) -> Ordering {
        self.worst
            .total_cmp(&other.worst)
            .then(self.node.cmp(&other.node))
            .then(self.parent.cmp(&other.parent))
    }
}

fn keep_best(best: &mut Option<Offer>, offer: Offer) {
    if best.map_or(true, |b| offer.cmp(&b) == Ordering::Less) {
        *best = Some(offer);
    }
}

fn load(net: &Network, params: &EnergyParams, v: usize, q: u32, d: f64) -> f64 {
    params.round_drain(q, d) / net.nodes[v].energy
}

/// Worst relative load over `v` (carrying `q` packets) and the members on
/// the path from `p` to the sink, after each of them takes on `q` more
/// packets.
pub(crate) fn attachment_worst(
    topo: &Topology,
    net: &Network,
    params: &EnergyParams,
    v: usize,
    q: u32,
    p: usize,
) -> f64 {
    let mut worst = load(net, params, v, q, net.link_distance(v, Parent::Node(p)));
    for a in std::iter::once(p).chain(topo.ancestors(p)) {
        let d = net.link_distance(a, topo.parent(a).expect("ancestor is attached"));
        worst = worst.max(load(net, params, a, topo.q(a) + q, d));
    }
    worst
}

/// Worst load over `v` and its would-be ancestors if `v` moved under `p`.
/// Ancestors shared with the current path keep their packet count.
fn moved_worst(topo: &Topology, net: &Network, params: &EnergyParams, v: usize, p: usize) -> f64 {
    let q = topo.q(v);
    let mut worst = load(net, params, v, q, net.link_distance(v, Parent::Node(p)));
    for a in std::iter::once(p).chain(topo.ancestors(p)) {
        let shared = topo.in_subtree(v, a);
        let qa = if shared { topo.q(a) } else { topo.q(a) + q };
        let d = net.link_distance(a, topo.parent(a).expect("ancestor is attached"));
        worst = worst.max(load(net, params, a, qa, d));
    }
    worst
}

/// Worst relative load over `v` and its current ancestors.
fn current_worst(topo: &Topology, net: &Network, params: &EnergyParams, v: usize) -> f64 {
    std::iter::once(v)
        .chain(topo.ancestors(v))
        .map(|a| {
            let d = net.link_distance(a, topo.parent(a).expect("attached"));
            load(net, params, a, topo.q(a), d)
        })
        .fold(0.0, f64::max)
}

fn open_parent(topo: &Topology, net: &Network, p: usize) -> bool {
    topo.is_member(p) && net.nodes[p].can_parent() && !topo.is_labeled(p)
}

/// Grows the tree over loose nodes with the two-phase greedy rule until no
/// loose node has an open member neighbor.
fn grow(
    topo: &mut Topology,
    net: &Network,
    params: &EnergyParams,
    loose: &mut Vec<bool>,
    mut on_attach: impl FnMut(usize, usize),
) {
    loop {
        let mut best: Option<Offer> = None;
        for m in topo.members() {
            if !open_parent(topo, net, m) {
                continue;
            }
            // initial selection: cheapest loose neighbor of this member
            let mut pick: Option<(f64, usize)> = None;
            for nb in net.table.neighbors(m) {
                if !loose[nb.id] {
                    continue;
                }
                let l = load(net, params, nb.id, 1, nb.dist);
                if pick.map_or(true, |(pl, _)| l < pl) {
                    pick = Some((l, nb.id));
                }
            }
            if let Some((_, c)) = pick {
                let worst = attachment_worst(topo, net, params, c, 1, m);
                keep_best(
                    &mut best,
                    Offer {
                        worst,
                        node: c,
                        parent: m,
                    },
                );
            }
        }
        let Some(offer) = best else { break };
        topo.attach(offer.node, Parent::Node(offer.parent));
        loose[offer.node] = false;
        on_attach(offer.node, offer.parent);
    }
}

/// Builds the initial routing tree. Live nodes that cannot be reached are
/// left out and reported through [`EventKind::Isolation`] events.
pub fn build_spanning_tree(
    net: &Network,
    params: &EnergyParams,
    log: &mut EventLog,
) -> Result<Topology, ControlError> {
    let n = net.len();
    let mut topo = Topology::empty(n);
    let anchors: Vec<usize> = (0..n)
        .filter(|&v| net.nodes[v].role == Role::Anchor && net.nodes[v].is_alive())
        .collect();
    if anchors.is_empty() {
        return Err(ControlError::NoAnchors);
    }
    for &a in &anchors {
        topo.attach(a, Parent::Sink);
    }
    // threshold nodes are never nominated during construction
    let mut loose: Vec<bool> = (0..n)
        .map(|v| !topo.is_member(v) && net.nodes[v].can_parent())
        .collect();
    grow(&mut topo, net, params, &mut loose, |_, _| {});
    for v in 0..n {
        if net.nodes[v].is_alive() && !topo.is_member(v) {
            log.push(EventKind::Isolation, v, None, None);
        }
    }
    debug_assert_eq!(topo.validate(net), Ok(()));
    Ok(topo)
}

/// Re-homes floating subtrees by the final-selection rule. `allowed` filters
/// prospective parents. Returns the roots that found no parent.
fn rehome_subtrees(
    topo: &mut Topology,
    net: &Network,
    params: &EnergyParams,
    mut roots: Vec<usize>,
    old_parent: impl Fn(usize) -> Option<Parent>,
    allowed: impl Fn(&Topology, usize) -> bool,
    log: &mut EventLog,
) -> Vec<usize> {
    loop {
        let mut best: Option<Offer> = None;
        for &r in &roots {
            let q = topo.q(r);
            for nb in net.table.neighbors(r) {
                let p = nb.id;
                if !open_parent(topo, net, p) || !allowed(topo, p) {
                    continue;
                }
                let worst = attachment_worst(topo, net, params, r, q, p);
                keep_best(
                    &mut best,
                    Offer {
                        worst,
                        node: r,
                        parent: p,
                    },
                );
            }
        }
        let Some(offer) = best else { return roots };
        topo.attach(offer.node, Parent::Node(offer.parent));
        roots.retain(|&r| r != offer.node);
        log.push(
            EventKind::Reparent,
            offer.node,
            old_parent(offer.node),
            Some(Parent::Node(offer.parent)),
        );
    }
}

/// Labels a node that reached its threshold band and moves its children
/// elsewhere. A child with nowhere else to go stays on `v` and a warning is
/// logged.
pub fn local_search_reparent(
    topo: &mut Topology,
    v: usize,
    net: &Network,
    params: &EnergyParams,
    log: &mut EventLog,
) {
    debug_assert!(topo.is_member(v));
    topo.set_labeled(v);
    let kids = topo.children(v).to_vec();
    if kids.is_empty() {
        return;
    }
    for &c in &kids {
        topo.detach(c);
    }
    let stuck = rehome_subtrees(
        topo,
        net,
        params,
        kids,
        |_| Some(Parent::Node(v)),
        |_, p| p != v,
        log,
    );
    for c in stuck {
        topo.attach(c, Parent::Node(v));
        log.push(
            EventKind::Warning,
            c,
            Some(Parent::Node(v)),
            Some(Parent::Node(v)),
        );
    }
    debug_assert_eq!(topo.validate(net), Ok(()));
}

/// Moves a node in its warning band to a better parent if one exists.
/// Returns whether the node moved.
pub fn warning_reparent(
    topo: &mut Topology,
    v: usize,
    net: &Network,
    params: &EnergyParams,
    log: &mut EventLog,
) -> bool {
    if !topo.is_member(v) || net.nodes[v].role == Role::Anchor {
        return false;
    }
    let Some(old) = topo.parent(v) else {
        return false;
    };
    let q = topo.q(v);
    let before_worst = current_worst(topo, net, params, v);
    let before_own = load(net, params, v, q, net.link_distance(v, old));

    let mut best: Option<Offer> = None;
    for nb in net.table.neighbors(v) {
        let p = nb.id;
        if Parent::Node(p) == old || !open_parent(topo, net, p) || topo.in_subtree(p, v) {
            continue;
        }
        let worst = moved_worst(topo, net, params, v, p);
        keep_best(
            &mut best,
            Offer {
                worst,
                node: v,
                parent: p,
            },
        );
    }
    let Some(offer) = best else { return false };
    let own = load(
        net,
        params,
        v,
        q,
        net.link_distance(v, Parent::Node(offer.parent)),
    );
    if own < before_own && offer.worst <= before_worst {
        topo.reparent(v, Parent::Node(offer.parent));
        log.push(
            EventKind::Reparent,
            v,
            Some(old),
            Some(Parent::Node(offer.parent)),
        );
        debug_assert_eq!(topo.validate(net), Ok(()));
        true
    } else {
        false
    }
}

/// Takes the nodes that died in one round out of the tree and reconnects
/// what hung below them. Returns the nodes that could not be reconnected.
pub fn remove_dead(
    topo: &mut Topology,
    dead: &[usize],
    net: &Network,
    params: &EnergyParams,
    log: &mut EventLog,
) -> Vec<usize> {
    let mut old = vec![None; net.len()];
    let mut roots = Vec::new();
    for &v in dead {
        debug_assert_eq!(net.nodes[v].status, EnergyStatus::Dead);
        for c in topo.remove(v) {
            old[c] = Some(Parent::Node(v));
            roots.push(c);
        }
    }
    roots.retain(|&c| net.nodes[c].is_alive());
    roots.sort_unstable();
    if roots.is_empty() {
        debug_assert_eq!(topo.validate(net), Ok(()));
        return Vec::new();
    }
    let stuck = rehome_subtrees(topo, net, params, roots, |c| old[c], |_, _| true, log);
    if stuck.is_empty() {
        debug_assert_eq!(topo.validate(net), Ok(()));
        return Vec::new();
    }
    // break the orphaned subtrees apart and let their nodes find any route in
    let mut loose = vec![false; net.len()];
    let mut orphans = Vec::new();
    for r in stuck {
        for x in topo.dissolve(r) {
            loose[x] = true;
            orphans.push(x);
        }
    }
    grow(topo, net, params, &mut loose, |c, p| {
        log.push(EventKind::Reparent, c, None, Some(Parent::Node(p)));
    });
    orphans.sort_unstable();
    let isolated: Vec<usize> = orphans
        .into_iter()
        .filter(|&x| !topo.is_member(x))
        .collect();
    for &x in &isolated {
        log.push(EventKind::Isolation, x, None, None);
    }
    debug_assert_eq!(topo.validate(net), Ok(()));
    isolated
}
