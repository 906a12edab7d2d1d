//! Unsupervised Small-World graph growth and small-world metrics.
//!
//! A new DO enters at a uniformly random node and wanders, gleaning the
//! friend lists of the nodes it visits. At each contact it links with
//! probability `link_probability`; after the first link it befriends a
//! fraction of the gleaned candidates.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{DoId, Host, HostId};

/// Knobs of the wandering process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UswParams {
    pub link_probability: f64,
    pub extra_link_fraction: f64,
}

impl Default for UswParams {
    fn default() -> Self {
        UswParams { link_probability: 0.5, extra_link_fraction: 0.33 }
    }
}

/// Undirected simple graph over DOs. A DO becomes a node when it makes its
/// first link (DO 1 is a node from the start).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FriendshipGraph {
    adj: Vec<Vec<DoId>>,
    present: Vec<bool>,
    nodes: Vec<DoId>,
    edge_count: usize,
}

impl FriendshipGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, id: DoId) {
        let need = id.index() + 1;
        if self.adj.len() < need {
            self.adj.resize_with(need, Vec::new);
            self.present.resize(need, false);
        }
    }

    pub fn add_node(&mut self, id: DoId) {
        self.ensure(id);
        if !self.present[id.index()] {
            self.present[id.index()] = true;
            self.nodes.push(id);
        }
    }

    pub fn contains(&self, id: DoId) -> bool {
        self.present.get(id.index()).copied().unwrap_or(false)
    }

    /// Nodes in the order they joined.
    pub fn nodes(&self) -> &[DoId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Friends of `id` in ascending id order.
    pub fn friends(&self, id: DoId) -> &[DoId] {
        self.adj.get(id.index()).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn degree(&self, id: DoId) -> usize {
        self.friends(id).len()
    }

    pub fn has_edge(&self, a: DoId, b: DoId) -> bool {
        self.friends(a).binary_search(&b).is_ok()
    }

    /// Adds the undirected edge `a`–`b`, creating either endpoint as needed.
    /// Returns false for self-loops and existing edges.
    pub fn add_edge(&mut self, a: DoId, b: DoId) -> bool {
        if a == b || self.has_edge(a, b) {
            return false;
        }
        self.add_node(a);
        self.add_node(b);
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut self.adj[x.index()];
            let pos = list.binary_search(&y).unwrap_err();
            list.insert(pos, y);
        }
        self.edge_count += 1;
        true
    }

    /// All edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> Vec<(DoId, DoId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (i, list) in self.adj.iter().enumerate() {
            let a = DoId::from_index(i);
            out.extend(list.iter().filter(|b| **b > a).map(|b| (a, *b)));
        }
        out
    }

    pub fn edge_list_string(&self) -> String {
        let mut s = String::new();
        for (a, b) in self.edges() {
            s.push_str(&format!("{} {}\n", a.0, b.0));
        }
        s
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        fs::write(path, self.edge_list_string()).map_err(|e| Error::io(path, e))
    }

    pub fn is_connected(&self) -> bool {
        self.largest_component().len() == self.node_count()
    }

    /// Nodes of the largest connected component, ties broken by the
    /// component containing the lowest id.
    pub fn largest_component(&self) -> Vec<DoId> {
        let mut seen = vec![false; self.adj.len()];
        let mut best: Vec<DoId> = Vec::new();
        let mut sorted = self.nodes.clone();
        sorted.sort();
        for &start in &sorted {
            if seen[start.index()] {
                continue;
            }
            let mut comp = vec![start];
            seen[start.index()] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &v in self.friends(u) {
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        comp.push(v);
                    }
                }
            }
            if comp.len() > best.len() {
                best = comp;
            }
        }
        best
    }
}

/// Progress of one wandering DO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WanderState {
    pub do_id: DoId,
    pub current: DoId,
    pub candidates: Vec<DoId>,
    pub connected: bool,
    pub steps: u64,
    /// Node reached by the first link.
    pub linked_to: Option<DoId>,
}

impl WanderState {
    fn glean(&mut self, ids: &[DoId]) {
        for &id in ids {
            if id != self.do_id && !self.candidates.contains(&id) {
                self.candidates.push(id);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WanderOutcome {
    Linked(DoId),
    Moved(DoId),
}

/// Creates the next DO on a uniformly chosen host and starts it wandering at
/// a uniformly chosen existing node. The first DO becomes the sole node.
///
/// Random draws, in order: host, then entry node.
pub fn introduce_do<R: Rng>(
    graph: &mut FriendshipGraph,
    hosts: &mut [Host],
    introduced: u32,
    n_max: u32,
    rng: &mut R,
) -> Result<(DoId, HostId, WanderState)> {
    if introduced >= n_max {
        return Err(Error::Precondition(format!("cannot introduce beyond n_max = {n_max}")));
    }
    if hosts.is_empty() {
        return Err(Error::Precondition("no hosts exist".into()));
    }
    let id = DoId(introduced + 1);
    let h = rng.gen_range(0..hosts.len());
    let host = &mut hosts[h];
    host.local_dos.push(id);
    host.discovered = true;
    let host_id = host.id;
    if graph.is_empty() {
        graph.add_node(id);
        let state =
            WanderState { do_id: id, current: id, candidates: Vec::new(), connected: true, steps: 0, linked_to: None };
        return Ok((id, host_id, state));
    }
    let nodes = graph.nodes();
    let current = nodes[rng.gen_range(0..nodes.len())];
    let state = WanderState { do_id: id, current, candidates: Vec::new(), connected: false, steps: 0, linked_to: None };
    Ok((id, host_id, state))
}

/// One contact of a wandering DO.
///
/// Random draws, in order: link decision, then move target.
pub fn wander_step<R: Rng>(
    state: &mut WanderState,
    graph: &mut FriendshipGraph,
    params: &UswParams,
    rng: &mut R,
) -> Result<WanderOutcome> {
    if state.connected {
        return Err(Error::Precondition(format!("{} is already connected", state.do_id)));
    }
    if !graph.contains(state.current) {
        return Err(Error::Precondition(format!("{} is not in the graph", state.current)));
    }
    let current = state.current;
    state.glean(graph.friends(current));
    state.steps += 1;

    let options: Vec<DoId> = state.candidates.iter().copied().filter(|c| *c != current).collect();
    let cap = 10 * graph.node_count() as u64;
    let link = options.is_empty() || state.steps > cap || rng.gen_bool(params.link_probability);
    if link {
        graph.add_edge(state.do_id, current);
        state.connected = true;
        state.linked_to = Some(current);
        return Ok(WanderOutcome::Linked(current));
    }
    let next = options[rng.gen_range(0..options.len())];
    state.current = next;
    Ok(WanderOutcome::Moved(next))
}

/// Number of extra friendships made from `remaining` gleaned candidates.
pub fn extra_link_count(fraction: f64, remaining: usize) -> usize {
    let raw = fraction * remaining as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(remaining)
}

/// Befriends a uniformly chosen subset of the remaining candidates after the
/// first link. Returns every new edge, first link included, as
/// `(wanderer, friend)` pairs.
pub fn finalize_links<R: Rng>(
    state: &WanderState,
    graph: &mut FriendshipGraph,
    params: &UswParams,
    rng: &mut R,
) -> Result<Vec<(DoId, DoId)>> {
    let first = state.linked_to.ok_or_else(|| Error::Precondition(format!("{} has not linked", state.do_id)))?;
    let remaining: Vec<DoId> = state.candidates.iter().copied().filter(|c| !graph.has_edge(state.do_id, *c)).collect();
    let k = extra_link_count(params.extra_link_fraction, remaining.len());
    let mut edges = vec![(state.do_id, first)];
    if k > 0 {
        for i in index::sample(rng, remaining.len(), k).into_iter() {
            let friend = remaining[i];
            if graph.add_edge(state.do_id, friend) {
                edges.push((state.do_id, friend));
            }
        }
    }
    Ok(edges)
}

/// Grows a graph of `n` DOs, each wanderer linking before the next arrives.
pub fn grow_usw<R: Rng>(n: u32, params: &UswParams, rng: &mut R) -> FriendshipGraph {
    let mut graph = FriendshipGraph::new();
    let mut hosts = vec![Host::new(HostId(1), 0)];
    for i in 0..n {
        let (_, _, mut state) = introduce_do(&mut graph, &mut hosts, i, n, rng).expect("introduction within bounds");
        while !state.connected {
            wander_step(&mut state, &mut graph, params, rng).expect("wanderer in graph");
        }
        if state.linked_to.is_some() {
            finalize_links(&state, &mut graph, params, rng).expect("linked wanderer");
        }
    }
    graph
}

/// Uniform random simple graph with `n` nodes and `m` edges.
pub fn random_graph<R: Rng>(n: u32, m: usize, rng: &mut R) -> FriendshipGraph {
    let mut graph = FriendshipGraph::new();
    for i in 1..=n {
        graph.add_node(DoId(i));
    }
    let max_edges = n as usize * (n as usize).saturating_sub(1) / 2;
    let m = m.min(max_edges);
    while graph.edge_count() < m {
        let a = DoId(rng.gen_range(1..=n));
        let b = DoId(rng.gen_range(1..=n));
        graph.add_edge(a, b);
    }
    graph
}

/// Mean local clustering; nodes of degree below two contribute zero.
pub fn clustering_coefficient(graph: &FriendshipGraph) -> Result<f64> {
    if graph.is_empty() {
        return Err(Error::Precondition("clustering of an empty graph".into()));
    }
    let mut total = 0.0;
    for &u in graph.nodes() {
        let nb = graph.friends(u);
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in nb.iter().enumerate() {
            let fa = graph.friends(a);
            links += nb[i + 1..].iter().filter(|b| fa.binary_search(b).is_ok()).count();
        }
        total += links as f64 / (k * (k - 1) / 2) as f64;
    }
    Ok(total / graph.node_count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLength {
    /// Mean shortest path over pairs within the largest component.
    pub mean: f64,
    pub component_size: usize,
    pub disconnected: bool,
}

/// Mean shortest-path length by breadth-first search from every node.
pub fn avg_path_length(graph: &FriendshipGraph) -> Result<PathLength> {
    if graph.is_empty() {
        return Err(Error::Precondition("path length of an empty graph".into()));
    }
    let comp = graph.largest_component();
    let disconnected = comp.len() != graph.node_count();
    if comp.len() < 2 {
        return Ok(PathLength { mean: 0.0, component_size: comp.len(), disconnected });
    }
    let mut dist = vec![u32::MAX; graph.adj.len()];
    let mut queue = VecDeque::new();
    let mut sum: u64 = 0;
    for &s in &comp {
        for &u in &comp {
            dist[u.index()] = u32::MAX;
        }
        dist[s.index()] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            sum += du as u64;
            for &v in graph.friends(u) {
                if dist[v.index()] == u32::MAX {
                    dist[v.index()] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let n = comp.len() as u64;
    let pairs = n * (n - 1);
    Ok(PathLength { mean: sum as f64 / pairs as f64, component_size: comp.len(), disconnected })
}
