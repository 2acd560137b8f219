//! Strong/weak link networks, their strong components, interaction regimes and
//! the benchmark topology generators.

use std::collections::BTreeSet;
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Real;

pub type AgentId = usize;

/// Unordered agent pair, stored with the smaller endpoint first.
pub type Edge = (AgentId, AgentId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network must have at least one agent")]
    Empty,
    #[error("self-loop on agent {0}")]
    SelfLoop(AgentId),
    #[error("edge ({0}, {1}) references an agent outside [0, {2})")]
    OutOfRange(AgentId, AgentId, usize),
    #[error("pair ({0}, {1}) appears in both edge sets")]
    BothSets(AgentId, AgentId),
    #[error("duplicate {kind} edge ({a}, {b})")]
    Duplicate { kind: &'static str, a: AgentId, b: AgentId },
    #[error("island {0} has size 0")]
    EmptyIsland(usize),
    #[error("weak link from island {0} to itself")]
    WeakSelfLink(usize),
    #[error("weak link references island {0} but only {1} islands exist")]
    UnknownIsland(usize, usize),
    #[error("island endpoint offset {offset} outside island {island} of size {size}")]
    BadEndpoint { island: usize, offset: usize, size: usize },
    #[error("star network needs n > m >= 1, got n={0}, m={1}")]
    InvalidStar(usize, usize),
    #[error("labels length {0} does not match n={1}")]
    Labels(usize, usize),
}

fn normalize(kind: &'static str, n: usize, pairs: &[Edge]) -> Result<Vec<Edge>, NetworkError> {
    let mut seen = BTreeSet::new();
    for &(a, b) in pairs {
        if a >= n || b >= n {
            return Err(NetworkError::OutOfRange(a, b, n));
        }
        if a == b {
            return Err(NetworkError::SelfLoop(a));
        }
        let e = (a.min(b), a.max(b));
        if !seen.insert(e) {
            return Err(NetworkError::Duplicate { kind, a: e.0, b: e.1 });
        }
    }
    Ok(seen.into_iter().collect())
}

/// A validated network. Edge lists are sorted and normalized; strong adjacency
/// and degree statistics are derived on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    n: usize,
    strong: Vec<Edge>,
    weak: Vec<Edge>,
    labels: Option<Vec<String>>,
    adjacency: Vec<Vec<AgentId>>,
    weak_incident: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn new(n: usize, strong: &[Edge], weak: &[Edge]) -> Result<Self, NetworkError> {
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        let strong = normalize("strong", n, strong)?;
        let weak = normalize("weak", n, weak)?;
        let strong_set: BTreeSet<_> = strong.iter().copied().collect();
        if let Some(&(a, b)) = weak.iter().find(|e| strong_set.contains(e)) {
            return Err(NetworkError::BothSets(a, b));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &strong {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|v| v.sort_unstable());
        let mut weak_incident = vec![Vec::new(); n];
        for (l, &(a, b)) in weak.iter().enumerate() {
            weak_incident[a].push(l);
            weak_incident[b].push(l);
        }
        Ok(Self { n, strong, weak, labels: None, adjacency, weak_incident })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, NetworkError> {
        if labels.len() != self.n {
            return Err(NetworkError::Labels(labels.len(), self.n));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn strong_edges(&self) -> &[Edge] {
        &self.strong
    }

    pub fn weak_edges(&self) -> &[Edge] {
        &self.weak
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Strong-link neighbourhood, sorted ascending.
    pub fn neighbors(&self, i: AgentId) -> &[AgentId] {
        &self.adjacency[i]
    }

    /// Indices into [`weak_edges`](Self::weak_edges) of the weak links touching `i`.
    pub fn weak_links_of(&self, i: AgentId) -> &[usize] {
        &self.weak_incident[i]
    }

    pub fn degree(&self, i: AgentId) -> usize {
        self.adjacency[i].len()
    }

    pub fn d_max(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn d_min(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn strong_components(&self) -> ComponentPartition {
        strong_components(self)
    }

    /// Island sizes (descending) if every strong component is a clique and
    /// every weak link joins two different components.
    pub fn island_sizes(&self) -> Option<Vec<usize>> {
        let parts = self.strong_components();
        for members in &parts.members {
            let k = members.len();
            if members.iter().any(|&v| self.degree(v) != k - 1) {
                return None;
            }
        }
        if self.weak.iter().any(|&(a, b)| parts.component_of[a] == parts.component_of[b]) {
            return None;
        }
        Some(parts.sizes_desc())
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            n: self.n,
            strong: self.strong.iter().map(|&(a, b)| [a, b]).collect(),
            weak: self.weak.iter().map(|&(a, b)| [a, b]).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Canonical JSON rendering: sorted, normalized pairs and a fixed key order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("network serializes")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json), hex encoded.
    pub fn spec_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} strong={} weak={}", self.n, self.strong.len(), self.weak.len())
    }
}

/// On-disk network document. Pairs may be given in any order or orientation;
/// conversion to [`NetworkSpec`] validates and normalizes them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    #[serde(default)]
    pub strong: Vec<[AgentId; 2]>,
    #[serde(default)]
    pub weak: Vec<[AgentId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl TryFrom<NetworkFile> for NetworkSpec {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self, Self::Error> {
        let strong: Vec<Edge> = file.strong.iter().map(|p| (p[0], p[1])).collect();
        let weak: Vec<Edge> = file.weak.iter().map(|p| (p[0], p[1])).collect();
        let net = NetworkSpec::new(file.n, &strong, &weak)?;
        match file.labels {
            Some(labels) => net.with_labels(labels),
            None => Ok(net),
        }
    }
}

impl Serialize for NetworkSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = NetworkFile::deserialize(d)?;
        NetworkSpec::try_from(file).map_err(serde::de::Error::custom)
    }
}

pub fn build_network(n: usize, strong: &[Edge], weak: &[Edge]) -> Result<NetworkSpec, NetworkError> {
    NetworkSpec::new(n, strong, weak)
}

/// Partition of agents by strong-link connectivity. Component ids are assigned
/// in order of each component's lowest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentPartition {
    pub component_of: Vec<usize>,
    /// Members of each component, ascending, indexed by component id.
    pub members: Vec<Vec<AgentId>>,
}

impl ComponentPartition {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn size(&self, c: usize) -> usize {
        self.members[c].len()
    }

    /// Component sizes sorted descending (island sizes m_1 >= ... >= m_k).
    pub fn sizes_desc(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.members.iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    pub fn connected(&self, i: AgentId, j: AgentId) -> bool {
        self.component_of[i] == self.component_of[j]
    }

    /// Id of a largest component (lowest id on ties).
    pub fn largest(&self) -> usize {
        let mut best = 0;
        for c in 1..self.count() {
            if self.size(c) > self.size(best) {
                best = c;
            }
        }
        best
    }
}

pub fn strong_components(net: &NetworkSpec) -> ComponentPartition {
    let mut uf = UnionFind::<usize>::new(net.n());
    for &(a, b) in net.strong_edges() {
        uf.union(a, b);
    }
    let mut id_of_root = vec![usize::MAX; net.n()];
    let mut component_of = vec![0; net.n()];
    let mut members: Vec<Vec<AgentId>> = Vec::new();
    for v in 0..net.n() {
        let root = uf.find(v);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = members.len();
            members.push(Vec::new());
        }
        component_of[v] = id_of_root[root];
        members[id_of_root[root]].push(v);
    }
    ComponentPartition { component_of, members }
}

/// Interaction regime determined by the coordination weight and the degree range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// τ ≤ 1/d_max: strongly connected agents always agree.
    Coordinated,
    /// τ > 1/d_min: nobody ever leaves the initial action.
    Frozen,
    /// Neither; heterogeneous equilibria can exist.
    Intermediate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Coordinated => "coordinated",
            Regime::Frozen => "frozen",
            Regime::Intermediate => "intermediate",
        };
        f.write_str(s)
    }
}

fn inverse_degree<T: Real>(d: usize) -> T {
    if d == 0 {
        T::infinity()
    } else {
        T::one() / T::from_usize(d).expect("degree fits scalar")
    }
}

pub fn classify_regime<T: Real>(net: &NetworkSpec, tau: T) -> Regime {
    if tau <= inverse_degree(net.d_max()) {
        Regime::Coordinated
    } else if tau > inverse_degree(net.d_min()) {
        Regime::Frozen
    } else {
        Regime::Intermediate
    }
}

/// True when τ sits exactly on 1/d_max or 1/d_min, where ties are a
/// convention: 1/d_max counts as Coordinated, 1/d_min as Intermediate.
pub fn on_regime_boundary<T: Real>(net: &NetworkSpec, tau: T) -> bool {
    tau == inverse_degree(net.d_max()) || tau == inverse_degree(net.d_min())
}

fn clique_edges(nodes: std::ops::Range<usize>) -> Vec<Edge> {
    let mut edges = Vec::new();
    for a in nodes.clone() {
        for b in a + 1..nodes.end {
            edges.push((a, b));
        }
    }
    edges
}

pub fn gen_clique(n: usize) -> Result<NetworkSpec, NetworkError> {
    NetworkSpec::new(n, &clique_edges(0..n), &[])
}

/// Weak link between two islands with explicit endpoints given as offsets
/// inside each island.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IslandLink {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub from_offset: usize,
    #[serde(default)]
    pub to_offset: usize,
}

/// Island network: each island is a strong clique over consecutive agent ids;
/// one weak link per entry of `weak_topology`, attached at each island's
/// lowest-index agent.
pub fn gen_island(sizes: &[usize], weak_topology: &[(usize, usize)]) -> Result<NetworkSpec, NetworkError> {
    let links: Vec<IslandLink> = weak_topology
        .iter()
        .map(|&(from, to)| IslandLink { from, to, from_offset: 0, to_offset: 0 })
        .collect();
    gen_island_with_endpoints(sizes, &links)
}

pub fn gen_island_with_endpoints(sizes: &[usize], links: &[IslandLink]) -> Result<NetworkSpec, NetworkError> {
    if sizes.is_empty() {
        return Err(NetworkError::Empty);
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(NetworkError::EmptyIsland(i));
    }
    let mut start = Vec::with_capacity(sizes.len());
    let mut n = 0;
    let mut strong = Vec::new();
    for &s in sizes {
        start.push(n);
        strong.extend(clique_edges(n..n + s));
        n += s;
    }
    let mut weak = Vec::with_capacity(links.len());
    for link in links {
        for island in [link.from, link.to] {
            if island >= sizes.len() {
                return Err(NetworkError::UnknownIsland(island, sizes.len()));
            }
        }
        if link.from == link.to {
            return Err(NetworkError::WeakSelfLink(link.from));
        }
        for (island, offset) in [(link.from, link.from_offset), (link.to, link.to_offset)] {
            if offset >= sizes[island] {
                return Err(NetworkError::BadEndpoint { island, offset, size: sizes[island] });
            }
        }
        weak.push((start[link.from] + link.from_offset, start[link.to] + link.to_offset));
    }
    NetworkSpec::new(n, &strong, &weak)
}

/// Star network: a core clique of n−m+1 agents and m−1 singleton leaves, each
/// weakly linked to the core's lowest agent.
pub fn gen_star(n: usize, m: usize) -> Result<NetworkSpec, NetworkError> {
    if m == 0 || n <= m {
        return Err(NetworkError::InvalidStar(n, m));
    }
    let mut sizes = vec![n - m + 1];
    sizes.extend(std::iter::repeat(1).take(m - 1));
    gen_island(&sizes, &hub_topology(m, 0))
}

/// Weak topology joining island `hub` to every other island.
pub fn hub_topology(islands: usize, hub: usize) -> Vec<(usize, usize)> {
    (0..islands).filter(|&j| j != hub).map(|j| (hub, j)).collect()
}

/// All labelled spanning trees over `k` islands, decoded from Prüfer sequences.
pub fn spanning_trees(k: usize) -> Vec<Vec<(usize, usize)>> {
    match k {
        0 | 1 => return vec![Vec::new()],
        2 => return vec![vec![(0, 1)]],
        _ => {}
    }
    let len = k - 2;
    let total = k.pow(len as u32);
    let mut trees = Vec::with_capacity(total);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len {
            seq.push(c % k);
            c /= k;
        }
        let mut degree = vec![1usize; k];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut edges = Vec::with_capacity(k - 1);
        for &s in &seq {
            let leaf = (0..k).find(|&v| degree[v] == 1).expect("prufer leaf");
            edges.push((leaf.min(s), leaf.max(s)));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..k).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        edges.sort_unstable();
        trees.push(edges);
    }
    trees
}

/// Partitions of `n` into exactly `parts` positive parts, each descending.
pub fn partitions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(rest: usize, parts: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let hi = max.min(rest.saturating_sub(parts - 1));
        for p in (1..=hi).rev() {
            if p * parts < rest {
                break;
            }
            cur.push(p);
            go(rest - p, parts - 1, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(n, parts, n, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_strong_pair() {
        let net = build_network(2, &[(1, 0)], &[]).unwrap();
        assert_eq!(net.strong_edges(), &[(0, 1)]);
        assert_eq!(net.d_max(), 1);
        assert_eq!(net.strong_components().sizes_desc(), vec![2]);
    }

    #[test]
    fn singleton_has_zero_degree() {
        let net = build_network(1, &[], &[]).unwrap();
        assert_eq!(net.d_max(), 0);
        assert_eq!(net.d_min(), 0);
        assert_eq!(classify_regime(&net, 5.0), Regime::Coordinated);
    }

    #[test]
    fn validation_errors_are_distinct() {
        assert_eq!(build_network(3, &[(0, 1)], &[(1, 0)]), Err(NetworkError::BothSets(0, 1)));
        assert_eq!(build_network(3, &[(2, 2)], &[]), Err(NetworkError::SelfLoop(2)));
        assert_eq!(build_network(3, &[(0, 3)], &[]), Err(NetworkError::OutOfRange(0, 3, 3)));
        assert!(matches!(
            build_network(3, &[(0, 1), (1, 0)], &[]),
            Err(NetworkError::Duplicate { kind: "strong", a: 0, b: 1 })
        ));
        assert_eq!(build_network(0, &[], &[]), Err(NetworkError::Empty));
    }

    #[test]
    fn empty_graph_has_singleton_components() {
        let net = build_network(4, &[], &[]).unwrap();
        let parts = net.strong_components();
        assert_eq!(parts.count(), 4);
        assert_eq!(parts.component_of, vec![0, 1, 2, 3]);
    }

    #[test]
    fn component_ids_follow_lowest_member() {
        let net = build_network(5, &[(3, 4), (0, 2)], &[(1, 3)]).unwrap();
        let parts = net.strong_components();
        assert_eq!(parts.component_of, vec![0, 1, 0, 2, 2]);
        assert_eq!(parts.sizes_desc(), vec![2, 2, 1]);
    }

    #[test]
    fn star_8_3_layout() {
        let net = gen_star(8, 3).unwrap();
        assert_eq!(net.weak_edges(), &[(0, 6), (0, 7)]);
        assert_eq!(net.strong_components().sizes_desc(), vec![6, 1, 1]);
        assert_eq!(net.island_sizes(), Some(vec![6, 1, 1]));
    }

    #[test]
    fn example_one_island_shape() {
        let net = gen_island(&[2, 2], &[(0, 1)]).unwrap();
        assert_eq!(net.strong_edges(), &[(0, 1), (2, 3)]);
        assert_eq!(net.weak_edges(), &[(0, 2)]);
    }

    #[test]
    fn island_generator_errors() {
        assert_eq!(gen_island(&[2, 0], &[]), Err(NetworkError::EmptyIsland(1)));
        assert_eq!(gen_island(&[2, 2], &[(1, 1)]), Err(NetworkError::WeakSelfLink(1)));
        assert_eq!(gen_island(&[2, 2], &[(0, 2)]), Err(NetworkError::UnknownIsland(2, 2)));
        assert_eq!(gen_star(3, 3), Err(NetworkError::InvalidStar(3, 3)));
        assert_eq!(gen_star(3, 0), Err(NetworkError::InvalidStar(3, 0)));
    }

    #[test]
    fn explicit_endpoints_override_representatives() {
        let link = IslandLink { from: 0, to: 1, from_offset: 2, to_offset: 1 };
        let net = gen_island_with_endpoints(&[3, 2], &[link]).unwrap();
        assert_eq!(net.weak_edges(), &[(2, 4)]);
    }

    #[test]
    fn regime_thresholds() {
        let k5 = gen_clique(5).unwrap();
        assert_eq!(classify_regime(&k5, 0.2), Regime::Coordinated);
        assert_eq!(classify_regime(&k5, 0.25), Regime::Coordinated);
        assert_eq!(classify_regime(&k5, 0.3), Regime::Frozen);
        // path 0-1-2: d_min = 1, d_max = 2
        let path = build_network(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert_eq!(classify_regime(&path, 0.75), Regime::Intermediate);
        assert_eq!(classify_regime(&path, 1.0), Regime::Intermediate);
        assert!(on_regime_boundary(&path, 1.0));
        assert_eq!(classify_regime(&path, 1.01), Regime::Frozen);
    }

    #[test]
    fn spanning_tree_counts() {
        assert_eq!(spanning_trees(3).len(), 3);
        assert_eq!(spanning_trees(4).len(), 16);
        for t in spanning_trees(4) {
            assert_eq!(t.len(), 3);
            let net = gen_island(&[1, 1, 1, 1], &t).unwrap();
            // a tree over singletons connects everything through weak links
            let strong: Vec<Edge> = net.weak_edges().to_vec();
            let as_strong = build_network(4, &strong, &[]).unwrap();
            assert_eq!(as_strong.strong_components().count(), 1);
        }
    }

    #[test]
    fn partitions_of_six_into_three() {
        assert_eq!(partitions(6, 3), vec![vec![4, 1, 1], vec![3, 2, 1], vec![2, 2, 2]]);
        assert_eq!(partitions(7, 3).len(), 4);
        assert_eq!(partitions(2, 3), Vec::<Vec<usize>>::new());
    }

    #[test]
    fn file_round_trip_normalizes() {
        let doc = r#"{"n":3,"strong":[[2,1]],"weak":[[0,2]]}"#;
        let net: NetworkSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(net.canonical_json(), r#"{"n":3,"strong":[[1,2]],"weak":[[0,2]]}"#);
        let bad = r#"{"n":3,"strong":[[0,1]],"weak":[[1,0]]}"#;
        assert!(serde_json::from_str::<NetworkSpec>(bad).is_err());
        let typo = r#"{"n":3,"strongg":[]}"#;
        assert!(serde_json::from_str::<NetworkSpec>(typo).is_err());
    }

    #[test]
    fn non_island_detection() {
        let path = build_network(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert_eq!(path.island_sizes(), None);
        let inner_weak = build_network(3, &[(0, 1)], &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(inner_weak.island_sizes(), Some(vec![2, 1]));
    }
}
