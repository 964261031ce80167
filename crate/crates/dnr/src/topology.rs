//! Radial configurations: spanning-tree enumeration and the correspondence
//! between tree edge sets and the binary line-state vector u.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// A spanning-tree configuration. `on_lines` holds line indices (positions in
/// `Network::lines`), sorted ascending; `u` is the 0/1 state vector in line
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub on_lines: Vec<usize>,
    pub u: Vec<u8>,
}

impl Topology {
    pub fn is_on(&self, line: usize) -> bool {
        self.u[line] == 1
    }

    pub fn u_reals(&self) -> Vec<f64> {
        self.u.iter().map(|&b| b as f64).collect()
    }

    /// Line file ids of the switched-on set.
    pub fn on_line_ids(&self, network: &Network) -> Vec<u32> {
        self.on_lines.iter().map(|&e| network.lines[e].id).collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            self.parent[ra] = rb;
        } else if self.rank[ra] > self.rank[rb] {
            self.parent[rb] = ra;
        } else {
            self.parent[rb] = ra;
            self.rank[ra] += 1;
        }
        self.components -= 1;
        true
    }
}

fn connected_with(network: &Network, allowed: &[bool]) -> bool {
    let mut uf = UnionFind::new(network.n_buses());
    for (e, &ok) in allowed.iter().enumerate() {
        if ok {
            let (f, t) = network.endpoints(e);
            uf.union(f, t);
        }
    }
    uf.components == 1
}

/// Every spanning tree of the network graph, sorted descending by u-vector
/// (so the all-early-lines tree comes first), capped at `cap` results.
pub fn enumerate_radial(network: &Network, cap: usize) -> Result<Vec<Topology>> {
    let l = network.n_lines();
    let n = network.n_buses();
    if !connected_with(network, &vec![true; l]) {
        return Err(Error::DisconnectedGraph);
    }
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(n - 1);
    let mut overflow = false;
    recurse(
        network,
        0,
        &mut UnionFind::new(n),
        &mut chosen,
        &mut out,
        cap,
        &mut overflow,
    );
    if overflow {
        return Err(Error::CapExceeded {
            cap,
            count: out.len() + 1,
        });
    }
    // Descending lexicographic by u puts trees using lower-numbered lines first.
    out.sort_by(|a, b| b.u.cmp(&a.u));
    Ok(out)
}

fn recurse(
    network: &Network,
    next: usize,
    uf: &mut UnionFind,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Topology>,
    cap: usize,
    overflow: &mut bool,
) {
    if *overflow {
        return;
    }
    let n = network.n_buses();
    let l = network.n_lines();
    if chosen.len() == n - 1 {
        if out.len() >= cap {
            *overflow = true;
            return;
        }
        let mut u = vec![0u8; l];
        for &e in chosen.iter() {
            u[e] = 1;
        }
        out.push(Topology {
            on_lines: chosen.clone(),
            u,
        });
        return;
    }
    if next >= l || chosen.len() + (l - next) < n - 1 {
        return;
    }
    // Prune: remaining lines plus chosen set must still be able to connect.
    let mut allowed = vec![false; l];
    for &e in chosen.iter() {
        allowed[e] = true;
    }
    allowed[next..l].fill(true);
    if !connected_with(network, &allowed) {
        return;
    }

    let (f, t) = network.endpoints(next);
    let saved = (uf.parent.clone(), uf.rank.clone(), uf.components);
    if uf.union(f, t) {
        chosen.push(next);
        recurse(network, next + 1, uf, chosen, out, cap, overflow);
        chosen.pop();
    }
    uf.parent = saved.0;
    uf.rank = saved.1;
    uf.components = saved.2;
    // Exclude branch.
    recurse(network, next + 1, uf, chosen, out, cap, overflow);
}

/// True iff the switched-on subgraph is a spanning tree.
pub fn is_radial(network: &Network, u: &[f64]) -> Result<bool> {
    if u.len() != network.n_lines() {
        return Err(Error::DimensionMismatch {
            expected: network.n_lines(),
            got: u.len(),
        });
    }
    let on: Vec<bool> = u.iter().map(|&x| x > 0.5).collect();
    let count = on.iter().filter(|&&b| b).count();
    if count != network.n_buses() - 1 {
        return Ok(false);
    }
    Ok(connected_with(network, &on))
}

/// Degree/cardinality radiality surrogate: per-bus on-degree >= 1 and on-line
/// count equal to |N| - 1. Necessary but not sufficient for tree-ness; the
/// two flags are reported separately.
pub fn check_weak_radiality(network: &Network, u: &[f64]) -> Result<(bool, bool)> {
    if u.len() != network.n_lines() {
        return Err(Error::DimensionMismatch {
            expected: network.n_lines(),
            got: u.len(),
        });
    }
    let degree_ok = (0..network.n_buses()).all(|n| {
        network
            .incident(n)
            .map(|e| u[e])
            .sum::<f64>()
            >= 1.0 - 1e-12
    });
    let count: f64 = u.iter().sum();
    let count_ok = (count - (network.n_buses() as f64 - 1.0)).abs() < 1e-12;
    Ok((degree_ok, count_ok))
}

pub fn topology_of(network: &Network, u: &[f64]) -> Result<Topology> {
    if !is_radial(network, u)? {
        return Err(Error::NotRadial);
    }
    let on_lines: Vec<usize> = u
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.5)
        .map(|(e, _)| e)
        .collect();
    let u = u.iter().map(|&x| if x > 0.5 { 1u8 } else { 0 }).collect();
    Ok(Topology { on_lines, u })
}

pub fn u_of(topology: &Topology) -> Vec<f64> {
    topology.u_reals()
}

/// Build a Topology from switched-on line file ids.
pub fn topology_from_ids(network: &Network, on_ids: &[u32]) -> Result<Topology> {
    let mut u = vec![0.0; network.n_lines()];
    for id in on_ids {
        let e = network
            .line_index(*id)
            .ok_or_else(|| Error::Parse(format!("unknown line id {id}")))?;
        u[e] = 1.0;
    }
    topology_of(network, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, load_network, NetworkFile};

    fn net(name: &str) -> Network {
        load_network(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn four_bus_has_three_trees() {
        let net = net("net4.json");
        let topos = enumerate_radial(&net, 100).unwrap();
        let us: Vec<Vec<u8>> = topos.iter().map(|t| t.u.clone()).collect();
        assert_eq!(
            us,
            vec![vec![1, 1, 1, 0], vec![1, 1, 0, 1], vec![1, 0, 1, 1]]
        );
        // The bridge (line 1) appears in every tree.
        assert!(topos.iter().all(|t| t.is_on(0)));
    }

    #[test]
    fn tree_network_is_singleton() {
        let mut file: NetworkFile = serde_json::from_str(
            &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/net4.json"))
                .unwrap(),
        )
        .unwrap();
        file.lines.pop(); // drop line 4 -> 4 buses, 3 lines, a tree
        let net = build_network(file).unwrap();
        let topos = enumerate_radial(&net, 100).unwrap();
        assert_eq!(topos.len(), 1);
        assert_eq!(topos[0].u, vec![1, 1, 1]);
    }

    #[test]
    fn cap_exceeded_reported() {
        let net = net("net7.json");
        match enumerate_radial(&net, 2) {
            Err(Error::CapExceeded { cap: 2, count }) => assert!(count >= 3),
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn is_radial_examples() {
        let net = net("net4.json");
        assert!(is_radial(&net, &[1.0, 1.0, 1.0, 0.0]).unwrap());
        assert!(!is_radial(&net, &[1.0, 1.0, 1.0, 1.0]).unwrap());
        assert!(is_radial(&net, &[1.0]).is_err());
    }

    #[test]
    fn weak_radiality_gap_on_five_bus() {
        // Triangle {1,2,3} plus disjoint edge 4-5: degree and count tests pass
        // but the subgraph is not a tree.
        let net = net("net5_gap.json");
        let u = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        assert_eq!(check_weak_radiality(&net, &u).unwrap(), (true, true));
        assert!(!is_radial(&net, &u).unwrap());
    }

    #[test]
    fn weak_radiality_all_ones_meshed() {
        let net = net("net4.json");
        let u = [1.0; 4];
        assert_eq!(check_weak_radiality(&net, &u).unwrap(), (true, false));
    }

    #[test]
    fn bijection_round_trip() {
        let net = net("net4.json");
        for t in enumerate_radial(&net, 100).unwrap() {
            let u = u_of(&t);
            let t2 = topology_of(&net, &u).unwrap();
            assert_eq!(t, t2);
            assert_eq!(check_weak_radiality(&net, &u).unwrap(), (true, true));
        }
        assert!(matches!(
            topology_of(&net, &[1.0, 1.0, 1.0, 1.0]),
            Err(Error::NotRadial)
        ));
        let t = topology_of(&net, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.on_line_ids(&net), vec![1, 2, 4]);
    }

    #[test]
    fn enumeration_deterministic() {
        let net = net("net7.json");
        let a = enumerate_radial(&net, 1000).unwrap();
        let b = enumerate_radial(&net, 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
    }
}
