use super::Network;
use crate::{Error, Result};

/// Counts of items removed by [`prune`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub removed_nodes: usize,
    pub removed_edges: usize,
    pub removed_pairs: usize,
    pub components: usize,
}

/// Keeps the largest connected component and strips dangling edges that have
/// no edge pair at their attachment node, then reindexes densely.
///
/// A degree-1 node hanging on an edge without angular or Poisson support at
/// the other end is a zero-stiffness mechanism; removing it can expose the
/// next one, so the stripping is repeated until nothing changes.
pub fn prune(network: Network) -> Result<(Network, PruneReport)> {
    let n = network.nodes.len();
    let mut node_alive = vec![true; n];
    let mut edge_alive = vec![true; network.edges.len()];

    // connected components over edges (iterative DFS)
    let incidence = network.incidence();
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &e in &incidence[v] {
                let w = network.edges[e].other(v);
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    // ties go to the component found first (lowest node id)
    let keep = (0..sizes.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .ok_or_else(|| Error::Geometry("cannot prune an empty network".into()))?;
    for v in 0..n {
        node_alive[v] = comp[v] == keep;
    }
    for e in &network.edges {
        edge_alive[e.id] = node_alive[e.nodes[0]];
    }

    let mut pairs_at = vec![Vec::new(); n];
    for p in &network.pairs {
        pairs_at[p.center].push(p.id);
    }
    let mut degree = vec![0usize; n];
    for e in network.edges.iter().filter(|e| edge_alive[e.id]) {
        degree[e.nodes[0]] += 1;
        degree[e.nodes[1]] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| node_alive[v] && degree[v] == 1).collect();
    while let Some(v) = queue.pop() {
        if !node_alive[v] || degree[v] != 1 {
            continue;
        }
        let e = incidence[v]
            .iter()
            .copied()
            .find(|&e| edge_alive[e])
            .expect("degree-1 node has a live edge");
        let attach = network.edges[e].other(v);
        let has_support = pairs_at[attach].iter().any(|&p| {
            let p = &network.pairs[p];
            p.edges.contains(&e) && edge_alive[p.edges[0]] && edge_alive[p.edges[1]]
        });
        if has_support {
            continue;
        }
        edge_alive[e] = false;
        node_alive[v] = false;
        degree[v] = 0;
        degree[attach] -= 1;
        if degree[attach] == 1 {
            queue.push(attach);
        }
        if degree[attach] == 0 {
            node_alive[attach] = false;
        }
    }

    if !node_alive.iter().any(|&a| a) {
        return Err(Error::Geometry("pruning removed every node".into()));
    }
    Ok(reindex(network, &node_alive, &edge_alive, sizes.len()))
}

fn reindex(network: Network, node_alive: &[bool], edge_alive: &[bool], components: usize) -> (Network, PruneReport) {
    let mut node_map = vec![usize::MAX; network.nodes.len()];
    let mut nodes = Vec::new();
    for mut node in network.nodes.into_iter() {
        if node_alive[node.id] {
            node_map[node.id] = nodes.len();
            node.id = nodes.len();
            nodes.push(node);
        }
    }
    let mut edge_map = vec![usize::MAX; network.edges.len()];
    let mut edges = Vec::new();
    let total_edges = network.edges.len();
    for mut edge in network.edges.into_iter() {
        if edge_alive[edge.id] {
            edge_map[edge.id] = edges.len();
            edge.id = edges.len();
            edge.nodes = [node_map[edge.nodes[0]], node_map[edge.nodes[1]]];
            edges.push(edge);
        }
    }
    let total_pairs = network.pairs.len();
    let mut pairs = Vec::new();
    for mut pair in network.pairs.into_iter() {
        if edge_alive[pair.edges[0]] && edge_alive[pair.edges[1]] {
            pair.id = pairs.len();
            pair.edges = [edge_map[pair.edges[0]], edge_map[pair.edges[1]]];
            pair.center = node_map[pair.center];
            pair.outer = [node_map[pair.outer[0]], node_map[pair.outer[1]]];
            pairs.push(pair);
        }
    }
    let report = PruneReport {
        removed_nodes: node_alive.len() - nodes.len(),
        removed_edges: total_edges - edges.len(),
        removed_pairs: total_pairs - pairs.len(),
        components,
    };
    let net = Network {
        domain_side: network.domain_side,
        nodes,
        edges,
        pairs,
        seed: network.seed,
        generator: network.generator,
        scheme: network.scheme,
    };
    (net, report)
}
