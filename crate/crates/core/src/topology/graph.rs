use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::TopologyError;

/// A queue-server flexibility architecture.
///
/// Queues are the left nodes and servers the right nodes. Ids are 0-based in
/// memory; the text format is 1-based. Both adjacency directions are kept
/// sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    queue_adj: Vec<Vec<usize>>,
    server_adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds a graph from 0-based `(queue, server)` pairs. Duplicate and
    /// out-of-range edges are rejected.
    pub fn from_edges<I>(n_queues: usize, n_servers: usize, edges: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut queue_adj = vec![Vec::new(); n_queues];
        let mut server_adj = vec![Vec::new(); n_servers];
        for (q, s) in edges {
            if q >= n_queues || s >= n_servers {
                return Err(TopologyError::EdgeOutOfRange {
                    queue: q,
                    server: s,
                    n_queues,
                    n_servers,
                });
            }
            queue_adj[q].push(s);
            server_adj[s].push(q);
        }
        for (q, adj) in queue_adj.iter_mut().enumerate() {
            adj.sort_unstable();
            if let Some(w) = adj.windows(2).find(|w| w[0] == w[1]) {
                return Err(TopologyError::DuplicateEdge { queue: q, server: w[0] });
            }
        }
        for adj in server_adj.iter_mut() {
            adj.sort_unstable();
        }
        Ok(Self { queue_adj, server_adj })
    }

    pub fn n_queues(&self) -> usize {
        self.queue_adj.len()
    }

    pub fn n_servers(&self) -> usize {
        self.server_adj.len()
    }

    /// Servers connected to queue `q`, ascending.
    pub fn queue_neighbors(&self, q: usize) -> &[usize] {
        &self.queue_adj[q]
    }

    /// Queues connected to server `s`, ascending.
    pub fn server_neighbors(&self, s: usize) -> &[usize] {
        &self.server_adj[s]
    }

    pub fn has_edge(&self, q: usize, s: usize) -> bool {
        self.queue_adj.get(q).is_some_and(|adj| adj.binary_search(&s).is_ok())
    }

    pub fn edge_count(&self) -> usize {
        self.queue_adj.iter().map(Vec::len).sum()
    }

    /// All edges in ascending `(queue, server)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.queue_adj
            .iter()
            .enumerate()
            .flat_map(|(q, adj)| adj.iter().map(move |&s| (q, s)))
    }

    pub fn avg_queue_degree(&self) -> f64 {
        if self.n_queues() == 0 {
            return 0.0;
        }
        self.edge_count() as f64 / self.n_queues() as f64
    }

    pub fn avg_server_degree(&self) -> f64 {
        if self.n_servers() == 0 {
            return 0.0;
        }
        self.edge_count() as f64 / self.n_servers() as f64
    }

    pub fn max_queue_degree(&self) -> usize {
        self.queue_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        let right = self.server_adj.iter().map(Vec::len).max().unwrap_or(0);
        self.max_queue_degree().max(right)
    }

    /// Queues without any connected server.
    pub fn isolated_queues(&self) -> Vec<usize> {
        (0..self.n_queues()).filter(|&q| self.queue_adj[q].is_empty()).collect()
    }

    /// N(S) for a set of queues.
    pub fn neighborhood<'a, I>(&self, queues: I) -> BTreeSet<usize>
    where
        I: IntoIterator<Item = &'a usize>,
    {
        queues
            .into_iter()
            .flat_map(|&q| self.queue_adj[q].iter().copied())
            .collect()
    }

    /// Returns a copy with one extra edge; a no-op if the edge exists.
    pub fn with_edge(&self, q: usize, s: usize) -> Result<Self, TopologyError> {
        if self.has_edge(q, s) {
            return Ok(self.clone());
        }
        Self::from_edges(
            self.n_queues(),
            self.n_servers(),
            self.edges().chain(std::iter::once((q, s))),
        )
    }

    /// Writes the text format: a `bipartite <n_queues> <n_servers>` header,
    /// then one 1-based `i j` pair per edge in ascending order.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bipartite {} {}", self.n_queues(), self.n_servers())?;
        for (q, s) in self.edges() {
            writeln!(w, "{} {}", q + 1, s + 1)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("graph text is ASCII")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, TopologyError> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| TopologyError::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let mut fields = line.split_whitespace();
            match header {
                None => {
                    if fields.next() != Some("bipartite") {
                        return Err(parse_err("expected `bipartite <n_queues> <n_servers>` header"));
                    }
                    let nq = parse_count(fields.next()).ok_or_else(|| parse_err("bad n_queues"))?;
                    let ns = parse_count(fields.next()).ok_or_else(|| parse_err("bad n_servers"))?;
                    if fields.next().is_some() {
                        return Err(parse_err("trailing fields in header"));
                    }
                    header = Some((nq, ns));
                }
                Some((nq, ns)) => {
                    let q = parse_count(fields.next()).ok_or_else(|| parse_err("bad queue id"))?;
                    let s = parse_count(fields.next()).ok_or_else(|| parse_err("bad server id"))?;
                    if fields.next().is_some() {
                        return Err(parse_err("trailing fields in edge line"));
                    }
                    if q == 0 || s == 0 || q > nq || s > ns {
                        return Err(parse_err("edge id out of range (ids are 1-based)"));
                    }
                    edges.push((q - 1, s - 1));
                }
            }
        }
        let (nq, ns) = header.ok_or(TopologyError::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        Self::from_edges(nq, ns, edges)
    }

    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        Self::read_text(text.as_bytes())
    }
}

fn parse_count(field: Option<&str>) -> Option<usize> {
    field?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_is_symmetric_and_sorted() {
        let g = BipartiteGraph::from_edges(3, 2, [(2, 1), (0, 0), (1, 1), (1, 0)]).unwrap();
        assert_eq!(g.queue_neighbors(1), &[0, 1]);
        assert_eq!(g.server_neighbors(1), &[1, 2]);
        for (q, s) in g.edges() {
            assert!(g.server_neighbors(s).contains(&q));
        }
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(matches!(
            BipartiteGraph::from_edges(2, 2, [(0, 0), (0, 0)]),
            Err(TopologyError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            BipartiteGraph::from_edges(2, 2, [(0, 2)]),
            Err(TopologyError::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn text_format_is_one_based_and_ascending() {
        let g = BipartiteGraph::from_edges(2, 2, [(1, 1), (0, 1), (0, 0)]).unwrap();
        assert_eq!(g.to_text(), "bipartite 2 2\n1 1\n1 2\n2 2\n");
        assert_eq!(BipartiteGraph::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = BipartiteGraph::from_text("bipartite 2 2\n1 1\n3 1\n").unwrap_err();
        assert!(matches!(err, TopologyError::Parse { line: 3, .. }));
        assert!(BipartiteGraph::from_text("graph 2 2\n").is_err());
        assert!(BipartiteGraph::from_text("").is_err());
        assert!(BipartiteGraph::from_text("bipartite 1 1\n1 1\n1 1\n").is_err());
    }

    #[test]
    fn isolated_queues_are_reported() {
        let g = BipartiteGraph::from_edges(3, 1, [(1, 0)]).unwrap();
        assert_eq!(g.isolated_queues(), vec![0, 2]);
    }
}
