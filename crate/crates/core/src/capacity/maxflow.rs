//! Dinic's algorithm on real-valued capacities.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as zero while searching
/// for augmenting paths.
pub const FLOW_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    rev: usize,
}

/// Handle to an edge added with [`FlowNetwork::add_edge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeId {
    from: usize,
    index: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    graph: Vec<Vec<Edge>>,
    original: Vec<Vec<f64>>,
}

impl FlowNetwork {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); n_nodes],
            original: vec![Vec::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> EdgeId {
        debug_assert!(cap >= 0.0);
        let index = self.graph[from].len();
        let rev_index = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge {
            to,
            cap,
            rev: rev_index,
        });
        self.original[from].push(cap);
        self.graph[to].push(Edge {
            to: from,
            cap: 0.0,
            rev: index,
        });
        self.original[to].push(0.0);
        EdgeId { from, index }
    }

    /// Flow currently routed through an edge.
    pub fn flow(&self, e: EdgeId) -> f64 {
        (self.original[e.from][e.index] - self.graph[e.from][e.index].cap).max(0.0)
    }

    pub fn residual(&self, e: EdgeId) -> f64 {
        self.graph[e.from][e.index].cap
    }

    /// Pushes as much flow as possible from `s` to `t` and returns the amount
    /// added by this call.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.graph.len();
        let mut level = vec![usize::MAX; n];
        let mut iter = vec![0usize; n];
        let mut total = 0.0;
        loop {
            if !self.bfs(s, t, &mut level) {
                break;
            }
            iter.iter_mut().for_each(|x| *x = 0);
            loop {
                let pushed = self.dfs(s, t, f64::INFINITY, &level, &mut iter);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [usize]) -> bool {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in &self.graph[u] {
                if e.cap > FLOW_EPS && level[e.to] == usize::MAX {
                    level[e.to] = level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        level[t] != usize::MAX
    }

    fn dfs(&mut self, u: usize, t: usize, limit: f64, level: &[usize], iter: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.graph[u].len() {
            let i = iter[u];
            let Edge { to, cap, rev } = self.graph[u][i];
            if cap > FLOW_EPS && level[to] == level[u] + 1 {
                let d = self.dfs(to, t, limit.min(cap), level, iter);
                if d > FLOW_EPS {
                    self.graph[u][i].cap -= d;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// Nodes reachable from `s` through edges with residual capacity above
    /// `tol`: the source side of a minimum cut after [`Self::max_flow`].
    pub fn reachable_from(&self, s: usize, tol: f64) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in &self.graph[u] {
                if e.cap > tol && !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }

    /// Nodes that can still reach `t` through edges with residual capacity
    /// above `tol`. Their complement is the largest min-cut source side.
    pub fn reaching(&self, t: usize, tol: f64) -> Vec<bool> {
        let n = self.graph.len();
        // Reverse residual adjacency: u -> v with residual cap means v is
        // reached from u in the reversed graph.
        let mut rev_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, edges) in self.graph.iter().enumerate() {
            for e in edges {
                if e.cap > tol {
                    rev_adj[e.to].push(u);
                }
            }
        }
        let mut seen = vec![false; n];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &u in &rev_adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}
