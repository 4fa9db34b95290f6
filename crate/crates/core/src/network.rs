//! Undirected communication graphs and periodic graph schedules.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one agent")]
    Empty,
    #[error("edge ({0}, {1}) references an agent outside 1..={2}")]
    OutOfRange(usize, usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("schedule entry {index} has {found} agents, expected {expected}")]
    VertexMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("schedule has no declared recurrence; union over an unbounded window is undefined")]
    UnsupportedSchedule,
}

/// A simple undirected graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from zero-based edges. Duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::OutOfRange(a + 1, b + 1, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a + 1));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn edgeless(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, &[])
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self, GraphError> {
        let mut edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Self::from_edges(n, &edges)
    }

    /// Uniform random recursive tree: agent `k` attaches to one of `0..k`.
    pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|k| (rng.gen_range(0..k), k)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighbor list of `agent`.
    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Hop counts from `source`; `None` marks unreachable agents.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.agent_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].map(|d| d + 1);
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs shortest path lengths.
    pub fn distances(&self) -> DistanceMatrix {
        DistanceMatrix {
            rows: (0..self.agent_count()).map(|s| self.bfs(s)).collect(),
        }
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    /// Every agent is reachable from at least one root.
    pub fn reachable_from(&self, roots: &[usize]) -> bool {
        let n = self.agent_count();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &r in roots {
            if r < n && !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn union_with(&mut self, other: &Graph) {
        for (a, list) in other.neighbors.iter().enumerate() {
            self.neighbors[a].extend_from_slice(list);
            self.neighbors[a].sort_unstable();
            self.neighbors[a].dedup();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    rows: Vec<Vec<Option<usize>>>,
}

impl DistanceMatrix {
    pub fn get(&self, a: usize, b: usize) -> Option<usize> {
        self.rows[a][b]
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().flatten().all(Option::is_some)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The communication graph as a function of time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSequence {
    Static(Graph),
    /// `graph_at(t)` cycles through the entries starting at `t = 1`.
    Periodic(Vec<Graph>),
    /// Entries apply at `t = 1, 2, …`; afterwards no edges remain.
    Finite(Vec<Graph>),
}

impl GraphSequence {
    pub fn periodic(period: Vec<Graph>) -> Result<Self, GraphError> {
        check_schedule(&period)?;
        Ok(Self::Periodic(period))
    }

    pub fn finite(entries: Vec<Graph>) -> Result<Self, GraphError> {
        check_schedule(&entries)?;
        Ok(Self::Finite(entries))
    }

    pub fn agent_count(&self) -> usize {
        match self {
            Self::Static(g) => g.agent_count(),
            Self::Periodic(gs) | Self::Finite(gs) => gs[0].agent_count(),
        }
    }

    /// Graph in effect at time step `t >= 1`.
    pub fn graph_at(&self, t: u64) -> std::borrow::Cow<'_, Graph> {
        use std::borrow::Cow;
        let index = t.saturating_sub(1) as usize;
        match self {
            Self::Static(g) => Cow::Borrowed(g),
            Self::Periodic(gs) => Cow::Borrowed(&gs[index % gs.len()]),
            Self::Finite(gs) => match gs.get(index) {
                Some(g) => Cow::Borrowed(g),
                None => Cow::Owned(
                    Graph::edgeless(gs[0].agent_count()).expect("schedule has agents"),
                ),
            },
        }
    }

    /// Union of all edge sets that recur forever.
    pub fn recurring_union(&self) -> Result<Graph, GraphError> {
        match self {
            Self::Static(g) => Ok(g.clone()),
            Self::Periodic(gs) => {
                let mut union = gs[0].clone();
                for g in &gs[1..] {
                    union.union_with(g);
                }
                Ok(union)
            }
            Self::Finite(_) => Err(GraphError::UnsupportedSchedule),
        }
    }

    /// Whether the union graph over `[window_start, inf)` lets every agent
    /// be reached from some root.
    ///
    /// For a periodic schedule the union over any window of unbounded length
    /// equals the union over one period, so `window_start` does not change the
    /// answer.
    pub fn union_rooted_at(&self, _window_start: u64, roots: &[usize]) -> Result<bool, GraphError> {
        Ok(self.recurring_union()?.reachable_from(roots))
    }
}

fn check_schedule(graphs: &[Graph]) -> Result<(), GraphError> {
    let first = graphs.first().ok_or(GraphError::EmptySchedule)?;
    for (index, g) in graphs.iter().enumerate() {
        if g.agent_count() != first.agent_count() {
            return Err(GraphError::VertexMismatch {
                index: index + 1,
                expected: first.agent_count(),
                found: g.agent_count(),
            });
        }
    }
    Ok(())
}
