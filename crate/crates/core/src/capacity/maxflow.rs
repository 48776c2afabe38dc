//! Dinic max-flow on integer capacities.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Capacity treated as unbounded.
pub const UNBOUNDED: u64 = u64::MAX / 4;

/// Residual network. Arc `a` and its reverse are `a` and `a ^ 1`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    residual: Vec<u64>,
    capacity: Vec<u64>,
}

impl FlowNetwork {
    pub fn new(vertices: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); vertices],
            to: Vec::new(),
            residual: Vec::new(),
            capacity: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    /// Forward and reverse arcs together.
    pub fn arc_count(&self) -> usize {
        self.to.len()
    }

    /// Adds `u -> v` and returns its arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: u64) -> usize {
        let id = self.to.len();
        self.to.extend([v, u]);
        self.residual.extend([cap, 0]);
        self.capacity.extend([cap, 0]);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    pub fn head(&self, arc: usize) -> usize {
        self.to[arc]
    }

    /// Flow currently on forward arc `arc`.
    pub fn flow(&self, arc: usize) -> u64 {
        self.capacity[arc] - self.residual[arc]
    }

    /// Forward arcs leaving `u`.
    pub fn out_arcs(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[u].iter().copied().filter(|a| a % 2 == 0)
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.residual[a] > 0 && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    /// Pushes up to `limit` units from `s` to `t`; returns the amount pushed.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: u64) -> u64 {
        let mut total = 0;
        if s == t {
            return 0;
        }
        while total < limit {
            let Some(mut level) = self.levels(s, t) else {
                break;
            };
            let mut next = vec![0usize; self.adj.len()];
            let mut path: Vec<usize> = Vec::new();
            let mut u = s;
            loop {
                if u == t {
                    let b = path
                        .iter()
                        .map(|&a| self.residual[a])
                        .min()
                        .unwrap_or(0)
                        .min(limit - total);
                    for &a in &path {
                        self.residual[a] -= b;
                        self.residual[a ^ 1] += b;
                    }
                    total += b;
                    if total == limit {
                        return total;
                    }
                    path.clear();
                    u = s;
                    continue;
                }
                let mut advanced = false;
                while next[u] < self.adj[u].len() {
                    let a = self.adj[u][next[u]];
                    let v = self.to[a];
                    if self.residual[a] > 0 && level[v] == level[u] + 1 {
                        path.push(a);
                        u = v;
                        advanced = true;
                        break;
                    }
                    next[u] += 1;
                }
                if !advanced {
                    level[u] = u32::MAX;
                    match path.pop() {
                        Some(a) => {
                            u = self.to[a ^ 1];
                            next[u] += 1;
                        }
                        None => break,
                    }
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure: max flow 23
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16),
            (0, 2, 13),
            (2, 1, 4),
            (1, 3, 12),
            (3, 2, 9),
            (2, 4, 14),
            (4, 3, 7),
            (3, 5, 20),
            (4, 5, 4),
        ] {
            g.add_arc(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5, UNBOUNDED), 23);
    }

    #[test]
    fn limit_and_conservation() {
        let mut g = FlowNetwork::new(4);
        let arcs: Vec<usize> = [(0, 1, 5), (0, 2, 5), (1, 3, 5), (2, 3, 5)]
            .iter()
            .map(|&(u, v, c)| g.add_arc(u, v, c))
            .collect();
        assert_eq!(g.max_flow(0, 3, 7), 7);
        assert_eq!(g.flow(arcs[0]) + g.flow(arcs[1]), 7);
        assert_eq!(g.flow(arcs[0]), g.flow(arcs[2]));
        assert_eq!(g.flow(arcs[1]), g.flow(arcs[3]));
        assert_eq!(g.max_flow(0, 3, UNBOUNDED), 3);
    }
}
