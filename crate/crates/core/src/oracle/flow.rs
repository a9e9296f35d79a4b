//! Minimum dominator sets by max-flow with unit vertex capacities.

use std::collections::VecDeque;

use super::Cdag;

const INF: u32 = u32::MAX / 2;

struct Network {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network { head: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn edge(&mut self, a: usize, b: usize, c: u32) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    /// Edmonds-Karp; arc `e ^ 1` is the reverse of arc `e`.
    fn max_flow(&mut self, s: usize, t: usize) -> u32 {
        let mut flow = 0;
        loop {
            let mut via = vec![usize::MAX; self.head.len()];
            let mut queue = VecDeque::from([s]);
            via[s] = usize::MAX - 1;
            while let Some(u) = queue.pop_front() {
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && via[v] == usize::MAX {
                        via[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if via[t] == usize::MAX {
                return flow;
            }
            let mut push = INF;
            let mut v = t;
            while v != s {
                push = push.min(self.cap[via[v]]);
                v = self.to[via[v] ^ 1];
            }
            let mut v = t;
            while v != s {
                self.cap[via[v]] -= push;
                self.cap[via[v] ^ 1] += push;
                v = self.to[via[v] ^ 1];
            }
            flow += push;
        }
    }
}

/// Size of the smallest vertex set meeting every path from an input to `h`.
/// Vertices of `h` may belong to the set themselves.
pub fn min_dominator(g: &Cdag, h: &[usize]) -> usize {
    cut(g, h, true)
}

/// Like [`min_dominator`], but the set must lie outside `h` (inputs of `h`
/// that are themselves graph inputs are allowed). This is the quantity that
/// access-set bounds of rectangular tiles constrain.
pub fn min_boundary_dominator(g: &Cdag, h: &[usize]) -> usize {
    cut(g, h, false)
}

fn cut(g: &Cdag, h: &[usize], h_eligible: bool) -> usize {
    if h.is_empty() {
        return 0;
    }
    let n = g.len();
    let mut relevant = vec![false; n];
    let mut stack: Vec<usize> = h.to_vec();
    while let Some(v) = stack.pop() {
        if !relevant[v] {
            relevant[v] = true;
            stack.extend(&g.parents[v]);
        }
    }
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut net = Network::new(2 * n + 2);
    for v in (0..n).filter(|&v| relevant[v]) {
        let inside = h.contains(&v) && !g.is_input(v);
        net.edge(2 * v, 2 * v + 1, if inside && !h_eligible { INF } else { 1 });
        for &p in &g.parents[v] {
            net.edge(2 * p + 1, 2 * v, INF);
        }
        if g.is_input(v) {
            net.edge(source, 2 * v, INF);
        }
    }
    for &v in h {
        net.edge(2 * v + 1, sink, INF);
    }
    net.max_flow(source, sink) as usize
}
