//! Red-blue pebbling: exact A* search, an LRU scheduler and a move validator.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use super::{Cdag, OracleError};

/// Largest CDAG the exact search accepts (one bit per vertex).
pub const SEARCH_VERTICES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PebbleOptions {
    /// Allow a vertex to be computed more than once.
    pub recompute: bool,
    /// Expanded-state budget for the exact search.
    pub budget: usize,
    /// Cap on stored states, which bounds memory.
    pub max_states: usize,
}

impl Default for PebbleOptions {
    fn default() -> Self {
        PebbleOptions { recompute: true, budget: 10_000_000, max_states: 4_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    Load(usize),
    Store(usize),
    Compute(usize),
    Discard(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pebbling {
    pub cost: u64,
    pub moves: Vec<Move>,
    pub expanded: usize,
}

fn check_capacity(g: &Cdag, s: usize) -> Result<(), OracleError> {
    for v in 0..g.len() {
        if !g.is_input(v) && g.parents[v].len() + 1 > s {
            return Err(OracleError::InfeasibleCapacity { vertex: v, parents: g.parents[v].len(), s });
        }
    }
    Ok(())
}

/// Plays `moves` from the initial configuration and returns the I/O count.
/// Every move is checked against the rules of the game and the final
/// configuration must hold blue pebbles on all outputs.
pub fn replay(g: &Cdag, s: usize, moves: &[Move], recompute: bool) -> Result<u64, String> {
    let n = g.len();
    let mut red = vec![false; n];
    let mut blue = vec![false; n];
    let mut computed = vec![false; n];
    for &v in &g.inputs {
        blue[v] = true;
    }
    let mut reds = 0;
    let mut cost = 0;
    for (k, m) in moves.iter().enumerate() {
        match *m {
            Move::Load(v) => {
                if !blue[v] || red[v] || reds >= s {
                    return Err(format!("move {k}: illegal load of {v}"));
                }
                red[v] = true;
                reds += 1;
                cost += 1;
            }
            Move::Store(v) => {
                if !red[v] {
                    return Err(format!("move {k}: store of {v} without a red pebble"));
                }
                blue[v] = true;
                cost += 1;
            }
            Move::Compute(v) => {
                if g.is_input(v) || red[v] || reds >= s || g.parents[v].iter().any(|&p| !red[p]) {
                    return Err(format!("move {k}: illegal compute of {v}"));
                }
                if computed[v] && !recompute {
                    return Err(format!("move {k}: recomputation of {v}"));
                }
                computed[v] = true;
                red[v] = true;
                reds += 1;
            }
            Move::Discard(v) => {
                if !red[v] {
                    return Err(format!("move {k}: discard of {v} without a red pebble"));
                }
                red[v] = false;
                reds -= 1;
            }
        }
    }
    match g.outputs.iter().find(|&&v| !blue[v]) {
        Some(v) => Err(format!("output {v} has no blue pebble at the end")),
        None => Ok(cost),
    }
}

struct Lru {
    s: usize,
    red: Vec<bool>,
    blue: Vec<bool>,
    stamp: Vec<usize>,
    /// Consumers not yet computed.
    uses: Vec<usize>,
    reds: usize,
    clock: usize,
    moves: Vec<Move>,
}

impl Lru {
    fn touch(&mut self, v: usize) {
        self.clock += 1;
        self.stamp[v] = self.clock;
    }

    fn make_room(&mut self, pinned: &[usize]) {
        while self.reds >= self.s {
            let u = (0..self.red.len())
                .filter(|&u| self.red[u] && !pinned.contains(&u))
                .min_by_key(|&u| self.stamp[u])
                .unwrap();
            if !self.blue[u] && self.uses[u] > 0 {
                self.blue[u] = true;
                self.moves.push(Move::Store(u));
            }
            self.discard(u);
        }
    }

    fn place(&mut self, v: usize, mv: Move, pinned: &[usize]) {
        self.make_room(pinned);
        self.red[v] = true;
        self.reds += 1;
        self.moves.push(mv);
        self.touch(v);
    }

    fn discard(&mut self, v: usize) {
        self.red[v] = false;
        self.reds -= 1;
        self.moves.push(Move::Discard(v));
    }
}

/// Topological scheduler with least-recently-used eviction.
pub fn pebble_greedy(g: &Cdag, s: usize) -> Result<Pebbling, OracleError> {
    check_capacity(g, s)?;
    let n = g.len();
    let mut m = Lru {
        s,
        red: vec![false; n],
        blue: (0..n).map(|v| g.is_input(v)).collect(),
        stamp: vec![0; n],
        uses: g.children.iter().map(|c| c.len()).collect(),
        reds: 0,
        clock: 0,
        moves: Vec::new(),
    };
    for v in (0..n).filter(|&v| !g.is_input(v)) {
        let pinned = &g.parents[v];
        for &p in pinned {
            if m.red[p] {
                m.touch(p);
            } else {
                m.place(p, Move::Load(p), pinned);
            }
        }
        m.place(v, Move::Compute(v), pinned);
        if g.children[v].is_empty() {
            m.blue[v] = true;
            m.moves.push(Move::Store(v));
            m.discard(v);
        }
        for &p in pinned {
            m.uses[p] -= 1;
            if m.uses[p] == 0 && m.red[p] {
                m.discard(p);
            }
        }
    }
    let cost = m.moves.iter().filter(|mv| matches!(mv, Move::Load(_) | Move::Store(_))).count() as u64;
    Ok(Pebbling { cost, moves: m.moves, expanded: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct State {
    red: u128,
    /// Stored non-input vertices; inputs are implicitly blue.
    blue: u128,
    /// Vertices computed at least once (tracked only without recomputation).
    done: u128,
}

/// Compute `target` after loading its missing parents `loads`, making room by
/// discarding `evict` (storing `spill ⊆ evict` first).
#[derive(Clone, Copy, Debug)]
struct Action {
    target: usize,
    loads: u128,
    evict: u128,
    spill: u128,
}

struct Search<'a> {
    g: &'a Cdag,
    s: u32,
    recompute: bool,
    inputs: u128,
    outputs: u128,
    parents: Vec<u128>,
    children: Vec<u128>,
    /// Strict descendants of each vertex.
    desc: Vec<u128>,
}

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let v = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(v)
    })
}

impl Search<'_> {
    fn unfinished(&self, st: &State) -> u128 {
        self.outputs & !st.blue
    }

    fn live(&self, st: &State) -> u128 {
        let u = self.unfinished(st);
        (0..self.g.len()).filter(|&v| u >> v & 1 == 1 || self.desc[v] & u != 0).fold(0, |m, v| m | 1 << v)
    }

    /// Stores finished outputs and drops pebbles that can no longer matter.
    fn canonicalize(&self, st: &mut State, moves: &mut Vec<Move>) -> u64 {
        let mut cost = 0;
        for v in bits(st.red & self.unfinished(st)) {
            st.blue |= 1 << v;
            moves.push(Move::Store(v));
            cost += 1;
        }
        let live = self.live(st);
        for v in bits(st.red & !live) {
            moves.push(Move::Discard(v));
        }
        st.red &= live;
        st.blue &= live | self.outputs;
        st.done &= live;
        cost
    }

    /// Unfinished outputs each need a store. Loads are bounded below by the
    /// larger of two counts: inputs that reach an unfinished output through
    /// vertices holding no pebble (each must be loaded again), and paths from
    /// inputs to unfinished outputs avoiding red vertices and sharing no blue
    /// vertex (each needs a separate load).
    fn heuristic(&self, st: &State) -> u64 {
        let u = self.unfinished(st);
        let blue = st.blue | self.inputs;
        let bare = !st.red & !blue;
        let mut reach: u128 = u;
        let mut required = 0;
        for v in (0..self.g.len()).rev() {
            if self.children[v] & reach == 0 {
                continue;
            }
            if bare >> v & 1 == 1 {
                reach |= 1 << v;
            } else if self.inputs >> v & 1 == 1 && st.red >> v & 1 == 0 {
                required += 1;
            }
        }
        let mut used: u128 = 0;
        let mut paths = 0;
        for o in bits(u) {
            let mut seen: u128 = 0;
            if let Some(path) = self.path_to_input(o, st.red, used, &mut seen) {
                used |= path & blue;
                paths += 1;
            }
        }
        u.count_ones() as u64 + required.max(paths)
    }

    fn path_to_input(&self, v: usize, red: u128, used: u128, seen: &mut u128) -> Option<u128> {
        *seen |= 1 << v;
        if self.inputs >> v & 1 == 1 {
            return Some(1 << v);
        }
        for p in bits(self.parents[v]) {
            if (red | used | *seen) >> p & 1 == 1 {
                continue;
            }
            if let Some(path) = self.path_to_input(p, red, used, seen) {
                return Some(path | 1 << v);
            }
        }
        None
    }

    /// Loads are deferred until the compute that uses them, which loses no
    /// optimal pebbling: delaying a load only frees capacity in between.
    fn successors(&self, st: &State, out: &mut Vec<Action>) {
        let live = self.live(st);
        let blue = st.blue | self.inputs;
        for v in bits(live & !st.red & !self.inputs) {
            if !self.recompute && st.done >> v & 1 == 1 {
                continue;
            }
            let loads = self.parents[v] & !st.red;
            if loads & !blue != 0 {
                continue;
            }
            let need = loads.count_ones() + 1;
            let free = self.s - st.red.count_ones();
            let k = need.saturating_sub(free);
            let candidates: Vec<usize> = bits(st.red & !self.parents[v]).collect();
            if k as usize > candidates.len() {
                continue;
            }
            for_each_subset(&candidates, k as usize, &mut |evict| {
                let unstored = evict & !blue;
                let mut spill = unstored;
                // Every subset of the unstored evictees may be spilled.
                loop {
                    out.push(Action { target: v, loads, evict, spill });
                    if spill == 0 {
                        break;
                    }
                    spill = (spill - 1) & unstored;
                }
            });
        }
    }

    fn apply(&self, st: &State, a: Action, moves: &mut Vec<Move>) -> (State, u64) {
        let mut next = *st;
        let mut cost = 0;
        for u in bits(a.evict) {
            if a.spill >> u & 1 == 1 {
                next.blue |= 1 << u;
                moves.push(Move::Store(u));
                cost += 1;
            }
            moves.push(Move::Discard(u));
        }
        next.red &= !a.evict;
        for u in bits(a.loads) {
            moves.push(Move::Load(u));
            cost += 1;
        }
        next.red |= a.loads | 1 << a.target;
        moves.push(Move::Compute(a.target));
        if !self.recompute {
            next.done |= 1 << a.target;
        }
        cost += self.canonicalize(&mut next, moves);
        (next, cost)
    }
}

fn for_each_subset(items: &[usize], k: usize, f: &mut impl FnMut(u128)) {
    fn go(items: &[usize], k: usize, acc: u128, f: &mut impl FnMut(u128)) {
        if k == 0 {
            f(acc);
            return;
        }
        for i in 0..items.len() {
            if items.len() - i < k {
                break;
            }
            go(&items[i + 1..], k - 1, acc | 1 << items[i], f);
        }
    }
    go(items, k, 0, f)
}

struct Node {
    state: State,
    parent: usize,
    action: Option<Action>,
}

/// Minimum I/O over all pebblings, by A* over canonical configurations.
pub fn pebble_exact(g: &Cdag, s: usize, opts: PebbleOptions) -> Result<Pebbling, OracleError> {
    check_capacity(g, s)?;
    let n = g.len();
    if n > SEARCH_VERTICES {
        return Err(OracleError::TooManyForSearch { count: n, cap: SEARCH_VERTICES });
    }
    let mask = |vs: &[usize]| vs.iter().fold(0u128, |m, &v| m | 1 << v);
    let parents: Vec<u128> = g.parents.iter().map(|p| mask(p)).collect();
    let mut desc = vec![0u128; n];
    for v in (0..n).rev() {
        for &c in &g.children[v] {
            desc[v] |= 1 << c | desc[c];
        }
    }
    let search = Search {
        g,
        s: s as u32,
        recompute: opts.recompute,
        inputs: mask(&g.inputs),
        outputs: mask(&g.outputs),
        children: g.children.iter().map(|c| mask(c)).collect(),
        parents,
        desc,
    };
    let start = State { red: 0, blue: 0, done: 0 };
    let mut nodes = vec![Node { state: start, parent: usize::MAX, action: None }];
    let mut best: FxHashMap<State, u64> = FxHashMap::default();
    best.insert(start, 0);
    // Ties on f go to the deeper state, which reaches a goal without sweeping the plateau.
    let mut heap = BinaryHeap::from([(Reverse(search.heuristic(&start)), 0u64, Reverse(0usize))]);
    let mut expanded = 0;
    let mut succ = Vec::new();
    let mut scratch = Vec::new();
    while let Some((Reverse(f), cost, Reverse(id))) = heap.pop() {
        let st = nodes[id].state;
        if best.get(&st).is_some_and(|&b| b < cost) {
            continue;
        }
        if search.unfinished(&st) == 0 {
            return Ok(Pebbling { cost, moves: reconstruct(&search, &nodes, id), expanded });
        }
        expanded += 1;
        if expanded > opts.budget || nodes.len() > opts.max_states {
            let upper = pebble_greedy(g, s).map(|p| p.cost).unwrap_or(u64::MAX);
            return Err(OracleError::SearchBudgetExceeded { budget: opts.budget, lower: f, upper });
        }
        succ.clear();
        search.successors(&st, &mut succ);
        for &a in &succ {
            scratch.clear();
            let (next, step) = search.apply(&st, a, &mut scratch);
            let c = cost + step;
            if best.get(&next).is_some_and(|&b| b <= c) {
                continue;
            }
            best.insert(next, c);
            nodes.push(Node { state: next, parent: id, action: Some(a) });
            heap.push((Reverse(c + search.heuristic(&next)), c, Reverse(nodes.len() - 1)));
        }
    }
    // Unreachable while capacity suffices: the greedy schedule is a witness.
    let upper = pebble_greedy(g, s)?;
    Ok(upper)
}

fn reconstruct(search: &Search, nodes: &[Node], mut id: usize) -> Vec<Move> {
    let mut chain = Vec::new();
    while let Some(a) = nodes[id].action {
        chain.push((nodes[nodes[id].parent].state, a));
        id = nodes[id].parent;
    }
    let mut moves = Vec::new();
    for (st, a) in chain.into_iter().rev() {
        search.apply(&st, a, &mut moves);
    }
    moves
}
