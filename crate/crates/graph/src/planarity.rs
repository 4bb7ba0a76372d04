//! Left-right planarity test (Brandes' formulation of de Fraysseix and
//! Rosenstiehl's criterion). Only the yes/no answer is computed, no embedding.

use crate::graph::Graph;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Interval {
    low: usize,
    high: usize,
}

impl Interval {
    const EMPTY: Interval = Interval { low: NONE, high: NONE };

    fn is_empty(&self) -> bool {
        self.low == NONE && self.high == NONE
    }
}

#[derive(Clone, Copy, Debug)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState<'g> {
    g: &'g Graph,
    // Oriented edges, indexed by edge id: source -> target.
    source: Vec<usize>,
    target: Vec<usize>,
    oriented: Vec<bool>,
    height: Vec<usize>,
    parent_edge: Vec<usize>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<usize>,
    out_edges: Vec<Vec<usize>>,
    lowpt_edge: Vec<usize>,
    reference: Vec<usize>,
    stack_bottom: Vec<usize>,
    stack: Vec<ConflictPair>,
}

/// Returns `true` iff `g` admits a planar embedding.
pub fn is_planar(g: &Graph) -> bool {
    let n = g.n();
    let m = g.num_edges();
    if n > 2 && m > 3 * n - 6 {
        return false;
    }
    let mut st = LrState {
        g,
        source: vec![NONE; m],
        target: vec![NONE; m],
        oriented: vec![false; m],
        height: vec![NONE; n],
        parent_edge: vec![NONE; n],
        lowpt: vec![0; m],
        lowpt2: vec![0; m],
        nesting_depth: vec![0; m],
        out_edges: vec![Vec::new(); n],
        lowpt_edge: vec![NONE; m],
        reference: vec![NONE; m],
        stack_bottom: vec![0; m],
        stack: Vec::new(),
    };
    let mut roots = Vec::new();
    for v in 0..n {
        if st.height[v] == NONE {
            st.height[v] = 0;
            roots.push(v);
            st.orient(v);
        }
    }
    for v in 0..n {
        let mut out = std::mem::take(&mut st.out_edges[v]);
        out.sort_by_key(|&e| st.nesting_depth[e]);
        st.out_edges[v] = out;
    }
    roots.into_iter().all(|r| st.test(r))
}

impl LrState<'_> {
    fn orient(&mut self, v: usize) {
        let e = self.parent_edge[v];
        for &w in self.g.neighbors(v) {
            let vw = self.g.edge_index(v, w).expect("neighbor edge exists");
            if self.oriented[vw] {
                continue;
            }
            self.oriented[vw] = true;
            self.source[vw] = v;
            self.target[vw] = w;
            self.out_edges[v].push(vw);
            self.lowpt[vw] = self.height[v];
            self.lowpt2[vw] = self.height[v];
            if self.height[w] == NONE {
                self.parent_edge[w] = vw;
                self.height[w] = self.height[v] + 1;
                self.orient(w);
            } else {
                self.lowpt[vw] = self.height[w];
            }
            self.nesting_depth[vw] = 2 * self.lowpt[vw];
            if self.lowpt2[vw] < self.height[v] {
                self.nesting_depth[vw] += 1;
            }
            if e != NONE {
                if self.lowpt[vw] < self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt[e].min(self.lowpt2[vw]);
                    self.lowpt[e] = self.lowpt[vw];
                } else if self.lowpt[vw] > self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt[vw]);
                } else {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt2[vw]);
                }
            }
        }
    }

    fn conflicting(&self, interval: &Interval, b: usize) -> bool {
        !interval.is_empty() && self.lowpt[interval.high] > self.lowpt[b]
    }

    fn lowest(&self, p: &ConflictPair) -> usize {
        if p.left.is_empty() {
            return self.lowpt[p.right.low];
        }
        if p.right.is_empty() {
            return self.lowpt[p.left.low];
        }
        self.lowpt[p.left.low].min(self.lowpt[p.right.low])
    }

    fn test(&mut self, v: usize) -> bool {
        let e = self.parent_edge[v];
        let out = self.out_edges[v].clone();
        for (idx, &ei) in out.iter().enumerate() {
            let w = self.target[ei];
            self.stack_bottom[ei] = self.stack.len();
            if self.parent_edge[w] == ei {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[ei] = ei;
                self.stack.push(ConflictPair { left: Interval::EMPTY, right: Interval { low: ei, high: ei } });
            }
            if self.lowpt[ei] < self.height[v] {
                if idx == 0 {
                    if e != NONE {
                        self.lowpt_edge[e] = self.lowpt_edge[ei];
                    }
                } else if !self.add_constraints(ei, e) {
                    return false;
                }
            }
        }
        if e != NONE {
            self.remove_back_edges(e);
        }
        true
    }

    fn add_constraints(&mut self, ei: usize, e: usize) -> bool {
        let mut p = ConflictPair { left: Interval::EMPTY, right: Interval::EMPTY };
        loop {
            let Some(mut q) = self.stack.pop() else { return false };
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            if self.lowpt[q.right.low] > self.lowpt[e] {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    self.reference[p.right.low] = q.right.high;
                }
                p.right.low = q.right.low;
            } else {
                self.reference[q.right.low] = self.lowpt_edge[e];
            }
            if self.stack.len() == self.stack_bottom[ei] {
                break;
            }
        }
        while let Some(top) = self.stack.last().copied() {
            if !(self.conflicting(&top.left, ei) || self.conflicting(&top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().expect("peeked");
            if self.conflicting(&q.right, ei) {
                q.swap();
            }
            if self.conflicting(&q.right, ei) {
                return false;
            }
            if p.right.low != NONE {
                self.reference[p.right.low] = q.right.high;
            }
            if q.right.low != NONE {
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else {
                self.reference[p.left.low] = q.left.high;
            }
            p.left.low = q.left.low;
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: usize) {
        let u = self.source[e];
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != self.height[u] {
                break;
            }
            self.stack.pop();
        }
        if let Some(mut p) = self.stack.pop() {
            while p.left.high != NONE && self.target[p.left.high] == u {
                p.left.high = self.reference[p.left.high];
            }
            if p.left.high == NONE && p.left.low != NONE {
                self.reference[p.left.low] = p.right.low;
                p.left.low = NONE;
            }
            while p.right.high != NONE && self.target[p.right.high] == u {
                p.right.high = self.reference[p.right.high];
            }
            if p.right.high == NONE && p.right.low != NONE {
                self.reference[p.right.low] = p.left.low;
                p.right.low = NONE;
            }
            self.stack.push(p);
        }
        if self.lowpt[e] < self.height[u] {
            if let Some(top) = self.stack.last() {
                let hl = top.left.high;
                let hr = top.right.high;
                self.reference[e] = if hl != NONE && (hr == NONE || self.lowpt[hl] > self.lowpt[hr]) { hl } else { hr };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn kuratowski_graphs() {
        assert!(!is_planar(&Graph::complete(5)));
        let k33 = g(6, &[(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]);
        assert!(!is_planar(&k33));
        assert!(is_planar(&Graph::complete(4)));
    }

    #[test]
    fn petersen_is_not_planar() {
        let p = g(
            10,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (0, 4),
                (0, 5),
                (1, 6),
                (2, 7),
                (3, 8),
                (4, 9),
                (5, 7),
                (7, 9),
                (6, 9),
                (6, 8),
                (5, 8),
            ],
        );
        assert!(!is_planar(&p));
    }

    #[test]
    fn known_planar_graphs() {
        let goldner_harary = g(
            12,
            &[
                (1, 2),
                (1, 3),
                (1, 4),
                (1, 5),
                (1, 7),
                (1, 8),
                (1, 10),
                (1, 11),
                (2, 3),
                (2, 4),
                (2, 6),
                (2, 7),
                (2, 9),
                (2, 10),
                (2, 11),
                (3, 4),
                (4, 5),
                (4, 6),
                (4, 7),
                (5, 7),
                (6, 7),
                (7, 8),
                (7, 9),
                (7, 10),
                (8, 10),
                (9, 10),
                (10, 11),
            ],
        );
        assert!(is_planar(&goldner_harary));
        let grid =
            g(9, &[(0, 1), (1, 2), (3, 4), (4, 5), (6, 7), (7, 8), (0, 3), (3, 6), (1, 4), (4, 7), (2, 5), (5, 8)]);
        assert!(is_planar(&grid));
        let two_triangles = g(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        assert!(is_planar(&two_triangles));
    }

    #[test]
    fn hidden_subdivisions_are_rejected() {
        // K3,3 subdivision without a direct K5 / K3,3 subgraph.
        let h = g(8, &[(1, 5), (1, 6), (1, 7), (2, 6), (2, 3), (3, 5), (3, 7), (4, 5), (4, 6), (4, 7)]);
        assert!(!is_planar(&h));
        let h2 = g(
            14,
            &[
                (1, 2),
                (4, 13),
                (0, 13),
                (4, 5),
                (7, 10),
                (1, 7),
                (0, 3),
                (2, 6),
                (5, 6),
                (7, 13),
                (4, 8),
                (0, 8),
                (0, 9),
                (2, 13),
                (6, 7),
                (3, 6),
                (2, 8),
            ],
        );
        assert!(!is_planar(&h2));
        let h3 = g(
            14,
            &[
                (0, 7),
                (3, 11),
                (3, 4),
                (8, 9),
                (4, 11),
                (1, 7),
                (1, 13),
                (1, 11),
                (3, 5),
                (5, 7),
                (1, 3),
                (0, 4),
                (5, 11),
                (5, 13),
            ],
        );
        assert!(!is_planar(&h3));
        let ok = g(14, &[(3, 10), (2, 13), (1, 13), (7, 11), (0, 8), (8, 13), (0, 2), (0, 7), (0, 10), (1, 7)]);
        assert!(is_planar(&ok));
    }

    #[test]
    fn disconnected_with_nonplanar_component() {
        let mut edges: Vec<(usize, usize)> = Graph::complete(5).edges().to_vec();
        edges.extend([(6, 7), (7, 8), (6, 8)]);
        assert!(!is_planar(&g(9, &edges)));
    }
}
