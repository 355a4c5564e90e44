//! Expansion of the block cumulant functionals into weighted pairing graphs.
//!
//! A block functional of order `b` is `c_b / b!` where `c_b` is the `b`-th
//! cumulant of the uniform-time law of the path increments inside the
//! block. Written through raw moments `m_r = int_0^1 Y_u^r du` it becomes a
//! sum over partitions of `b` of products of `m_r / r!`. Taking the
//! expectation of a product of two such functionals with Isserlis' theorem
//! yields integrals of products of covariance kernels, one per multigraph
//! on the integration variables.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Result;
use crate::isserlis::perfect_matchings;

/// Multigraph on integration variables. Vertex `v` lives in block
/// `side[v]` (0 or 1); `adj` is symmetric with self-loop counts on the
/// diagonal; `marks[v]` counts pairings with the external long-increment
/// variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Graph {
    pub side: Vec<u8>,
    pub marks: Vec<u8>,
    pub adj: Vec<Vec<u8>>,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.side.len()
    }

    pub fn cross_edges(&self) -> u32 {
        let n = self.len();
        let mut c = 0u32;
        for u in 0..n {
            for v in u + 1..n {
                if self.side[u] != self.side[v] {
                    c += u32::from(self.adj[u][v]);
                }
            }
        }
        c
    }

    fn encode(&self, perm: &[usize]) -> Vec<u8> {
        let n = self.len();
        let mut key = Vec::with_capacity(2 * n + n * n);
        for &v in perm {
            key.push(self.side[v]);
            key.push(self.marks[v]);
        }
        for (i, &u) in perm.iter().enumerate() {
            for &v in &perm[i..] {
                key.push(self.adj[u][v]);
            }
        }
        key
    }

    fn invariant(&self, v: usize) -> (u8, u8, u8, u8) {
        let degree: u8 = self.adj[v].iter().sum::<u8>() + self.adj[v][v];
        (self.side[v], self.marks[v], degree, self.adj[v][v])
    }

    /// Canonical relabelling: minimal encoding over all vertex orders that
    /// respect the sorted vertex invariants.
    pub fn canonical(&self) -> Graph {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| self.invariant(v));
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || self.invariant(order[i]) != self.invariant(order[start]) {
                groups.push((start, i));
                start = i;
            }
        }
        let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
        permute_groups(&mut order, &groups, 0, &mut |perm| {
            let key = self.encode(perm);
            if best.as_ref().is_none_or(|(b, _)| key < *b) {
                best = Some((key, perm.to_vec()));
            }
        });
        let (_, perm) = best.expect("at least one ordering");
        self.relabel(&perm)
    }

    fn relabel(&self, perm: &[usize]) -> Graph {
        let n = self.len();
        let mut adj = alloc::vec![alloc::vec![0u8; n]; n];
        for i in 0..n {
            for j in 0..n {
                adj[i][j] = self.adj[perm[i]][perm[j]];
            }
        }
        Graph {
            side: perm.iter().map(|&v| self.side[v]).collect(),
            marks: perm.iter().map(|&v| self.marks[v]).collect(),
            adj,
        }
    }
}

fn permute_groups(order: &mut [usize], groups: &[(usize, usize)], g: usize, f: &mut impl FnMut(&[usize])) {
    if g == groups.len() {
        f(order);
        return;
    }
    let (lo, hi) = groups[g];
    permute_range(order, lo, lo, hi, groups, g, f);
}

fn permute_range(
    order: &mut [usize],
    k: usize,
    lo: usize,
    hi: usize,
    groups: &[(usize, usize)],
    g: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if k + 1 >= hi {
        permute_groups(order, groups, g + 1, f);
        return;
    }
    for i in k..hi {
        order.swap(k, i);
        permute_range(order, k + 1, lo, hi, groups, g, f);
        order.swap(k, i);
    }
}

/// Integer partitions of `b` (non-increasing parts).
pub(crate) fn partitions(b: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rem.min(max)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(b, b, &mut Vec::new(), &mut out);
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Coefficient of `prod_i m_{r_i}` in `c_b / b!` summed over all orderings
/// of the partition: `(-1)^{s-1}/s * s!/prod(mult!) * prod 1/r_i!`.
pub(crate) fn partition_weight(parts: &[usize]) -> f64 {
    let s = parts.len();
    let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
    let mut orderings = factorial(s);
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j < s && parts[j] == parts[i] {
            j += 1;
        }
        orderings /= factorial(j - i);
        i = j;
    }
    let inv_fact: f64 = parts.iter().map(|&r| 1.0 / factorial(r)).product();
    sign / s as f64 * orderings * inv_fact
}

/// Graphs and weights of one expansion family.
#[derive(Debug, Clone, Default)]
pub(crate) struct Family {
    pub terms: Vec<(Graph, f64)>,
}

impl Family {
    fn from_map(map: BTreeMap<Graph, f64>) -> Self {
        let terms = map.into_iter().filter(|(_, w)| w.abs() > 1e-15).collect();
        Self { terms }
    }
}

/// Connected part of `E[G_{b1}(block 0) G_{b2}(block 1)]` summed over
/// `b1 + b2 = 2a`, `b1, b2 >= 2`: only graphs with a cross edge.
pub(crate) fn two_block_family(a: usize) -> Result<Family> {
    let mut map: BTreeMap<Graph, f64> = BTreeMap::new();
    for b1 in 2..=(2 * a - 2) {
        let b2 = 2 * a - b1;
        for p1 in partitions(b1) {
            for p2 in partitions(b2) {
                let w = partition_weight(&p1) * partition_weight(&p2);
                let mut side = Vec::new();
                let mut nodes = Vec::new();
                for (v, &r) in p1.iter().chain(p2.iter()).enumerate() {
                    side.push(u8::from(v >= p1.len()));
                    nodes.extend(core::iter::repeat_n(v, r));
                }
                let nv = side.len();
                for m in perfect_matchings(nodes.len())? {
                    let mut adj = alloc::vec![alloc::vec![0u8; nv]; nv];
                    for (x, y) in m.pairs {
                        let (u, v) = (nodes[x], nodes[y]);
                        if u == v {
                            adj[u][u] += 1;
                        } else {
                            adj[u][v] += 1;
                            adj[v][u] += 1;
                        }
                    }
                    let g = Graph { side: side.clone(), marks: alloc::vec![0; nv], adj };
                    if g.cross_edges() == 0 {
                        continue;
                    }
                    *map.entry(g.canonical()).or_insert(0.0) += w;
                }
            }
        }
    }
    Ok(Family::from_map(map))
}

/// `E[X * G_{2a-1}(block 1)]` where `X` is the external long increment,
/// paired with exactly one vertex (the mark).
pub(crate) fn long_increment_family(a: usize) -> Result<Family> {
    let mut map: BTreeMap<Graph, f64> = BTreeMap::new();
    let b = 2 * a - 1;
    for parts in partitions(b) {
        let w = partition_weight(&parts);
        let nv = parts.len();
        // node 0 is the external variable
        let mut nodes = alloc::vec![usize::MAX];
        for (v, &r) in parts.iter().enumerate() {
            nodes.extend(core::iter::repeat_n(v, r));
        }
        for m in perfect_matchings(nodes.len())? {
            let mut adj = alloc::vec![alloc::vec![0u8; nv]; nv];
            let mut marks = alloc::vec![0u8; nv];
            for (x, y) in m.pairs {
                let (u, v) = (nodes[x], nodes[y]);
                if u == usize::MAX {
                    marks[v] += 1;
                } else if u == v {
                    adj[u][u] += 1;
                } else {
                    adj[u][v] += 1;
                    adj[v][u] += 1;
                }
            }
            let g = Graph { side: alloc::vec![1; nv], marks, adj };
            *map.entry(g.canonical()).or_insert(0.0) += w;
        }
    }
    Ok(Family::from_map(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_weights_reproduce_low_cumulants() {
        // c2/2! = m2/2 - m1^2/2
        let p = partitions(2);
        assert_eq!(p, alloc::vec![alloc::vec![2], alloc::vec![1, 1]]);
        assert!((partition_weight(&[2]) - 0.5).abs() < 1e-15);
        assert!((partition_weight(&[1, 1]) + 0.5).abs() < 1e-15);
        // c3/3! = (m3 - 3 m2 m1 + 2 m1^3)/6
        assert!((partition_weight(&[3]) - 1.0 / 6.0).abs() < 1e-15);
        assert!((partition_weight(&[2, 1]) + 0.5).abs() < 1e-15);
        assert!((partition_weight(&[1, 1, 1]) - 1.0 / 3.0).abs() < 1e-15);
        // c4/4! = (m4 - 4 m3 m1 - 3 m2^2 + 12 m2 m1^2 - 6 m1^4)/24
        assert!((partition_weight(&[4]) - 1.0 / 24.0).abs() < 1e-15);
        assert!((partition_weight(&[3, 1]) + 1.0 / 6.0).abs() < 1e-15);
        assert!((partition_weight(&[2, 2]) + 1.0 / 8.0).abs() < 1e-15);
        assert!((partition_weight(&[2, 1, 1]) - 0.5).abs() < 1e-15);
        assert!((partition_weight(&[1, 1, 1, 1]) + 0.25).abs() < 1e-15);
        assert_eq!(partitions(6).len(), 11);
    }

    #[test]
    fn canonical_form_is_label_independent() {
        let mut adj = alloc::vec![alloc::vec![0u8; 3]; 3];
        adj[0][1] = 1;
        adj[1][0] = 1;
        adj[1][2] = 1;
        adj[2][1] = 1;
        let g = Graph { side: alloc::vec![0, 1, 1], marks: alloc::vec![0; 3], adj };
        let perm = [2usize, 0, 1];
        assert_eq!(g.canonical(), g.relabel(&perm).canonical());
    }

    #[test]
    fn second_order_family() {
        // For a = 2 only (2,2): cross graphs are the double edge and the
        // single cross edge with attached within-block pieces.
        let fam = two_block_family(2).unwrap();
        assert!(!fam.terms.is_empty());
        for (g, _) in &fam.terms {
            assert!(g.cross_edges() >= 1);
        }
        let lf = long_increment_family(2).unwrap();
        for (g, _) in &lf.terms {
            assert_eq!(g.marks.iter().map(|&m| u32::from(m)).sum::<u32>(), 1);
        }
    }
}
