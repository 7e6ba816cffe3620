//! Min-plus tree sums for Markov-chain exponents.
//!
//! With rates `k_ij ≍ e^{−V(i,j)/ε}`, the matrix-tree theorem writes `π_i` as
//! a sum over spanning in-trees rooted at `i` of products of rates, so
//! `−ε ln π_i` tends to the lightest in-tree weight (minus its minimum over
//! `i`). An in-tree rooted at `r` gives every other state exactly one
//! outgoing edge, and following edges from any state ends at `r`.
//!
//! `V[i][j] = +∞` marks a missing edge.

/// Product of out-degrees up to which trees are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// Weight of the lightest in-tree rooted at `root`, or `+∞` if none exists.
pub fn min_in_tree_weight(v: &[Vec<f64>], root: usize) -> f64 {
    let n = v.len();
    let work: f64 = (0..n)
        .filter(|&i| i != root)
        .map(|i| (0..n).filter(|&j| j != i && v[i][j].is_finite()).count().max(1) as f64)
        .product();
    if work <= EXHAUSTIVE_LIMIT {
        min_in_tree_exhaustive(v, root)
    } else {
        min_in_tree_edmonds(v, root)
    }
}

/// `W_i` for every state, unshifted.
pub fn tree_exponents(v: &[Vec<f64>]) -> Vec<f64> {
    (0..v.len()).map(|r| min_in_tree_weight(v, r)).collect()
}

/// Depth-first enumeration of out-edge choices with branch-and-bound.
pub fn min_in_tree_exhaustive(v: &[Vec<f64>], root: usize) -> f64 {
    let n = v.len();
    let order: Vec<usize> = (0..n).filter(|&i| i != root).collect();
    let mut parent = vec![usize::MAX; n];
    let mut best = f64::INFINITY;
    search(v, root, &order, 0, 0.0, &mut parent, &mut best);
    best
}

fn search(
    v: &[Vec<f64>],
    root: usize,
    order: &[usize],
    depth: usize,
    acc: f64,
    parent: &mut [usize],
    best: &mut f64,
) {
    if acc >= *best {
        return;
    }
    if depth == order.len() {
        *best = acc;
        return;
    }
    let u = order[depth];
    for w in 0..v.len() {
        let c = v[u][w];
        if w == u || !c.is_finite() || closes_cycle(parent, root, u, w) {
            continue;
        }
        parent[u] = w;
        search(v, root, order, depth + 1, acc + c, parent, best);
        parent[u] = usize::MAX;
    }
}

/// Would adding `u → w` create a cycle among the assigned edges?
fn closes_cycle(parent: &[usize], root: usize, u: usize, w: usize) -> bool {
    let mut x = w;
    for _ in 0..parent.len() {
        if x == u {
            return true;
        }
        if x == root || parent[x] == usize::MAX {
            return false;
        }
        x = parent[x];
    }
    true
}

/// Chu–Liu/Edmonds on the reversed graph, `O(n · edges)`.
pub fn min_in_tree_edmonds(v: &[Vec<f64>], root: usize) -> f64 {
    // an in-tree here is an out-arborescence of the reversed graph
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (i, row) in v.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i != j && c.is_finite() {
                edges.push((j, i, c));
            }
        }
    }
    let mut n = v.len();
    let mut root = root;
    let mut total = 0.0;
    loop {
        let mut in_w = vec![f64::INFINITY; n];
        let mut pre = vec![usize::MAX; n];
        for &(a, b, c) in &edges {
            if a != b && c < in_w[b] {
                in_w[b] = c;
                pre[b] = a;
            }
        }
        if (0..n).any(|x| x != root && in_w[x] == f64::INFINITY) {
            return f64::INFINITY;
        }
        in_w[root] = 0.0;
        let mut id = vec![usize::MAX; n];
        let mut seen = vec![usize::MAX; n];
        let mut cycles = 0;
        for x0 in 0..n {
            total += in_w[x0];
            let mut x = x0;
            while seen[x] != x0 && id[x] == usize::MAX && x != root {
                seen[x] = x0;
                x = pre[x];
            }
            if x != root && id[x] == usize::MAX {
                let mut y = pre[x];
                while y != x {
                    id[y] = cycles;
                    y = pre[y];
                }
                id[x] = cycles;
                cycles += 1;
            }
        }
        if cycles == 0 {
            return total;
        }
        for x in id.iter_mut() {
            if *x == usize::MAX {
                *x = cycles;
                cycles += 1;
            }
        }
        edges = edges
            .into_iter()
            .filter_map(|(a, b, c)| {
                let (na, nb) = (id[a], id[b]);
                (na != nb).then(|| (na, nb, c - in_w[b]))
            })
            .collect();
        n = cycles;
        root = id[root];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn three_state_worked_example() {
        // V(1,2)=1, V(2,1)=2, V(2,3)=1, V(3,2)=3, V(3,1)=2, V(1,3)=4
        let v = vec![vec![INF, 1.0, 4.0], vec![2.0, INF, 1.0], vec![2.0, 3.0, INF]];
        assert_eq!(tree_exponents(&v), vec![3.0, 3.0, 2.0]);
        for r in 0..3 {
            assert_eq!(min_in_tree_edmonds(&v, r), min_in_tree_exhaustive(&v, r));
        }
    }

    #[test]
    fn missing_edges() {
        // 0 → 1 only: state 1 can be a root, 0 cannot
        let v = vec![vec![INF, 1.0], vec![INF, INF]];
        assert_eq!(min_in_tree_weight(&v, 1), 1.0);
        assert_eq!(min_in_tree_weight(&v, 0), INF);
        assert_eq!(min_in_tree_edmonds(&v, 0), INF);
    }

    #[test]
    fn cycle_graph_trees() {
        // ring of 5 with only neighbour edges
        let n = 5;
        let mut v = vec![vec![INF; n]; n];
        for i in 0..n {
            v[i][(i + 1) % n] = 1.0 + i as f64;
            v[(i + 1) % n][i] = 0.5 * i as f64 + 0.25;
        }
        for r in 0..n {
            assert!((min_in_tree_exhaustive(&v, r) - min_in_tree_edmonds(&v, r)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn edmonds_matches_enumeration(
            n in 2usize..7,
            seed in proptest::collection::vec(0.0f64..5.0, 36),
            holes in proptest::collection::vec(any::<bool>(), 36),
        ) {
            let v: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| {
                    let k = i * 6 + j;
                    if i == j || (holes[k] && (i + 1) % n != j) { INF } else { seed[k] }
                }).collect())
                .collect();
            for r in 0..n {
                let a = min_in_tree_exhaustive(&v, r);
                let b = min_in_tree_edmonds(&v, r);
                prop_assert!((a == b) || (a - b).abs() < 1e-9, "root {} {} vs {}", r, a, b);
            }
        }
    }
}
