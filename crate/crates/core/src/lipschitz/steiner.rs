//! Exact Steiner trees in small weighted graphs (Dreyfus-Wagner).

use std::collections::BTreeSet;

use crate::dataset::{Dataset, Graph, Payload};
use crate::error::{Error, Result};

pub const MAX_STEINER_VERTICES: usize = 16;
pub const MAX_STEINER_TERMINALS: usize = 10;

/// All-pairs shortest paths with successor matrix for path recovery.
pub struct ShortestPaths {
    pub dist: Vec<Vec<f64>>,
    next: Vec<Vec<Option<usize>>>,
}

impl ShortestPaths {
    pub fn new(graph: &Graph) -> Self {
        let n = graph.vertices;
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut next = vec![vec![None; n]; n];
        for v in 0..n {
            dist[v][v] = 0.0;
            next[v][v] = Some(v);
        }
        for &(u, v, w) in &graph.edges {
            if u != v && w < dist[u][v] {
                dist[u][v] = w;
                dist[v][u] = w;
                next[u][v] = Some(v);
                next[v][u] = Some(u);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                        next[i][j] = next[i][k];
                    }
                }
            }
        }
        ShortestPaths { dist, next }
    }

    /// Vertex sequence of a shortest `u`-`v` path.
    pub fn path(&self, u: usize, v: usize) -> Vec<usize> {
        let mut out = vec![u];
        let mut cur = u;
        while cur != v {
            cur = self.next[cur][v].expect("connected pair");
            out.push(cur);
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Step {
    Leaf,
    Split(usize),
    Move(usize),
}

/// Minimum Steiner tree connecting `terminals` (vertex ids, duplicates
/// allowed). Returns the tree edges `(u, v, w)` with `u < v`, sorted, and the
/// total cost.
pub fn steiner_solve(graph: &Graph, terminals: &[usize]) -> Result<(Vec<(usize, usize, f64)>, f64)> {
    if graph.vertices > MAX_STEINER_VERTICES {
        return Err(Error::input(format!(
            "Steiner solver capped at {MAX_STEINER_VERTICES} vertices, got {}",
            graph.vertices
        )));
    }
    let terms: Vec<usize> = terminals.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(&t) = terms.iter().find(|&&t| t >= graph.vertices) {
        return Err(Error::input(format!("terminal vertex {t} is not in the graph")));
    }
    if terms.len() > MAX_STEINER_TERMINALS {
        return Err(Error::input(format!(
            "Steiner solver capped at {MAX_STEINER_TERMINALS} terminals, got {}",
            terms.len()
        )));
    }
    if terms.len() <= 1 {
        return Ok((Vec::new(), 0.0));
    }
    let sp = ShortestPaths::new(graph);
    if terms.iter().any(|&t| !sp.dist[terms[0]][t].is_finite()) {
        return Err(Error::input("terminals are not connected"));
    }

    let n = graph.vertices;
    let k = terms.len();
    let full = (1usize << k) - 1;
    let mut dp = vec![vec![f64::INFINITY; n]; 1 << k];
    let mut how = vec![vec![Step::Leaf; n]; 1 << k];
    for (i, &t) in terms.iter().enumerate() {
        for v in 0..n {
            dp[1 << i][v] = sp.dist[t][v];
            how[1 << i][v] = Step::Move(t);
        }
        how[1 << i][t] = Step::Leaf;
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        for v in 0..n {
            // proper nonempty submasks containing the lowest bit, to halve work
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let a = sub | low;
                if a != mask {
                    let cost = dp[a][v] + dp[mask ^ a][v];
                    if cost < dp[mask][v] {
                        dp[mask][v] = cost;
                        how[mask][v] = Step::Split(a);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        let merged: Vec<f64> = dp[mask].clone();
        for v in 0..n {
            for u in 0..n {
                let cost = merged[u] + sp.dist[u][v];
                if cost < dp[mask][v] {
                    dp[mask][v] = cost;
                    how[mask][v] = Step::Move(u);
                }
            }
        }
    }

    let root = terms[0];
    let mut edges = BTreeSet::new();
    collect(&how, &sp, full, root, &mut edges);
    let tree = prune(graph, &terms, edges);
    let cost = tree.iter().map(|e| e.2).sum();
    Ok((tree, cost))
}

fn collect(how: &[Vec<Step>], sp: &ShortestPaths, mask: usize, v: usize, edges: &mut BTreeSet<(usize, usize)>) {
    match how[mask][v] {
        Step::Leaf => {}
        Step::Split(a) => {
            collect(how, sp, a, v, edges);
            collect(how, sp, mask ^ a, v, edges);
        }
        Step::Move(u) => {
            let path = sp.path(u, v);
            for w in path.windows(2) {
                edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
            collect(how, sp, mask, u, edges);
        }
    }
}

/// Spanning forest of the collected edges (Kruskal), with non-terminal
/// leaves trimmed.
fn prune(graph: &Graph, terms: &[usize], edges: BTreeSet<(usize, usize)>) -> Vec<(usize, usize, f64)> {
    let weight = |u: usize, v: usize| {
        graph
            .edges
            .iter()
            .filter(|e| (e.0 == u && e.1 == v) || (e.0 == v && e.1 == u))
            .map(|e| e.2)
            .fold(f64::INFINITY, f64::min)
    };
    let mut weighted: Vec<(usize, usize, f64)> = edges.into_iter().map(|(u, v)| (u, v, weight(u, v))).collect();
    weighted.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut parent: Vec<usize> = (0..graph.vertices).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    let mut tree = Vec::new();
    for (u, v, w) in weighted {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            tree.push((u, v, w));
        }
    }
    loop {
        let mut degree = vec![0usize; graph.vertices];
        for &(u, v, _) in &tree {
            degree[u] += 1;
            degree[v] += 1;
        }
        let before = tree.len();
        tree.retain(|&(u, v, _)| !((degree[u] == 1 && !terms.contains(&u)) || (degree[v] == 1 && !terms.contains(&v))));
        if tree.len() == before {
            break;
        }
    }
    tree.sort_by_key(|e| (e.0, e.1));
    tree
}

pub(crate) fn dataset_terminals(dataset: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut ids = Vec::with_capacity(dataset.len());
    let mut vertices = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        match r.payload {
            Payload::Vertex(v) => {
                ids.push(r.id);
                vertices.push(v);
            }
            _ => return Err(Error::input(format!("record {} is not a terminal vertex", r.id))),
        }
    }
    Ok((ids, vertices))
}

pub fn steiner_cost(graph: &Graph, terminals: &[usize]) -> Result<f64> {
    Ok(steiner_solve(graph, terminals)?.1)
}

/// `f` for a graph-terminals dataset.
pub fn steiner_value(dataset: &Dataset) -> Result<f64> {
    let graph = dataset.graph().ok_or_else(|| Error::input("terminal dataset has no graph"))?;
    steiner_cost(graph, &dataset_terminals(dataset)?.1)
}
