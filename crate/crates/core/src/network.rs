//! Weighted coupling graphs with a pendant control edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Undirected weighted edge, stored with `i < j`, serialized as `[i, j, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, w: f64) -> Self {
        Edge { i: i.min(j), j: i.max(j), w }
    }
}

impl From<(usize, usize, f64)> for Edge {
    fn from(t: (usize, usize, f64)) -> Self {
        Edge::new(t.0, t.1, t.2)
    }
}

impl From<Edge> for (usize, usize, f64) {
    fn from(e: Edge) -> Self {
        (e.i, e.j, e.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Drift,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinNetwork {
    pub n: usize,
    pub drift_edges: Vec<Edge>,
    pub control_edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    pub part_a: BTreeSet<usize>,
    pub part_b: BTreeSet<usize>,
}

/// Vertex permutation in 1-based image form: `images[v-1] = pi(v)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Permutation {
    pub images: Vec<usize>,
}

impl Permutation {
    pub fn apply(&self, v: usize) -> usize {
        self.images[v - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(k, &v)| v == k + 1)
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.images.len()];
        let mut out = Vec::new();
        for start in 1..=self.images.len() {
            if seen[start - 1] || self.apply(start) == start {
                continue;
            }
            let mut cyc = vec![start];
            seen[start - 1] = true;
            let mut v = self.apply(start);
            while v != start {
                seen[v - 1] = true;
                cyc.push(v);
                v = self.apply(v);
            }
            out.push(cyc);
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for cyc in cycles {
            let parts: Vec<String> = cyc.iter().map(|v| v.to_string()).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

const AUTOMORPHISM_MAX_N: usize = 12;
const WEIGHT_TOL: f64 = 1e-12;

impl SpinNetwork {
    pub fn new(n: usize, drift: Vec<Edge>, control: Vec<Edge>) -> Result<Self> {
        let net = SpinNetwork {
            n,
            drift_edges: drift.into_iter().map(|e| Edge::new(e.i, e.j, e.w)).collect(),
            control_edges: control.into_iter().map(|e| Edge::new(e.i, e.j, e.w)).collect(),
        };
        net.validate()?;
        Ok(net)
    }

    /// Pendant-control network: `control_edges = [(1,2,1)]`.
    pub fn pendant(n: usize, drift: &[(usize, usize, f64)]) -> Result<Self> {
        let net = Self::new(
            n,
            drift.iter().map(|&e| e.into()).collect(),
            vec![Edge::new(1, 2, 1.0)],
        )?;
        net.require_pendant()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::NonPositiveN);
        }
        let mut seen: BTreeMap<(usize, usize), &'static str> = BTreeMap::new();
        for (field, edges) in [("drift_edges", &self.drift_edges), ("control_edges", &self.control_edges)] {
            for (k, e) in edges.iter().enumerate() {
                let at = format!("{field}[{k}]");
                if e.i == 0 || e.j > self.n {
                    return Err(Error::Schema {
                        field: at,
                        reason: format!("vertex index outside 1..={}", self.n),
                    });
                }
                if e.i == e.j {
                    return Err(Error::SelfLoop { field: at, i: e.i });
                }
                if !e.w.is_finite() {
                    return Err(Error::Schema { field: at, reason: "weight is not finite".into() });
                }
                if seen.insert((e.i, e.j), field).is_some() {
                    return Err(Error::DuplicateEdge { field: at, i: e.i, j: e.j });
                }
            }
        }
        Ok(())
    }

    pub fn is_pendant(&self) -> bool {
        self.n >= 2
            && self.drift_edges.iter().all(|e| e.i != 1)
            && self.control_edges.len() == 1
            && self.control_edges[0] == Edge::new(1, 2, 1.0)
    }

    pub fn require_pendant(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::NotPendant("need at least two spins".into()));
        }
        if let Some(e) = self.drift_edges.iter().find(|e| e.i == 1) {
            return Err(Error::NotPendant(format!("vertex 1 has drift edge ({},{})", e.i, e.j)));
        }
        if !self.is_pendant() {
            return Err(Error::NotPendant("control_edges must be [[1,2,1.0]]".into()));
        }
        Ok(())
    }

    pub fn has_positive_drift(&self) -> bool {
        self.drift_edges.iter().all(|e| e.w > 0.0)
    }

    pub fn edges(&self, which: Which) -> &[Edge] {
        match which {
            Which::Drift => &self.drift_edges,
            Which::Control => &self.control_edges,
        }
    }

    /// Symmetric weight lookup over one edge list; 0 when absent.
    pub fn weight(&self, which: Which, i: usize, j: usize) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        self.edges(which)
            .iter()
            .find(|e| e.i == a && e.j == b)
            .map_or(0.0, |e| e.w)
    }

    fn adjacency(&self, include_control: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + 1];
        let mut add = |e: &Edge| {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        };
        self.drift_edges.iter().for_each(&mut add);
        if include_control {
            self.control_edges.iter().for_each(&mut add);
        }
        adj
    }

    /// Vertices reachable from `start` through drift edges.
    pub fn drift_component(&self, start: usize) -> BTreeSet<usize> {
        reachable(&self.adjacency(false), start, None)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }
}

fn reachable(adj: &[Vec<usize>], start: usize, within: Option<&BTreeSet<usize>>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if within.is_some_and(|w| !w.contains(&u)) {
                continue;
            }
            if seen.insert(u) {
                queue.push_back(u);
            }
        }
    }
    seen
}

fn field_err(field: &str, reason: &str) -> Error {
    Error::Schema { field: field.into(), reason: reason.into() }
}

fn parse_edges(v: &Value, field: &str) -> Result<Vec<Edge>> {
    let arr = v
        .get(field)
        .ok_or_else(|| field_err(field, "missing"))?
        .as_array()
        .ok_or_else(|| field_err(field, "expected an array of [i, j, w]"))?;
    arr.iter()
        .enumerate()
        .map(|(k, e)| {
            let at = format!("{field}[{k}]");
            let t = e
                .as_array()
                .filter(|t| t.len() == 3)
                .ok_or_else(|| field_err(&at, "expected [i, j, w]"))?;
            let i = t[0].as_u64().ok_or_else(|| field_err(&at, "i must be a positive integer"))?;
            let j = t[1].as_u64().ok_or_else(|| field_err(&at, "j must be a positive integer"))?;
            let w = t[2].as_f64().ok_or_else(|| field_err(&at, "w must be a number"))?;
            if i == j {
                return Err(Error::SelfLoop { field: at, i: i as usize });
            }
            Ok(Edge::new(i as usize, j as usize, w))
        })
        .collect()
}

/// Parse and validate a network JSON document.
pub fn parse_network(text: &str) -> Result<SpinNetwork> {
    let v: Value = serde_json::from_str(text).map_err(|e| field_err("$", &e.to_string()))?;
    if !v.is_object() {
        return Err(field_err("$", "expected an object"));
    }
    let n = match v.get("n") {
        None => return Err(field_err("n", "missing")),
        Some(x) => match x.as_i64() {
            Some(k) if k <= 0 => return Err(Error::NonPositiveN),
            Some(k) => k as usize,
            None => return Err(field_err("n", "must be an integer")),
        },
    };
    let drift = parse_edges(&v, "drift_edges")?;
    let control = parse_edges(&v, "control_edges")?;
    SpinNetwork::new(n, drift, control)
}

/// Two-colouring of a drift-connected vertex set, `None` for an odd cycle.
///
/// Orientation: the colouring is propagated over drift and control edges from
/// the lowest-indexed vertex of the surrounding connected component, which is
/// placed in `part_a`; only the requested vertices are returned.
pub fn bipartition(net: &SpinNetwork, component: &BTreeSet<usize>) -> Result<Option<Bipartition>> {
    let Some(&first) = component.iter().next() else {
        return Err(Error::Disconnected);
    };
    if component.iter().any(|&v| v == 0 || v > net.n) {
        return Err(Error::Invalid("component vertex out of range".into()));
    }
    let drift_adj = net.adjacency(false);
    if reachable(&drift_adj, first, Some(component)) != *component {
        return Err(Error::Disconnected);
    }
    let colour_from = |adj: &[Vec<usize>], root: usize| -> Option<BTreeMap<usize, bool>> {
        let mut colour = BTreeMap::from([(root, true)]);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                match colour.get(&u) {
                    Some(&cu) if cu == colour[&v] => return None,
                    Some(_) => {}
                    None => {
                        colour.insert(u, !colour[&v]);
                        queue.push_back(u);
                    }
                }
            }
        }
        Some(colour)
    };
    // odd cycles inside the component decide existence
    let inner: Vec<Vec<usize>> = (0..=net.n)
        .map(|v| {
            if component.contains(&v) {
                drift_adj[v].iter().copied().filter(|u| component.contains(u)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let Some(local) = colour_from(&inner, first) else {
        return Ok(None);
    };
    let full_adj = net.adjacency(true);
    let root = *reachable(&full_adj, first, None).iter().next().unwrap();
    let colour = match colour_from(&full_adj, root) {
        Some(c) if c[&first] == local[&first] => local,
        Some(_) => local.into_iter().map(|(v, c)| (v, !c)).collect(),
        None => local,
    };
    let (a, b): (Vec<_>, Vec<_>) = colour.into_iter().partition(|&(_, c)| c);
    Ok(Some(Bipartition {
        part_a: a.into_iter().map(|(v, _)| v).collect(),
        part_b: b.into_iter().map(|(v, _)| v).collect(),
    }))
}

/// All non-identity drift automorphisms fixing `fixed` pointwise.
pub fn automorphisms(net: &SpinNetwork, fixed: &BTreeSet<usize>) -> Result<Vec<Permutation>> {
    let n = net.n;
    if n > AUTOMORPHISM_MAX_N {
        return Err(Error::Budget(format!("automorphism search limited to n <= {AUTOMORPHISM_MAX_N}")));
    }
    let mut w = vec![vec![0.0; n + 1]; n + 1];
    for e in &net.drift_edges {
        w[e.i][e.j] = e.w;
        w[e.j][e.i] = e.w;
    }
    let signature = |v: usize| {
        let mut ws: Vec<f64> = (1..=n).map(|u| w[v][u]).filter(|&x| x != 0.0).collect();
        ws.sort_by(f64::total_cmp);
        ws
    };
    let sigs: Vec<Vec<f64>> = (0..=n).map(|v| if v == 0 { Vec::new() } else { signature(v) }).collect();
    let same_sig = |a: usize, b: usize| {
        sigs[a].len() == sigs[b].len()
            && sigs[a].iter().zip(&sigs[b]).all(|(x, y)| (x - y).abs() <= WEIGHT_TOL)
    };

    struct Search<'a> {
        n: usize,
        w: &'a [Vec<f64>],
        images: Vec<usize>,
        used: Vec<bool>,
        out: Vec<Permutation>,
    }
    fn extend(s: &mut Search, v: usize, fixed: &BTreeSet<usize>, same_sig: &dyn Fn(usize, usize) -> bool) {
        if v > s.n {
            let p = Permutation { images: s.images[1..].to_vec() };
            if !p.is_identity() {
                s.out.push(p);
            }
            return;
        }
        let candidates: Vec<usize> = if fixed.contains(&v) { vec![v] } else { (1..=s.n).collect() };
        for img in candidates {
            if s.used[img] || (!fixed.contains(&v) && fixed.contains(&img)) || !same_sig(v, img) {
                continue;
            }
            let consistent = (1..v).all(|u| (s.w[u][v] - s.w[s.images[u]][img]).abs() <= WEIGHT_TOL);
            if !consistent {
                continue;
            }
            s.images[v] = img;
            s.used[img] = true;
            extend(s, v + 1, fixed, same_sig);
            s.used[img] = false;
        }
    }
    let mut s = Search { n, w: &w, images: vec![0; n + 1], used: vec![false; n + 1], out: Vec::new() };
    extend(&mut s, 1, fixed, &same_sig);
    Ok(s.out)
}
