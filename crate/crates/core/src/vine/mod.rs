//! Regular vines: structure, density evaluation, simulation and
//! (de)serialization. Structure selection and fitting live in [`select`].

mod select;

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng;
use crate::paircop::{Conditioning, PairCopula};

pub use select::{fit, gaussian_vine, max_spanning_tree, select_structure, TreeWeight, VineFitOptions};

pub const VINE_FORMAT: &str = "vineflood-vine";
pub const VINE_FORMAT_VERSION: u32 = 1;

/// One edge `C_{a,b;D}` of a vine tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Conditioned variable supplying the copula's first argument.
    pub a: usize,
    /// Conditioned variable supplying the copula's second argument.
    pub b: usize,
    /// Conditioning set, sorted ascending.
    pub conditioning: Vec<usize>,
    /// Nodes joined by this edge: variables in the first tree, edge indices
    /// of the previous tree afterwards.
    pub left: usize,
    pub right: usize,
    pub copula: PairCopula,
    #[serde(default)]
    pub loglik: f64,
}

impl Edge {
    /// `{a, b} ∪ D`.
    pub fn constraint_set(&self) -> BTreeSet<usize> {
        let mut s: BTreeSet<usize> = self.conditioning.iter().copied().collect();
        s.insert(self.a);
        s.insert(self.b);
        s
    }

    pub fn label(&self) -> String {
        let mut s = format!("{},{}", self.a + 1, self.b + 1);
        if !self.conditioning.is_empty() {
            let d: Vec<String> = self.conditioning.iter().map(|x| (x + 1).to_string()).collect();
            s.push(';');
            s.push_str(&d.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineTree {
    /// 1-based tree level.
    pub level: usize,
    pub edges: Vec<Edge>,
}

impl VineTree {
    /// Node labels of this tree: variables for level 1, previous-tree edge
    /// indices otherwise.
    pub fn nodes(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|e| [e.left, e.right]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RVineModel {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub columns: Vec<String>,
    pub trees: Vec<VineTree>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
}

/// Where an edge reads one of its two arguments from.
#[derive(Debug, Clone, Copy)]
enum Source {
    Variable(usize),
    /// `(edge index in the previous tree, take the a-side output)`.
    Child(usize, bool),
}

/// h-function outputs of an edge: `u_{a|D∪b}` and `u_{b|D∪a}`.
#[derive(Debug, Clone, Copy, Default)]
struct EdgeState {
    out_a: f64,
    out_b: f64,
}

/// Per variable in sampling order, the edges where it is conditioned,
/// ordered by tree level, and whether it is the `a` side.
#[derive(Debug, Clone)]
struct PeelStep {
    var: usize,
    edges: Vec<(usize, usize, bool)>,
}

impl RVineModel {
    pub fn from_trees(d: usize, columns: Vec<String>, trees: Vec<VineTree>, n: usize) -> Result<Self> {
        let mut m = RVineModel {
            format: VINE_FORMAT.into(),
            version: VINE_FORMAT_VERSION,
            d,
            columns,
            trees,
            loglik: 0.0,
            aic: 0.0,
            bic: 0.0,
            n,
        };
        m.validate()?;
        m.refresh_criteria();
        Ok(m)
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Result<Self> {
        if columns.len() != self.d {
            return Err(Error::invalid(format!("{} column names for {} variables", columns.len(), self.d)));
        }
        self.columns = columns;
        Ok(self)
    }

    /// Recomputes the model log-likelihood and criteria from edge values.
    pub fn refresh_criteria(&mut self) {
        let ll: f64 = self.edges().map(|e| e.loglik).sum();
        let k = self.n_params() as f64;
        self.loglik = ll;
        self.aic = -2.0 * ll + 2.0 * k;
        self.bic = -2.0 * ll + k * (self.n.max(1) as f64).ln();
    }

    /// An all-independence vine on a path structure (D-vine order 1..d).
    pub fn independence(d: usize) -> Result<Self> {
        Self::path(d, |_, _| PairCopula::independence())
    }

    /// Path (D-vine) structure with copulas supplied per `(level, position)`.
    pub fn path(d: usize, mut copula: impl FnMut(usize, usize) -> PairCopula) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("a vine needs at least two variables"));
        }
        let mut trees = Vec::new();
        for level in 1..d {
            let mut edges = Vec::new();
            for i in 0..d - level {
                edges.push(Edge {
                    a: i,
                    b: i + level,
                    conditioning: (i + 1..i + level).collect(),
                    left: i,
                    right: i + 1,
                    copula: copula(level, i),
                    loglik: 0.0,
                });
            }
            trees.push(VineTree { level, edges });
        }
        let columns = (1..=d).map(|i| format!("V{i}")).collect();
        Self::from_trees(d, columns, trees, 0)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.trees.iter().flat_map(|t| t.edges.iter())
    }

    pub fn n_params(&self) -> usize {
        self.edges().map(|e| e.copula.n_params()).sum()
    }

    pub fn n_edges(&self) -> usize {
        self.edges().count()
    }

    /// Checks tree sizes, edge counts, the proximity condition and the
    /// conditioned/conditioning labels.
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return Err(Error::invalid("a vine needs at least two variables"));
        }
        if self.columns.len() != d {
            return Err(Error::invalid(format!("{} column names for {d} variables", self.columns.len())));
        }
        if self.trees.len() != d - 1 {
            return Err(Error::invalid(format!("expected {} trees, found {}", d - 1, self.trees.len())));
        }
        for (k, tree) in self.trees.iter().enumerate() {
            let level = k + 1;
            let n_nodes = d - k;
            if tree.level != level {
                return Err(Error::invalid(format!("tree {level} is labelled level {}", tree.level)));
            }
            if tree.edges.len() != n_nodes - 1 {
                return Err(Error::invalid(format!(
                    "tree {level} must have {} edges, found {}",
                    n_nodes - 1,
                    tree.edges.len()
                )));
            }
            // Connected and acyclic: n−1 edges without a cycle (union–find).
            let mut parent: Vec<usize> = (0..n_nodes).collect();
            fn find(p: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while p[r] != r {
                    r = p[r];
                }
                p[x] = r;
                r
            }
            for e in &tree.edges {
                if e.left >= n_nodes || e.right >= n_nodes || e.left == e.right {
                    return Err(Error::invalid(format!("tree {level}: edge {} has invalid nodes", e.label())));
                }
                let (x, y) = (find(&mut parent, e.left), find(&mut parent, e.right));
                if x == y {
                    return Err(Error::invalid(format!("tree {level} contains a cycle at edge {}", e.label())));
                }
                parent[x] = y;
                if e.conditioning.len() != k || e.a == e.b || e.a >= d || e.b >= d {
                    return Err(Error::invalid(format!("tree {level}: malformed edge {}", e.label())));
                }
                if e.conditioning.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(format!("tree {level}: unsorted conditioning set in {}", e.label())));
                }
                if level == 1 {
                    if (e.a, e.b) != (e.left, e.right) {
                        return Err(Error::invalid(format!("tree 1: edge {} does not match its nodes", e.label())));
                    }
                } else {
                    let prev = &self.trees[k - 1].edges;
                    let (l, r) = (&prev[e.left], &prev[e.right]);
                    // Proximity: the joined edges share a node of the previous tree.
                    let shared = [l.left, l.right].iter().any(|x| *x == r.left || *x == r.right);
                    if !shared {
                        return Err(Error::invalid(format!(
                            "tree {level}: edge {} violates the proximity condition",
                            e.label()
                        )));
                    }
                    let (ls, rs) = (l.constraint_set(), r.constraint_set());
                    let d_set: BTreeSet<usize> = ls.intersection(&rs).copied().collect();
                    let want_a: Vec<usize> = ls.difference(&d_set).copied().collect();
                    let want_b: Vec<usize> = rs.difference(&d_set).copied().collect();
                    if want_a != [e.a]
                        || want_b != [e.b]
                        || d_set.into_iter().collect::<Vec<_>>() != e.conditioning
                    {
                        return Err(Error::invalid(format!(
                            "tree {level}: labels of edge {} are inconsistent with its nodes",
                            e.label()
                        )));
                    }
                }
            }
        }
        // Every pair of variables is conditioned exactly once.
        let mut pairs = BTreeSet::new();
        for e in self.edges() {
            if !pairs.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(Error::invalid(format!("pair {} appears twice", e.label())));
            }
        }
        if pairs.len() != d * (d - 1) / 2 {
            return Err(Error::invalid("vine does not cover every pair"));
        }
        for e in self.edges() {
            e.copula.validate()?;
        }
        Ok(())
    }

    fn sources(&self, level: usize, e: &Edge) -> (Source, Source) {
        if level == 1 {
            return (Source::Variable(e.a), Source::Variable(e.b));
        }
        let prev = &self.trees[level - 2].edges;
        let pick = |child: usize, var: usize| Source::Child(child, prev[child].a == var);
        (pick(e.left, e.a), pick(e.right, e.b))
    }

    fn read(src: Source, u: &[f64], prev: &[EdgeState]) -> f64 {
        match src {
            Source::Variable(i) => u[i],
            Source::Child(c, true) => prev[c].out_a,
            Source::Child(c, false) => prev[c].out_b,
        }
    }

    /// Log copula density at one interior point.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.d {
            return Err(Error::invalid(format!("point has {} coordinates, vine has {}", u.len(), self.d)));
        }
        if u.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return Err(Error::invalid("log_density needs coordinates inside (0, 1)"));
        }
        let mut prev: Vec<EdgeState> = Vec::new();
        let mut total = 0.0;
        for (k, tree) in self.trees.iter().enumerate() {
            let last = k + 1 == self.trees.len();
            let mut cur = Vec::with_capacity(tree.edges.len());
            for e in &tree.edges {
                let (sa, sb) = self.sources(k + 1, e);
                let (x, y) = (Self::read(sa, u, &prev), Self::read(sb, u, &prev));
                total += e.copula.ln_pdf(x, y);
                let mut st = EdgeState::default();
                if !last {
                    st.out_a = e.copula.hfunc(x, y, Conditioning::Second);
                    st.out_b = e.copula.hfunc(x, y, Conditioning::First);
                }
                cur.push(st);
            }
            prev = cur;
        }
        Ok(total)
    }

    pub fn loglik(&self, rows: &[Vec<f64>]) -> Result<f64> {
        rows.iter().map(|r| self.log_density(r)).sum()
    }

    /// Peels the vine from its top tree: repeatedly removes one conditioned
    /// variable of the remaining top edge together with its edges. The
    /// returned steps are in sampling (Rosenblatt) order. `keep_early`
    /// marks variables that should be peeled as late as possible so they
    /// land at the front of the order.
    fn peel(&self, keep_early: &[bool]) -> Result<Vec<PeelStep>> {
        let d = self.d;
        let mut alive: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![true; t.edges.len()]).collect();
        let mut steps = Vec::with_capacity(d);
        let mut remaining: BTreeSet<usize> = (0..d).collect();
        for k in (2..=d).rev() {
            // The unique alive edge at level k−1.
            let top_level = k - 1;
            let top = (0..self.trees[top_level - 1].edges.len())
                .find(|&i| alive[top_level - 1][i])
                .ok_or_else(|| Error::numerical("vine peeling lost its top edge"))?;
            let te = &self.trees[top_level - 1].edges[top];
            // Remove a variable that need not come early; among equals the larger index.
            let var = [te.a, te.b]
                .into_iter()
                .min_by_key(|&v| (keep_early[v], std::cmp::Reverse(v)))
                .expect("two candidates");
            let mut edges = Vec::with_capacity(k - 1);
            for level in 1..k {
                let idx: Vec<usize> = (0..self.trees[level - 1].edges.len())
                    .filter(|&i| {
                        let e = &self.trees[level - 1].edges[i];
                        alive[level - 1][i] && (e.a == var || e.b == var)
                    })
                    .collect();
                if idx.len() != 1 {
                    return Err(Error::numerical(format!(
                        "variable {} is conditioned in {} edges of tree {level} while peeling",
                        var + 1,
                        idx.len()
                    )));
                }
                let i = idx[0];
                alive[level - 1][i] = false;
                edges.push((level, i, self.trees[level - 1].edges[i].a == var));
            }
            remaining.remove(&var);
            steps.push(PeelStep { var, edges });
        }
        let first = *remaining.iter().next().expect("one variable remains");
        steps.push(PeelStep { var: first, edges: Vec::new() });
        steps.reverse();
        Ok(steps)
    }

    /// The default sampling order (variables in the order they are drawn).
    pub fn sampling_order(&self) -> Result<Vec<usize>> {
        Ok(self.peel(&vec![false; self.d])?.into_iter().map(|s| s.var).collect())
    }

    /// A sampling order that starts with the variables in `first`, if the
    /// vine admits one.
    pub fn sampling_order_with_prefix(&self, first: &[usize]) -> Result<Vec<usize>> {
        let mut flag = vec![false; self.d];
        for &v in first {
            if v >= self.d {
                return Err(Error::invalid(format!("variable index {v} out of range")));
            }
            flag[v] = true;
        }
        let order: Vec<usize> = self.peel(&flag)?.into_iter().map(|s| s.var).collect();
        let prefix: BTreeSet<usize> = order[..first.len()].iter().copied().collect();
        let want: BTreeSet<usize> = first.iter().copied().collect();
        if prefix != want {
            let names: Vec<&str> = first.iter().map(|&v| self.columns[v].as_str()).collect();
            return Err(Error::invalid(format!(
                "variables {names:?} are not a prefix of any sampling order of this vine \
                 (default order {:?}); a conditioning set must be peelable last, \
                 e.g. a single variable or the two ends of a first-tree edge",
                order.iter().map(|&v| self.columns[v].as_str()).collect::<Vec<_>>()
            )));
        }
        Ok(order)
    }

    /// Fills the edge states of `step`'s variable given its uniform value.
    fn forward_step(&self, step: &PeelStep, u: &[f64], states: &mut [Vec<EdgeState>]) -> f64 {
        let mut x = u[step.var];
        for &(level, i, is_a) in &step.edges {
            let e = &self.trees[level - 1].edges[i];
            let (sa, sb) = self.sources(level, e);
            let partner = if is_a { sb } else { sa };
            let p = if level == 1 { Self::read(partner, u, &[]) } else { Self::read(partner, u, &states[level - 2]) };
            let (ua, ub) = if is_a { (x, p) } else { (p, x) };
            let st = EdgeState {
                out_a: e.copula.hfunc(ua, ub, Conditioning::Second),
                out_b: e.copula.hfunc(ua, ub, Conditioning::First),
            };
            states[level - 1][i] = st;
            x = if is_a { st.out_a } else { st.out_b };
        }
        x
    }

    /// Inverse of [`forward_step`](Self::forward_step): given the uniform
    /// `w` for the variable conditional on all earlier ones, recovers its
    /// value and fills the edge states.
    fn inverse_step(&self, step: &PeelStep, w: f64, u: &mut [f64], states: &mut [Vec<EdgeState>]) -> Result<()> {
        let mut x = w;
        let mut partners = Vec::with_capacity(step.edges.len());
        for &(level, i, is_a) in &step.edges {
            let e = &self.trees[level - 1].edges[i];
            let (sa, sb) = self.sources(level, e);
            let partner = if is_a { sb } else { sa };
            let p = if level == 1 { Self::read(partner, u, &[]) } else { Self::read(partner, u, &states[level - 2]) };
            partners.push(p);
        }
        for (&(level, i, is_a), &p) in step.edges.iter().zip(&partners).rev() {
            let e = &self.trees[level - 1].edges[i];
            let out = x;
            x = if is_a {
                e.copula.hinv(out, p, Conditioning::Second)?
            } else {
                e.copula.hinv(out, p, Conditioning::First)?
            };
            let (ua, ub) = if is_a { (x, p) } else { (p, x) };
            states[level - 1][i] = EdgeState {
                out_a: if is_a { out } else { e.copula.hfunc(ua, ub, Conditioning::Second) },
                out_b: if is_a { e.copula.hfunc(ua, ub, Conditioning::First) } else { out },
            };
        }
        u[step.var] = x;
        Ok(())
    }

    fn empty_states(&self) -> Vec<Vec<EdgeState>> {
        self.trees.iter().map(|t| vec![EdgeState::default(); t.edges.len()]).collect()
    }

    /// Forward Rosenblatt transform in the default sampling order:
    /// returns, per variable, its conditional distribution value given the
    /// variables drawn before it. Output is indexed by variable.
    pub fn rosenblatt(&self, u: &[f64]) -> Result<Vec<f64>> {
        let steps = self.peel(&vec![false; self.d])?;
        self.rosenblatt_with(&steps, u)
    }

    fn rosenblatt_with(&self, steps: &[PeelStep], u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.d {
            return Err(Error::invalid("point dimension does not match the vine"));
        }
        let mut states = self.empty_states();
        let mut w = vec![0.0; self.d];
        for s in steps {
            w[s.var] = self.forward_step(s, u, &mut states);
        }
        Ok(w)
    }

    /// Inverse Rosenblatt transform: maps independent uniforms (indexed by
    /// variable) to a draw from the vine, in the default sampling order.
    pub fn inverse_rosenblatt(&self, w: &[f64]) -> Result<Vec<f64>> {
        let steps = self.peel(&vec![false; self.d])?;
        let mut u = vec![0.0; self.d];
        let mut states = self.empty_states();
        for s in &steps {
            self.inverse_step(s, w[s.var], &mut u, &mut states)?;
        }
        Ok(u)
    }

    /// `m` draws from the vine copula, rows of length `d`.
    pub fn simulate(&self, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.conditional_simulate(&[], m, seed)
    }

    /// Draws the free coordinates given `fixed = [(variable, u)]`. The
    /// fixed variables must form a prefix of some sampling order.
    pub fn conditional_simulate(&self, fixed: &[(usize, f64)], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let vars: Vec<usize> = fixed.iter().map(|f| f.0).collect();
        if vars.iter().collect::<BTreeSet<_>>().len() != vars.len() {
            return Err(Error::invalid("a variable is fixed twice"));
        }
        for &(v, x) in fixed {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::invalid(format!("fixed value {x} for variable {v} is outside (0, 1)")));
            }
        }
        self.sampling_order_with_prefix(&vars)?;
        let mut flag = vec![false; self.d];
        for &v in &vars {
            flag[v] = true;
        }
        let steps = self.peel(&flag)?;
        let k = fixed.len();
        // Shared state of the fixed prefix.
        let mut base_u = vec![0.0; self.d];
        for &(v, x) in fixed {
            base_u[v] = x;
        }
        let mut base_states = self.empty_states();
        for s in &steps[..k] {
            self.forward_step(s, &base_u, &mut base_states);
        }
        let free = &steps[k..];
        const CHUNK: usize = 512;
        let n_chunks = m.div_ceil(CHUNK);
        let chunks: Result<Vec<Vec<Vec<f64>>>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut r = rng::stream(seed, "vine-draws", c as u64);
                let len = CHUNK.min(m - c * CHUNK);
                let mut out = Vec::with_capacity(len);
                for _ in 0..len {
                    let mut u = base_u.clone();
                    let mut states = base_states.clone();
                    for s in free {
                        let w = rng::open_uniform(&mut r);
                        self.inverse_step(s, w, &mut u, &mut states)?;
                    }
                    out.push(u);
                }
                Ok(out)
            })
            .collect();
        Ok(chunks?.into_iter().flatten().collect())
    }

    /// Single draw from an external generator (default order).
    pub fn sample_one<R: Rng + ?Sized>(&self, r: &mut R) -> Result<Vec<f64>> {
        let w: Vec<f64> = (0..self.d).map(|_| rng::open_uniform(r)).collect();
        self.inverse_rosenblatt(&w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: RVineModel = serde_json::from_str(s)?;
        if m.format != VINE_FORMAT {
            return Err(Error::invalid(format!("not a vine document (format '{}')", m.format)));
        }
        if m.version != VINE_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported vine document version {}", m.version)));
        }
        m.validate()?;
        Ok(m)
    }
}
