//! Weighted chains on a finite interior with boundary, their spectral
//! classification, Green's functions, `F_B(A)` and Poisson kernels.
//!
//! Vertices are dense indices: the interior occupies `0..n_interior()` and the
//! boundary the indices after it. Labels are kept for IO only.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_complex::Complex64;
use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

pub type Vertex = usize;

/// A weight class needs its spectral radius below `1 - SPECTRAL_MARGIN`.
pub const SPECTRAL_MARGIN: f64 = 1e-9;

/// Row sums of a Markov chain must be within this of one.
pub const MARKOV_ROW_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    General,
    Symmetric,
    Hermitian,
}

/// Ordered so that `Markov > Integrable > Green > Divergent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightClass {
    Divergent,
    Green,
    Integrable,
    Markov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub class: WeightClass,
    /// Spectral radius of `Q`.
    pub radius: f64,
    /// Spectral radius of `|Q|`.
    pub abs_radius: f64,
}

impl Classification {
    pub fn is_green(&self) -> bool {
        self.class >= WeightClass::Green
    }

    pub fn is_integrable(&self) -> bool {
        self.class >= WeightClass::Integrable
    }

    pub fn is_markov(&self) -> bool {
        self.class == WeightClass::Markov
    }

    /// Distance of the governing radius from 1.
    pub fn margin(&self) -> f64 {
        if self.is_integrable() {
            1.0 - self.abs_radius
        } else {
            1.0 - self.radius
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightedChain<S> {
    labels: Vec<String>,
    n_interior: usize,
    weights: BTreeMap<(Vertex, Vertex), S>,
    out: Vec<Vec<(Vertex, S)>>,
    symmetry: Symmetry,
}

impl<S: Scalar> WeightedChain<S> {
    /// Builds a chain from interior labels, boundary labels and directed weights
    /// indexed by position (interior first, then boundary).
    ///
    /// For symmetric or Hermitian chains a missing reverse edge is filled in;
    /// a present one must agree.
    pub fn new(
        interior: Vec<String>,
        boundary: Vec<String>,
        edges: Vec<(Vertex, Vertex, S)>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::InvalidInput("chain has no interior vertices".into()));
        }
        let n_interior = interior.len();
        let labels: Vec<String> = interior.into_iter().chain(boundary).collect();
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(j) = seen.insert(l.clone(), i) {
                return Err(Error::InvalidInput(format!("vertex id {l:?} repeated (positions {j} and {i})")));
            }
        }
        let n = labels.len();
        let mut weights = BTreeMap::new();
        for (u, v, w) in &edges {
            let (u, v) = (*u, *v);
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) references an unknown vertex")));
            }
            if u >= n_interior && v >= n_interior {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} joins two boundary vertices",
                    labels[u], labels[v]
                )));
            }
            if weights.insert((u, v), w.clone()).is_some() {
                return Err(Error::InvalidInput(format!("edge {} -> {} given twice", labels[u], labels[v])));
            }
        }
        if symmetry != Symmetry::General {
            let stored: Vec<_> = weights.iter().map(|(k, w)| (*k, w.clone())).collect();
            for ((u, v), w) in stored {
                let mirrored = if symmetry == Symmetry::Hermitian { w.conj() } else { w.clone() };
                match weights.get(&(v, u)) {
                    None => {
                        weights.insert((v, u), mirrored);
                    }
                    Some(r) => {
                        let gap = (r.clone() - mirrored).modulus();
                        if gap > 1e-12 * w.modulus().max(1.0) {
                            return Err(Error::InvalidInput(format!(
                                "edge {} -> {} violates the {symmetry:?} flag",
                                labels[u], labels[v]
                            )));
                        }
                    }
                }
            }
            if symmetry == Symmetry::Hermitian {
                for ((u, v), w) in &weights {
                    if u == v && w.to_complex().im.abs() > 1e-12 {
                        return Err(Error::InvalidInput(format!("self-edge at {} is not real", labels[*u])));
                    }
                }
            }
        }
        let mut out = vec![Vec::new(); n];
        for ((u, v), w) in &weights {
            out[*u].push((*v, w.clone()));
        }
        Ok(WeightedChain { labels, n_interior, weights, out, symmetry })
    }

    /// Label-based constructor for tests and fixtures.
    pub fn from_labels(interior: &[&str], boundary: &[&str], edges: &[(&str, &str, S)], symmetry: Symmetry) -> Result<Self> {
        let pos: HashMap<&str, usize> = interior.iter().chain(boundary).enumerate().map(|(i, l)| (*l, i)).collect();
        let mut es = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            let u = *pos.get(a).ok_or_else(|| Error::InvalidInput(format!("unknown vertex {a:?}")))?;
            let v = *pos.get(b).ok_or_else(|| Error::InvalidInput(format!("unknown vertex {b:?}")))?;
            es.push((u, v, w.clone()));
        }
        Self::new(
            interior.iter().map(|s| s.to_string()).collect(),
            boundary.iter().map(|s| s.to_string()).collect(),
            es,
            symmetry,
        )
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn interior(&self) -> std::ops::Range<Vertex> {
        0..self.n_interior
    }

    pub fn boundary(&self) -> std::ops::Range<Vertex> {
        self.n_interior..self.labels.len()
    }

    pub fn is_interior(&self, v: Vertex) -> bool {
        v < self.n_interior
    }

    pub fn is_boundary(&self, v: Vertex) -> bool {
        v >= self.n_interior && v < self.labels.len()
    }

    pub fn label(&self, v: Vertex) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<Vertex> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// `q(u, v)`, zero when no weight is stored.
    pub fn q(&self, u: Vertex, v: Vertex) -> S {
        self.weights.get(&(u, v)).cloned().unwrap_or_else(S::zero)
    }

    pub fn weight(&self, u: Vertex, v: Vertex) -> Option<&S> {
        self.weights.get(&(u, v))
    }

    pub fn out_edges(&self, u: Vertex) -> &[(Vertex, S)] {
        &self.out[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex, &S)> {
        self.weights.iter().map(|((u, v), w)| (*u, *v, w))
    }

    /// `q(ω)` for a vertex sequence; zero if some step carries no weight.
    pub fn path_weight(&self, path: &[Vertex]) -> S {
        let mut w = S::one();
        for s in path.windows(2) {
            match self.weights.get(&(s[0], s[1])) {
                Some(q) => w *= q.clone(),
                None => return S::zero(),
            }
        }
        w
    }

    pub fn map_weights<T: Scalar>(&self, f: impl Fn(&S) -> T) -> WeightedChain<T> {
        WeightedChain {
            labels: self.labels.clone(),
            n_interior: self.n_interior,
            weights: self.weights.iter().map(|(k, w)| (*k, f(w))).collect(),
            out: self.out.iter().map(|row| row.iter().map(|(v, w)| (*v, f(w))).collect()).collect(),
            symmetry: self.symmetry,
        }
    }

    pub fn to_complex(&self) -> WeightedChain<Complex64> {
        self.map_weights(Scalar::to_complex)
    }

    /// `|q|`, which dominates every path sum of `q`.
    pub fn abs_chain(&self) -> WeightedChain<f64> {
        let mut c = self.map_weights(Scalar::modulus);
        if c.symmetry == Symmetry::Hermitian {
            c.symmetry = Symmetry::Symmetric;
        }
        c
    }

    /// Real weights as `f64`; fails if any weight has an imaginary part.
    pub fn to_real(&self) -> Result<WeightedChain<f64>> {
        for (u, v, w) in self.edges() {
            if !w.is_real() {
                return Err(Error::Refused(format!(
                    "weight {} -> {} is not real",
                    self.label(u),
                    self.label(v)
                )));
            }
        }
        let mut c = self.map_weights(|w| w.to_complex().re);
        if c.symmetry == Symmetry::Hermitian {
            c.symmetry = Symmetry::Symmetric;
        }
        Ok(c)
    }

    /// Same weights with a different interior: `keep` lists interior vertices
    /// to retain; the rest become boundary. Vertex indices are renumbered.
    pub fn restrict(&self, keep: &[Vertex]) -> Result<(WeightedChain<S>, Vec<Vertex>)> {
        let mut order: Vec<Vertex> = keep.to_vec();
        let mut is_kept = vec![false; self.n_vertices()];
        for &v in keep {
            if !self.is_interior(v) || is_kept[v] {
                return Err(Error::InvalidInput(format!("bad restriction vertex {v}")));
            }
            is_kept[v] = true;
        }
        order.extend((0..self.n_vertices()).filter(|&v| !is_kept[v]));
        let mut new_index = vec![0; self.n_vertices()];
        for (i, &v) in order.iter().enumerate() {
            new_index[v] = i;
        }
        let edges = self
            .edges()
            .filter(|(u, v, _)| is_kept[*u] || is_kept[*v])
            .map(|(u, v, w)| (new_index[u], new_index[v], w.clone()))
            .collect();
        let chain = WeightedChain::new(
            keep.iter().map(|&v| self.labels[v].clone()).collect(),
            order[keep.len()..].iter().map(|&v| self.labels[v].clone()).collect(),
            edges,
            self.symmetry,
        )?;
        Ok((chain, order))
    }

    /// `Q` restricted to `subset × subset`.
    pub fn matrix_on(&self, subset: &[Vertex]) -> Matrix<S> {
        let mut pos = vec![usize::MAX; self.n_vertices()];
        for (i, &v) in subset.iter().enumerate() {
            pos[v] = i;
        }
        let mut m = Matrix::zeros(subset.len(), subset.len());
        for (i, &u) in subset.iter().enumerate() {
            for (v, w) in &self.out[u] {
                if pos[*v] != usize::MAX {
                    m[(i, pos[*v])] = w.clone();
                }
            }
        }
        m
    }

    /// `Q` on the full interior.
    pub fn interior_matrix(&self) -> Matrix<S> {
        self.matrix_on(&self.interior().collect::<Vec<_>>())
    }

    /// `det(I - Q_S)`; equals 1 for the empty set.
    pub fn det_i_minus_q_on(&self, subset: &[Vertex]) -> S {
        if subset.is_empty() {
            return S::one();
        }
        self.matrix_on(subset).identity_minus().det()
    }

    /// Nonnegative real weights, rows summing to one over the closure, and
    /// every interior vertex able to reach the boundary.
    pub fn is_markov(&self) -> bool {
        for u in self.interior() {
            let mut sum = 0.0;
            for (_, w) in &self.out[u] {
                let z = w.to_complex();
                if z.im != 0.0 || z.re < 0.0 {
                    return false;
                }
                sum += z.re;
            }
            if (sum - 1.0).abs() > MARKOV_ROW_TOL {
                return false;
            }
        }
        self.unreachable_from_boundary().is_none()
    }

    /// First interior vertex with no positive-weight path to the boundary.
    pub fn unreachable_from_boundary(&self) -> Option<Vertex> {
        let n = self.n_vertices();
        let mut incoming: Vec<Vec<Vertex>> = vec![Vec::new(); n];
        for (u, v, w) in self.edges() {
            if !w.is_zero() {
                incoming[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut queue: VecDeque<Vertex> = self.boundary().collect();
        for b in self.boundary() {
            seen[b] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &u in &incoming[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        self.interior().find(|&v| !seen[v])
    }

    pub fn classify(&self) -> Classification {
        let q = self.interior_matrix().to_complex();
        let radius = linalg::spectral_radius(&q);
        let abs_radius = linalg::spectral_radius(&q.map(|z| Complex64::new(z.norm(), 0.0)));
        let class = if self.is_markov() {
            WeightClass::Markov
        } else if abs_radius < 1.0 - SPECTRAL_MARGIN {
            WeightClass::Integrable
        } else if radius < 1.0 - SPECTRAL_MARGIN {
            WeightClass::Green
        } else {
            WeightClass::Divergent
        };
        Classification { class, radius, abs_radius }
    }

    /// Green's function on the full interior; refuses divergent weights.
    pub fn green(&self) -> Result<GreenData<S>> {
        let class = self.classify();
        if !class.is_green() {
            return Err(Error::Divergent { radius: class.radius });
        }
        let mut g = self.green_on(&self.interior().collect::<Vec<_>>())?;
        g.classification = Some(class);
        Ok(g)
    }

    /// `G_S = (I - Q_S)^{-1}` for a subset of the interior, without
    /// classification. Subsets of a green chain need not be green, so a
    /// singular system is reported as [`Error::NotGreen`].
    pub fn green_on(&self, subset: &[Vertex]) -> Result<GreenData<S>> {
        let mut index = vec![usize::MAX; self.n_vertices()];
        for (i, &v) in subset.iter().enumerate() {
            if !self.is_interior(v) {
                return Err(Error::InvalidInput(format!("{} is not an interior vertex", self.label(v))));
            }
            if index[v] != usize::MAX {
                return Err(Error::InvalidInput(format!("{} repeated", self.label(v))));
            }
            index[v] = i;
        }
        let m = self.matrix_on(subset).identity_minus();
        let lu = m.lu();
        if lu.is_singular() {
            return Err(Error::NotGreen(format!("I - Q is singular on a {}-vertex set", subset.len())));
        }
        let g = lu.inverse()?;
        if !S::is_exact() && !g.is_finite() {
            return Err(Error::NotGreen("Green's function is not finite".into()));
        }
        Ok(GreenData { vertices: subset.to_vec(), index, g, det_i_minus_q: lu.det(), classification: None })
    }

    /// `G_S(x, x)` by a single linear solve.
    pub fn green_diagonal_on(&self, subset: &[Vertex], x: Vertex) -> Result<S> {
        let i = subset
            .iter()
            .position(|&v| v == x)
            .ok_or_else(|| Error::InvalidInput(format!("{} not in subset", self.label(x))))?;
        let lu = self.matrix_on(subset).identity_minus().lu();
        if lu.is_singular() {
            return Err(Error::NotGreen(format!("I - Q is singular on a {}-vertex set", subset.len())));
        }
        let mut e = vec![S::zero(); subset.len()];
        e[i] = S::one();
        Ok(lu.solve(&e)?[i].clone())
    }

    /// `F_B(A) = ∏_j G_{A_j}(x_j, x_j)` with `A_j = A ∖ {x_1, …, x_{j-1}}`.
    /// Entries of `b` outside the interior are ignored.
    pub fn f_ordered(&self, b: &[Vertex]) -> Result<S> {
        let mut present = vec![true; self.n_interior];
        let mut seen = vec![false; self.n_vertices()];
        let mut f = S::one();
        for &x in b {
            if x >= self.n_vertices() {
                return Err(Error::InvalidInput(format!("vertex index {x} out of range")));
            }
            if seen[x] {
                return Err(Error::InvalidInput(format!("{} repeated in ordering", self.label(x))));
            }
            seen[x] = true;
            if !self.is_interior(x) {
                continue;
            }
            let subset: Vec<Vertex> = self.interior().filter(|&v| present[v]).collect();
            f *= self.green_diagonal_on(&subset, x)?;
            present[x] = false;
        }
        Ok(f)
    }

    /// `F_B(A) = det(I - Q_{A∖B}) / det(I - Q_A)`, the order-free form.
    pub fn f_set(&self, b: &[Vertex]) -> Result<S> {
        let mut keep = vec![true; self.n_interior];
        for &x in b {
            if self.is_interior(x) {
                keep[x] = false;
            }
        }
        let rest: Vec<Vertex> = self.interior().filter(|&v| keep[v]).collect();
        let all: Vec<Vertex> = self.interior().collect();
        let d = self.det_i_minus_q_on(&all);
        if d.is_zero() {
            return Err(Error::NotGreen("I - Q is singular".into()));
        }
        Ok(self.det_i_minus_q_on(&rest) / d)
    }

    /// `F(A) = det G`.
    pub fn f_total(&self) -> Result<S> {
        self.f_set(&self.interior().collect::<Vec<_>>())
    }

    /// `H_A(x, z) = Σ_y G(x, y) q(y, z)` for interior `x` and boundary `z`.
    pub fn poisson_kernel(&self, green: &GreenData<S>, x: Vertex, z: Vertex) -> Result<S> {
        if !self.is_interior(x) {
            return Err(Error::InvalidInput(format!("{} is not interior", self.label(x))));
        }
        if !self.is_boundary(z) {
            return Err(Error::InvalidInput(format!("{} is not a boundary vertex", self.label(z))));
        }
        Ok(self.walk_mass(green, x, z))
    }

    /// `H_∂A(z, w)`: paths from `z` to `w` through at least one interior vertex.
    pub fn boundary_poisson_kernel(&self, green: &GreenData<S>, z: Vertex, w: Vertex) -> Result<S> {
        if !self.is_boundary(z) || !self.is_boundary(w) {
            return Err(Error::InvalidInput("boundary Poisson kernel needs two boundary vertices".into()));
        }
        Ok(self.walk_mass(green, z, w))
    }

    /// Mass of paths `u → v` of length ≥ 1 whose intermediate vertices lie in
    /// the set of `green`: `q(u,v) + Σ_{a,b} q(u,a) G(a,b) q(b,v)`.
    ///
    /// For `u` in the set this equals `Σ_y G(u,y) q(y,v)`.
    pub fn walk_mass(&self, green: &GreenData<S>, u: Vertex, v: Vertex) -> S {
        let mut total = self.q(u, v);
        let into_v: Vec<(usize, S)> = green
            .vertices
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| self.weight(b, v).map(|w| (j, w.clone())))
            .collect();
        if into_v.is_empty() {
            return total;
        }
        for (a, qa) in &self.out[u] {
            let i = green.index[*a];
            if i == usize::MAX {
                continue;
            }
            for (j, qb) in &into_v {
                total += qa.clone() * green.g[(i, *j)].clone() * qb.clone();
            }
        }
        total
    }

    /// `f_x = 1 - 1/G(x, x)`, the elementary-loop mass at `x`.
    pub fn first_return_mass(&self, green: &GreenData<S>, x: Vertex) -> Result<S> {
        let gxx = green.entry(x, x);
        if gxx.is_zero() {
            return Err(Error::Numerical(format!("G({0},{0}) = 0", self.label(x))));
        }
        Ok(S::one() - S::one() / gxx)
    }

    /// Elementary-loop mass at `x` inside `subset` by depth-first path
    /// enumeration up to `max_len` steps, pruning paths of weight below `prune`.
    pub fn first_return_enumerated(&self, subset: &[Vertex], x: Vertex, max_len: usize, prune: f64) -> S {
        let mut allowed = vec![false; self.n_vertices()];
        for &v in subset {
            allowed[v] = true;
        }
        let mut total = S::zero();
        // (vertex, steps so far, weight)
        let mut stack: Vec<(Vertex, usize, S)> = vec![(x, 0, S::one())];
        while let Some((v, len, w)) = stack.pop() {
            if len == max_len {
                continue;
            }
            for (u, q) in &self.out[v] {
                let nw = w.clone() * q.clone();
                if nw.modulus() < prune {
                    continue;
                }
                if *u == x {
                    total += nw;
                } else if allowed[*u] {
                    stack.push((*u, len + 1, nw));
                }
            }
        }
        total
    }

    /// `log det G = -log det(I - Q)`, the total unrooted loop mass.
    ///
    /// For integrable weights the branch is fixed by `Σ_i log(1 - λ_i)`
    /// over eigenvalues, which matches the loop-sum series.
    pub fn log_f_total(&self) -> Complex64 {
        let q = self.interior_matrix().to_complex();
        -linalg::eigenvalues(&q).iter().map(|l| (Complex64::one() - l).ln()).sum::<Complex64>()
    }
}

/// Green's function of a vertex subset together with `det(I - Q)`.
#[derive(Clone, Debug)]
pub struct GreenData<S> {
    pub vertices: Vec<Vertex>,
    index: Vec<usize>,
    pub g: Matrix<S>,
    pub det_i_minus_q: S,
    pub classification: Option<Classification>,
}

impl<S: Scalar> GreenData<S> {
    /// `G(x, y)`, zero if either vertex lies outside the set.
    pub fn entry(&self, x: Vertex, y: Vertex) -> S {
        match (self.index.get(x), self.index.get(y)) {
            (Some(&i), Some(&j)) if i != usize::MAX && j != usize::MAX => self.g[(i, j)].clone(),
            _ => S::zero(),
        }
    }

    pub fn contains(&self, x: Vertex) -> bool {
        self.index.get(x).is_some_and(|&i| i != usize::MAX)
    }

    /// `F(A) = det G = 1 / det(I - Q)`.
    pub fn det_g(&self) -> S {
        S::one() / self.det_i_minus_q.clone()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<Value>,
    #[serde(default)]
    boundary: Vec<Value>,
    edges: Vec<EdgeRecord>,
    #[serde(default)]
    symmetry: Symmetry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: Value,
    to: Value,
    re: f64,
    #[serde(default)]
    im: f64,
}

fn id_string(v: &Value, field: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Schema(format!("{field}: vertex id must be a string or number, got {other}"))),
    }
}

impl<S: Scalar> WeightedChain<S> {
    /// Parses the JSON graph format; errors carry the offending line or field.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let interior = file
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| id_string(v, &format!("vertices[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let boundary = file
            .boundary
            .iter()
            .enumerate()
            .map(|(i, v)| id_string(v, &format!("boundary[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let pos: HashMap<&str, usize> =
            interior.iter().chain(&boundary).enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, e) in file.edges.iter().enumerate() {
            let from = id_string(&e.from, &format!("edges[{i}].from"))?;
            let to = id_string(&e.to, &format!("edges[{i}].to"))?;
            let u = *pos.get(from.as_str()).ok_or_else(|| Error::Schema(format!("edges[{i}].from: unknown vertex {from:?}")))?;
            let v = *pos.get(to.as_str()).ok_or_else(|| Error::Schema(format!("edges[{i}].to: unknown vertex {to:?}")))?;
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(Error::Schema(format!("edges[{i}]: weight must be finite")));
            }
            let w = S::from_complex(Complex64::new(e.re, e.im))
                .ok_or_else(|| Error::Schema(format!("edges[{i}].im: complex weight on a real chain")))?;
            edges.push((u, v, w));
        }
        Self::new(interior, boundary, edges, file.symmetry).map_err(|e| match e {
            Error::InvalidInput(m) => Error::Schema(m),
            other => other,
        })
    }

    /// Serializes every stored directed weight (reverse edges included).
    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self.labels[..self.n_interior].iter().map(|s| Value::String(s.clone())).collect(),
            boundary: self.labels[self.n_interior..].iter().map(|s| Value::String(s.clone())).collect(),
            edges: self
                .edges()
                .map(|(u, v, w)| {
                    let z = w.to_complex();
                    EdgeRecord { from: Value::String(self.labels[u].clone()), to: Value::String(self.labels[v].clone()), re: z.re, im: z.im }
                })
                .collect(),
            symmetry: Symmetry::General,
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn two_point() -> WeightedChain<f64> {
        WeightedChain::<f64>::from_labels(&["x", "y"], &[], &[("x", "y", 0.5)], Symmetry::Symmetric).unwrap()
    }

    #[test]
    fn two_point_green_values() {
        let c = two_point();
        assert_eq!(c.classify().class, WeightClass::Integrable);
        let g = c.green().unwrap();
        assert!((g.entry(0, 0) - 4.0 / 3.0).abs() < 1e-14);
        assert!((g.entry(0, 1) - 2.0 / 3.0).abs() < 1e-14);
        assert!((g.det_g() - 4.0 / 3.0).abs() < 1e-14);
        assert!((c.f_ordered(&[0, 1]).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!((c.first_return_mass(&g, 0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn two_point_exact() {
        let c = WeightedChain::from_labels(&["x", "y"], &[], &[("x", "y", ratio(1, 2))], Symmetry::Symmetric).unwrap();
        let g = c.green_on(&[0, 1]).unwrap();
        assert_eq!(g.entry(0, 0), ratio(4, 3));
        assert_eq!(g.det_g(), ratio(4, 3));
        let f: BigRational = c.f_ordered(&[1, 0]).unwrap();
        assert_eq!(f, ratio(4, 3));
    }

    #[test]
    fn classification_examples() {
        let zero = WeightedChain::<f64>::from_labels(&["x"], &[], &[], Symmetry::General).unwrap();
        assert_eq!(zero.classify().class, WeightClass::Integrable);
        let neg = WeightedChain::<f64>::from_labels(&["x"], &[], &[("x", "x", -1.5)], Symmetry::General).unwrap();
        assert_eq!(neg.classify().class, WeightClass::Divergent);
        assert!(matches!(neg.green(), Err(Error::Divergent { .. })));
        let empty = WeightedChain::<f64>::new(vec![], vec![], vec![], Symmetry::General);
        assert!(matches!(empty, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn green_but_not_integrable() {
        // Q = [[0.9, 0.9], [-0.9, -0.9]] is nilpotent while |Q| has radius 1.8.
        let c = WeightedChain::<f64>::from_labels(
            &["a", "b"],
            &[],
            &[("a", "a", 0.9), ("a", "b", 0.9), ("b", "a", -0.9), ("b", "b", -0.9)],
            Symmetry::General,
        )
        .unwrap();
        let k = c.classify();
        assert_eq!(k.class, WeightClass::Green);
        assert!(k.abs_radius > 1.0);
    }

    #[test]
    fn gamblers_ruin_poisson_kernel() {
        let c = WeightedChain::<f64>::from_labels(
            &["1", "2", "3"],
            &["0", "4"],
            &[("1", "0", 0.5), ("1", "2", 0.5), ("2", "1", 0.5), ("2", "3", 0.5), ("3", "2", 0.5), ("3", "4", 0.5)],
            Symmetry::General,
        )
        .unwrap();
        assert!(c.is_markov());
        let g = c.green().unwrap();
        let h = c.poisson_kernel(&g, 0, 3).unwrap();
        assert!((h - 0.75).abs() < 1e-14);
        for x in c.interior() {
            let s: f64 = c.boundary().map(|z| c.poisson_kernel(&g, x, z).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(c.poisson_kernel(&g, 0, 1).is_err());
    }

    #[test]
    fn boundary_kernel_single_vertex() {
        let c = WeightedChain::<f64>::from_labels(&["v"], &["z", "w"], &[("z", "v", 1.0), ("v", "w", 1.0)], Symmetry::General).unwrap();
        let g = c.green_on(&[0]).unwrap();
        assert_eq!(c.boundary_poisson_kernel(&g, 1, 2).unwrap(), 1.0);
        assert_eq!(c.boundary_poisson_kernel(&g, 2, 1).unwrap(), 0.0);
    }

    #[test]
    fn rejects_boundary_boundary_edges_and_asymmetry() {
        assert!(WeightedChain::<f64>::from_labels(&["x"], &["a", "b"], &[("a", "b", 1.0)], Symmetry::General).is_err());
        assert!(WeightedChain::<f64>::from_labels(&["x", "y"], &[], &[("x", "y", 0.5), ("y", "x", 0.4)], Symmetry::Symmetric).is_err());
        let h = WeightedChain::<Complex64>::from_labels(&["x", "y"], &[], &[("x", "y", Complex64::new(0.1, 0.2))], Symmetry::Hermitian).unwrap();
        assert_eq!(h.q(1, 0), Complex64::new(0.1, -0.2));
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let text = r#"{"vertices":["x","y"],"boundary":["d"],"edges":[{"from":"x","to":"y","re":0.5},{"from":"x","to":"d","re":0.5},{"from":"y","to":"d","re":0.5}],"symmetry":"symmetric"}"#;
        let c = WeightedChain::<Complex64>::from_json(text).unwrap();
        assert_eq!(c.q(1, 0), Complex64::new(0.5, 0.0));
        let again = WeightedChain::<Complex64>::from_json(&c.to_json()).unwrap();
        assert_eq!(again.edges().count(), c.edges().count());
        let bad = r#"{"vertices":["x"],"edges":[{"from":"x","to":"q","re":1.0}]}"#;
        match WeightedChain::<f64>::from_json(bad) {
            Err(Error::Schema(m)) => assert!(m.contains("edges[0].to")),
            other => panic!("{other:?}"),
        }
        let typo = "{\"vertices\":[\"x\"],\n\"edgez\":[]}";
        match WeightedChain::<f64>::from_json(typo) {
            Err(Error::Schema(m)) => assert!(m.contains("line 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn enumerated_first_return_on_killed_cycle() {
        // 4-cycle with one vertex wired to the boundary, walk from the opposite vertex.
        let c = WeightedChain::<f64>::from_labels(
            &["1", "2", "3"],
            &["0"],
            &[("1", "0", 0.5), ("1", "2", 0.5), ("2", "1", 0.5), ("2", "3", 0.5), ("3", "2", 0.5), ("3", "0", 0.5)],
            Symmetry::General,
        )
        .unwrap();
        let g = c.green().unwrap();
        for x in c.interior() {
            let f = c.first_return_mass(&g, x).unwrap();
            let e = c.first_return_enumerated(&[0, 1, 2], x, 20, 1e-15);
            assert!((f - e).abs() < 1e-6, "{x}: {f} vs {e}");
        }
    }
}
