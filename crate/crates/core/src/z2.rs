//! Simple random walk on finite subsets of `Z²` with the zipper sign weight,
//! odd-loop masses from log-determinants, the zipper formula for the
//! probability that loop-erased walk uses the edge `{0, 1}`, conformal
//! observables of discs and rectangles, and the chordal crossing exponent of
//! the continuum strip kernel.
//!
//! Points are `(x, y)` pairs with `x + iy` in mind. Interiors are stored row
//! by row (sorted by `y`, then `x`), which gives `I - Q` a band of width equal
//! to the widest row.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::builders::lattice_chain;
use crate::chain::{Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::lerw::MAX_ENUM_INTERIOR;
use crate::linalg::{BandedCholesky, BandedSpd};
use crate::multipath::{enumerate_saws, DomainF};
use crate::paths::{labelled_loop_mass, loop_tail_bound, TruncatedMass};
use crate::stats::linear_fit;

pub type Point = (i64, i64);

/// Weight of every directed nearest-neighbour edge.
pub const SRW_WEIGHT: f64 = 0.25;

/// Largest interior handled by the log-determinant routines.
pub const MAX_DOMAIN_VERTICES: usize = 30_000;

const NEIGHBOURS: [Point; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Continuum shapes with closed-form conformal maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Open disc of the given radius centred at the origin.
    Disc { radius: f64 },
    /// Open rectangle `(x0, x1) × (y0, y1)`.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Shape {
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Shape::Disc { radius } => z.norm() < radius,
            Shape::Rectangle { x0, x1, y0, y1 } => x0 < z.re && z.re < x1 && y0 < z.im && z.im < y1,
        }
    }

    pub fn scaled(&self, s: f64) -> Shape {
        match *self {
            Shape::Disc { radius } => Shape::Disc { radius: radius * s },
            Shape::Rectangle { x0, x1, y0, y1 } => Shape::Rectangle { x0: x0 * s, x1: x1 * s, y0: y0 * s, y1: y1 * s },
        }
    }

    /// Distance from `z` to the boundary, for `z` inside.
    pub fn dist_to_boundary(&self, z: Complex64) -> f64 {
        match *self {
            Shape::Disc { radius } => radius - z.norm(),
            Shape::Rectangle { x0, x1, y0, y1 } => (z.re - x0).min(x1 - z.re).min(z.im - y0).min(y1 - z.im),
        }
    }
}

/// How a lattice domain was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    /// `{z ∈ Z² : |z| < r}`.
    Disc { r: f64 },
    /// `{x + iy : 0 < x < rN, 0 < y < πN}`.
    Rectangle { n: usize, r: f64 },
    /// Component of the origin among points whose unit square lies inside
    /// `n · shape`.
    LatticeApprox { shape: Shape, n: usize },
    /// An explicit point set.
    Custom,
}

/// Finite connected subset of `Z²` with its outer boundary.
#[derive(Clone, Debug)]
pub struct LatticeDomain {
    kind: DomainKind,
    interior: Vec<Point>,
    boundary: Vec<Point>,
    index: HashMap<Point, usize>,
    simply_connected: bool,
    flips: BTreeSet<(Point, Point)>,
}

fn row_major(p: &Point) -> (i64, i64) {
    (p.1, p.0)
}

fn neighbours(p: Point) -> impl Iterator<Item = Point> {
    NEIGHBOURS.iter().map(move |(dx, dy)| (p.0 + dx, p.1 + dy))
}

fn component_of(points: &BTreeSet<Point>, start: Point) -> BTreeSet<Point> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for q in neighbours(p) {
            if points.contains(&q) && seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    seen
}

/// `Z² ∖ A` is connected iff every hole point inside the bounding box reaches
/// the box frame.
fn complement_connected(points: &BTreeSet<Point>) -> bool {
    let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1, y0, y1) = (x0 - 1, x1 + 1, y0 - 1, y1 + 1);
    let start = (x0, y0);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for q in neighbours(p) {
            if q.0 < x0 || q.0 > x1 || q.1 < y0 || q.1 > y1 || points.contains(&q) {
                continue;
            }
            if seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    let box_size = ((x1 - x0 + 1) * (y1 - y0 + 1)) as usize;
    seen.len() + points.len() == box_size
}

fn undirected(u: Point, v: Point) -> (Point, Point) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl LatticeDomain {
    /// Builds a domain of the given kind. `Custom` is built with
    /// [`LatticeDomain::from_points`].
    pub fn build(kind: DomainKind) -> Result<Self> {
        let points: BTreeSet<Point> = match kind {
            DomainKind::Disc { r } => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidInput(format!("disc radius {r} must be positive")));
                }
                let m = r.ceil() as i64;
                (-m..=m).flat_map(|y| (-m..=m).map(move |x| (x, y))).filter(|&(x, y)| ((x * x + y * y) as f64) < r * r).collect()
            }
            DomainKind::Rectangle { n, r } => {
                if n == 0 || !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidInput("rectangle sizes must be positive".into()));
                }
                let (w, h) = (r * n as f64, PI * n as f64);
                let xs = (1..).take_while(|&x| (x as f64) < w);
                let ys: Vec<i64> = (1..).take_while(|&y| (y as f64) < h).collect();
                xs.flat_map(|x| ys.iter().map(move |&y| (x, y))).collect()
            }
            DomainKind::LatticeApprox { shape, n } => {
                if n == 0 {
                    return Err(Error::InvalidInput("scale must be positive".into()));
                }
                let big = shape.scaled(n as f64);
                let inside = |p: Point| {
                    [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]
                        .iter()
                        .all(|(dx, dy)| big.contains(Complex64::new(p.0 as f64 + dx, p.1 as f64 + dy)))
                };
                if !inside((0, 0)) {
                    return Err(Error::InvalidInput("the square at the origin is not inside the scaled shape".into()));
                }
                let reach = match big {
                    Shape::Disc { radius } => radius,
                    Shape::Rectangle { x0, x1, y0, y1 } => x0.abs().max(x1.abs()).max(y0.abs()).max(y1.abs()),
                }
                .ceil() as i64;
                let all: BTreeSet<Point> =
                    (-reach..=reach).flat_map(|y| (-reach..=reach).map(move |x| (x, y))).filter(|&p| inside(p)).collect();
                component_of(&all, (0, 0))
            }
            DomainKind::Custom => return Err(Error::InvalidInput("custom domains are built from points".into())),
        };
        Self::assemble(kind, points)
    }

    /// Domain with an explicit interior.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        Self::assemble(DomainKind::Custom, points.iter().copied().collect())
    }

    fn assemble(kind: DomainKind, points: BTreeSet<Point>) -> Result<Self> {
        let Some(&first) = points.iter().next() else {
            return Err(Error::InvalidInput("domain is empty".into()));
        };
        if points.len() > MAX_DOMAIN_VERTICES {
            return Err(Error::Size(format!("{} points exceed the cap {MAX_DOMAIN_VERTICES}", points.len())));
        }
        if component_of(&points, first).len() != points.len() {
            return Err(Error::InvalidInput("domain is not connected".into()));
        }
        let mut interior: Vec<Point> = points.iter().copied().collect();
        interior.sort_by_key(row_major);
        let boundary: Vec<Point> =
            interior.iter().flat_map(|&p| neighbours(p)).filter(|q| !points.contains(q)).collect::<BTreeSet<_>>().into_iter().collect();
        let index = interior.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut flips = BTreeSet::new();
        let mut j = 1;
        while points.contains(&(0, -j)) && points.contains(&(1, -j)) {
            flips.insert(((0, -j), (1, -j)));
            j += 1;
        }
        Ok(LatticeDomain { kind, simply_connected: complement_connected(&points), interior, boundary, index, flips })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn interior(&self) -> &[Point] {
        &self.interior
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.index.contains_key(&p)
    }

    pub fn is_simply_connected(&self) -> bool {
        self.simply_connected
    }

    pub fn contains_zero_one(&self) -> bool {
        self.contains((0, 0)) && self.contains((1, 0))
    }

    /// Undirected edges `{-ji, 1-ji}`, `0 < j < k`, whose sign the zipper
    /// flips.
    pub fn zipper_flips(&self) -> &BTreeSet<(Point, Point)> {
        &self.flips
    }

    /// `J_e = -1` on flipped edges, `+1` otherwise.
    pub fn zipper_sign(&self, u: Point, v: Point) -> f64 {
        if self.flips.contains(&undirected(u, v)) {
            -1.0
        } else {
            1.0
        }
    }

    fn weight(&self, zipper: bool, u: Point, v: Point) -> f64 {
        if (u.0 - v.0).abs() + (u.1 - v.1).abs() != 1 {
            return 0.0;
        }
        if zipper {
            SRW_WEIGHT * self.zipper_sign(u, v)
        } else {
            SRW_WEIGHT
        }
    }

    /// Chain on the interior and boundary; vertex `i < len()` is
    /// `interior()[i]`. With `zipper` set the weight is `q = J·p`.
    pub fn chain(&self, zipper: bool) -> WeightedChain<f64> {
        lattice_chain(&self.interior, |u, v| self.weight(zipper, u, v))
    }

    /// Number of flipped edges crossed by a closed lattice walk.
    pub fn crossings(&self, walk: &[Point]) -> usize {
        walk.windows(2).filter(|w| self.flips.contains(&undirected(w[0], w[1]))).count()
    }

    /// Row-major positions of the interior minus `exclude`.
    fn reduced(&self, exclude: &[Point]) -> (Vec<Point>, HashMap<Point, usize>) {
        let pts: Vec<Point> = self.interior.iter().copied().filter(|p| !exclude.contains(p)).collect();
        let idx = pts.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        (pts, idx)
    }

    /// Cholesky factor of `I - Q` on the interior minus `exclude`.
    fn factor(&self, zipper: bool, exclude: &[Point]) -> Result<(BandedCholesky<f64>, Vec<Point>, HashMap<Point, usize>)> {
        let (pts, idx) = self.reduced(exclude);
        let mut trip = Vec::with_capacity(3 * pts.len());
        for (i, &p) in pts.iter().enumerate() {
            trip.push((i, i, 1.0));
            for q in neighbours(p) {
                if let Some(&j) = idx.get(&q) {
                    if j < i {
                        trip.push((i, j, -self.weight(zipper, p, q)));
                    }
                }
            }
        }
        let chol = BandedSpd::from_triplets(pts.len(), &trip).cholesky().map_err(|e| Error::Numerical(format!("band factorization failed: {e}")))?;
        Ok((chol, pts, idx))
    }

    /// `log det(I - Q)` on the interior minus `exclude`.
    pub fn log_det(&self, zipper: bool, exclude: &[Point]) -> Result<f64> {
        if exclude.len() >= self.len() && self.interior.iter().all(|p| exclude.contains(p)) {
            return Ok(0.0);
        }
        Ok(self.factor(zipper, exclude)?.0.log_det())
    }

    /// `m_p(𝒪_A) = ½[log det(I - Q_q) - log det(I - Q_p)]`, the SRW mass of
    /// loops crossing the zipper an odd number of times.
    pub fn odd_loop_mass(&self) -> Result<f64> {
        if self.flips.is_empty() {
            return Ok(0.0);
        }
        Ok(0.5 * (self.log_det(true, &[])? - self.log_det(false, &[])?))
    }

    /// Direct sum over rooted loops of length at most `max_len` that cross
    /// the zipper an odd number of times.
    pub fn odd_loop_mass_truncated(&self, max_len: usize) -> TruncatedMass<f64> {
        let chain = self.chain(false);
        let subset: Vec<Vertex> = (0..self.len()).collect();
        let point = |v: Vertex| self.interior[v];
        let value = labelled_loop_mass(
            &chain,
            &subset,
            max_len,
            2,
            |_| 0,
            |lab, u, v| if self.flips.contains(&undirected(point(u), point(v))) { lab ^ 1 } else { lab },
            |_, lab| lab == 1,
        );
        TruncatedMass { value, tail_bound: loop_tail_bound(&chain, &subset, max_len) }
    }

    /// Path mass from `from` (outside the reduced set) to `to` (outside it
    /// too), through the reduced set.
    fn hitting(&self, zipper: bool, chol: &BandedCholesky<f64>, pts: &[Point], idx: &HashMap<Point, usize>, from: Point, to: Point) -> f64 {
        let rhs: Vec<f64> = pts.iter().map(|&u| self.weight(zipper, u, to)).collect();
        let h = chol.solve(&rhs);
        let mut total = self.weight(zipper, from, to);
        for q in neighbours(from) {
            if let Some(&j) = idx.get(&q) {
                total += self.weight(zipper, from, q) * h[j];
            }
        }
        total
    }

    /// `H_A(a, b)` for the simple random walk.
    pub fn boundary_poisson(&self, a: Point, b: Point) -> Result<f64> {
        let (chol, pts, idx) = self.factor(false, &[])?;
        Ok(self.hitting(false, &chol, &pts, &idx, a, b))
    }

    /// `G_A(0, 0; q)` and `G_{A∖0}(1, 1; q)` from log-determinant ratios,
    /// with the SRW value `G_A(0, 0; p)`.
    pub fn green_entries(&self) -> Result<GreenRow> {
        if !self.contains_zero_one() {
            return Err(Error::InvalidInput("domain must contain 0 and 1".into()));
        }
        let (o, e) = ((0, 0), (1, 0));
        let q_full = self.log_det(true, &[])?;
        let q_0 = self.log_det(true, &[o])?;
        let q_01 = self.log_det(true, &[o, e])?;
        let p_full = self.log_det(false, &[])?;
        let p_0 = self.log_det(false, &[o])?;
        Ok(GreenRow { n_vertices: self.len(), g00_q: (q_0 - q_full).exp(), g11_q: (q_01 - q_0).exp(), g00_p: (p_0 - p_full).exp() })
    }

    /// Probability that loop-erased SRW from `a` to `b` in `A` uses the edge
    /// `{0, 1}`, from the zipper formula, with an enumeration oracle on
    /// domains of at most [`MAX_ENUM_INTERIOR`] points.
    pub fn lerw_edge_probability(&self, a: Point, b: Point) -> Result<EdgeProbability> {
        if !self.simply_connected {
            return Err(Error::Refused("boundary ordering is undefined on a domain that is not simply connected".into()));
        }
        let on_boundary = |p: Point| self.boundary.binary_search(&p).is_ok();
        if !on_boundary(a) || !on_boundary(b) || a == b {
            return Err(Error::InvalidInput("a and b must be distinct boundary points".into()));
        }
        let h_ab = self.boundary_poisson(a, b)?;
        if !self.contains_zero_one() {
            let enumerated = (self.len() <= MAX_ENUM_INTERIOR).then_some(0.0);
            return Ok(EdgeProbability { closed: 0.0, enumerated, odd_loop_mass: 0.0, f_q: 0.0, delta: 0.0, h_ab });
        }
        let (o, e) = ((0, 0), (1, 0));
        let m = self.odd_loop_mass()?;
        let f_q = (self.log_det(true, &[o, e])? - self.log_det(true, &[])?).exp();
        let (chol, pts, idx) = self.factor(true, &[o, e])?;
        let h = |x, y| self.hitting(true, &chol, &pts, &idx, x, y);
        let delta = h(a, o) * h(b, e) - h(a, e) * h(b, o);
        let closed = (2.0 * m).exp() * SRW_WEIGHT * f_q * delta.abs() / h_ab;
        let enumerated = if self.len() <= MAX_ENUM_INTERIOR { Some(self.edge_probability_enumerated(a, b, h_ab)?) } else { None };
        Ok(EdgeProbability { closed, enumerated, odd_loop_mass: m, f_q, delta, h_ab })
    }

    fn saws(&self, chain: &WeightedChain<f64>, a: Point, b: Point) -> Result<Vec<Vec<Point>>> {
        let domain: Vec<Vertex> = (0..self.len()).collect();
        let label = |p: Point| chain.index_of(&crate::builders::lattice_label(p)).expect("boundary point has a vertex");
        let saws = enumerate_saws(chain, &domain, label(a), label(b))?;
        let point = |v: Vertex| {
            let s = chain.label(v);
            let (x, y) = s.split_once(',').expect("lattice label");
            (x.parse().expect("lattice label"), y.parse().expect("lattice label"))
        };
        Ok(saws.iter().map(|s| s.vertices().iter().map(|&v| point(v)).collect()).collect())
    }

    fn uses(walk: &[Point], u: Point, v: Point) -> bool {
        walk.windows(2).any(|w| w[0] == u && w[1] == v)
    }

    fn edge_probability_enumerated(&self, a: Point, b: Point, h_ab: f64) -> Result<f64> {
        let chain = self.chain(false);
        let domain: Vec<Vertex> = (0..self.len()).collect();
        let mut f = DomainF::new(&chain, &domain)?;
        let (o, e) = ((0, 0), (1, 0));
        let mut total = 0.0;
        for walk in self.saws(&chain, a, b)? {
            if Self::uses(&walk, o, e) || Self::uses(&walk, e, o) {
                let weight = SRW_WEIGHT.powi(walk.len() as i32 - 1);
                total += weight * f.f_of(walk.iter().filter_map(|p| self.index.get(p).copied()));
            }
        }
        Ok(total / h_ab)
    }

    /// Sign of `q(η)/p(η)` over SAWs `a → b` through the directed edges
    /// `0 → 1` and `1 → 0`: `Some(true)` when it is `+1` on the first and
    /// `-1` on the second, `Some(false)` for the reverse, `None` when the
    /// signs are mixed or no SAW uses the edge.
    pub fn zipper_sign_structure(&self, a: Point, b: Point) -> Result<Option<bool>> {
        let chain = self.chain(false);
        let (o, e) = ((0, 0), (1, 0));
        let (mut fwd, mut bwd) = (BTreeSet::new(), BTreeSet::new());
        for walk in self.saws(&chain, a, b)? {
            let sign = if self.crossings(&walk).is_multiple_of(2) { 1 } else { -1 };
            if Self::uses(&walk, o, e) {
                fwd.insert(sign);
            } else if Self::uses(&walk, e, o) {
                bwd.insert(sign);
            }
        }
        Ok(match (fwd.len(), bwd.len()) {
            (1, 1) if fwd != bwd => Some(fwd.contains(&1)),
            (1, 0) => Some(fwd.contains(&1)),
            (0, 1) => Some(bwd.contains(&-1)),
            _ => None,
        })
    }

    /// Continuum domain used for conformal observables.
    pub fn continuum_shape(&self) -> Result<Shape> {
        match self.kind {
            DomainKind::Disc { r } => Ok(Shape::Disc { radius: r }),
            DomainKind::Rectangle { n, r } => Ok(Shape::Rectangle { x0: 0.0, x1: r * n as f64, y0: 0.0, y1: PI * n as f64 }),
            DomainKind::LatticeApprox { shape, n } => Ok(shape.scaled(n as f64)),
            DomainKind::Custom => Err(Error::Refused("custom domains have no closed-form conformal map".into())),
        }
    }
}

/// Zipper formula and its ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProbability {
    /// `exp{2m} q_e F_e^q(A) |Δ| / H_A(a, b)`.
    pub closed: f64,
    /// `Σ p(η) F_η(A) / H_A(a, b)` over SAWs through `{0, 1}`.
    pub enumerated: Option<f64>,
    pub odd_loop_mass: f64,
    /// `F^q_{{0,1}}(A) = G_A(0,0;q) G_{A∖0}(1,1;q)`.
    pub f_q: f64,
    /// `H^q_{A'}(a,0) H^q_{A'}(b,1) - H^q_{A'}(a,1) H^q_{A'}(b,0)`; positive
    /// exactly when `(a, b)` is positively ordered.
    pub delta: f64,
    pub h_ab: f64,
}

impl EdgeProbability {
    pub fn positively_ordered(&self) -> bool {
        self.delta > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenRow {
    pub n_vertices: usize,
    pub g00_q: f64,
    pub g11_q: f64,
    pub g00_p: f64,
}

/// Green's-function entries on discs of increasing radius.
pub fn green_stabilization(radii: &[f64]) -> Result<Vec<(f64, GreenRow)>> {
    par_map(radii, |r| LatticeDomain::build(DomainKind::Disc { r })?.green_entries()).map(|rows| radii.iter().copied().zip(rows).collect())
}

/// One thread per input; results in input order.
fn par_map<T: Send>(radii: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = radii.iter().map(|&r| s.spawn(move || f(r))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OddLoopSlope {
    /// `(r, |A|, m_p(𝒪_A))` per disc.
    pub rows: Vec<(f64, usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of `m_p(𝒪_{C_r})` against `log r`.
pub fn odd_loop_slope(radii: &[f64]) -> Result<OddLoopSlope> {
    if radii.len() < 2 {
        return Err(Error::InvalidInput("need at least two radii".into()));
    }
    let rows = par_map(radii, |r| {
        let d = LatticeDomain::build(DomainKind::Disc { r })?;
        Ok((r, d.len(), d.odd_loop_mass()?))
    })?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    Ok(OddLoopSlope { rows, slope, intercept })
}

/// Conformal radius and boundary angle of a domain seen from the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalObservables {
    /// `r_A = |f'(0)|⁻¹` for `f` onto the unit disc with `f(0) = 0`.
    pub r_a: f64,
    /// `θ ∈ [0, π)` with `f(b) = e^{2iθ}` when `f(a) = 1`.
    pub theta: f64,
    pub s: f64,
    pub dist_to_boundary: f64,
}

impl ConformalObservables {
    /// `r_A / 4 ≤ dist(0, ∂D) ≤ r_A`.
    pub fn koebe_holds(&self) -> bool {
        let slack = 1e-9 * self.r_a;
        self.r_a / 4.0 <= self.dist_to_boundary + slack && self.dist_to_boundary <= self.r_a + slack
    }
}

/// Jacobi theta functions for a nome `e^{log_q}` with `log_q < 0`.
///
/// Each term is evaluated as a single complex exponential so that large
/// imaginary arguments do not overflow.
struct Theta {
    log_q: f64,
}

const THETA_TERMS: i32 = 40;

impl Theta {
    fn term(&self, power: f64, freq: f64, zeta: Complex64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        ((power * self.log_q + i * freq * zeta).exp(), (power * self.log_q - i * freq * zeta).exp())
    }

    fn theta1(&self, z: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for n in 0..THETA_TERMS {
            let (p, m) = self.term((n as f64 + 0.5).powi(2), 2.0 * n as f64 + 1.0, z);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * (p - m) / Complex64::i();
        }
        s
    }

    fn theta2(&self, z: Complex64) -> Complex64 {
        (0..THETA_TERMS).map(|n| {
            let (p, m) = self.term((n as f64 + 0.5).powi(2), 2.0 * n as f64 + 1.0, z);
            p + m
        }).sum()
    }

    fn theta34(&self, z: Complex64, alternate: bool) -> Complex64 {
        let mut s = Complex64::new(1.0, 0.0);
        for n in 1..THETA_TERMS {
            let (p, m) = self.term((n as f64).powi(2), 2.0 * n as f64, z);
            let sign = if alternate && n % 2 == 1 { -1.0 } else { 1.0 };
            s += sign * (p + m);
        }
        s
    }

    /// `(sn, cn·dn)` at `u`, with `K = (π/2)θ₃(0)²`.
    fn sn_cndn(&self, u: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (t2, t3, t4) = (self.theta2(zero), self.theta34(zero, false), self.theta34(zero, true));
        let zeta = u / (t3 * t3);
        let th4 = self.theta34(zeta, true);
        let sn = t3 / t2 * self.theta1(zeta) / th4;
        let cn = t4 / t2 * self.theta2(zeta) / th4;
        let dn = t4 / t3 * self.theta34(zeta, false) / th4;
        (sn, cn * dn)
    }

    fn big_k(&self) -> f64 {
        let t3 = self.theta34(Complex64::new(0.0, 0.0), false).re;
        PI / 2.0 * t3 * t3
    }
}

fn angle_in(x: f64, period: f64) -> f64 {
    x.rem_euclid(period)
}

/// `r_A` and `S = sin θ` for a disc centred at the origin or a rectangle
/// containing it; `a` and `b` lie on the boundary.
pub fn conformal_observables(shape: Shape, a: Complex64, b: Complex64) -> Result<ConformalObservables> {
    let origin = Complex64::new(0.0, 0.0);
    if !shape.contains(origin) {
        return Err(Error::Refused("the origin is not inside the shape".into()));
    }
    let dist = shape.dist_to_boundary(origin);
    let on_boundary = |z: Complex64| {
        let scale = match shape {
            Shape::Disc { radius } => radius,
            Shape::Rectangle { x0, x1, y0, y1 } => (x1 - x0).max(y1 - y0),
        };
        !shape.contains(z) && shape.dist_to_boundary(z).abs() < 1e-9 * scale
    };
    if !on_boundary(a) || !on_boundary(b) {
        return Err(Error::InvalidInput("a and b must lie on the boundary".into()));
    }
    let (r_a, two_theta) = match shape {
        Shape::Disc { radius } => (radius, angle_in(b.arg() - a.arg(), 2.0 * PI)),
        Shape::Rectangle { x0, x1, y0, y1 } => {
            // Rotate so the rectangle is at least as tall as it is wide; the
            // nome is then at most e^{-2π}.
            let (w, h) = (x1 - x0, y1 - y0);
            let (rot, x0, y0, w, h) = if w > h { (Complex64::new(0.0, -1.0), y0, -x1, h, w) } else { (Complex64::new(1.0, 0.0), x0, y0, w, h) };
            let theta = Theta { log_q: -2.0 * PI * h / w };
            let k = theta.big_k();
            let scale = 2.0 * k / w;
            let to_u = |z: Complex64| {
                let z = z * rot;
                Complex64::new(scale * (z.re - x0 - w / 2.0), scale * (z.im - y0))
            };
            let (w0, cndn0) = theta.sn_cndn(to_u(origin));
            if !(w0.im > 0.0) {
                return Err(Error::Numerical("interior point did not map to the upper half-plane".into()));
            }
            let r_a = 2.0 * w0.im / (scale * cndn0.norm());
            let disc = |z: Complex64| {
                let (wz, _) = theta.sn_cndn(to_u(z));
                if !wz.is_finite() || wz.norm() > 1e12 {
                    Complex64::new(1.0, 0.0)
                } else {
                    (wz - w0) / (wz - w0.conj())
                }
            };
            (r_a, angle_in(disc(b).arg() - disc(a).arg(), 2.0 * PI))
        }
    };
    let theta = two_theta / 2.0;
    Ok(ConformalObservables { r_a, theta, s: theta.sin(), dist_to_boundary: dist })
}

/// `h_{∂D_r}(iy, r + iỹ) = (2/π) Σ_{j ≤ terms} sin(jy) sin(jỹ) j / sinh(jr)`.
pub fn strip_kernel(r: f64, y: f64, y_tilde: f64, terms: usize) -> f64 {
    let mut s = 0.0;
    for j in 1..=terms {
        let jf = j as f64;
        let e = (-jf * r).exp();
        s += (jf * y).sin() * (jf * y_tilde).sin() * jf * 2.0 * e / (1.0 - e * e);
    }
    2.0 / PI * s
}

/// Bound on the omitted terms `j > terms` of [`strip_kernel`].
pub fn strip_kernel_tail(r: f64, terms: usize) -> f64 {
    let x = (-r).exp();
    let t = terms as f64;
    let geometric = x.powf(t + 1.0) * ((t + 1.0) - t * x) / ((1.0 - x) * (1.0 - x));
    2.0 / PI * 2.0 / (1.0 - x * x) * geometric
}

/// `c(y₁, y₂) = 2 sin²y₁ sin²(2y₂) + 2 sin²y₂ sin²(2y₁) - 4 sin y₁ sin y₂ sin 2y₁ sin 2y₂`.
pub fn two_path_constant(y1: f64, y2: f64) -> f64 {
    let (s1, s2, d1, d2) = (y1.sin(), y2.sin(), (2.0 * y1).sin(), (2.0 * y2).sin());
    2.0 * s1 * s1 * d2 * d2 + 2.0 * s2 * s2 * d1 * d1 - 4.0 * s1 * s2 * d1 * d2
}

/// `y_j = jπ/(n + 1)`.
pub fn default_y_points(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 * PI / (n + 1) as f64).collect()
}

/// Two-path ratio `det[h(y_j, y_k)] / (h(y₁, y₁) h(y₂, y₂))` at one `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPathRatio {
    pub r: f64,
    pub ratio: f64,
    /// `ratio · e^r`.
    pub scaled: f64,
    /// `ratio · e^r · sin²y₁ sin²y₂`.
    pub scaled_sin2: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingExponent {
    pub y_points: Vec<f64>,
    /// `(r, log det[h(y_j, y_k)])`.
    pub rows: Vec<(f64, f64)>,
    /// Decay rate: minus the fitted slope of `log det` against `r`.
    pub slope: f64,
    pub expected: f64,
    pub two_path: Option<TwoPathRatio>,
}

/// Minimum number of series terms.
pub const MIN_TERMS: usize = 50;

/// Largest tolerated series tail.
pub const TAIL_TOL: f64 = 1e-14;

/// Fits the decay of `det[h_{∂D_r}(iy_j, r + iy_k)]` in `r`. For `n = 2` the
/// ratio to the diagonal product is also reported at the largest `r`.
pub fn crossing_exponent(n: usize, r_grid: &[f64], y_points: Option<&[f64]>, terms: usize) -> Result<CrossingExponent> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if terms < MIN_TERMS {
        return Err(Error::InvalidInput(format!("terms must be at least {MIN_TERMS}")));
    }
    if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("need at least two positive r values".into()));
    }
    let ys = y_points.map(<[f64]>::to_vec).unwrap_or_else(|| default_y_points(n));
    if ys.len() != n || ys.windows(2).any(|w| w[0] >= w[1]) || ys[0] <= 0.0 || ys[n - 1] >= PI {
        return Err(Error::InvalidInput("y points must satisfy 0 < y_1 < … < y_n < π".into()));
    }
    let r_min = r_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail = strip_kernel_tail(r_min, terms);
    if tail > TAIL_TOL {
        return Err(Error::Tail { tail, tol: TAIL_TOL });
    }
    let kernel = |r: f64| crate::linalg::Matrix::from_fn(n, n, |j, k| strip_kernel(r, ys[j], ys[k], terms));
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let det = kernel(r).det();
        if !(det > 0.0) {
            return Err(Error::Numerical(format!("kernel determinant {det:e} at r = {r} is not positive")));
        }
        rows.push((r, det.ln()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ls: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (slope, _) = linear_fit(&xs, &ls);
    let two_path = (n == 2).then(|| {
        let r = r_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = kernel(r);
        let ratio = m.det() / (m[(0, 0)] * m[(1, 1)]);
        let scaled = ratio * r.exp();
        TwoPathRatio { r, ratio, scaled, scaled_sin2: scaled * (ys[0].sin() * ys[1].sin()).powi(2), c: two_path_constant(ys[0], ys[1]) }
    });
    Ok(CrossingExponent { y_points: ys, rows, slope: -slope, expected: (n * (n + 1)) as f64 / 2.0, two_path })
}

/// `n + 1` equally spaced values from `lo` to `hi`.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centred_block() -> LatticeDomain {
        let pts: Vec<Point> = (-1..=1).flat_map(|y| (-1..=1).map(move |x| (x, y))).collect();
        LatticeDomain::from_points(&pts).unwrap()
    }

    #[test]
    fn disc_matches_brute_scan() {
        let d = LatticeDomain::build(DomainKind::Disc { r: 2.0 }).unwrap();
        assert_eq!(d.len(), 9);
        let mut scan = Vec::new();
        for x in -3i64..=3 {
            for y in -3i64..=3 {
                if ((x * x + y * y) as f64).sqrt() < 2.0 {
                    scan.push((x, y));
                }
            }
        }
        assert!(scan.iter().all(|p| d.contains(*p)));
        assert_eq!(scan.len(), d.len());
        assert!(d.is_simply_connected());
    }

    #[test]
    fn rectangle_interior() {
        let d = LatticeDomain::build(DomainKind::Rectangle { n: 1, r: 3.0 }).unwrap();
        let mut pts = d.interior().to_vec();
        pts.sort();
        assert_eq!(pts, vec![(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]);
    }

    #[test]
    fn lattice_approx_boundary_is_close() {
        let n = 16;
        let d = LatticeDomain::build(DomainKind::LatticeApprox { shape: Shape::Disc { radius: 1.0 }, n }).unwrap();
        for &(x, y) in d.boundary() {
            let z = Complex64::new(x as f64, y as f64) / n as f64;
            assert!((1.0 - z.norm()).abs() <= 2f64.sqrt() / n as f64 + 1e-12, "{x},{y}");
        }
    }

    #[test]
    fn holes_and_disconnection() {
        let ring: Vec<Point> = (-1..=1).flat_map(|y| (-1..=1).map(move |x| (x, y))).filter(|&p| p != (0, 0)).collect();
        assert!(!LatticeDomain::from_points(&ring).unwrap().is_simply_connected());
        assert!(LatticeDomain::from_points(&[(0, 0), (2, 0)]).is_err());
    }

    #[test]
    fn zipper_ladder() {
        let d = centred_block();
        assert_eq!(d.zipper_flips().iter().copied().collect::<Vec<_>>(), vec![((0, -1), (1, -1))]);
        let flat = LatticeDomain::from_points(&[(0, 0), (1, 0)]).unwrap();
        assert!(flat.zipper_flips().is_empty());
        assert_eq!(flat.odd_loop_mass().unwrap(), 0.0);
    }

    #[test]
    fn odd_loop_mass_matches_loop_sum() {
        let d = LatticeDomain::build(DomainKind::Disc { r: 4.0 }).unwrap();
        let m = d.odd_loop_mass().unwrap();
        for len in [16, 60] {
            let t = d.odd_loop_mass_truncated(len);
            assert!((m - t.value).abs() <= t.tail_bound, "len {len}: {m} vs {} ± {}", t.value, t.tail_bound);
        }
    }

    #[test]
    fn zipper_formula_on_block() {
        let d = centred_block();
        let b = d.boundary().to_vec();
        let mut some_positive = false;
        for (i, &a) in b.iter().enumerate() {
            for &c in &b[i + 1..] {
                let p = d.lerw_edge_probability(a, c).unwrap();
                let e = p.enumerated.unwrap();
                assert!((p.closed - e).abs() < 1e-8, "{a:?} {c:?}: {} vs {e}", p.closed);
                assert!((0.0..=1.0).contains(&p.closed));
                if p.delta.abs() > 1e-12 {
                    some_positive = true;
                    let order = d.zipper_sign_structure(a, c).unwrap();
                    assert_eq!(order, Some(p.positively_ordered()), "{a:?} {c:?}");
                }
            }
        }
        assert!(some_positive);
    }

    #[test]
    fn edge_absent_gives_zero() {
        let d = LatticeDomain::from_points(&[(0, 0), (0, 1), (-1, 1)]).unwrap();
        let p = d.lerw_edge_probability((0, -1), (-2, 1)).unwrap();
        assert_eq!(p.closed, 0.0);
        assert_eq!(p.enumerated, Some(0.0));
    }

    #[test]
    fn green_increments_shrink() {
        let rows = green_stabilization(&[2.0, 4.0, 8.0, 16.0]).unwrap();
        let d: Vec<f64> = rows.windows(2).map(|w| (w[1].1.g00_q - w[0].1.g00_q).abs()).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        assert!(rows.windows(2).all(|w| w[1].1.g00_p > w[0].1.g00_p));
    }

    #[test]
    fn conformal_square_and_strip() {
        let a = Complex64::new(0.5, 0.0);
        let sq = conformal_observables(Shape::Rectangle { x0: -0.5, x1: 0.5, y0: -0.5, y1: 0.5 }, a, Complex64::new(-0.5, 0.0)).unwrap();
        // Schwarz-Christoffel: r = (√2/2) / ∫₀¹ (1 - t⁴)^{-1/2} dt for the unit square.
        let sc = std::f64::consts::FRAC_1_SQRT_2 / 1.311_028_777_146_057_1;
        assert!((sq.r_a - sc).abs() < 1e-9, "{}", sq.r_a);
        assert!((sq.theta - PI / 2.0).abs() < 1e-9);
        assert!(sq.koebe_holds());
        let strip = conformal_observables(Shape::Rectangle { x0: -10.0, x1: 10.0, y0: -0.5, y1: 0.5 }, Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5)).unwrap();
        assert!((strip.r_a - 2.0 / PI).abs() < 1e-9, "{}", strip.r_a);
        let disc = conformal_observables(Shape::Disc { radius: 3.0 }, Complex64::new(3.0, 0.0), Complex64::new(0.0, 3.0)).unwrap();
        assert_eq!(disc.r_a, 3.0);
        assert!((disc.theta - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_exponent_slopes() {
        for n in 1..=3 {
            let c = crossing_exponent(n, &grid(3.0, 6.0, 30), None, 200).unwrap();
            assert!((c.slope - c.expected).abs() < 0.01 * c.expected, "n = {n}: {}", c.slope);
        }
        assert!(matches!(crossing_exponent(2, &[0.01, 0.02], None, 50), Err(Error::Tail { .. })));
    }
}
