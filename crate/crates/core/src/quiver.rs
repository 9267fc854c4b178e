//! Quivers, twists, paths, relations and the truncated twisted path algebra.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const DEFAULT_MAX_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub name: String,
    pub tail: usize,
    pub head: usize,
}

/// A finite quiver. Vertices and arrows are addressed by index; names are
/// kept for I/O and must be unique within each set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quiver {
    vertices: Vec<String>,
    arrows: Vec<Arrow>,
}

impl Quiver {
    /// `arrows` are `(name, tail, head)` with vertex names.
    pub fn new<S: AsRef<str>, T: AsRef<str>>(vertices: &[S], arrows: &[(T, T, T)]) -> Result<Self> {
        let vertices: Vec<String> = vertices.iter().map(|v| v.as_ref().to_string()).collect();
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.as_str()) {
                return Err(Error::InvalidQuiver(format!("duplicate vertex {v}")));
            }
        }
        let find = |name: &str| -> Result<usize> {
            vertices
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::InvalidQuiver(format!("unknown vertex {name}")))
        };
        let mut names = BTreeSet::new();
        let mut out = Vec::with_capacity(arrows.len());
        for (name, tail, head) in arrows {
            let name = name.as_ref().to_string();
            if !names.insert(name.clone()) {
                return Err(Error::InvalidQuiver(format!("duplicate arrow {name}")));
            }
            out.push(Arrow {
                tail: find(tail.as_ref())?,
                head: find(head.as_ref())?,
                name,
            });
        }
        Ok(Self { vertices, arrows: out })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn arrow(&self, a: usize) -> &Arrow {
        &self.arrows[a]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn arrow_index(&self, name: &str) -> Option<usize> {
        self.arrows.iter().position(|a| a.name == name)
    }

    pub fn has_oriented_cycle(&self) -> bool {
        // Kahn's algorithm.
        let n = self.vertex_count();
        let mut indeg = vec![0usize; n];
        for a in &self.arrows {
            indeg[a.head] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut done = 0;
        while let Some(v) = stack.pop() {
            done += 1;
            for a in self.arrows.iter().filter(|a| a.tail == v) {
                indeg[a.head] -= 1;
                if indeg[a.head] == 0 {
                    stack.push(a.head);
                }
            }
        }
        done < n
    }
}

/// Twisting data per arrow: multiplicity `m_a` and the Hermitian form `q_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistSpec {
    pub weights: Vec<CMatrix>,
}

impl TwistSpec {
    pub fn trivial(q: &Quiver) -> Self {
        Self {
            weights: vec![linalg::identity(1); q.arrow_count()],
        }
    }

    pub fn new(q: &Quiver, weights: Vec<CMatrix>) -> Result<Self> {
        if weights.len() != q.arrow_count() {
            return Err(crate::error::shape(
                "twist",
                format!("{} weights for {} arrows", weights.len(), q.arrow_count()),
            ));
        }
        for (a, w) in weights.iter().enumerate() {
            let name = &q.arrow(a).name;
            if w.nrows() == 0 || w.nrows() != w.ncols() {
                return Err(crate::error::shape(name, "twist weight must be square, size >= 1"));
            }
            if linalg::frob_norm(&(w - w.adjoint())) > 1e-12 * linalg::frob_norm(w).max(1.0) {
                return Err(crate::error::shape(name, "twist weight is not Hermitian"));
            }
            let e = linalg::HermEigen::new(w)?;
            if e.values[0] <= 0.0 {
                return Err(crate::error::shape(name, "twist weight is not positive definite"));
            }
        }
        Ok(Self { weights })
    }

    pub fn multiplicity(&self, a: usize) -> usize {
        self.weights[a].nrows()
    }

    pub fn is_trivial_at(&self, a: usize) -> bool {
        self.multiplicity(a) == 1
    }
}

/// A path `a_0 … a_m` stored in target-to-source order, so `arrows[0]` is
/// applied last. The empty path `e_v` has `source == target == v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    arrows: Vec<usize>,
    source: usize,
    target: usize,
}

impl Path {
    pub fn trivial(v: usize) -> Self {
        Self {
            arrows: Vec::new(),
            source: v,
            target: v,
        }
    }

    pub fn arrow(q: &Quiver, a: usize) -> Self {
        let ar = q.arrow(a);
        Self {
            arrows: vec![a],
            source: ar.tail,
            target: ar.head,
        }
    }

    /// Validates `t(a_{j-1}) = h(a_j)`.
    pub fn new(q: &Quiver, arrows: Vec<usize>) -> Result<Self> {
        if arrows.is_empty() {
            return Err(Error::InvalidRelation("empty arrow list needs a vertex".into()));
        }
        for w in arrows.windows(2) {
            if q.arrow(w[0]).tail != q.arrow(w[1]).head {
                return Err(Error::NonComposable);
            }
        }
        Ok(Self {
            source: q.arrow(*arrows.last().unwrap()).tail,
            target: q.arrow(arrows[0]).head,
            arrows,
        })
    }

    pub fn from_names(q: &Quiver, names: &[&str]) -> Result<Self> {
        let ids = names
            .iter()
            .map(|n| {
                q.arrow_index(n)
                    .ok_or_else(|| Error::InvalidQuiver(format!("unknown arrow {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(q, ids)
    }

    pub fn arrows(&self) -> &[usize] {
        &self.arrows
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> usize {
        self.target
    }

    // A path of length 0 is a vertex idempotent, not an empty path.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.arrows.is_empty()
    }
}

/// `p ∘ r`: first `r`, then `p`.
pub fn compose_paths(p: &Path, r: &Path) -> Result<Path> {
    if r.target != p.source {
        return Err(Error::NonComposable);
    }
    let mut arrows = p.arrows.clone();
    arrows.extend_from_slice(&r.arrows);
    Ok(Path {
        arrows,
        source: r.source,
        target: p.target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub terms: Vec<(Complex64, Path)>,
}

impl Relation {
    pub fn new(terms: Vec<(Complex64, Path)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidRelation("no terms".into()));
        };
        let (s, t) = (first.source, first.target);
        if terms.iter().any(|(_, p)| p.source != s || p.target != t) {
            return Err(Error::InvalidRelation("paths do not share source and target".into()));
        }
        Ok(Self { terms })
    }

    pub fn source(&self) -> usize {
        self.terms[0].1.source
    }

    pub fn target(&self) -> usize {
        self.terms[0].1.target
    }
}

/// Finite linear combination of basis paths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathAlgebraElement {
    pub terms: BTreeMap<Path, Complex64>,
}

impl PathAlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(p: Path) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(p, linalg::ONE);
        Self { terms }
    }

    pub fn add_term(&mut self, p: Path, c: Complex64) {
        let vanished = {
            let e = self.terms.entry(p.clone()).or_insert(linalg::ZERO);
            *e += c;
            *e == linalg::ZERO
        };
        if vanished {
            self.terms.remove(&p);
        }
    }

    pub fn coeff(&self, p: &Path) -> Complex64 {
        self.terms.get(p).copied().unwrap_or(linalg::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Path algebra of a quiver truncated at paths of length `max_len`.
#[derive(Debug, Clone)]
pub struct PathAlgebra<'q> {
    pub quiver: &'q Quiver,
    pub max_len: usize,
}

impl<'q> PathAlgebra<'q> {
    pub fn new(quiver: &'q Quiver, max_len: usize) -> Self {
        Self { quiver, max_len }
    }

    /// `1 = Σ_v e_v`.
    pub fn unit(&self) -> PathAlgebraElement {
        let mut x = PathAlgebraElement::zero();
        for v in 0..self.quiver.vertex_count() {
            x.add_term(Path::trivial(v), linalg::ONE);
        }
        x
    }

    /// All paths of length at most `max_len`, ordered by length then arrows.
    pub fn basis(&self) -> Vec<Path> {
        let q = self.quiver;
        let mut out: Vec<Path> = (0..q.vertex_count()).map(Path::trivial).collect();
        let mut frontier: Vec<Path> = (0..q.arrow_count()).map(|a| Path::arrow(q, a)).collect();
        let mut len = 1;
        while !frontier.is_empty() && len <= self.max_len {
            out.extend(frontier.iter().cloned());
            let mut next = Vec::new();
            for p in &frontier {
                // Extend at the source end.
                for a in 0..q.arrow_count() {
                    if q.arrow(a).head == p.source {
                        let mut arrows = p.arrows.clone();
                        arrows.push(a);
                        next.push(Path {
                            arrows,
                            source: q.arrow(a).tail,
                            target: p.target,
                        });
                    }
                }
            }
            frontier = next;
            len += 1;
        }
        out
    }

    /// Bilinear product `x·y`, basis rule `p·r = p∘r` when composable, else 0.
    pub fn product(&self, x: &PathAlgebraElement, y: &PathAlgebraElement) -> Result<PathAlgebraElement> {
        let mut out = PathAlgebraElement::zero();
        for (p, cp) in &x.terms {
            for (r, cr) in &y.terms {
                if r.target != p.source {
                    continue;
                }
                let len = p.len() + r.len();
                if len > self.max_len {
                    return Err(Error::LengthOverflow { len, max: self.max_len });
                }
                out.add_term(compose_paths(p, r)?, cp * cr);
            }
        }
        Ok(out)
    }
}

/// Small named quivers used across tests and examples.
pub mod gallery {
    use super::*;

    /// `a: 1 → 2`.
    pub fn kronecker() -> Quiver {
        Quiver::new(&["1", "2"], &[("a", "1", "2")]).unwrap()
    }

    /// `k` parallel arrows `a0 … a{k-1}: 1 → 2`.
    pub fn generalized_kronecker(k: usize) -> Quiver {
        let names: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();
        let arrows: Vec<(&str, &str, &str)> = names.iter().map(|n| (n.as_str(), "1", "2")).collect();
        Quiver::new(&["1", "2"], &arrows).unwrap()
    }

    /// One vertex with one loop (a Higgs field at a point).
    pub fn jordan_loop() -> Quiver {
        Quiver::new(&["1"], &[("phi", "1", "1")]).unwrap()
    }

    /// Two vertices, `a: 1 → 2` and `b: 2 → 1` (the U(p,q) quiver).
    pub fn upq() -> Quiver {
        Quiver::new(&["1", "2"], &[("a", "1", "2"), ("b", "2", "1")]).unwrap()
    }

    /// Linear chain `0 → 1 → … → n`, arrows `a{i}: i → i+1`.
    pub fn chain(n: usize) -> Quiver {
        let vs: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
        let names: Vec<(String, String, String)> = (0..n)
            .map(|i| (format!("a{i}"), i.to_string(), (i + 1).to_string()))
            .collect();
        let arrows: Vec<(&str, &str, &str)> = names
            .iter()
            .map(|(a, t, h)| (a.as_str(), t.as_str(), h.as_str()))
            .collect();
        Quiver::new(&vs, &arrows).unwrap()
    }

    fn grid(points: &[(i64, i64)]) -> Quiver {
        let vname = |(x, y): (i64, i64)| format!("{x}_{y}");
        let set: BTreeSet<(i64, i64)> = points.iter().copied().collect();
        let vs: Vec<String> = points.iter().map(|&p| vname(p)).collect();
        let mut arrows = Vec::new();
        for &(x, y) in points {
            // a^{(1)}_λ : λ → λ − L1, a^{(2)}_λ : λ → λ − L2.
            if set.contains(&(x - 1, y)) {
                arrows.push((format!("a1_{x}_{y}"), vname((x, y)), vname((x - 1, y))));
            }
            if set.contains(&(x, y - 1)) {
                arrows.push((format!("a2_{x}_{y}"), vname((x, y)), vname((x, y - 1))));
            }
        }
        let refs: Vec<(&str, &str, &str)> = arrows
            .iter()
            .map(|(a, t, h)| (a.as_str(), t.as_str(), h.as_str()))
            .collect();
        Quiver::new(&vs, &refs).unwrap()
    }

    /// Square grid `{0..=n}²` for ℙ¹×ℙ¹.
    pub fn grid_p1p1(n: i64) -> Quiver {
        let pts: Vec<(i64, i64)> = (0..=n).flat_map(|x| (0..=n).map(move |y| (x, y))).collect();
        grid(&pts)
    }

    /// Triangular grid `{0 ≤ y ≤ x ≤ n}` for ℙ².
    pub fn grid_p2(n: i64) -> Quiver {
        let pts: Vec<(i64, i64)> = (0..=n).flat_map(|x| (0..=x).map(move |y| (x, y))).collect();
        grid(&pts)
    }

    /// Commutativity relations `r_λ = a2_{λ−L1} a1_λ − a1_{λ−L2} a2_λ` wherever
    /// both paths exist in a grid quiver.
    pub fn grid_relations(q: &Quiver) -> Vec<Relation> {
        let mut out = Vec::new();
        for v in q.vertices() {
            let Some((x, y)) = v.split_once('_') else { continue };
            let (Ok(x), Ok(y)) = (x.parse::<i64>(), y.parse::<i64>()) else {
                continue;
            };
            let p1 = [format!("a2_{}_{}", x - 1, y), format!("a1_{x}_{y}")];
            let p2 = [format!("a1_{}_{}", x, y - 1), format!("a2_{x}_{y}")];
            let get = |names: &[String; 2]| {
                let r: Vec<&str> = names.iter().map(String::as_str).collect();
                Path::from_names(q, &r).ok()
            };
            if let (Some(p1), Some(p2)) = (get(&p1), get(&p2)) {
                out.push(Relation::new(vec![(linalg::ONE, p1), (linalg::c(-1.0, 0.0), p2)]).unwrap());
            }
        }
        out
    }
}
