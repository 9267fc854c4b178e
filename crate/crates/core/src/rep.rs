//! Twisted quiver representations over ℂ and their categorical operations.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{shape, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quiver::{Path, PathAlgebra, Quiver, Relation, TwistSpec};

/// Rank cutoff for subspace bases.
pub const RANK_TOL: f64 = 1e-10;

/// `φ_a: E_ta ⊗ M_a → E_ha` stored as `m_a` slices of shape `n_ha × n_ta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedRep {
    quiver: Quiver,
    twist: TwistSpec,
    dims: Vec<usize>,
    slices: Vec<Vec<CMatrix>>,
}

impl TwistedRep {
    pub fn new(quiver: Quiver, twist: TwistSpec, dims: Vec<usize>, slices: Vec<Vec<CMatrix>>) -> Result<Self> {
        if dims.len() != quiver.vertex_count() {
            return Err(shape(
                "dims",
                format!("{} entries for {} vertices", dims.len(), quiver.vertex_count()),
            ));
        }
        if twist.weights.len() != quiver.arrow_count() || slices.len() != quiver.arrow_count() {
            return Err(shape("arrows", "slice or twist count differs from arrow count"));
        }
        for (a, sl) in slices.iter().enumerate() {
            let ar = quiver.arrow(a);
            if sl.len() != twist.multiplicity(a) {
                return Err(shape(
                    &ar.name,
                    format!("{} slices, multiplicity {}", sl.len(), twist.multiplicity(a)),
                ));
            }
            for m in sl {
                if m.shape() != (dims[ar.head], dims[ar.tail]) {
                    return Err(shape(
                        &ar.name,
                        format!(
                            "slice is {}x{}, expected {}x{}",
                            m.nrows(),
                            m.ncols(),
                            dims[ar.head],
                            dims[ar.tail]
                        ),
                    ));
                }
            }
        }
        Ok(Self {
            quiver,
            twist,
            dims,
            slices,
        })
    }

    /// Untwisted representation with one matrix per arrow.
    pub fn untwisted(quiver: Quiver, dims: Vec<usize>, maps: Vec<CMatrix>) -> Result<Self> {
        let twist = TwistSpec::trivial(&quiver);
        Self::new(quiver, twist, dims, maps.into_iter().map(|m| vec![m]).collect())
    }

    pub fn zero(quiver: Quiver, twist: TwistSpec, dims: Vec<usize>) -> Result<Self> {
        let slices = quiver
            .arrows()
            .iter()
            .enumerate()
            .map(|(a, ar)| vec![CMatrix::zeros(dims[ar.head], dims[ar.tail]); twist.multiplicity(a)])
            .collect();
        Self::new(quiver, twist, dims, slices)
    }

    pub fn quiver(&self) -> &Quiver {
        &self.quiver
    }

    pub fn twist(&self) -> &TwistSpec {
        &self.twist
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, v: usize) -> usize {
        self.dims[v]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn slices(&self, a: usize) -> &[CMatrix] {
        &self.slices[a]
    }

    pub fn all_slices(&self) -> &[Vec<CMatrix>] {
        &self.slices
    }

    pub fn multiplicity(&self, a: usize) -> usize {
        self.twist.multiplicity(a)
    }

    /// Largest slice Frobenius norm, at least 1.
    pub fn slice_scale(&self) -> f64 {
        self.slices.iter().flatten().map(linalg::frob_norm).fold(1.0, f64::max)
    }

    /// `φ(p) = φ_{a_0} ∘ … ∘ φ_{a_m}` as slices over the multi-index
    /// `(k_0, …, k_m)`, lexicographic with `k_0` most significant.
    pub fn evaluate_path(&self, p: &Path) -> Result<Vec<CMatrix>> {
        if p.target() >= self.quiver.vertex_count() || p.source() >= self.quiver.vertex_count() {
            return Err(Error::NonComposable);
        }
        for w in p.arrows().windows(2) {
            if self.quiver.arrow(w[0]).tail != self.quiver.arrow(w[1]).head {
                return Err(Error::NonComposable);
            }
        }
        let mut acc = vec![linalg::identity(self.dims[p.target()])];
        for &a in p.arrows() {
            let mut next = Vec::with_capacity(acc.len() * self.multiplicity(a));
            for left in &acc {
                for s in &self.slices[a] {
                    next.push(left * s);
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    /// Copy of `self` with `φ' = c·φ`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for m in out.slices.iter_mut().flatten() {
            *m *= Complex64::new(c, 0.0);
        }
        out
    }

    /// `φ'_a = g_ha φ_a (g_ta⁻¹ ⊗ id)`.
    pub fn transform(&self, g: &[CMatrix], g_inv: &[CMatrix]) -> Result<Self> {
        let slices = self
            .quiver
            .arrows()
            .iter()
            .enumerate()
            .map(|(a, ar)| {
                self.slices[a]
                    .iter()
                    .map(|s| &g[ar.head] * s * &g_inv[ar.tail])
                    .collect()
            })
            .collect();
        Self::new(self.quiver.clone(), self.twist.clone(), self.dims.clone(), slices)
    }
}

pub fn direct_sum(r: &TwistedRep, s: &TwistedRep) -> Result<TwistedRep> {
    if r.quiver != s.quiver || r.twist != s.twist {
        return Err(Error::QuiverMismatch);
    }
    let dims: Vec<usize> = r.dims.iter().zip(&s.dims).map(|(a, b)| a + b).collect();
    let slices = r
        .slices
        .iter()
        .zip(&s.slices)
        .map(|(x, y)| x.iter().zip(y).map(|(a, b)| linalg::block_diag(a, b)).collect())
        .collect();
    TwistedRep::new(r.quiver.clone(), r.twist.clone(), dims, slices)
}

/// Rectangular identity `n_h × n_t` used for the idle factor of a tensor arrow.
fn rect_identity(rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| if i == j { linalg::ONE } else { linalg::ZERO })
}

/// Tensor product over the merged quiver with arrows `left:…` then `right:…`.
/// Vertex order follows `r`; `E''_v = E_v ⊗ E'_v` with index `i·n' + i'`.
pub fn tensor_product(r: &TwistedRep, s: &TwistedRep) -> Result<TwistedRep> {
    let (q, qp) = (&r.quiver, &s.quiver);
    if q.vertex_count() != qp.vertex_count() {
        return Err(Error::VertexSetMismatch);
    }
    let map: Vec<usize> = q
        .vertices()
        .iter()
        .map(|v| qp.vertex_index(v).ok_or(Error::VertexSetMismatch))
        .collect::<Result<_>>()?;
    let dp: Vec<usize> = map.iter().map(|&w| s.dims[w]).collect();
    let dims: Vec<usize> = r.dims.iter().zip(&dp).map(|(a, b)| a * b).collect();
    let inv = |w: usize| map.iter().position(|&x| x == w).unwrap();

    let vnames = q.vertices();
    let mut arrows = Vec::new();
    let mut weights = Vec::new();
    let mut slices = Vec::new();
    for (a, ar) in q.arrows().iter().enumerate() {
        arrows.push((
            format!("left:{}", ar.name),
            vnames[ar.tail].clone(),
            vnames[ar.head].clone(),
        ));
        weights.push(r.twist.weights[a].clone());
        let id = rect_identity(dp[ar.head], dp[ar.tail]);
        slices.push(r.slices[a].iter().map(|m| linalg::kron(m, &id)).collect::<Vec<_>>());
    }
    for (a, ar) in qp.arrows().iter().enumerate() {
        let (t, h) = (inv(ar.tail), inv(ar.head));
        arrows.push((format!("right:{}", ar.name), vnames[t].clone(), vnames[h].clone()));
        weights.push(s.twist.weights[a].clone());
        let id = rect_identity(r.dims[h], r.dims[t]);
        slices.push(s.slices[a].iter().map(|m| linalg::kron(&id, m)).collect::<Vec<_>>());
    }
    let refs: Vec<(&str, &str, &str)> = arrows
        .iter()
        .map(|(a, t, h)| (a.as_str(), t.as_str(), h.as_str()))
        .collect();
    let merged = Quiver::new(vnames, &refs)?;
    let twist = TwistSpec::new(&merged, weights)?;
    TwistedRep::new(merged, twist, dims, slices)
}

/// Residual `max |Σ_j c_j φ(p_j)|` per relation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RelationResidual {
    pub residual: f64,
    pub satisfied: bool,
}

pub fn check_relations(rep: &TwistedRep, relations: &[Relation], tol: f64) -> Result<Vec<RelationResidual>> {
    relations
        .iter()
        .map(|rel| {
            for (_, p) in &rel.terms {
                for &a in p.arrows() {
                    if rep.multiplicity(a) > 1 {
                        return Err(Error::TwistedRelationUnsupported {
                            arrow: rep.quiver.arrow(a).name.clone(),
                        });
                    }
                }
            }
            let mut sum = CMatrix::zeros(rep.dims[rel.target()], rep.dims[rel.source()]);
            for (c, p) in &rel.terms {
                sum += &rep.evaluate_path(p)?[0] * *c;
            }
            let residual = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(RelationResidual {
                residual,
                satisfied: residual <= tol,
            })
        })
        .collect()
}

/// Orthonormal bases of subspaces `E'_v ⊆ E_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubrepWitness {
    pub bases: Vec<CMatrix>,
}

impl SubrepWitness {
    pub fn full(rep: &TwistedRep) -> Self {
        Self {
            bases: rep.dims.iter().map(|&n| linalg::identity(n)).collect(),
        }
    }

    pub fn zero(rep: &TwistedRep) -> Self {
        Self {
            bases: rep.dims.iter().map(|&n| CMatrix::zeros(n, 0)).collect(),
        }
    }

    /// Orthonormalizes the given spanning sets.
    pub fn from_spanning(spans: Vec<CMatrix>) -> Self {
        Self {
            bases: spans.iter().map(|m| linalg::orthonormalize(m, RANK_TOL)).collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.bases.iter().map(|b| b.ncols()).sum()
    }

    /// Same subspaces up to `tol` in projector norm.
    pub fn same_as(&self, other: &Self, tol: f64) -> bool {
        self.bases.len() == other.bases.len()
            && self.bases.iter().zip(&other.bases).all(|(a, b)| {
                a.ncols() == b.ncols() && linalg::frob_norm(&(linalg::projector(a) - linalg::projector(b))) <= tol
            })
    }

    pub fn sum(&self, other: &Self) -> Self {
        Self {
            bases: self
                .bases
                .iter()
                .zip(&other.bases)
                .map(|(a, b)| {
                    let mut m = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                    m.view_mut((0, 0), a.shape()).copy_from(a);
                    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
                    linalg::orthonormalize(&m, RANK_TOL)
                })
                .collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self {
            bases: self
                .bases
                .iter()
                .zip(&other.bases)
                .map(|(a, b)| linalg::intersect(a, b, 1e-8))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubrepCheck {
    pub invariant: bool,
    pub leakage: f64,
}

fn check_ambient(rep: &TwistedRep, w: &SubrepWitness) -> Result<()> {
    if w.bases.len() != rep.dims.len() {
        return Err(shape("witness", "vertex count differs"));
    }
    for (v, b) in w.bases.iter().enumerate() {
        if b.nrows() != rep.dims[v] || b.ncols() > rep.dims[v] {
            return Err(Error::DimensionOverflow {
                vertex: rep.quiver.vertices()[v].clone(),
            });
        }
    }
    Ok(())
}

pub fn check_subrep(rep: &TwistedRep, w: &SubrepWitness, tol: f64) -> Result<SubrepCheck> {
    check_ambient(rep, w)?;
    let mut leakage: f64 = 0.0;
    for (a, ar) in rep.quiver.arrows().iter().enumerate() {
        let bh = &w.bases[ar.head];
        let bt = &w.bases[ar.tail];
        for s in &rep.slices[a] {
            let img = s * bt;
            let resid = &img - bh * (bh.adjoint() * &img);
            for j in 0..resid.ncols() {
                leakage = leakage.max(resid.column(j).norm());
            }
        }
    }
    Ok(SubrepCheck {
        invariant: leakage <= tol,
        leakage,
    })
}

/// Smallest subrepresentation containing the generators. Image components
/// below `tol` times the slice scale are treated as already contained.
pub fn closure(rep: &TwistedRep, generators: &[CMatrix], tol: f64) -> SubrepWitness {
    let thresh = tol * rep.slice_scale();
    let mut bases: Vec<CMatrix> = generators.iter().map(|g| linalg::orthonormalize(g, RANK_TOL)).collect();
    loop {
        let mut grew = false;
        for (a, ar) in rep.quiver.arrows().iter().enumerate() {
            for s in &rep.slices[a] {
                let img = s * &bases[ar.tail];
                let bh = bases[ar.head].clone();
                let resid = &img - &bh * (bh.adjoint() * &img);
                let mut add = Vec::new();
                for j in 0..resid.ncols() {
                    if resid.column(j).norm() > thresh {
                        add.push(resid.column(j).into_owned());
                    }
                }
                if add.is_empty() {
                    continue;
                }
                let mut m = CMatrix::zeros(bh.nrows(), bh.ncols() + add.len());
                m.view_mut((0, 0), bh.shape()).copy_from(&bh);
                for (k, col) in add.iter().enumerate() {
                    m.set_column(bh.ncols() + k, &(col / Complex64::new(col.norm(), 0.0)));
                }
                let nb = linalg::orthonormalize(&m, RANK_TOL.max(tol));
                if nb.ncols() > bh.ncols() {
                    grew = true;
                }
                bases[ar.head] = nb;
            }
        }
        if !grew {
            return SubrepWitness { bases };
        }
    }
}

/// Subrepresentation in the coordinates of the witness bases.
pub fn restrict(rep: &TwistedRep, w: &SubrepWitness) -> Result<TwistedRep> {
    check_ambient(rep, w)?;
    let slices = rep
        .quiver
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            rep.slices[a]
                .iter()
                .map(|s| w.bases[ar.head].adjoint() * s * &w.bases[ar.tail])
                .collect()
        })
        .collect();
    TwistedRep::new(rep.quiver.clone(), rep.twist.clone(), w.dims(), slices)
}

/// Action of the basis paths on `E = ⊕_v E_v`, with `ρ(p) = ι_target φ(p) π_source`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleActionTable {
    pub quiver: Quiver,
    pub total_dim: usize,
    pub max_len: usize,
    pub actions: BTreeMap<Path, CMatrix>,
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = vec![0; dims.len()];
    for v in 1..dims.len() {
        off[v] = off[v - 1] + dims[v - 1];
    }
    off
}

pub fn to_module(rep: &TwistedRep, max_len: usize) -> Result<ModuleActionTable> {
    if (0..rep.quiver.arrow_count()).any(|a| rep.multiplicity(a) > 1) {
        return Err(Error::TwistedModuleUnsupported);
    }
    let n = rep.total_dim();
    let mut actions = BTreeMap::new();
    if n > 0 {
        let off = offsets(&rep.dims);
        for p in PathAlgebra::new(&rep.quiver, max_len).basis() {
            let phi = &rep.evaluate_path(&p)?[0];
            let mut m = CMatrix::zeros(n, n);
            m.view_mut((off[p.target()], off[p.source()]), phi.shape())
                .copy_from(phi);
            actions.insert(p, m);
        }
    }
    Ok(ModuleActionTable {
        quiver: rep.quiver.clone(),
        total_dim: n,
        max_len,
        actions,
    })
}

pub fn from_module(table: &ModuleActionTable) -> Result<TwistedRep> {
    let q = &table.quiver;
    let nv = q.vertex_count();
    if table.total_dim == 0 {
        return TwistedRep::zero(q.clone(), TwistSpec::trivial(q), vec![0; nv]);
    }
    let get = |p: &Path| {
        table
            .actions
            .get(p)
            .ok_or_else(|| Error::InvalidModule("missing basis path".into()))
    };
    let n = table.total_dim;
    let mut dims = Vec::with_capacity(nv);
    let mut sum = CMatrix::zeros(n, n);
    for v in 0..nv {
        let e = get(&Path::trivial(v))?;
        sum += e;
        let d = (0..n).filter(|&i| e[(i, i)] == linalg::ONE).count();
        dims.push(d);
    }
    if sum != linalg::identity(n) {
        return Err(Error::InvalidModule("idempotents do not sum to the identity".into()));
    }
    let off = offsets(&dims);
    for v in 0..nv {
        let e = get(&Path::trivial(v))?;
        let expect = CMatrix::from_fn(n, n, |i, j| {
            if i == j && i >= off[v] && i < off[v] + dims[v] {
                linalg::ONE
            } else {
                linalg::ZERO
            }
        });
        if *e != expect {
            return Err(Error::InvalidModule("idempotent is not a coordinate projection".into()));
        }
    }
    let maps = q
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            let m = get(&Path::arrow(q, a))?;
            Ok(m.view((off[ar.head], off[ar.tail]), (dims[ar.head], dims[ar.tail]))
                .into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    TwistedRep::untwisted(q.clone(), dims, maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real_matrix};
    use crate::quiver::gallery;

    fn kron_rep(phi: f64) -> TwistedRep {
        TwistedRep::untwisted(gallery::kronecker(), vec![1, 1], vec![real_matrix(1, 1, &[phi])]).unwrap()
    }

    #[test]
    fn build_validates_shapes() {
        let q = Quiver::new::<_, &str>(&["v"], &[]).unwrap();
        assert!(TwistedRep::untwisted(q, vec![3], vec![]).is_ok());
        let bad = TwistedRep::untwisted(gallery::kronecker(), vec![1, 2], vec![real_matrix(1, 1, &[1.0])]);
        match bad {
            Err(Error::ShapeMismatch { what, .. }) => assert_eq!(what, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn upq_instance() {
        let r = TwistedRep::untwisted(
            gallery::upq(),
            vec![1, 1],
            vec![real_matrix(1, 1, &[1.0]), real_matrix(1, 1, &[0.5])],
        );
        assert!(r.is_ok());
    }

    #[test]
    fn scalar_chain_composition() {
        let q = gallery::chain(2);
        let r = TwistedRep::untwisted(
            q.clone(),
            vec![1, 1, 1],
            vec![real_matrix(1, 1, &[2.0]), real_matrix(1, 1, &[3.0])],
        )
        .unwrap();
        let p = Path::new(&q, vec![1, 0]).unwrap();
        assert_eq!(r.evaluate_path(&p).unwrap()[0][(0, 0)], c(6.0, 0.0));
        assert_eq!(r.evaluate_path(&Path::trivial(1)).unwrap()[0], linalg::identity(1));
    }

    #[test]
    fn kronecker_subreps() {
        let r = kron_rep(1.0);
        let w = SubrepWitness {
            bases: vec![CMatrix::zeros(1, 0), linalg::identity(1)],
        };
        assert!(check_subrep(&r, &w, 1e-12).unwrap().invariant);
        let w = SubrepWitness {
            bases: vec![linalg::identity(1), CMatrix::zeros(1, 0)],
        };
        assert!(!check_subrep(&r, &w, 1e-12).unwrap().invariant);
    }

    #[test]
    fn jordan_kernel_line() {
        let r = TwistedRep::untwisted(
            gallery::jordan_loop(),
            vec![2],
            vec![real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0])],
        )
        .unwrap();
        let w = SubrepWitness {
            bases: vec![real_matrix(2, 1, &[1.0, 0.0])],
        };
        assert!(check_subrep(&r, &w, 0.0).unwrap().invariant);
        let gen = closure(&r, &[real_matrix(2, 1, &[0.0, 1.0])], 1e-10);
        assert_eq!(gen.dims(), vec![2]);
    }

    #[test]
    fn overflow_detected() {
        let r = kron_rep(1.0);
        let w = SubrepWitness {
            bases: vec![CMatrix::zeros(1, 2), CMatrix::zeros(1, 0)],
        };
        assert!(matches!(
            check_subrep(&r, &w, 1e-6),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn kronecker_tensor_by_hand() {
        let t = tensor_product(&kron_rep(2.0), &kron_rep(3.0)).unwrap();
        assert_eq!(t.dims(), &[1, 1]);
        assert_eq!(t.quiver().arrow(0).name, "left:a");
        assert_eq!(t.slices(0)[0][(0, 0)], c(2.0, 0.0));
        assert_eq!(t.slices(1)[0][(0, 0)], c(3.0, 0.0));
    }

    #[test]
    fn kronecker_module_table() {
        let r = kron_rep(5.0);
        let t = to_module(&r, 8).unwrap();
        let q = r.quiver();
        assert_eq!(t.actions[&Path::trivial(0)], real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(t.actions[&Path::trivial(1)], real_matrix(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(t.actions[&Path::arrow(q, 0)], real_matrix(2, 2, &[0.0, 0.0, 5.0, 0.0]));
        assert_eq!(from_module(&t).unwrap(), r);
    }

    #[test]
    fn zero_rep_empty_table() {
        let q = gallery::kronecker();
        let r = TwistedRep::zero(q.clone(), TwistSpec::trivial(&q), vec![0, 0]).unwrap();
        let t = to_module(&r, 8).unwrap();
        assert!(t.actions.is_empty());
        assert_eq!(from_module(&t).unwrap(), r);
    }
}
