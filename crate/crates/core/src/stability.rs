//! (σ,τ)-degree and slope, parameter normalization, stability verdicts and
//! destabilizing filtrations.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermEigen};
use crate::moment::{self, FlowReport, FlowStatus, MetricState};
use crate::quiver::PathAlgebra;
use crate::rep::{self, SubrepWitness, TwistedRep};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityParams {
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
}

impl StabilityParams {
    pub fn new(sigma: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let p = Self { sigma, tau };
        p.validate(p.sigma.len())?;
        Ok(p)
    }

    pub fn validate(&self, vertex_count: usize) -> Result<()> {
        if self.sigma.len() != vertex_count || self.tau.len() != vertex_count {
            return Err(Error::InvalidParameters(format!(
                "expected {vertex_count} values for sigma and tau"
            )));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameters("sigma must be positive".into()));
        }
        if self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameters("tau must be finite".into()));
        }
        Ok(())
    }

    /// The Hermite–Einstein specialization `σ_λ = n_λ`.
    pub fn hermite_einstein(multiplicities: &[f64], tau: Vec<f64>) -> Result<Self> {
        Self::new(multiplicities.to_vec(), tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeData {
    pub degree: Vec<f64>,
    pub rank: Vec<usize>,
}

impl DegreeData {
    /// Point scale: all degrees vanish.
    pub fn point(dims: &[usize]) -> Self {
        Self {
            degree: vec![0.0; dims.len()],
            rank: dims.to_vec(),
        }
    }
}

/// `(deg_{σ,τ}, μ_{σ,τ})` with `deg = Σ σ_v deg E_v − τ_v rk E_v`.
pub fn degree_and_slope(data: &DegreeData, params: &StabilityParams) -> Result<(f64, f64)> {
    params.validate(data.rank.len())?;
    let mut deg = 0.0;
    let mut weight = 0.0;
    for v in 0..data.rank.len() {
        deg += params.sigma[v] * data.degree[v] - params.tau[v] * data.rank[v] as f64;
        weight += params.sigma[v] * data.rank[v] as f64;
    }
    if data.rank.iter().all(|&r| r == 0) {
        return Err(Error::ZeroTotalRank);
    }
    Ok((deg, deg / weight))
}

pub fn admissible(data: &DegreeData, params: &StabilityParams) -> bool {
    let scale: f64 = (0..data.rank.len())
        .map(|v| (params.sigma[v] * data.degree[v]).abs() + (params.tau[v] * data.rank[v] as f64).abs())
        .sum::<f64>()
        .max(1.0);
    match degree_and_slope(data, params) {
        Ok((deg, _)) => deg.abs() <= 1e-12 * scale,
        Err(_) => true,
    }
}

/// `σ' = cσ`, `τ' = c(τ + dσ)`; also returns the factor `c^{1/2}` for `φ`.
pub fn reparameterize(params: &StabilityParams, c: f64, d: f64) -> Result<(StabilityParams, f64)> {
    if !(c > 0.0) {
        return Err(Error::NonpositiveScale(c));
    }
    let sigma = params.sigma.iter().map(|s| c * s).collect();
    let tau = params
        .tau
        .iter()
        .zip(&params.sigma)
        .map(|(t, s)| c * (t + d * s))
        .collect();
    Ok((StabilityParams { sigma, tau }, c.sqrt()))
}

fn witness_slope(w: &SubrepWitness, params: &StabilityParams) -> Result<f64> {
    degree_and_slope(&DegreeData::point(&w.dims()), params).map(|(_, mu)| mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictTag {
    Stable,
    StrictlySemistable,
    Unstable,
    Polystable,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateSource {
    OracleEnumeration,
    Flow,
    Curated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub tag: VerdictTag,
    pub witness: Option<(SubrepWitness, f64)>,
    pub source: CertificateSource,
    pub rep_slope: f64,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub seed: u64,
    pub random_vectors: usize,
    pub slope_tol: f64,
    /// Largest vertex dimension on which the enumeration is trusted.
    pub envelope: usize,
    pub max_candidates: usize,
    pub closure_tol: f64,
    /// Longest cycle word whose eigenvectors seed candidates.
    pub word_len: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            random_vectors: 200,
            slope_tol: 1e-9,
            envelope: 4,
            max_candidates: 4000,
            closure_tol: 1e-10,
            word_len: 3,
        }
    }
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    linalg::hermitian_part(&g)
}

fn unit_at(rep: &TwistedRep, v: usize, x: CMatrix) -> Vec<CMatrix> {
    rep.dims()
        .iter()
        .enumerate()
        .map(|(w, &n)| if w == v { x.clone() } else { CMatrix::zeros(n, 0) })
        .collect()
}

/// Witnesses deduplicated up to projector distance `1e-7`. Lookups compare
/// only against neighbours sharing the dimension vector and a quantized
/// probe trace.
struct CandidateSet {
    probes: Vec<CMatrix>,
    items: Vec<SubrepWitness>,
    projectors: Vec<Vec<CMatrix>>,
    buckets: HashMap<(Vec<usize>, i64), Vec<usize>>,
}

impl CandidateSet {
    fn new(rep: &TwistedRep, rng: &mut ChaCha8Rng) -> Self {
        let probes = rep.dims().iter().map(|&n| random_hermitian(n, rng)).collect();
        Self {
            probes,
            items: Vec::new(),
            projectors: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn key(&self, proj: &[CMatrix]) -> f64 {
        proj.iter().zip(&self.probes).map(|(p, g)| (p * g).trace().re).sum()
    }

    fn contains(&self, w: &SubrepWitness) -> bool {
        let proj: Vec<CMatrix> = w.bases.iter().map(linalg::projector).collect();
        self.find(&w.dims(), &proj)
    }

    fn find(&self, dims: &[usize], proj: &[CMatrix]) -> bool {
        let k = (self.key(proj) * 1e4).round() as i64;
        (k - 1..=k + 1).any(|b| {
            self.buckets.get(&(dims.to_vec(), b)).is_some_and(|ids| {
                ids.iter().any(|&i| {
                    self.projectors[i]
                        .iter()
                        .zip(proj)
                        .all(|(a, b)| linalg::frob_norm(&(a - b)) <= 1e-7)
                })
            })
        })
    }

    fn insert(&mut self, w: SubrepWitness) -> bool {
        let dims = w.dims();
        let proj: Vec<CMatrix> = w.bases.iter().map(linalg::projector).collect();
        if self.find(&dims, &proj) {
            return false;
        }
        let k = (self.key(&proj) * 1e4).round() as i64;
        self.buckets.entry((dims, k)).or_default().push(self.items.len());
        self.items.push(w);
        self.projectors.push(proj);
        true
    }
}

fn structured_generators(rep: &TwistedRep, opts: &OracleOptions, rng: &mut ChaCha8Rng) -> Vec<Vec<CMatrix>> {
    let q = rep.quiver();
    let mut gens = Vec::new();
    for (v, &n) in rep.dims().iter().enumerate() {
        if n == 0 {
            continue;
        }
        for i in 0..n {
            let mut e = CMatrix::zeros(n, 1);
            e[(i, 0)] = linalg::ONE;
            gens.push(unit_at(rep, v, e));
        }
        gens.push(unit_at(rep, v, linalg::identity(n)));
        for (a, ar) in q.arrows().iter().enumerate() {
            if ar.tail != v {
                continue;
            }
            for s in rep.slices(a) {
                let k = linalg::null_space(s, 1e-10);
                if k.ncols() > 0 && k.ncols() < n {
                    gens.push(unit_at(rep, v, k.clone()));
                    for j in 0..k.ncols() {
                        gens.push(unit_at(rep, v, k.columns(j, 1).into_owned()));
                    }
                }
            }
        }
        // Joint kernels of the arrows from v into each vertex set Z: a
        // subrepresentation vanishing on Z sits inside them at v.
        let nv = rep.dims().len();
        if nv <= 8 {
            for mask in 1u32..(1 << nv) {
                let blocks: Vec<&CMatrix> = q
                    .arrows()
                    .iter()
                    .enumerate()
                    .filter(|(_, ar)| ar.tail == v && mask & (1 << ar.head) != 0)
                    .flat_map(|(a, _)| rep.slices(a).iter())
                    .collect();
                if blocks.len() < 2 {
                    continue;
                }
                let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
                let mut stacked = CMatrix::zeros(rows, n);
                let mut r = 0;
                for b in blocks {
                    stacked.view_mut((r, 0), b.shape()).copy_from(b);
                    r += b.nrows();
                }
                let k = linalg::null_space(&stacked, 1e-10);
                if k.ncols() > 0 && k.ncols() < n {
                    gens.push(unit_at(rep, v, k.clone()));
                    for j in 0..k.ncols() {
                        gens.push(unit_at(rep, v, k.columns(j, 1).into_owned()));
                    }
                }
            }
        }
        // Eigenvectors of cycle words at v.
        let alg = PathAlgebra::new(q, opts.word_len);
        for p in alg.basis() {
            if p.is_trivial() || p.source() != v || p.target() != v {
                continue;
            }
            for w in rep.evaluate_path(&p).unwrap_or_default() {
                for lam in linalg::eigenvalues(&w) {
                    let shifted = &w - CMatrix::identity(n, n) * lam;
                    let k = linalg::null_space(&shifted, 1e-8);
                    for j in 0..k.ncols() {
                        gens.push(unit_at(rep, v, k.columns(j, 1).into_owned()));
                    }
                }
            }
        }
        // Random Hermitian words in the slices touching v.
        for _ in 0..3 {
            let mut h = CMatrix::zeros(n, n);
            for (a, ar) in q.arrows().iter().enumerate() {
                for s in rep.slices(a) {
                    let r: f64 = StandardNormal.sample(rng);
                    if ar.tail == v {
                        h += s.adjoint() * s * Complex64::new(r, 0.0);
                    }
                    if ar.head == v {
                        h += s * s.adjoint() * Complex64::new(r, 0.0);
                    }
                }
            }
            if let Ok(e) = HermEigen::new(&h) {
                for j in 0..n {
                    gens.push(unit_at(rep, v, e.vectors.columns(j, 1).into_owned()));
                }
            }
        }
    }
    gens
}

fn random_generators(rep: &TwistedRep, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<CMatrix>> {
    let live: Vec<usize> = (0..rep.dims().len()).filter(|&v| rep.dim(v) > 0).collect();
    (0..count)
        .map(|i| {
            let v = live[i % live.len()];
            let n = rep.dim(v);
            let x = CMatrix::from_fn(n, 1, |_, _| {
                Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            });
            let x = &x / Complex64::new(x.norm(), 0.0);
            unit_at(rep, v, x)
        })
        .collect()
}

/// Candidate subrepresentations for the oracle.
pub fn enumerate_candidates(rep: &TwistedRep, opts: &OracleOptions) -> Vec<SubrepWitness> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut set = CandidateSet::new(rep, &mut rng);
    for g in structured_generators(rep, opts, &mut rng) {
        set.insert(rep::closure(rep, &g, opts.closure_tol));
    }
    let base_len = set.len();
    // Pairwise sums and intersections, two rounds.
    let mut level = 0..base_len;
    for _ in 0..2 {
        let start = set.len();
        'outer: for i in level.clone() {
            for j in 0..start {
                if set.len() >= opts.max_candidates {
                    break 'outer;
                }
                let (a, b) = (&set.items[i], &set.items[j]);
                let meet = rep::closure(rep, &a.intersection(b).bases, opts.closure_tol);
                let join = a.sum(b);
                for w in [join, meet] {
                    set.insert(w);
                }
            }
        }
        level = start..set.len();
    }
    let randoms = random_generators(rep, opts.random_vectors, &mut rng);
    for g in randoms {
        if set.len() >= opts.max_candidates {
            break;
        }
        let w = rep::closure(rep, &g, opts.closure_tol);
        if set.contains(&w) {
            continue;
        }
        set.insert(w.clone());
        for b in 0..base_len {
            if set.len() >= opts.max_candidates {
                break;
            }
            let joined = w.sum(&set.items[b]);
            set.insert(joined);
        }
    }
    set.items
}

/// Decides stability by slope comparison over enumerated candidate subreps.
pub fn stability_oracle(rep: &TwistedRep, params: &StabilityParams, opts: &OracleOptions) -> Result<Verdict> {
    let (_, mu) = degree_and_slope(&DegreeData::point(rep.dims()), params)?;
    let n = rep.total_dim();
    let full_dims = rep.dims().to_vec();
    let candidates: Vec<SubrepWitness> = enumerate_candidates(rep, opts)
        .into_iter()
        .filter(|w| {
            let d = w.total_dim();
            d > 0
                && d < n
                && w.dims() != full_dims
                && rep::check_subrep(rep, w, 1e-8 * rep.slice_scale()).is_ok_and(|c| c.invariant)
        })
        .collect();
    let count = candidates.len();
    let mut best: Option<(usize, f64)> = None;
    let mut equal = Vec::new();
    for (i, w) in candidates.iter().enumerate() {
        let s = witness_slope(w, params)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
        if (s - mu).abs() <= opts.slope_tol {
            equal.push(i);
        }
    }
    let big = rep.dims().iter().any(|&d| d > opts.envelope);
    let verdict = |tag, witness| Verdict {
        tag,
        witness,
        source: CertificateSource::OracleEnumeration,
        rep_slope: mu,
        candidates: count,
    };
    if let Some((i, s)) = best {
        if s > mu + opts.slope_tol {
            return Ok(verdict(VerdictTag::Unstable, Some((candidates[i].clone(), s))));
        }
    }
    if equal.is_empty() {
        let tag = if big { VerdictTag::Undecided } else { VerdictTag::Stable };
        return Ok(verdict(tag, None));
    }
    let first = (candidates[equal[0]].clone(), mu);
    if big {
        return Ok(verdict(VerdictTag::Undecided, Some(first)));
    }
    // Polystable iff some equal-slope candidate has an equal-slope complement
    // and both pieces are themselves stable or polystable.
    for &i in &equal {
        for &j in &equal {
            let (w, c) = (&candidates[i], &candidates[j]);
            let dims_add = w
                .dims()
                .iter()
                .zip(c.dims())
                .zip(&full_dims)
                .all(|((a, b), n)| a + b == *n);
            if !dims_add || w.intersection(c).total_dim() != 0 {
                continue;
            }
            let sub_ok = |x: &SubrepWitness| -> Result<bool> {
                let r = rep::restrict(rep, x)?;
                let v = stability_oracle(&r, params, opts)?;
                Ok(matches!(v.tag, VerdictTag::Stable | VerdictTag::Polystable))
            };
            if sub_ok(w)? && sub_ok(c)? {
                return Ok(verdict(VerdictTag::Polystable, Some((w.clone(), mu))));
            }
        }
    }
    Ok(verdict(VerdictTag::StrictlySemistable, Some(first)))
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Relative spectral gap that separates eigenvalue clusters.
    pub gap: f64,
    /// Image components below this (times the slice scale) count as leakage.
    pub leak_tol: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            gap: 0.05,
            leak_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationStep {
    pub witness: SubrepWitness,
    pub slope: f64,
    pub boundary: f64,
    pub leakage: f64,
}

/// Ascending filtration from the eigenspaces of the limit direction `u_∞`,
/// lowest eigenvalues first.
pub fn destabilizer_extract(
    rep: &TwistedRep,
    report: &FlowReport,
    params: &StabilityParams,
    opts: &ExtractOptions,
) -> Result<Vec<FiltrationStep>> {
    let u = match (&report.status, &report.limit_direction) {
        (FlowStatus::Diverged, Some(u)) => u,
        _ => return Err(Error::NotDivergent),
    };
    let eig: Vec<HermEigen> = u.iter().map(HermEigen::new).collect::<Result<_>>()?;
    let mut spectrum: Vec<f64> = eig.iter().flat_map(|e| e.values.iter().copied()).collect();
    spectrum.sort_by(f64::total_cmp);
    let spread = spectrum.last().copied().unwrap_or(0.0) - spectrum.first().copied().unwrap_or(0.0);
    let boundaries: Vec<f64> = spectrum
        .windows(2)
        .filter(|w| spread > 0.0 && w[1] - w[0] > opts.gap * spread)
        .map(|w| w[0])
        .collect();
    if boundaries.is_empty() {
        return Err(Error::NoSeparation { spectrum });
    }
    boundaries
        .into_iter()
        .map(|b| {
            let spans: Vec<CMatrix> = eig
                .iter()
                .map(|e| {
                    let keep: Vec<usize> = (0..e.values.len()).filter(|&j| e.values[j] <= b).collect();
                    CMatrix::from_fn(e.vectors.nrows(), keep.len(), |i, j| e.vectors[(i, keep[j])])
                })
                .collect();
            let witness = rep::closure(rep, &spans, opts.leak_tol);
            let leakage = rep::check_subrep(rep, &witness, f64::INFINITY)?.leakage;
            let slope = witness_slope(&witness, params)?;
            Ok(FiltrationStep {
                witness,
                slope,
                boundary: b,
                leakage,
            })
        })
        .collect()
}

/// `|deg_{σ,τ}(R') + Σ_a ‖π'∘φ_a∘π''‖²_H|` for a solving metric `H`, where
/// `π'` is the `H`-orthogonal projection onto `E'` and `π'' = id − π'`.
pub fn subrep_degree_identity(
    rep: &TwistedRep,
    metric: &MetricState,
    w: &SubrepWitness,
    params: &StabilityParams,
) -> Result<f64> {
    let h = metric.metric()?;
    let residual = moment::residual_norm(&moment::moment_map(rep, &h, params)?);
    if residual > 1e-8 {
        return Err(Error::NotASolution { residual });
    }
    let proj: Vec<CMatrix> = w
        .bases
        .iter()
        .zip(&h)
        .map(|(b, hv)| {
            if b.ncols() == 0 {
                return Ok(CMatrix::zeros(hv.nrows(), hv.nrows()));
            }
            let g = b.adjoint() * hv * b;
            let gi = linalg::pd_roots(&g)?.inv;
            Ok(b * gi * b.adjoint() * hv)
        })
        .collect::<Result<_>>()?;
    let mut perp = 0.0;
    for (a, ar) in rep.quiver().arrows().iter().enumerate() {
        let comp = CMatrix::identity(rep.dim(ar.tail), rep.dim(ar.tail)) - &proj[ar.tail];
        let x: Vec<CMatrix> = rep.slices(a).iter().map(|phi| &proj[ar.head] * phi * &comp).collect();
        perp += moment::twisted_norm_sq(rep, a, &x, &h)?;
    }
    let (deg, _) = degree_and_slope(&DegreeData::point(&w.dims()), params)?;
    Ok((deg + perp).abs())
}
