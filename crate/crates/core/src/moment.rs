//! Kempf–Ness machinery at point scale: adjoints, moment map, the modified
//! Donaldson functional and its gradient flow in the chart `H = e^s`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::calculus;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermEigen};
use crate::rep::TwistedRep;
use crate::stability::StabilityParams;

/// Metric `H_v = e^{s_v}` against the background `K = id`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricState {
    pub s: Vec<CMatrix>,
}

impl MetricState {
    pub fn identity(dims: &[usize]) -> Self {
        Self {
            s: dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn from_metric(h: &[CMatrix]) -> Result<Self> {
        let s = h
            .iter()
            .map(|m| {
                linalg::pd_roots(m)?;
                linalg::herm_fn(m, f64::ln)
            })
            .collect::<Result<_>>()?;
        Ok(Self { s })
    }

    pub fn metric(&self) -> Result<Vec<CMatrix>> {
        self.s.iter().map(|m| linalg::herm_fn(m, f64::exp)).collect()
    }

    /// `tr(σ·s) = Σ_v σ_v tr s_v`.
    pub fn sigma_trace(&self, sigma: &[f64]) -> f64 {
        self.s.iter().zip(sigma).map(|(m, sg)| sg * linalg::trace(m).re).sum()
    }

    /// Shift by a multiple of the identity so that `tr(σ·s) = 0`.
    pub fn sigma_gauged(&self, sigma: &[f64]) -> Self {
        let den: f64 = self.s.iter().zip(sigma).map(|(m, sg)| sg * m.nrows() as f64).sum();
        let shift = if den > 0.0 { self.sigma_trace(sigma) / den } else { 0.0 };
        self.shifted(-shift)
    }

    fn shifted(&self, c: f64) -> Self {
        Self {
            s: self
                .s
                .iter()
                .map(|m| m + CMatrix::identity(m.nrows(), m.nrows()) * Complex64::new(c, 0.0))
                .collect(),
        }
    }

    /// Representative with `Σ_v tr s_v = 0`.
    pub fn centered(&self) -> Self {
        let n: usize = self.s.iter().map(|m| m.nrows()).sum();
        if n == 0 {
            return self.clone();
        }
        let t: f64 = self.s.iter().map(|m| linalg::trace(m).re).sum();
        self.shifted(-t / n as f64)
    }

    pub fn norm(&self) -> f64 {
        self.s.iter().map(linalg::frob_norm_sq).sum::<f64>().sqrt()
    }
}

fn check_params(rep: &TwistedRep, params: &StabilityParams) -> Result<()> {
    if params.sigma.len() != rep.quiver().vertex_count() || params.tau.len() != rep.quiver().vertex_count() {
        return Err(Error::InvalidParameters(
            "parameter length differs from vertex count".into(),
        ));
    }
    Ok(())
}

/// Slices `ψ^{(k)}: E_ha → E_ta` of `φ_a^{*H} = (H_ta ⊗ q_a)^{-1} φ_a^† H_ha`,
/// so that `φ^{*H}w = Σ_k ψ^{(k)}w ⊗ e_k`.
pub fn adjoint(rep: &TwistedRep, h: &[CMatrix]) -> Result<Vec<Vec<CMatrix>>> {
    let roots: Vec<_> = h.iter().map(linalg::pd_roots).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rep.quiver().arrow_count());
    for (a, ar) in rep.quiver().arrows().iter().enumerate() {
        let qinv = linalg::pd_roots(&rep.twist().weights[a])?.inv;
        let m = rep.multiplicity(a);
        let base: Vec<CMatrix> = rep
            .slices(a)
            .iter()
            .map(|phi| &roots[ar.tail].inv * phi.adjoint() * &h[ar.head])
            .collect();
        let slices = (0..m)
            .map(|k| {
                let mut acc = CMatrix::zeros(rep.dim(ar.tail), rep.dim(ar.head));
                for (l, b) in base.iter().enumerate() {
                    acc += b * qinv[(k, l)];
                }
                acc
            })
            .collect();
        out.push(slices);
    }
    Ok(out)
}

/// `m_v = Σ_{h(a)=v} φ_a φ_a^* − Σ_{t(a)=v} φ_a^* φ_a − τ_v id`, the second
/// term being the partial trace over `M_a`.
pub fn moment_map(rep: &TwistedRep, h: &[CMatrix], params: &StabilityParams) -> Result<Vec<CMatrix>> {
    check_params(rep, params)?;
    let adj = adjoint(rep, h)?;
    let mut m: Vec<CMatrix> = rep
        .dims()
        .iter()
        .zip(&params.tau)
        .map(|(&n, &t)| CMatrix::identity(n, n) * Complex64::new(-t, 0.0))
        .collect();
    for (a, ar) in rep.quiver().arrows().iter().enumerate() {
        for (phi, psi) in rep.slices(a).iter().zip(&adj[a]) {
            m[ar.head] += phi * psi;
            m[ar.tail] -= psi * phi;
        }
    }
    Ok(m)
}

/// `‖m(H)‖_H = (Σ_v tr m_v²)^{1/2}`.
pub fn residual_norm(m: &[CMatrix]) -> f64 {
    m.iter().map(|mv| (mv * mv).trace().re).sum::<f64>().max(0.0).sqrt()
}

/// `|φ|²_H = Σ_a tr(φ_a φ_a^{*H})`.
pub fn phi_norm_sq(rep: &TwistedRep, h: &[CMatrix]) -> Result<f64> {
    let adj = adjoint(rep, h)?;
    let mut total = 0.0;
    for (slices, adj_a) in rep.all_slices().iter().zip(&adj) {
        for (phi, psi) in slices.iter().zip(adj_a) {
            total += (phi * psi).trace().re;
        }
    }
    Ok(total)
}

/// `(A, B)_K = Σ_{k,l} (q⁻¹)_{kl} tr(A^{(k)} B^{(l)†})` on twisted slices.
fn twisted_inner_k(rep: &TwistedRep, x: &[Vec<CMatrix>], y: &[Vec<CMatrix>]) -> Result<f64> {
    let mut total = Complex64::new(0.0, 0.0);
    for a in 0..rep.quiver().arrow_count() {
        let qinv = linalg::pd_roots(&rep.twist().weights[a])?.inv;
        for (k, xa) in x[a].iter().enumerate() {
            for (l, yb) in y[a].iter().enumerate() {
                total += qinv[(k, l)] * (xa * yb.adjoint()).trace();
            }
        }
    }
    Ok(total.re)
}

/// `M(s) = (ψ(s)φ, φ)_K − ‖φ‖²_K − Σ_v τ_v tr s_v` with `ψ(x,y) = e^{x−y}`.
pub fn kempf_ness(rep: &TwistedRep, s: &[CMatrix], params: &StabilityParams) -> Result<f64> {
    check_params(rep, params)?;
    let phi = rep.all_slices();
    let moved = calculus::apply_bivariate(rep, s, calculus::small_psi)?;
    let tr: f64 = s.iter().zip(&params.tau).map(|(m, t)| t * linalg::trace(m).re).sum();
    Ok(twisted_inner_k(rep, &moved, phi)? - twisted_inner_k(rep, phi, phi)? - tr)
}

/// The representation written in an `H`-orthonormal frame:
/// `φ̃ = H_ha^{1/2} φ H_ta^{-1/2}` (twist unchanged). The identity metric on
/// `φ̃` corresponds to `H` on `φ`.
pub fn balanced_frame(rep: &TwistedRep, h: &[CMatrix]) -> Result<TwistedRep> {
    let roots: Vec<_> = h.iter().map(linalg::pd_roots).collect::<Result<_>>()?;
    let g: Vec<CMatrix> = roots.iter().map(|r| r.sqrt.clone()).collect();
    let gi: Vec<CMatrix> = roots.iter().map(|r| r.inv_sqrt.clone()).collect();
    rep.transform(&g, &gi)
}

/// `M_{σ,τ}(H, J)` for `J = H e^{s'}` with `s'` `H`-selfadjoint, computed as
/// the functional of the `H`-orthonormal frame.
pub fn kempf_ness_relative(
    rep: &TwistedRep,
    base: &MetricState,
    s_rel: &[CMatrix],
    params: &StabilityParams,
) -> Result<f64> {
    let h = base.metric()?;
    let roots: Vec<_> = h.iter().map(linalg::pd_roots).collect::<Result<_>>()?;
    let frame = balanced_frame(rep, &h)?;
    let s_tilde: Vec<CMatrix> = s_rel
        .iter()
        .zip(&roots)
        .map(|(sr, r)| linalg::hermitian_part(&(&r.sqrt * sr * &r.inv_sqrt)))
        .collect();
    kempf_ness(&frame, &s_tilde, params)
}

/// Gradient of `M` at `H = e^s`: the moment map `m(H)`.
pub fn kempf_ness_gradient(rep: &TwistedRep, s: &[CMatrix], params: &StabilityParams) -> Result<Vec<CMatrix>> {
    let h = MetricState { s: s.to_vec() }.metric()?;
    moment_map(rep, &h, params)
}

pub(crate) fn twisted_norm_sq(rep: &TwistedRep, a: usize, x: &[CMatrix], h: &[CMatrix]) -> Result<f64> {
    let ar = rep.quiver().arrow(a);
    let qinv = linalg::pd_roots(&rep.twist().weights[a])?.inv;
    let ht_inv = linalg::pd_roots(&h[ar.tail])?.inv;
    let mut total = Complex64::new(0.0, 0.0);
    for (k, xk) in x.iter().enumerate() {
        for (l, xl) in x.iter().enumerate() {
            total += qinv[(k, l)] * (xk * &ht_inv * xl.adjoint() * &h[ar.head]).trace();
        }
    }
    Ok(total.re)
}

/// `‖[s', φ]‖²_H`, the second derivative of `M` along `H e^{ε s'}`.
pub fn second_variation(rep: &TwistedRep, h: &[CMatrix], dir: &[CMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for (a, ar) in rep.quiver().arrows().iter().enumerate() {
        let br: Vec<CMatrix> = rep
            .slices(a)
            .iter()
            .map(|phi| &dir[ar.head] * phi - phi * &dir[ar.tail])
            .collect();
        total += twisted_norm_sq(rep, a, &br, h)?;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Flow

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Converged,
    Diverged,
    MaxIter,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub kempf_ness: f64,
    pub residual_norm: f64,
    pub step: f64,
    pub s_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub blowup: f64,
    pub seed: u64,
    /// Amplitude of the seeded random starting point; 0 starts at `K`.
    pub init_scale: f64,
    /// Trust cap on the Frobenius norm of one step in the `s` chart.
    pub max_step: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Bound on the Newton step norm required to accept convergence.
    pub certificate_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
            blowup: 50.0,
            seed: 0,
            init_scale: 0.0,
            max_step: 1.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            certificate_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowReport {
    pub status: FlowStatus,
    /// Final metric in the gauge `tr(σ·s) = 0`.
    pub final_metric: MetricState,
    pub residual_norm: f64,
    pub iterations: usize,
    pub iter_log: Vec<IterRecord>,
    /// `u_∞ = s/‖s‖` of the last centered iterate, present when diverged.
    pub limit_direction: Option<Vec<CMatrix>>,
    /// Norm of the Newton step at the first iterate with `‖m‖ ≤ tol`.
    pub newton_step: Option<f64>,
}

/// Quantities of one iterate, all in the `H`-orthonormal frame.
struct Frame {
    eig: Vec<HermEigen>,
    /// `ψ_a^{(j)}` per arrow, over a `q`-orthonormal twist basis.
    psi: Vec<Vec<CMatrix>>,
    /// `m̃_v = H^{1/2} m_v H^{-1/2}`, Hermitian.
    m: Vec<CMatrix>,
    energy: f64,
    /// Magnitude of the terms summed into `energy`, for rounding estimates.
    scale: f64,
    residual: f64,
}

struct FlowContext<'a> {
    rep: &'a TwistedRep,
    tau: &'a [f64],
    /// Slices recombined over a `q`-orthonormal basis of each `M_a`.
    phi_on: Vec<Vec<CMatrix>>,
}

impl<'a> FlowContext<'a> {
    fn new(rep: &'a TwistedRep, tau: &'a [f64]) -> Result<Self> {
        let mut phi_on = Vec::new();
        for a in 0..rep.quiver().arrow_count() {
            let qis = linalg::pd_roots(&rep.twist().weights[a])?.inv_sqrt;
            let sl = rep.slices(a);
            phi_on.push(
                (0..sl.len())
                    .map(|j| {
                        let mut acc = CMatrix::zeros(sl[0].nrows(), sl[0].ncols());
                        for (k, s) in sl.iter().enumerate() {
                            acc += s * qis[(k, j)];
                        }
                        acc
                    })
                    .collect(),
            );
        }
        Ok(Self { rep, tau, phi_on })
    }

    fn frame(&self, s: &[CMatrix]) -> Result<Frame> {
        let eig: Vec<HermEigen> = s.iter().map(HermEigen::new).collect::<Result<_>>()?;
        let half: Vec<CMatrix> = eig.iter().map(|e| e.apply(|x| (0.5 * x).exp())).collect();
        let neg_half: Vec<CMatrix> = eig.iter().map(|e| e.apply(|x| (-0.5 * x).exp())).collect();
        let rep = self.rep;
        let mut m: Vec<CMatrix> = rep
            .dims()
            .iter()
            .zip(self.tau)
            .map(|(&n, &t)| CMatrix::identity(n, n) * Complex64::new(-t, 0.0))
            .collect();
        let mut energy = 0.0;
        let mut psi = Vec::with_capacity(self.phi_on.len());
        for (a, ar) in rep.quiver().arrows().iter().enumerate() {
            let mut pa = Vec::with_capacity(self.phi_on[a].len());
            for phi in &self.phi_on[a] {
                let p = &half[ar.head] * phi * &neg_half[ar.tail];
                m[ar.head] += &p * p.adjoint();
                m[ar.tail] -= p.adjoint() * &p;
                energy += linalg::frob_norm_sq(&p);
                pa.push(p);
            }
            psi.push(pa);
        }
        for mv in m.iter_mut() {
            *mv = linalg::hermitian_part(mv);
        }
        let tr: f64 = s.iter().zip(self.tau).map(|(sv, t)| t * linalg::trace(sv).re).sum();
        let scale = 1.0 + energy + tr.abs();
        energy -= tr;
        let residual = m.iter().map(linalg::frob_norm_sq).sum::<f64>().sqrt();
        Ok(Frame {
            eig,
            psi,
            m,
            energy,
            scale,
            residual,
        })
    }

    /// `D = −m` transported to the `s` chart: in the eigenbasis of `s`,
    /// `D_ij = −m̃_ij κ(λ_i − λ_j)` with `κ(δ) = (δ/2)/sinh(δ/2)`.
    fn direction(&self, f: &Frame) -> Vec<CMatrix> {
        let mut d: Vec<CMatrix> = f
            .eig
            .iter()
            .zip(&f.m)
            .map(|(e, mt)| {
                let u = &e.vectors;
                let mut hat = u.adjoint() * mt * u;
                for i in 0..hat.nrows() {
                    for j in 0..hat.ncols() {
                        let h = 0.5 * (e.values[i] - e.values[j]);
                        let k = if h.abs() < 1e-8 { 1.0 } else { h / h.sinh() };
                        hat[(i, j)] *= -k;
                    }
                }
                linalg::hermitian_part(&(u * hat * u.adjoint()))
            })
            .collect();
        center(&mut d);
        d
    }

    /// Norm of the Newton step `A⁺g` for the Hessian form
    /// `A(Y,Y) = Σ ‖Y_h ψ − ψ Y_t‖²` over Hermitian `Y`, gradient `g(Y) = tr(m̃Y)`.
    fn newton_step(&self, f: &Frame) -> f64 {
        let dims = self.rep.dims();
        let mut basis: Vec<(usize, CMatrix)> = Vec::new();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (v, &n) in dims.iter().enumerate() {
            for i in 0..n {
                for j in i..n {
                    if i == j {
                        let mut b = CMatrix::zeros(n, n);
                        b[(i, i)] = linalg::ONE;
                        basis.push((v, b));
                    } else {
                        let mut b = CMatrix::zeros(n, n);
                        b[(i, j)] = Complex64::new(r, 0.0);
                        b[(j, i)] = Complex64::new(r, 0.0);
                        basis.push((v, b));
                        let mut b = CMatrix::zeros(n, n);
                        b[(i, j)] = Complex64::new(0.0, r);
                        b[(j, i)] = Complex64::new(0.0, -r);
                        basis.push((v, b));
                    }
                }
            }
        }
        let nb = basis.len();
        if nb == 0 {
            return 0.0;
        }
        // Columns of L: real coordinates of [Y, ψ] for each basis Y.
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(nb);
        for (v, b) in &basis {
            let mut col = Vec::new();
            for (a, ar) in self.rep.quiver().arrows().iter().enumerate() {
                for p in &f.psi[a] {
                    let mut img = CMatrix::zeros(p.nrows(), p.ncols());
                    if ar.head == *v {
                        img += b * p;
                    }
                    if ar.tail == *v {
                        img -= p * b;
                    }
                    col.extend(img.iter().flat_map(|z| [z.re, z.im]));
                }
            }
            cols.push(col);
        }
        let a = DMatrix::from_fn(nb, nb, |i, j| {
            cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum::<f64>()
        });
        let g: Vec<f64> = basis.iter().map(|(v, b)| (&f.m[*v] * b).trace().re).collect();
        let eig = a.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cut = 1e-14 * top.max(f64::MIN_POSITIVE);
        let mut step_sq = 0.0;
        for k in 0..nb {
            let mu = eig.eigenvalues[k];
            if mu <= cut {
                continue;
            }
            let proj: f64 = (0..nb).map(|i| eig.eigenvectors[(i, k)] * g[i]).sum();
            step_sq += (proj / mu).powi(2);
        }
        step_sq.sqrt()
    }
}

fn center(d: &mut [CMatrix]) {
    let n: usize = d.iter().map(|m| m.nrows()).sum();
    if n == 0 {
        return;
    }
    let t: f64 = d.iter().map(|m| linalg::trace(m).re).sum::<f64>() / n as f64;
    for m in d.iter_mut() {
        for i in 0..m.nrows() {
            m[(i, i)] -= Complex64::new(t, 0.0);
        }
    }
}

fn axpy(s: &[CMatrix], alpha: f64, d: &[CMatrix]) -> Vec<CMatrix> {
    s.iter()
        .zip(d)
        .map(|(x, y)| x + y * Complex64::new(alpha, 0.0))
        .collect()
}

fn inner(x: &[CMatrix], y: &[CMatrix]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| (p.conj() * q).re).sum::<f64>())
        .sum()
}

fn norm(x: &[CMatrix]) -> f64 {
    inner(x, x).max(0.0).sqrt()
}

/// `deg_{σ,τ}` at point scale is `−Σ_v τ_v dim E_v`; it must vanish.
pub fn point_admissibility_defect(rep: &TwistedRep, params: &StabilityParams) -> f64 {
    rep.dims()
        .iter()
        .zip(&params.tau)
        .map(|(&n, t)| t * n as f64)
        .sum::<f64>()
}

fn random_start(dims: &[usize], seed: u64, scale: f64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<CMatrix> = dims
        .iter()
        .map(|&n| {
            let g = CMatrix::from_fn(n, n, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            linalg::hermitian_part(&g) * Complex64::new(scale, 0.0)
        })
        .collect();
    center(&mut s);
    s
}

/// Descends `M` from `K` (or a seeded random start) and classifies the run.
pub fn flow_solve(rep: &TwistedRep, params: &StabilityParams, opts: &FlowOptions) -> Result<FlowReport> {
    params.validate(rep.quiver().vertex_count())?;
    let defect = point_admissibility_defect(rep, params);
    let scale: f64 = rep
        .dims()
        .iter()
        .zip(&params.tau)
        .map(|(&n, t)| t.abs() * n as f64)
        .sum::<f64>()
        .max(1.0);
    if defect.abs() > 1e-12 * scale {
        return Err(Error::InadmissibleParameters { defect });
    }
    let ctx = FlowContext::new(rep, &params.tau)?;
    let dims = rep.dims();
    let mut s = if opts.init_scale > 0.0 {
        random_start(dims, opts.seed, opts.init_scale)
    } else {
        dims.iter().map(|&n| CMatrix::zeros(n, n)).collect()
    };
    let phi0 = ctx
        .frame(&dims.iter().map(|&n| CMatrix::zeros(n, n)).collect::<Vec<_>>())?
        .energy;

    let mut frame = ctx.frame(&s)?;
    let mut log = Vec::new();
    let mut step_len = 0.0;
    let mut alpha_prev = 1.0;
    let mut prev: Option<(Vec<CMatrix>, Vec<CMatrix>)> = None;
    let mut certified_fail = false;
    let mut newton_step = None;
    let mut status = FlowStatus::MaxIter;
    let mut iter = 0;
    loop {
        let s_norm = norm(&s);
        log.push(IterRecord {
            iter,
            kempf_ness: frame.energy - phi0,
            residual_norm: frame.residual,
            step: step_len,
            s_norm,
        });
        if frame.residual <= opts.tol && !certified_fail {
            let ns = ctx.newton_step(&frame);
            newton_step = Some(ns);
            if ns <= opts.certificate_tol {
                status = FlowStatus::Converged;
                break;
            }
            certified_fail = true;
        }
        if s_norm >= opts.blowup {
            status = FlowStatus::Diverged;
            break;
        }
        if iter >= opts.max_iter {
            break;
        }
        let d = ctx.direction(&frame);
        let dn = norm(&d);
        if dn == 0.0 {
            break;
        }
        let mut alpha = match &prev {
            Some((ps, pd)) => {
                let ds: Vec<CMatrix> = s.iter().zip(ps).map(|(a, b)| a - b).collect();
                let dg: Vec<CMatrix> = pd.iter().zip(&d).map(|(a, b)| a - b).collect();
                let den = inner(&ds, &dg);
                let bb = if den > 0.0 {
                    inner(&ds, &ds) / den
                } else {
                    2.0 * alpha_prev
                };
                // A collapsed BB step (after a rounding-floor step) restarts at 1.
                if bb.is_finite() && bb >= 1e-8 {
                    bb
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        alpha = alpha.min(opts.max_step / dn);
        let g0 = frame.residual * frame.residual;
        let accepted = loop {
            let trial = axpy(&s, alpha, &d);
            let tf = ctx.frame(&trial)?;
            let de = tf.energy - frame.energy;
            // Below the rounding floor of M the residual is the merit function.
            let floor = 1e-13 * frame.scale.max(tf.scale);
            if de <= -opts.armijo_c * alpha * g0 || (de.abs() <= floor && tf.residual < frame.residual) {
                break Some((trial, tf));
            }
            alpha *= opts.backtrack;
            if alpha * dn < 1e-300 || alpha < 1e-30 {
                break None;
            }
        };
        let Some((mut trial, _)) = accepted else {
            break;
        };
        center(&mut trial);
        prev = Some((std::mem::replace(&mut s, trial), d));
        frame = ctx.frame(&s)?;
        step_len = alpha * dn;
        alpha_prev = alpha;
        iter += 1;
    }

    let state = MetricState { s: s.clone() };
    let limit_direction = if status == FlowStatus::Diverged {
        let n = state.norm();
        Some(s.iter().map(|m| m / Complex64::new(n, 0.0)).collect())
    } else {
        None
    };
    Ok(FlowReport {
        status,
        final_metric: state.sigma_gauged(&params.sigma),
        residual_norm: frame.residual,
        iterations: iter,
        iter_log: log,
        limit_direction,
        newton_step,
    })
}
