//! Vectorized evolution engines.
//!
//! Training needs many forward and backward sweeps over the same model
//! structure with changing parameters, so the right-hand side is
//! precompiled: per-parameter superoperator slices are built once and the
//! constant part is reassembled whenever parameters change.
//!
//! Three realizations share one interface:
//! * [`SuperopEngine`] — the density matrix as a complex d²-vector with
//!   dense d²×d² superoperators; the reference realization.
//! * [`DirectEngine`] — the density matrix itself as the state, with
//!   sparse channel sandwiches; same numbers, ~d² fewer operations, used
//!   for the training hot path of single-spin models.
//! * [`PauliEngine`] — spin-1/2 chains in the orthonormal Pauli-string
//!   basis, where the state is a *real* 4^L-vector, every dissipator is
//!   diagonal, and the Hamiltonian acts as a sparse signed scatter.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::integrate::OdeState;
use crate::linalg::{c, dagger, eye, kron, CMat, CVec};
use crate::model::{vec_state, ProbeDrive};
use crate::operators::Operator;

/// A parameterized linear flow ẏ = L(t; θ) y together with everything the
/// backward (adjoint) sweep needs: the real-transpose of L, per-parameter
/// directional derivatives, and observable read-out/impulse.
///
/// Parameters are ordered: all Hamiltonian coefficients α, then all
/// dissipation strengths γ.
pub trait FlowEngine {
    type State: OdeState;
    type GradAccum;

    fn state_len(&self) -> usize;
    fn n_alpha(&self) -> usize;
    fn n_gamma(&self) -> usize;
    fn n_params(&self) -> usize {
        self.n_alpha() + self.n_gamma()
    }
    fn n_observables(&self) -> usize;

    /// Swaps in new parameters (same ordering as the gradient vector).
    fn set_params(&mut self, alphas: &[f64], gammas: &[f64]);

    /// L(t) y.
    fn rhs(&self, y: &Self::State, t: f64) -> Self::State;

    /// The transpose of L(t) with respect to the *real* inner product
    /// Re⟨a, b⟩, applied to `a`. For a complex-linear L this is L†a.
    fn rhs_transpose(&self, a: &Self::State, t: f64) -> Self::State;

    fn new_grad_accum(&self) -> Self::GradAccum;

    /// Adds the contribution Re⟨k̄, (∂L/∂θ_j)·y⟩ of one integrator stage
    /// for every parameter j into the accumulator.
    fn accumulate_stage(&self, acc: &mut Self::GradAccum, kbar: &Self::State, y: &Self::State);

    /// Writes the accumulated per-parameter totals into `out` (adding).
    fn finalize_grad(&self, acc: &Self::GradAccum, out: &mut [f64]);

    /// Expectation value of observable `obs` in state `y`.
    fn observe(&self, obs: usize, y: &Self::State) -> f64;

    /// a += coef · ∂⟨O_obs⟩/∂y (the loss impulse of one observation).
    fn add_observable_impulse(&self, obs: usize, coef: f64, a: &mut Self::State);
}

// ---------------------------------------------------------------------------
// Dense superoperator engine
// ---------------------------------------------------------------------------

/// Dense vectorized engine: y = vec(ρ) ∈ C^{d²},
/// L(t) = Σ_μ α_μ K_μ + Σ_k γ_k D_k + Σ_c p_c(t) P_c with
/// K_μ = i(I⊗g_μ − g_μᵀ⊗I) (the slice ∂L/∂α_μ, consistent with
/// H0 = −Σ α_μ g_μ) and D_k the usual dissipator superoperator.
pub struct SuperopEngine {
    dim: usize,
    n: usize,
    k_ops: Vec<CMat>,
    d_ops: Vec<CMat>,
    /// (superoperator, its dagger, frequency list) per probe control.
    probe_ops: Vec<(CMat, CMat, Vec<f64>)>,
    probe_amplitude: f64,
    l_const: CMat,
    l_const_dag: CMat,
    observables: Vec<CVec>,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
}

/// Superoperator of the commutator part: i(I⊗g − gᵀ⊗I), i.e. the
/// vectorization of ρ ↦ +i[g, ρ].
fn commutator_superop(g: &CMat) -> CMat {
    let d = g.nrows();
    let id = eye(d);
    (kron(&id, g) - kron(&g.t().to_owned(), &id)).mapv(|z| z * c(0.0, 1.0))
}

/// Dissipator superoperator g*⊗g − ½(I⊗g†g + (g†g)ᵀ⊗I).
fn dissipator_superop(g: &CMat) -> CMat {
    let d = g.nrows();
    let id = eye(d);
    let gd = dagger(g);
    let gram = gd.dot(g);
    kron(&g.mapv(|z| z.conj()), g)
        - (kron(&id, &gram) + kron(&gram.t().to_owned(), &id)).mapv(|z| z * c(0.5, 0.0))
}

impl SuperopEngine {
    pub fn new(
        dim: usize,
        ham_ops: &[Operator],
        channel_ops: &[Operator],
        probe: Option<&ProbeDrive>,
        observables: &[CMat],
        alphas: &[f64],
        gammas: &[f64],
    ) -> Self {
        assert_eq!(ham_ops.len(), alphas.len());
        assert_eq!(channel_ops.len(), gammas.len());
        let n = dim * dim;
        let k_ops: Vec<CMat> = ham_ops.iter().map(|g| commutator_superop(&g.matrix)).collect();
        let d_ops: Vec<CMat> = channel_ops.iter().map(|g| dissipator_superop(&g.matrix)).collect();
        let (probe_ops, probe_amplitude) = match probe {
            Some(p) => (
                p.controls
                    .iter()
                    .map(|(op, freqs)| {
                        // probe enters as −i[A, ρ] per unit drive
                        let sup = commutator_superop(&op.matrix).mapv(|z| -z);
                        let sup_dag = dagger(&sup);
                        (sup, sup_dag, freqs.clone())
                    })
                    .collect(),
                p.amplitude,
            ),
            None => (Vec::new(), 0.0),
        };
        let mut engine = SuperopEngine {
            dim,
            n,
            k_ops,
            d_ops,
            probe_ops,
            probe_amplitude,
            l_const: Array2::zeros((n, n)),
            l_const_dag: Array2::zeros((n, n)),
            observables: observables.iter().map(vec_state).collect(),
            alphas: alphas.to_vec(),
            gammas: gammas.to_vec(),
        };
        engine.rebuild();
        engine
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn rebuild(&mut self) {
        let mut l: CMat = Array2::zeros((self.n, self.n));
        for (a, k) in self.alphas.iter().zip(&self.k_ops) {
            l.zip_mut_with(k, |acc, &v| *acc += c(*a, 0.0) * v);
        }
        for (g, d) in self.gammas.iter().zip(&self.d_ops) {
            l.zip_mut_with(d, |acc, &v| *acc += c(*g, 0.0) * v);
        }
        self.l_const_dag = dagger(&l);
        self.l_const = l;
    }

    fn probe_coefficient(&self, idx: usize, t: f64) -> f64 {
        let freqs = &self.probe_ops[idx].2;
        self.probe_amplitude
            * freqs.iter().map(|w| (2.0 * std::f64::consts::PI * w * t).sin()).sum::<f64>()
    }

    /// Full L(t) as a dense matrix (diagnostics and spectral analysis).
    pub fn liouvillian(&self, t: f64) -> CMat {
        let mut l = self.l_const.clone();
        for idx in 0..self.probe_ops.len() {
            let p = self.probe_coefficient(idx, t);
            l.zip_mut_with(&self.probe_ops[idx].0, |acc, &v| *acc += c(p, 0.0) * v);
        }
        l
    }
}

impl FlowEngine for SuperopEngine {
    type State = CVec;
    type GradAccum = CMat;

    fn state_len(&self) -> usize {
        self.n
    }
    fn n_alpha(&self) -> usize {
        self.k_ops.len()
    }
    fn n_gamma(&self) -> usize {
        self.d_ops.len()
    }
    fn n_observables(&self) -> usize {
        self.observables.len()
    }

    fn set_params(&mut self, alphas: &[f64], gammas: &[f64]) {
        self.alphas.copy_from_slice(alphas);
        self.gammas.copy_from_slice(gammas);
        self.rebuild();
    }

    fn rhs(&self, y: &CVec, t: f64) -> CVec {
        let mut out = self.l_const.dot(y);
        for idx in 0..self.probe_ops.len() {
            let p = self.probe_coefficient(idx, t);
            if p != 0.0 {
                out.scaled_add(c(p, 0.0), &self.probe_ops[idx].0.dot(y));
            }
        }
        out
    }

    fn rhs_transpose(&self, a: &CVec, t: f64) -> CVec {
        let mut out = self.l_const_dag.dot(a);
        for idx in 0..self.probe_ops.len() {
            let p = self.probe_coefficient(idx, t);
            if p != 0.0 {
                out.scaled_add(c(p, 0.0), &self.probe_ops[idx].1.dot(a));
            }
        }
        out
    }

    fn new_grad_accum(&self) -> CMat {
        Array2::zeros((self.n, self.n))
    }

    fn accumulate_stage(&self, acc: &mut CMat, kbar: &CVec, y: &CVec) {
        // acc_{ab} += conj(k̄_a) y_b, so that Re⟨k̄, X y⟩ = Re Σ X∘acc for
        // every parameter slice X — one outer product instead of one
        // matrix-vector product per parameter
        for a in 0..self.n {
            let ka = kbar[a].conj();
            if ka.norm_sqr() == 0.0 {
                continue;
            }
            let mut row = acc.row_mut(a);
            for b in 0..self.n {
                row[b] += ka * y[b];
            }
        }
    }

    fn finalize_grad(&self, acc: &CMat, out: &mut [f64]) {
        let na = self.k_ops.len();
        for (j, k) in self.k_ops.iter().enumerate() {
            out[j] += k.iter().zip(acc.iter()).map(|(x, m)| (x * m).re).sum::<f64>();
        }
        for (j, d) in self.d_ops.iter().enumerate() {
            out[na + j] += d.iter().zip(acc.iter()).map(|(x, m)| (x * m).re).sum::<f64>();
        }
    }

    fn observe(&self, obs: usize, y: &CVec) -> f64 {
        self.observables[obs].iter().zip(y.iter()).map(|(o, v)| (o.conj() * v).re).sum()
    }

    fn add_observable_impulse(&self, obs: usize, coef: f64, a: &mut CVec) {
        a.scaled_add(c(coef, 0.0), &self.observables[obs]);
    }
}

// ---------------------------------------------------------------------------
// Direct density-matrix engine
// ---------------------------------------------------------------------------

/// Coordinate-form sparse operator: (row, col, value) triples.
type SparseOp = Vec<(usize, usize, C64)>;

fn sparse_entries(m: &CMat) -> SparseOp {
    let mut out = Vec::new();
    for ((i, j), &v) in m.indexed_iter() {
        if v.norm_sqr() != 0.0 {
            out.push((i, j, v));
        }
    }
    out
}

/// Density-matrix-picture engine: the state is ρ itself (d×d), the
/// generator is applied with d×d matrix products and sparse channel
/// sandwiches instead of a dense d²×d² superoperator. Numerically
/// identical to [`SuperopEngine`] but ~d² cheaper per application, which
/// is what makes long training runs on the single-spin family tractable.
pub struct DirectEngine {
    dim: usize,
    ham_sparse: Vec<SparseOp>,
    ham_dense: Vec<CMat>,
    /// Per channel: (g sparse, g†g sparse, g dense).
    channels: Vec<(SparseOp, SparseOp, CMat)>,
    probe_controls: Vec<(CMat, Vec<f64>)>,
    probe_amplitude: f64,
    observables: Vec<CMat>,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
    /// −Σ α_μ g_μ.
    h0: CMat,
    /// Σ γ_k g_k†g_k.
    gram_sum: CMat,
    /// Memoized probe term Σ_μ p_μ(t)·A_μ keyed by the bits of t: the
    /// integrator revisits the same stage times every epoch, and the probe
    /// part of H(t) never depends on the learned parameters.
    probe_cache: std::cell::RefCell<std::collections::HashMap<u64, CMat>>,
    /// Flat-index contraction tables (see [`ChannelPairs`]).
    channel_pairs: Vec<ChannelPairs>,
    /// Per Hamiltonian generator: (cc·d + rr, v) for every entry (rr, cc, v),
    /// i.e. the positions needed for tr(M·g) = Σ M[cc, rr]·v.
    ham_trace: Vec<Vec<(usize, C64)>>,
}

/// Entry-pair contractions of one channel with row-major linear indices,
/// so the hot loops only touch flat slices. For entries (r1, c1, v1),
/// (r2, c2, v2) of g and w = v1·conj(v2):
/// - sandwich:  (gρg†)[r1·d + r2] += w·ρ[c1·d + c2]
/// - adjoint:   (g†ag)[c1·d + c2] += conj(w)·a[r1·d + r2]
/// - jump:      tr(R·gρg†) = Σ w·R[r2·d + r1]·ρ[c1·d + c2]
/// - gram:      tr(M·g†g) = Σ v·M[cc·d + rr] over entries (rr, cc, v) of g†g
struct ChannelPairs {
    sandwich: Vec<(usize, usize, C64)>,
    adjoint: Vec<(usize, usize, C64)>,
    jump: Vec<(usize, usize, C64)>,
    gram: Vec<(usize, C64)>,
}

fn channel_pairs(dim: usize, g: &SparseOp, gram: &SparseOp) -> ChannelPairs {
    let mut sandwich = Vec::new();
    let mut adjoint = Vec::new();
    let mut jump = Vec::new();
    for &(r1, c1, v1) in g {
        for &(r2, c2, v2) in g {
            let w = v1 * v2.conj();
            sandwich.push((r1 * dim + r2, c1 * dim + c2, w));
            adjoint.push((c1 * dim + c2, r1 * dim + r2, w.conj()));
            jump.push((r2 * dim + r1, c1 * dim + c2, w));
        }
    }
    let gram = gram.iter().map(|&(rr, cc, v)| (cc * dim + rr, v)).collect();
    ChannelPairs { sandwich, adjoint, jump, gram }
}

/// Returns the row-major data slice, copying only if `m` is a
/// non-contiguous view (states and engine matrices are always standard).
fn std_slice<'a>(m: &'a CMat, buf: &'a mut Option<CMat>) -> &'a [C64] {
    match m.as_slice() {
        Some(s) => s,
        None => {
            *buf = Some(m.as_standard_layout().to_owned());
            buf.as_ref().unwrap().as_slice().unwrap()
        }
    }
}

/// out += scale · a·b on flat row-major d×d slices.
fn matmul_acc(out: &mut [C64], a: &[C64], b: &[C64], n: usize, scale: C64) {
    for i in 0..n {
        for k in 0..n {
            let s = scale * a[i * n + k];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += s * brow[j];
            }
        }
    }
}


impl DirectEngine {
    pub fn new(
        dim: usize,
        ham_ops: &[Operator],
        channel_ops: &[Operator],
        probe: Option<&ProbeDrive>,
        observables: &[CMat],
        alphas: &[f64],
        gammas: &[f64],
    ) -> Self {
        assert_eq!(ham_ops.len(), alphas.len());
        assert_eq!(channel_ops.len(), gammas.len());
        let channels: Vec<(SparseOp, SparseOp, CMat)> = channel_ops
            .iter()
            .map(|g| {
                let gram = dagger(&g.matrix).dot(&g.matrix);
                (sparse_entries(&g.matrix), sparse_entries(&gram), g.matrix.clone())
            })
            .collect();
        let pairs =
            channels.iter().map(|(g, gram, _)| channel_pairs(dim, g, gram)).collect();
        let (probe_controls, probe_amplitude) = match probe {
            Some(p) => (
                p.controls.iter().map(|(op, f)| (op.matrix.clone(), f.clone())).collect(),
                p.amplitude,
            ),
            None => (Vec::new(), 0.0),
        };
        let ham_sparse: Vec<SparseOp> =
            ham_ops.iter().map(|g| sparse_entries(&g.matrix)).collect();
        let ham_trace = ham_sparse
            .iter()
            .map(|g| g.iter().map(|&(rr, cc, v)| (cc * dim + rr, v)).collect())
            .collect();
        let mut engine = DirectEngine {
            dim,
            ham_sparse,
            ham_dense: ham_ops.iter().map(|g| g.matrix.clone()).collect(),
            channel_pairs: pairs,
            ham_trace,
            channels,
            probe_controls,
            probe_amplitude,
            observables: observables.to_vec(),
            alphas: alphas.to_vec(),
            gammas: gammas.to_vec(),
            h0: Array2::zeros((dim, dim)),
            gram_sum: Array2::zeros((dim, dim)),
            probe_cache: std::cell::RefCell::new(std::collections::HashMap::new()),
        };
        engine.rebuild();
        engine
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn rebuild(&mut self) {
        let mut h: CMat = Array2::zeros((self.dim, self.dim));
        for (a, g) in self.alphas.iter().zip(&self.ham_dense) {
            h.zip_mut_with(g, |acc, &v| *acc -= c(*a, 0.0) * v);
        }
        self.h0 = h;
        let mut gram: CMat = Array2::zeros((self.dim, self.dim));
        for (gm, (_, gram_sp, _)) in self.gammas.iter().zip(&self.channels) {
            for &(i, j, v) in gram_sp {
                gram[[i, j]] += c(*gm, 0.0) * v;
            }
        }
        self.gram_sum = gram;
    }

    fn probe_coefficient(&self, idx: usize, t: f64) -> f64 {
        let freqs = &self.probe_controls[idx].1;
        self.probe_amplitude
            * freqs.iter().map(|w| (2.0 * std::f64::consts::PI * w * t).sin()).sum::<f64>()
    }

    fn hamiltonian(&self, t: f64) -> CMat {
        if self.probe_controls.is_empty() {
            return self.h0.clone();
        }
        let mut cache = self.probe_cache.borrow_mut();
        if cache.len() > 50_000 {
            cache.clear();
        }
        let probe = cache.entry(t.to_bits()).or_insert_with(|| {
            let mut p: CMat = Array2::zeros((self.dim, self.dim));
            for idx in 0..self.probe_controls.len() {
                let coef = self.probe_coefficient(idx, t);
                if coef != 0.0 {
                    p.zip_mut_with(&self.probe_controls[idx].0, |acc, &v| {
                        *acc += c(coef, 0.0) * v
                    });
                }
            }
            p
        });
        &self.h0 + &*probe
    }

    /// Full vectorized L(t) as a dense matrix (diagnostics and spectral
    /// analysis only; never used on the hot path).
    pub fn liouvillian(&self, t: f64) -> CMat {
        let n = self.dim * self.dim;
        let mut l: CMat = Array2::zeros((n, n));
        let h = self.hamiltonian(t);
        // ρ ↦ −i[H, ρ], matching commutator_superop's +i[g, ρ] convention
        l.zip_mut_with(&commutator_superop(&h), |acc, &v| *acc -= v);
        for (gm, (_, _, g)) in self.gammas.iter().zip(&self.channels) {
            l.zip_mut_with(&dissipator_superop(g), |acc, &v| *acc += c(*gm, 0.0) * v);
        }
        l
    }
}

impl FlowEngine for DirectEngine {
    type State = CMat;
    type GradAccum = Vec<f64>;

    fn state_len(&self) -> usize {
        self.dim * self.dim
    }
    fn n_alpha(&self) -> usize {
        self.ham_sparse.len()
    }
    fn n_gamma(&self) -> usize {
        self.channels.len()
    }
    fn n_observables(&self) -> usize {
        self.observables.len()
    }

    fn set_params(&mut self, alphas: &[f64], gammas: &[f64]) {
        self.alphas.copy_from_slice(alphas);
        self.gammas.copy_from_slice(gammas);
        self.rebuild();
    }

    fn rhs(&self, y: &CMat, t: f64) -> CMat {
        let n = self.dim;
        let h = self.hamiltonian(t);
        let hs = h.as_slice().unwrap();
        let gs = self.gram_sum.as_slice().unwrap();
        let mut y_buf = None;
        let ys = std_slice(y, &mut y_buf);
        // −i[H, ρ] − ½{Σγg†g, ρ} + Σγ gρg†
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        matmul_acc(&mut out, hs, ys, n, c(0.0, -1.0));
        matmul_acc(&mut out, ys, hs, n, c(0.0, 1.0));
        matmul_acc(&mut out, gs, ys, n, c(-0.5, 0.0));
        matmul_acc(&mut out, ys, gs, n, c(-0.5, 0.0));
        for (gm, pairs) in self.gammas.iter().zip(&self.channel_pairs) {
            if *gm != 0.0 {
                for &(o, i, w) in &pairs.sandwich {
                    out[o] += *gm * w * ys[i];
                }
            }
        }
        Array2::from_shape_vec((n, n), out).unwrap()
    }

    fn rhs_transpose(&self, a: &CMat, t: f64) -> CMat {
        let n = self.dim;
        let h = self.hamiltonian(t);
        let hs = h.as_slice().unwrap();
        let gs = self.gram_sum.as_slice().unwrap();
        let mut a_buf = None;
        let asl = std_slice(a, &mut a_buf);
        // +i[H, a] − ½{Σγg†g, a} + Σγ g†ag
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        matmul_acc(&mut out, hs, asl, n, c(0.0, 1.0));
        matmul_acc(&mut out, asl, hs, n, c(0.0, -1.0));
        matmul_acc(&mut out, gs, asl, n, c(-0.5, 0.0));
        matmul_acc(&mut out, asl, gs, n, c(-0.5, 0.0));
        for (gm, pairs) in self.gammas.iter().zip(&self.channel_pairs) {
            if *gm != 0.0 {
                for &(o, i, w) in &pairs.adjoint {
                    out[o] += *gm * w * asl[i];
                }
            }
        }
        Array2::from_shape_vec((n, n), out).unwrap()
    }

    fn new_grad_accum(&self) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    fn accumulate_stage(&self, acc: &mut Vec<f64>, kbar: &CMat, y: &CMat) {
        // With R = k̄†, all parameter contractions reduce to a few traces
        // against P = yR, Q = Ry and sparse entry sums — no per-parameter
        // matrix products.
        let n = self.dim;
        let mut k_buf = None;
        let ks = std_slice(kbar, &mut k_buf);
        let mut y_buf = None;
        let ys = std_slice(y, &mut y_buf);
        let mut r = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                r[i * n + j] = ks[j * n + i].conj();
            }
        }
        let one = c(1.0, 0.0);
        let mut p = vec![C64::new(0.0, 0.0); n * n];
        matmul_acc(&mut p, ys, &r, n, one);
        let mut q = vec![C64::new(0.0, 0.0); n * n];
        matmul_acc(&mut q, &r, ys, n, one);
        // ∂L/∂α_μ : ρ ↦ i[g_μ, ρ];  Re⟨k̄, i[g,y]⟩ = −Im(tr(Rgy) − tr(Ryg))
        for (j, g) in self.ham_trace.iter().enumerate() {
            let mut s = c(0.0, 0.0);
            for &(idx, v) in g {
                s += (p[idx] - q[idx]) * v;
            }
            acc[j] -= s.im;
        }
        // ∂L/∂γ_k : ρ ↦ gρg† − ½{g†g, ρ}
        let na = self.ham_trace.len();
        for (k, pairs) in self.channel_pairs.iter().enumerate() {
            let mut jump = c(0.0, 0.0);
            for &(ri, yi, w) in &pairs.jump {
                jump += w * r[ri] * ys[yi];
            }
            let mut anti = c(0.0, 0.0);
            for &(idx, v) in &pairs.gram {
                anti += (p[idx] + q[idx]) * v;
            }
            acc[na + k] += (jump - anti * c(0.5, 0.0)).re;
        }
    }

    fn finalize_grad(&self, acc: &Vec<f64>, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }

    fn observe(&self, obs: usize, y: &CMat) -> f64 {
        self.observables[obs].iter().zip(y.iter()).map(|(o, v)| (o.conj() * v).re).sum()
    }

    fn add_observable_impulse(&self, obs: usize, coef: f64, a: &mut CMat) {
        a.zip_mut_with(&self.observables[obs], |x, &o| *x += c(coef, 0.0) * o);
    }
}

// ---------------------------------------------------------------------------
// Pauli-string chain engine
// ---------------------------------------------------------------------------

/// A Pauli string over L sites: letters 0..4 = I, X, Y, Z; site 0 is the
/// leftmost Kronecker factor. Encoded as a base-4 index with site 0 most
/// significant, matching the dense embedding order.
pub fn string_index(letters: &[u8]) -> usize {
    letters.iter().fold(0usize, |acc, &l| acc * 4 + l as usize)
}

/// Inverse of [`string_index`].
pub fn index_string(mut idx: usize, len: usize) -> Vec<u8> {
    let mut letters = vec![0u8; len];
    for site in (0..len).rev() {
        letters[site] = (idx % 4) as u8;
        idx /= 4;
    }
    letters
}

/// Single-site product σ_a σ_b = i^k σ_c: returns (c, k).
fn pauli_mul(a: u8, b: u8) -> (u8, u8) {
    match (a, b) {
        (0, x) => (x, 0),
        (x, 0) => (x, 0),
        (x, y) if x == y => (0, 0),
        (1, 2) => (3, 1),
        (2, 1) => (3, 3),
        (2, 3) => (1, 1),
        (3, 2) => (1, 3),
        (3, 1) => (2, 1),
        (1, 3) => (2, 3),
        _ => unreachable!(),
    }
}

/// Sparse real map out[dst] += coef · r[src].
#[derive(Debug, Clone, Default)]
struct ScatterMap {
    src: Vec<u32>,
    dst: Vec<u32>,
    coef: Vec<f64>,
}

impl ScatterMap {
    fn apply(&self, weight: f64, r: &Array1<f64>, out: &mut Array1<f64>) {
        let r = r.as_slice().expect("contiguous state");
        let out = out.as_slice_mut().expect("contiguous state");
        for ((&s, &d), &c) in self.src.iter().zip(&self.dst).zip(&self.coef) {
            out[d as usize] += weight * c * r[s as usize];
        }
    }

    /// The transpose map; all our Hamiltonian maps are antisymmetric, so
    /// this equals apply with the opposite sign, but transposing
    /// explicitly keeps the engine honest about what it computes.
    fn apply_transpose(&self, weight: f64, r: &Array1<f64>, out: &mut Array1<f64>) {
        let r = r.as_slice().expect("contiguous state");
        let out = out.as_slice_mut().expect("contiguous state");
        for ((&s, &d), &c) in self.src.iter().zip(&self.dst).zip(&self.coef) {
            out[s as usize] += weight * c * r[d as usize];
        }
    }

    /// Re⟨k̄, M y⟩ for this map M.
    fn contract(&self, kbar: &Array1<f64>, y: &Array1<f64>) -> f64 {
        let kbar = kbar.as_slice().expect("contiguous state");
        let y = y.as_slice().expect("contiguous state");
        let mut s = 0.0;
        for ((&sr, &d), &c) in self.src.iter().zip(&self.dst).zip(&self.coef) {
            s += c * kbar[d as usize] * y[sr as usize];
        }
        s
    }
}

/// Builds the coordinate map of ρ ↦ −i[g, ρ] for a weighted sum of Pauli
/// strings g = Σ w_s P_s, acting on the orthonormal basis P/√d.
fn ad_map(strings: &[(Vec<u8>, f64)], len: usize) -> ScatterMap {
    let n = 1usize << (2 * len);
    let mut map = ScatterMap::default();
    for (g, w) in strings {
        for p_idx in 0..n {
            let p = index_string(p_idx, len);
            let mut k = 0u8;
            let mut anticommuting_sites = 0;
            let mut q = vec![0u8; len];
            for site in 0..len {
                let (cl, kl) = pauli_mul(g[site], p[site]);
                q[site] = cl;
                k = (k + kl) % 4;
                if g[site] != 0 && p[site] != 0 && g[site] != p[site] {
                    anticommuting_sites += 1;
                }
            }
            if anticommuting_sites % 2 == 0 {
                continue;
            }
            // [g, P] = 2 gP = 2 i^k Q with k odd;
            // −i[g, P] = −2 i^{k+1} Q = ∓2 Q
            debug_assert!(k == 1 || k == 3);
            let coef = if k == 1 { 2.0 } else { -2.0 };
            map.src.push(p_idx as u32);
            map.dst.push(string_index(&q) as u32);
            map.coef.push(coef * w);
        }
    }
    map
}

/// One observable in string coordinates: ⟨O⟩ = Σ_s weight_s · r[idx_s].
#[derive(Debug, Clone)]
struct StringObservable {
    idx: Vec<u32>,
    weight: Vec<f64>,
}

/// Probe description for the chain engine: each control is a weighted
/// string sum with its own frequency list.
pub struct PauliProbe {
    pub amplitude: f64,
    pub controls: Vec<(Vec<(Vec<u8>, f64)>, Vec<f64>)>,
}

/// Chain engine in the orthonormal Pauli-string basis B_P = P/√d.
/// The state is the real coefficient vector r (ρ = Σ_P r_P B_P); every
/// jump channel is a single Pauli string, so its dissipator is diagonal
/// with entries 0 / −2, and the Hamiltonian acts as a signed scatter.
pub struct PauliEngine {
    len: usize,
    n: usize,
    sqrt_d: f64,
    ham_maps: Vec<ScatterMap>,
    /// All Hamiltonian maps fused into one coordinate list with the −α
    /// weights folded into the coefficients; rebuilt on set_params so the
    /// hot loops make a single pass instead of one per parameter.
    ham_combined: ScatterMap,
    /// Per channel: the string indices that anticommute with the channel
    /// operator (diagonal entry −2).
    channel_flips: Vec<Vec<u32>>,
    probe_maps: Vec<(ScatterMap, Vec<f64>)>,
    probe_amplitude: f64,
    /// Σ_k γ_k d_k, rebuilt on set_params.
    diag: Array1<f64>,
    observables: Vec<StringObservable>,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
}

/// Gradient accumulator for [`PauliEngine`]: α components are contracted
/// directly per stage; the diagonal dissipators share one elementwise
/// product vector.
pub struct PauliGradAccum {
    alpha: Vec<f64>,
    w: Array1<f64>,
}

impl PauliEngine {
    /// `ham_strings` / `channel_strings`: one Pauli string per parameter.
    /// `observables`: weighted string sums (weights in operator units, the
    /// engine handles basis normalization).
    pub fn new(
        len: usize,
        ham_strings: &[Vec<u8>],
        channel_strings: &[Vec<u8>],
        probe: Option<&PauliProbe>,
        observables: &[Vec<(Vec<u8>, f64)>],
        alphas: &[f64],
        gammas: &[f64],
    ) -> Self {
        assert_eq!(ham_strings.len(), alphas.len());
        assert_eq!(channel_strings.len(), gammas.len());
        let n = 1usize << (2 * len);
        let sqrt_d = ((1usize << len) as f64).sqrt();
        let ham_maps = ham_strings
            .iter()
            .map(|s| ad_map(std::slice::from_ref(&(s.clone(), 1.0)), len))
            .collect();
        let channel_flips = channel_strings
            .iter()
            .map(|g| {
                (0..n)
                    .filter(|&p_idx| {
                        let p = index_string(p_idx, len);
                        let odd = (0..len)
                            .filter(|&s| g[s] != 0 && p[s] != 0 && g[s] != p[s])
                            .count()
                            % 2;
                        odd == 1
                    })
                    .map(|p| p as u32)
                    .collect()
            })
            .collect();
        let (probe_maps, probe_amplitude) = match probe {
            Some(p) => (
                p.controls
                    .iter()
                    .map(|(strings, freqs)| (ad_map(strings, len), freqs.clone()))
                    .collect(),
                p.amplitude,
            ),
            None => (Vec::new(), 0.0),
        };
        let observables = observables
            .iter()
            .map(|terms| StringObservable {
                idx: terms.iter().map(|(s, _)| string_index(s) as u32).collect(),
                weight: terms.iter().map(|(_, w)| w * sqrt_d).collect(),
            })
            .collect();
        let mut engine = PauliEngine {
            len,
            n,
            sqrt_d,
            ham_maps,
            ham_combined: ScatterMap::default(),
            channel_flips,
            probe_maps,
            probe_amplitude,
            diag: Array1::zeros(n),
            observables,
            alphas: alphas.to_vec(),
            gammas: gammas.to_vec(),
        };
        engine.rebuild();
        engine
    }

    pub fn chain_len(&self) -> usize {
        self.len
    }

    fn rebuild(&mut self) {
        self.diag.fill(0.0);
        for (g, flips) in self.gammas.iter().zip(&self.channel_flips) {
            for &p in flips {
                self.diag[p as usize] -= 2.0 * g;
            }
        }
        self.ham_combined.src.clear();
        self.ham_combined.dst.clear();
        self.ham_combined.coef.clear();
        // H0 = −Σ α g: the unitary part is Σ (−α)·(−i ad_g)
        for (a, m) in self.alphas.iter().zip(&self.ham_maps) {
            self.ham_combined.src.extend_from_slice(&m.src);
            self.ham_combined.dst.extend_from_slice(&m.dst);
            self.ham_combined.coef.extend(m.coef.iter().map(|c| -a * c));
        }
    }

    fn probe_coefficient(&self, idx: usize, t: f64) -> f64 {
        let freqs = &self.probe_maps[idx].1;
        self.probe_amplitude
            * freqs.iter().map(|w| (2.0 * std::f64::consts::PI * w * t).sin()).sum::<f64>()
    }

    /// Coordinates of a product state ⊗_i ½(I + n_i·σ) given the Bloch
    /// vector of every site.
    pub fn encode_product(&self, bloch: &[[f64; 3]]) -> Array1<f64> {
        assert_eq!(bloch.len(), self.len);
        let mut r = Array1::zeros(self.n);
        for p_idx in 0..self.n {
            let p = index_string(p_idx, self.len);
            let mut v = 1.0 / self.sqrt_d;
            for site in 0..self.len {
                if p[site] != 0 {
                    v *= bloch[site][p[site] as usize - 1];
                }
            }
            if v != 0.0 {
                r[p_idx] = v;
            }
        }
        r
    }

    /// Coordinates from a dense density matrix: r_P = Tr[P ρ]/√d.
    pub fn encode_dense(&self, rho: &CMat) -> Array1<f64> {
        use crate::operators::SignedPerm;
        let mut r = Array1::zeros(self.n);
        for p_idx in 0..self.n {
            let letters: Vec<usize> =
                index_string(p_idx, self.len).iter().map(|&l| l as usize).collect();
            let sp = SignedPerm::pauli_string(&letters);
            let mut tr = c(0.0, 0.0);
            for j in 0..rho.nrows() {
                tr += sp.coef[j] * rho[[j, sp.perm[j]]];
            }
            debug_assert!(tr.im.abs() < 1e-9);
            r[p_idx] = tr.re / self.sqrt_d;
        }
        r
    }

    /// Dense density matrix from coordinates: ρ = Σ_P r_P P/√d.
    pub fn decode_dense(&self, r: &Array1<f64>) -> CMat {
        use crate::operators::SignedPerm;
        let d = 1usize << self.len;
        let mut rho: CMat = Array2::zeros((d, d));
        for p_idx in 0..self.n {
            if r[p_idx] == 0.0 {
                continue;
            }
            let letters: Vec<usize> =
                index_string(p_idx, self.len).iter().map(|&l| l as usize).collect();
            let sp = SignedPerm::pauli_string(&letters);
            let w = c(r[p_idx] / self.sqrt_d, 0.0);
            for j in 0..d {
                rho[[sp.perm[j], j]] += w * sp.coef[j];
            }
        }
        rho
    }
}

impl FlowEngine for PauliEngine {
    type State = Array1<f64>;
    type GradAccum = PauliGradAccum;

    fn state_len(&self) -> usize {
        self.n
    }
    fn n_alpha(&self) -> usize {
        self.ham_maps.len()
    }
    fn n_gamma(&self) -> usize {
        self.channel_flips.len()
    }
    fn n_observables(&self) -> usize {
        self.observables.len()
    }

    fn set_params(&mut self, alphas: &[f64], gammas: &[f64]) {
        self.alphas.copy_from_slice(alphas);
        self.gammas.copy_from_slice(gammas);
        self.rebuild();
    }

    fn rhs(&self, y: &Array1<f64>, t: f64) -> Array1<f64> {
        let mut out = &self.diag * y;
        self.ham_combined.apply(1.0, y, &mut out);
        for idx in 0..self.probe_maps.len() {
            let p = self.probe_coefficient(idx, t);
            if p != 0.0 {
                self.probe_maps[idx].0.apply(p, y, &mut out);
            }
        }
        out
    }

    fn rhs_transpose(&self, a: &Array1<f64>, t: f64) -> Array1<f64> {
        let mut out = &self.diag * a;
        self.ham_combined.apply_transpose(1.0, a, &mut out);
        for idx in 0..self.probe_maps.len() {
            let p = self.probe_coefficient(idx, t);
            if p != 0.0 {
                self.probe_maps[idx].0.apply_transpose(p, a, &mut out);
            }
        }
        out
    }

    fn new_grad_accum(&self) -> PauliGradAccum {
        PauliGradAccum { alpha: vec![0.0; self.ham_maps.len()], w: Array1::zeros(self.n) }
    }

    fn accumulate_stage(&self, acc: &mut PauliGradAccum, kbar: &Array1<f64>, y: &Array1<f64>) {
        // ∂L/∂α_j = +i ad_{g_j} = −(−i ad_{g_j})
        for (j, m) in self.ham_maps.iter().enumerate() {
            acc.alpha[j] -= m.contract(kbar, y);
        }
        // every ∂L/∂γ_k is diagonal: share one elementwise product
        for i in 0..self.n {
            acc.w[i] += kbar[i] * y[i];
        }
    }

    fn finalize_grad(&self, acc: &PauliGradAccum, out: &mut [f64]) {
        let na = self.ham_maps.len();
        for j in 0..na {
            out[j] += acc.alpha[j];
        }
        for (k, flips) in self.channel_flips.iter().enumerate() {
            let mut s = 0.0;
            for &p in flips {
                s -= 2.0 * acc.w[p as usize];
            }
            out[na + k] += s;
        }
    }

    fn observe(&self, obs: usize, y: &Array1<f64>) -> f64 {
        let o = &self.observables[obs];
        o.idx.iter().zip(&o.weight).map(|(&i, w)| w * y[i as usize]).sum()
    }

    fn add_observable_impulse(&self, obs: usize, coef: f64, a: &mut Array1<f64>) {
        let o = &self.observables[obs];
        for (&i, w) in o.idx.iter().zip(&o.weight) {
            a[i as usize] += coef * w;
        }
    }
}
