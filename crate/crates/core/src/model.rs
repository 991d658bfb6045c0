//! The parameterized Lindblad model: Hamiltonian terms, jump channels and
//! an optional time-dependent probe drive; evaluation of the master
//! equation right-hand side and its vectorized superoperator form.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, dagger, eye, kron, trace, CMat, CVec};
use crate::operators::Operator;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("state dimension {state} does not match model dimension {model}")]
    DimensionMismatch { state: usize, model: usize },
    #[error("negative dissipation strength {0}")]
    NegativeRate(f64),
    #[error("observable has non-negligible imaginary expectation {0:.3e}")]
    NonRealExpectation(f64),
}

/// One Hamiltonian term: coefficient α_μ attached to a Hermitian
/// generator; the full bare Hamiltonian is H0 = −Σ α_μ g_μ.
#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    pub alpha: f64,
    pub operator: Operator,
}

/// One dissipation channel: strength γ_k ≥ 0 with jump operator
/// J_k = √γ_k g_k.
#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub gamma: f64,
    pub operator: Operator,
}

/// Time-dependent probe H_prob(t) = Σ_μ p_μ(t) A_μ with
/// p_μ(t) = amplitude · Σ_m sin(2π ω_m t); every control operator has its
/// own frequency list, so p_μ(0) = 0 exactly.
#[derive(Debug, Clone)]
pub struct ProbeDrive {
    pub amplitude: f64,
    pub controls: Vec<(Operator, Vec<f64>)>,
}

impl ProbeDrive {
    /// Drive coefficient of control `idx` at time `t`.
    pub fn coefficient(&self, idx: usize, t: f64) -> f64 {
        let freqs = &self.controls[idx].1;
        self.amplitude
            * freqs.iter().map(|w| (2.0 * std::f64::consts::PI * w * t).sin()).sum::<f64>()
    }
}

/// A parameterized Lindblad model on a d-dimensional Hilbert space.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub dim: usize,
    pub hamiltonian_terms: Vec<HamiltonianTerm>,
    pub jump_channels: Vec<JumpChannel>,
    pub probe: Option<ProbeDrive>,
}

impl LindbladModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        for ch in &self.jump_channels {
            if ch.gamma < 0.0 {
                return Err(ModelError::NegativeRate(ch.gamma));
            }
        }
        Ok(())
    }

    /// Bare Hamiltonian H0 = −Σ α_μ g_μ.
    pub fn h0(&self) -> CMat {
        let mut h = Array2::zeros((self.dim, self.dim));
        for term in &self.hamiltonian_terms {
            h.zip_mut_with(&term.operator.matrix, |acc, &g| *acc -= c(term.alpha, 0.0) * g);
        }
        h
    }

    /// Full Hamiltonian H0 + H_prob(t).
    pub fn hamiltonian(&self, t: f64) -> CMat {
        let mut h = self.h0();
        if let Some(probe) = &self.probe {
            for (idx, (op, _)) in probe.controls.iter().enumerate() {
                let p = probe.coefficient(idx, t);
                h.zip_mut_with(&op.matrix, |acc, &a| *acc += c(p, 0.0) * a);
            }
        }
        h
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.hamiltonian_terms.iter().map(|h| h.alpha).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.jump_channels.iter().map(|j| j.gamma).collect()
    }

    /// Mean Hamiltonian strength ᾱ = N_α⁻¹ Σ |α_μ|.
    pub fn alpha_bar(&self) -> f64 {
        let n = self.hamiltonian_terms.len().max(1);
        self.hamiltonian_terms.iter().map(|h| h.alpha.abs()).sum::<f64>() / n as f64
    }

    /// Mean dissipation strength γ̄ = N_γ⁻¹ Σ γ_k.
    pub fn gamma_bar(&self) -> f64 {
        let n = self.jump_channels.len().max(1);
        self.jump_channels.iter().map(|j| j.gamma).sum::<f64>() / n as f64
    }

    /// Lindblad right-hand side
    /// `ρ̇ = −i[H(t), ρ] + Σ_k γ_k (g_k ρ g_k† − ½{g_k† g_k, ρ})`.
    pub fn rhs(&self, rho: &CMat, t: f64) -> Result<CMat, ModelError> {
        if rho.nrows() != self.dim {
            return Err(ModelError::DimensionMismatch { state: rho.nrows(), model: self.dim });
        }
        let h = self.hamiltonian(t);
        let hr = h.dot(rho);
        let rh = rho.dot(&h);
        let mut out = (&hr - &rh).mapv(|z| z * c(0.0, -1.0));
        for ch in &self.jump_channels {
            let g = &ch.operator.matrix;
            let gd = dagger(g);
            let grg = g.dot(rho).dot(&gd);
            let gram = gd.dot(g);
            let anti = gram.dot(rho) + rho.dot(&gram);
            out.zip_mut_with(&(&grg - &anti.mapv(|z| z * c(0.5, 0.0))), |acc, &v| {
                *acc += c(ch.gamma, 0.0) * v
            });
        }
        Ok(out)
    }

    /// Vectorized Liouvillian at time `t` under the column-stacking
    /// convention `vec(AρB) = (Bᵀ ⊗ A)·vec(ρ)`:
    /// `L̃ = −i[I⊗H − Hᵀ⊗I] + Σ_k γ_k [g_k*⊗g_k − ½(I⊗g_k†g_k + (g_k†g_k)ᵀ⊗I)]`.
    pub fn vectorize_liouvillian(&self, t: f64) -> CMat {
        let d = self.dim;
        let id = eye(d);
        let h = self.hamiltonian(t);
        let mut l = (kron(&id, &h) - kron(&h.t().to_owned(), &id)).mapv(|z| z * c(0.0, -1.0));
        for ch in &self.jump_channels {
            let g = &ch.operator.matrix;
            let gd = dagger(g);
            let gram = gd.dot(g);
            let term = kron(&g.mapv(|z| z.conj()), g)
                - (kron(&id, &gram) + kron(&gram.t().to_owned(), &id)).mapv(|z| z * c(0.5, 0.0));
            l.zip_mut_with(&term, |acc, &v| *acc += c(ch.gamma, 0.0) * v);
        }
        l
    }
}

/// Column-stacking vectorization: stacks columns of `m` into one vector,
/// so that `vec(AρB) = (Bᵀ ⊗ A)·vec(ρ)`.
pub fn vec_state(m: &CMat) -> CVec {
    let (r, cdim) = m.dim();
    let mut v = Vec::with_capacity(r * cdim);
    for j in 0..cdim {
        for i in 0..r {
            v.push(m[[i, j]]);
        }
    }
    v.into()
}

/// Inverse of [`vec_state`] for a square matrix.
pub fn unvec_state(v: &CVec, dim: usize) -> CMat {
    Array2::from_shape_fn((dim, dim), |(i, j)| v[j * dim + i])
}

/// Expectation value `Re Tr[O ρ]`; the imaginary residue must be below
/// 1e-10 for Hermitian observables on Hermitian states.
pub fn measure(observable: &CMat, rho: &CMat) -> Result<f64, ModelError> {
    if observable.nrows() != rho.nrows() {
        return Err(ModelError::DimensionMismatch {
            state: rho.nrows(),
            model: observable.nrows(),
        });
    }
    let tr = trace(&observable.dot(rho));
    if tr.im.abs() > 1e-10 {
        return Err(ModelError::NonRealExpectation(tr.im));
    }
    Ok(tr.re)
}

/// Serializable description of a model: operators are referenced by label
/// within a named family, so the decimal parameter values round-trip
/// exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub family: String,
    pub dim: usize,
    pub hamiltonian_terms: Vec<TermSpec>,
    pub jump_channels: Vec<ChannelSpec>,
    pub probe: Option<ProbeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermSpec {
    pub label: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelSpec {
    pub label: String,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeSpec {
    pub amplitude: f64,
    pub controls: Vec<ControlSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControlSpec {
    pub label: String,
    pub frequencies: Vec<f64>,
}

impl LindbladModel {
    pub fn to_spec(&self, family: &str) -> ModelSpec {
        ModelSpec {
            family: family.to_string(),
            dim: self.dim,
            hamiltonian_terms: self
                .hamiltonian_terms
                .iter()
                .map(|t| TermSpec { label: t.operator.label.clone(), alpha: t.alpha })
                .collect(),
            jump_channels: self
                .jump_channels
                .iter()
                .map(|ch| ChannelSpec { label: ch.operator.label.clone(), gamma: ch.gamma })
                .collect(),
            probe: self.probe.as_ref().map(|p| ProbeSpec {
                amplitude: p.amplitude,
                controls: p
                    .controls
                    .iter()
                    .map(|(op, freqs)| ControlSpec {
                        label: op.label.clone(),
                        frequencies: freqs.clone(),
                    })
                    .collect(),
            }),
        }
    }
}
