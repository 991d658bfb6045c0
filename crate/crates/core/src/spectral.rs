//! Spectral analysis of the vectorized Liouvillian: steady state, gap,
//! decoherence time, and the closed-form general solution
//! `ρ̃(t) = Σ_m λ_m e^{ε_m t} u_m`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{c, eig_general, trace, CMat, CVec, LinalgError};
use crate::model::{unvec_state, vec_state};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("no dissipative gap: Re(ε0 − ε1) = {0:.3e} is below tolerance")]
    NoGap(f64),
    #[error("steady-state mode has zero trace; cannot normalize")]
    TracelessSteadyState,
}

/// Eigendecomposition of a Liouvillian, sorted by descending real part
/// (ties broken by ascending |imaginary part|).
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Hilbert-space dimension d (the Liouvillian is d²×d²).
    pub dim: usize,
    pub eigenvalues: CVec,
    /// Right eigenvectors, one per column, in sorted order.
    pub right: CMat,
    /// Left eigenvectors, one per column, biorthonormal to `right`
    /// (v_m† u_n = δ_mn).
    pub left: CMat,
    /// Steady state as a density matrix: zero mode normalized to unit trace.
    pub steady_state: CMat,
    /// Gap Δ = ε_0 − ε_s where ε_s is the slowest *decaying* mode: the
    /// first eigenvalue in sorted order whose real part lies strictly
    /// below Re(ε_0). With a degenerate undamped subspace (e.g. pure
    /// dephasing) the extra zero modes are skipped, so Δ1 = gap.re is
    /// the decay rate of the longest-lived transient.
    pub gap: C64,
    /// Decoherence time t_dc = 1/Δ1.
    pub t_dc: f64,
    /// Number of undamped modes (real part within 1e-9 of Re(ε_0)).
    pub undamped_multiplicity: usize,
    /// Number of eigenvalues with real part within 1e-10 of the slowest
    /// decaying mode's (degeneracy of the mode defining the gap).
    pub slow_mode_multiplicity: usize,
    /// 1-norm condition estimate of the right-eigenvector matrix.
    pub cond: f64,
}

/// Diagonalizes a vectorized Liouvillian. `liouvillian` must be d²×d²
/// with `dim` = d; eigenvalues come back sorted by descending real part.
pub fn spectral_analysis(liouvillian: &CMat, dim: usize) -> Result<Spectrum, SpectralError> {
    let eig = eig_general(liouvillian)?;
    let n = eig.eigenvalues.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        eb.re
            .partial_cmp(&ea.re)
            .unwrap()
            .then(ea.im.abs().partial_cmp(&eb.im.abs()).unwrap())
    });

    let eigenvalues: CVec = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut right: CMat = Array2::zeros((n, n));
    let mut left: CMat = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        right.column_mut(dst).assign(&eig.right.column(src));
        left.column_mut(dst).assign(&eig.left.column(src));
    }

    let zero_mode = unvec_state(&right.column(0).to_owned(), dim);
    let tr = trace(&zero_mode);
    if tr.norm() < 1e-12 {
        return Err(SpectralError::TracelessSteadyState);
    }
    let steady_state = zero_mode.mapv(|v| v / tr);

    let undamped_multiplicity =
        eigenvalues.iter().filter(|e| (e.re - eigenvalues[0].re).abs() <= 1e-9).count();
    let slow_idx = (0..n)
        .find(|&m| eigenvalues[m].re < eigenvalues[0].re - 1e-9)
        .ok_or(SpectralError::NoGap(0.0))?;
    let gap = eigenvalues[0] - eigenvalues[slow_idx];
    let slow_re = eigenvalues[slow_idx].re;
    let slow_mode_multiplicity =
        eigenvalues.iter().filter(|e| (e.re - slow_re).abs() <= 1e-10).count();

    Ok(Spectrum {
        dim,
        eigenvalues,
        right,
        left,
        steady_state,
        gap,
        t_dc: 1.0 / gap.re,
        undamped_multiplicity,
        slow_mode_multiplicity,
        cond: eig.cond,
    })
}

impl Spectrum {
    /// Projection coefficients λ_m = v_m† · vec(ρ0).
    pub fn project(&self, rho0: &CMat) -> CVec {
        let v0 = vec_state(rho0);
        let n = self.eigenvalues.len();
        Array1::from_shape_fn(n, |m| {
            self.left.column(m).iter().zip(v0.iter()).map(|(l, x)| l.conj() * x).sum()
        })
    }
}

/// Evolves `ρ0` under a time-independent Liouvillian using the spectral
/// expansion, returning ρ(t) at each requested time.
pub fn evolve_spectral(spectrum: &Spectrum, rho0: &CMat, times: &[f64]) -> Vec<CMat> {
    let lambda = spectrum.project(rho0);
    let n = spectrum.eigenvalues.len();
    times
        .iter()
        .map(|&t| {
            let mut v: CVec = Array1::zeros(n);
            for m in 0..n {
                let w = lambda[m] * (spectrum.eigenvalues[m] * c(t, 0.0)).exp();
                if w.norm() < 1e-300 {
                    continue;
                }
                v.scaled_add(w, &spectrum.right.column(m).to_owned());
            }
            unvec_state(&v, spectrum.dim)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegrationPlan, Method};
    use crate::linalg::{eye, hermiticity_defect, max_abs, pauli};
    use crate::model::{HamiltonianTerm, JumpChannel, LindbladModel};
    use crate::operators::{su4_generators, Operator};
    use ndarray::array;

    fn qubit_channel(gamma: f64, op: CMat) -> LindbladModel {
        LindbladModel {
            dim: 2,
            hamiltonian_terms: vec![],
            jump_channels: vec![JumpChannel { gamma, operator: Operator::dense("j", op) }],
            probe: None,
        }
    }

    #[test]
    fn qubit_dephasing_spectrum() {
        let gamma = 0.37;
        let model = qubit_channel(gamma, pauli(3));
        let l = model.vectorize_liouvillian(0.0);
        let s = spectral_analysis(&l, 2).unwrap();
        let expect = [0.0, 0.0, -2.0 * gamma, -2.0 * gamma];
        for (ev, ex) in s.eigenvalues.iter().zip(expect) {
            assert!((ev - c(ex, 0.0)).norm() <= 1e-10, "{ev} vs {ex}");
        }
        assert!((s.gap.re - 2.0 * gamma).abs() <= 1e-10);
        assert!((s.t_dc - 1.0 / (2.0 * gamma)).abs() <= 1e-8);
    }

    #[test]
    fn hermitian_channels_have_maximally_mixed_steady_state() {
        let model = random_su4_model(21, 0.02);
        let l = model.vectorize_liouvillian(0.0);
        let s = spectral_analysis(&l, 4).unwrap();
        assert!(max_abs(&(&s.steady_state - &eye(4).mapv(|v| v * c(0.25, 0.0)))) <= 1e-8);
        // zero mode
        assert!(s.eigenvalues[0].norm() <= 1e-8);
        // steady state sanity
        assert!(hermiticity_defect(&s.steady_state) <= 1e-8);
        assert!((trace(&s.steady_state) - c(1.0, 0.0)).norm() <= 1e-10);
    }

    #[test]
    fn closed_system_spectrum_is_imaginary() {
        let model = LindbladModel {
            dim: 2,
            hamiltonian_terms: vec![HamiltonianTerm {
                alpha: -0.8,
                operator: Operator::dense("sz", pauli(3)),
            }],
            jump_channels: vec![],
            probe: None,
        };
        let l = model.vectorize_liouvillian(0.0);
        let eig = eig_general(&l).unwrap();
        // eigenvalues of H are ±0.8; differences are {0, 0, ±1.6}
        let mut expected = vec![0.0, 0.0, 1.6, -1.6];
        let mut got: Vec<f64> = eig.eigenvalues.iter().map(|e| e.im).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (ev, (g, ex)) in eig.eigenvalues.iter().zip(got.iter().zip(&expected)) {
            assert!(ev.re.abs() <= 1e-10);
            assert!((g - ex).abs() <= 1e-10);
        }
    }

    fn random_su4_model(seed: u64, gamma_scale: f64) -> LindbladModel {
        let mut rng = crate::testutil::simple_rng(seed);
        let gens = su4_generators();
        let hamiltonian_terms = gens
            .operators
            .iter()
            .map(|g| HamiltonianTerm { alpha: rng(), operator: g.clone() })
            .collect();
        let jump_channels = gens
            .operators
            .iter()
            .map(|g| JumpChannel {
                gamma: gamma_scale * 0.5 * (rng() + 1.0),
                operator: g.clone(),
            })
            .collect();
        LindbladModel { dim: 4, hamiltonian_terms, jump_channels, probe: None }
    }

    #[test]
    fn gap_scales_linearly_in_weak_dissipation() {
        let base = random_su4_model(9, 0.02);
        let mut doubled = base.clone();
        for ch in &mut doubled.jump_channels {
            ch.gamma *= 2.0;
        }
        let s1 = spectral_analysis(&base.vectorize_liouvillian(0.0), 4).unwrap();
        let s2 = spectral_analysis(&doubled.vectorize_liouvillian(0.0), 4).unwrap();
        let ratio = s2.gap.re / s1.gap.re;
        assert!((ratio - 2.0).abs() <= 0.1, "ratio = {ratio}");
    }

    #[test]
    fn spectral_evolution_recovers_initial_and_steady_states() {
        let model = random_su4_model(13, 0.02);
        let s = spectral_analysis(&model.vectorize_liouvillian(0.0), 4).unwrap();
        let mut rho0: CMat = Array2::zeros((4, 4));
        rho0[[0, 0]] = c(1.0, 0.0);
        let states = evolve_spectral(&s, &rho0, &[0.0, 50.0 * s.t_dc]);
        assert!(max_abs(&(&states[0] - &rho0)) <= 1e-8);
        assert!(max_abs(&(&states[1] - &s.steady_state)) <= 1e-6);
    }

    #[test]
    fn spectral_evolution_matches_rk4() {
        let model = random_su4_model(17, 0.02);
        let s = spectral_analysis(&model.vectorize_liouvillian(0.0), 4).unwrap();
        let mut rho0: CMat = Array2::zeros((4, 4));
        rho0[[0, 0]] = c(0.6, 0.0);
        rho0[[1, 1]] = c(0.4, 0.0);
        rho0[[0, 1]] = c(0.2, 0.1);
        rho0[[1, 0]] = c(0.2, -0.1);
        let times: Vec<f64> = (1..=200).map(|n| 10.0 * n as f64 / 200.0).collect();
        let plan = IntegrationPlan {
            t_start: 0.0,
            t_end: 10.0,
            observation_times: times.clone(),
            substeps_per_interval: 80,
            method: Method::Rk4,
        };
        let f = |rho: &CMat, t: f64| model.rhs(rho, t).unwrap();
        let rk = integrate(f, &rho0, &plan).unwrap();
        let sp = evolve_spectral(&s, &rho0, &times);
        let mut worst = 0.0f64;
        for (a, b) in rk.iter().zip(&sp) {
            worst = worst.max(max_abs(&(a - b)));
        }
        assert!(worst <= 1e-8, "max deviation {worst:.3e}");
    }

    #[test]
    fn degenerate_slow_modes_are_counted() {
        // dephasing: ε = {0, 0, −2γ, −2γ} — two undamped modes, a doubly
        // degenerate decaying mode
        let model = qubit_channel(0.5, pauli(3));
        let s = spectral_analysis(&model.vectorize_liouvillian(0.0), 2).unwrap();
        assert_eq!(s.undamped_multiplicity, 2);
        assert_eq!(s.slow_mode_multiplicity, 2);
        assert!((s.gap.re - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn projection_sums_to_state() {
        let model = random_su4_model(29, 0.03);
        let s = spectral_analysis(&model.vectorize_liouvillian(0.0), 4).unwrap();
        let lambda = s.project(&s.steady_state);
        // steady state projects onto the zero mode only
        for m in 1..lambda.len() {
            assert!(lambda[m].norm() <= 1e-8, "λ_{m} = {}", lambda[m]);
        }
    }

    #[test]
    fn sorted_descending_real_part() {
        let model = random_su4_model(31, 0.05);
        let s = spectral_analysis(&model.vectorize_liouvillian(0.0), 4).unwrap();
        for w in s.eigenvalues.windows(2) {
            assert!(w[0].re >= w[1].re - 1e-12);
        }
        let _ = array![0.0];
    }
}
