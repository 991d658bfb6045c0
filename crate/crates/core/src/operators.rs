//! Operator families: SU(4) generators, spin matrices, Pauli strings
//! embedded on a chain, and the gauge/phase transformations that leave the
//! Lindblad dynamics invariant.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{c, dagger, eye, hermiticity_defect, kron, pauli, trace, CMat};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operator `{label}` is not Hermitian (defect {defect:.3e})")]
    NotHermitian { label: String, defect: f64 },
    #[error("operator `{label}` is not traceless (|Tr| = {tr:.3e})")]
    NotTraceless { label: String, tr: f64 },
    #[error("operators `{a}`/`{b}` violate orthogonality Tr[g_a g_b] = {norm}·δ (got {got:.3e})")]
    NotOrthogonal { a: String, b: String, norm: f64, got: f64 },
    #[error("site index {site} out of range for chain of length {len}")]
    SiteOutOfRange { site: usize, len: usize },
}

/// Signed-permutation representation of an operator: `M |i⟩ = coef[i] |perm[i]⟩`.
///
/// Every Pauli string on a qubit register has this form, which makes
/// left/right multiplication and conjugation O(d²) instead of O(d³).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPerm {
    pub perm: Vec<usize>,
    pub coef: Vec<C64>,
}

impl SignedPerm {
    pub fn identity(dim: usize) -> Self {
        SignedPerm { perm: (0..dim).collect(), coef: vec![c(1.0, 0.0); dim] }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Composition `self · other` as operators (apply `other` first).
    pub fn compose(&self, other: &SignedPerm) -> SignedPerm {
        let d = self.dim();
        let mut perm = vec![0; d];
        let mut coef = vec![c(0.0, 0.0); d];
        for i in 0..d {
            let j = other.perm[i];
            perm[i] = self.perm[j];
            coef[i] = other.coef[i] * self.coef[j];
        }
        SignedPerm { perm, coef }
    }

    pub fn to_dense(&self) -> CMat {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            m[[self.perm[i], i]] = self.coef[i];
        }
        m
    }

    /// Single-site Pauli embedded at `site` in a chain of `len` qubits,
    /// site 0 being the leftmost Kronecker factor.
    pub fn single_site(pauli_idx: usize, site: usize, len: usize) -> Self {
        let d = 1 << len;
        // leftmost factor owns the most significant bit
        let bit = len - 1 - site;
        let mut perm = vec![0; d];
        let mut coef = vec![c(0.0, 0.0); d];
        for i in 0..d {
            let b = (i >> bit) & 1;
            let (j, w) = match pauli_idx {
                0 => (i, c(1.0, 0.0)),
                1 => (i ^ (1 << bit), c(1.0, 0.0)),
                2 => (i ^ (1 << bit), if b == 0 { c(0.0, 1.0) } else { c(0.0, -1.0) }),
                3 => (i, if b == 0 { c(1.0, 0.0) } else { c(-1.0, 0.0) }),
                _ => panic!("pauli index must be 0..=3"),
            };
            perm[i] = j;
            coef[i] = w;
        }
        SignedPerm { perm, coef }
    }

    /// Multi-site Pauli string: `assignment[site]` gives the Pauli index
    /// (0 = identity) on each site.
    pub fn pauli_string(assignment: &[usize]) -> Self {
        let len = assignment.len();
        let mut op = SignedPerm::identity(1 << len);
        for (site, &p) in assignment.iter().enumerate() {
            if p != 0 {
                op = op.compose(&SignedPerm::single_site(p, site, len));
            }
        }
        op
    }

    /// Whether `self` equals its own conjugate transpose.
    pub fn is_hermitian(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| {
            let j = self.perm[i];
            (self.coef[j].conj() - self.coef[i]).norm() < 1e-14 && self.perm[j] == i
        })
    }
}

/// A labeled operator with a dense matrix and, when the operator is a
/// Pauli string, its signed-permutation form for fast application.
#[derive(Debug, Clone)]
pub struct Operator {
    pub label: String,
    pub matrix: CMat,
    pub perm: Option<SignedPerm>,
}

impl Operator {
    pub fn dense(label: impl Into<String>, matrix: CMat) -> Self {
        Operator { label: label.into(), matrix, perm: None }
    }

    pub fn from_perm(label: impl Into<String>, perm: SignedPerm) -> Self {
        Operator { label: label.into(), matrix: perm.to_dense(), perm: Some(perm) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Ordered list of Hermitian operators forming a validated basis.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    pub label: String,
    pub dim: usize,
    pub operators: Vec<Operator>,
    /// Orthogonality normalization: Tr[g_μ g_ν] = norm · δ_μν.
    pub norm: f64,
}

impl OperatorBasis {
    /// Checks Hermiticity (1e-12), tracelessness (1e-12) and pairwise
    /// orthogonality Tr[g_μ g_ν] = norm·δ_μν (1e-10).
    pub fn validate(&self) -> Result<(), OperatorError> {
        for op in &self.operators {
            let defect = hermiticity_defect(&op.matrix);
            if defect > 1e-12 {
                return Err(OperatorError::NotHermitian { label: op.label.clone(), defect });
            }
            let tr = trace(&op.matrix).norm();
            if tr > 1e-12 {
                return Err(OperatorError::NotTraceless { label: op.label.clone(), tr });
            }
        }
        for (a, oa) in self.operators.iter().enumerate() {
            for (b, ob) in self.operators.iter().enumerate() {
                let got = trace(&oa.matrix.dot(&ob.matrix));
                let expect = if a == b { self.norm } else { 0.0 };
                if (got - c(expect, 0.0)).norm() > 1e-10 {
                    return Err(OperatorError::NotOrthogonal {
                        a: oa.label.clone(),
                        b: ob.label.clone(),
                        norm: self.norm,
                        got: got.re,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The 15 Hermitian SU(4) generators in the fundamental representation,
/// ordered g_1 … g_15, normalized to Tr[g_μ g_ν] = 2δ_μν.
pub fn su4_generators() -> OperatorBasis {
    fn sym(i: usize, j: usize) -> CMat {
        let mut m: CMat = Array2::zeros((4, 4));
        m[[i, j]] = c(1.0, 0.0);
        m[[j, i]] = c(1.0, 0.0);
        m
    }
    fn asym(i: usize, j: usize) -> CMat {
        let mut m: CMat = Array2::zeros((4, 4));
        m[[i, j]] = c(0.0, -1.0);
        m[[j, i]] = c(0.0, 1.0);
        m
    }
    fn diag(entries: [f64; 4], scale: f64) -> CMat {
        let mut m: CMat = Array2::zeros((4, 4));
        for (k, e) in entries.iter().enumerate() {
            m[[k, k]] = c(e * scale, 0.0);
        }
        m
    }
    let mats = [
        sym(0, 1),
        asym(0, 1),
        diag([1.0, -1.0, 0.0, 0.0], 1.0),
        sym(0, 2),
        asym(0, 2),
        sym(1, 2),
        asym(1, 2),
        diag([1.0, 1.0, -2.0, 0.0], 1.0 / 3f64.sqrt()),
        sym(0, 3),
        asym(0, 3),
        sym(1, 3),
        asym(1, 3),
        sym(2, 3),
        asym(2, 3),
        diag([1.0, 1.0, 1.0, -3.0], 1.0 / 6f64.sqrt()),
    ];
    let ops = mats
        .into_iter()
        .enumerate()
        .map(|(k, m)| Operator::dense(format!("g{}", k + 1), m))
        .collect();
    OperatorBasis { label: "su4".into(), dim: 4, operators: ops, norm: 2.0 }
}

/// Standard angular-momentum matrices {S_x, S_y, S_z} for spin S =
/// `two_s`/2, in the |S, m⟩ basis ordered m = S … −S.
pub fn spin_matrices(two_s: u32) -> [CMat; 3] {
    let dim = (two_s + 1) as usize;
    let s = two_s as f64 / 2.0;
    let m_of = |k: usize| s - k as f64;
    let mut sp: CMat = Array2::zeros((dim, dim)); // raising operator S+
    for k in 1..dim {
        let m = m_of(k);
        sp[[k - 1, k]] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = dagger(&sp);
    let sx = (&sp + &sm).mapv(|z| z * c(0.5, 0.0));
    let sy = (&sp - &sm).mapv(|z| z * c(0.0, -0.5));
    let sz = Array2::from_shape_fn((dim, dim), |(i, j)| {
        if i == j { c(m_of(i), 0.0) } else { c(0.0, 0.0) }
    });
    [sx, sy, sz]
}

/// Kronecker embedding of per-site Pauli assignments into the full
/// 2^L-dimensional chain space; site 0 is the leftmost factor.
pub fn embed_chain_operator(assignment: &[usize], chain_len: usize) -> Result<CMat, OperatorError> {
    if assignment.len() != chain_len {
        return Err(OperatorError::SiteOutOfRange { site: assignment.len(), len: chain_len });
    }
    let mut m = eye(1);
    for &p in assignment {
        m = kron(&m, &pauli(p));
    }
    Ok(m)
}

/// Total-spin operator S_μ = Σ_i σ_μ^i for a chain of `chain_len` qubits
/// (`mu` ∈ {1, 2, 3} for x, y, z).
pub fn total_spin(mu: usize, chain_len: usize) -> CMat {
    let d = 1 << chain_len;
    let mut m = Array2::zeros((d, d));
    for site in 0..chain_len {
        m = m + SignedPerm::single_site(mu, site, chain_len).to_dense();
    }
    m
}

/// One-body Pauli basis for a chain: σ_μ^i for every site i and μ ∈
/// {x,y,z}, site-major. Labels are 1-based to match the usual notation.
pub fn chain_one_body(chain_len: usize) -> Vec<Operator> {
    let mus = ["x", "y", "z"];
    let mut ops = Vec::new();
    for site in 0..chain_len {
        for (mi, mu) in mus.iter().enumerate() {
            let sp = SignedPerm::single_site(mi + 1, site, chain_len);
            ops.push(Operator::from_perm(format!("s{}^{}", mu, site + 1), sp));
        }
    }
    ops
}

/// Two-body nearest-neighbor Pauli basis σ_μ^i σ_ν^{i+1}, bond-major with
/// (μ,ν) in row-major 3x3 order; the last bond wraps periodically.
pub fn chain_two_body(chain_len: usize) -> Vec<Operator> {
    let mus = ["x", "y", "z"];
    let mut ops = Vec::new();
    for site in 0..chain_len {
        let next = (site + 1) % chain_len;
        for (mi, mu) in mus.iter().enumerate() {
            for (ni, nu) in mus.iter().enumerate() {
                let mut assignment = vec![0; chain_len];
                assignment[site] = mi + 1;
                assignment[next] = ni + 1;
                let sp = SignedPerm::pauli_string(&assignment);
                ops.push(Operator::from_perm(
                    format!("s{}^{} s{}^{}", mu, site + 1, nu, next + 1),
                    sp,
                ));
            }
        }
    }
    ops
}

/// Removes the trace of a jump operator and absorbs it into the
/// Hamiltonian, leaving the Lindblad right-hand side unchanged:
/// `J' = J − (Tr J / d)·I`, `H' = H + (i/2)[a* J − (a* J)†]` with
/// `a = Tr J / d`.
pub fn gauge_fix(j: &CMat, h: &CMat) -> (CMat, CMat) {
    let d = j.nrows();
    let a = trace(j) / c(d as f64, 0.0);
    let j_new = j - &eye(d).mapv(|z| z * a);
    let aj = j.mapv(|z| z * a.conj());
    let correction = (&aj - &dagger(&aj)).mapv(|z| z * c(0.0, 0.5));
    let h_new = h + &correction;
    (j_new, h_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, frobenius_inner, max_abs};

    #[test]
    fn su4_printed_matrices() {
        let basis = su4_generators();
        assert_eq!(basis.operators.len(), 15);
        let g3 = &basis.operators[2].matrix;
        assert_eq!(g3[[0, 0]], c(1.0, 0.0));
        assert_eq!(g3[[1, 1]], c(-1.0, 0.0));
        assert_eq!(g3[[2, 2]], c(0.0, 0.0));
        let g8 = &basis.operators[7].matrix;
        let r3 = 1.0 / 3f64.sqrt();
        assert!((g8[[0, 0]] - c(r3, 0.0)).norm() < 1e-15);
        assert!((g8[[2, 2]] - c(-2.0 * r3, 0.0)).norm() < 1e-15);
        assert_eq!(g8[[3, 3]], c(0.0, 0.0));
        let g2 = &basis.operators[1].matrix;
        assert_eq!(g2[[0, 1]], c(0.0, -1.0));
        assert_eq!(g2[[1, 0]], c(0.0, 1.0));
    }

    #[test]
    fn su4_orthogonality_all_pairs() {
        let basis = su4_generators();
        basis.validate().expect("Tr[g_mu g_nu] = 2 delta for all 225 pairs");
    }

    #[test]
    fn spin_32_matrices() {
        let [sx, _, sz] = spin_matrices(3);
        assert_eq!(sz[[0, 0]], c(1.5, 0.0));
        assert_eq!(sz[[1, 1]], c(0.5, 0.0));
        assert_eq!(sz[[2, 2]], c(-0.5, 0.0));
        assert_eq!(sz[[3, 3]], c(-1.5, 0.0));
        assert!((sx[[0, 1]] - c(3f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn spin_commutation_relations() {
        for two_s in [1u32, 3] {
            let [sx, sy, sz] = spin_matrices(two_s);
            let lhs = commutator(&sx, &sy);
            let rhs = sz.mapv(|z| z * c(0.0, 1.0));
            assert!(max_abs(&(&lhs - &rhs)) < 1e-12);
        }
    }

    #[test]
    fn embed_identity() {
        let m = embed_chain_operator(&[0, 0, 0], 3).unwrap();
        assert!(max_abs(&(&m - &eye(8))) == 0.0);
    }

    #[test]
    fn embed_sz_on_all_up() {
        // |↑…↑⟩ is the first basis vector
        for site in 0..4 {
            let mut assignment = vec![0; 4];
            assignment[site] = 3;
            let m = embed_chain_operator(&assignment, 4).unwrap();
            assert_eq!(m[[0, 0]], c(1.0, 0.0));
        }
    }

    #[test]
    fn embed_two_site_xx() {
        let m = embed_chain_operator(&[1, 1], 2).unwrap();
        let k = kron(&pauli(1), &pauli(1));
        assert!(max_abs(&(&m - &k)) == 0.0);
        assert_eq!(m[[0, 3]], c(1.0, 0.0));
    }

    #[test]
    fn signed_perm_matches_dense_kron() {
        // exhaustively check all 16 two-site strings against dense kron
        for a in 0..4 {
            for b in 0..4 {
                let sp = SignedPerm::pauli_string(&[a, b]);
                let dense = kron(&pauli(a), &pauli(b));
                assert!(max_abs(&(&sp.to_dense() - &dense)) < 1e-15, "string ({a},{b})");
                assert!(sp.is_hermitian());
            }
        }
    }

    #[test]
    fn chain_bases_validate() {
        let len = 3;
        let one = chain_one_body(len);
        let two = chain_two_body(len);
        let d = 1 << len;
        let all: Vec<Operator> = one.into_iter().chain(two).collect();
        let basis = OperatorBasis { label: "chain".into(), dim: d, operators: all, norm: d as f64 };
        basis.validate().unwrap();
    }

    #[test]
    fn disjoint_sites_commute() {
        let a = SignedPerm::single_site(1, 0, 3).to_dense();
        let b = SignedPerm::single_site(2, 2, 3).to_dense();
        assert!(max_abs(&commutator(&a, &b)) <= 1e-14);
    }

    #[test]
    fn gauge_fix_traceless_unchanged() {
        let j = pauli(3);
        let h = pauli(1);
        let (j2, h2) = gauge_fix(&j, &h);
        assert!(max_abs(&(&j2 - &j)) < 1e-15);
        assert!(max_abs(&(&h2 - &h)) < 1e-15);
    }

    #[test]
    fn gauge_fix_subtracts_trace() {
        let j = &pauli(3) + &eye(2);
        let (j2, _) = gauge_fix(&j, &pauli(1));
        assert!(max_abs(&(&j2 - &pauli(3))) < 1e-15);
    }

    #[test]
    fn total_spin_is_sum() {
        let s = total_spin(1, 2);
        let expect = kron(&pauli(1), &pauli(0)) + kron(&pauli(0), &pauli(1));
        assert!(max_abs(&(&s - &expect)) < 1e-15);
    }

    #[test]
    fn su4_frobenius_self_norm() {
        let basis = su4_generators();
        for op in &basis.operators {
            let n = frobenius_inner(&op.matrix, &op.matrix);
            assert!((n - c(2.0, 0.0)).norm() < 1e-12);
        }
    }
}
