//! Interpretation-side machinery: preferred-context membership (commutation
//! plus degeneracy containment), pointer stability norms, dynamical-regime
//! classification, and the predictability sieve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{
    commutator_norm, cr, max_abs_entry, partial_trace_state, spectral_norm, Operator, PureState,
};
use crate::models::{CompositeHamiltonian, PointerObservable};

/// Default relative tolerance for commutator and degeneracy tests.
pub const DEFAULT_CONTEXT_TOL: f64 = 1e-9;

/// Outcome of the preferred-context membership test.
#[derive(Debug, Clone)]
pub struct ContextVerdict {
    pub commutes: bool,
    pub commutator_norm: f64,
    pub respects_degeneracy: bool,
    /// Index of the first eigenspace of H on which the observable fails to
    /// act as a scalar, if any.
    pub witness: Option<usize>,
    /// Absolute tolerance the test was run at.
    pub tolerance: f64,
}

impl ContextVerdict {
    /// Membership requires both clauses.
    pub fn is_member(&self) -> bool {
        self.commutes && self.respects_degeneracy
    }
}

/// Test whether `p` belongs to the preferred context of `h`: it must
/// commute with `h` and act as a scalar on every eigenspace of `h`
/// (degeneracy containment). `tol` is relative to max(‖P‖, ‖H‖).
pub fn check_preferred_context(p: &Operator, h: &Operator, tol: f64) -> Result<ContextVerdict> {
    if !p.is_hermitian() {
        return Err(Error::NotHermitian(crate::linalg::hermiticity_defect(p.matrix())));
    }
    if p.dim() != h.dim() {
        return Err(Error::DimensionMismatch(
            "observable and Hamiltonian dimensions differ".into(),
        ));
    }
    let scale = p.spectral_norm().max(h.spectral_norm()).max(1e-300);
    let tol_abs = tol * scale;
    let comm = commutator_norm(p, h)?;
    let commutes = comm <= tol_abs;

    let dec = h.spectral(h.default_group_tol()?)?;
    let n = h.dim();
    let identity = DMatrix::<C64>::identity(n, n);
    let mut witness = None;
    for (k, proj) in dec.projectors.iter().enumerate() {
        let rank = dec.multiplicities[k] as f64;
        let pp = proj * p.matrix();
        let mu = (proj * &pp).trace() / cr(rank);
        let inside = proj * &pp * proj - proj * mu;
        let outside = &pp * (&identity - proj);
        if spectral_norm(&inside) > tol_abs || spectral_norm(&outside) > tol_abs {
            witness = Some(k);
            break;
        }
    }
    Ok(ContextVerdict {
        commutes,
        commutator_norm: comm,
        respects_degeneracy: witness.is_none(),
        witness,
        tolerance: tol_abs,
    })
}

/// The three commutator norms behind the stability-condition reduction:
/// the full condition, the one with the environment self-term dropped,
/// and the environment term alone (identically zero for lifted pointers).
#[derive(Debug, Clone, Copy)]
pub struct StabilityNorms {
    pub norm_full: f64,
    pub norm_reduced: f64,
    pub norm_env: f64,
}

/// Commutator norms of a lifted pointer P = P_M⊗I_E against the composite
/// Hamiltonian and its parts.
pub fn pointer_stability(
    p: &PointerObservable,
    ch: &CompositeHamiltonian,
) -> Result<StabilityNorms> {
    let op = p.to_operator();
    if op.dim() != ch.assembled().dim() {
        return Err(Error::DimensionMismatch(
            "pointer and Hamiltonian act on different spaces".into(),
        ));
    }
    // Verify the lifted form by comparing against Tr_E(P)/dim(E) ⊗ I_E.
    let e_dim = ch.e_dim();
    let dims = vec![ch.m_dim(), e_dim];
    let reshaped = op.with_factor_dims(dims.clone())?;
    let (tr_e, _) = crate::linalg::partial_trace_matrix(reshaped.matrix(), &dims, &[0])?;
    let p_m = tr_e / cr(e_dim as f64);
    let rebuilt = p_m.kronecker(&DMatrix::<C64>::identity(e_dim, e_dim));
    if max_abs_entry(&(reshaped.matrix() - &rebuilt)) > 1e-10 {
        return Err(Error::InvalidInput(
            "pointer is not of the lifted form P_M ⊗ I_E".into(),
        ));
    }

    let h_full = ch.assembled();
    let h_env = ch.lifted_env();
    let reduced = Operator::new(
        ch.lifted_self().matrix() + ch.h_int().matrix() * cr(ch.lambda()),
        h_full.factor_dims().to_vec(),
    )?;
    let op_joint = op.with_factor_dims(h_full.factor_dims().to_vec())?;
    let norm_full = commutator_norm(&op_joint, h_full)?;
    let norm_env = commutator_norm(&op_joint, &h_env)?;
    let norm_reduced = commutator_norm(&op_joint, &reduced)?;

    let scale = op.spectral_norm() * h_full.spectral_norm();
    if (norm_full - norm_reduced).abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::InvariantBreach(format!(
            "full/reduced stability norms differ: {norm_full} vs {norm_reduced}"
        )));
    }
    Ok(StabilityNorms {
        norm_full,
        norm_reduced,
        norm_env,
    })
}

/// The three einselection regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Interaction Hamiltonian dominates; pointer basis from H_int.
    InteractionDominated,
    /// Neither part dominates.
    Interplay,
    /// Pointer self-Hamiltonian dominates; pointer basis from H_M.
    SelfDominated,
}

#[derive(Debug, Clone, Copy)]
pub struct RegimeReport {
    /// ‖H_M⊗I_E‖ / ‖λ·H_int‖ in spectral norms; infinite when the
    /// interaction vanishes.
    pub ratio: f64,
    pub regime: Regime,
    pub low: f64,
    pub high: f64,
}

/// Classify by the ratio of self-Hamiltonian to interaction strength.
pub fn classify_regime(ch: &CompositeHamiltonian, thresholds: (f64, f64)) -> Result<RegimeReport> {
    classify_norms(
        ch.h_m().spectral_norm(),
        ch.lambda().abs() * ch.h_int().spectral_norm(),
        thresholds,
    )
}

/// Classification from precomputed spectral norms ‖H_M‖ and ‖λ·H_int‖,
/// for models (large spin baths) whose norms are known analytically.
pub fn classify_norms(self_norm: f64, int_norm: f64, thresholds: (f64, f64)) -> Result<RegimeReport> {
    let (low, high) = thresholds;
    if !(0.0 < low && low < high) {
        return Err(Error::InvalidInput(format!(
            "thresholds must satisfy 0 < low < high, got ({low}, {high})"
        )));
    }
    if self_norm < 0.0 || int_norm < 0.0 {
        return Err(Error::InvalidInput("norms must be nonnegative".into()));
    }
    if self_norm == 0.0 && int_norm == 0.0 {
        return Err(Error::InvalidInput(
            "both the self-Hamiltonian and the interaction vanish; ratio undefined".into(),
        ));
    }
    let ratio = if int_norm == 0.0 {
        f64::INFINITY
    } else {
        self_norm / int_norm
    };
    let regime = if ratio < low {
        Regime::InteractionDominated
    } else if ratio > high {
        Regime::SelfDominated
    } else {
        Regime::Interplay
    };
    Ok(RegimeReport {
        ratio,
        regime,
        low,
        high,
    })
}

/// A candidate pointer basis for a qubit, given as a Bloch axis n̂(θ, φ);
/// the basis is the pair of eigenstates of n̂·σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAxis {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAxis {
    pub fn z() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn x() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }

    /// Orthonormal qubit basis {|n̂+⟩, |n̂-⟩}.
    pub fn basis(&self) -> [DVector<C64>; 2] {
        let half = self.theta / 2.0;
        let phase = C64::new(0.0, self.phi).exp();
        let plus = DVector::from_column_slice(&[cr(half.cos()), phase * half.sin()]);
        let minus = DVector::from_column_slice(&[cr(half.sin()), -phase * half.cos()]);
        [plus, minus]
    }

    /// Angle between the axis *line* and the z axis, folded into [0, π/2]
    /// (antipodal axes define the same basis).
    pub fn angle_from_z(&self) -> f64 {
        self.theta.cos().abs().acos()
    }

    /// Angular distance between two axis lines, in radians.
    pub fn line_angle_to(&self, other: &BlochAxis) -> f64 {
        let a = self.unit();
        let b = other.unit();
        let dot = (a.0 * b.0 + a.1 * b.1 + a.2 * b.2).abs().min(1.0);
        dot.acos()
    }

    fn unit(&self) -> (f64, f64, f64) {
        (
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }
}

/// Deterministic Fibonacci-sphere grid of `n` Bloch axes.
pub fn fibonacci_axes(n: usize) -> Vec<BlochAxis> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let theta = z.acos();
            let phi = (2.0 * std::f64::consts::PI * k as f64 / golden)
                .rem_euclid(2.0 * std::f64::consts::PI);
            BlochAxis { theta, phi }
        })
        .collect()
}

/// The default sieve candidate family: a Fibonacci grid plus the two
/// analytic axes (z: interaction eigenbasis, x: σ_x self-Hamiltonian).
pub fn default_candidates(grid_size: usize) -> Vec<BlochAxis> {
    let mut axes = fibonacci_axes(grid_size);
    axes.push(BlochAxis::z());
    axes.push(BlochAxis::x());
    axes
}

/// Ranking of candidate bases by accumulated purity loss at the probe time.
#[derive(Debug, Clone)]
pub struct SieveResult {
    pub candidates: Vec<BlochAxis>,
    /// Σ over the two basis states of [1 - Tr(ρ_M(t_probe)²)], one score
    /// per candidate.
    pub scores: Vec<f64>,
    /// Candidate indices sorted ascending by score; ties keep index order.
    pub ranking: Vec<usize>,
    pub t_probe: f64,
}

impl SieveResult {
    pub fn winner_index(&self) -> usize {
        self.ranking[0]
    }

    pub fn winner(&self) -> BlochAxis {
        self.candidates[self.winner_index()]
    }

    pub fn winner_score(&self) -> f64 {
        self.scores[self.winner_index()]
    }
}

/// Rank candidate pointer bases by how little their states entangle with
/// the environment up to `t_probe` (linear-entropy purity loss).
pub fn predictability_sieve(
    ch: &CompositeHamiltonian,
    candidates: &[BlochAxis],
    env0: &PureState,
    t_probe: f64,
) -> Result<SieveResult> {
    if ch.m_dim() != 2 {
        return Err(Error::InvalidInput(
            "sieve candidates are Bloch axes; pointer factor must be a qubit".into(),
        ));
    }
    if env0.dim() != ch.e_dim() {
        return Err(Error::DimensionMismatch(format!(
            "environment state dimension {} vs H_E dimension {}",
            env0.dim(),
            ch.e_dim()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate family".into()));
    }
    let prop = crate::evolution::Propagator::auto(ch.assembled())?;
    let joint_dims = ch.assembled().factor_dims().to_vec();
    let mut scores = Vec::with_capacity(candidates.len());
    for axis in candidates {
        let mut loss = 0.0;
        for state in axis.basis() {
            let pointer = PureState::new(state, vec![2])?;
            let psi0 = PureState::new_unchecked(
                pointer.amplitudes().kronecker(env0.amplitudes()),
                joint_dims.clone(),
            );
            let psi_t = prop.state_at(&psi0, t_probe)?;
            let rho_m = partial_trace_state(&psi_t, &[0])?;
            loss += (1.0 - rho_m.purity()).max(0.0);
        }
        scores.push(loss);
    }
    let mut ranking: Vec<usize> = (0..candidates.len()).collect();
    ranking.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok(SieveResult {
        candidates: candidates.to_vec(),
        scores,
        ranking,
        t_probe,
    })
}
