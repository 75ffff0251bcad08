//! Decoherence quantification: off-diagonal factors r_ij(t), diagonality in
//! a given basis, convergence of expectation values, decoherence times, and
//! the distance to the collapsed mixture.
//!
//! r_ij is implemented as the branch overlap ⟨e_j(t)|e_i(t)⟩. The sum form
//! Σ_l ⟨e_l|e_i⟩⟨e_j|e_l⟩ collapses to this overlap when expanded in any
//! orthonormal environment basis (completeness), so the overlap is what is
//! computed here.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::BranchSeries;
use crate::linalg::cr;
use crate::linalg::DensityOperator;
use crate::models::MeasurementModel;

/// Time series of decoherence diagnostics.
pub struct DecoherenceSeries {
    pub times: Vec<f64>,
    /// Model branch indices the r matrix refers to.
    pub branch_indices: Vec<usize>,
    /// r[j][(a,b)] = ⟨e_b(t_j)|e_a(t_j)⟩; diagonal identically 1.
    pub r: Vec<DMatrix<C64>>,
    pub purity: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub expectations: BTreeMap<String, Vec<f64>>,
}

impl DecoherenceSeries {
    /// max_{i≠j} |r_ij| at grid point `j`.
    pub fn max_offdiag_r(&self, j: usize) -> f64 {
        let m = &self.r[j];
        let n = m.nrows();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    worst = worst.max(m[(a, b)].norm());
                }
            }
        }
        worst
    }
}

/// Decoherence factors r_ij(t) = ⟨e_j(t)|e_i(t)⟩ from branch states.
pub fn decoherence_factors(branches: &BranchSeries) -> Result<DecoherenceSeries> {
    let nb = branches.branches.len();
    let mut r = Vec::with_capacity(branches.times.len());
    for j in 0..branches.times.len() {
        let mut m = DMatrix::zeros(nb, nb);
        for a in 0..nb {
            for b in 0..nb {
                let overlap = if a == b {
                    cr(1.0)
                } else {
                    branches.branches[b][j].dotc(&branches.branches[a][j])
                };
                if overlap.norm() > 1.0 + 1e-12 {
                    return Err(Error::InvariantBreach(format!(
                        "|r_{a}{b}| = {} exceeds 1",
                        overlap.norm()
                    )));
                }
                m[(a, b)] = overlap;
            }
        }
        r.push(m);
    }
    Ok(DecoherenceSeries {
        times: branches.times.clone(),
        branch_indices: branches.indices.clone(),
        r,
        purity: Vec::new(),
        offdiag: Vec::new(),
        expectations: BTreeMap::new(),
    })
}

/// ρ_r on S⊗M reconstructed from coefficients and branch overlaps:
/// ρ_r = Σ_ij c_i c_j* r_ij |a_i p_i⟩⟨a_j p_j|.
pub fn reduced_sm_from_overlaps(
    model: &MeasurementModel,
    branch_indices: &[usize],
    r: &DMatrix<C64>,
) -> Result<DensityOperator> {
    let ds = model.system_dim();
    let dp = model.pointer_dim();
    let c = model.coefficients();
    let mut m = DMatrix::zeros(ds * dp, ds * dp);
    for (a, &i) in branch_indices.iter().enumerate() {
        for (b, &j) in branch_indices.iter().enumerate() {
            let row = i * dp + i;
            let col = j * dp + j;
            m[(row, col)] = c[i] * c[j].conj() * r[(a, b)];
        }
    }
    DensityOperator::new_light(m, vec![ds, dp])
}

/// Off-diagonal Frobenius weight sqrt(Σ_{i≠j} |⟨b_i|ρ|b_j⟩|²) in the given
/// orthonormal basis.
pub fn off_diagonality(rho: &DensityOperator, basis: &[DVector<C64>]) -> Result<f64> {
    let n = rho.dim();
    if basis.len() != n {
        return Err(Error::InvalidInput(format!(
            "basis of {} vectors cannot span dimension {n}",
            basis.len()
        )));
    }
    for (a, va) in basis.iter().enumerate() {
        if va.len() != n {
            return Err(Error::DimensionMismatch("basis vector dimension".into()));
        }
        for (b, vb) in basis.iter().enumerate() {
            let g = va.dotc(vb);
            let expect = if a == b { 1.0 } else { 0.0 };
            if (g - cr(expect)).norm() > 1e-10 {
                return Err(Error::InvalidInput(format!(
                    "basis is not orthonormal: |⟨b_{a}|b_{b}⟩ - δ| = {:.3e}",
                    (g - cr(expect)).norm()
                )));
            }
        }
    }
    let mut acc = 0.0;
    for (a, va) in basis.iter().enumerate() {
        let col = rho.matrix() * va;
        for (b, vb) in basis.iter().enumerate() {
            if a != b {
                acc += vb.dotc(&col).norm_sqr();
            }
        }
    }
    Ok(acc.sqrt())
}

/// Smallest grid time at which max_{i≠j} |r_ij(t)| ≤ threshold; `None` if
/// the threshold is never reached on the grid.
pub fn decoherence_time(series: &DecoherenceSeries, threshold: f64) -> Result<Option<f64>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    for (j, &t) in series.times.iter().enumerate() {
        if series.max_offdiag_r(j) <= threshold {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// True iff max - min over the trailing `window` samples is within `tol`;
/// the settled value is the trailing-window mean.
pub fn convergence_check(series: &[f64], window: usize, tol: f64) -> Result<(bool, f64)> {
    if window == 0 || window > series.len() {
        return Err(Error::InvalidInput(format!(
            "window {window} invalid for series of length {}",
            series.len()
        )));
    }
    let tail = &series[series.len() - window..];
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &x in tail {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
    }
    Ok((hi - lo <= tol, sum / window as f64))
}

/// Trace distance ½‖ρ - σ‖₁.
pub fn compare_to_collapse(rho_r: &DensityOperator, rho_c: &DensityOperator) -> Result<f64> {
    if rho_r.dim() != rho_c.dim() {
        return Err(Error::DimensionMismatch(
            "trace distance of states with different dimensions".into(),
        ));
    }
    let diff = rho_r.matrix() - rho_c.matrix();
    let eig = nalgebra::SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

/// Computational product basis of the S⊗M space, the basis the correlated
/// states |a_i⟩⊗|p_i⟩ live in.
pub fn correlated_basis(model: &MeasurementModel) -> Vec<DVector<C64>> {
    let dim = model.system_dim() * model.pointer_dim();
    (0..dim)
        .map(|k| {
            let mut v = DVector::zeros(dim);
            v[k] = cr(1.0);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{branch_states, evolve, EvolutionPath, TimeGrid};
    use crate::linalg::{Operator, PureState};
    use crate::models::{MeasurementModel, SpinBath};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn equal_superposition_model(n_env: usize) -> MeasurementModel {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        MeasurementModel::qubit_with_uniform_bath(vec![c(s, 0.0), c(s, 0.0)], n_env).unwrap()
    }

    fn run_spin_bath(
        model: &MeasurementModel,
        couplings: Vec<f64>,
        grid: &TimeGrid,
    ) -> DecoherenceSeries {
        let n = couplings.len();
        let bath = SpinBath::new(couplings, vec![0.0; n], 0.0, crate::models::Axis::Z).unwrap();
        let ch = bath.hamiltonian(1.0).unwrap();
        let full_h = Operator::identity(vec![2]).tensor(ch.assembled());
        let traj = evolve(&full_h, &model.correlated_state(), grid, EvolutionPath::Auto).unwrap();
        decoherence_factors(&branch_states(&traj, model).unwrap()).unwrap()
    }

    #[test]
    fn r_is_one_at_t_zero_and_on_diagonal() {
        let model = equal_superposition_model(3);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let series = run_spin_bath(&model, vec![0.5, 0.8, 1.1], &grid);
        let r0 = &series.r[0];
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(r0[(a, b)].re, 1.0, epsilon = 1e-10);
                assert_abs_diff_eq!(r0[(a, b)].im, 0.0, epsilon = 1e-10);
            }
        }
        for m in &series.r {
            assert_eq!(m[(0, 0)], c(1.0, 0.0));
            assert_eq!(m[(1, 1)], c(1.0, 0.0));
            // Hermitian pairing r_ij = conj(r_ji).
            assert!((m[(0, 1)] - m[(1, 0)].conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn spin_bath_r_matches_cosine_product() {
        let couplings = vec![0.6, 0.9, 1.3, 0.4];
        let model = equal_superposition_model(couplings.len());
        let grid = TimeGrid::new(0.0, 2.0, 50).unwrap();
        let series = run_spin_bath(&model, couplings.clone(), &grid);
        for (j, &t) in series.times.iter().enumerate() {
            let analytic: f64 = couplings.iter().map(|g| (2.0 * g * t).cos()).product();
            assert_abs_diff_eq!(series.r[j][(0, 1)].norm(), analytic.abs(), epsilon = 1e-10);
        }
    }

    #[test]
    fn off_diagonality_cases() {
        // Diagonal ρ in its own basis → 0.
        let model = equal_superposition_model(1);
        let rho_c = model.collapsed_mixture();
        let basis = correlated_basis(&model);
        assert_abs_diff_eq!(off_diagonality(&rho_c, &basis).unwrap(), 0.0, epsilon = 1e-14);

        // (|0⟩+|1⟩)/√2 in the computational basis → 1/√2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureState::new(DVector::from_column_slice(&[c(s, 0.0), c(s, 0.0)]), vec![2])
            .unwrap()
            .to_density();
        let qubit_basis: Vec<DVector<C64>> = (0..2)
            .map(|k| {
                let mut v = DVector::zeros(2);
                v[k] = c(1.0, 0.0);
                v
            })
            .collect();
        assert_abs_diff_eq!(
            off_diagonality(&plus, &qubit_basis).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn off_diagonality_matches_coefficient_formula() {
        // off_diagonality(ρ_r, correlated basis) = sqrt(Σ_{i≠j} |c_i c_j r_ij|²).
        let couplings = vec![0.7, 1.1];
        let model = equal_superposition_model(couplings.len());
        let grid = TimeGrid::new(0.0, 1.2, 12).unwrap();
        let series = run_spin_bath(&model, couplings, &grid);
        let basis = correlated_basis(&model);
        let c = model.coefficients();
        for (j, r) in series.r.iter().enumerate() {
            let rho = reduced_sm_from_overlaps(&model, &series.branch_indices, r).unwrap();
            let measured = off_diagonality(&rho, &basis).unwrap();
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    if a != b {
                        acc += (c[a] * c[b].conj() * r[(a, b)]).norm_sqr();
                    }
                }
            }
            assert_abs_diff_eq!(measured, acc.sqrt(), epsilon = 1e-10);
            let _ = j;
        }
    }

    #[test]
    fn off_diagonality_rejects_skew_basis() {
        let model = equal_superposition_model(1);
        let rho = model.collapsed_mixture();
        let mut basis = correlated_basis(&model);
        basis[1] = (&basis[0] + &basis[1]) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert!(off_diagonality(&rho, &basis).is_err());
    }

    #[test]
    fn decoherence_time_arccos_case() {
        // Single coupling g: r(t) = cos(2gt); threshold 1/2 → t_D = π/(6g).
        let g = 0.8;
        let model = equal_superposition_model(1);
        let grid = TimeGrid::new(0.0, 2.0, 4000).unwrap();
        let series = run_spin_bath(&model, vec![g], &grid);
        let td = decoherence_time(&series, 0.5).unwrap().unwrap();
        let expect = std::f64::consts::PI / (6.0 * g);
        assert!((td - expect).abs() <= 2.0 * (2.0 / 4000.0));

        // Threshold 1 → t_start.
        let td1 = decoherence_time(&series, 1.0).unwrap().unwrap();
        assert_eq!(td1, 0.0);
    }

    #[test]
    fn decoherence_time_exists_before_revival_for_spread_couplings() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
        let couplings: Vec<f64> = (0..12).map(|_| 0.5 + rng.random::<f64>()).collect();
        // Analytic product formula on a fine grid.
        let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
        let mut td = None;
        for &t in &grid.times() {
            let r: f64 = couplings.iter().map(|g| (2.0 * g * t).cos()).product();
            if r.abs() <= 0.01 {
                td = Some(t);
                break;
            }
        }
        assert!(td.is_some(), "threshold never reached on the grid");
        assert!(td.unwrap() < 2.0, "decoherence should precede any revival");
    }

    #[test]
    fn convergence_check_cases() {
        let constant = vec![0.7; 50];
        let (ok, val) = convergence_check(&constant, 10, 1e-12).unwrap();
        assert!(ok);
        assert_abs_diff_eq!(val, 0.7, epsilon = 1e-12);

        // Cosine with window shorter than its period: not converged.
        let cosine: Vec<f64> = (0..100)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / 100.0).cos())
            .collect();
        let (ok, _) = convergence_check(&cosine, 30, 0.02).unwrap();
        assert!(!ok);

        assert!(convergence_check(&constant, 0, 0.1).is_err());
        assert!(convergence_check(&constant, 51, 0.1).is_err());
    }

    #[test]
    fn trace_distance_cases() {
        let model = equal_superposition_model(1);
        let rho_c = model.collapsed_mixture();
        assert_abs_diff_eq!(compare_to_collapse(&rho_c, &rho_c).unwrap(), 0.0, epsilon = 1e-14);

        // Pure |+⟩⟨+| vs dephased I/2 → 1/2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureState::new(DVector::from_column_slice(&[c(s, 0.0), c(s, 0.0)]), vec![2])
            .unwrap()
            .to_density();
        let mixed = DensityOperator::new(DMatrix::identity(2, 2) * c(0.5, 0.0), vec![2]).unwrap();
        assert_abs_diff_eq!(compare_to_collapse(&plus, &mixed).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_bounded_by_offdiagonal_weight() {
        let couplings = vec![0.9, 1.4, 0.7, 1.1, 0.6];
        let model = equal_superposition_model(couplings.len());
        let grid = TimeGrid::new(0.0, 2.5, 200).unwrap();
        let series = run_spin_bath(&model, couplings, &grid);
        let rho_c = model.collapsed_mixture();
        let c = model.coefficients();
        for (j, r) in series.r.iter().enumerate() {
            let rho = reduced_sm_from_overlaps(&model, &series.branch_indices, r).unwrap();
            let dist = compare_to_collapse(&rho, &rho_c).unwrap();
            let mut bound = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    if a != b {
                        bound += (c[a] * c[b].conj() * r[(a, b)]).norm();
                    }
                }
            }
            assert!(
                dist <= bound + 1e-10,
                "t index {j}: distance {dist} exceeds bound {bound}"
            );
        }
    }
}
