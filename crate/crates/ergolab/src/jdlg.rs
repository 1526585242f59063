//! Jacobs-deLeeuw-Glicksberg splitting into reversible and stable parts,
//! with empirical diagnostics for the vanishing-absolute-mean property that
//! characterizes the stable part.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::function::{Basis, FunctionVector, NormKind};
use crate::kahan::KahanF64;
use crate::linalg::{self, CMat};
use crate::operator::{Kind, Operator};
use crate::series::{validate_checkpoints, CesaroSeries, SeriesValue};

/// Splitting of a power-bounded operator's space into the span of unimodular
/// eigenvectors (reversible) and its spectral complement (stable).
#[derive(Clone, Debug)]
pub struct JdlgDecomposition {
    basis: Basis,
    reversible_pairs: Vec<(Complex64, FunctionVector)>,
    p_r: CMat,
    p_s: CMat,
    tol_unimodular: f64,
}

impl JdlgDecomposition {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn reversible_pairs(&self) -> &[(Complex64, FunctionVector)] {
        &self.reversible_pairs
    }

    pub fn reversible_projector(&self) -> &CMat {
        &self.p_r
    }

    pub fn stable_projector(&self) -> &CMat {
        &self.p_s
    }

    pub fn tol_unimodular(&self) -> f64 {
        self.tol_unimodular
    }

    pub fn reversible_dim(&self) -> usize {
        self.reversible_pairs.len()
    }

    pub fn stable_dim(&self) -> usize {
        self.basis.len() - self.reversible_pairs.len()
    }

    pub fn project_reversible(&self, f: &FunctionVector) -> Result<FunctionVector> {
        self.check_basis(f)?;
        FunctionVector::new(self.basis, linalg::matvec(&self.p_r, f.coeffs()))
    }

    pub fn project_stable(&self, f: &FunctionVector) -> Result<FunctionVector> {
        self.check_basis(f)?;
        FunctionVector::new(self.basis, linalg::matvec(&self.p_s, f.coeffs()))
    }

    fn check_basis(&self, f: &FunctionVector) -> Result<()> {
        if f.basis() != self.basis {
            return Err(Error::Dimension(format!(
                "decomposition on {} applied to vector on {}",
                self.basis.describe(),
                f.basis().describe()
            )));
        }
        Ok(())
    }
}

/// Decomposes a power-bounded operator. Eigenvalues with |lambda| within
/// `tol_unimodular` of 1 are reversible; the rest must be strictly inside the
/// unit disc for the operator to be power-bounded.
pub fn decompose(t: &Operator, tol_unimodular: f64) -> Result<JdlgDecomposition> {
    let basis = t.basis();
    let dim = basis.len();
    match t.kind() {
        Kind::DiagonalSpectral { mu } => {
            let radius = mu.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if radius > 1.0 + tol_unimodular {
                return Err(Error::NotPowerBounded(format!(
                    "diagonal spectral radius {radius}"
                )));
            }
            let cutoff = dim / 2;
            let mut pairs = Vec::new();
            let mut p_r = CMat::zeros((dim, dim));
            let mut p_s = linalg::identity(dim);
            for (i, lam) in mu.iter().enumerate() {
                if (lam.norm() - 1.0).abs() < tol_unimodular {
                    pairs.push((*lam, FunctionVector::mode(cutoff, i as i64 - cutoff as i64)?));
                    p_r[(i, i)] = Complex64::new(1.0, 0.0);
                    p_s[(i, i)] = Complex64::new(0.0, 0.0);
                }
            }
            Ok(JdlgDecomposition {
                basis,
                reversible_pairs: pairs,
                p_r,
                p_s,
                tol_unimodular,
            })
        }
        Kind::GridPermutation { cycles, .. } => {
            // Permutation matrices are unitary: the spectrum is entirely
            // unimodular. Per cycle (g_0 .. g_{L-1}) the vectors
            // v(g_t) = exp(2 pi i j t / L), scaled by sqrt(G/L) to unit grid
            // L2 norm, satisfy T v = exp(2 pi i j / L) v.
            let g = dim as f64;
            let mut pairs = Vec::new();
            for cyc in cycles {
                let l = cyc.len();
                let scale = (g / l as f64).sqrt();
                for j in 0..l {
                    let lam = crate::function::unit_phase(j as f64 / l as f64);
                    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
                    for (tstep, &gpt) in cyc.iter().enumerate() {
                        coeffs[gpt] = crate::function::unit_phase(
                            (j * tstep % l) as f64 / l as f64,
                        ) * scale;
                    }
                    pairs.push((lam, FunctionVector::new(basis, coeffs)?));
                }
            }
            Ok(JdlgDecomposition {
                basis,
                reversible_pairs: pairs,
                p_r: linalg::identity(dim),
                p_s: CMat::zeros((dim, dim)),
                tol_unimodular,
            })
        }
        Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => {
            let (w, v) = linalg::eig_pairs(matrix)?;
            let radius = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if radius > 1.0 + tol_unimodular.max(1e-9) {
                return Err(Error::NotPowerBounded(format!(
                    "dense spectral radius {radius}"
                )));
            }
            let select: Vec<bool> = w
                .iter()
                .map(|lam| (lam.norm() - 1.0).abs() < tol_unimodular)
                .collect();
            let k = select.iter().filter(|&&s| s).count();
            let p_r = if k == 0 {
                CMat::zeros((dim, dim))
            } else if k == dim {
                linalg::identity(dim)
            } else {
                linalg::spectral_projector(
                    matrix,
                    |lam| (lam.norm() - 1.0).abs() < tol_unimodular,
                    1e8,
                )?
            };
            let p_s = linalg::identity(dim) - &p_r;
            let mut pairs = Vec::new();
            for i in 0..dim {
                if select[i] {
                    let col: Vec<Complex64> = v.column(i).to_vec();
                    let f = FunctionVector::new(basis, col)?;
                    let nrm = f.norm(NormKind::L2);
                    pairs.push((w[i], f.scale(Complex64::new(1.0 / nrm, 0.0))));
                }
            }
            Ok(JdlgDecomposition {
                basis,
                reversible_pairs: pairs,
                p_r,
                p_s,
                tol_unimodular,
            })
        }
    }
}

/// The running absolute Cesàro mean (1/N') sum_{n<=N'} |<T^n f, phi>| at each
/// checkpoint: the empirical test for membership of the orbit functionals in
/// the vanishing-mean sequence class.
pub fn stability_curve(
    t: &Operator,
    f: &FunctionVector,
    phi: &FunctionVector,
    n: u64,
    checkpoints: &[u64],
) -> Result<CesaroSeries> {
    validate_checkpoints(checkpoints, n)?;
    let mut acc = KahanF64::new();
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    let mut orbit = f.clone();
    for step in 1..=*checkpoints.last().unwrap() {
        orbit = t.apply(&orbit)?;
        acc.add(orbit.inner(phi)?.norm());
        while next < checkpoints.len() && checkpoints[next] == step {
            values.push(SeriesValue::Scalar(Complex64::new(
                acc.value() / step as f64,
                0.0,
            )));
            next += 1;
        }
    }
    CesaroSeries::new(checkpoints.to_vec(), values)
}

/// Fraction of the first `n` entries exceeding `delta` in modulus; a value
/// near 0 witnesses density-one convergence to zero.
pub fn density_one_fraction(values: &[f64], delta: f64, n: usize) -> f64 {
    let n = n.min(values.len());
    if n == 0 {
        return 0.0;
    }
    values[..n].iter().filter(|&&a| a.abs() > delta).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::geometric_checkpoints;
    use approx::assert_abs_diff_eq;

    fn alpha() -> f64 {
        std::f64::consts::SQRT_2 - 1.0
    }

    /// 2x2 block diag(exp(2 pi i alpha), 0.3): hand oracle has reversible
    /// part = first coordinate, stable part = second.
    fn block_op() -> Operator {
        let m = linalg::from_rows(vec![
            vec![
                crate::function::unit_phase(alpha()),
                Complex64::new(0.0, 0.0),
            ],
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0)],
        ])
        .unwrap();
        Operator::dense_spatial(m).unwrap()
    }

    #[test]
    fn permutation_stable_projector_is_zero() {
        let t = Operator::multiplier_permutation(7, 3).unwrap();
        let d = decompose(&t, 1e-9).unwrap();
        assert_eq!(d.reversible_dim(), 7);
        assert!(linalg::max_abs(d.stable_projector()) < 1e-12);
        let mut rng = crate::rng::substream(20, "jdlg-perm");
        let f = crate::rng::random_function(t.basis(), &mut rng);
        let pr = d.project_reversible(&f).unwrap();
        let err = pr
            .sub(&f)
            .unwrap()
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn permutation_eigenpairs_satisfy_eigen_relation() {
        let t = Operator::multiplier_permutation(101, 2).unwrap();
        let d = decompose(&t, 1e-9).unwrap();
        for (lam, v) in d.reversible_pairs() {
            let tv = t.apply(v).unwrap();
            let lv = v.scale(*lam);
            let err = tv
                .sub(&lv)
                .unwrap()
                .coeffs()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
            assert_abs_diff_eq!(v.norm(NormKind::L2), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn contractive_diagonal_has_zero_reversible_projector() {
        let t = Operator::diagonal_spectral(2, vec![Complex64::new(0.5, 0.0); 5]).unwrap();
        let d = decompose(&t, 1e-9).unwrap();
        assert_eq!(d.reversible_dim(), 0);
        assert!(linalg::max_abs(d.reversible_projector()) < 1e-12);
    }

    #[test]
    fn block_operator_splits_coordinates() {
        let d = decompose(&block_op(), 1e-9).unwrap();
        assert_eq!(d.reversible_dim(), 1);
        let mut rng = crate::rng::substream(21, "jdlg-block");
        let f = crate::rng::random_function(Basis::Grid { size: 2 }, &mut rng);
        let pr = d.project_reversible(&f).unwrap();
        let ps = d.project_stable(&f).unwrap();
        // hand oracle: the matrix is diagonal, so projections pick coordinates
        assert!((pr.coeffs()[0] - f.coeffs()[0]).norm() < 1e-10);
        assert!(pr.coeffs()[1].norm() < 1e-10);
        assert!((ps.coeffs()[1] - f.coeffs()[1]).norm() < 1e-10);
        assert!(ps.coeffs()[0].norm() < 1e-10);
        let sum = pr.add(&ps).unwrap();
        let err = sum
            .sub(&f)
            .unwrap()
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn projectors_are_idempotent_complementary_and_commute_with_t() {
        let mut rng = crate::rng::substream(22, "jdlg-props");
        let t = Operator::doubly_stochastic(6, &mut rng);
        let d = decompose(&t, 1e-9).unwrap();
        let pr = d.reversible_projector();
        let ps = d.stable_projector();
        assert!(linalg::max_abs(&(pr.dot(pr) - pr)) < 1e-9);
        assert!(linalg::max_abs(&(ps.dot(ps) - ps)) < 1e-9);
        assert!(linalg::max_abs(&pr.dot(ps)) < 1e-9);
        let sum = pr + ps;
        assert!(linalg::max_abs(&(sum - linalg::identity(6))) < 1e-9);
        let tm = t.matrix();
        assert!(linalg::max_abs(&(pr.dot(&tm) - tm.dot(pr))) < 1e-8);
    }

    #[test]
    fn non_power_bounded_is_rejected() {
        let m = linalg::identity(3).mapv(|c| c * Complex64::new(1.1, 0.0));
        let t = Operator::dense_spatial(m).unwrap();
        assert!(matches!(
            decompose(&t, 1e-9),
            Err(Error::NotPowerBounded(_))
        ));
    }

    #[test]
    fn eigenvector_projects_to_itself() {
        let d = decompose(&block_op(), 1e-9).unwrap();
        let (_, v) = d.reversible_pairs()[0].clone();
        let pv = d.project_reversible(&v).unwrap();
        let err = pv
            .sub(&v)
            .unwrap()
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn stability_curve_constant_on_fixed_vector() {
        // f an eigenvector with eigenvalue 1, phi = f: a_n = ||f||_2^2
        let t = Operator::identity(Basis::Grid { size: 5 });
        let mut rng = crate::rng::substream(23, "curve-const");
        let f = crate::rng::random_function(Basis::Grid { size: 5 }, &mut rng);
        let expected = f.norm(NormKind::L2).powi(2);
        let curve = stability_curve(&t, &f, &f, 64, &geometric_checkpoints(64)).unwrap();
        for v in curve.values() {
            let SeriesValue::Scalar(s) = v else { unreachable!() };
            assert_abs_diff_eq!(s.re, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn stability_curve_geometric_decay_bound() {
        // T = 0.5 I: (1/N') sum 0.5^n |<f,phi>| <= |<f,phi>| / N'
        let m = linalg::identity(4).mapv(|c| c * Complex64::new(0.5, 0.0));
        let t = Operator::dense_spatial(m).unwrap();
        let mut rng = crate::rng::substream(24, "curve-geom");
        let f = crate::rng::random_function(Basis::Grid { size: 4 }, &mut rng);
        let phi = crate::rng::random_function(Basis::Grid { size: 4 }, &mut rng);
        let pairing = f.inner(&phi).unwrap().norm();
        let cps = geometric_checkpoints(1000);
        let curve = stability_curve(&t, &f, &phi, 1000, &cps).unwrap();
        for (cp, v) in cps.iter().zip(curve.values()) {
            let SeriesValue::Scalar(s) = v else { unreachable!() };
            assert!(s.re <= pairing / *cp as f64 + 1e-12);
        }
    }

    #[test]
    fn density_fraction_examples() {
        assert_eq!(density_one_fraction(&[0.0; 100], 0.5, 100), 0.0);
        assert_eq!(density_one_fraction(&[1.0; 100], 0.5, 100), 1.0);
        // a_n = 1 iff n is a perfect square (1-indexed), N = 10^4
        let vals: Vec<f64> = (1..=10_000usize)
            .map(|n| {
                let r = (n as f64).sqrt().round() as usize;
                if r * r == n {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        assert_abs_diff_eq!(
            density_one_fraction(&vals, 0.5, 10_000),
            0.01,
            epsilon = 0.0
        );
    }

    #[test]
    fn stable_vectors_have_vanishing_curves_reversible_do_not() {
        // oracle equivalence on small random diagonalizable contractions
        let mut rng = crate::rng::substream(25, "curve-oracle");
        for trial in 0..10 {
            let dim = 2 + (trial % 5);
            let mut diag = CMat::zeros((dim, dim));
            diag[(0, 0)] = Complex64::new(1.0, 0.0);
            for i in 1..dim {
                diag[(i, i)] = crate::rng::random_complex(&mut rng) * 0.4;
            }
            // conjugate by a well-conditioned random matrix
            let mut s = linalg::identity(dim);
            for x in s.iter_mut() {
                *x += crate::rng::random_complex(&mut rng) * 0.2;
            }
            let sinv = linalg::inverse(&s).unwrap();
            let a = s.dot(&diag).dot(&sinv);
            let t = Operator::dense_spatial(a).unwrap();
            let d = decompose(&t, 1e-6).unwrap();
            assert_eq!(d.reversible_dim(), 1);
            let f = crate::rng::random_function(t.basis(), &mut rng);
            let fs = d.project_stable(&f).unwrap();
            let cps = geometric_checkpoints(10_000);
            for _ in 0..3 {
                let phi = crate::rng::random_unit_function(t.basis(), &mut rng);
                let curve = stability_curve(&t, &fs, &phi, 10_000, &cps).unwrap();
                let last = curve.final_value().unwrap().sup_value();
                assert!(
                    last < 0.01 * fs.norm(NormKind::L2).max(1e-6),
                    "stable curve {last}"
                );
            }
            let (lam, v) = d.reversible_pairs()[0].clone();
            assert!((lam - Complex64::new(1.0, 0.0)).norm() < 1e-8);
            let curve = stability_curve(&t, &v, &v, 1000, &geometric_checkpoints(1000)).unwrap();
            let last = curve.final_value().unwrap().sup_value();
            assert!(last > 0.1, "reversible curve {last}");
        }
    }
}
