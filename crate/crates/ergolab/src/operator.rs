//! Operator kinds with fast n-th powers, the linear modulus, and empirical
//! Dunford-Schwartz validation.
//!
//! Everything runs on finite invariant models: a rotation restricted
//! to span{e_-M..e_M} is exactly invariant, and grid permutations are exactly
//! measure preserving for the uniform measure, so truncation error enters
//! only through function representation.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::function::{unit_phase, Basis, FunctionVector, NormKind};
use crate::linalg::{self, CMat};

/// A rotation angle as a fraction of a full turn.
///
/// Rationals p/q are kept exact; decimals are reduced with integer mantissa
/// arithmetic so that the fractional part of n*m*alpha is computed without
/// the O(n) phase drift of repeated multiplication.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle {
    Rational { num: i64, den: i64 },
    Decimal(f64),
}

impl Angle {
    pub fn value(&self) -> f64 {
        match self {
            Angle::Rational { num, den } => *num as f64 / *den as f64,
            Angle::Decimal(a) => *a,
        }
    }

    /// Fractional part of k * angle, in turns.
    pub fn frac_of_multiple(&self, k: i128) -> f64 {
        match self {
            Angle::Rational { num, den } => {
                let den = *den as i128;
                let r = (k * *num as i128).rem_euclid(den);
                r as f64 / den as f64
            }
            Angle::Decimal(a) => frac_of_int_multiple(k, *a),
        }
    }
}

/// Exact fractional part of k * a for f64 a, via the binary representation
/// a = mant * 2^exp. Exact as long as |k| * mant fits in i128 (|k| < 2^74).
fn frac_of_int_multiple(k: i128, a: f64) -> f64 {
    if k == 0 || a == 0.0 {
        return 0.0;
    }
    let a = a.rem_euclid(1.0);
    if a == 0.0 {
        return 0.0;
    }
    let bits = a.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let raw_mant = bits & 0xf_ffff_ffff_ffff;
    let (mant, exp) = if raw_exp == 0 {
        (raw_mant as u128, -1074)
    } else {
        ((raw_mant | (1 << 52)) as u128, raw_exp - 1075)
    };
    debug_assert!(exp < 0, "a in (0,1) has negative exponent");
    let neg = k < 0;
    let p = k.unsigned_abs() * mant; // |k| * mant, exact in u128
    let shift = (-exp) as u32;
    let frac = if shift >= 128 {
        // value < 2^(107-128): already a pure fraction
        p as f64 * (exp as f64).exp2()
    } else {
        let low = p & ((1u128 << shift) - 1);
        low as f64 * (exp as f64).exp2()
    };
    if neg && frac != 0.0 {
        1.0 - frac
    } else {
        frac
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    /// Multiplies coefficient m by mu_m on a spectral basis.
    DiagonalSpectral { mu: Vec<Complex64> },
    /// (Tf)(g) = f(perm(g)) on a grid basis.
    GridPermutation {
        perm: Vec<usize>,
        cycles: Vec<Vec<usize>>,
        /// position[g] = (cycle index, offset of g within its cycle)
        position: Vec<(usize, usize)>,
    },
    DenseSpectral { matrix: CMat },
    DenseSpatial { matrix: CMat },
}

#[derive(Clone, Debug)]
pub struct Operator {
    kind: Kind,
    basis: Basis,
    /// Declared rotation angle, when constructed as a Koopman rotation.
    angle: Option<Angle>,
}

fn cycle_decomposition(perm: &[usize]) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    let mut position = vec![(0usize, 0usize); n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut g = start;
        while !seen[g] {
            seen[g] = true;
            position[g] = (cycles.len(), cyc.len());
            cyc.push(g);
            g = perm[g];
        }
        cycles.push(cyc);
    }
    (cycles, position)
}

impl Operator {
    /// Koopman operator of rotation by `angle` on modes -cutoff..cutoff:
    /// e_m is an eigenvector with eigenvalue exp(2 pi i m alpha).
    pub fn rotation(angle: Angle, cutoff: usize) -> Self {
        let m0 = cutoff as i64;
        let mu = (0..2 * cutoff + 1)
            .map(|i| unit_phase(angle.frac_of_multiple((i as i64 - m0) as i128)))
            .collect();
        Self {
            kind: Kind::DiagonalSpectral { mu },
            basis: Basis::Spectral { cutoff },
            angle: Some(angle),
        }
    }

    pub fn diagonal_spectral(cutoff: usize, mu: Vec<Complex64>) -> Result<Self> {
        if mu.len() != 2 * cutoff + 1 {
            return Err(Error::Dimension(format!(
                "diagonal of length {} for cutoff {}",
                mu.len(),
                cutoff
            )));
        }
        if mu.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("diagonal entries"));
        }
        if let Some(bad) = mu.iter().find(|c| c.norm() > 1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "diagonal entry {bad} exceeds the unit disc"
            )));
        }
        Ok(Self {
            kind: Kind::DiagonalSpectral { mu },
            basis: Basis::Spectral { cutoff },
            angle: None,
        })
    }

    /// Diagonal projector onto the listed modes.
    pub fn mode_projector(cutoff: usize, modes: &[i64]) -> Result<Self> {
        let m0 = cutoff as i64;
        let mut mu = vec![Complex64::new(0.0, 0.0); 2 * cutoff + 1];
        for &m in modes {
            if m.unsigned_abs() as usize > cutoff {
                return Err(Error::Dimension(format!("mode {m} outside cutoff {cutoff}")));
            }
            mu[(m + m0) as usize] = Complex64::new(1.0, 0.0);
        }
        Self::diagonal_spectral(cutoff, mu)
    }

    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut hit = vec![false; n];
        for &p in &perm {
            if p >= n || hit[p] {
                return Err(Error::Invalid("permutation is not a bijection".into()));
            }
            hit[p] = true;
        }
        let (cycles, position) = cycle_decomposition(&perm);
        Ok(Self {
            kind: Kind::GridPermutation {
                perm,
                cycles,
                position,
            },
            basis: Basis::Grid { size: n },
            angle: None,
        })
    }

    /// perm(g) = multiplier * g mod size; the doubling map for multiplier 2.
    pub fn multiplier_permutation(size: usize, multiplier: usize) -> Result<Self> {
        let perm = (0..size).map(|g| (multiplier * g) % size).collect();
        Self::permutation(perm)
    }

    pub fn dense_spectral(cutoff: usize, matrix: CMat) -> Result<Self> {
        let n = 2 * cutoff + 1;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "dense spectral matrix {}x{} for cutoff {}",
                matrix.nrows(),
                matrix.ncols(),
                cutoff
            )));
        }
        if matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self {
            kind: Kind::DenseSpectral { matrix },
            basis: Basis::Spectral { cutoff },
            angle: None,
        })
    }

    pub fn dense_spatial(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension("dense spatial matrix must be square".into()));
        }
        if matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let size = matrix.nrows();
        Ok(Self {
            kind: Kind::DenseSpatial { matrix },
            basis: Basis::Grid { size },
            angle: None,
        })
    }

    pub fn identity(basis: Basis) -> Self {
        match basis {
            Basis::Spectral { cutoff } => Self {
                kind: Kind::DiagonalSpectral {
                    mu: vec![Complex64::new(1.0, 0.0); 2 * cutoff + 1],
                },
                basis,
                angle: None,
            },
            Basis::Grid { size } => Self::permutation((0..size).collect())
                .expect("identity permutation is a bijection"),
        }
    }

    pub fn zero(basis: Basis) -> Self {
        match basis {
            Basis::Spectral { cutoff } => Self {
                kind: Kind::DiagonalSpectral {
                    mu: vec![Complex64::new(0.0, 0.0); 2 * cutoff + 1],
                },
                basis,
                angle: None,
            },
            Basis::Grid { size } => Self {
                kind: Kind::DenseSpatial {
                    matrix: CMat::zeros((size, size)),
                },
                basis,
                angle: None,
            },
        }
    }

    /// Random doubly-stochastic matrix via Sinkhorn balancing; contracts both
    /// the grid L1 and sup norms, so it is Dunford-Schwartz by construction.
    pub fn doubly_stochastic(size: usize, rng: &mut impl Rng) -> Self {
        let mut m = vec![vec![0.0_f64; size]; size];
        for row in m.iter_mut() {
            for x in row.iter_mut() {
                *x = rng.gen_range(0.1..1.0);
            }
        }
        for _ in 0..500 {
            for row in m.iter_mut() {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
            for j in 0..size {
                let s: f64 = m.iter().map(|r| r[j]).sum();
                m.iter_mut().for_each(|r| r[j] /= s);
            }
        }
        let rows = m
            .into_iter()
            .map(|r| r.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::dense_spatial(linalg::from_rows(rows).expect("square rows")).expect("finite entries")
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::DiagonalSpectral { .. } => "diagonal-spectral",
            Kind::GridPermutation { .. } => "grid-permutation",
            Kind::DenseSpectral { .. } => "dense-spectral",
            Kind::DenseSpatial { .. } => "dense-spatial",
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        self.angle
    }

    pub fn is_dense(&self) -> bool {
        matches!(
            self.kind,
            Kind::DenseSpectral { .. } | Kind::DenseSpatial { .. }
        )
    }

    fn check_basis(&self, f: &FunctionVector) -> Result<()> {
        if f.basis() != self.basis {
            return Err(Error::Dimension(format!(
                "operator on {} applied to vector on {}",
                self.basis.describe(),
                f.basis().describe()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, f: &FunctionVector) -> Result<FunctionVector> {
        self.check_basis(f)?;
        let coeffs = match &self.kind {
            Kind::DiagonalSpectral { mu } => f
                .coeffs()
                .iter()
                .zip(mu)
                .map(|(c, m)| c * m)
                .collect(),
            Kind::GridPermutation { perm, .. } => {
                perm.iter().map(|&p| f.coeffs()[p]).collect()
            }
            Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => {
                linalg::matvec(matrix, f.coeffs())
            }
        };
        FunctionVector::new(self.basis, coeffs)
    }

    /// T^n f. O(dim) for diagonal and permutation kinds; dense kinds use
    /// binary exponentiation (or a `PowerPlan` for long runs).
    pub fn power_apply(&self, n: u64, f: &FunctionVector) -> Result<FunctionVector> {
        self.check_basis(f)?;
        if n == 0 {
            return Ok(f.clone());
        }
        match &self.kind {
            Kind::DiagonalSpectral { mu } => {
                let coeffs = if let Some(angle) = self.angle {
                    let m0 = match self.basis {
                        Basis::Spectral { cutoff } => cutoff as i64,
                        Basis::Grid { .. } => unreachable!("diagonal kinds are spectral"),
                    };
                    f.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let m = i as i64 - m0;
                            c * unit_phase(angle.frac_of_multiple(m as i128 * n as i128))
                        })
                        .collect()
                } else {
                    let n32 = u32::try_from(n)
                        .map_err(|_| Error::Invalid(format!("power {n} too large")))?;
                    f.coeffs()
                        .iter()
                        .zip(mu)
                        .map(|(c, m)| c * m.powu(n32))
                        .collect()
                };
                FunctionVector::new(self.basis, coeffs)
            }
            Kind::GridPermutation {
                cycles, position, ..
            } => {
                let coeffs = (0..f.coeffs().len())
                    .map(|g| {
                        let (ci, off) = position[g];
                        let cyc = &cycles[ci];
                        f.coeffs()[cyc[(off + n as usize % cyc.len()) % cyc.len()]]
                    })
                    .collect();
                FunctionVector::new(self.basis, coeffs)
            }
            Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => {
                if n <= 4 {
                    let mut v = f.clone();
                    for _ in 0..n {
                        v = self.apply(&v)?;
                    }
                    Ok(v)
                } else {
                    let p = matrix_power(matrix, n);
                    FunctionVector::new(self.basis, linalg::matvec(&p, f.coeffs()))
                }
            }
        }
    }

    /// Dense realization in the operator's own basis.
    pub fn matrix(&self) -> CMat {
        match &self.kind {
            Kind::DiagonalSpectral { mu } => {
                let mut m = CMat::zeros((mu.len(), mu.len()));
                for (i, v) in mu.iter().enumerate() {
                    m[(i, i)] = *v;
                }
                m
            }
            Kind::GridPermutation { perm, .. } => {
                let n = perm.len();
                let mut m = CMat::zeros((n, n));
                for (g, &p) in perm.iter().enumerate() {
                    m[(g, p)] = Complex64::new(1.0, 0.0);
                }
                m
            }
            Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => matrix.clone(),
        }
    }

    /// The linear modulus |T|: the minimal positive operator dominating T.
    ///
    /// Permutations and rotations are positive Koopman operators and coincide
    /// with their modulus; dense spatial kinds take entrywise absolute
    /// values. For general spectral kinds the finite analogue is not
    /// representable in the truncated basis and is reported unsupported.
    pub fn modulus(&self) -> Result<Operator> {
        match &self.kind {
            Kind::GridPermutation { .. } => Ok(self.clone()),
            Kind::DenseSpatial { matrix } => {
                let m = matrix.mapv(|c| Complex64::new(c.norm(), 0.0));
                Operator::dense_spatial(m)
            }
            Kind::DiagonalSpectral { .. } if self.angle.is_some() => Ok(self.clone()),
            Kind::DiagonalSpectral { .. } => Err(Error::UnsupportedModulus("diagonal-spectral")),
            Kind::DenseSpectral { .. } => Err(Error::UnsupportedModulus("dense-spectral")),
        }
    }

    /// Unimodular scalar multiple lambda*T (drops any declared angle).
    pub fn scaled(&self, lambda: Complex64) -> Result<Operator> {
        let kind = match &self.kind {
            Kind::DiagonalSpectral { mu } => Kind::DiagonalSpectral {
                mu: mu.iter().map(|m| m * lambda).collect(),
            },
            Kind::DenseSpectral { matrix } => Kind::DenseSpectral {
                matrix: matrix.mapv(|c| c * lambda),
            },
            Kind::DenseSpatial { matrix } => Kind::DenseSpatial {
                matrix: matrix.mapv(|c| c * lambda),
            },
            Kind::GridPermutation { .. } => Kind::DenseSpatial {
                matrix: self.matrix().mapv(|c| c * lambda),
            },
        };
        Ok(Operator {
            kind,
            basis: self.basis,
            angle: None,
        })
    }

    /// Upper bound on the L2 operator norm.
    pub fn l2_norm_bound(&self) -> f64 {
        match &self.kind {
            Kind::DiagonalSpectral { mu } => mu.iter().map(|c| c.norm()).fold(0.0, f64::max),
            Kind::GridPermutation { .. } => 1.0,
            Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => {
                linalg::largest_singular_value(matrix).unwrap_or(f64::NAN)
            }
        }
    }

    /// Empirical Dunford-Schwartz check over pseudo-random test functions.
    ///
    /// For grid kinds the L1/sup ratios are exact; for spectral kinds both
    /// norms are grid-sampled estimates (4x oversampling), so callers should
    /// pass a sampling-aware tolerance there.
    pub fn validate_dunford_schwartz(
        &self,
        trials: usize,
        tol: f64,
        rng: &mut impl Rng,
    ) -> DSReport {
        let mut worst_l1 = 0.0_f64;
        let mut worst_sup = 0.0_f64;
        for _ in 0..trials {
            let f = crate::rng::random_function(self.basis, rng);
            let tf = self.apply(&f).expect("basis matches by construction");
            let (l1, sup) = (f.norm(NormKind::L1), f.norm(NormKind::Sup));
            if l1 > 1e-12 {
                worst_l1 = worst_l1.max(tf.norm(NormKind::L1) / l1);
            }
            if sup > 1e-12 {
                worst_sup = worst_sup.max(tf.norm(NormKind::Sup) / sup);
            }
        }
        DSReport {
            trials,
            worst_l1_ratio: worst_l1,
            worst_linf_ratio: worst_sup,
            tol,
            passed: worst_l1 <= 1.0 + tol && worst_sup <= 1.0 + tol,
        }
    }

    /// True iff Fix |T| is one-dimensional and spanned by the constant.
    pub fn check_fix_modulus_trivial(&self, tol: f64) -> Result<bool> {
        let modulus = self.modulus()?;
        match &modulus.kind {
            Kind::GridPermutation { cycles, .. } => Ok(cycles.len() == 1),
            Kind::DiagonalSpectral { mu } => {
                let fixed = mu
                    .iter()
                    .filter(|m| (*m - Complex64::new(1.0, 0.0)).norm() < tol)
                    .count();
                // mode 0 is always fixed for a rotation; trivial iff nothing else is
                Ok(fixed == 1)
            }
            Kind::DenseSpatial { matrix } => {
                let (w, v) = linalg::eig_pairs(matrix)?;
                let fixed: Vec<usize> = (0..w.len())
                    .filter(|&i| (w[i] - Complex64::new(1.0, 0.0)).norm() < tol)
                    .collect();
                if fixed.len() != 1 {
                    return Ok(false);
                }
                let col = v.column(fixed[0]);
                let mean: Complex64 = col.iter().sum::<Complex64>() / col.len() as f64;
                let dev = col.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max);
                Ok(dev <= 1e-7 * mean.norm().max(1e-30))
            }
            Kind::DenseSpectral { .. } => Err(Error::UnsupportedModulus("dense-spectral")),
        }
    }

    /// Eigendecomposition-backed plan for repeated dense powers.
    pub fn power_plan(&self, cond_cap: f64) -> Result<PowerPlan> {
        let matrix = match &self.kind {
            Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => matrix,
            _ => {
                return Err(Error::Invalid(
                    "power plans exist for dense kinds only".into(),
                ))
            }
        };
        let (vals, v) = linalg::eig_pairs(matrix)?;
        let cond = linalg::cond_2(&v)?;
        if !cond.is_finite() || cond > cond_cap {
            return Err(Error::IllConditionedEigenbasis(cond));
        }
        let vinv = linalg::inverse(&v)?;
        Ok(PowerPlan {
            vals,
            v,
            vinv,
            basis: self.basis,
        })
    }
}

fn matrix_power(m: &CMat, n: u64) -> CMat {
    let mut result = linalg::identity(m.nrows());
    let mut base = m.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = result.dot(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    result
}

/// Diagonalization plan: T^n f = V diag(lambda^n) V^{-1} f in O(dim^2).
#[derive(Clone, Debug)]
pub struct PowerPlan {
    vals: Vec<Complex64>,
    v: CMat,
    vinv: CMat,
    basis: Basis,
}

impl PowerPlan {
    pub fn power_apply(&self, n: u64, f: &FunctionVector) -> Result<FunctionVector> {
        if f.basis() != self.basis {
            return Err(Error::Dimension("power plan basis mismatch".into()));
        }
        let n32 = u32::try_from(n).map_err(|_| Error::Invalid(format!("power {n} too large")))?;
        let mut y = linalg::matvec(&self.vinv, f.coeffs());
        for (yi, val) in y.iter_mut().zip(&self.vals) {
            *yi *= val.powu(n32);
        }
        FunctionVector::new(self.basis, linalg::matvec(&self.v, &y))
    }
}

/// Result of the empirical Dunford-Schwartz contraction check.
#[derive(Clone, Debug)]
pub struct DSReport {
    pub trials: usize,
    pub worst_l1_ratio: f64,
    pub worst_linf_ratio: f64,
    pub tol: f64,
    pub passed: bool,
}
