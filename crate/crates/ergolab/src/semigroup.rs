//! Continuous-time analogue: contraction semigroups e^{tG} from generator
//! specifications, and entangled Cesàro integrals
//! (1/T) int_0^T T_a(t) A_{a-1} ... A_0 T_0(t) f dt by composite trapezoid
//! quadrature.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::{Basis, FunctionVector};
use crate::kahan::{KahanVecC64, KahanVecF64};
use crate::linalg::{self, CMat};
use crate::operator::Operator;
use crate::series::{CesaroSeries, SeriesValue};

/// A semigroup generator: diagonal exponents per spectral mode, or a dense
/// matrix exponentiated by scaling and squaring.
#[derive(Clone, Debug)]
pub enum GeneratorSpec {
    DiagonalSpectral { exponents: Vec<Complex64> },
    DenseMatrix { matrix: CMat, basis: Basis },
}

impl GeneratorSpec {
    /// Diagonal generator on modes -cutoff..cutoff; requires Re g_m <= 0
    /// (contraction semigroup).
    pub fn diagonal(cutoff: usize, exponents: Vec<Complex64>) -> Result<Self> {
        if exponents.len() != 2 * cutoff + 1 {
            return Err(Error::Dimension(format!(
                "{} exponents for cutoff {cutoff}",
                exponents.len()
            )));
        }
        if let Some(bad) = exponents.iter().find(|g| g.re > 1e-12) {
            return Err(Error::Invalid(format!(
                "generator exponent {bad} has positive real part"
            )));
        }
        Ok(Self::DiagonalSpectral { exponents })
    }

    /// The rotation flow d/dt f(x + alpha t): g_m = 2 pi i m alpha.
    pub fn rotation_flow(cutoff: usize, alpha: f64) -> Self {
        let m0 = cutoff as i64;
        let exponents = (0..2 * cutoff + 1)
            .map(|i| {
                Complex64::new(0.0, 2.0 * std::f64::consts::PI * (i as i64 - m0) as f64 * alpha)
            })
            .collect();
        Self::DiagonalSpectral { exponents }
    }

    pub fn dense(matrix: CMat, basis: Basis) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::Dimension(format!(
                "generator matrix {}x{} on {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.describe()
            )));
        }
        Ok(Self::DenseMatrix { matrix, basis })
    }

    /// Graph Laplacian generator of a permutation flow: G = P - I where P is
    /// the permutation matrix. ker(G) is spanned by constants iff the
    /// permutation acts transitively.
    pub fn permutation_laplacian(perm: &Operator) -> Result<Self> {
        let basis = perm.basis();
        let p = perm.matrix();
        let g = p - linalg::identity(basis.len());
        Self::dense(g, basis)
    }

    pub fn basis(&self) -> Basis {
        match self {
            Self::DiagonalSpectral { exponents } => Basis::Spectral {
                cutoff: exponents.len() / 2,
            },
            Self::DenseMatrix { basis, .. } => *basis,
        }
    }
}

/// e^{tG} f. Diagonal kinds are exact per mode; dense kinds use a Padé
/// scaling-and-squaring matrix exponential. Errors if the result grows past
/// the contraction premise.
pub fn semigroup_apply(g: &GeneratorSpec, t: f64, f: &FunctionVector) -> Result<FunctionVector> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("negative time {t}")));
    }
    if f.basis() != g.basis() {
        return Err(Error::Dimension("generator basis mismatch".into()));
    }
    let out = match g {
        GeneratorSpec::DiagonalSpectral { exponents } => {
            let coeffs = f
                .coeffs()
                .iter()
                .zip(exponents)
                .map(|(c, gm)| c * (gm * t).exp())
                .collect();
            FunctionVector::new(f.basis(), coeffs)?
        }
        GeneratorSpec::DenseMatrix { matrix, .. } => {
            let e = expm(&matrix.mapv(|c| c * t));
            FunctionVector::new(f.basis(), linalg::matvec(&e, f.coeffs()))?
        }
    };
    let in_norm = f
        .coeffs()
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let out_norm = out
        .coeffs()
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if out_norm > in_norm * (1.0 + 1e-6) + 1e-12 {
        return Err(Error::Instability(out_norm / in_norm.max(1e-300)));
    }
    Ok(out)
}

/// Scaling-and-squaring matrix exponential with a degree-13 Padé kernel.
pub fn expm(a: &CMat) -> CMat {
    let norm = linalg::one_norm(a);
    let s = if norm > 0.5 {
        ((norm / 0.5).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scaled = a.mapv(|c| c / (2.0_f64.powi(s)));
    let mut e = pade13(&scaled);
    for _ in 0..s {
        e = e.dot(&e);
    }
    e
}

fn pade13(a: &CMat) -> CMat {
    // Higham's degree-13 Padé coefficients
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let ident = linalg::identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let u_inner = &a6 * B[13] + &a4 * B[11] + &a2 * B[9];
    let u = a.dot(&(a6.dot(&u_inner) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &ident * B[1]));
    let v_inner = &a6 * B[12] + &a4 * B[10] + &a2 * B[8];
    let v = a6.dot(&v_inner) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &ident * B[0];
    let num = &v + &u;
    let den = &v - &u;
    linalg::inverse(&den)
        .expect("Pade denominator is well conditioned after scaling")
        .dot(&num)
}

/// The data of an entangled Cesàro integral: generators G_0..G_a,
/// intertwiners A_0..A_{a-1}, horizon, and quadrature step.
pub struct SemigroupChain {
    generators: Vec<GeneratorSpec>,
    a_ops: Vec<Operator>,
    horizon: f64,
    step: f64,
    basis: Basis,
}

impl SemigroupChain {
    pub fn new(
        generators: Vec<GeneratorSpec>,
        a_ops: Vec<Operator>,
        horizon: f64,
        step: f64,
    ) -> Result<Self> {
        if generators.is_empty() || generators.len() != a_ops.len() + 1 {
            return Err(Error::Dimension(format!(
                "chain needs a+1 generators and a intertwiners (got {} and {})",
                generators.len(),
                a_ops.len()
            )));
        }
        if !(step > 0.0 && step <= horizon) {
            return Err(Error::Invalid(format!(
                "quadrature step {step} must lie in (0, {horizon}]"
            )));
        }
        let basis = generators[0].basis();
        for g in &generators {
            if g.basis() != basis {
                return Err(Error::Dimension("chain mixes bases".into()));
            }
        }
        for a in &a_ops {
            if a.basis() != basis {
                return Err(Error::Dimension("chain mixes bases".into()));
            }
        }
        Ok(Self {
            generators,
            a_ops,
            horizon,
            step,
            basis,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// T_a(t) A_{a-1} ... A_0 T_0(t) f.
    pub fn term(&self, t: f64, f: &FunctionVector) -> Result<FunctionVector> {
        let mut x = semigroup_apply(&self.generators[0], t, f)?;
        for (j, a) in self.a_ops.iter().enumerate() {
            x = a.apply(&x)?;
            x = semigroup_apply(&self.generators[j + 1], t, &x)?;
        }
        Ok(x)
    }
}

fn checkpoint_nodes(chain: &SemigroupChain, checkpoints: &[f64]) -> Result<Vec<u64>> {
    if checkpoints.is_empty() {
        return Err(Error::Invalid("at least one checkpoint required".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    let mut nodes = Vec::with_capacity(checkpoints.len());
    for &cp in checkpoints {
        if !(cp > 0.0 && cp <= chain.horizon * (1.0 + 1e-12)) {
            return Err(Error::Invalid(format!(
                "checkpoint {cp} outside (0, {}]",
                chain.horizon
            )));
        }
        let k = (cp / chain.step).round();
        if (k * chain.step - cp).abs() > 1e-9 * chain.horizon.max(1.0) {
            return Err(Error::Invalid(format!(
                "checkpoint {cp} is not a multiple of the step {}",
                chain.step
            )));
        }
        if k < 1.0 {
            return Err(Error::Invalid(format!(
                "checkpoint {cp} is below one quadrature step"
            )));
        }
        nodes.push(k as u64);
    }
    Ok(nodes)
}

/// Composite-trapezoid approximation of
/// (1/T') int_0^{T'} T_a(t) A ... T_0(t) f dt at each checkpoint T'.
/// Checkpoints must be multiples of the quadrature step.
pub fn cesaro_integral(
    chain: &SemigroupChain,
    f: &FunctionVector,
    checkpoints: &[f64],
) -> Result<CesaroSeries> {
    let nodes = checkpoint_nodes(chain, checkpoints)?;
    let last = *nodes.last().unwrap();
    let dim = chain.basis.len();
    // terms at quadrature nodes t_k = k h, k = 0..=last, in parallel
    let terms: Vec<Vec<Complex64>> = (0..=last)
        .into_par_iter()
        .map(|k| {
            chain
                .term(k as f64 * chain.step, f)
                .map(|v| v.coeffs().to_vec())
        })
        .collect::<Result<_>>()?;
    let mut acc = KahanVecC64::zeros(dim);
    let mut values = Vec::with_capacity(nodes.len());
    let mut next = 0usize;
    for k in 1..=last {
        // trapezoid panel over [t_{k-1}, t_k]
        let panel: Vec<Complex64> = terms[(k - 1) as usize]
            .iter()
            .zip(&terms[k as usize])
            .map(|(a, b)| (a + b) * 0.5 * chain.step)
            .collect();
        acc.add_slice(&panel);
        while next < nodes.len() && nodes[next] == k {
            let t_prime = k as f64 * chain.step;
            let coeffs = acc.values().into_iter().map(|c| c / t_prime).collect();
            values.push(SeriesValue::Function(FunctionVector::new(
                chain.basis,
                coeffs,
            )?));
            next += 1;
        }
    }
    CesaroSeries::new(nodes, values)
}

/// Absolute-value variant: per-grid-point trapezoid mean of |term(t)(x)|.
pub fn cesaro_abs_integral(
    chain: &SemigroupChain,
    f: &FunctionVector,
    checkpoints: &[f64],
    g_eval: usize,
) -> Result<CesaroSeries> {
    let nodes = checkpoint_nodes(chain, checkpoints)?;
    let last = *nodes.last().unwrap();
    if let Basis::Grid { size } = chain.basis {
        if g_eval != size {
            return Err(Error::Dimension(format!(
                "grid chain of size {size} cannot be sampled at {g_eval} points"
            )));
        }
    }
    let terms: Vec<Vec<f64>> = (0..=last)
        .into_par_iter()
        .map(|k| {
            let term = chain.term(k as f64 * chain.step, f)?;
            let spatial = match chain.basis {
                Basis::Grid { .. } => term,
                Basis::Spectral { .. } => term.to_spatial(g_eval)?,
            };
            Ok(spatial.coeffs().iter().map(|c| c.norm()).collect())
        })
        .collect::<Result<_>>()?;
    let mut acc = KahanVecF64::zeros(g_eval);
    let mut values = Vec::with_capacity(nodes.len());
    let mut next = 0usize;
    for k in 1..=last {
        let panel: Vec<f64> = terms[(k - 1) as usize]
            .iter()
            .zip(&terms[k as usize])
            .map(|(a, b)| (a + b) * 0.5 * chain.step)
            .collect();
        acc.add_slice(&panel);
        while next < nodes.len() && nodes[next] == k {
            let t_prime = k as f64 * chain.step;
            values.push(SeriesValue::AbsGrid(
                acc.values().into_iter().map(|x| x / t_prime).collect(),
            ));
            next += 1;
        }
    }
    CesaroSeries::new(nodes, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::NormKind;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_generator_is_identity_for_all_t() {
        let g = GeneratorSpec::diagonal(3, vec![Complex64::new(0.0, 0.0); 7]).unwrap();
        let mut rng = crate::rng::substream(70, "sg-zero");
        let f = crate::rng::random_function(Basis::Spectral { cutoff: 3 }, &mut rng);
        for t in [0.0, 0.5, 3.7] {
            let out = semigroup_apply(&g, t, &f).unwrap();
            let err = out
                .sub(&f)
                .unwrap()
                .coeffs()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-14);
        }
    }

    #[test]
    fn rotation_flow_phase_and_scalar_decay() {
        let alpha = 0.3_f64;
        let g = GeneratorSpec::rotation_flow(2, alpha);
        let f = FunctionVector::mode(2, 1).unwrap();
        let t = 1.7;
        let out = semigroup_apply(&g, t, &f).unwrap();
        let expected = crate::function::unit_phase((alpha * t).rem_euclid(1.0));
        assert!((out.mode_coeff(1).unwrap() - expected).norm() < 1e-12);
        // g_1 = -1, t = ln 2 halves the coefficient
        let mut exps = vec![Complex64::new(0.0, 0.0); 5];
        exps[3] = Complex64::new(-1.0, 0.0); // mode 1
        let g = GeneratorSpec::diagonal(2, exps).unwrap();
        let out = semigroup_apply(&g, 2.0_f64.ln(), &f).unwrap();
        assert!((out.mode_coeff(1).unwrap() - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn semigroup_law_and_contraction() {
        let mut rng = crate::rng::substream(71, "sg-law");
        // random dissipative dense generator: A - (||A|| + 1) I
        let n = 5;
        let mut m = CMat::zeros((n, n));
        for x in m.iter_mut() {
            *x = crate::rng::random_complex(&mut rng);
        }
        let shift = linalg::largest_singular_value(&m).unwrap() + 1.0;
        let m = m - linalg::identity(n).mapv(|c| c * shift);
        let g = GeneratorSpec::dense(m, Basis::Grid { size: n }).unwrap();
        let f = crate::rng::random_function(Basis::Grid { size: n }, &mut rng);
        let (s, t) = (0.4, 1.1);
        let both = semigroup_apply(&g, s + t, &f).unwrap();
        let stepped =
            semigroup_apply(&g, s, &semigroup_apply(&g, t, &f).unwrap()).unwrap();
        let err = both
            .sub(&stepped)
            .unwrap()
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "semigroup law violated by {err}");
        assert!(both.norm(NormKind::L2) <= f.norm(NormKind::L2) * (1.0 + 1e-10));
    }

    #[test]
    fn expanding_generator_trips_instability() {
        let m = linalg::identity(3).mapv(|c| c * Complex64::new(0.5, 0.0));
        let g = GeneratorSpec::dense(m, Basis::Grid { size: 3 }).unwrap();
        let mut rng = crate::rng::substream(72, "sg-unstable");
        let f = crate::rng::random_function(Basis::Grid { size: 3 }, &mut rng);
        assert!(matches!(
            semigroup_apply(&g, 1.0, &f),
            Err(Error::Instability(_))
        ));
    }

    #[test]
    fn trivial_generators_integral_is_intertwiner_product() {
        let cutoff = 2;
        let zero = GeneratorSpec::diagonal(cutoff, vec![Complex64::new(0.0, 0.0); 5]).unwrap();
        let a0 = Operator::mode_projector(cutoff, &[0, 1]).unwrap();
        let chain = SemigroupChain::new(
            vec![zero.clone(), zero],
            vec![a0.clone()],
            4.0,
            0.5,
        )
        .unwrap();
        let mut rng = crate::rng::substream(73, "sg-trivial");
        let f = crate::rng::random_function(Basis::Spectral { cutoff }, &mut rng);
        let series = cesaro_integral(&chain, &f, &[1.0, 2.0, 4.0]).unwrap();
        let expected = a0.apply(&f).unwrap();
        for v in series.values() {
            let SeriesValue::Function(g) = v else { unreachable!() };
            let err = g
                .sub(&expected)
                .unwrap()
                .coeffs()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    fn rotation_integral_error(step: f64) -> f64 {
        // closed form: (1/T) int_0^T e^{2 pi i alpha t} dt
        let alpha = 0.3_f64;
        let horizon = 8.0;
        let g = GeneratorSpec::rotation_flow(1, alpha);
        let chain = SemigroupChain::new(vec![g], vec![], horizon, step).unwrap();
        let f = FunctionVector::mode(1, 1).unwrap();
        let series = cesaro_integral(&chain, &f, &[horizon]).unwrap();
        let SeriesValue::Function(avg) = &series.values()[0] else {
            unreachable!()
        };
        let w = Complex64::new(0.0, 2.0 * PI * alpha);
        let exact = ((w * horizon).exp() - 1.0) / (w * horizon);
        (avg.mode_coeff(1).unwrap() - exact).norm()
    }

    #[test]
    fn rotation_flow_integral_matches_closed_form() {
        let err = rotation_integral_error(1.0 / 512.0);
        let alpha = 0.3;
        assert!(err < 1e-4);
        // magnitude bound |integral| <= 1/(pi alpha T)
        let horizon = 8.0;
        let g = GeneratorSpec::rotation_flow(1, alpha);
        let chain = SemigroupChain::new(vec![g], vec![], horizon, 1.0 / 512.0).unwrap();
        let f = FunctionVector::mode(1, 1).unwrap();
        let series = cesaro_integral(&chain, &f, &[horizon]).unwrap();
        let SeriesValue::Function(avg) = &series.values()[0] else {
            unreachable!()
        };
        assert!(avg.mode_coeff(1).unwrap().norm() <= 1.0 / (PI * alpha * horizon) + 1e-6);
    }

    #[test]
    fn trapezoid_error_is_second_order() {
        let mut errs = Vec::new();
        let mut h = 1.0 / 16.0;
        for _ in 0..4 {
            errs.push(rotation_integral_error(h));
            h /= 2.0;
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.5..=4.5).contains(&ratio),
                "halving ratio {ratio}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn permutation_laplacian_flow_converges_to_constant_mean() {
        // transitive shift: ker(G) = constants, so the time average tends to
        // c * 1 with |c| <= mean |f|
        let g_size = 6usize;
        let perm = Operator::permutation((0..g_size).map(|i| (i + 1) % g_size).collect()).unwrap();
        let gen = GeneratorSpec::permutation_laplacian(&perm).unwrap();
        let chain = SemigroupChain::new(vec![gen], vec![], 400.0, 0.25).unwrap();
        let mut rng = crate::rng::substream(74, "sg-laplacian");
        let f = crate::rng::random_function(Basis::Grid { size: g_size }, &mut rng);
        let series = cesaro_integral(&chain, &f, &[400.0]).unwrap();
        let SeriesValue::Function(avg) = &series.values()[0] else {
            unreachable!()
        };
        let c = avg.coeffs()[0];
        for x in avg.coeffs() {
            assert!((x - c).norm() < 2e-2, "not constant: {x} vs {c}");
        }
        assert!((c - f.mean()).norm() < 2e-2);
        assert!(c.norm() <= f.norm(NormKind::L1) + 2e-2);
    }

    #[test]
    fn abs_integral_of_unimodular_flow_is_one() {
        let g = GeneratorSpec::rotation_flow(2, 0.3);
        let chain = SemigroupChain::new(vec![g], vec![], 4.0, 1.0 / 64.0).unwrap();
        let f = FunctionVector::mode(2, 1).unwrap();
        let series = cesaro_abs_integral(&chain, &f, &[2.0, 4.0], 20).unwrap();
        for v in series.values() {
            let SeriesValue::AbsGrid(vals) = v else { unreachable!() };
            for &x in vals {
                assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
            }
        }
    }
}
