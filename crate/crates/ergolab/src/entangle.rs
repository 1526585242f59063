//! The averaging engine: entangled Cesàro averages
//! (1/N) sum_n T_a^n A_{a-1} ... A_0 T_0^n f, their absolute-value variants,
//! coefficient-sequence extraction, and weighted averages with Bohr
//! almost-periodic weights.
//!
//! All accumulation is compensated and chunked on a fixed partition, so
//! results are bit-identical regardless of thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::{Basis, FunctionVector, NormKind};
use crate::kahan::{KahanVecC64, KahanVecF64};
use crate::operator::{Operator, PowerPlan};
use crate::series::{validate_checkpoints, CesaroSeries, SeriesValue};

const CHUNK: u64 = 1024;

/// How chain constructors vet the powered operators.
#[derive(Clone, Copy, Debug)]
pub enum DsValidation {
    /// No empirical check (caller vouches for the operators).
    Skip,
    /// Randomized contraction check per operator; fails construction when a
    /// ratio exceeds 1 + tol. Grid kinds support tight tolerances; spectral
    /// kinds measure sampled norms and need a looser one.
    Empirical { trials: usize, tol: f64, seed: u64 },
}

/// The data of an entangled average: operators T_0..T_a to be powered and
/// intertwiners A_0..A_{a-1} applied between them, all on one basis.
pub struct EntangledChain {
    t_ops: Vec<Operator>,
    a_ops: Vec<Operator>,
    plans: Vec<Option<PowerPlan>>,
    basis: Basis,
}

impl EntangledChain {
    pub fn new(
        t_ops: Vec<Operator>,
        a_ops: Vec<Operator>,
        validation: DsValidation,
    ) -> Result<Self> {
        if t_ops.is_empty() || t_ops.len() != a_ops.len() + 1 {
            return Err(Error::Dimension(format!(
                "chain needs a+1 powered operators and a intertwiners (got {} and {})",
                t_ops.len(),
                a_ops.len()
            )));
        }
        let basis = t_ops[0].basis();
        for op in t_ops.iter().chain(a_ops.iter()) {
            if op.basis() != basis {
                return Err(Error::Dimension(format!(
                    "chain mixes {} with {}",
                    basis.describe(),
                    op.basis().describe()
                )));
            }
        }
        if let DsValidation::Empirical { trials, tol, seed } = validation {
            for (j, t) in t_ops.iter().enumerate() {
                let mut rng = crate::rng::substream(seed, &format!("chain-ds-{j}"));
                let report = t.validate_dunford_schwartz(trials, tol, &mut rng);
                if !report.passed {
                    return Err(Error::Invalid(format!(
                        "T_{j} fails the Dunford-Schwartz check: L1 ratio {}, sup ratio {}",
                        report.worst_l1_ratio, report.worst_linf_ratio
                    )));
                }
            }
        }
        // Dense powered operators get a diagonalization plan when the
        // eigenbasis is well conditioned; otherwise powers fall back to
        // binary exponentiation per term.
        let plans = t_ops
            .iter()
            .map(|t| {
                if t.is_dense() {
                    t.power_plan(1e8).ok()
                } else {
                    None
                }
            })
            .collect();
        Ok(Self {
            t_ops,
            a_ops,
            plans,
            basis,
        })
    }

    pub fn chain_length(&self) -> usize {
        self.a_ops.len()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn t_ops(&self) -> &[Operator] {
        &self.t_ops
    }

    pub fn a_ops(&self) -> &[Operator] {
        &self.a_ops
    }

    fn power(&self, j: usize, n: u64, f: &FunctionVector) -> Result<FunctionVector> {
        match &self.plans[j] {
            Some(plan) if n > 4 => plan.power_apply(n, f),
            _ => self.t_ops[j].power_apply(n, f),
        }
    }

    /// One term T_a^n A_{a-1} ... A_0 T_0^n f, evaluated right to left.
    pub fn term(&self, n: u64, f: &FunctionVector) -> Result<FunctionVector> {
        let mut x = self.power(0, n, f)?;
        for (j, a) in self.a_ops.iter().enumerate() {
            x = a.apply(&x)?;
            x = self.power(j + 1, n, &x)?;
        }
        Ok(x)
    }
}

/// Fixed chunk partition of 1..=last: boundaries at multiples of CHUNK and at
/// every checkpoint, so partial sums can be snapshotted deterministically.
fn chunk_ranges(checkpoints: &[u64]) -> Vec<(u64, u64)> {
    let last = *checkpoints.last().unwrap();
    let mut bounds: Vec<u64> = (1..)
        .map(|i| i * CHUNK)
        .take_while(|&b| b < last)
        .collect();
    bounds.extend_from_slice(checkpoints);
    bounds.sort_unstable();
    bounds.dedup();
    let mut ranges = Vec::with_capacity(bounds.len());
    let mut lo = 1u64;
    for b in bounds {
        ranges.push((lo, b));
        lo = b + 1;
    }
    ranges
}

/// Parallel chunked accumulation with a deterministic merge order.
fn chunked_series<S: Send>(
    checkpoints: &[u64],
    n: u64,
    init: impl Fn() -> S + Sync,
    add_term: impl Fn(u64, &mut S) -> Result<()> + Sync,
    merge: impl Fn(&mut S, S),
    snapshot: impl Fn(&S, u64) -> SeriesValue,
) -> Result<CesaroSeries> {
    validate_checkpoints(checkpoints, n)?;
    let ranges = chunk_ranges(checkpoints);
    let partials: Vec<S> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = init();
            for step in lo..=hi {
                add_term(step, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = init();
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for (&(_, hi), part) in ranges.iter().zip(partials) {
        merge(&mut total, part);
        while next < checkpoints.len() && checkpoints[next] == hi {
            values.push(snapshot(&total, hi));
            next += 1;
        }
    }
    CesaroSeries::new(checkpoints.to_vec(), values)
}

/// Partial means (1/N') sum_{n <= N'} T_a^n A_{a-1} ... A_0 T_0^n f.
pub fn cesaro_average(
    chain: &EntangledChain,
    f: &FunctionVector,
    n: u64,
    checkpoints: &[u64],
) -> Result<CesaroSeries> {
    let basis = chain.basis();
    let dim = basis.len();
    chunked_series(
        checkpoints,
        n,
        || KahanVecC64::zeros(dim),
        |step, acc| {
            acc.add_slice(chain.term(step, f)?.coeffs());
            Ok(())
        },
        |total, part| total.merge(&part),
        |total, n_prime| {
            let scale = 1.0 / n_prime as f64;
            let coeffs = total.values().into_iter().map(|c| c * scale).collect();
            SeriesValue::Function(
                FunctionVector::new(basis, coeffs).expect("accumulator length fixed"),
            )
        },
    )
}

/// Per-grid-point running mean of |term(x)|: the Cesàro average of absolute
/// values, evaluated on `g_eval` points.
pub fn cesaro_abs_average(
    chain: &EntangledChain,
    f: &FunctionVector,
    n: u64,
    checkpoints: &[u64],
    g_eval: usize,
) -> Result<CesaroSeries> {
    if let Basis::Grid { size } = chain.basis() {
        if g_eval != size {
            return Err(Error::Dimension(format!(
                "grid chain of size {size} cannot be sampled at {g_eval} points"
            )));
        }
    }
    chunked_series(
        checkpoints,
        n,
        || KahanVecF64::zeros(g_eval),
        |step, acc| {
            let term = chain.term(step, f)?;
            let spatial = match chain.basis() {
                Basis::Grid { .. } => term,
                Basis::Spectral { .. } => term.to_spatial(g_eval)?,
            };
            acc.add_abs_slice(spatial.coeffs());
            Ok(())
        },
        |total, part| total.merge(&part),
        |total, n_prime| {
            let scale = 1.0 / n_prime as f64;
            SeriesValue::AbsGrid(total.values().into_iter().map(|x| x * scale).collect())
        },
    )
}

/// A scalar weight sequence: either an explicit Bohr almost-periodic form
/// sum_k gamma_k^n q_k or values extracted from an orbit pairing.
#[derive(Clone, Debug)]
pub enum WeightSequence {
    Bohr {
        gammas: Vec<Complex64>,
        qs: Vec<Complex64>,
        values: Vec<Complex64>,
    },
    Extracted { values: Vec<Complex64> },
}

impl WeightSequence {
    /// a_1..a_N (index 0 holds a_1).
    pub fn values(&self) -> &[Complex64] {
        match self {
            WeightSequence::Bohr { values, .. } | WeightSequence::Extracted { values } => values,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.values().iter().map(|c| c.norm()).collect()
    }
}

/// The sequence a_n = sum_k gamma_k^n q_k for n = 1..N.
pub fn bohr_weight(gammas: &[Complex64], qs: &[Complex64], n: u64) -> Result<WeightSequence> {
    if gammas.len() != qs.len() {
        return Err(Error::Dimension(format!(
            "{} frequencies vs {} amplitudes",
            gammas.len(),
            qs.len()
        )));
    }
    for g in gammas {
        if (g.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnimodularGamma(g.norm()));
        }
    }
    let mut powers: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); gammas.len()];
    let mut values = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut a = Complex64::new(0.0, 0.0);
        for (p, (g, q)) in powers.iter_mut().zip(gammas.iter().zip(qs)) {
            *p *= g;
            a += *p * q;
        }
        values.push(a);
    }
    Ok(WeightSequence::Bohr {
        gammas: gammas.to_vec(),
        qs: qs.to_vec(),
        values,
    })
}

/// Extraction report: the observed maximum |lambda_n| against the a-priori
/// pairing bound ||f||_2 * ||A_0|| * max_j ||phi_j||_2.
#[derive(Clone, Debug)]
pub struct LambdaReport {
    pub max_modulus: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// The coefficient sequences lambda_{j,n} = <A_0 T_0^n f, phi_j> for n <= N.
pub fn extract_lambda_sequence(
    a0: &Operator,
    t0: &Operator,
    f: &FunctionVector,
    phis: &[FunctionVector],
    n: u64,
) -> Result<(Vec<WeightSequence>, LambdaReport)> {
    let mut sequences: Vec<Vec<Complex64>> =
        vec![Vec::with_capacity(n as usize); phis.len()];
    let mut max_modulus = 0.0_f64;
    let mut orbit = f.clone();
    for _ in 0..n {
        orbit = t0.apply(&orbit)?;
        let paired = a0.apply(&orbit)?;
        for (j, phi) in phis.iter().enumerate() {
            let lam = paired.inner(phi)?;
            max_modulus = max_modulus.max(lam.norm());
            sequences[j].push(lam);
        }
    }
    let bound = f.norm(NormKind::L2)
        * a0.l2_norm_bound()
        * phis
            .iter()
            .map(|p| p.norm(NormKind::L2))
            .fold(0.0, f64::max);
    let report = LambdaReport {
        max_modulus,
        bound,
        within_bound: max_modulus <= bound + 1e-12,
    };
    Ok((
        sequences
            .into_iter()
            .map(|values| WeightSequence::Extracted { values })
            .collect(),
        report,
    ))
}

/// Partial means (1/N') sum_{n <= N'} a_n T^n f.
pub fn weighted_average(
    t: &Operator,
    f: &FunctionVector,
    w: &WeightSequence,
    n: u64,
    checkpoints: &[u64],
) -> Result<CesaroSeries> {
    if (w.len() as u64) < n {
        return Err(Error::Dimension(format!(
            "weight sequence of length {} shorter than horizon {n}",
            w.len()
        )));
    }
    let basis = t.basis();
    let dim = basis.len();
    let weights = w.values();
    let plan = if t.is_dense() { t.power_plan(1e8).ok() } else { None };
    chunked_series(
        checkpoints,
        n,
        || KahanVecC64::zeros(dim),
        |step, acc| {
            let orbit = match &plan {
                Some(p) if step > 4 => p.power_apply(step, f)?,
                _ => t.power_apply(step, f)?,
            };
            let a_n = weights[(step - 1) as usize];
            acc.add_slice(&orbit.coeffs().iter().map(|c| c * a_n).collect::<Vec<_>>());
            Ok(())
        },
        |total, part| total.merge(&part),
        |total, n_prime| {
            let scale = 1.0 / n_prime as f64;
            let coeffs = total.values().into_iter().map(|c| c * scale).collect();
            SeriesValue::Function(
                FunctionVector::new(basis, coeffs).expect("accumulator length fixed"),
            )
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::unit_phase;
    use crate::operator::Angle;
    use crate::series::geometric_checkpoints;
    use approx::assert_abs_diff_eq;

    fn sup_diff(a: &FunctionVector, b: &FunctionVector) -> f64 {
        a.sub(b)
            .unwrap()
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    fn alpha() -> f64 {
        std::f64::consts::SQRT_2 - 1.0
    }

    #[test]
    fn plain_orbit_for_empty_intertwiner_list() {
        let t = Operator::rotation(Angle::Decimal(alpha()), 3);
        let chain = EntangledChain::new(vec![t.clone()], vec![], DsValidation::Skip).unwrap();
        let f = FunctionVector::mode(3, 2).unwrap();
        let term = chain.term(17, &f).unwrap();
        let direct = t.power_apply(17, &f).unwrap();
        assert_eq!(term.coeffs(), direct.coeffs());
    }

    #[test]
    fn rotation_projector_term_closed_form() {
        // T0 = T1 = rotation(alpha), A0 = mode-1 projector, f = e_1:
        // term = exp(2 pi i alpha 2n) e_1
        let t = Operator::rotation(Angle::Decimal(alpha()), 4);
        let a0 = Operator::mode_projector(4, &[1]).unwrap();
        let chain =
            EntangledChain::new(vec![t.clone(), t], vec![a0], DsValidation::Skip).unwrap();
        let f = FunctionVector::mode(4, 1).unwrap();
        for n in [1u64, 5, 100, 9999] {
            let term = chain.term(n, &f).unwrap();
            let expected = unit_phase(
                Angle::Decimal(alpha()).frac_of_multiple(2 * n as i128),
            );
            assert!((term.mode_coeff(1).unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_intertwiner_kills_terms() {
        let t = Operator::rotation(Angle::Decimal(alpha()), 3);
        let a0 = Operator::zero(Basis::Spectral { cutoff: 3 });
        let chain = EntangledChain::new(vec![t.clone(), t], vec![a0], DsValidation::Skip).unwrap();
        let mut rng = crate::rng::substream(40, "zero-a");
        let f = crate::rng::random_function(Basis::Spectral { cutoff: 3 }, &mut rng);
        let term = chain.term(7, &f).unwrap();
        assert!(term.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn identity_chain_average_is_f() {
        let basis = Basis::Grid { size: 9 };
        let id = Operator::identity(basis);
        let chain = EntangledChain::new(
            vec![id.clone(), id.clone()],
            vec![id],
            DsValidation::Empirical {
                trials: 10,
                tol: 1e-10,
                seed: 41,
            },
        )
        .unwrap();
        let mut rng = crate::rng::substream(41, "id-chain");
        let f = crate::rng::random_function(basis, &mut rng);
        let series =
            cesaro_average(&chain, &f, 3000, &geometric_checkpoints(3000)).unwrap();
        for v in series.values() {
            let SeriesValue::Function(g) = v else { unreachable!() };
            assert!(sup_diff(g, &f) < 1e-12);
        }
    }

    #[test]
    fn rotation_average_obeys_geometric_bound() {
        // a = 1 rotation/projector chain: |(1/N) sum exp(4 pi i alpha n)|
        // <= 2 / (N |1 - exp(4 pi i alpha)|)
        let t = Operator::rotation(Angle::Decimal(alpha()), 4);
        let a0 = Operator::mode_projector(4, &[1]).unwrap();
        let chain = EntangledChain::new(vec![t.clone(), t], vec![a0], DsValidation::Skip).unwrap();
        let f = FunctionVector::mode(4, 1).unwrap();
        let n = 20_000u64;
        let cps = geometric_checkpoints(n);
        let series = cesaro_average(&chain, &f, n, &cps).unwrap();
        let gap = (Complex64::new(1.0, 0.0) - unit_phase((2.0 * alpha()).rem_euclid(1.0))).norm();
        for (cp, v) in cps.iter().zip(series.values()) {
            let SeriesValue::Function(g) = v else { unreachable!() };
            assert!(g.norm(NormKind::L2) <= 2.0 / (*cp as f64 * gap) + 1e-12);
        }
    }

    #[test]
    fn permutation_chain_periodic_checkpoints_agree() {
        let t = Operator::permutation(vec![1, 2, 3, 0, 4]).unwrap(); // period 4
        let chain = EntangledChain::new(vec![t], vec![], DsValidation::Skip).unwrap();
        let mut rng = crate::rng::substream(42, "perm-period-avg");
        let f = crate::rng::random_function(Basis::Grid { size: 5 }, &mut rng);
        let cps = vec![4u64, 8, 12, 16];
        let series = cesaro_average(&chain, &f, 16, &cps).unwrap();
        let SeriesValue::Function(first) = &series.values()[0] else {
            unreachable!()
        };
        for v in &series.values()[1..] {
            let SeriesValue::Function(g) = v else { unreachable!() };
            assert!(sup_diff(g, first) < 1e-13);
        }
    }

    #[test]
    fn abs_average_of_zero_is_zero() {
        let t = Operator::rotation(Angle::Decimal(alpha()), 3);
        let chain = EntangledChain::new(vec![t], vec![], DsValidation::Skip).unwrap();
        let f = FunctionVector::zero(Basis::Spectral { cutoff: 3 });
        let series =
            cesaro_abs_average(&chain, &f, 100, &geometric_checkpoints(100), 28).unwrap();
        for v in series.values() {
            let SeriesValue::AbsGrid(g) = v else { unreachable!() };
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn abs_average_of_unimodular_orbit_is_constant_one() {
        // |e_1(x + n alpha)| = 1 pointwise, so the absolute average stays 1
        // even though the plain average tends to 0.
        let t = Operator::rotation(Angle::Decimal(alpha()), 2);
        let chain = EntangledChain::new(vec![t], vec![], DsValidation::Skip).unwrap();
        let f = FunctionVector::mode(2, 1).unwrap();
        let series =
            cesaro_abs_average(&chain, &f, 500, &geometric_checkpoints(500), 20).unwrap();
        for v in series.values() {
            let SeriesValue::AbsGrid(g) = v else { unreachable!() };
            for &x in g {
                assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn averages_are_linear_in_f() {
        let mut rng = crate::rng::substream(43, "linearity");
        let t0 = Operator::doubly_stochastic(8, &mut rng);
        let t1 = Operator::multiplier_permutation(8, 3).unwrap();
        let a0 = Operator::doubly_stochastic(8, &mut rng);
        let chain = EntangledChain::new(vec![t0, t1], vec![a0], DsValidation::Skip).unwrap();
        let basis = Basis::Grid { size: 8 };
        let f = crate::rng::random_function(basis, &mut rng);
        let g = crate::rng::random_function(basis, &mut rng);
        let cps = geometric_checkpoints(512);
        let sf = cesaro_average(&chain, &f, 512, &cps).unwrap();
        let sg = cesaro_average(&chain, &g, 512, &cps).unwrap();
        let sfg = cesaro_average(&chain, &f.add(&g).unwrap(), 512, &cps).unwrap();
        for ((a, b), c) in sf.values().iter().zip(sg.values()).zip(sfg.values()) {
            let (SeriesValue::Function(a), SeriesValue::Function(b), SeriesValue::Function(c)) =
                (a, b, c)
            else {
                unreachable!()
            };
            assert!(sup_diff(&a.add(b).unwrap(), c) < 1e-10);
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let mut rng = crate::rng::substream(44, "determinism");
        let t0 = Operator::doubly_stochastic(16, &mut rng);
        let t1 = Operator::multiplier_permutation(16, 3).unwrap();
        let a0 = Operator::doubly_stochastic(16, &mut rng);
        let chain = EntangledChain::new(vec![t0, t1], vec![a0], DsValidation::Skip).unwrap();
        let f = crate::rng::random_function(Basis::Grid { size: 16 }, &mut rng);
        let cps = geometric_checkpoints(5000);
        let parallel = cesaro_abs_average(&chain, &f, 5000, &cps, 16).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| cesaro_abs_average(&chain, &f, 5000, &cps, 16).unwrap());
        for (a, b) in parallel.values().iter().zip(single.values()) {
            let (SeriesValue::AbsGrid(a), SeriesValue::AbsGrid(b)) = (a, b) else {
                unreachable!()
            };
            assert_eq!(a, b);
        }
    }

    #[test]
    fn birkhoff_limit_on_transitive_permutation_is_constant() {
        // transitive action: the average at full periods is exactly the mean,
        // a constant function c with |c| <= mean |f|
        let g = 12usize;
        let t = Operator::permutation((0..g).map(|i| (i + 1) % g).collect()).unwrap();
        let chain = EntangledChain::new(vec![t], vec![], DsValidation::Skip).unwrap();
        let mut rng = crate::rng::substream(45, "birkhoff");
        let f = crate::rng::random_function(Basis::Grid { size: g }, &mut rng);
        let n = (g * 50) as u64;
        let series = cesaro_average(&chain, &f, n, &[n]).unwrap();
        let SeriesValue::Function(avg) = &series.values()[0] else {
            unreachable!()
        };
        let c = avg.coeffs()[0];
        for x in avg.coeffs() {
            assert!((x - c).norm() < 1e-13);
        }
        assert!((c - f.mean()).norm() < 1e-13);
        assert!(c.norm() <= f.norm(NormKind::L1) + 1e-13);
    }

    #[test]
    fn bohr_weight_examples() {
        let one = Complex64::new(1.0, 0.0);
        let w = bohr_weight(&[one], &[one], 10).unwrap();
        assert!(w.values().iter().all(|a| (a - one).norm() < 1e-15));
        let w = bohr_weight(&[-one], &[one], 10).unwrap();
        for (i, a) in w.values().iter().enumerate() {
            let expect = if (i + 1) % 2 == 0 { one } else { -one };
            assert!((a - expect).norm() < 1e-14);
        }
        // l1 bound: |a_n| <= sum |q_k|
        let beta = unit_phase(0.137);
        let w = bohr_weight(
            &[beta, one],
            &[Complex64::new(0.7, 0.0), Complex64::new(0.3, 0.0)],
            1000,
        )
        .unwrap();
        assert!(w.values().iter().all(|a| a.norm() <= 1.0 + 1e-12));
        // non-unimodular frequency rejected
        assert!(matches!(
            bohr_weight(&[Complex64::new(0.9, 0.0)], &[one], 5),
            Err(Error::NonUnimodularGamma(_))
        ));
    }

    #[test]
    fn constant_weight_reproduces_birkhoff_average() {
        let t = Operator::multiplier_permutation(7, 3).unwrap();
        let mut rng = crate::rng::substream(46, "w-const");
        let f = crate::rng::random_function(Basis::Grid { size: 7 }, &mut rng);
        let one = Complex64::new(1.0, 0.0);
        let w = bohr_weight(&[one], &[one], 200).unwrap();
        let cps = geometric_checkpoints(200);
        let weighted = weighted_average(&t, &f, &w, 200, &cps).unwrap();
        let chain = EntangledChain::new(vec![t], vec![], DsValidation::Skip).unwrap();
        let plain = cesaro_average(&chain, &f, 200, &cps).unwrap();
        for (a, b) in weighted.values().iter().zip(plain.values()) {
            let (SeriesValue::Function(a), SeriesValue::Function(b)) = (a, b) else {
                unreachable!()
            };
            assert!(sup_diff(a, b) < 1e-14);
        }
    }

    #[test]
    fn unimodular_weight_equals_scaled_operator_average() {
        // a_n = gamma^n weight == plain average of (gamma T)
        let mut rng = crate::rng::substream(47, "w-gamma");
        for _ in 0..5 {
            let gamma = crate::rng::random_phase(&mut rng);
            let t = Operator::doubly_stochastic(6, &mut rng);
            let f = crate::rng::random_function(Basis::Grid { size: 6 }, &mut rng);
            let w = bohr_weight(&[gamma], &[Complex64::new(1.0, 0.0)], 300).unwrap();
            let cps = geometric_checkpoints(300);
            let weighted = weighted_average(&t, &f, &w, 300, &cps).unwrap();
            let scaled_chain = EntangledChain::new(
                vec![t.scaled(gamma).unwrap()],
                vec![],
                DsValidation::Skip,
            )
            .unwrap();
            let plain = cesaro_average(&scaled_chain, &f, 300, &cps).unwrap();
            for (a, b) in weighted.values().iter().zip(plain.values()) {
                let (SeriesValue::Function(a), SeriesValue::Function(b)) = (a, b) else {
                    unreachable!()
                };
                assert!(sup_diff(a, b) < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_extraction_cases() {
        let cutoff = 4;
        let basis = Basis::Spectral { cutoff };
        let t = Operator::rotation(Angle::Decimal(alpha()), cutoff);
        let id = Operator::identity(basis);
        let f = FunctionVector::mode(cutoff, 1).unwrap();
        // phi = e_1: lambda_n = exp(2 pi i alpha n), modulus 1
        let phi1 = FunctionVector::mode(cutoff, 1).unwrap();
        // phi orthogonal to the orbit: zero sequence
        let phi2 = FunctionVector::mode(cutoff, 2).unwrap();
        let (seqs, report) =
            extract_lambda_sequence(&id, &t, &f, &[phi1, phi2], 100).unwrap();
        for (i, lam) in seqs[0].values().iter().enumerate() {
            let expected = unit_phase(
                Angle::Decimal(alpha()).frac_of_multiple((i + 1) as i128),
            );
            assert!((lam - expected).norm() < 1e-10);
            assert_abs_diff_eq!(lam.norm(), 1.0, epsilon = 1e-12);
        }
        assert!(seqs[1].values().iter().all(|l| l.norm() < 1e-15));
        assert!(report.within_bound);
        assert_abs_diff_eq!(report.max_modulus, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_modulus_respects_pairing_bound() {
        let mut rng = crate::rng::substream(48, "lambda-bound");
        let basis = Basis::Grid { size: 10 };
        let t = Operator::multiplier_permutation(10, 3).unwrap();
        let a0 = Operator::doubly_stochastic(10, &mut rng);
        let f = crate::rng::random_function(basis, &mut rng);
        let phis: Vec<FunctionVector> = (0..4)
            .map(|_| crate::rng::random_function(basis, &mut rng))
            .collect();
        let (_, report) = extract_lambda_sequence(&a0, &t, &f, &phis, 500).unwrap();
        assert!(report.within_bound, "{report:?}");
    }

    #[test]
    fn ds_validation_rejects_expanding_operators() {
        let m = crate::linalg::identity(4).mapv(|c| c * Complex64::new(1.5, 0.0));
        let t = Operator::dense_spatial(m).unwrap();
        let err = EntangledChain::new(
            vec![t],
            vec![],
            DsValidation::Empirical {
                trials: 5,
                tol: 1e-10,
                seed: 49,
            },
        );
        assert!(err.is_err());
    }
}
