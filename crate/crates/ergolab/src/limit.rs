//! The limit predictor: unimodular point spectra with their eigenprojections,
//! resonant eigenvalue tuples (product one), and the projected-chain sum that
//! the entangled averages converge to on the reversible part.

use num_complex::Complex64;

use crate::entangle::EntangledChain;
use crate::error::{Error, Result};
use crate::function::{unit_phase, Basis, FunctionVector, NormKind};
use crate::jdlg::JdlgDecomposition;
use crate::linalg::{self, CMat};
use crate::operator::{Angle, Kind, Operator};
use crate::series::{CesaroSeries, SeriesValue};

const ENUMERATION_CAP: u128 = 10_000_000;

/// An eigenvalue angle in exact form: num/den + irr_mult * alpha turns, for
/// one shared irrational alpha. Enables integer resonance arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExactAngle {
    pub num: i64,
    pub den: i64,
    pub irr_mult: i64,
}

impl ExactAngle {
    fn reduced(num: i64, den: i64, irr_mult: i64) -> Self {
        debug_assert!(den > 0);
        let num = num.rem_euclid(den);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        Self {
            num: num / g,
            den: den / g,
            irr_mult,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One unimodular eigenvalue with its spectral projector.
#[derive(Clone, Debug)]
pub struct SpectrumEntry {
    pub lambda: Complex64,
    pub projector: CMat,
    pub multiplicity: usize,
    /// Exact angle when the operator declares a rotation lattice.
    pub exact: Option<ExactAngle>,
}

/// The unimodular point spectrum of one operator.
#[derive(Clone, Debug)]
pub struct PointSpectrum {
    basis: Basis,
    entries: Vec<SpectrumEntry>,
    /// The shared irrational base angle, when exact entries use irr_mult.
    irr_base: Option<f64>,
}

impl PointSpectrum {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn irr_base(&self) -> Option<f64> {
        self.irr_base
    }

    pub fn is_exact(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.exact.is_some())
    }

    /// Applies the eigenprojection for entry `i`.
    pub fn project(&self, i: usize, f: &FunctionVector) -> Result<FunctionVector> {
        if f.basis() != self.basis {
            return Err(Error::Dimension("spectrum basis mismatch".into()));
        }
        FunctionVector::new(self.basis, linalg::matvec(&self.entries[i].projector, f.coeffs()))
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Clusters unimodular eigenvalues by angle. Gaps below tol_sep merge; gaps
/// in [tol_sep, 10 tol_sep) are ambiguous and rejected.
fn cluster_by_angle(lambdas: &[Complex64], tol_sep: f64) -> Result<Vec<Vec<usize>>> {
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    let angle = |i: usize| lambdas[i].arg().rem_euclid(2.0 * std::f64::consts::PI)
        / (2.0 * std::f64::consts::PI);
    order.sort_by(|&a, &b| angle(a).partial_cmp(&angle(b)).unwrap());
    let mut clusters: Vec<Vec<usize>> = vec![vec![order[0]]];
    for w in order.windows(2) {
        let gap = circular_distance(angle(w[1]), angle(w[0]));
        if gap < tol_sep {
            clusters.last_mut().unwrap().push(w[1]);
        } else {
            if gap < 10.0 * tol_sep {
                return Err(Error::ClusterAmbiguity(gap));
            }
            clusters.push(vec![w[1]]);
        }
    }
    // wraparound: first and last cluster may meet across angle 0
    if clusters.len() > 1 {
        let first = clusters[0][0];
        let last = *clusters.last().unwrap().last().unwrap();
        let gap = circular_distance(angle(first), angle(last));
        if gap < tol_sep {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        } else if gap < 10.0 * tol_sep {
            return Err(Error::ClusterAmbiguity(gap));
        }
    }
    Ok(clusters)
}

/// Groups the reversible eigenpairs of `t` into eigenvalue clusters with
/// spectral projectors. Rotations and permutations carry exact angles.
pub fn point_spectrum(
    t: &Operator,
    d: &JdlgDecomposition,
    tol_sep: f64,
) -> Result<PointSpectrum> {
    let basis = t.basis();
    let dim = basis.len();
    match t.kind() {
        Kind::DiagonalSpectral { mu } => {
            let cutoff = dim / 2;
            let unimodular: Vec<(usize, Complex64)> = mu
                .iter()
                .enumerate()
                .filter(|(_, lam)| (lam.norm() - 1.0).abs() < d.tol_unimodular())
                .map(|(i, lam)| (i, *lam))
                .collect();
            let mut entries = Vec::new();
            let mut irr_base = None;
            if let Some(angle) = t.angle() {
                // exact lattice: group modes by reduced angle
                let mut groups: Vec<(ExactAngle, Vec<usize>)> = Vec::new();
                for &(i, _) in &unimodular {
                    let m = i as i64 - cutoff as i64;
                    let exact = match angle {
                        Angle::Rational { num, den } => {
                            ExactAngle::reduced((m * num).rem_euclid(den), den, 0)
                        }
                        Angle::Decimal(a) => {
                            irr_base = Some(a);
                            ExactAngle { num: 0, den: 1, irr_mult: m }
                        }
                    };
                    match groups.iter_mut().find(|(e, _)| *e == exact) {
                        Some((_, idxs)) => idxs.push(i),
                        None => groups.push((exact, vec![i])),
                    }
                }
                for (exact, idxs) in groups {
                    let mut p = CMat::zeros((dim, dim));
                    for &i in &idxs {
                        p[(i, i)] = Complex64::new(1.0, 0.0);
                    }
                    entries.push(SpectrumEntry {
                        lambda: mu[idxs[0]],
                        projector: p,
                        multiplicity: idxs.len(),
                        exact: Some(exact),
                    });
                }
            } else {
                let lambdas: Vec<Complex64> = unimodular.iter().map(|&(_, l)| l).collect();
                for cluster in cluster_by_angle(&lambdas, tol_sep)? {
                    let mut p = CMat::zeros((dim, dim));
                    for &ci in &cluster {
                        let i = unimodular[ci].0;
                        p[(i, i)] = Complex64::new(1.0, 0.0);
                    }
                    entries.push(SpectrumEntry {
                        lambda: lambdas[cluster[0]],
                        projector: p,
                        multiplicity: cluster.len(),
                        exact: None,
                    });
                }
            }
            Ok(PointSpectrum { basis, entries, irr_base })
        }
        Kind::GridPermutation { cycles, .. } => {
            // eigenvalues exp(2 pi i j / L) per cycle; exact angles j/L.
            // Orthogonal projector (wrt the normalized grid inner product):
            // P = (1/G) sum v v^H over the cluster's eigenvectors.
            let mut groups: Vec<(ExactAngle, CMat, Complex64, usize)> = Vec::new();
            let g = dim as f64;
            for cyc in cycles {
                let l = cyc.len();
                let scale = (g / l as f64).sqrt();
                for j in 0..l {
                    let exact = ExactAngle::reduced(j as i64, l as i64, 0);
                    let lam = unit_phase(exact.num as f64 / exact.den as f64);
                    let mut v = vec![Complex64::new(0.0, 0.0); dim];
                    for (tstep, &gpt) in cyc.iter().enumerate() {
                        v[gpt] = unit_phase((j * tstep % l) as f64 / l as f64) * scale;
                    }
                    let idx = match groups.iter().position(|(e, ..)| *e == exact) {
                        Some(i) => i,
                        None => {
                            groups.push((exact, CMat::zeros((dim, dim)), lam, 0));
                            groups.len() - 1
                        }
                    };
                    let p = &mut groups[idx].1;
                    for (r, vr) in v.iter().enumerate() {
                        for (c, vc) in v.iter().enumerate() {
                            p[(r, c)] += vr * vc.conj() / g;
                        }
                    }
                    groups[idx].3 += 1;
                }
            }
            let entries = groups
                .into_iter()
                .map(|(exact, projector, lambda, multiplicity)| SpectrumEntry {
                    lambda,
                    projector,
                    multiplicity,
                    exact: Some(exact),
                })
                .collect();
            Ok(PointSpectrum { basis, entries, irr_base: None })
        }
        Kind::DenseSpectral { matrix } | Kind::DenseSpatial { matrix } => {
            let lambdas: Vec<Complex64> =
                d.reversible_pairs().iter().map(|(l, _)| *l).collect();
            let mut entries = Vec::new();
            for cluster in cluster_by_angle(&lambdas, tol_sep)? {
                let center = lambdas[cluster[0]];
                let radius = tol_sep.max(10.0 * d.tol_unimodular());
                let projector = linalg::spectral_projector(
                    matrix,
                    |lam| {
                        (lam.norm() - 1.0).abs() < d.tol_unimodular()
                            && (lam - center).norm() < radius
                    },
                    1e8,
                )?;
                entries.push(SpectrumEntry {
                    lambda: center,
                    projector,
                    multiplicity: cluster.len(),
                    exact: None,
                });
            }
            Ok(PointSpectrum { basis, entries, irr_base: None })
        }
    }
}

/// How tuple products are matched to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchMode {
    ExactLattice,
    Numeric,
}

/// All eigenvalue tuples (one entry index per spectrum) whose product is 1.
#[derive(Clone, Debug)]
pub struct ResonanceSet {
    pub tuples: Vec<Vec<usize>>,
    pub mode: MatchMode,
    pub tol_match: f64,
}

fn exact_resonant(spectra: &[&PointSpectrum], cap: u128) -> Result<Vec<Vec<usize>>> {
    let sizes: Vec<usize> = spectra.iter().map(|s| s.entries.len()).collect();
    let total: u128 = sizes.iter().map(|&s| s as u128).product();
    if total > cap {
        return Err(Error::EnumerationTooLarge(total));
    }
    let mut tuples = Vec::new();
    let mut idx = vec![0usize; spectra.len()];
    'outer: loop {
        // sum of exact angles: rational part in i128 over a running lcm,
        // irrational multiples added as integers
        let mut num: i128 = 0;
        let mut den: i128 = 1;
        let mut irr: i64 = 0;
        for (j, s) in spectra.iter().enumerate() {
            let e = s.entries[idx[j]].exact.expect("exact mode requires exact angles");
            let ed = e.den as i128;
            num = num * ed + e.num as i128 * den;
            den *= ed;
            irr += e.irr_mult;
        }
        if irr == 0 && num.rem_euclid(den) == 0 {
            tuples.push(idx.clone());
        }
        // odometer increment
        for j in (0..idx.len()).rev() {
            idx[j] += 1;
            if idx[j] < sizes[j] {
                continue 'outer;
            }
            idx[j] = 0;
            if j == 0 {
                return Ok(tuples);
            }
        }
    }
}

/// Expands all index tuples over `spectra[range]` with their products.
fn half_products(
    spectra: &[&PointSpectrum],
    range: std::ops::Range<usize>,
) -> Vec<(Complex64, Vec<usize>)> {
    let mut out: Vec<(Complex64, Vec<usize>)> = vec![(Complex64::new(1.0, 0.0), Vec::new())];
    for j in range {
        let mut next = Vec::with_capacity(out.len() * spectra[j].entries.len());
        for (p, idxs) in &out {
            for (i, e) in spectra[j].entries.iter().enumerate() {
                let mut v = idxs.clone();
                v.push(i);
                next.push((p * e.lambda, v));
            }
        }
        out = next;
    }
    out
}

fn numeric_resonant(
    spectra: &[&PointSpectrum],
    tol_match: f64,
    cap: u128,
) -> Result<Vec<Vec<usize>>> {
    let total: u128 = spectra
        .iter()
        .map(|s| s.entries.len() as u128)
        .product();
    if total > cap {
        return Err(Error::EnumerationTooLarge(total));
    }
    // meet in the middle: sort left-half products by angle, then match each
    // right-half product against the conjugate target angle
    let split = spectra.len() / 2;
    let mut left = half_products(spectra, 0..split);
    let right = half_products(spectra, split..spectra.len());
    let angle_of = |c: Complex64| c.arg().rem_euclid(2.0 * std::f64::consts::PI);
    left.sort_by(|a, b| angle_of(a.0).partial_cmp(&angle_of(b.0)).unwrap());
    let left_angles: Vec<f64> = left.iter().map(|(p, _)| angle_of(*p)).collect();
    // chord tol_match corresponds to arc <= pi * tol_match; search a window
    // 10x wider to detect products straddling the tolerance
    let window = 10.0 * tol_match;
    let mut tuples = Vec::new();
    for (rp, ridx) in &right {
        let target = angle_of(rp.conj());
        let lo = left_angles.partition_point(|&a| a < target - window);
        let mut scan = |i: usize| -> Result<()> {
            let (lp, lidx) = &left[i];
            let dist = (lp * rp - Complex64::new(1.0, 0.0)).norm();
            if dist < tol_match {
                let mut v = lidx.clone();
                v.extend_from_slice(ridx);
                tuples.push(v);
            } else if dist < 10.0 * tol_match {
                return Err(Error::ToleranceOverlap {
                    dist,
                    tol: tol_match,
                });
            }
            Ok(())
        };
        for i in lo..left.len() {
            if left_angles[i] > target + window {
                break;
            }
            scan(i)?;
        }
        // wraparound near angle 0 / 2 pi
        if target < window {
            for i in (0..left.len()).rev() {
                if left_angles[i] < 2.0 * std::f64::consts::PI + target - window {
                    break;
                }
                scan(i)?;
            }
        } else if target > 2.0 * std::f64::consts::PI - window {
            for i in 0..left.len() {
                if left_angles[i] > target + window - 2.0 * std::f64::consts::PI {
                    break;
                }
                scan(i)?;
            }
        }
    }
    tuples.sort();
    tuples.dedup();
    Ok(tuples)
}

/// Finds all product-one tuples. Uses exact integer lattice arithmetic when
/// every spectrum carries exact angles over at most one shared irrational;
/// otherwise matches numerically within tol_match.
pub fn resonant_tuples(spectra: &[&PointSpectrum], tol_match: f64) -> Result<ResonanceSet> {
    if spectra.is_empty() {
        return Err(Error::Invalid("at least one spectrum required".into()));
    }
    let bases: Vec<f64> = spectra.iter().filter_map(|s| s.irr_base).collect();
    let shared_base = bases.windows(2).all(|w| w[0] == w[1]);
    let exact_ok = spectra.iter().all(|s| s.is_exact()) && shared_base;
    if exact_ok {
        Ok(ResonanceSet {
            tuples: exact_resonant(spectra, ENUMERATION_CAP)?,
            mode: MatchMode::ExactLattice,
            tol_match,
        })
    } else {
        Ok(ResonanceSet {
            tuples: numeric_resonant(spectra, tol_match, ENUMERATION_CAP)?,
            mode: MatchMode::Numeric,
        tol_match,
        })
    }
}

/// Which reading of the limit formula to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LimitForm {
    /// Sum over (lambda_0..lambda_a) with product 1 of
    /// P_a A_{a-1} ... A_1 P_1 A_0 P_0 f: includes the leading pair, the
    /// form forced by the eigenvector computation. Default.
    #[default]
    WithLeadingPair,
    /// Sum over (lambda_1..lambda_a) with product 1 of
    /// P_a A_{a-1} ... A_1 P_1 f: the formula as printed, without A_0 or a
    /// decomposition over the first spectrum.
    AsPrinted,
}

/// Evaluates the predicted limit of the entangled average over the resonant
/// tuples. For `WithLeadingPair`, `spectra` and the tuples cover T_0..T_a;
/// for `AsPrinted` they cover T_1..T_a only.
pub fn predict_limit(
    chain: &EntangledChain,
    f: &FunctionVector,
    spectra: &[&PointSpectrum],
    resonance: &ResonanceSet,
    form: LimitForm,
) -> Result<FunctionVector> {
    let a = chain.chain_length();
    let expected = match form {
        LimitForm::WithLeadingPair => a + 1,
        LimitForm::AsPrinted => a,
    };
    if spectra.len() != expected {
        return Err(Error::Dimension(format!(
            "{} spectra supplied, {expected} expected for this form",
            spectra.len()
        )));
    }
    let mut total = FunctionVector::zero(chain.basis());
    for tuple in &resonance.tuples {
        let mut x = match form {
            LimitForm::WithLeadingPair => {
                let mut x = spectra[0].project(tuple[0], f)?;
                for j in 1..=a {
                    x = chain.a_ops()[j - 1].apply(&x)?;
                    x = spectra[j].project(tuple[j], &x)?;
                }
                x
            }
            LimitForm::AsPrinted => {
                if a == 0 {
                    f.clone()
                } else {
                    let mut x = spectra[0].project(tuple[0], f)?;
                    for j in 1..a {
                        x = chain.a_ops()[j].apply(&x)?;
                        x = spectra[j].project(tuple[j], &x)?;
                    }
                    x
                }
            }
        };
        x = total.add(&x)?;
        total = x;
    }
    Ok(total)
}

/// Per-checkpoint distances between a predicted limit and an empirical
/// series, with a fitted decay exponent of distance against N.
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub checkpoints: Vec<u64>,
    pub sup_err: Vec<f64>,
    pub l2_err: Vec<f64>,
    /// least-squares slope of log(sup_err) vs log(N), when well defined
    pub decay_exponent: Option<f64>,
}

pub fn compare_limit(predicted: &FunctionVector, series: &CesaroSeries) -> Result<CompareReport> {
    let mut sup_err = Vec::with_capacity(series.len());
    let mut l2_err = Vec::with_capacity(series.len());
    for v in series.values() {
        let SeriesValue::Function(g) = v else {
            return Err(Error::Invalid(
                "limit comparison requires a plain (function-valued) series".into(),
            ));
        };
        let diff = g.sub(predicted)?;
        sup_err.push(
            diff.coeffs()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max),
        );
        l2_err.push(diff.norm(NormKind::L2));
    }
    let pts: Vec<(f64, f64)> = series
        .checkpoints()
        .iter()
        .zip(&sup_err)
        .filter(|(_, &e)| e > 1e-300)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    let decay_exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            Some((n * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };
    Ok(CompareReport {
        checkpoints: series.checkpoints().to_vec(),
        sup_err,
        l2_err,
        decay_exponent,
    })
}
