//! The Volterra operator (Vf)(x) = int_0^x f(t) dt on the truncated Fourier
//! basis: its three-part split V = V1 + V2 + V3, powers, the uniform bound on
//! the rank-one part, and the twisted-compactness certificate that splits the
//! space into a finite block and an L-infinity-small remainder.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::function::{
    sawtooth_coefficients, sawtooth_truncation_residual, Basis, FunctionVector, NormKind,
};
use crate::linalg::CMat;
use crate::operator::{Angle, Operator};

const TAIL_SUM_LIMIT: u64 = 10_000_000;

/// The split of V^k on modes -M..M.
///
/// v3 is diagonal with (2 pi i m)^{-k} away from mode 0; v1 and v2 are the
/// rank-one pieces (for k = 1: v1 f = c_0 * J_M, v2 f = -(1/2 pi i) *
/// sum_{m != 0} (c_m / m) e_0); for k > 1 all words with at least one V1 or
/// V2 factor are collected into `cross`.
#[derive(Clone, Debug)]
pub struct VolterraParts {
    cutoff: usize,
    k: u32,
    v1: Operator,
    v2: Operator,
    v3: Operator,
    cross: Option<Operator>,
}

impl VolterraParts {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn v1(&self) -> &Operator {
        &self.v1
    }

    pub fn v2(&self) -> &Operator {
        &self.v2
    }

    pub fn v3(&self) -> &Operator {
        &self.v3
    }

    /// L2 distance between the true ramp J(x) = x and its truncation J_M:
    /// the representation error committed by keeping v1's range in the span.
    pub fn truncation_residual(&self) -> f64 {
        sawtooth_truncation_residual(self.cutoff)
    }

    /// Applies the full operator V^k.
    pub fn apply_full(&self, f: &FunctionVector) -> Result<FunctionVector> {
        let mut out = self.v3.apply(f)?;
        match &self.cross {
            Some(cross) => out = out.add(&cross.apply(f)?)?,
            None => {
                out = out.add(&self.v1.apply(f)?)?;
                out = out.add(&self.v2.apply(f)?)?;
            }
        }
        Ok(out)
    }
}

fn v3_diagonal(cutoff: usize, k: u32) -> Vec<Complex64> {
    let m0 = cutoff as i64;
    (0..2 * cutoff + 1)
        .map(|i| {
            let m = i as i64 - m0;
            if m == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                (Complex64::new(0.0, 2.0 * std::f64::consts::PI * m as f64)).powi(-(k as i32))
            }
        })
        .collect()
}

/// Builds V^k on modes -M..M. k is capped at 4: the cross-term count grows
/// as 3^k and larger powers have no use here.
pub fn build_volterra(cutoff: usize, k: u32) -> Result<VolterraParts> {
    if cutoff < 1 {
        return Err(Error::Invalid("cutoff must be at least 1".into()));
    }
    if k < 1 || k > 4 {
        return Err(Error::Invalid(format!(
            "power k = {k} outside the supported range 1..=4"
        )));
    }
    let n = 2 * cutoff + 1;
    let m0 = cutoff;
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);

    // v1: f -> c_0 * J_M  (column at mode 0)
    let ramp = sawtooth_coefficients(cutoff);
    let mut m1 = CMat::zeros((n, n));
    for (i, c) in ramp.coeffs().iter().enumerate() {
        m1[(i, m0)] = *c;
    }
    // v2: f -> -(1/2 pi i) sum_{m != 0} (c_m / m) e_0  (row at mode 0)
    let mut m2 = CMat::zeros((n, n));
    for j in 0..n {
        let m = j as i64 - m0 as i64;
        if m != 0 {
            m2[(m0, j)] = -1.0 / (two_pi_i * m as f64);
        }
    }
    let d3 = v3_diagonal(cutoff, 1);

    let v1 = Operator::dense_spectral(cutoff, m1.clone())?;
    let v2 = Operator::dense_spectral(cutoff, m2.clone())?;
    let v3 = Operator::diagonal_spectral(cutoff, v3_diagonal(cutoff, k))?;

    let cross = if k == 1 {
        None
    } else {
        // all length-k words in {V1, V2, V3} minus the pure-V3 word
        let mut m3 = CMat::zeros((n, n));
        for (i, d) in d3.iter().enumerate() {
            m3[(i, i)] = *d;
        }
        let full = &m1 + &m2 + &m3;
        let mut full_k = full.clone();
        let mut m3_k = m3.clone();
        for _ in 1..k {
            full_k = full_k.dot(&full);
            m3_k = m3_k.dot(&m3);
        }
        Some(Operator::dense_spectral(cutoff, full_k - m3_k)?)
    };

    Ok(VolterraParts {
        cutoff,
        k,
        v1,
        v2,
        v3,
        cross,
    })
}

/// Outcome of the randomized check of the uniform bound
/// ||V2 f||_inf <= ||f||_2 / (2 sqrt 3).
#[derive(Clone, Debug)]
pub struct A2Report {
    pub trials: usize,
    pub bound: f64,
    /// worst sup_bound(V2 f) / (||f||_2 / 2 sqrt 3)
    pub worst_l2_ratio: f64,
    /// worst sup_bound(V2 f) / (sampled ||f||_inf / 2 sqrt 3)
    pub worst_sup_ratio: f64,
    pub passed: bool,
}

/// Checks ||V2 f||_inf <= ||f||_2 / (2 sqrt 3) over random spectral f, and
/// the chained ||f||_inf form on grid samples.
pub fn a2_bound_check(parts: &VolterraParts, trials: usize, rng: &mut impl Rng) -> A2Report {
    let bound = 1.0 / (2.0 * 3.0_f64.sqrt());
    let basis = Basis::Spectral {
        cutoff: parts.cutoff,
    };
    let mut worst_l2 = 0.0_f64;
    let mut worst_sup = 0.0_f64;
    for _ in 0..trials {
        let f = crate::rng::random_unit_function(basis, rng);
        let v2f = parts.v2.apply(&f).expect("basis matches");
        let lhs = v2f.sup_bound();
        worst_l2 = worst_l2.max(lhs / (f.norm(NormKind::L2) / (2.0 * 3.0_f64.sqrt())));
        let sup = f.norm(NormKind::Sup);
        if sup > 1e-12 {
            worst_sup = worst_sup.max(lhs / (sup / (2.0 * 3.0_f64.sqrt())));
        }
    }
    A2Report {
        trials,
        bound,
        worst_l2_ratio: worst_l2,
        worst_sup_ratio: worst_sup,
        passed: worst_l2 <= 1.0 + 1e-12 && worst_sup <= 1.0 + 1e-12,
    }
}

/// Certificate that modes |m| >= M_min form an L-infinity-small remainder:
/// with U = span{e_m : |m| < M_min}, every ||f||_2 <= 1 satisfies
/// ||P_R V3 f||_inf <= (1/2 pi) sqrt(tail_sum) < epsilon.
#[derive(Clone, Debug)]
pub struct CompactnessCertificate {
    pub epsilon: f64,
    pub m_min: usize,
    pub tail_sum: f64,
    pub certified_bound: f64,
}

/// Rigorous upper bound on sum_{|m| >= m} 1/m^2, by direct summation up to
/// TAIL_SUM_LIMIT plus the integral remainder bound 1/L for the rest.
/// The certificate search below shares one backward pass instead; this
/// single-point form is kept as its cross-check.
#[cfg_attr(not(test), allow(dead_code))]
fn tail_sum_upper(m: usize) -> f64 {
    debug_assert!(m >= 1);
    let mut acc = crate::kahan::KahanF64::new();
    for j in (m as u64..=TAIL_SUM_LIMIT).rev() {
        let x = j as f64;
        acc.add(1.0 / (x * x));
    }
    2.0 * (acc.value() + 1.0 / TAIL_SUM_LIMIT as f64)
}

/// Finds the minimal M with sum_{|m| >= M} 1/m^2 < 4 pi^2 epsilon^2.
pub fn twisted_compactness_certificate(
    epsilon: f64,
    m_cap: usize,
) -> Result<CompactnessCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let threshold = 4.0 * std::f64::consts::PI.powi(2) * epsilon * epsilon;
    // One backward pass gives every suffix sum up to the cap at once.
    let top = (m_cap + 1).max(2);
    let mut suffix = vec![0.0_f64; top + 1];
    let mut acc = crate::kahan::KahanF64::new();
    let remainder = 1.0 / TAIL_SUM_LIMIT as f64;
    let mut j = TAIL_SUM_LIMIT;
    while j >= top as u64 {
        let x = j as f64;
        acc.add(1.0 / (x * x));
        j -= 1;
    }
    suffix[top] = 2.0 * (acc.value() + remainder);
    for m in (1..top).rev() {
        let x = m as f64;
        acc.add(1.0 / (x * x));
        suffix[m] = 2.0 * (acc.value() + remainder);
    }
    for m in 1..=m_cap {
        if suffix[m] < threshold {
            let tail_sum = suffix[m];
            return Ok(CompactnessCertificate {
                epsilon,
                m_min: m,
                tail_sum,
                certified_bound: tail_sum.sqrt() / (2.0 * std::f64::consts::PI),
            });
        }
    }
    Err(Error::CapExceeded { cap: m_cap })
}

/// Projects onto the remainder modes |m| >= m_min.
fn project_remainder(f: &FunctionVector, m_min: usize) -> FunctionVector {
    let Basis::Spectral { cutoff } = f.basis() else {
        unreachable!("certificate checks run on spectral vectors")
    };
    let m0 = cutoff as i64;
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if (i as i64 - m0).unsigned_abs() as usize >= m_min {
                *c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    FunctionVector::new(f.basis(), coeffs).expect("same length")
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub trials: usize,
    pub violations: usize,
    pub worst_value: f64,
    pub epsilon: f64,
    pub passed: bool,
}

/// Randomized check of the certificate: for random ||f||_2 <= 1, random
/// n <= 1000, and random rotations T0, verifies
/// sup_bound(P_R V3 T0^n f) < epsilon.
pub fn verify_certificate(
    cert: &CompactnessCertificate,
    parts: &VolterraParts,
    trials: usize,
    rng: &mut impl Rng,
) -> CertificateReport {
    let basis = Basis::Spectral {
        cutoff: parts.cutoff,
    };
    let mut violations = 0usize;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let f = crate::rng::random_unit_function(basis, rng);
        let n = rng.gen_range(1..=1000u64);
        let t0 = Operator::rotation(Angle::Decimal(rng.gen_range(0.0..1.0)), parts.cutoff);
        let orbit = t0.power_apply(n, &f).expect("rotation basis matches");
        let v3f = parts.v3.apply(&orbit).expect("basis matches");
        let value = project_remainder(&v3f, cert.m_min).sup_bound();
        worst = worst.max(value);
        if value >= cert.epsilon {
            violations += 1;
        }
    }
    CertificateReport {
        trials,
        violations,
        worst_value: worst,
        epsilon: cert.epsilon,
        passed: violations == 0,
    }
}
