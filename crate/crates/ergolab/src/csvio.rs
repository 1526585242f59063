//! Deterministic CSV writers: UTF-8, header row, '.' decimal separator,
//! shortest round-trip float formatting. Byte-identical output for identical
//! inputs, so reruns can be diffed directly.

use num_complex::Complex64;

use crate::entangle::WeightSequence;
use crate::function::{Basis, FunctionVector};
use crate::jdlg::JdlgDecomposition;
use crate::limit::{CompareReport, PointSpectrum, ResonanceSet};
use crate::operator::DSReport;
use crate::series::{CesaroSeries, SeriesValue};
use crate::volterra::{A2Report, CertificateReport, CompactnessCertificate};

/// Shortest round-trip decimal form; negative zero normalized.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// One row per coefficient: spectral vectors are indexed by mode, grid
/// vectors by grid point.
pub fn function_csv(f: &FunctionVector) -> String {
    let mut out = String::from("index,re,im\n");
    let m0 = match f.basis() {
        Basis::Spectral { cutoff } => cutoff as i64,
        Basis::Grid { .. } => 0,
    };
    for (i, c) in f.coeffs().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            i as i64 - m0,
            fmt_f64(c.re),
            fmt_f64(c.im)
        ));
    }
    out
}

/// Full detail rows: (checkpoint, index, re, im). Absolute-value series put
/// the grid value in `re`; scalar series use index 0.
pub fn series_detail_csv(series: &CesaroSeries) -> String {
    let mut out = String::from("checkpoint,index,re,im\n");
    for (cp, v) in series.checkpoints().iter().zip(series.values()) {
        match v {
            SeriesValue::Function(f) => {
                let m0 = match f.basis() {
                    Basis::Spectral { cutoff } => cutoff as i64,
                    Basis::Grid { .. } => 0,
                };
                for (i, c) in f.coeffs().iter().enumerate() {
                    out.push_str(&format!(
                        "{cp},{},{},{}\n",
                        i as i64 - m0,
                        fmt_f64(c.re),
                        fmt_f64(c.im)
                    ));
                }
            }
            SeriesValue::AbsGrid(vals) => {
                for (i, x) in vals.iter().enumerate() {
                    out.push_str(&format!("{cp},{i},{},0\n", fmt_f64(*x)));
                }
            }
            SeriesValue::Scalar(c) => {
                out.push_str(&format!("{cp},0,{},{}\n", fmt_f64(c.re), fmt_f64(c.im)));
            }
        }
    }
    out
}

/// Summary rows: (checkpoint, sup_value, l2_value).
pub fn series_summary_csv(series: &CesaroSeries) -> String {
    let mut out = String::from("checkpoint,sup_value,l2_value\n");
    for (cp, v) in series.checkpoints().iter().zip(series.values()) {
        out.push_str(&format!(
            "{cp},{},{}\n",
            fmt_f64(v.sup_value()),
            fmt_f64(v.l2_value())
        ));
    }
    out
}

/// One row per reversible eigenvalue (grouped within 1e-9), plus a final
/// stable-dimension row.
pub fn decomposition_csv(d: &JdlgDecomposition) -> String {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for (lam, _) in d.reversible_pairs() {
        match groups.iter_mut().find(|(g, _)| (*g - lam).norm() < 1e-9) {
            Some((_, count)) => *count += 1,
            None => groups.push((*lam, 1)),
        }
    }
    groups.sort_by(|a, b| {
        a.0.arg()
            .rem_euclid(std::f64::consts::TAU)
            .partial_cmp(&b.0.arg().rem_euclid(std::f64::consts::TAU))
            .unwrap()
    });
    let mut out = String::from("kind,re,im,multiplicity\n");
    for (lam, count) in groups {
        out.push_str(&format!(
            "eigenvalue,{},{},{count}\n",
            fmt_f64(lam.re),
            fmt_f64(lam.im)
        ));
    }
    out.push_str(&format!("stable_dim,0,0,{}\n", d.stable_dim()));
    out
}

pub fn ds_report_csv(r: &DSReport) -> String {
    format!(
        "trials,worst_l1_ratio,worst_linf_ratio,tol,passed\n{},{},{},{},{}\n",
        r.trials,
        fmt_f64(r.worst_l1_ratio),
        fmt_f64(r.worst_linf_ratio),
        fmt_f64(r.tol),
        r.passed
    )
}

pub fn certificate_csv(c: &CompactnessCertificate) -> String {
    format!(
        "epsilon,m_min,tail_sum,certified_bound\n{},{},{},{}\n",
        fmt_f64(c.epsilon),
        c.m_min,
        fmt_f64(c.tail_sum),
        fmt_f64(c.certified_bound)
    )
}

pub fn certificate_report_csv(r: &CertificateReport) -> String {
    format!(
        "trials,violations,worst_value,epsilon,passed\n{},{},{},{},{}\n",
        r.trials,
        r.violations,
        fmt_f64(r.worst_value),
        fmt_f64(r.epsilon),
        r.passed
    )
}

pub fn a2_report_csv(r: &A2Report) -> String {
    format!(
        "trials,bound,worst_l2_ratio,worst_sup_ratio,passed\n{},{},{},{},{}\n",
        r.trials,
        fmt_f64(r.bound),
        fmt_f64(r.worst_l2_ratio),
        fmt_f64(r.worst_sup_ratio),
        r.passed
    )
}

/// One row per (tuple, slot): tuple index, slot, eigenvalue re/im, angle.
pub fn resonance_csv(spectra: &[&PointSpectrum], r: &ResonanceSet) -> String {
    let mut out = String::from("tuple,slot,re,im,angle_turns\n");
    for (ti, tuple) in r.tuples.iter().enumerate() {
        for (slot, &ei) in tuple.iter().enumerate() {
            let lam = spectra[slot].entries()[ei].lambda;
            let angle = lam.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            out.push_str(&format!(
                "{ti},{slot},{},{},{}\n",
                fmt_f64(lam.re),
                fmt_f64(lam.im),
                fmt_f64(angle)
            ));
        }
    }
    out
}

pub fn compare_csv(r: &CompareReport) -> String {
    let mut out = String::from("checkpoint,sup_err,l2_err\n");
    for ((cp, s), l) in r.checkpoints.iter().zip(&r.sup_err).zip(&r.l2_err) {
        out.push_str(&format!("{cp},{},{}\n", fmt_f64(*s), fmt_f64(*l)));
    }
    out
}

pub fn weights_csv(w: &WeightSequence) -> String {
    let mut out = String::from("n,re,im\n");
    for (i, a) in w.values().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, fmt_f64(a.re), fmt_f64(a.im)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::FunctionVector;

    #[test]
    fn float_formatting_is_plain_decimal() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn spectral_function_rows_are_mode_indexed() {
        let f = FunctionVector::mode(1, 1).unwrap();
        assert_eq!(
            function_csv(&f),
            "index,re,im\n-1,0,0\n0,0,0\n1,1,0\n"
        );
    }

    #[test]
    fn summary_rows_and_determinism() {
        let f = FunctionVector::mode(1, 0).unwrap();
        let series = crate::series::CesaroSeries::new(
            vec![1, 2],
            vec![
                SeriesValue::Function(f.clone()),
                SeriesValue::AbsGrid(vec![0.25, 1.0]),
            ],
        )
        .unwrap();
        let a = series_summary_csv(&series);
        let b = series_summary_csv(&series);
        assert_eq!(a, b);
        assert!(a.starts_with("checkpoint,sup_value,l2_value\n1,"));
        let detail = series_detail_csv(&series);
        assert!(detail.contains("2,0,0.25,0\n"));
        assert!(detail.contains("2,1,1,0\n"));
    }

    #[test]
    fn decomposition_groups_eigenvalues() {
        let t = crate::operator::Operator::multiplier_permutation(5, 2).unwrap();
        let d = crate::jdlg::decompose(&t, 1e-9).unwrap();
        let csv = decomposition_csv(&d);
        // orbits {0} and {1,2,4,3}: eigenvalue 1 appears twice
        assert!(csv.contains("eigenvalue,1,0,2\n"), "{csv}");
        assert!(csv.ends_with("stable_dim,0,0,0\n"));
    }
}
