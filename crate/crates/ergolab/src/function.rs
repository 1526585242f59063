//! Function-space substrate: complex coefficient vectors in a Fourier mode
//! basis or on a uniform grid, conversions between the two, evaluation and
//! norms.
//!
//! Spectral vectors hold coefficients for modes m = -M..M (ascending), with
//! e_m(x) = exp(2*pi*i*m*x) on [0,1). Grid vectors hold values at the points
//! x_g = g/G. The L2 norm is exact in either basis (Parseval / RMS); the L1
//! and sup norms of a spectral vector are grid-sampled estimates at a 4x
//! oversampled grid, while `sup_bound` gives the certified upper bound
//! sum |c_m| used wherever an argument needs a rigorous bound.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Oversampling factor for grid-sampled L1/sup estimates of spectral vectors.
pub const OVERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Fourier modes -cutoff..cutoff.
    Spectral { cutoff: usize },
    /// Uniform grid x_g = g/size, g = 0..size.
    Grid { size: usize },
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Spectral { cutoff } => 2 * cutoff + 1,
            Basis::Grid { size } => *size,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self) -> String {
        match self {
            Basis::Spectral { cutoff } => format!("spectral,{cutoff}"),
            Basis::Grid { size } => format!("grid,{size}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Sup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionVector {
    basis: Basis,
    coeffs: Vec<Complex64>,
}

pub fn unit_phase(turns: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * turns).sin_cos();
    Complex64::new(c, s)
}

impl FunctionVector {
    pub fn new(basis: Basis, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "basis {} expects {} coefficients, got {}",
                basis.describe(),
                basis.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("function coefficients"));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zero(basis: Basis) -> Self {
        Self {
            basis,
            coeffs: vec![Complex64::new(0.0, 0.0); basis.len()],
        }
    }

    /// The pure mode e_m in a spectral basis with the given cutoff.
    pub fn mode(cutoff: usize, m: i64) -> Result<Self> {
        let basis = Basis::Spectral { cutoff };
        if m.unsigned_abs() as usize > cutoff {
            return Err(Error::Dimension(format!(
                "mode {m} outside cutoff {cutoff}"
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        coeffs[(m + cutoff as i64) as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, coeffs })
    }

    /// The constant function 1 in either basis.
    pub fn constant(basis: Basis) -> Self {
        match basis {
            Basis::Spectral { cutoff } => Self::mode(cutoff, 0).expect("mode 0 always fits"),
            Basis::Grid { size } => Self {
                basis,
                coeffs: vec![Complex64::new(1.0, 0.0); size],
            },
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode m (spectral bases only).
    pub fn mode_coeff(&self, m: i64) -> Result<Complex64> {
        match self.basis {
            Basis::Spectral { cutoff } => {
                if m.unsigned_abs() as usize > cutoff {
                    return Err(Error::Dimension(format!(
                        "mode {m} outside cutoff {cutoff}"
                    )));
                }
                Ok(self.coeffs[(m + cutoff as i64) as usize])
            }
            Basis::Grid { .. } => Err(Error::Dimension("mode_coeff on a grid vector".into())),
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<Complex64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Invalid(format!("evaluation point {x} not in [0,1)")));
        }
        match self.basis {
            Basis::Spectral { cutoff } => {
                let m0 = cutoff as i64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, c) in self.coeffs.iter().enumerate() {
                    let m = i as i64 - m0;
                    acc += c * unit_phase(m as f64 * x);
                }
                Ok(acc)
            }
            Basis::Grid { size } => {
                let g = x * size as f64;
                let gi = g.round();
                if (g - gi).abs() > 1e-9 || gi < 0.0 || gi >= size as f64 {
                    return Err(Error::OffGrid { x, size });
                }
                Ok(self.coeffs[gi as usize])
            }
        }
    }

    /// Lossless spectral -> grid conversion; requires G >= 2M+1.
    pub fn to_spatial(&self, grid: usize) -> Result<FunctionVector> {
        if let Basis::Spectral { cutoff } = self.basis {
            let needed = 2 * cutoff + 1;
            if grid < needed {
                return Err(Error::Aliasing {
                    grid,
                    cutoff,
                    needed,
                });
            }
        }
        self.to_spatial_lossy(grid)
    }

    /// Spectral -> grid sampling without the round-trip guarantee.
    pub fn to_spatial_lossy(&self, grid: usize) -> Result<FunctionVector> {
        match self.basis {
            Basis::Grid { size } => {
                if size != grid {
                    return Err(Error::Dimension(format!(
                        "grid vector of size {size} cannot be resampled to {grid}"
                    )));
                }
                Ok(self.clone())
            }
            Basis::Spectral { cutoff } => {
                let m0 = cutoff as i64;
                let g = grid as f64;
                let mut values = vec![Complex64::new(0.0, 0.0); grid];
                for (i, c) in self.coeffs.iter().enumerate() {
                    if c.norm_sqr() == 0.0 {
                        continue;
                    }
                    let m = i as i64 - m0;
                    for (gidx, v) in values.iter_mut().enumerate() {
                        *v += c * unit_phase(m as f64 * gidx as f64 / g);
                    }
                }
                FunctionVector::new(Basis::Grid { size: grid }, values)
            }
        }
    }

    /// Grid -> spectral conversion; requires G >= 2M+1 for the exact DFT pair.
    pub fn to_spectral(&self, cutoff: usize) -> Result<FunctionVector> {
        match self.basis {
            Basis::Spectral { .. } => Err(Error::Dimension(
                "to_spectral expects a grid vector".into(),
            )),
            Basis::Grid { size } => {
                let needed = 2 * cutoff + 1;
                if size < needed {
                    return Err(Error::Aliasing {
                        grid: size,
                        cutoff,
                        needed,
                    });
                }
                self.to_spectral_lossy(cutoff)
            }
        }
    }

    pub fn to_spectral_lossy(&self, cutoff: usize) -> Result<FunctionVector> {
        let Basis::Grid { size } = self.basis else {
            return Err(Error::Dimension(
                "to_spectral expects a grid vector".into(),
            ));
        };
        let g = size as f64;
        let m0 = cutoff as i64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * cutoff + 1];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let m = i as i64 - m0;
            let mut acc = Complex64::new(0.0, 0.0);
            for (gidx, v) in self.coeffs.iter().enumerate() {
                acc += v * unit_phase(-(m as f64) * gidx as f64 / g);
            }
            *c = acc / g;
        }
        FunctionVector::new(Basis::Spectral { cutoff }, coeffs)
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match (self.basis, kind) {
            (Basis::Spectral { .. }, NormKind::L2) => {
                self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
            }
            (Basis::Grid { size }, NormKind::L2) => {
                (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / size as f64).sqrt()
            }
            (Basis::Grid { size }, NormKind::L1) => {
                self.coeffs.iter().map(|c| c.norm()).sum::<f64>() / size as f64
            }
            (Basis::Grid { .. }, NormKind::Sup) => self
                .coeffs
                .iter()
                .map(|c| c.norm())
                .fold(0.0_f64, f64::max),
            (Basis::Spectral { cutoff }, NormKind::L1 | NormKind::Sup) => {
                let g = OVERSAMPLE * (2 * cutoff + 1);
                let sampled = self
                    .to_spatial(g)
                    .expect("oversampled grid is always large enough");
                sampled.norm(kind)
            }
        }
    }

    /// Certified sup-norm upper bound: sum |c_m| for spectral vectors, the
    /// grid maximum for grid vectors.
    pub fn sup_bound(&self) -> f64 {
        match self.basis {
            Basis::Spectral { .. } => self.coeffs.iter().map(|c| c.norm()).sum(),
            Basis::Grid { .. } => self.norm(NormKind::Sup),
        }
    }

    /// L2 inner product <self, other> (conjugate-linear in `other`).
    pub fn inner(&self, other: &FunctionVector) -> Result<Complex64> {
        if self.basis != other.basis {
            return Err(Error::Dimension(format!(
                "inner product between {} and {}",
                self.basis.describe(),
                other.basis.describe()
            )));
        }
        let raw: Complex64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(match self.basis {
            Basis::Spectral { .. } => raw,
            Basis::Grid { size } => raw / size as f64,
        })
    }

    /// Mean over [0,1): the mode-0 coefficient, or the grid average.
    pub fn mean(&self) -> Complex64 {
        match self.basis {
            Basis::Spectral { cutoff } => self.coeffs[cutoff],
            Basis::Grid { size } => {
                self.coeffs.iter().sum::<Complex64>() / size as f64
            }
        }
    }

    pub fn scale(&self, s: Complex64) -> FunctionVector {
        FunctionVector {
            basis: self.basis,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &FunctionVector) -> Result<FunctionVector> {
        if self.basis != other.basis {
            return Err(Error::Dimension("adding vectors on different bases".into()));
        }
        Ok(FunctionVector {
            basis: self.basis,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &FunctionVector) -> Result<FunctionVector> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise absolute values on a grid vector.
    pub fn abs_grid(&self) -> Result<Vec<f64>> {
        match self.basis {
            Basis::Grid { .. } => Ok(self.coeffs.iter().map(|c| c.norm()).collect()),
            Basis::Spectral { .. } => Err(Error::Dimension(
                "abs_grid is defined on grid vectors".into(),
            )),
        }
    }
}

/// Truncated Fourier coefficients of J(x) = x: c_0 = 1/2, c_m = i/(2 pi m).
pub fn sawtooth_coefficients(cutoff: usize) -> FunctionVector {
    assert!(cutoff >= 1, "sawtooth needs cutoff >= 1");
    let m0 = cutoff as i64;
    let coeffs = (0..2 * cutoff + 1)
        .map(|i| {
            let m = i as i64 - m0;
            if m == 0 {
                Complex64::new(0.5, 0.0)
            } else {
                Complex64::new(0.0, 1.0 / (2.0 * PI * m as f64))
            }
        })
        .collect();
    FunctionVector::new(Basis::Spectral { cutoff }, coeffs).expect("lengths match")
}

/// L2 truncation residual || J - J_M ||_2 = (sum_{|m|>M} 1/(2 pi m)^2)^{1/2}.
pub fn sawtooth_truncation_residual(cutoff: usize) -> f64 {
    // sum_{|m|>M} 1/m^2 = 2 (pi^2/6 - sum_{m<=M} 1/m^2)
    let head: f64 = (1..=cutoff).map(|m| 1.0 / (m as f64 * m as f64)).sum();
    let tail = 2.0 * (PI * PI / 6.0 - head);
    (tail.max(0.0)).sqrt() / (2.0 * PI)
}
