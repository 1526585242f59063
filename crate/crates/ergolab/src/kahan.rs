//! Compensated (Kahan/Neumaier) accumulators.
//!
//! Cesàro averaging divides sums of up to 10^6 terms by N; naive summation
//! loses roughly log10(N) digits there, so runs with N >= 10^4 accumulate
//! through these types. The merge order is fixed by the caller, which keeps
//! chunked-parallel results bit-identical to sequential ones.

use num_complex::Complex64;

/// Neumaier variant of Kahan summation for a single f64.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanF64 {
    sum: f64,
    comp: f64,
}

impl KahanF64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Absorbs another accumulator; used when merging ordered chunk partials.
    pub fn merge(&mut self, other: &KahanF64) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Elementwise compensated accumulator for complex coefficient vectors.
#[derive(Clone, Debug)]
pub struct KahanVecC64 {
    re: Vec<KahanF64>,
    im: Vec<KahanF64>,
}

impl KahanVecC64 {
    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![KahanF64::new(); len],
            im: vec![KahanF64::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn add_slice(&mut self, xs: &[Complex64]) {
        debug_assert_eq!(xs.len(), self.re.len());
        for (i, x) in xs.iter().enumerate() {
            self.re[i].add(x.re);
            self.im[i].add(x.im);
        }
    }

    pub fn merge(&mut self, other: &KahanVecC64) {
        debug_assert_eq!(self.len(), other.len());
        for i in 0..self.re.len() {
            self.re[i].merge(&other.re[i]);
            self.im[i].merge(&other.im[i]);
        }
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| Complex64::new(r.value(), i.value()))
            .collect()
    }
}

/// Elementwise compensated accumulator for nonnegative grid values.
#[derive(Clone, Debug)]
pub struct KahanVecF64 {
    cells: Vec<KahanF64>,
}

impl KahanVecF64 {
    pub fn zeros(len: usize) -> Self {
        Self {
            cells: vec![KahanF64::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn add_slice(&mut self, xs: &[f64]) {
        debug_assert_eq!(xs.len(), self.cells.len());
        for (c, x) in self.cells.iter_mut().zip(xs) {
            c.add(*x);
        }
    }

    /// Accumulates the pointwise moduli of complex values.
    pub fn add_abs_slice(&mut self, xs: &[num_complex::Complex64]) {
        debug_assert_eq!(xs.len(), self.cells.len());
        for (c, x) in self.cells.iter_mut().zip(xs) {
            c.add(x.norm());
        }
    }

    pub fn merge(&mut self, other: &KahanVecF64) {
        for (c, o) in self.cells.iter_mut().zip(&other.cells) {
            c.merge(o);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.value()).collect()
    }
}
