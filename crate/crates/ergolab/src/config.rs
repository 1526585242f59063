//! Experiment configuration: a versioned TOML schema with strict key
//! checking, plus builders that turn specifications into domain objects.
//! Decimal angles must carry an explicit precision tag so the numeric
//! provenance of irrational rotations is recorded in the config itself.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::function::{sawtooth_coefficients, Basis, FunctionVector};
use crate::operator::{Angle, Operator};
use crate::semigroup::GeneratorSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub chain: Option<ChainSection>,
    #[serde(default)]
    pub input: Option<InputSection>,
    #[serde(default)]
    pub volterra: Option<VolterraSection>,
    #[serde(default)]
    pub semigroup: Option<SemigroupSection>,
    #[serde(default)]
    pub weight: Option<WeightSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Discrete horizon N.
    pub n: Option<u64>,
    /// Explicit checkpoints; geometric {1,2,4,...,N} when omitted.
    pub checkpoints: Option<Vec<u64>>,
    /// Grid size for absolute averages; 4x(2M+1) by default on spectral bases.
    pub g_eval: Option<usize>,
    /// Compute the absolute-value average instead of the plain one.
    pub absolute: bool,
    pub tol_unimodular: Option<f64>,
    pub tol_sep: Option<f64>,
    pub tol_match: Option<f64>,
    /// "with-leading-pair" (default) or "as-printed".
    pub limit_form: Option<String>,
    pub ds_trials: Option<usize>,
    pub ds_tol: Option<f64>,
    /// Run the empirical Dunford-Schwartz check at chain construction.
    pub validate_chain: bool,
}

impl RunSection {
    pub fn tol_unimodular(&self) -> f64 {
        self.tol_unimodular.unwrap_or(1e-9)
    }

    pub fn tol_sep(&self) -> f64 {
        self.tol_sep.unwrap_or(1e-6)
    }

    pub fn tol_match(&self) -> f64 {
        self.tol_match.unwrap_or(1e-9)
    }

    pub fn ds_trials(&self) -> usize {
        self.ds_trials.unwrap_or(20)
    }

    pub fn ds_tol(&self) -> f64 {
        self.ds_tol.unwrap_or(1e-10)
    }

    pub fn limit_form(&self) -> Result<crate::limit::LimitForm> {
        match self.limit_form.as_deref() {
            None | Some("with-leading-pair") => Ok(crate::limit::LimitForm::WithLeadingPair),
            Some("as-printed") => Ok(crate::limit::LimitForm::AsPrinted),
            Some(other) => Err(Error::Invalid(format!("unknown limit form `{other}`"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// Powered operators T_0..T_a.
    pub t: Vec<OperatorSpec>,
    /// Intertwiners A_0..A_{a-1}.
    #[serde(default)]
    pub a: Vec<OperatorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSpec {
    #[serde(default)]
    pub rational: Option<[i64; 2]>,
    #[serde(default)]
    pub decimal: Option<f64>,
    /// Mandatory provenance tag for decimal angles; only "f64" is defined.
    #[serde(default)]
    pub precision: Option<String>,
}

impl AngleSpec {
    pub fn to_angle(&self) -> Result<Angle> {
        match (self.rational, self.decimal) {
            (Some([num, den]), None) => {
                if den <= 0 {
                    return Err(Error::Invalid("rational angle needs a positive denominator".into()));
                }
                Ok(Angle::Rational { num, den })
            }
            (None, Some(d)) => match self.precision.as_deref() {
                Some("f64") => Ok(Angle::Decimal(d)),
                Some(other) => Err(Error::Invalid(format!(
                    "unknown angle precision tag `{other}`"
                ))),
                None => Err(Error::Invalid(
                    "decimal angles require a precision tag".into(),
                )),
            },
            _ => Err(Error::Invalid(
                "angle must be exactly one of rational or decimal".into(),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub size: Option<usize>,
}

impl BasisSpec {
    pub fn to_basis(&self) -> Result<Basis> {
        match (self.cutoff, self.size) {
            (Some(cutoff), None) => Ok(Basis::Spectral { cutoff }),
            (None, Some(size)) => Ok(Basis::Grid { size }),
            _ => Err(Error::Invalid(
                "basis must set exactly one of cutoff (spectral) or size (grid)".into(),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Rotation {
        angle: AngleSpec,
        cutoff: usize,
    },
    Permutation {
        perm: Vec<usize>,
    },
    MultiplierPermutation {
        size: usize,
        multiplier: usize,
    },
    ModeProjector {
        cutoff: usize,
        modes: Vec<i64>,
    },
    Identity {
        basis: BasisSpec,
    },
    Zero {
        basis: BasisSpec,
    },
    DoublyStochastic {
        size: usize,
        /// Substream label; defaults to the operator's position label.
        #[serde(default)]
        label: Option<String>,
    },
    Diagonal {
        cutoff: usize,
        /// Entries as [re, im] pairs, modes -cutoff..cutoff ascending.
        entries: Vec<[f64; 2]>,
    },
    DenseSpatial {
        /// Row-major [re, im] pairs.
        rows: Vec<Vec<[f64; 2]>>,
    },
}

impl OperatorSpec {
    pub fn uses_randomness(&self) -> bool {
        matches!(self, OperatorSpec::DoublyStochastic { .. })
    }

    pub fn build(&self, seed: Option<u64>, default_label: &str) -> Result<Operator> {
        match self {
            OperatorSpec::Rotation { angle, cutoff } => {
                Ok(Operator::rotation(angle.to_angle()?, *cutoff))
            }
            OperatorSpec::Permutation { perm } => Operator::permutation(perm.clone()),
            OperatorSpec::MultiplierPermutation { size, multiplier } => {
                Operator::multiplier_permutation(*size, *multiplier)
            }
            OperatorSpec::ModeProjector { cutoff, modes } => {
                Operator::mode_projector(*cutoff, modes)
            }
            OperatorSpec::Identity { basis } => Ok(Operator::identity(basis.to_basis()?)),
            OperatorSpec::Zero { basis } => Ok(Operator::zero(basis.to_basis()?)),
            OperatorSpec::DoublyStochastic { size, label } => {
                let seed = seed.ok_or_else(|| {
                    Error::Invalid("a seed is mandatory when randomness is used".into())
                })?;
                let label = label.as_deref().unwrap_or(default_label);
                let mut rng = crate::rng::substream(seed, label);
                Ok(Operator::doubly_stochastic(*size, &mut rng))
            }
            OperatorSpec::Diagonal { cutoff, entries } => {
                let mu = entries
                    .iter()
                    .map(|[re, im]| Complex64::new(*re, *im))
                    .collect();
                Operator::diagonal_spectral(*cutoff, mu)
            }
            OperatorSpec::DenseSpatial { rows } => {
                let rows: Vec<Vec<Complex64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                    .collect();
                Operator::dense_spatial(crate::linalg::from_rows(rows)?)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSection {
    /// f = e_mode (spectral) or the indicator of one grid point.
    Mode { mode: i64 },
    /// The truncated ramp J_M (spectral bases only).
    Sawtooth,
    /// Seeded random coefficients, optionally recentred to mean zero.
    Random {
        #[serde(default)]
        mean_zero: bool,
    },
    /// Seeded random input projected onto the stable part of T_0.
    RandomStable,
}

impl InputSection {
    pub fn uses_randomness(&self) -> bool {
        matches!(
            self,
            InputSection::Random { .. } | InputSection::RandomStable
        )
    }

    /// Builds the input vector. `t0` is consulted for the stable projection.
    pub fn build(
        &self,
        basis: Basis,
        seed: Option<u64>,
        t0: Option<&Operator>,
        tol_unimodular: f64,
    ) -> Result<FunctionVector> {
        let need_seed = || {
            seed.ok_or_else(|| {
                Error::Invalid("a seed is mandatory when randomness is used".into())
            })
        };
        match self {
            InputSection::Mode { mode } => match basis {
                Basis::Spectral { cutoff } => FunctionVector::mode(cutoff, *mode),
                Basis::Grid { size } => {
                    let idx = usize::try_from(*mode)
                        .ok()
                        .filter(|&i| i < size)
                        .ok_or_else(|| {
                            Error::Invalid(format!("grid point {mode} outside 0..{size}"))
                        })?;
                    let mut coeffs = vec![Complex64::new(0.0, 0.0); size];
                    coeffs[idx] = Complex64::new(1.0, 0.0);
                    FunctionVector::new(basis, coeffs)
                }
            },
            InputSection::Sawtooth => match basis {
                Basis::Spectral { cutoff } => Ok(sawtooth_coefficients(cutoff)),
                Basis::Grid { .. } => Err(Error::Invalid(
                    "the sawtooth preset requires a spectral basis".into(),
                )),
            },
            InputSection::Random { mean_zero } => {
                let mut rng = crate::rng::substream(need_seed()?, "input-random");
                let mut f = crate::rng::random_function(basis, &mut rng);
                if *mean_zero {
                    f = f.sub(&FunctionVector::constant(basis).scale(f.mean()))?;
                }
                Ok(f)
            }
            InputSection::RandomStable => {
                let t0 = t0.ok_or_else(|| {
                    Error::Invalid("random-stable input needs a chain with T_0".into())
                })?;
                let mut rng = crate::rng::substream(need_seed()?, "input-random");
                let f = crate::rng::random_function(basis, &mut rng);
                let d = crate::jdlg::decompose(t0, tol_unimodular)?;
                d.project_stable(&f)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolterraSection {
    pub epsilon: f64,
    #[serde(default = "default_m_cap")]
    pub m_cap: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_m_cap() -> usize {
    100_000
}

fn default_cutoff() -> usize {
    64
}

fn default_k() -> u32 {
    1
}

fn default_trials() -> usize {
    500
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    RotationFlow { cutoff: usize, alpha: f64 },
    Diagonal { cutoff: usize, entries: Vec<[f64; 2]> },
    /// P - I for the cyclic shift on `size` points.
    ShiftLaplacian { size: usize },
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<GeneratorSpec> {
        match self {
            GeneratorConfig::RotationFlow { cutoff, alpha } => {
                Ok(GeneratorSpec::rotation_flow(*cutoff, *alpha))
            }
            GeneratorConfig::Diagonal { cutoff, entries } => GeneratorSpec::diagonal(
                *cutoff,
                entries
                    .iter()
                    .map(|[re, im]| Complex64::new(*re, *im))
                    .collect(),
            ),
            GeneratorConfig::ShiftLaplacian { size } => {
                let perm = Operator::permutation((0..*size).map(|i| (i + 1) % size).collect())?;
                GeneratorSpec::permutation_laplacian(&perm)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSection {
    pub generators: Vec<GeneratorConfig>,
    #[serde(default)]
    pub a: Vec<OperatorSpec>,
    pub horizon: f64,
    pub step: f64,
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub absolute: bool,
    #[serde(default)]
    pub g_eval: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// Unimodular frequencies as [re, im] pairs.
    pub gammas: Vec<[f64; 2]>,
    /// Amplitudes as [re, im] pairs.
    pub qs: Vec<[f64; 2]>,
}

impl WeightSection {
    pub fn build(&self, n: u64) -> Result<crate::entangle::WeightSequence> {
        let gammas: Vec<Complex64> = self
            .gammas
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        let qs: Vec<Complex64> = self
            .qs
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        crate::entangle::bohr_weight(&gammas, &qs, n)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("config schema: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        if config.uses_randomness() && config.seed.is_none() {
            return Err(Error::Invalid(
                "a seed is mandatory when randomness is used".into(),
            ));
        }
        Ok(config)
    }

    pub fn uses_randomness(&self) -> bool {
        let chain_random = self.chain.as_ref().is_some_and(|c| {
            c.t.iter()
                .chain(c.a.iter())
                .any(OperatorSpec::uses_randomness)
        });
        let input_random = self
            .input
            .as_ref()
            .is_some_and(InputSection::uses_randomness);
        let semigroup_random = self
            .semigroup
            .as_ref()
            .is_some_and(|s| s.a.iter().any(OperatorSpec::uses_randomness));
        chain_random || input_random || semigroup_random
    }

    /// Builds the chain operators as (t_ops, a_ops).
    pub fn build_chain(&self) -> Result<(Vec<Operator>, Vec<Operator>)> {
        let chain = self
            .chain
            .as_ref()
            .ok_or_else(|| Error::Invalid("this command requires a [chain] section".into()))?;
        let t_ops = chain
            .t
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(self.seed, &format!("chain-t{i}")))
            .collect::<Result<Vec<_>>>()?;
        let a_ops = chain
            .a
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(self.seed, &format!("chain-a{i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok((t_ops, a_ops))
    }
}
