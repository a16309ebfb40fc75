//! The SVC regression model: dataset container, covariance parameter state
//! with log-space packing, and fit results.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{Location, MaternParams};
use crate::error::{Error, Result};

/// Observed data: response `y`, covariate matrix `X` (n x p, column 1 is
/// usually a constant 1 for a varying intercept), and one location per row.
///
/// Locations need not be distinct; duplicates are allowed and never
/// deduplicated.
#[derive(Debug, Clone)]
pub struct SvcDataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    locations: Vec<Location>,
}

impl SvcDataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, locations: Vec<Location>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::data("dataset is empty"));
        }
        if x.nrows() != n || locations.len() != n {
            return Err(Error::dim(format!(
                "inconsistent row counts: y has {n}, X has {}, locations has {}",
                x.nrows(),
                locations.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::data("at least one covariate column required"));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("response and covariates must be finite"));
        }
        let d = locations[0].dim();
        if locations.iter().any(|l| l.dim() != d) {
            return Err(Error::dim("locations have mixed dimensions"));
        }
        Ok(SvcDataset { y, x, locations })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn spatial_dim(&self) -> usize {
        self.locations[0].dim()
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Row subset in the given index order.
    pub fn subset(&self, rows: &[usize]) -> Result<SvcDataset> {
        if rows.iter().any(|&r| r >= self.len()) {
            return Err(Error::dim("subset index out of range"));
        }
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        let x = DMatrix::from_fn(rows.len(), self.x.ncols(), |i, j| self.x[(rows[i], j)]);
        let locations = rows.iter().map(|&r| self.locations[r].clone()).collect();
        SvcDataset::new(y, x, locations)
    }

    /// Report-only data quality findings; nothing here is a hard error.
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        if self.y.iter().any(|v| !v.is_finite()) || self.x.iter().any(|v| !v.is_finite()) {
            findings.push(Finding {
                code: FindingCode::NonFinite,
                message: "non-finite values present".into(),
            });
        }
        for j in 0..self.x.ncols() {
            if (0..self.len()).all(|i| self.x[(i, j)] == 0.0) {
                findings.push(Finding {
                    code: FindingCode::DegenerateCovariate,
                    message: format!("degenerate covariate: column {j} is identically zero"),
                });
            }
        }
        let mut sorted: Vec<&Location> = self.locations.iter().collect();
        sorted.sort_by(|a, b| a.coords().partial_cmp(b.coords()).unwrap());
        let duplicates = sorted.windows(2).filter(|w| w[0] == w[1]).count();
        if duplicates > 0 {
            findings.push(Finding {
                code: FindingCode::DuplicateLocations,
                message: format!("{duplicates} duplicated observation locations (allowed)"),
            });
        }
        if self.len() < self.num_covariates() {
            findings.push(Finding {
                code: FindingCode::MoreCovariatesThanRows,
                message: format!(
                    "fewer rows ({}) than covariates ({})",
                    self.len(),
                    self.num_covariates()
                ),
            });
        }
        findings
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FindingCode {
    NonFinite,
    DegenerateCovariate,
    DuplicateLocations,
    MoreCovariatesThanRows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub message: String,
}

/// Full covariance parameter state: one `(rho, sigma2, nu)` per SVC plus the
/// nugget variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovParams {
    pub effects: Vec<MaternParams>,
    pub nugget: f64,
}

impl CovParams {
    /// Exponential-covariance (`nu = 1/2`) parameters from flat slices.
    pub fn exponential(rho: &[f64], sigma2: &[f64], nugget: f64) -> Result<Self> {
        if rho.len() != sigma2.len() {
            return Err(Error::dim("rho and sigma2 must have the same length"));
        }
        let effects = rho
            .iter()
            .zip(sigma2)
            .map(|(&r, &s)| MaternParams::new(r, s, 0.5))
            .collect::<Result<Vec<_>>>()?;
        CovParams { effects, nugget }.validated(rho.len())
    }

    fn validated(self, p: usize) -> Result<Self> {
        self.validate(p)?;
        Ok(self)
    }

    /// Structural validity: `p` effects, positive ranges, nonnegative
    /// variances (zero variances express degenerate limits).
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.effects.len() != p {
            return Err(Error::dim(format!(
                "expected {p} covariance parameter sets, got {}",
                self.effects.len()
            )));
        }
        for e in &self.effects {
            e.validate()?;
        }
        if !(self.nugget >= 0.0) || !self.nugget.is_finite() {
            return Err(Error::param(format!("nugget must be nonnegative, got {}", self.nugget)));
        }
        Ok(())
    }

    /// Strict positivity as required for log-space packing.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate(self.effects.len())?;
        if self.effects.iter().any(|e| e.sigma2 == 0.0) || self.nugget == 0.0 {
            return Err(Error::param("variances must be strictly positive for optimization"));
        }
        Ok(())
    }

    pub fn num_effects(&self) -> usize {
        self.effects.len()
    }

    pub fn smoothness(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.nu).collect()
    }

    /// Packs into optimizer space: `(log rho_1, log sigma2_1, ...,
    /// log rho_p, log sigma2_p, log tau2)`. The smoothness values are fixed
    /// metadata and not packed.
    pub fn pack(&self) -> Result<ParamVector> {
        self.validate_strict()?;
        let mut v = Vec::with_capacity(2 * self.effects.len() + 1);
        for e in &self.effects {
            v.push(e.rho.ln());
            v.push(e.sigma2.ln());
        }
        v.push(self.nugget.ln());
        Ok(ParamVector(v))
    }
}

/// Packed parameter vector in log space, length `2p + 1`, in the order
/// `(rho_1, sigma2_1, ..., rho_p, sigma2_p, tau2)`. The packing order is a
/// stable public contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Exponentiates back to `CovParams`; `nu` gives the fixed smoothness
    /// per SVC and determines `p`.
    pub fn unpack(&self, nu: &[f64]) -> Result<CovParams> {
        let p = nu.len();
        if self.0.len() != 2 * p + 1 {
            return Err(Error::dim(format!(
                "packed vector has length {}, expected {}",
                self.0.len(),
                2 * p + 1
            )));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("packed parameters must be finite"));
        }
        let effects = (0..p)
            .map(|j| MaternParams::new(self.0[2 * j].exp(), self.0[2 * j + 1].exp(), nu[j]))
            .collect::<Result<Vec<_>>>()?;
        Ok(CovParams { effects, nugget: self.0[2 * p].exp() })
    }
}

/// Estimated mean coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanParams {
    pub mu: Vec<f64>,
}

impl MeanParams {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("mean coefficients must be finite"));
        }
        Ok(MeanParams { mu })
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mu)
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Log-space gradient inf-norm fell below the tolerance.
    GradientTolerance,
    /// Relative objective change over an accepted step fell below the
    /// tolerance.
    ObjectiveStall,
    /// The line search could not find any decrease (stationary within the
    /// finite-difference noise floor).
    NoDescent,
    MaxIterations,
}

/// One optimizer iteration for the optional trace stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step_length: f64,
    pub gradient_norm: f64,
}

/// Result of a maximum likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: CovParams,
    pub mu_hat: MeanParams,
    /// Final value of the (regularized) profile n2LL.
    pub objective: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub function_evaluations: usize,
    /// Number of objective evaluations whose factorization needed jitter.
    pub jitter_events: usize,
    /// Inf-norm of the log-space finite-difference gradient at the solution.
    pub gradient_norm_at_solution: f64,
    /// Per-iteration trace; not serialized (streamed separately as CSV).
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}
