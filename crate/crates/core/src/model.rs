//! Time-varying mean-field systems with multiplicative noise.
//!
//! The state equation for `k = 0..=K` is
//!
//! ```text
//! x(k+1) = A x + At E[x] + B v + Bt E[v] + F1 u
//!        + (C x + Ct E[x] + D v + Dt E[v]) w(k)
//! z(k)   = [Phi x ; Psi u],   Psi^T Psi = I
//! ```
//!
//! where `w(k)` is a scalar white sequence with zero mean and unit variance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};

/// Default absolute per-entry tolerance on `Psi^T Psi = I`.
pub const PSI_TOL: f64 = 1e-9;

/// Problem sizes. `horizon` is `K`; stages are indexed `0..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub l: usize,
    pub q: usize,
    pub m_phi: usize,
    pub horizon: usize,
}

impl Dimensions {
    pub fn stages(&self) -> usize {
        self.horizon + 1
    }
}

/// System matrices at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    pub a: Mat,
    pub at: Mat,
    pub b: Mat,
    pub bt: Mat,
    pub c: Mat,
    pub ct: Mat,
    pub d: Mat,
    pub dt: Mat,
    pub f1: Mat,
    pub phi: Mat,
    pub psi: Mat,
}

impl StageParams {
    /// All-zero stage with `Psi = I`.
    pub fn zeros(dims: &Dimensions) -> Self {
        let (n, l, q, m) = (dims.n, dims.l, dims.q, dims.m_phi);
        Self {
            a: Mat::zeros(n, n),
            at: Mat::zeros(n, n),
            b: Mat::zeros(n, l),
            bt: Mat::zeros(n, l),
            c: Mat::zeros(n, n),
            ct: Mat::zeros(n, n),
            d: Mat::zeros(n, l),
            dt: Mat::zeros(n, l),
            f1: Mat::zeros(n, q),
            phi: Mat::zeros(m, n),
            psi: Mat::identity(q, q),
        }
    }

    /// `A + At`, the drift acting on the mean.
    pub fn a_bar(&self) -> Mat {
        &self.a + &self.at
    }

    pub fn b_bar(&self) -> Mat {
        &self.b + &self.bt
    }

    pub fn c_bar(&self) -> Mat {
        &self.c + &self.ct
    }

    pub fn d_bar(&self) -> Mat {
        &self.d + &self.dt
    }

    /// `Phi^T Phi`.
    pub fn output_weight(&self) -> Mat {
        self.phi.transpose() * &self.phi
    }

    /// `(field name, matrix, expected shape)` for every field, in file order.
    pub fn fields(&self, dims: &Dimensions) -> [(&'static str, &Mat, (usize, usize)); 11] {
        let (n, l, q, m) = (dims.n, dims.l, dims.q, dims.m_phi);
        [
            ("A", &self.a, (n, n)),
            ("At", &self.at, (n, n)),
            ("B", &self.b, (n, l)),
            ("Bt", &self.bt, (n, l)),
            ("C", &self.c, (n, n)),
            ("Ct", &self.ct, (n, n)),
            ("D", &self.d, (n, l)),
            ("Dt", &self.dt, (n, l)),
            ("F1", &self.f1, (n, q)),
            ("Phi", &self.phi, (m, n)),
            ("Psi", &self.psi, (q, q)),
        ]
    }
}

/// A full time-varying system with deterministic initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSystem {
    pub dims: Dimensions,
    pub stages: Vec<StageParams>,
    pub x0: Vector,
}

impl MeanFieldSystem {
    pub fn new(dims: Dimensions, stages: Vec<StageParams>, x0: Vector) -> Self {
        Self { dims, stages, x0 }
    }

    /// Replicates one stage over the whole horizon.
    pub fn constant(dims: Dimensions, stage: StageParams, x0: Vector) -> Self {
        let stages = vec![stage; dims.stages()];
        Self { dims, stages, x0 }
    }

    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn stage(&self, k: usize) -> &StageParams {
        &self.stages[k]
    }

    /// Same system with a different initial state.
    pub fn with_x0(&self, x0: Vector) -> Self {
        Self { x0, ..self.clone() }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroDimension {
        name: &'static str,
    },
    StageCount {
        expected: usize,
        found: usize,
    },
    InitialStateLength {
        expected: usize,
        found: usize,
    },
    DimensionMismatch {
        stage: usize,
        field: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NonFinite {
        stage: usize,
        field: &'static str,
    },
    PsiNotOrthonormal {
        stage: usize,
        max_deviation: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension { name } => write!(f, "dimension {name} must be >= 1"),
            Violation::StageCount { expected, found } => {
                write!(f, "expected {expected} stages (K+1), found {found}")
            }
            Violation::InitialStateLength { expected, found } => {
                write!(f, "x0 has length {found}, expected {expected}")
            }
            Violation::DimensionMismatch {
                stage,
                field,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch at stages[{stage}].{field}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Violation::NonFinite { stage, field } => {
                write!(f, "non-finite entry at stages[{stage}].{field}")
            }
            Violation::PsiNotOrthonormal {
                stage,
                max_deviation,
            } => write!(
                f,
                "Psi not orthonormal at k={stage} (max |Psi^T Psi - I| = {max_deviation:.3e})"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks shapes, finiteness and the `Psi^T Psi = I` constraint.
pub fn validate(system: &MeanFieldSystem) -> ValidationReport {
    validate_with_tol(system, PSI_TOL)
}

pub fn validate_with_tol(system: &MeanFieldSystem, psi_tol: f64) -> ValidationReport {
    let dims = &system.dims;
    let mut violations = Vec::new();
    for (name, value) in [
        ("n", dims.n),
        ("l", dims.l),
        ("q", dims.q),
        ("m_phi", dims.m_phi),
    ] {
        if value == 0 {
            violations.push(Violation::ZeroDimension { name });
        }
    }
    if system.stages.len() != dims.stages() {
        violations.push(Violation::StageCount {
            expected: dims.stages(),
            found: system.stages.len(),
        });
    }
    if system.x0.len() != dims.n {
        violations.push(Violation::InitialStateLength {
            expected: dims.n,
            found: system.x0.len(),
        });
    }
    for (k, stage) in system.stages.iter().enumerate() {
        let mut shapes_ok = true;
        for (field, m, expected) in stage.fields(dims) {
            if m.shape() != expected {
                shapes_ok = false;
                violations.push(Violation::DimensionMismatch {
                    stage: k,
                    field,
                    expected,
                    found: m.shape(),
                });
            } else if m.iter().any(|v| !v.is_finite()) {
                shapes_ok = false;
                violations.push(Violation::NonFinite { stage: k, field });
            }
        }
        if shapes_ok {
            if let Some(dev) = psi_deviation(&stage.psi) {
                if dev > psi_tol {
                    violations.push(Violation::PsiNotOrthonormal {
                        stage: k,
                        max_deviation: dev,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

fn psi_deviation(psi: &Mat) -> Option<f64> {
    if psi.nrows() != psi.ncols() {
        return None;
    }
    let gram = psi.transpose() * psi;
    Some((gram - Mat::identity(psi.nrows(), psi.ncols())).amax())
}

/// Controlled mean-field system without disturbance:
///
/// ```text
/// x(k+1) = A1 x + At1 E[x] + F1 u + (B1 x + Bt1 E[x]) w(k)
/// z(k)   = [Phi1 x ; Psi1 u]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LqStage {
    pub a1: Mat,
    pub at1: Mat,
    pub b1: Mat,
    pub bt1: Mat,
    pub f1: Mat,
    pub phi1: Mat,
    pub psi1: Mat,
}

impl LqStage {
    pub fn a1_bar(&self) -> Mat {
        &self.a1 + &self.at1
    }

    pub fn b1_bar(&self) -> Mat {
        &self.b1 + &self.bt1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqSystem {
    pub dims: Dimensions,
    pub stages: Vec<LqStage>,
    pub x0: Vector,
}

impl LqSystem {
    /// Reads the LQ data off a mean-field system: the state noise
    /// coefficients `C`, `Ct` play the role of `B1`, `Bt1`; the disturbance
    /// channel is dropped.
    pub fn from_mean_field(system: &MeanFieldSystem) -> Self {
        let stages = system
            .stages
            .iter()
            .map(|s| LqStage {
                a1: s.a.clone(),
                at1: s.at.clone(),
                b1: s.c.clone(),
                bt1: s.ct.clone(),
                f1: s.f1.clone(),
                phi1: s.phi.clone(),
                psi1: s.psi.clone(),
            })
            .collect();
        Self {
            dims: system.dims,
            stages,
            x0: system.x0.clone(),
        }
    }

    /// Embeds this system as a mean-field system with a zero disturbance
    /// channel, so moments and costs can be evaluated with the shared tools.
    pub fn to_mean_field(&self) -> MeanFieldSystem {
        let dims = Dimensions { l: 1, ..self.dims };
        let stages = self
            .stages
            .iter()
            .map(|s| StageParams {
                a: s.a1.clone(),
                at: s.at1.clone(),
                c: s.b1.clone(),
                ct: s.bt1.clone(),
                f1: s.f1.clone(),
                phi: s.phi1.clone(),
                psi: s.psi1.clone(),
                ..StageParams::zeros(&dims)
            })
            .collect();
        MeanFieldSystem::new(dims, stages, self.x0.clone())
    }

    pub fn validate(&self) -> ValidationReport {
        self.to_mean_field().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(k: usize) -> Dimensions {
        Dimensions {
            n: 2,
            l: 2,
            q: 2,
            m_phi: 2,
            horizon: k,
        }
    }

    #[test]
    fn zero_system_is_valid() {
        let d = dims(3);
        let sys = MeanFieldSystem::constant(d, StageParams::zeros(&d), Vector::zeros(2));
        assert!(sys.validate().is_valid());
        assert_eq!(sys.stages.len(), 4);
    }

    #[test]
    fn scaled_psi_is_rejected() {
        let d = dims(1);
        let mut stage = StageParams::zeros(&d);
        stage.psi *= 2.0;
        let sys = MeanFieldSystem::constant(d, stage, Vector::zeros(2));
        let report = sys.validate();
        assert_eq!(report.violations.len(), 2);
        assert!(report.to_string().contains("Psi not orthonormal at k=0"));
        assert!(matches!(
            report.violations[1],
            Violation::PsiNotOrthonormal { stage: 1, .. }
        ));
    }

    #[test]
    fn wrong_shape_is_reported() {
        let d = dims(0);
        let mut stage = StageParams::zeros(&d);
        stage.b = Mat::zeros(3, 2);
        let sys = MeanFieldSystem::new(d, vec![stage], Vector::zeros(2));
        let report = sys.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("dimension mismatch"));
        assert!(report.to_string().contains("stages[0].B"));
    }

    #[test]
    fn stage_count_and_x0_checked() {
        let d = dims(2);
        let sys = MeanFieldSystem::new(d, vec![StageParams::zeros(&d)], Vector::zeros(3));
        let report = sys.validate();
        assert!(report.violations.contains(&Violation::StageCount {
            expected: 3,
            found: 1
        }));
        assert!(report.violations.contains(&Violation::InitialStateLength {
            expected: 2,
            found: 3
        }));
    }

    #[test]
    fn non_finite_entry_is_reported() {
        let d = dims(0);
        let mut stage = StageParams::zeros(&d);
        stage.c[(1, 0)] = f64::NAN;
        let sys = MeanFieldSystem::new(d, vec![stage], Vector::zeros(2));
        assert_eq!(
            sys.validate().violations,
            vec![Violation::NonFinite {
                stage: 0,
                field: "C"
            }]
        );
    }

    #[test]
    fn bar_accessors_are_exact_sums() {
        let d = dims(0);
        let mut s = StageParams::zeros(&d);
        s.a = Mat::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        s.at = Mat::from_row_slice(2, 2, &[0.7, 0.05, 0.15, 0.25]);
        assert_eq!(s.a_bar(), &s.a + &s.at);
    }
}
