use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantities may overshoot a capacity by this relative amount (summation rounding).
pub(crate) const CAP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Zero,
    Linear,
    Quadratic,
}

/// Convex production cost `c(q) = a·q² + b·q` on `[0, cap]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostJson", into = "CostJson")]
pub struct CostSpec {
    kind: CostKind,
    a: f64,
    b: f64,
    cap: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CostJson {
    kind: CostKind,
    #[serde(default)]
    a: f64,
    #[serde(default)]
    b: f64,
    #[serde(default)]
    cap: Option<f64>,
}

impl TryFrom<CostJson> for CostSpec {
    type Error = Error;

    fn try_from(j: CostJson) -> Result<Self> {
        let spec = match j.kind {
            CostKind::Zero => {
                if j.a != 0.0 || j.b != 0.0 {
                    return Err(Error::InvalidCost("zero cost takes no coefficients".into()));
                }
                CostSpec::zero()
            }
            CostKind::Linear => {
                if j.a != 0.0 {
                    return Err(Error::InvalidCost(
                        "linear cost has no quadratic term".into(),
                    ));
                }
                CostSpec::linear(j.b)?
            }
            CostKind::Quadratic => CostSpec::quadratic(j.a, j.b)?,
        };
        match j.cap {
            Some(cap) => spec.with_cap(cap),
            None => Ok(spec),
        }
    }
}

impl From<CostSpec> for CostJson {
    fn from(c: CostSpec) -> Self {
        CostJson {
            kind: c.kind,
            a: c.a,
            b: c.b,
            cap: c.cap,
        }
    }
}

fn check_coefficient(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost(format!(
            "coefficient {name} = {x} must be finite and >= 0"
        )))
    }
}

impl CostSpec {
    pub fn zero() -> Self {
        CostSpec {
            kind: CostKind::Zero,
            a: 0.0,
            b: 0.0,
            cap: None,
        }
    }

    pub fn linear(b: f64) -> Result<Self> {
        check_coefficient("b", b)?;
        Ok(CostSpec {
            kind: CostKind::Linear,
            a: 0.0,
            b,
            cap: None,
        })
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        check_coefficient("a", a)?;
        check_coefficient("b", b)?;
        Ok(CostSpec {
            kind: CostKind::Quadratic,
            a,
            b,
            cap: None,
        })
    }

    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidCost(format!(
                "capacity {cap} must be finite and > 0"
            )));
        }
        self.cap = Some(cap);
        Ok(self)
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    /// Quadratic coefficient.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Per-unit coefficient.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.a > 0.0
    }

    fn check(&self, q: f64) -> Result<()> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::NegativeQuantity(q));
        }
        if let Some(cap) = self.cap {
            if q > cap + CAP_SLACK * cap.max(1.0) {
                return Err(Error::InfeasibleQuantity { quantity: q, cap });
            }
        }
        Ok(())
    }

    pub fn value(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.value_unchecked(q))
    }

    pub fn marginal(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.marginal_unchecked(q))
    }

    pub(crate) fn value_unchecked(&self, q: f64) -> f64 {
        (self.a * q + self.b) * q
    }

    pub(crate) fn marginal_unchecked(&self, q: f64) -> f64 {
        2.0 * self.a * q + self.b
    }

    /// Largest total quantity whose marginal cost does not exceed `level`,
    /// or `None` when marginal cost is flat at or below `level` (no finite answer).
    pub(crate) fn quantity_at_marginal(&self, level: f64) -> Option<f64> {
        if self.a > 0.0 {
            Some(((level - self.b) / (2.0 * self.a)).max(0.0))
        } else if level < self.b {
            Some(0.0)
        } else {
            None
        }
    }

    pub(crate) fn scaled(&self, alpha: f64) -> Self {
        CostSpec {
            a: self.a * alpha,
            b: self.b * alpha,
            ..*self
        }
    }
}
