//! Test functions F(t, x) with their derivatives, tagged by smoothness class.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::Serialize;

use crate::error::ItoError;
use crate::rng;

pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    /// C¹ in t, C² in x.
    C12,
    /// Continuous, C¹ in x.
    C01,
    /// C¹ with ∂ₓF Hölder of the given order in x.
    C1Lambda(f64),
    C0,
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::C12 => write!(f, "C12"),
            Self::C01 => write!(f, "C01"),
            Self::C1Lambda(l) => write!(f, "C1+{l}"),
            Self::C0 => write!(f, "C0"),
        }
    }
}

#[derive(Clone)]
pub struct FunctionBundle {
    pub name: String,
    pub class: Smoothness,
    f: Field,
    dt: Option<Field>,
    dx: Option<Field>,
    dxx: Option<Field>,
}

impl fmt::Debug for FunctionBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionBundle").field("name", &self.name).field("class", &self.class).finish()
    }
}

fn field(g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Field {
    Arc::new(g)
}

impl FunctionBundle {
    pub fn new(name: impl Into<String>, class: Smoothness, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), class, f: field(f), dt: None, dx: None, dxx: None }
    }

    pub fn with_dt(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dt = Some(field(g));
        self
    }

    pub fn with_dx(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dx = Some(field(g));
        self
    }

    pub fn with_dxx(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dxx = Some(field(g));
        self
    }

    #[inline]
    pub fn f(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn f_field(&self) -> &Field {
        &self.f
    }

    pub fn dt(&self) -> Option<&Field> {
        self.dt.as_ref()
    }

    pub fn dx(&self) -> Option<&Field> {
        self.dx.as_ref()
    }

    pub fn dxx(&self) -> Option<&Field> {
        self.dxx.as_ref()
    }

    fn missing(&self, which: &'static str) -> ItoError {
        ItoError::MissingDerivative { name: self.name.clone(), which, class: self.class.to_string() }
    }

    pub fn require_dt(&self) -> Result<&Field, ItoError> {
        self.dt.as_ref().ok_or_else(|| self.missing("dt"))
    }

    pub fn require_dx(&self) -> Result<&Field, ItoError> {
        self.dx.as_ref().ok_or_else(|| self.missing("dx"))
    }

    pub fn require_dxx(&self) -> Result<&Field, ItoError> {
        self.dxx.as_ref().ok_or_else(|| self.missing("dxx"))
    }

    /// Checks the evaluators required by the class and compares each supplied
    /// derivative with central differences at 100 pseudo-random probes in
    /// [0, 1] × [−3, 3], to relative 1e-4.
    pub fn validate(&self) -> Result<(), ItoError> {
        match self.class {
            Smoothness::C12 => {
                self.require_dt()?;
                self.require_dx()?;
                self.require_dxx()?;
            }
            Smoothness::C1Lambda(_) => {
                self.require_dt()?;
                self.require_dx()?;
            }
            Smoothness::C01 => {
                self.require_dx()?;
            }
            Smoothness::C0 => {}
        }
        let mut r = rng::stream(0x5eed, rng::STREAM_BROWNIAN);
        let close = |fd: f64, d: f64| (fd - d).abs() <= 1e-4 * d.abs().max(1.0);
        for _ in 0..100 {
            let t: f64 = r.random_range(0.02..0.98);
            let x: f64 = r.random_range(-3.0..3.0);
            let hx = 1e-5 * x.abs().max(1.0);
            let ht = 1e-6;
            let bad = |which| ItoError::Derivative { name: self.name.clone(), which, t, x };
            if let Some(dx) = &self.dx {
                let fd = (self.f(t, x + hx) - self.f(t, x - hx)) / (2.0 * hx);
                if !close(fd, dx(t, x)) {
                    return Err(bad("dx"));
                }
            }
            if let Some(dt) = &self.dt {
                let fd = (self.f(t + ht, x) - self.f(t - ht, x)) / (2.0 * ht);
                if !close(fd, dt(t, x)) {
                    return Err(bad("dt"));
                }
            }
            if let (Some(dx), Some(dxx)) = (&self.dx, &self.dxx) {
                let fd = (dx(t, x + hx) - dx(t, x - hx)) / (2.0 * hx);
                if !close(fd, dxx(t, x)) {
                    return Err(bad("dxx"));
                }
            }
        }
        Ok(())
    }

    pub fn require_class(&self, allowed: &[Smoothness], required: &'static str) -> Result<(), ItoError> {
        let ok = allowed.iter().any(|c| match (c, self.class) {
            (Smoothness::C1Lambda(_), Smoothness::C1Lambda(_)) => true,
            (a, b) => *a == b,
        });
        if ok {
            Ok(())
        } else {
            Err(ItoError::Class { name: self.name.clone(), class: self.class.to_string(), required })
        }
    }

    /// a·F + b·G, keeping the derivatives both provide.
    pub fn linear_combination(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        fn mix(a: f64, p: &Option<Field>, b: f64, q: &Option<Field>) -> Option<Field> {
            match (p, q) {
                (Some(p), Some(q)) => {
                    let (p, q) = (p.clone(), q.clone());
                    Some(field(move |t, x| a * p(t, x) + b * q(t, x)))
                }
                _ => None,
            }
        }
        let class = match (f.class, g.class) {
            (x, y) if x == y => x,
            (Smoothness::C0, _) | (_, Smoothness::C0) => Smoothness::C0,
            _ => Smoothness::C01,
        };
        let (pf, qf) = (f.f.clone(), g.f.clone());
        Self {
            name: format!("{a}*{}+{b}*{}", f.name, g.name),
            class,
            f: field(move |t, x| a * pf(t, x) + b * qf(t, x)),
            dt: mix(a, &f.dt, b, &g.dt),
            dx: mix(a, &f.dx, b, &g.dx),
            dxx: mix(a, &f.dxx, b, &g.dxx),
        }
    }
}

/// One built-in function with a short description.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub formula: &'static str,
    pub anchor: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry { id: "x", formula: "F(t,x) = x", anchor: "identity; Ito residual telescopes to X_0 minus a start average" },
    CatalogEntry { id: "square", formula: "F(t,x) = x^2", anchor: "classical Ito identity with d[X,X]" },
    CatalogEntry { id: "tx", formula: "F(t,x) = t x", anchor: "time-dependent; the time integral carries X" },
    CatalogEntry {
        id: "sin",
        formula: "F(t,x) = sin x",
        anchor: "bounded derivatives; the large-jump condition holds automatically",
    },
    CatalogEntry {
        id: "c01_sin8",
        formula: "F(t,x) = x |sin(8t)|^(1/2)",
        anchor: "C^{0,1} chain rule where no C^{1,2} formula applies",
    },
    CatalogEntry {
        id: "holder",
        formula: "F(t,x) = x |x|^(1/2)",
        anchor: "C^1 with 1/2-Hoelder derivative; symmetric jump term",
    },
    CatalogEntry { id: "abs", formula: "F(t,x) = |x|", anchor: "continuous only; compensated jump chain rule" },
];

/// x·|sin(ωt)|^{1/2}.
pub fn c01_sin(omega: f64) -> FunctionBundle {
    FunctionBundle::new(format!("c01_sin{omega}"), Smoothness::C01, move |t, x| x * (omega * t).sin().abs().sqrt())
        .with_dx(move |t, _| (omega * t).sin().abs().sqrt())
}

/// x·|x|^λ, whose x-derivative (1+λ)|x|^λ is λ-Hölder.
pub fn holder(lambda: f64) -> FunctionBundle {
    FunctionBundle::new(format!("holder{lambda}"), Smoothness::C1Lambda(lambda), move |_, x| x * x.abs().powf(lambda))
        .with_dt(|_, _| 0.0)
        .with_dx(move |_, x| (1.0 + lambda) * x.abs().powf(lambda))
}

pub fn lookup(id: &str) -> Option<FunctionBundle> {
    let c12 = Smoothness::C12;
    Some(match id {
        "x" => FunctionBundle::new("x", c12, |_, x| x).with_dt(|_, _| 0.0).with_dx(|_, _| 1.0).with_dxx(|_, _| 0.0),
        "square" => {
            FunctionBundle::new("square", c12, |_, x| x * x).with_dt(|_, _| 0.0).with_dx(|_, x| 2.0 * x).with_dxx(|_, _| 2.0)
        }
        "tx" => FunctionBundle::new("tx", c12, |t, x| t * x).with_dt(|_, x| x).with_dx(|t, _| t).with_dxx(|_, _| 0.0),
        "sin" => {
            FunctionBundle::new("sin", c12, |_, x| x.sin()).with_dt(|_, _| 0.0).with_dx(|_, x| x.cos()).with_dxx(|_, x| -x.sin())
        }
        "c01_sin8" => c01_sin(8.0),
        "holder" => holder(0.5),
        "abs" => FunctionBundle::new("abs", Smoothness::C0, |_, x| x.abs()),
        _ => return None,
    })
}

/// The C^{1,2} part of the catalog.
pub const C12_IDS: [&str; 4] = ["x", "square", "tx", "sin"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_validates() {
        for e in CATALOG {
            lookup(e.id).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn wrong_derivative_is_caught() {
        let bad = FunctionBundle::new("bad", Smoothness::C12, |_, x| x * x)
            .with_dt(|_, _| 0.0)
            .with_dx(|_, x| 2.0 * x)
            .with_dxx(|_, _| 1.0);
        assert!(matches!(bad.validate(), Err(ItoError::Derivative { which: "dxx", .. })));
        let missing = FunctionBundle::new("m", Smoothness::C12, |_, x| x);
        assert!(matches!(missing.validate(), Err(ItoError::MissingDerivative { .. })));
    }

    #[test]
    fn combination_is_linear() {
        let f = lookup("square").unwrap();
        let g = lookup("sin").unwrap();
        let h = FunctionBundle::linear_combination(2.0, &f, -3.0, &g);
        assert_eq!(h.class, Smoothness::C12);
        h.validate().unwrap();
        assert_eq!(h.f(0.3, 1.5), 2.0 * 2.25 - 3.0 * 1.5f64.sin());
    }
}
