use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::SymmetricMatrix;
use crate::randgen::DEFAULT_SEED;

/// Marginal law of a true regressor. `sd` is a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorLaw {
    Normal { mean: f64, sd: f64 },
    ChiSquare { df: usize },
}

impl RegressorLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            RegressorLaw::Normal { mean, .. } => mean,
            RegressorLaw::ChiSquare { df } => df as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            RegressorLaw::Normal { sd, .. } => sd * sd,
            RegressorLaw::ChiSquare { df } => 2.0 * df as f64,
        }
    }
}

/// Additive measurement-error law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorLaw {
    Normal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contamination {
    /// Regressor index (0-based).
    pub target: usize,
    pub fraction: f64,
    pub law: ErrorLaw,
    /// Masks sharing a group are drawn without overlap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disjoint_group: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    #[default]
    Normal,
    /// Unit exponential shifted to median zero.
    ExpMedianZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeteroMultiplier {
    /// `exp(−x)` of the first true regressor.
    ExpNegX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroRule {
    pub fraction: f64,
    pub multiplier: HeteroMultiplier,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(n) => vec![n],
        OneOrMany::Many(v) => v,
    })
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// One simulation design. `n` may hold several sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    pub replications: usize,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    pub regressor_law: Vec<RegressorLaw>,
    /// Common pairwise correlation of the (normal) true regressors.
    #[serde(default)]
    pub regressor_correlation: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub noise_shape: NoiseShape,
    #[serde(default)]
    pub contamination: Vec<Contamination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hetero_rule: Option<HeteroRule>,
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Display name of coefficient `j`: `x`, `z`, then `x3`, `x4`, ...
pub fn coefficient_name(j: usize) -> String {
    match j {
        0 => "x".into(),
        1 => "z".into(),
        _ => format!("x{}", j + 1),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::Parameter(format!("scenario JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(format!("scenario '{}': {m}", self.name)));
        let p = self.dim();
        if p == 0 {
            return bad("needs at least one regressor".into());
        }
        if self.regressor_law.len() != p {
            return bad(format!("{} regressor laws for {p} slopes", self.regressor_law.len()));
        }
        if self.n.is_empty() || self.n.iter().any(|&n| n < 10) {
            return bad("every sample size must be at least 10".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        if p > 1 {
            if let Some(e) = self.estimators.iter().find(|e| e.bivariate_only()) {
                return bad(format!("{e} needs a single regressor"));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be finite and ≥ 0", self.noise_sd));
        }
        let r = self.regressor_correlation;
        if p > 1 {
            if !(r > -1.0 / (p as f64 - 1.0) && r < 1.0) {
                return bad(format!("correlation {r} gives a singular regressor law"));
            }
            if r != 0.0
                && self
                    .regressor_law
                    .iter()
                    .any(|l| !matches!(l, RegressorLaw::Normal { .. }))
            {
                return bad("correlated regressors must be normal".into());
            }
        }
        for law in &self.regressor_law {
            match *law {
                RegressorLaw::Normal { mean, sd } if !(sd > 0.0) || !mean.is_finite() => {
                    return bad(format!("regressor sd {sd} must be > 0"))
                }
                RegressorLaw::ChiSquare { df: 0 } => return bad("chi-square needs df ≥ 1".into()),
                _ => {}
            }
        }
        let mut per_target = vec![0.0; p];
        for c in &self.contamination {
            if c.target >= p {
                return bad(format!("contamination target {} out of range", c.target));
            }
            if !(0.0..0.5).contains(&c.fraction) {
                return bad(format!("contamination fraction {}", c.fraction));
            }
            let ErrorLaw::Normal { sd, mean } = c.law;
            if !(sd >= 0.0) || !mean.is_finite() {
                return bad(format!("contamination sd {sd}"));
            }
            per_target[c.target] += c.fraction;
        }
        if let Some(j) = per_target.iter().position(|f| *f >= 0.5) {
            return bad(format!("total contamination of regressor {j} reaches one half"));
        }
        if let Some(h) = &self.hetero_rule {
            if !(0.0..0.5).contains(&h.fraction) {
                return bad(format!("hetero fraction {}", h.fraction));
            }
        }
        Ok(())
    }

    /// Correlation matrix of the true regressors.
    pub(crate) fn correlation_matrix(&self) -> SymmetricMatrix {
        let r = self.regressor_correlation;
        SymmetricMatrix::from_fn(self.dim(), |i, j| if i == j { 1.0 } else { r })
    }

    /// Covariance matrix of the true regressors.
    pub fn regressor_covariance(&self) -> SymmetricMatrix {
        let sd: Vec<f64> = self.regressor_law.iter().map(|l| l.variance().sqrt()).collect();
        let r = self.correlation_matrix();
        SymmetricMatrix::from_fn(self.dim(), |i, j| r.get(i, j) * sd[i] * sd[j])
    }
}

/// Probability limit of the OLS slopes: `(Σ_x + Σ_u)⁻¹ (Σ_x β + c)`, where
/// `Σ_u` is the covariance of the contamination errors and `c` the covariance
/// between regressors and a heteroscedastic disturbance.
pub fn population_ols_slopes(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = cfg.dim();
    let sx = cfg.regressor_covariance();
    let mut acc = vec![0.0; p * p];
    for (a, ca) in cfg.contamination.iter().enumerate() {
        let ErrorLaw::Normal { mean: ma, sd: sa } = ca.law;
        for (b, cb) in cfg.contamination.iter().enumerate() {
            let ErrorLaw::Normal { mean: mb, .. } = cb.law;
            let cov = if a == b {
                ca.fraction * (sa * sa + ma * ma) - ca.fraction * ca.fraction * ma * ma
            } else if ca.disjoint_group.is_some() && ca.disjoint_group == cb.disjoint_group {
                -ca.fraction * cb.fraction * ma * mb
            } else {
                0.0
            };
            acc[ca.target * p + cb.target] += cov;
        }
    }
    let w = SymmetricMatrix::from_fn(p, |i, j| sx.get(i, j) + acc[i * p + j]);
    let mut rhs = sx.matvec(&cfg.beta);
    if let Some(h) = &cfg.hetero_rule {
        let mean_u = match cfg.noise_shape {
            NoiseShape::Normal => 0.0,
            NoiseShape::ExpMedianZero => 1.0 - std::f64::consts::LN_2,
        } * cfg.noise_sd;
        if mean_u != 0.0 {
            let RegressorLaw::Normal { mean, sd } = cfg.regressor_law[0] else {
                return Err(Error::Parameter(
                    "heteroscedastic oracle needs a normal first regressor".into(),
                ));
            };
            // Stein: cov(x_j, e^{-x_1}) = −cov(x_j, x_1)·E e^{-x_1}
            let m = (-mean + 0.5 * sd * sd).exp();
            for (j, v) in rhs.iter_mut().enumerate() {
                *v += h.fraction * mean_u * (-sx.get(j, 0) * m);
            }
        }
    }
    w.cholesky()
        .map(|c| c.solve(&rhs))
        .map_err(|_| Error::SingularDesign("population regressor covariance".into()))
}

fn normal(mean: f64, sd: f64) -> ErrorLaw {
    ErrorLaw::Normal { mean, sd }
}

fn contaminate(target: usize, fraction: f64, law: ErrorLaw) -> Contamination {
    Contamination {
        target,
        fraction,
        law,
        disjoint_group: None,
    }
}

fn base(name: &str, n: Vec<usize>, estimators: Vec<Estimator>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        n,
        replications: 1000,
        beta: vec![1.0],
        alpha: 0.0,
        regressor_law: vec![RegressorLaw::Normal { mean: 0.0, sd: 2.0 }],
        regressor_correlation: 0.0,
        noise_sd: 1.0,
        noise_shape: NoiseShape::Normal,
        contamination: vec![],
        hetero_rule: None,
        estimators,
        seed: DEFAULT_SEED,
    }
}

/// The seven reference designs: `table2` … `table7` and `appendix`.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    use Estimator::*;
    let robust = vec![Ols, Mm, DetMcd, DetS];

    let mut t2 = base("table2", vec![200, 2000], robust.clone());
    t2.contamination = vec![contaminate(0, 0.25, normal(10.0, 4.0))];

    let mut t3 = t2.clone();
    t3.name = "table3".into();
    t3.noise_sd = 3.0;

    let mut t4 = base("table4", vec![1000], robust.clone());
    t4.beta = vec![1.0, 1.0];
    t4.regressor_law = vec![RegressorLaw::Normal { mean: 0.0, sd: 2.0 }; 2];
    t4.regressor_correlation = 0.4;
    t4.noise_sd = 4.0;
    t4.contamination = vec![contaminate(0, 0.25, normal(0.0, 4.0))];

    let mut t5 = t4.clone();
    t5.name = "table5".into();
    t5.contamination = vec![
        Contamination {
            disjoint_group: Some("xz".into()),
            ..contaminate(0, 0.125, normal(0.0, 4.0))
        },
        Contamination {
            disjoint_group: Some("xz".into()),
            ..contaminate(1, 0.125, normal(0.0, 3.0))
        },
    ];

    let mut t6 = base("table6", vec![1000], vec![Ols, Orthogonal, Geometric, DetMcd]);
    t6.noise_sd = 3.0;
    t6.contamination = vec![contaminate(0, 0.25, normal(0.0, 3.0))];

    let mut t7 = base("table7", vec![1000], vec![Ols, MomentIv, DetMcd]);
    t7.regressor_law = vec![RegressorLaw::ChiSquare { df: 4 }];
    t7.noise_sd = 3.0;
    t7.contamination = vec![contaminate(0, 0.25, normal(0.0, 4.0))];

    let mut app = base("appendix", vec![2000], vec![Ols, MmFinal]);
    app.noise_shape = NoiseShape::ExpMedianZero;
    app.hetero_rule = Some(HeteroRule {
        fraction: 0.25,
        multiplier: HeteroMultiplier::ExpNegX,
    });

    vec![t2, t3, t4, t5, t6, t7, app]
}

/// Looks up a builtin by name; `2`…`7` are accepted for `table2`…`table7`.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let key = name.trim().to_ascii_lowercase();
    let key = if key.len() == 1 && key.chars().all(|c| c.is_ascii_digit()) {
        format!("table{key}")
    } else {
        key
    };
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == key)
        .ok_or_else(|| Error::Parameter(format!("unknown scenario '{name}'")))
}
