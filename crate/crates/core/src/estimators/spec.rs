use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EstimationError;

/// Members of the spatial model family, from plain OLS to the general nesting
/// specification `y = rho W y + X b + W X theta + a + e`, `e = lambda W e + u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Slx,
    Sem,
    Sar,
    Sdem,
    Sdm,
    Sac,
    Gns,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Ols,
        ModelKind::Slx,
        ModelKind::Sem,
        ModelKind::Sar,
        ModelKind::Sdem,
        ModelKind::Sdm,
        ModelKind::Sac,
        ModelKind::Gns,
    ];

    /// Spatially lagged dependent variable (rho).
    pub fn has_rho(self) -> bool {
        matches!(self, ModelKind::Sar | ModelKind::Sdm | ModelKind::Sac | ModelKind::Gns)
    }

    /// Spatially autocorrelated error (lambda).
    pub fn has_lambda(self) -> bool {
        matches!(self, ModelKind::Sem | ModelKind::Sdem | ModelKind::Sac | ModelKind::Gns)
    }

    /// Spatially lagged regressors (theta).
    pub fn has_durbin(self) -> bool {
        matches!(self, ModelKind::Slx | ModelKind::Sdem | ModelKind::Sdm | ModelKind::Gns)
    }

    /// Estimated by maximum likelihood rather than least squares.
    pub fn is_ml(self) -> bool {
        self.has_rho() || self.has_lambda()
    }

    pub fn needs_weights(self) -> bool {
        self != ModelKind::Ols
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ols => "ols",
            ModelKind::Slx => "slx",
            ModelKind::Sem => "sem",
            ModelKind::Sar => "sar",
            ModelKind::Sdem => "sdem",
            ModelKind::Sdm => "sdm",
            ModelKind::Sac => "sac",
            ModelKind::Gns => "gns",
        })
    }
}

impl FromStr for ModelKind {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| EstimationError::InvalidSpec(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeMode {
    #[default]
    Robust,
    Classical,
}

impl FromStr for SeMode {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "robust" => Ok(SeMode::Robust),
            "classical" => Ok(SeMode::Classical),
            other => Err(EstimationError::InvalidSpec(format!("unknown standard-error mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub response: String,
    pub regressors: Vec<String>,
    /// Regressors that also enter as spatial lags `W x`.
    pub durbin: Vec<String>,
    pub intercept: bool,
    pub se_mode: SeMode,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, response: &str, regressors: &[&str]) -> Self {
        Self {
            kind,
            response: response.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            durbin: Vec::new(),
            intercept: true,
            se_mode: SeMode::Robust,
        }
    }

    pub fn with_durbin(mut self, durbin: &[&str]) -> Self {
        self.durbin = durbin.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_se(mut self, se_mode: SeMode) -> Self {
        self.se_mode = se_mode;
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    /// Same spec under a different model kind; the Durbin set is dropped for
    /// kinds without lagged regressors.
    pub fn as_kind(&self, kind: ModelKind) -> Self {
        let mut s = self.clone();
        s.kind = kind;
        if !kind.has_durbin() {
            s.durbin.clear();
        }
        s
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.regressors.is_empty() && !self.intercept {
            return Err(EstimationError::InvalidSpec("no regressors and no intercept".into()));
        }
        for d in &self.durbin {
            if !self.regressors.contains(d) {
                return Err(EstimationError::InvalidSpec(format!("durbin variable `{d}` is not a regressor")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.regressors {
            if !seen.insert(r) {
                return Err(EstimationError::InvalidSpec(format!("regressor `{r}` listed twice")));
            }
        }
        let mut dd = self.durbin.clone();
        dd.sort();
        dd.dedup();
        if dd.len() != self.durbin.len() {
            return Err(EstimationError::InvalidSpec("durbin set lists a variable twice".into()));
        }
        if self.regressors.contains(&self.response) {
            return Err(EstimationError::InvalidSpec(format!("response `{}` is also a regressor", self.response)));
        }
        match (self.kind.has_durbin(), self.durbin.is_empty()) {
            (true, true) => Err(EstimationError::InvalidSpec(format!(
                "{} requires a non-empty durbin set",
                self.kind
            ))),
            (false, false) => Err(EstimationError::InvalidSpec(format!(
                "{} does not take lagged regressors",
                self.kind
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_flags() {
        use ModelKind::*;
        let rho: Vec<_> = ModelKind::ALL.into_iter().filter(|k| k.has_rho()).collect();
        let lam: Vec<_> = ModelKind::ALL.into_iter().filter(|k| k.has_lambda()).collect();
        let dur: Vec<_> = ModelKind::ALL.into_iter().filter(|k| k.has_durbin()).collect();
        assert_eq!(rho, vec![Sar, Sdm, Sac, Gns]);
        assert_eq!(lam, vec![Sem, Sdem, Sac, Gns]);
        assert_eq!(dur, vec![Slx, Sdem, Sdm, Gns]);
        assert_eq!("SDM".parse::<ModelKind>().unwrap(), Sdm);
    }

    #[test]
    fn durbin_set_rules() {
        let s = ModelSpec::new(ModelKind::Sdm, "y", &["a", "b"]);
        assert!(s.validate().is_err());
        assert!(s.clone().with_durbin(&["a"]).validate().is_ok());
        assert!(s.clone().with_durbin(&["c"]).validate().is_err());
        assert!(s.clone().with_durbin(&["a", "a"]).validate().is_err());
        let sar = ModelSpec::new(ModelKind::Sar, "y", &["a"]).with_durbin(&["a"]);
        assert!(sar.validate().is_err());
        assert!(ModelSpec::new(ModelKind::Ols, "y", &["y"]).validate().is_err());
    }
}
