use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized form of a marginal or noise model: `kind`, `params`, `standardized`.
///
/// The compact text form is `kind[:p1,p2,...][+std]`, e.g. `poisson:1+std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub standardized: bool,
}

impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, standardized) = match s.strip_suffix("+std") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let (kind, params) = match body.split_once(':') {
            Some((k, p)) => {
                let params = p
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad parameter '{t}' in '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (k, params)
            }
            None => (body, vec![]),
        };
        if kind.is_empty() {
            return Err(Error::Config(format!("missing kind in '{s}'")));
        }
        Ok(ModelConfig {
            kind: kind.trim().to_ascii_lowercase(),
            params,
            standardized,
        })
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|v| v.to_string()).collect();
            write!(f, ":{}", p.join(","))?;
        }
        if self.standardized {
            write!(f, "+std")?;
        }
        Ok(())
    }
}
