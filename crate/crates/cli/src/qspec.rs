// SPDX-License-Identifier: MIT OR Apache-2.0

//! Candidate-set specifications given on the command line.

use std::path::PathBuf;
use std::str::FromStr;

use mvtv::CandidateSet;

/// Defaults for `gaussian:` when a key is omitted: centred on the diagonal.
const GAUSSIAN_MEAN: f64 = std::f64::consts::FRAC_PI_4;
const GAUSSIAN_STD: f64 = std::f64::consts::FRAC_PI_8;

#[derive(Debug, Clone, PartialEq)]
pub enum QSpec {
    Single,
    Dyadic {
        r: u32,
    },
    Random {
        n: usize,
        seed: Option<u64>,
    },
    Gaussian {
        n: usize,
        mean: f64,
        std: f64,
        seed: Option<u64>,
    },
    File(PathBuf),
}

fn parse_params(body: &str) -> Result<Vec<(String, String)>, String> {
    body.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got '{kv}'"))?;
            Ok((k.trim().to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value for {key}: '{value}'"))
}

impl FromStr for QSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "single" if body.is_empty() => Ok(QSpec::Single),
            "file" if !body.is_empty() => Ok(QSpec::File(PathBuf::from(body))),
            "dyadic" | "random" | "gaussian" => {
                let params = parse_params(body)?;
                let mut r = None;
                let mut n = None;
                let mut seed = None;
                let mut mean = GAUSSIAN_MEAN;
                let mut std = GAUSSIAN_STD;
                for (k, v) in &params {
                    match (kind, k.as_str()) {
                        ("dyadic", "r") => r = Some(num(k, v)?),
                        ("random" | "gaussian", "n") => n = Some(num(k, v)?),
                        ("random" | "gaussian", "seed") => seed = Some(num(k, v)?),
                        ("gaussian", "mean") => mean = num(k, v)?,
                        ("gaussian", "std") => std = num(k, v)?,
                        _ => return Err(format!("unknown key '{k}' for {kind}")),
                    }
                }
                match kind {
                    "dyadic" => Ok(QSpec::Dyadic {
                        r: r.ok_or("dyadic needs R=<levels>")?,
                    }),
                    "random" => Ok(QSpec::Random {
                        n: n.ok_or("random needs n=<count>")?,
                        seed,
                    }),
                    _ => Ok(QSpec::Gaussian {
                        n: n.ok_or("gaussian needs n=<count>")?,
                        mean,
                        std,
                        seed,
                    }),
                }
            }
            _ => Err(format!(
                "unknown candidate set '{s}' (expected single, dyadic:R=<r>, random:n=<n>[,seed=<s>], \
                 gaussian:n=<n>[,mean=<rad>,std=<rad>,seed=<s>] or file:<path>)"
            )),
        }
    }
}

impl QSpec {
    /// Builds the set once the number of components is known. `seed` is
    /// used when the spec does not carry its own.
    pub fn build(&self, lambda: f64, components: usize, seed: u64) -> mvtv::Result<CandidateSet> {
        let two_d = |name: &str| {
            if components == 2 {
                Ok(())
            } else {
                Err(mvtv::TvError::InvalidParameter(format!(
                    "{name} candidate sets need M = 2, data has M = {components}"
                )))
            }
        };
        match self {
            QSpec::Single => CandidateSet::single(lambda, components),
            QSpec::Dyadic { r } => {
                two_d("dyadic")?;
                CandidateSet::dyadic_bivariate(lambda, *r)
            }
            QSpec::Random { n, seed: s } => {
                CandidateSet::random_directions(lambda, components, *n, s.unwrap_or(seed))
            }
            QSpec::Gaussian {
                n,
                mean,
                std,
                seed: s,
            } => {
                two_d("gaussian")?;
                CandidateSet::gaussian_angles(lambda, *n, *mean, *std, s.unwrap_or(seed))
            }
            QSpec::File(path) => {
                let set = CandidateSet::load(path)?;
                if (set.lambda() - lambda).abs() > 1e-12 * lambda {
                    return Err(mvtv::TvError::InvalidParameter(format!(
                        "{} was built for lambda = {}, not {lambda}",
                        path.display(),
                        set.lambda()
                    )));
                }
                if set.components() != components {
                    return Err(mvtv::TvError::InvalidParameter(format!(
                        "{} has {} components, data has {components}",
                        path.display(),
                        set.components()
                    )));
                }
                Ok(set)
            }
        }
    }
}
