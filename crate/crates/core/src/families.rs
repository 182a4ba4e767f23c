//! Named presets binding structural parameters to a split-vector law.

use std::fmt;
use std::str::FromStr;

use crate::distributions::{AnalyticConstants, ConstantsMethod, SplitLaw, SplitVectorSource};
use crate::tree::SplitParams;
use crate::{Error, Result};

pub const PRESETS: &[&str] = &["bst", "mary", "trie", "custom"];

#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub name: String,
    pub params: SplitParams,
    pub source: SplitVectorSource,
    pub constants: AnalyticConstants,
    pub lattice_suspect: bool,
    pub notes: String,
}

/// Family selector with its parameters, as written on the command line or in a
/// config file: `bst`, `mary:3`, `trie:0.5/0.5`,
/// `custom:b=2/s=4/s0=0/s1=2/dirichlet=1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Bst,
    Mary { m: u32 },
    Trie { p: Vec<f64> },
    Custom { params: SplitParams, law: CustomVector },
}

/// Split-vector laws that a custom family can name without code.
#[derive(Debug, Clone, PartialEq)]
pub enum CustomVector {
    Dirichlet(f64),
    Spacings,
    Deterministic(Vec<f64>),
}

impl Family {
    /// `name` plus an optional parameter string, as in the config keys
    /// `family` and `family_params`.
    pub fn parse(name: &str, params: Option<&str>) -> Result<Self> {
        let params = params.map(str::trim).filter(|p| !p.is_empty());
        match name.trim() {
            "bst" => match params {
                None => Ok(Family::Bst),
                Some(p) => Err(Error::InvalidFamilyParam(format!("bst takes no parameters, got `{p}`"))),
            },
            "mary" => {
                let raw = params.ok_or_else(|| Error::InvalidFamilyParam("mary needs m".into()))?;
                let m = raw
                    .trim_start_matches("m=")
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidFamilyParam(format!("bad m `{raw}`")))?;
                if m < 2 {
                    return Err(Error::InvalidFamilyParam(format!("m must be >= 2, got {m}")));
                }
                Ok(Family::Mary { m })
            }
            "trie" => {
                let raw = params.ok_or_else(|| Error::InvalidFamilyParam("trie needs p".into()))?;
                Ok(Family::Trie { p: parse_list(raw.trim_start_matches("p="))? })
            }
            "custom" => {
                let raw = params.ok_or_else(|| Error::InvalidFamilyParam("custom needs parameters".into()))?;
                parse_custom(raw)
            }
            other => Err(Error::UnknownFamily { name: other.to_string(), available: PRESETS.join(", ") }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Bst => "bst",
            Family::Mary { .. } => "mary",
            Family::Trie { .. } => "trie",
            Family::Custom { .. } => "custom",
        }
    }

    /// The parameter string accepted by [`Family::parse`].
    pub fn params_string(&self) -> Option<String> {
        match self {
            Family::Bst => None,
            Family::Mary { m } => Some(m.to_string()),
            Family::Trie { p } => Some(join_list(p)),
            Family::Custom { params, law } => {
                let law = match law {
                    CustomVector::Dirichlet(a) => format!("dirichlet={a}"),
                    CustomVector::Spacings => "spacings".to_string(),
                    CustomVector::Deterministic(p) => format!("p={}", join_list(p)),
                };
                Some(format!("b={}/s={}/s0={}/s1={}/{law}", params.b, params.s, params.s0, params.s1))
            }
        }
    }

    pub fn spec(&self) -> Result<FamilySpec> {
        let (params, source, notes) = match self {
            Family::Bst => (
                SplitParams::new(2, 1, 1, 0)?,
                SplitVectorSource::dirichlet(1.0, 2)?,
                "binary search tree: one key per vertex, split vector (U, 1-U)",
            ),
            Family::Mary { m } => (
                SplitParams::new(*m, m - 1, m - 1, 0)?,
                SplitVectorSource::uniform_spacings(*m as usize)?,
                "m-ary search tree: m-1 keys per vertex, uniform spacings",
            ),
            Family::Trie { p } => (
                SplitParams::new(p.len() as u32, 1, 0, 0)?,
                SplitVectorSource::deterministic_permuted(p.clone())?,
                "trie: keys at leaves only, permuted fixed split vector",
            ),
            Family::Custom { params, law } => {
                params.validate()?;
                let b = params.b as usize;
                let source = match law {
                    CustomVector::Dirichlet(a) => SplitVectorSource::dirichlet(*a, b)?,
                    CustomVector::Spacings => SplitVectorSource::uniform_spacings(b)?,
                    CustomVector::Deterministic(p) => {
                        if p.len() != b {
                            return Err(Error::InvalidFamilyParam(format!(
                                "custom p has {} components but b = {b}",
                                p.len()
                            )));
                        }
                        SplitVectorSource::deterministic_permuted(p.clone())?
                    }
                };
                (*params, source, "user-supplied parameters")
            }
        };
        let constants = source.constants(ConstantsMethod::Auto)?;
        Ok(FamilySpec {
            name: self.name().to_string(),
            params,
            lattice_suspect: source.lattice_suspect(),
            source,
            constants,
            notes: notes.to_string(),
        })
    }
}

impl fmt::Display for Family {
    /// Comma-free label, also used as the CSV `family` column.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params_string() {
            Some(p) => write!(f, "{}:{}", self.name(), p),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(label: &str) -> Result<Self> {
        match label.split_once(':') {
            Some((name, params)) => Family::parse(name, Some(params)),
            None => Family::parse(label, None),
        }
    }
}

/// Resolve a preset by name with its parameter string.
pub fn preset(name: &str, params: Option<&str>) -> Result<FamilySpec> {
    Family::parse(name, params)?.spec()
}

fn parse_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(['/', ',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidFamilyParam(format!("bad number `{t}`"))))
        .collect()
}

fn join_list(p: &[f64]) -> String {
    p.iter().map(f64::to_string).collect::<Vec<_>>().join("/")
}

fn parse_custom(raw: &str) -> Result<Family> {
    let (mut b, mut s, mut s0, mut s1) = (None, None, None, None);
    let mut law = None;
    let int = |k: &str, v: &str| {
        v.parse::<u32>().map_err(|_| Error::InvalidFamilyParam(format!("bad integer for {k}: `{v}`")))
    };
    for item in raw.split(['/', ';']).filter(|t| !t.is_empty()) {
        let (k, v) = item.split_once('=').unwrap_or((item, ""));
        match k.trim() {
            "b" => b = Some(int(k, v)?),
            "s" => s = Some(int(k, v)?),
            "s0" => s0 = Some(int(k, v)?),
            "s1" => s1 = Some(int(k, v)?),
            "dirichlet" => {
                let a = v.parse::<f64>().map_err(|_| Error::InvalidFamilyParam(format!("bad dirichlet `{v}`")))?;
                law = Some(CustomVector::Dirichlet(a));
            }
            "spacings" => law = Some(CustomVector::Spacings),
            "p" => law = Some(CustomVector::Deterministic(parse_list(&v.replace('|', "/"))?)),
            other => return Err(Error::InvalidFamilyParam(format!("unknown custom key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::InvalidFamilyParam(format!("custom family needs {k}"));
    let params = SplitParams {
        b: b.ok_or_else(|| missing("b"))?,
        s: s.ok_or_else(|| missing("s"))?,
        s0: s0.ok_or_else(|| missing("s0"))?,
        s1: s1.unwrap_or(0),
    };
    params.validate()?;
    Ok(Family::Custom { params, law: law.ok_or_else(|| missing("a split law (dirichlet=, spacings, p=)"))? })
}

/// Short description of the law behind a spec.
pub fn describe_law(source: &SplitVectorSource) -> String {
    match source.law() {
        SplitLaw::DirichletSymmetric { concentration, branch_factor } => {
            format!("Dirichlet({concentration}; b={branch_factor})")
        }
        SplitLaw::UniformSpacings { branch_factor } => format!("UniformSpacings({branch_factor})"),
        SplitLaw::DeterministicPermuted { probabilities } => format!("Permuted({})", join_list(probabilities)),
        SplitLaw::Custom(c) => format!("Custom({})", c.name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bst_preset() {
        let spec = preset("bst", None).unwrap();
        assert_eq!(spec.params, SplitParams { b: 2, s: 1, s0: 1, s1: 0 });
        assert!(matches!(
            spec.source.law(),
            SplitLaw::DirichletSymmetric { concentration, branch_factor: 2 } if *concentration == 1.0
        ));
        assert!((spec.constants.mu - 0.5).abs() < 1e-12);
        assert!(!spec.lattice_suspect);
    }

    #[test]
    fn symmetric_trie_is_lattice_suspect() {
        let spec = preset("trie", Some("0.5/0.5")).unwrap();
        assert!(matches!(spec.source.law(), SplitLaw::DeterministicPermuted { .. }));
        assert!(spec.lattice_suspect);
    }

    #[test]
    fn ternary_search_tree() {
        let spec = preset("mary", Some("3")).unwrap();
        assert_eq!(spec.params, SplitParams { b: 3, s: 2, s0: 2, s1: 0 });
        assert!(matches!(spec.source.law(), SplitLaw::UniformSpacings { branch_factor: 3 }));
        assert!((spec.constants.mu - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let err = preset("quadtree", None).unwrap_err();
        assert!(err.to_string().contains("bst, mary, trie, custom"), "{err}");
        assert!(matches!(preset("mary", Some("1")), Err(Error::InvalidFamilyParam(_))));
        assert!(preset("trie", Some("0.5/0.6")).is_err());
        assert!(preset("custom", Some("b=2/s=1/s0=1/s1=1/dirichlet=1")).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for label in ["bst", "mary:4", "trie:0.3/0.7", "custom:b=2/s=4/s0=0/s1=2/dirichlet=1"] {
            let family: Family = label.parse().unwrap();
            assert_eq!(family.to_string(), label);
        }
    }
}
