//! JSON model specification files.
//!
//! Parsing walks the document by hand so that every diagnostic names the offending key
//! path (`factors[1].intensity`) and unknown keys can be rejected or merely reported.

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::compensator::CompensatorTable;
use crate::decomposition::{ContinuousHazard, MinDecomposition};
use crate::error::{Error, Result};
use crate::numerics::SubsetMask;
use crate::process_models::{DeformationKind, Factor, FactorModel, JumpLaw, TimeDeformation};
use crate::shot_noise::{Intensity, Kernel, ShotNoiseModel};
use crate::MAX_COMPONENTS;

/// A parsed, validated model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Factor(FactorModel),
    ShotNoise(ShotNoiseModel),
    MinDecomposition(MinDecomposition),
    CompensatorTable(CompensatorTable),
}

impl ModelSpec {
    pub fn model_type(&self) -> &'static str {
        match self {
            ModelSpec::Factor(_) => "factor",
            ModelSpec::ShotNoise(_) => "shot_noise",
            ModelSpec::MinDecomposition(_) => "min_decomposition",
            ModelSpec::CompensatorTable(_) => "compensator_table",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Factor(m) => m.n(),
            ModelSpec::ShotNoise(m) => m.n(),
            ModelSpec::MinDecomposition(m) => m.n(),
            ModelSpec::CompensatorTable(t) => t.n(),
        }
    }
}

/// A loaded spec file: the model, its content digest and any lenient-mode warnings.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub model: ModelSpec,
    pub hash: String,
    pub warnings: Vec<String>,
}

/// Parses a spec document. With `strict`, unknown keys are errors; otherwise they are
/// returned as warnings.
pub fn parse_spec(text: &str, strict: bool) -> Result<LoadedSpec> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Model(format!("spec is not valid JSON: {e}")))?;
    let mut parser = Parser {
        strict,
        warnings: Vec::new(),
    };
    let model = parser.model(&value)?;
    Ok(LoadedSpec {
        model,
        hash: model_hash(&value),
        warnings: parser.warnings,
    })
}

/// Reads and parses a spec file.
pub fn load_spec(path: &std::path::Path, strict: bool) -> Result<LoadedSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Model(format!("cannot read spec file {}: {e}", path.display())))?;
    parse_spec(&text, strict)
}

/// SHA-256 of the canonical form: object keys sorted, numbers printed in shortest
/// round-trip form (so `1`, `1.0` and `1e0` hash alike), no insignificant whitespace.
pub fn model_hash(value: &Value) -> String {
    let mut out = String::new();
    canonicalize(value, &mut out);
    hex::encode(Sha256::digest(out.as_bytes()))
}

fn canonicalize(value: &Value, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&value.to_string()),
        Value::Number(n) => match n.as_f64() {
            Some(0.0) => out.push('0'),
            Some(x) => out.push_str(&format!("{x:e}")),
            None => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonicalize(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                canonicalize(&map[k], out);
            }
            out.push('}');
        }
    }
}

struct Parser {
    strict: bool,
    warnings: Vec<String>,
}

/// An object being consumed; `finish` reports keys nobody asked for.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: Vec<&'static str>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn type_error(path: &str, want: &str, got: &Value) -> Error {
    let kind = match got {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    };
    Error::Model(format!("`{path}` must be {want}, got {kind}"))
}

fn as_number(path: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| type_error(path, "a number", v))
}

fn as_array<'a>(path: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| type_error(path, "an array", v))
}

fn numbers(path: &str, v: &Value) -> Result<Vec<f64>> {
    as_array(path, v)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_number(&format!("{path}[{i}]"), x))
        .collect()
}

fn pairs(path: &str, v: &Value) -> Result<Vec<(f64, f64)>> {
    as_array(path, v)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}[{i}]");
            let xs = numbers(&p, x)?;
            match xs.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::Model(format!("`{p}` must be a pair [x, y]"))),
            }
        })
        .collect()
}

/// Prefixes a model-validation message with the key it came from.
fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Model(m) => Error::Model(format!("`{path}`: {m}")),
        other => other,
    })
}

impl<'a> Obj<'a> {
    fn new(path: &str, v: &'a Value) -> Result<Self> {
        let map = v.as_object().ok_or_else(|| {
            type_error(
                if path.is_empty() { "<root>" } else { path },
                "an object",
                v,
            )
        })?;
        Ok(Self {
            path: path.to_string(),
            map,
            seen: Vec::new(),
        })
    }

    fn key_path(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn optional(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn required(&mut self, key: &'static str) -> Result<&'a Value> {
        let path = self.key_path(key);
        self.optional(key)
            .ok_or_else(|| Error::Model(format!("missing required key `{path}`")))
    }

    fn number(&mut self, key: &'static str) -> Result<f64> {
        let v = self.required(key)?;
        as_number(&self.key_path(key), v)
    }

    fn string(&mut self, key: &'static str) -> Result<&'a str> {
        let v = self.required(key)?;
        v.as_str()
            .ok_or_else(|| type_error(&self.key_path(key), "a string", v))
    }

    fn finish(self, parser: &mut Parser) -> Result<()> {
        let mut unknown: Vec<&String> = self
            .map
            .keys()
            .filter(|k| !self.seen.contains(&k.as_str()))
            .collect();
        unknown.sort();
        for k in unknown {
            let path = self.key_path(k);
            if parser.strict {
                return Err(Error::Model(format!("unknown key `{path}`")));
            }
            parser
                .warnings
                .push(format!("unknown key `{path}` ignored"));
        }
        Ok(())
    }
}

fn unknown_variant(path: &str, got: &str, allowed: &[&str]) -> Error {
    Error::Model(format!(
        "`{path}` = \"{got}\" is not one of {}",
        allowed.join(", ")
    ))
}

impl Parser {
    fn model(&mut self, v: &Value) -> Result<ModelSpec> {
        let mut root = Obj::new("", v)?;
        let kind = root.string("model_type")?;
        let components = root.number("components")?;
        root.optional("name");
        root.optional("description");
        if !(components.fract() == 0.0 && components >= 1.0) {
            return Err(Error::Model(format!(
                "`components` must be a positive integer, got {components}"
            )));
        }
        if components > MAX_COMPONENTS as f64 {
            return Err(Error::Capacity(format!(
                "`components` = {components} exceeds the supported maximum {MAX_COMPONENTS}"
            )));
        }
        let n = components as usize;
        let spec = match kind {
            "factor" => ModelSpec::Factor(self.factor_model(&mut root, n)?),
            "min_decomposition" => {
                let jump = self.factor_model(&mut root, n)?;
                let continuous = self.continuous_part(&mut root, n)?;
                ModelSpec::MinDecomposition(at(
                    "continuous_part",
                    MinDecomposition::new(jump, continuous),
                )?)
            }
            "shot_noise" => ModelSpec::ShotNoise(self.shot_noise(&mut root, n)?),
            "compensator_table" => ModelSpec::CompensatorTable(self.table(&mut root, n)?),
            other => {
                return Err(unknown_variant(
                    "model_type",
                    other,
                    &[
                        "factor",
                        "shot_noise",
                        "min_decomposition",
                        "compensator_table",
                    ],
                ))
            }
        };
        root.finish(self)?;
        Ok(spec)
    }

    fn jump_law(&mut self, path: &str, v: &Value) -> Result<JumpLaw> {
        let mut o = Obj::new(path, v)?;
        let law = match o.string("law")? {
            "exponential" => JumpLaw::Exponential {
                rate: o.number("rate")?,
            },
            "gamma" => JumpLaw::Gamma {
                shape: o.number("shape")?,
                rate: o.number("rate")?,
            },
            "constant" => JumpLaw::Constant {
                size: o.number("size")?,
            },
            "empirical" => {
                let atoms = o.required("atoms")?;
                JumpLaw::Empirical {
                    atoms: pairs(&o.key_path("atoms"), atoms)?,
                }
            }
            other => {
                return Err(unknown_variant(
                    &o.key_path("law"),
                    other,
                    &["exponential", "gamma", "constant", "empirical"],
                ))
            }
        };
        o.finish(self)?;
        at(path, law.validate())?;
        Ok(law)
    }

    fn factor(&mut self, path: &str, v: &Value) -> Result<Factor> {
        let mut o = Obj::new(path, v)?;
        let factor = match o.string("type")? {
            "compound_poisson" => {
                let intensity = o.number("intensity")?;
                match (o.optional("jumps"), o.optional("marks")) {
                    (Some(j), None) => Factor::compound_poisson(intensity, self.jump_law(&o.key_path("jumps"), j)?),
                    (None, Some(m)) => {
                        let mp = o.key_path("marks");
                        let laws = as_array(&mp, m)?
                            .iter()
                            .enumerate()
                            .map(|(i, x)| self.jump_law(&format!("{mp}[{i}]"), x))
                            .collect::<Result<Vec<_>>>()?;
                        Factor::shared_clock(intensity, laws)
                    }
                    _ => {
                        return Err(Error::Model(format!(
                            "`{path}` needs exactly one of `jumps` (common jump law) or `marks` (one law per component)"
                        )))
                    }
                }
            }
            "gamma" => Factor::gamma(o.number("shape")?, o.number("rate")?),
            other => {
                return Err(unknown_variant(
                    &o.key_path("type"),
                    other,
                    &["compound_poisson", "gamma"],
                ))
            }
        };
        o.finish(self)?;
        Ok(factor)
    }

    fn deformation(&mut self, path: &str, v: &Value, n: usize) -> Result<TimeDeformation> {
        let mut o = Obj::new(path, v)?;
        let kind = match o.string("kind")? {
            "identity" => DeformationKind::Identity,
            "power" => DeformationKind::Power {
                exponent: o.number("exponent")?,
                scale: o.number("scale")?,
            },
            "piecewise_linear" => {
                let knots = o.required("knots")?;
                DeformationKind::PiecewiseLinear {
                    knots: pairs(&o.key_path("knots"), knots)?,
                }
            }
            other => {
                return Err(unknown_variant(
                    &o.key_path("kind"),
                    other,
                    &["identity", "power", "piecewise_linear"],
                ))
            }
        };
        let covariate_scales = match o.optional("covariate_scales") {
            Some(c) => numbers(&o.key_path("covariate_scales"), c)?,
            None => vec![1.0; n],
        };
        o.finish(self)?;
        let d = TimeDeformation {
            kind,
            covariate_scales,
        };
        at(path, d.validate(n))?;
        Ok(d)
    }

    fn factor_model(&mut self, root: &mut Obj<'_>, n: usize) -> Result<FactorModel> {
        let factors_v = root.required("factors")?;
        let factors = as_array("factors", factors_v)?
            .iter()
            .enumerate()
            .map(|(k, f)| self.factor(&format!("factors[{k}]"), f))
            .collect::<Result<Vec<_>>>()?;
        let loadings_v = root.required("loadings")?;
        let loadings = as_array("loadings", loadings_v)?
            .iter()
            .enumerate()
            .map(|(i, row)| numbers(&format!("loadings[{i}]"), row))
            .collect::<Result<Vec<_>>>()?;
        if loadings.len() != n {
            return Err(Error::Model(format!(
                "`loadings` has {} rows but `components` is {n}",
                loadings.len()
            )));
        }
        let deformation = match root.optional("deformation") {
            Some(d) => Some(self.deformation("deformation", d, n)?),
            None => None,
        };
        FactorModel::new(factors, loadings, deformation)
    }

    fn continuous_part(&mut self, root: &mut Obj<'_>, n: usize) -> Result<Vec<ContinuousHazard>> {
        let v = root.required("continuous_part")?;
        let items = as_array("continuous_part", v)?;
        if items.len() != n {
            return Err(Error::Model(format!(
                "`continuous_part` has {} entries but `components` is {n}",
                items.len()
            )));
        }
        items
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let path = format!("continuous_part[{i}]");
                let mut o = Obj::new(&path, x)?;
                let h = match o.string("type")? {
                    "zero" => ContinuousHazard::Zero,
                    "linear" => ContinuousHazard::Linear {
                        rate: o.number("rate")?,
                    },
                    "power" => ContinuousHazard::Power {
                        scale: o.number("scale")?,
                        exponent: o.number("exponent")?,
                    },
                    "piecewise_linear" => {
                        let knots = o.required("knots")?;
                        ContinuousHazard::PiecewiseLinear {
                            knots: pairs(&o.key_path("knots"), knots)?,
                        }
                    }
                    other => {
                        return Err(unknown_variant(
                            &o.key_path("type"),
                            other,
                            &["zero", "linear", "power", "piecewise_linear"],
                        ))
                    }
                };
                o.finish(self)?;
                h.validate().map_err(|e| match e {
                    Error::Model(m) | Error::Argument(m) => Error::Model(format!("`{path}`: {m}")),
                    other => other,
                })?;
                Ok(h)
            })
            .collect()
    }

    fn shot_noise(&mut self, root: &mut Obj<'_>, n: usize) -> Result<ShotNoiseModel> {
        let iv = root.required("intensity")?;
        let mut o = Obj::new("intensity", iv)?;
        let intensity = match o.string("type")? {
            "constant" => Intensity::Constant {
                rate: o.number("rate")?,
            },
            "piecewise_constant" => {
                let b = o.required("breakpoints")?;
                let r = o.required("rates")?;
                Intensity::PiecewiseConstant {
                    breakpoints: numbers("intensity.breakpoints", b)?,
                    rates: numbers("intensity.rates", r)?,
                }
            }
            other => {
                return Err(unknown_variant(
                    "intensity.type",
                    other,
                    &["constant", "piecewise_constant"],
                ))
            }
        };
        o.finish(self)?;
        at("intensity", intensity.validate())?;

        let mv = root.required("marks")?;
        let marks = self.jump_law("marks", mv)?;

        let kv = root.required("kernels")?;
        let items = as_array("kernels", kv)?;
        if items.len() != n {
            return Err(Error::Model(format!(
                "`kernels` has {} entries but `components` is {n}",
                items.len()
            )));
        }
        let kernels = items
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let path = format!("kernels[{i}]");
                let mut o = Obj::new(&path, x)?;
                let k = match o.string("type")? {
                    "constant" => Kernel::Constant {
                        level: o.number("level")?,
                    },
                    "exponential_decay" => Kernel::ExponentialDecay {
                        scale: o.number("scale")?,
                        decay: o.number("decay")?,
                    },
                    "linear_ramp" => Kernel::LinearRamp {
                        slope: o.number("slope")?,
                        cap: o.number("cap")?,
                        intercept: match o.optional("intercept") {
                            Some(v) => as_number(&o.key_path("intercept"), v)?,
                            None => 0.0,
                        },
                    },
                    other => {
                        return Err(unknown_variant(
                            &o.key_path("type"),
                            other,
                            &["constant", "exponential_decay", "linear_ramp"],
                        ))
                    }
                };
                o.finish(self)?;
                at(&path, k.validate())?;
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        ShotNoiseModel::new(intensity, marks, kernels)
    }

    fn table(&mut self, root: &mut Obj<'_>, n: usize) -> Result<CompensatorTable> {
        let v = root.required("rates")?;
        let map = v
            .as_object()
            .ok_or_else(|| type_error("rates", "an object", v))?;
        let mut rates = vec![f64::NAN; 1 << n];
        rates[0] = 0.0;
        for (key, value) in map {
            let path = format!("rates.{key}");
            let mask = parse_subset(key, n).map_err(|m| Error::Model(format!("`{path}`: {m}")))?;
            if !rates[mask.bits() as usize].is_nan() {
                return Err(Error::Model(format!("`{path}` duplicates subset {mask}")));
            }
            rates[mask.bits() as usize] = as_number(&path, value)?;
        }
        if let Some(m) = rates.iter().position(|r| r.is_nan()) {
            return Err(Error::Model(format!(
                "`rates` is missing subset {}",
                SubsetMask(m as u32)
            )));
        }
        at("rates", CompensatorTable::from_rates(n, rates))
    }
}

/// Parses a subset label such as `"[1,3]"` (1-based component indices).
pub fn parse_subset(label: &str, n: usize) -> std::result::Result<SubsetMask, String> {
    let inner = label
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("subset label {label:?} must look like \"[1,3]\""))?;
    let mut mask = SubsetMask::EMPTY;
    for part in inner.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .map_err(|_| format!("subset label {label:?} has a non-integer index"))?;
        if i == 0 || i > n {
            return Err(format!("index {i} in {label:?} outside 1..={n}"));
        }
        if mask.contains(i - 1) {
            return Err(format!("index {i} repeated in {label:?}"));
        }
        mask = mask.union(SubsetMask::singleton(i - 1));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHARED: &str = r#"{
        "model_type": "factor",
        "components": 2,
        "factors": [{"type": "compound_poisson", "intensity": 2.0,
                     "marks": [{"law": "exponential", "rate": 1.0}, {"law": "exponential", "rate": 1.0}]}],
        "loadings": [[1.0], [1.0]]
    }"#;

    #[test]
    fn parses_shared_driver() {
        let s = parse_spec(SHARED, true).unwrap();
        let ModelSpec::Factor(m) = &s.model else {
            panic!()
        };
        assert_eq!((m.n(), m.m()), (2, 1));
        assert!(s.warnings.is_empty());
        assert_eq!(s.hash.len(), 64);
    }

    #[test]
    fn unknown_key_named() {
        let text = SHARED.replace("\"intensity\": 2.0", "\"intensity\": 2.0, \"rho\": 1");
        let err = parse_spec(&text, true).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("factors[0].rho"), "{err}");
        let lenient = parse_spec(&text, false).unwrap();
        assert_eq!(lenient.warnings.len(), 1);
    }

    #[test]
    fn zero_loading_row_rejected() {
        let text = SHARED.replace("[[1.0], [1.0]]", "[[1.0], [0.0]]");
        assert_eq!(parse_spec(&text, true).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn hash_ignores_formatting_and_key_order() {
        let a = parse_spec(SHARED, true).unwrap().hash;
        let reordered = r#"{"loadings":[[1],[1e0]],"components":2,"model_type":"factor",
            "factors":[{"intensity":2,"type":"compound_poisson",
            "marks":[{"rate":1,"law":"exponential"},{"law":"exponential","rate":1.00}]}]}"#;
        assert_eq!(a, parse_spec(reordered, true).unwrap().hash);
        let changed = SHARED.replace("\"intensity\": 2.0", "\"intensity\": 2.5");
        assert_ne!(a, parse_spec(&changed, true).unwrap().hash);
    }

    #[test]
    fn subset_labels() {
        assert_eq!(parse_subset("[1,3]", 3).unwrap(), SubsetMask(0b101));
        assert!(parse_subset("[0]", 3).is_err());
        assert!(parse_subset("[1,1]", 3).is_err());
        assert!(parse_subset("1,2", 3).is_err());
    }

    #[test]
    fn table_requires_every_subset() {
        let text = r#"{"model_type": "compensator_table", "components": 2,
                       "rates": {"[1]": 1.0, "[2]": 1.0}}"#;
        let err = parse_spec(text, true).unwrap_err();
        assert!(err.to_string().contains("[1,2]"), "{err}");
    }
}
