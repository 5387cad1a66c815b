//! Parameter schemas and type-checked resolution of experiment configs.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Any,
    Positive,
    NonNegative,
    /// inclusive
    Range(f64, f64),
}

impl Bound {
    fn admits(self, x: f64) -> bool {
        match self {
            Bound::Any => x.is_finite(),
            Bound::Positive => x > 0.0 && x.is_finite(),
            Bound::NonNegative => x >= 0.0 && x.is_finite(),
            Bound::Range(lo, hi) => x >= lo && x <= hi,
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::Any => "finite".into(),
            Bound::Positive => "positive".into(),
            Bound::NonNegative => "nonnegative".into(),
            Bound::Range(lo, hi) => format!("in [{lo}, {hi}]"),
        }
    }

    fn schema(self, target: &mut Map<String, Value>) {
        match self {
            Bound::Any => {}
            Bound::Positive => {
                target.insert("exclusiveMinimum".into(), json!(0));
            }
            Bound::NonNegative => {
                target.insert("minimum".into(), json!(0));
            }
            Bound::Range(lo, hi) => {
                target.insert("minimum".into(), json!(lo));
                target.insert("maximum".into(), json!(hi));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Int(Bound),
    Float(Bound),
    Bool,
    Choice(&'static [&'static str]),
    IntList(Bound),
    FloatList(Bound),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Default {
    Required,
    Optional,
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(&'static str),
    Ints(&'static [i64]),
    Floats(&'static [f64]),
}

impl Default {
    fn value(self) -> Option<Value> {
        match self {
            Default::Required | Default::Optional => None,
            Default::Int(v) => Some(json!(v)),
            Default::Float(v) => Some(json!(v)),
            Default::Bool(v) => Some(json!(v)),
            Default::Text(v) => Some(json!(v)),
            Default::Ints(v) => Some(json!(v)),
            Default::Floats(v) => Some(json!(v)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Default,
    pub doc: &'static str,
}

pub const fn p(name: &'static str, kind: Kind, default: Default, doc: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default, doc }
}

impl ParamSpec {
    pub fn required(&self) -> bool {
        self.default == Default::Required
    }

    pub fn default_value(&self) -> Option<Value> {
        self.default.value()
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            Kind::Int(_) => "integer",
            Kind::Float(_) => "number",
            Kind::Bool => "boolean",
            Kind::Choice(_) => "string",
            Kind::IntList(_) => "integer[]",
            Kind::FloatList(_) => "number[]",
        }
    }

    /// JSON Schema fragment for this parameter.
    pub fn schema(&self) -> Value {
        let mut s = Map::new();
        s.insert("description".into(), json!(self.doc));
        match self.kind {
            Kind::Int(b) | Kind::Float(b) => {
                let t = if matches!(self.kind, Kind::Int(_)) { "integer" } else { "number" };
                s.insert("type".into(), json!(t));
                b.schema(&mut s);
            }
            Kind::Bool => {
                s.insert("type".into(), json!("boolean"));
            }
            Kind::Choice(options) => {
                s.insert("type".into(), json!("string"));
                s.insert("enum".into(), json!(options));
            }
            Kind::IntList(b) | Kind::FloatList(b) => {
                let t = if matches!(self.kind, Kind::IntList(_)) { "integer" } else { "number" };
                let mut items = Map::new();
                items.insert("type".into(), json!(t));
                b.schema(&mut items);
                s.insert("type".into(), json!("array"));
                s.insert("minItems".into(), json!(1));
                s.insert("items".into(), Value::Object(items));
            }
        }
        if let Some(d) = self.default_value() {
            s.insert("default".into(), d);
        }
        Value::Object(s)
    }

    fn check(&self, v: &Value) -> Result<Value, String> {
        let name = self.name;
        let int_of = |v: &Value, b: Bound| -> Result<i64, String> {
            let i = v
                .as_i64()
                .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 9e15).map(|f| f as i64))
                .ok_or_else(|| format!("parameter `{name}` must be an integer, got {v}"))?;
            if !b.admits(i as f64) {
                return Err(format!("parameter `{name}` must be {}, got {i}", b.describe()));
            }
            Ok(i)
        };
        let float_of = |v: &Value, b: Bound| -> Result<f64, String> {
            let f = v.as_f64().ok_or_else(|| format!("parameter `{name}` must be a number, got {v}"))?;
            if !b.admits(f) {
                return Err(format!("parameter `{name}` must be {}, got {f}", b.describe()));
            }
            Ok(f)
        };
        let list_of = |v: &Value| -> Result<Vec<Value>, String> {
            match v {
                Value::Array(a) if !a.is_empty() => Ok(a.clone()),
                Value::Array(_) => Err(format!("parameter `{name}` must not be empty")),
                Value::Number(_) => Ok(vec![v.clone()]),
                _ => Err(format!("parameter `{name}` must be a list of numbers, got {v}")),
            }
        };
        Ok(match self.kind {
            Kind::Int(b) => json!(int_of(v, b)?),
            Kind::Float(b) => json!(float_of(v, b)?),
            Kind::Bool => json!(v.as_bool().ok_or_else(|| format!("parameter `{name}` must be true or false, got {v}"))?),
            Kind::Choice(options) => {
                let s = v.as_str().ok_or_else(|| format!("parameter `{name}` must be a string, got {v}"))?;
                if !options.contains(&s) {
                    return Err(format!("parameter `{name}` must be one of {}, got `{s}`", options.join(", ")));
                }
                json!(s)
            }
            Kind::IntList(b) => json!(list_of(v)?.iter().map(|x| int_of(x, b)).collect::<Result<Vec<_>, _>>()?),
            Kind::FloatList(b) => json!(list_of(v)?.iter().map(|x| float_of(x, b)).collect::<Result<Vec<_>, _>>()?),
        })
    }
}

/// Fully resolved, type-checked parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: BTreeMap<String, Value>,
}

impl Params {
    pub fn resolve(specs: &[ParamSpec], given: &Map<String, Value>) -> Result<Self, RunError> {
        if let Some(unknown) = given.keys().find(|k| !specs.iter().any(|s| s.name == k.as_str())) {
            let known: Vec<&str> = specs.iter().map(|s| s.name).collect();
            return Err(RunError::Validation(format!(
                "unknown parameter `{unknown}`; accepted: {}",
                known.join(", ")
            )));
        }
        let mut values = BTreeMap::new();
        for spec in specs {
            match given.get(spec.name).filter(|v| !v.is_null()) {
                Some(v) => {
                    values.insert(spec.name.to_string(), spec.check(v).map_err(RunError::Validation)?);
                }
                None => match spec.default_value() {
                    Some(d) => {
                        values.insert(spec.name.to_string(), d);
                    }
                    None if spec.required() => {
                        return Err(RunError::Validation(format!("missing required parameter `{}`", spec.name)))
                    }
                    None => {}
                },
            }
        }
        Ok(Self { values })
    }

    pub fn as_map(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    fn get(&self, name: &str) -> &Value {
        self.values.get(name).unwrap_or_else(|| panic!("parameter `{name}` is not in the schema"))
    }

    pub fn has(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn f(&self, name: &str) -> f64 {
        self.get(name).as_f64().expect("checked number")
    }

    pub fn u(&self, name: &str) -> usize {
        self.get(name).as_i64().expect("checked integer") as usize
    }

    pub fn b(&self, name: &str) -> bool {
        self.get(name).as_bool().expect("checked bool")
    }

    pub fn s(&self, name: &str) -> &str {
        self.get(name).as_str().expect("checked string")
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        self.get(name).as_array().expect("checked list").iter().map(|v| v.as_f64().expect("checked number")).collect()
    }

    pub fn ints(&self, name: &str) -> Vec<usize> {
        self.get(name).as_array().expect("checked list").iter().map(|v| v.as_i64().expect("checked integer") as usize).collect()
    }
}

/// Parses the value half of `key=value`: JSON when it parses, a bare string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value), RunError> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| RunError::Usage(format!("override `{raw}` is not of the form key=value")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(RunError::Usage(format!("override `{raw}` has an empty key")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((key.to_string(), value))
}
