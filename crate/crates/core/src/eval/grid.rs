use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) => usize::try_from(*i).ok(),
            ParamValue::Float(f) if f.fract() == 0.0 && *f >= 0.0 => Some(*f as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// One hyperparameter assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet(pub BTreeMap<String, ParamValue>);

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }
}

impl std::fmt::Display for ParamSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

/// Named axes whose Cartesian product is searched in order, last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamGrid {
    pub axes: Vec<GridAxis>,
}

impl HyperparamGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        let grid = HyperparamGrid { axes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn single(name: &str, values: Vec<ParamValue>) -> Result<Self> {
        HyperparamGrid::new(vec![GridAxis {
            name: name.to_string(),
            values,
        }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Argument("grid has no axes".into()));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if a.values.is_empty() {
                return Err(Error::Argument(format!("grid axis {:?} is empty", a.name)));
            }
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Argument(format!("grid axis {:?} repeated", a.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn combinations(&self) -> Vec<ParamSet> {
        let mut out = vec![ParamSet::default()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|base| {
                    axis.values.iter().map(move |v| {
                        let mut p = base.clone();
                        p.0.insert(axis.name.clone(), v.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Seeded random search: `count` distinct assignments drawn uniformly
    /// without replacement, returned in grid order. The whole grid when
    /// `count` is at least its size.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<ParamSet> {
        let all = self.combinations();
        if count >= all.len() {
            return all;
        }
        let mut picked = Rng::new(seed).permutation(all.len());
        picked.truncate(count);
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    }
}
