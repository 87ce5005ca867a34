//! Point carriers, distance and control functions.
//!
//! A [`SpaceDef`] is the declarative description (what a space file holds).
//! [`Space::new`] materializes the carrier, resolves every distance and
//! control value on it, and rejects definitions that break the structural
//! invariants (unresolvable pairs, zero distances between distinct points,
//! control values below one).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{fmt_num, NumOrStr, POINT_TOL};

/// An element of the carrier. Numeric points carry their value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub label: String,
    pub value: Option<f64>,
}

impl Point {
    pub fn numeric(label: impl Into<String>, value: f64) -> Self {
        Point {
            label: label.into(),
            value: Some(value),
        }
    }

    /// A numeric point labeled by its 15-digit decimal text.
    pub fn from_value(value: f64) -> Self {
        Point {
            label: fmt_num(value),
            value: Some(value),
        }
    }

    pub fn symbol(label: impl Into<String>) -> Self {
        Point {
            label: label.into(),
            value: None,
        }
    }

    /// Point identity: equal numeric values (within [`POINT_TOL`]) or, for
    /// non-numeric points, equal labels.
    pub fn same_as(&self, other: &Point) -> bool {
        match (self.value, other.value) {
            (Some(a), Some(b)) => (a - b).abs() <= POINT_TOL,
            (None, None) => self.label == other.label,
            _ => false,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub grid_n: usize,
}

impl Interval {
    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || self.grid_n < 2 || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::BadInterval {
                lo: self.lo,
                hi: self.hi,
                grid_n: self.grid_n,
            });
        }
        Ok(())
    }

    /// Uniform grid `lo + j (hi - lo) / (grid_n - 1)`, endpoints exact.
    pub fn grid(&self) -> Vec<f64> {
        let (span, parts) = (self.hi - self.lo, (self.grid_n - 1) as f64);
        (0..self.grid_n)
            .map(|j| {
                if j + 1 == self.grid_n {
                    self.hi
                } else {
                    self.lo + j as f64 * span / parts
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    #[serde(default)]
    pub finite: Vec<NumOrStr>,
    #[serde(default)]
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    SquaredDifference,
    AbsDifference,
}

impl Fallback {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Fallback::SquaredDifference => (x - y) * (x - y),
            Fallback::AbsDifference => (x - y).abs(),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSpec {
    #[serde(default)]
    pub entries: Vec<(NumOrStr, NumOrStr, NumOrStr)>,
    #[serde(default)]
    pub fallback: Option<Fallback>,
    #[serde(default = "default_true")]
    pub symmetric_closure: bool,
}

impl Default for DistanceSpec {
    fn default() -> Self {
        DistanceSpec {
            entries: Vec::new(),
            fallback: None,
            symmetric_closure: true,
        }
    }
}

/// The control function alpha (also used as theta for the extended
/// rectangular b-metric check).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Table {
        entries: Vec<(NumOrStr, NumOrStr, NumOrStr)>,
        #[serde(default)]
        symmetric: bool,
    },
    Const {
        s: f64,
    },
    Max,
    MaxPlus {
        c: f64,
    },
    SumPlus {
        c: f64,
    },
    /// `max{x,y} + c` when both arguments lie in `region`, `else_const` otherwise.
    PiecewiseMaxPlus {
        c: f64,
        region: (f64, f64),
        else_const: f64,
    },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Const { s: 1.0 }
    }
}

impl ControlSpec {
    /// Closed-form evaluation on point values. `None` for table kinds or when
    /// a formula needs a value the points do not carry.
    fn formula(&self, x: &Point, y: &Point) -> Option<f64> {
        match *self {
            ControlSpec::Table { .. } => None,
            ControlSpec::Const { s } => Some(s),
            ControlSpec::Max => Some(x.value?.max(y.value?)),
            ControlSpec::MaxPlus { c } => Some(x.value?.max(y.value?) + c),
            ControlSpec::SumPlus { c } => Some(x.value? + y.value? + c),
            ControlSpec::PiecewiseMaxPlus {
                c,
                region: (lo, hi),
                else_const,
            } => {
                let inside = |p: &Point| {
                    p.value
                        .map(|v| v >= lo - POINT_TOL && v <= hi + POINT_TOL)
                        .unwrap_or(false)
                };
                if inside(x) && inside(y) {
                    Some(x.value?.max(y.value?) + c)
                } else {
                    Some(else_const)
                }
            }
        }
    }

    /// The constant value when the control is `const(s)`.
    pub fn constant(&self) -> Option<f64> {
        match *self {
            ControlSpec::Const { s } => Some(s),
            _ => None,
        }
    }
}

/// Declarative space description: carrier, distance and control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDef {
    pub carrier: Carrier,
    #[serde(default)]
    pub distance: DistanceSpec,
    #[serde(default)]
    pub alpha: ControlSpec,
}

impl SpaceDef {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("space definition: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Replaces `grid_n` on every interval.
    pub fn with_grid(mut self, grid_n: usize) -> Self {
        for iv in &mut self.carrier.intervals {
            iv.grid_n = grid_n;
        }
        self
    }
}

/// Materializes the carrier: finite points in declaration order, then grid
/// points ascending, with numerically coincident points merged.
pub fn materialize(def: &SpaceDef) -> Result<Vec<Point>> {
    let mut points: Vec<Point> = Vec::new();

    for lit in &def.carrier.finite {
        let p = Point {
            label: lit.label(),
            value: lit.value(),
        };
        if let Some(q) = points.iter().find(|q| q.label == p.label) {
            if q.same_as(&p) {
                continue;
            }
            return Err(Error::ConflictingLabel { label: p.label });
        }
        if let Some(q) = points.iter().find(|q| q.value.is_some() && q.same_as(&p)) {
            return Err(Error::ConflictingValue {
                a: q.label.clone(),
                b: p.label,
            });
        }
        points.push(p);
    }

    let mut grid = Vec::new();
    for iv in &def.carrier.intervals {
        iv.validate()?;
        grid.extend(iv.grid());
    }
    grid.sort_by(f64::total_cmp);
    for v in grid {
        let p = Point::from_value(v);
        if points.iter().any(|q| q.same_as(&p)) {
            continue;
        }
        if points.iter().any(|q| q.label == p.label) {
            return Err(Error::ConflictingLabel { label: p.label });
        }
        points.push(p);
    }
    Ok(points)
}

/// A materialized, validated space.
///
/// Immutable after construction. Distances and control values on the
/// carrier are precomputed; points outside the carrier (images adjoined by
/// an orbit) are evaluated through the fallback formula and control formula.
#[derive(Debug, Clone)]
pub struct Space {
    def: SpaceDef,
    points: Vec<Point>,
    by_label: HashMap<String, usize>,
    dist: Vec<f64>,
    alpha: Vec<Option<f64>>,
}

impl Space {
    pub fn new(def: SpaceDef) -> Result<Self> {
        let points = materialize(&def)?;
        let n = points.len();
        let by_label = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.label.clone(), i))
            .collect();
        let mut space = Space {
            def,
            points,
            by_label,
            dist: vec![0.0; n * n],
            alpha: vec![None; n * n],
        };

        let entries = space.distance_entries()?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = match entries.get(&(i, j)) {
                    Some(&d) => d,
                    None => space.formula_distance(&space.points[i], &space.points[j])?,
                };
                if d <= 0.0 {
                    return Err(Error::BadDistanceEntry {
                        x: space.points[i].label.clone(),
                        y: space.points[j].label.clone(),
                        reason: "distinct points at zero distance".into(),
                    });
                }
                space.dist[i * n + j] = d;
            }
        }

        let table = space.control_entries()?;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (&space.points[i], &space.points[j]);
                let a = match table.get(&(i, j)) {
                    Some(&a) => Some(a),
                    None => space.def.alpha.formula(x, y),
                };
                match a {
                    Some(a) if !(a >= 1.0) => {
                        return Err(Error::ControlBelowOne {
                            x: x.label.clone(),
                            y: y.label.clone(),
                            value: a,
                        })
                    }
                    None if i != j => {
                        return Err(Error::MissingControl {
                            x: x.label.clone(),
                            y: y.label.clone(),
                        })
                    }
                    _ => {}
                }
                space.alpha[i * n + j] = a;
            }
        }
        Ok(space)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(SpaceDef::from_path(path)?)
    }

    pub fn def(&self) -> &SpaceDef {
        &self.def
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when the carrier includes sampled intervals.
    pub fn is_sampled(&self) -> bool {
        !self.def.carrier.intervals.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Carrier index of a point, by value for numeric points and by label otherwise.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        match p.value {
            Some(_) => self.points.iter().position(|q| q.same_as(p)),
            None => self.by_label.get(&p.label).copied(),
        }
    }

    /// Resolves a literal (label, number or fraction) to a carrier point.
    pub fn find(&self, key: &NumOrStr) -> Option<usize> {
        if let Some(&i) = self.by_label.get(&key.label()) {
            return Some(i);
        }
        let v = key.value()?;
        self.points
            .iter()
            .position(|q| q.value.is_some_and(|w| (w - v).abs() <= POINT_TOL))
    }

    pub fn find_label(&self, text: &str) -> Result<usize> {
        self.find(&NumOrStr::Str(text.to_string()))
            .ok_or_else(|| Error::UnknownPoint(text.to_string()))
    }

    /// The carrier point at `value`, or a new point adjoined at exactly `value`.
    pub fn resolve_value(&self, value: f64) -> Point {
        let p = Point::from_value(value);
        match self.locate(&p) {
            Some(i) => self.points[i].clone(),
            None => p,
        }
    }

    /// Distance between carrier indices.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.points.len() + j]
    }

    /// Control value between carrier indices.
    pub fn a(&self, i: usize, j: usize) -> Result<f64> {
        self.alpha[i * self.points.len() + j].ok_or_else(|| Error::MissingControl {
            x: self.points[i].label.clone(),
            y: self.points[j].label.clone(),
        })
    }

    /// Distance between arbitrary points (carrier or adjoined).
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        if x.same_as(y) {
            return Ok(0.0);
        }
        match (self.locate(x), self.locate(y)) {
            (Some(i), Some(j)) => Ok(self.d(i, j)),
            _ => self.formula_distance(x, y),
        }
    }

    /// Control value between arbitrary points (carrier or adjoined).
    pub fn control(&self, x: &Point, y: &Point) -> Result<f64> {
        if let (Some(i), Some(j)) = (self.locate(x), self.locate(y)) {
            return self.a(i, j);
        }
        let a = self
            .def
            .alpha
            .formula(x, y)
            .ok_or_else(|| Error::MissingControl {
                x: x.label.clone(),
                y: y.label.clone(),
            })?;
        if !(a >= 1.0) {
            return Err(Error::ControlBelowOne {
                x: x.label.clone(),
                y: y.label.clone(),
                value: a,
            });
        }
        Ok(a)
    }

    fn formula_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        match (self.def.distance.fallback, x.value, y.value) {
            (Some(f), Some(a), Some(b)) => Ok(f.eval(a, b)),
            _ => Err(Error::UnresolvableDistance {
                x: x.label.clone(),
                y: y.label.clone(),
            }),
        }
    }

    fn resolve_key(&self, key: &NumOrStr) -> Result<usize> {
        self.find(key)
            .ok_or_else(|| Error::UnknownPoint(key.label()))
    }

    fn distance_entries(&self) -> Result<HashMap<(usize, usize), f64>> {
        let spec = &self.def.distance;
        let mut out = HashMap::new();
        for (a, b, d) in &spec.entries {
            let bad = |reason: &str| Error::BadDistanceEntry {
                x: a.label(),
                y: b.label(),
                reason: reason.into(),
            };
            let i = self.resolve_key(a)?;
            let j = self.resolve_key(b)?;
            let d = d.number()?;
            if i == j {
                return Err(bad("entry for a point with itself"));
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(bad("distance must be positive and finite"));
            }
            let mut keys = vec![(i, j)];
            if spec.symmetric_closure {
                keys.push((j, i));
            }
            for k in keys {
                if let Some(prev) = out.insert(k, d) {
                    if prev != d {
                        return Err(bad("conflicting duplicate entry"));
                    }
                }
            }
        }
        Ok(out)
    }

    fn control_entries(&self) -> Result<HashMap<(usize, usize), f64>> {
        let mut out = HashMap::new();
        if let ControlSpec::Table { entries, symmetric } = &self.def.alpha {
            for (a, b, v) in entries {
                let i = self.resolve_key(a)?;
                let j = self.resolve_key(b)?;
                let v = v.number()?;
                let mut keys = vec![(i, j)];
                if *symmetric {
                    keys.push((j, i));
                }
                for k in keys {
                    if let Some(prev) = out.insert(k, v) {
                        if prev != v {
                            return Err(Error::Parse(format!(
                                "conflicting control entries for ({}, {})",
                                a.label(),
                                b.label()
                            )));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_point() -> SpaceDef {
        SpaceDef::from_json_str(
            r#"{
              "carrier": {"finite": [1, 2, 3, 4]},
              "distance": {"entries": [[1,2,"1/2"],[1,3,"1/9"],[1,4,"1/16"],
                                       [2,3,"1/12"],[2,4,"1/36"],[3,4,"1/49"]]},
              "alpha": {"kind": "max"}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn four_point_materializes_in_order() {
        let labels: Vec<_> = materialize(&four_point())
            .unwrap()
            .into_iter()
            .map(|p| p.label)
            .collect();
        assert_eq!(labels, ["1", "2", "3", "4"]);
    }

    #[test]
    fn grid_endpoint_merges_with_finite_point() {
        let def = SpaceDef {
            carrier: Carrier {
                finite: vec![1.0.into()],
                intervals: vec![Interval {
                    lo: 1.0,
                    hi: 2.0,
                    grid_n: 5,
                }],
            },
            distance: DistanceSpec {
                fallback: Some(Fallback::AbsDifference),
                ..Default::default()
            },
            alpha: ControlSpec::default(),
        };
        let vals: Vec<_> = materialize(&def)
            .unwrap()
            .iter()
            .map(|p| p.value.unwrap())
            .collect();
        assert_eq!(vals, [1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn lookups_and_evaluation() {
        let s = Space::new(four_point()).unwrap();
        let p = |l: &str| s.point(s.find_label(l).unwrap()).clone();
        assert_eq!(s.distance(&p("1"), &p("3")).unwrap(), 1.0 / 9.0);
        assert_eq!(s.distance(&p("3"), &p("1")).unwrap(), 1.0 / 9.0);
        assert_eq!(s.distance(&p("2"), &p("2")).unwrap(), 0.0);
        assert_eq!(s.control(&p("3"), &p("4")).unwrap(), 4.0);
        assert_eq!(s.control(&p("4"), &p("3")).unwrap(), 4.0);
    }

    #[test]
    fn const_control_everywhere() {
        let mut def = four_point();
        def.alpha = ControlSpec::Const { s: 2.5 };
        let s = Space::new(def).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s.a(i, j).unwrap(), 2.5);
            }
        }
    }

    #[test]
    fn piecewise_control_else_branch() {
        let def = SpaceDef::from_json_str(
            r#"{
              "carrier": {"finite": ["1/4", "1/5"], "intervals": [{"lo": 1, "hi": 2, "grid_n": 3}]},
              "distance": {"fallback": "squared_difference"},
              "alpha": {"kind": "piecewise_max_plus", "c": 2, "region": [1, 2], "else_const": 3}
            }"#,
        )
        .unwrap();
        let s = Space::new(def).unwrap();
        let p = |l: &str| s.point(s.find_label(l).unwrap()).clone();
        assert_eq!(s.control(&p("1/5"), &p("1/4")).unwrap(), 3.0);
        assert_eq!(s.control(&p("1.5"), &p("2")).unwrap(), 4.0);
        assert_eq!(s.control(&p("1/5"), &p("2")).unwrap(), 3.0);
        assert!((s.distance(&p("1.5"), &Point::from_value(1.2)).unwrap() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn structural_errors() {
        let mut def = four_point();
        def.distance.entries.pop();
        assert!(matches!(
            Space::new(def),
            Err(Error::UnresolvableDistance { .. })
        ));

        let mut def = four_point();
        def.distance
            .entries
            .push((1.0.into(), 1.0.into(), 0.5.into()));
        assert!(matches!(
            Space::new(def),
            Err(Error::BadDistanceEntry { .. })
        ));

        let mut def = four_point();
        def.distance
            .entries
            .push((2.0.into(), 1.0.into(), 0.7.into()));
        assert!(matches!(
            Space::new(def),
            Err(Error::BadDistanceEntry { .. })
        ));

        let mut def = four_point();
        def.alpha = ControlSpec::Const { s: 0.5 };
        assert!(matches!(
            Space::new(def),
            Err(Error::ControlBelowOne { .. })
        ));

        let mut def = four_point();
        def.carrier.finite.push("1/1".into());
        assert!(matches!(
            materialize(&def),
            Err(Error::ConflictingValue { .. })
        ));

        let mut def = four_point();
        def.carrier.intervals.push(Interval {
            lo: 2.0,
            hi: 1.0,
            grid_n: 3,
        });
        assert!(matches!(materialize(&def), Err(Error::BadInterval { .. })));
    }

    #[test]
    fn table_control_requires_off_diagonal_entries() {
        let mut def = four_point();
        def.alpha = ControlSpec::Table {
            entries: vec![(1.0.into(), 2.0.into(), 1.5.into())],
            symmetric: true,
        };
        assert!(matches!(Space::new(def), Err(Error::MissingControl { .. })));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            SpaceDef::from_json_str(r#"{"carrier": {"finite": [1]}, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
