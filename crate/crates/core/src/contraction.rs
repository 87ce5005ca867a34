//! Self-mappings and the four contraction schemes.
//!
//! Banach, Kannan and Reich constants are fitted as the supremum of the
//! scheme's ratio over all ordered pairs of distinct carrier points. The
//! rational (Fisher-type) scheme has two constants and is checked against
//! supplied values, with an optional coarse grid search.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{ser_opt_sig15, ser_sig15, NumOrStr, POINT_TOL};
use crate::space::{Point, Space};

/// Closed registry of formula mappings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Registered {
    /// `x -> sqrt(x)` on `[lo, hi]`, `c` elsewhere.
    SqrtClamped {
        lo: f64,
        hi: f64,
        c: NumOrStr,
    },
    Const {
        c: NumOrStr,
    },
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Table { entries: Vec<(NumOrStr, NumOrStr)> },
    Registered(Registered),
}

impl MapSpec {
    pub fn identity() -> Self {
        MapSpec::Registered(Registered::Identity)
    }

    pub fn constant(c: impl Into<NumOrStr>) -> Self {
        MapSpec::Registered(Registered::Const { c: c.into() })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("mapping: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// A mapping bound to a space: table keys resolved to carrier indices.
#[derive(Debug, Clone)]
pub struct Map {
    spec: MapSpec,
    table: Vec<Option<Point>>,
}

/// Resolves an image literal: carrier point if present, adjoined numeric point otherwise.
fn image_point(space: &Space, lit: &NumOrStr) -> Result<Point> {
    if let Some(i) = space.find(lit) {
        return Ok(space.point(i).clone());
    }
    match lit.value() {
        Some(v) => Ok(space.resolve_value(v)),
        None => Err(Error::UnknownPoint(lit.label())),
    }
}

impl Map {
    pub fn new(space: &Space, spec: MapSpec) -> Result<Self> {
        let mut table = vec![None; space.len()];
        match &spec {
            MapSpec::Table { entries } => {
                for (x, tx) in entries {
                    let i = space
                        .find(x)
                        .ok_or_else(|| Error::UnknownPoint(x.label()))?;
                    let img = image_point(space, tx)?;
                    if let Some(prev) = &table[i] {
                        if !img.same_as(prev) {
                            return Err(Error::BadMapping(format!(
                                "two images for `{}`",
                                x.label()
                            )));
                        }
                    }
                    table[i] = Some(img);
                }
            }
            MapSpec::Registered(Registered::SqrtClamped { lo, hi, c }) => {
                if !(lo <= hi) || *lo < 0.0 {
                    return Err(Error::BadMapping("sqrt_clamped needs 0 <= lo <= hi".into()));
                }
                image_point(space, c)?;
            }
            MapSpec::Registered(Registered::Const { c }) => {
                image_point(space, c)?;
            }
            MapSpec::Registered(Registered::Identity) => {}
        }
        Ok(Map { spec, table })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    /// `T(x)`; numeric images that coincide with a carrier point resolve to it,
    /// others are adjoined at their exact value.
    pub fn apply(&self, space: &Space, x: &Point) -> Result<Point> {
        match &self.spec {
            MapSpec::Table { .. } => space
                .locate(x)
                .and_then(|i| self.table[i].clone())
                .ok_or_else(|| Error::MissingImage(x.label.clone())),
            MapSpec::Registered(Registered::Identity) => Ok(x.clone()),
            MapSpec::Registered(Registered::Const { c }) => image_point(space, c),
            MapSpec::Registered(Registered::SqrtClamped { lo, hi, c }) => match x.value {
                Some(v) if v >= lo - POINT_TOL && v <= hi + POINT_TOL => {
                    Ok(space.resolve_value(v.max(0.0).sqrt()))
                }
                _ => image_point(space, c),
            },
        }
    }
}

/// `T(x)` for a single point.
pub fn apply(space: &Space, spec: &MapSpec, x: &Point) -> Result<Point> {
    Map::new(space, spec.clone())?.apply(space, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Banach,
    Kannan,
    Reich,
    Fisher,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Banach => "banach",
            Scheme::Kannan => "kannan",
            Scheme::Reich => "reich",
            Scheme::Fisher => "fisher",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "banach" => Ok(Scheme::Banach),
            "kannan" => Ok(Scheme::Kannan),
            "reich" => Ok(Scheme::Reich),
            "fisher" => Ok(Scheme::Fisher),
            _ => Err(Error::Parse(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Numerator of the rational term: `d(x,Tx) d(y,Ty)` or `d(x,Tx) + d(y,Ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherVariant {
    #[default]
    Product,
    Sum,
}

impl FromStr for FisherVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "product" => Ok(FisherVariant::Product),
            "sum" => Ok(FisherVariant::Sum),
            _ => Err(Error::Parse(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Constants {
    Banach {
        #[serde(serialize_with = "ser_sig15")]
        k: f64,
    },
    Kannan {
        #[serde(serialize_with = "ser_sig15")]
        k: f64,
    },
    Reich {
        #[serde(serialize_with = "ser_sig15")]
        lambda: f64,
    },
    Fisher {
        #[serde(serialize_with = "ser_sig15")]
        lambda: f64,
        #[serde(serialize_with = "ser_sig15")]
        beta: f64,
        variant: FisherVariant,
    },
}

impl Constants {
    pub fn scheme(&self) -> Scheme {
        match self {
            Constants::Banach { .. } => Scheme::Banach,
            Constants::Kannan { .. } => Scheme::Kannan,
            Constants::Reich { .. } => Scheme::Reich,
            Constants::Fisher { .. } => Scheme::Fisher,
        }
    }

    /// Whether the constants lie in the scheme's admissible range.
    pub fn in_range(&self) -> bool {
        match *self {
            Constants::Banach { k } => (0.0..1.0).contains(&k),
            Constants::Kannan { k } => (0.0..0.5).contains(&k),
            Constants::Reich { lambda } => (0.0..1.0 / 3.0).contains(&lambda),
            Constants::Fisher { lambda, beta, .. } => {
                lambda > 0.0 && beta > 0.0 && lambda + beta < 1.0
            }
        }
    }

    /// Geometric rate of the step distances implied by the constants:
    /// `k`, `k/(1-k)`, `2λ/(1-λ)`, `λ/(1-β)`.
    pub fn decay_rate(&self) -> f64 {
        match *self {
            Constants::Banach { k } => k,
            Constants::Kannan { k } => k / (1.0 - k),
            Constants::Reich { lambda } => 2.0 * lambda / (1.0 - lambda),
            Constants::Fisher { lambda, beta, .. } => lambda / (1.0 - beta),
        }
    }

    /// The constant the alpha-ratio condition is measured against
    /// (`k`, `k`, `λ`, `λ + β`); the threshold is its inverse square.
    pub fn condition_constant(&self) -> f64 {
        match *self {
            Constants::Banach { k } | Constants::Kannan { k } => k,
            Constants::Reich { lambda } => lambda,
            Constants::Fisher { lambda, beta, .. } => lambda + beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub scheme: Scheme,
    pub constants: Constants,
    /// Sup of the scheme ratio; for the rational scheme, sup of lhs/rhs.
    #[serde(serialize_with = "ser_sig15")]
    pub worst_ratio: f64,
    pub worst_pair: Option<(String, String)>,
    #[serde(skip)]
    pub worst_indices: Option<(usize, usize)>,
    pub admissible: bool,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub decay_rate: Option<f64>,
    pub checked_pairs: u64,
    /// Pairs skipped (banach, zero image distance) or forced infeasible
    /// (kannan, zero denominator with positive numerator).
    pub degenerate_pairs: u64,
}

/// Per-point images and self-distances, computed once per analysis.
struct Images {
    img: Vec<Point>,
    self_dist: Vec<f64>,
}

impl Images {
    fn new(space: &Space, map: &Map) -> Result<Self> {
        let img = space
            .points()
            .iter()
            .map(|p| map.apply(space, p))
            .collect::<Result<Vec<_>>>()?;
        let self_dist = space
            .points()
            .iter()
            .zip(&img)
            .map(|(p, t)| space.distance(p, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Images { img, self_dist })
    }

    fn image_dist(&self, space: &Space, i: usize, j: usize) -> Result<f64> {
        space.distance(&self.img[i], &self.img[j])
    }
}

/// `(numerator, denominator)` of the scheme ratio at ordered pair `(i, j)`.
/// For the rational scheme the denominator is the bound itself.
fn ratio_parts(
    space: &Space,
    im: &Images,
    c: &Constants,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    let num = im.image_dist(space, i, j)?;
    let d = space.d(i, j);
    let (si, sj) = (im.self_dist[i], im.self_dist[j]);
    let den = match *c {
        Constants::Banach { .. } => d,
        Constants::Kannan { .. } => si + sj,
        Constants::Reich { .. } => d + si + sj,
        Constants::Fisher {
            lambda,
            beta,
            variant,
        } => {
            let rational = match variant {
                FisherVariant::Product => si * sj,
                FisherVariant::Sum => si + sj,
            };
            lambda * d + beta * rational / (1.0 + d)
        }
    };
    Ok((num, den))
}

/// Scans all ordered pairs; ties keep the lexicographically first pair.
fn scan(space: &Space, map: &Map, c: Constants, tol: f64) -> Result<ContractionCertificate> {
    let im = Images::new(space, map)?;
    let n = space.len();
    let mut worst = 0.0f64;
    let mut worst_at = None;
    let mut checked = 0u64;
    let mut degenerate = 0u64;
    let mut fisher_violation = false;

    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (num, den) = ratio_parts(space, &im, &c, i, j)?;
            checked += 1;
            let ratio = match c {
                Constants::Banach { .. } if num <= tol => {
                    degenerate += 1;
                    continue;
                }
                Constants::Kannan { .. } | Constants::Reich { .. } if den <= tol => {
                    if num <= tol {
                        continue;
                    }
                    degenerate += 1;
                    f64::INFINITY
                }
                Constants::Fisher { .. } => {
                    if num - den > tol {
                        fisher_violation = true;
                    }
                    if den > 0.0 {
                        num / den
                    } else if num > tol {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                }
                _ => num / den,
            };
            if ratio > worst {
                worst = ratio;
                worst_at = Some((i, j));
            }
        }
    }

    let scheme = c.scheme();
    let constants = match c {
        Constants::Banach { .. } => Constants::Banach { k: worst },
        Constants::Kannan { .. } => Constants::Kannan { k: worst },
        Constants::Reich { .. } => Constants::Reich { lambda: worst },
        fisher => fisher,
    };
    let admissible = match scheme {
        Scheme::Banach => worst < 1.0,
        Scheme::Kannan => worst < 0.5,
        Scheme::Reich => worst < 1.0 / 3.0,
        Scheme::Fisher => !fisher_violation && constants.in_range(),
    };
    Ok(ContractionCertificate {
        scheme,
        constants,
        worst_ratio: worst,
        worst_pair: worst_at
            .map(|(i, j)| (space.point(i).label.clone(), space.point(j).label.clone())),
        worst_indices: worst_at,
        admissible,
        decay_rate: admissible.then(|| constants.decay_rate()),
        checked_pairs: checked,
        degenerate_pairs: degenerate,
    })
}

/// Fits `k` in `d(Tx,Ty) <= k d(x,y)` over pairs with `d(Tx,Ty) > tol`.
pub fn fit_banach(space: &Space, map: &Map, tol: f64) -> Result<ContractionCertificate> {
    scan(space, map, Constants::Banach { k: 0.0 }, tol)
}

/// Fits `k` in `d(Tx,Ty) <= k [d(x,Tx) + d(y,Ty)]`.
pub fn fit_kannan(space: &Space, map: &Map, tol: f64) -> Result<ContractionCertificate> {
    scan(space, map, Constants::Kannan { k: 0.0 }, tol)
}

/// Fits `λ` in `d(Tx,Ty) <= λ [d(x,y) + d(x,Tx) + d(y,Ty)]`.
pub fn fit_reich(space: &Space, map: &Map, tol: f64) -> Result<ContractionCertificate> {
    scan(space, map, Constants::Reich { lambda: 0.0 }, tol)
}

/// Checks `d(Tx,Ty) <= λ d(x,y) + β N / (1 + d(x,y))` for all pairs, where
/// `N` is the product (default) or sum of `d(x,Tx)` and `d(y,Ty)`.
pub fn check_fisher(
    space: &Space,
    map: &Map,
    lambda: f64,
    beta: f64,
    variant: FisherVariant,
    tol: f64,
) -> Result<ContractionCertificate> {
    let c = Constants::Fisher {
        lambda,
        beta,
        variant,
    };
    if !c.in_range() || lambda >= 1.0 || beta >= 1.0 {
        return Err(Error::BadConstants(format!(
            "need λ, β in (0,1) with λ + β < 1, got λ = {lambda}, β = {beta}"
        )));
    }
    scan(space, map, c, tol)
}

/// Grid search over `λ, β ∈ {0.01, ..., 0.99}`, `λ + β < 1`, returning the
/// admissible pair with the smallest decay rate `λ/(1-β)`.
pub fn search_fisher(
    space: &Space,
    map: &Map,
    variant: FisherVariant,
    tol: f64,
) -> Result<Option<ContractionCertificate>> {
    let mut best: Option<ContractionCertificate> = None;
    for i in 1..100u32 {
        for j in 1..(100 - i) {
            let (lambda, beta) = (i as f64 / 100.0, j as f64 / 100.0);
            let rate = lambda / (1.0 - beta);
            if best
                .as_ref()
                .is_some_and(|b| b.decay_rate.unwrap_or(f64::INFINITY) <= rate)
            {
                continue;
            }
            let cert = check_fisher(space, map, lambda, beta, variant, tol)?;
            if cert.admissible {
                best = Some(cert);
            }
        }
    }
    Ok(best)
}

/// Dispatches to the fitting routine of `scheme`; the rational scheme needs
/// explicit constants and is run through [`check_fisher`] instead.
pub fn fit(space: &Space, map: &Map, scheme: Scheme, tol: f64) -> Result<ContractionCertificate> {
    match scheme {
        Scheme::Banach => fit_banach(space, map, tol),
        Scheme::Kannan => fit_kannan(space, map, tol),
        Scheme::Reich => fit_reich(space, map, tol),
        Scheme::Fisher => Err(Error::BadConstants(
            "the rational scheme needs λ and β".into(),
        )),
    }
}

/// Ordered pairs where the bound of `constants` fails by more than `tol`.
///
/// Banach pairs with `d(Tx,Ty) <= tol` are skipped as in fitting.
pub fn bound_violations(
    space: &Space,
    map: &Map,
    constants: Constants,
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    let im = Images::new(space, map)?;
    let n = space.len();
    let scale = match constants {
        Constants::Banach { k } | Constants::Kannan { k } => k,
        Constants::Reich { lambda } => lambda,
        Constants::Fisher { .. } => 1.0,
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (num, den) = ratio_parts(space, &im, &constants, i, j)?;
            if matches!(constants, Constants::Banach { .. }) && num <= crate::num::DEFAULT_TOL {
                continue;
            }
            if num - scale * den > tol {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}
