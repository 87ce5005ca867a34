//! Exhaustive verification of generalized-metric axiom systems with
//! violation witnesses.
//!
//! Every verifier scans its inequality family over the materialized carrier
//! in lexicographic order of carrier indices `(x, y, intermediates...)`.
//! The first instance with `lhs - rhs > tol` becomes the witness; the
//! instance with the smallest margin `rhs - lhs` is kept as `tightest`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::num::{fmt_num, ser_opt_sig15, ser_sig15};
use crate::space::Space;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxiomSystem {
    /// `d(x,y) <= d(x,z) + d(z,y)`
    Metric,
    /// `d(x,y) <= s [d(x,z) + d(z,y)]`
    BMetric(f64),
    /// `d(x,y) <= d(x,u) + d(u,v) + d(v,y)`
    Rectangular,
    /// `d(x,y) <= s [d(x,u) + d(u,v) + d(v,y)]`
    RectangularB(f64),
    /// `d(x,y) <= a(x,z) d(x,z) + a(z,y) d(z,y)`
    ControlledMetric,
    /// `d(x,y) <= a(x,y) [d(x,u) + d(u,v) + d(v,y)]`, the control read as theta
    ExtendedRectB,
    /// `d(x,y) <= a(x,u) d(x,u) + a(u,v) d(u,v) + a(v,y) d(v,y)`
    ControlledRect,
}

impl AxiomSystem {
    /// Number of intermediate points in one inequality instance.
    pub fn intermediates(self) -> usize {
        match self {
            AxiomSystem::Metric | AxiomSystem::BMetric(_) | AxiomSystem::ControlledMetric => 1,
            _ => 2,
        }
    }

    fn check_constant(self) -> Result<()> {
        match self {
            AxiomSystem::BMetric(s) | AxiomSystem::RectangularB(s) if !(s >= 1.0) => Err(
                Error::BadConstants(format!("b-metric constant s = {s} must be >= 1")),
            ),
            _ => Ok(()),
        }
    }

    /// Right-hand side at carrier indices `pts = [x, y, intermediates..]`.
    fn rhs(self, space: &Space, pts: &[usize]) -> Result<f64> {
        let d = |i: usize, j: usize| space.d(pts[i], pts[j]);
        let a = |i: usize, j: usize| space.a(pts[i], pts[j]);
        // index 0 = x, 1 = y, 2 = z or u, 3 = v
        Ok(match self {
            AxiomSystem::Metric => d(0, 2) + d(2, 1),
            AxiomSystem::BMetric(s) => s * (d(0, 2) + d(2, 1)),
            AxiomSystem::ControlledMetric => a(0, 2)? * d(0, 2) + a(2, 1)? * d(2, 1),
            AxiomSystem::Rectangular => d(0, 2) + d(2, 3) + d(3, 1),
            AxiomSystem::RectangularB(s) => s * (d(0, 2) + d(2, 3) + d(3, 1)),
            AxiomSystem::ExtendedRectB => a(0, 1)? * (d(0, 2) + d(2, 3) + d(3, 1)),
            AxiomSystem::ControlledRect => {
                a(0, 2)? * d(0, 2) + a(2, 3)? * d(2, 3) + a(3, 1)? * d(3, 1)
            }
        })
    }
}

impl fmt::Display for AxiomSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxiomSystem::Metric => f.write_str("metric"),
            AxiomSystem::BMetric(s) => write!(f, "b_metric({})", fmt_num(*s)),
            AxiomSystem::Rectangular => f.write_str("rectangular"),
            AxiomSystem::RectangularB(s) => write!(f, "rectangular_b({})", fmt_num(*s)),
            AxiomSystem::ControlledMetric => f.write_str("controlled_metric"),
            AxiomSystem::ExtendedRectB => f.write_str("extended_rect_b"),
            AxiomSystem::ControlledRect => f.write_str("controlled_rect"),
        }
    }
}

impl Serialize for AxiomSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for AxiomSystem {
    type Err = Error;

    /// Accepts `metric`, `b-metric:S`, `rectangular`, `rect-b:S`,
    /// `controlled-metric`, `extended-rect-b`, `controlled-rect`
    /// (underscores and dashes are interchangeable).
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let (name, arg) = match norm.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (norm.clone(), None),
        };
        let constant = || -> Result<f64> {
            arg.as_deref()
                .ok_or_else(|| {
                    Error::Parse(format!("system `{s}` needs a constant, e.g. `{name}:2`"))
                })
                .and_then(crate::num::parse_number)
        };
        match name.as_str() {
            "metric" => Ok(AxiomSystem::Metric),
            "b-metric" => Ok(AxiomSystem::BMetric(constant()?)),
            "rectangular" => Ok(AxiomSystem::Rectangular),
            "rect-b" | "rectangular-b" => Ok(AxiomSystem::RectangularB(constant()?)),
            "controlled-metric" => Ok(AxiomSystem::ControlledMetric),
            "extended-rect-b" => Ok(AxiomSystem::ExtendedRectB),
            "controlled-rect" => Ok(AxiomSystem::ControlledRect),
            _ => Err(Error::Parse(format!("unknown axiom system `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied,
    SatisfiedOnGrid,
    Violated,
    Vacuous,
}

impl Verdict {
    /// Not refuted: satisfied, satisfied on the grid, or vacuous.
    pub fn holds(self) -> bool {
        self != Verdict::Violated
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::SatisfiedOnGrid => "satisfied-on-grid",
            Verdict::Violated => "violated",
            Verdict::Vacuous => "vacuous",
        })
    }
}

/// Which clause an instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `d(x,y) = 0` iff `x = y`
    Identity,
    /// `d(x,y) = d(y,x)`
    Symmetry,
    /// The system's defining inequality.
    Inequality,
}

/// One evaluated inequality instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub clause: Clause,
    pub x: String,
    pub y: String,
    pub intermediates: Vec<String>,
    #[serde(serialize_with = "ser_sig15")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_sig15")]
    pub rhs: f64,
    /// `rhs - lhs`; negative means the inequality fails.
    #[serde(serialize_with = "ser_sig15")]
    pub margin: f64,
    /// Carrier indices `[x, y, intermediates..]`.
    #[serde(skip)]
    pub indices: Vec<usize>,
}

impl Witness {
    fn new(space: &Space, clause: Clause, pts: &[usize], lhs: f64, rhs: f64) -> Self {
        let label = |i: usize| space.point(i).label.clone();
        Witness {
            clause,
            x: label(pts[0]),
            y: label(pts[1]),
            intermediates: pts[2..].iter().map(|&i| label(i)).collect(),
            lhs,
            rhs,
            margin: rhs - lhs,
            indices: pts.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub system: AxiomSystem,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Instance attaining `min_margin`.
    pub tightest: Option<Witness>,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub min_margin: Option<f64>,
    pub checked_count: u64,
    pub tol: f64,
}

/// Options shared by all verifiers.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub tol: f64,
    /// Worker threads for the instance scan; results do not depend on it.
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: crate::num::DEFAULT_TOL,
            jobs: 1,
        }
    }
}

impl VerifyOptions {
    pub fn with_tol(tol: f64) -> Self {
        VerifyOptions { tol, jobs: 1 }
    }
}

/// Evaluates one instance of `system` at carrier indices `[x, y, intermediates..]`.
pub fn evaluate_instance(space: &Space, system: AxiomSystem, pts: &[usize]) -> Result<Witness> {
    if pts.len() != 2 + system.intermediates() {
        return Err(Error::Precondition(format!(
            "{system} instances take {} points, got {}",
            2 + system.intermediates(),
            pts.len()
        )));
    }
    if let Some(&bad) = pts.iter().find(|&&i| i >= space.len()) {
        return Err(Error::Precondition(format!(
            "point index {bad} outside the carrier"
        )));
    }
    let lhs = space.d(pts[0], pts[1]);
    let rhs = system.rhs(space, pts)?;
    Ok(Witness::new(space, Clause::Inequality, pts, lhs, rhs))
}

/// Like [`evaluate_instance`] with points named by label or numeric literal.
pub fn evaluate_labeled(space: &Space, system: AxiomSystem, labels: &[&str]) -> Result<Witness> {
    let pts = labels
        .iter()
        .map(|l| space.find_label(l))
        .collect::<Result<Vec<_>>>()?;
    evaluate_instance(space, system, &pts)
}

/// Swaps `x` and `y` and reverses the intermediates of an index tuple.
pub fn mirrored(pts: &[usize]) -> Vec<usize> {
    let mut out = vec![pts[1], pts[0]];
    out.extend(pts[2..].iter().rev());
    out
}

#[derive(Default)]
struct Partial {
    count: u64,
    first_violation: Option<Witness>,
    tightest: Option<Witness>,
}

impl Partial {
    fn absorb(&mut self, later: Partial) {
        self.count += later.count;
        if self.first_violation.is_none() {
            self.first_violation = later.first_violation;
        }
        match (&self.tightest, later.tightest) {
            (None, t) => self.tightest = t,
            (Some(a), Some(b)) if b.margin < a.margin => self.tightest = Some(b),
            _ => {}
        }
    }
}

fn scan_rows(
    space: &Space,
    system: AxiomSystem,
    tol: f64,
    xs: std::ops::Range<usize>,
) -> Result<Partial> {
    let n = space.len();
    let mut part = Partial::default();
    let mut pts = vec![0usize; 2 + system.intermediates()];
    for x in xs {
        for y in (0..n).filter(|&y| y != x) {
            pts[0] = x;
            pts[1] = y;
            let lhs = space.d(x, y);
            for u in (0..n).filter(|&u| u != x && u != y) {
                pts[2] = u;
                if system.intermediates() == 1 {
                    record(space, system, tol, &pts, lhs, &mut part)?;
                    continue;
                }
                for v in (0..n).filter(|&v| v != x && v != y && v != u) {
                    pts[3] = v;
                    record(space, system, tol, &pts, lhs, &mut part)?;
                }
            }
        }
    }
    Ok(part)
}

#[inline]
fn record(
    space: &Space,
    system: AxiomSystem,
    tol: f64,
    pts: &[usize],
    lhs: f64,
    part: &mut Partial,
) -> Result<()> {
    let rhs = system.rhs(space, pts)?;
    let margin = rhs - lhs;
    part.count += 1;
    if part.first_violation.is_none() && -margin > tol {
        part.first_violation = Some(Witness::new(space, Clause::Inequality, pts, lhs, rhs));
    }
    if part.tightest.as_ref().is_none_or(|t| margin < t.margin) {
        part.tightest = Some(Witness::new(space, Clause::Inequality, pts, lhs, rhs));
    }
    Ok(())
}

/// Checks d1 and d2 over all ordered pairs; returns the first failure.
fn check_basic(space: &Space, tol: f64) -> Option<Witness> {
    let n = space.len();
    for x in 0..n {
        if space.d(x, x) != 0.0 {
            return Some(Witness::new(
                space,
                Clause::Identity,
                &[x, x],
                space.d(x, x),
                0.0,
            ));
        }
        for y in (0..n).filter(|&y| y != x) {
            if space.d(x, y) <= 0.0 {
                return Some(Witness::new(
                    space,
                    Clause::Identity,
                    &[x, y],
                    0.0,
                    space.d(x, y),
                ));
            }
            let (a, b) = (space.d(x, y), space.d(y, x));
            if (a - b).abs() > tol {
                return Some(Witness::new(
                    space,
                    Clause::Symmetry,
                    &[x, y],
                    a.max(b),
                    a.min(b),
                ));
            }
        }
    }
    None
}

/// Runs the full check of `system`: d1 and d2, then the exhaustive inequality scan.
pub fn verify(space: &Space, system: AxiomSystem, opts: VerifyOptions) -> Result<AxiomReport> {
    system.check_constant()?;
    let n = space.len();
    let jobs = opts.jobs.max(1).min(n.max(1));

    let part = if jobs == 1 {
        scan_rows(space, system, opts.tol, 0..n)?
    } else {
        let chunk = n.div_ceil(jobs);
        let parts: Vec<Result<Partial>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|k| {
                    let rows = (k * chunk).min(n)..((k + 1) * chunk).min(n);
                    scope.spawn(move || scan_rows(space, system, opts.tol, rows))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("verifier worker panicked"))
                .collect()
        });
        let mut acc = Partial::default();
        for p in parts {
            acc.absorb(p?);
        }
        acc
    };

    let basic = check_basic(space, opts.tol);
    let witness = basic.or(part.first_violation);
    let verdict = if witness.is_some() {
        Verdict::Violated
    } else if part.count == 0 {
        Verdict::Vacuous
    } else if space.is_sampled() {
        Verdict::SatisfiedOnGrid
    } else {
        Verdict::Satisfied
    };
    Ok(AxiomReport {
        system,
        verdict,
        witness,
        min_margin: part.tightest.as_ref().map(|t| t.margin),
        tightest: part.tightest,
        checked_count: part.count,
        tol: opts.tol,
    })
}

pub fn verify_metric(space: &Space, tol: f64) -> Result<AxiomReport> {
    verify(space, AxiomSystem::Metric, VerifyOptions::with_tol(tol))
}

pub fn verify_rectangular(space: &Space, tol: f64) -> Result<AxiomReport> {
    verify(
        space,
        AxiomSystem::Rectangular,
        VerifyOptions::with_tol(tol),
    )
}

pub fn verify_controlled_metric(space: &Space, tol: f64) -> Result<AxiomReport> {
    verify(
        space,
        AxiomSystem::ControlledMetric,
        VerifyOptions::with_tol(tol),
    )
}

pub fn verify_extended_rect_b(space: &Space, tol: f64) -> Result<AxiomReport> {
    verify(
        space,
        AxiomSystem::ExtendedRectB,
        VerifyOptions::with_tol(tol),
    )
}

pub fn verify_controlled_rect(space: &Space, tol: f64) -> Result<AxiomReport> {
    verify(
        space,
        AxiomSystem::ControlledRect,
        VerifyOptions::with_tol(tol),
    )
}

/// One implication between verdicts that must hold on every finite carrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeCheck {
    pub premise: String,
    pub conclusion: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub reports: Vec<AxiomReport>,
    pub lattice: Vec<LatticeCheck>,
}

impl Classification {
    pub fn report(&self, system: AxiomSystem) -> Option<&AxiomReport> {
        self.reports.iter().find(|r| r.system == system)
    }

    pub fn verdict(&self, system: AxiomSystem) -> Option<Verdict> {
        self.report(system).map(|r| r.verdict)
    }

    pub fn lattice_ok(&self) -> bool {
        self.lattice.iter().all(|c| c.holds)
    }
}

/// Runs every verifier and checks the implications between the verdicts.
///
/// The b-metric systems are included only when the control is `const(s)`,
/// with that `s` as their constant.
pub fn classify(space: &Space, opts: VerifyOptions) -> Result<Classification> {
    use AxiomSystem::*;
    let mut systems = vec![
        Metric,
        Rectangular,
        ControlledMetric,
        ExtendedRectB,
        ControlledRect,
    ];
    let s = space.def().alpha.constant();
    if let Some(s) = s {
        systems.extend([BMetric(s), RectangularB(s)]);
    }
    let reports = systems
        .iter()
        .map(|&sys| verify(space, sys, opts))
        .collect::<Result<Vec<_>>>()?;

    let holds = |sys: AxiomSystem| {
        reports
            .iter()
            .find(|r| r.system == sys)
            .map(|r| r.verdict.holds())
            .unwrap_or(false)
    };
    // control >= 1 everywhere, so each premise's right-hand side is dominated
    let mut pairs = vec![
        (Metric, Rectangular),
        (Metric, ControlledMetric),
        (Rectangular, ControlledRect),
        (Rectangular, ExtendedRectB),
    ];
    if let Some(s) = s {
        pairs.extend([
            (Metric, BMetric(s)),
            (BMetric(s), ControlledMetric),
            (RectangularB(s), ControlledRect),
            (RectangularB(s), ExtendedRectB),
        ]);
    }
    let lattice = pairs
        .into_iter()
        .map(|(p, c)| LatticeCheck {
            premise: p.to_string(),
            conclusion: c.to_string(),
            holds: !holds(p) || holds(c),
        })
        .collect();
    Ok(Classification { reports, lattice })
}
