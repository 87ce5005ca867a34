//! Picard iteration and finite-horizon convergence diagnostics.
//!
//! Every diagnostic here works on a finite orbit. Limit and supremum
//! hypotheses are reported as estimates over a tail window, never as proofs.

use serde::Serialize;

use crate::contraction::{Constants, Map, Scheme};
use crate::error::{Error, Result};
use crate::num::{ser_opt_sig15, ser_sig15, DEFAULT_TOL};
use crate::space::{Point, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FixedPointReached,
    EpsReached,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub points: Vec<Point>,
    /// `d(x_n, x_{n+1})`
    pub step_dists: Vec<f64>,
    /// `d(x_n, x_{n+2})`
    pub skip_dists: Vec<f64>,
    /// `step_dists[n+1] / step_dists[n]` where the denominator is positive.
    pub decay_ratios: Vec<Option<f64>>,
    pub stop_reason: StopReason,
    pub fixed_point: Option<Point>,
    /// Some point repeats without the orbit having settled on a fixed point.
    pub cycle_detected: bool,
}

/// One line of the JSON-lines trace output.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    pub x: String,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub value: Option<f64>,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub step_dist: Option<f64>,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub skip_dist: Option<f64>,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub decay_ratio: Option<f64>,
}

impl OrbitTrace {
    fn build(
        space: &Space,
        points: Vec<Point>,
        stop_reason: StopReason,
        fixed_point: Option<Point>,
    ) -> Result<Self> {
        let step_dists = points
            .windows(2)
            .map(|w| space.distance(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        let skip_dists = points
            .windows(3)
            .map(|w| space.distance(&w[0], &w[2]))
            .collect::<Result<Vec<_>>>()?;
        let decay_ratios = step_dists
            .windows(2)
            .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
            .collect();
        let cycle_detected = fixed_point.is_none()
            && points
                .iter()
                .enumerate()
                .any(|(n, p)| points[n + 1..].iter().any(|q| q.same_as(p)));
        Ok(OrbitTrace {
            points,
            step_dists,
            skip_dists,
            decay_ratios,
            stop_reason,
            fixed_point,
            cycle_detected,
        })
    }

    /// Number of map applications performed.
    pub fn iterations(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.points
            .iter()
            .enumerate()
            .map(|(n, p)| TraceRecord {
                n,
                x: p.label.clone(),
                value: p.value,
                step_dist: self.step_dists.get(n).copied(),
                skip_dist: self.skip_dists.get(n).copied(),
                decay_ratio: self.decay_ratios.get(n).copied().flatten(),
            })
            .collect()
    }
}

fn start_point(space: &Space, x0: &Point) -> Result<Point> {
    space
        .locate(x0)
        .map(|i| space.point(i).clone())
        .ok_or_else(|| Error::UnknownPoint(x0.label.clone()))
}

/// Iterates `x_{n+1} = T x_n` from `x0`.
///
/// Stops when `T x_n` is `x_n` itself (fixed point reached), when
/// `d(x_n, x_{n+1}) <= eps` (the fixed point is then reported as `x_{n+1}`),
/// or after `max_iter` applications.
pub fn picard(
    space: &Space,
    map: &Map,
    x0: &Point,
    eps: f64,
    max_iter: usize,
) -> Result<OrbitTrace> {
    if !(eps > 0.0) || max_iter < 1 {
        return Err(Error::Precondition(
            "picard needs eps > 0 and max_iter >= 1".into(),
        ));
    }
    let mut points = vec![start_point(space, x0)?];
    for _ in 0..max_iter {
        let cur = points.last().expect("orbit is never empty");
        let next = map.apply(space, cur)?;
        let exact = next.same_as(cur);
        let step = space.distance(cur, &next)?;
        points.push(next.clone());
        if exact {
            return OrbitTrace::build(space, points, StopReason::FixedPointReached, Some(next));
        }
        if step <= eps {
            return OrbitTrace::build(space, points, StopReason::EpsReached, Some(next));
        }
    }
    OrbitTrace::build(space, points, StopReason::MaxIter, None)
}

/// Exactly `steps` applications of the map, without early stopping.
///
/// The final point is reported as the fixed point when the last step is at
/// most `eps`.
pub fn orbit_to_horizon(
    space: &Space,
    map: &Map,
    x0: &Point,
    steps: usize,
    eps: f64,
) -> Result<OrbitTrace> {
    let mut points = vec![start_point(space, x0)?];
    let mut exact_hit = false;
    for _ in 0..steps {
        let cur = points.last().expect("orbit is never empty");
        let next = map.apply(space, cur)?;
        exact_hit |= next.same_as(cur);
        points.push(next);
    }
    let last_step = match points.len() {
        0 | 1 => None,
        n => Some(space.distance(&points[n - 2], &points[n - 1])?),
    };
    let settled = last_step.is_some_and(|s| s <= eps);
    let reason = if exact_hit {
        StopReason::FixedPointReached
    } else if settled {
        StopReason::EpsReached
    } else {
        StopReason::MaxIter
    };
    let fixed = settled.then(|| points.last().cloned()).flatten();
    OrbitTrace::build(space, points, reason, fixed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    #[serde(serialize_with = "ser_sig15")]
    pub rate: f64,
    pub holds: bool,
    pub first_failure: Option<usize>,
    /// Largest `step_dists[n] - rate^n step_dists[0]`.
    #[serde(serialize_with = "ser_sig15")]
    pub max_excess: f64,
}

/// Checks the geometric envelope `d(x_n, x_{n+1}) <= rate^n d(x_0, x_1) + tol`.
pub fn decay_check(trace: &OrbitTrace, rate: f64, tol: f64) -> Result<DecayReport> {
    if trace.step_dists.is_empty() {
        return Err(Error::Precondition(
            "decay check needs at least one step".into(),
        ));
    }
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Precondition(format!(
            "decay rate {rate} outside [0, 1)"
        )));
    }
    let d0 = trace.step_dists[0];
    let mut first_failure = None;
    let mut max_excess = f64::NEG_INFINITY;
    let mut envelope = d0;
    for (n, &d) in trace.step_dists.iter().enumerate() {
        if n > 0 {
            envelope *= rate;
        }
        let excess = d - envelope;
        max_excess = max_excess.max(excess);
        if excess > tol && first_failure.is_none() {
            first_failure = Some(n);
        }
    }
    Ok(DecayReport {
        rate,
        holds: first_failure.is_none(),
        first_failure,
        max_excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub tail_start: usize,
    #[serde(serialize_with = "ser_sig15")]
    pub tail_max: f64,
    pub holds: bool,
}

/// `d(x_n, x_{n+2})` over the last quarter of the trace must be at most `tol`.
pub fn skip_check(trace: &OrbitTrace, tol: f64) -> Result<TailReport> {
    if trace.points.len() < 4 {
        return Err(Error::Precondition(
            "skip check needs at least 4 orbit points".into(),
        ));
    }
    let len = trace.skip_dists.len();
    let tail_start = len - (len / 4).max(1);
    let tail_max = trace.skip_dists[tail_start..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(TailReport {
        tail_start,
        tail_max,
        holds: tail_max <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyReport {
    pub tail_start: usize,
    /// `max d(x_n, x_m)` over `tail_start <= n < m`.
    #[serde(serialize_with = "ser_sig15")]
    pub tail_max: f64,
    pub attained_at: Option<(usize, usize)>,
    pub holds: bool,
    /// `max d(x_n, z)` over the tail, `z` the detected fixed point.
    #[serde(serialize_with = "ser_opt_sig15")]
    pub max_dist_to_fixed_point: Option<f64>,
    /// All tail points lie within `tol` of the fixed point.
    pub limit_consistent: Option<bool>,
}

/// Pairwise tail diameter of the orbit and agreement of the tail with the
/// detected fixed point.
pub fn cauchy_probe(space: &Space, trace: &OrbitTrace, tol: f64) -> Result<CauchyReport> {
    let pts = &trace.points;
    if pts.len() < 8 {
        return Err(Error::Precondition(
            "Cauchy probe needs at least 8 orbit points".into(),
        ));
    }
    let tail_start = pts.len() / 2;
    let mut tail_max = 0.0;
    let mut attained_at = None;
    for n in tail_start..pts.len() {
        for m in n + 1..pts.len() {
            let d = space.distance(&pts[n], &pts[m])?;
            if d > tail_max {
                tail_max = d;
                attained_at = Some((n, m));
            }
        }
    }
    let max_dist_to_fixed_point = match &trace.fixed_point {
        Some(z) => {
            let mut worst: f64 = 0.0;
            for p in &pts[tail_start..] {
                worst = worst.max(space.distance(p, z)?);
            }
            Some(worst)
        }
        None => None,
    };
    Ok(CauchyReport {
        tail_start,
        tail_max,
        attained_at,
        holds: tail_max <= tol,
        max_dist_to_fixed_point,
        limit_consistent: max_dist_to_fixed_point.map(|d| d <= tol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioValue {
    pub i: usize,
    pub m: usize,
    #[serde(serialize_with = "ser_sig15")]
    pub value: f64,
}

/// Tail estimate of a control-function limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub name: String,
    /// Supremum over the tail window.
    #[serde(serialize_with = "ser_sig15")]
    pub estimate: f64,
    /// `max - min` over the tail window; zero when the sequence has settled.
    #[serde(serialize_with = "ser_sig15")]
    pub spread: f64,
    #[serde(serialize_with = "ser_opt_sig15")]
    pub bound: Option<f64>,
    /// Finite, and below `bound` when there is one.
    pub holds: bool,
}

impl LimitEstimate {
    fn new(name: &str, values: &[f64], bound: Option<f64>) -> Self {
        let estimate = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        let estimate = if values.is_empty() {
            f64::NAN
        } else {
            estimate
        };
        let spread = if values.is_empty() {
            0.0
        } else {
            estimate - low
        };
        let holds = estimate.is_finite() && bound.is_none_or(|b| estimate < b);
        LimitEstimate {
            name: name.to_string(),
            estimate,
            spread,
            bound,
            holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEstimate {
    pub scheme: Scheme,
    /// `k`, `k`, `λ` or `λ + β`.
    #[serde(serialize_with = "ser_sig15")]
    pub constant: f64,
    pub horizon: usize,
    /// Range of `i` in the tail window.
    pub window: (usize, usize),
    #[serde(skip)]
    pub ratio_values: Vec<RatioValue>,
    /// Max over the window of
    /// `a(x_{i+1},x_m) (a(x_{i+1},x_{i+2}) + a(x_{i+2},x_{i+3})) / (a(x_i,x_{i+1}) + a(x_{i+1},x_{i+2}))`.
    #[serde(serialize_with = "ser_sig15")]
    pub estimate: f64,
    /// Same with `a(x_i, x_m)` as the leading factor.
    #[serde(serialize_with = "ser_sig15")]
    pub estimate_leading_i: f64,
    /// `1 / constant^2`.
    #[serde(serialize_with = "ser_sig15")]
    pub threshold: f64,
    pub holds: bool,
    /// Every boundedness limit over the tail is finite.
    pub alpha_limits_bounded: bool,
    pub alpha_limits: Vec<LimitEstimate>,
    pub auxiliary_limits: Vec<LimitEstimate>,
    pub fixed_point: Option<Point>,
    pub cycle_detected: bool,
    pub notes: Vec<String>,
}

impl ConditionEstimate {
    /// Estimate, threshold and every auxiliary limit hold.
    pub fn all_hold(&self) -> bool {
        self.holds && self.alpha_limits_bounded && self.auxiliary_limits.iter().all(|l| l.holds)
    }

    /// The ratio matrix as CSV `i,m,value`.
    pub fn ratio_csv(&self) -> String {
        let mut out = String::from("i,m,value\n");
        for r in &self.ratio_values {
            out.push_str(&format!(
                "{},{},{}\n",
                r.i,
                r.m,
                crate::num::fmt_num(r.value)
            ));
        }
        out
    }
}

/// Finite-horizon estimate of the alpha-ratio convergence condition and the
/// control-function limits the fixed-point argument relies on.
///
/// The orbit is built to `x_{horizon+3}`. The ratio is evaluated for `i` in
/// the last quarter of `0..horizon` and every `1 <= m <= horizon` outside
/// `{i, .., i+3}`; the estimate is the maximum over that window, which bounds
/// both orders of lim and sup at this horizon.
pub fn condition_estimate(
    space: &Space,
    map: &Map,
    x0: &Point,
    constants: Constants,
    horizon: usize,
    tol: f64,
) -> Result<ConditionEstimate> {
    if horizon < 8 {
        return Err(Error::Precondition(
            "condition estimate needs horizon >= 8".into(),
        ));
    }
    let constant = constants.condition_constant();
    if !(constant > 0.0) {
        return Err(Error::BadConstants(format!(
            "condition constant must be positive, got {constant}"
        )));
    }
    let trace = orbit_to_horizon(space, map, x0, horizon + 3, DEFAULT_TOL)?;
    let x = &trace.points;
    let a = |p: usize, q: usize| space.control(&x[p], &x[q]);

    let window = (horizon - horizon / 4, horizon);
    let mut ratio_values = Vec::new();
    let mut estimate = f64::NEG_INFINITY;
    let mut estimate_leading_i = f64::NEG_INFINITY;
    for i in window.0..window.1 {
        let shape = (a(i + 1, i + 2)? + a(i + 2, i + 3)?) / (a(i, i + 1)? + a(i + 1, i + 2)?);
        for m in (1..=horizon).filter(|m| !(i..=i + 3).contains(m)) {
            let value = a(i + 1, m)? * shape;
            estimate = estimate.max(value);
            estimate_leading_i = estimate_leading_i.max(a(i, m)? * shape);
            ratio_values.push(RatioValue { i, m, value });
        }
    }
    let threshold = 1.0 / (constant * constant);

    // boundedness of a(x_n, x), a(x, x_n), a(x_n, x_m) over the tail
    let tail = (horizon - horizon / 4)..=horizon;
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for n in tail.clone() {
        for p in space.points() {
            forward.push(space.control(&x[n], p)?);
            backward.push(space.control(p, &x[n])?);
        }
    }
    let mut pairwise = Vec::new();
    for n in tail.clone() {
        for m in tail.clone().filter(|&m| m != n) {
            pairwise.push(a(n, m)?);
        }
    }
    let alpha_limits = vec![
        LimitEstimate::new("alpha(x_n, x)", &forward, None),
        LimitEstimate::new("alpha(x, x_n)", &backward, None),
        LimitEstimate::new("alpha(x_n, x_m)", &pairwise, None),
    ];
    let alpha_limits_bounded = alpha_limits.iter().all(|l| l.holds);

    let mut notes = Vec::new();
    let z = match &trace.fixed_point {
        Some(z) => z.clone(),
        None => {
            notes.push(
                "no fixed point detected; the last orbit point stands in for the limit".into(),
            );
            x.last().cloned().expect("orbit is never empty")
        }
    };
    if trace.cycle_detected {
        notes.push("orbit revisits a point without settling: cycle detected".into());
    }
    let tz = map.apply(space, &z)?;
    let along =
        |f: &dyn Fn(usize) -> Result<f64>| -> Result<Vec<f64>> { tail.clone().map(f).collect() };

    let auxiliary_limits = match constants {
        Constants::Banach { .. } => Vec::new(),
        Constants::Kannan { k } => vec![LimitEstimate::new(
            "alpha(Tx_n, Tz)",
            &along(&|n| space.control(&x[n + 1], &tz))?,
            Some(1.0 / k),
        )],
        Constants::Reich { lambda } => {
            notes.push("alpha-ratio threshold 1/k^2 evaluated with k := lambda".into());
            vec![
                LimitEstimate::new(
                    "alpha(x_n, T^2 x_n)",
                    &along(&|n| a(n, n + 2))?,
                    Some(1.0 / lambda),
                ),
                LimitEstimate::new(
                    "alpha(Tx_n, Tz)",
                    &along(&|n| space.control(&x[n + 1], &tz))?,
                    Some(1.0 / lambda),
                ),
                LimitEstimate::new(
                    "alpha(Tz, Tx_n)",
                    &along(&|n| space.control(&tz, &x[n + 1]))?,
                    Some(1.0 / lambda),
                ),
            ]
        }
        Constants::Fisher { lambda, beta, .. } => {
            let bound = Some(1.0 / (lambda + beta));
            vec![
                LimitEstimate::new("alpha(x_n, x_m)", &pairwise, bound),
                LimitEstimate::new(
                    "alpha(x_n, z)",
                    &along(&|n| space.control(&x[n], &z))?,
                    bound,
                ),
            ]
        }
    };

    Ok(ConditionEstimate {
        scheme: constants.scheme(),
        constant,
        horizon,
        window,
        ratio_values,
        estimate,
        estimate_leading_i,
        threshold,
        holds: estimate < threshold - tol,
        alpha_limits_bounded,
        alpha_limits,
        auxiliary_limits,
        fixed_point: trace.fixed_point.clone(),
        cycle_detected: trace.cycle_detected,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriRow {
    pub n: usize,
    #[serde(serialize_with = "ser_sig15")]
    pub distance: f64,
    #[serde(serialize_with = "ser_sig15")]
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    /// The orbit points satisfy the triangle inequality, so the classical
    /// estimate applies; otherwise the comparison is informational.
    pub applicable: bool,
    pub holds: bool,
    pub first_failure: Option<usize>,
    pub rows: Vec<AprioriRow>,
}

/// Compares `d(x_n, z)` with `k^n / (1 - k) d(x_0, x_1)` along the trace.
pub fn apriori_bound(space: &Space, trace: &OrbitTrace, k: f64, tol: f64) -> Result<AprioriReport> {
    let z = trace.fixed_point.as_ref().ok_or_else(|| {
        Error::Precondition("a-priori estimate needs a detected fixed point".into())
    })?;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Precondition(format!("k = {k} outside (0, 1)")));
    }
    let d01 = trace.step_dists.first().copied().unwrap_or(0.0);
    let mut rows = Vec::with_capacity(trace.points.len());
    let mut first_failure = None;
    let mut kn = 1.0;
    for (n, p) in trace.points.iter().enumerate() {
        let distance = space.distance(p, z)?;
        let bound = kn / (1.0 - k) * d01;
        if distance > bound + tol && first_failure.is_none() {
            first_failure = Some(n);
        }
        rows.push(AprioriRow { n, distance, bound });
        kn *= k;
    }
    Ok(AprioriReport {
        applicable: orbit_is_metric(space, &trace.points, tol)?,
        holds: first_failure.is_none(),
        first_failure,
        rows,
    })
}

fn orbit_is_metric(space: &Space, points: &[Point], tol: f64) -> Result<bool> {
    let mut distinct: Vec<&Point> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| q.same_as(p)) {
            distinct.push(p);
        }
    }
    let n = distinct.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = space.distance(distinct[i], distinct[j])?;
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x != y && y != z && x != z && d[x * n + y] > d[x * n + z] + d[z * n + y] + tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRun {
    pub start: String,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub fixed_point: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub runs: Vec<ProbeRun>,
    /// Fixed points found, merged when within `eps` of each other.
    pub fixed_points: Vec<Point>,
    pub all_converged: bool,
    pub unique: bool,
}

/// Runs Picard iteration from every start and compares the limits.
pub fn uniqueness_probe(
    space: &Space,
    map: &Map,
    starts: &[Point],
    eps: f64,
    max_iter: usize,
) -> Result<UniquenessReport> {
    if starts.len() < 2 {
        return Err(Error::Precondition(
            "uniqueness probe needs at least 2 starts".into(),
        ));
    }
    let mut runs = Vec::with_capacity(starts.len());
    let mut fixed_points: Vec<Point> = Vec::new();
    for s in starts {
        let trace = picard(space, map, s, eps, max_iter)?;
        if let Some(z) = &trace.fixed_point {
            let mut known = false;
            for q in &fixed_points {
                if space.distance(q, z)? <= eps {
                    known = true;
                    break;
                }
            }
            if !known {
                fixed_points.push(z.clone());
            }
        }
        runs.push(ProbeRun {
            start: s.label.clone(),
            stop_reason: trace.stop_reason,
            iterations: trace.iterations(),
            fixed_point: trace.fixed_point,
        });
    }
    let all_converged = runs.iter().all(|r| r.fixed_point.is_some());
    Ok(UniquenessReport {
        unique: all_converged && fixed_points.len() == 1,
        runs,
        fixed_points,
        all_converged,
    })
}
