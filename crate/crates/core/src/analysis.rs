//! Runtime monitors for the proof machinery: set classification, Lyapunov
//! function, situation detectors, absorbing-set checks, the d-infinity
//! metric, and the running-average estimator.
//!
//! Monitors are pure functions of a finished trace; they never influence the
//! dynamics they check. All comparisons are exact rational comparisons, so
//! a reported violation is a real one, not a rounding artifact.
//!
//! Nodes are grouped at each iteration by where `x_i` sits relative to
//! `m + 1` (with `m` the minimum floor) and the margin `alpha_i`:
//!
//! ```text
//! X1: m <= x < m+1-a    X2: m+1-a <= x < m+1   X3: m+1 <= x <= m+1+a
//! X4: m+1+a < x < m+2   X5: m+2 <= x < m+2+a   X6: x >= m+2+a
//! ```
//!
//! and `V(k) = sum_i max{|x_i - m - 1| - alpha_i, 0}` measures the distance
//! to the target band `[m+1-a_i, m+1+a_i]`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Write as _;

use crate::dynamics::{floor_bounds, state_sum, Trace, Verdict};
use crate::error::Error;
use crate::graph::Graph;
use crate::numeric::{frac, rat_int, GridConstants, Rational};
use crate::weights::WeightMatrix;
use crate::Result;

/// Position class of one node at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetLabel {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
}

impl SetLabel {
    pub fn index(self) -> usize {
        match self {
            SetLabel::X1 => 1,
            SetLabel::X2 => 2,
            SetLabel::X3 => 3,
            SetLabel::X4 => 4,
            SetLabel::X5 => 5,
            SetLabel::X6 => 6,
        }
    }
}

/// Which strict-decrease situations fire at an iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Situations {
    /// Edge between {X4, X5, X6} and {X1, X2}.
    pub s1: bool,
    /// Edge between {X5, X6} and X3.
    pub s2: bool,
    /// Edge between X1 and X3.
    pub s3: bool,
}

/// Per-iteration instrumentation record.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub k: usize,
    pub m: BigInt,
    pub big_m: BigInt,
    pub v: Rational,
    pub labels: Vec<SetLabel>,
    pub situations: Situations,
    /// `V(k+1) - V(k)`; `None` on the last recorded iteration.
    pub delta_v: Option<Rational>,
}

/// Classify every node by the six interval rules (exact endpoint handling).
pub fn classify_sets(x: &[Rational], m: &BigInt, alpha: &[Rational]) -> Result<Vec<SetLabel>> {
    assert_eq!(x.len(), alpha.len(), "dimension mismatch");
    let m_rat = Rational::from_integer(m.clone());
    x.iter()
        .zip(alpha)
        .enumerate()
        .map(|(i, (xi, a))| {
            let t = xi - &m_rat;
            if t.is_negative() {
                return Err(Error::InternalInconsistency(format!(
                    "node {i}: x below the minimum floor"
                )));
            }
            let one = Rational::one();
            let two = rat_int(2);
            Ok(if t < &one - a {
                SetLabel::X1
            } else if t < one {
                SetLabel::X2
            } else if t <= &one + a {
                SetLabel::X3
            } else if t < two {
                SetLabel::X4
            } else if t < &two + a {
                SetLabel::X5
            } else {
                SetLabel::X6
            })
        })
        .collect()
}

/// `V = sum_i max{|x_i - m - 1| - alpha_i, 0}`; zero exactly when every node
/// sits in the band `X2 union X3`.
pub fn lyapunov(x: &[Rational], m: &BigInt, alpha: &[Rational]) -> Rational {
    assert_eq!(x.len(), alpha.len(), "dimension mismatch");
    let center = Rational::from_integer(m.clone()) + Rational::one();
    x.iter()
        .zip(alpha)
        .map(|(xi, a)| {
            let dist = (xi - &center).abs() - a;
            if dist.is_positive() {
                dist
            } else {
                Rational::zero()
            }
        })
        .sum()
}

/// Edge scan for the three strict-decrease situations.
pub fn detect_situations(g: &Graph, labels: &[SetLabel]) -> Situations {
    let mut out = Situations::default();
    for &(u, v) in g.edges() {
        let (a, b) = (labels[u].index(), labels[v].index());
        let (lo, hi) = (a.min(b), a.max(b));
        if hi >= 4 && lo <= 2 {
            out.s1 = true;
        }
        if hi >= 5 && lo == 3 {
            out.s2 = true;
        }
        if lo == 1 && hi == 3 {
            out.s3 = true;
        }
        if out.s1 && out.s2 && out.s3 {
            break;
        }
    }
    out
}

/// Compute the full per-iteration instrumentation for a trace.
///
/// Requires a full trace (every iteration recorded).
pub fn instrument(trace: &Trace, g: &Graph, constants: &GridConstants) -> Result<Vec<IterationReport>> {
    require_full(trace)?;
    let mut reports: Vec<IterationReport> = Vec::with_capacity(trace.states.len());
    for s in &trace.states {
        let (m, big_m) = floor_bounds(&s.x);
        let labels = classify_sets(&s.x, &m, &constants.alpha)?;
        let v = lyapunov(&s.x, &m, &constants.alpha);
        let situations = detect_situations(g, &labels);
        reports.push(IterationReport {
            k: s.k,
            m,
            big_m,
            v,
            labels,
            situations,
            delta_v: None,
        });
    }
    for i in 0..reports.len().saturating_sub(1) {
        let dv = &reports[i + 1].v - &reports[i].v;
        reports[i].delta_v = Some(dv);
    }
    Ok(reports)
}

/// Instrumentation CSV: `k, m, M, V_num, V_den, n_X1..n_X6, S1, S2, S3`.
pub fn instrumentation_csv(reports: &[IterationReport]) -> String {
    let mut out = String::from("k,m,M,V_num,V_den,n_X1,n_X2,n_X3,n_X4,n_X5,n_X6,S1,S2,S3\n");
    for r in reports {
        let mut counts = [0usize; 7];
        for l in &r.labels {
            counts[l.index()] += 1;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.m,
            r.big_m,
            r.v.numer(),
            r.v.denom(),
            counts[1],
            counts[2],
            counts[3],
            counts[4],
            counts[5],
            counts[6],
            r.situations.s1 as u8,
            r.situations.s2 as u8,
            r.situations.s3 as u8,
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct LemmaViolation {
    pub k: usize,
    pub what: String,
}

/// Outcome of running every trace monitor.
#[derive(Debug, Clone, Default)]
pub struct LemmaReport {
    pub violations: Vec<LemmaViolation>,
    /// Measured strict-drop waiting times (one per completed measurement
    /// window with `{X4, X5, X6}` nonempty and constant `m`).
    pub measured_r: Vec<usize>,
    /// `n (1 + 1/(2 delta))^(n-1)`, when evaluated.
    pub r_bound: Option<Rational>,
}

impl LemmaReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Options for [`check_lemmas`].
#[derive(Debug, Clone)]
pub struct MonitorOptions {
    /// Evaluate the waiting-time bound even for large `n` (it is exponential
    /// in `n`, so by default it is only computed for `n <= 12`).
    pub force_r_bound: bool,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { force_r_bound: false }
    }
}

/// Run every trace monitor: Lyapunov monotonicity and strict drops,
/// absorbing-set emptiness, no X1 re-entry (per constant-m phase), grid and
/// margin invariants, waiting-time bounds, and the terminal characterization.
pub fn check_lemmas(
    trace: &Trace,
    g: &Graph,
    w: &WeightMatrix,
    constants: &GridConstants,
    opts: &MonitorOptions,
) -> Result<LemmaReport> {
    require_full(trace)?;
    let reports = instrument(trace, g, constants)?;
    let mut out = LemmaReport::default();
    let n = trace.n;
    let beta = constants.beta();
    let two_gamma = &constants.gamma * rat_int(2);
    let half = Rational::new(BigInt::one(), BigInt::from(2));

    let row_sums: Vec<Rational> = (0..n).map(|i| w.off_diagonal_sum(i)).collect();
    let initial_decimals: Vec<Rational> = trace.states[0].x.iter().map(frac).collect();
    let total = state_sum(&trace.states[0].x);

    // Per-state invariants.
    for (idx, s) in trace.states.iter().enumerate() {
        let r = &reports[idx];
        if state_sum(&s.x) != total {
            out.violations.push(LemmaViolation {
                k: s.k,
                what: "state sum not conserved".into(),
            });
        }
        if r.v.is_negative() {
            out.violations.push(LemmaViolation { k: s.k, what: "V negative".into() });
        }
        for i in 0..n {
            let c = frac(&s.x[i]);
            let c_bar = Rational::one() - &c;
            // Decimal grid: c_i(k) - c_i(0) is a multiple of 1/B_i.
            let grid_step = (&c - &initial_decimals[i]) * Rational::from_integer(constants.b[i].clone());
            if !grid_step.is_integer() {
                out.violations.push(LemmaViolation {
                    k: s.k,
                    what: format!("node {i}: decimal left the 1/B grid"),
                });
            }
            // Margin inequalities that define gamma.
            if c > row_sums[i] && &c - &row_sums[i] < two_gamma {
                out.violations.push(LemmaViolation {
                    k: s.k,
                    what: format!("node {i}: decimal margin below 2 gamma"),
                });
            }
            if c_bar > row_sums[i] && &c_bar - &row_sums[i] < two_gamma {
                out.violations.push(LemmaViolation {
                    k: s.k,
                    what: format!("node {i}: complement margin below 2 gamma"),
                });
            }
            if c_bar < two_gamma {
                out.violations.push(LemmaViolation {
                    k: s.k,
                    what: format!("node {i}: complement decimal below 2 gamma"),
                });
            }
            if &half - &row_sums[i] < two_gamma {
                out.violations.push(LemmaViolation {
                    k: s.k,
                    what: format!("node {i}: weight slack below 2 gamma"),
                });
            }
            // Interior-point property: when V = 0, no node sits exactly on
            // the boundary of the target band.
            if r.v.is_zero() {
                let center = Rational::from_integer(r.m.clone()) + Rational::one();
                if (&s.x[i] - &center).abs() == constants.alpha[i] {
                    out.violations.push(LemmaViolation {
                        k: s.k,
                        what: format!("node {i}: on the boundary of the target band"),
                    });
                }
            }
        }
    }

    // Step-to-step invariants.
    for win in reports.windows(2) {
        let (cur, next) = (&win[0], &win[1]);
        let k = cur.k;
        if next.m < cur.m {
            out.violations.push(LemmaViolation { k, what: "m decreased".into() });
        }
        if next.big_m > cur.big_m {
            out.violations.push(LemmaViolation { k, what: "M increased".into() });
        }
        let m_constant = next.m == cur.m;
        let dv = cur.delta_v.as_ref().expect("delta_v filled for non-final reports");
        if m_constant && dv.is_positive() {
            out.violations.push(LemmaViolation {
                k,
                what: "V increased while m constant".into(),
            });
        }
        if m_constant && (cur.situations.s1 || cur.situations.s2) && *dv > -&beta {
            out.violations.push(LemmaViolation {
                k,
                what: "S1/S2 fired without a strict V drop".into(),
            });
        }
        let upper_empty =
            cur.labels.iter().all(|l| l.index() <= 3) && next.labels.iter().all(|l| l.index() <= 3);
        if m_constant && upper_empty && cur.situations.s3 && *dv > -&beta {
            out.violations.push(LemmaViolation {
                k,
                what: "S3 fired without a strict V drop".into(),
            });
        }
        // Absorbing emptiness: once X6 (resp. {X5,X6}, {X4,X5,X6}) empties,
        // it stays empty. Raising m only shrinks these sets, so the check
        // holds across m increases as well.
        for top in [6usize, 5, 4] {
            let empty_now = cur.labels.iter().all(|l| l.index() < top);
            let empty_next = next.labels.iter().all(|l| l.index() < top);
            if empty_now && !empty_next {
                out.violations.push(LemmaViolation {
                    k,
                    what: format!("sets X{top}..X6 re-populated after emptying"),
                });
            }
        }
        // No node re-enters X1 while m is constant. The X1 interval moves
        // when m increases, so the monitor resets at each m change.
        if m_constant {
            for i in 0..n {
                if cur.labels[i] != SetLabel::X1 && next.labels[i] == SetLabel::X1 {
                    out.violations.push(LemmaViolation {
                        k,
                        what: format!("node {i} re-entered X1"),
                    });
                }
            }
        }
    }

    // Waiting-time measurement for the strict-drop bound.
    let evaluate_bound = n <= 12 || opts.force_r_bound;
    if evaluate_bound {
        let bound = Rational::from_integer(BigInt::from(n))
            * (Rational::one() + Rational::one() / (rat_int(2) * &constants.delta))
                .pow((n - 1) as i32);
        out.r_bound = Some(bound.clone());
        let mut window_start: Option<usize> = None;
        for idx in 0..reports.len().saturating_sub(1) {
            let cur = &reports[idx];
            let next = &reports[idx + 1];
            let upper_nonempty = cur.labels.iter().any(|l| l.index() >= 4);
            let m_constant = next.m == cur.m;
            if !upper_nonempty || !m_constant {
                // Lemma hypothesis broken; the pending window is void.
                window_start = None;
                continue;
            }
            let start = *window_start.get_or_insert(cur.k);
            let dv = cur.delta_v.as_ref().unwrap();
            if *dv <= -&beta {
                let r = cur.k + 1 - start;
                if Rational::from_integer(BigInt::from(r)) > bound {
                    out.violations.push(LemmaViolation {
                        k: cur.k,
                        what: format!("waiting time {r} exceeds the strict-drop bound"),
                    });
                }
                out.measured_r.push(r);
                window_start = Some(cur.k + 1);
            } else if Rational::from_integer(BigInt::from(cur.k + 1 - start)) > bound {
                out.violations.push(LemmaViolation {
                    k: cur.k,
                    what: "no strict V drop within the waiting-time bound".into(),
                });
                window_start = None;
            }
        }
    }

    // Terminal characterization.
    match &trace.verdict {
        Verdict::Cycle { t_conv, .. } => {
            for (idx, s) in trace.states.iter().enumerate() {
                if s.k < *t_conv {
                    continue;
                }
                let r = &reports[idx];
                if !r.v.is_zero() {
                    out.violations.push(LemmaViolation {
                        k: s.k,
                        what: "V nonzero inside the terminal cycle".into(),
                    });
                }
                if !r.labels.iter().all(|l| matches!(l, SetLabel::X2 | SetLabel::X3)) {
                    out.violations.push(LemmaViolation {
                        k: s.k,
                        what: "terminal cycle labels outside X2/X3".into(),
                    });
                }
            }
        }
        Verdict::QuantizedConsensus { k0, .. } => {
            let last = reports.last().expect("nonempty trace");
            debug_assert_eq!(last.k, *k0);
            if !last.labels.iter().all(|l| matches!(l, SetLabel::X1 | SetLabel::X2)) {
                out.violations.push(LemmaViolation {
                    k: last.k,
                    what: "consensus labels outside X1/X2".into(),
                });
            }
        }
        Verdict::Undecided { .. } => {
            out.violations.push(LemmaViolation {
                k: trace.iters,
                what: "trace undecided within budget".into(),
            });
        }
    }

    Ok(out)
}

/// Terminal deviation metric, reported exactly as its square (the `1/sqrt(n)`
/// factor makes the metric itself irrational in general).
#[derive(Debug, Clone)]
pub struct DInfinity {
    /// `max over the terminal regime of (1/n) * ||x - x_ave 1||^2`, exact.
    pub squared: Rational,
    /// Decimal rendering of the square root.
    pub value: f64,
}

/// `d_infinity = limsup (1/sqrt(n)) ||x(k) - x_ave 1||`, reduced to a max
/// over one terminal period (exact periodicity makes the limsup a max).
pub fn d_infinity(trace: &Trace) -> Result<DInfinity> {
    require_full(trace)?;
    let n = trace.n;
    let x_ave = state_sum(&trace.states[0].x) / rat_int(n as i64);
    let terminal: Vec<&crate::dynamics::SimState> = match &trace.verdict {
        Verdict::QuantizedConsensus { k0, .. } => {
            vec![trace.state(*k0).ok_or(Error::NotConverged)?]
        }
        Verdict::Cycle { t_conv, period } => (*t_conv..t_conv + period)
            .map(|k| trace.state(k).ok_or(Error::NotConverged))
            .collect::<Result<_>>()?,
        Verdict::Undecided { .. } => return Err(Error::NotConverged),
    };
    let squared = terminal
        .iter()
        .map(|s| {
            s.x.iter()
                .map(|xi| {
                    let d = xi - &x_ave;
                    &d * &d
                })
                .sum::<Rational>()
                / rat_int(n as i64)
        })
        .max()
        .expect("terminal regime nonempty");
    let value = squared.to_f64().unwrap_or(f64::NAN).sqrt();
    Ok(DInfinity { squared, value })
}

/// Running-average estimates `y_i(k) = (1/(k+1)) sum_{t<=k} x_i(t)` and
/// their exact limits.
#[derive(Debug, Clone)]
pub struct RunningAverages {
    /// `y(k)` for every recorded iteration.
    pub per_iteration: Vec<Vec<Rational>>,
    /// Exact limit: the fixed value for consensus, the period average for a
    /// cycle.
    pub limits: Vec<Rational>,
}

pub fn running_average(trace: &Trace) -> Result<RunningAverages> {
    require_full(trace)?;
    let n = trace.n;
    let mut sums = vec![Rational::zero(); n];
    let mut per_iteration = Vec::with_capacity(trace.states.len());
    for s in &trace.states {
        for (sum, xi) in sums.iter_mut().zip(&s.x) {
            *sum += xi;
        }
        let denom = rat_int((s.k + 1) as i64);
        per_iteration.push(sums.iter().map(|sum| sum / &denom).collect());
    }
    let limits: Vec<Rational> = match &trace.verdict {
        Verdict::QuantizedConsensus { k0, .. } => {
            trace.state(*k0).ok_or(Error::NotConverged)?.x.clone()
        }
        Verdict::Cycle { t_conv, period } => {
            let mut acc = vec![Rational::zero(); n];
            for k in *t_conv..t_conv + period {
                let s = trace.state(k).ok_or(Error::NotConverged)?;
                for (a, xi) in acc.iter_mut().zip(&s.x) {
                    *a += xi;
                }
            }
            let p = rat_int(*period as i64);
            acc.into_iter().map(|a| a / &p).collect()
        }
        Verdict::Undecided { .. } => return Err(Error::NotConverged),
    };
    Ok(RunningAverages { per_iteration, limits })
}

/// Initial-condition certificate: when the fractional part of the average
/// lies in `[alpha, 1 - alpha]`, the system must reach quantized consensus.
/// `false` is inconclusive, not a cycle guarantee.
pub fn consensus_certificate(x0: &[Rational], alpha_max: &Rational) -> bool {
    let x_ave = state_sum(x0) / rat_int(x0.len() as i64);
    let f = frac(&x_ave);
    &f >= alpha_max && f <= Rational::one() - alpha_max
}

fn require_full(trace: &Trace) -> Result<()> {
    if trace.is_full() {
        Ok(())
    } else {
        Err(Error::InternalInconsistency(
            "monitor requires a full trace (record policy Full)".into(),
        ))
    }
}
