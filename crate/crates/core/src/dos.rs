//! Time-constrained DoS attacks: traces, random generation, certification
//! of frequency/duration parameters and the successful-transmission bound.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A DoS interval `[start, start + duration)`; a zero duration is a pulse
/// covering exactly `{start}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DosInterval {
    pub start: f64,
    pub duration: f64,
}

impl DosInterval {
    #[inline]
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    #[inline]
    fn covers(&self, t: f64) -> bool {
        t == self.start || (t > self.start && t < self.end())
    }
}

/// Normalized DoS trace on `[0, horizon]`: sorted, disjoint intervals with
/// strictly increasing starts.
#[derive(Debug, Clone, PartialEq)]
pub struct DosTrace {
    intervals: Vec<DosInterval>,
    horizon: f64,
}

/// Attack frequency (`eta`, `tau_d`) and duration (`kappa`, `t_param`)
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DosParams {
    pub eta: f64,
    pub tau_d: f64,
    pub kappa: f64,
    pub t_param: f64,
}

impl DosParams {
    /// `1/T + delta/tau_D`; below one means within maximum resilience.
    pub fn resilience_margin(&self, delta: f64) -> f64 {
        1.0 / self.t_param + delta / self.tau_d
    }
}

impl DosTrace {
    /// Builds a trace from raw intervals, merging overlaps and clipping to
    /// the horizon. An interval running past the horizon is cut at it and
    /// the horizon instant itself stays covered by a pulse.
    pub fn new(raw: Vec<DosInterval>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive, got {horizon}"),
            });
        }
        let mut items = Vec::with_capacity(raw.len() + 1);
        for iv in raw {
            if !iv.start.is_finite() || !iv.duration.is_finite() {
                return Err(Error::NonFinite("DoS interval"));
            }
            if iv.start < 0.0 || iv.duration < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "interval",
                    reason: format!("negative start or duration in ({}, {})", iv.start, iv.duration),
                });
            }
            if iv.start > horizon {
                continue;
            }
            if iv.end() > horizon {
                items.push(DosInterval { start: iv.start, duration: horizon - iv.start });
                items.push(DosInterval { start: horizon, duration: 0.0 });
            } else {
                items.push(iv);
            }
        }
        // longest first among equal starts, so pulses fold into intervals
        items.sort_by(|a, b| a.start.total_cmp(&b.start).then(b.duration.total_cmp(&a.duration)));

        let mut merged: Vec<DosInterval> = Vec::with_capacity(items.len());
        for iv in items {
            match merged.last_mut() {
                Some(cur) if iv.start == cur.start => {}
                Some(cur) if iv.start < cur.end() || (iv.start == cur.end() && iv.duration > 0.0) => {
                    let end = cur.end().max(iv.end());
                    cur.duration = end - cur.start;
                }
                _ => merged.push(iv),
            }
        }
        Ok(Self { intervals: merged, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    /// DoS active at every instant of `[0, horizon]`.
    pub fn always_on(horizon: f64) -> Result<Self> {
        Self::new(
            vec![DosInterval { start: 0.0, duration: horizon }, DosInterval { start: horizon, duration: 0.0 }],
            horizon,
        )
    }

    pub fn intervals(&self) -> &[DosInterval] {
        &self.intervals
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn slack(&self) -> f64 {
        1e-9 * self.horizon.max(1.0)
    }

    /// Whether the network is under DoS at time `t`.
    pub fn is_active(&self, t: f64) -> Result<bool> {
        if !(t >= 0.0 && t <= self.horizon + self.slack()) {
            return Err(Error::OutOfHorizon { t, horizon: self.horizon });
        }
        let idx = self.intervals.partition_point(|iv| iv.start <= t);
        Ok(idx > 0 && self.intervals[idx - 1].covers(t))
    }

    /// DoS status at sampling instants `m * delta` for `m = 0..=k`.
    pub fn sample_mask(&self, delta: f64, k: u64) -> Result<Vec<bool>> {
        check_delta(delta)?;
        let last = k as f64 * delta;
        if last > self.horizon + self.slack() {
            return Err(Error::OutOfHorizon { t: last, horizon: self.horizon });
        }
        let mut mask = Vec::with_capacity(k as usize + 1);
        let mut idx = 0;
        for m in 0..=k {
            let t = m as f64 * delta;
            while idx < self.intervals.len() && self.intervals[idx].end() < t {
                idx += 1;
            }
            // an interval can end exactly at t while the next starts at t
            let active = self.intervals[idx..].iter().take_while(|iv| iv.start <= t).any(|iv| iv.covers(t));
            mask.push(active);
        }
        Ok(mask)
    }

    /// Number of DoS-free sampling instants `m * delta`, `m = 0..=k`.
    pub fn count_successes(&self, delta: f64, k: u64) -> Result<u64> {
        Ok(self.sample_mask(delta, k)?.iter().filter(|&&a| !a).count() as u64)
    }

    /// Number of DoS off/on transitions.
    pub fn n_transitions(&self) -> usize {
        self.intervals.len()
    }

    /// Total DoS measure on the horizon.
    pub fn total_duration(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.duration).sum()
    }

    /// `tau_D = horizon / n` and `T = horizon / |Xi|`, infinite when the
    /// corresponding total is zero.
    pub fn averaged_params(&self) -> (f64, f64) {
        let n = self.n_transitions();
        let total = self.total_duration();
        let tau_d = if n == 0 { f64::INFINITY } else { self.horizon / n as f64 };
        let t_param = if total == 0.0 { f64::INFINITY } else { self.horizon / total };
        (tau_d, t_param)
    }

    /// Tightest `eta` and `kappa` for the given `tau_d` and `t_param`.
    ///
    /// Windows `[tau, t]` range over interval endpoints, `0`, the horizon
    /// and a grid of spacing `resolution`. The transition count is
    /// piecewise constant and the DoS measure piecewise linear, so the
    /// endpoints alone already attain both suprema; the grid is a cross-check.
    pub fn certify(&self, tau_d: f64, t_param: f64, resolution: f64) -> Result<DosParams> {
        if !(tau_d > 0.0) {
            return Err(Error::InvalidParameter { name: "tau_d", reason: format!("must be positive, got {tau_d}") });
        }
        if !(t_param > 1.0) {
            return Err(Error::InvalidParameter { name: "T", reason: format!("must exceed 1, got {t_param}") });
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: format!("must be positive, got {resolution}"),
            });
        }

        let mut anchors: Vec<f64> = Vec::with_capacity(2 * self.intervals.len() + 2);
        anchors.push(0.0);
        anchors.push(self.horizon);
        for iv in &self.intervals {
            anchors.push(iv.start);
            anchors.push(iv.end());
        }
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        let steps = (self.horizon / resolution).floor() as u64;
        let grid = (0..=steps).map(|m| m as f64 * resolution).filter(|&t| t <= self.horizon);

        // n(tau, t) = S_le(t) - S_lt(tau); maximize over tau <= t of
        // [S_le(t) - t/tau_D] + [tau/tau_D - S_lt(tau)]
        let mut best_tau_eta = f64::NEG_INFINITY;
        let mut eta = 0.0_f64;
        // |Xi(tau, t)| = F(t) - F(tau)
        let mut min_g = f64::INFINITY;
        let mut kappa = 0.0_f64;
        // starts below / up to the current point, and DoS measure of the
        // intervals fully before the last start <= t
        let (mut n_lt, mut n_le, mut closed) = (0usize, 0usize, 0.0_f64);
        let ivs = &self.intervals;
        for t in merge_sorted(&anchors, grid) {
            while n_lt < ivs.len() && ivs[n_lt].start < t {
                n_lt += 1;
            }
            while n_le < ivs.len() && ivs[n_le].start <= t {
                if n_le > 0 {
                    closed += ivs[n_le - 1].duration;
                }
                n_le += 1;
            }
            best_tau_eta = best_tau_eta.max(t / tau_d - n_lt as f64);
            eta = eta.max(n_le as f64 - t / tau_d + best_tau_eta);

            let measure = match n_le {
                0 => 0.0,
                k => closed + (t.min(ivs[k - 1].end()) - ivs[k - 1].start),
            };
            let g = measure - t / t_param;
            min_g = min_g.min(g);
            kappa = kappa.max(g - min_g);
        }
        Ok(DosParams { eta, tau_d, kappa, t_param })
    }

    /// Plain-text export: a `# horizon=<seconds>` header, then one
    /// `start duration` pair per line. Round-trips bit-exactly.
    pub fn to_text(&self) -> String {
        let mut s = format!("# horizon={}\n", self.horizon);
        for iv in &self.intervals {
            writeln!(s, "{} {}", iv.start, iv.duration).expect("writing to a String cannot fail");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("horizon=") {
                    let h = v
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::TraceParse { line: lineno, reason: e.to_string() })?;
                    horizon = Some(h);
                }
                continue;
            }
            if horizon.is_none() {
                return Err(Error::TraceParse { line: lineno, reason: "missing `# horizon=` header".into() });
            }
            let mut fields = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let tok = fields
                    .next()
                    .ok_or_else(|| Error::TraceParse { line: lineno, reason: format!("missing {what}") })?;
                tok.parse::<f64>().map_err(|e| Error::TraceParse { line: lineno, reason: format!("{what}: {e}") })
            };
            let start = next("start")?;
            let duration = next("duration")?;
            if fields.next().is_some() {
                return Err(Error::TraceParse { line: lineno, reason: "trailing fields".into() });
            }
            raw.push(DosInterval { start, duration });
        }
        let horizon = horizon.ok_or(Error::TraceParse { line: 0, reason: "missing `# horizon=` header".into() })?;
        Self::new(raw, horizon)
    }
}

/// Ascending merge of a sorted slice and a sorted iterator.
fn merge_sorted<'a>(a: &'a [f64], b: impl Iterator<Item = f64> + 'a) -> impl Iterator<Item = f64> + 'a {
    let mut a = a.iter().copied().peekable();
    let mut b = b.peekable();
    std::iter::from_fn(move || match (a.peek(), b.peek()) {
        (Some(&x), Some(&y)) if x <= y => a.next(),
        (Some(_), Some(_)) => b.next(),
        (Some(_), None) => a.next(),
        (None, _) => b.next(),
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter { name: "delta", reason: format!("must be positive, got {delta}") });
    }
    Ok(())
}

/// Random sustained attack: alternating off/on spans with durations drawn
/// uniformly from `[0.5, 1.5]` times their target means
/// `(1 - duty) * period` and `duty * period`.
pub fn generate(duty: f64, period: f64, horizon: f64, seed: u64) -> Result<DosTrace> {
    if !(0.0..1.0).contains(&duty) {
        return Err(Error::InvalidParameter { name: "duty", reason: format!("must lie in [0, 1), got {duty}") });
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidParameter { name: "period", reason: format!("must be positive, got {period}") });
    }
    if duty == 0.0 {
        return DosTrace::empty(horizon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_off = (1.0 - duty) * period;
    let mean_on = duty * period;
    let mut raw = Vec::new();
    let mut t = 0.0;
    while t < horizon {
        t += rng.gen_range(0.5..1.5) * mean_off;
        let on = rng.gen_range(0.5..1.5) * mean_on;
        if t <= horizon {
            raw.push(DosInterval { start: t, duration: on });
        }
        t += on;
    }
    DosTrace::new(raw, horizon)
}

/// Lower bound on the successful transmissions among the first `k + 1`
/// sampling instants: `(1 - 1/T - delta/tau_D) k - (kappa + eta delta) / delta`.
pub fn ts_lower_bound(params: &DosParams, delta: f64, k: u64) -> Result<f64> {
    check_delta(delta)?;
    let margin = params.resilience_margin(delta);
    if !(margin < 1.0) {
        return Err(Error::BeyondResilience { margin });
    }
    Ok((1.0 - margin) * k as f64 - (params.kappa + params.eta * delta) / delta)
}
