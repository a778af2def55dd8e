//! Event-driven gas of two-level molecules exchanging single quanta.
//!
//! Every excited molecule carries an exponential decay clock with rate
//! `lambda`. The first clock to fire is the emitter; because the clocks are
//! i.i.d. the waiting time is exponential with rate `n_excited * lambda` and
//! the emitter is uniform among the excited molecules. All ground-state
//! molecules that couple to the emitter respond (the confirmation set) and
//! exactly one of them receives the quantum, chosen with its normalized
//! coupling weight. The quantum arrives `delay` after emission, and the
//! next emission is only scheduled after the previous absorption, so
//! transactions never overlap.
//!
//! Random draws per event, in order: waiting time, emitter, winner.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::master::{format_float, RateMatrix};
use crate::measurement::collapse_sample;
use crate::probability::{shannon_entropy, ProbabilityVector};
use crate::rng::SimRng;

/// Absorption delay in units of `1 / lambda` when none is given.
pub const DEFAULT_DELAY_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Uniform,
    /// `weights[(emitter, absorber)]`, nonnegative; zero means no response.
    Table(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasConfig {
    pub molecules: usize,
    pub initially_excited: usize,
    /// Explicit ids of the initially excited molecules. `None` excites
    /// molecules `0..initially_excited`, i.e. the left half first.
    pub layout: Option<Vec<usize>>,
    pub decay_rate: f64,
    /// `None` means `DEFAULT_DELAY_FACTOR / decay_rate`.
    pub delay: Option<f64>,
    pub coupling: Coupling,
    pub t_max: f64,
    pub seed: u64,
}

impl GasConfig {
    pub fn new(molecules: usize, initially_excited: usize, decay_rate: f64, t_max: f64, seed: u64) -> Self {
        Self {
            molecules,
            initially_excited,
            layout: None,
            decay_rate,
            delay: None,
            coupling: Coupling::Uniform,
            t_max,
            seed,
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay.unwrap_or(DEFAULT_DELAY_FACTOR / self.decay_rate)
    }

    /// Size of the left half used for coarse graining.
    pub fn left_size(&self) -> usize {
        self.molecules / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.molecules == 0 {
            return bad("molecules must be positive".into());
        }
        if self.initially_excited > self.molecules {
            return bad(format!(
                "initially_excited = {} exceeds molecules = {}",
                self.initially_excited, self.molecules
            ));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return bad(format!("decay_rate must be positive, got {}", self.decay_rate));
        }
        let tau = self.delay();
        if !(tau > 0.0 && tau.is_finite()) {
            return bad(format!("delay must be strictly positive, got {tau}"));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be nonnegative, got {}", self.t_max));
        }
        if let Some(layout) = &self.layout {
            if layout.len() != self.initially_excited {
                return bad(format!("layout lists {} molecules, expected {}", layout.len(), self.initially_excited));
            }
            let mut seen = vec![false; self.molecules];
            for &id in layout {
                if id >= self.molecules || seen[id] {
                    return bad(format!("layout id {id} out of range or repeated"));
                }
                seen[id] = true;
            }
        }
        if let Coupling::Table(w) = &self.coupling {
            if w.nrows() != self.molecules || w.ncols() != self.molecules {
                return bad(format!("coupling table is {}x{}, expected {n}x{n}", w.nrows(), w.ncols(), n = self.molecules));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad("coupling weights must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    fn weight(&self, emitter: usize, absorber: usize) -> f64 {
        match &self.coupling {
            Coupling::Uniform => 1.0,
            Coupling::Table(w) => w[(emitter, absorber)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    excited: Vec<bool>,
    time: f64,
    quanta: usize,
}

impl GasState {
    pub fn from_levels(excited: Vec<bool>, time: f64) -> Self {
        let quanta = excited.iter().filter(|&&e| e).count();
        Self { excited, time, quanta }
    }

    pub fn molecules(&self) -> usize {
        self.excited.len()
    }

    pub fn is_excited(&self, id: usize) -> bool {
        self.excited[id]
    }

    pub fn levels(&self) -> &[bool] {
        &self.excited
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Tracked number of quanta.
    pub fn quanta(&self) -> usize {
        self.quanta
    }

    /// Recounts excited molecules and compares with the tracked total.
    pub fn check(&self) -> Result<()> {
        let counted = self.excited.iter().filter(|&&e| e).count();
        if counted != self.quanta {
            return Err(Error::Precondition(format!("tracked {} quanta, counted {counted}", self.quanta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactionEvent {
    pub emitter: usize,
    pub absorber: usize,
    pub t_emit: f64,
    pub t_absorb: f64,
    /// Normalized coupling weight of the winning absorber.
    pub winner_weight: f64,
    pub confirmation_size: usize,
}

impl TransactionEvent {
    /// Violations of the per-event invariants, empty if clean.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        // NaN times count as misordered
        if self.t_emit.partial_cmp(&self.t_absorb) != Some(std::cmp::Ordering::Less) {
            v.push(format!("t_e = {} is not before t_a = {}", self.t_emit, self.t_absorb));
        }
        if self.emitter == self.absorber {
            v.push(format!("emitter and absorber are both molecule {}", self.emitter));
        }
        if !(self.winner_weight > 0.0 && self.winner_weight <= 1.0) {
            v.push(format!("winner weight {} outside (0, 1]", self.winner_weight));
        }
        if self.confirmation_size == 0 {
            v.push("empty confirmation set".into());
        }
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLedger {
    events: Vec<TransactionEvent>,
}

const LEDGER_HEADER: [&str; 7] =
    ["event_index", "t_e", "t_a", "emitter", "absorber", "winner_weight", "confirmation_set_size"];

impl EventLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<TransactionEvent>) -> Self {
        Self { events }
    }

    pub fn push(&mut self, ev: TransactionEvent) {
        self.events.push(ev);
    }

    pub fn events(&self) -> &[TransactionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(LEDGER_HEADER).map_err(io)?;
        for (i, ev) in self.events.iter().enumerate() {
            w.write_record([
                i.to_string(),
                format_float(ev.t_emit),
                format_float(ev.t_absorb),
                ev.emitter.to_string(),
                ev.absorber.to_string(),
                format_float(ev.winner_weight),
                ev.confirmation_size.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a ledger; rows must appear in `event_index` order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().ne(LEDGER_HEADER.iter().copied()) {
            return Err(Error::Parse(format!("unexpected ledger header {:?}", headers.iter().collect::<Vec<_>>())));
        }
        let mut events = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| Error::Parse(format!("row {row}: missing {}", LEDGER_HEADER[k])))
            };
            let int = |k: usize| -> Result<usize> {
                let s = field(k)?;
                s.parse().map_err(|_| Error::Parse(format!("row {row}: bad {} {s:?}", LEDGER_HEADER[k])))
            };
            let float = |k: usize| -> Result<f64> {
                let s = field(k)?;
                s.parse().map_err(|_| Error::Parse(format!("row {row}: bad {} {s:?}", LEDGER_HEADER[k])))
            };
            if int(0)? != row {
                return Err(Error::Parse(format!("row {row}: event_index {} out of sequence", int(0)?)));
            }
            events.push(TransactionEvent {
                t_emit: float(1)?,
                t_absorb: float(2)?,
                emitter: int(3)?,
                absorber: int(4)?,
                winner_weight: float(5)?,
                confirmation_size: int(6)?,
            });
        }
        Ok(Self { events })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// Total quanta.
    pub quanta: usize,
    /// Excited molecules in the left half.
    pub left_count: usize,
    pub macro_entropy: f64,
}

/// State summary recorded at time 0 and after every absorption.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    /// The record in force at time `t` (the last one at or before `t`).
    pub fn at(&self, t: f64) -> Option<&TrajectoryPoint> {
        let idx = self.points.partition_point(|p| p.t <= t);
        idx.checked_sub(1).map(|i| &self.points[i])
    }

    /// Left-half counts sampled on a uniform grid `t0, t0 + dt, ...` up to `t1`.
    pub fn sample_left_counts(&self, t0: f64, t1: f64, dt: f64) -> Vec<f64> {
        let steps = ((t1 - t0) / dt).floor() as usize;
        (0..=steps)
            .filter_map(|i| self.at(t0 + i as f64 * dt).map(|p| p.left_count as f64))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["t", "n", "k", "S_macro"]).map_err(io)?;
        for p in &self.points {
            w.write_record([
                format_float(p.t),
                p.quanta.to_string(),
                p.left_count.to_string(),
                format_float(p.macro_entropy),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn init_gas(config: &GasConfig) -> Result<GasState> {
    config.validate()?;
    let mut excited = vec![false; config.molecules];
    match &config.layout {
        Some(ids) => ids.iter().for_each(|&i| excited[i] = true),
        None => excited[..config.initially_excited].iter_mut().for_each(|e| *e = true),
    }
    Ok(GasState::from_levels(excited, 0.0))
}

/// Samples the next transaction, or `None` when no emitter can find a
/// responding absorber.
pub fn next_event(state: &GasState, config: &GasConfig, rng: &mut SimRng) -> Result<Option<TransactionEvent>> {
    let (excited, ground): (Vec<usize>, Vec<usize>) =
        (0..state.molecules()).partition(|&i| state.is_excited(i));
    if excited.is_empty() || ground.is_empty() {
        return Ok(None);
    }
    let responders = |e: usize| -> Vec<(usize, f64)> {
        ground.iter().map(|&g| (g, config.weight(e, g))).filter(|&(_, w)| w > 0.0).collect()
    };
    if let Coupling::Table(_) = config.coupling {
        if excited.iter().all(|&e| responders(e).is_empty()) {
            return Ok(None);
        }
    }

    let total_rate = excited.len() as f64 * config.decay_rate;
    let mut t_emit = state.time();
    loop {
        t_emit += rng.exponential(total_rate);
        let emitter = excited[rng.index(excited.len())];
        let confirmations = responders(emitter);
        if confirmations.is_empty() {
            // offer with no confirmation: no transaction, the clock restarts
            continue;
        }
        let weights = ProbabilityVector::normalized(&confirmations.iter().map(|c| c.1).collect::<Vec<_>>())?;
        let winner = collapse_sample(weights.as_slice(), rng)?;
        return Ok(Some(TransactionEvent {
            emitter,
            absorber: confirmations[winner].0,
            t_emit,
            t_absorb: t_emit + config.delay(),
            winner_weight: weights[winner],
            confirmation_size: confirmations.len(),
        }));
    }
}

/// Moves one quantum from emitter to absorber.
pub fn apply_event(state: &GasState, ev: &TransactionEvent) -> Result<GasState> {
    let n = state.molecules();
    if ev.emitter >= n || ev.absorber >= n {
        return Err(Error::Precondition(format!("molecule id out of range for {n} molecules")));
    }
    if let Some(v) = ev.violations().into_iter().next() {
        return Err(Error::Precondition(v));
    }
    if !state.is_excited(ev.emitter) {
        return Err(Error::Precondition(format!("emitter {} is not excited", ev.emitter)));
    }
    if state.is_excited(ev.absorber) {
        return Err(Error::Precondition(format!("absorber {} is already excited", ev.absorber)));
    }
    if ev.t_emit < state.time() {
        return Err(Error::Precondition(format!("emission at {} precedes state time {}", ev.t_emit, state.time())));
    }
    let mut next = state.clone();
    next.excited[ev.emitter] = false;
    next.excited[ev.absorber] = true;
    next.time = ev.t_absorb;
    next.check()?;
    Ok(next)
}

/// Excited molecules with id below `N / 2`.
pub fn left_half_count(state: &GasState) -> usize {
    let half = state.molecules() / 2;
    state.levels()[..half].iter().filter(|&&e| e).count()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Boltzmann entropy `ln[C(L, k) C(N - L, n - k)]` of the macrostate with
/// `k` of the `n` quanta in the left half (`L = N / 2`).
pub fn macrostate_entropy(k: usize, quanta: usize, molecules: usize) -> Result<f64> {
    let left = molecules / 2;
    let right = molecules - left;
    if quanta > molecules || k > quanta || k > left || quanta - k > right {
        return Err(Error::OutOfRange(format!(
            "k = {k} impossible for {quanta} quanta in {molecules} molecules"
        )));
    }
    Ok((ln_choose(left, k) + ln_choose(right, quanta - k)).max(0.0))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub ledger: EventLedger,
    pub initial: GasState,
    pub final_state: GasState,
}

fn point(state: &GasState) -> Result<TrajectoryPoint> {
    let k = left_half_count(state);
    Ok(TrajectoryPoint {
        t: state.time(),
        quanta: state.quanta(),
        left_count: k,
        macro_entropy: macrostate_entropy(k, state.quanta(), state.molecules())?,
    })
}

/// Runs until `t_max` or until no transaction is possible, seeded from
/// `config.seed`.
pub fn run(config: &GasConfig) -> Result<RunOutput> {
    run_with_rng(config, &mut SimRng::new(config.seed))
}

/// Ensemble member `member`: stream `member` of `config.seed`.
pub fn run_member(config: &GasConfig, member: u64) -> Result<RunOutput> {
    run_with_rng(config, &mut SimRng::with_stream(config.seed, member))
}

pub fn run_with_rng(config: &GasConfig, rng: &mut SimRng) -> Result<RunOutput> {
    let initial = init_gas(config)?;
    let mut state = initial.clone();
    let mut ledger = EventLedger::new();
    let mut trajectory = Trajectory { points: vec![point(&state)?] };
    while let Some(ev) = next_event(&state, config, rng)? {
        if ev.t_absorb > config.t_max {
            break;
        }
        state = apply_event(&state, &ev)?;
        ledger.push(ev);
        trajectory.points.push(point(&state)?);
    }
    Ok(RunOutput { trajectory, ledger, initial, final_state: state })
}

/// Runs members `0..members` in parallel; results are in member order.
pub fn run_ensemble(config: &GasConfig, members: usize) -> Result<Vec<RunOutput>> {
    config.validate()?;
    (0..members as u64).into_par_iter().map(|m| run_member(config, m)).collect()
}

/// Rate estimates from observed transitions between labelled macrostates.
#[derive(Debug, Clone)]
pub struct EmpiricalRates {
    pub rates: RateMatrix,
    /// Labels never occupied; their columns are zero, not estimated.
    pub unvisited: Vec<usize>,
    /// Observed transition counts, `counts[(to, from)]`.
    pub counts: DMatrix<u64>,
    pub dwell: Vec<f64>,
}

/// Accumulates transition counts and dwell times over one or more runs.
#[derive(Debug, Clone)]
pub struct RateEstimator {
    counts: DMatrix<u64>,
    dwell: Vec<f64>,
    events: usize,
}

impl RateEstimator {
    pub fn new(labels: usize) -> Self {
        Self { counts: DMatrix::zeros(labels, labels), dwell: vec![0.0; labels], events: 0 }
    }

    pub fn labels(&self) -> usize {
        self.dwell.len()
    }

    /// Replays `ledger` from `initial` and books the time spent in each label
    /// up to `total_time`.
    pub fn observe<F>(&mut self, initial: &GasState, ledger: &EventLedger, partition: F, total_time: f64) -> Result<()>
    where
        F: Fn(&GasState) -> usize,
    {
        let label_of = |s: &GasState| -> Result<usize> {
            let l = partition(s);
            if l >= self.labels() {
                return Err(Error::OutOfRange(format!("label {l} >= {}", self.labels())));
            }
            Ok(l)
        };
        let mut state = initial.clone();
        let mut label = label_of(&state)?;
        let mut since = initial.time();
        let mut dwell = vec![0.0; self.labels()];
        let mut counts = DMatrix::<u64>::zeros(self.labels(), self.labels());
        for ev in ledger.events() {
            state = apply_event(&state, ev)?;
            let next = label_of(&state)?;
            dwell[label] += ev.t_absorb - since;
            since = ev.t_absorb;
            if next != label {
                counts[(next, label)] += 1;
            }
            label = next;
        }
        if total_time < since {
            return Err(Error::OutOfRange(format!("total time {total_time} precedes last event at {since}")));
        }
        dwell[label] += total_time - since;
        for (d, x) in self.dwell.iter_mut().zip(dwell) {
            *d += x;
        }
        self.counts += counts;
        self.events += ledger.len();
        Ok(())
    }

    pub fn estimate(&self) -> Result<EmpiricalRates> {
        let m = self.labels();
        let unvisited: Vec<usize> = (0..m).filter(|&j| self.dwell[j] <= 0.0).collect();
        let rates = DMatrix::from_fn(m, m, |i, j| {
            if i == j || self.dwell[j] <= 0.0 {
                0.0
            } else {
                self.counts[(i, j)] as f64 / self.dwell[j]
            }
        });
        Ok(EmpiricalRates {
            rates: RateMatrix::new(rates)?,
            unvisited,
            counts: self.counts.clone(),
            dwell: self.dwell.clone(),
        })
    }
}

/// `R[i][j] = (observed j -> i transitions) / (time spent in j)` for a
/// single run.
pub fn empirical_rates<F>(
    initial: &GasState,
    ledger: &EventLedger,
    partition: F,
    labels: usize,
    total_time: f64,
) -> Result<EmpiricalRates>
where
    F: Fn(&GasState) -> usize,
{
    if ledger.is_empty() {
        return Err(Error::OutOfRange("empty ledger".into()));
    }
    let mut est = RateEstimator::new(labels);
    est.observe(initial, ledger, partition, total_time)?;
    est.estimate()
}

/// Analytic k-chain rates for uniform coupling: returns
/// `(rate k -> k - 1, rate k -> k + 1)`.
///
/// A k-lowering event needs a left emitter (`k / n`) and a right ground
/// absorber (`(R - (n - k)) / (N - n)`); the total event rate is `n lambda`.
pub fn k_chain_rates(k: usize, quanta: usize, molecules: usize, decay_rate: f64) -> (f64, f64) {
    let left = molecules / 2;
    let right = molecules - left;
    let ground = molecules - quanta;
    if quanta == 0 || ground == 0 {
        return (0.0, 0.0);
    }
    let (k, n, g) = (k as f64, quanta as f64, ground as f64);
    let total = n * decay_rate;
    let right_ground = right as f64 - (n - k);
    let left_ground = left as f64 - k;
    let down = total * (k / n) * (right_ground / g);
    let up = total * ((n - k) / n) * (left_ground / g);
    (down, up)
}

/// One sample time of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    pub t: f64,
    /// Counts of members with left-half count `k`, indexed by `k`.
    pub histogram: Vec<u64>,
    /// Shannon entropy of the empirical `k` distribution.
    pub ensemble_entropy: f64,
    pub mean_left_count: f64,
    pub mean_macro_entropy: f64,
}

impl EnsembleSample {
    pub fn distribution(&self) -> Result<ProbabilityVector> {
        let total: u64 = self.histogram.iter().sum();
        ProbabilityVector::new(self.histogram.iter().map(|&c| c as f64 / total as f64).collect())
    }
}

/// Statistics of `k` across already-run ensemble members.
pub fn ensemble_series(runs: &[RunOutput], molecules: usize, times: &[f64]) -> Result<Vec<EnsembleSample>> {
    if runs.is_empty() {
        return Err(Error::OutOfRange("empty ensemble".into()));
    }
    let labels = molecules / 2 + 1;
    times
        .iter()
        .map(|&t| {
            let mut histogram = vec![0u64; labels];
            let mut sum_k = 0.0;
            let mut sum_s = 0.0;
            for r in runs {
                let p = r
                    .trajectory
                    .at(t)
                    .ok_or_else(|| Error::OutOfRange(format!("sample time {t} precedes the run")))?;
                histogram[p.left_count] += 1;
                sum_k += p.left_count as f64;
                sum_s += p.macro_entropy;
            }
            let n = runs.len() as f64;
            let dist = ProbabilityVector::new(histogram.iter().map(|&c| c as f64 / n).collect())?;
            Ok(EnsembleSample {
                t,
                ensemble_entropy: shannon_entropy(&dist),
                histogram,
                mean_left_count: sum_k / n,
                mean_macro_entropy: sum_s / n,
            })
        })
        .collect()
}

/// Runs `members` seeds (at least 100) and samples the ensemble.
pub fn ensemble_entropy_series(config: &GasConfig, members: usize, times: &[f64]) -> Result<Vec<EnsembleSample>> {
    if members < 100 {
        return Err(Error::OutOfRange(format!("ensemble needs at least 100 members, got {members}")));
    }
    let runs = run_ensemble(config, members)?;
    ensemble_series(&runs, config.molecules, times)
}

/// Sample autocorrelation at `lag` (in samples).
pub fn autocorrelation(samples: &[f64], lag: usize) -> f64 {
    let n = samples.len();
    if lag >= n {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..n - lag).map(|i| (samples[i] - mean) * (samples[i + lag] - mean)).sum();
    cov / var
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `t_e >= t_a`, or emission times out of order.
    Ordering,
    /// A molecule emitted while ground or absorbed while excited.
    Precondition,
    /// Quanta count changed.
    Conservation,
    /// Malformed event (self-transfer, weight outside (0, 1], empty set).
    Malformed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub event_index: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub events: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Initial levels implied by a ledger: a molecule whose first appearance is
/// as an emitter started excited, every other molecule started ground.
pub fn infer_initial_state(ledger: &EventLedger) -> GasState {
    let size = ledger.events().iter().map(|e| e.emitter.max(e.absorber) + 1).max().unwrap_or(0);
    let mut first: Vec<Option<bool>> = vec![None; size];
    for ev in ledger.events() {
        first[ev.emitter].get_or_insert(true);
        first[ev.absorber].get_or_insert(false);
    }
    GasState::from_levels(first.into_iter().map(|l| l.unwrap_or(false)).collect(), 0.0)
}

/// Checks a ledger against the transaction invariants by replaying it.
///
/// Without an `initial` state the starting levels come from
/// [`infer_initial_state`], so only inconsistencies within the ledger
/// itself can be detected.
pub fn audit_ledger(ledger: &EventLedger, initial: Option<&GasState>) -> AuditReport {
    let inferred;
    let initial = match initial {
        Some(s) => s,
        None => {
            inferred = infer_initial_state(ledger);
            &inferred
        }
    };
    let mut violations = Vec::new();
    let mut flag = |i: usize, kind, detail: String| violations.push(Violation { event_index: i, kind, detail });

    let n = initial.molecules();
    let mut level = initial.levels().to_vec();
    let quanta0 = initial.quanta();
    let mut quanta = quanta0;
    let mut prev_emit = f64::NEG_INFINITY;

    for (i, ev) in ledger.events().iter().enumerate() {
        for v in ev.violations() {
            let kind = if v.contains("not before") { ViolationKind::Ordering } else { ViolationKind::Malformed };
            flag(i, kind, v);
        }
        if ev.t_emit < prev_emit {
            flag(i, ViolationKind::Ordering, format!("emission at {} before previous emission at {prev_emit}", ev.t_emit));
        }
        prev_emit = ev.t_emit;
        if ev.emitter >= n || ev.absorber >= n {
            flag(i, ViolationKind::Precondition, format!("molecule id outside 0..{n}"));
            continue;
        }
        if !level[ev.emitter] {
            flag(i, ViolationKind::Precondition, format!("emitter {} is ground", ev.emitter));
        } else {
            level[ev.emitter] = false;
            quanta -= 1;
        }
        if level[ev.absorber] {
            flag(i, ViolationKind::Precondition, format!("absorber {} is excited", ev.absorber));
        } else {
            level[ev.absorber] = true;
            quanta += 1;
        }
        if quanta != quanta0 {
            flag(i, ViolationKind::Conservation, format!("{quanta} quanta after event, started with {quanta0}"));
        }
    }
    AuditReport { events: ledger.len(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, n0: usize) -> GasConfig {
        GasConfig::new(n, n0, 1.0, 10.0, 1)
    }

    #[test]
    fn init_layouts() {
        assert!(init_gas(&cfg(4, 0)).unwrap().levels().iter().all(|e| !e));
        assert!(init_gas(&cfg(4, 4)).unwrap().levels().iter().all(|&e| e));
        let s = init_gas(&cfg(100, 50)).unwrap();
        assert!((0..50).all(|i| s.is_excited(i)) && (50..100).all(|i| !s.is_excited(i)));
        assert_eq!(s.time(), 0.0);
        assert_eq!(left_half_count(&s), 50);

        let mut c = cfg(4, 2);
        c.layout = Some(vec![3, 1]);
        let s = init_gas(&c).unwrap();
        assert_eq!(s.levels(), &[false, true, false, true]);
    }

    #[test]
    fn invalid_configs() {
        assert!(init_gas(&cfg(4, 5)).is_err());
        let mut c = cfg(4, 2);
        c.decay_rate = 0.0;
        assert!(init_gas(&c).is_err());
        let mut c = cfg(4, 2);
        c.delay = Some(0.0);
        assert!(init_gas(&c).is_err());
        let mut c = cfg(4, 2);
        c.layout = Some(vec![0, 0]);
        assert!(init_gas(&c).is_err());
        let mut c = cfg(4, 2);
        c.coupling = Coupling::Table(DMatrix::zeros(3, 3));
        assert!(init_gas(&c).is_err());
        assert!(init_gas(&cfg(0, 0)).is_err());
    }

    #[test]
    fn default_delay_is_tiny_and_positive() {
        let mut c = cfg(2, 1);
        c.decay_rate = 4.0;
        assert_eq!(c.delay(), 2.5e-7);
    }

    #[test]
    fn single_ground_molecule_always_wins() {
        let c = cfg(2, 1);
        let s = init_gas(&c).unwrap();
        let mut rng = SimRng::new(3);
        for _ in 0..100 {
            let ev = next_event(&s, &c, &mut rng).unwrap().unwrap();
            assert_eq!((ev.emitter, ev.absorber), (0, 1));
            assert_eq!(ev.winner_weight, 1.0);
            assert_eq!(ev.confirmation_size, 1);
            assert!(ev.t_emit < ev.t_absorb);
        }
    }

    #[test]
    fn no_event_without_absorber_or_emitter() {
        let mut rng = SimRng::new(3);
        for n0 in [0, 5] {
            let c = cfg(5, n0);
            assert_eq!(next_event(&init_gas(&c).unwrap(), &c, &mut rng).unwrap(), None);
        }
    }

    #[test]
    fn winners_uniform_over_confirmation_set() {
        let c = cfg(4, 1);
        let s = init_gas(&c).unwrap();
        let mut rng = SimRng::new(99);
        let trials = 100_000;
        let mut wins = [0u64; 4];
        for _ in 0..trials {
            let ev = next_event(&s, &c, &mut rng).unwrap().unwrap();
            assert_eq!(ev.confirmation_size, 3);
            assert!((ev.winner_weight - 1.0 / 3.0).abs() < 1e-15);
            wins[ev.absorber] += 1;
        }
        assert_eq!(wins[0], 0);
        let p = 1.0 / 3.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        for &w in &wins[1..] {
            assert!((w as f64 / trials as f64 - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn coupling_table_steers_winner() {
        let mut c = cfg(3, 1);
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 2)] = 1.0;
        c.coupling = Coupling::Table(w);
        let s = init_gas(&c).unwrap();
        let mut rng = SimRng::new(4);
        for _ in 0..50 {
            let ev = next_event(&s, &c, &mut rng).unwrap().unwrap();
            assert_eq!(ev.absorber, 2);
            assert_eq!(ev.confirmation_size, 1);
        }
        // nobody couples to molecule 0 as an absorber: once 0 is ground and 2 holds
        // the quantum, no transaction is possible
        let after = GasState::from_levels(vec![false, false, true], 1.0);
        assert_eq!(next_event(&after, &c, &mut rng).unwrap(), None);
    }

    #[test]
    fn apply_swaps_levels_and_conserves() {
        let s = init_gas(&cfg(3, 1)).unwrap();
        let ev = TransactionEvent {
            emitter: 0,
            absorber: 2,
            t_emit: 0.5,
            t_absorb: 0.6,
            winner_weight: 0.5,
            confirmation_size: 2,
        };
        let next = apply_event(&s, &ev).unwrap();
        assert_eq!(next.levels(), &[false, false, true]);
        assert_eq!(next.quanta(), s.quanta());
        assert_eq!(next.time(), 0.6);
        assert!(matches!(apply_event(&next, &ev), Err(Error::Precondition(_))));
    }

    #[test]
    fn apply_rejects_bad_events() {
        let s = init_gas(&cfg(3, 1)).unwrap();
        let ok = TransactionEvent {
            emitter: 0,
            absorber: 1,
            t_emit: 1.0,
            t_absorb: 1.1,
            winner_weight: 1.0,
            confirmation_size: 1,
        };
        let cases = [
            TransactionEvent { t_absorb: 1.0, ..ok },
            TransactionEvent { absorber: 0, ..ok },
            TransactionEvent { winner_weight: 0.0, ..ok },
            TransactionEvent { emitter: 1, absorber: 2, ..ok },
            TransactionEvent { absorber: 7, ..ok },
        ];
        for ev in cases {
            assert!(apply_event(&s, &ev).is_err(), "{ev:?}");
        }
    }

    #[test]
    fn empty_runs() {
        for n0 in [0, 6] {
            let out = run(&GasConfig::new(6, n0, 1.0, 100.0, 5)).unwrap();
            assert!(out.ledger.is_empty());
            assert_eq!(out.trajectory.points().len(), 1);
        }
    }

    #[test]
    fn two_body_exchange_alternates() {
        let mut c = GasConfig::new(2, 1, 1.0, 50.0, 8);
        c.delay = Some(0.01);
        let out = run(&c).unwrap();
        assert!(out.ledger.len() > 10);
        for (i, ev) in out.ledger.events().iter().enumerate() {
            assert_eq!(ev.emitter, i % 2);
            assert_eq!(ev.absorber, 1 - i % 2);
            assert!(ev.t_emit < ev.t_absorb);
            assert!((ev.t_absorb - ev.t_emit - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn run_is_deterministic() {
        let c = GasConfig::new(20, 10, 1.0, 20.0, 1234);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.ledger, b.ledger);
        let mut other = c.clone();
        other.seed = 1235;
        assert_ne!(run(&other).unwrap().ledger, a.ledger);
        assert_eq!(run_member(&c, 3).unwrap().ledger, run_ensemble(&c, 5).unwrap()[3].ledger);
    }

    #[test]
    fn trajectory_lookup() {
        let out = run(&GasConfig::new(10, 5, 1.0, 5.0, 2)).unwrap();
        let pts = out.trajectory.points();
        assert!(pts.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(out.trajectory.at(0.0).unwrap().left_count, 5);
        assert_eq!(out.trajectory.at(-1.0), None);
        let last = pts.last().unwrap();
        assert_eq!(out.trajectory.at(1e9), Some(last));
    }

    #[test]
    fn macrostate_entropy_examples() {
        assert!(macrostate_entropy(2, 2, 4).unwrap().abs() < 1e-12);
        assert!((macrostate_entropy(1, 2, 4).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(macrostate_entropy(3, 2, 4).is_err());
        assert!(macrostate_entropy(0, 3, 4).is_err()); // 3 quanta cannot fit in the right half
        // exhaustive scan for N = 100, n = 50
        let best = (0..=50)
            .max_by(|&a, &b| macrostate_entropy(a, 50, 100).unwrap().total_cmp(&macrostate_entropy(b, 50, 100).unwrap()))
            .unwrap();
        assert_eq!(best, 25);
    }

    #[test]
    fn two_state_rates_recovered() {
        let mut c = GasConfig::new(2, 1, 1.0, 2000.0, 17);
        c.delay = Some(1e-6);
        let out = run(&c).unwrap();
        let which = |s: &GasState| if s.is_excited(0) { 0 } else { 1 };
        let est = empirical_rates(&out.initial, &out.ledger, which, 2, c.t_max).unwrap();
        for (from, to) in [(0, 1), (1, 0)] {
            let r = est.rates.rate(from, to);
            assert!((r - 1.0).abs() < 0.1, "rate {from}->{to} = {r}");
        }
        assert!(est.unvisited.is_empty());
    }

    #[test]
    fn unobserved_pairs_have_zero_rate() {
        let mut c = GasConfig::new(2, 1, 1.0, 10.0, 17);
        c.delay = Some(1e-3);
        let out = run(&c).unwrap();
        // three labels, the third never occupied
        let which = |s: &GasState| if s.is_excited(0) { 0 } else { 1 };
        let est = empirical_rates(&out.initial, &out.ledger, which, 3, c.t_max).unwrap();
        assert_eq!(est.rates.rate(0, 2), 0.0);
        assert_eq!(est.rates.rate(2, 0), 0.0);
        assert_eq!(est.unvisited, vec![2]);
        assert!(empirical_rates(&out.initial, &EventLedger::new(), which, 3, 1.0).is_err());
    }

    #[test]
    fn analytic_chain_rates_small_case() {
        // N = 4, n = 2, k = 1: emitter left w.p. 1/2, right ground among 2 ground = 1/2
        let (down, up) = k_chain_rates(1, 2, 4, 1.0);
        assert!((down - 0.5).abs() < 1e-15 && (up - 0.5).abs() < 1e-15);
        let (down, up) = k_chain_rates(2, 2, 4, 1.0);
        assert!((down - 2.0).abs() < 1e-15 && up == 0.0);
    }

    #[test]
    fn ledger_csv_round_trip() {
        let out = run(&GasConfig::new(6, 3, 1.0, 3.0, 9)).unwrap();
        let mut buf = Vec::new();
        out.ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("event_index,t_e,t_a,emitter,absorber,winner_weight,confirmation_set_size\n"));
        assert_eq!(EventLedger::read_csv(buf.as_slice()).unwrap(), out.ledger);
        assert!(EventLedger::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn audit_clean_and_dirty() {
        let out = run(&GasConfig::new(10, 4, 1.0, 20.0, 3)).unwrap();
        assert!(audit_ledger(&out.ledger, Some(&out.initial)).is_clean());
        assert!(audit_ledger(&out.ledger, None).is_clean());

        let mut events = out.ledger.events().to_vec();
        events[1].t_absorb = events[1].t_emit;
        let last = *events.last().unwrap();
        events.push(last); // replay of a spent emission
        let report = audit_ledger(&EventLedger::from_events(events), Some(&out.initial));
        assert!(report.count(ViolationKind::Ordering) >= 1);
        assert!(report.count(ViolationKind::Precondition) >= 1);
    }

    #[test]
    fn autocorrelation_basics() {
        let alternating: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(autocorrelation(&alternating, 1) < -0.9);
        assert!(autocorrelation(&alternating, 2) > 0.9);
        assert_eq!(autocorrelation(&[1.0, 1.0, 1.0], 1), 0.0);
    }
}
