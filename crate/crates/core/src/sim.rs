//! Slot-level simulation of the whole system for either access scheme.
//!
//! Every node is a two-state chain (idle, backlogged) without a MAC buffer.
//! At the start of each slot the backlog count `k` is known to every node
//! and selects the slot parameters from the scheme. Backlogged nodes
//! transmit with probability `p_k`, the receiver runs SIC over fresh
//! Rayleigh gains, and every transmitter returns to idle at the end of the
//! slot whatever the outcome. A node that was backlogged when the slot
//! started drops every message arriving during the slot; an idle node keeps
//! only the last arrival of the slot and becomes backlogged at its end.
//!
//! Metrics only count slots that start at or after the warm-up time. Single
//! runs report batch-means standard errors; [`replicate`] reports standard
//! errors across independent replications.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::backlog_prob;
use crate::config::SystemConfig;
use crate::math::mean_stderr;
use crate::policy::{fixed_params, PolicyTable, Scheme, SchemeParams};
use crate::sic::SicReceiver;
use crate::{Error, Result};

/// Complete batches kept before adjacent pairs are merged.
const MAX_BATCHES: usize = 32;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scheme: Scheme,
    /// Simulated time in seconds.
    pub horizon: f64,
    /// Initial stretch of simulated time excluded from the metrics.
    pub warmup: f64,
    pub seed: u64,
    /// Minimum number of post-warm-up slots; the run continues past
    /// `horizon` until it is reached.
    pub min_slots: u64,
    pub system: SystemConfig,
}

impl SimConfig {
    /// Warm-up defaults to 10% of the horizon.
    pub fn new(system: SystemConfig, scheme: Scheme, horizon: f64, seed: u64) -> Self {
        Self {
            scheme,
            horizon,
            warmup: 0.1 * horizon,
            seed,
            min_slots: 0,
            system,
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_min_slots(mut self, min_slots: u64) -> Self {
        self.min_slots = min_slots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::config(format!(
                "warmup {} must lie in [0, horizon {})",
                self.warmup, self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeMode {
    Idle,
    Backlogged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeState {
    pub mode: NodeMode,
    /// Generation time of the held message; meaningful when backlogged.
    pub pending_gen_time: f64,
    /// Generation time of the newest message delivered to the base
    /// station. The base station starts out with a fresh update (time 0).
    pub last_delivered_gen_time: f64,
}

/// Whole-run message accounting, warm-up included.
///
/// Every generated message ends up in exactly one of the other buckets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MessageLedger {
    pub generated: u64,
    pub delivered: u64,
    pub decode_failures: u64,
    /// Arrived while the node was backlogged or transmitting.
    pub dropped_engaged: u64,
    /// Superseded by a later arrival within the same slot.
    pub dropped_overwritten: u64,
    /// Held by a backlogged node when the run stopped.
    pub in_flight: u64,
}

impl MessageLedger {
    pub fn is_balanced(&self) -> bool {
        self.generated
            == self.delivered
                + self.decode_failures
                + self.dropped_engaged
                + self.dropped_overwritten
                + self.in_flight
    }

    fn add(&mut self, o: &Self) {
        self.generated += o.generated;
        self.delivered += o.delivered;
        self.decode_failures += o.decode_failures;
        self.dropped_engaged += o.dropped_engaged;
        self.dropped_overwritten += o.dropped_overwritten;
        self.in_flight += o.in_flight;
    }
}

/// Observable metrics of a simulation (or of a set of replications).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    /// Decoded fraction of transmitted packets.
    pub pdr: f64,
    pub pdr_stderr: f64,
    /// Delivered fraction of generated messages.
    pub pdr_per_message: f64,
    pub mean_access_delay: f64,
    pub delay_stderr: f64,
    /// Per-node delivered bit rate.
    pub throughput_bps: f64,
    pub throughput_stderr: f64,
    pub normalized_throughput: f64,
    pub nthr_stderr: f64,
    pub mean_aoi: f64,
    pub aoi_stderr: f64,
    /// Fraction of time with at least one transmission on air.
    pub cbr: f64,
    pub cbr_stderr: f64,
    pub slots: u64,
    pub transmissions: u64,
    pub successes: u64,
    /// Length of the measurement window in seconds.
    pub window: f64,
    /// Some node had no delivery inside the window, so its age average is
    /// a lower bound.
    pub censored: bool,
    pub ledger: MessageLedger,
    pub replications: usize,
}

/// One transmission in a slot, as reported to a [`SlotObserver`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRecord {
    pub node: usize,
    pub gen_time: f64,
    pub decoded: bool,
}

#[derive(Debug, Clone)]
pub struct SlotRecord<'a> {
    pub index: u64,
    pub start: f64,
    pub end: f64,
    pub backlog: usize,
    pub params: SchemeParams,
    pub transmissions: &'a [TxRecord],
    pub in_window: bool,
}

/// Hook for inspecting every simulated slot.
pub trait SlotObserver {
    fn on_slot(&mut self, slot: &SlotRecord<'_>);
}

impl SlotObserver for () {
    fn on_slot(&mut self, _: &SlotRecord<'_>) {}
}

/// Additive per-batch sums.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    slots: u64,
    time: f64,
    busy_time: f64,
    transmissions: u64,
    successes: u64,
    delay_sum: f64,
    generated: u64,
    age_area: f64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.slots += o.slots;
        self.time += o.time;
        self.busy_time += o.busy_time;
        self.transmissions += o.transmissions;
        self.successes += o.successes;
        self.delay_sum += o.delay_sum;
        self.generated += o.generated;
        self.age_area += o.age_area;
    }

    fn pdr(&self) -> f64 {
        self.successes as f64 / self.transmissions as f64
    }

    fn delay(&self) -> f64 {
        self.delay_sum / self.transmissions as f64
    }

    fn delivered_rate(&self, n: usize) -> f64 {
        self.successes as f64 / (n as f64 * self.time)
    }

    fn aoi(&self, n: usize) -> f64 {
        self.age_area / (n as f64 * self.time)
    }

    fn cbr(&self) -> f64 {
        self.busy_time / self.time
    }
}

/// Batch means over a run of unknown length: whenever `MAX_BATCHES`
/// batches are complete, adjacent pairs merge and the batch size doubles.
#[derive(Debug)]
struct Batches {
    done: Vec<Tally>,
    current: Tally,
    size: u64,
}

impl Batches {
    fn new() -> Self {
        Self {
            done: Vec::with_capacity(MAX_BATCHES),
            current: Tally::default(),
            size: 1,
        }
    }

    fn push(&mut self, slot: &Tally) {
        self.current.add(slot);
        if self.current.slots == self.size {
            self.done.push(std::mem::take(&mut self.current));
            if self.done.len() == MAX_BATCHES {
                self.done = self
                    .done
                    .chunks(2)
                    .map(|pair| {
                        let mut t = pair[0];
                        t.add(&pair[1]);
                        t
                    })
                    .collect();
                self.size *= 2;
            }
        }
    }

    fn total(&self) -> Tally {
        let mut t = self.current;
        for b in &self.done {
            t.add(b);
        }
        t
    }

    fn stderr(&self, f: impl Fn(&Tally) -> f64) -> f64 {
        let values: Vec<f64> = self.done.iter().map(f).filter(|v| v.is_finite()).collect();
        if values.len() < 2 {
            return f64::NAN;
        }
        mean_stderr(&values).1
    }
}

/// Runs one simulation.
pub fn run(cfg: &SimConfig) -> Result<SimMetrics> {
    run_observed(cfg, &mut ())
}

/// Runs one simulation, reporting every slot to `observer`.
pub fn run_observed<O: SlotObserver + ?Sized>(
    cfg: &SimConfig,
    observer: &mut O,
) -> Result<SimMetrics> {
    cfg.validate()?;
    let sys = &cfg.system;
    let n = sys.n();
    let lambda = sys.lambda();
    let policy = PolicyTable::new(cfg.scheme, sys)?;
    let mut receivers: Vec<Option<SicReceiver>> = vec![None; n + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ledger = MessageLedger::default();

    // Start every node from the fixed-scheme stationary law: backlogged
    // with probability b, holding the last arrival of the previous slot.
    let t_star = fixed_params(sys)?.slot;
    let b0 = backlog_prob(lambda, t_star)?;
    let q0 = -(-lambda * t_star).exp_m1();
    let mut nodes: Vec<NodeState> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < b0 {
                let u: f64 = rng.random();
                let back = -(-u * q0).ln_1p() / lambda;
                ledger.generated += 1;
                NodeState {
                    mode: NodeMode::Backlogged,
                    pending_gen_time: -back,
                    last_delivered_gen_time: 0.0,
                }
            } else {
                NodeState {
                    mode: NodeMode::Idle,
                    pending_gen_time: f64::NAN,
                    last_delivered_gen_time: 0.0,
                }
            }
        })
        .collect();
    let mut backlog = nodes
        .iter()
        .filter(|s| s.mode == NodeMode::Backlogged)
        .count();
    let mut delivered_in_window = vec![false; n];
    let mut gen_sum: f64 = 0.0;

    let mut batches = Batches::new();
    let mut tx_nodes: Vec<usize> = Vec::with_capacity(n);
    let mut gains: Vec<f64> = Vec::with_capacity(n);
    let mut flags: Vec<bool> = Vec::with_capacity(n);
    let mut records: Vec<TxRecord> = Vec::with_capacity(n);
    let mut pickups: Vec<(usize, f64)> = Vec::with_capacity(n);

    let mut t = 0.0f64;
    let mut index = 0u64;
    let mut window_start = f64::NAN;
    while !(t >= cfg.horizon && batches.total_slots() >= cfg.min_slots) {
        let start_backlog = backlog;
        let params = policy.get(backlog);
        let slot = params.slot;
        let end = t + slot;
        let in_window = t >= cfg.warmup;
        if in_window && window_start.is_nan() {
            window_start = t;
        }

        tx_nodes.clear();
        gains.clear();
        for (i, node) in nodes.iter().enumerate() {
            if node.mode == NodeMode::Backlogged
                && (params.p >= 1.0 || rng.random::<f64>() < params.p)
            {
                tx_nodes.push(i);
                gains.push(rng.sample(Exp1));
            }
        }
        let rx = receivers[backlog].get_or_insert_with(|| {
            SicReceiver::new(params.gamma, sys.epsilon()).expect("policy threshold is valid")
        });
        rx.decode_into(&gains, &mut rng, &mut flags)?;

        let mut tally = Tally {
            slots: 1,
            time: slot,
            busy_time: if tx_nodes.is_empty() { 0.0 } else { slot },
            ..Tally::default()
        };
        if in_window {
            // Every age grows linearly through the slot; resets land at its end.
            tally.age_area = slot * (n as f64 * t - gen_sum) + 0.5 * n as f64 * slot * slot;
        }

        // Arrivals during the slot.
        pickups.clear();
        let engaged_load = lambda * slot;
        let engaged_arrivals = Poisson::new(engaged_load).ok();
        for (i, node) in nodes.iter().enumerate() {
            let arrived = if node.mode == NodeMode::Backlogged {
                let dropped = engaged_arrivals.map_or(0, |d| d.sample(&mut rng) as u64);
                ledger.dropped_engaged += dropped;
                dropped
            } else {
                // Look back from the slot end: the gap to the last arrival
                // is exponential; earlier arrivals are Poisson over the rest.
                let back: f64 = rng.sample::<f64, _>(Exp1) / lambda;
                if back <= slot {
                    let earlier = Poisson::new(lambda * (slot - back))
                        .map_or(0, |d| d.sample(&mut rng) as u64);
                    ledger.dropped_overwritten += earlier;
                    pickups.push((i, end - back));
                    earlier + 1
                } else {
                    0
                }
            };
            ledger.generated += arrived;
            if in_window {
                tally.generated += arrived;
            }
        }

        records.clear();
        for (&i, &ok) in tx_nodes.iter().zip(flags.iter()) {
            let node = &mut nodes[i];
            let gen = node.pending_gen_time;
            records.push(TxRecord {
                node: i,
                gen_time: gen,
                decoded: ok,
            });
            if in_window {
                tally.transmissions += 1;
                tally.delay_sum += end - gen;
            }
            if ok {
                ledger.delivered += 1;
                gen_sum += gen - node.last_delivered_gen_time;
                node.last_delivered_gen_time = gen;
                if in_window {
                    tally.successes += 1;
                    delivered_in_window[i] = true;
                }
            } else {
                ledger.decode_failures += 1;
            }
            node.mode = NodeMode::Idle;
            node.pending_gen_time = f64::NAN;
        }
        for &(i, gen) in &pickups {
            nodes[i].mode = NodeMode::Backlogged;
            nodes[i].pending_gen_time = gen;
        }
        backlog = backlog - tx_nodes.len() + pickups.len();
        debug_assert!(backlog <= n);

        observer.on_slot(&SlotRecord {
            index,
            start: t,
            end,
            backlog: start_backlog,
            params,
            transmissions: &records,
            in_window,
        });

        if in_window {
            batches.push(&tally);
        }
        t = end;
        index += 1;
        if index.is_multiple_of(1024) {
            gen_sum = nodes.iter().map(|s| s.last_delivered_gen_time).sum();
        }
    }
    ledger.in_flight = backlog as u64;

    let total = batches.total();
    let bits = sys.packet_bits() as f64;
    let rate = total.delivered_rate(n);
    Ok(SimMetrics {
        pdr: total.pdr(),
        pdr_stderr: batches.stderr(Tally::pdr),
        pdr_per_message: total.successes as f64 / total.generated as f64,
        mean_access_delay: total.delay(),
        delay_stderr: batches.stderr(Tally::delay),
        throughput_bps: bits * rate,
        throughput_stderr: batches.stderr(|b| bits * b.delivered_rate(n)),
        normalized_throughput: rate / lambda,
        nthr_stderr: batches.stderr(|b| b.delivered_rate(n) / lambda),
        mean_aoi: total.aoi(n),
        aoi_stderr: batches.stderr(|b| b.aoi(n)),
        cbr: total.cbr(),
        cbr_stderr: batches.stderr(Tally::cbr),
        slots: total.slots,
        transmissions: total.transmissions,
        successes: total.successes,
        window: total.time,
        censored: delivered_in_window.iter().any(|d| !d),
        ledger,
        replications: 1,
    })
}

impl Batches {
    fn total_slots(&self) -> u64 {
        self.current.slots + self.done.iter().map(|b| b.slots).sum::<u64>()
    }
}

/// Runs `replications` independent simulations with seeds `seed, seed+1, …`
/// and aggregates them. Means are averages of the per-run values; standard
/// errors are taken across runs. A single replication is returned as is.
pub fn replicate(cfg: &SimConfig, replications: usize) -> Result<Replicated> {
    if replications == 0 {
        return Err(Error::config("replications must be at least 1"));
    }
    let runs: Vec<SimMetrics> = (0..replications as u64)
        .into_par_iter()
        .map(|r| run(&cfg.clone().with_seed(cfg.seed.wrapping_add(r))))
        .collect::<Result<_>>()?;
    let aggregate = aggregate(&runs);
    Ok(Replicated { aggregate, runs })
}

#[derive(Debug, Clone)]
pub struct Replicated {
    pub aggregate: SimMetrics,
    pub runs: Vec<SimMetrics>,
}

fn aggregate(runs: &[SimMetrics]) -> SimMetrics {
    if runs.len() == 1 {
        return runs[0].clone();
    }
    let stat = |f: fn(&SimMetrics) -> f64| {
        let v: Vec<f64> = runs.iter().map(f).collect();
        mean_stderr(&v)
    };
    let (pdr, pdr_stderr) = stat(|m| m.pdr);
    let (delay, delay_stderr) = stat(|m| m.mean_access_delay);
    let (thr, thr_stderr) = stat(|m| m.throughput_bps);
    let (nthr, nthr_stderr) = stat(|m| m.normalized_throughput);
    let (aoi, aoi_stderr) = stat(|m| m.mean_aoi);
    let (cbr, cbr_stderr) = stat(|m| m.cbr);
    let mut ledger = MessageLedger::default();
    for r in runs {
        ledger.add(&r.ledger);
    }
    SimMetrics {
        pdr,
        pdr_stderr,
        pdr_per_message: stat(|m| m.pdr_per_message).0,
        mean_access_delay: delay,
        delay_stderr,
        throughput_bps: thr,
        throughput_stderr: thr_stderr,
        normalized_throughput: nthr,
        nthr_stderr,
        mean_aoi: aoi,
        aoi_stderr,
        cbr,
        cbr_stderr,
        slots: runs.iter().map(|m| m.slots).sum(),
        transmissions: runs.iter().map(|m| m.transmissions).sum(),
        successes: runs.iter().map(|m| m.successes).sum(),
        window: runs.iter().map(|m| m.window).sum(),
        censored: runs.iter().any(|m| m.censored),
        ledger,
        replications: runs.len(),
    }
}

/// Deliveries seen by the base station from one node: the generation time
/// it starts with and `(delivery time, generation time)` pairs in time
/// order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgeProcess {
    pub initial_gen_time: f64,
    pub resets: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiEstimate {
    pub mean: f64,
    /// Some node had no delivery inside the window.
    pub censored: bool,
}

/// Exact time-average of the sawtooth age over `[start, end]`, averaged
/// across nodes. The age of a node at time `t` is `t` minus the generation
/// time of the newest message delivered up to `t`.
pub fn measure_aoi(nodes: &[AgeProcess], start: f64, end: f64) -> Result<AoiEstimate> {
    if nodes.is_empty() {
        return Err(Error::domain("no age processes"));
    }
    if !(end > start) {
        return Err(Error::domain(format!("empty window [{start}, {end}]")));
    }
    // Area under t - g between a and b.
    let area = |g: f64, a: f64, b: f64| ((b - g).powi(2) - (a - g).powi(2)) / 2.0;
    let mut total = 0.0;
    let mut censored = false;
    for p in nodes {
        let mut g = p.initial_gen_time;
        let mut cursor = start;
        let mut any = false;
        for &(at, gen) in &p.resets {
            if at > end {
                break;
            }
            if at > start {
                total += area(g, cursor, at);
                cursor = at;
                any = true;
            }
            g = g.max(gen);
        }
        total += area(g, cursor, end);
        censored |= !any;
    }
    Ok(AoiEstimate {
        mean: total / (nodes.len() as f64 * (end - start)),
        censored,
    })
}
