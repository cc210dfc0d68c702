//! Seeded Monte Carlo simulation of online selection.
//!
//! Replication `r` draws its uniforms from a ChaCha8 stream keyed by
//! `(seed, r)`, so every replication is reproducible on its own and the
//! results do not depend on how replications are scheduled across threads.
//! Replications are grouped into fixed-size chunks; each chunk accumulates
//! its moments in order and chunks are merged in index order.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_unit, Error, Result};
use crate::family::{AdaptiveFamily, Mirrored, SelectionRule};
use crate::format::num;

const CHUNK: usize = 256;

/// One realized run of a selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub n: usize,
    pub initial_state: f64,
    /// 1-based, strictly increasing.
    pub selected_indices: Vec<usize>,
    pub selected_values: Vec<f64>,
    pub final_state: f64,
}

impl SelectionTrace {
    pub fn count(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_trace_csv(out, self.selected_indices.iter().copied().zip(self.selected_values.iter().copied()))
    }
}

fn write_trace_csv<W: Write>(out: &mut W, rows: impl Iterator<Item = (usize, f64)>) -> io::Result<()> {
    writeln!(out, "index,value")?;
    for (i, v) in rows {
        writeln!(out, "{i},{}", num(v))?;
    }
    Ok(())
}

/// Online state of a rule over a horizon of `n` observations.
struct Selector<'a, R: ?Sized> {
    rule: &'a R,
    state: f64,
    remaining: usize,
}

impl<'a, R: SelectionRule + ?Sized> Selector<'a, R> {
    fn new(rule: &'a R, n: usize, s0: f64) -> Self {
        Selector {
            rule,
            state: s0,
            remaining: n,
        }
    }

    #[inline]
    fn offer(&mut self, x: f64) -> bool {
        debug_assert!(self.remaining > 0);
        let take = self.rule.accepts(self.remaining, self.state, x);
        if take {
            self.state = x;
        }
        self.remaining -= 1;
        take
    }
}

/// Deterministic replay of `rule` on `values` from initial state `s0`.
pub fn run_policy<R: SelectionRule + ?Sized>(rule: &R, values: &[f64], s0: f64) -> Result<SelectionTrace> {
    check_unit("initial state", s0)?;
    for &x in values {
        check_unit("observation", x)?;
    }
    Ok(replay(rule, values, s0))
}

fn replay<R: SelectionRule + ?Sized>(rule: &R, values: &[f64], s0: f64) -> SelectionTrace {
    let mut sel = Selector::new(rule, values.len(), s0);
    let mut selected_indices = Vec::new();
    let mut selected_values = Vec::new();
    for (i, &x) in values.iter().enumerate() {
        if sel.offer(x) {
            selected_indices.push(i + 1);
            selected_values.push(x);
        }
    }
    SelectionTrace {
        n: values.len(),
        initial_state: s0,
        selected_indices,
        selected_values,
        final_state: sel.state,
    }
}

/// `√3 (L - √(2n)) / (2n)^{1/4}`.
pub fn clt_statistic(count: usize, n: usize) -> f64 {
    let two_n = 2.0 * n as f64;
    3f64.sqrt() * (count as f64 - two_n.sqrt()) / two_n.powf(0.25)
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Moments { count, mean, m2 }
    }

    /// Unbiased sample variance; 0 for a single observation.
    fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCSummary {
    pub reps: usize,
    pub n: usize,
    pub s0: f64,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// Mean and variance of [`clt_statistic`] over the replications.
    pub clt_mean: f64,
    pub clt_var: f64,
    pub clt_values: Option<Vec<f64>>,
}

impl MCSummary {
    fn from_moments(m: Moments, n: usize, s0: f64, seed: u64, counts: Option<Vec<u32>>) -> Self {
        let variance = m.variance();
        let reps = m.count as usize;
        let two_n = 2.0 * n as f64;
        let scale = 3f64.sqrt() / two_n.powf(0.25);
        MCSummary {
            reps,
            n,
            s0,
            seed,
            mean: m.mean,
            variance,
            std_error: (variance / reps as f64).sqrt(),
            clt_mean: scale * (m.mean - two_n.sqrt()),
            clt_var: scale * scale * variance,
            clt_values: counts.map(|c| c.into_iter().map(|l| clt_statistic(l as usize, n)).collect()),
        }
    }

    pub const CSV_HEADER: &'static str = "policy,n,s0,reps,seed,mean,std_error,clt_mean,clt_var";

    pub fn write_csv_row<W: Write>(&self, out: &mut W, policy: &str) -> io::Result<()> {
        writeln!(
            out,
            "{policy},{},{},{},{},{},{},{},{}",
            self.n,
            num(self.s0),
            self.reps,
            self.seed,
            num(self.mean),
            num(self.std_error),
            num(self.clt_mean),
            num(self.clt_var)
        )
    }
}

/// Writes the summary CSV header and one row per `(policy, summary)`.
pub fn write_summary_csv<W: Write>(out: &mut W, rows: &[(&str, &MCSummary)]) -> io::Result<()> {
    writeln!(out, "{}", MCSummary::CSV_HEADER)?;
    for (policy, summary) in rows {
        summary.write_csv_row(out, policy)?;
    }
    Ok(())
}

/// Uniform stream of replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Monte Carlo experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub n: usize,
    pub s0: f64,
    pub reps: usize,
    pub seed: u64,
    /// Keep the per-replication CLT statistics.
    pub keep_samples: bool,
}

impl MonteCarlo {
    pub fn new(n: usize, reps: usize, seed: u64) -> Self {
        MonteCarlo {
            n,
            s0: 0.0,
            reps,
            seed,
            keep_samples: false,
        }
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    pub fn keep_samples(mut self, keep: bool) -> Self {
        self.keep_samples = keep;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain {
                what: "sample length n",
                value: 0.0,
            });
        }
        if self.reps == 0 {
            return Err(Error::Domain {
                what: "replication count",
                value: 0.0,
            });
        }
        check_unit("initial state", self.s0)
    }

    /// Runs `count_one(rep)` for every replication and reduces
    /// deterministically.
    fn run<F>(&self, count_one: F) -> MCSummary
    where
        F: Fn(u64) -> u32 + Sync,
    {
        let chunks = self.reps.div_ceil(CHUNK);
        let keep = self.keep_samples;
        let parts: Vec<(Moments, Vec<u32>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(self.reps);
                let mut m = Moments::default();
                let mut counts = Vec::new();
                for rep in lo..hi {
                    let l = count_one(rep as u64);
                    m.push(l as f64);
                    if keep {
                        counts.push(l);
                    }
                }
                (m, counts)
            })
            .collect();
        let mut total = Moments::default();
        let mut all = keep.then(|| Vec::with_capacity(self.reps));
        for (m, counts) in parts {
            total = total.merge(m);
            if let Some(all) = all.as_mut() {
                all.extend(counts);
            }
        }
        MCSummary::from_moments(total, self.n, self.s0, self.seed, all)
    }

    pub fn simulate<R: SelectionRule + ?Sized>(&self, rule: &R) -> Result<MCSummary> {
        self.validate()?;
        let (n, s0, seed) = (self.n, self.s0, self.seed);
        Ok(self.run(|rep| count_selections(rule, n, s0, &mut replication_rng(seed, rep))))
    }

    /// Both rules on common random numbers.
    pub fn simulate_paired<A, B>(&self, a: &A, b: &B) -> Result<PairedSummary>
    where
        A: SelectionRule + ?Sized,
        B: SelectionRule + ?Sized,
    {
        self.validate()?;
        let (n, s0, seed) = (self.n, self.s0, self.seed);
        let chunks = self.reps.div_ceil(CHUNK);
        let parts: Vec<[Moments; 3]> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut m = [Moments::default(); 3];
                for rep in c * CHUNK..((c + 1) * CHUNK).min(self.reps) {
                    let la = count_selections(a, n, s0, &mut replication_rng(seed, rep as u64));
                    let lb = count_selections(b, n, s0, &mut replication_rng(seed, rep as u64));
                    m[0].push(la as f64);
                    m[1].push(lb as f64);
                    m[2].push(lb as f64 - la as f64);
                }
                m
            })
            .collect();
        let total = parts.into_iter().fold([Moments::default(); 3], |acc, m| {
            [acc[0].merge(m[0]), acc[1].merge(m[1]), acc[2].merge(m[2])]
        });
        let diff = total[2];
        Ok(PairedSummary {
            first: MCSummary::from_moments(total[0], n, s0, seed, None),
            second: MCSummary::from_moments(total[1], n, s0, seed, None),
            diff_mean: diff.mean,
            diff_std_error: (diff.variance() / diff.count as f64).sqrt(),
        })
    }

    /// Unimodal selection: the adaptive policy on the first `turning`
    /// observations, then its mirror on the rest.
    pub fn simulate_unimodal(&self, turning: Option<usize>) -> Result<MCSummary> {
        self.validate()?;
        let n = self.n;
        let turning = unimodal_turning(n, turning)?;
        let seed = self.seed;
        let mirrored = Mirrored(AdaptiveFamily);
        Ok(self.run(|rep| {
            let mut rng = replication_rng(seed, rep);
            let up = count_selections(&AdaptiveFamily, turning, 0.0, &mut rng);
            let down = count_selections(&mirrored, n - turning, 1.0, &mut rng);
            up + down
        }))
    }
}

fn count_selections<R: SelectionRule + ?Sized, G: Rng>(rule: &R, n: usize, s0: f64, rng: &mut G) -> u32 {
    let mut sel = Selector::new(rule, n, s0);
    let mut count = 0;
    for _ in 0..n {
        let x: f64 = rng.random();
        count += sel.offer(x) as u32;
    }
    count
}

pub fn monte_carlo<R: SelectionRule + ?Sized>(rule: &R, n: usize, s0: f64, reps: usize, seed: u64) -> Result<MCSummary> {
    MonteCarlo::new(n, reps, seed).with_s0(s0).simulate(rule)
}

/// Two rules evaluated on identical samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSummary {
    pub first: MCSummary,
    pub second: MCSummary,
    /// Mean of `L(second) - L(first)`.
    pub diff_mean: f64,
    pub diff_std_error: f64,
}

/// Sample values drawn by replication `rep`, as the simulators see them.
pub fn replication_values(n: usize, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, rep);
    (0..n).map(|_| rng.random()).collect()
}

fn unimodal_turning(n: usize, turning: Option<usize>) -> Result<usize> {
    if n < 2 {
        return Err(Error::Domain {
            what: "unimodal sample length (n >= 2)",
            value: n as f64,
        });
    }
    let t = turning.unwrap_or(n / 2);
    if t == 0 || t >= n {
        return Err(Error::Domain {
            what: "turning time (1 <= t < n)",
            value: t as f64,
        });
    }
    Ok(t)
}

/// Increasing segment followed by a decreasing segment.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodalTrace {
    pub turning: usize,
    pub increasing: SelectionTrace,
    /// Indices relative to the start of the decreasing segment.
    pub decreasing: SelectionTrace,
}

impl UnimodalTrace {
    pub fn count(&self) -> usize {
        self.increasing.count() + self.decreasing.count()
    }

    /// Selected `(index, value)` pairs over the whole sample, 1-based.
    pub fn selections(&self) -> Vec<(usize, f64)> {
        let up = self
            .increasing
            .selected_indices
            .iter()
            .copied()
            .zip(self.increasing.selected_values.iter().copied());
        let down = self
            .decreasing
            .selected_indices
            .iter()
            .map(|i| i + self.turning)
            .zip(self.decreasing.selected_values.iter().copied());
        up.chain(down).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_trace_csv(out, self.selections().into_iter())
    }
}

pub fn run_unimodal(values: &[f64], turning: Option<usize>) -> Result<UnimodalTrace> {
    let turning = unimodal_turning(values.len(), turning)?;
    for &x in values {
        check_unit("observation", x)?;
    }
    let (head, tail) = values.split_at(turning);
    Ok(UnimodalTrace {
        turning,
        increasing: replay(&AdaptiveFamily, head, 0.0),
        decreasing: replay(&Mirrored(AdaptiveFamily), tail, 1.0),
    })
}
