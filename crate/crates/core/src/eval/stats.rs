use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SymbolSequence};
use crate::error::{Error, Result};
use crate::rng;

/// Which events a frequency table counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatisticSpec {
    /// `n` consecutive symbols.
    Order(usize),
    /// The pair `(d_t, d_{t+l+1})`: two symbols with `l` steps between them.
    Lag(usize),
}

impl StatisticSpec {
    /// Number of steps an event spans.
    pub fn span(&self) -> usize {
        match *self {
            StatisticSpec::Order(n) => n,
            StatisticSpec::Lag(l) => l + 2,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StatisticSpec::Order(0) => Err(Error::InvalidParameter("order must be >= 1".into())),
            StatisticSpec::Lag(0) => Err(Error::InvalidParameter("lag must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticSpec::Order(n) => write!(f, "order-{n}"),
            StatisticSpec::Lag(l) => write!(f, "lag-{l}"),
        }
    }
}

impl FromStr for StatisticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad statistic {s:?}, expected order-N or lag-N"));
        let (kind, n) = s.split_once('-').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let spec = match kind {
            "order" => StatisticSpec::Order(n),
            "lag" => StatisticSpec::Lag(n),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for StatisticSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StatisticSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Orders 1 to 6 followed by lags 1 to 6.
pub fn paper_statistics() -> Vec<StatisticSpec> {
    (1..=6)
        .map(StatisticSpec::Order)
        .chain((1..=6).map(StatisticSpec::Lag))
        .collect()
}

/// Event counts keyed by the event's symbols read as a base-`alphabet` number.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl EventCounts {
    pub fn distribution(&self) -> EventDistribution {
        let t = self.total as f64;
        EventDistribution {
            probs: self.counts.iter().map(|(&k, &c)| (k, c as f64 / t)).collect(),
        }
    }
}

/// Normalized event frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventDistribution {
    pub probs: BTreeMap<u64, f64>,
}

impl EventDistribution {
    /// Dense vector indexed by event key; zero entries are not stored.
    pub fn from_dense(p: &[f64]) -> Self {
        Self {
            probs: p
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0.0)
                .map(|(k, &x)| (k as u64, x))
                .collect(),
        }
    }

    pub fn prob(&self, key: u64) -> f64 {
        self.probs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

fn count_into<'a>(
    seqs: impl Iterator<Item = &'a SymbolSequence>,
    alphabet: usize,
    spec: StatisticSpec,
    out: &mut EventCounts,
) {
    let a = alphabet as u64;
    for s in seqs {
        let v = s.steps();
        let span = spec.span();
        if v.len() < span {
            continue;
        }
        for t in 0..=v.len() - span {
            let key = match spec {
                StatisticSpec::Order(n) => v[t..t + n]
                    .iter()
                    .fold(0u64, |k, s| k * a + s.index() as u64),
                StatisticSpec::Lag(l) => v[t].index() as u64 * a + v[t + l + 1].index() as u64,
            };
            *out.counts.entry(key).or_insert(0) += 1;
            out.total += 1;
        }
    }
}

/// Counts of all events of `spec` inside each sequence; windows never cross
/// sequence boundaries.
pub fn ngram_counts(corpus: &Corpus, spec: StatisticSpec) -> Result<EventCounts> {
    spec.validate()?;
    let mut c = EventCounts::default();
    count_into(corpus.sequences.iter(), corpus.alphabet_size, spec, &mut c);
    if c.total == 0 {
        return Err(Error::NoWindows(format!(
            "no sequence is long enough for {spec} (needs {} steps)",
            spec.span()
        )));
    }
    Ok(c)
}

pub fn ngram_frequencies(corpus: &Corpus, spec: StatisticSpec) -> Result<EventDistribution> {
    Ok(ngram_counts(corpus, spec)?.distribution())
}

/// Floor added to model frequencies: a tenth of one event.
pub fn default_epsilon(model_counts: &EventCounts) -> f64 {
    1.0 / (10.0 * model_counts.total as f64)
}

/// `Σ_i P(i) log(P(i) / Q_ε(i))` in nats, with
/// `Q_ε = (Q + ε) / (1 + ε |S|)` over the union `S` of both supports.
/// With `ε = 0` an event of `P` missing from `Q` gives infinity.
pub fn kl_divergence(p: &EventDistribution, q: &EventDistribution, epsilon: f64) -> f64 {
    let support = p
        .probs
        .keys()
        .chain(q.probs.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let norm = 1.0 + epsilon * support as f64;
    let mut kl = 0.0;
    for (k, &pi) in &p.probs {
        if pi <= 0.0 {
            continue;
        }
        let qi = (q.prob(*k) + epsilon) / norm;
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        kl += pi * (pi / qi).ln();
    }
    kl
}

/// One row of a KL table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub statistic: StatisticSpec,
    pub model: String,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub n_resamples: usize,
    pub seed: u64,
    pub rows: Vec<KlRow>,
}

impl KlReport {
    pub fn get(&self, model: &str, statistic: StatisticSpec) -> Option<&KlRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.statistic == statistic)
    }

    pub fn extend(&mut self, other: KlReport) {
        self.rows.extend(other.rows);
    }
}

/// KL divergence from bootstrap resamples of `test` to the statistics of
/// `samples`, for every spec. Resample `r` redraws whole test sequences with
/// replacement from seed substream `r` and is shared by all specs. The
/// variance is the unbiased sample variance across resamples.
pub fn bootstrap_kl(
    test: &Corpus,
    samples: &Corpus,
    specs: &[StatisticSpec],
    n_resamples: usize,
    seed: u64,
    label: &str,
) -> Result<KlReport> {
    if samples.alphabet_size != test.alphabet_size {
        return Err(Error::AlphabetMismatch {
            model: samples.alphabet_size,
            data: test.alphabet_size,
        });
    }
    if n_resamples < 1 {
        return Err(Error::InvalidParameter("n_resamples must be >= 1".into()));
    }
    if test.sequences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let model: Vec<(EventDistribution, f64)> = specs
        .iter()
        .map(|&s| {
            let c = ngram_counts(samples, s)?;
            Ok((c.distribution(), default_epsilon(&c)))
        })
        .collect::<Result<_>>()?;
    for &s in specs {
        ngram_counts(test, s)?;
    }
    let n = test.sequences.len();
    let per_resample: Vec<Vec<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut draw = rng::substream(seed, r as u64);
            let picks: Vec<usize> = (0..n).map(|_| draw.random_range(0..n)).collect();
            specs
                .iter()
                .zip(&model)
                .map(|(&spec, (q, eps))| {
                    let mut c = EventCounts::default();
                    count_into(
                        picks.iter().map(|&i| &test.sequences[i]),
                        test.alphabet_size,
                        spec,
                        &mut c,
                    );
                    if c.total == 0 {
                        // every drawn sequence is too short for this spec
                        return f64::NAN;
                    }
                    kl_divergence(&c.distribution(), q, *eps)
                })
                .collect()
        })
        .collect();
    let rows = specs
        .iter()
        .enumerate()
        .map(|(i, &statistic)| {
            let xs: Vec<f64> = per_resample.iter().map(|r| r[i]).filter(|x| !x.is_nan()).collect();
            let (mean, variance) = mean_var(&xs);
            KlRow {
                statistic,
                model: label.to_string(),
                mean,
                variance,
            }
        })
        .collect();
    Ok(KlReport {
        n_resamples,
        seed,
        rows,
    })
}

/// Train-versus-test reference: the training corpus in the role of model
/// samples.
pub fn train_vs_test_reference(
    train: &Corpus,
    test: &Corpus,
    specs: &[StatisticSpec],
    n_resamples: usize,
    seed: u64,
) -> Result<KlReport> {
    bootstrap_kl(test, train, specs, n_resamples, seed, "trainset")
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}
