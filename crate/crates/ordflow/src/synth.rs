//! Seeded synthetic order flow: Markov sequence simulation and rendering
//! into the tick-feed CSV format, for validating the pipeline end to end
//! against a known ground truth.
//!
//! Everything here is a pure function of its seed (ChaCha8, a portable
//! counter-based generator), so rendered files are byte-identical across
//! runs and platforms.

use crate::domain::{OrderKind, TimeZoneSpec};
use crate::dtmc::{classify, stationary, Classification, TransitionMatrix};
use crate::STATE_COUNT;
use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot simulate an empty sequence")]
    EmptyLength,
    #[error("transition matrix is not ergodic (classified {0:?})")]
    NotErgodic(Classification),
    #[error("start state {0:?} has no outgoing transitions")]
    UnsupportedStart(OrderKind),
    /// More events requested than the zone has whole milliseconds, so
    /// strictly increasing timestamps are impossible.
    #[error("zone {zone} holds {capacity} ms but {requested} events were requested")]
    ZoneTooShort {
        zone: String,
        capacity: u64,
        requested: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dtmc(#[from] crate::dtmc::DtmcError),
}

/// Derives a per-task seed from a master seed and a stream index, with
/// fixed 64-bit arithmetic (a splitmix64 round) so derivations never
/// change across versions or platforms.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples a state from a row CDF; the final supported state absorbs any
/// floating-point remainder.
fn sample_row(rng: &mut ChaCha8Rng, row: &[f64]) -> OrderKind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(j);
        if u < acc {
            return OrderKind::from_index(j).expect("state index");
        }
    }
    OrderKind::from_index(last.expect("supported row has positive mass")).expect("state index")
}

/// Simulates `len` symbols from an ergodic chain. The first symbol is
/// `start` if given (must be a supported state), otherwise a draw from the
/// stationary distribution, so the sequence begins in equilibrium.
pub fn simulate(
    matrix: &TransitionMatrix,
    len: usize,
    seed: u64,
    start: Option<OrderKind>,
) -> Result<Vec<OrderKind>, SynthError> {
    if len == 0 {
        return Err(SynthError::EmptyLength);
    }
    let class = classify(matrix);
    if class != Classification::Ergodic {
        return Err(SynthError::NotErgodic(class));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = match start {
        Some(kind) => {
            if !matrix.is_supported(kind.index()) {
                return Err(SynthError::UnsupportedStart(kind));
            }
            kind
        }
        None => {
            let pi = stationary(matrix)?;
            sample_row(&mut rng, pi.as_slice())
        }
    };
    let mut out = Vec::with_capacity(len);
    out.push(first);
    let mut current = first;
    for _ in 1..len {
        current = sample_row(&mut rng, matrix.row(current.index()));
        out.push(current);
    }
    Ok(out)
}

/// Renders a symbol sequence as tick-feed CSV rows (no header), one event
/// per symbol, into `w`.
///
/// Timestamps are evenly spaced and strictly increasing across the zone's
/// closed window; delete rows carry price 0 per feed convention; prices
/// follow a seeded bounded random walk in cents and quantities are round
/// lots. The byte output is a pure function of the arguments.
pub fn render_csv<W: Write>(
    w: &mut W,
    symbols: &[OrderKind],
    ticker: &str,
    date: NaiveDate,
    zone: &TimeZoneSpec,
    seed: u64,
) -> Result<(), SynthError> {
    let capacity = zone.capacity_millis();
    let n = symbols.len();
    if n as u64 > capacity {
        return Err(SynthError::ZoneTooShort {
            zone: zone.label.clone(),
            capacity,
            requested: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order_id: u64 = 100_000 + u64::from(rng.random::<u32>() % 900_000);
    let mut cents: i64 = rng.random_range(2_000..30_000);
    let start = u64::from(zone.start.millis());
    let date = date.format("%Y-%m-%d").to_string();
    for (i, kind) in symbols.iter().enumerate() {
        // floor(i * capacity / n) is strictly increasing whenever
        // capacity >= n, and stays inside the window.
        let ts_ms = start + (i as u64) * capacity / (n as u64);
        let ts = crate::domain::TimeOfDay::from_millis(ts_ms as u32).expect("in-day timestamp");
        order_id += u64::from(rng.random_range(1u32..=4));
        cents = (cents + rng.random_range(-5i64..=5)).max(1);
        let quantity = u64::from(rng.random_range(1u32..=10)) * 100;
        if kind.is_delete() {
            writeln!(
                w,
                "{date},{ts},{order_id},{},{ticker},0,{quantity},NASDAQ",
                kind.wire_name()
            )?;
        } else {
            writeln!(
                w,
                "{date},{ts},{order_id},{},{ticker},{}.{:02},{quantity},NASDAQ",
                kind.wire_name(),
                cents / 100,
                cents % 100
            )?;
        }
    }
    Ok(())
}

/// Draws a strictly positive (hence ergodic) random row-stochastic matrix:
/// each entry starts at 0.5 plus a uniform draw, then rows are normalized.
/// Used as ground truth in synthetic runs.
pub fn random_ergodic_tpm(seed: u64) -> TransitionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![vec![0.0; STATE_COUNT]; STATE_COUNT];
    for row in probs.iter_mut() {
        let mut sum = 0.0;
        for p in row.iter_mut() {
            *p = 0.5 + rng.random::<f64>();
            sum += *p;
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    TransitionMatrix::from_probs(probs).expect("normalized rows")
}
