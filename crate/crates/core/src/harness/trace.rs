//! Trace serialization: CSV with fixed columns and JSON lines.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `mode` | `std` or `dep` |
//! | `seed` | session seed |
//! | `n`, `c`, `m_lo`, `m_star` | blocklength, chunk length, first and last admissible decision chunk |
//! | `log2_n_bits` | `log2 N` |
//! | `n_exact` | `N` when representable, else empty |
//! | `keys` | number of keys `K` |
//! | `message`, `key` | transmitted message and key index |
//! | `decode_time` | decision chunk `M`, empty on outage |
//! | `empirical_rate_bits_per_use` | `log2 N / (M c)`, empty on outage |
//! | `decoded` | decoded message, empty if none |
//! | `error`, `outage` | `0`/`1` |
//! | `list_size` | candidate list size at the decision (nosy sessions) |
//! | `transmitted_in_list` | `0`/`1`, empty if not applicable |
//! | `auth_outcome` | `accepted`, `forged`, `none` or `multiple` |
//! | `empty_csi_chunks` | chunks with empty output-consistent CSI |
//! | `csi_consistent` | `0`/`1` |
//! | `feedback` | feedback bits, one character per chunk |
//! | `csi` | cost reports (`;`-separated) or per-chunk CSI set sizes |
//! | `x_seq`, `s_seq`, `y_seq` | codeword, states and outputs, one digit per symbol (base 36) |

use std::io::Write;

use crate::harness::session::{CsiStream, SessionMode, SessionTrace};
use crate::{Error, Result};

pub const TRACE_COLUMNS: [&str; 26] = [
    "mode",
    "seed",
    "n",
    "c",
    "m_lo",
    "m_star",
    "log2_n_bits",
    "n_exact",
    "keys",
    "message",
    "key",
    "decode_time",
    "empirical_rate_bits_per_use",
    "decoded",
    "error",
    "outage",
    "list_size",
    "transmitted_in_list",
    "auth_outcome",
    "empty_csi_chunks",
    "csi_consistent",
    "feedback",
    "csi",
    "x_seq",
    "s_seq",
    "y_seq",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn symbols(seq: &[u8]) -> String {
    seq.iter().map(|&v| char::from_digit(v as u32 % 36, 36).unwrap()).collect()
}

fn row(t: &SessionTrace) -> Vec<String> {
    let csi = match &t.csi {
        CsiStream::Cost { reported } => reported.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        CsiStream::Channel { sets } => sets.iter().map(|s| s.len().to_string()).collect::<Vec<_>>().join(";"),
    };
    vec![
        match t.mode {
            SessionMode::Std => "std".into(),
            SessionMode::Dep => "dep".into(),
        },
        t.seed.to_string(),
        t.n.to_string(),
        t.c.to_string(),
        t.m_lo.to_string(),
        t.m_star.to_string(),
        t.log2_n.to_string(),
        opt(t.n_exact),
        t.keys.to_string(),
        t.message.to_string(),
        t.key.to_string(),
        opt(t.decode_time),
        opt(t.empirical_rate),
        opt(t.decoded),
        (t.error as u8).to_string(),
        (t.decode_time.is_none() as u8).to_string(),
        opt(t.list_size),
        opt(t.transmitted_in_list.map(|b| b as u8)),
        t.auth_outcome.clone().unwrap_or_default(),
        t.empty_csi_chunks.to_string(),
        (t.csi_consistent as u8).to_string(),
        symbols(&t.feedback),
        csi,
        symbols(&t.x_seq),
        symbols(&t.s_seq),
        symbols(&t.y_seq),
    ]
}

/// CSV writer that emits the header once and then one row per trace.
pub struct CsvTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRACE_COLUMNS).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, t: &SessionTrace) -> Result<()> {
        self.inner.write_record(row(t)).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Write the header and one row per trace.
pub fn write_csv<'a, W: Write>(out: W, traces: impl IntoIterator<Item = &'a SessionTrace>) -> Result<()> {
    let mut w = CsvTraceWriter::new(out)?;
    for t in traces {
        w.push(t)?;
    }
    w.finish()
}

/// One JSON object per line.
pub fn write_jsonl<'a, W: Write>(mut out: W, traces: impl IntoIterator<Item = &'a SessionTrace>) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
