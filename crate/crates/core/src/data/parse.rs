use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::DateTime;

use crate::exec::{self, Execution};
use crate::{Error, Result};

/// One (user, item, timestamp) event from a log file.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user_raw: String,
    pub item_raw: String,
    /// Seconds since the epoch; always non-negative.
    pub timestamp: i64,
    /// Rating or similar value when the log has one. Never used for training.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampFormat {
    EpochSeconds,
    /// `Tue Apr 03 18:00:09 +0000 2012`, as in the Foursquare check-in dumps.
    CalendarUtc,
}

/// Column-map descriptor: how to find the fields of an [`Interaction`] in a
/// delimited text line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogFormat {
    pub delimiter: String,
    pub user_col: usize,
    pub item_col: usize,
    pub timestamp_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_format: TimestampFormat,
    pub skip_header: bool,
}

impl LogFormat {
    /// MovieLens-100K `u.data`: `user \t item \t rating \t timestamp`.
    pub fn ml100k() -> Self {
        LogFormat {
            delimiter: "\t".into(),
            user_col: 0,
            item_col: 1,
            timestamp_col: 3,
            rating_col: Some(2),
            timestamp_format: TimestampFormat::EpochSeconds,
            skip_header: false,
        }
    }

    /// MovieLens-1M `ratings.dat`: `user::item::rating::timestamp`.
    pub fn ml1m() -> Self {
        LogFormat {
            delimiter: "::".into(),
            ..Self::ml100k()
        }
    }

    /// Foursquare NYC/TKY check-in TSV: user, venue, category id, category,
    /// lat, lon, tz offset, UTC time.
    pub fn foursquare() -> Self {
        LogFormat {
            delimiter: "\t".into(),
            user_col: 0,
            item_col: 1,
            timestamp_col: 7,
            rating_col: None,
            timestamp_format: TimestampFormat::CalendarUtc,
            skip_header: false,
        }
    }

    fn max_col(&self) -> usize {
        self.user_col
            .max(self.item_col)
            .max(self.timestamp_col)
    }

    fn parse_line(&self, line: &str) -> std::result::Result<Interaction, String> {
        let fields: Vec<&str> = line.split(self.delimiter.as_str()).collect();
        if fields.len() <= self.max_col() {
            return Err(format!(
                "expected at least {} columns, found {}",
                self.max_col() + 1,
                fields.len()
            ));
        }
        let user_raw = fields[self.user_col].trim();
        let item_raw = fields[self.item_col].trim();
        if user_raw.is_empty() {
            return Err("empty user id".into());
        }
        if item_raw.is_empty() {
            return Err("empty item id".into());
        }
        let ts_field = fields[self.timestamp_col].trim();
        let timestamp = match self.timestamp_format {
            TimestampFormat::EpochSeconds => ts_field
                .parse::<i64>()
                .map_err(|e| format!("bad timestamp {ts_field:?}: {e}"))?,
            TimestampFormat::CalendarUtc => DateTime::parse_from_str(ts_field, "%a %b %d %H:%M:%S %z %Y")
                .map_err(|e| format!("bad timestamp {ts_field:?}: {e}"))?
                .timestamp(),
        };
        if timestamp < 0 {
            return Err(format!("negative timestamp {timestamp}"));
        }
        let weight = self
            .rating_col
            .and_then(|c| fields.get(c))
            .and_then(|f| f.trim().parse::<f64>().ok());
        Ok(Interaction {
            user_raw: user_raw.to_string(),
            item_raw: item_raw.to_string(),
            timestamp,
            weight,
        })
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let delim = match self.delimiter.as_str() {
            "\t" => "tab".to_string(),
            "," => "comma".to_string(),
            other => other.to_string(),
        };
        write!(
            f,
            "delim={delim};user={};item={};ts={}",
            self.user_col, self.item_col, self.timestamp_col
        )?;
        if let Some(r) = self.rating_col {
            write!(f, ";rating={r}")?;
        }
        if self.timestamp_format == TimestampFormat::CalendarUtc {
            write!(f, ";tsfmt=calendar")?;
        }
        if self.skip_header {
            write!(f, ";header=1")?;
        }
        Ok(())
    }
}

/// Accepts a preset name (`ml-100k`, `ml-1m`, `foursquare`) or a descriptor like
/// `delim=tab;user=0;item=1;ts=3;rating=2;tsfmt=epoch;header=0`.
impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml-100k" | "ml100k" => return Ok(Self::ml100k()),
            "ml-1m" | "ml1m" => return Ok(Self::ml1m()),
            "foursquare" | "nyc" | "tky" => return Ok(Self::foursquare()),
            _ => {}
        }
        let bad = |msg: String| Error::InvalidArgument(format!("log format {s:?}: {msg}"));
        let mut fmt = LogFormat {
            rating_col: None,
            ..Self::ml100k()
        };
        let mut have = (false, false, false);
        for part in s.split(';').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let col = || v.parse::<usize>().map_err(|e| bad(format!("{k}: {e}")));
            match k {
                "delim" => {
                    fmt.delimiter = match v {
                        "tab" | "\\t" => "\t".into(),
                        "comma" => ",".into(),
                        "space" => " ".into(),
                        "" => return Err(bad("empty delimiter".into())),
                        other => other.into(),
                    }
                }
                "user" => {
                    fmt.user_col = col()?;
                    have.0 = true;
                }
                "item" => {
                    fmt.item_col = col()?;
                    have.1 = true;
                }
                "ts" => {
                    fmt.timestamp_col = col()?;
                    have.2 = true;
                }
                "rating" => fmt.rating_col = Some(col()?),
                "tsfmt" => {
                    fmt.timestamp_format = match v {
                        "epoch" => TimestampFormat::EpochSeconds,
                        "calendar" => TimestampFormat::CalendarUtc,
                        other => return Err(bad(format!("unknown tsfmt {other:?}"))),
                    }
                }
                "header" => fmt.skip_header = matches!(v, "1" | "true" | "yes"),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if !(have.0 && have.1 && have.2) {
            return Err(bad("user, item and ts columns are mandatory".into()));
        }
        Ok(fmt)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub interactions: Vec<Interaction>,
    /// Lines that were skipped because a mandatory field was missing or invalid.
    pub malformed: usize,
    /// First few malformed lines as (1-based line number, reason).
    pub malformed_examples: Vec<(usize, String)>,
}

const PARSE_CHUNK: usize = 1 << 15;

/// Parses a delimited interaction log. Blank lines are ignored. In strict mode
/// the first malformed line is an error; otherwise malformed lines are counted
/// and skipped.
pub fn parse_log(path: &Path, format: &LogFormat, strict: bool) -> Result<ParseOutcome> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_bytes(&bytes, format, strict, Execution::default())
}

pub fn parse_bytes(
    bytes: &[u8],
    format: &LogFormat,
    strict: bool,
    mode: Execution,
) -> Result<ParseOutcome> {
    // Logs are not guaranteed to be UTF-8 (some check-in dumps are Latin-1);
    // ids are ASCII in every format we know, so lossy decoding is enough.
    let text = String::from_utf8_lossy(bytes);
    let lines: Vec<(usize, &str)> = text
        .split('\n')
        .enumerate()
        .skip(usize::from(format.skip_header))
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    let chunks = exec::try_map_chunks(mode, &lines, PARSE_CHUNK, |chunk| {
        let mut out = Vec::with_capacity(chunk.len());
        let mut bad = Vec::new();
        for &(lineno, line) in chunk {
            match format.parse_line(line) {
                Ok(ev) => out.push(ev),
                Err(reason) if strict => {
                    return Err(Error::Malformed {
                        line: lineno,
                        reason,
                    })
                }
                Err(reason) => bad.push((lineno, reason)),
            }
        }
        Ok((out, bad))
    })?;

    let mut outcome = ParseOutcome::default();
    for (events, bad) in chunks {
        outcome.interactions.extend(events);
        outcome.malformed += bad.len();
        for b in bad {
            if outcome.malformed_examples.len() < 5 {
                outcome.malformed_examples.push(b);
            }
        }
    }
    Ok(outcome)
}
