//! Ingestion of `::`-delimited rating files (MovieLens 1M convention) into
//! dense request traces for the simulator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One parsed rating row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEvent {
    pub user_id: u64,
    pub movie_id: u64,
    pub rating: f64,
    pub timestamp: u64,
}

/// Replay order for the parsed events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceOrder {
    /// Rows as they appear in the file.
    #[default]
    FileOrder,
    /// Stable sort by timestamp.
    Timestamp,
}

/// A request trace over a dense file index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Dense file index per slot.
    pub requests: Vec<usize>,
    /// Number of distinct raw ids, i.e. the library size.
    pub library_size: usize,
    /// Raw id for each dense index, in first-appearance order.
    pub raw_ids: Vec<u64>,
}

impl Trace {
    /// Wraps an already-dense request list; useful for synthetic traces.
    pub fn from_requests(requests: Vec<usize>) -> Self {
        let library_size = requests.iter().map(|&r| r + 1).max().unwrap_or(0);
        let raw_ids = (0..library_size as u64).collect();
        Self { requests, library_size, raw_ids }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Maps a dense index back to the raw id it was assigned from.
    pub fn raw_id(&self, dense: usize) -> Option<u64> {
        self.raw_ids.get(dense).copied()
    }

    /// Writes the trace as `slot,file_id` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "slot,file_id")?;
        for (i, &file) in self.requests.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, file)?;
        }
        Ok(())
    }
}

/// Parses up to `max_rows` events from a `user::movie::rating::timestamp`
/// file. Malformed lines are reported with their 1-based line number.
pub fn parse_movielens<P: AsRef<Path>>(path: P, max_rows: Option<usize>) -> Result<Vec<RawEvent>> {
    parse_events(path, max_rows, "::")
}

/// Like [`parse_movielens`] but with a configurable field delimiter.
pub fn parse_events<P: AsRef<Path>>(
    path: P,
    max_rows: Option<usize>,
    delimiter: &str,
) -> Result<Vec<RawEvent>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let limit = max_rows.unwrap_or(usize::MAX);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        if events.len() >= limit {
            break;
        }
        let line = line?;
        if line.is_empty() {
            continue;
        }
        events.push(parse_line(&line, idx + 1, delimiter)?);
    }
    Ok(events)
}

fn parse_line(line: &str, line_no: usize, delimiter: &str) -> Result<RawEvent> {
    let mut fields = line.split(delimiter);
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("missing {name} field") })
    };
    let user_id = next("user id")?;
    let movie_id = next("movie id")?;
    let rating = next("rating")?;
    let timestamp = next("timestamp")?;
    let parse_int = |value: &str, name: &str| {
        value.trim().parse::<u64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad {name}: {value:?}"),
        })
    };
    let rating = rating.trim().parse::<f64>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("bad rating: {rating:?}"),
    })?;
    Ok(RawEvent {
        user_id: parse_int(user_id, "user id")?,
        movie_id: parse_int(movie_id, "movie id")?,
        rating,
        timestamp: parse_int(timestamp, "timestamp")?,
    })
}

/// Converts events to a dense trace. Dense ids are assigned by first
/// appearance in the chosen replay order, so position `t` of the trace is
/// the `t`-th event of that order.
pub fn remap_ids(events: &[RawEvent], order: TraceOrder) -> Result<Trace> {
    if events.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut ordered: Vec<&RawEvent> = events.iter().collect();
    if order == TraceOrder::Timestamp {
        ordered.sort_by_key(|e| e.timestamp);
    }
    let mut dense: HashMap<u64, usize> = HashMap::new();
    let mut raw_ids = Vec::new();
    let mut requests = Vec::with_capacity(ordered.len());
    for event in ordered {
        let next_id = dense.len();
        let id = *dense.entry(event.movie_id).or_insert_with(|| {
            raw_ids.push(event.movie_id);
            next_id
        });
        requests.push(id);
    }
    Ok(Trace { requests, library_size: raw_ids.len(), raw_ids })
}

/// Summary of a trace: length, library size, and the most requested files.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub length: usize,
    pub library_size: usize,
    /// `(dense file id, request count)` sorted by count descending, ties by
    /// lowest id.
    pub top: Vec<(usize, u64)>,
}

pub fn trace_stats(trace: &Trace, top_k: usize) -> TraceStats {
    let mut counts = vec![0u64; trace.library_size];
    for &file in &trace.requests {
        counts[file] += 1;
    }
    let mut order: Vec<usize> = (0..trace.library_size).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let top = order.into_iter().take(top_k).map(|f| (f, counts[f])).collect();
    TraceStats { length: trace.len(), library_size: trace.library_size, top }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(movie_id: u64, timestamp: u64) -> RawEvent {
        RawEvent { user_id: 1, movie_id, rating: 4.0, timestamp }
    }

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn parses_movielens_line() {
        let file = temp_file("1::1193::5::978300760\n");
        let events = parse_movielens(file.path(), None).unwrap();
        assert_eq!(
            events,
            vec![RawEvent { user_id: 1, movie_id: 1193, rating: 5.0, timestamp: 978300760 }]
        );
    }

    #[test]
    fn max_rows_truncates() {
        let file = temp_file("1::1::5::1\n2::2::4::2\n3::3::3::3\n4::4::2::4\n5::5::1::5\n");
        assert_eq!(parse_movielens(file.path(), Some(2)).unwrap().len(), 2);
        // Prefix property.
        let two = parse_movielens(file.path(), Some(2)).unwrap();
        let four = parse_movielens(file.path(), Some(4)).unwrap();
        assert_eq!(&four[..2], &two[..]);
    }

    #[test]
    fn malformed_line_names_its_number() {
        let file = temp_file("1::1::5::1\ngarbage\n");
        match parse_movielens(file.path(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_movielens("/nonexistent/ratings.dat", None),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn remap_assigns_dense_ids_by_first_appearance() {
        let events = vec![event(7, 10), event(7, 11), event(3, 12)];
        let trace = remap_ids(&events, TraceOrder::FileOrder).unwrap();
        assert_eq!(trace.requests, vec![0, 0, 1]);
        assert_eq!(trace.library_size, 2);
        assert_eq!(trace.raw_ids, vec![7, 3]);
        assert_eq!(trace.raw_id(1), Some(3));
    }

    #[test]
    fn remap_single_event() {
        let trace = remap_ids(&[event(42, 5)], TraceOrder::FileOrder).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.library_size, 1);
    }

    #[test]
    fn remap_empty_errors() {
        assert!(matches!(remap_ids(&[], TraceOrder::FileOrder), Err(Error::EmptyTrace)));
    }

    #[test]
    fn timestamp_order_resorts_events() {
        let events = vec![event(7, 30), event(3, 10), event(7, 20)];
        let trace = remap_ids(&events, TraceOrder::Timestamp).unwrap();
        // Timestamp order: 3 (t=10), 7 (t=20), 7 (t=30).
        assert_eq!(trace.requests, vec![0, 1, 1]);
        assert_eq!(trace.raw_ids, vec![3, 7]);
    }

    #[test]
    fn stats_examples() {
        let trace = Trace::from_requests(vec![0, 0, 1]);
        let stats = trace_stats(&trace, 1);
        assert_eq!(stats.length, 3);
        assert_eq!(stats.library_size, 2);
        assert_eq!(stats.top, vec![(0, 2)]);

        let empty = Trace::from_requests(vec![]);
        let stats = trace_stats(&empty, 5);
        assert_eq!(stats.length, 0);
        assert_eq!(stats.library_size, 0);
        assert!(stats.top.is_empty());
    }

    #[test]
    fn csv_dump_format() {
        let trace = Trace::from_requests(vec![2, 0]);
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "slot,file_id\n1,2\n2,0\n");
    }
}
