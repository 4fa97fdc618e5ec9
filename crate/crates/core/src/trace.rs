//! Execution traces: start and end events of layers and syncs, one JSON
//! object per line.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub item: String,
    pub transition: String,
    pub kind: EventKind,
    /// Nanoseconds since the start of the run, monotonic.
    pub t_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(events: Vec<TraceEvent>) -> Self {
        Trace { events }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Events of one item, in log order.
    pub fn of_item<'a>(&'a self, item: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.item == item)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    MalformedEvent { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_trace(trace: &Trace, mut sink: impl Write) -> io::Result<()> {
    for e in &trace.events {
        serde_json::to_writer(&mut sink, e)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// Reads a JSON-lines trace. Blank lines are skipped.
pub fn read_trace(source: impl BufRead) -> Result<Trace, TraceError> {
    let mut events = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| TraceError::MalformedEvent {
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(Trace { events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(item: &str, t: &str, kind: EventKind, t_ns: u64) -> TraceEvent {
        TraceEvent {
            item: item.into(),
            transition: t.into(),
            kind,
            t_ns,
        }
    }

    #[test]
    fn round_trip() {
        let trace = Trace::new(vec![
            ev("item1", "o1", EventKind::Start, 5),
            ev("item1", "o1", EventKind::End, 9),
        ]);
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"item":"item1","transition":"o1","kind":"start","t_ns":5}"#
        );
        assert_eq!(read_trace(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn missing_timestamp() {
        let text = "{\"item\":\"a\",\"transition\":\"o1\",\"kind\":\"start\",\"t_ns\":1}\n{\"item\":\"a\",\"transition\":\"o1\",\"kind\":\"end\"}\n";
        match read_trace(text.as_bytes()) {
            Err(TraceError::MalformedEvent { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file() {
        assert!(read_trace(&b""[..]).unwrap().is_empty());
    }
}
