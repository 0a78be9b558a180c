//! Parses a click log, splits off the last day and filters rare items.
//!
//! `cargo run --example ingest_csv [-- clicks.csv]`

use std::fs::File;

use qsrec::data::{build_corpora, parse_events, EventFormat, FilterConfig, IngestConfig};

const SAMPLE: &str = "SessionId,ItemId,Time
1,apple,2014-04-01T10:00:00Z
1,pear,2014-04-01T10:01:00Z
1,apple,2014-04-01T10:02:00Z
2,pear,2014-04-01T11:00:00Z
2,plum,2014-04-01T11:05:00Z
3,plum,2014-04-02T09:00:00Z
3,apple,2014-04-02T09:01:00Z
3,fig,2014-04-02T09:02:00Z
4,fig,2014-04-02T12:00:00Z
";

fn main() -> qsrec::Result<()> {
    let log = match std::env::args().nth(1) {
        Some(path) => parse_events(File::open(path)?, EventFormat::ClickCsv)?,
        None => parse_events(SAMPLE.as_bytes(), EventFormat::ClickCsv)?,
    };
    println!("{} sessions, {} clicks, {} malformed rows", log.sessions.len(), log.record_count(), log.malformed);

    let config = IngestConfig { filter: FilterConfig { min_session_len: 2, min_item_support: 1 }, ..IngestConfig::default() };
    let (train, test) = build_corpora(&log, &config)?;
    println!("vocabulary: {:?}", train.vocab.tokens());
    println!("train sessions: {:?}", train.sessions);
    println!("test sessions:  {:?}", test.sessions);
    Ok(())
}
