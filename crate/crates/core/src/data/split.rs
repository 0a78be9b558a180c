//! Train/test splitting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::events::EventLog;
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const PLAYLIST_BUCKETS: u32 = 31;

fn partition(log: &EventLog, mut is_test: impl FnMut(usize) -> bool) -> (EventLog, EventLog) {
    let mut train = EventLog { sessions: Vec::new(), malformed: log.malformed };
    let mut test = EventLog::default();
    for (i, s) in log.sessions.iter().enumerate() {
        if is_test(i) { &mut test } else { &mut train }.sessions.push(s.clone());
    }
    (train, test)
}

/// UTC calendar day holding `t`.
pub fn utc_day(t: f64) -> i64 {
    (t / SECONDS_PER_DAY).floor() as i64
}

/// Sessions ending on the last UTC day go to test; all others to train.
pub fn split_by_last_day(log: &EventLog) -> Result<(EventLog, EventLog)> {
    if !log.has_timestamps() {
        return Err(Error::Protocol(
            "splitting by day needs timestamps on every event; use bucket_playlists for untimed logs".into(),
        ));
    }
    let days: Vec<i64> = log.sessions.iter().map(|s| utc_day(s.last_time().expect("sessions are non-empty"))).collect();
    let last = *days.iter().max().expect("log is non-empty");
    let (train, test) = partition(log, |i| days[i] == last);
    if train.sessions.is_empty() {
        return Err(Error::Input("every session ends on the last day, leaving no training data".into()));
    }
    Ok((train, test))
}

/// Assigns each session to one of 31 buckets uniformly at random; bucket 31 is test.
pub fn bucket_playlists(log: &EventLog, seed: u64) -> (EventLog, EventLog) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets: Vec<u32> = log.sessions.iter().map(|_| rng.gen_range(1..=PLAYLIST_BUCKETS)).collect();
    partition(log, |i| buckets[i] == PLAYLIST_BUCKETS)
}

/// Keeps the most recent `fraction` of sessions (by end time when timed, else file order).
pub fn keep_recent_fraction(log: &EventLog, fraction: f64) -> Result<EventLog> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let n = log.sessions.len();
    let keep = ((n as f64) * fraction).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    if log.has_timestamps() {
        order.sort_by(|&a, &b| log.sessions[a].last_time().unwrap().total_cmp(&log.sessions[b].last_time().unwrap()));
    }
    let mut chosen = order.split_off(n - keep);
    chosen.sort_unstable();
    Ok(EventLog { sessions: chosen.into_iter().map(|i| log.sessions[i].clone()).collect(), malformed: log.malformed })
}

#[cfg(test)]
mod tests {
    use super::super::events::SessionEvents;
    use super::*;

    fn session(id: &str, times: &[f64]) -> SessionEvents {
        SessionEvents { id: id.into(), items: times.iter().map(|t| format!("i{t}")).collect(), times: times.to_vec() }
    }

    fn ids(log: &EventLog) -> Vec<&str> {
        log.sessions.iter().map(|s| s.id.as_str()).collect()
    }

    #[test]
    fn last_day_goes_to_test() {
        let d = SECONDS_PER_DAY;
        let log = EventLog {
            sessions: vec![session("a", &[10.0, 20.0]), session("b", &[d + 5.0]), session("c", &[d - 1.0, 2.0 * d + 1.0])],
            malformed: 0,
        };
        let (train, test) = split_by_last_day(&log).unwrap();
        assert_eq!(ids(&train), ["a", "b"]);
        assert_eq!(ids(&test), ["c"]);
    }

    #[test]
    fn single_day_leaves_no_training_data() {
        let log = EventLog { sessions: vec![session("a", &[1.0]), session("b", &[2.0])], malformed: 0 };
        assert!(matches!(split_by_last_day(&log), Err(Error::Input(_))));
    }

    #[test]
    fn untimed_log_is_a_protocol_error() {
        let log = EventLog { sessions: vec![SessionEvents { id: "p".into(), items: vec!["x".into()], times: vec![] }], malformed: 0 };
        assert!(matches!(split_by_last_day(&log), Err(Error::Protocol(_))));
    }

    #[test]
    fn seven_day_log_is_partitioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sessions: Vec<_> = (0..300)
            .map(|i| {
                let start = rng.gen_range(0.0..7.0 * SECONDS_PER_DAY);
                session(&i.to_string(), &[start, start + rng.gen_range(0.0..3600.0)])
            })
            .collect();
        let log = EventLog { sessions, malformed: 0 };
        let (train, test) = split_by_last_day(&log).unwrap();
        let mut all: Vec<&str> = ids(&train).into_iter().chain(ids(&test)).collect();
        all.sort_unstable();
        let mut want = ids(&log);
        want.sort_unstable();
        assert_eq!(all, want);
        let last = test.sessions.iter().map(|s| utc_day(s.last_time().unwrap())).min().unwrap();
        assert!(train.sessions.iter().all(|s| utc_day(s.last_time().unwrap()) < last));
    }

    #[test]
    fn buckets_are_binomial_and_seeded() {
        let log = EventLog { sessions: (0..31_000).map(|i| session(&i.to_string(), &[])).collect(), malformed: 0 };
        let (train, test) = bucket_playlists(&log, 9);
        let n = 31_000.0;
        let p = 1.0 / 31.0;
        let sigma = n * p * (1.0 - p);
        assert!((test.sessions.len() as f64 - n * p).abs() <= 5.0 * sigma.sqrt());
        assert_eq!(train.sessions.len() + test.sessions.len(), 31_000);
        assert_eq!(bucket_playlists(&log, 9), (train, test));

        let one = EventLog { sessions: vec![session("x", &[])], malformed: 0 };
        let (a, b) = bucket_playlists(&one, 1);
        assert_eq!(a.sessions.len() + b.sessions.len(), 1);
    }

    #[test]
    fn recent_fraction() {
        let log = EventLog {
            sessions: vec![session("old", &[1.0]), session("new", &[9.0]), session("mid", &[5.0])],
            malformed: 0,
        };
        assert_eq!(ids(&keep_recent_fraction(&log, 0.5).unwrap()), ["new", "mid"]);
        assert_eq!(ids(&keep_recent_fraction(&log, 1.0).unwrap()), ["old", "new", "mid"]);
        assert!(keep_recent_fraction(&log, 0.0).is_err());
    }
}
