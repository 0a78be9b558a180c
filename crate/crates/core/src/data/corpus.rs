//! Vocabularies, filtered session corpora and the corpus cache.

use std::collections::HashMap;
use std::path::Path;

use super::events::EventLog;
use crate::error::{Error, Result};
use crate::io::{invalid, put_str, put_u32, read_file, to_u32, write_atomic, Reader};

const CORPUS_MAGIC: &[u8] = b"QSCORP1";

/// Bijection between item tokens and dense indices `0..V`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Input(format!("token {t:?} appears twice in the vocabulary")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Indexed sessions over a vocabulary built from the training split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionCorpus {
    pub sessions: Vec<Vec<u32>>,
    pub vocab: Vocab,
}

impl SessionCorpus {
    pub fn new(sessions: Vec<Vec<u32>>, vocab: Vocab) -> Result<Self> {
        let v = vocab.len();
        for (i, s) in sessions.iter().enumerate() {
            if s.len() < 2 {
                return Err(Error::Input(format!("session {i} has fewer than two events")));
            }
            if let Some(&bad) = s.iter().find(|&&x| x as usize >= v) {
                return Err(Error::Index(format!("session {i} refers to item {bad} outside vocabulary of {v}")));
            }
        }
        Ok(SessionCorpus { sessions, vocab })
    }

    pub fn event_count(&self) -> usize {
        self.sessions.iter().map(Vec::len).sum()
    }

    /// Number of `(x → next)` prediction events.
    pub fn transition_count(&self) -> usize {
        self.sessions.iter().map(|s| s.len() - 1).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_session_len: usize,
    pub min_item_support: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { min_session_len: 2, min_item_support: 5 }
    }
}

/// Filters both splits and indexes them against a vocabulary built from train alone.
///
/// Items with fewer than `min_item_support` training events are removed
/// everywhere, then sessions shorter than `min_session_len` are dropped.
pub fn finalize_corpus(train: &EventLog, test: &EventLog, filter: FilterConfig) -> Result<(SessionCorpus, SessionCorpus)> {
    if filter.min_session_len < 2 {
        return Err(Error::Config("sessions need at least two events to yield a prediction".into()));
    }
    let mut support: HashMap<&str, usize> = HashMap::new();
    for s in &train.sessions {
        for item in &s.items {
            *support.entry(item.as_str()).or_default() += 1;
        }
    }
    let supported = |item: &str| support.get(item).is_some_and(|&c| c >= filter.min_item_support);

    let mut tokens = Vec::new();
    let mut index: HashMap<&str, u32> = HashMap::new();
    let mut train_sessions = Vec::new();
    for s in &train.sessions {
        let kept: Vec<&str> = s.items.iter().map(String::as_str).filter(|i| supported(i)).collect();
        if kept.len() < filter.min_session_len {
            continue;
        }
        let ids = kept
            .into_iter()
            .map(|item| {
                *index.entry(item).or_insert_with(|| {
                    tokens.push(item.to_string());
                    (tokens.len() - 1) as u32
                })
            })
            .collect();
        train_sessions.push(ids);
    }
    if train_sessions.is_empty() {
        return Err(Error::Input("no training sessions survive filtering".into()));
    }

    let test_sessions: Vec<Vec<u32>> = test
        .sessions
        .iter()
        .map(|s| s.items.iter().filter_map(|i| index.get(i.as_str()).copied()).collect::<Vec<_>>())
        .filter(|s| s.len() >= filter.min_session_len)
        .collect();

    let vocab = Vocab::from_tokens(tokens)?;
    Ok((SessionCorpus::new(train_sessions, vocab.clone())?, SessionCorpus::new(test_sessions, vocab)?))
}

pub fn encode_corpus(corpus: &SessionCorpus) -> Result<Vec<u8>> {
    let mut out = CORPUS_MAGIC.to_vec();
    put_u32(&mut out, to_u32(corpus.vocab.len(), "vocabulary size")?);
    put_u32(&mut out, to_u32(corpus.sessions.len(), "session count")?);
    for s in &corpus.sessions {
        put_u32(&mut out, to_u32(s.len(), "session length")?);
        s.iter().for_each(|&i| put_u32(&mut out, i));
    }
    for t in corpus.vocab.tokens() {
        put_str(&mut out, t);
    }
    Ok(out)
}

pub fn decode_corpus(bytes: &[u8]) -> Result<SessionCorpus> {
    let mut r = Reader::new(bytes);
    r.expect_magic(CORPUS_MAGIC)?;
    let v = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut sessions = Vec::with_capacity(count.min(r.remaining() / 4));
    for _ in 0..count {
        let len = r.u32()? as usize;
        if len > r.remaining() / 4 {
            return Err(invalid("session length runs past end of file").into());
        }
        sessions.push((0..len).map(|_| r.u32()).collect::<std::io::Result<Vec<u32>>>()?);
    }
    let tokens = (0..v).map(|_| r.string()).collect::<std::io::Result<Vec<_>>>()?;
    r.finish()?;
    let vocab = Vocab::from_tokens(tokens).map_err(|e| invalid(e.to_string()))?;
    SessionCorpus::new(sessions, vocab).map_err(|e| invalid(e.to_string()).into())
}

pub fn save_corpus(corpus: &SessionCorpus, path: &Path) -> Result<()> {
    Ok(write_atomic(path, &encode_corpus(corpus)?)?)
}

pub fn load_corpus(path: &Path) -> Result<SessionCorpus> {
    decode_corpus(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::super::events::SessionEvents;
    use super::*;
    use proptest::prelude::*;

    fn log(sessions: &[&[&str]]) -> EventLog {
        EventLog {
            sessions: sessions
                .iter()
                .enumerate()
                .map(|(i, s)| SessionEvents { id: i.to_string(), items: s.iter().map(|x| x.to_string()).collect(), times: vec![] })
                .collect(),
            malformed: 0,
        }
    }

    #[test]
    fn rare_items_removed_everywhere() {
        let train = log(&[&["a", "b", "rare"], &["a", "b"], &["b", "a"]]);
        let test = log(&[&["rare", "a", "b"], &["rare", "a"]]);
        let f = FilterConfig { min_session_len: 2, min_item_support: 2 };
        let (tr, te) = finalize_corpus(&train, &test, f).unwrap();
        assert_eq!(tr.vocab.tokens(), ["a", "b"]);
        assert_eq!(tr.sessions, [vec![0, 1], vec![0, 1], vec![1, 0]]);
        // The second test session shrinks to one event and is dropped.
        assert_eq!(te.sessions, [vec![0, 1]]);
    }

    #[test]
    fn empty_train_after_filtering_is_an_error() {
        let train = log(&[&["a", "b"]]);
        assert!(matches!(finalize_corpus(&train, &log(&[]), FilterConfig::default()), Err(Error::Input(_))));
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let train = log(&[&["x", "y", "z"], &["z", "x"]]);
        let f = FilterConfig { min_session_len: 2, min_item_support: 1 };
        let (tr, _) = finalize_corpus(&train, &log(&[]), f).unwrap();
        let bytes = encode_corpus(&tr).unwrap();
        assert_eq!(decode_corpus(&bytes).unwrap(), tr);
        assert!(matches!(decode_corpus(&bytes[..bytes.len() - 1]), Err(Error::Io(_))));
        let mut bad = bytes.clone();
        bad[19] = 200; // first index of the first session
        assert!(matches!(decode_corpus(&bad), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn test_indices_map_back_to_train_tokens(
            train in prop::collection::vec(prop::collection::vec(0u8..30, 1..8), 1..40),
            test in prop::collection::vec(prop::collection::vec(0u8..40, 1..8), 0..20),
        ) {
            let as_log = |s: &Vec<Vec<u8>>| EventLog {
                sessions: s.iter().enumerate().map(|(i, s)| SessionEvents {
                    id: i.to_string(), items: s.iter().map(|x| format!("t{x}")).collect(), times: vec![],
                }).collect(),
                malformed: 0,
            };
            let (train_log, test_log) = (as_log(&train), as_log(&test));
            let f = FilterConfig { min_session_len: 2, min_item_support: 2 };
            match finalize_corpus(&train_log, &test_log, f) {
                Ok((tr, te)) => {
                    let train_tokens: std::collections::HashSet<&String> = train_log.sessions.iter().flat_map(|s| &s.items).collect();
                    for s in tr.sessions.iter().chain(&te.sessions) {
                        prop_assert!(s.len() >= 2);
                        for &i in s {
                            prop_assert!((i as usize) < tr.vocab.len());
                            prop_assert!(train_tokens.contains(&tr.vocab.token(i).unwrap().to_string()));
                        }
                    }
                }
                Err(e) => prop_assert!(matches!(e, Error::Input(_))),
            }
        }
    }
}
