//! Session-parallel mini-batches.
//!
//! Each of `batch_size` slots walks one session a click at a time, emitting
//! `(x_t → x_{t+1})`. When a slot's session runs out the next unread
//! session takes its place with the reset flag set; once no sessions are
//! left the slot idles. The stream ends when every slot is idle.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotStep {
    pub input: u32,
    pub target: u32,
    /// The slot just started a new session; its hidden state must be zeroed.
    pub reset: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub slots: Vec<Option<SlotStep>>,
}

impl Batch {
    pub fn active(&self) -> impl Iterator<Item = (usize, &SlotStep)> {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (i, s)))
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

/// Iterator over the batches of one pass through the corpus.
#[derive(Clone, Debug)]
pub struct SessionParallelBatches<'a> {
    sessions: &'a [Vec<u32>],
    order: Vec<usize>,
    next: usize,
    /// `(session index, position of the current input)` per slot.
    cursors: Vec<Option<(usize, usize)>>,
}

/// Batches over `sessions` taken in their stored order.
pub fn session_parallel_batches(sessions: &[Vec<u32>], batch_size: usize) -> Result<SessionParallelBatches<'_>> {
    session_parallel_batches_in_order(sessions, (0..sessions.len()).collect(), batch_size)
}

/// Batches over `sessions` visited in `order`.
pub fn session_parallel_batches_in_order(
    sessions: &[Vec<u32>],
    order: Vec<usize>,
    batch_size: usize,
) -> Result<SessionParallelBatches<'_>> {
    if sessions.is_empty() {
        return Err(Error::Input("cannot batch an empty corpus".into()));
    }
    if batch_size == 0 {
        return Err(Error::Input("batch size must be at least 1".into()));
    }
    if let Some(i) = sessions.iter().position(|s| s.len() < 2) {
        return Err(Error::Input(format!("session {i} has fewer than two events")));
    }
    if order.iter().any(|&i| i >= sessions.len()) {
        return Err(Error::Input("session order refers past the corpus".into()));
    }
    Ok(SessionParallelBatches { sessions, order, next: 0, cursors: vec![None; batch_size] })
}

impl Iterator for SessionParallelBatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let mut slots = Vec::with_capacity(self.cursors.len());
        for cursor in self.cursors.iter_mut() {
            let mut reset = false;
            match cursor {
                Some((s, pos)) if *pos + 2 < self.sessions[*s].len() => *pos += 1,
                _ => {
                    *cursor = self.order.get(self.next).map(|&s| (s, 0));
                    if cursor.is_some() {
                        self.next += 1;
                        reset = true;
                    }
                }
            }
            slots.push(cursor.map(|(s, pos)| {
                let session = &self.sessions[s];
                SlotStep { input: session[pos], target: session[pos + 1], reset }
            }));
        }
        slots.iter().any(Option::is_some).then_some(Batch { slots })
    }
}
