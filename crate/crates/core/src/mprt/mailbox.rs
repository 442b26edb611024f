//! In-process transport: one worker thread per rank, each owning a mailbox
//! of per-`(sender, tag)` FIFO queues. Sends push into the receiver's
//! mailbox and never block; receives block on a condition variable until a
//! matching message is deliverable or the timeout expires.

use super::{Comm, LatencyModel, MprtError, Rank, WorldOptions};
use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

struct Message {
    payload: Vec<u8>,
    /// Earliest instant the message may be observed; models link latency.
    deliver_at: Option<Instant>,
}

/// FIFO queues keyed by `(sender, tag)`, shared by both transports.
#[derive(Default)]
pub(crate) struct TagQueues {
    queues: Mutex<HashMap<(Rank, u32), VecDeque<Message>>>,
    arrived: Condvar,
}

impl TagQueues {
    pub(crate) fn push(&self, from: Rank, tag: u32, payload: Vec<u8>, delay: Option<Duration>) {
        let deliver_at = match delay {
            Some(d) if !d.is_zero() => Some(Instant::now() + d),
            _ => None,
        };
        let mut queues = self.queues.lock().unwrap();
        queues.entry((from, tag)).or_default().push_back(Message { payload, deliver_at });
        self.arrived.notify_all();
    }

    pub(crate) fn pop(&self, from: Rank, tag: u32, timeout: Duration) -> Result<Vec<u8>, MprtError> {
        let started = Instant::now();
        let deadline = started + timeout;
        let mut queues = self.queues.lock().unwrap();
        loop {
            let now = Instant::now();
            let mut wait_until = deadline;
            if let Some(queue) = queues.get_mut(&(from, tag)) {
                if let Some(front) = queue.front() {
                    match front.deliver_at {
                        Some(at) if at > now => {
                            // In flight: latency still to elapse.
                            wait_until = wait_until.min(at);
                        }
                        _ => {
                            let msg = queue.pop_front().expect("front observed");
                            return Ok(msg.payload);
                        }
                    }
                }
            }
            if now >= deadline {
                return Err(MprtError::RecvTimeout {
                    from,
                    tag,
                    waited_ms: started.elapsed().as_millis() as u64,
                });
            }
            let (guard, _timed_out) = self
                .arrived
                .wait_timeout(queues, wait_until.saturating_duration_since(now))
                .unwrap();
            queues = guard;
        }
    }
}

struct WorldState {
    world_size: usize,
    inboxes: Vec<TagQueues>,
    latency: Option<LatencyModel>,
    recv_timeout: Duration,
}

/// One rank's endpoint in an in-process world.
pub struct MailboxComm {
    state: Arc<WorldState>,
    rank: Rank,
    collective_seq: u32,
}

impl Comm for MailboxComm {
    fn rank(&self) -> Rank {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.state.world_size
    }

    fn raw_send(&mut self, to: Rank, tag: u32, payload: &[u8]) -> Result<(), MprtError> {
        let delay = self.state.latency.as_ref().map(|l| l.delay(self.rank, to));
        self.state.inboxes[to].push(self.rank, tag, payload.to_vec(), delay);
        Ok(())
    }

    fn raw_recv(&mut self, from: Rank, tag: u32) -> Result<Vec<u8>, MprtError> {
        self.state.inboxes[self.rank].pop(from, tag, self.state.recv_timeout)
    }

    fn next_collective_tag(&mut self) -> u32 {
        let tag = super::COLLECTIVE_TAG_BASE | self.collective_seq;
        self.collective_seq = (self.collective_seq + 1) & (super::COLLECTIVE_TAG_BASE - 1);
        tag
    }
}

/// Runs `job` once per rank on `world_size` worker threads and returns the
/// per-rank results in rank order. Panics in any worker propagate.
pub fn run_threads<T, F>(world_size: usize, opts: WorldOptions, job: F) -> Vec<T>
where
    F: Fn(&mut MailboxComm) -> T + Sync,
    T: Send,
{
    assert!(world_size >= 1, "world must have at least one rank");
    let state = Arc::new(WorldState {
        world_size,
        inboxes: (0..world_size).map(|_| TagQueues::default()).collect(),
        latency: opts.latency,
        recv_timeout: opts.recv_timeout,
    });
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..world_size)
            .map(|rank| {
                let state = Arc::clone(&state);
                let job = &job;
                scope.spawn(move || {
                    let mut comm = MailboxComm { state, rank, collective_seq: 0 };
                    job(&mut comm)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker rank panicked"))
            .collect()
    })
}
