//! Socket transport: ranks exchange length-prefix framed messages over TCP,
//! so a world can span multiple processes (or machines on a LAN).
//!
//! Wire frame, all fields little-endian:
//!
//! ```text
//! [4-byte payload length][4-byte tag][4-byte sender rank][payload bytes]
//! ```
//!
//! Rank `r` listens at `base_port + r` on the configured address. Outbound
//! connections open lazily on first send and start with a 4-byte hello
//! carrying the sender's rank. Incoming frames land in the same tag-queue
//! mailbox the in-process transport uses, where injected latency (if any)
//! is applied on arrival.

use super::mailbox::TagQueues;
use super::{Comm, LatencyModel, MprtError, Rank, WorldOptions};
use std::io::{ErrorKind, Read, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU16, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

const FRAME_HEADER_LEN: usize = 12;
const READ_POLL: Duration = Duration::from_millis(50);

/// Encodes one wire frame.
pub fn encode_frame(tag: u32, sender: Rank, payload: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&tag.to_le_bytes());
    buf.extend_from_slice(&(sender as u32).to_le_bytes());
    buf.extend_from_slice(payload);
    buf
}

/// Parses one frame from the front of `buf` if complete, consuming it.
pub fn decode_frame(buf: &mut Vec<u8>) -> Option<(u32, Rank, Vec<u8>)> {
    if buf.len() < FRAME_HEADER_LEN {
        return None;
    }
    let len = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
    if buf.len() < FRAME_HEADER_LEN + len {
        return None;
    }
    let tag = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let sender = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as Rank;
    let payload = buf[FRAME_HEADER_LEN..FRAME_HEADER_LEN + len].to_vec();
    buf.drain(..FRAME_HEADER_LEN + len);
    Some((tag, sender, payload))
}

/// Where a socket world lives: rank `r` is reachable at `ip:base_port + r`.
#[derive(Clone, Copy, Debug)]
pub struct SocketWorldAddr {
    pub ip: IpAddr,
    pub base_port: u16,
}

impl SocketWorldAddr {
    pub fn loopback(base_port: u16) -> Self {
        SocketWorldAddr { ip: IpAddr::V4(Ipv4Addr::LOCALHOST), base_port }
    }

    pub fn rank_addr(&self, rank: Rank) -> SocketAddr {
        SocketAddr::new(self.ip, self.base_port + rank as u16)
    }
}

#[derive(Clone, Debug)]
pub struct SocketConfig {
    pub world_size: usize,
    pub rank: Rank,
    pub addr: SocketWorldAddr,
    pub opts: WorldOptions,
    /// How long to keep retrying connections to peers that have not bound
    /// their listener yet.
    pub connect_timeout: Duration,
}

impl SocketConfig {
    pub fn new(world_size: usize, rank: Rank, addr: SocketWorldAddr, opts: WorldOptions) -> Self {
        SocketConfig { world_size, rank, addr, opts, connect_timeout: Duration::from_secs(10) }
    }
}

/// One rank's endpoint in a socket world.
pub struct SocketComm {
    rank: Rank,
    world_size: usize,
    addr: SocketWorldAddr,
    inbox: Arc<TagQueues>,
    outbound: Vec<Option<TcpStream>>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    recv_timeout: Duration,
    connect_timeout: Duration,
    collective_seq: u32,
}

impl SocketComm {
    /// Binds this rank's listener and starts accepting peers. Returns once
    /// the mailbox is live; outbound connections are opened lazily.
    pub fn connect(cfg: SocketConfig) -> Result<Self, MprtError> {
        assert!(cfg.rank < cfg.world_size, "rank out of range");
        let listener = TcpListener::bind(cfg.addr.rank_addr(cfg.rank)).map_err(|e| MprtError::Transport {
            rank: cfg.rank,
            detail: format!("bind {}: {e}", cfg.addr.rank_addr(cfg.rank)),
        })?;
        listener
            .set_nonblocking(true)
            .map_err(|e| MprtError::Transport { rank: cfg.rank, detail: format!("set_nonblocking: {e}") })?;

        let inbox = Arc::new(TagQueues::default());
        let stop = Arc::new(AtomicBool::new(false));
        let latency = cfg.opts.latency.clone();
        let me = cfg.rank;

        let acceptor = {
            let inbox = Arc::clone(&inbox);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                accept_loop(listener, me, inbox, latency, stop);
            })
        };

        Ok(SocketComm {
            rank: cfg.rank,
            world_size: cfg.world_size,
            addr: cfg.addr,
            inbox,
            outbound: (0..cfg.world_size).map(|_| None).collect(),
            stop,
            threads: vec![acceptor],
            recv_timeout: cfg.opts.recv_timeout,
            connect_timeout: cfg.connect_timeout,
            collective_seq: 0,
        })
    }

    fn stream_to(&mut self, to: Rank) -> Result<&mut TcpStream, MprtError> {
        if self.outbound[to].is_none() {
            let target = self.addr.rank_addr(to);
            let deadline = Instant::now() + self.connect_timeout;
            let stream = loop {
                match TcpStream::connect(target) {
                    Ok(s) => break s,
                    // Peer may not have bound its listener yet.
                    Err(_) if Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(e) => {
                        return Err(MprtError::Transport {
                            rank: to,
                            detail: format!("connect {target}: {e}"),
                        })
                    }
                }
            };
            stream
                .set_nodelay(true)
                .map_err(|e| MprtError::Transport { rank: to, detail: format!("nodelay: {e}") })?;
            let mut stream = stream;
            stream
                .write_all(&(self.rank as u32).to_le_bytes())
                .map_err(|e| MprtError::Transport { rank: to, detail: format!("hello: {e}") })?;
            self.outbound[to] = Some(stream);
        }
        Ok(self.outbound[to].as_mut().expect("just connected"))
    }
}

fn accept_loop(
    listener: TcpListener,
    me: Rank,
    inbox: Arc<TagQueues>,
    latency: Option<LatencyModel>,
    stop: Arc<AtomicBool>,
) {
    let mut readers: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _peer)) => {
                let inbox = Arc::clone(&inbox);
                let stop = Arc::clone(&stop);
                let latency = latency.clone();
                readers.push(std::thread::spawn(move || {
                    reader_loop(stream, me, inbox, latency, stop);
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(_) => break,
        }
    }
    for r in readers {
        let _ = r.join();
    }
}

fn reader_loop(
    mut stream: TcpStream,
    me: Rank,
    inbox: Arc<TagQueues>,
    latency: Option<LatencyModel>,
    stop: Arc<AtomicBool>,
) {
    let _ = stream.set_read_timeout(Some(READ_POLL));
    let _ = stream.set_nodelay(true);
    let mut buf: Vec<u8> = Vec::new();
    let mut chunk = [0u8; 64 * 1024];
    let mut sender: Option<Rank> = None;
    loop {
        if stop.load(Ordering::Relaxed) {
            return;
        }
        match stream.read(&mut chunk) {
            Ok(0) => return, // peer closed
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                if sender.is_none() && buf.len() >= 4 {
                    let hello = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as Rank;
                    sender = Some(hello);
                    buf.drain(..4);
                }
                if let Some(from) = sender {
                    while let Some((tag, frame_sender, payload)) = decode_frame(&mut buf) {
                        debug_assert_eq!(frame_sender, from, "frame sender differs from hello");
                        let delay = latency.as_ref().map(|l| l.delay(from, me));
                        inbox.push(from, tag, payload, delay);
                    }
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {}
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(_) => return,
        }
    }
}

impl Comm for SocketComm {
    fn rank(&self) -> Rank {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.world_size
    }

    fn raw_send(&mut self, to: Rank, tag: u32, payload: &[u8]) -> Result<(), MprtError> {
        let rank = self.rank;
        let frame = encode_frame(tag, rank, payload);
        let stream = self.stream_to(to)?;
        stream
            .write_all(&frame)
            .map_err(|e| MprtError::Transport { rank: to, detail: format!("send tag {tag}: {e}") })
    }

    fn raw_recv(&mut self, from: Rank, tag: u32) -> Result<Vec<u8>, MprtError> {
        self.inbox.pop(from, tag, self.recv_timeout)
    }

    fn next_collective_tag(&mut self) -> u32 {
        let tag = super::COLLECTIVE_TAG_BASE | self.collective_seq;
        self.collective_seq = (self.collective_seq + 1) & (super::COLLECTIVE_TAG_BASE - 1);
        tag
    }
}

impl Drop for SocketComm {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for s in self.outbound.iter_mut().flatten() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

static NEXT_BASE_PORT: AtomicU16 = AtomicU16::new(23_100);

/// Allocates a block of `world_size` consecutive loopback ports that are
/// currently bindable. Distinct calls within one process never overlap;
/// collisions with other processes surface as bind errors at connect time.
pub fn alloc_port_base(world_size: usize) -> u16 {
    loop {
        let base = NEXT_BASE_PORT.fetch_add(world_size.max(1) as u16 + 2, Ordering::Relaxed);
        if base > 60_000 {
            NEXT_BASE_PORT.store(23_100, Ordering::Relaxed);
            continue;
        }
        let all_free = (0..world_size as u16).all(|i| {
            TcpListener::bind((Ipv4Addr::LOCALHOST, base + i)).is_ok()
        });
        if all_free {
            return base;
        }
    }
}

/// Runs `job` once per rank, each rank on its own thread with its own socket
/// endpoint over loopback TCP. Exercises the real wire path; the multi-
/// process deployment differs only in where the threads live.
pub fn run_socket_threads<T, F>(world_size: usize, opts: WorldOptions, job: F) -> Vec<T>
where
    F: Fn(&mut SocketComm) -> T + Sync,
    T: Send,
{
    let addr = SocketWorldAddr::loopback(alloc_port_base(world_size));
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..world_size)
            .map(|rank| {
                let opts = opts.clone();
                let job = &job;
                scope.spawn(move || {
                    let cfg = SocketConfig::new(world_size, rank, addr, opts);
                    let mut comm = SocketComm::connect(cfg).expect("socket world setup");
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mprt::partition;

    #[test]
    fn wire_format_is_pinned() {
        let frame = encode_frame(0x0102_0304, 7, &[0xAA, 0xBB]);
        assert_eq!(
            frame,
            vec![
                2, 0, 0, 0, // payload length, LE
                0x04, 0x03, 0x02, 0x01, // tag, LE
                7, 0, 0, 0, // sender rank, LE
                0xAA, 0xBB,
            ]
        );
        let mut buf = frame;
        buf.extend_from_slice(&encode_frame(1, 0, &[]));
        let (tag, sender, payload) = decode_frame(&mut buf).unwrap();
        assert_eq!((tag, sender, payload), (0x0102_0304, 7, vec![0xAA, 0xBB]));
        let (tag2, sender2, payload2) = decode_frame(&mut buf).unwrap();
        assert_eq!((tag2, sender2, payload2), (1, 0, vec![]));
        assert!(buf.is_empty());
        assert!(decode_frame(&mut buf).is_none());
    }

    #[test]
    fn decode_waits_for_complete_frame() {
        let full = encode_frame(5, 1, &[1, 2, 3, 4]);
        let mut partial = full[..9].to_vec();
        assert!(decode_frame(&mut partial).is_none());
        partial.extend_from_slice(&full[9..]);
        let (tag, sender, payload) = decode_frame(&mut partial).unwrap();
        assert_eq!((tag, sender, payload), (5, 1, vec![1, 2, 3, 4]));
    }

    #[test]
    fn socket_send_recv_and_collectives() {
        let results = run_socket_threads(3, WorldOptions::default(), |comm| {
            let me = comm.rank();
            if me == 0 {
                comm.send(1, 4, b"to-one").unwrap();
                comm.send(2, 4, b"to-two").unwrap();
            }
            let p2p = match me {
                1 => comm.recv(0, 4).unwrap(),
                2 => comm.recv(0, 4).unwrap(),
                _ => Vec::new(),
            };
            let bc = comm.bcast(1, if me == 1 { b"hello" } else { b"" }).unwrap();
            let part = partition(5, 3).unwrap();
            let local = vec![me as u8; part.count(me)];
            let gathered = comm.gatherv(2, &local, &part, 1).unwrap();
            (p2p, bc, gathered)
        });
        assert_eq!(results[1].0, b"to-one");
        assert_eq!(results[2].0, b"to-two");
        for r in &results {
            assert_eq!(r.1, b"hello");
        }
        assert_eq!(results[2].2, vec![0, 0, 1, 1, 2]);
        assert_eq!(results[0].2, Vec::<u8>::new());
    }

    #[test]
    fn socket_fifo_large_payloads() {
        let results = run_socket_threads(2, WorldOptions::default(), |comm| {
            if comm.rank() == 0 {
                let big = vec![0x5Au8; 1 << 20];
                comm.send(1, 2, &big).unwrap();
                comm.send(1, 2, b"tail").unwrap();
                (0, Vec::new())
            } else {
                let big = comm.recv(0, 2).unwrap();
                let tail = comm.recv(0, 2).unwrap();
                (big.len(), tail)
            }
        });
        assert_eq!(results[1].0, 1 << 20);
        assert_eq!(results[1].1, b"tail");
    }

    #[test]
    fn socket_latency_injection() {
        let opts = WorldOptions {
            latency: Some(LatencyModel::two_tier(2, 2, 0, 25_000)),
            recv_timeout: Duration::from_secs(5),
        };
        let results = run_socket_threads(2, opts, |comm| {
            if comm.rank() == 0 {
                comm.send(1, 1, b"x").unwrap();
                Duration::ZERO
            } else {
                let t0 = Instant::now();
                comm.recv(0, 1).unwrap();
                t0.elapsed()
            }
        });
        assert!(results[1] >= Duration::from_millis(20), "elapsed {:?}", results[1]);
    }
}
