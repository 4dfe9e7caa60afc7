//! Planner server: frame records in, action records out.
//!
//! A reader thread parses lines and hands frames to the planner over a bounded
//! queue, so a slow planner pushes back on the reader instead of buffering
//! without limit. At end of input the queue is drained before returning.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use log::{info, warn};
use saccade_core::{encode_action_message, parse_frame_message, Agent, FrameMessage};

pub const QUEUE_DEPTH: usize = 64;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ServeStats {
    pub frames: usize,
    pub actions: usize,
    pub malformed: usize,
    /// Frames the agent refused (off-grid fixation, contradictory evidence).
    pub rejected: usize,
    /// Frames folded into the belief without an action because a newer one was queued.
    pub superseded: usize,
}

/// Serves one stream until its input ends.
///
/// With `latest_wins`, frames that queue up while the planner is busy still
/// update the belief, but only the newest of them gets an action.
pub fn serve_stream<R, W>(agent: &mut Agent, reader: R, writer: &mut W, latest_wins: bool) -> io::Result<ServeStats>
where
    R: BufRead + Send,
    W: Write,
{
    let (tx, rx) = mpsc::sync_channel::<FrameMessage>(QUEUE_DEPTH);
    thread::scope(|scope| {
        let ingest = scope.spawn(move || -> io::Result<usize> {
            let mut malformed = 0;
            for (n, line) in reader.split(b'\n').enumerate() {
                let line = line?;
                if line.trim_ascii().is_empty() {
                    continue;
                }
                match parse_frame_message(&line) {
                    Ok(msg) => {
                        if tx.send(msg).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        warn!("input line {}: {}", n + 1, e.reason);
                        malformed += 1;
                    }
                }
            }
            Ok(malformed)
        });

        let mut stats = ServeStats::default();
        let planned = plan_loop(agent, &rx, writer, latest_wins, &mut stats);
        // unblock the reader if planning stopped early
        drop(rx);
        let read = ingest.join().expect("ingest thread panicked");
        planned?;
        stats.malformed = read?;
        Ok(stats)
    })
}

fn plan_loop<W: Write>(
    agent: &mut Agent,
    rx: &mpsc::Receiver<FrameMessage>,
    writer: &mut W,
    latest_wins: bool,
    stats: &mut ServeStats,
) -> io::Result<()> {
    while let Ok(mut msg) = rx.recv() {
        stats.frames += 1;
        if latest_wins {
            while let Ok(newer) = rx.try_recv() {
                stats.frames += 1;
                stats.superseded += 1;
                if let Err(e) = agent.ingest_message(&msg) {
                    warn!("frame t={}: {e}", msg.t);
                    stats.rejected += 1;
                }
                msg = newer;
            }
        }
        match agent.handle_frame(&msg) {
            Ok(action) => {
                let mut line = encode_action_message(action.t, action.fixation);
                line.push(b'\n');
                writer.write_all(&line)?;
                writer.flush()?;
                stats.actions += 1;
            }
            Err(e) => {
                warn!("frame t={}: {e}", msg.t);
                stats.rejected += 1;
            }
        }
    }
    Ok(())
}

pub fn serve_stdio(agent: &mut Agent, latest_wins: bool) -> io::Result<ServeStats> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serve_stream(agent, BufReader::new(io::stdin()), &mut out, latest_wins)
}

/// Accepts connections one at a time; the belief carries over between them so
/// a reconnecting client resumes where it left off. Stops after
/// `max_connections` when given.
pub fn serve_tcp(
    agent: &mut Agent,
    listener: TcpListener,
    latest_wins: bool,
    max_connections: Option<usize>,
) -> io::Result<()> {
    let mut served = 0;
    for conn in listener.incoming() {
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
        info!("client {peer} connected");
        let reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;
        match serve_stream(agent, reader, &mut writer, latest_wins) {
            Ok(stats) => info!("client {peer} done: {stats:?}"),
            Err(e) => warn!("client {peer}: {e}"),
        }
        served += 1;
        if max_connections.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use saccade_core::{encode_frame_message, BBox, Block, Detection, GridSpec, PlannerConfig};

    use super::*;

    fn agent() -> Agent {
        Agent::new(PlannerConfig::new(GridSpec::new(9, 9, 3, 3).unwrap())).unwrap()
    }

    fn frames(n: u64) -> Vec<Vec<u8>> {
        (0..n)
            .map(|t| {
                let det = Detection::new(BBox::new(0.1 * (t % 7) as f64, 0.3, 0.2, 0.2), 0.8, "person");
                encode_frame_message(t, Block::new((t % 9) as usize, 4), &[det])
            })
            .collect()
    }

    fn join(lines: &[Vec<u8>]) -> Vec<u8> {
        lines.iter().flat_map(|l| l.iter().copied().chain(*b"\n")).collect()
    }

    #[test]
    fn one_action_per_frame_in_order() {
        let input = frames(30);
        let mut out = Vec::new();
        let stats = serve_stream(&mut agent(), Cursor::new(join(&input)), &mut out, false).unwrap();
        assert_eq!((stats.frames, stats.actions), (30, 30));

        let mut reference = agent();
        let expected: Vec<u8> = input
            .iter()
            .flat_map(|l| {
                let a = reference.handle_frame(&parse_frame_message(l).unwrap()).unwrap();
                let mut line = encode_action_message(a.t, a.fixation);
                line.push(b'\n');
                line
            })
            .collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn malformed_lines_are_skipped() {
        let mut input = frames(3);
        input.insert(1, b"{\"type\":\"frame\",\"t\":".to_vec());
        input.insert(3, vec![0xff, 0xfe]);
        let mut out = Vec::new();
        let stats = serve_stream(&mut agent(), Cursor::new(join(&input)), &mut out, false).unwrap();
        assert_eq!((stats.malformed, stats.actions), (2, 3));
        assert_eq!(out.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count(), 3);
    }

    #[test]
    fn empty_input() {
        let mut out = Vec::new();
        let stats = serve_stream(&mut agent(), Cursor::new(Vec::new()), &mut out, false).unwrap();
        assert_eq!(stats, ServeStats::default());
        assert!(out.is_empty());
    }

    #[test]
    fn off_grid_frame_is_rejected_not_fatal() {
        let mut input = frames(2);
        input.insert(1, encode_frame_message(7, Block::new(20, 0), &[]));
        let mut out = Vec::new();
        let stats = serve_stream(&mut agent(), Cursor::new(join(&input)), &mut out, false).unwrap();
        assert_eq!((stats.rejected, stats.actions), (1, 2));
    }

    #[test]
    fn latest_wins_answers_the_last_frame() {
        let input = frames(200);
        let mut out = Vec::new();
        let stats = serve_stream(&mut agent(), Cursor::new(join(&input)), &mut out, true).unwrap();
        assert_eq!(stats.frames, 200);
        assert_eq!(stats.actions + stats.superseded, 200);
        let last = out.split(|&b| b == b'\n').rfind(|l| !l.is_empty()).unwrap();
        assert_eq!(saccade_core::parse_action_message(last).unwrap().t, 199);
    }
}
