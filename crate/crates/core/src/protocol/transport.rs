use std::io::{BufReader, BufWriter, Read, Write};
use std::thread;
use std::time::Duration;

use super::frame::{read_message, write_message};
use super::message::{Kind, Message};
use super::transcript::{Direction, OpKind, Transcript};
use crate::block::EncryptedBlock;
use crate::crypto::LabelCiphertext;
use crate::error::{Error, Result};

/// Answers server requests. Implemented by the real client and by the
/// simulator's oracle-backed stand-in.
pub trait Responder {
    fn respond(&mut self, msg: &Message) -> Result<Vec<Message>>;
}

/// The server's connection to its client: one call is one blocking exchange.
pub trait ClientLink {
    fn exchange(&mut self, requests: &[Message]) -> Result<Vec<Message>>;
}

/// Number of replies a well-behaved client sends for a batch of requests.
pub fn expected_replies(requests: &[Message]) -> usize {
    requests
        .iter()
        .map(|m| match m {
            Message::SplitPivots { .. } => 1,
            Message::SplitStreamItem { .. } => 1,
            Message::SortRequest { .. }
            | Message::LocateRequest { .. }
            | Message::MopeNode { .. } => 1,
            _ => 0,
        })
        .sum()
}

/// Server-side handle used by the tree algorithms: records every message in
/// the transcript and counts rounds.
pub struct Channel<'a> {
    link: &'a mut dyn ClientLink,
    transcript: &'a mut Transcript,
}

impl<'a> Channel<'a> {
    pub fn new(link: &'a mut dyn ClientLink, transcript: &'a mut Transcript) -> Self {
        Channel { link, transcript }
    }

    /// Sends `requests` as one pipelined exchange and waits for every reply.
    pub fn round(&mut self, requests: Vec<Message>) -> Result<Vec<Message>> {
        debug_assert!(requests.first().is_some_and(|m| m.kind().opens_round()));
        self.transcript.note_round();
        for r in &requests {
            self.transcript.record(Direction::ToClient, r);
        }
        let replies = self.link.exchange(&requests)?;
        for r in &replies {
            self.transcript.record(Direction::ToServer, r);
            if let Message::Error { code, message } = r {
                return Err(Error::Remote {
                    code: *code,
                    message: message.clone(),
                });
            }
        }
        let want = expected_replies(&requests);
        if replies.len() != want {
            return Err(Error::protocol(format!(
                "expected {want} replies, got {}",
                replies.len()
            )));
        }
        Ok(replies)
    }
}

/// Server-side protocol logic for one scheme.
pub trait RangeServer {
    fn insert(&mut self, block: EncryptedBlock, ch: &mut Channel<'_>) -> Result<()>;

    fn search(
        &mut self,
        left: LabelCiphertext,
        right: LabelCiphertext,
        ch: &mut Channel<'_>,
    ) -> Result<Vec<EncryptedBlock>>;

    /// Called once after every client operation, successful or not.
    fn end_op(&mut self) {}

    /// Interactive inserts end with an `Ack` so the client knows the
    /// exchange is over.
    fn acknowledges_inserts(&self) -> bool {
        false
    }
}

impl<S: RangeServer + ?Sized> RangeServer for Box<S> {
    fn insert(&mut self, block: EncryptedBlock, ch: &mut Channel<'_>) -> Result<()> {
        (**self).insert(block, ch)
    }

    fn search(
        &mut self,
        left: LabelCiphertext,
        right: LabelCiphertext,
        ch: &mut Channel<'_>,
    ) -> Result<Vec<EncryptedBlock>> {
        (**self).search(left, right, ch)
    }

    fn end_op(&mut self) {
        (**self).end_op()
    }

    fn acknowledges_inserts(&self) -> bool {
        (**self).acknowledges_inserts()
    }
}

/// Handles one client-initiated message. Returns the reply for searches.
pub fn dispatch<S: RangeServer + ?Sized>(
    server: &mut S,
    msg: Message,
    link: &mut dyn ClientLink,
    transcript: &mut Transcript,
) -> Result<Option<Message>> {
    match msg {
        Message::Insert { .. } => {
            transcript.begin_op(OpKind::Insert);
            transcript.record(Direction::ToServer, &msg);
            let Message::Insert { block } = msg else {
                unreachable!()
            };
            let res = server.insert(block, &mut Channel::new(link, transcript));
            server.end_op();
            let out = res.map(|_| {
                server.acknowledges_inserts().then(|| {
                    transcript.record(Direction::ToClient, &Message::Ack);
                    Message::Ack
                })
            });
            transcript.end_op();
            out
        }
        Message::Search { left, right } => {
            transcript.begin_op(OpKind::Search);
            transcript.record(Direction::ToServer, &msg);
            let res = server.search(left, right, &mut Channel::new(link, transcript));
            server.end_op();
            let out = res.map(|blocks| {
                let reply = Message::RangeResult { blocks };
                transcript.record(Direction::ToClient, &reply);
                Some(reply)
            });
            transcript.end_op();
            out
        }
        other => Err(Error::protocol(format!(
            "server cannot accept {:?} outside an exchange",
            other.kind()
        ))),
    }
}

/// Direct calls into a responder living in the same process, with an
/// optional fixed delay per exchange to model network latency.
pub struct InProcessLink<'a> {
    responder: &'a mut dyn Responder,
    delay: Duration,
}

impl<'a> InProcessLink<'a> {
    pub fn new(responder: &'a mut dyn Responder) -> Self {
        InProcessLink {
            responder,
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(responder: &'a mut dyn Responder, delay: Duration) -> Self {
        InProcessLink { responder, delay }
    }
}

impl ClientLink for InProcessLink<'_> {
    fn exchange(&mut self, requests: &[Message]) -> Result<Vec<Message>> {
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let mut replies = Vec::with_capacity(expected_replies(requests));
        for req in requests {
            match self.responder.respond(req) {
                Ok(r) => replies.extend(r),
                Err(e) => {
                    // Same shape the socket transport produces.
                    replies.push(Message::error(&e));
                    break;
                }
            }
        }
        Ok(replies)
    }
}

/// Framed link over a byte stream (TCP, Unix socket, pipe pair).
pub struct StreamLink<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
}

impl<R: Read, W: Write> StreamLink<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamLink {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
        }
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        write_message(&mut self.writer, msg)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Message> {
        read_message(&mut self.reader)
    }

    /// True when a read can be served without touching the stream.
    pub fn has_buffered_input(&self) -> bool {
        !self.reader.buffer().is_empty()
    }
}

impl<R: Read, W: Write> ClientLink for StreamLink<R, W> {
    fn exchange(&mut self, requests: &[Message]) -> Result<Vec<Message>> {
        for r in requests {
            self.send(r)?;
        }
        self.flush()?;
        let want = expected_replies(requests);
        let mut replies = Vec::with_capacity(want);
        while replies.len() < want {
            let m = self.recv()?;
            let stop = m.kind() == Kind::Error;
            replies.push(m);
            if stop {
                break;
            }
        }
        Ok(replies)
    }
}

/// Serves one connection until the client sends `Close` or disconnects.
/// Sessions are fail-stop: after the first error the server reports it to
/// the client and stops reading.
pub fn serve_connection<S: RangeServer + ?Sized, R: Read, W: Write>(
    server: &mut S,
    link: &mut StreamLink<R, W>,
    transcript: &mut Transcript,
) -> Result<()> {
    loop {
        let msg = match link.recv() {
            Ok(Message::Close) => return Ok(()),
            Ok(m) => m,
            Err(Error::Frame(super::FrameError::Closed)) => return Ok(()),
            Err(e) => {
                let _ = link.send(&Message::error(&e));
                let _ = link.flush();
                return Err(e);
            }
        };
        match dispatch(server, msg, link, transcript) {
            Ok(Some(reply)) => {
                link.send(&reply)?;
                link.flush()?;
            }
            Ok(None) => {}
            Err(e) => {
                let _ = link.send(&Message::error(&e));
                let _ = link.flush();
                return Err(e);
            }
        }
    }
}
