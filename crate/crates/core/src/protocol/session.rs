use std::net::{TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::message::Message;
use super::transcript::Transcript;
use super::transport::{
    dispatch, serve_connection, InProcessLink, RangeServer, Responder, StreamLink,
};
use crate::client::{PopeClient, SearchResult};
use crate::error::{Error, Result};

/// One client operation in plaintext form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Op {
    Insert { label: u64, payload: Vec<u8> },
    Search { lo: u64, hi: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpOutcome {
    Inserted,
    Found(SearchResult),
}

/// A connected client/server pair.
pub trait Session {
    fn insert(&mut self, label: u64, payload: &[u8]) -> Result<()>;

    fn search(&mut self, lo: u64, hi: u64) -> Result<SearchResult>;

    fn client(&self) -> &PopeClient;

    fn run_op(&mut self, op: &Op) -> Result<OpOutcome> {
        match op {
            Op::Insert { label, payload } => {
                self.insert(*label, payload).map(|_| OpOutcome::Inserted)
            }
            Op::Search { lo, hi } => self.search(*lo, *hi).map(OpOutcome::Found),
        }
    }
}

/// Client and server in one process, talking through direct calls.
#[derive(Debug)]
pub struct LocalSession<S: RangeServer> {
    server: S,
    client: PopeClient,
    transcript: Transcript,
    delay: Duration,
}

impl<S: RangeServer> LocalSession<S> {
    pub fn new(server: S, client: PopeClient) -> Self {
        Self::with_transcript(server, client, Transcript::new())
    }

    pub fn with_transcript(server: S, client: PopeClient, transcript: Transcript) -> Self {
        LocalSession {
            server,
            client,
            transcript,
            delay: Duration::ZERO,
        }
    }

    /// Every blocking exchange sleeps for `delay` before it is answered.
    pub fn with_latency(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn server(&self) -> &S {
        &self.server
    }

    pub fn server_mut(&mut self) -> &mut S {
        &mut self.server
    }

    pub fn client_mut(&mut self) -> &mut PopeClient {
        &mut self.client
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_parts(self) -> (S, PopeClient, Transcript) {
        (self.server, self.client, self.transcript)
    }

    fn send(&mut self, msg: Message) -> Result<Option<Message>> {
        let mut link = InProcessLink::with_delay(&mut self.client, self.delay);
        dispatch(&mut self.server, msg, &mut link, &mut self.transcript)
    }
}

impl<S: RangeServer> Session for LocalSession<S> {
    fn insert(&mut self, label: u64, payload: &[u8]) -> Result<()> {
        let block = self.client.encrypt_block(label, payload)?;
        self.send(Message::Insert { block })?;
        Ok(())
    }

    fn search(&mut self, lo: u64, hi: u64) -> Result<SearchResult> {
        let (left, right) = self.client.encrypt_endpoints(lo, hi)?;
        match self.send(Message::Search { left, right })? {
            Some(Message::RangeResult { blocks }) => {
                self.client.open_results(&left, &right, blocks)
            }
            other => Err(Error::protocol(format!(
                "expected a range result, got {other:?}"
            ))),
        }
    }

    fn client(&self) -> &PopeClient {
        &self.client
    }
}

type ServerThread<S> = JoinHandle<(S, Transcript, Result<()>)>;

/// Client and server on either end of a loopback TCP connection. The server
/// runs on its own thread until [`SocketSession::finish`].
pub struct SocketSession<S: RangeServer + Send + 'static> {
    link: StreamLink<TcpStream, TcpStream>,
    client: PopeClient,
    interactive_inserts: bool,
    server: Option<ServerThread<S>>,
    failed: bool,
}

impl<S: RangeServer + Send + 'static> SocketSession<S> {
    pub fn connect(server: S, client: PopeClient) -> Result<Self> {
        Self::connect_with(server, client, Transcript::new())
    }

    pub fn connect_with(
        mut server: S,
        client: PopeClient,
        mut transcript: Transcript,
    ) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let interactive_inserts = server.acknowledges_inserts();
        let handle = thread::spawn(move || {
            let res = listener
                .accept()
                .map_err(Error::from)
                .and_then(|(stream, _)| {
                    stream.set_nodelay(true)?;
                    let mut link = StreamLink::new(stream.try_clone()?, stream);
                    serve_connection(&mut server, &mut link, &mut transcript)
                });
            (server, transcript, res)
        });
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(SocketSession {
            link: StreamLink::new(stream.try_clone()?, stream),
            client,
            interactive_inserts,
            server: Some(handle),
            failed: false,
        })
    }

    pub fn client_mut(&mut self) -> &mut PopeClient {
        &mut self.client
    }

    /// Answers server requests until a message the client does not answer
    /// arrives, and returns it.
    fn serve_until_final(&mut self) -> Result<Message> {
        loop {
            let msg = self.link.recv()?;
            match msg {
                Message::Ack | Message::RangeResult { .. } => return Ok(msg),
                Message::Error { code, message } => return Err(Error::Remote { code, message }),
                req => match self.client.respond(&req) {
                    Ok(replies) => {
                        for r in &replies {
                            self.link.send(r)?;
                        }
                        if !self.link.has_buffered_input() {
                            self.link.flush()?;
                        }
                    }
                    Err(e) => {
                        self.link.send(&Message::error(&e))?;
                        self.link.flush()?;
                        return Err(e);
                    }
                },
            }
        }
    }

    fn guarded<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        if self.failed {
            return Err(Error::protocol("session already failed"));
        }
        let res = f(self);
        // Bad arguments are refused before anything reaches the wire.
        if let Err(e) = &res {
            if !matches!(e, Error::Argument(_) | Error::LabelOverflow { .. }) {
                self.failed = true;
            }
        }
        res
    }

    /// Closes the connection and returns the server with its transcript.
    pub fn finish(mut self) -> Result<(S, Transcript)> {
        let _ = self.link.send(&Message::Close);
        let _ = self.link.flush();
        let handle = self
            .server
            .take()
            .expect("server thread present until finish");
        let (server, transcript, res) = handle
            .join()
            .map_err(|_| Error::protocol("server thread panicked"))?;
        match res {
            Err(e) if !self.failed => Err(e),
            _ => Ok((server, transcript)),
        }
    }
}

impl<S: RangeServer + Send + 'static> Session for SocketSession<S> {
    fn insert(&mut self, label: u64, payload: &[u8]) -> Result<()> {
        self.guarded(|s| {
            let block = s.client.encrypt_block(label, payload)?;
            s.link.send(&Message::Insert { block })?;
            s.link.flush()?;
            if s.interactive_inserts {
                match s.serve_until_final()? {
                    Message::Ack => {}
                    other => {
                        return Err(Error::protocol(format!(
                            "expected ack, got {:?}",
                            other.kind()
                        )))
                    }
                }
            }
            Ok(())
        })
    }

    fn search(&mut self, lo: u64, hi: u64) -> Result<SearchResult> {
        self.guarded(|s| {
            let (left, right) = s.client.encrypt_endpoints(lo, hi)?;
            s.link.send(&Message::Search { left, right })?;
            s.link.flush()?;
            match s.serve_until_final()? {
                Message::RangeResult { blocks } => s.client.open_results(&left, &right, blocks),
                other => Err(Error::protocol(format!(
                    "expected a range result, got {:?}",
                    other.kind()
                ))),
            }
        })
    }

    fn client(&self) -> &PopeClient {
        &self.client
    }
}

impl<S: RangeServer + Send + 'static> Drop for SocketSession<S> {
    fn drop(&mut self) {
        if let Some(handle) = self.server.take() {
            let _ = self.link.send(&Message::Close);
            let _ = self.link.flush();
            let _ = handle.join();
        }
    }
}
