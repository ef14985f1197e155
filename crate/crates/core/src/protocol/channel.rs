//! Ordered, reliable byte channels carrying protocol frames: an in-memory
//! pair for tests and benchmarks, and TCP streams for the socket demo.
//! Receives time out after 5 s; a timeout aborts the time step.

use std::io::BufReader;
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::protocol::message::{Frame, Tag};

pub const RECV_TIMEOUT: Duration = Duration::from_secs(5);

pub trait Channel: Send {
    fn send(&mut self, frame: &Frame) -> Result<()>;
    fn recv(&mut self) -> Result<Frame>;

    /// Receives and checks tag, session, and step, turning a mismatch into
    /// a protocol-order error with the offending position.
    fn recv_expect(&mut self, tag: Tag, session_id: u32, time_step: u32) -> Result<Frame> {
        let frame = self.recv()?;
        if frame.tag != tag || frame.session_id != session_id || frame.time_step != time_step {
            return Err(Error::Protocol {
                step: time_step,
                message: format!(
                    "expected {} for session {session_id} step {time_step}, \
                     got {} (session {}, step {})",
                    tag.as_str(),
                    frame.tag.as_str(),
                    frame.session_id,
                    frame.time_step
                ),
            });
        }
        Ok(frame)
    }
}

/// In-process transport over mpsc queues of serialized frames; the frames
/// cross the channel as bytes so transcripts match the socket transport
/// bit for bit.
pub struct MemoryChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    timeout: Duration,
}

/// A connected duplex pair.
pub fn memory_pair() -> (MemoryChannel, MemoryChannel) {
    let (tx_ab, rx_ab) = channel();
    let (tx_ba, rx_ba) = channel();
    (
        MemoryChannel {
            tx: tx_ab,
            rx: rx_ba,
            timeout: RECV_TIMEOUT,
        },
        MemoryChannel {
            tx: tx_ba,
            rx: rx_ab,
            timeout: RECV_TIMEOUT,
        },
    )
}

impl Channel for MemoryChannel {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.tx.send(frame.encode()).map_err(|_| Error::Protocol {
            step: frame.time_step,
            message: "peer hung up".into(),
        })
    }

    fn recv(&mut self) -> Result<Frame> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(bytes) => Frame::decode(&bytes),
            Err(RecvTimeoutError::Timeout) => Err(Error::Protocol {
                step: 0,
                message: format!("receive timed out after {:?}", self.timeout),
            }),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Protocol {
                step: 0,
                message: "peer hung up".into(),
            }),
        }
    }
}

/// Stream-socket transport; one TCP connection per channel.
pub struct TcpChannel {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_read_timeout(Some(RECV_TIMEOUT))?;
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        Ok(TcpChannel {
            reader: BufReader::new(stream),
            writer,
        })
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        frame.write_to(&mut self.writer)
    }

    fn recv(&mut self) -> Result<Frame> {
        Frame::read_from(&mut self.reader)
    }
}

/// A connected TCP pair over loopback, for the socket transport demo.
pub fn tcp_pair() -> Result<(TcpChannel, TcpChannel)> {
    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let client = TcpStream::connect(addr)?;
    let (server, _) = listener.accept()?;
    Ok((TcpChannel::new(client)?, TcpChannel::new(server)?))
}
