//! Length-prefixed framed messaging between the two parties, over TCP or an
//! in-process duplex channel. Frames on one connection are strictly ordered;
//! one reader and one writer may run on different threads.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;

use thiserror::Error;

pub const PROTOCOL_VERSION: u16 = 1;
pub const DEFAULT_MAX_FRAME: usize = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("protocol version mismatch: ours {ours}, peer {peer}")]
    VersionMismatch { ours: u16, peer: u16 },
    #[error("both endpoints claim the {0:?} role")]
    RoleClash(Role),
    #[error("frame of {got} bytes exceeds the {max} byte limit")]
    Oversize { got: usize, max: usize },
    #[error("unknown frame type {0}")]
    UnknownFrameType(u8),
    #[error("truncated frame")]
    Truncated,
    #[error("peer aborted: {0}")]
    Aborted(String),
    #[error("channel closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Session roles. The vendor serves a portfolio; the user selects and verifies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Role {
    Vendor,
    User,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::Vendor => Role::User,
            Role::User => Role::Vendor,
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            Role::Vendor => 0,
            Role::User => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Role> {
        match b {
            0 => Some(Role::Vendor),
            1 => Some(Role::User),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum FrameType {
    Handshake = 0,
    OtS = 1,
    OtR = 2,
    OtCiph = 3,
    Share = 4,
    Reveal = 5,
    Triple = 6,
    Verdict = 7,
    Abort = 8,
}

impl FrameType {
    fn from_byte(b: u8) -> Option<FrameType> {
        Some(match b {
            0 => FrameType::Handshake,
            1 => FrameType::OtS,
            2 => FrameType::OtR,
            3 => FrameType::OtCiph,
            4 => FrameType::Share,
            5 => FrameType::Reveal,
            6 => FrameType::Triple,
            7 => FrameType::Verdict,
            8 => FrameType::Abort,
            _ => return None,
        })
    }
}

/// An ordered, exactly-once frame stream to the peer.
/// Frame wire format: u32 LE payload length, u8 type, payload bytes.
pub trait FrameChannel: Send {
    fn send_frame(&mut self, ty: FrameType, payload: &[u8]) -> Result<(), TransportError>;
    fn recv_frame(&mut self) -> Result<(FrameType, Vec<u8>), TransportError>;

    /// Receives a frame, requiring a specific type. An `Abort` frame from the
    /// peer surfaces as `Aborted`.
    fn expect_frame(&mut self, ty: FrameType) -> Result<Vec<u8>, TransportError> {
        let (got, payload) = self.recv_frame()?;
        if got == FrameType::Abort {
            return Err(TransportError::Aborted(
                String::from_utf8_lossy(&payload).into_owned(),
            ));
        }
        if got != ty {
            return Err(TransportError::Aborted(format!(
                "expected {ty:?} frame, got {got:?}"
            )));
        }
        Ok(payload)
    }

    fn send_abort(&mut self, reason: &str) -> Result<(), TransportError> {
        self.send_frame(FrameType::Abort, reason.as_bytes())
    }
}

fn write_frame<W: Write>(
    w: &mut W,
    ty: FrameType,
    payload: &[u8],
    max_frame: usize,
) -> Result<(), TransportError> {
    if payload.len() > max_frame {
        return Err(TransportError::Oversize {
            got: payload.len(),
            max: max_frame,
        });
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(&[ty as u8])?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

fn read_frame<R: Read>(
    r: &mut R,
    max_frame: usize,
) -> Result<(FrameType, Vec<u8>), TransportError> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            TransportError::Truncated
        } else {
            TransportError::Io(e)
        }
    })?;
    let len = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
    if len > max_frame {
        return Err(TransportError::Oversize {
            got: len,
            max: max_frame,
        });
    }
    let ty = FrameType::from_byte(head[4]).ok_or(TransportError::UnknownFrameType(head[4]))?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            TransportError::Truncated
        } else {
            TransportError::Io(e)
        }
    })?;
    Ok((ty, payload))
}

/// Framed stream over a TCP connection.
pub struct TcpChannel {
    reader: io::BufReader<TcpStream>,
    writer: io::BufWriter<TcpStream>,
    max_frame: usize,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = io::BufReader::new(stream.try_clone()?);
        let writer = io::BufWriter::new(stream);
        Ok(TcpChannel {
            reader,
            writer,
            max_frame: DEFAULT_MAX_FRAME,
        })
    }

    pub fn with_max_frame(mut self, max_frame: usize) -> Self {
        self.max_frame = max_frame;
        self
    }
}

impl FrameChannel for TcpChannel {
    fn send_frame(&mut self, ty: FrameType, payload: &[u8]) -> Result<(), TransportError> {
        write_frame(&mut self.writer, ty, payload, self.max_frame)
    }

    fn recv_frame(&mut self) -> Result<(FrameType, Vec<u8>), TransportError> {
        read_frame(&mut self.reader, self.max_frame)
    }
}

/// In-process duplex channel; observationally identical to `TcpChannel`.
pub struct DuplexChannel {
    tx: mpsc::Sender<(FrameType, Vec<u8>)>,
    rx: mpsc::Receiver<(FrameType, Vec<u8>)>,
    max_frame: usize,
}

impl DuplexChannel {
    /// Creates a connected pair of endpoints.
    pub fn pair() -> (DuplexChannel, DuplexChannel) {
        let (tx_a, rx_b) = mpsc::channel();
        let (tx_b, rx_a) = mpsc::channel();
        (
            DuplexChannel {
                tx: tx_a,
                rx: rx_a,
                max_frame: DEFAULT_MAX_FRAME,
            },
            DuplexChannel {
                tx: tx_b,
                rx: rx_b,
                max_frame: DEFAULT_MAX_FRAME,
            },
        )
    }
}

impl FrameChannel for DuplexChannel {
    fn send_frame(&mut self, ty: FrameType, payload: &[u8]) -> Result<(), TransportError> {
        if payload.len() > self.max_frame {
            return Err(TransportError::Oversize {
                got: payload.len(),
                max: self.max_frame,
            });
        }
        self.tx
            .send((ty, payload.to_vec()))
            .map_err(|_| TransportError::Closed)
    }

    fn recv_frame(&mut self) -> Result<(FrameType, Vec<u8>), TransportError> {
        self.rx.recv().map_err(|_| TransportError::Closed)
    }
}

/// Session identifier carried in the handshake and used for key derivation.
pub type SessionId = [u8; 16];

fn handshake_payload(role: Role, session_id: &SessionId) -> Vec<u8> {
    let mut payload = Vec::with_capacity(19);
    payload.extend_from_slice(&PROTOCOL_VERSION.to_le_bytes());
    payload.push(role.to_byte());
    payload.extend_from_slice(session_id);
    payload
}

fn parse_handshake(payload: &[u8]) -> Result<(u16, Role, SessionId), TransportError> {
    if payload.len() != 19 {
        return Err(TransportError::Truncated);
    }
    let version = u16::from_le_bytes(payload[0..2].try_into().unwrap());
    let role = Role::from_byte(payload[2]).ok_or(TransportError::UnknownFrameType(payload[2]))?;
    let session_id: SessionId = payload[3..19].try_into().unwrap();
    Ok((version, role, session_id))
}

/// Initiator side of the handshake: announces version, role, and a fresh
/// session id, then checks the peer's echo. Aborts before any protocol frame
/// on a version mismatch.
pub fn handshake_initiate<C: FrameChannel>(
    channel: &mut C,
    role: Role,
    session_id: SessionId,
) -> Result<SessionId, TransportError> {
    channel.send_frame(FrameType::Handshake, &handshake_payload(role, &session_id))?;
    let reply = channel.expect_frame(FrameType::Handshake)?;
    let (version, peer_role, peer_session) = parse_handshake(&reply)?;
    if version != PROTOCOL_VERSION {
        channel.send_abort("version mismatch")?;
        return Err(TransportError::VersionMismatch {
            ours: PROTOCOL_VERSION,
            peer: version,
        });
    }
    if peer_role == role {
        channel.send_abort("role clash")?;
        return Err(TransportError::RoleClash(role));
    }
    if peer_session != session_id {
        channel.send_abort("session id mismatch")?;
        return Err(TransportError::Aborted("session id mismatch".into()));
    }
    Ok(session_id)
}

/// Responder side: validates the initiator's announcement and echoes it.
pub fn handshake_respond<C: FrameChannel>(
    channel: &mut C,
    role: Role,
) -> Result<SessionId, TransportError> {
    let payload = channel.expect_frame(FrameType::Handshake)?;
    let (version, peer_role, session_id) = parse_handshake(&payload)?;
    if version != PROTOCOL_VERSION {
        channel.send_abort("version mismatch")?;
        return Err(TransportError::VersionMismatch {
            ours: PROTOCOL_VERSION,
            peer: version,
        });
    }
    if peer_role == role {
        channel.send_abort("role clash")?;
        return Err(TransportError::RoleClash(role));
    }
    channel.send_frame(FrameType::Handshake, &handshake_payload(role, &session_id))?;
    Ok(session_id)
}

/// Connects to a vendor endpoint and completes the handshake as the user.
pub fn connect<A: ToSocketAddrs>(
    addr: A,
    session_id: SessionId,
) -> Result<(TcpChannel, SessionId), TransportError> {
    let stream = TcpStream::connect(addr)?;
    let mut channel = TcpChannel::new(stream)?;
    let sid = handshake_initiate(&mut channel, Role::User, session_id)?;
    Ok((channel, sid))
}

/// Accepts one connection and completes the handshake as the vendor.
pub fn accept(listener: &TcpListener) -> Result<(TcpChannel, SessionId), TransportError> {
    let (stream, _) = listener.accept()?;
    let mut channel = TcpChannel::new(stream)?;
    let sid = handshake_respond(&mut channel, Role::Vendor)?;
    Ok((channel, sid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_byte_payload_preserves_type() {
        let (mut a, mut b) = DuplexChannel::pair();
        a.send_frame(FrameType::Verdict, &[]).unwrap();
        let (ty, payload) = b.recv_frame().unwrap();
        assert_eq!(ty, FrameType::Verdict);
        assert!(payload.is_empty());
    }

    #[test]
    fn frames_are_ordered_and_byte_exact() {
        let (mut a, mut b) = DuplexChannel::pair();
        let mut rng = StdRng::seed_from_u64(11);
        let frames: Vec<Vec<u8>> = (0..10_000)
            .map(|_| (0..rng.gen_range(0..32)).map(|_| rng.gen()).collect())
            .collect();
        let sender_frames = frames.clone();
        let handle = std::thread::spawn(move || {
            for f in &sender_frames {
                a.send_frame(FrameType::Share, f).unwrap();
            }
        });
        for f in &frames {
            let (ty, payload) = b.recv_frame().unwrap();
            assert_eq!(ty, FrameType::Share);
            assert_eq!(&payload, f);
        }
        handle.join().unwrap();
    }

    #[test]
    fn tcp_echo_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut ch, sid) = accept(&listener).unwrap();
            let (ty, payload) = ch.recv_frame().unwrap();
            ch.send_frame(ty, &payload).unwrap();
            sid
        });
        let (mut ch, sid) = connect(addr, [7u8; 16]).unwrap();
        assert_eq!(sid, [7u8; 16]);
        ch.send_frame(FrameType::Share, b"hello").unwrap();
        let (ty, payload) = ch.recv_frame().unwrap();
        assert_eq!(
            (ty, payload.as_slice()),
            (FrameType::Share, b"hello".as_slice())
        );
        assert_eq!(server.join().unwrap(), [7u8; 16]);
    }

    #[test]
    fn version_mismatch_aborts_before_protocol_frames() {
        let (mut a, mut b) = DuplexChannel::pair();
        // Hand-craft a handshake with a bogus version.
        let mut payload = handshake_payload(Role::User, &[0u8; 16]);
        payload[0] = 0xFF;
        payload[1] = 0xFF;
        a.send_frame(FrameType::Handshake, &payload).unwrap();
        match handshake_respond(&mut b, Role::Vendor) {
            Err(TransportError::VersionMismatch { peer, .. }) => assert_eq!(peer, 0xFFFF),
            other => panic!("expected version mismatch, got {other:?}"),
        }
        // The responder sent an abort, not a handshake.
        let (ty, _) = a.recv_frame().unwrap();
        assert_eq!(ty, FrameType::Abort);
    }

    #[test]
    fn role_clash_detected() {
        let (mut a, mut b) = DuplexChannel::pair();
        let handle = std::thread::spawn(move || handshake_initiate(&mut a, Role::Vendor, [1; 16]));
        let res = handshake_respond(&mut b, Role::Vendor);
        assert!(matches!(res, Err(TransportError::RoleClash(Role::Vendor))));
        assert!(handle.join().unwrap().is_err());
    }

    #[test]
    fn oversize_frame_rejected() {
        let (mut a, _b) = DuplexChannel::pair();
        a.max_frame = 8;
        assert!(matches!(
            a.send_frame(FrameType::Share, &[0u8; 9]),
            Err(TransportError::Oversize { got: 9, max: 8 })
        ));
    }
}
