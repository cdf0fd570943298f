//! Optional real-socket carrier: the same wire frames over UDP, one
//! frame per datagram. The simulated link remains the test target; this
//! exists so a follower and leader can run as separate processes.

use std::io;
use std::net::{ToSocketAddrs, UdpSocket};

use super::{decode, encode, TransportError, WireFrame};

/// Largest datagram we accept: a 255x255 payload plus framing.
pub const MAX_DATAGRAM: usize = super::HEADER_LEN + 2 * 255 * 255 + super::CRC_LEN;

/// Send one frame as a single datagram.
pub fn send_frame<A: ToSocketAddrs>(
    socket: &UdpSocket,
    addr: A,
    frame: &WireFrame,
) -> io::Result<usize> {
    socket.send_to(&encode(frame), addr)
}

/// Receive one datagram and decode it as a frame.
pub fn recv_frame(socket: &UdpSocket) -> io::Result<Result<WireFrame, TransportError>> {
    let mut buf = vec![0u8; MAX_DATAGRAM];
    let (len, _from) = socket.recv_from(&mut buf)?;
    Ok(decode(&buf[..len]))
}
