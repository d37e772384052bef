//! Transports. The stream transport is a byte stream used in one direction:
//! Alice writes newline-delimited messages, Bob only reads.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Phase, Result};

use super::alice::alice_emit;
use super::bob::BobSession;
use super::message::{decode_message, encode_message, ProtocolMessage};
use super::{DcorrResult, ProtocolConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    InProcess,
    Stream,
}

/// Byte counts observed on a stream session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WireStats {
    pub alice_to_bob: u64,
    pub bob_to_alice: u64,
    pub messages: u64,
}

fn phase_after(msg: &ProtocolMessage) -> Phase {
    match msg {
        ProtocolMessage::Handshake(_) => Phase::Handshake,
        ProtocolMessage::Projection(_) => Phase::Projections,
        ProtocolMessage::Variance(_) => Phase::Variance,
        ProtocolMessage::NoiseParams(_) => Phase::NoiseParams,
        ProtocolMessage::End => Phase::End,
    }
}

/// Writes Alice's messages to `writer`, one per line. Returns
/// `(bytes, messages)` written.
pub fn alice_send<W: Write>(x: &DataMatrix, cfg: &ProtocolConfig, writer: W) -> Result<(u64, u64)> {
    let mut writer = std::io::BufWriter::new(writer);
    let mut bytes = 0u64;
    let mut count = 0u64;
    let mut phase = Phase::Setup;
    alice_emit(x, cfg, |m| {
        let mut line = encode_message(&m)?;
        line.push('\n');
        writer.write_all(line.as_bytes())?;
        bytes += line.len() as u64;
        count += 1;
        phase = phase_after(&m);
        Ok(())
    })
    .map_err(|e| Error::session(phase, e))?;
    writer.flush().map_err(|e| Error::session(phase, e.into()))?;
    Ok((bytes, count))
}

/// Reads messages from `reader` until the end message and returns Bob's result.
/// Nothing is ever written back.
pub fn bob_receive<R: BufRead>(y: &DataMatrix, mut reader: R, seed: u64) -> Result<DcorrResult> {
    let mut bob = BobSession::new(y, seed);
    let mut line = String::new();
    while !bob.is_done() {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::session(bob.last_phase(), e.into()))?;
        if read == 0 {
            return Err(Error::session(
                bob.last_phase(),
                Error::Protocol("stream closed before end message".into()),
            ));
        }
        let msg = decode_message(&line).map_err(|e| Error::session(bob.last_phase(), e))?;
        bob.accept(msg).map_err(|e| Error::session(bob.last_phase(), e))?;
    }
    let phase = bob.last_phase();
    bob.finish().map_err(|e| Error::session(phase, e))
}

/// Connects to Bob, sends everything, half-closes, then waits for Bob to hang
/// up while counting any bytes he sends (there should be none).
pub fn alice_connect<A: ToSocketAddrs>(
    addr: A,
    x: &DataMatrix,
    cfg: &ProtocolConfig,
) -> Result<WireStats> {
    let stream = TcpStream::connect(addr).map_err(|e| Error::session(Phase::Setup, e.into()))?;
    let (alice_to_bob, messages) = alice_send(x, cfg, &stream)?;
    stream
        .shutdown(Shutdown::Write)
        .map_err(|e| Error::session(Phase::End, e.into()))?;
    let mut reverse = Vec::new();
    (&stream)
        .read_to_end(&mut reverse)
        .map_err(|e| Error::session(Phase::End, e.into()))?;
    Ok(WireStats {
        alice_to_bob,
        bob_to_alice: reverse.len() as u64,
        messages,
    })
}

/// Accepts one connection on `listener` and runs Bob's side over it.
pub fn bob_accept(listener: &TcpListener, y: &DataMatrix, seed: u64) -> Result<DcorrResult> {
    let (stream, _) = listener
        .accept()
        .map_err(|e| Error::session(Phase::Setup, e.into()))?;
    let result = bob_receive(y, BufReader::new(&stream), seed);
    drop(stream);
    result
}

/// Both roles over loopback TCP, returning Bob's result and the wire counts
/// seen from Alice's end.
pub fn run_stream_session(
    x: &DataMatrix,
    y: &DataMatrix,
    cfg: &ProtocolConfig,
    bob_seed: u64,
) -> Result<(DcorrResult, WireStats)> {
    let listener =
        TcpListener::bind("127.0.0.1:0").map_err(|e| Error::session(Phase::Setup, e.into()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::session(Phase::Setup, e.into()))?;
    thread::scope(|s| {
        let bob = s.spawn(|| bob_accept(&listener, y, bob_seed));
        let alice = alice_connect(addr, x, cfg);
        let bob = bob.join().expect("bob thread panicked");
        match (alice, bob) {
            (Ok(stats), Ok(result)) => Ok((result, stats)),
            // Bob's error carries the protocol cause; Alice usually only sees a reset.
            (_, Err(e)) => Err(e),
            (Err(e), Ok(_)) => Err(e),
        }
    })
}

/// Runs a complete session over the chosen transport.
pub fn run_session(
    x: &DataMatrix,
    y: &DataMatrix,
    cfg: &ProtocolConfig,
    bob_seed: u64,
    transport: Transport,
) -> Result<DcorrResult> {
    match transport {
        Transport::Stream => run_stream_session(x, y, cfg, bob_seed).map(|(r, _)| r),
        Transport::InProcess => {
            let (tx, rx) = mpsc::sync_channel::<ProtocolMessage>(16);
            thread::scope(|s| {
                let alice = s.spawn(move || {
                    let mut phase = Phase::Setup;
                    alice_emit(x, cfg, |m| {
                        phase = phase_after(&m);
                        tx.send(m)
                            .map_err(|_| Error::Protocol("receiver hung up".into()))
                    })
                    .map_err(|e| Error::session(phase, e))
                });
                let mut bob = BobSession::new(y, bob_seed);
                let mut bob_err = None;
                for m in rx.iter() {
                    if let Err(e) = bob.accept(m) {
                        bob_err = Some(Error::session(bob.last_phase(), e));
                        break;
                    }
                    if bob.is_done() {
                        break;
                    }
                }
                drop(rx);
                let alice = alice.join().expect("alice thread panicked");
                if let Some(e) = bob_err {
                    return Err(e);
                }
                alice?;
                let phase = bob.last_phase();
                bob.finish().map_err(|e| Error::session(phase, e))
            })
        }
    }
}
