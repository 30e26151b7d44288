//! Blocking connections over framed TCP or WebSocket, sharing one port.
//!
//! An accepted socket whose first bytes are `GET ` is treated as a
//! WebSocket upgrade; anything else is length-prefixed TCP.

use std::io;
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender, TryRecvError};
use tungstenite::WebSocket;

use crate::codec::{decode_json, encode_json, read_frame, write_frame, FrameRead};
use crate::error::ProtocolError;
use crate::message::Message;

/// Something received on a connection.
#[derive(Debug)]
pub enum Inbound {
    Message(Message),
    /// Well-delimited but invalid message; the connection stays open.
    Invalid(ProtocolError),
    Closed,
}

pub enum Connection {
    Tcp(TcpStream),
    Ws(Box<WebSocket<TcpStream>>),
}

fn ws_err(e: tungstenite::Error) -> ProtocolError {
    match e {
        tungstenite::Error::Io(io) => ProtocolError::Io(io),
        other => ProtocolError::WebSocket(other.to_string()),
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

impl Connection {
    /// Wraps a freshly accepted socket, sniffing the transport.
    pub fn accept(stream: TcpStream) -> Result<Connection, ProtocolError> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_millis(50)))?;
        let deadline = Instant::now() + Duration::from_secs(5);
        let mut head = [0u8; 4];
        loop {
            match stream.peek(&mut head) {
                Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
                Ok(n) if n >= 4 => break,
                Ok(_) => {}
                Err(e) if is_timeout(&e) => {}
                Err(e) => return Err(e.into()),
            }
            if Instant::now() > deadline {
                return Err(io::Error::from(io::ErrorKind::TimedOut).into());
            }
            thread::sleep(Duration::from_millis(1));
        }
        stream.set_read_timeout(None)?;
        if &head == b"GET " {
            let ws = tungstenite::accept(stream).map_err(|e| ProtocolError::WebSocket(e.to_string()))?;
            Ok(Connection::Ws(Box::new(ws)))
        } else {
            Ok(Connection::Tcp(stream))
        }
    }

    pub fn connect_tcp<A: ToSocketAddrs>(addr: A) -> Result<Connection, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Connection::Tcp(stream))
    }

    /// WebSocket client connection to `host:port`.
    pub fn connect_ws(addr: &str) -> Result<Connection, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let (ws, _) = tungstenite::client(format!("ws://{addr}/"), stream)
            .map_err(|e| ProtocolError::WebSocket(e.to_string()))?;
        Ok(Connection::Ws(Box::new(ws)))
    }

    pub fn peer(&self) -> String {
        let s = match self {
            Connection::Tcp(s) => s.peer_addr(),
            Connection::Ws(ws) => ws.get_ref().peer_addr(),
        };
        s.map(|a| a.to_string()).unwrap_or_else(|_| "?".into())
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        match self {
            Connection::Tcp(s) => write_frame(s, msg),
            Connection::Ws(ws) => ws.send(tungstenite::Message::Text(encode_json(msg)?)).map_err(ws_err),
        }
    }

    /// Blocking receive.
    pub fn recv(&mut self) -> Result<FrameRead, ProtocolError> {
        match self {
            Connection::Tcp(s) => read_frame(s),
            Connection::Ws(ws) => loop {
                match ws.read() {
                    Ok(tungstenite::Message::Text(t)) => {
                        return Ok(match decode_json(&t) {
                            Ok(m) => FrameRead::Message(m),
                            Err(e) => FrameRead::Invalid(e),
                        })
                    }
                    Ok(tungstenite::Message::Binary(_)) => {
                        return Ok(FrameRead::Invalid(ProtocolError::Malformed(
                            "binary frames are not accepted".into(),
                        )))
                    }
                    Ok(tungstenite::Message::Close(_)) => return Ok(FrameRead::Eof),
                    Ok(_) => {}
                    Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                        return Ok(FrameRead::Eof)
                    }
                    Err(e) => return Err(ws_err(e)),
                }
            },
        }
    }

    /// Moves the connection onto I/O threads. Every inbound event is handed
    /// to `on_inbound` (ending with `Closed`); messages sent on the returned
    /// channel are written in order. Dropping every sender closes the
    /// connection.
    pub fn spawn<F>(self, on_inbound: F) -> Sender<Message>
    where
        F: Fn(Inbound) + Send + 'static,
    {
        let (tx, rx) = crossbeam_channel::unbounded();
        match self {
            Connection::Tcp(stream) => spawn_tcp(stream, rx, on_inbound),
            Connection::Ws(ws) => {
                thread::Builder::new()
                    .name("ws-io".into())
                    .spawn(move || ws_loop(*ws, rx, on_inbound))
                    .expect("spawn ws thread");
            }
        }
        tx
    }
}

fn spawn_tcp<F>(stream: TcpStream, rx: Receiver<Message>, on_inbound: F)
where
    F: Fn(Inbound) + Send + 'static,
{
    let mut reader = stream.try_clone().expect("clone tcp stream");
    let mut writer = stream;
    thread::Builder::new()
        .name("tcp-read".into())
        .spawn(move || {
            loop {
                match read_frame(&mut reader) {
                    Ok(FrameRead::Message(m)) => on_inbound(Inbound::Message(m)),
                    Ok(FrameRead::Invalid(e)) => on_inbound(Inbound::Invalid(e)),
                    Ok(FrameRead::Eof) => break,
                    Err(e) => {
                        if !matches!(&e, ProtocolError::Io(_)) {
                            on_inbound(Inbound::Invalid(e));
                        }
                        break;
                    }
                }
            }
            let _ = reader.shutdown(Shutdown::Both);
            on_inbound(Inbound::Closed);
        })
        .expect("spawn tcp reader");
    thread::Builder::new()
        .name("tcp-write".into())
        .spawn(move || {
            for msg in rx {
                match write_frame(&mut writer, &msg) {
                    Ok(()) => {}
                    Err(ProtocolError::Io(_)) => break,
                    Err(e) => log::warn!("dropping unencodable {}: {e}", msg.kind()),
                }
            }
            let _ = writer.shutdown(Shutdown::Both);
        })
        .expect("spawn tcp writer");
}

fn ws_loop<F: Fn(Inbound)>(mut ws: WebSocket<TcpStream>, rx: Receiver<Message>, on_inbound: F) {
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(1)));
    'outer: loop {
        loop {
            match rx.try_recv() {
                Ok(msg) => match encode_json(&msg) {
                    Ok(text) => {
                        if ws.send(tungstenite::Message::Text(text)).is_err() {
                            break 'outer;
                        }
                    }
                    Err(e) => log::warn!("dropping unencodable {}: {e}", msg.kind()),
                },
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    break 'outer;
                }
            }
        }
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => match decode_json(&t) {
                Ok(m) => on_inbound(Inbound::Message(m)),
                Err(e) => on_inbound(Inbound::Invalid(e)),
            },
            Ok(tungstenite::Message::Binary(_)) => on_inbound(Inbound::Invalid(ProtocolError::Malformed(
                "binary frames are not accepted".into(),
            ))),
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(_) => break,
        }
    }
    let _ = ws.get_ref().shutdown(Shutdown::Both);
    on_inbound(Inbound::Closed);
}
