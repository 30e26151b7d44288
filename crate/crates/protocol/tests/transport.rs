use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use crossbeam_channel::unbounded;
use vrcad_protocol::*;

/// Accepts one connection and echoes every message back.
fn echo_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming().take(2) {
            let conn = Connection::accept(stream.unwrap()).unwrap();
            let (in_tx, in_rx) = unbounded();
            let out = conn.spawn(move |ev| {
                let _ = in_tx.send(ev);
            });
            thread::spawn(move || {
                for ev in in_rx {
                    match ev {
                        Inbound::Message(m) => {
                            let _ = out.send(m);
                        }
                        Inbound::Invalid(e) => {
                            let _ = out.send(e.to_message());
                        }
                        Inbound::Closed => break,
                    }
                }
            });
        }
    });
    addr
}

fn sample() -> Vec<Message> {
    vec![
        Message::Hello(Hello {
            role: Role::HandSource,
            name: Some("t".into()),
        }),
        Message::HandUpdate(HandUpdate {
            seq: 9,
            position: [1.5, -2.0, 1e-7],
            timestamp_ms: 12,
        }),
        Message::error("x", "line\nbreak"),
    ]
}

fn recv(conn: &mut Connection) -> Message {
    match conn.recv().unwrap() {
        FrameRead::Message(m) => m,
        other => panic!("{other:?}"),
    }
}

#[test]
fn tcp_and_websocket_share_a_port() {
    let addr = echo_server();

    let mut tcp = Connection::connect_tcp(&addr).unwrap();
    for m in sample() {
        tcp.send(&m).unwrap();
        assert_eq!(recv(&mut tcp), m);
    }

    let mut ws = Connection::connect_ws(&addr).unwrap();
    for m in sample() {
        ws.send(&m).unwrap();
        assert_eq!(recv(&mut ws), m);
    }
}

#[test]
fn invalid_frames_get_error_replies() {
    use std::io::{Read, Write};
    let addr = echo_server();
    let mut raw = std::net::TcpStream::connect(&addr).unwrap();
    raw.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let body = br#"{"type":"hello","protocolVersion":2,"role":"viewer"}"#;
    raw.write_all(&(body.len() as u32).to_be_bytes()).unwrap();
    raw.write_all(body).unwrap();
    let mut conn = Connection::Tcp(raw.try_clone().unwrap());
    match recv(&mut conn) {
        Message::Error(e) => assert_eq!(e.code, "version_mismatch"),
        other => panic!("{other:?}"),
    }
    raw.write_all(&[0, 0, 0, 0]).unwrap();
    match recv(&mut conn) {
        Message::Error(e) => assert_eq!(e.code, "malformed"),
        other => panic!("{other:?}"),
    }
    drop(conn);
    let mut rest = Vec::new();
    raw.shutdown(std::net::Shutdown::Write).unwrap();
    let _ = raw.read_to_end(&mut rest);
    assert!(rest.is_empty());
}
