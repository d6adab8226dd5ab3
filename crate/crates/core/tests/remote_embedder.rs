use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use ew_core::embed::{Embedder, RemoteEmbedder};
use ew_core::Error;

const REQUEST: &str = r#"{"texts":["my cat is missing","she loves tuna","she came back"]}"#;
const RESPONSE: &str = r#"{"vectors":[[3.0,4.0,0.0],[0.0,2.0,0.0],[0.0,0.0,0.5]]}"#;

/// Serves exactly one request and hands back (method line, path body).
fn serve_once(status: &'static str, body: &'static str) -> (String, thread::JoinHandle<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut payload = vec![0u8; len];
        reader.read_exact(&mut payload).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        (request_line.trim_end().to_string(), String::from_utf8(payload).unwrap())
    });
    (url, handle)
}

#[test]
fn batch_replays_recorded_transcript_in_order() {
    let (url, server) = serve_once("200 OK", RESPONSE);
    let e = RemoteEmbedder::new(&url, 3, Duration::from_secs(5)).unwrap();
    let out = e
        .embed_batch(&["my cat is missing", "she loves tuna", "she came back"])
        .unwrap();
    let (line, body) = server.join().unwrap();
    assert_eq!(line, "POST /embed HTTP/1.1");
    assert_eq!(body, REQUEST);
    assert_eq!(out.len(), 3);
    assert_eq!(out[0].as_slice(), &[0.6, 0.8, 0.0]);
    assert_eq!(out[1].as_slice(), &[0.0, 1.0, 0.0]);
    assert_eq!(out[2].as_slice(), &[0.0, 0.0, 1.0]);
}

#[test]
fn server_error_is_provider_error() {
    let (url, server) = serve_once("500 Internal Server Error", "{}");
    let e = RemoteEmbedder::new(&url, 3, Duration::from_secs(5)).unwrap();
    assert!(matches!(e.embed("anything"), Err(Error::Provider(_))));
    server.join().unwrap();
}

#[test]
fn short_response_is_provider_error() {
    let (url, server) = serve_once("200 OK", r#"{"vectors":[[1.0,0.0,0.0]]}"#);
    let e = RemoteEmbedder::new(&url, 3, Duration::from_secs(5)).unwrap();
    assert!(matches!(e.embed_batch(&["a b", "c d"]), Err(Error::Provider(_))));
    server.join().unwrap();
}

#[test]
fn unreachable_service_is_provider_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let e = RemoteEmbedder::new(&url, 3, Duration::from_millis(500)).unwrap();
    assert!(matches!(e.embed("anything"), Err(Error::Provider(_))));
}
