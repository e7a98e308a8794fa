//! Live-transport tests against a minimal local chat-completions server.
//! No external network involved.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use ludolog::pipeline::{
    ChatCall, ChatClient, ChatMessage, ChatRequest, HttpChatClient, LlmConfig, LlmError,
};

struct ReceivedRequest {
    headers: String,
    body: String,
}

/// Serves `responses` (status, body) pairs one connection at a time and
/// reports each received request.
fn spawn_server(
    responses: Vec<(u16, String)>,
) -> (String, mpsc::Receiver<ReceivedRequest>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let (headers, content_length) = loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                if let Some(end) = find_header_end(&buf) {
                    let headers = String::from_utf8_lossy(&buf[..end]).to_string();
                    let content_length = headers
                        .lines()
                        .find_map(|line| {
                            line.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    break (headers, content_length);
                }
            };
            let body_start = find_header_end(&buf).unwrap() + 4;
            while buf.len() < body_start + content_length {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
            }
            let request_body =
                String::from_utf8_lossy(&buf[body_start..body_start + content_length])
                    .to_string();
            tx.send(ReceivedRequest {
                headers,
                body: request_body,
            })
            .unwrap();
            let reason = if status == 200 { "OK" } else { "Error" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (endpoint, rx)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }]
    })
    .to_string()
}

fn call_for(model: &str) -> ChatCall {
    ChatCall {
        description_id: "test".to_string(),
        attempt_index: 1,
        request: ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: "translate this game".to_string(),
            }],
            temperature: 1.0,
            max_tokens: 1024,
        },
    }
}

fn config_for(endpoint: &str) -> LlmConfig {
    LlmConfig {
        endpoint: endpoint.to_string(),
        retry_backoff_ms: 1,
        timeout_secs: 5,
        api_key_env: "LUDOLOG_TEST_MISSING_KEY".to_string(),
        ..Default::default()
    }
}

#[test]
fn posts_the_wire_format_and_decodes_the_reply() {
    let (endpoint, rx) = spawn_server(vec![(200, chat_body("initial(s0)."))]);
    let client = HttpChatClient::new(&config_for(&endpoint));
    let content = client.complete(&call_for("gpt-4o")).unwrap();
    assert_eq!(content, "initial(s0).");

    let received = rx.recv().unwrap();
    assert!(received.headers.starts_with("POST / HTTP/1.1"));
    let body: serde_json::Value = serde_json::from_str(&received.body).unwrap();
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["max_tokens"], 1024);
}

#[test]
fn sends_bearer_token_from_the_environment() {
    let var = "LUDOLOG_TEST_KEY_7731";
    std::env::set_var(var, "sk-local-test");
    let (endpoint, rx) = spawn_server(vec![(200, chat_body("ok."))]);
    let cfg = LlmConfig {
        api_key_env: var.to_string(),
        ..config_for(&endpoint)
    };
    let client = HttpChatClient::new(&cfg);
    client.complete(&call_for("gpt-4o")).unwrap();
    let received = rx.recv().unwrap();
    assert!(received
        .headers
        .lines()
        .any(|l| l.eq_ignore_ascii_case("authorization: Bearer sk-local-test")));
}

#[test]
fn retries_server_errors_with_backoff() {
    let (endpoint, rx) = spawn_server(vec![
        (500, "{\"error\":\"overloaded\"}".to_string()),
        (500, "{\"error\":\"overloaded\"}".to_string()),
        (200, chat_body("recovered.")),
    ]);
    let client = HttpChatClient::new(&config_for(&endpoint));
    let content = client.complete(&call_for("gpt-4o")).unwrap();
    assert_eq!(content, "recovered.");
    assert_eq!(rx.iter().take(3).count(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (endpoint, rx) = spawn_server(vec![(401, "{\"error\":\"bad key\"}".to_string())]);
    let client = HttpChatClient::new(&config_for(&endpoint));
    let err = client.complete(&call_for("gpt-4o")).unwrap_err();
    assert!(matches!(err, LlmError::Http { status: 401, .. }));
    assert_eq!(rx.iter().take(1).count(), 1);
}

#[test]
fn malformed_payload_is_a_protocol_error() {
    let (endpoint, _rx) = spawn_server(vec![(200, "{\"choices\": []}".to_string())]);
    let client = HttpChatClient::new(&config_for(&endpoint));
    let err = client.complete(&call_for("gpt-4o")).unwrap_err();
    assert!(matches!(err, LlmError::Protocol(_)));
}
