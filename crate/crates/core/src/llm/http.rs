//! OpenAI-compatible chat-completion client.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{Value, json};
use ureq::config::Config;
use ureq::{Agent, Proxy};

use super::{API_KEY_ENV, LlmBackend, LlmError, LlmRequest, LlmResponse, Speaker};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    pub proxy_url: Option<String>,
    pub timeout: Duration,
}

impl HttpSettings {
    /// Reads the API key from `MLZERO_API_KEY`.
    pub fn from_env(base_url: &str, proxy_url: Option<String>) -> Self {
        Self {
            base_url: base_url.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            proxy_url,
            timeout: Duration::from_secs(600),
        }
    }
}

pub struct HttpBackend {
    agent: Agent,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    pub fn new(settings: HttpSettings) -> Result<Self, LlmError> {
        let proxy = match &settings.proxy_url {
            Some(url) => Some(Proxy::new(url).map_err(|e| LlmError::InvalidRequest(format!("proxy_url: {e}")))?),
            None => None,
        };
        let config = Config::builder()
            .http_status_as_error(false)
            .timeout_global(Some(settings.timeout))
            .proxy(proxy)
            .build();
        Ok(Self {
            agent: Agent::new_with_config(config),
            endpoint: format!("{}/chat/completions", settings.base_url.trim_end_matches('/')),
            api_key: settings.api_key,
        })
    }

    fn body(request: &LlmRequest) -> Value {
        let mut messages = Vec::with_capacity(request.turns.len() + 1);
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        for (speaker, text) in &request.turns {
            let role = match speaker {
                Speaker::User => "user",
                Speaker::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": text}));
        }
        json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

fn classify_status(status: u16, body: String) -> LlmError {
    let lower = body.to_ascii_lowercase();
    if lower.contains("context_length_exceeded")
        || lower.contains("maximum context length")
        || lower.contains("too many tokens")
    {
        LlmError::TokenLimit(body)
    } else if status == 429 || status >= 500 {
        LlmError::Transport(format!("HTTP {status}: {body}"))
    } else {
        LlmError::Http { status, body }
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut builder = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(Self::body(request))
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, text));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?;
        let usage = parsed.usage.unwrap_or(Usage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Ok(LlmResponse {
            text: content,
            input_token_count: usage.prompt_tokens,
            output_token_count: usage.completion_tokens,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::RoleSettings;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::thread;

    /// Serves canned (status, body) replies and forwards each request body.
    fn stub(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                }
                let mut payload = vec![0; length];
                reader.read_exact(&mut payload).unwrap();
                tx.send((head, String::from_utf8(payload).unwrap())).unwrap();
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1"), rx)
    }

    fn backend(url: &str) -> HttpBackend {
        HttpBackend::new(HttpSettings {
            base_url: url.to_string(),
            api_key: Some("secret".into()),
            proxy_url: None,
            timeout: Duration::from_secs(5),
        })
        .unwrap()
    }

    fn request() -> LlmRequest {
        let mut s = RoleSettings::new("planner");
        s.model = "test-model".into();
        s.max_tokens = 128;
        LlmRequest::single(&s, "executer", "hello")
    }

    #[test]
    fn returns_body_and_server_counts() {
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"fixed body"}}],"usage":{"prompt_tokens":11,"completion_tokens":2}}"#;
        let (url, rx) = stub(vec![(200, reply.into())]);
        let resp = backend(&url).complete(&request()).unwrap();
        assert_eq!(resp.text, "fixed body");
        assert_eq!((resp.input_token_count, resp.output_token_count), (11, 2));

        let (head, body) = rx.recv().unwrap();
        assert!(head.starts_with("POST /v1/chat/completions"));
        assert!(head.to_ascii_lowercase().contains("authorization: bearer secret"));
        let sent: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["max_tokens"], 128);
        assert_eq!(sent["messages"], json!([{"role": "user", "content": "hello"}]));
    }

    #[test]
    fn maps_status_codes() {
        let (url, _rx) = stub(vec![
            (503, "busy".into()),
            (400, r#"{"error":{"code":"context_length_exceeded"}}"#.into()),
            (401, "nope".into()),
        ]);
        let b = backend(&url);
        assert!(b.complete(&request()).unwrap_err().is_transient());
        assert!(matches!(b.complete(&request()), Err(LlmError::TokenLimit(_))));
        assert!(matches!(
            b.complete(&request()),
            Err(LlmError::Http { status: 401, .. })
        ));
    }

    #[test]
    fn unreachable_server_is_transient() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        assert!(backend(&url).complete(&request()).unwrap_err().is_transient());
    }
}
