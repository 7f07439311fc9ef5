// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Newline-delimited JSON protocol for out-of-process backends.
//!
//! Each request is one line, answered by exactly one response line:
//!
//! ```text
//! {"kind":"describe"}
//! {"kind":"score","input":"...","output":"..."}
//! {"kind":"sample","input":"...","n":4,"config":{...}}
//! {"kind":"beam","input":"...","config":{...}}
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, Capabilities, GeneratorBackend, ScoredText, TokenScores};
use super::DecodeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Request {
    Describe,
    Score { input: String, output: String },
    Sample { input: String, n: usize, config: DecodeConfig },
    Beam { input: String, config: DecodeConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Response {
    Describe {
        description: String,
        capabilities: Capabilities,
    },
    Score(TokenScores),
    Sample {
        texts: Vec<String>,
    },
    Beam {
        candidates: Vec<ScoredText>,
    },
    Error {
        message: String,
    },
}

pub fn handle(backend: &dyn GeneratorBackend, request: Request) -> Response {
    let result = match request {
        Request::Describe => Ok(Response::Describe {
            description: backend.description(),
            capabilities: backend.capabilities(),
        }),
        Request::Score { input, output } => backend.score(&input, &output).map(Response::Score),
        Request::Sample { input, n, config } => backend
            .sample(&input, n, &config)
            .map(|texts| Response::Sample { texts }),
        Request::Beam { input, config } => backend
            .beam(&input, &config)
            .map(|candidates| Response::Beam { candidates }),
    };
    result.unwrap_or_else(|e| Response::Error { message: e.to_string() })
}

/// Serves requests until the reader is exhausted.
pub fn serve<R: BufRead, W: Write>(backend: &dyn GeneratorBackend, reader: R, mut writer: W) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => handle(backend, req),
            Err(e) => Response::Error {
                message: format!("bad request: {e}"),
            },
        };
        serde_json::to_writer(&mut writer, &response).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

struct Channel<W, R> {
    writer: W,
    reader: R,
}

/// Client over any request/response byte stream pair. Calls are serialized.
pub struct StreamBackend<W: Write + Send, R: BufRead + Send> {
    channel: Mutex<Channel<W, R>>,
    description: String,
    capabilities: Capabilities,
}

impl<W: Write + Send, R: BufRead + Send> StreamBackend<W, R> {
    pub fn connect(writer: W, reader: R) -> Result<Self, BackendError> {
        let mut backend = StreamBackend {
            channel: Mutex::new(Channel { writer, reader }),
            description: String::new(),
            capabilities: Capabilities::ALL,
        };
        match backend.call(&Request::Describe)? {
            Response::Describe {
                description,
                capabilities,
            } => {
                backend.description = description;
                backend.capabilities = Capabilities {
                    concurrent: false,
                    ..capabilities
                };
                Ok(backend)
            }
            other => Err(unexpected(other)),
        }
    }

    fn call(&self, request: &Request) -> Result<Response, BackendError> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| BackendError::Failure("backend channel poisoned".into()))?;
        let line = serde_json::to_string(request).map_err(|e| BackendError::Failure(e.to_string()))?;
        let io = |e: std::io::Error| BackendError::Failure(format!("backend io: {e}"));
        ch.writer.write_all(line.as_bytes()).map_err(io)?;
        ch.writer.write_all(b"\n").map_err(io)?;
        ch.writer.flush().map_err(io)?;
        let mut reply = String::new();
        if ch.reader.read_line(&mut reply).map_err(io)? == 0 {
            return Err(BackendError::Failure("backend closed the stream".into()));
        }
        match serde_json::from_str(&reply).map_err(|e| BackendError::Failure(format!("bad response: {e}")))? {
            Response::Error { message } => Err(BackendError::Failure(message)),
            r => Ok(r),
        }
    }
}

fn unexpected(r: Response) -> BackendError {
    BackendError::Failure(format!("unexpected response {r:?}"))
}

impl<W: Write + Send, R: BufRead + Send> GeneratorBackend for StreamBackend<W, R> {
    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    fn description(&self) -> String {
        self.description.clone()
    }

    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        match self.call(&Request::Score {
            input: input.into(),
            output: output.into(),
        })? {
            Response::Score(s) => Ok(s),
            other => Err(unexpected(other)),
        }
    }

    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        match self.call(&Request::Sample {
            input: input.into(),
            n,
            config: cfg.clone(),
        })? {
            Response::Sample { texts } => Ok(texts),
            other => Err(unexpected(other)),
        }
    }

    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        match self.call(&Request::Beam {
            input: input.into(),
            config: cfg.clone(),
        })? {
            Response::Beam { candidates } => Ok(candidates),
            other => Err(unexpected(other)),
        }
    }
}

/// A backend running as a child process speaking the protocol on its
/// standard input and output.
pub struct ProcessBackend {
    inner: StreamBackend<BufWriter<ChildStdin>, BufReader<ChildStdout>>,
    child: Child,
}

impl ProcessBackend {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, BackendError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Failure(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let inner = StreamBackend::connect(BufWriter::new(stdin), BufReader::new(stdout))?;
        Ok(ProcessBackend { inner, child })
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl GeneratorBackend for ProcessBackend {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn description(&self) -> String {
        self.inner.description()
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        self.inner.score(input, output)
    }
    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        self.inner.sample(input, n, cfg)
    }
    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        self.inner.beam(input, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::scripted::{ConstantBackend, EchoBackend};
    use std::thread;

    #[test]
    fn requests_serialize_with_kind_tag() {
        let r = Request::Score {
            input: "a".into(),
            output: "b".into(),
        };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"kind":"score","input":"a","output":"b"}"#);
    }

    #[test]
    fn client_and_server_over_pipes() {
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (resp_r, resp_w) = std::io::pipe().unwrap();
        let server = thread::spawn(move || serve(&EchoBackend, BufReader::new(req_r), resp_w));
        let client = StreamBackend::connect(req_w, BufReader::new(resp_r)).unwrap();
        assert_eq!(client.description(), "echo backend");
        assert!(!client.capabilities().concurrent);
        let input = "x y [SEP] what else did the mayor do?";
        assert_eq!(client.sample(input, 2, &DecodeConfig::default()).unwrap(), ["the mayor acted"; 2]);
        assert_eq!(client.beam(input, &DecodeConfig::default()).unwrap()[0].text, "the mayor acted");
        assert_eq!(client.score(input, "the mayor acted").unwrap().total, 0.0);
        drop(client);
        server.join().unwrap().unwrap();
    }

    #[test]
    fn unsupported_calls_become_errors() {
        let resp = handle(
            &crate::generation::scripted::OracleScorer::default(),
            Request::Sample {
                input: "a".into(),
                n: 1,
                config: DecodeConfig::default(),
            },
        );
        assert!(matches!(resp, Response::Error { .. }));
        let resp = handle(&ConstantBackend::new("a b"), Request::Describe);
        assert!(matches!(resp, Response::Describe { .. }));
    }

    #[test]
    fn bad_request_line_gets_error_response() {
        let mut out = Vec::new();
        serve(&EchoBackend, std::io::Cursor::new("not json\n"), &mut out).unwrap();
        let resp: Response = serde_json::from_slice(&out).unwrap();
        assert!(matches!(resp, Response::Error { .. }));
    }
}
