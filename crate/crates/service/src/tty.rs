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

//! Terminal session loop: seed, entity of interest, four choices per step.

use std::io::{BufRead, Write};

use thiserror::Error;

use evqa::generation::{GeneratorBackend, Variant};
use evqa::session::{start_session, LogRecord, Session, SessionConfig, SessionError, SessionMetrics, SessionState, UserAction};

use crate::store::Clock;

#[derive(Debug, Error)]
pub enum TtyError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Session(#[from] SessionError),
}

enum Command {
    Act(UserAction),
    Help,
}

fn parse_command(line: &str) -> Option<Command> {
    let line = line.trim().to_lowercase();
    let mut parts = line.split_whitespace();
    let head = parts.next()?;
    let cmd = match head {
        "r" | "regenerate" => Command::Act(UserAction::Regenerate),
        "q" | "quit" | "stop" => Command::Act(UserAction::Stop),
        "b" | "back" | "return" => Command::Act(UserAction::Return {
            step: parts.next()?.parse().ok()?,
        }),
        "?" | "h" | "help" => Command::Help,
        n => {
            let i: usize = n.parse().ok()?;
            Command::Act(UserAction::Select { index: i.checked_sub(1)? })
        }
    };
    Some(cmd)
}

fn read_line<R: BufRead>(reader: &mut R) -> std::io::Result<Option<String>> {
    let mut s = String::new();
    if reader.read_line(&mut s)? == 0 {
        return Ok(None);
    }
    Ok(Some(s.trim().to_string()))
}

fn show_path<W: Write>(w: &mut W, session: &Session) -> std::io::Result<()> {
    let path: Vec<usize> = {
        let mut ids = Vec::new();
        let mut cur = Some(session.cursor);
        while let Some(id) = cur {
            ids.push(id);
            cur = session.nodes[id].parent;
        }
        ids.reverse();
        ids
    };
    writeln!(w, "Events so far:")?;
    for id in path {
        let n = &session.nodes[id];
        writeln!(w, "  step {:>2}: {}", n.step_index, n.event)?;
    }
    Ok(())
}

/// Runs one session against `reader`/`writer`. Every accepted request is
/// also written to `log` when given. End of input stops the session.
pub fn run_tty<R: BufRead, W: Write>(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    config: SessionConfig,
    clock: &dyn Clock,
    mut reader: R,
    mut writer: W,
    mut log: Option<&mut dyn Write>,
) -> Result<SessionMetrics, TtyError> {
    let session_id = "tty".to_string();
    let mut session = loop {
        write!(writer, "Seed event: ")?;
        writer.flush()?;
        let Some(seed) = read_line(&mut reader)? else {
            return Ok(SessionMetrics::default());
        };
        let now = clock.now_ms();
        match start_session(session_id.clone(), &seed, variant, config.clone(), backend, now) {
            Ok(s) => {
                if let Some(l) = log.as_mut() {
                    l.write_all(LogRecord::start(now, &session_id, &s.seed, variant, &config).to_line().as_bytes())?;
                }
                break s;
            }
            Err(SessionError::EmptySeed) => writeln!(writer, "Please type an event, e.g. \"police evacuated buildings\".")?,
            Err(e) => return Err(e.into()),
        }
    };
    while session.state != SessionState::Finished {
        let now = clock.now_ms();
        let (record, result) = match session.state {
            SessionState::AwaitingEntity => {
                show_path(&mut writer, &session)?;
                write!(writer, "Entity of interest (or 'none', q = stop): ")?;
                writer.flush()?;
                match read_line(&mut reader)? {
                    None => {
                        let stop = UserAction::Stop;
                        (LogRecord::action(now, &session_id, &stop), session.apply_action(&stop, backend, now))
                    }
                    Some(line) if line.eq_ignore_ascii_case("q") => {
                        let stop = UserAction::Stop;
                        (LogRecord::action(now, &session_id, &stop), session.apply_action(&stop, backend, now))
                    }
                    Some(line) => {
                        let entity = Some(line.as_str()).filter(|e| !e.is_empty() && !e.eq_ignore_ascii_case("none"));
                        (LogRecord::entity(now, &session_id, entity), session.propose_candidates(entity, backend, now))
                    }
                }
            }
            SessionState::AwaitingAction => {
                for (i, c) in session.pending_candidates.iter().enumerate() {
                    writeln!(writer, "  {}) {}", i + 1, c)?;
                }
                write!(
                    writer,
                    "[{}s left] choose 1-{}, r = regenerate, b N = back to step N, q = stop: ",
                    session.seconds_remaining(now),
                    session.pending_candidates.len()
                )?;
                writer.flush()?;
                let action = match read_line(&mut reader)? {
                    None => UserAction::Stop,
                    Some(line) => match parse_command(&line) {
                        Some(Command::Act(a)) => a,
                        Some(Command::Help) | None => {
                            writeln!(writer, "Type a candidate number, r, b N or q.")?;
                            continue;
                        }
                    },
                };
                (LogRecord::action(now, &session_id, &action), session.apply_action(&action, backend, now))
            }
            SessionState::Finished => unreachable!(),
        };
        match result {
            Err(SessionError::Backend(e)) => return Err(SessionError::Backend(e).into()),
            Err(e) => writeln!(writer, "{e}")?,
            Ok(()) => {}
        }
        if let Some(l) = log.as_mut() {
            l.write_all(record.to_line().as_bytes())?;
        }
    }
    let m = session.finalize_metrics()?;
    writeln!(
        writer,
        "Session finished: {} accepted, {} rejected ({:.1}%), {} resamples, {} steps, depth {}.",
        m.accepted_events, m.rejected_steps, m.pct_rejected, m.resamples, m.total_steps, m.tree_depth
    )?;
    Ok(m)
}
