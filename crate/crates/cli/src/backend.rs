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

//! Resolving `--backend` specs.
//!
//! - `exec:PROGRAM [ARGS...]` starts a process speaking the backend protocol
//!   on its standard input and output.
//! - `builtin:echo` and `builtin:constant:TEXT` are closed-form demo backends.
//! - Anything else is a path to a saved reference model.

use std::sync::Arc;

use anyhow::{bail, Context, Result};

use evqa::generation::ipc::ProcessBackend;
use evqa::generation::scripted::{ConstantBackend, EchoBackend};
use evqa::generation::{GeneratorBackend, ReferenceBackend, Variant};

pub fn open_backend(spec: &str, variant: Option<Variant>) -> Result<Arc<dyn GeneratorBackend>> {
    if let Some(cmd) = spec.strip_prefix("exec:") {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let Some(program) = parts.next() else {
            bail!("empty command in backend spec {spec:?}");
        };
        let args: Vec<String> = parts.collect();
        return Ok(Arc::new(ProcessBackend::spawn(&program, &args)?));
    }
    if let Some(name) = spec.strip_prefix("builtin:") {
        return match name {
            "echo" => Ok(Arc::new(EchoBackend)),
            _ => match name.strip_prefix("constant:") {
                Some(text) => Ok(Arc::new(ConstantBackend::new(text))),
                None => bail!("unknown builtin backend {name:?} (expected echo or constant:TEXT)"),
            },
        };
    }
    let model = ReferenceBackend::load(spec).with_context(|| format!("loading reference model {spec}"))?;
    if let Some(v) = variant {
        if model.variant() != v {
            bail!("{spec} was trained for {}, not {v}", model.variant());
        }
    }
    tracing::info!(model = %model.description(), "loaded backend");
    Ok(Arc::new(model))
}
