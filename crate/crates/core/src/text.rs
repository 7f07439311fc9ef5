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

//! Text normalization shared by matching, prompting and metrics.
//!
//! All comparisons in the workbench are case-insensitive and insensitive to
//! runs of whitespace.

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Normalized whitespace tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

/// Default token counter used for the input/output budgets.
pub fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// True when `needle` occurs in `haystack` as a contiguous run of whole
/// tokens, after normalization. An empty needle never matches.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    find_phrase(&tokens(haystack), &tokens(needle)).is_some()
}

/// Token offset of the first occurrence of `needle` inside `haystack`.
pub fn find_phrase(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Normalized equality.
pub fn same_text(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}
