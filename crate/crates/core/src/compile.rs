//! Compilation score: does the candidate build under OpenMP flags?

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable overriding `compiler_command` (whitespace separated).
pub const COMPILER_ENV: &str = "OMPBLEU_CC";

const SNIPPET_PROLOGUE: &str =
    "#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n#include <math.h>\n#include <omp.h>\n#line 1\n";
const STUB_MAIN: &str = "\nint main(void) { return 0; }\n";

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("compiler `{command}` not found or not executable: {source}")]
    CompilerNotFound { command: String, source: io::Error },
    #[error("compiler did not finish within {secs} s")]
    Timeout { secs: f64 },
    #[error("invalid compile configuration: {0}")]
    Config(String),
    #[error("compiler I/O failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompileMode {
    Full,
    #[default]
    SyntaxOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    #[default]
    Auto,
    C,
    Cxx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    pub compiler_command: Vec<String>,
    pub extra_flags: Vec<String>,
    pub mode: CompileMode,
    pub language: Language,
    pub timeout_secs: f64,
    /// Add common headers to units without includes, and a stub `main` in full mode.
    pub wrap_snippets: bool,
    /// Score a timeout as 0 instead of failing.
    pub timeout_is_failure: bool,
    pub cache_dir: Option<PathBuf>,
    pub max_parallel: usize,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            compiler_command: vec!["gcc".into()],
            extra_flags: vec!["-fopenmp".into()],
            mode: CompileMode::SyntaxOnly,
            language: Language::Auto,
            timeout_secs: 30.0,
            wrap_snippets: true,
            timeout_is_failure: false,
            cache_dir: None,
            max_parallel: thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

impl CompileConfig {
    pub fn validate(&self) -> Result<(), CompileError> {
        if self.compiler_command.is_empty() || self.compiler_command[0].trim().is_empty() {
            return Err(CompileError::Config("compiler_command is empty".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(CompileError::Config(format!(
                "timeout_secs must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.max_parallel == 0 {
            return Err(CompileError::Config("max_parallel must be at least 1".into()));
        }
        Ok(())
    }

    fn resolved_command(&self) -> Vec<String> {
        match std::env::var(COMPILER_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => cmd.split_whitespace().map(str::to_string).collect(),
            _ => self.compiler_command.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub score: u8,
    pub diagnostics: String,
    pub duration_secs: f64,
    pub cached: bool,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// A configured compiler with a result cache; safe to share across threads.
pub struct Compiler {
    config: CompileConfig,
    command: Vec<String>,
    memo: Mutex<HashMap<String, CompileResult>>,
    gate: Semaphore,
}

impl std::fmt::Debug for Compiler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Compiler")
            .field("command", &self.command)
            .finish_non_exhaustive()
    }
}

fn looks_like_cxx(source: &str) -> bool {
    [
        "std::",
        "#include <iostream",
        "#include <vector",
        "using namespace",
        "template<",
        "template <",
        "class ",
    ]
    .iter()
    .any(|m| source.contains(m))
}

impl Compiler {
    pub fn new(config: CompileConfig) -> Result<Self, CompileError> {
        config.validate()?;
        let command = config.resolved_command();
        Ok(Compiler {
            gate: Semaphore {
                free: Mutex::new(config.max_parallel),
                cv: Condvar::new(),
            },
            config,
            command,
            memo: Mutex::default(),
        })
    }

    pub fn config(&self) -> &CompileConfig {
        &self.config
    }

    fn language(&self, source: &str) -> Language {
        match self.config.language {
            Language::Auto if looks_like_cxx(source) => Language::Cxx,
            Language::Auto => Language::C,
            l => l,
        }
    }

    /// Source actually handed to the compiler, plus a note when it was wrapped.
    fn prepared(&self, source: &str) -> (String, Option<&'static str>) {
        if !self.config.wrap_snippets {
            return (source.to_string(), None);
        }
        let needs_headers = !source.contains("#include");
        let needs_main = self.config.mode == CompileMode::Full && !source.contains("main");
        match (needs_headers, needs_main) {
            (false, false) => (source.to_string(), None),
            (true, false) => (
                format!("{SNIPPET_PROLOGUE}{source}"),
                Some("wrapped: standard header prologue added"),
            ),
            (false, true) => (format!("{source}{STUB_MAIN}"), Some("wrapped: stub main added")),
            (true, true) => (
                format!("{SNIPPET_PROLOGUE}{source}{STUB_MAIN}"),
                Some("wrapped: standard header prologue and stub main added"),
            ),
        }
    }

    fn args(&self, lang: Language, out: Option<&Path>) -> Vec<String> {
        let mut args: Vec<String> = self.command[1..].to_vec();
        args.extend(self.config.extra_flags.iter().cloned());
        match self.config.mode {
            CompileMode::SyntaxOnly => args.push("-fsyntax-only".into()),
            CompileMode::Full => {
                args.push("-O0".into());
                if let Some(out) = out {
                    args.push("-o".into());
                    args.push(out.display().to_string());
                }
            }
        }
        args.push("-x".into());
        args.push(if lang == Language::Cxx { "c++" } else { "c" }.into());
        args.push("-".into());
        if lang == Language::Cxx && self.config.mode == CompileMode::Full {
            args.push("-lstdc++".into());
        }
        args
    }

    fn cache_key(&self, source: &str) -> String {
        let lang = self.language(source);
        let mut h = Sha256::new();
        for part in self.args(lang, None).iter().chain(&self.command[..1]) {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update([u8::from(self.config.wrap_snippets)]);
        h.update(source.as_bytes());
        hex::encode(h.finalize())
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn lookup(&self, key: &str) -> Option<CompileResult> {
        if let Some(r) = self.memo.lock().expect("compile cache poisoned").get(key) {
            return Some(r.clone());
        }
        let text = std::fs::read_to_string(self.cache_path(key)?).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store(&self, key: &str, result: &CompileResult) -> Result<(), CompileError> {
        self.memo
            .lock()
            .expect("compile cache poisoned")
            .insert(key.to_string(), result.clone());
        if let (Some(dir), Some(path)) = (&self.config.cache_dir, self.cache_path(key)) {
            std::fs::create_dir_all(dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(serde_json::to_string(result).expect("result serializes").as_bytes())?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
        Ok(())
    }

    pub fn compile_score(&self, source: &str) -> Result<CompileResult, CompileError> {
        let key = self.cache_key(source);
        if let Some(mut hit) = self.lookup(&key) {
            hit.cached = true;
            return Ok(hit);
        }
        let result = {
            let _permit = self.gate.acquire();
            self.run(source)?
        };
        self.store(&key, &result)?;
        Ok(result)
    }

    fn run(&self, source: &str) -> Result<CompileResult, CompileError> {
        let (text, note) = self.prepared(source);
        let scratch = tempfile::tempdir()?;
        let out = scratch.path().join("a.out");
        let args = self.args(self.language(source), Some(&out));
        let started = Instant::now();
        let mut child = Command::new(&self.command[0])
            .args(&args)
            .current_dir(scratch.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| CompileError::CompilerNotFound {
                command: self.command[0].clone(),
                source,
            })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || {
            // The compiler may exit early without draining its input.
            let _ = stdin.write_all(text.as_bytes());
        });
        let readers: Vec<_> = [
            child.stdout.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
            child.stderr.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
        ]
        .into_iter()
        .flatten()
        .map(|mut r| {
            thread::spawn(move || {
                let mut buf = String::new();
                let _ = r.read_to_string(&mut buf);
                buf
            })
        })
        .collect();

        let limit = Duration::from_secs_f64(self.config.timeout_secs);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if started.elapsed() >= limit {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_millis(5));
        };
        let _ = writer.join();
        let mut diagnostics = String::new();
        if let Some(note) = note {
            diagnostics.push_str(note);
            diagnostics.push('\n');
        }
        for r in readers {
            diagnostics.push_str(&r.join().unwrap_or_default());
        }
        let duration_secs = started.elapsed().as_secs_f64();
        match status {
            Some(status) => Ok(CompileResult {
                score: u8::from(status.success()),
                diagnostics,
                duration_secs,
                cached: false,
            }),
            None if self.config.timeout_is_failure => Ok(CompileResult {
                score: 0,
                diagnostics: format!("{diagnostics}timed out after {} s\n", self.config.timeout_secs),
                duration_secs,
                cached: false,
            }),
            None => Err(CompileError::Timeout {
                secs: self.config.timeout_secs,
            }),
        }
    }
}

/// One-shot convenience over [`Compiler`].
pub fn compile_score(source: &str, config: &CompileConfig) -> Result<CompileResult, CompileError> {
    Compiler::new(config.clone())?.compile_score(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gcc_available() -> bool {
        Command::new("gcc").arg("--version").output().is_ok()
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = CompileConfig {
            compiler_command: vec![],
            ..CompileConfig::default()
        };
        assert!(matches!(Compiler::new(cfg), Err(CompileError::Config(_))));
        let cfg = CompileConfig {
            timeout_secs: 0.0,
            ..CompileConfig::default()
        };
        assert!(matches!(Compiler::new(cfg), Err(CompileError::Config(_))));
    }

    #[test]
    fn missing_compiler_is_an_error() {
        let cfg = CompileConfig {
            compiler_command: vec!["/nonexistent/cc-for-tests".into()],
            ..CompileConfig::default()
        };
        let c = Compiler {
            command: cfg.compiler_command.clone(),
            gate: Semaphore {
                free: Mutex::new(1),
                cv: Condvar::new(),
            },
            config: cfg,
            memo: Mutex::default(),
        };
        assert!(matches!(
            c.compile_score("int x;"),
            Err(CompileError::CompilerNotFound { .. })
        ));
    }

    #[test]
    fn wrapping_rules() {
        let c = Compiler::new(CompileConfig::default()).unwrap();
        assert!(c.prepared("int f(void){return 0;}").0.starts_with("#include <stdio.h>"));
        assert_eq!(c.prepared("#include <math.h>\nint x;").1, None);
        let full = Compiler::new(CompileConfig {
            mode: CompileMode::Full,
            ..CompileConfig::default()
        })
        .unwrap();
        assert!(full.prepared("#include <math.h>\nint x;").0.ends_with(STUB_MAIN));
    }

    #[test]
    fn compiles_and_caches() {
        if !gcc_available() {
            eprintln!("gcc not found, skipping");
            return;
        }
        let dir = tempfile::tempdir().unwrap();
        let cfg = CompileConfig {
            cache_dir: Some(dir.path().to_path_buf()),
            ..CompileConfig::default()
        };
        let c = Compiler::new(cfg.clone()).unwrap();
        let ok =
            "int f(int n){int s=0;\n#pragma omp parallel for reduction(+:s)\nfor(int i=0;i<n;i++) s+=i; return s;}";
        let first = c.compile_score(ok).unwrap();
        assert_eq!(first.score, 1, "{}", first.diagnostics);
        assert!(!first.cached);
        assert!(c.compile_score(ok).unwrap().cached);
        // A fresh compiler sees the on-disk cache.
        assert!(Compiler::new(cfg).unwrap().compile_score(ok).unwrap().cached);

        let bad = "int f(int n){ for(int i=0;i<n;i++){}\n#pragma omp parallel for\ndouble p = 1.0; return 0; }";
        assert_eq!(c.compile_score(bad).unwrap().score, 0);
        assert_eq!(c.compile_score("").unwrap().score, 1);
    }

    #[test]
    fn timeout_handling() {
        let script = "/bin/sh";
        if !Path::new(script).exists() {
            return;
        }
        let cfg = CompileConfig {
            compiler_command: vec![script.into(), "-c".into(), "exec sleep 5".into()],
            extra_flags: vec![],
            timeout_secs: 0.2,
            ..CompileConfig::default()
        };
        let c = Compiler::new(cfg.clone()).unwrap();
        assert!(matches!(c.compile_score("x"), Err(CompileError::Timeout { .. })));
        let c = Compiler::new(CompileConfig {
            timeout_is_failure: true,
            ..cfg
        })
        .unwrap();
        assert_eq!(c.compile_score("x").unwrap().score, 0);
    }
}
