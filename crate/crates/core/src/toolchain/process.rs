// SPDX-License-Identifier: Apache-2.0

use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{RawToolLog, TIMEOUT_EXIT_CODE};
use crate::error::{Error, Result};

fn drain<R: Read + Send + 'static>(stream: Option<R>) -> JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut s) = stream {
            let _ = s.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_group(child: &Child) {
    // the child leads its own process group, so this also reaps anything it forked
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs `argv` in `cwd` without a shell, in a fresh process group, killing
/// the whole group once `timeout` elapses.
pub(crate) fn run_with_timeout(argv: &[String], cwd: &Path, timeout: Duration) -> Result<RawToolLog> {
    let (program, args) = argv.split_first().ok_or_else(|| Error::Tool("empty command line".into()))?;
    let started = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .env("HDLREFINE_WORKDIR", cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Tool(format!("executable `{program}` not found")),
            _ => Error::Tool(format!("cannot start `{program}`: {e}")),
        })?;

    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let deadline = started + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                timed_out = true;
                kill_group(&child);
                break child.wait().map_err(|e| Error::Tool(format!("waiting for `{program}`: {e}")))?;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(Error::Tool(format!("waiting for `{program}`: {e}"))),
        }
    };
    // stray grandchildren would otherwise hold the pipes open
    kill_group(&child);

    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();
    let exit_code =
        if timed_out { TIMEOUT_EXIT_CODE } else { status.code().unwrap_or_else(|| 128 + status.signal().unwrap_or(0)) };
    Ok(RawToolLog { stdout, stderr, exit_code, duration_ms: started.elapsed().as_millis() as u64, timed_out })
}
