use std::io::{self, Read};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

/// Captured output beyond this many bytes is drained and discarded.
const MAX_CAPTURE_BYTES: usize = 4 << 20;
const POLL_INTERVAL: Duration = Duration::from_millis(5);

#[derive(Debug)]
pub(crate) struct ProcessOutput {
    /// `None` when the process was killed on timeout.
    pub status: Option<ExitStatus>,
    /// stdout and stderr interleaved in arrival order.
    pub output: String,
    pub timed_out: bool,
}

/// Run `program args...` in `cwd` with stdout and stderr sharing one pipe.
/// The child gets its own process group so a timeout kills any helpers it
/// spawned as well.
pub(crate) fn run(
    program: &str,
    args: &[&str],
    cwd: &Path,
    timeout: Duration,
) -> io::Result<ProcessOutput> {
    let (mut reader, writer) = io::pipe()?;
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(writer.try_clone()?)
        .stderr(writer)
        .process_group(0);
    let mut child = cmd.spawn()?;
    // Drop our copies of the write end so the reader sees EOF.
    drop(cmd);

    let collector = thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let room = MAX_CAPTURE_BYTES.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        kept
    });

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            timed_out = true;
            let pgid = child.id() as libc::pid_t;
            // SAFETY: signalling a process group we created; no memory is touched.
            unsafe {
                libc::kill(-pgid, libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        thread::sleep(POLL_INTERVAL);
    };

    let bytes = collector.join().unwrap_or_default();
    Ok(ProcessOutput {
        status,
        output: String::from_utf8_lossy(&bytes).into_owned(),
        timed_out,
    })
}
