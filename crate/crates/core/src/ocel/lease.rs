//! Per-file reader/writer leases with FIFO ordering among writers.
//!
//! Writers queue by ticket. Readers share access but wait while a writer
//! is active or queued.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, OnceLock};

#[derive(Default)]
struct State {
    readers: usize,
    writer_active: bool,
    next_ticket: u64,
    serving: u64,
}

#[derive(Default)]
struct FileLease {
    state: Mutex<State>,
    changed: Condvar,
}

fn registry() -> &'static Mutex<HashMap<PathBuf, Arc<FileLease>>> {
    static REGISTRY: OnceLock<Mutex<HashMap<PathBuf, Arc<FileLease>>>> = OnceLock::new();
    REGISTRY.get_or_init(Default::default)
}

fn lease_for(path: &Path) -> Arc<FileLease> {
    let key = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    registry().lock().unwrap().entry(key).or_default().clone()
}

pub struct ReadGuard(Arc<FileLease>);

pub struct WriteGuard(Arc<FileLease>);

impl Drop for ReadGuard {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().unwrap();
        s.readers -= 1;
        self.0.changed.notify_all();
    }
}

impl Drop for WriteGuard {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().unwrap();
        s.writer_active = false;
        self.0.changed.notify_all();
    }
}

pub fn read(path: &Path) -> ReadGuard {
    let lease = lease_for(path);
    {
        let mut s = lease.state.lock().unwrap();
        while s.writer_active || s.serving < s.next_ticket {
            s = lease.changed.wait(s).unwrap();
        }
        s.readers += 1;
    }
    ReadGuard(lease)
}

/// Blocks until every earlier writer has finished and no reader is active.
pub fn write(path: &Path) -> WriteGuard {
    write_queued(path, || {})
}

fn write_queued(path: &Path, on_enqueued: impl FnOnce()) -> WriteGuard {
    let lease = lease_for(path);
    {
        let mut s = lease.state.lock().unwrap();
        let ticket = s.next_ticket;
        s.next_ticket += 1;
        on_enqueued();
        while s.serving != ticket || s.writer_active || s.readers > 0 {
            s = lease.changed.wait(s).unwrap();
        }
        s.serving += 1;
        s.writer_active = true;
        lease.changed.notify_all();
    }
    WriteGuard(lease)
}

/// Acquires the writer lease only if nobody holds or waits for it.
pub fn try_write(path: &Path) -> Option<WriteGuard> {
    let lease = lease_for(path);
    {
        let mut s = lease.state.lock().unwrap();
        if s.writer_active || s.readers > 0 || s.serving != s.next_ticket {
            return None;
        }
        s.next_ticket += 1;
        s.serving += 1;
        s.writer_active = true;
    }
    Some(WriteGuard(lease))
}

pub fn is_write_locked(path: &Path) -> bool {
    let lease = lease_for(path);
    let s = lease.state.lock().unwrap();
    s.writer_active || s.serving != s.next_ticket
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn writers_are_served_in_arrival_order() {
        let path = PathBuf::from("/nonexistent/lease-fifo-test");
        let first = write(&path);
        let order = Arc::new(Mutex::new(Vec::new()));
        let arrived = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for i in 0..4 {
            let (path, order, arrived) = (path.clone(), order.clone(), arrived.clone());
            // stagger so tickets are taken in index order
            while arrived.load(Ordering::SeqCst) != i {
                std::thread::sleep(Duration::from_millis(1));
            }
            handles.push(std::thread::spawn(move || {
                let _g = write_queued(&path, || {
                    arrived.fetch_add(1, Ordering::SeqCst);
                });
                order.lock().unwrap().push(i);
            }));
        }
        while arrived.load(Ordering::SeqCst) != 4 {
            std::thread::sleep(Duration::from_millis(1));
        }
        assert!(try_write(&path).is_none());
        drop(first);
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(*order.lock().unwrap(), vec![0, 1, 2, 3]);
        assert!(try_write(&path).is_some());
    }

    #[test]
    fn readers_share_but_exclude_writers() {
        let path = PathBuf::from("/nonexistent/lease-rw-test");
        let r1 = read(&path);
        let r2 = read(&path);
        assert!(try_write(&path).is_none());
        drop((r1, r2));
        let w = try_write(&path).expect("free");
        assert!(is_write_locked(&path));
        drop(w);
        assert!(!is_write_locked(&path));
    }
}
