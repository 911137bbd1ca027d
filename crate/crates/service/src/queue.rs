//! Worker pool that runs queued projects.

use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{unbounded, Sender};

use crate::error::Result;
use crate::pipeline;
use crate::store::Store;

pub struct Queue {
    tx: Option<Sender<String>>,
    workers: Vec<JoinHandle<()>>,
}

/// Half the hardware threads, at least one.
pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| (n.get() / 2).max(1))
}

impl Queue {
    pub fn start(store: Arc<Store>, workers: usize) -> Self {
        let (tx, rx) = unbounded::<String>();
        let workers = (0..workers.max(1))
            .map(|i| {
                let rx = rx.clone();
                let store = store.clone();
                thread::Builder::new()
                    .name(format!("pipeline-{i}"))
                    .spawn(move || {
                        for id in rx {
                            match pipeline::run(&store, &id) {
                                Ok(status) => tracing::info!(project = %id, %status, "run finished"),
                                Err(e) => tracing::error!(project = %id, error = %e, "run aborted"),
                            }
                        }
                    })
                    .expect("spawn pipeline worker")
            })
            .collect();
        Queue { tx: Some(tx), workers }
    }

    pub fn submit(&self, id: &str) {
        if let Some(tx) = &self.tx {
            tx.send(id.to_string()).expect("workers outlive the queue handle");
        }
    }

    /// Re-queues every project left in a running state by an earlier
    /// process. Returns how many were picked up.
    pub fn recover(&self, store: &Store) -> Result<usize> {
        let mut n = 0;
        for project in store.list_projects()? {
            if project.state.value.is_running() {
                tracing::info!(project = %project.project_id, state = %project.state.value, "resuming");
                self.submit(&project.project_id);
                n += 1;
            }
        }
        Ok(n)
    }
}

impl Drop for Queue {
    fn drop(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
