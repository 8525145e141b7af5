use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{aggregate_human, Choice, GameAnswer, GameTask, HumanSummary};
use crate::synth::rng_for;

const SESSION_FILE: &str = "session.json";
const ANSWERS_FILE: &str = "answers.jsonl";
const SHUFFLE_STREAM: u64 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Tasks this voter has answered.
    pub done: usize,
    pub total: usize,
}

/// What a client sees for one task. Carries no hint of which image is the
/// target or whether the pair was swapped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub image_left_url: String,
    pub image_right_url: String,
    pub phrase: String,
    pub progress: Progress,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub status: SessionStatus,
    /// The voter's next unanswered task, if any.
    pub next_task_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SessionFile {
    session_id: String,
    panel_size: usize,
    seed: u64,
    tasks: Vec<GameTask>,
}

/// A human-listener session: a fixed list of tasks and an append-only log
/// of answers, mirrored to disk when the session has a directory.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub panel_size: usize,
    pub seed: u64,
    tasks: Vec<GameTask>,
    index: HashMap<String, usize>,
    answers: Vec<GameAnswer>,
    voted: HashSet<(String, String)>,
    voters: Vec<usize>,
    log: Option<(PathBuf, File)>,
}

impl Session {
    /// Samples `n_tasks` tasks from `pool` with a seeded shuffle and draws a
    /// presentation swap for each. Task ids are replaced by opaque
    /// session-local ids.
    pub fn create(
        id: impl Into<String>,
        mut pool: Vec<GameTask>,
        n_tasks: usize,
        panel_size: usize,
        seed: u64,
        dir: Option<&Path>,
    ) -> Result<Session> {
        if n_tasks == 0 || panel_size == 0 {
            return Err(Error::ConfigError("sessions need at least one task and one voter".into()));
        }
        if n_tasks > pool.len() {
            return Err(Error::InsufficientTasks {
                requested: n_tasks,
                available: pool.len(),
            });
        }
        let mut rng = rng_for(seed, SHUFFLE_STREAM);
        pool.shuffle(&mut rng);
        pool.truncate(n_tasks);
        for (i, t) in pool.iter_mut().enumerate() {
            t.task_id = format!("t{i:04}");
            t.presentation_swap = rng.random_bool(0.5);
        }
        let mut s = Session::from_parts(id.into(), panel_size, seed, pool);
        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let file = SessionFile {
                session_id: s.id.clone(),
                panel_size,
                seed,
                tasks: s.tasks.clone(),
            };
            let path = dir.join(SESSION_FILE);
            fs::write(&path, serde_json::to_string_pretty(&file)? + "\n").map_err(|e| Error::io(&path, e))?;
            s.log = Some(open_log(&dir.join(ANSWERS_FILE))?);
        }
        Ok(s)
    }

    /// Reopens a session directory, replaying its answer log.
    pub fn open(dir: &Path) -> Result<Session> {
        let file = read_session_file(&dir.join(SESSION_FILE))?;
        let mut s = Session::from_parts(file.session_id, file.panel_size, file.seed, file.tasks);
        let log_path = dir.join(ANSWERS_FILE);
        if log_path.exists() {
            for a in load_answer_log(&log_path)? {
                s.record(a)?;
            }
        }
        s.log = Some(open_log(&log_path)?);
        Ok(s)
    }

    fn from_parts(id: String, panel_size: usize, seed: u64, tasks: Vec<GameTask>) -> Session {
        let index = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        let voters = vec![0; tasks.len()];
        Session {
            id,
            panel_size,
            seed,
            tasks,
            index,
            answers: Vec::new(),
            voted: HashSet::new(),
            voters,
            log: None,
        }
    }

    pub fn tasks(&self) -> &[GameTask] {
        &self.tasks
    }

    pub fn answers(&self) -> &[GameAnswer] {
        &self.answers
    }

    pub fn status(&self) -> SessionStatus {
        if self.voters.iter().all(|&n| n >= self.panel_size) {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        }
    }

    fn next_index(&self, voter: &str) -> Option<usize> {
        (0..self.tasks.len()).find(|&i| {
            self.voters[i] < self.panel_size && !self.voted.contains(&(self.tasks[i].task_id.clone(), voter.to_string()))
        })
    }

    /// The first task this voter has not answered whose panel is still open.
    pub fn next_task(&self, voter: &str, image_url: impl Fn(&str) -> String) -> Option<TaskView> {
        let i = self.next_index(voter)?;
        let t = &self.tasks[i];
        let (left, right) = t.presented();
        Some(TaskView {
            task_id: t.task_id.clone(),
            image_left_url: image_url(left),
            image_right_url: image_url(right),
            phrase: t.phrase.join(" "),
            progress: self.progress(voter),
        })
    }

    pub fn progress(&self, voter: &str) -> Progress {
        Progress {
            done: self.voted.iter().filter(|(_, v)| v == voter).count(),
            total: self.tasks.len(),
        }
    }

    fn record(&mut self, answer: GameAnswer) -> Result<()> {
        let i = *self
            .index
            .get(&answer.task_id)
            .ok_or_else(|| Error::UnknownTask(answer.task_id.clone()))?;
        let key = (answer.task_id.clone(), answer.voter_id.clone());
        if self.voted.contains(&key) {
            return Err(Error::DuplicateAnswer {
                task_id: answer.task_id,
                voter: answer.voter_id,
            });
        }
        self.voted.insert(key);
        self.voters[i] += 1;
        self.answers.push(answer);
        Ok(())
    }

    /// Validates and durably appends one answer. The raw on-screen choice is
    /// stored; the swap is only undone when summarizing.
    pub fn submit(&mut self, task_id: &str, voter: &str, choice: Choice, timestamp: u64) -> Result<Ack> {
        if self.status() == SessionStatus::Complete {
            return Err(Error::SessionClosed(self.id.clone()));
        }
        if !self.index.contains_key(task_id) {
            return Err(Error::UnknownTask(task_id.to_string()));
        }
        if self.voted.contains(&(task_id.to_string(), voter.to_string())) {
            return Err(Error::DuplicateAnswer {
                task_id: task_id.to_string(),
                voter: voter.to_string(),
            });
        }
        let answer = GameAnswer {
            task_id: task_id.to_string(),
            voter_id: voter.to_string(),
            choice,
            timestamp,
        };
        if let Some((path, file)) = &mut self.log {
            let line = serde_json::to_string(&answer)? + "\n";
            file.write_all(line.as_bytes()).map_err(|e| Error::io(&*path, e))?;
            file.sync_data().map_err(|e| Error::io(&*path, e))?;
        }
        self.record(answer)?;
        Ok(Ack {
            task_id: task_id.to_string(),
            status: self.status(),
            next_task_id: self.next_index(voter).map(|i| self.tasks[i].task_id.clone()),
        })
    }

    /// Panel aggregation over the log; every task needs a full panel.
    pub fn summary(&self) -> Result<HumanSummary> {
        let incomplete = self.voters.iter().filter(|&&n| n < self.panel_size).count();
        if incomplete > 0 {
            return Err(Error::IncompletePanels { incomplete });
        }
        Ok(aggregate_human(&self.tasks, &self.answers, self.panel_size)?.0)
    }
}

fn open_log(path: &Path) -> Result<(PathBuf, File)> {
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok((path.to_path_buf(), f))
}

fn read_session_file(path: &Path) -> Result<SessionFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `(panel_size, tasks)` as stored in a session directory.
pub fn load_session_tasks(dir: &Path) -> Result<(usize, Vec<GameTask>)> {
    let f = read_session_file(&dir.join(SESSION_FILE))?;
    Ok((f.panel_size, f.tasks))
}

pub fn load_answer_log(path: &Path) -> Result<Vec<GameAnswer>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::ParseError {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Recomputes a session summary straight from its directory.
pub fn summarize_log(dir: &Path) -> Result<HumanSummary> {
    let (panel, tasks) = load_session_tasks(dir)?;
    let answers = load_answer_log(&dir.join(ANSWERS_FILE))?;
    Ok(aggregate_human(&tasks, &answers, panel)?.0)
}
