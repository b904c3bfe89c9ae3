//! Domain types for tasks, systems, and chains, plus validation of the
//! structural preconditions the rest of the pipeline assumes.
//!
//! All durations and instants are unsigned 64-bit integer microseconds.
//! Priorities follow the convention that a larger numeric value means a
//! higher priority.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Time value in microseconds.
pub type Micros = u64;

/// Index of a task within its [`SystemModel`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(u32);

impl TaskId {
    pub fn new(raw: u32) -> Self {
        TaskId(raw)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How instances of a task are released.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationPattern {
    /// Released at `offset + (j-1) * period` for instance j = 1, 2, ...
    Periodic { period: Micros, offset: Micros },
    /// Released when the predecessor task's instance finishes.
    Chained { predecessor: TaskId },
    /// Consecutive releases are between `dt_min` and `dt_max` apart.
    Bounded { dt_min: Micros, dt_max: Micros },
    /// Consecutive releases are at least `dt_min` apart; no upper bound.
    Sporadic { dt_min: Micros },
}

impl ActivationPattern {
    pub fn is_periodic(&self) -> bool {
        matches!(self, ActivationPattern::Periodic { .. })
    }

    pub fn is_sporadic(&self) -> bool {
        matches!(self, ActivationPattern::Sporadic { .. })
    }

    pub fn predecessor(&self) -> Option<TaskId> {
        match self {
            ActivationPattern::Chained { predecessor } => Some(*predecessor),
            _ => None,
        }
    }
}

/// Shared-memory communication paradigm of a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommParadigm {
    /// Inputs are read at start, outputs published at finish.
    Implicit,
    /// Reads/writes happen during execution; modeled with publish at finish.
    Explicit,
    /// Outputs become visible at the task's next release boundary only.
    /// Valid for periodically activated tasks.
    Deterministic,
}

/// Static description of one task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub name: String,
    pub activation: ActivationPattern,
    /// Larger value = higher priority.
    pub prio: u32,
    pub core: u32,
    pub preemptable: bool,
    pub deadline: Micros,
    /// Best-case execution time; may be zero.
    pub bcet: Micros,
    pub wcet: Option<Micros>,
    pub wcrt: Option<Micros>,
    pub comm: CommParadigm,
}

/// Raw task description before validation; chained predecessors are by name.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTask {
    pub name: String,
    pub activation: RawActivation,
    pub prio: u32,
    pub core: u32,
    pub preemptable: bool,
    pub deadline: Micros,
    pub bcet: Micros,
    pub wcet: Option<Micros>,
    pub wcrt: Option<Micros>,
    pub comm: CommParadigm,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawActivation {
    Periodic { period: Micros, offset: Micros },
    Chained { predecessor: String },
    Bounded { dt_min: Micros, dt_max: Micros },
    Sporadic { dt_min: Micros },
}

/// Validated task set plus core count; the unit of analysis input.
/// Immutable after construction and safe to share across workers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemModel {
    tasks: Vec<TaskSpec>,
    num_cores: u32,
}

impl SystemModel {
    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> &TaskSpec {
        &self.tasks[id.index()]
    }

    pub fn num_cores(&self) -> u32 {
        self.num_cores
    }

    pub fn ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        (0..self.tasks.len() as u32).map(TaskId)
    }

    pub fn task_by_name(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name).map(|i| TaskId(i as u32))
    }
}

/// Ordered task sequence whose end-to-end latency is sought.
/// Tasks may repeat; sporadic tasks are only allowed at the first position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    tasks: Vec<TaskId>,
}

impl Chain {
    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn first(&self) -> TaskId {
        self.tasks[0]
    }

    pub fn last(&self) -> TaskId {
        *self.tasks.last().unwrap()
    }
}

/// A single broken validation rule, with the task it concerns.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("DuplicateId: task name {name:?} appears more than once")]
    DuplicateId { name: String },
    #[error("UnknownPredecessor: task {task:?} is chained to unknown task {predecessor:?}")]
    UnknownPredecessor { task: String, predecessor: String },
    #[error("ChainedCycle: chained activation cycle through {cycle:?}")]
    ChainedCycle { cycle: Vec<String> },
    #[error("DuplicatePriorityOnCore: tasks {first:?} and {second:?} share priority {prio} on core {core}")]
    DuplicatePriorityOnCore { core: u32, prio: u32, first: String, second: String },
    #[error("DeterministicNonPeriodic: task {task:?} uses deterministic communication without periodic activation")]
    DeterministicNonPeriodic { task: String },
    #[error("BadBounds: task {task:?}: {rule}")]
    BadBounds { task: String, rule: String },
    #[error("UnknownTask: chain references unknown task {name:?}")]
    UnknownTask { name: String },
    #[error("SporadicNotFirst: sporadic task {task:?} at chain position {position} (only position 1 is allowed)")]
    SporadicNotFirst { task: String, position: usize },
}

/// Non-empty list of every violation found in the input.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} validation error(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Validate a raw task list into a [`SystemModel`].
///
/// Returns every violation found, not just the first.
pub fn validate_system(raw: &[RawTask], num_cores: u32) -> Result<SystemModel, ValidationError> {
    let mut violations = Vec::new();

    if num_cores == 0 {
        violations.push(Violation::BadBounds {
            task: "<system>".into(),
            rule: "num_cores must be >= 1".into(),
        });
    }

    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (i, t) in raw.iter().enumerate() {
        if by_name.insert(t.name.as_str(), i).is_some() {
            violations.push(Violation::DuplicateId { name: t.name.clone() });
        }
    }

    for t in raw {
        check_bounds(t, num_cores, &mut violations);
        if let RawActivation::Chained { predecessor } = &t.activation {
            match by_name.get(predecessor.as_str()) {
                None => violations.push(Violation::UnknownPredecessor {
                    task: t.name.clone(),
                    predecessor: predecessor.clone(),
                }),
                Some(&p) if raw[p].name == t.name => {
                    violations.push(Violation::UnknownPredecessor {
                        task: t.name.clone(),
                        predecessor: predecessor.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        if t.comm == CommParadigm::Deterministic
            && !matches!(t.activation, RawActivation::Periodic { .. })
        {
            violations.push(Violation::DeterministicNonPeriodic { task: t.name.clone() });
        }
    }

    // Chained-activation graph must be acyclic (predecessor edges only exist
    // when the name resolves).
    find_chained_cycles(raw, &by_name, &mut violations);

    // Pairwise distinct priorities per core.
    let mut seen: HashMap<(u32, u32), &str> = HashMap::new();
    for t in raw {
        if let Some(first) = seen.insert((t.core, t.prio), &t.name) {
            violations.push(Violation::DuplicatePriorityOnCore {
                core: t.core,
                prio: t.prio,
                first: first.to_string(),
                second: t.name.clone(),
            });
        }
    }

    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }

    let tasks = raw
        .iter()
        .enumerate()
        .map(|(i, t)| TaskSpec {
            id: TaskId(i as u32),
            name: t.name.clone(),
            activation: match &t.activation {
                RawActivation::Periodic { period, offset } => {
                    ActivationPattern::Periodic { period: *period, offset: *offset }
                }
                RawActivation::Chained { predecessor } => ActivationPattern::Chained {
                    predecessor: TaskId(by_name[predecessor.as_str()] as u32),
                },
                RawActivation::Bounded { dt_min, dt_max } => {
                    ActivationPattern::Bounded { dt_min: *dt_min, dt_max: *dt_max }
                }
                RawActivation::Sporadic { dt_min } => {
                    ActivationPattern::Sporadic { dt_min: *dt_min }
                }
            },
            prio: t.prio,
            core: t.core,
            preemptable: t.preemptable,
            deadline: t.deadline,
            bcet: t.bcet,
            wcet: t.wcet,
            wcrt: t.wcrt,
            comm: t.comm,
        })
        .collect();

    Ok(SystemModel { tasks, num_cores })
}

fn check_bounds(t: &RawTask, num_cores: u32, violations: &mut Vec<Violation>) {
    let mut bad = |rule: String| {
        violations.push(Violation::BadBounds { task: t.name.clone(), rule });
    };

    match &t.activation {
        RawActivation::Periodic { period, .. } if *period == 0 => {
            bad("period must be > 0".into())
        }
        RawActivation::Bounded { dt_min, dt_max } => {
            if *dt_min == 0 {
                bad("dt_min must be > 0".into());
            }
            if dt_min > dt_max {
                bad(format!("dt_min ({dt_min}) > dt_max ({dt_max})"));
            }
        }
        RawActivation::Sporadic { dt_min } if *dt_min == 0 => {
            bad("dt_min must be > 0".into())
        }
        _ => {}
    }

    if t.deadline == 0 {
        bad("deadline must be > 0".into());
    }
    if t.bcet > t.deadline {
        bad(format!("bcet ({}) > deadline ({})", t.bcet, t.deadline));
    }
    if let Some(wcet) = t.wcet {
        if wcet < t.bcet {
            bad(format!("wcet ({wcet}) < bcet ({})", t.bcet));
        }
        if wcet > t.deadline {
            bad(format!("wcet ({wcet}) > deadline ({})", t.deadline));
        }
    }
    if let Some(wcrt) = t.wcrt {
        if wcrt < t.bcet {
            bad(format!("wcrt ({wcrt}) < bcet ({})", t.bcet));
        }
    }
    if t.core >= num_cores && num_cores > 0 {
        bad(format!("core index {} out of range (num_cores = {num_cores})", t.core));
    }
}

fn find_chained_cycles(
    raw: &[RawTask],
    by_name: &HashMap<&str, usize>,
    violations: &mut Vec<Violation>,
) {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; raw.len()];
    for start in 0..raw.len() {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if state[cur] == 1 {
                // Found a cycle; report the tasks on it once.
                let pos = path.iter().position(|&p| p == cur).unwrap();
                let cycle: Vec<String> =
                    path[pos..].iter().map(|&p| raw[p].name.clone()).collect();
                violations.push(Violation::ChainedCycle { cycle });
                break;
            }
            if state[cur] == 2 {
                break;
            }
            state[cur] = 1;
            path.push(cur);
            let next = match &raw[cur].activation {
                RawActivation::Chained { predecessor } => {
                    by_name.get(predecessor.as_str()).copied().filter(|&p| p != cur)
                }
                _ => None,
            };
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        for &p in &path {
            state[p] = 2;
        }
    }
}

/// Validate a chain given as a list of task names.
pub fn validate_chain(
    system: &SystemModel,
    names: &[impl AsRef<str>],
) -> Result<Chain, ValidationError> {
    let mut violations = Vec::new();
    let mut tasks = Vec::with_capacity(names.len());

    if names.is_empty() {
        violations.push(Violation::BadBounds {
            task: "<chain>".into(),
            rule: "chain must contain at least one task".into(),
        });
    }

    for (pos, name) in names.iter().enumerate() {
        let name = name.as_ref();
        match system.task_by_name(name) {
            None => violations.push(Violation::UnknownTask { name: name.to_string() }),
            Some(id) => {
                if pos > 0 && system.task(id).activation.is_sporadic() {
                    violations.push(Violation::SporadicNotFirst {
                        task: name.to_string(),
                        position: pos + 1,
                    });
                }
                tasks.push(id);
            }
        }
    }

    if violations.is_empty() {
        Ok(Chain { tasks })
    } else {
        Err(ValidationError { violations })
    }
}
