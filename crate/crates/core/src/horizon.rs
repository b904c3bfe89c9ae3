//! Analysis window computation: the relevant-task closure, the window
//! length that makes the constraint system sound, and per-task instance
//! counts covering that window.
//!
//! The window is `[0, T]` with `T = O + LCM + UB`: a lead-in `O` long
//! enough that every relevant task can have run at least once before the
//! hyper period starts, one full hyper period `LCM` of the relevant
//! periodic tasks (a worst-case chain occurrence starts somewhere in it),
//! and a trivial bound `UB` on the chain's span so the occurrence fits.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{ActivationPattern, Chain, Micros, SystemModel, TaskId};

/// Analysis window metadata and per-task instance counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Horizon {
    /// Window length `T = lead_in + hyper_period + chain_bound`.
    pub window: Micros,
    /// Lead-in offset `O = max(lead-in of periodic tasks, lead-in of bounded tasks)`.
    pub lead_in: Micros,
    /// LCM of the periods of the relevant periodic tasks (1 if none).
    pub hyper_period: Micros,
    /// Trivial upper bound on the chain span, deadlines (or tighter WCRTs)
    /// summed over chain positions plus the first-task re-sampling gap.
    pub chain_bound: Micros,
    /// Number of instances of each relevant task within `[0, window]`.
    pub instance_counts: BTreeMap<TaskId, u32>,
}

impl Horizon {
    pub fn instances(&self, task: TaskId) -> u32 {
        self.instance_counts.get(&task).copied().unwrap_or(0)
    }

    pub fn relevant(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.instance_counts.keys().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HorizonError {
    #[error("HorizonOverflow: analysis window exceeds the integer time range")]
    Overflow,
}

/// Smallest set of tasks that can influence the chain's latency, closed
/// under four rules: chain membership, higher-priority same-core tasks,
/// non-preemptable same-core tasks, and chained-activation predecessors.
pub fn relevant_tasks(system: &SystemModel, chain: &Chain) -> BTreeSet<TaskId> {
    let mut relevant: BTreeSet<TaskId> = chain.tasks().iter().copied().collect();

    loop {
        let mut added = false;
        for t in system.tasks() {
            if relevant.contains(&t.id) {
                continue;
            }
            let influences = relevant.iter().any(|&r| {
                let r = system.task(r);
                let same_core = r.core == t.core;
                (same_core && t.prio > r.prio) || (same_core && !t.preemptable)
            });
            if influences {
                relevant.insert(t.id);
                added = true;
                continue;
            }
            let activates_relevant = relevant.iter().any(|&r| {
                system.task(r).activation.predecessor() == Some(t.id)
            });
            if activates_relevant {
                relevant.insert(t.id);
                added = true;
            }
        }
        if !added {
            return relevant;
        }
    }
}

/// Maximum temporal gap between two consecutive activations of a task,
/// added to the chain latency so the bound holds from an arbitrary
/// stimulus arrival, not just from the sampled activation.
///
/// Sporadic tasks have no finite gap; the latency of a sporadic-first
/// chain is measured from the activation instead (gap 0). For a chained
/// task the gap follows its predecessor's finish jitter.
pub fn resample_gap(system: &SystemModel, task: TaskId) -> Micros {
    let t = system.task(task);
    match t.activation {
        ActivationPattern::Periodic { period, .. } => period,
        ActivationPattern::Bounded { dt_max, .. } => dt_max,
        ActivationPattern::Sporadic { .. } => 0,
        ActivationPattern::Chained { predecessor } => {
            let p = system.task(predecessor);
            resample_gap(system, predecessor) + (p.deadline - p.bcet)
        }
    }
}

/// Compute the analysis window for a chain over the given relevant set.
pub fn compute_horizon(
    system: &SystemModel,
    chain: &Chain,
    relevant: &BTreeSet<TaskId>,
) -> Result<Horizon, HorizonError> {
    compute_horizon_extended(system, chain, relevant, 0)
}

/// Like [`compute_horizon`], with the hyper-period segment (and the
/// first-activation window derived from it) lengthened by `extension`.
/// Solving with an extension of one hyper period must not change the
/// optimum; the shift-invariance tests rely on this hook.
pub fn compute_horizon_extended(
    system: &SystemModel,
    chain: &Chain,
    relevant: &BTreeSet<TaskId>,
    extension: Micros,
) -> Result<Horizon, HorizonError> {
    let mut lcm: Micros = 1;
    let mut lead_periodic: Micros = 0;
    let mut lead_bounded: Micros = 0;

    for &id in relevant {
        match system.task(id).activation {
            ActivationPattern::Periodic { period, offset } => {
                lcm = checked_lcm(lcm, period).ok_or(HorizonError::Overflow)?;
                let lead = offset.checked_add(period).ok_or(HorizonError::Overflow)?;
                lead_periodic = lead_periodic.max(lead);
            }
            ActivationPattern::Bounded { dt_max, .. } => {
                lead_bounded = lead_bounded.max(dt_max);
            }
            // Sporadic tasks contribute no lead-in; their first activation
            // is constrained to the window directly. Chained tasks follow
            // their predecessors.
            _ => {}
        }
    }

    let lead_in = lead_periodic.max(lead_bounded);

    let mut chain_bound: Micros = resample_gap(system, chain.first());
    for &id in chain.tasks() {
        let t = system.task(id);
        let step = t.wcrt.unwrap_or(t.deadline);
        chain_bound = chain_bound.checked_add(step).ok_or(HorizonError::Overflow)?;
    }

    let window = lead_in
        .checked_add(lcm)
        .and_then(|v| v.checked_add(extension))
        .and_then(|v| v.checked_add(chain_bound))
        .ok_or(HorizonError::Overflow)?;
    if window > i64::MAX as u64 / 4 {
        return Err(HorizonError::Overflow);
    }

    let instance_counts = compute_instance_counts(system, relevant, window);

    Ok(Horizon {
        window,
        lead_in,
        hyper_period: lcm,
        chain_bound: chain_bound + extension,
        instance_counts,
    })
}

/// Number of instances of each relevant task needed to cover all
/// activations its pattern prescribes within `[0, window]`.
pub fn compute_instance_counts(
    system: &SystemModel,
    relevant: &BTreeSet<TaskId>,
    window: Micros,
) -> BTreeMap<TaskId, u32> {
    let mut counts: BTreeMap<TaskId, u32> = BTreeMap::new();

    // Chained tasks mirror their predecessors; resolve those after the rest.
    let mut chained: Vec<TaskId> = Vec::new();
    for &id in relevant {
        match system.task(id).activation {
            ActivationPattern::Periodic { period, offset } => {
                let m = if offset > window { 0 } else { (window - offset) / period + 1 };
                counts.insert(id, m as u32);
            }
            ActivationPattern::Bounded { dt_min, .. }
            | ActivationPattern::Sporadic { dt_min } => {
                counts.insert(id, (window / dt_min + 1) as u32);
            }
            ActivationPattern::Chained { .. } => chained.push(id),
        }
    }

    while !chained.is_empty() {
        let before = chained.len();
        chained.retain(|&id| {
            let pred = system.task(id).activation.predecessor().unwrap();
            match counts.get(&pred) {
                Some(&m) => {
                    counts.insert(id, m);
                    false
                }
                None => true,
            }
        });
        // The relevant-task closure includes predecessors of relevant
        // chained tasks, so this always makes progress.
        assert!(chained.len() < before, "chained predecessor not in relevant set");
    }

    counts
}

fn gcd(a: Micros, b: Micros) -> Micros {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn checked_lcm(a: Micros, b: Micros) -> Option<Micros> {
    (a / gcd(a, b)).checked_mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_chain, validate_system, CommParadigm, RawActivation, RawTask};

    fn task(name: &str, activation: RawActivation, prio: u32, core: u32, deadline: Micros) -> RawTask {
        RawTask {
            name: name.into(),
            activation,
            prio,
            core,
            preemptable: true,
            deadline,
            bcet: 0,
            wcet: None,
            wcrt: None,
            comm: CommParadigm::Implicit,
        }
    }

    fn periodic(name: &str, period: Micros, prio: u32, core: u32, deadline: Micros) -> RawTask {
        task(name, RawActivation::Periodic { period, offset: 0 }, prio, core, deadline)
    }

    #[test]
    fn two_task_window() {
        let sys = validate_system(
            &[periodic("a", 10, 2, 0), periodic("b", 5, 1, 0)],
            1,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a", "b"]).unwrap();
        let relevant = relevant_tasks(&sys, &chain);
        let h = compute_horizon(&sys, &chain, &relevant).unwrap();
        assert_eq!(h.hyper_period, 10);
        assert_eq!(h.lead_in, 10);
        assert_eq!(h.chain_bound, 25); // 10 + 5 deadlines + 10 gap
        assert_eq!(h.window, 45);
        let a = sys.task_by_name("a").unwrap();
        let b = sys.task_by_name("b").unwrap();
        assert_eq!(h.instances(a), 5); // 0,10,20,30,40
        assert_eq!(h.instances(b), 10); // 0,5,...,45
    }

    #[test]
    fn single_task_window() {
        let sys = validate_system(&[periodic("a", 10, 1, 0)], 1).unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let relevant = relevant_tasks(&sys, &chain);
        let h = compute_horizon(&sys, &chain, &relevant).unwrap();
        assert_eq!(h.hyper_period, 10);
        assert_eq!(h.lead_in, 10);
        assert_eq!(h.chain_bound, 20);
        assert_eq!(h.window, 40);
        assert_eq!(h.instances(sys.task_by_name("a").unwrap()), 5);
    }

    #[test]
    fn bounded_task_contributes_lead_in() {
        let sys = validate_system(
            &[
                periodic("a", 10, 2, 0, /* deadline */ 10),
                task("s", RawActivation::Bounded { dt_min: 5, dt_max: 20 }, 3, 0, 5),
            ],
            1,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let relevant = relevant_tasks(&sys, &chain);
        assert!(relevant.contains(&sys.task_by_name("s").unwrap())); // higher prio, same core
        let h = compute_horizon(&sys, &chain, &relevant).unwrap();
        assert_eq!(h.lead_in, 20); // dt_max dominates offset+period = 10
    }

    fn periodic_short(name: &str, period: Micros, prio: u32, core: u32) -> RawTask {
        periodic(name, period, prio, core, period)
    }

    #[test]
    fn closure_rules() {
        // Chain covers all tasks -> everything relevant.
        let sys = validate_system(
            &[periodic_short("a", 10, 2, 0), periodic_short("b", 5, 1, 0)],
            1,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a", "b"]).unwrap();
        assert_eq!(relevant_tasks(&sys, &chain).len(), 2);

        // Lower-priority preemptable off-chain task is not relevant.
        let sys = validate_system(
            &[periodic_short("a", 10, 2, 0), periodic_short("low", 5, 1, 0)],
            1,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let rel = relevant_tasks(&sys, &chain);
        assert!(!rel.contains(&sys.task_by_name("low").unwrap()));

        // Non-preemptable same-core task is relevant even at lower priority.
        let mut np = periodic_short("np", 5, 1, 0);
        np.preemptable = false;
        let sys = validate_system(&[periodic_short("a", 10, 2, 0), np], 1).unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let rel = relevant_tasks(&sys, &chain);
        assert!(rel.contains(&sys.task_by_name("np").unwrap()));

        // Predecessors of relevant chained tasks are relevant; the closure
        // then pulls in what influences them.
        let sys = validate_system(
            &[
                periodic_short("root", 10, 1, 0),
                task("c", RawActivation::Chained { predecessor: "root".into() }, 5, 1, 10),
                periodic_short("hp_on_root_core", 10000, 9, 0),
            ],
            2,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["c"]).unwrap();
        let rel = relevant_tasks(&sys, &chain);
        assert!(rel.contains(&sys.task_by_name("root").unwrap()));
        assert!(rel.contains(&sys.task_by_name("hp_on_root_core").unwrap()));
    }

    #[test]
    fn instance_counts() {
        let sys = validate_system(
            &[
                periodic_short("p", 10, 3, 0),
                task("s", RawActivation::Sporadic { dt_min: 7 }, 2, 0, 7),
                task("c", RawActivation::Chained { predecessor: "p".into() }, 1, 0, 10),
            ],
            1,
        )
        .unwrap();
        let all = sys.ids().collect();
        let counts = compute_instance_counts(&sys, &all, 40);
        assert_eq!(counts[&sys.task_by_name("p").unwrap()], 5);
        assert_eq!(counts[&sys.task_by_name("s").unwrap()], 6); // floor(40/7)+1
        assert_eq!(counts[&sys.task_by_name("c").unwrap()], 5); // mirrors p
    }

    #[test]
    fn enlarging_relevant_set_never_shrinks_window() {
        let sys = validate_system(
            &[periodic_short("a", 10, 2, 0), periodic_short("z", 160, 1, 1)],
            2,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let pruned = relevant_tasks(&sys, &chain);
        let all = sys.ids().collect();
        let h0 = compute_horizon(&sys, &chain, &pruned).unwrap();
        let h1 = compute_horizon(&sys, &chain, &all).unwrap();
        assert!(h1.window >= h0.window);
    }

    #[test]
    fn overflow_is_reported() {
        let sys = validate_system(
            &[
                periodic_short("a", u64::MAX / 2, 2, 0),
                periodic_short("b", u64::MAX / 3, 1, 0),
            ],
            1,
        )
        .unwrap();
        let chain = validate_chain(&sys, &["a"]).unwrap();
        let relevant = relevant_tasks(&sys, &chain);
        assert_eq!(
            compute_horizon(&sys, &chain, &relevant),
            Err(HorizonError::Overflow)
        );
    }

    #[test]
    fn chained_gap_follows_predecessor() {
        let mut root = periodic_short("root", 10, 1, 0);
        root.bcet = 2;
        root.deadline = 6;
        let sys = validate_system(
            &[
                root,
                task("c", RawActivation::Chained { predecessor: "root".into() }, 2, 1, 10),
            ],
            2,
        )
        .unwrap();
        // gap(root) = 10, finish jitter = deadline - bcet = 4.
        assert_eq!(resample_gap(&sys, sys.task_by_name("c").unwrap()), 14);
    }
}
