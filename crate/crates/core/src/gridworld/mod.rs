//! The Four-Room constrained gridworld.
//!
//! Features have dimension `C + 2`: one indicator per object class, then the
//! goal indicator, then the trap indicator. Every task shares this `phi`, so
//! reward and utility are exactly linear in it.

mod layout;

pub use layout::{
    Cell, GridLayout, GridObject, LayoutDocument, LayoutParts, Region, DEFAULT_LAYOUT, MAX_OBJECTS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{FeatureVector, TaskSpec};
use crate::env::{Environment, Event, Outcome};
use crate::error::{Error, Result};

pub const GOAL_REWARD: f64 = 2.0;
pub const TRAP_UTILITY: f64 = -0.1;
pub const N_ACTIONS: usize = 4;
/// Episode length used for truncation.
pub const DEFAULT_HORIZON: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::InvalidAction {
            action: index,
            n_actions: N_ACTIONS,
        })
    }
}

/// Agent cell plus the picked-object bit set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridState {
    pub cell: usize,
    pub picked: u64,
}

impl GridState {
    pub fn position(&self, layout: &GridLayout) -> Cell {
        layout.cell(self.cell)
    }

    pub fn is_picked(&self, object: usize) -> bool {
        self.picked >> object & 1 == 1
    }

    /// Picked flags, one per object of `layout`.
    pub fn picked_bits(&self, layout: &GridLayout) -> Vec<bool> {
        (0..layout.objects().len()).map(|k| self.is_picked(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: GridState,
    pub a: Action,
    pub s_next: GridState,
    pub r: f64,
    pub c: f64,
    pub phi: FeatureVector,
    pub done: bool,
    pub events: Vec<Event>,
}

pub fn feature_dim(layout: &GridLayout) -> usize {
    layout.n_classes() + 2
}

pub fn goal_index(layout: &GridLayout) -> usize {
    layout.n_classes()
}

pub fn trap_index(layout: &GridLayout) -> usize {
    layout.n_classes() + 1
}

/// Draws a task: one Uniform[-1, 1] weight per object class, goal reward 2,
/// utility -0.1 on the trap feature.
pub fn sample_task<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &GridLayout,
    threshold: f64,
    discount: f64,
    task_id: impl Into<String>,
) -> Result<TaskSpec> {
    let d = feature_dim(layout);
    let mut reward = vec![0.0; d];
    for w in reward.iter_mut().take(layout.n_classes()) {
        *w = rng.random_range(-1.0..=1.0);
    }
    reward[goal_index(layout)] = GOAL_REWARD;
    let mut cost = vec![0.0; d];
    cost[trap_index(layout)] = TRAP_UTILITY;
    TaskSpec::new(task_id, reward, cost, threshold, discount)
}

pub fn reset(layout: &GridLayout, _task: &TaskSpec) -> GridState {
    initial_state(layout)
}

fn initial_state(layout: &GridLayout) -> GridState {
    GridState {
        cell: layout.index(layout.start()),
        picked: 0,
    }
}

fn target_cell(layout: &GridLayout, from: usize, action: Action) -> usize {
    let cell = layout.cell(from);
    let (row, col) = (cell.row as isize, cell.col as isize);
    let (r, c) = match action {
        Action::Up => (row - 1, col),
        Action::Down => (row + 1, col),
        Action::Left => (row, col - 1),
        Action::Right => (row, col + 1),
    };
    if r < 0 || c < 0 || r >= layout.height() as isize || c >= layout.width() as isize {
        return from;
    }
    let to = layout.index(Cell::new(r as usize, c as usize));
    if layout.is_wall_index(to) {
        from
    } else {
        to
    }
}

/// Nominal indicator features of a legal transition, ignoring activation and
/// reward probabilities.
pub fn features(s: &GridState, _a: Action, s_next: &GridState, layout: &GridLayout) -> FeatureVector {
    let mut phi = FeatureVector::zeros(feature_dim(layout));
    let v = phi.as_mut_slice();
    if let Some(k) = layout.object_at_index(s_next.cell) {
        if !s.is_picked(k) {
            v[layout.objects()[k].class] = 1.0;
        }
    }
    if s_next.cell == layout.index(layout.goal()) {
        v[goal_index(layout)] = 1.0;
    }
    if layout.is_trap_index(s_next.cell) {
        v[trap_index(layout)] = 1.0;
    }
    phi
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    // no draw at p = 1 so deterministic layouts consume no randomness
    p >= 1.0 || rng.random::<f64>() < p
}

fn advance<R: Rng + ?Sized>(
    layout: &GridLayout,
    s: &GridState,
    action: Action,
    rng: &mut R,
) -> (GridState, FeatureVector, bool, Vec<Event>) {
    let to = target_cell(layout, s.cell, action);
    let mut next = GridState {
        cell: to,
        picked: s.picked,
    };
    let mut phi = FeatureVector::zeros(feature_dim(layout));
    let mut events = Vec::new();
    let v = phi.as_mut_slice();
    if let Some(k) = layout.object_at_index(to) {
        if !s.is_picked(k) {
            next.picked |= 1 << k;
            let obj = layout.objects()[k];
            if bernoulli(rng, layout.object_reward_prob()) {
                v[obj.class] = 1.0;
                events.push(Event::ObjectPicked {
                    class: obj.class,
                    unsafe_object: obj.unsafe_object,
                });
            }
        }
    }
    let done = to == layout.index(layout.goal());
    if done {
        v[goal_index(layout)] = 1.0;
        events.push(Event::GoalReached);
    }
    if layout.is_trap_index(to) && bernoulli(rng, layout.trap_activation_prob()) {
        v[trap_index(layout)] = 1.0;
        events.push(Event::TrapEntered);
    }
    (next, phi, done, events)
}

/// One environment step under `task`. `r` and `c` are computed from the same
/// `phi`, so `r = phi . w_r` and `c = phi . w_c` hold exactly.
pub fn step<R: Rng + ?Sized>(
    s: &GridState,
    action: usize,
    layout: &GridLayout,
    task: &TaskSpec,
    rng: &mut R,
) -> Result<Transition> {
    let a = Action::from_index(action)?;
    task.check_dim(feature_dim(layout))?;
    let (s_next, phi, done, events) = advance(layout, s, a, rng);
    let (r, c) = task.reward_and_cost(&phi)?;
    Ok(Transition {
        s: *s,
        a,
        s_next,
        r,
        c,
        phi,
        done,
        events,
    })
}

impl Environment for GridLayout {
    type State = GridState;

    fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    fn feature_dim(&self) -> usize {
        feature_dim(self)
    }

    fn initial_state(&self) -> GridState {
        initial_state(self)
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        state: &GridState,
        action: usize,
        rng: &mut R,
    ) -> Result<Outcome<GridState>> {
        let a = Action::from_index(action)?;
        let (next, phi, done, events) = advance(self, state, a, rng);
        Ok(Outcome {
            next,
            phi,
            done,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> GridLayout {
        GridLayout::default_four_room()
    }

    fn task(l: &GridLayout) -> TaskSpec {
        let t = TaskSpec::new(
            "t",
            vec![0.5, -0.25, 0.75, GOAL_REWARD, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, TRAP_UTILITY],
            -5e-6,
            0.95,
        )
        .unwrap();
        assert_eq!(t.dim(), feature_dim(l));
        t
    }

    fn at(l: &GridLayout, row: usize, col: usize, picked: u64) -> GridState {
        GridState {
            cell: l.index(Cell::new(row, col)),
            picked,
        }
    }

    #[test]
    fn sampled_tasks_have_fixed_goal_and_trap_weights() {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..50 {
            let t = sample_task(&mut rng, &l, -5e-6, 0.95, format!("{i}")).unwrap();
            assert_eq!(t.reward_weights()[3], 2.0);
            assert_eq!(t.reward_weights()[4], 0.0);
            assert_eq!(t.cost_weights(), &[0.0, 0.0, 0.0, 0.0, -0.1]);
            assert!(t.reward_weights()[..3].iter().all(|w| (-1.0..=1.0).contains(w)));
            assert_eq!(t.threshold(), -5e-6);
            assert_eq!(t.discount(), 0.95);
        }
    }

    #[test]
    fn fixed_seed_task_draw_is_reproducible() {
        let l = layout();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            sample_task(&mut rng, &l, 0.0, 0.95, "seven").unwrap().reward_weights()[..3].to_vec()
        };
        let first = draw();
        assert_eq!(first, draw());
        // recorded draw for seed 7
        let recorded = [-0.6844078059587613, -0.6640212744557976, 0.4085522560729129];
        for (a, b) in first.iter().zip(recorded) {
            assert_eq!(*a, b, "{first:?}");
        }
    }

    #[test]
    fn reset_places_agent_at_start_with_nothing_picked() {
        let l = layout();
        let t = task(&l);
        let s = reset(&l, &t);
        assert_eq!(s.position(&l), l.start());
        assert_eq!(s.picked_bits(&l), vec![false; 18]);
        assert_eq!(s, reset(&l, &t));
    }

    #[test]
    fn features_examples() {
        let l = layout();
        // (1, 2) holds a class-1 object; approach from (1, 1)
        let s = at(&l, 1, 1, 0);
        let k = l.objects().iter().position(|o| o.cell == Cell::new(1, 2)).unwrap();
        let s2 = at(&l, 1, 2, 1 << k);
        assert_eq!(features(&s, Action::Right, &s2, &l).as_slice(), &[0.0, 1.0, 0.0, 0.0, 0.0]);
        // already picked: no feature
        let s_p = at(&l, 1, 1, 1 << k);
        assert!(features(&s_p, Action::Right, &s2, &l).is_zero());
        let e = at(&l, 2, 2, 0);
        assert!(features(&s, Action::Down, &e, &l).is_zero());
        let g = at(&l, 12, 12, 0);
        let phi = features(&at(&l, 12, 11, 0), Action::Right, &g, &l);
        assert_eq!(phi.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(phi.dot(task(&l).reward_weights()).unwrap(), 2.0);
    }

    #[test]
    fn wall_moves_are_no_ops() {
        let l = layout();
        let t = task(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // (2, 5) -> right is the doorway; (3, 5) -> right is wall
        let s = at(&l, 3, 5, 0);
        let tr = step(&s, Action::Right as usize, &l, &t, &mut rng).unwrap();
        assert_eq!(tr.s_next, s);
        assert!(tr.phi.is_zero());
        assert_eq!((tr.r, tr.c), (0.0, 0.0));
        // grid boundary
        let s = at(&l, 0, 0, 0);
        let tr = step(&s, Action::Up as usize, &l, &t, &mut rng).unwrap();
        assert_eq!(tr.s_next, s);
    }

    #[test]
    fn trap_entry_costs_and_goal_terminates() {
        let l = layout();
        let t = task(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = step(&at(&l, 2, 8, 0), Action::Up as usize, &l, &t, &mut rng).unwrap();
        assert_eq!(tr.c, -0.1);
        assert!(tr.events.contains(&Event::TrapEntered));
        assert!(!tr.done);
        let tr = step(&at(&l, 11, 12, 0), Action::Down as usize, &l, &t, &mut rng).unwrap();
        assert!(tr.done);
        assert_eq!(tr.r, 2.0);
        assert!(tr.events.contains(&Event::GoalReached));
    }

    #[test]
    fn invalid_action_is_an_error() {
        let l = layout();
        let t = task(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(&l, &t);
        assert!(matches!(
            step(&s, 4, &l, &t, &mut rng),
            Err(Error::InvalidAction { action: 4, .. })
        ));
    }

    #[test]
    fn probabilistic_trap_activation_rate() {
        let l = layout().with_trap_activation_prob(0.05).unwrap();
        let t = task(&l);
        let mut rng = stream(&[42, 1]);
        let s = at(&l, 2, 8, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                step(&s, Action::Up as usize, &l, &t, &mut rng)
                    .unwrap()
                    .events
                    .contains(&Event::TrapEntered)
            })
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.05).abs() <= 0.005, "rate {rate}");
    }

    #[test]
    fn random_walk_invariants() {
        let l = layout().with_object_reward_prob(0.5).unwrap();
        let t = task(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = reset(&l, &t);
        for _ in 0..20_000 {
            let a = rng.random_range(0..N_ACTIONS);
            let tr = step(&s, a, &l, &t, &mut rng).unwrap();
            // bit-identical linear reward and cost
            assert_eq!(tr.r.to_bits(), tr.phi.dot(t.reward_weights()).unwrap().to_bits());
            assert_eq!(tr.c.to_bits(), tr.phi.dot(t.cost_weights()).unwrap().to_bits());
            // picked bits never clear
            assert_eq!(tr.s_next.picked & s.picked, s.picked);
            assert!(!l.is_wall(tr.s_next.position(&l)));
            s = if tr.done { reset(&l, &t) } else { tr.s_next };
        }
    }

    #[test]
    fn deterministic_when_probabilities_are_one() {
        let l = layout();
        let t = task(&l);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(999);
        let mut walk = ChaCha8Rng::seed_from_u64(5);
        let mut s = reset(&l, &t);
        for _ in 0..5_000 {
            let a = walk.random_range(0..N_ACTIONS);
            let x = step(&s, a, &l, &t, &mut r1).unwrap();
            let y = step(&s, a, &l, &t, &mut r2).unwrap();
            assert_eq!(x, y);
            s = if x.done { reset(&l, &t) } else { x.s_next };
        }
    }
}
