use super::{fz_threshold, PickError, PickParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickState {
    Home,
    Approach,
    Grasp,
    CheckClosure,
    Lift,
    StaticCheck,
    Disentangle,
    Retain,
    Abort,
}

impl PickState {
    pub const ALL: [PickState; 9] = [
        PickState::Home,
        PickState::Approach,
        PickState::Grasp,
        PickState::CheckClosure,
        PickState::Lift,
        PickState::StaticCheck,
        PickState::Disentangle,
        PickState::Retain,
        PickState::Abort,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, PickState::Retain | PickState::Abort)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event", content = "value")]
pub enum PickEvent {
    PoseAvailable,
    NoPose,
    ReachedPose,
    GripperClosed,
    /// Measured jaw separation, meters.
    ClosureWidth(f64),
    Lifted,
    /// Static vertical force, newtons.
    ForceZ(f64),
    PrimitiveDone,
}

impl PickEvent {
    fn name(&self) -> String {
        format!("{self:?}")
    }
}

/// The pick state machine with its retry counters.
///
/// Transitions:
///
/// | state        | event            | next                                        |
/// |--------------|------------------|---------------------------------------------|
/// | Home         | PoseAvailable    | Approach                                    |
/// | Home         | NoPose           | Home, or Abort once grasp attempts run out  |
/// | Approach     | ReachedPose      | Grasp                                       |
/// | Grasp        | GripperClosed    | CheckClosure                                |
/// | CheckClosure | ClosureWidth(w)  | w < w_min: Home, or Abort when out of tries; else Lift |
/// | Lift         | Lifted           | StaticCheck                                 |
/// | StaticCheck  | ForceZ(f)        | f > T: Disentangle, or Abort when out of primitives; else Retain |
/// | Disentangle  | PrimitiveDone    | StaticCheck                                 |
///
/// Every other pair is a protocol error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickMachine {
    pub state: PickState,
    /// Failed grasp attempts so far (no pose or jaws fully closed).
    pub grasp_attempts: u32,
    /// Disentangling primitives executed.
    pub disentangles: u32,
    /// Times the static check found the load too heavy.
    pub detections: u32,
    pub params: PickParams,
    /// Jaws thinner than this count as fully closed, meters.
    pub w_min: f64,
    /// Force threshold, newtons.
    pub t_fz: f64,
}

impl PickMachine {
    pub fn new(params: PickParams, dlo_mass: f64, dlo_diameter: f64) -> Self {
        Self {
            state: PickState::Home,
            grasp_attempts: 0,
            disentangles: 0,
            detections: 0,
            params,
            w_min: params.w_min_ratio * dlo_diameter,
            t_fz: fz_threshold(dlo_mass, params.eta_fz),
        }
    }

    fn failed_attempt(&mut self) -> PickState {
        self.grasp_attempts += 1;
        if self.grasp_attempts >= self.params.max_grasp_attempts {
            PickState::Abort
        } else {
            PickState::Home
        }
    }

    pub fn step(&mut self, event: PickEvent) -> Result<PickState, PickError> {
        use PickEvent as E;
        use PickState as S;
        let next = match (self.state, event) {
            (S::Home, E::PoseAvailable) => S::Approach,
            (S::Home, E::NoPose) => self.failed_attempt(),
            (S::Approach, E::ReachedPose) => S::Grasp,
            (S::Grasp, E::GripperClosed) => S::CheckClosure,
            (S::CheckClosure, E::ClosureWidth(w)) => {
                if w < self.w_min {
                    self.failed_attempt()
                } else {
                    S::Lift
                }
            }
            (S::Lift, E::Lifted) => S::StaticCheck,
            (S::StaticCheck, E::ForceZ(f)) => {
                if f > self.t_fz {
                    self.detections += 1;
                    if self.disentangles < self.params.max_disentangle {
                        S::Disentangle
                    } else {
                        S::Abort
                    }
                } else {
                    S::Retain
                }
            }
            (S::Disentangle, E::PrimitiveDone) => {
                self.disentangles += 1;
                S::StaticCheck
            }
            (state, event) => {
                return Err(PickError::ProtocolError {
                    state,
                    event: event.name(),
                })
            }
        };
        self.state = next;
        Ok(next)
    }

    /// Upper bound on valid steps from `Home` to a terminal state.
    pub fn step_bound(&self) -> usize {
        let g = self.params.max_grasp_attempts as usize;
        let d = self.params.max_disentangle as usize;
        // each grasp attempt takes at most 4 steps, then lift, checks and primitives
        4 * g + 2 + 2 * d + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine() -> PickMachine {
        PickMachine::new(PickParams::default(), 0.13, 0.011)
    }

    fn drive(m: &mut PickMachine, events: &[PickEvent]) -> PickState {
        for e in events {
            m.step(*e).unwrap();
        }
        m.state
    }

    #[test]
    fn closed_jaws_replan_then_abort() {
        let mut m = machine();
        let attempt = [
            PickEvent::PoseAvailable,
            PickEvent::ReachedPose,
            PickEvent::GripperClosed,
            PickEvent::ClosureWidth(0.0),
        ];
        assert_eq!(drive(&mut m, &attempt), PickState::Home);
        assert_eq!(drive(&mut m, &attempt), PickState::Abort);
    }

    #[test]
    fn static_check_thresholds() {
        let mut m = machine();
        let to_check = [
            PickEvent::PoseAvailable,
            PickEvent::ReachedPose,
            PickEvent::GripperClosed,
            PickEvent::ClosureWidth(0.011),
            PickEvent::Lifted,
        ];
        drive(&mut m, &to_check);
        assert_eq!(
            m.step(PickEvent::ForceZ(2.55)).unwrap(),
            PickState::Disentangle
        );
        let mut m = machine();
        drive(&mut m, &to_check);
        assert_eq!(m.step(PickEvent::ForceZ(1.28)).unwrap(), PickState::Retain);
    }

    #[test]
    fn disentangle_budget_is_bounded() {
        let mut m = machine();
        drive(
            &mut m,
            &[
                PickEvent::PoseAvailable,
                PickEvent::ReachedPose,
                PickEvent::GripperClosed,
                PickEvent::ClosureWidth(0.011),
                PickEvent::Lifted,
            ],
        );
        for _ in 0..2 {
            assert_eq!(
                m.step(PickEvent::ForceZ(3.0)).unwrap(),
                PickState::Disentangle
            );
            assert_eq!(
                m.step(PickEvent::PrimitiveDone).unwrap(),
                PickState::StaticCheck
            );
        }
        assert_eq!(m.step(PickEvent::ForceZ(3.0)).unwrap(), PickState::Abort);
        assert_eq!(m.disentangles, 2);
        assert_eq!(m.detections, 3);
    }

    #[test]
    fn undocumented_pairs_are_protocol_errors() {
        let mut m = machine();
        assert!(matches!(
            m.step(PickEvent::Lifted),
            Err(PickError::ProtocolError { .. })
        ));
        assert_eq!(m.state, PickState::Home);
    }
}
