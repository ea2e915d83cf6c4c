use crate::error::Result;
use crate::lander::{Action, OBS_DIM};
use crate::nn::NetworkParams;

/// Anything that maps an observation to an action.
pub trait Policy {
    fn act(&mut self, obs: &[f64; OBS_DIM]) -> Result<Action>;
}

impl<F> Policy for F
where
    F: FnMut(&[f64; OBS_DIM]) -> Action,
{
    fn act(&mut self, obs: &[f64; OBS_DIM]) -> Result<Action> {
        Ok(self(obs))
    }
}

/// Deterministic actor network, output clamped to the action box.
impl Policy for NetworkParams {
    fn act(&mut self, obs: &[f64; OBS_DIM]) -> Result<Action> {
        let out = self.forward(obs)?;
        Ok(Action::from_slice(&out)?.clamped())
    }
}
