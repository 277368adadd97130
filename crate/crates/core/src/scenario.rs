//! A deployment: array, users, channel constants and per-user task budgets.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{ArrayGeometry, ChannelParams, UserGeometry};
use crate::resource::UserTaskParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    #[serde(skip)]
    pub array: ArrayGeometry,
    pub channel: ChannelParams,
    #[serde(skip)]
    pub users: Vec<UserGeometry>,
    pub tasks: Vec<UserTaskParams>,
    pub seed: u64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.array.is_empty() {
            return Err(invalid("array has no antennas"));
        }
        if self.users.is_empty() {
            return Err(invalid("scenario has no users"));
        }
        if self.tasks.len() != self.users.len() {
            return Err(invalid(format!(
                "{} users but {} task parameter sets",
                self.users.len(),
                self.tasks.len()
            )));
        }
        for t in &self.tasks {
            t.validate()?;
        }
        let frame = self.tasks[0].frame;
        if self.tasks.iter().any(|t| t.frame != frame) {
            return Err(invalid("all users must share one frame length"));
        }
        Ok(())
    }
}
