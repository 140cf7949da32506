use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::corpus::InstanceSet;

/// Bias probes that replace every feature with a single nuisance signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeKind {
    /// The form day alone.
    DateOnly,
    /// One-hot user identity over the users in the set.
    UserIdOnly,
}

pub fn make_probe_features(xs: &InstanceSet, kind: ProbeKind) -> Result<InstanceSet, LearnerError> {
    if xs.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let rows = match kind {
        ProbeKind::DateOnly => xs.instances().iter().map(|i| vec![i.form_day as f64]).collect(),
        ProbeKind::UserIdOnly => {
            let users = xs.users();
            xs.instances()
                .iter()
                .map(|i| {
                    let pos = users.binary_search(&i.user).expect("user is in the set");
                    let mut row = vec![0.0; users.len()];
                    row[pos] = 1.0;
                    row
                })
                .collect()
        }
    };
    Ok(xs.with_features(rows, Vec::new()).expect("one row per instance"))
}
