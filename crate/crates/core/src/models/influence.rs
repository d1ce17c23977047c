//! Joint influence of a set of active neighbours and its incremental updates.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum InfluenceError {
    #[error("cannot remove the influence of a certain activator (p = 1)")]
    CertainInfluence,
}

/// `1 - prod(1 - p)` over `ps`; zero for an empty set.
pub fn joint_influence<S: Scalar>(ps: impl IntoIterator<Item = S>) -> S {
    S::one() - ps.into_iter().fold(S::one(), |acc, p| acc * (S::one() - p))
}

/// Joint influence once the neighbour with probability `p` leaves the set.
pub fn remove_influence<S: Scalar>(p_set: S, p: S) -> Result<S, InfluenceError> {
    if p >= S::one() {
        return Err(InfluenceError::CertainInfluence);
    }
    Ok(((p_set - p) / (S::one() - p)).max(S::zero()))
}

/// Joint influence once a neighbour with probability `p` joins the set.
pub fn add_influence<S: Scalar>(p_set: S, p: S) -> S {
    p_set + (S::one() - p_set) * p
}

/// Swaps one neighbour's probability `p_old` for `p_new` in a single update.
pub fn replace_influence<S: Scalar>(p_set: S, p_old: S, p_new: S) -> Result<S, InfluenceError> {
    if p_old >= S::one() {
        return Err(InfluenceError::CertainInfluence);
    }
    let one = S::one();
    Ok((((p_set - p_old) / (one - p_old)).max(S::zero()) * (one - p_new) + p_new).min(one))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn joint_examples() {
        assert_eq!(joint_influence::<f64>([]), 0.0);
        assert_eq!(joint_influence([1.0, 0.37]), 1.0);
        assert!(close(joint_influence([0.5, 0.5]), 0.75));
        assert!(close(joint_influence([0.3f64, 0.4]), 0.58));
    }

    #[test]
    fn remove_examples() {
        assert!(close(remove_influence(0.75, 0.5).unwrap(), 0.5));
        assert_eq!(remove_influence(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(remove_influence(0.5, 1.0), Err(InfluenceError::CertainInfluence));
    }

    #[test]
    fn add_examples() {
        assert!(close(add_influence(0.0, 0.4), 0.4));
        assert!(close(add_influence(0.5, 0.5), 0.75));
        assert_eq!(add_influence(0.42, 0.0), 0.42);
    }

    #[test]
    fn replace_examples() {
        assert!(close(replace_influence(0.75, 0.5, 0.2).unwrap(), 0.6));
        assert!(close(replace_influence(0.75, 0.5, 0.5).unwrap(), 0.75));
        assert!(close(replace_influence(0.3, 0.3, 0.9).unwrap(), 0.9));
        assert!(replace_influence(0.9, 1.0, 0.1).is_err());
    }

    #[test]
    fn single_precision() {
        let j: f32 = joint_influence([0.5f32, 0.5]);
        assert!((j - 0.75).abs() < 1e-6);
        assert!((replace_influence(0.75f32, 0.5, 0.2).unwrap() - 0.6).abs() < 1e-6);
    }
}
