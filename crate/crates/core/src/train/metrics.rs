//! Displacement metrics over equally long trajectories.
//!
//! RMSE treats each actor's error at a step as the squared euclidean norm of
//! its position error, so a constant `(3, 4)` offset yields exactly 5 for all
//! three metrics.

use super::{Result, TrainError};

/// Positions in meters, one per future step.
pub type Trajectory = Vec<[f64; 2]>;

fn check(preds: &[Trajectory], truths: &[Trajectory]) -> Result<usize> {
    if preds.is_empty() {
        return Err(TrainError::Argument("no actors to score".into()));
    }
    if preds.len() != truths.len() {
        return Err(TrainError::Argument(format!("{} predictions for {} ground truths", preds.len(), truths.len())));
    }
    let k = truths[0].len();
    if k == 0 {
        return Err(TrainError::Argument("empty trajectories".into()));
    }
    if preds.iter().chain(truths).any(|t| t.len() != k) {
        return Err(TrainError::Argument(format!("every trajectory must have {k} steps")));
    }
    Ok(k)
}

fn err(p: [f64; 2], t: [f64; 2]) -> f64 {
    (p[0] - t[0]).hypot(p[1] - t[1])
}

/// Mean euclidean error over actors and steps.
pub fn ade(preds: &[Trajectory], truths: &[Trajectory]) -> Result<f64> {
    let k = check(preds, truths)?;
    let total: f64 = preds.iter().zip(truths).flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| err(*a, *b))).sum();
    Ok(total / (preds.len() * k) as f64)
}

/// Mean euclidean error at the last step.
pub fn fde(preds: &[Trajectory], truths: &[Trajectory]) -> Result<f64> {
    let k = check(preds, truths)?;
    rmse_like(preds, truths, k, false)
}

/// Root of the mean squared euclidean error over actors at 1-based `step`.
pub fn rmse_at(preds: &[Trajectory], truths: &[Trajectory], step: usize) -> Result<f64> {
    let k = check(preds, truths)?;
    if step == 0 || step > k {
        return Err(TrainError::Argument(format!("step {step} outside 1..={k}")));
    }
    rmse_like(preds, truths, step, true)
}

fn rmse_like(preds: &[Trajectory], truths: &[Trajectory], step: usize, squared: bool) -> Result<f64> {
    let n = preds.len() as f64;
    let vals = preds.iter().zip(truths).map(|(p, t)| err(p[step - 1], t[step - 1]));
    Ok(if squared { (vals.map(|e| e * e).sum::<f64>() / n).sqrt() } else { vals.sum::<f64>() / n })
}

/// Number of steps in one second at sampling period `dt`.
pub fn steps_per_second(dt: f64) -> usize {
    ((1.0 / dt).round() as usize).max(1)
}

/// RMSE at every whole second that fits in the trajectories.
pub fn rmse_per_second(preds: &[Trajectory], truths: &[Trajectory], dt: f64) -> Result<Vec<f64>> {
    let k = check(preds, truths)?;
    let s = steps_per_second(dt);
    (1..=k / s).map(|sec| rmse_at(preds, truths, sec * s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_offset_and_small_cases() {
        let truth = vec![vec![[0.0, 0.0], [1.0, 1.0]]];
        let pred = vec![vec![[3.0, 4.0], [4.0, 5.0]]];
        assert_eq!(ade(&pred, &truth).unwrap(), 5.0);
        assert_eq!(fde(&pred, &truth).unwrap(), 5.0);
        assert_eq!(rmse_at(&pred, &truth, 2).unwrap(), 5.0);

        let pred = vec![vec![[1.0, 0.0], [1.0, 3.0]]];
        assert_eq!(ade(&pred, &truth).unwrap(), 1.5);
        assert_eq!(fde(&pred, &truth).unwrap(), 2.0);
    }

    #[test]
    fn shape_errors() {
        let t = vec![vec![[0.0, 0.0]]];
        assert!(ade(&[], &[]).is_err());
        assert!(ade(&t, &[]).is_err());
        assert!(ade(&[vec![[0.0, 0.0], [0.0, 0.0]]], &t).is_err());
        assert!(rmse_at(&t, &t, 2).is_err());
        assert!(rmse_at(&t, &t, 0).is_err());
    }

    #[test]
    fn per_second_steps() {
        let t: Vec<Trajectory> = vec![(0..25).map(|k| [k as f64, 0.0]).collect()];
        let p: Vec<Trajectory> = vec![(0..25).map(|k| [k as f64, k as f64]).collect()];
        let r = rmse_per_second(&p, &t, 0.2).unwrap();
        assert_eq!(r, vec![4.0, 9.0, 14.0, 19.0, 24.0]);
    }
}
