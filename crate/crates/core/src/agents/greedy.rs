use crate::env::{Env, JointAction, SubActionKind};
use crate::error::Result;
use crate::scenario::Move;

/// One pass of coordinate ascent: for each coordinate in order, try every
/// value with the others held fixed and keep the best. A candidate replaces
/// the incumbent only if strictly better, so ties go to the lowest index.
pub fn coordinate_ascent<F>(sizes: &[usize], start: Vec<usize>, mut score: F) -> Result<Vec<usize>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let mut x = start;
    for (c, &n) in sizes.iter().enumerate() {
        let mut best = (0, f64::NEG_INFINITY);
        for v in 0..n {
            x[c] = v;
            let s = score(&x)?;
            if s > best.1 {
                best = (v, s);
            }
        }
        x[c] = best.0;
    }
    Ok(x)
}

/// Immediate-reward coordinate ascent with fading pinned to 0 dB, starting
/// from "everyone hovers, selections unchanged". Visits the BS move, UE
/// moves, resolutions, then powers.
pub fn greedy_act(env: &Env) -> Result<JointAction> {
    let subs = env.enumerate_subactions();
    let sizes: Vec<usize> = subs.iter().map(|&(_, n)| n).collect();
    let hold = env.hold_action();
    let start: Vec<usize> = subs.iter().map(|&(kind, _)| get_choice(&hold, kind)).collect();
    let mut action = hold;
    let best = coordinate_ascent(&sizes, start, |x| {
        for (&(kind, _), &v) in subs.iter().zip(x) {
            set_choice(&mut action, kind, v);
        }
        env.preview_reward(&action)
    })?;
    for (&(kind, _), &v) in subs.iter().zip(&best) {
        set_choice(&mut action, kind, v);
    }
    Ok(action)
}

pub(crate) fn get_choice(action: &JointAction, kind: SubActionKind) -> usize {
    match kind {
        SubActionKind::BsMove => action.bs_move.index(),
        SubActionKind::UeMove { slot } => action.ue_moves[slot].index(),
        SubActionKind::Resolution { area } => action.area_resolutions[area],
        SubActionKind::Power { slot } => action.ue_power_levels[slot],
    }
}

pub(crate) fn set_choice(action: &mut JointAction, kind: SubActionKind, choice: usize) {
    match kind {
        SubActionKind::BsMove => action.bs_move = Move::ALL[choice],
        SubActionKind::UeMove { slot } => action.ue_moves[slot] = Move::ALL[choice],
        SubActionKind::Resolution { area } => action.area_resolutions[area] = choice,
        SubActionKind::Power { slot } => action.ue_power_levels[slot] = choice,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_maximum_is_found() {
        let values = [0.3, 1.7, -2.0, 0.9];
        let x = coordinate_ascent(&[4], vec![0], |x| Ok(values[x[0]])).unwrap();
        assert_eq!(x, vec![1]);
    }

    #[test]
    fn ties_pick_index_zero() {
        let x = coordinate_ascent(&[7, 6, 3], vec![3, 2, 1], |_| Ok(1.0)).unwrap();
        assert_eq!(x, vec![0, 0, 0]);
    }

    #[test]
    fn separable_objective_matches_brute_force() {
        let f = |x: &[usize]| -((x[0] as f64 - 4.0).powi(2)) - (x[1] as f64 - 1.0).abs() + x[2] as f64;
        let x = coordinate_ascent(&[7, 6, 3], vec![0, 0, 0], |x| Ok(f(x))).unwrap();
        assert_eq!(x, vec![4, 1, 2]);
    }
}
