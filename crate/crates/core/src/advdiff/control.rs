//! Two-point instability detection and the step-size controller built on it.

use serde::Serialize;

use crate::grid::GridField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Pos,
    Neg,
    Zero,
}

fn sign(d: f64) -> Sign {
    if d > 0.0 {
        Sign::Pos
    } else if d < 0.0 {
        Sign::Neg
    } else {
        Sign::Zero
    }
}

fn alternates(d: [Sign; 4]) -> bool {
    use Sign::*;
    let any = |s: Sign| s != Zero;
    matches!(d, [Pos, Neg, Pos, x] | [Neg, Pos, Neg, x] if any(x))
        || matches!(d, [x, Pos, Neg, Pos] | [x, Neg, Pos, Neg] if any(x))
}

/// Positions `j` (0-based, `2 ≤ j ≤ n-3`) whose differences
/// `d1..d4 = φ_{j-1}-φ_{j-2}, …, φ_{j+2}-φ_{j+1}` alternate in one of the
/// four sign patterns. Exact zeros match neither sign.
pub fn detect_two_point_instabilities(line: &[f64]) -> usize {
    if line.len() < 5 {
        return 0;
    }
    let d: Vec<Sign> = line.windows(2).map(|w| sign(w[1] - w[0])).collect();
    (2..line.len() - 2).filter(|&j| alternates([d[j - 2], d[j - 1], d[j], d[j + 1]])).count()
}

/// Largest per-line count over the rows of `f`, and over its columns too
/// when `vertical` is set.
pub fn max_line_count(f: &GridField, vertical: bool) -> usize {
    let rows = (0..f.ny).map(|j| detect_two_point_instabilities(f.row(j))).max().unwrap_or(0);
    if !vertical {
        return rows;
    }
    let cols = (0..f.nx)
        .map(|i| {
            let col: Vec<f64> = (0..f.ny).map(|j| f.get(i, j)).collect();
            detect_two_point_instabilities(&col)
        })
        .max()
        .unwrap_or(0);
    rows.max(cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControllerState {
    pub dt: f64,
    pub hold_remaining: u32,
    pub quiet_streak: u32,
    pub osc_limit_fraction: f64,
    pub reduce_factor: f64,
    pub grow_factor: f64,
    pub dt_cap: f64,
    /// Updates frozen after a reduction.
    pub hold_steps: u32,
    /// Growth needs a streak longer than this.
    pub quiet_steps: u32,
    /// Counts at or below this keep a quiet streak alive.
    pub quiet_threshold: usize,
}

impl StepControllerState {
    pub fn new(dt: f64, dt_cap: f64) -> Self {
        Self {
            dt: dt.min(dt_cap),
            hold_remaining: 0,
            quiet_streak: 0,
            osc_limit_fraction: 0.1,
            reduce_factor: 2.0 / 3.0,
            grow_factor: 5.0 / 4.0,
            dt_cap,
            hold_steps: 15,
            quiet_steps: 50,
            quiet_threshold: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerAction {
    Held,
    Reduced,
    Grown,
    Unchanged,
}

/// One controller update after a step whose worst line showed `osc_count`
/// detections; the limit is `osc_limit_fraction · ny`.
pub fn controller_update(s: &StepControllerState, osc_count: usize, ny: usize) -> (StepControllerState, ControllerAction) {
    let mut n = *s;
    let action = if n.hold_remaining > 0 {
        n.hold_remaining -= 1;
        ControllerAction::Held
    } else if osc_count as f64 > n.osc_limit_fraction * ny as f64 {
        n.dt *= n.reduce_factor;
        n.hold_remaining = n.hold_steps;
        n.quiet_streak = 0;
        ControllerAction::Reduced
    } else {
        if osc_count <= n.quiet_threshold {
            n.quiet_streak += 1;
        } else {
            n.quiet_streak = 0;
        }
        if n.quiet_streak > n.quiet_steps {
            n.quiet_streak = 0;
            let grown = (n.dt * n.grow_factor).min(n.dt_cap);
            let changed = grown != n.dt;
            n.dt = grown;
            if changed {
                ControllerAction::Grown
            } else {
                ControllerAction::Unchanged
            }
        } else {
            ControllerAction::Unchanged
        }
    };
    n.dt = n.dt.min(n.dt_cap);
    (n, action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(line: &[f64]) -> usize {
        let s = |a: f64, b: f64| (b - a).partial_cmp(&0.0).unwrap() as i32;
        let mut c = 0;
        for j in 2..line.len().saturating_sub(2) {
            let d = [s(line[j - 2], line[j - 1]), s(line[j - 1], line[j]), s(line[j], line[j + 1]), s(line[j + 1], line[j + 2])];
            let pats: [[i32; 4]; 8] = [
                [1, -1, 1, 1], [1, -1, 1, -1], [-1, 1, -1, 1], [-1, 1, -1, -1],
                [1, 1, -1, 1], [-1, 1, -1, 1], [1, -1, 1, -1], [-1, -1, 1, -1],
            ];
            if pats.contains(&d) {
                c += 1;
            }
        }
        c
    }

    #[test]
    fn monotone_line_is_quiet() {
        let l: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        assert_eq!(detect_two_point_instabilities(&l), 0);
    }

    #[test]
    fn sawtooth_matches_everywhere() {
        let l: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1e-9 } else { -1e-9 }).collect();
        assert_eq!(detect_two_point_instabilities(&l), 4);
    }

    #[test]
    fn spike_needs_three_alternating_differences() {
        let mut l = vec![1.0; 12];
        l[6] = 2.0;
        assert_eq!(detect_two_point_instabilities(&l), brute(&l));
        assert_eq!(detect_two_point_instabilities(&l), 0);
        l[7] = 0.5;
        l[8] = 1.5;
        assert_eq!(detect_two_point_instabilities(&l), brute(&l));
        assert!(detect_two_point_instabilities(&l) > 0);
    }

    #[test]
    fn reduction_then_hold() {
        let s0 = StepControllerState::new(1.0, 2.0);
        let (s1, a) = controller_update(&s0, 10, 10);
        assert_eq!(a, ControllerAction::Reduced);
        assert_eq!(s1.dt, 1.0 * (2.0 / 3.0));
        let mut s = s1;
        for _ in 0..15 {
            let (n, a) = controller_update(&s, 10, 10);
            assert_eq!(a, ControllerAction::Held);
            assert_eq!(n.dt, s1.dt);
            s = n;
        }
        let (n, a) = controller_update(&s, 10, 10);
        assert_eq!(a, ControllerAction::Reduced);
        assert_eq!(n.dt, s1.dt * (2.0 / 3.0));
    }

    #[test]
    fn limit_is_strict() {
        let s0 = StepControllerState::new(1.0, 2.0);
        assert_eq!(controller_update(&s0, 1, 10).1, ControllerAction::Unchanged);
        assert_eq!(controller_update(&s0, 2, 10).1, ControllerAction::Reduced);
    }

    #[test]
    fn growth_after_fifty_one_quiet_updates() {
        let mut s = StepControllerState::new(1.0, 10.0);
        for k in 0..50 {
            let (n, a) = controller_update(&s, 0, 100);
            assert_eq!(a, ControllerAction::Unchanged, "update {k}");
            s = n;
        }
        let (n, a) = controller_update(&s, 0, 100);
        assert_eq!(a, ControllerAction::Grown);
        assert_eq!(n.dt, 1.25);
        assert_eq!(n.quiet_streak, 0);
    }

    #[test]
    fn noisy_update_breaks_the_streak() {
        let mut s = StepControllerState::new(1.0, 10.0);
        for _ in 0..40 {
            s = controller_update(&s, 0, 100).0;
        }
        s = controller_update(&s, 3, 100).0;
        assert_eq!(s.quiet_streak, 0);
    }

    #[test]
    fn cap_binds() {
        let mut s = StepControllerState::new(3.0, 3.0);
        for _ in 0..51 {
            s = controller_update(&s, 0, 100).0;
        }
        assert_eq!(s.dt, 3.0);
        assert_eq!(StepControllerState::new(5.0, 3.0).dt, 3.0);
    }

    proptest! {
        #[test]
        fn detection_matches_brute_force(v in prop::collection::vec(-2i32..3, 0..40)) {
            let l: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            prop_assert_eq!(detect_two_point_instabilities(&l), brute(&l));
        }

        #[test]
        fn controller_safety(counts in prop::collection::vec(0usize..30, 1..300), dt0 in 0.01f64..5.0) {
            let mut s = StepControllerState::new(dt0, 1.0);
            let mut frozen_for: Option<(u32, f64)> = None;
            for c in counts {
                let (n, a) = controller_update(&s, c, 100);
                prop_assert!(n.dt <= n.dt_cap);
                prop_assert!(n.hold_remaining <= 15);
                if let Some((left, dt)) = frozen_for {
                    if left > 0 {
                        prop_assert_eq!(a, ControllerAction::Held);
                        prop_assert_eq!(n.dt, dt);
                        frozen_for = Some((left - 1, dt));
                    }
                }
                if a == ControllerAction::Reduced {
                    frozen_for = Some((15, n.dt));
                }
                s = n;
            }
        }
    }
}
