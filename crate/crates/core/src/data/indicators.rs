use chrono::NaiveDate;

/// Weeks flagged as "ceasefire in effect": the containing week plus the next four.
pub const CEASEFIRE_WEEKS: usize = 5;
/// Weeks flagged as "pre-ceasefire", strictly before the containing week.
pub const PRE_CEASEFIRE_WEEKS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicators {
    pub pre_ceasefire: Vec<bool>,
    pub ceasefire: Vec<bool>,
    /// Effective dates that fell outside the grid and were skipped.
    pub skipped: Vec<NaiveDate>,
}

/// Index of the grid week containing `date`, if any. `weeks` is a contiguous
/// 7-day grid.
pub fn containing_week(weeks: &[NaiveDate], date: NaiveDate) -> Option<usize> {
    let first = *weeks.first()?;
    let days = (date - first).num_days();
    if days < 0 {
        return None;
    }
    let idx = (days / 7) as usize;
    (idx < weeks.len()).then_some(idx)
}

/// Build the pre-ceasefire and ceasefire flags for one country's week grid.
/// Overlapping windows are unioned; a week may carry both flags.
pub fn build_indicators(events: &[NaiveDate], weeks: &[NaiveDate]) -> Indicators {
    let n = weeks.len();
    let mut pre = vec![false; n];
    let mut cf = vec![false; n];
    let mut skipped = Vec::new();
    for &date in events {
        let Some(j) = containing_week(weeks, date) else {
            skipped.push(date);
            continue;
        };
        for flag in cf.iter_mut().skip(j).take(CEASEFIRE_WEEKS) {
            *flag = true;
        }
        for flag in pre.iter_mut().take(j).skip(j.saturating_sub(PRE_CEASEFIRE_WEEKS)) {
            *flag = true;
        }
    }
    Indicators { pre_ceasefire: pre, ceasefire: cf, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(); // Monday
        (0..n).map(|k| start + chrono::Duration::weeks(k as i64)).collect()
    }

    // 1-based week numbers, as in hand enumeration
    fn ones(flags: &[bool]) -> Vec<usize> {
        flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i + 1).collect()
    }

    #[test]
    fn single_event() {
        let w = grid(20);
        // Thursday of week 10
        let ind = build_indicators(&[w[9] + chrono::Duration::days(3)], &w);
        assert_eq!(ones(&ind.ceasefire), vec![10, 11, 12, 13, 14]);
        assert_eq!(ones(&ind.pre_ceasefire), vec![8, 9]);
        assert!(ind.skipped.is_empty());
    }

    #[test]
    fn no_events() {
        let w = grid(20);
        let ind = build_indicators(&[], &w);
        assert!(ind.ceasefire.iter().chain(&ind.pre_ceasefire).all(|f| !f));
    }

    #[test]
    fn overlapping_events_union() {
        let w = grid(20);
        let ind = build_indicators(&[w[9], w[11]], &w);
        assert_eq!(ones(&ind.ceasefire), (10..=16).collect::<Vec<_>>());
        assert_eq!(ones(&ind.pre_ceasefire), vec![8, 9, 10, 11]);
        let both: Vec<usize> = (0..20).filter(|&k| ind.ceasefire[k] && ind.pre_ceasefire[k]).map(|k| k + 1).collect();
        assert_eq!(both, vec![10, 11]);
    }

    #[test]
    fn windows_clip_at_edges_and_outside_events_skip() {
        let w = grid(6);
        let ind = build_indicators(&[w[0], w[5], w[5] + chrono::Duration::days(7)], &w);
        assert_eq!(ones(&ind.ceasefire), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(ones(&ind.pre_ceasefire), vec![4, 5]);
        assert_eq!(ind.skipped.len(), 1);
        let before = build_indicators(&[w[0] - chrono::Duration::days(1)], &w);
        assert_eq!(before.skipped.len(), 1);
    }

    #[test]
    fn idempotent() {
        let w = grid(40);
        let ev = [w[3], w[17], w[18], w[30]];
        assert_eq!(build_indicators(&ev, &w), build_indicators(&ev, &w));
    }
}
