//! Rule-based partial labelling of non-violent weeks.
//!
//! A week is fixed to state 1 when no week within [`LABEL_RADIUS_WEEKS`] on
//! either side (itself included) recorded a death, and the week sits inside a
//! run of at least [`LABEL_MIN_RUN_WEEKS`] consecutive zero-death weeks.
//! 60 days rounds up to 9 whole weeks and 2 years to 104 weeks.

pub const LABEL_RADIUS_WEEKS: usize = 9;
pub const LABEL_MIN_RUN_WEEKS: usize = 104;

/// `true` marks a week fixed to state 1.
pub fn apply_label_rule(deaths: &[u64]) -> Vec<bool> {
    let n = deaths.len();
    // length of the zero run each week belongs to (0 for weeks with deaths)
    let mut run_len = vec![0usize; n];
    let mut start = 0;
    while start < n {
        if deaths[start] > 0 {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < n && deaths[end] == 0 {
            end += 1;
        }
        run_len[start..end].fill(end - start);
        start = end;
    }

    // prefix counts of weeks with deaths for window queries
    let mut violent = vec![0usize; n + 1];
    for k in 0..n {
        violent[k + 1] = violent[k] + usize::from(deaths[k] > 0);
    }

    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(LABEL_RADIUS_WEEKS);
            let hi = (k + LABEL_RADIUS_WEEKS + 1).min(n);
            violent[hi] == violent[lo] && run_len[k] >= LABEL_MIN_RUN_WEEKS
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct scan of both clauses, independent of the run/prefix bookkeeping.
    fn scan(deaths: &[u64], k: usize) -> bool {
        let n = deaths.len() as i64;
        let k = k as i64;
        let quiet = (k - 9..=k + 9).filter(|&j| j >= 0 && j < n).all(|j| deaths[j as usize] == 0);
        if !quiet {
            return false;
        }
        let mut lo = k;
        while lo > 0 && deaths[(lo - 1) as usize] == 0 {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < n && deaths[(hi + 1) as usize] == 0 {
            hi += 1;
        }
        hi - lo + 1 >= 104
    }

    #[test]
    fn all_zero_series_fully_labelled() {
        assert!(apply_label_rule(&[0; 300]).iter().all(|&l| l));
    }

    #[test]
    fn single_death_mid_series() {
        let mut y = vec![0u64; 300];
        y[149] = 1; // week 150
        let labels = apply_label_rule(&y);
        for (k, &l) in labels.iter().enumerate() {
            let week = k + 1;
            let expected = !(141..=159).contains(&week);
            assert_eq!(l, expected, "week {week}");
            assert_eq!(l, scan(&y, k));
        }
    }

    #[test]
    fn short_zero_blocks_never_labelled() {
        let mut y = Vec::new();
        for _ in 0..6 {
            y.extend(std::iter::repeat_n(0u64, 52));
            y.push(3);
        }
        assert!(apply_label_rule(&y).iter().all(|&l| !l));
    }

    #[test]
    fn exactly_104_zero_run_qualifies() {
        let mut y = vec![1u64];
        y.extend(std::iter::repeat_n(0u64, 104));
        y.push(1);
        let labels = apply_label_rule(&y);
        let labelled: Vec<usize> = (0..y.len()).filter(|&k| labels[k]).collect();
        // run covers indices 1..=104; radius excludes indices 1..=9 and 96..=104
        assert_eq!(labelled, (10..=95).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn matches_brute_force_scan(
            runs in proptest::collection::vec((0usize..140, 1u64..5), 1..6),
            tail in 0usize..140,
        ) {
            let mut y = Vec::new();
            for (zeros, d) in runs {
                y.extend(std::iter::repeat_n(0u64, zeros));
                y.push(d);
            }
            y.extend(std::iter::repeat_n(0u64, tail));
            let labels = apply_label_rule(&y);
            for k in 0..y.len() {
                prop_assert_eq!(labels[k], scan(&y, k), "week {}", k);
            }
        }
    }
}
