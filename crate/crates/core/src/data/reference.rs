//! Published NSL-KDD class distributions, used to validate an ingested split
//! and the shipped attack map.

use super::label::ClassLabel;
use super::table::ClassDistribution;

#[derive(Clone, Copy, Debug)]
pub struct ReferenceSplit {
    pub name: &'static str,
    /// Counts in class order Normal, DoS, Probe, U2R, R2L.
    pub counts: [usize; ClassLabel::COUNT],
    /// Percentages exactly as printed.
    pub percents: [&'static str; ClassLabel::COUNT],
}

pub const KDD_TRAIN_PLUS: ReferenceSplit = ReferenceSplit {
    name: "KDDTrain+",
    counts: [67343, 45927, 11656, 52, 995],
    percents: ["53.5", "36.4", "9.3", "0.041", "0.78"],
};

pub const KDD_TEST_PLUS: ReferenceSplit = ReferenceSplit {
    name: "KDDTest+",
    counts: [9711, 7458, 2421, 67, 2887],
    percents: ["43.1", "33.1", "10.7", "0.3", "12.8"],
};

/// Labelled "KDDTest21-" in the published table, although the counts total
/// 25192, which is the size of the 20% training subset.
pub const KDD_TEST_21: ReferenceSplit = ReferenceSplit {
    name: "KDDTest21-",
    counts: [13449, 9234, 2289, 11, 209],
    percents: ["53.3", "36.7", "9.1", "0.04", "0.83"],
};

pub const REFERENCE_SPLITS: [ReferenceSplit; 3] = [KDD_TRAIN_PLUS, KDD_TEST_PLUS, KDD_TEST_21];

/// True when `actual` (a percentage) prints as `printed`, under either
/// rounding or truncation to the printed number of decimals. The published
/// table mixes both conventions.
pub fn percent_matches(actual: f64, printed: &str) -> bool {
    let decimals = printed.split_once('.').map_or(0, |(_, frac)| frac.len()) as i32;
    let Ok(want) = printed.parse::<f64>() else {
        return false;
    };
    let scale = 10f64.powi(decimals);
    let rounded = (actual * scale).round() / scale;
    // tiny epsilon so an exact 9.3000 is not truncated to 9.2999
    let truncated = ((actual * scale) + 1e-9).floor() / scale;
    (rounded - want).abs() < 1e-9 || (truncated - want).abs() < 1e-9
}

/// Lists every cell of `reference` that `dist` fails to reproduce.
pub fn compare_distribution(dist: &ClassDistribution, reference: &ReferenceSplit) -> Vec<String> {
    let mut problems = Vec::new();
    let pct = dist.percentages();
    for c in ClassLabel::ALL {
        let i = c.index();
        if dist.counts[i] != reference.counts[i] {
            problems.push(format!(
                "{} {}: count {} != {}",
                reference.name, c, dist.counts[i], reference.counts[i]
            ));
        }
        if !percent_matches(pct[i], reference.percents[i]) {
            problems.push(format!(
                "{} {}: {:.4}% does not print as {}%",
                reference.name, c, pct[i], reference.percents[i]
            ));
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_counts_are_self_consistent() {
        for r in REFERENCE_SPLITS {
            let dist = ClassDistribution { counts: r.counts };
            assert!(compare_distribution(&dist, &r).is_empty(), "{}", r.name);
        }
        assert_eq!(KDD_TRAIN_PLUS.counts.iter().sum::<usize>(), 125_973);
        assert_eq!(KDD_TEST_PLUS.counts.iter().sum::<usize>(), 22_544);
    }

    #[test]
    fn off_by_one_count_detected() {
        let mut counts = KDD_TEST_PLUS.counts;
        counts[3] += 1;
        let problems = compare_distribution(&ClassDistribution { counts }, &KDD_TEST_PLUS);
        assert!(!problems.is_empty());
    }

    #[test]
    fn percent_printing_rules() {
        assert!(percent_matches(53.458, "53.5"));
        assert!(percent_matches(0.7898, "0.78"));
        assert!(!percent_matches(0.7749, "0.78"));
        assert!(percent_matches(9.3, "9.3"));
    }
}
