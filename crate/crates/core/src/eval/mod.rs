//! Character and word error rates.

mod grid;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{
    evaluate, run_experiment_grid, write_grid_report, ExperimentConfig, GridReport, GridRow, RunSpec,
};

/// Levenshtein distance with its decomposition into edit operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.distance += o.distance;
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
    }
}

/// Unit-cost edit distance from `reference` to `hypothesis`. Among minimal
/// scripts the backtrace prefers matches and substitutions, then deletions.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut counts = EditCounts {
        distance: d[n * w + m],
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                counts.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Characters of the detokenized text, spaces included.
    Char,
    /// Space-separated words.
    Word,
}

pub fn symbols(text: &str, unit: Unit) -> Vec<&str> {
    match unit {
        Unit::Char => text
            .char_indices()
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
        Unit::Word => text.split(' ').filter(|w| !w.is_empty()).collect(),
    }
}

/// Error counts accumulated over a set of utterances in one unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitScore {
    pub utterances: usize,
    pub reference_length: usize,
    pub edits: EditCounts,
}

impl UnitScore {
    /// `100 * distance / reference length`; 0 for an empty reference set
    /// with no insertions.
    pub fn rate(&self) -> f64 {
        if self.reference_length == 0 {
            if self.edits.distance == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            100.0 * self.edits.distance as f64 / self.reference_length as f64
        }
    }

    fn add(&mut self, reference: &str, hypothesis: &str, unit: Unit) {
        let r = symbols(reference, unit);
        let h = symbols(hypothesis, unit);
        self.utterances += 1;
        self.reference_length += r.len();
        self.edits += edit_distance(&r, &h);
    }
}

fn check_ids<V>(hyps: &BTreeMap<String, String>, refs: &BTreeMap<String, V>) -> Result<()> {
    let mut missing: Vec<String> = refs.keys().filter(|k| !hyps.contains_key(*k)).cloned().collect();
    missing.extend(hyps.keys().filter(|k| !refs.contains_key(*k)).cloned());
    if missing.is_empty() {
        Ok(())
    } else {
        missing.sort();
        Err(Error::MissingIds(missing))
    }
}

/// Scores hypotheses against references keyed by utterance id.
pub fn score(hyps: &BTreeMap<String, String>, refs: &BTreeMap<String, String>, unit: Unit) -> Result<UnitScore> {
    check_ids(hyps, refs)?;
    let mut s = UnitScore::default();
    for (id, r) in refs {
        s.add(r, &hyps[id], unit);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageScore {
    pub cer: f64,
    pub wer: f64,
    pub chars: UnitScore,
    pub words: UnitScore,
}

impl LanguageScore {
    fn finish(mut self) -> Self {
        self.cer = self.chars.rate();
        self.wer = self.words.rate();
        self
    }
}

/// Per-language CER and WER.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub languages: BTreeMap<String, LanguageScore>,
}

/// A reference transcript and its language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub language: String,
    pub text: String,
}

impl EvalReport {
    pub fn build(hyps: &BTreeMap<String, String>, refs: &BTreeMap<String, Reference>) -> Result<Self> {
        check_ids(hyps, refs)?;
        let mut languages: BTreeMap<String, LanguageScore> = BTreeMap::new();
        for (id, r) in refs {
            let entry = languages.entry(r.language.clone()).or_default();
            entry.chars.add(&r.text, &hyps[id], Unit::Char);
            entry.words.add(&r.text, &hyps[id], Unit::Word);
        }
        Ok(EvalReport {
            languages: languages.into_iter().map(|(k, v)| (k, v.finish())).collect(),
        })
    }

    pub fn cer(&self, language: &str) -> Option<f64> {
        self.languages.get(language).map(|s| s.cer)
    }

    pub fn wer(&self, language: &str) -> Option<f64> {
        self.languages.get(language).map(|s| s.wer)
    }

    /// Unweighted mean CER over languages.
    pub fn mean_cer(&self) -> f64 {
        let n = self.languages.len();
        if n == 0 {
            return f64::NAN;
        }
        self.languages.values().map(|s| s.cer).sum::<f64>() / n as f64
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>6} {:>8} {:>8} {:>6} {:>6} {:>6}", "lang", "utts", "%CER", "%WER", "S", "D", "I")?;
        for (lang, s) in &self.languages {
            writeln!(
                f,
                "{:<8} {:>6} {:>8.2} {:>8.2} {:>6} {:>6} {:>6}",
                lang,
                s.chars.utterances,
                s.cer,
                s.wer,
                s.chars.edits.substitutions,
                s.chars.edits.deletions,
                s.chars.edits.insertions
            )?;
        }
        Ok(())
    }
}

/// `(base - new) / base * 100`.
pub fn relative_improvement(base: f64, new: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (base - new) / base * 100.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(edit_distance(&chars("abc"), &chars("abc")).distance, 0);
        let one = edit_distance(&chars("abc"), &chars("axc"));
        assert_eq!((one.distance, one.substitutions), (1, 1));
        assert_eq!(edit_distance(&chars("kitten"), &chars("sitting")).distance, 3);
        let del = edit_distance(&chars("abcd"), &chars(""));
        assert_eq!((del.distance, del.deletions), (4, 4));
        let ins = edit_distance(&chars(""), &chars("ab"));
        assert_eq!((ins.distance, ins.insertions), (2, 2));
    }

    #[test]
    fn score_examples() {
        let refs = ids(&[("u", "ab cd")]);
        let hyps = ids(&[("u", "ab ce")]);
        assert_eq!(score(&hyps, &refs, Unit::Word).unwrap().rate(), 50.0);
        assert_eq!(score(&hyps, &refs, Unit::Char).unwrap().rate(), 20.0);
        assert_eq!(score(&refs, &refs, Unit::Char).unwrap().rate(), 0.0);
        let empty = ids(&[("u", "")]);
        let s = score(&empty, &refs, Unit::Char).unwrap();
        assert_eq!((s.rate(), s.edits.deletions), (100.0, 5));
    }

    #[test]
    fn missing_ids_are_listed() {
        let refs = ids(&[("a", "x"), ("b", "y")]);
        let hyps = ids(&[("a", "x"), ("c", "y")]);
        match score(&hyps, &refs, Unit::Char) {
            Err(Error::MissingIds(v)) => assert_eq!(v, vec!["b".to_string(), "c".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_groups_by_language() {
        let refs: BTreeMap<String, Reference> = [("1", "L1", "ab"), ("2", "L2", "cd cd")]
            .iter()
            .map(|(id, l, t)| {
                (
                    id.to_string(),
                    Reference {
                        language: l.to_string(),
                        text: t.to_string(),
                    },
                )
            })
            .collect();
        let hyps = ids(&[("1", "ab"), ("2", "cd")]);
        let r = EvalReport::build(&hyps, &refs).unwrap();
        assert_eq!(r.cer("L1"), Some(0.0));
        assert_eq!(r.cer("L2"), Some(60.0));
        assert_eq!(r.wer("L2"), Some(50.0));
        assert!(r.to_string().contains("L2"));
    }

    #[test]
    fn relative_improvement_formula() {
        assert_eq!(relative_improvement(20.0, 20.0), 0.0);
        assert!((relative_improvement(20.0, 17.86) - 10.7).abs() < 1e-9);
    }

    fn seq() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..4, 0..8)
    }

    proptest! {
        #[test]
        fn metric_properties(a in seq(), b in seq(), c in seq()) {
            let ab = edit_distance(&a, &b);
            prop_assert_eq!(ab.distance, edit_distance(&b, &a).distance);
            prop_assert_eq!(ab.distance, ab.substitutions + ab.deletions + ab.insertions);
            prop_assert_eq!(edit_distance(&a, &a).distance, 0);
            prop_assert_eq!(ab.distance == 0, a == b);
            let ac = edit_distance(&a, &c).distance;
            let cb = edit_distance(&c, &b).distance;
            prop_assert!(ab.distance <= ac + cb);
            prop_assert_eq!(ab.deletions + b.len(), ab.insertions + a.len());
        }

        #[test]
        fn score_ignores_order(pairs in proptest::collection::vec((seq(), seq()), 1..6)) {
            let text = |v: &[u8]| v.iter().map(|&x| if x == 3 { ' ' } else { (b'a' + x) as char }).collect::<String>();
            let refs: BTreeMap<String, String> = pairs.iter().enumerate().map(|(i, (r, _))| (format!("{i:02}"), text(r))).collect();
            let hyps: BTreeMap<String, String> = pairs.iter().enumerate().map(|(i, (_, h))| (format!("{i:02}"), text(h))).collect();
            let renamed_refs: BTreeMap<String, String> = refs.iter().map(|(k, v)| (format!("z{}", 99 - k.parse::<usize>().unwrap()), v.clone())).collect();
            let renamed_hyps: BTreeMap<String, String> = hyps.iter().map(|(k, v)| (format!("z{}", 99 - k.parse::<usize>().unwrap()), v.clone())).collect();
            for unit in [Unit::Char, Unit::Word] {
                prop_assert_eq!(score(&hyps, &refs, unit).unwrap(), score(&renamed_hyps, &renamed_refs, unit).unwrap());
            }
        }
    }
}
