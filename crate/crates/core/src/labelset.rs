//! Universal grapheme inventory shared across languages.
//!
//! Every base character `c` contributes three tokens: the lowercase `c`, a
//! capitalized `C` marking the first character of a word, and a double-letter
//! unit `cc`. Index 0 is always the CTC blank.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface form used for the blank token.
pub const BLANK_SURFACE: &str = "<b>";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        if code.is_empty() || code.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid language code {code:?}")));
        }
        Ok(LanguageId(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Blank,
    Lower,
    Capital,
    Double,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    /// Base character for every kind except `Blank`.
    pub base: Option<char>,
}

impl Token {
    fn new(kind: TokenKind, base: char) -> Self {
        let surface = match kind {
            TokenKind::Blank => BLANK_SURFACE.to_string(),
            TokenKind::Lower => base.to_string(),
            TokenKind::Double => [base, base].iter().collect(),
            TokenKind::Capital => {
                let upper: String = base.to_uppercase().collect();
                if upper == base.to_string() {
                    // uncased symbols (digits, apostrophe) still need a distinct surface
                    format!("^{base}")
                } else {
                    upper
                }
            }
        };
        Token {
            surface,
            kind,
            base: Some(base),
        }
    }
}

/// Blank-free token ids for one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub language: LanguageId,
}

/// K-length binary vector; `bits[k]` is set iff token `k` belongs to the language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageMask {
    bits: Vec<bool>,
}

impl LanguageMask {
    pub fn all_ones(k: usize) -> Self {
        LanguageMask {
            bits: vec![true; k],
        }
    }

    pub fn from_bits(bits: Vec<bool>, blank_index: usize) -> Result<Self> {
        if !bits.get(blank_index).copied().unwrap_or(false) {
            return Err(Error::Shape("mask must allow the blank".into()));
        }
        Ok(LanguageMask { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn allows(&self, k: usize) -> bool {
        self.bits.get(k).copied().unwrap_or(false)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelInventory {
    tokens: Vec<Token>,
    blank_index: usize,
    languages: Vec<LanguageId>,
    alphabets: BTreeMap<LanguageId, Vec<char>>,
    membership: BTreeMap<LanguageId, BTreeSet<usize>>,
    lookup: HashMap<(TokenKind, char), usize>,
}

/// Shared-token statistics across languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapReport {
    pub total: usize,
    pub per_language: BTreeMap<String, usize>,
    /// Tokens belonging to every language, blank included.
    pub overall: usize,
    pub pairwise: BTreeMap<(String, String), usize>,
}

impl LabelInventory {
    /// Builds the universal inventory from per-language alphabets.
    pub fn build(alphabets: &BTreeMap<LanguageId, Vec<char>>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::Config("no alphabets given".into()));
        }
        let mut union = BTreeSet::new();
        for (lang, chars) in alphabets {
            let invalid = |reason: String| Error::InvalidAlphabet {
                language: lang.to_string(),
                reason,
            };
            if chars.is_empty() {
                return Err(invalid("alphabet is empty".into()));
            }
            let mut seen = BTreeSet::new();
            for &c in chars {
                if c.is_whitespace() || c.is_control() {
                    return Err(invalid(format!("{c:?} cannot be a base character")));
                }
                if c.is_uppercase() {
                    return Err(invalid(format!("base character {c:?} is not lowercase")));
                }
                if !seen.insert(c) {
                    return Err(invalid(format!("duplicate base character {c:?}")));
                }
            }
            union.extend(seen);
        }

        let mut tokens = vec![Token {
            surface: BLANK_SURFACE.to_string(),
            kind: TokenKind::Blank,
            base: None,
        }];
        let mut lookup = HashMap::new();
        for &c in &union {
            for kind in [TokenKind::Lower, TokenKind::Capital, TokenKind::Double] {
                lookup.insert((kind, c), tokens.len());
                tokens.push(Token::new(kind, c));
            }
        }
        let mut surfaces = BTreeSet::new();
        for t in &tokens {
            if !surfaces.insert(t.surface.as_str()) {
                return Err(Error::InvalidAlphabet {
                    language: "*".into(),
                    reason: format!("token surface {:?} is ambiguous", t.surface),
                });
            }
        }

        let mut membership = BTreeMap::new();
        for (lang, chars) in alphabets {
            let mut set = BTreeSet::from([0usize]);
            for &c in chars {
                for kind in [TokenKind::Lower, TokenKind::Capital, TokenKind::Double] {
                    set.insert(lookup[&(kind, c)]);
                }
            }
            membership.insert(lang.clone(), set);
        }

        Ok(LabelInventory {
            tokens,
            blank_index: 0,
            languages: alphabets.keys().cloned().collect(),
            alphabets: alphabets.clone(),
            membership,
            lookup,
        })
    }

    /// Convenience constructor from `(code, characters)` pairs.
    pub fn from_strs<'a>(alphabets: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (code, chars) in alphabets {
            map.insert(LanguageId::new(code)?, chars.chars().collect());
        }
        Self::build(&map)
    }

    /// Restricts the inventory to a subset of its languages.
    pub fn restrict(&self, languages: &[LanguageId]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for lang in languages {
            let chars = self
                .alphabets
                .get(lang)
                .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))?;
            map.insert(lang.clone(), chars.clone());
        }
        Self::build(&map)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index]
    }

    pub fn languages(&self) -> &[LanguageId] {
        &self.languages
    }

    pub fn alphabets(&self) -> &BTreeMap<LanguageId, Vec<char>> {
        &self.alphabets
    }

    pub fn alphabet_strings(&self) -> BTreeMap<String, String> {
        self.alphabets
            .iter()
            .map(|(l, cs)| (l.to_string(), cs.iter().collect()))
            .collect()
    }

    pub fn language(&self, code: &str) -> Result<&LanguageId> {
        self.languages
            .iter()
            .find(|l| l.as_str() == code)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }

    /// Position of the language in the sorted language list; this is the
    /// hot index of its one-hot indicator.
    pub fn language_index(&self, language: &LanguageId) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == language)
            .ok_or_else(|| Error::UnknownLanguage(language.to_string()))
    }

    pub fn membership(&self, language: &LanguageId) -> Result<&BTreeSet<usize>> {
        self.membership
            .get(language)
            .ok_or_else(|| Error::UnknownLanguage(language.to_string()))
    }

    /// Global token ids of a language in ascending order; position in this
    /// list is the token's id in a language-specific output head.
    pub fn language_tokens(&self, language: &LanguageId) -> Result<Vec<usize>> {
        Ok(self.membership(language)?.iter().copied().collect())
    }

    pub fn index_of(&self, kind: TokenKind, base: char) -> Option<usize> {
        self.lookup.get(&(kind, base)).copied()
    }

    pub fn index_of_surface(&self, surface: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t.surface == surface)
    }

    pub fn tokenize(&self, text: &str, language: &LanguageId) -> Result<TokenSequence> {
        let members = self.membership(language)?;
        let mut ids = Vec::with_capacity(text.len());
        let chars: Vec<char> = text.chars().collect();
        let mut emit = |kind: TokenKind, c: char, position: usize| -> Result<()> {
            match self.index_of(kind, c).filter(|k| members.contains(k)) {
                Some(k) => {
                    ids.push(k);
                    Ok(())
                }
                None => Err(Error::UnknownCharacter {
                    character: c,
                    position,
                    language: language.to_string(),
                }),
            }
        };

        let mut i = 0;
        let mut word_start = true;
        while i < chars.len() {
            let c = chars[i];
            if c == ' ' {
                if word_start {
                    return Err(Error::InvalidText(format!(
                        "empty word at position {i} in {text:?}"
                    )));
                }
                word_start = true;
                i += 1;
                continue;
            }
            if word_start {
                emit(TokenKind::Capital, c, i)?;
                word_start = false;
                i += 1;
            } else if chars.get(i + 1) == Some(&c) {
                emit(TokenKind::Double, c, i)?;
                i += 2;
            } else {
                emit(TokenKind::Lower, c, i)?;
                i += 1;
            }
        }
        if word_start && !chars.is_empty() {
            return Err(Error::InvalidText(format!("trailing space in {text:?}")));
        }
        Ok(TokenSequence {
            ids,
            language: language.clone(),
        })
    }

    /// Inverse of [`tokenize`](Self::tokenize) over raw global ids.
    pub fn detokenize_ids(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::with_capacity(ids.len() * 2);
        for &id in ids {
            let token = self
                .tokens
                .get(id)
                .ok_or_else(|| Error::InvalidSequence(format!("token id {id} out of range")))?;
            match (token.kind, token.base) {
                (TokenKind::Blank, _) | (_, None) => {
                    return Err(Error::InvalidSequence("blank inside transcript".into()))
                }
                (TokenKind::Lower, Some(c)) => out.push(c),
                (TokenKind::Double, Some(c)) => {
                    out.push(c);
                    out.push(c);
                }
                (TokenKind::Capital, Some(c)) => {
                    out.push(' ');
                    out.push(c);
                }
            }
        }
        Ok(out.strip_prefix(' ').map(str::to_string).unwrap_or(out))
    }

    pub fn detokenize(&self, seq: &TokenSequence) -> Result<String> {
        self.detokenize_ids(&seq.ids)
    }

    pub fn surfaces(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&k| self.tokens[k].surface.as_str()).collect()
    }

    pub fn language_mask(&self, language: &LanguageId) -> Result<LanguageMask> {
        let members = self.membership(language)?;
        let mut bits = vec![false; self.tokens.len()];
        for &k in members {
            bits[k] = true;
        }
        bits[self.blank_index] = true;
        Ok(LanguageMask { bits })
    }

    pub fn overlap_report(&self) -> Result<OverlapReport> {
        if self.languages.len() < 2 {
            return Err(Error::Config(
                "overlap report needs at least two languages".into(),
            ));
        }
        let sets: Vec<&BTreeSet<usize>> =
            self.languages.iter().map(|l| &self.membership[l]).collect();
        let overall = (0..self.tokens.len())
            .filter(|k| sets.iter().all(|s| s.contains(k)))
            .count();
        let mut pairwise = BTreeMap::new();
        for (i, a) in self.languages.iter().enumerate() {
            for b in &self.languages[i + 1..] {
                let shared = self.membership[a]
                    .intersection(&self.membership[b])
                    .count();
                pairwise.insert((a.to_string(), b.to_string()), shared);
            }
        }
        Ok(OverlapReport {
            total: self.tokens.len(),
            per_language: self
                .membership
                .iter()
                .map(|(l, s)| (l.to_string(), s.len()))
                .collect(),
            overall,
            pairwise,
        })
    }

    /// Token surfaces of `language` in `target` that this inventory lacks.
    pub fn missing_tokens(&self, target: &LabelInventory, language: &LanguageId) -> Result<Vec<String>> {
        let mine = self.membership(language).ok();
        let mut missing = Vec::new();
        for &k in target.membership(language)? {
            let surface = &target.tokens[k].surface;
            let present = self
                .index_of_surface(surface)
                .is_some_and(|j| mine.is_none_or(|m| m.contains(&j)));
            if !present {
                missing.push(surface.clone());
            }
        }
        Ok(missing)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct AlphabetFile {
    alphabets: BTreeMap<String, String>,
}

/// Reads an alphabet declaration (TOML, `[alphabets]` table of code = "chars").
pub fn load_alphabets(path: &Path) -> Result<BTreeMap<LanguageId, Vec<char>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alphabets(&text).map_err(|e| match e {
        Error::Serde(reason) => Error::malformed(path, reason),
        other => other,
    })
}

pub fn parse_alphabets(text: &str) -> Result<BTreeMap<LanguageId, Vec<char>>> {
    let file: AlphabetFile = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    file.alphabets
        .into_iter()
        .map(|(code, chars)| Ok((LanguageId::new(code)?, chars.chars().collect())))
        .collect()
}

pub fn save_alphabets(inventory: &LabelInventory, path: &Path) -> Result<()> {
    let file = AlphabetFile {
        alphabets: inventory.alphabet_strings(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Collapses repeats then removes blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(specs: &[(&str, &str)]) -> LabelInventory {
        LabelInventory::from_strs(specs.iter().copied()).unwrap()
    }

    fn lang(code: &str) -> LanguageId {
        LanguageId::new(code).unwrap()
    }

    fn surf(inv: &LabelInventory, text: &str, code: &str) -> Vec<String> {
        let seq = inv.tokenize(text, &lang(code)).unwrap();
        inv.surfaces(&seq.ids).into_iter().map(String::from).collect()
    }

    #[test]
    fn two_language_inventory_size() {
        let inv = inv(&[("L1", "ab"), ("L2", "bc")]);
        assert_eq!(inv.len(), 10);
        assert_eq!(inv.blank_index(), 0);
    }

    #[test]
    fn single_char_inventory_order() {
        let inv = inv(&[("L1", "a")]);
        let surfaces: Vec<_> = inv.tokens().iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, [BLANK_SURFACE, "a", "A", "aa"]);
    }

    #[test]
    fn three_alphabet_counts() {
        let inv = inv(&[("L1", "abcd"), ("L2", "abcef"), ("L3", "abcgh")]);
        assert_eq!(inv.len(), 25);
        let sizes: Vec<usize> = ["L1", "L2", "L3"]
            .iter()
            .map(|c| inv.membership(&lang(c)).unwrap().len())
            .collect();
        assert_eq!(sizes, [13, 16, 16]);
    }

    #[test]
    fn duplicate_base_char_rejected() {
        let err = LabelInventory::from_strs([("L1", "aba")]).unwrap_err();
        assert!(matches!(err, Error::InvalidAlphabet { .. }));
        assert!(LabelInventory::from_strs([("L1", "aB")]).is_err());
        assert!(LabelInventory::from_strs([("L1", "")]).is_err());
    }

    #[test]
    fn uncased_symbols_get_distinct_capitals() {
        let inv = inv(&[("L1", "a'1")]);
        assert_eq!(inv.len(), 10);
        assert_eq!(surf(&inv, "'a", "L1"), ["^'", "a"]);
        assert_eq!(inv.detokenize_ids(&inv.tokenize("1a1 '", &lang("L1")).unwrap().ids).unwrap(), "1a1 '");
    }

    #[test]
    fn tokenize_examples() {
        let inv = inv(&[("EN", "abcdefghijklmnopqrstuvwxyz")]);
        assert_eq!(surf(&inv, "hello", "EN"), ["H", "e", "ll", "o"]);
        assert_eq!(surf(&inv, "ball game", "EN"), ["B", "a", "ll", "G", "a", "m", "e"]);
        assert_eq!(surf(&inv, "aaaa", "EN"), ["A", "aa", "a"]);
        assert_eq!(surf(&inv, "llama", "EN"), ["L", "l", "a", "m", "a"]);
        assert!(surf(&inv, "", "EN").is_empty());
    }

    #[test]
    fn tokenize_errors() {
        let inv = inv(&[("L1", "ab"), ("L2", "bc")]);
        match inv.tokenize("ab c", &lang("L1")).unwrap_err() {
            Error::UnknownCharacter {
                character,
                position,
                ..
            } => assert_eq!((character, position), ('c', 3)),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            inv.tokenize("a  b", &lang("L1")),
            Err(Error::InvalidText(_))
        ));
        assert!(matches!(
            inv.tokenize("ab ", &lang("L1")),
            Err(Error::InvalidText(_))
        ));
        assert!(matches!(
            inv.tokenize("ab", &lang("L9")),
            Err(Error::UnknownLanguage(_))
        ));
    }

    #[test]
    fn detokenize_examples() {
        let inv = inv(&[("EN", "abcdefghijklmnopqrstuvwxyz")]);
        let ids = |s: &[&str]| -> Vec<usize> {
            s.iter().map(|x| inv.index_of_surface(x).unwrap()).collect()
        };
        assert_eq!(inv.detokenize_ids(&ids(&["H", "e", "ll", "o"])).unwrap(), "hello");
        assert_eq!(
            inv.detokenize_ids(&ids(&["B", "a", "ll", "G", "a", "m", "e"])).unwrap(),
            "ball game"
        );
        assert_eq!(inv.detokenize_ids(&[]).unwrap(), "");
        assert!(matches!(
            inv.detokenize_ids(&[0]),
            Err(Error::InvalidSequence(_))
        ));
    }

    #[test]
    fn masks() {
        let inv = inv(&[("L1", "ab"), ("L2", "bc")]);
        let m1 = inv.language_mask(&lang("L1")).unwrap();
        assert_eq!(m1.count_ones(), 7);
        let zeros: BTreeSet<&str> = (0..inv.len())
            .filter(|&k| !m1.allows(k))
            .map(|k| inv.token(k).surface.as_str())
            .collect();
        assert_eq!(zeros, BTreeSet::from(["c", "C", "cc"]));
        let m2 = inv.language_mask(&lang("L2")).unwrap();
        let zeros: BTreeSet<&str> = (0..inv.len())
            .filter(|&k| !m2.allows(k))
            .map(|k| inv.token(k).surface.as_str())
            .collect();
        assert_eq!(zeros, BTreeSet::from(["a", "A", "aa"]));

        let single = self::inv(&[("L1", "xyz")]);
        assert_eq!(single.language_mask(&lang("L1")).unwrap().count_ones(), single.len());
        assert!(inv.language_mask(&lang("L3")).is_err());
    }

    #[test]
    fn overlap() {
        let r = inv(&[("L1", "ab"), ("L2", "bc")]).overlap_report().unwrap();
        assert_eq!(r.overall, 4);
        assert_eq!(r.pairwise[&("L1".to_string(), "L2".to_string())], 4);
        assert_eq!(inv(&[("L1", "ab"), ("L2", "cd")]).overlap_report().unwrap().overall, 1);
        let same = inv(&[("L1", "abc"), ("L2", "abc")]);
        assert_eq!(same.overlap_report().unwrap().overall, same.len());
        assert!(inv(&[("L1", "ab")]).overlap_report().is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let a = inv(&[("L2", "zyx"), ("L1", "cab")]);
        let b = inv(&[("L1", "cab"), ("L2", "zyx")]);
        assert_eq!(a.tokens(), b.tokens());
    }

    #[test]
    fn language_tokens_and_missing() {
        let full = inv(&[("L1", "ab"), ("L2", "bc")]);
        let l2 = lang("L2");
        let toks = full.language_tokens(&l2).unwrap();
        assert_eq!(toks[0], 0);
        assert_eq!(toks.len(), 7);
        let only_l1 = full.restrict(&[lang("L1")]).unwrap();
        let other = inv(&[("L2", "bc")]);
        assert!(full.missing_tokens(&other, &l2).unwrap().is_empty());
        let missing = only_l1.missing_tokens(&other, &l2).unwrap();
        assert_eq!(missing, ["c", "C", "cc"]);
    }

    #[test]
    fn collapse_rules() {
        assert_eq!(collapse(&[1, 1, 0, 1], 0), [1, 1]);
        assert!(collapse(&[0, 0], 0).is_empty());
        assert_eq!(collapse(&[1, 2, 2, 0, 2], 0), [1, 2, 2]);
    }

    #[test]
    fn alphabet_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alphabets.toml");
        let a = inv(&[("EN", "abc'"), ("DE", "abcä")]);
        save_alphabets(&a, &path).unwrap();
        let b = LabelInventory::build(&load_alphabets(&path).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
