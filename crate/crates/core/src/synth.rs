//! Synthetic multilingual corpora in feature space.
//!
//! Each token of each language owns a diagonal-Gaussian emission whose mean
//! interpolates between a language-independent anchor and a language-specific
//! offset: `mean = (1 - rho) * anchor + rho * offset`. With `rho = 0` the same
//! grapheme sounds identical in every language; with `rho = 1` the languages
//! share nothing but the label.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{load_features, save_features, FeatureMatrix, Frames};
use crate::labelset::{save_alphabets, LabelInventory, LanguageId};

/// Stable 64-bit mixing of a seed with a sequence of byte strings.
pub fn derive_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut mix = |x: u64| {
        h = h.wrapping_add(x).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    };
    for part in parts {
        mix(part.len() as u64);
        for chunk in part.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            mix(u64::from_le_bytes(buf));
        }
    }
    h
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionParams {
    pub dim: usize,
    pub sigma: f64,
    pub frames_min: usize,
    pub frames_max: usize,
    pub rho: f64,
}

impl Default for EmissionParams {
    fn default() -> Self {
        EmissionParams {
            dim: crate::features::DEFAULT_FEATURE_DIM,
            sigma: 0.5,
            frames_min: 3,
            frames_max: 6,
            rho: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLanguageSpec {
    pub language: LanguageId,
    /// Emission mean per global token id (blank excluded).
    pub means: BTreeMap<usize, Vec<f32>>,
    pub sigma: f64,
    pub frames_min: usize,
    pub frames_max: usize,
    pub rho: f64,
}

impl SynthLanguageSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames_min < 1 || self.frames_max < self.frames_min {
            return Err(Error::Config(format!(
                "invalid frames-per-token range [{}, {}]",
                self.frames_min, self.frames_max
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("invalid emission std {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("divergence {} outside [0, 1]", self.rho)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means.values().next().map_or(0, Vec::len)
    }
}

/// Builds one emission spec per language of `inventory`. Anchors and offsets
/// are keyed by token surface and language code, so a language's means do not
/// depend on which other languages share the inventory.
pub fn build_specs(
    inventory: &LabelInventory,
    params: &EmissionParams,
    seed: u64,
) -> Result<Vec<SynthLanguageSpec>> {
    if params.dim == 0 {
        return Err(Error::Config("emission dimension must be positive".into()));
    }
    let draw = |key: u64| -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        (0..params.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    };
    let mut specs = Vec::new();
    for lang in inventory.languages() {
        let mut means = BTreeMap::new();
        for &k in inventory.membership(lang)? {
            if k == inventory.blank_index() {
                continue;
            }
            let surface = inventory.token(k).surface.as_bytes();
            let anchor = draw(derive_seed(seed, &[b"anchor", surface]));
            let offset = draw(derive_seed(seed, &[b"offset", lang.as_str().as_bytes(), surface]));
            let mean = anchor
                .iter()
                .zip(&offset)
                .map(|(a, o)| ((1.0 - params.rho) * a + params.rho * o) as f32)
                .collect();
            means.insert(k, mean);
        }
        let spec = SynthLanguageSpec {
            language: lang.clone(),
            means,
            sigma: params.sigma,
            frames_min: params.frames_min,
            frames_max: params.frames_max,
            rho: params.rho,
        };
        spec.validate()?;
        specs.push(spec);
    }
    Ok(specs)
}

/// Renders `text` as frames: each token holds for a uniformly drawn number of
/// frames, each frame being the token mean plus isotropic Gaussian noise.
pub fn synth_utterance(
    spec: &SynthLanguageSpec,
    inventory: &LabelInventory,
    text: &str,
    utterance_id: &str,
    seed: u64,
) -> Result<FeatureMatrix> {
    spec.validate()?;
    let seq = inventory.tokenize(text, &spec.language)?;
    if seq.ids.is_empty() {
        return Err(Error::InvalidText("cannot synthesize an empty transcript".into()));
    }
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut data = Vec::new();
    let mut frames = 0;
    for &k in &seq.ids {
        let mean = spec
            .means
            .get(&k)
            .ok_or_else(|| Error::Config(format!("no emission for token {k}")))?;
        let n = rng.gen_range(spec.frames_min..=spec.frames_max);
        for _ in 0..n {
            for &m in mean {
                let v = if spec.sigma == 0.0 {
                    m
                } else {
                    (f64::from(m) + noise.sample(&mut rng)) as f32
                };
                data.push(v);
            }
        }
        frames += n;
    }
    Ok(FeatureMatrix {
        frames: Frames::new(frames, dim, data)?,
        language: spec.language.clone(),
        transcript: text.to_string(),
        utterance_id: utterance_id.to_string(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconParams {
    pub words_per_language: usize,
    pub word_len_min: usize,
    pub word_len_max: usize,
    /// Probability that a character is repeated to form a doubled letter.
    pub double_prob: f64,
    pub words_per_utterance_min: usize,
    pub words_per_utterance_max: usize,
}

impl Default for LexiconParams {
    fn default() -> Self {
        LexiconParams {
            words_per_language: 60,
            word_len_min: 2,
            word_len_max: 5,
            double_prob: 0.1,
            words_per_utterance_min: 1,
            words_per_utterance_max: 3,
        }
    }
}

/// Draws transcripts from a per-language toy lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSampler {
    lexicons: BTreeMap<LanguageId, Vec<String>>,
    words_min: usize,
    words_max: usize,
}

impl TextSampler {
    pub fn new(lexicons: BTreeMap<LanguageId, Vec<String>>, words_min: usize, words_max: usize) -> Result<Self> {
        if words_min == 0 || words_max < words_min {
            return Err(Error::Config(format!(
                "invalid words-per-utterance range [{words_min}, {words_max}]"
            )));
        }
        if let Some((lang, _)) = lexicons.iter().find(|(_, words)| words.is_empty()) {
            return Err(Error::Config(format!("empty lexicon for {lang}")));
        }
        Ok(TextSampler {
            lexicons,
            words_min,
            words_max,
        })
    }

    /// Random lexicons over each language's alphabet.
    pub fn random(inventory: &LabelInventory, params: &LexiconParams, seed: u64) -> Result<Self> {
        if params.word_len_min == 0 || params.word_len_max < params.word_len_min {
            return Err(Error::Config("invalid word length range".into()));
        }
        let mut lexicons = BTreeMap::new();
        for (lang, alphabet) in inventory.alphabets() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"lexicon", lang.as_str().as_bytes()]));
            let mut words = BTreeSet::new();
            let mut attempts = 0;
            while words.len() < params.words_per_language && attempts < params.words_per_language * 100 {
                attempts += 1;
                let len = rng.gen_range(params.word_len_min..=params.word_len_max);
                let mut word = String::new();
                while word.chars().count() < len {
                    let c = alphabet[rng.gen_range(0..alphabet.len())];
                    word.push(c);
                    if rng.gen_bool(params.double_prob) {
                        word.push(c);
                    }
                }
                words.insert(word);
            }
            lexicons.insert(lang.clone(), words.into_iter().collect());
        }
        Self::new(lexicons, params.words_per_utterance_min, params.words_per_utterance_max)
    }

    pub fn lexicon(&self, language: &LanguageId) -> Option<&[String]> {
        self.lexicons.get(language).map(Vec::as_slice)
    }

    pub fn sample(&self, language: &LanguageId, rng: &mut impl Rng) -> Result<String> {
        let words = self
            .lexicons
            .get(language)
            .ok_or_else(|| Error::UnknownLanguage(language.to_string()))?;
        let n = rng.gen_range(self.words_min..=self.words_max);
        let picked: Vec<&str> = (0..n)
            .map(|_| words[rng.gen_range(0..words.len())].as_str())
            .collect();
        Ok(picked.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
    pub transcript: String,
    pub language: LanguageId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.utterance_id.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate utterance id {}",
                    e.utterance_id
                )));
            }
        }
        Ok(Manifest {
            base_dir: base_dir.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Every entry's language must be registered in `inventory`.
    pub fn validate(&self, inventory: &LabelInventory) -> Result<()> {
        for e in &self.entries {
            inventory.language_index(&e.language)?;
        }
        Ok(())
    }

    pub fn filter_languages(&self, languages: &[LanguageId]) -> Manifest {
        Manifest {
            base_dir: self.base_dir.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| languages.contains(&e.language))
                .cloned()
                .collect(),
        }
    }

    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix {
            frames: load_features(&self.resolve(entry))?,
            language: entry.language.clone(),
            transcript: entry.transcript.clone(),
            utterance_id: entry.utterance_id.clone(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::malformed(
                    path,
                    format!("line {} has {} columns, expected 4", n + 1, cols.len()),
                ));
            }
            entries.push(ManifestEntry {
                utterance_id: cols[0].to_string(),
                path: PathBuf::from(cols[1]),
                transcript: cols[2].to_string(),
                language: LanguageId::new(cols[3])
                    .map_err(|e| Error::malformed(path, format!("line {}: {e}", n + 1)))?,
            });
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::new(base, entries).map_err(|e| Error::malformed(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.utterance_id,
                e.path.display(),
                e.transcript,
                e.language
            ));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Disjoint train/validation/test manifests of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dir: PathBuf,
    pub train: Manifest,
    pub valid: Manifest,
    pub test: Manifest,
}

pub const ALPHABET_FILE: &str = "alphabets.toml";
pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self> {
        let load = |split: &str| Manifest::load(&dir.join(format!("{split}.tsv")));
        Ok(Corpus {
            dir: dir.to_path_buf(),
            train: load("train")?,
            valid: load("valid")?,
            test: load("test")?,
        })
    }

    pub fn inventory(&self) -> Result<LabelInventory> {
        LabelInventory::build(&crate::labelset::load_alphabets(&self.dir.join(ALPHABET_FILE))?)
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }
}

/// Splits `n` utterances 80/10/10 into (train, valid, test) counts.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let held = n / 10;
    (n - 2 * held, held, held)
}

/// Writes `count` utterances per language under `out_dir` (feature files in
/// `feats/`, one manifest per split, and the alphabet file).
pub fn generate_corpus(
    specs: &[SynthLanguageSpec],
    inventory: &LabelInventory,
    count: usize,
    sampler: &TextSampler,
    seed: u64,
    out_dir: &Path,
) -> Result<Corpus> {
    if specs.is_empty() {
        return Err(Error::Config("no language specs".into()));
    }
    if count == 0 {
        return Err(Error::Config("utterance count must be positive".into()));
    }
    let feats = out_dir.join("feats");
    fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
    save_alphabets(inventory, &out_dir.join(ALPHABET_FILE))?;

    let mut splits: [Vec<ManifestEntry>; 3] = Default::default();
    for spec in specs {
        let lang = spec.language.as_str();
        let mut text_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"text", lang.as_bytes()]));
        let (n_train, n_valid, _) = split_counts(count);
        for i in 0..count {
            let text = sampler.sample(&spec.language, &mut text_rng)?;
            let id = format!("{lang}_{i:06}");
            let utt_seed = derive_seed(seed, &[b"utt", id.as_bytes()]);
            let fm = synth_utterance(spec, inventory, &text, &id, utt_seed)?;
            let rel = PathBuf::from("feats").join(format!("{id}.pcf"));
            save_features(&fm.frames, &out_dir.join(&rel))?;
            let split = if i < n_train {
                0
            } else if i < n_train + n_valid {
                1
            } else {
                2
            };
            splits[split].push(ManifestEntry {
                utterance_id: id,
                path: rel,
                transcript: text,
                language: spec.language.clone(),
            });
        }
    }
    let [train, valid, test] = splits;
    let corpus = Corpus {
        dir: out_dir.to_path_buf(),
        train: Manifest::new(out_dir, train)?,
        valid: Manifest::new(out_dir, valid)?,
        test: Manifest::new(out_dir, test)?,
    };
    for (split, manifest) in SPLITS.iter().zip([&corpus.train, &corpus.valid, &corpus.test]) {
        manifest.save(&out_dir.join(format!("{split}.tsv")))?;
    }
    Ok(corpus)
}

/// Everything needed to synthesize a corpus, as read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub alphabets: BTreeMap<String, String>,
    #[serde(default = "default_count")]
    pub utterances_per_language: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub emission: EmissionParams,
    #[serde(default)]
    pub lexicon: LexiconParams,
}

fn default_count() -> usize {
    200
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn inventory(&self) -> Result<LabelInventory> {
        LabelInventory::from_strs(self.alphabets.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn generate(&self, out_dir: &Path) -> Result<Corpus> {
        let inventory = self.inventory()?;
        let specs = build_specs(&inventory, &self.emission, self.seed)?;
        let sampler = TextSampler::random(&inventory, &self.lexicon, self.seed)?;
        generate_corpus(
            &specs,
            &inventory,
            self.utterances_per_language,
            &sampler,
            self.seed,
            out_dir,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> LabelInventory {
        LabelInventory::from_strs([("L1", "abc"), ("L2", "bcd")]).unwrap()
    }

    fn params(sigma: f64, rho: f64) -> EmissionParams {
        EmissionParams {
            dim: 4,
            sigma,
            frames_min: 2,
            frames_max: 2,
            rho,
        }
    }

    #[test]
    fn zero_noise_emits_means() {
        let inv = inv();
        let specs = build_specs(&inv, &params(0.0, 0.5), 1).unwrap();
        let fm = synth_utterance(&specs[0], &inv, "abba", "u", 3).unwrap();
        let tokens = inv.tokenize("abba", &specs[0].language).unwrap().ids;
        assert_eq!(fm.frames.len(), 2 * tokens.len());
        for (i, k) in tokens.iter().enumerate() {
            assert_eq!(fm.frames.row(2 * i), specs[0].means[k].as_slice());
            assert_eq!(fm.frames.row(2 * i + 1), specs[0].means[k].as_slice());
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let inv = inv();
        let specs = build_specs(&inv, &EmissionParams { dim: 5, ..Default::default() }, 2).unwrap();
        let a = synth_utterance(&specs[1], &inv, "bcd db", "u", 9).unwrap();
        let b = synth_utterance(&specs[1], &inv, "bcd db", "u", 9).unwrap();
        assert_eq!(a, b);
        let c = synth_utterance(&specs[1], &inv, "bcd db", "u", 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_divergence_shares_means() {
        let inv = inv();
        let specs = build_specs(&inv, &params(0.1, 0.0), 4).unwrap();
        let b = inv.index_of_surface("b").unwrap();
        assert_eq!(specs[0].means[&b], specs[1].means[&b]);
        let diverged = build_specs(&inv, &params(0.1, 0.5), 4).unwrap();
        assert_ne!(diverged[0].means[&b], diverged[1].means[&b]);
    }

    #[test]
    fn means_independent_of_other_languages() {
        let full = inv();
        let solo = full.restrict(&[LanguageId::new("L2").unwrap()]).unwrap();
        let a = build_specs(&full, &params(0.1, 0.5), 4).unwrap();
        let b = build_specs(&solo, &params(0.1, 0.5), 4).unwrap();
        let d_full = full.index_of_surface("dd").unwrap();
        let d_solo = solo.index_of_surface("dd").unwrap();
        assert_eq!(a[1].means[&d_full], b[0].means[&d_solo]);
    }

    #[test]
    fn untokenizable_text_is_rejected() {
        let inv = inv();
        let specs = build_specs(&inv, &params(0.1, 0.5), 4).unwrap();
        assert!(matches!(
            synth_utterance(&specs[0], &inv, "dad", "u", 1),
            Err(Error::UnknownCharacter { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        let inv = inv();
        let mut p = params(0.1, 0.5);
        p.frames_min = 0;
        assert!(build_specs(&inv, &p, 0).is_err());
        let mut p = params(0.1, 0.5);
        p.frames_max = 1;
        assert!(build_specs(&inv, &p, 0).is_err());
        assert!(build_specs(&inv, &params(0.1, 1.5), 0).is_err());
    }

    #[test]
    fn corpus_split_and_determinism() {
        let inv = LabelInventory::from_strs([("L1", "abc"), ("L2", "bcd"), ("L3", "aef")]).unwrap();
        let specs = build_specs(&inv, &params(0.3, 0.5), 5).unwrap();
        let sampler = TextSampler::random(&inv, &LexiconParams::default(), 5).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let c1 = generate_corpus(&specs, &inv, 200, &sampler, 5, d1.path()).unwrap();
        let c2 = generate_corpus(&specs, &inv, 200, &sampler, 5, d2.path()).unwrap();
        assert_eq!(c1.total(), 600);
        assert_eq!(c1.train.entries, c2.train.entries);
        assert_eq!((c1.train.len(), c1.valid.len(), c1.test.len()), (480, 60, 60));
        for lang in inv.languages() {
            let n = |m: &Manifest| m.entries.iter().filter(|e| &e.language == lang).count();
            assert_eq!((n(&c1.train), n(&c1.valid), n(&c1.test)), (160, 20, 20));
        }
        for split in SPLITS {
            let a = fs::read(d1.path().join(format!("{split}.tsv"))).unwrap();
            let b = fs::read(d2.path().join(format!("{split}.tsv"))).unwrap();
            assert_eq!(a, b);
        }
        let e = &c1.test.entries[3];
        assert_eq!(
            fs::read(d1.path().join(&e.path)).unwrap(),
            fs::read(d2.path().join(&e.path)).unwrap()
        );

        let reopened = Corpus::open(d1.path()).unwrap();
        assert_eq!(reopened.train.entries, c1.train.entries);
        assert_eq!(reopened.inventory().unwrap(), inv);
        let fm = reopened.test.load_entry(e).unwrap();
        assert_eq!(fm.transcript, e.transcript);
        assert!(generate_corpus(&specs, &inv, 0, &sampler, 5, d1.path()).is_err());
        assert!(generate_corpus(&[], &inv, 1, &sampler, 5, d1.path()).is_err());
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "a\tx.pcf\thi\tL1\na\ty.pcf\tho\tL1\n").unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Malformed { .. })));
        fs::write(&path, "a\tx.pcf\thi\n").unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Malformed { .. })));
        fs::write(&path, "a\tx.pcf\thi\tL9\n").unwrap();
        let m = Manifest::load(&path).unwrap();
        assert!(m.validate(&inv()).is_err());
    }

    #[test]
    fn lexicon_words_are_tokenizable() {
        let inv = inv();
        let sampler = TextSampler::random(&inv, &LexiconParams::default(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for lang in inv.languages() {
            for _ in 0..50 {
                let text = sampler.sample(lang, &mut rng).unwrap();
                inv.tokenize(&text, lang).unwrap();
            }
        }
    }

    #[test]
    fn synth_config_parses_with_defaults() {
        let cfg = SynthConfig::from_toml("[alphabets]\nL1 = \"ab\"\nL2 = \"bc\"\n").unwrap();
        assert_eq!(cfg.utterances_per_language, 200);
        assert_eq!(cfg.emission.dim, 80);
        assert!(SynthConfig::from_toml("bogus = 1\n[alphabets]\nL1 = \"a\"").is_err());
    }
}
