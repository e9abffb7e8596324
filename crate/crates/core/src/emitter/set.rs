use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{synth_factored, synth_posteriorgram, EmissionTarget, EmitterConfig};
use crate::acoustic::{FactoredScores, Posteriorgram};
use crate::error::{read_to_string, write_string, Error, Result};

/// What a set is synthesized as.
#[derive(Clone, Debug)]
pub enum SynthTarget {
    Posteriorgram(EmissionTarget),
    /// Factored hybrid scores over these labels (silence included).
    Factored(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Emission {
    Posteriorgram(Posteriorgram),
    Factored(FactoredScores),
}

impl Emission {
    pub fn num_frames(&self) -> usize {
        match self {
            Emission::Posteriorgram(p) => p.num_frames(),
            Emission::Factored(f) => f.num_frames(),
        }
    }

    pub fn as_posteriorgram(&self) -> Option<&Posteriorgram> {
        match self {
            Emission::Posteriorgram(p) => Some(p),
            Emission::Factored(_) => None,
        }
    }

    pub fn as_factored(&self) -> Option<&FactoredScores> {
        match self {
            Emission::Factored(f) => Some(f),
            Emission::Posteriorgram(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub words: Vec<String>,
    pub emission: Emission,
}

/// Synthesized utterances with the seed and temperature that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSet {
    pub seed: u64,
    pub temperature: f64,
    pub utterances: Vec<SynthUtterance>,
}

/// Synthesizes one emission per `(id, words)`; `units` maps words to the
/// reference labels. Utterance `i` uses noise stream `i`.
pub fn synth_set(
    utterances: &[(String, Vec<String>)],
    units: &(dyn Fn(&[String]) -> Result<Vec<String>> + Sync),
    target: &SynthTarget,
    cfg: &EmitterConfig,
) -> Result<SynthSet> {
    cfg.validate()?;
    let out = utterances
        .par_iter()
        .enumerate()
        .map(|(i, (id, words))| {
            let reference = units(words)?;
            let emission = match target {
                SynthTarget::Posteriorgram(t) => {
                    Emission::Posteriorgram(synth_posteriorgram(t, &reference, cfg, i as u64)?)
                }
                SynthTarget::Factored(labels) => {
                    Emission::Factored(synth_factored(labels, &reference, cfg, i as u64)?)
                }
            };
            Ok(SynthUtterance {
                id: id.clone(),
                words: words.clone(),
                emission,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthSet {
        seed: cfg.seed,
        temperature: cfg.temperature,
        utterances: out,
    })
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty()
        || id.contains(['\t', '\n', '/', '\\'])
        || id.starts_with('#')
        || id.starts_with('.')
    {
        return Err(Error::InvalidArgument(format!(
            "utterance id {id:?} cannot be used as a file name"
        )));
    }
    Ok(())
}

impl SynthSet {
    /// Writes the manifest and one score file (or factor triple) per
    /// utterance next to it. Manifest lines are `id<TAB>path<TAB>words` with
    /// paths relative to the manifest; `#` lines carry seed and temperature.
    pub fn save(&self, manifest: impl AsRef<Path>) -> Result<()> {
        let manifest = manifest.as_ref();
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let mut text = format!(
            "# seed\t{}\n# temperature\t{}\n",
            self.seed, self.temperature
        );
        for u in &self.utterances {
            check_id(&u.id)?;
            let rel = match &u.emission {
                Emission::Posteriorgram(p) => {
                    let rel = format!("{}.pgrm", u.id);
                    p.save(dir.join(&rel))?;
                    rel
                }
                Emission::Factored(f) => {
                    f.save(dir.join(&u.id))?;
                    u.id.clone()
                }
            };
            text.push_str(&format!("{}\t{}\t{}\n", u.id, rel, u.words.join(" ")));
        }
        write_string(manifest, &text)
    }

    /// Reads a manifest. A path naming an existing file is a posteriorgram;
    /// otherwise it is the base name of a factor triple.
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self> {
        let manifest = manifest.as_ref();
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let bad = |line: usize, msg: String| {
            Error::InvalidArgument(format!("{}:{line}: {msg}", manifest.display()))
        };
        let mut set = SynthSet {
            seed: 0,
            temperature: 0.0,
            utterances: Vec::new(),
        };
        for (i, line) in read_to_string(manifest)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta.trim().split_once('\t').unwrap_or((meta.trim(), ""));
                match key {
                    "seed" => {
                        set.seed = value
                            .parse()
                            .map_err(|_| bad(i + 1, format!("bad seed {value:?}")))?
                    }
                    "temperature" => {
                        set.temperature = value
                            .parse()
                            .map_err(|_| bad(i + 1, format!("bad temperature {value:?}")))?
                    }
                    _ => {}
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(
                    i + 1,
                    format!("expected 3 tab-separated fields, got {}", cols.len()),
                ));
            }
            let path: PathBuf = dir.join(cols[1]);
            let emission = if path.is_file() {
                Emission::Posteriorgram(Posteriorgram::load(&path)?)
            } else {
                Emission::Factored(FactoredScores::load(&path)?)
            };
            set.utterances.push(SynthUtterance {
                id: cols[0].to_owned(),
                words: cols[2].split_whitespace().map(str::to_owned).collect(),
                emission,
            });
        }
        Ok(set)
    }
}
