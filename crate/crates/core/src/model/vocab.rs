use std::collections::{BTreeSet, HashMap};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Tokens with fixed ids, in id order. Ids 4..8 are the augmented-language
/// markers.
pub const RESERVED: [&str; 8] = ["<pad>", "<s>", "</s>", "<unk>", "[", "]", "|", "="];

fn placeholder(i: usize) -> String {
    format!("<oov{i}>")
}

fn placeholder_index(t: &str) -> Option<usize> {
    t.strip_prefix("<oov")?.strip_suffix('>')?.parse().ok()
}

fn is_placeholder(t: &str) -> bool {
    placeholder_index(t).is_some()
}

/// Source ids plus the rare words behind each placeholder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceIds {
    pub ids: Vec<usize>,
    pub oov: Vec<String>,
}

/// Closed whitespace-token vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocab {
    /// Reserved ids first, then every other token in lexicographic order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let rest: BTreeSet<&str> = tokens
            .into_iter()
            .filter(|t| !RESERVED.contains(t))
            .collect();
        let id_to_token: Vec<String> = RESERVED
            .iter()
            .copied()
            .chain(rest)
            .map(str::to_string)
            .collect();
        Self::from_tokens(id_to_token)
    }

    /// Like [`Vocab::build`], but keeps only tokens seen at least
    /// `min_count` times; `always` tokens are kept regardless. The
    /// placeholders `<oov0>..<oov{n-1}>` follow the reserved ids.
    pub fn build_min_count<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        always: impl IntoIterator<Item = &'a str>,
        min_count: usize,
        placeholders: usize,
    ) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let rest: BTreeSet<&str> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(t, _)| t)
            .chain(always)
            .filter(|t| !RESERVED.contains(t) && !is_placeholder(t))
            .collect();
        let id_to_token = RESERVED
            .iter()
            .map(|t| t.to_string())
            .chain((0..placeholders).map(placeholder))
            .chain(rest.into_iter().map(str::to_string))
            .collect();
        Self::from_tokens(id_to_token)
    }

    /// Restores a vocabulary from its id-ordered token list.
    pub fn from_tokens(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            id_to_token,
            token_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.id_to_token.get(id).map(String::as_str).unwrap_or(RESERVED[UNK])
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// `BOS tokens EOS`, the form expected for decoder targets.
    pub fn encode_target<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS);
        ids
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    /// Encodes a source sentence, giving the i-th distinct out-of-vocabulary
    /// word the placeholder `<oov i>` while placeholders last. Repeats of a
    /// word share its placeholder, so the model can copy rare words by
    /// position.
    pub fn encode_source<S: AsRef<str>>(&self, tokens: &[S]) -> SourceIds {
        let mut oov: Vec<String> = Vec::new();
        let ids = tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if let Some(&id) = self.token_to_id.get(t) {
                    return id;
                }
                if let Some(i) = oov.iter().position(|w| w == t) {
                    return self.token_to_id[&placeholder(i)];
                }
                match self.token_to_id.get(&placeholder(oov.len())) {
                    Some(&id) => {
                        oov.push(t.to_string());
                        id
                    }
                    None => UNK,
                }
            })
            .collect();
        SourceIds { ids, oov }
    }

    /// [`Vocab::encode_target`] with the placeholders of the matching source.
    pub fn encode_target_with<S: AsRef<str>>(&self, tokens: &[S], oov: &[String]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        ids.extend(tokens.iter().map(|t| {
            let t = t.as_ref();
            match self.token_to_id.get(t) {
                Some(&id) => id,
                None => oov
                    .iter()
                    .position(|w| w == t)
                    .and_then(|i| self.token_to_id.get(&placeholder(i)).copied())
                    .unwrap_or(UNK),
            }
        }));
        ids.push(EOS);
        ids
    }

    /// Inverse of the placeholder mapping: `<oov i>` becomes the i-th rare
    /// source word.
    pub fn decode_with(&self, ids: &[usize], oov: &[String]) -> Vec<String> {
        ids.iter()
            .map(|&i| {
                let t = self.token(i);
                placeholder_index(t)
                    .and_then(|k| oov.get(k))
                    .cloned()
                    .unwrap_or_else(|| t.to_string())
            })
            .collect()
    }
}
