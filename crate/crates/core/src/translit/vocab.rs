use std::collections::HashMap;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Character vocabulary. Ids 0..4 are the reserved symbols, characters
/// follow in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut vocab = Vocab::default();
        for c in chars {
            vocab.insert(c);
        }
        vocab
    }

    fn insert(&mut self, c: char) {
        if !self.index.contains_key(&c) {
            self.index.insert(c, RESERVED.len() + self.chars.len());
            self.chars.push(c);
        }
    }

    /// Total size including reserved symbols.
    pub fn len(&self) -> usize {
        RESERVED.len() + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Non-reserved characters in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn symbol(&self, id: usize) -> Option<String> {
        match id {
            i if i < RESERVED.len() => Some(RESERVED[i].to_string()),
            i => self.chars.get(i - RESERVED.len()).map(char::to_string),
        }
    }

    /// Character ids of `s`; unknown characters map to UNK.
    pub fn encode(&self, s: &str) -> Vec<usize> {
        s.chars().map(|c| self.id(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_prefix_and_bijection() {
        let v = Vocab::from_chars("abca".chars());
        assert_eq!(v.len(), 7);
        assert_eq!(v.encode("cab"), vec![6, 4, 5]);
        assert_eq!(v.id('z'), UNK);
        for (id, reserved) in RESERVED.iter().enumerate() {
            assert_eq!(&v.symbol(id).unwrap(), reserved);
        }
        for id in RESERVED.len()..v.len() {
            let sym = v.symbol(id).unwrap();
            assert_eq!(v.id(sym.chars().next().unwrap()), id);
        }
        assert_eq!(v.symbol(7), None);
    }
}
