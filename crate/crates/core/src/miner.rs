//! Verb / direct-object mining from dependency-parsed text.
//!
//! Input is CoNLL-U. A pair `(verb, object)` is emitted for every token
//! attached to a `VERB` head by one of the accepted object relations
//! (`obj` in UD v2, `dobj` in UD v1). Mined pairs are noisy; `filter_pairs`
//! narrows them with whitelists and a frequency floor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Relations treated as direct objects.
pub const OBJECT_RELATIONS: [&str; 2] = ["obj", "dobj"];

/// Concrete verbs shipped as the default verb whitelist.
pub const DEFAULT_VERB_WHITELIST: &str = include_str!("../data/verbs.txt");

/// Object lemmas shipped as the default object whitelist.
pub const DEFAULT_OBJECT_WHITELIST: &str = include_str!("../data/objects.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepToken {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub sentence_id: String,
    pub tokens: Vec<DepToken>,
}

impl ParsedSentence {
    /// Token at a 1-based index.
    pub fn token(&self, index: usize) -> Option<&DepToken> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    fn validate(&self) -> Result<()> {
        let structure = |message: String| Error::Structure {
            sentence: self.sentence_id.clone(),
            message,
        };
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(structure(format!(
                    "token indices not contiguous: expected {}, found {}",
                    i + 1,
                    tok.index
                )));
            }
            if tok.head > self.tokens.len() {
                return Err(structure(format!(
                    "token {} has head {} outside 0..={}",
                    tok.index,
                    tok.head,
                    self.tokens.len()
                )));
            }
            if tok.head == tok.index {
                return Err(structure(format!("token {} is its own head", tok.index)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedPair {
    pub verb: String,
    pub object: String,
    pub frequency: usize,
    pub source_ids: Vec<String>,
}

impl MinedPair {
    pub fn new(verb: impl Into<String>, object: impl Into<String>, source: impl Into<String>) -> Self {
        MinedPair {
            verb: verb.into(),
            object: object.into(),
            frequency: 1,
            source_ids: vec![source.into()],
        }
    }

    fn key(&self) -> (&str, &str) {
        (&self.verb, &self.object)
    }
}

/// Parses CoNLL-U text into sentences.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`3.1`) are skipped.
/// Lemmas are lowercased; an unspecified lemma (`_`) falls back to the
/// lowercased surface form.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut in_block = false;

    let flush = |tokens: &mut Vec<DepToken>, sent_id: &mut Option<String>, sentences: &mut Vec<ParsedSentence>| -> Result<()> {
        let ordinal = sentences.len() + 1;
        let sentence = ParsedSentence {
            sentence_id: sent_id.take().unwrap_or_else(|| ordinal.to_string()),
            tokens: std::mem::take(tokens),
        };
        sentence.validate()?;
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if in_block {
                flush(&mut tokens, &mut sent_id, &mut sentences)?;
                in_block = false;
            }
            continue;
        }
        in_block = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if let Some(tok) = parse_token_line(line, line_no)? {
            tokens.push(tok);
        }
    }
    if in_block {
        flush(&mut tokens, &mut sent_id, &mut sentences)?;
    }
    Ok(sentences)
}

fn parse_token_line(line: &str, line_no: usize) -> Result<Option<DepToken>> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 10 tab-separated columns, found {}", cols.len()),
        });
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let int = |field: &str, name: &str| -> Result<usize> {
        field.parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("{name} is not a non-negative integer: {field:?}"),
        })
    };
    let index = int(id, "ID")?;
    if index == 0 {
        return Err(Error::Parse {
            line: line_no,
            message: "ID must be at least 1".into(),
        });
    }
    let head = int(cols[6], "HEAD")?;
    let form = cols[1].to_string();
    let lemma = match cols[2] {
        "_" | "" => form.to_lowercase(),
        l => l.to_lowercase(),
    };
    if lemma.is_empty() {
        return Err(Error::Parse {
            line: line_no,
            message: "empty lemma".into(),
        });
    }
    Ok(Some(DepToken {
        index,
        form,
        lemma,
        upos: cols[3].to_string(),
        head,
        deprel: cols[7].to_string(),
    }))
}

/// Verb/object pairs under the default relation set.
pub fn extract_pairs(sentence: &ParsedSentence) -> Vec<MinedPair> {
    extract_pairs_with(sentence, &OBJECT_RELATIONS)
}

pub fn extract_pairs_with<S: AsRef<str>>(sentence: &ParsedSentence, relations: &[S]) -> Vec<MinedPair> {
    sentence
        .tokens
        .iter()
        .filter(|tok| relations.iter().any(|r| r.as_ref() == tok.deprel))
        .filter_map(|tok| {
            let head = sentence.token(tok.head)?;
            (head.upos == "VERB").then(|| MinedPair::new(&head.lemma, &tok.lemma, &sentence.sentence_id))
        })
        .collect()
}

/// Merges equal `(verb, object)` pairs, summing frequencies; sorted output.
pub fn aggregate_pairs(pairs: impl IntoIterator<Item = MinedPair>) -> Vec<MinedPair> {
    let mut merged: BTreeMap<(String, String), MinedPair> = BTreeMap::new();
    for pair in pairs {
        match merged.get_mut(&(pair.verb.clone(), pair.object.clone())) {
            Some(existing) => {
                existing.frequency += pair.frequency;
                existing.source_ids.extend(pair.source_ids);
            }
            None => {
                merged.insert((pair.verb.clone(), pair.object.clone()), pair);
            }
        }
    }
    merged.into_values().collect()
}

/// Keeps whitelisted pairs at or above `min_frequency`, sorted by (verb, object).
pub fn filter_pairs(
    pairs: &[MinedPair],
    verb_whitelist: Option<&BTreeSet<String>>,
    object_whitelist: &BTreeSet<String>,
    min_frequency: usize,
) -> Result<Vec<MinedPair>> {
    if object_whitelist.is_empty() {
        return Err(Error::config("object whitelist is empty"));
    }
    let mut kept: Vec<MinedPair> = pairs
        .iter()
        .filter(|p| object_whitelist.contains(&p.object))
        .filter(|p| verb_whitelist.is_none_or(|w| w.contains(&p.verb)))
        .filter(|p| p.frequency >= min_frequency)
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(kept)
}

/// Mines every sentence of every document, then aggregates.
pub fn mine_documents<'a, S: AsRef<str>>(
    documents: impl IntoIterator<Item = &'a str>,
    relations: &[S],
) -> Result<Vec<MinedPair>> {
    let mut all = Vec::new();
    for doc in documents {
        for sentence in parse_conllu(doc)? {
            all.extend(extract_pairs_with(&sentence, relations));
        }
    }
    Ok(aggregate_pairs(all))
}

/// One lemma per line; blank lines and `#` comments ignored.
pub fn parse_whitelist(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// `verb<TAB>object<TAB>frequency`, LF-terminated, in input order.
pub fn pairs_to_tsv(pairs: &[MinedPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}\t{}", p.verb, p.object, p.frequency);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUT_BREAD: &str = "# sent_id = s1\n\
# text = she cut the bread\n\
1\tshe\tshe\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n\
2\tcut\tcut\tVERB\tVBD\t_\t0\troot\t_\t_\n\
3\tthe\tthe\tDET\tDT\t_\t4\tdet\t_\t_\n\
4\tbread\tbread\tNOUN\tNN\t_\t2\tobj\t_\t_\n";

    const VIOLIN_SUIT: &str = "1\tHe\the\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n\
2\tplayed\tplay\tVERB\tVBD\t_\t0\troot\t_\t_\n\
3\tthe\tthe\tDET\tDT\t_\t4\tdet\t_\t_\n\
4\tviolin\tviolin\tNOUN\tNN\t_\t2\tobj\t_\t_\n\
5\tand\tand\tCCONJ\tCC\t_\t6\tcc\t_\t_\n\
6\twore\twear\tVERB\tVBD\t_\t2\tconj\t_\t_\n\
7\ta\ta\tDET\tDT\t_\t8\tdet\t_\t_\n\
8\tsuit\tsuit\tNOUN\tNN\t_\t6\tobj\t_\t_\n";

    fn pair(v: &str, o: &str, f: usize) -> MinedPair {
        MinedPair {
            verb: v.into(),
            object: o.into(),
            frequency: f,
            source_ids: (0..f).map(|i| format!("x{i}")).collect(),
        }
    }

    #[test]
    fn empty_input_has_no_sentences() {
        assert!(parse_conllu("").unwrap().is_empty());
    }

    #[test]
    fn parses_cut_the_bread() {
        let sents = parse_conllu(CUT_BREAD).unwrap();
        assert_eq!(sents.len(), 1);
        let s = &sents[0];
        assert_eq!(s.sentence_id, "s1");
        assert_eq!(s.tokens.len(), 4);
        let bread = &s.tokens[3];
        assert_eq!(bread.form, "bread");
        assert_eq!(bread.deprel, "obj");
        assert_eq!(bread.head, 2);
        assert_eq!(s.token(bread.head).unwrap().form, "cut");
    }

    #[test]
    fn sentence_id_falls_back_to_ordinal() {
        let text = format!("{VIOLIN_SUIT}\n{VIOLIN_SUIT}");
        let sents = parse_conllu(&text).unwrap();
        assert_eq!(sents[0].sentence_id, "1");
        assert_eq!(sents[1].sentence_id, "2");
    }

    #[test]
    fn nine_columns_is_a_parse_error_with_line() {
        let text = "# c\n1\tshe\tshe\tPRON\tPRP\t_\t0\troot\t_\n";
        match parse_conllu(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_integer_head_is_a_parse_error() {
        let text = "1\tshe\tshe\tPRON\tPRP\t_\tx\troot\t_\t_\n";
        assert!(matches!(parse_conllu(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn head_out_of_range_is_structural() {
        let text = "# sent_id = bad\n1\tshe\tshe\tPRON\tPRP\t_\t5\troot\t_\t_\n";
        match parse_conllu(text) {
            Err(Error::Structure { sentence, .. }) => assert_eq!(sentence, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n\
2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n\
2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n";
        let sents = parse_conllu(text).unwrap();
        assert_eq!(sents[0].tokens.len(), 2);
    }

    #[test]
    fn extracts_single_pair() {
        let s = &parse_conllu(CUT_BREAD).unwrap()[0];
        let pairs = extract_pairs(s);
        assert_eq!(pairs, vec![MinedPair::new("cut", "bread", "s1")]);
    }

    #[test]
    fn extracts_pairs_in_token_order() {
        let s = &parse_conllu(VIOLIN_SUIT).unwrap()[0];
        let got: Vec<_> = extract_pairs(s).into_iter().map(|p| (p.verb, p.object)).collect();
        assert_eq!(
            got,
            vec![("play".to_string(), "violin".to_string()), ("wear".to_string(), "suit".to_string())]
        );
    }

    #[test]
    fn no_verbs_no_pairs() {
        let text = "1\tcoffee\tcoffee\tNOUN\t_\t_\t0\troot\t_\t_\n\
2\tcups\tcup\tNOUN\t_\t_\t1\tobj\t_\t_\n";
        let s = &parse_conllu(text).unwrap()[0];
        assert!(extract_pairs(s).is_empty());
    }

    #[test]
    fn filter_drops_abstract_verbs() {
        let pairs = vec![pair("name", "suit", 9), pair("wear", "suit", 4)];
        let verbs: BTreeSet<String> = ["wear", "cut"].iter().map(|s| s.to_string()).collect();
        let objects: BTreeSet<String> = ["suit".to_string()].into();
        let kept = filter_pairs(&pairs, Some(&verbs), &objects, 1).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].verb, "wear");
    }

    #[test]
    fn filter_disjoint_objects_and_threshold() {
        let objects: BTreeSet<String> = ["hammer".to_string()].into();
        assert!(filter_pairs(&[pair("cut", "bread", 2)], None, &objects, 1).unwrap().is_empty());
        let objects: BTreeSet<String> = ["bread".to_string()].into();
        assert!(filter_pairs(&[pair("cut", "bread", 2)], None, &objects, 3).unwrap().is_empty());
    }

    #[test]
    fn filter_rejects_empty_object_whitelist() {
        assert!(matches!(
            filter_pairs(&[pair("cut", "bread", 1)], None, &BTreeSet::new(), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn aggregate_merges_and_sorts() {
        assert!(aggregate_pairs(vec![]).is_empty());
        let merged = aggregate_pairs(vec![MinedPair::new("cut", "bread", "s1"), MinedPair::new("cut", "bread", "s2")]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].frequency, 2);
        assert_eq!(merged[0].source_ids, vec!["s1", "s2"]);

        let scrambled = vec![
            MinedPair::new("wear", "suit", "a"),
            MinedPair::new("cut", "cleaver", "b"),
            MinedPair::new("contain", "bucket", "c"),
        ];
        let sorted: Vec<_> = aggregate_pairs(scrambled).into_iter().map(|p| p.verb).collect();
        assert_eq!(sorted, vec!["contain", "cut", "wear"]);
    }

    #[test]
    fn tsv_format() {
        let tsv = pairs_to_tsv(&[pair("cut", "bread", 2)]);
        assert_eq!(tsv, "cut\tbread\t2\n");
    }

    #[test]
    fn default_whitelists_are_nonempty_lowercase() {
        for text in [DEFAULT_VERB_WHITELIST, DEFAULT_OBJECT_WHITELIST] {
            let w = parse_whitelist(text);
            assert!(!w.is_empty());
            assert!(w.iter().all(|l| *l == l.to_lowercase()));
        }
    }
}
