use std::collections::BTreeSet;

use super::{ColumnSpec, DataError, Schema, Table, Value};

/// Cuts `text` into consecutive non-overlapping `width`-character rows.
///
/// Every column is categorical over the corpus alphabet (sorted distinct
/// characters), so the result is meant for a shared vocabulary. A trailing
/// remainder shorter than `width` is dropped.
pub fn char_corpus_to_table(text: &str, width: usize) -> Result<(Schema, Table), DataError> {
    if text.is_empty() {
        return Err(DataError::EmptyText);
    }
    let chars: Vec<char> = text.chars().collect();
    if width == 0 || chars.len() < width {
        return Err(DataError::TooFewRows {
            needed: width.max(1),
            got: chars.len(),
        });
    }
    let alphabet: Vec<char> = chars.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let categories: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let cat_refs: Vec<&str> = categories.iter().map(String::as_str).collect();
    let columns = (1..=width)
        .map(|i| ColumnSpec::categorical(format!("c{i}"), &cat_refs))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = chars
        .chunks_exact(width)
        .map(|chunk| {
            chunk
                .iter()
                .map(|c| Value::Category(alphabet.binary_search(c).expect("in alphabet") as u32))
                .collect()
        })
        .collect();
    Ok((Schema::new(columns)?, Table { rows }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count_and_content() {
        let text: String = "abcdefghij".repeat(10);
        let (schema, table) = char_corpus_to_table(&text, 50).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(schema.len(), 50);

        let (schema, table) = char_corpus_to_table("abab", 2).unwrap();
        assert_eq!(schema.columns()[0].categories().unwrap(), ["a", "b"]);
        let a = Value::Category(0);
        let b = Value::Category(1);
        assert_eq!(table.rows, vec![vec![a, b], vec![a, b]]);
    }

    #[test]
    fn alphabet_is_distinct_characters() {
        let text = "the quick brown fox jumps";
        let distinct: BTreeSet<char> = text.chars().collect();
        let (schema, _) = char_corpus_to_table(text, 5).unwrap();
        assert_eq!(schema.columns()[0].categories().unwrap().len(), distinct.len());
    }

    #[test]
    fn errors() {
        assert!(matches!(char_corpus_to_table("", 3), Err(DataError::EmptyText)));
        assert!(char_corpus_to_table("ab", 3).is_err());
    }
}
