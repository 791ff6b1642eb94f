use std::collections::HashSet;

use super::*;
use crate::data::{read_csv, write_csv, EncodedDataset, TokenVocab};

fn catalan_table(max: usize) -> Vec<u64> {
    let mut c = vec![1u64; max + 1];
    for n in 1..=max {
        c[n] = (0..n).map(|i| c[i] * c[n - 1 - i]).sum();
    }
    c
}

/// Membership by dynamic programming straight from `X → ( X ) X | ε`:
/// `derives[i][j]` says whether `s[i..j]` is generated by X.
fn grammar_accepts(s: &[u8]) -> bool {
    let n = s.len();
    let mut derives = vec![vec![false; n + 1]; n + 1];
    for i in 0..=n {
        derives[i][i] = true;
    }
    for len in 1..=n {
        for i in 0..=n - len {
            let j = i + len;
            derives[i][j] = s[i] == b'('
                && (i + 1..j).any(|m| s[m] == b')' && derives[i + 1][m] && derives[m + 1][j]);
        }
    }
    derives[0][n]
}

#[test]
fn small_cases() {
    assert_eq!(generate_dyck(2).unwrap(), vec!["()"]);
    let six = generate_dyck(6).unwrap();
    assert!(six.contains(&"((()))".to_string()));
    assert!(six.contains(&"(()())".to_string()));
    assert_eq!(six.len(), 5);
    assert_eq!(generate_dyck(7).unwrap(), Vec::<String>::new());
    assert_eq!(generate_dyck(0), Err(DyckError::Length(0)));
    assert_eq!(generate_dyck(26), Err(DyckError::Length(26)));
}

#[test]
fn enumeration_counts_are_catalan() {
    let catalan = catalan_table(12);
    for k in (2..=16).step_by(2) {
        let all = generate_dyck(k).unwrap();
        assert_eq!(all.len() as u64, catalan[k / 2], "k={k}");
        assert!(all.windows(2).all(|w| w[0] < w[1]), "sorted and distinct");
        assert!(all.iter().all(|s| s.len() == k && is_valid_dyck(s).unwrap()));
    }
}

#[test]
fn dyck_twenty_has_16796_rows() {
    let all = generate_dyck(20).unwrap();
    assert_eq!(all.len() as u64, catalan_table(10)[10]);
    assert_eq!(all.len(), 16796);
    assert_eq!(all.iter().collect::<HashSet<_>>().len(), all.len());
    assert_eq!(validity_rate(&all).unwrap(), 1.0);
}

#[test]
fn validator_examples() {
    assert!(is_valid_dyck("((()))").unwrap());
    assert!(!is_valid_dyck(")(())(").unwrap());
    assert!(is_valid_dyck("").unwrap());
    assert!(!is_valid_dyck("(()").unwrap());
    assert_eq!(is_valid_dyck("(a)"), Err(DyckError::ForeignChar('a')));
}

#[test]
fn validator_agrees_with_grammar_on_short_strings() {
    let mut checked = 0;
    for len in 0..=12usize {
        for bits in 0..(1u32 << len) {
            let s: Vec<u8> = (0..len)
                .map(|i| if bits >> i & 1 == 0 { b'(' } else { b')' })
                .collect();
            let text = std::str::from_utf8(&s).unwrap();
            assert_eq!(is_valid_dyck(text).unwrap(), grammar_accepts(&s), "{text}");
            checked += 1;
        }
    }
    assert_eq!(checked, (1 << 13) - 1);
}

#[test]
fn validity_rate_edges() {
    assert_eq!(validity_rate(&["((((", "(((("]).unwrap(), 0.0);
    assert_eq!(validity_rate(&["()", "(("]).unwrap(), 0.5);
    assert_eq!(validity_rate::<&str>(&[]), Err(DyckError::EmptySample));
}

#[test]
fn table_encoding_roundtrips_through_csv_and_tokens() {
    let k = 6;
    let strings = generate_dyck(k).unwrap();
    let schema = dyck_schema(k).unwrap();
    let table = strings_to_table(&strings).unwrap();
    let mut csv = Vec::new();
    write_csv(&mut csv, &schema, &table).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("c1,c2,c3,c4,c5,c6\n(,(,(,),),)\n"), "{text}");
    let back = read_csv(&csv[..], &schema).unwrap();
    assert_eq!(table_to_strings(&back), strings);

    let vocab = TokenVocab::shared(&schema).unwrap();
    assert_eq!(vocab.total(), 2);
    let encoded = EncodedDataset::encode(&table, &schema, &vocab).unwrap();
    assert_eq!(encoded.row(0), &[0, 0, 0, 1, 1, 1]);
}
