/// Tokens ending in '.' that never close a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "z.B.", "z.b.", "Dr.", "Prof.", "usw.", "bzw.", "ca.", "etc.", "Nr.", "u.a.", "d.h.", "Hr.",
    "Fr.", "Hrn.", "St.", "ggf.", "vgl.", "evtl.", "inkl.", "Str.", "Jh.", "bspw.", "u.U.", "o.ä.",
    "z.T.", "Mio.", "Mrd.", "Tel.", "Abs.", "Mr.", "Mrs.", "e.g.", "i.e.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '»' | '«' | '“' | '”' | '’')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '»' | '«' | '„' | '“' | '‘')
}

/// Splits text at '.', '!' or '?' (plus any directly following
/// terminators or closing quotes) when followed by whitespace or the end
/// of input. Known abbreviations do not end a sentence. Sentences are
/// trimmed; empty ones are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut seg_start = 0;
    let mut word_start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            word_start = pos + c.len_utf8();
            i += 1;
            continue;
        }
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        let word = text[word_start..end].trim_start_matches(is_opener);
        let abbreviation = c == '.' && j == i + 1 && ABBREVIATIONS.contains(&word);
        if at_boundary && !abbreviation {
            let sentence = text[seg_start..end].trim();
            if !sentence.is_empty() {
                out.push(sentence.to_string());
            }
            seg_start = end;
        }
        i = j;
    }
    let tail = text[seg_start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}
