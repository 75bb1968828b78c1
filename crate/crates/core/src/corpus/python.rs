//! Indentation-aware Python definition extractor.
//!
//! Works in two passes. The lexer folds physical lines into logical lines
//! (bracket continuation, backslash continuation, multi-line strings) and
//! drops comments and blank lines. The structural pass then validates the
//! indentation stack and turns `def`/`class` headers into entities whose span
//! runs from the first decorator through the last logical line of the body.
//!
//! Anything the lexer or structural pass rejects marks the whole file as
//! unparseable; the file then contributes no entities.

use super::{CodeEntity, EntityExtractor, EntityKind, Extraction, LineSpan, SourceFile};
use regex::Regex;
use std::sync::LazyLock;

static DEF_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:async\s+)?def\s+([^\W\d]\w*)\s*[(\[]").unwrap());
static CLASS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^class\s+([^\W\d]\w*)\s*[(\[:]").unwrap());
static DEF_KEYWORD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:async\s+def|def|class)\b").unwrap());

#[derive(Debug, Clone, Copy, Default)]
pub struct PythonExtractor;

impl EntityExtractor for PythonExtractor {
    fn extract(&self, file: &SourceFile) -> Extraction {
        match extract_python(&file.path, &file.content) {
            Ok(entities) => Extraction {
                entities,
                parse_error: None,
            },
            Err(err) => Extraction::failed(err),
        }
    }
}

#[derive(Debug, Clone)]
struct LogicalLine {
    start: usize,
    end: usize,
    indent: usize,
    /// Source with comments removed and string literals collapsed to `""`.
    code: String,
}

fn lex(source: &str) -> Result<Vec<LogicalLine>, String> {
    let chars: Vec<char> = source.chars().collect();
    let mut lines = Vec::new();
    let mut i = 0;
    let mut line_no = 1;
    let mut brackets: Vec<(char, usize)> = Vec::new();
    let mut current: Option<LogicalLine> = None;

    while i < chars.len() {
        if current.is_none() {
            // Start of a physical line outside any continuation.
            let mut indent = 0;
            while i < chars.len() {
                match chars[i] {
                    ' ' => indent += 1,
                    '\t' => indent = (indent / 8 + 1) * 8,
                    '\x0c' => indent = 0,
                    _ => break,
                }
                i += 1;
            }
            match chars.get(i) {
                None => break,
                Some('\n') => {
                    i += 1;
                    line_no += 1;
                    continue;
                }
                Some('\r') if chars.get(i + 1) == Some(&'\n') => {
                    i += 2;
                    line_no += 1;
                    continue;
                }
                Some('#') => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                    }
                    continue;
                }
                Some(_) => {
                    current = Some(LogicalLine {
                        start: line_no,
                        end: line_no,
                        indent,
                        code: String::new(),
                    })
                }
            }
        }
        let line = current.as_mut().expect("logical line open");
        let c = chars[i];
        match c {
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\\' => {
                let next = chars.get(i + 1).copied();
                let next2 = chars.get(i + 2).copied();
                if next == Some('\n') {
                    line.code.push(' ');
                    i += 2;
                    line_no += 1;
                    line.end = line_no;
                } else if next == Some('\r') && next2 == Some('\n') {
                    line.code.push(' ');
                    i += 3;
                    line_no += 1;
                    line.end = line_no;
                } else if next.is_none() {
                    return Err(format!(
                        "line {line_no}: unexpected end of file after line continuation"
                    ));
                } else {
                    return Err(format!(
                        "line {line_no}: unexpected character after line continuation"
                    ));
                }
            }
            '\'' | '"' => {
                let opened_at = line_no;
                let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                i += if triple { 3 } else { 1 };
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(format!("line {opened_at}: unterminated string literal"));
                    };
                    if ch == '\\' {
                        if chars.get(i + 1) == Some(&'\n') {
                            line_no += 1;
                        }
                        i += 2;
                        continue;
                    }
                    if ch == '\n' {
                        if !triple {
                            return Err(format!("line {opened_at}: unterminated string literal"));
                        }
                        line_no += 1;
                    }
                    if ch == c {
                        if !triple {
                            i += 1;
                            break;
                        }
                        if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                            i += 3;
                            break;
                        }
                    }
                    i += 1;
                }
                line.code.push_str("\"\"");
                line.end = line_no;
            }
            '(' | '[' | '{' => {
                brackets.push((c, line_no));
                line.code.push(c);
                line.end = line_no;
                i += 1;
            }
            ')' | ']' | '}' => {
                let expected = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match brackets.pop() {
                    Some((open, _)) if open == expected => {}
                    Some((open, at)) => {
                        return Err(format!(
                        "line {line_no}: closing {c:?} does not match {open:?} opened on line {at}"
                    ))
                    }
                    None => return Err(format!("line {line_no}: unmatched {c:?}")),
                }
                line.code.push(c);
                line.end = line_no;
                i += 1;
            }
            '\n' | '\r' => {
                if c == '\r' && chars.get(i + 1) != Some(&'\n') {
                    line.code.push(' ');
                    i += 1;
                    continue;
                }
                i += if c == '\r' { 2 } else { 1 };
                if brackets.is_empty() {
                    lines.push(current.take().expect("logical line open"));
                } else {
                    line.code.push(' ');
                }
                line_no += 1;
            }
            _ => {
                line.code.push(c);
                i += 1;
                if !c.is_whitespace() {
                    line.end = line_no;
                }
            }
        }
    }
    if let Some((open, at)) = brackets.last() {
        return Err(format!("line {at}: {open:?} was never closed"));
    }
    if let Some(line) = current.take() {
        lines.push(line);
    }
    for line in &mut lines {
        let trimmed = line.code.trim_end().len();
        line.code.truncate(trimmed);
    }
    Ok(lines)
}

/// Byte offset of the first `:` outside brackets at or after `from`.
fn top_level_colon(code: &str, from: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in code[from..].char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ':' if depth == 0 => return Some(from + i),
            _ => {}
        }
    }
    None
}

struct Header {
    kind_is_class: bool,
    name: String,
    one_liner: bool,
}

fn parse_header(line: &LogicalLine) -> Result<Option<Header>, String> {
    let code = line.code.as_str();
    if !DEF_KEYWORD_RE.is_match(code) {
        return Ok(None);
    }
    let (caps, is_class) = match (DEF_RE.captures(code), CLASS_RE.captures(code)) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return Err(format!("line {}: invalid definition header", line.start)),
    };
    let name_match = caps.get(1).expect("name group");
    let colon = top_level_colon(code, name_match.end())
        .ok_or_else(|| format!("line {}: definition header without ':'", line.start))?;
    Ok(Some(Header {
        kind_is_class: is_class,
        name: name_match.as_str().to_string(),
        one_liner: !code[colon + 1..].trim().is_empty(),
    }))
}

fn is_block_opener(line: &LogicalLine) -> bool {
    line.code.ends_with(':')
}

fn check_indentation(lines: &[LogicalLine]) -> Result<(), String> {
    let mut stack = vec![0usize];
    let mut prev_opens = false;
    for line in lines {
        let top = *stack.last().expect("indent stack never empty");
        if line.indent > top {
            if !prev_opens {
                return Err(format!("line {}: unexpected indent", line.start));
            }
            stack.push(line.indent);
        } else {
            if prev_opens {
                return Err(format!("line {}: expected an indented block", line.start));
            }
            while *stack.last().unwrap() > line.indent {
                stack.pop();
            }
            if *stack.last().unwrap() != line.indent {
                return Err(format!(
                    "line {}: unindent does not match any outer indentation level",
                    line.start
                ));
            }
        }
        prev_opens = is_block_opener(line);
    }
    if prev_opens {
        let last = lines.last().expect("opener implies a line");
        return Err(format!(
            "line {}: expected an indented block at end of file",
            last.end
        ));
    }
    Ok(())
}

/// Extracts classes, functions and methods from Python source.
pub fn extract_python(path: &str, source: &str) -> Result<Vec<CodeEntity>, String> {
    let lines = lex(source)?;
    check_indentation(&lines)?;

    struct Open {
        indent: usize,
        kind: EntityKind,
        qualified_name: String,
    }
    let mut open: Vec<Open> = Vec::new();
    let mut entities = Vec::new();

    for (idx, line) in lines.iter().enumerate() {
        while open.last().is_some_and(|o| o.indent >= line.indent) {
            open.pop();
        }
        let Some(header) = parse_header(line)? else {
            continue;
        };

        let mut start = line.start;
        let mut j = idx;
        while j > 0 && lines[j - 1].indent == line.indent && lines[j - 1].code.starts_with('@') {
            j -= 1;
            start = lines[j].start;
        }

        let end = if header.one_liner {
            line.end
        } else {
            let mut k = idx + 1;
            while k < lines.len() && lines[k].indent > line.indent {
                k += 1;
            }
            lines[k - 1].end
        };

        let parent = open.last();
        let kind = match (header.kind_is_class, parent.map(|p| p.kind)) {
            (true, _) => EntityKind::Class,
            (false, Some(EntityKind::Class)) => EntityKind::Method,
            (false, _) => EntityKind::Function,
        };
        let qualified_name = match parent {
            Some(p) => format!("{}.{}", p.qualified_name, header.name),
            None => header.name.clone(),
        };
        entities.push(CodeEntity {
            kind,
            qualified_name: qualified_name.clone(),
            file: path.to_string(),
            span: LineSpan::new(start, end),
        });
        open.push(Open {
            indent: line.indent,
            kind,
            qualified_name,
        });
    }
    entities.sort_by_key(|e| (e.span.start, std::cmp::Reverse(e.span.end)));
    Ok(entities)
}
