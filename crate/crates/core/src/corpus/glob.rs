use regex::Regex;

#[derive(Debug, thiserror::Error)]
#[error("pattern {pattern:?}: {message}")]
pub struct GlobError {
    pub pattern: String,
    pub message: String,
}

/// Include/exclude filter over `/`-separated relative paths.
///
/// Patterns follow the usual shell conventions: `*` and `?` stay within one
/// path segment, `**` crosses segments, `[...]` is a character class. A
/// pattern without a `/` is matched against the file name only, so `*.py`
/// selects Python files at any depth.
#[derive(Debug, Clone)]
pub struct PathFilter {
    include: Vec<Matcher>,
    exclude: Vec<Matcher>,
}

#[derive(Debug, Clone)]
struct Matcher {
    regex: Regex,
    basename_only: bool,
}

impl Matcher {
    fn is_match(&self, path: &str) -> bool {
        if self.basename_only {
            let name = path.rsplit('/').next().unwrap_or(path);
            self.regex.is_match(name)
        } else {
            self.regex.is_match(path)
        }
    }
}

impl PathFilter {
    pub fn new<S: AsRef<str>>(include: &[S], exclude: &[S]) -> Result<Self, GlobError> {
        let compile = |patterns: &[S]| -> Result<Vec<Matcher>, GlobError> {
            patterns.iter().map(|p| compile(p.as_ref())).collect()
        };
        Ok(PathFilter {
            include: compile(include)?,
            exclude: compile(exclude)?,
        })
    }

    /// An empty include list admits everything.
    pub fn accepts(&self, path: &str) -> bool {
        let included = self.include.is_empty() || self.include.iter().any(|m| m.is_match(path));
        included && !self.exclude.iter().any(|m| m.is_match(path))
    }
}

fn compile(pattern: &str) -> Result<Matcher, GlobError> {
    let err = |message: &str| GlobError {
        pattern: pattern.to_string(),
        message: message.to_string(),
    };
    if pattern.is_empty() {
        return Err(err("empty pattern"));
    }
    let trimmed = pattern.trim_start_matches("./");
    let basename_only = !trimmed.contains('/');
    let chars: Vec<char> = trimmed.chars().collect();
    let mut re = String::from("^");
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '*' if chars.get(i + 1) == Some(&'*') => {
                if chars.get(i + 2) == Some(&'/') {
                    re.push_str("(?:.*/)?");
                    i += 3;
                } else {
                    re.push_str(".*");
                    i += 2;
                }
            }
            '*' => {
                re.push_str("[^/]*");
                i += 1;
            }
            '?' => {
                re.push_str("[^/]");
                i += 1;
            }
            '[' => {
                let close = chars[i + 1..]
                    .iter()
                    .position(|&c| c == ']')
                    .ok_or_else(|| err("unterminated character class"))?;
                let body: String = chars[i + 1..i + 1 + close].iter().collect();
                let body = match body.strip_prefix('!') {
                    Some(rest) => format!("^{rest}"),
                    None => body,
                };
                re.push('[');
                re.push_str(&body.replace('\\', "\\\\"));
                re.push(']');
                i += close + 2;
            }
            c => {
                re.push_str(&regex::escape(&c.to_string()));
                i += 1;
            }
        }
    }
    re.push('$');
    let regex = Regex::new(&re).map_err(|e| err(&e.to_string()))?;
    Ok(Matcher {
        regex,
        basename_only,
    })
}
