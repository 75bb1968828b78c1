/// Splits text into lowercase index terms.
///
/// Any non-alphanumeric character separates terms, which covers `snake_case`;
/// a lowercase letter followed by an uppercase one also starts a new term, so
/// `getUserName` becomes `get`, `user`, `name`. Runs of capitals are kept
/// together (`HTTPServer` is one term).
pub fn index_term_split(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for c in text.chars() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                terms.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        if prev_lower && c.is_uppercase() && !current.is_empty() {
            terms.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
        prev_lower = c.is_lowercase();
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}
