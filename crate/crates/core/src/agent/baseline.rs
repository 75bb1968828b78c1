use super::context::ContextSet;
use super::react::StrategyConfig;
use crate::corpus::TokenCounter;
use crate::retrieval::Bm25Index;

/// Single BM25 request with the task text; whole documents are taken in rank
/// order until the context reaches the token threshold or hits run out.
pub fn run_baseline(
    index: &Bm25Index,
    task: &str,
    config: &StrategyConfig,
    counter: &TokenCounter,
) -> ContextSet {
    let mut context = ContextSet::new();
    for hit in index.search(task, index.len()) {
        if context.total_tokens() >= config.context_threshold_tokens {
            break;
        }
        context.add_hit(&hit, counter);
    }
    context
}
