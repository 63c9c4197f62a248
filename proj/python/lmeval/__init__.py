"""Python bindings for the lmeval C++ core."""

import json as _json

from ._lmeval import (
    FeedForwardLM,
    LanguageModel,
    LmevalError,
    NGramLM,
    bleu,
    corpus_bleu,
    detokenize,
    encode,
    ends_with_terminal_punct,
    fit_log_curve,
    forward_ppl,
    generate,
    load_model,
    open_model,
    penalize,
    perplexity,
    read_ids,
    reverse_ppl,
    save_model,
    segment_sentences,
    selection_accuracy,
    self_bleu,
    seq_rep_n,
    split_corpus,
    tokenize,
    truncate_renormalize,
    write_ids,
)
from ._lmeval import run_sweep_json as _run_sweep_json


def run_sweep(config):
    """Run a decoding sweep.

    `config` is a dict or a JSON string with the same keys the CLI accepts.
    Returns (records, computed, reused) where records are dicts in grid order.
    """
    text = config if isinstance(config, str) else _json.dumps(config)
    lines, computed, reused = _run_sweep_json(text)
    return [_json.loads(line) for line in lines], computed, reused


__all__ = [name for name in dir() if not name.startswith("_")]
