"""Distress prediction from annual-report text and financial ratios."""

import json as _json

from . import _textrisk
from ._textrisk import (
    LogitModel,
    Preprocessor,
    TextriskError,
    auc,
    blockify,
    config_text,
    default_stopwords,
    fit_logit,
    log_score,
    normalize,
    paired_t_test,
    split_words,
    stem,
)

__all__ = [
    "LogitModel",
    "Preprocessor",
    "TextriskError",
    "auc",
    "blockify",
    "checkpoint_config",
    "config_text",
    "default_stopwords",
    "fit_logit",
    "log_score",
    "normalize",
    "paired_t_test",
    "parse_config",
    "read_corpus",
    "run",
    "split_words",
    "stem",
    "synthetic_corpus",
    "write_corpus",
]


def parse_config(text):
    return _json.loads(_textrisk.parse_config(text))


def synthetic_corpus(n_firms, seed=0, signal_strength=0.9, tabular_signal_strength=0.3, distress_rate=0.1):
    raw = _textrisk.synthetic_corpus(n_firms, seed, signal_strength, tabular_signal_strength, distress_rate)
    return _json.loads(raw)


def read_corpus(path):
    return _json.loads(_textrisk.read_corpus(str(path)))


def write_corpus(path, records):
    _textrisk.write_corpus(str(path), _json.dumps(list(records)))


def checkpoint_config(path):
    return _json.loads(_textrisk.checkpoint_config(str(path)))


def run(config_text="", corpus="", output_dir=""):
    """Runs every stage and returns the output directory."""
    return _textrisk.run(config_text, str(corpus), str(output_dir))
