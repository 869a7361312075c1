"""Compile, score and curate TikZ programs.

Thin wrapper over the native ``_scitikz`` module. Functions that produce
structured results return plain dicts.
"""

import json as _json

from . import _scitikz as _core
from ._scitikz import (
    ConfigError,
    EnvironmentError,
    Error,
    SchemaViolation,
    clipped_surrogate,
    config_hash,
    crystal_bleu,
    eed,
    group_advantages,
    hinge_semantic,
    lex,
    mine_trivial_ngrams,
    normalize,
    run_cli,
    struct_from_distance,
    ted_similarity,
    wrap_standalone,
)

__all__ = [
    "ConfigError",
    "EnvironmentError",
    "Error",
    "SchemaViolation",
    "clipped_surrogate",
    "compile",
    "config_hash",
    "crystal_bleu",
    "default_config",
    "dsc_sim",
    "eed",
    "evaluate",
    "group_advantages",
    "hinge_semantic",
    "lex",
    "mine_trivial_ngrams",
    "normalize",
    "parse_judge_reply",
    "run_cli",
    "stage2_total",
    "struct_from_distance",
    "ted_similarity",
    "wrap_standalone",
]


def _cfg(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


def default_config():
    return _json.loads(_core.default_config())


def compile(code, config=None):
    return _json.loads(_core.compile(code, _cfg(config)))


def stage2_total(compiled, s_sem=0.0, s_struct=0.0, s_code=None, config=None):
    return _json.loads(_core.stage2_total(compiled, s_sem, s_struct, s_code, _cfg(config)))


def parse_judge_reply(reply):
    return _json.loads(_core.parse_judge_reply(reply))


def evaluate(preds, refs, renderer="toy", config=None):
    """preds and refs map record id to code."""
    return _json.loads(_core.evaluate(list(preds.items()), list(refs.items()), renderer, _cfg(config)))


def dsc_sim(seed=0, images=4, fault_rate=0.1, config=None):
    return _json.loads(_core.dsc_sim(seed, images, fault_rate, _cfg(config)))
