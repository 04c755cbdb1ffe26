# Copyright 2026 The pqft Authors
# SPDX-License-Identifier: Apache-2.0

"""Python access to the pqft core: tokenizer, metrics, decoding transforms,
model scoring and the pipeline commands."""

import json
import os

from . import _pqft
from ._pqft import (
    EOS_ID,
    VOCAB_SIZE,
    Error,
    apply_repetition_penalty,
    apply_temperature,
    derive_seed,
    encode,
    hard_match_label,
    normalize_answer,
    normalize_question,
)

__all__ = [
    "EOS_ID", "VOCAB_SIZE", "Error", "Model", "accuracy", "apply_repetition_penalty", "apply_temperature",
    "decode", "derive_seed", "encode", "hard_match_label", "load_config", "lr_at", "macro_f1",
    "normalize_answer", "normalize_question", "render_table", "run_augment", "run_eval", "run_report",
    "run_split", "run_train", "synthesize", "trainable_params",
]


def decode(ids):
    return _pqft.decode(list(ids)).decode("utf-8", errors="replace")


def synthesize(n, seed=0):
    """Synthetic labeled records as a dict keyed by id."""
    return json.loads(_pqft.synthesize(n, seed))


def accuracy(gold, predicted):
    return _pqft.accuracy(list(gold), list(predicted))


def macro_f1(gold, predicted):
    return _pqft.macro_f1(list(gold), list(predicted))


def lr_at(step, train=None):
    return _pqft.lr_at(step, json.dumps(train or {}))


def trainable_params(model=None, adapter=None):
    count, base_total, ratio = _pqft.trainable_params(json.dumps(model or {}), json.dumps(adapter or {}))
    return {"count": count, "base_total": base_total, "ratio": ratio}


def load_config(path=None, **overrides):
    """Effective run configuration. Overrides use double underscores for dots:
    train__learning_rate=1e-3 sets train.learning_rate."""
    pairs = []
    for key, value in overrides.items():
        text = value if isinstance(value, str) else json.dumps(value)
        pairs.append((key.replace("__", "."), text))
    return json.loads(_pqft.load_config(None if path is None else os.fspath(path), pairs))


def _dump(config):
    return json.dumps(config)


def run_split(config):
    _pqft.run_split(_dump(config))


def run_augment(config):
    return json.loads(_pqft.run_augment(_dump(config)))


def run_train(config):
    """Trains and returns the step of the best checkpoint."""
    return _pqft.run_train(_dump(config))


def run_eval(config, checkpoint=None):
    return json.loads(_pqft.run_eval(_dump(config), None if checkpoint is None else os.fspath(checkpoint)))


def run_report(config, inputs=()):
    return _pqft.run_report(_dump(config), [os.fspath(p) for p in inputs])


def render_table(reports):
    return _pqft.render_table([json.dumps(r) for r in reports])


class Model:
    """A base model (fresh or from a checkpoint, with its adapter)."""

    def __init__(self, config=None, seed=0, checkpoint=None):
        if checkpoint is not None:
            self._native = _pqft.Model(os.fspath(checkpoint))
        else:
            self._native = _pqft.Model(json.dumps(config or {}), seed)

    @property
    def config(self):
        return json.loads(self._native.config_json)

    @property
    def parameter_count(self):
        return self._native.parameter_count

    def weights_hash(self):
        return self._native.weights_hash()

    def logits(self, tokens, prefix_position=0):
        return self._native.logits(list(tokens), prefix_position)

    def evaluate(self, records, decode=None, constrain=True):
        return json.loads(self._native.evaluate(json.dumps(records), json.dumps(decode or {}), constrain))
