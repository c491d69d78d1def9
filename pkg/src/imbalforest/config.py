"""Run configuration: JSON file plus ``--set key=value`` overrides.

Example::

    {
      "synth": {"n_rows": 10000, "fraud_rate": 0.023, "include_redundant_pair": true},
      "test_fraction": 0.3,
      "smote": {"k": 5, "target_ratio": 1.0},
      "grid": "default",
      "cv_folds": 5,
      "seed": 7,
      "mode": "safe"
    }

Exactly one of ``input``/``synth`` and at most one of ``grid``/``params`` may
be given (``run`` needs one of the latter). Validation errors name the line
of the offending key.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dataio import SynthSpec
from .errors import ConfigError
from .forest import ForestParams
from .preprocess import DEFAULT_TEST_FRACTION
from .resample import SmoteConfig
from .tune import DEFAULT_FOLDS, ParamGrid

MODES = ("safe", "paper")

_TOP_KEYS = {
    "input": (str, type(None)),
    "synth": (dict, type(None)),
    "drop": (list, type(None)),
    "heatmap_features": (list, type(None)),
    "test_fraction": (int, float),
    "smote": (dict,),
    "grid": (dict, str, type(None)),
    "params": (dict, type(None)),
    "cv_folds": (int,),
    "seed": (int,),
    "mode": (str,),
    "threshold": (int, float),
}
_SECTION_KEYS = {
    "synth": {"n_rows", "fraud_rate", "n_features", "class_separation", "include_redundant_pair"},
    "smote": {"k", "target_ratio"},
    "grid": {"n_trees", "max_depth", "min_samples_split", "max_features", "bootstrap"},
    "params": {"n_trees", "max_depth", "min_samples_split", "max_features", "bootstrap"},
}


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    synth: SynthSpec | None = None
    drop: tuple[str, ...] | None = None  # None: the default for the input kind
    heatmap_features: tuple[str, ...] | None = None
    test_fraction: float = DEFAULT_TEST_FRACTION
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    grid: ParamGrid | None = None
    params: ForestParams | None = None
    cv_folds: int = DEFAULT_FOLDS
    seed: int = 0
    mode: str = "safe"
    threshold: float = 0.5

    def echo(self) -> dict:
        """Everything that determines results; execution settings are left out."""
        return {
            "input": self.input,
            "synth": None if self.synth is None else {
                "n_rows": self.synth.n_rows,
                "fraud_rate": self.synth.fraud_rate,
                "n_features": self.synth.n_features,
                "class_separation": self.synth.class_separation,
                "include_redundant_pair": self.synth.include_redundant_pair,
            },
            "drop": None if self.drop is None else list(self.drop),
            "heatmap_features": None if self.heatmap_features is None else list(self.heatmap_features),
            "test_fraction": self.test_fraction,
            "smote": {"k": self.smote.k, "target_ratio": self.smote.target_ratio},
            "grid": None if self.grid is None else self.grid.to_dict(),
            "params": None if self.params is None else self.params.to_dict(),
            "cv_folds": self.cv_folds,
            "seed": self.seed,
            "mode": self.mode,
            "threshold": self.threshold,
        }


def _line_of(text: str, dotted: str) -> int | None:
    """Best-effort line number of the last component of a dotted key."""
    if not text:
        return None
    pos = 0
    for part in dotted.split("."):
        m = re.compile(r'"' + re.escape(part) + r'"\s*:').search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _fail(msg: str, text: str, key: str, source: str) -> ConfigError:
    line = _line_of(text, key)
    where = f"{source}:{line}" if line else source
    return ConfigError(f"{where}: {key}: {msg}")


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(doc: dict, overrides: list[tuple[str, Any]]) -> dict:
    doc = json.loads(json.dumps(doc))
    for key, value in overrides:
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return doc


def read_document(path: str | Path | None) -> tuple[dict, str, str]:
    if path is None:
        return {}, "", "<defaults>"
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: top level must be an object")
    return doc, text, str(path)


def _section(doc: dict, name: str, text: str, source: str) -> dict | None:
    value = doc.get(name)
    if value is None or isinstance(value, str):
        return value
    unknown = sorted(set(value) - _SECTION_KEYS[name])
    if unknown:
        raise _fail(f"unknown key {unknown[0]!r}", text, f"{name}.{unknown[0]}", source)
    return value


def build_config(doc: dict, text: str = "", source: str = "<config>") -> RunConfig:
    for key, value in doc.items():
        if key not in _TOP_KEYS:
            raise _fail("unknown key", text, key, source)
        allowed = _TOP_KEYS[key]
        if isinstance(value, bool) and bool not in allowed:
            raise _fail(f"expected {'/'.join(t.__name__ for t in allowed)}, got bool", text, key, source)
        if not isinstance(value, allowed):
            raise _fail(
                f"expected {'/'.join(t.__name__ for t in allowed)}, got {type(value).__name__}",
                text, key, source,
            )

    def build(key: str, factory):
        section = _section(doc, key, text, source)
        if section is None:
            return None
        try:
            return factory(section)
        except (TypeError, ValueError) as exc:
            raise _fail(str(exc), text, key, source) from None

    synth = build("synth", lambda d: SynthSpec(**d))
    smote = build("smote", lambda d: SmoteConfig(**d)) or SmoteConfig()

    def make_grid(d):
        if isinstance(d, str):
            if d != "default":
                raise ValueError(f"grid must be an object or \"default\", got {d!r}")
            return ParamGrid()
        return ParamGrid.from_dict(d)

    grid = build("grid", make_grid)
    params = build("params", lambda d: ForestParams(**d))

    if doc.get("input") is not None and synth is not None:
        raise _fail("give either input or synth, not both", text, "synth", source)
    if grid is not None and params is not None:
        raise _fail("give either grid or params, not both", text, "params", source)
    mode = doc.get("mode", "safe")
    if mode not in MODES:
        raise _fail(f"mode must be one of {MODES}, got {mode!r}", text, "mode", source)
    tf = float(doc.get("test_fraction", DEFAULT_TEST_FRACTION))
    if not 0.0 < tf < 1.0:
        raise _fail("test_fraction must lie in (0, 1)", text, "test_fraction", source)
    folds = doc.get("cv_folds", DEFAULT_FOLDS)
    if folds < 2:
        raise _fail("cv_folds must be at least 2", text, "cv_folds", source)
    seed = doc.get("seed", 0)
    if not 0 <= seed < 2**64:
        raise _fail("seed must fit in 64 unsigned bits", text, "seed", source)

    def names(key: str) -> tuple[str, ...] | None:
        value = doc.get(key)
        if value is None:
            return None
        if not all(isinstance(v, str) for v in value):
            raise _fail("expected a list of column names", text, key, source)
        return tuple(value)

    return RunConfig(
        input=doc.get("input"),
        synth=synth,
        drop=names("drop"),
        heatmap_features=names("heatmap_features"),
        test_fraction=tf,
        smote=smote,
        grid=grid,
        params=params,
        cv_folds=folds,
        seed=seed,
        mode=mode,
        threshold=float(doc.get("threshold", 0.5)),
    )


def load_config(path: str | Path | None, overrides: list[tuple[str, Any]] = ()) -> RunConfig:
    doc, text, source = read_document(path)
    if overrides:
        doc = apply_overrides(doc, list(overrides))
    return build_config(doc, text, source)
