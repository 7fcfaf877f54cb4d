"""YAML experiment configuration with line-numbered validation errors.

The document mirrors :class:`~reject_inference.harness.ExperimentConfig`.
Every key is optional; omitted keys keep their defaults. The full schema
with defaults is in ``docs/config.md`` and can be printed with
``python -m reject_inference config``.

Example::

    seed: 3
    k_folds: 4
    n_bootstraps: 50
    data:
      source: synthetic          # or: csv
      n_population: 6000
    scorer: {max_depth: 3, learning_rate: 0.1}
    kickout: {mu: 0.7, accept_split: 0.7, reject_split: 0.7, a2_size: match}
    strategies: table3           # or a list of {kind: ..., <params>}
    selection_grid: shallow      # or a list
    scorer_variants: default     # or a list of scorer parameter maps
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .harness import CsvSource, ExperimentConfig, default_scorer_variants
from .kickout import KickoutProtocolConfig
from .learners import GbtParams
from .strategies import StrategySpec, shallow_grid, table3_grid
from .synthgen import GeneratorConfig

KICKOUT_KEYS = ("mu", "accept_split", "reject_split", "a2_size")
TOP_LEVEL_SCALARS = ("seed", "out_dir", "k_folds", "n_bootstraps", "bench_kickout", "rp_accept_fraction",
                     "histogram_bins", "plots")
NAMED_GRIDS = {
    "strategies": {"table3": table3_grid, "shallow": shallow_grid},
    "selection_grid": {"shallow": shallow_grid, "table3": table3_grid},
    "scorer_variants": {"default": default_scorer_variants},
}


class ConfigError(ValueError):
    """Invalid configuration document; the message starts with ``file:line:``."""


class _Doc:
    def __init__(self, name: str):
        self.name = name

    def fail(self, node, msg: str):
        line = node.start_mark.line + 1 if node is not None else 1
        raise ConfigError(f"{self.name}:{line}: {msg}")

    def mapping(self, node, what: str) -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                self.fail(k, f"{what}: keys must be plain names")
            if k.value in out:
                self.fail(k, f"{what}: duplicate key {k.value!r}")
            out[k.value] = (k, v)
        return out

    def scalar(self, node, expected, key: str):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{key} must be a single value")
        value = _CONSTRUCTOR.construct_object(node)
        if expected is None:
            return value
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if expected is int and isinstance(value, bool):
            self.fail(node, f"{key} must be an integer, got {value!r}")
        if value is None and key in _NULLABLE:
            return None
        if not isinstance(value, expected):
            self.fail(node, f"{key} must be {expected.__name__}, got {node.value!r}")
        return value

    def dataclass_from(self, node, cls, what: str, allowed=None, fixed=None):
        """Build ``cls`` from a mapping node, checking names and value types."""
        entries = self.mapping(node, what)
        defaults = {f.name: f.default for f in dataclasses.fields(cls)}
        allowed = allowed or tuple(defaults)
        kwargs = dict(fixed or {})
        for key, (knode, vnode) in entries.items():
            if key not in allowed:
                self.fail(knode, f"{what}: unknown key {key!r}; expected one of {', '.join(allowed)}")
            kwargs[key] = self.scalar(vnode, _type_of(defaults[key]), f"{what}.{key}")
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            self.fail(node, f"{what}: {exc}")


_CONSTRUCTOR = yaml.SafeLoader("")
_NULLABLE = {"data.id_column", "data.reject_labels"}


def _type_of(default):
    if isinstance(default, bool):
        return bool
    if isinstance(default, (int, float, str)):
        return type(default)
    return None


def _strategy_list(doc: _Doc, node, what: str) -> tuple:
    if isinstance(node, yaml.ScalarNode):
        name = node.value
        if name not in NAMED_GRIDS[what]:
            doc.fail(node, f"{what}: unknown named grid {name!r}; expected one of {', '.join(NAMED_GRIDS[what])}")
        return tuple(NAMED_GRIDS[what][name]())
    if not isinstance(node, yaml.SequenceNode) or not node.value:
        doc.fail(node, f"{what} must be a grid name or a non-empty list")
    specs = []
    for item in node.value:
        entries = doc.mapping(item, f"{what} entry")
        if "kind" not in entries:
            doc.fail(item, f"{what} entry needs a 'kind'")
        kind = doc.scalar(entries.pop("kind")[1], str, "kind")
        params = {k: doc.scalar(v, None, f"{kind}.{k}") for k, (_, v) in entries.items()}
        try:
            specs.append(StrategySpec.make(kind, **params))
        except (TypeError, ValueError) as exc:
            doc.fail(item, str(exc))
    if what == "strategies":  # benchmark rows are keyed by label; the selection grid may repeat
        labels = [s.label for s in specs]
        for i, (item, label) in enumerate(zip(node.value, labels)):
            if label in labels[:i]:
                doc.fail(item, f"{what}: {label} is listed twice")
    return tuple(specs)


def _scorer_variants(doc: _Doc, node) -> tuple:
    if isinstance(node, yaml.ScalarNode):
        if node.value not in NAMED_GRIDS["scorer_variants"]:
            doc.fail(node, f"scorer_variants: unknown named grid {node.value!r}")
        return default_scorer_variants()
    if not isinstance(node, yaml.SequenceNode) or not node.value:
        doc.fail(node, "scorer_variants must be 'default' or a non-empty list")
    return tuple(doc.dataclass_from(item, GbtParams, "scorer_variants entry") for item in node.value)


def _data(doc: _Doc, node, base: Path):
    entries = doc.mapping(node, "data")
    source = "synthetic"
    if "source" in entries:
        snode = entries["source"][1]
        source = doc.scalar(snode, str, "data.source")
        if source not in ("synthetic", "csv"):
            doc.fail(snode, f"data.source must be 'synthetic' or 'csv', got {source!r}")
    # rebuild the node without 'source' so the dataclass check sees only its own keys
    rest = yaml.MappingNode(node.tag, [(k, v) for k, v in node.value if k.value != "source"],
                            node.start_mark, node.end_mark)
    if source == "synthetic":
        return doc.dataclass_from(rest, GeneratorConfig, "data")
    for required in ("accepts", "rejects", "unbiased"):
        if required not in entries:
            doc.fail(node, f"data: csv source needs '{required}'")
    src = doc.dataclass_from(rest, CsvSource, "data")
    resolve = {f: str((base / getattr(src, f)).resolve()) for f in ("accepts", "rejects", "unbiased", "reject_labels")
               if getattr(src, f)}
    return dataclasses.replace(src, **resolve)


def parse_config(text: str, name: str = "<config>", base_dir=".") -> ExperimentConfig:
    """Parse a YAML document into an :class:`ExperimentConfig`.

    Relative CSV paths are resolved against ``base_dir``.
    """
    doc = _Doc(name)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        raise ConfigError(f"{name}:{line}: {getattr(exc, 'problem', None) or exc}") from None
    if root is None:
        return ExperimentConfig()
    entries = doc.mapping(root, "config")
    kwargs = {}
    for key, (knode, vnode) in entries.items():
        if key in TOP_LEVEL_SCALARS:
            default = getattr(ExperimentConfig, key, None)
            kwargs[key] = doc.scalar(vnode, _type_of(default), key)
        elif key == "data":
            kwargs["data"] = _data(doc, vnode, Path(base_dir))
        elif key == "scorer":
            kwargs["scorer"] = doc.dataclass_from(vnode, GbtParams, "scorer")
        elif key == "kickout":
            kwargs["kickout"] = doc.dataclass_from(vnode, KickoutProtocolConfig, "kickout", allowed=KICKOUT_KEYS)
        elif key in ("strategies", "selection_grid"):
            kwargs[key] = _strategy_list(doc, vnode, key)
        elif key == "scorer_variants":
            kwargs[key] = _scorer_variants(doc, vnode)
        else:
            known = TOP_LEVEL_SCALARS + ("data", "scorer", "kickout", "strategies", "selection_grid", "scorer_variants")
            doc.fail(knode, f"unknown key {key!r}; expected one of {', '.join(known)}")
    if "seed" in kwargs and kwargs["seed"] < 0:
        doc.fail(entries["seed"][1], "seed must be >= 0")
    try:
        cfg = ExperimentConfig(**kwargs)
    except ValueError as exc:
        doc.fail(root, str(exc))
    # a top-level seed also seeds the synthetic data unless data.seed is given
    data_node = entries.get("data")
    data_seed_given = data_node is not None and "seed" in doc.mapping(data_node[1], "data")
    if "seed" in kwargs and isinstance(cfg.data, GeneratorConfig) and not data_seed_given:
        cfg = dataclasses.replace(cfg, data=dataclasses.replace(cfg.data, seed=cfg.seed))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_config(text, str(path), path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    """YAML text that :func:`parse_config` turns back into ``cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None, width=100)
