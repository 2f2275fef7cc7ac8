"""Flat ``key = value`` pipeline configuration.

Lines are ``section.name = value``; ``#`` starts a comment. Unknown keys are
rejected so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .features import EntropyConfig, WelchConfig
from .selection import SfffsConfig
from .sigproc import FilterSpec, TfpConfig


class ConfigError(ValueError):
    pass


def _none_or_float(s: str):
    return None if s.strip().lower() in ("none", "") else float(s)


def _choice(*options):
    def parse(s: str) -> str:
        s = s.strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _int(s: str) -> int:
    return int(s.strip(), 0)


# key -> (parser, default)
SCHEMA = {
    "sampling.dt": (float, 3.0),
    "filter.f_lo": (float, 0.01),
    "filter.f_hi": (float, 0.1),
    "filter.order": (_int, 4),
    "tfp.ensembles": (_int, 64),
    "tfp.dither": (float, 0.01),
    "tfp.seed": (_int, 0),
    "tfp.input_dither_snr_db": (_none_or_float, None),
    "entropy.bins": (_int, 16),
    "entropy.log_base": (float, 2.0),
    "welch.segment": (_int, 64),
    "welch.overlap": (float, 0.5),
    "welch.window": (_choice("hann", "rectangular"), "hann"),
    "welch.reduce": (_choice("mean", "max"), "mean"),
    "features.ip_phase": (_choice("unwrapped", "wrapped"), "unwrapped"),
    "selection.alpha": (float, 0.05),
    "selection.rule": (_choice("union", "intersection"), "union"),
    "selection.folds": (_int, 5),
    "selection.seed": (_int, 0),
    "selection.max_sets": (_int, 6),
    "knn.k": (_int, 5),
    "split.per_class_test": (_int, 10),
    "split.seed": (_int, 0),
    "synth.preset": (_choice("separable", "hard", "null"), "separable"),
    "synth.regions": (_int, 16),
    "synth.timepoints": (_int, 140),
    "synth.subjects_per_class": (_int, 20),
    "synth.seed": (_int, 0),
}

SEED_KEYS = ("tfp.seed", "selection.seed", "split.seed", "synth.seed")


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, raw) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            self.values[key] = parser(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from None

    def with_seed(self, seed: int) -> "PipelineConfig":
        out = PipelineConfig(dict(self.values))
        for k in SEED_KEYS:
            out.values[k] = int(seed)
        return out

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        cfg = cls()
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            try:
                cfg.set(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, **overrides) -> "PipelineConfig":
        cfg = cls.from_file(path) if path else cls()
        for k, v in overrides.items():
            cfg.set(k.replace("__", "."), v)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.filter_spec()
            self.tfp()
            self.entropy()
            self.welch()
            self.sfffs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self["selection.alpha"] < 1:
            raise ConfigError("selection.alpha must lie in (0, 1)")
        if self["knn.k"] < 1:
            raise ConfigError("knn.k must be >= 1")
        if self["split.per_class_test"] < 0:
            raise ConfigError("split.per_class_test must be >= 0")

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self["filter.f_lo"], self["filter.f_hi"], self["filter.order"], 1.0 / self["sampling.dt"])

    def tfp(self, subject_id: str | None = None) -> TfpConfig:
        seed = self["tfp.seed"] if subject_id is None else subject_seed(self["tfp.seed"], subject_id)
        return TfpConfig(self["tfp.ensembles"], self["tfp.dither"], seed, self["tfp.input_dither_snr_db"])

    def entropy(self) -> EntropyConfig:
        return EntropyConfig(self["entropy.bins"], self["entropy.log_base"])

    def welch(self) -> WelchConfig:
        return WelchConfig(
            self["welch.segment"],
            self["welch.overlap"],
            self["welch.window"],
            (self["filter.f_lo"], self["filter.f_hi"]),
            self["welch.reduce"],
        )

    def sfffs(self) -> SfffsConfig:
        return SfffsConfig(self["selection.folds"], self["knn.k"], self["selection.seed"], self["selection.max_sets"])

    def to_dict(self) -> dict:
        return dict(sorted(self.values.items()))

    def dumps(self) -> str:
        return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in self.to_dict().items())


def subject_seed(global_seed: int, subject_id: str) -> int:
    """Stable 64-bit per-subject seed, independent of processing order."""
    h = hashlib.blake2b(f"{int(global_seed)}:{subject_id}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")
