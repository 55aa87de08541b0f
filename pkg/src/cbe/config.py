"""Pipeline configuration.

The file format is flat ``key = value`` text, one setting per line, with
dotted section prefixes (``walks.max_depth = 4``). ``#`` starts a comment.
Settings can be overridden by environment variables named ``CBE_`` plus the
upper-cased key with dots written as double underscores
(``CBE_WALKS__MAX_DEPTH=3``), and by command-line ``--set key=value`` flags.
Precedence is flag, then environment, then file, then built-in default.

Grids are declared as ``grid.<family>.<param> = v1, v2, ...``.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from cbe.embed.sgns import SgnsConfig
from cbe.embed.sif import SifConfig
from cbe.walks import WalkConfig

ENV_PREFIX = "CBE_"

DEFAULTS: dict[str, object] = {
    "paths.corpus": "",
    "paths.kg": "",
    "paths.gazetteer": "",
    "paths.curation": "",
    "paths.additions": "",
    "paths.sentence_vectors": "",
    "paths.output": "out",
    "linker.mode": "gazetteer",
    "linker.endpoint": "",
    "linker.timeout": 10.0,
    "linker.max_workers": 4,
    "linker.min_count": 1,
    "walks.max_depth": 4,
    "walks.max_walks": 50,
    "walks.include_predicates": True,
    "walks.seed": 0,
    "sgns_text.dim": 32,
    "sgns_text.window": 5,
    "sgns_text.negatives": 5,
    "sgns_text.epochs": 10,
    "sgns_text.learning_rate": 0.025,
    "sgns_text.subsample_threshold": 1e-3,
    "sgns_text.min_count": 1,
    "sgns_text.seed": 0,
    "sgns_kg.dim": 32,
    "sgns_kg.window": 5,
    "sgns_kg.negatives": 5,
    "sgns_kg.epochs": 5,
    "sgns_kg.learning_rate": 0.025,
    "sgns_kg.subsample_threshold": 1e-3,
    "sgns_kg.min_count": 1,
    "sgns_kg.seed": 0,
    "sif.a": 1e-3,
    "sif.remove_pc": True,
    "fusion.strategy": "concat",
    "models.families": "logreg,mlp,knn",
    "eval.tasks": "ed1,ed2,ed3,ed4",
    "eval.inputs": "text,kge,cbe",
    "eval.train_ratio": 0.7,
    "eval.k": 10,
    "eval.seed": 0,
    "eval.metric": "f1",
    "eval.split_task": "ed1",
    "bias.top_n": 165,
    "bias.count": "token",
    "analyze.top_n": 165,
    "run.deterministic": True,
    "run.workers": 1,
}

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "logreg": {"l2": [1e-3, 1e-2], "lr": [0.5], "epochs": [300]},
    "mlp": {"hidden": [16], "lr": [0.5], "epochs": [300], "l2": [1e-3]},
    "knn": {"k": [5, 9], "metric": ["euclidean"]},
}

PATH_KEYS = tuple(k for k in DEFAULTS if k.startswith("paths."))


def _parse_scalar(raw: str, like: object) -> object:
    raw = raw.strip()
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def _parse_grid_value(raw: str) -> object:
    raw = raw.strip()
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def read_kv(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX) and "__" in name:
            out[name[len(ENV_PREFIX) :].lower().replace("__", ".")] = value
    return out


@dataclass
class PipelineConfig:
    values: dict[str, object] = field(default_factory=lambda: dict(DEFAULTS))
    grids: dict[str, dict[str, list]] = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        overrides: Mapping[str, str] | None = None,
        environ: Mapping[str, str] | None = None,
    ) -> PipelineConfig:
        cfg = cls(base_dir=Path(path).resolve().parent if path else Path.cwd())
        raw: dict[str, str] = {}
        if path:
            raw.update(read_kv(path))
        raw.update(env_overrides(environ))
        raw.update(overrides or {})
        grid_seen: set[str] = set()
        for key, value in raw.items():
            if key.startswith("grid."):
                parts = key.split(".")
                if len(parts) != 3:
                    raise ValueError(f"grid keys look like grid.<family>.<param>, got {key!r}")
                _, family, param = parts
                if family not in grid_seen:
                    # a family named in the config replaces its default grid entirely
                    cfg.grids[family] = {}
                    grid_seen.add(family)
                cfg.grids[family][param] = [_parse_grid_value(v) for v in value.split(",") if v.strip()]
            elif key in DEFAULTS:
                cfg.values[key] = _parse_scalar(value, DEFAULTS[key])
            else:
                raise ValueError(f"unknown configuration key {key!r}")
        return cfg

    def __getitem__(self, key: str):
        return self.values[key]

    def path(self, key: str) -> Path | None:
        v = self.values[key]
        if not v:
            return None
        p = Path(str(v)).expanduser()
        return p if p.is_absolute() else self.base_dir / p

    def list(self, key: str) -> list[str]:
        return [s.strip() for s in str(self.values[key]).split(",") if s.strip()]

    def section(self, prefix: str) -> dict[str, object]:
        return {k[len(prefix) + 1 :]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def walk_config(self) -> WalkConfig:
        return WalkConfig(**self.section("walks"))

    def sgns_config(self, which: str) -> SgnsConfig:
        workers = 1 if self["run.deterministic"] else int(self["run.workers"])
        return SgnsConfig(workers=workers, **self.section(f"sgns_{which}"))

    def sif_config(self) -> SifConfig:
        return SifConfig(**self.section("sif"))

    def subset(self, *prefixes: str) -> dict[str, object]:
        """The settings under the given section prefixes (grid included as ``grid``)."""
        out: dict[str, object] = {}
        for k, v in sorted(self.values.items()):
            if any(k == p or k.startswith(p + ".") for p in prefixes):
                out[k] = v
        if "grid" in prefixes:
            out["grid"] = {f: self.grids[f] for f in sorted(self.grids)}
        return out


def stable_hash(obj: object) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def file_hash(path: str | Path | None) -> str | None:
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
