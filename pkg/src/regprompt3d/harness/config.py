"""Run configuration: one validated, serializable record per experiment.

The config file format is INI-style key = value under a ``[run]`` section;
keys are the :class:`RunConfig` field names. Tuples are comma separated,
booleans accept the usual configparser spellings, ``auto`` (or an empty
value) leaves an auto-resolved field unset.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..data.shapes import FAMILY_NAMES
from ..data.splits import SHOTS
from ..regulation import RegulationWeights, auto_mu_sigma

KINDS = ("base_to_new", "cross_domain", "corruption", "few_shot")
SCHEDULES = ("scaled", "fixed")
BANKS = ("generated", "manual")
FIXED_MU_SIGMA = (15.0, 1.0)
N_BLOCKS = 12


@dataclass(frozen=True)
class RunConfig:
    kind: str = "base_to_new"
    epochs: int | None = None
    depth: int | None = None
    length: int | None = None
    shots: int | None = 16
    alpha: float = 10.0
    beta: float = 25.0
    gamma: float = 1.0
    mu: float | None = None
    sigma: float | None = None
    schedule: str = "scaled"
    tau: float = 0.01
    seeds: tuple[int, ...] = (1, 2, 3)
    mac: bool = True
    tdc: bool = True
    mec: bool = True
    batch_size: int = 32
    lr: float = 0.0025
    n_t: int = 10
    bank: str = "generated"
    classes: tuple[str, ...] = tuple(FAMILY_NAMES)
    train_per_class: int = 40
    test_per_class: int = 20
    n_points: int = 1024
    data_seed: int = 0
    severity: int = 2
    target_classes: int = 10
    target_per_class: int = 10
    track_val: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "classes", tuple(self.classes))
        self.validate()

    def validate(self) -> None:
        err = []
        if self.kind not in KINDS:
            err.append(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("epochs", "depth", "length"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                err.append(f"{name} must be a positive integer or auto, got {v!r}")
        if self.depth is not None and isinstance(self.depth, int) and self.depth > N_BLOCKS:
            err.append(f"depth {self.depth} exceeds the {N_BLOCKS} encoder blocks")
        if self.shots is not None and self.shots not in SHOTS:
            err.append(f"shots must be one of {SHOTS} or unset, got {self.shots!r}")
        try:
            RegulationWeights(self.alpha, self.beta, self.gamma)
        except ValueError as e:
            err.append(str(e))
        if self.schedule not in SCHEDULES:
            err.append(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.sigma is not None and not self.sigma > 0:
            err.append(f"sigma must be positive, got {self.sigma}")
        if self.mu is not None and not math.isfinite(self.mu):
            err.append(f"mu must be finite, got {self.mu}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            err.append(f"tau must be positive, got {self.tau}")
        if not self.seeds:
            err.append("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            err.append(f"seeds must be distinct, got {self.seeds}")
        if self.batch_size < 1:
            err.append(f"batch_size must be positive, got {self.batch_size}")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            err.append(f"lr must be positive, got {self.lr}")
        if self.n_t < 1:
            err.append(f"n_t must be >= 1, got {self.n_t}")
        if self.bank not in BANKS:
            err.append(f"bank must be one of {BANKS}, got {self.bank!r}")
        unknown = [c for c in self.classes if c not in FAMILY_NAMES]
        if unknown:
            err.append(f"unknown classes {unknown}")
        if len(self.classes) < 2 or len(set(self.classes)) != len(self.classes):
            err.append(f"need at least 2 distinct classes, got {list(self.classes)}")
        if self.train_per_class < 2 or self.test_per_class < 1:
            err.append("train_per_class must be >= 2 and test_per_class >= 1")
        if self.shots is not None and self.shots > self.train_per_class - round(0.2 * self.train_per_class):
            err.append(f"shots={self.shots} exceeds the per-class train pool of {self.train_per_class} minus val")
        if self.n_points < 64:
            err.append(f"n_points must be >= 64, got {self.n_points}")
        if not 0 <= self.severity <= 4:
            err.append(f"severity must be in 0..4, got {self.severity}")
        if not 2 <= self.target_classes <= len(FAMILY_NAMES) or self.target_per_class < 1:
            err.append("target_classes must be in 2..16 and target_per_class >= 1")
        if err:
            raise ValueError("invalid RunConfig: " + "; ".join(err))

    # ------------------------------------------------------------ auto fields

    @property
    def weights(self) -> RegulationWeights:
        return RegulationWeights(self.alpha, self.beta, self.gamma)

    def resolved(self) -> "RunConfig":
        """Copy with every auto field filled in, so the record alone fixes the run."""
        wide = self.kind in ("cross_domain", "few_shot")
        epochs = self.epochs or (20 if self.kind == "base_to_new" else 50)
        depth = self.depth or (12 if wide else 9)
        length = self.length or (4 if wide else 2)
        if self.schedule == "fixed":
            mu0, sigma0 = FIXED_MU_SIGMA
        else:
            mu0, sigma0 = auto_mu_sigma(epochs)
        mu = self.mu if self.mu is not None else mu0
        sigma = self.sigma if self.sigma is not None else sigma0
        return replace(self, epochs=epochs, depth=depth, length=length, mu=float(mu), sigma=float(sigma))

    # ------------------------------------------------------------ serialization

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["classes"] = list(self.classes)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown RunConfig keys: {sorted(extra)}")
        return cls(**d)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, raw: str):
    """Convert one config-file or CLI string to the field's type."""
    if key not in _TYPES:
        raise ValueError(f"unknown RunConfig key {key!r}")
    kind = str(_TYPES[key])
    text = raw.strip()
    if "None" in kind and text.lower() in ("", "auto", "none"):
        return None
    if kind.startswith("tuple[int"):
        return tuple(int(v) for v in text.split(",") if v.strip())
    if kind.startswith("tuple[str"):
        return tuple(v.strip() for v in text.split(",") if v.strip())
    if kind == "bool":
        low = text.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {raw!r}")
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def read_config_file(path) -> dict:
    """Key/value overrides from the ``[run]`` section of an INI file."""
    parser = configparser.ConfigParser(interpolation=None)
    path = Path(path)
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config file not found: {path}")
    if "run" not in parser:
        raise ValueError(f"{path}: missing [run] section")
    return {k: parse_value(k, v) for k, v in parser["run"].items()}


def write_config_file(cfg: RunConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    section = {}
    for k, v in cfg.to_dict().items():
        if v is None:
            section[k] = "auto"
        elif isinstance(v, list):
            section[k] = ",".join(str(x) for x in v)
        else:
            section[k] = str(v)
    parser["run"] = section
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def load_config(path=None, **overrides) -> RunConfig:
    """Flags first, then the config file on top (the file wins).

    An override of None means "auto" for the optional fields, not "unset".
    """
    values = dict(overrides)
    if path is not None:
        values.update(read_config_file(path))
    return RunConfig.from_dict(values)
