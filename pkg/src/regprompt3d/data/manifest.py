"""Sample manifests (which clouds exist) and their on-disk formats."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corruptions import CorruptionSpec, corrupt
from .shapes import CLEAN, DomainStyle, PointCloud, gen_shape

# seed namespaces; PRETRAIN is reserved for the frozen surrogate
NS_TRAIN, NS_TEST, NS_TARGET, NS_CORRUPT, NS_PRETRAIN = 1, 2, 3, 4, 7


def derive_seed(*parts: int) -> int:
    """Order-sensitive 63-bit seed from integer parts (stable across processes)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class SampleRecord:
    class_name: str
    family: str
    seed: int
    n_points: int
    split: str
    domain: str = "clean"
    corruption: str = ""
    severity: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SampleRecord":
        return cls(**json.loads(line))


DOMAINS: dict[str, DomainStyle] = {
    "clean": CLEAN,
    "noisy": DomainStyle("noisy", noise_scale=3.0),
    "stretched": DomainStyle("stretched", aspect_scale=2.5),
    "partial": DomainStyle("partial", keep_fraction=0.75),
    "sparse": DomainStyle("sparse"),
    "spun": DomainStyle("spun", extra_yaw_deg=45.0),
}


def materialize(rec: SampleRecord, label: int = -1) -> PointCloud:
    style = DOMAINS[rec.domain]
    pc = gen_shape(rec.family, rec.seed, rec.n_points, label=label, style=style)
    pc.class_name = rec.class_name
    if rec.corruption:
        pc = corrupt(pc, CorruptionSpec(rec.corruption, rec.severity, derive_seed(rec.seed, NS_CORRUPT)))
    return pc


def make_records(class_names, family_of, per_class: int, split: str, config_seed: int, namespace: int,
                 n_points: int = 1024, domain: str = "clean") -> list[SampleRecord]:
    out = []
    for ci, name in enumerate(class_names):
        fam = family_of(name)
        cidx = _class_key(fam)
        for i in range(per_class):
            seed = derive_seed(config_seed, namespace, cidx, i)
            out.append(SampleRecord(name, fam, seed, n_points, split, domain))
    return out


def _class_key(family: str) -> int:
    return int.from_bytes(family.encode("utf-8")[:8].ljust(8, b"\0"), "little") % (2**31)


def save_manifest(path, records) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records), encoding="utf-8")


def load_manifest(path) -> list[SampleRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [SampleRecord.from_json(ln) for ln in lines if ln.strip()]


# ---------------------------------------------------------------- cloud cache

CLOUD_MAGIC = b"RPPC"
CLOUD_VERSION = 1


def cloud_bytes(points: np.ndarray) -> bytes:
    """16-byte header (magic, u32 version, u64 N) + little-endian float32 N x 3."""
    pts = np.asarray(points)
    return CLOUD_MAGIC + struct.pack("<IQ", CLOUD_VERSION, len(pts)) + pts.astype("<f4").tobytes()


def cloud_from_bytes(buf: bytes) -> np.ndarray:
    if buf[:4] != CLOUD_MAGIC:
        raise ValueError(f"bad point-cloud magic {buf[:4]!r}")
    version, n = struct.unpack_from("<IQ", buf, 4)
    if version != CLOUD_VERSION:
        raise ValueError(f"unsupported point-cloud version {version}")
    if len(buf) != 16 + 12 * n:
        raise ValueError(f"point-cloud payload is {len(buf) - 16} bytes, expected {12 * n}")
    return np.frombuffer(buf, dtype="<f4", offset=16).reshape(n, 3).astype(np.float64)


def save_cloud(path, points: np.ndarray) -> None:
    Path(path).write_bytes(cloud_bytes(points))


def load_cloud(path) -> np.ndarray:
    return cloud_from_bytes(Path(path).read_bytes())
