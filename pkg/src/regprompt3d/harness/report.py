"""Structured reports: JSON record, text table, loss-curve CSV.

``report.json`` is a pure function of the configuration and seeds, so two
runs of the same config produce identical bytes. Wall-clock measurements
live in a separate ``timing.json`` next to it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

PROTOCOLS = ("base_to_new", "cross_domain", "corruption", "few_shot", "ablation")
REPORT_KEYS = ("protocol", "config", "per_seed", "aggregate", "timing")
CURVE_FIELDS = ("run", "seed", "epoch", "loss", "ce", "L_p", "L_t", "L_D", "lr", "val_acc")


@dataclass
class MetricsReport:
    protocol: str
    config: dict
    per_seed: list[dict]
    aggregate: dict
    timing: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        validate_report(d)
        return cls(**{k: d[k] for k in REPORT_KEYS})


def validate_report(d: dict) -> None:
    """Schema check: the five top-level keys with the right container types."""
    missing = [k for k in REPORT_KEYS if k not in d]
    if missing:
        raise ValueError(f"report is missing {missing}")
    extra = sorted(set(d) - set(REPORT_KEYS))
    if extra:
        raise ValueError(f"report has unknown keys {extra}")
    if d["protocol"] not in PROTOCOLS:
        raise ValueError(f"unknown protocol {d['protocol']!r}")
    for k, kind in (("config", dict), ("per_seed", list), ("aggregate", dict), ("timing", dict)):
        if not isinstance(d[k], kind):
            raise ValueError(f"report field {k!r} must be a {kind.__name__}")
    for row in d["per_seed"]:
        if not isinstance(row, dict) or "seed" not in row:
            raise ValueError("every per_seed entry needs a seed")


def load_report(path) -> MetricsReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return MetricsReport.from_dict(json.loads(path.read_text(encoding="utf-8")))


def emit_report(report: MetricsReport, out_dir) -> dict[str, Path]:
    """Write report.json, report.txt, losses.csv and timing.json into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": out / "report.json",
            "table": out / "report.txt",
            "curves": out / "losses.csv",
            "timing": out / "timing.json",
        }
        paths["json"].write_text(report.to_json(), encoding="utf-8")
        paths["table"].write_text(render_table(report), encoding="utf-8")
        paths["curves"].write_text(curves_csv(report), encoding="utf-8")
        paths["timing"].write_text(json.dumps(report.wall_clock, sort_keys=True, indent=2) + "\n",
                                   encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write report to {out}: {e}") from e
    return paths


# ---------------------------------------------------------------- curves


def _curve_rows(report: MetricsReport):
    for row in report.per_seed:
        for run, hist in row.get("curves", {}).items():
            for ep in hist:
                yield {"run": run, "seed": row["seed"], **ep}


def curves_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CURVE_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in _curve_rows(report):
        writer.writerow({k: _fmt_csv(r.get(k, "")) for k in CURVE_FIELDS})
    return buf.getvalue()


def _fmt_csv(v):
    return repr(v) if isinstance(v, float) else v


# ---------------------------------------------------------------- tables


def _cell(stat) -> str:
    if stat is None:
        return "-"
    if isinstance(stat, (int, float)):
        return f"{stat:.2f}"
    s = f"{stat['mean']:.2f}"
    return s + (f" ± {stat['std']:.2f}" if "std" in stat else "")


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]

    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def _mark(flag: bool) -> str:
    return "yes" if flag else "no"


def render_table(report: MetricsReport) -> str:
    agg = report.aggregate
    title = f"{report.protocol} ({len(report.per_seed)} seed(s))\n\n"
    if report.protocol == "base_to_new":
        rows = [[name, _cell(agg[name]["base"]), _cell(agg[name]["new"]), _cell(agg[name]["hm"])]
                for name in ("zero_shot", "tuned")]
        return title + _table(["method", "Base", "New", "HM"], rows)
    if report.protocol == "ablation":
        rows = [[_mark(r["mac"]), _mark(r["tdc"]), _mark(r["mec"]), _cell(r["base"]), _cell(r["new"]),
                 _cell(r["hm"])] for r in agg["rows"]]
        return title + _table(["MAC", "TDC", "MEC", "Base", "New", "HM"], rows)
    if report.protocol == "corruption":
        kinds = list(agg["tuned"]["corruptions"])
        header = ["method", "Clean"] + kinds + ["Avg"]
        rows = [[name, _cell(agg[name]["clean"])] + [_cell(agg[name]["corruptions"][k]) for k in kinds]
                + [_cell(agg[name]["average"])] for name in ("zero_shot", "tuned")]
        return title + _table(header, rows)
    if report.protocol == "cross_domain":
        targets = list(agg["tuned"]["targets"])
        header = ["method", "Source"] + targets + ["Avg"]
        rows = [[name, _cell(agg[name]["source"])] + [_cell(agg[name]["targets"][t]) for t in targets]
                + [_cell(agg[name]["average"])] for name in ("zero_shot", "tuned")]
        return title + _table(header, rows)
    if report.protocol == "few_shot":
        shots = sorted(agg["tuned"], key=int)
        rows = [[k, _cell(agg["tuned"][k])] for k in shots]
        rows.append(["zero-shot", _cell(agg["zero_shot"])])
        return title + _table(["shots", "Accuracy"], rows)
    raise ValueError(f"no table layout for {report.protocol!r}")
