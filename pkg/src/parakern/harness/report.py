"""Machine-readable experiment reports: JSON verdicts plus CSV tables."""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class ExperimentReport:
    experiment: str
    citation: str
    config: dict
    records: list = dc_field(default_factory=list)
    tables: dict = dc_field(default_factory=dict)
    constants: dict = dc_field(default_factory=dict)
    started: float = dc_field(default_factory=time.time)

    def check(self, name, value, threshold, op="<="):
        value = float(value)
        ok = value <= threshold if op == "<=" else value >= threshold
        self.records.append({
            "name": name,
            "measured": value,
            "threshold": float(threshold),
            "op": op,
            "pass": bool(ok),
        })
        return ok

    def check_flag(self, name, ok, note=""):
        self.records.append({
            "name": name,
            "measured": bool(ok),
            "threshold": True,
            "op": "is",
            "pass": bool(ok),
            "note": note,
        })
        return ok

    def constant(self, name, value):
        self.constants[name] = _jsonable(value)

    def table(self, name, headers, rows):
        self.tables[name] = {"headers": list(headers),
                             "rows": [_jsonable(list(r)) for r in rows]}

    @property
    def passed(self):
        return all(r["pass"] for r in self.records)

    def summary_lines(self):
        out = []
        for r in self.records:
            mark = "PASS" if r["pass"] else "FAIL"
            out.append(f"[{mark}] {self.experiment}: {r['name']} = "
                       f"{r['measured']} ({r['op']} {r['threshold']})")
        return out

    def to_dict(self, wall_clock=True):
        d = {
            "experiment": self.experiment,
            "citation": self.citation,
            "config": _jsonable(self.config),
            "records": _jsonable(self.records),
            "constants": self.constants,
            "tables": {k: v["headers"] for k, v in self.tables.items()},
            "passed": self.passed,
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }
        if wall_clock:
            d["wall_clock_s"] = round(time.time() - self.started, 3)
        return d

    def write(self, outdir):
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "report.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        tdir = outdir / "tables"
        if self.tables:
            tdir.mkdir(exist_ok=True)
        for name, tbl in self.tables.items():
            with open(tdir / f"{name}.csv", "w") as fh:
                fh.write(",".join(tbl["headers"]) + "\n")
                for row in tbl["rows"]:
                    fh.write(",".join(str(v) for v in row) + "\n")
        return outdir / "report.json"
