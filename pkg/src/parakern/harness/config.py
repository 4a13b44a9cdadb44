"""Experiment configuration: one JSON document, overridable by dotted paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .. import coeffs
from ..errors import ConfigError
from ..grids import GridSpec

DEFAULT_CONFIG = {
    "experiment": "kernel-audit",
    "seed": 0,
    "threads": 1,
    "field": {"kind": "identity", "n": 1},
    "grid": {
        "n": 1,
        "space_window": [-4.0, 4.0],
        "nx": 128,
        "time_window": [-4.0, 4.0],
        "nt": 128,
        "pad": 0.8,
    },
    "epsilon_multiples": [8, 4, 2],
    "family_size": 32,
    "ratio_nodes": 80,
    "sample_counts": {},
    "tolerances": {},
}


@dataclass
class ExperimentConfig:
    data: dict = dc_field(default_factory=lambda: json.loads(json.dumps(DEFAULT_CONFIG)))

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            user = json.load(fh)
        cfg = ExperimentConfig()
        _deep_update(cfg.data, user)
        return cfg

    @staticmethod
    def from_dict(user: dict) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        _deep_update(cfg.data, user)
        return cfg

    def override(self, dotted_key: str, value: str):
        """Set a leaf by dotted path; values parse as JSON, else strings."""
        node = self.data
        parts = dotted_key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                node[p] = {}
            node = node[p]
        try:
            node[parts[-1]] = json.loads(value)
        except (json.JSONDecodeError, TypeError):
            node[parts[-1]] = value

    @property
    def experiment(self):
        return self.data["experiment"]

    @property
    def seed(self):
        return int(self.data.get("seed", 0))

    @property
    def threads(self):
        return int(self.data.get("threads", 1))

    def tolerance(self, name, default):
        return float(self.data.get("tolerances", {}).get(name, default))

    def samples(self, name, default):
        return int(self.data.get("sample_counts", {}).get(name, default))

    def validate(self, registry):
        if self.experiment not in registry:
            raise ConfigError(
                f"unknown experiment id {self.experiment!r}; "
                f"known: {sorted(registry)}"
            )
        build_field(self.data["field"])
        build_grid(self.data["grid"])


def _deep_update(base: dict, user: dict):
    for k, v in user.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


def build_field(spec: dict) -> coeffs.CoefficientField:
    """Coefficient field from its config section."""
    kind = spec.get("kind", "identity")
    n = int(spec.get("n", 1))
    try:
        if kind == "identity":
            return coeffs.identity_field(n)
        if kind == "constant":
            return coeffs.constant_field(np.asarray(spec["matrix"], dtype=float),
                                         lam=spec.get("lam"))
        if kind == "smooth-periodic":
            base = spec.get("base", np.eye(n).tolist())
            amp = spec.get("amplitude", (0.4 * np.eye(n)).tolist())
            period = spec.get("period", 2 * np.pi)
            return coeffs.smooth_periodic_field(np.asarray(base, dtype=float),
                                                np.asarray(amp, dtype=float),
                                                period=period,
                                                lam=spec.get("lam"))
        if kind in ("piecewise", "piecewise-constant"):
            # breakpoint table: list of [t, row-major entries...]; matrix k
            # applies from breakpoint k-1 on, the first one before all breaks
            if "table" in spec:
                breaks, mats = [], []
                first = spec["first"]
                mats.append(np.asarray(first, dtype=float).reshape(n, n))
                for row in spec["table"]:
                    breaks.append(float(row[0]))
                    mats.append(np.asarray(row[1:], dtype=float).reshape(n, n))
                return coeffs.piecewise_field(breaks, mats, lam=spec.get("lam"))
            return coeffs.piecewise_field(spec["breaks"],
                                          [np.asarray(m, dtype=float)
                                           for m in spec["matrices"]],
                                          lam=spec.get("lam"))
        if kind == "random-piecewise":
            return coeffs.random_piecewise_field(
                n, float(spec.get("lam", 0.5)), int(spec.get("seed", 0)),
                density=float(spec.get("density", 1.0)),
                window=tuple(spec.get("window", (-32.0, 32.0))))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid field spec {spec}: {exc}") from exc
    raise ConfigError(f"unknown field kind {kind!r}")


def build_grid(spec: dict) -> GridSpec:
    try:
        return GridSpec.regular(
            int(spec.get("n", 1)),
            tuple(spec.get("space_window", (-4.0, 4.0))),
            int(spec.get("nx", 128)),
            time_window=tuple(spec["time_window"]) if "time_window" in spec else None,
            nt=int(spec["nt"]) if "nt" in spec else None,
            pad=float(spec.get("pad", 0.8)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid grid spec {spec}: {exc}") from exc
