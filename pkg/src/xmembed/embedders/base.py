"""Shared embedding result type and helpers for the embedders."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureMatrix, sense_features
from ..graph import Graph
from ..validation import check_features_for
from ..xm import XmConfig


class EmbeddingCollapse(ArithmeticError):
    """Training produced a (near) zero embedding row."""


class TrainingDiverged(ArithmeticError):
    """Loss or parameters became non-finite."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class EmbeddingMatrix:
    """Trained n x d embedding plus provenance."""

    values: np.ndarray
    method: str
    xm_enabled: bool
    seed: int
    epochs: int
    epoch_seconds: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def to_csv(self, labels=None) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["node", *(f"dim_{i}" for i in range(self.d))])
        for i, row in enumerate(self.values):
            w.writerow([labels[i] if labels else i, *(repr(float(x)) for x in row)])
        return out.getvalue()

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "d": self.d,
            "n": self.n,
            "xm_enabled": self.xm_enabled,
            "seed": self.seed,
            "epochs": self.epochs,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "epoch_seconds": list(self.epoch_seconds),
            "losses": list(self.losses),
        }

    def to_json(self) -> str:
        return json.dumps({**self.metadata(), "values": self.values.tolist()}, sort_keys=True)

    @classmethod
    def from_csv(cls, stream, **meta) -> "EmbeddingMatrix":
        rows = list(csv.reader(stream))
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        meta.setdefault("method", "unknown")
        meta.setdefault("xm_enabled", False)
        meta.setdefault("seed", 0)
        meta.setdefault("epochs", 0)
        return cls(values, **meta)


def resolve_features(g: Graph, F, xm: XmConfig, names) -> np.ndarray | None:
    """Feature array used by the XM terms, computed from ``g`` when not supplied."""
    if not xm.enabled:
        return None
    if F is None:
        F = sense_features(g, names)
    if isinstance(F, FeatureMatrix) and not F.normalized:
        raise ValueError("XM terms need a normalized feature matrix")
    return check_features_for(g, F)


def check_embedding_health(y: np.ndarray, method: str) -> None:
    if not np.all(np.isfinite(y)):
        raise TrainingDiverged(f"{method}: non-finite embedding values")
    norms = np.linalg.norm(y, axis=1)
    if np.any(norms < 1e-12):
        raise EmbeddingCollapse(
            f"{method}: embedding collapsed for node(s) {np.flatnonzero(norms < 1e-12)[:10].tolist()}")
