"""Machine-readable run reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any


@dataclass
class Quantity:
    value: float
    unit: str
    sigma: float | None = None

    def __post_init__(self):
        if not isinstance(self.unit, str) or not self.unit:
            raise ValueError("every reported quantity needs a unit string ('1' if dimensionless)")


@dataclass
class RunReport:
    command: str
    inputs: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, Quantity] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    status: str = "ok"

    def add(self, name: str, value: float, unit: str, sigma: float | None = None) -> None:
        self.outputs[name] = Quantity(float(value), unit, None if sigma is None else float(sigma))

    def stamp(self, tool: str, version: str) -> None:
        self.provenance = {
            "tool": tool,
            "version": version,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d["outputs"] = {k: Quantity(**q) for k, q in d.get("outputs", {}).items()}
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def _jsonable(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")
