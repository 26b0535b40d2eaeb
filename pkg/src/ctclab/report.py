"""JSON reports: exact rationals as [num, den], timing kept in its own section."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ctclab.dist import StringDist

SCHEMA = 1


def rational(x: Fraction) -> list[int]:
    x = Fraction(x)
    return [x.numerator, x.denominator]


def dist_records(d: StringDist) -> list[list]:
    return [[s, n, den] for s, n, den in d.to_records()]


def matrix_pairs(a: np.ndarray) -> list[list[list[float]]]:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _encode(obj: Any):
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, StringDist):
        return dist_records(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return matrix_pairs(obj) if obj.ndim == 2 else obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Report:
    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    outcome: Optional[str] = None
    exit_code: int = 0
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_json(self, include_timing: bool = True) -> str:
        body = {
            "schema": SCHEMA,
            "command": self.command,
            "inputs": self.inputs,
            "outcome": self.outcome,
            "exit_code": self.exit_code,
            "witness": _encode(self.witness),
            "details": _encode(self.details),
        }
        if include_timing:
            body["timing"] = _encode(self.timing)
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
