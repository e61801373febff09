"""File formats: operator JSON, network bundles, and the key-value config.

Operator schema: ``{"factors": [["A", 2], ...], "matrix": [[[re, im], ...]]}``
with the matrix row-major and the first factor most significant.  Files whose
name ends in ``.gz`` are gzip containers of the same JSON.
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeMismatch
from .linalg import LabeledOperator
from .network import NetworkSpec
from .typesys import SystemRegistry, parse_type, print_type


def operator_to_dict(op: LabeledOperator) -> dict:
    matrix = [[[float(z.real), float(z.imag)] for z in row] for row in op.data]
    return {"factors": [[lab, d] for lab, d in op.factors], "matrix": matrix}


def operator_from_dict(payload: dict) -> LabeledOperator:
    try:
        factors = tuple((str(lab), int(d)) for lab, d in payload["factors"])
        rows = payload["matrix"]
        data = np.array([[complex(re, im) for re, im in row] for row in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed operator payload: {exc}") from None
    return LabeledOperator(factors, data)


def _open(path: str, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_operator(op: LabeledOperator, path: str) -> None:
    with _open(path, "w") as fh:
        json.dump(operator_to_dict(op), fh)
        fh.write("\n")


def read_operator(path: str) -> LabeledOperator:
    with _open(path, "r") as fh:
        return operator_from_dict(json.load(fh))


def bundle_to_dict(blocks, spec: NetworkSpec) -> dict:
    return {
        "blocks": [operator_to_dict(b) for b in blocks],
        "spec": {
            "slot_types": [print_type(t) for t in spec.slot_types],
            "memories": list(spec.memories),
        },
    }


def bundle_from_dict(payload: dict, reg: SystemRegistry):
    try:
        blocks = [operator_from_dict(b) for b in payload["blocks"]]
        spec_part = payload["spec"]
        memories = tuple(str(m) for m in spec_part["memories"])
        type_strings = list(spec_part["slot_types"])
    except (KeyError, TypeError) as exc:
        raise ShapeMismatch(f"malformed bundle payload: {exc}") from None
    # memory labels may be synthetic (from a decomposition); pick their
    # dimensions up from the block factors
    extra = {}
    for mem in memories:
        if mem == "I" or mem in reg:
            continue
        for b in blocks:
            if mem in b.labels:
                extra[mem] = b.dim_of(mem)
                break
        else:
            raise ShapeMismatch(f"memory {mem!r} not registered and absent from blocks")
    full_reg = reg.with_entries(**extra) if extra else reg
    slot_types = tuple(parse_type(s, full_reg) for s in type_strings)
    return blocks, NetworkSpec(slot_types, memories), full_reg


def write_bundle(blocks, spec: NetworkSpec, path: str) -> None:
    with _open(path, "w") as fh:
        json.dump(bundle_to_dict(blocks, spec), fh)
        fh.write("\n")


def read_bundle(path: str, reg: SystemRegistry):
    with _open(path, "r") as fh:
        return bundle_from_dict(json.load(fh), reg)


def spec_from_dict(payload: dict, reg: SystemRegistry) -> NetworkSpec:
    try:
        memories = tuple(str(m) for m in payload["memories"])
        slot_types = tuple(parse_type(s, reg) for s in payload["slot_types"])
    except (KeyError, TypeError) as exc:
        raise ShapeMismatch(f"malformed network spec: {exc}") from None
    return NetworkSpec(slot_types, memories)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class Config:
    """Registry plus tolerances and limits, from a key-value text file.

    Recognized keys: ``registry.<LABEL>``, ``tol.{herm,psd,sector,feas}``,
    ``limits.{max_dim,max_iter,recursion}``.  Unknown keys are rejected.
    """

    registry: SystemRegistry = field(default_factory=lambda: SystemRegistry.from_dict({}))
    tol_herm: float = 1e-10
    tol_psd: float = 1e-9
    tol_sector: float = 1e-9
    tol_feas: float = 1e-7
    max_dim: int = 4096
    max_iter: int = 5000
    recursion: int = 64


_TOL_KEYS = {"herm": "tol_herm", "psd": "tol_psd", "sector": "tol_sector", "feas": "tol_feas"}
_LIMIT_KEYS = {"max_dim": "max_dim", "max_iter": "max_iter", "recursion": "recursion"}


def parse_config(text: str) -> Config:
    cfg = Config()
    registry: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key.startswith("registry."):
                registry[key[len("registry."):]] = int(value)
            elif key.startswith("tol."):
                attr = _TOL_KEYS.get(key[len("tol."):])
                if attr is None:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
                setattr(cfg, attr, float(value))
            elif key.startswith("limits."):
                attr = _LIMIT_KEYS.get(key[len("limits."):])
                if attr is None:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
                setattr(cfg, attr, int(value))
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key!r}") from None
    if registry:
        cfg.registry = SystemRegistry.from_dict(registry)
    return cfg


def load_config(path: str) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_inline_registry(text: str) -> dict[str, int]:
    """Parse ``A=2,B=2,P=4`` into a label-to-dimension mapping."""
    out: dict[str, int] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigError(f"bad registry entry {chunk!r}, expected LABEL=DIM")
        label, dim = chunk.split("=", 1)
        try:
            out[label.strip()] = int(dim)
        except ValueError:
            raise ConfigError(f"bad dimension in registry entry {chunk!r}") from None
    return out
