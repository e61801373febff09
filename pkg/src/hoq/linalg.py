"""Dense complex operator algebra on labeled tensor factors.

Operators carry an ordered list of ``(label, dim)`` factors; the matrix is
stored row-major with the first factor most significant.  Choi operators use
the input-factor-first convention: the Choi matrix of a map from A to B lives
on ``A (x) B`` and a channel satisfies ``Tr_B[M] = 1_A``.  All transposes are
taken in the fixed computational basis of each factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadPermutation,
    DimMismatch,
    LabelCollision,
    NotHermitian,
    ShapeMismatch,
    UnknownLabel,
)

TOL_HERM = 1e-10
TOL_PSD = 1e-9


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """A complex square matrix over an ordered list of named tensor factors."""

    factors: tuple[tuple[str, int], ...]
    data: np.ndarray

    def __post_init__(self):
        factors = tuple((str(lab), int(d)) for lab, d in self.factors)
        object.__setattr__(self, "factors", factors)
        total = math.prod(d for _, d in factors)
        arr = np.asarray(self.data, dtype=complex)
        if arr.shape != (total, total):
            raise ShapeMismatch(
                f"matrix shape {arr.shape} does not match factor dimensions (product {total})")
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise LabelCollision(f"repeated factor labels in {labels}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dim_of(self, label: str) -> int:
        for lab, d in self.factors:
            if lab == label:
                return d
        raise UnknownLabel(label)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def herm_defect(self) -> float:
        return float(np.abs(self.data - self.data.conj().T).max())

    def __repr__(self):
        spec = ",".join(f"{lab}:{d}" for lab, d in self.factors)
        return f"LabeledOperator([{spec}], dim={self.dim})"


def identity(factors: Iterable[tuple[str, int]]) -> LabeledOperator:
    factors = tuple(factors)
    total = math.prod(d for _, d in factors)
    return LabeledOperator(factors, np.eye(total, dtype=complex))


def scalar(value: complex = 1.0) -> LabeledOperator:
    """The trivial (zero-factor) operator: a 1x1 matrix."""
    return LabeledOperator((), np.array([[value]], dtype=complex))


def _as_tensor(a: LabeledOperator) -> np.ndarray:
    return a.data.reshape(a.dims + a.dims)


def tensor_op(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Kronecker product; factor list is a's factors followed by b's."""
    if set(a.labels) & set(b.labels):
        raise LabelCollision(f"shared labels {sorted(set(a.labels) & set(b.labels))}")
    return LabeledOperator(a.factors + b.factors, np.kron(a.data, b.data))


def permute_systems(a: LabeledOperator, order: Sequence[str]) -> LabeledOperator:
    """Reorder tensor factors; the matrix is conjugated by the permutation."""
    order = tuple(order)
    if sorted(order) != sorted(a.labels):
        raise BadPermutation(f"{order} is not a permutation of {a.labels}")
    if order == a.labels:
        return a
    perm = [a.labels.index(lab) for lab in order]
    k = len(perm)
    tens = _as_tensor(a).transpose(tuple(perm) + tuple(k + p for p in perm))
    new_factors = tuple(a.factors[p] for p in perm)
    total = a.dim
    return LabeledOperator(new_factors, tens.reshape(total, total))


def relabel(a: LabeledOperator, mapping: dict[str, str]) -> LabeledOperator:
    """Rename factor labels without touching the matrix."""
    new_factors = tuple((mapping.get(lab, lab), d) for lab, d in a.factors)
    return LabeledOperator(new_factors, a.data)


def merge_factors(a: LabeledOperator, group: Sequence[str], new_label: str) -> LabeledOperator:
    """Fuse a run of factors into one factor of the product dimension.

    The factors in ``group`` must be contiguous in the operator's current
    order (permute first if they are not); their order inside the group is
    preserved, which fixes the basis of the merged factor.
    """
    labels = a.labels
    group = tuple(group)
    for lab in group:
        if lab not in labels:
            raise UnknownLabel(lab)
    start = labels.index(group[0])
    if labels[start:start + len(group)] != group:
        raise BadPermutation(f"factors {group} are not contiguous in {labels}")
    merged_dim = math.prod(a.dim_of(lab) for lab in group)
    new_factors = (a.factors[:start]
                   + ((new_label, merged_dim),)
                   + a.factors[start + len(group):])
    return LabeledOperator(new_factors, a.data)


def drop_trivial(a: LabeledOperator) -> LabeledOperator:
    """Remove dimension-1 factors (they carry no matrix content)."""
    kept = tuple(f for f in a.factors if f[1] > 1)
    if kept == a.factors:
        return a
    return LabeledOperator(kept, a.data)


def partial_trace(a: LabeledOperator, subset: Iterable[str]) -> LabeledOperator:
    """Trace out the given factors; the remaining factor order is preserved."""
    subset = set(subset)
    for lab in subset:
        if lab not in a.labels:
            raise UnknownLabel(lab)
    if not subset:
        return a
    tens = _as_tensor(a)
    k = len(a.factors)
    keep = [i for i, (lab, _) in enumerate(a.factors) if lab not in subset]
    out = tens
    # trace highest axis pairs first so earlier indices stay valid
    for i in sorted((i for i in range(k) if i not in keep), reverse=True):
        out = np.trace(out, axis1=i, axis2=i + out.ndim // 2)
    new_factors = tuple(a.factors[i] for i in keep)
    total = math.prod(d for _, d in new_factors)
    return LabeledOperator(new_factors, out.reshape(total, total))


def partial_transpose(a: LabeledOperator, subset: Iterable[str]) -> LabeledOperator:
    """Transpose the given factors in the computational basis."""
    subset = set(subset)
    for lab in subset:
        if lab not in a.labels:
            raise UnknownLabel(lab)
    k = len(a.factors)
    axes = list(range(2 * k))
    for i, (lab, _) in enumerate(a.factors):
        if lab in subset:
            axes[i], axes[k + i] = axes[k + i], axes[i]
    tens = _as_tensor(a).transpose(axes)
    return LabeledOperator(a.factors, tens.reshape(a.dim, a.dim))


def transpose(a: LabeledOperator) -> LabeledOperator:
    return LabeledOperator(a.factors, a.data.T)


def link_product(n: LabeledOperator, m: LabeledOperator) -> LabeledOperator:
    """Contract two operators over their shared factor labels.

    Disjoint labels reduce to the tensor product, identical label sets to the
    scalar ``Tr[n^T m]``.  Output factors are n's unshared factors followed by
    m's unshared factors.
    """
    shared = [lab for lab in n.labels if lab in m.labels]
    for lab in shared:
        if n.dim_of(lab) != m.dim_of(lab):
            raise DimMismatch(
                f"shared factor {lab!r} has dims {n.dim_of(lab)} and {m.dim_of(lab)}")
    n_only = [lab for lab in n.labels if lab not in shared]
    m_only = [lab for lab in m.labels if lab not in shared]

    np_ = permute_systems(n, n_only + shared)
    mp = permute_systems(m, shared + m_only)
    dn = math.prod(np_.dim_of(lab) for lab in n_only)
    ds = math.prod(np_.dim_of(lab) for lab in shared)
    dm = math.prod(mp.dim_of(lab) for lab in m_only)

    # out[(a,c),(b,d)] = sum_{s,t} n[(a,s),(b,t)] m[(s,c),(t,d)]
    # grouped as a matrix product over the doubled shared index (s,t)
    n2 = np_.data.reshape(dn, ds, dn, ds).transpose(0, 2, 1, 3).reshape(dn * dn, ds * ds)
    m2 = mp.data.reshape(ds, dm, ds, dm).transpose(0, 2, 1, 3).reshape(ds * ds, dm * dm)
    out = (n2 @ m2).reshape(dn, dn, dm, dm).transpose(0, 2, 1, 3)
    factors = tuple((lab, np_.dim_of(lab)) for lab in n_only) + \
        tuple((lab, mp.dim_of(lab)) for lab in m_only)
    return LabeledOperator(factors, out.reshape(dn * dm, dn * dm))


def link_all(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    out = ops[0]
    for op in ops[1:]:
        out = link_product(out, op)
    return out


# ---------------------------------------------------------------------------
# Choi maps
# ---------------------------------------------------------------------------

def max_entangled(label_a: str, label_b: str, d: int) -> LabeledOperator:
    """The unnormalized maximally entangled projector between two factors."""
    v = np.eye(d, dtype=complex).reshape(-1)
    return LabeledOperator(((label_a, d), (label_b, d)), np.outer(v, v.conj()))


def choi_of_kraus(kraus: Sequence[np.ndarray], in_label: str,
                  out_label: str) -> LabeledOperator:
    """Choi operator of the map with the given Kraus operators.

    Input factor first: the result lives on ``in (x) out``.
    """
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    if not kraus:
        raise ShapeMismatch("at least one Kraus operator required")
    d_out, d_in = kraus[0].shape
    mat = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        if k.shape != (d_out, d_in):
            raise ShapeMismatch(f"inconsistent Kraus shapes {k.shape} vs {(d_out, d_in)}")
        # |K>> = sum_j |j> (x) K|j>
        vec = k.T.reshape(-1)
        mat += np.outer(vec, vec.conj())
    return LabeledOperator(((in_label, d_in), (out_label, d_out)), mat)


def apply_choi(m: LabeledOperator, in_labels: Sequence[str],
               state: LabeledOperator) -> LabeledOperator:
    """Apply the map with Choi operator ``m`` to ``state`` on ``in_labels``."""
    in_labels = list(in_labels)
    if len(state.factors) != len(in_labels):
        raise ShapeMismatch("state factor count does not match in_labels")
    renamed = relabel(state, dict(zip(state.labels, in_labels)))
    for lab in in_labels:
        if renamed.dim_of(lab) != m.dim_of(lab):
            raise DimMismatch(f"state and Choi disagree on dim of {lab!r}")
    return link_product(renamed, m)


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------

def _require_hermitian(a: LabeledOperator, tol: float) -> np.ndarray:
    defect = a.herm_defect()
    if defect > tol:
        raise NotHermitian(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return (a.data + a.data.conj().T) / 2


def eigh(a: LabeledOperator, tol_herm: float = TOL_HERM):
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""
    sym = _require_hermitian(a, tol_herm)
    return np.linalg.eigh(sym)


def min_eigenvalue(a: LabeledOperator, tol_herm: float = TOL_HERM) -> float:
    sym = _require_hermitian(a, tol_herm)
    return float(np.linalg.eigvalsh(sym)[0])


def is_psd(a: LabeledOperator, tol: float = TOL_PSD,
           tol_herm: float = TOL_HERM) -> bool:
    return min_eigenvalue(a, tol_herm) >= -tol


def psd_sqrt_pinv(a: LabeledOperator, tol: float = TOL_PSD,
                  tol_herm: float = TOL_HERM):
    """Square root, pseudo-inverse square root and support projector.

    Eigenvalues below ``tol * max(largest eigenvalue, 1)`` are treated as
    zero and excluded from the support.
    """
    vals, vecs = eigh(a, tol_herm)
    cutoff = tol * max(float(vals[-1]) if len(vals) else 0.0, 1.0)
    keep = vals > cutoff
    vp = vecs[:, keep]
    sq = (vp * np.sqrt(vals[keep])) @ vp.conj().T
    pinv = (vp / np.sqrt(vals[keep])) @ vp.conj().T
    supp = vp @ vp.conj().T
    return (LabeledOperator(a.factors, sq),
            LabeledOperator(a.factors, pinv),
            LabeledOperator(a.factors, supp))
