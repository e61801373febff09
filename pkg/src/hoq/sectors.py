"""Exact characterization of deterministic events: identity coefficient and
traceless sector set of every type in the hierarchy.

Deterministic events of a type are exactly the positive operators
``coeff * identity + X`` where ``X`` lives in a fixed subspace of traceless
Hermitian operators.  Every such subspace arising here is a direct sum of
*sector patterns*: per-factor choices between the span of the identity (I)
and the traceless Hermitian operators (T).  Subspace arithmetic therefore
reduces to exact finite set algebra on patterns; no numerical rank decisions
are involved.  Numerical projections onto patterns live at the bottom of this
module and are used by the membership checks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import FactorMismatch, HatInStandardHierarchy, NotHermitian
from .linalg import TOL_HERM, LabeledOperator, permute_systems
from .typesys import (
    Arrow,
    BistochElem,
    SystemRegistry,
    SystemString,
    TypeExpr,
    systems_of,
    type_dim,
)

IDN = "I"
TRL = "T"


class Hierarchy(Enum):
    """Which ground level the recursion starts from.

    BISTOCH admits bidirectional pairs as elementary types; STANDARD is the
    ordinary hierarchy of hat-free types used as the classification baseline.
    """

    BISTOCH = "bistoch"
    STANDARD = "standard"


@dataclass(frozen=True)
class Pattern:
    """Per-factor assignment of identity-span (I) or traceless (T)."""

    marks: tuple[str, ...]

    def __post_init__(self):
        for m in self.marks:
            if m != IDN and m != TRL:
                raise ValueError(f"pattern marks must be '{IDN}' or '{TRL}': {self.marks}")

    @property
    def all_identity(self) -> bool:
        return TRL not in self.marks

    def text(self, systems: Sequence[tuple[str, int]]) -> str:
        return " ".join(f"{lab}:{m}" for (lab, _), m in zip(systems, self.marks))

    def __add__(self, other: "Pattern") -> "Pattern":
        return Pattern(self.marks + other.marks)


def _mask_of(marks: tuple[str, ...]) -> int:
    mask = 0
    for i, m in enumerate(marks):
        if m == TRL:
            mask |= 1 << i
    return mask


def _marks_of(mask: int, k: int) -> tuple[str, ...]:
    return tuple(TRL if mask >> i & 1 else IDN for i in range(k))


class SectorSet:
    """A union of mutually orthogonal sector patterns over named systems.

    Internally each pattern is a bitmask (bit ``i`` set when factor ``i`` is
    traceless), which keeps the subspace arithmetic exact and cheap; the
    ``patterns`` view materializes :class:`Pattern` objects on demand.
    """

    __slots__ = ("systems", "masks", "_patterns")

    def __init__(self, systems, patterns):
        self.systems = tuple(systems)
        k = len(self.systems)
        masks = set()
        for p in patterns:
            if isinstance(p, Pattern):
                if len(p.marks) != k:
                    raise ValueError("pattern length does not match system count")
                masks.add(_mask_of(p.marks))
            else:
                masks.add(int(p))
        if any(m >> k for m in masks):
            raise ValueError("pattern mask out of range for system count")
        self.masks = frozenset(masks)
        self._patterns = None

    @property
    def patterns(self) -> frozenset[Pattern]:
        if self._patterns is None:
            k = len(self.systems)
            self._patterns = frozenset(Pattern(_marks_of(m, k)) for m in self.masks)
        return self._patterns

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.systems)

    def __contains__(self, p) -> bool:
        if isinstance(p, Pattern):
            return _mask_of(p.marks) in self.masks
        return int(p) in self.masks

    def __len__(self) -> int:
        return len(self.masks)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SectorSet) and self.systems == other.systems
                and self.masks == other.masks)

    def __hash__(self):
        return hash((self.systems, self.masks))

    def __repr__(self):
        return f"SectorSet({self.systems}, {len(self.masks)} patterns)"

    def same_subspace(self, other: "SectorSet") -> bool:
        """Equality as subspaces, insensitive to factor ordering."""
        if dict(self.systems) != dict(other.systems):
            return False
        if self.labels == other.labels:
            return self.masks == other.masks
        where = [other.labels.index(lab) for lab in self.labels]
        remapped = {sum(((m >> w) & 1) << j for j, w in enumerate(where))
                    for m in other.masks}
        return set(self.masks) == remapped

    def reorder(self, labels: Sequence[str]) -> "SectorSet":
        labs = self.labels
        perm = [labs.index(lab) for lab in labels]
        systems = tuple(self.systems[i] for i in perm)
        masks = {sum(((m >> p) & 1) << j for j, p in enumerate(perm))
                 for m in self.masks}
        return SectorSet(systems, masks)

    def texts(self) -> list[str]:
        """Deterministic rendering, traceless marks sorting first."""
        order = {TRL: 0, IDN: 1}
        pats = sorted(self.patterns, key=lambda p: tuple(order[m] for m in p.marks))
        return [p.text(self.systems) for p in pats]


def full_space(systems) -> SectorSet:
    """All Hermitian operators: every pattern."""
    systems = tuple(systems)
    return SectorSet(systems, range(1 << len(systems)))


def traceless_space(systems) -> SectorSet:
    """All traceless Hermitian operators: every pattern except all-identity."""
    systems = tuple(systems)
    return SectorSet(systems, range(1, 1 << len(systems)))


def identity_span(systems) -> SectorSet:
    return SectorSet(tuple(systems), (0,))


def sector_product(*sets: SectorSet) -> SectorSet:
    """Tensor product: concatenated systems, cartesian product of patterns."""
    systems = tuple(itertools.chain.from_iterable(s.systems for s in sets))
    combined = {0}
    shift = 0
    for s in sets:
        combined = {c | (m << shift) for c in combined for m in s.masks}
        shift += len(s.systems)
    return SectorSet(systems, combined)


def sector_union(*sets: SectorSet) -> SectorSet:
    systems = sets[0].systems
    for s in sets[1:]:
        if s.systems != systems:
            raise ValueError("union requires identical system lists")
    return SectorSet(systems, frozenset().union(*(s.masks for s in sets)))


def _complement_in(sub: SectorSet, whole: SectorSet) -> SectorSet:
    return SectorSet(whole.systems, whole.masks - sub.masks)


# ---------------------------------------------------------------------------
# The recursion
# ---------------------------------------------------------------------------

def identity_coeff(t: TypeExpr, reg: SystemRegistry,
                   hierarchy: Hierarchy = Hierarchy.BISTOCH) -> Fraction:
    """Exact identity coefficient of deterministic events of type ``t``."""
    return _coeff_cached(t, reg, hierarchy)


@lru_cache(maxsize=4096)
def _coeff_cached(t: TypeExpr, reg: SystemRegistry, hierarchy: Hierarchy) -> Fraction:
    if isinstance(t, SystemString):
        return Fraction(1, type_dim(t, reg))
    if isinstance(t, BistochElem):
        if hierarchy is Hierarchy.STANDARD:
            raise HatInStandardHierarchy(
                "hatted elementary type in the standard hierarchy; dehat first")
        d_out_tail = math.prod(reg.dim(lab) for lab in t.out_tail)
        return Fraction(1, reg.dim(t.hat_out) * d_out_tail)
    coeff_x = _coeff_cached(t.lhs, reg, hierarchy)
    coeff_y = _coeff_cached(t.rhs, reg, hierarchy)
    return coeff_y / (type_dim(t.lhs, reg) * coeff_x)


def deviation_sectors(t: TypeExpr, reg: SystemRegistry,
                      hierarchy: Hierarchy = Hierarchy.BISTOCH) -> SectorSet:
    """The traceless subspace of allowed deviations for type ``t``.

    The result never contains the all-identity pattern; membership checks
    treat the identity component separately through the coefficient.
    """
    return _deviation_cached(t, reg, hierarchy)


@lru_cache(maxsize=4096)
def _deviation_cached(t: TypeExpr, reg: SystemRegistry, hierarchy: Hierarchy) -> SectorSet:
    if isinstance(t, SystemString):
        return traceless_space(systems_of(t, reg))
    if isinstance(t, BistochElem):
        if hierarchy is Hierarchy.STANDARD:
            raise HatInStandardHierarchy(
                "hatted elementary type in the standard hierarchy; dehat first")
        head = [(t.hat_in, reg.dim(t.hat_in))] \
            + [(lab, reg.dim(lab)) for lab in t.in_tail] \
            + [(t.hat_out, reg.dim(t.hat_out))]
        tail = [(lab, reg.dim(lab)) for lab in t.out_tail]
        free_head = full_space(head)
        # any head pattern with a traceless output tail, plus the purely
        # bidirectional sector: traceless on both hatted systems, identity
        # on the output tail
        fam1 = sector_product(free_head, traceless_space(tail))
        n_tail_in = len(t.in_tail)
        hat_out_bit = 1 << (n_tail_in + 1)
        pinned = SectorSet(
            tuple(head),
            {1 | (mid << 1) | hat_out_bit for mid in range(1 << n_tail_in)})
        fam2 = sector_product(pinned, identity_span(tail))
        out = sector_union(fam1, fam2)
        assert 0 not in out.masks
        return out
    dev_x = _deviation_cached(t.lhs, reg, hierarchy)
    dev_y = _deviation_cached(t.rhs, reg, hierarchy)
    return arrow_sectors(dev_x, dev_y)


def arrow_sectors(dev_x: SectorSet, dev_y: SectorSet) -> SectorSet:
    """Deviation subspace of an arrow type from those of its two sides."""
    hrm_x = full_space(dev_x.systems)
    bar_x = _complement_in(dev_x, traceless_space(dev_x.systems))
    perp_y = _complement_in(dev_y, full_space(dev_y.systems))
    out = sector_union(sector_product(hrm_x, dev_y),
                       sector_product(bar_x, perp_y))
    assert 0 not in out.masks
    return out


def arrow_coeff(coeff_x: Fraction, dim_x: int, coeff_y: Fraction) -> Fraction:
    return coeff_y / (dim_x * coeff_x)


def dual_deviation_direct(t: TypeExpr, reg: SystemRegistry,
                          hierarchy: Hierarchy = Hierarchy.BISTOCH) -> SectorSet:
    """Deviation subspace of the functional type, by the direct formula.

    Must agree with running the arrow recursion on ``dual(t)``; used as a
    cross-check of the recursion.
    """
    dev = deviation_sectors(t, reg, hierarchy)
    return _complement_in(dev, traceless_space(dev.systems))


def dual_coeff_direct(t: TypeExpr, reg: SystemRegistry,
                      hierarchy: Hierarchy = Hierarchy.BISTOCH) -> Fraction:
    return 1 / (identity_coeff(t, reg, hierarchy) * type_dim(t, reg))


def tensor_deviation_direct(a: TypeExpr, b: TypeExpr, reg: SystemRegistry,
                            hierarchy: Hierarchy = Hierarchy.BISTOCH) -> SectorSet:
    """Deviation subspace of a parallel composition, by the direct formula."""
    da = deviation_sectors(a, reg, hierarchy)
    db = deviation_sectors(b, reg, hierarchy)
    ia = identity_span(da.systems)
    ib = identity_span(db.systems)
    return sector_union(sector_product(da, ib),
                        sector_product(da, db),
                        sector_product(ia, db))


def tensor_coeff_direct(a: TypeExpr, b: TypeExpr, reg: SystemRegistry,
                        hierarchy: Hierarchy = Hierarchy.BISTOCH) -> Fraction:
    return identity_coeff(a, reg, hierarchy) * identity_coeff(b, reg, hierarchy)


# ---------------------------------------------------------------------------
# Causally ordered networks
# ---------------------------------------------------------------------------

def network_characterization(slot_types: Sequence[TypeExpr], e0: str, en: str,
                             reg: SystemRegistry,
                             hierarchy: Hierarchy = Hierarchy.BISTOCH,
                             ) -> tuple[Fraction, SectorSet]:
    """Coefficient and sector set of causally ordered networks.

    ``slot_types`` are the per-slot types; ``e0`` and ``en`` the global input
    and output memories (label ``I`` for trivial).  Operators live on
    ``e0, slot systems..., en`` in that order.
    """
    if not slot_types:
        raise ValueError("a network needs at least one slot")
    mem0 = [] if e0 == "I" else [(e0, reg.dim(e0))]
    memn = [] if en == "I" else [(en, reg.dim(en))]
    slot_devs = [deviation_sectors(x, reg, hierarchy) for x in slot_types]

    coeff = Fraction(1, reg.dim(en))
    for x in slot_types:
        coeff *= identity_coeff(x, reg, hierarchy)

    free0 = full_space(mem0)
    families = [sector_product(free0,
                               *(full_space(d.systems) for d in slot_devs),
                               traceless_space(memn))]
    for i, dev_i in enumerate(slot_devs):
        parts = [free0]
        parts += [full_space(d.systems) for d in slot_devs[:i]]
        parts.append(dev_i)
        parts += [identity_span(d.systems) for d in slot_devs[i + 1:]]
        parts.append(identity_span(memn))
        families.append(sector_product(*parts))
    out = sector_union(*families)
    assert 0 not in out.masks
    return coeff, out


# ---------------------------------------------------------------------------
# Numerical sector projections
# ---------------------------------------------------------------------------

def _identity_average(tens: np.ndarray, dims: Sequence[int], i: int) -> np.ndarray:
    """Replace factor ``i`` of a (rows+cols)-indexed tensor by Tr/d (x) 1."""
    d = dims[i]
    left = math.prod(dims[:i])
    right = math.prod(dims[i + 1:])
    t = tens.reshape(left, d, right, left, d, right)
    partial = t[:, 0, :, :, 0, :].copy()
    for a in range(1, d):
        partial += t[:, a, :, :, a, :]
    partial /= d
    out = np.zeros_like(t)
    for a in range(d):
        out[:, a, :, :, a, :] = partial
    return out.reshape(tens.shape)


def sector_component(op: LabeledOperator, pattern: Pattern,
                     tol_herm: float = TOL_HERM) -> LabeledOperator:
    """Orthogonal component of a Hermitian operator on one sector pattern."""
    if len(pattern.marks) != len(op.factors):
        raise FactorMismatch("pattern length does not match operator factors")
    if op.herm_defect() > tol_herm:
        raise NotHermitian(f"hermiticity defect {op.herm_defect():.3e}")
    data = op.data
    dims = op.dims
    for i, mark in enumerate(pattern.marks):
        avg = _identity_average(data, dims, i)
        data = avg if mark == IDN else data - avg
    return LabeledOperator(op.factors, data)


def _split_shape(dims, pos):
    d = dims[pos]
    left = math.prod(dims[:pos])
    right = math.prod(dims[pos + 1:])
    return left, d, right


def _traced_average(data: np.ndarray, dims, pos: int) -> np.ndarray:
    """Tr over factor ``pos`` divided by its dimension; factor removed."""
    left, d, right = _split_shape(dims, pos)
    t = data.reshape(left, d, right, left, d, right)
    out = t[:, 0, :, :, 0, :].copy()
    for a in range(1, d):
        out += t[:, a, :, :, a, :]
    out /= d
    lr = left * right
    return out.reshape(lr, lr)


def _embed_identity(small: np.ndarray, dims, pos: int) -> np.ndarray:
    """Insert an identity factor at ``pos``: the inverse of the average map."""
    left, d, right = _split_shape(dims, pos)
    lr = left * right
    s = small.reshape(left, right, left, right)
    out = np.zeros((left, d, right, left, d, right), dtype=small.dtype)
    for a in range(d):
        out[:, a, :, :, a, :] = s
    return out.reshape(lr * d, lr * d)


def _project_masks(data: np.ndarray, dims: tuple, pos: int, masks, owned=False):
    """Project onto the union of sector masks over factors pos..k-1.

    Splits the factor at ``pos`` into its identity average and the traceless
    complement.  The identity branch recurses on the traced-out matrix, so
    full-size arithmetic happens only along runs of traceless factors; empty
    branches return None and full branches return their input unchanged.
    ``owned`` marks inputs this call may release early, which keeps the peak
    memory at a few matrices instead of one per recursion level.
    """
    k = len(dims)
    if not masks:
        return None
    if len(masks) == 1 << (k - pos):
        return data
    avg_small = _traced_average(data, dims, pos)
    low = {m >> 1 for m in masks if not m & 1}
    high = {m >> 1 for m in masks if m & 1}
    reduced_dims = dims[:pos] + dims[pos + 1:]

    high_part = None
    if high:
        trl = data - _embed_identity(avg_small, dims, pos)
        if owned:
            data = None
        high_part = _project_masks(trl, dims, pos + 1, high, owned=True)
        del trl

    low_small = _project_masks(avg_small, reduced_dims, pos, low, owned=True)
    if low_small is None:
        return high_part
    low_part = _embed_identity(low_small, dims, pos)
    if high_part is None:
        return low_part
    low_part += high_part
    return low_part


def _aligned_for(op: LabeledOperator, s: SectorSet, tol_herm: float) -> LabeledOperator:
    if sorted(op.labels) != sorted(s.labels):
        raise FactorMismatch(f"operator factors {op.labels} vs sector systems {s.labels}")
    aligned = permute_systems(op, s.labels)
    if dict(aligned.factors) != dict(s.systems):
        raise FactorMismatch("factor dimensions disagree with sector systems")
    if aligned.herm_defect() > tol_herm:
        raise NotHermitian(f"hermiticity defect {aligned.herm_defect():.3e}")
    return aligned


def sector_project(op: LabeledOperator, s: SectorSet,
                   tol_herm: float = TOL_HERM) -> LabeledOperator:
    """Orthogonal projection of a Hermitian operator onto a sector set."""
    aligned = _aligned_for(op, s, tol_herm)
    k = len(s.systems)
    complement = frozenset(range(1 << k)) - s.masks
    if len(complement) < len(s.masks):
        rest = _project_masks(aligned.data, aligned.dims, 0, complement)
        out = aligned.data if rest is None else aligned.data - rest
    else:
        out = _project_masks(aligned.data, aligned.dims, 0, s.masks)
        if out is None:
            out = np.zeros_like(aligned.data)
    projected = LabeledOperator(aligned.factors, out)
    return permute_systems(projected, op.labels)


def outside_component(op: LabeledOperator, s: SectorSet,
                      tol_herm: float = TOL_HERM) -> LabeledOperator:
    """Component of a Hermitian operator outside the sectors and the identity.

    Equals ``op`` minus its all-identity component minus its projection onto
    ``s``; computed through whichever of the two complementary mask sets is
    smaller.
    """
    aligned = _aligned_for(op, s, tol_herm)
    k = len(s.systems)
    keep = s.masks | {0}
    forbidden = frozenset(range(1 << k)) - keep
    if len(forbidden) <= len(keep):
        out = _project_masks(aligned.data, aligned.dims, 0, forbidden)
        if out is None:
            out = np.zeros_like(aligned.data)
    else:
        kept = _project_masks(aligned.data, aligned.dims, 0, keep)
        out = aligned.data if kept is None else aligned.data - kept
    result = LabeledOperator(aligned.factors, out)
    return permute_systems(result, op.labels)


def pattern_norms(op: LabeledOperator, tol_herm: float = TOL_HERM) -> dict[Pattern, float]:
    """Squared Frobenius norm of every sector component of ``op``.

    Computed from partial-trace norms over all factor subsets and inclusion-
    exclusion, avoiding the explicit construction of each component.  The
    values sum to ``||op||_F^2`` (Parseval).
    """
    if op.herm_defect() > tol_herm:
        raise NotHermitian(f"hermiticity defect {op.herm_defect():.3e}")
    dims = op.dims
    k = len(dims)
    w: dict[frozenset, float] = {}

    def explore(tens: np.ndarray, remaining: tuple[int, ...], subset: frozenset,
                divisor: float, start: int) -> None:
        flat = tens.reshape(-1)
        w[subset] = float(np.vdot(flat, flat).real) / divisor
        live = [i for i in range(k) if i not in subset]
        for j in range(start, k):
            if j in subset:
                continue
            pos = live.index(j)
            half = len(live)
            traced = np.trace(tens, axis1=pos, axis2=pos + half)
            explore(traced, remaining, subset | {j}, divisor * dims[j], j + 1)

    explore(op.data.reshape(dims + dims), dims, frozenset(), 1.0, 0)

    out: dict[Pattern, float] = {}
    indices = list(range(k))
    for marks in itertools.product((IDN, TRL), repeat=k):
        base = frozenset(i for i in indices if marks[i] == IDN)
        rest = [i for i in indices if marks[i] == TRL]
        total = 0.0
        for r in range(len(rest) + 1):
            for extra in itertools.combinations(rest, r):
                total += (-1) ** r * w[base | frozenset(extra)]
        out[Pattern(marks)] = max(total, 0.0)
    return out
