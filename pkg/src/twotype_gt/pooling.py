"""Pooling designs: sparse incidence matrices, AG(3, q) plane stacking and
exact combinatorial property checks (disjunctness, separability, unique
collinearity).

The checkers are brute force by design.  Each takes a ``budget`` on the
number of elementary set operations and raises :class:`BudgetExceeded`
instead of falling back to sampling.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .gf_geometry import check_prime, plane_incidence

DEFAULT_BUDGET = 50_000_000


class BudgetExceeded(RuntimeError):
    """Raised when an exact check would exceed its work budget."""


class DesignError(ValueError):
    """Invalid design parameters."""


class MatrixFormatError(ValueError):
    """Malformed matrix or design file."""


class IncidenceMatrix:
    """Binary pools x items matrix with both row and column adjacency lists.

    ``rows[i]`` lists the items in pool ``i``; ``cols[j]`` is the support of
    item ``j`` (the pools containing it).  Both are sorted tuples.
    """

    __slots__ = ("n_rows", "n_cols", "rows", "cols")

    def __init__(self, n_rows: int, n_cols: int, rows: Sequence[Iterable[int]]):
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if len(rows) != n_rows:
            raise ValueError(f"expected {n_rows} rows, got {len(rows)}")
        cols: list[list[int]] = [[] for _ in range(n_cols)]
        clean = []
        for i, row in enumerate(rows):
            members = tuple(sorted(int(j) for j in row))
            if len(set(members)) != len(members):
                raise ValueError(f"duplicate entry in row {i}")
            for j in members:
                if not 0 <= j < n_cols:
                    raise ValueError(f"column index {j} out of range in row {i}")
                cols[j].append(i)
            clean.append(members)
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.rows = tuple(clean)
        self.cols = tuple(tuple(c) for c in cols)

    @classmethod
    def from_column_rows(cls, n_rows: int, column_rows: Sequence[Iterable[int]]):
        """Build from per-column row lists (the supports)."""
        rows: list[list[int]] = [[] for _ in range(n_rows)]
        for j, support in enumerate(column_rows):
            for i in support:
                if not 0 <= i < n_rows:
                    raise ValueError(f"row index {i} out of range in column {j}")
                rows[i].append(j)
        return cls(n_rows, len(column_rows), rows)

    @classmethod
    def from_dense(cls, array) -> "IncidenceMatrix":
        a = np.asarray(array)
        if a.ndim != 2:
            raise ValueError("dense matrix must be two-dimensional")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("matrix entries must be 0 or 1")
        return cls(a.shape[0], a.shape[1], [np.flatnonzero(r).tolist() for r in a])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.uint8)
        for i, row in enumerate(self.rows):
            out[i, list(row)] = 1
        return out

    def row_weights(self) -> np.ndarray:
        return np.array([len(r) for r in self.rows], dtype=int)

    def column_weights(self) -> np.ndarray:
        return np.array([len(c) for c in self.cols], dtype=int)

    def column_masks(self) -> list[int]:
        """Supports as Python int bitmasks over row indices."""
        return [sum(1 << i for i in c) for c in self.cols]

    def row_masks(self) -> list[int]:
        return [sum(1 << j for j in r) for r in self.rows]

    def permute_columns(self, perm: Sequence[int]) -> "IncidenceMatrix":
        """Column ``j`` of the result is column ``perm[j]`` of ``self``."""
        where = np.empty(len(perm), dtype=int)
        where[np.asarray(perm)] = np.arange(len(perm))
        return IncidenceMatrix(self.n_rows, self.n_cols,
                               [[int(where[j]) for j in r] for r in self.rows])

    def __eq__(self, other):
        if not isinstance(other, IncidenceMatrix):
            return NotImplemented
        return self.shape == other.shape and self.rows == other.rows

    def __hash__(self):
        return hash((self.shape, self.rows))

    def __repr__(self):
        return f"IncidenceMatrix({self.n_rows}x{self.n_cols}, nnz={sum(map(len, self.rows))})"


def vstack(*matrices: IncidenceMatrix) -> IncidenceMatrix:
    if not matrices:
        raise ValueError("nothing to stack")
    n_cols = {m.n_cols for m in matrices}
    if len(n_cols) != 1:
        raise ValueError(f"column counts differ: {sorted(n_cols)}")
    rows = [r for m in matrices for r in m.rows]
    return IncidenceMatrix(len(rows), n_cols.pop(), rows)


def _plane_set(q: int, planes: Iterable[int], name: str = "K") -> tuple[int, ...]:
    out = tuple(sorted(set(int(i) for i in planes)))
    for i in out:
        if not 0 <= i < q:
            raise DesignError(f"plane index {i} in {name} out of range for q={q}")
    return out


def stack_planes(q: int, planes: Iterable[int]) -> IncidenceMatrix:
    """Stack the plane matrices ``M_i`` for ``i`` in ``planes`` (ascending)."""
    q = check_prime(q)
    K = _plane_set(q, planes)
    if not K:
        raise DesignError("plane set must be nonempty")
    return vstack(*(plane_incidence(q, i) for i in K))


@dataclass(frozen=True)
class PoolingDesign:
    """The three pool families over one item set.

    Plane provenance (``q`` and the ``K_*`` sets) is ``None`` for designs read
    from files.
    """

    M_A: IncidenceMatrix
    M_B: IncidenceMatrix
    M_AB: IncidenceMatrix
    q: Optional[int] = None
    K_A: Optional[tuple[int, ...]] = None
    K_B: Optional[tuple[int, ...]] = None
    K_AB: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        widths = {self.M_A.n_cols, self.M_B.n_cols, self.M_AB.n_cols}
        if len(widths) != 1:
            raise DesignError(f"pool families disagree on the item count: {sorted(widths)}")
        if self.has_provenance:
            _check_disjoint(self.K_A, self.K_B, self.K_AB)

    @property
    def n_items(self) -> int:
        return self.M_A.n_cols

    @property
    def has_provenance(self) -> bool:
        return self.K_A is not None and self.K_B is not None and self.K_AB is not None

    @property
    def M_A_bar(self) -> IncidenceMatrix:
        return vstack(self.M_A, self.M_AB)

    @property
    def M_B_bar(self) -> IncidenceMatrix:
        return vstack(self.M_B, self.M_AB)

    def swap_types(self) -> "PoolingDesign":
        return PoolingDesign(self.M_B, self.M_A, self.M_AB, self.q, self.K_B, self.K_A, self.K_AB)

    def permute_items(self, perm: Sequence[int]) -> "PoolingDesign":
        return PoolingDesign(self.M_A.permute_columns(perm), self.M_B.permute_columns(perm),
                             self.M_AB.permute_columns(perm), self.q, self.K_A, self.K_B, self.K_AB)


def _check_disjoint(K_A, K_B, K_AB):
    if set(K_A) & set(K_AB):
        raise DesignError(f"K_A and K_AB overlap: {sorted(set(K_A) & set(K_AB))}")
    if set(K_B) & set(K_AB):
        raise DesignError(f"K_B and K_AB overlap: {sorted(set(K_B) & set(K_AB))}")


def _empty(n_cols: int) -> IncidenceMatrix:
    return IncidenceMatrix(0, n_cols, [])


def build_design(q: int, K_A: Iterable[int], K_B: Iterable[int], K_AB: Iterable[int]) -> PoolingDesign:
    """Assemble ``(M_A, M_B, M_AB)`` from plane sets.

    ``K_A`` and ``K_B`` may overlap (``M_A = M_B`` is allowed) but neither may
    share a plane with ``K_AB``.  An empty set gives a family with no pools.
    """
    q = check_prime(q)
    ka, kb, kab = (_plane_set(q, K, name) for K, name in ((K_A, "K_A"), (K_B, "K_B"), (K_AB, "K_AB")))
    _check_disjoint(ka, kb, kab)
    n = q**4
    mats = [stack_planes(q, K) if K else _empty(n) for K in (ka, kb, kab)]
    return PoolingDesign(*mats, q=q, K_A=ka, K_B=kb, K_AB=kab)


def grid_design(k: int, q: int = 7) -> PoolingDesign:
    """Design with ``M_A = M_B`` on planes ``0..k-1`` and ``M_AB`` on the rest."""
    if not 1 <= k < q:
        raise DesignError(f"k must satisfy 1 <= k < q, got k={k}, q={q}")
    return build_design(q, range(k), range(k), range(k, q))


# --------------------------------------------------------------------------
# property checks

def unique_collinearity_check(M: IncidenceMatrix) -> tuple[bool, Optional[tuple[int, int]]]:
    """Whether every pair of distinct rows shares at most one column.

    Returns ``(True, None)`` or ``(False, (r1, r2))`` with the first violating
    pair found.  Counts row pairs column by column, so the cost is the sum of
    squared column weights.
    """
    seen: dict[tuple[int, int], int] = {}
    for j, support in enumerate(M.cols):
        for pair in itertools.combinations(support, 2):
            if pair in seen:
                return False, pair
            seen[pair] = j
    return True, None


def _charge(cost: int, budget: int, what: str):
    if cost > budget:
        raise BudgetExceeded(f"{what} needs ~{cost} operations, budget is {budget}")


def is_disjunct(M: IncidenceMatrix, d: int, budget: int = DEFAULT_BUDGET) -> bool:
    """Whether no column's support is covered by the union of ``d`` others.

    When fewer than ``d`` other columns exist, the union of all of them is
    used instead.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    n = M.n_cols
    r = min(d, max(n - 1, 0))
    _charge(math.comb(max(n - 1, 0), r) * n, budget, f"{d}-disjunct check")
    masks = M.column_masks()
    row_members = M.rows
    for j0, t0 in enumerate(masks):
        # only columns meeting T0 can help cover it; union is monotone, so
        # checking subsets of size min(r, #useful) suffices
        useful = sorted({j for i in M.cols[j0] for j in row_members[i] if j != j0})
        if not useful:
            if t0 == 0:
                return False
            continue
        size = min(r, len(useful))
        for combo in itertools.combinations(useful, size):
            u = 0
            for j in combo:
                u |= masks[j]
            if t0 & ~u == 0:
                return False
    return True


def is_separable_bar(M: IncidenceMatrix, d: int, budget: int = DEFAULT_BUDGET) -> bool:
    """Whether the unions of all sets of at most ``d`` columns are distinct.

    The empty union (zero columns) takes part in the comparison.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    n = M.n_cols
    d = min(d, n)
    _charge(sum(math.comb(n, s) for s in range(d + 1)), budget, f"{d}-bar-separable check")
    masks = M.column_masks()
    seen = {0}
    for size in range(1, d + 1):
        for combo in itertools.combinations(range(n), size):
            u = 0
            for j in combo:
                u |= masks[j]
            if u in seen:
                return False
            seen.add(u)
    return True


def is_2d_separable(design: PoolingDesign, d: int, budget: int = DEFAULT_BUDGET) -> bool:
    """Two-type separability: ``M_A``, ``M_B`` are (d-1)-disjunct and the
    stacked ``[M_A; M_AB]``, ``[M_B; M_AB]`` are d-bar-separable.

    0-disjunctness (``d = 1``) holds vacuously.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if d > 1:
        for M in (design.M_A, design.M_B):
            if not is_disjunct(M, d - 1, budget):
                return False
    return all(is_separable_bar(M, d, budget) for M in (design.M_A_bar, design.M_B_bar))


# --------------------------------------------------------------------------
# text formats

def format_matrix(M: IncidenceMatrix) -> str:
    lines = [f"{M.n_rows} {M.n_cols}"]
    for row in M.rows:
        bits = ["0"] * M.n_cols
        for j in row:
            bits[j] = "1"
        lines.append(" ".join(bits))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> IncidenceMatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix block")
    header = lines[0].split()
    try:
        n_rows, n_cols = (int(t) for t in header)
    except ValueError:
        raise MatrixFormatError(f"bad header line {lines[0]!r}; expected 'n_rows n_cols'") from None
    if n_rows < 0 or n_cols < 0:
        raise MatrixFormatError("negative dimensions")
    body = lines[1:]
    if n_cols == 0 and not body:
        # zero-width rows print as blank lines
        return IncidenceMatrix(n_rows, 0, [[] for _ in range(n_rows)])
    if len(body) != n_rows:
        raise MatrixFormatError(f"header says {n_rows} rows, found {len(body)}")
    rows = []
    for k, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != n_cols:
            raise MatrixFormatError(f"row {k} has {len(tokens)} entries, expected {n_cols}")
        bad = [t for t in tokens if t not in ("0", "1")]
        if bad:
            raise MatrixFormatError(f"row {k} has non-binary token {bad[0]!r}")
        rows.append([j for j, t in enumerate(tokens) if t == "1"])
    return IncidenceMatrix(n_rows, n_cols, rows)


def export_matrix(M: IncidenceMatrix, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_matrix(M))


def import_matrix(path: str | os.PathLike) -> IncidenceMatrix:
    with open(path) as fh:
        return parse_matrix(fh.read())


DESIGN_HEADERS = ("#A", "#B", "#AB")


def format_design(design: PoolingDesign) -> str:
    parts = []
    for header, M in zip(DESIGN_HEADERS, (design.M_A, design.M_B, design.M_AB)):
        parts.append(header + "\n" + format_matrix(M))
    return "".join(parts)


def parse_design(text: str) -> PoolingDesign:
    blocks: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        s = line.strip()
        if s in DESIGN_HEADERS:
            if s in blocks:
                raise MatrixFormatError(f"duplicate block {s}")
            current = s
            blocks[s] = []
        elif not s:
            continue
        elif current is None:
            raise MatrixFormatError("content before the first block header")
        else:
            blocks[current].append(s)
    missing = [h for h in DESIGN_HEADERS if h not in blocks]
    if missing:
        raise MatrixFormatError(f"missing block(s): {', '.join(missing)}")
    mats = [parse_matrix("\n".join(blocks[h])) for h in DESIGN_HEADERS]
    try:
        return PoolingDesign(*mats)
    except DesignError as exc:
        raise MatrixFormatError(str(exc)) from None


def export_design(design: PoolingDesign, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_design(design))


def import_design(path: str | os.PathLike) -> PoolingDesign:
    with open(path) as fh:
        return parse_design(fh.read())


def is_design_text(text: str) -> bool:
    for line in text.splitlines():
        if line.strip():
            return line.strip() in DESIGN_HEADERS
    return False
