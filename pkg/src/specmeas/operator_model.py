"""Infinite matrices with known column decay, vectors with known tail decay,
open subsets of the line or circle, and rectangular truncations.

Indices are 1-based: ``entry(i, j)`` is the matrix element in row ``i`` and
column ``j``, i.e. ``<T e_j, e_i>``.
"""
from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Dispersion",
    "DecaySequence",
    "ColumnDecayOperator",
    "DecayVector",
    "OpenRealSet",
    "rect_truncation",
    "tail_norm_estimate",
    "check_hermitian",
    "read_matrix_text",
    "write_matrix_text",
]


@dataclass(frozen=True)
class Dispersion:
    """Row count ``f(n)`` needed to capture column ``n`` up to the decay ``alpha``.

    Three forms are supported: ``n + b``, ``ceil(n + c*sqrt(n) + d)`` and a
    lookup table (extended by ``n + table[-1] - len(table)`` beyond its end).
    """

    kind: str = "shift"
    b: int = 1
    c: float = 0.0
    d: float = 0.0
    table: tuple = ()

    @classmethod
    def shift(cls, b: int) -> "Dispersion":
        if b < 1:
            raise ValueError("f(n) = n + b needs b >= 1")
        return cls("shift", b=int(b))

    @classmethod
    def sqrt(cls, c: float, d: float) -> "Dispersion":
        return cls("sqrt", c=float(c), d=float(d))

    @classmethod
    def from_table(cls, values: Sequence[int]) -> "Dispersion":
        vals = tuple(int(v) for v in values)
        for i, v in enumerate(vals, start=1):
            if v <= i:
                raise ValueError(f"table entry f({i}) = {v} is not > {i}")
        return cls("table", table=vals)

    def __call__(self, n: int) -> int:
        n = int(n)
        if self.kind == "shift":
            return n + self.b
        if self.kind == "sqrt":
            return max(n + 1, math.ceil(n + self.c * math.sqrt(n) + self.d))
        if n <= len(self.table):
            return self.table[n - 1]
        last = len(self.table)
        return n + (self.table[-1] - last if last else 1)

    def describe(self) -> str:
        if self.kind == "shift":
            return f"n+{self.b}"
        if self.kind == "sqrt":
            return f"ceil(n+{self.c!r}*sqrt(n)+{self.d!r})"
        return "table:" + ",".join(str(v) for v in self.table)

    @classmethod
    def parse(cls, text: str) -> "Dispersion":
        text = text.replace(" ", "")
        m = re.fullmatch(r"n\+(\d+)", text)
        if m:
            return cls.shift(int(m.group(1)))
        m = re.fullmatch(r"ceil\(n\+([-+0-9.eE]+)\*sqrt\(n\)\+?([-+0-9.eE]+)\)", text)
        if m:
            return cls.sqrt(float(m.group(1)), float(m.group(2)))
        if text.startswith("table:"):
            return cls.from_table([int(v) for v in text[6:].split(",") if v])
        raise ValueError(f"unrecognised dispersion form {text!r}")


@dataclass(frozen=True)
class DecaySequence:
    """A null sequence ``n -> s_n`` used for column or vector tail decay."""

    kind: str = "zero"
    p: float = 0.0
    fn: Callable[[int], float] | None = field(default=None, compare=False)

    @classmethod
    def zero(cls) -> "DecaySequence":
        return cls("zero")

    @classmethod
    def power(cls, p: float) -> "DecaySequence":
        return cls("power", p=float(p))

    @classmethod
    def geometric(cls, r: float) -> "DecaySequence":
        if not 0 < r < 1:
            raise ValueError("geometric decay needs 0 < r < 1")
        return cls("geometric", p=float(r))

    @classmethod
    def custom(cls, fn: Callable[[int], float]) -> "DecaySequence":
        return cls("custom", fn=fn)

    def __call__(self, n: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "power":
            return float(n) ** (-self.p)
        if self.kind == "geometric":
            return self.p ** n
        return float(self.fn(n))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def describe(self) -> str:
        if self.kind == "zero":
            return "0"
        if self.kind == "power":
            return f"n^-{self.p!r}"
        if self.kind == "geometric":
            return f"{self.p!r}^n"
        return "custom"

    @classmethod
    def parse(cls, text: str) -> "DecaySequence":
        text = text.replace(" ", "")
        if text in ("0", "zero"):
            return cls.zero()
        m = re.fullmatch(r"n\^-([0-9.eE+]+)", text)
        if m:
            return cls.power(float(m.group(1)))
        m = re.fullmatch(r"([0-9.eE+-]+)\^n", text)
        if m:
            return cls.geometric(float(m.group(1)))
        raise ValueError(f"unrecognised decay form {text!r}")


BlockBuilder = Callable[[int, int], sp.spmatrix]


class ColumnDecayOperator:
    """An operator on l^2(N) given by an entry oracle and column-decay data.

    Parameters
    ----------
    entry : callable ``(i, j) -> complex`` with 1-based indices.
    kind : ``"sa"`` (self-adjoint) or ``"u"`` (unitary).
    dispersion : row count ``f(n)``.
    alpha, c1 : column decay, ``||(I - P_f(n)) T P_n|| <= c1 * alpha(n)``.
    bounded_hint : optional ``(lo, hi)`` known to contain the spectrum
        (an interval for self-adjoint operators).
    block : optional fast builder ``(m, n) -> sparse m x n`` of the leading block.
        Without it the block is assembled from ``entry`` one element at a time.
    real : True when every entry is real; lets callers use ``R(conj z) x = conj(R(z) x)``
        for real ``x``.
    """

    def __init__(
        self,
        entry: Callable[[int, int], complex],
        kind: str = "sa",
        dispersion: Dispersion | None = None,
        alpha: DecaySequence | None = None,
        c1: float = 0.0,
        bounded_hint: tuple[float, float] | None = None,
        block: BlockBuilder | None = None,
        real: bool = False,
        name: str = "",
        params: dict | None = None,
    ):
        if kind not in ("sa", "u"):
            raise ValueError("kind must be 'sa' or 'u'")
        self._entry = entry
        self.kind = kind
        self.dispersion = dispersion or Dispersion.shift(1)
        self.alpha = alpha or DecaySequence.zero()
        self.c1 = float(c1)
        self.bounded_hint = bounded_hint
        self._block = block
        self.real = real
        self.name = name
        self.params = dict(params or {})
        self._cache: dict[tuple[int, int], complex] = {}
        self._lock = threading.Lock()
        self._blocks: dict[tuple[int, int], sp.csr_matrix] = {}

    def __repr__(self) -> str:
        label = self.name or "operator"
        return f"<{label} kind={self.kind} f={self.dispersion.describe()} alpha={self.alpha.describe()}>"

    @property
    def is_self_adjoint(self) -> bool:
        return self.kind == "sa"

    def f(self, n: int) -> int:
        fn = self.dispersion(n)
        if fn <= n:
            raise ValueError(f"dispersion gives f({n}) = {fn}, need f(n) > n")
        return fn

    def entry(self, i: int, j: int) -> complex:
        if i < 1 or j < 1:
            raise IndexError("indices are 1-based")
        key = (i, j)
        val = self._cache.get(key)
        if val is None:
            val = complex(self._entry(i, j))
            with self._lock:
                self._cache[key] = val
        return val

    def block(self, m: int, n: int) -> sp.csr_matrix:
        """Leading ``m x n`` block of ``T`` as a sparse matrix."""
        key = (m, n)
        hit = self._blocks.get(key)
        if hit is not None:
            return hit
        if self._block is not None:
            out = sp.csr_matrix(self._block(m, n), dtype=complex)
            if out.shape != (m, n):
                raise ValueError(f"block builder returned shape {out.shape}, wanted {(m, n)}")
        else:
            rows, cols, vals = [], [], []
            for j in range(1, n + 1):
                for i in range(1, m + 1):
                    v = self.entry(i, j)
                    if v != 0:
                        rows.append(i - 1)
                        cols.append(j - 1)
                        vals.append(v)
            out = sp.csr_matrix((vals, (rows, cols)), shape=(m, n), dtype=complex)
        with self._lock:
            if len(self._blocks) > 8:
                self._blocks.clear()
            self._blocks[key] = out
        return out

    def truncation(self, n: int) -> sp.csr_matrix:
        """``P_f(n) T P_n`` as a sparse ``f(n) x n`` matrix."""
        return self.block(self.f(n), n)

    def dist_lower_bound(self, z: complex) -> float:
        """Default lower bound on ``dist(z, spectrum)``."""
        z = complex(z)
        if self.kind == "sa":
            d = abs(z.imag)
            if self.bounded_hint is not None:
                lo, hi = self.bounded_hint
                d = max(d, abs(complex(min(max(z.real, lo), hi), 0) - z))
            return d
        return abs(abs(z) - 1.0)


class DecayVector:
    """A vector in l^2(N) with ``||P_n x - x|| <= c2 * beta(n)``."""

    def __init__(
        self,
        coeff: Callable[[int], complex],
        beta: DecaySequence | None = None,
        c2: float = 0.0,
        support: int | None = None,
        label: str = "",
    ):
        self._coeff = coeff
        self.beta = beta or DecaySequence.zero()
        self.c2 = float(c2)
        self.support = support
        self.label = label
        self._head = np.zeros(0, dtype=complex)

    @classmethod
    def basis(cls, j: int) -> "DecayVector":
        if j < 1:
            raise ValueError("basis vectors are 1-based")
        return cls(lambda k: 1.0 if k == j else 0.0, support=j, label=f"e{j}")

    @classmethod
    def from_array(cls, values, label: str = "") -> "DecayVector":
        arr = np.asarray(values, dtype=complex).ravel()
        nz = np.flatnonzero(arr)
        support = int(nz[-1]) + 1 if nz.size else 0
        arr = arr[:support].copy()
        vec = cls(lambda k: arr[k - 1] if k <= support else 0.0, support=support, label=label)
        vec._head = arr
        return vec

    @property
    def is_real(self) -> bool:
        head = self.head(self.support or 1)
        return bool(np.all(head.imag == 0))

    def coeff(self, k: int) -> complex:
        return complex(self._coeff(k))

    def head(self, m: int) -> np.ndarray:
        """First ``m`` coefficients as a dense array."""
        if m <= self._head.size:
            return self._head[:m].copy()
        if self.support is not None and self._head.size >= self.support:
            out = np.zeros(m, dtype=complex)
            out[: self._head.size] = self._head
            return out
        start = self._head.size
        upto = m if self.support is None else max(m, self.support)
        extra = np.array([self.coeff(k) for k in range(start + 1, upto + 1)], dtype=complex)
        self._head = np.concatenate([self._head, extra])
        return self.head(m)

    def tail_bound(self, n: int) -> float:
        """Upper bound on ``||P_n x - x||``."""
        if self.support is not None and n >= self.support:
            return 0.0
        return self.c2 * self.beta(n)

    def norm_estimate(self, m: int = 0) -> float:
        m = max(m, self.support or 0, 1)
        return float(np.linalg.norm(self.head(m))) + self.tail_bound(m)


_INTERVAL = re.compile(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)")


def _parse_endpoint(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


class OpenRealSet:
    """A disjoint union of open intervals, listed lazily.

    ``intervals`` may be a sequence of ``(a, b)`` pairs or a callable ``m -> (a, b) | None``
    enumerating them (1-based, ``None`` past the end).  ``circle`` marks angular
    intervals for unitary operators.
    """

    def __init__(self, intervals: Sequence[tuple[float, float]] | Callable[[int], tuple | None], circle: bool = False):
        self.circle = circle
        if callable(intervals):
            self._gen = intervals
            self._list = None
        else:
            ivs = [(float(a), float(b)) for a, b in intervals]
            for a, b in ivs:
                if not a < b:
                    raise ValueError(f"interval ({a}, {b}) is empty")
            ordered = sorted(ivs)
            for (a1, b1), (a2, b2) in zip(ordered, ordered[1:]):
                if a2 < b1:
                    raise ValueError("intervals overlap")
            self._gen = None
            self._list = ivs

    def __repr__(self) -> str:
        return f"OpenRealSet({self.first(8)!r}{'...' if self._list is None else ''})"

    def first(self, n: int) -> list[tuple[float, float]]:
        if self._list is not None:
            return list(self._list[:n])
        out = []
        for m in range(1, n + 1):
            iv = self._gen(m)
            if iv is None:
                break
            out.append((float(iv[0]), float(iv[1])))
        return out

    def intervals(self) -> list[tuple[float, float]]:
        if self._list is None:
            raise ValueError("lazily enumerated set has no finite interval list")
        return list(self._list)

    def contains(self, u: float) -> bool:
        return any(a < u < b for a, b in (self._list or self.first(1000)))

    @classmethod
    def parse(cls, text: str, circle: bool = False) -> "OpenRealSet":
        parts = [p for p in text.replace(" ", "").split(";") if p]
        if not parts:
            raise ValueError("empty set string")
        ivs = []
        for part in parts:
            m = _INTERVAL.fullmatch(part)
            if not m:
                raise ValueError(f"malformed interval {part!r}; expected (a,b)")
            ivs.append((_parse_endpoint(m.group(1)), _parse_endpoint(m.group(2))))
        return cls(ivs, circle=circle)


def rect_truncation(op: ColumnDecayOperator, n: int, z: complex = 0.0) -> sp.csr_matrix:
    """``P_f(n) (T - z I) P_n`` as a sparse matrix of shape ``(f(n), n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    block = op.truncation(n)
    if z != 0:
        shift = sp.eye(block.shape[0], n, dtype=complex, format="csr") * complex(z)
        block = (block - shift).tocsr()
    return block


def tail_norm_estimate(op: ColumnDecayOperator, n: int, cutoff: int) -> float:
    """Lower bound on ``||(I - P_f(n)) T P_n||`` from rows ``f(n)+1 .. cutoff``."""
    fn = op.f(n)
    if cutoff < fn:
        raise ValueError("cutoff must be >= f(n)")
    if cutoff == fn:
        return 0.0
    tail = op.block(cutoff, n)[fn:, :]
    if tail.nnz == 0:
        return 0.0
    if tail.shape[0] * tail.shape[1] <= 4_000_000:
        return float(np.linalg.norm(tail.toarray(), 2))
    return float(np.sqrt(tail.multiply(tail.conj()).sum(axis=0).real.max()))


def check_hermitian(op: ColumnDecayOperator, pairs: Iterable[tuple[int, int]], atol: float = 0.0) -> bool:
    return all(abs(op.entry(i, j) - np.conj(op.entry(j, i))) <= atol for i, j in pairs)


def write_matrix_text(op: ColumnDecayOperator, n: int, path_or_file) -> None:
    """Write the leading ``f(n) x n`` block in the text matrix format."""
    block = sp.coo_matrix(op.truncation(n))
    header = (
        f"# kind={op.kind} f={op.dispersion.describe()} "
        f"alpha={op.alpha.describe()} c1={op.c1!r}\n"
    )
    order = np.lexsort((block.row, block.col))
    lines = [header]
    for k in order:
        v = block.data[k]
        lines.append(f"{block.row[k] + 1} {block.col[k] + 1} {float(v.real)!r} {float(v.imag)!r}\n")
    text = "".join(lines)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def read_matrix_text(path_or_file, name: str = "file") -> ColumnDecayOperator:
    """Read the text matrix format.  Entries outside the listed ones are zero."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing '# kind=... f=... alpha=... c1=...' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    for key in ("kind", "f", "alpha", "c1"):
        if key not in meta:
            raise ValueError(f"header lacks {key}=")
    entries: dict[tuple[int, int], complex] = {}
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {ln}: expected 'i j re im'")
        i, j = int(parts[0]), int(parts[1])
        if i < 1 or j < 1:
            raise ValueError(f"line {ln}: indices are 1-based")
        entries[(i, j)] = complex(float(parts[2]), float(parts[3]))
    rows = np.array([k[0] - 1 for k in entries], dtype=int)
    cols = np.array([k[1] - 1 for k in entries], dtype=int)
    vals = np.array(list(entries.values()), dtype=complex)
    max_col = int(cols.max(initial=-1)) + 1

    def block(m, n):
        keep = (rows < m) & (cols < n)
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(m, n))

    def entry(i, j):
        return entries.get((i, j), 0.0)

    op = ColumnDecayOperator(
        entry,
        kind=meta["kind"],
        dispersion=Dispersion.parse(meta["f"]),
        alpha=DecaySequence.parse(meta["alpha"]),
        c1=float(meta["c1"]),
        block=block,
        real=bool(np.all(vals.imag == 0)),
        name=name,
    )
    op.params["columns_listed"] = max_col
    return op
