"""Test operators with known spectral measures, addressed by name."""
from __future__ import annotations

import math

import numpy as np

from .cmv import cmv_entries, make_cmv, make_diagonal_unitary, verblunsky
from .jacobi import (
    ReferenceMeasure,
    jacobi_coefficients,
    make_diagonal,
    make_jacobi,
    make_sparse_schrodinger,
    make_tridiagonal,
)
from .penrose import build_patch, fit_dispersion, make_penrose

__all__ = [
    "ReferenceMeasure",
    "GALLERY",
    "build",
    "parse_params",
    "make_jacobi",
    "make_cmv",
    "make_diagonal_unitary",
    "make_penrose",
    "make_sparse_schrodinger",
    "make_diagonal",
    "make_tridiagonal",
    "jacobi_coefficients",
    "verblunsky",
    "cmv_entries",
    "build_patch",
    "fit_dispersion",
]


def _diag(k: str = "index", **_):
    if k == "index":
        op = make_diagonal(lambda j: np.asarray(j, float), name="diag")
        op.bounded_hint = (1.0, math.inf)
        return op, ReferenceMeasure(atoms=[(1.0, 1.0)])
    raise ValueError(f"unknown diag kind {k!r}")


def _zero(**_):
    op = make_diagonal(lambda j: np.zeros(np.shape(j)), name="zero")
    op.bounded_hint = (0.0, 0.0)
    return op, ReferenceMeasure(atoms=[(0.0, 1.0)])


def _schrodinger(g: str = "inv", jmax: int = 6, **_):
    rules = {"inv": lambda j: 1.0 / j, "one": lambda j: 1.0, "half": lambda j: 2.0**-j, "zero": lambda j: 0.0}
    if g not in rules:
        raise ValueError(f"g must be one of {sorted(rules)}")
    op = make_sparse_schrodinger(rules[g], jmax=int(jmax))
    return op, ReferenceMeasure(support=op.bounded_hint)


GALLERY = {
    "jacobi": (lambda a=0.0, b=0.0: make_jacobi("jacobi", a=float(a), b=float(b)), "Jacobi polynomials, a, b > -1"),
    "laguerre": (lambda a=0.0: make_jacobi("laguerre", a=float(a)), "Laguerre polynomials, a > -1"),
    "charlier": (lambda a=1.0: make_jacobi("charlier", a=float(a)), "Charlier polynomials, a > 0"),
    "free": (lambda: make_jacobi("free"), "free Jacobi operator a_k = 1/2, b_k = 0"),
    "rogers_szego": (lambda q=0.5: make_cmv("rogers_szego", q=float(q)), "CMV, Rogers-Szego q in (0,1)"),
    "geronimus": (lambda a=0.3: make_cmv("geronimus", a=complex(a)), "CMV, constant Verblunsky a, |a| < 1"),
    "penrose": (lambda radius=30.0, sign=1: (make_penrose(float(radius), int(sign)), ReferenceMeasure()), "Penrose tiling graph Laplacian"),
    "sparse_schrodinger": (_schrodinger, "H_0 + sparse potential at j!, g in {inv, one, half, zero}"),
    "diag": (_diag, "diag(1, 2, 3, ...)"),
    "zero": (_zero, "zero operator"),
}


def parse_params(text: str | None) -> dict:
    """``"a=0.7,b=0.3"`` to a dict of numbers (strings kept when not numeric)."""
    out: dict = {}
    if not text:
        return out
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ValueError(f"parameter {part!r} is not key=value")
        k, v = part.split("=", 1)
        v = v.strip()
        try:
            val = float(v)
            if val.is_integer() and "." not in v and "e" not in v.lower():
                val = int(val)
        except ValueError:
            try:
                val = complex(v.replace("i", "j"))
            except ValueError:
                val = v
        out[k.strip()] = val
    return out


def build(name: str, **params):
    """``(operator, reference measure)`` for a gallery name."""
    if name not in GALLERY:
        raise ValueError(f"unknown gallery operator {name!r}; choose from {sorted(GALLERY)}")
    fn, _ = GALLERY[name]
    try:
        return fn(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None
