"""Numerical experiments behind ``specmeas reproduce <id>``.

Each experiment writes ``<id>.csv`` (``#`` metadata, one header row) and
returns a report dict with named pass/fail checks.  ``quick=True`` shrinks
ladders and sizes for smoke runs; checks are still evaluated but the
thresholds are meant for the full run.  With ``plot=True`` and matplotlib
installed a PNG is written next to the CSV.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .cli import write_csv
from .collocation import BasisFamily, collocate, reconstruct
from .density import fit_slope, rate_study, smoothed_density
from .funcalc import evolve
from .gallery import build, make_penrose
from .operator_model import DecayVector
from .poisson import atom_weight

EXPERIMENTS: dict[str, Callable] = {}


def experiment(name):
    def deco(fn):
        EXPERIMENTS[name] = fn
        return fn

    return deco


def _ladder(lo: float, hi: float, step: float) -> np.ndarray:
    """``10^-lo .. 10^-hi`` in steps of ``step`` decades."""
    return 10.0 ** -np.arange(lo, hi + 1e-9, step)


def _within(v, centre, tol) -> bool:
    return bool(abs(v - centre) <= tol)


def _rate_rows(study, labels):
    rows = []
    for d in range(study.errors.shape[0]):
        for i, e in enumerate(study.eps):
            row = [d, e] + [abs(v) for v in study.errors[d, i]]
            if study.l1_errors is not None:
                row.append(study.l1_errors[d, i])
            rows.append(row)
    header = ["depth", "eps"] + [f"err_{lab}" for lab in labels]
    if study.l1_errors is not None:
        header.append("err_L1")
    return header, rows


@experiment("jacobi1")
def jacobi1(quick=False):
    op, ref = build("jacobi", a=0.7, b=0.3)
    lad = _ladder(1.0, 2.0 if quick else 2.5, 0.25)
    st = rate_study(op, ref, [0.0, 1.0, -1.0], lad, 1, l1_window=(-1.0, 1.0))
    header, rows = _rate_rows(st, ["0", "+1", "-1"])
    s = st.slopes
    checks = {
        "slope_0_raw": _within(s[0, 0], 1.0, 0.15),
        "slope_0_extrap": _within(s[1, 0], 2.0, 0.25),
        "slope_+1": _within(s[0, 1], 0.7, 0.15),
        "slope_-1": _within(s[0, 2], 0.3, 0.1),
        "slope_L1_extrap": _within(st.l1_slopes[1], 1.3, 0.2),
    }
    meta = {"operator": "jacobi a=0.7 b=0.3", "slopes_raw": s[0].round(3).tolist(),
            "slopes_extrap": s[1].round(3).tolist(), "l1_slopes": st.l1_slopes.round(3).tolist()}
    return header, rows, checks, meta


@experiment("lag1")
def lag1(quick=False):
    op, ref = build("laguerre", a=0.5)
    lad = _ladder(0.75, 1.25 if quick else 1.5, 0.25)
    st = rate_study(op, ref, [0.0, 1.0], lad, 1, l1_window=(0.0, 1.0), l1_nodes=120, tol=1e-10, cap=2**23)
    mass = integrate.quad(ref, 0.0, 1.0)[0]
    st.l1_errors = st.l1_errors / mass
    header, rows = _rate_rows(st, ["0", "1"])
    s = st.slopes
    checks = {
        "slope_0_raw": _within(s[0, 0], 0.5, 0.1),
        "slope_1_raw": _within(s[0, 1], 1.0, 0.15),
        "slope_L1_extrap": _within(st.l1_slopes[1], 1.5, 0.2),
        "slope_1_extrap": _within(s[1, 1], 2.0, 0.25),
    }
    meta = {"operator": "laguerre a=0.5", "slopes_raw": s[0].round(3).tolist(),
            "slopes_extrap": s[1].round(3).tolist(), "l1_slopes": st.l1_slopes.round(3).tolist(),
            "l1": "relative to mass on [0,1]"}
    return header, rows, checks, meta


@experiment("jacobi10")
def jacobi10(quick=False):
    op, ref = build("jacobi", a=0.7, b=0.3)
    depth = 5 if quick else 10
    st = rate_study(op, ref, [0.2], _ladder(0.5, 1.5, 0.125), depth, tol=1e-8, cap=2**23)
    header, rows = _rate_rows(st, ["0.2"])
    checks = {"slope_depth_max": bool(st.slopes[-1, 0] >= 6.0)}
    meta = {"operator": "jacobi a=0.7 b=0.3", "slopes_by_depth": st.slopes[:, 0].round(2).tolist()}
    return header, rows, checks, meta


@experiment("charl1")
def charl1(quick=False):
    rows, worst = [], 0.0
    for alpha in (0.5, 5.0):
        op, _ = build("charlier", a=alpha)
        for m in range(0, 4 if quick else 9):
            w = atom_weight(op, DecayVector.basis(1), float(m), 1e-7)
            exact = math.exp(-alpha) * alpha**m / math.factorial(m)
            worst = max(worst, abs(w - exact))
            rows.append([alpha, m, w, exact, abs(w - exact)])
    checks = {"atom_error": worst <= 1e-10}
    return ["alpha", "m", "weight", "exact", "abs_error"], rows, checks, {"eps": 1e-7, "max_error": worst}


@experiment("jacobi2")
def jacobi2(quick=False):
    op, ref = build("jacobi", a=0.7, b=0.3)
    basis = BasisFamily("chebyshev")
    grid = np.linspace(-0.9, 0.9, 361)
    rows = []
    for M in (10, 20, 40) if quick else (10, 20, 40, 80):
        r = collocate(op, DecayVector.basis(1), basis, M, eps=0.1)
        err = float(np.max(np.abs(reconstruct(basis, r.coeffs, grid) - ref(grid))))
        rows.append([M, 0.1, err, r.residual, r.condition])
    errs = [r[2] for r in rows]
    checks = {"error_decreases": bool(errs[-1] < errs[0])}
    return ["M", "eps", "err_inf_[-0.9,0.9]", "residual", "condition"], rows, checks, {"basis": "chebyshev"}


@experiment("cmv1")
def cmv1(quick=False):
    lad = _ladder(1.0, 2.0 if quick else 2.5, 0.25)
    rows, checks, slopes = [], {}, {}
    header = None
    for q in (0.1, 0.5):
        op, ref = build("rogers_szego", q=q)
        st = rate_study(op, ref, [0.0, 1.0], lad, 1)
        header, r = _rate_rows(st, ["0", "1"])
        rows += [[q] + row for row in r]
        slopes[q] = st.slopes.round(3).tolist()
        for p in range(2):
            checks[f"q{q}_raw_{p}"] = _within(st.slopes[0, p], 1.0, 0.15)
            checks[f"q{q}_extrap_{p}"] = _within(st.slopes[1, p], 2.0, 0.25)
    return ["q"] + header, rows, checks, {"slopes": slopes}


def poisson_convolved(ref, theta, r):
    """Exact disk-Poisson convolution at radius ``r`` of a reference measure on
    the circle, by adaptive quadrature (atoms added in closed form)."""

    def kern(t, s):
        return (1 - r * r) / (2 * math.pi * (1 - 2 * r * math.cos(t - s) + r * r))

    out = []
    th = ref.notes.get("theta_a")
    brk = [-math.pi, -th, th, math.pi] if th else [-math.pi, math.pi]
    for t in np.atleast_1d(theta):
        val = 0.0
        for lo, hi in zip(brk, brk[1:]):
            pts = [p for p in (t,) if lo < p < hi]
            val += integrate.quad(lambda s: float(ref(s)) * kern(t, s), lo, hi, points=pts or None,
                                  limit=400, epsabs=1e-13, epsrel=1e-12)[0]
        for loc, w in ref.atoms:
            val += w * kern(t, loc)
        out.append(val)
    return np.array(out)


@experiment("ger1")
def ger1(quick=False):
    rows, checks = [], {}
    basis = BasisFamily("fourier")
    for a in (-0.5, -0.3):
        op, ref = build("geronimus", a=a)
        th_a = ref.notes["theta_a"]
        grid = np.linspace(th_a + 0.05, math.pi - 0.05, 60)
        errs = []
        for eps in (1e-1, 1e-2) if quick else (1e-1, 1e-2, 1e-3):
            v = smoothed_density(op, DecayVector.basis(1), grid, eps, richardson_depth=1).real
            errs.append(float(np.max(np.abs(v - ref(grid)))))
            rows.append([a, "poisson", eps, errs[-1]])
        r = collocate(op, DecayVector.basis(1), basis, 21, eps=0.1)
        cerr = float(np.max(np.abs(reconstruct(basis, r.coeffs, grid).real - ref(grid))))
        rows.append([a, "collocation", 0.1, cerr])
        checks[f"a{a}_poisson_converges"] = bool(errs[-1] < errs[0])
    return ["a", "method", "eps", "err_inf_arc"], rows, checks, {"M": 21}


@experiment("ger2")
def ger2(quick=False):
    op, ref = build("geronimus", a=0.8)
    r = 1.0 / 1.01
    eps = 1.0 - r  # smoothing distance whose disk radius is r
    th_a = ref.notes["theta_a"]
    theta = np.linspace(-math.pi, math.pi, 121 if quick else 721)
    theta = theta[np.abs(theta) > 0.1]
    got = smoothed_density(op, DecayVector.basis(1), theta, eps, tol=1e-12).real
    exact = poisson_convolved(ref, theta, r)
    linf = float(np.max(np.abs(got - exact)))
    basis = BasisFamily("fourier")
    k = np.arange(1, 22)
    ring = np.exp(2j * math.pi * k / 21)
    colloc = collocate(op, DecayVector.basis(1), basis, 21, points=np.concatenate([0.9 * ring, 1.1 * ring]), drift_check=False)
    arc = np.linspace(th_a + 0.1, math.pi - 0.1, 40)
    dens_err = []
    for e in (1e-1, 1e-2, 1e-3):
        v = smoothed_density(op, DecayVector.basis(1), arc, e).real
        dens_err.append(float(np.max(np.abs(v - ref(arc)))))
    rows = [[t, g, x] for t, g, x in zip(theta, got, exact)]
    checks = {
        "smoothed_matches_convolution": linf <= 1e-4,
        "density_converges_on_arc": bool(dens_err[2] < dens_err[1] < dens_err[0]),
        "collocation_residual_large": bool(colloc.residual > 1e-2),
    }
    meta = {"a": 0.8, "radius": r, "linf": linf, "arc_errors": dens_err, "collocation_residual": colloc.residual}
    return ["theta", "smoothed", "exact_convolution"], rows, checks, meta


def _pad_diff(a, b):
    m = max(a.size, b.size)
    x = np.zeros(m, complex)
    y = np.zeros(m, complex)
    x[: a.size] = a
    y[: b.size] = b
    return float(np.linalg.norm(x - y))


def penrose_errors(op, alpha, sizes, ref_size, t=1.0, tol=1e-8):
    """Distance of the truncation-``n`` solution to the one at ``ref_size``, for ``x = e_1``."""
    x = DecayVector.basis(1)
    run = lambda n: evolve(op, x, "fractional_diffusion", t, alpha=alpha, fixed_n=n, tol=tol).coeffs
    ref = run(ref_size)
    return [_pad_diff(run(n), ref) for n in sizes]


def penrose_norms(op, times, n, alphas=(1.0, 0.5), tol=1e-6):
    """``||u(t)||`` at truncation ``n`` for each ``alpha``."""
    x = DecayVector.basis(1)
    return {al: [float(np.linalg.norm(evolve(op, x, "fractional_diffusion", t, alpha=al, fixed_n=n, tol=tol).coeffs))
                 for t in times] for al in alphas}


def exponential_ratio_ok(errs, floor=1e-8, ratio=3.0) -> bool:
    """Successive errors shrink by ``ratio`` per doubling until ``floor``."""
    for e0, e1 in zip(errs, errs[1:]):
        if e0 <= floor:
            break
        if e1 > e0 / ratio and e1 > floor:
            return False
    return True


@experiment("pen1")
def pen1(quick=False):
    # a radius-30 patch has about 3300 vertices; cost per contour node grows like n^2
    op = make_penrose(20.0 if quick else 30.0, -1)
    sizes = [32, 64, 128] if quick else [64, 128, 256]
    ref_size = 4 * sizes[-1]
    e1 = penrose_errors(op, 1.0, sizes, ref_size)
    eh = penrose_errors(op, 0.5, sizes, ref_size, tol=1e-6)
    slope = -fit_slope(sizes, eh)
    rows = [[n, a, b] for n, a, b in zip(sizes, e1, eh)]
    checks = {"alpha1_exponential": exponential_ratio_ok(e1), "alpha_half_algebraic": 0.5 <= slope <= 2.0}
    meta = {"reference_n": ref_size, "vertices": op.params["vertices"], "slope_alpha_half": slope}
    return ["n", "err_alpha_1", "err_alpha_0.5"], rows, checks, meta


@experiment("pen2")
def pen2(quick=False):
    op = make_penrose(20.0 if quick else 30.0, -1)
    times = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
    n = 128 if quick else 256
    norms = penrose_norms(op, times, n)
    ok = all(all(b <= a * (1 + 1e-8) for a, b in zip(v, v[1:])) for v in norms.values())
    rows = [[al, t, v] for al, vals in norms.items() for t, v in zip(times, vals)]
    return ["alpha", "t", "norm"], rows, {"norm_nonincreasing": bool(ok)}, {"n": n}


def _plot(name, header, rows, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    data = np.array([[float(v) if not isinstance(v, str) else np.nan for v in r] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    # a repeating first column (depth, alpha, ...) labels separate series
    groups = [f"{header[0]}={r[0]}" for r in rows]
    if len(set(groups)) == len(groups):
        groups = [""] * len(rows)
    for g in dict.fromkeys(groups):
        sel = np.array([h == g for h in groups])
        for j in range(2, data.shape[1]):
            ok = sel & np.isfinite(data[:, j]) & (data[:, j] > 0)
            if ok.any():
                ax.loglog(np.abs(data[ok, 1]) + 1e-300, data[ok, j], ".-", label=f"{header[j]} {g}".strip())
    ax.set_title(name)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def reproduce(figure: str, outdir: Path | str = ".", quick: bool = False, plot: bool = False) -> dict:
    """Run experiment ``figure`` and write its CSV; returns the report."""
    if figure not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {figure!r}; choose from {sorted(EXPERIMENTS)}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    header, rows, checks, meta = EXPERIMENTS[figure](quick=quick)
    csv_path = outdir / f"{figure}.csv"
    with open(csv_path, "w", newline="") as fh:
        write_csv(fh, {"experiment": figure, "quick": quick, **meta}, header, rows)
    report = {"figure": figure, "csv": str(csv_path), "checks": checks, "passed": all(checks.values()), "meta": meta}
    if plot:
        report["png"] = _plot(figure, header, rows, outdir / f"{figure}.png")
    with open(outdir / f"{figure}_summary.txt", "w") as fh:
        for k, v in checks.items():
            fh.write(f"{'PASS' if v else 'FAIL'} {k}\n")
    return report
