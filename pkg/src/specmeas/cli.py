"""Command-line driver: ``specmeas <command> [options]``.

Every command builds a :class:`RunConfig`, validates it against a JSON schema
and runs it.  Tables go out as CSV with ``#`` metadata lines (complex values as
``re,im`` column pairs); decompositions and interval sets as JSON.  Failures
exit with status 2 and a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

COMMANDS = (
    "resolve", "measure", "project", "atoms", "density", "funcalc", "evolve",
    "decompose", "spectrum", "collocate", "gallery", "reproduce",
)

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "operator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gallery": {"type": "string"},
                "params": {"type": "object"},
                "matrix": {"type": "string"},
            },
        },
        "vector": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"basis": {"type": "integer", "minimum": 1}, "file": {"type": "string"}},
        },
        "y": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {"basis": {"type": "integer", "minimum": 1}, "file": {"type": "string"}},
        },
        "params": {"type": "object"},
        "output": {"type": ["string", "null"]},
        "seed": {"type": "integer"},
        "threads": {"type": ["integer", "null"], "minimum": 1},
    },
}


@dataclass
class RunConfig:
    command: str
    operator: dict = field(default_factory=lambda: {"gallery": "free", "params": {}})
    vector: dict = field(default_factory=lambda: {"basis": 1})
    y: dict | None = None
    params: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    threads: int | None = None

    def validate(self) -> None:
        jsonschema.validate(asdict(self), SCHEMA)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        jsonschema.validate(data, SCHEMA)
        return cls(**data)


# ------------------------------------------------------------------ output


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(out, meta: dict, header: list[str], rows) -> None:
    for k, v in meta.items():
        out.write(f"# {k}: {v}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")


def _complex_rows(values, start=1):
    return [(k, float(np.real(v)), float(np.imag(v))) for k, v in enumerate(values, start=start)]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


# -------------------------------------------------------------- operators


def _operator(cfg: RunConfig):
    from .gallery import build
    from .operator_model import read_matrix_text

    spec = cfg.operator
    if "matrix" in spec:
        return read_matrix_text(spec["matrix"]), None
    name = spec.get("gallery", "free")
    return build(name, **spec.get("params", {}))


def _vector(spec: dict | None):
    from .operator_model import DecayVector

    if spec is None:
        return None
    if "file" in spec:
        data = np.loadtxt(spec["file"], delimiter=",", ndmin=2)
        vals = data[:, 0] + 1j * data[:, 1] if data.shape[1] > 1 else data[:, 0]
        return DecayVector.from_array(vals, label=Path(spec["file"]).name)
    return DecayVector.basis(int(spec.get("basis", 1)))


def _set(cfg: RunConfig, op):
    from .operator_model import OpenRealSet

    text = cfg.params.get("set")
    if not text:
        raise ValueError("missing --set")
    return OpenRealSet.parse(text, circle=op.kind == "u")


def _meta(cfg: RunConfig, op, **extra) -> dict:
    meta = {"command": cfg.command, "operator": getattr(op, "name", "?")}
    if cfg.operator.get("params"):
        meta["params"] = ",".join(f"{k}={v}" for k, v in cfg.operator["params"].items())
    meta.update(extra)
    return meta


# --------------------------------------------------------------- commands


def _cmd_resolve(cfg, out):
    from .resolvent import resolvent_action_adaptive

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    z = complex(str(cfg.params["z"]).replace("i", "j"))
    sol = resolvent_action_adaptive(op, x, z, float(cfg.params.get("tol", 1e-10)))
    write_csv(out, _meta(cfg, op, z=z, n_used=sol.n_used, bound=sol.bound), ["k", "re", "im"], _complex_rows(sol.coeffs))


def _cmd_measure(cfg, out):
    from .operator_model import OpenRealSet
    from .poisson import measure_of_set

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    y = _vector(cfg.y) or x
    U = _set(cfg, op)
    n = int(cfg.params.get("n", 100))
    rows = []
    for a, b in U.first(n):
        v = measure_of_set(op, x, y, OpenRealSet([(a, b)], circle=U.circle), n)
        rows.append((a, b, v.real, v.imag))
    write_csv(out, _meta(cfg, op, n=n, epsilon=1.0 / n), ["a", "b", "re", "im"], rows)


def _cmd_project(cfg, out):
    from .poisson import spectral_projection

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    n = int(cfg.params.get("n", 100))
    res = spectral_projection(op, x, _set(cfg, op), n)
    write_csv(out, _meta(cfg, op, n=n, epsilon=res.epsilon, kernel_bound=res.kernel_bound), ["k", "re", "im"],
              _complex_rows(res.coeffs))


def _cmd_atoms(cfg, out):
    from .poisson import atom_weight, find_atoms

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    eps = float(cfg.params.get("eps", 1e-6))
    if cfg.params.get("points"):
        pts = [float(p) for p in str(cfg.params["points"]).split(",")]
        rows = [(p, atom_weight(op, x, p, eps), math.nan) for p in pts]
    else:
        lo, hi = (float(v) for v in str(cfg.params.get("window", "-1,1")).split(","))
        rows = [(a.location, a.weight, a.background) for a in find_atoms(op, x, (lo, hi), eps)]
    write_csv(out, _meta(cfg, op, epsilon=eps), ["location", "weight", "background"], rows)


def _grid(cfg, U):
    n = int(cfg.params.get("grid", 201))
    ivs = U.first(1000)
    lo = max(min(a for a, _ in ivs), -1e3)
    hi = min(max(b for _, b in ivs), 1e3)
    return np.linspace(lo, hi, n)


def _cmd_density(cfg, out):
    from .density import rn_derivative, smoothed_density

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    y = _vector(cfg.y) or x
    U = _set(cfg, op)
    n = int(cfg.params.get("n", 100))
    depth = int(cfg.params.get("richardson", 0))
    u = _grid(cfg, U)
    if depth:
        inside = np.array([U.contains(v) for v in u])
        vals = np.zeros(u.size, complex)
        vals[inside] = smoothed_density(op, x, u[inside], 1.0 / n, y=y, richardson_depth=depth)
    else:
        vals = rn_derivative(op, x, y, U, n)(u)
    write_csv(out, _meta(cfg, op, n=n, epsilon=1.0 / n, richardson=depth), ["u", "re", "im"],
              [(a, v.real, v.imag) for a, v in zip(u, vals)])


def _cmd_funcalc(cfg, out):
    from .expr import compile_expression
    from .funcalc import BoundedFunctionSpec, ContourSpec, apply_cb_function, apply_holomorphic

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    F = compile_expression(str(cfg.params["f"]))
    tol = float(cfg.params.get("tol", 1e-8))
    if cfg.params.get("contour"):
        x0, x1, h = (float(v) for v in str(cfg.params["contour"]).split(","))
        hint = op.bounded_hint
        if hint is None or not np.all(np.isfinite(hint)):
            raise ValueError("a contour needs an operator with a bounded spectrum")
        res = apply_holomorphic(op, x, ContourSpec.rectangle(x0, x1, h, F, spectrum=tuple(hint)), tol)
        meta = _meta(cfg, op, f=cfg.params["f"], contour=cfg.params["contour"], bound=res.bound)
    else:
        n = int(cfg.params.get("n", 50))
        lip = cfg.params.get("lipschitz")
        res = apply_cb_function(op, x, BoundedFunctionSpec(F, lipschitz=None if lip is None else float(lip)), n, tol)
        meta = _meta(cfg, op, f=cfg.params["f"], n=n, epsilon=res.epsilon)
    write_csv(out, meta, ["k", "re", "im"], _complex_rows(res.coeffs))


def _cmd_evolve(cfg, out):
    from .funcalc import evolve

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    times = [float(t) for t in str(cfg.params.get("t", "1")).split(",")]
    eq = cfg.params.get("equation", "schrodinger")
    alpha = float(cfg.params.get("alpha", 1.0))
    tol = float(cfg.params.get("tol", 1e-8))
    n = cfg.params.get("n")
    fixed = cfg.params.get("fixed_n")
    rows, norms = [], []
    for t in times:
        res = evolve(op, x, eq, t, tol=tol, alpha=alpha, n=None if n is None else int(n),
                     fixed_n=None if fixed is None else int(fixed))
        norms.append(float(np.linalg.norm(res.coeffs)))
        rows += [(t, k, float(v.real), float(v.imag)) for k, v in enumerate(res.coeffs, start=1)]
    write_csv(out, _meta(cfg, op, equation=eq, alpha=alpha, norms=" ".join(_fmt(v) for v in norms)),
              ["t", "k", "re", "im"], rows)


def _stages(cfg, count):
    st = [int(v) for v in str(cfg.params.get("stages", "")).split(",") if v.strip()]
    if len(st) < count:
        raise ValueError(f"--stages needs {count} comma-separated integers")
    return st


def _cmd_decompose(cfg, out):
    from .decompositions import measure_decomposition

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    n1, n2 = _stages(cfg, 2)[:2]
    d = measure_decomposition(op, x, _set(cfg, op), n1, n2)
    doc = {
        "pp": d["pp"].value, "ac": d["ac"].value, "sc": d["sc"].value, "mu": d["mu"],
        "stage_meta": {"stages": [n1, n2], "c": d["c"].value, "s": d["s"].value,
                       "c_meta": d["c"].meta, "s_meta": d["s"].meta},
    }
    json.dump(doc, out, indent=2, default=_json_default)
    out.write("\n")


def _cmd_spectrum(cfg, out):
    from .decompositions import ac_spectrum_stage, pp_spectrum_stage, sc_spectrum_stage

    op, _ = _operator(cfg)
    kind = cfg.params.get("type", "pp")
    if kind == "sc":
        n1, n2, n3 = _stages(cfg, 3)[:3]
        st = sc_spectrum_stage(op, n1, n2, n3)
    else:
        n1, n2 = _stages(cfg, 2)[:2]
        st = (pp_spectrum_stage if kind == "pp" else ac_spectrum_stage)(op, n1, n2)
    doc = {"type": kind, "stages": list(st.indices), "intervals": [[a, b] for a, b in st.value],
           "leaves": [[a, b] for a, b in st.meta["leaves"]], "tested": st.meta["tested"]}
    json.dump(doc, out, indent=2, default=_json_default)
    out.write("\n")


def _cmd_collocate(cfg, out):
    from .collocation import BasisFamily, collocate, reconstruct

    op, _ = _operator(cfg)
    x = _vector(cfg.vector)
    basis = BasisFamily(cfg.params.get("basis", "chebyshev"))
    M = int(cfg.params.get("M", 41))
    eps = float(cfg.params.get("eps", 0.1))
    res = collocate(op, x, basis, M, eps=eps)
    meta = _meta(cfg, op, basis=basis.kind, M=M, epsilon=eps, residual=res.residual, condition=res.condition, rank=res.rank)
    write_csv(out, meta, ["m", "re", "im"], _complex_rows(res.coeffs))
    samples = cfg.params.get("samples")
    if samples:
        ng = int(cfg.params.get("grid", 201))
        grid = {"chebyshev": np.linspace(-1, 1, ng), "laguerre": np.linspace(0, 10, ng),
                "fourier": np.linspace(-math.pi, math.pi, ng)}[basis.kind]
        vals = reconstruct(basis, res.coeffs, grid)
        with open(samples, "w", newline="") as fh:
            write_csv(fh, meta, ["u", "re", "im"], [(g, float(np.real(v)), float(np.imag(v))) for g, v in zip(grid, vals)])


def _cmd_gallery(cfg, out):
    from .gallery import GALLERY, build
    from .operator_model import write_matrix_text

    action = cfg.params.get("action", "list")
    if action == "list":
        for name, (_, desc) in GALLERY.items():
            out.write(f"{name}\t{desc}\n")
        return
    op, _ = build(cfg.operator.get("gallery", "free"), **cfg.operator.get("params", {}))
    write_matrix_text(op, int(cfg.params.get("n", 20)), out)


def _cmd_reproduce(cfg, out):
    from .reproduce import reproduce

    fig = str(cfg.params.get("figure", "")).removeprefix("fig-")
    outdir = Path(cfg.params.get("outdir", "."))
    report = reproduce(fig, outdir, quick=bool(cfg.params.get("quick", False)), plot=bool(cfg.params.get("plot", False)))
    json.dump(report, out, indent=2, default=_json_default)
    out.write("\n")


_DISPATCH = {name: globals()[f"_cmd_{name}"] for name in COMMANDS}


def run(cfg: RunConfig) -> int:
    """Validate and execute ``cfg``; returns the exit status."""
    cfg.validate()
    if cfg.threads:
        try:
            import numba

            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
        except (ImportError, ValueError):
            pass
    np.random.seed(cfg.seed)
    if cfg.output:
        buf = io.StringIO()
        _DISPATCH[cfg.command](cfg, buf)
        Path(cfg.output).write_text(buf.getvalue())
    else:
        _DISPATCH[cfg.command](cfg, sys.stdout)
    return 0


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, vector: bool = True) -> None:
    p.add_argument("--op", default="free", help="gallery operator name")
    p.add_argument("--params", default="", help="operator parameters, e.g. a=0.7,b=0.3")
    p.add_argument("--matrix", help="operator from a text matrix file instead of the gallery")
    if vector:
        p.add_argument("--x", type=int, default=1, help="basis vector index j for x = e_j")
        p.add_argument("--x-file", help="CSV file with x coefficients (re[,im])")
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specmeas", description="Spectral measures of infinite matrices")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    parser.add_argument("--config", help="JSON run configuration (overrides other options)")
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("resolve", help="R(z) x")
    _common(p)
    p.add_argument("--z", required=True)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("measure", help="mu_{x,y} of each interval of an open set")
    _common(p)
    p.add_argument("--y", type=int)
    p.add_argument("--set", required=True, help="open set, e.g. '(0.5,1.5);(2,3)'")
    p.add_argument("--n", type=int, default=100)

    p = sub.add_parser("project", help="E_U x")
    _common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--n", type=int, default=100)

    p = sub.add_parser("atoms", help="point masses")
    _common(p)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--window", default="-1,1")
    p.add_argument("--points", help="comma-separated locations to weigh instead of searching")

    p = sub.add_parser("density", help="Radon-Nikodym derivative")
    _common(p)
    p.add_argument("--y", type=int)
    p.add_argument("--set", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--richardson", type=int, default=0)
    p.add_argument("--grid", type=int, default=201)

    p = sub.add_parser("funcalc", help="F(T) x")
    _common(p)
    p.add_argument("--f", required=True, help="expression in l, e.g. 'exp(-l^2)'")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--lipschitz", type=float)
    p.add_argument("--contour", help="x0,x1,h: rectangle contour for holomorphic F")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("evolve", help="evolution equations")
    _common(p)
    p.add_argument("--equation", choices=["schrodinger", "fractional_diffusion"], default="schrodinger")
    p.add_argument("--t", default="1")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--fixed-n", type=int)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("decompose", help="pp/ac/sc parts of mu_x(U)")
    _common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--stages", required=True, help="n1,n2")

    p = sub.add_parser("spectrum", help="finite-stage spectral sets")
    _common(p, vector=False)
    p.add_argument("--type", choices=["pp", "ac", "sc"], default="pp")
    p.add_argument("--stages", required=True, help="n1,n2 or n1,n2,n3 for sc")

    p = sub.add_parser("collocate", help="collocation density")
    _common(p)
    p.add_argument("--basis", choices=["chebyshev", "laguerre", "fourier"], default="chebyshev")
    p.add_argument("--M", type=int, default=41)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--samples", help="write sampled density CSV here")
    p.add_argument("--grid", type=int, default=201)

    p = sub.add_parser("gallery", help="list or dump gallery operators")
    p.add_argument("action", choices=["list", "dump"])
    p.add_argument("--name", default="free")
    p.add_argument("--params", default="")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out")

    p = sub.add_parser("reproduce", help="rerun a numerical experiment")
    p.add_argument("figure")
    p.add_argument("--outdir", default="reproduce_out")
    p.add_argument("--quick", action="store_true", help="smaller ladders and sizes")
    p.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")
    p.add_argument("--out")
    return parser


_PARAM_KEYS = {
    "resolve": ("z", "tol"),
    "measure": ("set", "n"),
    "project": ("set", "n"),
    "atoms": ("eps", "window", "points"),
    "density": ("set", "n", "richardson", "grid"),
    "funcalc": ("f", "n", "lipschitz", "contour", "tol"),
    "evolve": ("equation", "t", "alpha", "n", "fixed_n", "tol"),
    "decompose": ("set", "stages"),
    "spectrum": ("type", "stages"),
    "collocate": ("basis", "M", "eps", "samples", "grid"),
    "gallery": ("action", "n"),
    "reproduce": ("figure", "outdir", "quick", "plot"),
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    from .gallery import parse_params

    if args.config:
        cfg = RunConfig.from_json(Path(args.config).read_text())
        if args.threads and not cfg.threads:
            cfg.threads = args.threads
        return cfg
    cmd = args.command
    params = {k: getattr(args, k) for k in _PARAM_KEYS[cmd] if getattr(args, k, None) is not None}
    if cmd == "gallery":
        operator = {"gallery": args.name, "params": parse_params(args.params)}
    elif getattr(args, "matrix", None):
        operator = {"matrix": args.matrix}
    elif hasattr(args, "op"):
        operator = {"gallery": args.op, "params": parse_params(args.params)}
    else:
        operator = {"gallery": "free", "params": {}}
    operator = json.loads(json.dumps(operator, default=lambda o: str(o)))
    vector = {"basis": 1}
    if getattr(args, "x_file", None):
        vector = {"file": args.x_file}
    elif getattr(args, "x", None):
        vector = {"basis": args.x}
    y = {"basis": args.y} if getattr(args, "y", None) else None
    return RunConfig(cmd, operator, vector, y, params, getattr(args, "out", None), args.seed, args.threads)


def _error(exc: BaseException) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc).splitlines()[0] if str(exc) else ""}
    sys.stderr.write(json.dumps(doc) + "\n")
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            return 0
        return _error(ValueError("invalid command line"))
    if args.command is None and not args.config:
        parser.print_help()
        return 2
    try:
        return run(config_from_args(args))
    except (ValueError, KeyError, TypeError, RuntimeError, ArithmeticError, OSError,
            jsonschema.ValidationError) as exc:
        return _error(exc)


if __name__ == "__main__":
    sys.exit(main())
