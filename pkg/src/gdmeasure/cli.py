"""Command-line front end.

Subcommands
-----------
systems      list the built-in system kinds
eval         tabulate the distribution function of a system on [0, 1]
dim          dimension reports (sampling, exact averaging, closed forms,
             curve-measure sampler, density fixed point)
check        run the weight/separation condition checkers
singularity  certified or sampled comparison against a product measure

Every run that writes files also prints a run manifest (JSON, schema 1) to
stdout: the command, the config source, the seed, the effective parameters,
the tool version, and a sha256 digest per output file.  Two runs with the
same manifest produce byte-identical outputs — no timestamps, no unseeded
randomness, sorted JSON keys throughout.  Output files are written via a
temporary file and an atomic rename, so a failed run leaves no partial file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from fractions import Fraction

from .errors import GdmError, ConfigError, ValidationError
from .systems import DrivenSystem, HataParams, builtin_kinds, from_config
from .measure import distribution_function
from . import conditions as cond
from . import dimension as dim
from . import singularity as sing

SCHEMA = 1
MAX_DYADIC_LEVEL = 16


# ---------------------------------------------------------------------------
# serialization helpers


def _plain(obj):
    """Recursively convert to JSON-safe plain data (strict: no NaN/Infinity)."""
    if isinstance(obj, Fraction):
        return str(obj.numerator) if obj.denominator == 1 else str(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    if hasattr(obj, "item"):  # numpy scalars
        return _plain(obj.item())
    if hasattr(obj, "tolist"):  # numpy arrays
        return _plain(obj.tolist())
    return str(obj)


def _json_text(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def _fmt_value(v) -> str:
    """CSV cell: Fractions stay exact, floats round-trip via repr."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_atomic(path: str, text: str) -> str:
    """Write text to ``path`` atomically; return the content digest."""
    data = text.encode("utf-8")
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _emit(args, text: str, *, command: str, parameters: dict,
          seed=None) -> None:
    """Deliver a result: to --out with a manifest on stdout, else to stdout."""
    out = getattr(args, "out", None)
    if out is None:
        sys.stdout.write(text)
        return
    digest = _write_atomic(out, text)
    manifest = {
        "schema": SCHEMA,
        "command": command,
        "config": getattr(args, "system", None),
        "seed": seed,
        "parameters": parameters,
        "version": _version(),
        "outputs": {out: digest},
    }
    sys.stdout.write(_json_text(manifest))


def _version() -> str:
    from . import __version__

    return __version__


# ---------------------------------------------------------------------------
# argument parsing helpers


_BARE_KINDS = {k for k, _ in builtin_kinds()}


def _load_config(source: str) -> dict:
    """Accept an inline JSON object, a bare builtin kind, or a file path."""
    s = source.strip()
    if s.startswith("{"):
        try:
            cfg = json.loads(s)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"inline config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("inline config must be a JSON object")
        return cfg
    if s in _BARE_KINDS:
        return {"kind": s}
    if not os.path.exists(s):
        raise ConfigError(
            f"system source {source!r} is neither inline JSON, a builtin kind, "
            f"nor an existing file"
        )
    with open(s, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {source!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {source!r} must hold a JSON object")
    return cfg


def _load_system(source: str):
    return from_config(_load_config(source))


def _require_driven(obj, what: str) -> DrivenSystem:
    if isinstance(obj, HataParams):
        raise ConfigError(
            f"the closed-form tree kind has no path dynamics; {what} does not "
            f"apply (use `dim --method closed`)"
        )
    return obj


def _parse_number(text: str):
    """Parse a scalar as an exact Fraction when possible, else float."""
    t = text.strip()
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        return float(t)


def _parse_start(text: str | None, system: DrivenSystem):
    if text is None:
        return system.y0
    t = text.strip()
    if t.startswith("("):
        t = t.strip("()")
    if "," in t and system.state_kind == "circle":
        parts = [float(_parse_number(p)) for p in t.split(",")]
        if len(parts) != 2:
            raise ConfigError("a circle start point needs two coordinates")
        return tuple(parts)
    value = _parse_number(t)
    if system.state_kind == "finite":
        return int(value)
    return value


def _parse_points(spec: str):
    s = spec.strip()
    if s.startswith("dyadic:"):
        try:
            k = int(s.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad dyadic level in {spec!r}") from None
        if not (0 <= k <= MAX_DYADIC_LEVEL):
            raise ConfigError(
                f"dyadic level must be between 0 and {MAX_DYADIC_LEVEL}"
            )
        step = Fraction(1, 2 ** k)
        return [j * step for j in range(2 ** k + 1)]
    pts = [Fraction(p.strip()) for p in s.split(",") if p.strip()]
    if not pts:
        raise ConfigError("empty point list")
    for p in pts:
        if not (0 <= p <= 1):
            raise ConfigError(f"evaluation point {p} lies outside [0, 1]")
    return sorted(pts)


def _parse_prob_vector(text: str) -> list:
    probs = [Fraction(p.strip()) for p in text.split(",") if p.strip()]
    if len(probs) < 2:
        raise ConfigError("a comparison vector needs at least two entries")
    return probs


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("GDM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"GDM_THREADS must be an integer, got {env!r}") from None
    return 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_systems_list(args) -> int:
    lines = [f"{kind:<24}{desc}" for kind, desc in builtin_kinds()]
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_eval(args) -> int:
    system = _require_driven(_load_system(args.system), "eval")
    if system.geometry.name != "interval":
        raise ConfigError(
            f"eval needs a system carried on the interval; "
            f"{system.label!r} lives on the {system.geometry.name}"
        )
    grid = _parse_points(args.points)
    y0 = _parse_start(args.y0, system)
    rows = distribution_function(system, y0, grid, depth_limit=args.depth_limit)
    text = "t,phi\n" + "".join(
        f"{_fmt_value(t)},{_fmt_value(v)}\n" for t, v in rows
    )
    _emit(args, text, command="eval",
          parameters={"points": args.points, "y0": args.y0,
                      "depth_limit": args.depth_limit})
    return 0


def _dim_closed(obj) -> dim.DimReport:
    if isinstance(obj, HataParams):
        return dim.dim_hata(float(obj.h_sq), float(obj.alpha_sq))
    if obj.kind == "linear":
        return dim.dim_linear(obj.probs(obj.y0))
    raise ConfigError(
        f"no closed dimension formula for kind {obj.kind!r}; "
        f"closed forms exist for 'linear' and 'hata'"
    )


def cmd_dim(args) -> int:
    method = args.method
    if method == "kinney":
        report = dim.dim_kinney(samples=args.samples, seed=args.seed)
    else:
        if args.system is None:
            raise ConfigError(f"--system is required for method {method!r}")
        obj = _load_system(args.system)
        if method == "closed":
            report = _dim_closed(obj)
        elif method == "mc":
            system = _require_driven(obj, "the sampling estimator")
            report = dim.dim_report_mc(
                system, n=args.n, paths=args.paths, seed=args.seed,
                wa_constant=args.wa_constant, threads=_resolve_threads(args),
            )
        elif method == "exact":
            system = _require_driven(obj, "exact averaging")
            depth = min(args.n, 12)
            mean = dim.entropy_average_exact(system, n=depth)
            geo = system.geometry
            upper, lower = dim.dim_bounds(mean, geo)
            report = dim.DimReport(
                method="entropy_exact",
                estimate=mean / geo.log_inv_contraction,
                upper_bound=upper,
                lower_bound=lower,
                bounds_note="exact average over all words of the given depth",
                params={"depth": depth, "r": float(geo.contraction),
                        "mean_entropy": mean, "label": system.label},
            )
        elif method == "fanlau":
            system = _require_driven(obj, "the density solver")
            if system.lft is None:
                raise ConfigError(
                    "the density solver needs a fractional-linear matrix "
                    "family (derham_lft / minkowski / moebius_ac / "
                    "bernoulli_lft)"
                )
            from . import transfer

            report = transfer.dim_fanlau(system.lft, m=args.grid_size,
                                         tol=args.tol)
        else:  # pragma: no cover - argparse enforces choices
            raise ConfigError(f"unknown method {method!r}")
    _emit(args, report.to_json() + "\n", command="dim", seed=args.seed,
          parameters={"method": method, "n": args.n, "paths": args.paths,
                      "samples": args.samples, "grid_size": args.grid_size})
    return 0


_CHECKERS = {
    "A": lambda system, y, args: cond.check_A(system, y, depth=args.depth),
    "wA": lambda system, y, args: cond.check_wA(system, y, depth=args.depth),
    "B": lambda system, y, args: cond.check_B(
        system, y, eps0=args.eps0, l=args.block_len, depth=args.depth),
    "sB": lambda system, y, args: cond.check_sB(
        system, y, eps0=args.eps0, l=args.block_len, depth=args.depth),
}


def cmd_check(args) -> int:
    system = _require_driven(_load_system(args.system), "condition checking")
    names = [c.strip() for c in args.conditions.split(",") if c.strip()]
    if not names:
        raise ConfigError("no conditions requested")
    for name in names:
        if name not in _CHECKERS:
            raise ConfigError(
                f"unknown condition {name!r}; pick from A, wA, B, sB"
            )
    y = _parse_start(args.y, system)
    results = {}
    for name in names:
        verdict = _CHECKERS[name](system, y, args)
        results[name] = verdict.as_dict()
    payload = {
        "system": system.label,
        "y": _plain(y),
        "depth": args.depth,
        "results": results,
    }
    _emit(args, _json_text(payload), command="check",
          parameters={"conditions": args.conditions, "y": args.y,
                      "depth": args.depth,
                      "eps0": None if args.eps0 is None else str(args.eps0),
                      "block_len": args.block_len})
    return 0


def cmd_singularity(args) -> int:
    system = _require_driven(_load_system(args.system), "singularity testing")
    p = _parse_prob_vector(args.bernoulli)
    if len(p) != system.alphabet_size:
        raise ConfigError(
            f"comparison vector has {len(p)} entries but the system has "
            f"{system.alphabet_size} branches"
        )
    y0 = _parse_start(args.y0, system)
    report = None
    if system.lft is not None and not args.skip_certify:
        classified = sing.classify_derham(system.lft)
        report = _match_classification(classified, p)
    if report is None and not args.skip_certify:
        cert = sing.certify_singular(
            system, y0, p, max_len=args.certify_len, depth=args.depth,
            word_budget=args.word_budget,
        )
        if cert.verdict == sing.SINGULAR_CERTIFIED:
            report = cert
    if report is None:
        report = sing.hellinger_test(
            system, y0, p, T=args.T, paths=args.paths, seed=args.seed,
        )
    _emit(args, report.to_json() + "\n", command="singularity",
          seed=args.seed,
          parameters={"bernoulli": args.bernoulli, "T": args.T,
                      "paths": args.paths, "certify_len": args.certify_len,
                      "skip_certify": args.skip_certify})
    return 0


def _match_classification(classified, p):
    """Use a matrix-family classification when it answers the requested
    comparison: an equivalence certificate only matches its own vector, while
    an every-product-measure singularity certificate covers any vector."""
    if classified.verdict == sing.AC_CERTIFIED:
        evidence = classified.evidence or {}
        recovered = evidence.get("p")
        if recovered is not None and len(recovered) == len(p):
            if all(Fraction(a) == Fraction(b) for a, b in zip(recovered, p)):
                return classified
        return None
    if classified.verdict == sing.SINGULAR_CERTIFIED:
        if classified.comparison in ("every-bernoulli", "bernoulli-grid"):
            return classified
    return None


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdmeasure",
        description="driven product measures: curves, conditions, dimensions",
    )
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p_sys = sub.add_parser("systems", help="list built-in system kinds")
    p_sys.set_defaults(func=cmd_systems_list)

    p_eval = sub.add_parser("eval", help="tabulate the distribution function")
    p_eval.add_argument("--system", required=True,
                        help="builtin kind, config file path, or inline JSON")
    p_eval.add_argument("--points", default="dyadic:8",
                        help="'dyadic:k' or a comma list of rationals in [0,1]")
    p_eval.add_argument("--y0", default=None, help="override the start state")
    p_eval.add_argument("--depth-limit", type=int, default=40,
                        help="cylinder decomposition depth for the masses")
    p_eval.add_argument("--out", default=None, help="write CSV here")
    p_eval.set_defaults(func=cmd_eval)

    p_dim = sub.add_parser("dim", help="dimension report")
    p_dim.add_argument("--system", default=None,
                       help="builtin kind, config file path, or inline JSON")
    p_dim.add_argument("--method", required=True,
                       choices=["mc", "exact", "closed", "kinney", "fanlau"])
    p_dim.add_argument("--n", type=int, default=2000,
                       help="path length (mc) or averaging depth (exact)")
    p_dim.add_argument("--paths", type=int, default=200)
    p_dim.add_argument("--seed", type=int, default=0)
    p_dim.add_argument("--samples", type=int, default=100_000,
                       help="sample count for the curve-measure method")
    p_dim.add_argument("--grid-size", type=int, default=2049,
                       help="node count for the density fixed point")
    p_dim.add_argument("--tol", type=float, default=1e-10)
    p_dim.add_argument("--wa-constant", type=float, default=None,
                       help="two-sided weight bound for the analytic floor")
    p_dim.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: GDM_THREADS or 1)")
    p_dim.add_argument("--out", default=None, help="write the report here")
    p_dim.set_defaults(func=cmd_dim)

    p_chk = sub.add_parser("check", help="run condition checkers")
    p_chk.add_argument("--system", required=True)
    p_chk.add_argument("--conditions", default="A,wA,B,sB",
                       help="comma list from A, wA, B, sB")
    p_chk.add_argument("--y", default=None, help="root state (default: y0)")
    p_chk.add_argument("--depth", type=int, default=cond.DEFAULT_DEPTH)
    p_chk.add_argument("--eps0", type=_parse_number, default=None,
                       help="box half-width for B/sB (default: small grid)")
    p_chk.add_argument("--block-len", type=int, default=None, dest="block_len",
                       help="word length for B/sB (default: 1..3 grid)")
    p_chk.add_argument("--out", default=None, help="write verdicts here")
    p_chk.set_defaults(func=cmd_check)

    p_sing = sub.add_parser("singularity",
                            help="compare against a product measure")
    p_sing.add_argument("--system", required=True)
    p_sing.add_argument("--bernoulli", required=True,
                        help="comparison weights, e.g. '1/2,1/2'")
    p_sing.add_argument("--y0", default=None)
    p_sing.add_argument("--T", type=int, default=10_000, dest="T")
    p_sing.add_argument("--paths", type=int, default=50)
    p_sing.add_argument("--seed", type=int, default=0)
    p_sing.add_argument("--depth", type=int, default=8,
                        help="orbit depth for the certificate search")
    p_sing.add_argument("--certify-len", type=int, default=2,
                        help="longest separation word tried before sampling")
    p_sing.add_argument("--word-budget", type=int, default=30)
    p_sing.add_argument("--skip-certify", action="store_true",
                        help="go straight to the sampled comparison")
    p_sing.add_argument("--out", default=None, help="write the report here")
    p_sing.set_defaults(func=cmd_singularity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _print_error(type(exc).__name__, str(exc),
                     condition=exc.condition, index=exc.index)
        return 1
    except GdmError as exc:
        _print_error(type(exc).__name__, str(exc))
        return 1
    except (ValueError, OSError) as exc:
        _print_error(type(exc).__name__, str(exc))
        return 1


def _print_error(kind: str, message: str, **extra) -> None:
    payload = {"schema": SCHEMA, "error": {"type": kind, "message": message}}
    for key, value in extra.items():
        if value is not None:
            payload["error"][key] = _plain(value)
    sys.stderr.write(_json_text(payload))


if __name__ == "__main__":
    sys.exit(main())
