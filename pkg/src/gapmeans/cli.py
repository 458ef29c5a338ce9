"""Command-line front end.

Every command resolves its arguments into a RunConfig that is embedded
in all outputs (JSON under "run_config", CSV as a leading comment line),
so a result file always says how it was produced.  Exit codes: 0 pass,
1 verification fail, 2 input error, 3 construction error, 4 resolution
or accuracy error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

DEFAULT_JMAX = 40


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict

    def to_dict(self) -> dict:
        return {"command": self.command, **self.params}

    def json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _resolve_threads(value):
    if value is not None:
        return int(value)
    env = os.environ.get("GAPMEANS_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            from .errors import InputError
            raise InputError(f"GAPMEANS_THREADS={env!r} is not an integer")
    return os.cpu_count() or 1


def _parse_p(text: str):
    from .errors import InputError
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part in ("inf", "infinity", "oo"):
            out.append(math.inf)
            continue
        try:
            val = float(part)
        except ValueError:
            raise InputError(f"bad p value '{part}'")
        if not val > 0:
            raise InputError(f"p must be positive, got {val}")
        out.append(val)
    if not out:
        raise InputError("empty p list")
    return out


def _radius_grid(args):
    from .grids import dyadic_grid
    return dyadic_grid(args.jmax)


def _write_json(path, payload: dict, cfg: RunConfig):
    payload = dict(payload)
    payload["run_config"] = cfg.to_dict()
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_csv(path, text: str, cfg: RunConfig):
    with open(path, "w") as fh:
        fh.write("# run_config: " + cfg.json_line() + "\n")
        fh.write(text)


def _format_value(log_value: float) -> str:
    """Decimal value when exp() is representable, else exp(log) notation."""
    if log_value == -math.inf:
        return "0"
    if abs(log_value) < 700.0:
        return "%.17g" % math.exp(log_value)
    return "exp(%.17g)" % log_value


def _load_series(path):
    from .lacunary import GapSeries
    return GapSeries.load(path)


def _radial_factor(spec: str):
    from .errors import InputError
    from .means import RadialFactor
    from .weights import parse_weight_spec
    if spec.startswith("alpha:"):
        return RadialFactor.alpha_factor(float(spec.split(":", 1)[1]))
    if spec.startswith("recip:"):
        return RadialFactor.reciprocal(parse_weight_spec(spec.split(":", 1)[1]))
    if spec == "1":
        return RadialFactor.one()
    try:
        return RadialFactor.from_weight(parse_weight_spec(spec))
    except Exception as e:
        raise InputError(f"bad radial factor spec '{spec}': {e}")


# ---------------------------------------------------------------------------
# commands


def cmd_synthesize(args) -> int:
    from .lacunary import theorem1_series
    from .weights import parse_weight_spec
    w = parse_weight_spec(args.weight)
    cfg = RunConfig("synthesize", {
        "weight": args.weight, "lambda": args.lam, "theta": args.theta,
        "n_max": args.nmax, "j_max": args.jmax, "seed": args.seed,
        "threads": args.threads})
    gs = theorem1_series(w, lam=args.lam, theta=args.theta,
                         n_max=args.nmax, j_max=args.jmax)
    _write_json(args.out, gs.to_json_dict(), cfg)
    print(f"terms={len(gs.terms)} r0_certified={gs.r0_certified:.17g}")
    if gs.r0_certified > 0.9:
        print("note: r0_certified exceeds 0.9")
    return 0


def cmd_verify(args) -> int:
    from .verify import theorem1_verify
    from .weights import parse_weight_spec
    w = parse_weight_spec(args.weight)
    ps = _parse_p(args.p)
    cfg = RunConfig("verify", {
        "weight": args.weight, "p": args.p, "j_max": args.jmax,
        "mode": args.mode, "lambda": args.lam, "theta": args.theta,
        "seed": args.seed, "threads": args.threads})
    gs, reports, _ = theorem1_verify(w, ps, j_max=args.jmax,
                                     lam=args.lam, theta=args.theta,
                                     mode_policy=args.mode)
    all_pass = all(rep.passed for rep in reports.values())
    payload = {
        "pipeline": "theorem1_verify",
        "params": {"weight": args.weight, "j_max": args.jmax},
        "series_terms": len(gs.terms),
        "r0_certified": gs.r0_certified,
        "reports": [rep.to_json_dict() for rep in reports.values()],
        "pass": all_pass,
    }
    if args.out:
        _write_json(args.out, payload, cfg)
    for p, rep in reports.items():
        label = "inf" if p == math.inf else ("%g" % p)
        print(f"p={label} pass={rep.passed} "
              f"log_C_lower={rep.log_C_lower:.17g} "
              f"log_C_upper={rep.log_C_upper:.17g}")
    return 0 if all_pass else 1


def cmd_means(args) -> int:
    from .means import sphere_profile
    gs = _load_series(args.series)
    p = _parse_p(args.p)[0]
    cfg = RunConfig("means", {
        "series": args.series, "p": args.p, "r": args.r, "j_max": args.jmax,
        "mode": args.mode, "seed": args.seed, "threads": args.threads})
    radii = [args.r] if args.r is not None else _radius_grid(args)
    prof = sphere_profile(gs, p, radii, mode_policy=args.mode)
    if args.out:
        _write_csv(args.out, prof.to_csv_text(), cfg)
    for pt in prof.points:
        print(f"r={pt.r:.17g} log_value={pt.log_value:.17g} "
              f"value={_format_value(pt.log_value)} mode={pt.mode}")
    return 0


def cmd_volume(args) -> int:
    from .means import volume_profile
    gs = _load_series(args.series)
    cfg = RunConfig("volume", {
        "series": args.series, "q": args.q, "d": args.d, "r": args.r,
        "j_max": args.jmax, "seed": args.seed, "threads": args.threads})
    radii = [args.r] if args.r is not None else _radius_grid(args)
    prof = volume_profile(gs, args.q, radii, args.d)
    if args.out:
        _write_csv(args.out, prof.to_csv_text(), cfg)
    for pt in prof.points:
        print(f"r={pt.r:.17g} log_value={pt.log_value:.17g} "
              f"value={_format_value(pt.log_value)} mode={pt.mode}")
    return 0


def cmd_weighted(args) -> int:
    from .means import weighted_volume_profile
    gs = _load_series(args.series)
    u = _radial_factor(args.u)
    cfg = RunConfig("weighted", {
        "series": args.series, "q": args.q, "d": args.d, "u": args.u,
        "r": args.r, "j_max": args.jmax, "seed": args.seed,
        "threads": args.threads})
    radii = [args.r] if args.r is not None else _radius_grid(args)
    prof = weighted_volume_profile(gs, args.q, u, radii, args.d)
    if args.out:
        _write_csv(args.out, prof.to_csv_text(), cfg)
    for pt in prof.points:
        print(f"r={pt.r:.17g} log_value={pt.log_value:.17g} "
              f"value={_format_value(pt.log_value)} mode={pt.mode}")
    return 0


def cmd_convexity(args) -> int:
    import csv as _csv

    from .errors import InputError
    from .weights import check_log_convexity
    cfg = RunConfig("convexity", {
        "profile": args.profile, "tol": args.tol, "seed": args.seed,
        "threads": args.threads})
    with open(args.profile, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = _csv.DictReader(lines)
    need = {"r", "log_value"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise InputError(f"{args.profile}: expected columns r,log_value")
    curve = []
    for row in reader:
        r = float(row["r"])
        y = float(row["log_value"])
        if r > 0.0 and math.isfinite(y):
            curve.append((r, y))
    rep = check_log_convexity(curve, args.tol)
    payload = rep.to_dict()
    if args.out:
        _write_json(args.out, payload, cfg)
    print(json.dumps(payload, sort_keys=True))
    return 0 if rep.passed else 1


def cmd_envelope(args) -> int:
    from .envelope import build_envelope, envelope_csv_text
    from .weights import parse_weight_spec
    w = parse_weight_spec(args.weight)
    cfg = RunConfig("envelope", {
        "weight": args.weight, "n_max": args.nmax,
        "slope_grid": args.slope_grid, "seed": args.seed,
        "threads": args.threads})
    env = build_envelope(w, args.nmax, slope_grid=args.slope_grid)
    text = envelope_csv_text(env)
    if args.out:
        _write_csv(args.out, text, cfg)
    else:
        sys.stdout.write(text)
    return 0


def cmd_multidim(args) -> int:
    from .weights import parse_weight_spec
    cfg = RunConfig("multidim", {
        "weight": args.weight, "d": args.d, "seed": args.seed,
        "n_max": args.nmax, "budget": args.budget,
        "regen_delta_table": args.regen_delta_table,
        "k_max": args.kmax, "threads": args.threads})
    if args.regen_delta_table:
        from .multidim import generate_delta_table
        text = generate_delta_table(d=args.d, k_max=args.kmax,
                                    budget=args.budget)
        _write_csv(args.regen_delta_table, text, cfg)
        print(f"delta table written to {args.regen_delta_table}")
        return 0
    from .multidim import theorem1_series_ball
    w = parse_weight_spec(args.weight)
    bs = theorem1_series_ball(w, args.d, seed=args.seed, n_max=args.nmax,
                              budget=args.budget)
    payload = bs.to_json_dict()
    payload["run_config"] = cfg.to_dict()
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"terms={len(bs.terms)} min_delta={bs.certificate.min_delta():.17g}")
    return 0


def cmd_demo_alpha(args) -> int:
    from .lacunary import GapSeries
    from .verify import alpha_weighted_demo
    if args.series:
        gs = _load_series(args.series)
    else:
        gs = GapSeries(dim=1, log_const=0.0, terms=(), r0_certified=0.0)
    cfg = RunConfig("demo-alpha", {
        "series": args.series, "p": args.p, "alpha": args.alpha,
        "d": args.d, "seed": args.seed, "threads": args.threads})
    rep, prof = alpha_weighted_demo(gs, args.p, args.alpha, args.d)
    payload = {"convexity": rep.to_dict(), "kind": prof.kind,
               "weighting": prof.weighting}
    if args.out:
        _write_json(args.out, payload, cfg)
    print(json.dumps(rep.to_dict(), sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gapmeans",
        description="Gap series with prescribed integral means: synthesis, "
                    "evaluation, certification.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="defaults to GAPMEANS_THREADS or cpu count")

    p = sub.add_parser("synthesize", help="build a gap series for a weight")
    p.add_argument("--weight", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=math.e)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--nmax", type=int, default=1 << 40)
    p.add_argument("--jmax", type=int, default=DEFAULT_JMAX)
    common(p)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("verify", help="two-sided M_p/w certificates")
    p.add_argument("--weight", required=True)
    p.add_argument("--p", required=True, help="comma list, e.g. 0.5,2,inf")
    p.add_argument("--jmax", type=int, default=DEFAULT_JMAX)
    p.add_argument("--mode", default="auto",
                   choices=["auto", "sampled-only", "bounds-only"])
    p.add_argument("--lambda", dest="lam", type=float, default=math.e)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("means", help="sphere means of a series file")
    p.add_argument("--series", required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--r", type=float)
    p.add_argument("--jmax", type=int, default=14)
    p.add_argument("--mode", default="auto",
                   choices=["auto", "sampled-only", "bounds-only"])
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_means)

    p = sub.add_parser("volume", help="volume means V_q")
    p.add_argument("--series", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=float)
    p.add_argument("--jmax", type=int, default=14)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_volume)

    p = sub.add_parser("weighted", help="radially weighted means M_{q,u}")
    p.add_argument("--series", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--u", required=True,
                   help="weight spec, recip:<spec>, alpha:<a>, or 1")
    p.add_argument("--r", type=float)
    p.add_argument("--jmax", type=int, default=14)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_weighted)

    p = sub.add_parser("convexity", help="log-convexity report of a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_convexity)

    p = sub.add_parser("envelope", help="support-line table of a weight")
    p.add_argument("--weight", required=True)
    p.add_argument("--nmax", type=int, default=4096)
    p.add_argument("--slope-grid", default="thinned",
                   choices=["thinned", "dense"])
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_envelope)

    p = sub.add_parser("multidim", help="ball series via random polynomials")
    p.add_argument("--weight", default="power:alpha=1")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--nmax", type=int, default=128)
    p.add_argument("--budget", type=int, default=100000)
    p.add_argument("--out", default="ball_series.json")
    p.add_argument("--regen-delta-table", metavar="PATH")
    p.add_argument("--kmax", type=int, default=64)
    common(p)
    p.set_defaults(fn=cmd_multidim)

    p = sub.add_parser("demo-alpha",
                       help="(1-t^2)^alpha means convexity demo")
    p.add_argument("--series")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_demo_alpha)

    return ap


def main(argv=None) -> int:
    from .errors import GapmeansError
    args = build_parser().parse_args(argv)
    try:
        args.threads = _resolve_threads(args.threads)
        os.environ["GAPMEANS_THREADS"] = str(args.threads)
        return args.fn(args)
    except GapmeansError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
