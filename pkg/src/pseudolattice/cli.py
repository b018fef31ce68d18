"""Command-line front end: generate, fit, holonomy, classical, compare, diophantine-measure.

Exit codes: 0 success, 2 invalid configuration (regime violation), 3 fit
failure, 4 cocycle or holonomy failure, 5 comparison mismatch or invalid
comparison inputs.  ``PSEUDOLATTICE_THREADS`` caps the BLAS thread pools.
"""

from __future__ import annotations

import os

_threads = os.environ.get("PSEUDOLATTICE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import gl2z  # noqa: E402
from .charts import PseudoChart  # noqa: E402
from .config import RunConfig, load_config  # noqa: E402
from .diophantine import DiophantineParams, bad_fraction  # noqa: E402
from .errors import PseudoLatticeError, RegimeViolation  # noqa: E402
from .io import atomic_write_text, read_json, write_json  # noqa: E402
from .models import circle_loop, classical_holonomy  # noqa: E402
from .monodromy import adjoint_compare, build_cocycle, holonomy  # noqa: E402
from .pipeline import fit_covering, synthesize_covering  # noqa: E402
from .plotting import write_overlay  # noqa: E402
from .spectrum import SpectrumCloud  # noqa: E402

log = logging.getLogger("pseudolattice")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_COCYCLE = 4
EXIT_COMPARE = 5


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
        overrides = {
            "h": getattr(args, "h", None),
            "eps": getattr(args, "eps", None),
            "seed": getattr(args, "seed", None),
            "output_dir": getattr(args, "out", None),
        }
        return cfg.with_overrides(**overrides)
    except RegimeViolation as exc:
        raise CommandError(f"regime violation: {exc}", EXIT_CONFIG) from exc
    except (ValueError, TypeError, KeyError, OSError) as exc:
        raise CommandError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


def cmd_generate(args) -> int:
    cfg = _config(args)
    model = cfg.build_model()
    covering = cfg.build_covering()
    cloud = synthesize_covering(model, covering, cfg.settings(), cfg.params())
    out = _out(cfg)
    atomic_write_text(out / "spectrum.csv", cloud.to_csv_text())
    write_json(out / "spectrum.json", {"seed": cfg.seed, "config": cfg.to_dict(include_output=False), "spectrum": cloud.metadata()})
    print(f"wrote {len(cloud)} points to {out / 'spectrum.csv'}")
    return EXIT_OK


def _load_cloud(cfg: RunConfig, path: Path) -> SpectrumCloud:
    try:
        cloud = SpectrumCloud.from_csv_text(path.read_text(), cfg.h, cfg.eps, cfg.delta, cfg.lam)
    except (ValueError, KeyError, TypeError) as exc:
        raise CommandError(f"cannot parse spectrum {path}: {exc}", EXIT_FIT) from exc
    side = path.with_suffix(".json")
    if side.exists():
        cloud.provenance = read_json(side).get("spectrum", {}).get("provenance", {})
    return cloud


def cmd_fit(args) -> int:
    cfg = _config(args)
    path = Path(args.spectrum)
    cloud = _load_cloud(cfg, path)
    covering = cfg.build_covering()
    try:
        charts = fit_covering(cloud, covering, cfg.settings())
    except PseudoLatticeError as exc:
        raise CommandError(f"fit failed: {exc}", EXIT_FIT) from exc
    out = _out(cfg)
    rows = ["open,anchor_E,anchor_G,points,residual,relative_residual"]
    all_micro = []
    for ident, pc in charts.items():
        write_json(out / f"chart_{ident}.json", {"seed": cfg.seed, "chart": pc.to_dict()})
        for mc in pc.micro_charts:
            a = mc.rectangle.anchor
            rows.append(f"{ident},{a[0]!r},{a[1]!r},{len(mc.labels)},{mc.residual!r},{mc.relative_residual!r}")
        all_micro.extend(pc.micro_charts)
    atomic_write_text(out / "residuals.csv", "\n".join(rows) + "\n")
    if not args.no_plot:
        write_overlay(out / "overlay.svg", cloud, all_micro, title=f"seed {cfg.seed}")
    worst = max(mc.residual for mc in all_micro)
    print(f"fitted {len(charts)} pseudo-charts from {len(all_micro)} rectangles; max residual {worst:.3g}")
    return EXIT_OK


def cmd_holonomy(args) -> int:
    cfg = _config(args)
    covering = cfg.build_covering()
    charts = {}
    for p in args.charts:
        try:
            pc = PseudoChart.from_dict(read_json(p)["chart"])
        except (ValueError, KeyError, TypeError, OSError) as exc:
            raise CommandError(f"cannot read pseudo-chart {p}: {exc}", EXIT_COCYCLE) from exc
        charts[pc.name] = pc
    try:
        cocycle = build_cocycle(charts, covering, cfg.samples)
        hol = holonomy(cocycle, cfg.loop) if cfg.loop else None
    except PseudoLatticeError as exc:
        raise CommandError(f"{type(exc).__name__}: {exc}", EXIT_COCYCLE) from exc
    report = {"seed": cfg.seed, "cocycle": cocycle.to_dict(), "holonomy": None if hol is None else hol.to_dict()}
    path = Path(args.output) if args.output else _out(cfg) / "spectral.json"
    write_json(path, report)
    print(f"spectral holonomy {None if hol is None else hol.representative}")
    return EXIT_OK


def cmd_classical(args) -> int:
    cfg = _config(args)
    model = cfg.build_model()
    c = cfg.classical
    loop = circle_loop(c.center, c.radius, c.points, c.start_angle)
    try:
        hol = classical_holonomy(model, loop, c.chart_radius)
    except PseudoLatticeError as exc:
        raise CommandError(f"{type(exc).__name__}: {exc}", EXIT_COCYCLE) from exc
    rep = hol.to_dict()
    rep["loop"] = {"center": list(c.center), "radius": c.radius, "points": c.points, "chart_radius": c.chart_radius}
    path = Path(args.output) if args.output else _out(cfg) / "classical.json"
    write_json(path, {"seed": cfg.seed, "holonomy": rep})
    print(f"classical holonomy {hol.representative}")
    return EXIT_OK


def _read_class(path) -> gl2z.HolonomyClass:
    try:
        data = read_json(path)["holonomy"]
        return gl2z.HolonomyClass(tuple(tuple(r) for r in data["representative"]))
    except (ValueError, KeyError, TypeError, OSError) as exc:
        raise CommandError(f"invalid holonomy report {path}: {exc}", EXIT_COMPARE) from exc


def cmd_compare(args) -> int:
    spectral = _read_class(args.spectral)
    classical = _read_class(args.classical)
    verdict = adjoint_compare(spectral, classical, args.bound)
    result = {
        "spectral": spectral.to_dict(),
        "classical": classical.to_dict(),
        "adjoint": verdict,
        "target": [list(r) for r in gl2z.transpose(gl2z.inverse(classical.representative))],
    }
    if args.output:
        write_json(args.output, result)
    print(f"adjoint relation {'holds' if verdict else 'fails'}")
    return EXIT_OK if verdict else EXIT_COMPARE


def cmd_diophantine_measure(args) -> int:
    cfg = _config(args)
    m = cfg.measure
    samples = args.samples or m.samples
    rows = []
    for alpha in m.alphas:
        bf = bad_fraction(cfg.measure_box(), DiophantineParams(alpha, cfg.d, cfg.k_max), samples, seed=cfg.seed)
        rows.append({"alpha": alpha, "fraction": bf.fraction, "stderr": bf.stderr, "samples": bf.samples})
        print(f"alpha={alpha:g} bad_fraction={bf.fraction:.4f} +- {bf.stderr:.4f}")
    ratios = [b["fraction"] / a["fraction"] if a["fraction"] else float("nan") for a, b in zip(rows, rows[1:])]
    write_json(_out(cfg) / "diophantine.json", {"seed": cfg.seed, "box": list(m.box), "results": rows, "ratios": ratios})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudolattice", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="override output_dir")
        sp.add_argument("--seed", type=int, help="override seed")
        return sp

    g = with_config(sub.add_parser("generate", help="synthesize a joint spectrum over the covering"))
    g.add_argument("--h", type=float)
    g.add_argument("--eps", type=float)
    g.set_defaults(func=cmd_generate)

    f = with_config(sub.add_parser("fit", help="fit pseudo-charts to a spectrum CSV"))
    f.add_argument("spectrum")
    f.add_argument("--no-plot", action="store_true")
    f.set_defaults(func=cmd_fit)

    h = with_config(sub.add_parser("holonomy", help="transition cocycle and loop holonomy"))
    h.add_argument("charts", nargs="+")
    h.add_argument("-o", "--output")
    h.set_defaults(func=cmd_holonomy)

    c = with_config(sub.add_parser("classical", help="classical holonomy by action-chart continuation"))
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_classical)

    k = sub.add_parser("compare", help="adjoint comparison of spectral and classical classes")
    k.add_argument("spectral")
    k.add_argument("classical")
    k.add_argument("--bound", type=int, default=5)
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_compare)

    d = with_config(sub.add_parser("diophantine-measure", help="Monte-Carlo measure of non-Diophantine frequencies"))
    d.add_argument("--samples", type=int)
    d.set_defaults(func=cmd_diophantine_measure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except RegimeViolation as exc:
        print(f"error: regime violation: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
