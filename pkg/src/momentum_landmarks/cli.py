"""Command-line driver.

Subcommands::

    match REF TARGET        initial momentum taking REF to TARGET
    exp TEMPLATE MOMENTUM   deform TEMPLATE along MOMENTUM
    average MANIFEST        group average with equal or robust weights
    detect CONTROL CASE     two-group landmark detection
    synth                   ellipse/heart groups with outliers

Exit codes: 0 success, 1 usage or I/O error, 2 numerical non-convergence,
3 statistical-fit failure.  Every JSON output embeds the effective run
configuration, including defaults and the seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path


from .averaging import WeightScheme, group_average
from .errors import (
    AveragingError,
    ContourError,
    ConversionError,
    DivergenceError,
    FitError,
    IngestionError,
    KernelError,
    ShootingError,
)
from .geodesic import LandmarkTemplate, MomentumField, exp_map
from .io import read_group, read_templates, synth_group, write_group, write_templates
from .kernel import KernelSpec
from .shooting import ShootingOptions, log_map
from .stats import MCMCOptions, StatOptions, detect

log = logging.getLogger("momentum_landmarks")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_FIT = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    inputs: list
    kernel: dict
    weights: str | None
    shooting: dict
    mcmc: dict | None
    seed: int
    threshold: float | None
    max_iter: int
    threads: int | None
    out: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_common(p, *, max_iter_help):
    p.add_argument("--kernel-a", type=float, default=1.0, help="kernel length scale (default 1)")
    p.add_argument("--kernel-b", type=float, default=1.5, help="kernel order b >= 1 (default 1.5)")
    p.add_argument("--tol", type=float, default=None,
                   help="shooting miss-fit tolerance (default scales with template size)")
    p.add_argument("--max-iter", type=_positive_int, default=None, help=max_iter_help)
    p.add_argument("--steps", type=_positive_int, default=20, help="RK4 steps on [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=None, help="worker cap")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="momentum-landmarks", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("match", help="log map between two templates")
    p.add_argument("reference")
    p.add_argument("target")
    _add_common(p, max_iter_help="shooting iterations (default 500)")

    p = sub.add_parser("exp", help="exp map of a template along a momentum")
    p.add_argument("template")
    p.add_argument("momentum")
    _add_common(p, max_iter_help="unused")

    p = sub.add_parser("average", help="group average")
    p.add_argument("manifest")
    p.add_argument("--weights", choices=("equal", "robust"), default="equal")
    _add_common(p, max_iter_help="outer averaging iterations (default 100)")

    p = sub.add_parser("detect", help="compare a case group with a control group")
    p.add_argument("control")
    p.add_argument("case")
    p.add_argument("--weights", choices=("equal", "robust"), default="equal")
    p.add_argument("--chains", type=_positive_int, default=4)
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--draws", type=_positive_int, default=20000)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--positions", action="store_true",
                   help="model raw landmark positions instead of momenta")
    _add_common(p, max_iter_help="outer averaging iterations (default 100)")

    p = sub.add_parser("synth", help="write an ellipse/heart group")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--m", type=_positive_int, default=20)
    p.add_argument("--landmarks", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    return parser


def _kernel(args):
    return KernelSpec(a=args.kernel_a, b=args.kernel_b)


def _shooting(args):
    kw = {"tol": args.tol, "steps": args.steps}
    if args.command == "match" and args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    return ShootingOptions(**kw)


def _config(args, inputs, **kw):
    cfg = RunConfig(
        command=args.command,
        inputs=[str(p) for p in inputs],
        kernel=_kernel(args).to_dict(),
        weights=getattr(args, "weights", None),
        shooting=_shooting(args).to_dict(),
        mcmc=kw.pop("mcmc", None),
        seed=args.seed,
        threshold=getattr(args, "threshold", None),
        max_iter=args.max_iter if args.max_iter is not None else 100,
        threads=args.threads,
        out=str(args.out),
        extra=kw,
    )
    return cfg.to_dict()


def _single(path):
    templates = read_templates(path)
    if len(templates) != 1:
        raise IngestionError(f"expected exactly one template, found {len(templates)}", path=path)
    return templates[0]


def _dump(path, payload):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_match(args) -> int:
    ref, target = _single(args.reference), _single(args.target)
    spec, opts = _kernel(args), _shooting(args)
    res = log_map(ref, target, spec, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_templates([LandmarkTemplate(res.momentum.momenta, label="momentum")], out / "momentum.csv")
    _dump(out / "match.json", {
        "config": _config(args, [args.reference, args.target]),
        "result": {**res.to_dict(), "distance": res.distance},
    })
    print(f"iterations {res.iterations}  miss-fit {res.final_missfit:.3e}  "
          f"distance {res.distance:.6g}  converged {res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_exp(args) -> int:
    template = _single(args.template)
    momentum = _single(args.momentum)
    if momentum.points.shape != template.points.shape:
        raise IngestionError("momentum and template landmark counts differ", path=args.momentum)
    spec = _kernel(args)
    end = exp_map(template, MomentumField(momentum.points, template), spec, args.steps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_templates([LandmarkTemplate(end.points, label="deformed")], out / "deformed.csv")
    _dump(out / "exp.json", {"config": _config(args, [args.template, args.momentum])})
    print(f"wrote {out / 'deformed.csv'}")
    return EXIT_OK


def cmd_average(args) -> int:
    group = read_group(args.manifest)
    spec = _kernel(args)
    res = group_average(group, WeightScheme(args.weights), spec, _shooting(args),
                        max_iter=args.max_iter or 100, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_templates([LandmarkTemplate(res.average.points, label="average")], out / "average.csv")
    write_templates(
        [LandmarkTemplate(mf.momenta, label=t.label or f"member-{i + 1:03d}")
         for i, (mf, t) in enumerate(zip(res.residual_momenta, group))],
        out / "residual_momenta.csv",
    )
    _dump(out / "average.json", {
        "config": _config(args, [args.manifest]),
        "result": {
            "converged": res.converged,
            "iterations": res.iterations,
            "objective_history": [float(v) for v in res.objective_history],
            "mean_momentum_norms": [float(v) for v in res.mean_momentum_norms],
            "weights": [float(v) for v in res.weights],
            "distances": [float(v) for v in res.distances],
        },
    })
    print(f"iterations {res.iterations}  objective {res.objective_history[-1]:.6g}  "
          f"converged {res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_detect(args) -> int:
    controls, cases = read_group(args.control), read_group(args.case)
    mcmc = MCMCOptions(chains=args.chains, burn_in=args.burn_in, draws=args.draws)
    stat_opts = StatOptions(mcmc=mcmc, threshold=args.threshold,
                            source="position" if args.positions else "momentum")
    report = detect(controls, cases, _kernel(args), WeightScheme(args.weights), stat_opts,
                    args.seed, shooting=_shooting(args), max_iter=args.max_iter or 100,
                    threads=args.threads)
    report.settings["run_config"] = _config(args, [args.control, args.case], mcmc=mcmc.to_dict(),
                                            positions=args.positions)
    paths = report.write(args.out)
    print(report.table())
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK if report.averaging["converged"] else EXIT_NONCONVERGED


def cmd_synth(args) -> int:
    group = synth_group(args.alpha, args.m, args.landmarks, seed=args.seed)
    out = Path(args.out)
    manifest = write_group(group, out / "group.json", name=f"synth-alpha{args.alpha:g}")
    config = {"command": "synth", "alpha": args.alpha, "m": args.m,
              "landmarks": args.landmarks, "seed": args.seed, "out": str(out)}
    _dump(out / "synth.json", {"config": config, "manifest": manifest.to_dict()})
    print(f"wrote {len(group)} templates to {out}")
    return EXIT_OK


COMMANDS = {
    "match": cmd_match,
    "exp": cmd_exp,
    "average": cmd_average,
    "detect": cmd_detect,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FitError, ContourError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (AveragingError, ShootingError, ConversionError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (IngestionError, KernelError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
