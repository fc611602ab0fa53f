"""``morrey-nls`` command line.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .errors import ConfigurationError, MorreyError, NumericalFailure, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("morrey_nls")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_run(args) -> int:
    from .config import load_config
    from .experiments import run_experiment
    cfg = load_config(args.config)
    report, out = run_experiment(cfg, args.output_dir)
    failed = [c.name for c in report.checks if not c.passed]
    print(json.dumps({"kind": cfg.kind, "output_dir": str(out), "all_passed": report.passed,
                      "failed_checks": failed}))
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .config import load_config
    cfg = load_config(args.config)
    print(json.dumps({"valid": True, "kind": cfg.kind, "d": cfg.d, "alpha": str(cfg.alpha),
                      "r": None if cfg.r is None else str(cfg.r), "config_hash": cfg.hash()}))
    return EXIT_OK


def _cmd_norms(args) -> int:
    from .io import dumps, read_field
    from .spaces import MorreySpec, hat_morrey_norm_report, morrey_norm_report
    f = read_field(args.field)
    spec = MorreySpec(args.p, args.q, args.r, hat=args.hat)
    rep = (hat_morrey_norm_report if args.hat else morrey_norm_report)(f, spec)
    print(dumps(rep.to_json()))
    return EXIT_OK


def _cmd_ground_state(args) -> int:
    from .io import dumps, write_field
    from .stationary import energy, ground_state, mass, pohozaev_check
    gs = ground_state(args.d, args.alpha, n=args.n, extent=args.extent)
    doc = {"d": args.d, "alpha": args.alpha, "method": gs.method, "residual_linf": gs.residual_Linf,
           "peak": gs.peak, "pohozaev": list(pohozaev_check(gs, args.alpha)),
           "mass": mass(gs.field), "energy": energy(gs.field, args.alpha)}
    if args.out:
        doc["field"] = str(write_field(args.out, gs.field))
    print(dumps(doc))
    return EXIT_OK


def _cmd_decompose(args) -> int:
    from .io import dumps, read_field, write_field, write_json
    from .profiles import profile_decompose
    from .spaces import MorreySpec, default_state_space
    src = Path(args.directory)
    files = sorted(src.glob("*.gfld"))
    if len(files) < 2:
        raise ConfigurationError(f"{src}: need at least two .gfld files, found {len(files)}")
    us = [read_field(p) for p in files]
    d = us[0].dim
    spec = MorreySpec.state_space(d, args.alpha, args.r) if args.r else default_state_space(d, args.alpha)
    dec = profile_decompose(us, args.eps, spec, strichartz=not args.no_strichartz)
    out = Path(args.output_dir) if args.output_dir else src / "decomposition"
    out.mkdir(parents=True, exist_ok=True)
    doc = dec.to_json()
    doc["inputs"] = [p.name for p in files]
    doc["profile_files"] = [str(write_field(out / f"profile_{i:02d}.gfld", tr.profile).name)
                            for i, tr in enumerate(dec.profiles)]
    write_json(out / "decomposition.json", doc)
    print(dumps({"profiles": len(dec), "decoupling_residual": dec.decoupling_residual,
                 "output_dir": str(out)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="morrey-nls", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None, help="override output_dir from the config")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("norms", help="Morrey or hat-Morrey norm of a GFLD1 field")
    p.add_argument("field")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--hat", action="store_true")
    p.set_defaults(fn=_cmd_norms)

    p = sub.add_parser("ground-state", help="solve for the ground state")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--extent", type=float, default=16 * math.pi)
    p.add_argument("--out", default=None, help="write the field as GFLD1")
    p.set_defaults(fn=_cmd_ground_state)

    p = sub.add_parser("decompose", help="profile decomposition of a directory of .gfld fields")
    p.add_argument("directory")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--no-strichartz", action="store_true", help="skip the remainder Strichartz norm")
    p.set_defaults(fn=_cmd_decompose)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"morrey-nls: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"morrey-nls: cannot read or write: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"morrey-nls: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MorreyError as exc:
        print(f"morrey-nls: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
