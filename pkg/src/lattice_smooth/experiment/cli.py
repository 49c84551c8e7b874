"""``lattice-smooth`` command line.

Exit codes: 0 success, 1 usage or validation error, 2 a study verdict of FAIL.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import LatticeSmoothError
from . import studies
from .config import load_config

EXIT_OK, EXIT_INVALID, EXIT_FAIL = 0, 1, 2

COMMANDS = {
    "simulate": (studies.run_simulate, "draw one error field per n and compare moments with theory"),
    "estimate": (studies.run_estimate, "one replication per n with the covering decomposition"),
    "bias": (studies.run_bias_study, "deterministic bias bound over a Lipschitz battery"),
    "variance": (studies.run_variance_study, "second-moment oracle and Monte Carlo variance slope"),
    "rates": (studies.run_rate_study, "Monte Carlo sup-norm rate and slope verdict"),
    "conditions": (studies.run_conditions, "dependence condition checkers for the configured field"),
    "orlicz": (studies.run_orlicz, "Orlicz norms and quantile-integral coefficients"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lattice-smooth", description="Simulation studies and checkers for lattice kernel smoothing.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="PATH", help="output base path; writes PATH.csv and PATH.json")
        p.add_argument("--seed", type=_u64, metavar="U64", help="master seed, overrides the config")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return parser


def _outputs(args, config):
    if args.out:
        base = Path(args.out)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        return base.with_name(base.name + ".csv"), base.with_name(base.name + ".json")
    csv_path = config.output.get("csv")
    json_path = config.output.get("json")
    return (Path(csv_path) if csv_path else None), (Path(json_path) if json_path else None)


def _summary(name, payload) -> str:
    verdict = payload.get("verdict")
    if name == "rates":
        slope = payload.get("slope")
        s = "n/a" if slope is None else f"{slope:.4f}"
        return f"rates: slope {s} vs {payload['theoretical_slope']:.4f} +- {payload['tolerance']}: {verdict}"
    if name == "variance":
        slope = payload.get("slope")
        s = "n/a" if slope is None else f"{slope:.4f}"
        return f"variance: slope {s} vs {payload['theoretical_slope']}: {verdict}"
    if name == "bias":
        return f"bias: max |bias|/h = {payload['max_ratio']:.6g} (B = {payload['B']}): {verdict}"
    if name == "conditions":
        return "\n".join(f"{r['condition']}: {r['verdict']} value={r['value']!r}" for r in payload["reports"])
    if name == "orlicz":
        return "\n".join(f"{k}: {v!r}" for k, v in payload["results"].items())
    return f"{name}: {len(payload.get('rows', payload.get('fields', [])))} lattice sizes"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        report, rows = fn(config)
        payload = report.to_dict() if hasattr(report, "to_dict") else report
        payload = {"command": args.command, "seed": config.seed, **payload}
        csv_path, json_path = _outputs(args, config)
        if csv_path:
            studies.write_csv(csv_path, rows)
        if json_path:
            studies.write_json(json_path, payload)
    except (LatticeSmoothError, OSError) as exc:
        print(f"lattice-smooth {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not args.quiet:
        print(_summary(args.command, payload))
    return EXIT_FAIL if payload.get("verdict") == "FAIL" else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
