"""Command line front end for the sweep scenarios.

Exit codes: 0 on success, 2 on configuration errors, 3 when the run
finished but some grid points failed.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import warnings

from .config import ConfigError, PRESETS, load_preset, parse_config_text
from .sweeps import export_dataset, run_scenario

_SCENARIO_OF = {
    "equilibrium": "equilibrium",
    "map": "map",
    "resonance": "resonance",
    "scaling": "scaling",
    "kink": "kink",
}


def _add_common(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="built-in parameter set used as the base config")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--workers", type=int, default=1,
                     help="process pool size for independent row tasks")
    sub.add_argument("--format", default="csv", choices=("csv", "json"),
                     dest="fmt", help="table file format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitychain",
        description="Cavity-cooled ion chain simulator: equilibria, modes, "
                    "steady-state fluctuations, and sweep scenarios.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("equilibrium", "track the equilibrium branch over a sweep"),
            ("map", "mean phonon occupation over a (detuning, pump) grid"),
            ("resonance", "sweep with analytic-rate overlay, resonance "
                          "search, and output spectrum"),
            ("scaling", "chain-size scaling of cooling performance"),
            ("kink", "kink spectroscopy: pump branch plus detuning scan"),
    ):
        _add_common(subs.add_parser(name, help=help_text))
    val = subs.add_parser("validate-config", help="parse a config and report")
    val.add_argument("--config", required=True)
    val.add_argument("--preset", choices=sorted(PRESETS))
    return parser


def _load_config(args, scenario=None):
    overrides = {}
    if scenario is not None:
        overrides["scenario"] = scenario
    if args.config is not None:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}")
        if args.preset is not None:
            base = PRESETS[args.preset]
            text = base + "\n" + text
        return parse_config_text(text, overrides)
    if args.preset is not None:
        return load_preset(args.preset, overrides)
    raise ConfigError("either --config or --preset is required")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            cfg = _load_config(args)
            print(f"ok: scenario={cfg.scenario} hash={cfg.config_hash()}")
            return 0
        cfg = _load_config(args, scenario=_SCENARIO_OF[args.command])
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    cache_dir = os.path.join(args.out, ".cache")
    # a sweep can repeat the same physics warning at every grid point;
    # collect and report each distinct message once with a count
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ds = run_scenario(cfg, workers=args.workers, cache_dir=cache_dir)
    groups: dict[str, int] = {}
    for w in caught:
        key = re.sub(r"[0-9][0-9.e+-]*", "#", str(w.message))
        groups[key] = groups.get(key, 0) + 1
    for key in sorted(groups):
        print(f"warning ({groups[key]} points): {key}", file=sys.stderr)
    paths = export_dataset(ds, args.out, fmt=args.fmt)
    for p in paths:
        print(p)
    n_failed = ds.metadata.get("n_failed", 0)
    if n_failed:
        print(f"partial failure: {n_failed} grid points did not converge",
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
