#! /usr/bin/python
import argparse
import json
import logging
import sys
import time
from typing import NoReturn, Optional

from py9audit.config import (
    CONFIG_KEYS,
    MODES,
    config_from_mapping,
    load_config,
    parse_override,
)
from py9audit.core import ConfigError, format_duration
from py9audit.default_mechanisms import MECHANISMS
from py9audit.harness import (
    emit_loss_profile,
    list_mechanisms,
    mse_to_csv,
    run_audit,
    run_cdf,
    run_data_centric,
    run_mse,
)

logger = logging.getLogger("py9audit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _flag_keys() -> list[str]:
    keys = [k for k in CONFIG_KEYS if k not in ("mechanism", "mode")]
    for cls, fixed in MECHANISMS.values():
        keys += [k for k in cls.PARAMS if k not in fixed and k not in keys]
    return ["mechanism"] + keys


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run_py9a.py",
        description="Black-box auditing of differential privacy claims.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="debug logging"
    )

    verbs = parser.add_subparsers(dest="verb", required=True)

    for mode in MODES:
        sub = verbs.add_parser(mode, help=f"run a {mode} experiment")
        sub.add_argument(
            "config", nargs="?", help="JSON or YAML config file"
        )
        for key in _flag_keys():
            sub.add_argument(
                f"--{key}",
                dest=f"opt_{key}",
                metavar="VALUE",
                help=f"overrides the config's {key!r}",
            )

    mech = verbs.add_parser("mechanisms", help="inspect the mechanism zoo")
    mech.add_argument("action", choices=["list"])

    return parser


def _print_catalog() -> None:
    for entry in list_mechanisms():
        print(f"{entry['name']} ({entry['class']}, {entry['space']} output)")
        for key, (typ, desc) in entry["params"].items():
            print(f"    {key}: ({typ}, {desc})")
        defaults = json.dumps(entry["defaults"], default=list)
        print(f"    defaults: {defaults}")


def _run(args: argparse.Namespace) -> None:
    overrides = {
        key: parse_override(getattr(args, f"opt_{key}"))
        for key in _flag_keys()
        if getattr(args, f"opt_{key}") is not None
    }
    overrides["mode"] = args.verb

    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = config_from_mapping({}, overrides)

    t0 = time.perf_counter()

    if cfg.mode == "audit":
        report = run_audit(cfg)
        if not cfg.out:
            print(report.to_json(runtime=cfg.record_runtime))

    elif cfg.mode in ("cdf", "data-centric"):
        run = run_cdf if cfg.mode == "cdf" else run_data_centric
        table = run(cfg)
        med, mad = table.median_mad()
        logger.info(
            "LB median %.4f (MAD %.4f), P(LB <= epsilon0) = %s",
            med,
            mad,
            "n/a"
            if table.epsilon0 is None
            else f"{table.cdf_at(table.epsilon0):.3f}",
        )
        if not cfg.out:
            sys.stdout.write(table.to_csv())

    elif cfg.mode == "mse":
        rows = run_mse(cfg)
        if not cfg.out:
            sys.stdout.write(mse_to_csv(rows))

    else:
        emit_loss_profile(cfg, None if cfg.out else sys.stdout)

    logger.info(
        "%s finished in %s",
        cfg.mode,
        format_duration(time.perf_counter() - t0).strip(),
    )


def main(argv: Optional[list[str]] = None) -> NoReturn:
    args = make_parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    if args.verb == "mechanisms":
        _print_catalog()
        sys.exit(EXIT_OK)

    try:
        _run(args)
    except ConfigError as e:
        logger.error("invalid config: %s", e)
        sys.exit(EXIT_CONFIG)
    except Exception:
        logger.exception("%s run failed", args.verb)
        sys.exit(EXIT_RUNTIME)

    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
