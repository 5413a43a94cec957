"""Command-line entry point: construct, gen-data, train, verify, sweep.

Exit status is 1 when a hard check fails, 2 on usage errors, 0 otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .channel import ebn0_to_sigma2
from .errors import InvalidState
from .experiments import (PROFILES, ExperimentConfig, hard_failures, run_construct, run_sweep,
                          run_train, run_verify, train_checks, write_checks, RunManifest, tomllib)
from .polar import construct_code
from .posterior import generate_dataset


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = tomllib.loads(f"v = {value}")["v"]
    return out


def load_config(args) -> ExperimentConfig:
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config:
        return ExperimentConfig.from_file(args.config, args.profile, **overrides)
    if "master_seed" not in overrides:
        raise ValueError("a master seed is required (--seed or master_seed in --config)")
    return ExperimentConfig.from_profile(args.profile or "desk", **overrides)


def _report(checks) -> int:
    for c in checks:
        tag = "PASS" if c.passed else ("FAIL" if c.hard else "WARN")
        print(f"{tag}  {c.name}: {c.detail}")
    failed = hard_failures(checks)
    print(f"{len(checks) - len(failed)}/{len(checks)} checks ok, {len(failed)} hard failures")
    return 1 if failed else 0


def cmd_construct(args) -> int:
    cfg = load_config(args)
    path = run_construct(cfg)
    print(path)
    return 0


def cmd_gen_data(args) -> int:
    rate = args.k / 2 ** args.n
    sigma2 = ebn0_to_sigma2(args.ebn0, rate)
    code, _ = construct_code(args.n, args.k, sigma2)
    ds = generate_dataset(code, sigma2, args.count, args.bit, args.seed, mode=args.prefix_mode)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.save_csv(out)
    print(out)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args)
    results = run_train(cfg)
    for r in results:
        if r["status"] == "ok":
            print(f"bit {r['bit']:2d}  B={r['B']:6d}  mse {r['mse0']:.4g} -> {r['mse']:.4g}  "
                  f"val {r['val_mse']:.4g}  drift {r['drift']:.4g}")
        else:
            print(f"bit {r['bit']:2d}  B={r['B']:6d}  DIVERGED at epoch {r['epoch']}")
    checks = train_checks(results)
    out = Path(cfg.out_dir)
    write_checks(out / "checks_train.csv", checks)
    man = RunManifest(out)
    man.add_file(out / "checks_train.csv")
    man.save()
    return _report(checks)


def cmd_verify(args) -> int:
    cfg = load_config(args)
    _, checks = run_verify(cfg, width=args.width)
    return _report(checks)


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    _, checks = run_sweep(cfg)
    return _report(checks)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onnpolar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat TOML config file")
        sp.add_argument("--profile", choices=sorted(PROFILES), default=None,
                        help="base profile for keys missing from --config (default desk)")
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (TOML value syntax); repeatable")

    sp = sub.add_parser("construct", help="GA construction CSV")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("gen-data", help="labeled dataset CSV for one bit-channel")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--ebn0", type=float, required=True, help="Eb/N0 in dB")
    sp.add_argument("--bit", type=int, required=True, help="1-based message bit index")
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--prefix-mode", choices=("literal", "bipolar"), default="literal")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train every (bit, width) model")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("verify", help="bound report and decomposition checks")
    common(sp)
    sp.add_argument("--width", type=int, default=None, help="bank width (default widest)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="BER/BLER grid over modes, widths and Eb/N0")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, InvalidState, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
