"""Command-line interface: ``mmsdme {sweep,accountant,quantize,dpsgd,encode,decode}``.

Every subcommand reads settings from an optional ``--config`` file (flat
``key = value``, see :mod:`mmsdme.config`), then applies ``--set key=value``
overrides, then the dedicated flags ``--seed`` and ``--trials``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import accountant, binary, experiments, l2, linf, montecarlo, quantizer, rr, shuffle, wire
from .binary import BinaryConfig
from .config import as_list, load_config, parse_value
from .exceptions import MechanismError
from .l2 import L2Config
from .linf import LinfBundle, LinfConfig


# --------------------------------------------------------------------------- settings

def collect_settings(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise MechanismError(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = parse_value(val)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    return cfg


def _pick(settings: dict, cls) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(settings) - names)
    if unknown:
        raise MechanismError(f"unknown setting(s) for {cls.__name__}: {', '.join(unknown)}")
    return dict(settings)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _get(settings, key, default=None, conv=None):
    val = settings.get(key, default)
    if val is None:
        return None
    return conv(val) if conv else val


def build_mechanism(settings: dict):
    """Mechanism configuration from settings (shared by accountant/encode/decode)."""
    mech = settings.get("mechanism", "linf")
    mode = linf.check_mode(settings.get("mode", "ldp"))
    n = int(settings.get("n", 1))
    d = int(settings.get("d", 1))
    s = int(settings.get("s", 1))
    m = int(settings.get("m", 1))
    eps = _get(settings, "eps", None, float)
    delta = _get(settings, "delta", None, float)
    v = _get(settings, "v", None, float)
    radius = float(settings.get("radius", 1.0))
    if mech == "binary":
        p = _get(settings, "p", None, float)
        if p is None:
            if v is None:
                if mode == "ldp":
                    v = eps / s
                else:
                    v = binary.mms_budget(n, s, eps, delta)
            p = rr.require_nondegenerate(rr.flip_prob_for_budget(v))
        return BinaryConfig(d, n, s, p, mode)
    if v is None:
        v = eps if mode == "ldp" else linf.mms_budget_for_linf(n, s, eps, delta, strict=False)
    if mech == "linf":
        return LinfConfig(d, n, m, s, v, radius, mode)
    if mech == "l2":
        return L2Config(d, n, m, s, v, radius, float(settings.get("beta", 0.01)),
                        int(settings.get("rotation_seed", 0)), mode)
    raise MechanismError(f"unknown mechanism {mech!r}")


# --------------------------------------------------------------------------- subcommands

def cmd_sweep(args, settings) -> int:
    spec = experiments.SweepSpec(**_pick(settings, experiments.SweepSpec))
    reports = experiments.run_sweep(spec, threads=args.threads)
    _emit(experiments.reports_to_csv(reports), args.out)
    failed = [r for r in reports if r.error]
    for r in failed:
        print(f"row error (n={r.n} d={r.d} s={r.s} m={r.m} eps={r.eps}): {r.error}", file=sys.stderr)
    return 0


def cmd_accountant(args, settings) -> int:
    cfg = build_mechanism(settings)
    mode = cfg.mode
    target = float(settings["eps"])
    rep = accountant.certify(cfg, mode, target, _get(settings, "delta", None, float),
                             settings.get("variant", accountant.GIRGIS),
                             float(settings.get("feldman_c", accountant.FELDMAN_C)),
                             raise_on_failure=False)
    print(rep.render())
    csv_text = rep.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        print(csv_text, end="")
    return 0 if rep.passed else 1


def cmd_quantize(args, settings) -> int:
    ms = [int(x) for x in as_list(settings.get("m", 1))]
    ds = [int(x) for x in as_list(settings.get("d", 1))]
    trials = int(settings.get("trials", 10000))
    seed = int(settings.get("seed", 0))
    z_fixed = settings.get("z")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "m", "trials", "empirical_mse", "bound", "exact_variance"])
    for i, (d, m) in enumerate((d, m) for d in ds for m in ms):
        if z_fixed is None:
            z = montecarlo.substream(seed, i, 0).random(d)
        else:
            z = np.resize(np.asarray(as_list(z_fixed), dtype=float), d)

        def fn(batch, rng, z=z, m=m, d=d):
            dec = quantizer.decompose(np.broadcast_to(z, (batch, d)), m, rng)
            return quantizer.reconstruct(dec)

        res = montecarlo.run_trials(fn, z, trials, seed, montecarlo.block_size(d * m), (i, 1), args.threads)
        w.writerow([d, m, trials, repr(res.mse), repr(quantizer.quantizer_mse_bound(d, m)),
                    repr(float(quantizer.quantizer_variance(z, m).sum()))])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_dpsgd(args, settings) -> int:
    private = bool(settings.pop("private", True))
    settings.pop("trials", None)
    spec = experiments.SgdSpec(**_pick(settings, experiments.SgdSpec))
    trace, priv = experiments.run_toy_dpsgd(spec, private=private)
    print(f"per-round eps~={priv.eps_tilde!r} q={priv.q!r} delta'={priv.delta_round!r} v={priv.v!r}",
          file=sys.stderr)
    print(f"eps_t={priv.eps_step!r}  final eps={priv.eps_total!r} at delta={priv.delta_total!r}",
          file=sys.stderr)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "loss"])
    for t, val in enumerate(trace):
        w.writerow([t, repr(float(val))])
    _emit(buf.getvalue(), args.out)
    return 0


def _client_inputs(settings, cfg, rng):
    path = settings.get("input")
    if path:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
        return X.astype(np.uint8) if isinstance(cfg, BinaryConfig) else X
    mech = "binary" if isinstance(cfg, BinaryConfig) else ("l2" if isinstance(cfg, L2Config) else "linf")
    radius = cfg.r2 if isinstance(cfg, L2Config) else getattr(cfg, "r_inf", 1.0)
    return experiments.make_inputs(mech, cfg.n, cfg.d, radius, "uniform", rng)


def cmd_encode(args, settings) -> int:
    if not args.out:
        raise MechanismError("encode needs --out for the binary transcript")
    cfg = build_mechanism(settings)
    seed = int(settings.get("seed", 0))
    X = _client_inputs(settings, cfg, montecarlo.substream(seed, 0))
    rng = montecarlo.substream(seed, 1)
    if isinstance(cfg, BinaryConfig):
        bundles = [binary.randomize_binary(x, cfg.plan, cfg.p, rng) for x in X]
    elif isinstance(cfg, L2Config):
        alloc = cfg.allocation()
        bundles = [b for x in X for b in l2.randomize_l2(x, cfg, alloc, rng).per_level]
    else:
        alloc = cfg.allocation()
        bundles = [b for x in X for b in linf.randomize_linf(x, cfg, alloc, rng).per_level]
    blob = wire.encode_bundles(bundles)
    Path(args.out).write_bytes(blob)
    print(f"wrote {len(bundles)} bundles, {len(blob)} bytes for {len(X)} clients", file=sys.stderr)
    return 0


def _group_clients(bundles):
    """Split a concatenated transcript into per-client groups (a new client starts at level <= 1)."""
    groups = []
    for b in bundles:
        if b.level <= 1 or not groups:
            groups.append([b])
        else:
            groups[-1].append(b)
    return groups


def cmd_decode(args, settings) -> int:
    data = Path(args.input).read_bytes()
    bundles = wire.decode_bundles(data)
    groups = _group_clients(bundles)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["client", "level", "block", "coord", "bit", "p"])
    for i, group in enumerate(groups):
        for b in group:
            for j, (c, bit) in enumerate(zip(b.coords, b.bits)):
                w.writerow([i, b.level, j, int(c), int(bit), repr(b.p)])
    _emit(buf.getvalue(), args.out)
    mech = settings.get("mechanism")
    if mech:
        settings = dict(settings, n=len(groups))
        cfg = build_mechanism(settings)
        if isinstance(cfg, BinaryConfig):
            est = binary.analyze_binary([g[0] for g in groups])
        else:
            clients = [LinfBundle(g) for g in groups]
            alloc = cfg.allocation()
            if isinstance(cfg, L2Config):
                est = l2.analyze_l2(clients, cfg, alloc)
            else:
                est = linf.analyze_linf(clients, cfg, alloc)
        print("estimate: " + " ".join(repr(float(x)) for x in np.asarray(getattr(est, "values", est))), file=sys.stderr)
    return 0


COMMANDS = {
    "sweep": (cmd_sweep, "Monte-Carlo MSE sweep; writes one CSV row per grid point"),
    "accountant": (cmd_accountant, "certify a configuration against a privacy target"),
    "quantize": (cmd_quantize, "empirical quantizer MSE versus the d/4^m bound"),
    "dpsgd": (cmd_dpsgd, "toy DP-SGD loop with the shuffled l2 mechanism"),
    "encode": (cmd_encode, "randomize clients and write the wire transcript"),
    "decode": (cmd_decode, "parse a wire transcript into message rows"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value settings file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    parser = argparse.ArgumentParser(prog="mmsdme", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text)
        if name == "decode":
            sp.add_argument("input", help="transcript written by 'encode'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = collect_settings(args)
        return COMMANDS[args.command][0](args, settings)
    except (MechanismError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
