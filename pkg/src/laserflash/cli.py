"""Command line interface: ``laserflash <subcommand> CONFIG [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import io
from .config import load_config
from .errors import LaserFlashError
from .pipeline import (build_operators, build_surrogate, forward, mean_thermogram,
                       posterior_summary, run_chains, synthesize_data)

logger = logging.getLogger("laserflash")


def _out_dir(args, config) -> Path:
    out = Path(args.output) if getattr(args, "output", None) else config.paths.output
    if out is None:
        out = Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _overrides(args) -> list[str]:
    items = list(args.set or [])
    for flag, key in (("samples", "chain.M"), ("burn_in", "chain.n_B"), ("thin", "chain.thin"),
                      ("seed", "chain.seed"), ("beta", "chain.beta"), ("chains", "chain.chains"),
                      ("k", "discretization.k"), ("n_t", "discretization.n_t"),
                      ("h_target", "discretization.h_target")):
        value = getattr(args, flag, None)
        if value is not None:
            items.append(f"{key}={value}")
    if getattr(args, "no_tune", False):
        items.append("chain.tune=false")
    return items


def _require(path, what):
    if path is None:
        raise LaserFlashError(f"no {what} path given (flag or [paths] section)")
    return Path(path)


def cmd_forward(args):
    config = load_config(args.config, _overrides(args))
    th = forward(config, args.lam, args.intensity)
    out = Path(args.out) if args.out else _out_dir(args, config) / "forward.csv"
    io.write_thermogram(out, th)
    print(f"wrote {out} ({len(th)} points, final temperature {th.temps[-1]:.6g} K)")


def cmd_synth(args):
    config = load_config(args.config, _overrides(args))
    th = synthesize_data(config, args.lam, args.intensity, args.noise_sd, args.seed_noise)
    out = Path(args.out) if args.out else _require(config.paths.data, "data")
    io.write_thermogram(out, th)
    print(f"wrote {out} ({len(th)} points, noise sd {args.noise_sd} K)")


def cmd_build_surrogate(args):
    config = load_config(args.config, _overrides(args))
    t0 = time.perf_counter()
    mesh, ops = build_operators(config)
    sur = build_surrogate(config, ops)
    out = Path(args.out) if args.out else _require(config.paths.surrogate, "surrogate")
    out.parent.mkdir(parents=True, exist_ok=True)
    io.save_surrogate(out, sur)
    report = dict(sur.info, h=mesh.h, k=sur.basis.k, n_d=config.disc.n_d,
                  total_seconds=time.perf_counter() - t0, input_hash=sur.input_hash,
                  surrogate=str(out))
    io.write_summary(out.with_suffix(".report.json"), report)
    print(f"surrogate: n_h={sur.info['n_h']} n_k={sur.basis.n_k} n_t={config.disc.n_t} "
          f"offline {report['total_seconds']:.2f} s -> {out}")


def cmd_sample(args):
    config = load_config(args.config, _overrides(args))
    data = io.read_thermogram(Path(args.data) if args.data else _require(config.paths.data, "data"))
    sur_path = Path(args.surrogate) if args.surrogate else _require(config.paths.surrogate, "surrogate")
    sur = io.load_surrogate(sur_path, expected_hash=config.surrogate_hash())
    t0 = time.perf_counter()
    chain = run_chains(config, data, sur)
    elapsed = time.perf_counter() - t0
    out = _out_dir(args, config)
    io.write_chain(out / "chain.csv", chain)
    report = {"samples": len(chain), "proposed": chain.proposed, "accepted": chain.accepted,
              "acceptance_rate": chain.acceptance_rate, "fallback_count": chain.fallback_count,
              "fallback_fraction": chain.fallback_count / chain.proposed, "beta": chain.beta,
              "seed": chain.seed, "chains": config.n_chains, "seconds": elapsed,
              "seconds_per_sample": elapsed / chain.proposed}
    io.write_summary(out / "sample_report.json", report)
    print(f"chain: {len(chain)} samples, acceptance {chain.acceptance_rate:.3f}, "
          f"fallback {report['fallback_fraction']:.2%}, beta {chain.beta:.4g} -> {out / 'chain.csv'}")


def cmd_summarize(args):
    config = load_config(args.config, _overrides(args))
    out = _out_dir(args, config)
    chain = io.read_chain(Path(args.chain) if args.chain else out / "chain.csv")
    summary = posterior_summary(config, chain)
    report = summary.report()
    io.write_histogram(out / "hist_lambda.csv", summary.hist_lambda.edges,
                       summary.hist_lambda.density, "lambda")
    io.write_histogram(out / "hist_I.csv", summary.hist_I.edges, summary.hist_I.density, "I")
    io.write_joint_histogram(out / "hist_joint.csv", summary.joint_edges, summary.joint_density)
    for i, c in enumerate(summary.conditionals):
        flag = " low_confidence" if c.hist.low_confidence else ""
        io.write_histogram(out / f"hist_lambda_given_I_{i}.csv", c.hist.edges, c.hist.density,
                           "lambda", comment=f"I in [{c.I_lo!r}, {c.I_hi!r}) count={c.hist.count}{flag}")
    data_path = Path(args.data) if args.data else config.paths.data
    sur_path = Path(args.surrogate) if args.surrogate else config.paths.surrogate
    if data_path is not None and sur_path is not None and Path(data_path).exists() and Path(sur_path).exists():
        data = io.read_thermogram(data_path)
        sur = io.load_surrogate(sur_path, expected_hash=config.surrogate_hash())
        th, used = mean_thermogram(config, summary, data, sur)
        io.write_thermogram(out / "posterior_mean_thermogram.csv", th)
        report["posterior_mean_thermogram_used_surrogate"] = used
        report["posterior_mean_rms_misfit"] = float(((th.temps - data.temps) ** 2).mean() ** 0.5)
    io.write_summary(out / "summary.json", report)
    print(f"lambda = {summary.mean_lambda:.6g} +/- {summary.sd_lambda:.3g} W/(m K), "
          f"I = {summary.mean_I:.6g} +/- {summary.sd_I:.3g} W/m^3, "
          f"corr = {summary.corr_lambda_I:.3f}, alpha = {summary.mean_alpha:.5g} m^2/s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laserflash", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment configuration (INI)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a configuration value (repeatable)")
        p.add_argument("--k", type=int)
        p.add_argument("--n-t", dest="n_t", type=int)
        p.add_argument("--h-target", dest="h_target", type=float)
        p.add_argument("-o", "--output", help="output directory")

    p = sub.add_parser("forward", help="plain forward solve -> thermogram CSV")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--intensity", type=float, required=True)
    p.add_argument("--out", help="thermogram CSV path")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("synth", help="synthetic noisy thermogram")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--intensity", type=float, required=True)
    p.add_argument("--noise-sd", type=float, default=0.05)
    p.add_argument("--seed-noise", type=int, default=0)
    p.add_argument("--out", help="thermogram CSV path (default [paths] data)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-surrogate", help="offline SGFEM solve -> surrogate file")
    common(p)
    p.add_argument("--out", help="surrogate path (default [paths] surrogate)")
    p.set_defaults(func=cmd_build_surrogate)

    for name, func, helptext in (("sample", cmd_sample, "RWMH sampling -> chain CSV"),
                                 ("summarize", cmd_summarize, "chain -> summary and histograms")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--data")
        p.add_argument("--surrogate")
        if name == "sample":
            p.add_argument("--samples", type=int)
            p.add_argument("--burn-in", dest="burn_in", type=int)
            p.add_argument("--thin", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--beta", type=float)
            p.add_argument("--chains", type=int)
            p.add_argument("--no-tune", action="store_true")
        else:
            p.add_argument("--chain", help="chain CSV (default OUTPUT/chain.csv)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (LaserFlashError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
