"""Command-line entry point: ``pvrise simulate | analyze | verify``.

Exit codes: 0 ok, 1 config/validation error, 2 I/O error, 3 insufficient
data, 4 verification failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, io
from .errors import (
    ConfigError,
    DatasetParseError,
    DatasetValidationError,
    InsufficientDataError,
)
from .feeder import feeder_voltages, simulate
from .model import SharedImpedanceMatrix
from .profile import fit_irradiance_slope
from .regression import PLS1Regressor, OLSRegressor, injection_filter

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3, 4


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        config = io.load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    dataset = simulate(config)
    try:
        io.write_dataset(dataset, args.out)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    n_samples = sum(len(dataset[s]) for s in dataset.site_ids)
    print(f"sites: {len(dataset.site_ids)}  days: {config.n_days}  seed: {config.seed}  samples: {n_samples}")
    for sid in dataset.site_ids:
        print(f"  {sid}: {len(dataset[sid])} samples -> {Path(args.out) / (sid + '.csv')}")
    return EXIT_OK


def _load(path, validate=True):
    try:
        return io.read_dataset(path, validate=validate), None
    except (DatasetParseError, DatasetValidationError, ConfigError) as exc:
        _err(str(exc))
        return None, EXIT_CONFIG


def cmd_analyze(args) -> int:
    dataset, code = _load(args.data)
    if dataset is None:
        return code
    site_ids = dataset.site_ids
    if args.site is not None:
        if args.site not in site_ids:
            _err(f"unknown site {args.site!r}; available: {', '.join(site_ids)}")
            return EXIT_CONFIG
        site_ids = [args.site]
    try:
        results = analysis.analyze_dataset(dataset, site_ids, min_samples=args.min_samples)
    except InsufficientDataError as exc:
        _err(str(exc))
        return EXIT_DATA
    try:
        slope = fit_irradiance_slope(dataset, site_ids=site_ids)
    except InsufficientDataError:
        slope = None
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        io.write_results_json(results, args.out, slope)
        io.write_report(results, args.out)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    print(f"irradiance slope: {'n/a' if slope is None else f'{slope:.4f}'}")
    print(f"{'site':<10}{'R (ohm)':>9}{'beta':>10}{'daily':>7}{'hourly':>8}")
    for r in io.report_column_order(results):
        print(f"{r.site_id:<10}{r.impedance_ohm:>9.3f}{r.overall.beta_pu_per_kw:>10.4f}{len(r.daily):>7}{len(r.hourly):>8}")
    print(f"report written to {args.out}")
    return EXIT_OK


def _verify_checks(dataset):
    """Yield ``(name, status, detail)`` with status in {'PASS', 'FAIL', 'SKIP'}."""
    config = dataset.config
    site_ids = dataset.site_ids

    bad = {sid: int(np.sum(dataset[sid].violations(config.site(sid)) != "")) for sid in site_ids}
    total = sum(bad.values())
    yield ("sample-invariants", "PASS" if total == 0 else "FAIL",
           f"{total} invalid samples" + ("" if total == 0 else f" ({', '.join(f'{s}: {n}' for s, n in bad.items() if n)})"))

    worst, ran = 0.0, False
    for sid in site_ids:
        data = injection_filter(dataset[sid])
        if len(data) < 2 or np.var(data.x) <= 1e-15:
            continue
        pls = PLS1Regressor().fit(data.x, data.y).coef_[0]
        ols = OLSRegressor().fit(data.x, data.y).coef_[0]
        worst = max(worst, abs(pls - ols) / max(1.0, abs(ols)))
        ran = True
    yield ("pls-ols-equivalence", "SKIP" if not ran else ("PASS" if worst <= 1e-10 else "FAIL"),
           f"max relative difference {worst:.2e}")

    r = SharedImpedanceMatrix.from_config(config)
    rng = np.random.default_rng(0)
    p, q = rng.uniform(-10, 5, size=(2, 1000, r.n))
    v = lambda x: feeder_voltages(x, config.source_setpoint_pu, r, config.base_voltage_v)
    err = float(np.max(np.abs((v(p + q) - v(q)) - (v(p) - v(np.zeros_like(p))))))
    yield ("superposition", "PASS" if err <= 1e-12 else "FAIL", f"max deviation {err:.2e}")

    fits, norm_err, norm_ran = {}, 0.0, False
    for sid in site_ids:
        try:
            fits[sid] = analysis.fit_site_beta(dataset, sid, min_samples=2)
        except (InsufficientDataError, ValueError):
            continue
        daily = analysis.daily_beta_series(dataset, sid).betas
        if len(daily) >= 2 and np.ptp(daily) > 0:
            norm_err = max(norm_err, abs(analysis.kde(daily).integral() - 1.0))
            norm_ran = True
    yield ("density-normalisation", "SKIP" if not norm_ran else ("PASS" if norm_err <= 1e-3 else "FAIL"),
           f"max |integral - 1| {norm_err:.2e}")

    if fits:
        positive = [sid for sid, f in fits.items() if not f.beta_pu_per_kw < 0]
        yield ("beta-sign", "PASS" if not positive else "FAIL",
               "injection raises voltage at every site" if not positive else f"beta >= 0 at {', '.join(positive)}")
    else:
        yield ("beta-sign", "SKIP", "no site has injection data")

    if len(fits) >= 2:
        ids = sorted(fits, key=lambda s: config.site(s).impedance_ohm)
        mags = [abs(fits[s].beta_pu_per_kw) for s in ids]
        ok = all(a < b for a, b in zip(mags, mags[1:]))
        yield ("impedance-ordering", "PASS" if ok else "FAIL",
               "|beta| by increasing impedance: " + ", ".join(f"{m:.4f}" for m in mags))
    else:
        yield ("impedance-ordering", "SKIP", "needs at least two sites")

    noiseless = (
        config.load_model.noise_std_kw == 0
        and config.cloud_model.volatility == 0
        and config.upstream_model.volatility_pu == 0
    )
    if noiseless and len(config.sites) == 1 and fits:
        spec = config.sites[0]
        expected = -spec.impedance_ohm * 1000.0 / config.base_voltage_v**2
        got = fits[spec.site_id].beta_pu_per_kw
        yield ("beta-recovery", "PASS" if abs(got - expected) <= 1e-6 else "FAIL",
               f"fitted {got:.7f}, closed form {expected:.7f}")
    else:
        yield ("beta-recovery", "SKIP", "needs a noise-free single-site dataset")


def cmd_verify(args) -> int:
    dataset, code = _load(args.data, validate=False)
    if dataset is None:
        return code
    failed = []
    for name, status, detail in _verify_checks(dataset):
        print(f"{status} {name}: {detail}")
        if status == "FAIL":
            failed.append(name)
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvrise", description="PV voltage-rise simulation and meter-data analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic meter dataset")
    p.add_argument("--config", required=True, help="feeder JSON config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="fit beta series and write tables and plot data")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--site", default=None, help="restrict to one site id")
    p.add_argument("--min-samples", type=int, default=30, help="injection samples needed per daily/minute fit")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run the invariant checks on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        _err("--seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
