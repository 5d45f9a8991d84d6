"""Command-line entry point: ``mollow <command> [options]``.

Frequencies on the command line are ordinary frequencies in MHz; times are in ns or
us as named.  Any option may also come from a ``--config`` file of ``key=value``
lines (keys spelled like the long option, with or without dashes); explicit
command-line options win.
"""
import argparse
import logging
import sys
import warnings

import numpy as np

from . import io
from .dynamics import (AtomParams, g2_analytic, g2_numeric, generalized_rabi, mhz,
                       mollow_spectrum_analytic, spectrum_numeric)
from .errors import ValidityWarning
from .estimators import G2Fitter, SaturationFitter, SpectrumFitter, TwoExponentialFitter
from .filtered import SensorConfig, build_composite, filtered_cross_correlation
from .instrument import ReflectionBackground, add_reflection, convolve_with_cavity, triangle_window
from .montecarlo import SimConfig, correlate, simulate_hbt

log = logging.getLogger("mollow")

PER_MHZ = 2 * np.pi * 1e6  # density per rad/s -> per MHz


def _params(args):
    return AtomParams.from_mhz(args.gamma_mhz, args.omega_mhz, args.delta_mhz)


def cmd_spectrum(args):
    p = _params(args)
    span = args.span_mhz or 3 * generalized_rabi(p) / PER_MHZ + 60
    freq = mhz(np.arange(-span, span + args.step_mhz / 2, args.step_mhz))
    use_analytic = args.model == "analytic" or (
        args.model == "auto" and p.delta == 0 and p.omega > p.gamma / 4)
    if use_analytic:
        ideal = mollow_spectrum_analytic(p, freq)
    else:
        ideal = spectrum_numeric(p, freq)
    total = ideal.total_power()
    measured = convolve_with_cavity(add_reflection(ideal, ReflectionBackground(args.reflection)),
                                    mhz(args.cavity_mhz))
    io.write_csv(args.out, {
        "freq_mhz": freq / PER_MHZ,
        "measured_per_mhz": measured.density / total * PER_MHZ,
        "ideal_per_mhz": ideal.density / total * PER_MHZ,
    }, comments=[f"elastic_weight={ideal.elastic_weight / total!r} (fraction of total power)",
                 f"model={'analytic' if use_analytic else 'numeric'}"])


def cmd_g2(args):
    p = _params(args)
    tau_ns = np.arange(-args.taumax_ns, args.taumax_ns + args.step_ns / 2, args.step_ns)
    tau = tau_ns / 1e9
    numeric = g2_numeric(p, tau)
    if p.delta == 0 and p.omega > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            analytic = g2_analytic(p, tau)
    else:
        analytic = np.full(tau.size, np.nan)
    window = triangle_window(tau, args.pulse_us * 1e-6)
    io.write_csv(args.out, {
        "tau_ns": tau_ns,
        "g2_windowed": numeric * window,
        "g2_numeric": numeric,
        "g2_analytic": analytic,
    })


def cmd_simulate(args):
    cfg = SimConfig(_params(args), pulse_length=args.pulse_us * 1e-6, n_trials=args.trials,
                    detection_efficiency=args.eta, rng_seed=args.seed,
                    dead_time=args.dead_ns * 1e-9, dark_count_rate=args.dark_rate)
    recs = simulate_hbt(cfg, n_workers=args.workers)
    io.write_timetags(args.out, recs, cfg.pulse_length, args.seed, cfg.n_trials)
    log.info("wrote %d clicks from %d trials", recs.size, cfg.n_trials)


def cmd_correlate(args):
    recs, meta = io.read_timetags(args.in_)
    hist = correlate(recs, args.bin_ns * 1e-9, args.taumax_ns * 1e-9,
                     pulse_length=meta["pulse_length"], n_trials=meta["n_trials"])
    io.write_csv(args.out, {
        "tau_ns": hist.centers * 1e9,
        "g2_windowed": hist.normalized,
        "g2_windowed_err": hist.normalized_err,
        "counts": hist.counts,
        "g2": hist.g2(),
    }, comments=[f"norm={hist.norm!r} pulse_ns={meta['pulse_length'] * 1e9:.12g} "
                 f"trials={hist.n_trials}"])


def cmd_cross(args):
    p = _params(args)
    cfg = SensorConfig.sidebands(p, filter_fwhm=mhz(args.filter_mhz))
    tau_ns = np.arange(-args.taumax_ns, args.taumax_ns + args.step_ns / 2, args.step_ns)
    corr = filtered_cross_correlation(build_composite(p, cfg), tau_ns / 1e9)
    io.write_csv(args.out, {"tau_ns": tau_ns, "g": corr.g},
                 comments=["tau > 0: upper-sideband photon after lower-sideband photon"])


# (estimator, {parameter: unit label})
FITTERS = {
    "spectrum": (lambda a: SpectrumFitter(mhz(a.gamma_mhz), mhz(a.cavity_mhz), a.reflection),
                 {"omega": "MHz"}),
    "g2": (lambda a: G2Fitter(mhz(a.gamma_mhz), a.pulse_us * 1e-6), {"omega": "MHz"}),
    "saturation": (lambda a: SaturationFitter(mhz(a.gamma_mhz)), {"p_sat": "pW"}),
    "twoexp": (lambda a: TwoExponentialFitter(), {"tau_rise": "ns", "tau_fall": "ns"}),
}
UNIT_OUT = {"MHz": 2 * np.pi * 1e6, "pW": 1e-12, "ns": 1e-9}


def _pick(cols, name, default_index):
    names = list(cols)
    if name is None:
        return names[default_index]
    if name not in cols:
        raise SystemExit(f"column {name!r} not found; have {names}")
    return name


def cmd_fit(args):
    cols, _ = io.read_csv(args.in_)
    xname = _pick(cols, args.x_col, 0)
    yname = _pick(cols, args.y_col, 1)
    ename = args.err_col or (yname + "_err" if yname + "_err" in cols else None)
    xscale = io.column_scale(xname)
    x = cols[xname] * xscale
    y = cols[yname]
    y_err = cols[_pick(cols, ename, 0)] if ename else None
    make, units = FITTERS[args.kind]
    est = make(args).fit(x, y, y_err)
    res = est.result_
    values, sigmas, unit_list = [], [], []
    for name, v, s in zip(res.names, res.values, res.sigmas):
        unit = units.get(name, "")
        scale = UNIT_OUT.get(unit, 1.0)
        if name == "amplitude" and args.kind == "spectrum":
            scale, unit = xscale, f"{yname}*{xname}"
        values.append(float(v / scale))
        sigmas.append(float(s / scale))
        unit_list.append(unit)
    record = {"kind": args.kind, "input": args.in_, "names": list(res.names), "values": values,
              "sigmas": sigmas, "units": unit_list, "reduced_chi2": res.reduced_chi2,
              "converged": res.converged, "flags": res.flags}
    io.append_jsonl(args.out, record, mode="a" if args.append else "w")
    if args.curve:
        dense = np.linspace(x.min(), x.max(), max(1000, 4 * x.size))
        io.write_csv(args.curve, {xname: dense / xscale, yname + "_model": est.predict(dense)})
    for name, v, s, u in zip(res.names, values, sigmas, unit_list):
        log.info("%s = %.6g +/- %.2g %s", name, v, s, u)


def build_parser():
    parser = argparse.ArgumentParser(prog="mollow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, omega_required=True):
        sp.add_argument("--config", help="key=value file presetting any option")
        sp.add_argument("--gamma-mhz", type=float, default=6.07)
        sp.add_argument("--omega-mhz", type=float, default=None, required=False)
        sp.add_argument("--delta-mhz", type=float, default=0.0)
        sp.add_argument("--out", default=None)
        sp.set_defaults(_required=["out"] + (["omega_mhz"] if omega_required else []))

    sp = sub.add_parser("spectrum", help="ideal and instrument-recorded emission spectra")
    common(sp)
    sp.add_argument("--cavity-mhz", type=float, default=3.92)
    sp.add_argument("--reflection", type=float, default=0.076)
    sp.add_argument("--span-mhz", type=float, default=None)
    sp.add_argument("--step-mhz", type=float, default=0.05)
    sp.add_argument("--model", choices=("auto", "analytic", "numeric"), default="auto")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("g2", help="analytic and numeric g2 with the pulse triangle window")
    common(sp)
    sp.add_argument("--pulse-us", type=float, default=2.0)
    sp.add_argument("--taumax-ns", type=float, default=200.0)
    sp.add_argument("--step-ns", type=float, default=0.5)
    sp.set_defaults(func=cmd_g2)

    sp = sub.add_parser("simulate", help="Monte Carlo time-tag stream through an HBT setup")
    common(sp)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--eta", type=float, default=0.0179)
    sp.add_argument("--pulse-us", type=float, default=2.0)
    sp.add_argument("--dead-ns", type=float, default=0.0)
    sp.add_argument("--dark-rate", type=float, default=0.0, help="dark counts per second per detector")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate, _required=["out", "omega_mhz", "trials", "seed"])

    sp = sub.add_parser("correlate", help="normalized coincidence histogram of a time-tag file")
    sp.add_argument("--config")
    sp.add_argument("--in", dest="in_", default=None)
    sp.add_argument("--bin-ns", type=float, default=None)
    sp.add_argument("--taumax-ns", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_correlate, _required=["in_", "bin_ns", "taumax_ns", "out"])

    sp = sub.add_parser("cross", help="filtered cross-correlation of the two Mollow sidebands")
    common(sp)
    sp.add_argument("--filter-mhz", type=float, default=20.0)
    sp.add_argument("--taumax-ns", type=float, default=300.0)
    sp.add_argument("--step-ns", type=float, default=0.5)
    sp.set_defaults(func=cmd_cross)

    sp = sub.add_parser("fit", help="least-squares fit of a CSV curve")
    sp.add_argument("kind", choices=sorted(FITTERS))
    sp.add_argument("--config")
    sp.add_argument("--in", dest="in_", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--x-col")
    sp.add_argument("--y-col")
    sp.add_argument("--err-col")
    sp.add_argument("--curve", help="also write the model on a dense grid to this CSV")
    sp.add_argument("--append", action="store_true", help="append to the JSON-lines output")
    sp.add_argument("--gamma-mhz", type=float, default=6.07)
    sp.add_argument("--cavity-mhz", type=float, default=3.92)
    sp.add_argument("--reflection", type=float, default=0.076)
    sp.add_argument("--pulse-us", type=float, default=2.0)
    sp.set_defaults(func=cmd_fit, _required=["in_", "out"])
    for sp in sub.choices.values():
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return parser


def read_config(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SystemExit(f"{path}: expected key=value, got {line!r}")
            key = key.strip().lstrip("-").replace("-", "_")
            values["in_" if key == "in" else key] = value.strip()
    return values


def _convert(action, value):
    if isinstance(action, argparse._StoreTrueAction):
        return value.lower() in ("1", "true", "yes", "on")
    return action.type(value) if action.type else value


def _config_path(argv):
    for k, a in enumerate(argv):
        if a == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path:
        preset = read_config(path)
        # apply to the chosen subcommand; typed through each option's own converter
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        command = next((a for a in argv if a in subparsers.choices), None)
        if command:
            sp = subparsers.choices[command]
            known = {a.dest: a for a in sp._actions}
            unknown = sorted(set(preset) - set(known))
            if unknown:
                raise SystemExit(f"{path}: unknown option(s) for {command}: {', '.join(unknown)}")
            sp.set_defaults(**{k: _convert(known[k], v) for k, v in preset.items()})
    args = parser.parse_args(argv)
    missing = [k for k in getattr(args, "_required", []) if getattr(args, k, None) is None]
    if missing:
        parser.error("missing required option(s): " + ", ".join(
            "--" + ("in" if k == "in_" else k.replace("_", "-")) for k in missing))
    return args


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
