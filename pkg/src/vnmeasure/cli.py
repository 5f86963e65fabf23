"""Command-line entry point.

Every command writes its table (CSV) or report (JSON) to ``--out`` or
stdout, plus a run manifest next to the output (``<out>.manifest.json``).
``vnmeasure replay MANIFEST`` re-executes a recorded run.
"""

import argparse
import csv
import datetime
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .analytic import (FactorKind, ansatz_gamma, ansatz_superfid, f_avg,
                       gamma_avg, purity_avg, superfid_avg, tau_scales)
from .ensembles import (DensityMatrix, EnsembleConfig, HermitianObservable, Measure,
                        gue_batch, semicircle_cdf, semicircle_radius, spectral_ks,
                        state_batch)
from .montecarlo import estimate, f_sampler, factor_sampler, purity_sampler
from .quadrature import QuadratureError
from .sbs import (hoeffding_experiment, micro_evolve,
                  micro_offdiag_norm)
from .streams import stream
from .sysavg import CurveRequest, QuadratureSpec, system_average_curve

Z_LIMIT = 4.0
ANSATZ_SLACK = 1e-12
KS_LIMIT = 0.05

_FLAG_KEYS = {
    "d": "d", "ds": "d_S", "eta_e": "eta_E", "eta_s": "eta_S",
    "n_uno": "N_uno", "n_mac": "N_mac", "m": "M", "measure": "measure",
    "seed": "master_seed",
}


def fmt(x):
    """Round-trip exact float formatting (17 significant digits)."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def resolve_config(args):
    data = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data.update(json.load(fh))
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    return EnsembleConfig.from_dict(data)


def _config_echo(cfg):
    return json.dumps(cfg.to_dict(), sort_keys=True)


def _write_table(args, cfg, header, rows, extra_comments=()):
    buf = io.StringIO()
    if cfg is not None:
        buf.write(f"# config: {_config_echo(cfg)}\n")
    for line in extra_comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    _emit(args, buf.getvalue())


def _write_json(args, payload):
    _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_manifest(args, argv, cfg, started):
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": cfg.to_dict() if cfg is not None else None,
        "seed": cfg.master_seed if cfg is not None else getattr(args, "seed", None),
        "version": __version__,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [args.out] if args.out else [],
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def cmd_curve(args, cfg):
    kind = FactorKind.parse(args.kind)
    power = args.power
    if power is None:
        power = cfg.N_uno if kind is FactorKind.DECOHERENCE else cfg.N_mac
    grid = np.linspace(0.0, args.t_max, args.grid)
    req = CurveRequest(cfg, kind, power, tuple(grid),
                       QuadratureSpec(rtol=args.rtol))
    try:
        curve = system_average_curve(req)
    except QuadratureError as exc:
        print(f"curve: {exc}", file=sys.stderr)
        return 2
    rows = [(gt, v, curve.floor) for gt, v in zip(curve.g_t, curve.values)]
    _write_table(args, cfg, ["g_t", "value", "floor"], rows,
                 [f"kind={kind.value} power={power}"])
    return 0


def cmd_mc_verify(args, cfg):
    deltas = args.deltas
    state = args.state or cfg.measure.value
    rows = []
    if args.quantity == "purity":
        est = estimate(purity_sampler(cfg.d, cfg.measure), args.samples,
                       cfg.master_seed, args.workers)
        analytic = purity_avg(cfg.measure, cfg.d)
        rows.append(("", analytic, est.mean, est.stderr, est.z_score(analytic)))
    else:
        if args.quantity == "f":
            sampler = f_sampler(cfg.d, deltas)
            analytic = [f_avg(cfg.d, x) for x in deltas]
        else:
            kind = FactorKind.parse(args.quantity)
            purity = 1.0 if state == "pure" else purity_avg(state, cfg.d)
            avg = gamma_avg if kind is FactorKind.DECOHERENCE else superfid_avg
            sampler = factor_sampler(cfg.d, state if state == "pure" else Measure.parse(state),
                                     deltas, kind)
            analytic = [avg(cfg.d, purity, x) for x in deltas]
        est = estimate(sampler, args.samples, cfg.master_seed, args.workers)
        z = est.z_score(np.array(analytic))
        for i, x in enumerate(deltas):
            rows.append((x, analytic[i], est.mean[i], est.stderr[i], z[i]))
    _write_table(args, cfg, ["delta", "analytic", "mc_mean", "mc_stderr", "z_score"], rows,
                 [f"quantity={args.quantity} state={state} n={args.samples}"])
    bad = [r for r in rows if not abs(r[4]) <= Z_LIMIT]
    for r in bad:
        print(f"mc-verify: |z| > {Z_LIMIT}: " + ",".join(fmt(v) for v in r), file=sys.stderr)
    return 1 if bad else 0


def cmd_timescales(args, cfg):
    taus = tau_scales(cfg)
    payload = {
        "tau_dec": taus.tau_dec,
        "tau_fid": taus.tau_fid,
        "ratio": taus.ratio,
        "g": cfg.g,
        "purity_avg": purity_avg(cfg.measure, cfg.d),
        "tau_pair_formula_constants": {
            "prefactor": math.sqrt(cfg.eta_E) / math.sqrt(cfg.d + 1.0),
            "formula": "tau_pair = prefactor / |a - a'|",
        },
    }
    _write_json(args, payload)
    return 0


def ansatz_rows(d_max, step, delta_max, measure):
    grid = np.round(np.arange(0.0, delta_max + 0.5 * step, step), 12)
    rows = []
    for d in range(2, d_max + 1):
        p = purity_avg(measure, d)
        dg = np.max(gamma_avg(d, p, grid) - ansatz_gamma(d, p, grid))
        df = np.max(superfid_avg(d, p, grid) - ansatz_superfid(d, p, grid))
        rows.append((d, float(dg), float(df)))
    return rows


def cmd_ansatz_check(args, cfg):
    rows = ansatz_rows(args.d_max, args.grid_step, args.delta_max, cfg.measure)
    _write_table(args, None, ["d", "max_gamma_minus_ansatz", "max_superfid_minus_ansatz"],
                 rows, [f"measure={cfg.measure.value} step={args.grid_step} "
                        f"delta_max={args.delta_max}"])
    bad = [r for r in rows if r[1] > ANSATZ_SLACK or r[2] > ANSATZ_SLACK]
    for r in bad:
        print(f"ansatz-check: dominance violated at d={r[0]}", file=sys.stderr)
    return 1 if bad else 0


def cmd_concentration(args, cfg):
    rows = hoeffding_experiment(cfg, args.t, args.samples, args.deltas, args.workers)
    _write_table(args, cfg, ["delta", "empirical_prob", "bound"],
                 [(r.delta, r.empirical_prob, r.bound) for r in rows],
                 [f"g_t={fmt(args.t)} n={args.samples}"])
    return 0 if all(r.ok for r in rows) else 1


def cmd_semicircle(args, cfg):
    d = args.d if args.d is not None else 50
    eta = args.eta_e if args.eta_e is not None else 1.0
    rng = stream(cfg.master_seed, 0)
    ev = np.linalg.eigvalsh(gue_batch(rng, args.samples, d, eta)).ravel()
    radius = semicircle_radius(d, eta)
    ks = spectral_ks(ev, radius)
    edges = np.linspace(-1.25 * radius, 1.25 * radius, args.bins + 1)
    counts, _ = np.histogram(ev, bins=edges)
    width = np.diff(edges)
    density = counts / (ev.size * width)
    expected = np.diff(semicircle_cdf(edges, radius)) / width
    rows = [(lo, hi, c, dens, exp) for lo, hi, c, dens, exp
            in zip(edges[:-1], edges[1:], counts, density, expected)]
    _write_table(args, None, ["bin_lo", "bin_hi", "count", "density", "semicircle_density"],
                 rows, [f"d={d} eta={fmt(eta)} samples={args.samples} "
                        f"radius={fmt(radius)} ks={fmt(ks)}"])
    return 0 if ks < KS_LIMIT else 1


def cmd_micro_check(args, cfg):
    rows = []
    n_copies = cfg.N_uno + cfg.N_obs
    for i in range(args.samples):
        rng = stream(cfg.master_seed, i)
        levels = np.linalg.eigvalsh(gue_batch(rng, 1, cfg.d_S, cfg.eta_S)[0])
        A = HermitianObservable.diagonal(levels, cfg.eta_S)
        Bs = [HermitianObservable.from_matrix(b, cfg.eta_E)
              for b in gue_batch(rng, n_copies, cfg.d, cfg.eta_E)]
        rho_s = DensityMatrix.from_matrix(state_batch(rng, 1, cfg.d_S, cfg.measure)[0])
        rhos = [DensityMatrix.from_matrix(r) for r in state_batch(rng, n_copies, cfg.d, cfg.measure)]
        t = args.t / cfg.g
        state = micro_evolve(A, Bs, rho_s, rhos, t, cfg.N_uno)
        norm = micro_offdiag_norm(state)
        bound = 0.0
        for a in range(cfg.d_S):
            for b in range(cfg.d_S):
                if a == b:
                    continue
                gamma = 1.0
                for k in range(cfg.N_uno):
                    amp = np.trace(Bs[k].propagator((levels[a] - levels[b]) * t) @ rhos[k].matrix)
                    gamma *= abs(amp) ** 2
                bound += abs(rho_s.matrix[a, b]) * math.sqrt(gamma)
        rows.append((i, norm, bound, int(norm <= bound + 1e-10)))
    _write_table(args, cfg, ["instance", "offdiag_half_trace_norm", "decoherence_bound", "ok"],
                 rows, [f"g_t={fmt(args.t)}"])
    return 0 if all(r[3] for r in rows) else 1


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="vnmeasure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file with ensemble keys")
    common.add_argument("--d", type=int)
    common.add_argument("--ds", type=int)
    common.add_argument("--eta-e", type=float)
    common.add_argument("--eta-s", type=float)
    common.add_argument("--n-uno", type=int)
    common.add_argument("--n-mac", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--measure", choices=["hs", "bures"])
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", parents=[common], help="system-averaged factor vs g t")
    p.add_argument("--kind", default="decoherence")
    p.add_argument("--power", type=int)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("mc-verify", parents=[common], help="Monte Carlo vs closed form")
    p.add_argument("--quantity", choices=["purity", "gamma", "superfid", "f"], default="gamma")
    p.add_argument("--deltas", type=_float_list, default=[0.0, 0.25, 1.0, 4.0])
    p.add_argument("--state", choices=["hs", "bures", "pure"])
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_mc_verify)

    p = sub.add_parser("timescales", parents=[common], help="objectivization timescales")
    p.set_defaults(func=cmd_timescales)

    p = sub.add_parser("ansatz-check", parents=[common], help="Gaussian envelope dominance")
    p.add_argument("--d-max", type=int, default=20)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--delta-max", type=float, default=10.0)
    p.set_defaults(func=cmd_ansatz_check)

    p = sub.add_parser("concentration", parents=[common], help="Hoeffding experiment")
    p.add_argument("--t", type=float, required=True, help="time in units of 1/g")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--deltas", type=_float_list, default=[0.1, 0.25, 0.5, 0.75])
    p.set_defaults(func=cmd_concentration)

    p = sub.add_parser("semicircle", parents=[common], help="GUE spectral density check")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--bins", type=int, default=60)
    p.set_defaults(func=cmd_semicircle)

    p = sub.add_parser("micro-check", parents=[common], help="microscale decoherence bound")
    p.add_argument("--t", type=float, default=1.0, help="time in units of 1/g")
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_micro_check)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="override the recorded output path")
    p.set_defaults(func=None)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        with open(args.manifest) as fh:
            recorded = json.load(fh)["argv"]
        if args.out:
            recorded = _replace_out(recorded, args.out)
        return main(recorded)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    cfg = resolve_config(args)
    code = args.func(args, cfg)
    _write_manifest(args, argv, cfg, started)
    return code


def _replace_out(argv, out):
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = out
    else:
        argv += ["--out", out]
    return argv


if __name__ == "__main__":
    sys.exit(main())
