"""Command-line front end.

Every subcommand writes CSV/JSON files into ``--out-dir``.  Distributions use
the header ``x,probability``; dispersion tables use
``k,phase1,phase2,phase3,h1,h2,h3``.  Floats are written with 17
significant digits.  JSON summaries carry ``"v": 1``, the run parameters
under ``params`` and results under ``metrics``.

Exit status: 0 success, 2 configuration error, 3 numerical guard, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, su3
from .analysis import (
    coherence_l1,
    converge,
    dispersion,
    moments,
    total_variation,
    variance_exponent,
)
from .continuum import (
    ContinuumParams,
    diagonal_field,
    field_probability,
    kernel_init_gaussian,
    kernel_solve,
)
from .distribution import ProbabilityDistribution
from .errors import ConfigError, NumericalGuardError
from .openwalk import (
    NoiseChannel,
    OpenSnapshot,
    PositivityWarning,
    evolve_open,
    from_pure,
    reduced_coin_state,
)
from .walk import (
    FOURIER_SYMMETRIC,
    CoinSpec,
    LatticeGrid,
    check_light_cone,
    evolve_unitary,
    localized_state,
    probability,
    step_unitary,
)

log = logging.getLogger("lazywalk")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

COIN_VECTORS = {
    "fourier-symmetric": FOURIER_SYMMETRIC,
    "L": np.array([1, 0, 0], dtype=complex),
    "S": np.array([0, 1, 0], dtype=complex),
    "R": np.array([0, 0, 1], dtype=complex),
    "uniform": su3.UNIFORM,
}
TWO_STATE_INIT = np.array([1.0, 1j]) / np.sqrt(2.0)


# ---------------------------------------------------------------- output


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_distribution(path: Path, p: ProbabilityDistribution) -> None:
    p.validate(tol=1e-9)
    lines = ["x,probability"] + [f"{_fmt(x)},{_fmt(m)}" for x, m in zip(p.support, p.mass)]
    _write_text(path, "\n".join(lines) + "\n")


def write_json(path: Path, command: str, params: dict, metrics: dict) -> None:
    doc = {"v": 1, "command": command, "version": __version__, "params": params, "metrics": metrics}
    _write_text(path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _moment_dict(p: ProbabilityDistribution, t: float | None) -> dict:
    m = moments(p, t=t)
    return {
        "mean": m.mean,
        "variance": m.variance,
        "excess_kurtosis": m.excess_kurtosis,
        "side_mass_ratio": m.side_mass_ratio,
    }


def _exponent(times, variances, lo, hi):
    pts = [(t, v) for t, v in zip(times, variances) if lo <= t <= hi and t > 0 and v > 0]
    if len(pts) < 4:
        return None
    t, v = zip(*pts)
    return variance_exponent(t, v)


# ---------------------------------------------------------------- commands


def _coin(args) -> CoinSpec:
    if args.coin == "grover":
        return CoinSpec.grover()
    if args.coin == "theta":
        if args.theta is None:
            raise ConfigError("--coin theta needs --theta")
        return CoinSpec.angle(args.theta)
    raise ConfigError(f"unknown coin {args.coin!r}")


def _coin_vector(name: str) -> np.ndarray:
    try:
        return COIN_VECTORS[name]
    except KeyError:
        raise ConfigError(f"unknown initial coin state {name!r}") from None


def _lattice(args) -> LatticeGrid:
    n = args.n_sites if args.n_sites is not None else 2 * args.steps + 3
    return LatticeGrid(n)


def _check_nonneg_int(name, value):
    if value is None or int(value) != value or value < 0:
        raise ConfigError(f"--{name.replace('_', '-')} must be a non-negative integer, got {value!r}")


def cmd_walk(args) -> dict:
    _check_nonneg_int("steps", args.steps)
    _check_nonneg_int("snapshot_every", args.snapshot_every)
    grid = _lattice(args)
    coin = _coin(args)
    state0 = localized_state(grid, _coin_vector(args.init))
    state, snaps = evolve_unitary(state0, coin, args.steps, snapshot_every=1)
    p = probability(state)
    out = Path(args.out_dir)
    write_distribution(out / "walk_distribution.csv", p)
    times = sorted(snaps)
    lo, hi = max(1, args.steps // 4), args.steps
    metrics = {
        "steps": args.steps,
        "n_sites": grid.n_sites,
        "norm_drift": abs(state.norm() - 1.0),
        "moments": _moment_dict(p, args.steps),
        "variance_exponent": _exponent(times, [moments(snaps[t]).variance for t in times], lo, hi),
        "variance_window": [lo, hi],
    }
    if args.snapshot_every:
        for t in times:
            if t % args.snapshot_every == 0:
                write_distribution(out / f"walk_t{t:06d}.csv", snaps[t])
    if args.baseline == "hadamard2":
        base0 = localized_state(grid, TWO_STATE_INIT)
        base, _ = evolve_unitary(base0, CoinSpec.hadamard2(), args.steps)
        pb = probability(base)
        write_distribution(out / "baseline_distribution.csv", pb)
        metrics["baseline"] = {"coin": "hadamard2", "moments": _moment_dict(pb, args.steps)}
    write_json(out / "walk_summary.json", "walk", _params(args), metrics)
    return metrics


def cmd_open(args) -> dict:
    _check_nonneg_int("steps", args.steps)
    _check_nonneg_int("snapshot_every", args.snapshot_every)
    grid = _lattice(args)
    if 3 * grid.n_sites > args.max_dim:
        raise NumericalGuardError(
            f"density operator dimension {3 * grid.n_sites} exceeds --max-dim {args.max_dim}"
        )
    coin = _coin(args)
    channel = NoiseChannel(args.channel, args.gamma, args.form)
    state0 = localized_state(grid, _coin_vector(args.init))
    every = args.snapshot_every or args.steps or 1

    def wanted(t):
        return t % every == 0 or t == args.steps

    series = []
    if channel.kind == "none" or channel.gamma == 0.0:
        # closed system: the pure-state engine is exact and cheaper
        check_light_cone(grid, args.steps)
        state = state0
        for t in range(args.steps + 1):
            if wanted(t):
                amps = state.amplitudes
                series.append((t, probability(state), amps.T @ amps.conj()))
            if t < args.steps:
                state = step_unitary(state, coin)
        p = probability(state)
        trace_drift = abs(state.norm() ** 2 - 1.0)
        min_eig = None
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", PositivityWarning)
            rho, snaps = evolve_open(
                from_pure(state0), coin, channel, args.steps, snapshot_every=every,
                monitor_positivity=args.check_positivity,
            )
        snaps.setdefault(args.steps, OpenSnapshot(rho.probability(), reduced_coin_state(rho)))
        for w in caught:
            log.warning("%s", w.message)
        p = rho.probability()
        series = [(t, s.distribution, s.coin_state) for t, s in sorted(snaps.items()) if wanted(t)]
        trace_drift = abs(rho.trace() - 1.0)
        min_eig = rho.min_eigenvalue() if args.check_positivity else None
    out = Path(args.out_dir)
    write_distribution(out / "open_distribution.csv", p)
    if args.snapshot_every:
        for t, dist, _ in series:
            write_distribution(out / f"open_t{t:06d}.csv", dist)
    snap_metrics = []
    for t, dist, coin_state in series:
        m = moments(dist, t=t if t > 0 else None)
        snap_metrics.append({
            "t": t,
            "variance": m.variance,
            "excess_kurtosis": m.excess_kurtosis,
            "side_mass_ratio": m.side_mass_ratio,
            "coin_coherence_l1": coherence_l1(coin_state),
        })
    times = [s["t"] for s in snap_metrics]
    lo, hi = max(1, args.steps // 2), args.steps
    metrics = {
        "steps": args.steps,
        "n_sites": grid.n_sites,
        "trace_drift": trace_drift,
        "min_eigenvalue": min_eig,
        "moments": _moment_dict(p, args.steps),
        "coin_coherence_l1": snap_metrics[-1]["coin_coherence_l1"] if snap_metrics else None,
        "variance_exponent": _exponent(times, [s["variance"] for s in snap_metrics], lo, hi),
        "variance_window": [lo, hi],
        "snapshots": snap_metrics,
    }
    write_json(out / "open_summary.json", "open", _params(args), metrics)
    return metrics


def _decay_rate(times, values) -> float | None:
    pts = [(t, v) for t, v in zip(times, values) if v > 0 and np.isfinite(v)]
    if len(pts) < 2:
        return None
    t, v = map(np.asarray, zip(*pts))
    return float(-np.polyfit(t, np.log(v), 1)[0])


def _coin_coherence_series(run) -> tuple[list[float], list[float]]:
    times = sorted(run.snapshots)
    vals = []
    for t in times:
        fld = run.snapshots[t]
        vals.append(coherence_l1(fld.grid.spacing * fld.blocks.sum(axis=0)))
    return times, vals


def cmd_continuum(args) -> dict:
    grid = LatticeGrid(args.n_sites, args.spacing)
    params = ContinuumParams(args.theta_bar, args.gamma_bar, args.channel, args.t_final, args.dt)
    _check_nonneg_int("snapshot_every", args.snapshot_every)
    k0 = kernel_init_gaussian(grid, args.sigma, _coin_vector(args.coin_init))
    every = args.snapshot_every or 10
    run = kernel_solve(k0, params, snapshot_every=every, force_dt=args.force_dt)
    p = field_probability(diagonal_field(run.kernel))
    out = Path(args.out_dir)
    write_distribution(out / "continuum_distribution.csv", p)
    if args.snapshot_every:
        for i, t in enumerate(sorted(run.snapshots)):
            write_distribution(out / f"continuum_s{i:06d}.csv", field_probability(run.snapshots[t]))
    times, coh = _coin_coherence_series(run)
    metrics = {
        "dt": run.dt,
        "steps": run.steps,
        "trace_drift": run.trace_drift,
        "symmetry_error": run.symmetry_error,
        "moments": _moment_dict(p, None),
        "coherence_series": [{"t": t, "coin_coherence_l1": c} for t, c in zip(times, coh)],
        "coherence_decay_rate": _decay_rate(times, coh),
    }
    if params.gamma_bar > 0 and params.channel != "none" and not args.no_baseline:
        base_params = ContinuumParams(args.theta_bar, 0.0, "none", args.t_final, run.dt)
        base = kernel_solve(k0, base_params, snapshot_every=every, force_dt=args.force_dt)
        pb = field_probability(diagonal_field(base.kernel))
        _, coh0 = _coin_coherence_series(base)
        ratio = [c / c0 if c0 > 0 else float("nan") for c, c0 in zip(coh, coh0)]
        metrics["baseline"] = {
            "moments": _moment_dict(pb, None),
            "tv_to_baseline": total_variation(p, pb),
        }
        # coherence relative to the coherent run isolates the dissipator
        metrics["dephasing_rate"] = _decay_rate(times, ratio)
    write_json(out / "continuum_summary.json", "continuum", _params(args), metrics)
    return metrics


def cmd_converge(args) -> dict:
    eps = [_parse_fraction(e) for e in args.epsilons]
    report = converge(
        args.theta_bar, args.gamma_bar, args.t_phys, args.channel, eps,
        sigma=args.sigma, coin_vector=_coin_vector(args.init), max_dim=args.max_dim,
    )
    out = Path(args.out_dir)
    rows = []
    for i, e in enumerate(report.entries):
        write_distribution(out / f"converge_{i:02d}_discrete.csv", e.discrete)
        write_distribution(out / f"converge_{i:02d}_continuum.csv", e.continuum)
        rows.append({
            "epsilon": e.epsilon,
            "steps": e.steps,
            "n_sites": e.n_sites,
            "tv": e.tv,
            "continuum_dt": e.continuum_dt,
            "continuum_trace_drift": e.trace_drift,
        })
    metrics = {"runs": rows, "monotone": report.monotone}
    if report.order is not None:
        metrics["order"] = report.order
    write_json(out / "converge_summary.json", "converge", _params(args), metrics)
    return metrics


def _parse_fraction(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse epsilon {text!r}") from None


def cmd_dispersion(args) -> dict:
    _check_nonneg_int("k_samples", args.k_samples)
    if args.k_samples < 1:
        raise ConfigError("--k-samples must be at least 1")
    kmax = math.pi / args.dx
    # symmetric samples inside the principal zone, k = 0 included for odd counts
    ks = np.linspace(-kmax, kmax, args.k_samples + 2)[1:-1] if args.k_samples > 1 else np.zeros(1)
    table = dispersion(args.theta, args.dx, args.dt, ks)
    lines = ["k,phase1,phase2,phase3,h1,h2,h3"]
    for k, ph, h in zip(table.k, table.phases, table.h_eigs):
        lines.append(",".join(_fmt(v) for v in (k, *ph, *h)))
    out = Path(args.out_dir)
    _write_text(out / "dispersion.csv", "\n".join(lines) + "\n")
    at0 = dispersion(args.theta, args.dx, args.dt, [0.0])
    ph0 = at0.phases[0] * args.dt
    gaps = [abs(a - b) for i, a in enumerate(ph0) for b in ph0[i + 1:]]
    metrics = {
        "max_deviation": table.max_deviation,
        "gap_at_k0": max(gaps),
        "phases_at_k0": ph0,
    }
    write_json(out / "dispersion_summary.json", "dispersion", _params(args), metrics)
    return metrics


def gellmann_checks() -> list[tuple[str, float, float]]:
    """(identity, error, tolerance) for every algebra self-check."""
    lam = su3.gellmann_basis()
    checks = []
    for i in range(8):
        for j in range(8):
            err = abs(np.trace(lam[i] @ lam[j]) - 2.0 * (i == j))
            checks.append((f"Tr(l{i + 1} l{j + 1}) = {2 * (i == j)}", err, 1e-15))
    for i in range(8):
        checks.append((f"l{i + 1} traceless", abs(np.trace(lam[i])), 1e-15))
        checks.append((f"l{i + 1} Hermitian", np.abs(lam[i] - lam[i].conj().T).max(), 0.0))
    checks.append(("coin(pi) = Grover", np.abs(su3.coin(np.pi) - su3.grover()).max(), 1e-15))
    checks.append(("G^2 = G", np.abs(su3.generator_g() @ su3.generator_g() - su3.generator_g()).max(), 1e-15))
    checks.append(("Jz = l3/2 + sqrt(3)/2 l8", np.abs(0.5 * lam[2] + 0.5 * np.sqrt(3) * lam[7] - su3.jz3()).max(), 1e-15))
    g_expected = 2.0 / 3.0 * np.eye(3) - (lam[0] + lam[3] + lam[5]) / 3.0
    checks.append(("G = 2/3 I - (l1 + l4 + l6)/3", np.abs(g_expected - su3.generator_g()).max(), 1e-15))
    rng = np.random.default_rng(20240601)
    worst_unitary = worst_group = worst_series = 0.0
    for _ in range(100):
        a, b = rng.uniform(-2 * np.pi, 2 * np.pi, size=2)
        c = su3.coin(a)
        worst_unitary = max(worst_unitary, np.abs(c.conj().T @ c - np.eye(3)).max())
        worst_group = max(worst_group, np.abs(c @ su3.coin(b) - su3.coin(a + b)).max())
        worst_series = max(worst_series, np.abs(c - su3.expm_series(-1j * a * su3.generator_g())).max())
    checks.append(("coin unitary (100 random angles)", worst_unitary, 1e-14))
    checks.append(("coin group law (100 random pairs)", worst_group, 1e-13))
    checks.append(("coin = series exponential (100 random angles)", worst_series, 1e-12))
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    checks.append(("reconstruct(decompose(A)) = A", np.abs(su3.reconstruct(su3.decompose(a)) - a).max(), 1e-13))
    return checks


def cmd_gellmann_check(args) -> int:
    failed = 0
    for name, err, tol in gellmann_checks():
        ok = err <= tol
        failed += not ok
        if not ok or args.verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  (error {err:.3e}, tol {tol:.0e})")
    print(f"gellmann-check: {'all identities hold' if not failed else f'{failed} identities violated'}")
    return EXIT_OK if not failed else EXIT_NUMERICAL


# ---------------------------------------------------------------- parser


def _params(args) -> dict:
    skip = {"func", "config", "out_dir", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lazywalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="JSON file of defaults; command-line flags win")
        if out:
            p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("-v", "--verbose", action="store_true")

    def walk_args(p):
        p.add_argument("--coin", choices=["grover", "theta"], default="grover")
        p.add_argument("--theta", type=float, default=None, help="coin angle (radians) for --coin theta")
        p.add_argument("--steps", type=int, default=100)
        p.add_argument("--n-sites", type=int, default=None, help="odd; default 2*steps+3")
        p.add_argument("--init", choices=sorted(COIN_VECTORS), default="fourier-symmetric")
        p.add_argument("--snapshot-every", type=int, default=0)

    p = sub.add_parser("walk", help="unitary lazy walk (optionally with the two-state baseline)")
    walk_args(p)
    p.add_argument("--baseline", choices=["hadamard2"], default=None)
    common(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("open", help="density-operator walk with coin or spatial dephasing")
    walk_args(p)
    p.add_argument("--channel", choices=["none", "coin", "spatial"], default="coin")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--form", choices=["kraus", "lindblad_euler"], default="kraus")
    p.add_argument("--check-positivity", action="store_true")
    p.add_argument("--max-dim", type=int, default=3000)
    common(p)
    p.set_defaults(func=cmd_open)

    p = sub.add_parser("continuum", help="continuum kernel equation")
    p.add_argument("--channel", choices=["none", "coin", "spatial"], default="none")
    p.add_argument("--theta-bar", type=float, default=0.0)
    p.add_argument("--gamma-bar", type=float, default=0.0)
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--n-sites", type=int, default=129)
    p.add_argument("--spacing", type=float, default=1.0 / 16.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--coin-init", choices=sorted(COIN_VECTORS), default="fourier-symmetric")
    p.add_argument("--dt", type=float, default=None, help="default: the stability bound")
    p.add_argument("--force-dt", action="store_true", help="allow dt above the stability bound")
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--no-baseline", action="store_true", help="skip the gamma_bar = 0 companion run")
    common(p)
    p.set_defaults(func=cmd_continuum)

    p = sub.add_parser("converge", help="discrete-to-continuum convergence study")
    p.add_argument("--theta-bar", type=float, default=1.0)
    p.add_argument("--gamma-bar", type=float, default=0.0)
    p.add_argument("--t-phys", type=float, default=1.0)
    p.add_argument("--channel", choices=["none", "coin", "spatial"], default="coin")
    p.add_argument("--epsilons", nargs="+", default=["1/8", "1/16", "1/32"])
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--init", choices=sorted(COIN_VECTORS), default="fourier-symmetric")
    p.add_argument("--max-dim", type=int, default=3000)
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("dispersion", help="walk eigenphases against the continuum spectrum")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--dx", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--k-samples", type=int, default=65)
    common(p)
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("gellmann-check", help="self-test of the SU(3) algebra")
    common(p, out=False)
    p.set_defaults(func=cmd_gellmann_check)
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> argparse.Namespace:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {args.config}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    known = set(vars(args))
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known - {"command"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg.pop("command", None)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, args, argv)
        if getattr(args, "out_dir", None) is not None:
            out = Path(args.out_dir)
            try:
                out.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
        result = args.func(args)
        return result if isinstance(result, int) else EXIT_OK
    except ConfigError as exc:
        print(f"lazywalk: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"lazywalk: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        if isinstance(exc, OSError):
            print(f"lazywalk: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"lazywalk: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
