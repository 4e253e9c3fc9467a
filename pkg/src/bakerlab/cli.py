"""Command-line orchestration: run experiment families, write plot-ready
CSV artifacts with JSON manifests.

Exit codes: 0 success, 1 usage/validation error, 2 numeric or convergence
failure, 3 selftest failure.  Floats are written with 17 significant digits
so that re-running a command reproduces byte-identical CSV bodies.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BakerlabError, InsufficientFluctuationsError
from .mapcore import (
    MapParams,
    MapVariant,
    Region,
    ReversalScheme,
    check_reversibility,
    jacobians,
    region_reverse,
    time_reversal_arrays,
)
from . import markov as mk
from . import ensemble as es
from . import fluctuation as fl
from . import transport as tp

_USAGE_EXIT = 1
_NUMERIC_EXIT = 2
_SELFTEST_EXIT = 3


def _fmt(v) -> str:
    return format(float(v), ".17g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _read_config_file(path: str) -> dict[str, str]:
    """Flat key = value text; '#' starts a comment."""
    out = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BakerlabError(f"{path}:{line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve(args: argparse.Namespace, spec: dict[str, tuple]):
    """Merge CLI > config file > defaults for the option spec
    {name: (converter, default)}."""
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for name, (conv, default) in spec.items():
        cli_val = getattr(args, name, None)
        if cli_val is not None:
            resolved[name] = cli_val
        elif name in file_values:
            resolved[name] = conv(file_values[name])
        else:
            resolved[name] = default
    return resolved


def _variant(s: str) -> MapVariant:
    try:
        return MapVariant(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"variant must be 'reversible' or 'irreversible', got {s!r}")


def _scheme(s: str) -> ReversalScheme:
    try:
        return ReversalScheme(s.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(f"scheme must be 'q4' or 'q3', got {s!r}")


def _params_from(resolved: dict) -> MapParams:
    return MapParams(
        ell=resolved["ell"],
        q=resolved["q"],
        strip_x=resolved.get("strip_x"),
        strip_eps=resolved.get("strip_eps"),
    )


def _write_manifest(out_dir: Path, command: str, resolved: dict, artifacts: list[str], t0: float):
    def jsonable(v):
        if isinstance(v, (MapVariant, ReversalScheme)):
            return v.value
        if isinstance(v, np.ndarray):
            return v.tolist()
        return v

    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: jsonable(v) for k, v in sorted(resolved.items())},
        "seed": resolved.get("seed"),
        "artifacts": artifacts,
        "wall_time_s": round(time.time() - t0, 3),
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(resolved: dict, command: str) -> Path:
    out = Path(resolved["out"] if resolved.get("out") else f"bakerlab_out/{command}")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def _cmd_density(args) -> int:
    spec = {
        "ell": (float, 0.15),
        "q": (float, 0.0),
        "variant": (_variant, MapVariant.REVERSIBLE),
        "strip_x": (float, None),
        "strip_eps": (float, None),
        "n_ens": (int, 20_000),
        "n_iter": (int, 50),
        "burn_in": (int, 1_000),
        "bins": (int, 500),
        "seed": (int, 0),
        "out": (str, None),
    }
    resolved = _resolve(args, spec)
    t0 = time.time()
    config = es.SimConfig(
        params=_params_from(resolved),
        variant=resolved["variant"],
        n_ens=resolved["n_ens"],
        n_iter=resolved["n_iter"],
        burn_in=resolved["burn_in"],
        seed=resolved["seed"],
    )
    nb = resolved["bins"]
    hist = es.empirical_density(config, nx=nb, ny=nb)
    out = _out_dir(resolved, "density")
    es.write_histogram_csv(hist, out / "histogram2d.csv", out / "histogram2d.json", config)
    with open(out / "marginals.csv", "w", newline="") as fh:
        fh.write("axis,bin,center,count,density\n")
        for axis, counts in (("x", hist.x_marginal()), ("y", hist.y_marginal())):
            dens = counts * nb / max(hist.n_samples, 1)
            for i, (c, d) in enumerate(zip(counts, dens)):
                center = (i + 0.5) / nb
                fh.write(f"{axis},{i},{_fmt(center)},{int(c)},{_fmt(d)}\n")
    _write_manifest(out, "density", resolved, ["histogram2d.csv", "histogram2d.json", "marginals.csv"], t0)
    print(f"density: wrote {out}/histogram2d.csv ({hist.n_samples} samples)")
    return 0


def _cmd_surface(args) -> int:
    spec = {
        "ell_min": (float, 0.05),
        "ell_max": (float, 0.25),
        "ell_steps": (int, 21),
        "q_min": (float, 0.0),
        "q_max": (float, 0.4),
        "q_steps": (int, 21),
        "out": (str, None),
    }
    resolved = _resolve(args, spec)
    t0 = time.time()
    ells = np.linspace(resolved["ell_min"], resolved["ell_max"], resolved["ell_steps"])
    qs = np.linspace(resolved["q_min"], resolved["q_max"], resolved["q_steps"])
    out = _out_dir(resolved, "surface")
    negatives = 0
    with open(out / "surface.csv", "w", newline="") as fh:
        fh.write("ell,q,mean_lambda\n")
        for ell in ells:
            for q in qs:
                v = mk.mean_contraction_rate(float(ell), float(q))
                if v < -1e-12:
                    negatives += 1
                fh.write(f"{_fmt(ell)},{_fmt(q)},{_fmt(v)}\n")
    _write_manifest(out, "surface", resolved, ["surface.csv"], t0)
    if negatives:
        print(f"surface: WARNING {negatives} grid cells have negative mean contraction rate")
    print(f"surface: wrote {out}/surface.csv ({len(ells) * len(qs)} cells)")
    return 0


def _fr_spec():
    return {
        "ell": (float, 0.15),
        "q": (float, 0.2),
        "variant": (_variant, MapVariant.REVERSIBLE),
        "strip_x": (float, None),
        "strip_eps": (float, None),
        "n": (int, 200),
        "delta": (float, 0.05),
        "p_max": (float, 2.0),
        "source": (str, "exact"),
        "min_count": (int, 25),
        "n_ens": (int, 10_000),
        "n_iter": (int, 2_000),
        "burn_in": (int, 1_000),
        "seed": (int, 0),
        "out": (str, None),
    }


def _fr_histogram(resolved):
    fr_cfg = fl.FRConfig(
        n=resolved["n"],
        p_grid=fl.symmetric_grid(resolved["p_max"], 2.0 * resolved["delta"]),
        delta=resolved["delta"],
        min_count=resolved["min_count"],
    )
    if resolved["source"] == "exact":
        dist = mk.contraction_sum_distribution(resolved["ell"], resolved["q"], resolved["n"])
        return fr_cfg, fl.estimate_pi(fr_cfg, dist)
    sim = es.SimConfig(
        params=_params_from(resolved),
        variant=resolved["variant"],
        n_ens=resolved["n_ens"],
        n_iter=resolved["n_iter"],
        burn_in=resolved["burn_in"],
        seed=resolved["seed"],
    )
    return fr_cfg, fl.estimate_pi(fr_cfg, sim)


def _write_fr_sidecar(out, resolved, name="fr_meta.json"):
    sidecar = {
        "n": resolved["n"],
        "delta": resolved["delta"],
        "ell": resolved["ell"],
        "q": resolved["q"],
        "seed": resolved["seed"],
        "source": resolved["source"],
    }
    with open(out / name, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_fr(args) -> int:
    resolved = _resolve(args, _fr_spec())
    if resolved["source"] not in ("mc", "exact"):
        print(f"fr: error: source must be 'mc' or 'exact', got {resolved['source']!r}", file=sys.stderr)
        return _USAGE_EXIT
    t0 = time.time()
    fr_cfg, pi = _fr_histogram(resolved)
    out = _out_dir(resolved, "fr")
    with open(out / "pi.csv", "w", newline="") as fh:
        fh.write("p,pi_n\n")
        for p, m in zip(pi.p, pi.mass):
            fh.write(f"{_fmt(p)},{_fmt(m)}\n")
    rf = fl.rate_function(pi)
    with open(out / "zeta.csv", "w", newline="") as fh:
        fh.write("p,zeta_n\n")
        for p, z in zip(rf.p, rf.zeta):
            if np.isfinite(z):
                fh.write(f"{_fmt(p)},{_fmt(z)}\n")
    try:
        chk = fl.fr_check(pi)
    except InsufficientFluctuationsError as exc:
        print(f"fr: error: {exc}", file=sys.stderr)
        return _NUMERIC_EXIT
    with open(out / "fr.csv", "w", newline="") as fh:
        fh.write("p,fr_value\n")
        for p, v in zip(chk.p, chk.value):
            fh.write(f"{_fmt(p)},{_fmt(v)}\n")
    _write_fr_sidecar(out, resolved)
    _write_manifest(out, "fr", resolved, ["pi.csv", "zeta.csv", "fr.csv", "fr_meta.json"], t0)
    print(f"fr: slope={chk.slope:.6f} over {len(chk.p)} admissible p; wrote {out}")
    return 0


def _cmd_ratefunc(args) -> int:
    resolved = _resolve(args, _fr_spec())
    if resolved["source"] not in ("mc", "exact"):
        print(f"ratefunc: error: source must be 'mc' or 'exact'", file=sys.stderr)
        return _USAGE_EXIT
    t0 = time.time()
    fr_cfg, pi = _fr_histogram(resolved)
    rf = fl.rate_function(pi)
    fit = fl.fit_parabola(rf)
    out = _out_dir(resolved, "ratefunc")
    with open(out / "pi.csv", "w", newline="") as fh:
        fh.write("p,pi_n\n")
        for p, m in zip(pi.p, pi.mass):
            fh.write(f"{_fmt(p)},{_fmt(m)}\n")
    with open(out / "zeta.csv", "w", newline="") as fh:
        fh.write("p,zeta_n\n")
        for p, z in zip(rf.p, rf.zeta):
            if np.isfinite(z):
                fh.write(f"{_fmt(p)},{_fmt(z)}\n")
    with open(out / "parabola_fit.json", "w") as fh:
        json.dump(
            {"a": fit.a, "b": fit.b, "residual": fit.residual, "n_points": fit.n_points},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    _write_fr_sidecar(out, resolved)
    _write_manifest(out, "ratefunc", resolved, ["pi.csv", "zeta.csv", "parabola_fit.json", "fr_meta.json"], t0)
    print(f"ratefunc: a={fit.a:.6f} b={fit.b:.6f}; wrote {out}")
    return 0


def _cmd_db(args) -> int:
    spec = {
        "ell": (float, 0.15),
        "q": (float, 0.0),
        "scheme": (_scheme, ReversalScheme.Q4),
        "out": (str, None),
    }
    resolved = _resolve(args, spec)
    t0 = time.time()
    report = mk.db_report(resolved["ell"], resolved["q"], resolved["scheme"])
    out = _out_dir(resolved, "db")
    with open(out / "db.csv", "w", newline="") as fh:
        fh.write("from,to,forward_weight,reverse_from,reverse_to,reverse_weight,mismatch\n")
        for p in report.pairs:
            fh.write(
                f"{p.source.name},{p.target.name},{_fmt(p.forward_weight)},"
                f"{p.reverse_source.name},{p.reverse_target.name},"
                f"{_fmt(p.reverse_weight)},{_fmt(p.mismatch)}\n"
            )
    _write_manifest(out, "db", resolved, ["db.csv"], t0)
    print(f"db: max mismatch = {report.max_mismatch:.17g}; wrote {out}/db.csv")
    return 0


def _cmd_transport(args) -> int:
    spec = {
        "ell": (float, 0.25),
        "q": (float, None),
        "variant": (_variant, MapVariant.REVERSIBLE),
        "strip_x": (float, None),
        "strip_eps": (float, None),
        "mode": (str, "equilibrium"),
        "n_ens": (int, 100_000),
        "n_iter": (int, 50),
        "burn_in": (int, 1_000),
        "seed": (int, 0),
        "k_max": (int, 50),
        "sweep": (str, None),
        "out": (str, None),
    }
    resolved = _resolve(args, spec)
    if resolved["mode"] not in ("equilibrium", "stationary"):
        print("transport: error: mode must be 'equilibrium' or 'stationary'", file=sys.stderr)
        return _USAGE_EXIT
    t0 = time.time()
    out = _out_dir(resolved, "transport")

    if resolved["sweep"]:
        biases = [float(tok) for tok in resolved["sweep"].split(",") if tok.strip()]
        base = tp.GKConfig(
            params=MapParams(ell=0.25, q=0.0),
            variant=resolved["variant"],
            n_ens=resolved["n_ens"],
            n_iter=resolved["n_iter"],
            seed=resolved["seed"],
            ensemble_mode="stationary",
            burn_in=resolved["burn_in"],
        )
        rows = tp.bias_sweep(np.array(biases), base)
        bad = sum(0 if r.converged else 1 for _, r in rows)
        with open(out / "sweep.csv", "w", newline="") as fh:
            fh.write("F_e,L,stderr\n")
            for b, r in rows:
                fh.write(f"{_fmt(b)},{_fmt(r.value)},{_fmt(r.stderr)}\n")
        _write_manifest(out, "transport", resolved, ["sweep.csv"], t0)
        print(f"transport: swept {len(rows)} bias values; wrote {out}/sweep.csv")
        if bad:
            print(f"transport: error: {bad} sweep entries failed the convergence check", file=sys.stderr)
            return _NUMERIC_EXIT
        return 0

    q = resolved["q"]
    if q is None:
        q = 0.5 - 2.0 * resolved["ell"]
    mode = "microcanonical-equilibrium" if resolved["mode"] == "equilibrium" else "stationary"
    cfg = tp.GKConfig(
        params=MapParams(
            ell=resolved["ell"],
            q=q,
            strip_x=resolved["strip_x"],
            strip_eps=resolved["strip_eps"],
        ),
        variant=resolved["variant"],
        n_ens=resolved["n_ens"],
        n_iter=resolved["n_iter"],
        seed=resolved["seed"],
        ensemble_mode=mode,
        burn_in=resolved["burn_in"],
    )
    result = tp.green_kubo_estimate(cfg)
    exact = tp.green_kubo_exact(resolved["ell"], resolved["k_max"])
    with open(out / "convergence.csv", "w", newline="") as fh:
        fh.write("k,partial_sum\n")
        for k, ps in enumerate(result.partial_sums):
            fh.write(f"{k},{_fmt(ps)}\n")
    with open(out / "convergence_exact.csv", "w", newline="") as fh:
        fh.write("k,partial_sum\n")
        for k, ps in enumerate(exact.partial_sums):
            fh.write(f"{k},{_fmt(ps)}\n")
    _write_manifest(out, "transport", resolved, ["convergence.csv", "convergence_exact.csv"], t0)
    print(
        f"transport: L={result.value:.6f} +- {result.stderr:.6f} "
        f"(exact chain: {exact.value:.6f}); wrote {out}"
    )
    if not result.converged:
        print("transport: error: partial sums did not converge", file=sys.stderr)
        return _NUMERIC_EXIT
    return 0


# ---------------------------------------------------------------- selftest


def _selftest_checks():
    ells = [0.05, 0.1, 0.15, 0.2, 0.25]

    def density_fixed_point():
        for ell in ells:
            T = mk.transfer_matrix(ell)
            rho = np.array(mk.stationary_density(ell))
            if np.abs(T @ rho - rho).max() > 1e-14:
                return f"transfer fixed point fails at ell={ell}"
            if abs(rho.mean() - 1.0) > 1e-14:
                return f"density normalization fails at ell={ell}"

    def coarse_measure_checks():
        for ell in ells:
            mu = mk.coarse_measure(ell)
            P = mk.transition_matrix(ell)
            if np.abs(mu @ P - mu).max() > 1e-15:
                return f"stationarity fails at ell={ell}"
            rho = mk.stationary_density(ell)
            ref = [rho.rho_l * ell, rho.rho_l * (0.5 - ell), rho.rho_r / 4, rho.rho_r / 4]
            if np.abs(mu - np.array(ref)).max() > 1e-14:
                return f"measure/density relation fails at ell={ell}"

    def transition_structure():
        for ell in ells:
            P = mk.transition_matrix(ell)
            if np.abs(P.sum(axis=1) - 1).max() > 1e-15:
                return f"rows not stochastic at ell={ell}"
            expansion = np.array([1 / (2 * ell), 1 / (1 - 2 * ell), 2.0, 2.0])
            nz = P > 0
            target_rate = np.tile(1 / expansion, (4, 1))
            if np.abs(P[nz] - target_rate[nz]).max() > 1e-14:
                return f"p_ij != 1/expansion_j at ell={ell}"

    def equilibrium_line():
        for ell in ells:
            if abs(mk.mean_contraction_rate(ell, 0.0)) > 1e-14:
                return f"mean rate not 0 at ell={ell}, q=0"

    def db_equilibrium():
        for ell in ells:
            rep = mk.db_report(ell, 0.0, ReversalScheme.Q4)
            if rep.max_mismatch != 0.0:
                return f"q=0/Q4 mismatch {rep.max_mismatch} at ell={ell}"

    def db_nonequilibrium():
        rep = mk.db_report(0.15, 0.2, ReversalScheme.Q3)
        if rep.max_mismatch <= 0.1:
            return "Q3 violation not detected at ell=0.15"
        rep = mk.db_report(0.25, 0.0, ReversalScheme.Q3)
        if rep.max_mismatch != 0.0:
            return f"Q3 mismatch {rep.max_mismatch} at ell=1/4"

    def reversal_identity():
        for ell in (0.15, 0.25):
            rep = check_reversibility(MapParams(ell=ell, q=0.0), 2_000, seed=1)
            if rep.max_deviation > 1e-12:
                return f"M G M = G fails at ell={ell}: {rep.max_deviation}"
        gen = np.random.Generator(np.random.Philox(key=np.uint64(5)))
        pts = gen.random((2_000, 2))
        gx, gy = time_reversal_arrays(pts[:, 0], pts[:, 1])
        ggx, ggy = time_reversal_arrays(gx, gy)
        if max(np.abs(ggx - pts[:, 0]).max(), np.abs(ggy - pts[:, 1]).max()) > 1e-14:
            return "time reversal is not an involution"

    def jacobian_pairing():
        gen = np.random.Generator(np.random.Philox(key=np.uint64(6)))
        pts = gen.random((2_000, 2))
        for ell in (0.15, 0.25):
            params = MapParams(ell=ell, q=0.0)
            J = jacobians(params)
            from .mapcore import region_indices, step_arrays

            x, y = pts[:, 0], pts[:, 1]
            r0 = region_indices(x, ell)
            fx, fy, _ = step_arrays(x, y, params)
            gx, gy = time_reversal_arrays(fx, fy)
            r1 = region_indices(gx, ell)
            if np.abs(J[r0] * J[r1] - 1.0).max() > 1e-12:
                return f"pairing fails at ell={ell}"

    def reversal_schemes():
        for scheme in ReversalScheme:
            for r in Region:
                if region_reverse(region_reverse(r, scheme), scheme) != r:
                    return f"{scheme.value} is not an involution"
        for r in Region:
            if abs(tp.PSI[region_reverse(r, ReversalScheme.Q3)] + tp.PSI[r]) > 0:
                return "current not odd under Q3"

    def bias_round_trip():
        for ell in ells:
            if abs(tp.ell_of_bias(tp.bias_of_ell(ell)) - ell) > 1e-14:
                return f"bias round trip fails at ell={ell}"

    def exact_transport():
        g = tp.green_kubo_exact(0.25, 30)
        if abs(g.value - 0.75) > 1e-14:
            return f"L(0) = {g.value} != 3/4"
        if np.abs(g.partial_sums[1:] - 0.75).max() > 1e-14:
            return "partial sums not flat after k=2"

    def exact_distribution():
        d = mk.contraction_sum_distribution(0.15, 0.2, 500)
        if abs(d.probs.sum() - 1.0) > 1e-12:
            return f"mass {d.probs.sum()} != 1 at n=500"
        if abs(d.mean_time_average() - mk.mean_contraction_rate(0.15, 0.2)) > 1e-10:
            return "stationary mean broken at n=500"

    return [
        ("transfer operator fixed point and normalization", density_fixed_point),
        ("coarse measure stationarity and density relation", coarse_measure_checks),
        ("transition matrix structure", transition_structure),
        ("mean contraction rate vanishes on the q=0 line", equilibrium_line),
        ("detailed balance exact at q=0 under Q4", db_equilibrium),
        ("detailed balance violated off equilibrium under Q3", db_nonequilibrium),
        ("time reversal involution and M G M = G at q=0", reversal_identity),
        ("Jacobian pairing at q=0", jacobian_pairing),
        ("reversal schemes are involutions; current odd under Q3", reversal_schemes),
        ("bias round trip", bias_round_trip),
        ("exact transport coefficient at ell=1/4", exact_transport),
        ("exact contraction distribution normalization", exact_distribution),
    ]


def _cmd_selftest(args) -> int:
    failures = 0
    for name, fn in _selftest_checks():
        try:
            detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            detail = f"raised {type(exc).__name__}: {exc}"
        if detail is None:
            print(f"ok   {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {detail}")
    if failures:
        print(f"selftest: {failures} check(s) failed")
        return _SELFTEST_EXIT
    print("selftest: all checks passed")
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, *names):
    table = {
        "ell": lambda: p.add_argument("--ell", type=float),
        "q": lambda: p.add_argument("--q", type=float),
        "variant": lambda: p.add_argument("--variant", type=_variant),
        "strip_x": lambda: p.add_argument("--strip-x", dest="strip_x", type=float),
        "strip_eps": lambda: p.add_argument("--strip-eps", dest="strip_eps", type=float),
        "n": lambda: p.add_argument("--n", type=int),
        "n_ens": lambda: p.add_argument("--n-ens", dest="n_ens", type=int),
        "n_iter": lambda: p.add_argument("--n-iter", dest="n_iter", type=int),
        "burn_in": lambda: p.add_argument("--burn-in", dest="burn_in", type=int),
        "seed": lambda: p.add_argument("--seed", type=int),
        "delta": lambda: p.add_argument("--delta", type=float),
        "bins": lambda: p.add_argument("--bins", type=int),
        "source": lambda: p.add_argument("--source", choices=["mc", "exact"]),
        "scheme": lambda: p.add_argument("--scheme", type=_scheme),
        "out": lambda: p.add_argument("--out", type=str),
        "config": lambda: p.add_argument("--config", type=str),
        "p_max": lambda: p.add_argument("--p-max", dest="p_max", type=float),
        "min_count": lambda: p.add_argument("--min-count", dest="min_count", type=int),
        "mode": lambda: p.add_argument("--mode", choices=["equilibrium", "stationary"]),
        "k_max": lambda: p.add_argument("--k-max", dest="k_max", type=int),
        "sweep": lambda: p.add_argument("--sweep", type=str, help="comma-separated bias values"),
    }
    for name in names:
        table[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bakerlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bakerlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("density", help="2-d invariant-density histogram and marginals")
    _add_common(p, "ell", "q", "variant", "strip_x", "strip_eps", "n_ens", "n_iter",
                "burn_in", "bins", "seed", "out", "config")
    p.set_defaults(fn=_cmd_density)

    p = sub.add_parser("surface", help="mean contraction rate over an (ell, q) grid")
    for flag in ("ell-min", "ell-max", "q-min", "q-max"):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=float)
    for flag in ("ell-steps", "q-steps"):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=int)
    _add_common(p, "out", "config")
    p.set_defaults(fn=_cmd_surface)

    p = sub.add_parser("fr", help="probability cells, rate function and fluctuation-relation check")
    _add_common(p, "ell", "q", "variant", "strip_x", "strip_eps", "n", "delta", "p_max",
                "source", "min_count", "n_ens", "n_iter", "burn_in", "seed", "out", "config")
    p.set_defaults(fn=_cmd_fr)

    p = sub.add_parser("ratefunc", help="rate function with parabola fit")
    _add_common(p, "ell", "q", "variant", "strip_x", "strip_eps", "n", "delta", "p_max",
                "source", "min_count", "n_ens", "n_iter", "burn_in", "seed", "out", "config")
    p.set_defaults(fn=_cmd_ratefunc)

    p = sub.add_parser("db", help="detailed-balance report")
    _add_common(p, "ell", "q", "scheme", "out", "config")
    p.set_defaults(fn=_cmd_db)

    p = sub.add_parser("transport", help="Green-Kubo transport estimate or bias sweep")
    _add_common(p, "ell", "q", "variant", "strip_x", "strip_eps", "mode", "n_ens", "n_iter",
                "burn_in", "seed", "k_max", "sweep", "out", "config")
    p.set_defaults(fn=_cmd_transport)

    p = sub.add_parser("selftest", help="run the analytic invariant battery")
    p.set_defaults(fn=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BakerlabError as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except OSError as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return _NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
