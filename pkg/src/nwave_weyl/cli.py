"""Command-line front end.

Each subcommand reads one JSON config, writes CSV/JSON outputs to ``--out``
and a ``manifest.json`` recording the config hash and the residuals computed.
Exit status: 0 on success, 2 for configuration errors, 1 for numerical
failures (with ``error.json`` in the output directory).
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as nio
from .borg_marchenko import BumpPerturbedWeyl, PipelineConfig, RaySpec, bm_verdict
from .errors import InvalidDarbouxData, InvalidInput, NWaveError
from .evolution import nwave_residual, solve_ibvp
from ._quadrature import frob
from .gbdt import (ClosedFormExample, identity_defect, init_gbdt, propagate_gbdt,
                   transformed_potential, transformed_weyl, verify_darboux_ode)
from .inverse_solver import identity_report, inversion_pipeline
from .potentials import (DEFAULT_SPECTRA, RandomPotential, bump_potential,
                         constant_potential)
from .spectral_core import (ConstantPotentialWeyl, DiagonalSpectrum, PotentialGrid,
                            SpectralLine, WeylTable, default_eta, fundamental_solution,
                            validate_weyl, weyl_marchenko)

log = logging.getLogger("nwave_weyl")

COMMANDS = ("forward", "weyl", "invert", "roundtrip", "gbdt", "evolve", "bm", "identities")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _get(cfg, key, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing config key '{key}'")
        return default
    return cfg[key]


def _positive(cfg, key, default=None, kind=float):
    v = _get(cfg, key, default, required=default is None)
    try:
        v = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' must be a number") from exc
    if v <= 0:
        raise ConfigError(f"'{key}' must be positive")
    return v


def _spectrum(cfg, key="D"):
    d = _get(cfg, key)
    if d is None:
        m = int(_get(cfg, "m", 2))
        if m not in DEFAULT_SPECTRA:
            raise ConfigError(f"no default spectrum for m={m}; give '{key}'")
        d = DEFAULT_SPECTRA[m]
    try:
        return DiagonalSpectrum(d)
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from exc


def _complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _line(cfg, M_bound=0.0, eta=None):
    eta = float(_get(cfg, "eta", eta if eta is not None else 5.0))
    lam = _positive(cfg, "Lambda", 200.0)
    step = _positive(cfg, "delta_lambda", 0.05)
    try:
        return SpectralLine.uniform(eta, lam, step, M_bound=float(_get(cfg, "M_bound", M_bound)))
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from exc


def _potential(spec, D, L, N):
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return PotentialGrid.zero(D.m, L, N)
    if kind == "constant":
        return constant_potential(_complex(spec.get("q", 1.0)), L, N)
    if kind == "random":
        return PotentialGrid.from_function(
            RandomPotential(D.m, L, int(spec.get("seed", 0)), int(spec.get("modes", 3)),
                            float(spec.get("sup_norm", 0.4))), L, N)
    if kind == "bump":
        return bump_potential(float(spec.get("amplitude", 0.5)), L, N, m=D.m)
    if kind == "csv":
        return nio.read_potential(spec["path"])
    raise ConfigError(f"unknown potential kind '{kind}'")


def _weyl_source(cfg, D, line_cfg=None):
    """Weyl table from ``table`` (CSV path), ``q`` (closed form) or ``potential``."""
    if "table" in cfg:
        return nio.read_weyl_table(cfg["table"])
    if "q" in cfg:
        fn = ConstantPotentialWeyl(D, _complex(cfg["q"]))
        line = _line(cfg, fn.M_bound)
        return WeylTable(line, fn(line.z), alpha=fn.alpha, alpha_skew=True)
    if "potential" in cfg:
        L = _positive(cfg["potential"], "L", 1.0)
        N = _positive(cfg["potential"], "N", 400, int)
        zeta = _potential(cfg["potential"], D, L, N)
        line = _line(cfg, eta=default_eta(zeta))
        return weyl_marchenko(D, zeta, line)
    raise ConfigError("give one of 'table', 'q' or 'potential'")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_forward(cfg, out):
    D = _spectrum(cfg)
    L = _positive(cfg, "L", 1.0)
    N = _positive(cfg, "N", 200, int)
    zeta = _potential(cfg.get("potential", {}), D, L, N)
    zs = [_complex(z) for z in cfg.get("z", [[0.0, -1.0]])]
    residuals = {}
    files = []
    for i, z in enumerate(zs):
        w = fundamental_solution(D, zeta, z)
        path = out / f"w_{i}.csv"
        nio.write_matrix_csv(path, w.x, w.values, "x", "w")
        files.append(path.name)
        det_err = np.abs(np.linalg.det(w.values) - np.exp(1j * z * w.x * D.entries.sum()))
        residuals[f"z{i}"] = {"z": [z.real, z.imag], "richardson": w.error_estimate,
                              "det_identity": float(np.max(det_err))}
    return {"outputs": files, "residuals": residuals}


def cmd_weyl(cfg, out):
    D = _spectrum(cfg)
    table = _weyl_source(cfg, D)
    nio.write_weyl_table(out / "weyl.csv", table)
    rep = validate_weyl(table)
    nio.write_json(out / "validation.json", rep.as_dict())
    return {"outputs": ["weyl.csv", "weyl.json", "validation.json"],
            "residuals": {"alpha_inverse_defect": rep.inverse_alpha_defect,
                          "tail_fraction": rep.tail_fraction}}


def _diagnostics(res, D, l_values):
    reps = [identity_report(res.kernel, res.pi, D, l) for l in l_values]
    return {
        "min_eig_S": min(r.min_eig for r in reps),
        "as_identity_residual": {f"{r.l:g}": r.as_residual for r in reps},
        "k_residuals": {f"{r.l:g}": {"KK_star": r.unitary_defect, "first": r.res_51,
                                      "second": r.res_52, "kernel_identity": r.res_315,
                                      "T_symmetry": r.T_asymmetry} for r in reps},
        "alpha": nio.complex_to_json(res.alpha),
        "alpha_hat": nio.complex_to_json(res.alpha_hat),
    }


def cmd_invert(cfg, out):
    D = _spectrum(cfg)
    table = _weyl_source(cfg, D)
    L = _positive(cfg, "L", 1.0)
    N = _positive(cfg, "N", 200, int)
    res = inversion_pipeline(table, D, L, N)
    nio.write_potential(out / "zeta.csv", res.zeta)
    ls = cfg.get("diagnostic_l", [L / 2, L])
    diag = _diagnostics(res, D, ls)
    nio.write_json(out / "diagnostics.json", diag)
    summary = {"outputs": ["zeta.csv", "diagnostics.json"], "residuals": diag}
    if "q" in cfg:
        q = _complex(cfg["q"])
        truth = np.array([[0, -q], [np.conj(q), 0]])
        x = res.zeta.x
        sel = (x >= 0.05 * L) & (x <= 0.95 * L)
        err = np.max(np.abs(res.zeta.values[sel] - truth)) / np.max(np.abs(truth))
        summary["residuals"]["constant_potential_error"] = float(err)
    return summary


def cmd_roundtrip(cfg, out):
    L = _positive(cfg, "L", 1.0)
    N = _positive(cfg, "N", 200, int)
    seeds = cfg.get("seeds")
    if seeds is None:
        base = int(_get(cfg, "seed", 0))
        seeds = list(range(base, base + int(cfg.get("count", 1))))
    ms = cfg.get("m_values", [int(cfg.get("m", 2))])
    rows = []
    for m in ms:
        D = _spectrum({"m": m, **({"D": cfg["D"]} if "D" in cfg and len(ms) == 1 else {})})
        for s in seeds:
            pot = RandomPotential(m, L, int(s), sup_norm=float(cfg.get("sup_norm", 0.4)))
            fine = PotentialGrid.from_function(pot, L, int(cfg.get("forward_N", 2 * N)))
            line = _line(cfg, eta=default_eta(fine))
            table = weyl_marchenko(D, fine, line)
            res = inversion_pipeline(table, D, L, N)
            truth = pot(res.zeta.x)
            scale = float(np.max(np.abs(truth)))
            err = float(np.max(np.abs(res.zeta.values - truth)))
            rows.append((m, int(s), N, err, err / scale))
    with open(out / "errors.csv", "w") as fh:
        fh.write("m,seed,N,sup_error,relative_error\n")
        for m, s, n, e, r in rows:
            fh.write(f"{m},{s},{n},{nio.FLOAT_FMT % e},{nio.FLOAT_FMT % r}\n")
    return {"outputs": ["errors.csv"],
            "residuals": {"max_relative_error": max(r[-1] for r in rows)}}


def _gbdt_triple(cfg):
    if "seed_file" in cfg:
        A, S0, Pi0 = nio.read_gbdt_seed(cfg["seed_file"])
    elif "seed_data" in cfg:
        A, S0, Pi0 = nio.read_gbdt_seed(cfg["seed_data"])
    else:
        raise ConfigError("give 'seed_file' or 'seed_data' with {A, S0, Pi0}")
    try:
        return init_gbdt(A, S0, Pi0)
    except InvalidDarbouxData as exc:
        raise ConfigError(str(exc)) from exc


def cmd_gbdt(cfg, out):
    D = _spectrum(cfg)
    L = _positive(cfg, "L", 1.0)
    N = _positive(cfg, "N", 200, int)
    zeta = _potential(cfg.get("potential", {}), D, L, N)
    tr = propagate_gbdt(_gbdt_triple(cfg), D, zeta, substeps=int(cfg.get("substeps", 2)))
    zt, defect = transformed_potential(tr, D, zeta)
    nio.write_potential(out / "zeta_tilde.csv", zt)
    zs = [_complex(z) for z in cfg.get("z", [[0.0, -5.0]])]
    ode = {f"z{i}": verify_darboux_ode(tr, D, zeta, z) for i, z in enumerate(zs)}
    outputs = ["zeta_tilde.csv"]
    if zeta.sup_norm() == 0:
        line = _line(cfg, eta=float(cfg.get("eta", 5.0)))
        seed = WeylTable(line, np.broadcast_to(np.eye(D.m), line.z.shape + (D.m, D.m)).copy(),
                         alpha=np.zeros((D.m, D.m)))
        wt = transformed_weyl(tr, D, zeta, seed)
        nio.write_weyl_table(out / "weyl_tilde.csv", wt)
        outputs += ["weyl_tilde.csv", "weyl_tilde.json"]
    return {"outputs": outputs,
            "residuals": {"operator_identity_along_x": tr.identity_residual,
                          "min_eig_S": tr.min_eig, "skew_defect": defect,
                          "darboux_ode": ode}}


def cmd_evolve(cfg, out):
    D = _spectrum(cfg)
    Db = _spectrum(cfg, "D_breve") if "D_breve" in cfg else DiagonalSpectrum(D.entries[::-1])
    table = _weyl_source(cfg, D)
    X = _positive(cfg, "X", 0.5)
    T = _positive(cfg, "T", 0.5)
    Nx = _positive(cfg, "Nx", 20, int)
    Nt = _positive(cfg, "Nt", 20, int)
    sol = solve_ibvp(table, D, Db, X, T, Nx, Nt)
    files = []
    for k, t in enumerate(sol.t):
        name = f"u_t{k:04d}.csv"
        nio.write_matrix_csv(out / name, sol.x, sol.u[k], "x", "u")
        files.append(name)
    rmax, rmean = nwave_residual(sol.u, sol.x, sol.t, D, Db)
    d = Db.entries
    bnd = (d[:, None] - d[None, :]) * sol.u[:, 0] - sol.boundary_zeta
    summary = {"max": rmax, "mean": rmean, "boundary": float(np.max(np.abs(bnd))),
               "hermitian_defect": sol.hermitian_defect}
    manifest = {"X": X, "T": T, "grids": {"x": sol.x, "t": sol.t}, "files": files,
                "residual_summary": summary, "notes": sol.evolution.notes}
    nio.write_json(out / "u_manifest.json", manifest)
    return {"outputs": files + ["u_manifest.json"], "residuals": summary}


def cmd_bm(cfg, out):
    D = _spectrum(cfg)
    q = _complex(cfg.get("q", 1.0))
    base = ConstantPotentialWeyl(D, q)
    pair = cfg.get("pair", "bump")
    if pair == "identical":
        phi1 = phi2 = base
    elif pair == "bump":
        B = nio.complex_from_json(cfg["B"]) if "B" in cfg else 0.3 * np.eye(D.m)[::-1]
        a, b = cfg.get("support", [1.2, 1.8])
        phi1, phi2 = BumpPerturbedWeyl(base, D, B, a, b), base
    elif pair == "shifted-q":
        phi1, phi2 = ConstantPotentialWeyl(D, _complex(cfg.get("q2", 1.25))), base
    else:
        raise ConfigError(f"unknown pair '{pair}'")
    pc = PipelineConfig(eta=float(cfg.get("eta", 3.0)), half_width=float(cfg.get("Lambda", 200.0)),
                        step=float(cfg.get("delta_lambda", 0.05)))
    if "ray" in cfg:
        r = cfg["ray"]
        pc.ray = RaySpec(float(r.get("c", 0.0)),
                         np.geomspace(r.get("t_min", 6.0), r.get("t_max", 100.0), r.get("n", 60)))
    verdicts = {}
    for l in cfg.get("l", [1.0, 2.0]):
        verdicts[f"{l:g}"] = bm_verdict(phi1, phi2, float(l), D, pc).as_dict()
    nio.write_json(out / "verdict.json", verdicts)
    return {"outputs": ["verdict.json"], "residuals": verdicts}


def cmd_identities(cfg, out):
    D = _spectrum(cfg)
    q = _complex(cfg.get("q", 1.0))
    L = _positive(cfg, "L", 1.0)
    N = _positive(cfg, "N", 200, int)
    fn = ConstantPotentialWeyl(D, q)
    line = _line(cfg, fn.M_bound)
    table = WeylTable(line, fn(line.z), alpha=fn.alpha)
    res = inversion_pipeline(table, D, L, N)
    diag = _diagnostics(res, D, cfg.get("l", [L / 2, L]))
    battery = {"AS_identity": diag["as_identity_residual"], "positivity_min_eig": diag["min_eig_S"],
               "kernel_identity": {k: v["kernel_identity"] for k, v in diag["k_residuals"].items()},
               "first_endpoint_identity": {k: v["first"] for k, v in diag["k_residuals"].items()},
               "second_endpoint_identity": {k: v["second"] for k, v in diag["k_residuals"].items()}}
    gcfg = cfg.get("gbdt")
    if gcfg is not None:
        tr0 = _gbdt_triple(gcfg)
    elif D.m == 2:
        tr0 = ClosedFormExample(0.3 + 1.0j, np.array([[1.0, 0.5], [0.2, 1.0]]), D).triple()
    else:
        tr0 = None
    if tr0 is not None:
        zeta = PotentialGrid.zero(D.m, L, N)
        # RK4 keeps the operator identity only to O(h^4): refine to h <= 1/800
        sub = max(2, int(np.ceil(800 * L / N)))
        tr = propagate_gbdt(tr0, D, zeta, substeps=sub)
        h = tr.x[1] - tr.x[0]
        PDP = (tr.Pi * D.entries) @ np.conj(np.swapaxes(tr.Pi, -1, -2))
        dS = (tr.S[2:] - tr.S[:-2]) / (2 * h) - PDP[1:-1]
        battery["gbdt_seed_identity"] = float(identity_defect(tr0.A, tr0.S0, tr0.Pi0))
        battery["gbdt_identity_along_x"] = tr.identity_residual
        battery["gbdt_S_derivative"] = float(np.max(frob(dS)) / np.max(frob(PDP)))
        battery["darboux_ode"] = verify_darboux_ode(tr, D, zeta, -5j)
    nio.write_json(out / "identities.json", battery)
    return {"outputs": ["identities.json"], "residuals": battery}


HANDLERS = {
    "forward": cmd_forward, "weyl": cmd_weyl, "invert": cmd_invert, "roundtrip": cmd_roundtrip,
    "gbdt": cmd_gbdt, "evolve": cmd_evolve, "bm": cmd_bm, "identities": cmd_identities,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _configure_threads():
    n = os.environ.get("NWAVE_THREADS")
    if not n:
        return None
    try:
        n = max(1, int(n))
    except ValueError:
        raise ConfigError("NWAVE_THREADS must be an integer")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="nwave-weyl", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--verbose", action="store_true")
    return p


def run(command, config_path, out_dir):
    """Run one subcommand; returns the process exit status."""
    out = Path(out_dir)
    try:
        threads = _configure_threads()
        try:
            cfg = nio.read_json(config_path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = HANDLERS[command](cfg, out)
    except (ConfigError, InvalidInput, KeyError, TypeError, ValueError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    except NWaveError as exc:
        out.mkdir(parents=True, exist_ok=True)
        nio.write_json(out / "error.json", {"command": command, "error": type(exc).__name__,
                                            "message": str(exc)})
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return 1
    manifest = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "threads": threads,
        "outputs": result.get("outputs", []),
        "residuals": result.get("residuals", {}),
        "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
    }
    nio.write_json(out / "manifest.json", manifest)
    log.info("wrote %d outputs to %s", len(manifest["outputs"]), out)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return run(args.command, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
