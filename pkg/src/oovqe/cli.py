"""Command-line interface.

Subcommands: energy, scan, gradient, nac, ci-search, meci, export-model.
All runs read a JSON config file (schema in docs/formats.md) and write
``results.json`` plus, where applicable, ``scan.tsv`` / ``trajectory.tsv``
and a restartable checkpoint into the output directory.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .geometry import (FileSource, ModelSource, SystemSource,
                       build_formaldimine, ci_search_2d, geometry_key,
                       internal_jacobian, meci_search, pes_scan,
                       chain_derivatives)
from .integrals import (FormatError, OrbitalPartition, write_derivdump,
                        write_fcidump, ao_to_mo)
from .models import get_model
from .response import (DegenerateGapError, ResponseContext, analytic_gradient,
                       analytic_nac, gradient_record, nac_record)
from .savqe import (EnsembleConfig, load_checkpoint, run_sa_oo_vqe,
                    save_checkpoint)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _ensemble_config(cfg: dict, args) -> EnsembleConfig:
    tol = cfg.get("tolerances", {})
    weights = tuple(cfg.get("weights", (0.5, 0.5)))
    return EnsembleConfig(
        weights=weights,
        energy_threshold=float(tol.get("energy", 1e-8)),
        oo_gradient_threshold=float(tol.get("oo_gradient", 1e-8)),
        max_iterations=int(args.max_iter or cfg.get("max_iterations", 500)),
        include_active_active=bool(cfg.get("include_active_active", False)),
        vqe_restarts=int(cfg.get("vqe_restarts", 1)),
        seed=int(cfg.get("seed", 0)),
    )


def _partition(system: dict, n_orb: int) -> OrbitalPartition:
    n_frozen = int(system.get("frozen", 0))
    n_active = int(system.get("n_active", n_orb - n_frozen))
    return OrbitalPartition.cas(n_orb, n_frozen, n_active)


def _source(cfg: dict) -> SystemSource:
    system = cfg.get("system")
    if not isinstance(system, dict) or "kind" not in system:
        raise ConfigError("config needs a 'system' object with a 'kind'")
    kind = system["kind"]
    if kind == "model":
        model = get_model(system.get("name", "crossing3"))
        part = _partition(system, model.n_ao)
        return ModelSource(model, part)
    if kind == "files":
        for key in ("directory", "n_elec", "n_orb", "coordinates"):
            if key not in system:
                raise ConfigError(f"files system needs '{key}'")
        part = _partition(system, int(system["n_orb"]))
        params_to_coords = None
        if system.get("parametrization") == "formaldimine":
            def params_to_coords(p):
                return build_formaldimine(p[0], p[1]).flat()
        return FileSource(system["directory"], part, int(system["n_elec"]),
                          tuple(system["coordinates"]),
                          params_to_coords=params_to_coords)
    raise ConfigError(f"unknown system kind {kind!r}")


def _point(cfg: dict) -> np.ndarray:
    if "point" not in cfg:
        raise ConfigError("config needs a 'point' parameter vector")
    return np.asarray(cfg["point"], dtype=float)


def _converged_result(source, params, ens: EnsembleConfig, cfg: dict):
    ints, derivs = source.evaluate(params)
    theta0 = None
    if "restart" in cfg:
        chk = load_checkpoint(cfg["restart"])
        theta0 = chk["theta"]
        if chk["C"].shape == ints.C.shape:
            ints.C = chk["C"]
            ints.check_orthonormal()
    result = run_sa_oo_vqe(ints, ens, theta0)
    return result, derivs


def _chain_if_internal(source, derivs, params, cfg):
    """Formaldimine file runs expose (alpha, phi) derivatives by chain rule."""
    system = cfg.get("system", {})
    if system.get("kind") == "files" and (
            system.get("parametrization") == "formaldimine"):
        J = internal_jacobian(params[0], params[1]).reshape(2, -1)
        return chain_derivatives(derivs, J, ("alpha", "phi"))
    return derivs


def _write_results(outdir, payload: dict) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "results.json"), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def _result_summary(result) -> dict:
    return {
        "e0": result.e0,
        "e1": result.e1,
        "e_sa": result.e_sa,
        "phi_star": result.phi,
        "converged": bool(result.converged),
        "n_cycles": result.n_cycles,
        "off_diagonal": result.off_diagonal,
        "trace": [[phase, cycle, e] for phase, cycle, e in result.trace],
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_energy(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    params = _point(cfg)
    result, _ = _converged_result(source, params, ens, cfg)
    _write_results(args.out, {"command": "energy",
                              "point": list(map(float, params)),
                              **_result_summary(result)})
    save_checkpoint(os.path.join(args.out, "checkpoint.txt"), result)
    return EXIT_OK if result.converged else EXIT_CONVERGENCE


def cmd_gradient(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    params = _point(cfg)
    result, derivs = _converged_result(source, params, ens, cfg)
    derivs = _chain_if_internal(source, derivs, params, cfg)
    rc = ResponseContext(result)
    states = cfg.get("states", [0, 1])
    records = [gradient_record(analytic_gradient(result, s, derivs, rc))
               for s in states]
    _write_results(args.out, {"command": "gradient",
                              "point": list(map(float, params)),
                              "gradients": records,
                              **_result_summary(result)})
    return EXIT_OK if result.converged else EXIT_CONVERGENCE


def cmd_nac(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    params = _point(cfg)
    result, derivs = _converged_result(source, params, ens, cfg)
    derivs = _chain_if_internal(source, derivs, params, cfg)
    rc = ResponseContext(result)
    i, j = cfg.get("states", [0, 1])[:2]
    try:
        bv = analytic_nac(result, i, j, derivs, rc)
    except DegenerateGapError as exc:
        _write_results(args.out, {
            "command": "nac",
            "point": list(map(float, params)),
            "degenerate": True,
            "gap": exc.gap,
            "derivative_coupling": [float(v) for v in exc.derivative_coupling],
            "csf_term": [float(v) for v in exc.csf_term],
            **_result_summary(result)})
        return EXIT_CONVERGENCE
    _write_results(args.out, {"command": "nac",
                              "point": list(map(float, params)),
                              "degenerate": False,
                              **nac_record(bv),
                              **_result_summary(result)})
    return EXIT_OK if result.converged else EXIT_CONVERGENCE


def cmd_scan(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    scan_cfg = cfg.get("scan")
    if not isinstance(scan_cfg, dict) or "grid" not in scan_cfg:
        raise ConfigError("scan needs config 'scan': {'grid': [[...], ...]}")
    grid = [np.asarray(p, dtype=float) for p in scan_cfg["grid"]]
    table = pes_scan(grid, source, ens,
                     compute_nac=bool(scan_cfg.get("nac", True)))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "scan.tsv"), "w") as f:
        f.write(table.table())
    all_ok = all(r.converged for r in table.rows)
    _write_results(args.out, {
        "command": "scan",
        "points": len(table.rows),
        "converged": all_ok,
        "rows": [{"params": [float(v) for v in r.params],
                  "e0": r.e0, "e1": r.e1, "gap": r.gap,
                  "converged": bool(r.converged),
                  "degenerate": bool(r.degenerate)} for r in table.rows]})
    return EXIT_OK if all_ok else EXIT_CONVERGENCE


def cmd_ci_search(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    search = cfg.get("ci_search", {})
    if "start" not in search:
        raise ConfigError("ci-search needs config 'ci_search': {'start': [..]}")
    res = ci_search_2d(
        source, np.asarray(search["start"], dtype=float), ens,
        initial_step=float(search.get("step", 1.0)),
        gap_threshold=float(search.get("gap_threshold", 1e-6)),
        max_iterations=int(args.max_iter or search.get("max_iterations", 60)))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trajectory.tsv"), "w") as f:
        f.write(res.table(source.coordinate_labels))
    _write_results(args.out, {
        "command": "ci-search",
        "converged": bool(res.converged),
        "message": res.message,
        "final_point": [float(v) for v in res.params],
        "final_gap": res.trajectory[-1].gap,
        "iterations": len(res.trajectory)})
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_meci(cfg, args) -> int:
    source = _source(cfg)
    ens = _ensemble_config(cfg, args)
    search = cfg.get("meci", {})
    if "start" not in search:
        raise ConfigError("meci needs config 'meci': {'start': [..]}")
    eta = float(args.eta if args.eta is not None else search.get("eta", 0.25))
    res = meci_search(
        source, np.asarray(search["start"], dtype=float), ens, eta=eta,
        gap_sq_threshold=float(search.get("gap_sq_threshold", 1e-13)),
        energy_threshold=float(search.get("energy_threshold", 1e-6)),
        initial_step=float(search.get("step", 0.01)),
        max_iterations=int(args.max_iter or search.get("max_iterations", 200)))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trajectory.tsv"), "w") as f:
        f.write(res.table(source.coordinate_labels))
    last = res.trajectory[-1]
    _write_results(args.out, {
        "command": "meci",
        "converged": bool(res.converged),
        "message": res.message,
        "final_point": [float(v) for v in res.params],
        "final_gap": last.gap,
        "final_e1": last.e1,
        "iterations": len(res.trajectory)})
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_export_model(cfg, args) -> int:
    system = cfg.get("system", {})
    model = get_model(system.get("name", "crossing3"))
    params = _point(cfg)
    part = _partition(system, model.n_ao)
    ints, derivs = model.integral_set(params, part), model.derivative_set(params)
    os.makedirs(args.out, exist_ok=True)
    # Export in the producer's MO basis so FCIDUMP and DERIVDUMP agree.
    h_mo, g_mo, _ = ao_to_mo(ints)
    C = ints.C
    from .integrals import DerivativeIntegralSet
    derivs_mo = DerivativeIntegralSet(
        derivs.labels,
        np.array([C.T @ derivs.T_half[k] @ C for k in range(derivs.n_coords)]),
        np.array([C.T @ derivs.h_x_ao[k] @ C for k in range(derivs.n_coords)]),
        np.array([np.einsum("up,vq,kr,ls,uvkl->pqrs", C, C, C, C,
                            derivs.g_x_ao[k], optimize=True)
                  for k in range(derivs.n_coords)]),
        derivs.de_nuc)
    key = geometry_key(params)
    fci = os.path.join(args.out, f"{key}.fcidump")
    drv = os.path.join(args.out, f"{key}.derivdump")
    write_fcidump(fci, h_mo, g_mo, ints.e_nuc, ints.n_elec)
    write_derivdump(drv, derivs_mo)
    _write_results(args.out, {"command": "export-model",
                              "point": list(map(float, params)),
                              "key": key,
                              "fcidump": fci, "derivdump": drv})
    return EXIT_OK


_COMMANDS = {
    "energy": cmd_energy,
    "scan": cmd_scan,
    "gradient": cmd_gradient,
    "nac": cmd_nac,
    "ci-search": cmd_ci_search,
    "meci": cmd_meci,
    "export-model": cmd_export_model,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oovqe",
        description="State-averaged orbital-optimized VQE with analytic "
                    "derivatives and conical-intersection searches.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default="oovqe-out", help="output directory")
    parser.add_argument("--max-iter", type=int, default=None,
                        help="override iteration caps")
    parser.add_argument("--eta", type=float, default=None,
                        help="MECI composite-gradient balance")
    parser.add_argument("--threads", type=int, default=1,
                        help="numba thread count (kernels are single-"
                             "threaded; accepted for config compatibility)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads > 1:
        try:
            import numba
            numba.set_num_threads(args.threads)
        except Exception:
            pass
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
