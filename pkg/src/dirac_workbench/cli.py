"""Command-line workflow: analyze, table, simulate, verify.

Exit codes: 0 success, 1 verification failure, 2 analysis error,
3 integrator error, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .constraints import ConstraintAnalysis, ConstraintError, analysis_report
from .dynamics import (ConstrainedSystem, IntegrationError, analyze_model, build_symbolic, compile_eom,
                       integrate, measure, q_autocorrelation, sample_initial, write_observables_csv,
                       write_trajectory_csv)
from .quantize import commutator_table, table_json, table_text
from .symalg import ParseError, RegistryError, SymbolicError

log = logging.getLogger("dirac_workbench")

EXIT_OK, EXIT_VERIFY, EXIT_ANALYSIS, EXIT_INTEGRATOR, EXIT_CONFIG = 0, 1, 2, 3, 4
ANALYSIS_ERRORS = (ConstraintError, SymbolicError, ParseError, RegistryError)


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(EXIT_CONFIG, f"output: cannot create {out}: {exc.strerror or exc}") from None
    if not out.is_dir():
        raise CommandError(EXIT_CONFIG, f"output: {out} is not a directory")
    return out


def _analyze(cfg: RunConfig):
    try:
        return analyze_model(cfg.model)
    except ANALYSIS_ERRORS as exc:
        raise CommandError(EXIT_ANALYSIS, f"analysis failed: {exc}") from None


def cmd_analyze(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    sm, analysis = _analyze(cfg)
    try:
        report = analysis_report(analysis)
    except ANALYSIS_ERRORS as exc:
        raise CommandError(EXIT_ANALYSIS, f"analysis failed: {exc}") from None
    payload = {"model": cfg.model.model_dump(mode="json"), **report}
    _write_json(out / "analysis.json", payload)
    print(f"analyze: {len(analysis.constraints)} constraints "
          f"({', '.join(c.cls for c in analysis.constraints)}) -> {out / 'analysis.json'}")
    return EXIT_OK


def cmd_table(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    if cfg.model.primary_sources:
        sm, analysis = _analyze(cfg)
    else:
        # no constraints: the Dirac bracket is the Poisson bracket
        try:
            sm = build_symbolic(cfg.model)
        except ANALYSIS_ERRORS as exc:
            raise CommandError(EXIT_ANALYSIS, f"analysis failed: {exc}") from None
        analysis = ConstraintAnalysis.from_constraints(sm.H, [])
    try:
        table = commutator_table(analysis)
    except ANALYSIS_ERRORS as exc:
        raise CommandError(EXIT_ANALYSIS, f"commutator table failed: {exc}") from None
    params = {v: val for v, val in sm.values.items() if v.name != "hbar"}
    _write_json(out / "commutators.json", {"hbar": cfg.model.hbar, "entries": table_json(table, params)})
    (out / "commutators.txt").write_text(table_text(table))
    print(f"table: {len(table)} entries -> {out / 'commutators.json'}")
    return EXIT_OK


def _run_label(scheme: str, seed: int, k: float | None) -> str:
    stem = scheme if k is None else f"{scheme}-k{k:g}"
    return f"{stem}-seed{seed}"


def cmd_simulate(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    sim = cfg.simulate
    try:
        system = ConstrainedSystem(cfg.model)
    except ValueError as exc:
        raise CommandError(EXIT_CONFIG, f"model: {exc}") from None
    if "dirac-rk4" in sim.schemes:
        sm, analysis = _analyze(cfg)
        try:
            system.field = compile_eom(analysis, sm)
        except ANALYSIS_ERRORS as exc:
            raise CommandError(EXIT_ANALYSIS, f"cannot compile the Dirac field: {exc}") from None
    x0, p0 = cfg.initial_vectors()
    written: list[Path] = []
    try:
        for scheme in sim.schemes:
            ks = list(sim.penalty_k) if scheme == "penalty" else [None]
            for k in ks:
                runs = []
                for seed in sim.seeds:
                    ic = sample_initial(cfg.model, x0, p0, T=sim.temperature, seed=seed)
                    traj = integrate(system, ic, scheme, sim.dt, sim.t_final, k=k)
                    obs = measure(traj, system)
                    label = _run_label(scheme, seed, k)
                    for suffix, writer, data in (("trajectory", write_trajectory_csv, traj),
                                                 ("observables", write_observables_csv, obs)):
                        path = out / f"{label}.{suffix}.csv"
                        written.append(path)
                        writer(path, data)
                    print(f"simulate {label}: steps={len(traj.times) - 1} "
                          f"max|phi|={float(np.max(np.abs(obs.phi))):.3e} "
                          f"drift={obs.relative_energy_drift():.3e}")
                    runs.append(traj)
                stem = scheme if k is None else f"{scheme}-k{k:g}"
                path = out / f"{stem}.qq.csv"
                written.append(path)
                corr = q_autocorrelation(runs, system)
                with path.open("w") as fh:
                    fh.write("t,QQ\n")
                    for t, c in zip(runs[0].times, corr):
                        fh.write(f"{float(t):.17g},{float(c):.17g}\n")
    except (IntegrationError, SymbolicError, ValueError) as exc:
        for path in written:
            path.unlink(missing_ok=True)
        raise CommandError(EXIT_INTEGRATOR, f"integration failed: {exc}") from None
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_all

    out = _output_dir(cfg)
    results = run_all(cfg.model)
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    # wall-clock times vary between runs, so only the limits go to the file
    _write_json(out / "verification.json", {"passed": passed, "checks": [r.as_dict() for r in results]})
    print(f"verify: {sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {"analyze": cmd_analyze, "table": cmd_table, "simulate": cmd_simulate, "verify": cmd_verify}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for analysis failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dirac-workbench",
                 description="Constraint analysis, Dirac quantization and constrained "
                             "dynamics for a particle on a breathing ring.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--output", help="output directory (overrides config 'output')")
    ap.add_argument("--seed", type=int, help="single seed (overrides simulate.seeds)")
    ap.add_argument("--scheme", choices=["dirac-rk4", "rattle", "penalty"],
                    help="single scheme (overrides simulate.schemes)")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-final", type=float, dest="t_final")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug diagnostics on stderr")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, output=args.output, seed=args.seed, scheme=args.scheme,
                              dt=args.dt, t_final=args.t_final)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
