"""
Command-line interface: ``spinsim <command> ...``.

Exit codes: 0 success, 1 a verification check failed, 2 bad input (the
message names the file and line where possible).
"""
from __future__ import annotations

import argparse
import sys as _sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aht, engine, measure, seqlib, verify
from .core import (
    basis_projector,
    expand_product_basis,
    from_product_basis,
    thermal_state,
)
from .hamiltonian import (
    GradientSpec,
    SpinSystem,
    internal_hamiltonian,
    liquid_terms,
    load_system,
    solid_terms,
)
from .pulseprog import compile_program, load_program, render


class InputError(Exception):
    """Bad user input; reported with exit status 2."""


@dataclass(frozen=True)
class RunConfig:
    system_path: Path
    program_path: Path
    initial_state: str = "thermal"
    epsilon: float = 1e-5
    output_path: Path | None = None
    seed: int = 0


# ---------------------------------------------------------------------------
# input helpers


def _system(path) -> SpinSystem:
    return load_system(path)


def _program(path):
    try:
        return load_program(path)
    except OSError as exc:
        raise InputError(f"{path}: cannot read file: {exc.strerror}") from None


def read_state_file(path, n: int) -> np.ndarray:
    """A state from ``.npy`` or from ``<string> <re> [<im>]`` lines."""
    path = Path(path)
    if path.suffix == ".npy":
        try:
            rho = np.load(path)
        except (OSError, ValueError) as exc:
            raise InputError(f"{path}: cannot load array: {exc}") from None
        if rho.shape != (2**n, 2**n):
            raise InputError(f"{path}: state has shape {rho.shape}, expected {(2**n, 2**n)}")
        return rho.astype(complex)
    terms = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read file: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.replace(",", " ").split()
        if len(tok) not in (2, 3) or len(tok[0]) != n or set(tok[0]) - set("1XYZ+-"):
            raise InputError(f"{path}:{lineno}: expected '<{n}-letter string> <re> [<im>]'")
        try:
            terms[tok[0]] = complex(float(tok[1]), float(tok[2]) if len(tok) == 3 else 0.0)
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed coefficient") from None
    if not terms:
        raise InputError(f"{path}: no state terms")
    return from_product_basis(terms, n)


def initial_state(spec: str, n: int, epsilon: float) -> np.ndarray:
    """``thermal``, ``pseudo-pure:<bits>`` or a state file path."""
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    if spec == "thermal":
        return thermal_state(n, epsilon)
    if spec.startswith("pseudo-pure:"):
        bits = spec.split(":", 1)[1]
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise InputError(f"pseudo-pure label must be {n} bits, got {bits!r}")
        return (1 - epsilon) * np.eye(2**n) / 2**n + epsilon * basis_projector(bits)
    return read_state_file(spec, n)


def _terms(sys: SpinSystem) -> dict[str, float]:
    return solid_terms(sys) if sys.dipolar else liquid_terms(sys)


def write_state(path, rho: np.ndarray) -> None:
    lines = ["# string re im"]
    for k, v in expand_product_basis(rho).items():
        lines.append(f"{k} {float(v.real)!r} {float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig, kite_rate: float = 0.0, crusher: str = "ideal") -> int:
    sys = _system(cfg.system_path)
    prog = _program(cfg.program_path)
    H = internal_hamiltonian(sys)
    grad = None
    if crusher != "ideal":
        try:
            g, delta, D, tau = (float(x) for x in crusher.split(","))
        except ValueError:
            raise InputError("--crusher takes 'ideal' or G,delta,D,tau") from None
        grad = GradientSpec(g, delta, D, tau)
    segs = compile_program(prog, sys, H, crusher=grad)
    rho0 = initial_state(cfg.initial_state, sys.n, cfg.epsilon)
    kite = engine.KiteModel.uniform(kite_rate, sys.n) if kite_rate else None
    res = engine.simulate(rho0, segs, kite=kite)
    out = Path(cfg.output_path or Path(cfg.program_path).with_suffix(""))
    written = []
    for k, (sig, acq) in enumerate(zip(res.signals, res.acquisitions), 1):
        path = out.parent / f"{out.name}.fid{k}.csv"
        measure.write_fid(path, measure.Fid(sig, acq.dwell_s, acq.channel))
        written.append(path)
    state_path = out.parent / f"{out.name}.state.txt"
    write_state(state_path, res.state)
    written.append(state_path)
    for p in written:
        print(p)
    return 0


def cmd_aht(system, program, order: int = 1, csv_path=None) -> int:
    sys = _system(system)
    prog = _program(program)
    report = aht.average_hamiltonian(prog, _terms(sys), sys, order)
    print(aht.format_report(report, sys.labels), end="")
    if csv_path:
        Path(csv_path).write_text(aht.report_csv(report))
    return 0


def cmd_spectrum(fid_path, zerofill: int | None, lb: float, output=None, threshold: float = 0.05) -> int:
    try:
        fid = measure.read_fid(fid_path)
    except OSError as exc:
        raise InputError(f"{fid_path}: cannot read file: {exc.strerror}") from None
    spec = measure.spectrum(fid, zerofill, lb)
    if output:
        measure.write_spectrum(output, spec)
    print(measure.format_peaks(measure.pick_peaks(spec, threshold)), end="")
    return 0


def cmd_tomo(system, state: str, epsilon: float, program=None, output=None) -> int:
    sys = _system(system)
    rho = initial_state(state, sys.n, epsilon)
    if program:
        rho = engine.evolve(rho, compile_program(_program(program), sys, internal_hamiltonian(sys)))
    res = measure.tomography(rho, sys, trace=float(np.trace(rho).real))
    lines = [f"{k} {v:.12g}" for k, v in res.coefficients.items() if abs(v) > 1e-12]
    print("\n".join(lines))
    if output:
        write_state(output, res.rho)
    return 0


def cmd_seq_export(name: str, output=None) -> int:
    try:
        text = render(seqlib.named_sequence(name))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if output:
        Path(output).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_verify(only=None, perturb_j_hz: float = 0.0) -> int:
    results = verify.run_all(only, perturb_j_hz)
    print(verify.format_results(results), end="")
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spinsim",
        description="Density-matrix simulation of NMR pulse programs. SPINSIM_THREADS caps worker threads.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a pulse program and write FIDs and the final state")
    s.add_argument("system", help="spin-system file")
    s.add_argument("program", help="pulse-program file")
    s.add_argument("--state", default="thermal", help="thermal | pseudo-pure:<bits> | state file (default: thermal)")
    s.add_argument("--epsilon", type=float, default=1e-5, help="polarization scale of the initial state")
    s.add_argument("-o", "--output", help="output prefix (default: program path without suffix)")
    s.add_argument("--seed", type=int, default=0, help="accepted for reproducibility records; runs are deterministic")
    s.add_argument("--kite-rate", type=float, default=0.0, help="uniform relaxation rate (1/s) for every non-identity term")
    s.add_argument("--crusher", default="ideal", help="'ideal' or G_T_per_m,delta_s,D_m2_per_s,tau_s")

    a = sub.add_parser("aht", help="average-Hamiltonian report of a cycle")
    a.add_argument("system")
    a.add_argument("program")
    a.add_argument("--order", type=int, choices=(0, 1), default=1)
    a.add_argument("--csv", help="also write a comma-separated dump here")

    sp = sub.add_parser("spectrum", help="Fourier transform an FID file and list its peaks")
    sp.add_argument("fid")
    sp.add_argument("--zerofill", type=int, default=None, help="total points after zero filling")
    sp.add_argument("--lb", type=float, default=0.0, help="exponential line broadening (Hz)")
    sp.add_argument("--threshold", type=float, default=0.05, help="peak threshold relative to the tallest peak")
    sp.add_argument("-o", "--output", help="write the spectrum as CSV")

    t = sub.add_parser("tomo", help="reconstruct a three-spin state from seven readout experiments")
    t.add_argument("system")
    t.add_argument("--state", default="thermal")
    t.add_argument("--epsilon", type=float, default=1e-5)
    t.add_argument("--program", help="pulse program applied to the state before tomography")
    t.add_argument("-o", "--output", help="write the reconstructed state here")

    q = sub.add_parser("seq", help="sequence library")
    qs = q.add_subparsers(dest="seq_command", required=True)
    e = qs.add_parser("export", help="print a library sequence as DSL text")
    e.add_argument("name", choices=sorted(seqlib.SEQUENCES))
    e.add_argument("-o", "--output")

    v = sub.add_parser("verify", help="run the reference checks")
    v.add_argument("--only", nargs="+", choices=[k for k, _ in verify.CHECKS])
    v.add_argument("--perturb-j", type=float, default=0.0, help="detune J_ab (Hz) when checking the CNOT")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = RunConfig(Path(args.system), Path(args.program), args.state, args.epsilon,
                            Path(args.output) if args.output else None, args.seed)
            return cmd_simulate(cfg, args.kite_rate, args.crusher)
        if args.command == "aht":
            return cmd_aht(args.system, args.program, args.order, args.csv)
        if args.command == "spectrum":
            return cmd_spectrum(args.fid, args.zerofill, args.lb, args.output, args.threshold)
        if args.command == "tomo":
            return cmd_tomo(args.system, args.state, args.epsilon, args.program, args.output)
        if args.command == "seq":
            return cmd_seq_export(args.name, args.output)
        return cmd_verify(args.only, args.perturb_j)
    except (InputError, ValueError) as exc:
        # ConfigError, ParseError and CompileError are ValueErrors that
        # already carry "file:line" anchors
        print(f"spinsim: error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
