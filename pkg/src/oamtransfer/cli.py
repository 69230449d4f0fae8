"""Command-line front end.

Exit codes::

    0  success
    1  unexpected internal error
    2  usage error (bad flags or input spec)
    3  file cannot be read or written
    4  circuit / count-record parse error
    5  OAM truncation overflow
    6  other physics or precondition error
    7  likelihood maximization did not converge
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .circuit import run_exact, run_shots
from .circuitio import (
    emit_results,
    format_count_record,
    format_fidelity_table,
    load_circuit,
    results_payload,
)
from .errors import ConvergenceError, OamTransferError, ParseError, TruncationError
from .experiments import NoiseConfig, SetupId, oam_sign_detector_efficiency, oam_sign_outcomes, run_table
from .hilbert import OAM_STATES, POL_STATES, LogicalSubspace, fidelity
from .tomography import ProjectorSet, exact_record, reconstruct_linear, reconstruct_mle

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_TRUNCATION = 5
EXIT_PHYSICS = 6
EXIT_CONVERGENCE = 7


class UsageError(Exception):
    pass


def _complex(text: str) -> complex:
    try:
        return complex(text.replace("i", "j").replace(" ", ""))
    except ValueError:
        raise UsageError(f"bad complex amplitude {text!r}") from None


def parse_input_spec(spec: str, m_max: int):
    """``pol:H``, ``pol:ALPHA,BETA``, ``oam2:h``, ``oam4:ALPHA,BETA`` -> PhotonState.

    Explicit amplitudes are renormalized.
    """
    if ":" not in spec:
        raise UsageError(f"input spec {spec!r} needs the form SUBSPACE:STATE")
    sub_text, value = spec.split(":", 1)
    try:
        sub = LogicalSubspace.parse(sub_text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = POL_STATES if sub.kind == "polarization" else OAM_STATES
    if value in table:
        qubit = table[value]
    elif "," in value:
        a, b = value.split(",", 1)
        qubit = np.array([_complex(a), _complex(b)])
        norm = np.linalg.norm(qubit)
        if norm == 0:
            raise UsageError("input amplitudes are both zero")
        qubit = qubit / norm
    else:
        raise UsageError(f"input state {value!r}: use one of {', '.join(table)} or ALPHA,BETA")
    return sub.embed(qubit, m_max=m_max)


def _write(args, text: str):
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_noise(args):
    return NoiseConfig.load(args.noise) if getattr(args, "noise", None) else None


def _shots(args) -> int:
    return 0 if args.exact or args.shots is None else args.shots


def cmd_run(args):
    circuit, doc = load_circuit(args.circuit)
    state = parse_input_spec(args.input, doc.m_max)
    result = run_exact(circuit, state)
    payload = results_payload(result)
    if not args.trace:
        payload.pop("stage_trace")
    shots = _shots(args)
    if shots:
        rng = np.random.default_rng(args.seed)
        payload["shots"] = shots
        payload["seed"] = args.seed
        payload["detections"] = int(rng.binomial(shots, result.success_probability))
    _write(args, json.dumps(payload, indent=2) + "\n")


def cmd_tomo(args):
    circuit, doc = load_circuit(args.circuit)
    state = parse_input_spec(args.input, doc.m_max)
    try:
        sub = LogicalSubspace.parse(args.subspace)
        target = sub.state(args.target) if args.target else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    analyzers = ProjectorSet(sub).analyzers(args.hologram_efficiency)
    shots = _shots(args)
    if shots:
        record = run_shots(circuit, state, analyzers, shots, args.seed, subspace=sub)
    else:
        result = run_exact(circuit, state)
        if result.null:
            raise OamTransferError("circuit output is null; nothing to reconstruct")
        record = exact_record(result.final_state, sub)
    if args.counts_out:
        with open(args.counts_out, "w", encoding="utf-8") as fh:
            fh.write(format_count_record(record))
    rho = reconstruct_mle(record) if args.method == "mle" else reconstruct_linear(record)
    payload = results_payload(rho)
    payload["method"] = args.method
    payload["subspace"] = sub.tag
    if args.target:
        payload["target"] = args.target
        payload["fidelity"] = fidelity(rho, target)
    _write(args, json.dumps(payload, indent=2) + "\n")


def cmd_table(args):
    table = run_table(args.setup, shots=_shots(args), seed=args.seed, noise=_load_noise(args), resamples=args.resamples)
    _write(args, format_fidelity_table(table) if args.format == "tsv" else emit_results(table))


def cmd_validate(args):
    """Report every file; the exit status is that of the first failure."""
    status = EXIT_OK
    for path in args.circuit:
        try:
            circuit, doc = load_circuit(path)
        except ParseError as exc:
            print(f"error {exc}", file=sys.stderr)
            status = status or EXIT_PARSE
            continue
        except OSError as exc:
            print(f"error {path}: {exc.strerror or exc}", file=sys.stderr)
            status = status or EXIT_IO
            continue
        print(f"ok {path}: {len(circuit)} stages, m_max={doc.m_max}")
    return status


def cmd_detector_eff(args):
    shots = _shots(args)
    eff = oam_sign_detector_efficiency(
        shots=shots, seed=args.seed, detector=args.detector, hologram_efficiency=args.hologram_efficiency
    )
    payload = {"type": "detector_efficiency", "detector": args.detector, "shots": shots, "efficiency": eff}
    if args.detector == "qplate" and not shots:
        payload["outcomes"] = oam_sign_outcomes(_load_noise(args))
    _write(args, json.dumps(payload, indent=2) + "\n")


def _add_sampling(p, default_seed=0):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="exact probabilities, no sampling (default)")
    group.add_argument("--shots", type=int, help="number of detection trials per analyzer")
    p.add_argument("--seed", type=int, default=default_seed, help="sampling seed (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamtransfer",
        description="Polarization / OAM single-photon transferrer simulator.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate one input through a circuit file")
    p.add_argument("--circuit", required=True, help="circuit description file")
    p.add_argument("--input", required=True, help="input state, e.g. pol:H, pol:1,1j, oam2:h")
    _add_sampling(p)
    p.add_argument("--trace", action="store_true", help="include the per-stage norm trace")
    p.add_argument("--output", help="write the result here instead of stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tomo", help="simulate tomography of a circuit output")
    p.add_argument("--circuit", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--subspace", required=True, help="pol, oam2 or oam4")
    _add_sampling(p)
    p.add_argument("--method", choices=("mle", "linear"), default="mle")
    p.add_argument("--target", help="cardinal label to score the reconstruction against")
    p.add_argument("--hologram-efficiency", type=float, default=1.0)
    p.add_argument("--counts-out", help="also write the count record to this file")
    p.add_argument("--output")
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("table", help="reproduce a fidelity table")
    p.add_argument("--setup", required=True, choices=[s.value for s in SetupId])
    _add_sampling(p)
    p.add_argument("--noise", help="JSON noise file: delta_offsets | conversion, hologram_efficiency")
    p.add_argument("--resamples", type=int, default=100, help="bootstrap resamples in shot mode")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    p.add_argument("--output")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("validate", help="parse circuit files and report diagnostics")
    p.add_argument("--circuit", required=True, nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("detector-eff", help="OAM-sign detection efficiency")
    _add_sampling(p)
    p.add_argument("--detector", choices=("qplate", "hologram"), default="qplate")
    p.add_argument("--hologram-efficiency", type=float, default=0.12)
    p.add_argument("--noise")
    p.add_argument("--output")
    p.set_defaults(func=cmd_detector_eff)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "shots", None) is not None and args.shots <= 0:
        parser.error("--shots must be positive")
    try:
        status = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (OamTransferError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
