"""Circuit description format and result serialization.

Circuit files are line oriented::

    # comments run to end of line
    circuit name=setup_a m_max=6 format_version=1
    qwp theta=0deg
    qwp theta=45deg
    qplate q=1 delta=pi
    polarizer axis=H
    begin_mz reflections_a=2 reflections_b=2
    arm_a:
    arm_b:
      dove alpha=pi/8
      dove alpha=0
      phase phi=pi/2
    end_mz

Angles take a ``deg`` or ``rad`` suffix (bare numbers are radians) or a
``pi`` expression such as ``pi``, ``-pi/8``, ``3*pi/4``. Every element
accepts ``adjoint=true`` for the element crossed backwards.

Results are JSON documents carrying ``format_version`` and ``type``.
"""

from __future__ import annotations

import json
import math
import re
from importlib import resources
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import elements as el
from .circuit import Circuit, CountRecord, InterferometerBlock, RunResult
from .errors import OamTransferError, ParseError
from .experiments import FidelityRow, FidelityTable
from .hilbert import (
    DEFAULT_M_MAX,
    MIN_M_MAX,
    OAM_STATES,
    PATHS,
    POL_STATES,
    POLS,
    DensityMatrix2,
    LogicalSubspace,
    PhotonState,
    path_index,
    pol_index,
)

FORMAT_VERSION = 1

# -- value parsers -----------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_PI_RE = re.compile(rf"^(?:(?P<sign>[+-])?(?:(?P<mul>{_NUM})\*)?pi(?:/(?P<div>{_NUM}))?)$")
_UNIT_RE = re.compile(rf"^(?P<num>{_NUM})(?P<unit>deg|rad)?$")


def parse_angle(text: str) -> float:
    """Angle literal to radians."""
    t = text.strip()
    m = _PI_RE.match(t)
    if m:
        div = float(m["div"] or 1)
        if div == 0:
            raise ValueError(f"bad angle {text!r}: division by zero")
        value = math.pi * float(m["mul"] or 1) / div
        return -value if m["sign"] == "-" else value
    m = _UNIT_RE.match(t)
    if m:
        value = float(m["num"])
        return math.radians(value) if m["unit"] == "deg" else value
    raise ValueError(f"bad angle {text!r}")


def format_angle(value: float) -> str:
    return f"{float(value)!r}rad"


def parse_number(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        if float(den) == 0:
            raise ValueError(f"bad number {text!r}: division by zero")
        return float(num) / float(den)
    return float(text)


def format_number(value) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def _parse_int(text: str) -> int:
    return int(text)


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _parse_efficiency(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise ValueError("efficiency must lie in [0, 1]")
    return value


_ANGLE = (parse_angle, format_angle)
_NUMBER = (parse_number, format_number)
_BOOL = (_parse_bool, lambda v: "true" if v else "false")
_INT = (_parse_int, str)
_STR = (str, str)
_EFF = (_parse_efficiency, format_number)

# param name -> (codec, default); REQUIRED marks a mandatory parameter
REQUIRED = object()
_ADJ = {"adjoint": (_BOOL, False)}

ELEMENT_SPECS = {
    "qplate": {"q": (_NUMBER, REQUIRED), "delta": (_ANGLE, REQUIRED), **_ADJ},
    "hwp": {"theta": (_ANGLE, REQUIRED), **_ADJ},
    "qwp": {"theta": (_ANGLE, REQUIRED), **_ADJ},
    "polarizer": {"axis": ((_choice(tuple(POL_STATES)), str), REQUIRED), **_ADJ},
    "smf": {**_ADJ},
    "dove": {"alpha": (_ANGLE, REQUIRED), **_ADJ},
    "mirror": {**_ADJ},
    "phase": {"phi": (_ANGLE, REQUIRED), **_ADJ},
    "pbs": {"port": ((_choice(("transmit_H", "reflect_V")), str), REQUIRED), **_ADJ},
    "hologram": {
        "state": ((_choice(tuple(OAM_STATES)), str), REQUIRED),
        "order": (_INT, REQUIRED),
        "efficiency": (_EFF, 1.0),
        "invert": (_BOOL, False),
        **_ADJ,
    },
}
HOLOGRAM_MODES = ("gen", "analyze")

MZ_SPEC = {
    "reflections_a": (_INT, 2),
    "reflections_b": (_INT, 2),
    "reflections_first": (_BOOL, False),
    "compensated": (_BOOL, False),
    "label": (_STR, "mz"),
}
HEADER_SPEC = {
    "name": (_STR, "circuit"),
    "m_max": (_INT, DEFAULT_M_MAX),
    "seed": (_INT, 0),
    "format_version": (_INT, FORMAT_VERSION),
}


# -- document model ----------------------------------------------------------


@dataclass(frozen=True)
class Statement:
    op: str
    params: tuple = ()  # sorted (key, value) pairs, defaults filled in
    mode: Optional[str] = None
    line: int = field(default=0, compare=False)

    @property
    def kwargs(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class MzStatement:
    params: tuple = ()
    arm_a: tuple = ()
    arm_b: tuple = ()
    line: int = field(default=0, compare=False)

    @property
    def kwargs(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class CircuitDoc:
    name: str = "circuit"
    m_max: int = DEFAULT_M_MAX
    seed: int = 0
    format_version: int = FORMAT_VERSION
    statements: tuple = ()


# -- parser ------------------------------------------------------------------


@dataclass
class _Token:
    text: str
    column: int


def _tokenize(line: str):
    code = line.split("#", 1)[0]
    return [_Token(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", code)]


def _parse_params(tokens, spec, lineno, source, what, end_col=1):
    values = {}
    for tok in tokens:
        if "=" not in tok.text:
            raise ParseError(f"{what}: expected key=value, got {tok.text!r}", lineno, tok.column, source)
        key, raw = tok.text.split("=", 1)
        if key not in spec:
            raise ParseError(f"{what}: unknown parameter {key!r}", lineno, tok.column, source)
        if key in values:
            raise ParseError(f"{what}: duplicate parameter {key!r}", lineno, tok.column, source)
        (decode, _), _default = spec[key]
        try:
            values[key] = decode(raw)
        except (ValueError, ZeroDivisionError) as exc:
            col = tok.column + len(key) + 1
            raise ParseError(f"{what}: bad value for {key!r}: {exc}", lineno, col, source) from None
    for key, (_, default) in spec.items():
        if key not in values:
            if default is REQUIRED:
                col = tokens[-1].column + len(tokens[-1].text) if tokens else end_col
                raise ParseError(f"{what}: missing parameter {key!r}", lineno, col, source)
            values[key] = default
    return values


def _parse_element(tokens, lineno, source):
    head = tokens[0]
    op = head.text
    if op not in ELEMENT_SPECS:
        raise ParseError(f"unknown element {op!r}", lineno, head.column, source)
    rest = tokens[1:]
    mode = None
    if op == "hologram":
        if not rest or rest[0].text not in HOLOGRAM_MODES:
            col = rest[0].column if rest else head.column + len(op)
            raise ParseError("hologram needs a mode: gen or analyze", lineno, col, source)
        mode, rest = rest[0].text, rest[1:]
    end = (rest[-1] if rest else tokens[-1])
    values = _parse_params(rest, ELEMENT_SPECS[op], lineno, source, op, end.column + len(end.text))
    if op == "hologram":
        if mode == "gen" and values["invert"]:
            raise ParseError("hologram gen does not take invert", lineno, head.column, source)
        if values["order"] <= 0:
            raise ParseError("hologram order must be positive", lineno, head.column, source)
    return Statement(op, tuple(sorted(values.items())), mode, lineno)


def parse_circuit(text: str, source: Optional[str] = None) -> CircuitDoc:
    """Parse circuit text; raises :class:`ParseError` with line and column."""
    header = None
    statements = []
    block = None  # (params, arm_a, arm_b, current arm, line)
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(line)
        if not tokens:
            continue
        head = tokens[0]
        word = head.text
        if word == "circuit":
            if header is not None or statements or block is not None:
                raise ParseError("circuit header must come first and only once", lineno, head.column, source)
            header = _parse_params(tokens[1:], HEADER_SPEC, lineno, source, "circuit", head.column + len(word))
            if header["format_version"] != FORMAT_VERSION:
                raise ParseError(
                    f"unsupported format_version {header['format_version']}", lineno, head.column, source
                )
            if header["m_max"] < MIN_M_MAX:
                raise ParseError(f"m_max must be >= {MIN_M_MAX}", lineno, head.column, source)
            continue
        if word == "begin_mz":
            if block is not None:
                raise ParseError("nested begin_mz", lineno, head.column, source)
            params = _parse_params(tokens[1:], MZ_SPEC, lineno, source, "begin_mz", head.column + len(word))
            block = {"params": params, "arm_a": [], "arm_b": [], "arm": None, "line": lineno}
            continue
        if word in ("arm_a:", "arm_b:"):
            if block is None:
                raise ParseError(f"{word} outside begin_mz/end_mz", lineno, head.column, source)
            arm = word[:-1]
            if len(tokens) > 1:
                raise ParseError(f"unexpected text after {word}", lineno, tokens[1].column, source)
            if block[arm] or block["arm"] == arm or (arm == "arm_a" and block["arm"] == "arm_b"):
                raise ParseError(f"{word} repeated or out of order", lineno, head.column, source)
            block["arm"] = arm
            continue
        if word == "end_mz":
            if block is None:
                raise ParseError("end_mz without begin_mz", lineno, head.column, source)
            if len(tokens) > 1:
                raise ParseError("unexpected text after end_mz", lineno, tokens[1].column, source)
            statements.append(
                MzStatement(
                    tuple(sorted(block["params"].items())),
                    tuple(block["arm_a"]),
                    tuple(block["arm_b"]),
                    block["line"],
                )
            )
            block = None
            continue
        stmt = _parse_element(tokens, lineno, source)
        if block is not None:
            if block["arm"] is None:
                raise ParseError("element inside begin_mz before arm_a:/arm_b:", lineno, head.column, source)
            block[block["arm"]].append(stmt)
        else:
            statements.append(stmt)
    if block is not None:
        raise ParseError("unclosed interferometer block (missing end_mz)", block["line"], 1, source)
    header = header or {k: v for k, (_, v) in HEADER_SPEC.items()}
    return CircuitDoc(
        name=header["name"],
        m_max=header["m_max"],
        seed=header["seed"],
        format_version=header["format_version"],
        statements=tuple(statements),
    )


def load_circuit_doc(path) -> CircuitDoc:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read(), source=str(path))


# -- unparser ----------------------------------------------------------------


def _format_params(params, spec):
    out = []
    for key, value in params:
        (_, encode), default = spec[key]
        if default is not REQUIRED and value == default:
            continue
        out.append(f"{key}={encode(value)}")
    return out


def _format_statement(stmt: Statement) -> str:
    words = [stmt.op]
    if stmt.mode:
        words.append(stmt.mode)
    spec = ELEMENT_SPECS[stmt.op]
    ordered = sorted(stmt.params, key=lambda kv: list(spec).index(kv[0]))
    words.extend(_format_params(ordered, spec))
    return " ".join(words)


def unparse_circuit(doc: CircuitDoc) -> str:
    """Canonical text: parsing it gives back an equal document."""
    head = ["circuit", f"name={doc.name}", f"m_max={doc.m_max}", f"format_version={doc.format_version}"]
    if doc.seed:
        head.append(f"seed={doc.seed}")
    lines = [" ".join(head)]
    for stmt in doc.statements:
        if isinstance(stmt, MzStatement):
            ordered = sorted(stmt.params, key=lambda kv: list(MZ_SPEC).index(kv[0]))
            lines.append(" ".join(["begin_mz", *_format_params(ordered, MZ_SPEC)]))
            for arm in ("arm_a", "arm_b"):
                lines.append(f"{arm}:")
                lines.extend("  " + _format_statement(s) for s in getattr(stmt, arm))
            lines.append("end_mz")
        else:
            lines.append(_format_statement(stmt))
    return "\n".join(lines) + "\n"


# -- doc <-> circuit -----------------------------------------------------------


def _build_element(stmt: Statement) -> el.Element:
    p = stmt.kwargs
    op = stmt.op
    if op == "qplate":
        e = el.qplate(p["q"], p["delta"])
    elif op == "hwp":
        e = el.hwp(p["theta"])
    elif op == "qwp":
        e = el.qwp(p["theta"])
    elif op == "polarizer":
        e = el.polarizer(p["axis"])
    elif op == "smf":
        e = el.smf()
    elif op == "dove":
        e = el.dove_prism(p["alpha"])
    elif op == "mirror":
        e = el.mirror()
    elif op == "phase":
        e = el.phase(p["phi"])
    elif op == "pbs":
        e = el.pbs_filter(p["port"])
    elif stmt.mode == "gen":
        e = el.hologram_generate(p["state"], p["order"], p["efficiency"])
    else:
        e = el.hologram_analyze(p["state"], p["order"], p["efficiency"], p["invert"])
    return e.adjoint() if p["adjoint"] else e


def _build_stage(stmt):
    if isinstance(stmt, MzStatement):
        return InterferometerBlock(
            arm_a=tuple(_build_element(s) for s in stmt.arm_a),
            arm_b=tuple(_build_element(s) for s in stmt.arm_b),
            **stmt.kwargs,
        )
    return _build_element(stmt)


def build_circuit(doc: CircuitDoc, source: Optional[str] = None) -> Circuit:
    """Instantiate the elements; invalid physics is reported at the statement's line."""
    stages = []
    for stmt in doc.statements:
        try:
            stages.append(_build_stage(stmt))
        except (ValueError, OamTransferError) as exc:
            raise ParseError(str(exc), stmt.line or 1, 1, source) from exc
    return Circuit(tuple(stages), label=doc.name)


_ELEMENT_OPS = {"dove": "dove", "pbs": "pbs", "hologram_generate": "hologram", "hologram_analyze": "hologram"}


def _element_statement(e: el.Element) -> Statement:
    op = _ELEMENT_OPS.get(e.name, e.name)
    if op not in ELEMENT_SPECS:
        raise ValueError(f"element {e.name!r} has no circuit-file form")
    mode = None
    params = {k: v for k, v in e.params.items() if k in ELEMENT_SPECS[op]}
    if op == "hologram":
        mode = "gen" if e.name == "hologram_generate" else "analyze"
        if not isinstance(params.get("state"), str):
            raise ValueError("only labelled hologram states can be written to a circuit file")
        params.setdefault("invert", False)
    if op == "polarizer" and not isinstance(params.get("axis"), str):
        raise ValueError("only labelled polarizer axes can be written to a circuit file")
    params["adjoint"] = e.dagger
    for key, (_, default) in ELEMENT_SPECS[op].items():
        params.setdefault(key, default)
    return Statement(op, tuple(sorted(params.items())), mode)


def doc_from_circuit(circuit: Circuit, m_max: int = DEFAULT_M_MAX, seed: int = 0) -> CircuitDoc:
    statements = []
    for stage in circuit.stages:
        if isinstance(stage, InterferometerBlock):
            params = {k: getattr(stage, k) for k in MZ_SPEC}
            statements.append(
                MzStatement(
                    tuple(sorted(params.items())),
                    tuple(_element_statement(e) for e in stage.arm_a),
                    tuple(_element_statement(e) for e in stage.arm_b),
                )
            )
        else:
            statements.append(_element_statement(stage))
    return CircuitDoc(name=circuit.label, m_max=m_max, seed=seed, statements=tuple(statements))


def setup_file(setup):
    """Path of the bundled circuit file for a setup id (``a``, ``b``, ``c``, ``d``, ``det-fwd``)."""
    name = str(getattr(setup, "value", setup)).lower().replace("-", "_")
    path = resources.files("oamtransfer") / "setups" / f"setup_{name}.qc"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled circuit file for setup {setup!r}")
    return path


def load_circuit(path) -> tuple:
    """Parse and build a circuit file; returns ``(circuit, doc)``."""
    doc = load_circuit_doc(path)
    return build_circuit(doc, source=str(path)), doc


# -- results -------------------------------------------------------------------


def _matrix_blocks(m):
    m = np.asarray(m)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _state_payload(state: PhotonState):
    amps = []
    for (p, s, k), a in np.ndenumerate(state.amplitudes):
        if a != 0:
            amps.append({"path": PATHS[p], "pol": POLS[s], "m": k - state.m_max, "re": a.real, "im": a.imag})
    return {"m_max": state.m_max, "amplitudes": amps}


def _state_from_payload(data) -> PhotonState:
    m_max = data["m_max"]
    arr = np.zeros((3, 2, 2 * m_max + 1), dtype=complex)
    for a in data["amplitudes"]:
        arr[path_index(a["path"]), pol_index(a["pol"]), a["m"] + m_max] = a["re"] + 1j * a["im"]
    return PhotonState(arr)


def results_payload(obj) -> dict:
    if isinstance(obj, DensityMatrix2):
        body = {"type": "density_matrix", **_matrix_blocks(obj.matrix), "physical": obj.is_physical}
    elif isinstance(obj, RunResult):
        body = {
            "type": "run_result",
            "success_probability": obj.success_probability,
            "null_output": obj.null,
            "output": _state_payload(obj.output),
            "stage_trace": [{"stage": s, "norm2": n} for s, n in obj.stage_trace],
        }
    elif isinstance(obj, FidelityTable):
        body = {
            "type": "fidelity_table",
            "setup": obj.setup,
            "shots": obj.shots,
            "seed": obj.seed,
            "conversion_efficiency": obj.conversion_efficiency,
            "average_fidelity": obj.average_fidelity,
            "mean_success_probability": obj.mean_success_probability,
            "rows": [
                {
                    "initial": r.initial,
                    "final": r.final,
                    "fidelity": r.fidelity,
                    "std": r.std,
                    "success_probability": r.success_probability,
                }
                for r in obj.rows
            ],
        }
    elif isinstance(obj, CountRecord):
        body = {
            "type": "count_record",
            "subspace": obj.subspace.tag,
            "seed": obj.seed,
            "counts": {k: list(v) for k, v in obj.counts.items()},
        }
    else:
        raise TypeError(f"cannot emit {type(obj).__name__}")
    return {"format_version": FORMAT_VERSION, **body}


def emit_results(obj) -> str:
    """Versioned JSON for a RunResult, FidelityTable, DensityMatrix2 or CountRecord."""
    return json.dumps(results_payload(obj), indent=2) + "\n"


def load_results(text: str):
    """Inverse of :func:`emit_results`."""
    data = json.loads(text)
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {data.get('format_version')!r}")
    kind = data.get("type")
    if kind == "density_matrix":
        m = np.array(data["real"]) + 1j * np.array(data["imag"])
        return DensityMatrix2(m, require_physical=False)
    if kind == "run_result":
        output = _state_from_payload(data["output"])
        final = None if data["null_output"] else output.normalized()
        trace = tuple((t["stage"], t["norm2"]) for t in data["stage_trace"])
        return RunResult(final, data["success_probability"], output, trace)
    if kind == "fidelity_table":
        rows = tuple(FidelityRow(**r) for r in data["rows"])
        return FidelityTable(data["setup"], rows, data["shots"], data["seed"], data["conversion_efficiency"])
    if kind == "count_record":
        counts = {k: tuple(v) for k, v in data["counts"].items()}
        return CountRecord(LogicalSubspace.parse(data["subspace"]), counts, data["seed"])
    raise ValueError(f"unknown result type {kind!r}")


# -- count records (line format) -------------------------------------------------


def format_count_record(record: CountRecord) -> str:
    seed = "none" if record.seed is None else str(record.seed)
    lines = [f"# counts format_version={FORMAT_VERSION} subspace={record.subspace.tag} seed={seed}"]
    for label, (n, shots) in record.counts.items():
        lines.append(f"{label} {format_number(n)} {format_number(shots)}")
    return "\n".join(lines) + "\n"


def parse_count_record(text: str, source: Optional[str] = None) -> CountRecord:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# counts"):
        raise ParseError("missing '# counts' header", 1, 1, source)
    header = {}
    for tok in _tokenize(lines[0][1:])[1:]:
        if "=" not in tok.text:
            raise ParseError(f"bad header field {tok.text!r}", 1, tok.column + 1, source)
        k, v = tok.text.split("=", 1)
        header[k] = v
    try:
        if int(header.get("format_version", -1)) != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {header.get('format_version')!r}")
        subspace = LogicalSubspace.parse(header["subspace"])
        seed = None if header.get("seed", "none") == "none" else int(header["seed"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header: {exc}", 1, 1, source) from None
    counts = {}
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = _tokenize(line)
        if not tokens:
            continue
        if len(tokens) != 3:
            raise ParseError("expected '<label> <counts> <shots>'", lineno, tokens[0].column, source)
        label = tokens[0].text
        if label in counts:
            raise ParseError(f"duplicate analyzer {label!r}", lineno, tokens[0].column, source)
        try:
            n, shots = parse_number(tokens[1].text), parse_number(tokens[2].text)
        except ValueError:
            raise ParseError("counts and shots must be numbers", lineno, tokens[1].column, source) from None
        counts[label] = (int(n) if float(n).is_integer() else n, int(shots) if float(shots).is_integer() else shots)
    try:
        return CountRecord(subspace, counts, seed)
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1, source) from None


def format_fidelity_table(table) -> str:
    """Tab-delimited rows plus an average line."""
    lines = ["initial\tfinal\tfidelity\tstd\tsuccess_probability"]
    for r in table.rows:
        lines.append(f"{r.initial}\t{r.final}\t{r.fidelity:.10f}\t{r.std:.10f}\t{r.success_probability:.10f}")
    lines.append(
        f"# average fidelity {table.average_fidelity:.10f}"
        f"  mean success_probability {table.mean_success_probability:.10f}"
        f"  conversion_efficiency {table.conversion_efficiency:.10f}"
    )
    return "\n".join(lines) + "\n"
