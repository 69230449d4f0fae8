import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamtransfer.circuit import run_exact, run_shots
from oamtransfer.circuitio import (
    build_circuit,
    doc_from_circuit,
    emit_results,
    format_angle,
    format_count_record,
    format_fidelity_table,
    load_circuit,
    load_results,
    parse_angle,
    parse_circuit,
    parse_count_record,
    parse_number,
    setup_file,
    unparse_circuit,
)
from oamtransfer.errors import ParseError
from oamtransfer.experiments import SetupId, build_setup, input_state, run_table
from oamtransfer.hilbert import OAM2, POLARIZATION, DensityMatrix2, make_source_state
from oamtransfer.tomography import ProjectorSet, exact_record, reconstruct_linear

DATA = Path(__file__).parent / "data"
CORPUS = sorted((DATA / "corpus").glob("*.qc"))
MALFORMED = sorted((DATA / "malformed").glob("*.qc"))
BUNDLED = ["a", "b", "c", "d", "det-fwd"]


# -- codecs -------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, value",
    [
        ("0", 0.0),
        ("45deg", np.pi / 4),
        ("-22.5deg", -np.pi / 8),
        ("0.3rad", 0.3),
        ("pi", np.pi),
        ("-pi/8", -np.pi / 8),
        ("3*pi/4", 3 * np.pi / 4),
        ("1e-3", 1e-3),
    ],
)
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("text", ["", "deg", "pi/0", "12parsecs", "2pi", "pi/x"])
def test_parse_angle_rejects(text):
    with pytest.raises(ValueError):
        parse_angle(text)


@settings(max_examples=200)
@given(st.floats(-100, 100, allow_nan=False))
def test_angle_format_roundtrips_exactly(x):
    assert parse_angle(format_angle(x)) == x


def test_parse_number_fraction():
    assert parse_number("1/2") == 0.5
    assert parse_number("-3") == -3.0


# -- corpus ---------------------------------------------------------------------


def test_corpus_size():
    assert len(CORPUS) >= 20
    assert len(MALFORMED) >= 10


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_roundtrips_canonically(path):
    doc = parse_circuit(path.read_text(), source=str(path))
    canon = unparse_circuit(doc)
    again = parse_circuit(canon)
    assert again == doc
    assert unparse_circuit(again) == canon


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_builds_identically_after_roundtrip(path):
    doc = parse_circuit(path.read_text())
    c1 = build_circuit(doc)
    c2 = build_circuit(parse_circuit(unparse_circuit(doc)))
    assert len(c1) == len(c2)
    src = make_source_state([0.6, 0.8j], m_max=doc.m_max)
    if any(getattr(s, "name", "") == "hologram_generate" for s in c1.stages) or not len(c1):
        return
    o1, o2 = run_exact(c1, src).output, run_exact(c2, src).output
    assert np.array_equal(o1.amplitudes, o2.amplitudes)


@pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
def test_malformed_files_give_located_diagnostics(path):
    text = path.read_text()
    m = re.match(r"# expect: (\d+):(\d+) (.*)", text.splitlines()[0])
    line, col, fragment = int(m.group(1)), int(m.group(2)), m.group(3)
    with pytest.raises(ParseError) as info:
        load_circuit(path)
    err = info.value
    assert (err.line, err.column) == (line, col)
    assert re.search(fragment, str(err))
    assert str(err).startswith(f"{path}:{line}:{col}:")


def test_parse_error_without_source():
    with pytest.raises(ParseError) as info:
        parse_circuit("qwp\n")
    assert str(info.value).startswith("1:")


# -- bundled setups ------------------------------------------------------------------


@pytest.mark.parametrize("setup", BUNDLED)
def test_bundled_setup_matches_code(setup, rng):
    circuit, doc = load_circuit(setup_file(setup))
    assert unparse_circuit(parse_circuit(unparse_circuit(doc))) == unparse_circuit(doc)
    ref = build_setup(setup)
    for label in ("H", "A", "L") if SetupId.parse(setup) != SetupId.B else ("l", "h", "a"):
        src = input_state(setup, label)
        a, b = run_exact(circuit, src), run_exact(ref, src)
        assert np.allclose(a.output.amplitudes, b.output.amplitudes, atol=1e-12)


def test_doc_from_circuit_covers_adjoints():
    rev = build_setup("det-rev")
    doc = doc_from_circuit(rev)
    text = unparse_circuit(doc)
    assert "adjoint=true" in text
    rebuilt = build_circuit(parse_circuit(text))
    src = input_state("det-rev", "h")
    assert np.allclose(run_exact(rebuilt, src).output.amplitudes, run_exact(rev, src).output.amplitudes, atol=1e-12)


def test_setup_file_unknown():
    with pytest.raises(FileNotFoundError):
        setup_file("det-rev")


# -- results ------------------------------------------------------------------------


def test_density_matrix_roundtrip():
    rho = DensityMatrix2.from_bloch([0.1, -0.4, 0.3])
    back = load_results(emit_results(rho))
    assert np.array_equal(back.matrix, rho.matrix)


def test_run_result_roundtrip():
    result = run_exact(build_setup("c"), make_source_state([0.6, 0.8j]))
    back = load_results(emit_results(result))
    assert back.success_probability == result.success_probability
    assert np.array_equal(back.output.amplitudes, result.output.amplitudes)
    assert back.stage_trace == result.stage_trace


def test_null_run_result_roundtrip():
    result = run_exact(build_setup("a"), make_source_state([1, 0]))
    payload = emit_results(result)
    assert '"format_version": 1' in payload
    assert load_results(payload).null == result.null


def test_fidelity_table_roundtrip_and_tsv():
    table = run_table("b")
    assert load_results(emit_results(table)) == table
    tsv = format_fidelity_table(table)
    lines = tsv.splitlines()
    assert lines[0].split("\t")[0] == "initial"
    assert len(lines) == 8
    assert lines[-1].startswith("# average fidelity 1.0000000000")


def test_count_record_roundtrips():
    rec = run_shots(build_setup("a"), make_source_state([1, 0]), ProjectorSet(OAM2).analyzers(), 500, seed=3, subspace=OAM2)
    assert load_results(emit_results(rec)) == rec
    text = format_count_record(rec)
    assert text.startswith("# counts format_version=1 subspace=oam2 seed=3")
    assert parse_count_record(text) == rec
    exact = exact_record(np.array([0.6, 0.8]), POLARIZATION, shots=1.0)
    back = parse_count_record(format_count_record(exact))
    assert np.allclose(reconstruct_linear(back).matrix, reconstruct_linear(exact).matrix)


@pytest.mark.parametrize(
    "text, line",
    [
        ("H 1 2\n", 1),
        ("# counts format_version=2 subspace=pol seed=1\n", 1),
        ("# counts format_version=1 subspace=pol seed=1\nH 1\n", 2),
        ("# counts format_version=1 subspace=pol seed=1\nH 1 2\nH 1 2\n", 3),
        ("# counts format_version=1 subspace=pol seed=1\nH x 2\n", 2),
        ("# counts format_version=1 subspace=pol seed=1\nH 5 2\n", 1),
    ],
)
def test_count_record_diagnostics(text, line):
    with pytest.raises(ParseError) as info:
        parse_count_record(text, source="counts.txt")
    assert info.value.line == line


def test_load_results_rejects_unknown():
    with pytest.raises(ValueError):
        load_results('{"format_version": 99, "type": "run_result"}')
    with pytest.raises(ValueError):
        load_results('{"format_version": 1, "type": "mystery"}')
    with pytest.raises(TypeError):
        emit_results(object())
