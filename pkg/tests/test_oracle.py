import json

import pytest

from ctclab.errors import StructuralError
from ctclab.machine import format_machine
from ctclab.oracle import Halts, Loops, MachineCorpus, Unknown, budgeted_query, table_query, verify_halts


def test_budgeted_query(halt3, looper):
    assert budgeted_query(halt3, 10) == Halts(3)
    assert budgeted_query(halt3, 2) == Unknown(2)
    assert budgeted_query(looper, 10**6) == Unknown(10**6)


def test_budgeted_query_monotone(corpus):
    for e in corpus:
        seen_halt = False
        for b in range(0, 120, 7):
            a = budgeted_query(e.spec, b)
            assert not isinstance(a, Loops)
            if seen_halt:
                assert isinstance(a, Halts)
            seen_halt = isinstance(a, Halts)


def test_table_query(corpus):
    assert table_query(corpus, "HALT3") == Halts(3)
    assert isinstance(table_query(corpus, "LOOPER"), Loops)
    assert table_query(corpus, "SLOW4098") == Halts(4098)
    with pytest.raises(LookupError):
        table_query(corpus, "NOPE")


def test_every_halts_entry_replays(corpus):
    for e in corpus.halting():
        assert verify_halts(e.spec, e.ground_truth.t)
    for e in corpus.looping():
        assert e.ground_truth.provenance.startswith("table:")


def test_lying_manifest_is_rejected(tmp_path, halt3):
    (tmp_path / "h.tm").write_text(format_machine(halt3))
    manifest = {"schema": 1, "machines": [{"name": "HALT3", "file": "h.tm", "ground_truth": {"halts": 4}}]}
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    with pytest.raises(StructuralError):
        MachineCorpus.load(tmp_path / "m.json")
    lazy = MachineCorpus.load(tmp_path / "m.json", verify=False)
    with pytest.raises(StructuralError):
        table_query(lazy, "HALT3")
