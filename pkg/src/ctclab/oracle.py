"""Stand-ins for the HALT oracle: budgeted simulation and curated tables.

Budgeted queries are sound under-approximations (they only ever certify
halting). A :class:`MachineCorpus` adds ground truth for machines whose
looping is structurally obvious; those Loops entries are axioms of the
corpus, while every Halts entry is replayed before it is trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Union

from ctclab.errors import StructuralError
from ctclab.machine import HaltedAt, MachineSpec, load_machine, parse_machine, run


@dataclass(frozen=True)
class Halts:
    t: int


@dataclass(frozen=True)
class Loops:
    provenance: str


@dataclass(frozen=True)
class Unknown:
    budget_used: int


OracleAnswer = Union[Halts, Loops, Unknown]


def budgeted_query(spec: MachineSpec, budget: int) -> OracleAnswer:
    result = run(spec, budget)
    if isinstance(result, HaltedAt):
        return Halts(result.t)
    return Unknown(budget)


def verify_halts(spec: MachineSpec, t: int) -> bool:
    """Replayable certificate check for a Halts(t) claim."""
    return run(spec, t) == HaltedAt(t)


@dataclass
class MachineCorpusEntry:
    name: str
    spec: MachineSpec
    ground_truth: Union[Halts, Loops]
    notes: str = ""
    verified: bool = field(default=False, repr=False)

    @property
    def halts(self) -> bool:
        return isinstance(self.ground_truth, Halts)


class MachineCorpus:
    """Named machines with ground-truth halting annotations."""

    def __init__(self, entries, source: str = "<memory>"):
        self.source = source
        self._entries: dict[str, MachineCorpusEntry] = {}
        for e in entries:
            if e.name in self._entries:
                raise StructuralError(f"duplicate corpus entry {e.name!r}")
            self._entries[e.name] = e

    @classmethod
    def load(cls, manifest=None, verify: bool = True) -> "MachineCorpus":
        """Load a manifest (default: the bundled corpus)."""
        if manifest is None:
            root = resources.files("ctclab") / "corpus"
            data = json.loads((root / "manifest.json").read_text())
            read = lambda rel: parse_machine((root / rel).read_text(), source=rel)
            source = "ctclab/corpus/manifest.json"
        else:
            manifest = Path(manifest)
            data = json.loads(manifest.read_text())
            read = lambda rel: load_machine(manifest.parent / rel)
            source = str(manifest)
        entries = []
        for item in data["machines"]:
            spec = read(item["file"])
            if spec.name != item["name"]:
                spec = MachineSpec(spec.states, spec.start, spec.transitions, spec.halt_states, item["name"])
            gt = item["ground_truth"]
            if "halts" in gt:
                truth = Halts(int(gt["halts"]))
            elif gt.get("loops"):
                truth = Loops(f"table:{source}#{item['name']}")
            else:
                raise StructuralError(f"entry {item['name']!r} has no usable ground truth")
            entries.append(MachineCorpusEntry(item["name"], spec, truth, item.get("notes", "")))
        corpus = cls(entries, source)
        if verify:
            for e in corpus:
                corpus._verify(e)
        return corpus

    def _verify(self, entry: MachineCorpusEntry):
        if entry.verified:
            return
        if isinstance(entry.ground_truth, Halts) and not verify_halts(entry.spec, entry.ground_truth.t):
            raise StructuralError(
                f"corpus entry {entry.name!r} claims Halts({entry.ground_truth.t}) but replay disagrees"
            )
        entry.verified = True

    def __iter__(self) -> Iterator[MachineCorpusEntry]:
        return iter(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name: str) -> MachineCorpusEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise LookupError(f"no machine named {name!r} in corpus {self.source}") from None

    def spec(self, name: str) -> MachineSpec:
        return self[name].spec

    def halting(self) -> list[MachineCorpusEntry]:
        return [e for e in self if e.halts]

    def looping(self) -> list[MachineCorpusEntry]:
        return [e for e in self if not e.halts]


def table_query(corpus: MachineCorpus, name: str) -> OracleAnswer:
    entry = corpus[name]
    corpus._verify(entry)
    return entry.ground_truth
