"""Bundled example networks, shipped as native JSON case files.

``five_bus`` is a reconstructed five-bus system (two generator buses,
three load buses) sized so its fast-decoupled matrices encode well on a
four-qubit clock register; it is not published network data. ``two_bus``
is the minimal teaching case, and the ``chain_<n>`` fixtures are
synthetic feeders whose decoupled systems have dimension n, used for
register-scaling checks.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .. import caseio
from ..network import NetworkCase

NAMES = ("five_bus", "two_bus", "chain_2", "chain_4", "chain_8", "chain_16")


def case_path(name: str) -> Path:
    """Filesystem path of a bundled case file."""
    if name not in NAMES:
        raise KeyError(f"unknown bundled case {name!r}; available: {', '.join(NAMES)}")
    return Path(str(resources.files(__package__) / "data" / f"{name}.json"))


def load(name: str) -> NetworkCase:
    """Parse and return a bundled case."""
    return caseio.parse_case(case_path(name).read_text(), caseio.NATIVE_JSON)


def load_document(name: str) -> caseio.CaseDocument:
    """Parse a bundled case together with its uncertainty block, if any."""
    return caseio.parse_document(case_path(name).read_text(), caseio.NATIVE_JSON)


def five_bus() -> NetworkCase:
    return load("five_bus")


def two_bus() -> NetworkCase:
    return load("two_bus")


def chain(dimension: int) -> NetworkCase:
    """Chain network whose decoupled systems have the given dimension."""
    return load(f"chain_{dimension}")
