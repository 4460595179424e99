"""Case-file parsing and machine-readable result emission.

Two input formats are supported: the native JSON schema and a subset of
the MATPOWER text format (baseMVA plus the bus / branch / gen numeric
tables, standard column order). Outputs are deterministic: identical
inputs produce byte-identical text, floats carry 15 significant digits,
lines end with LF.
"""

from __future__ import annotations

import json
import re
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from . import network, solvers, stochastic
from .network import Branch, Bus, NetworkCase

NATIVE_JSON = "native-json"
MATPOWER = "matpower-subset"
SCHEMA = "qpflow-case-1"

# Share of the mean used as the default standard deviation when an
# uncertainty entry does not state one.
DEFAULT_STD_FRACTION = 0.1


class CaseError(ValueError):
    """Malformed case input; carries position info when available."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{message} ({where})"
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class CaseDocument:
    """A parsed case plus its optional uncertainty block."""

    case: NetworkCase
    injections: tuple[stochastic.UncertainInjection, ...] = ()
    correlations: stochastic.CorrelationSpec | None = None


def _as_text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_case(text: bytes | str, fmt: str = NATIVE_JSON) -> NetworkCase:
    """Parse case text in the declared format into a validated NetworkCase."""
    return parse_document(text, fmt).case


def parse_document(text: bytes | str, fmt: str = NATIVE_JSON) -> CaseDocument:
    text = _as_text(text)
    if fmt == NATIVE_JSON:
        return _parse_native(text)
    if fmt == MATPOWER:
        return _parse_matpower(text)
    raise CaseError(f"unknown case format {fmt!r}")


def format_for_path(path: str) -> str:
    return MATPOWER if str(path).endswith(".m") else NATIVE_JSON


# -- native JSON ------------------------------------------------------------


def _parse_native(text: str) -> CaseDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise CaseError("case document must be a JSON object")

    def need(obj, key, where):
        if not isinstance(obj, dict) or key not in obj:
            raise CaseError(f"{where} is missing required field {key!r}")
        return obj[key]

    def records(key):
        value = need(doc, key, "case")
        if not isinstance(value, list) or not all(isinstance(r, dict) for r in value):
            raise CaseError(f"{key!r} must be a list of objects")
        return value

    buses = []
    for rec in records("buses"):
        buses.append(
            Bus(
                id=int(need(rec, "id", "bus record")),
                kind=str(need(rec, "kind", f"bus {rec.get('id')}")).lower(),
                pd=float(rec.get("pd", 0.0)),
                qd=float(rec.get("qd", 0.0)),
                pg=float(rec.get("pg", 0.0)),
                qg=float(rec.get("qg", 0.0)),
                vset=float(rec.get("vset", 1.0)),
                gs=float(rec.get("gs", 0.0)),
                bs=float(rec.get("bs", 0.0)),
            )
        )
    branches = []
    for rec in records("branches"):
        branches.append(
            Branch(
                from_bus=int(need(rec, "from", "branch record")),
                to_bus=int(need(rec, "to", "branch record")),
                r=float(rec.get("r", 0.0)),
                x=float(need(rec, "x", "branch record")),
                b=float(rec.get("b", 0.0)),
                tap=float(rec.get("tap", 1.0)),
            )
        )
    try:
        case = NetworkCase(
            name=str(doc.get("name", "case")),
            base_mva=float(doc.get("base_mva", 100.0)),
            buses=tuple(buses),
            branches=tuple(branches),
        )
    except ValueError as exc:
        raise CaseError(str(exc)) from exc

    injections: tuple[stochastic.UncertainInjection, ...] = ()
    correlations = None
    if "uncertainty" in doc and doc["uncertainty"]:
        unc = doc["uncertainty"]
        p_sched, q_sched = case.scheduled_injections()
        recs = []
        for rec in unc.get("injections", []):
            bus_id = int(need(rec, "bus", "uncertainty record"))
            idx = case.bus_index(bus_id)
            p_mean = float(rec.get("p_mean", p_sched[idx]))
            q_mean = float(rec.get("q_mean", q_sched[idx]))
            recs.append(
                stochastic.UncertainInjection(
                    bus=bus_id,
                    p_mean=p_mean,
                    p_std=float(rec.get("p_std", DEFAULT_STD_FRACTION * abs(p_mean))),
                    q_mean=q_mean,
                    q_std=float(rec.get("q_std", DEFAULT_STD_FRACTION * abs(q_mean))),
                )
            )
        injections = tuple(recs)
        pairs = tuple(
            (int(rec["bus_i"]), int(rec["bus_j"]), float(rec["rho"]))
            for rec in unc.get("correlations", [])
        )
        correlations = stochastic.CorrelationSpec(pairs=pairs)
    return CaseDocument(case=case, injections=injections, correlations=correlations)


def emit_case(case: NetworkCase, document: CaseDocument | None = None) -> str:
    """Serialize a case to the native JSON schema.

    Floats are written at full precision so parse(emit(case)) == case.
    """
    payload: dict = {
        "schema": SCHEMA,
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": [
            {
                "id": b.id,
                "kind": b.kind,
                "pd": b.pd,
                "qd": b.qd,
                "pg": b.pg,
                "qg": b.qg,
                "vset": b.vset,
                "gs": b.gs,
                "bs": b.bs,
            }
            for b in case.buses
        ],
        "branches": [
            {
                "from": br.from_bus,
                "to": br.to_bus,
                "r": br.r,
                "x": br.x,
                "b": br.b,
                "tap": br.tap,
            }
            for br in case.branches
        ],
    }
    if document is not None and document.injections:
        payload["uncertainty"] = {
            "injections": [
                {
                    "bus": inj.bus,
                    "p_mean": inj.p_mean,
                    "p_std": inj.p_std,
                    "q_mean": inj.q_mean,
                    "q_std": inj.q_std,
                }
                for inj in document.injections
            ],
            "correlations": [
                {"bus_i": i, "bus_j": j, "rho": rho}
                for i, j, rho in (document.correlations.pairs if document.correlations else ())
            ],
        }
    return json.dumps(payload, indent=2) + "\n"


# -- MATPOWER subset ----------------------------------------------------------

_MP_USED_COLUMNS = {"bus": 13, "branch": 13, "gen": 8}


def _parse_matpower(text: str) -> CaseDocument:
    stripped = re.sub(r"%[^\n]*", "", text)
    name_match = re.search(r"function\s+mpc\s*=\s*(\w+)", stripped)
    case_name = name_match.group(1) if name_match else "matpower-case"

    def scalar(name: str) -> float | None:
        m = re.search(rf"mpc\.{name}\s*=\s*([-\d.eE+]+)\s*;", stripped)
        return float(m.group(1)) if m else None

    def table(name: str) -> list[list[float]] | None:
        m = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\];", stripped, flags=re.DOTALL)
        if not m:
            return None
        line_base = text[: m.start()].count("\n") + 1
        rows = []
        body = m.group(1)
        for k, raw in enumerate(re.split(r"[;\n]", body)):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rows.append([float(tok) for tok in raw.split()])
            except ValueError as exc:
                raise CaseError(
                    f"mpc.{name} row {len(rows) + 1} has a non-numeric token",
                    line=line_base + body[: body.find(raw)].count("\n"),
                ) from exc
        return rows

    base = scalar("baseMVA")
    if base is None:
        raise CaseError("mpc.baseMVA not found")
    bus_rows = table("bus")
    branch_rows = table("branch")
    if bus_rows is None or branch_rows is None:
        raise CaseError("mpc.bus and mpc.branch tables are both required")
    gen_rows = table("gen") or []

    for name, rows in (("bus", bus_rows), ("branch", branch_rows), ("gen", gen_rows)):
        if rows and len(rows[0]) > _MP_USED_COLUMNS[name]:
            _warnings.warn(
                f"mpc.{name}: columns beyond {_MP_USED_COLUMNS[name]} are ignored",
                UserWarning,
                stacklevel=3,
            )

    kind_map = {1: network.PQ, 2: network.PV, 3: network.SLACK}
    gen_by_bus: dict[int, list[list[float]]] = {}
    for row in gen_rows:
        if len(row) < 8:
            raise CaseError("mpc.gen rows need at least 8 columns")
        if row[7] <= 0:
            _warnings.warn("out-of-service generator ignored", UserWarning, stacklevel=3)
            continue
        gen_by_bus.setdefault(int(row[0]), []).append(row)

    buses = []
    for row in bus_rows:
        if len(row) < 13:
            raise CaseError("mpc.bus rows need at least 13 columns")
        bus_id = int(row[0])
        bus_type = int(row[1])
        if bus_type not in kind_map:
            raise CaseError(f"bus {bus_id}: unsupported bus type {bus_type}")
        gens = gen_by_bus.get(bus_id, [])
        pg = sum(g[1] for g in gens) / base
        qg = sum(g[2] for g in gens) / base
        vset = gens[0][5] if gens else row[7]
        buses.append(
            Bus(
                id=bus_id,
                kind=kind_map[bus_type],
                pd=row[2] / base,
                qd=row[3] / base,
                pg=pg,
                qg=qg,
                vset=vset,
                gs=row[4] / base,
                bs=row[5] / base,
            )
        )

    branches = []
    for row in branch_rows:
        if len(row) < 11:
            raise CaseError("mpc.branch rows need at least 11 columns")
        if row[9] != 0.0:
            raise CaseError(
                f"branch {int(row[0])}-{int(row[1])}: phase shifters are not supported"
            )
        if row[10] <= 0:
            _warnings.warn(
                f"out-of-service branch {int(row[0])}-{int(row[1])} ignored",
                UserWarning,
                stacklevel=3,
            )
            continue
        tap = row[8] if row[8] != 0.0 else 1.0
        branches.append(
            Branch(
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                r=row[2],
                x=row[3],
                b=row[4],
                tap=tap,
            )
        )

    try:
        case = NetworkCase(
            name=case_name, base_mva=base, buses=tuple(buses), branches=tuple(branches)
        )
    except ValueError as exc:
        raise CaseError(str(exc)) from exc
    return CaseDocument(case=case)


# -- report emission ----------------------------------------------------------


def _q15(x: float) -> float:
    """Quantize to 15 significant digits; emitted values re-parse exactly."""
    return float(f"{x:.15g}")


def _fmt15(x: float) -> str:
    return f"{x:.15g}"


def report_payload(report: solvers.SolveReport, degrees: bool = False) -> dict:
    """JSON-ready dict for a solve report, floats at 15 significant digits."""
    angle = 180.0 / np.pi if degrees else 1.0
    payload = {
        "method": report.method,
        "converged": report.converged,
        "iterations": report.iterations,
        "tolerance": _q15(report.tolerance),
        "angle_unit": "degrees" if degrees else "radians",
        "bus_ids": list(report.bus_ids),
        "v": [_q15(x) for x in report.v],
        "theta": [_q15(x * angle) for x in report.theta],
        "branch_flows": [
            {
                "from": f.from_bus,
                "to": f.to_bus,
                "p_from": _q15(f.p_from),
                "q_from": _q15(f.q_from),
                "p_to": _q15(f.p_to),
                "q_to": _q15(f.q_to),
            }
            for f in report.flows
        ],
        "resource": (
            {
                "n_clock": report.resource.n_clock,
                "n_vector": report.resource.n_vector,
                "qubits_total": report.resource.qubits_total,
                "hhl_invocations": report.resource.hhl_invocations,
                "prepare_reuse": report.resource.prepare_reuse,
            }
            if report.resource
            else None
        ),
        "warnings": list(report.warnings),
        "trace": [
            {
                "iteration": rec.iteration,
                "v": [_q15(x) for x in rec.v],
                "theta": [_q15(x * angle) for x in rec.theta],
                "mismatch_p": _q15(rec.norm_p),
                "mismatch_q": _q15(rec.norm_q),
                "hhl_success": [_q15(p) for p in rec.hhl_success],
            }
            for rec in report.trace
        ],
    }
    return payload


def emit_report(report: solvers.SolveReport, fmt: str = "json", degrees: bool = False) -> str:
    """Serialize a solve report as JSON or as the CSV iteration trace."""
    if fmt == "json":
        return json.dumps(report_payload(report, degrees), indent=2, sort_keys=True) + "\n"
    if fmt == "csv-trace":
        return emit_csv_trace(report, degrees)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_csv_trace(report: solvers.SolveReport, degrees: bool = False) -> str:
    """Iteration trace: iter, V per non-slack bus, theta likewise, norms."""
    angle = 180.0 / np.pi if degrees else 1.0
    ids = list(report.bus_ids)
    keep = [i for i, bus_id in enumerate(ids) if bus_id != report.slack_bus]
    header = (
        ["iter"]
        + [f"V_{ids[i]}" for i in keep]
        + [f"theta_{ids[i]}" for i in keep]
        + ["mismP_inf", "mismQ_inf"]
    )
    lines = [",".join(header)]
    for rec in report.trace:
        row = (
            [str(rec.iteration)]
            + [_fmt15(rec.v[i]) for i in keep]
            + [_fmt15(rec.theta[i] * angle) for i in keep]
            + [_fmt15(rec.norm_p), _fmt15(rec.norm_q)]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_monte_carlo(result: stochastic.MonteCarloResult) -> str:
    """Deterministic JSON summary of a Monte Carlo study."""
    payload = {
        "samples": result.n_samples,
        "converged_samples": result.n_converged,
        "uncertain_buses": list(result.uncertain_buses),
        "voltage_mean": {str(b): _q15(v) for b, v in sorted(result.voltage_mean.items())},
        "voltage_std": {str(b): _q15(v) for b, v in sorted(result.voltage_std.items())},
        "voltage_correlation": [
            {"bus_i": i, "bus_j": j, "rho": _q15(r)}
            for (i, j), r in sorted(result.voltage_correlation.items())
        ],
        "injection_correlation": [
            {"bus_i": i, "bus_j": j, "rho": _q15(r)}
            for (i, j), r in sorted(result.injection_correlation.items())
        ],
        "histograms": {
            str(b): {
                "counts": [int(c) for c in counts],
                "edges": [_q15(e) for e in edges],
            }
            for b, (counts, edges) in sorted(result.histograms.items())
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
