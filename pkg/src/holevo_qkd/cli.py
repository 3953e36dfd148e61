"""Command-line front end.

Every command returns a ``ReportDocument``: a JSON-native payload plus the
provenance needed to re-execute it (command, resolved parameters, seed,
config hash, package version).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__, optics
from .attacks import exact_eve_stats, parse_grid, strategy_from_spec, strategy_sweep
from .basisclass import PRESETS, BasisError, LetterBasis, load_basis, parse_basis, screen_basis
from .infotheory import TABLE_I
from .protocol import (
    ConfigError,
    SequentialAccessViolation,
    config_from_dict,
    config_to_dict,
    detection_curve,
    run_protocol,
    transcript_lines,
)
from .rng import derive_rng

COMMANDS = ("run", "screen-basis", "analyzer-check", "eve-stats", "sweep", "detection-curve", "table1")
FORMATS = ("human", "csv", "json")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VULNERABLE = 3


class RequestError(ValueError):
    pass


@dataclass(frozen=True)
class CommandRequest:
    command: str
    params: dict = field(default_factory=dict)
    format: str = "human"


@dataclass
class ReportDocument:
    payload: dict
    provenance: dict
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        return json.dumps({"payload": self.payload, "provenance": self.provenance}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        data = json.loads(text)
        return cls(data["payload"], data["provenance"])


def _jsonable(obj: Any) -> Any:
    return json.loads(json.dumps(obj))


def config_hash(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, "params": params}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# -- parameter handling ----------------------------------------------------------


def _resolve_basis(value) -> tuple[LetterBasis, Any]:
    """Returns the basis and a self-contained description for provenance."""
    if isinstance(value, list):
        text = "\n".join(" ".join(repr(float(x)) for x in row) for row in value)
        return parse_basis(text), value
    if str(value).lower() in PRESETS:
        return PRESETS[str(value).lower()], str(value).lower()
    basis = load_basis(str(value))
    return basis, basis.to_rows()


def _take(params: dict, allowed: dict) -> dict:
    unknown = set(params) - set(allowed)
    if unknown:
        raise RequestError(f"unknown parameters {sorted(unknown)}")
    return {k: params.get(k, default) for k, default in allowed.items()}


# -- commands --------------------------------------------------------------------


def _table1(p: dict):
    _take(p, {})
    rows = []
    for row in TABLE_I:
        e = row.efficiency
        rows.append(
            {
                "scheme": row.scheme,
                "b_s": str(row.b_s),
                "q_t": str(row.q_t),
                "b_t": str(row.b_t),
                "qualifier": row.qualifier,
                "efficiency_exact": str(e),
                "efficiency": float(e),
                "display": row.display(2),
            }
        )
    return {"rows": rows}, {}, None, EXIT_OK


def _analyzer_check(p: dict):
    p = _take(p, {"shots": 100_000, "seed": 42})
    shots, seed = int(p["shots"]), int(p["seed"])
    if shots < 0:
        raise RequestError("shots must be non-negative")
    basis = PRESETS["202"]
    rows = []
    for i, state in enumerate(basis.states):
        probs = optics.click_probs_batch(state.amplitudes[None, :])[0]
        support = {str(pat): float(q) for pat, q in zip(optics.ALL_PATTERNS, probs) if q > 1e-12}
        success = float(sum(q for pat, q in zip(optics.ALL_PATTERNS, probs) if optics.discriminate(pat) == i))
        row = {"letter": i, "bits": basis.labels[i], "patterns": support, "success": success}
        if shots:
            u = derive_rng(seed, 2, i).random(shots)
            idx = optics.sample_clicks_batch(np.tile(probs, (shots, 1)), u)
            counts = np.bincount(idx, minlength=10)
            freq = counts / shots
            sigma = np.sqrt(probs * (1 - probs) / shots)
            row["mc_frequencies"] = {
                str(optics.ALL_PATTERNS[k]): float(freq[k]) for k in range(10) if counts[k] or probs[k] > 1e-12
            }
            row["mc_success"] = float(np.mean(optics.DECISION_TABLE[idx] == i))
            row["mc_within_3sigma"] = bool(np.all(np.abs(freq - probs) <= 3 * sigma + 1e-12))
        rows.append(row)
    return {"rows": rows}, {"shots": shots, "seed": seed}, seed, EXIT_OK


def _run(p: dict):
    p = _take(p, {"config": None, "seed": None, "transcript": None})
    cfg = p["config"]
    if cfg is None:
        cfg = {}
    elif not isinstance(cfg, dict):
        path = Path(cfg)
        try:
            cfg = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if isinstance(cfg.get("basis"), str) and cfg["basis"].lower() not in PRESETS:
            basis_path = Path(cfg["basis"])
            if not basis_path.is_absolute():
                basis_path = path.parent / basis_path
            cfg = {**cfg, "basis": load_basis(str(basis_path)).to_rows()}
    if p["seed"] is not None:
        cfg = {**cfg, "seed": int(p["seed"])}
    config = config_from_dict(cfg)
    result = run_protocol(config)
    if p["transcript"]:
        Path(p["transcript"]).write_text("\n".join(transcript_lines(result.records)) + "\n")
    payload = {
        "summary": result.summary.as_dict(),
        "eve_exact": {
            "info_gain": result.eve.info_gain,
            "detect_prob": result.eve.detect_prob,
        },
        "schedule": {
            "arrival": result.schedule.arrival,
            "eve_holds_qubit1": list(result.schedule.eve_holds_qubit1),
            "eve_holds_qubit2": list(result.schedule.eve_holds_qubit2),
        },
    }
    return payload, {"config": config_to_dict(config)}, config.seed, EXIT_OK


def _screen_basis(p: dict):
    p = _take(p, {"basis": "202", "strict": False})
    basis, desc = _resolve_basis(p["basis"])
    report = screen_basis(basis)
    payload = {
        "basis": basis.name,
        "signature": report.signature.code,
        "concurrences": list(report.signature.concurrences),
        "borderline": list(report.signature.borderline),
        "verdict": report.verdict,
        "mor_satisfied_pairs": [list(pr) for pr in report.mor.satisfied_pairs],
        "rows": [
            {
                "pair": f"{pr.i}-{pr.j}",
                "first_nonorthogonal": pr.first_nonorthogonal,
                "first_nonidentical": pr.first_nonidentical,
                "second_nonorthogonal": pr.second_nonorthogonal,
                "satisfied": pr.satisfied,
            }
            for pr in report.mor.pairs
        ],
        "attacks": {
            name: {"info_gain": s.info_gain, "detect_prob": s.detect_prob}
            for name, s in report.attack_stats.items()
        },
    }
    code = EXIT_VULNERABLE if p["strict"] and report.vulnerable else EXIT_OK
    return payload, {"basis": desc, "strict": bool(p["strict"])}, None, code


def _eve_stats(p: dict):
    p = _take(p, {"basis": "202", "attack": "ancilla-swap"})
    basis, desc = _resolve_basis(p["basis"])
    stats = exact_eve_stats(basis, strategy_from_spec(p["attack"]))
    payload = stats.as_dict()
    payload["rows"] = [
        {"letter": i, "bits": basis.labels[i], "detect_prob": d} for i, d in enumerate(stats.per_letter_detect)
    ]
    return payload, {"basis": desc, "attack": p["attack"]}, None, EXIT_OK


DEFAULT_GRID = "theta1=0:90:15;theta2=0:90:15"


def _sweep(p: dict):
    p = _take(p, {"basis": "202", "grid": DEFAULT_GRID})
    basis, desc = _resolve_basis(p["basis"])
    result = strategy_sweep(basis, parse_grid(p["grid"]))
    rows = []
    for params, stats in result.points:
        axes = [k for k in ("theta1", "theta2", "phi1", "phi2") if k in params]
        row = {k: "off" if params[k] is None else params[k] for k in axes}
        row.update(info_gain=stats.info_gain, detect_prob=stats.detect_prob)
        rows.append(row)
    detects = [r["detect_prob"] for r in rows]
    payload = {
        "rows": rows,
        "best_info": rows[result.best_info],
        "best_stealth": rows[result.best_stealth],
        "max_detect_prob": max(detects),
        "min_detect_prob": min(detects),
    }
    return payload, {"basis": desc, "grid": p["grid"]}, None, EXIT_OK


def _detection_curve(p: dict):
    p = _take(p, {"p": 0.25, "n_max": 64})
    prob, n_max = float(p["p"]), int(p["n_max"])
    curve = detection_curve(prob, n_max)
    rows = [{"N": n, "detect_prob": v} for n, v in enumerate(curve, 1)]
    return {"rows": rows}, {"p": prob, "n_max": n_max}, None, EXIT_OK


HANDLERS = {
    "run": _run,
    "screen-basis": _screen_basis,
    "analyzer-check": _analyzer_check,
    "eve-stats": _eve_stats,
    "sweep": _sweep,
    "detection-curve": _detection_curve,
    "table1": _table1,
}


def execute(req: CommandRequest) -> ReportDocument:
    if req.command not in HANDLERS:
        raise RequestError(f"unknown command {req.command!r}")
    if req.format not in FORMATS:
        raise RequestError(f"unknown format {req.format!r}")
    payload, params, seed, code = HANDLERS[req.command](dict(req.params))
    params = _jsonable(params)
    provenance = {
        "command": req.command,
        "params": params,
        "seed": seed,
        "config_hash": config_hash(req.command, params),
        "version": __version__,
    }
    return ReportDocument(_jsonable(payload), provenance, code)


def replay(doc: ReportDocument) -> ReportDocument:
    prov = doc.provenance
    return execute(CommandRequest(prov["command"], dict(prov["params"])))


# -- rendering ---------------------------------------------------------------------


def _fmt(value, digits: int = 4) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    if isinstance(value, dict):
        return " ".join(f"{k}:{_fmt(v, digits)}" for k, v in value.items())
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v, digits) for v in value) + "]"
    return "-" if value is None else str(value)


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        cols += [k for k in row if k not in cols]
    return cols


def _render_table(rows: list[dict], cols: list[str]) -> list[str]:
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    out.append("  ".join("-" * w for w in widths))
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return out


def render(doc: ReportDocument, fmt: str = "human") -> str:
    if fmt == "json":
        return doc.to_json() + "\n"
    rows = doc.payload.get("rows")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if rows:
            cols = _columns(rows)
            writer.writerow(cols)
            for r in rows:
                writer.writerow([json.dumps(r.get(c)) if isinstance(r.get(c), (dict, list)) else r.get(c) for c in cols])
        else:
            writer.writerow(["key", "value"])
            for k, v in _flatten(doc.payload):
                writer.writerow([k, v])
        return buf.getvalue()
    if fmt != "human":
        raise RequestError(f"unknown format {fmt!r}")
    lines = [f"# {doc.provenance['command']}  (hash {doc.provenance['config_hash']})"]
    if doc.provenance["command"] == "table1":
        # two-decimal display with bound markers
        table = [{"scheme": r["scheme"], "b_s": r["b_s"], "q_t": r["q_t"], "b_t": r["b_t"], "E": r["display"]} for r in rows]
        lines += _render_table(table, ["scheme", "b_s", "q_t", "b_t", "E"])
        return "\n".join(lines) + "\n"
    for k, v in _flatten({k: v for k, v in doc.payload.items() if k != "rows"}):
        lines.append(f"{k}: {_fmt(v)}")
    if rows:
        lines += _render_table(rows, _columns(rows))
    return "\n".join(lines) + "\n"


def _flatten(d: dict, prefix: str = ""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            continue
        else:
            yield key, v


# -- argv ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holevo-qkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--format", choices=FORMATS, default="human")
        return sp

    sp = add("run", "run the key distribution protocol")
    sp.add_argument("--config", help="JSON run config")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--transcript", help="write the per-step transcript (CSV) here")

    sp = add("screen-basis", "classify a letter basis and check its known weaknesses")
    sp.add_argument("--basis", default="202", help=f"basis file or preset ({', '.join(PRESETS)})")
    sp.add_argument("--strict", action="store_true", help="exit 3 when the basis is vulnerable")

    sp = add("analyzer-check", "verify the linear-optics analyzer on the 202 letters")
    sp.add_argument("--shots", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=42)

    sp = add("eve-stats", "exact information gain and detection probability of an attack")
    sp.add_argument("--basis", default="202")
    sp.add_argument("--attack", default="ancilla-swap", help="NAME[,key=value...]")

    sp = add("sweep", "scan intercept-resend measurement angles")
    sp.add_argument("--basis", default="202")
    sp.add_argument("--grid", default=DEFAULT_GRID, help="e.g. 'theta1=0:90:15;theta2=off,0,45'")

    sp = add("detection-curve", "cumulative detection probability after N tests")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--n-max", type=int, required=True)

    add("table1", "efficiency of published QKD protocols")
    return parser


def request_from_args(args: argparse.Namespace) -> CommandRequest:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "format")}
    if args.command == "run":
        params = {k: v for k, v in params.items() if v is not None}
    return CommandRequest(args.command, params, args.format)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    req = request_from_args(args)
    try:
        doc = execute(req)
    except (RequestError, ConfigError, BasisError, SequentialAccessViolation, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(render(doc, req.format))
    return doc.exit_code


if __name__ == "__main__":
    sys.exit(main())
