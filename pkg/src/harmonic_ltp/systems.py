"""JSON formats for periodic systems, signals and scenarios.

Matrix signals are stored entry-by-entry, either as explicit phasor
``terms`` or as sums of named ``waves``:

    {
      "rows": 2, "cols": 2, "real": true,
      "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": -1.0, "im": 0.0}]},
        {"row": 0, "col": 1, "waves": [
            {"type": "square", "amplitude": 1.0, "band": 21}]}
      ]
    }

Rows and columns are 0-based.  Wave primitives know nothing about the
period; harmonic indices are always relative to the ambient fundamental
omega = 2*pi/T.  A system file wraps matrices under single-letter keys:

    {"period": 1.0, "A": {...}, "B": {...}, "Q": {...}, "R": {...}}

A tracking scenario lists an initial state and time segments, each holding
either a feedforward input ``u_ref`` or a desired state ``x_d`` (both
column signals in the matrix format above):

    {"x0": [0.0, 0.0],
     "segments": [{"t": [0.0, 4.0], "u_ref": {...}},
                  {"t": [8.0, 12.0], "x_d": {...}}]}
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .fourier import FourierMatrix

__all__ = [
    "wave_phasors",
    "parse_matrix",
    "serialize_matrix",
    "System",
    "load_system",
    "loads_system",
    "dump_system",
    "Scenario",
    "Segment",
    "load_scenario",
    "bundled_path",
]

_WAVE_TYPES = ("const", "cos", "sin", "square", "triangle", "sawtooth")


def wave_phasors(wave: dict) -> dict[int, complex]:
    """Phasor coefficients {k: c_k} of one named waveform primitive.

    Supported primitives (a = amplitude, h = harmonic, phi = phase):

    - const:    a
    - cos:      a*cos(h*omega*t + phi)
    - sin:      a*sin(h*omega*t + phi)
    - square:   a*(4/pi)   * sum_{odd p <= band} sin(p*(h*omega*t + phi))/p
    - triangle: a*(8/pi^2) * sum_{odd p <= band} cos(p*(h*omega*t + phi))/p^2
    - sawtooth: a*(-2/pi)  * sum_{p=1..band}    sin(p*(h*omega*t + phi))/p

    Square, triangle and sawtooth are genuine waveforms, so their phase is
    a time shift and enters each series term scaled by p.  The square is
    the truncated series of a*sign(sin(h*omega*t + phi)); the triangle
    peaks at +a where the shifted argument crosses zero; the sawtooth
    rises from -a to +a over each period and drops where the shifted
    argument crosses a multiple of 2*pi (the usual signal-library
    convention).  For cos/sin the phase is the ordinary constant offset.
    """
    if not isinstance(wave, dict) or "type" not in wave:
        raise SchemaError(f"wave primitive must be an object with 'type': {wave!r}")
    kind = wave["type"]
    if kind not in _WAVE_TYPES:
        raise SchemaError(f"unknown wave type {kind!r}; expected one of {_WAVE_TYPES}")
    known = {"type", "amplitude", "harmonic", "phase", "band"}
    extra = set(wave) - known
    if extra:
        raise SchemaError(f"unknown wave fields {sorted(extra)} in {kind!r}")
    amp = float(wave.get("amplitude", 1.0))
    harm = int(wave.get("harmonic", 1))
    phase = float(wave.get("phase", 0.0))
    if harm < 1 and kind != "const":
        raise SchemaError("wave harmonic must be a positive integer")

    def _pair(h: int, c_plus: complex) -> dict[int, complex]:
        # coefficient at -h follows from realness of every primitive
        return {h: c_plus, -h: np.conj(c_plus)}

    def _cos_pair(h: int, a: float, phi: float) -> dict[int, complex]:
        return _pair(h, 0.5 * a * np.exp(1j * phi))

    def _sin_pair(h: int, a: float, phi: float) -> dict[int, complex]:
        return _pair(h, -0.5j * a * np.exp(1j * phi))

    out: dict[int, complex] = {}

    def _acc(d: dict[int, complex]):
        for k, v in d.items():
            out[k] = out.get(k, 0.0 + 0.0j) + v

    if kind == "const":
        out[0] = complex(amp)
        return out
    if kind in ("cos", "sin"):
        _acc(_cos_pair(harm, amp, phase) if kind == "cos"
             else _sin_pair(harm, amp, phase))
        return out
    band = wave.get("band")
    if band is None:
        raise SchemaError(f"wave type {kind!r} requires a 'band'")
    band = int(band)
    if band < 1:
        raise SchemaError("wave band must be >= 1")
    if kind == "square":
        for p in range(1, band + 1, 2):
            _acc(_sin_pair(p * harm, amp * 4.0 / (math.pi * p), p * phase))
    elif kind == "triangle":
        for p in range(1, band + 1, 2):
            _acc(_cos_pair(p * harm, amp * 8.0 / (math.pi ** 2 * p ** 2),
                           p * phase))
    else:  # sawtooth
        for p in range(1, band + 1):
            _acc(_sin_pair(p * harm, -amp * 2.0 / (math.pi * p), p * phase))
    return out


def _entry_phasors(entry: dict) -> dict[int, complex]:
    has_terms = "terms" in entry
    has_waves = "waves" in entry
    if has_terms == has_waves:
        raise SchemaError(
            f"entry must carry exactly one of 'terms' or 'waves': {entry!r}"
        )
    out: dict[int, complex] = {}
    if has_terms:
        for term in entry["terms"]:
            if "k" not in term:
                raise SchemaError(f"term missing 'k': {term!r}")
            k = int(term["k"])
            val = complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
            out[k] = out.get(k, 0.0 + 0.0j) + val
    else:
        for wave in entry["waves"]:
            for k, v in wave_phasors(wave).items():
                out[k] = out.get(k, 0.0 + 0.0j) + v
    return out


def parse_matrix(spec: dict, period: float) -> FourierMatrix:
    """Build a FourierMatrix from its JSON object form."""
    if not isinstance(spec, dict):
        raise SchemaError(f"matrix spec must be an object, got {type(spec).__name__}")
    try:
        rows, cols = int(spec["rows"]), int(spec["cols"])
    except KeyError as exc:
        raise SchemaError(f"matrix spec missing {exc.args[0]!r}") from exc
    if rows < 1 or cols < 1:
        raise SchemaError("matrix dimensions must be positive")
    real = bool(spec.get("real", False))
    entries = spec.get("entries", [])
    per_entry: dict[tuple[int, int], dict[int, complex]] = {}
    band = 0
    for entry in entries:
        try:
            i, j = int(entry["row"]), int(entry["col"])
        except KeyError as exc:
            raise SchemaError(f"entry missing {exc.args[0]!r}: {entry!r}") from exc
        if not (0 <= i < rows and 0 <= j < cols):
            raise SchemaError(f"entry ({i},{j}) outside {rows}x{cols} matrix")
        ph = _entry_phasors(entry)
        acc = per_entry.setdefault((i, j), {})
        for k, v in ph.items():
            acc[k] = acc.get(k, 0.0 + 0.0j) + v
        if ph:
            band = max(band, max(abs(k) for k in ph))
    data = np.zeros((rows, cols, 2 * band + 1), dtype=complex)
    for (i, j), ph in per_entry.items():
        for k, v in ph.items():
            data[i, j, band + k] = v
    try:
        return FourierMatrix(period, data, real=real)
    except Exception as exc:
        raise SchemaError(f"invalid matrix: {exc}") from exc


def _fmt(x: float) -> float:
    # normalize -0.0 so serialization is canonical
    return 0.0 if x == 0.0 else float(x)


def serialize_matrix(f: FourierMatrix) -> dict:
    """Canonical JSON object of a FourierMatrix (explicit sorted terms)."""
    entries = []
    for i in range(f.rows):
        for j in range(f.cols):
            terms = []
            for k in range(-f.band, f.band + 1):
                c = f.phasor(i, j, k)
                if c != 0.0:
                    terms.append({"k": k, "re": _fmt(c.real), "im": _fmt(c.imag)})
            if terms:
                entries.append({"row": i, "col": j, "terms": terms})
    return {"rows": f.rows, "cols": f.cols, "real": bool(f.real),
            "entries": entries}


_MATRIX_KEYS = ("A", "B", "Q", "R")


@dataclasses.dataclass
class System:
    """A periodic plant: state matrix A plus optional B, Q, R weights."""

    period: float
    a: FourierMatrix
    b: FourierMatrix | None = None
    q: FourierMatrix | None = None
    r: FourierMatrix | None = None

    @property
    def n(self) -> int:
        return self.a.rows

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name.lower()) is None:
                raise SchemaError(f"system file does not define matrix {name!r}")


def loads_system(text: str) -> System:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("system file must hold a JSON object")
    if "period" not in raw:
        raise SchemaError("system file missing 'period'")
    period = float(raw["period"])
    if period <= 0:
        raise SchemaError("'period' must be positive")
    if "A" not in raw:
        raise SchemaError("system file missing matrix 'A'")
    unknown = set(raw) - {"period", *_MATRIX_KEYS}
    if unknown:
        raise SchemaError(f"unknown system fields {sorted(unknown)}")
    mats = {}
    for key in _MATRIX_KEYS:
        mats[key.lower()] = parse_matrix(raw[key], period) if key in raw else None
    sys = System(period=period, **mats)
    if sys.a.rows != sys.a.cols:
        raise SchemaError("matrix 'A' must be square")
    for key in ("b", "q", "r"):
        m = getattr(sys, key)
        if m is None:
            continue
        if key == "b" and m.rows != sys.n:
            raise SchemaError("matrix 'B' row count must match A")
        if key == "q" and m.rows != sys.n and m.cols != sys.n:
            raise SchemaError("matrix 'Q' must be n x n")
        if key == "r" and (sys.b is None or m.rows != sys.b.cols or m.cols != sys.b.cols):
            raise SchemaError("matrix 'R' must be square with B's column count")
    return sys


def load_system(path) -> System:
    return loads_system(Path(path).read_text())


def dump_system(sys_or_raw) -> str:
    """Canonical serialization; load(dump(load(p))) == load(p)."""
    if isinstance(sys_or_raw, System):
        raw = {"period": float(sys_or_raw.period)}
        for key in _MATRIX_KEYS:
            m = getattr(sys_or_raw, key.lower())
            if m is not None:
                raw[key] = serialize_matrix(m)
    else:
        raw = sys_or_raw
    return json.dumps(raw, indent=1, sort_keys=True) + "\n"


@dataclasses.dataclass
class Segment:
    t0: float
    t1: float
    u_ref: FourierMatrix | None = None
    x_d: FourierMatrix | None = None


@dataclasses.dataclass
class Scenario:
    x0: np.ndarray
    segments: list[Segment]


def load_scenario(path, period: float) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "segments" not in raw:
        raise SchemaError("scenario file must hold an object with 'segments'")
    x0 = np.asarray(raw.get("x0", []), dtype=float)
    segments = []
    prev_end = None
    for seg in raw["segments"]:
        if "t" not in seg or len(seg["t"]) != 2:
            raise SchemaError(f"segment needs 't': [start, end]: {seg!r}")
        t0, t1 = float(seg["t"][0]), float(seg["t"][1])
        if t1 <= t0:
            raise SchemaError(f"segment times must increase: {seg['t']}")
        if prev_end is not None and not math.isclose(t0, prev_end):
            raise SchemaError("segments must be contiguous")
        prev_end = t1
        has_u = "u_ref" in seg
        has_xd = "x_d" in seg
        if has_u == has_xd:
            raise SchemaError("segment needs exactly one of 'u_ref' or 'x_d'")
        if has_u:
            u = parse_matrix(seg["u_ref"], period)
            segments.append(Segment(t0, t1, u_ref=u))
        else:
            xd = parse_matrix(seg["x_d"], period)
            segments.append(Segment(t0, t1, x_d=xd))
    if not segments:
        raise SchemaError("scenario has no segments")
    return Scenario(x0=x0, segments=segments)


def bundled_path(name: str) -> Path:
    """Path of a system/scenario file shipped with the package."""
    here = Path(__file__).resolve().parent / "systems" / name
    if not here.exists():
        raise SchemaError(f"no bundled file named {name!r}")
    return here
