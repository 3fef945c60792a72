"""Regenerate the bundled system and scenario files in canonical form.

The matrices are stated here declaratively (waveform primitives and
hand-written phasor tables); parsing and re-serializing them through the
package produces the canonical explicit-term JSON that ships in
``src/harmonic_ltp/systems``.  Run from the repository root:

    python scripts/make_systems.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from harmonic_ltp.systems import dump_system, loads_system

OUT = Path(__file__).resolve().parent.parent / "src" / "harmonic_ltp" / "systems"

WAVE_BAND = 21


def _terms(pairs):
    out = []
    for k, c in pairs:
        term = {"k": k}
        if c.real:
            term["re"] = c.real
        if c.imag:
            term["im"] = c.imag
        out.append(term)
    return out


def scalar_decay() -> dict:
    """Scalar plant a(t) = -1 - cos t + 2 sin t + cos 2t, period 2*pi.

    Strictly negative real part on average, so the system is
    Floquet-Hurwitz; used by the Lyapunov experiments.  B, Q, R make the
    same file reusable for scalar Riccati runs.
    """
    a = {"rows": 1, "cols": 1, "real": True, "entries": [{
        "row": 0, "col": 0, "waves": [
            {"type": "const", "amplitude": -1.0},
            {"type": "cos", "amplitude": -1.0},
            {"type": "sin", "amplitude": 2.0},
            {"type": "cos", "amplitude": 1.0, "harmonic": 2},
        ],
    }]}
    one = {"rows": 1, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": 1.0}]}]}
    two = {"rows": 1, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": 2.0}]}]}
    return {"period": 2.0 * math.pi, "A": a, "B": one, "Q": one, "R": two}


def twoband_complex() -> dict:
    """Real 2x2 plant with band-2 entries, period 2*pi (omega = 1).

    Base exponents sit near -0.29 and -2.71; the finite sections are
    never Hurwitz even though the operator is, which is what the spectrum
    classification experiments demonstrate.
    """
    rows = {
        (0, 0): [(-2, 0.5 + 0j), (-1, 0.6 + 1j), (0, -1 + 0j),
                 (1, 0.6 - 1j), (2, 0.5 + 0j)],
        (0, 1): [(-2, 1.3 + 0.4j), (-1, -2.2 - 0.5j), (0, -0.4 + 0j),
                 (1, -2.2 + 0.5j), (2, 1.3 - 0.4j)],
        (1, 0): [(-2, -0.3 + 0.6j), (-1, 0.4 - 0.7j), (0, -0.1 + 0j),
                 (1, 0.4 + 0.7j), (2, -0.3 - 0.6j)],
        (1, 1): [(-2, -1.3 + 1.8j), (-1, 1.4 + 1.6j), (0, -2 + 0j),
                 (1, 1.4 - 1.6j), (2, -1.3 - 1.8j)],
    }
    a = {"rows": 2, "cols": 2, "real": True, "entries": [
        {"row": i, "col": j, "terms": _terms(pairs)}
        for (i, j), pairs in rows.items()
    ]}
    q = {"rows": 2, "cols": 2, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": 1.0}]},
        {"row": 1, "col": 1, "terms": [{"k": 0, "re": 1.0}]},
    ]}
    return {"period": 2.0 * math.pi, "A": a, "Q": q}


def squarewave_plant() -> dict:
    """Period-1 two-state plant driven by square/triangle/sawtooth entries.

    The waveforms are truncated to their first WAVE_BAND harmonics; the
    open loop is unstable (base exponents near 1 +/- 1.65j) and the LQ
    weights are Q = 100 I, R = 1.
    """
    a = {"rows": 2, "cols": 2, "real": True, "entries": [
        {"row": 0, "col": 0, "waves": [
            {"type": "const", "amplitude": 1.0},
            {"type": "square", "band": WAVE_BAND},
        ]},
        {"row": 0, "col": 1, "waves": [
            {"type": "const", "amplitude": 2.0},
            {"type": "triangle", "amplitude": 2.0, "band": WAVE_BAND},
        ]},
        {"row": 1, "col": 0, "waves": [
            {"type": "const", "amplitude": -1.0},
            {"type": "sawtooth", "phase": math.pi / 4.0, "band": WAVE_BAND},
        ]},
        {"row": 1, "col": 1, "terms": [
            {"k": 0, "re": 1.0},
            {"k": 1, "im": 1.0}, {"k": -1, "im": -1.0},
            {"k": 3, "re": 1.0, "im": 1.0}, {"k": -3, "re": 1.0, "im": -1.0},
            {"k": 5, "re": 1.0}, {"k": -5, "re": 1.0},
        ]},
    ]}
    b = {"rows": 2, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [
            {"k": 0, "re": 1.0},
            {"k": 2, "re": 1.0}, {"k": -2, "re": 1.0},
            {"k": 6, "im": -2.0}, {"k": -6, "im": 2.0},
        ]},
    ]}
    q = {"rows": 2, "cols": 2, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": 100.0}]},
        {"row": 1, "col": 1, "terms": [{"k": 0, "re": 100.0}]},
    ]}
    r = {"rows": 1, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [{"k": 0, "re": 1.0}]},
    ]}
    return {"period": 1.0, "A": a, "B": b, "Q": q, "R": r}


def tracking_scenario() -> dict:
    """Three-segment reference program for the squarewave plant.

    Rest input, then a biased cosine input, then a desired state profile
    (quarter-cosine in the first component, zero in the second, which B's
    zero row makes only approximately reachable).
    """
    zero = {"rows": 1, "cols": 1, "real": True, "entries": []}
    biased_cos = {"rows": 1, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [
            {"k": 0, "re": 1.0}, {"k": 1, "re": 0.5}, {"k": -1, "re": 0.5},
        ]},
    ]}
    desired = {"rows": 2, "cols": 1, "real": True, "entries": [
        {"row": 0, "col": 0, "terms": [
            {"k": 1, "re": 0.125}, {"k": -1, "re": 0.125},
        ]},
    ]}
    return {
        "x0": [0.1, 0.1],
        "segments": [
            {"t": [0.0, 4.0], "u_ref": zero},
            {"t": [4.0, 8.0], "u_ref": biased_cos},
            {"t": [8.0, 12.0], "x_d": desired},
        ],
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, raw in (
        ("scalar_decay.json", scalar_decay()),
        ("twoband_complex.json", twoband_complex()),
        ("squarewave_plant.json", squarewave_plant()),
    ):
        canonical = dump_system(loads_system(json.dumps(raw)))
        (OUT / name).write_text(canonical)
        roundtrip = dump_system(loads_system(canonical))
        assert roundtrip == canonical, name
        print(f"wrote {name} ({len(canonical)} bytes)")

    scen = json.dumps(tracking_scenario(), indent=1, sort_keys=True) + "\n"
    (OUT / "tracking.scenario.json").write_text(scen)
    print(f"wrote tracking.scenario.json ({len(scen)} bytes)")


if __name__ == "__main__":
    main()
