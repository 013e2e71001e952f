"""Case identifiers and the comparison matrix.

A case id names one controller configuration::

    trad_<NT|WT>_<shrinking|rolling>_<T_MPC>
    proposed_<NT|WT>_<shrinking|rolling>_<T_MPC>_<T_R>
    empc_star_<NT|WT>_<shrinking|rolling>_<T_MPC>

with horizon lengths in hours. A case spec is a comma-separated list of
case ids and the shorthands ``matrix`` (the 20 comparison cases),
``shrinking`` / ``rolling`` (the 10 cases of one receding mode) and
``star`` (EMPC* with peak tracking in both modes).
"""

from __future__ import annotations

from .controllers import EMPC_STAR, NT, PROPOSED, TRAD, TRACKING_MODES, WT
from .sim import ControllerConfig
from .timegrid import ROLLING, SHRINKING

MODES = (SHRINKING, ROLLING)

# (variant, T_MPC, T_R) per mode, each run with NT and WT
_MATRIX_SHAPES = (
    (TRAD, 24.0, None),
    (PROPOSED, 24.0, 24.0),
    (TRAD, 48.0, None),
    (PROPOSED, 48.0, 48.0),
    (PROPOSED, 24.0, 48.0),
)


def matrix_cases(modes=MODES) -> list[ControllerConfig]:
    """The 20-case comparison matrix (10 per receding mode)."""
    out = []
    for mode in modes:
        for variant, t_mpc, t_r in _MATRIX_SHAPES:
            for tracking in (NT, WT):
                out.append(ControllerConfig(variant, tracking, mode, t_mpc, t_r))
    return out


def star_cases(modes=MODES) -> list[ControllerConfig]:
    return [ControllerConfig(EMPC_STAR, WT, mode, 24.0, None) for mode in modes]


def parse_case_id(case_id: str) -> ControllerConfig:
    """Inverse of :attr:`ControllerConfig.label`."""
    text = case_id.strip()
    if text.startswith(EMPC_STAR + "_"):
        variant, rest = EMPC_STAR, text[len(EMPC_STAR) + 1:]
    else:
        variant, _, rest = text.partition("_")
    parts = rest.split("_")
    n_hours = 2 if variant == PROPOSED else 1
    if variant not in (TRAD, PROPOSED, EMPC_STAR) or len(parts) != 2 + n_hours:
        raise ValueError(f"malformed case id {case_id!r}")
    tracking, mode = parts[0], parts[1]
    if tracking not in TRACKING_MODES:
        raise ValueError(f"case {case_id!r}: tracking must be NT or WT")
    if mode not in MODES:
        raise ValueError(f"case {case_id!r}: mode must be shrinking or rolling")
    try:
        hours = [float(h) for h in parts[2:]]
    except ValueError:
        raise ValueError(f"case {case_id!r}: horizon lengths must be numbers") from None
    t_r = hours[1] if variant == PROPOSED else None
    return ControllerConfig(variant, tracking, mode, hours[0], t_r)


def parse_case_spec(spec: str) -> list[ControllerConfig]:
    """Expand a case spec into controller configs, keeping order and dropping repeats."""
    out = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "matrix":
            found = matrix_cases()
        elif token in MODES:
            found = matrix_cases((token,))
        elif token == "star":
            found = star_cases()
        else:
            found = [parse_case_id(token)]
        for case in found:
            if case not in out:
                out.append(case)
    if not out:
        raise ValueError("empty case spec")
    return out
