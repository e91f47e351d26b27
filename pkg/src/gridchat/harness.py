"""Robustness and privacy experiments: typo injection, Levenshtein
distance, per-run accuracy scoring, condition sweeps and the brute-force
maintenance-privacy probe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "MutationSpec",
    "RunScore",
    "ProbeReport",
    "MUTATION_KINDS",
    "inject_typos",
    "inject_typos_detailed",
    "levenshtein",
    "score_run",
    "sweep",
    "calibrated_mv_runner",
    "privacy_probe",
    "bin_by_distance",
    "RateLimitExceeded",
]

MUTATION_KINDS = (
    "swap",            # swap two adjacent characters
    "missing",         # delete a character
    "extra",           # insert a random letter
    "neighbour",       # replace with a keyboard-neighbour letter
    "similar",         # replace with a visually similar character
    "skip",            # skip (delete) a character
    "add_space",       # insert a space
    "skip_space",      # remove a space
    "repeat",          # duplicate a character
    "dedup",           # collapse a doubled letter
)

# QWERTY adjacency for the keyboard-neighbour mutation
_KEYBOARD_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")
_NEIGHBOURS: dict[str, str] = {}
for _r, _row in enumerate(_KEYBOARD_ROWS):
    for _i, _ch in enumerate(_row):
        adj = []
        if _i > 0:
            adj.append(_row[_i - 1])
        if _i < len(_row) - 1:
            adj.append(_row[_i + 1])
        for _o in (_r - 1, _r + 1):
            if 0 <= _o < len(_KEYBOARD_ROWS):
                other = _KEYBOARD_ROWS[_o]
                if _i < len(other):
                    adj.append(other[_i])
        _NEIGHBOURS[_ch] = "".join(adj)

# fixed visually-similar substitution table
_SIMILAR = {
    "l": "1", "1": "l", "O": "0", "0": "O", "o": "0",
    "i": "1", "S": "5", "5": "S", "B": "8", "8": "B",
    "Z": "2", "2": "Z", "g": "9", "9": "g",
}

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class RateLimitExceeded(Exception):
    """The probed planner refused further requests."""


@dataclass(frozen=True)
class MutationSpec:
    rate: float                              # typos per 100 characters
    kinds: tuple[str, ...] = MUTATION_KINDS
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        unknown = set(self.kinds) - set(MUTATION_KINDS)
        if unknown:
            raise ValueError(f"unknown mutation kinds: {sorted(unknown)}")
        if not self.kinds:
            raise ValueError("at least one mutation kind required")


@dataclass(frozen=True)
class RunScore:
    g_correct: bool   # parameters extracted match ground truth
    h_correct: bool   # kernel outputs correct
    v_correct: bool   # expected tool chain executed
    f_correct: bool   # response contains the beta values

    def as_dict(self) -> dict:
        return {
            "g": self.g_correct, "h": self.h_correct,
            "v": self.v_correct, "f": self.f_correct,
        }


@dataclass(frozen=True)
class ProbeReport:
    timelines: dict[int, tuple[bool, ...]]   # asset -> per-start feasibility
    request_count: int
    complete: bool
    congestion_summary: str


def _apply_mutation(chars: list[str], kind: str, rng: np.random.Generator) -> bool:
    """Mutate in place; returns whether the text actually changed (a kind
    can be a no-op when it finds no candidate position)."""
    n = len(chars)
    if n == 0:
        return False
    if kind == "swap":
        idx = [i for i in range(n - 1) if chars[i] != chars[i + 1]]
        if not idx:
            return False
        i = idx[int(rng.integers(len(idx)))]
        chars[i], chars[i + 1] = chars[i + 1], chars[i]
    elif kind in ("missing", "skip"):
        del chars[int(rng.integers(n))]
    elif kind == "extra":
        i = int(rng.integers(n + 1))
        chars.insert(i, _LETTERS[int(rng.integers(len(_LETTERS)))])
    elif kind == "neighbour":
        idx = [i for i, c in enumerate(chars) if c.lower() in _NEIGHBOURS]
        if not idx:
            return False
        i = idx[int(rng.integers(len(idx)))]
        pool = _NEIGHBOURS[chars[i].lower()]
        repl = pool[int(rng.integers(len(pool)))]
        chars[i] = repl.upper() if chars[i].isupper() else repl
    elif kind == "similar":
        idx = [i for i, c in enumerate(chars) if c in _SIMILAR]
        if not idx:
            return False
        i = idx[int(rng.integers(len(idx)))]
        chars[i] = _SIMILAR[chars[i]]
    elif kind == "add_space":
        chars.insert(int(rng.integers(n + 1)), " ")
    elif kind == "skip_space":
        idx = [i for i, c in enumerate(chars) if c == " "]
        if not idx:
            return False
        del chars[idx[int(rng.integers(len(idx)))]]
    elif kind == "repeat":
        i = int(rng.integers(n))
        chars.insert(i, chars[i])
    elif kind == "dedup":
        idx = [i for i in range(n - 1)
               if chars[i] == chars[i + 1] and chars[i].isalpha()]
        if not idx:
            return False
        del chars[idx[int(rng.integers(len(idx)))]]
    else:
        return False
    return True


def inject_typos_detailed(text: str, spec: MutationSpec) -> tuple[str, int]:
    """Like :func:`inject_typos` but also reports the number of mutations
    actually applied (the injector resamples kinds that found no candidate
    position, so this normally equals the target count)."""
    if not text:
        return text, 0
    count = int(round(spec.rate * len(text) / 100.0))
    if count == 0:
        return text, 0
    rng = np.random.default_rng(spec.seed)
    chars = list(text)
    applied = 0
    for _ in range(count):
        for _attempt in range(8 * len(spec.kinds)):
            kind = spec.kinds[int(rng.integers(len(spec.kinds)))]
            if _apply_mutation(chars, kind, rng):
                applied += 1
                break
    return "".join(chars), applied


def inject_typos(text: str, spec: MutationSpec) -> str:
    """Apply round(rate * len/100) seeded mutations, kinds sampled
    uniformly among the enabled kinds per application."""
    return inject_typos_detailed(text, spec)[0]


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, single-row dynamic programming."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        curr = [i]
        for j, cb in enumerate(b, start=1):
            curr.append(min(
                prev[j] + 1,                      # delete
                curr[j - 1] + 1,                  # insert
                prev[j - 1] + (ca != cb),         # substitute
            ))
        prev = curr
    return prev[-1]


_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


def _numbers_in(text: str) -> list[float]:
    return [float(m) for m in _NUMBER_RE.findall(text)]


def _values_of(beta) -> list[float]:
    """Flatten the numeric leaves of a beta payload."""
    out: list[float] = []
    if isinstance(beta, bool):
        return out
    if isinstance(beta, (int, float)):
        return [float(beta)]
    if isinstance(beta, dict):
        for v in beta.values():
            out.extend(_values_of(v))
    elif isinstance(beta, (list, tuple)):
        for v in beta:
            out.extend(_values_of(v))
    return out


def score_run(trace: list[dict], ground_truth: dict, rel_tol: float = 1e-6) -> RunScore:
    """Score one orchestrated run against expectations.

    ``ground_truth`` keys: ``tools`` (expected tool-name sequence),
    ``arguments`` (list of expected alpha maps, aligned with tools),
    ``betas`` (list of expected beta payloads, aligned), ``response_numbers``
    (numbers the final response must contain). Unrelated trace events are
    ignored, so interleaving does not affect the score.
    """
    if not isinstance(trace, list) or any(not isinstance(e, dict) for e in trace):
        raise ValueError("malformed trace")
    executed = [e for e in trace if e.get("event") == "tool_executed"]
    finals = [e for e in trace if e.get("event") == "final_text"]

    expected_tools = list(ground_truth.get("tools", []))
    v_correct = [e["tool"] for e in executed] == expected_tools

    def args_match(got: dict, want: dict) -> bool:
        if set(got) != set(want):
            return False
        for k, w in want.items():
            g = got[k]
            if isinstance(w, (list, tuple)):
                if len(g) != len(w) or any(
                    not np.isclose(float(x), float(y), rtol=rel_tol)
                    for x, y in zip(g, w)
                ):
                    return False
            elif isinstance(w, (int, float)) and not isinstance(w, bool):
                if not np.isclose(float(g), float(w), rtol=rel_tol):
                    return False
            elif g != w:
                return False
        return True

    expected_args = list(ground_truth.get("arguments", []))
    g_correct = v_correct and len(executed) == len(expected_args) and all(
        args_match(e["arguments"], want) for e, want in zip(executed, expected_args)
    )

    def beta_match(got, want) -> bool:
        wv = _values_of(want)
        if wv:
            gv = _values_of(got)
            return len(gv) == len(wv) and bool(np.allclose(gv, wv, rtol=rel_tol))
        return got == want

    expected_betas = list(ground_truth.get("betas", []))
    h_correct = len(executed) >= len(expected_betas) and all(
        beta_match(e["beta"], want) for e, want in zip(executed, expected_betas)
    )
    if not executed and expected_betas:
        h_correct = False

    response = finals[-1]["text"] if finals else ""
    found = _numbers_in(response)
    f_correct = all(
        any(np.isclose(n, x, rtol=rel_tol, atol=1e-9) for x in found)
        for n in ground_truth.get("response_numbers", [])
    )
    return RunScore(bool(g_correct), bool(h_correct), bool(v_correct), bool(f_correct))


def sweep(
    conditions: list[dict],
    repeats: int,
    run_cell: Callable[[dict, int], tuple[list[dict], dict]],
    rel_tol: float = 1e-6,
) -> list[dict]:
    """Run and score every (condition, repeat) cell.

    ``run_cell(condition, repeat)`` returns (trace, ground_truth); failures
    are recorded per cell and the sweep continues. Returns one aggregate
    row per condition with mean g/h/v/f accuracies.
    """
    rows = []
    for cond in conditions:
        scores: list[RunScore] = []
        failures = 0
        for rep in range(repeats):
            try:
                trace, truth = run_cell(cond, rep)
                scores.append(score_run(trace, truth, rel_tol))
            except Exception:
                failures += 1
        row = dict(cond)
        for key in ("g", "h", "v", "f"):
            vals = [s.as_dict()[key] for s in scores]
            row[f"{key}_accuracy"] = float(np.mean(vals)) if vals else float("nan")
        row["runs"] = len(scores)
        row["failures"] = failures
        rows.append(row)
    return rows


def bin_by_distance(records: list[dict], width: int = 20) -> list[dict]:
    """Average accuracies within edit-distance bins of the given width."""
    if width <= 0:
        raise ValueError("bin width must be positive")
    bins: dict[int, list[dict]] = {}
    for r in records:
        bins.setdefault(int(r["distance"]) // width, []).append(r)
    out = []
    for b in sorted(bins):
        members = bins[b]
        row = {"bin_low": b * width, "bin_high": (b + 1) * width, "n": len(members)}
        for key in ("g", "h", "v", "f"):
            vals = [m[f"{key}_accuracy"] for m in members
                    if not np.isnan(m.get(f"{key}_accuracy", float("nan")))]
            row[f"{key}_accuracy"] = float(np.mean(vals)) if vals else float("nan")
        out.append(row)
    return out


def calibrated_mv_runner(failure_p: float, seed: int) -> Callable[[dict, int], tuple[list[dict], dict]]:
    """A ``run_cell`` for :func:`sweep` whose scripted backend fails the
    parameter-extraction and response-composition components independently
    with the given probability — the calibration target for validating the
    scoring pipeline (measured accuracies must track 1 - failure_p)."""
    from .orchestrator import BackendDecision, ChatContext, Orchestrator, ScriptedBackend
    from .tools import default_setup

    registry, personas, _ = default_setup()
    profile = [2.0] * 24                      # infeasible at hour 19 at bus 11
    truth = {
        "tools": ["MVContractPlanner"],
        "arguments": [{"zip": 11, "profile": profile}],
        "betas": [{"infeasible_steps": [19]}],
        "response_numbers": [19.0],
    }

    def run_cell(cond: dict, rep: int) -> tuple[list[dict], dict]:
        rng = np.random.default_rng(np.random.SeedSequence(
            [seed, int(cond.get("cell", 0)), rep]))
        args = {"zip": 11, "profile": list(profile)}
        if rng.random() < failure_p:          # wrong alpha extraction
            args["profile"] = [2.25] + profile[1:]
        if rng.random() < failure_p:          # beta not relayed into r_i
            text = "the connection request is infeasible during the evening peak."
        else:
            text = "the connection request is infeasible at hour 19."
        backend = ScriptedBackend([
            BackendDecision.tool_call("MVContractPlanner", args),
            BackendDecision.final_text(text),
        ])
        orch = Orchestrator(registry, personas, backend)
        ctx = ChatContext(f"cal-{rep}", "dso")
        _, trace = orch.step(ctx, "please check my connection request")
        return trace, truth

    return run_cell


def privacy_probe(
    planner: Callable[[int, int, int], bool],
    assets: list[int],
    duration_days: int,
    n_starts: int,
    budget: int | None = None,
) -> ProbeReport:
    """Brute-force enumeration of outage feasibility through the public
    planner interface only.

    ``planner(asset, start, duration)`` returns the feasibility boolean the
    tool would relay; it may raise :class:`RateLimitExceeded`. With an
    unlimited budget the reconstructed timelines equal the direct
    feasibility map.
    """
    if budget is not None and budget < 1:
        raise ValueError("budget must be >= 1")
    timelines: dict[int, list[bool | None]] = {a: [None] * n_starts for a in assets}
    requests = 0
    halted = False
    for asset in assets:
        for start in range(n_starts):
            if budget is not None and requests >= budget:
                halted = True
                break
            try:
                verdict = planner(asset, start, duration_days)
            except RateLimitExceeded:
                halted = True
                break
            requests += 1
            timelines[asset][start] = bool(verdict)
        if halted:
            break

    complete = not halted
    fixed = {
        a: tuple(bool(v) for v in tl if v is not None) if complete
        else tuple(bool(v) for v in tl[:sum(x is not None for x in tl)])
        for a, tl in timelines.items()
    }
    lines = []
    for a in assets:
        tl = fixed[a]
        blocked = [i for i, ok in enumerate(tl) if not ok]
        if not tl:
            lines.append(f"asset {a}: no data")
        elif blocked:
            lines.append(
                f"asset {a}: congested start days {blocked[0]}-{blocked[-1]} "
                f"({len(blocked)} of {len(tl)} infeasible)"
            )
        else:
            lines.append(f"asset {a}: all probed start days feasible")
    return ProbeReport(
        timelines=fixed, request_count=requests, complete=complete,
        congestion_summary="; ".join(lines),
    )
