"""Benchmark harness: case suites, reference optimum, slope fits, plots.

Reproduces the two convergence-rate experiments: a suite of deterministic
delay growth laws and its stochastic counterpart with matched means.  All
outputs (CSV, SVG) are deterministic byte for byte given the seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    DETERMINISTIC_POWER,
    NONE,
    DelayModel,
    SimulationTrace,
    run_simulation,
)
from .errors import DomainError, InsufficientDataError, ScheduleError, SchemaError
from .routing import RoutingGame, wardrop_gap
from .schedules import (
    INVERSE,
    INVERSE_LOG,
    POWER,
    SmoothnessBundle,
    StepSchedule,
    default_a0,
    validate_schedule,
)

CSV_HEADER = "k,phi,gap,max_staleness,a_k,A_k"

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)


@dataclass(frozen=True)
class CaseSpec:
    """One benchmark configuration: delay law, schedule, horizon."""

    label: str
    delay: DelayModel
    schedule: StepSchedule
    horizon: int


@dataclass(frozen=True)
class CaseRun:
    """A finished case: its label and seed plus the recorded trace."""

    label: str
    seed: int
    trace: SimulationTrace


@dataclass(frozen=True)
class OracleResult:
    """Reference optimum estimate and its documented tolerance.

    ``epsilon_oracle`` is the final Wardrop gap times total demand: by
    convexity the suboptimality of a profile is at most the total demand
    times its worst supported cost excess, so the true minimum lies within
    ``epsilon_oracle`` below ``phi_star``.
    """

    phi_star: float
    epsilon_oracle: float
    wardrop_gap: float
    budget: int
    x_star: list[np.ndarray]


def schedule_for_delay(model: DelayModel, bundle: SmoothnessBundle) -> StepSchedule:
    """Theory-prescribed family: power below linear growth, then 1/k, then 1/(k log k)."""
    if model.kind == NONE or model.alpha < 1.0:
        return StepSchedule.power(default_a0(POWER, bundle, beta=1.0), beta=1.0)
    if model.alpha == 1.0:
        return StepSchedule.inverse(default_a0(INVERSE, bundle))
    return StepSchedule.inverse_log(default_a0(INVERSE_LOG, bundle))


_FIG1_DELAYS = (
    ("case1", DelayModel.none()),
    ("case2", DelayModel.deterministic(10.0, 0.0)),
    ("case3", DelayModel.deterministic(50.0, 0.0)),
    ("case4", DelayModel.deterministic(1.0, 0.3)),
    ("case5", DelayModel.deterministic(1.0, 0.7)),
    ("case6", DelayModel.deterministic(0.1, 1.0)),
)


def fig1_suite(bundle: SmoothnessBundle, horizon: int = 100_000) -> list[CaseSpec]:
    """Six deterministic-delay cases with theory-matched schedules."""
    return [
        CaseSpec(label, delay, schedule_for_delay(delay, bundle), horizon)
        for label, delay in _FIG1_DELAYS
    ]


def fig2_suite(bundle: SmoothnessBundle, horizon: int = 100_000) -> list[CaseSpec]:
    """The same six cases with stochastic delays of equal mean."""
    out = []
    for label, delay in _FIG1_DELAYS:
        if delay.kind == DETERMINISTIC_POWER:
            delay = DelayModel.stochastic(delay.D, delay.alpha)
        out.append(CaseSpec(label, delay, schedule_for_delay(delay, bundle), horizon))
    return out


def estimate_reference_optimum(game: RoutingGame, budget: int, seed: int = 0) -> OracleResult:
    """Long undelayed accelerated run; the best iterate anchors the gap metric."""
    if budget < 1:
        raise DomainError(f"oracle budget must be >= 1, got {budget}")
    sched = StepSchedule.power(default_a0(POWER, game.smoothness, beta=1.0), beta=1.0)
    trace = run_simulation(game, sched, None, budget, seed=seed, phi_star=0.0)
    gap = wardrop_gap(trace.final_y, game)
    epsilon = gap * float(np.sum(game.demands))
    return OracleResult(
        phi_star=trace.best_phi,
        epsilon_oracle=epsilon,
        wardrop_gap=gap,
        budget=budget,
        x_star=trace.best_y,
    )


def save_oracle(result: OracleResult, path):
    doc = {
        "phi_star": result.phi_star,
        "epsilon_oracle": result.epsilon_oracle,
        "wardrop_gap": result.wardrop_gap,
        "budget": result.budget,
        "x_star": [list(map(float, x)) for x in result.x_star],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_oracle(path) -> OracleResult:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"oracle file is not valid JSON: {exc}") from None
    for key in ("phi_star", "epsilon_oracle", "wardrop_gap", "budget", "x_star"):
        if key not in doc:
            raise SchemaError(f"oracle document is missing {key!r}")
    return OracleResult(
        phi_star=doc["phi_star"],
        epsilon_oracle=doc["epsilon_oracle"],
        wardrop_gap=doc["wardrop_gap"],
        budget=doc["budget"],
        x_star=[np.asarray(x, dtype=float) for x in doc["x_star"]],
    )


def run_case(
    game: RoutingGame,
    case: CaseSpec,
    seed: int,
    phi_star: float,
    out_csv=None,
    record_gradient_steps: bool = False,
) -> CaseRun:
    """Execute one case and optionally write its metrics CSV.

    Power-family schedules carry a convergence-rate guarantee, so they are
    validated against the game's smoothness constants up front.
    """
    if case.schedule.family == POWER and case.horizon >= 1:
        if not validate_schedule(case.schedule, game.smoothness, case.horizon):
            raise ScheduleError(
                f"case {case.label!r}: power schedule violates the step condition"
            )
    trace = run_simulation(
        game,
        case.schedule,
        case.delay,
        case.horizon,
        seed=seed,
        phi_star=phi_star,
        record_gradient_steps=record_gradient_steps,
    )
    run = CaseRun(label=case.label, seed=seed, trace=trace)
    if out_csv is not None:
        write_metrics_csv(trace, out_csv)
    return run


def write_metrics_csv(trace: SimulationTrace, path):
    """Comma-separated metrics, LF endings, shortest round-trip decimals."""
    lines = [CSV_HEADER]
    for row in range(len(trace)):
        lines.append(
            f"{int(trace.k[row])},{float(trace.phi[row])!r},{float(trace.gap[row])!r},"
            f"{int(trace.max_staleness[row])},{float(trace.a[row])!r},{float(trace.A[row])!r}"
        )
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_metrics_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as handle:
        header = handle.readline().strip()
        if header != CSV_HEADER:
            raise SchemaError(f"unexpected metrics header {header!r}")
        rows = [line.split(",") for line in handle.read().splitlines() if line]
    columns = list(zip(*rows)) if rows else [[] for _ in range(6)]
    return {
        "k": np.array([int(v) for v in columns[0]], dtype=np.int64),
        "phi": np.array([float(v) for v in columns[1]]),
        "gap": np.array([float(v) for v in columns[2]]),
        "max_staleness": np.array([int(v) for v in columns[3]], dtype=np.int64),
        "a_k": np.array([float(v) for v in columns[4]]),
        "A_k": np.array([float(v) for v in columns[5]]),
    }


def fit_loglog_slope(
    k: np.ndarray,
    gap: np.ndarray,
    k_min: int,
    k_max: int,
    gap_floor: float = 0.0,
) -> float:
    """Least-squares log-log slope of the running-minimum gap envelope.

    The envelope suppresses the oscillations that stale feedback induces;
    rows whose envelope is at or below ``gap_floor`` (or nonpositive) are
    dropped.  Raises InsufficientDataError if fewer than 10 points remain.
    """
    if not k_max > k_min >= 1:
        raise DomainError(f"need k_max > k_min >= 1, got [{k_min}, {k_max}]")
    k = np.asarray(k, dtype=float)
    envelope = np.minimum.accumulate(np.asarray(gap, dtype=float))
    mask = (k >= k_min) & (k <= k_max) & (envelope > max(gap_floor, 0.0))
    if int(np.sum(mask)) < 10:
        raise InsufficientDataError(
            f"only {int(np.sum(mask))} positive envelope points in [{k_min}, {k_max}]"
        )
    slope, _ = np.polyfit(np.log(k[mask]), np.log(envelope[mask]), 1)
    return float(slope)


def emit_plot(runs, path) -> None:
    """Write a log-log SVG of gap vs iteration, one polyline per run.

    ``runs`` is a sequence of ``(label, k, gap)`` triples.  The plotted
    points are also written to ``<stem>_data.csv`` next to the image.
    """
    if not runs:
        raise DomainError("emit_plot needs at least one trace")
    path = Path(path)

    width, height = 760, 520
    left, right, top, bottom = 70, 180, 30, 60
    plot_w = width - left - right
    plot_h = height - top - bottom

    k_max = max(int(np.max(np.asarray(k))) for _, k, _ in runs)
    x_hi = max(1, math.ceil(math.log10(k_max)))
    positive = []
    for _, _, gap in runs:
        g = np.asarray(gap, dtype=float)
        positive.append(g[g > 0])
    nonempty = [p for p in positive if len(p)]
    flat = np.concatenate(nonempty) if nonempty else np.array([1.0])
    y_lo = math.floor(math.log10(float(np.min(flat))))
    y_hi = math.ceil(math.log10(float(np.max(flat))))
    if y_hi <= y_lo:
        y_hi = y_lo + 1

    def px(logk):
        return left + plot_w * logk / x_hi

    def py(logg):
        return top + plot_h * (y_hi - logg) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]
    for d in range(0, x_hi + 1):
        x = px(d)
        parts.append(
            f'<line class="tick-x" x1="{x:.2f}" y1="{top + plot_h}" '
            f'x2="{x:.2f}" y2="{top + plot_h + 6}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 22}" font-size="12" '
            f'text-anchor="middle">1e{d}</text>'
        )
    for d in range(y_lo, y_hi + 1):
        y = py(d)
        parts.append(
            f'<line class="tick-y" x1="{left - 6}" y1="{y:.2f}" '
            f'x2="{left}" y2="{y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 10}" y="{y + 4:.2f}" font-size="12" '
            f'text-anchor="end">1e{d}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 16}" font-size="13" '
        'text-anchor="middle">iteration k</text>'
    )
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.2f})">potential gap</text>'
    )

    data_lines = ["case,k,gap"]
    for idx, (label, k, gap) in enumerate(runs):
        k = np.asarray(k, dtype=float)
        gap = np.asarray(gap, dtype=float)
        keep = (k >= 1) & (gap > 0)
        k, gap = k[keep], gap[keep]
        if len(k) > 1500:
            stride = len(k) // 1500
            idxs = np.unique(np.concatenate([np.arange(0, len(k), stride), [len(k) - 1]]))
            k, gap = k[idxs], gap[idxs]
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(
            f"{px(math.log10(ki)):.2f},{py(math.log10(gi)):.2f}"
            for ki, gi in zip(k, gap)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = top + 16 + 18 * idx
        lx = left + plot_w + 14
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 30}" y="{ly}" font-size="12">{label}</text>'
        )
        for ki, gi in zip(k, gap):
            data_lines.append(f"{label},{int(ki)},{float(gi)!r}")
    parts.append("</svg>")

    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")
    data_path = path.with_name(path.stem + "_data.csv")
    with open(data_path, "w", newline="\n") as handle:
        handle.write("\n".join(data_lines) + "\n")
