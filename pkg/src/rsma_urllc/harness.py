"""Monte-Carlo experiment driver: sweeps a scenario parameter over seeded
channel realizations for a set of (grouping, solver, mode) methods and
aggregates the achieved effective throughput.

Outputs are deterministic: per-trial RNG streams are derived from
(master_seed, trial index) only, aggregation is order-independent, and the
CSV/SVG emitters format numbers explicitly so identical runs are
byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .allocation import build_problem, solve_allocation
from .channel import ChannelRealization, sample_channels, sample_positions
from .grouping import (
    GroupAssignment,
    exhaustive_group,
    greedy_group,
    heuristic_group,
    random_group,
)
from .scenario import ScenarioConfig, derive_rng_stream

__all__ = [
    "MethodSpec",
    "SweepSpec",
    "TrialRecord",
    "SweepResult",
    "run_trial",
    "run_sweep",
    "emit_outputs",
    "apply_swept_parameter",
    "sample_trial_realization",
]

SWEEPABLE = {
    "P_max": "max_total_power_dbm",
    "K": "num_users",
    "M_t": "num_antennas",
    "sigma_e2": "estimation_error_var",
    "N_th": "total_blocklength",
    "J": "num_subcarriers",
}

GROUPINGS = ("greedy", "heuristic", "random", "exhaustive")
SOLVERS = ("cccp", "lba")
MODES = ("rsma", "sdma")

# reserved stream index for user placements when positions are held fixed
# across trials
_POSITION_STREAM = 2 ** 32 - 1


@dataclass(frozen=True)
class MethodSpec:
    grouping: str
    solver: str
    mode: str = "rsma"

    def __post_init__(self):
        if self.grouping not in GROUPINGS:
            raise ValueError(f"grouping must be one of {GROUPINGS}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def ident(self) -> str:
        return f"{self.grouping}+{self.solver}+{self.mode}"

    @staticmethod
    def parse(text: str) -> "MethodSpec":
        parts = text.split("+")
        if len(parts) == 2:
            parts.append("rsma")
        if len(parts) != 3:
            raise ValueError(f"method must be grouping+solver[+mode], got {text!r}")
        return MethodSpec(*parts)


@dataclass
class SweepSpec:
    swept_parameter: str
    values: List[float]
    methods: List[MethodSpec]
    trials: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if self.swept_parameter not in SWEEPABLE:
            raise ValueError(
                f"swept_parameter must be one of {sorted(SWEEPABLE)}"
            )
        if not self.values:
            raise ValueError("values must be nonempty")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("values must be strictly monotone")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @staticmethod
    def from_json(path_or_text) -> "SweepSpec":
        if isinstance(path_or_text, str) and path_or_text.lstrip().startswith("{"):
            data = json.loads(path_or_text)
        else:
            with open(path_or_text) as fh:
                data = json.load(fh)
        methods = [
            MethodSpec.parse(m) if isinstance(m, str) else MethodSpec(**m)
            for m in data["methods"]
        ]
        return SweepSpec(
            swept_parameter=data["swept_parameter"],
            values=list(data["values"]),
            methods=methods,
            trials=int(data.get("trials", 100)),
            master_seed=int(data.get("master_seed", 0)),
        )


@dataclass
class TrialRecord:
    method: str
    swept_value: float
    trial_index: int
    sum_et_exact: float
    sum_et_bound: float
    feasible: bool
    status: str
    iterations: int
    seconds: float
    assignment: Optional[GroupAssignment] = None


@dataclass
class SweepResult:
    spec: SweepSpec
    records: List[TrialRecord] = field(default_factory=list)

    def aggregate(self) -> List[dict]:
        """Per (value, method) mean/stderr of the exact effective throughput
        (infeasible trials contribute zero), plus failure counts and mean
        iteration counts."""
        rows = []
        for value in self.spec.values:
            for method in self.spec.methods:
                # fixed reduction order keeps aggregates identical under
                # any trial execution order
                recs = sorted(
                    (
                        r
                        for r in self.records
                        if r.method == method.ident and r.swept_value == value
                    ),
                    key=lambda r: r.trial_index,
                )
                ets = np.array([r.sum_et_exact for r in recs], dtype=float)
                n = len(recs)
                mean = float(ets.mean()) if n else 0.0
                stderr = float(ets.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
                rows.append(
                    {
                        "swept_value": value,
                        "method": method.ident,
                        "mean_et": mean,
                        "stderr": stderr,
                        "n_infeasible": sum(not r.feasible for r in recs),
                        "n_failures": sum(
                            r.status == "numerical_failure" for r in recs
                        ),
                        "n_trials": n,
                        "mean_iterations": float(
                            np.mean([r.iterations for r in recs])
                        )
                        if n
                        else 0.0,
                        "mean_seconds": float(np.mean([r.seconds for r in recs]))
                        if n
                        else 0.0,
                    }
                )
        return rows

    @property
    def any_failures(self) -> bool:
        return any(r.status == "numerical_failure" for r in self.records)


def apply_swept_parameter(
    config: ScenarioConfig, parameter: str, value
) -> ScenarioConfig:
    fieldname = SWEEPABLE[parameter]
    if fieldname in (
        "num_users",
        "num_antennas",
        "total_blocklength",
        "num_subcarriers",
    ):
        value = int(value)
    return dataclasses.replace(config, **{fieldname: value})


def sample_trial_realization(
    config: ScenarioConfig, trial_index: int
) -> Tuple[ChannelRealization, np.random.Generator]:
    """Positions + fading for one trial; the returned generator continues
    the trial stream (for e.g. random grouping draws)."""
    rng = derive_rng_stream(config, trial_index)
    if config.resample_positions_each_trial:
        distances = sample_positions(config, rng)
    else:
        pos_rng = derive_rng_stream(config, _POSITION_STREAM)
        distances = sample_positions(config, pos_rng)
    realization = sample_channels(config, distances, rng)
    return realization, rng


def _group(realization, config, method: MethodSpec, rng) -> GroupAssignment:
    if method.grouping == "greedy":
        return greedy_group(realization, config, evaluator="lba")
    if method.grouping == "heuristic":
        return heuristic_group(realization, config)
    if method.grouping == "random":
        return random_group(config.num_users, config.num_subcarriers, rng)
    if method.grouping == "exhaustive":
        return exhaustive_group(realization, config, evaluator="lba")
    raise ValueError(method.grouping)


def run_trial(
    config: ScenarioConfig,
    method: MethodSpec,
    trial_index: int,
    swept_value: float = float("nan"),
) -> TrialRecord:
    """Sample one realization, group, allocate, and record the outcome.

    Deterministic per (config.master_seed, trial_index, method).  Solver
    failures are recorded and flagged, never silently dropped.
    """
    start = time.perf_counter()
    realization, rng = sample_trial_realization(config, trial_index)
    try:
        assignment = _group(realization, config, method, rng)
        problem = build_problem(realization, assignment, config, mode=method.mode)
        solution = solve_allocation(problem, solver=method.solver)
        record = TrialRecord(
            method=method.ident,
            swept_value=swept_value,
            trial_index=trial_index,
            sum_et_exact=solution.sum_et_exact if solution.feasible else 0.0,
            sum_et_bound=solution.sum_et_lower_bound if solution.feasible else 0.0,
            feasible=solution.feasible,
            status=solution.status,
            iterations=solution.iterations,
            seconds=time.perf_counter() - start,
            assignment=assignment,
        )
    except Exception as exc:  # pragma: no cover - defensive
        record = TrialRecord(
            method=method.ident,
            swept_value=swept_value,
            trial_index=trial_index,
            sum_et_exact=0.0,
            sum_et_bound=0.0,
            feasible=False,
            status="numerical_failure",
            iterations=0,
            seconds=time.perf_counter() - start,
        )
    return record


def run_sweep(base_config: ScenarioConfig, spec: SweepSpec, verbose: bool = False
              ) -> SweepResult:
    """Full factorial over values x methods x trials."""
    result = SweepResult(spec=spec)
    for value in spec.values:
        config = apply_swept_parameter(base_config, spec.swept_parameter, value)
        config = dataclasses.replace(config, master_seed=spec.master_seed)
        for method in spec.methods:
            for trial in range(spec.trials):
                rec = run_trial(config, method, trial, swept_value=value)
                result.records.append(rec)
            if verbose:
                recs = [
                    r for r in result.records
                    if r.method == method.ident and r.swept_value == value
                ]
                mean = np.mean([r.sum_et_exact for r in recs])
                print(
                    f"  {spec.swept_parameter}={value} {method.ident}: "
                    f"mean ET {mean:.3f} over {len(recs)} trials"
                )
    return result


# ---------------------------------------------------------------------------
# output emission


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_outputs(result: SweepResult, out_dir) -> List[Path]:
    """One CSV and one SVG per sweep; byte-stable for identical results."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.aggregate()
    name = result.spec.swept_parameter
    csv_path = out / f"sweep_{name}.csv"
    header = "swept_value,method,mean_et,stderr,n_infeasible,n_failures\n"
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(header)
        for row in rows:
            fh.write(
                f"{_fmt(row['swept_value'])},{row['method']},"
                f"{_fmt(row['mean_et'])},{_fmt(row['stderr'])},"
                f"{row['n_infeasible']},{row['n_failures']}\n"
            )
    svg_path = out / f"sweep_{name}.svg"
    with open(svg_path, "w", newline="\n") as fh:
        fh.write(render_sweep_svg(result))
    return [csv_path, svg_path]


def read_sweep_csv(path) -> List[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            row["swept_value"] = float(row["swept_value"])
            row["mean_et"] = float(row["mean_et"])
            row["stderr"] = float(row["stderr"])
            row["n_infeasible"] = int(row["n_infeasible"])
            row["n_failures"] = int(row["n_failures"])
            rows.append(row)
    return rows


_SVG_COLORS = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
]


def render_sweep_svg(result: SweepResult, width: int = 640, height: int = 420) -> str:
    """Minimal deterministic line chart (no external plotting dependency,
    no timestamps, fixed float formatting)."""
    rows = result.aggregate()
    methods = [m.ident for m in result.spec.methods]
    values = [float(v) for v in result.spec.values]
    ml, mr, mt, mb = 60, 20, 30, 50
    x0, x1 = min(values), max(values)
    ys = [r["mean_et"] for r in rows] or [0.0, 1.0]
    y0, y1 = min(ys), max(ys)
    if y1 - y0 < 1e-12:
        y1 = y0 + 1.0
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0
    span_x = x1 - x0
    span_y = y1 - y0

    def sx(v):
        return ml + (v - x0) / span_x * (width - ml - mr)

    def sy(v):
        return height - mb - (v - y0) / span_y * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
        f'y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + span_x * i / 4
        yv = y0 + span_y * i / 4
        parts.append(
            f'<text x="{sx(xv):.2f}" y="{height - mb + 18}" font-size="11" '
            f'text-anchor="middle">{xv:.6g}</text>'
        )
        parts.append(
            f'<text x="{ml - 6}" y="{sy(yv):.2f}" font-size="11" '
            f'text-anchor="end">{yv:.6g}</text>'
        )
    parts.append(
        f'<text x="{(ml + width - mr) / 2:.2f}" y="{height - 12}" font-size="13" '
        f'text-anchor="middle">{result.spec.swept_parameter}</text>'
    )
    parts.append(
        f'<text x="14" y="{(mt + height - mb) / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 14 '
        f'{(mt + height - mb) / 2:.2f})">mean effective throughput</text>'
    )
    for mi, method in enumerate(methods):
        color = _SVG_COLORS[mi % len(_SVG_COLORS)]
        pts = [
            (sx(r["swept_value"]), sy(r["mean_et"]))
            for r in rows
            if r["method"] == method
        ]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        for x, y in pts:
            parts.append(
                f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{width - mr - 4}" y="{mt + 14 + 14 * mi}" font-size="11" '
            f'text-anchor="end" fill="{color}">{method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
