"""Conic program builder in the slack form  A x + s = b,  s in K.

Constraints are recorded in the order they are added; ``compile`` reorders
rows into the zero | nonneg | second-order | exponential sections the solver
expects and remembers the permutation so dual values are reported back in
insertion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cones import ConeLayout

__all__ = ["Affine", "ConicProgram", "ConicSolution", "CompiledProgram"]

Number = Union[int, float]


class Affine:
    """Sparse affine expression ``sum coef_i x_i + const`` over a program's
    variables."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Optional[Dict[int, float]] = None, const: float = 0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @staticmethod
    def of(value: Union["Affine", Number]) -> "Affine":
        if isinstance(value, Affine):
            return value
        return Affine(const=float(value))

    def copy(self) -> "Affine":
        return Affine(self.coeffs, self.const)

    def __add__(self, other):
        other = Affine.of(other)
        out = self.copy()
        out.const += other.const
        for k, v in other.coeffs.items():
            out.coeffs[k] = out.coeffs.get(k, 0.0) + v
        return out

    __radd__ = __add__

    def __neg__(self):
        return Affine({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-Affine.of(other))

    def __rsub__(self, other):
        return Affine.of(other) + (-self)

    def __mul__(self, scalar: Number):
        s = float(scalar)
        return Affine({k: s * v for k, v in self.coeffs.items()}, s * self.const)

    __rmul__ = __mul__

    def __repr__(self):
        terms = " + ".join(f"{v:g}*x{k}" for k, v in sorted(self.coeffs.items()))
        return f"Affine({terms or '0'} + {self.const:g})"


@dataclass
class ConicSolution:
    """Result of one solve, mapped back to the builder's variables/rows."""

    status: str                     # optimal | infeasible | unbounded | numerical_failure
    primal: np.ndarray
    dual: np.ndarray                # one multiplier per constraint row, insertion order
    slack: np.ndarray
    objective_value: float
    iterations: int
    residuals: Tuple[float, float, float]   # (primal, dual, gap), normalized
    trace: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, expr: Affine) -> float:
        return sum(v * self.primal[k] for k, v in expr.coeffs.items()) + expr.const


@dataclass
class CompiledProgram:
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    cones: ConeLayout
    row_perm: np.ndarray      # compiled row index -> insertion index


class ConicProgram:
    """Incrementally built conic program (minimization)."""

    def __init__(self):
        self._num_vars = 0
        self.variable_names: List[str] = []
        self._objective = Affine()
        self._maximize = False
        # each entry: (kind, rows) with kind in zero/nonneg/soc/exp;
        # rows are (coeff dict, rhs const) meaning  sum coef x + s_row = rhs
        self._rows: List[Tuple[str, Dict[int, float], float]] = []
        self._soc_blocks: List[List[int]] = []
        self._exp_blocks: List[List[int]] = []

    # -- variables -------------------------------------------------------------

    def add_variable(self, name: Optional[str] = None) -> Affine:
        idx = self._num_vars
        self._num_vars += 1
        self.variable_names.append(name or f"x{idx}")
        return Affine({idx: 1.0})

    def add_variables(self, count: int, prefix: str = "x") -> List[Affine]:
        return [self.add_variable(f"{prefix}{i}") for i in range(count)]

    @property
    def num_vars(self) -> int:
        return self._num_vars

    # -- objective ---------------------------------------------------------------

    def minimize(self, expr: Affine):
        self._objective = Affine.of(expr)
        self._maximize = False

    def maximize(self, expr: Affine):
        self._objective = Affine.of(expr)
        self._maximize = True

    # -- constraints ---------------------------------------------------------------

    def _add_row(self, kind: str, expr: Affine, rhs: float) -> int:
        """Record  expr + s = rhs  with s in the section ``kind``."""
        self._rows.append((kind, dict(expr.coeffs), rhs - expr.const))
        return len(self._rows) - 1

    def add_equality(self, expr: Affine, rhs: Union[Affine, Number] = 0.0) -> int:
        diff = Affine.of(expr) - Affine.of(rhs)
        return self._add_row("zero", diff, 0.0)

    def add_le(self, lhs: Union[Affine, Number], rhs: Union[Affine, Number]) -> int:
        """lhs <= rhs  (slack rhs - lhs is nonnegative)."""
        diff = Affine.of(lhs) - Affine.of(rhs)
        return self._add_row("nonneg", diff, 0.0)

    def add_nonneg(self, expr: Affine) -> int:
        """expr >= 0."""
        return self._add_row("nonneg", -Affine.of(expr), 0.0)

    def add_second_order(self, entries: Sequence[Union[Affine, Number]]) -> List[int]:
        """(e0, e1, ..., ed) in SOC:  e0 >= || (e1..ed) ||_2."""
        if len(entries) < 2:
            raise ValueError("second-order block needs length >= 2")
        rows = [self._add_row("soc", -Affine.of(e), 0.0) for e in entries]
        self._soc_blocks.append(rows)
        return rows

    def add_exponential(self, e1, e2, e3) -> List[int]:
        """(e1, e2, e3) in the exponential cone  e2 * exp(e1/e2) <= e3."""
        rows = [self._add_row("exp", -Affine.of(e), 0.0) for e in (e1, e2, e3)]
        self._exp_blocks.append(rows)
        return rows

    def add_log_lower_bound(self, t_expr, x_expr) -> List[int]:
        """t <= ln(x) with x > 0, one exponential-cone block."""
        return self.add_exponential(t_expr, 1.0, x_expr)

    def add_quadratic_upper_bound(
        self,
        quad_terms: Iterable[Tuple[float, Union[Affine, Number]]],
        linear_rhs: Union[Affine, Number],
    ) -> List[int]:
        """sum_i coef_i * (affine_i)^2 <= rhs, coef_i >= 0, as one SOC block.

        Encoded as || (2 sqrt(c_i) q_i, rhs - 1) || <= rhs + 1.
        """
        rhs = Affine.of(linear_rhs)
        entries: List[Union[Affine, Number]] = [rhs + 1.0]
        for coef, term in quad_terms:
            if coef < 0:
                raise ValueError("quadratic coefficients must be nonnegative")
            if coef == 0.0:
                continue
            entries.append(Affine.of(term) * (2.0 * math.sqrt(coef)))
        entries.append(rhs - 1.0)
        return self.add_second_order(entries)

    # -- compilation -----------------------------------------------------------------

    def compile(self) -> CompiledProgram:
        n = self._num_vars
        order: List[int] = []
        layout = ConeLayout()
        soc_dims: List[int] = []

        zero_rows = [i for i, r in enumerate(self._rows) if r[0] == "zero"]
        nonneg_rows = [i for i, r in enumerate(self._rows) if r[0] == "nonneg"]
        order.extend(zero_rows)
        order.extend(nonneg_rows)
        for block in self._soc_blocks:
            order.extend(block)
            soc_dims.append(len(block))
        for block in self._exp_blocks:
            order.extend(block)
        layout = ConeLayout(
            zero=len(zero_rows),
            nonneg=len(nonneg_rows),
            soc_dims=soc_dims,
            n_exp=len(self._exp_blocks),
        )
        m = len(order)
        a = np.zeros((m, n))
        b = np.zeros(m)
        for row_out, row_in in enumerate(order):
            _, coeffs, rhs = self._rows[row_in]
            for k, v in coeffs.items():
                a[row_out, k] = v
            b[row_out] = rhs
        c = np.zeros(n)
        for k, v in self._objective.coeffs.items():
            c[k] = v
        if self._maximize:
            c = -c
        return CompiledProgram(
            c=c, a=a, b=b, cones=layout, row_perm=np.asarray(order, dtype=int)
        )

    # -- solving ---------------------------------------------------------------------

    def solve(self, tol: float = 1e-8, max_iters: int = 200, verbose: bool = False) -> ConicSolution:
        from .solver import solve_compiled

        compiled = self.compile()
        raw = solve_compiled(compiled, tol=tol, max_iters=max_iters, verbose=verbose)
        m = len(self._rows)
        dual = np.zeros(m)
        slack = np.zeros(m)
        dual[compiled.row_perm] = raw.dual
        slack[compiled.row_perm] = raw.slack
        obj = raw.objective_value
        if raw.status == "optimal":
            obj = (-obj if self._maximize else obj) + self._objective.const
        return ConicSolution(
            status=raw.status,
            primal=raw.primal,
            dual=dual,
            slack=slack,
            objective_value=obj,
            iterations=raw.iterations,
            residuals=raw.residuals,
            trace=raw.trace,
        )

    # -- debugging dump -----------------------------------------------------------------

    def dump_triplets(self) -> str:
        """Sparse triplet text dump.

        Format: one header line ``conic n_vars n_rows``; then ``obj var coef``
        lines; then per row ``row <kind> rhs`` followed by ``a row var coef``
        triplets; SOC/exp blocks listed as ``soc r1 r2 ...`` / ``exp r1 r2 r3``.
        """
        lines = [f"conic {self._num_vars} {len(self._rows)}"]
        sign = -1.0 if self._maximize else 1.0
        for k, v in sorted(self._objective.coeffs.items()):
            lines.append(f"obj {k} {sign * v:.17g}")
        for i, (kind, coeffs, rhs) in enumerate(self._rows):
            lines.append(f"row {i} {kind} {rhs:.17g}")
            for k, v in sorted(coeffs.items()):
                lines.append(f"a {i} {k} {v:.17g}")
        for block in self._soc_blocks:
            lines.append("soc " + " ".join(str(r) for r in block))
        for block in self._exp_blocks:
            lines.append("exp " + " ".join(str(r) for r in block))
        return "\n".join(lines) + "\n"
