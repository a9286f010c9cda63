"""Exact rational simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The origin is always feasible for this form, so a single phase suffices.
Bland's rule makes the method terminate on degenerate problems.  Arithmetic
runs on gmpy2 ``mpq`` internally; everything crossing the API is a Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import gmpy2

_ZERO = gmpy2.mpq(0)


def _q(x) -> gmpy2.mpq:
    x = Fraction(x)
    return gmpy2.mpq(x.numerator, x.denominator)


def _f(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, Fraction]
    rhs: Fraction


@dataclass
class LinearProgram:
    """Variables are created on first use; the objective is maximised."""

    variables: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, Fraction] = field(default_factory=dict)

    def var(self, name: str) -> str:
        if name not in self._index:
            self._index[name] = len(self.variables)
            self.variables.append(name)
        return name

    def __post_init__(self):
        self._index = {v: i for i, v in enumerate(self.variables)}

    def add(self, name: str, coeffs: Mapping[str, object], rhs) -> None:
        rhs = Fraction(rhs)
        if rhs < 0:
            raise ValueError(f"constraint {name!r}: negative right-hand side")
        clean = {}
        for v, c in coeffs.items():
            c = Fraction(c)
            if c != 0:
                self.var(v)
                clean[v] = clean.get(v, Fraction(0)) + c
        self.constraints.append(Constraint(name, {v: c for v, c in clean.items() if c}, rhs))

    def maximize(self, coeffs: Mapping[str, object]) -> None:
        for v in coeffs:
            self.var(v)
        self.objective = {v: Fraction(c) for v, c in coeffs.items()}

    def to_text(self) -> str:
        """Plain-text equation dump."""
        def term(c, v):
            return v if c == 1 else f"-{v}" if c == -1 else f"{c} {v}"
        lines = ["maximize " + " + ".join(term(c, v) for v, c in self.objective.items()),
                 "subject to"]
        for con in self.constraints:
            lhs = " + ".join(term(c, v) for v, c in con.coeffs.items()) or "0"
            lines.append(f"  {con.name}: {lhs} <= {con.rhs}")
        lines.append("  all variables >= 0")
        return "\n".join(lines).replace("+ -", "- ")

    def solve(self) -> "LPResult":
        return _simplex(self)


@dataclass
class LPResult:
    status: str  # "optimal" | "unbounded"
    objective: Fraction | None
    values: dict[str, Fraction]
    duals: dict[str, Fraction]  # constraint name -> multiplier (>= 0)

    def certificate(self) -> dict[str, Fraction]:
        """Constraints carrying a positive dual multiplier."""
        return {k: v for k, v in self.duals.items() if v > 0}


def _simplex(lp: LinearProgram) -> LPResult:
    n = len(lp.variables)
    idx = {v: i for i, v in enumerate(lp.variables)}
    rows: list[dict[int, gmpy2.mpq]] = []
    rhs: list[gmpy2.mpq] = []
    basis: list[int] = []
    for i, con in enumerate(lp.constraints):
        row = {idx[v]: _q(c) for v, c in con.coeffs.items()}
        row[n + i] = gmpy2.mpq(1)
        rows.append(row)
        rhs.append(_q(con.rhs))
        basis.append(n + i)
    # reduced-cost row of  z - c.x = 0
    obj: dict[int, gmpy2.mpq] = {idx[v]: -_q(c) for v, c in lp.objective.items() if c}
    z = gmpy2.mpq(0)
    col_rows: dict[int, set[int]] = {}
    for i, row in enumerate(rows):
        for j in row:
            col_rows.setdefault(j, set()).add(i)

    while True:
        entering = min((j for j, c in obj.items() if c < 0), default=None)
        if entering is None:
            break
        best = None
        for i in col_rows.get(entering, ()):
            a = rows[i].get(entering, _ZERO)
            if a > 0:
                ratio = rhs[i] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return LPResult("unbounded", None, {}, {})
        p = best[1]
        prow = rows[p]
        piv = prow[entering]
        if piv != 1:
            for j in prow:
                prow[j] /= piv
            rhs[p] /= piv
        for i in list(col_rows[entering]):
            if i == p:
                continue
            row = rows[i]
            f = row.get(entering)
            if not f:
                continue
            for j, a in prow.items():
                v = row.get(j, _ZERO) - f * a
                if v:
                    if j not in row:
                        col_rows.setdefault(j, set()).add(i)
                    row[j] = v
                elif j in row:
                    del row[j]
                    col_rows[j].discard(i)
            rhs[i] -= f * rhs[p]
        f = obj.get(entering)
        if f:
            for j, a in prow.items():
                v = obj.get(j, _ZERO) - f * a
                if v:
                    obj[j] = v
                else:
                    obj.pop(j, None)
            z -= f * rhs[p]
        basis[p] = entering

    values = {v: Fraction(0) for v in lp.variables}
    for i, b in enumerate(basis):
        if b < n:
            values[lp.variables[b]] = _f(rhs[i])
    duals = {con.name: _f(obj.get(n + i, _ZERO)) for i, con in enumerate(lp.constraints)}
    objective = sum((c * values[v] for v, c in lp.objective.items()), Fraction(0))
    return LPResult("optimal", objective, values, duals)
