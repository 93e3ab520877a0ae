from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from inference import ExperimentReport

from acceptance_util import column, find_row

"""
Graders decide whether an exercise's reports reproduce the reference results. A grader returns Pass, Fail or None
(nothing to say); a CompoundGrader passes only when none of its graders fails.
"""

Reports = Dict[str, ExperimentReport]


@dataclass
class Grade:
    reason: str = ''


class Pass(Grade):
    pass


class Fail(Grade):
    pass


class Grader:
    def grade(self, reports: Reports) -> Optional[Grade]:
        raise NotImplementedError


class CompoundGrader(Grader):
    def __init__(self, graders: Sequence[Grader]):
        self.graders = list(graders)

    def grade(self, reports: Reports) -> Optional[Grade]:
        passes: List[str] = []
        for grader in self.graders:
            grade = grader.grade(reports)
            if isinstance(grade, Fail):
                return grade
            if isinstance(grade, Pass):
                passes.append(grade.reason)
        return Pass('; '.join(passes)) if passes else None


@dataclass
class NearValue(Grader):
    """
    Passes when one column of one row lies within an absolute tolerance, or a relative one, of the reference value.
    """
    table: str
    where: Dict[str, object]
    column: str
    expected: float
    abs_tol: float = None
    rel_tol: float = None

    def grade(self, reports: Reports) -> Optional[Grade]:
        row = find_row(reports[self.table], **self.where)
        value = getattr(row, self.column)
        tol = self.abs_tol if self.abs_tol is not None else self.rel_tol * abs(self.expected)
        what = f"{self.column}{self.where}={value:.6g} (reference {self.expected:g} +- {tol:.3g})"
        if abs(value - self.expected) <= tol:
            return Pass(what)
        return Fail(what)


@dataclass
class InRange(Grader):
    table: str
    where: Dict[str, object]
    column: str
    low: float
    high: float

    def grade(self, reports: Reports) -> Optional[Grade]:
        value = getattr(find_row(reports[self.table], **self.where), self.column)
        what = f"{self.column}{self.where}={value:.6g} in [{self.low:g}, {self.high:g}]"
        return Pass(what) if self.low <= value <= self.high else Fail(what)


@dataclass
class Monotone(Grader):
    """Passes when the column strictly increases (or decreases) down the selected rows."""
    table: str
    column: str
    increasing: bool = True
    select: Callable[[object], bool] = None

    def grade(self, reports: Reports) -> Optional[Grade]:
        values = column(reports[self.table], self.column, self.select)
        pairs = list(zip(values, values[1:]))
        ok = all(b > a for a, b in pairs) if self.increasing else all(b < a for a, b in pairs)
        what = f"{self.column} {'increasing' if self.increasing else 'decreasing'}: {[f'{v:.4g}' for v in values]}"
        return Pass(what) if ok else Fail(what)


@dataclass
class CloseTogether(Grader):
    """Passes when every selected value lies within rel_tol of the first one."""
    table: str
    column: str
    select: Callable[[object], bool]
    rel_tol: float

    def grade(self, reports: Reports) -> Optional[Grade]:
        values = column(reports[self.table], self.column, self.select)
        spread = max(abs(v - values[0]) for v in values) / abs(values[0])
        what = f"{self.column} spread {spread:.3%} (limit {self.rel_tol:.0%})"
        return Pass(what) if spread <= self.rel_tol else Fail(what)


@dataclass
class Smaller(Grader):
    """Passes when the value found by `left` is below the value found by `right`. Each is (table, where, column)."""
    left: tuple
    right: tuple

    def grade(self, reports: Reports) -> Optional[Grade]:
        a, b = (getattr(find_row(reports[t], **w), c) for t, w, c in (self.left, self.right))
        what = f"{a:.6g} < {b:.6g}"
        return Pass(what) if a < b else Fail(what)


@dataclass
class ArgMin(Grader):
    """Passes when the smallest value of the column among the selected rows sits on the expected row."""
    table: str
    column: str
    key: str
    expected: object
    select: Callable[[object], bool] = None

    def grade(self, reports: Reports) -> Optional[Grade]:
        rows = [r for r in reports[self.table].rows if self.select is None or self.select(r)]
        best = min(rows, key=lambda r: getattr(r, self.column))
        what = f"smallest {self.column} at {self.key}={getattr(best, self.key)} (expected {self.expected})"
        return Pass(what) if getattr(best, self.key) == self.expected else Fail(what)
