from typing import Callable, List

from inference import ExperimentReport


def find_row(report: ExperimentReport, **fields):
    matches = [row for row in report.rows if all(getattr(row, k) == v for k, v in fields.items())]
    if len(matches) != 1:
        raise LookupError(f"expected one row with {fields}, found {len(matches)}")
    return matches[0]


def column(report: ExperimentReport, name: str, select: Callable[[object], bool] = None) -> List[float]:
    return [getattr(row, name) for row in report.rows if select is None or select(row)]
