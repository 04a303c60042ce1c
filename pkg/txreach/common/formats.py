import logging
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from logging import Logger
from pathlib import Path
from typing import Iterable, List, Tuple, Union

from .errors import FormatError
from .geom_core import Scalar, TransmissionInstance, exact_scalar

logger: Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteQuery:
    s: int
    q: int


@dataclass(frozen=True)
class ContinuousQuery:
    s: int
    x: Decimal
    y: Decimal

    def scaled(self, inst: TransmissionInstance) -> Tuple[Scalar, Scalar]:
        """t in the instance's stored units."""
        return exact_scalar(self.x * inst.scale), exact_scalar(self.y * inst.scale)


Query = Union[DiscreteQuery, ContinuousQuery]


def parse_instance(text: str) -> TransmissionInstance:
    """
    Parse "n" followed by n lines "x y r".

    Parameters:
    - text (str): file content.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError("instance file is empty")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise FormatError(f"line 1: expected the point count, got {lines[0]!r}")
    if n < 0:
        raise FormatError(f"line 1: negative point count {n}")
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} point lines, found {len(lines) - 1}")

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if len(tokens) != 3:
            raise FormatError(f"line {lineno}: expected 'x y r', got {line!r}")
        rows.append(tokens)
    return TransmissionInstance.from_decimal_rows(rows)


def read_instance(path: Union[str, Path]) -> TransmissionInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def format_instance(inst: TransmissionInstance) -> str:
    return f"{inst.n}\n" + "".join(" ".join(row) + "\n" for row in inst.decimal_rows())


def write_instance(inst: TransmissionInstance, path: Union[str, Path]):
    Path(path).write_text(format_instance(inst), encoding="utf-8")


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"line {lineno}: expected a point id, got {token!r}")


def _decimal(token: str, lineno: int) -> Decimal:
    try:
        value = Decimal(token)
    except InvalidOperation:
        raise FormatError(f"line {lineno}: expected a decimal, got {token!r}")
    if not value.is_finite():
        raise FormatError(f"line {lineno}: non-finite coordinate {token!r}")
    return value


def parse_queries(text: str) -> List[Query]:
    queries: List[Query] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        match line.split():
            case []:
                continue
            case ["D", s, q]:
                queries.append(DiscreteQuery(s=_int(s, lineno), q=_int(q, lineno)))
            case ["C", s, x, y]:
                queries.append(ContinuousQuery(s=_int(s, lineno), x=_decimal(x, lineno), y=_decimal(y, lineno)))
            case _:
                raise FormatError(f"line {lineno}: expected 'D s q' or 'C s x y', got {line!r}")
    return queries


def read_queries(path: Union[str, Path]) -> List[Query]:
    return parse_queries(Path(path).read_text(encoding="utf-8"))


def format_answers(answers: Iterable[bool]) -> str:
    return "".join("1\n" if a else "0\n" for a in answers)
