# tools/layout_hash_tool.py
"""
Layout hashing: every OCR box is addressed by the chain of quadrants that contain its
center, from the envelope of all boxes down L levels. Level i of the chain is written
with four consecutive letters (A-D for level 1, E-H for level 2, ...); question tokens
use the zero symbol.
"""
from __future__ import annotations

import math
import numbers
import string
from dataclasses import dataclass
from typing import Sequence

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from utils.errors import LayoutHashError

MAX_LEVELS = 6  # four letters per level, 26 letters
QUESTION_SYMBOL = "0"
_EDGE_EPS = 1e-12  # keeps the far edge of the root rect inside the last cell

Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in coords):
            raise LayoutHashError(f"non-finite box coordinates {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise LayoutHashError(f"inverted box {coords}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BoundingBox":
        if len(values) != 4:
            raise LayoutHashError(f"expected 4 box coordinates, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class QuadSymbol:
    level: int
    quadrant: int  # 1=top-left, 2=top-right, 3=bottom-left, 4=bottom-right


@dataclass(frozen=True)
class LayoutCode:
    symbols: tuple[QuadSymbol, ...]

    @property
    def quadrants(self) -> tuple[int, ...]:
        return tuple(s.quadrant for s in self.symbols)

    def letters(self) -> list[str]:
        return [symbol_to_letter(s) for s in self.symbols]


@dataclass(frozen=True)
class HashGrid:
    codes: tuple[LayoutCode, ...]
    root_rect: Rect

    @property
    def levels(self) -> int:
        return len(self.codes[0].symbols) if self.codes else 0


def bounding_rect(boxes: Sequence[BoundingBox]) -> Rect:
    """Envelope of all box corners (not of the centers)."""
    if not boxes:
        raise LayoutHashError("no boxes")
    return (
        min(b.x_min for b in boxes),
        min(b.y_min for b in boxes),
        max(b.x_max for b in boxes),
        max(b.y_max for b in boxes),
    )


def _half(lo: float, hi: float, c: float) -> int:
    # half-open cells: the lower half takes c < mid; a zero-extent axis always gives 0
    if hi <= lo:
        return 0
    mid = lo + (hi - lo) / 2
    return 0 if c < mid else 1


def assign_quadrant(center: tuple[float, float], cell: Rect) -> int:
    x_min, y_min, x_max, y_max = cell
    bit_x = _half(x_min, x_max, center[0])
    bit_y = _half(y_min, y_max, center[1])
    return 1 + bit_x + 2 * bit_y


def _check_levels(levels: int) -> None:
    if isinstance(levels, bool) or not isinstance(levels, numbers.Integral) or levels < 1 or levels > MAX_LEVELS:
        raise LayoutHashError(f"hash levels must be in 1..{MAX_LEVELS}, got {levels}")


def cell_index(c: float, lo: float, hi: float, levels: int) -> int:
    """Fixed-point cell index floor(u * 2^levels) of c along one axis of the root rect."""
    if hi <= lo:
        return 0
    u = min(max((c - lo) / (hi - lo), 0.0), 1.0 - _EDGE_EPS)
    return math.floor(u * 2 ** levels)


def layout_code(center: tuple[float, float], root_rect: Rect, levels: int) -> LayoutCode:
    """Bit i of each axis index picks the level-i half, so the code is the quadrant descent
    from root_rect computed without accumulating midpoints."""
    kx = cell_index(center[0], root_rect[0], root_rect[2], levels)
    ky = cell_index(center[1], root_rect[1], root_rect[3], levels)
    symbols = []
    for level in range(1, levels + 1):
        shift = levels - level
        symbols.append(QuadSymbol(level, 1 + ((kx >> shift) & 1) + 2 * ((ky >> shift) & 1)))
    return LayoutCode(tuple(symbols))


def layout_hash(boxes: Sequence[BoundingBox], levels: int) -> HashGrid:
    """Hashes every box center through `levels` rounds of quadrant descent."""
    _check_levels(levels)
    root = bounding_rect(boxes)
    codes = tuple(layout_code(b.center, root, levels) for b in boxes)
    return HashGrid(codes=codes, root_rect=root)


def symbol_to_letter(symbol: QuadSymbol) -> str:
    if symbol.level > MAX_LEVELS:
        raise LayoutHashError("alphabet exhausted")
    if symbol.level < 1 or not 1 <= symbol.quadrant <= 4:
        raise LayoutHashError(f"invalid symbol {symbol}")
    return string.ascii_uppercase[4 * (symbol.level - 1) + (symbol.quadrant - 1)]


def question_symbol() -> str:
    return QUESTION_SYMBOL


def layout_letters(grid: HashGrid) -> list[list[str]]:
    """L rows of n letters; row i holds level i+1 for every box, in input order."""
    columns = [code.letters() for code in grid.codes]
    return [[column[i] for column in columns] for i in range(grid.levels)]


def letter_alphabet(levels: int = MAX_LEVELS) -> list[str]:
    return list(string.ascii_uppercase[: 4 * levels])
