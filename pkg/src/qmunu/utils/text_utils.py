"""Parsing helpers for comma separated command-line values."""

from fractions import Fraction
from typing import List, Optional, Union

Number = Union[float, Fraction]


def parse_int_list(text: Optional[str]) -> Optional[List[int]]:
    """
    Parses a comma separated list of integers.

    Examples:
        >>> parse_int_list("3,2,1")
        [3, 2, 1]
        >>> parse_int_list("")
        []
    """
    if text is None:
        return None
    return [int(part) for part in text.split(",") if part.strip()]


def parse_number(text: str, exact: bool = False) -> Number:
    """
    Parses a scalar parameter, as a Fraction when exact is set.

    Examples:
        >>> parse_number("1/3", exact=True)
        Fraction(1, 3)
        >>> parse_number("0.25")
        0.25
    """
    text = text.strip()
    if exact:
        return Fraction(text)
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_number_list(text: Optional[str], exact: bool = False) -> Optional[List[Number]]:
    """Parses a comma separated list of scalars; see parse_number."""
    if text is None:
        return None
    return [parse_number(part, exact) for part in text.split(",") if part.strip()]
