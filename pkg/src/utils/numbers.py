from decimal import Decimal
from fractions import Fraction
from typing import Union

Number = Union[int, float, str, Decimal, Fraction]

def to_fraction(value: Number) -> Fraction:
    """
    Convert a JSON-ish number to an exact Fraction.
    Floats go through their shortest repr so 0.1 becomes 1/10, not the binary value.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"{value} is not a finite number")
        return Fraction(repr(value))
    if isinstance(value, (Decimal, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a number")

def to_json_number(value: Fraction) -> Union[int, float, str]:
    """
    Integral values stay ints. Values a float carries exactly (after its shortest repr)
    become floats; anything else, such as 1/3, is written as the string "1/3".
    """
    if value.denominator == 1:
        return int(value)
    as_float = float(value)
    if Fraction(repr(as_float)) == value:
        return as_float
    return f"{value.numerator}/{value.denominator}"
