"""
多项式工具
- 指数键解析 ("2" / "1,0")
- 系数表 <-> sympy Poly
- 表达式字符串解析 (有理系数)
"""
import re
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import sympy

from src.core.errors import SchemaError

_EXPONENT_KEY = re.compile(r'^\s*\d+(\s*,\s*\d+)*\s*,?\s*$')


def variables(count: int) -> List[sympy.Symbol]:
    """底空间坐标 y0, y1, ..."""
    return [sympy.Symbol(f"y{i}", real=True) for i in range(count)]


def parse_exponent_key(key: str, nvars: int) -> Tuple[int, ...]:
    """
    解析指数键
    "2" -> (2,), "1,0" -> (1, 0)；单变量可省略逗号
    """
    if not _EXPONENT_KEY.match(key):
        raise SchemaError(f"malformed exponent key {key!r}")
    exps = tuple(int(part) for part in key.replace(" ", "").strip(",").split(","))
    if len(exps) != nvars:
        raise SchemaError(f"exponent key {key!r} has {len(exps)} entries, expected {nvars}")
    return exps


def format_exponent_key(monom: Sequence[int]) -> str:
    return ",".join(str(e) for e in monom)


def to_rational(value: Union[str, int, Fraction, float]) -> sympy.Rational:
    try:
        frac = Fraction(value.strip()) if isinstance(value, str) else Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"coefficient {value!r} is not a rational number: {e}")
    return sympy.Rational(frac.numerator, frac.denominator)


def poly_from_coefficients(coeffs: Mapping[str, Union[str, int, Fraction]], gens: Sequence[sympy.Symbol]) -> sympy.Poly:
    """系数表 {指数键: 系数} -> 有理系数 Poly"""
    terms: Dict[Tuple[int, ...], sympy.Rational] = {}
    for key, value in coeffs.items():
        monom = parse_exponent_key(key, len(gens))
        terms[monom] = terms.get(monom, sympy.Integer(0)) + to_rational(value)
    if not terms:
        terms[(0,) * len(gens)] = sympy.Integer(0)
    return sympy.Poly.from_dict(terms, *gens, domain="QQ")


def poly_to_coefficients(poly: sympy.Poly) -> Dict[str, str]:
    return {format_exponent_key(monom): str(coeff) for monom, coeff in sorted(poly.terms())}


def parse_polynomial(text: Union[str, sympy.Expr, int, Fraction], gens: Sequence[sympy.Symbol]) -> sympy.Poly:
    """表达式 ("y0**2 - 1/3") -> Poly；小数系数按有理数读入"""
    local = {str(g): g for g in gens}
    try:
        expr = sympy.sympify(text, locals=local, rational=True)
    except (sympy.SympifyError, TypeError) as e:
        raise SchemaError(f"cannot parse polynomial {text!r}: {e}")
    stray = expr.free_symbols - set(gens)
    if stray:
        raise SchemaError(f"polynomial {text!r} uses unknown variables {sorted(map(str, stray))}")
    try:
        return sympy.Poly(expr, *gens, domain="QQ")
    except sympy.PolynomialError as e:
        raise SchemaError(f"{text!r} is not a polynomial: {e}")
