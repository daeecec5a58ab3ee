"""Multilinear graded maps, the Gerstenhaber bracket and coderivations.

A map is stored as an evaluation rule on tuples of *basis* vectors of a
graded space; general arguments are expanded multilinearly.  Basis vectors
are homogeneous, so every Koszul sign is computed from their degrees.

A space object must provide ``decompose(v) -> [(coef, basis_vector)]``,
``degree(basis_vector) -> int`` (the degree used for signs), ``zero()``, and
``embed(basis_vector)`` returning the basis vector as an element.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence


class DegreeError(ValueError):
    pass


class GradedMap:
    """Homogeneous multilinear map of fixed arity and degree."""

    def __init__(self, arity: int, degree: int, rule: Callable, space, label: str = "",
                 res_degree: int | None = None):
        self.arity = arity
        self.degree = degree
        self.rule = rule
        self.space = space
        self.label = label
        self.res_degree = res_degree
        self._cache: dict = {}

    def __repr__(self):
        return f"GradedMap({self.label or '?'}, arity={self.arity}, degree={self.degree})"

    def on_basis(self, args: tuple):
        hit = self._cache.get(args)
        if hit is None:
            hit = self.rule(args)
            self._cache[args] = hit
        return hit

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self!r} takes {self.arity} arguments, got {len(args)}")
        sp = self.space
        if not args:
            return self.on_basis(())
        parts = [sp.decompose(a) for a in args]
        out = sp.zero()
        for combo in itertools.product(*parts):
            c = Fraction(1)
            basis = []
            for coef, b in combo:
                c *= coef
                basis.append(b)
            val = self.on_basis(tuple(basis))
            if c != 1:
                val = val.scale(c)
            out = out + val
        return out


def zero_map(space, arity: int, degree: int) -> GradedMap:
    return GradedMap(arity, degree, lambda args: space.zero(), space, label="0")


def linear_combination(terms: Sequence[tuple], label: str = "") -> GradedMap:
    """Sum of ``c * f`` for maps of equal arity and degree."""
    terms = [(Fraction(c), f) for c, f in terms if c]
    if not terms:
        raise ValueError("empty combination; use zero_map")
    arity, degree, space = terms[0][1].arity, terms[0][1].degree, terms[0][1].space
    if any(f.arity != arity or f.degree != degree for _, f in terms):
        raise DegreeError("combination of maps with different arity or degree")
    if len(terms) == 1 and terms[0][0] == 1:
        return terms[0][1]

    def rule(args):
        out = space.zero()
        for c, f in terms:
            out = out + f.on_basis(args).scale(c)
        return out

    return GradedMap(arity, degree, rule, space, label=label or "sum")


def scale_map(c, f: GradedMap) -> GradedMap:
    c = Fraction(c)
    return GradedMap(f.arity, f.degree, lambda args: f.on_basis(args).scale(c), f.space,
                     label=f"{c}*{f.label}", res_degree=f.res_degree)


def post_compose(op: Callable, f: GradedMap, degree_shift: int, label: str = "") -> GradedMap:
    """``op o f`` for a linear operator ``op`` on the space."""
    res = None if f.res_degree is None else f.res_degree
    return GradedMap(f.arity, f.degree + degree_shift, lambda args: op(f.on_basis(args)),
                     f.space, label=label or f"op({f.label})", res_degree=res)


def compose_circle(f: GradedMap, g: GradedMap) -> GradedMap:
    """Insertion ``f o g`` with the Koszul sign (-1)^{|g|(|v_1|+...+|v_i|)}."""
    space = f.space
    n, m = f.arity, g.arity
    arity = n + m - 1 if n > 0 else max(m - 1, 0)
    degree = f.degree + g.degree
    if n == 0:
        return zero_map(space, arity, degree)
    deg = space.degree

    def rule(args):
        out = space.zero()
        prefix_deg = 0
        for i in range(n):
            inner = g.on_basis(args[i:i + m])
            if not inner.is_zero():
                sign = -1 if (g.degree * prefix_deg) % 2 else 1
                for coef, b in space.decompose(inner):
                    val = f.on_basis(args[:i] + (b,) + args[i + m:])
                    out = out + val.scale(sign * coef)
            if i < len(args):
                prefix_deg += deg(args[i])
        return out

    return GradedMap(arity, degree, rule, space, label=f"({f.label} o {g.label})")


def gerstenhaber_bracket(f: GradedMap, g: GradedMap) -> GradedMap:
    """[f, g] = f o g - (-1)^{|f||g|} g o f."""
    fg = compose_circle(f, g)
    gf = compose_circle(g, f)
    sign = -1 if (f.degree * g.degree) % 2 == 0 else 1
    space = f.space

    def rule(args):
        return fg.on_basis(args) + gf.on_basis(args).scale(sign)

    res = None
    if f.res_degree is not None and g.res_degree is not None:
        res = f.res_degree + g.res_degree
    return GradedMap(fg.arity, fg.degree, rule, space, label=f"[{f.label},{g.label}]",
                     res_degree=res)


def hochschild_differential(mprime: GradedMap, f: GradedMap) -> GradedMap:
    return gerstenhaber_bracket(mprime, f)


# ---------------------------------------------------------------------------
# tensor words


def tv_add(acc: dict, tv: dict, c=1) -> dict:
    for w, v in tv.items():
        s = acc.get(w, 0) + c * v
        if s:
            acc[w] = s
        else:
            acc.pop(w, None)
    return acc


def tv_from_word(space, factors: Sequence) -> dict:
    """Expand a tuple of general elements into basis words."""
    out: dict = defaultdict(Fraction)
    for combo in itertools.product(*[space.decompose(v) for v in factors]):
        c = Fraction(1)
        word = []
        for coef, b in combo:
            c *= coef
            word.append(b)
        out[tuple(word)] += c
    return {w: v for w, v in out.items() if v}


def lift_coderivation(f: GradedMap) -> Callable[[dict], dict]:
    """Coderivation of T(V) induced by ``f``, acting on tensor vectors."""
    space = f.space
    m = f.arity

    def apply(tv: dict) -> dict:
        out: dict = {}
        for word, c in tv.items():
            n = len(word)
            prefix_deg = 0
            for i in range(n - m + 1):
                val = f.on_basis(word[i:i + m])
                if not val.is_zero():
                    sign = -1 if (f.degree * prefix_deg) % 2 else 1
                    for coef, b in space.decompose(val):
                        w2 = word[:i] + (b,) + word[i + m:]
                        out[w2] = out.get(w2, 0) + sign * c * coef
                if i < n:
                    prefix_deg += space.degree(word[i])
        return {w: v for w, v in out.items() if v}

    return apply


def project_length_one(space, tv: dict):
    out = space.zero()
    for word, c in tv.items():
        if len(word) == 1:
            out = out + space.embed(word[0]).scale(c)
    return out


# ---------------------------------------------------------------------------
# deformation series and MC checks


@dataclass
class DeformationSeries:
    """Components ``m^(0), ..., m^(T)``; each a list of maps of various arity."""

    components: list

    @property
    def order(self) -> int:
        return len(self.components) - 1

    def at(self, k: int) -> list:
        return self.components[k] if k < len(self.components) else []

    def arity_part(self, k: int, arity: int) -> list:
        return [f for f in self.at(k) if f.arity == arity]


@dataclass
class MCReport:
    rows: list = field(default_factory=list)  # (order, arity, tuple, residual)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.rows

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} mc checked={self.checked} failures={len(self.rows)}"


class TruncationError(RuntimeError):
    pass


def mc_residual_maps(series: DeformationSeries, k: int, arity: int) -> list:
    maps = []
    for i in range(k + 1):
        j = k - i
        for f in series.at(i):
            for g in series.at(j):
                if f.arity + g.arity - 1 == arity:
                    maps.append(gerstenhaber_bracket(f, g))
    return maps


def check_mc(series: DeformationSeries, t_order: int, arity_max: int, degree_max: int,
             basis: Callable[[int, int], Iterable], stop_at_first: bool = False,
             window: Callable | None = None) -> MCReport:
    """Evaluate sum_{i+j=k} [m^(i), m^(j)] on basis tuples; PASS iff all zero.

    ``window`` optionally restricts residuals to the part computed exactly
    (e.g. below a power-series truncation).
    """
    report = MCReport()
    for k in range(t_order + 1):
        for r in range(arity_max + 1):
            maps = mc_residual_maps(series, k, r)
            if not maps:
                continue
            for args in basis(r, degree_max):
                space = maps[0].space
                res = space.zero()
                for mp in maps:
                    res = res + mp.on_basis(tuple(args))
                if window is not None:
                    res = window(res)
                report.checked += 1
                if not res.is_zero():
                    report.rows.append((k, r, tuple(args), res))
                    if stop_at_first:
                        return report
    return report


def apply_gauge(f: GradedMap, series: DeformationSeries, t_order: int) -> DeformationSeries:
    """exp(t ad_f) applied to the series, truncated at ``t_order``."""
    if f.degree != 0:
        raise DegreeError("gauge generator must have degree 0")
    # powers[n][j] = ad_f^n (m^(j))
    comps = []
    for k in range(t_order + 1):
        out = []
        for n in range(k + 1):
            for g in series.at(k - n):
                h = g
                for _ in range(n):
                    h = gerstenhaber_bracket(f, h)
                out.append(scale_map(Fraction(1, math.factorial(n)), h) if n > 1 else h)
        comps.append(out)
    return DeformationSeries(comps)


@dataclass
class CheckReport:
    """Named identity checks; each failure row is (label, witness, residual)."""

    rows: list = field(default_factory=list)
    checked: int = 0

    def record(self, label: str, witness, residual) -> None:
        self.checked += 1
        if residual is not None and not residual.is_zero():
            self.rows.append((label, witness, residual))

    @property
    def passed(self) -> bool:
        return not self.rows

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} checked={self.checked} failures={len(self.rows)}"
