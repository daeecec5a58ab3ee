"""Homological perturbation on the tensor coalgebra.

Tensor vectors are dicts ``word -> coefficient`` where a word is a tuple of
basis vectors of the underlying space.  t-graded vectors are dicts
``order -> tensor vector``.  Coefficients inside this module are
``gmpy2.mpq`` for speed; :func:`as_fractions` converts back.

With ``h d + d h = 1 - i p`` the perturbed data for a perturbation ``delta``
of the tensor differential are, writing ``X = sum_k (-delta h)^k delta``,

    d'_W = p X i,   i' = i - h X i,   p' = p - p X h,   h' = h - h X h.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence

from gmpy2 import mpq

from .exactalg import form_degree
from .gradedmaps import DeformationSeries, GradedMap
from .resolution import SDRData, _is_w_mono


class FiltrationError(RuntimeError):
    pass


def coproduct(word: tuple) -> list:
    """All splits ``(w[:i], w[i:])`` including the two unit splits."""
    return [(word[:i], word[i:]) for i in range(len(word) + 1)]


def coproduct_tv(tv: dict) -> dict:
    out: dict = {}
    for w, c in tv.items():
        for split in coproduct(w):
            out[split] = out.get(split, 0) + c
    return {k: v for k, v in out.items() if v}


def as_fractions(tv: dict) -> dict:
    return {w: Fraction(int(c.numerator), int(c.denominator)) for w, c in tv.items()}


def _acc(out: dict, w, c) -> None:
    s = out.get(w)
    out[w] = c if s is None else s + c


def _clean(out: dict) -> dict:
    return {w: c for w, c in out.items() if c}


class _Kernel:
    """Per-space caches of degrees, W-membership and decomposed map values."""

    def __init__(self, space):
        self.space = space
        self._deg: dict = {}
        self._w: dict = {}
        self._form: dict = {}
        self._vals: dict = {}

    def form(self, word: tuple) -> int:
        f = self._form.get(word)
        if f is None:
            f = self._form[word] = sum(form_degree(b[1]) for b in word)
        return f

    def deg(self, b) -> int:
        d = self._deg.get(b)
        if d is None:
            d = self._deg[b] = self.space.degree(b)
        return d

    def in_w(self, b) -> bool:
        v = self._w.get(b)
        if v is None:
            v = self._w[b] = _is_w_mono(b[1])
        return v

    def values(self, f: GradedMap, args: tuple) -> tuple:
        key = (id(f), args)
        hit = self._vals.get(key)
        if hit is None:
            val = f.on_basis(args)
            hit = tuple((mpq(c.numerator, c.denominator), b) for c, b in self.space.decompose(val))
            self._vals[key] = (f, hit)  # keep f alive so its id stays unique
            return hit
        return hit[1]


_KERNELS: dict = {}


def _kernel(space) -> _Kernel:
    k = _KERNELS.get(id(space))
    if k is None or k.space is not space:
        k = _KERNELS[id(space)] = _Kernel(space)
    return k


def lift(f: GradedMap) -> Callable[[dict], dict]:
    """Coderivation of T(V) induced by ``f`` (same signs as gradedmaps.lift_coderivation)."""
    K = _kernel(f.space)
    m = f.arity
    odd = f.degree % 2

    def apply(tv: dict) -> dict:
        out: dict = {}
        for word, c in tv.items():
            n = len(word)
            prefix = 0
            for i in range(n - m + 1):
                vals = K.values(f, word[i:i + m])
                if vals:
                    cc = -c if (odd and prefix % 2) else c
                    head, tail = word[:i], word[i + m:]
                    for coef, b in vals:
                        _acc(out, head + (b,) + tail, cc * coef)
                if i < n:
                    prefix += K.deg(word[i])
        return _clean(out)

    return apply


def tensor_ip(s: SDRData) -> Callable[[dict], dict]:
    """(ip)^{tensor n}: keeps words whose letters all lie in W."""
    K = _kernel(s.alg.space)

    def apply(tv: dict) -> dict:
        return {w: c for w, c in tv.items() if all(K.in_w(b) for b in w)}

    return apply


def tensor_homotopy(s: SDRData) -> Callable[[dict], dict]:
    """sum_i (-1)^{|v_1|+...+|v_{i-1}|} 1^{i-1} (x) h (x) (ip)^{n-i}."""
    K = _kernel(s.alg.space)
    h = s.h

    def apply(tv: dict) -> dict:
        out: dict = {}
        for word, c in tv.items():
            n = len(word)
            # only positions whose tail lies entirely in W contribute
            first = n
            while first > 0 and K.in_w(word[first - 1]):
                first -= 1
            start = max(first - 1, 0)
            prefix = sum(K.deg(b) for b in word[:start])
            for i in range(start, n):
                vals = K.values(h, (word[i],))
                if vals:
                    cc = -c if prefix % 2 else c
                    head, tail = word[:i], word[i + 1:]
                    for coef, b in vals:
                        _acc(out, head + (b,) + tail, cc * coef)
                prefix += K.deg(word[i])
        return _clean(out)

    return apply


def tensor_differential(s: SDRData) -> Callable[[dict], dict]:
    return lift(s.d)


# ---------------------------------------------------------------------------
# t-graded helpers


def g_add(acc: dict, other: dict, c=1) -> dict:
    for k, tv in other.items():
        dst = acc.setdefault(k, {})
        for w, v in tv.items():
            _acc(dst, w, c * v)
    out = {}
    for k, v in acc.items():
        v = _clean(v)
        if v:
            out[k] = v
    return out


def g_apply(op: Callable[[dict], dict], g: dict) -> dict:
    return {k: r for k, tv in g.items() if (r := op(tv))}


class Perturbation:
    """delta = sum_j t^j delta_j, each delta_j a list of coderivation lifts."""

    def __init__(self, parts: dict):
        self.maps = {j: list(maps) for j, maps in parts.items()}
        self.parts = {j: [lift(f) for f in maps] for j, maps in parts.items()}

    def __call__(self, g: dict, t_order: int) -> dict:
        out: dict = {}
        for k, tv in g.items():
            for j, lifts in self.parts.items():
                if k + j > t_order:
                    continue
                for L in lifts:
                    r = L(tv)
                    if r:
                        dst = out.setdefault(k + j, {})
                        for w, v in r.items():
                            _acc(dst, w, v)
        return {k: c for k, v in out.items() if (c := _clean(v))}


def _geometric(delta: Perturbation, hhat: Callable, g: dict, t_order: int, bound: int,
               prune: Callable | None = None) -> dict:
    """sum_k (-delta h)^k delta applied to g; ``prune`` drops words that cannot matter."""
    cur = delta(g, t_order)
    if prune is not None:
        cur = prune(cur)
    total = {k: dict(v) for k, v in cur.items()}
    steps = 0
    while cur:
        cur = delta(g_apply(hhat, cur), t_order)
        cur = {k: {w: -c for w, c in tv.items()} for k, tv in cur.items()}
        if prune is not None:
            cur = prune(cur)
        if not cur:
            break
        steps += 1
        if steps > bound:
            raise FiltrationError(f"(delta h)^k still nonzero at k={steps} > bound {bound}")
        total = g_add(total, cur)
    return total


def filtration_bound(s: SDRData, t_order: int, res_step: int = 2) -> int:
    """Each h lowers the total form degree by one; perturbations add at most res_step per t."""
    return res_step * t_order + s.alg.n + 1


def output_pruner(delta: Perturbation, t_order: int) -> Callable | None:
    """Exact pruning for the length-one W output.

    With I(w) = len(w) - 1 - (total form degree), a round h-then-f changes I
    by 2 - arity(f) - res_degree(f).  The output needs I = 0, so a word at
    t-order k survives only if I is a sum of at most t_order - k values
    arity + res_degree - 2 of first-order maps.  Returns None when some map
    does not declare its resolution degree or m' is not neutral.
    """
    steps = []
    for j, maps in delta.maps.items():
        for f in maps:
            if f.res_degree is None:
                return None
            c = f.arity + f.res_degree - 2
            if j == 0 and c != 0:
                return None
            if j == 1:
                steps.append(c)
            elif j > 1:
                return None
    reach = [{0}]
    for _ in range(t_order):
        reach.append(reach[-1] | {a + c for a in reach[-1] for c in steps})

    K = None

    def prune(g: dict) -> dict:
        nonlocal K
        out = {}
        for k, tv in g.items():
            ok = reach[t_order - k]
            if K is None:
                K = _kernel(next(iter(delta.maps[0])).space)
            kept = {w: c for w, c in tv.items() if len(w) - 1 - K.form(w) in ok}
            if kept:
                out[k] = kept
        return out

    return prune


def transfer_word(s: SDRData, delta: Perturbation, word: tuple, t_order: int,
                  bound: int | None = None) -> dict:
    """Length-one part of p X i on a W-word, graded by t-order (Fraction values)."""
    bound = filtration_bound(s, t_order) if bound is None else bound
    hhat = tensor_homotopy(s)
    pp = tensor_ip(s)
    g = _geometric(delta, hhat, {0: {word: mpq(1)}}, t_order, bound,
                   output_pruner(delta, t_order))
    out: dict = {}
    for k, tv in g.items():
        ones = {w[0]: c for w, c in pp(tv).items() if len(w) == 1}
        if ones:
            out[k] = {b: Fraction(int(c.numerator), int(c.denominator)) for b, c in ones.items()}
    return out


def bpl_transfer(s: SDRData, mprime: Sequence[GradedMap], lam: Sequence[GradedMap],
                 t_order: int, arity_max: int) -> DeformationSeries:
    """Transferred structure on W for the perturbation m' + t lambda."""
    sp = s.alg.space
    delta = Perturbation({0: list(mprime), 1: list(lam)})
    bound = filtration_bound(s, t_order)
    cache: dict = {}

    def values(args):
        hit = cache.get(args)
        if hit is None:
            for b in args:
                if not _is_w_mono(b[1]):
                    raise ValueError(f"input {b} is not in W")
            hit = transfer_word(s, delta, tuple(args), t_order, bound)
            cache[args] = hit
        return hit

    def component(k: int, arity: int) -> GradedMap:
        def rule(args):
            out = sp.zero()
            for b, c in values(args).get(k, {}).items():
                out = out + sp.embed(b).scale(c)
            return out

        return GradedMap(arity, 1, rule, sp, label=f"bpl[{k},{arity}]")

    comps = [[component(k, r) for r in range(arity_max + 1)] for k in range(t_order + 1)]
    return DeformationSeries(comps)


def perturbed_sdr(s: SDRData, delta: Perturbation, t_order: int):
    """Functions (i', p', h', X) on t-graded tensor vectors."""
    hhat = tensor_homotopy(s)
    pp = tensor_ip(s)
    bound = filtration_bound(s, t_order)
    X = lambda g: _geometric(delta, hhat, g, t_order, bound)

    def i_new(g):
        return g_add({k: dict(v) for k, v in g.items()}, g_apply(hhat, X(g)), -1)

    def p_new(g):
        return g_add(g_apply(pp, g), g_apply(pp, X(g_apply(hhat, g))), -1)

    def h_new(g):
        return g_add(g_apply(hhat, g), g_apply(hhat, X(g_apply(hhat, g))), -1)

    return i_new, p_new, h_new, X
