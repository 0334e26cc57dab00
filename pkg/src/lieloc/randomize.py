"""Random globally defined cochains for property checks.

Built from an example's ``random`` block: global functions (given in every
chart), global one-cochains (the differentials of those functions plus any
declared extras) and, for twisted objects, a global section of Q.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from .algebroid import ACochain, AlgebroidModel, delta
from .equivariant import EquivTwistedCochain, LieAlgebraAction
from .exterior import c_wedge
from .expr import ONE, Expr, Symbol, add, as_expr, mul
from .twisted import TwistedCochain

__all__ = ["RandomCochains"]


class RandomCochains:
    """Factory of random cochains for one example.

    ``terms`` bounds the number of wedge monomials in each cochain and
    ``poly_degree`` the degree of the random coefficient polynomials in the
    global functions.
    """

    def __init__(self, A: AlgebroidModel, config: Dict, seed: int = 0, terms: int = 2, poly_degree: int = 2):
        self.A = A
        self.rng = np.random.default_rng(seed)
        self.terms = terms
        self.poly_degree = poly_degree
        charts = list(A.charts)
        self.charts = charts
        self.functions: List[Dict[str, Expr]] = []
        fn = config.get("functions", {})
        if fn:
            n = len(next(iter(fn.values())))
            if any(len(v) != n for v in fn.values()) or set(fn) != set(charts):
                raise ValueError("random functions must be listed for every chart with equal counts")
            self.functions = [{ch: fn[ch][i] for ch in charts} for i in range(n)]
        gens: List[ACochain] = []
        if config.get("differentials", True):
            for f in self.functions:
                gens.append(delta(A, ACochain(A.rank, {ch: {(): v} for ch, v in f.items()})))
        for g in config.get("generators", []):
            gens.append(ACochain(A.rank, g))
        self.generators = [g for g in gens if not g.is_zero()]
        self.twist = {ch: as_expr(v) for ch, v in config.get("twist", {ch: ONE for ch in charts}).items()}

    # scalar pieces ---------------------------------------------------------

    def _coef(self) -> float:
        return float(np.round(self.rng.normal(), 6))

    def function(self) -> Dict[str, Expr]:
        """Random polynomial of bounded degree in the global functions."""
        c0 = as_expr(self._coef())
        out = {ch: [c0] for ch in self.charts}
        nf = len(self.functions)
        if nf:
            for _ in range(2):
                d = int(self.rng.integers(1, self.poly_degree + 1))
                idx = self.rng.integers(0, nf, size=d)
                c = self._coef()
                for ch in self.charts:
                    out[ch].append(mul(c, *(self.functions[i][ch] for i in idx)))
        return {ch: add(*v) for ch, v in out.items()}

    # cochains --------------------------------------------------------------

    def cochain(self, k: int) -> ACochain:
        r = self.A.rank
        if not 0 <= k <= r:
            raise ValueError(f"degree {k} outside 0..{r}")
        data = {ch: {} for ch in self.charts}
        for _ in range(self.terms):
            f = self.function()
            if k == 0:
                parts = {ch: {(): f[ch]} for ch in self.charts}
            else:
                parts = self._wedge_monomial(k)
                parts = {ch: {i: mul(f[ch], v) for i, v in parts[ch].items()} for ch in self.charts}
            for ch in self.charts:
                for i, v in parts[ch].items():
                    data[ch][i] = add(data[ch].get(i, as_expr(0.0)), v)
        return ACochain(r, data)

    def _wedge_monomial(self, k: int):
        gens = self.generators
        if len(gens) < k:
            raise ValueError("not enough global generators for this degree")
        pick = self.rng.choice(len(gens), size=k, replace=False)
        out = {ch: {(): ONE} for ch in self.charts}
        for j in pick:
            out = {ch: c_wedge(out[ch], gens[j].coeffs(ch)) for ch in self.charts}
        return out

    def twisted(self, k: int) -> TwistedCochain:
        c = self.cochain(k)
        return TwistedCochain(self.A.rank, {ch: {i: mul(self.twist[ch], v) for i, v in co.items()} for ch, co in c.data.items()})

    def equivariant_twisted(self, action: LieAlgebraAction, degree: int) -> EquivTwistedCochain:
        """Random homogeneous element of the given equivariant degree."""
        r = self.A.rank
        terms = []
        for j in range(degree // 2 + 1):
            k = degree - 2 * j
            if not 0 <= k <= r:
                continue
            if k > 0 and len(self.generators) < k:
                continue
            exps = self.rng.integers(0, action.dim, size=j)
            P = mul(self._coef(), *(Symbol(action.params[e]) for e in exps))
            terms.append((P, self.twisted(k)))
        if not terms:
            raise ValueError(f"no cochains of equivariant degree {degree}")
        return EquivTwistedCochain(action, terms)
