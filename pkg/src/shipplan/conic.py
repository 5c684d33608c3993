"""Canonical cone program and a vectorized builder.

The program is

    minimize    c' x
    subject to  A x = b
                h - G x in K

where K is a product of nonnegative orthants, second-order cones
{(t, x): ||x|| <= t} and rotated cones {(v, w, u): u^2 <= v w, v, w >= 0}.
Rows are grouped: a group is a block of ``count`` cones of equal dimension,
stored as a (count, dim) array of row indices into G.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

NONNEG = "nonnegative"
SOC = "second-order"
RSOC = "rotated-second-order"


class Affine:
    """Vector of n affine expressions sum_k coef_k * x[idx_k] + const."""

    __slots__ = ("n", "terms", "const")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, n: int, terms=None, const=None):
        self.n = n
        self.terms: list[tuple[np.ndarray, np.ndarray]] = terms or []
        self.const = np.zeros(n) if const is None else np.broadcast_to(np.asarray(const, float), (n,)).copy()

    @staticmethod
    def constant(n: int, value) -> "Affine":
        return Affine(n, None, value)

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            if other.n != self.n:
                raise ValueError(f"length mismatch {self.n} vs {other.n}")
            return other
        return Affine(self.n, None, other)

    def __add__(self, other):
        o = self._coerce(other)
        return Affine(self.n, self.terms + o.terms, self.const + o.const)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        k = np.broadcast_to(np.asarray(k, float), (self.n,))
        return Affine(self.n, [(i, c * k) for i, c in self.terms], self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / np.asarray(k, float))

    def __getitem__(self, sl) -> "Affine":
        sel = np.arange(self.n)[sl]
        return Affine(sel.size, [(i[sel], c[sel]) for i, c in self.terms], self.const[sel])

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for i, c in self.terms:
            out += c * x[i]
        return out

    def triplets(self, row0: int):
        """(rows, cols, vals) of the linear part with rows row0..row0+n-1."""
        rows = np.arange(row0, row0 + self.n)
        if not self.terms:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        r = np.concatenate([rows] * len(self.terms))
        c = np.concatenate([i for i, _ in self.terms])
        v = np.concatenate([k for _, k in self.terms])
        keep = v != 0
        return r[keep], c[keep], v[keep]


@dataclass(frozen=True)
class ConeGroup:
    kind: str
    label: str
    rows: np.ndarray  # (count, dim) indices into G

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class StandardForm:
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    l: int
    q: list[int]
    transform: sp.csr_matrix  # maps raw cone rows to standard rows

    def dims(self) -> dict:
        return {"l": self.l, "q": list(self.q)}


@dataclass(frozen=True)
class ConeProgram:
    """Scaled canonical program with bookkeeping back to physical variables.

    Solver variable x relates to the physical quantity by ``scale * x``; rows
    were divided by ``eq_scale``/``ineq_scale`` and the objective by
    ``obj_scale``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    groups: tuple[ConeGroup, ...]
    eq_labels: tuple[tuple[str, int, int], ...]  # (label, start, count)
    variables: dict  # name -> index array
    scale: np.ndarray
    eq_scale: np.ndarray
    ineq_scale: np.ndarray
    obj_scale: float
    obj_const: float = 0.0
    meta: dict | None = None

    @property
    def n(self) -> int:
        return self.c.size

    def physical(self, x: np.ndarray, name: str) -> np.ndarray:
        idx = self.variables[name]
        return self.scale[idx] * x[idx]

    def objective(self, x: np.ndarray) -> float:
        """Unscaled objective value at solver point x."""
        return float(self.c @ x) * self.obj_scale + self.obj_const

    def standard_form(self) -> StandardForm:
        """Reorder rows (orthant first) and map rotated cones to second-order cones.

        A rotated row triple (v, w, u) becomes (v + w, v - w, 2u).
        """
        m = self.G.shape[0]
        rows, cols, vals = [], [], []
        out = 0
        l = 0
        for g in self.groups:
            if g.kind == NONNEG:
                r = g.rows.ravel()
                rows.append(np.arange(out, out + r.size)); cols.append(r); vals.append(np.ones(r.size))
                out += r.size
                l += r.size
        q: list[int] = []
        for g in self.groups:
            if g.kind == SOC:
                r = g.rows.ravel()
                rows.append(np.arange(out, out + r.size)); cols.append(r); vals.append(np.ones(r.size))
                out += r.size
                q += [g.dim] * g.count
            elif g.kind == RSOC:
                cnt, d = g.rows.shape
                base = out + d * np.arange(cnt)
                v, w = g.rows[:, 0], g.rows[:, 1]
                rows += [base, base, base + 1, base + 1]
                cols += [v, w, v, w]
                vals += [np.ones(cnt), np.ones(cnt), np.ones(cnt), -np.ones(cnt)]
                for j in range(2, d):
                    rows.append(base + j); cols.append(g.rows[:, j]); vals.append(2 * np.ones(cnt))
                out += cnt * d
                q += [d] * cnt
        if out != m:
            raise ValueError("cone groups do not cover all inequality rows exactly once")
        P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
        return StandardForm(
            c=self.c, A=self.A.tocsc(), b=self.b,
            G=(P @ self.G).tocsc(), h=P @ self.h, l=l, q=q, transform=P,
        )


class ProgramBuilder:
    """Collects variables, equalities and cone constraints, then scales them."""

    def __init__(self):
        self._n = 0
        self._vars: dict[str, np.ndarray] = {}
        self._scale: list[np.ndarray] = []
        self._eq: list[tuple[str, Affine]] = []
        self._cones: list[tuple[str, str, list[Affine]]] = []
        self._obj: list[Affine] = []

    def var(self, name: str, n: int, scale=1.0) -> Affine:
        if name in self._vars:
            raise ValueError(f"duplicate variable {name}")
        idx = np.arange(self._n, self._n + n)
        self._n += n
        self._vars[name] = idx
        s = np.broadcast_to(np.asarray(scale, float), (n,)).copy()
        if np.any(s <= 0):
            raise ValueError("variable scales must be positive")
        self._scale.append(s)
        return Affine(n, [(idx, s.copy())])

    def eq(self, expr: Affine, label: str) -> None:
        """expr == 0."""
        self._eq.append((label, expr))

    def le(self, expr: Affine, label: str) -> None:
        """expr <= 0."""
        self._cones.append((NONNEG, label, [-expr]))

    def ge(self, expr: Affine, label: str) -> None:
        """expr >= 0."""
        self._cones.append((NONNEG, label, [expr]))

    def rsoc(self, v: Affine, w: Affine, u: Affine | Iterable[Affine], label: str) -> None:
        """||u||^2 <= v w with v, w >= 0."""
        us = [u] if isinstance(u, Affine) else list(u)
        self._cones.append((RSOC, label, [v, w, *us]))

    def soc(self, t: Affine, xs: Iterable[Affine], label: str) -> None:
        """||x|| <= t."""
        self._cones.append((SOC, label, [t, *xs]))

    def minimize(self, expr: Affine) -> None:
        self._obj.append(expr)

    def build(self, meta: dict | None = None) -> ConeProgram:
        n = self._n
        scale = np.concatenate(self._scale) if self._scale else np.zeros(0)

        c = np.zeros(n)
        const = 0.0
        for e in self._obj:
            for i, k in e.terms:
                np.add.at(c, i, k)
            const += float(e.const.sum())
        obj_scale = float(np.max(np.abs(c))) if np.any(c) else 1.0

        # equalities
        er, ec, ev, eb, labels = [], [], [], [], []
        row = 0
        for label, e in self._eq:
            r, cc, v = e.triplets(row)
            er.append(r); ec.append(cc); ev.append(v); eb.append(-e.const)
            labels.append((label, row, e.n))
            row += e.n
        p = row
        A = _csr(er, ec, ev, (p, n))
        bvec = np.concatenate(eb) if eb else np.zeros(0)
        eq_scale = _row_max(A, bvec)
        eq_scale[eq_scale == 0] = 1.0
        A = sp.diags(1.0 / eq_scale) @ A
        bvec = bvec / eq_scale

        # cones: s = h - G x equals the affine expression, so G = -coef, h = const
        gr, gc, gv, gh = [], [], [], []
        groups = []
        row = 0
        for kind, label, exprs in self._cones:
            cnt, d = exprs[0].n, len(exprs)
            idx = row + np.arange(cnt)[:, None] * d + np.arange(d)[None, :]
            for j, e in enumerate(exprs):
                if e.n != cnt:
                    raise ValueError(f"cone {label}: component length mismatch")
                r, cc, v = e.triplets(0)
                gr.append(idx[r, j]); gc.append(cc); gv.append(-v)
            hvals = np.column_stack([e.const for e in exprs])
            gh.append(hvals.ravel())
            groups.append(ConeGroup(kind, label, idx))
            row += cnt * d
        m = row
        G = _csr(gr, gc, gv, (m, n))
        h = np.concatenate(gh) if gh else np.zeros(0)
        # one factor per cone so that cone membership is preserved
        rmax = _row_max(G, h)
        ineq_scale = np.ones(m)
        for g in groups:
            f = rmax[g.rows].max(axis=1)
            f[f == 0] = 1.0
            ineq_scale[g.rows] = f[:, None]
        G = sp.diags(1.0 / ineq_scale) @ G
        h = h / ineq_scale

        return ConeProgram(
            c=c / obj_scale, A=A.tocsr(), b=bvec, G=G.tocsr(), h=h, groups=tuple(groups),
            eq_labels=tuple(labels), variables=dict(self._vars), scale=scale,
            eq_scale=eq_scale, ineq_scale=ineq_scale, obj_scale=obj_scale, obj_const=const,
            meta=meta or {},
        )


def _csr(r, c, v, shape):
    if not r:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=shape)


def _row_max(M: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    """Largest absolute coefficient per row, falling back to |rhs| for empty rows."""
    if M.shape[0] == 0:
        return np.zeros(0)
    rm = abs(M).max(axis=1).toarray().ravel()
    zero = rm == 0
    rm[zero] = np.abs(rhs[zero])
    return rm
