"""Radial grids, quadrature, finite differences and pointwise seminorms.

The grid is cell-centred on a uniform inner block ``(0, r_inner]`` and
continues with geometrically growing spacing up to ``r_max``.  Because the
inner nodes sit at ``(j - 1/2) h`` their mirror images ``-r_j`` are exactly
the ghost nodes a centred stencil needs, so the origin closure for an
``m``-equivariant profile is a pure sign flip ``f(-r) = (-1)^m f(r)``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq


class ConfigurationError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


def fornberg_weights(z, x, order):
    """Finite-difference weights for derivatives 0..order at points ``z``.

    Vectorised form of Fornberg's recursion.  ``z`` has shape ``(n,)`` and
    ``x`` has shape ``(n, s)`` (one stencil per row).  Returns an array of
    shape ``(order + 1, n, s)``.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    n, s = x.shape
    c = np.zeros((order + 1, n, s))
    c1 = np.ones(n)
    c4 = x[:, 0] - z
    c[0, :, 0] = 1.0
    for i in range(1, s):
        mn = min(i, order)
        c2 = np.ones(n)
        c5 = c4
        c4 = x[:, i] - z
        for j in range(i):
            c3 = x[:, i] - x[:, j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, :, i] = c1 * (k * c[k - 1, :, i - 1] - c5 * c[k, :, i - 1]) / c2
                c[0, :, i] = -c1 * c5 * c[0, :, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, :, j] = (c4 * c[k, :, j] - k * c[k - 1, :, j]) / c3
            c[0, :, j] = c4 * c[0, :, j] / c3
        c1 = c2
    return c


# stencil widths per derivative order; all are fourth order on smooth grids
_STENCIL = {1: 5, 2: 5, 3: 7}


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite radial grid with quadrature and difference operators."""

    r_max: float
    n_inner: int
    n_outer: int
    r_inner: float
    nodes: np.ndarray = field(repr=False)
    ratio: float = 1.0
    fd_order: int = 4

    @property
    def n(self):
        return self.nodes.size

    @property
    def r(self):
        return self.nodes

    @property
    def h(self):
        return self.r_inner / self.n_inner

    def meta(self):
        return {
            "r_max": self.r_max,
            "n_inner": self.n_inner,
            "n_outer": self.n_outer,
            "r_inner": self.r_inner,
            "ratio": self.ratio,
            "fd_order": self.fd_order,
        }

    @cached_property
    def grid_hash(self):
        blob = json.dumps(self.meta(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def refined(self, factor=2):
        return build_grid(self.r_max, self.n_inner * factor, self.n_outer * factor, self.r_inner)

    def scaled(self, lam):
        """The same grid with every length multiplied by ``lam``."""
        return build_grid(self.r_max * lam, self.n_inner, self.n_outer, self.r_inner * lam)

    def check_same(self, other):
        if other is not self and (other.n != self.n or not np.array_equal(other.nodes, self.nodes)):
            raise GridMismatchError("fields live on different grids")

    # ------------------------------------------------------------------ quadrature
    @cached_property
    def _intervals(self):
        """Per-interval cubic interpolation weights.

        Interval 0 is ``[0, r_0]``; interval ``i`` is ``[r_{i-1}, r_i]``.
        Returns (stencil indices, line weights, r-weighted weights).
        """
        r = self.nodes
        n = r.size
        left = np.concatenate([[0.0], r[:-1]])
        right = r
        i = np.arange(n)
        start = np.clip(i - 2, 0, n - 4)
        idx = start[:, None] + np.arange(4)[None, :]
        xs = r[idx]
        gl_x, gl_w = np.polynomial.legendre.leggauss(4)
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        pts = mid[:, None] + half[:, None] * gl_x[None, :]
        # Lagrange basis values at the Gauss points: shape (n, 4 pts, 4 basis)
        basis = np.ones((n, 4, 4))
        for k in range(4):
            for l in range(4):
                if l == k:
                    continue
                basis[:, :, k] *= (pts - xs[:, l, None]) / (xs[:, k, None] - xs[:, l, None])
        wl = np.einsum("p,npk->nk", gl_w, basis) * half[:, None]
        wr = np.einsum("p,np,npk->nk", gl_w, pts, basis) * half[:, None]
        return idx, wl, wr

    @cached_property
    def quad_weights(self):
        """Weights for the integral of ``f(r) r dr`` over ``(0, r_max]``."""
        idx, _, wr = self._intervals
        return np.bincount(idx.ravel(), weights=wr.ravel(), minlength=self.n)

    @cached_property
    def line_weights(self):
        """Weights for the one-dimensional integral of ``f(r) dr``."""
        idx, wl, _ = self._intervals
        return np.bincount(idx.ravel(), weights=wl.ravel(), minlength=self.n)

    def cumulative(self, f, measure="r"):
        """Running integral ``int_0^{r_j} f`` (``measure`` is ``"r"`` or ``"line"``)."""
        idx, wl, wr = self._intervals
        w = wr if measure == "r" else wl
        f = np.asarray(f)
        return np.cumsum(np.einsum("nk,nk...->n...", w, f[idx]), axis=0)

    def cumulative_adjoint(self, g, measure="r"):
        """Transpose of :meth:`cumulative` as a linear map."""
        idx, wl, wr = self._intervals
        w = wr if measure == "r" else wl
        g = np.asarray(g)
        tail = np.cumsum(g[::-1], axis=0)[::-1]
        out = np.zeros(self.n, dtype=np.result_type(g, float))
        np.add.at(out, idx.ravel(), (w * tail[:, None]).ravel())
        return out

    def tail_integral(self, f, measure="r"):
        """``int_{r_j}^{r_max} f`` by the total-minus-prefix rule."""
        c = self.cumulative(f, measure)
        return c[-1] - c

    def integrate(self, f, measure="r"):
        w = self.quad_weights if measure == "r" else self.line_weights
        return np.tensordot(w, np.asarray(f), axes=(0, 0))

    def power_tail(self, f, measure="r"):
        """Analytic correction for ``int_{r_max}^inf f`` from a power-law fit.

        The fit uses the outer third of the radial range; it returns 0 when the tail does
        not look like a clean algebraic decay.
        """
        r = self.nodes
        sel = r >= r[-1] / 3.0
        g = np.abs(np.asarray(f, dtype=complex)[sel])
        if sel.sum() < 8 or np.any(g <= 0):
            return 0.0
        slope, intercept = np.polyfit(np.log(r[sel]), np.log(g), 1)
        p = -slope - (1.0 if measure == "r" else 0.0)
        if p <= 1.05:
            return 0.0
        # integrand g = f (line) or f r (r-measure) decays like (r/R)^(-p)
        g_end = np.asarray(f)[-1] * (r[-1] if measure == "r" else 1.0)
        return g_end * r[-1] / (p - 1.0)

    # ------------------------------------------------------------------ differences
    def _stencils(self, k, parity):
        r = self.nodes
        n = r.size
        s = _STENCIL[k]
        half = s // 2
        i = np.arange(n)
        start = np.minimum(i - half, n - s)
        idx = start[:, None] + np.arange(s)[None, :]
        ghost = idx < 0
        col = np.where(ghost, -idx - 1, idx)
        x = np.where(ghost, -r[col], r[col])
        sign = np.where(ghost, float(parity), 1.0)
        return col, x, sign

    def diff_matrix(self, k, m=0):
        """Sparse matrix of ``d^k/dr^k`` for ``m``-equivariant profiles."""
        if k == 0:
            return sp.identity(self.n, format="csr")
        if k not in _STENCIL:
            raise ValueError(f"derivative order {k} not supported (k <= 3)")
        return self._diff_cache(k, 1 if m % 2 == 0 else -1)

    def _diff_cache(self, k, parity):
        cache = self.__dict__.setdefault("_dcache", {})
        key = (k, parity)
        if key not in cache:
            col, x, sign = self._stencils(k, parity)
            w = fornberg_weights(self.nodes, x, k)[k] * sign
            rows = np.repeat(np.arange(self.n), col.shape[1])
            mat = sp.csr_matrix((w.ravel(), (rows, col.ravel())), shape=(self.n, self.n))
            mat.sum_duplicates()
            cache[key] = mat
        return cache[key]

    def diff(self, f, k=1, m=0):
        return self.diff_matrix(k, m) @ np.asarray(f)

    def evaluate(self, f, point, k=0, m=0, width=6):
        """Value of ``d^k f`` at an arbitrary ``point`` in ``[0, r_max]``.

        Uses a local Lagrange stencil of ``width`` nodes, closed at the origin
        by parity.
        """
        r = self.nodes
        f = np.asarray(f)
        parity = 1.0 if m % 2 == 0 else -1.0
        j = int(np.searchsorted(r, point))
        lo = j - width // 2
        lo = min(lo, r.size - width)
        idx = np.arange(lo, lo + width)
        ghost = idx < 0
        col = np.where(ghost, -idx - 1, idx)
        x = np.where(ghost, -r[col], r[col])
        vals = np.where(ghost, parity, 1.0) * f[col]
        w = fornberg_weights(np.array([point]), x[None, :], k)[k, 0]
        return complex(w @ vals) if np.iscomplexobj(vals) else float(w @ vals)

    def origin_value(self, f, m=0):
        return self.evaluate(f, 0.0, 0, m)

    def interpolate(self, f, points, m=0, kind="pchip"):
        """Interpolate a profile onto ``points``.

        ``kind="pchip"`` is piecewise cubic monotone; ``kind="lagrange"`` uses
        local six-point stencils (parity ghosts at the origin), which is what
        the parameter fits need.  Points beyond ``r_max`` give ``nan``.
        """
        if kind == "lagrange":
            return self._interp_lagrange(f, points, m)
        from scipy.interpolate import PchipInterpolator

        r = self.nodes
        parity = 1.0 if m % 2 == 0 else -1.0
        f = np.asarray(f)
        xs = np.concatenate([-r[:3][::-1], r])
        out = []
        parts = [f.real, f.imag] if np.iscomplexobj(f) else [f]
        for part in parts:
            ys = np.concatenate([parity * part[:3][::-1], part])
            # flat stretches give 0/0 slope weights inside scipy; the limit is handled there
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                out.append(PchipInterpolator(xs, ys, extrapolate=False)(points))
        res = out[0] + 1j * out[1] if len(out) == 2 else out[0]
        return res

    def _interp_lagrange(self, f, points, m=0, width=6):
        r = self.nodes
        f = np.asarray(f)
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        parity = 1.0 if m % 2 == 0 else -1.0
        j = np.searchsorted(r, pts)
        lo = np.minimum(j - width // 2, r.size - width)
        idx = lo[:, None] + np.arange(width)[None, :]
        ghost = idx < 0
        col = np.where(ghost, -idx - 1, idx)
        x = np.where(ghost, -r[col], r[col])
        w = fornberg_weights(pts, x, 0)[0]
        vals = np.where(ghost, parity, 1.0) * f[col]
        out = np.sum(w * vals, axis=1)
        bad = (pts > r[-1] * (1 + 1e-12)) | (pts < 0)
        if np.any(bad):
            out = out.astype(complex if np.iscomplexobj(out) else float)
            out[bad] = np.nan
        return out if np.ndim(points) else out[0]

    # ------------------------------------------------------------------ seminorms
    def seminorm(self, f, k, m=0):
        """Pointwise ``|f|_k``; negative ``k`` gives the inverse-weighted form."""
        if abs(k) > 3:
            raise ValueError("seminorm order must satisfy |k| <= 3")
        r = self.nodes
        f = np.asarray(f)
        if k >= 0:
            terms = [np.abs(f)] + [np.abs(r**l * self.diff(f, l, m)) for l in range(1, k + 1)]
        else:
            kk = -k
            terms = [np.abs(r ** (-l) * (self.diff(f, kk - l, m) if kk - l > 0 else f)) for l in range(kk + 1)]
        return np.max(terms, axis=0)


def _outer_ratio(h, n_outer, span):
    """Ratio ``q`` with ``h * sum_{k=1}^{n} q^k = span``."""
    if span <= h * n_outer:
        raise ConfigurationError("outer region too short for the inner spacing")

    def excess(q):
        return h * q * np.expm1(n_outer * np.log(q)) / (q - 1.0) - span

    q_hi = np.exp(min(600.0 / n_outer, np.log(2.0)))
    return brentq(excess, 1.0 + 1e-14, q_hi, xtol=1e-15, rtol=1e-15)


def build_grid(r_max=400.0, n_inner=4096, n_outer=4096, r_inner=10.0):
    """Build the composite grid.

    Inner nodes are ``(j - 1/2) h`` with ``h = r_inner / n_inner``.  Outer
    nodes continue with spacings ``h q, h q^2, ...`` so that the last node is
    exactly ``r_max``.
    """
    if not (r_max > r_inner > 0):
        raise ConfigurationError("need r_max > r_inner > 0")
    if n_inner < 16 or n_outer < 16:
        raise ConfigurationError("node counts must be >= 16")
    h = r_inner / n_inner
    inner = (np.arange(1, n_inner + 1) - 0.5) * h
    span = r_max - inner[-1]
    q = _outer_ratio(h, n_outer, span)
    steps = h * q ** np.arange(1, n_outer + 1)
    outer = inner[-1] + np.cumsum(steps)
    outer[-1] = r_max
    nodes = np.concatenate([inner, outer])
    return RadialGrid(float(r_max), int(n_inner), int(n_outer), float(r_inner), nodes, float(q))


@dataclass(frozen=True, eq=False)
class EquivariantField:
    """Complex radial profile of an ``m``-equivariant function on a grid."""

    grid: RadialGrid
    values: np.ndarray
    m: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n,):
            raise GridMismatchError("values must align with grid nodes")
        object.__setattr__(self, "values", vals)

    @property
    def r(self):
        return self.grid.nodes

    def with_values(self, values, m=None):
        return EquivariantField(self.grid, values, self.m if m is None else m)

    def origin_value(self):
        return self.grid.origin_value(self.values, self.m)

    def __add__(self, other):
        if isinstance(other, EquivariantField):
            self.grid.check_same(other.grid)
            other = other.values
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, EquivariantField):
            self.grid.check_same(other.grid)
            other = other.values
        return self.with_values(self.values - other)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, other):
        if isinstance(other, EquivariantField):
            raise TypeError("multiply by an array or scalar, not another field")
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / other)

    def to_csv(self, path, extra=None):
        header = {"m": self.m, "grid": self.grid.meta()}
        if extra:
            header.update(extra)
        vals = np.asarray(self.values, dtype=complex)
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write("r,re,im\n")
            for r, z in zip(self.grid.nodes, vals):
                fh.write(f"{r:.17g},{z.real:.17g},{z.imag:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline()[2:])
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        meta = header["grid"]
        grid = build_grid(meta["r_max"], meta["n_inner"], meta["n_outer"], meta["r_inner"])
        if not np.allclose(grid.nodes, data[:, 0], rtol=1e-15, atol=0):
            grid = RadialGrid(meta["r_max"], meta["n_inner"], meta["n_outer"], meta["r_inner"], data[:, 0], meta["ratio"])
        return cls(grid, data[:, 1] + 1j * data[:, 2], int(header["m"]))


def values_of(f):
    return f.values if isinstance(f, EquivariantField) else np.asarray(f)


def integrate_measure(f, grid=None):
    """``2 pi * int f(r) r dr`` over the grid (no tail beyond ``r_max``)."""
    if isinstance(f, EquivariantField):
        if grid is not None:
            grid.check_same(f.grid)
        grid = f.grid
    return 2.0 * np.pi * grid.integrate(values_of(f))


def inner_product_real(f, g, grid=None):
    """Real inner product ``int Re(conj(f) g)`` with the planar measure."""
    if isinstance(f, EquivariantField) and isinstance(g, EquivariantField):
        f.grid.check_same(g.grid)
    grid = grid or (f.grid if isinstance(f, EquivariantField) else g.grid)
    return float(2.0 * np.pi * grid.integrate(np.real(np.conj(values_of(f)) * values_of(g))))


def l2_norm(f, grid=None):
    return np.sqrt(max(inner_product_real(f, f, grid), 0.0))


def differentiate(f, k=1):
    if k > 3:
        raise ValueError("derivative order must be <= 3")
    return f.with_values(f.grid.diff(f.values, k, f.m))


def pointwise_seminorm(f, k):
    return f.grid.seminorm(f.values, k, f.m)
