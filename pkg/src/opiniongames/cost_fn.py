"""
Differentiable convex cost functions and the (lambda, kappa, p)-suitability calculus.

A cost function is a small expression tree of scalar-valued nodes.  Every node
knows its input dimension, how to evaluate itself and its gradient, and how to
serialize itself to a plain ``{"kind": ...}`` record.

Suitability of ``f`` for ``(lam, kappa, p)`` means

    grad f(a) . (b - a) / p  <=  lam * f(b) - kappa * f(a)    for all a, b.

Only catalogued base functions carry analytic certificates; everything else is
either derived from those by composition rules or checked by sampling, which
can only falsify.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize

log = logging.getLogger(__name__)

LIMIT_RATIO = 2.0 / (math.e * math.log(2.0))


class DimensionError(ValueError):
    """Input vector or matrix has the wrong shape."""


class GradientUndefined(ArithmeticError):
    """The gradient does not exist at the requested point."""


class CertificateError(ValueError):
    """A composition rule's preconditions are not met."""


class SearchError(RuntimeError):
    """min_ratio_search found no feasible ratio inside the bracket."""


def _vec(v, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1 or v.shape[0] != dim:
        raise DimensionError(f"expected vector of length {dim}, got shape {v.shape}")
    return v


def _mat(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# expression tree
# ---------------------------------------------------------------------------


class CostFunction:
    """Base class for scalar-valued cost nodes.

    Subclasses implement ``_eval`` and ``_grad`` on an already validated vector.
    """

    kind = "abstract"
    d_in: int

    #: convex on all of R^d_in (guaranteed by construction, not detected)
    convex = True
    #: nonnegative on all of R^d_in
    nonneg = True

    def __call__(self, v) -> float:
        return self.eval(v)

    def eval(self, v) -> float:
        return float(self._eval(_vec(v, self.d_in)))

    def grad(self, v) -> np.ndarray:
        return self._grad(_vec(v, self.d_in))

    def _eval(self, v: np.ndarray) -> float:
        raise NotImplementedError

    def _grad(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_grad(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        """Value and gradient together; nodes override this to share work."""
        return self._eval(v), self._grad(v)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, CostFunction) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"

    def __add__(self, other: "CostFunction") -> "Sum":
        return Sum([self, other])

    def __rmul__(self, w: float) -> "Scale":
        return Scale(w, self)

    def precompose(self, A, v0=None) -> "AffinePre":
        return AffinePre(A, v0, self)


def structurally_equal(f: CostFunction, g: CostFunction) -> bool:
    return f.to_dict() == g.to_dict()


class QuadraticForm(CostFunction):
    """``v -> ||M v||^2`` with the Euclidean norm."""

    kind = "quadratic_form"

    def __init__(self, M):
        self.M = _mat(M)
        self.d_in = self.M.shape[1]

    def _eval(self, v):
        u = self.M @ v
        return u @ u

    def _grad(self, v):
        return 2.0 * (self.M.T @ (self.M @ v))

    def _eval_grad(self, v):
        u = self.M @ v
        return u @ u, 2.0 * (self.M.T @ u)

    def to_dict(self):
        return {"kind": self.kind, "M": self.M.tolist()}


class PowerNorm(CostFunction):
    """``v -> ||v||_p ** alpha`` for alpha > 1 and 1 < p < inf."""

    kind = "power_norm"

    def __init__(self, alpha: float, p_norm: float = 2.0, dim: int = 1):
        if not alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {alpha}")
        if not (1 < p_norm < math.inf):
            raise ValueError(f"p_norm must lie in (1, inf), got {p_norm}")
        self.alpha = float(alpha)
        self.p_norm = float(p_norm)
        self.d_in = int(dim)

    def _eval(self, v):
        return np.linalg.norm(v, self.p_norm) ** self.alpha

    def _grad(self, v):
        r = np.linalg.norm(v, self.p_norm)
        if r == 0.0:
            if self.alpha >= 2:
                return np.zeros_like(v)
            raise GradientUndefined(f"||v||^{self.alpha} has no gradient at the origin")
        p = self.p_norm
        return self.alpha * r ** (self.alpha - p) * np.sign(v) * np.abs(v) ** (p - 1)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "p_norm": self.p_norm, "dim": self.d_in}


class Norm(CostFunction):
    """``v -> ||v||_p``; differentiable everywhere except the origin.

    Used as the inner argument of a norm composition such as ``cosh(||v||)``.
    """

    kind = "norm"

    def __init__(self, p_norm: float = 2.0, dim: int = 1):
        if not (1 < p_norm < math.inf):
            raise ValueError(f"p_norm must lie in (1, inf), got {p_norm}")
        self.p_norm = float(p_norm)
        self.d_in = int(dim)

    def _eval(self, v):
        return np.linalg.norm(v, self.p_norm)

    def _grad(self, v):
        r = np.linalg.norm(v, self.p_norm)
        if r == 0.0:
            raise GradientUndefined("a norm has no gradient at the origin")
        p = self.p_norm
        return np.sign(v) * (np.abs(v) / r) ** (p - 1)

    def to_dict(self):
        return {"kind": self.kind, "p_norm": self.p_norm, "dim": self.d_in}


class Linear(CostFunction):
    """Affine scalar map ``v -> c . v + c0``; only meaningful as an inner node."""

    kind = "linear"
    nonneg = False

    def __init__(self, c, c0: float = 0.0):
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        if self.c.ndim != 1:
            raise DimensionError("linear coefficients must be a vector")
        self.c0 = float(c0)
        self.d_in = self.c.shape[0]

    def _eval(self, v):
        return self.c @ v + self.c0

    def _grad(self, v):
        return self.c.copy()

    def to_dict(self):
        return {"kind": self.kind, "c": self.c.tolist(), "c0": self.c0}


def identity(dim: int = 1, k: int = 0) -> Linear:
    """Coordinate projection ``v -> v[k]``."""
    c = np.zeros(dim)
    c[k] = 1.0
    return Linear(c)


class _Outer(CostFunction):
    """Scalar outer function applied to an inner node."""

    def __init__(self, inner: CostFunction):
        self.inner = inner
        self.d_in = inner.d_in

    def _outer(self, t):
        raise NotImplementedError

    def _outer_prime(self, t):
        raise NotImplementedError

    def _eval(self, v):
        return self._outer(self.inner._eval(v))

    def _grad(self, v):
        slope = self._outer_prime(self.inner._eval(v))
        try:
            g = self.inner._grad(v)
        except GradientUndefined:
            # continuous extension through a flat outer function
            if slope == 0.0:
                return np.zeros_like(v)
            raise
        return slope * g

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict()}


class ExpNode(_Outer):
    """``v -> exp(inner(v))``."""

    kind = "exp"

    def __init__(self, inner: CostFunction | None = None):
        super().__init__(identity() if inner is None else inner)
        self.convex = self.inner.convex

    def _outer(self, t):
        return math.exp(t)

    _outer_prime = _outer


class CoshNode(_Outer):
    """``v -> cosh(inner(v))``."""

    kind = "cosh"

    def __init__(self, inner: CostFunction | None = None):
        super().__init__(identity() if inner is None else inner)
        inner = self.inner
        self.convex = isinstance(inner, Linear) or (inner.convex and inner.nonneg)

    def _outer(self, t):
        return math.cosh(t)

    def _outer_prime(self, t):
        return math.sinh(t)


class Scale(CostFunction):
    """``v -> w * f(v)`` with ``w >= 0``."""

    kind = "scale"

    def __init__(self, w: float, f: CostFunction):
        if not w >= 0:
            raise ValueError(f"scale weight must be nonnegative, got {w}")
        self.w = float(w)
        self.f = f
        self.d_in = f.d_in
        self.convex = f.convex
        self.nonneg = f.nonneg

    def _eval(self, v):
        return self.w * self.f._eval(v)

    def _grad(self, v):
        if self.w == 0.0:
            return np.zeros_like(v)
        return self.w * self.f._grad(v)

    def _eval_grad(self, v):
        val, g = self.f._eval_grad(v)
        return self.w * val, self.w * g

    def to_dict(self):
        return {"kind": self.kind, "w": self.w, "f": self.f.to_dict()}


class Sum(CostFunction):
    """Sum of one or more terms sharing an input dimension."""

    kind = "sum"

    def __init__(self, terms: Sequence[CostFunction]):
        terms = list(terms)
        if not terms:
            raise ValueError("Sum needs at least one term")
        dims = {t.d_in for t in terms}
        if len(dims) != 1:
            raise DimensionError(f"Sum terms disagree on input dimension: {sorted(dims)}")
        self.terms = terms
        self.d_in = terms[0].d_in
        self.convex = all(t.convex for t in terms)
        self.nonneg = all(t.nonneg for t in terms)

    def _eval(self, v):
        return math.fsum(t._eval(v) for t in self.terms)

    def _grad(self, v):
        return np.sum([t._grad(v) for t in self.terms], axis=0)

    def _eval_grad(self, v):
        vals, g = [], np.zeros(self.d_in)
        for t in self.terms:
            tv, tg = t._eval_grad(v)
            vals.append(tv)
            g += tg
        return math.fsum(vals), g

    def to_dict(self):
        return {"kind": self.kind, "terms": [t.to_dict() for t in self.terms]}


class AffinePre(CostFunction):
    """``z -> f(A z + v0)``."""

    kind = "affine"

    def __init__(self, A, v0, f: CostFunction):
        self.A = _mat(A)
        if self.A.shape[0] != f.d_in:
            raise DimensionError(
                f"affine map outputs {self.A.shape[0]} entries but f expects {f.d_in}"
            )
        self.v0 = np.zeros(f.d_in) if v0 is None else _vec(v0, f.d_in)
        self.f = f
        self.d_in = self.A.shape[1]
        self.convex = f.convex
        self.nonneg = f.nonneg

    def _eval(self, v):
        return self.f._eval(self.A @ v + self.v0)

    def _grad(self, v):
        return self.A.T @ self.f._grad(self.A @ v + self.v0)

    def _eval_grad(self, v):
        val, g = self.f._eval_grad(self.A @ v + self.v0)
        return val, self.A.T @ g

    def to_dict(self):
        return {
            "kind": self.kind,
            "A": self.A.tolist(),
            "v0": self.v0.tolist(),
            "f": self.f.to_dict(),
        }


class CrossQuartic(CostFunction):
    """``(x, y) -> (1 - x)^2 y^2 + x^2 (1 - y)^2``.

    Nonnegative but not convex; exists to encode the unbounded-PoA example.
    """

    kind = "cross_quartic"
    convex = False
    d_in = 2

    def _eval(self, v):
        x, y = v
        return (1 - x) ** 2 * y**2 + x**2 * (1 - y) ** 2

    def _grad(self, v):
        x, y = v
        return np.array(
            [
                -2 * (1 - x) * y**2 + 2 * x * (1 - y) ** 2,
                2 * (1 - x) ** 2 * y - 2 * x**2 * (1 - y),
            ]
        )

    def to_dict(self):
        return {"kind": self.kind}


def from_dict(rec: dict) -> CostFunction:
    """Inverse of ``CostFunction.to_dict``."""
    kind = rec["kind"]
    if kind == "quadratic_form":
        return QuadraticForm(rec["M"])
    if kind == "power_norm":
        return PowerNorm(rec["alpha"], rec.get("p_norm", 2.0), rec.get("dim", 1))
    if kind == "norm":
        return Norm(rec.get("p_norm", 2.0), rec.get("dim", 1))
    if kind == "linear":
        return Linear(rec["c"], rec.get("c0", 0.0))
    if kind == "exp":
        return ExpNode(from_dict(rec["inner"]))
    if kind == "cosh":
        return CoshNode(from_dict(rec["inner"]))
    if kind == "scale":
        return Scale(rec["w"], from_dict(rec["f"]))
    if kind == "sum":
        return Sum([from_dict(t) for t in rec["terms"]])
    if kind == "affine":
        return AffinePre(rec["A"], rec.get("v0"), from_dict(rec["f"]))
    if kind == "cross_quartic":
        return CrossQuartic()
    raise ValueError(f"unknown cost function kind {kind!r}")


def eval(f: CostFunction, v) -> float:  # noqa: A001 - mirrors the operation name
    return f.eval(v)


def grad(f: CostFunction, v) -> np.ndarray:
    return f.grad(v)


def walk(f: CostFunction) -> Iterable[CostFunction]:
    yield f
    for attr in ("inner", "f"):
        child = getattr(f, attr, None)
        if isinstance(child, CostFunction):
            yield from walk(child)
    for t in getattr(f, "terms", ()):
        yield from walk(t)


# ---------------------------------------------------------------------------
# zeta
# ---------------------------------------------------------------------------


def zeta(alpha: float) -> float:
    """Worst-case price of anarchy of ``||z||^alpha``.

    ((a-1)^(a-1) / a^a) * (2^q - 1)^a / (2^q - 2) with q = a / (a - 1),
    assembled in log space so that alpha close to 1 does not overflow.
    """
    a = float(alpha)
    if not a > 1:
        raise ValueError(f"zeta needs alpha > 1, got {alpha}")
    ln2 = math.log(2.0)
    # 2^q = 2 e^t with t = ln2 / (a - 1), so 2^q - 2 = 2 expm1(t) and 2^q - 1 = 1 + 2 expm1(t)
    t = ln2 / (a - 1.0)
    if t > 1.0:
        log_num = ln2 + t + math.log1p(-0.5 * math.exp(-t))
        log_den = ln2 + t + math.log1p(-math.exp(-t))
    else:
        em1 = math.expm1(t)
        log_num = math.log1p(2.0 * em1)
        log_den = ln2 + math.log(em1)
    # (a-1) log(a-1) - a log a, written without the large cancelling terms
    terms = [(a - 1.0) * math.log1p(-1.0 / a), -math.log(a), a * log_num, -log_den]
    return math.exp(math.fsum(terms))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuitabilityCertificate:
    """Claim that a function is (lam, kappa, p)-suitable for every p in p_set.

    ``provenance`` is ``"analytic"``, ``"searched"`` or ``"propagated"``.
    ``detail`` describes the sample set or rule and ``parents`` holds the
    certificates a propagated claim was derived from.
    """

    lam: float
    kappa: float
    p_set: frozenset = frozenset({1, 2})
    provenance: str = "analytic"
    detail: str = ""
    parents: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.lam > 0 and self.kappa > 0):
            raise ValueError("lambda and kappa must be positive")
        if not self.p_set or not set(self.p_set) <= {1, 2}:
            raise ValueError("p_set must be a nonempty subset of {1, 2}")
        object.__setattr__(self, "p_set", frozenset(self.p_set))

    @property
    def ratio(self) -> float:
        return self.lam / self.kappa

    def same_constants(self, other: "SuitabilityCertificate", tol: float = 0.0) -> bool:
        return (
            abs(self.lam - other.lam) <= tol
            and abs(self.kappa - other.kappa) <= tol
            and self.p_set == other.p_set
        )

    def implies(self, lam: float, kappa: float, p: int) -> bool:
        """For nonnegative f, raising lambda or lowering kappa keeps suitability."""
        return p in self.p_set and lam >= self.lam and kappa <= self.kappa


def _square_certificate() -> SuitabilityCertificate:
    # binding discriminants: 4 lam (1 - kappa) = 1 (p=2), lam (2 - kappa) = 1 (p=1)
    return SuitabilityCertificate(0.75, 2.0 / 3.0, provenance="analytic", detail="square")


def _exp_certificate() -> SuitabilityCertificate:
    return SuitabilityCertificate(
        2.0 / math.e, math.log(2.0), provenance="analytic", detail="exp"
    )


def power_binding_pair(alpha: float) -> tuple[float, float]:
    """Exact minimizing (lam, kappa) for |x|^alpha.

    By homogeneity the p-constraint depends only on r = b / a, and its tightest
    instance sits at r_p = (p lam)^(-1/(alpha-1)), which gives the largest
    admissible kappa_p(lam) in closed form.  The optimal ratio is where the
    p = 1 and p = 2 envelopes cross.
    """
    a = float(alpha)

    def kappa_p(lam, p):
        r = (p * lam) ** (-1.0 / (a - 1.0))
        return lam * r**a - a * (r - 1.0) / p

    def gap(loglam):
        lam = math.exp(loglam)
        return kappa_p(lam, 1) - kappa_p(lam, 2)

    grid = np.linspace(-8.0, 8.0, 641)
    vals = [gap(t) for t in grid]
    best = None
    for t0, t1, g0, g1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if g0 == 0 or g0 * g1 < 0:
            root = optimize.brentq(gap, t0, t1, xtol=1e-15, rtol=1e-15)
            lam = math.exp(root)
            kap = min(kappa_p(lam, 1), kappa_p(lam, 2))
            if kap > 0 and (best is None or lam / kap < best[0] / best[1]):
                best = (lam, kap)
    if best is None:
        raise SearchError(f"no binding pair found for alpha={alpha}")
    return best


def certify_base(kind: str, alpha: float | None = None, *, samples=None, tol: float = 5e-3,
                 seed: int = 0) -> SuitabilityCertificate:
    """Certificate for a catalogued base function.

    ``kind`` is ``"exp"``, ``"square"`` or ``"power"`` (which needs ``alpha``).
    The power case is searched: the sampled minimum ratio must agree with
    ``zeta(alpha)`` within ``tol`` before a certificate is issued.
    """
    if kind == "exp":
        return _exp_certificate()
    if kind == "square":
        return _square_certificate()
    if kind == "power":
        if alpha is None:
            raise ValueError("power certificate needs alpha")
        if alpha == 2:
            return _square_certificate()
        return _power_certificate(float(alpha), samples or SamplingSpec(), tol, seed)
    raise ValueError(f"unsupported base function {kind!r}")


@functools.lru_cache(maxsize=64)
def _power_certificate(alpha: float, spec: "SamplingSpec", tol: float, seed: int):
    h = PowerNorm(alpha, 2.0, 1)
    found = min_ratio_search(h, spec, tol=1e-6, seed=seed)
    target = zeta(alpha)
    if abs(found.ratio - target) > tol:
        raise SearchError(
            f"searched ratio {found.ratio:.6f} for |x|^{alpha} is not within {tol} of "
            f"zeta={target:.6f}"
        )
    lam, kap = power_binding_pair(alpha)
    return SuitabilityCertificate(
        lam, kap, provenance="searched",
        detail=f"power({alpha}); {spec.describe()}; tol={tol}",
    )


# composition rule preconditions --------------------------------------------

_NONDECREASING_EVERYWHERE = {"exp"}
_NONDECREASING_ON_NONNEG = {"exp", "square", "power", "cosh"}
_FLAT_AT_ZERO = {"square", "power", "cosh"}


def _is_differentiable(f: CostFunction) -> bool:
    return not any(isinstance(n, Norm) for n in walk(f)) and not any(
        isinstance(n, PowerNorm) and n.alpha < 2 for n in walk(f)
    )


def propagate_certificate(cert, rule: str, **params) -> SuitabilityCertificate:
    """Carry a certificate through one composition rule.

    Rules and their parameters:

    ``scale``           w >= 0
    ``sum``             ``cert`` is a sequence of certificates; optional weights >= 0
    ``affine_pre``      A (matrix), optional v0
    ``convex_compose``  outer (base kind of ``cert``), inner (CostFunction)
    ``norm_compose``    outer (base kind of ``cert``), p_norm in (1, inf)

    The constants never change; only the provenance does.
    """
    parents = tuple(cert) if rule == "sum" else (cert,)
    base = parents[0]

    if rule == "scale":
        if not params.get("w", 1.0) >= 0:
            raise CertificateError("scale weight must be nonnegative")
    elif rule == "sum":
        weights = params.get("weights", [1.0] * len(parents))
        if len(weights) != len(parents) or any(not w >= 0 for w in weights):
            raise CertificateError("sum weights must be nonnegative, one per term")
        if any(not c.same_constants(base) for c in parents[1:]):
            raise CertificateError("sum terms do not share (lambda, kappa, p_set)")
    elif rule == "affine_pre":
        A = params.get("A")
        if A is not None:
            _mat(A)
    elif rule == "convex_compose":
        outer = params.get("outer")
        inner = params.get("inner")
        if not isinstance(inner, CostFunction):
            raise CertificateError("convex_compose needs an inner CostFunction")
        if not inner.convex:
            raise CertificateError("inner function is not convex")
        if not _is_differentiable(inner):
            raise CertificateError("inner function is not differentiable everywhere")
        if outer in _NONDECREASING_EVERYWHERE:
            pass
        elif outer in _NONDECREASING_ON_NONNEG and inner.nonneg:
            pass
        else:
            raise CertificateError(f"outer {outer!r} is not nondecreasing on the inner range")
    elif rule == "norm_compose":
        outer = params.get("outer")
        p_norm = params.get("p_norm", 2.0)
        if not (1 < p_norm < math.inf):
            raise CertificateError("norm must be differentiable off the origin (1 < p < inf)")
        if outer not in _FLAT_AT_ZERO:
            raise CertificateError(f"outer {outer!r} does not satisfy f'(0) = 0, f' >= 0 on [0, inf)")
    else:
        raise CertificateError(f"unknown composition rule {rule!r}")

    return SuitabilityCertificate(
        base.lam, base.kappa, base.p_set, provenance="propagated", detail=rule, parents=parents
    )


def relax_certificate(cert: SuitabilityCertificate, lam: float, kappa: float,
                      p_set=None) -> SuitabilityCertificate:
    """Weaken a certificate to a larger lambda and smaller kappa.

    For nonnegative f the right-hand side lam f(b) - kappa f(a) can only grow.
    """
    p_set = cert.p_set if p_set is None else frozenset(p_set)
    if not (lam >= cert.lam and kappa <= cert.kappa and p_set <= cert.p_set):
        raise CertificateError("relaxation must not tighten the constants")
    return SuitabilityCertificate(lam, kappa, p_set, provenance="propagated",
                                  detail="relax", parents=(cert,))


def _cosh_certificate() -> SuitabilityCertificate:
    e = _exp_certificate()
    e_neg = propagate_certificate(e, "affine_pre", A=[[-1.0]])
    return propagate_certificate([e, e_neg], "sum", weights=[0.5, 0.5])


def certify(f: CostFunction) -> SuitabilityCertificate | None:
    """Derive a certificate for a catalogued tree, or None if no rule applies."""
    if isinstance(f, QuadraticForm):
        c = propagate_certificate(_square_certificate(), "norm_compose", outer="square", p_norm=2.0)
        return propagate_certificate(c, "affine_pre", A=f.M)
    if isinstance(f, PowerNorm):
        base = certify_base("power", f.alpha)
        outer = "square" if f.alpha == 2 else "power"
        return propagate_certificate(base, "norm_compose", outer=outer, p_norm=f.p_norm)
    if isinstance(f, ExpNode):
        if isinstance(f.inner, Linear):
            return propagate_certificate(_exp_certificate(), "affine_pre", A=f.inner.c[None, :])
        try:
            return propagate_certificate(_exp_certificate(), "convex_compose",
                                         outer="exp", inner=f.inner)
        except CertificateError:
            return None
    if isinstance(f, CoshNode):
        cc = _cosh_certificate()
        if isinstance(f.inner, Linear):
            return propagate_certificate(cc, "affine_pre", A=f.inner.c[None, :])
        if isinstance(f.inner, Norm):
            return propagate_certificate(cc, "norm_compose", outer="cosh", p_norm=f.inner.p_norm)
        try:
            return propagate_certificate(cc, "convex_compose", outer="cosh", inner=f.inner)
        except CertificateError:
            return None
    if isinstance(f, Scale):
        c = certify(f.f)
        return None if c is None else propagate_certificate(c, "scale", w=f.w)
    if isinstance(f, AffinePre):
        c = certify(f.f)
        return None if c is None else propagate_certificate(c, "affine_pre", A=f.A, v0=f.v0)
    if isinstance(f, Sum):
        certs = [certify(t) for t in f.terms]
        if any(c is None for c in certs):
            return None
        if any(not c.same_constants(certs[0]) for c in certs[1:]):
            lam = max(c.lam for c in certs)
            kappa = min(c.kappa for c in certs)
            p_set = frozenset.intersection(*(c.p_set for c in certs))
            if not p_set:
                return None
            certs = [relax_certificate(c, lam, kappa, p_set) for c in certs]
        try:
            return propagate_certificate(certs, "sum")
        except CertificateError:
            return None
    return None


# ---------------------------------------------------------------------------
# sampling, verification and ratio search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingSpec:
    """Uniform pairs in ``[-box, box]^d`` plus the deterministic pairs
    (0, e_k), (e_k, 0), (e_k, -e_k) for every coordinate k."""

    n: int = 10_000
    box: float = 10.0
    deterministic: bool = True

    def describe(self) -> str:
        return f"{self.n} uniform pairs on [-{self.box}, {self.box}]^d"

    def pairs(self, dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        a = rng.uniform(-self.box, self.box, size=(self.n, dim))
        b = rng.uniform(-self.box, self.box, size=(self.n, dim))
        if self.deterministic:
            eye = np.eye(dim)
            zero = np.zeros((dim, dim))
            a = np.vstack([zero, eye, eye, a])
            b = np.vstack([eye, zero, -eye, b])
        return a, b


@dataclass
class SuitabilityReport:
    passed: bool
    lam: float
    kappa: float
    p: float
    n_checked: int
    worst_margin: float
    counterexample: tuple | None = None
    violation: float = 0.0
    skipped: int = 0

    def __bool__(self):
        return self.passed


def _constraint_terms(f, a, b, p):
    """Rows of (grad f(a).(b - a) / p, f(a), f(b)); pairs with undefined gradients dropped."""
    lhs, fa, fb, keep = [], [], [], []
    for k in range(a.shape[0]):
        try:
            g = f._grad(a[k])
        except GradientUndefined:
            continue
        lhs.append(g @ (b[k] - a[k]) / p)
        fa.append(f._eval(a[k]))
        fb.append(f._eval(b[k]))
        keep.append(k)
    return np.array(lhs), np.array(fa), np.array(fb), np.array(keep, dtype=int)


def verify_suitability(f: CostFunction, lam: float, kappa: float, p: float,
                       samples: SamplingSpec | None = None, seed: int = 0,
                       rtol: float = 1e-9, atol: float = 1e-12) -> SuitabilityReport:
    """Search sampled pairs for a violation of the suitability inequality.

    Passing only means no counterexample was found.
    """
    if not (lam > 0 and kappa > 0):
        raise ValueError("lambda and kappa must be positive")
    samples = samples or SamplingSpec()
    rng = np.random.default_rng(seed)
    a, b = samples.pairs(f.d_in, rng)
    lhs, fa, fb, keep = _constraint_terms(f, a, b, p)
    skipped = a.shape[0] - keep.size
    # replace pairs dropped for an undefined gradient with fresh uniform draws
    tries = 0
    while keep.size < a.shape[0] and tries < 10:
        tries += 1
        need = a.shape[0] - keep.size
        log.info("resampling %d pairs with undefined gradient", need)
        a2 = rng.uniform(-samples.box, samples.box, size=(need, f.d_in))
        b2 = rng.uniform(-samples.box, samples.box, size=(need, f.d_in))
        l2, fa2, fb2, k2 = _constraint_terms(f, a2, b2, p)
        a = np.vstack([a[keep], a2[k2]])
        b = np.vstack([b[keep], b2[k2]])
        lhs = np.concatenate([lhs, l2])
        fa = np.concatenate([fa, fa2])
        fb = np.concatenate([fb, fb2])
        keep = np.arange(a.shape[0])
    rhs = lam * fb - kappa * fa
    margin = rhs - lhs
    slack = atol + rtol * (np.abs(lhs) + lam * np.abs(fb) + kappa * np.abs(fa))
    bad = margin < -slack
    report = SuitabilityReport(
        passed=not bad.any(), lam=lam, kappa=kappa, p=p, n_checked=int(margin.size),
        worst_margin=float(margin.min()) if margin.size else math.inf, skipped=int(skipped),
    )
    if bad.any():
        k = int(np.argmin(np.where(bad, margin, np.inf)))
        report.counterexample = (a[k].copy(), b[k].copy())
        report.violation = float(-margin[k])
    return report


@dataclass
class RatioSearchResult:
    lam: float
    kappa: float
    ratio: float
    n_constraints: int


def _kappa_interval(gamma, lhs, fa, fb):
    e = gamma * fb - fa
    lo, hi = 0.0, math.inf
    pos, neg, flat = e > 0, e < 0, e == 0
    if pos.any():
        lo = max(lo, float(np.max(lhs[pos] / e[pos])))
    if neg.any():
        hi = min(hi, float(np.min(lhs[neg] / e[neg])))
    if flat.any() and np.any(lhs[flat] > 0):
        hi = -math.inf
    return lo, hi


def min_ratio_search(f: CostFunction, samples: SamplingSpec | None = None, tol: float = 1e-6,
                     seed: int = 0, bracket: tuple[float, float] = (1.0, 4.0)) -> RatioSearchResult:
    """Smallest sampled-feasible lambda/kappa by bisection on gamma = lambda/kappa.

    With lambda = gamma * kappa each sampled constraint (p = 1 and p = 2) bounds
    kappa from one side, so gamma is feasible when the induced interval on
    kappa > 0 is nonempty.  Sampled constraints make this a lower estimate.
    For vector input, half the pairs are drawn along random rays.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    samples = samples or SamplingSpec()
    rng = np.random.default_rng(seed)
    a, b = samples.pairs(f.d_in, rng)
    if f.d_in > 1:
        half = samples.n // 2
        v = rng.normal(size=(half, f.d_in))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        s = rng.uniform(-samples.box, samples.box, size=(half, 1))
        t = rng.uniform(-samples.box, samples.box, size=(half, 1))
        a = np.vstack([a, s * v])
        b = np.vstack([b, t * v])
    rows = [_constraint_terms(f, a, b, p) for p in (1, 2)]
    lhs = np.concatenate([r[0] for r in rows])
    fa = np.concatenate([r[1] for r in rows])
    fb = np.concatenate([r[2] for r in rows])

    def feasible(g):
        lo, hi = _kappa_interval(g, lhs, fa, fb)
        return lo < hi, lo, hi

    g_lo, g_hi = bracket
    ok, lo, hi = feasible(g_hi)
    if not ok:
        raise SearchError(f"no feasible lambda/kappa in bracket {bracket}")
    ok_lo, lo_l, hi_l = feasible(g_lo)
    if ok_lo:
        g_hi, lo, hi = g_lo, lo_l, hi_l
    else:
        while g_hi - g_lo > tol:
            mid = 0.5 * (g_lo + g_hi)
            ok, l_m, h_m = feasible(mid)
            if ok:
                g_hi, lo, hi = mid, l_m, h_m
            else:
                g_lo = mid
    kappa = 0.5 * (lo + hi) if math.isfinite(hi) else max(2.0 * lo, 1.0)
    if kappa <= 0:
        kappa = hi / 2.0
    return RatioSearchResult(lam=g_hi * kappa, kappa=kappa, ratio=g_hi, n_constraints=int(lhs.size))


def finite_difference_grad(f: Callable[[np.ndarray], float], v, h: float = 1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = h
        out[k] = (f(v + e) - f(v - e)) / (2 * h)
    return out
