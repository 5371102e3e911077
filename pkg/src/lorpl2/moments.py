"""Moment providers mu_{i,j} = <x^i, y^j> for measures supported off the axes.

Four kinds: analytic product formulas, numerically integrated product
weights, discrete atomic measures, and JSON moment tables.  All providers
return mpmath values; they declare a square window max|i|,|j| inside which
every moment is guaranteed available.  The inner product of two monomials
x^a y^b and x^c y^d is mu_{a+c, b+d}, so Gram assembly only ever consults
the (i, j) map.
"""

import hashlib
import json
import math

import mpmath as mp
import numpy as np

from . import _precision as prec
from .errors import QuadratureError, TableFormatError, WindowExceededError

TABLE_FORMAT = "lorpl2-moments-v1"


class MomentProvider:
    """Base: window-checked access to mu_{i,j}."""

    kind = "abstract"

    def __init__(self, window):
        self.window = int(window)

    def moment(self, i, j):
        """mu_{i,j} as an mpf; raises WindowExceededError outside the window."""
        if abs(i) > self.window or abs(j) > self.window:
            raise WindowExceededError(i, j, self.window)
        return self._moment(int(i), int(j))

    def moment_float(self, i, j):
        return float(self.moment(i, j))

    def _moment(self, i, j):
        raise NotImplementedError

    def fingerprint(self):
        """Stable hash of the provider's window contents (float64 precision)."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        for i in range(-self.window, self.window + 1):
            for j in range(-self.window, self.window + 1):
                h.update(prec.float_str(self.moment(i, j)).encode())
        return h.hexdigest()[:16]


class ProductMomentProvider(MomentProvider):
    """Separable measure: mu_{i,j} = m_i^{(1)} * m_j^{(2)}.

    Univariate moment arrays are precomputed over the window at
    construction; they may come from analytic formulas or quadrature.
    """

    def __init__(self, mx, my, window, kind="product"):
        super().__init__(window)
        self.kind = kind
        self._mx = {k: prec.to_mp(v) for k, v in mx.items()}
        self._my = {k: prec.to_mp(v) for k, v in my.items()}

    def _moment(self, i, j):
        return self._mx[i] * self._my[j]

    def univariate(self, axis):
        """The univariate moment map m_k for the given axis (1 = x, 2 = y)."""
        return dict(self._mx if axis == 1 else self._my)


class AtomicMeasure:
    """Finite positive combination of point masses off the axes."""

    def __init__(self, atoms):
        seen = set()
        for x, y, w in atoms:
            if x == 0 or y == 0:
                raise ValueError(f"atom ({x},{y}) lies on a coordinate axis")
            if w <= 0:
                raise ValueError("atom weights must be strictly positive")
            if (x, y) in seen:
                raise ValueError(f"duplicate atom ({x},{y})")
            seen.add((x, y))
        self.atoms = [(prec.to_mp(x), prec.to_mp(y), prec.to_mp(w)) for x, y, w in atoms]

    def __len__(self):
        return len(self.atoms)


class AtomicMomentProvider(MomentProvider):
    """Exact finite sums sum_k w_k x_k^i y_k^j."""

    kind = "atomic"

    def __init__(self, measure, window):
        super().__init__(window)
        if not isinstance(measure, AtomicMeasure):
            measure = AtomicMeasure(measure)
        self.measure = measure

    def _moment(self, i, j):
        s = mp.mpf(0)
        for x, y, w in self.measure.atoms:
            s += w * x**i * y**j
        return s


class TableMomentProvider(MomentProvider):
    """Moments from an explicit (i, j) -> value map (file-loaded fixtures)."""

    kind = "table"

    def __init__(self, entries, window):
        super().__init__(window)
        self.entries = {(int(i), int(j)): prec.to_mp(v) for (i, j), v in entries.items()}
        for i in range(-self.window, self.window + 1):
            for j in range(-self.window, self.window + 1):
                if (i, j) not in self.entries:
                    raise TableFormatError(
                        f"entry ({i},{j}) missing inside declared window {self.window}"
                    )

    def _moment(self, i, j):
        return self.entries[(i, j)]


def gauss_legendre_nodes(n, a, b):
    """Gauss-Legendre nodes/weights on [a, b] (float64)."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return mid + half * x, half * w


def _integrate_adaptive(f, rel_tol, start=32, cap=4096):
    """Order-doubling Gauss-Legendre on a fixed smooth integrand.

    `f(n)` evaluates the rule at order n. Doubles until two successive
    estimates agree to rel_tol; raises QuadratureError past the node cap.
    """
    prev = f(start)
    n = start * 2
    while n <= cap:
        cur = f(n)
        if abs(cur - prev) <= rel_tol * (abs(cur) + 1e-300):
            return cur
        prev = cur
        n *= 2
    achieved = abs(cur - prev) / (abs(cur) + 1e-300)
    raise QuadratureError(
        f"quadrature did not reach rel_tol={rel_tol:g} (achieved {achieved:.2e})",
        achieved=achieved,
    )


def univariate_moments(weight, a, b, kmin, kmax, rel_tol=1e-12, singular=False):
    """Moments m_k = int_a^b x^k weight(x) dx for k = kmin..kmax.

    Requires 0 < a < b.  For weights with inverse-square-root endpoint
    singularities pass singular=True: under x = (a+b)/2 + ((b-a)/2) sin(theta)
    the Jacobian (b-a)/2 cos(theta) equals sqrt((b-x)(x-a)), so the
    transformed integrand is smooth and convergence is spectral (nodes stay
    interior, so the 0*inf product is evaluated stably).
    """
    if not (0 < a < b < math.inf):
        raise ValueError("interval must satisfy 0 < a < b < inf")
    out = {}
    half = (b - a) / 2.0

    for k in range(kmin, kmax + 1):
        if singular:

            def rule(n, k=k):
                theta, w = gauss_legendre_nodes(n, -math.pi / 2, math.pi / 2)
                x = (a + b) / 2.0 + half * np.sin(theta)
                vals = weight(x) * x**k * (half * np.cos(theta))
                return float(np.dot(w, vals))

        else:

            def rule(n, k=k):
                x, w = gauss_legendre_nodes(n, a, b)
                return float(np.dot(w, weight(x) * x**k))

        out[k] = _integrate_adaptive(rule, rel_tol)
    return out


# ---------------------------------------------------------------------------
# Weight catalogue (product measures on rectangles, plus the log-normal one)
# ---------------------------------------------------------------------------


def _w1(a, b):
    return lambda x: 1.0 / np.sqrt((b - x) * (x - a))


def _w2():
    return lambda x: 1.0 / np.sqrt(x)


def _w3(a, b, mu):
    return lambda x: ((b - x) * (x - a)) ** (mu - 0.5) / (
        (math.sqrt(b) - math.sqrt(a)) * x**mu
    )


def _w4(a, b):
    c = math.sqrt(a * b)
    return lambda x: x * (1.0 + c / x) ** 2 / np.sqrt((b - x) * (x - a))


def _w5(a, b):
    c = math.sqrt(a * b)
    return lambda x: 1.0 / ((x + c) * np.sqrt((b - x) * (x - a)))


def lebesgue_moments(a, b, kmin, kmax):
    """Exact mpf moments of dx on [a, b]."""
    am, bm = prec.to_mp(a), prec.to_mp(b)
    out = {}
    for k in range(kmin, kmax + 1):
        if k == -1:
            out[k] = mp.log(bm / am)
        else:
            out[k] = (bm ** (k + 1) - am ** (k + 1)) / (k + 1)
    return out


def w2_moments(a, b, kmin, kmax):
    """Exact mpf moments of x^{-1/2} dx on [a, b]."""
    am, bm = prec.to_mp(a), prec.to_mp(b)
    out = {}
    for k in range(kmin, kmax + 1):
        p = k + mp.mpf(1) / 2
        out[k] = (bm**p - am**p) / p
    return out


def w6_moments(kappa, kmin, kmax):
    """Exact moments of the log-normal-type weight on (0, inf).

    The substitution t = exp(2 kappa u) gives
    m_k = exp(kappa^2 k^2) + exp(kappa^2 (k+1)^2).
    """
    k2 = prec.to_mp(kappa) ** 2
    return {k: mp.e ** (k2 * k**2) + mp.e ** (k2 * (k + 1) ** 2) for k in range(kmin, kmax + 1)}


def univariate_weight_moments(name, a, b, kmin, kmax, rel_tol=1e-12, w3_mu=1.0, w6_kappa=1.0):
    """Moment map for one named weight on [a, b] (w6 ignores the interval)."""
    if name == "lebesgue":
        return lebesgue_moments(a, b, kmin, kmax)
    if name == "w1":
        return univariate_moments(_w1(a, b), a, b, kmin, kmax, rel_tol, singular=True)
    if name == "w2":
        return univariate_moments(_w2(), a, b, kmin, kmax, rel_tol)
    if name == "w3":
        if w3_mu <= -0.5:
            raise ValueError("w3 requires mu > -1/2")
        return univariate_moments(_w3(a, b, w3_mu), a, b, kmin, kmax, rel_tol, singular=True)
    if name == "w4":
        return univariate_moments(_w4(a, b), a, b, kmin, kmax, rel_tol, singular=True)
    if name == "w5":
        return univariate_moments(_w5(a, b), a, b, kmin, kmax, rel_tol, singular=True)
    if name == "w6":
        return w6_moments(w6_kappa, kmin, kmax)
    raise ValueError(f"unknown weight {name!r}")


def product_provider(name_x, name_y, rect, window, rel_tol=1e-12, w3_mu=1.0, w6_kappa=1.0):
    """Product-measure provider for two named weights on a rectangle."""
    a, b, c, d = rect
    mx = univariate_weight_moments(name_x, a, b, -window, window, rel_tol, w3_mu, w6_kappa)
    my = univariate_weight_moments(name_y, c, d, -window, window, rel_tol, w3_mu, w6_kappa)
    kind = f"product:{name_x}*{name_y}"
    return ProductMomentProvider(mx, my, window, kind=kind)


def lebesgue_provider(rect, window):
    """Exact Lebesgue product provider on [a,b] x [c,d]."""
    a, b, c, d = rect
    mx = lebesgue_moments(a, b, -window, window)
    my = lebesgue_moments(c, d, -window, window)
    return ProductMomentProvider(mx, my, window, kind="product:lebesgue")


# ---------------------------------------------------------------------------
# Moment table files
# ---------------------------------------------------------------------------


def save_table(provider, path, window=None):
    """Write the provider's window as a lorpl2-moments-v1 JSON table.

    Values are stored as shortest round-trip decimal strings of their
    float64 rounding, so identical configs produce byte-identical files.
    """
    w = provider.window if window is None else int(window)
    if w > provider.window:
        raise WindowExceededError(w, w, provider.window)
    entries = []
    for i in range(-w, w + 1):
        for j in range(-w, w + 1):
            entries.append({"i": i, "j": j, "value": prec.float_str(provider.moment(i, j))})
    doc = {"format": TABLE_FORMAT, "window": w, "entries": entries}
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_table(path):
    """Load a lorpl2-moments-v1 JSON table into a TableMomentProvider."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise TableFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != TABLE_FORMAT:
        raise TableFormatError(f"missing or wrong format tag (expected {TABLE_FORMAT})")
    if "window" not in doc or "entries" not in doc:
        raise TableFormatError("table requires 'window' and 'entries'")
    try:
        window = int(doc["window"])
        entries = {}
        for e in doc["entries"]:
            entries[(int(e["i"]), int(e["j"]))] = mp.mpf(e["value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TableFormatError(f"malformed entry: {exc}") from exc
    return TableMomentProvider(entries, window)
