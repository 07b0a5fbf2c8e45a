"""CSI generation, IRS phase application, and scene normalization.

Each of the K reflecting panels has M elements.  The panel's phase
vector theta (and fixed per-element gains beta, all 1 by default) form
the diagonal reflection matrix Theta = Diag(beta * e^{j theta}).  The
effective path coefficient seen by the radar is a function of the
triple (g, h, Theta); two forms are supported, see nlos_coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateDrawError

NLOS_FORMS = ("magnitude_squared", "complex")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def crandn(rng, *shape):
    """Circularly symmetric complex Gaussian, zero mean, unit variance."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z[()] * _INV_SQRT2


@dataclass(frozen=True)
class IrsPanel:
    """One reflecting panel: incident CSI g, departing CSI h, element phases."""

    g: np.ndarray  # complex, length M, radar -> panel
    h: np.ndarray  # complex, length M, panel -> target
    theta: np.ndarray = None  # real, length M, radians in [0, 2pi)
    beta: np.ndarray = None  # real, length M, gains in [0, 1], default all 1

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.g, dtype=complex))
        h = np.atleast_1d(np.asarray(self.h, dtype=complex))
        theta = (
            np.zeros(g.size) if self.theta is None
            else np.atleast_1d(np.asarray(self.theta, dtype=float))
        )
        beta = (
            np.ones(g.size) if self.beta is None
            else np.atleast_1d(np.asarray(self.beta, dtype=float))
        )
        if not (g.size == h.size == theta.size == beta.size >= 1):
            raise ValueError("g, h, theta, beta must share a common length M >= 1")
        if np.any(beta < 0) or np.any(beta > 1):
            raise ValueError("beta entries must lie in [0, 1]")
        theta = np.mod(theta, 2.0 * np.pi)
        for name, val in (("g", g), ("h", h), ("theta", theta), ("beta", beta)):
            object.__setattr__(self, name, val)

    @property
    def m(self) -> int:
        return self.g.size

    def phase_matrix(self) -> np.ndarray:
        """Theta = Diag(beta * e^{j theta})."""
        return np.diag(self.beta * np.exp(1j * self.theta))

    def c_vector(self) -> np.ndarray:
        """c = Diag(g)^H h, the per-element combining coefficients."""
        return np.conj(self.g) * self.h

    def with_theta(self, theta) -> "IrsPanel":
        return replace(self, theta=np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class ChannelRealization:
    """One normalized scene: direct path, panels, reflectivities, composed CSI."""

    h_los: complex  # direct-path gain after scaling
    panels: tuple  # K IrsPanel with phases already applied
    alpha: np.ndarray  # complex, length K, per-path reflectivities
    alpha_los: complex  # direct-path reflectivity
    nlos_csi: np.ndarray  # complex, length K, composed and scaled
    gamma: float  # requested direct-to-reflected power ratio

    @property
    def k(self) -> int:
        return len(self.panels)


def draw_csi(M: int, K: int, seed):
    """Draw raw (unnormalized) CSI and reflectivities.

    All entries are i.i.d. circularly symmetric complex Gaussian with
    unit variance.  Draw order is fixed: h_los, the K x M block of g,
    the K x M block of h, alpha, alpha_los.

    Returns
    -------
    (h_los, panels, alpha, alpha_los)
        panels is a tuple of K IrsPanel with theta = 0, beta = 1.
    """
    if M < 1 or K < 1:
        raise ValueError("M and K must be at least 1")
    rng = np.random.default_rng(seed)
    h_los = complex(crandn(rng))
    g = crandn(rng, K, M)
    h = crandn(rng, K, M)
    alpha = crandn(rng, K)
    alpha_los = complex(crandn(rng))
    panels = tuple(IrsPanel(g=g[k], h=h[k]) for k in range(K))
    return h_los, panels, alpha, alpha_los


def inner_product_form(panel: IrsPanel) -> complex:
    """h^H Theta g evaluated through the combining vector c.

    Uses h^H Theta g = c^H (beta * e^{j theta}) with c = Diag(g)^H h; the
    tests check this against the direct matrix product.
    """
    w = panel.beta * np.exp(1j * panel.theta)
    return complex(np.vdot(panel.c_vector(), w))


def compose_nlos_coefficient(panel: IrsPanel) -> complex:
    """|h^H Theta g|^2 as a complex scalar with zero imaginary part."""
    return complex(abs(inner_product_form(panel)) ** 2)


def nlos_coefficient(panel: IrsPanel, form: str = "magnitude_squared") -> complex:
    """Per-path coefficient under the selected composition form.

    "magnitude_squared" is the real nonnegative power form; "complex"
    keeps the phase of the cascaded channel.  Estimation quality under
    the two differs materially: squaring doubles the dynamic range of
    weak draws, so random-phase panels produce near-dead paths far more
    often.  The harness defaults to "complex" for that reason.
    """
    if form == "magnitude_squared":
        return compose_nlos_coefficient(panel)
    if form == "complex":
        return inner_product_form(panel)
    raise ValueError(f"unknown nlos form: {form!r}")


def normalize_scenario(h_los, panels, alpha, alpha_los, gamma,
                       nlos_form: str = "magnitude_squared") -> ChannelRealization:
    """Scale the scene so the two link powers hit their targets.

    The composed reflected CSI is scaled by a positive real factor so
    |alpha^T nlos_csi|^2 = 1, and the direct gain by a positive real
    factor so |alpha_los * h_los|^2 = gamma.  Phases are never touched.

    Raises
    ------
    DegenerateDrawError
        If either inner product is exactly zero before scaling (the
        caller is expected to redraw; see the harness resample loop).
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    raw = np.array([nlos_coefficient(p, nlos_form) for p in panels], dtype=complex)
    proj = complex(alpha @ raw)
    if proj == 0:
        raise DegenerateDrawError("alpha^T nlos_csi is exactly zero")
    if alpha_los * h_los == 0:
        raise DegenerateDrawError("alpha_los * h_los is exactly zero")
    nlos_csi = raw / abs(proj)
    h_los_scaled = complex(h_los * np.sqrt(gamma) / abs(alpha_los * h_los))
    return ChannelRealization(
        h_los=h_los_scaled,
        panels=tuple(panels),
        alpha=alpha,
        alpha_los=complex(alpha_los),
        nlos_csi=nlos_csi,
        gamma=float(gamma),
    )


def read_csi_file(path, K: int, M: int):
    """Load fixed panel CSI for replay.

    The file holds one "re,im" pair per line, K panels concatenated,
    each panel listing its M-entry g then its M-entry h: K*2*M lines
    total (blank lines and '#' comments skipped).
    """
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 're,im', got {text!r}")
            try:
                values.append(complex(float(parts[0]), float(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry {text!r}") from None
    expected = K * 2 * M
    if len(values) != expected:
        raise ValueError(
            f"{path}: expected {expected} entries (K={K}, M={M}), found {len(values)}"
        )
    flat = np.asarray(values, dtype=complex).reshape(K, 2, M)
    return tuple(IrsPanel(g=flat[k, 0], h=flat[k, 1]) for k in range(K))
