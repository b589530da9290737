"""Link functions for the outcome mean model.

Each link g maps the mean scale to the linear-predictor scale; models are
written as g(E[Y]) = eta, so the code below mostly needs the inverse link
and its first two derivatives with respect to eta.
"""

from __future__ import annotations

import enum

import numpy as np


class Link(enum.Enum):
    IDENTITY = "identity"
    LOG = "log"
    LOGIT = "logit"

    @classmethod
    def parse(cls, name: str) -> "Link":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown link {name!r}; expected one of "
                             f"{[m.value for m in cls]}") from None


def expit(eta):
    """Numerically stable inverse logit, elementwise."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def link_apply(link: Link, mu):
    """g(mu): mean scale -> linear predictor scale."""
    mu = np.asarray(mu, dtype=float)
    if link is Link.IDENTITY:
        return mu if mu.ndim else float(mu)
    if link is Link.LOG:
        return np.log(mu) if mu.ndim else float(np.log(mu))
    # logit, via log1p for stability near the boundaries
    val = np.log(mu) - np.log1p(-mu)
    return val if val.ndim else float(val)


def inverse(link: Link, eta):
    """g^{-1}(eta)."""
    eta = np.asarray(eta, dtype=float)
    if link is Link.IDENTITY:
        return eta if eta.ndim else float(eta)
    if link is Link.LOG:
        out = np.exp(eta)
        return out if out.ndim else float(out)
    return expit(eta)


def inverse_deriv(link: Link, eta):
    """d/d eta of g^{-1}(eta)."""
    eta = np.asarray(eta, dtype=float)
    if link is Link.IDENTITY:
        out = np.ones_like(eta)
    elif link is Link.LOG:
        out = np.exp(eta)
    else:
        p = expit(eta)
        out = p * (1.0 - p)
    return out if out.ndim else float(out)


def inverse_deriv2(link: Link, eta):
    """d^2/d eta^2 of g^{-1}(eta)."""
    eta = np.asarray(eta, dtype=float)
    if link is Link.IDENTITY:
        out = np.zeros_like(eta)
    elif link is Link.LOG:
        out = np.exp(eta)
    else:
        p = expit(eta)
        out = p * (1.0 - p) * (1.0 - 2.0 * p)
    return out if out.ndim else float(out)


def valid_mean(link: Link, theta: float) -> bool:
    """Whether a target mean is representable under the link."""
    if link is Link.LOGIT:
        return 0.0 < theta < 1.0
    if link is Link.LOG:
        return theta > 0.0
    return np.isfinite(theta)
