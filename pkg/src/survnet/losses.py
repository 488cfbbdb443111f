"""Negative log-likelihood losses for Cox and Weibull AFT survival models.

Both losses take model outputs as autodiff nodes so they can be
backpropagated into the network that produced them. Everything is computed on
the log scale: risk-set sums go through a max-shifted ``logsumexp`` and
Weibull powers are evaluated as ``exp(k * (log t - log scale))``.
"""

from __future__ import annotations

import enum

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .data import as_arrays
from .errors import DomainError, LengthMismatch, NoEvents, ShapeMismatch

REDUCTIONS = ("mean", "sum")


class TieMethod(str, enum.Enum):
    BRESLOW = "breslow"
    EFRON = "efron"


def _column(values, name: str) -> Node:
    node = values if isinstance(values, Node) else Node.constant(values)
    if node.shape[1] != 1:
        raise ShapeMismatch(f"{name} must have one column, got shape {node.shape}")
    return node


def _check_reduction(reduction: str) -> None:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")


def cox_neg_partial_log_likelihood(
    log_hz,
    event,
    time,
    ties: TieMethod | str = TieMethod.EFRON,
    reduction: str = "mean",
) -> Node:
    """Negative Cox partial log-likelihood of log relative hazards ``log_hz``.

    The risk set at an event time ``tau`` is every subject with
    ``time >= tau``. Tied event times are handled by the Breslow or Efron
    approximation. ``reduction="mean"`` divides by the number of events.
    """
    ties = TieMethod(ties)
    _check_reduction(reduction)
    eta = _column(log_hz, "log_hz")
    event, time = as_arrays(event, time)
    if eta.shape[0] != time.size:
        raise LengthMismatch(f"{eta.shape[0]} log hazards for {time.size} subjects")
    n_events = int(event.sum())
    if n_events == 0:
        raise NoEvents("Cox partial likelihood needs at least one event")

    tau, deaths = np.unique(time[event], return_counts=True)
    at_risk = time[None, :] >= tau[:, None]
    log_risk = ad.logsumexp(eta, at_risk)  # D x 1

    event_eta = ad.sum_(ad.gather(eta, np.flatnonzero(event)))
    if ties is TieMethod.BRESLOW:
        penalty = ad.sum_(ad.mul(log_risk, Node.constant(deaths.astype(float))))
    else:
        # log(R - (l/d) D) = log R + log(1 - (l/d) exp(log D - log R)), l = 0..d-1
        dies = (time[None, :] == tau[:, None]) & event[None, :]
        log_dead = ad.logsumexp(eta, dies)
        rows = np.repeat(np.arange(tau.size), deaths)
        frac = np.concatenate([np.arange(d) / d for d in deaths]).reshape(-1, 1)
        ratio = ad.exp(ad.gather(ad.sub(log_dead, log_risk), rows))
        correction = ad.log(ad.sub(1.0, ad.mul(Node.constant(frac), ratio)))
        penalty = ad.add(ad.sum_(ad.gather(log_risk, rows)), ad.sum_(correction))

    loss = ad.sub(penalty, event_eta)
    if reduction == "mean":
        loss = ad.mul(loss, 1.0 / n_events)
    return loss


def _weibull_columns(log_params) -> tuple[Node, Node | None]:
    params = log_params if isinstance(log_params, Node) else Node.constant(log_params)
    if params.shape[1] == 1:
        return params, None
    if params.shape[1] != 2:
        raise ShapeMismatch(f"Weibull parameters need 1 or 2 columns, got {params.shape[1]}")
    log_scale = ad.matmul(params, Node.constant([[1.0], [0.0]]))
    log_shape = ad.matmul(params, Node.constant([[0.0], [1.0]]))
    return log_scale, log_shape


def _log_times(time) -> np.ndarray:
    t = np.asarray(time, dtype=np.float64).ravel()
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and > 0")
    return np.log(t).reshape(-1, 1)


def weibull_neg_log_likelihood(log_params, event, time, reduction: str = "mean") -> Node:
    """Negative Weibull AFT log-likelihood.

    ``log_params`` is n x 2 (log scale, log shape) per subject, or n x 1
    (log scale only, shape fixed at 1, i.e. exponential). Each subject
    contributes ``event * log h(t) + log S(t)``.
    """
    _check_reduction(reduction)
    event, time = as_arrays(event, time)
    log_t = _log_times(time)
    log_scale, log_shape = _weibull_columns(log_params)
    if log_scale.shape[0] != time.size:
        raise LengthMismatch(f"{log_scale.shape[0]} parameter rows for {time.size} subjects")

    z = ad.sub(Node.constant(log_t), log_scale)  # log t - log scale
    if log_shape is None:
        log_hazard = ad.neg(log_scale)
        cum_hazard = ad.exp(z)
    else:
        shape = ad.exp(log_shape)
        log_hazard = ad.add(ad.sub(log_shape, log_scale), ad.mul(ad.sub(shape, 1.0), z))
        cum_hazard = ad.exp(ad.mul(shape, z))
    delta = Node.constant(event.astype(float).reshape(-1, 1))
    loglik = ad.sub(ad.mul(delta, log_hazard), cum_hazard)
    total = ad.neg(ad.sum_(loglik))
    if reduction == "mean":
        total = ad.mul(total, 1.0 / time.size)
    return total


def weibull_survival(log_params, eval_times) -> np.ndarray:
    """Survival probabilities ``exp(-(t / scale) ** shape)``, n x T."""
    values = log_params.value if isinstance(log_params, Node) else np.asarray(log_params, float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    log_t = _log_times(eval_times).ravel()
    log_scale = values[:, [0]]
    shape = np.exp(values[:, [1]]) if values.shape[1] > 1 else np.ones_like(log_scale)
    return np.exp(-np.exp(shape * (log_t[None, :] - log_scale)))


LOSSES = {
    "cox-breslow": (1, lambda out, e, t, reduction="mean":
                    cox_neg_partial_log_likelihood(out, e, t, TieMethod.BRESLOW, reduction)),
    "cox-efron": (1, lambda out, e, t, reduction="mean":
                  cox_neg_partial_log_likelihood(out, e, t, TieMethod.EFRON, reduction)),
    "weibull": (2, weibull_neg_log_likelihood),
}


def get_loss(name: str):
    """Return ``(output_dim, loss_fn)`` for a loss name."""
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None
