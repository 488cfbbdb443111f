"""Independent oracles shared by the test modules."""

from fractions import Fraction
import math

import numpy as np


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        g[i] = (f(up) - f(down)) / (2 * h)
    return g


def relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / scale))


def brute_concordance(scores, event, time, pair_weight=None):
    """Double loop over ordered pairs with exact rational arithmetic."""
    num, den = Fraction(0), Fraction(0)
    n = len(time)
    for i in range(n):
        if not event[i]:
            continue
        for j in range(n):
            if i == j:
                continue
            if time[i] < time[j] or (time[i] == time[j] and not event[j]):
                w = Fraction(1) if pair_weight is None else Fraction(pair_weight(i, j))
                den += w
                if scores[i] > scores[j]:
                    num += w
                elif scores[i] == scores[j]:
                    num += w / 2
    return num / den


def brute_auc(scores, event, time, t, weights=None):
    """Cases (event by t) against controls (still event-free after t), pair by pair."""
    w = [1] * len(time) if weights is None else weights
    num, den = Fraction(0), Fraction(0)
    for i in range(len(time)):
        if not (event[i] and time[i] <= t):
            continue
        for j in range(len(time)):
            if not time[j] > t:
                continue
            wij = Fraction(w[i]) * Fraction(w[j])
            den += wij
            if scores[i] > scores[j]:
                num += wij
            elif scores[i] == scores[j]:
                num += wij / 2
    return num / den


def brute_km(event, time):
    """Product-limit estimate as {jump time: Fraction}, straight from the definition."""
    out, s = {}, Fraction(1)
    for tau in sorted({t for t, e in zip(time, event) if e}):
        d = sum(1 for t, e in zip(time, event) if e and t == tau)
        r = sum(1 for t in time if t >= tau)
        s *= 1 - Fraction(d, r)
        out[tau] = s
    return out


def efron_loss_direct(eta, event, time):
    """Efron negative log partial likelihood (sum), probability scale, plain loops."""
    total = 0.0
    for tau in sorted({t for t, e in zip(time, event) if e}):
        dead = [i for i in range(len(time)) if event[i] and time[i] == tau]
        risk = sum(math.exp(eta[j]) for j in range(len(time)) if time[j] >= tau)
        dsum = sum(math.exp(eta[i]) for i in dead)
        d = len(dead)
        total += sum(eta[i] for i in dead)
        total -= sum(math.log(risk - l / d * dsum) for l in range(d))
    return -total


def breslow_loss_direct(eta, event, time):
    total = 0.0
    for i in range(len(time)):
        if event[i]:
            risk = sum(math.exp(eta[j]) for j in range(len(time)) if time[j] >= time[i])
            total += eta[i] - math.log(risk)
    return -total
