"""Principal branch of the Lambert W function for real arguments."""
import math

_INV_E = math.exp(-1.0)
_MAX_ITER = 64


def _initial_guess(x):
    if x < -0.25:
        # series about the branch point x = -1/e, in p = sqrt(2 (e x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 3.0:
        return math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w_principal(x: float) -> float:
    """Solve ``w * exp(w) = x`` for the principal real branch ``w >= -1``.

    Halley iteration from a branch-point series (``x`` near ``-1/e``) or an
    asymptotic guess. Arguments within 1e-15 below ``-1/e`` are treated as
    the branch point itself to absorb rounding in ``-exp(-1)``.

    Raises
    ------
    ValueError
        If ``x < -1/e`` or ``x`` is not finite.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"lambert_w_principal needs a finite argument, got {x}")
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:
            return -1.0
        raise ValueError(f"lambert_w_principal is undefined for x < -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if math.e * x + 1.0 <= 4.0 * 2.220446049250313e-16:
        return -1.0

    w = _initial_guess(x)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return w
