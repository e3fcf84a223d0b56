"""Central finite-difference verification of analytic gradients."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    rows: list = field(default_factory=list)  # (name, n_checked, max_rel_error)
    tol: float = 1e-4

    @property
    def max_error(self):
        return max((r[2] for r in self.rows), default=0.0)

    @property
    def passed(self):
        return self.max_error < self.tol

    def __str__(self):
        lines = [f"{name:<14} n={n:<5d} max_rel_err={err:.3e}" for name, n, err in self.rows]
        lines.append(f"{'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})")
        return "\n".join(lines)


def relative_error(g, g_num):
    return np.abs(g - g_num) / np.maximum(np.maximum(np.abs(g), np.abs(g_num)), 1e-12)


def grad_check(net, inputs, targets, h=1e-5, tol=1e-4, max_per_tensor=None, seed=0,
               grads=None):
    """Compare ``net.loss_and_grads`` against central differences.

    ``max_per_tensor`` limits the number of (randomly chosen) entries per
    parameter tensor; None checks all.  ``grads`` overrides the analytic
    gradients (used to confirm the checker catches wrong ones).
    """
    rng = np.random.default_rng(seed)
    params = {k: v.copy() for k, v in net.params.items()}
    if grads is None:
        _, grads = net.loss_and_grads(inputs, targets, params)
    report = GradCheckReport(tol=tol)
    for name in sorted(params):
        p = params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            idx = np.sort(rng.choice(flat.size, size=max_per_tensor, replace=False))
        g = grads[name].reshape(-1)
        worst = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            lp = net.loss(inputs, targets, params)
            flat[i] = old - h
            lm = net.loss(inputs, targets, params)
            flat[i] = old
            num = (lp - lm) / (2 * h)
            worst = max(worst, float(relative_error(g[i], num)))
        report.rows.append((name, len(idx), worst))
    return report
