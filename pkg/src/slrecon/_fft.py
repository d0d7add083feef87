"""Thin FFT wrappers with a process-wide worker count.

The worker count is read once from the SLRECON_THREADS environment variable
(default 1) so that runs are reproducible regardless of where threads land.
"""

from __future__ import annotations

import os

import scipy.fft

_WORKERS = max(1, int(os.environ.get("SLRECON_THREADS", "1")))


def fft2(a):
    return scipy.fft.fft2(a, workers=_WORKERS)


def ifft2(a):
    return scipy.fft.ifft2(a, workers=_WORKERS)
