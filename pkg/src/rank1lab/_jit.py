"""Backend selection for the hot kernels.

Set ``RANK1_LAB_NO_JIT=1`` to force the pure numpy implementations.
``RANK1_LAB_THREADS`` caps the numba thread pool.
"""
import os

_TRUTHY = ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
else:
    # the bundled TBB is often too old; workqueue is always available
    if os.environ.get("NUMBA_THREADING_LAYER") is None:
        numba.config.THREADING_LAYER = "workqueue"

JIT_AVAILABLE = numba is not None
JIT_ENABLED = JIT_AVAILABLE and os.environ.get("RANK1_LAB_NO_JIT", "").lower() not in _TRUTHY


def _apply_thread_cap():
    raw = os.environ.get("RANK1_LAB_THREADS")
    if not raw or numba is None:
        return
    try:
        want = int(raw)
    except ValueError:
        return
    if want >= 1:
        numba.set_num_threads(min(want, numba.config.NUMBA_NUM_THREADS))


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; identity decorator when numba is missing."""
    kwargs.setdefault("cache", True)
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


prange = range if numba is None else numba.prange


def default_backend() -> str:
    return "numba" if JIT_ENABLED else "numpy"


if JIT_ENABLED:
    _apply_thread_cap()
