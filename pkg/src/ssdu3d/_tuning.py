"""Process-level allocator tuning.

Volumes and conv scratch buffers exceed glibc's default mmap threshold, so
every NumPy temporary above ~128 KB is mmap'd and returned to the kernel on
free; the resulting page-fault churn dominates FFT/GEMM time in sandboxed
environments. Raising the threshold keeps those buffers on the heap.
Best-effort: silently skipped on non-glibc platforms or when
SSDU3D_NO_MALLOC_TUNING is set.
"""

import ctypes
import os

_M_MMAP_THRESHOLD = -3


def tune_malloc() -> bool:
    if os.environ.get("SSDU3D_NO_MALLOC_TUNING"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        return bool(libc.mallopt(_M_MMAP_THRESHOLD, 256 * 1024 * 1024))
    except (OSError, AttributeError):
        return False
