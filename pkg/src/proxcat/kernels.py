"""Kernel backend selection.

The compiled extension ``proxcat._ckernels`` is used when it imports; the
pure-Python module ``proxcat._pykernels`` is the fallback.  Setting the
environment variable ``PROXCAT_PURE_PYTHON=1`` forces the fallback.

``BACKEND`` names the active implementation ("cython" or "python").
"""

import os

from . import _pykernels

if os.environ.get("PROXCAT_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

euclid_dist = _impl.euclid_dist
euclid_geodesic = _impl.euclid_geodesic
euclid_sqdist_power = _impl.euclid_sqdist_power
euclid_dist_power = _impl.euclid_dist_power
euclid_sqsum_power = _impl.euclid_sqsum_power
hyp_dist = _impl.hyp_dist
hyp_geodesic = _impl.hyp_geodesic
jacobi_eigh = _impl.jacobi_eigh
spd_dist = _impl.spd_dist
spd_geodesic = _impl.spd_geodesic
spd_log = _impl.spd_log
spd_exp = _impl.spd_exp
spd_inner = _impl.spd_inner
spd_karcher = _impl.spd_karcher

__all__ = [
    "BACKEND", "euclid_dist", "euclid_geodesic", "euclid_sqdist_power",
    "euclid_dist_power", "euclid_sqsum_power", "hyp_dist", "hyp_geodesic",
    "jacobi_eigh", "spd_dist", "spd_geodesic", "spd_log", "spd_exp",
    "spd_inner", "spd_karcher",
]
