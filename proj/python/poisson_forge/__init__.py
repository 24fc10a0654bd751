"""Python front end of the poisson_forge verification core.

Campaign functions return parsed JSON reports with the same layout as the
``pforge`` command-line tool.
"""

import json

from . import _core

__version__ = _core.__version__
catalog_keys = _core.catalog_keys
atlas_manifest = _core.atlas_manifest
plane_fiber = _core.plane_fiber
plane_monodromy = _core.plane_monodromy
is_zero = _core.is_zero
IntegrationFailure = _core.IntegrationFailure


def catalog_verify(key, samples=200, tol=1e-9, seed=1):
    return json.loads(_core.catalog_verify(key, samples, tol, seed))


def resolution_verify(family, samples=200, tol=1e-8, seed=1, **params):
    return json.loads(_core.resolution_verify(family, samples=samples, tol=tol, seed=seed, **params))


def crossing_r2(alpha):
    return json.loads(_core.crossing_r2(alpha))


__all__ = [
    "catalog_keys",
    "catalog_verify",
    "resolution_verify",
    "atlas_manifest",
    "plane_fiber",
    "plane_monodromy",
    "crossing_r2",
    "is_zero",
    "IntegrationFailure",
]
