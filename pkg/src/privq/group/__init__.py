"""Prime-order group profiles with optional bilinear pairing.

Profiles:
  - "ed25519":    fast, no pairing (range proofs unavailable).
  - "pairing128": supersingular pairing curve, 128-bit security.
  - "pairing80":  same construction at reduced size, for fast test runs.

All profiles expose: order, base(), identity(), random_scalar(rng),
mul(k, P), msm(pairs), precompute(P), point/scalar encode-decode, and
pairing profiles additionally pair(P, Q), gt_one(), decode_gt().
"""

from __future__ import annotations

from ..errors import PairingUnavailable
from .dlog import DlogTable

PROFILES = ("ed25519", "pairing128", "pairing80")

_cache = {}


def get_group(profile: str = "ed25519"):
    """Return the (process-wide) group instance for a profile name."""
    if profile in _cache:
        return _cache[profile]
    if profile == "ed25519":
        from .ed25519 import GROUP as group
    elif profile in ("pairing128", "pairing80"):
        from . import pairing

        group = pairing.build(profile)
    else:
        raise ValueError(f"unknown curve profile {profile!r}; choose from {PROFILES}")
    _cache[profile] = group
    return group


def require_pairing(group):
    """Raise PairingUnavailable unless the group supports pairings."""
    if not group.has_pairing:
        raise PairingUnavailable(
            f"profile {group.name!r} has no pairing; range proofs need a pairing profile"
        )
    return group


__all__ = ["get_group", "require_pairing", "DlogTable", "PROFILES"]
