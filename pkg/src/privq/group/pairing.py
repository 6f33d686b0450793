"""Pairing-friendly curve profile: supersingular y^2 = x^3 + x over F_p.

p = 3 (mod 4) makes the curve supersingular with #E(F_p) = p + 1; group
operations happen in the order-r subgroup (r prime, r | p + 1). The
symmetric pairing is the reduced Tate pairing composed with the distortion
map (x, y) -> (-x, iy) into E(F_p^2), F_p^2 = F_p[i]/(i^2 + 1), computed
with Miller's algorithm (denominators eliminated by the final
exponentiation) followed by the exponentiation to (p^2 - 1)/r.

Two parameter sets: "pairing128" (1536-bit p, production default) and
"pairing80" (512-bit p, reduced security for fast test runs).

Wire encodings (interop-sensitive, fixed here): source-group points are
compressed to a little-endian x coordinate plus one byte carrying the
parity of y (0x02/0x03), all-zero for the identity. Target-group elements
serialize as the two little-endian field coordinates (real part, then the
coefficient of i); there is no compression in the target group.
"""

from __future__ import annotations

import hashlib

from ..errors import PairingUnavailable, PrivqError
from . import mult

try:
    from gmpy2 import mpz, invert as _gmpy_invert

    def _inv(a, p):
        return int(_gmpy_invert(a, p))

    _wrap = mpz
except ImportError:  # pure-int fallback, ~4x slower field inversion

    def _inv(a, p):
        return pow(a, -1, p)

    def _wrap(x):
        return x


PARAMS = {
    "pairing80": dict(
        p=0x4000000000000000000000000000000000000C22C000000000000000000000000000000000000000002F17AE80000000000000000000000000000008EE0293BF7,
        r=0x1000000000000000000000000000000000000308B,
        base_x=0x2E95F8A96C653944A406F8D3866618469C7A8279DD1EDD0771E58414E9A1642902A6124A8F3A8FCE6C732AD842D839B98E5961635B781D1884BC33857FAECEDEC,
        base_y=0x16C237B55BB47707070D13D2A888BE7DD270969C499195D32DA1ED1B351D0ADC20A9D675A4CEE3B2C34BD164E668E77B0D3C765FBAF6C1CE40A1D19BEE21EBB41,
    ),
    "pairing128": dict(
        p=int(
            "4000000000000000000000000000000000000000000000000000000000000c55c0000000000000000000"
            "000000000000000000000000000000000000000000000000000000000000000000000000000000000000"
            "000000000000000000000000000000000000000000000000000000000000000000000000000000000000"
            "000000000000000000000000000000000000000000000000000000000000002f195cc000000000000000"
            "000000000000000000000000000000000000000913dc5f453",
            16,
        ),
        r=int(
            "10000000000000000000000000000000000000000000000000000000000003157",
            16,
        ),
        base_x=int(
            "359d5ede0cecc05d8b959dc10c05c388c25382e48dc1f9d41ea9a526a25c2d42731555d799c45b8fea1c"
            "c6e405e62864ded1d6e87f55bbf3c43372bf6932040a50175050a0e934fbda5db28c09ecd56871e77c5b"
            "26d67b424b700700f48720efd22a7d19d98c14aabdad30dc2b980bd447f61f500c14421511e33634d7d9"
            "c127da86c93d5d0761113a46c5cebb50ab820e5da9aa1146a17c803838739ded37901ebcb65acb24c9de"
            "c2831b05519c5b5975ee8221b8d082422a479eb4d852ba69b",
            16,
        ),
        base_y=int(
            "185895e417048502d8daa1c46d10c2cc3e451e5be4659458974b9c9c0ff24d2833e81d6bb6466b05da86"
            "fab2311e6b830fe05f3594a9b6e69ec162cdf22b72508b55eaad8a6537f5c07c834d8b67dff36a5c7b55"
            "3623993d3dfbb5d1e07709b8469d6c489bbc38bdab45a9566aa153c320e3f7f978dcb59c118935a5c132"
            "a26e457c83e33aa91d3dea7f2cacc72462348d5a031fcd31a54810b0e5baf3d51add09face0b35bcde7c"
            "4ed9cbc9ab9435cc7cfc29ddd56f9f03595ada0570ee7835f",
            16,
        ),
    ),
}


class WeierstrassPoint:
    """Affine point on the supersingular curve; None coordinates mean the identity."""

    __slots__ = ("x", "y", "group", "_comb")

    def __init__(self, x, y, group):
        self.x = x
        self.y = y
        self.group = group
        self._comb = None

    def is_identity(self):
        return self.x is None

    def __add__(self, other):
        g = self.group
        if self.is_identity():
            return other
        if other.is_identity():
            return self
        p = g.p
        x1, y1, x2, y2 = self.x, self.y, other.x, other.y
        if x1 == x2:
            if (y1 + y2) % p == 0:
                return g.identity()
            lam = (3 * x1 * x1 + 1) * _inv(2 * y1, p) % p
        else:
            lam = (y2 - y1) * _inv(x2 - x1, p) % p
        x3 = (lam * lam - x1 - x2) % p
        return WeierstrassPoint(x3, (lam * (x1 - x3) - y1) % p, g)

    def __neg__(self):
        if self.is_identity():
            return self
        return WeierstrassPoint(self.x, (-self.y) % self.group.p, self.group)

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, k):
        return self.group.mul(k, self)

    __mul__ = __rmul__

    def __eq__(self, other):
        if not isinstance(other, WeierstrassPoint):
            return NotImplemented
        return self.x == other.x and self.y == other.y

    def __hash__(self):
        return hash(self.encode())

    def encode(self) -> bytes:
        n = self.group.point_bytes - 1
        if self.is_identity():
            return bytes(n + 1)
        return int(self.x).to_bytes(n, "little") + bytes([2 | (int(self.y) & 1)])

    def __repr__(self):
        return f"WeierstrassPoint({self.encode().hex()[:16]}...)"


class GtElement:
    """Target-group element in F_p^2; multiplicative notation."""

    __slots__ = ("re", "im", "group")

    def __init__(self, re, im, group):
        self.re = re
        self.im = im
        self.group = group

    def __mul__(self, other):
        p = self.group.p
        a, b, c, d = self.re, self.im, other.re, other.im
        t1 = a * c % p
        t2 = b * d % p
        return GtElement((t1 - t2) % p, ((a + b) * (c + d) - t1 - t2) % p, self.group)

    def __pow__(self, e):
        g = self.group
        base = self
        if e < 0:
            base = self.inverse()
            e = -e
        result = GtElement(_wrap(1), _wrap(0), g)
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def inverse(self):
        p = self.group.p
        n = _inv(self.re * self.re + self.im * self.im, p)
        return GtElement(self.re * n % p, (-self.im) * n % p, self.group)

    def conjugate(self):
        """Inverse for elements of the order-r pairing subgroup (unit norm)."""
        return GtElement(self.re, (-self.im) % self.group.p, self.group)

    def __eq__(self, other):
        if not isinstance(other, GtElement):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((int(self.re), int(self.im)))

    def encode(self) -> bytes:
        n = self.group.point_bytes - 1
        return int(self.re).to_bytes(n, "little") + int(self.im).to_bytes(n, "little")

    def __repr__(self):
        return f"GtElement({self.encode().hex()[:16]}...)"


class PairingGroup:
    has_pairing = True

    def __init__(self, name: str):
        params = PARAMS[name]
        self.name = name
        self.p = _wrap(params["p"])
        self.order = params["r"]
        self.cofactor = (params["p"] + 1) // params["r"]
        self.gt_order = params["r"]
        self.point_bytes = (params["p"].bit_length() + 7) // 8 + 1
        self.scalar_bytes = (params["r"].bit_length() + 7) // 8
        self._identity = WeierstrassPoint(None, None, self)
        self._base = WeierstrassPoint(_wrap(params["base_x"]), _wrap(params["base_y"]), self)
        self._pair_cache = {}
        self.precompute(self._base)

    def base(self):
        return self._base

    def identity(self):
        return self._identity

    def random_scalar(self, rng) -> int:
        return rng.randbelow(self.order)

    def _dbl(self, point):
        return point + point

    def mul(self, k: int, point: WeierstrassPoint) -> WeierstrassPoint:
        k = k % self.order
        if k == 0 or point.is_identity():
            return self._identity
        if point._comb is not None:
            return mult.comb_mul(k, point._comb, WeierstrassPoint.__add__, self._identity)
        return mult.window_mul(k, point, WeierstrassPoint.__add__, self._dbl, self._identity)

    def precompute(self, point: WeierstrassPoint) -> None:
        if point._comb is None and not point.is_identity():
            point._comb = mult.comb_table(point, WeierstrassPoint.__add__, self.order.bit_length())

    def msm(self, pairs) -> WeierstrassPoint:
        return mult.multi_scalar_mul(
            list(pairs), WeierstrassPoint.__add__, None, self._identity, self.order
        )

    def encode_scalar(self, s: int) -> bytes:
        return (s % self.order).to_bytes(self.scalar_bytes, "little")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_bytes:
            raise PrivqError("bad scalar length")
        v = int.from_bytes(data, "little")
        if v >= self.order:
            raise PrivqError("non-canonical scalar encoding")
        return v

    def decode_point(self, data: bytes, check_subgroup: bool = False) -> WeierstrassPoint:
        if len(data) != self.point_bytes:
            raise PrivqError("bad point length")
        if data == bytes(self.point_bytes):
            return self._identity
        tag = data[-1]
        if tag not in (2, 3):
            raise PrivqError("bad point compression tag")
        x = int.from_bytes(data[:-1], "little")
        if x >= self.p:
            raise PrivqError("point encoding not canonical")
        x = _wrap(x)
        y2 = (x * x * x + x) % self.p
        y = pow(y2, (self.p + 1) // 4, self.p)
        if y * y % self.p != y2:
            raise PrivqError("not a curve point")
        if int(y) & 1 != tag & 1:
            y = (-y) % self.p
        point = WeierstrassPoint(x, y, self)
        if check_subgroup and not self.mul(self.order, point).is_identity():
            raise PrivqError("point not in prime-order subgroup")
        return point

    def gt_one(self) -> GtElement:
        return GtElement(_wrap(1), _wrap(0), self)

    def decode_gt(self, data: bytes) -> GtElement:
        n = self.point_bytes - 1
        if len(data) != 2 * n:
            raise PrivqError("bad target-group element length")
        re = int.from_bytes(data[:n], "little")
        im = int.from_bytes(data[n:], "little")
        if re >= self.p or im >= self.p:
            raise PrivqError("target-group encoding not canonical")
        return GtElement(_wrap(re), _wrap(im), self)

    def pair(self, P: WeierstrassPoint, Q: WeierstrassPoint, cache: bool = True) -> GtElement:
        """Symmetric pairing e(P, Q); results are memoized since proof verification
        re-evaluates the same argument pairs many times."""
        if P.is_identity() or Q.is_identity():
            return self.gt_one()
        if cache:
            key = (P.encode(), Q.encode())
            hit = self._pair_cache.get(key)
            if hit is not None:
                return hit
        result = self._tate(P, Q)
        if cache:
            if len(self._pair_cache) > 8192:
                self._pair_cache.clear()
            self._pair_cache[key] = result
        return result

    def _tate(self, P, Q):
        p = self.p
        mxq = (-Q.x) % p
        neg_yq = (-Q.y) % p
        one = _wrap(1)
        fr, fi = one, _wrap(0)
        tx, ty = P.x, P.y
        px, py = P.x, P.y
        done = False
        for bit in bin(self.order)[3:]:
            # f <- f^2 * line_{T,T}(phi Q); line = (lam(-xq - xT) + yT) - i*yq
            lam = (3 * tx * tx + 1) * _inv(2 * ty, p) % p
            lre = (lam * (mxq - tx) + ty) % p
            t1 = fr * fr % p
            t2 = fi * fi % p
            sr, si = (t1 - t2) % p, 2 * fr * fi % p
            u1 = sr * lre % p
            u2 = si * neg_yq % p
            fr = (u1 - u2) % p
            fi = ((sr + si) * (lre + neg_yq) - u1 - u2) % p
            x3 = (lam * lam - 2 * tx) % p
            ty = (lam * (tx - x3) - ty) % p
            tx = x3
            if bit == "1":
                if done:
                    continue
                if tx == px and (ty + py) % p == 0:
                    done = True  # vertical line, eliminated by final exponentiation
                    continue
                lam = (py - ty) * _inv(px - tx, p) % p
                lre = (lam * (mxq - tx) + ty) % p
                u1 = fr * lre % p
                u2 = fi * neg_yq % p
                fr, fi = (u1 - u2) % p, ((fr + fi) * (lre + neg_yq) - u1 - u2) % p
                x3 = (lam * lam - tx - px) % p
                ty = (lam * (tx - x3) - ty) % p
                tx = x3
        # final exponentiation: f^(p-1) via conjugate/inverse, then ^cofactor
        norm = _inv(fr * fr + fi * fi, p)
        gr = fr * fr % p - fi * fi % p
        g = GtElement(gr * norm % p, (-2 * fr * fi) % p * norm % p, self)
        return g ** self.cofactor

    def hash_to_point(self, data: bytes) -> WeierstrassPoint:
        """Map bytes to a subgroup point (try-and-increment, then cofactor clearing)."""
        ctr = 0
        nbytes = self.point_bytes - 1
        while True:
            h = hashlib.sha512(b"privq/h2p" + ctr.to_bytes(4, "little") + data).digest()
            x = _wrap(int.from_bytes(h[:nbytes], "little") % self.p)
            y2 = (x * x * x + x) % self.p
            y = pow(y2, (self.p + 1) // 4, self.p)
            if y * y % self.p == y2:
                point = self.mul(self.cofactor, WeierstrassPoint(x, y, self))
                if not point.is_identity():
                    return point
            ctr += 1


def build(name: str) -> PairingGroup:
    if name not in PARAMS:
        raise PairingUnavailable(f"unknown pairing profile {name!r}")
    return PairingGroup(name)
