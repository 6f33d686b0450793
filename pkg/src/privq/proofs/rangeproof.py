"""Anytrust range proofs: a value committed as C2 = mB + r*Omega is shown to
lie in [0, u^l) without revealing it.

Setup: each computing node i picks a secret x_i and publishes Z_i = x_i*B
together with digit signatures A_{i,b} = (x_i + b)^{-1} * B for every base-u
digit b. A prover decomposes m into digits and, for each digit and EVERY
node, blinds that node's signature on the digit (V_{i,j} = v_j * A_{i,m_j}).
Since at least one node's x_i is unknown to the prover (the Anytrust
premise), the blinded signatures are unforgeable for any digit value the
nodes did not sign.

Verification checks one linear equation over the commitment,

    D == c*C2 + z_r*Omega + sum_j (u^j * z_mj) * B,

which binds the digit responses to the committed value, and per (node,
digit) one pairing equation,

    a_{i,j} == e(V_{i,j}, Z_i)^c * e(V_{i,j}, B)^{-z_mj} * e(B, B)^{z_vj}.

The challenge c is the transcript hash over the statement AND the
commitments (D, every V_{i,j}, every a_{i,j}); binding the commitments is
what makes the non-interactive proof sound.

Arbitrary ranges [b_l, b_u) reduce to this form by proving m - b_l in
[0, u^l) with minimal l (see `shift_range`).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import MalformedProof, OutOfRange, PairingUnavailable
from ..serial import Reader, pack_u8, pack_u32
from .transcript import Transcript

_TAG = 0x02
DEFAULT_DIGIT_BASE = 16


@dataclass(frozen=True)
class RangeSignatures:
    """Public per-CN signature material for digits 0..u-1."""

    group: object
    u: int
    z_points: tuple  # Z_i per CN
    digit_sigs: tuple  # digit_sigs[i][b] = (x_i + b)^{-1} * B

    @property
    def n_cns(self) -> int:
        return len(self.z_points)


def range_setup(group, u: int, n_cns: int, rng):
    """Generate each CN's secret x_i and the published signatures.

    Returns (RangeSignatures, secrets); in a deployment each CN keeps its
    own x_i and only the public part circulates.
    """
    if not group.has_pairing:
        raise PairingUnavailable("range proofs need a pairing-capable curve profile")
    if u < 2:
        raise OutOfRange("digit base u must be at least 2")
    if n_cns < 1:
        raise OutOfRange("need at least one CN")
    base = group.base()
    secrets, z_points, digit_sigs = [], [], []
    for _ in range(n_cns):
        while True:
            x = group.random_scalar(rng)
            if all((x + b) % group.order != 0 for b in range(u)):
                break
        secrets.append(x)
        z_points.append(group.mul(x, base))
        row = tuple(
            group.mul(pow(x + b, -1, group.order), base) for b in range(u)
        )
        digit_sigs.append(row)
    return RangeSignatures(group, u, tuple(z_points), tuple(digit_sigs)), secrets


@dataclass(frozen=True)
class RangeProof:
    c2: object
    challenge: int
    z_r: int
    z_v: tuple  # per digit j
    z_m: tuple  # per digit j
    d_point: object
    v_points: tuple  # v_points[i][j], per CN i and digit j
    a_elems: tuple  # a_elems[i][j], target-group elements
    u: int
    l: int

    def encode(self) -> bytes:
        group = self.c2.group if hasattr(self.c2, "group") else None
        enc_s = group.encode_scalar
        out = [
            pack_u8(_TAG),
            pack_u32(self.u),
            pack_u32(self.l),
            pack_u32(len(self.v_points)),
            self.c2.encode(),
            self.d_point.encode(),
            enc_s(self.challenge),
            enc_s(self.z_r),
        ]
        out.extend(enc_s(z) for z in self.z_v)
        out.extend(enc_s(z) for z in self.z_m)
        for row in self.v_points:
            out.extend(p.encode() for p in row)
        for row in self.a_elems:
            out.extend(a.encode() for a in row)
        return b"".join(out)


def range_params(bounds: tuple[int, int], u: int = DEFAULT_DIGIT_BASE):
    """Minimal digit count l with u^l >= b_u - b_l."""
    b_l, b_u = bounds
    if b_u <= b_l:
        raise OutOfRange(f"empty range [{b_l}, {b_u})")
    width = b_u - b_l
    l = 1
    cap = u
    while cap < width:
        cap *= u
        l += 1
    return u, l


def shift_range(m: int, bounds: tuple[int, int], u: int = DEFAULT_DIGIT_BASE):
    """Map m in [b_l, b_u) to (m - b_l, u, l) with minimal l, u^l >= b_u - b_l."""
    b_l, b_u = bounds
    if not b_l <= m < b_u:
        raise OutOfRange(f"{m} outside [{b_l}, {b_u})")
    u, l = range_params(bounds, u)
    return m - b_l, u, l


def shift_range_upper(m: int, bounds: tuple[int, int], u: int = DEFAULT_DIGIT_BASE):
    """The complementary shift m - b_u + u^l.

    m lies in [b_l, b_u) iff BOTH m - b_l and m - b_u + u^l lie in
    [0, u^l); a single shifted proof only bounds m by [b_l, b_l + u^l),
    which overshoots whenever u^l exceeds the range width.
    """
    b_l, b_u = bounds
    u, l = range_params(bounds, u)
    return m - b_u + u**l, u, l


def _digits(m: int, u: int, l: int) -> list[int]:
    out = []
    for _ in range(l):
        out.append(m % u)
        m //= u
    return out


def _challenge(group, omega, sigs, c2, d_point, v_points, a_elems, u, l) -> int:
    tr = Transcript(group, "range")
    tr.absorb(group.base(), omega, c2, u, l, len(sigs.z_points))
    tr.absorb(*sigs.z_points)
    tr.absorb(d_point)
    for row in v_points:
        tr.absorb(*row)
    for row in a_elems:
        tr.absorb(*row)
    return tr.challenge()


def prove_range(group, m: int, r_nonce: int, omega, sigs: RangeSignatures,
                l: int, rng) -> RangeProof:
    """Prove C2 = mB + r*Omega commits to m in [0, u^l)."""
    if not 0 <= m < sigs.u**l:
        raise OutOfRange(f"{m} outside [0, {sigs.u}^{l})")
    return prove_range_unchecked(group, m, r_nonce, omega, sigs, l, rng)


def prove_range_unchecked(group, m: int, r_nonce: int, omega,
                          sigs: RangeSignatures, l: int, rng,
                          digits=None) -> RangeProof:
    """Range-proof transcript without the domain check; with `digits` not
    matching m the proof cannot verify. Models a cheating prover in the
    fault-injection tests and harness."""
    u = sigs.u
    order = group.order
    base = group.base()
    c2 = group.mul(m, base) + group.mul(r_nonce, omega)
    digits = digits if digits is not None else _digits(m % u**l, u, l)

    e_bb = group.pair(base, base)
    s_list, t_list, v_list = [], [], []
    v_points = [[] for _ in range(sigs.n_cns)]
    a_elems = [[] for _ in range(sigs.n_cns)]
    for j in range(l):
        s_j = group.random_scalar(rng)
        t_j = group.random_scalar(rng)
        v_j = group.random_scalar(rng)
        s_list.append(s_j)
        t_list.append(t_j)
        v_list.append(v_j)
        for i in range(sigs.n_cns):
            v_ij = group.mul(v_j, sigs.digit_sigs[i][digits[j]])
            v_points[i].append(v_ij)
            e_vb = group.pair(v_ij, base)
            a_elems[i].append((e_vb.conjugate() ** s_j) * (e_bb**t_j))
    n_nonce = group.random_scalar(rng)
    d_point = group.msm(
        [(pow(u, j, order) * s_list[j] % order, base) for j in range(l)]
        + [(n_nonce, omega)]
    )
    v_points = tuple(tuple(row) for row in v_points)
    a_elems = tuple(tuple(row) for row in a_elems)
    c = _challenge(group, omega, sigs, c2, d_point, v_points, a_elems, u, l)
    z_v = tuple((t_list[j] - v_list[j] * c) % order for j in range(l))
    z_m = tuple((s_list[j] - digits[j] * c) % order for j in range(l))
    z_r = (n_nonce - r_nonce * c) % order
    return RangeProof(c2, c, z_r, z_v, z_m, d_point, v_points, a_elems, u, l)


def verify_range(proof: RangeProof, sigs: RangeSignatures, omega) -> bool:
    """Check the linear commitment equation and all pairing equations."""
    group = sigs.group
    u, l = proof.u, proof.l
    if u != sigs.u or l < 1:
        return False
    if len(proof.v_points) != sigs.n_cns or len(proof.a_elems) != sigs.n_cns:
        return False
    if any(len(row) != l for row in proof.v_points):
        return False
    if any(len(row) != l for row in proof.a_elems):
        return False
    if len(proof.z_v) != l or len(proof.z_m) != l:
        return False
    c = _challenge(group, omega, sigs, proof.c2, proof.d_point,
                   proof.v_points, proof.a_elems, u, l)
    if c != proof.challenge:
        return False
    order = group.order
    base = group.base()
    rhs = group.msm(
        [(c, proof.c2), (proof.z_r, omega)]
        + [(pow(u, j, order) * proof.z_m[j] % order, base) for j in range(l)]
    )
    if rhs != proof.d_point:
        return False
    e_bb = group.pair(base, base)
    for i in range(sigs.n_cns):
        z_i = sigs.z_points[i]
        for j in range(l):
            v_ij = proof.v_points[i][j]
            expected = (
                (group.pair(v_ij, z_i) ** c)
                * (group.pair(v_ij, base).conjugate() ** proof.z_m[j])
                * (e_bb ** proof.z_v[j])
            )
            if expected != proof.a_elems[i][j]:
                return False
    return True


def decode_range(group, data: bytes) -> RangeProof:
    try:
        reader = Reader(data)
        if reader.u8() != _TAG:
            raise MalformedProof("wrong proof type tag")
        u = reader.u32()
        l = reader.u32()
        n_cns = reader.u32()
        if not (2 <= u <= 4096 and 1 <= l <= 64 and 1 <= n_cns <= 64):
            raise MalformedProof("implausible proof shape")
        pb, sb = group.point_bytes, group.scalar_bytes
        c2 = group.decode_point(reader.take(pb))
        d_point = group.decode_point(reader.take(pb))
        challenge = group.decode_scalar(reader.take(sb))
        z_r = group.decode_scalar(reader.take(sb))
        z_v = tuple(group.decode_scalar(reader.take(sb)) for _ in range(l))
        z_m = tuple(group.decode_scalar(reader.take(sb)) for _ in range(l))
        v_points = tuple(
            tuple(group.decode_point(reader.take(pb)) for _ in range(l))
            for _ in range(n_cns)
        )
        gt_bytes = 2 * (pb - 1)
        a_elems = tuple(
            tuple(group.decode_gt(reader.take(gt_bytes)) for _ in range(l))
            for _ in range(n_cns)
        )
        reader.expect_done()
        return RangeProof(c2, challenge, z_r, z_v, z_m, d_point, v_points, a_elems, u, l)
    except MalformedProof:
        raise
    except Exception as exc:
        raise MalformedProof(f"undecodable range proof: {exc}") from exc
