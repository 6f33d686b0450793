"""The four collective protocols run by computing nodes over a tree.

- tree aggregation (CTA): componentwise ciphertext sums up the tree;
- key switching (CTKS): re-encrypt an aggregate from the collective key to
  the querier's key without decrypting, one additive share per CN;
- obfuscation (CTO): multiplicative blinding s = sum(s_i) that preserves
  zero, for bit-wise results;
- collective differential privacy (CDP): a public quantized Laplace noise
  list, sequentially and verifiably shuffled by every CN, whose leading
  ciphertexts are added to the aggregate.

Every per-CN step emits a proof payload; the ledger module wraps payloads
into signed bundles addressed to the verifying nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import elgamal
from .elgamal import Ciphertext
from .errors import (
    DimensionMismatch,
    InvalidPrivacyParams,
    KeyMismatch,
    MalformedProof,
    NoiseExhausted,
)
from .proofs.linear import LinearStatement, prove_linear, verify_linear
from .proofs.shuffle import shuffle_and_prove
from .serial import Reader, pack_u8, pack_u32

AGGREGATION_TAG = 0x04


# ---------------------------------------------------------------------------
# CN tree


@dataclass(frozen=True)
class CnTree:
    """Rooted tree over CN identities; deterministic given the sorted ids."""

    nodes: tuple
    parents: tuple  # parent index per node, -1 for the root
    shape: str = "binary"

    @property
    def root(self):
        return self.nodes[0]

    def children(self, index: int) -> list[int]:
        return [i for i, p in enumerate(self.parents) if p == index]

    def bottom_up(self) -> list[int]:
        """Indices ordered leaves-first so parents follow all their children."""
        depth = [0] * len(self.nodes)
        for i in range(1, len(self.nodes)):
            depth[i] = depth[self.parents[i]] + 1
        return sorted(range(len(self.nodes)), key=lambda i: -depth[i])


def build_tree(cn_ids, shape: str = "binary") -> CnTree:
    ids = tuple(sorted(cn_ids))
    if not ids:
        raise ValueError("need at least one CN")
    if shape == "binary":
        parents = tuple(-1 if i == 0 else (i - 1) // 2 for i in range(len(ids)))
    elif shape == "chain":
        parents = tuple(i - 1 for i in range(len(ids)))
    elif shape == "star":
        parents = tuple(-1 if i == 0 else 0 for i in range(len(ids)))
    else:
        raise ValueError(f"unknown tree shape {shape!r}")
    return CnTree(ids, parents, shape)


# ---------------------------------------------------------------------------
# Aggregation (CTA)


@dataclass(frozen=True)
class AggregationProof:
    """Input ciphertext lists and the claimed sum; verification recomputes it."""

    inputs: tuple  # tuple of ciphertext tuples
    output: tuple  # ciphertext tuple

    def encode(self) -> bytes:
        out = [pack_u8(AGGREGATION_TAG), pack_u32(len(self.output)),
               pack_u32(len(self.inputs))]
        for group_cts in self.inputs:
            out.extend(ct.encode() for ct in group_cts)
        out.extend(ct.encode() for ct in self.output)
        return b"".join(out)


def verify_aggregation(proof: AggregationProof) -> bool:
    if not proof.inputs or not proof.output:
        return False
    width = len(proof.output)
    if any(len(cts) != width for cts in proof.inputs):
        return False
    for j in range(width):
        total = proof.inputs[0][j]
        for cts in proof.inputs[1:]:
            total = total + cts[j]
        if total != proof.output[j]:
            return False
    return True


def decode_aggregation(group, data: bytes) -> AggregationProof:
    try:
        reader = Reader(data)
        if reader.u8() != AGGREGATION_TAG:
            raise MalformedProof("wrong proof type tag")
        width = reader.u32()
        n_inputs = reader.u32()
        if not (1 <= width <= 100000 and 1 <= n_inputs <= 100000):
            raise MalformedProof("implausible aggregation shape")
        pb = group.point_bytes

        def ct():
            return Ciphertext(group.decode_point(reader.take(pb)),
                              group.decode_point(reader.take(pb)))

        inputs = tuple(tuple(ct() for _ in range(width)) for _ in range(n_inputs))
        output = tuple(ct() for _ in range(width))
        reader.expect_done()
        return AggregationProof(inputs, output)
    except MalformedProof:
        raise
    except Exception as exc:
        raise MalformedProof(f"undecodable aggregation proof: {exc}") from exc


@dataclass
class ProtocolStep:
    """One CN's contribution to a protocol round: serialized sub-proofs."""

    cn_id: str
    proof_type: str
    payloads: list = field(default_factory=list)


def _response_cts(response) -> tuple:
    return tuple(response.vector) + (response.count,)


def cta_aggregate(tree: CnTree, contributions: dict):
    """Aggregate every DP's encoded response up the CN tree.

    `contributions` maps cn_id -> list of EncodedResponse from its DPs.
    Returns (aggregate EncodedResponse, [ProtocolStep per CN]).
    """
    from .encodings import EncodedResponse  # local import, no cycle at module load

    dims = {len(r.vector) for rs in contributions.values() for r in rs}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed response dimensions {sorted(dims)}")
    partials = {}
    steps = []
    for idx in tree.bottom_up():
        cn = tree.nodes[idx]
        parts = [_response_cts(r) for r in contributions.get(cn, [])]
        parts.extend(p for child in tree.children(idx)
                     if (p := partials[child]) is not None)
        if not parts:
            partials[idx] = None
            continue
        width = len(parts[0])
        total = tuple(
            _ct_sum([p[j] for p in parts]) for j in range(width)
        )
        partials[idx] = total
        steps.append(ProtocolStep(cn, "aggregation",
                                  [AggregationProof(tuple(parts), total).encode()]))
    result = partials[0]
    if result is None:
        raise DimensionMismatch("no contributions to aggregate")
    return EncodedResponse(list(result[:-1]), result[-1]), steps


def _ct_sum(cts):
    total = cts[0]
    for ct in cts[1:]:
        total = total + ct
    return total


# ---------------------------------------------------------------------------
# Key switching (CTKS)


def ctks_share(group, c1, cn_key, target_pk, rng):
    """One CN's key-switch share for a single ciphertext.

    w1 = alpha*B, w2 = -k_i*C1 + alpha*K'; the emitted proof shows the same
    k_i as the CN's published key and the same alpha in both shares.
    """
    alpha = group.random_scalar(rng)
    base = group.base()
    w1 = group.mul(alpha, base)
    neg_c1 = -c1
    w2 = group.msm([(cn_key.private, neg_c1), (alpha, target_pk)])
    statement = LinearStatement(
        bases=((base, None), (None, base), (neg_c1, target_pk)),
        targets=(cn_key.public, w1, w2),
    )
    proof = prove_linear(statement, (cn_key.private, alpha), rng)
    return w1, w2, proof


def ctks_switch(tree: CnTree, response, target_pk, cn_keys: dict, rng,
                collective_pk=None):
    """Switch every ciphertext of `response` from the CNs' collective key to
    `target_pk`. Returns (switched EncodedResponse, [ProtocolStep per CN])."""
    from .encodings import EncodedResponse

    group = _group_of_keys(cn_keys)
    if collective_pk is not None:
        expect = None
        for cn in tree.nodes:
            pk = cn_keys[cn].public
            expect = pk if expect is None else expect + pk
        if expect != collective_pk:
            raise KeyMismatch("ciphertext key is not this CN set's collective key")
    cts = _response_cts(response)
    sums = [None] * len(cts)
    steps = []
    for cn in tree.nodes:
        step = ProtocolStep(cn, "keyswitch")
        for j, ct in enumerate(cts):
            w1, w2, proof = ctks_share(group, ct.c1, cn_keys[cn], target_pk, rng)
            pair = (w1, w2)
            sums[j] = pair if sums[j] is None else (sums[j][0] + w1, sums[j][1] + w2)
            step.payloads.append(proof.encode())
        steps.append(step)
    switched = tuple(
        Ciphertext(sums[j][0], cts[j].c2 + sums[j][1]) for j in range(len(cts))
    )
    return EncodedResponse(list(switched[:-1]), switched[-1]), steps


def verify_ctks_payload(group, payload: bytes, cn_public, c1, target_pk) -> bool:
    """Check a key-switch sub-proof against the CN's key and the ciphertext."""
    from .proofs.linear import decode_linear

    proof = decode_linear(group, payload)
    st = proof.statement
    if len(st.targets) != 3 or st.n_secrets != 2:
        return False
    neg_c1 = -c1
    if st.bases != ((group.base(), None), (None, group.base()), (neg_c1, target_pk)):
        return False
    if st.targets[0] != cn_public:
        return False
    return verify_linear(proof)


def _group_of_keys(cn_keys):
    key = next(iter(cn_keys.values()))
    point = key.public
    if hasattr(point, "group"):
        return point.group
    from .group.ed25519 import GROUP

    return GROUP


# ---------------------------------------------------------------------------
# Obfuscation (CTO)


def cto_share(group, ct: Ciphertext, rng):
    """One CN's multiplicative blinding share s_i * (C1, C2) with proof."""
    s = 0
    while s == 0:
        s = group.random_scalar(rng)
    blinded = Ciphertext(group.mul(s, ct.c1), group.mul(s, ct.c2))
    statement = LinearStatement(
        bases=((ct.c1,), (ct.c2,)),
        targets=(blinded.c1, blinded.c2),
    )
    proof = prove_linear(statement, (s,), rng)
    return blinded, proof


def cto_obfuscate(tree: CnTree, response_or_ct, rng):
    """Blind each ciphertext by s = sum of fresh per-CN secrets; zero maps to
    zero. Accepts a single Ciphertext or an EncodedResponse (vector only, the
    count stays readable). Returns (same shape, [ProtocolStep per CN])."""
    from .encodings import EncodedResponse

    single = isinstance(response_or_ct, Ciphertext)
    cts = [response_or_ct] if single else list(response_or_ct.vector)
    group = _group_of_point(cts[0].c1)
    totals = [None] * len(cts)
    steps = []
    for cn in tree.nodes:
        step = ProtocolStep(cn, "obfuscation")
        for j, ct in enumerate(cts):
            blinded, proof = cto_share(group, ct, rng)
            totals[j] = blinded if totals[j] is None else totals[j] + blinded
            step.payloads.append(proof.encode())
        steps.append(step)
    if single:
        return totals[0], steps
    return EncodedResponse(totals, response_or_ct.count), steps


def verify_cto_payload(group, payload: bytes, c1, c2) -> bool:
    from .proofs.linear import decode_linear

    proof = decode_linear(group, payload)
    st = proof.statement
    if len(st.targets) != 2 or st.n_secrets != 1:
        return False
    if st.bases != ((c1,), (c2,)):
        return False
    return verify_linear(proof)


def _group_of_point(point):
    if hasattr(point, "group"):
        return point.group
    from .group.ed25519 import GROUP

    return GROUP


# ---------------------------------------------------------------------------
# Collective differential privacy (CDP)


@dataclass
class NoiseList:
    epsilon: float
    delta_f: float
    theta: float
    values: list  # plaintext quantized noise, multiples of theta
    encrypted: list  # ciphertext list after the CN shuffle chain
    consumed: int = 0


def quantize_laplace(epsilon: float, delta_f: float, theta: float, l_count: int):
    """Deterministic symmetric quantization of Laplace(0, delta_f/epsilon)
    onto the lattice {k*theta}.

    Atom counts are chosen so that the quantized cumulative distribution
    centers every lattice interval of the target CDF (cumulative count
    through atom k is round(l * (F(k*theta) + F((k+1)*theta)) / 2)). This
    is the Kolmogorov-optimal placement for a fixed lattice: the sup
    deviation is half the heaviest interval's mass, which naive
    per-sample rounding roughly doubles by centering atoms instead of
    cumulative counts. The list is exactly symmetric and contains 0.
    """
    if epsilon <= 0 or delta_f <= 0 or theta <= 0 or l_count < 1:
        raise InvalidPrivacyParams("need epsilon, delta_f, theta > 0 and l >= 1")
    b = delta_f / epsilon

    def cdf(x: float) -> float:
        return 0.5 * math.exp(x / b) if x < 0 else 1.0 - 0.5 * math.exp(-x / b)

    # cumulative count through atom k (number of values <= k*theta), k >= 0
    cum = []
    k = 0
    while True:
        mid = (cdf(k * theta) + cdf((k + 1) * theta)) / 2.0
        m_k = round(l_count * mid)
        if cum:
            m_k = max(m_k, cum[-1])
        if k == 0:
            m_k = max(m_k, l_count // 2 + 1)  # keep at least one 0 in the list
        cum.append(min(m_k, l_count))
        if cum[-1] >= l_count:
            break
        k += 1
    n0 = 2 * cum[0] - l_count
    values = [0.0] * max(n0, 0)
    for k in range(1, len(cum)):
        n_k = cum[k] - cum[k - 1]
        values.extend([k * theta] * n_k)
        values.extend([-k * theta] * n_k)
    while len(values) < l_count:  # defensive; the mirrored counts sum to l exactly
        values.append(0.0)
    values.sort()
    return values[:l_count]


def cdp_generate(group, epsilon, delta_f, theta, l_count, tree: CnTree,
                 collective_pk, rng, scale: int = elgamal.DEFAULT_SCALE):
    """Build the public quantized noise list and run the sequential shuffle
    chain through every CN (ascending identity order).

    Initial encryptions are trivial (nonce 0): the list is public, so the
    first CN's verifiable shuffle supplies the actual rerandomization.
    Returns (NoiseList, [ProtocolStep per CN]).
    """
    values = quantize_laplace(epsilon, delta_f, theta, l_count)
    raws = [elgamal.fixed_encode(v, scale).raw for v in values]
    current = [elgamal.encrypt_with_nonce(group, m, collective_pk, 0) for m in raws]
    steps = []
    for cn in tree.nodes:
        outputs, proof = shuffle_and_prove(group, current, collective_pk, rng)
        current = list(outputs)
        steps.append(ProtocolStep(cn, "shuffle", [proof.encode()]))
    return NoiseList(epsilon, delta_f, theta, values, current), steps


def cdp_apply(response, noise: NoiseList):
    """Add the leading unconsumed noise ciphertexts to the response vector."""
    from .encodings import EncodedResponse

    d = len(response.vector)
    if noise.consumed + d > len(noise.encrypted):
        raise NoiseExhausted(
            f"need {d} noise ciphertexts, {len(noise.encrypted) - noise.consumed} left"
        )
    noisy = [
        response.vector[j] + noise.encrypted[noise.consumed + j] for j in range(d)
    ]
    noise.consumed += d
    return EncodedResponse(noisy, response.count)
